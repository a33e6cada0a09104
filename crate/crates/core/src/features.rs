//! Assembly of the group-tagged feature table.
//!
//! Column names are `<group>.<feature>[.rank|.prank]` with group prefixes
//! `s`, `t`, `a`, `q`, `diff` and `ur`. Shallow features always carry a
//! `.rank` companion; every feature carries a `.prank` companion, kept only
//! when percent rank is switched on. `diff.*` columns are kept only when both
//! the answerer and questioner groups are selected.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Thread};
use crate::error::{Error, Result};
use crate::learner::FeatureMatrix;
use crate::relation::{build_graph, extract_relation, RelationFeatures};
use crate::shallow::{default_direction, extract_shallow, percent_rank, rank_within_thread, Direction, ShallowFeatures};
use crate::text::topic_tokens;
use crate::topic::{extract_textual, infer, TextualFeatures, TopicCorpus, TopicModel};
use crate::user::{difference_features, extract_answerer, extract_questioner, UserFeatureVector};

pub const KEY_COLUMNS: [&str; 3] = ["question_id", "answer_id", "label"];

/// Minimum document frequency for the topic vocabulary.
pub const TOPIC_MIN_DF: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    S,
    T,
    A,
    Q,
    UR,
}

impl FeatureGroup {
    /// Canonical order, also used to break ties during selection.
    pub const ALL: [FeatureGroup; 5] = [Self::S, Self::T, Self::A, Self::Q, Self::UR];

    pub fn prefix(self) -> &'static str {
        match self {
            Self::S => "s",
            Self::T => "t",
            Self::A => "a",
            Self::Q => "q",
            Self::UR => "ur",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::S => "S",
            Self::T => "T",
            Self::A => "A",
            Self::Q => "Q",
            Self::UR => "UR",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S" => Ok(Self::S),
            "T" => Ok(Self::T),
            "A" => Ok(Self::A),
            "Q" => Ok(Self::Q),
            "UR" => Ok(Self::UR),
            other => Err(Error::Config(format!("unknown feature group {other:?}"))),
        }
    }
}

/// A set of feature groups plus the percent-rank toggle.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureGroupSet {
    pub groups: BTreeSet<FeatureGroup>,
    pub pr: bool,
}

impl FeatureGroupSet {
    pub fn new(groups: impl IntoIterator<Item = FeatureGroup>, pr: bool) -> Self {
        Self {
            groups: groups.into_iter().collect(),
            pr,
        }
    }

    pub fn all(pr: bool) -> Self {
        Self::new(FeatureGroup::ALL, pr)
    }

    /// Parses a comma separated list such as `S,UR,A`.
    pub fn parse(list: &str, pr: bool) -> Result<Self> {
        let groups = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<BTreeSet<_>>>()?;
        if groups.is_empty() {
            return Err(Error::Config("empty feature group list".into()));
        }
        Ok(Self { groups, pr })
    }

    pub fn contains(&self, g: FeatureGroup) -> bool {
        self.groups.contains(&g)
    }

    pub fn has_difference(&self) -> bool {
        self.contains(FeatureGroup::A) && self.contains(FeatureGroup::Q)
    }

    pub fn with(&self, g: FeatureGroup) -> Self {
        let mut s = self.clone();
        s.groups.insert(g);
        s
    }

    /// Whether a table column belongs to this set.
    pub fn includes_column(&self, name: &str) -> bool {
        let mut parts = name.split('.');
        let group_ok = match parts.next() {
            Some("diff") => self.has_difference(),
            Some(p) => self.groups.iter().any(|g| g.prefix() == p),
            None => false,
        };
        group_ok && (self.pr || !name.ends_with(".prank"))
    }

    /// Row label in the style `S+UR+A+PR`, groups in canonical order.
    pub fn label(&self) -> String {
        let mut parts: Vec<&str> = self.groups.iter().map(|g| g.label()).collect();
        if self.pr {
            parts.push("PR");
        }
        parts.join("+")
    }

    /// File-name friendly form of [`label`](Self::label).
    pub fn slug(&self) -> String {
        self.label().to_ascii_lowercase().replace('+', "_")
    }
}

impl fmt::Display for FeatureGroupSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// One row per instance: keys, label and every feature column.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub question_ids: Vec<i64>,
    pub answer_ids: Vec<i64>,
    pub labels: Vec<f64>,
    pub matrix: FeatureMatrix,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn has_group(&self, g: FeatureGroup) -> bool {
        let prefix = format!("{}.", g.prefix());
        self.matrix.names().iter().any(|n| n.starts_with(&prefix))
    }

    /// The same rows restricted to the columns of `set`.
    pub fn select(&self, set: &FeatureGroupSet) -> Result<Self> {
        if let Some(g) = set.groups.iter().find(|g| !self.has_group(**g)) {
            return Err(match g {
                FeatureGroup::T => Error::MissingStage {
                    stage: "lda-train",
                    path: "topic features".into(),
                },
                _ => Error::Format(format!("feature table has no {g} columns")),
            });
        }
        Ok(Self {
            matrix: self.matrix.select_columns(|n| set.includes_column(n)),
            ..self.clone()
        })
    }

    /// Writes CSV; missing values are empty cells. `preamble` lines are
    /// written first, each prefixed with `# `.
    pub fn write_csv<W: Write>(&self, w: W, preamble: &[String]) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let io = |e| Error::io("feature csv", e);
        for line in preamble {
            writeln!(w, "# {line}").map_err(io)?;
        }
        let mut csv = csv::Writer::from_writer(w);
        let header = KEY_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.matrix.names().iter().cloned());
        csv.write_record(header).map_err(csv_err)?;
        let mut record: Vec<String> = Vec::with_capacity(3 + self.matrix.n_cols());
        for i in 0..self.n_rows() {
            record.clear();
            record.push(self.question_ids[i].to_string());
            record.push(self.answer_ids[i].to_string());
            record.push(format!("{}", self.labels[i] as u8));
            for c in self.matrix.columns() {
                let v = c[i];
                record.push(if v.is_nan() { String::new() } else { format!("{v}") });
            }
            csv.write_record(&record).map_err(csv_err)?;
        }
        csv.flush().map_err(io)?;
        Ok(())
    }

    /// Reads what [`write_csv`](Self::write_csv) wrote; `#` lines are skipped.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let header = csv.headers().map_err(csv_err)?.clone();
        if header.len() < 3 || header.iter().take(3).ne(KEY_COLUMNS) {
            return Err(Error::Format("feature csv must start with question_id,answer_id,label".into()));
        }
        let names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        let (mut qids, mut aids, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in csv.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let bad = |what: &str| Error::Format(format!("feature csv row {}: bad {what}", row + 1));
            qids.push(rec[0].parse::<i64>().map_err(|_| bad("question_id"))?);
            aids.push(rec[1].parse::<i64>().map_err(|_| bad("answer_id"))?);
            labels.push(rec[2].parse::<f64>().map_err(|_| bad("label"))?);
            for (j, col) in columns.iter_mut().enumerate() {
                let cell = &rec[j + 3];
                col.push(if cell.is_empty() {
                    f64::NAN
                } else {
                    cell.parse::<f64>().map_err(|_| bad(&names[j]))?
                });
            }
        }
        let matrix = FeatureMatrix::new(names, columns)?;
        Ok(Self {
            question_ids: qids,
            answer_ids: aids,
            labels,
            matrix,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("feature csv: {e}"))
}

/// Builds one raw column per feature plus its rank companions, filled row
/// by row in instance order.
struct ColumnBuilder {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl ColumnBuilder {
    fn new() -> Self {
        Self {
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    /// Adds `<prefix>.<name>`, optionally `.rank`, and `.prank` for a
    /// feature whose per-thread values are produced by `values`.
    fn add<F>(&mut self, ds: &Dataset, prefix: &str, name: &str, with_rank: bool, direction: Direction, values: F)
    where
        F: Fn(usize) -> Vec<f64> + Sync,
    {
        let n = ds.instances.len();
        let mut raw = vec![f64::NAN; n];
        let mut rank = vec![f64::NAN; n];
        let mut prank = vec![f64::NAN; n];
        let per_thread: Vec<(Vec<f64>, Vec<Option<usize>>)> = (0..ds.threads.len())
            .into_par_iter()
            .map(|t| {
                let v = values(t);
                let r = rank_within_thread(&v, direction);
                (v, r)
            })
            .collect();
        for (i, inst) in ds.instances.iter().enumerate() {
            let (v, r) = &per_thread[inst.thread];
            raw[i] = v[inst.answer];
            if let Some(r) = r[inst.answer] {
                rank[i] = r as f64;
            }
            let p = percent_rank(&r[inst.answer..=inst.answer], v.len());
            prank[i] = p[0].unwrap_or(f64::NAN);
        }
        let base = format!("{prefix}.{name}");
        self.names.push(base.clone());
        self.columns.push(raw);
        if with_rank {
            self.names.push(format!("{base}.rank"));
            self.columns.push(rank);
        }
        self.names.push(format!("{base}.prank"));
        self.columns.push(prank);
    }
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Answerer statistics with the answer's own contribution removed from the
/// acceptance rate, so that the feature never encodes its own label.
fn answerer_features(ds: &Dataset, thread: &Thread, answer: usize) -> UserFeatureVector {
    let a = &thread.answers[answer];
    let mut v = extract_answerer(a, &ds.users);
    let accepted = Some(a.post_id) == thread.question.accepted_answer_id;
    if let Some(u) = a.owner.and_then(|id| ds.users.get(&id)) {
        let n = f64::from(u.a_count);
        v.0[9] = match u.accept_rate {
            Some(r) if u.a_count > 1 => {
                let hits = (r * n).round() - f64::from(u8::from(accepted));
                Some(hits / (n - 1.0))
            }
            _ => None,
        };
    }
    v
}

/// The complete table with every group. `textual` supplies the topic
/// features per instance; without it the table has no `t.*` columns.
pub fn build_feature_table(ds: &Dataset, textual: Option<&[TextualFeatures]>) -> Result<FeatureTable> {
    if let Some(t) = textual {
        if t.len() != ds.instances.len() {
            return Err(Error::Dimension {
                expected: ds.instances.len(),
                actual: t.len(),
            });
        }
    }
    let mut b = ColumnBuilder::new();

    let shallow: Vec<Vec<ShallowFeatures>> = ds.threads.par_iter().map(extract_shallow).collect();
    for (j, name) in ShallowFeatures::NAMES.iter().enumerate() {
        b.add(ds, "s", name, true, default_direction(name), |t| {
            shallow[t].iter().map(|f| f.values()[j]).collect()
        });
    }

    if let Some(textual) = textual {
        let mut by_thread: Vec<Vec<[f64; 5]>> = ds
            .threads
            .iter()
            .map(|t| vec![[f64::NAN; 5]; t.answers.len()])
            .collect();
        for (inst, f) in ds.instances.iter().zip(textual) {
            by_thread[inst.thread][inst.answer] = f.values();
        }
        for (j, name) in TextualFeatures::NAMES.iter().enumerate() {
            b.add(ds, "t", name, false, Direction::HigherBetter, |t| {
                by_thread[t].iter().map(|f| f[j]).collect()
            });
        }
    }

    let answerers: Vec<Vec<UserFeatureVector>> = ds
        .threads
        .iter()
        .map(|t| (0..t.answers.len()).map(|a| answerer_features(ds, t, a)).collect())
        .collect();
    let questioners: Vec<UserFeatureVector> = ds
        .threads
        .iter()
        .map(|t| extract_questioner(t, &ds.users))
        .collect();
    for (j, name) in UserFeatureVector::NAMES.iter().enumerate() {
        b.add(ds, "a", name, false, Direction::HigherBetter, |t| {
            answerers[t].iter().map(|u| opt(u.0[j])).collect()
        });
    }
    for (j, name) in UserFeatureVector::NAMES.iter().enumerate() {
        b.add(ds, "q", name, false, Direction::HigherBetter, |t| {
            vec![opt(questioners[t].0[j]); ds.threads[t].answers.len()]
        });
    }
    for (j, name) in UserFeatureVector::NAMES.iter().enumerate() {
        b.add(ds, "diff", name, false, Direction::HigherBetter, |t| {
            answerers[t]
                .iter()
                .map(|a| opt(difference_features(&questioners[t], a)[j]))
                .collect()
        });
    }

    let graph = build_graph(&ds.threads);
    let relation: Vec<Vec<Option<RelationFeatures>>> = ds
        .threads
        .iter()
        .map(|t| t.answers.iter().map(|a| extract_relation(t, a, &graph)).collect())
        .collect();
    for (j, name) in RelationFeatures::NAMES.iter().enumerate() {
        b.add(ds, "ur", name, false, Direction::HigherBetter, |t| {
            relation[t]
                .iter()
                .map(|r| r.as_ref().map_or(f64::NAN, |r| r.values()[j]))
                .collect()
        });
    }

    Ok(FeatureTable {
        question_ids: ds.instances.iter().map(|i| i.question_id).collect(),
        answer_ids: ds.instances.iter().map(|i| i.answer_id).collect(),
        labels: ds.instances.iter().map(|i| f64::from(i.label)).collect(),
        matrix: FeatureMatrix::new(b.names, b.columns)?,
    })
}

/// Topic tokens of every post in a thread: the question first, then answers.
pub fn thread_documents(thread: &Thread) -> Vec<Vec<String>> {
    std::iter::once(&thread.question)
        .chain(&thread.answers)
        .map(|p| topic_tokens(&p.body_text))
        .collect()
}

/// Topic corpus over the posts of the threads selected by `keep`.
pub fn topic_corpus(ds: &Dataset, keep: impl Fn(usize) -> bool) -> TopicCorpus {
    let docs: Vec<Vec<String>> = ds
        .threads
        .iter()
        .enumerate()
        .filter(|(t, _)| keep(*t))
        .flat_map(|(_, th)| thread_documents(th))
        .collect();
    TopicCorpus::build(&docs, TOPIC_MIN_DF)
}

/// Fold of every thread, read off the per-instance fold assignment.
pub fn thread_folds(ds: &Dataset, instance_folds: &[usize]) -> Vec<usize> {
    let mut out = vec![0; ds.threads.len()];
    for (inst, f) in ds.instances.iter().zip(instance_folds) {
        out[inst.thread] = *f;
    }
    out
}

/// Out-of-fold topic features: each thread is scored with the model that
/// was trained without its fold. Inference seeds derive from `seed` and the
/// post id, so results do not depend on scheduling.
pub fn textual_features(
    ds: &Dataset,
    models: &[TopicModel],
    thread_folds: &[usize],
    inference_iterations: usize,
    seed: u64,
) -> Result<Vec<TextualFeatures>> {
    if thread_folds.len() != ds.threads.len() {
        return Err(Error::Dimension {
            expected: ds.threads.len(),
            actual: thread_folds.len(),
        });
    }
    if let Some(f) = thread_folds.iter().find(|f| **f >= models.len()) {
        return Err(Error::Topic(format!("no topic model for fold {f}")));
    }
    let per_thread: Vec<Vec<TextualFeatures>> = ds
        .threads
        .par_iter()
        .enumerate()
        .map(|(t, th)| {
            let model = &models[thread_folds[t]];
            let docs = thread_documents(th);
            let post_seed = |id: i64| seed ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let q = infer(model, &docs[0], inference_iterations, post_seed(th.question.post_id));
            th.answers
                .iter()
                .zip(&docs[1..])
                .map(|(a, d)| {
                    let ad = infer(model, d, inference_iterations, post_seed(a.post_id));
                    extract_textual(&q, &ad)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(ds
        .instances
        .iter()
        .map(|i| per_thread[i.thread][i.answer].clone())
        .collect())
}
