//! Greedy forward selection over feature groups and the AUC / importance reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::features::{FeatureGroup, FeatureGroupSet};
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::learner::{
    cross_validate_with_folds, feature_importance, grouped_stratified_kfold, paired_t_test, Classifier,
    EvaluationReport, GbdtModel,
};

/// Cross-validates feature sets over one fixed fold assignment, caching
/// results so that repeated sets are evaluated once and every comparison
/// is paired by fold.
pub struct Evaluator<'a> {
    table: &'a FeatureTable,
    classifier: Classifier,
    folds: Vec<usize>,
    k: usize,
    cache: Mutex<HashMap<FeatureGroupSet, EvaluationReport>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(table: &'a FeatureTable, classifier: Classifier, k: usize, seed: u64) -> Result<Self> {
        let folds = grouped_stratified_kfold(&table.question_ids, &table.labels, k, seed)?;
        Ok(Self::with_folds(table, classifier, folds, k))
    }

    pub fn with_folds(table: &'a FeatureTable, classifier: Classifier, folds: Vec<usize>, k: usize) -> Self {
        Self {
            table,
            classifier,
            folds,
            k,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn folds(&self) -> &[usize] {
        &self.folds
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    pub fn evaluate(&self, set: &FeatureGroupSet) -> Result<EvaluationReport> {
        if let Some(r) = self.cache.lock().expect("cache poisoned").get(set) {
            return Ok(r.clone());
        }
        let sub = self.table.select(set)?;
        let report = cross_validate_with_folds(
            &sub.matrix,
            &sub.labels,
            &self.folds,
            self.k,
            &self.classifier,
            &set.label(),
        )?;
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(set.clone(), report.clone());
        Ok(report)
    }

    /// Evaluates `set` and attaches a paired t-test against `baseline`.
    pub fn compare(&self, set: &FeatureGroupSet, baseline: &FeatureGroupSet) -> Result<EvaluationReport> {
        let base = self.evaluate(baseline)?;
        let mut r = self.evaluate(set)?;
        r.t_test = Some(paired_t_test(&r.fold_aucs, &base.fold_aucs)?);
        r.baseline = Some(baseline.label());
        Ok(r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub set: String,
    pub mean: f64,
    pub fold_aucs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub added: FeatureGroup,
    pub set: FeatureGroupSet,
    pub mean: f64,
    pub fold_aucs: Vec<f64>,
    /// Paired t-test against the previous step; absent on the first step.
    pub t: Option<f64>,
    pub p_value: Option<f64>,
    /// Every set evaluated at this step, in canonical order of the added group.
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub classifier: String,
    pub config_fingerprint: String,
    pub k: usize,
    pub pr: bool,
    pub steps: Vec<SelectionStep>,
}

impl SelectionTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,added,set,mean_auc");
        for f in 0..self.k {
            let _ = write!(out, ",fold{f}");
        }
        out.push_str(",t,p_value\n");
        for (i, s) in self.steps.iter().enumerate() {
            let _ = write!(out, "{},{},{},{:.6}", i + 1, s.added, s.set.label(), s.mean);
            for a in &s.fold_aucs {
                let _ = write!(out, ",{a:.6}");
            }
            match (s.t, s.p_value) {
                (Some(t), Some(p)) => {
                    let _ = writeln!(out, ",{t:.6},{p:.6}");
                }
                _ => out.push_str(",,\n"),
            }
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "greedy selection [{}] k={} config={}\n",
            self.classifier, self.k, self.config_fingerprint
        );
        for (i, s) in self.steps.iter().enumerate() {
            let _ = write!(out, "step {}: +{:<3} {:<20} AUC {:.4}", i + 1, s.added.label(), s.set.label(), s.mean);
            if let Some(p) = s.p_value {
                let _ = write!(out, "  p = {p:.4}");
            }
            out.push('\n');
            for c in &s.candidates {
                let _ = writeln!(out, "    {:<20} {:.4}", c.set, c.mean);
            }
        }
        out
    }
}

/// Forward selection: start from the best single group, then repeatedly add
/// the group whose addition gives the highest mean AUC until `groups` is
/// exhausted. Ties go to the group earlier in canonical order.
pub fn greedy_select(evaluator: &Evaluator<'_>, groups: &[FeatureGroup], pr: bool) -> Result<SelectionTrace> {
    let mut remaining: Vec<FeatureGroup> = groups.to_vec();
    remaining.sort();
    remaining.dedup();
    if remaining.is_empty() {
        return Err(Error::Config("no feature groups to select from".into()));
    }
    let mut current = FeatureGroupSet::new([], pr);
    let mut steps: Vec<SelectionStep> = Vec::new();
    while !remaining.is_empty() {
        let evaluated: Vec<(FeatureGroup, FeatureGroupSet, EvaluationReport)> = remaining
            .par_iter()
            .map(|&g| {
                let set = current.with(g);
                evaluator.evaluate(&set).map(|r| (g, set, r))
            })
            .collect::<Result<_>>()?;
        let mut best = 0;
        for (i, (_, _, r)) in evaluated.iter().enumerate() {
            if r.mean > evaluated[best].2.mean {
                best = i;
            }
        }
        let candidates = evaluated
            .iter()
            .map(|(_, s, r)| Candidate {
                set: s.label(),
                mean: r.mean,
                fold_aucs: r.fold_aucs.clone(),
            })
            .collect();
        let (added, set, report) = evaluated[best].clone();
        let test = match steps.last() {
            Some(prev) => Some(paired_t_test(&report.fold_aucs, &prev.fold_aucs)?),
            None => None,
        };
        steps.push(SelectionStep {
            added,
            set: set.clone(),
            mean: report.mean,
            fold_aucs: report.fold_aucs,
            t: test.as_ref().map(|t| t.t),
            p_value: test.as_ref().map(|t| t.p_value),
            candidates,
        });
        remaining.retain(|g| *g != added);
        current = set;
    }
    Ok(SelectionTrace {
        classifier: evaluator.classifier.name().into(),
        config_fingerprint: evaluator.classifier.fingerprint(),
        k: evaluator.k,
        pr,
        steps,
    })
}

/// Mean AUC per feature set (rows) and classifier (columns).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportTable {
    pub classifiers: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl ReportTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature_set");
        for c in &self.classifiers {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for (set, cells) in &self.rows {
            out.push_str(set);
            for c in cells {
                match c {
                    Some(v) => {
                        let _ = write!(out, ",{v:.3}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|(s, _)| s.len()).max().unwrap_or(0).max(11);
        let mut out = format!("{:<width$}", "Feature set");
        for c in &self.classifiers {
            let _ = write!(out, "  {:>6}", c.to_ascii_uppercase());
        }
        out.push('\n');
        for (set, cells) in &self.rows {
            let _ = write!(out, "{set:<width$}");
            for c in cells {
                match c {
                    Some(v) => {
                        let _ = write!(out, "  {v:>6.3}");
                    }
                    None => {
                        let _ = write!(out, "  {:>6}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Orders set labels by number of groups, then by canonical group order,
/// with the percent-rank variant after the plain one.
fn set_sort_key(label: &str) -> (usize, Vec<usize>, bool) {
    let parts: Vec<&str> = label.split('+').collect();
    let pr = parts.contains(&"PR");
    let idx: Vec<usize> = parts
        .iter()
        .filter_map(|p| p.parse::<FeatureGroup>().ok())
        .map(|g| FeatureGroup::ALL.iter().position(|x| *x == g).unwrap_or(usize::MAX))
        .collect();
    (idx.len(), idx, pr)
}

/// Builds the grid from completed evaluations. When a (set, classifier)
/// pair occurs more than once, the last report wins.
pub fn report_table(reports: &[EvaluationReport]) -> ReportTable {
    let mut classifiers: Vec<String> = reports.iter().map(|r| r.classifier.clone()).collect();
    classifiers.sort_by_key(|c| (c != "gbdt", c.clone()));
    classifiers.dedup();
    let mut cells: BTreeMap<(usize, Vec<usize>, bool, String), Vec<Option<f64>>> = BTreeMap::new();
    for r in reports {
        let (n, idx, pr) = set_sort_key(&r.feature_set);
        let row = cells
            .entry((n, idx, pr, r.feature_set.clone()))
            .or_insert_with(|| vec![None; classifiers.len()]);
        let col = classifiers.iter().position(|c| *c == r.classifier).unwrap_or(0);
        row[col] = Some(r.mean);
    }
    ReportTable {
        classifiers,
        rows: cells.into_iter().map(|((_, _, _, s), v)| (s, v)).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub rank: usize,
    pub feature: String,
    pub group: String,
    pub gain: f64,
}

/// Group tag of a column name; difference features are tagged `A-Q`.
pub fn group_tag(column: &str) -> &'static str {
    match column.split('.').next() {
        Some("s") => "S",
        Some("t") => "T",
        Some("a") => "A",
        Some("q") => "Q",
        Some("ur") => "UR",
        Some("diff") => "A-Q",
        _ => "?",
    }
}

/// Top `top_n` features by average split gain.
pub fn report_importance(model: &GbdtModel, top_n: usize) -> Vec<ImportanceRow> {
    feature_importance(model)
        .into_iter()
        .take(top_n)
        .enumerate()
        .map(|(i, (feature, gain))| ImportanceRow {
            rank: i + 1,
            group: group_tag(&feature).into(),
            feature,
            gain,
        })
        .collect()
}

pub fn importance_csv(rows: &[ImportanceRow]) -> String {
    let mut out = String::from("rank,feature,group,avg_gain\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:.6}", r.rank, r.feature, r.group, r.gain);
    }
    out
}

pub fn render_importance(rows: &[ImportanceRow]) -> String {
    let width = rows.iter().map(|r| r.feature.len()).max().unwrap_or(7).max(7);
    let mut out = format!("{:>4}  {:<width$}  {:<5}  {:>10}\n", "rank", "feature", "group", "avg gain");
    for r in rows {
        let _ = writeln!(out, "{:>4}  {:<width$}  {:<5}  {:>10.4}", r.rank, r.feature, r.group, r.gain);
    }
    out
}

/// Horizontal bar chart of the importance ranking as a standalone SVG.
pub fn importance_svg(rows: &[ImportanceRow]) -> String {
    let bar_h = 18;
    let label_w = 260;
    let bar_w = 400.0;
    let height = rows.len() * bar_h + 20;
    let max = rows.iter().map(|r| r.gain).fold(0.0_f64, f64::max);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{height}\" font-family=\"monospace\" font-size=\"12\">\n",
        label_w + 480
    );
    for (i, r) in rows.iter().enumerate() {
        let y = 10 + i * bar_h;
        let w = if max > 0.0 { r.gain / max * bar_w } else { 0.0 };
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{} [{}]</text>",
            label_w - 6,
            y + 13,
            html_escape::encode_text(&r.feature),
            r.group
        );
        let _ = writeln!(
            out,
            "<rect x=\"{label_w}\" y=\"{}\" width=\"{w:.1}\" height=\"{}\" fill=\"#4a78b0\"/>",
            y + 2,
            bar_h - 4
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{}\">{:.3}</text>",
            label_w as f64 + w + 4.0,
            y + 13,
            r.gain
        );
    }
    out.push_str("</svg>\n");
    out
}
