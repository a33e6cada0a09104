//! Stage runner over a workspace directory.
//!
//! Layout:
//!
//! ```text
//! <workspace>/
//!   .lock                     held while a command runs
//!   dataset/                  ingest: *.jsonl, summary.json, manifest.json
//!   lda/                      lda-train: fold<f>.lda, folds.csv, coherence.csv, manifest.json
//!   features/                 features: all.csv, <set>.csv, manifest.json
//!   runs/<run-id>/            evaluate and select outputs, manifest.json
//!   reports/<name>/           report outputs
//! ```
//!
//! Every stage writes a [`Manifest`] with its configuration, seeds and the
//! SHA-256 of each input file. A stage whose manifest already matches is
//! skipped unless forced; a stage whose upstream inputs changed since it ran
//! is reported as stale.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    apply_badges, build_dataset, load_dataset, parse_badges, parse_comments, parse_posts, parse_users, save_dataset,
    Dataset, DatasetSummary, DATASET_FILES,
};
use crate::error::{Error, Result};
use crate::features::{
    build_feature_table, textual_features, thread_folds, topic_corpus, FeatureGroup, FeatureGroupSet, FeatureTable,
};
use crate::learner::{
    fingerprint, grouped_stratified_kfold, train_gbdt, Classifier, EvaluationReport, ForestConfig, GbdtModel,
    TrainConfig,
};
use crate::selection::{
    greedy_select, importance_csv, importance_svg, render_importance, report_importance, report_table, Evaluator,
    SelectionTrace,
};
use crate::topic::{read_model, select_k, train_lda, write_model, LdaConfig, TopicModel};

pub const ENV_WORKSPACE: &str = "CQA_WORKSPACE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Gbdt,
    Rf,
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gbdt" | "lgb" => Ok(Self::Gbdt),
            "rf" => Ok(Self::Rf),
            other => Err(Error::Config(format!("unknown classifier {other:?}"))),
        }
    }
}

/// All knobs of a run. Loaded from a JSON document; command-line flags
/// override individual fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dump_dir: Option<PathBuf>,
    pub workspace: Option<PathBuf>,
    pub k_grid: Vec<usize>,
    /// Topic hyperparameters; `lda.k` is ignored in favour of `k_grid`.
    pub lda: LdaConfig,
    pub coherence_top_n: usize,
    pub gbdt: TrainConfig,
    pub forest: ForestConfig,
    pub k_folds: usize,
    /// Seed of the fold assignment.
    pub fold_seed: u64,
    pub groups: Vec<FeatureGroup>,
    pub pr: bool,
    pub classifier: ClassifierKind,
    /// Extra feature sets (like `S+UR`) evaluated by `select` for the report grid.
    pub combinations: Vec<String>,
    /// Baseline set for the paired t-test of `evaluate`.
    pub baseline: Option<String>,
    pub importance_top_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dump_dir: None,
            workspace: None,
            k_grid: vec![10, 20, 40, 80, 120],
            lda: LdaConfig::default(),
            coherence_top_n: 10,
            gbdt: TrainConfig::default(),
            forest: ForestConfig::default(),
            k_folds: 5,
            fold_seed: 42,
            groups: FeatureGroup::ALL.to_vec(),
            pr: true,
            classifier: ClassifierKind::Gbdt,
            combinations: vec!["S+UR".into(), "S+A+UR".into(), "S+A+Q".into()],
            baseline: None,
            importance_top_n: 15,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn classifier(&self, kind: ClassifierKind) -> Classifier {
        match kind {
            ClassifierKind::Gbdt => Classifier::Gbdt(self.gbdt.clone()),
            ClassifierKind::Rf => Classifier::Rf(self.forest.clone()),
        }
    }

    pub fn group_set(&self) -> FeatureGroupSet {
        FeatureGroupSet::new(self.groups.iter().copied(), self.pr)
    }
}

/// Parses a set written as `S+UR` or `S,UR`; a trailing `PR` item is ignored
/// since percent rank follows the run-wide toggle.
pub fn parse_set(spec: &str, pr: bool) -> Result<FeatureGroupSet> {
    let list: Vec<&str> = spec
        .split(['+', ','])
        .map(str::trim)
        .filter(|s| !s.is_empty() && !s.eq_ignore_ascii_case("pr"))
        .collect();
    FeatureGroupSet::parse(&list.join(","), pr)
}

/// Configuration, seeds and input hashes of one stage execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Input path (relative to the workspace, or `dump/<file>`) to SHA-256.
    pub inputs: BTreeMap<String, String>,
}

impl Manifest {
    fn new(stage: &str, config: serde_json::Value) -> Self {
        Self {
            stage: stage.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }

    /// Single-line JSON, for embedding in CSV and text headers.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("manifest serialises")
    }
}

/// Writes `.lock` on creation and removes it on drop.
#[derive(Debug)]
pub struct WorkspaceLock {
    path: PathBuf,
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Clone, Debug)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn lda_dir(&self) -> PathBuf {
        self.root.join("lda")
    }

    pub fn features_dir(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    /// Takes the workspace lock. A leftover `.lock` from a crashed process
    /// must be removed by hand.
    pub fn lock(&self) -> Result<WorkspaceLock> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let path = self.root.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkspaceLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    fn rel(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn hash_inputs(&self, manifest: &mut Manifest, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            manifest.inputs.insert(self.rel(p), hash_file(p)?);
        }
        Ok(())
    }

    /// Errors unless `stage` has run and its recorded inputs still match.
    fn check_current(&self, stage: &'static str, dir: &Path) -> Result<Manifest> {
        let path = dir.join("manifest.json");
        if !path.exists() {
            return Err(Error::MissingStage { stage, path });
        }
        let m: Manifest = read_json(&path)?;
        for (rel, hash) in &m.inputs {
            if rel.starts_with("dump/") {
                continue;
            }
            let p = self.root.join(rel);
            if !p.exists() || hash_file(&p)? != *hash {
                return Err(Error::Stale { stage, path: p });
            }
        }
        Ok(m)
    }
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    std::io::copy(&mut f, &mut h).map_err(|e| Error::io(path, e))?;
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Prefixes `body` with a `# manifest` comment line.
fn stamped(manifest: &Manifest, body: &str) -> String {
    format!("# manifest {}\n{body}", manifest.to_line())
}

/// A payload stored together with the manifest of the run that made it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub manifest: Manifest,
    pub data: T,
}

/// True when `dir` holds an identical manifest and all `outputs` exist.
fn up_to_date(dir: &Path, manifest: &Manifest, outputs: &[&str], force: bool) -> bool {
    if force {
        return false;
    }
    let path = dir.join("manifest.json");
    let Ok(old) = read_json::<Manifest>(&path) else {
        return false;
    };
    old == *manifest && outputs.iter().all(|o| dir.join(o).exists())
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serialises")
}

#[derive(Clone, Debug)]
pub struct StageOutcome {
    pub skipped: bool,
    pub message: String,
}

const DUMP_REQUIRED: [&str; 3] = ["Posts.xml", "Users.xml", "Comments.xml"];

/// Parses a dump directory into a dataset and its summary.
pub fn read_dump(dump_dir: &Path) -> Result<(Dataset, DatasetSummary)> {
    for f in DUMP_REQUIRED {
        let p = dump_dir.join(f);
        if !p.is_file() {
            return Err(Error::MissingFile(p));
        }
    }
    let open = |name: &str| -> Result<BufReader<File>> {
        let p = dump_dir.join(name);
        File::open(&p).map(BufReader::new).map_err(|e| Error::io(&p, e))
    };
    let badges_path = dump_dir.join("Badges.xml");
    let ((posts, users), (comments, badges)) = rayon::join(
        || rayon::join(|| parse_posts(open("Posts.xml")?), || parse_users(open("Users.xml")?)),
        || {
            rayon::join(
                || parse_comments(open("Comments.xml")?),
                || {
                    if badges_path.is_file() {
                        parse_badges(open("Badges.xml")?).map(Some)
                    } else {
                        Ok(None)
                    }
                },
            )
        },
    );
    let (posts, posts_parse) = posts?;
    let (mut users, users_parse) = users?;
    let (comments, comments_parse) = comments?;
    let badges = badges?;
    if let Some((b, _)) = &badges {
        apply_badges(&mut users, b);
    }
    let ds = build_dataset(posts, comments, users);
    let summary = DatasetSummary {
        posts_parse,
        users_parse,
        comments_parse,
        badges_parse: badges.map(|(_, r)| r),
        ..DatasetSummary::from_dataset(&ds)
    };
    Ok((ds, summary))
}

pub fn ingest(ws: &Workspace, dump_dir: &Path, force: bool) -> Result<StageOutcome> {
    if !dump_dir.is_dir() {
        return Err(Error::MissingFile(dump_dir.to_path_buf()));
    }
    let dir = ws.dataset_dir();
    let mut m = Manifest::new("ingest", serde_json::Value::Null);
    for f in DUMP_REQUIRED.iter().chain(&["Badges.xml"]) {
        let p = dump_dir.join(f);
        if p.is_file() {
            m.inputs.insert(format!("dump/{f}"), hash_file(&p)?);
        } else if *f != "Badges.xml" {
            return Err(Error::MissingFile(p));
        }
    }
    if up_to_date(&dir, &m, &DATASET_FILES, force) {
        let summary: DatasetSummary = read_json(&dir.join("summary.json"))?;
        return Ok(StageOutcome {
            skipped: true,
            message: summary.render(),
        });
    }
    let (ds, summary) = read_dump(dump_dir)?;
    if ds.instances.is_empty() {
        return Err(Error::DegenerateLabels(
            "no question in the dump has an accepted answer".into(),
        ));
    }
    save_dataset(&dir, &ds, &summary)?;
    write_json(&dir.join("manifest.json"), &m)?;
    info!("ingested {} threads", ds.threads.len());
    Ok(StageOutcome {
        skipped: false,
        message: summary.render(),
    })
}

fn dataset_inputs(ws: &Workspace) -> Vec<PathBuf> {
    ["posts.jsonl", "comments.jsonl", "users.jsonl", "instances.jsonl"]
        .iter()
        .map(|f| ws.dataset_dir().join(f))
        .collect()
}

fn load_current_dataset(ws: &Workspace) -> Result<Dataset> {
    ws.check_current("ingest", &ws.dataset_dir())?;
    Ok(load_dataset(&ws.dataset_dir())?.0)
}

fn instance_folds(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<usize>> {
    let qids: Vec<i64> = ds.instances.iter().map(|i| i.question_id).collect();
    let labels: Vec<f64> = ds.instances.iter().map(|i| f64::from(i.label)).collect();
    grouped_stratified_kfold(&qids, &labels, k, seed)
}

fn lda_config_value(cfg: &RunConfig) -> serde_json::Value {
    serde_json::json!({
        "k_grid": cfg.k_grid,
        "lda": cfg.lda,
        "coherence_top_n": cfg.coherence_top_n,
        "k_folds": cfg.k_folds,
        "fold_seed": cfg.fold_seed,
    })
}

/// Trains one topic model per fold on the posts of the other folds. The
/// topic count is chosen by coherence on the first fold's training posts
/// and reused for the remaining folds.
pub fn lda_train(ws: &Workspace, cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    let ds = load_current_dataset(ws)?;
    let dir = ws.lda_dir();
    let mut m = Manifest::new("lda-train", lda_config_value(cfg));
    m.seeds.insert("lda".into(), cfg.lda.seed);
    m.seeds.insert("folds".into(), cfg.fold_seed);
    ws.hash_inputs(&mut m, &dataset_inputs(ws))?;
    let outputs: Vec<String> = (0..cfg.k_folds)
        .map(|f| format!("fold{f}.lda"))
        .chain(["folds.csv".into(), "coherence.csv".into()])
        .collect();
    let output_refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    if up_to_date(&dir, &m, &output_refs, force) {
        let table = fs::read_to_string(dir.join("coherence.csv")).map_err(|e| Error::io(dir.join("coherence.csv"), e))?;
        return Ok(StageOutcome {
            skipped: true,
            message: table,
        });
    }
    let folds = instance_folds(&ds, cfg.k_folds, cfg.fold_seed)?;
    let tfolds = thread_folds(&ds, &folds);

    let corpus0 = topic_corpus(&ds, |t| tfolds[t] != 0);
    let selection = select_k(&corpus0, &cfg.k_grid, &cfg.lda, cfg.coherence_top_n)?;
    let best_k = selection.best_k;
    info!("selected {best_k} topics by coherence");
    let rest: Vec<TopicModel> = (1..cfg.k_folds)
        .into_par_iter()
        .map(|f| {
            let corpus = topic_corpus(&ds, |t| tfolds[t] != f);
            let lc = LdaConfig {
                k: best_k,
                seed: cfg.lda.seed.wrapping_add(f as u64),
                ..cfg.lda.clone()
            };
            train_lda(&corpus, &lc)
        })
        .collect::<Result<_>>()?;

    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_model(&dir.join("fold0.lda"), selection.best_model())?;
    for (i, model) in rest.iter().enumerate() {
        write_model(&dir.join(format!("fold{}.lda", i + 1)), model)?;
    }
    let mut folds_csv = String::from("question_id,fold\n");
    for (t, f) in ds.threads.iter().zip(&tfolds) {
        folds_csv.push_str(&format!("{},{f}\n", t.question.post_id));
    }
    write_text(&dir.join("folds.csv"), &stamped(&m, &folds_csv))?;
    let table = selection.to_csv();
    write_text(&dir.join("coherence.csv"), &stamped(&m, &table))?;
    write_json(&dir.join("manifest.json"), &m)?;
    Ok(StageOutcome {
        skipped: false,
        message: format!("{table}selected K = {best_k}\n"),
    })
}

fn lda_inputs(ws: &Workspace, k_folds: usize) -> Vec<PathBuf> {
    let dir = ws.lda_dir();
    (0..k_folds)
        .map(|f| dir.join(format!("fold{f}.lda")))
        .chain([dir.join("folds.csv")])
        .collect()
}

/// Builds the full table (all groups) and writes it with the requested
/// subset. Topic columns are included when `lda-train` has run.
pub fn features(ws: &Workspace, cfg: &RunConfig, set: &FeatureGroupSet, force: bool) -> Result<StageOutcome> {
    let ds = load_current_dataset(ws)?;
    let lda_manifest = if ws.lda_dir().join("manifest.json").exists() {
        Some(ws.check_current("lda-train", &ws.lda_dir())?)
    } else if set.contains(FeatureGroup::T) {
        return Err(Error::MissingStage {
            stage: "lda-train",
            path: ws.lda_dir().join("manifest.json"),
        });
    } else {
        None
    };
    let dir = ws.features_dir();
    let mut m = Manifest::new(
        "features",
        serde_json::json!({ "inference_iterations": cfg.lda.inference_iterations }),
    );
    m.seeds.insert("inference".into(), cfg.lda.seed);
    let mut inputs = dataset_inputs(ws);
    let lda_folds = match &lda_manifest {
        Some(lm) => {
            let k = lm.config["k_folds"]
                .as_u64()
                .ok_or_else(|| Error::Format("lda manifest lacks k_folds".into()))? as usize;
            inputs.extend(lda_inputs(ws, k));
            Some((k, lm.config["fold_seed"].as_u64().unwrap_or(0)))
        }
        None => None,
    };
    ws.hash_inputs(&mut m, &inputs)?;
    let subset_name = format!("{}.csv", set.slug());

    let table = if up_to_date(&dir, &m, &["all.csv"], force) {
        read_table(&dir.join("all.csv"))?
    } else {
        let textual = match lda_folds {
            Some((k, seed)) => {
                let models = (0..k)
                    .map(|f| read_model(&ws.lda_dir().join(format!("fold{f}.lda"))))
                    .collect::<Result<Vec<_>>>()?;
                let folds = instance_folds(&ds, k, seed)?;
                let tf = thread_folds(&ds, &folds);
                Some(textual_features(&ds, &models, &tf, cfg.lda.inference_iterations, cfg.lda.seed)?)
            }
            None => None,
        };
        let table = build_feature_table(&ds, textual.as_deref())?;
        write_table(&dir.join("all.csv"), &table, &m)?;
        write_json(&dir.join("manifest.json"), &m)?;
        table
    };
    let sub = table.select(set)?;
    write_table(&dir.join(&subset_name), &sub, &m)?;
    Ok(StageOutcome {
        skipped: false,
        message: format!(
            "{} rows, {} columns for {} -> {}\n",
            sub.n_rows(),
            sub.matrix.n_cols(),
            set.label(),
            dir.join(&subset_name).display()
        ),
    })
}

fn write_table(path: &Path, table: &FeatureTable, m: &Manifest) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    table.write_csv(f, &[format!("manifest {}", m.to_line())])
}

pub fn read_table(path: &Path) -> Result<FeatureTable> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    FeatureTable::read_csv(BufReader::new(f))
}

/// The full feature table, checked to be current, with its manifest.
fn load_current_table(ws: &Workspace) -> Result<(FeatureTable, Manifest)> {
    let fm = ws.check_current("features", &ws.features_dir())?;
    let lda_manifest = ws.lda_dir().join("manifest.json");
    if lda_manifest.exists() && !fm.inputs.keys().any(|k| k.starts_with("lda/")) {
        return Err(Error::Stale {
            stage: "features",
            path: ws.features_dir().join("all.csv"),
        });
    }
    let path = ws.features_dir().join("all.csv");
    if !path.exists() {
        return Err(Error::MissingStage { stage: "features", path });
    }
    Ok((read_table(&path)?, fm))
}

/// Topic features are out-of-fold only for the fold assignment they were
/// built with, so evaluation must use the same one.
fn check_fold_agreement(ws: &Workspace, cfg: &RunConfig, uses_topics: bool) -> Result<()> {
    if !uses_topics {
        return Ok(());
    }
    let lm: Manifest = read_json(&ws.lda_dir().join("manifest.json"))?;
    let k = lm.config["k_folds"].as_u64().unwrap_or(0) as usize;
    let seed = lm.config["fold_seed"].as_u64().unwrap_or(0);
    if k != cfg.k_folds || seed != cfg.fold_seed {
        return Err(Error::Config(format!(
            "topic features were built for {k} folds with seed {seed}; \
             re-run lda-train and features with --k {} (fold seed {})",
            cfg.k_folds, cfg.fold_seed
        )));
    }
    Ok(())
}

fn run_manifest(stage: &str, cfg: &RunConfig, kind: ClassifierKind, extra: serde_json::Value, fm: &Manifest) -> Manifest {
    let classifier = cfg.classifier(kind);
    let mut m = Manifest::new(
        stage,
        serde_json::json!({
            "classifier": to_value(&classifier),
            "k_folds": cfg.k_folds,
            "fold_seed": cfg.fold_seed,
            "pr": cfg.pr,
            "run": extra,
        }),
    );
    m.seeds.insert("folds".into(), cfg.fold_seed);
    match &classifier {
        Classifier::Gbdt(c) => m.seeds.insert("classifier".into(), c.seed),
        Classifier::Rf(c) => m.seeds.insert("classifier".into(), c.seed),
    };
    m.inputs.insert("features/all.csv".into(), fm.fingerprint());
    m
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub run_id: String,
    pub dir: PathBuf,
    pub skipped: bool,
    pub message: String,
}

fn full_fit(table: &FeatureTable, set: &FeatureGroupSet, cfg: &RunConfig, kind: ClassifierKind) -> Result<Option<GbdtModel>> {
    if kind != ClassifierKind::Gbdt {
        return Ok(None);
    }
    let sub = table.select(set)?;
    train_gbdt(&sub.matrix, &sub.labels, &cfg.gbdt).map(Some)
}

pub fn evaluate(
    ws: &Workspace,
    cfg: &RunConfig,
    set: &FeatureGroupSet,
    kind: ClassifierKind,
    force: bool,
) -> Result<RunOutcome> {
    let (table, fm) = load_current_table(ws)?;
    let baseline = cfg.baseline.as_deref().map(|b| parse_set(b, set.pr)).transpose()?;
    let uses_topics = set.contains(FeatureGroup::T) || baseline.as_ref().is_some_and(|b| b.contains(FeatureGroup::T));
    check_fold_agreement(ws, cfg, uses_topics)?;
    let m = run_manifest(
        "evaluate",
        cfg,
        kind,
        serde_json::json!({ "set": set.label(), "baseline": baseline.as_ref().map(FeatureGroupSet::label) }),
        &fm,
    );
    let run_id = format!("eval-{}-{}-k{}-{}", cfg.classifier(kind).name(), set.slug(), cfg.k_folds, &m.fingerprint()[..8]);
    let dir = ws.runs_dir().join(&run_id);
    let mut outputs = vec!["evaluation.csv", "evaluation.txt", "evaluation.json"];
    if kind == ClassifierKind::Gbdt {
        outputs.push("model.json");
    }
    if up_to_date(&dir, &m, &outputs, force) {
        let text = fs::read_to_string(dir.join("evaluation.txt")).map_err(|e| Error::io(dir.join("evaluation.txt"), e))?;
        return Ok(RunOutcome {
            run_id,
            dir,
            skipped: true,
            message: text,
        });
    }
    let evaluator = Evaluator::new(&table, cfg.classifier(kind), cfg.k_folds, cfg.fold_seed)?;
    let report = match &baseline {
        Some(b) => evaluator.compare(set, b)?,
        None => evaluator.evaluate(set)?,
    };
    let model = full_fit(&table, set, cfg, kind)?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_text(&dir.join("evaluation.csv"), &stamped(&m, &report.to_csv()))?;
    write_text(&dir.join("evaluation.txt"), &stamped(&m, &report.render()))?;
    write_json(
        &dir.join("evaluation.json"),
        &Stamped {
            manifest: m.clone(),
            data: vec![report.clone()],
        },
    )?;
    if let Some(model) = model {
        write_json(&dir.join("model.json"), &Stamped { manifest: m.clone(), data: model })?;
    }
    write_json(&dir.join("manifest.json"), &m)?;
    Ok(RunOutcome {
        run_id,
        dir,
        skipped: false,
        message: report.render(),
    })
}

/// Greedy selection over the configured groups plus the extra
/// combinations; every evaluation is kept for the report grid.
pub fn select(ws: &Workspace, cfg: &RunConfig, kind: ClassifierKind, force: bool) -> Result<RunOutcome> {
    let (table, fm) = load_current_table(ws)?;
    let groups: Vec<FeatureGroup> = cfg.groups.clone();
    check_fold_agreement(ws, cfg, groups.contains(&FeatureGroup::T))?;
    let combos = cfg
        .combinations
        .iter()
        .map(|c| parse_set(c, cfg.pr))
        .collect::<Result<Vec<_>>>()?;
    let combos: Vec<FeatureGroupSet> = combos
        .into_iter()
        .filter(|c| c.groups.iter().all(|g| groups.contains(g)))
        .collect();
    let m = run_manifest(
        "select",
        cfg,
        kind,
        serde_json::json!({
            "groups": groups,
            "combinations": combos.iter().map(FeatureGroupSet::label).collect::<Vec<_>>(),
        }),
        &fm,
    );
    let run_id = format!("select-{}-k{}-{}", cfg.classifier(kind).name(), cfg.k_folds, &m.fingerprint()[..8]);
    let dir = ws.runs_dir().join(&run_id);
    let mut outputs = vec!["trace.csv", "trace.txt", "trace.json", "evaluation.json"];
    if kind == ClassifierKind::Gbdt {
        outputs.push("model.json");
    }
    if up_to_date(&dir, &m, &outputs, force) {
        let text = fs::read_to_string(dir.join("trace.txt")).map_err(|e| Error::io(dir.join("trace.txt"), e))?;
        return Ok(RunOutcome {
            run_id,
            dir,
            skipped: true,
            message: text,
        });
    }
    let evaluator = Evaluator::new(&table, cfg.classifier(kind), cfg.k_folds, cfg.fold_seed)?;
    let trace: SelectionTrace = greedy_select(&evaluator, &groups, cfg.pr)?;
    let mut sets: Vec<FeatureGroupSet> = trace
        .steps
        .iter()
        .flat_map(|s| {
            s.candidates
                .iter()
                .map(|c| parse_set(&c.set, cfg.pr))
                .collect::<Vec<_>>()
        })
        .collect::<Result<_>>()?;
    sets.extend(combos);
    let mut reports: Vec<EvaluationReport> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for s in sets {
        if seen.insert(s.label()) {
            reports.push(evaluator.evaluate(&s)?);
        }
    }
    let final_set = trace
        .steps
        .last()
        .map(|s| s.set.clone())
        .ok_or_else(|| Error::Config("empty selection trace".into()))?;
    let model = full_fit(&table, &final_set, cfg, kind)?;

    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_text(&dir.join("trace.csv"), &stamped(&m, &trace.to_csv()))?;
    write_text(&dir.join("trace.txt"), &stamped(&m, &trace.render()))?;
    write_json(&dir.join("trace.json"), &Stamped { manifest: m.clone(), data: trace.clone() })?;
    write_json(&dir.join("evaluation.json"), &Stamped { manifest: m.clone(), data: reports })?;
    if let Some(model) = model {
        write_json(&dir.join("model.json"), &Stamped { manifest: m.clone(), data: model })?;
    }
    write_json(&dir.join("manifest.json"), &m)?;
    Ok(RunOutcome {
        run_id,
        dir,
        skipped: false,
        message: trace.render(),
    })
}

/// Run ids present in the workspace, sorted.
pub fn list_runs(ws: &Workspace) -> Result<Vec<String>> {
    let dir = ws.runs_dir();
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<String> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("manifest.json").exists())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    out.sort();
    Ok(out)
}

pub fn load_model(path: &Path) -> Result<GbdtModel> {
    Ok(read_json::<Stamped<GbdtModel>>(path)?.data)
}

pub fn load_trace(path: &Path) -> Result<SelectionTrace> {
    Ok(read_json::<Stamped<SelectionTrace>>(path)?.data)
}

pub fn load_evaluations(path: &Path) -> Result<Vec<EvaluationReport>> {
    Ok(read_json::<Stamped<Vec<EvaluationReport>>>(path)?.data)
}

/// Renders the AUC grid over the given runs (all runs when empty) and the
/// importance ranking of the first boosted model among them.
pub fn report(ws: &Workspace, cfg: &RunConfig, run_ids: &[String]) -> Result<StageOutcome> {
    let ids: Vec<String> = if run_ids.is_empty() {
        list_runs(ws)?
    } else {
        run_ids.to_vec()
    };
    if ids.is_empty() {
        return Err(Error::MissingStage {
            stage: "evaluate",
            path: ws.runs_dir(),
        });
    }
    let mut reports = Vec::new();
    let mut model: Option<(String, GbdtModel)> = None;
    let mut m = Manifest::new("report", serde_json::json!({ "runs": ids, "top_n": cfg.importance_top_n }));
    for id in &ids {
        let dir = ws.runs_dir().join(id);
        let eval = dir.join("evaluation.json");
        if !eval.exists() {
            return Err(Error::MissingStage {
                stage: "evaluate",
                path: eval,
            });
        }
        reports.extend(load_evaluations(&eval)?);
        ws.hash_inputs(&mut m, &[eval])?;
        let mp = dir.join("model.json");
        if model.is_none() && mp.exists() {
            model = Some((id.clone(), load_model(&mp)?));
        }
    }
    let name = match ids.as_slice() {
        [one] if !run_ids.is_empty() => one.clone(),
        _ if run_ids.is_empty() => "all".to_string(),
        _ => format!("combined-{}", &fingerprint(&ids)[..8]),
    };
    let dir = ws.reports_dir().join(name);
    let table = report_table(&reports);
    let mut text = table.render();
    write_text(&dir.join("auc_table.csv"), &stamped(&m, &table.to_csv()))?;
    if let Some((id, model)) = &model {
        let rows = report_importance(model, cfg.importance_top_n);
        let rendered = render_importance(&rows);
        text.push_str(&format!("\nfeature importance ({id}):\n{rendered}"));
        write_text(&dir.join("importance.csv"), &stamped(&m, &importance_csv(&rows)))?;
        write_text(
            &dir.join("importance.svg"),
            &format!("<!-- manifest {} -->\n{}", m.to_line().replace("--", "- -"), importance_svg(&rows)),
        )?;
    }
    write_text(&dir.join("report.txt"), &stamped(&m, &text))?;
    write_json(&dir.join("manifest.json"), &m)?;
    Ok(StageOutcome {
        skipped: false,
        message: text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_specs() {
        let s = parse_set("S+UR+PR", true).unwrap();
        assert_eq!(s.label(), "S+UR+PR");
        assert_eq!(parse_set("a,q", false).unwrap().label(), "A+Q");
        assert!(parse_set("PR", true).is_err());
    }

    #[test]
    fn config_round_trip_and_unknown_fields() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        let partial: RunConfig = serde_json::from_str(r#"{"k_folds": 3}"#).unwrap();
        assert_eq!(partial.k_folds, 3);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path());
        let guard = ws.lock().unwrap();
        assert!(matches!(ws.lock(), Err(Error::Locked(_))));
        drop(guard);
        assert!(ws.lock().is_ok());
    }
}
