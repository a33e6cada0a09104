//! Line-delimited JSON storage for an assembled dataset.
//!
//! A dataset directory holds one record per line in each of:
//!
//! | file               | record                                             |
//! |--------------------|----------------------------------------------------|
//! | `posts.jsonl`      | [`Post`], questions and answers of kept threads     |
//! | `comments.jsonl`   | [`Comment`] attached to kept threads               |
//! | `users.jsonl`      | [`User`] with derived question/answer statistics   |
//! | `instances.jsonl`  | [`Instance`] in thread order                       |
//!
//! plus `summary.json` ([`DatasetSummary`]). Timestamps are RFC 3339 UTC.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::dump::ParseReport;
use super::{build_dataset, BuildReport, Comment, Dataset, Instance, Post, User};
use crate::error::{Error, Result};

pub const DATASET_FILES: [&str; 5] = [
    "posts.jsonl",
    "comments.jsonl",
    "users.jsonl",
    "instances.jsonl",
    "summary.json",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub questions: usize,
    pub answers: usize,
    pub threads: usize,
    pub instances: usize,
    pub positives: usize,
    pub negatives: usize,
    /// Negatives per positive over all raw answers, i.e. the `x` in `1:x`,
    /// before threads are excluded.
    pub raw_negative_per_positive: f64,
    pub negative_per_positive: f64,
    pub build: BuildReport,
    pub posts_parse: ParseReport,
    pub users_parse: ParseReport,
    pub comments_parse: ParseReport,
    pub badges_parse: Option<ParseReport>,
}

impl DatasetSummary {
    pub fn from_dataset(ds: &Dataset) -> Self {
        let positives = ds.positives();
        let negatives = ds.instances.len() - positives;
        let accepted_raw = positives.max(1) as f64;
        Self {
            questions: ds.report.raw_questions,
            answers: ds.report.raw_answers,
            threads: ds.threads.len(),
            instances: ds.instances.len(),
            positives,
            negatives,
            raw_negative_per_positive: (ds.report.raw_answers as f64 - positives as f64) / accepted_raw,
            negative_per_positive: negatives as f64 / accepted_raw,
            build: ds.report.clone(),
            ..Self::default()
        }
    }

    pub fn render(&self) -> String {
        format!(
            "questions\tanswers\tpositive/negative\n{}\t{}\t~1:{:.1}\n\
             kept threads: {}  instances: {}  positives: {}  negatives: {} (~1:{:.1})\n",
            self.questions,
            self.answers,
            self.raw_negative_per_positive,
            self.threads,
            self.instances,
            self.positives,
            self.negatives,
            self.negative_per_positive,
        )
    }
}

fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Record {
            file: name.clone(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn save_dataset(dir: &Path, ds: &Dataset, summary: &DatasetSummary) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let posts = ds
        .threads
        .iter()
        .flat_map(|t| std::iter::once(&t.question).chain(&t.answers));
    write_jsonl::<Post>(&dir.join("posts.jsonl"), posts)?;
    write_jsonl::<Comment>(
        &dir.join("comments.jsonl"),
        ds.threads.iter().flat_map(|t| t.all_comments()),
    )?;
    write_jsonl::<User>(&dir.join("users.jsonl"), ds.users.values())?;
    write_jsonl::<Instance>(&dir.join("instances.jsonl"), &ds.instances)?;
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(summary).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

/// Reads a dataset directory and re-assembles the threads. The rebuilt
/// instances must match `instances.jsonl` exactly.
pub fn load_dataset(dir: &Path) -> Result<(Dataset, DatasetSummary)> {
    for f in DATASET_FILES {
        let p = dir.join(f);
        if !p.exists() {
            return Err(Error::MissingStage {
                stage: "ingest",
                path: p,
            });
        }
    }
    let posts: Vec<Post> = read_jsonl(&dir.join("posts.jsonl"))?;
    let comments: Vec<Comment> = read_jsonl(&dir.join("comments.jsonl"))?;
    let users: Vec<User> = read_jsonl(&dir.join("users.jsonl"))?;
    let stored: Vec<Instance> = read_jsonl(&dir.join("instances.jsonl"))?;
    let summary_path = dir.join("summary.json");
    let summary_text =
        std::fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let summary: DatasetSummary =
        serde_json::from_str(&summary_text).map_err(|e| Error::Format(e.to_string()))?;

    let mut ds = build_dataset(posts, comments, users);
    if ds.instances != stored {
        return Err(Error::Format(format!(
            "{}: instances do not match the stored posts",
            dir.display()
        )));
    }
    ds.report = summary.build.clone();
    Ok((ds, summary))
}
