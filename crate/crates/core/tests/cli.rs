use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

mod common;

const CQA: &str = env!("CARGO_BIN_EXE_cqa");

fn cqa(ws: &Path, args: &[&str]) -> Output {
    Command::new(CQA)
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .env_remove("CQA_WORKSPACE")
        .output()
        .expect("run cqa")
}

#[track_caller]
fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[track_caller]
fn fails_with(out: Output, code: i32, needle: &str) {
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(code), "stderr: {err}");
    assert!(err.contains(needle), "expected {needle:?} in: {err}");
}

fn dump(dir: &Path) -> PathBuf {
    let d = dir.join("dump");
    fs::create_dir_all(&d).unwrap();
    common::write_dump(&d, &common::DumpSpec::default());
    d
}

const LDA: &[&str] = &["lda-train", "--k-grid", "3,5", "--iterations", "40"];
const FAST: &[&str] = &["--trees", "20"];

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run(ws: &Path, args: Vec<String>) -> String {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(cqa(ws, &refs))
}

/// Data rows and header of a CSV with `#` comment lines.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn full_pipeline(dump: &Path, ws: &Path) {
    ok(cqa(ws, &["ingest", "--dump-dir", dump.to_str().unwrap()]));
    ok(cqa(ws, LDA));
    ok(cqa(ws, &["features"]));
    run(ws, with(&["evaluate", "--groups", "S,UR", "--baseline", "S"], FAST));
    run(ws, with(&["select", "--groups", "S,A,Q"], FAST));
    ok(cqa(ws, &["report"]));
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn pipeline_outputs_have_documented_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dump(tmp.path());
    let ws = tmp.path().join("ws");
    full_pipeline(&d, &ws);

    let (header, rows) = read_csv(&ws.join("features/all.csv"));
    assert_eq!(&header[..3], ["question_id", "answer_id", "label"]);
    for prefix in ["s.", "t.", "a.", "q.", "diff.", "ur."] {
        assert!(header.iter().any(|h| h.starts_with(prefix)), "no {prefix} columns");
    }
    assert!(rows.iter().all(|r| r.len() == header.len()));
    assert!(rows.iter().all(|r| r[2] == "0" || r[2] == "1"));
    // one accepted answer per kept question
    let questions: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(rows.iter().filter(|r| r[2] == "1").count(), questions.len());

    let runs: Vec<String> = fs::read_dir(ws.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    let eval = runs.iter().find(|r| r.starts_with("eval-gbdt-s_ur_pr-k5-")).expect("eval run");
    let (h, rows) = read_csv(&ws.join("runs").join(eval).join("evaluation.csv"));
    assert_eq!(h, ["fold", "auc"]);
    let labels: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["0", "1", "2", "3", "4", "mean", "std", "t", "p_value"]);
    for r in &rows[..5] {
        let a: f64 = r[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&a));
    }

    let sel = runs.iter().find(|r| r.starts_with("select-gbdt-k5-")).expect("select run");
    let (h, rows) = read_csv(&ws.join("runs").join(sel).join("trace.csv"));
    assert_eq!(h[0], "step");
    assert_eq!(rows.len(), 3);

    for f in ["auc_table.csv", "importance.csv", "importance.svg", "report.txt"] {
        assert!(ws.join("reports/all").join(f).is_file(), "{f}");
    }
    let (h, _) = read_csv(&ws.join("reports/all/importance.csv"));
    assert_eq!(h, ["rank", "feature", "group", "avg_gain"]);
    assert!(!ws.join(".lock").exists());
}

#[test]
fn difference_columns_need_both_user_groups() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dump(tmp.path());
    let ws = tmp.path().join("ws");
    ok(cqa(&ws, &["ingest", "--dump-dir", d.to_str().unwrap()]));
    ok(cqa(&ws, &["features", "--groups", "A", "--no-pr"]));
    ok(cqa(&ws, &["features", "--groups", "A,Q", "--no-pr"]));
    ok(cqa(&ws, &["features", "--groups", "S"]));

    let (a, _) = read_csv(&ws.join("features/a.csv"));
    assert!(a.iter().all(|h| !h.starts_with("diff.") && !h.starts_with("q.")));
    let (aq, _) = read_csv(&ws.join("features/a_q.csv"));
    let diffs: Vec<&String> = aq.iter().filter(|h| h.starts_with("diff.")).collect();
    let answerer = aq.iter().filter(|h| h.starts_with("a.")).count();
    assert_eq!(diffs.len(), answerer);
    assert!(aq.iter().all(|h| !h.ends_with(".prank")));

    let (s, _) = read_csv(&ws.join("features/s_pr.csv"));
    assert!(s.iter().any(|h| h.ends_with(".rank")));
    assert!(s.iter().any(|h| h.ends_with(".prank")));
    assert!(s.iter().skip(3).all(|h| h.starts_with("s.")));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = tmp.path().join("ws");
    let empty = tmp.path().join("empty");
    fs::create_dir_all(&empty).unwrap();

    // usage and configuration errors
    let no_ws = Command::new(CQA).args(["features"]).env_remove("CQA_WORKSPACE").output().unwrap();
    fails_with(no_ws, 2, "workspace");
    fails_with(cqa(&ws, &["frobnicate"]), 2, "frobnicate");
    fails_with(cqa(&ws, &["features", "--groups", "S,X"]), 2, "X");
    let bad_cfg = tmp.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"k_folds": 5, "colour": "red"}"#).unwrap();
    fails_with(cqa(&ws, &["--config", bad_cfg.to_str().unwrap(), "features"]), 2, "colour");

    // data errors
    fails_with(cqa(&ws, &["ingest", "--dump-dir", empty.to_str().unwrap()]), 3, "Posts.xml");
    fails_with(cqa(&ws, &["features"]), 3, "ingest");
    fs::write(empty.join("Posts.xml"), "<posts><row Id=\"1\" PostTypeId=\"1\"").unwrap();
    fs::write(empty.join("Users.xml"), "<users></users>").unwrap();
    fs::write(empty.join("Comments.xml"), "<comments></comments>").unwrap();
    fails_with(cqa(&ws, &["ingest", "--dump-dir", empty.to_str().unwrap()]), 3, "Posts.xml");

    // help is not an error
    assert_eq!(Command::new(CQA).arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn workspace_lock_blocks_a_second_writer() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = tmp.path().join("ws");
    fs::create_dir_all(&ws).unwrap();
    fs::write(ws.join(".lock"), "4242").unwrap();
    fails_with(cqa(&ws, &["features"]), 2, "locked");
    assert!(ws.join(".lock").exists());
}

#[test]
fn stages_skip_detect_staleness_and_force() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dump(tmp.path());
    let ws = tmp.path().join("ws");
    ok(cqa(&ws, &["ingest", "--dump-dir", d.to_str().unwrap()]));
    ok(cqa(&ws, &["features", "--groups", "S"]));
    let csv = ws.join("features/all.csv");
    let before = fs::metadata(&csv).unwrap().modified().unwrap();
    ok(cqa(&ws, &["features", "--groups", "S"]));
    assert_eq!(fs::metadata(&csv).unwrap().modified().unwrap(), before, "second run was not skipped");
    ok(cqa(&ws, &["--force", "features", "--groups", "S"]));
    assert_ne!(fs::metadata(&csv).unwrap().modified().unwrap(), before);

    // a consumer of an artifact whose inputs changed refuses to run
    let inst = ws.join("dataset/instances.jsonl");
    let mut text = fs::read_to_string(&inst).unwrap();
    text.push('\n');
    fs::write(&inst, text).unwrap();
    let eval = with(&["evaluate", "--groups", "S"], FAST);
    let eval: Vec<&str> = eval.iter().map(String::as_str).collect();
    fails_with(cqa(&ws, &eval), 3, "out of date");
    // the stage itself recomputes from its changed inputs
    ok(cqa(&ws, &["features", "--groups", "S"]));
    ok(cqa(&ws, &eval));

    // ingest notices an edited dump and runs again
    let manifest = ws.join("dataset/manifest.json");
    let old = fs::read(&manifest).unwrap();
    let comments = d.join("Comments.xml");
    let mut xml = fs::read_to_string(&comments).unwrap();
    xml.push_str("\n<!-- edited -->\n");
    fs::write(&comments, xml).unwrap();
    ok(cqa(&ws, &["ingest", "--dump-dir", d.to_str().unwrap()]));
    assert_ne!(fs::read(&manifest).unwrap(), old);
    ok(cqa(&ws, &["features", "--groups", "S"]));
}

#[test]
fn topic_features_require_matching_folds() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dump(tmp.path());
    let ws = tmp.path().join("ws");
    ok(cqa(&ws, &["ingest", "--dump-dir", d.to_str().unwrap()]));
    fails_with(cqa(&ws, &with(&["evaluate", "--groups", "T"], FAST).iter().map(String::as_str).collect::<Vec<_>>()), 3, "");
    ok(cqa(&ws, LDA));
    ok(cqa(&ws, &["features"]));
    run(&ws, with(&["evaluate", "--groups", "T"], FAST));
    let mut args = with(&["evaluate", "--groups", "T", "--k", "4"], FAST);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    fails_with(cqa(&ws, &refs), 2, "fold");
    // without topic features the fold count is free
    args[2] = "S".into();
    run(&ws, args);
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dump(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    full_pipeline(&d, &a);
    full_pipeline(&d, &b);
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (path, bytes) in &ta {
        assert!(bytes == &tb[path], "{} differs", path.display());
    }
}

#[test]
fn workspace_from_environment_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dump(tmp.path());
    let ws = tmp.path().join("env-ws");
    let out = Command::new(CQA)
        .args(["ingest", "--dump-dir", d.to_str().unwrap()])
        .env("CQA_WORKSPACE", &ws)
        .output()
        .unwrap();
    ok(out);
    assert!(ws.join("dataset/manifest.json").is_file());

    let cfg = tmp.path().join("run.json");
    fs::write(
        &cfg,
        serde_json::json!({ "workspace": ws, "groups": ["S"], "pr": false }).to_string(),
    )
    .unwrap();
    let out = Command::new(CQA)
        .args(["--config", cfg.to_str().unwrap(), "features"])
        .env_remove("CQA_WORKSPACE")
        .output()
        .unwrap();
    ok(out);
    assert!(ws.join("features/s.csv").is_file());
}
