use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cqa_core::pipeline::{self, parse_set, ClassifierKind, RunConfig, Workspace, ENV_WORKSPACE};
use cqa_core::{Error, Result};

/// Best-answer prediction pipeline over Stack Exchange dumps.
///
/// Exit status: 0 success, 2 usage or configuration error, 3 data error
/// (malformed or missing input, missing or stale upstream stage), 4 internal error.
///
/// A stage whose recorded inputs and configuration are unchanged is skipped;
/// `--force` recomputes it. Outputs of identical runs are byte-identical.
#[derive(Parser, Debug)]
#[command(name = "cqa", version)]
struct Cli {
    /// Workspace directory [default: $CQA_WORKSPACE]
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Recompute even when the stage is up to date
    #[arg(long, global = true)]
    force: bool,
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct PrFlags {
    /// Add percent-rank columns (the default)
    #[arg(long, overrides_with = "no_pr")]
    pr: bool,
    /// Drop percent-rank columns
    #[arg(long)]
    no_pr: bool,
}

impl PrFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.pr {
            cfg.pr = true;
        } else if self.no_pr {
            cfg.pr = false;
        }
    }
}

#[derive(Args, Debug, Default)]
struct LearnerFlags {
    #[arg(long)]
    classifier: Option<ClassifierKind>,
    /// Number of cross-validation folds
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    fold_seed: Option<u64>,
    /// Trees in the ensemble
    #[arg(long)]
    trees: Option<usize>,
}

impl LearnerFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(c) = self.classifier {
            cfg.classifier = c;
        }
        if let Some(k) = self.k {
            cfg.k_folds = k;
        }
        if let Some(s) = self.fold_seed {
            cfg.fold_seed = s;
        }
        if let Some(t) = self.trees {
            cfg.gbdt.n_trees = t;
            cfg.forest.n_trees = t;
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse Posts.xml, Users.xml, Comments.xml (and Badges.xml if present)
    Ingest {
        #[arg(long)]
        dump_dir: Option<PathBuf>,
        /// Workspace to write into
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train per-fold topic models, choosing the topic count by coherence
    LdaTrain {
        /// Comma separated topic counts, e.g. 10,20,40
        #[arg(long, value_delimiter = ',')]
        k_grid: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Number of cross-validation folds
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        fold_seed: Option<u64>,
    },
    /// Build the feature table and write the selected groups as CSV
    Features {
        /// Comma separated groups out of S,T,A,Q,UR
        #[arg(long)]
        groups: Option<String>,
        #[command(flatten)]
        pr: PrFlags,
    },
    /// Cross-validate one feature set
    Evaluate {
        #[arg(long)]
        groups: Option<String>,
        #[command(flatten)]
        pr: PrFlags,
        #[command(flatten)]
        learner: LearnerFlags,
        /// Feature set for a paired t-test, e.g. S
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Greedy forward selection over the feature groups
    Select {
        #[arg(long)]
        groups: Option<String>,
        #[command(flatten)]
        pr: PrFlags,
        #[command(flatten)]
        learner: LearnerFlags,
    },
    /// AUC grid and feature importance for one or more runs (all runs by default)
    Report {
        #[arg(long)]
        run_id: Vec<String>,
        #[arg(long)]
        top_n: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Locked(_) => 2,
        e if e.is_data_error() => 3,
        _ => 4,
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn groups_into(cfg: &mut RunConfig, groups: &Option<String>) -> Result<()> {
    if let Some(g) = groups {
        cfg.groups = parse_set(g, cfg.pr)?.groups.into_iter().collect();
    }
    Ok(())
}

fn run(cli: Cli) -> Result<String> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out_override = match &cli.command {
        Command::Ingest { out, .. } => out.clone(),
        _ => None,
    };
    let root = cli
        .workspace
        .clone()
        .or(out_override)
        .or_else(|| cfg.workspace.clone())
        .or_else(|| std::env::var_os(ENV_WORKSPACE).map(PathBuf::from))
        .ok_or_else(|| usage(format!("no workspace: pass --workspace or set {ENV_WORKSPACE}")))?;
    let ws = Workspace::new(root);
    let _lock = ws.lock()?;

    let text = match &cli.command {
        Command::Ingest { dump_dir, .. } => {
            let dump = dump_dir
                .clone()
                .or_else(|| cfg.dump_dir.clone())
                .ok_or_else(|| usage("ingest needs --dump-dir"))?;
            pipeline::ingest(&ws, &dump, cli.force)?.message
        }
        Command::LdaTrain {
            k_grid,
            seed,
            iterations,
            k,
            fold_seed,
        } => {
            if let Some(g) = k_grid {
                cfg.k_grid = g.clone();
            }
            if let Some(s) = seed {
                cfg.lda.seed = *s;
            }
            if let Some(i) = iterations {
                cfg.lda.iterations = *i;
            }
            if let Some(k) = k {
                cfg.k_folds = *k;
            }
            if let Some(s) = fold_seed {
                cfg.fold_seed = *s;
            }
            pipeline::lda_train(&ws, &cfg, cli.force)?.message
        }
        Command::Features { groups, pr } => {
            pr.apply(&mut cfg);
            groups_into(&mut cfg, groups)?;
            pipeline::features(&ws, &cfg, &cfg.group_set(), cli.force)?.message
        }
        Command::Evaluate {
            groups,
            pr,
            learner,
            baseline,
        } => {
            pr.apply(&mut cfg);
            learner.apply(&mut cfg);
            groups_into(&mut cfg, groups)?;
            if baseline.is_some() {
                cfg.baseline = baseline.clone();
            }
            let out = pipeline::evaluate(&ws, &cfg, &cfg.group_set(), cfg.classifier, cli.force)?;
            format!("{}run {}\n", out.message, out.run_id)
        }
        Command::Select { groups, pr, learner } => {
            pr.apply(&mut cfg);
            learner.apply(&mut cfg);
            groups_into(&mut cfg, groups)?;
            let out = pipeline::select(&ws, &cfg, cfg.classifier, cli.force)?;
            format!("{}run {}\n", out.message, out.run_id)
        }
        Command::Report { run_id, top_n } => {
            if let Some(n) = top_n {
                cfg.importance_top_n = *n;
            }
            pipeline::report(&ws, &cfg, run_id)?.message
        }
    };
    Ok(text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
