//! Command-line entry point: mine refactorings from a repository, diff two
//! files, or evaluate a detection report against a labeled oracle.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use actref_core::config::Config;
use actref_core::git_ingest::{commit_filesets, enumerate_commits, CommitSelection};
use actref_core::pipeline::{detect_commit, CommitAnalysis};
use actref_core::report::{compute_metrics, load_oracle, match_instances, DetectionReport};
use actref_core::rule_engine::RefactoringType;
use actref_core::source_model::{parse_module, SourceFile};
use actref_core::tree_diff::{generate_actions, match_trees};
use actref_core::action_refine::{group_into_element_actions, refine_update_vs_replace};

#[derive(Parser)]
#[command(name = "actref", version, about = "Action-based refactoring mining for Python repositories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine refactorings from the commits of a git repository.
    Detect(DetectArgs),
    /// Show the edit script (or refined element actions) between two files.
    Diff(DiffArgs),
    /// Score a detection report against a labeled oracle.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct DetectArgs {
    /// Path to the git repository.
    #[arg(long)]
    repo: PathBuf,
    /// `all`, a revision range, or `@file` with one commit hash per line.
    #[arg(long, default_value = "all")]
    commits: String,
    /// Analyze merge commits too (diffed against the first parent).
    #[arg(long)]
    include_merges: bool,
    /// Suffix of the source files to analyze.
    #[arg(long)]
    source_suffix: Option<String>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Comma-separated refactoring types to keep (default: all).
    #[arg(long)]
    types: Option<String>,
    /// Exit with status 2 when any commit produced diagnostics.
    #[arg(long)]
    strict: bool,
    /// Worker threads for commit analysis.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// key=value threshold file applied before the individual flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    file_pair_floor: Option<f64>,
    #[arg(long)]
    slice_move_floor: Option<f64>,
    /// Fixed tree-matching dice threshold (overrides the adaptive default).
    #[arg(long)]
    similarity_threshold: Option<f64>,
}

#[derive(Args)]
struct DiffArgs {
    before: PathBuf,
    after: PathBuf,
    /// Show refined element-level actions instead of the raw edit script.
    #[arg(long)]
    refined: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Detection report produced by `actref detect`.
    #[arg(long)]
    detected: PathBuf,
    /// Oracle file: JSON array or CSV with header
    /// commit,type,before_file,before_name,after_file,after_name.
    #[arg(long)]
    oracle: PathBuf,
    /// Print the per-type breakdown, not just the totals.
    #[arg(long)]
    per_type: bool,
}

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_STRICT: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Detect(args) => run_detect(args),
        Command::Diff(args) => run_diff(args),
        Command::Eval(args) => run_eval(args),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn build_config(args: &DetectArgs) -> Result<Config, String> {
    let mut cfg = match &args.config {
        Some(path) => Config::load_file(path).map_err(|e| e.to_string())?,
        None => Config::default(),
    };
    if let Some(s) = &args.source_suffix {
        cfg.source_suffix = s.clone();
    }
    if let Some(v) = args.file_pair_floor {
        cfg.file_pair_floor = v;
    }
    if let Some(v) = args.slice_move_floor {
        cfg.slice_move_floor = v;
    }
    if let Some(v) = args.similarity_threshold {
        cfg.match_threshold = Some(v);
    }
    Ok(cfg)
}

fn parse_type_filter(arg: &Option<String>) -> Result<Option<Vec<RefactoringType>>, String> {
    let Some(list) = arg else { return Ok(None) };
    let mut out = Vec::new();
    for part in list.split(',') {
        out.push(part.parse::<RefactoringType>().map_err(|e| e.to_string())?);
    }
    Ok(Some(out))
}

fn run_detect(args: DetectArgs) -> Result<u8, String> {
    let cfg = build_config(&args)?;
    let type_filter = parse_type_filter(&args.types)?;
    let selection = CommitSelection::parse(&args.commits).map_err(|e| e.to_string())?;
    let commits = enumerate_commits(&args.repo, &selection, args.include_merges)
        .map_err(|e| e.to_string())?;

    let analyze = |hash: &String| -> CommitAnalysis {
        match commit_filesets(&args.repo, hash, &cfg, args.include_merges) {
            Ok(sets) => {
                let mut analysis =
                    detect_commit(&sets.before_set, &sets.after_set, &cfg, &sets.commit);
                analysis.diagnostics.extend(sets.diagnostics);
                analysis
            }
            Err(e) => CommitAnalysis {
                commit: hash.clone(),
                module: Vec::new(),
                intra: Vec::new(),
                cross: Vec::new(),
                diagnostics: vec![(String::new(), e.to_string())],
                timing: Default::default(),
            },
        }
    };

    let threads = args.threads.max(1);
    let mut analyses: Vec<CommitAnalysis> = if threads == 1 || commits.len() < 2 {
        commits.iter().map(analyze).collect()
    } else {
        // static round-robin split, merged back into commit order
        let mut slots: Vec<Option<CommitAnalysis>> = Vec::new();
        slots.resize_with(commits.len(), || None);
        let slot_refs: Vec<_> = slots.iter_mut().collect();
        std::thread::scope(|scope| {
            let mut remaining = slot_refs;
            let mut worker_slots: Vec<Vec<(usize, &mut Option<CommitAnalysis>)>> =
                (0..threads).map(|_| Vec::new()).collect();
            let mut idx = 0usize;
            while let Some(slot) = remaining.pop() {
                let i = remaining.len();
                worker_slots[idx % threads].push((i, slot));
                idx += 1;
            }
            for chunk in worker_slots {
                let analyze = &analyze;
                let commits = &commits;
                scope.spawn(move || {
                    for (i, slot) in chunk {
                        *slot = Some(analyze(&commits[i]));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("worker filled slot")).collect()
    };

    if let Some(filter) = &type_filter {
        for a in &mut analyses {
            for list in [&mut a.module, &mut a.intra, &mut a.cross] {
                list.retain(|i| filter.contains(&i.refactoring_type));
            }
        }
    }

    let mut report = DetectionReport::default();
    for a in &analyses {
        report.push_commit(a);
    }
    let text = match args.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match &args.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| e.to_string())?,
        None => println!("{text}"),
    }

    let has_diagnostics = report.commits.iter().any(|c| !c.diagnostics.is_empty());
    Ok(if args.strict && has_diagnostics {
        EXIT_STRICT
    } else {
        EXIT_OK
    })
}

fn load_tree(path: &PathBuf) -> Result<actref_core::source_model::AstTree, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let file = SourceFile::new(path.to_string_lossy(), text);
    parse_module(&file).map_err(|e| e.to_string())
}

fn run_diff(args: DiffArgs) -> Result<u8, String> {
    let cfg = Config::default();
    let before = load_tree(&args.before)?;
    let after = load_tree(&args.after)?;
    let mapping = match_trees(&before, &after, &cfg);
    let script = generate_actions(&before, &after, &mapping).map_err(|e| e.to_string())?;
    if args.refined {
        let actions = group_into_element_actions(&script, &before, &after, &mapping);
        let actions = refine_update_vs_replace(actions, &cfg);
        if args.json {
            let rows: Vec<serde_json::Value> = actions
                .iter()
                .map(|a| {
                    serde_json::json!({
                        "action": format!("{:?}", a.kind),
                        "kind": format!("{:?}", a.element.element_kind),
                        "element": a.element.qualified_name,
                        "file": a.element.file,
                        "body_similarity": a.body_similarity,
                    })
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&rows).unwrap());
        } else {
            for a in &actions {
                println!(
                    "{:?} {:?} {}{}",
                    a.kind,
                    a.element.element_kind,
                    a.element.qualified_name,
                    a.body_similarity
                        .map(|s| format!(" (similarity {s:.4})"))
                        .unwrap_or_default()
                );
            }
        }
    } else if args.json {
        println!("{}", serde_json::to_string_pretty(&script).unwrap());
    } else {
        for act in &script {
            println!("{act:?}");
        }
    }
    Ok(EXIT_OK)
}

fn run_eval(args: EvalArgs) -> Result<u8, String> {
    let text = std::fs::read_to_string(&args.detected).map_err(|e| e.to_string())?;
    let report = DetectionReport::from_json(&text).map_err(|e| e.to_string())?;
    let oracle = load_oracle(&args.oracle).map_err(|e| e.to_string())?;
    let counts = match_instances(&report.all_instances(), &oracle);
    let mut metrics = compute_metrics(&counts);
    if !args.per_type {
        metrics.per_type.clear();
    }
    println!("{}", serde_json::to_string_pretty(&metrics).unwrap());
    Ok(EXIT_OK)
}
