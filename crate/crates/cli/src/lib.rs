//! Command implementations behind the `agentattr` binary.
//!
//! | code | meaning                                                   |
//! |------|-----------------------------------------------------------|
//! | 0    | success                                                   |
//! | 2    | usage or configuration error                              |
//! | 3    | malformed trajectory or ground-truth input                |
//! | 4    | scorer failure (unreachable backend, bad model, ...)      |
//! | 5    | file-system failure                                       |
//! | 6    | evaluation failure (unpaired cases, no cases, lasso, ...) |

pub mod args;
pub mod error;
pub mod html;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use agentattr_core::baselines::ContextCiteConfig;
use agentattr_core::component::Selection;
use agentattr_core::evaluation::{
    aggregate, case_hits, hit_label, EvalResult, GroundTruth, Method, SynthConfig, SyntheticSuite,
    COMPONENT_LEVEL,
};
use agentattr_core::report::{attribute, AttributionConfig, AttributionReport};
use agentattr_core::scorer::{
    Backend, CacheConfig, CachingScorer, HttpConfig, NGramSource, Scorer, ScorerConfig,
};
use agentattr_core::sentence::HoldMode;
use agentattr_core::trajectory::{parse_trajectory, Trajectory};
use agentattr_core::ReplayConfig;

pub use args::{AttributeArgs, Cli, Command, EvalArgs, ScoringArgs, SynthArgs};
pub use error::CliError;

use args::{BaselineArg, HoldModeArg, ScorerKind};

/// Writes `bytes` to a sibling temp file and renames it over `path`, so a
/// reader sees either nothing or the complete file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    parse_trajectory(&read_file(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Instantiates the configured scorer behind the request cache.
pub fn build_scorer(
    s: &ScoringArgs,
    default_model: Option<PathBuf>,
) -> Result<CachingScorer<Box<dyn Scorer>>, CliError> {
    let backend = match s.scorer {
        ScorerKind::Ngram => {
            let path = s
                .model_path
                .clone()
                .or(default_model)
                .ok_or_else(|| CliError::Usage("--scorer ngram needs --model-path".into()))?;
            if !path.is_file() {
                return Err(CliError::io(&path, "model file not found"));
            }
            Backend::Ngram(NGramSource::ModelFile(path))
        }
        ScorerKind::Http => {
            let endpoint = s
                .endpoint
                .clone()
                .ok_or_else(|| CliError::Usage("--scorer http needs --endpoint".into()))?;
            Backend::Http(HttpConfig {
                endpoint,
                model: s.http_model.clone(),
                api_key_env: Some(s.api_key_env.clone()),
                max_in_flight: s.max_in_flight.max(1),
                ..Default::default()
            })
        }
    };
    let cfg = ScorerConfig {
        backend,
        cache: CacheConfig {
            enabled: !s.no_cache,
            ..Default::default()
        },
    };
    Ok(cfg.build()?)
}

fn attribution_config(s: &ScoringArgs, loo: bool, contextcite: bool) -> Result<AttributionConfig, CliError> {
    if s.max_in_flight == 0 {
        return Err(CliError::Usage("--max-in-flight must be at least 1".into()));
    }
    let selection = match s.z_threshold {
        Some(z) if !z.is_finite() => return Err(CliError::Usage("--z-threshold must be finite".into())),
        Some(z) => Selection::ZThreshold(z),
        None => Selection::TopK(s.top_k),
    };
    Ok(AttributionConfig {
        replay: ReplayConfig {
            max_in_flight: s.max_in_flight,
            ..Default::default()
        },
        selection,
        hold_mode: match s.hold_mode {
            HoldModeArg::Literal => HoldMode::Literal,
            HoldModeArg::Contextual => HoldMode::Contextual,
        },
        loo,
        contextcite: contextcite.then_some(ContextCiteConfig {
            num_samples: s.contextcite_samples,
            lambda: s.contextcite_lambda,
            seed: s.seed,
            ..Default::default()
        }),
        ..Default::default()
    })
}

/// Attributes one trajectory and writes its report (and optional HTML).
pub fn cmd_attribute(args: &AttributeArgs) -> Result<AttributionReport, CliError> {
    let traj = load_trajectory(&args.trajectory)?;
    let scorer = build_scorer(&args.scoring, None)?;
    let mut cfg = attribution_config(
        &args.scoring,
        args.baselines.contains(&BaselineArg::Loo),
        args.baselines.contains(&BaselineArg::Contextcite),
    )?;
    cfg.evidence_size = args.evidence;
    cfg.record_timing = args.timing;
    let report = attribute(&traj, &scorer, &cfg)?;
    for w in &report.warnings {
        tracing::warn!("{w}");
    }
    write_json(&args.out, &report)?;
    if let Some(path) = &args.html {
        write_atomic(path, html::emit_html(&report).as_bytes())?;
    }
    Ok(report)
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Plain-text table with one row per method and one column per k.
pub fn render_table(result: &EvalResult, rows: &[String], ks: &[usize]) -> String {
    let width = rows.iter().map(String::len).max().unwrap_or(6).max(6);
    let mut out = format!("{:<width$}", "Method");
    for k in ks {
        let _ = write!(out, "  {:>6}", format!("Hit@{k}"));
    }
    out.push('\n');
    for row in rows {
        let Some(by_k) = result.methods.get(row) else { continue };
        let _ = write!(out, "{row:<width$}");
        for &k in ks {
            match by_k.get(&hit_label(k)) {
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
    let _ = writeln!(out, "({} cases)", result.num_cases);
    out
}

/// Evaluates every case in `--cases` against `--gt` and writes the result.
pub fn cmd_eval(args: &EvalArgs) -> Result<(EvalResult, String), CliError> {
    let methods = args
        .methods
        .iter()
        .map(|m| Method::parse(m))
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(CliError::Usage("--methods is empty".into()));
    }
    if args.k.is_empty() || args.k.contains(&0) {
        return Err(CliError::Usage("--k needs positive integers".into()));
    }

    let case_files = json_files(&args.cases)?;
    if case_files.is_empty() {
        return Err(CliError::Eval(format!("no case files in {}", args.cases.display())));
    }
    let mut truths: BTreeMap<String, Vec<GroundTruth>> = BTreeMap::new();
    for path in json_files(&args.gt)? {
        let gt: GroundTruth = serde_json::from_slice(&read_file(&path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        truths.entry(gt.case_id.clone()).or_default().push(gt);
    }

    let default_model = args.cases.parent().map(|p| p.join("model.json"));
    let scorer = build_scorer(&args.scoring, default_model)?;
    let cfg = attribution_config(
        &args.scoring,
        methods.contains(&Method::Loo),
        methods.contains(&Method::ContextCite),
    )?;

    let mut records = Vec::new();
    for path in &case_files {
        let case_id = file_stem(path);
        let gts = truths
            .remove(&case_id)
            .ok_or_else(|| CliError::Eval(format!("case {case_id:?} has no ground truth")))?;
        let traj = load_trajectory(path)?;
        for gt in &gts {
            gt.validate(&traj, &cfg.replay.segmenter)?;
        }
        tracing::info!(case = %case_id, "evaluating");
        let report = attribute(&traj, &scorer, &cfg)?;
        records.extend(case_hits(&report, &gts, &methods, &args.k)?);
    }
    if let Some(orphan) = truths.keys().next() {
        return Err(CliError::Eval(format!("ground truth for {orphan:?} has no case file")));
    }
    let result = aggregate(records)?;
    let rows: Vec<String> = std::iter::once(COMPONENT_LEVEL.to_string())
        .chain(methods.iter().map(|m| m.name().to_string()))
        .collect();
    let table = render_table(&result, &rows, &args.k);
    write_json(&args.out, &result)?;
    if let Some(path) = &args.table {
        write_atomic(path, table.as_bytes())?;
    }
    Ok((result, table))
}

/// Writes `cases/`, `gt/` and the shared `model.json` under `--out`.
pub fn cmd_synth(args: &SynthArgs) -> Result<usize, CliError> {
    let suite = SyntheticSuite::new(SynthConfig {
        seed: args.seed,
        num_cases: args.n,
        trigger_strength: args.strength,
        ..Default::default()
    })?;
    let cases_dir = args.out.join("cases");
    let gt_dir = args.out.join("gt");
    for dir in [&cases_dir, &gt_dir] {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    for idx in 0..suite.len() {
        let case = suite.case(idx)?;
        let id = &case.ground_truth.case_id;
        write_json(&cases_dir.join(format!("{id}.json")), &case.trajectory.to_json())?;
        write_json(&gt_dir.join(format!("{id}.json")), &case.ground_truth)?;
    }
    write_atomic(&args.out.join("model.json"), suite.model().to_json().as_bytes())?;
    Ok(suite.len())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Attribute(a) => cmd_attribute(a).map(|r| {
            println!(
                "selected components {:?}; report written to {}",
                r.selected_components,
                a.out.display()
            );
        }),
        Command::Eval(a) => cmd_eval(a).map(|(_, table)| print!("{table}")),
        Command::Synth(a) => cmd_synth(a).map(|n| println!("wrote {n} cases to {}", a.out.display())),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
