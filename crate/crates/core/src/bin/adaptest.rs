use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use adaptest::dsl::{parse_unchecked, validate, Severity, TestScript};
use adaptest::engine::{
    execute_suite, exit_code, load_suite, render_report, review, EngineConfig, LegacyMode,
    ReportFormat, RunReport, FIXED_TIMESTAMP,
};
use adaptest::maintainer::{diff_models, propose_patches, DiffConfig, ProposalContext};
use adaptest::model::{load_model, AppModel};
use adaptest::recovery::{Decision, KnowledgeBase};
use adaptest::repo::{load_repository, Repository};
use adaptest::testgen::{
    builtin_heuristics, crawl_generate, load_heuristics, load_interaction_log, mine_logs,
    GenerationConfig,
};

/// Adaptive UI test runner for simulated applications.
#[derive(Parser)]
#[command(name = "adaptest", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite against a model and report the results.
    Run(RunArgs),
    /// Check scripts against the repository (and optionally a model).
    Validate(ValidateArgs),
    /// Generate scripts from a model or from interaction logs.
    #[command(subcommand)]
    Generate(Generate),
    /// Compare two model versions and optionally propose suite patches.
    Diff(DiffArgs),
    /// Accept or reject the recoveries in a run report.
    Review(ReviewArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Legacy {
    Abort,
    Continue,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct RunArgs {
    suite: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    repo: PathBuf,
    /// Knowledge base; the builtin popup definitions are used when omitted.
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    adaptive: Option<OnOff>,
    #[arg(long, value_enum)]
    legacy_mode: Option<Legacy>,
    /// Run scripts even if validation reports errors.
    #[arg(long)]
    force: bool,
    /// Write a constant timestamp so reports compare byte for byte.
    #[arg(long)]
    fixed_clock: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Engine configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    suite: PathBuf,
    #[arg(long)]
    repo: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Generate {
    /// Walk the model's screens and emit scripts plus a repository.
    Crawl {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        heuristics: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        max_depth: usize,
        #[arg(long, default_value_t = 50)]
        max_scripts: usize,
        #[arg(long, default_value_t = 3)]
        options_per_select: usize,
    },
    /// Turn the most frequent user paths in a JSON-lines log into scripts.
    Mine {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        /// Object name fragments whose values are masked.
        #[arg(long = "mask")]
        mask: Vec<String>,
    },
}

#[derive(Args)]
struct DiffArgs {
    #[arg(long)]
    old: PathBuf,
    #[arg(long)]
    new: PathBuf,
    /// Also propose patches for the suite.
    #[arg(long, requires_all = ["suite", "repo"])]
    propose: bool,
    #[arg(long)]
    suite: Option<PathBuf>,
    #[arg(long)]
    repo: Option<PathBuf>,
    #[arg(long)]
    heuristics: Option<PathBuf>,
    #[arg(long, default_value_t = 0.6)]
    threshold: f64,
}

#[derive(Args)]
struct ReviewArgs {
    #[arg(long)]
    report: PathBuf,
    /// Updated in place.
    #[arg(long)]
    kb: PathBuf,
    #[arg(long, num_args = 1..)]
    accept: Vec<String>,
    #[arg(long, num_args = 1..)]
    reject: Vec<String>,
    /// Apply the repository patches of accepted rebinds.
    #[arg(long, requires_all = ["suite", "repo", "model"])]
    apply_patches: bool,
    #[arg(long)]
    suite: Option<PathBuf>,
    #[arg(long)]
    repo: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
}

type CliResult<T> = Result<T, String>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write(path: &Path, content: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
    }
    fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn model_at(path: &Path) -> CliResult<AppModel> {
    load_model(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn repo_at(path: &Path) -> CliResult<Repository> {
    load_repository(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn kb_at(path: &Path) -> CliResult<KnowledgeBase> {
    if !path.exists() {
        return Ok(KnowledgeBase::builtin());
    }
    KnowledgeBase::load(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn heuristics_at(path: Option<&Path>) -> CliResult<Vec<adaptest::testgen::ValueHeuristic>> {
    match path {
        Some(p) => load_heuristics(&read(p)?).map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(builtin_heuristics()),
    }
}

fn scripts_of(dir: &Path) -> CliResult<Vec<adaptest::engine::SuiteFile>> {
    load_suite(dir).map_err(|e| e.to_string())
}

fn suite_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "suite".into())
}

fn run(a: RunArgs) -> CliResult<u8> {
    let model = model_at(&a.model)?;
    let repo = repo_at(&a.repo)?;
    let kb = match &a.kb {
        Some(p) => kb_at(p)?,
        None => KnowledgeBase::builtin(),
    };
    let mut config = match &a.config {
        Some(p) => EngineConfig::load(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => EngineConfig::default(),
    };
    if let Some(x) = a.adaptive {
        config.adaptive = matches!(x, OnOff::On);
    }
    if let Some(m) = a.legacy_mode {
        config.legacy_mode = match m {
            Legacy::Abort => LegacyMode::Abort,
            Legacy::Continue => LegacyMode::Continue,
        };
    }
    if a.force {
        config.validate_before_run = false;
    }
    let files = scripts_of(&a.suite)?;
    let scripts: Vec<TestScript> = files.into_iter().map(|f| f.script).collect();
    let timestamp = if a.fixed_clock {
        FIXED_TIMESTAMP.to_string()
    } else {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    };
    let report = execute_suite(
        &suite_name(&a.suite),
        &scripts,
        &model,
        &repo,
        &config,
        &kb,
        a.seed,
        timestamp,
    );
    let format = match a.format {
        Format::Json => ReportFormat::Json,
        Format::Text => ReportFormat::Text,
    };
    let doc = render_report(&report, format).map_err(|e| e.to_string())?;
    match &a.report {
        Some(p) => {
            write(p, &doc)?;
            let s = report.summary.scripts;
            eprintln!(
                "{} scripts: {} passed, {} recovered, {} failed; {} pending review",
                s.total,
                s.passed,
                s.recovered,
                s.failed,
                report.pending_keys.len()
            );
        }
        None => print!("{doc}"),
    }
    Ok(exit_code(&report) as u8)
}

fn validate_cmd(a: ValidateArgs) -> CliResult<u8> {
    let repo = repo_at(&a.repo)?;
    let model = a.model.as_deref().map(model_at).transpose()?;
    let mut errors = 0;
    for f in scripts_of(&a.suite)? {
        for i in validate(&f.script, &repo, model.as_ref()) {
            if i.severity == Severity::Error {
                errors += 1;
            }
            let sev =
                serde_json::to_value(i.severity).map(|v| v.as_str().unwrap_or("").to_string());
            let kind = serde_json::to_value(i.kind).map(|v| v.as_str().unwrap_or("").to_string());
            println!(
                "{}:{}:{}: {} {}: {}",
                f.path.display(),
                i.span.line,
                i.span.column,
                sev.unwrap_or_default(),
                kind.unwrap_or_default(),
                i.message
            );
        }
    }
    Ok(if errors > 0 { 1 } else { 0 })
}

fn write_scripts(dir: &Path, scripts: &[TestScript]) -> CliResult<()> {
    for s in scripts {
        write(&dir.join(format!("{}.test", s.name)), &s.to_text())?;
    }
    Ok(())
}

fn generate(g: Generate) -> CliResult<u8> {
    match g {
        Generate::Crawl {
            model,
            heuristics,
            out,
            max_depth,
            max_scripts,
            options_per_select,
        } => {
            let model = model_at(&model)?;
            let heuristics = heuristics_at(heuristics.as_deref())?;
            let config = GenerationConfig {
                max_depth,
                max_scripts,
                options_per_select,
                ..Default::default()
            };
            config.check().map_err(|e| e.to_string())?;
            let o = crawl_generate(&model, &config, &heuristics);
            write_scripts(&out, &o.scripts)?;
            write_scripts(&out.join("negative"), &o.negative_scripts)?;
            write(&out.join("repository.json"), &o.repository.to_json())?;
            eprintln!(
                "{} scripts, {} negative probes{}",
                o.scripts.len(),
                o.negative_scripts.len(),
                if o.truncated {
                    " (truncated at max-scripts)"
                } else {
                    ""
                }
            );
        }
        Generate::Mine {
            log,
            out,
            top_k,
            mask,
        } => {
            let records = load_interaction_log(&read(&log)?)
                .map_err(|e| format!("{}: {e}", log.display()))?;
            let config = GenerationConfig {
                top_k_sessions: top_k,
                mask_fields: mask,
                ..Default::default()
            };
            config.check().map_err(|e| e.to_string())?;
            let o = mine_logs(&records, &config);
            for w in &o.warnings {
                eprintln!("warning: {w}");
            }
            write_scripts(&out, &o.scripts)?;
            let freq: Vec<_> = o
                .scripts
                .iter()
                .map(|s| s.name.clone())
                .zip(o.frequencies.iter().copied())
                .collect();
            write(
                &out.join("frequencies.json"),
                &(serde_json::to_string_pretty(&freq).expect("serializes") + "\n"),
            )?;
        }
    }
    Ok(0)
}

fn diff_cmd(a: DiffArgs) -> CliResult<u8> {
    let old = model_at(&a.old)?;
    let new = model_at(&a.new)?;
    let config = DiffConfig {
        threshold: a.threshold,
        ..Default::default()
    };
    let diff = diff_models(&old, &new, &config);
    let doc = if a.propose {
        let repo = repo_at(a.repo.as_deref().expect("required by clap"))?;
        let scripts: Vec<TestScript> = scripts_of(a.suite.as_deref().expect("required by clap"))?
            .into_iter()
            .map(|f| f.script)
            .collect();
        let heuristics = heuristics_at(a.heuristics.as_deref())?;
        let ctx = ProposalContext {
            old: &old,
            new: &new,
            scripts: &scripts,
            repo: &repo,
            heuristics: &heuristics,
        };
        let patches = propose_patches(&diff, &ctx);
        serde_json::json!({"diff": diff, "patches": patches})
    } else {
        serde_json::to_value(&diff).expect("diff serializes")
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).expect("serializes")
    );
    Ok(0)
}

fn review_cmd(a: ReviewArgs) -> CliResult<u8> {
    let report =
        RunReport::load(&read(&a.report)?).map_err(|e| format!("{}: {e}", a.report.display()))?;
    let kb = kb_at(&a.kb)?;
    let mut decisions: Vec<(String, Decision)> = a
        .accept
        .iter()
        .map(|k| (k.clone(), Decision::Accepted))
        .collect();
    decisions.extend(a.reject.iter().map(|k| (k.clone(), Decision::Rejected)));

    let (repo, files, model) = if a.apply_patches {
        let repo_path = a.repo.as_deref().expect("required by clap");
        let suite = scripts_of(a.suite.as_deref().expect("required by clap"))?;
        (
            repo_at(repo_path)?,
            suite,
            Some(model_at(a.model.as_deref().expect("required by clap"))?),
        )
    } else {
        let repo = match &a.repo {
            Some(p) => repo_at(p)?,
            None => Repository::new("1"),
        };
        (repo, Vec::new(), None)
    };
    let scripts: Vec<TestScript> = files.iter().map(|f| f.script.clone()).collect();
    let outcome = review(&report, &decisions, &kb, &repo, &scripts, model.as_ref())
        .map_err(|e| e.to_string())?;
    write(&a.kb, &outcome.kb.to_json())?;
    for p in &outcome.patches {
        println!("{}", p.describe());
    }
    if let Some(applied) = &outcome.applied {
        let repo_path = a.repo.as_deref().expect("required by clap");
        write(repo_path, &applied.repo.to_json())?;
        let before: BTreeSet<&str> = scripts.iter().map(|s| s.id.as_str()).collect();
        for s in &applied.scripts {
            let path = match files.iter().find(|f| f.script.id == s.id) {
                Some(f) if f.script != *s => f.path.clone(),
                Some(_) => continue,
                None if !before.contains(s.id.as_str()) => a
                    .suite
                    .as_deref()
                    .expect("required by clap")
                    .join(format!("{}.test", s.name)),
                None => continue,
            };
            // keep the original text when it already parses to the same script
            let unchanged = fs::read_to_string(&path)
                .ok()
                .and_then(|t| parse_unchecked(&t).ok())
                .as_ref()
                == Some(s);
            if !unchanged {
                write(&path, &s.to_text())?;
            }
        }
        println!("applied {} patch(es)", outcome.patches.len());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Validate(a) => validate_cmd(a),
        Command::Generate(g) => generate(g),
        Command::Diff(a) => diff_cmd(a),
        Command::Review(a) => review_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
