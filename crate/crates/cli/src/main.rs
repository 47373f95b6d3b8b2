use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sgi_core::config::OutputFormat;
use sgi_core::report::{classify_csv, taxonomy_csv, PhaseReference, RunMeta};
use sgi_core::stages::TaxonomyRow;
use sgi_core::units::parse_angle;
use sgi_core::{enumerate_taxonomy, parse_config, run, Error, PhaseMode, PhysicsParams, Stage};

mod feasibility;

/// Directory used for relative output paths.
const OUTPUT_DIR_ENV: &str = "SGI_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "sgi",
    version,
    about = "Stern-Gerlach interferometer dual-sensing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured trial batch and write its report
    Run(RunArgs),
    /// Acceleration time, EM phase shift and sensor timing check
    Feasibility(Box<feasibility::FeasibilityArgs>),
    /// Print the outcome taxonomy
    Taxonomy(TaxonomyArgs),
    /// Classify outcome tuples read from a CSV file (`stage,tuple` columns)
    Classify(ClassifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file
    config: PathBuf,
    /// Override the configured master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Report path; `-` for stdout
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Override the configured output format
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    All,
}

#[derive(Args)]
struct TaxonomyArgs {
    #[arg(long, default_value = "all")]
    stage: StageArg,
    /// Emit CSV instead of a table
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Input CSV; `-` for stdin
    input: PathBuf,
    /// Stage-3 phase reference ΔΦ (radians or a fraction of pi); defaults to
    /// the reference physics parameters
    #[arg(long, allow_hyphen_values = true)]
    delta_phi: Option<String>,
    /// Stage-3 phase tolerance; defaults to |ΔΦ|/10
    #[arg(long)]
    tolerance: Option<String>,
}

enum Failure {
    Usage(String),
    Runtime(String),
    Audit(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Audit(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Runtime(e.to_string()),
            Error::Parse { .. } | Error::Domain(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Feasibility(a) => feasibility::run(*a),
        Command::Taxonomy(a) => cmd_taxonomy(a),
        Command::Classify(a) => cmd_classify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Runtime(m) | Failure::Audit(m)) = &f;
            eprintln!("sgi: {m}");
            ExitCode::from(f.code())
        }
    }
}

fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn meta_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    report.with_file_name(format!("{stem}.meta.json"))
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.config).map_err(|e| io_failure(&a.config, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(f) = a.format {
        cfg.output.format = match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        };
    }
    let target = match a.output.or_else(|| cfg.output.path.clone()) {
        Some(p) if p.as_os_str() == "-" => None,
        Some(p) => Some(resolve_output(&p)),
        None => std::env::var_os(OUTPUT_DIR_ENV).map(|dir| {
            let ext = cfg.output.format.to_string();
            Path::new(&dir).join(format!("run-{}.{ext}", &cfg.digest()[..12]))
        }),
    };

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let report = run(&cfg, a.workers)?;
    let meta = RunMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        workers: if a.workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            a.workers
        },
    };

    let body = match cfg.output.format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.histogram_csv(),
    };
    match target {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            }
            fs::write(&path, body).map_err(|e| io_failure(&path, e))?;
            let mp = meta_path(&path);
            fs::write(&mp, meta.to_json()).map_err(|e| io_failure(&mp, e))?;
            eprintln!(
                "wrote {} ({} trials, {:.2} s)",
                path.display(),
                cfg.trials,
                meta.elapsed_seconds
            );
        }
        None => {
            io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| Failure::Runtime(e.to_string()))?;
        }
    }

    if !report.audit.pass {
        return Err(Failure::Audit(format!(
            "conservation audit failed: {} forbidden records",
            report.audit.forbidden
        )));
    }
    Ok(())
}

fn taxonomy_rows(stage: StageArg) -> Vec<TaxonomyRow> {
    let stages: &[Stage] = match stage {
        StageArg::One => &[Stage::One],
        StageArg::Two => &[Stage::Two],
        StageArg::Three => &[Stage::Three],
        StageArg::All => &Stage::ALL,
    };
    stages.iter().flat_map(|&s| enumerate_taxonomy(s)).collect()
}

fn cmd_taxonomy(a: TaxonomyArgs) -> Result<(), Failure> {
    let rows = taxonomy_rows(a.stage);
    if a.csv {
        print!("{}", taxonomy_csv(&rows));
        return Ok(());
    }
    println!(
        "{:<5} {:<20} {:<38} {:<15} {:<15} {:<15} flags",
        "stage", "tuple", "label", "CI", "MWI", "BHSI"
    );
    for r in &rows {
        let c = &r.class;
        println!(
            "{:<5} {:<20} {:<38} {:<15} {:<15} {:<15} {}",
            r.stage.number(),
            c.tuple,
            c.label.name(),
            c.verdicts.ci.name(),
            c.verdicts.mwi.name(),
            c.verdicts.bhsi.name(),
            c.flags
        );
    }
    Ok(())
}

fn cmd_classify(a: ClassifyArgs) -> Result<(), Failure> {
    let expected = match &a.delta_phi {
        Some(s) => parse_angle(s)?,
        None => sgi_core::physics::em_phase_shift(&PhysicsParams::default(), PhaseMode::Verbatim)?,
    };
    let tolerance = match &a.tolerance {
        Some(s) => parse_angle(s)?,
        None => expected.abs() / 10.0,
    };
    let phase = PhaseReference {
        expected,
        tolerance,
    };
    let out = if a.input.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Failure::Runtime(e.to_string()))?;
        classify_csv(buf.as_slice(), phase)?
    } else {
        let f = fs::File::open(&a.input).map_err(|e| io_failure(&a.input, e))?;
        classify_csv(f, phase)?
    };
    print!("{out}");
    Ok(())
}
