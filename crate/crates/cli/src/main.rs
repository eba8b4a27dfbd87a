use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pvdr::grid_sim::{run_batch, run_simulation};
use pvdr::report::{self, ReportError, SweepRun};
use pvdr::scenario::{
    build_sweep, load_scenario, load_sweep, save_scenario, ScenarioConfig, ScenarioError,
    SchemeKind, SweepFile, SweepSpec,
};
use pvdr::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "pvdr",
    version,
    about = "Frequency response with irradiance-aware demand response"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario.
    Run {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a penetration sweep for one or both schemes.
    Sweep {
        /// Sweep file; the built-in four-level sweep when omitted.
        spec: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated subset of `proposed,conventional`.
        #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
        schemes: Option<Vec<SchemeKind>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to $PVDR_WORKERS, then to the core count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Re-render plots and the summary from an existing output directory.
    Report { dir: PathBuf },
    /// Write the built-in scenario (or sweep) as an editable TOML file.
    Init {
        path: PathBuf,
        #[arg(long)]
        sweep: bool,
    },
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    SchemeKind::parse(s.trim())
        .ok_or_else(|| format!("unknown scheme `{s}` (expected proposed or conventional)"))
}

fn workers_from_env() -> Result<Option<usize>, Error> {
    match std::env::var("PVDR_WORKERS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| {
                ScenarioError::invalid(format!(
                    "PVDR_WORKERS must be a positive integer, got `{v}`"
                ))
                .into()
            }),
        Err(_) => Ok(None),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
    .into()
}

/// Writes into a fresh sibling directory, then moves the entries into
/// `output`, so a failed write leaves `output` untouched.
fn staged<F>(output: &Path, write: F) -> Result<(), Error>
where
    F: FnOnce(&Path) -> Result<(), Error>,
{
    let parent = match output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| io_error(&parent, e))?;
    let name = output
        .file_name()
        .map_or_else(|| "out".into(), |n| n.to_string_lossy().into_owned());
    let stage = parent.join(format!(".{name}.partial-{}", std::process::id()));
    let _ = fs::remove_dir_all(&stage);
    fs::create_dir_all(&stage).map_err(|e| io_error(&stage, e))?;
    let outcome = write(&stage).and_then(|()| {
        fs::create_dir_all(output).map_err(|e| io_error(output, e))?;
        for entry in fs::read_dir(&stage).map_err(|e| io_error(&stage, e))? {
            let entry = entry.map_err(|e| io_error(&stage, e))?;
            let target = output.join(entry.file_name());
            if target.is_dir() {
                fs::remove_dir_all(&target).map_err(|e| io_error(&target, e))?;
            }
            fs::rename(entry.path(), &target).map_err(|e| io_error(&target, e))?;
        }
        Ok(())
    });
    let _ = fs::remove_dir_all(&stage);
    outcome
}

fn run(scenario: &Path, output: &Path) -> Result<(), Error> {
    let config = load_scenario(scenario)?;
    let result = run_simulation(&config)?;
    staged(output, |dir| Ok(report::write_run_artifacts(dir, &result)?))?;
    let text = report::render_report(output)?;
    println!(
        "{}: {} -> {}",
        config.id,
        result.scheme.name(),
        output.display()
    );
    print!("{text}");
    Ok(())
}

fn sweep(
    spec: Option<&Path>,
    output: &Path,
    schemes: Option<Vec<SchemeKind>>,
    seed: Option<u64>,
    workers: Option<usize>,
) -> Result<(), Error> {
    let mut spec = match spec {
        Some(path) => load_sweep(path)?,
        None => SweepSpec::desk_default(),
    };
    if let Some(mut schemes) = schemes {
        schemes.dedup();
        spec.schemes = schemes;
    }
    if let Some(seed) = seed {
        spec.base.seed = seed;
    }
    let configs = build_sweep(&spec)?;
    let workers = match workers {
        Some(n) => Some(n),
        None => workers_from_env()?,
    };
    let results = run_batch(&configs, workers).map_err(Box::new)?;
    let keys = spec
        .penetration_levels
        .iter()
        .flat_map(|&level| spec.schemes.iter().map(move |&scheme| (level, scheme)));
    let runs: Vec<SweepRun> = keys
        .zip(results)
        .map(|((penetration, scheme), result)| SweepRun {
            penetration,
            scheme,
            result,
        })
        .collect();
    let mut summary = String::new();
    staged(output, |dir| {
        summary = report::write_sweep_artifacts(dir, &runs)?;
        Ok(())
    })?;
    println!("{} scenarios -> {}", runs.len(), output.display());
    print!("{summary}");
    Ok(())
}

fn init(path: &Path, sweep: bool) -> Result<(), Error> {
    if sweep {
        let desk = SweepSpec::desk_default();
        let file = SweepFile {
            base_file: None,
            penetration_levels: desk.penetration_levels,
            benchmark_penetration: desk.benchmark_penetration,
            schemes: desk.schemes,
            seed: None,
            base: Some(desk.base),
        };
        fs::write(path, file.to_toml()?).map_err(|e| io_error(path, e))?;
    } else {
        save_scenario(&ScenarioConfig::desk_default(), path)?;
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Io => 3,
        ErrorKind::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { scenario, output } => run(&scenario, &output),
        Command::Sweep {
            spec,
            output,
            schemes,
            seed,
            workers,
        } => sweep(spec.as_deref(), &output, schemes, seed, workers),
        Command::Report { dir } => report::render_report(&dir)
            .map(|text| print!("{text}"))
            .map_err(Error::from),
        Command::Init { path, sweep } => init(&path, sweep),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
