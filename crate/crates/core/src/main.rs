use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use shiftlab_core::job::{assemble_payload, run_job, Command};
use shiftlab_core::{Error, Result};

/// Weighted backward shifts on sequence algebras: coverings, witnesses and
/// criterion checks as batch jobs.
///
/// Exit status: 0 all checks pass, 1 a check failed (report still written),
/// 2 usage or configuration error.
#[derive(Parser)]
#[command(name = "shiftlab", version)]
struct Cli {
    #[command(subcommand)]
    sub: Sub,
}

#[derive(Args)]
struct Common {
    /// Job file: a bare payload or {command, payload, output, seed}.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Document inserted under the command's input key (covering or witness).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// JSON object merged into the payload: a file path or inline JSON.
    #[arg(long)]
    params: Option<String>,
    #[arg(long, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; SHIFTLAB_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Build a graded or log covering.
    CoverBuild(Common),
    /// Check properties (a)-(e) and the union of a graded covering.
    CoverVerify(Common),
    /// Conditions (I)-(IV) of the basic criterion.
    CriterionCheck(Common),
    /// Hypotheses of the unified criterion.
    UnifCheck(Common),
    /// Hypotheses of a practical corollary.
    CorollaryCheck(Common),
    /// Conditions of the characterization for a schedule.
    CaracCheck(Common),
    /// Build the explicit witness vector.
    WitnessBuild(Common),
    /// Evaluate the witness at parameter points.
    WitnessEval(Common),
    /// Error trends of the witness across sigma.
    WitnessSweep(Common),
    /// Least orbit power hitting each target.
    OrbitProbe(Common),
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::CoverBuild(c) => (Command::CoverBuild, c),
            Sub::CoverVerify(c) => (Command::CoverVerify, c),
            Sub::CriterionCheck(c) => (Command::CriterionCheck, c),
            Sub::UnifCheck(c) => (Command::UnifCheck, c),
            Sub::CorollaryCheck(c) => (Command::CorollaryCheck, c),
            Sub::CaracCheck(c) => (Command::CaracCheck, c),
            Sub::WitnessBuild(c) => (Command::WitnessBuild, c),
            Sub::WitnessEval(c) => (Command::WitnessEval, c),
            Sub::WitnessSweep(c) => (Command::WitnessSweep, c),
            Sub::OrbitProbe(c) => (Command::OrbitProbe, c),
        }
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn params_value(arg: &str) -> Result<Value> {
    if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| Error::Config(format!("--params: {e}")))
    } else {
        read_json(Path::new(arg))
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var("SHIFTLAB_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("SHIFTLAB_THREADS={s:?} is not a thread count"))),
        Err(_) => Ok(flag),
    }
}

/// Writes next to the target and renames, so a failed run leaves no file.
fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let res = fs::write(&tmp, body).and_then(|_| fs::rename(&tmp, path));
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res.map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn execute(command: Command, c: Common) -> Result<bool> {
    if let Some(n) = thread_count(c.threads)? {
        if n == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let config = c.config.as_deref().map(read_json).transpose()?;
    let params = c.params.as_deref().map(params_value).transpose()?;
    let input = c.input.as_deref().map(read_json).transpose()?;
    let (payload, job_seed, spec) = assemble_payload(command, config, params, input)?;
    let format = match c.format.as_deref() {
        Some(f) => f.parse()?,
        None => spec.format,
    };
    let seed = c.seed.or(job_seed);
    let out = run_job(command, payload, seed, format)?;
    let path = c.out.or(spec.path.map(PathBuf::from));
    match path {
        Some(p) => write_atomic(&p, &out.body)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(out.body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    Ok(out.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = cli.sub.split();
    match execute(command, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("shiftlab {command}: {e}");
            ExitCode::from(2)
        }
    }
}
