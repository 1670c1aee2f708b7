//! Batch jobs: typed payloads per command and a single dispatcher shared by
//! the CLI and the C interface.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::covering::{build_graded_covering, build_log_covering, build_log_covering_with_q, verify_graded};
use crate::covering::{Covering, GradedParams, GradedReport, LogCoveringParams, ParamBox};
use crate::criteria::{self, BasicOptions, CaracParams, CorollaryVariant, ScheduleEntry, UnifParams};
use crate::error::{Error, Result};
use crate::orbit::{orbit_probe, OrbitProbe};
use crate::seqspace::SeqVec;
use crate::weights::WeightFamily;
use crate::witness::{self, WitnessConfig, WitnessEval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CoverBuild,
    CoverVerify,
    CriterionCheck,
    UnifCheck,
    CorollaryCheck,
    CaracCheck,
    WitnessBuild,
    WitnessEval,
    WitnessSweep,
    OrbitProbe,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::CoverBuild,
        Command::CoverVerify,
        Command::CriterionCheck,
        Command::UnifCheck,
        Command::CorollaryCheck,
        Command::CaracCheck,
        Command::WitnessBuild,
        Command::WitnessEval,
        Command::WitnessSweep,
        Command::OrbitProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::CoverBuild => "cover-build",
            Command::CoverVerify => "cover-verify",
            Command::CriterionCheck => "criterion-check",
            Command::UnifCheck => "unif-check",
            Command::CorollaryCheck => "corollary-check",
            Command::CaracCheck => "carac-check",
            Command::WitnessBuild => "witness-build",
            Command::WitnessEval => "witness-eval",
            Command::WitnessSweep => "witness-sweep",
            Command::OrbitProbe => "orbit-probe",
        }
    }

    /// Payload key that `--in` fills.
    pub fn input_key(self) -> Option<&'static str> {
        match self {
            Command::CoverVerify | Command::CriterionCheck => Some("covering"),
            Command::WitnessEval | Command::WitnessSweep => Some("witness"),
            _ => None,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::Config(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub path: Option<String>,
}

/// A complete job file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub command: Command,
    pub payload: Value,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobOutput {
    pub body: String,
    /// Every check in the report passed.
    pub pass: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoverBuild {
    Graded {
        k: ParamBox,
        params: GradedParams,
    },
    Log {
        params: LogCoveringParams,
        #[serde(default)]
        q: Option<u64>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverVerify {
    pub covering: Covering,
    pub k: ParamBox,
    pub params: GradedParams,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionCheck {
    pub fams: Vec<WeightFamily>,
    pub k: ParamBox,
    pub v: Vec<SeqVec>,
    pub m1: u32,
    pub m2: u32,
    pub eps: f64,
    #[serde(default)]
    pub options: BasicOptions,
    #[serde(default)]
    pub covering: Option<Covering>,
    /// Build a graded covering of `k` instead of passing one.
    #[serde(default)]
    pub graded: Option<GradedParams>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnifCheck {
    pub fam: WeightFamily,
    pub params: UnifParams,
    /// Also emit the margin table every `table_stride` steps of `n`.
    #[serde(default)]
    pub table_stride: Option<u64>,
}

fn default_cor_grid() -> usize {
    5
}

fn default_tol() -> f64 {
    criteria::DEFAULT_TOL
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorollaryCheck {
    pub fam: WeightFamily,
    pub i0: [f64; 2],
    #[serde(default = "default_cor_grid")]
    pub grid: usize,
    pub variant: CorollaryVariant,
    pub n_start: u64,
    pub n_max: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaracCheck {
    pub fams: Vec<WeightFamily>,
    pub schedule: Vec<ScheduleEntry>,
    pub params: CaracParams,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    Analytic,
    Bruteforce,
    Both,
}

fn default_eval_grid() -> usize {
    3
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessEvalJob {
    pub witness: WitnessConfig,
    /// Explicit points; when absent a grid of `K'` is used.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Extra uniform random points drawn from `K'` with the job seed.
    #[serde(default)]
    pub random: usize,
    #[serde(default = "default_eval_grid")]
    pub grid: usize,
    #[serde(default)]
    pub mode: EvalMode,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessSweepJob {
    pub witness: WitnessConfig,
    pub bases: Vec<u64>,
    #[serde(default = "default_eval_grid")]
    pub grid: usize,
}

#[derive(Serialize)]
struct EvalRecord {
    mode: &'static str,
    #[serde(flatten)]
    eval: WitnessEval,
    meets_eta: bool,
}

#[derive(Serialize)]
struct EvalReport {
    pass: bool,
    eta: f64,
    points: usize,
    worst_total: f64,
    max_abs_difference: Option<f64>,
    evals: Vec<EvalRecord>,
}

fn parse<T: DeserializeOwned>(command: Command, payload: Value) -> Result<T> {
    serde_json::from_value(payload).map_err(|e| Error::Config(format!("{command} payload: {e}")))
}

fn json<T: Serialize>(x: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(x)?;
    s.push('\n');
    Ok(s)
}

fn covering_csv(cov: &Covering) -> Result<String> {
    let d = cov.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["j".to_string(), "n".to_string()];
    for t in 0..d {
        header.push(format!("anchor_{t}"));
    }
    for t in 0..d {
        header.push(format!("lo_{t}"));
        header.push(format!("hi_{t}"));
    }
    w.write_record(&header)?;
    for (j, c) in cov.cells.iter().enumerate() {
        let mut row = vec![(j + 1).to_string(), c.n.to_string()];
        row.extend(c.anchor.iter().map(f64::to_string));
        for a in &c.bounds.axes {
            row.push(a[0].to_string());
            row.push(a[1].to_string());
        }
        w.write_record(&row)?;
    }
    criteria::csv_string(w)
}

fn graded_csv(r: &GradedReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["property", "pass", "value", "bound", "margin"])?;
    for (name, p) in [
        ("a", &r.a),
        ("b", &r.b),
        ("c", &r.c),
        ("d", &r.d),
        ("e", &r.e),
        ("union", &r.union),
    ] {
        w.write_record([
            name.to_string(),
            p.pass.to_string(),
            p.value.to_string(),
            p.bound.to_string(),
            p.margin.to_string(),
        ])?;
    }
    criteria::csv_string(w)
}

fn eval_points(job: &WitnessEvalJob, seed: u64) -> Vec<Vec<f64>> {
    let k = &job.witness.log_cov.k;
    let mut pts = match &job.points {
        Some(p) => p.clone(),
        None => witness::lambda_grid(k, job.grid.max(1)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..job.random {
        pts.push(k.axes.iter().map(|&[lo, hi]| rng.gen_range(lo..=hi)).collect());
    }
    pts
}

fn run_witness_eval(job: WitnessEvalJob, seed: u64, format: Format) -> Result<JobOutput> {
    use rayon::prelude::*;
    let cfg = &job.witness;
    let w = witness::build_witness(cfg)?;
    let pts = eval_points(&job, seed);
    if pts.is_empty() {
        return Err(Error::InvalidParams("no evaluation points".into()));
    }
    let per_point: Vec<Vec<EvalRecord>> = pts
        .par_iter()
        .map(|lam| -> Result<Vec<EvalRecord>> {
            let mut out = Vec::new();
            let analytic = witness::eval_analytic(&w, cfg, lam)?;
            let n_power = analytic.n_power;
            if job.mode != EvalMode::Bruteforce {
                out.push(EvalRecord {
                    mode: "analytic",
                    meets_eta: analytic.meets(cfg.eta),
                    eval: analytic,
                });
            }
            if job.mode != EvalMode::Analytic {
                let bf = witness::eval_bruteforce(&w, cfg, lam, n_power)?;
                out.push(EvalRecord {
                    mode: "bruteforce",
                    meets_eta: bf.meets(cfg.eta),
                    eval: bf,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let max_abs_difference = (job.mode == EvalMode::Both).then(|| {
        per_point
            .iter()
            .map(|r| {
                let (a, b) = (&r[0].eval, &r[1].eval);
                [(a.p1(), b.p1()), (a.p2(), b.p2()), (a.p3(), b.p3())]
                    .iter()
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    });
    let evals: Vec<EvalRecord> = per_point.into_iter().flatten().collect();
    let pass = evals.iter().all(|e| e.meets_eta);
    let worst_total = evals.iter().map(|e| e.eval.total).fold(0.0, f64::max);
    let report = EvalReport {
        pass,
        eta: cfg.eta,
        points: pts.len(),
        worst_total,
        max_abs_difference,
        evals,
    };
    let body = match format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let d = cfg.dim();
            let mut wr = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["mode".to_string()];
            header.extend((0..d).map(|t| format!("lambda_{t}")));
            header.extend(
                [
                    "cell",
                    "n_power",
                    "p1_err",
                    "p2_norm",
                    "p3_norm",
                    "premature_max",
                    "separation_ok",
                    "meets_eta",
                ]
                .map(String::from),
            );
            wr.write_record(&header)?;
            for r in &report.evals {
                let e = &r.eval;
                let mut row = vec![r.mode.to_string()];
                row.extend(e.lambda.iter().map(f64::to_string));
                row.push(e.cell.map_or(String::new(), |c| (c + 1).to_string()));
                row.push(e.n_power.to_string());
                row.push(e.p1().to_string());
                row.push(e.p2().to_string());
                row.push(e.p3().to_string());
                row.push(e.premature_max.map_or(String::new(), |x| x.to_string()));
                row.push(e.separation_ok.to_string());
                row.push(r.meets_eta.to_string());
                wr.write_record(&row)?;
            }
            criteria::csv_string(wr)?
        }
    };
    Ok(JobOutput { body, pass })
}

/// Validates the payload against the command's schema and runs it.
pub fn run_job(command: Command, payload: Value, seed: Option<u64>, format: Format) -> Result<JobOutput> {
    let seed = seed.unwrap_or(0);
    match command {
        Command::CoverBuild => {
            let cov = match parse::<CoverBuild>(command, payload)? {
                CoverBuild::Graded { k, params } => build_graded_covering(&k, &params)?,
                CoverBuild::Log { params, q: None } => build_log_covering(&params)?,
                CoverBuild::Log { params, q: Some(q) } => build_log_covering_with_q(&params, q)?,
            };
            let body = match format {
                Format::Json => json(&cov)?,
                Format::Csv => covering_csv(&cov)?,
            };
            Ok(JobOutput { body, pass: true })
        }
        Command::CoverVerify => {
            let p: CoverVerify = parse(command, payload)?;
            p.k.validate()?;
            p.params.validate(p.k.dim())?;
            p.covering.validate()?;
            let r = verify_graded(&p.covering, &p.k, &p.params);
            let body = match format {
                Format::Json => json(&r)?,
                Format::Csv => graded_csv(&r)?,
            };
            Ok(JobOutput { body, pass: r.pass })
        }
        Command::CriterionCheck => {
            let p: CriterionCheck = parse(command, payload)?;
            let cov = match (p.covering, p.graded) {
                (Some(c), None) => c,
                (None, Some(g)) => build_graded_covering(&p.k, &g)?,
                _ => return Err(Error::Config("give exactly one of covering, graded".into())),
            };
            let r = criteria::check_basic_criterion(&p.fams, &cov, &p.k, &p.v, p.m1, p.m2, p.eps, &p.options)?;
            report_output(&r, format)
        }
        Command::UnifCheck => {
            let p: UnifCheck = parse(command, payload)?;
            let r = criteria::check_unif_hypotheses(p.fam, &p.params)?;
            match p.table_stride {
                None => report_output(&r, format),
                Some(stride) => {
                    let rows = criteria::unif_margin_table(p.fam, &p.params, stride)?;
                    let body = match format {
                        Format::Json => json(&serde_json::json!({ "report": r, "table": rows }))?,
                        Format::Csv => criteria::unif_table_csv(&rows)?,
                    };
                    Ok(JobOutput { body, pass: r.pass })
                }
            }
        }
        Command::CorollaryCheck => {
            let p: CorollaryCheck = parse(command, payload)?;
            let r = criteria::check_corollary_hypotheses(p.fam, p.i0, p.grid, &p.variant, p.n_start, p.n_max, p.tol)?;
            report_output(&r, format)
        }
        Command::CaracCheck => {
            let p: CaracCheck = parse(command, payload)?;
            let r = criteria::check_carac_conditions(&p.fams, &p.schedule, &p.params)?;
            report_output(&r, format)
        }
        Command::WitnessBuild => {
            let cfg: WitnessConfig = parse(command, payload)?;
            let w = witness::build_witness(&cfg)?;
            let body = match format {
                Format::Json => json(&w)?,
                Format::Csv => {
                    let mut wr = csv::Writer::from_writer(Vec::new());
                    for c in &w.coeffs {
                        wr.serialize(c)?;
                    }
                    criteria::csv_string(wr)?
                }
            };
            Ok(JobOutput { body, pass: true })
        }
        Command::WitnessEval => run_witness_eval(parse(command, payload)?, seed, format),
        Command::WitnessSweep => {
            let p: WitnessSweepJob = parse(command, payload)?;
            let r = witness::sweep_sigma(&p.witness, &p.bases, p.grid)?;
            let body = match format {
                Format::Json => json(&r)?,
                Format::Csv => r.to_csv()?,
            };
            Ok(JobOutput { body, pass: r.trend_ok })
        }
        Command::OrbitProbe => {
            let p: OrbitProbe = parse(command, payload)?;
            let r = orbit_probe(&p)?;
            let body = match format {
                Format::Json => json(&r)?,
                Format::Csv => {
                    let mut wr = csv::Writer::from_writer(Vec::new());
                    wr.write_record(["target", "hit", "distance", "best_n"])?;
                    for h in &r.hits {
                        wr.write_record([
                            h.target.to_string(),
                            h.hit.map_or("miss".to_string(), |n| n.to_string()),
                            h.distance.to_string(),
                            h.best_n.to_string(),
                        ])?;
                    }
                    criteria::csv_string(wr)?
                }
            };
            Ok(JobOutput { body, pass: r.all_hit })
        }
    }
}

fn report_output(r: &criteria::CriterionReport, format: Format) -> Result<JobOutput> {
    let body = match format {
        Format::Json => json(r)?,
        Format::Csv => r.to_csv()?,
    };
    Ok(JobOutput { body, pass: r.pass })
}

/// Assembles the payload from a config file body (a bare payload or a full
/// [`Job`]), `--params` overrides and an `--in` document.
pub fn assemble_payload(
    command: Command,
    config: Option<Value>,
    params: Option<Value>,
    input: Option<Value>,
) -> Result<(Value, Option<u64>, OutputSpec)> {
    let (mut payload, seed, output) = match config {
        Some(v) if v.get("command").is_some() => {
            let job: Job = serde_json::from_value(v).map_err(|e| Error::Config(format!("job file: {e}")))?;
            if job.command != command {
                return Err(Error::Config(format!(
                    "job file is for {}, invoked as {command}",
                    job.command
                )));
            }
            (job.payload, job.seed, job.output)
        }
        Some(v) => (v, None, OutputSpec::default()),
        None => (Value::Object(Default::default()), None, OutputSpec::default()),
    };
    let obj = payload
        .as_object_mut()
        .ok_or_else(|| Error::Config("payload must be a JSON object".into()))?;
    if let Some(p) = params {
        let Value::Object(map) = p else {
            return Err(Error::Config("--params must be a JSON object".into()));
        };
        obj.extend(map);
    }
    if let Some(doc) = input {
        let key = command
            .input_key()
            .ok_or_else(|| Error::Config(format!("{command} takes no --in document")))?;
        obj.insert(key.to_string(), doc);
    }
    Ok((payload, seed, output))
}

/// Convenience for a full job document.
pub fn run(job: &Job) -> Result<JobOutput> {
    run_job(job.command, job.payload.clone(), job.seed, job.output.format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
            assert_eq!(serde_json::to_value(c).unwrap(), json!(c.name()));
        }
        assert!("cover".parse::<Command>().is_err());
    }

    #[test]
    fn unknown_field_rejected() {
        let payload = json!({"kind": "log", "params": {"k": [[1.2, 1.3]], "m": 2, "r": 1, "base": 4}, "extra": 1});
        assert!(matches!(
            run_job(Command::CoverBuild, payload, None, Format::Json),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn assemble_merges() {
        let (p, seed, _) = assemble_payload(
            Command::CoverVerify,
            Some(json!({"command": "cover-verify", "payload": {"k": [[0, 1]]}, "seed": 7})),
            Some(json!({"params": {"x": 1}})),
            Some(json!({"cells": []})),
        )
        .unwrap();
        assert_eq!(seed, Some(7));
        assert_eq!(p["covering"], json!({"cells": []}));
        assert_eq!(p["params"], json!({"x": 1}));
        assert!(assemble_payload(Command::CoverBuild, None, None, Some(json!({}))).is_err());
        assert!(assemble_payload(
            Command::CoverBuild,
            Some(json!({"command": "orbit-probe", "payload": {}})),
            None,
            None
        )
        .is_err());
    }

    #[test]
    fn beta_le_alpha_d_is_config_error() {
        let payload = json!({
            "fams": [{"variant": "pure_power"}],
            "k": [[1.0, 2.0]],
            "v": [{"entries": [[0, 1.0]]}],
            "m1": 1, "m2": 2, "eps": 0.1,
            "graded": {"alpha": 0.5, "beta": 0.4, "D": 1.0, "tau": 1.0, "eta": 0.1, "N": 1}
        });
        let err = run_job(Command::CriterionCheck, payload, None, Format::Json).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
    }
}
