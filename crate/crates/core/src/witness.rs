//! Explicit convolution witness on `ℓ_1^d` and its two evaluation paths.
//!
//! Per axis `t` the witness is
//! `u'_t = u_t + Σ_j Σ_l d_{l,j} e_{N_j−(m−1)σ+l} + ε_t e_σ` with
//! `ε_t = ŵ_{mσ}(a_t)^{-1/m}` and
//! `d_{l,j} = v_l / (m ε_t^{m−1} w_{l+1}(λ_j)⋯w_{l+N_j}(λ_j))`.
//! [`eval_analytic`] splits `T^{N_i}((u')^m)` into the `P1`, `P2`, `P3`
//! parts from closed-form log windows; [`eval_bruteforce`] expands the
//! convolution power literally.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::{build_log_covering, build_log_covering_with_q, Covering, LogCoveringParams, ParamBox};
use crate::error::{Error, Result};
use crate::seqspace::{ProductKind, SeqVec, SpaceNorm};
use crate::weights::{backward_with, uniform_grid, LogWindows, WeightFamily, WindowCache};

fn default_budget() -> u64 {
    10_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessConfig {
    pub log_cov: LogCoveringParams,
    /// One family per axis; pure_power on every axis when absent.
    #[serde(default)]
    pub fams: Option<Vec<WeightFamily>>,
    /// Starting vectors, one per axis; empty means zero on every axis.
    #[serde(default)]
    pub u: Vec<SeqVec>,
    /// Targets, one per axis.
    pub v: Vec<SeqVec>,
    pub eta: f64,
    /// Replace the log-covering by these cells.
    #[serde(default)]
    pub cov_override: Option<Covering>,
    /// Use a log-covering with this many cells instead of the default count.
    #[serde(default)]
    pub q_override: Option<u64>,
    /// Largest number of terms `nnz(u')^m` expanded by the brute-force path.
    #[serde(default = "default_budget")]
    pub bruteforce_budget: u64,
    /// Add coefficients whose formula indices coincide instead of failing;
    /// such a witness never counts as separated.
    #[serde(default)]
    pub allow_collisions: bool,
}

impl WitnessConfig {
    pub fn new(log_cov: LogCoveringParams, v: Vec<SeqVec>, eta: f64) -> Self {
        Self {
            log_cov,
            fams: None,
            u: Vec::new(),
            v,
            eta,
            cov_override: None,
            q_override: None,
            bruteforce_budget: default_budget(),
            allow_collisions: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.log_cov.k.dim()
    }

    pub fn families(&self) -> Vec<WeightFamily> {
        self.fams
            .clone()
            .unwrap_or_else(|| vec![WeightFamily::PurePower; self.dim()])
    }

    pub fn u_axis(&self, t: usize) -> SeqVec {
        self.u.get(t).cloned().unwrap_or_default()
    }

    /// `max supp (u, v)`, 0 when everything vanishes.
    pub fn p(&self) -> u64 {
        self.u
            .iter()
            .chain(&self.v)
            .filter_map(SeqVec::max_support)
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.log_cov.validate()?;
        let d = self.dim();
        if self.v.len() != d {
            return Err(Error::InvalidParams(format!("v has {} axes, K has {d}", self.v.len())));
        }
        if !self.u.is_empty() && self.u.len() != d {
            return Err(Error::InvalidParams(format!("u has {} axes, K has {d}", self.u.len())));
        }
        let fams = self.families();
        if fams.len() != d {
            return Err(Error::InvalidParams(format!("{} families for {d} axes", fams.len())));
        }
        for (t, f) in fams.iter().enumerate() {
            f.validate()?;
            f.check_lambda(self.log_cov.k.lo(t))?;
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParams(format!("eta must be positive, got {}", self.eta)));
        }
        if self.cov_override.is_some() && self.q_override.is_some() {
            return Err(Error::InvalidParams(
                "give at most one of cov_override, q_override".into(),
            ));
        }
        Ok(())
    }

    pub fn covering(&self) -> Result<Covering> {
        let cov = match (&self.cov_override, self.q_override) {
            (Some(c), _) => c.clone(),
            (None, Some(q)) => build_log_covering_with_q(&self.log_cov, q)?,
            (None, None) => build_log_covering(&self.log_cov)?,
        };
        cov.validate()?;
        if cov.dim() != self.dim() {
            return Err(Error::InvalidParams(format!(
                "covering has dimension {}, K has {}",
                cov.dim(),
                self.dim()
            )));
        }
        Ok(cov)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessCoeff {
    pub axis: usize,
    pub l: u64,
    /// 1-based cell index.
    pub j: usize,
    pub index: u64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub sigma: u64,
    pub m: u32,
    pub p: u64,
    pub q: usize,
    pub powers: Vec<u64>,
    pub eps: Vec<f64>,
    pub log_eps: Vec<f64>,
    pub vectors: Vec<SeqVec>,
    pub coeffs: Vec<WitnessCoeff>,
    /// `min_t (a_t/b_t − 1/m)`.
    pub cprime: f64,
    pub cprime_axes: Vec<f64>,
    pub fams: Vec<WeightFamily>,
    pub covering: Covering,
    /// Indices where formula supports coincided (only with `allow_collisions`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collisions: Vec<u64>,
    #[serde(skip)]
    cache: Arc<WindowCache>,
}

impl Witness {
    fn top(&self) -> u64 {
        (self.m as u64 * self.sigma).max(self.powers.iter().max().copied().unwrap_or(0) + self.p)
    }

    fn windows(&self, t: usize, lambda: f64) -> Result<LogWindows> {
        self.cache.get(self.fams[t], lambda, self.top())
    }

    /// Largest index of a coefficient term on axis `t`, if any.
    fn d_max(&self, t: usize) -> Option<u64> {
        self.coeffs.iter().filter(|c| c.axis == t).map(|c| c.index).max()
    }

    /// Largest index of `P_0` on axis `t`: every term `U^a D^b E^c` of
    /// `(u' )^m` except `D E^{m−1}` and `E^m`.
    pub fn p0_max_support(&self, t: usize, u: &SeqVec) -> Option<u64> {
        let m = self.m as u64;
        let umax = u.max_support();
        let dmax = self.d_max(t);
        let mut best: Option<u64> = None;
        for a in 0..=m {
            for b in 0..=(m - a) {
                let c = m - a - b;
                if a == 0 && (b == 1 || b == 0) {
                    continue;
                }
                let ua = if a > 0 { umax.map(|x| a * x) } else { Some(0) };
                let db = if b > 0 { dmax.map(|x| b * x) } else { Some(0) };
                if let (Some(ua), Some(db)) = (ua, db) {
                    let s = ua + db + c * self.sigma;
                    best = Some(best.map_or(s, |x| x.max(s)));
                }
            }
        }
        best
    }

    /// Support separation for cell `i` (0-based).
    pub fn separation_ok(&self, i: usize, cfg: &WitnessConfig) -> bool {
        let m = self.m as u64;
        let n_i = self.powers[i];
        let n_q = *self.powers.iter().max().unwrap();
        let p = self.p;
        let gaps = self.powers.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] > p);
        let base = (m - 1) * self.sigma + p < n_i && m * self.sigma >= n_i && m * self.sigma > n_q + p;
        base && gaps
            && self.collisions.is_empty()
            && (0..self.vectors.len()).all(|t| self.p0_max_support(t, &cfg.u_axis(t)).is_none_or(|s| s < n_i))
    }

    /// `T^{N}((u')^n) = 0` for all `n < m` because every such power is
    /// supported below `N`.
    fn premature_certified(&self, n_power: u64) -> bool {
        let m = self.m as u64;
        self.vectors
            .iter()
            .all(|x| x.max_support().is_none_or(|s| (m - 1) * s < n_power))
    }
}

/// Builds the witness; coefficients are computed in log domain.
pub fn build_witness(cfg: &WitnessConfig) -> Result<Witness> {
    cfg.validate()?;
    let cov = cfg.covering()?;
    let d = cfg.dim();
    let m = cfg.log_cov.m;
    let mf = m as f64;
    let sigma = cfg.log_cov.sigma()?;
    let msigma = (m as u64)
        .checked_mul(sigma)
        .ok_or_else(|| Error::IndexOverflow("m * sigma".into()))?;
    let head = (m as u64 - 1) * sigma;
    let fams = cfg.families();
    let p = cfg.p();
    let powers: Vec<u64> = cov.cells.iter().map(|c| c.n).collect();
    if let Some((j, &n)) = powers.iter().enumerate().find(|(_, &n)| n < head) {
        return Err(Error::InvalidParams(format!(
            "N_{} = {n} is below (m-1)sigma = {head}",
            j + 1
        )));
    }
    let top = msigma.max(powers.iter().max().unwrap() + p);
    let cache = Arc::new(WindowCache::new());

    let mut eps = Vec::with_capacity(d);
    let mut log_eps = Vec::with_capacity(d);
    let mut vectors = Vec::with_capacity(d);
    let mut coeffs = Vec::new();
    let mut cprime_axes = Vec::with_capacity(d);
    let mut all_collisions = Vec::new();
    for t in 0..d {
        let (a, b) = (cfg.log_cov.k.lo(t), cfg.log_cov.k.hi(t));
        let le = -fams[t].log_hat(a, msigma)? / mf;
        log_eps.push(le);
        eps.push(le.exp());
        cprime_axes.push(a / b - 1.0 / mf);

        let mut entries: BTreeMap<u64, Vec<&'static str>> = BTreeMap::new();
        let u = cfg.u_axis(t);
        for k in u.indices() {
            entries.entry(k).or_default().push("u");
        }
        entries.entry(sigma).or_default().push("sigma");
        let mut pairs: Vec<(u64, f64)> = u.iter().collect();
        pairs.push((sigma, le.exp()));
        for (j, cell) in cov.cells.iter().enumerate() {
            let lw = cache.get(fams[t], cell.anchor[t], top)?;
            for (l, vl) in cfg.v[t].iter() {
                let index = cell.n - head + l;
                let logd = vl.abs().ln() - mf.ln() - (mf - 1.0) * le - lw.window(l, cell.n);
                let value = vl.signum() * logd.exp();
                entries.entry(index).or_default().push("d");
                pairs.push((index, value));
                coeffs.push(WitnessCoeff {
                    axis: t,
                    l,
                    j: j + 1,
                    index,
                    value,
                });
            }
        }
        let collisions: Vec<u64> = entries
            .iter()
            .filter(|(_, srcs)| srcs.len() > 1)
            .map(|(&k, _)| k)
            .collect();
        if !collisions.is_empty() {
            if !cfg.allow_collisions {
                return Err(Error::SupportCollision { indices: collisions });
            }
            all_collisions.extend(collisions);
        }
        vectors.push(SeqVec::from_pairs(pairs));
    }
    let cprime = cprime_axes.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Witness {
        sigma,
        m,
        p,
        q: cov.q(),
        powers,
        eps,
        log_eps,
        vectors,
        coeffs,
        cprime,
        cprime_axes,
        fams,
        covering: cov,
        collisions: {
            all_collisions.sort_unstable();
            all_collisions.dedup();
            all_collisions
        },
        cache,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `λ ≥ λ_j` dominated the `P2` sum.
    Above,
    /// `λ < λ_j` dominated.
    Below,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessEval {
    pub lambda: Vec<f64>,
    /// 0-based cell index, when the power is one of the `N_j`.
    pub cell: Option<usize>,
    pub n_power: u64,
    pub p1_err: Vec<f64>,
    pub p2_norm: Vec<f64>,
    pub p3_norm: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p2_branch: Vec<Branch>,
    /// `max_{n<m} ‖T^{N}((u')^n)‖_1`; null when not certified and too
    /// large to expand.
    pub premature_max: Option<f64>,
    pub separation_ok: bool,
    /// `Σ_t (p1 + p2 + p3)`.
    pub total: f64,
}

impl WitnessEval {
    pub fn p1(&self) -> f64 {
        self.p1_err.iter().sum()
    }

    pub fn p2(&self) -> f64 {
        self.p2_norm.iter().sum()
    }

    pub fn p3(&self) -> f64 {
        self.p3_norm.iter().sum()
    }

    /// The three goals `< η` plus vanishing premature powers `< η`.
    pub fn meets(&self, eta: f64) -> bool {
        self.p1() < eta && self.p2() < eta && self.p3() < eta && self.premature_max.is_some_and(|x| x < eta)
    }
}

/// Closed-form evaluation of `T_λ^{N_i}((u')^m)` for the cell `i`
/// containing `λ`.
pub fn eval_analytic(w: &Witness, cfg: &WitnessConfig, lambda: &[f64]) -> Result<WitnessEval> {
    if !cfg.log_cov.k.contains(lambda) {
        return Err(Error::OutsideBox(lambda.to_vec()));
    }
    let i = w
        .covering
        .locate(lambda)
        .ok_or_else(|| Error::OutsideBox(lambda.to_vec()))?;
    let cells = &w.covering.cells;
    let n_i = w.powers[i];
    let m = w.m as u64;
    let msigma = m * w.sigma;
    let d = w.vectors.len();
    let mut p1 = vec![0.0; d];
    let mut p2 = vec![0.0; d];
    let mut p3 = vec![0.0; d];
    let mut branch = Vec::with_capacity(d);
    for t in 0..d {
        let lam = lambda[t];
        crate::criteria::check_admissible(w.fams[t], lam)?;
        let here = w.windows(t, lam)?;
        let anchor_i = w.windows(t, cells[i].anchor[t])?;
        for (l, vl) in cfg.v[t].iter() {
            let x = here.window(l, n_i) - anchor_i.window(l, n_i);
            p1[t] += vl.abs() * x.exp_m1().abs();
        }
        let (mut above, mut below) = (0.0, 0.0);
        for (j, cell) in cells.iter().enumerate().skip(i + 1) {
            let n_j = w.powers[j];
            if n_j < n_i {
                continue;
            }
            let anchor_j = w.windows(t, cell.anchor[t])?;
            let mut s = 0.0;
            for (l, vl) in cfg.v[t].iter() {
                let x = here.window(n_j - n_i + l, n_i) - anchor_j.window(l, n_j);
                s += vl.abs() * x.exp();
            }
            if lam >= cell.anchor[t] {
                above += s;
            } else {
                below += s;
            }
        }
        p2[t] = above + below;
        branch.push(if above >= below { Branch::Above } else { Branch::Below });
        if msigma >= n_i {
            p3[t] = (m as f64 * w.log_eps[t] + here.window(msigma - n_i, n_i)).exp();
        }
    }
    let premature_max = if w.premature_certified(n_i) {
        Some(0.0)
    } else {
        premature_bruteforce(w, cfg, lambda, n_i).ok()
    };
    let total = p1.iter().chain(&p2).chain(&p3).sum();
    Ok(WitnessEval {
        lambda: lambda.to_vec(),
        cell: Some(i),
        n_power: n_i,
        p1_err: p1,
        p2_norm: p2,
        p3_norm: p3,
        p2_branch: branch,
        premature_max,
        separation_ok: w.separation_ok(i, cfg),
        total,
    })
}

fn check_budget(vectors: &[SeqVec], m: u32, budget: u64) -> Result<()> {
    for x in vectors {
        let terms = (x.len() as u64).checked_pow(m);
        if terms.is_none_or(|t| t > budget) {
            return Err(Error::Budget(format!(
                "{}^{m} terms exceed the brute-force budget {budget}; use the analytic path",
                x.len()
            )));
        }
    }
    Ok(())
}

fn shifted(fam: WeightFamily, lambda: f64, power: u64, x: &SeqVec) -> Result<SeqVec> {
    let top = x.max_support().unwrap_or(0);
    let lw = LogWindows::new(fam, lambda, top)?;
    Ok(backward_with(x, power, |l| lw.window(l, power)))
}

fn premature_bruteforce(w: &Witness, cfg: &WitnessConfig, lambda: &[f64], n_power: u64) -> Result<f64> {
    check_budget(&w.vectors, w.m.saturating_sub(1).max(1), cfg.bruteforce_budget)?;
    premature_norm(&w.vectors, &w.fams, lambda, n_power, w.m)
}

fn premature_norm(vectors: &[SeqVec], fams: &[WeightFamily], lambda: &[f64], n_power: u64, m: u32) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for n in 1..m {
        let mut s = 0.0;
        for (t, x) in vectors.iter().enumerate() {
            let y = shifted(fams[t], lambda[t], n_power, &x.power(n, ProductKind::Convolution)?)?;
            s += y.norm(SpaceNorm::L1);
        }
        worst = worst.max(s);
    }
    Ok(worst)
}

/// Components of `T_λ^N(x^m)` for arbitrary vectors: indices in `[0, p]`
/// give `p1 = ‖· − v‖_1`, index `mσ − N` gives `p3`, the rest `p2`.
#[allow(clippy::too_many_arguments)]
pub fn eval_bruteforce_power(
    vectors: &[SeqVec],
    fams: &[WeightFamily],
    v: &[SeqVec],
    lambda: &[f64],
    n_power: u64,
    m: u32,
    p: u64,
    sigma: u64,
    budget: u64,
) -> Result<WitnessEval> {
    if m == 0 {
        return Err(Error::InvalidParams("m must be >= 1".into()));
    }
    let d = vectors.len();
    if fams.len() != d || v.len() != d || lambda.len() != d {
        return Err(Error::InvalidParams("dimension mismatch".into()));
    }
    check_budget(vectors, m, budget)?;
    let p3_index = (m as u64 * sigma).checked_sub(n_power).filter(|&k| k > p);
    let mut p1 = vec![0.0; d];
    let mut p2 = vec![0.0; d];
    let mut p3 = vec![0.0; d];
    for t in 0..d {
        let y = shifted(
            fams[t],
            lambda[t],
            n_power,
            &vectors[t].power(m, ProductKind::Convolution)?,
        )?;
        p1[t] = y.restrict(0, p).sub(&v[t]).norm(SpaceNorm::L1);
        for (k, c) in y.iter() {
            if k <= p {
                continue;
            }
            if Some(k) == p3_index {
                p3[t] = c.abs();
            } else {
                p2[t] += c.abs();
            }
        }
    }
    let premature_max = Some(premature_norm(vectors, fams, lambda, n_power, m)?);
    let total = p1.iter().chain(&p2).chain(&p3).sum();
    Ok(WitnessEval {
        lambda: lambda.to_vec(),
        cell: None,
        n_power,
        p1_err: p1,
        p2_norm: p2,
        p3_norm: p3,
        p2_branch: Vec::new(),
        premature_max,
        separation_ok: false,
        total,
    })
}

/// Literal sparse expansion of `T_λ^N((u')^n)` for `n = 1..m`.
pub fn eval_bruteforce(w: &Witness, cfg: &WitnessConfig, lambda: &[f64], n_power: u64) -> Result<WitnessEval> {
    if lambda.len() != w.vectors.len() {
        return Err(Error::InvalidParams("dimension mismatch".into()));
    }
    let mut ev = eval_bruteforce_power(
        &w.vectors,
        &w.fams,
        &cfg.v,
        lambda,
        n_power,
        w.m,
        w.p,
        w.sigma,
        cfg.bruteforce_budget,
    )?;
    ev.cell = w.powers.iter().position(|&n| n == n_power);
    ev.separation_ok = ev.cell.is_some_and(|i| w.separation_ok(i, cfg));
    Ok(ev)
}

/// Product grid with `per_axis` points on each axis of `k`.
pub fn lambda_grid(k: &ParamBox, per_axis: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = k.axes.iter().map(|&[lo, hi]| uniform_grid(lo, hi, per_axis)).collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|pre| {
                axis.iter().map(move |&x| {
                    let mut p = pre.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub base: u64,
    pub sigma: u64,
    pub q: usize,
    #[serde(rename = "N_1")]
    pub n_1: u64,
    #[serde(rename = "N_q")]
    pub n_q: u64,
    pub separation_ok: bool,
    pub separated_points: usize,
    #[serde(default)]
    pub collisions: usize,
    pub p1_worst: f64,
    pub p2_worst: f64,
    pub p3_worst: f64,
    pub total_worst: f64,
    pub premature_max: Option<f64>,
    pub predicted_p2_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub grid_points: usize,
    /// Least-squares slope of `log p2_worst` against `log σ`.
    pub fitted_p2_slope: Option<f64>,
    /// Row from which the strict-decrease check starts.
    pub trend_from_row: usize,
    /// `total_worst` strictly decreasing from `trend_from_row` on.
    pub trend_ok: bool,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl SweepReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "sigma",
            "q",
            "N_1",
            "N_q",
            "separation_ok",
            "p1_worst",
            "p2_worst",
            "p3_worst",
            "premature_max",
            "predicted_p2_slope",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.sigma.to_string(),
                r.q.to_string(),
                r.n_1.to_string(),
                r.n_q.to_string(),
                r.separation_ok.to_string(),
                r.p1_worst.to_string(),
                r.p2_worst.to_string(),
                r.p3_worst.to_string(),
                r.premature_max.map_or(String::new(), |x| x.to_string()),
                r.predicted_p2_slope.to_string(),
            ])?;
        }
        crate::criteria::csv_string(w)
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// One witness per `σ = base^m`, evaluated on a `per_axis^d` grid of `K'`.
pub fn sweep_sigma(template: &WitnessConfig, bases: &[u64], per_axis: usize) -> Result<SweepReport> {
    if bases.is_empty() {
        return Err(Error::InvalidParams("sweep needs at least one base".into()));
    }
    if bases.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("bases must be strictly increasing".into()));
    }
    if template.cov_override.is_some() {
        return Err(Error::InvalidParams(
            "a sweep rebuilds the covering; drop cov_override".into(),
        ));
    }
    let grid = lambda_grid(&template.log_cov.k, per_axis.max(1));
    let lam_min = template
        .log_cov
        .k
        .axes
        .iter()
        .map(|a| a[0])
        .fold(f64::INFINITY, f64::min);
    let mut rows = Vec::with_capacity(bases.len());
    for &base in bases {
        let mut cfg = template.clone();
        cfg.log_cov.base = base;
        let w = build_witness(&cfg)?;
        let evals: Vec<WitnessEval> = grid
            .par_iter()
            .map(|lam| eval_analytic(&w, &cfg, lam))
            .collect::<Result<_>>()?;
        let max = |f: &dyn Fn(&WitnessEval) -> f64| evals.iter().map(f).fold(0.0, f64::max);
        let premature_max = evals
            .iter()
            .map(|e| e.premature_max)
            .try_fold(0.0f64, |acc, x| x.map(|v| acc.max(v)));
        let separated_points = evals.iter().filter(|e| e.separation_ok).count();
        rows.push(SweepRow {
            base,
            sigma: w.sigma,
            q: w.q,
            n_1: w.powers[0],
            n_q: *w.powers.last().unwrap(),
            separation_ok: separated_points == evals.len(),
            separated_points,
            collisions: w.collisions.len(),
            p1_worst: max(&|e| e.p1()),
            p2_worst: max(&|e| e.p2()),
            p3_worst: max(&|e| e.p3()),
            total_worst: max(&|e| e.p1() + e.p2() + e.p3()),
            premature_max,
            predicted_p2_slope: -w.cprime * lam_min,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.p2_worst > 0.0)
        .map(|r| ((r.sigma as f64).ln(), r.p2_worst.ln()))
        .unzip();
    let mut notes = Vec::new();
    let trend_from_row = match rows.iter().position(|r| r.separation_ok) {
        Some(i) => i,
        None => {
            notes.push("no row is separated at every grid point; trend checked over all rows".into());
            0
        }
    };
    let trend_ok = rows[trend_from_row..]
        .windows(2)
        .all(|w| w[1].total_worst < w[0].total_worst);
    Ok(SweepReport {
        rows,
        grid_points: grid.len(),
        fitted_p2_slope: fit_slope(&xs, &ys),
        trend_from_row,
        trend_ok,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(base: u64, q: Option<u64>, v: Vec<SeqVec>) -> WitnessConfig {
        let mut c = WitnessConfig::new(
            LogCoveringParams {
                k: ParamBox::cube(1.2, 1.3, 2),
                m: 2,
                r: 1,
                base,
            },
            v,
            0.1,
        );
        c.q_override = q;
        c
    }

    #[test]
    fn eps_small_sigma() {
        let mut c = cfg(4, None, vec![SeqVec::new(), SeqVec::new()]);
        c.log_cov.k = ParamBox::cube(1.0, 1.5, 2);
        c.log_cov.r = 2;
        let w = build_witness(&c).unwrap();
        assert!((w.eps[0] - 32f64.powf(-0.5)).abs() < 1e-15);
        assert!((w.eps[0] - 0.1767767).abs() < 1e-7);
        // u = v = 0: only ε e_σ
        assert_eq!(w.vectors[0], SeqVec::monomial(16, w.eps[0]));
        assert!(w.coeffs.is_empty());
    }

    #[test]
    fn coefficient_formula() {
        let c = cfg(100, Some(4), vec![SeqVec::basis(0), SeqVec::basis(0)]);
        let w = build_witness(&c).unwrap();
        assert_eq!(w.powers[0], 10_200);
        let anchor = w.covering.cells[0].anchor[0];
        let d01 = w.coeffs.iter().find(|x| x.axis == 0 && x.j == 1 && x.l == 0).unwrap();
        let expect = 1.0 / (2.0 * w.eps[0] * (10_200f64).powf(anchor));
        assert!((d01.value - expect).abs() < 1e-12 * expect);
        assert_eq!(d01.index, 200);
    }

    #[test]
    fn analytic_at_anchor_and_p3() {
        let c = cfg(100, Some(4), vec![SeqVec::basis(0), SeqVec::basis(0)]);
        let w = build_witness(&c).unwrap();
        let anchor = w.covering.cells[0].anchor.clone();
        let ev = eval_analytic(&w, &c, &anchor).unwrap();
        assert_eq!(ev.p1_err, vec![0.0, 0.0]);
        assert!(ev.separation_ok);
        assert_eq!(ev.premature_max, Some(0.0));

        let lam = [1.25, 1.25];
        let ev = eval_analytic(&w, &c, &lam).unwrap();
        let i = ev.cell.unwrap();
        let n_i = w.powers[i] as f64;
        let ms = 20_000f64;
        let expect = (-(1.2 / 2.0) * ms.ln() * 2.0 + 1.25 * (ms.ln() - (ms - n_i).ln())).exp();
        assert!((ev.p3_norm[0] - expect).abs() < 1e-12 * expect);
        assert!(ev.p3_norm[0] < 0.1);
        assert!(eval_analytic(&w, &c, &[1.1, 1.25]).is_err());
    }

    #[test]
    fn small_sigma_not_separated() {
        // coefficient index 4·4 lands on σ = 16
        let c = cfg(4, None, vec![SeqVec::basis(0), SeqVec::basis(0)]);
        assert!(matches!(build_witness(&c), Err(Error::SupportCollision { .. })));
        // D·D reaches 60 >= N_1 = 48
        let c = cfg(6, Some(4), vec![SeqVec::basis(0), SeqVec::basis(0)]);
        let w = build_witness(&c).unwrap();
        assert_eq!(w.p0_max_support(0, &SeqVec::new()), Some(60));
        let ev = eval_analytic(&w, &c, &[1.2, 1.2]).unwrap();
        assert!(!ev.separation_ok);
        let bf = eval_bruteforce(&w, &c, &[1.2, 1.2], ev.n_power).unwrap();
        assert!(bf.p1() > ev.p1());
    }

    #[test]
    fn collision_is_an_error() {
        // u placed on a coefficient index
        let mut c = cfg(100, Some(4), vec![SeqVec::basis(0), SeqVec::basis(0)]);
        c.u = vec![SeqVec::basis(0), SeqVec::basis(0)];
        assert!(build_witness(&c).is_ok());
        c.u = vec![SeqVec::basis(200), SeqVec::new()];
        match build_witness(&c) {
            Err(Error::SupportCollision { indices }) => assert_eq!(indices, vec![200]),
            other => panic!("{other:?}"),
        }
        c.allow_collisions = true;
        let w = build_witness(&c).unwrap();
        assert_eq!(w.collisions, vec![200]);
        let d = w.coeffs.iter().find(|x| x.axis == 0 && x.index == 200).unwrap().value;
        assert!((w.vectors[0].get(200) - (1.0 + d)).abs() < 1e-15);
        assert!(!w.separation_ok(0, &c));
    }

    #[test]
    fn bruteforce_identity_power() {
        let x = SeqVec::from_pairs([(0, 0.5), (3, 2.0)]);
        let v = SeqVec::basis(0);
        let ev = eval_bruteforce_power(
            std::slice::from_ref(&x),
            &[WeightFamily::PurePower],
            std::slice::from_ref(&v),
            &[1.0],
            0,
            1,
            1,
            3,
            1000,
        )
        .unwrap();
        assert!((ev.total - x.sub(&v).norm(SpaceNorm::L1)).abs() < 1e-15);
    }

    #[test]
    fn bruteforce_budget() {
        let mut c = cfg(100, Some(4), vec![SeqVec::basis(0), SeqVec::basis(0)]);
        c.bruteforce_budget = 4;
        let w = build_witness(&c).unwrap();
        assert!(matches!(
            eval_bruteforce(&w, &c, &[1.25, 1.25], w.powers[0]),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn slope_fit() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 0.5, -1.0];
        assert!((fit_slope(&x, &y).unwrap() + 1.5).abs() < 1e-15);
        assert!(fit_slope(&[1.0], &[1.0]).is_none());
    }
}
