//! Numeric checkers for the algebra criteria.
//!
//! Every checker returns a [`CriterionReport`]: one [`Condition`] per
//! hypothesis with the worst value found, the bound it is compared against
//! and the point where the worst value occurred. Suprema over parameter
//! boxes are sampled, so reported values are lower bounds on the true sup.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::{uncovered_cells, Covering, ParamBox};
use crate::error::{Error, Result};
use crate::seqspace::{cw_root, ProductKind, SeqVec, SpaceNorm};
use crate::weights::{
    backward_with, log_hat_table, max_secant, uniform_grid, LipschitzProfile, LogWindows, WeightFamily, WindowCache,
};

pub const DEFAULT_TOL: f64 = 1e-9;

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_samples() -> usize {
    3
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `value ≤ bound`
    Le,
    /// `value < bound`
    Lt,
    /// `value ≥ bound`
    Ge,
}

/// Where a worst-case value was attained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WitnessPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub evaluations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessPoint>,
}

impl Condition {
    pub fn new(name: &str, value: f64, bound: f64, relation: Relation) -> Self {
        let pass = match relation {
            Relation::Le => value <= bound,
            Relation::Lt => value < bound,
            Relation::Ge => value >= bound,
        };
        Self {
            name: name.to_string(),
            pass,
            value,
            bound,
            relation,
            evaluations: 0,
            label: None,
            witness: None,
        }
    }

    fn evals(mut self, n: u64) -> Self {
        self.evaluations = n;
        self
    }

    fn at(mut self, w: WitnessPoint) -> Self {
        self.witness = Some(w);
        self
    }

    fn labelled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub pass: bool,
    pub conditions: Vec<Condition>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl CriterionReport {
    fn new(criterion: &str, conditions: Vec<Condition>, notes: Vec<String>) -> Self {
        Self {
            criterion: criterion.to_string(),
            pass: conditions.iter().all(|c| c.pass),
            conditions,
            notes,
        }
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// Flat table: one row per condition.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "criterion",
            "condition",
            "pass",
            "value",
            "bound",
            "relation",
            "evaluations",
        ])?;
        for c in &self.conditions {
            w.write_record([
                self.criterion.clone(),
                c.name.clone(),
                c.pass.to_string(),
                c.value.to_string(),
                c.bound.to_string(),
                format!("{:?}", c.relation).to_lowercase(),
                c.evaluations.to_string(),
            ])?;
        }
        csv_string(w)
    }
}

pub(crate) fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Parameter admissibility used by every checker: `λ > 0`, and `λ > 1`
/// for the geometric family.
pub fn check_admissible(fam: WeightFamily, lambda: f64) -> Result<()> {
    fam.check_lambda(lambda)?;
    if fam == WeightFamily::Geometric && !(lambda > 1.0) {
        return Err(Error::Inadmissible(format!(
            "geometric family needs λ > 1, got {lambda}"
        )));
    }
    Ok(())
}

fn check_interval(fam: WeightFamily, lo: f64, hi: f64) -> Result<()> {
    if !(lo <= hi) {
        return Err(Error::InvalidParams(format!("interval [{lo}, {hi}] is empty")));
    }
    check_admissible(fam, lo)?;
    check_admissible(fam, hi)
}

/// `exp(x)` for a log-domain ratio, saturating instead of overflowing.
fn ratio_from_log(x: f64) -> f64 {
    if x > 709.0 {
        f64::MAX
    } else {
        x.exp()
    }
}

/// Options of [`check_basic_criterion`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasicOptions {
    /// Points per axis sampled in each cell: 0 none, 1 the center, `k ≥ 2`
    /// an even grid including the corners.
    #[serde(default = "default_samples")]
    pub samples_per_axis: usize,
    /// Also evaluate at the cell's anchor.
    #[serde(default = "default_true")]
    pub include_anchor: bool,
    #[serde(default)]
    pub norm: SpaceNorm,
    #[serde(default = "default_kind")]
    pub kind: ProductKind,
    /// Relative tolerance folded into the bound `ε(1 + tol)`.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_kind() -> ProductKind {
    ProductKind::Coordinatewise
}

impl Default for BasicOptions {
    fn default() -> Self {
        Self {
            samples_per_axis: default_samples(),
            include_anchor: true,
            norm: SpaceNorm::L1,
            kind: ProductKind::Coordinatewise,
            tol: DEFAULT_TOL,
        }
    }
}

/// Points sampled inside `b` (plus `anchor` when requested).
pub fn cell_samples(b: &ParamBox, anchor: &[f64], per_axis: usize, include_anchor: bool) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = b.axes.iter().map(|&[lo, hi]| uniform_grid(lo, hi, per_axis)).collect();
    let mut out = Vec::new();
    if include_anchor {
        out.push(anchor.to_vec());
    }
    if per_axis > 0 {
        let mut idx = vec![0usize; axes.len()];
        'outer: loop {
            out.push(idx.iter().enumerate().map(|(t, &i)| axes[t][i]).collect());
            for t in (0..axes.len()).rev() {
                idx[t] += 1;
                if idx[t] < axes[t].len() {
                    continue 'outer;
                }
                idx[t] = 0;
            }
            break;
        }
    }
    out.dedup();
    out
}

#[derive(Clone, Debug)]
struct Worst {
    value: f64,
    at: WitnessPoint,
    evals: u64,
}

impl Worst {
    fn empty() -> Self {
        Self {
            value: 0.0,
            at: WitnessPoint::default(),
            evals: 0,
        }
    }

    fn offer(&mut self, value: f64, at: impl FnOnce() -> WitnessPoint) {
        self.evals += 1;
        if self.evals == 1 || value > self.value || value.is_nan() {
            self.value = value;
            self.at = at();
        }
    }

    /// Merge keeping the first maximum (cells are merged in order).
    fn merge(mut self, other: Worst) -> Worst {
        let evals = self.evals + other.evals;
        if self.evals == 0 || (other.evals > 0 && other.value > self.value) {
            self = other;
        }
        self.evals = evals;
        self
    }
}

/// Conditions (I)–(IV) of the basic criterion for the coordinatewise
/// product, evaluated on the witness terms
/// `S_j = F^{n_j}_{w(λ_j)^{-1/m'}}(v^{1/m'})`.
///
/// Norms of `d`-tuples are the sum of the per-axis norms.
#[allow(clippy::too_many_arguments)]
pub fn check_basic_criterion(
    fams: &[WeightFamily],
    cov: &Covering,
    k: &ParamBox,
    v: &[SeqVec],
    m1: u32,
    m2: u32,
    eps: f64,
    opts: &BasicOptions,
) -> Result<CriterionReport> {
    if opts.kind != ProductKind::Coordinatewise {
        return Err(Error::ProductKind(
            "the basic criterion checker supports the coordinatewise product only".into(),
        ));
    }
    cov.validate()?;
    k.validate()?;
    opts.norm.validate()?;
    let d = cov.dim();
    if fams.len() != d || v.len() != d || k.dim() != d {
        return Err(Error::InvalidParams(format!(
            "dimension mismatch: covering d = {d}, families {}, targets {}, K {}",
            fams.len(),
            v.len(),
            k.dim()
        )));
    }
    if m1 == 0 || m2 < m1 {
        return Err(Error::InvalidParams(format!("need 1 <= m' <= m'', got {m1}, {m2}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParams(format!("epsilon must be >= 0, got {eps}")));
    }
    for f in fams {
        f.validate()?;
    }
    for cell in &cov.cells {
        for t in 0..d {
            check_admissible(fams[t], cell.anchor[t])?;
            check_admissible(fams[t], cell.bounds.lo(t))?;
        }
    }
    let norm = opts.norm;
    let roots: Vec<SeqVec> = v.iter().map(|x| cw_root(x, m1)).collect::<Result<_>>()?;
    let p = v.iter().filter_map(SeqVec::max_support).max().unwrap_or(0);
    let top = cov.cells.iter().map(|c| c.n).max().unwrap_or(0) + p;

    // S_{j,t}
    let s: Vec<Vec<SeqVec>> = cov
        .cells
        .iter()
        .map(|cell| {
            (0..d)
                .map(|t| crate::weights::apply_forward_root_power(fams[t], cell.anchor[t], m1, cell.n, &roots[t]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let bound = eps * (1.0 + opts.tol);
    let mut conditions = Vec::new();

    let uncovered = uncovered_cells(k, &cov.boxes());
    conditions.push(Condition::new("I", uncovered as f64, 0.0, Relation::Le).evals(1));

    let sum_norm: f64 = (0..d)
        .map(|t| {
            let mut acc = SeqVec::new();
            for sj in &s {
                acc = acc.add(&sj[t]);
            }
            acc.norm(norm)
        })
        .sum();
    conditions.push(Condition::new("II.a", sum_norm, bound, Relation::Le).evals(1));

    let per_cell: Vec<[Worst; 3]> = cov
        .cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| -> Result<[Worst; 3]> {
            let mut w2 = Worst::empty();
            let mut w3 = Worst::empty();
            let mut w4 = Worst::empty();
            for lam in cell_samples(&cell.bounds, &cell.anchor, opts.samples_per_axis, opts.include_anchor) {
                let lw: Vec<LogWindows> = (0..d)
                    .map(|t| {
                        check_admissible(fams[t], lam[t])?;
                        LogWindows::new(fams[t], lam[t], top)
                    })
                    .collect::<Result<_>>()?;
                let shift = |t: usize, x: &SeqVec| backward_with(x, cell.n, |l| lw[t].window(l, cell.n));
                for m in m1..=m2 {
                    let mut total = 0.0;
                    for t in 0..d {
                        let mut acc = SeqVec::new();
                        for (j, sj) in s.iter().enumerate() {
                            if j != i {
                                acc = acc.add(&shift(t, &sj[t].power(m, ProductKind::Coordinatewise)?));
                            }
                        }
                        total += acc.norm(norm);
                    }
                    w2.offer(total, || WitnessPoint {
                        cell: Some(i),
                        lambda: Some(lam.clone()),
                        m: Some(m),
                        ..Default::default()
                    });
                    if m > m1 {
                        let own: f64 = (0..d)
                            .map(|t| Ok(shift(t, &s[i][t].power(m, ProductKind::Coordinatewise)?).norm(norm)))
                            .sum::<Result<f64>>()?;
                        w3.offer(own, || WitnessPoint {
                            cell: Some(i),
                            lambda: Some(lam.clone()),
                            m: Some(m),
                            ..Default::default()
                        });
                    }
                }
                let err: f64 = (0..d)
                    .map(|t| {
                        let y = shift(t, &s[i][t].power(m1, ProductKind::Coordinatewise)?);
                        Ok(y.sub(&v[t]).norm(norm))
                    })
                    .sum::<Result<f64>>()?;
                w4.offer(err, || WitnessPoint {
                    cell: Some(i),
                    lambda: Some(lam.clone()),
                    m: Some(m1),
                    ..Default::default()
                });
            }
            Ok([w2, w3, w4])
        })
        .collect::<Result<_>>()?;

    let mut agg = [Worst::empty(), Worst::empty(), Worst::empty()];
    for cellw in per_cell {
        for (a, w) in agg.iter_mut().zip(cellw) {
            *a = std::mem::replace(a, Worst::empty()).merge(w);
        }
    }
    for (name, w) in ["II.b", "III", "IV"].into_iter().zip(agg) {
        let mut c = Condition::new(name, w.value, bound, Relation::Le).evals(w.evals);
        if w.evals > 0 {
            c = c.at(w.at);
        }
        conditions.push(c);
    }
    let notes = vec![format!(
        "sampled suprema ({} points per axis per cell) are lower bounds on the true suprema",
        opts.samples_per_axis
    )];
    Ok(CriterionReport::new("basic", conditions, notes))
}

fn default_grid() -> usize {
    5
}

fn default_dim() -> usize {
    1
}

fn default_threshold() -> f64 {
    10.0
}

/// Hypotheses of the unified criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnifParams {
    pub m_prime: u32,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub beta: f64,
    pub m0: f64,
    pub n0: u64,
    pub f: LipschitzProfile,
    pub n_max: u64,
    pub k_max: u64,
    pub i0: [f64; 2],
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Dimension `d` of the parameter space.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Level that `inf ŵ_{k_max}` must exceed in the divergence probe.
    #[serde(default = "default_threshold")]
    pub divergence_threshold: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl UnifParams {
    pub fn validate(&self) -> Result<()> {
        let d = self.dim as f64;
        if self.dim == 0 {
            return Err(Error::InvalidParams("dim must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha * d < 1.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in (0, 1/d), got {} with d = {}",
                self.alpha, self.dim
            )));
        }
        if !(self.beta > self.alpha * d) {
            return Err(Error::InvalidParams(format!(
                "beta must exceed alpha*d = {}, got {}",
                self.alpha * d,
                self.beta
            )));
        }
        for (name, v) in [("C1", self.c1), ("C2", self.c2), ("M0", self.m0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.m_prime == 0 {
            return Err(Error::InvalidParams("m' must be >= 1".into()));
        }
        if self.n0 == 0 || self.n0 > self.n_max || self.n0 > self.k_max {
            return Err(Error::InvalidParams(format!(
                "need 1 <= N0 <= min(n_max, k_max), got N0 = {}",
                self.n0
            )));
        }
        if self.grid < 2 {
            return Err(Error::InvalidParams("I0 grid needs at least 2 points".into()));
        }
        self.f.validate()?;
        for n in self.n0..=self.n_max {
            let fv = self.f.eval(n);
            if !(fv > 0.0) {
                return Err(Error::InvalidParams(format!("F({n}) = {fv} is not positive")));
            }
            let cap = self.c1 * (n as f64).powf(self.alpha);
            if fv > cap * (1.0 + 1e-12) {
                return Err(Error::InvalidParams(format!(
                    "F(n) <= C1 n^alpha violated at n = {n}: {fv} > {cap}"
                )));
            }
        }
        Ok(())
    }
}

/// Sliding maximum of `g` over windows `[lo + k, hi + k]`, for `k` in
/// `ks` (increasing). Returns `(max, argmax)` per `k`.
fn sliding_max(g: impl Fn(u64) -> f64, lo: u64, hi: u64, ks: std::ops::RangeInclusive<u64>) -> Vec<(f64, u64)> {
    let mut dq: VecDeque<(u64, f64)> = VecDeque::new();
    let mut next = lo + *ks.start();
    let mut out = Vec::new();
    for k in ks {
        while next <= hi + k {
            let v = g(next);
            while dq.back().is_some_and(|&(_, b)| b <= v) {
                dq.pop_back();
            }
            dq.push_back((next, v));
            next += 1;
        }
        while dq.front().is_some_and(|&(x, _)| x < lo + k) {
            dq.pop_front();
        }
        let &(x, v) = dq.front().expect("window is nonempty");
        out.push((v, x));
    }
    out
}

/// Per-grid-point tables `log ŵ_n(a)` for `n ≤ len`.
fn hat_tables(fam: WeightFamily, grid: &[f64], len: u64) -> Result<Vec<Vec<f64>>> {
    grid.par_iter().map(|&a| log_hat_table(fam, a, len)).collect()
}

/// Row of the `(n, k)` margin table of the unified criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnifRow {
    pub n: u64,
    pub k: u64,
    /// `log(LHS) − log(M0 / k^β)` for the first display, inf over `a`.
    pub log_margin_a: f64,
    /// Same for the second display.
    pub log_margin_b: f64,
}

struct UnifData {
    grid: Vec<f64>,
    tables: Vec<Vec<f64>>,
}

impl UnifData {
    fn new(fam: WeightFamily, p: &UnifParams) -> Result<Self> {
        fam.validate()?;
        p.validate()?;
        check_interval(fam, p.i0[0], p.i0[1])?;
        let grid = uniform_grid(p.i0[0], p.i0[1], p.grid);
        let tables = hat_tables(fam, &grid, p.n_max.max(p.k_max))?;
        Ok(Self { grid, tables })
    }

    /// `(inf_a log ŵ_k(a), argmin index)`.
    fn inf_at(&self, k: u64) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (g, t) in self.tables.iter().enumerate() {
            let v = t[k as usize];
            if v < best.0 {
                best = (v, g);
            }
        }
        best
    }
}

fn g_profile(p: &UnifParams) -> impl Fn(u64) -> f64 + '_ {
    move |x| p.f.eval(x) / (x as f64).powf(p.alpha)
}

/// Hypotheses (i)–(iii) of the unified criterion on the grid of `I0`.
pub fn check_unif_hypotheses(fam: WeightFamily, p: &UnifParams) -> Result<CriterionReport> {
    let data = UnifData::new(fam, p)?;
    let grid = &data.grid;
    let mut conditions = Vec::new();

    // (i)
    let mut worst = Worst::empty();
    for n in p.n0..=p.n_max {
        let vals: Vec<f64> = data.tables.iter().map(|t| t[n as usize]).collect();
        let r = max_secant(grid, &vals)? / p.f.eval(n);
        worst.offer(r, || WitnessPoint {
            n: Some(n),
            ..Default::default()
        });
    }
    conditions.push(
        Condition::new("i", worst.value, 1.0 + p.tol, Relation::Le)
            .evals(worst.evals * grid.len() as u64)
            .at(worst.at),
    );

    // (ii): finite probe of divergence
    let (inf_top, g_top) = data.inf_at(p.k_max);
    let (inf_start, _) = data.inf_at(p.n0);
    let probe = ratio_from_log(p.divergence_threshold.ln() - inf_top);
    let mut cond = Condition::new("ii", probe, 1.0, Relation::Le)
        .evals(2 * grid.len() as u64)
        .labelled("probe")
        .at(WitnessPoint {
            k: Some(p.k_max),
            lambda: Some(vec![grid[g_top]]),
            ..Default::default()
        });
    if !(inf_top > inf_start) {
        cond.pass = false;
    }
    conditions.push(cond);

    // (iii)
    let g = g_profile(p);
    let gmax = sliding_max(&g, p.n0, p.n_max, p.n0..=p.k_max);
    let mut wa = Worst::empty();
    let mut wb = Worst::empty();
    for (idx, k) in (p.n0..=p.k_max).enumerate() {
        let kf = k as f64;
        let (inf_k, ga) = data.inf_at(k);
        let rhs = p.m0.ln() - p.beta * kf.ln();
        let (gm, x) = gmax[idx];
        let la = p.c2 * gm * kf.powf(p.alpha) - inf_k - rhs;
        wa.offer(ratio_from_log(la), || WitnessPoint {
            n: Some(x - k),
            k: Some(k),
            lambda: Some(vec![grid[ga]]),
            ..Default::default()
        });
        let lb = -inf_k / p.m_prime as f64 - rhs;
        wb.offer(ratio_from_log(lb), || WitnessPoint {
            k: Some(k),
            lambda: Some(vec![grid[ga]]),
            ..Default::default()
        });
    }
    let nominal = (p.n_max - p.n0 + 1) * (p.k_max - p.n0 + 1) * grid.len() as u64;
    conditions.push(
        Condition::new("iii.a", wa.value, 1.0 + p.tol, Relation::Le)
            .evals(nominal)
            .at(wa.at),
    );
    conditions.push(
        Condition::new("iii.b", wb.value, 1.0 + p.tol, Relation::Le)
            .evals(wb.evals * grid.len() as u64)
            .at(wb.at),
    );
    let notes = vec!["values of (i) and (iii) are ratios LHS/bound; (ii) is threshold / inf w_1...w_k at k_max".into()];
    Ok(CriterionReport::new("unif", conditions, notes))
}

/// Log-margins of (iii) on the lattice `n, k ∈ {N0, N0+stride, …}`.
pub fn unif_margin_table(fam: WeightFamily, p: &UnifParams, stride: u64) -> Result<Vec<UnifRow>> {
    let data = UnifData::new(fam, p)?;
    let stride = stride.max(1);
    let g = g_profile(p);
    let mut rows = Vec::new();
    for n in (p.n0..=p.n_max).step_by(stride as usize) {
        for k in (p.n0..=p.k_max).step_by(stride as usize) {
            let kf = k as f64;
            let (inf_k, _) = data.inf_at(k);
            let rhs = p.m0.ln() - p.beta * kf.ln();
            rows.push(UnifRow {
                n,
                k,
                log_margin_a: p.c2 * g(n + k) * kf.powf(p.alpha) - inf_k - rhs,
                log_margin_b: -inf_k / p.m_prime as f64 - rhs,
            });
        }
    }
    Ok(rows)
}

pub fn unif_table_csv(rows: &[UnifRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    csv_string(w)
}

/// Constants of the two practical corollaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorollaryVariant {
    /// `D1 n^α`-Lipschitz and `inf ŵ_n ≥ D2 exp(D3 n^α)`.
    #[serde(rename = "1")]
    One { d1: f64, d2: f64, d3: f64, alpha: f64 },
    /// `D1 log n`-Lipschitz and `inf ŵ_n ≥ D2 n^γ`.
    #[serde(rename = "2")]
    Two { d1: f64, d2: f64, gamma: f64 },
}

impl CorollaryVariant {
    pub fn validate(&self) -> Result<()> {
        let vals: Vec<(&str, f64)> = match *self {
            CorollaryVariant::One { d1, d2, d3, alpha } => {
                vec![("D1", d1), ("D2", d2), ("D3", d3), ("alpha", alpha)]
            }
            CorollaryVariant::Two { d1, d2, gamma } => vec![("D1", d1), ("D2", d2), ("gamma", gamma)],
        };
        for (name, v) in vals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn lipschitz_bound(&self, n: u64) -> f64 {
        match *self {
            CorollaryVariant::One { d1, alpha, .. } => d1 * (n as f64).powf(alpha),
            CorollaryVariant::Two { d1, .. } => d1 * (n as f64).ln(),
        }
    }

    fn log_growth_bound(&self, n: u64) -> f64 {
        match *self {
            CorollaryVariant::One { d2, d3, alpha, .. } => d2.ln() + d3 * (n as f64).powf(alpha),
            CorollaryVariant::Two { d2, gamma, .. } => d2.ln() + gamma * (n as f64).ln(),
        }
    }
}

/// Both bullet hypotheses of a corollary on the grid of `i0`, for
/// `n_start ≤ n ≤ n_max`.
pub fn check_corollary_hypotheses(
    fam: WeightFamily,
    i0: [f64; 2],
    grid: usize,
    variant: &CorollaryVariant,
    n_start: u64,
    n_max: u64,
    tol: f64,
) -> Result<CriterionReport> {
    fam.validate()?;
    variant.validate()?;
    check_interval(fam, i0[0], i0[1])?;
    if grid < 2 {
        return Err(Error::InvalidParams("I0 grid needs at least 2 points".into()));
    }
    if n_start == 0 || n_start > n_max {
        return Err(Error::InvalidParams(format!(
            "need 1 <= N <= n_max, got N = {n_start}, n_max = {n_max}"
        )));
    }
    let pts = uniform_grid(i0[0], i0[1], grid);
    let tables = hat_tables(fam, &pts, n_max)?;
    let mut lip = Worst::empty();
    let mut growth = Worst::empty();
    for n in n_start..=n_max {
        let vals: Vec<f64> = tables.iter().map(|t| t[n as usize]).collect();
        let r = max_secant(&pts, &vals)? / variant.lipschitz_bound(n);
        lip.offer(r, || WitnessPoint {
            n: Some(n),
            ..Default::default()
        });
        let (inf, ga) = vals
            .iter()
            .enumerate()
            .fold((f64::INFINITY, 0), |acc, (g, &v)| if v < acc.0 { (v, g) } else { acc });
        growth.offer(ratio_from_log(variant.log_growth_bound(n) - inf), || WitnessPoint {
            n: Some(n),
            lambda: Some(vec![pts[ga]]),
            ..Default::default()
        });
    }
    let evals = lip.evals * pts.len() as u64;
    let conditions = vec![
        Condition::new("lipschitz", lip.value, 1.0 + tol, Relation::Le)
            .evals(evals)
            .at(lip.at),
        Condition::new("growth", growth.value, 1.0 + tol, Relation::Le)
            .evals(evals)
            .at(growth.at),
    ];
    let notes = vec!["values are ratios of the measured quantity to the corollary bound".into()];
    Ok(CriterionReport::new("corollary", conditions, notes))
}

fn default_hyp_n_max() -> u64 {
    10_000
}

/// Data of the characterization's condition (c).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaracParams {
    pub m: u32,
    pub tau: f64,
    #[serde(rename = "N")]
    pub big_n: u64,
    pub eps: f64,
    pub k: ParamBox,
    pub f: LipschitzProfile,
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    #[serde(default)]
    pub norm: SpaceNorm,
    /// Also check the standing hypotheses on `F`, `c`, `C`.
    #[serde(default = "default_true")]
    pub check_hypotheses: bool,
    #[serde(default = "default_grid")]
    pub hyp_grid: usize,
    /// Hypotheses are checked for `n ≤ min(hyp_n_max, max n_k)`.
    #[serde(default = "default_hyp_n_max")]
    pub hyp_n_max: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl CaracParams {
    pub fn validate(&self) -> Result<()> {
        self.k.validate()?;
        self.f.validate()?;
        self.norm.validate()?;
        if self.m == 0 || self.big_n == 0 {
            return Err(Error::InvalidParams("m and N must be >= 1".into()));
        }
        for (name, v) in [("tau", self.tau), ("eps", self.eps), ("c", self.c), ("C", self.big_c)] {
            if !(v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.c > self.big_c {
            return Err(Error::InvalidParams(format!(
                "need c <= C, got c = {}, C = {}",
                self.c, self.big_c
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub n: u64,
    pub lambda: Vec<f64>,
}

/// Conditions (0), (i)–(iii) of the characterization for a given schedule
/// `(n_k, λ_k)`, plus the standing hypotheses on the grid of `I0`, the hull
/// of the axes of `K`.
pub fn check_carac_conditions(
    fams: &[WeightFamily],
    schedule: &[ScheduleEntry],
    p: &CaracParams,
) -> Result<CriterionReport> {
    p.validate()?;
    let d = p.k.dim();
    if fams.len() != d {
        return Err(Error::InvalidParams(format!(
            "{} families for a {d}-dimensional K",
            fams.len()
        )));
    }
    if schedule.is_empty() {
        return Err(Error::InvalidParams("schedule needs q >= 1 entries".into()));
    }
    for f in fams {
        f.validate()?;
    }
    for (k, e) in schedule.iter().enumerate() {
        if e.lambda.len() != d {
            return Err(Error::InvalidParams(format!("schedule entry {k}: dimension mismatch")));
        }
        for t in 0..d {
            check_admissible(fams[t], e.lambda[t])?;
        }
        if e.n == 0 {
            return Err(Error::InvalidParams(format!("schedule entry {k}: n must be >= 1")));
        }
    }
    let q = schedule.len();
    let big_n = p.big_n;
    let mut conditions = Vec::new();

    // (0): N ≤ n_1 and n_{k+1} − n_k ≥ N
    let mut gap = schedule[0].n as f64;
    let mut gap_at = 0;
    for k in 1..q {
        let g = schedule[k].n as f64 - schedule[k - 1].n as f64;
        if g < gap {
            gap = g;
            gap_at = k;
        }
    }
    conditions.push(
        Condition::new("0", gap, big_n as f64, Relation::Ge)
            .evals(q as u64)
            .at(WitnessPoint {
                k: Some(gap_at as u64),
                ..Default::default()
            }),
    );

    // (i)
    let boxes: Vec<ParamBox> = schedule
        .iter()
        .map(|e| {
            let side = p.tau / p.f.eval(e.n);
            ParamBox::new(e.lambda.iter().map(|&x| [x - side, x]).collect())
        })
        .collect();
    let valid = boxes.iter().all(|b| b.validate().is_ok());
    let uncovered = if valid {
        uncovered_cells(&p.k, &boxes.iter().collect::<Vec<_>>()) as f64
    } else {
        f64::INFINITY
    };
    conditions.push(Condition::new("i", uncovered, 0.0, Relation::Le).evals(1));

    let max_n = schedule.iter().map(|e| e.n).max().unwrap_or(0);
    let cache = WindowCache::new();
    let windows = |t: usize, lam: f64| cache.get(fams[t], lam, max_n + big_n);
    let mf = p.m as f64;

    // (ii)
    let mut w2 = Worst::empty();
    for t in 0..d {
        let mut pairs = Vec::with_capacity(q);
        for e in schedule {
            let lw = windows(t, e.lambda[t])?;
            pairs.push((e.n, (-lw.log_hat(e.n) / mf).exp()));
        }
        let val = SeqVec::from_pairs(pairs).norm(p.norm);
        w2.offer(val, || WitnessPoint {
            axis: Some(t),
            ..Default::default()
        });
    }
    conditions.push(
        Condition::new("ii", w2.value, p.eps, Relation::Lt)
            .evals(w2.evals * q as u64)
            .at(w2.at),
    );

    // (iii)
    let tables: Vec<Vec<LogWindows>> = (0..d)
        .map(|t| schedule.iter().map(|e| windows(t, e.lambda[t])).collect())
        .collect::<Result<_>>()?;
    let per_k: Vec<Worst> = (0..q)
        .into_par_iter()
        .map(|k| {
            let mut w = Worst::empty();
            let nk = schedule[k].n;
            for t in 0..d {
                for l in 0..=big_n {
                    let mut pairs = Vec::new();
                    for j in (k + 1)..q {
                        let nj = schedule[j].n;
                        if nj < nk {
                            continue;
                        }
                        let num = tables[t][k].window(nj - nk + l, nk);
                        let den = tables[t][j].window(l, nj);
                        pairs.push((nj - nk, (num - den).exp()));
                    }
                    let val = SeqVec::from_pairs(pairs).norm(p.norm);
                    w.offer(val, || WitnessPoint {
                        k: Some(k as u64),
                        axis: Some(t),
                        l: Some(l),
                        ..Default::default()
                    });
                }
            }
            w
        })
        .collect();
    let w3 = per_k.into_iter().fold(Worst::empty(), Worst::merge);
    conditions.push(
        Condition::new("iii", w3.value, p.eps, Relation::Lt)
            .evals(w3.evals)
            .at(w3.at),
    );

    let mut notes = Vec::new();
    if p.check_hypotheses {
        let lo = p.k.axes.iter().map(|a| a[0]).fold(f64::INFINITY, f64::min);
        let hi = p.k.axes.iter().map(|a| a[1]).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            conditions.extend(carac_hypotheses(fams, [lo, hi], p, max_n.min(p.hyp_n_max).max(1))?);
        } else {
            notes.push("hypotheses skipped: K is a single point per axis".into());
        }
    }
    Ok(CriterionReport::new("carac", conditions, notes))
}

fn carac_hypotheses(fams: &[WeightFamily], i0: [f64; 2], p: &CaracParams, n_max: u64) -> Result<Vec<Condition>> {
    let pts = uniform_grid(i0[0], i0[1], p.hyp_grid.max(2));
    let mut lower = Worst::empty();
    let mut upper = Worst::empty();
    let mut ratio = Worst::empty();
    let mut distinct: Vec<WeightFamily> = Vec::new();
    for f in fams {
        if !distinct.contains(f) {
            distinct.push(*f);
        }
    }
    for fam in distinct {
        for &a in &pts {
            check_admissible(fam, a)?;
        }
        let tables = hat_tables(fam, &pts, n_max)?;
        for n in 1..=n_max {
            let fv = p.f.eval(n);
            let vals: Vec<f64> = tables.iter().map(|t| t[n as usize]).collect();
            let mut smin = f64::INFINITY;
            let mut smax: f64 = 0.0;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    let s = ((vals[i] - vals[j]) / (pts[i] - pts[j])).abs();
                    smin = smin.min(s);
                    smax = smax.max(s);
                }
            }
            // lower ≥ c F(n) ⇔ c F(n) − smin ≤ 0; upper smax ≤ C F(n)
            lower.offer(p.c * fv - smin, || WitnessPoint {
                n: Some(n),
                ..Default::default()
            });
            upper.offer(smax - p.big_c * fv, || WitnessPoint {
                n: Some(n),
                ..Default::default()
            });
            let logs: Vec<f64> = tables.iter().map(|t| t[n as usize] - t[n as usize - 1]).collect();
            let spread = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - logs.iter().cloned().fold(f64::INFINITY, f64::min);
            // min_{a,b} w_n(a)/w_n(b) = exp(−spread) ≥ c
            ratio.offer(p.c.ln() + spread, || WitnessPoint {
                n: Some(n),
                ..Default::default()
            });
        }
    }
    let slack = p.tol * p.big_c.max(1.0);
    Ok(vec![
        Condition::new("hyp.lipschitz_lower", lower.value, slack, Relation::Le)
            .evals(lower.evals)
            .at(lower.at),
        Condition::new("hyp.lipschitz_upper", upper.value, slack, Relation::Le)
            .evals(upper.evals)
            .at(upper.at),
        Condition::new("hyp.weight_ratio", ratio.value, p.tol, Relation::Le)
            .evals(ratio.evals)
            .at(ratio.at),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::Cell;

    fn single_cell(anchor: f64, n: u64) -> Covering {
        Covering::custom(vec![Cell {
            n,
            anchor: vec![anchor],
            bounds: ParamBox::new(vec![[anchor, anchor + 0.01]]),
        }])
    }

    #[test]
    fn basic_right_inverse_at_anchor() {
        let cov = single_cell(1.0, 20);
        let k = ParamBox::new(vec![[1.0, 1.01]]);
        let opts = BasicOptions {
            samples_per_axis: 0,
            ..Default::default()
        };
        let v = [SeqVec::from_pairs([(0, 1.0), (2, 0.5)])];
        let rep = check_basic_criterion(&[WeightFamily::PurePower], &cov, &k, &v, 1, 1, 0.1, &opts).unwrap();
        let iv = rep.condition("IV").unwrap();
        assert!(iv.value.abs() < 1e-12, "{iv:?}");
        assert_eq!(rep.condition("III").unwrap().evaluations, 0);
        assert_eq!(rep.condition("II.b").unwrap().value, 0.0);
    }

    #[test]
    fn basic_rejects_convolution_and_zero_eps_fails() {
        let cov = single_cell(1.0, 20);
        let k = ParamBox::new(vec![[1.0, 1.01]]);
        let v = [SeqVec::basis(0)];
        let opts = BasicOptions {
            kind: ProductKind::Convolution,
            ..Default::default()
        };
        assert!(matches!(
            check_basic_criterion(&[WeightFamily::PurePower], &cov, &k, &v, 1, 1, 0.1, &opts),
            Err(Error::ProductKind(_))
        ));
        let rep =
            check_basic_criterion(&[WeightFamily::PurePower], &cov, &k, &v, 1, 2, 0.0, &Default::default()).unwrap();
        assert!(!rep.pass);
        assert!(rep.condition("II.a").unwrap().value > 0.0);
    }

    #[test]
    fn samples_cover_corners() {
        let b = ParamBox::new(vec![[0.0, 1.0], [2.0, 3.0]]);
        let s = cell_samples(&b, &[0.0, 2.0], 3, false);
        assert_eq!(s.len(), 9);
        assert!(s.contains(&vec![1.0, 3.0]));
        assert_eq!(cell_samples(&b, &[0.0, 2.0], 1, false), vec![vec![0.5, 2.5]]);
        assert_eq!(cell_samples(&b, &[0.0, 2.0], 0, true), vec![vec![0.0, 2.0]]);
    }

    #[test]
    fn sliding_window_max() {
        let g = |x: u64| ((x as f64) * 0.7).sin();
        let got = sliding_max(g, 3, 10, 2..=20);
        for (i, k) in (2..=20u64).enumerate() {
            let direct = (3 + k..=10 + k).map(g).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(got[i].0, direct);
        }
    }

    #[test]
    fn corollary_geometric_fails_lipschitz() {
        let v = CorollaryVariant::Two {
            d1: 2.0,
            d2: 1.0,
            gamma: 1.0,
        };
        let rep =
            check_corollary_hypotheses(WeightFamily::Geometric, [2.0, 3.0], 5, &v, 2, 10_000, DEFAULT_TOL).unwrap();
        assert!(!rep.condition("lipschitz").unwrap().pass);
        assert!(rep.condition("growth").unwrap().pass);
        assert!(check_corollary_hypotheses(WeightFamily::Geometric, [0.5, 3.0], 5, &v, 2, 100, DEFAULT_TOL).is_err());
    }

    #[test]
    fn corollary_pure_power_variant_two() {
        let v = CorollaryVariant::Two {
            d1: 1.0,
            d2: 1.0,
            gamma: 1.0,
        };
        let rep = check_corollary_hypotheses(WeightFamily::PurePower, [1.0, 2.0], 5, &v, 2, 5000, DEFAULT_TOL).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn corollary_variant_json() {
        let v: CorollaryVariant = serde_json::from_str(r#"{"variant":"2","d1":1,"d2":1,"gamma":1}"#).unwrap();
        assert_eq!(
            v,
            CorollaryVariant::Two {
                d1: 1.0,
                d2: 1.0,
                gamma: 1.0
            }
        );
    }
}
