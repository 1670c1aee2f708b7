//! Coverings of parameter boxes by cells `(n_j, λ_j, Λ_j)`.
//!
//! Two constructions live here: the graded covering (properties (a)–(e)
//! with an independent verifier) and the uniform log-covering whose powers
//! are `N_j = (m−1)σ + σ^{(m−1)/m}(j+1)^r`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned closed box, serialized as `[[lo, hi], ...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamBox {
    pub axes: Vec<[f64; 2]>,
}

impl ParamBox {
    pub fn new(axes: Vec<[f64; 2]>) -> Self {
        Self { axes }
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(lo: f64, hi: f64, d: usize) -> Self {
        Self::new(vec![[lo, hi]; d])
    }

    pub fn point(x: &[f64]) -> Self {
        Self::new(x.iter().map(|&v| [v, v]).collect())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn lo(&self, t: usize) -> f64 {
        self.axes[t][0]
    }

    pub fn hi(&self, t: usize) -> f64 {
        self.axes[t][1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidParams("box must have at least one axis".into()));
        }
        for (t, &[lo, hi]) in self.axes.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParams(format!(
                    "box axis {t} must satisfy finite lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.axes.iter().zip(x).all(|(&[lo, hi], &v)| lo <= v && v <= hi)
    }

    /// Largest side length, i.e. the ∞-norm diameter.
    pub fn diam_inf(&self) -> f64 {
        self.axes.iter().map(|&[lo, hi]| hi - lo).fold(0.0, f64::max)
    }

    pub fn center(&self) -> Vec<f64> {
        self.axes.iter().map(|&[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[0]).collect()
    }
}

/// `sup { ‖λ − μ‖_∞ : λ ∈ a, μ ∈ b }`, attained at corners.
pub fn box_max_dist_inf(a: &ParamBox, b: &ParamBox) -> f64 {
    a.axes
        .iter()
        .zip(&b.axes)
        .map(|(&[alo, ahi], &[blo, bhi])| (ahi - blo).abs().max((bhi - alo).abs()))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub n: u64,
    pub anchor: Vec<f64>,
    #[serde(rename = "box")]
    pub bounds: ParamBox,
}

fn default_c() -> f64 {
    0.1
}

fn default_max_cells() -> u64 {
    1 << 14
}

/// Parameters of the graded covering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradedParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "D")]
    pub big_d: f64,
    pub tau: f64,
    pub eta: f64,
    #[serde(rename = "N")]
    pub big_n: u64,
    #[serde(default = "default_c")]
    pub c: f64,
    /// Constructor budget on the number of cells.
    #[serde(default = "default_max_cells")]
    pub max_cells: u64,
}

impl GradedParams {
    pub fn new(alpha: f64, beta: f64, big_d: f64, tau: f64, eta: f64, big_n: u64) -> Self {
        Self {
            alpha,
            beta,
            big_d,
            tau,
            eta,
            big_n,
            c: default_c(),
            max_cells: default_max_cells(),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let df = d as f64;
        if !(self.alpha > 0.0 && self.alpha * df < 1.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in (0, 1/d) with d = {d}, got {}",
                self.alpha
            )));
        }
        if !(self.beta > self.alpha * df) {
            return Err(Error::InvalidParams(format!(
                "beta must exceed alpha*d = {}, got beta = {}",
                self.alpha * df,
                self.beta
            )));
        }
        for (name, v) in [("D", self.big_d), ("tau", self.tau), ("eta", self.eta), ("c", self.c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.big_n == 0 {
            return Err(Error::InvalidParams("N must be a positive integer".into()));
        }
        Ok(())
    }
}

/// Parameters of the uniform log-covering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogCoveringParams {
    /// The box `K' = [a', b'] × [a'', b''] × …`.
    pub k: ParamBox,
    pub m: u32,
    pub r: u32,
    /// `σ = base^m`.
    pub base: u64,
}

impl LogCoveringParams {
    pub fn validate(&self) -> Result<()> {
        self.k.validate()?;
        if self.m < 2 {
            return Err(Error::InvalidParams(format!("m must be >= 2, got {}", self.m)));
        }
        if self.base < 2 {
            return Err(Error::InvalidParams(format!("base must be >= 2, got {}", self.base)));
        }
        if self.r == 0 {
            return Err(Error::InvalidParams("r must be a positive integer".into()));
        }
        let mut min_a = f64::INFINITY;
        for (t, &[a, b]) in self.k.axes.iter().enumerate() {
            if !(a > 0.0) {
                return Err(Error::InvalidParams(format!("axis {t}: need a > 0, got {a}")));
            }
            if !(b < 2.0 * a) {
                return Err(Error::InvalidParams(format!("axis {t}: need b < 2a, got [{a}, {b}]")));
            }
            min_a = min_a.min(a);
        }
        let r = self.r as f64;
        let ok = if min_a > 1.0 { true } else { r > 1.0 && r > 1.0 / min_a };
        if !ok {
            return Err(Error::InvalidParams(format!(
                "r = {} must exceed max(1/a, 1) = {} when min a <= 1",
                self.r,
                (1.0 / min_a).max(1.0)
            )));
        }
        self.sigma()?;
        Ok(())
    }

    pub fn sigma(&self) -> Result<u64> {
        self.base
            .checked_pow(self.m)
            .ok_or_else(|| Error::IndexOverflow(format!("sigma = {}^{}", self.base, self.m)))
    }

    /// `σ^{(m−1)/m} = base^{m−1}`.
    pub fn sigma_root(&self) -> Result<u64> {
        self.base
            .checked_pow(self.m - 1)
            .ok_or_else(|| Error::IndexOverflow(format!("{}^{}", self.base, self.m - 1)))
    }

    /// `N_j` for a 1-based cell index `j`.
    pub fn power(&self, j: u64) -> Result<u64> {
        let sigma = self.sigma()?;
        let overflow = || Error::IndexOverflow(format!("N_{j}"));
        let head = (self.m as u64 - 1).checked_mul(sigma).ok_or_else(overflow)?;
        let tail = (j + 1)
            .checked_pow(self.r)
            .and_then(|t| t.checked_mul(self.sigma_root().ok()?))
            .ok_or_else(overflow)?;
        head.checked_add(tail).ok_or_else(overflow)
    }
}

/// `⌊(ln σ)^3 + 1⌋`.
pub fn log_cube_floor(sigma: u64) -> u64 {
    let l = (sigma as f64).ln();
    (l * l * l + 1.0).floor() as u64
}

/// Largest perfect square `≤ t`.
pub fn largest_square_at_most(t: u64) -> u64 {
    let s = t.isqrt();
    s * s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoveringParams {
    Graded { k: ParamBox, params: GradedParams },
    Log { params: LogCoveringParams },
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Covering {
    pub params: CoveringParams,
    pub cells: Vec<Cell>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Covering {
    /// A covering given directly by its cells.
    pub fn custom(cells: Vec<Cell>) -> Self {
        Self {
            params: CoveringParams::Custom,
            cells,
            notes: Vec::new(),
        }
    }

    pub fn q(&self) -> usize {
        self.cells.len()
    }

    pub fn dim(&self) -> usize {
        self.cells.first().map_or(0, |c| c.anchor.len())
    }

    /// Structural checks shared by every consumer: at least one cell,
    /// consistent dimensions, valid boxes.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.cells.is_empty() || d == 0 {
            return Err(Error::InvalidParams("covering needs q >= 1 cells".into()));
        }
        for (j, cell) in self.cells.iter().enumerate() {
            if cell.anchor.len() != d || cell.bounds.dim() != d {
                return Err(Error::InvalidParams(format!("cell {j}: dimension mismatch")));
            }
            if !cell.anchor.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidParams(format!("cell {j}: anchor not finite")));
            }
            cell.bounds.validate()?;
        }
        Ok(())
    }

    /// First cell whose box contains `x`.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.cells.iter().position(|c| c.bounds.contains(x))
    }

    pub fn boxes(&self) -> Vec<&ParamBox> {
        self.cells.iter().map(|c| &c.bounds).collect()
    }
}

/// Uniform grid of `[a, b]^d` by `q` congruent cubes, `a` and `b` being the
/// extreme bounds of `K'` over all axes.
pub fn build_log_covering(p: &LogCoveringParams) -> Result<Covering> {
    p.validate()?;
    let t = log_cube_floor(p.sigma()?);
    let q = largest_square_at_most(t);
    if q < 1 {
        return Err(Error::InvalidParams("sigma too small: q < 1".into()));
    }
    let mut cov = build_log_covering_with_q(p, q)?;
    if q != t {
        cov.notes.push(format!(
            "q = {q} is the largest perfect square not exceeding floor((ln sigma)^3 + 1) = {t}"
        ));
    }
    Ok(cov)
}

/// Log-covering with a caller-chosen number of cells `q` (a perfect
/// square when `d = 2`, a perfect `d`-th power in general).
pub fn build_log_covering_with_q(p: &LogCoveringParams, q: u64) -> Result<Covering> {
    p.validate()?;
    let d = p.k.dim();
    let side = integer_root(q, d as u32)
        .ok_or_else(|| Error::InvalidParams(format!("q = {q} is not a perfect power of order d = {d}")))?;
    let a = p.k.axes.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
    let b = p.k.axes.iter().map(|x| x[1]).fold(f64::NEG_INFINITY, f64::max);
    let edges: Vec<[f64; 2]> = (0..side)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / side as f64;
            let hi = if i + 1 == side {
                b
            } else {
                a + (b - a) * (i + 1) as f64 / side as f64
            };
            [lo, hi]
        })
        .collect();
    let mut cells = Vec::with_capacity(q as usize);
    let mut idx = vec![0u64; d];
    for j in 1..=q {
        let bounds = ParamBox::new(idx.iter().map(|&i| edges[i as usize]).collect());
        cells.push(Cell {
            n: p.power(j)?,
            anchor: bounds.center(),
            bounds,
        });
        // row-major: last axis varies fastest
        for t in (0..d).rev() {
            idx[t] += 1;
            if idx[t] < side {
                break;
            }
            idx[t] = 0;
        }
    }
    Ok(Covering {
        params: CoveringParams::Log { params: p.clone() },
        cells,
        notes: Vec::new(),
    })
}

fn integer_root(q: u64, d: u32) -> Option<u64> {
    if q == 0 || d == 0 {
        return None;
    }
    let guess = (q as f64).powf(1.0 / d as f64).round() as u64;
    (guess.saturating_sub(1)..=guess + 1).find(|&s| s.checked_pow(d) == Some(q))
}

/// Hilbert-curve key of a grid point with `bits` bits per axis.
///
/// Transpose form of Skilling's algorithm; keys of consecutive cells are
/// face-adjacent, which keeps the spatial distance between cells `j` and
/// `l` of order `|l − j|^{1/d}` grid steps.
pub fn hilbert_key(coords: &[u32], bits: u32) -> u128 {
    let n = coords.len();
    if bits == 0 || n == 0 {
        return 0;
    }
    assert!(n as u32 * bits <= 128, "hilbert key exceeds 128 bits");
    let mut x = coords.to_vec();
    let m = 1u32 << (bits - 1);
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..n {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }
    for i in 1..n {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    q = m;
    while q > 1 {
        if x[n - 1] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for v in x.iter_mut() {
        *v ^= t;
    }
    let mut key = 0u128;
    for b in (0..bits).rev() {
        for v in &x {
            key = (key << 1) | ((v >> b) & 1) as u128;
        }
    }
    key
}

/// `Σ_{j=1}^{len} j^{-β}` for every `len ≤ q` (index 0 is the empty sum).
fn power_harmonics(q: u64, beta: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(q as usize + 1);
    h.push(0.0);
    let mut acc = crate::weights::Compensated::default();
    for j in 1..=q {
        acc.add((j as f64).powf(-beta));
        h.push(acc.value());
    }
    h
}

/// Deterministic search for a graded covering of `k`.
///
/// `K` is cut into `g^d` congruent boxes (`g = 1, 2, 4, …`) ordered along a
/// Hilbert curve, with anchors at lower corners and powers `n_j = (j+1)Δ`.
/// `Δ` is the least `N·2^t` meeting (d) and (e). The first `g` whose
/// covering passes [`verify_graded`] wins.
pub fn build_graded_covering(k: &ParamBox, p: &GradedParams) -> Result<Covering> {
    k.validate()?;
    let d = k.dim();
    p.validate(d)?;
    let diam = k.diam_inf();
    let limit = p.c * p.big_d;
    if diam > limit {
        return Err(Error::DiameterTooLarge { diam, limit });
    }
    if d as u32 > 64 {
        return Err(Error::InvalidParams("dimension too large".into()));
    }
    let mut attempts = Vec::new();
    for bits in 0u32.. {
        let g = 1u64 << bits;
        let q = match g.checked_pow(d as u32) {
            Some(q) if q <= p.max_cells && d as u32 * bits <= 128 => q,
            _ => break,
        };
        let h = power_harmonics(q, p.beta);
        let need_d = h[q as usize];
        let need_e = (0..q as usize)
            .map(|j| h[j] + h[q as usize - 1 - j])
            .fold(0.0, f64::max);
        let target = need_d.max(need_e) / p.eta * (1.0 + 1e-12);
        let mut delta = p.big_n;
        while (delta as f64).powf(p.beta) < target {
            delta = match delta.checked_mul(2) {
                Some(x) => x,
                None => return Err(Error::IndexOverflow("graded schedule spacing".into())),
            };
        }
        let n_top = match delta.checked_mul(q) {
            Some(x) => x,
            None => break,
        };
        let side = diam / g as f64;
        if side > p.tau / (n_top as f64).powf(p.alpha) {
            attempts.push(format!("g={g}: box side {side:.3e} exceeds tau/n^alpha"));
            continue;
        }
        let cov = graded_grid(k, p, bits, delta);
        let report = verify_graded(&cov, k, p);
        if report.pass {
            return Ok(cov);
        }
        attempts.push(format!("g={g}: verifier rejected ({})", report.failed().join(",")));
    }
    Err(Error::SearchBudget(format!(
        "no covering within {} cells; tried {}",
        p.max_cells,
        attempts.join("; ")
    )))
}

fn graded_grid(k: &ParamBox, p: &GradedParams, bits: u32, delta: u64) -> Covering {
    let d = k.dim();
    let g = 1u64 << bits;
    let q = g.pow(d as u32);
    let edges: Vec<Vec<[f64; 2]>> = (0..d)
        .map(|t| {
            let (lo, hi) = (k.lo(t), k.hi(t));
            (0..g)
                .map(|i| {
                    let a = lo + (hi - lo) * i as f64 / g as f64;
                    let b = if i + 1 == g {
                        hi
                    } else {
                        lo + (hi - lo) * (i + 1) as f64 / g as f64
                    };
                    [a, b]
                })
                .collect()
        })
        .collect();
    let mut coords: Vec<Vec<u32>> = (0..q)
        .map(|mut flat| {
            let mut c = vec![0u32; d];
            for t in (0..d).rev() {
                c[t] = (flat % g) as u32;
                flat /= g;
            }
            c
        })
        .collect();
    if d > 1 {
        coords.sort_by_cached_key(|c| hilbert_key(c, bits));
    }
    let cells = coords
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let bounds = ParamBox::new(c.iter().enumerate().map(|(t, &i)| edges[t][i as usize]).collect());
            Cell {
                n: (j as u64 + 1) * delta,
                anchor: bounds.lower(),
                bounds,
            }
        })
        .collect();
    Covering {
        params: CoveringParams::Graded {
            k: k.clone(),
            params: p.clone(),
        },
        cells,
        notes: Vec::new(),
    }
}

/// One verified property: `margin` is the signed slack, `pass ⇔ margin ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<usize>>,
}

impl PropertyCheck {
    /// Property of the form `value ≤ bound`.
    fn at_most(value: f64, bound: f64, at: Option<Vec<usize>>) -> Self {
        let margin = bound - value;
        Self {
            pass: margin >= 0.0,
            value,
            bound,
            margin,
            at,
        }
    }

    /// Property of the form `value ≥ bound`.
    fn at_least(value: f64, bound: f64, at: Option<Vec<usize>>) -> Self {
        let margin = value - bound;
        Self {
            pass: margin >= 0.0,
            value,
            bound,
            margin,
            at,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradedReport {
    pub pass: bool,
    pub q: usize,
    pub a: PropertyCheck,
    pub b: PropertyCheck,
    pub c: PropertyCheck,
    pub d: PropertyCheck,
    pub e: PropertyCheck,
    pub union: PropertyCheck,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl GradedReport {
    pub fn failed(&self) -> Vec<&'static str> {
        [
            ("a", &self.a),
            ("b", &self.b),
            ("c", &self.c),
            ("d", &self.d),
            ("e", &self.e),
            ("union", &self.union),
        ]
        .into_iter()
        .filter(|(_, p)| !p.pass)
        .map(|(n, _)| n)
        .collect()
    }
}

/// Independent check of properties (a)–(e) and of `∪ Λ_j ⊇ K`.
pub fn verify_graded(cov: &Covering, k: &ParamBox, p: &GradedParams) -> GradedReport {
    let mut notes = Vec::new();
    if let Err(e) = cov.validate().and_then(|_| k.validate()) {
        notes.push(e.to_string());
        let fail = PropertyCheck::at_most(f64::INFINITY, 0.0, None);
        return GradedReport {
            pass: false,
            q: cov.q(),
            a: fail.clone(),
            b: fail.clone(),
            c: fail.clone(),
            d: fail.clone(),
            e: fail.clone(),
            union: fail,
            notes,
        };
    }
    if let Err(e) = p.validate(k.dim()) {
        notes.push(e.to_string());
    }
    let cells = &cov.cells;
    let q = cells.len();
    let nf: Vec<f64> = cells.iter().map(|c| c.n as f64).collect();

    // (a)
    let mut a_val = cells[0].n as f64;
    let mut a_at = vec![0];
    for j in 1..q {
        let gap = cells[j].n as f64 - cells[j - 1].n as f64;
        if gap < a_val {
            a_val = gap;
            a_at = vec![j - 1, j];
        }
    }
    let a = PropertyCheck::at_least(a_val, p.big_n as f64, Some(a_at));

    // (b): box ⊆ Π [anchor, anchor + τ/n^α]
    let mut b_val = f64::NEG_INFINITY;
    let mut b_at = 0;
    for (j, cell) in cells.iter().enumerate() {
        let side = p.tau / nf[j].powf(p.alpha);
        for (t, &[lo, hi]) in cell.bounds.axes.iter().enumerate() {
            let x = cell.anchor[t];
            let excess = (x - lo).max(hi - (x + side));
            if excess > b_val {
                b_val = excess;
                b_at = j;
            }
        }
    }
    let b = PropertyCheck::at_most(b_val, 0.0, Some(vec![b_at]));

    // (c): worst slack over pairs j < l
    let worst = (0..q)
        .into_par_iter()
        .filter_map(|j| {
            ((j + 1)..q)
                .map(|l| {
                    let lhs = box_max_dist_inf(&cells[j].bounds, &cells[l].bounds);
                    let rhs = p.big_d * ((nf[l] - nf[j]) / nf[l]).powf(p.alpha);
                    (rhs - lhs, j, l, lhs, rhs)
                })
                .min_by(|x, y| x.0.total_cmp(&y.0))
        })
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let c = match worst {
        Some((_, j, l, lhs, rhs)) => PropertyCheck::at_most(lhs, rhs, Some(vec![j, l])),
        None => PropertyCheck::at_most(0.0, 0.0, None),
    };

    // (d)
    let mut acc = crate::weights::Compensated::default();
    for &n in &nf {
        acc.add(n.powf(-p.beta));
    }
    let d = PropertyCheck::at_most(acc.value(), p.eta, None);

    // (e)
    let e_worst = (0..q)
        .into_par_iter()
        .map(|j| {
            let mut acc = crate::weights::Compensated::default();
            for l in 0..q {
                if l != j {
                    acc.add((nf[l] - nf[j]).abs().powf(-p.beta));
                }
            }
            (acc.value(), j)
        })
        .max_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
    let e = match e_worst {
        Some((v, j)) if q > 1 => PropertyCheck::at_most(v, p.eta, Some(vec![j])),
        _ => PropertyCheck::at_most(0.0, p.eta, None),
    };

    let union = union_check(k, &cov.boxes());
    let pass = notes.is_empty() && a.pass && b.pass && c.pass && d.pass && e.pass && union.pass;
    GradedReport {
        pass,
        q,
        a,
        b,
        c,
        d,
        e,
        union,
        notes,
    }
}

/// `K ⊆ ∪ boxes`, reported as a count of uncovered elementary cells.
pub fn union_check(k: &ParamBox, boxes: &[&ParamBox]) -> PropertyCheck {
    let uncovered = uncovered_cells(k, boxes);
    PropertyCheck::at_most(uncovered as f64, 0.0, None)
}

/// Number of elementary cells of `K` (cut along every box edge) whose
/// midpoint lies in no box. Zero exactly when the closed boxes cover `K`.
pub fn uncovered_cells(k: &ParamBox, boxes: &[&ParamBox]) -> u64 {
    let live: Vec<&ParamBox> = boxes.iter().copied().filter(|b| b.dim() == k.dim()).collect();
    sweep(k, &live, 0)
}

fn sweep(k: &ParamBox, boxes: &[&ParamBox], axis: usize) -> u64 {
    if axis == k.dim() {
        return u64::from(boxes.is_empty());
    }
    let (lo, hi) = (k.lo(axis), k.hi(axis));
    let mut cuts = vec![lo, hi];
    for b in boxes {
        for v in [b.lo(axis), b.hi(axis)] {
            if v > lo && v < hi {
                cuts.push(v);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mids: Vec<f64> = if cuts.len() == 1 {
        vec![lo]
    } else {
        cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    };
    let mut missing = 0;
    for x in mids {
        let sub: Vec<&ParamBox> = boxes
            .iter()
            .copied()
            .filter(|b| b.lo(axis) <= x && x <= b.hi(axis))
            .collect();
        missing += if sub.is_empty() {
            // every cell below this slab is uncovered; one count suffices
            1
        } else {
            sweep(k, &sub, axis + 1)
        };
    }
    missing
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_params(base: u64, r: u32) -> LogCoveringParams {
        LogCoveringParams {
            k: ParamBox::cube(1.2, 1.3, 2),
            m: 2,
            r,
            base,
        }
    }

    #[test]
    fn log_covering_small() {
        let cov = build_log_covering(&log_params(4, 1)).unwrap();
        assert_eq!(log_cube_floor(16), 22);
        assert_eq!(cov.q(), 16);
        assert_eq!(cov.cells[0].n, 24);
        assert_eq!(cov.cells[15].n, 84);
        assert_eq!(cov.notes.len(), 1);
        for w in cov.cells.windows(2) {
            assert!(w[1].n > w[0].n);
        }
        for cell in &cov.cells {
            assert_eq!(cell.anchor, cell.bounds.center());
        }
        assert_eq!(uncovered_cells(&ParamBox::cube(1.2, 1.3, 2), &cov.boxes()), 0);
        // row-major: second cell moves along the last axis
        assert_eq!(cov.cells[0].bounds.axes[0], cov.cells[1].bounds.axes[0]);
        assert_eq!(cov.cells[3].bounds.hi(1), 1.3);
    }

    #[test]
    fn log_covering_large() {
        let mut p = log_params(100, 2);
        p.k = ParamBox::cube(0.8, 1.3, 2);
        let cov = build_log_covering(&p).unwrap();
        assert_eq!(log_cube_floor(10_000), 782);
        assert_eq!(cov.q(), 729);
        // 10^4 + 100 * (1+1)^2
        assert_eq!(cov.cells[0].n, 10_400);
        assert_eq!(cov.cells[1].n, 10_900);
    }

    #[test]
    fn log_covering_validation() {
        let mut p = log_params(4, 1);
        p.k = ParamBox::cube(1.0, 2.5, 2);
        assert!(build_log_covering(&p).is_err());
        let mut p = log_params(4, 1);
        p.k = ParamBox::cube(0.8, 1.2, 2);
        assert!(build_log_covering(&p).is_err());
        p.r = 2;
        assert!(build_log_covering(&p).is_ok());
        let mut p = log_params(4, 1);
        p.m = 1;
        assert!(build_log_covering(&p).is_err());
        assert!(build_log_covering_with_q(&log_params(100, 1), 5).is_err());
        let cov = build_log_covering_with_q(&log_params(100, 1), 4).unwrap();
        assert_eq!(
            cov.cells.iter().map(|c| c.n).collect::<Vec<_>>(),
            vec![10200, 10300, 10400, 10500]
        );
    }

    #[test]
    fn hilbert_cells_are_adjacent() {
        for d in 2..=3usize {
            for bits in 1..=4u32 {
                let g = 1u32 << bits;
                let mut pts: Vec<Vec<u32>> = (0..g.pow(d as u32))
                    .map(|mut f| {
                        let mut c = vec![0; d];
                        for t in 0..d {
                            c[t] = f % g;
                            f /= g;
                        }
                        c
                    })
                    .collect();
                pts.sort_by_cached_key(|c| hilbert_key(c, bits));
                let keys: Vec<u128> = pts.iter().map(|c| hilbert_key(c, bits)).collect();
                assert!(keys.windows(2).all(|w| w[1] == w[0] + 1));
                for w in pts.windows(2) {
                    let dist: u32 = w[0].iter().zip(&w[1]).map(|(a, b)| a.abs_diff(*b)).sum();
                    assert_eq!(dist, 1, "d={d} bits={bits}");
                }
            }
        }
    }

    #[test]
    fn graded_example() {
        let k = ParamBox::cube(1.0, 1.05, 2);
        let p = GradedParams::new(0.3, 0.7, 1.0, 1.0, 0.5, 10);
        let cov = build_graded_covering(&k, &p).unwrap();
        let rep = verify_graded(&cov, &k, &p);
        assert!(rep.pass, "{rep:?}");
        assert!(cov.cells.windows(2).all(|w| w[1].n > w[0].n));
    }

    #[test]
    fn graded_single_cell() {
        let k = ParamBox::cube(1.0, 1.01, 2);
        let p = GradedParams::new(0.3, 0.7, 1.0, 100.0, 0.5, 10);
        let cov = build_graded_covering(&k, &p).unwrap();
        assert_eq!(cov.q(), 1);
        assert!(verify_graded(&cov, &k, &p).pass);
    }

    #[test]
    fn graded_errors() {
        let k = ParamBox::cube(1.0, 1.5, 2);
        let p = GradedParams::new(0.3, 0.7, 1.0, 1.0, 0.5, 10);
        assert!(matches!(
            build_graded_covering(&k, &p),
            Err(Error::DiameterTooLarge { .. })
        ));
        let mut p = GradedParams::new(0.3, 0.7, 1.0, 1e-9, 0.5, 10);
        p.max_cells = 64;
        assert!(matches!(
            build_graded_covering(&ParamBox::cube(1.0, 1.05, 2), &p),
            Err(Error::SearchBudget(_))
        ));
        let bad = GradedParams::new(0.3, 0.5, 1.0, 1.0, 0.5, 10);
        assert!(matches!(
            build_graded_covering(&ParamBox::cube(1.0, 1.05, 2), &bad),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn graded_one_dimensional() {
        let k = ParamBox::new(vec![[2.0, 2.05]]);
        let p = GradedParams::new(0.6, 0.9, 1.0, 0.5, 0.3, 4);
        let cov = build_graded_covering(&k, &p).unwrap();
        assert!(verify_graded(&cov, &k, &p).pass);
    }

    #[test]
    fn hand_built_summability_margin() {
        let cells = (0..4)
            .map(|j| {
                let x = j as f64 * 0.01;
                Cell {
                    n: 100 << j,
                    anchor: vec![x],
                    bounds: ParamBox::new(vec![[x, x + 0.01]]),
                }
            })
            .collect();
        let cov = Covering::custom(cells);
        let k = ParamBox::new(vec![[0.0, 0.04]]);
        let mut p = GradedParams::new(0.3, 1.0, 10.0, 10.0, 0.01, 10);
        let rep = verify_graded(&cov, &k, &p);
        assert!(!rep.d.pass);
        assert!((rep.d.value - 0.01875).abs() < 1e-15);
        assert!((rep.d.margin + 0.00875).abs() < 1e-15);
        p.eta = 0.02;
        assert!(verify_graded(&cov, &k, &p).d.pass);
    }

    #[test]
    fn union_detects_gap() {
        let k = ParamBox::cube(0.0, 1.0, 2);
        let b1 = ParamBox::new(vec![[0.0, 0.5], [0.0, 1.0]]);
        let b2 = ParamBox::new(vec![[0.5, 1.0], [0.0, 0.6]]);
        let b3 = ParamBox::new(vec![[0.5, 1.0], [0.6, 1.0]]);
        assert_eq!(uncovered_cells(&k, &[&b1, &b2, &b3]), 0);
        assert!(uncovered_cells(&k, &[&b1, &b2]) > 0);
        let pt = ParamBox::point(&[0.3, 0.3]);
        assert_eq!(uncovered_cells(&pt, &[&b1]), 0);
        assert!(uncovered_cells(&pt, &[&b3]) > 0);
    }

    #[test]
    fn covering_json_shape() {
        let cov = build_log_covering(&log_params(4, 1)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&cov).unwrap();
        assert_eq!(v["params"]["kind"], "log");
        assert_eq!(v["cells"][0]["n"], 24);
        assert!(v["cells"][0]["box"][0].is_array());
        let back: Covering = serde_json::from_value(v).unwrap();
        assert_eq!(back, cov);
    }
}
