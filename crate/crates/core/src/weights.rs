//! Parametrized weight families and the weighted shifts they induce.
//!
//! Every cumulative product `w_{l+1}(λ)…w_{l+n}(λ)` is handled through its
//! logarithm, the *log window* `Σ_{i=l+1}^{l+n} log w_i(λ)`. Families with
//! a telescoping product use a closed form; the affine family falls back to
//! compensated summation, optionally through a cached prefix table.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqspace::SeqVec;

/// Weight sequence `λ ↦ (w_n(λ))_{n≥1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightFamily {
    /// `w_n(λ) = 1 + λ / n^{1-α}`, `α ∈ [0, 1)`.
    Affine { alpha: f64 },
    /// `w_1(λ)…w_n(λ) = n^λ`.
    PurePower,
    /// `w_1(λ)…w_n(λ) = exp(λ n^α)`, `α ∈ (0, 1]`.
    ExpAlpha { alpha: f64 },
    /// `w_n(λ) = (1 + 1/n)^λ`.
    PowerRatio,
    /// `w_n(λ) = λ`.
    Geometric,
}

/// Growth profile `F(n)` of the Lipschitz constant of `a ↦ log ŵ_n(a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LipschitzProfile {
    /// `F(n) = d1 · n^α`.
    Power { alpha: f64, d1: f64 },
    /// `F(n) = d1 · log n`.
    Log { d1: f64 },
}

impl LipschitzProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LipschitzProfile::Power { alpha, d1 } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::InvalidParams(format!(
                        "power profile needs alpha in (0,1], got {alpha}"
                    )));
                }
                if !(d1 > 0.0) {
                    return Err(Error::InvalidParams(format!("profile needs D1 > 0, got {d1}")));
                }
            }
            LipschitzProfile::Log { d1 } => {
                if !(d1 > 0.0) {
                    return Err(Error::InvalidParams(format!("profile needs D1 > 0, got {d1}")));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, n: u64) -> f64 {
        match *self {
            LipschitzProfile::Power { alpha, d1 } => d1 * (n as f64).powf(alpha),
            LipschitzProfile::Log { d1 } => d1 * (n as f64).ln(),
        }
    }
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl WeightFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightFamily::Affine { alpha } if !(0.0..1.0).contains(&alpha) => Err(Error::InvalidParams(format!(
                "affine family needs alpha in [0,1), got {alpha}"
            ))),
            WeightFamily::ExpAlpha { alpha } if !(alpha > 0.0 && alpha <= 1.0) => Err(Error::InvalidParams(format!(
                "exp_alpha family needs alpha in (0,1], got {alpha}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightFamily::Affine { .. } => "affine",
            WeightFamily::PurePower => "pure_power",
            WeightFamily::ExpAlpha { .. } => "exp_alpha",
            WeightFamily::PowerRatio => "power_ratio",
            WeightFamily::Geometric => "geometric",
        }
    }

    /// Whether the log window has a closed form (no summation).
    pub fn has_closed_form(&self) -> bool {
        !matches!(self, WeightFamily::Affine { .. })
    }

    pub fn check_lambda(&self, lambda: f64) -> Result<()> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::Inadmissible(format!(
                "{} family requires a finite λ > 0, got {lambda}",
                self.name()
            )))
        }
    }

    /// `log w_n(λ)` for a single index `n ≥ 1`.
    pub fn log_weight(&self, lambda: f64, n: u64) -> Result<f64> {
        self.check_lambda(lambda)?;
        if n == 0 {
            return Err(Error::InvalidParams("weights are indexed from n = 1".into()));
        }
        let nf = n as f64;
        Ok(match *self {
            WeightFamily::Affine { alpha } => affine_term(lambda, alpha, n),
            WeightFamily::PurePower => {
                if n == 1 {
                    0.0
                } else {
                    -lambda * (-1.0 / nf).ln_1p()
                }
            }
            WeightFamily::ExpAlpha { alpha } => lambda * (nf.powf(alpha) - (nf - 1.0).powf(alpha)),
            WeightFamily::PowerRatio => lambda * (1.0 / nf).ln_1p(),
            WeightFamily::Geometric => lambda.ln(),
        })
    }

    /// `Σ_{i=l+1}^{l+n} log w_i(λ)`.
    pub fn log_cum_window(&self, lambda: f64, l: u64, n: u64) -> Result<f64> {
        self.check_lambda(lambda)?;
        l.checked_add(n)
            .ok_or_else(|| Error::IndexOverflow(format!("window ({l}, {l}+{n}]")))?;
        Ok(self.window_unchecked(lambda, l, n))
    }

    /// `log ŵ_n(λ)` with `ŵ_0 = 1`.
    pub fn log_hat(&self, lambda: f64, n: u64) -> Result<f64> {
        self.log_cum_window(lambda, 0, n)
    }

    pub(crate) fn window_unchecked(&self, lambda: f64, l: u64, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let lf = l as f64;
        let nf = n as f64;
        match *self {
            WeightFamily::PurePower => {
                if l == 0 {
                    lambda * nf.ln()
                } else {
                    lambda * (nf / lf).ln_1p()
                }
            }
            WeightFamily::ExpAlpha { alpha } => {
                if l == 0 {
                    lambda * nf.powf(alpha)
                } else {
                    lambda * lf.powf(alpha) * (alpha * (nf / lf).ln_1p()).exp_m1()
                }
            }
            WeightFamily::PowerRatio => lambda * (nf / (lf + 1.0)).ln_1p(),
            WeightFamily::Geometric => nf * lambda.ln(),
            WeightFamily::Affine { alpha } => {
                let mut acc = Compensated::default();
                for i in (l + 1)..=(l + n) {
                    acc.add(affine_term(lambda, alpha, i));
                }
                acc.value()
            }
        }
    }
}

fn affine_term(lambda: f64, alpha: f64, i: u64) -> f64 {
    let x = if alpha == 0.0 {
        lambda / i as f64
    } else {
        lambda / (i as f64).powf(1.0 - alpha)
    };
    x.ln_1p()
}

/// `[log ŵ_0(λ), …, log ŵ_len(λ)]`, in O(len) for every family.
pub fn log_hat_table(family: WeightFamily, lambda: f64, len: u64) -> Result<Vec<f64>> {
    family.validate()?;
    family.check_lambda(lambda)?;
    Ok(match family {
        WeightFamily::Affine { .. } => build_prefix(family, lambda, len),
        _ => (0..=len).map(|n| family.window_unchecked(lambda, 0, n)).collect(),
    })
}

/// Largest prefix table built for summation-based families (entries).
pub const PREFIX_TABLE_LIMIT: u64 = 1 << 23;

/// Log-window evaluator at a fixed parameter.
///
/// For the affine family this holds the compensated prefix sums
/// `log ŵ_0 … log ŵ_len`; windows inside the table cost O(1).
#[derive(Clone, Debug)]
pub struct LogWindows {
    family: WeightFamily,
    lambda: f64,
    prefix: Option<Arc<Vec<f64>>>,
}

impl LogWindows {
    /// Evaluator able to answer windows ending at or below `max_index`.
    pub fn new(family: WeightFamily, lambda: f64, max_index: u64) -> Result<Self> {
        family.validate()?;
        family.check_lambda(lambda)?;
        let prefix = if family.has_closed_form() || max_index > PREFIX_TABLE_LIMIT {
            None
        } else {
            Some(Arc::new(build_prefix(family, lambda, max_index)))
        };
        Ok(Self { family, lambda, prefix })
    }

    pub fn family(&self) -> WeightFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn window(&self, l: u64, n: u64) -> f64 {
        if let Some(table) = &self.prefix {
            let end = (l + n) as usize;
            if end < table.len() {
                return table[end] - table[l as usize];
            }
        }
        self.family.window_unchecked(self.lambda, l, n)
    }

    pub fn log_hat(&self, n: u64) -> f64 {
        self.window(0, n)
    }
}

fn build_prefix(family: WeightFamily, lambda: f64, max_index: u64) -> Vec<f64> {
    let alpha = match family {
        WeightFamily::Affine { alpha } => alpha,
        _ => unreachable!("prefix tables are only built for summation families"),
    };
    let mut table = Vec::with_capacity(max_index as usize + 1);
    let mut acc = Compensated::default();
    table.push(0.0);
    for i in 1..=max_index {
        acc.add(affine_term(lambda, alpha, i));
        table.push(acc.value());
    }
    table
}

/// Thread-safe cache of [`LogWindows`], keyed by the family and the exact
/// bits of `λ`.
#[derive(Debug, Default)]
pub struct WindowCache {
    map: Mutex<HashMap<(u8, u64, u64), LogWindows>>,
}

impl WindowCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, family: WeightFamily, lambda: f64, max_index: u64) -> Result<LogWindows> {
        let (tag, alpha) = match family {
            WeightFamily::Affine { alpha } => (0u8, alpha),
            WeightFamily::PurePower => (1, 0.0),
            WeightFamily::ExpAlpha { alpha } => (2, alpha),
            WeightFamily::PowerRatio => (3, 0.0),
            WeightFamily::Geometric => (4, 0.0),
        };
        let key = (tag, alpha.to_bits(), lambda.to_bits());
        if let Some(w) = self.map.lock().unwrap().get(&key) {
            let covered = w.prefix.as_ref().is_none_or(|t| t.len() as u64 > max_index);
            if covered {
                return Ok(w.clone());
            }
        }
        let w = LogWindows::new(family, lambda, max_index)?;
        self.map.lock().unwrap().insert(key, w.clone());
        Ok(w)
    }
}

/// `B_{w(λ)}^N x`: entry `k ≥ N` moves to `k − N` with factor
/// `w_{k−N+1}(λ)…w_k(λ)`; entries below `N` are annihilated.
pub fn apply_backward_power(family: WeightFamily, lambda: f64, power: u64, x: &SeqVec) -> Result<SeqVec> {
    family.check_lambda(lambda)?;
    Ok(backward_with(x, power, |l| family.window_unchecked(lambda, l, power)))
}

pub(crate) fn backward_with(x: &SeqVec, power: u64, window: impl Fn(u64) -> f64) -> SeqVec {
    SeqVec::from_pairs(
        x.iter()
            .filter(|&(k, _)| k >= power)
            .map(|(k, c)| (k - power, window(k - power).exp() * c)),
    )
}

/// `F_{w(λ)^{-1/m}}^N x`: entry `k` moves to `k + N` with factor
/// `[w_{k+1}(λ)…w_{k+N}(λ)]^{-1/m}`.
pub fn apply_forward_root_power(family: WeightFamily, lambda: f64, m: u32, power: u64, x: &SeqVec) -> Result<SeqVec> {
    family.check_lambda(lambda)?;
    if m == 0 {
        return Err(Error::InvalidParams("forward shift root needs m >= 1".into()));
    }
    let mut pairs = Vec::with_capacity(x.len());
    for (k, c) in x.iter() {
        let target = k
            .checked_add(power)
            .ok_or_else(|| Error::IndexOverflow(format!("forward shift {k} + {power}")))?;
        let w = family.window_unchecked(lambda, k, power);
        pairs.push((target, (-w / m as f64).exp() * c));
    }
    Ok(SeqVec::from_pairs(pairs))
}

/// Largest secant slope of `a ↦ Σ_{i=l+1}^{l+n} log w_i(a)` over pairs of
/// grid points: a grid estimate of the Lipschitz constant on the grid hull.
pub fn lipschitz_ratio(family: WeightFamily, grid: &[f64], l: u64, n: u64) -> Result<f64> {
    let values = grid
        .iter()
        .map(|&a| family.log_cum_window(a, l, n))
        .collect::<Result<Vec<_>>>()?;
    max_secant(grid, &values)
}

pub(crate) fn max_secant(grid: &[f64], values: &[f64]) -> Result<f64> {
    let mut best: Option<f64> = None;
    for i in 0..grid.len() {
        for j in (i + 1)..grid.len() {
            let da = grid[i] - grid[j];
            if da == 0.0 {
                continue;
            }
            let slope = ((values[i] - values[j]) / da).abs();
            best = Some(best.map_or(slope, |b: f64| b.max(slope)));
        }
    }
    best.ok_or_else(|| Error::InvalidParams("Lipschitz estimate needs at least 2 distinct grid points".into()))
}

/// `count` evenly spaced points covering `[lo, hi]`, endpoints included.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count)
            .map(|i| {
                if i + 1 == count {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}
