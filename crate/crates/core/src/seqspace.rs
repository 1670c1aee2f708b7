//! Finitely supported real sequences with the coordinatewise and Cauchy
//! products.
//!
//! A [`SeqVec`] stores only nonzero coefficients, keyed by their index.
//! Exact zeros are dropped after every operation and nothing else is pruned,
//! so coefficients that underflow to `0.0` disappear while tiny nonzero
//! ones survive.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Sparse sequence `x = sum_k x_k e_k` with finitely many nonzero terms.
#[derive(Clone, Default, PartialEq)]
pub struct SeqVec {
    entries: BTreeMap<u64, f64>,
}

/// Algebra product on sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductKind {
    /// `(a_n)(b_n) = (a_n b_n)`.
    Coordinatewise,
    /// `(a*b)_n = sum_{k<=n} a_k b_{n-k}`.
    Convolution,
}

/// Norm of the ambient sequence space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceNorm {
    Lp {
        p: f64,
    },
    Sup,
    #[default]
    L1,
}

impl SpaceNorm {
    pub fn lp(p: f64) -> Result<Self> {
        let norm = SpaceNorm::Lp { p };
        norm.validate()?;
        Ok(norm)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpaceNorm::Lp { p } if !(p >= 1.0) || !p.is_finite() => {
                Err(Error::InvalidParams(format!("lp norm requires finite p >= 1, got {p}")))
            }
            _ => Ok(()),
        }
    }
}

impl SeqVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// The canonical basis vector `e_k`.
    pub fn basis(k: u64) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(k, 1.0);
        Self { entries }
    }

    /// `c * e_k`, empty when `c == 0`.
    pub fn monomial(k: u64, c: f64) -> Self {
        let mut v = Self::new();
        v.set(k, c);
        v
    }

    /// Builds a vector from `(index, coefficient)` pairs; repeated indices
    /// are summed.
    pub fn from_pairs<I: IntoIterator<Item = (u64, f64)>>(pairs: I) -> Self {
        let mut entries: BTreeMap<u64, f64> = BTreeMap::new();
        for (k, c) in pairs {
            *entries.entry(k).or_insert(0.0) += c;
        }
        entries.retain(|_, c| *c != 0.0);
        Self { entries }
    }

    pub fn get(&self, k: u64) -> f64 {
        self.entries.get(&k).copied().unwrap_or(0.0)
    }

    /// Sets coefficient `k`, removing the entry when `c` is exactly zero.
    pub fn set(&mut self, k: u64, c: f64) {
        if c == 0.0 {
            self.entries.remove(&k);
        } else {
            self.entries.insert(k, c);
        }
    }

    /// Adds `c` to coefficient `k`.
    pub fn add_at(&mut self, k: u64, c: f64) {
        let v = self.get(k) + c;
        self.set(k, v);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest stored index, `None` for the zero vector.
    pub fn max_support(&self) -> Option<u64> {
        self.entries.keys().next_back().copied()
    }

    pub fn min_support(&self) -> Option<u64> {
        self.entries.keys().next().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.entries.iter().map(|(&k, &c)| (k, c))
    }

    pub fn indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }

    pub fn scale(&self, c: f64) -> SeqVec {
        SeqVec::from_pairs(self.iter().map(|(k, x)| (k, c * x)))
    }

    pub fn add(&self, other: &SeqVec) -> SeqVec {
        let mut out = self.clone();
        for (k, c) in other.iter() {
            out.add_at(k, c);
        }
        out
    }

    pub fn sub(&self, other: &SeqVec) -> SeqVec {
        let mut out = self.clone();
        for (k, c) in other.iter() {
            out.add_at(k, -c);
        }
        out
    }

    /// Restriction to indices in `[lo, hi]`.
    pub fn restrict(&self, lo: u64, hi: u64) -> SeqVec {
        if lo > hi {
            return SeqVec::new();
        }
        SeqVec {
            entries: self.entries.range(lo..=hi).map(|(&k, &c)| (k, c)).collect(),
        }
    }

    pub fn all_nonnegative(&self) -> bool {
        self.entries.values().all(|&c| c >= 0.0)
    }

    pub fn product(&self, other: &SeqVec, kind: ProductKind) -> Result<SeqVec> {
        product(self, other, kind)
    }

    pub fn power(&self, m: u32, kind: ProductKind) -> Result<SeqVec> {
        power(self, m, kind)
    }

    pub fn norm(&self, n: SpaceNorm) -> f64 {
        norm(self, n)
    }
}

impl fmt::Debug for SeqVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries.iter()).finish()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeqVecRepr {
    entries: Vec<(u64, f64)>,
}

impl Serialize for SeqVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SeqVecRepr {
            entries: self.iter().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SeqVec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SeqVecRepr::deserialize(deserializer)?;
        let mut entries = BTreeMap::new();
        for (k, c) in repr.entries {
            if !c.is_finite() {
                return Err(serde::de::Error::custom(format!(
                    "coefficient at index {k} is not finite"
                )));
            }
            if entries.insert(k, c).is_some() {
                return Err(serde::de::Error::custom(format!("duplicate index {k}")));
            }
        }
        entries.retain(|_, c| *c != 0.0);
        Ok(SeqVec { entries })
    }
}

/// Canonical basis vector `e_k`.
pub fn basis(k: u64) -> SeqVec {
    SeqVec::basis(k)
}

pub fn product(x: &SeqVec, y: &SeqVec, kind: ProductKind) -> Result<SeqVec> {
    match kind {
        ProductKind::Coordinatewise => {
            let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
            Ok(SeqVec::from_pairs(
                small
                    .iter()
                    .filter_map(|(k, a)| large.entries.get(&k).map(|&b| (k, a * b))),
            ))
        }
        ProductKind::Convolution => {
            let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
            for (i, a) in x.iter() {
                for (j, b) in y.iter() {
                    let k = i
                        .checked_add(j)
                        .ok_or_else(|| Error::IndexOverflow(format!("convolution index {i} + {j}")))?;
                    *acc.entry(k).or_insert(0.0) += a * b;
                }
            }
            acc.retain(|_, c| *c != 0.0);
            Ok(SeqVec { entries: acc })
        }
    }
}

/// `m`-fold product of `x` with itself.
///
/// The coordinatewise power is the entrywise `powi`; the convolution power
/// uses repeated squaring.
pub fn power(x: &SeqVec, m: u32, kind: ProductKind) -> Result<SeqVec> {
    if m == 0 {
        return Err(Error::InvalidParams("power requires m >= 1".into()));
    }
    match kind {
        ProductKind::Coordinatewise => Ok(SeqVec::from_pairs(x.iter().map(|(k, c)| (k, c.powi(m as i32))))),
        ProductKind::Convolution => {
            // Cheap up-front overflow check on the top index.
            if let Some(top) = x.max_support() {
                top.checked_mul(m as u64)
                    .ok_or_else(|| Error::IndexOverflow(format!("convolution power {m} of support {top}")))?;
            }
            let mut result: Option<SeqVec> = None;
            let mut base = x.clone();
            let mut e = m;
            loop {
                if e & 1 == 1 {
                    result = Some(match result {
                        None => base.clone(),
                        Some(r) => product(&r, &base, kind)?,
                    });
                }
                e >>= 1;
                if e == 0 {
                    break;
                }
                base = product(&base, &base, kind)?;
            }
            Ok(result.unwrap_or_default())
        }
    }
}

/// Entrywise real `m`-th root of a nonnegative vector.
pub fn cw_root(x: &SeqVec, m: u32) -> Result<SeqVec> {
    if m == 0 {
        return Err(Error::InvalidParams("root requires m >= 1".into()));
    }
    if let Some((k, c)) = x.iter().find(|&(_, c)| c < 0.0) {
        return Err(Error::NegativeCoefficient { index: k, value: c });
    }
    let root = |c: f64| match m {
        1 => c,
        2 => c.sqrt(),
        3 => c.cbrt(),
        _ => c.powf(1.0 / m as f64),
    };
    Ok(SeqVec::from_pairs(x.iter().map(|(k, c)| (k, root(c)))))
}

pub fn norm(x: &SeqVec, n: SpaceNorm) -> f64 {
    match n {
        SpaceNorm::L1 => x.entries.values().fold(0.0, |s, c| s + c.abs()),
        SpaceNorm::Sup => x.entries.values().fold(0.0, |m, c| m.max(c.abs())),
        SpaceNorm::Lp { p: 1.0 } => norm(x, SpaceNorm::L1),
        SpaceNorm::Lp { p } => {
            let top = norm(x, SpaceNorm::Sup);
            if top == 0.0 || !top.is_finite() {
                return top;
            }
            let s: f64 = x.entries.values().map(|c| (c.abs() / top).powf(p)).sum();
            top * s.powf(1.0 / p)
        }
    }
}
