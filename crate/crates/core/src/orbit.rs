//! Finite probes of `Orb(T; x)` against a list of targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqspace::{SeqVec, SpaceNorm};
use crate::weights::{backward_with, LogWindows, WeightFamily};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitProbe {
    pub fams: Vec<WeightFamily>,
    pub lambda: Vec<f64>,
    pub x: Vec<SeqVec>,
    pub targets: Vec<Vec<SeqVec>>,
    pub eps: f64,
    pub n_max: u64,
    /// Whether `N = 0` counts as a hit.
    #[serde(default)]
    pub allow_zero: bool,
    #[serde(default)]
    pub norm: SpaceNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitHit {
    pub target: usize,
    /// Least `N` with distance `< ε`; `None` is a miss.
    pub hit: Option<u64>,
    /// Distance at the hit, or the smallest distance seen.
    pub distance: f64,
    pub best_n: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub hits: Vec<OrbitHit>,
    pub all_hit: bool,
}

impl OrbitProbe {
    pub fn validate(&self) -> Result<()> {
        let d = self.fams.len();
        if d == 0 || self.lambda.len() != d || self.x.len() != d {
            return Err(Error::InvalidParams(
                "fams, lambda and x need one entry per axis".into(),
            ));
        }
        if let Some(i) = self.targets.iter().position(|t| t.len() != d) {
            return Err(Error::InvalidParams(format!("target {i} has the wrong dimension")));
        }
        for (f, &l) in self.fams.iter().zip(&self.lambda) {
            f.validate()?;
            crate::criteria::check_admissible(*f, l)?;
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidParams("eps must be >= 0".into()));
        }
        self.norm.validate()
    }
}

/// Distance `Σ_t ‖T^N x_t − y_t‖` for every `N` up to `n_max`, reporting the
/// least `N` below `ε` per target. Past `max supp x` the orbit is zero, so
/// only one further power is examined.
pub fn orbit_probe(p: &OrbitProbe) -> Result<OrbitReport> {
    p.validate()?;
    let top = p.x.iter().filter_map(SeqVec::max_support).max();
    let windows: Vec<LogWindows> = p
        .fams
        .iter()
        .zip(&p.lambda)
        .map(|(&f, &l)| LogWindows::new(f, l, top.unwrap_or(0)))
        .collect::<Result<_>>()?;
    let last = match top {
        Some(s) => p.n_max.min(s + 1),
        None => p.n_max.min(1),
    };
    let start = if p.allow_zero { 0 } else { 1 };
    let mut hits: Vec<OrbitHit> = (0..p.targets.len())
        .map(|target| OrbitHit {
            target,
            hit: None,
            distance: f64::INFINITY,
            best_n: start,
        })
        .collect();
    for n in start..=last {
        if hits.iter().all(|h| h.hit.is_some()) {
            break;
        }
        let orbit: Vec<SeqVec> =
            p.x.iter()
                .zip(&windows)
                .map(|(x, w)| backward_with(x, n, |l| w.window(l, n)))
                .collect();
        for (h, target) in hits.iter_mut().zip(&p.targets) {
            if h.hit.is_some() {
                continue;
            }
            let dist: f64 = orbit.iter().zip(target).map(|(y, v)| y.sub(v).norm(p.norm)).sum();
            if dist < h.distance {
                h.distance = dist;
                h.best_n = n;
            }
            if dist < p.eps {
                h.hit = Some(n);
                h.distance = dist;
                h.best_n = n;
            }
        }
    }
    let all_hit = hits.iter().all(|h| h.hit.is_some());
    Ok(OrbitReport { hits, all_hit })
}
