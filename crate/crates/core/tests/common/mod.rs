//! Shared helpers for the integration tests.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use shiftlab_core::covering::{GradedParams, ParamBox};

/// Cell cap used by the fuzzed graded-covering tests.
pub const FUZZ_MAX_CELLS: u64 = 4096;

/// Whether a `g × g` grid of `k` with `n_j = jΔ` exists for some
/// `g = 2^b`, `g² ≤ max_cells`: the least `Δ = N·2^t` with
/// `Δ^{-β} Σ_{j≤q} j^{-β} ≤ η` and `Δ^{-β} max_j Σ_{i≠j} |i−j|^{-β} ≤ η`
/// must leave `side/g ≤ τ (qΔ)^{-α}`.
pub fn graded_feasible(k: &ParamBox, p: &GradedParams, max_cells: u64) -> bool {
    let side = (0..k.dim()).map(|t| k.hi(t) - k.lo(t)).fold(0.0, f64::max);
    let mut g = 1u64;
    while g * g <= max_cells {
        let q = g * g;
        let s = |n: u64| -> f64 { (1..=n).map(|j| (j as f64).powf(-p.beta)).sum() };
        let sum_d = s(q);
        let sum_e = (0..q).map(|j| s(j) + s(q - 1 - j)).fold(0.0, f64::max);
        let need = sum_d.max(sum_e);
        let mut delta = p.big_n as f64;
        while need * delta.powf(-p.beta) > p.eta {
            delta *= 2.0;
        }
        if side / g as f64 <= p.tau * (q as f64 * delta).powf(-p.alpha) {
            return true;
        }
        g *= 2;
    }
    false
}

/// Graded parameters with `α ∈ (0, 0.45)`, `β ∈ (2α + 0.05, 1.5)` on a small
/// square `K`; `τ` is log-uniform so that multi-cell coverings occur.
pub fn fuzz_graded(rng: &mut ChaCha8Rng) -> (ParamBox, GradedParams) {
    let alpha = rng.gen_range(0.01..0.45);
    let beta = rng.gen_range((2.0 * alpha + 0.05)..1.5);
    let big_d = rng.gen_range(1.0..2.0);
    let tau = 10f64.powf(rng.gen_range(-2.5..0.0));
    let eta = rng.gen_range(0.2..1.0);
    let big_n = rng.gen_range(1..=20);
    let lo = rng.gen_range(1.0..2.0);
    let side = rng.gen_range(0.005..0.03);
    let mut p = GradedParams::new(alpha, beta, big_d, tau, eta, big_n);
    p.max_cells = FUZZ_MAX_CELLS;
    (ParamBox::cube(lo, lo + side, 2), p)
}
