//! A-priori majorants for series terms and certified tail bounds.

use std::f64::consts::PI;

use crate::model::{forcing_norm, PotentialSpec, PropagatorQuery, TestFunction};

/// Everything the majorants need about one query.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundContext {
    /// `max{a, |x|, |y|}` with `a` the delta support radius.
    pub b: f64,
    /// Endpoint `|x|`.
    pub x_abs: f64,
    pub theta_norm: f64,
    pub dt: f64,
    /// `(|g·c_l|, |α_l|)` per exponential atom.
    pub exp_weights: Vec<(f64, f64)>,
    /// `|g| Σ |g_j|`.
    pub m2_total: f64,
}

impl BoundContext {
    pub fn new(p: &PotentialSpec, q: &PropagatorQuery, theta: &TestFunction) -> Self {
        let g = p.g.abs();
        Self {
            b: p.delta_support().max(q.x.abs()).max(q.y.abs()),
            x_abs: q.x.abs(),
            theta_norm: forcing_norm(theta, q.t0, q.t),
            dt: q.dt().max(0.0),
            exp_weights: p
                .exp_atoms
                .iter()
                .map(|a| (g * a.coeff.norm(), a.alpha.abs()))
                .collect(),
            m2_total: g * p.delta_atoms.iter().map(|a| a.weight.abs()).sum::<f64>(),
        }
    }

    /// `Σ_l |g c_l| e^{C|α_l|}`.
    pub fn m1_weight(&self, c: f64) -> f64 {
        self.exp_weights.iter().map(|(w, a)| w * (c * a).exp()).sum()
    }

    /// Argument `|x| + 4b + dt + ‖θ‖²` at which the exponential weight is taken.
    pub fn m1_argument(&self) -> f64 {
        self.x_abs + 4.0 * self.b + self.dt + self.theta_norm * self.theta_norm
    }

    fn log_prefactor(&self) -> f64 {
        2.0 * self.theta_norm * self.theta_norm + self.b * self.b
    }
}

/// `ln ∫_{Δ_n} Π_{j=1}^{n+1} (2π(τ_j − τ_{j−1}))^{-1/2} dτ`.
pub fn log_simplex_weight(n: usize, dt: f64) -> f64 {
    let n = n as f64;
    (n + 1.0) * (libm::lgamma(0.5) - 0.5 * (2.0 * PI).ln()) + 0.5 * (n - 1.0) * dt.ln()
        - libm::lgamma(0.5 * (n + 1.0))
}

/// `(Γ(½)/√(2π))^{n+1} dt^{(n−1)/2} / Γ((n+1)/2)`.
pub fn simplex_weight_closed_form(n: usize, dt: f64) -> f64 {
    log_simplex_weight(n, dt).exp()
}

/// `ln` of the majorant of the `(n, k)` term, `-inf` when it vanishes.
pub fn log_term_majorant(n: usize, k: usize, ctx: &BoundContext) -> f64 {
    assert!(k <= n, "term index k = {k} exceeds order n = {n}");
    if ctx.dt <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let d = n - k;
    let mut log = ctx.log_prefactor() + log_simplex_weight(k, ctx.dt);
    if k > 0 {
        log += k as f64 * ctx.m2_total.ln();
    }
    if d > 0 {
        log += d as f64 * (ctx.dt * ctx.m1_weight(ctx.m1_argument())).ln()
            - libm::lgamma(d as f64 + 1.0);
    }
    if log.is_nan() {
        f64::NEG_INFINITY
    } else {
        log
    }
}

/// Majorant of `|term(n, k)|`; `+inf` once the bound leaves floating-point range.
pub fn term_majorant(n: usize, k: usize, ctx: &BoundContext) -> f64 {
    log_term_majorant(n, k, ctx).exp()
}

/// `n`-th coefficient of the Cauchy product of the delta series
/// `Σ_k m2^k W_k` with the exponential series `Σ_d (dt·m1)^d/d!`.
pub fn cauchy_coefficient(n: usize, ctx: &BoundContext) -> f64 {
    if ctx.dt <= 0.0 {
        return 0.0;
    }
    let delta: Vec<f64> = (0..=n)
        .map(|k| ctx.m2_total.powi(k as i32) * simplex_weight_closed_form(k, ctx.dt))
        .collect();
    let rate = ctx.dt * ctx.m1_weight(ctx.m1_argument());
    let exp: Vec<f64> = (0..=n)
        .map(|d| rate.powi(d as i32) / libm::tgamma(d as f64 + 1.0))
        .collect();
    let conv: f64 = (0..=n).map(|k| delta[k] * exp[n - k]).sum();
    ctx.log_prefactor().exp() * conv
}

/// Orders beyond this are not summed; the bound is reported as infinite.
const TAIL_ORDER_LIMIT: usize = 20_000;

/// `Σ_{n>N} Σ_{k≤n} term_majorant(n, k)`.
pub fn tail_bound(order: usize, ctx: &BoundContext) -> f64 {
    if ctx.dt <= 0.0 || (ctx.m2_total == 0.0 && ctx.m1_weight(0.0) == 0.0) {
        return 0.0;
    }
    let mut total = 0.0;
    let mut previous = f64::INFINITY;
    for n in order + 1..TAIL_ORDER_LIMIT {
        let inc: f64 = (0..=n).map(|k| term_majorant(n, k, ctx)).sum();
        if !inc.is_finite() {
            return f64::INFINITY;
        }
        total += inc;
        if inc <= 1e-16 * total && inc <= previous {
            return total;
        }
        if total == 0.0 && n > order + 1 && inc == 0.0 {
            return 0.0;
        }
        previous = inc;
    }
    f64::INFINITY
}
