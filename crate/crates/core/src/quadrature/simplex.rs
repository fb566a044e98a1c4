//! Tensor stick-breaking rules on the time simplex.
//!
//! Spacings `Δ_1..Δ_{k+1}` with `ΣΔ = L` are parametrised by
//! `Δ_i = R_i v_i`, `R_{i+1} = R_i (1 − v_i)`, `R_1 = L`. For the weight
//! `Π Δ_j^{a−1}` the variable `v_i` carries the Jacobi weight
//! `v^{a−1} (1−v)^{a(k−i+1)−1}` and the overall factor is `L^{(k+1)(a−1)+k}`.
//!
//! When the smooth part is analytic in the spacings, each `v_i` may instead run
//! along a two-piece complex path: out of `0` and into `1` at 45°, joined at a
//! real split point. This tames the `e^{ic/Δ}` oscillation at the endpoints.

use std::sync::Arc;

use super::jacobi::{gauss_jacobi_unit, Rule};
use crate::C64;

/// Largest number of stick dimensions a tensor rule may have.
pub const MAX_TENSOR_DIM: usize = 8;

/// Weight `Π Δ_j^{a−1}` absorbed by the rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimplexWeight {
    /// `Π Δ_j^{-1/2}` (the free-propagator singularity).
    #[default]
    InverseSqrt,
    /// Plain Lebesgue measure.
    Flat,
}

impl SimplexWeight {
    pub fn exponent(self) -> f64 {
        match self {
            SimplexWeight::InverseSqrt => 0.5,
            SimplexWeight::Flat => 1.0,
        }
    }
}

/// One-dimensional complex rule: `(v, weight)` pairs.
type Line = Vec<(C64, C64)>;

/// Tensor product of stick-breaking lines for a `k`-simplex of length `L`.
#[derive(Debug, Clone)]
pub struct StickTensor {
    lines: Vec<Line>,
    length: f64,
    scale: f64,
}

impl StickTensor {
    /// Real rule with `points` Gauss–Jacobi nodes per dimension.
    pub fn real(k: usize, weight: SimplexWeight, points: usize, length: f64) -> Self {
        Self::deformed(k, weight, points, length, 0.0, None)
    }

    /// Rule whose lines follow the complex path with tilt `eta` wherever the
    /// distances `hint = (|d_1|, …, |d_{k+1}|)` still ahead are nonzero.
    /// The tilt is capped at `tan(π/(2k))`.
    pub fn deformed(
        k: usize,
        weight: SimplexWeight,
        points: usize,
        length: f64,
        eta: f64,
        hint: Option<&[f64]>,
    ) -> Self {
        assert!(k <= MAX_TENSOR_DIM, "stick tensor dimension {k} exceeds {MAX_TENSOR_DIM}");
        let a = weight.exponent();
        let p = a - 1.0;
        let total: f64 = hint.map_or(0.0, |d| d.iter().sum());
        // Spacings are products of up to k path factors; keeping each factor
        // within π/(2k) of the real axis keeps every spacing in the right half-plane.
        let eta = if k > 0 {
            eta.min((std::f64::consts::FRAC_PI_2 / k as f64).tan())
        } else {
            eta
        };
        let lines = (1..=k)
            .map(|i| {
                let q = a * (k - i + 1) as f64 - 1.0;
                let path = hint.and_then(|d| {
                    let ahead: f64 = d[i - 1..].iter().sum();
                    (eta > 0.0 && ahead > 0.0).then(|| {
                        // Width of the e^{−c/u} layers at either end of the line.
                        let decay = eta / (1.0 + eta * eta) * total / (2.0 * length);
                        Path {
                            split: d[i - 1] / ahead,
                            eta,
                            near_layer: decay * d[i - 1],
                            far_layer: decay * (ahead - d[i - 1]),
                        }
                    })
                });
                match path {
                    Some(path) => split_line(points, p, q, &path),
                    None => real_line(&gauss_jacobi_unit(points, p, q)),
                }
            })
            .collect();
        let scale = length.powf((k + 1) as f64 * (a - 1.0) + k as f64);
        Self {
            lines,
            length,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.lines.len()
    }

    pub fn len(&self) -> usize {
        self.lines.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spacings `Δ_1..Δ_{k+1}` (written into `out[..=k]`) and weight of node `index`.
    pub fn node(&self, mut index: usize, out: &mut [C64; MAX_TENSOR_DIM + 1]) -> C64 {
        let mut rest = C64::from(self.length);
        let mut w = C64::from(self.scale);
        for (i, line) in self.lines.iter().enumerate() {
            let (v, wi) = line[index % line.len()];
            index /= line.len();
            out[i] = rest * v;
            rest *= C64::new(1.0, 0.0) - v;
            w *= wi;
        }
        out[self.lines.len()] = rest;
        w
    }
}

fn real_line(rule: &Arc<Rule>) -> Line {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&v, &w)| (C64::from(v), C64::from(w)))
        .collect()
}

struct Path {
    split: f64,
    eta: f64,
    near_layer: f64,
    far_layer: f64,
}

// Power `β` in `u = w^β` that moves a layer of width `c` to `w ≈ 1/2`.
fn grading(c: f64) -> f64 {
    if c >= 0.5 || c <= 0.0 {
        1.0
    } else {
        (c.ln() / 0.5f64.ln()).round().clamp(1.0, 8.0)
    }
}

// Rule for `∫_0^1 u^a (1−u)^b F(u) du` with `u = w^β`, pairs `(u, weight)`.
fn graded(n: usize, a: f64, b: f64, beta: f64) -> Vec<(f64, f64)> {
    if beta == 1.0 {
        let r = gauss_jacobi_unit(n, a, b);
        return r.nodes.iter().copied().zip(r.weights.iter().copied()).collect();
    }
    let r = gauss_jacobi_unit(n, beta * (a + 1.0) - 1.0, b);
    r.nodes
        .iter()
        .zip(&r.weights)
        .map(|(&w, &ww)| {
            let u = w.powf(beta);
            let ratio = if b == 0.0 { 1.0 } else { ((1.0 - u) / (1.0 - w)).powf(b) };
            (u, beta * ww * ratio)
        })
        .collect()
}

// Path v = s·u·g(u) on [0, s] and 1 − v = (1−s)·u·g(u) on [s, 1] with
// g(u) = 1 − iη(1−u); both pieces meet the real axis at the split point.
// The split must sit at the stationary point of Σ d_j²/Δ_j: moving it away
// lets the exponent grow like d² along one piece.
fn split_line(points: usize, p: f64, q: f64, path: &Path) -> Line {
    let (s, eta) = (path.split, path.eta);
    let one = C64::new(1.0, 0.0);
    // At s = 0 or 1 a single piece spans [0, 1] and the far factor splits as
    // (1−u)(1 + iηu), so both endpoint singularities go into the weight.
    if s <= 0.0 || s >= 1.0 {
        let (a, b, layer) = if s <= 0.0 {
            (q, p, path.far_layer)
        } else {
            (p, q, path.near_layer)
        };
        let mut line: Line = graded(points, a, b, grading(layer))
            .into_iter()
            .map(|(u, wu)| {
                let g = C64::new(1.0, -eta * (1.0 - u));
                let dg = C64::new(1.0, -eta * (1.0 - 2.0 * u));
                let w = g.powf(a) * C64::new(1.0, eta * u).powf(b) * dg * wu;
                let v = if s <= 0.0 { one - g * u } else { g * u };
                (v, w)
            })
            .collect();
        if s <= 0.0 {
            line.reverse();
        }
        return line;
    }
    let n1 = points.div_ceil(2);
    let n2 = (points - n1).max(1);
    let mut line = Vec::with_capacity(n1 + n2);

    for (u, wu) in graded(n1, p, 0.0, grading(path.near_layer)) {
        let g = C64::new(1.0, -eta * (1.0 - u));
        let dg = C64::new(1.0, -eta * (1.0 - 2.0 * u));
        let v = g * (s * u);
        let w = g.powf(p) * (one - v).powf(q) * dg * (wu * s.powf(p + 1.0));
        line.push((v, w));
    }
    for (u, wu) in graded(n2, q, 0.0, grading(path.far_layer)).into_iter().rev() {
        let g = C64::new(1.0, -eta * (1.0 - u));
        let dg = C64::new(1.0, -eta * (1.0 - 2.0 * u));
        let v = one - g * ((1.0 - s) * u);
        let w = g.powf(q) * v.powf(p) * dg * (wu * (1.0 - s).powf(q + 1.0));
        line.push((v, w));
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn integrate(t: &StickTensor, f: impl Fn(&[C64]) -> C64) -> C64 {
        let mut buf = [C64::new(0.0, 0.0); MAX_TENSOR_DIM + 1];
        (0..t.len())
            .map(|i| {
                let w = t.node(i, &mut buf);
                w * f(&buf[..=t.dim()])
            })
            .sum()
    }

    #[test]
    fn weight_masses() {
        // ∫_{Δ_k} Π Δ^{-1/2} = Γ(1/2)^{k+1} L^{(k-1)/2} / Γ((k+1)/2)
        for k in 1..=4 {
            let t = StickTensor::real(k, SimplexWeight::InverseSqrt, 6, 1.7);
            let got = integrate(&t, |_| C64::new(1.0, 0.0));
            let exact = (PI.sqrt()).powi(k as i32 + 1) * 1.7f64.powf((k as f64 - 1.0) / 2.0)
                / libm::tgamma((k as f64 + 1.0) / 2.0);
            assert!((got.re - exact).abs() < 1e-12 * exact && got.im.abs() < 1e-14);

            let t = StickTensor::real(k, SimplexWeight::Flat, 4, 2.0);
            let got = integrate(&t, |_| C64::new(1.0, 0.0));
            let exact = 2.0f64.powi(k as i32) / libm::tgamma(k as f64 + 1.0);
            assert!((got.re - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn deformation_preserves_polynomial_integrals() {
        let hint = [0.3, 1.0, 0.2, 0.5];
        let real = StickTensor::real(3, SimplexWeight::InverseSqrt, 12, 1.3);
        let bent = StickTensor::deformed(3, SimplexWeight::InverseSqrt, 48, 1.3, 1.0, Some(&hint));
        let f = |d: &[C64]| d[0] * d[1] + d[2] * d[3] * d[3] + C64::new(0.5, 0.0);
        let (a, b) = (integrate(&real, f), integrate(&bent, f));
        assert!((a - b).norm() < 1e-10 * a.norm(), "{a} vs {b}");
        for hint in [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.0, 0.0]] {
            let bent = StickTensor::deformed(3, SimplexWeight::InverseSqrt, 12, 1.3, 1.0, Some(&hint));
            let b = integrate(&bent, f);
            assert!((a - b).norm() < 1e-10 * a.norm(), "{hint:?}: {a} vs {b}");
        }
    }
}
