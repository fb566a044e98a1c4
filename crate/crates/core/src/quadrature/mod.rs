//! Integration over the time simplex and the insertion hypercube, plus the
//! complex Gaussian integral used by the oracles.

pub mod adaptive;
pub mod jacobi;
pub mod mc;
pub mod simplex;
pub mod sum;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::C64;

pub use adaptive::integrate_adaptive;
pub use jacobi::{gauss_jacobi_unit, gauss_legendre_unit, Rule};
pub use simplex::{SimplexWeight, StickTensor, MAX_TENSOR_DIM};
pub use sum::{pairwise_sum, pairwise_sum_real};

/// Which rule integrates over the time simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimplexRule {
    #[default]
    GaussJacobiTensor,
    DirichletMc,
}

/// Quadrature settings shared by every term of a series evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    pub simplex_rule: SimplexRule,
    /// Nodes per simplex dimension for the tensor rule.
    pub points_per_dim: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Nodes per dimension for insertion integrals.
    pub hypercube_points: usize,
    /// Largest simplex dimension handled by the tensor rule.
    pub tensor_max_k: usize,
    /// Tilt of the complex stick path; 0 keeps the rule on the real axis.
    pub contour_eta: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            simplex_rule: SimplexRule::GaussJacobiTensor,
            points_per_dim: 16,
            mc_samples: 4096,
            seed: 0,
            hypercube_points: 16,
            tensor_max_k: 4,
            contour_eta: 1.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_dim < 2 {
            return Err(Error::Invalid("points_per_dim must be at least 2".into()));
        }
        if self.hypercube_points < 2 {
            return Err(Error::Invalid("hypercube_points must be at least 2".into()));
        }
        if self.mc_samples < 100 {
            return Err(Error::Invalid("mc_samples must be at least 100".into()));
        }
        if self.tensor_max_k > MAX_TENSOR_DIM {
            return Err(Error::Invalid(format!(
                "tensor_max_k must not exceed {MAX_TENSOR_DIM}"
            )));
        }
        if !(0.0..=4.0).contains(&self.contour_eta) {
            return Err(Error::Invalid("contour_eta must lie in [0, 4]".into()));
        }
        Ok(())
    }
}

/// Quadrature value with its Monte Carlo standard error (0 for deterministic rules).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: C64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: C64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

/// Mean and standard error of `scale · samples`.
pub(crate) fn mc_estimate(samples: &[C64], scale: f64) -> Estimate {
    let n = samples.len() as f64;
    let mean = pairwise_sum(samples) / n;
    let dev: Vec<f64> = samples.iter().map(|s| (s - mean).norm_sqr()).collect();
    let var = pairwise_sum_real(&dev) / (n - 1.0).max(1.0);
    Estimate {
        value: mean * scale,
        stderr: scale * (var / n).sqrt(),
    }
}

/// `∫_{Δ_k} w(τ) f(τ) dτ` over `t0 < τ_1 < … < τ_k < t`, where the weight
/// `w = Π (τ_j − τ_{j−1})^{a−1}` (endpoints included) is absorbed by the rule and
/// must not be part of `f`.
pub fn simplex_integrate<F>(
    k: usize,
    f: F,
    t0: f64,
    t: f64,
    weight: SimplexWeight,
    spec: &QuadratureSpec,
) -> Result<Estimate>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    if k == 0 {
        return Err(Error::Invalid("simplex dimension must be at least 1".into()));
    }
    if t <= t0 {
        return Err(Error::Domain("simplex needs t > t0".into()));
    }
    spec.validate()?;
    let length = t - t0;
    match spec.simplex_rule {
        SimplexRule::GaussJacobiTensor => {
            if k > spec.tensor_max_k {
                return Err(Error::TensorDimension {
                    k,
                    cap: spec.tensor_max_k,
                });
            }
            let rule = StickTensor::real(k, weight, spec.points_per_dim, length);
            let values: Vec<C64> = (0..rule.len())
                .into_par_iter()
                .map(|i| {
                    let mut spacing = [C64::new(0.0, 0.0); MAX_TENSOR_DIM + 1];
                    let w = rule.node(i, &mut spacing);
                    let mut taus = [0.0; MAX_TENSOR_DIM];
                    let mut acc = t0;
                    for j in 0..k {
                        acc += spacing[j].re;
                        taus[j] = acc;
                    }
                    w * f(&taus[..k])
                })
                .collect();
            Ok(Estimate::exact(pairwise_sum(&values)))
        }
        SimplexRule::DirichletMc => {
            let a = weight.exponent();
            let bank = mc::draw(spec.seed, mc::stream_id(k, k, 0), k + 1, a, 0, spec.mc_samples);
            let values: Vec<C64> = bank
                .par_chunks_exact(k + 1)
                .map(|row| {
                    let taus: Vec<f64> = row[..k]
                        .iter()
                        .scan(t0, |acc, frac| {
                            *acc += length * frac;
                            Some(*acc)
                        })
                        .collect();
                    f(&taus)
                })
                .collect();
            let log_mass = (k + 1) as f64 * libm::lgamma(a) - libm::lgamma((k + 1) as f64 * a)
                + ((k + 1) as f64 * a - 1.0) * length.ln();
            Ok(mc_estimate(&values, log_mass.exp()))
        }
    }
}

/// `∫_{[t0,t]^d} f(s) ds`. With `symmetric`, `f` must be invariant under
/// permutations of `s` and only the ordered sector is sampled.
pub fn hypercube_integrate<F>(
    d: usize,
    f: F,
    t0: f64,
    t: f64,
    spec: &QuadratureSpec,
    symmetric: bool,
) -> Result<Estimate>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    if d == 0 {
        return Err(Error::Invalid("hypercube dimension must be at least 1".into()));
    }
    spec.validate()?;
    let length = t - t0;
    if d <= 3 {
        let values: Vec<C64> = if symmetric {
            let rule = StickTensor::real(d, SimplexWeight::Flat, spec.hypercube_points, length);
            (0..rule.len())
                .into_par_iter()
                .map(|i| {
                    let mut spacing = [C64::new(0.0, 0.0); MAX_TENSOR_DIM + 1];
                    let w = rule.node(i, &mut spacing);
                    let mut s = [0.0; 3];
                    let mut acc = t0;
                    for j in 0..d {
                        acc += spacing[j].re;
                        s[j] = acc;
                    }
                    w * f(&s[..d])
                })
                .collect()
        } else {
            let rule = gauss_legendre_unit(spec.hypercube_points);
            let n = rule.nodes.len();
            (0..n.pow(d as u32))
                .into_par_iter()
                .map(|mut i| {
                    let mut s = [0.0; 3];
                    let mut w = 1.0;
                    for sj in s.iter_mut().take(d) {
                        *sj = t0 + length * rule.nodes[i % n];
                        w *= length * rule.weights[i % n];
                        i /= n;
                    }
                    f(&s[..d]) * w
                })
                .collect()
        };
        let factor = if symmetric {
            (1..=d).product::<usize>() as f64
        } else {
            1.0
        };
        return Ok(Estimate::exact(pairwise_sum(&values) * factor));
    }
    let bank = mc::draw(spec.seed, mc::stream_id(d, 0, 0), 0, 1.0, d, spec.mc_samples);
    let values: Vec<C64> = bank
        .par_chunks_exact(d)
        .map(|row| {
            let s: Vec<f64> = row.iter().map(|u| t0 + length * u).collect();
            f(&s)
        })
        .collect();
    Ok(mc_estimate(&values, length.powi(d as i32)))
}

/// `∫_ℝ exp(i a z² + b z) dz = √(π/(−ia)) · exp(−b²/(4ia))`, principal branch.
///
/// Requires `Im a > 0`, or `Im a = 0` with `a ≠ 0` (Fresnel limit).
pub fn gaussian_integral(a: C64, b: C64) -> Result<C64> {
    if a == C64::new(0.0, 0.0) {
        return Err(Error::Domain("gaussian integral needs a != 0".into()));
    }
    if a.im < 0.0 {
        return Err(Error::Domain(format!(
            "gaussian integral diverges for Im a < 0 (a = {a})"
        )));
    }
    let ia = C64::new(-a.im, a.re);
    Ok((std::f64::consts::PI / -ia).sqrt() * (-(b * b) / (ia * 4.0)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_examples() {
        let i = C64::new(0.0, 1.0);
        let v = gaussian_integral(i, C64::new(0.0, 0.0)).unwrap();
        assert!((v - C64::from(PI.sqrt())).norm() < 1e-15);
        let v = gaussian_integral(C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        assert!((v - C64::from_polar(PI.sqrt(), PI / 4.0)).norm() < 1e-15);
        let v = gaussian_integral(i, C64::new(1.0, 0.0)).unwrap();
        assert!((v - C64::from(PI.sqrt() * 0.25f64.exp())).norm() < 1e-14);
        assert!(gaussian_integral(C64::new(0.0, 0.0), C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn simplex_examples() {
        let spec = QuadratureSpec::default();
        let norm = |k: usize| (2.0 * PI).powf(-((k + 1) as f64) / 2.0);
        let v = simplex_integrate(1, |_| C64::from(norm(1)), 0.0, 1.0, SimplexWeight::InverseSqrt, &spec)
            .unwrap();
        assert!((v.value.re - 0.5).abs() < 1e-14);
        let v = simplex_integrate(2, |_| C64::from(norm(2)), 0.0, 1.0, SimplexWeight::InverseSqrt, &spec)
            .unwrap();
        assert!((v.value.re - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-14);
        let v = simplex_integrate(1, |_| C64::from(1.0), 2.0, 3.5, SimplexWeight::Flat, &spec).unwrap();
        assert!((v.value.re - 1.5).abs() < 1e-14);
    }

    #[test]
    fn tensor_cap_is_reported() {
        let spec = QuadratureSpec::default();
        let r = simplex_integrate(5, |_| C64::from(1.0), 0.0, 1.0, SimplexWeight::InverseSqrt, &spec);
        assert!(matches!(r, Err(Error::TensorDimension { k: 5, cap: 4 })));
    }

    #[test]
    fn hypercube_examples() {
        let spec = QuadratureSpec::default();
        let v = hypercube_integrate(2, |_| C64::from(1.0), 0.0, 2.0, &spec, false).unwrap();
        assert!((v.value.re - 4.0).abs() < 1e-13);
        let v = hypercube_integrate(1, |s| C64::from(s[0]), 0.0, 1.0, &spec, false).unwrap();
        assert!((v.value.re - 0.5).abs() < 1e-15);
        let f = |s: &[f64]| C64::from(s.iter().map(|x| x * x).sum::<f64>());
        let a = hypercube_integrate(3, f, 0.0, 1.0, &spec, false).unwrap();
        let b = hypercube_integrate(3, f, 0.0, 1.0, &spec, true).unwrap();
        assert!((a.value - b.value).norm() < 1e-13 && (a.value.re - 1.0).abs() < 1e-13);
    }
}
