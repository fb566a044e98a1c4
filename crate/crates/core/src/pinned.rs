//! Kernels with `k` delta pins and `n − k` exponential insertions.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::model::{
    forcing_norm, piecewise_integrals, PropagatorQuery, ShiftedArgument, TestFunction,
};
use crate::C64;

/// Real part of an exponent above which evaluation reports overflow.
pub const EXPONENT_CAP: f64 = 700.0;

/// Ordered pin times `t0 < τ_1 < … < τ_k < t` with pin positions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PinConfiguration {
    pub taus: Vec<f64>,
    pub xs: Vec<f64>,
}

impl PinConfiguration {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(taus: Vec<f64>, xs: Vec<f64>) -> Result<Self> {
        if taus.len() != xs.len() {
            return Err(Error::Invalid(format!(
                "{} pin times but {} pin positions",
                taus.len(),
                xs.len()
            )));
        }
        if taus.iter().chain(&xs).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("pin data must be finite".into()));
        }
        Ok(Self { taus, xs })
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Check strict ordering inside `(t0, t)`.
    pub fn check(&self, q: &PropagatorQuery) -> Result<()> {
        let mut prev = q.t0;
        for &tau in self.taus.iter().chain(std::iter::once(&q.t)) {
            if tau <= prev {
                return Err(Error::Domain(format!(
                    "pin times must satisfy t0 < τ_1 < … < τ_k < t (t0 = {}, t = {}, taus = {:?})",
                    q.t0, q.t, self.taus
                )));
            }
            prev = tau;
        }
        Ok(())
    }

    /// Times `τ_0 = t0, τ_1, …, τ_{k+1} = t` and positions `x_0 = y, …, x_{k+1} = x`.
    fn with_endpoints(&self, q: &PropagatorQuery) -> (Vec<f64>, Vec<f64>) {
        let mut taus = Vec::with_capacity(self.len() + 2);
        taus.push(q.t0);
        taus.extend_from_slice(&self.taus);
        taus.push(q.t);
        let mut xs = Vec::with_capacity(self.len() + 2);
        xs.push(q.y);
        xs.extend_from_slice(&self.xs);
        xs.push(q.x);
        (taus, xs)
    }
}

/// Insertion times `s_l ∈ [t0, t]` with rates `α_l`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpInsertion {
    pub ss: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl ExpInsertion {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(ss: Vec<f64>, alphas: Vec<f64>) -> Result<Self> {
        if ss.len() != alphas.len() {
            return Err(Error::Invalid(format!(
                "{} insertion times but {} rates",
                ss.len(),
                alphas.len()
            )));
        }
        if ss.iter().chain(&alphas).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("insertion data must be finite".into()));
        }
        Ok(Self { ss, alphas })
    }

    pub fn len(&self) -> usize {
        self.ss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ss.is_empty()
    }

    pub fn check(&self, q: &PropagatorQuery) -> Result<()> {
        match self.ss.iter().find(|s| **s < q.t0 || **s > q.t) {
            Some(s) => Err(Error::Domain(format!(
                "insertion time {s} outside [{}, {}]",
                q.t0, q.t
            ))),
            None => Ok(()),
        }
    }
}

fn i_times(z: C64) -> C64 {
    C64::new(-z.im, z.re)
}

/// Pinned free transform: product of free factors between consecutive pins.
pub fn multi_delta_transform(
    xi: &ShiftedArgument,
    pins: &PinConfiguration,
    q: &PropagatorQuery,
) -> Result<C64> {
    pins.check(q)?;
    let (taus, xs) = pins.with_endpoints(q);
    let (_, all_sq) = match xi.support() {
        Some((lo, hi)) => piecewise_integrals(xi, lo, hi),
        None => (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
    };
    let mut log_value = i_times(all_sq) * -0.5;
    for j in 1..taus.len() {
        let h = taus[j] - taus[j - 1];
        let (p, _) = piecewise_integrals(xi, taus[j - 1], taus[j]);
        let shift = p + (xs[j] - xs[j - 1]);
        log_value += C64::new(-0.5 * (2.0 * PI * h).ln(), -FRAC_PI_4)
            + i_times(shift * shift) / (2.0 * h);
    }
    Ok(log_value.exp())
}

/// θ restricted to the propagation window, in the form the kernels consume.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Window<'a> {
    /// `θ(s) = a + b (s − t0)` on `[t0, t]`; valid for complex `s`.
    Affine { t0: f64, a: C64, b: C64 },
    /// Arbitrary piecewise-linear θ; only real arguments are meaningful.
    General(&'a TestFunction),
}

impl Window<'_> {
    /// `∫_lo^hi θ`.
    pub(crate) fn integral(&self, lo: C64, hi: C64) -> C64 {
        match *self {
            Window::Affine { t0, a, b } => {
                let (u, v) = (lo - t0, hi - t0);
                a * (v - u) + b * (v * v - u * u) * 0.5
            }
            Window::General(theta) => {
                let (lo, hi) = (lo.re, hi.re);
                if hi >= lo {
                    theta.integrals(lo, hi).0
                } else {
                    -theta.integrals(hi, lo).0
                }
            }
        }
    }
}

/// Precomputed θ data shared by every evaluation of one term.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ThetaData<'a> {
    /// `∫_ℝ θ²`.
    pub all_sq: C64,
    pub window: Window<'a>,
}

impl<'a> ThetaData<'a> {
    pub(crate) fn new(theta: &'a TestFunction, q: &PropagatorQuery) -> Self {
        let all_sq = match theta.support() {
            Some((lo, hi)) => theta.integrals(lo, hi).1,
            None => C64::new(0.0, 0.0),
        };
        Self {
            all_sq,
            window: Self::window_of(theta, q),
        }
    }

    fn window_of(theta: &'a TestFunction, q: &PropagatorQuery) -> Window<'a> {
        match theta.affine_on(q.t0, q.t) {
            Some((a, b)) => Window::Affine { t0: q.t0, a, b },
            None => Window::General(theta),
        }
    }

    pub(crate) fn is_affine(&self) -> bool {
        matches!(self.window, Window::Affine { .. })
    }
}

/// Exponent of the pinned/inserted kernel at real configuration points, without
/// the `Π (2πiΔ_j)^{-1/2}` prefactor.
///
/// `taus`/`xs` include the endpoints; `ss`/`alphas` may be in any order.
pub(crate) fn phi_exponent(
    theta: &ThetaData,
    taus: &[f64],
    xs: &[f64],
    ss: &[f64],
    alphas: &[f64],
) -> C64 {
    let t = *taus.last().expect("endpoints present");
    let x = *xs.last().expect("endpoints present");
    let w = &theta.window;

    let mut cross = C64::new(0.0, 0.0);
    let mut overlap = 0.0;
    for (l, (&s, &a)) in ss.iter().zip(alphas).enumerate() {
        cross += w.integral(C64::from(s), C64::from(t)) * a;
        overlap += a * a * (t - s);
        for (&s2, &a2) in ss[..l].iter().zip(alphas) {
            overlap += 2.0 * a * a2 * (t - s.max(s2));
        }
    }
    let alpha_sum: f64 = alphas.iter().sum();

    let mut e = i_times(theta.all_sq) * -0.5 + cross + C64::new(0.0, 0.5 * overlap) + x * alpha_sum;
    for j in 1..taus.len() {
        let (lo, hi) = (taus[j - 1], taus[j]);
        let h = hi - lo;
        let p = w.integral(C64::from(lo), C64::from(hi));
        let qj: f64 = ss
            .iter()
            .zip(alphas)
            .map(|(&s, &a)| a * (hi - lo.max(s)).max(0.0))
            .sum();
        let shift = p + C64::new(xs[j] - xs[j - 1], qj);
        e += i_times(shift * shift) / (2.0 * h);
    }
    e
}

/// Log of `Π_j (2πiΔ_j)^{-1/2}`.
pub(crate) fn log_prefactor(taus: &[f64]) -> C64 {
    let segments = (taus.len() - 1) as f64;
    let re: f64 = taus
        .windows(2)
        .map(|w| -0.5 * (2.0 * PI * (w[1] - w[0])).ln())
        .sum();
    C64::new(re, -FRAC_PI_4 * segments)
}

/// Pinned kernel at the shifted argument `θ + iΣα_l 1_{(s_l,t]}`, times `e^{xΣα}`.
pub fn phi_transform(
    theta: &TestFunction,
    pins: &PinConfiguration,
    ins: &ExpInsertion,
    q: &PropagatorQuery,
) -> Result<C64> {
    phi_transform_capped(theta, pins, ins, q, EXPONENT_CAP)
}

pub fn phi_transform_capped(
    theta: &TestFunction,
    pins: &PinConfiguration,
    ins: &ExpInsertion,
    q: &PropagatorQuery,
    cap: f64,
) -> Result<C64> {
    pins.check(q)?;
    ins.check(q)?;
    let data = ThetaData::new(theta, q);
    let (taus, xs) = pins.with_endpoints(q);
    let e = phi_exponent(&data, &taus, &xs, &ins.ss, &ins.alphas);
    if e.re > cap {
        return Err(Error::Overflow {
            n: pins.len() + ins.len(),
            k: pins.len(),
            assignment: None,
            exponent: e.re,
            cap,
        });
    }
    Ok((e + log_prefactor(&taus)).exp())
}

/// Majorant of `|phi_transform|` independent of the insertion times.
pub fn pointwise_bound(
    theta: &TestFunction,
    pins: &PinConfiguration,
    ins: &ExpInsertion,
    q: &PropagatorQuery,
) -> f64 {
    let (taus, xs) = pins.with_endpoints(q);
    let norm = forcing_norm(theta, q.t0, q.t);
    let n2 = norm * norm;
    let alpha_abs: f64 = ins.alphas.iter().map(|a| a.abs()).sum();
    let m = xs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let log_bound = log_prefactor(&taus).re
        + 2.0 * n2
        + (q.x.abs() + q.dt() + n2) * alpha_abs
        + 4.0 * m * alpha_abs
        + m * m;
    log_bound.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_kernel::{free_green, free_transform};

    fn q(x: f64, y: f64, t0: f64, t: f64) -> PropagatorQuery {
        PropagatorQuery::new(x, y, t0, t)
    }

    fn theta() -> TestFunction {
        TestFunction::new(vec![
            (-0.3, C64::new(0.0, 0.0)),
            (0.35, C64::new(0.6, -0.4)),
            (0.8, C64::new(-0.2, 0.1)),
            (1.4, C64::new(0.0, 0.0)),
        ])
        .unwrap()
    }

    #[test]
    fn no_pins_reduces_to_free_transform() {
        let th = theta();
        let qq = q(0.4, -0.7, 0.0, 1.0);
        let a = multi_delta_transform(&ShiftedArgument::plain(&th), &PinConfiguration::empty(), &qq)
            .unwrap();
        let b = free_transform(&ShiftedArgument::plain(&th), &qq).unwrap();
        assert!((a - b).norm() < 1e-14 * b.norm());
        let c = phi_transform(&th, &PinConfiguration::empty(), &ExpInsertion::empty(), &qq).unwrap();
        assert!((c - b).norm() < 1e-14 * b.norm());
    }

    #[test]
    fn symmetric_single_pin_value() {
        let zero = TestFunction::zero();
        let pins = PinConfiguration::new(vec![0.5], vec![0.0]).unwrap();
        let v = multi_delta_transform(&ShiftedArgument::plain(&zero), &pins, &q(0.0, 0.0, 0.0, 1.0))
            .unwrap();
        assert!((v - C64::new(0.0, -1.0 / PI)).norm() < 1e-15);
    }

    #[test]
    fn single_pin_is_product_of_free_kernels() {
        let zero = TestFunction::zero();
        let xi = ShiftedArgument::plain(&zero);
        let pins = PinConfiguration::new(vec![0.3], vec![0.8]).unwrap();
        let qq = q(-0.5, 0.2, 0.0, 1.1);
        let v = multi_delta_transform(&xi, &pins, &qq).unwrap();
        let product = free_green(&xi, &q(-0.5, 0.8, 0.3, 1.1)) * free_green(&xi, &q(0.8, 0.2, 0.0, 0.3));
        assert!((v - product).norm() < 1e-12 * product.norm());
    }

    #[test]
    fn explicit_formula_matches_shifted_argument_route() {
        let th = theta();
        let qq = q(0.3, -0.4, 0.0, 1.0);
        let pins = PinConfiguration::new(vec![0.2, 0.55, 0.9], vec![0.1, -0.3, 0.25]).unwrap();
        let ins = ExpInsertion::new(vec![0.1, 0.6, 0.95, 0.3], vec![0.5, -0.8, 1.2, 0.3]).unwrap();
        let direct = phi_transform(&th, &pins, &ins, &qq).unwrap();
        let steps: Vec<(f64, f64)> = ins.ss.iter().copied().zip(ins.alphas.iter().copied()).collect();
        let shifted = ShiftedArgument::new(&th, steps, qq.t).unwrap();
        let alpha_sum: f64 = ins.alphas.iter().sum();
        let routed = multi_delta_transform(&shifted, &pins, &qq).unwrap() * (qq.x * alpha_sum).exp();
        assert!((direct - routed).norm() < 1e-12 * routed.norm(), "{direct} vs {routed}");
    }

    #[test]
    fn zero_rate_insertion_disappears() {
        let zero = TestFunction::zero();
        let qq = q(0.7, 0.1, 0.0, 2.0);
        let ins = ExpInsertion::new(vec![0.4], vec![0.0]).unwrap();
        let a = phi_transform(&zero, &PinConfiguration::empty(), &ins, &qq).unwrap();
        let b = free_transform(&ShiftedArgument::plain(&zero), &qq).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn violated_ordering_is_a_domain_error() {
        let zero = TestFunction::zero();
        let pins = PinConfiguration::new(vec![0.6, 0.4], vec![0.0, 0.0]).unwrap();
        let r = phi_transform(&zero, &pins, &ExpInsertion::empty(), &q(0.0, 0.0, 0.0, 1.0));
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn overflow_names_configuration() {
        let zero = TestFunction::zero();
        let pins = PinConfiguration::new(vec![0.5], vec![1.0]).unwrap();
        let ins = ExpInsertion::new(vec![0.5, 0.5], vec![400.0, 400.0]).unwrap();
        match phi_transform(&zero, &pins, &ins, &q(1.0, 0.0, 0.0, 1.0)) {
            Err(Error::Overflow { n, k, .. }) => assert_eq!((n, k), (3, 1)),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn bound_examples() {
        let zero = TestFunction::zero();
        let qq = q(1.5, -0.5, 0.0, 2.0);
        let b = pointwise_bound(&zero, &PinConfiguration::empty(), &ExpInsertion::empty(), &qq);
        let expect = (1.5f64 * 1.5).exp() / (2.0 * PI * 2.0).sqrt();
        assert!((b - expect).abs() < 1e-14 * expect);

        let b1 = pointwise_bound(&zero, &PinConfiguration::empty(), &ExpInsertion::new(vec![0.1], vec![0.7]).unwrap(), &qq);
        let b2 = pointwise_bound(&zero, &PinConfiguration::empty(), &ExpInsertion::new(vec![1.9], vec![0.7]).unwrap(), &qq);
        assert_eq!(b1, b2);
    }
}
