//! Free propagator with linear forcing and finite-difference residual checks.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};
use crate::model::{
    eval_potential, piecewise_integrals, DeltaAtom, PotentialSpec, PropagatorQuery,
    ShiftedArgument, TestFunction,
};
use crate::C64;

/// A kernel value together with `ln |value|` for under/overflow tracking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: C64,
    pub log_magnitude: f64,
}

impl KernelValue {
    pub fn from_log(log_value: C64) -> Self {
        Self {
            value: log_value.exp(),
            log_magnitude: log_value.re,
        }
    }
}

/// `(2πiΔ)^{-1/2} = e^{-iπ/4}/√(2πΔ)` for `Δ > 0`.
pub fn free_prefactor(dt: f64) -> C64 {
    C64::from_polar((2.0 * PI * dt).sqrt().recip(), -FRAC_PI_4)
}

fn i_times(z: C64) -> C64 {
    C64::new(-z.im, z.re)
}

/// T-transform of the free integrand at a (possibly shifted) argument.
pub fn free_transform(xi: &ShiftedArgument, q: &PropagatorQuery) -> Result<C64> {
    if !q.is_forward() {
        return Err(Error::Domain(format!(
            "free transform needs t > t0, got t0 = {}, t = {}",
            q.t0, q.t
        )));
    }
    let dt = q.dt();
    let (_, all_sq) = match xi.support() {
        Some((lo, hi)) => piecewise_integrals(xi, lo, hi),
        None => (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
    };
    let (window, _) = piecewise_integrals(xi, q.t0, q.t);
    let shift = window + (q.x - q.y);
    let exponent = i_times(all_sq) * -0.5 + i_times(shift * shift) / (2.0 * dt);
    Ok(free_prefactor(dt) * exponent.exp())
}

/// Free Green function forced by `ξ`, zero for `t ≤ t0`.
pub fn free_green(xi: &ShiftedArgument, q: &PropagatorQuery) -> C64 {
    free_green_value(xi, q).value
}

pub fn free_green_value(xi: &ShiftedArgument, q: &PropagatorQuery) -> KernelValue {
    if !q.is_forward() {
        return KernelValue {
            value: C64::new(0.0, 0.0),
            log_magnitude: f64::NEG_INFINITY,
        };
    }
    let dt = q.dt();
    let (window, window_sq) = piecewise_integrals(xi, q.t0, q.t);
    let shift = window + (q.x - q.y);
    let boundary = xi.eval(q.t0) * q.y - xi.eval(q.t) * q.x;
    let log_value = C64::new(-0.5 * (2.0 * PI * dt).ln(), -FRAC_PI_4)
        + i_times(window_sq) * -0.5
        + i_times(shift * shift) / (2.0 * dt)
        + i_times(boundary);
    KernelValue::from_log(log_value)
}

/// Finite-difference stencil for [`schrodinger_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    #[default]
    Central3,
    Central5,
}

/// Residual magnitude plus a warning when the steps under-resolve the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub residual: f64,
    pub warning: Option<String>,
}

/// `|i∂ₜK + ½∂ₓ²K − θ'(t)·x·K − V₁(x)·K|` at `(q.x, q.t)`.
///
/// `kernel(x, t)` must hold the source point fixed at `(q.y, q.t0)`.
pub fn schrodinger_residual<F>(
    kernel: F,
    q: &PropagatorQuery,
    theta: &TestFunction,
    v: &PotentialSpec,
    h_x: f64,
    h_t: f64,
    stencil: Stencil,
) -> Result<ResidualReport>
where
    F: Fn(f64, f64) -> Result<C64>,
{
    if !(h_x > 0.0 && h_t > 0.0) {
        return Err(Error::Invalid("finite-difference steps must be positive".into()));
    }
    if q.dt() < 10.0 * h_t {
        return Err(Error::Domain(format!(
            "t - t0 = {} is within 10 time steps of the source",
            q.dt()
        )));
    }
    if let Some(a) = v
        .delta_atoms
        .iter()
        .find(|a| (q.x - a.location).abs() < 10.0 * h_x)
    {
        return Err(Error::Domain(format!(
            "x = {} is within 10 spatial steps of the delta atom at {}",
            q.x, a.location
        )));
    }
    let (x, t) = (q.x, q.t);
    let k0 = kernel(x, t)?;
    let (dt_k, dxx_k, dx_k) = match stencil {
        Stencil::Central3 => {
            let (tp, tm) = (kernel(x, t + h_t)?, kernel(x, t - h_t)?);
            let (xp, xm) = (kernel(x + h_x, t)?, kernel(x - h_x, t)?);
            (
                (tp - tm) / (2.0 * h_t),
                (xp - k0 * 2.0 + xm) / (h_x * h_x),
                (xp - xm) / (2.0 * h_x),
            )
        }
        Stencil::Central5 => {
            let (tp, tm) = (kernel(x, t + h_t)?, kernel(x, t - h_t)?);
            let (tpp, tmm) = (kernel(x, t + 2.0 * h_t)?, kernel(x, t - 2.0 * h_t)?);
            let (xp, xm) = (kernel(x + h_x, t)?, kernel(x - h_x, t)?);
            let (xpp, xmm) = (kernel(x + 2.0 * h_x, t)?, kernel(x - 2.0 * h_x, t)?);
            (
                (-tpp + tp * 8.0 - tm * 8.0 + tmm) / (12.0 * h_t),
                (-xpp + xp * 16.0 - k0 * 30.0 + xm * 16.0 - xmm) / (12.0 * h_x * h_x),
                (-xpp + xp * 8.0 - xm * 8.0 + xmm) / (12.0 * h_x),
            )
        }
    };
    let forcing = theta.slope_at(t) * x;
    let smooth = eval_potential(v, x)?;
    let r = i_times(dt_k) + dxx_k * 0.5 - (forcing + smooth) * k0;

    let mut warning = None;
    let scale = k0.norm();
    if scale > 0.0 {
        let kx = dx_k.norm() / scale * h_x;
        let kt = dt_k.norm() / scale * h_t;
        if kx > 0.3 || kt > 0.3 {
            warning = Some(format!(
                "steps under-resolve the kernel: |K_x/K| h_x = {kx:.3}, |K_t/K| h_t = {kt:.3}"
            ));
        }
    }
    Ok(ResidualReport {
        residual: r.norm(),
        warning,
    })
}

/// `|∂ₓK(y⁺) − ∂ₓK(y⁻) − 2·g·g_j·K(y)|` at a delta atom, one-sided second-order differences.
///
/// `kernel(x)` evaluates the propagator at the time of interest.
pub fn delta_jump_residual<F>(kernel: F, atom: &DeltaAtom, g: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<C64>,
{
    let y = atom.location;
    let k0 = kernel(y)?;
    let right = (k0 * -3.0 + kernel(y + h)? * 4.0 - kernel(y + 2.0 * h)?) / (2.0 * h);
    let left = (k0 * 3.0 - kernel(y - h)? * 4.0 + kernel(y - 2.0 * h)?) / (2.0 * h);
    Ok((right - left - k0 * (2.0 * g * atom.weight)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(x: f64, y: f64, t0: f64, t: f64) -> PropagatorQuery {
        PropagatorQuery::new(x, y, t0, t)
    }

    #[test]
    fn closed_form_examples() {
        let zero = TestFunction::zero();
        let xi = ShiftedArgument::plain(&zero);
        let v = free_transform(&xi, &q(0.3, 0.3, 0.0, 1.0)).unwrap();
        let expect = C64::new(0.28209479177387814, -0.28209479177387814);
        assert!((v - expect).norm() < 1e-15);

        let v = free_transform(&xi, &q(1.0, 0.0, 0.0, 1.0)).unwrap();
        let expect = free_prefactor(1.0) * C64::new(0.0, 0.5).exp();
        assert!((v - expect).norm() < 1e-15);

        assert!(free_transform(&xi, &q(0.0, 0.0, 1.0, 1.0)).is_err());
        assert_eq!(free_green(&xi, &q(0.0, 0.0, 1.0, 0.5)), C64::new(0.0, 0.0));
        assert_eq!(free_green(&xi, &q(0.0, 0.0, 1.0, 1.0)), C64::new(0.0, 0.0));
    }

    #[test]
    fn green_equals_transform_at_zero_argument() {
        let zero = TestFunction::zero();
        let xi = ShiftedArgument::plain(&zero);
        for &(x, y, dt) in &[(0.0, 0.0, 1.0), (1.5, -0.3, 0.2), (-2.0, 4.0, 7.0)] {
            let qq = q(x, y, 0.5, 0.5 + dt);
            let a = free_green(&xi, &qq);
            let b = free_transform(&xi, &qq).unwrap();
            assert!((a - b).norm() <= 1e-14 * b.norm());
        }
    }

    #[test]
    fn forced_kernel_solves_the_forced_equation() {
        let theta = TestFunction::new(vec![
            (-0.5, C64::new(0.0, 0.0)),
            (0.4, C64::new(0.7, 0.2)),
            (2.0, C64::new(0.0, 0.0)),
        ])
        .unwrap();
        let xi = ShiftedArgument::plain(&theta);
        let qq = q(0.4, -0.2, 0.0, 1.0);
        let kernel = |x: f64, t: f64| Ok(free_green(&xi, &q(x, qq.y, qq.t0, t)));
        let free = PotentialSpec::free();
        let r1 = schrodinger_residual(kernel, &qq, &theta, &free, 1e-2, 1e-2, Stencil::Central3)
            .unwrap()
            .residual;
        let r2 = schrodinger_residual(kernel, &qq, &theta, &free, 5e-3, 5e-3, Stencil::Central3)
            .unwrap()
            .residual;
        let order = (r1 / r2).log2();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn residual_rejects_points_near_source_and_atoms() {
        let zero = TestFunction::zero();
        let xi = ShiftedArgument::plain(&zero);
        let kernel = |x: f64, t: f64| Ok(free_green(&xi, &q(x, 0.0, 0.0, t)));
        let free = PotentialSpec::free();
        let near = q(0.0, 0.0, 0.0, 0.05);
        assert!(schrodinger_residual(kernel, &near, &zero, &free, 0.01, 0.01, Stencil::Central3)
            .is_err());
        let delta = PotentialSpec::new(
            vec![],
            vec![DeltaAtom {
                location: 0.0,
                weight: 1.0,
            }],
            1.0,
        )
        .unwrap();
        let at_atom = q(0.05, 0.0, 0.0, 1.0);
        assert!(
            schrodinger_residual(kernel, &at_atom, &zero, &delta, 0.01, 0.01, Stencil::Central3)
                .is_err()
        );
    }
}
