//! Independent references: a Crank–Nicolson grid solver with regularised
//! deltas, the closed-form first Born term for one exponential atom, and exact
//! free wave-packet evolution.

use std::f64::consts::{FRAC_PI_4, PI};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{eval_potential, PotentialSpec, PropagatorQuery, TestFunction};
use crate::quadrature::{gauss_legendre_unit, gaussian_integral, integrate_adaptive, QuadratureSpec};
use crate::series::{propagator, StopRule};
use crate::C64;

/// Initial state `(2πσ²)^{-1/4} exp(−(y−c)²/(4σ²) + i p y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub center: f64,
    pub width: f64,
    pub momentum: f64,
}

impl Packet {
    pub fn eval(&self, y: f64) -> C64 {
        let s2 = self.width * self.width;
        let amp = (2.0 * PI * s2).powf(-0.25);
        C64::new(-(y - self.center).powi(2) / (4.0 * s2), self.momentum * y).exp() * amp
    }
}

/// Grid, time steps and delta regularisation for the Crank–Nicolson oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
    pub delta_width: f64,
    pub packet: Packet,
}

impl GridSpec {
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nx).map(|i| self.x_min + dx * i as f64).collect()
    }

    /// Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > self.x_min) {
            return Err(Error::Invalid("grid needs x_max > x_min".into()));
        }
        if self.nx < 16 || self.nt < 16 {
            return Err(Error::Invalid("grid needs nx, nt >= 16".into()));
        }
        if !(self.packet.width > 0.0) {
            return Err(Error::Invalid("packet width must be positive".into()));
        }
        if !(self.delta_width > 0.0) || self.delta_width < 2.0 * self.dx() {
            return Err(Error::Invalid(format!(
                "delta_width {} must be positive and at least two grid spacings ({})",
                self.delta_width,
                2.0 * self.dx()
            )));
        }
        Ok(())
    }
}

/// Grid wavefunction with the discrete norms at start and end.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub xs: Vec<f64>,
    pub psi: Vec<C64>,
    pub norm_initial: f64,
    pub norm_final: f64,
}

/// Potential magnitude above which the grid potential is clipped.
pub const POTENTIAL_CAP: f64 = 1e6;

/// Amplitude allowed at the outermost grid points.
pub const CONTAINMENT_TOL: f64 = 1e-8;

fn grid_potential(p: &PotentialSpec, xs: &[f64], width: f64) -> Vec<C64> {
    let norm = 1.0 / (width * (2.0 * PI).sqrt());
    xs.iter()
        .map(|&x| {
            let smooth = match eval_potential(p, x) {
                Ok(v) if v.norm() <= POTENTIAL_CAP => v,
                Ok(v) => v * (POTENTIAL_CAP / v.norm()),
                Err(_) => C64::from(POTENTIAL_CAP),
            };
            let spikes: f64 = p
                .delta_atoms
                .iter()
                .map(|a| a.weight * norm * (-(x - a.location).powi(2) / (2.0 * width * width)).exp())
                .sum();
            smooth + p.g * spikes
        })
        .collect()
}

fn discrete_norm(psi: &[C64], dx: f64) -> f64 {
    (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).sqrt()
}

fn edge_amplitude(psi: &[C64]) -> f64 {
    let n = psi.len();
    [psi[0], psi[1], psi[n - 2], psi[n - 1]]
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Crank–Nicolson evolution of the packet from `t0` to `t` with Dirichlet walls.
pub fn evolve_packet(p: &PotentialSpec, grid: &GridSpec, t0: f64, t: f64) -> Result<Wavefunction> {
    evolve_with_width(p, grid, t0, t, grid.delta_width)
}

fn evolve_with_width(
    p: &PotentialSpec,
    grid: &GridSpec,
    t0: f64,
    t: f64,
    width: f64,
) -> Result<Wavefunction> {
    grid.validate()?;
    p.validate()?;
    if t < t0 {
        return Err(Error::Domain("evolution needs t >= t0".into()));
    }
    let xs = grid.xs();
    let dx = grid.dx();
    let n = xs.len();
    let tau = (t - t0) / grid.nt as f64;
    let v = grid_potential(p, &xs, width);

    let mut psi: Vec<C64> = xs.iter().map(|&x| grid.packet.eval(x)).collect();
    let amplitude = edge_amplitude(&psi);
    if amplitude >= CONTAINMENT_TOL {
        return Err(Error::BoundaryContamination { step: 0, amplitude });
    }
    let norm_initial = discrete_norm(&psi, dx);

    // (1 + iτH/2) ψ' = (1 − iτH/2) ψ, H = −½D² + V.
    let half = C64::new(0.0, 0.5 * tau);
    let off = half * (-0.5 / (dx * dx));
    let diag_a: Vec<C64> = v.iter().map(|vi| C64::from(1.0) + half * (1.0 / (dx * dx) + vi)).collect();
    let diag_b: Vec<C64> = v.iter().map(|vi| C64::from(1.0) - half * (1.0 / (dx * dx) + vi)).collect();

    // Thomas factorisation of the constant matrix A.
    let mut c_prime = vec![C64::new(0.0, 0.0); n];
    let mut denom = vec![C64::new(0.0, 0.0); n];
    denom[0] = diag_a[0];
    c_prime[0] = off / denom[0];
    for i in 1..n {
        denom[i] = diag_a[i] - off * c_prime[i - 1];
        c_prime[i] = off / denom[i];
    }

    let mut rhs = vec![C64::new(0.0, 0.0); n];
    for step in 1..=grid.nt {
        for i in 0..n {
            let left = if i > 0 { psi[i - 1] } else { C64::new(0.0, 0.0) };
            let right = if i + 1 < n { psi[i + 1] } else { C64::new(0.0, 0.0) };
            rhs[i] = diag_b[i] * psi[i] - off * (left + right);
        }
        psi[0] = rhs[0] / denom[0];
        for i in 1..n {
            psi[i] = (rhs[i] - off * psi[i - 1]) / denom[i];
        }
        for i in (0..n - 1).rev() {
            let next = psi[i + 1];
            psi[i] -= c_prime[i] * next;
        }
        let amplitude = edge_amplitude(&psi);
        if amplitude >= CONTAINMENT_TOL {
            return Err(Error::BoundaryContamination { step, amplitude });
        }
    }
    let norm_final = discrete_norm(&psi, dx);
    Ok(Wavefunction {
        xs,
        psi,
        norm_initial,
        norm_final,
    })
}

/// Delta-width extrapolation result.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolated {
    pub wave: Wavefunction,
    /// `‖ψ(σ) − ψ(σ/2)‖`, `‖ψ(σ/2) − ψ(σ/4)‖` in discrete L²; empty without deltas.
    pub differences: Vec<f64>,
}

/// Runs at widths σ, σ/2, σ/4 and removes the `O(σ)` and `O(σ²)` error terms.
pub fn evolve_extrapolated(p: &PotentialSpec, grid: &GridSpec, t0: f64, t: f64) -> Result<Extrapolated> {
    if p.delta_atoms.is_empty() || p.g == 0.0 {
        return Ok(Extrapolated {
            wave: evolve_packet(p, grid, t0, t)?,
            differences: Vec::new(),
        });
    }
    let s = grid.delta_width;
    let check = GridSpec {
        delta_width: s / 4.0,
        ..*grid
    };
    check.validate()?;
    let runs: Vec<Wavefunction> = [s, s / 2.0, s / 4.0]
        .par_iter()
        .map(|&w| evolve_with_width(p, grid, t0, t, w))
        .collect::<Result<Vec<_>>>()?;
    let dx = grid.dx();
    let diff = |a: &[C64], b: &[C64]| {
        let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        discrete_norm(&d, dx)
    };
    let differences = vec![diff(&runs[0].psi, &runs[1].psi), diff(&runs[1].psi, &runs[2].psi)];
    let psi: Vec<C64> = (0..runs[0].psi.len())
        .map(|i| (runs[0].psi[i] - runs[1].psi[i] * 6.0 + runs[2].psi[i] * 8.0) / 3.0)
        .collect();
    let norm_final = discrete_norm(&psi, dx);
    Ok(Extrapolated {
        wave: Wavefunction {
            xs: runs[0].xs.clone(),
            psi,
            norm_initial: runs[0].norm_initial,
            norm_final,
        },
        differences,
    })
}

/// Exact free evolution of the packet, `∫ K₀(x,t|y,t0) ψ₀(y) dy`.
pub fn free_packet_exact(packet: &Packet, x: f64, t0: f64, t: f64) -> Result<C64> {
    if t <= t0 {
        return Ok(packet.eval(x));
    }
    let dt = t - t0;
    let s2 = packet.width * packet.width;
    let c = packet.center;
    let a = C64::new(1.0 / (2.0 * dt), 1.0 / (4.0 * s2));
    let b = C64::new(c / (2.0 * s2), packet.momentum - x / dt);
    let constant = C64::new(-c * c / (4.0 * s2), x * x / (2.0 * dt));
    let pref = C64::from_polar((2.0 * PI * dt).sqrt().recip(), -FRAC_PI_4) * (2.0 * PI * s2).powf(-0.25);
    Ok(gaussian_integral(a, b)? * constant.exp() * pref)
}

/// Packet-smeared series propagator at the points `xs`.
///
/// The `y` integral uses `y_points` Gauss–Legendre nodes on `center ± 8·width`.
#[allow(clippy::too_many_arguments)]
pub fn propagate_packet_via_series(
    p: &PotentialSpec,
    t0: f64,
    t: f64,
    theta: &TestFunction,
    packet: &Packet,
    xs: &[f64],
    spec: &QuadratureSpec,
    stop: &StopRule,
    y_points: usize,
) -> Result<Vec<C64>> {
    let rule = gauss_legendre_unit(y_points);
    let half = 8.0 * packet.width;
    let lo = packet.center - half;
    let ys: Vec<(f64, C64)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(u, w)| {
            let y = lo + 2.0 * half * u;
            (y, packet.eval(y) * (2.0 * half * w))
        })
        .collect();
    xs.par_iter()
        .map(|&x| {
            let mut acc = C64::new(0.0, 0.0);
            for &(y, w) in &ys {
                let q = PropagatorQuery::new(x, y, t0, t);
                acc += propagator(theta, p, &q, spec, stop)?.value() * w;
            }
            Ok(acc)
        })
        .collect()
}

/// First Born term `−ic ∫ds ∫dz K₀(x,t|z,s) e^{αz} K₀(z,s|y,t0)` for one exponential atom.
pub fn born1_exp(alpha: f64, c: C64, q: &PropagatorQuery) -> Result<C64> {
    if !q.is_forward() {
        return Err(Error::Domain("Born term needs t > t0".into()));
    }
    if c == C64::new(0.0, 0.0) {
        return Ok(C64::new(0.0, 0.0));
    }
    let total = q.dt();
    let chirp = C64::new(0.0, (q.x - q.y).powi(2) / (2.0 * total)).exp();
    let slice = |s: f64| -> C64 {
        let (t1, t2) = (q.t - s, s - q.t0);
        let centre = (q.x * t2 + q.y * t1) / total;
        let a = C64::from(total / (2.0 * t1 * t2));
        // Im a = 0, Re a > 0: the Fresnel branch is always defined here.
        let z = gaussian_integral(a, C64::from(alpha)).expect("nonzero real coefficient");
        let pref = C64::new(0.0, -1.0) / (2.0 * PI * (t1 * t2).sqrt());
        pref * z * (alpha * centre).exp()
    };
    let (v, _) = integrate_adaptive(slice, q.t0, q.t, 1e-14, 1e-12, 4000);
    Ok(C64::new(0.0, -1.0) * c * chirp * v)
}

/// `‖a − b‖ / ‖b‖` over paired samples.
pub fn l2_relative(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Series against grid comparison on the region where the oracle is significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub xs: Vec<f64>,
    pub series: Vec<C64>,
    pub oracle: Vec<C64>,
    pub discrepancy: f64,
    pub richardson_differences: Vec<f64>,
    pub norm_drift: f64,
}

/// Knobs for [`compare_with_series`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// Keep grid points where `|ψ| ≥ window · max |ψ|`.
    pub window: f64,
    /// Upper limit on compared x points.
    pub max_points: usize,
    pub y_points: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            window: 1e-3,
            max_points: 160,
            y_points: 128,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn compare_with_series(
    p: &PotentialSpec,
    grid: &GridSpec,
    t0: f64,
    t: f64,
    theta: &TestFunction,
    spec: &QuadratureSpec,
    stop: &StopRule,
    options: &CompareOptions,
) -> Result<Comparison> {
    let reference = evolve_extrapolated(p, grid, t0, t)?;
    let wave = &reference.wave;
    let peak = wave.psi.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let inside: Vec<usize> = (0..wave.psi.len())
        .filter(|&i| wave.psi[i].norm() >= options.window * peak)
        .collect();
    let stride = inside.len().div_ceil(options.max_points.max(1)).max(1);
    let picked: Vec<usize> = inside.iter().copied().step_by(stride).collect();
    let xs: Vec<f64> = picked.iter().map(|&i| wave.xs[i]).collect();
    let oracle: Vec<C64> = picked.iter().map(|&i| wave.psi[i]).collect();
    let series = propagate_packet_via_series(
        p,
        t0,
        t,
        theta,
        &grid.packet,
        &xs,
        spec,
        stop,
        options.y_points,
    )?;
    Ok(Comparison {
        discrepancy: l2_relative(&series, &oracle),
        xs,
        series,
        oracle,
        richardson_differences: reference.differences,
        norm_drift: (wave.norm_final - wave.norm_initial).abs(),
    })
}

/// Write `x,re,im` rows.
pub fn write_wavefunction_csv(path: &Path, xs: &[f64], psi: &[C64]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,re,im")?;
    for (x, z) in xs.iter().zip(psi) {
        writeln!(out, "{x:.16e},{:.16e},{:.16e}", z.re, z.im)?;
    }
    out.flush()
}
