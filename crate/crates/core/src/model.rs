//! Potentials, endpoint queries and piecewise-linear test functions.

use crate::error::{Error, Result};
use crate::C64;

/// One atom `c * exp(alpha * x)` of the smooth part of the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpAtom {
    pub alpha: f64,
    pub coeff: C64,
}

/// One atom `weight * delta(x - location)` of the singular part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaAtom {
    pub location: f64,
    pub weight: f64,
}

/// `V(x) = g * (sum_l c_l e^{alpha_l x} + sum_j g_j delta(x - y_j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub exp_atoms: Vec<ExpAtom>,
    pub delta_atoms: Vec<DeltaAtom>,
    pub g: f64,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::free()
    }
}

impl PotentialSpec {
    pub fn free() -> Self {
        Self {
            exp_atoms: Vec::new(),
            delta_atoms: Vec::new(),
            g: 1.0,
        }
    }

    pub fn new(exp_atoms: Vec<ExpAtom>, delta_atoms: Vec<DeltaAtom>, g: f64) -> Result<Self> {
        let p = Self {
            exp_atoms,
            delta_atoms,
            g,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g.is_finite() {
            return Err(Error::Invalid("coupling g must be finite".into()));
        }
        for (i, a) in self.exp_atoms.iter().enumerate() {
            if !a.alpha.is_finite() || !a.coeff.re.is_finite() || !a.coeff.im.is_finite() {
                return Err(Error::Invalid(format!("exp atom {i} is not finite")));
            }
        }
        for (j, a) in self.delta_atoms.iter().enumerate() {
            if !a.location.is_finite() || !a.weight.is_finite() {
                return Err(Error::Invalid(format!("delta atom {j} is not finite")));
            }
        }
        Ok(())
    }

    pub fn is_free(&self) -> bool {
        self.exp_atoms.is_empty() && self.delta_atoms.is_empty()
    }

    /// Support radius `a = max |y_j|` of the delta part (0 if there is none).
    pub fn delta_support(&self) -> f64 {
        self.delta_atoms
            .iter()
            .fold(0.0, |m, a| m.max(a.location.abs()))
    }

    /// Same atoms with coupling `g`.
    pub fn with_coupling(&self, g: f64) -> Self {
        Self { g, ..self.clone() }
    }
}

/// Endpoint data `(x, t | y, t0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorQuery {
    pub x: f64,
    pub y: f64,
    pub t0: f64,
    pub t: f64,
}

impl PropagatorQuery {
    pub fn new(x: f64, y: f64, t0: f64, t: f64) -> Self {
        Self { x, y, t0, t }
    }

    pub fn dt(&self) -> f64 {
        self.t - self.t0
    }

    pub fn is_forward(&self) -> bool {
        self.t > self.t0
    }

    pub fn validate(&self) -> Result<()> {
        if [self.x, self.y, self.t0, self.t].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Invalid("query fields must be finite".into()))
        }
    }
}

/// Complex piecewise-linear function, zero outside its first and last node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TestFunction {
    nodes: Vec<(f64, C64)>,
}

impl TestFunction {
    pub fn zero() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn new(nodes: Vec<(f64, C64)>) -> Result<Self> {
        for (i, (s, v)) in nodes.iter().enumerate() {
            if !s.is_finite() || !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Invalid(format!("test function node {i} is not finite")));
            }
        }
        if nodes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Invalid(
                "test function node times must be strictly increasing".into(),
            ));
        }
        if let (Some(first), Some(last)) = (nodes.first(), nodes.last()) {
            if first.1 != C64::new(0.0, 0.0) || last.1 != C64::new(0.0, 0.0) {
                return Err(Error::Invalid(
                    "test function must vanish at its first and last node".into(),
                ));
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[(f64, C64)] {
        &self.nodes
    }

    pub fn is_zero(&self) -> bool {
        self.nodes.iter().all(|(_, v)| *v == C64::new(0.0, 0.0))
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        match (self.nodes.first(), self.nodes.last()) {
            (Some(a), Some(b)) if self.nodes.len() >= 2 => Some((a.0, b.0)),
            _ => None,
        }
    }

    /// Multiply every node value by `lambda`.
    pub fn scaled(&self, lambda: C64) -> Self {
        Self {
            nodes: self.nodes.iter().map(|&(s, v)| (s, v * lambda)).collect(),
        }
    }

    pub fn eval(&self, tau: f64) -> C64 {
        match self.segment_index(tau) {
            Some(i) => {
                let (a, fa) = self.nodes[i];
                let (b, fb) = self.nodes[i + 1];
                fa + (fb - fa) * ((tau - a) / (b - a))
            }
            None => C64::new(0.0, 0.0),
        }
    }

    /// Slope of the segment containing `tau`; at a node the segment to the right.
    pub fn slope_at(&self, tau: f64) -> C64 {
        match self.segment_index(tau) {
            Some(i) => {
                let (a, fa) = self.nodes[i];
                let (b, fb) = self.nodes[i + 1];
                (fb - fa) / (b - a)
            }
            None => C64::new(0.0, 0.0),
        }
    }

    // Index i with nodes[i].0 <= tau < nodes[i+1].0.
    fn segment_index(&self, tau: f64) -> Option<usize> {
        if self.nodes.len() < 2 {
            return None;
        }
        let i = self.nodes.partition_point(|(s, _)| *s <= tau);
        if i == 0 || i >= self.nodes.len() {
            None
        } else {
            Some(i - 1)
        }
    }

    /// `(∫_a^b θ, ∫_a^b θ²)`, exact for the piecewise-linear interpolant.
    pub fn integrals(&self, a: f64, b: f64) -> (C64, C64) {
        let (mut i1, mut i2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        if b <= a {
            return (i1, i2);
        }
        for w in self.nodes.windows(2) {
            let lo = a.max(w[0].0);
            let hi = b.min(w[1].0);
            if hi <= lo {
                continue;
            }
            let p = self.eval_on(w, lo);
            let q = self.eval_on(w, hi);
            let h = hi - lo;
            i1 += (p + q) * (0.5 * h);
            i2 += (p * p + p * q + q * q) * (h / 3.0);
        }
        (i1, i2)
    }

    /// `∫_ℝ |θ|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| {
                let (p, q) = (w[0].1, w[1].1);
                (w[1].0 - w[0].0) * (p.norm_sqr() + (p * q.conj()).re + q.norm_sqr()) / 3.0
            })
            .sum()
    }

    /// If no node lies strictly inside `(t0, t)`, θ is affine there:
    /// returns `(θ(t0), slope)`.
    pub fn affine_on(&self, t0: f64, t: f64) -> Option<(C64, C64)> {
        if self.nodes.iter().any(|(s, _)| *s > t0 && *s < t) {
            return None;
        }
        let a = self.eval(t0);
        let b = (self.eval(t) - a) / (t - t0);
        Some((a, b))
    }

    fn eval_on(&self, w: &[(f64, C64)], tau: f64) -> C64 {
        let (a, fa) = w[0];
        let (b, fb) = w[1];
        fa + (fb - fa) * ((tau - a) / (b - a))
    }
}

/// `θ(τ) + i Σ_l α_l 1_{(s_l, until]}(τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedArgument<'a> {
    pub base: &'a TestFunction,
    pub steps: Vec<(f64, f64)>,
    pub until: f64,
}

impl<'a> ShiftedArgument<'a> {
    pub fn plain(base: &'a TestFunction) -> Self {
        Self {
            base,
            steps: Vec::new(),
            until: 0.0,
        }
    }

    pub fn new(base: &'a TestFunction, steps: Vec<(f64, f64)>, until: f64) -> Result<Self> {
        if steps
            .iter()
            .any(|(s, a)| !s.is_finite() || !a.is_finite() || *s > until)
        {
            return Err(Error::Invalid(
                "steps must be finite and start no later than the final time".into(),
            ));
        }
        Ok(Self { base, steps, until })
    }

    fn step_sum(&self, tau: f64) -> f64 {
        self.steps
            .iter()
            .filter(|(s, _)| *s < tau && tau <= self.until)
            .map(|(_, a)| a)
            .sum()
    }

    pub fn eval(&self, tau: f64) -> C64 {
        self.base.eval(tau) + C64::new(0.0, self.step_sum(tau))
    }

    /// Smallest interval outside which the argument vanishes.
    pub fn support(&self) -> Option<(f64, f64)> {
        let steps = self
            .steps
            .iter()
            .filter(|(_, a)| *a != 0.0)
            .map(|(s, _)| *s)
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |m| m.min(s))))
            .map(|lo| (lo, self.until));
        match (self.base.support(), steps) {
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
            (a, b) => a.or(b),
        }
    }
}

/// `(∫_a^b f, ∫_a^b f²)` in closed form for a shifted piecewise-linear argument.
pub fn piecewise_integrals(f: &ShiftedArgument, a: f64, b: f64) -> (C64, C64) {
    if b < a {
        let (i1, i2) = piecewise_integrals(f, b, a);
        return (-i1, -i2);
    }
    if b == a {
        return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    }
    let mut cuts: Vec<f64> = f
        .base
        .nodes()
        .iter()
        .map(|(s, _)| *s)
        .chain(f.steps.iter().map(|(s, _)| *s))
        .chain(std::iter::once(f.until))
        .filter(|s| *s > a && *s < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let (mut i1, mut i2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = hi - lo;
        let step = f.step_sum(0.5 * (lo + hi));
        let (j1, j2) = f.base.integrals(lo, hi);
        let ia = C64::new(0.0, step);
        i1 += j1 + ia * h;
        i2 += j2 + ia * j1 * 2.0 + ia * ia * h;
    }
    (i1, i2)
}

/// `sup_{[t0,t]} |θ| + ∫_{t0}^{t} |θ'| + ‖θ‖_{L²(ℝ)}`.
pub fn forcing_norm(f: &TestFunction, t0: f64, t: f64) -> f64 {
    let (lo, hi) = if t0 <= t { (t0, t) } else { (t, t0) };
    let mut sup = f.eval(lo).norm().max(f.eval(hi).norm());
    let mut tv = 0.0;
    for w in f.nodes().windows(2) {
        let a = lo.max(w[0].0);
        let b = hi.min(w[1].0);
        if b < a {
            continue;
        }
        if w[0].0 >= lo && w[0].0 <= hi {
            sup = sup.max(w[0].1.norm());
        }
        if w[1].0 >= lo && w[1].0 <= hi {
            sup = sup.max(w[1].1.norm());
        }
        let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
        tv += slope.norm() * (b - a);
    }
    sup + tv + f.l2_norm_sq().sqrt()
}

/// Smooth part `g Σ c_l e^{α_l x}`; delta atoms do not contribute pointwise.
pub fn eval_potential(p: &PotentialSpec, x: f64) -> Result<C64> {
    let mut v = C64::new(0.0, 0.0);
    for (index, a) in p.exp_atoms.iter().enumerate() {
        let exponent = a.alpha * x;
        if exponent > 709.0 {
            return Err(Error::Range { index, x, exponent });
        }
        v += a.coeff * exponent.exp();
    }
    Ok(v * p.g)
}
