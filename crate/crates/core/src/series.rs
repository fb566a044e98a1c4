//! Term-by-term assembly of the perturbation series and the truncated
//! propagator with its certified tail bound.

use std::f64::consts::{FRAC_PI_4, PI};

use rayon::prelude::*;

use crate::bounds::{tail_bound, term_majorant, BoundContext};
use crate::error::{Error, Result};
use crate::free_kernel::free_transform;
use crate::model::{PotentialSpec, PropagatorQuery, ShiftedArgument, TestFunction};
use crate::pinned::{phi_exponent, ThetaData, EXPONENT_CAP};
use crate::quadrature::{
    mc, mc_estimate, pairwise_sum, Estimate, QuadratureSpec, SimplexRule, SimplexWeight,
    StickTensor, MAX_TENSOR_DIM,
};
use crate::C64;

/// Relative slack allowed when checking a term against its majorant.
pub const MAJORANT_SLACK: f64 = 1e-8;

/// Largest insertion count handled by the tensor rule.
const TENSOR_MAX_INSERTIONS: usize = 3;

/// Truncation controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_order: usize,
    pub tail_tol: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_order: 10,
            tail_tol: 1e-6,
        }
    }
}

/// Contribution of all atom assignments with `k` delta pins at order `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTerm {
    pub n: usize,
    pub k: usize,
    pub value: C64,
    pub majorant: f64,
    pub mc_stderr: f64,
}

/// Truncated propagator with per-order data.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorResult {
    pub query: PropagatorQuery,
    pub theta: TestFunction,
    /// `terms[n]` holds the `k = 0..=n` terms of order `n` (before the boundary phase).
    pub terms: Vec<Vec<SeriesTerm>>,
    /// `K_n^{(θ)}` per order.
    pub orders: Vec<C64>,
    /// `Σ_{m ≤ n} K_m^{(θ)}`.
    pub partial_sums: Vec<C64>,
    /// Bound on the omitted orders.
    pub tail: f64,
    /// Combined Monte Carlo standard error of the final partial sum.
    pub mc_stderr: f64,
    pub converged: bool,
    pub spec: QuadratureSpec,
    pub diagnostics: Vec<String>,
}

impl PropagatorResult {
    /// Highest order included (0 when nothing was summed).
    pub fn order_used(&self) -> usize {
        self.orders.len().saturating_sub(1)
    }

    pub fn value(&self) -> C64 {
        self.partial_sums
            .last()
            .copied()
            .unwrap_or(C64::new(0.0, 0.0))
    }
}

fn minus_i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

fn i_times(z: C64) -> C64 {
    C64::new(-z.im, z.re)
}

/// Ordered `k`-tuples over `0..atoms`, lexicographic, as flat index → tuple.
fn decode(mut index: usize, atoms: usize, len: usize, out: &mut Vec<usize>) {
    out.clear();
    out.resize(len, 0);
    for slot in out.iter_mut().rev() {
        *slot = index % atoms;
        index /= atoms;
    }
}

/// All `(m_0, …, m_{parts−1})` with `Σ m = total`, lexicographic.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Ordered insertion points inside the pin intervals: `(interval, fraction)` per
/// insertion in time order, with the flat-simplex weight of the node.
struct InsertionNodes {
    counts: Vec<usize>,
    nodes: Vec<(Vec<(usize, f64)>, f64)>,
}

fn insertion_nodes(counts: &[usize], points: usize) -> InsertionNodes {
    let mut nodes: Vec<(Vec<(usize, f64)>, f64)> = vec![(Vec::new(), 1.0)];
    for (interval, &m) in counts.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let rule = StickTensor::real(m, SimplexWeight::Flat, points, 1.0);
        let mut block = Vec::with_capacity(rule.len());
        let mut spacing = [C64::new(0.0, 0.0); MAX_TENSOR_DIM + 1];
        for i in 0..rule.len() {
            let w = rule.node(i, &mut spacing).re;
            let mut acc = 0.0;
            let sigmas: Vec<(usize, f64)> = spacing[..m]
                .iter()
                .map(|d| {
                    acc += d.re;
                    (interval, acc)
                })
                .collect();
            block.push((sigmas, w));
        }
        nodes = nodes
            .iter()
            .flat_map(|(prefix, pw)| {
                block.iter().map(move |(sig, w)| {
                    let mut all = prefix.clone();
                    all.extend_from_slice(sig);
                    (all, pw * w)
                })
            })
            .collect();
    }
    InsertionNodes {
        counts: counts.to_vec(),
        nodes,
    }
}

/// Data fixed for one `(n, k)` term and query.
struct TermSetup<'a> {
    n: usize,
    k: usize,
    q: PropagatorQuery,
    theta: ThetaData<'a>,
    spec: &'a QuadratureSpec,
}

impl TermSetup<'_> {
    fn overflow(&self, exponent: f64, assignment: usize) -> Error {
        Error::Overflow {
            n: self.n,
            k: self.k,
            assignment: Some(assignment),
            exponent,
            cap: EXPONENT_CAP,
        }
    }

    /// Exponent at complex spacings with insertions given relative to the pins.
    fn structured_exponent(
        &self,
        spacing: &[C64],
        xs: &[f64],
        ins: &[(usize, f64)],
        alphas: &[f64],
    ) -> C64 {
        let t = C64::from(self.q.t);
        let w = &self.theta.window;
        let mut taus = [C64::new(0.0, 0.0); MAX_TENSOR_DIM + 2];
        taus[0] = C64::from(self.q.t0);
        for j in 0..spacing.len() {
            taus[j + 1] = taus[j] + spacing[j];
        }
        let last = spacing.len();
        taus[last] = t;

        let mut e = i_times(self.theta.all_sq) * -0.5;
        let mut before = 0.0;
        let mut overlap = C64::new(0.0, 0.0);
        let mut rates = [0.0; MAX_TENSOR_DIM + 1];
        let mut partial = [0.0; MAX_TENSOR_DIM + 1];
        for (&(interval, sigma), &a) in ins.iter().zip(alphas) {
            let s = taus[interval] + spacing[interval] * sigma;
            e += w.integral(s, t) * a;
            overlap += (t - s) * (a * a + 2.0 * a * before);
            before += a;
            // Segment `interval + 1` sees the step only after s.
            partial[interval] += a * (1.0 - sigma);
            for r in rates.iter_mut().take(last).skip(interval + 1) {
                *r += a;
            }
        }
        e += i_times(overlap) * 0.5 + self.q.x * before;
        for j in 0..last {
            let p = w.integral(taus[j], taus[j + 1]);
            let qj = spacing[j] * (rates[j] + partial[j]);
            let shift = p + i_times(qj) + (xs[j + 1] - xs[j]);
            e += i_times(shift * shift) / (spacing[j] * 2.0);
        }
        e
    }

    /// Tensor-rule integral of one assignment, ordered-sector insertions.
    fn tensor(
        &self,
        xs: &[f64],
        alphas: &[f64],
        blocks: &[InsertionNodes],
        assignment: usize,
    ) -> Result<C64> {
        let k = self.k;
        let length = self.q.dt();
        let hint: Vec<f64> = xs.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let eta = if self.theta.is_affine() {
            self.spec.contour_eta
        } else {
            0.0
        };
        let pins = StickTensor::deformed(
            k,
            SimplexWeight::InverseSqrt,
            self.spec.points_per_dim,
            length,
            eta,
            Some(&hint),
        );
        let prefactor = C64::from_polar(
            (2.0 * PI).powf(-0.5 * (k + 1) as f64),
            -FRAC_PI_4 * (k + 1) as f64,
        );
        let values: Vec<Result<C64>> = (0..pins.len())
            .into_par_iter()
            .map(|i| {
                let mut spacing = [C64::new(0.0, 0.0); MAX_TENSOR_DIM + 1];
                let w = pins.node(i, &mut spacing);
                let spacing = &spacing[..=k];
                let mut acc = Vec::with_capacity(blocks.len());
                for block in blocks {
                    let mut jac = C64::new(1.0, 0.0);
                    for (j, &m) in block.counts.iter().enumerate() {
                        jac *= spacing[j].powi(m as i32);
                    }
                    let mut inner = Vec::with_capacity(block.nodes.len());
                    for (ins, wi) in &block.nodes {
                        let e = self.structured_exponent(spacing, xs, ins, alphas);
                        if e.re > EXPONENT_CAP {
                            return Err(self.overflow(e.re, assignment));
                        }
                        inner.push(e.exp() * *wi);
                    }
                    acc.push(pairwise_sum(&inner) * jac);
                }
                Ok(pairwise_sum(&acc) * w)
            })
            .collect();
        let values = values.into_iter().collect::<Result<Vec<C64>>>()?;
        Ok(pairwise_sum(&values) * prefactor)
    }

    /// Monte Carlo integral of one assignment over the simplex and the full cube.
    fn monte_carlo(&self, xs: &[f64], alphas: &[f64], assignment: usize) -> Result<Estimate> {
        let (k, d) = (self.k, self.n - self.k);
        let (t0, t) = (self.q.t0, self.q.t);
        let length = t - t0;
        let parts = if k > 0 { k + 1 } else { 0 };
        let samples = self.spec.mc_samples;
        let bank = mc::bank(
            self.spec.seed,
            mc::stream_id(self.n, k, assignment),
            parts,
            0.5,
            d,
            samples,
        );
        let width = parts + d;
        let values: Vec<Result<C64>> = bank
            .par_chunks_exact(width.max(1))
            .take(samples)
            .map(|row| {
                let mut taus = Vec::with_capacity(k + 2);
                taus.push(t0);
                if k > 0 {
                    let clamped: Vec<f64> = row[..parts].iter().map(|f| f.max(1e-12)).collect();
                    let total: f64 = clamped.iter().sum();
                    let mut acc = t0;
                    for f in &clamped[..k] {
                        acc += length * f / total;
                        taus.push(acc);
                    }
                }
                taus.push(t);
                let ss: Vec<f64> = row[parts..].iter().map(|u| t0 + length * u).collect();
                let e = phi_exponent(&self.theta, &taus, xs, &ss, alphas);
                if e.re > EXPONENT_CAP {
                    return Err(self.overflow(e.re, assignment));
                }
                Ok(e.exp())
            })
            .collect();
        let values = values.into_iter().collect::<Result<Vec<C64>>>()?;
        let log_mass = (k + 1) as f64 * libm::lgamma(0.5) - libm::lgamma(0.5 * (k + 1) as f64)
            + 0.5 * (k as f64 - 1.0) * length.ln()
            + d as f64 * length.ln()
            - 0.5 * (k + 1) as f64 * (2.0 * PI).ln();
        let est = mc_estimate(&values, log_mass.exp());
        let phase = C64::from_polar(1.0, -FRAC_PI_4 * (k + 1) as f64);
        Ok(Estimate {
            value: est.value * phase,
            stderr: est.stderr,
        })
    }
}

/// Whether the `(n, k)` term is integrated by the tensor rule.
pub fn uses_tensor_rule(n: usize, k: usize, spec: &QuadratureSpec) -> bool {
    let d = n - k;
    spec.simplex_rule == SimplexRule::GaussJacobiTensor
        && k <= spec.tensor_max_k
        && d <= TENSOR_MAX_INSERTIONS
        && k + d <= spec.tensor_max_k.max(TENSOR_MAX_INSERTIONS)
}

/// Term at unit coupling: `(−i)^n/(n−k)! Σ_assignments Πg_j Πc_l ∫∫ φ`.
fn unit_coupling_term(
    n: usize,
    k: usize,
    theta: &TestFunction,
    p: &PotentialSpec,
    q: &PropagatorQuery,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let zero = Estimate::exact(C64::new(0.0, 0.0));
    if !q.is_forward() {
        return Ok(zero);
    }
    if n == 0 {
        return Ok(Estimate::exact(free_transform(&ShiftedArgument::plain(theta), q)?));
    }
    let d = n - k;
    let (nd, ne) = (p.delta_atoms.len(), p.exp_atoms.len());
    if (k > 0 && nd == 0) || (d > 0 && ne == 0) {
        return Ok(zero);
    }
    let setup = TermSetup {
        n,
        k,
        q: *q,
        theta: ThetaData::new(theta, q),
        spec,
    };
    let tensor = uses_tensor_rule(n, k, spec);
    let blocks: Vec<InsertionNodes> = if tensor {
        compositions(d, k + 1)
            .iter()
            .map(|c| insertion_nodes(c, spec.hypercube_points))
            .collect()
    } else {
        Vec::new()
    };

    let n_exp_assign = ne.pow(d as u32);
    let total = nd.pow(k as u32) * n_exp_assign;
    let mut values = Vec::with_capacity(total);
    let mut variance = 0.0;
    let (mut pin_atoms, mut ins_atoms) = (Vec::new(), Vec::new());
    for index in 0..total {
        decode(index / n_exp_assign, nd, k, &mut pin_atoms);
        decode(index % n_exp_assign, ne, d, &mut ins_atoms);
        let mut weight = C64::new(1.0, 0.0);
        let mut xs = Vec::with_capacity(k + 2);
        xs.push(q.y);
        for &a in &pin_atoms {
            weight *= p.delta_atoms[a].weight;
            xs.push(p.delta_atoms[a].location);
        }
        xs.push(q.x);
        let alphas: Vec<f64> = ins_atoms.iter().map(|&a| p.exp_atoms[a].alpha).collect();
        for &a in &ins_atoms {
            weight *= p.exp_atoms[a].coeff;
        }
        if weight == C64::new(0.0, 0.0) {
            values.push(C64::new(0.0, 0.0));
            continue;
        }
        let est = if tensor {
            Estimate::exact(setup.tensor(&xs, &alphas, &blocks, index)?)
        } else {
            setup.monte_carlo(&xs, &alphas, index)?
        };
        values.push(est.value * weight);
        variance += (est.stderr * weight.norm()).powi(2);
    }
    let scale = if tensor {
        1.0
    } else {
        1.0 / libm::tgamma(d as f64 + 1.0)
    };
    Ok(Estimate {
        value: pairwise_sum(&values) * minus_i_pow(n) * scale,
        stderr: variance.sqrt() * scale,
    })
}

/// The `(n, k)` term including `g^n`, checked against its majorant.
pub fn term_value(
    n: usize,
    k: usize,
    theta: &TestFunction,
    p: &PotentialSpec,
    q: &PropagatorQuery,
    spec: &QuadratureSpec,
) -> Result<SeriesTerm> {
    if k > n {
        return Err(Error::Invalid(format!("term index k = {k} exceeds order n = {n}")));
    }
    spec.validate()?;
    p.validate()?;
    q.validate()?;
    let ctx = BoundContext::new(p, q, theta);
    term_with_context(n, k, theta, p, q, spec, &ctx)
}

fn term_with_context(
    n: usize,
    k: usize,
    theta: &TestFunction,
    p: &PotentialSpec,
    q: &PropagatorQuery,
    spec: &QuadratureSpec,
    ctx: &BoundContext,
) -> Result<SeriesTerm> {
    let est = unit_coupling_term(n, k, theta, p, q, spec)?;
    let gn = p.g.powi(n as i32);
    let value = est.value * gn;
    let majorant = term_majorant(n, k, ctx);
    if value.norm() > majorant * (1.0 + MAJORANT_SLACK) {
        return Err(Error::MajorantViolation {
            n,
            k,
            value: value.norm(),
            majorant,
        });
    }
    Ok(SeriesTerm {
        n,
        k,
        value,
        majorant,
        mc_stderr: est.stderr * gn.abs(),
    })
}

/// `exp((i/2)∫_{[t0,t]ᶜ}θ² + iyθ(t0) − ixθ(t))`, relating the transform to the kernel.
pub fn boundary_phase(theta: &TestFunction, q: &PropagatorQuery) -> C64 {
    let all = match theta.support() {
        Some((lo, hi)) => theta.integrals(lo, hi).1,
        None => C64::new(0.0, 0.0),
    };
    let (_, window) = theta.integrals(q.t0, q.t);
    let boundary = theta.eval(q.t0) * q.y - theta.eval(q.t) * q.x;
    (i_times(all - window) * 0.5 + i_times(boundary)).exp()
}

fn order_terms(
    n: usize,
    theta: &TestFunction,
    p: &PotentialSpec,
    q: &PropagatorQuery,
    spec: &QuadratureSpec,
    ctx: &BoundContext,
) -> Result<Vec<SeriesTerm>> {
    (0..=n)
        .into_par_iter()
        .map(|k| term_with_context(n, k, theta, p, q, spec, ctx))
        .collect()
}

/// `K_n^{(θ)} = phase · Σ_k term(n, k)`.
pub fn k_n_theta(
    n: usize,
    theta: &TestFunction,
    p: &PotentialSpec,
    q: &PropagatorQuery,
    spec: &QuadratureSpec,
) -> Result<C64> {
    spec.validate()?;
    p.validate()?;
    if !q.is_forward() {
        return Ok(C64::new(0.0, 0.0));
    }
    let ctx = BoundContext::new(p, q, theta);
    let terms = order_terms(n, theta, p, q, spec, &ctx)?;
    let values: Vec<C64> = terms.iter().map(|t| t.value).collect();
    Ok(pairwise_sum(&values) * boundary_phase(theta, q))
}

/// Sum orders until the tail bound drops below `stop.tail_tol` or `stop.max_order` is reached.
pub fn propagator(
    theta: &TestFunction,
    p: &PotentialSpec,
    q: &PropagatorQuery,
    spec: &QuadratureSpec,
    stop: &StopRule,
) -> Result<PropagatorResult> {
    spec.validate()?;
    p.validate()?;
    q.validate()?;
    let mut result = PropagatorResult {
        query: *q,
        theta: theta.clone(),
        terms: Vec::new(),
        orders: Vec::new(),
        partial_sums: Vec::new(),
        tail: 0.0,
        mc_stderr: 0.0,
        converged: true,
        spec: spec.clone(),
        diagnostics: Vec::new(),
    };
    if !q.is_forward() {
        return Ok(result);
    }
    if let Some((lo, hi)) = theta.support() {
        if lo < q.t0 || hi > q.t {
            result.diagnostics.push(format!(
                "test function support [{lo}, {hi}] extends beyond [{}, {}]",
                q.t0, q.t
            ));
        }
    }
    let ctx = BoundContext::new(p, q, theta);
    let phase = boundary_phase(theta, q);
    let mut running = C64::new(0.0, 0.0);
    let mut variance = 0.0;
    for n in 0..=stop.max_order {
        let terms = order_terms(n, theta, p, q, spec, &ctx)?;
        let values: Vec<C64> = terms.iter().map(|t| t.value).collect();
        let order = pairwise_sum(&values) * phase;
        variance += terms.iter().map(|t| t.mc_stderr.powi(2)).sum::<f64>();
        running += order;
        result.terms.push(terms);
        result.orders.push(order);
        result.partial_sums.push(running);
        result.tail = tail_bound(n, &ctx) * phase.norm();
        if result.tail < stop.tail_tol {
            break;
        }
    }
    result.mc_stderr = variance.sqrt() * phase.norm();
    if result.tail >= stop.tail_tol {
        result.converged = false;
        result.diagnostics.push(format!(
            "tail bound {:e} above tolerance {:e} at order {}",
            result.tail, stop.tail_tol, stop.max_order
        ));
    }
    Ok(result)
}
