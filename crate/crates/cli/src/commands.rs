//! The four experiment commands.

use rayon::prelude::*;
use serde_json::{json, Value};

use feynprop_core::bounds::tail_bound;
use feynprop_core::free_kernel::schrodinger_residual;
use feynprop_core::oracle::compare_with_series;
use feynprop_core::series::{boundary_phase, propagator};
use feynprop_core::{
    BoundContext, PotentialSpec, PropagatorQuery, PropagatorResult, QuadratureSpec, StopRule,
    TestFunction, C64,
};

use crate::config::{Format, RunConfig};
use crate::table::{Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Propagate,
    Converge,
    Residual,
    OracleCompare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Propagate => "propagate",
            Command::Converge => "converge",
            Command::Residual => "residual",
            Command::OracleCompare => "oracle-compare",
        }
    }
}

/// Rendered output plus what the caller should report.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub body: String,
    /// One-line human summary for stderr.
    pub summary: String,
    pub warnings: Vec<String>,
    /// A hard numerical failure occurred in at least one row.
    pub failed: bool,
}

struct Inputs {
    potential: PotentialSpec,
    theta: TestFunction,
    spec: QuadratureSpec,
    stop: StopRule,
}

impl Inputs {
    fn from(cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(Self {
            potential: cfg.potential()?,
            theta: cfg.theta()?,
            spec: cfg.quadrature_spec(),
            stop: cfg.stop_rule(),
        })
    }

    fn propagate(&self, q: &PropagatorQuery) -> feynprop_core::Result<PropagatorResult> {
        propagator(&self.theta, &self.potential, q, &self.spec, &self.stop)
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    match command {
        Command::Propagate => propagate_cmd(cfg),
        Command::Converge => converge_cmd(cfg),
        Command::Residual => residual_cmd(cfg),
        Command::OracleCompare => oracle_cmd(cfg),
    }
}

fn pair(z: C64) -> Value {
    json!([z.re, z.im])
}

fn envelope(command: Command, cfg: &RunConfig, body: Value) -> String {
    let mut doc = json!({
        "schema": crate::config::SCHEMA_VERSION,
        "command": command.name(),
        "config": cfg,
    });
    if let (Value::Object(doc), Value::Object(body)) = (&mut doc, body) {
        doc.extend(body);
    }
    let mut s = serde_json::to_string_pretty(&doc).expect("JSON values serialise");
    s.push('\n');
    s
}

fn flag_of(r: &PropagatorResult) -> String {
    let mut flags = Vec::new();
    if !r.converged {
        flags.push("tail_above_tol");
    }
    if r.diagnostics.iter().any(|d| d.contains("extends beyond")) {
        flags.push("theta_outside_window");
    }
    if flags.is_empty() {
        "ok".into()
    } else {
        flags.join(";")
    }
}

fn error_flag(e: &feynprop_core::Error) -> &'static str {
    use feynprop_core::Error::*;
    match e {
        Invalid(_) => "invalid",
        Domain(_) => "domain",
        Range { .. } => "range",
        Overflow { .. } => "overflow",
        TensorDimension { .. } => "tensor_dimension",
        MajorantViolation { .. } => "majorant_violation",
        BoundaryContamination { .. } => "boundary_contamination",
    }
}

/// Evaluate every query concurrently, collected in input order.
fn evaluate_all(
    inputs: &Inputs,
    queries: &[PropagatorQuery],
) -> Vec<feynprop_core::Result<PropagatorResult>> {
    queries.par_iter().map(|q| inputs.propagate(q)).collect()
}

pub const PROPAGATE_HEADER: [&str; 11] = [
    "x", "y", "t0", "t", "re_k", "im_k", "abs_k", "n_used", "tail_bound", "mc_stderr", "flag",
];

fn propagate_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let inputs = Inputs::from(cfg)?;
    let queries = cfg.queries()?;
    let results = evaluate_all(&inputs, &queries);
    let mut table = Table::new(PROPAGATE_HEADER.to_vec());
    let mut json_rows = Vec::new();
    let mut warnings = Vec::new();
    let mut failed = false;
    for (q, r) in queries.iter().zip(&results) {
        let mut row: Vec<Cell> = vec![q.x.into(), q.y.into(), q.t0.into(), q.t.into()];
        match r {
            Ok(r) => {
                let k = r.value();
                let flag = flag_of(r);
                if flag != "ok" {
                    warnings.push(format!("({}, {}, {}, {}): {}", q.x, q.y, q.t0, q.t, r.diagnostics.join("; ")));
                }
                row.extend([
                    k.re.into(),
                    k.im.into(),
                    k.norm().into(),
                    r.order_used().into(),
                    r.tail.into(),
                    r.mc_stderr.into(),
                    flag.clone().into(),
                ]);
                json_rows.push(json!({
                    "x": q.x, "y": q.y, "t0": q.t0, "t": q.t,
                    "k": pair(k),
                    "abs_k": k.norm(),
                    "n_used": r.order_used(),
                    "tail_bound": r.tail,
                    "mc_stderr": r.mc_stderr,
                    "flag": flag,
                    "orders": r.orders.iter().copied().map(pair).collect::<Vec<_>>(),
                    "partial_sums": r.partial_sums.iter().copied().map(pair).collect::<Vec<_>>(),
                    "diagnostics": r.diagnostics,
                }));
            }
            Err(e) => {
                failed = true;
                warnings.push(format!("({}, {}, {}, {}): {e}", q.x, q.y, q.t0, q.t));
                row.extend([
                    f64::NAN.into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                    0usize.into(),
                    f64::NAN.into(),
                    f64::NAN.into(),
                    error_flag(e).into(),
                ]);
                json_rows.push(json!({
                    "x": q.x, "y": q.y, "t0": q.t0, "t": q.t,
                    "flag": error_flag(e),
                    "error": e.to_string(),
                }));
            }
        }
        table.push(row);
    }
    let body = match cfg.output.format {
        Format::Csv => table.to_csv(),
        Format::Json => envelope(Command::Propagate, cfg, json!({ "results": json_rows })),
    };
    Ok(Report {
        body,
        summary: format!("{} query point(s), {} flagged", queries.len(), warnings.len()),
        warnings,
        failed,
    })
}

pub const CONVERGE_HEADER: [&str; 10] = [
    "x", "y", "t0", "t", "n", "re_partial", "im_partial", "abs_increment", "tail_bound", "mc_stderr",
];

fn converge_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let inputs = Inputs::from(cfg)?;
    let queries = cfg.queries()?;
    let results = evaluate_all(&inputs, &queries);
    let mut table = Table::new(CONVERGE_HEADER.to_vec());
    let mut json_rows = Vec::new();
    let mut warnings = Vec::new();
    let mut failed = false;
    for (q, r) in queries.iter().zip(&results) {
        let r = match r {
            Ok(r) => r,
            Err(e) => {
                failed = true;
                warnings.push(format!("({}, {}, {}, {}): {e}", q.x, q.y, q.t0, q.t));
                json_rows.push(json!({ "x": q.x, "y": q.y, "t0": q.t0, "t": q.t, "error": e.to_string() }));
                continue;
            }
        };
        let ctx = BoundContext::new(&inputs.potential, q, &inputs.theta);
        let phase = boundary_phase(&inputs.theta, q).norm();
        let mut variance = 0.0;
        let mut orders = Vec::new();
        for (n, partial) in r.partial_sums.iter().enumerate() {
            variance += r.terms[n].iter().map(|t| t.mc_stderr.powi(2)).sum::<f64>();
            let increment = r.orders[n].norm();
            let tail = tail_bound(n, &ctx) * phase;
            let stderr = variance.sqrt() * phase;
            table.push(vec![
                q.x.into(),
                q.y.into(),
                q.t0.into(),
                q.t.into(),
                n.into(),
                partial.re.into(),
                partial.im.into(),
                increment.into(),
                tail.into(),
                stderr.into(),
            ]);
            orders.push(json!({
                "n": n,
                "partial_sum": pair(*partial),
                "abs_increment": increment,
                "tail_bound": tail,
                "mc_stderr": stderr,
            }));
        }
        if !r.converged {
            warnings.push(format!("({}, {}, {}, {}): {}", q.x, q.y, q.t0, q.t, r.diagnostics.join("; ")));
        }
        json_rows.push(json!({ "x": q.x, "y": q.y, "t0": q.t0, "t": q.t, "orders": orders }));
    }
    let body = match cfg.output.format {
        Format::Csv => table.to_csv(),
        Format::Json => envelope(Command::Converge, cfg, json!({ "results": json_rows })),
    };
    Ok(Report {
        body,
        summary: format!("{} query point(s), {} row(s)", queries.len(), table.rows.len()),
        warnings,
        failed,
    })
}

/// `(h_x, h_t, residual, warning)` at one refinement level.
type Level = (f64, f64, f64, Option<String>);

pub const RESIDUAL_HEADER: [&str; 11] = [
    "x", "y", "t0", "t", "level", "h_x", "h_t", "residual", "observed_order", "tail_bound", "warning",
];

fn residual_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let settings = cfg
        .residual
        .as_ref()
        .ok_or_else(|| CliError::Config("residual command needs a residual section".into()))?;
    let inputs = Inputs::from(cfg)?;
    let queries = cfg.queries()?;
    let stencil = RunConfig::stencil(settings);
    let per_query: Vec<Result<(f64, Vec<Level>), CliError>> = queries
        .par_iter()
        .map(|q| {
            let tail = inputs.propagate(q)?.tail;
            let kernel = |x: f64, t: f64| -> feynprop_core::Result<C64> {
                Ok(inputs.propagate(&PropagatorQuery::new(x, q.y, q.t0, t))?.value())
            };
            let mut levels = Vec::with_capacity(settings.levels);
            for level in 0..settings.levels {
                let scale = 0.5f64.powi(level as i32);
                let (hx, ht) = (settings.h_x * scale, settings.h_t * scale);
                let report = schrodinger_residual(kernel, q, &inputs.theta, &inputs.potential, hx, ht, stencil)?;
                levels.push((hx, ht, report.residual, report.warning));
            }
            Ok((tail, levels))
        })
        .collect();
    let mut table = Table::new(RESIDUAL_HEADER.to_vec());
    let mut json_rows = Vec::new();
    let mut warnings = Vec::new();
    let mut orders_seen = Vec::new();
    for (q, entry) in queries.iter().zip(per_query) {
        let (tail, levels) = entry?;
        let mut json_levels = Vec::new();
        for (level, (hx, ht, res, warn)) in levels.iter().enumerate() {
            let order = if level == 0 {
                f64::NAN
            } else {
                (levels[level - 1].2 / res).log2()
            };
            if level > 0 {
                orders_seen.push(order);
            }
            if let Some(w) = warn {
                warnings.push(format!("({}, {}): {w}", q.x, q.t));
            }
            table.push(vec![
                q.x.into(),
                q.y.into(),
                q.t0.into(),
                q.t.into(),
                level.into(),
                (*hx).into(),
                (*ht).into(),
                (*res).into(),
                order.into(),
                tail.into(),
                warn.clone().unwrap_or_default().into(),
            ]);
            json_levels.push(json!({
                "level": level, "h_x": hx, "h_t": ht, "residual": res,
                "observed_order": if order.is_finite() { json!(order) } else { Value::Null },
                "warning": warn,
            }));
        }
        json_rows.push(json!({
            "x": q.x, "y": q.y, "t0": q.t0, "t": q.t, "tail_bound": tail, "levels": json_levels,
        }));
    }
    let body = match cfg.output.format {
        Format::Csv => table.to_csv(),
        Format::Json => envelope(Command::Residual, cfg, json!({ "results": json_rows })),
    };
    let last = orders_seen.last().copied().unwrap_or(f64::NAN);
    Ok(Report {
        body,
        summary: format!("{} query point(s), last observed order {last:.3}", queries.len()),
        warnings,
        failed: false,
    })
}

pub const ORACLE_HEADER: [&str; 5] = ["x", "re_series", "im_series", "re_oracle", "im_oracle"];

fn oracle_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let oracle = cfg
        .oracle
        .as_ref()
        .ok_or_else(|| CliError::Config("oracle-compare needs an oracle section".into()))?;
    let q = cfg
        .query
        .as_ref()
        .ok_or_else(|| CliError::Config("oracle-compare takes t0 and t from query".into()))?;
    let inputs = Inputs::from(cfg)?;
    let cmp = compare_with_series(
        &inputs.potential,
        &cfg.grid_spec(oracle),
        q.t0,
        q.t,
        &inputs.theta,
        &inputs.spec,
        &inputs.stop,
        &RunConfig::compare_options(oracle),
    )?;
    let mut table = Table::new(ORACLE_HEADER.to_vec());
    let mut points = Vec::new();
    for ((x, s), o) in cmp.xs.iter().zip(&cmp.series).zip(&cmp.oracle) {
        table.push(vec![(*x).into(), s.re.into(), s.im.into(), o.re.into(), o.im.into()]);
        points.push(json!({ "x": x, "series": pair(*s), "oracle": pair(*o) }));
    }
    let body = match cfg.output.format {
        Format::Csv => table.to_csv(),
        Format::Json => envelope(
            Command::OracleCompare,
            cfg,
            json!({
                "discrepancy": cmp.discrepancy,
                "richardson_differences": cmp.richardson_differences,
                "norm_drift": cmp.norm_drift,
                "points": points,
            }),
        ),
    };
    Ok(Report {
        body,
        summary: format!(
            "L2 relative discrepancy {:.6e} over {} points; extrapolation differences {:?}; norm drift {:.3e}",
            cmp.discrepancy,
            cmp.xs.len(),
            cmp.richardson_differences,
            cmp.norm_drift
        ),
        warnings: Vec::new(),
        failed: false,
    })
}
