//! JSON run configuration (`schema: 1`).

use serde::{Deserialize, Serialize};

use feynprop_core::oracle::CompareOptions;
use feynprop_core::{
    DeltaAtom, ExpAtom, GridSpec, Packet, PotentialSpec, PropagatorQuery, QuadratureSpec,
    SimplexRule, Stencil, StopRule, TestFunction, C64,
};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub potential: PotentialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QueryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_grid: Option<QueryGrid>,
    #[serde(default)]
    pub theta: ThetaConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default)]
    pub exp_atoms: Vec<ExpAtomConfig>,
    #[serde(default)]
    pub delta_atoms: Vec<DeltaAtomConfig>,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpAtomConfig {
    pub alpha: f64,
    pub coeff_re: f64,
    #[serde(default)]
    pub coeff_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaAtomConfig {
    pub location: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    pub x: f64,
    pub y: f64,
    pub t0: f64,
    pub t: f64,
}

/// `x` and `t` as `[min, max, n]`, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryGrid {
    pub x: (f64, f64, usize),
    pub t: (f64, f64, usize),
    pub y: f64,
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    /// `[time, re, im]` triples.
    #[serde(default)]
    pub nodes: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

fn default_max_order() -> usize {
    StopRule::default().max_order
}

fn default_tail_tol() -> f64 {
    StopRule::default().tail_tol
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            max_order: default_max_order(),
            tail_tol: default_tail_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    #[default]
    GaussJacobiTensor,
    DirichletMc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default)]
    pub simplex_rule: RuleName,
    #[serde(default = "defaults::points_per_dim")]
    pub points_per_dim: usize,
    #[serde(default = "defaults::mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::hypercube_points")]
    pub hypercube_points: usize,
    #[serde(default = "defaults::tensor_max_k")]
    pub tensor_max_k: usize,
    #[serde(default = "defaults::contour_eta")]
    pub contour_eta: f64,
}

mod defaults {
    use feynprop_core::QuadratureSpec;

    pub fn points_per_dim() -> usize {
        QuadratureSpec::default().points_per_dim
    }
    pub fn mc_samples() -> usize {
        QuadratureSpec::default().mc_samples
    }
    pub fn hypercube_points() -> usize {
        QuadratureSpec::default().hypercube_points
    }
    pub fn tensor_max_k() -> usize {
        QuadratureSpec::default().tensor_max_k
    }
    pub fn contour_eta() -> f64 {
        QuadratureSpec::default().contour_eta
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self::from(&QuadratureSpec::default())
    }
}

impl From<&QuadratureSpec> for QuadratureConfig {
    fn from(s: &QuadratureSpec) -> Self {
        Self {
            simplex_rule: match s.simplex_rule {
                SimplexRule::GaussJacobiTensor => RuleName::GaussJacobiTensor,
                SimplexRule::DirichletMc => RuleName::DirichletMc,
            },
            points_per_dim: s.points_per_dim,
            mc_samples: s.mc_samples,
            seed: s.seed,
            hypercube_points: s.hypercube_points,
            tensor_max_k: s.tensor_max_k,
            contour_eta: s.contour_eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
    pub delta_width: f64,
    pub packet: PacketConfig,
    /// Relative amplitude below which grid points are left out of the comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
    /// Gauss–Legendre nodes for the initial-position integral.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilName {
    #[default]
    Central3,
    Central5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualConfig {
    pub h_x: f64,
    pub h_t: f64,
    #[serde(default)]
    pub stencil: StencilName,
    /// Number of step sizes `h, h/2, …`; at least 2 for an observed order.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.query.is_some() && self.query_grid.is_some() {
            return Err(invalid("give either query or query_grid, not both"));
        }
        if let Some(grid) = &self.query_grid {
            if grid.x.2 == 0 || grid.t.2 == 0 {
                return Err(invalid("query_grid counts must be positive"));
            }
        }
        self.potential()?;
        self.theta()?;
        self.quadrature_spec()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if let Some(r) = &self.residual {
            if r.levels < 2 {
                return Err(invalid("residual.levels must be at least 2"));
            }
        }
        if let Some(o) = &self.oracle {
            self.grid_spec(o).validate().map_err(|e| invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<PotentialSpec, CliError> {
        let p = &self.potential;
        PotentialSpec::new(
            p.exp_atoms
                .iter()
                .map(|a| ExpAtom {
                    alpha: a.alpha,
                    coeff: C64::new(a.coeff_re, a.coeff_im),
                })
                .collect(),
            p.delta_atoms
                .iter()
                .map(|a| DeltaAtom {
                    location: a.location,
                    weight: a.weight,
                })
                .collect(),
            p.g,
        )
        .map_err(|e| invalid(e.to_string()))
    }

    pub fn theta(&self) -> Result<TestFunction, CliError> {
        if self.theta.nodes.is_empty() {
            return Ok(TestFunction::zero());
        }
        TestFunction::new(
            self.theta
                .nodes
                .iter()
                .map(|[t, re, im]| (*t, C64::new(*re, *im)))
                .collect(),
        )
        .map_err(|e| invalid(e.to_string()))
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            max_order: self.series.max_order,
            tail_tol: self.series.tail_tol,
        }
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        let q = &self.quadrature;
        QuadratureSpec {
            simplex_rule: match q.simplex_rule {
                RuleName::GaussJacobiTensor => SimplexRule::GaussJacobiTensor,
                RuleName::DirichletMc => SimplexRule::DirichletMc,
            },
            points_per_dim: q.points_per_dim,
            mc_samples: q.mc_samples,
            seed: q.seed,
            hypercube_points: q.hypercube_points,
            tensor_max_k: q.tensor_max_k,
            contour_eta: q.contour_eta,
        }
    }

    /// Query points in input order: `t` outer, `x` inner for grids.
    pub fn queries(&self) -> Result<Vec<PropagatorQuery>, CliError> {
        match (&self.query, &self.query_grid) {
            (Some(q), None) => Ok(vec![PropagatorQuery::new(q.x, q.y, q.t0, q.t)]),
            (None, Some(g)) => {
                let xs = linspace(g.x);
                Ok(linspace(g.t)
                    .into_iter()
                    .flat_map(|t| xs.iter().map(move |&x| PropagatorQuery::new(x, g.y, g.t0, t)))
                    .collect())
            }
            _ => Err(invalid("config needs a query or a query_grid")),
        }
    }

    pub fn grid_spec(&self, o: &OracleConfig) -> GridSpec {
        GridSpec {
            x_min: o.x_min,
            x_max: o.x_max,
            nx: o.nx,
            nt: o.nt,
            delta_width: o.delta_width,
            packet: Packet {
                center: o.packet.center,
                width: o.packet.width,
                momentum: o.packet.momentum,
            },
        }
    }

    pub fn compare_options(o: &OracleConfig) -> CompareOptions {
        let d = CompareOptions::default();
        CompareOptions {
            window: o.window.unwrap_or(d.window),
            max_points: o.max_points.unwrap_or(d.max_points),
            y_points: o.y_points.unwrap_or(d.y_points),
        }
    }

    pub fn stencil(r: &ResidualConfig) -> Stencil {
        match r.stencil {
            StencilName::Central3 => Stencil::Central3,
            StencilName::Central5 => Stencil::Central5,
        }
    }
}

fn linspace((lo, hi, n): (f64, f64, usize)) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
