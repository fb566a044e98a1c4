//! Shared inputs for the benchmarks.

use feynprop_core::{
    DeltaAtom, ExpAtom, PotentialSpec, PropagatorQuery, QuadratureSpec, SimplexRule, StopRule,
    TestFunction, C64,
};

pub fn forcing() -> TestFunction {
    TestFunction::new(vec![
        (0.0, C64::new(0.0, 0.0)),
        (0.4, C64::new(0.6, 0.1)),
        (1.0, C64::new(0.0, 0.0)),
    ])
    .expect("nodes are increasing")
}

pub fn single_delta() -> PotentialSpec {
    PotentialSpec::new(vec![], vec![DeltaAtom { location: 0.0, weight: 1.0 }], 0.5)
        .expect("valid potential")
}

pub fn exp_plus_delta() -> PotentialSpec {
    PotentialSpec::new(
        vec![ExpAtom { alpha: 1.0, coeff: C64::new(0.2, 0.0) }],
        vec![DeltaAtom { location: 0.5, weight: 1.0 }],
        0.5,
    )
    .expect("valid potential")
}

pub fn query() -> PropagatorQuery {
    PropagatorQuery::new(0.4, -0.3, 0.0, 1.0)
}

pub fn tensor() -> QuadratureSpec {
    QuadratureSpec::default()
}

pub fn sampled() -> QuadratureSpec {
    QuadratureSpec {
        simplex_rule: SimplexRule::DirichletMc,
        mc_samples: 4096,
        seed: 1,
        ..Default::default()
    }
}

pub fn fixed_order(n: usize) -> StopRule {
    StopRule { max_order: n, tail_tol: 0.0 }
}
