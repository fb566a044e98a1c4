//! Fixed-order pairwise summation.

use crate::C64;

const LEAF: usize = 8;

/// Tree sum with a fixed split; the result depends only on the input order.
pub fn pairwise_sum(values: &[C64]) -> C64 {
    if values.len() <= LEAF {
        return values.iter().fold(C64::new(0.0, 0.0), |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_real(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_real(&values[..mid]) + pairwise_sum_real(&values[mid..])
}
