//! Gauss–Jacobi rules on `[0, 1]` by the Golub–Welsch eigenvalue method.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights for `∫_0^1 v^p (1−v)^q f(v) dv ≈ Σ w_i f(v_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type Key = (usize, u64, u64);

fn cache() -> &'static Mutex<HashMap<Key, Arc<Rule>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Rule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `n`-point rule for the weight `v^p (1−v)^q` on `[0, 1]`; `p, q > −1`.
pub fn gauss_jacobi_unit(n: usize, p: f64, q: f64) -> Arc<Rule> {
    assert!(n >= 1, "a quadrature rule needs at least one node");
    assert!(p > -1.0 && q > -1.0, "Jacobi exponents must exceed -1");
    let key = (n, p.to_bits(), q.to_bits());
    if let Some(rule) = cache().lock().expect("rule cache poisoned").get(&key) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build(n, p, q));
    cache()
        .lock()
        .expect("rule cache poisoned")
        .entry(key)
        .or_insert(rule)
        .clone()
}

/// Gauss–Legendre on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Arc<Rule> {
    gauss_jacobi_unit(n, 0.0, 0.0)
}


// On [-1, 1] with weight (1-x)^alpha (1+x)^beta; v = (1+x)/2 gives
// alpha = q, beta = p.
fn build(n: usize, p: f64, q: f64) -> Rule {
    let (alpha, beta) = (q, p);
    let ab = alpha + beta;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        jacobi[(i, i)] = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
        };
        if i + 1 < n {
            let m = k + 1.0;
            let b2 = if i == 0 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * m * (m + alpha) * (m + beta) * (m + ab)
                    / ((2.0 * m + ab).powi(2) * (2.0 * m + ab + 1.0) * (2.0 * m + ab - 1.0))
            };
            jacobi[(i, i + 1)] = b2.sqrt();
            jacobi[(i + 1, i)] = b2.sqrt();
        }
    }
    // Mass of the weight on [0, 1] is B(p+1, q+1).
    let mu0 = (libm::lgamma(p + 1.0) + libm::lgamma(q + 1.0) - libm::lgamma(p + q + 2.0)).exp();
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (1.0 + eig.eigenvalues[i]), mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}
