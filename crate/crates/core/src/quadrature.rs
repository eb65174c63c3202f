//! Tensor-product quadrature with node doubling.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre(nodes: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(nodes.max(1)).expect("nonzero"));
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Equispaced trapezoid rule on a full period `[a, a + period)`.
pub fn periodic_trapezoid(nodes: usize, a: f64, period: f64) -> Vec<(f64, f64)> {
    let h = period / nodes as f64;
    (0..nodes).map(|i| (a + h * i as f64, h)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Converged {
    pub value: Complex64,
    pub nodes: usize,
    pub change: f64,
}

/// Evaluates `rule(nodes)` for `start, 2 start, 4 start, ...` until two
/// successive values agree to `tol` (absolute).
pub fn doubling<F>(mut rule: F, start: usize, max_nodes: usize, tol: f64) -> Result<Converged>
where
    F: FnMut(usize) -> Complex64,
{
    let mut nodes = start.max(1);
    let mut prev = rule(nodes);
    while nodes * 2 <= max_nodes {
        nodes *= 2;
        let next = rule(nodes);
        let change = (next - prev).norm();
        if change <= tol {
            return Ok(Converged {
                value: next,
                nodes,
                change,
            });
        }
        prev = next;
    }
    Err(Error::InsufficientData(format!(
        "quadrature did not converge to {tol:e} within {max_nodes} nodes"
    )))
}
