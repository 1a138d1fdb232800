//! Gauss quadrature and Lagrange shape functions for the 9-node
//! quadrilateral and its quadratic edges.

use crate::{Error, Result};

/// 1D Gauss-Legendre points and weights on [−1, 1].
pub fn gauss_1d(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    match order {
        1 => Ok((vec![0.0], vec![2.0])),
        2 => {
            let a = 1.0 / 3.0f64.sqrt();
            Ok((vec![-a, a], vec![1.0, 1.0]))
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            Ok((vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]))
        }
        5 => {
            let c1 = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let c2 = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let w1 = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
            let w2 = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
            Ok((vec![-c2, -c1, 0.0, c1, c2], vec![w2, w1, 128.0 / 225.0, w1, w2]))
        }
        other => Err(Error::InvalidArgument(format!("unsupported Gauss order {other}"))),
    }
}

/// Tensor-product Gauss rule on [−1, 1]²: `(ξ, η, w)` triples.
pub fn gauss_quad(order: usize) -> Result<Vec<(f64, f64, f64)>> {
    if order != 2 && order != 3 {
        return Err(Error::InvalidArgument(format!(
            "2D Gauss rule supports order 2 or 3, got {order}"
        )));
    }
    let (pts, wts) = gauss_1d(order)?;
    let mut out = Vec::with_capacity(order * order);
    for (j, &eta) in pts.iter().enumerate() {
        for (i, &xi) in pts.iter().enumerate() {
            out.push((xi, eta, wts[i] * wts[j]));
        }
    }
    Ok(out)
}

/// Local (ξ, η) coordinates of the 9 nodes: corners 0-3 counterclockwise
/// from (−1, −1), midsides 4-7 starting at the bottom, center 8.
pub const QUAD9_LOCAL: [(f64, f64); 9] = [
    (-1.0, -1.0),
    (1.0, -1.0),
    (1.0, 1.0),
    (-1.0, 1.0),
    (0.0, -1.0),
    (1.0, 0.0),
    (0.0, 1.0),
    (-1.0, 0.0),
    (0.0, 0.0),
];

#[inline]
fn lag1d(i: usize, x: f64) -> f64 {
    match i {
        0 => 0.5 * x * (x - 1.0),
        1 => 1.0 - x * x,
        _ => 0.5 * x * (x + 1.0),
    }
}

#[inline]
fn lag1d_deriv(i: usize, x: f64) -> f64 {
    match i {
        0 => x - 0.5,
        1 => -2.0 * x,
        _ => x + 0.5,
    }
}

#[inline]
fn index_of(c: f64) -> usize {
    if c < -0.5 {
        0
    } else if c > 0.5 {
        2
    } else {
        1
    }
}

/// Biquadratic shape functions and their (ξ, η) derivatives.
pub fn shape_quad9(xi: f64, eta: f64) -> ([f64; 9], [[f64; 2]; 9]) {
    let mut n = [0.0; 9];
    let mut dn = [[0.0; 2]; 9];
    for (k, &(xc, yc)) in QUAD9_LOCAL.iter().enumerate() {
        let (a, b) = (index_of(xc), index_of(yc));
        n[k] = lag1d(a, xi) * lag1d(b, eta);
        dn[k][0] = lag1d_deriv(a, xi) * lag1d(b, eta);
        dn[k][1] = lag1d(a, xi) * lag1d_deriv(b, eta);
    }
    (n, dn)
}

/// Quadratic edge shape functions on [−1, 1], node order (end, mid, end).
pub fn shape_edge3(xi: f64) -> ([f64; 3], [f64; 3]) {
    ([lag1d(0, xi), lag1d(1, xi), lag1d(2, xi)], [lag1d_deriv(0, xi), lag1d_deriv(1, xi), lag1d_deriv(2, xi)])
}

/// Bilinear shape functions on the corner nodes, used for the linear stress
/// interpolation inside a quadratic element.
pub fn shape_bilinear(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}
