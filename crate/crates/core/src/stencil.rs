//! Finite-difference building blocks shared by the operator, the identity
//! checks and the inequality checks.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as c64;

use crate::grid::Grid;

pub(crate) trait Field:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Field for c64 {
    fn zero() -> Self {
        c64::new(0.0, 0.0)
    }
}

/// Second-order derivative of a node field along `direction`: centered in the
/// interior, one-sided second order where a neighbour is missing.
pub(crate) fn node_derivative<T: Field>(grid: &Grid, u: &[T], direction: usize) -> Vec<T> {
    let inv = 1.0 / (2.0 * grid.spacing());
    (0..grid.node_count())
        .map(|i| {
            let m = grid.neighbor(i, direction, -1);
            let p = grid.neighbor(i, direction, 1);
            match (m, p) {
                (Some(m), Some(p)) => (u[p] - u[m]) * inv,
                (None, Some(p)) => {
                    let pp = grid.neighbor(p, direction, 1).expect("grid too small");
                    (u[p] * 4.0 - u[i] * 3.0 - u[pp]) * inv
                }
                (Some(m), None) => {
                    let mm = grid.neighbor(m, direction, -1).expect("grid too small");
                    (u[i] * 3.0 - u[m] * 4.0 + u[mm]) * inv
                }
                (None, None) => T::zero(),
            }
        })
        .collect()
}

/// Tangential derivative of a boundary field (same closures as
/// [`node_derivative`]).
pub(crate) fn boundary_derivative<T: Field>(grid: &Grid, g: &[T], direction: usize) -> Vec<T> {
    let inv = 1.0 / (2.0 * grid.spacing());
    (0..grid.boundary_count())
        .map(|b| {
            let m = grid.boundary_neighbor(b, direction, -1);
            let p = grid.boundary_neighbor(b, direction, 1);
            match (m, p) {
                (Some(m), Some(p)) => (g[p] - g[m]) * inv,
                (None, Some(p)) => {
                    let pp = grid.boundary_neighbor(p, direction, 1).expect("grid too small");
                    (g[p] * 4.0 - g[b] * 3.0 - g[pp]) * inv
                }
                (Some(m), None) => {
                    let mm = grid.boundary_neighbor(m, direction, -1).expect("grid too small");
                    (g[b] * 3.0 - g[m] * 4.0 + g[mm]) * inv
                }
                (None, None) => T::zero(),
            }
        })
        .collect()
}

/// Full node gradient, one vector per direction.
pub(crate) fn node_gradient(grid: &Grid, u: &[c64]) -> Vec<Vec<c64>> {
    (0..grid.dim()).map(|d| node_derivative(grid, u, d)).collect()
}

/// Treatment of tangential edges that leave the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Closure {
    /// Zero ghost values one cell beyond the last tangential node.
    Dirichlet,
    /// Edges leaving the grid are dropped.
    Relaxed,
    /// Tangential directions wrap around.
    Periodic,
}

/// One lattice edge with its quadrature weight and midpoint.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Edge {
    pub from: usize,
    /// `None` for a Dirichlet ghost neighbour.
    pub to: Option<usize>,
    pub weight: f64,
    pub midpoint: [f64; 4],
}

/// Visits every edge of the volume lattice. Normal edges join consecutive
/// layers with weight `h^n`; tangential edges at layer `k` carry the
/// trapezoid weight of that layer times `h^(n-1)`. Edges are visited in node
/// order, so sums over them are deterministic.
pub(crate) fn for_each_edge<F: FnMut(Edge)>(grid: &Grid, closure: Closure, mut visit: F) {
    let n = grid.dim();
    let h = grid.spacing();
    let nn = grid.normal_count();
    let normal_weight = h.powi(n as i32);
    for i in 0..grid.node_count() {
        let (_, k) = grid.split(i);
        let p = grid.point(i);
        if k + 1 < nn {
            let mut mid = p;
            mid[n - 1] += 0.5 * h;
            visit(Edge { from: i, to: Some(i + 1), weight: normal_weight, midpoint: mid });
        }
        let wk = if k == 0 || k == nn - 1 { 0.5 * h } else { h };
        let tw = wk * h.powi(n as i32 - 1);
        for d in 0..n - 1 {
            let mut mid = p;
            mid[d] += 0.5 * h;
            match grid.neighbor(i, d, 1) {
                Some(j) => visit(Edge { from: i, to: Some(j), weight: tw, midpoint: mid }),
                None => match closure {
                    Closure::Dirichlet => {
                        visit(Edge { from: i, to: None, weight: tw, midpoint: mid });
                    }
                    Closure::Relaxed => {}
                    Closure::Periodic => {
                        let (b, _) = grid.split(i);
                        let mut m = grid.tangential_multi_index(b);
                        m[d] = 0;
                        let wb = grid.tangential_flat_index(&m[..n - 1]);
                        visit(Edge { from: i, to: Some(grid.join(wb, k)), weight: tw, midpoint: mid });
                    }
                },
            }
            if closure == Closure::Dirichlet && grid.neighbor(i, d, -1).is_none() {
                let mut mid = p;
                mid[d] -= 0.5 * h;
                visit(Edge { from: i, to: None, weight: tw, midpoint: mid });
            }
        }
    }
}

/// `sum_e w_e (weight at midpoint) D_e u conj(D_e v)`.
pub(crate) fn edge_form<W>(grid: &Grid, u: &[c64], v: &[c64], closure: Closure, weight: W) -> c64
where
    W: Fn(&[f64]) -> f64,
{
    let h = grid.spacing();
    let n = grid.dim();
    let mut acc = c64::new(0.0, 0.0);
    for_each_edge(grid, closure, |e| {
        let (du, dv) = match e.to {
            Some(j) => (u[j] - u[e.from], v[j] - v[e.from]),
            None => (-u[e.from], -v[e.from]),
        };
        acc += du * dv.conj() * (e.weight * weight(&e.midpoint[..n]) / (h * h));
    });
    acc
}

/// `sum_e w_e (weight at midpoint) |D_e u|^2`.
pub(crate) fn edge_energy<W>(grid: &Grid, u: &[c64], closure: Closure, weight: W) -> f64
where
    W: Fn(&[f64]) -> f64,
{
    edge_form(grid, u, u, closure, weight).re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_quadratic_is_exact() {
        let g = Grid::new(2, 2.0, 0.25).unwrap();
        let u: Vec<f64> = g.sample(|p| p[0] * p[0] - 3.0 * p[1] * p[1] + p[0] * p[1]);
        let dx = node_derivative(&g, &u, 0);
        let dy = node_derivative(&g, &u, 1);
        for i in 0..g.node_count() {
            let p = g.point(i);
            assert!((dx[i] - (2.0 * p[0] + p[1])).abs() < 1e-11);
            assert!((dy[i] - (-6.0 * p[1] + p[0])).abs() < 1e-11);
        }
    }

    #[test]
    fn edge_energy_of_linear_field() {
        let g = Grid::new(2, 1.0, 0.25).unwrap();
        let u: Vec<c64> = g.sample(|p| c64::new(2.0 * p[0] + p[1], 0.0));
        let e = edge_energy(&g, &u, Closure::Relaxed, |_| 1.0);
        // tangential: 4 per unit area over (−0.875, 0.875) x (0, 1); normal: 1 over (−1,1) x (0,1)
        let expected = 4.0 * 1.75 * 1.0 + 1.0 * 2.0 * 1.0;
        assert!((e - expected).abs() < 1e-12);
    }
}
