//! Discrete Robin Laplacian `-Delta` with `-u_{x_n} + alpha u = 0` on `x_n = 0`
//! and homogeneous Dirichlet conditions on the artificial walls.
//!
//! The Robin row uses the ghost value `u(-h) = u(h) - 2 h alpha u(0)`. Nodes
//! on the top layer `x_n = L` are eliminated; tangential neighbours beyond the
//! last node are zero. The unknowns are all nodes with `k < normal_count - 1`,
//! numbered `b * (normal_count - 1) + k`.

use std::io::Write;

use num_complex::Complex64 as c64;
use serde::Serialize;

use crate::boundary_data::BoundaryFunction;
use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::linalg::{weighted_dot, weighted_norm, CsrMatrix};
use crate::stencil::{edge_form, Closure};

/// Tolerance on `max |Im alpha| / max |alpha|` for the symmetric path.
pub const SYMMETRY_TOL: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    matrix: CsrMatrix,
    grid: Grid,
    alpha: BoundaryFunction,
    symmetric: bool,
    weights: Vec<f64>,
    nodes: Vec<usize>,
}

/// Result of [`apply_form`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FormEvaluation {
    /// `sum_edges D u conj(D v) + sum_boundary alpha u conj(v)`.
    pub value: c64,
    /// `<A u, v>_W` on the unknowns.
    pub operator_pairing: c64,
    /// `|value - operator_pairing|`.
    pub residual: f64,
}

/// Assembles the reduced operator.
pub fn assemble(grid: &Grid, alpha: &BoundaryFunction) -> Result<DiscreteOperator> {
    if grid.is_boundary_only() {
        return Err(Error::UnsupportedDimension { op: "volume assembly", dim: grid.dim() });
    }
    if alpha.dim() != grid.dim() {
        return Err(Error::SizeMismatch { expected: grid.dim(), got: alpha.dim() });
    }
    check_len(grid.boundary_count(), alpha.samples.len())?;

    let n = grid.dim();
    let h = grid.spacing();
    let nn = grid.normal_count();
    let m = nn - 1;
    let ih2 = 1.0 / (h * h);
    let nb = grid.boundary_count();

    let mut rows = Vec::with_capacity(nb * m);
    let mut weights = Vec::with_capacity(nb * m);
    let mut nodes = Vec::with_capacity(nb * m);
    for b in 0..nb {
        for k in 0..m {
            let idx = grid.join(b, k);
            let mut row = Vec::with_capacity(2 * n + 1);
            let mut diag = c64::new(2.0 * n as f64 * ih2, 0.0);
            for d in 0..n - 1 {
                for step in [-1isize, 1] {
                    if let Some(nb_b) = grid.boundary_neighbor(b, d, step) {
                        row.push((nb_b * m + k, c64::new(-ih2, 0.0)));
                    }
                }
            }
            if k == 0 {
                diag += alpha.samples[b] * (2.0 / h);
                if m > 1 {
                    row.push((b * m + 1, c64::new(-2.0 * ih2, 0.0)));
                }
            } else {
                row.push((b * m + k - 1, c64::new(-ih2, 0.0)));
                if k + 1 < m {
                    row.push((b * m + k + 1, c64::new(-ih2, 0.0)));
                }
            }
            row.push((b * m + k, diag));
            rows.push(row);
            weights.push(grid.quadrature_weights()[idx]);
            nodes.push(idx);
        }
    }
    Ok(DiscreteOperator {
        matrix: CsrMatrix::from_rows(rows),
        grid: grid.clone(),
        alpha: alpha.clone(),
        symmetric: alpha.is_real(SYMMETRY_TOL),
        weights,
        nodes,
    })
}

impl DiscreteOperator {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> &BoundaryFunction {
        &self.alpha
    }

    /// True iff `alpha` is real to [`SYMMETRY_TOL`].
    pub fn symmetry_flag(&self) -> bool {
        self.symmetric
    }

    pub fn unknown_count(&self) -> usize {
        self.nodes.len()
    }

    /// Quadrature weights of the unknowns.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Node index of every unknown.
    pub fn unknown_nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Node vector restricted to the unknowns.
    pub fn restrict(&self, u: &[c64]) -> Vec<c64> {
        self.nodes.iter().map(|&i| u[i]).collect()
    }

    /// Unknown vector extended by zero to every node.
    pub fn embed(&self, x: &[c64]) -> Vec<c64> {
        let mut u = vec![c64::default(); self.grid.node_count()];
        for (&i, &v) in self.nodes.iter().zip(x) {
            u[i] = v;
        }
        u
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        self.matrix.matvec(x)
    }

    /// `<x, y>_W` on the unknowns.
    pub fn inner(&self, x: &[c64], y: &[c64]) -> c64 {
        weighted_dot(&self.weights, x, y)
    }

    pub fn norm(&self, x: &[c64]) -> f64 {
        weighted_norm(&self.weights, x)
    }

    /// `||A x - lambda x||_W / ||x||_W`.
    pub fn relative_residual(&self, lambda: c64, x: &[c64]) -> f64 {
        let ax = self.apply(x);
        let r: Vec<c64> = ax.iter().zip(x).map(|(a, v)| a - lambda * v).collect();
        self.norm(&r) / self.norm(x)
    }

    /// `|<A x, y>_W - <x, A y>_W|`.
    pub fn adjointness_defect(&self, x: &[c64], y: &[c64]) -> f64 {
        (self.inner(&self.apply(x), y) - self.inner(x, &self.apply(y))).norm()
    }

    pub fn write_matrix_market<W: Write>(&self, out: W) -> Result<()> {
        self.matrix.write_matrix_market(out)
    }
}

/// Discrete `h_alpha[u, v]` on node vectors, compared with `<A u, v>_W`.
///
/// With [`Closure::Dirichlet`] and `u`, `v` vanishing on the top layer the two
/// agree to roundoff.
pub fn apply_form(op: &DiscreteOperator, u: &[c64], v: &[c64], closure: Closure) -> Result<FormEvaluation> {
    let grid = op.grid();
    check_len(grid.node_count(), u.len())?;
    check_len(grid.node_count(), v.len())?;
    let mut value = edge_form(grid, u, v, closure, |_| 1.0);
    for (b, &i) in grid.boundary_index_set().iter().enumerate() {
        value += op.alpha.samples[b] * u[i] * v[i].conj() * grid.surface_weights()[b];
    }
    let ur = op.restrict(u);
    let vr = op.restrict(v);
    let operator_pairing = op.inner(&op.apply(&ur), &vr);
    Ok(FormEvaluation { value, operator_pairing, residual: (value - operator_pairing).norm() })
}

/// Node Laplacian: standard stencil in the tangential directions with zero
/// ghosts, second-order one-sided rows on the two normal end layers.
pub(crate) fn node_laplacian(grid: &Grid, u: &[c64]) -> Vec<c64> {
    let n = grid.dim();
    let h = grid.spacing();
    let ih2 = 1.0 / (h * h);
    let nn = grid.normal_count();
    (0..grid.node_count())
        .map(|i| {
            let (_, k) = grid.split(i);
            let mut acc = c64::default();
            for d in 0..n - 1 {
                let m = grid.neighbor(i, d, -1).map_or(c64::default(), |j| u[j]);
                let p = grid.neighbor(i, d, 1).map_or(c64::default(), |j| u[j]);
                acc += (m + p - 2.0 * u[i]) * ih2;
            }
            acc += if k == 0 {
                (2.0 * u[i] - 5.0 * u[i + 1] + 4.0 * u[i + 2] - u[i + 3]) * ih2
            } else if k == nn - 1 {
                (2.0 * u[i] - 5.0 * u[i - 1] + 4.0 * u[i - 2] - u[i - 3]) * ih2
            } else {
                (u[i - 1] + u[i + 1] - 2.0 * u[i]) * ih2
            };
            acc
        })
        .collect()
}

/// `|int_bdry eta . grad u conj(v) - int grad u . grad conj(v) - int Delta u conj(v)|`
/// with `eta = -e_n`, the normal derivative one-sided of second order.
pub fn greens_identity_residual(op: &DiscreteOperator, u: &[c64], v: &[c64]) -> Result<f64> {
    let grid = op.grid();
    check_len(grid.node_count(), u.len())?;
    check_len(grid.node_count(), v.len())?;
    if grid.normal_count() < 4 {
        return Err(Error::Sizing("Green identity needs at least 4 normal layers".into()));
    }
    let h = grid.spacing();
    let mut boundary = c64::default();
    for (b, &i) in grid.boundary_index_set().iter().enumerate() {
        let un = (-3.0 * u[i] + 4.0 * u[i + 1] - u[i + 2]) / (2.0 * h);
        boundary -= un * v[i].conj() * grid.surface_weights()[b];
    }
    let gradient = edge_form(grid, u, v, Closure::Dirichlet, |_| 1.0);
    let lap = node_laplacian(grid, u);
    let volume: c64 = lap
        .iter()
        .zip(v)
        .zip(grid.quadrature_weights())
        .map(|((a, b), w)| a * b.conj() * *w)
        .sum();
    Ok((boundary - gradient - volume).norm())
}
