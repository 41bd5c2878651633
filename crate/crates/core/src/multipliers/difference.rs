//! Difference quotients `(tau^delta u - u) / delta` on the lattice.
//!
//! Outside the stored grid a field is extended by zero in the tangential
//! directions and above the top layer, and by even reflection across
//! `x_n = 0`. The identities checked here are algebraic and hold for any
//! extension.

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;

fn lattice_steps(grid: &Grid, delta: f64) -> Result<isize> {
    let m = delta / grid.spacing();
    let mr = m.round();
    if mr == 0.0 || (m - mr).abs() > 1e-9 * m.abs().max(1.0) {
        return Err(Error::Precondition(format!(
            "delta = {delta} is not a nonzero multiple of h = {}",
            grid.spacing()
        )));
    }
    Ok(mr as isize)
}

fn check_direction(grid: &Grid, direction: usize) -> Result<()> {
    if direction >= grid.dim() {
        return Err(Error::Precondition(format!(
            "direction {direction} out of range for dimension {}",
            grid.dim()
        )));
    }
    Ok(())
}

/// Value of the extended field at node `i` shifted by `steps` along `direction`.
fn shifted(grid: &Grid, u: &[c64], i: usize, direction: usize, steps: isize) -> c64 {
    let n = grid.dim();
    let (b, k) = grid.split(i);
    if direction == n - 1 {
        let kk = (k as isize + steps).unsigned_abs();
        return if kk < grid.normal_count() { u[grid.join(b, kk)] } else { c64::default() };
    }
    let mut m = grid.tangential_multi_index(b);
    let j = m[direction] as isize + steps;
    if j < 0 || j >= grid.tangential_count() as isize {
        return c64::default();
    }
    m[direction] = j as usize;
    u[grid.join(grid.tangential_flat_index(&m[..grid.boundary_dim()]), k)]
}

/// `(u(x + delta e_k) - u(x)) / delta` at every node.
pub fn difference_quotient(field: &[c64], direction: usize, delta: f64, grid: &Grid) -> Result<Vec<c64>> {
    check_len(grid.node_count(), field.len())?;
    check_direction(grid, direction)?;
    let m = lattice_steps(grid, delta)?;
    Ok((0..field.len()).map(|i| (shifted(grid, field, i, direction, m) - field[i]) / delta).collect())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DqResiduals {
    /// `max |2 Re(conj psi d psi) - d|psi|^2 + delta |d psi|^2|`.
    pub product_rule: f64,
    /// `max |conj psi| |d psi|`, the natural size of the product-rule terms.
    pub product_scale: f64,
    /// `|sum phi d psi + sum (d^{-delta} phi) psi + strip term|`, node weight `h^n`.
    pub ibp: f64,
    /// `sum |phi| |d psi|` with the same weight.
    pub ibp_scale: f64,
}

/// Residuals of the discrete product rule for `psi` and of the summation by
/// parts between `phi` and `psi`, including the strip correction between
/// `x_n = 0` and `x_n = delta` in the normal direction.
pub fn dq_identity_residuals(
    phi: &[c64],
    psi: &[c64],
    direction: usize,
    delta: f64,
    grid: &Grid,
) -> Result<DqResiduals> {
    check_len(grid.node_count(), phi.len())?;
    let dpsi = difference_quotient(psi, direction, delta, grid)?;
    let dphi_back = difference_quotient(phi, direction, -delta, grid)?;
    let abs_sq: Vec<c64> = psi.iter().map(|v| c64::new(v.norm_sqr(), 0.0)).collect();
    let dabs = difference_quotient(&abs_sq, direction, delta, grid)?;

    let mut product_rule: f64 = 0.0;
    let mut product_scale: f64 = 0.0;
    for i in 0..psi.len() {
        let lhs = 2.0 * (psi[i].conj() * dpsi[i]).re;
        let rhs = dabs[i].re - delta * dpsi[i].norm_sqr();
        product_rule = product_rule.max((lhs - rhs).abs());
        product_scale = product_scale.max(psi[i].norm() * dpsi[i].norm());
    }

    let n = grid.dim();
    let cell = grid.spacing().powi(n as i32);
    let mut lhs = c64::default();
    let mut rhs = c64::default();
    let mut ibp_scale = 0.0;
    for i in 0..psi.len() {
        lhs += phi[i] * dpsi[i] * cell;
        rhs -= dphi_back[i] * psi[i] * cell;
        ibp_scale += phi[i].norm() * dpsi[i].norm() * cell;
    }
    if direction == n - 1 {
        let m = lattice_steps(grid, delta)?;
        let nn = grid.normal_count() as isize;
        let mut strip = c64::default();
        let (lo, hi) = if m > 0 { (0, m) } else { (m, 0) };
        for b in 0..grid.boundary_count() {
            for j in lo..hi {
                // phi shifted by -delta, evaluated at layer j (reflected below 0)
                let at = |v: &[c64], k: isize| {
                    let k = k.unsigned_abs() as isize;
                    if k < nn {
                        v[grid.join(b, k as usize)]
                    } else {
                        c64::default()
                    }
                };
                strip += at(phi, j - m) * at(psi, j) * cell;
            }
        }
        let oriented = if m > 0 { strip } else { -strip };
        rhs -= oriented / delta;
    }
    Ok(DqResiduals { product_rule, product_scale, ibp: (lhs - rhs).norm(), ibp_scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_field_has_unit_quotient() {
        let g = Grid::new(2, 2.0, 0.25).unwrap();
        let u: Vec<c64> = g.sample(|x| c64::new(x[0], 0.0));
        let d = difference_quotient(&u, 0, 0.5, &g).unwrap();
        for i in 0..g.node_count() {
            if g.point(i)[0] + 0.5 < 2.0 {
                assert!((d[i] - 1.0).norm() < 1e-14);
            }
        }
        assert!(difference_quotient(&u, 0, 0.3, &g).is_err());
    }

    #[test]
    fn identities_hold_in_every_direction() {
        let g = Grid::new(2, 2.0, 0.25).unwrap();
        let phi: Vec<c64> = g.sample(|x| c64::new(x[0].sin() + x[1], x[0] * x[1]));
        let psi: Vec<c64> = g.sample(|x| c64::new((x[0] - x[1]).cos(), x[1] * x[1]));
        for dir in 0..2 {
            for m in [-3.0, -1.0, 1.0, 2.0] {
                let r = dq_identity_residuals(&phi, &psi, dir, m * 0.25, &g).unwrap();
                assert!(r.product_rule <= 1e-13 * r.product_scale.max(1.0), "{dir} {m} {r:?}");
                assert!(r.ibp <= 1e-13 * r.ibp_scale.max(1.0), "{dir} {m} {r:?}");
            }
        }
    }
}
