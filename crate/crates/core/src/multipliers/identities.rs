//! The five multiplier identities, their half-line variants, the virial
//! identity and the two crucial inequalities.

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use super::{IdentityId, IdentityResidualReport, ManufacturedProblem};
use crate::boundary_data::{radial_derivative, BoundaryFunction};
use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::stencil::{boundary_derivative, edge_energy, node_gradient, Closure};

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Per-node `x . grad v` (centered differences).
fn radial_gradient(grid: &Grid, v: &[c64]) -> Vec<c64> {
    let n = grid.dim();
    let grad = node_gradient(grid, v);
    (0..grid.node_count())
        .map(|i| {
            let p = grid.point(i);
            (0..n).map(|d| grad[d][i] * p[d]).sum()
        })
        .collect()
}

/// Per-boundary-node `x' . grad' v` of a boundary field.
fn boundary_radial_gradient(grid: &Grid, v: &[c64]) -> Vec<c64> {
    let d = grid.boundary_dim();
    let grads: Vec<Vec<c64>> = (0..d).map(|j| boundary_derivative(grid, v, j)).collect();
    (0..grid.boundary_count())
        .map(|b| {
            let p = grid.boundary_point(b);
            (0..d).map(|j| grads[j][b] * p[j]).sum()
        })
        .collect()
}

fn vol<F: Fn(usize) -> c64>(grid: &Grid, f: F) -> c64 {
    grid.quadrature_weights().iter().enumerate().map(|(i, &w)| f(i) * w).sum()
}

fn surf<F: Fn(usize) -> c64>(grid: &Grid, f: F) -> c64 {
    grid.surface_weights().iter().enumerate().map(|(b, &w)| f(b) * w).sum()
}

fn energy(grid: &Grid, u: &[c64]) -> f64 {
    edge_energy(grid, u, Closure::Dirichlet, |_| 1.0)
}

fn weighted_energy(grid: &Grid, u: &[c64]) -> f64 {
    edge_energy(grid, u, Closure::Dirichlet, norm)
}

fn check_data(grid: &Grid, u: &[c64], f: &[c64], g: Option<&[c64]>, alpha: &BoundaryFunction) -> Result<()> {
    check_len(grid.node_count(), u.len())?;
    check_len(grid.node_count(), f.len())?;
    if let Some(g) = g {
        check_len(grid.boundary_count(), g.len())?;
    }
    check_len(grid.boundary_count(), alpha.samples.len())
}

/// Residuals of the five identities (the half-line variants for `n = 1`).
pub fn identity_residuals(p: &ManufacturedProblem, grid: &Grid) -> Result<Vec<IdentityResidualReport>> {
    let (u, f, g) = (&p.u, &p.f, &p.g);
    check_data(grid, u, f, Some(g), &p.alpha)?;
    let n = grid.dim();
    let nf = n as f64;
    let (lr, li) = (p.lambda.re, p.lambda.im);
    let r = grid.radial_weight().values;
    let alpha = &p.alpha.samples;
    let tr = grid.trace(u);
    let rb = grid.boundary_radius();

    let e = energy(grid, u);
    let ex = weighted_energy(grid, u);
    let m = vol(grid, |i| u[i].norm_sqr().into()).re;
    let mx = vol(grid, |i| (r[i] * u[i].norm_sqr()).into()).re;
    let ff = vol(grid, |i| f[i] * u[i].conj());
    let ffx = vol(grid, |i| r[i] * f[i] * u[i].conj());
    let xgrad = radial_gradient(grid, u);
    let pv = vol(grid, |i| u[i] * xgrad[i].conj());
    let fx = vol(grid, |i| f[i] * xgrad[i].conj());

    let ba = surf(grid, |b| (alpha[b].re * tr[b].norm_sqr()).into()).re;
    let bax = surf(grid, |b| (alpha[b].re * rb[b] * tr[b].norm_sqr()).into()).re;
    let bi = surf(grid, |b| (alpha[b].im * tr[b].norm_sqr()).into()).re;
    let bix = surf(grid, |b| (alpha[b].im * rb[b] * tr[b].norm_sqr()).into()).re;
    let gg = surf(grid, |b| g[b] * tr[b].conj());
    let ggx = surf(grid, |b| rb[b] * g[b] * tr[b].conj());
    let bgrad = boundary_radial_gradient(grid, &tr);
    let pb = surf(grid, |b| alpha[b] * tr[b] * bgrad[b].conj());
    let gx = surf(grid, |b| g[b] * bgrad[b].conj());

    let mut out = Vec::with_capacity(5);
    if n == 1 {
        let u0 = tr[0];
        let g0 = g[0] * u0.conj();
        let a0 = alpha[0];
        let du = &node_gradient(grid, u)[0];
        let w = grid.quadrature_weights();
        let im_udu: f64 = (0..u.len()).map(|i| w[i] * (u[i].conj() * du[i]).im).sum();
        out.push(IdentityResidualReport::real(
            IdentityId::I1Prime,
            e + a0.re * u0.norm_sqr(),
            lr * m + ff.re + g0.re,
            grid,
        ));
        out.push(IdentityResidualReport::real(IdentityId::I2Prime, ex - 0.5 * u0.norm_sqr(), lr * mx + ffx.re, grid));
        out.push(IdentityResidualReport::real(IdentityId::I3Prime, a0.im * u0.norm_sqr(), li * m + ff.im + g0.im, grid));
        out.push(IdentityResidualReport::real(IdentityId::I4Prime, im_udu, li * mx + ffx.im, grid));
        out.push(IdentityResidualReport::real(
            IdentityId::I5Prime,
            2.0 * e + a0.re * u0.norm_sqr(),
            -2.0 * li * pv.im + ff.re + 2.0 * fx.re + g0.re,
            grid,
        ));
        return Ok(out);
    }

    let minv = vol(grid, |i| (u[i].norm_sqr() / r[i]).into()).re;
    let grad = node_gradient(grid, u);
    let radial_im = vol(grid, |i| {
        let p = grid.point(i);
        let s: c64 = (0..n).map(|d| grad[d][i] * p[d]).sum();
        (u[i].conj() * s / r[i]).im.into()
    })
    .re;

    out.push(IdentityResidualReport::real(IdentityId::I1, e + ba, lr * m + ff.re + gg.re, grid));
    out.push(IdentityResidualReport::real(
        IdentityId::I2,
        -0.5 * (nf - 1.0) * minv + ex + bax,
        lr * mx + ffx.re + ggx.re,
        grid,
    ));
    out.push(IdentityResidualReport::real(IdentityId::I3, bi, li * m + ff.im + gg.im, grid));
    out.push(IdentityResidualReport::real(IdentityId::I4, radial_im + bix, li * mx + ffx.im + ggx.im, grid));
    out.push(IdentityResidualReport::real(
        IdentityId::I5,
        2.0 * e + nf * ba + 2.0 * pb.re,
        -2.0 * li * pv.im + nf * ff.re + 2.0 * fx.re + nf * gg.re + 2.0 * gx.re,
        grid,
    ));
    Ok(out)
}

/// Source terms on the right of the virial identity (the cut-off data
/// `f~_R`, `g~_R` in the approximation argument).
#[derive(Clone, Debug, Default)]
pub struct VirialCorrection {
    pub f: Vec<c64>,
    pub g: Vec<c64>,
}

/// Residual of
/// `int |grad u|^2 + lambda int |u|^2 - int_bd (x . grad Re alpha)|u|^2
///  - 2 int_bd Im alpha x . Im(u grad conj u)
///  = (n-1) Re int f conj u + 2 Re int f x . grad conj u + (same with g on the boundary)`.
/// For real `alpha` the fourth term vanishes.
pub fn virial_residual(
    u: &[c64],
    alpha: &BoundaryFunction,
    lambda: f64,
    terms: Option<&VirialCorrection>,
    grid: &Grid,
) -> Result<IdentityResidualReport> {
    let zero_f = vec![c64::default(); grid.node_count()];
    let zero_g = vec![c64::default(); grid.boundary_count()];
    let (f, g) = match terms {
        Some(t) => (&t.f, &t.g),
        None => (&zero_f, &zero_g),
    };
    check_data(grid, u, f, Some(g), alpha)?;
    let n1 = grid.dim() as f64 - 1.0;
    let tr = grid.trace(u);
    let xa = radial_derivative(alpha, grid).real_part;
    let bgrad = boundary_radial_gradient(grid, &tr);
    let xgrad = radial_gradient(grid, u);

    let e = energy(grid, u);
    let m = vol(grid, |i| u[i].norm_sqr().into()).re;
    let bx = surf(grid, |b| (xa[b] * tr[b].norm_sqr()).into()).re;
    let bim = surf(grid, |b| (alpha.samples[b].im * (tr[b] * bgrad[b].conj()).im).into()).re;
    let lhs = e + lambda * m - bx - 2.0 * bim;

    let rhs = n1 * vol(grid, |i| f[i] * u[i].conj()).re
        + 2.0 * vol(grid, |i| f[i] * xgrad[i].conj()).re
        + n1 * surf(grid, |b| g[b] * tr[b].conj()).re
        + 2.0 * surf(grid, |b| g[b] * bgrad[b].conj()).re;
    Ok(IdentityResidualReport::real(IdentityId::Virial, lhs, rhs, grid))
}

fn phase_rate(lambda: c64) -> Result<f64> {
    if lambda.im == 0.0 {
        return Err(Error::Precondition(
            "u- is only defined for Im lambda != 0; for real lambda work with u directly".into(),
        ));
    }
    Ok(lambda.re.max(0.0).sqrt() * lambda.im.signum())
}

/// `u-(x) = exp(-i sqrt(Re lambda) sgn(Im lambda) |x|) u(x)`, with
/// `sqrt(Re lambda) = 0` for `Re lambda < 0`.
pub fn u_minus_transform(u: &[c64], lambda: c64, grid: &Grid) -> Result<Vec<c64>> {
    check_len(grid.node_count(), u.len())?;
    let k = phase_rate(lambda)?;
    let r = grid.radial_weight().values;
    Ok(u.iter().zip(&r).map(|(v, &ri)| v * c64::from_polar(1.0, -k * ri)).collect())
}

/// Analytic chain rule for `grad u-` from node gradients of `u`:
/// `exp(-i k |x|) (grad u - i k (x / |x|) u)`. Used to cross-check the
/// differenced `grad u-`.
pub fn u_minus_gradient(u: &[c64], lambda: c64, grid: &Grid) -> Result<Vec<Vec<c64>>> {
    check_len(grid.node_count(), u.len())?;
    let k = phase_rate(lambda)?;
    let n = grid.dim();
    let r = grid.radial_weight().values;
    let grad = node_gradient(grid, u);
    Ok((0..n)
        .map(|d| {
            (0..grid.node_count())
                .map(|i| {
                    let p = grid.point(i);
                    let dir = if r[i] > 0.0 { p[d] / r[i] } else { 0.0 };
                    c64::from_polar(1.0, -k * r[i]) * (grad[d][i] - c64::new(0.0, k * dir) * u[i])
                })
                .collect()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrucialLemma {
    /// Boundary terms `(n-1) Re alpha |u|^2 + 2 Re x alpha u- . conj(grad u-)`.
    Lemma33,
    /// Boundary terms `-x . grad Re alpha |u|^2 - 2 Im x Im alpha u- . conj(grad u-)`.
    Lemma34,
}

/// `LHS - RHS` of the crucial inequality for a solution of
/// `-Delta u = lambda u + f`, `-u_{x_n} + alpha u = 0`. Genuine solutions give
/// a gap `<= 0` up to discretization error; `signed_gap` carries the sign.
pub fn crucial_inequality_gap(
    u: &[c64],
    f: &[c64],
    alpha: &BoundaryFunction,
    lambda: c64,
    grid: &Grid,
    which: CrucialLemma,
) -> Result<IdentityResidualReport> {
    check_data(grid, u, f, None, alpha)?;
    let n = grid.dim();
    if n < 2 {
        return Err(Error::UnsupportedDimension { op: "crucial_inequality_gap", dim: n });
    }
    if !(lambda.im != 0.0 && lambda.im.abs() <= lambda.re) {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} is outside the sector 0 < |Im lambda| <= Re lambda"
        )));
    }
    let nf = n as f64;
    let s = lambda.im.abs() / lambda.re.sqrt();
    let um = u_minus_transform(u, lambda, grid)?;
    let fm = u_minus_transform(f, lambda, grid)?;
    let r = grid.radial_weight().values;
    let rb = grid.boundary_radius();
    let tr = grid.trace(u);
    let trm = grid.trace(&um);
    let bgrad = boundary_radial_gradient(grid, &trm);
    let xgrad = radial_gradient(grid, &um);
    let a = &alpha.samples;

    let e = energy(grid, &um);
    let ex = weighted_energy(grid, &um);
    let bax = surf(grid, |b| (a[b].re * rb[b] * tr[b].norm_sqr()).into()).re;
    let boundary = match which {
        CrucialLemma::Lemma33 => {
            let ba = surf(grid, |b| (a[b].re * tr[b].norm_sqr()).into()).re;
            let cross = surf(grid, |b| a[b] * trm[b] * bgrad[b].conj()).re;
            (nf - 1.0) * ba + 2.0 * cross
        }
        CrucialLemma::Lemma34 => {
            let xa = radial_derivative(alpha, grid).real_part;
            let bx = surf(grid, |b| (xa[b] * tr[b].norm_sqr()).into()).re;
            let cross = surf(grid, |b| a[b].im * trm[b] * bgrad[b].conj()).im;
            -bx - 2.0 * cross
        }
    };
    let lhs = e + (nf - 3.0) / (nf - 1.0) * s * ex + boundary + s * bax;
    let rhs = (nf - 1.0) * vol(grid, |i| f[i] * u[i].conj()).re
        + 2.0 * vol(grid, |i| fm[i] * xgrad[i].conj()).re
        + s * vol(grid, |i| r[i] * f[i] * u[i].conj()).re;
    let id = match which {
        CrucialLemma::Lemma33 => IdentityId::Crucial33,
        CrucialLemma::Lemma34 => IdentityId::Crucial34,
    };
    let mut report = IdentityResidualReport::real(id, lhs, rhs, grid);
    report.signed_gap = Some(lhs - rhs);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::{manufactured_problem, observed_order, Profile, Profile1d};
    use super::*;

    fn alpha_fn(grid: &Grid, a: c64) -> BoundaryFunction {
        let mut bf = BoundaryFunction::from_samples(
            grid,
            grid.sample_boundary(|x| a / (1.0 + x.iter().map(|v| v * v).sum::<f64>())),
            "a/(1+|x'|^2)",
        )
        .unwrap();
        bf.gradient_samples = Some(grid.sample_boundary(|x| {
            let s = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
            let mut g = [c64::default(); 3];
            for (j, v) in x.iter().enumerate() {
                g[j] = -a * 2.0 * v / (s * s);
            }
            g
        }));
        bf
    }

    fn plane_profile() -> Profile {
        Profile::new(vec![
            Profile1d::gaussian(3.5, 1.2).with_polynomial(vec![0.0, 1.0]).with_wavenumber(0.7),
            Profile1d::gaussian(1.0, 1.2).with_polynomial(vec![1.0, 0.3]).with_wavenumber(-0.4),
        ])
    }

    #[test]
    fn zero_field_has_zero_residuals() {
        let g = Grid::new(2, 4.0, 0.25).unwrap();
        let p = manufactured_problem(&Profile::zero(2), c64::new(1.0, 2.0), &alpha_fn(&g, c64::new(1.0, 1.0)), &g)
            .unwrap();
        for r in identity_residuals(&p, &g).unwrap() {
            assert_eq!(r.residual, 0.0);
        }
    }

    #[test]
    fn plane_identities_are_second_order() {
        let lambda = c64::new(1.5, 0.8);
        let mut res = Vec::new();
        for h in [0.1, 0.05] {
            let g = Grid::new(2, 10.0, h).unwrap();
            let p = manufactured_problem(&plane_profile(), lambda, &alpha_fn(&g, c64::new(0.6, -0.4)), &g).unwrap();
            res.push(identity_residuals(&p, &g).unwrap());
        }
        for (c, f) in res[0].iter().zip(&res[1]) {
            let order = observed_order(c.residual, f.residual);
            assert!(order > 1.7 && order < 2.3, "{}: {} -> {}", c.identity_id, c.residual, f.residual);
        }
    }

    #[test]
    fn u_minus_is_unimodular_and_rejects_real_lambda() {
        let g = Grid::new(2, 4.0, 0.25).unwrap();
        let u: Vec<c64> = g.sample(|x| c64::new(x[0], x[1]));
        let um = u_minus_transform(&u, c64::new(4.0, 1.0), &g).unwrap();
        assert!(u.iter().zip(&um).all(|(a, b)| (a.norm() - b.norm()).abs() < 1e-14));
        assert_eq!(u_minus_transform(&u, c64::new(0.0, 1.0), &g).unwrap(), u);
        assert!(u_minus_transform(&u, c64::new(4.0, 0.0), &g).is_err());
    }

    #[test]
    fn u_minus_gradient_matches_differences() {
        let lambda = c64::new(2.0, 0.5);
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let g = Grid::new(2, 10.0, h).unwrap();
            let u: Vec<c64> = g.sample(|x| plane_profile().eval(x).0);
            let direct = node_gradient(&g, &u_minus_transform(&u, lambda, &g).unwrap());
            let chain = u_minus_gradient(&u, lambda, &g).unwrap();
            errs.push(
                (0..2)
                    .flat_map(|d| direct[d].iter().zip(&chain[d]).map(|(a, b)| (a - b).norm()).collect::<Vec<_>>())
                    .fold(0.0, f64::max),
            );
        }
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }
}
