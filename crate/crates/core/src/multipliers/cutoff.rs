//! Horizontal cut-off `xi_R(x) = chi(|x| / R)` and the error terms it
//! produces.

use std::sync::OnceLock;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::stencil::node_gradient;

/// `exp(-1/s)` and its first two derivatives, zero for `s <= 0`.
fn psi(s: f64) -> [f64; 3] {
    if s <= 0.0 {
        return [0.0; 3];
    }
    let e = (-1.0 / s).exp();
    [e, e / (s * s), e * (1.0 - 2.0 * s) / s.powi(4)]
}

/// `chi(t)` with derivatives: 1 on `[0, 1]`, 0 on `[2, inf)`, smooth between.
pub fn cutoff_profile(t: f64) -> [f64; 3] {
    if t <= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    if t >= 2.0 {
        return [0.0; 3];
    }
    let [a, pa, ppa] = psi(2.0 - t);
    let [b, pb, ppb] = psi(t - 1.0);
    let (da, dda) = (-pa, ppa);
    let (db, ddb) = (pb, ppb);
    let s = a + b;
    let ds = da + db;
    let num = da * b - a * db;
    let dnum = dda * b - a * ddb;
    [a / s, num / (s * s), dnum / (s * s) - 2.0 * num * ds / (s * s * s)]
}

/// `max |chi'|` and `max |chi''|`, so that `|grad xi_R| <= c1 / R` and
/// `|Delta xi_R| <= (c2 + (n-1) c1) / R^2` (using `|x| >= R` on the support).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CutoffConstants {
    pub c1: f64,
    pub c2: f64,
}

/// Calibrated once on a fine sample of `[1, 2]`.
pub fn cutoff_constants() -> CutoffConstants {
    static C: OnceLock<CutoffConstants> = OnceLock::new();
    *C.get_or_init(|| {
        let m = 200_000;
        let (mut c1, mut c2) = (0.0f64, 0.0f64);
        for j in 0..=m {
            let [_, d1, d2] = cutoff_profile(1.0 + j as f64 / m as f64);
            c1 = c1.max(d1.abs());
            c2 = c2.max(d2.abs());
        }
        CutoffConstants { c1, c2 }
    })
}

/// One row of the cut-off table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutoffRow {
    pub r: f64,
    /// `2 ||grad u . grad xi|| + ||u Delta xi||`.
    pub eps1: f64,
    /// Same with the weight `|x|`.
    pub eps2: f64,
    /// `||u grad xi||` on the boundary.
    pub eps3: f64,
    /// Same with the weight `|x|`.
    pub eps4: f64,
    /// `||f~_R - f_R||` evaluated directly.
    pub f_defect: f64,
    /// `||x (f~_R - f_R)||` evaluated directly.
    pub xf_defect: f64,
    /// `||g~_R||` on the boundary; `grad xi_R . eta` vanishes on `x_n = 0`.
    pub g_defect: f64,
    pub xg_defect: f64,
    /// `(int |grad u|^2 |grad xi|^2)^{1/2}` over `(int_A |grad u|^2)^{1/2}`,
    /// `A` the annulus `R <= |x| <= 2R`. Scales like `1/R`.
    pub grad_factor: f64,
    /// `(int |u|^2 |Delta xi|^2)^{1/2}` over `(int_A |u|^2)^{1/2}`. Scales like `1/R^2`.
    pub lap_factor: f64,
    /// `(int |x|^2 |u|^2 |Delta xi|^2)^{1/2}` over `(int_A |u|^2)^{1/2}`. Scales like `1/R`.
    pub weighted_lap_factor: f64,
    /// `eps3` over `(int_{A'} |u|^2)^{1/2}`, `A'` the boundary annulus. Scales like `1/R`.
    pub boundary_factor: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// Error terms of the cut-off approximation for each `R` in `radii`.
pub fn cutoff_errors(u: &[c64], grid: &Grid, radii: &[f64]) -> Result<Vec<CutoffRow>> {
    check_len(grid.node_count(), u.len())?;
    if grid.is_boundary_only() {
        return Err(Error::Precondition("cut-off errors need a volume grid".into()));
    }
    let l = grid.half_width();
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0) || 2.0 * r > l) {
        return Err(Error::Precondition(format!(
            "cut-off radius {r} needs 0 < 2R <= L = {l}; the window would be truncated"
        )));
    }
    let n = grid.dim();
    let w = grid.quadrature_weights();
    let sw = grid.surface_weights();
    let rad = grid.radial_weight().values;
    let grad = node_gradient(grid, u);
    let tr = grid.trace(u);
    let rb = grid.boundary_radius();
    let grad_sq: Vec<f64> = (0..u.len()).map(|i| (0..n).map(|d| grad[d][i].norm_sqr()).sum()).collect();

    let rows = radii
        .iter()
        .map(|&big_r| {
            let mut acc = [0.0f64; 10];
            for i in 0..u.len() {
                let r = rad[i];
                let t = r / big_r;
                let [_, d1, d2] = cutoff_profile(t);
                let gxi = d1 / big_r;
                let lap = if r > 0.0 { d2 / (big_r * big_r) + (n as f64 - 1.0) * gxi / r } else { 0.0 };
                let p = grid.point(i);
                let udotxi: c64 =
                    if r > 0.0 { (0..n).map(|d| grad[d][i] * p[d]).sum::<c64>() * (gxi / r) } else { c64::default() };
                let defect = (2.0 * udotxi + u[i] * lap).norm_sqr();
                let us = u[i].norm_sqr();
                let in_annulus = (1.0..=2.0).contains(&t);
                acc[0] += w[i] * grad_sq[i] * gxi * gxi;
                acc[1] += w[i] * us * lap * lap;
                acc[2] += w[i] * r * r * grad_sq[i] * gxi * gxi;
                acc[3] += w[i] * r * r * us * lap * lap;
                acc[4] += w[i] * defect;
                acc[5] += w[i] * r * r * defect;
                if in_annulus {
                    acc[6] += w[i] * grad_sq[i];
                    acc[7] += w[i] * us;
                }
            }
            let mut bd = [0.0f64; 3];
            for b in 0..tr.len() {
                let t = rb[b] / big_r;
                let gxi = cutoff_profile(t)[1] / big_r;
                let us = tr[b].norm_sqr();
                bd[0] += sw[b] * us * gxi * gxi;
                bd[1] += sw[b] * rb[b] * rb[b] * us * gxi * gxi;
                if (1.0..=2.0).contains(&t) {
                    bd[2] += sw[b] * us;
                }
            }
            let s = |v: f64| v.sqrt();
            CutoffRow {
                r: big_r,
                eps1: 2.0 * s(acc[0]) + s(acc[1]),
                eps2: 2.0 * s(acc[2]) + s(acc[3]),
                eps3: s(bd[0]),
                eps4: s(bd[1]),
                f_defect: s(acc[4]),
                xf_defect: s(acc[5]),
                g_defect: 0.0,
                xg_defect: 0.0,
                grad_factor: ratio(s(acc[0]), s(acc[6])),
                lap_factor: ratio(s(acc[1]), s(acc[7])),
                weighted_lap_factor: ratio(s(acc[3]), s(acc[7])),
                boundary_factor: ratio(s(bd[0]), s(bd[2])),
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_a_smooth_step() {
        assert_eq!(cutoff_profile(0.5)[0], 1.0);
        assert_eq!(cutoff_profile(2.5)[0], 0.0);
        assert!((cutoff_profile(1.5)[0] - 0.5).abs() < 1e-15);
        let e = 1e-6;
        for t in [1.1, 1.4, 1.8] {
            let [_, d1, d2] = cutoff_profile(t);
            let fd1 = (cutoff_profile(t + e)[0] - cutoff_profile(t - e)[0]) / (2.0 * e);
            let fd2 = (cutoff_profile(t + e)[1] - cutoff_profile(t - e)[1]) / (2.0 * e);
            assert!((d1 - fd1).abs() < 1e-7 && (d2 - fd2).abs() < 1e-6);
        }
        let c = cutoff_constants();
        assert!(c.c1 > 1.0 && c.c1 < 3.0 && c.c2 > 0.0);
    }

    #[test]
    fn support_inside_ball_gives_zero_errors() {
        let g = Grid::new(2, 20.0, 0.25).unwrap();
        let u: Vec<c64> = g.sample(|x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if r2 < 1.0 {
                c64::new((1.0 - r2).powi(3), 0.0)
            } else {
                c64::default()
            }
        });
        for row in cutoff_errors(&u, &g, &[2.0, 4.0, 8.0]).unwrap() {
            assert_eq!(row.eps1 + row.eps2 + row.eps3 + row.eps4 + row.f_defect, 0.0);
        }
    }

    #[test]
    fn oversized_radius_is_rejected() {
        let g = Grid::new(2, 10.0, 0.25).unwrap();
        let u = vec![c64::default(); g.node_count()];
        assert!(cutoff_errors(&u, &g, &[6.0]).is_err());
    }
}
