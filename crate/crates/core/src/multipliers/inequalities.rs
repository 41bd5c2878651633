//! Hardy, trace and trace-interpolation inequalities on the grid.

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::hypotheses::{fft_nd, sobolev_half_norm_sq, wavenumber_modulus, Taper};
use crate::stencil::{edge_energy, Closure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardyVariant {
    /// `int |psi|^2 / |x|^2 <= 4/(n-2)^2 int |grad psi|^2`, `n >= 3`.
    Unweighted,
    /// `int |psi|^2 / |x| <= 4/(n-1)^2 int |x| |grad psi|^2`, `n >= 2`.
    Weighted,
}

impl HardyVariant {
    pub fn constant(self, n: usize) -> f64 {
        let d = match self {
            HardyVariant::Unweighted => n as f64 - 2.0,
            HardyVariant::Weighted => n as f64 - 1.0,
        };
        4.0 / (d * d)
    }
}

/// Left side over the energy side of the Hardy inequality. Edges leaving the
/// box see zero ghost values.
pub fn hardy_ratio(psi: &[c64], grid: &Grid, variant: HardyVariant) -> Result<f64> {
    check_len(grid.node_count(), psi.len())?;
    let n = grid.dim();
    let min_dim = match variant {
        HardyVariant::Unweighted => 3,
        HardyVariant::Weighted => 2,
    };
    if n < min_dim || grid.is_boundary_only() {
        return Err(Error::UnsupportedDimension { op: "hardy_ratio", dim: n });
    }
    let r = grid.radial_weight().values;
    let w = grid.quadrature_weights();
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (num, den) = match variant {
        HardyVariant::Unweighted => (
            (0..psi.len()).map(|i| w[i] * psi[i].norm_sqr() / (r[i] * r[i])).sum::<f64>(),
            edge_energy(grid, psi, Closure::Dirichlet, |_| 1.0),
        ),
        HardyVariant::Weighted => (
            (0..psi.len()).map(|i| w[i] * psi[i].norm_sqr() / r[i]).sum::<f64>(),
            edge_energy(grid, psi, Closure::Dirichlet, norm),
        ),
    };
    if den == 0.0 {
        return Err(Error::Precondition("hardy_ratio of a field with zero energy".into()));
    }
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceCheck {
    /// `sum |xi'| |u^(xi', 0)|^2` from the boundary FFT.
    pub trace_norm_sq: f64,
    /// `||grad u||^2` on the volume grid.
    pub grad_norm_sq: f64,
    /// `||grad U||^2` for the extension `U = F^{-1}[u^ exp(-|xi'| x_n)]`.
    pub extension_norm_sq: f64,
}

/// Compares the squared half-norm of the trace with the Dirichlet energy of
/// `u` and of the harmonic extension of its trace. `closure` applies to the
/// tangential edges of both energies; `Periodic` matches the periodic FFT.
pub fn trace_half_norm_check(u: &[c64], grid: &Grid, closure: Closure) -> Result<TraceCheck> {
    check_len(grid.node_count(), u.len())?;
    let n = grid.dim();
    if n < 2 || grid.is_boundary_only() {
        return Err(Error::UnsupportedDimension { op: "trace_half_norm_check", dim: n });
    }
    let tr = grid.trace(u);
    let trace_norm_sq = sobolev_half_norm_sq(&tr, grid, Taper::None)?;
    let grad_norm_sq = edge_energy(grid, u, closure, |_| 1.0);

    let mut spec = tr;
    let nt = grid.tangential_count();
    let d = grid.boundary_dim();
    fft_nd(&mut spec, nt, d, false);
    let k = wavenumber_modulus(grid);
    let nb = grid.boundary_count() as f64;
    let mut ext = vec![c64::default(); grid.node_count()];
    let mut layer = vec![c64::default(); spec.len()];
    for (kk, &xn) in grid.normal_nodes().iter().enumerate() {
        for (m, v) in layer.iter_mut().enumerate() {
            *v = spec[m] * ((-k[m] * xn).exp() / nb);
        }
        fft_nd(&mut layer, nt, d, true);
        for (b, v) in layer.iter().enumerate() {
            ext[grid.join(b, kk)] = *v;
        }
    }
    let extension_norm_sq = edge_energy(grid, &ext, closure, |_| 1.0);
    Ok(TraceCheck { trace_norm_sq, grad_norm_sq, extension_norm_sq })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceInterpolation {
    /// `||u||^2` on the boundary.
    pub lhs: f64,
    /// `eps ||grad u||^2 + ||u||^2 / eps`.
    pub rhs: f64,
}

/// Both sides of `||u||_bd^2 <= eps ||grad u||^2 + ||u||^2 / eps`.
pub fn trace_interpolation_check(u: &[c64], grid: &Grid, epsilon: f64) -> Result<TraceInterpolation> {
    check_len(grid.node_count(), u.len())?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    let lhs: f64 =
        grid.trace(u).iter().zip(grid.surface_weights()).map(|(v, s)| s * v.norm_sqr()).sum();
    let energy = edge_energy(grid, u, Closure::Dirichlet, |_| 1.0);
    let mass: f64 = u.iter().zip(grid.quadrature_weights()).map(|(v, w)| w * v.norm_sqr()).sum();
    Ok(TraceInterpolation { lhs, rhs: epsilon * energy + mass / epsilon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn half_line_exponential_is_near_equality() {
        let g = Grid::new(1, 20.0, 0.01).unwrap();
        let u: Vec<c64> = g.sample(|x| c64::new((-x[0]).exp(), 0.0));
        let t = trace_interpolation_check(&u, &g, 1.0).unwrap();
        assert!((t.lhs - 1.0).abs() < 1e-14);
        assert!((t.rhs - 1.0).abs() < 1e-4, "{}", t.rhs);
    }

    #[test]
    fn plane_wave_extension_is_its_own_extension() {
        let l = 8.0;
        let g = Grid::new(2, l, 0.05).unwrap();
        let xi = 2.0 * PI / l;
        let u: Vec<c64> = g.sample(|x| c64::from_polar((-xi * x[1]).exp(), xi * x[0]));
        let t = trace_half_norm_check(&u, &g, Closure::Periodic).unwrap();
        assert!((t.extension_norm_sq - t.grad_norm_sq).abs() < 1e-10 * t.grad_norm_sq);
        assert!((t.trace_norm_sq - xi * 2.0 * l).abs() < 1e-10);
    }

    #[test]
    fn hardy_needs_dimension() {
        let g = Grid::new(2, 4.0, 0.25).unwrap();
        let u = vec![c64::new(1.0, 0.0); g.node_count()];
        assert!(hardy_ratio(&u, &g, HardyVariant::Unweighted).is_err());
        assert!(hardy_ratio(&u, &g, HardyVariant::Weighted).is_ok());
    }
}
