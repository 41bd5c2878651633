//! Manufactured data `(u, f, g, lambda)` with `f = -Delta u - lambda u` and
//! `g = -u_{x_n} + alpha u`.

use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary_data::{BoundaryFunction, DerivativeMethod};
use crate::error::{check_len, Error, Result};
use crate::grid::Grid;

/// Largest admissible `|u|` on the artificial walls, relative to `max |u|`.
pub const WALL_LEAKAGE_TOL: f64 = 1e-12;

/// `P(t) exp(-(t - c)^2 / s^2 - a t + i k t)` with a polynomial `P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile1d {
    /// Coefficients of `P`, constant term first.
    pub coeffs: Vec<f64>,
    pub center: f64,
    /// `1 / s^2`; zero for a pure exponential.
    pub inv_width_sq: f64,
    pub decay: f64,
    pub wavenumber: f64,
}

impl Profile1d {
    pub fn gaussian(center: f64, width: f64) -> Self {
        Self { coeffs: vec![1.0], center, inv_width_sq: 1.0 / (width * width), decay: 0.0, wavenumber: 0.0 }
    }

    pub fn exponential(decay: f64) -> Self {
        Self { coeffs: vec![1.0], center: 0.0, inv_width_sq: 0.0, decay, wavenumber: 0.0 }
    }

    pub fn with_polynomial(mut self, coeffs: Vec<f64>) -> Self {
        self.coeffs = coeffs;
        self
    }

    pub fn with_wavenumber(mut self, k: f64) -> Self {
        self.wavenumber = k;
        self
    }

    pub fn with_decay(mut self, a: f64) -> Self {
        self.decay = a;
        self
    }

    fn poly(&self, t: f64) -> [f64; 3] {
        let mut p = [0.0; 3];
        for &c in self.coeffs.iter().rev() {
            p[2] = p[2] * t + 2.0 * p[1];
            p[1] = p[1] * t + p[0];
            p[0] = p[0] * t + c;
        }
        p
    }

    /// Value, first and second derivative.
    pub fn eval(&self, t: f64) -> [c64; 3] {
        let s = t - self.center;
        let e = c64::new(-self.inv_width_sq * s * s - self.decay * t, self.wavenumber * t).exp();
        let q = c64::new(-2.0 * self.inv_width_sq * s - self.decay, self.wavenumber);
        let dq = -2.0 * self.inv_width_sq;
        let [p, dp, ddp] = self.poly(t);
        [e * p, e * (dp + q * p), e * (ddp + 2.0 * dp * q + p * dq + p * q * q)]
    }
}

/// Separable profile `amplitude * prod_j phi_j(x_j)`, tangential factors
/// first and the normal factor last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub amplitude: c64,
    pub factors: Vec<Profile1d>,
}

impl Profile {
    pub fn new(factors: Vec<Profile1d>) -> Self {
        Self { amplitude: c64::new(1.0, 0.0), factors }
    }

    pub fn zero(dim: usize) -> Self {
        Self { amplitude: c64::default(), factors: vec![Profile1d::gaussian(0.0, 1.0); dim] }
    }

    pub fn scaled(mut self, a: c64) -> Self {
        self.amplitude *= a;
        self
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    /// Value, gradient and Laplacian at `x`.
    pub fn eval(&self, x: &[f64]) -> (c64, [c64; 4], c64) {
        let evals: Vec<[c64; 3]> = self.factors.iter().zip(x).map(|(p, &t)| p.eval(t)).collect();
        let n = evals.len();
        let mut grad = [c64::default(); 4];
        let mut lap = c64::default();
        let mut value = self.amplitude;
        for e in &evals {
            value *= e[0];
        }
        for j in 0..n {
            let others: c64 = (0..n).filter(|&i| i != j).map(|i| evals[i][0]).product();
            grad[j] = self.amplitude * others * evals[j][1];
            lap += self.amplitude * others * evals[j][2];
        }
        (value, grad, lap)
    }
}

#[derive(Clone, Debug)]
pub struct ManufacturedProblem {
    pub u: Vec<c64>,
    pub f: Vec<c64>,
    pub g: Vec<c64>,
    pub lambda: c64,
    pub alpha: BoundaryFunction,
    pub method: DerivativeMethod,
}

fn check_walls(grid: &Grid, u: &[c64]) -> Result<()> {
    let peak = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(());
    }
    let nn = grid.normal_count();
    let nt = grid.tangential_count();
    let d = grid.boundary_dim();
    let mut leak: f64 = 0.0;
    for (i, z) in u.iter().enumerate() {
        let (b, k) = grid.split(i);
        let m = grid.tangential_multi_index(b);
        let on_wall = k == nn - 1 || m[..d].iter().any(|&j| j == 0 || j == nt - 1);
        if on_wall {
            leak = leak.max(z.norm());
        }
    }
    if leak > WALL_LEAKAGE_TOL * peak {
        return Err(Error::Precondition(format!(
            "profile reaches the artificial walls: |u| = {leak:.3e} there, {:.3e} x max",
            leak / peak
        )));
    }
    Ok(())
}

fn check_inputs(grid: &Grid, alpha: &BoundaryFunction) -> Result<()> {
    if grid.is_boundary_only() {
        return Err(Error::Precondition("manufactured problems need a volume grid".into()));
    }
    check_len(grid.boundary_count(), alpha.samples.len())
}

/// Samples `profile` and builds `f`, `g` from its analytic derivatives.
pub fn manufactured_problem(
    profile: &Profile,
    lambda: c64,
    alpha: &BoundaryFunction,
    grid: &Grid,
) -> Result<ManufacturedProblem> {
    check_inputs(grid, alpha)?;
    if profile.dim() != grid.dim() {
        return Err(Error::Precondition(format!(
            "profile has {} factors, grid dimension is {}",
            profile.dim(),
            grid.dim()
        )));
    }
    let n = grid.dim();
    let mut u = Vec::with_capacity(grid.node_count());
    let mut f = Vec::with_capacity(grid.node_count());
    for i in 0..grid.node_count() {
        let p = grid.point(i);
        let (v, _, lap) = profile.eval(&p[..n]);
        u.push(v);
        f.push(-lap - lambda * v);
    }
    check_walls(grid, &u)?;
    let g = grid
        .boundary_index_set()
        .iter()
        .zip(&alpha.samples)
        .map(|(&i, a)| {
            let p = grid.point(i);
            let (v, grad, _) = profile.eval(&p[..n]);
            -grad[n - 1] + a * v
        })
        .collect();
    Ok(ManufacturedProblem { u, f, g, lambda, alpha: alpha.clone(), method: DerivativeMethod::Analytic })
}

impl ManufacturedProblem {
    /// Builds `f` and `g` from node samples by fourth-order differences. Values
    /// beyond the walls are taken as zero, the boundary layer uses one-sided
    /// stencils.
    pub fn from_samples(u: Vec<c64>, lambda: c64, alpha: &BoundaryFunction, grid: &Grid) -> Result<Self> {
        check_inputs(grid, alpha)?;
        check_len(grid.node_count(), u.len())?;
        if grid.normal_count() < 6 {
            return Err(Error::Precondition("fourth-order stencils need at least 6 normal layers".into()));
        }
        check_walls(grid, &u)?;
        let lap = fourth_order_laplacian(grid, &u);
        let f = u.iter().zip(&lap).map(|(v, l)| -l - lambda * v).collect();
        let h = grid.spacing();
        let g = grid
            .boundary_index_set()
            .iter()
            .zip(&alpha.samples)
            .map(|(&i, a)| {
                let dn = (-25.0 * u[i] + 48.0 * u[i + 1] - 36.0 * u[i + 2] + 16.0 * u[i + 3] - 3.0 * u[i + 4])
                    / (12.0 * h);
                -dn + a * u[i]
            })
            .collect();
        Ok(Self { u, f, g, lambda, alpha: alpha.clone(), method: DerivativeMethod::FiniteDifference })
    }
}

/// Fourth-order Laplacian of node samples.
pub(crate) fn fourth_order_laplacian(grid: &Grid, u: &[c64]) -> Vec<c64> {
    let n = grid.dim();
    let h2 = grid.spacing() * grid.spacing();
    let at = |i: usize, d: usize, s: isize| -> c64 {
        let mut j = Some(i);
        for _ in 0..s.unsigned_abs() {
            j = j.and_then(|j| grid.neighbor(j, d, s.signum()));
        }
        j.map(|j| u[j]).unwrap_or_default()
    };
    (0..grid.node_count())
        .map(|i| {
            let mut acc = c64::default();
            for d in 0..n {
                let k = if d == n - 1 { grid.split(i).1 } else { usize::MAX };
                let v = |s: isize| at(i, d, s);
                acc += match k {
                    0 => 45.0 * v(0) - 154.0 * v(1) + 214.0 * v(2) - 156.0 * v(3) + 61.0 * v(4) - 10.0 * v(5),
                    1 => 10.0 * v(-1) - 15.0 * v(0) - 4.0 * v(1) + 14.0 * v(2) - 6.0 * v(3) + v(4),
                    _ => -v(-2) + 16.0 * v(-1) - 30.0 * v(0) + 16.0 * v(1) - v(2),
                } / (12.0 * h2);
            }
            acc
        })
        .collect()
}

/// `exp(-|x - c|^2 / w^2 + i k . x)`.
pub fn gaussian_bump(grid: &Grid, center: &[f64], width: f64, wave: &[f64]) -> Vec<c64> {
    grid.sample(|x| {
        let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        let phase: f64 = x.iter().zip(wave).map(|(a, k)| a * k).sum();
        c64::new(-r2 / (width * width), phase).exp()
    })
}

/// `count` Gaussian bumps with random centers in the inner half of the box,
/// widths in `[max(2h, L/40), L/10]` and wave vectors with entries in
/// `[-2, 2]`.
pub fn random_bumps(grid: &Grid, count: usize, seed: u64) -> Vec<Vec<c64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.dim();
    let l = grid.half_width();
    let wmin = (2.0 * grid.spacing()).max(l / 40.0);
    let wmax = (l / 10.0).max(wmin);
    (0..count)
        .map(|_| {
            let mut c = [0.0; 4];
            for (j, v) in c.iter_mut().enumerate().take(n) {
                *v = if j == n - 1 { rng.random_range(0.0..0.5 * l) } else { rng.random_range(-0.5 * l..0.5 * l) };
            }
            let w = rng.random_range(wmin..=wmax);
            let mut k = [0.0; 4];
            for v in k.iter_mut().take(n) {
                *v = rng.random_range(-2.0..2.0);
            }
            gaussian_bump(grid, &c[..n], w, &k[..n])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_alpha(grid: &Grid) -> BoundaryFunction {
        BoundaryFunction::from_samples(grid, vec![c64::default(); grid.boundary_count()], "0").unwrap()
    }

    #[test]
    fn profile_derivatives_match_differences() {
        let p = Profile1d::gaussian(0.7, 1.3).with_polynomial(vec![0.5, -1.0, 0.25]).with_wavenumber(0.8).with_decay(0.3);
        let t = 0.9;
        let e = 1e-5;
        let [v, d1, d2] = p.eval(t);
        let [vp, ..] = p.eval(t + e);
        let [vm, ..] = p.eval(t - e);
        assert!(((vp - vm) / (2.0 * e) - d1).norm() < 1e-8);
        assert!(((vp - 2.0 * v + vm) / (e * e) - d2).norm() < 1e-4);
    }

    #[test]
    fn zero_profile_gives_zero_data() {
        let g = Grid::new(2, 4.0, 0.25).unwrap();
        let m = manufactured_problem(&Profile::zero(2), c64::new(1.0, 1.0), &zero_alpha(&g), &g).unwrap();
        assert!(m.f.iter().chain(&m.g).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn wall_contact_is_rejected() {
        let g = Grid::new(1, 4.0, 0.1).unwrap();
        let p = Profile::new(vec![Profile1d::exponential(1.0)]);
        assert!(manufactured_problem(&p, c64::new(1.0, 0.0), &zero_alpha(&g), &g).is_err());
    }

    #[test]
    fn analytic_laplacian_matches_fourth_order_differences() {
        let l = 12.0;
        let mut errs = Vec::new();
        for h in [0.2, 0.1] {
            let g = Grid::new(2, l, h).unwrap();
            let p = Profile::new(vec![Profile1d::gaussian(0.0, 1.0), Profile1d::gaussian(0.5 * l, 1.0)]);
            let lambda = c64::new(2.0, 1.0);
            let m = manufactured_problem(&p, lambda, &zero_alpha(&g), &g).unwrap();
            let fd = ManufacturedProblem::from_samples(m.u.clone(), lambda, &zero_alpha(&g), &g).unwrap();
            errs.push(m.f.iter().zip(&fd.f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 12.0 && ratio < 20.0, "{errs:?}");
    }
}
