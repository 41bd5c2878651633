//! Fractional calculus on the boundary hyperplane and the hypothesis checks
//! for the three eigenvalue-absence theorems.
//!
//! `(-Delta)^{1/4}` is the Fourier multiplier `|k|^{1/2}` on the `2L`-periodic
//! boundary grid, wavenumbers `k = pi m / L`. A smooth radial taper can be
//! applied first to damp the periodization.

use std::f64::consts::PI;
use std::io::Write;

use faer::{Mat, Side};
use num_complex::Complex64 as c64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::boundary_data::{divergence_field, radial_derivative, BoundaryFunction};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Tolerance for the sign conditions.
pub const SIGN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Taper {
    None,
    /// Equal to 1 for `|x'| <= L - width`, smooth step down to 0 at `|x'| = L`.
    Radial { width: f64 },
}

impl Taper {
    /// Radial taper of width `L / 10`.
    pub fn default_for(grid: &Grid) -> Self {
        Taper::Radial { width: 0.1 * grid.half_width() }
    }

    pub fn describe(&self) -> String {
        match self {
            Taper::None => "none".into(),
            Taper::Radial { width } => format!("radial(width={width})"),
        }
    }

    /// Taper values on the boundary layer.
    pub fn profile(&self, grid: &Grid) -> Vec<f64> {
        match *self {
            Taper::None => vec![1.0; grid.boundary_count()],
            Taper::Radial { width } => {
                let l = grid.half_width();
                grid.boundary_radius()
                    .into_iter()
                    .map(|r| {
                        if r <= l - width {
                            1.0
                        } else if r >= l {
                            0.0
                        } else {
                            smooth_step((l - r) / width)
                        }
                    })
                    .collect()
            }
        }
    }
}

/// `C^infinity` step from 0 at `t = 0` to 1 at `t = 1`.
pub(crate) fn smooth_step(t: f64) -> f64 {
    let psi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let a = psi(t);
    let b = psi(1.0 - t);
    a / (a + b)
}

fn boundary_shape(grid: &Grid, op: &'static str) -> Result<(usize, usize)> {
    let d = grid.boundary_dim();
    if d == 0 {
        return Err(Error::UnsupportedDimension { op, dim: grid.dim() });
    }
    Ok((d, grid.tangential_count()))
}

/// In-place multi-dimensional FFT of a field stored with the first axis
/// slowest. The inverse is unnormalized.
pub(crate) fn fft_nd(data: &mut [c64], nt: usize, d: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(nt) } else { planner.plan_fft_forward(nt) };
    let mut line = vec![c64::default(); nt];
    for axis in 0..d {
        let stride = nt.pow((d - 1 - axis) as u32);
        let total = data.len();
        for start in 0..total {
            if (start / stride) % nt != 0 {
                continue;
            }
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[start + j * stride];
            }
            fft.process(&mut line);
            for (j, v) in line.iter().enumerate() {
                data[start + j * stride] = *v;
            }
        }
    }
}

/// `|k|` for every Fourier index of the boundary grid.
pub(crate) fn wavenumber_modulus(grid: &Grid) -> Vec<f64> {
    let d = grid.boundary_dim();
    let nt = grid.tangential_count();
    let l = grid.half_width();
    let k1: Vec<f64> = (0..nt)
        .map(|j| {
            let m = if j < nt / 2 { j as f64 } else { j as f64 - nt as f64 };
            PI * m / l
        })
        .collect();
    (0..grid.boundary_count())
        .map(|b| {
            let multi = grid.tangential_multi_index(b);
            multi[..d].iter().map(|&j| k1[j] * k1[j]).sum::<f64>().sqrt()
        })
        .collect()
}

fn tapered_spectrum(field: &[c64], grid: &Grid, taper: Taper) -> Vec<c64> {
    let taper = taper.profile(grid);
    let mut data: Vec<c64> = field.iter().zip(&taper).map(|(f, t)| f * *t).collect();
    fft_nd(&mut data, grid.tangential_count(), grid.boundary_dim(), false);
    data
}

/// `(-Delta)^{1/4} f` on the boundary grid.
pub fn fractional_quarter_laplacian(field: &[c64], grid: &Grid, taper: Taper) -> Result<Vec<c64>> {
    let (d, nt) = boundary_shape(grid, "fractional_quarter_laplacian")?;
    crate::error::check_len(grid.boundary_count(), field.len())?;
    let mut data = tapered_spectrum(field, grid, taper);
    for (v, k) in data.iter_mut().zip(wavenumber_modulus(grid)) {
        *v *= k.sqrt();
    }
    fft_nd(&mut data, nt, d, true);
    let scale = 1.0 / grid.boundary_count() as f64;
    data.iter_mut().for_each(|v| *v *= scale);
    Ok(data)
}

/// Squared homogeneous half-norm `int |xi| |f^(xi)|^2`, by Plancherel on the
/// grid.
pub fn sobolev_half_norm_sq(field: &[c64], grid: &Grid, taper: Taper) -> Result<f64> {
    boundary_shape(grid, "sobolev_half_norm_sq")?;
    crate::error::check_len(grid.boundary_count(), field.len())?;
    let data = tapered_spectrum(field, grid, taper);
    let cell = grid.spacing().powi(grid.boundary_dim() as i32);
    let sum: f64 = data.iter().zip(wavenumber_modulus(grid)).map(|(v, k)| k * v.norm_sqr()).sum();
    Ok(cell * sum / grid.boundary_count() as f64)
}

/// `(sum_b s_b |g_b|^p)^{1/p}` over the boundary layer.
pub fn boundary_lp_norm(grid: &Grid, g: &[c64], p: f64) -> f64 {
    g.iter().zip(grid.surface_weights()).map(|(v, s)| s * v.norm().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `Gamma(k / 2)` for a positive integer `k`.
fn gamma_half(k: usize) -> f64 {
    let (mut x, mut g) = if k % 2 == 0 { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
    while 2.0 * x < k as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Area of the unit sphere `S^d` in `R^{d+1}`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf((d as f64 + 1.0) / 2.0) / gamma_half(d + 1)
}

/// Sharp Sobolev constants on `R^d`, `d` the boundary dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SobolevConstants {
    pub boundary_dim: usize,
    /// `||f||_{L^p} <= S* ||(-Delta)^{1/4} f||`, `p = 2d/(d-1)`.
    pub s_star: f64,
    pub s_star_exponent: f64,
    /// `||f||_{L^q} <= S_grad* ||grad f||`, `q = 2d/(d-2)`; absent for `d < 3`.
    pub script_s_star: Option<f64>,
    pub script_s_star_exponent: Option<f64>,
}

pub fn sobolev_constants(boundary_dim: usize) -> Result<SobolevConstants> {
    if boundary_dim < 2 {
        return Err(Error::UnsupportedDimension { op: "sobolev_constants", dim: boundary_dim });
    }
    let d = boundary_dim as f64;
    let area = sphere_area(boundary_dim);
    let s_star = ((d - 1.0) / 2.0 * area.powf(1.0 / d)).powf(-0.5);
    let (script, q) = if boundary_dim >= 3 {
        (Some((d * (d - 2.0) / 4.0 * area.powf(2.0 / d)).powf(-0.5)), Some(2.0 * d / (d - 2.0)))
    } else {
        (None, None)
    };
    Ok(SobolevConstants {
        boundary_dim,
        s_star,
        s_star_exponent: 2.0 * d / (d - 1.0),
        script_s_star: script,
        script_s_star_exponent: q,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "T1.1")]
    T11,
    #[serde(rename = "T1.2")]
    T12,
    #[serde(rename = "T1.5")]
    T15,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct Condition {
    pub name: String,
    pub statement: String,
    pub value: f64,
    /// Signed distance to failure; negative means the condition fails.
    pub margin: f64,
    pub verdict: Verdict,
}

impl Condition {
    fn new(name: &str, statement: &str, value: f64, margin: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            statement: statement.into(),
            value,
            margin,
            verdict: if margin >= -tol { Verdict::Pass } else { Verdict::Fail },
        }
    }

    /// Strict inequality `value < 1`.
    fn below_one(name: &str, statement: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            statement: statement.into(),
            value,
            margin: 1.0 - value,
            verdict: if value < 1.0 { Verdict::Pass } else { Verdict::Fail },
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConstantsUsed {
    pub c_star: Option<f64>,
    pub s_star: Option<f64>,
    pub script_s_star: Option<f64>,
    pub b1: f64,
    pub b2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub theorem_id: TheoremId,
    pub alpha: String,
    pub conditions: Vec<Condition>,
    pub constants_used: ConstantsUsed,
    pub smallness_value: Option<f64>,
    /// Largest `C*` for which the smallness condition would still hold.
    pub supremal_c_star: Option<f64>,
    pub variant_flags: Vec<String>,
    pub warnings: Vec<String>,
    pub verdict: Verdict,
}

impl HypothesisReport {
    fn new(theorem_id: TheoremId, alpha: &BoundaryFunction) -> Self {
        Self {
            theorem_id,
            alpha: alpha.provenance.clone(),
            conditions: Vec::new(),
            constants_used: ConstantsUsed::default(),
            smallness_value: None,
            supremal_c_star: None,
            variant_flags: Vec::new(),
            warnings: Vec::new(),
            verdict: Verdict::Pass,
        }
    }

    fn seal(mut self) -> Self {
        self.verdict = if self.conditions.iter().all(|c| c.verdict == Verdict::Pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn min_margin(&self) -> f64 {
        self.conditions.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }
}

/// One summary row per report.
pub fn write_summary_csv<W: Write>(reports: &[HypothesisReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theorem", "alpha", "verdict", "b1", "b2", "smallness", "min_margin", "failed_conditions"])?;
    for r in reports {
        let theorem = match r.theorem_id {
            TheoremId::T11 => "T1.1",
            TheoremId::T12 => "T1.2",
            TheoremId::T15 => "T1.5",
        };
        let failed: Vec<&str> =
            r.conditions.iter().filter(|c| c.verdict == Verdict::Fail).map(|c| c.name.as_str()).collect();
        w.write_record([
            theorem.to_string(),
            r.alpha.clone(),
            format!("{:?}", r.verdict).to_uppercase(),
            format!("{:.6e}", r.constants_used.b1),
            format!("{:.6e}", r.constants_used.b2),
            r.smallness_value.map(|v| format!("{v:.6e}")).unwrap_or_default(),
            format!("{:.6e}", r.min_margin()),
            failed.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn sector_condition(alpha: &BoundaryFunction) -> Condition {
    let margin = alpha.samples.iter().map(|z| z.re - z.im.abs()).fold(f64::INFINITY, f64::min);
    Condition::new("sector", "Re alpha >= |Im alpha|", margin, margin, SIGN_TOL)
}

/// True when boundary node `b` sits next to an artificial wall.
fn on_outer_ring(grid: &Grid, b: usize) -> bool {
    let nt = grid.tangential_count();
    grid.tangential_multi_index(b)[..grid.boundary_dim()].iter().any(|&j| j == 0 || j + 1 == nt)
}

/// `max_b |x'| |g_b|` and whether the maximum sits on the outer ring.
fn weighted_sup(grid: &Grid, g: impl Iterator<Item = f64>) -> (f64, bool) {
    let radius = grid.boundary_radius();
    let mut best = (0.0, 0usize);
    for (b, v) in g.enumerate() {
        let w = radius[b] * v;
        if w > best.0 {
            best = (w, b);
        }
    }
    (best.0, best.0 > 0.0 && on_outer_ring(grid, best.1))
}

/// Hypotheses of the self-adjoint theorem: `alpha >= 0` and `x . grad alpha <= 0`.
pub fn check_selfadjoint_hypotheses(alpha: &BoundaryFunction, grid: &Grid) -> Result<HypothesisReport> {
    if alpha.max_abs_imag() > 1e-12 {
        return Err(Error::WrongTheorem(
            "alpha is complex; check the hypotheses of T1.2 or T1.5 instead".into(),
        ));
    }
    let mut report = HypothesisReport::new(TheoremId::T11, alpha);
    let min_alpha = alpha.samples.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    report.conditions.push(Condition::new("nonnegative", "alpha >= 0", min_alpha, min_alpha, SIGN_TOL));
    let rd = radial_derivative(alpha, grid);
    let max_rd = rd.real_part.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report.conditions.push(Condition::new("repulsive", "x . grad alpha <= 0", max_rd, -max_rd, SIGN_TOL));
    report.variant_flags.push(format!("radial_derivative={:?}", rd.method).to_lowercase());
    Ok(report.seal())
}

/// Hypotheses of the complex `alpha` theorem for `n >= 3`, parametric in `C*`.
pub fn check_thm12_hypotheses(
    alpha: &BoundaryFunction,
    grid: &Grid,
    c_star: f64,
    s_star: Option<f64>,
    taper: Taper,
) -> Result<HypothesisReport> {
    let n = grid.dim();
    if n < 3 {
        return Err(Error::UnsupportedDimension { op: "check_thm12_hypotheses", dim: n });
    }
    if !(c_star > 0.0) {
        return Err(Error::Precondition(format!("C* must be positive, got {c_star}")));
    }
    let consts = sobolev_constants(n - 1)?;
    let s_star = s_star.unwrap_or(consts.s_star);
    if !(s_star > 0.0) {
        return Err(Error::Precondition(format!("S* must be positive, got {s_star}")));
    }
    let mut report = HypothesisReport::new(TheoremId::T12, alpha);
    report.conditions.push(sector_condition(alpha));

    let (b1, wall) = weighted_sup(grid, alpha.samples.iter().map(|z| z.norm()));
    if wall {
        report.warnings.push(
            "b1 is wall-limited: |x'||alpha| peaks at the artificial wall and diverges as L grows".into(),
        );
    }
    let p = 2.0 * (n as f64 - 1.0);
    let mut b2 = 0.0;
    for j in 0..n - 1 {
        let xa: Vec<c64> =
            alpha.samples.iter().enumerate().map(|(b, z)| z * grid.boundary_point(b)[j]).collect();
        let frac = fractional_quarter_laplacian(&xa, grid, taper)?;
        b2 += boundary_lp_norm(grid, &frac, p);
    }
    let smallness = 2.0 * c_star * (b1 + s_star * b2);
    report.conditions.push(Condition::below_one("smallness", "2 C* (b1 + S* b2) < 1", smallness));
    report.constants_used = ConstantsUsed {
        c_star: Some(c_star),
        s_star: Some(s_star),
        script_s_star: consts.script_s_star,
        b1,
        b2,
    };
    report.smallness_value = Some(smallness);
    let denom = 2.0 * (b1 + s_star * b2);
    report.supremal_c_star = Some(if denom > 0.0 { 1.0 / denom } else { f64::INFINITY });
    report.variant_flags.push(format!("b2_exponent=L^{p}"));
    report.variant_flags.push(format!("s_star_exponent=L^{}", consts.s_star_exponent));
    report.variant_flags.push(format!("taper={}", taper.describe()));
    report.variant_flags.push("b2=sum_j ||(-Delta)^(1/4)(x_j alpha)||".into());
    Ok(report.seal())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum B2Variant {
    /// Generalized eigenvalue estimate of the Hardy-type constant.
    Hardy,
    /// `S_grad* ||div(x' Im alpha)||_{L^{n-1}}`.
    SufficientCondition,
}

/// Hypotheses of the theorem for complex `alpha` with repulsive real part.
/// The smallness condition is evaluated as printed, `2 b1 (b1 + b2) < 1`, and
/// as used in the proof, `2 (b1 (b1 + b2))^{1/2} < 1`; both must hold.
pub fn check_thm15_hypotheses(
    alpha: &BoundaryFunction,
    grid: &Grid,
    variant: B2Variant,
) -> Result<HypothesisReport> {
    let n = grid.dim();
    if n < 2 {
        return Err(Error::UnsupportedDimension { op: "check_thm15_hypotheses", dim: n });
    }
    let mut report = HypothesisReport::new(TheoremId::T15, alpha);
    let complex = alpha.max_abs_imag() > 1e-12;
    if n <= 3 && complex {
        report.warnings.push(format!(
            "degenerate: for n = {n} the theorem reduces to the self-adjoint case, Im alpha must vanish"
        ));
    }
    if !alpha.differentiable {
        report.variant_flags.push("alpha differentiability not asserted by its source".into());
    }
    report.conditions.push(sector_condition(alpha));
    let rd = radial_derivative(alpha, grid);
    let max_rd = rd.real_part.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    report.conditions.push(Condition::new("re_repulsive", "x . grad Re alpha <= 0", max_rd, -max_rd, SIGN_TOL));

    let (b1, wall) = weighted_sup(grid, alpha.samples.iter().map(|z| z.im.abs()));
    if wall {
        report.warnings.push("b1 is wall-limited: |x'||Im alpha| peaks at the artificial wall".into());
    }
    let consts = sobolev_constants(n - 1).ok();
    let b2 = match variant {
        B2Variant::Hardy => {
            report.variant_flags.push("b2=hardy_rayleigh_lower_bound".into());
            estimate_hardy_b2(alpha, grid)?
        }
        B2Variant::SufficientCondition => {
            let s = consts.and_then(|c| c.script_s_star).ok_or(Error::UnsupportedDimension {
                op: "sufficient condition (gradient Sobolev embedding)",
                dim: n,
            })?;
            let div = divergence_field(alpha, grid)?;
            let dc: Vec<c64> = div.iter().map(|v| c64::new(*v, 0.0)).collect();
            let norm = boundary_lp_norm(grid, &dc, n as f64 - 1.0);
            let max = div.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let ring = (0..grid.boundary_count())
                .filter(|&b| on_outer_ring(grid, b))
                .map(|b| div[b].abs())
                .fold(0.0, f64::max);
            if max > 0.0 && ring >= 0.1 * max {
                report.warnings.push(format!(
                    "||div(x' Im alpha)||_L^{} is wall-limited and diverges as L grows",
                    n - 1
                ));
            }
            report.variant_flags.push(format!("b2=S_grad*·||div(x' Im alpha)||_L^{}", n - 1));
            report.variant_flags.push(format!("S_grad*_exponent=L^{}", consts.unwrap().script_s_star_exponent.unwrap()));
            s * norm
        }
    };
    let printed = 2.0 * b1 * (b1 + b2);
    let proof = 2.0 * (b1 * (b1 + b2)).sqrt();
    report.conditions.push(Condition::below_one("smallness_printed", "2 [b1 (b1 + b2)] < 1", printed));
    report.conditions.push(Condition::below_one("smallness_proof", "2 [b1 (b1 + b2)]^(1/2) < 1", proof));
    report.constants_used = ConstantsUsed {
        c_star: None,
        s_star: consts.map(|c| c.s_star),
        script_s_star: consts.and_then(|c| c.script_s_star),
        b1,
        b2,
    };
    report.smallness_value = Some(printed);
    Ok(report.seal())
}

/// Dirichlet graph Laplacian on the boundary grid, scaled by `1/h^2`.
fn boundary_laplacian(grid: &Grid, x: &[f64]) -> Vec<f64> {
    let d = grid.boundary_dim();
    let ih2 = 1.0 / grid.spacing().powi(2);
    (0..grid.boundary_count())
        .map(|b| {
            let mut acc = 2.0 * d as f64 * x[b];
            for j in 0..d {
                for s in [-1isize, 1] {
                    if let Some(nb) = grid.boundary_neighbor(b, j, s) {
                        acc -= x[nb];
                    }
                }
            }
            acc * ih2
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conjugate_gradient(grid: &Grid, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = tol * tol * rr;
    if rr == 0.0 {
        return Ok(x);
    }
    for _ in 0..10 * n + 100 {
        let ap = boundary_laplacian(grid, &p);
        let a = rr / dot(&p, &ap);
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += a * p);
        r.iter_mut().zip(&ap).for_each(|(r, q)| *r -= a * q);
        let rr_new = dot(&r, &r);
        if rr_new <= target {
            return Ok(x);
        }
        let beta = rr_new / rr;
        p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
        rr = rr_new;
    }
    Err(Error::Solver("conjugate gradient did not converge".into()))
}

/// Square root of the largest eigenvalue of `D psi = mu L psi`, with `D` the
/// diagonal weight `|div(x' Im alpha)|^2` and `L` the boundary Dirichlet
/// Laplacian. Lanczos on `D^{1/2} L^{-1} D^{1/2}`.
pub fn estimate_hardy_b2(alpha: &BoundaryFunction, grid: &Grid) -> Result<f64> {
    let div = divergence_field(alpha, grid)?;
    let sd: Vec<f64> = div.iter().map(|v| v.abs()).collect();
    if sd.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let n = sd.len();
    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let rhs: Vec<f64> = x.iter().zip(&sd).map(|(a, s)| a * s).collect();
        let z = conjugate_gradient(grid, &rhs, 1e-12)?;
        Ok(z.iter().zip(&sd).map(|(a, s)| a * s).collect())
    };
    let m = n.min(80);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let norm0 = dot(&sd, &sd).sqrt();
    basis.push(sd.iter().map(|v| v / norm0).collect());
    let mut t = Mat::<f64>::zeros(m, m);
    let mut last = 0.0;
    for j in 0..m {
        let mut w = apply(&basis[j])?;
        for _pass in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                t[(i, j)] += c;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
        }
        let k = j + 1;
        let small = Mat::<f64>::from_fn(k, k, |a, b| 0.5 * (t[(a, b)] + t[(b, a)]));
        let top = small
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Solver(format!("{e:?}")))?
            .into_iter()
            .fold(0.0, f64::max);
        let beta = dot(&w, &w).sqrt();
        if (k >= 5 && (top - last).abs() <= 1e-12 * top) || beta <= 1e-14 * top || k == m {
            last = top;
            break;
        }
        last = top;
        if k < m {
            t[(k, j)] = beta;
            basis.push(w.iter().map(|v| v / beta).collect());
        }
    }
    Ok(last.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_data::{sample_alpha, AlphaSpec};

    #[test]
    fn plane_wave_is_eigenfunction() {
        let g = Grid::boundary_only(3, 4.0, 0.25).unwrap();
        let k = [PI * 3.0 / 4.0, -PI * 2.0 / 4.0];
        let f: Vec<c64> = g.sample_boundary(|x| c64::from_polar(1.0, k[0] * x[0] + k[1] * x[1]));
        let out = fractional_quarter_laplacian(&f, &g, Taper::None).unwrap();
        let kk = (k[0] * k[0] + k[1] * k[1]).sqrt();
        for (a, b) in out.iter().zip(&f) {
            assert!((a - b * kk.sqrt()).norm() < 1e-12);
        }
        let norm = sobolev_half_norm_sq(&f, &g, Taper::None).unwrap();
        assert!((norm - kk * 64.0).abs() < 1e-10 * norm);
    }

    #[test]
    fn constant_field_is_annihilated() {
        let g = Grid::boundary_only(2, 2.0, 0.25).unwrap();
        let f = vec![c64::new(3.0, -1.0); g.boundary_count()];
        let out = fractional_quarter_laplacian(&f, &g, Taper::None).unwrap();
        assert!(out.iter().all(|z| z.norm() < 1e-13));
        assert!(sobolev_half_norm_sq(&f, &g, Taper::None).unwrap().abs() < 1e-20);
    }

    #[test]
    fn half_line_is_unsupported() {
        let g = Grid::new(1, 1.0, 0.25).unwrap();
        assert!(fractional_quarter_laplacian(&[c64::default()], &g, Taper::None).is_err());
    }

    #[test]
    fn closed_form_constants() {
        let c = sobolev_constants(2).unwrap();
        assert!((c.s_star - PI.powf(-0.25)).abs() < 1e-15);
        assert!(c.script_s_star.is_none());
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        let c3 = sobolev_constants(3).unwrap();
        assert_eq!(c3.script_s_star_exponent, Some(6.0));
        assert!(sobolev_constants(1).is_err());
    }

    #[test]
    fn selfadjoint_checks() {
        let g = Grid::new(3, 2.0, 0.25).unwrap();
        let pass = sample_alpha(&AlphaSpec::expression("1/(1+r^2)"), &g).unwrap();
        assert!(check_selfadjoint_hypotheses(&pass, &g).unwrap().passed());
        let neg = sample_alpha(&AlphaSpec::real(-1.0), &g).unwrap();
        let r = check_selfadjoint_hypotheses(&neg, &g).unwrap();
        assert!(!r.passed());
        assert!((r.condition("nonnegative").unwrap().margin + 1.0).abs() < 1e-15);
        let inc = sample_alpha(&AlphaSpec::expression("r/(1+r)"), &g).unwrap();
        let r = check_selfadjoint_hypotheses(&inc, &g).unwrap();
        assert_eq!(r.condition("repulsive").unwrap().verdict, Verdict::Fail);
        let cplx = sample_alpha(&AlphaSpec::constant(c64::new(1.0, 0.1)), &g).unwrap();
        assert!(matches!(check_selfadjoint_hypotheses(&cplx, &g), Err(Error::WrongTheorem(_))));
    }

    #[test]
    fn thm12_zero_and_wide_phase() {
        let g = Grid::new(3, 2.0, 0.25).unwrap();
        let zero = sample_alpha(&AlphaSpec::real(0.0), &g).unwrap();
        let r = check_thm12_hypotheses(&zero, &g, 1.0, None, Taper::default_for(&g)).unwrap();
        assert!(r.passed());
        assert_eq!(r.smallness_value, Some(0.0));
        let wide = sample_alpha(&AlphaSpec::constant(c64::from_polar(1.0, PI / 3.0)), &g).unwrap();
        let r = check_thm12_hypotheses(&wide, &g, 1.0, None, Taper::default_for(&g)).unwrap();
        assert_eq!(r.condition("sector").unwrap().verdict, Verdict::Fail);
        assert!(r.warnings.iter().any(|w| w.contains("wall-limited")));
        let g2 = Grid::new(2, 2.0, 0.25).unwrap();
        let a2 = sample_alpha(&AlphaSpec::real(0.0), &g2).unwrap();
        assert!(check_thm12_hypotheses(&a2, &g2, 1.0, None, Taper::None).is_err());
    }

    #[test]
    fn hardy_b2_homogeneity() {
        let g = Grid::boundary_only(3, 3.0, 0.25).unwrap();
        let a = sample_alpha(&AlphaSpec::ComplexPhase { amplitude: 0.2, phase: 0.3 }, &g).unwrap();
        let b = estimate_hardy_b2(&a, &g).unwrap();
        let b3 = estimate_hardy_b2(&a.scaled(c64::new(-3.0, 0.0)), &g).unwrap();
        assert!(b > 0.0);
        assert!((b3 - 3.0 * b).abs() < 1e-8 * b3);
        let real = sample_alpha(&AlphaSpec::real(1.0), &g).unwrap();
        assert_eq!(estimate_hardy_b2(&real, &g).unwrap(), 0.0);
    }

    #[test]
    fn thm15_constant_imaginary_part_is_wall_limited() {
        let g = Grid::boundary_only(4, 2.0, 0.25).unwrap();
        let a = sample_alpha(&AlphaSpec::constant(c64::new(1.0, 0.1)), &g).unwrap();
        let div = divergence_field(&a, &g).unwrap();
        assert!(div.iter().all(|v| (v - 0.3).abs() < 1e-12));
        let r = check_thm15_hypotheses(&a, &g, B2Variant::SufficientCondition).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("wall-limited")));
    }

    #[test]
    fn taper_profile_shape() {
        let g = Grid::boundary_only(2, 4.0, 0.25).unwrap();
        let t = Taper::Radial { width: 1.0 }.profile(&g);
        let r = g.boundary_radius();
        for (t, r) in t.iter().zip(&r) {
            if *r <= 3.0 {
                assert_eq!(*t, 1.0);
            }
            assert!((0.0..=1.0).contains(t));
        }
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }
}
