//! Direct solves of `(A - lambda) u = f` and the weighted resolvent ratios.

use std::io::Write;

use num_complex::Complex64 as c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary_data::BoundaryFunction;
use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::linalg::{shifted_norm1, ShiftedLu, SymbolicPattern};
use crate::multipliers::u_minus_transform;
use crate::operator::DiscreteOperator;
use crate::stencil::{edge_energy, Closure};

/// Relative residual above which a solve is flagged.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Condition estimates above this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// `|Im lambda| <= Re lambda`.
    Inside,
    Outside,
}

impl Sector {
    pub fn of(lambda: c64) -> Self {
        if lambda.im.abs() <= lambda.re {
            Sector::Inside
        } else {
            Sector::Outside
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    /// `||(A - lambda) u - f||_W / ||f||_W`.
    pub residual: f64,
    /// One-norm condition estimate of `A - lambda`.
    pub condition: f64,
    /// Refinement steps after the direct solve.
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolventSample {
    pub lambda: c64,
    /// Index of the right-hand side in the family.
    pub f_index: usize,
    /// `||u / r|| / ||r f||`.
    pub ratio_weighted: f64,
    /// `||grad u-|| / ||r f||` inside the sector (when `Im lambda != 0`),
    /// `||grad u|| / ||r f||` otherwise.
    pub ratio_gradient: f64,
    /// `||u|| / ||f||`.
    pub ratio_plain: f64,
    pub sector: Sector,
    pub solver: SolverDiagnostics,
}

/// A solved system on the node grid.
#[derive(Clone, Debug)]
pub struct Solution {
    pub u: Vec<c64>,
    pub diagnostics: SolverDiagnostics,
}

/// Factorizations of `A - lambda` sharing one symbolic analysis.
pub struct Resolvent<'a> {
    op: &'a DiscreteOperator,
    pattern: SymbolicPattern,
}

/// One factorized shift.
pub struct Factored<'a> {
    op: &'a DiscreteOperator,
    lu: ShiftedLu,
    lambda: c64,
    condition: f64,
}

impl<'a> Resolvent<'a> {
    pub fn new(op: &'a DiscreteOperator) -> Result<Self> {
        Ok(Self { op, pattern: SymbolicPattern::analyze(op.matrix())? })
    }

    pub fn factor(&self, lambda: c64) -> Result<Factored<'a>> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::NonFinite("lambda".into()));
        }
        let lu = ShiftedLu::with_pattern(self.op.matrix(), lambda, &self.pattern)?;
        let condition = shifted_norm1(self.op.matrix(), lambda) * lu.inverse_norm1_estimate()?;
        if !condition.is_finite() || condition > CONDITION_LIMIT {
            return Err(Error::NearSingular { shift: format!("{lambda}"), condition });
        }
        Ok(Factored { op: self.op, lu, lambda, condition })
    }
}

impl Factored<'_> {
    pub fn lambda(&self) -> c64 {
        self.lambda
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves with a node vector `f`; the returned `u` is a node vector with
    /// the eliminated top layer set to zero.
    pub fn solve(&self, f: &[c64]) -> Result<Solution> {
        let op = self.op;
        check_len(op.grid().node_count(), f.len())?;
        if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("right-hand side".into()));
        }
        let b = op.restrict(f);
        let fnorm = op.norm(&b);
        if fnorm == 0.0 {
            let diagnostics = SolverDiagnostics { residual: 0.0, condition: self.condition, iterations: 0 };
            return Ok(Solution { u: vec![c64::default(); f.len()], diagnostics });
        }
        let mut x = self.lu.solve(&b)?;
        let mut residual = self.residual(&x, &b, fnorm);
        let mut iterations = 0;
        while residual > RESIDUAL_TOL && iterations < 3 {
            let r: Vec<c64> = {
                let ax = op.apply(&x);
                b.iter().zip(ax).zip(&x).map(|((bi, ai), xi)| bi - (ai - self.lambda * xi)).collect()
            };
            let dx = self.lu.solve(&r)?;
            x.iter_mut().zip(dx).for_each(|(a, d)| *a += d);
            residual = self.residual(&x, &b, fnorm);
            iterations += 1;
        }
        let diagnostics = SolverDiagnostics { residual, condition: self.condition, iterations };
        Ok(Solution { u: op.embed(&x), diagnostics })
    }

    fn residual(&self, x: &[c64], b: &[c64], fnorm: f64) -> f64 {
        let ax = self.op.apply(x);
        let r: Vec<c64> = ax.iter().zip(x).zip(b).map(|((a, xi), bi)| a - self.lambda * xi - bi).collect();
        self.op.norm(&r) / fnorm
    }

    /// `||(A - lambda)^{-1}||` in the weighted norm, by power iteration on
    /// `R* R` with the weighted adjoint `R* = W^{-1} R^H W`.
    pub fn norm_estimate(&self, start: &[c64], iterations: usize) -> Result<f64> {
        let op = self.op;
        let w = op.weights();
        let mut x = op.restrict(start);
        let mut nx = op.norm(&x);
        if nx == 0.0 {
            return Err(Error::Precondition("power iteration needs a nonzero start vector".into()));
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let y = self.lu.solve(&x)?;
            let wy: Vec<c64> = y.iter().zip(w).map(|(v, wi)| v * *wi).collect();
            let mut z = self.lu.solve_adjoint(&wy)?;
            z.iter_mut().zip(w).for_each(|(v, wi)| *v /= *wi);
            let ny = op.norm(&y);
            let previous = estimate;
            estimate = ny;
            nx = op.norm(&z);
            if nx == 0.0 {
                break;
            }
            x = z.into_iter().map(|v| v / nx).collect();
            if (estimate - previous).abs() <= 1e-6 * estimate {
                break;
            }
        }
        Ok(estimate)
    }
}

/// One-off solve of `(A - lambda) u = f`.
pub fn solve(op: &DiscreteOperator, lambda: c64, f: &[c64]) -> Result<Solution> {
    Resolvent::new(op)?.factor(lambda)?.solve(f)
}

fn weighted_sq<F: Fn(usize) -> f64>(grid: &Grid, v: &[c64], weight: F) -> f64 {
    grid.quadrature_weights().iter().enumerate().map(|(i, w)| w * weight(i) * v[i].norm_sqr()).sum()
}

/// Weighted ratios of a solution. For `n = 1` the node at `x = 0` is left out
/// of `||u / r||`.
pub fn weighted_estimate(
    u: &[c64],
    f: &[c64],
    lambda: c64,
    grid: &Grid,
    diagnostics: SolverDiagnostics,
) -> Result<ResolventSample> {
    check_len(grid.node_count(), u.len())?;
    check_len(grid.node_count(), f.len())?;
    let radial = grid.radial_weight();
    let r = &radial.values;
    let sector = Sector::of(lambda);
    let rf = weighted_sq(grid, f, |i| r[i] * r[i]).sqrt();
    let fnorm = weighted_sq(grid, f, |_| 1.0).sqrt();
    let u_over_r = weighted_sq(grid, u, |i| if r[i] > 0.0 { 1.0 / (r[i] * r[i]) } else { 0.0 }).sqrt();
    let grad = if sector == Sector::Inside && lambda.im != 0.0 {
        let um = u_minus_transform(u, lambda, grid)?;
        edge_energy(grid, &um, Closure::Dirichlet, |_| 1.0).sqrt()
    } else {
        edge_energy(grid, u, Closure::Dirichlet, |_| 1.0).sqrt()
    };
    let (ratio_weighted, ratio_gradient, ratio_plain) = if rf == 0.0 {
        if u.iter().any(|z| z.norm() > 0.0) {
            return Err(Error::Precondition("||r f|| = 0 with a nonzero solution: ratio undefined".into()));
        }
        (0.0, 0.0, 0.0)
    } else {
        (u_over_r / rf, grad / rf, weighted_sq(grid, u, |_| 1.0).sqrt() / fnorm)
    };
    Ok(ResolventSample { lambda, f_index: 0, ratio_weighted, ratio_gradient, ratio_plain, sector, solver: diagnostics })
}

/// `||u||^2 <= |Im lambda|^{-1} (int_bd |Im alpha| |u|^2 + int |f| |u|)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct L2Bound {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
}

pub fn l2_bound_check(
    u: &[c64],
    f: &[c64],
    lambda: c64,
    alpha: &BoundaryFunction,
    grid: &Grid,
) -> Result<L2Bound> {
    check_len(grid.node_count(), u.len())?;
    check_len(grid.node_count(), f.len())?;
    check_len(grid.boundary_count(), alpha.samples.len())?;
    if lambda.im == 0.0 {
        return Err(Error::Precondition("the a-priori L2 bound needs Im lambda != 0".into()));
    }
    let w = grid.quadrature_weights();
    let lhs: f64 = u.iter().zip(w).map(|(v, wi)| wi * v.norm_sqr()).sum();
    let fu: f64 = u.iter().zip(f).zip(w).map(|((a, b), wi)| wi * a.norm() * b.norm()).sum();
    let tr = grid.trace(u);
    let bd: f64 = tr
        .iter()
        .zip(&alpha.samples)
        .zip(grid.surface_weights())
        .map(|((v, a), s)| s * a.im.abs() * v.norm_sqr())
        .sum();
    let rhs = (bd + fu) / lambda.im.abs();
    Ok(L2Bound { lhs, rhs, margin: rhs - lhs })
}

/// Points of a spectral-parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaGrid {
    /// `re_count x im_count` points, endpoints included.
    Rectangle { re: [f64; 2], im: [f64; 2], re_count: usize, im_count: usize },
    List { values: Vec<c64> },
}

impl LambdaGrid {
    pub fn points(&self) -> Vec<c64> {
        match self {
            LambdaGrid::List { values } => values.clone(),
            LambdaGrid::Rectangle { re, im, re_count, im_count } => {
                let axis = |r: [f64; 2], m: usize| -> Vec<f64> {
                    match m {
                        0 => vec![],
                        1 => vec![0.5 * (r[0] + r[1])],
                        _ => (0..m).map(|j| r[0] + (r[1] - r[0]) * j as f64 / (m - 1) as f64).collect(),
                    }
                };
                let res = axis(*re, *re_count);
                let ims = axis(*im, *im_count);
                res.iter().flat_map(|&a| ims.iter().map(move |&b| c64::new(a, b))).collect()
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Points closer than this to a listed eigenvalue are skipped.
    pub exclusion_radius: f64,
    pub eigenvalues: Vec<c64>,
    /// Power-iteration steps for the operator-norm proxy; 0 disables it.
    pub norm_iterations: usize,
    /// Also evaluate the a-priori L2 bound for every solve with `Im lambda != 0`.
    pub l2_bound: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { exclusion_radius: 1e-3, eigenvalues: Vec::new(), norm_iterations: 0, l2_bound: true }
    }
}

/// Per-point results that do not depend on the right-hand side.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSummary {
    pub lambda: c64,
    pub sector: Sector,
    /// `1 / dist(lambda, [0, inf))`.
    pub inverse_distance: f64,
    pub norm_proxy: Option<f64>,
    pub max_ratio_plain: f64,
    pub min_l2_margin: Option<f64>,
    /// Largest `|margin| / lhs` scale used for the relative L2 test.
    pub l2_scale: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SweepSummary {
    pub no_op: bool,
    pub points: usize,
    pub duplicates_removed: usize,
    pub excluded: Vec<c64>,
    pub failures: Vec<(c64, String)>,
    pub sup_ratio_weighted_inside: Option<f64>,
    pub sup_ratio_weighted_outside: Option<f64>,
    pub sup_ratio_gradient_inside: Option<f64>,
    pub sup_ratio_gradient_outside: Option<f64>,
    pub per_point: Vec<PointSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub samples: Vec<ResolventSample>,
    pub summary: SweepSummary,
}

/// `1 / dist(lambda, [0, inf))`.
pub fn inverse_distance_to_half_line(lambda: c64) -> f64 {
    let d = if lambda.re >= 0.0 { lambda.im.abs() } else { lambda.norm() };
    1.0 / d
}

fn dedup(points: Vec<c64>) -> (Vec<c64>, usize) {
    let total = points.len();
    let mut out: Vec<c64> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| (q - p).norm() <= 1e-14 * p.norm().max(1.0)) {
            out.push(p);
        }
    }
    let removed = total - out.len();
    (out, removed)
}

fn sup(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

/// Solves for every `(lambda, f)` pair. Points are processed in parallel,
/// one factorization per point; results keep the input order.
pub fn sweep(
    op: &DiscreteOperator,
    lambdas: &[c64],
    f_family: &[Vec<c64>],
    cfg: &SweepConfig,
) -> Result<SweepReport> {
    let grid = op.grid();
    for f in f_family {
        check_len(grid.node_count(), f.len())?;
    }
    let (points, duplicates_removed) = dedup(lambdas.to_vec());
    let mut summary = SweepSummary { duplicates_removed, ..Default::default() };
    if points.is_empty() || f_family.is_empty() {
        summary.no_op = true;
        return Ok(SweepReport { samples: Vec::new(), summary });
    }
    let (kept, excluded): (Vec<c64>, Vec<c64>) = points.into_iter().partition(|p| {
        cfg.eigenvalues.iter().all(|e| (e - p).norm() > cfg.exclusion_radius)
    });
    summary.excluded = excluded;
    summary.points = kept.len();
    let resolvent = Resolvent::new(op)?;
    let start: Vec<c64> = {
        let mut s = vec![c64::default(); grid.node_count()];
        for f in f_family {
            s.iter_mut().zip(f).for_each(|(a, b)| *a += b);
        }
        s
    };

    type PointResult = std::result::Result<(Vec<ResolventSample>, PointSummary), String>;
    let results: Vec<PointResult> = kept
        .par_iter()
        .map(|&lambda| {
            let fac = resolvent.factor(lambda).map_err(|e| e.to_string())?;
            let mut samples = Vec::with_capacity(f_family.len());
            let mut min_margin: Option<f64> = None;
            let mut l2_scale: Option<f64> = None;
            for (j, f) in f_family.iter().enumerate() {
                let sol = fac.solve(f).map_err(|e| e.to_string())?;
                let mut s = weighted_estimate(&sol.u, f, lambda, grid, sol.diagnostics).map_err(|e| e.to_string())?;
                s.f_index = j;
                if cfg.l2_bound && lambda.im != 0.0 {
                    let b = l2_bound_check(&sol.u, f, lambda, op.alpha(), grid).map_err(|e| e.to_string())?;
                    min_margin = Some(min_margin.map_or(b.margin, |m| m.min(b.margin)));
                    l2_scale = Some(l2_scale.map_or(b.rhs, |m: f64| m.max(b.rhs)));
                }
                samples.push(s);
            }
            let norm_proxy = if cfg.norm_iterations > 0 {
                Some(fac.norm_estimate(&start, cfg.norm_iterations).map_err(|e| e.to_string())?)
            } else {
                None
            };
            let summary = PointSummary {
                lambda,
                sector: Sector::of(lambda),
                inverse_distance: inverse_distance_to_half_line(lambda),
                norm_proxy,
                max_ratio_plain: samples.iter().map(|s| s.ratio_plain).fold(0.0, f64::max),
                min_l2_margin: min_margin,
                l2_scale,
            };
            Ok((samples, summary))
        })
        .collect();

    let mut samples = Vec::new();
    for (lambda, r) in kept.iter().zip(results) {
        match r {
            Ok((s, p)) => {
                samples.extend(s);
                summary.per_point.push(p);
            }
            Err(e) => summary.failures.push((*lambda, e)),
        }
    }
    let pick = |sector: Sector, f: fn(&ResolventSample) -> f64| {
        sup(samples.iter().filter(|s| s.sector == sector).map(f))
    };
    summary.sup_ratio_weighted_inside = pick(Sector::Inside, |s| s.ratio_weighted);
    summary.sup_ratio_weighted_outside = pick(Sector::Outside, |s| s.ratio_weighted);
    summary.sup_ratio_gradient_inside = pick(Sector::Inside, |s| s.ratio_gradient);
    summary.sup_ratio_gradient_outside = pick(Sector::Outside, |s| s.ratio_gradient);
    Ok(SweepReport { samples, summary })
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "re_lambda", "im_lambda", "f_index", "sector", "ratio_weighted", "ratio_gradient", "residual",
            "cond_estimate",
        ])?;
        for s in &self.samples {
            w.write_record([
                format!("{:.12e}", s.lambda.re),
                format!("{:.12e}", s.lambda.im),
                s.f_index.to_string(),
                match s.sector {
                    Sector::Inside => "inside".into(),
                    Sector::Outside => "outside".into(),
                },
                format!("{:.10e}", s.ratio_weighted),
                format!("{:.10e}", s.ratio_gradient),
                format!("{:.3e}", s.solver.residual),
                format!("{:.3e}", s.solver.condition),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Heat map of `max_f ratio_weighted` over the sampled `lambda` points.
    pub fn write_svg<W: Write>(&self, mut out: W) -> Result<()> {
        let mut cells: Vec<(c64, f64)> = Vec::new();
        for s in &self.samples {
            match cells.iter_mut().find(|c| c.0 == s.lambda) {
                Some(c) => c.1 = c.1.max(s.ratio_weighted),
                None => cells.push((s.lambda, s.ratio_weighted)),
            }
        }
        let (w, h, pad) = (480.0, 360.0, 40.0);
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        )?;
        if cells.is_empty() {
            writeln!(out, "</svg>")?;
            return Ok(());
        }
        let span = |f: fn(&c64) -> f64| {
            let lo = cells.iter().map(|c| f(&c.0)).fold(f64::INFINITY, f64::min);
            let hi = cells.iter().map(|c| f(&c.0)).fold(f64::NEG_INFINITY, f64::max);
            (lo, if hi > lo { hi } else { lo + 1.0 })
        };
        let (re0, re1) = span(|z| z.re);
        let (im0, im1) = span(|z| z.im);
        let vmax = cells.iter().map(|c| c.1).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let distinct = |f: fn(&c64) -> f64| {
            let mut v: Vec<f64> = cells.iter().map(|c| f(&c.0)).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len().max(1) as f64
        };
        let cw = (w - 2.0 * pad) / distinct(|z| z.re);
        let ch = (h - 2.0 * pad) / distinct(|z| z.im);
        for (z, v) in &cells {
            let x = pad + (z.re - re0) / (re1 - re0) * (w - 2.0 * pad - cw);
            let y = h - pad - ch - (z.im - im0) / (im1 - im0) * (h - 2.0 * pad - ch);
            let shade = (255.0 * (1.0 - v / vmax)).round() as u8;
            writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="rgb(255,{shade},{shade})"><title>{z}: {v:.4e}</title></rect>"#
            )?;
        }
        writeln!(
            out,
            r#"<text x="{pad}" y="{:.0}" font-size="12">Re lambda [{re0}, {re1}], Im lambda [{im0}, {im1}], max {vmax:.3e}</text>"#,
            h - 10.0
        )?;
        writeln!(out, "</svg>")?;
        Ok(())
    }
}
