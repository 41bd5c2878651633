//! Eigenpairs of the discrete operator near given shifts, and their
//! classification into localized modes and truncation artifacts.
//!
//! Both solver paths work in the quadrature-weighted inner product, in which
//! the operator is self-adjoint for real `alpha`. Every returned pair is
//! re-verified against the matrix; pairs whose residual misses the tolerance
//! after refinement are dropped and counted in the warnings.

use std::io::Write;

use faer::{Mat, Side};
use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::ShiftedLu;
use crate::operator::DiscreteOperator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Bound on `||A u - lambda u||_W / ||u||_W`.
    pub tol: f64,
    /// Below this many unknowns the self-adjoint path diagonalizes densely.
    pub dense_threshold: usize,
    /// Krylov subspace dimension; `None` picks `max(2 count + 20, 40)`.
    pub krylov_dim: Option<usize>,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-8, dense_threshold: 2000, krylov_dim: None, max_restarts: 8, seed: 7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeTag {
    InsideCone,
    OutsideCone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeTag {
    Localized,
    Artifact,
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenPair {
    pub value: c64,
    pub residual: f64,
    /// Fraction of weighted mass in the inner half of the domain.
    pub localization: f64,
    /// `sum_walls |u_adjacent / h|^2 dS / ||u||_W^2`.
    pub wall_flux: f64,
    pub cone: Option<ConeTag>,
    pub kind: Option<ModeTag>,
    /// Eigenvector on all nodes (zero on the top layer), `||u||_W = 1`.
    #[serde(skip)]
    pub vector: Vec<c64>,
}

impl EigenPair {
    pub fn is_localized(&self) -> bool {
        self.kind == Some(ModeTag::Localized)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolverInfo {
    pub method: String,
    pub shifts: Vec<c64>,
    pub iterations: usize,
    pub factorizations: usize,
    pub warnings: Vec<String>,
    pub partial: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Spectrum {
    pub pairs: Vec<EigenPair>,
    pub solver_info: SolverInfo,
}

/// Thresholds used by [`classify`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub cone_tol: f64,
    pub localization_threshold: f64,
    pub wall_flux_tol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { cone_tol: 1e-10, localization_threshold: 0.5, wall_flux_tol: 1e-6 }
    }
}

/// `count` eigenpairs nearest the real `shift`; requires real `alpha`.
pub fn eig_selfadjoint(op: &DiscreteOperator, count: usize, shift: f64, cfg: &SolverConfig) -> Result<Spectrum> {
    if !op.symmetry_flag() {
        return Err(Error::Precondition("eig_selfadjoint needs real alpha; use eig_nonselfadjoint".into()));
    }
    let mut spectrum = if op.unknown_count() <= cfg.dense_threshold {
        dense_selfadjoint(op, count, shift, cfg)?
    } else {
        let mut info = SolverInfo { method: "shift-invert-lanczos".into(), ..Default::default() };
        let pairs = krylov_near(op, c64::new(shift, 0.0), count, cfg, true, 0, &mut info)?;
        Spectrum { pairs, solver_info: info }
    };
    finish(op, &mut spectrum, cfg);
    Ok(spectrum)
}

/// Shift-invert Arnoldi around each shift; pairs merged across shifts.
pub fn eig_nonselfadjoint(
    op: &DiscreteOperator,
    shifts: &[c64],
    count_per_shift: usize,
    cfg: &SolverConfig,
) -> Result<Spectrum> {
    let runs: Vec<Result<(Vec<EigenPair>, SolverInfo)>> = shifts
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut info = SolverInfo::default();
            let pairs = krylov_near(op, s, count_per_shift, cfg, false, i as u64, &mut info)?;
            Ok((pairs, info))
        })
        .collect();
    let mut info = SolverInfo { method: "shift-invert-arnoldi".into(), ..Default::default() };
    let mut pairs = Vec::new();
    for run in runs {
        let (p, i) = run?;
        pairs.extend(p);
        info.shifts.extend(i.shifts);
        info.iterations += i.iterations;
        info.factorizations += i.factorizations;
        info.warnings.extend(i.warnings);
        info.partial |= i.partial;
    }
    let mut spectrum = Spectrum { pairs, solver_info: info };
    finish(op, &mut spectrum, cfg);
    Ok(spectrum)
}

/// Tags every pair by cone membership and localization.
pub fn classify(spectrum: &mut Spectrum, grid: &Grid, cfg: &ClassifyConfig) {
    for p in &mut spectrum.pairs {
        let (loc, flux) = localization_scores(grid, &p.vector);
        p.localization = loc;
        p.wall_flux = flux;
        p.cone = Some(if p.value.re >= p.value.im.abs() - cfg.cone_tol {
            ConeTag::InsideCone
        } else {
            ConeTag::OutsideCone
        });
        p.kind = Some(if loc > cfg.localization_threshold && flux <= cfg.wall_flux_tol {
            ModeTag::Localized
        } else {
            ModeTag::Artifact
        });
    }
}

/// Inner-half mass fraction and normalized wall flux of a node vector.
pub fn localization_scores(grid: &Grid, u: &[c64]) -> (f64, f64) {
    let n = grid.dim();
    let h = grid.spacing();
    let nt = grid.tangential_count();
    let nn = grid.normal_count();
    let w = grid.quadrature_weights();
    let mut total = 0.0;
    let mut inner = 0.0;
    let mut flux = 0.0;
    for (i, z) in u.iter().enumerate() {
        let m2 = z.norm_sqr();
        total += w[i] * m2;
        if grid.in_inner_half(i) {
            inner += w[i] * m2;
        }
        let (b, k) = grid.split(i);
        let g = m2 / (h * h);
        if k + 2 == nn {
            flux += h.powi(n as i32 - 1) * g;
        }
        if n > 1 && k + 1 < nn {
            let wk = if k == 0 { 0.5 * h } else { h };
            let face = wk * h.powi(n as i32 - 2);
            let multi = grid.tangential_multi_index(b);
            for &j in &multi[..n - 1] {
                if j == 0 || j + 1 == nt {
                    flux += face * g;
                }
            }
        }
    }
    if total == 0.0 {
        return (0.0, 0.0);
    }
    (inner / total, flux / total)
}

impl Spectrum {
    /// Pairs that are localized and residual-certified at `tol`.
    pub fn certified_localized(&self, tol: f64) -> impl Iterator<Item = &EigenPair> {
        self.pairs.iter().filter(move |p| p.is_localized() && p.residual <= tol)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re_lambda", "im_lambda", "residual", "localization", "wall_flux", "cone", "kind"])?;
        for p in &self.pairs {
            let cone = match p.cone {
                Some(ConeTag::InsideCone) => "inside_cone",
                Some(ConeTag::OutsideCone) => "outside_cone",
                None => "",
            };
            let kind = match p.kind {
                Some(ModeTag::Localized) => "localized",
                Some(ModeTag::Artifact) => "artifact",
                None => "",
            };
            w.write_record([
                format!("{:.12e}", p.value.re),
                format!("{:.12e}", p.value.im),
                format!("{:.3e}", p.residual),
                format!("{:.6}", p.localization),
                format!("{:.3e}", p.wall_flux),
                cone.into(),
                kind.into(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn finish(op: &DiscreteOperator, spectrum: &mut Spectrum, cfg: &SolverConfig) {
    let before = spectrum.pairs.len();
    spectrum.pairs.retain(|p| p.residual <= cfg.tol);
    let dropped = before - spectrum.pairs.len();
    if dropped > 0 {
        spectrum.solver_info.partial = true;
        spectrum.solver_info.warnings.push(format!("{dropped} pairs missed the residual tolerance"));
    }
    spectrum.pairs.sort_by(|a, b| {
        a.value.re.total_cmp(&b.value.re).then(a.value.im.total_cmp(&b.value.im))
    });
    let mut merged: Vec<EigenPair> = Vec::with_capacity(spectrum.pairs.len());
    for p in spectrum.pairs.drain(..) {
        match merged.iter_mut().find(|q| (q.value - p.value).norm() <= 1e-8 * p.value.norm()) {
            Some(q) => {
                if p.residual < q.residual {
                    *q = p;
                }
            }
            None => merged.push(p),
        }
    }
    spectrum.pairs = merged;
    let grid = op.grid();
    for p in &mut spectrum.pairs {
        let (loc, flux) = localization_scores(grid, &p.vector);
        p.localization = loc;
        p.wall_flux = flux;
    }
}

fn make_pair(op: &DiscreteOperator, value: c64, x: &[c64]) -> EigenPair {
    let norm = op.norm(x);
    let x: Vec<c64> = x.iter().map(|v| v / norm).collect();
    EigenPair {
        value,
        residual: op.relative_residual(value, &x),
        localization: 0.0,
        wall_flux: 0.0,
        cone: None,
        kind: None,
        vector: op.embed(&x),
    }
}

fn dense_selfadjoint(op: &DiscreteOperator, count: usize, shift: f64, cfg: &SolverConfig) -> Result<Spectrum> {
    let n = op.unknown_count();
    let sw: Vec<f64> = op.weights().iter().map(|w| w.sqrt()).collect();
    let mut s = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in op.matrix().row(i) {
            s[(i, j)] = sw[i] * v.re / sw[j];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    let eig = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("dense symmetric eigensolver: {e:?}")))?;
    let values = eig.S().column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (values[a] - shift).abs().total_cmp(&(values[b] - shift).abs()));
    let mut pairs = Vec::new();
    for &j in order.iter().take(count) {
        let x: Vec<c64> = (0..n).map(|i| c64::new(eig.U()[(i, j)] / sw[i], 0.0)).collect();
        let mut p = make_pair(op, c64::new(values[j], 0.0), &x);
        if p.residual > cfg.tol {
            if let Ok((q, _)) = refine(op, p.value, &x, cfg.tol) {
                p = q;
            }
        }
        pairs.push(p);
    }
    Ok(Spectrum {
        pairs,
        solver_info: SolverInfo {
            method: "dense-symmetric".into(),
            shifts: vec![c64::new(shift, 0.0)],
            ..Default::default()
        },
    })
}

/// Factorizes `A - shift`, nudging the shift off the spectrum if needed.
fn factor(op: &DiscreteOperator, shift: c64, info: &mut SolverInfo) -> Result<ShiftedLu> {
    let mut s = shift;
    let mut last = None;
    for attempt in 0..3 {
        info.factorizations += 1;
        match ShiftedLu::new(op.matrix(), s) {
            Ok(lu) => {
                let probe = vec![c64::new(1.0, 0.0); op.unknown_count()];
                match lu.solve(&probe) {
                    Ok(_) => {
                        if attempt > 0 {
                            info.warnings.push(format!("shift {shift} perturbed to {s}"));
                        }
                        return Ok(lu);
                    }
                    Err(e) => last = Some(e),
                }
            }
            Err(e) => last = Some(e),
        }
        let bump = 1e-7 * (1.0 + shift.norm()) * 10f64.powi(attempt);
        s = shift + c64::new(bump, 0.5 * bump);
    }
    Err(last.unwrap_or_else(|| Error::Solver("factorization".into())))
}

/// Inverse iteration at the Rayleigh quotient of `x`.
fn refine(op: &DiscreteOperator, value: c64, x: &[c64], tol: f64) -> Result<(EigenPair, usize)> {
    let mut info = SolverInfo::default();
    let lu = factor(op, value, &mut info)?;
    let mut x = x.to_vec();
    let mut best = make_pair(op, value, &x);
    for it in 0..6 {
        let y = lu.solve(&x)?;
        let ny = op.norm(&y);
        x = y.iter().map(|v| v / ny).collect();
        let ax = op.apply(&x);
        let theta = op.inner(&ax, &x) / op.inner(&x, &x);
        let p = make_pair(op, theta, &x);
        if p.residual < best.residual {
            best = p;
        }
        if best.residual <= tol {
            return Ok((best, it + 1));
        }
    }
    Ok((best, 6))
}

/// Builds a W-orthonormal Krylov basis of `(A - shift)^{-1}` and returns the
/// basis and the projected matrix.
fn krylov_basis(
    op: &DiscreteOperator,
    lu: &ShiftedLu,
    start: &[c64],
    m: usize,
) -> Result<(Vec<Vec<c64>>, Mat<c64>)> {
    let mut basis: Vec<Vec<c64>> = Vec::with_capacity(m + 1);
    let n0 = op.norm(start);
    basis.push(start.iter().map(|v| v / n0).collect());
    let mut hmat = Mat::<c64>::zeros(m, m);
    let mut size = m;
    for j in 0..m {
        let mut w = lu.solve(&basis[j])?;
        for _pass in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let c = op.inner(&w, v);
                if i < m {
                    hmat[(i, j)] += c;
                }
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
        }
        let beta = op.norm(&w);
        if j + 1 < m {
            if beta <= 1e-13 * hmat[(j, j)].norm().max(1e-300) {
                size = j + 1;
                break;
            }
            hmat[(j + 1, j)] = c64::new(beta, 0.0);
            basis.push(w.iter().map(|v| v / beta).collect());
        }
    }
    basis.truncate(size);
    let h = Mat::<c64>::from_fn(size, size, |i, j| hmat[(i, j)]);
    Ok((basis, h))
}

fn krylov_near(
    op: &DiscreteOperator,
    shift: c64,
    count: usize,
    cfg: &SolverConfig,
    hermitian: bool,
    stream: u64,
    info: &mut SolverInfo,
) -> Result<Vec<EigenPair>> {
    let n = op.unknown_count();
    let count = count.min(n);
    if count == 0 {
        return Ok(Vec::new());
    }
    let m = cfg.krylov_dim.unwrap_or((2 * count + 20).max(40)).min(n).max(count);
    let lu = factor(op, shift, info)?;
    info.shifts.push(lu.shift());
    let sigma = lu.shift();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut start: Vec<c64> = (0..n).map(|_| c64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
    let mut accepted: Vec<EigenPair> = Vec::new();

    for restart in 0..=cfg.max_restarts {
        let (basis, h) = krylov_basis(op, &lu, &start, m)?;
        info.iterations += basis.len();
        let k = basis.len();
        let (mu, y): (Vec<c64>, Mat<c64>) = if hermitian {
            let hs = Mat::<c64>::from_fn(k, k, |i, j| 0.5 * (h[(i, j)] + h[(j, i)].conj()));
            let e = hs
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Solver(format!("projected eigenproblem: {e:?}")))?;
            let s = e.S().column_vector();
            ((0..k).map(|i| s[i]).collect(), e.U().to_owned())
        } else {
            let e = h.eigen().map_err(|e| Error::Solver(format!("projected eigenproblem: {e:?}")))?;
            let s = e.S().column_vector();
            ((0..k).map(|i| s[i]).collect(), e.U().to_owned())
        };
        let mut order: Vec<usize> = (0..k).filter(|&i| mu[i].norm() > 0.0).collect();
        order.sort_by(|&a, &b| mu[b].norm().total_cmp(&mu[a].norm()));
        order.truncate(count);

        let mut candidates = Vec::new();
        let mut unconverged: Vec<Vec<c64>> = Vec::new();
        for &i in &order {
            let theta = sigma + 1.0 / mu[i];
            let mut x = vec![c64::default(); n];
            for (j, v) in basis.iter().enumerate() {
                let c = y[(j, i)];
                x.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
            }
            let mut p = make_pair(op, theta, &x);
            if p.residual > cfg.tol {
                if let Ok((q, its)) = refine(op, theta, &x, cfg.tol) {
                    info.iterations += its;
                    info.factorizations += 1;
                    p = q;
                }
            }
            if p.residual > cfg.tol {
                unconverged.push(x);
            }
            candidates.push(p);
        }
        for p in candidates {
            if p.residual <= cfg.tol {
                if !accepted.iter().any(|q| (q.value - p.value).norm() <= 1e-8 * p.value.norm()) {
                    accepted.push(p);
                }
            } else if restart == cfg.max_restarts {
                accepted.push(p);
            }
        }
        let good = accepted.iter().filter(|p| p.residual <= cfg.tol).count();
        if unconverged.is_empty() || good >= count {
            break;
        }
        if restart == cfg.max_restarts {
            info.partial = true;
            info.warnings.push(format!("shift {shift}: {} pairs unconverged after restarts", unconverged.len()));
            break;
        }
        start = vec![c64::default(); n];
        for x in &unconverged {
            let c = c64::new(rng.random::<f64>() + 0.5, rng.random::<f64>() - 0.5);
            start.iter_mut().zip(x).for_each(|(a, b)| *a += c * b);
        }
    }
    accepted.sort_by(|a, b| (a.value - shift).norm().total_cmp(&(b.value - shift).norm()));
    accepted.truncate(count);
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary_data::{sample_alpha, AlphaSpec};
    use crate::operator::assemble;

    fn op(dim: usize, l: f64, h: f64, alpha: c64) -> DiscreteOperator {
        let g = Grid::new(dim, l, h).unwrap();
        let a = sample_alpha(&AlphaSpec::constant(alpha), &g).unwrap();
        assemble(&g, &a).unwrap()
    }

    #[test]
    fn mixed_interval_spectrum() {
        let o = op(1, std::f64::consts::PI, std::f64::consts::PI / 400.0, c64::new(0.0, 0.0));
        let s = eig_selfadjoint(&o, 5, 0.0, &SolverConfig::default()).unwrap();
        assert_eq!(s.pairs.len(), 5);
        for (k, p) in s.pairs.iter().enumerate() {
            let exact = (k as f64 + 0.5).powi(2);
            assert!((p.value.re - exact).abs() < 1e-3 * exact.max(1.0), "{k}: {}", p.value);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let o = op(1, 5.0, 0.01, c64::new(-1.0, 0.0));
        let dense = eig_selfadjoint(&o, 4, -1.0, &SolverConfig::default()).unwrap();
        let cfg = SolverConfig { dense_threshold: 0, ..Default::default() };
        let sparse = eig_selfadjoint(&o, 4, -1.0, &cfg).unwrap();
        assert_eq!(sparse.solver_info.method, "shift-invert-lanczos");
        assert_eq!(dense.pairs.len(), sparse.pairs.len());
        for (a, b) in dense.pairs.iter().zip(&sparse.pairs) {
            assert!((a.value - b.value).norm() < 1e-10 * a.value.norm().max(1.0));
        }
    }

    #[test]
    fn arnoldi_matches_lanczos_for_real_alpha() {
        let o = op(2, 2.0, 0.125, c64::new(-1.0, 0.0));
        let a = eig_selfadjoint(&o, 3, -1.0, &SolverConfig::default()).unwrap();
        let b = eig_nonselfadjoint(&o, &[c64::new(-1.0, 0.0)], 3, &SolverConfig::default()).unwrap();
        for p in &a.pairs {
            assert!(b.pairs.iter().any(|q| (q.value - p.value).norm() < 1e-10 * p.value.norm().max(1.0)));
        }
    }

    #[test]
    fn classification_tags() {
        let o = op(1, 20.0, 0.01, c64::new(-1.0, 0.0));
        let mut s = eig_selfadjoint(&o, 2, -1.0, &SolverConfig::default()).unwrap();
        classify(&mut s, o.grid(), &ClassifyConfig::default());
        let bound = &s.pairs[0];
        assert!((bound.value.re + 1.0).abs() < 1e-3);
        assert_eq!(bound.cone, Some(ConeTag::OutsideCone));
        assert_eq!(bound.kind, Some(ModeTag::Localized));
        assert_eq!(s.pairs[1].kind, Some(ModeTag::Artifact));
    }

    #[test]
    fn cone_boundary() {
        let mut s = Spectrum::default();
        s.pairs.push(EigenPair {
            value: c64::new(1.0, 0.5),
            residual: 0.0,
            localization: 0.0,
            wall_flux: 0.0,
            cone: None,
            kind: None,
            vector: vec![c64::default(); 3],
        });
        let g = Grid::new(1, 1.0, 0.5).unwrap();
        classify(&mut s, &g, &ClassifyConfig::default());
        assert_eq!(s.pairs[0].cone, Some(ConeTag::InsideCone));
    }

    #[test]
    fn complex_shift_without_real_alpha() {
        let o = op(2, 2.0, 0.25, c64::new(-1.0, 0.5));
        assert!(eig_selfadjoint(&o, 1, 0.0, &SolverConfig::default()).is_err());
        let s = eig_nonselfadjoint(&o, &[c64::new(-0.75, -1.0)], 2, &SolverConfig::default()).unwrap();
        assert!(!s.pairs.is_empty());
        for p in &s.pairs {
            assert!(p.residual <= 1e-8);
        }
    }
}
