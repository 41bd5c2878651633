//! Compressed-row complex matrices and shifted sparse LU factorizations.

use std::io::Write;

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64 as c64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row layout.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<c64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, c64)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < n, "column {c} out of range");
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self { n, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.row(i).find(|e| e.0 == j).map(|e| e.1).unwrap_or_default()
    }

    pub fn matvec(&self, x: &[c64]) -> Vec<c64> {
        let mut y = vec![c64::default(); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[c64], y: &mut [c64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_iter_mut().with_min_len(4096).enumerate().for_each(|(i, yi)| {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        });
    }

    /// `A^H x`.
    pub fn adjoint_matvec(&self, x: &[c64]) -> Vec<c64> {
        let mut y = vec![c64::default(); self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                y[j] += v.conj() * x[i];
            }
        }
        y
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `A - shift I` in compressed-column form.
    pub fn shifted_csc(&self, shift: c64) -> Result<SparseColMat<usize, c64>> {
        let mut triplets = Vec::with_capacity(self.nnz() + self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                triplets.push(Triplet::new(i, j, v));
            }
            triplets.push(Triplet::new(i, i, -shift));
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| Error::Solver(format!("sparse assembly: {e:?}")))
    }

    /// Matrix Market coordinate format, complex general, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(out, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Sparse LU of `A - shift I`.
pub struct ShiftedLu {
    lu: Lu<usize, c64>,
    shift: c64,
    n: usize,
}

impl std::fmt::Debug for ShiftedLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftedLu").field("shift", &self.shift).field("n", &self.n).finish()
    }
}

/// Symbolic analysis reusable across shifts of the same matrix.
pub struct SymbolicPattern {
    symbolic: SymbolicLu<usize>,
}

impl SymbolicPattern {
    pub fn analyze(matrix: &CsrMatrix) -> Result<Self> {
        let csc = matrix.shifted_csc(c64::new(0.0, 0.0))?;
        let symbolic = SymbolicLu::try_new(csc.symbolic())
            .map_err(|e| Error::Solver(format!("symbolic LU: {e:?}")))?;
        Ok(Self { symbolic })
    }
}

impl ShiftedLu {
    pub fn new(matrix: &CsrMatrix, shift: c64) -> Result<Self> {
        let pattern = SymbolicPattern::analyze(matrix)?;
        Self::with_pattern(matrix, shift, &pattern)
    }

    pub fn with_pattern(matrix: &CsrMatrix, shift: c64, pattern: &SymbolicPattern) -> Result<Self> {
        let csc = matrix.shifted_csc(shift)?;
        let lu = Lu::try_new_with_symbolic(pattern.symbolic.clone(), csc.as_ref()).map_err(|e| {
            Error::Factorization { shift: format!("{shift}"), detail: format!("{e:?}") }
        })?;
        Ok(Self { lu, shift, n: matrix.dim() })
    }

    pub fn shift(&self) -> c64 {
        self.shift
    }

    /// Solves `(A - shift) x = rhs`; errors if the result is not finite.
    pub fn solve(&self, rhs: &[c64]) -> Result<Vec<c64>> {
        self.solve_impl(rhs, false)
    }

    /// Solves `(A - shift)^H x = rhs`.
    pub fn solve_adjoint(&self, rhs: &[c64]) -> Result<Vec<c64>> {
        self.solve_impl(rhs, true)
    }

    fn solve_impl(&self, rhs: &[c64], adjoint: bool) -> Result<Vec<c64>> {
        assert_eq!(rhs.len(), self.n);
        let mut b = Mat::<c64>::from_fn(self.n, 1, |i, _| rhs[i]);
        if adjoint {
            self.lu.solve_adjoint_in_place(b.as_mut());
        } else {
            self.lu.solve_in_place(b.as_mut());
        }
        let x: Vec<c64> = (0..self.n).map(|i| b[(i, 0)]).collect();
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NearSingular { shift: format!("{}", self.shift), condition: f64::INFINITY });
        }
        Ok(x)
    }

    /// Hager-Higham estimate of `||(A - shift)^{-1}||_1`.
    pub fn inverse_norm1_estimate(&self) -> Result<f64> {
        let n = self.n;
        let mut x = vec![c64::new(1.0 / n as f64, 0.0); n];
        let mut estimate = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x)?;
            let norm: f64 = y.iter().map(|z| z.norm()).sum();
            if norm <= estimate {
                break;
            }
            estimate = norm;
            let xi: Vec<c64> =
                y.iter().map(|z| if z.norm() > 0.0 { z / z.norm() } else { c64::new(1.0, 0.0) }).collect();
            let z = self.solve_adjoint(&xi)?;
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, -1.0), |acc, e| if e.1 > acc.1 { e } else { acc });
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= zx {
                break;
            }
            x = vec![c64::default(); n];
            x[j] = c64::new(1.0, 0.0);
        }
        Ok(estimate)
    }
}

/// One-norm of `A - shift I`.
pub fn shifted_norm1(matrix: &CsrMatrix, shift: c64) -> f64 {
    let mut cols = vec![0.0; matrix.dim()];
    for i in 0..matrix.dim() {
        let mut diag = false;
        for (j, v) in matrix.row(i) {
            if i == j {
                cols[j] += (v - shift).norm();
                diag = true;
            } else {
                cols[j] += v.norm();
            }
        }
        if !diag {
            cols[i] += shift.norm();
        }
    }
    cols.into_iter().fold(0.0, f64::max)
}

/// Dense matrix-vector helpers over plain slices.
pub(crate) fn weighted_dot(w: &[f64], a: &[c64], b: &[c64]) -> c64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| a * b.conj() * *w).sum()
}

pub(crate) fn weighted_norm(w: &[f64], a: &[c64]) -> f64 {
    w.iter().zip(a).map(|(w, a)| w * a.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, c64::new(2.0, 0.0))];
                if i > 0 {
                    r.push((i - 1, c64::new(-1.0, 0.0)));
                }
                if i + 1 < n {
                    r.push((i + 1, c64::new(-1.0, 0.5)));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn lu_round_trip() {
        let a = tridiag(50);
        let x: Vec<c64> = (0..50).map(|i| c64::new(i as f64, 1.0 - i as f64 * 0.1)).collect();
        let shift = c64::new(0.3, 0.2);
        let mut b = a.matvec(&x);
        b.iter_mut().zip(&x).for_each(|(b, x)| *b -= shift * x);
        let lu = ShiftedLu::new(&a, shift).unwrap();
        let y = lu.solve(&b).unwrap();
        let err: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);

        let mut c = a.adjoint_matvec(&x);
        c.iter_mut().zip(&x).for_each(|(c, x)| *c -= shift.conj() * x);
        let z = lu.solve_adjoint(&c).unwrap();
        let err: f64 = z.iter().zip(&x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn condition_estimate_matches_dense_for_diagonal() {
        let a = CsrMatrix::from_rows(
            (0..5).map(|i| vec![(i, c64::new(1.0 + i as f64, 0.0))]).collect(),
        );
        let lu = ShiftedLu::new(&a, c64::new(0.5, 0.0)).unwrap();
        let est = lu.inverse_norm1_estimate().unwrap();
        assert!((est - 2.0).abs() < 1e-12);
        assert!((shifted_norm1(&a, c64::new(0.5, 0.0)) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_rows(vec![
            vec![(1, c64::new(1.0, 0.0)), (0, c64::new(2.0, 0.0)), (1, c64::new(3.0, 0.0))],
            vec![(1, c64::new(1.0, 0.0))],
        ]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), c64::new(4.0, 0.0));
    }

    #[test]
    fn matrix_market_layout() {
        let a = CsrMatrix::from_rows(vec![vec![(0, c64::new(1.0, -1.0))], vec![(0, c64::new(0.5, 0.0))]]);
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate complex general");
        assert_eq!(lines[1], "2 2 2");
        assert!(lines[2].starts_with("1 1 1.0"));
        assert!(lines[3].starts_with("2 1 5.0"));
    }
}
