//! Boundary coupling `alpha` sampled on the `x_n = 0` layer, and the derived
//! fields the eigenvalue-absence hypotheses are stated in.

mod expr;

use std::io::Write;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

pub use expr::Expression;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::stencil::boundary_derivative;

/// How `alpha` is specified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSpec {
    /// `alpha = value`.
    Constant { value: c64 },
    /// `alpha = amplitude / (1 + |x'|)^power`.
    RadialDecay { amplitude: c64, power: f64 },
    /// `alpha = amplitude e^{i phase} / (1 + |x'|^2)`.
    ComplexPhase { amplitude: f64, phase: f64 },
    /// Arithmetic expression in `x1..x3` and `r`.
    Expression { source: String },
}

impl AlphaSpec {
    pub fn constant(value: c64) -> Self {
        AlphaSpec::Constant { value }
    }

    pub fn real(value: f64) -> Self {
        AlphaSpec::Constant { value: c64::new(value, 0.0) }
    }

    pub fn expression(source: impl Into<String>) -> Self {
        AlphaSpec::Expression { source: source.into() }
    }

    pub fn describe(&self) -> String {
        match self {
            AlphaSpec::Constant { value } => format!("constant({value})"),
            AlphaSpec::RadialDecay { amplitude, power } => {
                format!("radial_decay({amplitude}/(1+|x'|)^{power})")
            }
            AlphaSpec::ComplexPhase { amplitude, phase } => {
                format!("complex_phase({amplitude} e^(i {phase})/(1+|x'|^2))")
            }
            AlphaSpec::Expression { source } => format!("expression({source})"),
        }
    }
}

/// Samples of `alpha` on the boundary layer.
#[derive(Clone, Debug)]
pub struct BoundaryFunction {
    pub samples: Vec<c64>,
    /// Analytic tangential gradient per node (presets only).
    pub gradient_samples: Option<Vec<[c64; 3]>>,
    pub provenance: String,
    /// Capability flag: the preset is known to be Lipschitz. Not verified.
    pub differentiable: bool,
    dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMethod {
    Analytic,
    FiniteDifference,
}

/// `x . grad alpha` per boundary node.
#[derive(Clone, Debug)]
pub struct RadialDerivative {
    pub values: Vec<c64>,
    /// `x . grad Re alpha`.
    pub real_part: Vec<f64>,
    pub method: DerivativeMethod,
}

/// Evaluates `spec` on the boundary layer of `grid`.
pub fn sample_alpha(spec: &AlphaSpec, grid: &Grid) -> Result<BoundaryFunction> {
    let d = grid.boundary_dim();
    let (samples, gradient_samples, differentiable): (Vec<c64>, Option<Vec<[c64; 3]>>, bool) =
        match spec {
            AlphaSpec::Constant { value } => {
                (vec![*value; grid.boundary_count()], Some(vec![[c64::default(); 3]; grid.boundary_count()]), true)
            }
            AlphaSpec::RadialDecay { amplitude, power } => {
                let a = *amplitude;
                let p = *power;
                let vals = grid.sample_boundary(|x| a / (1.0 + norm(x)).powf(p));
                let grads = grid.sample_boundary(|x| {
                    let r = norm(x);
                    let mut g = [c64::default(); 3];
                    if r > 0.0 {
                        let radial = a * (-p) * (1.0 + r).powf(-p - 1.0) / r;
                        for j in 0..d {
                            g[j] = radial * x[j];
                        }
                    }
                    g
                });
                (vals, Some(grads), true)
            }
            AlphaSpec::ComplexPhase { amplitude, phase } => {
                let a = c64::from_polar(*amplitude, *phase);
                let vals = grid.sample_boundary(|x| a / (1.0 + norm2(x)));
                let grads = grid.sample_boundary(|x| {
                    let q = 1.0 + norm2(x);
                    let mut g = [c64::default(); 3];
                    for j in 0..d {
                        g[j] = a * (-2.0 * x[j] / (q * q));
                    }
                    g
                });
                (vals, Some(grads), true)
            }
            AlphaSpec::Expression { source } => {
                let e = Expression::parse(source)?;
                if e.max_coordinate() > d {
                    return Err(Error::Parse {
                        offset: 0,
                        message: format!(
                            "expression uses x{} but the boundary has dimension {d}",
                            e.max_coordinate()
                        ),
                    });
                }
                (grid.sample_boundary(|x| e.eval(x)), None, false)
            }
        };
    if let Some(b) = samples.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(format!("alpha sample at boundary node {b}")));
    }
    Ok(BoundaryFunction {
        samples,
        gradient_samples,
        provenance: spec.describe(),
        differentiable,
        dim: grid.dim(),
    })
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn norm(x: &[f64]) -> f64 {
    norm2(x).sqrt()
}

impl BoundaryFunction {
    /// Wraps raw boundary samples (no analytic gradient).
    pub fn from_samples(grid: &Grid, samples: Vec<c64>, provenance: impl Into<String>) -> Result<Self> {
        crate::error::check_len(grid.boundary_count(), samples.len())?;
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("alpha samples".into()));
        }
        Ok(Self {
            samples,
            gradient_samples: None,
            provenance: provenance.into(),
            differentiable: false,
            dim: grid.dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.samples.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// `max |Im alpha| <= tol * max |alpha|`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.max_abs_imag() <= tol * self.max_abs()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.im).collect()
    }

    /// Same samples scaled by `t`.
    pub fn scaled(&self, t: c64) -> Self {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|z| *z *= t);
        if let Some(g) = out.gradient_samples.as_mut() {
            for row in g.iter_mut() {
                row.iter_mut().for_each(|z| *z *= t);
            }
        }
        out.provenance = format!("{} * ({t})", self.provenance);
        out
    }

    /// Finite-difference tangential gradient of the samples, one vector per
    /// direction.
    pub fn fd_gradient(&self, grid: &Grid) -> Vec<Vec<c64>> {
        (0..grid.boundary_dim()).map(|j| boundary_derivative(grid, &self.samples, j)).collect()
    }

    /// Writes `x1..x_{n-1}, re_alpha, im_alpha` rows.
    pub fn write_csv<W: Write>(&self, grid: &Grid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = grid.boundary_dim();
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        header.push("re_alpha".into());
        header.push("im_alpha".into());
        w.write_record(&header)?;
        for (b, z) in self.samples.iter().enumerate() {
            let p = grid.boundary_point(b);
            let mut row: Vec<String> = p[..d].iter().map(|v| format!("{v:.17e}")).collect();
            row.push(format!("{:.17e}", z.re));
            row.push(format!("{:.17e}", z.im));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `x . grad alpha` on the boundary (where `x = (x', 0)`). Uses the analytic
/// gradient when the preset provides one, otherwise second-order differences.
pub fn radial_derivative(alpha: &BoundaryFunction, grid: &Grid) -> RadialDerivative {
    let d = grid.boundary_dim();
    let nb = grid.boundary_count();
    if d == 0 {
        return RadialDerivative {
            values: vec![c64::default(); nb],
            real_part: vec![0.0; nb],
            method: if alpha.gradient_samples.is_some() {
                DerivativeMethod::Analytic
            } else {
                DerivativeMethod::FiniteDifference
            },
        };
    }
    let (values, method) = match &alpha.gradient_samples {
        Some(g) => {
            let v = (0..nb)
                .map(|b| {
                    let x = grid.boundary_point(b);
                    (0..d).map(|j| g[b][j] * x[j]).sum()
                })
                .collect();
            (v, DerivativeMethod::Analytic)
        }
        None => (fd_radial_derivative(alpha, grid), DerivativeMethod::FiniteDifference),
    };
    let real_part = values.iter().map(|z: &c64| z.re).collect();
    RadialDerivative { values, real_part, method }
}

/// `x . grad alpha` by finite differences regardless of analytic data.
pub fn fd_radial_derivative(alpha: &BoundaryFunction, grid: &Grid) -> Vec<c64> {
    let d = grid.boundary_dim();
    let grads = alpha.fd_gradient(grid);
    (0..grid.boundary_count())
        .map(|b| {
            let x = grid.boundary_point(b);
            (0..d).map(|j| grads[j][b] * x[j]).sum()
        })
        .collect()
}

/// `div(x' Im alpha)` by differences of the product field.
pub fn divergence_field(alpha: &BoundaryFunction, grid: &Grid) -> Result<Vec<f64>> {
    let d = grid.boundary_dim();
    if d == 0 {
        return Err(Error::UnsupportedDimension { op: "divergence_field", dim: grid.dim() });
    }
    let mut div = vec![0.0; grid.boundary_count()];
    for j in 0..d {
        let product: Vec<f64> = alpha
            .samples
            .iter()
            .enumerate()
            .map(|(b, z)| grid.boundary_point(b)[j] * z.im)
            .collect();
        let dj = boundary_derivative(grid, &product, j);
        div.iter_mut().zip(dj).for_each(|(a, v)| *a += v);
    }
    Ok(div)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_preset() {
        let g = Grid::new(2, 2.0, 0.5).unwrap();
        let a = sample_alpha(&AlphaSpec::real(-1.0), &g).unwrap();
        assert!(a.samples.iter().all(|z| *z == c64::new(-1.0, 0.0)));
        let rd = radial_derivative(&a, &g);
        assert!(rd.values.iter().all(|z| z.norm() == 0.0));
        assert_eq!(rd.method, DerivativeMethod::Analytic);
    }

    #[test]
    fn inverse_quadratic_is_repulsive() {
        let g = Grid::new(3, 2.0, 0.25).unwrap();
        let a = sample_alpha(&AlphaSpec::ComplexPhase { amplitude: 1.0, phase: 0.0 }, &g).unwrap();
        let rd = radial_derivative(&a, &g);
        for (b, z) in rd.values.iter().enumerate() {
            let x = g.boundary_point(b);
            let r2 = x[0] * x[0] + x[1] * x[1];
            let expected = -2.0 * r2 / (1.0 + r2).powi(2);
            assert!((z.re - expected).abs() < 1e-14);
            assert!(z.re <= 0.0);
        }
    }

    #[test]
    fn phase_preset_stays_in_sector() {
        let g = Grid::new(2, 4.0, 0.5).unwrap();
        let spec = AlphaSpec::expression("0.1*exp(i*pi/8)/(1+r)");
        let a = sample_alpha(&spec, &g).unwrap();
        assert!(a.samples.iter().all(|z| z.re >= z.im.abs()));
        assert!(!a.differentiable);
        assert!((PI / 8.0).tan() < 1.0);
    }

    #[test]
    fn increasing_alpha_fails_repulsivity() {
        let g = Grid::new(2, 4.0, 0.25).unwrap();
        let a = sample_alpha(&AlphaSpec::expression("r"), &g).unwrap();
        let rd = radial_derivative(&a, &g);
        assert_eq!(rd.method, DerivativeMethod::FiniteDifference);
        for (b, z) in rd.values.iter().enumerate() {
            let r = g.boundary_point(b)[0].abs();
            assert!(z.re >= 0.0);
            if r > 0.3 {
                assert!((z.re - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_of_constant_imaginary_part() {
        let g = Grid::new(3, 2.0, 0.5).unwrap();
        let a = sample_alpha(&AlphaSpec::constant(c64::new(1.0, 0.3)), &g).unwrap();
        let div = divergence_field(&a, &g).unwrap();
        assert!(div.iter().all(|v| (v - 0.6).abs() < 1e-13));
        let re = sample_alpha(&AlphaSpec::real(2.0), &g).unwrap();
        assert!(divergence_field(&re, &g).unwrap().iter().all(|v| *v == 0.0));
        let g1 = Grid::new(1, 2.0, 0.5).unwrap();
        let a1 = sample_alpha(&AlphaSpec::real(1.0), &g1).unwrap();
        assert!(matches!(divergence_field(&a1, &g1), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn rejects_bad_expressions() {
        let g = Grid::new(2, 2.0, 0.5).unwrap();
        assert!(matches!(sample_alpha(&AlphaSpec::expression("x2"), &g), Err(Error::Parse { .. })));
        assert!(matches!(sample_alpha(&AlphaSpec::expression("1/(x1-x1)"), &g), Err(Error::NonFinite(_))));
        assert!(matches!(sample_alpha(&AlphaSpec::expression("1+"), &g), Err(Error::Parse { .. })));
    }

    #[test]
    fn half_line_alpha_is_a_number() {
        let g = Grid::new(1, 5.0, 0.5).unwrap();
        let a = sample_alpha(&AlphaSpec::expression("-1 + 0.5*i"), &g).unwrap();
        assert_eq!(a.samples, vec![c64::new(-1.0, 0.5)]);
        assert_eq!(radial_derivative(&a, &g).values, vec![c64::default()]);
    }

    #[test]
    fn csv_export() {
        let g = Grid::new(2, 1.0, 0.5).unwrap();
        let a = sample_alpha(&AlphaSpec::constant(c64::new(1.0, -2.0)), &g).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,re_alpha,im_alpha");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("-7.5"));
    }
}
