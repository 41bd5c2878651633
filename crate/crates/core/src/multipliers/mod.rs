//! Discrete checks of the multiplier identities, the virial identity, the
//! crucial inequalities, the cutoff error terms, the Hardy and trace
//! inequalities and the difference-quotient identities.
//!
//! Quadrature conventions: energy terms are edge sums (the same sums the form
//! uses), first-order volume terms use centered node gradients with the
//! trapezoid weights, boundary terms use centered tangential differences with
//! the surface weights.

mod cutoff;
mod difference;
mod identities;
mod inequalities;
mod manufactured;

use std::fmt;
use std::io::Write;

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

pub use cutoff::{cutoff_constants, cutoff_errors, cutoff_profile, CutoffConstants, CutoffRow};
pub use difference::{difference_quotient, dq_identity_residuals, DqResiduals};
pub use identities::{
    crucial_inequality_gap, identity_residuals, u_minus_gradient, u_minus_transform, virial_residual,
    CrucialLemma, VirialCorrection,
};
pub use inequalities::{
    hardy_ratio, trace_half_norm_check, trace_interpolation_check, HardyVariant, TraceCheck,
    TraceInterpolation,
};
pub use manufactured::{
    gaussian_bump, manufactured_problem, random_bumps, ManufacturedProblem, Profile, Profile1d,
    WALL_LEAKAGE_TOL,
};

use crate::error::Result;
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IdentityId {
    I1,
    I2,
    I3,
    I4,
    I5,
    #[serde(rename = "I1'")]
    I1Prime,
    #[serde(rename = "I2'")]
    I2Prime,
    #[serde(rename = "I3'")]
    I3Prime,
    #[serde(rename = "I4'")]
    I4Prime,
    #[serde(rename = "I5'")]
    I5Prime,
    #[serde(rename = "virial")]
    Virial,
    #[serde(rename = "crucial_33")]
    Crucial33,
    #[serde(rename = "crucial_34")]
    Crucial34,
    #[serde(rename = "greens")]
    Greens,
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IdentityId::I1 => "I1",
            IdentityId::I2 => "I2",
            IdentityId::I3 => "I3",
            IdentityId::I4 => "I4",
            IdentityId::I5 => "I5",
            IdentityId::I1Prime => "I1'",
            IdentityId::I2Prime => "I2'",
            IdentityId::I3Prime => "I3'",
            IdentityId::I4Prime => "I4'",
            IdentityId::I5Prime => "I5'",
            IdentityId::Virial => "virial",
            IdentityId::Crucial33 => "crucial_33",
            IdentityId::Crucial34 => "crucial_34",
            IdentityId::Greens => "greens",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridTag {
    pub h: f64,
    pub l: f64,
}

impl GridTag {
    pub fn of(grid: &Grid) -> Self {
        Self { h: grid.spacing(), l: grid.half_width() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityResidualReport {
    pub identity_id: IdentityId,
    pub lhs: c64,
    pub rhs: c64,
    /// `|lhs - rhs|`.
    pub residual: f64,
    pub grid: GridTag,
    pub order_estimate: Option<f64>,
    /// `Re(lhs - rhs)` for the inequalities, where the sign matters.
    pub signed_gap: Option<f64>,
}

impl IdentityResidualReport {
    pub(crate) fn new(identity_id: IdentityId, lhs: c64, rhs: c64, grid: &Grid) -> Self {
        Self {
            identity_id,
            lhs,
            rhs,
            residual: (lhs - rhs).norm(),
            grid: GridTag::of(grid),
            order_estimate: None,
            signed_gap: None,
        }
    }

    pub(crate) fn real(identity_id: IdentityId, lhs: f64, rhs: f64, grid: &Grid) -> Self {
        Self::new(identity_id, c64::new(lhs, 0.0), c64::new(rhs, 0.0), grid)
    }
}

/// `log2(coarse / fine)` for residuals at `h` and `h / 2`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Sets `order_estimate` on every report of `fine` that has a partner with the
/// same id in `coarse` (run at twice the spacing).
pub fn attach_orders(coarse: &[IdentityResidualReport], fine: &mut [IdentityResidualReport]) {
    for r in fine.iter_mut() {
        if let Some(c) = coarse.iter().find(|c| c.identity_id == r.identity_id) {
            r.order_estimate = Some(observed_order(c.residual, r.residual));
        }
    }
}

/// Appends reports as CSV rows. Writes the header when `header` is set.
pub fn write_ledger<W: Write>(reports: &[IdentityResidualReport], out: W, header: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record([
            "identity_id", "h", "L", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual", "order_estimate",
        ])?;
    }
    for r in reports {
        w.write_record([
            r.identity_id.to_string(),
            format!("{:e}", r.grid.h),
            format!("{:e}", r.grid.l),
            format!("{:.17e}", r.lhs.re),
            format!("{:.17e}", r.lhs.im),
            format!("{:.17e}", r.rhs.re),
            format!("{:.17e}", r.rhs.im),
            format!("{:.17e}", r.residual),
            r.order_estimate.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
