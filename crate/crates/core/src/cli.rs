//! Command-line front end. A run is described by a [`RunConfig`] read from a
//! TOML or JSON file, optionally overridden by flags, and dispatched to one
//! subcommand. Reports go to the output directory as JSON (always carrying
//! `schema_version` and the resolved config) plus CSV or SVG where requested.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::boundary_data::{sample_alpha, AlphaSpec, BoundaryFunction};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hypotheses::{
    check_selfadjoint_hypotheses, check_thm12_hypotheses, check_thm15_hypotheses, write_summary_csv, B2Variant,
    HypothesisReport, Taper, TheoremId,
};
use crate::multipliers::{
    attach_orders, cutoff_errors, hardy_ratio, identity_residuals, manufactured_problem, random_bumps,
    trace_half_norm_check, trace_interpolation_check, write_ledger, HardyVariant, IdentityResidualReport, Profile,
    Profile1d,
};
use crate::operator::assemble;
use crate::resolvent::{sweep, LambdaGrid, SweepConfig};
use crate::spectral::{classify, eig_nonselfadjoint, eig_selfadjoint, ClassifyConfig, SolverConfig, Spectrum};
use crate::Closure;

pub const SCHEMA_VERSION: u32 = 1;

/// Exit status for a run whose hypotheses fail.
pub const EXIT_HYPOTHESIS_FAIL: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub spacing: f64,
    pub node_cap: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dim: 1, half_width: 10.0, spacing: 0.05, node_cap: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigsConfig {
    /// Shifts for shift-invert; only the real part is used for real `alpha`.
    pub shifts: Vec<c64>,
    /// Eigenpairs requested per shift.
    pub count: usize,
}

impl Default for EigsConfig {
    fn default() -> Self {
        Self { shifts: vec![c64::new(0.0, 0.0)], count: 6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// `None` picks T1.1 for real `alpha`, T1.2 otherwise.
    pub theorem: Option<TheoremId>,
    pub c_star: f64,
    pub s_star: Option<f64>,
    /// `None` uses a radial taper of width `L / 10`.
    pub taper: Option<Taper>,
    pub b2_variant: B2Variant,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { theorem: None, c_star: 1.0, s_star: None, taper: None, b2_variant: B2Variant::Hardy }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    /// Number of random Gaussian right-hand sides.
    pub count: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self { count: 20 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitiesConfig {
    pub lambda: c64,
    /// Number of resolutions `h, h/2, ...`.
    pub levels: usize,
    /// `None` builds a default bump scaled to the box.
    pub profile: Option<Profile>,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        Self { lambda: c64::new(1.5, 0.8), levels: 3, profile: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutoffConfig {
    pub radii: Vec<f64>,
    /// Test field `exp(-decay |x|)`.
    pub decay: f64,
}

impl Default for CutoffConfig {
    fn default() -> Self {
        Self { radii: vec![2.0, 4.0, 8.0], decay: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardyConfig {
    pub count: usize,
    /// `None` picks unweighted for `n >= 3`, weighted otherwise.
    pub variant: Option<HardyVariant>,
}

impl Default for HardyConfig {
    fn default() -> Self {
        Self { count: 200, variant: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub count: usize,
    pub epsilons: Vec<f64>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { count: 100, epsilons: vec![0.1, 1.0, 10.0] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), formats: vec![Format::Json, Format::Csv] }
    }
}

fn default_alpha() -> AlphaSpec {
    AlphaSpec::real(0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub alpha: AlphaSpec,
    pub solver: SolverConfig,
    pub classify: ClassifyConfig,
    pub eigs: EigsConfig,
    pub check: CheckConfig,
    pub lambda_grid: LambdaGrid,
    pub sweep: SweepConfig,
    pub f_family: FamilyConfig,
    pub identities: IdentitiesConfig,
    pub cutoff: CutoffConfig,
    pub hardy: HardyConfig,
    pub trace: TraceConfig,
    pub output: OutputConfig,
    pub seed: u64,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            alpha: default_alpha(),
            solver: SolverConfig::default(),
            classify: ClassifyConfig::default(),
            eigs: EigsConfig::default(),
            check: CheckConfig::default(),
            lambda_grid: LambdaGrid::List { values: Vec::new() },
            sweep: SweepConfig::default(),
            f_family: FamilyConfig::default(),
            identities: IdentitiesConfig::default(),
            cutoff: CutoffConfig::default(),
            hardy: HardyConfig::default(),
            trace: TraceConfig::default(),
            output: OutputConfig::default(),
            seed: 7,
            jobs: None,
        }
    }
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(field, format!("must be positive and finite, got {v}")))
    }
}

fn nonzero(field: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(config_error(field, "must be at least 1"))
    }
}

impl RunConfig {
    /// Reads TOML or JSON depending on the extension (`.json` is JSON,
    /// anything else TOML). Unknown keys are rejected.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| {
                config_error(&path.display().to_string(), format!("line {} column {}: {e}", e.line(), e.column()))
            })
        } else {
            Self::from_toml(&text).map_err(|e| match e {
                Error::Config { message, .. } => config_error(&path.display().to_string(), message),
                other => other,
            })
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error("<toml>", e.to_string()))
    }

    /// Range checks on every numeric parameter.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            return Err(config_error("grid.dim", format!("must be 1, 2 or 3, got {}", g.dim)));
        }
        positive("grid.half_width", g.half_width)?;
        positive("grid.spacing", g.spacing)?;
        if g.spacing >= g.half_width {
            return Err(config_error("grid.spacing", "must be smaller than grid.half_width"));
        }
        if let Some(cap) = g.node_cap {
            nonzero("grid.node_cap", cap)?;
        }
        positive("solver.tol", self.solver.tol)?;
        nonzero("solver.max_restarts", self.solver.max_restarts)?;
        nonzero("eigs.count", self.eigs.count)?;
        if self.eigs.shifts.is_empty() {
            return Err(config_error("eigs.shifts", "needs at least one shift"));
        }
        if self.eigs.shifts.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(config_error("eigs.shifts", "shifts must be finite"));
        }
        positive("check.c_star", self.check.c_star)?;
        if let Some(s) = self.check.s_star {
            positive("check.s_star", s)?;
        }
        if let Some(Taper::Radial { width }) = self.check.taper {
            positive("check.taper.width", width)?;
        }
        if let LambdaGrid::Rectangle { re, im, .. } = &self.lambda_grid {
            if re[0] > re[1] || im[0] > im[1] || !re.iter().chain(im).all(|v| v.is_finite()) {
                return Err(config_error("lambda_grid", "rectangle bounds must be finite and ordered"));
            }
        }
        if !(self.sweep.exclusion_radius >= 0.0) {
            return Err(config_error("sweep.exclusion_radius", "must be nonnegative"));
        }
        nonzero("f_family.count", self.f_family.count)?;
        nonzero("identities.levels", self.identities.levels)?;
        if self.cutoff.radii.is_empty() {
            return Err(config_error("cutoff.radii", "needs at least one radius"));
        }
        for r in &self.cutoff.radii {
            positive("cutoff.radii", *r)?;
        }
        positive("cutoff.decay", self.cutoff.decay)?;
        nonzero("hardy.count", self.hardy.count)?;
        nonzero("trace.count", self.trace.count)?;
        for e in &self.trace.epsilons {
            positive("trace.epsilons", *e)?;
        }
        if let Some(j) = self.jobs {
            nonzero("jobs", j)?;
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid> {
        let g = &self.grid;
        match g.node_cap {
            Some(cap) => Grid::with_cap(g.dim, g.half_width, g.spacing, cap),
            None => Grid::new(g.dim, g.half_width, g.spacing),
        }
    }

    fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

#[derive(Debug, Parser)]
#[command(name = "robin", version, about = "Robin Laplacian on truncated half-spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output formats; repeatable.
    #[arg(long = "format", value_enum, global = true)]
    pub formats: Vec<Format>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub half_width: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub spacing: Option<f64>,
    /// A real constant or an expression in x1..x3 and r.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Assemble the operator and export it.
    Assemble,
    /// Eigenvalues near the configured shifts.
    Eigs,
    /// Hypothesis check for the configured alpha.
    Check,
    /// Multiplier identity residuals over successive resolutions.
    Identities,
    /// Cut-off error table.
    Cutoff,
    /// Hardy ratios over random bumps.
    Hardy,
    /// Trace inequalities over random bumps.
    Trace,
    /// Resolvent sweep over the lambda grid.
    ResolventSweep,
    /// Aggregate the JSON reports in the output directory.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Assemble => "assemble",
            Command::Eigs => "eigs",
            Command::Check => "check",
            Command::Identities => "identities",
            Command::Cutoff => "cutoff",
            Command::Hardy => "hardy",
            Command::Trace => "trace",
            Command::ResolventSweep => "resolvent-sweep",
            Command::Report => "report",
        }
    }
}

impl Cli {
    /// Config file (or defaults) with the flag overrides applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.out {
            cfg.output.dir = d.clone();
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if !self.formats.is_empty() {
            cfg.output.formats = self.formats.clone();
        }
        if let Some(d) = self.dim {
            cfg.grid.dim = d;
        }
        if let Some(l) = self.half_width {
            cfg.grid.half_width = l;
        }
        if let Some(h) = self.spacing {
            cfg.grid.spacing = h;
        }
        if let Some(a) = &self.alpha {
            cfg.alpha = match a.trim().parse::<f64>() {
                Ok(v) => AlphaSpec::real(v),
                Err(_) => AlphaSpec::expression(a.clone()),
            };
        }
        if !cfg.output.formats.contains(&Format::Json) {
            cfg.output.formats.push(Format::Json);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// What a command produced: a JSON result and whether hypotheses failed.
pub struct Outcome {
    pub result: Value,
    pub hypothesis_failed: bool,
}

impl Outcome {
    fn ok(result: Value) -> Self {
        Self { result, hypothesis_failed: false }
    }
}

fn write_file(cfg: &RunConfig, name: &str, bytes: &[u8]) -> Result<()> {
    fs::write(cfg.output.dir.join(name), bytes)?;
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn alpha_for(cfg: &RunConfig, grid: &Grid) -> Result<BoundaryFunction> {
    sample_alpha(&cfg.alpha, grid)
}

/// Runs one command and writes its artifacts. The JSON report is written
/// last, so a failed run leaves no report behind.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    fs::create_dir_all(&cfg.output.dir)?;
    let outcome = match command {
        Command::Assemble => run_assemble(cfg)?,
        Command::Eigs => run_eigs(cfg)?,
        Command::Check => run_check(cfg)?,
        Command::Identities => run_identities(cfg)?,
        Command::Cutoff => run_cutoff(cfg)?,
        Command::Hardy => run_hardy(cfg)?,
        Command::Trace => run_trace(cfg)?,
        Command::ResolventSweep => run_sweep(cfg)?,
        Command::Report => run_report(cfg)?,
    };
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command.name(),
        "config": cfg,
        "result": outcome.result,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_file(cfg, &format!("{}.json", command.name()), text.as_bytes())?;
    Ok(outcome)
}

fn run_assemble(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let alpha = alpha_for(cfg, &grid)?;
    let op = assemble(&grid, &alpha)?;
    let mut mm = Vec::new();
    op.write_matrix_market(&mut mm)?;
    write_file(cfg, "operator.mtx", &mm)?;
    if cfg.wants(Format::Csv) {
        write_file(cfg, "alpha.csv", &csv_bytes(|b| alpha.write_csv(&grid, b))?)?;
    }
    Ok(Outcome::ok(json!({
        "nodes": grid.node_count(),
        "unknowns": op.unknown_count(),
        "nonzeros": op.matrix().nnz(),
        "self_adjoint": op.symmetry_flag(),
        "alpha": alpha.provenance,
    })))
}

/// Eigenpairs of the configured operator, classified.
pub fn compute_spectrum(cfg: &RunConfig) -> Result<Spectrum> {
    let grid = cfg.build_grid()?;
    let alpha = alpha_for(cfg, &grid)?;
    let op = assemble(&grid, &alpha)?;
    let mut spectrum = if op.symmetry_flag() {
        let mut merged = Spectrum::default();
        for s in &cfg.eigs.shifts {
            let part = eig_selfadjoint(&op, cfg.eigs.count, s.re, &cfg.solver)?;
            merged.solver_info.method = part.solver_info.method.clone();
            merged.solver_info.shifts.extend(part.solver_info.shifts);
            merged.solver_info.iterations += part.solver_info.iterations;
            merged.solver_info.factorizations += part.solver_info.factorizations;
            merged.solver_info.warnings.extend(part.solver_info.warnings);
            merged.solver_info.partial |= part.solver_info.partial;
            for p in part.pairs {
                if !merged.pairs.iter().any(|q| (q.value - p.value).norm() <= 1e-8 * p.value.norm().max(1.0)) {
                    merged.pairs.push(p);
                }
            }
        }
        merged.pairs.sort_by(|a, b| a.value.re.total_cmp(&b.value.re));
        merged
    } else {
        eig_nonselfadjoint(&op, &cfg.eigs.shifts, cfg.eigs.count, &cfg.solver)?
    };
    classify(&mut spectrum, &grid, &cfg.classify);
    Ok(spectrum)
}

fn run_eigs(cfg: &RunConfig) -> Result<Outcome> {
    let spectrum = compute_spectrum(cfg)?;
    if cfg.wants(Format::Csv) {
        write_file(cfg, "eigs.csv", &csv_bytes(|b| spectrum.write_csv(b))?)?;
    }
    let localized = spectrum.certified_localized(cfg.solver.tol).count();
    Ok(Outcome::ok(json!({ "spectrum": spectrum, "certified_localized": localized })))
}

/// Hypothesis report for the configured theorem.
pub fn hypothesis_report(cfg: &RunConfig) -> Result<HypothesisReport> {
    let grid = cfg.build_grid()?;
    let alpha = alpha_for(cfg, &grid)?;
    let theorem = cfg.check.theorem.unwrap_or(if alpha.is_real(0.0) { TheoremId::T11 } else { TheoremId::T12 });
    match theorem {
        TheoremId::T11 => check_selfadjoint_hypotheses(&alpha, &grid),
        TheoremId::T12 => {
            let taper = cfg.check.taper.unwrap_or_else(|| Taper::default_for(&grid));
            check_thm12_hypotheses(&alpha, &grid, cfg.check.c_star, cfg.check.s_star, taper)
        }
        TheoremId::T15 => check_thm15_hypotheses(&alpha, &grid, cfg.check.b2_variant),
    }
}

fn run_check(cfg: &RunConfig) -> Result<Outcome> {
    let report = hypothesis_report(cfg)?;
    if cfg.wants(Format::Csv) {
        write_file(cfg, "hypotheses.csv", &csv_bytes(|b| write_summary_csv(std::slice::from_ref(&report), b))?)?;
    }
    let failed = !report.passed();
    Ok(Outcome { result: serde_json::to_value(&report)?, hypothesis_failed: failed })
}

/// Smooth bump well inside the box: tangential Gaussians off the origin
/// with a phase, and a normal Gaussian-times-linear profile.
pub fn default_profile(dim: usize, half_width: f64) -> Profile {
    let s = half_width / 10.0;
    let mut factors: Vec<Profile1d> = (0..dim - 1)
        .map(|j| Profile1d::gaussian(if j == 0 { 3.5 * s } else { -2.0 * s }, 1.2 * s).with_wavenumber(0.7 / s))
        .collect();
    factors.push(
        Profile1d::gaussian(1.0 * s, 1.2 * s).with_polynomial(vec![1.0, 0.3 / s]).with_wavenumber(-0.4 / s),
    );
    Profile::new(factors)
}

fn run_identities(cfg: &RunConfig) -> Result<Outcome> {
    let profile = cfg
        .identities
        .profile
        .clone()
        .unwrap_or_else(|| default_profile(cfg.grid.dim, cfg.grid.half_width));
    let mut levels: Vec<Vec<IdentityResidualReport>> = Vec::new();
    for level in 0..cfg.identities.levels {
        let h = cfg.grid.spacing / f64::powi(2.0, level as i32);
        let mut gcfg = cfg.clone();
        gcfg.grid.spacing = h;
        let grid = gcfg.build_grid()?;
        let alpha = alpha_for(cfg, &grid)?;
        let problem = manufactured_problem(&profile, cfg.identities.lambda, &alpha, &grid)?;
        let mut rows = identity_residuals(&problem, &grid)?;
        if let Some(prev) = levels.last() {
            attach_orders(prev, &mut rows);
        }
        levels.push(rows);
    }
    let all: Vec<IdentityResidualReport> = levels.into_iter().flatten().collect();
    if cfg.wants(Format::Csv) {
        write_file(cfg, "identities.csv", &csv_bytes(|b| write_ledger(&all, b, true))?)?;
    }
    Ok(Outcome::ok(json!({ "profile": profile, "rows": all })))
}

fn run_cutoff(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let k = cfg.cutoff.decay;
    let u: Vec<c64> = grid.sample(|x| c64::new((-k * x.iter().map(|v| v * v).sum::<f64>().sqrt()).exp(), 0.0));
    let rows = cutoff_errors(&u, &grid, &cfg.cutoff.radii)?;
    if cfg.wants(Format::Csv) {
        let bytes = csv_bytes(|b| {
            let mut w = csv::Writer::from_writer(b);
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
            Ok(())
        })?;
        write_file(cfg, "cutoff.csv", &bytes)?;
    }
    Ok(Outcome::ok(json!({ "field": format!("exp(-{k} |x|)"), "rows": rows })))
}

fn run_hardy(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let n = grid.dim();
    let variant =
        cfg.hardy.variant.unwrap_or(if n >= 3 { HardyVariant::Unweighted } else { HardyVariant::Weighted });
    let bumps = random_bumps(&grid, cfg.hardy.count, cfg.seed);
    let ratios = bumps.iter().map(|psi| hardy_ratio(psi, &grid, variant)).collect::<Result<Vec<f64>>>()?;
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    if cfg.wants(Format::Csv) {
        let bytes = csv_bytes(|b| {
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["index", "ratio"])?;
            for (i, r) in ratios.iter().enumerate() {
                w.write_record([i.to_string(), format!("{r:.12e}")])?;
            }
            w.flush()?;
            Ok(())
        })?;
        write_file(cfg, "hardy.csv", &bytes)?;
    }
    Ok(Outcome::ok(json!({
        "variant": variant,
        "constant": variant.constant(n),
        "max_ratio": max,
        "ratios": ratios,
    })))
}

fn run_trace(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let bumps = random_bumps(&grid, cfg.trace.count, cfg.seed);
    let mut checks = Vec::with_capacity(bumps.len());
    let mut interp = Vec::new();
    for u in &bumps {
        checks.push(trace_half_norm_check(u, &grid, Closure::Dirichlet)?);
        for &eps in &cfg.trace.epsilons {
            interp.push((eps, trace_interpolation_check(u, &grid, eps)?));
        }
    }
    let worst = checks.iter().map(|c| c.trace_norm_sq - c.grad_norm_sq).fold(f64::NEG_INFINITY, f64::max);
    let worst_interp = interp.iter().map(|(_, t)| t.lhs - t.rhs).fold(f64::NEG_INFINITY, f64::max);
    if cfg.wants(Format::Csv) {
        let bytes = csv_bytes(|b| {
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["index", "trace_norm_sq", "grad_norm_sq", "extension_norm_sq"])?;
            for (i, c) in checks.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    format!("{:.12e}", c.trace_norm_sq),
                    format!("{:.12e}", c.grad_norm_sq),
                    format!("{:.12e}", c.extension_norm_sq),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
        write_file(cfg, "trace.csv", &bytes)?;
    }
    Ok(Outcome::ok(json!({
        "max_trace_minus_grad": worst,
        "max_interpolation_lhs_minus_rhs": worst_interp,
        "checks": checks,
        "interpolation": interp.iter().map(|(e, t)| json!({"epsilon": e, "lhs": t.lhs, "rhs": t.rhs})).collect::<Vec<_>>(),
    })))
}

fn run_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.build_grid()?;
    let alpha = alpha_for(cfg, &grid)?;
    let op = assemble(&grid, &alpha)?;
    let family = random_bumps(&grid, cfg.f_family.count, cfg.seed);
    let report = sweep(&op, &cfg.lambda_grid.points(), &family, &cfg.sweep)?;
    if cfg.wants(Format::Csv) {
        write_file(cfg, "sweep.csv", &csv_bytes(|b| report.write_csv(b))?)?;
    }
    if cfg.wants(Format::Svg) {
        write_file(cfg, "sweep.svg", &csv_bytes(|b| report.write_svg(b))?)?;
    }
    Ok(Outcome::ok(serde_json::to_value(&report)?))
}

/// Collects every other `*.json` report in the output directory. A `check`
/// report with verdict FAIL marks the aggregate as failed.
fn run_report(cfg: &RunConfig) -> Result<Outcome> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&cfg.output.dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.file_stem().is_some_and(|s| s != "report"))
        .collect();
    paths.sort();
    let mut entries = Vec::new();
    let mut failed = false;
    for p in &paths {
        let doc: Value = serde_json::from_str(&fs::read_to_string(p)?)?;
        let command = doc.get("command").and_then(Value::as_str).unwrap_or("").to_string();
        let verdict = doc.pointer("/result/verdict").and_then(Value::as_str).map(str::to_string);
        failed |= verdict.as_deref() == Some("FAIL");
        entries.push(json!({
            "file": p.file_name().map(|s| s.to_string_lossy().into_owned()),
            "command": command,
            "schema_version": doc.get("schema_version"),
            "verdict": verdict,
        }));
    }
    if cfg.wants(Format::Csv) {
        let bytes = csv_bytes(|b| {
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["file", "command", "verdict"])?;
            for e in &entries {
                let s = |k: &str| e.get(k).and_then(Value::as_str).unwrap_or("").to_string();
                w.write_record([s("file"), s("command"), s("verdict")])?;
            }
            w.flush()?;
            Ok(())
        })?;
        write_file(cfg, "report.csv", &bytes)?;
    }
    Ok(Outcome { result: json!({ "reports": entries, "any_failed": failed }), hypothesis_failed: failed })
}

/// Parses arguments, runs, and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = cli.resolve().and_then(|cfg| {
        if let Some(j) = cfg.jobs {
            // A second call in the same process keeps the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
        }
        run(cli.command, &cfg)
    });
    match result {
        Ok(o) if o.hypothesis_failed => {
            eprintln!("{}: hypotheses FAIL", cli.command.name());
            EXIT_HYPOTHESIS_FAIL
        }
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
