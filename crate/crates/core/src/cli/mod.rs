//! Config-driven experiment runner behind the `fock-lab` binary.
//!
//! A run parses and resolves one TOML config, computes everything in
//! memory, then writes `resolved.toml`, the CSV artifacts and
//! `summary.toml` into the output directory.

pub mod config;
pub mod grammar;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::{derivative_at, derivative_bound, BasisSet, FockVector};
use crate::carleson::{self, condition_m, kfc_verdict, GROWTH_FACTOR};
use crate::error::FockError;
use crate::index::{HalfIndex, MultiIndex, SignedHalfIndex};
use crate::lagrangian::{self, LagrangianFrame};
use crate::measures::MeasureSpec;
use crate::quadrature::QuadConfig;
use crate::spectral::{self, SpectralSamples};
use crate::toeplitz::{self, max_abs, OperatorMatrix};
use crate::Complex64 as C64;

pub use config::{Command, ExperimentConfig, WindowConfig};

/// Process exit status of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    VerificationFailed = 1,
    InvalidInput = 2,
}

/// One verified property.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub property: String,
    pub tolerance: f64,
    pub residual: f64,
    pub pass: bool,
}

impl Check {
    fn new(property: &str, tolerance: f64, residual: f64) -> Self {
        Check {
            property: property.to_string(),
            tolerance,
            residual,
            pass: residual <= tolerance,
        }
    }
}

/// Contents of `summary.toml`. The top-level property is the first check;
/// `pass` is true only when every check passes.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub command: String,
    pub measure: String,
    pub property: String,
    pub tolerance: f64,
    pub residual: f64,
    pub pass: bool,
    pub seed: u64,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
    pub details: toml::Table,
}

/// Everything a run produces, before anything touches the disk.
pub struct RunOutput {
    pub summary: Summary,
    /// File name and contents.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl RunOutput {
    pub fn artifact(&self, name: &str) -> Option<&[u8]> {
        self.artifacts
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }
}

/// Attaches the originating module to a library error.
fn ctx<T>(r: crate::Result<T>, module: &str, what: &str) -> anyhow::Result<T> {
    r.map_err(|e| anyhow!(e).context(format!("{module}: {what}")))
}

fn parse_field(field: &str, src: &str, n: usize) -> anyhow::Result<MeasureSpec> {
    grammar::parse_measure(src, n).map_err(|e| field_error(field, src, e))
}

fn field_error(field: &str, src: &str, e: FockError) -> anyhow::Error {
    match e {
        FockError::Parse { position, message } => {
            anyhow!(
                "config field `{field}`, column {}: {message}\n  {src}\n  {:>w$}",
                position + 1,
                "^",
                w = position + 1
            )
        }
        other => anyhow!("config field `{field}`: {other}"),
    }
}

struct Setup {
    n: usize,
    mu: MeasureSpec,
    basis: Arc<BasisSet>,
    k: HalfIndex,
    alpha: Vec<i32>,
    order: HalfIndex,
    quad: QuadConfig,
    tol: f64,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        let n = cfg.dimension;
        let mu = parse_field("measure", &cfg.measure, n)?;
        let basis = Arc::new(ctx(
            BasisSet::new(n, cfg.degree),
            "basis",
            "building the truncated basis",
        )?);
        let k = HalfIndex::from_doubled(cfg.k().to_vec());
        let alpha = cfg.alpha().to_vec();
        let order = ctx(spectral::reduced_order(&k, &alpha), "spectral", "reducing k by alpha")?;
        Ok(Setup {
            n,
            mu,
            basis,
            k,
            alpha,
            order,
            quad: cfg.quadrature(),
            tol: cfg.tolerance(),
        })
    }

    fn alpha_is_zero(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0)
    }

    /// `μ_α`, or `μ` itself when `α = 0`.
    fn weighted(&self, mu: &MeasureSpec) -> anyhow::Result<MeasureSpec> {
        if self.alpha_is_zero() {
            return Ok(mu.clone());
        }
        let doubled = self.alpha.iter().map(|&a| 2 * a as i64).collect();
        ctx(
            mu.weight(&SignedHalfIndex::from_doubled(doubled)),
            "measures",
            "weighting by alpha",
        )
    }

    /// `T_{∂_R^{2(k−α)} μ_α}`.
    fn operator(&self, mu: &MeasureSpec) -> anyhow::Result<OperatorMatrix> {
        let w = self.weighted(mu)?;
        ctx(
            toeplitz::assemble_real_coderivative(&w, &self.order, &self.basis, &self.quad),
            "toeplitz",
            "assembling the operator matrix",
        )
    }
}

struct Builder {
    checks: Vec<Check>,
    warnings: Vec<String>,
    details: toml::Table,
    artifacts: Vec<(String, Vec<u8>)>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            checks: Vec::new(),
            warnings: Vec::new(),
            details: toml::Table::new(),
            artifacts: Vec::new(),
        }
    }

    fn detail<T: Serialize>(&mut self, key: &str, value: T) -> anyhow::Result<()> {
        let v = toml::Value::try_from(value).with_context(|| format!("serializing detail `{key}`"))?;
        self.details.insert(key.to_string(), v);
        Ok(())
    }

    fn matrix(&mut self, name: &str, t: &OperatorMatrix) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        t.write_csv(&mut buf)?;
        self.artifacts.push((format!("{name}.csv"), buf));
        if !self.artifacts.iter().any(|(n, _)| n == "legend.csv") {
            let mut legend = Vec::new();
            t.write_legend(&mut legend)?;
            self.artifacts.push(("legend.csv".into(), legend));
        }
        Ok(())
    }

    fn samples(&mut self, name: &str, s: &SpectralSamples) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        self.artifacts.push((format!("{name}.csv"), buf));
        Ok(())
    }

    fn finish(self, cfg: &ExperimentConfig, measure: String) -> RunOutput {
        let primary = self
            .checks
            .first()
            .cloned()
            .unwrap_or_else(|| Check::new("no property checked", 0.0, 0.0));
        let pass = self.checks.iter().all(|c| c.pass);
        RunOutput {
            summary: Summary {
                command: cfg.command.name().to_string(),
                measure,
                property: primary.property,
                tolerance: primary.tolerance,
                residual: primary.residual,
                pass,
                seed: cfg.seed(),
                warnings: self.warnings,
                checks: self.checks,
                details: self.details,
            },
            artifacts: self.artifacts,
        }
    }
}

/// Runs a resolved config without touching the disk.
pub fn execute(cfg: &ExperimentConfig) -> anyhow::Result<RunOutput> {
    let s = Setup::new(cfg)?;
    let mut b = Builder::new();
    b.detail("dimension", s.n as i64)?;
    b.detail("degree", cfg.degree as i64)?;
    b.detail("basis_size", s.basis.len() as i64)?;
    b.detail("interior_size", s.basis.interior().len() as i64)?;
    b.detail(
        "reduced_two_k",
        s.order.doubled().iter().map(|&d| d as i64).collect::<Vec<_>>(),
    )?;
    match cfg.command {
        Command::Assemble => assemble(&s, &mut b)?,
        Command::Berezin => berezin(cfg, &s, &mut b)?,
        Command::Carleson => carleson_scan(cfg, &s, &mut b)?,
        Command::Spectral => spectrum(cfg, &s, &mut b)?,
        Command::VerifyDiagonalization => diagonalization(&s, &mut b)?,
        Command::Commutativity => commutativity(cfg, &s, &mut b)?,
        Command::Lagrangian => lagrangian_run(cfg, &s, &mut b)?,
    }
    Ok(b.finish(cfg, s.mu.describe()))
}

fn assemble(s: &Setup, b: &mut Builder) -> anyhow::Result<()> {
    let t = s.operator(&s.mu)?;
    if matches!(s.mu, MeasureSpec::Lebesgue { .. }) && s.order.is_zero() && s.alpha_is_zero() {
        let id = OperatorMatrix::identity(s.basis.clone());
        b.checks.push(Check::new(
            "Lebesgue symbol reproduces the identity",
            s.tol,
            t.max_diff(&id),
        ));
    }
    let scale = max_abs(t.entries()).max(1.0);
    if s.weighted(&s.mu)?.is_real() {
        b.checks.push(Check::new(
            "real symbol gives a self-adjoint matrix (relative defect)",
            s.tol,
            t.hermitian_defect() / scale,
        ));
    }
    let finite = t.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite());
    b.checks.push(Check::new(
        "all matrix entries are finite",
        0.0,
        if finite { 0.0 } else { 1.0 },
    ));
    b.detail("max_entry", max_abs(t.entries()))?;
    b.matrix("matrix", &t)
}

fn axis_values(radius: f64, spacing: f64) -> Vec<f64> {
    let m = (radius / spacing + 1e-9).floor() as i64;
    (-m..=m).map(|i| i as f64 * spacing).collect()
}

fn grid(n: usize, values: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn berezin(cfg: &ExperimentConfig, s: &Setup, b: &mut Builder) -> anyhow::Result<()> {
    let t = s.operator(&s.mu)?;
    let w = s.weighted(&s.mu)?;
    let win = cfg.window();
    let values = axis_values(win.radius, win.spacing);
    let xs = grid(s.n, &values);
    let mut csv = String::new();
    let coords: Vec<String> = (1..=s.n).flat_map(|j| [format!("x_{j}"), format!("y_{j}")]).collect();
    csv.push_str(&format!(
        "{},symbol_re,symbol_im,operator_re,operator_im,kernel_norm\n",
        coords.join(",")
    ));
    let (mut worst, mut unreliable) = (0.0f64, 0usize);
    for x in &xs {
        for y in &xs {
            let z: Vec<C64> = x.iter().zip(y).map(|(&a, &c)| C64::new(a, c)).collect();
            let sym = ctx(
                toeplitz::berezin_coderivative(&w, &s.order, &z, &s.quad),
                "toeplitz",
                "Berezin transform of the symbol",
            )?;
            let op = toeplitz::berezin_operator(&t, &z);
            if op.warning.is_some() {
                unreliable += 1;
            } else {
                worst = worst.max((sym - op.value).norm());
            }
            let pt: Vec<String> = z.iter().flat_map(|c| [c.re.to_string(), c.im.to_string()]).collect();
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                pt.join(","),
                sym.re,
                sym.im,
                op.value.re,
                op.value.im,
                op.kernel_norm
            ));
        }
    }
    if unreliable > 0 {
        b.warnings.push(format!(
            "{unreliable} points skipped: truncated kernel norm below {}; raise the degree or shrink the window",
            toeplitz::KERNEL_NORM_FLOOR
        ));
    }
    b.checks.push(Check::new(
        "Berezin transform of the matrix matches the symbol's Berezin transform",
        s.tol,
        worst,
    ));
    let ys: Vec<Vec<f64>> = xs.clone();
    let var = ctx(
        toeplitz::y_variation(&|z| toeplitz::berezin_measure(&w, z, &s.quad), &xs, &ys),
        "toeplitz",
        "Berezin y-variation",
    )?;
    b.detail("berezin_y_variation", var)?;
    b.detail("horizontal_by_berezin", var <= 1e-10)?;
    b.detail("points", (xs.len() * xs.len()) as i64)?;
    b.artifacts.push(("berezin.csv".into(), csv.into_bytes()));
    b.matrix("matrix", &t)
}

fn ratio(boundary: f64, interior: f64) -> f64 {
    if interior > 0.0 {
        boundary / interior
    } else if boundary > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn carleson_scan(cfg: &ExperimentConfig, s: &Setup, b: &mut Builder) -> anyhow::Result<()> {
    let win = cfg.window();
    let window = ctx(win.scan_window(), "carleson", "scan window")?;
    let r = win.radii(s.n);
    let c = ctx(
        carleson::carleson_constant(&s.mu, &s.k, &r, window, &s.quad),
        "carleson",
        "polydisk Carleson constant",
    )?;
    b.checks.push(Check::new(
        "polydisk Carleson constant stays bounded on the window (boundary/interior ratio)",
        s.tol,
        ratio(c.boundary_max, c.interior_max),
    ));
    b.detail("carleson_constant", &c)?;
    let m = ctx(condition_m(&s.mu, window, &s.quad), "carleson", "Berezin growth scan")?;
    b.detail("berezin_growth", &m)?;
    if let Some(k) = s.k.as_integer() {
        let kfc = ctx(kfc_verdict(&s.mu, &k, &s.basis, &s.quad), "carleson", "derivative form")?;
        b.checks.push(Check::new(
            "derivative form top eigenvalue stays bounded across truncations",
            GROWTH_FACTOR,
            kfc.ratio,
        ));
        b.detail("derivative_form", &kfc)?;
        derivative_estimate(cfg, s, &k, window, b)?;
    }
    Ok(())
}

/// Samples `|∂^k f(z)| ≤ C k! ∏(1+x²)^{k/2}(1+y²)^{k/2} e^{|z|²/2}` for
/// random unit `f` of the truncated space. The constant is taken as
/// printed, which is too small once `n ≥ 2`; there the sample is
/// reported but not checked.
fn derivative_estimate(
    cfg: &ExperimentConfig,
    s: &Setup,
    k: &MultiIndex,
    window: carleson::ScanWindow,
    b: &mut Builder,
) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let points = window.points(s.n);
    let stride = (points.len() / 25).max(1);
    let zs: Vec<&Vec<C64>> = points.iter().step_by(stride).take(25).map(|(z, _)| z).collect();
    let (mut worst, mut violations) = (0.0f64, 0usize);
    for _ in 0..cfg.samples() {
        let f = FockVector::random_unit(&s.basis, &mut rng);
        for z in &zs {
            let q = derivative_at(&f, k, z, &s.basis).norm() / derivative_bound(k, z);
            worst = worst.max(q);
            violations += usize::from(q > 1.0);
        }
    }
    let mut t = toml::Table::new();
    t.insert("samples".into(), (cfg.samples() as i64).into());
    t.insert("points".into(), (zs.len() as i64).into());
    t.insert("max_ratio".into(), worst.into());
    t.insert("violations".into(), (violations as i64).into());
    b.details.insert("derivative_estimate".into(), t.into());
    if s.n == 1 {
        b.checks.push(Check::new(
            "pointwise derivative estimate on random unit vectors (max ratio to bound)",
            1.0,
            worst,
        ));
    } else {
        b.warnings.push(format!(
            "derivative estimate sampled but not checked for n = {}: the stated constant is too small in several variables",
            s.n
        ));
    }
    Ok(())
}

fn horizontal_factor_for(s: &Setup) -> anyhow::Result<crate::measures::RealMeasure> {
    spectral::alpha_horizontal_factor(&s.mu, &s.alpha).ok_or_else(|| {
        anyhow!(FockError::NotHorizontal(format!(
            "{} has no horizontal factor for alpha = {:?}",
            s.mu, s.alpha
        )))
        .context("spectral: spectral function needs a horizontal symbol")
    })
}

fn spectrum(cfg: &ExperimentConfig, s: &Setup, b: &mut Builder) -> anyhow::Result<()> {
    let rho = horizontal_factor_for(s)?;
    let t = s.operator(&s.mu)?;
    let win = cfg.window();
    let pts = grid(s.n, &axis_values(win.radius, win.spacing / 4.0));
    let gamma = ctx(
        spectral::gamma_2k(&rho, &s.order, pts, &s.quad),
        "spectral",
        "sampling the spectral function",
    )?;
    let rep = ctx(
        spectral::norm_and_spectrum(&t, &gamma),
        "spectral",
        "spectrum of the truncation",
    )?;
    let sup = rep.sup_gamma.max(f64::MIN_POSITIVE);
    let spread = match rep.gamma_hull {
        Some((lo, hi)) => {
            let eig = t.hermitian_eigenvalues();
            eig.iter().map(|&l| (lo - l).max(l - hi).max(0.0)).fold(0.0, f64::max)
        }
        None => rep.eigen_to_range,
    };
    b.checks.push(Check::new(
        "truncated spectrum lies in the range of the spectral function (relative distance)",
        s.tol,
        spread / sup,
    ));
    b.checks.push(Check::new(
        "truncated norm does not exceed the supremum of the spectral function (relative excess)",
        s.tol,
        ((rep.norm2 - rep.sup_gamma) / sup).max(0.0),
    ));
    b.detail("spectrum", &rep)?;
    b.detail("norm_over_sup", rep.norm2 / sup)?;
    b.samples("gamma", &gamma)?;
    b.matrix("matrix", &t)
}

fn diagonalization(s: &Setup, b: &mut Builder) -> anyhow::Result<()> {
    let rho = horizontal_factor_for(s)?;
    let t = s.operator(&s.mu)?;
    let gamma = ctx(
        spectral::gamma_on_hermite_grid(&rho, &s.order, &s.quad),
        "spectral",
        "spectral function on the Hermite grid",
    )?;
    let m = ctx(
        spectral::multiplication_matrix(&gamma, &s.basis),
        "spectral",
        "multiplication matrix",
    )?;
    b.checks.push(Check::new(
        "horizontal symbol diagonalizes to multiplication by its spectral function (interior block)",
        s.tol,
        t.interior_max_diff(&m),
    ));
    b.detail("spectral_factor", rho.describe())?;
    b.matrix("matrix", &t)?;
    b.matrix("multiplier", &m)?;
    b.samples("gamma", &gamma)
}

fn commutativity(cfg: &ExperimentConfig, s: &Setup, b: &mut Builder) -> anyhow::Result<()> {
    let src = cfg.second_measure.as_deref().unwrap_or_default();
    let nu = parse_field("second_measure", src, s.n)?;
    let t1 = s.operator(&s.mu)?;
    let t2 = s.operator(&nu)?;
    let com = t1.commutator(&t2);
    b.checks.push(Check::new(
        "Toeplitz operators with these symbols commute (interior block)",
        s.tol,
        max_abs(&com.interior_block()),
    ));
    b.detail("first_horizontal", spectral::horizontal_factor(&s.mu).is_some())?;
    b.detail("second_horizontal", spectral::horizontal_factor(&nu).is_some())?;
    b.detail("second_measure", nu.describe())?;
    b.matrix("commutator", &com)
}

fn lagrangian_run(cfg: &ExperimentConfig, s: &Setup, b: &mut Builder) -> anyhow::Result<()> {
    if !s.alpha_is_zero() {
        return Err(anyhow!(FockError::Unsupported(
            "alpha weights along a Lagrangian plane".into()
        )))
        .context("lagrangian: config field `alpha`");
    }
    let vectors = cfg.frame.clone().unwrap_or_default();
    let frame = ctx(
        LagrangianFrame::new(vectors.clone()),
        "lagrangian",
        "validating the frame",
    )?;
    let x = frame.rotation();
    let rot = ctx(
        lagrangian::validate_rotation(&vectors, x),
        "lagrangian",
        "checking the rotation",
    )?;
    let inv = ctx(
        lagrangian::l_invariance_test(&s.mu, &frame, &s.basis, &s.quad),
        "lagrangian",
        "invariance along the plane",
    )?;
    let rho = match &cfg.rho {
        Some(src) => Some(grammar::parse_real_measure(src, s.n).map_err(|e| field_error("rho", src, e))?),
        None => {
            let pushed = ctx(s.mu.pushforward(&x.adjoint()), "measures", "rotating the measure")?;
            spectral::horizontal_factor(&pushed)
        }
    };
    if let Some(rho) = &rho {
        let rep = ctx(
            lagrangian::l_diagonalization_residual(&s.mu, rho, &s.order, &frame, &s.basis, &s.quad),
            "lagrangian",
            "diagonalizing the plane-real coderivative",
        )?;
        b.checks.push(Check::new(
            "plane-invariant symbol diagonalizes after rotating the plane to the vertical (interior block)",
            s.tol,
            rep.residual,
        ));
        b.detail("spectral_factor", rho.describe())?;
    } else {
        b.warnings
            .push("no horizontal factor declared or detected; diagonalization skipped".into());
    }
    b.checks.push(Check::new(
        "rotation is unitary and maps the plane onto the imaginary axes",
        lagrangian::SYMPLECTIC_TOL,
        rot.unitary_deviation.max(rot.max_real_part),
    ));
    b.checks.push(Check::new(
        "rotated measure has a Berezin transform independent of the imaginary part",
        lagrangian::INVARIANCE_TOL,
        inv.berezin_y_variation,
    ));
    b.checks.push(Check::new(
        "operator commutes with Weyl translations along the plane (interior block)",
        lagrangian::COMMUTATOR_TOL,
        inv.weyl_commutator,
    ));
    let xr: Vec<Vec<[f64; 2]>> = (0..x.nrows())
        .map(|r| (0..x.ncols()).map(|c| [x[(r, c)].re, x[(r, c)].im]).collect())
        .collect();
    b.detail("rotation", xr)?;
    b.detail("rotation_check", &rot)?;
    b.detail("invariance", &inv)?;
    let t = ctx(
        lagrangian::assemble_l_real_coderivative(&s.mu, &s.order, &frame, &s.basis, &s.quad),
        "lagrangian",
        "assembling the plane-real coderivative",
    )?;
    b.matrix("matrix", &t)
}

/// Writes the resolved config, artifacts and summary into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &RunOutput) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |name: &str, bytes: &[u8]| -> anyhow::Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
    };
    write("resolved.toml", cfg.to_toml()?.as_bytes())?;
    for (name, bytes) in &out.artifacts {
        write(name, bytes)?;
    }
    let summary = toml::to_string(&out.summary).context("serializing the summary")?;
    write("summary.toml", summary.as_bytes())
}

/// Full pipeline for the binary: load, resolve, execute, write.
pub fn run(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> (Status, String) {
    let resolved = match ExperimentConfig::load(config).and_then(|c| c.resolve(out, seed)) {
        Ok(c) => c,
        Err(e) => return (Status::InvalidInput, format!("invalid input: {e}")),
    };
    let result = execute(&resolved).and_then(|o| {
        write_outputs(&resolved.output(), &resolved, &o)?;
        Ok(o)
    });
    match result {
        Ok(o) => {
            let s = &o.summary;
            let mut msg = format!(
                "{}: {} residual {:.3e} (tolerance {:.1e}) {}",
                s.command,
                s.property,
                s.residual,
                s.tolerance,
                if s.pass { "PASS" } else { "FAIL" }
            );
            for c in s.checks.iter().skip(1) {
                msg.push_str(&format!(
                    "\n  {}: residual {:.3e} (tolerance {:.1e}) {}",
                    c.property,
                    c.residual,
                    c.tolerance,
                    if c.pass { "PASS" } else { "FAIL" }
                ));
            }
            for w in &s.warnings {
                msg.push_str(&format!("\n  warning: {w}"));
            }
            let status = if s.pass {
                Status::Success
            } else {
                Status::VerificationFailed
            };
            (status, msg)
        }
        Err(e) => (Status::InvalidInput, format!("error: {e:#}")),
    }
}
