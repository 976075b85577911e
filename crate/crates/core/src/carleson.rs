//! Window-relative certification of Condition (M), Fock–Carleson and
//! derivative Fock–Carleson properties.
//!
//! Suprema are taken over an axis-aligned lattice in `Cⁿ ≅ R²ⁿ`. A finite
//! lattice cannot certify a supremum over the whole space, so every
//! verdict says either "bounded on this window" or "the boundary shell
//! already exceeds the interior", which is how growth shows up.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::BasisSet;
use crate::error::{FockError, Result};
use crate::index::{HalfIndex, MultiIndex};
use crate::measures::MeasureSpec;
use crate::quadrature::QuadConfig;
use crate::toeplitz::{assemble_coderivative, berezin_measure};

type C64 = Complex64;

/// Boundary-shell maximum over interior maximum that counts as growth.
pub const GROWTH_FACTOR: f64 = 1.5;

/// Lattice `δZ²ⁿ ∩ [−R, R]²ⁿ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanWindow {
    pub radius: f64,
    pub spacing: f64,
}

impl ScanWindow {
    pub fn new(radius: f64, spacing: f64) -> Result<Self> {
        if !(radius > 0.0 && spacing > 0.0 && spacing <= radius) {
            return Err(FockError::Domain(format!(
                "scan window needs 0 < spacing <= radius, got R = {radius}, δ = {spacing}"
            )));
        }
        Ok(ScanWindow { radius, spacing })
    }

    /// Lattice steps per side.
    fn steps(&self) -> i64 {
        (self.radius / self.spacing + 1e-9).floor() as i64
    }

    /// All lattice points of `Cⁿ`, with a flag for the boundary shell
    /// (some real coordinate within `δ/2` of the window edge).
    pub fn points(&self, n: usize) -> Vec<(Vec<C64>, bool)> {
        let m = self.steps();
        let side = (2 * m + 1) as usize;
        let total = side.pow(2 * n as u32);
        let edge = self.radius - self.spacing / 2.0;
        (0..total)
            .map(|mut code| {
                let mut coords = vec![0.0; 2 * n];
                for c in coords.iter_mut() {
                    *c = ((code % side) as i64 - m) as f64 * self.spacing;
                    code /= side;
                }
                let shell = coords.iter().any(|c| c.abs() >= edge);
                let z = coords.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
                (z, shell)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    BoundedOnWindow,
    GrowthDetected,
}

impl Verdict {
    pub fn is_bounded(self) -> bool {
        self == Verdict::BoundedOnWindow
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlesonReport {
    pub sup_estimate: f64,
    /// Lattice point of the largest sample, as `(re, im)` pairs.
    pub argmax: Vec<(f64, f64)>,
    pub window: ScanWindow,
    /// Polydisk radii, empty for pointwise quantities.
    pub r: Vec<f64>,
    pub interior_max: f64,
    pub boundary_max: f64,
    pub verdict: Verdict,
    pub samples: usize,
}

/// Maximum of `f` over the lattice, computed in parallel.
pub fn scan(
    n: usize,
    window: ScanWindow,
    r: &[f64],
    f: &(dyn Fn(&[C64]) -> Result<f64> + Sync),
) -> Result<CarlesonReport> {
    let points = window.points(n);
    let values: Vec<f64> = points.par_iter().map(|(z, _)| f(z)).collect::<Result<_>>()?;
    let mut best = 0usize;
    let (mut interior_max, mut boundary_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, ((_, shell), &v)) in points.iter().zip(&values).enumerate() {
        if v > values[best] {
            best = i;
        }
        if *shell {
            boundary_max = boundary_max.max(v);
        } else {
            interior_max = interior_max.max(v);
        }
    }
    let verdict = if boundary_max > GROWTH_FACTOR * interior_max {
        Verdict::GrowthDetected
    } else {
        Verdict::BoundedOnWindow
    };
    Ok(CarlesonReport {
        sup_estimate: values[best],
        argmax: points[best].0.iter().map(|c| (c.re, c.im)).collect(),
        window,
        r: r.to_vec(),
        interior_max,
        boundary_max,
        verdict,
        samples: values.len(),
    })
}

/// Condition (M) taken verbatim, next to the normalized Berezin supremum.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionMReport {
    /// `sup_z ∫ |K_z(w)|² e^{−|w|²} d|μ|(w) = sup_z e^{|z|²} πⁿ |μ|~(z)`.
    pub verbatim: CarlesonReport,
    /// `sup_z |μ|~(z)`.
    pub normalized: CarlesonReport,
}

pub fn condition_m(mu: &MeasureSpec, window: ScanWindow, cfg: &QuadConfig) -> Result<ConditionMReport> {
    let n = mu.dim();
    let abs = mu.variation();
    let berezin = |z: &[C64]| -> Result<f64> { Ok(berezin_measure(&abs, z, cfg)?.re) };
    let pin = PI.powi(n as i32);
    let verbatim = scan(n, window, &[], &|z| {
        let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        Ok(r2.exp() * pin * berezin(z)?)
    })?;
    let normalized = scan(n, window, &[], &berezin)?;
    Ok(ConditionMReport { verbatim, normalized })
}

/// `C_k(μ, r) = Γ(k+1)² sup_z |μ|_k(P_r(z))` over the lattice.
pub fn carleson_constant(
    mu: &MeasureSpec,
    k: &HalfIndex,
    r: &[f64],
    window: ScanWindow,
    cfg: &QuadConfig,
) -> Result<CarlesonReport> {
    let n = mu.dim();
    if k.dim() != n {
        return Err(FockError::DimensionMismatch {
            expected: n,
            got: k.dim(),
        });
    }
    let rmin = r.iter().copied().fold(f64::INFINITY, f64::min);
    if window.spacing > rmin / 2.0 {
        return Err(FockError::Domain(format!(
            "lattice spacing {} exceeds half the smallest polydisk radius {rmin}",
            window.spacing
        )));
    }
    let weighted = mu.variation().weight(&k.to_signed())?;
    let kf2 = k.gamma_factorial().powi(2);
    let mut report = scan(n, window, r, &|z| Ok(weighted.ball_mass(z, r, cfg)?.re))?;
    report.sup_estimate *= kf2;
    report.interior_max *= kf2;
    report.boundary_max *= kf2;
    Ok(report)
}

/// Top eigenvalue of the form `f ↦ ∫ |∂^k f|² e^{−|w|²} d|μ|` at two
/// truncations; growth between them means the form is unbounded.
#[derive(Clone, Debug, Serialize)]
pub struct KfcReport {
    pub k: Vec<u32>,
    pub degree: u32,
    pub omega: f64,
    pub half_degree: u32,
    pub omega_half: f64,
    pub ratio: f64,
    pub verdict: Verdict,
}

pub fn kfc_verdict(mu: &MeasureSpec, k: &MultiIndex, basis: &Arc<BasisSet>, cfg: &QuadConfig) -> Result<KfcReport> {
    let kk = HalfIndex::from_integer(k);
    let form = assemble_coderivative(&mu.variation(), k, k, &kk, basis, cfg)?;
    let top = |m: usize| -> f64 {
        let block = form.entries().view((0, 0), (m, m)).into_owned();
        let h = (&block + block.adjoint()) * C64::from(0.5);
        SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let half_degree = basis.degree().div_ceil(2);
    let omega = top(basis.len());
    let omega_half = top(BasisSet::size_for(basis.dim(), half_degree) as usize);
    let ratio = if omega_half.abs() > f64::MIN_POSITIVE {
        omega / omega_half
    } else if omega.abs() > f64::MIN_POSITIVE {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(KfcReport {
        k: k.entries().to_vec(),
        degree: basis.degree(),
        omega,
        half_degree,
        omega_half,
        ratio,
        verdict: if ratio > GROWTH_FACTOR {
            Verdict::GrowthDetected
        } else {
            Verdict::BoundedOnWindow
        },
    })
}

/// The weight-shift identity in both index placements.
///
/// Orientation A is `C_{k−p}(μ_p) = C_k(μ)`, orientation B is
/// `C_p(μ_{k−p}) = C_k(μ)`. In both the weighted measure is `μ_k`, so the
/// polydisk suprema coincide and the constants differ by the Gamma
/// prefactors alone; the `reduced_*` residuals compare the suprema.
#[derive(Clone, Debug, Serialize)]
pub struct WeightShiftReport {
    pub k: String,
    pub p: String,
    pub c_k: f64,
    pub c_orientation_a: f64,
    pub c_orientation_b: f64,
    pub residual_a: f64,
    pub residual_b: f64,
    pub reduced_residual_a: f64,
    pub reduced_residual_b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Orientation {
    A,
    B,
}

impl WeightShiftReport {
    /// Orientations whose stated constant identity holds to `tol`.
    pub fn holding(&self, tol: f64) -> Vec<Orientation> {
        let mut out = Vec::new();
        if self.residual_a <= tol {
            out.push(Orientation::A);
        }
        if self.residual_b <= tol {
            out.push(Orientation::B);
        }
        out
    }
}

pub fn weight_shift(
    mu: &MeasureSpec,
    k: &HalfIndex,
    p: &HalfIndex,
    r: &[f64],
    window: ScanWindow,
    cfg: &QuadConfig,
) -> Result<WeightShiftReport> {
    let km_p = k
        .to_signed()
        .sub(&p.to_signed())
        .to_unsigned()
        .ok_or_else(|| FockError::Domain(format!("weight shift needs p <= k, got p = {p}, k = {k}")))?;
    let c_k = carleson_constant(mu, k, r, window, cfg)?.sup_estimate;
    let mu_p = mu.weight(&p.to_signed())?;
    let c_a = carleson_constant(&mu_p, &km_p, r, window, cfg)?.sup_estimate;
    let mu_kp = mu.weight(&km_p.to_signed())?;
    let c_b = carleson_constant(&mu_kp, p, r, window, cfg)?.sup_estimate;
    let g = |h: &HalfIndex| h.gamma_factorial().powi(2);
    let reduced_k = c_k / g(k);
    Ok(WeightShiftReport {
        k: k.to_string(),
        p: p.to_string(),
        c_k,
        c_orientation_a: c_a,
        c_orientation_b: c_b,
        residual_a: (c_a - c_k).abs(),
        residual_b: (c_b - c_k).abs(),
        reduced_residual_a: (c_a / g(&km_p) - reduced_k).abs(),
        reduced_residual_b: (c_b / g(p) - reduced_k).abs(),
    })
}
