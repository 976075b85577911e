//! Spectral functions of horizontal symbols and the multiplication side of
//! the diagonalization.
//!
//! The Bargmann transform carries the orthonormal Hermite function `h_α`
//! to `e_α` with no phase, so a multiplier `γ` on `L₂(Rⁿ)` becomes the
//! matrix `⟨γ h_α, h_β⟩` in the same enumerated basis as the Toeplitz
//! matrices. That matrix is computed with Gauss–Hermite quadrature on the
//! grid where `γ` is sampled.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::basis::BasisSet;
use crate::error::{FockError, Result};
use crate::index::{hermite_product, HalfIndex, MultiIndex, SignedHalfIndex};
use crate::measures::{MeasureSpec, RealMeasure};
use crate::quadrature::{hermite_rule, QuadConfig};
use crate::toeplitz::{assemble_real_coderivative, berezin_measure_unfactored, y_variation, OperatorMatrix};

type C64 = Complex64;

/// Values of a spectral function on a real grid.
#[derive(Clone, Debug)]
pub struct SpectralSamples {
    pub grid: Vec<Vec<f64>>,
    pub values: Vec<C64>,
    pub label: String,
    /// Doubled order `2k` of the real coderivative, zero for `γ_ϱ`.
    pub two_k: Vec<u32>,
    /// Set when `grid` is the tensor Gauss–Hermite grid of this order.
    pub hermite_order: Option<usize>,
}

impl SpectralSamples {
    pub fn dim(&self) -> usize {
        self.two_k.len()
    }

    /// Largest `|γ|` over the samples.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Columns `x_1..x_n,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let head: Vec<String> = (1..=self.dim()).map(|j| format!("x_{j}")).collect();
        writeln!(w, "{},re,im", head.join(","))?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            let xs: Vec<String> = x.iter().map(|t| format!("{t:e}")).collect();
            writeln!(w, "{},{:e},{:e}", xs.join(","), v.re, v.im)?;
        }
        Ok(())
    }
}

/// Tensor Gauss–Hermite nodes and weights in `n` dimensions, axis 0 slowest.
pub fn hermite_grid(n: usize, order: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let rule = hermite_rule(order)?;
    let total = order.pow(n as u32);
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for code in 0..total {
        let mut p = vec![0.0; n];
        let mut w = 1.0;
        let mut rest = code;
        for j in (0..n).rev() {
            let i = rest % order;
            rest /= order;
            p[j] = rule.nodes()[i];
            w *= rule.weights()[i];
        }
        points.push(p);
        weights.push(w);
    }
    Ok((points, weights))
}

/// `γ_{ϱ,2k}(x) = (2/π)^{n/2} ∫ H_{2k}(√2x − y) e^{−(x−√2y)²} dϱ(y)`;
/// `2k = 0` gives `γ_ϱ`.
pub fn gamma_value(rho: &RealMeasure, k: &HalfIndex, x: &[f64], cfg: &QuadConfig) -> Result<C64> {
    let n = rho.dim();
    let center: Vec<f64> = x.iter().map(|t| t / 2f64.sqrt()).collect();
    let two_k = k.two_k();
    let plain = two_k.is_zero();
    let v = rho.gaussian_integral(2.0, &center, cfg.moment_order, &|y| {
        if plain {
            return C64::new(1.0, 0.0);
        }
        let t: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| 2f64.sqrt() * xi - yi).collect();
        C64::new(hermite_product(&two_k, &t), 0.0)
    })?;
    Ok(v * (2.0 / PI).powf(n as f64 / 2.0))
}

fn check_grid_dim(n: usize, grid: &[Vec<f64>]) -> Result<()> {
    if let Some(p) = grid.iter().find(|p| p.len() != n) {
        return Err(FockError::DimensionMismatch {
            expected: n,
            got: p.len(),
        });
    }
    Ok(())
}

fn sample(
    rho: &RealMeasure,
    k: &HalfIndex,
    grid: Vec<Vec<f64>>,
    hermite_order: Option<usize>,
    cfg: &QuadConfig,
) -> Result<SpectralSamples> {
    if k.dim() != rho.dim() {
        return Err(FockError::DimensionMismatch {
            expected: rho.dim(),
            got: k.dim(),
        });
    }
    check_grid_dim(rho.dim(), &grid)?;
    let values = grid
        .iter()
        .map(|x| gamma_value(rho, k, x, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralSamples {
        grid,
        values,
        label: rho.describe(),
        two_k: k.two_k().entries().to_vec(),
        hermite_order,
    })
}

/// `γ_ϱ` on an arbitrary grid.
pub fn gamma_plain(rho: &RealMeasure, grid: Vec<Vec<f64>>, cfg: &QuadConfig) -> Result<SpectralSamples> {
    sample(rho, &HalfIndex::zeros(rho.dim()), grid, None, cfg)
}

/// `γ_{ϱ,2k}` on an arbitrary grid.
pub fn gamma_2k(rho: &RealMeasure, k: &HalfIndex, grid: Vec<Vec<f64>>, cfg: &QuadConfig) -> Result<SpectralSamples> {
    sample(rho, k, grid, None, cfg)
}

/// `γ_{ϱ,2k}` on the Gauss–Hermite grid of `cfg.spectral_order`, ready for
/// [`multiplication_matrix`].
pub fn gamma_on_hermite_grid(rho: &RealMeasure, k: &HalfIndex, cfg: &QuadConfig) -> Result<SpectralSamples> {
    let order = cfg.spectral_order;
    let (grid, _) = hermite_grid(rho.dim(), order)?;
    sample(rho, k, grid, Some(order), cfg)
}

/// Samples a callable multiplier on the Gauss–Hermite grid of `order`.
/// `degree` is its polynomial degree per axis, used by the order check.
pub fn sample_callable(
    n: usize,
    f: &dyn Fn(&[f64]) -> C64,
    degree: u32,
    order: usize,
    label: &str,
) -> Result<SpectralSamples> {
    let (grid, _) = hermite_grid(n, order)?;
    let values = grid.iter().map(|x| f(x)).collect();
    Ok(SpectralSamples {
        grid,
        values,
        label: label.to_string(),
        two_k: vec![degree; n],
        hermite_order: Some(order),
    })
}

/// Orthonormal Hermite polynomials `p_0..=p_d` at `x`, so that
/// `h_m(x) = p_m(x) e^{−x²/2}`.
fn orthonormal_hermite(d: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; d + 1];
    p[0] = PI.powf(-0.25);
    if d >= 1 {
        p[1] = 2f64.sqrt() * x * p[0];
    }
    for m in 1..d {
        let m1 = (m + 1) as f64;
        p[m + 1] = (2.0 / m1).sqrt() * x * p[m] - (m as f64 / m1).sqrt() * p[m - 1];
    }
    p
}

/// Matrix of `M_γ` in the Hermite-function image of the Fock basis:
/// entry `(β, α) = ∫ γ h_α h_β dx`.
pub fn multiplication_matrix(gamma: &SpectralSamples, basis: &Arc<BasisSet>) -> Result<OperatorMatrix> {
    let n = basis.dim();
    if gamma.dim() != n {
        return Err(FockError::DimensionMismatch {
            expected: n,
            got: gamma.dim(),
        });
    }
    let order = gamma
        .hermite_order
        .ok_or_else(|| FockError::Domain("multiplication matrix needs samples on a Gauss–Hermite grid".into()))?;
    let d = basis.degree() as usize;
    let poly = gamma.two_k.iter().copied().max().unwrap_or(0) as usize;
    let needed = d + poly / 2 + 1;
    if order < needed {
        return Err(FockError::Domain(format!(
            "Hermite order {order} too low for degree {d} and multiplier degree {poly}; need {needed}"
        )));
    }
    let (grid, weights) = hermite_grid(n, order)?;
    if grid.len() != gamma.grid.len() {
        return Err(FockError::DimensionMismatch {
            expected: grid.len(),
            got: gamma.grid.len(),
        });
    }
    let rule = hermite_rule(order)?;
    let table: Vec<Vec<f64>> = rule.nodes().iter().map(|&x| orthonormal_hermite(d, x)).collect();
    let idx = basis.indices();
    // row i of P: ∏_j p_{α_j}(x_{i,j}) over the basis, node index decoded axis 0 slowest
    let mut p = DMatrix::<f64>::zeros(grid.len(), idx.len());
    for i in 0..grid.len() {
        let mut digits = vec![0usize; n];
        let mut rest = i;
        for j in (0..n).rev() {
            digits[j] = rest % order;
            rest /= order;
        }
        for (c, a) in idx.iter().enumerate() {
            p[(i, c)] = a
                .entries()
                .iter()
                .zip(&digits)
                .map(|(&aj, &g)| table[g][aj as usize])
                .product();
        }
    }
    let pc = p.map(C64::from);
    let mut scaled = pc.clone();
    for i in 0..grid.len() {
        let s = gamma.values[i] * weights[i];
        for c in 0..idx.len() {
            scaled[(i, c)] *= s;
        }
    }
    OperatorMatrix::new(basis.clone(), pc.transpose() * scaled)
}

/// The horizontal factor of `μ`, treating `ν_{2n}` as `ν_n ⊗ ν_n`.
pub fn horizontal_factor(mu: &MeasureSpec) -> Option<RealMeasure> {
    match mu {
        MeasureSpec::Lebesgue { dim } => Some(RealMeasure::lebesgue(*dim)),
        other => other.horizontal_factor().cloned(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagonalizationReport {
    pub measure: String,
    pub two_k: Vec<u32>,
    pub degree: u32,
    pub interior_size: usize,
    /// `‖T − M_γ‖_max` on the interior block.
    pub residual: f64,
}

/// `ϱ_α` for `μ = ϱ ⊗ ν_{n,α}`, so that `μ_α = ϱ_α ⊗ ν_n`. With `α = 0`
/// this is the plain horizontal factor.
pub fn alpha_horizontal_factor(mu: &MeasureSpec, alpha: &[i32]) -> Option<RealMeasure> {
    if alpha.iter().all(|&a| a == 0) {
        return horizontal_factor(mu);
    }
    match mu {
        MeasureSpec::AlphaHorizontal { rho, alpha: a } if a.as_slice() == alpha => rho.polynomial_weight(alpha).ok(),
        _ => None,
    }
}

/// `k − α` as a half-index, or an error when some `k_j < α_j`.
pub fn reduced_order(k: &HalfIndex, alpha: &[i32]) -> Result<HalfIndex> {
    if alpha.len() != k.dim() {
        return Err(FockError::DimensionMismatch {
            expected: k.dim(),
            got: alpha.len(),
        });
    }
    let doubled: Vec<i64> = alpha.iter().map(|&a| 2 * a as i64).collect();
    k.to_signed()
        .sub(&SignedHalfIndex::from_doubled(doubled))
        .to_unsigned()
        .ok_or_else(|| FockError::Domain(format!("order k = {k} must dominate α = {alpha:?}")))
}

/// Compares `T_{∂_R^{2k} μ}` with `M_{γ_{ϱ,2k}}` for horizontal `μ = ϱ ⊗ ν_n`.
pub fn diagonalization_residual(
    mu: &MeasureSpec,
    k: &HalfIndex,
    basis: &Arc<BasisSet>,
    cfg: &QuadConfig,
) -> Result<DiagonalizationReport> {
    weighted_diagonalization_residual(mu, k, &vec![0; mu.dim()], basis, cfg)
}

/// Compares `T_{∂_R^{2(k−α)} μ_α}` with `M_{γ_{ϱ_α,2(k−α)}}` for
/// `μ = ϱ ⊗ ν_{n,α}`.
pub fn weighted_diagonalization_residual(
    mu: &MeasureSpec,
    k: &HalfIndex,
    alpha: &[i32],
    basis: &Arc<BasisSet>,
    cfg: &QuadConfig,
) -> Result<DiagonalizationReport> {
    let order = reduced_order(k, alpha)?;
    let rho = match alpha_horizontal_factor(mu, alpha) {
        Some(rho) => rho,
        None => {
            let xs = vec![vec![0.0; mu.dim()], vec![0.5; mu.dim()]];
            let ys = vec![vec![0.0; mu.dim()], vec![0.7; mu.dim()]];
            let v = y_variation(&|z| berezin_measure_unfactored(mu, z, cfg), &xs, &ys)
                .map(|v| format!("{v:.3e}"))
                .unwrap_or_else(|e| format!("unavailable ({e})"));
            return Err(FockError::NotHorizontal(format!(
                "{mu} has no horizontal factor for α = {alpha:?}; Berezin y-variation {v}"
            )));
        }
    };
    let weighted = if alpha.iter().all(|&a| a == 0) {
        mu.clone()
    } else {
        let doubled = alpha.iter().map(|&a| 2 * a as i64).collect();
        mu.weight(&SignedHalfIndex::from_doubled(doubled))?
    };
    let t = assemble_real_coderivative(&weighted, &order, basis, cfg)?;
    let gamma = gamma_on_hermite_grid(&rho, &order, cfg)?;
    let m = multiplication_matrix(&gamma, basis)?;
    Ok(DiagonalizationReport {
        measure: mu.describe(),
        two_k: order.two_k().entries().to_vec(),
        degree: basis.degree(),
        interior_size: basis.interior().len(),
        residual: t.interior_max_diff(&m),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub norm2: f64,
    pub spectral_radius: f64,
    pub sup_gamma: f64,
    /// Hull `[min, max]` of the sampled values when `γ` is real.
    pub gamma_hull: Option<(f64, f64)>,
    /// Largest distance from an eigenvalue to the sampled range.
    pub eigen_to_range: f64,
    /// Largest distance from a sampled value to the eigenvalues.
    pub range_to_eigen: f64,
    pub hausdorff: f64,
}

pub fn norm_and_spectrum(t: &OperatorMatrix, gamma: &SpectralSamples) -> Result<SpectrumReport> {
    let eig: Vec<C64> = if t.hermitian_defect() <= 1e-12 * t.norm2().max(1.0) {
        t.hermitian_eigenvalues().into_iter().map(C64::from).collect()
    } else {
        t.entries()
            .clone()
            .schur()
            .eigenvalues()
            .ok_or_else(|| FockError::Domain("Schur eigenvalues failed to converge".into()))?
            .iter()
            .copied()
            .collect()
    };
    let real = gamma.values.iter().all(|v| v.im == 0.0);
    let gamma_hull = real.then(|| {
        gamma
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v.re), hi.max(v.re))
            })
    });
    let dist_to_range = |l: C64| -> f64 {
        match gamma_hull {
            Some((lo, hi)) => C64::new(l.re.clamp(lo, hi) - l.re, l.im).norm(),
            None => gamma
                .values
                .iter()
                .map(|v| (v - l).norm())
                .fold(f64::INFINITY, f64::min),
        }
    };
    let eigen_to_range = eig.iter().map(|&l| dist_to_range(l)).fold(0.0, f64::max);
    let range_to_eigen = gamma
        .values
        .iter()
        .map(|v| eig.iter().map(|l| (v - l).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(SpectrumReport {
        norm2: t.norm2(),
        spectral_radius: eig.iter().map(|l| l.norm()).fold(0.0, f64::max),
        sup_gamma: gamma.sup_abs(),
        gamma_hull,
        eigen_to_range,
        range_to_eigen,
        hausdorff: eigen_to_range.max(range_to_eigen),
    })
}

/// Berezin transform of `B* M_{γ_{ϱ,2k}} B` in closed form:
/// `∏ (2u_j)^{2k_j} · π^{−n/2} ∫ e^{−(y−u)²} dϱ(y)` at `z = u + iv`.
pub fn berezin_of_multiplier(rho: &RealMeasure, k: &HalfIndex, z: &[C64], cfg: &QuadConfig) -> Result<C64> {
    let n = rho.dim();
    let u: Vec<f64> = z.iter().map(|c| c.re).collect();
    let v = rho.gaussian_integral(1.0, &u, cfg.moment_order, &|_| C64::new(1.0, 0.0))?;
    let poly: f64 = u
        .iter()
        .zip(k.doubled())
        .map(|(uj, &d)| (2.0 * uj).powi(d as i32))
        .product();
    Ok(v * poly * PI.powf(-(n as f64) / 2.0))
}

/// `∫ H_m(t) e^{−(t−u)²} dt` by Gauss–Hermite quadrature in the shifted
/// variable.
pub fn hermite_gaussian_moment(m: u32, u: f64, order: usize) -> Result<f64> {
    let rule = hermite_rule(order)?;
    Ok(rule.integrate(|s| crate::index::hermite(m, s + u)))
}

/// Polynomial multiplier `∏ x_j^{e_j}`, for checks against recurrences.
pub fn monomial_multiplier(e: &MultiIndex) -> impl Fn(&[f64]) -> C64 + '_ {
    move |x: &[f64]| {
        C64::from(
            x.iter()
                .zip(e.entries())
                .map(|(t, &p)| t.powi(p as i32))
                .product::<f64>(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toeplitz::{assemble_toeplitz, berezin_operator};
    use proptest::prelude::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn basis(n: usize, d: u32) -> Arc<BasisSet> {
        Arc::new(BasisSet::new(n, d).unwrap())
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn k1(d: u32) -> HalfIndex {
        HalfIndex::from_doubled(vec![d])
    }

    #[test]
    fn orthonormal_hermite_matches_physicists() {
        let x = 0.7;
        let p = orthonormal_hermite(8, x);
        for m in 0..=8u32 {
            let norm = (2f64.powi(m as i32) * crate::index::factorial_f64(m) * PI.sqrt()).sqrt();
            let expect = crate::index::hermite(m, x) / norm;
            assert!((p[m as usize] - expect).abs() < 1e-13 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn gamma_examples() {
        let xs: Vec<Vec<f64>> = [-1.5, -0.3, 0.0, 0.8, 2.0].iter().map(|&x| vec![x]).collect();
        let d = gamma_plain(&RealMeasure::dirac(vec![0.0]), xs.clone(), &cfg()).unwrap();
        let l = gamma_plain(&RealMeasure::lebesgue(1), xs.clone(), &cfg()).unwrap();
        let g = gamma_plain(&RealMeasure::gaussian(1, 1.0).unwrap(), xs.clone(), &cfg()).unwrap();
        for (i, x) in xs.iter().map(|p| p[0]).enumerate() {
            assert!((d.values[i].re - (2.0 / PI).sqrt() * (-x * x).exp()).abs() < 1e-15);
            assert!((l.values[i].re - 1.0).abs() < 1e-13);
            assert!((g.values[i].re - (2.0f64 / 3.0).sqrt() * (-x * x / 3.0).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn gamma_2k_examples() {
        let xs: Vec<Vec<f64>> = [-1.0, 0.0, 0.4, 1.3].iter().map(|&x| vec![x]).collect();
        let rho = RealMeasure::dirac(vec![0.0]);
        let plain = gamma_plain(&rho, xs.clone(), &cfg()).unwrap();
        let zero = gamma_2k(&rho, &k1(0), xs.clone(), &cfg()).unwrap();
        let two = gamma_2k(&rho, &k1(2), xs.clone(), &cfg()).unwrap();
        for (i, x) in xs.iter().map(|p| p[0]).enumerate() {
            assert_eq!(plain.values[i], zero.values[i]);
            let expect = (2.0 / PI).sqrt() * (8.0 * x * x - 2.0) * (-x * x).exp();
            assert!((two.values[i].re - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_linear_in_atoms() {
        let xs: Vec<Vec<f64>> = [-0.5, 0.2, 1.1].iter().map(|&x| vec![x]).collect();
        let a = RealMeasure::dirac(vec![0.3]);
        let b = RealMeasure::dirac(vec![-0.8]);
        let mix = RealMeasure::atoms(vec![vec![0.3], vec![-0.8]], vec![c(2.0, 0.0), c(-0.5, 0.0)]).unwrap();
        let (ga, gb, gm) = (
            gamma_2k(&a, &k1(2), xs.clone(), &cfg()).unwrap(),
            gamma_2k(&b, &k1(2), xs.clone(), &cfg()).unwrap(),
            gamma_2k(&mix, &k1(2), xs.clone(), &cfg()).unwrap(),
        );
        for i in 0..xs.len() {
            let lin = ga.values[i] * 2.0 - gb.values[i] * 0.5;
            assert!((gm.values[i] - lin).norm() < 1e-14);
        }
    }

    #[test]
    fn multiplication_by_one_is_identity() {
        let b = basis(1, 12);
        let g = sample_callable(1, &|_| c(1.0, 0.0), 0, 40, "one").unwrap();
        let m = multiplication_matrix(&g, &b).unwrap();
        assert!(m.max_diff(&OperatorMatrix::identity(b)) < 1e-13);
    }

    #[test]
    fn multiplication_by_x_and_x_squared() {
        let b = basis(1, 10);
        let e1 = MultiIndex::new(vec![1]);
        let e2 = MultiIndex::new(vec![2]);
        let mx =
            multiplication_matrix(&sample_callable(1, &monomial_multiplier(&e1), 1, 30, "x").unwrap(), &b).unwrap();
        let mx2 =
            multiplication_matrix(&sample_callable(1, &monomial_multiplier(&e2), 2, 30, "x2").unwrap(), &b).unwrap();
        let e = mx.entries();
        let e2m = mx2.entries();
        for a in 0..=10usize {
            for bb in 0..=10usize {
                let x_expect = if bb == a + 1 {
                    ((a + 1) as f64 / 2.0).sqrt()
                } else if a == bb + 1 {
                    (a as f64 / 2.0).sqrt()
                } else {
                    0.0
                };
                assert!((e[(bb, a)].re - x_expect).abs() < 1e-13, "x ({bb},{a})");
                let af = a as f64;
                let x2_expect = if bb == a {
                    af + 0.5
                } else if bb == a + 2 {
                    ((af + 1.0) * (af + 2.0)).sqrt() / 2.0
                } else if a == bb + 2 {
                    (af * (af - 1.0)).sqrt() / 2.0
                } else {
                    0.0
                };
                assert!((e2m[(bb, a)].re - x2_expect).abs() < 1e-12, "x² ({bb},{a})");
            }
        }
    }

    #[test]
    fn low_order_rejected() {
        let b = basis(1, 20);
        let g = sample_callable(1, &|_| c(1.0, 0.0), 2, 20, "one").unwrap();
        assert!(matches!(multiplication_matrix(&g, &b), Err(FockError::Domain(_))));
        let off = gamma_plain(&RealMeasure::lebesgue(1), vec![vec![0.0]], &cfg()).unwrap();
        assert!(multiplication_matrix(&off, &b).is_err());
    }

    #[test]
    fn lebesgue_residual_is_tiny() {
        for (n, d) in [(1, 12), (2, 6)] {
            let r = diagonalization_residual(&MeasureSpec::lebesgue(n), &HalfIndex::zeros(n), &basis(n, d), &cfg())
                .unwrap();
            assert!(r.residual <= 1e-10, "n={n}: {}", r.residual);
        }
    }

    #[test]
    fn dirac_residual() {
        let mu = MeasureSpec::horizontal(RealMeasure::dirac(vec![0.0]));
        let r = diagonalization_residual(&mu, &HalfIndex::zeros(1), &basis(1, 10), &cfg()).unwrap();
        assert!(r.residual <= 1e-6, "{}", r.residual);
    }

    #[test]
    fn gaussian_coderivative_residual() {
        let mu = MeasureSpec::horizontal(RealMeasure::gaussian(1, 1.0).unwrap());
        let r = diagonalization_residual(&mu, &k1(2), &basis(1, 10), &cfg()).unwrap();
        assert!(r.residual <= 1e-5, "{}", r.residual);
    }

    #[test]
    fn two_dimensional_residual() {
        let rho = RealMeasure::atoms(vec![vec![0.2, -0.4]], vec![c(1.0, 0.0)]).unwrap();
        let mu = MeasureSpec::horizontal(rho);
        let k = HalfIndex::from_doubled(vec![2, 0]);
        let c2 = QuadConfig {
            spectral_order: 40,
            ..cfg()
        };
        let r = diagonalization_residual(&mu, &k, &basis(2, 6), &c2).unwrap();
        assert!(r.residual <= 1e-6, "{}", r.residual);
    }

    #[test]
    fn alpha_horizontal_reduces_to_weighted_factor() {
        let rho = RealMeasure::dirac(vec![0.3]);
        let mu = MeasureSpec::alpha_horizontal(rho, vec![1]).unwrap();
        match alpha_horizontal_factor(&mu, &[1]).unwrap() {
            RealMeasure::Atoms { weights, .. } => assert!((weights[0].re - 1.09).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert!(alpha_horizontal_factor(&mu, &[2]).is_none());
        let r = weighted_diagonalization_residual(&mu, &k1(2), &[1], &basis(1, 10), &cfg()).unwrap();
        assert_eq!(r.two_k, vec![0]);
        assert!(r.residual <= 1e-6, "{}", r.residual);
        let err = weighted_diagonalization_residual(&mu, &k1(0), &[1], &basis(1, 6), &cfg()).unwrap_err();
        assert!(matches!(err, FockError::Domain(_)));
    }

    #[test]
    fn non_horizontal_rejected() {
        let mu = MeasureSpec::dirac(vec![c(0.3, 0.4)]);
        let err = diagonalization_residual(&mu, &HalfIndex::zeros(1), &basis(1, 6), &cfg()).unwrap_err();
        assert!(matches!(err, FockError::NotHorizontal(_)));
    }

    #[test]
    fn identity_spectrum() {
        let b = basis(1, 8);
        let g = sample_callable(1, &|_| c(1.0, 0.0), 0, 20, "one").unwrap();
        let r = norm_and_spectrum(&OperatorMatrix::identity(b), &g).unwrap();
        for v in [r.norm2, r.spectral_radius, r.sup_gamma] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(r.hausdorff < 1e-12);
    }

    #[test]
    fn dirac_spectrum_inside_gamma_range() {
        let b = basis(1, 16);
        let rho = RealMeasure::dirac(vec![0.0]);
        let t = assemble_toeplitz(&MeasureSpec::horizontal(rho.clone()), &b, &cfg()).unwrap();
        let grid: Vec<Vec<f64>> = (-60..=60).map(|i| vec![i as f64 * 0.05]).collect();
        let g = gamma_plain(&rho, grid, &cfg()).unwrap();
        let r = norm_and_spectrum(&t, &g).unwrap();
        assert!((r.sup_gamma - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!(r.norm2 <= r.sup_gamma + 1e-12);
        assert!(r.eigen_to_range <= 0.05 * r.sup_gamma);
        assert!((r.norm2 - r.spectral_radius).abs() < 1e-12);
    }

    #[test]
    fn berezin_of_multiplier_matches_operator() {
        let b = basis(1, 30);
        let rho = RealMeasure::gaussian(1, 0.8).unwrap();
        for k in [k1(0), k1(2)] {
            let c2 = QuadConfig {
                spectral_order: 60,
                ..cfg()
            };
            let g = gamma_on_hermite_grid(&rho, &k, &c2).unwrap();
            let m = multiplication_matrix(&g, &b).unwrap();
            for z in [c(0.0, 0.0), c(0.6, -0.3), c(-0.5, 0.8)] {
                let direct = berezin_of_multiplier(&rho, &k, &[z], &cfg()).unwrap();
                let op = berezin_operator(&m, &[z]);
                assert!(op.warning.is_none());
                assert!((op.value - direct).norm() < 1e-6, "z = {z}: {} vs {direct}", op.value);
            }
        }
    }

    #[test]
    fn hermite_gaussian_identity() {
        for k in 1..=3u32 {
            for u in [0.5, 1.0, 2.0] {
                let v = hermite_gaussian_moment(2 * k, u, 40).unwrap();
                let expect = PI.sqrt() * (2.0 * u).powi(2 * k as i32);
                assert!((v - expect).abs() < 1e-12 * expect);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let g = gamma_plain(&RealMeasure::lebesgue(2), vec![vec![0.0, 1.0], vec![1.0, 2.0]], &cfg()).unwrap();
        let mut out = Vec::new();
        g.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x_1,x_2,re,im");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split(',').count(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn positive_measure_gamma_nonnegative(p in -2.0f64..2.0, w in 0.1f64..3.0, x in -3.0f64..3.0) {
            let rho = RealMeasure::atoms(vec![vec![p]], vec![c(w, 0.0)]).unwrap();
            let g = gamma_plain(&rho, vec![vec![x]], &cfg()).unwrap();
            prop_assert!(g.values[0].re >= 0.0);
            prop_assert!(g.values[0].im == 0.0);
        }

        #[test]
        fn atom_residual_small(p in -1.0f64..1.0) {
            let mu = MeasureSpec::horizontal(RealMeasure::dirac(vec![p]));
            let r = diagonalization_residual(&mu, &HalfIndex::zeros(1), &basis(1, 8), &cfg()).unwrap();
            prop_assert!(r.residual <= 1e-6);
        }
    }
}
