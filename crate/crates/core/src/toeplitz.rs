//! Toeplitz matrices for measure and coderivative symbols, and Berezin
//! transforms.
//!
//! Every assembly path goes through one moment table: the plain Toeplitz
//! matrix `G[β,α] = π^{−n} m_{α,β}/√(α!β!)` is computed once and the
//! coderivative matrices are read off it by shifting indices, since
//! `∂^a e_α = √(α!/(α−a)!) e_{α−a}`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::basis::{derivative_factor, normalized_kernel, BasisSet};
use crate::error::{FockError, Result};
use crate::index::{HalfIndex, MultiIndex};
use crate::measures::MeasureSpec;
use crate::quadrature::QuadConfig;

type C64 = Complex64;

/// Truncated kernels whose norm falls below this are outside the
/// accuracy domain of [`berezin_operator`].
pub const KERNEL_NORM_FLOOR: f64 = 0.99;

/// Dense operator on a truncated basis; entry `(β, α) = ⟨T e_α, e_β⟩`.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    basis: Arc<BasisSet>,
    entries: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(basis: Arc<BasisSet>, entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != basis.len() || entries.ncols() != basis.len() {
            return Err(FockError::DimensionMismatch {
                expected: basis.len(),
                got: entries.nrows().max(entries.ncols()),
            });
        }
        Ok(OperatorMatrix { basis, entries })
    }

    pub fn identity(basis: Arc<BasisSet>) -> Self {
        let n = basis.len();
        OperatorMatrix {
            basis,
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn basis(&self) -> &Arc<BasisSet> {
        &self.basis
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block on the indices with `|α| ≤ D/2`.
    pub fn interior_block(&self) -> DMatrix<C64> {
        let m = self.basis.interior().len();
        self.entries.view((0, 0), (m, m)).into_owned()
    }

    pub fn max_diff(&self, other: &OperatorMatrix) -> f64 {
        max_abs(&(&self.entries - &other.entries))
    }

    pub fn interior_max_diff(&self, other: &OperatorMatrix) -> f64 {
        max_abs(&(self.interior_block() - other.interior_block()))
    }

    /// `‖M − M*‖_max`.
    pub fn hermitian_defect(&self) -> f64 {
        max_abs(&(&self.entries - self.entries.adjoint()))
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            basis: self.basis.clone(),
            entries: self.entries.adjoint(),
        }
    }

    pub fn compose(&self, other: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            basis: self.basis.clone(),
            entries: &self.entries * &other.entries,
        }
    }

    /// `ST − TS` in the truncated space.
    pub fn commutator(&self, other: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            basis: self.basis.clone(),
            entries: &self.entries * &other.entries - &other.entries * &self.entries,
        }
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.entries + self.entries.adjoint()) * C64::from(0.5);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Largest singular value.
    pub fn norm2(&self) -> f64 {
        self.entries
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// Entries as `re,im` pairs, one matrix row per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in 0..self.len() {
            let row: Vec<String> = (0..self.len())
                .map(|c| {
                    let z = self.entries[(r, c)];
                    format!("{:e},{:e}", z.re, z.im)
                })
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Sidecar legend: row `i` of the matrix is the multi-index `α_i`.
    pub fn write_legend<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_legend(&self.basis, w)
    }
}

pub fn write_legend<W: Write>(basis: &BasisSet, mut w: W) -> std::io::Result<()> {
    let header: Vec<String> = (1..=basis.dim()).map(|j| format!("alpha_{j}")).collect();
    writeln!(w, "index,degree,{}", header.join(","))?;
    for (i, a) in basis.indices().iter().enumerate() {
        let parts: Vec<String> = a.entries().iter().map(|e| e.to_string()).collect();
        writeln!(w, "{i},{},{}", a.degree(), parts.join(","))?;
    }
    Ok(())
}

/// Largest entry modulus.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_dim(mu: &MeasureSpec, basis: &BasisSet) -> Result<()> {
    if mu.dim() != basis.dim() {
        return Err(FockError::DimensionMismatch {
            expected: basis.dim(),
            got: mu.dim(),
        });
    }
    Ok(())
}

/// `T_μ`: entry `(β, α) = π^{−n} m_{α,β}(μ)/√(α!β!)`.
pub fn assemble_toeplitz(mu: &MeasureSpec, basis: &Arc<BasisSet>, cfg: &QuadConfig) -> Result<OperatorMatrix> {
    check_dim(mu, basis)?;
    let m = mu.moment_matrix(basis.indices(), cfg)?;
    let scale = PI.powi(-(basis.dim() as i32));
    let entries = DMatrix::from_fn(basis.len(), basis.len(), |j, i| {
        m[(j, i)] * (scale / (basis.sqrt_factorial(i) * basis.sqrt_factorial(j)))
    });
    OperatorMatrix::new(basis.clone(), entries)
}

/// Reads `T_{∂^a ∂̄^b μ}` off the plain Toeplitz matrix of `μ`.
pub fn coderivative_from_toeplitz(t: &OperatorMatrix, a: &MultiIndex, b: &MultiIndex) -> OperatorMatrix {
    let basis = t.basis().clone();
    let idx = basis.indices();
    let shifted: Vec<Option<(usize, f64)>> = idx
        .iter()
        .map(|alpha| {
            alpha.checked_sub(a).map(|rest| {
                (
                    basis.position(&rest).expect("lower index in basis"),
                    derivative_factor(alpha, a),
                )
            })
        })
        .collect();
    let shifted_b: Vec<Option<(usize, f64)>> = idx
        .iter()
        .map(|beta| {
            beta.checked_sub(b).map(|rest| {
                (
                    basis.position(&rest).expect("lower index in basis"),
                    derivative_factor(beta, b),
                )
            })
        })
        .collect();
    let entries = DMatrix::from_fn(basis.len(), basis.len(), |r, c| match (shifted_b[r], shifted[c]) {
        (Some((rb, fb)), Some((ca, fa))) => t.entries()[(rb, ca)] * (fa * fb),
        _ => C64::new(0.0, 0.0),
    });
    OperatorMatrix { basis, entries }
}

/// `T_{∂^a ∂̄^b μ}` with `a + b = 2k`; entry `(β, α) = F_{μ,a,b}(e_α, e_β)`.
pub fn assemble_coderivative(
    mu: &MeasureSpec,
    a: &MultiIndex,
    b: &MultiIndex,
    k: &HalfIndex,
    basis: &Arc<BasisSet>,
    cfg: &QuadConfig,
) -> Result<OperatorMatrix> {
    if a.dim() != k.dim() || b.dim() != k.dim() || a.add(b) != k.two_k() {
        return Err(FockError::IndexMismatch {
            a: a.entries().to_vec(),
            b: b.entries().to_vec(),
            two_k: k.doubled().to_vec(),
        });
    }
    let t = assemble_toeplitz(mu, basis, cfg)?;
    Ok(coderivative_from_toeplitz(&t, a, b))
}

/// `Σ_{β ≤ 2k} C(2k, β) T_{∂^{2k−β} ∂̄^β μ}` from a precomputed `T_μ`.
pub fn real_coderivative_from_toeplitz(t: &OperatorMatrix, k: &HalfIndex) -> Result<OperatorMatrix> {
    let two_k = k.two_k();
    let mut acc = DMatrix::<C64>::zeros(t.len(), t.len());
    for beta in two_k.lower_set() {
        let c = two_k.binomial(&beta)? as f64;
        let a = two_k.checked_sub(&beta).expect("beta from the lower set");
        acc += coderivative_from_toeplitz(t, &a, &beta).entries * C64::from(c);
    }
    OperatorMatrix::new(t.basis().clone(), acc)
}

/// `T_{∂_R^{2k} μ}`.
pub fn assemble_real_coderivative(
    mu: &MeasureSpec,
    k: &HalfIndex,
    basis: &Arc<BasisSet>,
    cfg: &QuadConfig,
) -> Result<OperatorMatrix> {
    if k.dim() != basis.dim() {
        return Err(FockError::DimensionMismatch {
            expected: basis.dim(),
            got: k.dim(),
        });
    }
    let t = assemble_toeplitz(mu, basis, cfg)?;
    real_coderivative_from_toeplitz(&t, k)
}

/// `μ̃(z) = π^{−n} ∫ e^{−|z−w|²} dμ(w)`. Horizontal measures use the
/// factored form `π^{−n/2} ∫ e^{−(t−x)²} dϱ(t)`, the `y`-integral being
/// the closed Gaussian `√π` per axis.
pub fn berezin_measure(mu: &MeasureSpec, z: &[C64], cfg: &QuadConfig) -> Result<C64> {
    if let Some(rho) = mu.horizontal_factor() {
        let x: Vec<f64> = z.iter().map(|c| c.re).collect();
        let n = z.len() as f64;
        let v = rho.gaussian_integral(1.0, &x, cfg.moment_order, &|_| C64::new(1.0, 0.0))?;
        return Ok(v * PI.powf(-n / 2.0));
    }
    berezin_measure_unfactored(mu, z, cfg)
}

/// The generic `2n`-dimensional path for any measure.
pub fn berezin_measure_unfactored(mu: &MeasureSpec, z: &[C64], cfg: &QuadConfig) -> Result<C64> {
    let v = mu.gaussian_integral(1.0, z, cfg, &|_| C64::new(1.0, 0.0))?;
    Ok(v * PI.powi(-(z.len() as i32)))
}

/// Berezin transform of `∂_R^{2k} μ`: `∏ (2 Re z_j)^{2k_j} · μ̃(z)`.
pub fn berezin_coderivative(mu: &MeasureSpec, k: &HalfIndex, z: &[C64], cfg: &QuadConfig) -> Result<C64> {
    let factor: f64 = z
        .iter()
        .zip(k.doubled())
        .map(|(c, &d)| (2.0 * c.re).powi(d as i32))
        .product();
    Ok(berezin_measure(mu, z, cfg)? * factor)
}

/// Berezin transform of an assembled operator with its accuracy flag.
#[derive(Clone, Debug)]
pub struct BerezinValue {
    pub value: C64,
    /// Truncated norm of the normalized kernel `k_z`.
    pub kernel_norm: f64,
    pub warning: Option<String>,
}

/// `⟨S k_z, k_z⟩` with the truncated normalized kernel. Points where
/// `‖k_z‖ < 0.99` come back with a warning instead of an error.
pub fn berezin_operator(s: &OperatorMatrix, z: &[C64]) -> BerezinValue {
    let k = normalized_kernel(z, s.basis());
    let sk = s.entries() * &k.coeffs;
    let value = k.coeffs.dotc(&sk);
    let kernel_norm = k.norm();
    let warning = (kernel_norm < KERNEL_NORM_FLOOR).then(|| {
        format!(
            "truncated kernel norm {kernel_norm:.4} < {KERNEL_NORM_FLOOR} at |z| = {:.3}; raise D",
            z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
        )
    });
    BerezinValue {
        value,
        kernel_norm,
        warning,
    }
}

/// `max_x max_y |f(x + iy) − f(x + iy₀)|` over the given grids.
pub fn y_variation(f: &dyn Fn(&[C64]) -> Result<C64>, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in xs {
        let at = |y: &[f64]| -> Vec<C64> { x.iter().zip(y).map(|(&a, &b)| C64::new(a, b)).collect() };
        let base = f(&at(&ys[0]))?;
        for y in &ys[1..] {
            worst = worst.max((f(&at(y))? - base).norm());
        }
    }
    Ok(worst)
}
