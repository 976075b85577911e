//! Lagrangian planes, the unitary rotating a plane onto `iRⁿ`, and the
//! L-real coderivative.
//!
//! Vectors of `R²ⁿ` are written `(x, y)` and identified with `x + iy ∈ Cⁿ`;
//! `ω₀(z, w) = Jz·w` with `J = [[0, I], [−I, 0]]`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::basis::{weyl_matrix, BasisSet};
use crate::error::{FockError, Result};
use crate::index::{HalfIndex, MultiIndex};
use crate::measures::{mat_vec, unitary_deviation, MeasureSpec, RealMeasure};
use crate::quadrature::QuadConfig;
use crate::spectral::{gamma_on_hermite_grid, multiplication_matrix, DiagonalizationReport};
use crate::toeplitz::{
    assemble_real_coderivative, assemble_toeplitz, berezin_measure_unfactored, max_abs, y_variation, OperatorMatrix,
};

type C64 = Complex64;

/// Tolerance for `ω₀` and for `Re(Xv)` on unit vectors.
pub const SYMPLECTIC_TOL: f64 = 1e-12;
/// Berezin `y`-variation below which a pushed measure counts as horizontal.
pub const INVARIANCE_TOL: f64 = 1e-8;
/// Interior Weyl commutator bound for L-invariance.
pub const COMMUTATOR_TOL: f64 = 1e-4;

/// `ω₀(a, b) = Ja·b = Σ_j a_{y,j} b_{x,j} − a_{x,j} b_{y,j}`.
pub fn omega0(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() / 2;
    (0..n).map(|j| a[n + j] * b[j] - a[j] * b[n + j]).sum()
}

fn to_complex(v: &[f64]) -> Vec<C64> {
    let n = v.len() / 2;
    (0..n).map(|j| C64::new(v[j], v[n + j])).collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let s = v.iter().map(|t| t * t).sum::<f64>().sqrt();
    v.iter().map(|t| t / s).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LagrangianCheck {
    pub is_lagrangian: bool,
    /// Largest `|ω₀(b_i, b_j)|` over unit-normalized vectors.
    pub max_violation: f64,
    pub rank: usize,
}

fn check_shape(vectors: &[Vec<f64>]) -> Result<usize> {
    let n = vectors.len();
    if n == 0 {
        return Err(FockError::NotLagrangian("empty frame".into()));
    }
    for v in vectors {
        if v.len() != 2 * n {
            return Err(FockError::DimensionMismatch {
                expected: 2 * n,
                got: v.len(),
            });
        }
        if v.iter().all(|&t| t == 0.0) || v.iter().any(|t| !t.is_finite()) {
            return Err(FockError::NotLagrangian("frame vector is zero or non-finite".into()));
        }
    }
    Ok(n)
}

/// `n` vectors of `R²ⁿ` span a Lagrangian plane when `ω₀` vanishes on
/// every pair and they have rank `n`.
pub fn is_lagrangian(vectors: &[Vec<f64>]) -> Result<LagrangianCheck> {
    let n = check_shape(vectors)?;
    let units: Vec<Vec<f64>> = vectors.iter().map(|v| unit(v)).collect();
    let mut max_violation: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            max_violation = max_violation.max(omega0(&units[i], &units[j]).abs());
        }
    }
    let m = DMatrix::from_fn(2 * n, n, |r, c| units[c][r]);
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * top).count();
    Ok(LagrangianCheck {
        is_lagrangian: max_violation <= SYMPLECTIC_TOL && rank == n,
        max_violation,
        rank,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationCheck {
    pub unitary_deviation: f64,
    /// Largest `|Re(X v)|` over unit frame vectors.
    pub max_real_part: f64,
    pub valid: bool,
}

/// Checks that `X` is unitary and carries the plane into `iRⁿ`.
pub fn validate_rotation(vectors: &[Vec<f64>], x: &DMatrix<C64>) -> Result<RotationCheck> {
    let n = check_shape(vectors)?;
    if x.nrows() != n || x.ncols() != n {
        return Err(FockError::DimensionMismatch {
            expected: n,
            got: x.nrows().max(x.ncols()),
        });
    }
    let dev = unitary_deviation(x);
    let max_real_part = vectors
        .iter()
        .map(|v| {
            mat_vec(x, &to_complex(&unit(v)))
                .iter()
                .map(|c| c.re.abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(RotationCheck {
        unitary_deviation: dev,
        max_real_part,
        valid: dev <= SYMPLECTIC_TOL && max_real_part <= SYMPLECTIC_TOL,
    })
}

/// A validated Lagrangian frame with its rotation `X`, `XL = iRⁿ`.
#[derive(Clone, Debug)]
pub struct LagrangianFrame {
    basis: Vec<Vec<f64>>,
    x: DMatrix<C64>,
}

impl LagrangianFrame {
    /// Validates the frame and computes `X = i U*`, where `U` is the polar
    /// factor of the complex matrix whose columns are the identified frame
    /// vectors. A Lagrangian frame is `U R` with `R` real, so `U Rⁿ = L`.
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let check = is_lagrangian(&vectors)?;
        if check.rank < vectors.len() {
            return Err(FockError::NotLagrangian(format!(
                "frame has rank {} < {}",
                check.rank,
                vectors.len()
            )));
        }
        if !check.is_lagrangian {
            return Err(FockError::NotLagrangian(format!(
                "ω₀ violation {:.3e} exceeds {SYMPLECTIC_TOL:e}",
                check.max_violation
            )));
        }
        let x = rotation_to_vertical(&vectors)?;
        let rc = validate_rotation(&vectors, &x)?;
        if !rc.valid {
            return Err(FockError::NotLagrangian(format!(
                "rotation failed validation: unitary deviation {:.3e}, real part {:.3e}",
                rc.unitary_deviation, rc.max_real_part
            )));
        }
        Ok(LagrangianFrame { basis: vectors, x })
    }

    /// `iRⁿ`, where `X = I`.
    pub fn vertical(n: usize) -> Self {
        let basis = (0..n)
            .map(|j| {
                let mut v = vec![0.0; 2 * n];
                v[n + j] = 1.0;
                v
            })
            .collect();
        LagrangianFrame {
            basis,
            x: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn rotation(&self) -> &DMatrix<C64> {
        &self.x
    }

    /// Frame vectors as points of `Cⁿ`.
    pub fn complex_basis(&self) -> Vec<Vec<C64>> {
        self.basis.iter().map(|v| to_complex(v)).collect()
    }
}

/// `X = i U*` with `U` the unitary polar factor of the identified frame.
pub fn rotation_to_vertical(vectors: &[Vec<f64>]) -> Result<DMatrix<C64>> {
    let n = check_shape(vectors)?;
    let a = DMatrix::from_fn(n, n, |r, c| C64::new(vectors[c][r], vectors[c][n + r]));
    let svd = a.svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let low = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if low.is_nan() || low <= 1e-10 * top {
        return Err(FockError::NotLagrangian(format!(
            "numerically degenerate frame (singular values {low:.3e} / {top:.3e})"
        )));
    }
    let (w, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let u = w * vt;
    Ok(u.adjoint() * C64::new(0.0, 1.0))
}

/// Largest `|Re((Y X*)(i e_j))|`: zero when `Y X*` preserves `iRⁿ`.
pub fn rotation_consistency(x: &DMatrix<C64>, y: &DMatrix<C64>) -> f64 {
    let m = y * x.adjoint();
    (0..m.ncols())
        .map(|j| {
            m.column(j)
                .iter()
                .map(|c| (c * C64::new(0.0, 1.0)).re.abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct LInvarianceReport {
    /// Berezin `y`-variation of `μ_{X*}` over the sample grid.
    pub berezin_y_variation: f64,
    /// Largest interior `‖[T_μ, W_h]‖_max` over sampled `h ∈ L`.
    pub weyl_commutator: f64,
    pub invariant: bool,
}

fn sample_grid(n: usize, values: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
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

/// Checks L-invariance two ways: the rotated measure `μ_{X*}` has a
/// `y`-independent Berezin transform, and `T_μ` commutes with `W_h` for
/// `h` along the plane.
pub fn l_invariance_test(
    mu: &MeasureSpec,
    frame: &LagrangianFrame,
    basis: &Arc<BasisSet>,
    cfg: &QuadConfig,
) -> Result<LInvarianceReport> {
    let n = frame.dim();
    if mu.dim() != n || basis.dim() != n {
        return Err(FockError::DimensionMismatch {
            expected: n,
            got: if mu.dim() != n { mu.dim() } else { basis.dim() },
        });
    }
    let rotated = mu.pushforward(&frame.rotation().adjoint())?;
    let xs = sample_grid(n, &[-0.5, 0.0, 0.5]);
    let ys = sample_grid(n, &[0.0, 0.6, -0.9]);
    let var = y_variation(&|z| berezin_measure_unfactored(&rotated, z, cfg), &xs, &ys)?;
    let t = assemble_toeplitz(mu, basis, cfg)?;
    let mut com: f64 = 0.0;
    for v in frame.complex_basis() {
        let s = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for step in [0.25, -0.4] {
            let h: Vec<C64> = v.iter().map(|c| c * (step / s)).collect();
            let w = OperatorMatrix::new(basis.clone(), weyl_matrix(&h, basis)?)?;
            com = com.max(max_abs(&t.commutator(&w).interior_block()));
        }
    }
    Ok(LInvarianceReport {
        berezin_y_variation: var,
        weyl_commutator: com,
        invariant: var <= INVARIANCE_TOL && com <= COMMUTATOR_TOL,
    })
}

/// `T_{∂_{R,L}^{2k} μ} = T_{∂_R^{2k} μ_{X*}}`.
pub fn assemble_l_real_coderivative(
    mu: &MeasureSpec,
    k: &HalfIndex,
    frame: &LagrangianFrame,
    basis: &Arc<BasisSet>,
    cfg: &QuadConfig,
) -> Result<OperatorMatrix> {
    let rotated = mu.pushforward(&frame.rotation().adjoint())?;
    assemble_real_coderivative(&rotated, k, basis, cfg)
}

/// Interior residual between the L-real coderivative of `μ` and `M_γ` for
/// the declared horizontal factor `ϱ` of `μ_{X*} = ϱ ⊗ ν_n`.
pub fn l_diagonalization_residual(
    mu: &MeasureSpec,
    rho: &RealMeasure,
    k: &HalfIndex,
    frame: &LagrangianFrame,
    basis: &Arc<BasisSet>,
    cfg: &QuadConfig,
) -> Result<DiagonalizationReport> {
    let t = assemble_l_real_coderivative(mu, k, frame, basis, cfg)?;
    let gamma = gamma_on_hermite_grid(rho, k, cfg)?;
    let m = multiplication_matrix(&gamma, basis)?;
    Ok(DiagonalizationReport {
        measure: mu.describe(),
        two_k: k.two_k().entries().to_vec(),
        degree: basis.degree(),
        interior_size: basis.interior().len(),
        residual: t.interior_max_diff(&m),
    })
}

/// Matrix of `V_X f(z) = f(X* z)`: expands `e_α(X* z)` into monomials of
/// the same degree, so the truncation is exact and block unitary.
pub fn vx_matrix(x: &DMatrix<C64>, basis: &BasisSet) -> Result<DMatrix<C64>> {
    let n = basis.dim();
    if x.nrows() != n || x.ncols() != n {
        return Err(FockError::DimensionMismatch {
            expected: n,
            got: x.nrows().max(x.ncols()),
        });
    }
    let xa = x.adjoint();
    let len = basis.len();
    let units: Vec<MultiIndex> = (0..n).map(|l| MultiIndex::unit(n, l)).collect();
    let mut out = DMatrix::<C64>::zeros(len, len);
    for (col, alpha) in basis.indices().iter().enumerate() {
        // coefficients of ∏_j (Σ_l X*_{jl} z_l)^{α_j}, indexed by basis position
        let mut poly = vec![C64::new(0.0, 0.0); len];
        poly[0] = C64::new(1.0, 0.0);
        let mut deg = 0usize;
        for (j, &aj) in alpha.entries().iter().enumerate() {
            for _ in 0..aj {
                let mut next = vec![C64::new(0.0, 0.0); len];
                for (pos, &coef) in poly.iter().enumerate() {
                    if coef == C64::new(0.0, 0.0) || basis.index(pos).degree() as usize != deg {
                        continue;
                    }
                    for l in 0..n {
                        let up = basis
                            .position(&basis.index(pos).add(&units[l]))
                            .expect("degree stays within the basis");
                        next[up] += coef * xa[(j, l)];
                    }
                }
                poly = next;
                deg += 1;
            }
        }
        let sa = basis.sqrt_factorial(col);
        for (row, &coef) in poly.iter().enumerate() {
            out[(row, col)] = coef * (basis.sqrt_factorial(row) / sa);
        }
    }
    Ok(out)
}

/// `V_X* T V_X`, the operator that `T_{μ_X}` must equal.
pub fn conjugate_by_vx(t: &OperatorMatrix, x: &DMatrix<C64>) -> Result<OperatorMatrix> {
    let v = vx_matrix(x, t.basis())?;
    OperatorMatrix::new(t.basis().clone(), v.adjoint() * t.entries() * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Amplitude, AxisFn, Density};
    use crate::spectral::diagonalization_residual;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn basis(n: usize, d: u32) -> Arc<BasisSet> {
        Arc::new(BasisSet::new(n, d).unwrap())
    }

    fn lx(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|j| {
                let mut v = vec![0.0; 2 * n];
                v[j] = 1.0;
                v
            })
            .collect()
    }

    fn diagonal(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|j| {
                let mut v = vec![0.0; 2 * n];
                v[j] = 1.0;
                v[n + j] = 1.0;
                v
            })
            .collect()
    }

    fn scalar(n: usize, s: C64) -> DMatrix<C64> {
        DMatrix::identity(n, n) * s
    }

    /// `e^{−(Im w)²}` per axis: invariant under real translations.
    fn vertical_gaussian(n: usize) -> MeasureSpec {
        let f: AxisFn<C64> = Arc::new(|w: C64| c((-w.im * w.im).exp(), 0.0));
        MeasureSpec::Density(Density {
            dim: n,
            gaussian: None,
            amplitude: Amplitude::Product(vec![f; n]),
            real_valued: true,
            label: "e^{-y²}".into(),
        })
    }

    #[test]
    fn lagrangian_examples() {
        for n in [1, 2, 3] {
            assert!(is_lagrangian(&lx(n)).unwrap().is_lagrangian);
            assert!(is_lagrangian(&diagonal(n)).unwrap().is_lagrangian);
        }
        // {e₁, Je₁} in R⁴
        let bad = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, -1.0, 0.0]];
        let r = is_lagrangian(&bad).unwrap();
        assert!(!r.is_lagrangian);
        assert!((r.max_violation - 1.0).abs() < 1e-15);
        assert!(is_lagrangian(&[vec![1.0, 0.0, 0.0]]).is_err());
        let rank_deficient = vec![vec![1.0, 0.0, 0.0, 0.0], vec![2.0, 0.0, 0.0, 0.0]];
        assert_eq!(is_lagrangian(&rank_deficient).unwrap().rank, 1);
        assert!(LagrangianFrame::new(rank_deficient).is_err());
    }

    #[test]
    fn stated_rotations() {
        let n = 2;
        let minus_i = scalar(n, c(0.0, -1.0));
        assert!(validate_rotation(&lx(n), &minus_i).unwrap().valid);
        let vertical: Vec<Vec<f64>> = LagrangianFrame::vertical(n).basis().to_vec();
        assert!(validate_rotation(&vertical, &DMatrix::identity(n, n)).unwrap().valid);
        // the half-scaled matrix is not unitary
        let half = scalar(n, c(0.5, -0.5));
        assert!(validate_rotation(&diagonal(n), &half).unwrap().unitary_deviation > 0.4);
        // (1 − i)/√2 is unitary but sends (1 + i)x to the real axis
        let stated = scalar(n, c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2));
        let r = validate_rotation(&diagonal(n), &stated).unwrap();
        assert!(r.unitary_deviation < 1e-15);
        assert!((r.max_real_part - 1.0).abs() < 1e-12);
        // its adjoint carries Δ onto iRⁿ
        assert!(validate_rotation(&diagonal(n), &stated.adjoint()).unwrap().valid);
    }

    #[test]
    fn computed_rotations() {
        let f = LagrangianFrame::new(lx(2)).unwrap();
        assert!((f.rotation() - scalar(2, c(0.0, 1.0))).iter().all(|d| d.norm() < 1e-15));
        let f = LagrangianFrame::new(LagrangianFrame::vertical(2).basis().to_vec()).unwrap();
        assert!((f.rotation() - DMatrix::identity(2, 2))
            .iter()
            .all(|d| d.norm() < 1e-15));
        let f = LagrangianFrame::new(diagonal(2)).unwrap();
        let expect = scalar(2, c(FRAC_1_SQRT_2, FRAC_1_SQRT_2));
        assert!((f.rotation() - expect).iter().all(|d| d.norm() < 1e-15));
        assert!(LagrangianFrame::new(vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]).is_err());
    }

    #[test]
    fn rotations_agree_up_to_vertical_automorphism() {
        let f = LagrangianFrame::new(lx(2)).unwrap();
        let other = scalar(2, c(0.0, -1.0));
        assert!(rotation_consistency(f.rotation(), &other) < 1e-15);
        assert!(rotation_consistency(f.rotation(), &scalar(2, c(FRAC_1_SQRT_2, FRAC_1_SQRT_2))) > 0.5);
    }

    #[test]
    fn vertical_frame_keeps_horizontal_measure() {
        let b = basis(1, 10);
        let mu = MeasureSpec::horizontal(RealMeasure::gaussian(1, 1.0).unwrap());
        let f = LagrangianFrame::vertical(1);
        let r = l_invariance_test(&mu, &f, &b, &cfg()).unwrap();
        assert!(r.invariant, "{r:?}");
        let k = HalfIndex::from_doubled(vec![2]);
        let a = assemble_l_real_coderivative(&mu, &k, &f, &b, &cfg()).unwrap();
        let plain = assemble_real_coderivative(&mu, &k, &b, &cfg()).unwrap();
        assert_eq!(a.max_diff(&plain), 0.0);
    }

    #[test]
    fn atom_is_not_invariant_along_lx() {
        let f = LagrangianFrame::new(lx(1)).unwrap();
        let r = l_invariance_test(&MeasureSpec::dirac(vec![c(0.0, 0.0)]), &f, &basis(1, 10), &cfg()).unwrap();
        assert!(!r.invariant);
        assert!(r.berezin_y_variation > 1e-2);
        assert!(r.weyl_commutator > 1e-2);
    }

    #[test]
    fn vertical_gaussian_is_lx_invariant_and_diagonalizes() {
        let f = LagrangianFrame::new(lx(1)).unwrap();
        let b = basis(1, 10);
        let mu = vertical_gaussian(1);
        let r = l_invariance_test(&mu, &f, &b, &cfg()).unwrap();
        assert!(r.invariant, "{r:?}");
        // μ_{X*} with X = iI is e^{−(Re u)²} du, so ϱ = gaussian(1)
        let rho = RealMeasure::gaussian(1, 1.0).unwrap();
        for d in [0, 2] {
            let k = HalfIndex::from_doubled(vec![d]);
            let res = l_diagonalization_residual(&mu, &rho, &k, &f, &b, &cfg()).unwrap();
            assert!(res.residual <= 1e-5, "2k = {d}: {}", res.residual);
        }
    }

    #[test]
    fn pushed_horizontal_measure_on_diagonal() {
        let n = 1;
        let f = LagrangianFrame::new(diagonal(n)).unwrap();
        let b = basis(n, 14);
        let h = MeasureSpec::horizontal(RealMeasure::dirac(vec![0.4]));
        // μ = (ϱ ⊗ ν)_X is Δ-invariant and μ_{X*} = ϱ ⊗ ν
        let mu = h.pushforward(f.rotation()).unwrap();
        let r = l_invariance_test(&mu, &f, &b, &cfg()).unwrap();
        assert!(r.invariant, "{r:?}");
        let t_mu = assemble_toeplitz(&mu, &b, &cfg()).unwrap();
        let t_h = assemble_toeplitz(&h, &b, &cfg()).unwrap();
        let conj = conjugate_by_vx(&t_h, f.rotation()).unwrap();
        assert!(
            t_mu.interior_max_diff(&conj) <= 1e-6,
            "{}",
            t_mu.interior_max_diff(&conj)
        );
    }

    #[test]
    fn vx_is_unitary_and_matches_pushforward() {
        let b = basis(2, 6);
        let theta: f64 = 0.7;
        let x = DMatrix::from_row_slice(
            2,
            2,
            &[
                c(theta.cos(), 0.0),
                c(0.0, theta.sin()),
                c(0.0, theta.sin()),
                c(theta.cos(), 0.0),
            ],
        );
        let v = vx_matrix(&x, &b).unwrap();
        assert!(unitary_deviation(&v) < 1e-12);
        let mu = MeasureSpec::atoms(
            vec![vec![c(0.3, 0.1), c(-0.2, 0.5)], vec![c(0.0, -0.4), c(0.6, 0.0)]],
            vec![c(1.0, 0.0), c(0.5, 0.0)],
        )
        .unwrap();
        let lhs = assemble_toeplitz(&mu.pushforward(&x).unwrap(), &b, &cfg()).unwrap();
        let rhs = conjugate_by_vx(&assemble_toeplitz(&mu, &b, &cfg()).unwrap(), &x).unwrap();
        assert!(lhs.max_diff(&rhs) < 1e-13, "{}", lhs.max_diff(&rhs));
    }

    #[test]
    fn two_dimensional_lx_diagonalization() {
        let f = LagrangianFrame::new(lx(2)).unwrap();
        let b = basis(2, 6);
        let c2 = QuadConfig {
            spectral_order: 40,
            moment_order: 30,
            ..cfg()
        };
        let rho = RealMeasure::gaussian(2, 1.0).unwrap();
        let res = l_diagonalization_residual(&vertical_gaussian(2), &rho, &HalfIndex::zeros(2), &f, &b, &c2).unwrap();
        assert!(res.residual <= 1e-6, "{}", res.residual);
        let direct = diagonalization_residual(&MeasureSpec::horizontal(rho), &HalfIndex::zeros(2), &b, &c2).unwrap();
        assert!(direct.residual <= 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rotated_lagrangian_frames(t in 0.0f64..std::f64::consts::TAU, s in 0.0f64..std::f64::consts::TAU,
                                     a in 0.2f64..3.0, b in -2.0f64..2.0) {
            // L = U R² with U = diag(e^{it}, e^{is}) and R = [[a, b], [0, 1]]
            let u = [C64::from_polar(1.0, t), C64::from_polar(1.0, s)];
            let cols = [[a, 0.0], [b, 1.0]];
            let vectors: Vec<Vec<f64>> = cols
                .iter()
                .map(|col| {
                    let z: Vec<C64> = (0..2).map(|j| u[j] * col[j]).collect();
                    vec![z[0].re, z[1].re, z[0].im, z[1].im]
                })
                .collect();
            prop_assert!(is_lagrangian(&vectors).unwrap().is_lagrangian);
            let f = LagrangianFrame::new(vectors.clone()).unwrap();
            prop_assert!(unitary_deviation(f.rotation()) <= 1e-12);
            let check = validate_rotation(&vectors, f.rotation()).unwrap();
            prop_assert!(check.max_real_part <= 1e-12);
            let y = scalar(2, c(0.0, -1.0)) * f.rotation() * C64::new(0.0, 1.0);
            prop_assert!(rotation_consistency(f.rotation(), &y) <= 1e-12);
        }
    }
}
