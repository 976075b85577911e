//! Truncated Fock space spanned by `e_α(w) = w^α/√α!`, `|α| ≤ D`.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FockError, Result};
use crate::index::{binomial_u128, factorial_f64, MultiIndex};

type C64 = Complex64;

/// Default cap on the basis size; a dense operator at this size takes
/// `4096² · 16` bytes (256 MiB).
pub const DEFAULT_BASIS_CAP: usize = 4096;

/// All multi-indices with `|α| ≤ D` in graded-lex order: total degree
/// ascending, then lexicographic within a degree.
#[derive(Clone, Debug)]
pub struct BasisSet {
    n: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
    sqrt_fact: Vec<f64>,
    lookup: HashMap<MultiIndex, usize>,
}

impl PartialEq for BasisSet {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.degree == other.degree
    }
}

impl BasisSet {
    pub fn new(n: usize, degree: u32) -> Result<Self> {
        Self::with_cap(n, degree, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(n: usize, degree: u32, cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(FockError::Domain("dimension n must be at least 1".into()));
        }
        let size = Self::size_for(n, degree);
        if size > cap as u128 {
            return Err(FockError::BasisTooLarge {
                size: usize::try_from(size).unwrap_or(usize::MAX),
                cap,
                bytes: size.saturating_mul(size).saturating_mul(16),
            });
        }
        let mut indices = Vec::with_capacity(size as usize);
        for d in 0..=degree {
            push_degree(n, d, &mut Vec::with_capacity(n), &mut indices);
        }
        let sqrt_fact = indices.iter().map(|a| a.factorial_f64().sqrt()).collect();
        let lookup = indices.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        Ok(BasisSet {
            n,
            degree,
            indices,
            sqrt_fact,
            lookup,
        })
    }

    /// `C(n + D, n)`.
    pub fn size_for(n: usize, degree: u32) -> u128 {
        binomial_u128(n as u32 + degree, n as u32).unwrap_or(u128::MAX)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    #[allow(clippy::should_implement_trait)]
    pub fn index(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// `√α!` for the `i`-th index.
    pub fn sqrt_factorial(&self, i: usize) -> f64 {
        self.sqrt_fact[i]
    }

    /// Largest degree of the interior block, `⌊D/2⌋`.
    pub fn interior_degree(&self) -> u32 {
        self.degree / 2
    }

    /// Positions with `|α| ≤ D/2`; they form a prefix in graded-lex order.
    pub fn interior(&self) -> Vec<usize> {
        let cut = self.interior_degree();
        (0..self.len()).filter(|&i| self.indices[i].degree() <= cut).collect()
    }

    /// `e_α(z)` for every basis index.
    pub fn eval_basis(&self, z: &[C64]) -> Vec<C64> {
        let powers = self.powers(z);
        self.indices
            .iter()
            .zip(&self.sqrt_fact)
            .map(|(a, s)| monomial(&powers, a) / s)
            .collect()
    }

    /// `powers[j][m] = z_j^m` for `m ≤ D`.
    fn powers(&self, z: &[C64]) -> Vec<Vec<C64>> {
        z.iter()
            .map(|&zj| {
                let mut p = vec![C64::new(1.0, 0.0); self.degree as usize + 1];
                for m in 1..p.len() {
                    p[m] = p[m - 1] * zj;
                }
                p
            })
            .collect()
    }
}

fn push_degree(n: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() == n - 1 {
        prefix.push(d);
        out.push(MultiIndex::new(prefix.clone()));
        prefix.pop();
        return;
    }
    for a in 0..=d {
        prefix.push(a);
        push_degree(n, d - a, prefix, out);
        prefix.pop();
    }
}

fn monomial(powers: &[Vec<C64>], a: &MultiIndex) -> C64 {
    a.entries()
        .iter()
        .enumerate()
        .map(|(j, &e)| powers[j][e as usize])
        .product()
}

/// Element of the truncated space, coefficients in the `e_α` basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    pub coeffs: DVector<C64>,
}

impl FockVector {
    pub fn zeros(basis: &BasisSet) -> Self {
        FockVector {
            coeffs: DVector::zeros(basis.len()),
        }
    }

    pub fn from_coeffs(coeffs: DVector<C64>) -> Self {
        FockVector { coeffs }
    }

    pub fn basis_vector(basis: &BasisSet, alpha: &MultiIndex) -> Result<Self> {
        let i = basis
            .position(alpha)
            .ok_or_else(|| FockError::Domain(format!("{alpha} is outside the basis of degree {}", basis.degree())))?;
        let mut v = Self::zeros(basis);
        v.coeffs[i] = C64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// `⟨self, other⟩ = Σ self_α conj(other_α)`.
    pub fn inner(&self, other: &FockVector) -> C64 {
        other.coeffs.dotc(&self.coeffs)
    }

    /// Random unit vector with independent complex Gaussian coefficients.
    pub fn random_unit<R: Rng + ?Sized>(basis: &BasisSet, rng: &mut R) -> Self {
        let coeffs = DVector::from_fn(basis.len(), |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        });
        let norm = coeffs.norm();
        FockVector {
            coeffs: coeffs / C64::from(norm),
        }
    }
}

/// Truncated expansion of `K_z(w) = e^{z̄·w}`: `c_α = z̄^α/√α!`.
pub fn kernel_coefficients(z: &[C64], basis: &BasisSet) -> FockVector {
    let conj: Vec<C64> = z.iter().map(|c| c.conj()).collect();
    FockVector {
        coeffs: DVector::from_vec(basis.eval_basis(&conj)),
    }
}

/// `k_z = e^{−|z|²/2} K_z`; its truncated norm tends to 1 as `D` grows.
pub fn normalized_kernel(z: &[C64], basis: &BasisSet) -> FockVector {
    let s: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    let mut v = kernel_coefficients(z, basis);
    v.coeffs *= C64::from((-0.5 * s).exp());
    v
}

/// `∂^a`: moves `√(α!/(α−a)!)·c_α` to position `α − a`; terms with `a ≰ α` drop.
pub fn apply_derivative(v: &FockVector, a: &MultiIndex, basis: &BasisSet) -> FockVector {
    let mut out = FockVector::zeros(basis);
    for (i, alpha) in basis.indices().iter().enumerate() {
        if let Some(rest) = alpha.checked_sub(a) {
            let j = basis.position(&rest).expect("lower index is in the basis");
            out.coeffs[j] += v.coeffs[i] * derivative_factor(alpha, a);
        }
    }
    out
}

/// `√(α!/(α−a)!)` for `a ≤ α`.
pub fn derivative_factor(alpha: &MultiIndex, a: &MultiIndex) -> f64 {
    alpha
        .entries()
        .iter()
        .zip(a.entries())
        .map(|(&al, &aj)| (al - aj + 1..=al).map(|m| m as f64).product::<f64>())
        .product::<f64>()
        .sqrt()
}

/// `f(z) = Σ c_α z^α/√α!`.
pub fn evaluate(v: &FockVector, z: &[C64], basis: &BasisSet) -> C64 {
    basis
        .eval_basis(z)
        .iter()
        .zip(v.coeffs.iter())
        .map(|(e, c)| e * c)
        .sum()
}

/// `∂^k f(z)`.
pub fn derivative_at(v: &FockVector, k: &MultiIndex, z: &[C64], basis: &BasisSet) -> C64 {
    evaluate(&apply_derivative(v, k, basis), z, basis)
}

/// One-axis block of `W_h`: entry `(b, a) = ⟨W_h e_a, e_b⟩`.
fn weyl_axis(h: C64, degree: u32) -> DMatrix<C64> {
    let d = degree as usize;
    let pref = (-0.5 * h.norm_sqr()).exp();
    let mut neg_h = vec![C64::new(1.0, 0.0); d + 1];
    let mut hbar = vec![C64::new(1.0, 0.0); d + 1];
    for m in 1..=d {
        neg_h[m] = neg_h[m - 1] * (-h);
        hbar[m] = hbar[m - 1] * h.conj();
    }
    DMatrix::from_fn(d + 1, d + 1, |b, a| {
        let mut s = C64::new(0.0, 0.0);
        for k in 0..=a.min(b) {
            let c = binomial_u128(a as u32, k as u32).unwrap() as f64;
            s += neg_h[a - k] * hbar[b - k] * (c / factorial_f64((b - k) as u32));
        }
        s * pref * (factorial_f64(b as u32) / factorial_f64(a as u32)).sqrt()
    })
}

/// Compression of `W_h f(z) = e^{z·h̄ − |h|²/2} f(z − h)` to the basis.
///
/// Entries are exact: the binomial expansion of `(z − h)^α` times the
/// exponential series, read off at degree `β`. The operator factors over
/// coordinates, so each entry is a product of one-axis blocks.
pub fn weyl_matrix(h: &[C64], basis: &BasisSet) -> Result<DMatrix<C64>> {
    if h.len() != basis.dim() {
        return Err(FockError::DimensionMismatch {
            expected: basis.dim(),
            got: h.len(),
        });
    }
    let blocks: Vec<DMatrix<C64>> = h.iter().map(|&hj| weyl_axis(hj, basis.degree())).collect();
    let idx = basis.indices();
    Ok(DMatrix::from_fn(basis.len(), basis.len(), |r, c| {
        let (b, a) = (idx[r].entries(), idx[c].entries());
        blocks
            .iter()
            .enumerate()
            .map(|(j, w)| w[(b[j] as usize, a[j] as usize)])
            .product()
    }))
}

pub fn weyl_apply(v: &FockVector, h: &[C64], basis: &BasisSet) -> Result<FockVector> {
    Ok(FockVector {
        coeffs: weyl_matrix(h, basis)? * &v.coeffs,
    })
}

/// The constant `2^{−n} π^{−n/2} e^{(2√2+1)/2}` in the pointwise
/// derivative estimate, taken as printed (the exponential is not raised
/// to the `n`-th power).
pub fn derivative_bound_constant(n: usize) -> f64 {
    2f64.powi(-(n as i32)) * PI.powf(-(n as f64) / 2.0) * ((2.0 * 2f64.sqrt() + 1.0) / 2.0).exp()
}

/// `C·k!·∏ (1+x_j²)^{k_j/2}(1+y_j²)^{k_j/2} e^{|z_j|²/2}` for `‖f‖ = 1`.
pub fn derivative_bound(k: &MultiIndex, z: &[C64]) -> f64 {
    let c = derivative_bound_constant(z.len());
    let prod: f64 = z
        .iter()
        .zip(k.entries())
        .map(|(zj, &kj)| {
            ((1.0 + zj.re * zj.re) * (1.0 + zj.im * zj.im)).powf(kj as f64 / 2.0) * (0.5 * zj.norm_sqr()).exp()
        })
        .product();
    c * k.factorial_f64() * prod
}
