//! Multi-index arithmetic, exact factorials and binomials, and the
//! (physicists') Hermite polynomials.
//!
//! Half-integer indices `k ∈ (Z₊/2)ⁿ` are stored doubled so that `k − p`,
//! `k ≥ α` and `2k` stay exact.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};

/// Tuple of nonnegative exponents `α = (α₁, …, αₙ)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        assert!(!entries.is_empty(), "multi-index needs dimension n >= 1");
        MultiIndex(entries)
    }

    pub fn zeros(n: usize) -> Self {
        MultiIndex::new(vec![0; n])
    }

    /// Unit multi-index with a one in slot `j`.
    pub fn unit(n: usize, j: usize) -> Self {
        let mut e = vec![0; n];
        e[j] = 1;
        MultiIndex::new(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    /// Total degree `|α|`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.le(self) {
            return None;
        }
        Some(MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Exact `α! = ∏ αⱼ!`.
    pub fn factorial(&self) -> Result<u128> {
        let mut acc: u128 = 1;
        for &a in &self.0 {
            for m in 2..=a as u128 {
                acc = acc.checked_mul(m).ok_or_else(|| FockError::Overflow {
                    what: format!("{self}!"),
                })?;
            }
        }
        Ok(acc)
    }

    /// `α!` in floating point; never overflows for the degrees used here.
    pub fn factorial_f64(&self) -> f64 {
        self.0.iter().map(|&a| factorial_f64(a)).product()
    }

    /// Exact `∏ C(mⱼ, βⱼ)` for `β ≤ m`.
    pub fn binomial(&self, beta: &MultiIndex) -> Result<u128> {
        if !beta.le(self) {
            return Err(FockError::Domain(format!(
                "binomial needs beta <= m, got m = {self}, beta = {beta}"
            )));
        }
        let mut acc: u128 = 1;
        for (&m, &b) in self.0.iter().zip(&beta.0) {
            let c = binomial_u128(m, b).ok_or_else(|| FockError::Overflow {
                what: format!("C({m}, {b})"),
            })?;
            acc = acc.checked_mul(c).ok_or_else(|| FockError::Overflow {
                what: format!("C({self}, {beta})"),
            })?;
        }
        Ok(acc)
    }

    /// All `β ≤ self`, in lexicographic order.
    pub fn lower_set(&self) -> Vec<MultiIndex> {
        let mut out = vec![Vec::with_capacity(self.dim())];
        for &m in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=m).map(move |b| {
                        let mut p = prefix.clone();
                        p.push(b);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(MultiIndex).collect()
    }

    /// `z^α` for a complex point.
    pub fn monomial(&self, z: &[num_complex::Complex64]) -> num_complex::Complex64 {
        self.0.iter().zip(z).map(|(&a, &zj)| zj.powu(a)).product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// `k ∈ (Z₊/2)ⁿ`, stored as the integer tuple `2k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HalfIndex {
    doubled: Vec<u32>,
}

impl HalfIndex {
    pub fn from_doubled(doubled: Vec<u32>) -> Self {
        assert!(!doubled.is_empty());
        HalfIndex { doubled }
    }

    pub fn from_integer(k: &MultiIndex) -> Self {
        HalfIndex {
            doubled: k.entries().iter().map(|&a| 2 * a).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        HalfIndex { doubled: vec![0; n] }
    }

    pub fn dim(&self) -> usize {
        self.doubled.len()
    }

    pub fn doubled(&self) -> &[u32] {
        &self.doubled
    }

    /// The integer multi-index `2k`.
    pub fn two_k(&self) -> MultiIndex {
        MultiIndex::new(self.doubled.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.doubled.iter().all(|&d| d == 0)
    }

    pub fn is_integer(&self) -> bool {
        self.doubled.iter().all(|d| d % 2 == 0)
    }

    /// `k` as a multi-index when every entry is an integer.
    pub fn as_integer(&self) -> Option<MultiIndex> {
        self.is_integer()
            .then(|| MultiIndex::new(self.doubled.iter().map(|d| d / 2).collect()))
    }

    pub fn values(&self) -> Vec<f64> {
        self.doubled.iter().map(|&d| d as f64 / 2.0).collect()
    }

    /// `k ≥ α` for an integer multi-index, compared on the doubled form.
    pub fn ge(&self, alpha: &MultiIndex) -> bool {
        self.dim() == alpha.dim() && self.doubled.iter().zip(alpha.entries()).all(|(&d, &a)| d >= 2 * a)
    }

    /// `∏ Γ(kⱼ + 1)`, i.e. `k!` extended to half-integers.
    pub fn gamma_factorial(&self) -> f64 {
        self.doubled.iter().map(|&d| gamma_half_plus_one(d)).product()
    }

    pub fn to_signed(&self) -> SignedHalfIndex {
        SignedHalfIndex {
            doubled: self.doubled.iter().map(|&d| d as i64).collect(),
        }
    }
}

impl fmt::Display for HalfIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values().iter().map(|v| format!("{v}")).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl fmt::Display for SignedHalfIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values().iter().map(|v| format!("{v}")).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Signed half-integer tuple, used as a weight exponent `p` in `μ_p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedHalfIndex {
    doubled: Vec<i64>,
}

impl SignedHalfIndex {
    pub fn from_doubled(doubled: Vec<i64>) -> Self {
        assert!(!doubled.is_empty());
        SignedHalfIndex { doubled }
    }

    pub fn zeros(n: usize) -> Self {
        SignedHalfIndex { doubled: vec![0; n] }
    }

    pub fn dim(&self) -> usize {
        self.doubled.len()
    }

    pub fn doubled(&self) -> &[i64] {
        &self.doubled
    }

    pub fn is_zero(&self) -> bool {
        self.doubled.iter().all(|&d| d == 0)
    }

    pub fn values(&self) -> Vec<f64> {
        self.doubled.iter().map(|&d| d as f64 / 2.0).collect()
    }

    pub fn add(&self, other: &SignedHalfIndex) -> SignedHalfIndex {
        assert_eq!(self.dim(), other.dim());
        SignedHalfIndex {
            doubled: self.doubled.iter().zip(&other.doubled).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn neg(&self) -> SignedHalfIndex {
        SignedHalfIndex {
            doubled: self.doubled.iter().map(|d| -d).collect(),
        }
    }

    pub fn sub(&self, other: &SignedHalfIndex) -> SignedHalfIndex {
        self.add(&other.neg())
    }

    /// Back to an unsigned half index when all entries are `≥ 0`.
    pub fn to_unsigned(&self) -> Option<HalfIndex> {
        self.doubled
            .iter()
            .all(|&d| d >= 0)
            .then(|| HalfIndex::from_doubled(self.doubled.iter().map(|&d| d as u32).collect()))
    }

    /// `∏ (1 + xⱼ²)^{pⱼ} (1 + yⱼ²)^{pⱼ}` at `w = x + iy`.
    pub fn weight_at(&self, w: &[num_complex::Complex64]) -> f64 {
        self.doubled
            .iter()
            .zip(w)
            .map(|(&d, wj)| {
                if d == 0 {
                    1.0
                } else {
                    let base = (1.0 + wj.re * wj.re) * (1.0 + wj.im * wj.im);
                    pow_half(base, d)
                }
            })
            .product()
    }
}

/// `base^(d/2)` with an integer fast path.
pub(crate) fn pow_half(base: f64, doubled_exp: i64) -> f64 {
    if doubled_exp % 2 == 0 {
        base.powi((doubled_exp / 2) as i32)
    } else {
        base.powf(doubled_exp as f64 / 2.0)
    }
}

pub fn factorial_f64(a: u32) -> f64 {
    (2..=a).map(|m| m as f64).product()
}

pub fn binomial_u128(m: u32, b: u32) -> Option<u128> {
    let b = b.min(m - b) as u128;
    let m = m as u128;
    let mut acc: u128 = 1;
    for i in 0..b {
        // acc * (m - i) is divisible by (i + 1) at every step
        acc = acc.checked_mul(m - i)? / (i + 1);
    }
    Some(acc)
}

/// `Γ(d/2 + 1)`: integer factorial for even `d`, otherwise the product down
/// to `Γ(3/2) = √π/2`.
pub fn gamma_half_plus_one(doubled: u32) -> f64 {
    if doubled.is_multiple_of(2) {
        factorial_f64(doubled / 2)
    } else {
        let mut acc = std::f64::consts::PI.sqrt() / 2.0;
        let mut x = 0.5;
        while x < doubled as f64 / 2.0 {
            x += 1.0;
            acc *= x;
        }
        acc
    }
}

/// Physicists' Hermite polynomial `H_m(x)` by the three-term recurrence
/// `H_{m+1} = 2x H_m − 2m H_{m−1}`.
pub fn hermite(m: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if m == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for j in 1..m {
        let next = 2.0 * x * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_m^{(n)}(t) = ∏ H_{mⱼ}(tⱼ)`.
pub fn hermite_product(m: &MultiIndex, t: &[f64]) -> f64 {
    assert_eq!(m.dim(), t.len());
    m.entries().iter().zip(t).map(|(&mj, &tj)| hermite(mj, tj)).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn factorial_examples() {
        assert_eq!(mi(&[0, 0]).factorial().unwrap(), 1);
        assert_eq!(mi(&[2, 1]).factorial().unwrap(), 2);
        // repeated multiplication oracle
        let oracle: u128 = [5u128, 3, 4].iter().map(|&a| (1..=a).product::<u128>()).product();
        assert_eq!(oracle, 17280);
        assert_eq!(mi(&[5, 3, 4]).factorial().unwrap(), oracle);
    }

    #[test]
    fn factorial_overflow_reported() {
        assert!(matches!(mi(&[40]).factorial(), Err(FockError::Overflow { .. })));
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(mi(&[2, 2]).binomial(&mi(&[1, 0])).unwrap(), 2);
        assert_eq!(mi(&[2, 2]).binomial(&mi(&[2, 2])).unwrap(), 1);
        // Pascal-triangle oracle
        let mut pascal = vec![vec![1u128]];
        for r in 1..=4 {
            let prev = &pascal[r - 1];
            let mut row = vec![1u128; r + 1];
            for c in 1..r {
                row[c] = prev[c - 1] + prev[c];
            }
            pascal.push(row);
        }
        let oracle = pascal[4][2] * pascal[2][1];
        assert_eq!(oracle, 12);
        assert_eq!(mi(&[4, 2]).binomial(&mi(&[2, 1])).unwrap(), oracle);
    }

    #[test]
    fn binomial_domain_error() {
        assert!(matches!(mi(&[1, 2]).binomial(&mi(&[2, 0])), Err(FockError::Domain(_))));
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite_product(&mi(&[0, 0, 0]), &[0.3, -1.2, 7.0]), 1.0);
        assert_eq!(hermite_product(&mi(&[1]), &[0.5]), 1.0);
        assert_eq!(hermite_product(&mi(&[2]), &[0.0]), -2.0);
        assert_eq!(hermite(3, 1.0), 8.0 - 12.0);
    }

    #[test]
    fn hermite_recurrence_residual() {
        for m in 1..12u32 {
            for i in 0..=80 {
                let x = -4.0 + 0.1 * i as f64;
                let lhs = hermite(m + 1, x);
                let rhs = 2.0 * x * hermite(m, x) - 2.0 * m as f64 * hermite(m - 1, x);
                let scale = lhs.abs().max(rhs.abs()).max(1.0);
                assert!((lhs - rhs).abs() / scale <= 1e-12, "m={m} x={x}");
            }
        }
    }

    #[test]
    fn gamma_half_values() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert_eq!(gamma_half_plus_one(0), 1.0);
        assert_eq!(gamma_half_plus_one(4), 2.0);
        assert!((gamma_half_plus_one(1) - sqrt_pi / 2.0).abs() < 1e-15);
        assert!((gamma_half_plus_one(3) - 3.0 * sqrt_pi / 4.0).abs() < 1e-15);
        assert!((gamma_half_plus_one(5) - 15.0 * sqrt_pi / 8.0).abs() < 1e-14);
    }

    #[test]
    fn half_index_comparisons() {
        let k = HalfIndex::from_doubled(vec![3, 2]);
        assert!(k.ge(&mi(&[1, 1])));
        assert!(!k.ge(&mi(&[2, 0])));
        assert!(!k.is_integer());
        assert_eq!(k.two_k(), mi(&[3, 2]));
        let p = SignedHalfIndex::from_doubled(vec![1, -2]);
        assert_eq!(k.to_signed().sub(&p).doubled(), &[2, 4]);
    }

    #[test]
    fn lower_set_enumerates_box() {
        let set = mi(&[2, 1]).lower_set();
        assert_eq!(set.len(), 6);
        assert!(set.iter().all(|b| b.le(&mi(&[2, 1]))));
    }

    proptest! {
        #[test]
        fn binomial_factorial_identity(m in proptest::collection::vec(0u32..10, 1..4), seed in any::<u64>()) {
            let m = MultiIndex::new(m);
            let beta = MultiIndex::new(
                m.entries().iter().enumerate()
                    .map(|(i, &a)| ((seed >> (8 * i)) as u32) % (a + 1))
                    .collect(),
            );
            let rest = m.checked_sub(&beta).unwrap();
            prop_assert_eq!(
                m.binomial(&beta).unwrap() * beta.factorial().unwrap() * rest.factorial().unwrap(),
                m.factorial().unwrap()
            );
        }
    }
}
