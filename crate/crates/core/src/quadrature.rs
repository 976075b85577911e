//! Gauss–Hermite and Gauss–Legendre rules and tensor-product integration.
//!
//! Nodes come from the symmetric tridiagonal (Jacobi) eigenproblem and are
//! then polished by Newton steps on the orthonormal three-term recurrence;
//! weights use the Christoffel sum `w_i = 1 / Σ_k p_k(x_i)²`, which stays
//! accurate for the tiny weights at the outer nodes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};

pub const MAX_ORDER: usize = 200;

/// Quadrature orders shared by every module. Moment integrands are
/// Gaussians times polynomials of degree `≤ 2D + |2k|`, so the per-axis
/// moment order bounds the usable truncation degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    /// Gauss–Hermite order per real axis for measure moments.
    pub moment_order: usize,
    /// Gauss–Hermite order for spectral functions and multiplication matrices.
    pub spectral_order: usize,
    /// Gauss–Legendre order for radial and chord integrals over balls.
    pub ball_radial: usize,
    /// Trapezoid points on each circle of a polar ball rule.
    pub ball_angular: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            moment_order: 40,
            spectral_order: 80,
            ball_radial: 24,
            ball_angular: 48,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightKind {
    /// Rule for `∫_R f(t) e^{−t²} dt`; the Gaussian is folded into the weights.
    Gaussian,
    /// Rule for `∫_{−1}^{1} f(t) dt`.
    Unit,
}

#[derive(Clone, Debug)]
pub struct QuadRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: WeightKind,
}

impl QuadRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(FockError::QuadratureOrder { order, max: MAX_ORDER });
    }
    Ok(())
}

/// Orthonormal recurrence `x p_k = b_{k+1} p_{k+1} + b_k p_{k−1}` (zero
/// diagonal for both families used here). Returns `(Σ_{k<n} p_k², p_n,
/// p_n')` at `x`.
fn recurrence(x: f64, n: usize, p0: f64, b: &dyn Fn(usize) -> f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut p = p0;
    let mut d_prev = 0.0;
    let mut d = 0.0;
    let mut sum = 0.0;
    for k in 0..n {
        sum += p * p;
        let bk1 = b(k + 1);
        let bk = if k == 0 { 0.0 } else { b(k) };
        let p_next = (x * p - bk * p_prev) / bk1;
        let d_next = (p + x * d - bk * d_prev) / bk1;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (sum, p, d)
}

fn golub_welsch(order: usize, kind: WeightKind, p0: f64, b: &dyn Fn(usize) -> f64) -> QuadRule {
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        jacobi[(k - 1, k)] = b(k);
        jacobi[(k, k - 1)] = b(k);
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut weights = Vec::with_capacity(order);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (_, pn, dn) = recurrence(*x, order, p0, b);
            if dn != 0.0 {
                *x -= pn / dn;
            }
        }
        let (sum, _, _) = recurrence(*x, order, p0, b);
        weights.push(1.0 / sum);
    }
    // exact symmetry about the origin
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    QuadRule { nodes, weights, kind }
}

/// Gauss–Hermite rule for the weight `e^{−t²}`; exact for polynomials of
/// degree `≤ 2·order − 1`.
pub fn gauss_hermite(order: usize) -> Result<QuadRule> {
    check_order(order)?;
    let p0 = std::f64::consts::PI.powf(-0.25);
    Ok(golub_welsch(order, WeightKind::Gaussian, p0, &|k| {
        (k as f64 / 2.0).sqrt()
    }))
}

/// Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(order: usize) -> Result<QuadRule> {
    check_order(order)?;
    let p0 = std::f64::consts::FRAC_1_SQRT_2;
    Ok(golub_welsch(order, WeightKind::Unit, p0, &|k| {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    }))
}

type RuleCache = Mutex<HashMap<(WeightKind, usize), Arc<QuadRule>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(kind: WeightKind, order: usize) -> Result<Arc<QuadRule>> {
    if let Some(rule) = cache().lock().unwrap().get(&(kind, order)) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(match kind {
        WeightKind::Gaussian => gauss_hermite(order)?,
        WeightKind::Unit => gauss_legendre(order)?,
    });
    cache().lock().unwrap().insert((kind, order), rule.clone());
    Ok(rule)
}

pub fn hermite_rule(order: usize) -> Result<Arc<QuadRule>> {
    cached(WeightKind::Gaussian, order)
}

pub fn legendre_rule(order: usize) -> Result<Arc<QuadRule>> {
    cached(WeightKind::Unit, order)
}

/// Tensor product of one-dimensional rules over `R^d`.
#[derive(Clone, Debug)]
pub struct TensorRule {
    axes: Vec<Arc<QuadRule>>,
}

impl TensorRule {
    pub fn new(axes: Vec<Arc<QuadRule>>) -> Self {
        assert!(!axes.is_empty());
        TensorRule { axes }
    }

    pub fn uniform(rule: Arc<QuadRule>, d: usize) -> Self {
        TensorRule::new(vec![rule; d])
    }

    pub fn gaussian(order: usize, d: usize) -> Result<Self> {
        Ok(TensorRule::uniform(hermite_rule(order)?, d))
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Arc<QuadRule>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|r| r.order()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Visits every node in odometer order (last axis fastest).
    pub fn for_each_node<F: FnMut(&[f64], f64)>(&self, mut f: F) {
        let d = self.dim();
        let mut counter = vec![0usize; d];
        let mut point = vec![0.0; d];
        loop {
            let mut w = 1.0;
            for (j, rule) in self.axes.iter().enumerate() {
                point[j] = rule.nodes()[counter[j]];
                w *= rule.weights()[counter[j]];
            }
            f(&point, w);
            let mut j = d;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                counter[j] += 1;
                if counter[j] < self.axes[j].order() {
                    break;
                }
                counter[j] = 0;
            }
        }
    }
}

/// `Σ_i w_i f(t_i)`; with Gaussian axes this approximates
/// `∫_{R^d} f(t) e^{−|t|²} dt`.
pub fn integrate_gaussian<F: Fn(&[f64]) -> Complex64>(f: F, rule: &TensorRule) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut bad: Option<Vec<f64>> = None;
    rule.for_each_node(|t, w| {
        if bad.is_some() {
            return;
        }
        let v = f(t);
        if !(v.re.is_finite() && v.im.is_finite()) {
            bad = Some(t.to_vec());
            return;
        }
        acc += v * w;
    });
    match bad {
        Some(node) => Err(FockError::NonFinite { node }),
        None => Ok(acc),
    }
}
