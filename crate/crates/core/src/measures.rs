//! Measure symbols on `Cⁿ` and their integration contract.
//!
//! Every measure reduces to a weighted node set for integrals of the form
//! `∫ g(w) e^{−rate|w−c|²} dμ(w)` (moments, Berezin transforms) or
//! `∫_{P_r(z)} g dμ` over a polydisk. Node sets keep a per-axis tensor
//! structure whenever the measure factors over complex coordinates, so
//! moment tables cost `O(nodes · D²)` per axis instead of a full sweep.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{FockError, Result};
use crate::index::{MultiIndex, SignedHalfIndex};
use crate::quadrature::{hermite_rule, legendre_rule, QuadConfig, QuadRule};

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance for accepting `X*X = I`.
pub const UNITARY_TOL: f64 = 1e-12;
/// Off-diagonal magnitude below which a unitary is treated as diagonal.
const DIAGONAL_TOL: f64 = 1e-14;

/// Coordinate type of a measure: `f64` for `Rⁿ`, `Complex64` for `Cⁿ`.
pub trait Coord:
    Copy + Send + Sync + fmt::Debug + 'static + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn norm_sqr(self) -> f64;
    fn push_coords(self, out: &mut Vec<f64>);
    /// Nodes for `∫ h(t) e^{−rate|t−center|²} dt` along one coordinate.
    fn gauss_axis(center: Self, rate: f64, rule: &QuadRule) -> Vec<(Self, C64)>;
    /// Nodes for Lebesgue measure on the disk (or interval) of radius `r`.
    fn ball_axis(center: Self, r: f64, cfg: &QuadConfig) -> Result<Vec<(Self, C64)>>;
}

impl Coord for f64 {
    fn norm_sqr(self) -> f64 {
        self * self
    }

    fn push_coords(self, out: &mut Vec<f64>) {
        out.push(self);
    }

    fn gauss_axis(center: f64, rate: f64, rule: &QuadRule) -> Vec<(f64, C64)> {
        let s = rate.sqrt();
        rule.iter().map(|(t, w)| (center + t / s, C64::from(w / s))).collect()
    }

    /// `x = c + r sin φ` so that the chord length `2r cos φ` of a disk
    /// stays smooth in the integration variable.
    fn ball_axis(center: f64, r: f64, cfg: &QuadConfig) -> Result<Vec<(f64, C64)>> {
        let rule = legendre_rule(cfg.ball_radial)?;
        Ok(rule
            .iter()
            .map(|(u, w)| {
                let phi = 0.5 * PI * u;
                (center + r * phi.sin(), C64::from(0.5 * PI * w * r * phi.cos()))
            })
            .collect())
    }
}

impl Coord for C64 {
    fn norm_sqr(self) -> f64 {
        C64::norm_sqr(&self)
    }

    fn push_coords(self, out: &mut Vec<f64>) {
        out.push(self.re);
        out.push(self.im);
    }

    fn gauss_axis(center: C64, rate: f64, rule: &QuadRule) -> Vec<(C64, C64)> {
        let s = rate.sqrt();
        let mut out = Vec::with_capacity(rule.order() * rule.order());
        for (x, wx) in rule.iter() {
            for (y, wy) in rule.iter() {
                out.push((center + C64::new(x, y) / s, C64::from(wx * wy / rate)));
            }
        }
        out
    }

    /// Polar rule: Gauss–Legendre in the radius, trapezoid in the angle.
    fn ball_axis(center: C64, r: f64, cfg: &QuadConfig) -> Result<Vec<(C64, C64)>> {
        let rule = legendre_rule(cfg.ball_radial)?;
        let m = cfg.ball_angular.max(1);
        let dtheta = 2.0 * PI / m as f64;
        let mut out = Vec::with_capacity(rule.order() * m);
        for (u, w) in rule.iter() {
            let rho = 0.5 * r * (1.0 + u);
            let wr = 0.5 * r * w * rho * dtheta;
            for k in 0..m {
                let theta = dtheta * k as f64;
                out.push((center + C64::from_polar(rho, theta), C64::from(wr)));
            }
        }
        Ok(out)
    }
}

fn sq_dist<S: Coord>(a: &[S], b: &[S]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y).norm_sqr()).sum()
}

/// Weighted point set. `Tensor` is the product of per-axis lists times a
/// common scale; `Scattered` stores points flat with stride `dim`.
#[derive(Clone, Debug)]
pub enum Nodes<S: Coord> {
    Tensor {
        axes: Vec<Vec<(S, C64)>>,
        scale: C64,
    },
    Scattered {
        dim: usize,
        points: Vec<S>,
        weights: Vec<C64>,
    },
}

impl<S: Coord> Nodes<S> {
    pub fn dim(&self) -> usize {
        match self {
            Nodes::Tensor { axes, .. } => axes.len(),
            Nodes::Scattered { dim, .. } => *dim,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Nodes::Tensor { axes, .. } => axes.iter().map(|a| a.len()).product(),
            Nodes::Scattered { weights, .. } => weights.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Expands a tensor set (odometer order, last axis fastest).
    pub fn into_scattered(self) -> Nodes<S> {
        match self {
            Nodes::Tensor { axes, scale } => {
                let dim = axes.len();
                let total: usize = axes.iter().map(|a| a.len()).product();
                let mut points = Vec::with_capacity(total * dim);
                let mut weights = Vec::with_capacity(total);
                if total > 0 {
                    let mut counter = vec![0usize; dim];
                    'outer: loop {
                        let mut w = scale;
                        for (j, axis) in axes.iter().enumerate() {
                            let (p, wj) = axis[counter[j]];
                            points.push(p);
                            w *= wj;
                        }
                        weights.push(w);
                        let mut j = dim;
                        loop {
                            if j == 0 {
                                break 'outer;
                            }
                            j -= 1;
                            counter[j] += 1;
                            if counter[j] < axes[j].len() {
                                break;
                            }
                            counter[j] = 0;
                        }
                    }
                }
                Nodes::Scattered { dim, points, weights }
            }
            s => s,
        }
    }

    /// Multiplies every weight by `f(point)`, preserving tensor form when
    /// `f` is supplied per axis.
    pub fn scale_by(self, f: &dyn Fn(&[S]) -> C64) -> Nodes<S> {
        match self.into_scattered() {
            Nodes::Scattered {
                dim,
                points,
                mut weights,
            } => {
                for (w, p) in weights.iter_mut().zip(points.chunks(dim.max(1))) {
                    *w *= f(p);
                }
                Nodes::Scattered { dim, points, weights }
            }
            Nodes::Tensor { .. } => unreachable!(),
        }
    }

    pub fn scale_axes(self, f: &dyn Fn(usize, S) -> C64) -> Nodes<S> {
        match self {
            Nodes::Tensor { mut axes, scale } => {
                for (j, axis) in axes.iter_mut().enumerate() {
                    for (p, w) in axis.iter_mut() {
                        *w *= f(j, *p);
                    }
                }
                Nodes::Tensor { axes, scale }
            }
            Nodes::Scattered {
                dim,
                points,
                mut weights,
            } => {
                for (w, p) in weights.iter_mut().zip(points.chunks(dim.max(1))) {
                    for (j, &pj) in p.iter().enumerate() {
                        *w *= f(j, pj);
                    }
                }
                Nodes::Scattered { dim, points, weights }
            }
        }
    }

    pub fn scale_all(self, c: C64) -> Nodes<S> {
        match self {
            Nodes::Tensor { axes, scale } => Nodes::Tensor { axes, scale: scale * c },
            Nodes::Scattered { dim, points, weights } => Nodes::Scattered {
                dim,
                points,
                weights: weights.into_iter().map(|w| w * c).collect(),
            },
        }
    }

    /// Rejects the set if any weight is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        let bad = |p: &[S]| {
            let mut node = Vec::new();
            for &c in p {
                c.push_coords(&mut node);
            }
            Err(FockError::NonFinite { node })
        };
        match self {
            Nodes::Tensor { axes, scale } => {
                if !is_finite(*scale) {
                    return Err(FockError::NonFinite { node: vec![] });
                }
                for axis in axes {
                    for (p, w) in axis {
                        if !is_finite(*w) {
                            return bad(std::slice::from_ref(p));
                        }
                    }
                }
            }
            Nodes::Scattered { dim, points, weights } => {
                for (w, p) in weights.iter().zip(points.chunks(*dim)) {
                    if !is_finite(*w) {
                        return bad(p);
                    }
                }
            }
        }
        Ok(())
    }

    /// `Σ_i W_i g(p_i)`.
    pub fn sum(&self, g: &(dyn Fn(&[S]) -> C64 + Sync)) -> C64 {
        match self {
            Nodes::Tensor { .. } => self.clone().into_scattered().sum(g),
            Nodes::Scattered { dim, points, weights } => {
                weights.iter().zip(points.chunks(*dim)).map(|(w, p)| w * g(p)).sum()
            }
        }
    }

    pub fn total(&self) -> C64 {
        match self {
            Nodes::Tensor { axes, scale } => {
                axes.iter()
                    .map(|a| a.iter().map(|(_, w)| *w).sum::<C64>())
                    .product::<C64>()
                    * scale
            }
            Nodes::Scattered { weights, .. } => weights.iter().sum(),
        }
    }
}

fn is_finite(c: C64) -> bool {
    c.re.is_finite() && c.im.is_finite()
}

/// Declared Gaussian factor `e^{−rate|w−center|²}` of a density.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFactor<S> {
    pub rate: f64,
    pub center: Vec<S>,
}

pub type AxisFn<S> = Arc<dyn Fn(S) -> C64 + Send + Sync>;
pub type PointFn<S> = Arc<dyn Fn(&[S]) -> C64 + Send + Sync>;

/// The non-Gaussian part of a density.
#[derive(Clone)]
pub enum Amplitude<S> {
    One,
    /// `∏_j f_j(w_j)`
    Product(Vec<AxisFn<S>>),
    General(PointFn<S>),
}

impl<S: Coord> Amplitude<S> {
    pub fn eval(&self, p: &[S]) -> C64 {
        match self {
            Amplitude::One => ONE,
            Amplitude::Product(fs) => fs.iter().zip(p).map(|(f, &x)| f(x)).product(),
            Amplitude::General(f) => f(p),
        }
    }

    fn abs(&self) -> Amplitude<S> {
        match self {
            Amplitude::One => Amplitude::One,
            Amplitude::Product(fs) => Amplitude::Product(
                fs.iter()
                    .map(|f| {
                        let f = f.clone();
                        Arc::new(move |x: S| C64::from(f(x).norm())) as AxisFn<S>
                    })
                    .collect(),
            ),
            Amplitude::General(f) => {
                let f = f.clone();
                Amplitude::General(Arc::new(move |p: &[S]| C64::from(f(p).norm())))
            }
        }
    }
}

impl<S> fmt::Debug for Amplitude<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Amplitude::One => write!(f, "One"),
            Amplitude::Product(fs) => write!(f, "Product({} axes)", fs.len()),
            Amplitude::General(_) => write!(f, "General"),
        }
    }
}

/// Density `amplitude(w) · e^{−rate|w−center|²}` against Lebesgue measure.
/// Without a Gaussian factor the density must stay bounded by a polynomial
/// so that moments against `e^{−|w|²}` converge.
#[derive(Clone, Debug)]
pub struct Density<S> {
    pub dim: usize,
    pub gaussian: Option<GaussianFactor<S>>,
    pub amplitude: Amplitude<S>,
    pub real_valued: bool,
    pub label: String,
}

impl<S: Coord> Density<S> {
    pub fn value(&self, p: &[S]) -> C64 {
        let g = match &self.gaussian {
            Some(GaussianFactor { rate, center }) => (-rate * sq_dist(p, center)).exp(),
            None => 1.0,
        };
        self.amplitude.eval(p) * g
    }

    fn variation(&self) -> Density<S> {
        Density {
            amplitude: self.amplitude.abs(),
            real_valued: true,
            label: format!("|{}|", self.label),
            ..self.clone()
        }
    }

    fn attach_amplitude(&self, nodes: Nodes<S>) -> Nodes<S> {
        match &self.amplitude {
            Amplitude::One => nodes,
            Amplitude::Product(fs) => nodes.scale_axes(&|j, x| fs[j](x)),
            Amplitude::General(f) => nodes.scale_by(&|p| f(p)),
        }
    }

    fn gauss_nodes(&self, rate: f64, center: &[S], rule: &QuadRule) -> Result<Nodes<S>> {
        let (a, d) = match &self.gaussian {
            Some(g) => (g.rate, g.center.as_slice()),
            None => (0.0, center),
        };
        let rp = rate + a;
        if rp <= 0.0 {
            return Err(FockError::Domain(format!(
                "density {} needs a decaying weight (combined rate {rp})",
                self.label
            )));
        }
        let mid: Vec<S> = center
            .iter()
            .zip(d)
            .map(|(&c, &dj)| (c * rate + dj * a) * (1.0 / rp))
            .collect();
        let k = (-(rate * a / rp) * sq_dist(center, d)).exp();
        let axes = mid.iter().map(|&m| S::gauss_axis(m, rp, rule)).collect();
        let nodes = Nodes::Tensor {
            axes,
            scale: C64::from(k),
        };
        Ok(self.attach_amplitude(nodes))
    }

    fn ball_nodes(&self, center: &[S], r: &[f64], cfg: &QuadConfig) -> Result<Nodes<S>> {
        let axes = center
            .iter()
            .zip(r)
            .map(|(&c, &rj)| S::ball_axis(c, rj, cfg))
            .collect::<Result<Vec<_>>>()?;
        let mut nodes = Nodes::Tensor { axes, scale: ONE };
        if let Some(GaussianFactor { rate, center: d }) = &self.gaussian {
            nodes = nodes.scale_axes(&|j, x| C64::from((-rate * (x - d[j]).norm_sqr()).exp()));
        }
        Ok(self.attach_amplitude(nodes))
    }
}

fn atoms_gauss_nodes<S: Coord>(dim: usize, points: &[Vec<S>], weights: &[C64], rate: f64, center: &[S]) -> Nodes<S> {
    Nodes::Scattered {
        dim,
        points: points.iter().flatten().copied().collect(),
        weights: points
            .iter()
            .zip(weights)
            .map(|(p, &w)| w * (-rate * sq_dist(p, center)).exp())
            .collect(),
    }
}

fn atoms_ball_nodes<S: Coord>(dim: usize, points: &[Vec<S>], weights: &[C64], center: &[S], r: &[f64]) -> Nodes<S> {
    let mut flat = Vec::new();
    let mut ws = Vec::new();
    for (p, &w) in points.iter().zip(weights) {
        let inside = p
            .iter()
            .zip(center)
            .zip(r)
            .all(|((&x, &c), &rj)| (x - c).norm_sqr() < rj * rj);
        if inside {
            flat.extend_from_slice(p);
            ws.push(w);
        }
    }
    Nodes::Scattered {
        dim,
        points: flat,
        weights: ws,
    }
}

fn lebesgue_gauss_nodes<S: Coord>(rate: f64, center: &[S], rule: &QuadRule) -> Nodes<S> {
    Nodes::Tensor {
        axes: center.iter().map(|&c| S::gauss_axis(c, rate, rule)).collect(),
        scale: ONE,
    }
}

fn check_points<S>(dim: usize, points: &[Vec<S>], weights: &[C64]) -> Result<()> {
    if points.len() != weights.len() {
        return Err(FockError::DimensionMismatch {
            expected: points.len(),
            got: weights.len(),
        });
    }
    for p in points {
        if p.len() != dim {
            return Err(FockError::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    if weights.iter().any(|w| !is_finite(*w)) {
        return Err(FockError::Domain("atom weights must be finite".into()));
    }
    Ok(())
}

/// Measure `ϱ` on `Rⁿ`, the horizontal factor of `ϱ ⊗ ν_n`.
#[derive(Clone, Debug)]
pub enum RealMeasure {
    Atoms {
        dim: usize,
        points: Vec<Vec<f64>>,
        weights: Vec<C64>,
    },
    Density(Density<f64>),
    Lebesgue {
        dim: usize,
    },
}

impl RealMeasure {
    pub fn atoms(points: Vec<Vec<f64>>, weights: Vec<C64>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if dim == 0 {
            return Err(FockError::Domain("atoms need at least one point".into()));
        }
        check_points(dim, &points, &weights)?;
        Ok(RealMeasure::Atoms { dim, points, weights })
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        RealMeasure::Atoms {
            dim: point.len(),
            points: vec![point],
            weights: vec![ONE],
        }
    }

    pub fn lebesgue(dim: usize) -> Self {
        RealMeasure::Lebesgue { dim }
    }

    /// `e^{−|t|²/σ²} dt`, not normalized.
    pub fn gaussian(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FockError::Domain(format!(
                "gaussian width must be positive, got {sigma}"
            )));
        }
        Ok(RealMeasure::Density(Density {
            dim,
            gaussian: Some(GaussianFactor {
                rate: 1.0 / (sigma * sigma),
                center: vec![0.0; dim],
            }),
            amplitude: Amplitude::One,
            real_valued: true,
            label: format!("gaussian({sigma})"),
        }))
    }

    pub fn dim(&self) -> usize {
        match self {
            RealMeasure::Atoms { dim, .. } | RealMeasure::Lebesgue { dim } => *dim,
            RealMeasure::Density(d) => d.dim,
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            RealMeasure::Atoms { weights, .. } => weights.iter().all(|w| w.im == 0.0),
            RealMeasure::Density(d) => d.real_valued,
            RealMeasure::Lebesgue { .. } => true,
        }
    }

    pub fn variation(&self) -> RealMeasure {
        match self {
            RealMeasure::Atoms { dim, points, weights } => RealMeasure::Atoms {
                dim: *dim,
                points: points.clone(),
                weights: weights.iter().map(|w| C64::from(w.norm())).collect(),
            },
            RealMeasure::Density(d) => RealMeasure::Density(d.variation()),
            RealMeasure::Lebesgue { dim } => RealMeasure::Lebesgue { dim: *dim },
        }
    }

    /// Nodes for `∫ h(t) e^{−rate|t−center|²} dϱ(t)`.
    pub fn gauss_nodes(&self, rate: f64, center: &[f64], order: usize) -> Result<Nodes<f64>> {
        let rule = hermite_rule(order)?;
        let nodes = match self {
            RealMeasure::Atoms { dim, points, weights } => atoms_gauss_nodes(*dim, points, weights, rate, center),
            RealMeasure::Density(d) => d.gauss_nodes(rate, center, &rule)?,
            RealMeasure::Lebesgue { .. } => lebesgue_gauss_nodes(rate, center, &rule),
        };
        nodes.check_finite()?;
        Ok(nodes)
    }

    /// `∫ h(t) e^{−rate|t−center|²} dϱ(t)`.
    pub fn gaussian_integral(
        &self,
        rate: f64,
        center: &[f64],
        order: usize,
        h: &(dyn Fn(&[f64]) -> C64 + Sync),
    ) -> Result<C64> {
        Ok(self.gauss_nodes(rate, center, order)?.sum(h))
    }

    /// Nodes for `ϱ` restricted to the open box `∏ (c_j − r_j, c_j + r_j)`.
    pub fn box_nodes(&self, center: &[f64], r: &[f64], cfg: &QuadConfig) -> Result<Nodes<f64>> {
        match self {
            RealMeasure::Atoms { dim, points, weights } => Ok(atoms_ball_nodes(*dim, points, weights, center, r)),
            RealMeasure::Density(d) => d.ball_nodes(center, r, cfg),
            RealMeasure::Lebesgue { .. } => Ok(Nodes::Tensor {
                axes: center
                    .iter()
                    .zip(r)
                    .map(|(&c, &rj)| f64::ball_axis(c, rj, cfg))
                    .collect::<Result<_>>()?,
                scale: ONE,
            }),
        }
    }

    /// `∏ (1+t_j²)^{a_j} dϱ(t)`.
    pub fn polynomial_weight(&self, a: &[i32]) -> Result<RealMeasure> {
        if a.len() != self.dim() {
            return Err(FockError::DimensionMismatch {
                expected: self.dim(),
                got: a.len(),
            });
        }
        if a.iter().all(|&x| x == 0) {
            return Ok(self.clone());
        }
        let axis = |j: usize| -> AxisFn<f64> {
            let e = a[j];
            Arc::new(move |t: f64| C64::from((1.0 + t * t).powi(e)))
        };
        let label = format!("{}·(1+t²)^{:?}", self.describe(), a);
        Ok(match self {
            RealMeasure::Atoms { dim, points, weights } => RealMeasure::Atoms {
                dim: *dim,
                points: points.clone(),
                weights: points
                    .iter()
                    .zip(weights)
                    .map(|(pt, &w)| w * pt.iter().zip(a).map(|(&t, &e)| (1.0 + t * t).powi(e)).product::<f64>())
                    .collect(),
            },
            RealMeasure::Lebesgue { dim } => RealMeasure::Density(Density {
                dim: *dim,
                gaussian: None,
                amplitude: Amplitude::Product((0..*dim).map(axis).collect()),
                real_valued: true,
                label,
            }),
            RealMeasure::Density(d) => {
                let amplitude = match &d.amplitude {
                    Amplitude::One => Amplitude::Product((0..d.dim).map(axis).collect()),
                    Amplitude::Product(fs) => Amplitude::Product(
                        fs.iter()
                            .enumerate()
                            .map(|(j, f)| {
                                let (f, g) = (f.clone(), axis(j));
                                Arc::new(move |t: f64| f(t) * g(t)) as AxisFn<f64>
                            })
                            .collect(),
                    ),
                    Amplitude::General(f) => {
                        let (f, a) = (f.clone(), a.to_vec());
                        Amplitude::General(Arc::new(move |p: &[f64]| {
                            let w: f64 = p.iter().zip(&a).map(|(&t, &e)| (1.0 + t * t).powi(e)).product();
                            f(p) * w
                        }))
                    }
                };
                RealMeasure::Density(Density {
                    dim: d.dim,
                    gaussian: d.gaussian.clone(),
                    amplitude,
                    real_valued: d.real_valued,
                    label,
                })
            }
        })
    }

    pub fn describe(&self) -> String {
        match self {
            RealMeasure::Atoms { points, weights, .. } if points.len() == 1 && weights[0] == ONE => {
                format!("dirac({:?})", points[0])
            }
            RealMeasure::Atoms { points, .. } => format!("atoms[{}]", points.len()),
            RealMeasure::Density(d) => d.label.clone(),
            RealMeasure::Lebesgue { dim } => format!("lebesgue(R^{dim})"),
        }
    }
}

/// A Borel measure on `Cⁿ` with Gaussian-dominated growth.
#[derive(Clone, Debug)]
pub enum MeasureSpec {
    Atoms {
        dim: usize,
        points: Vec<Vec<C64>>,
        weights: Vec<C64>,
    },
    Density(Density<C64>),
    /// Lebesgue measure `ν_{2n}`.
    Lebesgue {
        dim: usize,
    },
    /// `ϱ ⊗ ν_n` with `w = x + iy`, `ϱ` acting on `x`.
    Horizontal(RealMeasure),
    /// `ϱ ⊗ ν_{n,α}` with `dν_{n,α}(y) = ∏ (1+y_j²)^{−α_j} dy_j`.
    AlphaHorizontal {
        rho: RealMeasure,
        alpha: Vec<i32>,
    },
    /// `μ_X(E) = μ(XE)`.
    Pushforward {
        base: Box<MeasureSpec>,
        x: DMatrix<C64>,
    },
    /// `μ_p` with density `∏ (1+x_j²)^{p_j}(1+y_j²)^{p_j}`; never nested.
    Weighted {
        base: Box<MeasureSpec>,
        p: SignedHalfIndex,
    },
}

impl MeasureSpec {
    pub fn lebesgue(dim: usize) -> Self {
        MeasureSpec::Lebesgue { dim }
    }

    pub fn atoms(points: Vec<Vec<C64>>, weights: Vec<C64>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if dim == 0 {
            return Err(FockError::Domain("atoms need at least one point".into()));
        }
        check_points(dim, &points, &weights)?;
        Ok(MeasureSpec::Atoms { dim, points, weights })
    }

    pub fn dirac(point: Vec<C64>) -> Self {
        MeasureSpec::Atoms {
            dim: point.len(),
            points: vec![point],
            weights: vec![ONE],
        }
    }

    /// `e^{−|w|²/σ²} dν_{2n}(w)`, not normalized.
    pub fn gaussian(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FockError::Domain(format!(
                "gaussian width must be positive, got {sigma}"
            )));
        }
        Ok(MeasureSpec::Density(Density {
            dim,
            gaussian: Some(GaussianFactor {
                rate: 1.0 / (sigma * sigma),
                center: vec![ZERO; dim],
            }),
            amplitude: Amplitude::One,
            real_valued: true,
            label: format!("gaussian({sigma})"),
        }))
    }

    pub fn horizontal(rho: RealMeasure) -> Self {
        MeasureSpec::Horizontal(rho)
    }

    pub fn alpha_horizontal(rho: RealMeasure, alpha: Vec<i32>) -> Result<Self> {
        if alpha.len() != rho.dim() {
            return Err(FockError::DimensionMismatch {
                expected: rho.dim(),
                got: alpha.len(),
            });
        }
        if alpha.iter().all(|&a| a == 0) {
            return Ok(MeasureSpec::Horizontal(rho));
        }
        Ok(MeasureSpec::AlphaHorizontal { rho, alpha })
    }

    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::Atoms { dim, .. } | MeasureSpec::Lebesgue { dim } => *dim,
            MeasureSpec::Density(d) => d.dim,
            MeasureSpec::Horizontal(rho) | MeasureSpec::AlphaHorizontal { rho, .. } => rho.dim(),
            MeasureSpec::Pushforward { base, .. } | MeasureSpec::Weighted { base, .. } => base.dim(),
        }
    }

    /// True when every value of the measure is real, so `T_μ` is Hermitian.
    pub fn is_real(&self) -> bool {
        match self {
            MeasureSpec::Atoms { weights, .. } => weights.iter().all(|w| w.im == 0.0),
            MeasureSpec::Density(d) => d.real_valued,
            MeasureSpec::Lebesgue { .. } => true,
            MeasureSpec::Horizontal(rho) | MeasureSpec::AlphaHorizontal { rho, .. } => rho.is_real(),
            MeasureSpec::Pushforward { base, .. } | MeasureSpec::Weighted { base, .. } => base.is_real(),
        }
    }

    /// The horizontal factor `ϱ` when `μ = ϱ ⊗ ν_n` structurally.
    pub fn horizontal_factor(&self) -> Option<&RealMeasure> {
        match self {
            MeasureSpec::Horizontal(rho) => Some(rho),
            _ => None,
        }
    }

    /// Total variation `|μ|`, formed structurally.
    pub fn variation(&self) -> MeasureSpec {
        match self {
            MeasureSpec::Atoms { dim, points, weights } => MeasureSpec::Atoms {
                dim: *dim,
                points: points.clone(),
                weights: weights.iter().map(|w| C64::from(w.norm())).collect(),
            },
            MeasureSpec::Density(d) => MeasureSpec::Density(d.variation()),
            MeasureSpec::Lebesgue { dim } => MeasureSpec::Lebesgue { dim: *dim },
            MeasureSpec::Horizontal(rho) => MeasureSpec::Horizontal(rho.variation()),
            MeasureSpec::AlphaHorizontal { rho, alpha } => MeasureSpec::AlphaHorizontal {
                rho: rho.variation(),
                alpha: alpha.clone(),
            },
            MeasureSpec::Pushforward { base, x } => MeasureSpec::Pushforward {
                base: Box::new(base.variation()),
                x: x.clone(),
            },
            MeasureSpec::Weighted { base, p } => MeasureSpec::Weighted {
                base: Box::new(base.variation()),
                p: p.clone(),
            },
        }
    }

    /// `μ_p`, kept in normal form: weights merge and a zero exponent vanishes.
    pub fn weight(&self, p: &SignedHalfIndex) -> Result<MeasureSpec> {
        if p.dim() != self.dim() {
            return Err(FockError::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        let (base, q) = match self {
            MeasureSpec::Weighted { base, p: q } => (base.as_ref(), q.add(p)),
            other => (other, p.clone()),
        };
        Ok(if q.is_zero() {
            base.clone()
        } else {
            MeasureSpec::Weighted {
                base: Box::new(base.clone()),
                p: q,
            }
        })
    }

    /// `μ_X` with `∫ g dμ_X = ∫ g(X*w) dμ(w)`.
    pub fn pushforward(&self, x: &DMatrix<C64>) -> Result<MeasureSpec> {
        let n = self.dim();
        if x.nrows() != n || x.ncols() != n {
            return Err(FockError::DimensionMismatch {
                expected: n,
                got: x.nrows().max(x.ncols()),
            });
        }
        check_unitary(x)?;
        if is_identity(x) {
            return Ok(self.clone());
        }
        let xa = x.adjoint();
        Ok(match self {
            MeasureSpec::Atoms { dim, points, weights } => MeasureSpec::Atoms {
                dim: *dim,
                points: points.iter().map(|p| mat_vec(&xa, p)).collect(),
                weights: weights.clone(),
            },
            MeasureSpec::Lebesgue { dim } => MeasureSpec::Lebesgue { dim: *dim },
            MeasureSpec::Density(d) => MeasureSpec::Density(compose_density(d, x)),
            MeasureSpec::Pushforward { base, x: y } => {
                let yx = y * x;
                if is_identity(&yx) {
                    base.as_ref().clone()
                } else {
                    MeasureSpec::Pushforward {
                        base: base.clone(),
                        x: yx,
                    }
                }
            }
            other => MeasureSpec::Pushforward {
                base: Box::new(other.clone()),
                x: x.clone(),
            },
        })
    }

    /// Nodes for `∫ g(w) e^{−rate|w−center|²} dμ(w)`.
    pub fn gauss_nodes(&self, rate: f64, center: &[C64], cfg: &QuadConfig) -> Result<Nodes<C64>> {
        if center.len() != self.dim() {
            return Err(FockError::DimensionMismatch {
                expected: self.dim(),
                got: center.len(),
            });
        }
        let rule = hermite_rule(cfg.moment_order)?;
        let nodes = match self {
            MeasureSpec::Atoms { dim, points, weights } => atoms_gauss_nodes(*dim, points, weights, rate, center),
            MeasureSpec::Density(d) => d.gauss_nodes(rate, center, &rule)?,
            MeasureSpec::Lebesgue { .. } => lebesgue_gauss_nodes(rate, center, &rule),
            MeasureSpec::Horizontal(rho) => horizontal_gauss_nodes(rho, &[], rate, center, cfg)?,
            MeasureSpec::AlphaHorizontal { rho, alpha } => horizontal_gauss_nodes(rho, alpha, rate, center, cfg)?,
            MeasureSpec::Pushforward { base, x } => {
                let xc = mat_vec(x, center);
                map_points(base.gauss_nodes(rate, &xc, cfg)?, &x.adjoint())
            }
            MeasureSpec::Weighted { base, p } => apply_weight(base.gauss_nodes(rate, center, cfg)?, p),
        };
        nodes.check_finite()?;
        Ok(nodes)
    }

    /// `∫ g(w) e^{−rate|w−center|²} dμ(w)`.
    pub fn gaussian_integral(
        &self,
        rate: f64,
        center: &[C64],
        cfg: &QuadConfig,
        g: &(dyn Fn(&[C64]) -> C64 + Sync),
    ) -> Result<C64> {
        Ok(self.gauss_nodes(rate, center, cfg)?.sum(g))
    }

    /// `m_{α,β}(μ) = ∫ w^α w̄^β e^{−|w|²} dμ(w)`.
    pub fn moment(&self, alpha: &MultiIndex, beta: &MultiIndex, cfg: &QuadConfig) -> Result<C64> {
        let m = self.moment_block(std::slice::from_ref(alpha), std::slice::from_ref(beta), cfg)?;
        Ok(m[(0, 0)])
    }

    /// Moment table with entry `(j, i) = m_{α_i, α_j}` over one index list.
    pub fn moment_matrix(&self, indices: &[MultiIndex], cfg: &QuadConfig) -> Result<DMatrix<C64>> {
        self.moment_block(indices, indices, cfg)
    }

    /// Entry `(j, i) = m_{cols_i, rows_j}`.
    pub fn moment_block(&self, cols: &[MultiIndex], rows: &[MultiIndex], cfg: &QuadConfig) -> Result<DMatrix<C64>> {
        let n = self.dim();
        for a in cols.iter().chain(rows) {
            if a.dim() != n {
                return Err(FockError::DimensionMismatch {
                    expected: n,
                    got: a.dim(),
                });
            }
        }
        let nodes = self.gauss_nodes(1.0, &vec![ZERO; n], cfg)?;
        let m = moments_from_nodes(&nodes, cols, rows);
        for j in 0..rows.len() {
            for i in 0..cols.len() {
                if !is_finite(m[(j, i)]) {
                    return Err(FockError::Moment {
                        alpha: cols[i].entries().to_vec(),
                        beta: rows[j].entries().to_vec(),
                        source: Box::new(FockError::NonFinite { node: vec![] }),
                    });
                }
            }
        }
        Ok(m)
    }

    /// Nodes for `μ` restricted to the open polydisk `∏ {|w_j − z_j| < r_j}`.
    pub fn ball_nodes(&self, center: &[C64], r: &[f64], cfg: &QuadConfig) -> Result<Nodes<C64>> {
        let n = self.dim();
        if center.len() != n || r.len() != n {
            return Err(FockError::DimensionMismatch {
                expected: n,
                got: if center.len() != n { center.len() } else { r.len() },
            });
        }
        if r.iter().any(|&rj| rj.is_nan() || rj <= 0.0) {
            return Err(FockError::Domain(format!("ball radii must be positive, got {r:?}")));
        }
        let nodes = match self {
            MeasureSpec::Atoms { dim, points, weights } => atoms_ball_nodes(*dim, points, weights, center, r),
            MeasureSpec::Density(d) => d.ball_nodes(center, r, cfg)?,
            MeasureSpec::Lebesgue { .. } => Nodes::Tensor {
                axes: center
                    .iter()
                    .zip(r)
                    .map(|(&c, &rj)| C64::ball_axis(c, rj, cfg))
                    .collect::<Result<_>>()?,
                scale: ONE,
            },
            MeasureSpec::Horizontal(rho) => horizontal_ball_nodes(rho, &[], center, r, cfg)?,
            MeasureSpec::AlphaHorizontal { rho, alpha } => horizontal_ball_nodes(rho, alpha, center, r, cfg)?,
            MeasureSpec::Pushforward { base, x } => {
                if !is_diagonal(x) {
                    return Err(FockError::Unsupported(
                        "polydisk integrals of a pushforward by a non-diagonal unitary".into(),
                    ));
                }
                // a diagonal unitary maps each coordinate disk onto a disk
                let xc = mat_vec(x, center);
                map_points(base.ball_nodes(&xc, r, cfg)?, &x.adjoint())
            }
            MeasureSpec::Weighted { base, p } => apply_weight(base.ball_nodes(center, r, cfg)?, p),
        };
        nodes.check_finite()?;
        Ok(nodes)
    }

    /// `∫_{P_r(z)} g dμ`.
    pub fn ball_integral(
        &self,
        center: &[C64],
        r: &[f64],
        cfg: &QuadConfig,
        g: &(dyn Fn(&[C64]) -> C64 + Sync),
    ) -> Result<C64> {
        Ok(self.ball_nodes(center, r, cfg)?.sum(g))
    }

    /// `μ(P_r(z))`.
    pub fn ball_mass(&self, center: &[C64], r: &[f64], cfg: &QuadConfig) -> Result<C64> {
        Ok(self.ball_nodes(center, r, cfg)?.total())
    }

    pub fn describe(&self) -> String {
        match self {
            MeasureSpec::Atoms { points, weights, .. } if points.len() == 1 && weights[0] == ONE => {
                format!("dirac({})", fmt_point(&points[0]))
            }
            MeasureSpec::Atoms { points, .. } => format!("atoms[{}]", points.len()),
            MeasureSpec::Density(d) => d.label.clone(),
            MeasureSpec::Lebesgue { dim } => format!("lebesgue(C^{dim})"),
            MeasureSpec::Horizontal(rho) => format!("horizontal({})", rho.describe()),
            MeasureSpec::AlphaHorizontal { rho, alpha } => {
                format!("alpha_horizontal({}, {alpha:?})", rho.describe())
            }
            MeasureSpec::Pushforward { base, .. } => format!("pushforward({})", base.describe()),
            MeasureSpec::Weighted { base, p } => format!("weighted({}, {p})", base.describe()),
        }
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

fn fmt_point(p: &[C64]) -> String {
    let parts: Vec<String> = p.iter().map(|c| format!("{}{:+}i", c.re, c.im)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn mat_vec(x: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|j| x[(i, j)] * v[j]).sum())
        .collect()
}

/// Largest entry of `X*X − I`.
pub fn unitary_deviation(x: &DMatrix<C64>) -> f64 {
    let g = x.adjoint() * x;
    let mut dev: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { ONE } else { ZERO };
            dev = dev.max((g[(i, j)] - target).norm());
        }
    }
    dev
}

pub fn check_unitary(x: &DMatrix<C64>) -> Result<()> {
    if x.nrows() != x.ncols() {
        return Err(FockError::DimensionMismatch {
            expected: x.nrows(),
            got: x.ncols(),
        });
    }
    let deviation = unitary_deviation(x);
    if deviation.is_nan() || deviation > UNITARY_TOL {
        return Err(FockError::NotUnitary { deviation });
    }
    Ok(())
}

fn is_identity(x: &DMatrix<C64>) -> bool {
    (0..x.nrows()).all(|i| {
        (0..x.ncols()).all(|j| {
            let target = if i == j { ONE } else { ZERO };
            (x[(i, j)] - target).norm() <= 1e-15
        })
    })
}

fn is_diagonal(x: &DMatrix<C64>) -> bool {
    (0..x.nrows()).all(|i| (0..x.ncols()).all(|j| i == j || x[(i, j)].norm() <= DIAGONAL_TOL))
}

/// Applies `p ↦ A p` to every node.
fn map_points(nodes: Nodes<C64>, a: &DMatrix<C64>) -> Nodes<C64> {
    if is_diagonal(a) {
        match nodes {
            Nodes::Tensor { mut axes, scale } => {
                for (j, axis) in axes.iter_mut().enumerate() {
                    for (p, _) in axis.iter_mut() {
                        *p *= a[(j, j)];
                    }
                }
                return Nodes::Tensor { axes, scale };
            }
            s => return map_points_dense(s, a),
        }
    }
    map_points_dense(nodes, a)
}

fn map_points_dense(nodes: Nodes<C64>, a: &DMatrix<C64>) -> Nodes<C64> {
    match nodes.into_scattered() {
        Nodes::Scattered { dim, points, weights } => Nodes::Scattered {
            dim,
            points: points.chunks(dim).flat_map(|p| mat_vec(a, p)).collect(),
            weights,
        },
        Nodes::Tensor { .. } => unreachable!(),
    }
}

fn apply_weight(nodes: Nodes<C64>, p: &SignedHalfIndex) -> Nodes<C64> {
    let v = p.values();
    nodes.scale_axes(&|j, w| C64::from(((1.0 + w.re * w.re) * (1.0 + w.im * w.im)).powf(v[j])))
}

fn alpha_factor(alpha: &[i32], j: usize, y: f64) -> f64 {
    match alpha.get(j) {
        Some(&a) if a != 0 => (1.0 + y * y).powi(-a),
        _ => 1.0,
    }
}

/// Joins nodes in the `x` variables with per-axis `y` lists that may
/// depend on the corresponding `x_j`.
fn combine_xy(x_nodes: Nodes<f64>, y_axis: &dyn Fn(usize, f64) -> Vec<(f64, C64)>) -> Nodes<C64> {
    match x_nodes {
        Nodes::Tensor { axes, scale } => Nodes::Tensor {
            axes: axes
                .iter()
                .enumerate()
                .map(|(j, axis)| {
                    let mut out = Vec::new();
                    for &(x, wx) in axis {
                        for (y, wy) in y_axis(j, x) {
                            out.push((C64::new(x, y), wx * wy));
                        }
                    }
                    out
                })
                .collect(),
            scale,
        },
        Nodes::Scattered { dim, points, weights } => {
            let mut flat = Vec::new();
            let mut ws = Vec::new();
            for (xp, &wx) in points.chunks(dim).zip(&weights) {
                let axes = xp
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| y_axis(j, x).into_iter().map(|(y, wy)| (C64::new(x, y), wy)).collect())
                    .collect();
                if let Nodes::Scattered { points, weights, .. } = (Nodes::Tensor { axes, scale: wx }).into_scattered() {
                    flat.extend(points);
                    ws.extend(weights);
                }
            }
            Nodes::Scattered {
                dim,
                points: flat,
                weights: ws,
            }
        }
    }
}

fn horizontal_gauss_nodes(
    rho: &RealMeasure,
    alpha: &[i32],
    rate: f64,
    center: &[C64],
    cfg: &QuadConfig,
) -> Result<Nodes<C64>> {
    let re: Vec<f64> = center.iter().map(|c| c.re).collect();
    let x_nodes = rho.gauss_nodes(rate, &re, cfg.moment_order)?;
    let rule = hermite_rule(cfg.moment_order)?;
    let y_axes: Vec<Vec<(f64, C64)>> = center
        .iter()
        .enumerate()
        .map(|(j, c)| {
            f64::gauss_axis(c.im, rate, &rule)
                .into_iter()
                .map(|(y, w)| (y, w * alpha_factor(alpha, j, y)))
                .collect()
        })
        .collect();
    Ok(combine_xy(x_nodes, &|j, _| y_axes[j].clone()))
}

fn horizontal_ball_nodes(
    rho: &RealMeasure,
    alpha: &[i32],
    center: &[C64],
    r: &[f64],
    cfg: &QuadConfig,
) -> Result<Nodes<C64>> {
    let re: Vec<f64> = center.iter().map(|c| c.re).collect();
    let x_nodes = rho.box_nodes(&re, r, cfg)?;
    let rule = legendre_rule(cfg.ball_radial)?;
    Ok(combine_xy(x_nodes, &|j, x| {
        let dx = x - center[j].re;
        let h = (r[j] * r[j] - dx * dx).max(0.0).sqrt();
        if h == 0.0 {
            return Vec::new();
        }
        rule.iter()
            .map(|(s, w)| {
                let y = center[j].im + h * s;
                (y, C64::from(h * w * alpha_factor(alpha, j, y)))
            })
            .collect()
    }))
}

/// `f_X(u) = f(Xu)`: the density of the pushforward under a unitary.
fn compose_density(d: &Density<C64>, x: &DMatrix<C64>) -> Density<C64> {
    let xa = x.adjoint();
    let gaussian = d.gaussian.as_ref().map(|g| GaussianFactor {
        rate: g.rate,
        center: mat_vec(&xa, &g.center),
    });
    let amplitude = match &d.amplitude {
        Amplitude::One => Amplitude::One,
        Amplitude::Product(fs) if is_diagonal(x) => Amplitude::Product(
            fs.iter()
                .enumerate()
                .map(|(j, f)| {
                    let f = f.clone();
                    let c = x[(j, j)];
                    Arc::new(move |u: C64| f(c * u)) as AxisFn<C64>
                })
                .collect(),
        ),
        other => {
            let amp = other.clone();
            let x = x.clone();
            Amplitude::General(Arc::new(move |u: &[C64]| amp.eval(&mat_vec(&x, u))))
        }
    };
    Density {
        dim: d.dim,
        gaussian,
        amplitude,
        real_valued: d.real_valued,
        label: format!("{}∘X", d.label),
    }
}

const CHUNK: usize = 4096;

/// Moment table from a node set; tensor sets use per-axis power tables.
fn moments_from_nodes(nodes: &Nodes<C64>, cols: &[MultiIndex], rows: &[MultiIndex]) -> DMatrix<C64> {
    let n = nodes.dim();
    let dmax = cols
        .iter()
        .chain(rows)
        .flat_map(|a| a.entries().iter().copied())
        .max()
        .unwrap_or(0) as usize;
    match nodes {
        Nodes::Tensor { axes, scale } => {
            let tables: Vec<DMatrix<C64>> = axes
                .iter()
                .map(|axis| {
                    let mut t = DMatrix::<C64>::zeros(dmax + 1, dmax + 1);
                    let mut pw = vec![ZERO; dmax + 1];
                    for &(w, wt) in axis {
                        pw[0] = ONE;
                        for a in 1..=dmax {
                            pw[a] = pw[a - 1] * w;
                        }
                        for a in 0..=dmax {
                            let wa = wt * pw[a];
                            for b in 0..=dmax {
                                t[(a, b)] += wa * pw[b].conj();
                            }
                        }
                    }
                    t
                })
                .collect();
            DMatrix::from_fn(rows.len(), cols.len(), |j, i| {
                let (a, b) = (cols[i].entries(), rows[j].entries());
                (0..n).fold(*scale, |acc, ax| acc * tables[ax][(a[ax] as usize, b[ax] as usize)])
            })
        }
        Nodes::Scattered { dim, points, weights } => {
            let dim = *dim;
            let partial: Vec<DMatrix<C64>> = points
                .par_chunks(CHUNK * dim)
                .zip(weights.par_chunks(CHUNK))
                .map(|(pts, ws)| {
                    let m = ws.len();
                    let powers = |p: &[C64]| -> Vec<Vec<C64>> {
                        p.iter()
                            .map(|&z| {
                                let mut v = vec![ONE; dmax + 1];
                                for a in 1..=dmax {
                                    v[a] = v[a - 1] * z;
                                }
                                v
                            })
                            .collect()
                    };
                    let mut vc = DMatrix::<C64>::zeros(m, cols.len());
                    let mut vr = DMatrix::<C64>::zeros(m, rows.len());
                    for (k, p) in pts.chunks(dim).enumerate() {
                        let pw = powers(p);
                        let mono = |a: &MultiIndex| {
                            a.entries()
                                .iter()
                                .enumerate()
                                .map(|(ax, &e)| pw[ax][e as usize])
                                .product::<C64>()
                        };
                        for (i, a) in cols.iter().enumerate() {
                            vc[(k, i)] = ws[k] * mono(a);
                        }
                        for (j, b) in rows.iter().enumerate() {
                            vr[(k, j)] = mono(b);
                        }
                    }
                    vr.ad_mul(&vc)
                })
                .collect();
            partial
                .into_iter()
                .fold(DMatrix::zeros(rows.len(), cols.len()), |acc, m| acc + m)
        }
    }
}
