//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Run with `cargo test --test acceptance`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use fock_lab::basis::{derivative_at, derivative_bound, kernel_coefficients, weyl_apply, BasisSet, FockVector};
use fock_lab::carleson::{carleson_constant, weight_shift, ScanWindow};
use fock_lab::index::{HalfIndex, MultiIndex};
use fock_lab::lagrangian::{l_diagonalization_residual, validate_rotation, LagrangianFrame};
use fock_lab::measures::{Amplitude, AxisFn, Density, MeasureSpec, RealMeasure};
use fock_lab::quadrature::QuadConfig;
use fock_lab::spectral::{diagonalization_residual, hermite_gaussian_moment};
use fock_lab::toeplitz::{assemble_toeplitz, berezin_measure_unfactored, max_abs, y_variation, OperatorMatrix};
use fock_lab::Complex64 as C64;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = fock_lab::Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn cfg() -> QuadConfig {
    QuadConfig::default()
}

fn basis(n: usize, d: u32) -> Arc<BasisSet> {
    Arc::new(BasisSet::new(n, d).expect("basis fits"))
}

fn gallery() -> Vec<(&'static str, RealMeasure)> {
    vec![
        ("dirac(0)", RealMeasure::dirac(vec![0.0])),
        ("dirac(0.7)", RealMeasure::dirac(vec![0.7])),
        ("gaussian(1)", RealMeasure::gaussian(1, 1.0).expect("valid width")),
        (
            "atoms(-0.4:0.3, 0.9:0.7)",
            RealMeasure::atoms(vec![vec![-0.4], vec![0.9]], vec![c(0.3, 0.0), c(0.7, 0.0)]).expect("valid atoms"),
        ),
    ]
}

fn identity_symbol() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (n, d) in [(1, 16), (2, 8)] {
        let b = basis(n, d);
        let t = assemble_toeplitz(&MeasureSpec::lebesgue(n), &b, &cfg())?;
        let e = t.max_diff(&OperatorMatrix::identity(b.clone()));
        worst = worst.max(e);
        parts.push(format!("n={n} D={d}: {e:.2e}"));
    }
    Ok((worst <= 1e-10, format!("{} (tol 1e-10)", parts.join(", "))))
}

fn hermite_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 1..=3u32 {
        for u in [0.5, 1.0, 2.0] {
            let got = hermite_gaussian_moment(2 * k, u, 40)?;
            let expect = PI.sqrt() * (2.0 * u).powi(2 * k as i32);
            worst = worst.max(((got - expect) / expect).abs());
        }
    }
    Ok((worst <= 1e-8, format!("max relative error {worst:.2e} (tol 1e-8)")))
}

fn horizontal_diagonalization() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, rho) in gallery() {
        let mu = MeasureSpec::horizontal(rho);
        let k = HalfIndex::zeros(1);
        let r10 = diagonalization_residual(&mu, &k, &basis(1, 10), &cfg())?.residual;
        let r14 = diagonalization_residual(&mu, &k, &basis(1, 14), &cfg())?.residual;
        pass &= r10 <= 1e-5 && r14 < r10;
        parts.push(format!("{name}: D10 {r10:.2e}, D14 {r14:.2e}"));
    }
    Ok((pass, format!("{} (tol 1e-5, D14 < D10)", parts.join("; "))))
}

fn coderivative_diagonalization() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, rho) in gallery() {
        let mu = MeasureSpec::horizontal(rho);
        let r = diagonalization_residual(&mu, &HalfIndex::from_doubled(vec![2]), &basis(1, 12), &cfg())?.residual;
        worst = worst.max(r);
        parts.push(format!("{name}: {r:.2e}"));
    }
    Ok((worst <= 1e-5, format!("2k=2, D=12: {} (tol 1e-5)", parts.join(", "))))
}

fn horizontality() -> Outcome {
    let axis = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let xs: Vec<Vec<f64>> = axis.iter().map(|&x| vec![x]).collect();
    let ys = xs.clone();
    let mut worst: f64 = 0.0;
    for (_, rho) in gallery() {
        let mu = MeasureSpec::horizontal(rho);
        worst = worst.max(y_variation(&|z| berezin_measure_unfactored(&mu, z, &cfg()), &xs, &ys)?);
    }
    let off = MeasureSpec::dirac(vec![c(0.3, 0.4)]);
    let detected = y_variation(&|z| berezin_measure_unfactored(&off, z, &cfg()), &xs, &ys)?;
    Ok((
        worst <= 1e-10 && detected >= 1e-2,
        format!("horizontal y-variation {worst:.2e} (tol 1e-10); off-axis atom {detected:.2e} (need >= 1e-2)"),
    ))
}

fn commutativity() -> Outcome {
    let b = basis(1, 16);
    let t1 = assemble_toeplitz(&MeasureSpec::horizontal(RealMeasure::dirac(vec![0.0])), &b, &cfg())?;
    let t2 = assemble_toeplitz(&MeasureSpec::horizontal(RealMeasure::gaussian(1, 1.0)?), &b, &cfg())?;
    let t3 = assemble_toeplitz(&MeasureSpec::dirac(vec![c(0.3, 0.4)]), &b, &cfg())?;
    let both = max_abs(&t1.commutator(&t2).interior_block());
    let mixed = max_abs(&t1.commutator(&t3).interior_block());
    Ok((
        both <= 1e-6 && mixed >= 1e-3,
        format!("horizontal pair {both:.2e} (tol 1e-6); horizontal vs off-axis atom {mixed:.2e} (need >= 1e-3)"),
    ))
}

fn norm_vs_sup() -> Outcome {
    let target = (2.0 / PI).sqrt();
    let mu = MeasureSpec::horizontal(RealMeasure::dirac(vec![0.0]));
    let mut gaps = Vec::new();
    for d in [8, 12, 16] {
        let t = assemble_toeplitz(&mu, &basis(1, d), &cfg())?;
        gaps.push((t.norm2() - target).abs());
    }
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok((
        gaps[2] <= 0.02 && monotone,
        format!(
            "|norm - sqrt(2/pi)| at D=8,12,16: {:.4}, {:.4}, {:.4} (tol 0.02 at D=16, monotone {monotone})",
            gaps[0], gaps[1], gaps[2]
        ),
    ))
}

fn inverse_weight_density() -> MeasureSpec {
    let f: AxisFn<C64> = Arc::new(|w: C64| c(1.0 / ((1.0 + w.re * w.re) * (1.0 + w.im * w.im)), 0.0));
    MeasureSpec::Density(Density {
        dim: 1,
        gaussian: None,
        amplitude: Amplitude::Product(vec![f]),
        real_valued: true,
        label: "(1+x²)^{-1}(1+y²)^{-1}".into(),
    })
}

fn carleson_constants() -> Outcome {
    let w = ScanWindow::new(2.0, 0.5)?;
    let leb = carleson_constant(&MeasureSpec::lebesgue(1), &HalfIndex::zeros(1), &[1.0], w, &cfg())?.sup_estimate;
    let weighted = carleson_constant(
        &inverse_weight_density(),
        &HalfIndex::from_doubled(vec![2]),
        &[1.0],
        w,
        &cfg(),
    )?
    .sup_estimate;
    let (e0, e1) = ((leb - PI).abs(), (weighted - leb).abs());
    Ok((
        e0 <= 1e-9 && e1 <= 1e-8,
        format!("C_0(lebesgue) - pi = {e0:.2e} (tol 1e-9); C_1(inverse weight) - C_0(lebesgue) = {e1:.2e} (tol 1e-8)"),
    ))
}

fn weight_shift_identity() -> Outcome {
    let w = ScanWindow::new(2.0, 0.5)?;
    let cases = [
        ("gaussian(1.5)", MeasureSpec::gaussian(1, 1.5)?, 4, 2),
        ("gaussian(1.5)", MeasureSpec::gaussian(1, 1.5)?, 2, 1),
        ("dirac(0.3+0.4i)", MeasureSpec::dirac(vec![c(0.3, 0.4)]), 4, 2),
        ("inverse weight", inverse_weight_density(), 2, 1),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, mu, k2, p2) in cases {
        let r = weight_shift(
            &mu,
            &HalfIndex::from_doubled(vec![k2]),
            &HalfIndex::from_doubled(vec![p2]),
            &[1.0],
            w,
            &cfg(),
        )?;
        let tol = 1e-9 * r.c_k.max(1.0);
        pass &= !r.holding(tol).is_empty();
        parts.push(format!(
            "{name} k={} p={}: stated A {:.2e}, B {:.2e}; Gamma-reduced A {:.2e}, B {:.2e}",
            r.k, r.p, r.residual_a, r.residual_b, r.reduced_residual_a, r.reduced_residual_b
        ));
    }
    Ok((pass, format!("{} (tol 1e-9)", parts.join("; "))))
}

fn lagrangian_pipeline() -> Outcome {
    let n = 2;
    let scalar = |s: C64| DMatrix::<C64>::identity(n, n) * s;
    let lx: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut v = vec![0.0; 2 * n];
            v[j] = 1.0;
            v
        })
        .collect();
    let diag: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut v = vec![0.0; 2 * n];
            v[j] = 1.0;
            v[n + j] = 1.0;
            v
        })
        .collect();
    let lx_check = validate_rotation(&lx, &scalar(c(0.0, -1.0)))?;
    let stated = scalar(c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2));
    let literal = validate_rotation(&diag, &stated)?;
    let adjoint = validate_rotation(&diag, &stated.adjoint())?;

    let f: AxisFn<C64> = Arc::new(|w: C64| c((-w.im * w.im).exp(), 0.0));
    let mu = MeasureSpec::Density(Density {
        dim: 1,
        gaussian: None,
        amplitude: Amplitude::Product(vec![f]),
        real_valued: true,
        label: "e^{-y²}".into(),
    });
    let frame = LagrangianFrame::new(vec![vec![1.0, 0.0]])?;
    let rho = RealMeasure::gaussian(1, 1.0)?;
    let mut diag_res: f64 = 0.0;
    for d in [0, 2] {
        let r = l_diagonalization_residual(
            &mu,
            &rho,
            &HalfIndex::from_doubled(vec![d]),
            &frame,
            &basis(1, 10),
            &cfg(),
        )?;
        diag_res = diag_res.max(r.residual);
    }
    let pass = lx_check.valid && literal.valid && diag_res <= 1e-5;
    Ok((
        pass,
        format!(
            "L_x with -iI valid {} (unitary dev {:.1e}, max Re {:.1e}); diagonal plane with (I - iI)/sqrt2 valid {} \
             (max Re {:.2e}), its adjoint valid {}; plane-real coderivative residual {diag_res:.2e} (tol 1e-5)",
            lx_check.valid,
            lx_check.unitary_deviation,
            lx_check.max_real_part,
            literal.valid,
            literal.max_real_part,
            adjoint.valid
        ),
    ))
}

fn derivative_estimate() -> Outcome {
    let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let count = |n: usize, d: u32, ks: &[MultiIndex]| -> (usize, usize, f64) {
        let b = basis(n, d);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (mut violations, mut total, mut worst) = (0, 0, 0.0f64);
        let points: Vec<Vec<C64>> = match n {
            1 => grid
                .iter()
                .flat_map(|&x| grid.iter().map(move |&y| vec![c(x, y)]))
                .collect(),
            _ => grid
                .iter()
                .flat_map(|&x| grid.iter().map(move |&y| vec![c(x, 0.0), c(0.0, y)]))
                .collect(),
        };
        for _ in 0..200 {
            let f = FockVector::random_unit(&b, &mut rng);
            for z in &points {
                for k in ks {
                    let q = derivative_at(&f, k, z, &b).norm() / derivative_bound(k, z);
                    worst = worst.max(q);
                    violations += usize::from(q > 1.0);
                    total += 1;
                }
            }
        }
        (violations, total, worst)
    };
    let ks1: Vec<MultiIndex> = (0..=3).map(|k| MultiIndex::new(vec![k])).collect();
    let (v1, t1, w1) = count(1, 16, &ks1);
    let ks2 = vec![
        MultiIndex::zeros(2),
        MultiIndex::new(vec![1, 0]),
        MultiIndex::new(vec![1, 1]),
    ];
    let (v2, t2, w2) = count(2, 8, &ks2);
    println!("  info: n=2 (D=8) with the stated constant: {v2} violations of {t2} samples, max ratio {w2:.3}");
    Ok((
        v1 == 0,
        format!("n=1, D=16, k=0..3: {v1} violations of {t1} samples (200 vectors x 25 points), max ratio {w1:.3}"),
    ))
}

fn weyl_covariance() -> Outcome {
    let mut worst: f64 = 0.0;
    let hs = [c(0.5, 0.0), c(0.0, -0.5), c(0.3, 0.4), c(-0.25, 0.1)];
    let zs = [c(0.0, 0.0), c(0.3, -0.2), c(-0.5, 0.4)];
    for n in [1usize, 2] {
        let b = basis(n, 16);
        for (i, &h0) in hs.iter().enumerate() {
            for &z0 in &zs {
                let h: Vec<C64> = (0..n)
                    .map(|j| if j == 0 { h0 } else { hs[(i + 1) % hs.len()] * 0.5 })
                    .collect();
                let z: Vec<C64> = (0..n).map(|j| if j == 0 { z0 } else { z0.conj() }).collect();
                let lhs = weyl_apply(&kernel_coefficients(&z, &b), &h, &b)?;
                let zh: Vec<C64> = z.iter().zip(&h).map(|(a, b)| a + b).collect();
                let dot: C64 = z.iter().zip(&h).map(|(a, b)| a.conj() * b).sum();
                let hh: f64 = h.iter().map(|x| x.norm_sqr()).sum();
                let rhs = kernel_coefficients(&zh, &b).coeffs * (-dot - 0.5 * hh).exp();
                worst = worst.max((lhs.coeffs - rhs).iter().map(|d| d.norm()).fold(0.0, f64::max));
            }
        }
    }
    Ok((
        worst <= 1e-8,
        format!("max coefficient residual {worst:.2e} over |h| <= 0.5, D=16 (tol 1e-8)"),
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("identity symbol assembles to the identity", identity_symbol),
        ("Hermite Gaussian moment identity", hermite_identity),
        ("horizontal symbols diagonalize", horizontal_diagonalization),
        (
            "real coderivatives of horizontal symbols diagonalize",
            coderivative_diagonalization,
        ),
        ("Berezin transform detects horizontality", horizontality),
        ("horizontal symbols commute", commutativity),
        ("norm approaches the spectral supremum", norm_vs_sup),
        ("Carleson constants", carleson_constants),
        ("weight-shift identity for Carleson constants", weight_shift_identity),
        ("Lagrangian rotation and diagonalization", lagrangian_pipeline),
        ("pointwise derivative estimate", derivative_estimate),
        ("Weyl operators move reproducing kernels", weyl_covariance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("{} {:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
