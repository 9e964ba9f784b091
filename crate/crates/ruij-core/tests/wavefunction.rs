use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ruij_core::kernels::{kernel_k, norm_d, KernelContext};
use ruij_core::params::Params;
use ruij_core::quadrature::{integrate_1d, Envelope, QuadratureSpec};
use ruij_core::wavefunction::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn ctx(w1: f64, w2: f64, g: f64) -> KernelContext {
    KernelContext::new(Params::real(w1, w2, g).unwrap()).unwrap()
}

fn psi_real(k: &KernelContext, l: &[f64], x: &[f64], tol: f64) -> PsiValue {
    psi(
        &SpectralVector::real(l),
        &CoordinateVector::new(x).unwrap(),
        k,
        &QuadratureSpec::with_tolerance(tol),
    )
    .unwrap()
}

/// Ψ₂ by adaptive Gauss-Kronrod on the defining one-dimensional integral.
fn psi2_oracle(k: &KernelContext, l: [f64; 2], x: [f64; 2]) -> C64 {
    let f = |y: f64| {
        kernel_k(c(x[0] - y, 0.0), k).unwrap()
            * kernel_k(c(x[1] - y, 0.0), k).unwrap()
            * c(0.0, 2.0 * PI * (l[0] - l[1]) * y).exp()
    };
    let env = Envelope::new(0.5 * (x[0] + x[1]), 2.0 * k.kernel_rate(), k.kernel_bound.powi(2))
        .with_frequency(l[0] - l[1]);
    let inner = integrate_1d(&f, &env, &QuadratureSpec::with_tolerance(1e-12)).unwrap().value;
    norm_d(1, k).unwrap() * c(0.0, 2.0 * PI * l[1] * (x[0] + x[1])).exp() * inner
}

#[test]
fn psi2_matches_adaptive_oracle() {
    for k in [ctx(1.0, 1.0, 0.5), ctx(0.3, 1.0, 0.4), ctx(1.0, 1.7, 1.1)] {
        for (l, x) in [([0.3, -0.2], [0.7, 0.1]), ([1.0, 0.0], [-1.2, 2.3]), ([0.0, 0.0], [0.0, 0.0])] {
            let got = psi_real(&k, &l, &x, 1e-9);
            let want = psi2_oracle(&k, l, x);
            assert!(
                (got.value - want).norm() < 1e-8 * want.norm().max(1e-3),
                "{:?} λ={l:?} x={x:?}: {} vs {want}",
                k.params.g,
                got.value
            );
            // the estimate must bound the deviation from a much finer lattice
            let fine = psi_real(&k, &l, &x, 1e-13).value;
            assert!((got.value - fine).norm() <= got.error_estimate.max(1e-15), "{:?} {l:?} {x:?} diff {} est {}", k.params.g, (got.value - fine).norm(), got.error_estimate);
        }
    }
}

#[test]
fn psi2_at_complex_coordinates_matches_oracle() {
    // analytic continuation in x: rows are evaluated off the real axis
    let k = ctx(0.3, 1.0, 0.4);
    let x = [c(0.4, -0.3), c(-0.2, 0.0)];
    let l = [c(0.5, 0.0), c(-0.1, 0.0)];
    let got = psi_complex(&k, &l, &x, &QuadratureSpec::with_tolerance(1e-9)).unwrap();
    let f = |y: f64| {
        kernel_k(x[0] - y, &k).unwrap()
            * kernel_k(x[1] - y, &k).unwrap()
            * c(0.0, 2.0 * PI * 0.6 * y).exp()
    };
    let env = Envelope::new(0.1, 2.0 * k.kernel_rate(), 10.0).with_frequency(0.6);
    let inner = integrate_1d(&f, &env, &QuadratureSpec::with_tolerance(1e-12)).unwrap().value;
    let want = norm_d(1, &k).unwrap() * (c(0.0, 2.0 * PI) * l[1] * (x[0] + x[1])).exp() * inner;
    assert!((got.value - want).norm() < 1e-8 * want.norm(), "{} vs {want}", got.value);
}

#[test]
fn n2_symmetric_in_spectral_variables() {
    let k = ctx(1.0, 1.3, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let l = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let a = psi_real(&k, &l, &x, 1e-9);
        let b = psi_real(&k, &[l[1], l[0]], &x, 1e-9);
        let scale = a.value.norm().max(1e-6);
        assert!((a.value - b.value).norm() < 10.0 * 1e-9 * scale.max(1.0), "λ={l:?} x={x:?}");
        let s = psi_real(&k, &l, &[x[1], x[0]], 1e-9);
        assert!((a.value - s.value).norm() < 1e-12 * scale.max(1.0));
    }
}

#[test]
fn n3_permutation_invariance() {
    let k = ctx(1.0, 1.0, 0.5);
    let tol = 1e-7;
    let l = [0.35, -0.2, 0.1];
    let x = [0.4, -0.5, 1.1];
    let base = psi_real(&k, &l, &x, tol).value;
    assert!(base.norm() > 1e-4, "Ψ₃ unexpectedly small: {base}");
    for perm in [[1, 0, 2], [2, 1, 0], [0, 2, 1], [1, 2, 0]] {
        let lp: Vec<f64> = perm.iter().map(|&i| l[i]).collect();
        let v = psi_real(&k, &lp, &x, tol).value;
        assert!((v - base).norm() < 10.0 * tol * base.norm().max(1.0), "λ perm {perm:?}: {v} vs {base}");
        let xp: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let v = psi_real(&k, &l, &xp, tol).value;
        assert!((v - base).norm() < 10.0 * tol * base.norm().max(1.0), "x perm {perm:?}");
    }
}

#[test]
fn shift_identity() {
    let k = ctx(1.0, 1.3, 0.5);
    let l = [0.25, -0.4];
    let x = [0.3, -0.9];
    let base = psi_real(&k, &l, &x, 1e-9).value;
    for s in [0.1, 1.0] {
        let shifted = psi_real(&k, &[l[0] + s, l[1] + s], &x, 1e-9).value;
        let expect = base * c(0.0, 2.0 * PI * s * (x[0] + x[1])).exp();
        assert!((shifted - expect).norm() < 1e-9 * base.norm().max(1.0));
    }
}

#[test]
fn reflection_and_conjugation() {
    let k = ctx(1.0, 1.3, 0.5);
    let l = [0.25, -0.4];
    let x = [0.3, -0.9];
    let v = psi_real(&k, &l, &x, 1e-9).value;
    let neg_l = psi_real(&k, &[-l[0], -l[1]], &x, 1e-9).value;
    let neg_x = psi_real(&k, &l, &[-x[0], -x[1]], 1e-9).value;
    assert!((neg_l - neg_x).norm() < 1e-9 * v.norm().max(1.0));
    assert!((neg_l - v.conj()).norm() < 1e-9 * v.norm().max(1.0));
}

#[test]
fn duality_reference_point() {
    let k = ctx(1.0, 1.0, 0.5);
    let l = SpectralVector::real(&[0.3, -0.2]);
    let x = CoordinateVector::new(&[0.7, 0.1]).unwrap();
    let spec = QuadratureSpec::with_tolerance(1e-9);
    let a = psi(&l, &x, &k, &spec).unwrap();
    let b = psi_dual(&l, &x, &k, &spec).unwrap();
    assert!((a.value - b.value).norm() < 1e-4 * a.value.norm(), "{} vs {}", a.value, b.value);
}

#[test]
fn duality_asymmetric_periods() {
    let k = ctx(0.7, 1.3, 0.6);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let spec = QuadratureSpec::with_tolerance(1e-9);
    for _ in 0..3 {
        let l = SpectralVector::real(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let x = CoordinateVector::new(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).unwrap();
        let a = psi(&l, &x, &k, &spec).unwrap().value;
        let b = psi_dual(&l, &x, &k, &spec).unwrap().value;
        assert!((a - b).norm() < 1e-4 * a.norm(), "{a} vs {b}");
    }
}

#[test]
fn n4_monte_carlo_smoke() {
    let k = ctx(1.0, 1.0, 0.5);
    let l = [0.2, -0.1, 0.05, 0.3];
    let x = [0.1, -0.2, 0.3, 0.0];
    let mut spec = QuadratureSpec::with_tolerance(1e-2);
    spec.seed = 9;
    let a = psi(&SpectralVector::real(&l), &CoordinateVector::new(&x).unwrap(), &k, &spec).unwrap();
    assert!(a.value.norm().is_finite() && a.error_estimate.is_finite());
    let again = psi(&SpectralVector::real(&l), &CoordinateVector::new(&x).unwrap(), &k, &spec).unwrap();
    assert_eq!(a, again, "seeded Monte Carlo must be reproducible");
    assert!(matches!(
        psi(&SpectralVector::real(&[0.0; 5]), &CoordinateVector::new(&[0.0; 5]).unwrap(), &k, &spec),
        Err(WaveError::DimensionTooLarge(5))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn n2_lambda_swap_property(l1 in -1.0f64..1.0, l2 in -1.0f64..1.0, x1 in -2.0f64..2.0, x2 in -2.0f64..2.0) {
        let k = ctx(1.0, 1.0, 0.5);
        let a = psi_real(&k, &[l1, l2], &[x1, x2], 1e-9).value;
        let b = psi_real(&k, &[l2, l1], &[x1, x2], 1e-9).value;
        prop_assert!((a - b).norm() < 1e-8 * a.norm().max(1.0));
    }
}
