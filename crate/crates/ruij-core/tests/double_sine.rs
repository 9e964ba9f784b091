use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ruij_core::double_sine::*;
use ruij_core::params::{Params, Periods};
use ruij_core::quadrature::QuadratureSpec;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Independent oracle: trapezoid rule in u = ln t on the raw integral
/// representation, with no series and no contour rotation.
fn oracle_log_s2(z: C64, w1: f64, w2: f64) -> C64 {
    let a = z * 2.0 - (w1 + w2);
    let p = w1 * w2;
    let (u_lo, u_hi, steps) = (-9.0f64, 5.5f64, 7250usize);
    let h = (u_hi - u_lo) / steps as f64;
    let mut acc = c(0.0, 0.0);
    for j in 0..=steps {
        let t = (u_lo + j as f64 * h).exp();
        let ratio = (a * t).sinh() / ((w1 * t).sinh() * (w2 * t).sinh());
        let f = (ratio - a / (p * t)) / (2.0 * t);
        let weight = if j == 0 || j == steps { 0.5 * h } else { h };
        acc += f * t * weight;
    }
    // below the first node the integrand is its t → 0 limit a(a²−ω₁²−ω₂²)/(12P);
    // beyond the last node only the −a/(2Pt²) term survives
    let head = a * (a * a - w1 * w1 - w2 * w2) / (12.0 * p) * u_lo.exp();
    acc + head - a / (2.0 * p * u_hi.exp())
}

fn sample_points(seed: u64, count: usize, periods: &Periods) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let r = rng.gen_range(0.1..3.0);
        let th = rng.gen_range(-PI..PI);
        let z = C64::from_polar(r, th);
        let near = (-4..8).any(|m| {
            (-4..8).any(|k| {
                let q = periods.omega1 * m as f64 + periods.omega2 * k as f64;
                (z - q).norm() < 0.05
                    || (periods.sum() - z - q).norm() < 0.05
                    || (z + periods.omega1 - q).norm() < 0.05
                    || (z + periods.omega2 - q).norm() < 0.05
            })
        });
        if !near {
            out.push(z);
        }
    }
    out
}

#[test]
fn strip_values_match_oracle() {
    let spec = QuadratureSpec::with_tolerance(1e-13);
    for (z, w1, w2) in [
        (c(0.7, 0.0), 1.0, 1.0),
        (c(0.4, 0.3), 1.0, 1.7),
        (c(1.1, -0.8), 0.6, 1.3),
        (c(0.9, 2.5), 1.0, 1.0),
    ] {
        let p = Periods::real(w1, w2).unwrap();
        let v = log_s2_strip(z, &p, &spec).unwrap();
        let o = oracle_log_s2(z, w1, w2);
        assert!((v - o).norm() < 1e-8, "z={z}: {v} vs {o}");
    }
}

#[test]
fn first_period_value() {
    // S₂(ω₁|ω₁, ω₂) = √(ω₂/ω₁)
    let p = Periods::real(1.0, 2.0).unwrap();
    let v = log_s2_strip(c(1.0, 0.0), &p, &QuadratureSpec::with_tolerance(1e-13)).unwrap();
    assert!((v - c(0.5 * 2f64.ln(), 0.0)).norm() < 1e-12);
}

#[test]
fn inversion_and_functional_equations_on_sample() {
    for periods in [
        Periods::real(1.0, 1.0).unwrap(),
        Periods::real(1.0, 1.7).unwrap(),
        Periods::new(c(1.0, 0.2), c(1.0, 0.0)).unwrap(),
    ] {
        let w1 = periods.omega1;
        let w2 = periods.omega2;
        for z in sample_points(11, 100, &periods) {
            let s = s2(z, &periods).unwrap();
            let inv = s2(periods.sum() - z, &periods).unwrap();
            assert!((s * inv - 1.0).norm() < 1e-9, "inversion at {z}");
            let s1 = s2(z + w1, &periods).unwrap();
            let lhs = s;
            let rhs = (z * PI / w2).sin() * 2.0 * s1;
            assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(rhs.norm()), "first shift at {z}");
            let s2v = s2(z + w2, &periods).unwrap();
            let rhs = (z * PI / w1).sin() * 2.0 * s2v;
            assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(rhs.norm()), "second shift at {z}");
        }
    }
}

#[test]
fn homogeneity_and_swap() {
    let base = Periods::real(0.5, 1.3).unwrap();
    for z in [c(0.9, 0.0), c(0.3, 0.4), c(-1.2, 0.7), c(2.4, -1.1)] {
        let v = s2(z, &base).unwrap();
        let swapped = s2(z, &base.swapped()).unwrap();
        assert!((v - swapped).norm() < 1e-10 * v.norm());
        for gamma in [0.5, 2.0, 3.7] {
            let scaled = s2(z * gamma, &base.scaled(gamma)).unwrap();
            assert!((v - scaled).norm() < 1e-9 * v.norm(), "γ={gamma}, z={z}");
        }
    }
}

#[test]
fn conjugation_symmetry_real_periods() {
    let p = Periods::real(1.0, 2f64.sqrt()).unwrap();
    for z in sample_points(5, 30, &p) {
        let a = s2(z.conj(), &p).unwrap();
        let b = s2(z, &p).unwrap().conj();
        assert!((a - b).norm() < 1e-10 * a.norm().max(1e-300));
    }
}

#[test]
fn residue_at_origin_by_limit() {
    // z/S₂(z) → √(ω₁ω₂)/(2π)
    let p = Params::real(1.0, 2f64.sqrt(), 0.5).unwrap();
    let per = p.periods();
    let target = s2_residue(
        PoleZeroIndex {
            m: 0,
            k: 0,
            kind: PoleZeroKind::Zero,
        },
        &p,
    )
    .unwrap();
    // Richardson on h ↦ h/S₂(h), odd-symmetric error in h removed by averaging ±h
    let f = |h: f64| {
        let z = c(h, 0.0);
        let zm = c(-h, 0.0);
        0.5 * (z / s2(z, &per).unwrap() + zm / s2(zm, &per).unwrap())
    };
    let h = 1e-3;
    let est = (f(h) * 4.0 - f(2.0 * h)) / 3.0;
    assert!((est - target).norm() < 1e-8, "{est} vs {target}");
}

#[test]
fn residue_at_pole_by_limit() {
    let p = Params::real(1.0, 2f64.sqrt(), 0.5).unwrap();
    let per = p.periods();
    let z0 = per.sum();
    let target = s2_residue(
        PoleZeroIndex {
            m: 1,
            k: 1,
            kind: PoleZeroKind::Pole,
        },
        &p,
    )
    .unwrap();
    let f = |h: f64| {
        let a = c(h, 0.0) * s2(z0 + h, &per).unwrap();
        let b = c(-h, 0.0) * s2(z0 - h, &per).unwrap();
        0.5 * (a + b)
    };
    let h = 1e-3;
    let est = (f(h) * 4.0 - f(2.0 * h)) / 3.0;
    assert!((est - target).norm() < 1e-8, "{est} vs {target}");
}

#[test]
fn asymptotic_sign_follows_half_plane() {
    let p = Params::real(1.0, 1.0, 0.5).unwrap();
    let up = s2_asymptotic(c(10.0, 2.0), &p).unwrap();
    let down = s2_asymptotic(c(10.0, -2.0), &p).unwrap();
    // exp(−πiĝ(z − g*/2)) grows with Im z, exp(+πiĝ(z − g*/2)) with −Im z
    assert!((up.norm() - (PI).exp()).abs() < 1e-9);
    assert!((down.norm() - (PI).exp()).abs() < 1e-9);
    let expect = (c(0.0, -PI * 0.5) * (c(10.0, 2.0) - 0.75)).exp();
    assert!((up - expect).norm() < 1e-12 * expect.norm());
}

#[test]
fn asymptotic_ratio() {
    let p = Params::real(1.0, 1.0, 0.5).unwrap();
    let per = p.periods();
    for z in [c(10.0, 1.5), c(-10.0, 1.5), c(10.0, -2.0), c(-10.0, -2.0), c(0.0, 6.0)] {
        let exact = s2(z, &per).unwrap() / s2(z + p.g, &per).unwrap();
        let asym = s2_asymptotic(z, &p).unwrap();
        assert!((exact / asym - 1.0).norm() < 0.02, "z={z}: {exact} vs {asym}");
    }
    assert!(matches!(
        s2_asymptotic(c(10.0, 0.1), &p),
        Err(S2Error::ConeProximity { .. })
    ));
}

#[test]
fn reflected_ratio_identity() {
    // R(z)/R(−z−g) = sin(πz/ω₁)sin(πz/ω₂) / (sin(π(z+g)/ω₁)sin(π(z+g)/ω₂)), R = S₂(·)/S₂(·+g)
    let p = Params::real(1.0, 1.3, 0.5).unwrap();
    let per = p.periods();
    let ratio = |z: C64| s2(z, &per).unwrap() / s2(z + p.g, &per).unwrap();
    let sines = |z: C64| (z * PI / per.omega1).sin() * (z * PI / per.omega2).sin();
    for z in [c(6.45, 0.0), c(-2.25, 0.0), c(3.1, 0.7)] {
        let lhs = ratio(z) / ratio(-z - p.g);
        let rhs = sines(z) / sines(z + p.g);
        assert!((lhs - rhs).norm() < 1e-9 * rhs.norm(), "z={z}: {lhs} vs {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inversion_property(re in -2.5f64..4.5, im in -3.0f64..3.0, w2 in 0.6f64..2.0) {
        let p = Periods::real(1.0, w2).unwrap();
        let z = c(re, im);
        prop_assume!(im.abs() > 0.05);
        let a = s2(z, &p).unwrap();
        let b = s2(p.sum() - z, &p).unwrap();
        prop_assert!((a * b - 1.0).norm() < 1e-9);
    }

    #[test]
    fn shift_count_bounded(re in -20.0f64..20.0, im in -2.0f64..2.0) {
        let p = Periods::real(1.0, 1.3).unwrap();
        prop_assume!(im.abs() > 0.05);
        let e = s2_eval(c(re, im), &p).unwrap();
        prop_assert!(e.shifts <= 20);
    }
}
