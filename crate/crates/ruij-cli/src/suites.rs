//! The registry of named verification suites.
//!
//! A suite runs a fixed list of checks and returns one report per check. A
//! check that cannot be evaluated (for example a contour violation under a
//! user-supplied parameter set) becomes a failing report carrying the error.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ruij_core::double_sine::{s2, s2_residue, PoleZeroIndex, PoleZeroKind};
use ruij_core::inequalities;
use ruij_core::integrals::{self, RegularizationSchedule, TestFunction};
use ruij_core::kernels::{kernel_fourier, kernel_k, measure_mu, KernelContext};
use ruij_core::operators::{
    baxter_eigen_check, dual_baxter_eigen_check, dual_macdonald_eigen_check, gauge_conjugation_check,
    macdonald_eigen_check,
};
use ruij_core::params::{Params, Periods};
use ruij_core::quadrature::{integrate_1d, Envelope, QuadratureSpec};
use ruij_core::report::VerificationReport;
use ruij_core::wavefunction::{psi, psi_dual, CoordinateVector, SpectralVector};

use crate::config::{Preset, PRESETS, REAL_ASYMM, REAL_SYMM};
use crate::CliError;

/// Every suite name accepted by `verify`, in the order `all` runs them.
pub const SUITES: [&str; 10] = [
    "s2-identities",
    "kernel-bounds",
    "fourier",
    "basic-integrals",
    "eigen-macdonald",
    "eigen-baxter",
    "duality",
    "delta-sequence",
    "plancherel",
    "inequalities",
];

/// Tolerance of the double sine identities on random samples.
pub const S2_IDENTITY_TOL: f64 = 1e-9;
/// Tolerance of the residue limit at the origin.
pub const RESIDUE_TOL: f64 = 1e-8;
/// Tolerance of the kernel Fourier transform check.
pub const FOURIER_TOL: f64 = 1e-8;
/// Relative tolerance on fitted decay and growth rates.
pub const RATE_TOL: f64 = 1e-2;
/// Tolerance of the duality check.
pub const DUALITY_TOL: f64 = 1e-4;
/// Tolerance of the gauge equivalence check.
pub const GAUGE_TOL: f64 = 1e-8;
/// Tolerance on the extrapolated limit when λ is off the support of φ.
pub const OFF_SUPPORT_TOL: f64 = 1e-6;
/// Tolerances of the basic integrals and their recurrences.
pub const INTEGRAL_TOL_N1: f64 = 1e-8;
pub const INTEGRAL_TOL_N2: f64 = 1e-5;
pub const RECURRENCE_TOL: f64 = 1e-5;

/// Default sample count per inequality property.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Overrides shared by all suites.
#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Replaces the shipped parameter sets of every suite.
    pub params: Option<Params>,
    /// Replaces the per-check quadrature settings.
    pub quadrature: Option<QuadratureSpec>,
    pub seed: u64,
    /// Restricts the inequality suite to one n.
    pub n: Option<usize>,
    pub samples: Option<usize>,
}

impl SuiteOptions {
    fn param_sets(&self, defaults: &[Preset]) -> Vec<Params> {
        match self.params {
            Some(p) => vec![p],
            None => defaults.iter().map(Preset::params).collect(),
        }
    }

    fn spec(&self, tolerance: f64) -> QuadratureSpec {
        self.quadrature.unwrap_or_else(|| QuadratureSpec::with_tolerance(tolerance))
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream)
    }
}

/// Runs one suite, or every suite for "all".
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<Vec<VerificationReport>, CliError> {
    if name == "all" {
        let mut out = Vec::new();
        for s in SUITES {
            out.extend(run_suite(s, opts)?);
        }
        return Ok(out);
    }
    let reports = match name {
        "s2-identities" => s2_identities(opts),
        "kernel-bounds" => kernel_bounds(opts),
        "fourier" => fourier(opts),
        "basic-integrals" => basic_integrals(opts),
        "eigen-macdonald" => eigen_macdonald(opts),
        "eigen-baxter" => eigen_baxter(opts),
        "duality" => duality(opts),
        "delta-sequence" => delta_sequence(opts),
        "plancherel" => plancherel(opts),
        "inequalities" => inequality_suite(opts)?,
        other => return Err(CliError::UnknownSuite(other.to_string())),
    };
    Ok(reports)
}

pub fn params_label(p: &Params) -> String {
    let f = |z: C64| {
        if z.im == 0.0 {
            format!("{}", z.re)
        } else {
            format!("{}{:+}i", z.re, z.im)
        }
    };
    format!("omega1={} omega2={} g={}", f(p.omega1), f(p.omega2), f(p.g))
}

/// Runs a check, turning an error into a failing report, and tags the parameters.
fn guarded<E: std::fmt::Display>(
    name: &str,
    n: usize,
    tolerance: f64,
    p: Option<&Params>,
    check: impl FnOnce() -> Result<VerificationReport, E>,
) -> VerificationReport {
    let started = Instant::now();
    let mut rep = match check() {
        Ok(r) => r,
        Err(e) => VerificationReport::new(name, n, f64::NAN, tolerance, started).with_meta("error", e),
    };
    if let Some(p) = p {
        rep.metadata.entry("params".into()).or_insert_with(|| params_label(p));
    }
    rep
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    // NaN propagates so that a broken evaluation fails the check
    values.into_iter().fold(0.0, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
}

// ---------------------------------------------------------------------------

/// Random points in the annulus 0.1 < |z| < 3 kept 0.05 away from zeros and
/// poles of S₂(z), S₂(ω₁+ω₂−z) and the shifted values used below.
fn s2_sample(rng: &mut ChaCha8Rng, count: usize, per: &Periods) -> Vec<C64> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let z = C64::from_polar(rng.gen_range(0.1..3.0), rng.gen_range(-PI..PI));
        let near = (-4..8).any(|m| {
            (-4..8).any(|k| {
                let q = per.omega1 * m as f64 + per.omega2 * k as f64;
                [z, per.sum() - z, z + per.omega1, z + per.omega2]
                    .iter()
                    .any(|w| (w - q).norm() < 0.05)
            })
        });
        if !near {
            out.push(z);
        }
    }
    out
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

fn s2_identities(opts: &SuiteOptions) -> Vec<VerificationReport> {
    let mut out = Vec::new();
    for (i, p) in opts.param_sets(&PRESETS).iter().enumerate() {
        let per = p.periods();
        let pts = s2_sample(&mut opts.rng(100 + i as u64), 100, &per);
        let (w1, w2) = (per.omega1, per.omega2);
        let sample_meta = |r: VerificationReport| r.with_meta("samples", pts.len());
        out.push(guarded("s2-inversion", 1, S2_IDENTITY_TOL, Some(p), || {
            let t = Instant::now();
            let r = pts
                .iter()
                .map(|&z| Ok((s2(z, &per)? * s2(per.sum() - z, &per)? - 1.0).norm()))
                .collect::<Result<Vec<f64>, ruij_core::double_sine::S2Error>>()?;
            Ok::<_, ruij_core::double_sine::S2Error>(sample_meta(VerificationReport::new(
                "s2-inversion",
                1,
                max_of(r),
                S2_IDENTITY_TOL,
                t,
            )))
        }));
        for (name, step, other) in [("s2-shift-first", w1, w2), ("s2-shift-second", w2, w1)] {
            out.push(guarded(name, 1, S2_IDENTITY_TOL, Some(p), || {
                let t = Instant::now();
                let r = pts
                    .iter()
                    .map(|&z| {
                        let lhs = s2(z, &per)?;
                        let rhs = (z * PI / other).sin() * 2.0 * s2(z + step, &per)?;
                        Ok(rel(lhs, rhs))
                    })
                    .collect::<Result<Vec<f64>, ruij_core::double_sine::S2Error>>()?;
                Ok::<_, ruij_core::double_sine::S2Error>(sample_meta(VerificationReport::new(
                    name,
                    1,
                    max_of(r),
                    S2_IDENTITY_TOL,
                    t,
                )))
            }));
        }
        out.push(guarded("s2-homogeneity", 1, S2_IDENTITY_TOL, Some(p), || {
            let t = Instant::now();
            let mut r = Vec::new();
            for &z in &pts {
                let v = s2(z, &per)?;
                for gamma in [0.5, 2.0, 3.7] {
                    r.push(rel(v, s2(z * gamma, &per.scaled(gamma))?));
                }
            }
            Ok::<_, ruij_core::double_sine::S2Error>(sample_meta(VerificationReport::new(
                "s2-homogeneity",
                1,
                max_of(r),
                S2_IDENTITY_TOL,
                t,
            )))
        }));
        out.push(guarded("s2-period-swap", 1, S2_IDENTITY_TOL, Some(p), || {
            let t = Instant::now();
            let r = pts
                .iter()
                .map(|&z| Ok(rel(s2(z, &per)?, s2(z, &per.swapped())?)))
                .collect::<Result<Vec<f64>, ruij_core::double_sine::S2Error>>()?;
            Ok::<_, ruij_core::double_sine::S2Error>(sample_meta(VerificationReport::new(
                "s2-period-swap",
                1,
                max_of(r),
                S2_IDENTITY_TOL,
                t,
            )))
        }));
        out.push(guarded("s2-residue-origin", 1, RESIDUE_TOL, Some(p), || residue_origin(p)));
    }
    out
}

/// z/S₂(z) → √(ω₁ω₂)/(2π): the odd part of the error is removed by averaging ±h
/// and the h² term by one Richardson step.
fn residue_origin(p: &Params) -> Result<VerificationReport, ruij_core::double_sine::S2Error> {
    let t = Instant::now();
    let per = p.periods();
    let f = |h: f64| -> Result<C64, ruij_core::double_sine::S2Error> {
        let (a, b) = (C64::new(h, 0.0), C64::new(-h, 0.0));
        Ok((a / s2(a, &per)? + b / s2(b, &per)?) * 0.5)
    };
    let h = 1e-3;
    let est = (f(h)? * 4.0 - f(2.0 * h)?) / 3.0;
    let zero = PoleZeroIndex {
        m: 0,
        k: 0,
        kind: PoleZeroKind::Zero,
    };
    let from_table = s2_residue(zero, p)?;
    let closed = per.product().sqrt() / (2.0 * PI);
    Ok(VerificationReport::new("s2-residue-origin", 1, (est - closed).norm(), RESIDUE_TOL, t)
        .with_meta("table_deviation", format!("{:.3e}", (from_table - closed).norm())))
}

/// Least squares slope of ln f on a uniform grid over [lo, hi].
fn fitted_rate(f: impl Fn(f64) -> Result<f64, ruij_core::kernels::KernelError>, lo: f64, hi: f64) -> Result<f64, ruij_core::kernels::KernelError> {
    let n = 41;
    let xs: Vec<f64> = (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect();
    let ys = xs.iter().map(|&x| f(x).map(f64::ln)).collect::<Result<Vec<f64>, _>>()?;
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn kernel_bounds(opts: &SuiteOptions) -> Vec<VerificationReport> {
    let mut out = Vec::new();
    for p in opts.param_sets(&PRESETS) {
        let ctx = match KernelContext::new(p) {
            Ok(c) => c,
            Err(e) => {
                out.push(guarded("kernel-context", 1, 0.0, Some(&p), || Err(e)));
                continue;
            }
        };
        let target = PI * p.nu_g;
        out.push(guarded("kernel-decay-rate", 1, RATE_TOL, Some(&p), || {
            let t = Instant::now();
            let r = fitted_rate(|x| Ok(kernel_k(C64::new(x, 0.0), &ctx)?.norm()), 10.0, 30.0)?;
            Ok::<_, ruij_core::kernels::KernelError>(
                VerificationReport::new("kernel-decay-rate", 1, (r + target).abs() / target, RATE_TOL, t)
                    .with_meta("fitted", r),
            )
        }));
        out.push(guarded("measure-growth-rate", 1, RATE_TOL, Some(&p), || {
            let t = Instant::now();
            let up = fitted_rate(|x| Ok(measure_mu(C64::new(x, 0.0), &ctx)?.norm()), 10.0, 30.0)?;
            let down = fitted_rate(|x| Ok(measure_mu(C64::new(-x, 0.0), &ctx)?.norm()), 10.0, 30.0)?;
            let res = ((up - target).abs()).max((down - target).abs()) / target;
            Ok::<_, ruij_core::kernels::KernelError>(
                VerificationReport::new("measure-growth-rate", 1, res, RATE_TOL, t)
                    .with_meta("fitted", format!("{up} {down}")),
            )
        }));
        out.push(guarded("kernel-envelope", 1, 0.05, Some(&p), || {
            let t = Instant::now();
            let rate = ctx.kernel_rate();
            let mut worst: f64 = 0.0;
            for j in -300..=300 {
                let x = j as f64 * 0.1 + 0.037;
                let kv = kernel_k(C64::new(x, 0.0), &ctx)?.norm() * (rate * x.abs()).exp() / ctx.kernel_bound;
                let mv = measure_mu(C64::new(x, 0.0), &ctx)?.norm() * (-rate * x.abs()).exp() / ctx.measure_bound;
                worst = worst.max(kv - 1.0).max(mv - 1.0);
            }
            Ok::<_, ruij_core::kernels::KernelError>(VerificationReport::new(
                "kernel-envelope",
                1,
                worst.max(0.0),
                0.05,
                t,
            ))
        }));
    }
    out
}

fn fourier(opts: &SuiteOptions) -> Vec<VerificationReport> {
    let spec = opts.spec(1e-12);
    let sets = opts.param_sets(&PRESETS);
    let label = sets.iter().map(params_label).collect::<Vec<_>>().join("; ");
    let rep = guarded("kernel-fourier", 1, FOURIER_TOL, None, || {
        let t = Instant::now();
        let mut worst: f64 = 0.0;
        for p in &sets {
            let ctx = KernelContext::new(*p).map_err(|e| e.to_string())?;
            let nu = p.nu_g;
            for lambda in [C64::new(0.0, 0.0), C64::new(0.3, 0.0), C64::new(1.0, 0.0), C64::new(0.3, 0.1 * nu)] {
                let rate = ctx.kernel_rate() - 2.0 * PI * lambda.im.abs();
                let env = Envelope::new(0.0, rate, ctx.kernel_bound).with_frequency(lambda.re);
                let f = |x: f64| {
                    kernel_k(C64::new(x, 0.0), &ctx).unwrap_or(C64::new(f64::NAN, 0.0))
                        * (C64::new(0.0, 2.0 * PI * x) * lambda).exp()
                };
                let lhs = integrate_1d(&f, &env, &spec).map_err(|e| e.to_string())?.value;
                let rhs = kernel_fourier(lambda, &ctx).map_err(|e| e.to_string())?;
                worst = max_of([worst, (lhs - rhs).norm() / rhs.norm()]);
            }
        }
        Ok::<_, String>(VerificationReport::new("kernel-fourier", 1, worst, FOURIER_TOL, t).with_meta("lambdas", 4))
    });
    vec![rep.with_meta("params", label)]
}

fn random_tuple(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect()
}

fn basic_integrals(opts: &SuiteOptions) -> Vec<VerificationReport> {
    let mut out = Vec::new();
    for p in opts.param_sets(&[REAL_SYMM]) {
        let ctx = match KernelContext::new(p) {
            Ok(c) => c,
            Err(e) => {
                out.push(guarded("kernel-context", 1, 0.0, Some(&p), || Err(e)));
                continue;
            }
        };
        for n in [1usize, 2] {
            let (tol, lattice) = if n == 1 { (INTEGRAL_TOL_N1, 1e-10) } else { (INTEGRAL_TOL_N2, 1e-8) };
            let spec = opts.spec(lattice);
            let mut rng = opts.rng(200 + n as u64);
            let tuples: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> = (0..5)
                .map(|_| {
                    let g = random_tuple(&mut rng, n);
                    let l = random_tuple(&mut rng, n);
                    let l_up = random_tuple(&mut rng, n + 1);
                    (g, l, l_up, rng.gen_range(-1.0..1.0))
                })
                .collect();
            out.push(guarded("closed-form-j", n, tol, Some(&p), || {
                let t = Instant::now();
                let mut r = Vec::new();
                for (g, l, _, x) in &tuples {
                    let (g, l) = (SpectralVector::real(g), SpectralVector::real(l));
                    let v = integrals::integral_j(&g, &l, *x, &ctx, &spec)?.value;
                    let c = integrals::closed_form_j(&g, &l, *x, &ctx)?;
                    r.push((v - c).norm() / c.norm());
                }
                Ok::<_, integrals::IntegralError>(
                    VerificationReport::new("closed-form-j", n, max_of(r), tol, t).with_meta("tuples", tuples.len()),
                )
            }));
            out.push(guarded("closed-form-i", n, tol, Some(&p), || {
                let t = Instant::now();
                let mut r = Vec::new();
                for (g, _, l, x) in &tuples {
                    let (g, l) = (SpectralVector::real(g), SpectralVector::real(l));
                    let v = integrals::integral_i(&g, &l, *x, &ctx, &spec)?.value;
                    let c = integrals::closed_form_i(&g, &l, *x, &ctx)?;
                    r.push((v - c).norm() / c.norm());
                }
                Ok::<_, integrals::IntegralError>(
                    VerificationReport::new("closed-form-i", n, max_of(r), tol, t).with_meta("tuples", tuples.len()),
                )
            }));
            let (g, l, l_up, x) = &tuples[0];
            out.push(guarded("recurrence-ij1", n, RECURRENCE_TOL, Some(&p), || {
                let t = Instant::now();
                let r = integrals::recurrence_ij1(&SpectralVector::real(g), &SpectralVector::real(l_up), *x, &ctx, &spec)?;
                Ok::<_, integrals::IntegralError>(VerificationReport::new("recurrence-ij1", n, r.residual, RECURRENCE_TOL, t))
            }));
            out.push(guarded("recurrence-ij2", n, RECURRENCE_TOL, Some(&p), || {
                let t = Instant::now();
                let r = integrals::recurrence_ij2(&SpectralVector::real(g), &SpectralVector::real(l), *x, &ctx, &spec)?;
                Ok::<_, integrals::IntegralError>(VerificationReport::new("recurrence-ij2", n, r.residual, RECURRENCE_TOL, t))
            }));
        }
    }
    out
}

fn coords(v: &[f64]) -> CoordinateVector {
    CoordinateVector::new(v).expect("finite coordinates")
}

fn eigen_macdonald(opts: &SuiteOptions) -> Vec<VerificationReport> {
    let mut out = Vec::new();
    let spec = opts.spec(1e-9);
    for p in opts.param_sets(&[REAL_ASYMM]) {
        let ctx = match KernelContext::new(p) {
            Ok(c) => c,
            Err(e) => {
                out.push(guarded("kernel-context", 1, 0.0, Some(&p), || Err(e)));
                continue;
            }
        };
        for t in [0.5, 2.0] {
            out.push(guarded("macdonald-eigen", 1, 1e-12, Some(&p), || {
                macdonald_eigen_check(&SpectralVector::real(&[0.3]), &coords(&[0.7]), C64::new(t, 0.0), &ctx, &spec)
            }));
        }
        for t in [0.0, 0.7, 2.5] {
            out.push(guarded("macdonald-eigen", 2, 1e-5, Some(&p), || {
                macdonald_eigen_check(
                    &SpectralVector::real(&[0.2, -0.1]),
                    &coords(&[0.4, 0.0]),
                    C64::new(t, 0.0),
                    &ctx,
                    &spec,
                )
            }));
        }
        for t in [0.0, 1.5] {
            out.push(guarded("dual-macdonald-eigen", 2, 1e-5, Some(&p), || {
                dual_macdonald_eigen_check(
                    &SpectralVector::real(&[0.2, -0.1]),
                    &coords(&[0.4, 0.0]),
                    C64::new(t, 0.0),
                    &ctx,
                    &spec,
                )
            }));
        }
    }
    // gauge equivalence of the Macdonald operators with their symmetric form
    for p in opts.param_sets(&[REAL_SYMM, REAL_ASYMM]) {
        let Ok(ctx) = KernelContext::new(p) else { continue };
        for r in 1..=2 {
            out.push(guarded("gauge-conjugation", 2, GAUGE_TOL, Some(&p), || {
                gauge_conjugation_check(r, &SpectralVector::real(&[0.2, -0.1]), &coords(&[0.3, -0.4]), &ctx, &spec)
                    .map(|rep| rep.with_meta("order", r))
            }));
        }
    }
    out
}

fn eigen_baxter(opts: &SuiteOptions) -> Vec<VerificationReport> {
    let mut out = Vec::new();
    for p in opts.param_sets(&[REAL_SYMM]) {
        let ctx = match KernelContext::new(p) {
            Ok(c) => c,
            Err(e) => {
                out.push(guarded("kernel-context", 1, 0.0, Some(&p), || Err(e)));
                continue;
            }
        };
        let spec1 = opts.spec(1e-9);
        let spec2 = opts.spec(1e-7);
        for lam in [0.0, 0.4] {
            out.push(guarded("baxter-eigen", 1, 1e-8, Some(&p), || {
                baxter_eigen_check(C64::new(lam, 0.0), &SpectralVector::real(&[0.1]), &coords(&[0.37]), &ctx, &spec1)
            }));
        }
        for lam in [0.0, 0.35] {
            out.push(guarded("baxter-eigen", 2, 1e-4, Some(&p), || {
                baxter_eigen_check(
                    C64::new(lam, 0.0),
                    &SpectralVector::real(&[0.3, -0.2]),
                    &coords(&[0.7, 0.1]),
                    &ctx,
                    &spec2,
                )
            }));
        }
        out.push(guarded("dual-baxter-eigen", 2, 1e-4, Some(&p), || {
            dual_baxter_eigen_check(
                C64::new(0.25, 0.0),
                &SpectralVector::real(&[0.3, -0.2]),
                &coords(&[0.7, 0.1]),
                &ctx,
                &spec2,
            )
        }));
    }
    out
}

fn duality(opts: &SuiteOptions) -> Vec<VerificationReport> {
    let spec = opts.spec(1e-9);
    opts.param_sets(&[REAL_SYMM])
        .into_iter()
        .map(|p| {
            guarded("duality", 2, DUALITY_TOL, Some(&p), || {
                let t = Instant::now();
                let ctx = KernelContext::new(p).map_err(|e| e.to_string())?;
                let mut rng = opts.rng(300);
                let mut r = Vec::new();
                for _ in 0..10 {
                    let l = SpectralVector::real(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                    let x = coords(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
                    let a = psi(&l, &x, &ctx, &spec).map_err(|e| e.to_string())?.value;
                    let b = psi_dual(&l, &x, &ctx, &spec).map_err(|e| e.to_string())?.value;
                    r.push((a - b).norm() / a.norm());
                }
                Ok::<_, String>(VerificationReport::new("duality", 2, max_of(r), DUALITY_TOL, t).with_meta("points", 10))
            })
        })
        .collect()
}

fn delta_sequence(opts: &SuiteOptions) -> Vec<VerificationReport> {
    let mut out = Vec::new();
    let spec = opts.spec(1e-8);
    let schedule = RegularizationSchedule::default();
    for p in opts.param_sets(&[REAL_SYMM]) {
        let ctx = match KernelContext::new(p) {
            Ok(c) => c,
            Err(e) => {
                out.push(guarded("kernel-context", 1, 0.0, Some(&p), || Err(e)));
                continue;
            }
        };
        let phi1 = &TestFunction::catalog(1)[0];
        out.push(guarded("delta-sequence", 1, integrals::DELTA_TOLERANCE_N1, Some(&p), || {
            integrals::delta_sequence_test(phi1, &[0.1], &schedule, &ctx, &spec)
        }));
        out.push(guarded("delta-off-support", 1, OFF_SUPPORT_TOL, Some(&p), || {
            let t = Instant::now();
            let phi = TestFunction::gaussian(&[0.0], 0.1)?;
            let seq = integrals::delta_sequence(&phi, &[3.0], &schedule, &ctx, &spec)?;
            Ok::<_, integrals::IntegralError>(
                VerificationReport::new("delta-off-support", 1, seq.limit().norm(), OFF_SUPPORT_TOL, t)
                    .with_meta("deviations", format!("{:?}", seq.deviations)),
            )
        }));
        let phi2 = &TestFunction::catalog(2)[0];
        out.push(guarded("delta-sequence", 2, integrals::DELTA_TOLERANCE_N2, Some(&p), || {
            integrals::delta_sequence_test(phi2, &[0.3, -0.15], &schedule, &ctx, &spec)
        }));
    }
    out
}

fn plancherel(opts: &SuiteOptions) -> Vec<VerificationReport> {
    let mut out = Vec::new();
    let spec = opts.spec(1e-10);
    for p in opts.param_sets(&[REAL_SYMM]) {
        let ctx = match KernelContext::new(p) {
            Ok(c) => c,
            Err(e) => {
                out.push(guarded("kernel-context", 1, 0.0, Some(&p), || Err(e)));
                continue;
            }
        };
        let mut measured = Vec::new();
        for phi in TestFunction::catalog(1) {
            let rep = guarded("plancherel", 1, integrals::PLANCHEREL_TOLERANCE_N1, Some(&p), || {
                integrals::plancherel_check(&phi, &ctx, &spec)
            });
            measured.push(rep.metadata.get("measured_c").and_then(|v| v.parse::<f64>().ok()).unwrap_or(f64::NAN));
            out.push(rep);
        }
        let started = Instant::now();
        out.push(
            VerificationReport::new(
                "measured-c1",
                1,
                max_of(measured.iter().map(|c| (c - 1.0).abs())),
                integrals::PLANCHEREL_TOLERANCE_N1,
                started,
            )
            .with_meta("params", params_label(&p))
            .with_meta("values", format!("{measured:?}")),
        );
        let pts: Vec<f64> = (0..10).map(|i| -0.9 + 0.2 * i as f64).collect();
        let phi = &TestFunction::catalog(1)[2];
        out.push(guarded("inversion", 1, integrals::PLANCHEREL_TOLERANCE_N1, Some(&p), || {
            integrals::inversion_check(phi, &pts, &spec)
        }));
        let phi2 = &TestFunction::catalog(2)[0];
        out.push(guarded("plancherel", 2, integrals::PLANCHEREL_TOLERANCE_N2, Some(&p), || {
            integrals::plancherel_check(phi2, &ctx, &opts.spec(1e-8))
        }));
    }
    out
}

fn inequality_suite(opts: &SuiteOptions) -> Result<Vec<VerificationReport>, CliError> {
    let ns = match opts.n {
        Some(n) if n < 2 => return Err(CliError::Config(format!("inequalities need n ≥ 2, got {n}"))),
        Some(n) => vec![n],
        None => vec![2, 3, 4],
    };
    let samples = opts.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples == 0 {
        return Err(CliError::Config("samples must be positive".into()));
    }
    let mut out = Vec::new();
    for n in ns {
        let reps = inequalities::run_all(n, samples, opts.seed).map_err(|e| CliError::Config(e.to_string()))?;
        out.extend(reps.into_iter().map(|r| r.with_meta("params", "none")));
    }
    Ok(out)
}
