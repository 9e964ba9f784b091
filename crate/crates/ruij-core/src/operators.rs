//! Macdonald difference operators, Baxter Q-operators, their duals, and the
//! eigen-relation and gauge-equivalence checks built on them.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{hat_k, kernel_half_width, kernel_with, measure_with, norm_d, KernelContext, KernelError};
use crate::params::Params;
use crate::quadrature::{CompensatedSum, Envelope, QuadratureSpec};
use crate::report::VerificationReport;
use crate::wavefunction::{
    lattice_step, psi_complex, window_radius, CoordinateVector, KernelRow, LatticeKernels, PsiValue,
    SpectralVector, WaveError, WaveEvaluator,
};

/// Minimum separation |x_i − x_j| accepted by the sh-ratio coefficients.
pub const COINCIDENCE_TOL: f64 = 1e-8;

/// Steps used to continue square roots along a shift path.
pub const BRANCH_STEPS: usize = 256;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum OpError {
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("contour violation: {detail} (margin {margin})")]
    ContourViolation { detail: String, margin: f64 },
    #[error("coincident points {i} and {j}")]
    CoincidentPoints { i: usize, j: usize },
    #[error("operator order r = {r} outside 0..={n}")]
    InvalidOrder { r: usize, n: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Subset I of shifted arguments, the shift, and the distance the shifted
/// arguments keep from the nearest singular line.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftPlan {
    pub subset: Vec<usize>,
    pub shift: C64,
    pub contour_margin: f64,
}

impl ShiftPlan {
    /// Coordinate shift x_i → x_i − iω₁ for i ∈ I, as needed to evaluate Ψ by
    /// its integral representation: every shifted coordinate must stay inside
    /// the kernel strip |Im| < Re g*/2.
    pub fn coordinate(p: &Params, x: &[C64], subset: &[usize]) -> Result<Self, OpError> {
        let shift = C64::new(0.0, -1.0) * p.omega1;
        let mut plan = ShiftPlan {
            subset: subset.to_vec(),
            shift,
            contour_margin: 0.0,
        };
        let moved = plan.apply(x);
        let worst = moved.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        plan.contour_margin = kernel_half_width(p) - worst;
        if !(plan.contour_margin > 0.0) {
            return Err(OpError::ContourViolation {
                detail: format!(
                    "shifted coordinate at |Im| = {worst} leaves the kernel strip of half-width {}",
                    kernel_half_width(p)
                ),
                margin: plan.contour_margin,
            });
        }
        Ok(plan)
    }

    /// Spectral shift λ_i → λ_i − i/ω₂ for i ∈ I. The integral representation of
    /// Ψ converges while every imaginary spectral difference stays below ν_g.
    pub fn spectral(p: &Params, lambda: &[C64], subset: &[usize]) -> Result<Self, OpError> {
        let shift = C64::new(0.0, -1.0) / p.omega2;
        let mut plan = ShiftPlan {
            subset: subset.to_vec(),
            shift,
            contour_margin: 0.0,
        };
        let moved = plan.apply(lambda);
        let mut worst: f64 = 0.0;
        for i in 0..moved.len() {
            for j in 0..i {
                worst = worst.max((moved[i] - moved[j]).im.abs());
            }
        }
        plan.contour_margin = p.nu_g - worst;
        if !(plan.contour_margin > 0.0) {
            return Err(OpError::ContourViolation {
                detail: format!("imaginary spectral spread {worst} reaches ν_g = {}", p.nu_g),
                margin: plan.contour_margin,
            });
        }
        Ok(plan)
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = x.to_vec();
        for &i in &self.subset {
            out[i] += self.shift;
        }
        out
    }
}

/// sh(a − b)/sh(a), evaluated without overflow for large |Re a|.
pub fn sh_ratio(a: C64, b: C64) -> Option<C64> {
    // sh(a − b)/sh(a) is invariant under (a, b) → (−a, −b)
    let (a, b) = if a.re >= 0.0 { (a, b) } else { (-a, -b) };
    let den = 1.0 - (-2.0 * a).exp();
    if den.norm() < 1e-14 {
        return None;
    }
    Some((-b).exp() * (1.0 - (-2.0 * (a - b)).exp()) / den)
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == r)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

fn check_distinct(x: &[C64]) -> Result<(), OpError> {
    for i in 0..x.len() {
        for j in 0..i {
            if (x[i] - x[j]).norm() < COINCIDENCE_TOL {
                return Err(OpError::CoincidentPoints { i: j, j: i });
            }
        }
    }
    Ok(())
}

/// ∏_{i∈I, j∉I} sh(π/ω₂·(x_i − x_j − ig)) / sh(π/ω₂·(x_i − x_j)).
pub fn macdonald_coefficient(p: &Params, x: &[C64], subset: &[usize]) -> Result<C64, OpError> {
    let mut c = C64::new(1.0, 0.0);
    let scale = PI / p.omega2;
    let b = C64::new(0.0, 1.0) * p.g * scale;
    for &i in subset {
        for j in (0..x.len()).filter(|j| !subset.contains(j)) {
            let a = (x[i] - x[j]) * scale;
            c *= sh_ratio(a, b).ok_or(OpError::CoincidentPoints { i, j })?;
        }
    }
    Ok(c)
}

/// M_r f(x) = Σ_{|I|=r} coefficient_I(x)·f(x − iω₁e_I).
pub fn macdonald_apply<F>(r: usize, f: &F, x: &[C64], p: &Params) -> Result<C64, OpError>
where
    F: Fn(&[C64]) -> Result<C64, OpError> + Sync,
{
    let n = x.len();
    if r > n {
        return Err(OpError::InvalidOrder { r, n });
    }
    check_distinct(x)?;
    let shift = C64::new(0.0, -1.0) * p.omega1;
    let terms: Vec<C64> = subsets(n, r)
        .par_iter()
        .map(|set| {
            let mut moved = x.to_vec();
            for &i in set {
                moved[i] += shift;
            }
            Ok(macdonald_coefficient(p, x, set)? * f(&moved)?)
        })
        .collect::<Result<_, OpError>>()?;
    let mut acc = CompensatedSum::new();
    for t in terms {
        acc.add(t);
    }
    Ok(acc.value())
}

/// M_n(λ)f = Σ_r λ^{n−r}(−1)^r M_r f, evaluating f once per subset.
pub fn macdonald_generating_apply<F>(lambda: C64, f: &F, x: &[C64], p: &Params) -> Result<C64, OpError>
where
    F: Fn(&[C64]) -> Result<C64, OpError> + Sync,
{
    let n = x.len();
    check_distinct(x)?;
    let shift = C64::new(0.0, -1.0) * p.omega1;
    let masks: Vec<u32> = (0..(1u32 << n)).collect();
    let terms: Vec<C64> = masks
        .par_iter()
        .map(|&m| {
            let set: Vec<usize> = (0..n).filter(|i| m & (1 << i) != 0).collect();
            let mut moved = x.to_vec();
            for &i in &set {
                moved[i] += shift;
            }
            let r = set.len();
            let weight = lambda.powu((n - r) as u32) * if r % 2 == 0 { 1.0 } else { -1.0 };
            Ok(weight * macdonald_coefficient(p, x, &set)? * f(&moved)?)
        })
        .collect::<Result<_, OpError>>()?;
    let mut acc = CompensatedSum::new();
    for t in terms {
        acc.add(t);
    }
    Ok(acc.value())
}

/// ∏_j (λ − e^{2πλ_jω₁}), the eigenvalue of M_n(λ) on Ψ_{λ_n}.
pub fn macdonald_eigenvalue(lambda: C64, spectrum: &[C64], omega1: C64) -> C64 {
    spectrum
        .iter()
        .fold(C64::new(1.0, 0.0), |acc, &l| acc * (lambda - (2.0 * PI * l * omega1).exp()))
}

fn params_meta(p: &Params) -> String {
    format!(
        "omega1={} omega2={} g={}",
        fmt_c(p.omega1),
        fmt_c(p.omega2),
        fmt_c(p.g)
    )
}

fn fmt_c(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

/// Residual |M_n(λ)Ψ − ∏_j(λ − e^{2πλ_jω₁})Ψ| / |Ψ| at one point.
pub fn macdonald_eigen_check(
    lambda_n: &SpectralVector,
    x_n: &CoordinateVector,
    lambda_param: C64,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<VerificationReport, OpError> {
    let started = Instant::now();
    lambda_n.validate(&ctx.params)?;
    let p = ctx.params;
    let x = x_n.complex();
    let n = x.len();
    let all: Vec<usize> = (0..n).collect();
    let plan = ShiftPlan::coordinate(&p, &x, &all)?;
    let f = |y: &[C64]| -> Result<C64, OpError> { Ok(psi_complex(ctx, lambda_n.values(), y, spec)?.value) };
    let applied = macdonald_generating_apply(lambda_param, &f, &x, &p)?;
    let psi = f(&x)?;
    let eig = macdonald_eigenvalue(lambda_param, lambda_n.values(), p.omega1);
    let residual = (applied - eig * psi).norm() / psi.norm();
    Ok(VerificationReport::new("macdonald-eigen", n, residual, if n == 1 { 1e-12 } else { 1e-5 }, started)
        .with_meta("params", params_meta(&p))
        .with_meta("lambda_param", fmt_c(lambda_param))
        .with_meta("contour_margin", plan.contour_margin))
}

/// Dual relation: the Macdonald operator of the dual system acting on λ ↦ Ψ_λ(x)
/// with shift −i/ω₂ and eigenvalue ∏_j(t − e^{2πx_j/ω₂}).
pub fn dual_macdonald_eigen_check(
    lambda_n: &SpectralVector,
    x_n: &CoordinateVector,
    param: C64,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<VerificationReport, OpError> {
    let started = Instant::now();
    lambda_n.validate(&ctx.params)?;
    let p = ctx.params;
    let dual = ctx.dual;
    let lam = lambda_n.values().to_vec();
    let n = lam.len();
    let x = x_n.complex();
    let mut margin = f64::INFINITY;
    for r in 0..=n {
        for set in subsets(n, r) {
            margin = margin.min(ShiftPlan::spectral(&p, &lam, &set)?.contour_margin);
        }
    }
    let f = |l: &[C64]| -> Result<C64, OpError> { Ok(psi_complex(ctx, l, &x, spec)?.value) };
    let applied = macdonald_generating_apply(param, &f, &lam, &dual)?;
    let psi = f(&lam)?;
    let eig = macdonald_eigenvalue(param, &x, dual.omega1);
    let residual = (applied - eig * psi).norm() / psi.norm();
    Ok(VerificationReport::new("dual-macdonald-eigen", n, residual, if n == 1 { 1e-12 } else { 1e-5 }, started)
        .with_meta("params", params_meta(&p))
        .with_meta("param", fmt_c(param))
        .with_meta("contour_margin", margin))
}

/// [Q_n(λ)f](x) = ∫ d_n·e^{2πiλ(Σx−Σy)}·K(x, y)·μ(y)·f(y) dy for n ≤ 2.
///
/// The integral is a lattice trapezoid sum, so f must be analytic in a strip
/// around the real axis; `envelope` gives its decay rate (per escaping
/// variable) and dominant frequency.
pub fn baxter_q_apply<F>(
    lambda: C64,
    f: &F,
    envelope: &Envelope,
    x: &[f64],
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<PsiValue, OpError>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    let n = x.len();
    if n == 0 || n > 2 {
        return Err(OpError::ShapeMismatch(format!(
            "generic Q-operator supports n = 1, 2; got {n}"
        )));
    }
    let p = ctx.params;
    let tol = spec.tolerance;
    // K decays like πν per factor; μ pairs grow like 2πν
    let rate = (2.0 - n as f64) * PI * p.nu_g + envelope.decay_rate - 2.0 * PI * lambda.im.abs();
    let h = lattice_step(&p, 0.0, lambda.re.abs() + envelope.frequency.abs(), tol)?;
    let reach = (window_radius(rate, ctx.kernel_bound.max(1.0).powi(n as i32) * envelope.amplitude.max(1.0), tol)?
        / h)
        .ceil() as i64;
    let x_lo = x.iter().cloned().fold(f64::INFINITY, f64::min).min(envelope.center);
    let x_hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(envelope.center);
    let lo = (x_lo / h).floor() as i64 - reach;
    let hi = (x_hi / h).ceil() as i64 + reach;
    let rows: Vec<KernelRow> = x
        .iter()
        .map(|&xi| KernelRow::new(&p, C64::new(xi, 0.0), h, lo, hi))
        .collect::<Result<_, _>>()?;
    let d = norm_d(n as u32, ctx)?;
    let sum_x: f64 = x.iter().sum();
    let phase = |s: i64| (C64::new(0.0, -2.0 * PI) * lambda * (s as f64 * h)).exp();
    let (value, mass, nodes) = if n == 1 {
        let mut acc = CompensatedSum::new();
        let mut mass = 0.0;
        for a in lo..=hi {
            let t = phase(a) * rows[0].get(a) * f(&[a as f64 * h]);
            acc.add(t);
            mass += t.norm();
        }
        (acc.value() * h, mass * h, (hi - lo + 1) as usize)
    } else {
        let pair: Vec<C64> = (0..=(hi - lo))
            .into_par_iter()
            .map(|m| -> Result<C64, KernelError> {
                if m == 0 {
                    return Ok(C64::new(0.0, 0.0));
                }
                let y = C64::new(m as f64 * h, 0.0);
                Ok(measure_with(&p, y)? * measure_with(&p, -y)?)
            })
            .collect::<Result<_, _>>()?;
        let parts: Vec<(C64, f64)> = (lo..=hi)
            .into_par_iter()
            .map(|a| {
                let mut acc = CompensatedSum::new();
                let mut mass = 0.0;
                for b in lo..=hi {
                    if a == b {
                        continue;
                    }
                    let w = phase(a + b)
                        * rows[0].get(a)
                        * rows[0].get(b)
                        * rows[1].get(a)
                        * rows[1].get(b)
                        * pair[(a - b).unsigned_abs() as usize]
                        * 0.5;
                    let t = w * f(&[a as f64 * h, b as f64 * h]);
                    acc.add(t);
                    mass += t.norm();
                }
                (acc.value(), mass)
            })
            .collect();
        let mut acc = CompensatedSum::new();
        let mut mass = 0.0;
        for (v, m) in parts {
            acc.add(v);
            mass += m;
        }
        let w = (hi - lo + 1) as usize;
        (acc.value() * h * h, mass * h * h, w * w)
    };
    let scale = d * (C64::new(0.0, 2.0 * PI) * lambda * sum_x).exp();
    Ok(PsiValue {
        value: value * scale,
        error_estimate: tol * mass * scale.norm(),
        nodes,
    })
}

/// Residual of Q_n(λ)Ψ_{λ_n} = ∏_j K̂(λ − λ_j)·Ψ_{λ_n} at one point (n ≤ 2).
pub fn baxter_eigen_check(
    lambda_param: C64,
    lambda_n: &SpectralVector,
    x_n: &CoordinateVector,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<VerificationReport, OpError> {
    let started = Instant::now();
    lambda_n.validate(&ctx.params)?;
    let (applied, psi) = q_on_psi(lambda_param, lambda_n.values(), &x_n.values, ctx, spec)?;
    let eig = lambda_n
        .values()
        .iter()
        .map(|&l| hat_k(lambda_param - l, ctx))
        .product::<Result<C64, _>>()?;
    let n = lambda_n.len();
    let residual = (applied - eig * psi).norm() / (eig * psi).norm();
    Ok(VerificationReport::new("baxter-eigen", n, residual, if n == 1 { 1e-8 } else { 1e-4 }, started)
        .with_meta("params", params_meta(&ctx.params))
        .with_meta("lambda_param", fmt_c(lambda_param)))
}

/// Dual Baxter relation Q̂_n(t)Ψ_{λ_n}(x_n) = ∏_j K(t − x_j)·Ψ_{λ_n}(x_n), where Q̂
/// acts on the spectral variables with the dual kernel and measure.
pub fn dual_baxter_eigen_check(
    param: C64,
    lambda_n: &SpectralVector,
    x_n: &CoordinateVector,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<VerificationReport, OpError> {
    let started = Instant::now();
    lambda_n.validate(&ctx.params)?;
    let dual = ctx.dualized()?;
    let spectral: Vec<C64> = x_n.complex();
    let coords: Vec<f64> = lambda_n.values().iter().map(|v| v.re).collect();
    if lambda_n.uniform_imag_shift != 0.0 {
        return Err(OpError::ShapeMismatch("dual Q-check needs real spectral values".into()));
    }
    let (applied, psi) = q_on_psi(param, &spectral, &coords, &dual, spec)?;
    let eig = x_n
        .values
        .iter()
        .map(|&xj| kernel_with(&ctx.params, param - xj))
        .product::<Result<C64, _>>()?;
    let n = coords.len();
    let residual = (applied - eig * psi).norm() / (eig * psi).norm();
    Ok(VerificationReport::new("dual-baxter-eigen", n, residual, if n == 1 { 1e-8 } else { 1e-4 }, started)
        .with_meta("params", params_meta(&ctx.params))
        .with_meta("param", fmt_c(param)))
}

/// (Q_n(λ)Ψ)(x) and Ψ(x) from the same lattice.
fn q_on_psi(
    lambda: C64,
    spectrum: &[C64],
    x: &[f64],
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<(C64, C64), OpError> {
    match spectrum.len() {
        1 => {
            let l1 = spectrum[0];
            let f = |y: &[f64]| (C64::new(0.0, 2.0 * PI) * l1 * y[0]).exp();
            let env = Envelope::new(x[0], 0.0, 1.0).with_frequency(l1.re);
            let v = baxter_q_apply(lambda, &f, &env, x, ctx, spec)?;
            Ok((v.value, f(x)))
        }
        2 => {
            let xc: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
            let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ev = WaveEvaluator::for_operator(ctx, spectrum, lambda, lo, hi, 0.0, spec)?;
            let applied = ev.apply_layer(lambda, &xc)?.value;
            let psi = psi_complex(ctx, spectrum, &xc, spec)?.value;
            Ok((applied, psi))
        }
        n => Err(OpError::ShapeMismatch(format!("Baxter eigen-check supports n ≤ 2, got {n}"))),
    }
}

/// Relative commutator residual |Q(λ)Q(ρ)f − Q(ρ)Q(λ)f| / |Q(λ)Q(ρ)f| at n = 1,
/// for the gaussian f(y) = e^{−y²} at the point x.
pub fn q_commutator_residual(
    lambda: C64,
    rho: C64,
    x: f64,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<f64, OpError> {
    let p = ctx.params;
    let tol = spec.tolerance;
    let h = lattice_step(&p, 0.0, lambda.re.abs() + rho.re.abs() + 1.0, tol)?;
    let rate = PI * p.nu_g - 2.0 * PI * lambda.im.abs().max(rho.im.abs());
    let reach = (window_radius(rate, ctx.kernel_bound.max(1.0), tol)? / h).ceil() as i64;
    // gaussian support plus one kernel reach on each side, twice
    let core = (6.0 / h).ceil() as i64;
    let lo = (x / h).floor() as i64 - 2 * reach - core;
    let hi = (x / h).ceil() as i64 + 2 * reach + core;
    let lk = LatticeKernels::new(ctx, h, (hi - lo) as usize)?;
    let d1 = lk.d(1);
    let row = KernelRow::new(&p, C64::new(x, 0.0), h, lo, hi)?;
    let f: Vec<C64> = (lo..=hi).map(|k| C64::new((-(k as f64 * h).powi(2)).exp(), 0.0)).collect();
    let inner = |rate_param: C64| -> Vec<C64> {
        (lo..=hi)
            .into_par_iter()
            .map(|a| {
                let mut acc = CompensatedSum::new();
                for k in lo..=hi {
                    let t = (C64::new(0.0, 2.0 * PI) * rate_param * ((a - k) as f64 * h)).exp() * lk.k(a - k);
                    acc.add(t * f[(k - lo) as usize]);
                }
                acc.value() * d1 * h
            })
            .collect()
    };
    let outer = |rate_param: C64, g: &[C64]| -> C64 {
        let mut acc = CompensatedSum::new();
        for a in lo..=hi {
            let t = (C64::new(0.0, 2.0 * PI) * rate_param * (x - a as f64 * h)).exp() * row.get(a);
            acc.add(t * g[(a - lo) as usize]);
        }
        acc.value() * d1 * h
    };
    let lr = outer(lambda, &inner(rho));
    let rl = outer(rho, &inner(lambda));
    Ok((lr - rl).norm() / lr.norm())
}

/// Continues √F along samples F(s_1), …, F(s_N) from the given root at s = 0.
fn continued_sqrt(start_root: C64, samples: impl IntoIterator<Item = C64>) -> C64 {
    let mut root = start_root;
    for v in samples {
        let r = v.sqrt();
        root = if (r - root).norm() <= (-r - root).norm() { r } else { -r };
    }
    root
}

fn path_steps() -> impl Iterator<Item = f64> {
    (1..=BRANCH_STEPS).map(|k| k as f64 / BRANCH_STEPS as f64)
}

/// Gauge equivalence √μ·M_r·(1/√μ) f = H_r f at one point, for the test function
/// f(x) = e^{−Σx_j²/2 + 2πiΣλ_jx_j}. Square roots of μ and of the sh-ratios are
/// continued along the shift path from their positive real-axis values.
pub fn gauge_conjugation_check(
    r: usize,
    lambda_n: &SpectralVector,
    x_n: &CoordinateVector,
    ctx: &KernelContext,
    _spec: &QuadratureSpec,
) -> Result<VerificationReport, OpError> {
    let started = Instant::now();
    let p = ctx.params;
    if !p.is_real() {
        return Err(OpError::ShapeMismatch("gauge check needs real parameters".into()));
    }
    let x = x_n.complex();
    let n = x.len();
    if r > n {
        return Err(OpError::InvalidOrder { r, n });
    }
    if lambda_n.len() != n {
        return Err(OpError::ShapeMismatch("spectral and coordinate lengths differ".into()));
    }
    check_distinct(&x)?;
    let lam = lambda_n.values().to_vec();
    let test = |y: &[C64]| -> C64 {
        let mut e = C64::new(0.0, 0.0);
        for (yj, lj) in y.iter().zip(&lam) {
            e += -yj * yj * 0.5 + C64::new(0.0, 2.0 * PI) * lj * yj;
        }
        e.exp()
    };
    let mu_at = |y: &[C64]| -> Result<C64, OpError> {
        let mut v = C64::new(1.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    v *= measure_with(&p, y[i] - y[j])?;
                }
            }
        }
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        Ok(v / fact)
    };
    let shift = C64::new(0.0, -1.0) * p.omega1;
    let scale = PI / p.omega2;
    let ig = C64::new(0.0, 1.0) * p.g * scale;
    let sqrt_mu_x = C64::new(mu_at(&x)?.re.max(0.0).sqrt(), 0.0);
    let mut lhs = CompensatedSum::new();
    let mut rhs = CompensatedSum::new();
    for set in subsets(n, r) {
        let path = |s: f64| -> Vec<C64> {
            let mut y = x.clone();
            for &i in &set {
                y[i] += shift * s;
            }
            y
        };
        let moved = path(1.0);
        let f_moved = test(&moved);
        // left side: coefficient · √μ(x) / √μ(x − iω₁e_I), continued in s
        let mu_path: Vec<C64> = path_steps().map(|s| mu_at(&path(s))).collect::<Result<_, _>>()?;
        let sqrt_mu_moved = continued_sqrt(sqrt_mu_x, mu_path);
        let coeff = macdonald_coefficient(&p, &x, &set)?;
        lhs.add(coeff * sqrt_mu_x / sqrt_mu_moved * f_moved);
        // right side: ∏ [sh(u−iγ)/sh u]^{1/2} at x, times ∏ [sh(u+iγ)/sh u]^{1/2} at the shifted point
        let mut weight = C64::new(1.0, 0.0);
        for &i in &set {
            for j in (0..n).filter(|j| !set.contains(j)) {
                let u = (x[i] - x[j]) * scale;
                let left = sh_ratio(u, ig).ok_or(OpError::CoincidentPoints { i, j })?;
                weight *= left.sqrt();
                let start = sh_ratio(u, -ig).ok_or(OpError::CoincidentPoints { i, j })?.sqrt();
                let samples: Vec<C64> = path_steps()
                    .map(|s| sh_ratio((x[i] - x[j] + shift * s) * scale, -ig).ok_or(OpError::CoincidentPoints { i, j }))
                    .collect::<Result<_, _>>()?;
                let right = continued_sqrt(start, samples);
                weight *= right;
            }
        }
        rhs.add(weight * f_moved);
    }
    let (l, rv) = (lhs.value(), rhs.value());
    let residual = (l - rv).norm() / rv.norm().max(f64::MIN_POSITIVE);
    Ok(VerificationReport::new("gauge-conjugation", n, residual, 1e-8, started)
        .with_meta("params", params_meta(&p))
        .with_meta("r", r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(w1: f64, w2: f64, g: f64) -> KernelContext {
        KernelContext::new(Params::real(w1, w2, g).unwrap()).unwrap()
    }

    #[test]
    fn sh_ratio_matches_direct() {
        for (a, b) in [(C64::new(0.7, 0.2), C64::new(0.0, 0.4)), (C64::new(-1.3, 0.1), C64::new(0.0, 1.2))] {
            let direct = (a - b).sinh() / a.sinh();
            assert!((sh_ratio(a, b).unwrap() - direct).norm() < 1e-14);
        }
        // far out the direct form overflows
        let v = sh_ratio(C64::new(800.0, 0.0), C64::new(0.0, 0.3)).unwrap();
        assert!((v - C64::new(0.0, -0.3).exp()).norm() < 1e-14);
        assert!(sh_ratio(C64::new(0.0, 0.0), C64::new(0.0, 0.3)).is_none());
    }

    #[test]
    fn plane_wave_shift_at_n1() {
        let p = Params::real(0.3, 1.0, 0.4).unwrap();
        let lam = C64::new(0.35, 0.0);
        let f = |y: &[C64]| -> Result<C64, OpError> { Ok((C64::new(0.0, 2.0 * PI) * lam * y[0]).exp()) };
        let x = [C64::new(0.8, 0.0)];
        let v = macdonald_apply(1, &f, &x, &p).unwrap();
        let expect = (2.0 * PI * 0.35 * 0.3f64).exp() * f(&x).unwrap();
        assert!((v - expect).norm() < 1e-14 * expect.norm());
        assert_eq!(macdonald_apply(0, &f, &x, &p).unwrap(), f(&x).unwrap());
        assert!(matches!(macdonald_apply(2, &f, &x, &p), Err(OpError::InvalidOrder { .. })));
    }

    #[test]
    fn shift_plans() {
        let feasible = Params::real(0.3, 1.0, 0.4).unwrap();
        let x = [C64::new(0.4, 0.0), C64::new(0.0, 0.0)];
        let plan = ShiftPlan::coordinate(&feasible, &x, &[0, 1]).unwrap();
        assert!((plan.contour_margin - 0.15).abs() < 1e-12);
        assert_eq!(plan.apply(&x)[1], C64::new(0.0, -0.3));
        let symmetric = Params::real(1.0, 1.0, 0.5).unwrap();
        assert!(matches!(
            ShiftPlan::coordinate(&symmetric, &x, &[0]),
            Err(OpError::ContourViolation { .. })
        ));
        let lam = [C64::new(0.2, 0.0), C64::new(-0.1, 0.0)];
        let sp = ShiftPlan::spectral(&feasible, &lam, &[0]).unwrap();
        assert!((sp.contour_margin - (0.4 / 0.3 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_rejected() {
        let p = Params::real(0.3, 1.0, 0.4).unwrap();
        let f = |_: &[C64]| -> Result<C64, OpError> { Ok(C64::new(1.0, 0.0)) };
        let x = [C64::new(0.4, 0.0), C64::new(0.4, 0.0)];
        assert!(matches!(macdonald_apply(1, &f, &x, &p), Err(OpError::CoincidentPoints { .. })));
    }

    #[test]
    fn gauge_trivial_cases() {
        let c = ctx(1.0, 1.0, 0.5);
        let spec = QuadratureSpec::default();
        let one = gauge_conjugation_check(
            1,
            &SpectralVector::real(&[0.2]),
            &CoordinateVector::new(&[0.3]).unwrap(),
            &c,
            &spec,
        )
        .unwrap();
        assert!(one.residual < 1e-15);
        let full = gauge_conjugation_check(
            2,
            &SpectralVector::real(&[0.2, -0.1]),
            &CoordinateVector::new(&[0.3, -0.4]).unwrap(),
            &c,
            &spec,
        )
        .unwrap();
        assert!(full.residual < 1e-13, "{}", full.residual);
    }
}
