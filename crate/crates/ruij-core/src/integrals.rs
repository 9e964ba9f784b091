//! The basic integrals I and J, the regularized pairing, delta sequences and
//! the transforms T and S.
//!
//! I and J are trapezoid sums on the wave function lattice: Ψ₂ is tabulated
//! once per spectral pair and the outer layers are summed directly. Delta
//! sequences integrate the closed-form pairing against a test function with a
//! fixed graded rule, and the two-particle transforms go through the Fourier
//! transform of μ̂φ so that every layer stays on a uniform grid.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{
    hat_k, inverse_d1_with, log_measure_with, norm_d, product_hat_k, KernelContext, KernelError,
};
use crate::params::Params;
use crate::quadrature::{
    integrate_interval, kronrod_nodes, CompensatedSum, IntegralResult, QuadError, QuadratureSpec,
};
use crate::report::VerificationReport;
use crate::wavefunction::{
    lattice_step, window_radius, KernelRow, LatticeKernels, Psi2Table, SpectralVector,
    WaveError, STRIP_FRACTION,
};

/// Pass threshold of the n = 1 delta-sequence limit.
pub const DELTA_TOLERANCE_N1: f64 = 1e-3;

/// Pass threshold of the n = 2 delta-sequence limit.
pub const DELTA_TOLERANCE_N2: f64 = 5e-2;

/// Pass threshold of the n = 1 Plancherel defect and the inversion check.
pub const PLANCHEREL_TOLERANCE_N1: f64 = 1e-6;

/// Pass threshold of the n = 2 Plancherel defect.
pub const PLANCHEREL_TOLERANCE_N2: f64 = 5e-2;

/// Gaussian widths beyond which a catalog profile is below 1e−16.
pub const SUPPORT_SIGMAS: f64 = 8.6;

/// Step of the interpolation table for the dual measure pair μ̂(u)μ̂(−u).
const MEASURE_TABLE_STEP: f64 = 2e-3;

/// Slack allowed when judging the deviations along a schedule as monotone.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum IntegralError {
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("condition violated: {0}")]
    ConditionViolation(String),
    #[error("schedule has {0} points, at least 3 are needed")]
    ScheduleTooShort(usize),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("n = {0} is not supported here")]
    DimensionTooLarge(usize),
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
}

type Result<T> = std::result::Result<T, IntegralError>;

/// Paired schedule (x_k, ε_k) for the double limit x → +∞, ε → 0+.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationSchedule {
    pub x_values: Vec<f64>,
    pub eps_values: Vec<f64>,
}

impl Default for RegularizationSchedule {
    fn default() -> Self {
        RegularizationSchedule {
            x_values: vec![10.0, 20.0, 40.0],
            eps_values: vec![1e-2, 1e-3, 1e-4],
        }
    }
}

impl RegularizationSchedule {
    pub fn new(x_values: &[f64], eps_values: &[f64]) -> Result<Self> {
        let s = RegularizationSchedule {
            x_values: x_values.to_vec(),
            eps_values: eps_values.to_vec(),
        };
        s.check_shape()?;
        Ok(s)
    }

    fn check_shape(&self) -> Result<()> {
        if self.x_values.len() != self.eps_values.len() {
            return Err(IntegralError::InvalidSchedule(format!(
                "{} x values but {} ε values",
                self.x_values.len(),
                self.eps_values.len()
            )));
        }
        if self.x_values.len() < 3 {
            return Err(IntegralError::ScheduleTooShort(self.x_values.len()));
        }
        if !self.x_values.windows(2).all(|w| w[0] < w[1]) || !self.x_values.iter().all(|x| x.is_finite() && *x > 0.0) {
            return Err(IntegralError::InvalidSchedule("x values must be positive and increasing".into()));
        }
        if !self.eps_values.windows(2).all(|w| w[0] > w[1]) || !self.eps_values.iter().all(|e| *e > 0.0) {
            return Err(IntegralError::InvalidSchedule("ε values must be positive and decreasing".into()));
        }
        Ok(())
    }

    /// Shape checks plus ε < ν_g/2.
    pub fn validate(&self, p: &Params) -> Result<()> {
        self.check_shape()?;
        if self.eps_values[0] >= p.nu_g / 2.0 {
            return Err(IntegralError::InvalidSchedule(format!(
                "ε = {} must stay below ν_g/2 = {}",
                self.eps_values[0],
                p.nu_g / 2.0
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.x_values.iter().copied().zip(self.eps_values.iter().copied()).collect()
    }
}

/// One-dimensional profile of a catalog test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Gaussian,
    /// cos(2πf·t) times the gaussian.
    CosineGaussian { frequency: f64 },
}

/// Symmetrized product of one profile placed at each center:
/// φ(λ) = (1/n!) Σ_w ∏_k p(λ_k − c_{w(k)}).
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub profile: Profile,
    pub center: Vec<f64>,
    pub width: f64,
}

impl TestFunction {
    pub fn gaussian(center: &[f64], width: f64) -> Result<Self> {
        Self::build(Profile::Gaussian, center, width)
    }

    pub fn cosine_gaussian(center: &[f64], width: f64, frequency: f64) -> Result<Self> {
        Self::build(Profile::CosineGaussian { frequency }, center, width)
    }

    fn build(profile: Profile, center: &[f64], width: f64) -> Result<Self> {
        if center.is_empty() || center.len() > 2 {
            return Err(IntegralError::DimensionTooLarge(center.len()));
        }
        if !(width > 0.0) || !center.iter().all(|c| c.is_finite()) {
            return Err(IntegralError::InvalidTestFunction(format!(
                "width {width} and centers {center:?} must be finite and positive width"
            )));
        }
        Ok(TestFunction {
            profile,
            center: center.to_vec(),
            width,
        })
    }

    /// Three catalog functions in dimension n.
    pub fn catalog(n: usize) -> Vec<TestFunction> {
        match n {
            1 => vec![
                Self::gaussian(&[0.0], 0.3).unwrap(),
                Self::gaussian(&[0.4], 0.2).unwrap(),
                Self::cosine_gaussian(&[-0.2], 0.35, 1.0).unwrap(),
            ],
            _ => vec![
                Self::gaussian(&[0.3, -0.2], 0.2).unwrap(),
                Self::gaussian(&[0.0, 0.0], 0.25).unwrap(),
                Self::cosine_gaussian(&[0.5, -0.1], 0.2, 0.8).unwrap(),
            ],
        }
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    /// Radius around the centers beyond which the profile is below 1e−16.
    pub fn support_radius(&self) -> f64 {
        SUPPORT_SIGMAS * self.width
    }

    #[inline]
    pub fn profile_at(&self, t: f64) -> f64 {
        let g = (-t * t / (2.0 * self.width * self.width)).exp();
        match self.profile {
            Profile::Gaussian => g,
            Profile::CosineGaussian { frequency } => g * (2.0 * PI * frequency * t).cos(),
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        match (v.len(), self.center.len()) {
            (1, 1) => self.profile_at(v[0] - self.center[0]),
            (2, 2) => {
                let c = &self.center;
                0.5 * (self.profile_at(v[0] - c[0]) * self.profile_at(v[1] - c[1])
                    + self.profile_at(v[0] - c[1]) * self.profile_at(v[1] - c[0]))
            }
            _ => f64::NAN,
        }
    }

    /// Interval holding every coordinate of the effective support.
    pub fn bounds(&self, radius: f64) -> (f64, f64) {
        let lo = self.center.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.center.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - radius, hi + radius)
    }

    fn modulation(&self) -> f64 {
        match self.profile {
            Profile::Gaussian => 0.0,
            Profile::CosineGaussian { frequency } => frequency.abs(),
        }
    }

    /// Frequency beyond which the Fourier transform of the profile is below tol.
    fn bandwidth(&self, tol: f64) -> f64 {
        ((1.0 / tol).ln() / 2.0).sqrt() / (PI * self.width) + self.modulation()
    }
}

/// Radius at which the profile beats a measure growing like e^{growth·|λ₁−λ₂|}.
fn effective_radius(phi: &TestFunction, growth: f64) -> f64 {
    let mut r = phi.support_radius();
    if phi.dimension() < 2 {
        return r;
    }
    let spread = (phi.center[0] - phi.center[1]).abs();
    let w2 = 2.0 * phi.width * phi.width;
    while -r * r / w2 + growth * (2.0 * r + spread) > -37.0 {
        r += 0.1 * phi.width;
    }
    r
}

// ---------------------------------------------------------------------------
// basic integrals

/// Checks equal imaginary parts within each tuple and |Im(λ_i − γ_j)| < ν_g/2;
/// returns the largest imaginary gap.
fn imaginary_gap(p: &Params, gamma: &[C64], lambda: &[C64]) -> Result<f64> {
    for (name, t) in [("γ", gamma), ("λ", lambda)] {
        if let Some(first) = t.first() {
            if t.iter().any(|v| (v.im - first.im).abs() > 1e-12) {
                return Err(IntegralError::ConditionViolation(format!(
                    "imaginary parts of {name} must coincide"
                )));
            }
        }
        if t.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(IntegralError::ConditionViolation(format!("non-finite entry in {name}")));
        }
    }
    let mut gap: f64 = 0.0;
    for l in lambda {
        for g in gamma {
            gap = gap.max((l.im - g.im).abs());
        }
    }
    if !(gap < p.nu_g / 2.0) {
        return Err(IntegralError::ConditionViolation(format!(
            "|Im(λ_i − γ_j)| = {gap} must be below ν_g/2 = {}",
            p.nu_g / 2.0
        )));
    }
    Ok(gap)
}

fn max_abs_re(v: &[C64]) -> f64 {
    v.iter().map(|z| z.re.abs()).fold(0.0, f64::max)
}

#[inline]
fn cis(phase: C64) -> C64 {
    (C64::new(0.0, 2.0 * PI) * phase).exp()
}

/// Lattice step and window reaches shared by the I and J sums.
struct PairingLattice {
    h: f64,
    tol: f64,
    reach_inner: i64,
    reach_outer: i64,
    center: i64,
}

impl PairingLattice {
    fn new(ctx: &KernelContext, gamma: &[C64], lambda: &[C64], gap: f64, x: f64, tol: f64) -> Result<Self> {
        let p = &ctx.params;
        let h = lattice_step(p, 0.0, max_abs_re(gamma) + max_abs_re(lambda), tol)?;
        let amp = ctx.kernel_bound.max(1.0).powi(2);
        let reach_inner = (window_radius(2.0 * PI * p.nu_g, amp, tol)? / h).ceil() as i64;
        let reach_outer = (window_radius(PI * p.nu_g - 2.0 * PI * gap, amp, tol)? / h).ceil() as i64;
        Ok(PairingLattice {
            h,
            tol,
            reach_inner,
            reach_outer,
            center: (x / h).round() as i64,
        })
    }

    fn result(&self, value: C64, mass: f64, nodes: usize) -> IntegralResult {
        IntegralResult {
            value,
            error_estimate: self.tol * mass,
            nodes_used: nodes,
            truncation_radius_used: self.reach_outer as f64 * self.h,
        }
    }
}

/// J at complex tuples, after the condition check.
fn j_numeric(ctx: &KernelContext, gamma: &[C64], lambda: &[C64], x: f64, tol: f64) -> Result<IntegralResult> {
    let gap = imaginary_gap(&ctx.params, gamma, lambda)?;
    let lat = PairingLattice::new(ctx, gamma, lambda, gap, x, tol)?;
    let h = lat.h;
    let lo = lat.center - lat.reach_outer;
    let hi = lat.center + lat.reach_outer;
    let row = KernelRow::new(&ctx.params, C64::new(x, 0.0), h, lo, hi)?;
    match gamma.len() {
        1 => {
            let freq = lambda[0] - gamma[0];
            let mut acc = CompensatedSum::new();
            let mut mass = 0.0;
            for a in lo..=hi {
                let t = cis(freq * (a as f64 * h)) * row.get(a);
                acc.add(t);
                mass += t.norm();
            }
            Ok(lat.result(acc.value() * h, mass * h, (hi - lo + 1) as usize))
        }
        2 => {
            let lk = LatticeKernels::new(ctx, h, (hi - lo + lat.reach_inner + 1) as usize)?;
            let tl = Psi2Table::build(&lk, lambda[0], lambda[1], lo, hi, lat.reach_inner)?;
            let tg = Psi2Table::build(&lk, -gamma[0], -gamma[1], lo, hi, lat.reach_inner)?;
            // ordered pairs a ≠ b with 1/2! collapse to a < b
            let partial: Vec<(C64, f64)> = (lo..=hi)
                .into_par_iter()
                .map(|a| {
                    let mut acc = CompensatedSum::new();
                    let mut mass = 0.0;
                    for b in (a + 1)..=hi {
                        let w = lk.pair(a - b) * row.get(a) * row.get(b);
                        acc.add(w * tg.get(a, b) * tl.get(a, b));
                        mass += w.norm()
                            * tg.mass(a, b).max(tg.get(a, b).norm())
                            * tl.mass(a, b).max(tl.get(a, b).norm());
                    }
                    (acc.value(), mass)
                })
                .collect();
            let (value, mass) = reduce(partial);
            let w = (hi - lo + 1) as usize;
            Ok(lat.result(value * h * h, mass * h * h, w * w / 2))
        }
        n => Err(IntegralError::DimensionTooLarge(n)),
    }
}

fn reduce(parts: Vec<(C64, f64)>) -> (C64, f64) {
    let mut acc = CompensatedSum::new();
    let mut mass = 0.0;
    for (v, m) in parts {
        acc.add(v);
        mass += m;
    }
    (acc.value(), mass)
}

/// I at complex tuples (|γ| = n, |λ| = n + 1), after the condition check.
fn i_numeric(ctx: &KernelContext, gamma: &[C64], lambda: &[C64], x: f64, tol: f64) -> Result<IntegralResult> {
    let gap = imaginary_gap(&ctx.params, gamma, lambda)?;
    if gamma.is_empty() {
        // no integration: I(∅, λ₁; x) = Ψ_{λ₁}(x)
        return Ok(IntegralResult {
            value: cis(lambda[0] * x),
            error_estimate: 0.0,
            nodes_used: 1,
            truncation_radius_used: 0.0,
        });
    }
    let lat = PairingLattice::new(ctx, gamma, lambda, gap, x, tol)?;
    match gamma.len() {
        1 => i_one(ctx, &lat, gamma[0], lambda, x),
        2 => i_two(ctx, &lat, gamma, lambda, x),
        n => Err(IntegralError::DimensionTooLarge(n)),
    }
}

/// Σ_a h·e^{−2πiγah}·Ψ_λ(ah, x) with Ψ₂ summed against a row of K(x − kh).
fn i_one(ctx: &KernelContext, lat: &PairingLattice, gamma: C64, lambda: &[C64], x: f64) -> Result<IntegralResult> {
    let h = lat.h;
    let (r, ri, c0) = (lat.reach_outer, lat.reach_inner, lat.center);
    let lo = c0 - r;
    let hi = c0 + r;
    let klo = lo - ri;
    let khi = hi + ri;
    let lk = LatticeKernels::new(ctx, h, (khi - klo + 1) as usize)?;
    let xrow = KernelRow::new(&ctx.params, C64::new(x, 0.0), h, klo, khi)?;
    let delta = lambda[0] - lambda[1];
    let d1 = lk.d(1);
    let partial: Vec<(C64, f64)> = (lo..=hi)
        .into_par_iter()
        .map(|a| {
            let mut acc = CompensatedSum::new();
            let mut mass = 0.0;
            for k in (a.min(c0) - ri)..=(a.max(c0) + ri) {
                let t = cis(delta * (k as f64 * h)) * lk.k(a - k) * xrow.get(k);
                acc.add(t);
                mass += t.norm();
            }
            let scale = cis(lambda[1] * (a as f64 * h + x) - gamma * (a as f64 * h)) * d1 * h;
            (acc.value() * scale, mass * scale.norm())
        })
        .collect();
    let (value, mass) = reduce(partial);
    Ok(lat.result(value * h, mass * h, ((hi - lo + 1) * (2 * ri + r)) as usize))
}

/// Σ_{a<b} h²·μ(a,b)·Ψ_{−γ}(a,b)·Ψ_λ(a,b,x), with Ψ₃ as the top-layer sum
/// over the Ψ₂ table of (λ₁, λ₂).
fn i_two(ctx: &KernelContext, lat: &PairingLattice, gamma: &[C64], lambda: &[C64], x: f64) -> Result<IntegralResult> {
    let h = lat.h;
    let p = &ctx.params;
    let (r, ri, c0) = (lat.reach_outer, lat.reach_inner, lat.center);
    // outside the hull of {a, b, x} the Ψ₃ summand decays at 2πν_g
    let amp = ctx.kernel_bound.max(1.0).powi(2);
    let hull_reach = (window_radius(2.0 * PI * p.nu_g - 2.0 * PI * (lambda[2].im - lambda[0].im).abs(), amp, lat.tol)? / h).ceil() as i64;
    let ab_lo = c0 - r;
    let ab_hi = c0 + r;
    let cd_lo = ab_lo - hull_reach;
    let cd_hi = ab_hi + hull_reach;
    let lk = LatticeKernels::new(ctx, h, (cd_hi - cd_lo + ri + 1) as usize)?;
    let tl = Psi2Table::build(&lk, lambda[0], lambda[1], cd_lo, cd_hi, ri)?;
    let tg = Psi2Table::build(&lk, -gamma[0], -gamma[1], ab_lo, ab_hi, ri)?;
    let xrow = KernelRow::new(p, C64::new(x, 0.0), h, cd_lo, cd_hi)?;
    let width = (cd_hi - cd_lo + 1) as usize;
    let l3 = lambda[2];
    let phase: Vec<C64> = (cd_lo..=cd_hi)
        .map(|c| cis(-l3 * (c as f64 * h)) * xrow.get(c))
        .collect();
    // F(c, d) = e^{−2πiλ₃(c+d)h}·K(x−c)K(x−d)·μ(c,d)·Ψ₂(c,d)
    let mut f = vec![C64::new(0.0, 0.0); width * width];
    let mut fm = vec![0.0; width * width];
    for c in cd_lo..=cd_hi {
        let ic = (c - cd_lo) as usize;
        for d in cd_lo..=cd_hi {
            if c == d {
                continue;
            }
            let id = (d - cd_lo) as usize;
            let w = phase[ic] * phase[id] * lk.pair(c - d) * 0.5;
            f[ic * width + id] = w * tl.get(c, d);
            fm[ic * width + id] = w.norm() * tl.mass(c, d).max(tl.get(c, d).norm());
        }
    }
    let d2 = lk.d(2);
    let partial: Vec<(C64, f64)> = (ab_lo..=ab_hi)
        .into_par_iter()
        .map(|a| {
            let mut acc = CompensatedSum::new();
            let mut mass = 0.0;
            let mut w = Vec::with_capacity(width);
            let mut wn = Vec::with_capacity(width);
            for b in (a + 1)..=ab_hi {
                let lo = a.min(c0) - hull_reach;
                let hi = b.max(c0) + hull_reach;
                let off = (lo - cd_lo) as usize;
                w.clear();
                wn.clear();
                for c in lo..=hi {
                    let v = lk.k(a - c) * lk.k(b - c);
                    w.push(v);
                    wn.push(v.norm());
                }
                let len = w.len();
                let mut s = C64::new(0.0, 0.0);
                let mut sm = 0.0;
                for i in 0..len {
                    let row = &f[(off + i) * width + off..(off + i) * width + off + len];
                    let rowm = &fm[(off + i) * width + off..(off + i) * width + off + len];
                    let mut inner = C64::new(0.0, 0.0);
                    let mut inner_m = 0.0;
                    for j in 0..len {
                        inner += row[j] * w[j];
                        inner_m += rowm[j] * wn[j];
                    }
                    s += w[i] * inner;
                    sm += wn[i] * inner_m;
                }
                let pref = d2 * h * h * cis(l3 * ((a + b) as f64 * h + x));
                let outer = lk.pair(a - b) * tg.get(a, b) * h * h;
                acc.add(outer * pref * s);
                mass += outer.norm() / tg.get(a, b).norm().max(f64::MIN_POSITIVE)
                    * tg.mass(a, b).max(tg.get(a, b).norm())
                    * pref.norm()
                    * sm;
            }
            (acc.value(), mass)
        })
        .collect();
    let (value, mass) = reduce(partial);
    let ab = (ab_hi - ab_lo + 1) as usize;
    Ok(lat.result(value, mass, ab * ab / 2 * width))
}

/// (1/d_n)·e^{2πi(Σλ−Σγ)x}·∏K̂(λ_i − γ_j), the common closed form of I and J.
fn closed_form(ctx: &KernelContext, gamma: &[C64], lambda: &[C64], x: f64) -> Result<C64> {
    let inv_d = inverse_d1_with(&ctx.params)?.powu(gamma.len() as u32);
    let sl: C64 = lambda.iter().sum();
    let sg: C64 = gamma.iter().sum();
    Ok(inv_d * cis((sl - sg) * x) * product_hat_k(lambda, gamma, ctx)?)
}

/// J(γ_n, λ_n; x) = ∫ μ(x_n)Ψ_γ(−x_n)K(x, x_n)Ψ_λ(x_n) dx_n for n ≤ 2.
pub fn integral_j(
    gamma: &SpectralVector,
    lambda: &SpectralVector,
    x: f64,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<IntegralResult> {
    if gamma.len() != lambda.len() || gamma.is_empty() {
        return Err(IntegralError::ShapeMismatch(format!(
            "J needs tuples of equal positive length, got {} and {}",
            gamma.len(),
            lambda.len()
        )));
    }
    spec.check()?;
    j_numeric(ctx, gamma.values(), lambda.values(), x, spec.tolerance)
}

pub fn closed_form_j(gamma: &SpectralVector, lambda: &SpectralVector, x: f64, ctx: &KernelContext) -> Result<C64> {
    if gamma.len() != lambda.len() {
        return Err(IntegralError::ShapeMismatch("J needs tuples of equal length".into()));
    }
    imaginary_gap(&ctx.params, gamma.values(), lambda.values())?;
    closed_form(ctx, gamma.values(), lambda.values(), x)
}

/// I(γ_n, λ_{n+1}; x) = ∫ μ(x_n)Ψ_γ(−x_n)Ψ_λ(x_n, x) dx_n for n ≤ 2.
pub fn integral_i(
    gamma: &SpectralVector,
    lambda: &SpectralVector,
    x: f64,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<IntegralResult> {
    if lambda.len() != gamma.len() + 1 {
        return Err(IntegralError::ShapeMismatch(format!(
            "I needs |λ| = |γ| + 1, got {} and {}",
            lambda.len(),
            gamma.len()
        )));
    }
    spec.check()?;
    i_numeric(ctx, gamma.values(), lambda.values(), x, spec.tolerance)
}

pub fn closed_form_i(gamma: &SpectralVector, lambda: &SpectralVector, x: f64, ctx: &KernelContext) -> Result<C64> {
    if lambda.len() != gamma.len() + 1 {
        return Err(IntegralError::ShapeMismatch("I needs |λ| = |γ| + 1".into()));
    }
    imaginary_gap(&ctx.params, gamma.values(), lambda.values())?;
    closed_form(ctx, gamma.values(), lambda.values(), x)
}

/// Both sides of a recurrence between numerically computed integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceCheck {
    pub lhs: C64,
    pub rhs: C64,
    /// |lhs − rhs| / |lhs|.
    pub residual: f64,
}

impl RecurrenceCheck {
    fn new(lhs: C64, rhs: C64) -> Self {
        RecurrenceCheck {
            lhs,
            rhs,
            residual: (lhs - rhs).norm() / lhs.norm(),
        }
    }
}

/// I(γ_n, λ_{n+1}; x) against K̂(λ_{n+1}, γ_n)·e^{2πiλ_{n+1}x}·J(γ_n, λ_n; x).
pub fn recurrence_ij1(
    gamma: &SpectralVector,
    lambda: &SpectralVector,
    x: f64,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<RecurrenceCheck> {
    let n = gamma.len();
    if lambda.len() != n + 1 || n == 0 {
        return Err(IntegralError::ShapeMismatch("IJ1 needs |λ| = |γ| + 1 ≥ 2".into()));
    }
    let lhs = integral_i(gamma, lambda, x, ctx, spec)?.value;
    let (head, top) = lambda.values().split_at(n);
    let j = j_numeric(ctx, gamma.values(), head, x, spec.tolerance)?.value;
    let rhs = product_hat_k(top, gamma.values(), ctx)? * cis(top[0] * x) * j;
    Ok(RecurrenceCheck::new(lhs, rhs))
}

/// J(γ_n, λ_n; x) against (d_{n−1}/d_n)·K̂(λ_n, γ_n)·e^{2πiλ_n x}·I(−λ_{n−1}, −γ_n; x).
pub fn recurrence_ij2(
    gamma: &SpectralVector,
    lambda: &SpectralVector,
    x: f64,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<RecurrenceCheck> {
    let n = gamma.len();
    if lambda.len() != n || n == 0 {
        return Err(IntegralError::ShapeMismatch("IJ2 needs tuples of equal positive length".into()));
    }
    let lhs = integral_j(gamma, lambda, x, ctx, spec)?.value;
    let (head, top) = lambda.values().split_at(n - 1);
    let neg_head: Vec<C64> = head.iter().map(|v| -v).collect();
    let neg_gamma: Vec<C64> = gamma.values().iter().map(|v| -v).collect();
    let i = i_numeric(ctx, &neg_head, &neg_gamma, x, spec.tolerance)?.value;
    let ratio = norm_d(n as u32 - 1, ctx)? / norm_d(n as u32, ctx)?;
    let rhs = ratio * product_hat_k(top, gamma.values(), ctx)? * cis(top[0] * x) * i;
    Ok(RecurrenceCheck::new(lhs, rhs))
}

// ---------------------------------------------------------------------------
// regularized pairing and delta sequences

fn pairing_shift(p: &Params, eps: f64) -> C64 {
    C64::i() * (p.ghat / 2.0) - C64::new(0.0, eps)
}

fn check_eps(p: &Params, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < p.nu_g / 2.0) {
        return Err(IntegralError::ConditionViolation(format!(
            "ε = {eps} must lie in (0, ν_g/2 = {})",
            p.nu_g / 2.0
        )));
    }
    Ok(())
}

/// (Ψ_λ′|Ψ_λ)^{x,ε}: the x_n-integral of μ·e^{2π(ε−ĝ/2)(Σx_n − nx)}·K(x, x_n)·Ψ_λ′(−x_n)Ψ_λ(x_n),
/// evaluated as e^{πĝnx − 2πεnx}·J(λ′, λ + (iĝ/2 − iε)e; x).
pub fn regularized_pairing(
    lambda_prime: &SpectralVector,
    lambda: &SpectralVector,
    x: f64,
    eps: f64,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<IntegralResult> {
    let p = &ctx.params;
    check_eps(p, eps)?;
    if lambda.len() != lambda_prime.len() || lambda.is_empty() {
        return Err(IntegralError::ShapeMismatch("pairing needs tuples of equal positive length".into()));
    }
    spec.check()?;
    let n = lambda.len() as f64;
    let shift = pairing_shift(p, eps);
    let shifted: Vec<C64> = lambda.values().iter().map(|v| v + shift).collect();
    let j = j_numeric(ctx, lambda_prime.values(), &shifted, x, spec.tolerance)?;
    let factor = (p.ghat * (PI * n * x) - 2.0 * PI * eps * n * x).exp();
    Ok(IntegralResult {
        value: j.value * factor,
        error_estimate: j.error_estimate * factor.norm(),
        ..j
    })
}

/// (1/d_n)·e^{2πi(Σλ−Σλ′)x}·∏K̂(λ_i − λ′_j + iĝ/2 − iε).
pub fn closed_form_pairing(
    lambda_prime: &[C64],
    lambda: &[C64],
    x: f64,
    eps: f64,
    ctx: &KernelContext,
) -> Result<C64> {
    let p = &ctx.params;
    check_eps(p, eps)?;
    let shift = pairing_shift(p, eps);
    let shifted: Vec<C64> = lambda.iter().map(|v| v + shift).collect();
    let inv_d = inverse_d1_with(p)?.powu(lambda.len() as u32);
    let sl: C64 = lambda.iter().sum();
    let slp: C64 = lambda_prime.iter().sum();
    Ok(inv_d * cis((sl - slp) * x) * product_hat_k(&shifted, lambda_prime, ctx)?)
}

/// Even function tabulated on [0, max] and read back by quintic interpolation.
struct EvenTable {
    step: f64,
    values: Vec<C64>,
}

impl EvenTable {
    fn new<F: Fn(f64) -> std::result::Result<C64, KernelError> + Sync>(f: F, max: f64, step: f64) -> Result<Self> {
        let count = (max / step).ceil() as usize + 4;
        let values = (0..=count)
            .into_par_iter()
            .map(|k| f(k as f64 * step))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(EvenTable { step, values })
    }

    fn get(&self, u: f64) -> C64 {
        let t = u.abs() / self.step;
        let base = (t.floor() as i64 - 2).max(-3);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..6 {
            let k = base + i;
            let mut w = 1.0;
            for j in 0..6 {
                if j != i {
                    w *= (t - (base + j) as f64) / (i - j) as f64;
                }
            }
            acc += self.values[k.unsigned_abs() as usize] * w;
        }
        acc
    }
}

/// μ̂(u)μ̂(−u), the dual measure pair.
fn hat_measure_pair(p: &Params, u: f64) -> std::result::Result<C64, KernelError> {
    if u == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let y = C64::new(u, 0.0);
    let a = log_measure_with(p, y)?;
    let b = log_measure_with(p, -y)?;
    Ok(match (a, b) {
        (Some(a), Some(b)) => (a + b).exp(),
        _ => C64::new(0.0, 0.0),
    })
}

/// Kronrod panels on [lo, hi], graded geometrically toward each singular point
/// down to `scale`, with at most `panel` per piece elsewhere.
fn graded_rule(lo: f64, hi: f64, singular: &[f64], scale: f64, panel: f64) -> Vec<(f64, f64)> {
    let mut breaks = vec![lo, hi];
    for &s in singular {
        if s > lo && s < hi {
            breaks.push(s);
            let mut d = scale;
            while d < panel {
                breaks.push(s - d);
                breaks.push(s + d);
                d *= 2.0;
            }
        }
    }
    breaks.retain(|b| *b >= lo && *b <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut nodes = Vec::new();
    for w in breaks.windows(2) {
        let pieces = ((w[1] - w[0]) / panel).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let a = w[0] + (w[1] - w[0]) * k as f64 / pieces as f64;
            let b = w[0] + (w[1] - w[0]) * (k + 1) as f64 / pieces as f64;
            nodes.extend(kronrod_nodes(a, b));
        }
    }
    nodes
}

/// ∫dλ′ μ̂(λ′)φ(λ′)·closed-form pairing(λ′, λ; x, ε), using the factorization
/// of the closed form into one-variable factors.
fn delta_value(
    ctx: &KernelContext,
    phi: &TestFunction,
    lambda: &[f64],
    rule: &[(f64, f64)],
    table: Option<&EvenTable>,
    x: f64,
    eps: f64,
) -> Result<C64> {
    let p = &ctx.params;
    let shift = pairing_shift(p, eps);
    let factors: Vec<C64> = rule
        .par_iter()
        .map(|&(t, _)| -> std::result::Result<C64, KernelError> {
            let mut v = cis(C64::new(-t * x, 0.0));
            for &l in lambda {
                v *= hat_k(C64::new(l - t, 0.0) + shift, ctx)?;
            }
            Ok(v)
        })
        .collect::<std::result::Result<_, _>>()?;
    let n = lambda.len();
    let sum_l: f64 = lambda.iter().sum();
    let pref = inverse_d1_with(p)?.powu(n as u32) * cis(C64::new(sum_l * x, 0.0));
    let value = match n {
        1 => {
            let mut acc = CompensatedSum::new();
            for (&(t, w), g) in rule.iter().zip(&factors) {
                acc.add(g * (w * phi.eval(&[t])));
            }
            acc.value()
        }
        2 => {
            let table = table.expect("two-particle delta needs the measure table");
            let prof: Vec<[f64; 2]> = rule
                .iter()
                .map(|&(t, _)| [phi.profile_at(t - phi.center[0]), phi.profile_at(t - phi.center[1])])
                .collect();
            let parts: Vec<C64> = (0..rule.len())
                .into_par_iter()
                .map(|i| {
                    let (ti, wi) = rule[i];
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..rule.len() {
                        let (tj, wj) = rule[j];
                        let sym = 0.5 * (prof[i][0] * prof[j][1] + prof[i][1] * prof[j][0]);
                        if sym == 0.0 {
                            continue;
                        }
                        acc += table.get(ti - tj) * factors[j] * (0.5 * sym * wj);
                    }
                    acc * factors[i] * wi
                })
                .collect();
            let mut acc = CompensatedSum::new();
            for v in parts {
                acc.add(v);
            }
            acc.value()
        }
        m => return Err(IntegralError::DimensionTooLarge(m)),
    };
    Ok(value * pref)
}

/// Values along a schedule and the extrapolated double limit.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSequence {
    pub points: Vec<(f64, f64)>,
    pub values: Vec<C64>,
    /// |value − φ(λ)| along the schedule.
    pub deviations: Vec<f64>,
    pub target: f64,
    /// Fitted L, A, B in L + A/x + B·ε after dividing out e^{−2πnεx}.
    pub fit: [C64; 3],
    pub monotone: bool,
}

impl DeltaSequence {
    pub fn limit(&self) -> C64 {
        self.fit[0]
    }

    pub fn limit_deviation(&self) -> f64 {
        (self.fit[0] - self.target).norm()
    }
}

/// Least squares for v ≈ L + A/x + B·ε with columns scaled to unit size.
fn fit_limit(points: &[(f64, f64)], values: &[C64]) -> [C64; 3] {
    let x0 = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let e0 = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let basis = |(x, e): (f64, f64)| [1.0, x0 / x, e / e0];
    let mut m = [[0.0; 3]; 3];
    let mut r = [C64::new(0.0, 0.0); 3];
    for (&pt, &v) in points.iter().zip(values) {
        let b = basis(pt);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += b[i] * b[j];
            }
            r[i] += v * b[i];
        }
    }
    // Gaussian elimination with partial pivoting
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        r.swap(col, piv);
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] = r[row] - r[col] * f;
        }
    }
    let mut sol = [C64::new(0.0, 0.0); 3];
    for i in (0..3).rev() {
        let mut s = r[i];
        for k in (i + 1)..3 {
            s -= sol[k] * m[i][k];
        }
        sol[i] = s / m[i][i];
    }
    [sol[0], sol[1] * x0, sol[2] / e0]
}

/// Integrates the closed-form pairing against μ̂φ along the schedule.
///
/// At λ′ = λ the closed form has a pole at distance ε below the real axis,
/// whose residue carries e^{−2πnεx}. That factor tends to 1 in the inner limit
/// ε → 0 taken first, so it is divided out before fitting L + A/x + B·ε.
pub fn delta_sequence(
    phi: &TestFunction,
    lambda: &[f64],
    schedule: &RegularizationSchedule,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<DeltaSequence> {
    let n = lambda.len();
    if n == 0 || n > 2 {
        return Err(IntegralError::DimensionTooLarge(n));
    }
    if phi.dimension() != n {
        return Err(IntegralError::ShapeMismatch(format!(
            "test function of dimension {} against {n} spectral values",
            phi.dimension()
        )));
    }
    spec.check()?;
    schedule.validate(&ctx.params)?;
    let radius = effective_radius(phi, 2.0 * ctx.hat_kernel_rate());
    let (lo, hi) = phi.bounds(radius);
    let table = if n == 2 {
        Some(EvenTable::new(|u| hat_measure_pair(&ctx.dual, u), hi - lo, MEASURE_TABLE_STEP)?)
    } else {
        None
    };
    let points = schedule.points();
    let values = points
        .iter()
        .map(|&(x, eps)| {
            let rule = graded_rule(lo, hi, lambda, eps, (2.0 / x).min(0.25));
            delta_value(ctx, phi, lambda, &rule, table.as_ref(), x, eps)
        })
        .collect::<Result<Vec<C64>>>()?;
    let target = phi.eval(lambda);
    let deviations: Vec<f64> = values.iter().map(|v| (v - target).norm()).collect();
    let monotone = deviations.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK);
    let rescaled: Vec<C64> = values
        .iter()
        .zip(&points)
        .map(|(v, &(x, eps))| v * (2.0 * PI * n as f64 * eps * x).exp())
        .collect();
    let fit = fit_limit(&points, &rescaled);
    Ok(DeltaSequence {
        points,
        values,
        deviations,
        target,
        fit,
        monotone,
    })
}

/// Delta-sequence report: passes when the deviations decrease along the
/// schedule and the extrapolated limit is within the n-dependent tolerance.
pub fn delta_sequence_test(
    phi: &TestFunction,
    lambda: &[f64],
    schedule: &RegularizationSchedule,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<VerificationReport> {
    let started = Instant::now();
    let seq = delta_sequence(phi, lambda, schedule, ctx, spec)?;
    let tol = if lambda.len() == 1 {
        DELTA_TOLERANCE_N1
    } else {
        DELTA_TOLERANCE_N2
    };
    let residual = seq.limit_deviation();
    let rep = VerificationReport::new("delta-sequence", lambda.len(), residual, tol, started)
        .with_pass(seq.monotone && residual <= tol)
        .with_meta("schedule", format!("{:?}", seq.points))
        .with_meta("deviations", format!("{:?}", seq.deviations))
        .with_meta("monotone", seq.monotone)
        .with_meta("fit", "L + A/x + B·eps after removing exp(-2π n eps x); diagnostic")
        .with_meta("fit_A", format!("{:.3e}", seq.fit[1]))
        .with_meta("fit_B", format!("{:.3e}", seq.fit[2]))
        .with_meta("limit", format!("{:.12e}", seq.limit()))
        .with_meta("target", format!("{:.12e}", seq.target));
    Ok(rep)
}

// ---------------------------------------------------------------------------
// transforms

fn transform_spec(spec: &QuadratureSpec) -> QuadratureSpec {
    QuadratureSpec {
        tolerance: spec.tolerance.min(1e-10),
        ..*spec
    }
}

/// (Tφ)(x) = ∫ e^{2πiλx}φ(λ)dλ at n = 1, where μ̂ = 1.
fn transform_one(phi: &TestFunction, x: f64, spec: &QuadratureSpec) -> Result<C64> {
    let (lo, hi) = phi.bounds(phi.support_radius());
    let f = |l: f64| C64::new(0.0, 2.0 * PI * l * x).exp() * phi.eval(&[l]);
    Ok(integrate_interval(&f, lo, hi, &[], x.abs(), spec)?.value)
}

/// μ̂φ on a uniform spectral grid, the data behind every two-particle transform.
struct SpectralGrid {
    nodes: Vec<f64>,
    /// μ̂(λ_p, λ_q)·φ(λ_p, λ_q)·step², row-major.
    weights: Vec<f64>,
    norm_sq: f64,
}

impl SpectralGrid {
    fn new(ctx: &KernelContext, phi: &TestFunction, max_frequency: f64, tol: f64) -> Result<Self> {
        if !ctx.params.is_real() {
            return Err(IntegralError::ConditionViolation(
                "two-particle transforms are implemented for real parameters".into(),
            ));
        }
        let radius = effective_radius(phi, 2.0 * ctx.hat_kernel_rate());
        let (lo, hi) = phi.bounds(radius);
        let band = phi.bandwidth(tol) + (1.0 / tol).ln() / (2.0 * PI * measure_strip(ctx));
        let step = 1.0 / (max_frequency + band);
        let count = ((hi - lo) / step).ceil() as usize + 1;
        let nodes: Vec<f64> = (0..count).map(|k| lo + k as f64 * step).collect();
        let pair: Vec<C64> = (0..count)
            .into_par_iter()
            .map(|k| hat_measure_pair(&ctx.dual, k as f64 * step))
            .collect::<std::result::Result<_, _>>()?;
        let mut weights = vec![0.0; count * count];
        let mut norm_sq = 0.0;
        for p in 0..count {
            for q in 0..count {
                let m = 0.5 * pair[p.abs_diff(q)].re;
                let v = phi.eval(&[nodes[p], nodes[q]]);
                weights[p * count + q] = m * v * step * step;
                norm_sq += m * v * v * step * step;
            }
        }
        Ok(SpectralGrid {
            nodes,
            weights,
            norm_sq,
        })
    }

    /// Φ̃(u, v) = Σ μ̂φ·e^{2πi(λ_p u + λ_q v)} for all pairs of the given grids.
    fn fourier(&self, us: &[f64], vs: &[f64]) -> Vec<C64> {
        let count = self.nodes.len();
        let ev: Vec<Vec<C64>> = vs
            .par_iter()
            .map(|&v| self.nodes.iter().map(|&l| C64::new(0.0, 2.0 * PI * l * v).exp()).collect())
            .collect();
        // row sums over q for each v, then the p sum per u
        let inner: Vec<Vec<C64>> = ev
            .par_iter()
            .map(|e| {
                (0..count)
                    .map(|p| {
                        let row = &self.weights[p * count..(p + 1) * count];
                        row.iter().zip(e).map(|(w, z)| z * w).sum()
                    })
                    .collect()
            })
            .collect();
        us.par_iter()
            .flat_map_iter(|&u| {
                let eu: Vec<C64> = self.nodes.iter().map(|&l| C64::new(0.0, 2.0 * PI * l * u).exp()).collect();
                inner
                    .iter()
                    .map(move |col| col.iter().zip(&eu).map(|(a, b)| a * b).sum::<C64>())
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// Half-width of the strip around the real axis where μ̂ is analytic.
fn measure_strip(ctx: &KernelContext) -> f64 {
    let d = &ctx.dual;
    STRIP_FRACTION * d.g.re.min((d.omega1 + d.omega2).re)
}

/// Tφ(x₁, x₂) = d₁∫dy K(x₁−y)K(x₂−y)·Φ̃(y, x₁+x₂−y), with Φ̃ the Fourier
/// transform of μ̂φ, summed on the lattice y = kh.
fn transform_two(ctx: &KernelContext, phi: &TestFunction, x: &[f64], tol: f64) -> Result<C64> {
    let p = &ctx.params;
    let radius = effective_radius(phi, 2.0 * ctx.hat_kernel_rate());
    let (lo, hi) = phi.bounds(radius);
    let h = lattice_step(p, 0.0, lo.abs().max(hi.abs()), tol)?;
    let amp = ctx.kernel_bound.max(1.0).powi(2);
    let reach = (window_radius(PI * p.nu_g, amp, tol)? / h).ceil() as i64;
    let klo = (x[0].min(x[1]) / h).floor() as i64 - reach;
    let khi = (x[0].max(x[1]) / h).ceil() as i64 + reach;
    let r1 = KernelRow::new(p, C64::new(x[0], 0.0), h, klo, khi)?;
    let r2 = KernelRow::new(p, C64::new(x[1], 0.0), h, klo, khi)?;
    let s = x[0] + x[1];
    let us: Vec<f64> = (klo..=khi).map(|k| k as f64 * h).collect();
    let max_freq = us.iter().map(|u| u.abs().max((s - u).abs())).fold(0.0, f64::max);
    let grid = SpectralGrid::new(ctx, phi, max_freq, tol)?;
    let mut acc = CompensatedSum::new();
    for (i, &u) in us.iter().enumerate() {
        let k = klo + i as i64;
        let phi_t = grid.fourier(&[u], &[s - u])[0];
        acc.add(r1.get(k) * r2.get(k) * phi_t);
    }
    Ok(acc.value() * norm_d(1, ctx)? * h)
}

/// (Tφ)(x_n) = ∫ μ̂(λ)Ψ_λ(x)φ(λ)dλ for n ≤ 2.
pub fn transform_t(phi: &TestFunction, x: &[f64], ctx: &KernelContext, spec: &QuadratureSpec) -> Result<C64> {
    if x.len() != phi.dimension() {
        return Err(IntegralError::ShapeMismatch(format!(
            "{} coordinates for a test function of dimension {}",
            x.len(),
            phi.dimension()
        )));
    }
    let spec = transform_spec(spec);
    match x.len() {
        1 => transform_one(phi, x[0], &spec),
        2 => transform_two(ctx, phi, x, spec.tolerance),
        n => Err(IntegralError::DimensionTooLarge(n)),
    }
}

/// (Sf)(λ_n) = ∫ μ(x)Ψ_λ(x)f(x)dx for n ≤ 2; by duality this is the T
/// transform of the dual system with coordinates and spectral values swapped.
pub fn transform_s(f: &TestFunction, lambda: &[f64], ctx: &KernelContext, spec: &QuadratureSpec) -> Result<C64> {
    if lambda.len() == 1 {
        return transform_t(f, lambda, ctx, spec);
    }
    let dual = ctx.dualized()?;
    transform_t(f, lambda, &dual, spec)
}

/// Squared norms ‖Tφ‖²_μ and ‖φ‖²_μ̂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlancherelNorms {
    pub transformed: f64,
    pub original: f64,
}

impl PlancherelNorms {
    /// ‖Tφ‖²/‖φ‖², the measured normalization constant c_n.
    pub fn ratio(&self) -> f64 {
        self.transformed / self.original
    }
}

fn plancherel_one(phi: &TestFunction, spec: &QuadratureSpec) -> Result<PlancherelNorms> {
    let (lo, hi) = phi.bounds(phi.support_radius());
    let reach = phi.bandwidth(spec.tolerance * 1e-4);
    let f = |x: f64| C64::new(transform_one(phi, x, spec).map(|v| v.norm_sqr()).unwrap_or(f64::NAN), 0.0);
    let transformed = integrate_interval(&f, -reach, reach, &[], 2.0 * lo.abs().max(hi.abs()), spec)?.value.re;
    if !transformed.is_finite() {
        return Err(IntegralError::Quadrature(QuadError::InvalidSpec("inner transform failed".into())));
    }
    let g = |l: f64| C64::new(phi.eval(&[l]).powi(2), 0.0);
    let original = integrate_interval(&g, lo, hi, &[], 0.0, spec)?.value.re;
    Ok(PlancherelNorms {
        transformed,
        original,
    })
}

/// ‖Tφ‖²_μ on the coordinate lattice, with Tφ from one Fourier table of μ̂φ.
fn plancherel_two(ctx: &KernelContext, phi: &TestFunction, tol: f64) -> Result<PlancherelNorms> {
    let p = &ctx.params;
    let radius = effective_radius(phi, 2.0 * ctx.hat_kernel_rate());
    let (lo, hi) = phi.bounds(radius);
    let h = lattice_step(p, 0.0, lo.abs().max(hi.abs()), tol)?;
    let amp = ctx.kernel_bound.max(1.0).powi(2);
    let reach = (window_radius(PI * p.nu_g, amp, tol)? / h).ceil() as i64;
    let box_reach = phi.bandwidth(tol) + (1.0 / tol).ln() / (2.0 * PI * measure_strip(ctx));
    let xb = (box_reach / h).ceil() as i64;
    let (ulo, uhi) = (-xb - reach, xb + reach);
    let (vlo, vhi) = (-2 * xb - xb - reach, 2 * xb + xb + reach);
    let us: Vec<f64> = (ulo..=uhi).map(|k| k as f64 * h).collect();
    let vs: Vec<f64> = (vlo..=vhi).map(|k| k as f64 * h).collect();
    let max_freq = vs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let grid = SpectralGrid::new(ctx, phi, max_freq, tol)?;
    let table = grid.fourier(&us, &vs);
    let nv = vs.len();
    let lk = LatticeKernels::new(ctx, h, (4 * xb + 2 * reach + 2) as usize)?;
    let d1 = lk.d(1);
    let partial: Vec<(C64, f64)> = (-xb..=xb)
        .into_par_iter()
        .map(|a| {
            let mut acc = CompensatedSum::new();
            for b in (a + 1)..=xb {
                let mut t = CompensatedSum::new();
                for k in (a - reach)..=(b + reach) {
                    let v = a + b - k;
                    if v < vlo || v > vhi || k < ulo || k > uhi {
                        continue;
                    }
                    let f = table[(k - ulo) as usize * nv + (v - vlo) as usize];
                    t.add(lk.k(a - k) * lk.k(b - k) * f);
                }
                let tphi = t.value() * d1 * h;
                acc.add(lk.pair(a - b) * tphi.norm_sqr());
            }
            (acc.value(), 0.0)
        })
        .collect();
    let (value, _) = reduce(partial);
    Ok(PlancherelNorms {
        transformed: value.re * h * h,
        original: grid.norm_sq,
    })
}

/// ‖Tφ‖²_μ and ‖φ‖²_μ̂ for n ≤ 2.
pub fn plancherel_norms(phi: &TestFunction, ctx: &KernelContext, spec: &QuadratureSpec) -> Result<PlancherelNorms> {
    let spec = transform_spec(spec);
    match phi.dimension() {
        1 => plancherel_one(phi, &spec),
        2 => plancherel_two(ctx, phi, spec.tolerance),
        n => Err(IntegralError::DimensionTooLarge(n)),
    }
}

/// Isometry defect |‖Tφ‖²/‖φ‖² − 1|; the ratio is reported as the measured c_n.
pub fn plancherel_check(phi: &TestFunction, ctx: &KernelContext, spec: &QuadratureSpec) -> Result<VerificationReport> {
    let started = Instant::now();
    let norms = plancherel_norms(phi, ctx, spec)?;
    let n = phi.dimension();
    let tol = if n == 1 {
        PLANCHEREL_TOLERANCE_N1
    } else {
        PLANCHEREL_TOLERANCE_N2
    };
    Ok(VerificationReport::new("plancherel", n, (norms.ratio() - 1.0).abs(), tol, started)
        .with_meta("measured_c", format!("{:.12}", norms.ratio()))
        .with_meta("norm_T_sq", format!("{:.12e}", norms.transformed))
        .with_meta("norm_phi_sq", format!("{:.12e}", norms.original))
        .with_meta("test_function", format!("{phi:?}")))
}

/// S(Tφ)(λ) at n = 1, the x-integral of e^{2πiλx}·Tφ(x).
pub fn inverse_of_transform(phi: &TestFunction, lambda: f64, spec: &QuadratureSpec) -> Result<C64> {
    if phi.dimension() != 1 {
        return Err(IntegralError::DimensionTooLarge(phi.dimension()));
    }
    let spec = transform_spec(spec);
    let (lo, hi) = phi.bounds(phi.support_radius());
    let reach = phi.bandwidth(spec.tolerance * 1e-4);
    let f = |x: f64| {
        let t = transform_one(phi, x, &spec).unwrap_or(C64::new(f64::NAN, f64::NAN));
        C64::new(0.0, 2.0 * PI * lambda * x).exp() * t
    };
    let freq = lambda.abs() + lo.abs().max(hi.abs());
    let v = integrate_interval(&f, -reach, reach, &[], freq, &spec)?.value;
    if !v.re.is_finite() {
        return Err(IntegralError::Quadrature(QuadError::InvalidSpec("inner transform failed".into())));
    }
    Ok(v)
}

/// max over the points of |S(Tφ)(λ) − φ(−λ)| at n = 1.
pub fn inversion_check(phi: &TestFunction, points: &[f64], spec: &QuadratureSpec) -> Result<VerificationReport> {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for &l in points {
        let v = inverse_of_transform(phi, l, spec)?;
        worst = worst.max((v - phi.eval(&[-l])).norm());
    }
    Ok(VerificationReport::new("inversion", 1, worst, PLANCHEREL_TOLERANCE_N1, started)
        .with_meta("points", points.len())
        .with_meta("test_function", format!("{phi:?}")))
}
