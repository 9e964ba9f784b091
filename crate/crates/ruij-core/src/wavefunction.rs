//! The wave function Ψ_λ(x) built by iterated raising operators.
//!
//! Every layer of the nested integral is analytic in a horizontal strip around
//! the real axis, so the trapezoid rule on a uniform lattice y = k·h converges
//! exponentially in 1/h. All layers share one lattice with a common origin:
//! kernel values at lattice differences K((a−b)h) and measure pairs come from a
//! single table, and Ψ₂ on the lattice is tabulated once per spectral pair.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{
    kernel_half_width, kernel_with, log_measure_with, norm_d, KernelContext, KernelError,
};
use crate::params::Params;
use crate::quadrature::{CompensatedSum, QuadError, QuadratureSpec};

/// Fraction of the analyticity half-width used when choosing the lattice step.
pub const STRIP_FRACTION: f64 = 0.8;

/// Largest n supported by [`psi`].
pub const MAX_PARTICLES: usize = 4;

/// Tolerance floor for the inner layers of the Monte Carlo level.
pub const INNER_TOLERANCE: f64 = 1e-6;

/// Default number of Monte Carlo samples at n = 4.
pub const MC_SAMPLES: usize = 4096;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum WaveError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("n = {0} exceeds the supported maximum of 4")]
    DimensionTooLarge(usize),
    #[error("invalid spectral vector: {0}")]
    InvalidSpectral(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("contour violation: {0}")]
    ContourViolation(String),
}

/// Ordered spectral tuple λ_n with a common imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector {
    values: Vec<C64>,
    pub uniform_imag_shift: f64,
}

impl SpectralVector {
    pub fn real(values: &[f64]) -> Self {
        Self::shifted(values, 0.0)
    }

    /// λ_j + i·shift for every entry.
    pub fn shifted(values: &[f64], shift: f64) -> Self {
        SpectralVector {
            values: values.iter().map(|&v| C64::new(v, shift)).collect(),
            uniform_imag_shift: shift,
        }
    }

    /// Checks |shift| < ν_g/2.
    pub fn validate(&self, p: &Params) -> Result<(), WaveError> {
        if !(self.uniform_imag_shift.abs() < p.nu_g / 2.0) {
            return Err(WaveError::InvalidSpectral(format!(
                "|imaginary shift| = {} must be below ν_g/2 = {}",
                self.uniform_imag_shift.abs(),
                p.nu_g / 2.0
            )));
        }
        if self.values.iter().any(|v| !v.re.is_finite()) {
            return Err(WaveError::InvalidSpectral("non-finite entry".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn negated(&self) -> SpectralVector {
        SpectralVector {
            values: self.values.iter().map(|v| -v).collect(),
            uniform_imag_shift: -self.uniform_imag_shift,
        }
    }
}

/// Ordered real coordinates x_n.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateVector {
    pub values: Vec<f64>,
}

impl CoordinateVector {
    pub fn new(values: &[f64]) -> Result<Self, WaveError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(WaveError::ShapeMismatch("non-finite coordinate".into()));
        }
        Ok(CoordinateVector {
            values: values.to_vec(),
        })
    }

    pub fn complex(&self) -> Vec<C64> {
        self.values.iter().map(|&v| C64::new(v, 0.0)).collect()
    }
}

/// Value with an error estimate and the number of lattice terms summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValue {
    pub value: C64,
    pub error_estimate: f64,
    pub nodes: usize,
}

/// Lattice step for a trapezoid sum whose integrand is analytic for
/// |Im y| < min(Re g*/2 − max_imag, Re g) and oscillates with total real
/// frequency `spread`.
pub fn lattice_step(p: &Params, max_imag: f64, spread: f64, tol: f64) -> Result<f64, WaveError> {
    let room = kernel_half_width(p) - max_imag;
    if !(room > 0.0) {
        return Err(WaveError::ContourViolation(format!(
            "imaginary offset {max_imag} reaches the kernel pole line at {}",
            kernel_half_width(p)
        )));
    }
    let d = STRIP_FRACTION * room.min(p.g.re);
    Ok(2.0 * PI * d / ((100.0 / tol).ln() + 2.0 * PI * d * spread))
}

/// Truncation radius for an envelope amplitude·e^{−rate·r}.
pub fn window_radius(rate: f64, amplitude: f64, tol: f64) -> Result<f64, WaveError> {
    if !(rate > 0.0) {
        return Err(WaveError::ContourViolation(format!(
            "integrand does not decay (net rate {rate})"
        )));
    }
    Ok(((1000.0 * amplitude.max(1.0) / (rate * tol)).ln() / rate).max(0.0))
}

/// K(mh) and μ(mh)μ(−mh) for |m| ≤ max_index on a lattice of step h.
#[derive(Debug, Clone)]
pub struct LatticeKernels {
    pub params: Params,
    pub h: f64,
    kernel: Vec<C64>,
    pair: Vec<C64>,
    d: Vec<C64>,
}

impl LatticeKernels {
    pub fn new(ctx: &KernelContext, h: f64, max_index: usize) -> Result<Self, WaveError> {
        let p = ctx.params;
        let kernel: Vec<C64> = (0..=max_index)
            .into_par_iter()
            .map(|m| kernel_with(&p, C64::new(m as f64 * h, 0.0)))
            .collect::<Result<_, _>>()?;
        let pair: Vec<C64> = (0..=max_index)
            .into_par_iter()
            .map(|m| -> Result<C64, KernelError> {
                if m == 0 {
                    return Ok(C64::new(0.0, 0.0));
                }
                let y = C64::new(m as f64 * h, 0.0);
                let a = log_measure_with(&p, y)?.unwrap_or(C64::new(f64::NEG_INFINITY, 0.0));
                let b = log_measure_with(&p, -y)?.unwrap_or(C64::new(f64::NEG_INFINITY, 0.0));
                Ok((a + b).exp())
            })
            .collect::<Result<_, _>>()?;
        let d = (0..=MAX_PARTICLES as u32)
            .map(|k| norm_d(k, ctx))
            .collect::<Result<_, _>>()?;
        Ok(LatticeKernels {
            params: p,
            h,
            kernel,
            pair,
            d,
        })
    }

    pub fn max_index(&self) -> usize {
        self.kernel.len() - 1
    }

    /// K(mh).
    #[inline]
    pub fn k(&self, m: i64) -> C64 {
        self.kernel[m.unsigned_abs() as usize]
    }

    /// μ(mh)μ(−mh), zero at m = 0.
    #[inline]
    pub fn pair(&self, m: i64) -> C64 {
        self.pair[m.unsigned_abs() as usize]
    }

    /// d_k.
    pub fn d(&self, k: usize) -> C64 {
        self.d[k]
    }

    /// μ(y_n) for lattice indices: (1/n!)·∏_{i<j} μ(y_i−y_j)μ(y_j−y_i).
    pub fn measure(&self, idx: &[i64]) -> C64 {
        let mut v = C64::new(1.0, 0.0);
        for i in 0..idx.len() {
            for j in (i + 1)..idx.len() {
                v *= self.pair(idx[i] - idx[j]);
            }
        }
        let fact: f64 = (1..=idx.len()).map(|k| k as f64).product();
        v / fact
    }
}

/// K(x − kh) for k in [lo, hi].
#[derive(Debug, Clone)]
pub struct KernelRow {
    pub lo: i64,
    values: Vec<C64>,
}

impl KernelRow {
    pub fn new(p: &Params, x: C64, h: f64, lo: i64, hi: i64) -> Result<Self, WaveError> {
        let values = (lo..=hi)
            .into_par_iter()
            .map(|k| kernel_with(p, x - k as f64 * h))
            .collect::<Result<_, _>>()?;
        Ok(KernelRow { lo, values })
    }

    /// Row for a lattice point x = a·h, read from the difference table.
    pub fn from_lattice(lk: &LatticeKernels, a: i64, lo: i64, hi: i64) -> Self {
        KernelRow {
            lo,
            values: (lo..=hi).map(|k| lk.k(a - k)).collect(),
        }
    }

    #[inline]
    pub fn get(&self, k: i64) -> C64 {
        self.values[(k - self.lo) as usize]
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }
}

/// Ψ_{λ₁,λ₂}(ah, bh) for a, b in [lo, hi].
#[derive(Debug, Clone)]
pub struct Psi2Table {
    pub lo: i64,
    pub hi: i64,
    values: Vec<C64>,
    /// Σ|terms|·h per entry, used for error bookkeeping.
    abs_mass: Vec<f64>,
}

impl Psi2Table {
    /// Tabulates Ψ₂ with an inner window of `reach` lattice steps beyond the pair.
    pub fn build(
        lk: &LatticeKernels,
        l1: C64,
        l2: C64,
        lo: i64,
        hi: i64,
        reach: i64,
    ) -> Result<Self, WaveError> {
        let width = (hi - lo + 1) as usize;
        let need = (hi - lo + reach) as usize;
        if need > lk.max_index() {
            return Err(WaveError::ShapeMismatch(format!(
                "kernel table reaches {} but Ψ₂ table needs {need}",
                lk.max_index()
            )));
        }
        let h = lk.h;
        let delta = l1 - l2;
        let d1 = lk.d(1);
        let rows: Vec<(Vec<C64>, Vec<f64>)> = (lo..=hi)
            .into_par_iter()
            .map(|a| {
                let mut vals = vec![C64::new(0.0, 0.0); width];
                let mut mass = vec![0.0; width];
                for b in a..=hi {
                    let (v, m) = psi2_lattice_sum(lk, delta, a, b, reach);
                    let phase = (C64::new(0.0, 2.0 * PI) * l2 * ((a + b) as f64 * h)).exp();
                    vals[(b - lo) as usize] = v * phase * d1 * h;
                    mass[(b - lo) as usize] = m * phase.norm() * d1.norm() * h;
                }
                (vals, mass)
            })
            .collect();
        let mut values = vec![C64::new(0.0, 0.0); width * width];
        let mut abs_mass = vec![0.0; width * width];
        for (i, (vals, mass)) in rows.iter().enumerate() {
            for j in i..width {
                values[i * width + j] = vals[j];
                values[j * width + i] = vals[j];
                abs_mass[i * width + j] = mass[j];
                abs_mass[j * width + i] = mass[j];
            }
        }
        Ok(Psi2Table {
            lo,
            hi,
            values,
            abs_mass,
        })
    }

    #[inline]
    pub fn get(&self, a: i64, b: i64) -> C64 {
        let w = (self.hi - self.lo + 1) as usize;
        self.values[(a - self.lo) as usize * w + (b - self.lo) as usize]
    }

    #[inline]
    pub fn mass(&self, a: i64, b: i64) -> f64 {
        let w = (self.hi - self.lo + 1) as usize;
        self.abs_mass[(a - self.lo) as usize * w + (b - self.lo) as usize]
    }

    pub fn contains(&self, a: i64) -> bool {
        a >= self.lo && a <= self.hi
    }
}

/// Σ_k e^{2πiΔkh} K((a−k)h) K((b−k)h) over k ∈ [min − reach, max + reach].
fn psi2_lattice_sum(lk: &LatticeKernels, delta: C64, a: i64, b: i64, reach: i64) -> (C64, f64) {
    let h = lk.h;
    let lo = a.min(b) - reach;
    let hi = a.max(b) + reach;
    let step = (C64::new(0.0, 2.0 * PI) * delta * h).exp();
    let mut phase = (C64::new(0.0, 2.0 * PI) * delta * (lo as f64 * h)).exp();
    let mut acc = CompensatedSum::new();
    let mut mass = 0.0;
    for k in lo..=hi {
        let t = phase * lk.k(a - k) * lk.k(b - k);
        acc.add(t);
        mass += t.norm();
        phase *= step;
        if (k - lo) % 64 == 63 {
            // resynchronise the recurrence to avoid phase drift
            phase = (C64::new(0.0, 2.0 * PI) * delta * ((k + 1) as f64 * h)).exp();
        }
    }
    (acc.value(), mass)
}

/// Decay rate of the Ψ₂ inner integrand outside the hull of its arguments.
fn inner_rate(p: &Params, l1: C64, l2: C64) -> f64 {
    2.0 * PI * p.nu_g - 2.0 * PI * (l1 - l2).im.abs()
}

/// Evaluator of Ψ_λ for fixed λ that caches lattice tables between calls.
pub struct WaveEvaluator {
    pub params: Params,
    lambda: Vec<C64>,
    pub tol: f64,
    pub h: f64,
    /// Lattice half-widths (in steps) of the inner and outer windows.
    reach_inner: i64,
    reach_outer: i64,
    lattice: LatticeKernels,
    /// Ψ₂ table over the box needed by n ≥ 3.
    psi2: Option<Psi2Table>,
    seed: u64,
    samples: usize,
    box_lo: i64,
    box_hi: i64,
}

impl WaveEvaluator {
    /// Prepares tables for evaluating Ψ_λ at points whose real parts lie in
    /// [x_lo, x_hi] and whose imaginary parts are at most `max_imag`.
    pub fn new(
        ctx: &KernelContext,
        lambda: &[C64],
        x_lo: f64,
        x_hi: f64,
        max_imag: f64,
        spec: &QuadratureSpec,
    ) -> Result<Self, WaveError> {
        Self::build(ctx, lambda, x_lo, x_hi, max_imag, spec, None)
    }

    /// Prepares the Ψ₂ table needed to apply one more integral layer with
    /// spectral parameter `outer` (the Baxter operator Q₂(outer) acting on Ψ₂,
    /// or a pairing against Ψ₂) at points in [x_lo, x_hi].
    pub fn for_operator(
        ctx: &KernelContext,
        lambda: &[C64],
        outer: C64,
        x_lo: f64,
        x_hi: f64,
        max_imag: f64,
        spec: &QuadratureSpec,
    ) -> Result<Self, WaveError> {
        if lambda.len() != 2 {
            return Err(WaveError::ShapeMismatch(format!(
                "operator layer needs a two-particle spectral vector, got {}",
                lambda.len()
            )));
        }
        Self::build(ctx, lambda, x_lo, x_hi, max_imag, spec, Some(outer))
    }

    fn build(
        ctx: &KernelContext,
        lambda: &[C64],
        x_lo: f64,
        x_hi: f64,
        max_imag: f64,
        spec: &QuadratureSpec,
        operator: Option<C64>,
    ) -> Result<Self, WaveError> {
        let n = lambda.len();
        if n == 0 {
            return Err(WaveError::ShapeMismatch("empty spectral vector".into()));
        }
        if n > MAX_PARTICLES {
            return Err(WaveError::DimensionTooLarge(n));
        }
        spec.check()?;
        let p = ctx.params;
        let tol = if n == 4 {
            spec.tolerance.min(INNER_TOLERANCE)
        } else {
            spec.tolerance
        };
        let mut all: Vec<C64> = lambda.to_vec();
        all.extend(operator);
        // outer layers above Ψ₂
        let levels = match operator {
            Some(_) => 1,
            None => n.saturating_sub(2) as i64,
        };
        let h = lattice_step(&p, max_imag, spectral_spread(&all), tol)?;
        let amp = ctx.kernel_bound.max(1.0).powi(2);
        let mut inner = f64::INFINITY;
        for i in 0..n {
            for j in 0..i {
                inner = inner.min(inner_rate(&p, lambda[i], lambda[j]));
            }
        }
        if n == 1 {
            inner = 2.0 * PI * p.nu_g;
        }
        let reach_inner = (window_radius(inner, amp, tol)? / h).ceil() as i64;
        let outer_rate = PI * p.nu_g - 2.0 * PI * max_imag_spread(&all);
        let reach_outer = if levels >= 1 {
            (window_radius(outer_rate, amp, tol)? / h).ceil() as i64
        } else {
            0
        };
        let box_lo = (x_lo / h).floor() as i64;
        let box_hi = (x_hi / h).ceil() as i64;
        // Ψ₂ is tabulated on the window of the innermost outer layer
        let (tab_lo, tab_hi) = if levels >= 1 {
            (box_lo - levels * reach_outer, box_hi + levels * reach_outer)
        } else {
            (box_lo - reach_inner, box_hi + reach_inner)
        };
        let max_index = (tab_hi - tab_lo + reach_inner + 1) as usize;
        let lattice = LatticeKernels::new(ctx, h, max_index)?;
        let psi2 = if levels >= 1 {
            Some(Psi2Table::build(
                &lattice,
                lambda[0],
                lambda[1],
                tab_lo,
                tab_hi,
                reach_inner,
            )?)
        } else {
            None
        };
        Ok(WaveEvaluator {
            params: p,
            lambda: lambda.to_vec(),
            tol,
            h,
            reach_inner,
            reach_outer,
            lattice,
            psi2,
            seed: spec.seed,
            samples: if n == 4 {
                spec.max_nodes.clamp(256, 1 << 16).min(MC_SAMPLES.max(spec.max_nodes / 64))
            } else {
                0
            },
            box_lo,
            box_hi,
        })
    }

    pub fn lattice(&self) -> &LatticeKernels {
        &self.lattice
    }

    pub fn lambda(&self) -> &[C64] {
        &self.lambda
    }

    fn check_box(&self, x: &[C64]) -> Result<(), WaveError> {
        for v in x {
            let k = v.re / self.h;
            if k < self.box_lo as f64 - 1e-9 || k > self.box_hi as f64 + 1e-9 {
                return Err(WaveError::ShapeMismatch(format!(
                    "coordinate {v} outside the prepared box [{}, {}]",
                    self.box_lo as f64 * self.h,
                    self.box_hi as f64 * self.h
                )));
            }
        }
        Ok(())
    }

    /// Ψ_λ(x) at arbitrary (possibly complex) coordinates inside the box.
    pub fn eval(&self, x: &[C64]) -> Result<PsiValue, WaveError> {
        let n = self.lambda.len();
        if x.len() != n {
            return Err(WaveError::ShapeMismatch(format!(
                "{} coordinates for {} spectral values",
                x.len(),
                n
            )));
        }
        let sum_x: C64 = x.iter().sum();
        let top = self.lambda[n - 1];
        let outer = (C64::new(0.0, 2.0 * PI) * top * sum_x).exp();
        match n {
            1 => Ok(PsiValue {
                value: outer,
                error_estimate: 0.0,
                nodes: 1,
            }),
            2 => self.eval2(x, outer),
            3 => {
                self.check_box(x)?;
                self.eval3(x, outer)
            }
            4 => {
                self.check_box(x)?;
                self.eval4(x, outer)
            }
            _ => Err(WaveError::DimensionTooLarge(n)),
        }
    }

    fn eval2(&self, x: &[C64], outer: C64) -> Result<PsiValue, WaveError> {
        let h = self.h;
        let lo = (x[0].re.min(x[1].re) / h).floor() as i64 - self.reach_inner;
        let hi = (x[0].re.max(x[1].re) / h).ceil() as i64 + self.reach_inner;
        let r1 = KernelRow::new(&self.params, x[0], h, lo, hi)?;
        let r2 = KernelRow::new(&self.params, x[1], h, lo, hi)?;
        let delta = self.lambda[0] - self.lambda[1];
        let mut acc = CompensatedSum::new();
        let mut mass = 0.0;
        for k in lo..=hi {
            let phase = (C64::new(0.0, 2.0 * PI) * delta * (k as f64 * h)).exp();
            let t = phase * r1.get(k) * r2.get(k);
            acc.add(t);
            mass += t.norm();
        }
        let scale = self.lattice.d(1) * h * outer;
        Ok(PsiValue {
            value: acc.value() * scale,
            error_estimate: self.tol * mass * scale.norm(),
            nodes: (hi - lo + 1) as usize,
        })
    }

    fn outer_window(&self, x: &[C64]) -> (i64, i64) {
        let lo = x.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        let hi = x.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
        (
            (lo / self.h).floor() as i64 - self.reach_outer,
            (hi / self.h).ceil() as i64 + self.reach_outer,
        )
    }

    /// ∫d²y d₂·e^{2πiλ(Σx−Σy)}·K(x, y)·μ(y)·Ψ₂(y) for any number of points x
    /// inside the box. With two points this is Q₂(λ)Ψ₂, with three it is Ψ₃.
    pub fn apply_layer(&self, lambda: C64, x: &[C64]) -> Result<PsiValue, WaveError> {
        let table = self.psi2.as_ref().ok_or_else(|| {
            WaveError::ShapeMismatch("evaluator was prepared without a Ψ₂ table".into())
        })?;
        self.check_box(x)?;
        let h = self.h;
        let (lo, hi) = self.outer_window(x);
        let rows: Vec<KernelRow> = x
            .iter()
            .map(|&xi| KernelRow::new(&self.params, xi, h, lo, hi))
            .collect::<Result<_, _>>()?;
        let (value, mass, nodes) = self.outer_sum2(&rows, table, lambda, lo, hi);
        let sum_x: C64 = x.iter().sum();
        let scale = self.lattice.d(2) * h * h * (C64::new(0.0, 2.0 * PI) * lambda * sum_x).exp();
        Ok(PsiValue {
            value: value * scale,
            error_estimate: self.tol * mass * scale.norm(),
            nodes,
        })
    }

    /// The tabulated Ψ₂ on the lattice, when prepared.
    pub fn psi2_table(&self) -> Option<&Psi2Table> {
        self.psi2.as_ref()
    }

    fn eval3(&self, x: &[C64], outer: C64) -> Result<PsiValue, WaveError> {
        let h = self.h;
        let (lo, hi) = self.outer_window(x);
        let rows: Vec<KernelRow> = x
            .iter()
            .map(|&xi| KernelRow::new(&self.params, xi, h, lo, hi))
            .collect::<Result<_, _>>()?;
        let table = self.psi2.as_ref().expect("n = 3 evaluator has a Ψ₂ table");
        let (value, mass, nodes) = self.outer_sum2(&rows, table, self.lambda[2], lo, hi);
        let scale = self.lattice.d(2) * h * h * outer;
        Ok(PsiValue {
            value: value * scale,
            error_estimate: self.tol * mass * scale.norm(),
            nodes,
        })
    }

    /// Σ_{a≠b} e^{−2πiλ(a+b)h} ∏_i R_i(a)R_i(b) μ(a,b) Ψ₂(a,b).
    fn outer_sum2(
        &self,
        rows: &[KernelRow],
        table: &Psi2Table,
        lambda: C64,
        lo: i64,
        hi: i64,
    ) -> (C64, f64, usize) {
        let h = self.h;
        let lk = &self.lattice;
        let kprod: Vec<C64> = (lo..=hi)
            .map(|a| {
                let ph = (C64::new(0.0, -2.0 * PI) * lambda * (a as f64 * h)).exp();
                rows.iter().fold(ph, |acc, r| acc * r.get(a))
            })
            .collect();
        let partial: Vec<(C64, f64)> = (lo..=hi)
            .into_par_iter()
            .map(|a| {
                let mut acc = CompensatedSum::new();
                let mut mass = 0.0;
                let ka = kprod[(a - lo) as usize];
                for b in lo..=hi {
                    if a == b {
                        continue;
                    }
                    let kb = kprod[(b - lo) as usize];
                    let w = ka * kb * lk.pair(a - b) * 0.5;
                    acc.add(w * table.get(a, b));
                    mass += w.norm() * table.mass(a, b).max(table.get(a, b).norm());
                }
                (acc.value(), mass)
            })
            .collect();
        let mut acc = CompensatedSum::new();
        let mut mass = 0.0;
        for (v, m) in partial {
            acc.add(v);
            mass += m;
        }
        let width = (hi - lo + 1) as usize;
        (acc.value(), mass, width * width)
    }

    /// Ψ₃ at lattice indices from the Ψ₂ table.
    fn psi3_lattice(&self, idx: [i64; 3]) -> C64 {
        let h = self.h;
        let lk = &self.lattice;
        let table = self.psi2.as_ref().expect("table");
        let lo = *idx.iter().min().unwrap() - self.reach_outer;
        let hi = *idx.iter().max().unwrap() + self.reach_outer;
        let l3 = self.lambda[2];
        let mut acc = CompensatedSum::new();
        let kprod: Vec<C64> = (lo..=hi)
            .map(|a| {
                let ph = (C64::new(0.0, -2.0 * PI) * l3 * (a as f64 * h)).exp();
                ph * lk.k(idx[0] - a) * lk.k(idx[1] - a) * lk.k(idx[2] - a)
            })
            .collect();
        for a in lo..=hi {
            for b in lo..=hi {
                if a == b {
                    continue;
                }
                let w = kprod[(a - lo) as usize] * kprod[(b - lo) as usize] * lk.pair(a - b) * 0.5;
                acc.add(w * table.get(a, b));
            }
        }
        let sum: i64 = idx.iter().sum();
        let outer = (C64::new(0.0, 2.0 * PI) * l3 * (sum as f64 * h)).exp();
        acc.value() * lk.d(2) * h * h * outer
    }

    fn eval4(&self, x: &[C64], outer: C64) -> Result<PsiValue, WaveError> {
        let h = self.h;
        let (lo, hi) = self.outer_window(x);
        let rows: Vec<KernelRow> = x
            .iter()
            .map(|&xi| KernelRow::new(&self.params, xi, h, lo, hi))
            .collect::<Result<_, _>>()?;
        let l4 = self.lambda[3];
        let width = hi - lo + 1;
        // stratify along the first index: equal sample counts per block
        let blocks = 16i64.min(width);
        let per_block = (self.samples as i64 / blocks).max(2);
        let estimates: Vec<(C64, f64)> = (0..blocks)
            .into_par_iter()
            .map(|blk| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(blk as u64));
                let a_lo = lo + blk * width / blocks;
                let a_hi = lo + (blk + 1) * width / blocks - 1;
                let cells = (a_hi - a_lo + 1) * width * width;
                let mut mean = C64::new(0.0, 0.0);
                let mut m2 = 0.0;
                for s in 0..per_block {
                    let a = rng.gen_range(a_lo..=a_hi);
                    let b = rng.gen_range(lo..=hi);
                    let c = rng.gen_range(lo..=hi);
                    let v = if a == b || b == c || a == c {
                        C64::new(0.0, 0.0)
                    } else {
                        let kp = rows.iter().fold(C64::new(1.0, 0.0), |acc, r| {
                            acc * r.get(a) * r.get(b) * r.get(c)
                        });
                        let ph = (C64::new(0.0, -2.0 * PI) * l4 * ((a + b + c) as f64 * h)).exp();
                        kp * ph * self.lattice.measure(&[a, b, c]) * self.psi3_lattice([a, b, c])
                    };
                    let delta = v - mean;
                    mean += delta / (s as f64 + 1.0);
                    m2 += delta.norm() * (v - mean).norm();
                }
                let var = m2 / (per_block as f64 - 1.0);
                let c = cells as f64;
                (mean * c, c * c * var / per_block as f64)
            })
            .collect();
        let mut acc = CompensatedSum::new();
        let mut var = 0.0;
        for (v, s) in estimates {
            acc.add(v);
            var += s;
        }
        let scale = self.lattice.d(3) * h * h * h * outer;
        Ok(PsiValue {
            value: acc.value() * scale,
            error_estimate: var.sqrt() * scale.norm(),
            nodes: (per_block * blocks) as usize,
        })
    }
}

fn spectral_spread(lambda: &[C64]) -> f64 {
    let lo = lambda.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let hi = lambda.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
    (hi - lo).max(lambda.iter().map(|v| v.re.abs()).fold(0.0, f64::max))
}

fn max_imag_spread(lambda: &[C64]) -> f64 {
    let lo = lambda.iter().map(|v| v.im).fold(f64::INFINITY, f64::min);
    let hi = lambda.iter().map(|v| v.im).fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Ψ_λ(x) at complex coordinates and spectral values (no invariant checks).
pub fn psi_complex(
    ctx: &KernelContext,
    lambda: &[C64],
    x: &[C64],
    spec: &QuadratureSpec,
) -> Result<PsiValue, WaveError> {
    if lambda.len() != x.len() {
        return Err(WaveError::ShapeMismatch(format!(
            "{} spectral values for {} coordinates",
            lambda.len(),
            x.len()
        )));
    }
    let lo = x.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    let hi = x.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
    let max_imag = x.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let ev = WaveEvaluator::new(ctx, lambda, lo, hi, max_imag, spec)?;
    ev.eval(x)
}

/// Ψ_{λ_n}(x_n; g|ω) for real coordinates.
pub fn psi(
    lambda: &SpectralVector,
    x: &CoordinateVector,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<PsiValue, WaveError> {
    lambda.validate(&ctx.params)?;
    psi_complex(ctx, lambda.values(), &x.complex(), spec)
}

/// Ψ_{x_n}(λ_n; ĝ*|ω̂): the dual representation with the roles of λ and x swapped.
pub fn psi_dual(
    lambda: &SpectralVector,
    x: &CoordinateVector,
    ctx: &KernelContext,
    spec: &QuadratureSpec,
) -> Result<PsiValue, WaveError> {
    lambda.validate(&ctx.params)?;
    let dual = ctx.dualized()?;
    let coords: Vec<C64> = x.complex();
    psi_complex(&dual, &coords, lambda.values(), spec)
}

/// Raising-operator kernel d_{n−1}·e^{2πiλ(Σx−Σy)}·K(x_n, y_{n−1})·μ(y_{n−1}).
pub fn lambda_kernel(
    x: &[C64],
    y: &[C64],
    lambda: C64,
    ctx: &KernelContext,
) -> Result<C64, WaveError> {
    if y.len() + 1 != x.len() {
        return Err(WaveError::ShapeMismatch(format!(
            "raising kernel needs n−1 = {} inner points, got {}",
            x.len().saturating_sub(1),
            y.len()
        )));
    }
    let p = &ctx.params;
    let d = norm_d(y.len() as u32, ctx)?;
    let sx: C64 = x.iter().sum();
    let sy: C64 = y.iter().sum();
    let phase = (C64::new(0.0, 2.0 * PI) * lambda * (sx - sy)).exp();
    let k = crate::kernels::product_kernel_with(p, x, y)?;
    let m = if y.is_empty() {
        C64::new(1.0, 0.0)
    } else {
        crate::kernels::product_measure_with(p, y)?
    };
    Ok(d * phase * k * m)
}
