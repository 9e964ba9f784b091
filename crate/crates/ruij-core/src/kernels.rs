//! Kernel K, measure μ, their duals K̂, μ̂ and the constants d_n.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::double_sine::{s2_eval, S2Error};
use crate::params::{Params, ParamsError};

/// Guard distance to the kernel pole lines, relative to Re g*.
pub const KERNEL_STRIP_GUARD: f64 = 1e-8;

/// Minimal separation of coordinates in measure products.
pub const COINCIDENCE_GUARD: f64 = 1e-8;

/// Range and step used to fit the envelope constants.
const ENVELOPE_RANGE: f64 = 30.0;
const ENVELOPE_STEP: f64 = 0.25;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum KernelError {
    #[error("argument {x} outside the kernel strip |Im x| < {half_width}{}", pair_note(.pair))]
    StripViolation {
        x: C64,
        half_width: f64,
        pair: Option<(usize, usize)>,
    },
    #[error("coordinates {i} and {j} coincide within {COINCIDENCE_GUARD:e}")]
    CoincidentPoints { i: usize, j: usize },
    #[error(transparent)]
    DoubleSine(#[from] S2Error),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

fn pair_note(pair: &Option<(usize, usize)>) -> String {
    match pair {
        Some((i, j)) => format!(" (pair {i}, {j})"),
        None => String::new(),
    }
}

/// Parameters together with their dual and fitted envelope constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelContext {
    pub params: Params,
    pub dual: Params,
    /// max |K(x)|·e^{πν_g|x|} on a grid over [−30, 30].
    pub kernel_bound: f64,
    /// max |μ(x)|·e^{−πν_g|x|} on the same grid (excluding the zero at 0).
    pub measure_bound: f64,
}

impl KernelContext {
    pub fn new(params: Params) -> Result<Self, KernelError> {
        let dual = params.dualize()?;
        let mut ctx = KernelContext {
            params,
            dual,
            kernel_bound: f64::NAN,
            measure_bound: f64::NAN,
        };
        let (kb, mb) = fit_bounds(&params)?;
        ctx.kernel_bound = kb;
        ctx.measure_bound = mb;
        Ok(ctx)
    }

    /// The context of the dual system (ĝ*, ω̂); its dual is the original.
    pub fn dualized(&self) -> Result<Self, KernelError> {
        KernelContext::new(self.dual)
    }

    /// Decay rate πν_g of K (and growth rate of μ) on the real line.
    pub fn kernel_rate(&self) -> f64 {
        PI * self.params.nu_g
    }

    /// Decay rate of K̂ on the real line.
    pub fn hat_kernel_rate(&self) -> f64 {
        PI * self.dual.nu_g
    }

    /// Half-width Re g*/2 of the analyticity strip of K.
    pub fn kernel_half_width(&self) -> f64 {
        kernel_half_width(&self.params)
    }

    pub fn hat_kernel_half_width(&self) -> f64 {
        kernel_half_width(&self.dual)
    }
}

fn fit_bounds(p: &Params) -> Result<(f64, f64), KernelError> {
    let rate = PI * p.nu_g;
    let mut kb: f64 = 0.0;
    let mut mb: f64 = 0.0;
    let steps = (ENVELOPE_RANGE / ENVELOPE_STEP) as i64;
    for j in -steps..=steps {
        let x = j as f64 * ENVELOPE_STEP;
        let k = kernel_with(p, C64::new(x, 0.0))?;
        kb = kb.max(k.norm() * (rate * x.abs()).exp());
        if j != 0 {
            let m = measure_with(p, C64::new(x, 0.0))?;
            mb = mb.max(m.norm() * (-rate * x.abs()).exp());
        }
    }
    Ok((kb, mb))
}

pub fn kernel_half_width(p: &Params) -> f64 {
    p.gstar.re / 2.0
}

/// K(x) = S₂⁻¹(ix + g*/2)·S₂⁻¹(−ix + g*/2) for the given parameter triple.
pub fn kernel_with(p: &Params, x: C64) -> Result<C64, KernelError> {
    let half = kernel_half_width(p);
    let limit = half - KERNEL_STRIP_GUARD * p.gstar.re;
    if !(x.im.abs() < limit) {
        return Err(KernelError::StripViolation {
            x,
            half_width: half,
            pair: None,
        });
    }
    let periods = p.periods();
    let ix = C64::i() * x;
    let a = s2_eval(ix + p.gstar / 2.0, &periods)?;
    let b = s2_eval(-ix + p.gstar / 2.0, &periods)?;
    Ok((-a.log_value - b.log_value).exp())
}

/// ln μ(x) = ln S₂(ix) − ln S₂(ix + g); `None` at the zero x = 0.
pub fn log_measure_with(p: &Params, x: C64) -> Result<Option<C64>, KernelError> {
    let periods = p.periods();
    let ix = C64::i() * x;
    let num = s2_eval(ix, &periods)?;
    if num.is_zero {
        return Ok(None);
    }
    let den = s2_eval(ix + p.g, &periods)?;
    Ok(Some(num.log_value - den.log_value))
}

/// μ(x) = S₂(ix)·S₂⁻¹(ix + g) for the given parameter triple.
pub fn measure_with(p: &Params, x: C64) -> Result<C64, KernelError> {
    Ok(log_measure_with(p, x)?.map_or(C64::new(0.0, 0.0), |l| l.exp()))
}

pub fn kernel_k(x: C64, ctx: &KernelContext) -> Result<C64, KernelError> {
    kernel_with(&ctx.params, x)
}

pub fn measure_mu(x: C64, ctx: &KernelContext) -> Result<C64, KernelError> {
    measure_with(&ctx.params, x)
}

pub fn hat_k(lambda: C64, ctx: &KernelContext) -> Result<C64, KernelError> {
    kernel_with(&ctx.dual, lambda)
}

pub fn hat_mu(lambda: C64, ctx: &KernelContext) -> Result<C64, KernelError> {
    measure_with(&ctx.dual, lambda)
}

/// ∏_{i,j} K(x_i − y_j) for the given parameter triple.
pub fn product_kernel_with(p: &Params, xs: &[C64], ys: &[C64]) -> Result<C64, KernelError> {
    let mut log = C64::new(0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let k = kernel_with(p, x - y).map_err(|e| match e {
                KernelError::StripViolation { x, half_width, .. } => KernelError::StripViolation {
                    x,
                    half_width,
                    pair: Some((i, j)),
                },
                other => other,
            })?;
            log += k.ln();
        }
    }
    Ok(log.exp())
}

/// (1/n!)·∏_{i≠j} μ(x_i − x_j) for the given parameter triple.
pub fn product_measure_with(p: &Params, xs: &[C64]) -> Result<C64, KernelError> {
    let n = xs.len();
    let mut log = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = xs[i] - xs[j];
            if d.norm() < COINCIDENCE_GUARD {
                return Err(KernelError::CoincidentPoints { i, j });
            }
            let a = log_measure_with(p, d)?;
            let b = log_measure_with(p, -d)?;
            match (a, b) {
                (Some(a), Some(b)) => log += a + b,
                _ => return Err(KernelError::CoincidentPoints { i, j }),
            }
        }
    }
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    let value = log.exp() / factorial;
    let real_input = p.is_real() && xs.iter().all(|x| x.im == 0.0);
    if real_input {
        // μ(x)μ(−x) is real and nonnegative for real parameters and real x
        Ok(C64::new(value.norm(), 0.0))
    } else {
        Ok(value)
    }
}

pub fn product_k(xs: &[C64], ys: &[C64], ctx: &KernelContext) -> Result<C64, KernelError> {
    product_kernel_with(&ctx.params, xs, ys)
}

pub fn product_mu(xs: &[C64], ctx: &KernelContext) -> Result<C64, KernelError> {
    product_measure_with(&ctx.params, xs)
}

pub fn product_hat_k(ls: &[C64], ms: &[C64], ctx: &KernelContext) -> Result<C64, KernelError> {
    product_kernel_with(&ctx.dual, ls, ms)
}

pub fn product_hat_mu(ls: &[C64], ctx: &KernelContext) -> Result<C64, KernelError> {
    product_measure_with(&ctx.dual, ls)
}

/// √(ω₁ω₂)·S₂(g) = 1/d₁ for the given parameter triple.
pub fn inverse_d1_with(p: &Params) -> Result<C64, KernelError> {
    let s = s2_eval(p.g, &p.periods())?;
    Ok(p.omega1.sqrt() * p.omega2.sqrt() * s.value())
}

/// d_n = [√(ω₁ω₂)·S₂(g)]^{−n}.
pub fn norm_d(n: u32, ctx: &KernelContext) -> Result<C64, KernelError> {
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    Ok(inverse_d1_with(&ctx.params)?.inv().powu(n))
}

/// Closed form of ∫ K(x)e^{2πiλx} dx, namely √(ω₁ω₂)·S₂(g)·K̂(λ).
pub fn kernel_fourier(lambda: C64, ctx: &KernelContext) -> Result<C64, KernelError> {
    Ok(inverse_d1_with(&ctx.params)? * hat_k(lambda, ctx)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(w1: f64, w2: f64, g: f64) -> KernelContext {
        KernelContext::new(Params::real(w1, w2, g).unwrap()).unwrap()
    }

    #[test]
    fn kernel_even_and_centre_value() {
        let c = ctx(1.0, 1.0, 0.5);
        let a = kernel_k(C64::new(1.23, 0.0), &c).unwrap();
        let b = kernel_k(C64::new(-1.23, 0.0), &c).unwrap();
        assert!((a - b).norm() < 1e-13 * a.norm());
        let k0 = kernel_k(C64::new(0.0, 0.0), &c).unwrap();
        let s = crate::double_sine::s2(C64::new(0.75, 0.0), &c.params.periods()).unwrap();
        assert!((k0 - s.powi(-2)).norm() < 1e-13);
    }

    #[test]
    fn strip_guard() {
        let c = ctx(1.0, 1.0, 0.5);
        let e = kernel_k(C64::new(0.0, 0.75), &c).unwrap_err();
        assert!(matches!(e, KernelError::StripViolation { .. }));
        let e = product_k(&[C64::new(0.0, 0.0), C64::new(0.0, 0.8)], &[C64::new(0.0, 0.0)], &c).unwrap_err();
        assert!(matches!(e, KernelError::StripViolation { pair: Some((1, 0)), .. }));
    }

    #[test]
    fn measure_zero_and_products() {
        let c = ctx(1.0, 1.0, 0.5);
        assert_eq!(measure_mu(C64::new(0.0, 0.0), &c).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(hat_mu(C64::new(0.0, 0.0), &c).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(product_mu(&[C64::new(0.4, 0.0)], &c).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(product_k(&[C64::new(0.4, 0.0)], &[], &c).unwrap(), C64::new(1.0, 0.0));
        let x = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let m = product_mu(&x, &c).unwrap();
        let direct = measure_mu(C64::new(1.0, 0.0), &c).unwrap() * measure_mu(C64::new(-1.0, 0.0), &c).unwrap() / 2.0;
        assert!((m - direct).norm() < 1e-12 * m.norm());
        assert!(m.re > 0.0);
        let swapped = product_mu(&[x[1], x[0]], &c).unwrap();
        assert!((m - swapped).norm() < 1e-14 * m.norm());
        assert!(matches!(
            product_mu(&[C64::new(0.3, 0.0), C64::new(0.3, 0.0)], &c),
            Err(KernelError::CoincidentPoints { i: 0, j: 1 })
        ));
    }

    #[test]
    fn self_dual_point() {
        // ω = (1,1), g = 1: ĝ* = 1 so hatted and plain kernels coincide
        let c = ctx(1.0, 1.0, 1.0);
        for x in [0.0, 0.7, -2.1] {
            let x = C64::new(x, 0.0);
            assert!((hat_k(x, &c).unwrap() - kernel_k(x, &c).unwrap()).norm() < 1e-14);
            assert!((hat_mu(x, &c).unwrap() - measure_mu(x, &c).unwrap()).norm() < 1e-13);
        }
    }

    #[test]
    fn normalisation_constants() {
        let c = ctx(1.0, 1.0, 0.5);
        assert_eq!(norm_d(0, &c).unwrap(), C64::new(1.0, 0.0));
        let s = crate::double_sine::s2(C64::new(0.5, 0.0), &c.params.periods()).unwrap();
        assert!((norm_d(1, &c).unwrap() - s.inv()).norm() < 1e-14);
        let ratio = norm_d(2, &c).unwrap() / norm_d(3, &c).unwrap();
        assert!((ratio - s).norm() < 1e-13);
    }
}
