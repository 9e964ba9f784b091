//! The double sine function S₂(z|ω₁, ω₂).
//!
//! Inside the strip 0 < Re z < Re(ω₁+ω₂) the logarithm is computed from its
//! integral representation. The integration range is cut at T₁: below it the
//! integrand is integrated on the real axis (with a Taylor series near t = 0),
//! above it the two exponential tails are each integrated along a ray rotated
//! into the direction of steepest decay. Outside the strip the two functional
//! equations move z back towards the centre line.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::params::{Params, Periods};
use crate::quadrature::{adaptive_gk, QuadError, QuadratureSpec};

/// Internal tolerance for ln S₂ used by [`s2`] and [`ln_s2`].
pub const S2_TOLERANCE: f64 = 1e-13;

/// Maximum number of functional-equation steps before giving up.
pub const MAX_SHIFTS: usize = 64;

/// Relative guard radius (in units of |ω₁+ω₂|) around poles.
pub const POLE_GUARD: f64 = 1e-10;

/// Points within this relative distance of the strip walls are rejected by
/// [`log_s2_strip`].
pub const STRIP_MARGIN: f64 = 1e-9;

/// Minimal distance to the pole/zero cones for [`s2_asymptotic`].
pub const CONE_DISTANCE_MIN: f64 = 1.0;

/// Product of t and the largest of |a|, |ω₁|, |ω₂| below which the strip
/// integrand is evaluated by its Taylor series.
pub const SERIES_REACH: f64 = 0.03;

/// Upper limit of the rescaled ray variable; e^{-40} is below double precision.
const RAY_LENGTH: f64 = 40.0;

/// Angular safety margin between integration rays and the pole lines of 1/sh.
const RAY_ANGLE_MARGIN: f64 = 0.1;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum S2Error {
    #[error("z = {z} lies outside the open strip 0 < Re z < Re(ω1+ω2) (position {position})")]
    StripViolation { z: C64, position: f64 },
    #[error("z = {z} is within {distance:e} of the pole {pole}")]
    PoleProximity { z: C64, pole: C64, distance: f64 },
    #[error("strip reduction of z = {z} needs more than {MAX_SHIFTS} shifts")]
    PrecisionLoss { z: C64 },
    #[error("z = {z} is {distance} from the pole/zero cones, below {CONE_DISTANCE_MIN}")]
    ConeProximity { z: C64, distance: f64 },
    #[error("invalid pole/zero index (m = {m}, k = {k}, {kind:?})")]
    InvalidIndex { m: i64, k: i64, kind: PoleZeroKind },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// A point together with its relative position across the analytic strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripPoint {
    pub z: C64,
    pub strip_position: f64,
}

impl StripPoint {
    pub fn new(z: C64, periods: &Periods) -> Self {
        StripPoint {
            z,
            strip_position: z.re / periods.sum().re,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoleZeroKind {
    /// Pole of S₂ at mω₁ + kω₂, m, k ≥ 1.
    Pole,
    /// Zero of S₂ at −mω₁ − kω₂, m, k ≥ 0.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoleZeroIndex {
    pub m: i64,
    pub k: i64,
    pub kind: PoleZeroKind,
}

impl PoleZeroIndex {
    pub fn location(&self, periods: &Periods) -> C64 {
        let z = periods.omega1 * self.m as f64 + periods.omega2 * self.k as f64;
        match self.kind {
            PoleZeroKind::Pole => z,
            PoleZeroKind::Zero => -z,
        }
    }
}

/// Result of a full evaluation: a logarithm of S₂ (branch unspecified) and the
/// number of functional-equation steps that were needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S2Eval {
    pub log_value: C64,
    /// True when z is (numerically) a zero of S₂; `log_value` is then −∞.
    pub is_zero: bool,
    pub shifts: usize,
}

impl S2Eval {
    pub fn value(&self) -> C64 {
        if self.is_zero {
            C64::new(0.0, 0.0)
        } else {
            self.log_value.exp()
        }
    }
}

/// ln(2 sin w), stable for large |Im w|.
pub fn ln_two_sin(w: C64) -> C64 {
    let i = C64::i();
    if w.im > 0.0 {
        i * FRAC_PI_2 - i * w + (C64::new(1.0, 0.0) - (i * w * 2.0).exp()).ln()
    } else {
        -i * FRAC_PI_2 + i * w + (C64::new(1.0, 0.0) - (-i * w * 2.0).exp()).ln()
    }
}

// Taylor coefficients in x² of sinh(x)/x and x/sinh(x).
const SINHC: [f64; 6] = [
    1.0,
    1.0 / 6.0,
    1.0 / 120.0,
    1.0 / 5040.0,
    1.0 / 362880.0,
    1.0 / 39916800.0,
];
const INV_SINHC: [f64; 6] = [
    1.0,
    -1.0 / 6.0,
    7.0 / 360.0,
    -31.0 / 15120.0,
    127.0 / 604800.0,
    -73.0 / 3421440.0,
];

struct StripIntegrand {
    a: C64,
    w1: C64,
    w2: C64,
    prod: C64,
    series_cut: f64,
    /// Coefficients of t^{2k−2}, k = 1..5, of the integrand near t = 0.
    series: [C64; 5],
}

impl StripIntegrand {
    fn new(z: C64, periods: &Periods) -> Self {
        let w1 = periods.omega1;
        let w2 = periods.omega2;
        let sigma = w1 + w2;
        let prod = w1 * w2;
        let a = z * 2.0 - sigma;
        let scale = a.norm().max(w1.norm()).max(w2.norm());
        // beyond this the degree-8 series loses accuracy; below it the direct form cancels
        let series_cut = (SERIES_REACH / scale).min(0.5);
        let pa: Vec<C64> = (0..6).map(|k| (a * a).powu(k as u32) * SINHC[k]).collect();
        let p1: Vec<C64> = (0..6).map(|k| (w1 * w1).powu(k as u32) * INV_SINHC[k]).collect();
        let p2: Vec<C64> = (0..6).map(|k| (w2 * w2).powu(k as u32) * INV_SINHC[k]).collect();
        let mut c = [C64::new(0.0, 0.0); 6];
        for i in 0..6 {
            for j in 0..6 - i {
                for l in 0..6 - i - j {
                    c[i + j + l] += pa[i] * p1[j] * p2[l];
                }
            }
        }
        let lead = a / (prod * 2.0);
        let mut series = [C64::new(0.0, 0.0); 5];
        for k in 1..6 {
            series[k - 1] = lead * c[k];
        }
        StripIntegrand {
            a,
            w1,
            w2,
            prod,
            series_cut,
            series,
        }
    }

    fn eval(&self, t: f64) -> C64 {
        if t < self.series_cut {
            let t2 = t * t;
            let mut acc = self.series[4];
            for k in (0..4).rev() {
                acc = acc * t2 + self.series[k];
            }
            return acc;
        }
        let ratio = (self.a * t).sinh() / ((self.w1 * t).sinh() * (self.w2 * t).sinh());
        (ratio - self.a / (self.prod * t)) / (2.0 * t)
    }

    /// (1 − e^{−2ω₁t})(1 − e^{−2ω₂t}) for complex t.
    fn damping(&self, t: C64) -> C64 {
        let one = C64::new(1.0, 0.0);
        (one - (-self.w1 * t * 2.0).exp()) * (one - (-self.w2 * t * 2.0).exp())
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta;
    while t > PI {
        t -= 2.0 * PI;
    }
    while t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// ∫_{start}^{∞} e^{βt}/(t·D(t)) dt along a ray of steepest decay.
fn tail_integral(
    integrand: &StripIntegrand,
    beta: C64,
    start: f64,
    max_angle: f64,
    tol: f64,
    max_evals: usize,
) -> Result<(C64, f64), QuadError> {
    let theta = wrap_angle(PI - beta.arg()).clamp(-max_angle, max_angle);
    let dir = C64::from_polar(1.0, theta);
    let rate = -(beta * dir).re;
    let base = (beta * start).exp();
    let jac = dir / rate;
    let f = |u: f64| -> C64 {
        let s = u / rate;
        let t = C64::new(start, 0.0) + dir * s;
        (beta * dir * s).exp() / (t * integrand.damping(t)) * jac
    };
    let scale = base.norm().max(1e-300);
    let out = adaptive_gk(&f, 0.0, RAY_LENGTH, &[], 2, tol / scale, tol, max_evals);
    if !out.converged {
        return Err(QuadError::QuadratureFailure {
            value: out.value * base,
            error: out.error * scale,
            tolerance: tol,
            nodes: out.evaluations,
        });
    }
    Ok((out.value * base, out.error * scale))
}

/// ln S₂(z) from the integral representation, for z inside the analytic strip.
pub fn log_s2_strip(z: C64, periods: &Periods, spec: &QuadratureSpec) -> Result<C64, S2Error> {
    let point = StripPoint::new(z, periods);
    if !(point.strip_position > STRIP_MARGIN && point.strip_position < 1.0 - STRIP_MARGIN) {
        return Err(S2Error::StripViolation {
            z,
            position: point.strip_position,
        });
    }
    let integrand = StripIntegrand::new(z, periods);
    let a = integrand.a;
    let sigma = periods.sum();
    let cut = (1.0f64).min(8.0 / a.norm().max(1e-300));
    let tol = spec.tolerance / 4.0;
    let budget = spec.max_nodes;

    let f = |t: f64| integrand.eval(t);
    let breaks = [integrand.series_cut];
    let head = adaptive_gk(&f, 0.0, cut, &breaks, 1, tol, tol, budget);
    if !head.converged {
        return Err(QuadError::QuadratureFailure {
            value: head.value,
            error: head.error,
            tolerance: tol,
            nodes: head.evaluations,
        }
        .into());
    }

    let max_arg = periods.omega1.arg().abs().max(periods.omega2.arg().abs());
    let max_angle = (FRAC_PI_2 - max_arg - RAY_ANGLE_MARGIN).max(0.0);
    let (up, _) = tail_integral(&integrand, a - sigma, cut, max_angle, tol, budget)?;
    let (down, _) = tail_integral(&integrand, -(a + sigma), cut, max_angle, tol, budget)?;
    Ok(head.value + up - down - a / (integrand.prod * (2.0 * cut)))
}

fn default_spec() -> QuadratureSpec {
    QuadratureSpec {
        tolerance: S2_TOLERANCE,
        max_nodes: 200_000,
        ..Default::default()
    }
}

/// Distance from w·period to the nearest integer multiple of `period`.
fn lattice_gap(w: C64, period: C64) -> (f64, f64) {
    let k = w.re.round();
    ((w - C64::new(k, 0.0)).norm() * period.norm(), k)
}

/// Full evaluation of S₂(z) with strip reduction.
pub fn s2_eval(z: C64, periods: &Periods) -> Result<S2Eval, S2Error> {
    s2_eval_with(z, periods, &default_spec())
}

pub fn s2_eval_with(z: C64, periods: &Periods, spec: &QuadratureSpec) -> Result<S2Eval, S2Error> {
    let w1 = periods.omega1;
    let w2 = periods.omega2;
    let sigma = periods.sum();
    let guard = POLE_GUARD * sigma.norm();
    let centre = sigma.re / 2.0;
    let half_width = w1.re.max(w2.re) / 2.0;
    let mut w = z;
    let mut acc = C64::new(0.0, 0.0);
    let mut shifts = 0usize;
    while (w.re - centre).abs() > half_width {
        if shifts >= MAX_SHIFTS {
            return Err(S2Error::PrecisionLoss { z });
        }
        let up = w.re < centre;
        // choose the period whose shift lands closest to the centre line
        let cand = |p: C64| {
            let next = if up { w + p } else { w - p };
            (next.re - centre).abs()
        };
        let (shift, other) = if cand(w1) <= cand(w2) { (w1, w2) } else { (w2, w1) };
        if up {
            // S₂(w) = 2 sin(πw/other) · S₂(w + shift)
            let arg = w / other;
            let (gap, _) = lattice_gap(arg, other);
            if gap == 0.0 {
                return Ok(S2Eval {
                    log_value: C64::new(f64::NEG_INFINITY, 0.0),
                    is_zero: true,
                    shifts: shifts + 1,
                });
            }
            acc += ln_two_sin(arg * PI);
            w += shift;
        } else {
            // S₂(w) = S₂(w − shift) / 2 sin(π(w − shift)/other)
            let prev = w - shift;
            let arg = prev / other;
            let (gap, k) = lattice_gap(arg, other);
            if gap < guard {
                return Err(S2Error::PoleProximity {
                    z,
                    pole: z - w + other * k + shift,
                    distance: gap,
                });
            }
            acc -= ln_two_sin(arg * PI);
            w = prev;
        }
        shifts += 1;
    }
    let inner = log_s2_strip(w, periods, spec)?;
    Ok(S2Eval {
        log_value: acc + inner,
        is_zero: false,
        shifts,
    })
}

/// S₂(z|ω₁, ω₂) anywhere away from its poles.
pub fn s2(z: C64, periods: &Periods) -> Result<C64, S2Error> {
    s2_eval(z, periods).map(|e| e.value())
}

/// A logarithm of S₂(z); −∞ at zeros. The imaginary part is not normalised.
pub fn ln_s2(z: C64, periods: &Periods) -> Result<C64, S2Error> {
    s2_eval(z, periods).map(|e| e.log_value)
}

/// Residue of S₂ at a pole, or of 1/S₂ at a zero.
pub fn s2_residue(idx: PoleZeroIndex, p: &Params) -> Result<C64, S2Error> {
    let w1 = p.omega1;
    let w2 = p.omega2;
    let (lo, mk_sign, m_top, k_top) = match idx.kind {
        PoleZeroKind::Pole => {
            if idx.m < 1 || idx.k < 1 {
                return Err(S2Error::InvalidIndex {
                    m: idx.m,
                    k: idx.k,
                    kind: idx.kind,
                });
            }
            (1, idx.m * idx.k, idx.m - 1, idx.k - 1)
        }
        PoleZeroKind::Zero => {
            if idx.m < 0 || idx.k < 0 {
                return Err(S2Error::InvalidIndex {
                    m: idx.m,
                    k: idx.k,
                    kind: idx.kind,
                });
            }
            (1, idx.m * idx.k + idx.m + idx.k, idx.m, idx.k)
        }
    };
    let mut denom = C64::new(1.0, 0.0);
    for s in lo..=m_top {
        denom *= (w1 * (PI * s as f64) / w2).sin() * 2.0;
    }
    for l in lo..=k_top {
        denom *= (w2 * (PI * l as f64) / w1).sin() * 2.0;
    }
    let sign = if mk_sign % 2 == 0 { 1.0 } else { -1.0 };
    Ok((w1 * w2).sqrt() / (2.0 * PI) * sign / denom)
}

/// Distance from z to the closed cone of directions between the two angles.
fn cone_distance(z: C64, lo: f64, hi: f64) -> f64 {
    let arg = z.arg();
    let inside = |a: f64| {
        let rel = wrap_angle(a - lo);
        rel >= 0.0 && rel <= wrap_angle(hi - lo).max(0.0)
    };
    if inside(arg) {
        return 0.0;
    }
    let r = z.norm();
    [lo, hi]
        .iter()
        .map(|&phi| {
            let d = wrap_angle(arg - phi).abs();
            if d >= FRAC_PI_2 {
                r
            } else {
                r * d.sin()
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Distance from z to the union of the pole and zero cones of S₂.
pub fn distance_to_cones(z: C64, periods: &Periods) -> f64 {
    let a1 = periods.omega1.arg();
    let a2 = periods.omega2.arg();
    let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
    cone_distance(z, lo, hi).min(cone_distance(z, lo + PI, hi + PI))
}

/// Leading asymptotic of S₂(z)/S₂(z+g) away from the pole and zero cones.
///
/// The exponent carries −πiĝ on the side of the cones containing the positive
/// imaginary axis and +πiĝ on the opposite side.
pub fn s2_asymptotic(z: C64, p: &Params) -> Result<C64, S2Error> {
    let periods = p.periods();
    let distance = distance_to_cones(z, &periods);
    if distance < CONE_DISTANCE_MIN {
        return Err(S2Error::ConeProximity { z, distance });
    }
    let sign = if upper_side(z, &periods) { -1.0 } else { 1.0 };
    Ok((C64::i() * PI * sign * p.ghat * (z - p.gstar / 2.0)).exp())
}

/// Whether z lies in the component of ℂ∖D that contains +i∞.
fn upper_side(z: C64, periods: &Periods) -> bool {
    let a1 = periods.omega1.arg();
    let a2 = periods.omega2.arg();
    let hi = a1.max(a2);
    let rel = wrap_angle(z.arg() - hi);
    rel > 0.0 && rel < PI
}
