//! Integration engine: adaptive Gauss–Kronrod and tanh-sinh on truncated lines,
//! nested tensor rules for low dimension and stratified Monte Carlo above that.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Nodes per oscillation period used to seed the initial subdivision.
pub const NODES_PER_PERIOD: f64 = 6.0;

/// Largest dimension accepted by [`integrate_nd`].
pub const MAX_DIMS: usize = 8;

/// Largest dimension handled by the nested tensor rule.
pub const MAX_TENSOR_DIMS: usize = 3;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature failed: error estimate {error:e} above tolerance {tolerance:e} after {nodes} nodes (value {value})")]
    QuadratureFailure {
        value: C64,
        error: f64,
        tolerance: f64,
        nodes: usize,
    },
    #[error("decay rate must be positive, got {0}")]
    NonPositiveDecay(f64),
    #[error("dimension {0} exceeds the supported maximum of 8")]
    DimensionTooLarge(usize),
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "adaptive-gauss")]
    AdaptiveGauss,
    #[serde(rename = "tanh-sinh")]
    TanhSinh,
    #[serde(rename = "monte-carlo")]
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Auto,
    Manual(f64),
}

impl Serialize for Truncation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Truncation::Auto => s.serialize_str("auto"),
            Truncation::Manual(r) => s.serialize_f64(*r),
        }
    }
}

impl<'de> Deserialize<'de> for Truncation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(r) => Ok(Truncation::Manual(r)),
            Repr::Str(s) if s == "auto" => Ok(Truncation::Auto),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "truncation_radius must be a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    pub tolerance: f64,
    pub max_nodes: usize,
    pub truncation_radius: Truncation,
    #[serde(default)]
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            scheme: Scheme::AdaptiveGauss,
            tolerance: 1e-9,
            max_nodes: 400_000,
            truncation_radius: Truncation::Auto,
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerance(tolerance: f64) -> Self {
        QuadratureSpec {
            tolerance,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<(), QuadError> {
        if !(self.tolerance > 0.0) {
            return Err(QuadError::InvalidSpec("tolerance must be positive".into()));
        }
        if self.max_nodes < 15 {
            return Err(QuadError::InvalidSpec("max_nodes must be at least 15".into()));
        }
        if let Truncation::Manual(r) = self.truncation_radius {
            if !(r > 0.0) {
                return Err(QuadError::InvalidSpec(
                    "manual truncation radius must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralResult {
    pub value: C64,
    pub error_estimate: f64,
    pub nodes_used: usize,
    pub truncation_radius_used: f64,
}

/// Declared exponential envelope |f(x)| ≤ amplitude·e^{−decay_rate·|x − center|}
/// together with the largest oscillation frequency (cycles per unit length).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub center: f64,
    pub decay_rate: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

impl Envelope {
    pub fn new(center: f64, decay_rate: f64, amplitude: f64) -> Self {
        Envelope {
            center,
            decay_rate,
            amplitude,
            frequency: 0.0,
        }
    }

    pub fn with_frequency(mut self, frequency: f64) -> Self {
        self.frequency = frequency.abs();
        self
    }
}

/// Smallest R with amplitude·e^{−decay_rate·R}/decay_rate ≤ tol/10.
pub fn truncation_radius(decay_rate: f64, amplitude: f64, tol: f64) -> Result<f64, QuadError> {
    if !(decay_rate > 0.0) {
        return Err(QuadError::NonPositiveDecay(decay_rate));
    }
    let r = (10.0 * amplitude / (decay_rate * tol)).ln() / decay_rate;
    Ok(r.max(0.0))
}

/// Neumaier compensated accumulator for complex sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: C64,
    comp: C64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: C64) {
        self.sum.re = neumaier_step(self.sum.re, v.re, &mut self.comp.re);
        self.sum.im = neumaier_step(self.sum.im, v.im, &mut self.comp.im);
    }

    pub fn value(&self) -> C64 {
        self.sum + self.comp
    }
}

#[inline]
fn neumaier_step(sum: f64, v: f64, comp: &mut f64) -> f64 {
    let t = sum + v;
    if sum.abs() >= v.abs() {
        *comp += (sum - t) + v;
    } else {
        *comp += (v - t) + sum;
    }
    t
}

/// Compensated sum of a slice in index order.
pub fn ordered_sum(values: &[C64]) -> C64 {
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208123258215,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Number of integrand evaluations in one Gauss–Kronrod panel.
pub const GK_NODES: usize = 21;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = err;
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * resabs;
        if min_err > err {
            err = min_err;
        }
    }
    err
}

/// One 10/21-point Gauss–Kronrod panel on [a, b].
pub fn gk21<F: Fn(f64) -> C64 + ?Sized>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();
    let fc = f(center);
    let mut resg = C64::new(0.0, 0.0);
    let mut resk = fc * WGK[10];
    let mut resabs = fc.norm() * WGK[10];
    let mut fv1 = [C64::new(0.0, 0.0); 10];
    let mut fv2 = [C64::new(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        let s = f1 + f2;
        resk += s * WGK[j];
        resabs += WGK[j] * (f1.norm() + f2.norm());
        if j % 2 == 1 {
            resg += s * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).norm();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let result = resk * half;
    let err = ((resk - resg) * half).norm();
    (result, rescale_error(err, resabs * abs_half, resasc * abs_half))
}

/// Nodes and weights of the 21-point Kronrod rule on [a, b], used as a fixed
/// rule (degree 31) when the same nodes must serve several integrands.
pub fn kronrod_nodes(a: f64, b: f64) -> Vec<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = Vec::with_capacity(GK_NODES);
    for j in 0..10 {
        out.push((center - half * XGK[j], half * WGK[j]));
    }
    out.push((center, half * WGK[10]));
    for j in (0..10).rev() {
        out.push((center + half * XGK[j], half * WGK[j]));
    }
    out
}

/// Outcome of an adaptive run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptive {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod integration over [a, b] split at `breaks`
/// (sorted interior points) and into `initial_panels` equal pieces each.
pub fn adaptive_gk<F: Fn(f64) -> C64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    initial_panels: usize,
    epsabs: f64,
    epsrel: f64,
    max_evals: usize,
) -> Adaptive {
    let mut edges = vec![a];
    for &p in breaks {
        if p > a && p < b {
            edges.push(p);
        }
    }
    edges.push(b);
    let pieces = initial_panels.max(1);
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        for k in 0..pieces {
            let pa = lo + (hi - lo) * (k as f64) / (pieces as f64);
            let pb = if k + 1 == pieces {
                hi
            } else {
                lo + (hi - lo) * ((k + 1) as f64) / (pieces as f64)
            };
            let (value, error) = gk21(f, pa, pb);
            evaluations += GK_NODES;
            heap.push(Panel {
                a: pa,
                b: pb,
                value,
                error,
            });
        }
    }
    let total = |heap: &BinaryHeap<Panel>| {
        let mut acc = CompensatedSum::new();
        let mut err = 0.0;
        let mut panels: Vec<&Panel> = heap.iter().collect();
        panels.sort_by(|p, q| p.a.total_cmp(&q.a));
        for p in panels {
            acc.add(p.value);
            err += p.error;
        }
        (acc.value(), err)
    };
    let (mut value, mut error) = total(&heap);
    let mut stalled = Vec::new();
    loop {
        let target = epsabs.max(epsrel * value.norm());
        if error <= target {
            for p in stalled {
                heap.push(p);
            }
            let (v, e) = total(&heap);
            return Adaptive {
                value: v,
                error: e,
                evaluations,
                converged: true,
            };
        }
        if evaluations + 2 * GK_NODES > max_evals {
            break;
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        let width = (worst.b - worst.a).abs();
        if width <= 1e-13 * (b - a).abs().max(1e-300) || mid == worst.a || mid == worst.b {
            stalled.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = gk21(f, worst.a, mid);
        let (v2, e2) = gk21(f, mid, worst.b);
        evaluations += 2 * GK_NODES;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        if heap.len() % 64 == 0 {
            let mut all: BinaryHeap<Panel> = heap.clone();
            for p in &stalled {
                all.push(*p);
            }
            let t = total(&all);
            value = t.0;
            error = t.1;
        }
    }
    for p in stalled {
        heap.push(p);
    }
    let (v, e) = total(&heap);
    let target = epsabs.max(epsrel * v.norm());
    Adaptive {
        value: v,
        error: e,
        evaluations,
        converged: e <= target,
    }
}

/// Tanh-sinh rule on [a, b], refining the step until successive levels agree.
pub fn tanh_sinh<F: Fn(f64) -> C64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64, max_evals: usize) -> Adaptive {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    let t_max = 3.2;
    let node = |t: f64| -> (f64, f64) {
        let s = std::f64::consts::FRAC_PI_2 * t.sinh();
        let x = s.tanh();
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / s.cosh().powi(2);
        (x, w)
    };
    let eval = |t: f64| -> C64 {
        let (x, w) = node(t);
        let one_minus = 1.0 - x.abs();
        if one_minus <= 0.0 || w == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let mut acc = C64::new(0.0, 0.0);
        let xp = center + half * x;
        let xm = center - half * x;
        if xp < b && xp > a {
            acc += f(xp);
        }
        if t != 0.0 && xm > a && xm < b {
            acc += f(xm);
        }
        acc * (w * half)
    };
    let mut h = 0.5;
    let mut sum = CompensatedSum::new();
    let mut evaluations = 0usize;
    let mut k = 0i64;
    loop {
        let t = k as f64 * h;
        if t > t_max {
            break;
        }
        sum.add(eval(t));
        evaluations += if k == 0 { 1 } else { 2 };
        k += 1;
    }
    let mut estimate = sum.value() * h;
    let mut error = f64::INFINITY;
    while evaluations < max_evals {
        h *= 0.5;
        let mut k = 1i64;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            sum.add(eval(t));
            evaluations += 2;
            k += 2;
        }
        let next = sum.value() * h;
        error = (next - estimate).norm();
        estimate = next;
        if error <= tol.max(4.0 * f64::EPSILON * estimate.norm()) && h < 0.1 {
            return Adaptive {
                value: estimate,
                error,
                evaluations,
                converged: true,
            };
        }
    }
    Adaptive {
        value: estimate,
        error,
        evaluations,
        converged: false,
    }
}

fn radius_for(env: &Envelope, spec: &QuadratureSpec) -> Result<f64, QuadError> {
    match spec.truncation_radius {
        Truncation::Manual(r) => Ok(r),
        Truncation::Auto => truncation_radius(env.decay_rate, env.amplitude.max(1e-300), spec.tolerance),
    }
}

fn oscillation_panels(radius: f64, frequency: f64) -> usize {
    let periods = 2.0 * radius * frequency;
    let panels = (periods * NODES_PER_PERIOD / GK_NODES as f64).ceil();
    panels.max(1.0) as usize
}

/// Integral over the real line of a function with the declared envelope.
pub fn integrate_1d<F: Fn(f64) -> C64 + ?Sized>(
    f: &F,
    env: &Envelope,
    spec: &QuadratureSpec,
) -> Result<IntegralResult, QuadError> {
    spec.check()?;
    let radius = radius_for(env, spec)?;
    let a = env.center - radius;
    let b = env.center + radius;
    integrate_interval(f, a, b, &[], env.frequency, spec).map(|mut r| {
        r.truncation_radius_used = radius;
        r
    })
}

/// Integral over the finite interval [a, b] with optional interior break points.
pub fn integrate_interval<F: Fn(f64) -> C64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    frequency: f64,
    spec: &QuadratureSpec,
) -> Result<IntegralResult, QuadError> {
    spec.check()?;
    let half_width = 0.5 * (b - a).abs();
    let outcome = match spec.scheme {
        Scheme::AdaptiveGauss => {
            let panels = oscillation_panels(half_width, frequency);
            adaptive_gk(f, a, b, breaks, panels, spec.tolerance, spec.tolerance, spec.max_nodes)
        }
        Scheme::TanhSinh => {
            let mut edges = vec![a];
            edges.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
            edges.push(b);
            let mut total = Adaptive {
                value: C64::new(0.0, 0.0),
                error: 0.0,
                evaluations: 0,
                converged: true,
            };
            let pieces = oscillation_panels(half_width, frequency);
            let share = spec.max_nodes / ((edges.len() - 1) * pieces).max(1);
            for w in edges.windows(2) {
                for k in 0..pieces {
                    let lo = w[0] + (w[1] - w[0]) * k as f64 / pieces as f64;
                    let hi = w[0] + (w[1] - w[0]) * (k + 1) as f64 / pieces as f64;
                    let part = tanh_sinh(f, lo, hi, spec.tolerance / pieces as f64, share);
                    total.value += part.value;
                    total.error += part.error;
                    total.evaluations += part.evaluations;
                    total.converged &= part.converged;
                }
            }
            total
        }
        Scheme::MonteCarlo => {
            let g = |x: &[f64]| f(x[0]);
            return monte_carlo(&g, &[a], &[b], spec);
        }
    };
    let tolerance = spec.tolerance * outcome.value.norm().max(1.0);
    if !outcome.converged && outcome.error > tolerance {
        return Err(QuadError::QuadratureFailure {
            value: outcome.value,
            error: outcome.error,
            tolerance,
            nodes: outcome.evaluations,
        });
    }
    Ok(IntegralResult {
        value: outcome.value,
        error_estimate: outcome.error,
        nodes_used: outcome.evaluations,
        truncation_radius_used: half_width,
    })
}

/// Integral over ℝ^dims of a function whose envelope is given per coordinate.
/// Uses nested adaptive rules for dims ≤ 3 and stratified Monte Carlo above.
pub fn integrate_nd<F: Fn(&[f64]) -> C64 + ?Sized>(
    f: &F,
    dims: usize,
    envs: &[Envelope],
    spec: &QuadratureSpec,
) -> Result<IntegralResult, QuadError> {
    spec.check()?;
    if dims > MAX_DIMS {
        return Err(QuadError::DimensionTooLarge(dims));
    }
    if dims == 0 {
        return Err(QuadError::InvalidSpec("dims must be at least 1".into()));
    }
    if envs.len() != dims {
        return Err(QuadError::InvalidSpec(format!(
            "expected {dims} envelopes, got {}",
            envs.len()
        )));
    }
    let mut lo = Vec::with_capacity(dims);
    let mut hi = Vec::with_capacity(dims);
    let mut radius_max: f64 = 0.0;
    for env in envs {
        let r = radius_for(env, spec)?;
        radius_max = radius_max.max(r);
        lo.push(env.center - r);
        hi.push(env.center + r);
    }
    if dims > MAX_TENSOR_DIMS || spec.scheme == Scheme::MonteCarlo {
        let mut r = monte_carlo(f, &lo, &hi, spec)?;
        r.truncation_radius_used = radius_max;
        return Ok(r);
    }
    let nodes = Cell::new(0usize);
    let inner_err = Cell::new((0.0f64, 0usize));
    let freqs: Vec<f64> = envs.iter().map(|e| e.frequency).collect();
    let outcome = nested(f, &lo, &hi, &freqs, spec, &mut Vec::with_capacity(dims), &nodes, &inner_err)?;
    // inner errors averaged over the outer nodes, times the outer width
    let width: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).next().unwrap_or(1.0);
    let (err_sum, err_count) = inner_err.get();
    let error = outcome.error + width * err_sum / err_count.max(1) as f64;
    let tolerance = spec.tolerance * outcome.value.norm().max(1.0);
    if error > 10.0 * tolerance {
        return Err(QuadError::QuadratureFailure {
            value: outcome.value,
            error,
            tolerance,
            nodes: nodes.get(),
        });
    }
    Ok(IntegralResult {
        value: outcome.value,
        error_estimate: error,
        nodes_used: nodes.get(),
        truncation_radius_used: radius_max,
    })
}

#[allow(clippy::too_many_arguments)]
fn nested<F: Fn(&[f64]) -> C64 + ?Sized>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    freqs: &[f64],
    spec: &QuadratureSpec,
    prefix: &mut Vec<f64>,
    nodes: &Cell<usize>,
    inner_err: &Cell<(f64, usize)>,
) -> Result<Adaptive, QuadError> {
    let depth = prefix.len();
    let last = depth + 1 == lo.len();
    let remaining = lo.len() - depth;
    let tol = spec.tolerance / (remaining as f64);
    let budget = (spec.max_nodes as f64).powf(1.0 / lo.len() as f64).max(2.0 * GK_NODES as f64) as usize;
    let panels = oscillation_panels(0.5 * (hi[depth] - lo[depth]), freqs[depth]);
    let prefix_cell = std::cell::RefCell::new(std::mem::take(prefix));
    let failure = Cell::new(None);
    let g = |x: f64| -> C64 {
        let mut p = prefix_cell.borrow_mut();
        p.push(x);
        let v = if last {
            nodes.set(nodes.get() + 1);
            f(&p)
        } else {
            let mut inner_prefix = std::mem::take(&mut *p);
            drop(p);
            let r = nested(f, lo, hi, freqs, spec, &mut inner_prefix, nodes, inner_err);
            p = prefix_cell.borrow_mut();
            *p = inner_prefix;
            match r {
                Ok(a) => {
                    let (sum, count) = inner_err.get();
                    inner_err.set((sum + a.error, count + 1));
                    a.value
                }
                Err(e) => {
                    failure.set(Some(e));
                    C64::new(0.0, 0.0)
                }
            }
        };
        p.pop();
        v
    };
    let outcome = adaptive_gk(&g, lo[depth], hi[depth], &[], panels, tol, tol, budget);
    *prefix = prefix_cell.into_inner();
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(outcome)
}

/// Stratified Monte Carlo over the box [lo, hi] with a seeded generator.
pub fn monte_carlo<F: Fn(&[f64]) -> C64 + ?Sized>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    spec: &QuadratureSpec,
) -> Result<IntegralResult, QuadError> {
    let dims = lo.len();
    if dims > MAX_DIMS {
        return Err(QuadError::DimensionTooLarge(dims));
    }
    let budget = spec.max_nodes.max(16);
    let mut per_dim = ((budget / 4) as f64).powf(1.0 / dims as f64).floor() as usize;
    per_dim = per_dim.clamp(1, 64);
    let strata = per_dim.pow(dims as u32);
    let per_stratum = (budget / strata).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cell: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (b - a) / per_dim as f64).collect();
    let cell_volume: f64 = cell.iter().product();
    let mut estimate = CompensatedSum::new();
    let mut variance = 0.0;
    let mut point = vec![0.0; dims];
    let mut index = vec![0usize; dims];
    let mut nodes = 0usize;
    for s in 0..strata {
        let mut rem = s;
        for d in 0..dims {
            index[d] = rem % per_dim;
            rem /= per_dim;
        }
        let mut mean = C64::new(0.0, 0.0);
        let mut m2 = 0.0;
        for k in 0..per_stratum {
            for d in 0..dims {
                let u: f64 = rng.gen();
                point[d] = lo[d] + cell[d] * (index[d] as f64 + u);
            }
            let v = f(&point);
            nodes += 1;
            let delta = v - mean;
            mean += delta / (k as f64 + 1.0);
            m2 += delta.norm() * (v - mean).norm();
        }
        let var = m2 / (per_stratum as f64 - 1.0);
        estimate.add(mean * cell_volume);
        variance += cell_volume * cell_volume * var / per_stratum as f64;
    }
    let value = estimate.value();
    let error = variance.sqrt();
    let radius = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| 0.5 * (b - a))
        .fold(0.0f64, f64::max);
    Ok(IntegralResult {
        value,
        error_estimate: error,
        nodes_used: nodes,
        truncation_radius_used: radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn kronrod_rule_is_exact_for_degree_31() {
        let nodes = kronrod_nodes(-1.0, 2.0);
        let s: f64 = nodes.iter().map(|(x, w)| w * x.powi(30)).sum();
        let exact = (2f64.powi(31) + 1.0) / 31.0;
        assert!((s - exact).abs() < 1e-12 * exact);
        assert!(nodes.windows(2).all(|p| p[0].0 < p[1].0));
    }

    #[test]
    fn radius_closed_form() {
        let r = truncation_radius(PI, 1.0, 1e-10).unwrap();
        assert!((r - (1e11 / PI).ln() / PI).abs() < 1e-12);
        let r2 = truncation_radius(PI, 2.0, 1e-10).unwrap();
        assert!((r2 - r - 2f64.ln() / PI).abs() < 1e-12);
        assert_eq!(truncation_radius(0.0, 1.0, 1e-10), Err(QuadError::NonPositiveDecay(0.0)));
    }

    #[test]
    fn two_sided_exponential() {
        let spec = QuadratureSpec::with_tolerance(1e-12);
        let env = Envelope::new(0.0, PI, 1.0);
        let r = integrate_1d(&|x: f64| c((-PI * x.abs()).exp()), &env, &spec).unwrap();
        assert!((r.value.re - 2.0 / PI).abs() < 1e-11, "{:?}", r);
    }

    #[test]
    fn gaussian_all_schemes() {
        let env = Envelope::new(0.3, 1.0, 1.0);
        for scheme in [Scheme::AdaptiveGauss, Scheme::TanhSinh] {
            let spec = QuadratureSpec {
                scheme,
                tolerance: 1e-12,
                ..Default::default()
            };
            let r = integrate_1d(&|x: f64| c((-x * x).exp()), &env, &spec).unwrap();
            assert!((r.value.re - PI.sqrt()).abs() < 1e-10, "{scheme:?} {:?}", r);
        }
    }

    #[test]
    fn oscillatory_fourier() {
        // ∫ e^{-x²} e^{2πiλx} dx = √π e^{-π²λ²}
        let lambda = 3.0;
        let env = Envelope::new(0.0, 1.0, 1.0).with_frequency(lambda);
        let spec = QuadratureSpec::with_tolerance(1e-12);
        let r = integrate_1d(
            &|x: f64| C64::from_polar((-x * x).exp(), 2.0 * PI * lambda * x),
            &env,
            &spec,
        )
        .unwrap();
        let truth = PI.sqrt() * (-PI * PI * lambda * lambda).exp();
        assert!((r.value - c(truth)).norm() < 1e-11);
    }

    #[test]
    fn separable_tensor() {
        let spec = QuadratureSpec::with_tolerance(1e-9);
        let env = Envelope::new(0.0, PI, 1.0);
        let r = integrate_nd(&|x: &[f64]| c((-PI * (x[0].abs() + x[1].abs())).exp()), 2, &[env, env], &spec).unwrap();
        assert!((r.value.re - (2.0 / PI).powi(2)).abs() < 1e-8, "{:?}", r);
    }

    #[test]
    fn tensor_matches_1d() {
        let spec = QuadratureSpec::with_tolerance(1e-10);
        let env = Envelope::new(0.0, 1.0, 1.0);
        let f = |x: f64| c((-x * x).exp() * (1.0 + x * x));
        let a = integrate_1d(&f, &env, &spec).unwrap();
        let b = integrate_nd(&|x: &[f64]| f(x[0]), 1, &[env], &spec).unwrap();
        assert!((a.value - b.value).norm() < 1e-10);
    }

    #[test]
    fn dimension_limit() {
        let spec = QuadratureSpec::default();
        let env = Envelope::new(0.0, 1.0, 1.0);
        let r = integrate_nd(&|_: &[f64]| c(1.0), 9, &[env; 9], &spec);
        assert_eq!(r, Err(QuadError::DimensionTooLarge(9)));
    }

    #[test]
    fn monte_carlo_deterministic_and_honest() {
        let spec = QuadratureSpec {
            scheme: Scheme::MonteCarlo,
            tolerance: 1e-2,
            max_nodes: 200_000,
            truncation_radius: Truncation::Manual(6.0),
            seed: 7,
        };
        let env = Envelope::new(0.0, 1.0, 1.0);
        let f = |x: &[f64]| c(x.iter().map(|v| (-v * v).exp()).product());
        let a = integrate_nd(&f, 4, &[env; 4], &spec).unwrap();
        let b = integrate_nd(&f, 4, &[env; 4], &spec).unwrap();
        assert_eq!(a, b);
        let truth = PI * PI;
        assert!((a.value.re - truth).abs() < 4.0 * a.error_estimate + 1e-3, "{:?}", a);
    }

    #[test]
    fn spec_validation_and_json() {
        let mut spec = QuadratureSpec::default();
        spec.max_nodes = 10;
        assert!(spec.check().is_err());
        let json = r#"{"scheme":"tanh-sinh","tolerance":1e-7,"max_nodes":1000,"truncation_radius":"auto","seed":3}"#;
        let s: QuadratureSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s.scheme, Scheme::TanhSinh);
        assert_eq!(s.truncation_radius, Truncation::Auto);
        let json = r#"{"scheme":"monte-carlo","tolerance":1e-2,"max_nodes":1000,"truncation_radius":12.5}"#;
        let s: QuadratureSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s.truncation_radius, Truncation::Manual(12.5));
        assert_eq!(s.seed, 0);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut acc = CompensatedSum::new();
        acc.add(c(1.0));
        for _ in 0..1000 {
            acc.add(c(1e-16));
        }
        acc.add(c(-1.0));
        assert!((acc.value().re - 1e-13).abs() < 1e-25, "{}", acc.value().re);
    }
}
