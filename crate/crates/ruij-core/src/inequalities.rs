//! The piecewise-linear inequalities behind the convergence of I and J:
//! the S_n bound, L_n ≤ 0 and the R_n bound, evaluated directly and sampled.
//!
//! Norms are ‖x‖ = Σ|x_i|. S_n takes nested levels y₁, …, y_n with level k of
//! length k; the bound is stated with the top level playing the role of x_n.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::report::VerificationReport;

/// Probability that a sample gets a near-coincident cluster.
pub const CLUSTER_PROBABILITY: f64 = 0.3;

/// Half-width of a near-coincident cluster.
pub const CLUSTER_WIDTH: f64 = 1e-9;

/// Sampling boxes [−b, b] used by the randomized checks.
pub const SAMPLE_BOXES: [f64; 2] = [10.0, 1e4];

#[derive(Error, Debug, Clone, PartialEq)]
pub enum InequalityError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("ε = {eps} outside [0, {max}]")]
    EpsOutOfRange { eps: f64, max: f64 },
    #[error("n must be at least {min}, got {n}")]
    TooSmall { n: usize, min: usize },
}

type Result<T> = std::result::Result<T, InequalityError>;

/// Sum of |a − b| over a × b, and of the magnitudes involved.
fn cross(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut s = 0.0;
    let mut m = 0.0;
    for x in a {
        for y in b {
            s += (x - y).abs();
            m += x.abs() + y.abs();
        }
    }
    (s, m)
}

/// Sum of |a_i − a_j| over i < j.
fn within(a: &[f64]) -> (f64, f64) {
    let mut s = 0.0;
    let mut m = 0.0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            s += (a[i] - a[j]).abs();
            m += a[i].abs() + a[j].abs();
        }
    }
    (s, m)
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

fn check_levels(levels: &[Vec<f64>]) -> Result<()> {
    for (k, level) in levels.iter().enumerate() {
        if level.len() != k + 1 {
            return Err(InequalityError::ShapeMismatch(format!(
                "level {} has {} entries, expected {}",
                k + 1,
                level.len(),
                k + 1
            )));
        }
        if level.iter().any(|v| !v.is_finite()) {
            return Err(InequalityError::ShapeMismatch("non-finite entry".into()));
        }
    }
    Ok(())
}

/// S_n by its recurrence: S₁ = 0 and
/// S_n = Σ_{i≠j}|y_i^{(n)} − y_j^{(n)}| − Σ_{i,j}|y_i^{(n)} − y_j^{(n−1)}| + S_{n−1}.
pub fn eval_s(levels: &[Vec<f64>]) -> Result<f64> {
    check_levels(levels)?;
    Ok(s_terms(levels).0)
}

/// Value and magnitude of all terms, for rounding slack.
fn s_terms(levels: &[Vec<f64>]) -> (f64, f64) {
    let mut value = 0.0;
    let mut mass = 0.0;
    for k in 1..levels.len() {
        let (w, wm) = within(&levels[k]);
        let (c, cm) = cross(&levels[k], &levels[k - 1]);
        value += 2.0 * w - c;
        mass += 2.0 * wm + cm;
    }
    (value, mass)
}

/// Right side of the S_n bound with the top level as x_n:
/// (1/2)Σ_{i≠j}|x_i − x_j| + ε‖x‖ − ε/((n−1)!e)·Σ_k‖y_k‖.
pub fn s_bound(levels: &[Vec<f64>], eps: f64) -> Result<f64> {
    check_levels(levels)?;
    let n = levels.len();
    if n < 1 {
        return Err(InequalityError::TooSmall { n, min: 1 });
    }
    let max = 2.0 * (n as f64 - 1.0);
    if !(0.0..=max).contains(&eps) {
        return Err(InequalityError::EpsOutOfRange { eps, max });
    }
    let x = &levels[n - 1];
    let lower: f64 = levels[..n - 1].iter().map(|y| norm(y)).sum();
    Ok(within(x).0 + eps * norm(x) - eps / (factorial(n - 1) * std::f64::consts::E) * lower)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// L_n(y_n, x_{n+1}) = Σ_{i<j}|x_i − x_j| + Σ_{i<j}|y_i − y_j| − Σ_{i,j}|x_i − y_j|.
pub fn eval_l(y: &[f64], x: &[f64]) -> Result<f64> {
    if x.len() != y.len() + 1 {
        return Err(InequalityError::ShapeMismatch(format!(
            "L_n needs |x| = |y| + 1, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(pair_form(y, x).0)
}

/// R_n(y_n, x_n), the same form with tuples of equal length.
pub fn eval_r(y: &[f64], x: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(InequalityError::ShapeMismatch(format!(
            "R_n needs |x| = |y|, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(pair_form(y, x).0)
}

fn pair_form(y: &[f64], x: &[f64]) -> (f64, f64) {
    let (wx, mx) = within(x);
    let (wy, my) = within(y);
    let (c, mc) = cross(x, y);
    (wx + wy - c, mx + my + mc)
}

/// Right side of the R_n bound, ε(‖y‖ − ‖x‖).
pub fn r_bound(y: &[f64], x: &[f64], eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(InequalityError::EpsOutOfRange { eps, max: 1.0 });
    }
    Ok(eps * (norm(y) - norm(x)))
}

/// Rounding slack for a sum of terms of the given total magnitude.
fn slack(mass: f64) -> f64 {
    4.0 * f64::EPSILON * mass
}

/// Draws a tuple from [−b, b], sometimes collapsing entries onto a cluster.
fn draw(rng: &mut ChaCha8Rng, len: usize, bound: f64, cluster: Option<f64>) -> Vec<f64> {
    (0..len)
        .map(|_| match cluster {
            Some(c) if rng.gen_bool(0.5) => c + rng.gen_range(-CLUSTER_WIDTH..=CLUSTER_WIDTH),
            _ => rng.gen_range(-bound..=bound),
        })
        .collect()
}

fn maybe_cluster(rng: &mut ChaCha8Rng, bound: f64) -> Option<f64> {
    rng.gen_bool(CLUSTER_PROBABILITY).then(|| rng.gen_range(-bound..=bound))
}

/// Nested levels of lengths 1..=n for the S_n bound.
pub fn sample_levels(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<Vec<f64>> {
    let cluster = maybe_cluster(rng, bound);
    (1..=n).map(|k| draw(rng, k, bound, cluster)).collect()
}

/// A pair (y, x) of lengths (ny, nx) for L_n and R_n.
pub fn sample_pair(rng: &mut ChaCha8Rng, ny: usize, nx: usize, bound: f64) -> (Vec<f64>, Vec<f64>) {
    let cluster = maybe_cluster(rng, bound);
    let y = draw(rng, ny, bound, cluster);
    let x = draw(rng, nx, bound, cluster);
    (y, x)
}

/// Tally of one property over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Tally {
    violations: usize,
    /// Largest (lhs − rhs) relative to the term magnitude; negative when all hold.
    worst: f64,
}

fn tally<I: ParallelIterator<Item = (f64, f64, f64)>>(margins: I) -> Tally {
    margins
        .map(|(lhs, rhs, mass)| Tally {
            violations: usize::from(lhs > rhs + slack(mass)),
            worst: (lhs - rhs) / mass.max(f64::MIN_POSITIVE),
        })
        .reduce(
            || Tally {
                violations: 0,
                worst: f64::NEG_INFINITY,
            },
            |a, b| Tally {
                violations: a.violations + b.violations,
                worst: a.worst.max(b.worst),
            },
        )
}

fn report(name: &str, n: usize, t: Tally, samples: usize, started: Instant) -> VerificationReport {
    VerificationReport::new(name, n, t.violations as f64, 0.0, started)
        .with_meta("samples", samples)
        .with_meta("violations", t.violations)
        .with_meta("worst_relative_margin", format!("{:.3e}", t.worst))
}

/// S_n ≤ bound over the given level samples; the residual counts violations.
pub fn check_s_bound(samples: &[Vec<Vec<f64>>], eps: f64) -> Result<VerificationReport> {
    let started = Instant::now();
    let n = samples.first().map_or(0, |s| s.len());
    for s in samples {
        check_levels(s)?;
        if s.len() != n {
            return Err(InequalityError::ShapeMismatch("samples of different n".into()));
        }
    }
    s_bound(&samples[0], eps)?;
    let t = tally(samples.par_iter().map(|s| {
        let (value, mass) = s_terms(s);
        let rhs = s_bound(s, eps).unwrap_or(f64::NAN);
        let x = &s[n - 1];
        let lower: f64 = s[..n - 1].iter().map(|y| norm(y)).sum();
        (value, rhs, mass + within(x).1 + eps * (norm(x) + lower))
    }));
    Ok(report("inequality-s-bound", n, t, samples.len(), started).with_meta("eps", eps))
}

/// L_n ≤ 0 over (y_n, x_{n+1}) samples.
pub fn check_l_nonpositive(samples: &[(Vec<f64>, Vec<f64>)]) -> Result<VerificationReport> {
    let started = Instant::now();
    for (y, x) in samples {
        eval_l(y, x)?;
    }
    let n = samples.first().map_or(0, |s| s.0.len());
    let t = tally(samples.par_iter().map(|(y, x)| {
        let (value, mass) = pair_form(y, x);
        (value, 0.0, mass)
    }));
    Ok(report("inequality-l-nonpositive", n, t, samples.len(), started))
}

/// R_n ≤ ε(‖y‖ − ‖x‖) over (y_n, x_n) samples.
pub fn check_r_bound(samples: &[(Vec<f64>, Vec<f64>)], eps: f64) -> Result<VerificationReport> {
    let started = Instant::now();
    for (y, x) in samples {
        eval_r(y, x)?;
    }
    r_bound(&[], &[], eps)?;
    let n = samples.first().map_or(0, |s| s.0.len());
    let t = tally(samples.par_iter().map(|(y, x)| {
        let (value, mass) = pair_form(y, x);
        (value, eps * (norm(y) - norm(x)), mass + eps * (norm(y) + norm(x)))
    }));
    Ok(report("inequality-r-bound", n, t, samples.len(), started).with_meta("eps", eps))
}

/// Every property at size n in both boxes: the S_n bound at ε ∈ {0, 1/2, 2(n−1)},
/// L_n ≤ 0, and the R_n bound at ε ∈ {0, 1/2, 1}.
pub fn run_all(n: usize, samples: usize, seed: u64) -> Result<Vec<VerificationReport>> {
    if n < 2 {
        return Err(InequalityError::TooSmall { n, min: 2 });
    }
    let mut out = Vec::new();
    for (bi, &bound) in SAMPLE_BOXES.iter().enumerate() {
        let stream = seed ^ ((n as u64) << 32) ^ ((bi as u64) << 48);
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let levels: Vec<Vec<Vec<f64>>> = (0..samples).map(|_| sample_levels(&mut rng, n, bound)).collect();
        for eps in [0.0, 0.5, 2.0 * (n as f64 - 1.0)] {
            out.push(check_s_bound(&levels, eps)?.with_meta("box", bound));
        }
        let lpairs: Vec<_> = (0..samples).map(|_| sample_pair(&mut rng, n, n + 1, bound)).collect();
        out.push(check_l_nonpositive(&lpairs)?.with_meta("box", bound));
        let rpairs: Vec<_> = (0..samples).map(|_| sample_pair(&mut rng, n, n, bound)).collect();
        for eps in [0.0, 0.5, 1.0] {
            out.push(check_r_bound(&rpairs, eps)?.with_meta("box", bound));
        }
    }
    Ok(out)
}
