//! Outcome of a single named numerical check.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check_name: String,
    pub n: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub runtime_ms: f64,
    pub metadata: BTreeMap<String, String>,
}

impl VerificationReport {
    /// Report whose pass flag is residual ≤ tolerance (NaN fails).
    pub fn new(check_name: &str, n: usize, residual: f64, tolerance: f64, started: Instant) -> Self {
        VerificationReport {
            check_name: check_name.to_string(),
            n,
            residual,
            tolerance,
            pass: residual <= tolerance,
            runtime_ms: started.elapsed().as_secs_f64() * 1e3,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    /// Overrides the pass flag for checks judged by convergence rather than a residual.
    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_follows_residual() {
        let t = Instant::now();
        assert!(VerificationReport::new("a", 1, 1e-9, 1e-8, t).pass);
        assert!(!VerificationReport::new("a", 1, 1e-7, 1e-8, t).pass);
        assert!(!VerificationReport::new("a", 1, f64::NAN, 1e-8, t).pass);
    }
}
