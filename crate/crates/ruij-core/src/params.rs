//! The parameter triple (ω₁, ω₂, g) and its derived constants.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when comparing derived fields.
pub const FIELD_REL_TOL: f64 = 1e-14;

/// Largest denominator scanned by the resonance detector.
pub const RESONANCE_MAX_DENOMINATOR: i64 = 8;

/// Distance to a rational ratio below which the periods count as resonant.
pub const RESONANCE_THRESHOLD: f64 = 1e-6;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ParamsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// A pair of quasi-periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Periods {
    pub omega1: C64,
    pub omega2: C64,
}

impl Periods {
    pub fn new(omega1: C64, omega2: C64) -> Result<Self, ParamsError> {
        if !(omega1.re > 0.0) {
            return Err(ParamsError::InvalidParams("Re ω1 > 0 violated".into()));
        }
        if !(omega2.re > 0.0) {
            return Err(ParamsError::InvalidParams("Re ω2 > 0 violated".into()));
        }
        Ok(Periods { omega1, omega2 })
    }

    pub fn real(omega1: f64, omega2: f64) -> Result<Self, ParamsError> {
        Self::new(C64::new(omega1, 0.0), C64::new(omega2, 0.0))
    }

    pub fn sum(&self) -> C64 {
        self.omega1 + self.omega2
    }

    pub fn product(&self) -> C64 {
        self.omega1 * self.omega2
    }

    /// Both periods multiplied by a positive real factor.
    pub fn scaled(&self, factor: f64) -> Periods {
        Periods {
            omega1: self.omega1 * factor,
            omega2: self.omega2 * factor,
        }
    }

    pub fn swapped(&self) -> Periods {
        Periods {
            omega1: self.omega2,
            omega2: self.omega1,
        }
    }

    pub fn is_real(&self) -> bool {
        self.omega1.im == 0.0 && self.omega2.im == 0.0
    }

    /// Closest rational p/q (q ≤ 8) to ω₁/ω₂ if it lies within the resonance threshold.
    pub fn resonance(&self) -> Option<(i64, i64)> {
        let ratio = self.omega1 / self.omega2;
        let mut best: Option<(f64, i64, i64)> = None;
        for q in 1..=RESONANCE_MAX_DENOMINATOR {
            let p = (ratio.re * q as f64).round() as i64;
            let dist = (ratio - C64::new(p as f64 / q as f64, 0.0)).norm();
            if dist < RESONANCE_THRESHOLD && best.map_or(true, |b| dist < b.0) {
                best = Some((dist, p, q));
            }
        }
        best.map(|(_, p, q)| (p, q))
    }
}

/// Validated parameters with all derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub omega1: C64,
    pub omega2: C64,
    pub g: C64,
    /// g* = ω₁ + ω₂ − g
    pub gstar: C64,
    /// ĝ = g/(ω₁ω₂)
    pub ghat: C64,
    /// ĝ* = g*/(ω₁ω₂)
    pub ghatstar: C64,
    pub nu_g: f64,
    pub nu_gstar: f64,
}

impl Params {
    /// Checks the standing assumptions and fills in the derived fields.
    pub fn validate(omega1: C64, omega2: C64, g: C64) -> Result<Self, ParamsError> {
        let finite = |z: C64| z.re.is_finite() && z.im.is_finite();
        if !(finite(omega1) && finite(omega2) && finite(g)) {
            return Err(ParamsError::InvalidParams("non-finite input".into()));
        }
        let periods = Periods::new(omega1, omega2)?;
        if !(g.re > 0.0) {
            return Err(ParamsError::InvalidParams("Re g > 0 violated".into()));
        }
        if !(g.re < omega1.re + omega2.re) {
            return Err(ParamsError::InvalidParams(
                "Re g < Re ω1 + Re ω2 violated".into(),
            ));
        }
        let prod = periods.product();
        let gstar = periods.sum() - g;
        let ghat = g / prod;
        let ghatstar = gstar / prod;
        if !(ghat.re > 0.0) {
            return Err(ParamsError::InvalidParams("ν_g = Re ĝ > 0 violated".into()));
        }
        if !(ghatstar.re > 0.0) {
            return Err(ParamsError::InvalidParams(
                "ν_g* = Re ĝ* > 0 violated".into(),
            ));
        }
        let hat_sum = omega2.inv() + omega1.inv();
        if !(ghatstar.re < hat_sum.re) {
            return Err(ParamsError::InvalidParams(
                "Re ĝ* < Re ω̂1 + Re ω̂2 violated".into(),
            ));
        }
        Ok(Params {
            omega1,
            omega2,
            g,
            gstar,
            ghat,
            ghatstar,
            nu_g: ghat.re,
            nu_gstar: ghatstar.re,
        })
    }

    pub fn real(omega1: f64, omega2: f64, g: f64) -> Result<Self, ParamsError> {
        Self::validate(C64::new(omega1, 0.0), C64::new(omega2, 0.0), C64::new(g, 0.0))
    }

    pub fn periods(&self) -> Periods {
        Periods {
            omega1: self.omega1,
            omega2: self.omega2,
        }
    }

    /// (1/ω₂, 1/ω₁)
    pub fn hat_periods(&self) -> Periods {
        Periods {
            omega1: self.omega2.inv(),
            omega2: self.omega1.inv(),
        }
    }

    /// Parameters (ĝ*, ω̂) of the dual system.
    pub fn dualize(&self) -> Result<Params, ParamsError> {
        let hp = self.hat_periods();
        Params::validate(hp.omega1, hp.omega2, self.ghatstar)
    }

    pub fn is_real(&self) -> bool {
        self.omega1.im == 0.0 && self.omega2.im == 0.0 && self.g.im == 0.0
    }

    /// Field-wise comparison with relative tolerance.
    pub fn approx_eq(&self, other: &Params, rel_tol: f64) -> bool {
        let close = |a: C64, b: C64| (a - b).norm() <= rel_tol * a.norm().max(b.norm()).max(1e-300);
        close(self.omega1, other.omega1)
            && close(self.omega2, other.omega2)
            && close(self.g, other.g)
            && close(self.gstar, other.gstar)
            && close(self.ghat, other.ghat)
            && close(self.ghatstar, other.ghatstar)
    }

    pub fn resonance(&self) -> Option<(i64, i64)> {
        self.periods().resonance()
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    omega1: [f64; 2],
    omega2: [f64; 2],
    g: [f64; 2],
}

impl Serialize for Params {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ParamsRepr {
            omega1: [self.omega1.re, self.omega1.im],
            omega2: [self.omega2.re, self.omega2.im],
            g: [self.g.re, self.g.im],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Params {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = ParamsRepr::deserialize(d)?;
        Params::validate(
            C64::new(r.omega1[0], r.omega1[1]),
            C64::new(r.omega2[0], r.omega2[1]),
            C64::new(r.g[0], r.g[1]),
        )
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_point() {
        let p = Params::real(1.0, 1.0, 0.5).unwrap();
        assert_eq!(p.gstar, C64::new(1.5, 0.0));
        assert_eq!(p.ghat, C64::new(0.5, 0.0));
        assert_eq!(p.nu_g, 0.5);
        assert_eq!(p.nu_gstar, 1.5);
    }

    #[test]
    fn coupling_too_large() {
        let err = Params::real(1.0, 1.0, 2.5).unwrap_err();
        assert_eq!(
            err,
            ParamsError::InvalidParams("Re g < Re ω1 + Re ω2 violated".into())
        );
    }

    #[test]
    fn boundaries_rejected() {
        assert!(Params::real(1.0, 1.0, 0.0).is_err());
        assert!(Params::real(1.0, 1.0, 2.0).is_err());
        assert!(Params::real(0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn complex_period_nu() {
        let p = Params::validate(C64::new(0.3, 0.1), C64::new(1.0, 0.0), C64::new(0.4, 0.0)).unwrap();
        // 0.4/(0.3+0.1i) = 0.4(0.3−0.1i)/0.1 = 1.2 − 0.4i
        assert!((p.nu_g - 1.2).abs() < 1e-14);
        assert!((p.ghat.im + 0.4).abs() < 1e-14);
    }

    #[test]
    fn dual_examples() {
        let p = Params::real(1.0, 1.0, 0.5).unwrap();
        let d = p.dualize().unwrap();
        assert_eq!(d.omega1, C64::new(1.0, 0.0));
        assert_eq!(d.omega2, C64::new(1.0, 0.0));
        assert_eq!(d.g, C64::new(1.5, 0.0));
        assert!(d.dualize().unwrap().approx_eq(&p, FIELD_REL_TOL));

        let q = Params::real(0.5, 2.0, 0.8).unwrap().dualize().unwrap();
        assert!((q.omega1.re - 0.5).abs() < 1e-15);
        assert!((q.omega2.re - 2.0).abs() < 1e-15);
        assert!((q.g.re - 1.7).abs() < 1e-14);
    }

    #[test]
    fn resonance_detection() {
        assert_eq!(Params::real(1.0, 1.0, 0.5).unwrap().resonance(), Some((1, 1)));
        // 3/10 needs a denominator above 8
        assert_eq!(Params::real(0.3, 1.0, 0.4).unwrap().resonance(), None);
        assert_eq!(Params::real(1.0, 2f64.sqrt(), 0.5).unwrap().resonance(), None);
        assert_eq!(Params::real(1.5, 1.0, 0.5).unwrap().resonance(), Some((3, 2)));
    }

    #[test]
    fn json_round_trip() {
        let p = Params::validate(C64::new(1.0, 0.2), C64::new(1.0, 0.0), C64::new(0.5, 0.1)).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"omega1":[1.0,0.2],"omega2":[1.0,0.0],"g":[0.5,0.1]}"#);
        let back: Params = serde_json::from_str(&s).unwrap();
        assert!(back.approx_eq(&p, FIELD_REL_TOL));
        assert!(serde_json::from_str::<Params>(r#"{"omega1":[1,0],"omega2":[1,0],"g":[3,0]}"#).is_err());
    }
}
