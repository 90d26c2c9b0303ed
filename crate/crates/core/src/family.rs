//! Five-parameter `m = 2` family.
//!
//! For `α₁(t) = ½C₁ cos ωt + ½C₂ sin ωt` the coefficient `α₂` solves the
//! nonlinear third-order equation
//!
//! ```text
//! α₂''' + 4ω² α₂' − 2α₁(t) α₂^(-5/2) = 0
//! ```
//!
//! which has no closed form, so `α₂, α₂', α₂''` ride along in the
//! integration state `[z, p, α₂, α₂', α₂'']` and `g = α₂^(-5/2)` is read from
//! it at every stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_adaptive, AdaptiveConfig, Field, Trajectory};
use crate::invariant::{build_coeffs, drift_report, Alpha1Jet, DriftReport};
use crate::model::{AlphaJet, GSource, OscillatorSpec, TrigAlpha, EPS_POS};

/// Default `(α₂, α₂', α₂'')` at `t = 0`, matching `α₂ = 1.3 + 0.9 cos 2t`.
pub const DEFAULT_ALPHA2: [f64; 3] = [2.2, 0.0, -3.6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiveParamDoc", into = "FiveParamDoc")]
pub struct FiveParamSpec {
    omega: f64,
    c1: f64,
    c2: f64,
    alpha2: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct FiveParamDoc {
    omega: f64,
    #[serde(rename = "C1")]
    c1: f64,
    #[serde(rename = "C2")]
    c2: f64,
    #[serde(default = "default_alpha2")]
    alpha2: [f64; 3],
}

fn default_alpha2() -> [f64; 3] {
    DEFAULT_ALPHA2
}

impl TryFrom<FiveParamDoc> for FiveParamSpec {
    type Error = Error;
    fn try_from(d: FiveParamDoc) -> Result<Self> {
        FiveParamSpec::new(d.omega, d.c1, d.c2, d.alpha2)
    }
}

impl From<FiveParamSpec> for FiveParamDoc {
    fn from(s: FiveParamSpec) -> Self {
        FiveParamDoc { omega: s.omega, c1: s.c1, c2: s.c2, alpha2: s.alpha2 }
    }
}

impl FiveParamSpec {
    /// `alpha2` holds the initial values `(α₂, α₂', α₂'')` at `t = 0`.
    pub fn new(omega: f64, c1: f64, c2: f64, alpha2: [f64; 3]) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::invalid(format!("omega must be positive, got {omega}")));
        }
        if ![c1, c2].iter().chain(alpha2.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid("C1, C2 and alpha2 initial values must be finite"));
        }
        if !(alpha2[0] > EPS_POS) {
            return Err(Error::invalid(format!("initial alpha2 must be positive, got {}", alpha2[0])));
        }
        Ok(FiveParamSpec { omega, c1, c2, alpha2 })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    pub fn alpha2_initial(&self) -> [f64; 3] {
        self.alpha2
    }

    /// `(α₁, α₁')` at `t`.
    pub fn alpha1_eval(&self, t: f64) -> (f64, f64) {
        let j = self.alpha1_jet(t);
        (j.value, j.d1)
    }

    pub fn alpha1_jet(&self, t: f64) -> Alpha1Jet {
        let w = self.omega;
        let (sn, cs) = (w * t).sin_cos();
        let value = 0.5 * self.c1 * cs + 0.5 * self.c2 * sn;
        Alpha1Jet { value, d1: w * (0.5 * self.c2 * cs - 0.5 * self.c1 * sn), d2: -w * w * value }
    }

    /// `α₂` jet from carried values; the third derivative comes from the ODE.
    pub fn alpha2_jet(&self, t: f64, a: [f64; 3]) -> Result<AlphaJet> {
        if !(a[0] > EPS_POS) {
            return Err(Error::CoefficientSingular { t, alpha2: a[0] });
        }
        let g = a[0].powf(-2.5);
        let (alpha1, _) = self.alpha1_eval(t);
        Ok(AlphaJet {
            value: a[0],
            d1: a[1],
            d2: a[2],
            d3: -4.0 * self.omega * self.omega * a[1] + 2.0 * alpha1 * g,
        })
    }

    /// The trig family selected by the initial triple when `C₁ = C₂ = 0`.
    pub fn equivalent_trig(&self) -> Option<Result<TrigAlpha>> {
        if self.c1 != 0.0 || self.c2 != 0.0 {
            return None;
        }
        let k = 4.0 * self.omega * self.omega;
        let [a0, a1, a2] = self.alpha2;
        Some(TrigAlpha::new(a0 + a2 / k, -a2 / k, a1 / (2.0 * self.omega), self.omega))
    }

    pub fn oscillator(&self) -> OscillatorSpec {
        OscillatorSpec::new(self.omega, 2, GSource::FiveParam(*self)).expect("validated five-parameter spec")
    }

    pub fn field(&self) -> AugmentedField {
        AugmentedField { spec: *self }
    }
}

/// Vector field on `[z, p, α₂, α₂', α₂'']`.
#[derive(Debug, Clone, Copy)]
pub struct AugmentedField {
    spec: FiveParamSpec,
}

impl Field for AugmentedField {
    fn dim(&self) -> usize {
        5
    }

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let jet = self.spec.alpha2_jet(t, [y[2], y[3], y[4]])?;
        let g = y[2].powf(-2.5);
        let w2 = self.spec.omega * self.spec.omega;
        dy[0] = y[1];
        dy[1] = -w2 * y[0] - g * y[0] * y[0];
        dy[2] = y[3];
        dy[3] = y[4];
        dy[4] = jet.d3;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FamilyRun {
    pub trajectory: Trajectory,
    pub drift: DriftReport,
}

/// Integrates the augmented system from `(z0, p0)` and reports the drift of
/// the full invariant (including the `α₁` terms).
pub fn integrate_family(fp: &FiveParamSpec, z0: f64, p0: f64, cfg: AdaptiveConfig) -> Result<FamilyRun> {
    let [a0, a1, a2] = fp.alpha2;
    let trajectory = integrate_adaptive(fp.field(), 0.0, &[z0, p0, a0, a1, a2], cfg)?;
    let coeffs = build_coeffs(&fp.oscillator())?;
    let drift = drift_report(&trajectory, &coeffs)?;
    Ok(FamilyRun { trajectory, drift })
}
