//! The oscillator family `z'' + ω²z + g(t) z^m = 0`.
//!
//! The coefficient `α₂(t) = A + B cos 2ωt + C sin 2ωt` generates the
//! integrable forcing `g(t) = α₂(t)^(-(m+3)/2)`. Everything here is a pure
//! function of immutable values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::FiveParamSpec;
use crate::integrator::Field;
use crate::interp::UniformCubic;

/// Values of `α₂` at or below this floor are reported as singular.
pub const EPS_POS: f64 = 1e-9;

/// `z^m` by repeated multiplication, so odd powers keep the sign of `z`.
#[inline]
pub fn powi_exact(z: f64, m: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..m {
        acc *= z;
    }
    acc
}

/// `α₂(t) = A + B cos 2ωt + C sin 2ωt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigAlpha {
    a: f64,
    b: f64,
    c: f64,
    omega: f64,
}

/// `α₂` together with its first three time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl TrigAlpha {
    pub fn new(a: f64, b: f64, c: f64, omega: f64) -> Result<Self> {
        if ![a, b, c, omega].iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("A, B, C and omega must be finite"));
        }
        if !(omega > 0.0) {
            return Err(Error::invalid(format!("omega must be positive, got {omega}")));
        }
        let r = b.hypot(c);
        if !(a > r) {
            return Err(Error::invalid(format!(
                "alpha2 must stay positive: need A > sqrt(B^2 + C^2), got A = {a}, R = {r}"
            )));
        }
        Ok(TrigAlpha { a, b, c, omega })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Modulation amplitude `R = sqrt(B² + C²)`.
    pub fn r(&self) -> f64 {
        self.b.hypot(self.c)
    }

    /// Phase `φ` with `α₂ = A + R cos(2ωt − φ)`.
    pub fn phase(&self) -> f64 {
        self.c.atan2(self.b)
    }

    /// Same coefficients at a different frequency.
    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        TrigAlpha::new(self.a, self.b, self.c, omega)
    }

    /// Analytic `α₂, α₂', α₂'', α₂'''` at `t`.
    pub fn eval(&self, t: f64) -> AlphaJet {
        let w2 = 2.0 * self.omega;
        let k = w2 * w2;
        let (sn, cs) = (w2 * t).sin_cos();
        let even = self.b * cs + self.c * sn;
        let odd = self.c * cs - self.b * sn;
        let d1 = w2 * odd;
        AlphaJet {
            value: self.a + even,
            d1,
            d2: -k * even,
            // homogeneous solution of α''' + 4ω²α' = 0
            d3: -k * d1,
        }
    }
}

/// Uniformly sampled forcing coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledG {
    knots: Vec<(f64, f64)>,
    curve: UniformCubic,
}

impl SampledG {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let curve = UniformCubic::from_knots(&knots)?;
        Ok(SampledG { knots, curve })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.curve.eval(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GSource {
    TrigFamily(TrigAlpha),
    FiveParam(FiveParamSpec),
    Sampled(SampledG),
}

/// One concrete system `z'' + ω²z + g(t) z^m = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDoc", into = "SpecDoc")]
pub struct OscillatorSpec {
    omega: f64,
    m: u32,
    g: GSource,
}

impl OscillatorSpec {
    pub fn new(omega: f64, m: u32, g: GSource) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::invalid(format!("omega must be positive, got {omega}")));
        }
        if m < 2 {
            return Err(Error::invalid(format!("m must be at least 2, got {m}")));
        }
        match &g {
            GSource::TrigFamily(a) if a.omega() != omega => {
                return Err(Error::invalid("trig family must use the oscillator's omega"));
            }
            GSource::FiveParam(fp) => {
                if m != 2 {
                    return Err(Error::invalid("the five-parameter family exists only for m = 2"));
                }
                if fp.omega() != omega {
                    return Err(Error::invalid("five-parameter spec must use the oscillator's omega"));
                }
            }
            _ => {}
        }
        Ok(OscillatorSpec { omega, m, g })
    }

    /// Trig-family system with `α₂ = A + B cos 2ωt + C sin 2ωt`.
    pub fn trig(a: f64, b: f64, c: f64, omega: f64, m: u32) -> Result<Self> {
        OscillatorSpec::new(omega, m, GSource::TrigFamily(TrigAlpha::new(a, b, c, omega)?))
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn g_source(&self) -> &GSource {
        &self.g
    }

    pub fn trig_alpha(&self) -> Option<&TrigAlpha> {
        match &self.g {
            GSource::TrigFamily(a) => Some(a),
            _ => None,
        }
    }

    /// Exponent `-(m+3)/2` linking `g` to `α₂`.
    pub fn g_exponent(&self) -> f64 {
        -((self.m + 3) as f64) / 2.0
    }

    /// `g = α₂^(-(m+3)/2)` with the positivity floor enforced.
    pub fn g_from_alpha2(&self, alpha2: f64, t: f64) -> Result<f64> {
        if !(alpha2 > EPS_POS) {
            return Err(Error::CoefficientSingular { t, alpha2 });
        }
        Ok(alpha2.powf(self.g_exponent()))
    }

    /// Forcing coefficient `g(t)`.
    ///
    /// A five-parameter source carries `α₂` in the integration state, so it
    /// cannot be evaluated from `t` alone; use [`crate::family`] for it.
    pub fn g_eval(&self, t: f64) -> Result<f64> {
        match &self.g {
            GSource::TrigFamily(a) => self.g_from_alpha2(a.eval(t).value, t),
            GSource::Sampled(s) => s.eval(t),
            GSource::FiveParam(_) => Err(Error::UnsupportedSource(
                "five-parameter forcing needs the augmented state (alpha2 is integrated jointly)",
            )),
        }
    }

    /// `(dz/dt, dp/dt) = (p, −ω²z − g(t) z^m)`.
    pub fn vector_field(&self, s: &State) -> Result<(f64, f64)> {
        let g = self.g_eval(s.t)?;
        Ok((s.p, -self.omega * self.omega * s.z - g * powi_exact(s.z, self.m)))
    }
}

impl Field for OscillatorSpec {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (dz, dp) = self.vector_field(&State { t, z: y[0], p: y[1] })?;
        dy[0] = dz;
        dy[1] = dp;
        Ok(())
    }
}

/// Phase-space point `(t, z, p = z')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub z: f64,
    pub p: f64,
}

impl State {
    pub fn new(t: f64, z: f64, p: f64) -> Self {
        State { t, z, p }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.z.is_finite() && self.p.is_finite()
    }
}

// JSON document form: {"omega": 1.0, "m": 2, "g": {"kind": "trig", "A": .., "B": .., "C": ..}}

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    omega: f64,
    m: u32,
    g: GDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GDoc {
    Trig {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "B")]
        b: f64,
        #[serde(rename = "C", default)]
        c: f64,
    },
    FiveParam {
        #[serde(rename = "C1")]
        c1: f64,
        #[serde(rename = "C2")]
        c2: f64,
        alpha2: [f64; 3],
    },
    Sampled {
        knots: Vec<(f64, f64)>,
        #[serde(default = "cubic")]
        interp: String,
    },
}

fn cubic() -> String {
    "cubic".to_string()
}

impl TryFrom<SpecDoc> for OscillatorSpec {
    type Error = Error;

    fn try_from(doc: SpecDoc) -> Result<Self> {
        let g = match doc.g {
            GDoc::Trig { a, b, c } => GSource::TrigFamily(TrigAlpha::new(a, b, c, doc.omega)?),
            GDoc::FiveParam { c1, c2, alpha2 } => {
                GSource::FiveParam(FiveParamSpec::new(doc.omega, c1, c2, alpha2)?)
            }
            GDoc::Sampled { knots, interp } => {
                if interp != "cubic" {
                    return Err(Error::invalid(format!("unknown interpolation rule {interp:?}")));
                }
                GSource::Sampled(SampledG::new(knots)?)
            }
        };
        OscillatorSpec::new(doc.omega, doc.m, g)
    }
}

impl From<OscillatorSpec> for SpecDoc {
    fn from(s: OscillatorSpec) -> Self {
        let g = match s.g {
            GSource::TrigFamily(a) => GDoc::Trig { a: a.a, b: a.b, c: a.c },
            GSource::FiveParam(fp) => GDoc::FiveParam {
                c1: fp.c1(),
                c2: fp.c2(),
                alpha2: fp.alpha2_initial(),
            },
            GSource::Sampled(sg) => GDoc::Sampled { knots: sg.knots, interp: cubic() },
        };
        SpecDoc { omega: s.omega, m: s.m, g }
    }
}
