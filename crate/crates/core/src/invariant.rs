//! Quadratic-in-`p` first integrals `I = a₀(z,t) + a₁(z,t) p + a₂(t) p²`.
//!
//! With `f ≡ ω²` the coefficients are
//!
//! ```text
//! a₂ = α₂
//! a₁ = −α₂' z + α₁
//! a₀ = ω² α₂ z² + 2/(m+1) α₂ g z^(m+1) − α₁' z + ½ α₂'' z² + α₀
//! ```
//!
//! where `g = α₂^(-(m+3)/2)`, `α₁` is non-zero only for the five-parameter
//! `m = 2` family and `α₀ ≡ 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::FiveParamSpec;
use crate::integrator::Trajectory;
use crate::model::{powi_exact, AlphaJet, GSource, OscillatorSpec, State, TrigAlpha};

/// `α₁` with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Alpha1Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Coefficient bundle of the invariant for one oscillator.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCoeffs {
    spec: OscillatorSpec,
    alpha1: Option<FiveParamSpec>,
    alpha0: f64,
    /// Forcing drawn from a different `α₂` than the coefficients (diagnostics only).
    forcing: Option<TrigAlpha>,
}

/// Values of `a₀, a₁, a₂` at one `(z, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffValues {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

/// Builds the invariant for a trig-family or five-parameter oscillator.
pub fn build_coeffs(spec: &OscillatorSpec) -> Result<InvariantCoeffs> {
    let alpha1 = match spec.g_source() {
        GSource::TrigFamily(_) => None,
        GSource::FiveParam(fp) => Some(*fp),
        GSource::Sampled(_) => {
            return Err(Error::UnsupportedSource("a sampled forcing coefficient has no closed-form invariant"))
        }
    };
    Ok(InvariantCoeffs { spec: spec.clone(), alpha1, alpha0: 0.0, forcing: None })
}

impl InvariantCoeffs {
    pub fn spec(&self) -> &OscillatorSpec {
        &self.spec
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    /// Replaces the forcing `g` by the one generated from `alpha`, leaving the
    /// invariant coefficients untouched. Used to check that the residuals
    /// detect an inconsistent pair.
    pub fn with_forcing(mut self, alpha: TrigAlpha) -> Self {
        self.forcing = Some(alpha);
        self
    }

    /// Analytic `α₂` jet at `t` (trig family only).
    pub fn alpha2_jet(&self, t: f64) -> Result<AlphaJet> {
        match self.spec.g_source() {
            GSource::TrigFamily(a) => Ok(a.eval(t)),
            _ => Err(Error::UnsupportedSource("alpha2 of this source lives in the augmented state")),
        }
    }

    /// `α₂` jet for an augmented state row `[z, p, α₂, α₂', α₂'']` or, for
    /// the trig family, from `t` alone.
    pub fn jet_for_row(&self, t: f64, row: &[f64]) -> Result<AlphaJet> {
        match (&self.alpha1, self.spec.g_source()) {
            (Some(fp), _) => {
                if row.len() < 5 {
                    return Err(Error::invalid("five-parameter invariant needs the augmented state"));
                }
                fp.alpha2_jet(t, [row[2], row[3], row[4]])
            }
            (None, _) => self.alpha2_jet(t),
        }
    }

    pub fn alpha1_jet(&self, t: f64) -> Alpha1Jet {
        match &self.alpha1 {
            Some(fp) => fp.alpha1_jet(t),
            None => Alpha1Jet::default(),
        }
    }

    /// `g` and `dg/dt` consistent with `jet` (or with the forcing override).
    pub fn forcing(&self, jet: &AlphaJet, t: f64) -> Result<(f64, f64)> {
        let e = self.spec.g_exponent();
        let (value, d1) = match &self.forcing {
            Some(alt) => {
                let j = alt.eval(t);
                (j.value, j.d1)
            }
            None => (jet.value, jet.d1),
        };
        let g = self.spec.g_from_alpha2(value, t)?;
        Ok((g, e * g * d1 / value))
    }

    pub fn values(&self, jet: &AlphaJet, a1: &Alpha1Jet, g: f64, z: f64) -> CoeffValues {
        let w2 = self.spec.omega() * self.spec.omega();
        let m = self.spec.m();
        let zm1 = powi_exact(z, m + 1);
        CoeffValues {
            a0: w2 * jet.value * z * z + 2.0 / (m + 1) as f64 * jet.value * g * zm1 - a1.d1 * z
                + 0.5 * jet.d2 * z * z
                + self.alpha0,
            a1: -jet.d1 * z + a1.value,
            a2: jet.value,
        }
    }

    /// `I(z, p, t)` for a given `α₂` jet.
    pub fn eval_with_jet(&self, jet: &AlphaJet, t: f64, z: f64, p: f64) -> Result<f64> {
        let (g, _) = self.forcing(jet, t)?;
        let c = self.values(jet, &self.alpha1_jet(t), g, z);
        Ok(c.a0 + c.a1 * p + c.a2 * p * p)
    }

    /// `I` at an augmented trajectory row.
    pub fn eval_row(&self, t: f64, row: &[f64]) -> Result<f64> {
        let jet = self.jet_for_row(t, row)?;
        self.eval_with_jet(&jet, t, row[0], row[1])
    }

    /// `I(z, p, t)`; trig family only (a five-parameter source needs [`Self::eval_row`]).
    pub fn eval_invariant(&self, s: &State) -> Result<f64> {
        let jet = self.alpha2_jet(s.t)?;
        self.eval_with_jet(&jet, s.t, s.z, s.p)
    }

    /// Left-hand sides of the four coefficient equations at `(z, t)`:
    ///
    /// ```text
    /// r0 = −a₁ (ω² z + g z^m) + ∂a₀/∂t
    /// r1 = −2 a₂ (ω² z + g z^m) + ∂a₀/∂z + ∂a₁/∂t
    /// r2 = ∂a₁/∂z + ∂a₂/∂t
    /// r3 = ∂a₂/∂z
    /// ```
    pub fn pde_residual_with_jet(&self, jet: &AlphaJet, z: f64, t: f64) -> Result<[f64; 4]> {
        let w2 = self.spec.omega() * self.spec.omega();
        let m = self.spec.m();
        let k = 2.0 / (m + 1) as f64;
        let (g, dg) = self.forcing(jet, t)?;
        let a1j = self.alpha1_jet(t);
        let c = self.values(jet, &a1j, g, z);
        let zm = powi_exact(z, m);
        let force = w2 * z + g * zm;

        let da0_dt = w2 * jet.d1 * z * z + k * (jet.d1 * g + jet.value * dg) * zm * z - a1j.d2 * z
            + 0.5 * jet.d3 * z * z;
        let da0_dz = 2.0 * w2 * jet.value * z + 2.0 * jet.value * g * zm - a1j.d1 + jet.d2 * z;
        let da1_dt = -jet.d2 * z + a1j.d1;
        let da1_dz = -jet.d1;
        let da2_dt = jet.d1;
        let da2_dz = 0.0;

        Ok([
            -c.a1 * force + da0_dt,
            -2.0 * c.a2 * force + da0_dz + da1_dt,
            da1_dz + da2_dt,
            da2_dz,
        ])
    }

    pub fn pde_residual(&self, z: f64, t: f64) -> Result<[f64; 4]> {
        let jet = self.alpha2_jet(t)?;
        self.pde_residual_with_jet(&jet, z, t)
    }

    /// `dI/dt = ∂I/∂t + p ∂I/∂z + p' ∂I/∂p` along the vector field.
    pub fn total_derivative_with_jet(&self, jet: &AlphaJet, s: &State) -> Result<f64> {
        let w2 = self.spec.omega() * self.spec.omega();
        let m = self.spec.m();
        let k = 2.0 / (m + 1) as f64;
        let (z, p) = (s.z, s.p);
        let (g, dg) = self.forcing(jet, s.t)?;
        let a1j = self.alpha1_jet(s.t);
        let c = self.values(jet, &a1j, g, z);
        let zm = powi_exact(z, m);
        let dp = -(w2 * z + g * zm);

        let di_dt = w2 * jet.d1 * z * z + k * (jet.d1 * g + jet.value * dg) * zm * z - a1j.d2 * z
            + 0.5 * jet.d3 * z * z
            + (-jet.d2 * z + a1j.d1) * p
            + jet.d1 * p * p;
        let di_dz = 2.0 * w2 * jet.value * z + 2.0 * jet.value * g * zm - a1j.d1 + jet.d2 * z - jet.d1 * p;
        let di_dp = c.a1 + 2.0 * c.a2 * p;
        Ok(di_dt + p * di_dz + dp * di_dp)
    }
}

/// Relative drift `I(t)/I₀ − 1` along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Drift {
    pub i0: f64,
    pub max_rel: f64,
    pub max_abs: f64,
    pub series: Vec<(f64, f64)>,
}

/// Absolute drift `I(t) − I₀`, for trajectories whose reference level is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsoluteDrift {
    pub i0: f64,
    pub max_abs: f64,
    pub series: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftReport {
    Relative(Drift),
    Absolute(AbsoluteDrift),
}

impl DriftReport {
    pub fn max_abs(&self) -> f64 {
        match self {
            DriftReport::Relative(d) => d.max_abs,
            DriftReport::Absolute(d) => d.max_abs,
        }
    }

    pub fn max_rel(&self) -> Option<f64> {
        match self {
            DriftReport::Relative(d) => Some(d.max_rel),
            DriftReport::Absolute(_) => None,
        }
    }
}

fn invariant_series(traj: &Trajectory, c: &InvariantCoeffs) -> Result<Vec<(f64, f64)>> {
    traj.rows().map(|(t, row)| Ok((t, c.eval_row(t, row)?))).collect()
}

pub fn drift(traj: &Trajectory, c: &InvariantCoeffs) -> Result<Drift> {
    let values = invariant_series(traj, c)?;
    let i0 = values[0].1;
    if i0.abs() < 1e-300 {
        return Err(Error::ZeroReference);
    }
    let series: Vec<(f64, f64)> = values.iter().map(|&(t, i)| (t, i / i0 - 1.0)).collect();
    let max_rel = series.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    let max_abs = values.iter().map(|s| (s.1 - i0).abs()).fold(0.0, f64::max);
    Ok(Drift { i0, max_rel, max_abs, series })
}

pub fn absolute_drift(traj: &Trajectory, c: &InvariantCoeffs) -> Result<AbsoluteDrift> {
    let values = invariant_series(traj, c)?;
    let i0 = values[0].1;
    let series: Vec<(f64, f64)> = values.iter().map(|&(t, i)| (t, i - i0)).collect();
    let max_abs = series.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    Ok(AbsoluteDrift { i0, max_abs, series })
}

/// Relative drift, or absolute drift when `I₀` is zero.
pub fn drift_report(traj: &Trajectory, c: &InvariantCoeffs) -> Result<DriftReport> {
    match drift(traj, c) {
        Ok(d) => Ok(DriftReport::Relative(d)),
        Err(Error::ZeroReference) => Ok(DriftReport::Absolute(absolute_drift(traj, c)?)),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate_adaptive, integrate_fixed, AdaptiveConfig, FixedStepConfig};
    use std::f64::consts::PI;

    fn fig1() -> InvariantCoeffs {
        build_coeffs(&OscillatorSpec::trig(1.3, 0.9, 0.0, 1.0, 2).unwrap()).unwrap()
    }

    #[test]
    fn reference_value_at_t0() {
        // 30-digit reference: 0.00420430298862522487...
        let i0 = fig1().eval_invariant(&State::new(0.0, 0.1, 0.0)).unwrap();
        assert!((i0 - 0.004_204_302_988_625_225).abs() < 1e-17);
        assert_eq!(fig1().eval_invariant(&State::new(1.7, 0.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn autonomous_case() {
        let c = build_coeffs(&OscillatorSpec::trig(1.0, 0.0, 0.0, 1.0, 2).unwrap()).unwrap();
        for t in [0.0, 1.0, 33.0] {
            let v = c.eval_invariant(&State::new(t, 0.1, 0.0)).unwrap();
            assert!((v - (0.01 + 2.0 / 3.0 * 0.001)).abs() < 1e-16);
            let v = c.eval_invariant(&State::new(t, 0.3, -0.2)).unwrap();
            let want = 0.04 + 0.09 + 2.0 / 3.0 * 0.027;
            assert!((v - want).abs() < 1e-15);
        }
    }

    #[test]
    fn strobe_form() {
        // at t_k = kπ/ω: (A+B)p² + ω²(A−B)z² + ⅔(A+B)^(-3/2) z³
        let (a, b, w) = (1.3, 0.9, 1.4);
        let c = build_coeffs(&OscillatorSpec::trig(a, b, 0.0, w, 2).unwrap()).unwrap();
        for k in 0..5 {
            let t = k as f64 * PI / w;
            for (z, p) in [(0.3, 0.1), (-0.7, 0.4), (1.1, -0.9)] {
                let lhs = (a + b) * p * p + w * w * (a - b) * z * z + 2.0 / 3.0 * (a + b).powf(-1.5) * z * z * z;
                let v = c.eval_invariant(&State::new(t, z, p)).unwrap();
                assert!((v - lhs).abs() <= 1e-12 * lhs.abs(), "k={k}");
            }
            // a₀'s z² coefficient at the strobe is ω²(A−B)
            let jet = c.alpha2_jet(t).unwrap();
            let z2 = w * w * jet.value + 0.5 * jet.d2;
            assert!((z2 - w * w * (a - b)).abs() < 1e-12);
        }
    }

    #[test]
    fn higher_power_coefficient() {
        let spec = OscillatorSpec::trig(1.3, 0.9, 0.0, 1.0, 4).unwrap();
        let c = build_coeffs(&spec).unwrap();
        let jet = c.alpha2_jet(0.4).unwrap();
        let g = spec.g_eval(0.4).unwrap();
        let v0 = c.values(&jet, &Alpha1Jet::default(), g, 0.0).a0;
        let v = c.values(&jet, &Alpha1Jet::default(), g, 2.0).a0;
        let quad = (jet.value + 0.5 * jet.d2) * 4.0;
        assert_eq!(v0, 0.0);
        assert!((v - quad - 0.4 * jet.value * g * 32.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_source_has_no_invariant() {
        let g = crate::model::SampledG::new(vec![(0.0, 1.0), (1.0, 1.0)]).unwrap();
        let spec = OscillatorSpec::new(1.0, 2, GSource::Sampled(g)).unwrap();
        assert!(matches!(build_coeffs(&spec), Err(Error::UnsupportedSource(_))));
    }

    #[test]
    fn residuals_vanish() {
        for m in [2, 3, 5] {
            let c = build_coeffs(&OscillatorSpec::trig(1.3, 0.9, -0.3, 0.9, m).unwrap()).unwrap();
            for i in 0..50 {
                let z = -2.0 + 0.08 * i as f64;
                let t = 0.13 * i as f64;
                let r = c.pde_residual(z, t).unwrap();
                assert!(r.iter().all(|x| x.abs() <= 1e-11), "m={m} r={r:?}");
            }
        }
    }

    #[test]
    fn perturbed_forcing_is_detected() {
        let spec = OscillatorSpec::trig(1.3, 0.9, 0.0, 1.0, 2).unwrap();
        let c = build_coeffs(&spec).unwrap().with_forcing(TrigAlpha::new(1.31, 0.9, 0.0, 1.0).unwrap());
        let r = c.pde_residual(0.8, 0.6).unwrap();
        assert!(r[0].abs() > 1e-4, "{r:?}");
    }

    #[test]
    fn total_derivative_is_residual_combination() {
        let c = build_coeffs(&OscillatorSpec::trig(1.5, 0.4, 0.6, 1.2, 3).unwrap()).unwrap();
        for (t, z, p) in [(0.1, 0.5, -0.2), (2.0, -1.3, 0.8), (7.7, 1.9, 1.1)] {
            let jet = c.alpha2_jet(t).unwrap();
            let r = c.pde_residual_with_jet(&jet, z, t).unwrap();
            let weighted = r[0] + p * r[1] + p * p * r[2] + p * p * p * r[3];
            let d = c.total_derivative_with_jet(&jet, &State::new(t, z, p)).unwrap();
            assert!(d.abs() < 1e-12 && (d - weighted).abs() < 1e-12, "{d} {weighted}");
        }
    }

    #[test]
    fn drift_of_single_state_is_zero() {
        let spec = OscillatorSpec::trig(1.3, 0.9, 0.0, 1.0, 2).unwrap();
        let traj = crate::integrator::sample_strobe(
            &spec, 0.0, &[0.1, 0.0], 1.0, 0, None, crate::integrator::Stepper::Fixed { h: 0.1 },
        )
        .unwrap();
        let d = drift(&traj, &fig1()).unwrap();
        assert_eq!(d.max_rel, 0.0);
        assert_eq!(d.series, vec![(0.0, 0.0)]);
    }

    #[test]
    fn zero_reference() {
        let spec = OscillatorSpec::trig(1.3, 0.9, 0.0, 1.0, 2).unwrap();
        let traj = integrate_fixed(&spec, 0.0, &[0.0, 0.0], FixedStepConfig::new(0.1, 1.0)).unwrap();
        assert!(matches!(drift(&traj, &fig1()), Err(Error::ZeroReference)));
        let rep = drift_report(&traj, &fig1()).unwrap();
        assert!(matches!(rep, DriftReport::Absolute(ref d) if d.max_abs == 0.0));
    }

    #[test]
    fn autonomous_conservation_with_adaptive() {
        let spec = OscillatorSpec::trig(1.0, 0.0, 0.0, 1.0, 2).unwrap();
        let c = build_coeffs(&spec).unwrap();
        let traj = integrate_adaptive(&spec, 0.0, &[0.1, 0.0], AdaptiveConfig::new(1e-12, 1e-15, 100.0)).unwrap();
        let d = drift(&traj, &c).unwrap();
        assert!(d.max_rel <= 1e-9, "{:e}", d.max_rel);
    }
}
