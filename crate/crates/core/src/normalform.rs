//! Reduction of `z'' + f(t) z + g(t) z^m = 0` with `T`-periodic `f` to the
//! constant-frequency form `y'' + ω²y + ω² g̃(s) y^m = 0`.
//!
//! The one-period transfer matrix `M` of `z'' + f z = 0` gives the phase
//! advance `μ` (`cos μ = tr M / 2`) and the Courant–Snyder values
//! `β₀ = M₁₂ / sin μ`, `α = (M₁₁ − M₂₂) / (2 sin μ)`, `γ₀ = (1 + α²)/β₀`.
//! The envelope `w = √β` then follows from `w'' + f w = 1/w³` with
//! `w(0) = √β₀`, `w'(0) = −α/√β₀`, and the phase from `Φ' = 1/w²`.
//!
//! Convention: `ω = Φ(T)/2π` and the new time is `s = Φ/ω`, so the reduced
//! time has period `2π` and the linear part has frequency `ω`. With
//! `y = z/w` this gives `g̃(s) = g(t) w(t)^(m+3)`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{integrate_adaptive, sample_strobe, AdaptiveConfig, Field, Stepper};
use crate::interp::{hermite, hermite_slope};
use crate::model::powi_exact;

pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Integration tolerance that resolves `tr M` well inside the `1e-12` stability margin.
pub const DEFAULT_TOL: f64 = 1e-13;

/// Linear part `z'' + f(t) z = 0` with `f(t + T) = f(t)`.
#[derive(Clone)]
pub struct HillSpec {
    f: Coefficient,
    period: f64,
}

impl fmt::Debug for HillSpec {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("HillSpec").field("period", &self.period).finish_non_exhaustive()
    }
}

impl HillSpec {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid(format!("period must be positive, got {period}")));
        }
        Ok(HillSpec { f: Arc::new(f), period })
    }

    pub fn constant(f0: f64, period: f64) -> Result<Self> {
        HillSpec::new(move |_| f0, period)
    }

    pub fn f(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// One-period transfer matrix of `(z, z')`, columns from the fundamental
/// solutions started at `(1, 0)` and `(0, 1)`.
pub fn transfer_matrix(h: &HillSpec, tol: f64) -> Result<[[f64; 2]; 2]> {
    let f = h.f.clone();
    let field = crate::integrator::fn_field(4, move |t, y: &[f64], dy: &mut [f64]| {
        let ft = f(t);
        dy[0] = y[1];
        dy[1] = -ft * y[0];
        dy[2] = y[3];
        dy[3] = -ft * y[2];
        Ok(())
    });
    let cfg = AdaptiveConfig::new(tol, tol * 1e-2, h.period);
    let traj = integrate_adaptive(field, 0.0, &[1.0, 0.0, 0.0, 1.0], cfg)?;
    let y = traj.last_row();
    Ok([[y[0], y[2]], [y[1], y[3]]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonodromyResult {
    pub m: [[f64; 2]; 2],
    pub trace: f64,
    pub stable: bool,
    /// Phase advance per period in `(0, 2π)`; the branch follows the sign of `M₁₂`.
    pub mu: f64,
    pub beta0: f64,
    pub alpha: f64,
    pub gamma0: f64,
}

impl MonodromyResult {
    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }
}

/// Floquet analysis of the Hill part; fails with `UnstableHill` unless
/// `|tr M| < 2 − 1e-12`.
pub fn monodromy(h: &HillSpec, tol: f64) -> Result<MonodromyResult> {
    let m = transfer_matrix(h, tol)?;
    let trace = m[0][0] + m[1][1];
    if !(trace.abs() < 2.0 - 1e-12) {
        return Err(Error::UnstableHill { trace });
    }
    let cos_mu = 0.5 * trace;
    let sin_mu = (1.0 - cos_mu * cos_mu).sqrt().copysign(m[0][1]);
    let mu = sin_mu.atan2(cos_mu).rem_euclid(TAU);
    let beta0 = m[0][1] / sin_mu;
    let alpha = (m[0][0] - m[1][1]) / (2.0 * sin_mu);
    let gamma0 = (1.0 + alpha * alpha) / beta0;
    Ok(MonodromyResult { m, trace, stable: true, mu, beta0, alpha, gamma0 })
}

/// Envelope `w = √β`, its slope and the phase `Φ` on a uniform grid over one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub period: f64,
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub wp: Vec<f64>,
    pub phi: Vec<f64>,
    /// `(w(T) − w(0), w'(T) − w'(0))`.
    pub periodicity_defect: (f64, f64),
}

impl Envelope {
    pub fn phase_total(&self) -> f64 {
        *self.phi.last().expect("non-empty grid")
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let k = (t / self.period).floor();
        let u = t - k * self.period;
        let n = self.t.len();
        let dt = self.period / (n - 1) as f64;
        let i = ((u / dt).floor().max(0.0) as usize).min(n - 2);
        (i, u, k)
    }

    /// `(w, w')` at any `t`, by periodic cubic Hermite interpolation.
    pub fn w_at(&self, t: f64) -> (f64, f64) {
        let (i, u, _) = self.locate(t);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let (w0, w1, d0, d1) = (self.w[i], self.w[i + 1], self.wp[i], self.wp[i + 1]);
        (hermite(u, t0, t1, w0, w1, d0, d1), hermite_slope(u, t0, t1, w0, w1, d0, d1))
    }

    /// `Φ(t)`, extended by `Φ(t + T) = Φ(t) + Φ(T)`.
    pub fn phi_at(&self, t: f64) -> f64 {
        let (i, u, k) = self.locate(t);
        let s0 = 1.0 / (self.w[i] * self.w[i]);
        let s1 = 1.0 / (self.w[i + 1] * self.w[i + 1]);
        k * self.phase_total() + hermite(u, self.t[i], self.t[i + 1], self.phi[i], self.phi[i + 1], s0, s1)
    }

    /// Inverse of [`Self::phi_at`], Hermite-interpolated with slopes `dt/dΦ = w²`.
    pub fn t_at_phi(&self, phi: f64) -> f64 {
        let total = self.phase_total();
        let k = (phi / total).floor();
        let u = phi - k * total;
        let i = match self.phi.partition_point(|&p| p <= u) {
            0 => 0,
            j => (j - 1).min(self.phi.len() - 2),
        };
        let s0 = self.w[i] * self.w[i];
        let s1 = self.w[i + 1] * self.w[i + 1];
        k * self.period + hermite(u, self.phi[i], self.phi[i + 1], self.t[i], self.t[i + 1], s0, s1)
    }
}

/// Propagates the Courant–Snyder envelope over one period from the
/// monodromy-derived initial values.
pub fn cs_envelope(h: &HillSpec, mono: &MonodromyResult, n_grid: usize, tol: f64) -> Result<Envelope> {
    if !mono.stable {
        return Err(Error::UnstableHill { trace: mono.trace });
    }
    if n_grid < 3 {
        return Err(Error::invalid("envelope grid needs at least 3 points"));
    }
    let f = h.f.clone();
    let field = crate::integrator::fn_field(3, move |t, y: &[f64], dy: &mut [f64]| {
        let w = y[0];
        if !(1e-6..=1e6).contains(&w) {
            return Err(Error::EnvelopeBlowup { t, w });
        }
        let w2 = w * w;
        dy[0] = y[1];
        dy[1] = -f(t) * w + 1.0 / (w2 * w);
        dy[2] = 1.0 / w2;
        Ok(())
    });
    let sb = mono.beta0.sqrt();
    let y0 = [sb, -mono.alpha / sb, 0.0];
    let dt = h.period / (n_grid - 1) as f64;
    let samples =
        sample_strobe(&field, 0.0, &y0, dt, n_grid - 1, Some(1e6), Stepper::adaptive(tol, tol * 1e-2))?;
    if samples.len() != n_grid || samples.status != crate::integrator::Status::Completed {
        let last = samples.last();
        return Err(Error::EnvelopeBlowup { t: last.t, w: last.z });
    }
    let mut env = Envelope {
        period: h.period,
        t: Vec::with_capacity(n_grid),
        w: Vec::with_capacity(n_grid),
        wp: Vec::with_capacity(n_grid),
        phi: Vec::with_capacity(n_grid),
        periodicity_defect: (0.0, 0.0),
    };
    for (t, row) in samples.rows() {
        if !(1e-6..=1e6).contains(&row[0]) {
            return Err(Error::EnvelopeBlowup { t, w: row[0] });
        }
        env.t.push(t);
        env.w.push(row[0]);
        env.wp.push(row[1]);
        env.phi.push(row[2]);
    }
    let n = n_grid - 1;
    env.periodicity_defect = (env.w[n] - env.w[0], env.wp[n] - env.wp[0]);
    Ok(env)
}

/// Reduced system and the maps between original and normal-form variables.
#[derive(Clone)]
pub struct NormalFormResult {
    pub omega_nf: f64,
    pub m: u32,
    pub monodromy: MonodromyResult,
    pub envelope: Envelope,
    /// Uniform grid of the reduced time `s` over `[0, 2π]`.
    pub s_grid: Vec<f64>,
    pub g_nf_grid: Vec<f64>,
    hill: HillSpec,
    g: Coefficient,
}

impl fmt::Debug for NormalFormResult {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("NormalFormResult")
            .field("omega_nf", &self.omega_nf)
            .field("m", &self.m)
            .field("monodromy", &self.monodromy)
            .finish_non_exhaustive()
    }
}

/// Options for [`reduce`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceConfig {
    pub n_grid: usize,
    pub tol: f64,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        ReduceConfig { n_grid: 2001, tol: DEFAULT_TOL }
    }
}

pub fn reduce(
    h: &HillSpec,
    g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    m: u32,
    cfg: ReduceConfig,
) -> Result<NormalFormResult> {
    if m < 2 {
        return Err(Error::invalid(format!("m must be at least 2, got {m}")));
    }
    let mono = monodromy(h, cfg.tol)?;
    let envelope = cs_envelope(h, &mono, cfg.n_grid, cfg.tol)?;
    let omega_nf = envelope.phase_total() / TAU;
    let mut nf = NormalFormResult {
        omega_nf,
        m,
        monodromy: mono,
        envelope,
        s_grid: Vec::new(),
        g_nf_grid: Vec::new(),
        hill: h.clone(),
        g: Arc::new(g),
    };
    let n = cfg.n_grid;
    nf.s_grid = (0..n).map(|i| TAU * i as f64 / (n - 1) as f64).collect();
    nf.g_nf_grid = nf.s_grid.iter().map(|&s| nf.g_nf(s)).collect();
    Ok(nf)
}

impl NormalFormResult {
    pub fn hill(&self) -> &HillSpec {
        &self.hill
    }

    pub fn g(&self, t: f64) -> f64 {
        (self.g)(t)
    }

    /// Original time for a reduced time `s`.
    pub fn t_of_s(&self, s: f64) -> f64 {
        self.envelope.t_at_phi(s * self.omega_nf)
    }

    pub fn s_of_t(&self, t: f64) -> f64 {
        self.envelope.phi_at(t) / self.omega_nf
    }

    /// `g̃(s) = g(t(s))·w(t(s))^(m+3)`.
    pub fn g_nf(&self, s: f64) -> f64 {
        let t = self.t_of_s(s);
        let (w, _) = self.envelope.w_at(t);
        self.g(t) * powi_exact(w, self.m + 3)
    }

    /// `(z, z', t) → (y, dy/ds, s)`.
    pub fn to_normal(&self, z: f64, zp: f64, t: f64) -> (f64, f64, f64) {
        let (w, wp) = self.envelope.w_at(t);
        (z / w, self.omega_nf * (zp * w - z * wp), self.s_of_t(t))
    }

    /// `(y, dy/ds, s) → (z, z', t)`.
    pub fn from_normal(&self, y: f64, yp: f64, s: f64) -> (f64, f64, f64) {
        let t = self.t_of_s(s);
        let (w, wp) = self.envelope.w_at(t);
        (w * y, yp / (self.omega_nf * w) + y * wp, t)
    }

    /// `z'' = −f(t) z − g(t) z^m` on `[z, z']`.
    pub fn original_field(&self) -> impl Field + '_ {
        crate::integrator::fn_field(2, move |t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -self.hill.f(t) * y[0] - self.g(t) * powi_exact(y[0], self.m);
            Ok(())
        })
    }

    /// `y'' = −ω² y − ω² g̃(s) y^m` on `[y, dy/ds]` in reduced time.
    pub fn reduced_field(&self) -> impl Field + '_ {
        let w2 = self.omega_nf * self.omega_nf;
        crate::integrator::fn_field(2, move |s, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -w2 * y[0] - w2 * self.g_nf(s) * powi_exact(y[0], self.m);
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate_adaptive, AdaptiveConfig};
    use std::f64::consts::PI;

    #[test]
    fn constant_coefficient_rotation() {
        let h = HillSpec::constant(1.0 / 16.0, TAU).unwrap();
        let mono = monodromy(&h, DEFAULT_TOL).unwrap();
        let want = [[0.0, 4.0], [-0.25, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((mono.m[i][j] - want[i][j]).abs() < 1e-9, "{:?}", mono.m);
            }
        }
        assert!((mono.mu - PI / 2.0).abs() < 1e-9);
        assert!((mono.beta0 - 4.0).abs() < 1e-8);
        assert!(mono.alpha.abs() < 1e-8);
        assert!((mono.det() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_turn_is_rejected() {
        let h = HillSpec::constant(1.0, TAU).unwrap();
        assert!(matches!(monodromy(&h, DEFAULT_TOL), Err(Error::UnstableHill { .. })));
    }

    #[test]
    fn mu_branch_above_pi() {
        // ω₀T = 1.5π: M₁₂ < 0 puts μ on the lower branch
        let h = HillSpec::constant(0.75 * 0.75, TAU).unwrap();
        let mono = monodromy(&h, DEFAULT_TOL).unwrap();
        assert!((mono.mu - 1.5 * PI).abs() < 1e-9);
        assert!(mono.beta0 > 0.0);
        assert!((mono.beta0 - 1.0 / 0.75).abs() < 1e-8);
    }

    #[test]
    fn constant_envelope() {
        let w0: f64 = 0.4;
        let h = HillSpec::constant(w0 * w0, TAU).unwrap();
        let mono = monodromy(&h, DEFAULT_TOL).unwrap();
        let env = cs_envelope(&h, &mono, 101, DEFAULT_TOL).unwrap();
        for (i, &t) in env.t.iter().enumerate() {
            assert!((env.w[i] - w0.powf(-0.5)).abs() < 1e-9);
            assert!((env.phi[i] - w0 * t).abs() < 1e-9);
        }
        assert!(env.periodicity_defect.0.abs() < 1e-9);
    }

    #[test]
    fn phase_map_round_trip() {
        let h = HillSpec::new(|t: f64| 0.16 * (1.0 + 0.3 * t.cos()), TAU).unwrap();
        let mono = monodromy(&h, DEFAULT_TOL).unwrap();
        let env = cs_envelope(&h, &mono, 801, DEFAULT_TOL).unwrap();
        for t in [-3.0, 0.0, 0.77, 5.0, 9.4, 20.0] {
            let back = env.t_at_phi(env.phi_at(t));
            assert!((back - t).abs() < 1e-9, "t={t} back={back}");
        }
        assert!((env.phase_total().rem_euclid(TAU) - mono.mu).abs() < 1e-7);
    }

    #[test]
    fn state_map_round_trip() {
        let h = HillSpec::new(|t: f64| 0.16 * (1.0 + 0.2 * t.sin()), TAU).unwrap();
        let nf = reduce(&h, |_| 0.0, 2, ReduceConfig::default()).unwrap();
        for (z, zp, t) in [(0.3, -0.1, 0.0), (1.0, 0.5, 2.2), (-0.4, 0.0, 7.0)] {
            let (y, yp, s) = nf.to_normal(z, zp, t);
            let (z2, zp2, t2) = nf.from_normal(y, yp, s);
            assert!((z - z2).abs() < 1e-10 && (zp - zp2).abs() < 1e-10 && (t - t2).abs() < 1e-9);
        }
    }

    #[test]
    fn resonant_mathieu_is_unstable() {
        // ω₀ = 1/2 sits in the first parametric resonance tongue
        let h = HillSpec::new(|t: f64| 0.25 * (1.0 + 0.1 * t.cos()), TAU).unwrap();
        let m = transfer_matrix(&h, DEFAULT_TOL).unwrap();
        assert!((m[0][0] * m[1][1] - m[0][1] * m[1][0] - 1.0).abs() < 1e-9);
        assert!(matches!(monodromy(&h, DEFAULT_TOL), Err(Error::UnstableHill { .. })));
        // growth over 50 periods confirms the verdict
        let f = h.clone();
        let field = crate::integrator::fn_field(2, move |t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -f.f(t) * y[0];
            Ok(())
        });
        let traj = integrate_adaptive(field, 0.0, &[0.37, -0.21], AdaptiveConfig::new(1e-10, 1e-12, 50.0 * TAU)).unwrap();
        assert!(traj.max_abs(0) > 5.0 * 0.43);
    }

    #[test]
    fn stable_mathieu_envelope() {
        let h = HillSpec::new(|t: f64| 0.16 * (1.0 + 0.1 * t.cos()), TAU).unwrap();
        let mono = monodromy(&h, DEFAULT_TOL).unwrap();
        assert!((mono.det() - 1.0).abs() < 1e-9);
        assert!(mono.beta0 > 0.0);
        assert!((mono.beta0 * mono.gamma0 - mono.alpha * mono.alpha - 1.0).abs() < 1e-9);
        let env = cs_envelope(&h, &mono, 1001, DEFAULT_TOL).unwrap();
        assert!(env.periodicity_defect.0.abs() < 1e-7 && env.periodicity_defect.1.abs() < 1e-7);
        assert!(env.phi.windows(2).all(|p| p[1] > p[0]));
        assert!((env.phase_total().rem_euclid(TAU) - mono.mu).abs() < 1e-7);
        // a random start stays bounded over 50 periods
        let f = h.clone();
        let field = crate::integrator::fn_field(2, move |t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -f.f(t) * y[0];
            Ok(())
        });
        let traj = integrate_adaptive(field, 0.0, &[0.37, -0.21], AdaptiveConfig::new(1e-10, 1e-12, 50.0 * TAU)).unwrap();
        assert!(traj.max_abs(0) < 2.0);
    }

    #[test]
    fn nonlinear_coefficient_carries_w_to_the_m_plus_3() {
        let h = HillSpec::new(|t: f64| 0.2 * (1.0 + 0.25 * (t + 0.3).cos()), TAU).unwrap();
        let g = |t: f64| 1.0 + 0.5 * t.sin();
        let a = reduce(&h, g, 2, ReduceConfig { n_grid: 401, ..Default::default() }).unwrap();
        let b = reduce(&h, g, 5, ReduceConfig { n_grid: 401, ..Default::default() }).unwrap();
        for &s in a.s_grid.iter().step_by(7) {
            let (w, _) = a.envelope.w_at(a.t_of_s(s));
            let ratio = b.g_nf(s) / a.g_nf(s);
            assert!((ratio - w.powi(3)).abs() < 1e-9 * ratio.abs(), "s={s}");
        }
    }

    #[test]
    fn harmonic_reduction_is_a_rotation() {
        let w0: f64 = 0.3;
        let h = HillSpec::constant(w0 * w0, TAU).unwrap();
        let nf = reduce(&h, |_| 0.0, 2, ReduceConfig { n_grid: 101, ..Default::default() }).unwrap();
        assert!((nf.omega_nf - w0).abs() < 1e-9);
        assert!((nf.s_of_t(3.0) - 3.0).abs() < 1e-9);
        let (y, yp, _) = nf.to_normal(0.5, 0.0, 0.0);
        assert!((y - 0.5 * w0.sqrt()).abs() < 1e-12 && yp.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(HillSpec::constant(1.0, 0.0).is_err());
        let h = HillSpec::constant(0.1, TAU).unwrap();
        assert!(reduce(&h, |_| 1.0, 1, ReduceConfig::default()).is_err());
    }
}
