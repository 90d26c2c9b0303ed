//! Explicit Runge–Kutta integration of first-order systems `y' = F(t, y)`.
//!
//! Two steppers share one code path for any state dimension `n ≥ 1`:
//!
//! * classical fourth-order Runge–Kutta with a fixed step, and
//! * the Dormand–Prince 5(4) embedded pair with per-component error control.
//!
//! Dormand–Prince tableau (FSAL, 7 stages, 6 new evaluations per step):
//!
//! ```text
//!  0    |
//!  1/5  | 1/5
//!  3/10 | 3/40        9/40
//!  4/5  | 44/45      -56/15      32/9
//!  8/9  | 19372/6561 -25360/2187 64448/6561 -212/729
//!  1    | 9017/3168  -355/33     46732/5247  49/176  -5103/18656
//!  1    | 35/384      0          500/1113    125/192 -2187/6784    11/84
//! ------+--------------------------------------------------------------------
//!  b5   | 35/384      0          500/1113    125/192 -2187/6784    11/84    0
//!  b5-b4| 71/57600    0         -71/16695    71/1920 -17253/339200 22/525 -1/40
//! ```
//!
//! A step is accepted when `max_i |err_i| / (atol + rtol·max(|y_i|, |ŷ_i|)) ≤ 1`;
//! the next step is scaled by `0.9·(1/err)^(1/5)` clamped to `[0.2, 5]`.
//!
//! Escape (`|z|` or `|p|` above a caller-supplied bound, i.e. the first two
//! components) and a singular forcing coefficient end a run with a status
//! flag instead of an error.

use crate::error::{Error, Result};
use crate::model::State;

/// Right-hand side of `y' = F(t, y)`.
pub trait Field {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F: Field + ?Sized> Field for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (**self).eval(t, y, dy)
    }
}

/// Adapter turning a closure into a [`Field`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

pub fn fn_field<F>(dim: usize, f: F) -> FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    FnField { dim, f }
}

impl<F> Field for FnField<F>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    Escaped,
    CoefficientSingular,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRecord {
    Fixed { h: f64, steps: usize },
    Adaptive { accepted: usize, rejected: usize },
}

/// Time-ordered states of one run, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    t: Vec<f64>,
    y: Vec<f64>,
    pub steps: StepRecord,
    pub status: Status,
}

impl Trajectory {
    fn start(t0: f64, y0: &[f64], steps: StepRecord) -> Self {
        Trajectory { dim: y0.len(), t: vec![t0], y: y0.to_vec(), steps, status: Status::Completed }
    }

    fn push(&mut self, t: f64, y: &[f64]) {
        self.t.push(t);
        self.y.extend_from_slice(y);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.y[i * self.dim..(i + 1) * self.dim]
    }

    /// `(t, z, p)` from the first two components.
    pub fn state(&self, i: usize) -> State {
        let r = self.row(i);
        State { t: self.t[i], z: r[0], p: r[1] }
    }

    pub fn last(&self) -> State {
        self.state(self.len() - 1)
    }

    pub fn last_row(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.t.iter().copied().zip(self.y.chunks_exact(self.dim))
    }

    /// Largest `|y_j|` over the run.
    pub fn max_abs(&self, j: usize) -> f64 {
        self.y.chunks_exact(self.dim).map(|r| r[j].abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedStepConfig {
    pub h: f64,
    pub t_end: f64,
    pub escape: Option<f64>,
}

impl FixedStepConfig {
    pub fn new(h: f64, t_end: f64) -> Self {
        FixedStepConfig { h, t_end, escape: None }
    }

    pub fn escape(mut self, bound: f64) -> Self {
        self.escape = Some(bound);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub t_end: f64,
    pub escape: Option<f64>,
}

impl AdaptiveConfig {
    pub fn new(rtol: f64, atol: f64, t_end: f64) -> Self {
        AdaptiveConfig { rtol, atol, h_init: 1e-3, h_min: 1e-14, t_end, escape: None }
    }

    pub fn escape(mut self, bound: f64) -> Self {
        self.escape = Some(bound);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rtol >= 1e-14 && self.atol > 0.0) {
            return Err(Error::invalid("need rtol >= 1e-14 and atol > 0"));
        }
        if !(self.h_min > 0.0 && self.h_init > 0.0 && self.h_min <= self.h_init) {
            return Err(Error::invalid("need 0 < h_min <= h_init"));
        }
        Ok(())
    }
}

/// Stepping rule for [`sample_strobe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepper {
    Fixed { h: f64 },
    Adaptive { rtol: f64, atol: f64, h_init: f64, h_min: f64 },
}

impl Stepper {
    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        Stepper::Adaptive { rtol, atol, h_init: 1e-3, h_min: 1e-14 }
    }
}

enum Outcome {
    Reached,
    Escaped,
    Singular,
}

fn escaped(y: &[f64], bound: Option<f64>) -> bool {
    match bound {
        Some(b) => y.iter().take(2).any(|v| v.abs() > b),
        None => false,
    }
}

fn check_start(field: &impl Field, y0: &[f64], t0: f64, t_end: f64) -> Result<()> {
    if y0.len() != field.dim() {
        return Err(Error::invalid(format!(
            "initial state has {} components, field expects {}",
            y0.len(),
            field.dim()
        )));
    }
    if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
        return Err(Error::invalid(format!("need t_end > t_start, got [{t0}, {t_end}]")));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonfiniteState { t: t0 });
    }
    Ok(())
}

/// Folds a singular-coefficient failure into the run status.
fn stage(r: Result<()>) -> Result<bool> {
    match r {
        Ok(()) => Ok(true),
        Err(Error::CoefficientSingular { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Rk4 { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }

    /// Advances `y` in place; `Ok(false)` when the coefficient went singular.
    fn step(&mut self, f: &impl Field, t: f64, y: &mut [f64], h: f64) -> Result<bool> {
        let n = y.len();
        if !stage(f.eval(t, y, &mut self.k1))? {
            return Ok(false);
        }
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        if !stage(f.eval(t + 0.5 * h, &self.tmp, &mut self.k2))? {
            return Ok(false);
        }
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        if !stage(f.eval(t + 0.5 * h, &self.tmp, &mut self.k3))? {
            return Ok(false);
        }
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        if !stage(f.eval(t + h, &self.tmp, &mut self.k4))? {
            return Ok(false);
        }
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(true)
    }
}

/// Fixed-step RK4 from `t_start` to `t_end`. Grid times are `t_start + i·h`;
/// the last step is shortened (or snapped when `h` divides the span) so the
/// run lands exactly on `t_end`.
fn fixed_segment(
    f: &impl Field,
    rk: &mut Rk4,
    traj: &mut Trajectory,
    y: &mut [f64],
    t_start: f64,
    t_end: f64,
    h: f64,
    escape: Option<f64>,
    record: bool,
) -> Result<(Outcome, usize)> {
    let span = t_end - t_start;
    let mut n = (span / h).round();
    if n < 1.0 || (t_start + n * h - t_end).abs() > 1e-9 * h {
        n = (span / h).floor() + 1.0;
    }
    let n = n as usize;
    for i in 0..n {
        let t = t_start + i as f64 * h;
        let t_next = if i + 1 == n { t_end } else { t_start + (i + 1) as f64 * h };
        if !rk.step(f, t, y, t_next - t)? {
            return Ok((Outcome::Singular, i));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonfiniteState { t: t_next });
        }
        if record || i + 1 == n {
            traj.push(t_next, y);
        }
        if escaped(y, escape) {
            if !record && i + 1 != n {
                traj.push(t_next, y);
            }
            return Ok((Outcome::Escaped, i + 1));
        }
    }
    Ok((Outcome::Reached, n))
}

/// Classical fourth-order Runge–Kutta with fixed step `cfg.h`.
pub fn integrate_fixed(field: impl Field, t0: f64, y0: &[f64], cfg: FixedStepConfig) -> Result<Trajectory> {
    check_start(&field, y0, t0, cfg.t_end)?;
    if !(cfg.h > 0.0 && cfg.h.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {}", cfg.h)));
    }
    let mut traj = Trajectory::start(t0, y0, StepRecord::Fixed { h: cfg.h, steps: 0 });
    let mut y = y0.to_vec();
    let mut rk = Rk4::new(y0.len());
    let (outcome, steps) = fixed_segment(&field, &mut rk, &mut traj, &mut y, t0, cfg.t_end, cfg.h, cfg.escape, true)?;
    traj.steps = StepRecord::Fixed { h: cfg.h, steps };
    traj.status = match outcome {
        Outcome::Reached => Status::Completed,
        Outcome::Escaped => Status::Escaped,
        Outcome::Singular => Status::CoefficientSingular,
    };
    Ok(traj)
}

// Dormand–Prince 5(4) coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Dopri {
    rtol: f64,
    atol: f64,
    h: f64,
    h_min: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    /// `k[0]` holds `F(t, y)` for the current state (first-same-as-last).
    fsal: bool,
    accepted: usize,
    rejected: usize,
}

impl Dopri {
    fn new(n: usize, rtol: f64, atol: f64, h_init: f64, h_min: f64) -> Self {
        Dopri {
            rtol,
            atol,
            h: h_init,
            h_min,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            fsal: false,
            accepted: 0,
            rejected: 0,
        }
    }

    /// One trial step of size `h`; returns the scaled error, `None` if singular.
    fn trial(&mut self, f: &impl Field, t: f64, y: &[f64], h: f64) -> Result<Option<f64>> {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        if !self.fsal {
            if !stage(f.eval(t, y, k1))? {
                return Ok(None);
            }
            self.fsal = true;
        }
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        if !stage(f.eval(t + C2 * h, tmp, k2))? {
            return Ok(None);
        }
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        if !stage(f.eval(t + C3 * h, tmp, k3))? {
            return Ok(None);
        }
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        if !stage(f.eval(t + C4 * h, tmp, k4))? {
            return Ok(None);
        }
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        if !stage(f.eval(t + C5 * h, tmp, k5))? {
            return Ok(None);
        }
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        if !stage(f.eval(t + h, tmp, k6))? {
            return Ok(None);
        }
        let y_new = &mut self.y_new;
        for i in 0..n {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        if !stage(f.eval(t + h, y_new, k7))? {
            return Ok(None);
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / sc);
        }
        if !err.is_finite() {
            // treat as a failed step with maximal shrink
            err = 1e10;
        }
        Ok(Some(err))
    }

    /// Integrates `y` from `t_start` to exactly `t_end`.
    fn segment(
        &mut self,
        f: &impl Field,
        traj: &mut Trajectory,
        y: &mut [f64],
        t_start: f64,
        t_end: f64,
        escape: Option<f64>,
        record: bool,
    ) -> Result<Outcome> {
        let mut t = t_start;
        loop {
            let remaining = t_end - t;
            let last = self.h >= remaining * (1.0 - 1e-12);
            let h = if last { remaining } else { self.h };
            let err = match self.trial(f, t, y, h)? {
                Some(e) => e,
                None => return Ok(Outcome::Singular),
            };
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            if err <= 1.0 {
                self.accepted += 1;
                t = if last { t_end } else { t + h };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonfiniteState { t });
                }
                // a truncated final step says nothing about the natural size
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
                let esc = escaped(y, escape);
                if record || last || esc {
                    traj.push(t, y);
                }
                if esc {
                    return Ok(Outcome::Escaped);
                }
                if last {
                    return Ok(Outcome::Reached);
                }
            } else {
                self.rejected += 1;
                self.h = h * factor.min(1.0);
                if self.h < self.h_min {
                    return Err(Error::StepUnderflow { t, h: self.h });
                }
            }
        }
    }
}

/// Dormand–Prince 5(4) with error-per-step control.
pub fn integrate_adaptive(field: impl Field, t0: f64, y0: &[f64], cfg: AdaptiveConfig) -> Result<Trajectory> {
    adaptive_run(field, t0, y0, cfg, true)
}

/// As [`integrate_adaptive`], keeping only the initial and the terminal state.
pub fn integrate_adaptive_final(field: impl Field, t0: f64, y0: &[f64], cfg: AdaptiveConfig) -> Result<Trajectory> {
    adaptive_run(field, t0, y0, cfg, false)
}

fn adaptive_run(field: impl Field, t0: f64, y0: &[f64], cfg: AdaptiveConfig, record: bool) -> Result<Trajectory> {
    check_start(&field, y0, t0, cfg.t_end)?;
    cfg.validate()?;
    let mut traj = Trajectory::start(t0, y0, StepRecord::Adaptive { accepted: 0, rejected: 0 });
    let mut y = y0.to_vec();
    let mut dp = Dopri::new(y0.len(), cfg.rtol, cfg.atol, cfg.h_init, cfg.h_min);
    let outcome = dp.segment(&field, &mut traj, &mut y, t0, cfg.t_end, cfg.escape, record)?;
    traj.steps = StepRecord::Adaptive { accepted: dp.accepted, rejected: dp.rejected };
    traj.status = match outcome {
        Outcome::Reached => Status::Completed,
        Outcome::Escaped => Status::Escaped,
        Outcome::Singular => Status::CoefficientSingular,
    };
    Ok(traj)
}

/// States at the strobe times `t0 + k·t_step`, `k = 0..=k_max`.
///
/// Each strobe time is a segment end, so no step straddles it. On escape the
/// escaping state (between strobes) is recorded last with status `Escaped`.
pub fn sample_strobe(
    field: impl Field,
    t0: f64,
    y0: &[f64],
    t_step: f64,
    k_max: usize,
    escape: Option<f64>,
    stepper: Stepper,
) -> Result<Trajectory> {
    if !(t_step > 0.0 && t_step.is_finite()) {
        return Err(Error::invalid(format!("strobe step must be positive, got {t_step}")));
    }
    check_start(&field, y0, t0, t0 + t_step)?;
    let n = y0.len();
    let mut y = y0.to_vec();
    match stepper {
        Stepper::Fixed { h } => {
            if !(h > 0.0) {
                return Err(Error::invalid("step size must be positive"));
            }
            let mut traj = Trajectory::start(t0, y0, StepRecord::Fixed { h, steps: 0 });
            let mut rk = Rk4::new(n);
            let mut total = 0;
            for k in 0..k_max {
                let a = t0 + k as f64 * t_step;
                let b = t0 + (k + 1) as f64 * t_step;
                let (outcome, steps) = fixed_segment(&field, &mut rk, &mut traj, &mut y, a, b, h, escape, false)?;
                total += steps;
                traj.steps = StepRecord::Fixed { h, steps: total };
                match outcome {
                    Outcome::Reached => {}
                    Outcome::Escaped => {
                        traj.status = Status::Escaped;
                        return Ok(traj);
                    }
                    Outcome::Singular => {
                        traj.status = Status::CoefficientSingular;
                        return Ok(traj);
                    }
                }
            }
            Ok(traj)
        }
        Stepper::Adaptive { rtol, atol, h_init, h_min } => {
            let cfg = AdaptiveConfig { rtol, atol, h_init, h_min, t_end: t0 + t_step, escape };
            cfg.validate()?;
            let mut traj = Trajectory::start(t0, y0, StepRecord::Adaptive { accepted: 0, rejected: 0 });
            let mut dp = Dopri::new(n, rtol, atol, h_init, h_min);
            for k in 0..k_max {
                let a = t0 + k as f64 * t_step;
                let b = t0 + (k + 1) as f64 * t_step;
                let outcome = dp.segment(&field, &mut traj, &mut y, a, b, escape, false)?;
                traj.steps = StepRecord::Adaptive { accepted: dp.accepted, rejected: dp.rejected };
                match outcome {
                    Outcome::Reached => {}
                    Outcome::Escaped => {
                        traj.status = Status::Escaped;
                        return Ok(traj);
                    }
                    Outcome::Singular => {
                        traj.status = Status::CoefficientSingular;
                        return Ok(traj);
                    }
                }
            }
            Ok(traj)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OscillatorSpec;
    use std::f64::consts::{PI, TAU};

    fn harmonic(omega: f64) -> impl Field {
        fn_field(2, move |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -omega * omega * y[0];
            Ok(())
        })
    }

    #[test]
    fn rk4_full_period_of_harmonic_oscillator() {
        let traj = integrate_fixed(harmonic(1.0), 0.0, &[1.0, 0.0], FixedStepConfig::new(1e-3, TAU)).unwrap();
        let last = traj.last();
        assert_eq!(last.t, TAU);
        assert!((last.z - 1.0).abs() < 1e-10 && last.p.abs() < 1e-10, "{last:?}");
        assert_eq!(traj.status, Status::Completed);
    }

    #[test]
    fn rk4_is_exact_on_linear_motion() {
        let free = fn_field(2, |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = 0.0;
            Ok(())
        });
        let traj = integrate_fixed(&free, 0.0, &[0.0, 1.0], FixedStepConfig::new(0.125, 1.0)).unwrap();
        assert_eq!(traj.last_row(), &[1.0, 1.0]);
        assert_eq!(traj.len(), 9);
        let traj = integrate_fixed(&free, 0.0, &[0.0, 1.0], FixedStepConfig::new(0.1, 1.0)).unwrap();
        assert_eq!(traj.len(), 11);
        assert!((traj.last_row()[0] - 1.0).abs() < 1e-15);
        // non-dividing step: shortened last step lands on t_end
        let traj = integrate_fixed(&free, 0.0, &[0.0, 1.0], FixedStepConfig::new(0.3, 1.0)).unwrap();
        assert_eq!(traj.times(), &[0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
    }

    #[test]
    fn trajectory_starts_at_initial_state_and_increases() {
        let spec = OscillatorSpec::trig(1.3, 0.9, 0.0, 1.0, 2).unwrap();
        let traj = integrate_adaptive(&spec, 0.5, &[0.1, 0.02], AdaptiveConfig::new(1e-9, 1e-12, 20.0)).unwrap();
        assert_eq!(traj.state(0), State::new(0.5, 0.1, 0.02));
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.last().t, 20.0);
    }

    #[test]
    fn dopri_periodic_return() {
        let cfg = AdaptiveConfig::new(1e-12, 1e-14, 10.0 * TAU);
        let traj = integrate_adaptive(harmonic(1.0), 0.0, &[1.0, 0.0], cfg).unwrap();
        let last = traj.last();
        assert!((last.z - 1.0).abs() < 1e-9 && last.p.abs() < 1e-9, "{last:?}");
        assert!(matches!(traj.steps, StepRecord::Adaptive { accepted, .. } if accepted > 100));
    }

    #[test]
    fn dopri_conserves_quartic_energy() {
        let quartic = fn_field(2, |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0] * y[0] * y[0];
            Ok(())
        });
        let energy = |r: &[f64]| 0.5 * r[1] * r[1] + 0.25 * r[0].powi(4);
        let rtol = 1e-10;
        let traj = integrate_adaptive(&quartic, 0.0, &[1.0, 0.0], AdaptiveConfig::new(rtol, 1e-13, 100.0)).unwrap();
        let e0 = energy(traj.row(0));
        let worst = traj.rows().map(|(_, r)| ((energy(r) - e0) / e0).abs()).fold(0.0, f64::max);
        assert!(worst <= 100.0 * rtol, "worst energy drift {worst:e}");
    }

    #[test]
    fn fixed_and_adaptive_agree_on_trig_system() {
        let spec = OscillatorSpec::trig(1.3, 0.9, 0.0, 1.0, 2).unwrap();
        let a = integrate_fixed(&spec, 0.0, &[0.1, 0.0], FixedStepConfig::new(1e-3, 100.0)).unwrap();
        let b = integrate_adaptive(&spec, 0.0, &[0.1, 0.0], AdaptiveConfig::new(1e-12, 1e-15, 100.0)).unwrap();
        let (x, y) = (a.last(), b.last());
        assert!((x.z - y.z).abs() < 1e-7 && (x.p - y.p).abs() < 1e-7, "{x:?} vs {y:?}");
    }

    #[test]
    fn strobe_hits_exact_times() {
        let s = sample_strobe(harmonic(1.0), 0.0, &[1.0, 0.0], TAU, 5, None, Stepper::adaptive(1e-12, 1e-14)).unwrap();
        assert_eq!(s.len(), 6);
        for k in 0..=5 {
            assert_eq!(s.time(k), k as f64 * TAU);
            let st = s.state(k);
            assert!((st.z - 1.0).abs() < 1e-9 && st.p.abs() < 1e-9);
        }
        let s = sample_strobe(harmonic(1.0), 0.3, &[1.0, 0.0], PI / 3.0, 7, None, Stepper::Fixed { h: 1e-2 }).unwrap();
        for k in 0..=7 {
            assert_eq!(s.time(k), 0.3 + k as f64 * (PI / 3.0));
        }
        let s = sample_strobe(harmonic(1.0), 0.0, &[0.4, 0.2], 1.0, 0, None, Stepper::Fixed { h: 1e-2 }).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.row(0), &[0.4, 0.2]);
    }

    #[test]
    fn escape_sets_status() {
        let blowup = fn_field(2, |_t, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = y[0] * y[0];
            Ok(())
        });
        let traj = integrate_fixed(&blowup, 0.0, &[1.0, 0.0], FixedStepConfig::new(1e-3, 100.0).escape(50.0)).unwrap();
        assert_eq!(traj.status, Status::Escaped);
        assert!(traj.last().t < 100.0);
        let traj = integrate_adaptive(&blowup, 0.0, &[1.0, 0.0], AdaptiveConfig::new(1e-9, 1e-12, 100.0).escape(50.0)).unwrap();
        assert_eq!(traj.status, Status::Escaped);
        let s = sample_strobe(&blowup, 0.0, &[1.0, 0.0], 1.0, 100, Some(50.0), Stepper::adaptive(1e-9, 1e-12)).unwrap();
        assert_eq!(s.status, Status::Escaped);
        // without an escape bound the blow-up ends in step underflow
        let r = integrate_adaptive(&blowup, 0.0, &[1.0, 0.0], AdaptiveConfig::new(1e-9, 1e-12, 100.0));
        assert!(matches!(r, Err(Error::StepUnderflow { .. }) | Err(Error::NonfiniteState { .. })));
    }

    #[test]
    fn singular_coefficient_is_a_status() {
        let f = fn_field(2, |t, _y: &[f64], dy: &mut [f64]| {
            if t > 1.0 {
                return Err(Error::CoefficientSingular { t, alpha2: 0.0 });
            }
            dy.fill(0.0);
            Ok(())
        });
        let traj = integrate_fixed(&f, 0.0, &[0.0, 0.0], FixedStepConfig::new(0.1, 5.0)).unwrap();
        assert_eq!(traj.status, Status::CoefficientSingular);
        let traj = integrate_adaptive(&f, 0.0, &[0.0, 0.0], AdaptiveConfig::new(1e-9, 1e-12, 5.0)).unwrap();
        assert_eq!(traj.status, Status::CoefficientSingular);
    }

    #[test]
    fn nonfinite_state_is_an_error() {
        let f = fn_field(1, |_t, _y: &[f64], dy: &mut [f64]| {
            dy[0] = f64::NAN;
            Ok(())
        });
        assert!(matches!(
            integrate_fixed(&f, 0.0, &[1.0], FixedStepConfig::new(0.1, 1.0)),
            Err(Error::NonfiniteState { .. })
        ));
    }

    #[test]
    fn bad_configs() {
        assert!(integrate_fixed(harmonic(1.0), 0.0, &[1.0, 0.0], FixedStepConfig::new(0.0, 1.0)).is_err());
        assert!(integrate_fixed(harmonic(1.0), 0.0, &[1.0, 0.0], FixedStepConfig::new(0.1, -1.0)).is_err());
        assert!(integrate_fixed(harmonic(1.0), 0.0, &[1.0], FixedStepConfig::new(0.1, 1.0)).is_err());
        assert!(integrate_adaptive(harmonic(1.0), 0.0, &[1.0, 0.0], AdaptiveConfig::new(1e-16, 1e-9, 1.0)).is_err());
    }

    #[test]
    fn deterministic() {
        let spec = OscillatorSpec::trig(1.3, 0.9, 0.2, 1.1, 3).unwrap();
        let run = || integrate_adaptive(&spec, 0.0, &[0.3, 0.1], AdaptiveConfig::new(1e-10, 1e-13, 30.0)).unwrap();
        assert_eq!(run(), run());
    }
}
