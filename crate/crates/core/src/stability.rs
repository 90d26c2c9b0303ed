//! Critical invariant level, critical amplitude and the numerical
//! boundedness scan for the `m = 2` trig family.
//!
//! On the strobe section the radicand `I₀ − ω²(A−R)z² − ⅔(A+R)^(-3/2) z³`
//! has a local minimum at `z* = −ω²(A−R)(A+R)^(3/2)`. The bounded lobe around
//! the origin opens once `I₀` reaches `⅓ω⁶(A²−R²)³`, which for `p(0) = 0`
//! happens at `z₀ = (ω²/2)(A−R)(A+R)^(3/2)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{integrate_adaptive_final, AdaptiveConfig, Status};
use crate::model::OscillatorSpec;

fn check(a: f64, r: f64, omega: f64) -> Result<()> {
    // A = R is the degenerate edge where the formulas give zero
    if !(r >= 0.0 && a >= r && a > 0.0 && omega > 0.0) || ![a, r, omega].iter().all(|x| x.is_finite()) {
        return Err(Error::invalid(format!("need A >= R >= 0 and omega > 0, got A={a} R={r} omega={omega}")));
    }
    Ok(())
}

/// `I₀ = ω²(A−R) z₀² + ⅔(A+R)^(-3/2) z₀³` for a start at rest.
pub fn i0_of_z0(a: f64, r: f64, omega: f64, z0: f64) -> Result<f64> {
    check(a, r, omega)?;
    Ok(omega * omega * (a - r) * z0 * z0 + 2.0 / 3.0 * (a + r).powf(-1.5) * z0 * z0 * z0)
}

/// `I₀,crit = ⅓ ω⁶ (A² − R²)³`.
pub fn i0_crit(a: f64, r: f64, omega: f64) -> Result<f64> {
    check(a, r, omega)?;
    let w2 = omega * omega;
    let s = a * a - r * r;
    Ok(w2 * w2 * w2 * s * s * s / 3.0)
}

/// `z_crit = (ω²/2)(A−R)(A+R)^(3/2)`.
pub fn z_crit(a: f64, r: f64, omega: f64) -> Result<f64> {
    check(a, r, omega)?;
    Ok(0.5 * omega * omega * (a - r) * (a + r).powf(1.5))
}

/// Location of the double root of the strobe radicand at the critical level.
pub fn separatrix_root(a: f64, r: f64, omega: f64) -> Result<f64> {
    check(a, r, omega)?;
    Ok(-omega * omega * (a - r) * (a + r).powf(1.5))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundednessConfig {
    pub t_max: f64,
    pub z_escape: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for BoundednessConfig {
    fn default() -> Self {
        BoundednessConfig { t_max: 600.0, z_escape: 50.0, rtol: 1e-10, atol: 1e-12 }
    }
}

/// Integrates from `(z0, 0)` at `t = 0` and reports whether `|z|` (and `|p|`)
/// stay within `z_escape` up to `t_max`. Step underflow counts as escape.
pub fn bounded(spec: &OscillatorSpec, z0: f64, cfg: &BoundednessConfig) -> Result<bool> {
    if spec.m() != 2 || spec.trig_alpha().is_none() {
        return Err(Error::invalid("boundedness predicate is defined for the m = 2 trig family"));
    }
    if !(z0 >= 0.0) {
        return Err(Error::invalid(format!("z0 must be non-negative, got {z0}")));
    }
    if z0 == 0.0 {
        return Ok(true);
    }
    let ad = AdaptiveConfig { h_init: 1e-3, h_min: 1e-12, ..AdaptiveConfig::new(cfg.rtol, cfg.atol, cfg.t_max) }
        .escape(cfg.z_escape);
    match integrate_adaptive_final(spec, 0.0, &[z0, 0.0], ad) {
        Ok(traj) => Ok(traj.status == Status::Completed),
        Err(Error::StepUnderflow { .. }) | Err(Error::NonfiniteState { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityRow {
    pub omega: f64,
    pub z_last_bounded: f64,
    pub z_crit_analytic: f64,
    pub agrees: bool,
}

/// Parameters of one boundedness scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub omegas: Vec<f64>,
    pub dz0: f64,
    pub bounded: BoundednessConfig,
}

/// Candidates per parallel batch inside one ω row.
const BATCH: usize = 8;

/// For each ω, steps `z0 = k·dz0` (`k = 1, 2, …`) until the motion is no
/// longer bounded and records the last bounded amplitude.
///
/// Cells run on the current rayon pool; rows come back in input order.
pub fn scan(cfg: &ScanConfig) -> Result<Vec<StabilityRow>> {
    if !(cfg.dz0 > 0.0) {
        return Err(Error::invalid("dz0 must be positive"));
    }
    cfg.omegas
        .par_iter()
        .map(|&omega| scan_row(cfg, omega))
        .collect()
}

fn scan_row(cfg: &ScanConfig, omega: f64) -> Result<StabilityRow> {
    let spec = OscillatorSpec::trig(cfg.a, cfg.b, cfg.c, omega, 2)?;
    let r = cfg.b.hypot(cfg.c);
    let zc = z_crit(cfg.a, r, omega)?;
    // no amplitude past the escape radius can count as bounded
    let k_cap = (cfg.bounded.z_escape / cfg.dz0).floor() as usize;
    let mut last_ok = 0usize;
    let mut k = 1usize;
    'outer: while k <= k_cap {
        let hi = (k + BATCH - 1).min(k_cap);
        let verdicts: Vec<Result<bool>> = (k..=hi)
            .into_par_iter()
            .map(|j| bounded(&spec, j as f64 * cfg.dz0, &cfg.bounded))
            .collect();
        for (offset, v) in verdicts.into_iter().enumerate() {
            if v? {
                last_ok = k + offset;
            } else {
                break 'outer;
            }
        }
        k = hi + 1;
    }
    let z_last = last_ok as f64 * cfg.dz0;
    Ok(StabilityRow {
        omega,
        z_last_bounded: z_last,
        z_crit_analytic: zc,
        agrees: (z_last - zc).abs() <= 2.0 * cfg.dz0,
    })
}
