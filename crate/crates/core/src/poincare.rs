//! Stroboscopic sections of the `m = 2` trig family at `t_k = kπ/ω`.
//!
//! With `C = 0` every strobe time has `α₂ = A + B`, `α₂' = 0` and
//! `α₂'' = −4ω²B`, so the invariant reduces to the time-free level curve
//!
//! ```text
//! (A+B) p² + ω²(A−B) z² + ⅔(A+B)^(-3/2) z³ = I₀
//! ```
//!
//! and every strobe point must lie on it.

use std::f64::consts::PI;

use serde::Serialize;

use crate::cubic::Cubic;
use crate::error::{Error, Result};
use crate::integrator::{sample_strobe, Stepper, Trajectory};
use crate::model::{OscillatorSpec, State};

/// Closed interval of admissible `z`; `lo` may be `-inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lo <= z && z <= self.hi
    }
}

/// Level curve `c_p2·p² + c_z2·z² + c_z3·z³ = I₀` with its admissible `z`-set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionCurve {
    pub c_p2: f64,
    pub c_z2: f64,
    pub c_z3: f64,
    pub i0: f64,
    pub intervals: Vec<Interval>,
}

/// Strobe level-curve coefficients `(c_p2, c_z2, c_z3)` of an `m = 2`, `C = 0` system.
pub fn strobe_coefficients(spec: &OscillatorSpec) -> Result<(f64, f64, f64)> {
    let alpha = spec
        .trig_alpha()
        .ok_or(Error::UnsupportedSource("sections need the trig family"))?;
    if spec.m() != 2 {
        return Err(Error::invalid("sections are implemented for the cubic nonlinearity (m = 2)"));
    }
    if alpha.c() != 0.0 {
        return Err(Error::invalid("sections at t_k = k*pi/omega need C = 0"));
    }
    let (a, b, w) = (alpha.a(), alpha.b(), spec.omega());
    Ok((a + b, w * w * (a - b), 2.0 / 3.0 * (a + b).powf(-1.5)))
}

pub fn section_curve(spec: &OscillatorSpec, i0: f64) -> Result<SectionCurve> {
    let (c_p2, c_z2, c_z3) = strobe_coefficients(spec)?;
    SectionCurve::new(c_p2, c_z2, c_z3, i0)
}

impl SectionCurve {
    pub fn new(c_p2: f64, c_z2: f64, c_z3: f64, i0: f64) -> Result<Self> {
        if !(c_p2 > 0.0) || ![c_z2, c_z3, i0].iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("section curve needs c_p2 > 0 and finite coefficients"));
        }
        let mut curve = SectionCurve { c_p2, c_z2, c_z3, i0, intervals: Vec::new() };
        curve.intervals = curve.admissible_intervals();
        Ok(curve)
    }

    /// `c_p2·p² + c_z2·z² + c_z3·z³`.
    pub fn level(&self, z: f64, p: f64) -> f64 {
        self.c_p2 * p * p + self.c_z2 * z * z + self.c_z3 * z * z * z
    }

    /// `I₀ − c_z2·z² − c_z3·z³`, i.e. `c_p2·p²` on the curve.
    pub fn radicand(&self, z: f64) -> f64 {
        self.i0 - self.c_z2 * z * z - self.c_z3 * z * z * z
    }

    /// Real roots of the radicand, ascending with multiplicity.
    pub fn radicand_roots(&self) -> Vec<f64> {
        Cubic::new(-self.c_z3, -self.c_z2, 0.0, self.i0).real_roots()
    }

    /// Non-negative `p` on the curve at `z` (zero outside the admissible set).
    pub fn momentum(&self, z: f64) -> f64 {
        (self.radicand(z).max(0.0) / self.c_p2).sqrt()
    }

    pub fn interval_containing(&self, z: f64) -> Option<Interval> {
        self.intervals.iter().copied().find(|iv| iv.contains(z))
    }

    fn admissible_intervals(&self) -> Vec<Interval> {
        let mut roots = self.radicand_roots();
        roots.dedup();
        if roots.is_empty() {
            // constant or sign-definite radicand
            return if self.radicand(0.0) >= 0.0 {
                vec![Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }]
            } else {
                vec![]
            };
        }
        // cells: (-inf, r0), (r0, r1), ..., (r_last, inf)
        let n = roots.len();
        let cell_ok = |i: usize| -> bool {
            let probe = if i == 0 {
                roots[0] - 1.0 - roots[0].abs()
            } else if i == n {
                roots[n - 1] + 1.0 + roots[n - 1].abs()
            } else {
                0.5 * (roots[i - 1] + roots[i])
            };
            self.radicand(probe) > 0.0
        };
        let mut out: Vec<Interval> = Vec::new();
        for i in 0..=n {
            let lo = if i == 0 { f64::NEG_INFINITY } else { roots[i - 1] };
            let hi = if i == n { f64::INFINITY } else { roots[i] };
            let iv = if cell_ok(i) {
                Interval { lo, hi }
            } else if i < n && !cell_ok(i + 1) {
                // isolated touching root between two negative cells
                Interval { lo: hi, hi }
            } else {
                continue;
            };
            match out.last_mut() {
                Some(prev) if prev.hi == iv.lo => prev.hi = iv.hi,
                _ => out.push(iv),
            }
        }
        out
    }

    /// `n` equally spaced points `(z, +p, −p)` per bounded admissible interval,
    /// endpoints included.
    pub fn curve_points(&self, n: usize) -> Vec<(f64, f64, f64)> {
        self.sample(n, None)
    }

    /// Like [`Self::curve_points`], with unbounded intervals cut at `z_min` / `z_max`.
    pub fn curve_points_clipped(&self, n: usize, z_min: f64, z_max: f64) -> Vec<(f64, f64, f64)> {
        self.sample(n, Some((z_min, z_max)))
    }

    fn sample(&self, n: usize, clip: Option<(f64, f64)>) -> Vec<(f64, f64, f64)> {
        let n = n.max(2);
        let mut out = Vec::new();
        for iv in &self.intervals {
            let (lo, hi) = match clip {
                Some((a, b)) => (iv.lo.max(a), iv.hi.min(b)),
                None if iv.is_bounded() => (iv.lo, iv.hi),
                None => continue,
            };
            if lo > hi {
                continue;
            }
            if lo == hi {
                out.push((lo, 0.0, -0.0));
                continue;
            }
            for i in 0..n {
                let z = if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
                let p = self.momentum(z);
                out.push((z, p, -p));
            }
        }
        out
    }
}

/// Largest `|level(z, p) − I₀| / max(|I₀|, 1e-30)` over the points.
pub fn section_residual(points: &[State], curve: &SectionCurve) -> f64 {
    let norm = curve.i0.abs().max(1e-30);
    points.iter().map(|s| (curve.level(s.z, s.p) - curve.i0).abs() / norm).fold(0.0, f64::max)
}

/// Strobe points from `(z0, p0)` at `t = 0` together with their analytic curve.
#[derive(Debug, Clone)]
pub struct Section {
    pub strobe: Trajectory,
    pub curve: SectionCurve,
    pub residual: f64,
}

pub fn strobe_section(
    spec: &OscillatorSpec,
    z0: f64,
    p0: f64,
    k_max: usize,
    escape: Option<f64>,
    stepper: Stepper,
) -> Result<Section> {
    let (c_p2, c_z2, c_z3) = strobe_coefficients(spec)?;
    let i0 = c_p2 * p0 * p0 + c_z2 * z0 * z0 + c_z3 * z0 * z0 * z0;
    let curve = SectionCurve::new(c_p2, c_z2, c_z3, i0)?;
    let strobe = sample_strobe(spec, 0.0, &[z0, p0], PI / spec.omega(), k_max, escape, stepper)?;
    let points: Vec<State> = match strobe.status {
        // an escaped run ends off-strobe
        crate::integrator::Status::Completed => strobe.states().collect(),
        _ => strobe.states().take(strobe.len() - 1).collect(),
    };
    let residual = section_residual(&points, &curve);
    Ok(Section { strobe, curve, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate_adaptive, AdaptiveConfig};

    fn fig2() -> OscillatorSpec {
        OscillatorSpec::trig(1.3, 0.9, 0.0, 1.0, 2).unwrap()
    }

    #[test]
    fn coefficients() {
        let c = section_curve(&fig2(), 0.01).unwrap();
        assert_eq!(c.c_p2, 2.2);
        assert!((c.c_z2 - 0.4).abs() < 1e-15);
        // 30-digit reference 0.204302988625224874...
        assert!((c.c_z3 - 0.204_302_988_625_224_87).abs() < 1e-16);
    }

    #[test]
    fn rejects_unsupported() {
        assert!(section_curve(&OscillatorSpec::trig(1.3, 0.9, 0.1, 1.0, 2).unwrap(), 0.0).is_err());
        assert!(section_curve(&OscillatorSpec::trig(1.3, 0.9, 0.0, 1.0, 3).unwrap(), 0.0).is_err());
    }

    #[test]
    fn zero_level_touches_origin() {
        let c = section_curve(&fig2(), 0.0).unwrap();
        let origin = c.interval_containing(0.0).unwrap();
        assert_eq!(origin, Interval { lo: 0.0, hi: 0.0 });
        assert_eq!(c.intervals.len(), 2);
        assert!(!c.intervals[0].is_bounded());
    }

    #[test]
    fn critical_level_merges_lobes() {
        let i_crit = 0.88f64.powi(3) / 3.0;
        let below = section_curve(&fig2(), i_crit * (1.0 - 1e-6)).unwrap();
        assert_eq!(below.intervals.len(), 2);
        let at = section_curve(&fig2(), i_crit).unwrap();
        assert_eq!(at.intervals.len(), 1);
        let roots = at.radicand_roots();
        assert_eq!(roots.len(), 3);
        assert!((roots[0] - roots[1]).abs() < 1e-8, "{roots:?}");
        let above = section_curve(&fig2(), i_crit * (1.0 + 1e-6)).unwrap();
        assert_eq!(above.intervals.len(), 1);
        assert!(!above.intervals[0].is_bounded());
    }

    #[test]
    fn fig2_lobe() {
        let spec = fig2();
        let (c_p2, c_z2, c_z3) = strobe_coefficients(&spec).unwrap();
        let i0 = c_z2 * 0.01 + c_z3 * 0.001;
        let curve = SectionCurve::new(c_p2, c_z2, c_z3, i0).unwrap();
        let lobe = curve.interval_containing(0.1).unwrap();
        assert!(lobe.is_bounded() && lobe.contains(0.0));
        assert!((lobe.hi - 0.1).abs() < 1e-14);
        let pts = curve.curve_points(101);
        assert_eq!(pts.len(), 101);
        assert!(pts.iter().all(|p| p.0.abs() < 0.2));
        for &(z, p, q) in &pts {
            assert_eq!(p, -q);
            let lhs = curve.level(z, p);
            assert!((lhs - i0).abs() <= 1e-12 * i0);
        }
        assert!(pts[0].1 < 1e-8 && pts[100].1 < 1e-8);
    }

    #[test]
    fn strobe_points_on_curve() {
        let s = strobe_section(&fig2(), 0.1, 0.0, 190, Some(50.0), Stepper::Fixed { h: 1e-3 }).unwrap();
        assert_eq!(s.strobe.len(), 191);
        assert!(s.residual <= 1e-6, "{:e}", s.residual);
        let first = [s.strobe.state(0)];
        assert_eq!(section_residual(&first, &s.curve), 0.0);
    }

    #[test]
    fn autonomous_every_point_on_curve() {
        let spec = OscillatorSpec::trig(1.0, 0.0, 0.0, 1.0, 2).unwrap();
        let (c_p2, c_z2, c_z3) = strobe_coefficients(&spec).unwrap();
        let curve = SectionCurve::new(c_p2, c_z2, c_z3, c_z2 * 0.09 + c_z3 * 0.027).unwrap();
        let traj = integrate_adaptive(&spec, 0.0, &[0.3, 0.0], AdaptiveConfig::new(1e-12, 1e-15, 50.0)).unwrap();
        let pts: Vec<State> = traj.states().collect();
        assert!(section_residual(&pts, &curve) <= 1e-8);
    }
}
