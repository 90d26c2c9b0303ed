//! Piecewise-cubic interpolation helpers.
//!
//! [`UniformCubic`] is a C¹ cubic Hermite interpolant on a uniform knot grid
//! with finite-difference tangents (Catmull-Rom in the interior). It backs
//! sampled forcing coefficients and the sampled Hill coefficients read by the
//! `reduce` command. [`hermite`] is the bare two-point Hermite cubic used when
//! exact end slopes are known.

use crate::error::{Error, Result};

/// Cubic Hermite interpolation on `[x0, x1]` with end values and end slopes.
pub fn hermite(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of [`hermite`] with respect to `x`.
pub fn hermite_slope(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let dh00 = 6.0 * s2 - 6.0 * s;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = -6.0 * s2 + 6.0 * s;
    let dh11 = 3.0 * s2 - 2.0 * s;
    (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformCubic {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// When set, evaluation wraps with this period instead of failing outside the knots.
    period: Option<f64>,
}

impl UniformCubic {
    /// Build from `(t, value)` knots which must be strictly increasing and
    /// uniformly spaced (relative spacing deviation at most 1e-6).
    pub fn from_knots(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("sampled source needs at least two knots"));
        }
        if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::invalid("sampled knots must be finite"));
        }
        let n = knots.len();
        let t0 = knots[0].0;
        let dt = (knots[n - 1].0 - t0) / (n - 1) as f64;
        if dt <= 0.0 {
            return Err(Error::invalid("sampled knot times must increase"));
        }
        for (i, (t, _)) in knots.iter().enumerate() {
            if (t - (t0 + i as f64 * dt)).abs() > 1e-6 * dt {
                return Err(Error::invalid("sampled knots must lie on a uniform grid"));
            }
        }
        let values: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let slopes = open_slopes(&values, dt);
        Ok(UniformCubic { t0, dt, values, slopes, period: None })
    }

    /// Periodic interpolant from `n` samples at `t0 + i*period/n`, `i = 0..n`
    /// (the sample at `t0 + period` is implied by the first one).
    pub fn periodic(t0: f64, period: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 3 {
            return Err(Error::invalid("periodic interpolant needs at least three samples"));
        }
        if !(period > 0.0) {
            return Err(Error::invalid("period must be positive"));
        }
        let dt = period / n as f64;
        let slopes = (0..n)
            .map(|i| (values[(i + 1) % n] - values[(i + n - 1) % n]) / (2.0 * dt))
            .collect();
        Ok(UniformCubic { t0, dt, values, slopes, period: Some(period) })
    }

    pub fn t_range(&self) -> (f64, f64) {
        match self.period {
            Some(p) => (self.t0, self.t0 + p),
            None => (self.t0, self.t0 + (self.values.len() - 1) as f64 * self.dt),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (i, x) = self.locate(t)?;
        let (y0, y1, d0, d1) = self.segment(i);
        Ok(hermite(x, 0.0, self.dt, y0, y1, d0, d1))
    }

    pub fn slope(&self, t: f64) -> Result<f64> {
        let (i, x) = self.locate(t)?;
        let (y0, y1, d0, d1) = self.segment(i);
        Ok(hermite_slope(x, 0.0, self.dt, y0, y1, d0, d1))
    }

    fn segment(&self, i: usize) -> (f64, f64, f64, f64) {
        let n = self.values.len();
        let j = if self.period.is_some() { (i + 1) % n } else { i + 1 };
        (self.values[i], self.values[j], self.slopes[i], self.slopes[j])
    }

    /// Segment index and offset inside the segment.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let n = self.values.len();
        let mut u = t - self.t0;
        if let Some(p) = self.period {
            u = u.rem_euclid(p);
            let i = ((u / self.dt).floor() as usize).min(n - 1);
            return Ok((i, u - i as f64 * self.dt));
        }
        let (lo, hi) = self.t_range();
        let slack = 1e-12 * self.dt;
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::OutOfRange { t, lo, hi });
        }
        let i = ((u / self.dt).floor().max(0.0) as usize).min(n - 2);
        Ok((i, u - i as f64 * self.dt))
    }
}

/// Central differences inside, second-order one-sided differences at the ends.
fn open_slopes(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    if n == 2 {
        let s = (v[1] - v[0]) / dt;
        return vec![s, s];
    }
    let mut s = vec![0.0; n];
    for i in 1..n - 1 {
        s[i] = (v[i + 1] - v[i - 1]) / (2.0 * dt);
    }
    s[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    s[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt);
    s
}
