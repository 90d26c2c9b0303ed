//! Real roots of `a z³ + b z² + c z + d`.
//!
//! Closed form (trigonometric for three real roots, Cardano otherwise) on the
//! depressed cubic, one Newton polish per root. Near-vanishing discriminants
//! are snapped to the exact double-root formulas, where the trigonometric
//! branch would lose half the digits.

use std::f64::consts::TAU;

/// Relative discriminant below which two roots are treated as coincident.
const DOUBLE_ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Cubic {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Cubic { a, b, c, d }
    }

    pub fn eval(&self, z: f64) -> f64 {
        ((self.a * z + self.b) * z + self.c) * z + self.d
    }

    pub fn slope(&self, z: f64) -> f64 {
        (3.0 * self.a * z + 2.0 * self.b) * z + self.c
    }

    /// Real roots in ascending order, repeated by multiplicity.
    pub fn real_roots(&self) -> Vec<f64> {
        let mut roots = if self.a == 0.0 {
            quadratic_roots(self.b, self.c, self.d)
        } else {
            self.depressed_roots()
        };
        for r in roots.iter_mut() {
            *r = self.polish(*r);
        }
        roots.sort_by(f64::total_cmp);
        roots
    }

    fn depressed_roots(&self) -> Vec<f64> {
        let b = self.b / self.a;
        let c = self.c / self.a;
        let d = self.d / self.a;
        let shift = b / 3.0;
        let p = c - b * b / 3.0;
        let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;

        let p3 = 4.0 * p * p * p;
        let q2 = 27.0 * q * q;
        let disc = p3 + q2;
        let scale = p3.abs() + q2;

        if scale == 0.0 {
            return vec![-shift; 3];
        }
        if disc.abs() <= DOUBLE_ROOT_TOL * scale {
            let double = -1.5 * q / p;
            let single = 3.0 * q / p;
            return vec![double - shift, double - shift, single - shift];
        }
        if disc < 0.0 {
            // three distinct real roots
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            (0..3).map(|k| m * (theta - TAU * k as f64 / 3.0).cos() - shift).collect()
        } else {
            let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
            let u = (-0.5 * q - s.copysign(q)).cbrt();
            let x = if u == 0.0 { 0.0 } else { u - p / (3.0 * u) };
            vec![x - shift]
        }
    }

    fn polish(&self, r: f64) -> f64 {
        let f = self.eval(r);
        let df = self.slope(r);
        if f == 0.0 || df == 0.0 {
            return r;
        }
        let candidate = r - f / df;
        if candidate.is_finite() && self.eval(candidate).abs() < f.abs() {
            candidate
        } else {
            r
        }
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + disc.sqrt().copysign(b));
    if q == 0.0 {
        return vec![0.0, 0.0];
    }
    vec![q / a, c / q]
}
