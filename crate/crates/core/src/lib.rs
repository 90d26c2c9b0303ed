//! Quadratic first integrals, stroboscopic sections and stability boundaries
//! for `z'' + ω² z + g(t) z^m = 0`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cli;
pub mod cubic;
pub mod error;
pub mod family;
pub mod integrator;
pub mod interp;
pub mod invariant;
pub mod io;
pub mod model;
pub mod normalform;
pub mod plot;
pub mod poincare;
pub mod stability;

pub use error::{Error, Result};
pub use model::{GSource, OscillatorSpec, State, TrigAlpha};
