//! Numerical model of the electro-gravimagnetic (EGM) field written in
//! biquaternion form.
//!
//! Everything is built on one algebra: complex scalar plus complex 3-vector,
//! multiplied with `(f + F)∘(g + G) = (fg − (F,G)) + (fG + gF + [F,G])`.
//! Field strengths, charge-currents, force-power densities and Lorentz
//! transformations are all biquaternions, and the mutual complex gradients
//! `D± = ∂τ ± i∇` act on them through the same product.
//!
//! Module map:
//! - [`biquat`]: the algebra itself.
//! - [`grid`]: uniform spacetime grids, fields sampled on them, `D±` and `□`.
//! - [`emfield`]: strength / charge-current / energy-momentum and the
//!   conservation-law residuals.
//! - [`lorentz`]: boosts and rotations as sandwich products, field transforms
//!   and covariance audits.
//! - [`quadrature`] and [`cauchy`]: light-cone convolutions, the generalized
//!   Kirchhoff formula and the Picard solver for the transformation equation.
//! - [`interact`]: force-power, Newton-law analogs, first law and
//!   interaction energy.
//! - [`fieldio`]: CSV field dumps.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod biquat;
pub mod cauchy;
pub mod emfield;
pub mod error;
pub mod fieldio;
pub mod grid;
pub mod interact;
pub mod lorentz;
pub mod quadrature;

pub use biquat::{Biquaternion, Vec3C, C64, I};
pub use error::{Error, Result};
pub use grid::{BiquatField, ComplexField, Field, Grid4, RealField};
