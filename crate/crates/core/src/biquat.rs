//! Biquaternion algebra in scalar-plus-vector form.
//!
//! A biquaternion is `F = f + F` with complex scalar `f` and complex 3-vector
//! `F`. The product is
//!
//! ```text
//! (f + F)∘(g + G) = (fg − (F,G)) + (fG + gF + [F,G])
//! ```
//!
//! where `(·,·)` is the bilinear (not hermitian) dot product and `[·,·]` the
//! cross product. The algebra is associative and noncommutative.
//!
//! Two conjugations are used throughout:
//! - complex conjugate `F̄ = f̄ + F̄` ([`Biquaternion::bar`]), a homomorphism;
//! - conjugate `F* = f̄ − F̄` ([`Biquaternion::star`]), an antihomomorphism.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// The imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);

const ZERO_C: C64 = C64::new(0.0, 0.0);

/// Complex 3-vector over the orthonormal basis `e₁, e₂, e₃`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3C(pub [C64; 3]);

impl Vec3C {
    pub const ZERO: Vec3C = Vec3C([ZERO_C; 3]);

    pub const fn new(a: C64, b: C64, c: C64) -> Self {
        Vec3C([a, b, c])
    }

    pub fn real(x: [f64; 3]) -> Self {
        Vec3C([x[0].into(), x[1].into(), x[2].into()])
    }

    /// `re + i·im` componentwise.
    pub fn from_parts(re: [f64; 3], im: [f64; 3]) -> Self {
        Vec3C([C64::new(re[0], im[0]), C64::new(re[1], im[1]), C64::new(re[2], im[2])])
    }

    pub fn basis(k: usize) -> Self {
        let mut v = Self::ZERO;
        v.0[k] = C64::new(1.0, 0.0);
        v
    }

    /// Bilinear dot product `Σ aᵢbᵢ` (no conjugation).
    #[inline]
    pub fn dot(&self, o: &Vec3C) -> C64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    #[inline]
    pub fn cross(&self, o: &Vec3C) -> Vec3C {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = o.0;
        Vec3C([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn conj(&self) -> Vec3C {
        Vec3C([self.0[0].conj(), self.0[1].conj(), self.0[2].conj()])
    }

    /// `‖F‖² = (F, F̄)`.
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, c: C64) -> Vec3C {
        Vec3C([self.0[0] * c, self.0[1] * c, self.0[2] * c])
    }

    pub fn re(&self) -> [f64; 3] {
        [self.0[0].re, self.0[1].re, self.0[2].re]
    }

    pub fn im(&self) -> [f64; 3] {
        [self.0[0].im, self.0[1].im, self.0[2].im]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Index<usize> for Vec3C {
    type Output = C64;
    fn index(&self, k: usize) -> &C64 {
        &self.0[k]
    }
}

impl IndexMut<usize> for Vec3C {
    fn index_mut(&mut self, k: usize) -> &mut C64 {
        &mut self.0[k]
    }
}

impl Add for Vec3C {
    type Output = Vec3C;
    #[inline]
    fn add(self, o: Vec3C) -> Vec3C {
        Vec3C([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3C {
    type Output = Vec3C;
    #[inline]
    fn sub(self, o: Vec3C) -> Vec3C {
        Vec3C([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3C {
    type Output = Vec3C;
    fn neg(self) -> Vec3C {
        Vec3C([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl AddAssign for Vec3C {
    fn add_assign(&mut self, o: Vec3C) {
        *self = *self + o;
    }
}

impl SubAssign for Vec3C {
    fn sub_assign(&mut self, o: Vec3C) {
        *self = *self - o;
    }
}

impl Mul<C64> for Vec3C {
    type Output = Vec3C;
    #[inline]
    fn mul(self, c: C64) -> Vec3C {
        self.scale(c)
    }
}

impl Mul<f64> for Vec3C {
    type Output = Vec3C;
    #[inline]
    fn mul(self, c: f64) -> Vec3C {
        Vec3C([self.0[0] * c, self.0[1] * c, self.0[2] * c])
    }
}

/// Complex quaternion `s + v`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Biquaternion {
    /// Scalar part `f`.
    pub s: C64,
    /// Vector part `F`.
    pub v: Vec3C,
}

impl Biquaternion {
    pub const ZERO: Biquaternion = Biquaternion {
        s: ZERO_C,
        v: Vec3C::ZERO,
    };
    pub const ONE: Biquaternion = Biquaternion {
        s: C64::new(1.0, 0.0),
        v: Vec3C::ZERO,
    };

    pub const fn new(s: C64, v: Vec3C) -> Self {
        Biquaternion { s, v }
    }

    /// Checked constructor: rejects NaN and infinite components.
    pub fn try_new(s: C64, v: Vec3C) -> Result<Self> {
        let q = Biquaternion { s, v };
        if q.is_finite() {
            Ok(q)
        } else {
            Err(Error::NonFinite(format!("{q}")))
        }
    }

    pub fn scalar(s: C64) -> Self {
        Biquaternion { s, v: Vec3C::ZERO }
    }

    pub fn vector(v: Vec3C) -> Self {
        Biquaternion { s: ZERO_C, v }
    }

    /// Basis element `e_k` as a pure vector biquaternion.
    pub fn basis(k: usize) -> Self {
        Self::vector(Vec3C::basis(k))
    }

    /// Quaternized event `Z = τ + i x`.
    pub fn event(tau: f64, x: [f64; 3]) -> Self {
        Biquaternion {
            s: tau.into(),
            v: Vec3C([C64::new(0.0, x[0]), C64::new(0.0, x[1]), C64::new(0.0, x[2])]),
        }
    }

    /// The four complex components `[f, F₁, F₂, F₃]`.
    pub fn components(&self) -> [C64; 4] {
        [self.s, self.v.0[0], self.v.0[1], self.v.0[2]]
    }

    pub fn from_components(c: [C64; 4]) -> Self {
        Biquaternion {
            s: c[0],
            v: Vec3C([c[1], c[2], c[3]]),
        }
    }

    /// Complex conjugate `f̄ + F̄`.
    pub fn bar(&self) -> Self {
        Biquaternion {
            s: self.s.conj(),
            v: self.v.conj(),
        }
    }

    /// Conjugate `f̄ − F̄`.
    pub fn star(&self) -> Self {
        Biquaternion {
            s: self.s.conj(),
            v: -self.v.conj(),
        }
    }

    /// Quaternion conjugate without complex conjugation, `f − F`.
    /// Equal to `bar(star(F))`.
    pub fn quat_conj(&self) -> Self {
        Biquaternion { s: self.s, v: -self.v }
    }

    /// Symmetric bilinear scalar product `f₁f₂ + (F₁,F₂)`.
    pub fn dot(&self, o: &Biquaternion) -> C64 {
        self.s * o.s + self.v.dot(&o.v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.s.norm_sqr() + self.v.norm_sqr()
    }

    /// `‖F‖ = √(|f|² + ‖F‖²)`.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨F⟩² = F∘F̄`. For an event `τ + ix` this is `τ² − ‖x‖²` with zero
    /// vector part.
    pub fn pseudonorm_sq(&self) -> Biquaternion {
        *self * self.bar()
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.v.is_finite()
    }

    pub fn scale(&self, c: C64) -> Self {
        Biquaternion {
            s: self.s * c,
            v: self.v * c,
        }
    }

    /// Largest componentwise modulus, used for sup-norm residuals.
    pub fn max_abs(&self) -> f64 {
        self.components().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl fmt::Display for Biquaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) + ({}, {}, {})", self.s, self.v.0[0], self.v.0[1], self.v.0[2])
    }
}

impl Add for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn add(self, o: Biquaternion) -> Biquaternion {
        Biquaternion {
            s: self.s + o.s,
            v: self.v + o.v,
        }
    }
}

impl Sub for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn sub(self, o: Biquaternion) -> Biquaternion {
        Biquaternion {
            s: self.s - o.s,
            v: self.v - o.v,
        }
    }
}

impl Neg for Biquaternion {
    type Output = Biquaternion;
    fn neg(self) -> Biquaternion {
        Biquaternion { s: -self.s, v: -self.v }
    }
}

impl AddAssign for Biquaternion {
    fn add_assign(&mut self, o: Biquaternion) {
        self.s += o.s;
        self.v += o.v;
    }
}

impl SubAssign for Biquaternion {
    fn sub_assign(&mut self, o: Biquaternion) {
        self.s -= o.s;
        self.v -= o.v;
    }
}

/// The quaternion product `∘`.
impl Mul for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn mul(self, o: Biquaternion) -> Biquaternion {
        Biquaternion {
            s: self.s * o.s - self.v.dot(&o.v),
            v: o.v * self.s + self.v * o.s + self.v.cross(&o.v),
        }
    }
}

impl Mul<C64> for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn mul(self, c: C64) -> Biquaternion {
        self.scale(c)
    }
}

impl Mul<f64> for Biquaternion {
    type Output = Biquaternion;
    #[inline]
    fn mul(self, c: f64) -> Biquaternion {
        Biquaternion {
            s: self.s * c,
            v: self.v * c,
        }
    }
}

impl std::iter::Sum for Biquaternion {
    fn sum<It: Iterator<Item = Biquaternion>>(iter: It) -> Self {
        iter.fold(Biquaternion::ZERO, |a, b| a + b)
    }
}

/// Relative distance `‖a − b‖ / max(1, ‖a‖, ‖b‖)`.
pub fn rel_dist(a: &Biquaternion, b: &Biquaternion) -> f64 {
    (*a - *b).norm() / 1f64.max(a.norm()).max(b.norm())
}
