//! Uniform spacetime grids, fields sampled on them, and the discrete mutual
//! complex gradients `D±` together with the wave operator `□`.
//!
//! Layout is τ-major: the flat index of node `(it, ix, iy, iz)` is
//! `((it·nx + ix)·ny + iy)·nz + iz`, so each τ-slice is a contiguous block.
//!
//! Derivatives use second-order central differences in the interior and
//! second-order one-sided stencils on the faces. Every derived field carries
//! a `margin`: nodes with all indices in `[margin, n − 1 − margin]` are the
//! valid interior, where only central stencils (applied to valid inputs) were
//! used. Residual audits reduce over that region only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::biquat::{Biquaternion, Vec3C, C64, I};
use crate::error::{Error, Result};

/// Values that can be differentiated and interpolated on a grid.
pub trait Linear:
    Copy + Send + Sync + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(&self) -> f64;
    fn finite(&self) -> bool;
}

impl Linear for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl Linear for C64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl Linear for Vec3C {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl Linear for Biquaternion {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

/// Uniform grid over `(τ, x, y, z)`. Axis 0 is τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid4 {
    /// Node counts `[nτ, nx, ny, nz]`.
    pub shape: [usize; 4],
    pub d_tau: f64,
    /// Spatial spacing, shared by the three space axes.
    pub h: f64,
    /// Coordinates of node `(0,0,0,0)`.
    pub origin: [f64; 4],
}

impl Grid4 {
    pub fn new(shape: [usize; 4], d_tau: f64, h: f64, origin: [f64; 4]) -> Result<Self> {
        if !(d_tau > 0.0 && d_tau.is_finite()) || !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacings must be positive, got dtau={d_tau}, h={h}"
            )));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidGrid(format!("empty axis in shape {shape:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("non-finite origin".into()));
        }
        Ok(Grid4 {
            shape,
            d_tau,
            h,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.d_tau
        } else {
            self.h
        }
    }

    pub fn strides(&self) -> [usize; 4] {
        let [_, nx, ny, nz] = self.shape;
        [nx * ny * nz, ny * nz, nz, 1]
    }

    #[inline]
    pub fn index(&self, idx: [usize; 4]) -> usize {
        let [_, nx, ny, nz] = self.shape;
        ((idx[0] * nx + idx[1]) * ny + idx[2]) * nz + idx[3]
    }

    #[inline]
    pub fn multi_index(&self, flat: usize) -> [usize; 4] {
        let [_, nx, ny, nz] = self.shape;
        let iz = flat % nz;
        let rest = flat / nz;
        let iy = rest % ny;
        let rest = rest / ny;
        let ix = rest % nx;
        [rest / nx, ix, iy, iz]
    }

    #[inline]
    pub fn coord(&self, idx: [usize; 4]) -> [f64; 4] {
        let mut c = [0.0; 4];
        for a in 0..4 {
            c[a] = self.origin[a] + idx[a] as f64 * self.spacing(a);
        }
        c
    }

    pub fn coord_of(&self, flat: usize) -> [f64; 4] {
        self.coord(self.multi_index(flat))
    }

    /// Fractional index of a point, the exact inverse of [`Grid4::coord`].
    pub fn locate(&self, point: [f64; 4]) -> [f64; 4] {
        let mut u = [0.0; 4];
        for a in 0..4 {
            u[a] = (point[a] - self.origin[a]) / self.spacing(a);
        }
        u
    }

    /// Coordinate of the last node along each axis.
    pub fn upper(&self) -> [f64; 4] {
        self.coord([
            self.shape[0] - 1,
            self.shape[1] - 1,
            self.shape[2] - 1,
            self.shape[3] - 1,
        ])
    }

    pub fn cfl_ratio(&self) -> f64 {
        self.d_tau / self.h
    }

    /// Errors unless every axis in `axes` has at least `min` nodes.
    pub fn require_nodes(&self, axes: std::ops::Range<usize>, min: usize) -> Result<()> {
        for a in axes {
            if self.shape[a] < min {
                return Err(Error::GridTooSmall {
                    axis: a,
                    nodes: self.shape[a],
                    required: min,
                });
            }
        }
        Ok(())
    }

    pub fn same_as(&self, o: &Grid4) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
        self.shape == o.shape
            && close(self.d_tau, o.d_tau)
            && close(self.h, o.h)
            && (0..4).all(|k| close(self.origin[k], o.origin[k]))
    }

    pub fn check_same(&self, o: &Grid4) -> Result<()> {
        if self.same_as(o) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {o:?}")))
        }
    }

    /// Whether `idx` is at least `margin` nodes from every face. Singleton
    /// axes (a τ-slice) are not trimmed.
    #[inline]
    pub fn in_margin(&self, idx: [usize; 4], margin: usize) -> bool {
        (0..4).all(|a| self.shape[a] == 1 || (idx[a] >= margin && idx[a] + margin < self.shape[a]))
    }

    /// Grid with the same extent along every axis and half the spacings.
    pub fn refined(&self) -> Grid4 {
        Grid4 {
            shape: self.shape.map(|n| 2 * n - 1),
            d_tau: self.d_tau / 2.0,
            h: self.h / 2.0,
            origin: self.origin,
        }
    }

    /// Single τ-slice grid (used by the time stepper).
    pub fn slice_grid(&self, it: usize) -> Grid4 {
        let mut origin = self.origin;
        origin[0] += it as f64 * self.d_tau;
        Grid4 {
            shape: [1, self.shape[1], self.shape[2], self.shape[3]],
            d_tau: self.d_tau,
            h: self.h,
            origin,
        }
    }
}

/// Residual summary over the valid region of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

/// Values of type `T` at every node of a [`Grid4`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid4,
    values: Vec<T>,
    margin: usize,
}

pub type BiquatField = Field<Biquaternion>;
pub type ComplexField = Field<C64>;
pub type RealField = Field<f64>;
pub type VectorField = Field<Vec3C>;

impl<T: Linear> Field<T> {
    pub fn zeros(grid: Grid4) -> Self {
        Field {
            grid,
            values: vec![T::default(); grid.len()],
            margin: 0,
        }
    }

    pub fn from_values(grid: Grid4, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.finite()) {
            return Err(Error::NonFinite(format!("sample at node {:?}", grid.multi_index(k))));
        }
        Ok(Field {
            grid,
            values,
            margin: 0,
        })
    }

    /// Samples `f` at every node coordinate `[τ, x, y, z]`.
    pub fn from_fn<F>(grid: Grid4, f: F) -> Result<Self>
    where
        F: Fn([f64; 4]) -> T + Sync + Send,
    {
        let values: Vec<T> = (0..grid.len()).into_par_iter().map(|k| f(grid.coord_of(k))).collect();
        Self::from_values(grid, values)
    }

    pub(crate) fn from_parts(grid: Grid4, values: Vec<T>, margin: usize) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values, margin }
    }

    pub fn grid(&self) -> &Grid4 {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn with_margin(mut self, margin: usize) -> Self {
        self.margin = margin;
        self
    }

    pub fn at(&self, idx: [usize; 4]) -> T {
        self.values[self.grid.index(idx)]
    }

    pub fn is_valid(&self, idx: [usize; 4]) -> bool {
        self.grid.in_margin(idx, self.margin)
    }

    pub fn map<U: Linear, F>(&self, f: F) -> Field<U>
    where
        F: Fn(&T) -> U + Sync + Send,
    {
        Field {
            grid: self.grid,
            values: self.values.par_iter().map(f).collect(),
            margin: self.margin,
        }
    }

    /// Nodewise combination; the result keeps the larger margin.
    pub fn zip_map<S: Linear, U: Linear, F>(&self, other: &Field<S>, f: F) -> Result<Field<U>>
    where
        F: Fn(&T, &S) -> U + Sync + Send,
    {
        self.grid.check_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(a, b)| f(a, b))
                .collect(),
            margin: self.margin.max(other.margin),
        })
    }

    pub fn add(&self, other: &Field<T>) -> Result<Field<T>> {
        self.zip_map(other, |a, b| *a + *b)
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Field<T>> {
        self.zip_map(other, |a, b| *a - *b)
    }

    /// Max and mean of `|value|` over the valid interior, summed in flat
    /// index order.
    pub fn stats(&self) -> Stats {
        self.stats_where(|_| true)
    }

    /// As [`Field::stats`], restricted further by `keep(flat_index)`.
    pub fn stats_where<P: Fn(usize) -> bool>(&self, keep: P) -> Stats {
        let mut max = 0.0f64;
        let mut sum = 0.0;
        let mut count = 0;
        for (k, v) in self.values.iter().enumerate() {
            if self.grid.in_margin(self.grid.multi_index(k), self.margin) && keep(k) {
                let m = v.magnitude();
                max = max.max(m);
                sum += m;
                count += 1;
            }
        }
        Stats {
            max,
            mean: if count > 0 { sum / count as f64 } else { 0.0 },
            count,
        }
    }

    /// Sup norm over the valid interior.
    pub fn max_norm(&self) -> f64 {
        self.stats().max
    }

    /// First partial derivative along `axis` (0 = τ).
    pub fn partial(&self, axis: usize) -> Result<Field<T>> {
        self.grid.require_nodes(axis..axis + 1, 3)?;
        let g = self.grid;
        let values = (0..g.len())
            .into_par_iter()
            .map(|k| first_partial(&self.values, &g, k, g.multi_index(k), axis))
            .collect();
        Ok(Field::from_parts(g, values, self.margin + 1))
    }

    /// `∂²τ − Δ` with compact three-point stencils on every axis.
    pub fn wave_operator(&self) -> Result<Field<T>> {
        self.grid.require_nodes(0..4, 3)?;
        let g = self.grid;
        let values = (0..g.len())
            .into_par_iter()
            .map(|k| {
                let idx = g.multi_index(k);
                let mut acc = second_partial(&self.values, &g, k, idx, 0);
                for a in 1..4 {
                    acc = acc - second_partial(&self.values, &g, k, idx, a);
                }
                acc
            })
            .collect();
        Ok(Field::from_parts(g, values, self.margin + 1))
    }

    /// Value at an arbitrary point, or `None` outside the grid box.
    pub fn sample(&self, point: [f64; 4], interp: Interpolation) -> Option<T> {
        let g = &self.grid;
        let u = g.locate(point);
        let mut nodes = [[0usize; 4]; 4];
        let mut weights = [[0.0f64; 4]; 4];
        let mut counts = [0usize; 4];
        for a in 0..4 {
            let n = g.shape[a];
            let ua = u[a];
            let tol = 1e-9;
            if ua < -tol || ua > (n - 1) as f64 + tol {
                return None;
            }
            let ua = ua.clamp(0.0, (n - 1) as f64);
            let base = ua.floor();
            let frac = ua - base;
            let i0 = base as usize;
            if frac < 1e-12 || n == 1 {
                nodes[a][0] = i0.min(n - 1);
                weights[a][0] = 1.0;
                counts[a] = 1;
            } else if frac > 1.0 - 1e-12 {
                nodes[a][0] = (i0 + 1).min(n - 1);
                weights[a][0] = 1.0;
                counts[a] = 1;
            } else if interp == Interpolation::Linear || n < 4 {
                nodes[a][0] = i0;
                nodes[a][1] = i0 + 1;
                weights[a][0] = 1.0 - frac;
                weights[a][1] = frac;
                counts[a] = 2;
            } else {
                // four-point Lagrange stencil, shifted inward at the faces
                let b = i0.saturating_sub(1).min(n - 4);
                for m in 0..4 {
                    nodes[a][m] = b + m;
                    let mut w = 1.0;
                    for l in 0..4 {
                        if l != m {
                            w *= (ua - (b + l) as f64) / (m as f64 - l as f64);
                        }
                    }
                    weights[a][m] = w;
                }
                counts[a] = 4;
            }
        }
        let mut acc = T::default();
        for p in 0..counts[0] {
            for q in 0..counts[1] {
                let wpq = weights[0][p] * weights[1][q];
                for r in 0..counts[2] {
                    let wpqr = wpq * weights[2][r];
                    for s in 0..counts[3] {
                        let idx = [nodes[0][p], nodes[1][q], nodes[2][r], nodes[3][s]];
                        acc = acc + self.values[g.index(idx)] * (wpqr * weights[3][s]);
                    }
                }
            }
        }
        Some(acc)
    }
}

/// Point interpolation scheme for [`Field::sample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Multilinear (trilinear in space, linear in τ).
    Linear,
    /// Four-point Lagrange per axis.
    #[default]
    Cubic,
}

#[inline]
fn first_partial<T: Linear>(vals: &[T], g: &Grid4, k: usize, idx: [usize; 4], axis: usize) -> T {
    let n = g.shape[axis];
    let st = g.strides()[axis];
    let inv = 0.5 / g.spacing(axis);
    let i = idx[axis];
    if i == 0 {
        (vals[k + st] * 4.0 - vals[k] * 3.0 - vals[k + 2 * st]) * inv
    } else if i == n - 1 {
        (vals[k] * 3.0 - vals[k - st] * 4.0 + vals[k - 2 * st]) * inv
    } else {
        (vals[k + st] - vals[k - st]) * inv
    }
}

#[inline]
fn second_partial<T: Linear>(vals: &[T], g: &Grid4, k: usize, idx: [usize; 4], axis: usize) -> T {
    let n = g.shape[axis];
    let st = g.strides()[axis];
    let d = g.spacing(axis);
    let inv = 1.0 / (d * d);
    let i = idx[axis];
    if i > 0 && i < n - 1 {
        (vals[k + st] + vals[k - st] - vals[k] * 2.0) * inv
    } else if n >= 4 {
        if i == 0 {
            (vals[k] * 2.0 - vals[k + st] * 5.0 + vals[k + 2 * st] * 4.0 - vals[k + 3 * st]) * inv
        } else {
            (vals[k] * 2.0 - vals[k - st] * 5.0 + vals[k - 2 * st] * 4.0 - vals[k - 3 * st]) * inv
        }
    } else if i == 0 {
        (vals[k] + vals[k + 2 * st] - vals[k + st] * 2.0) * inv
    } else {
        (vals[k] + vals[k - 2 * st] - vals[k - st] * 2.0) * inv
    }
}

/// `Σⱼ eⱼ∘∂ⱼF = −div F + grad f + rot F`, given the three spatial partials of
/// a biquaternion field at one node.
#[inline]
pub fn nabla_product(d: &[Biquaternion; 3]) -> Biquaternion {
    let div = d[0].v[0] + d[1].v[1] + d[2].v[2];
    let grad = Vec3C([d[0].s, d[1].s, d[2].s]);
    let rot = Vec3C([d[1].v[2] - d[2].v[1], d[2].v[0] - d[0].v[2], d[0].v[1] - d[1].v[0]]);
    Biquaternion::new(-div, grad + rot)
}

/// Sign selector for the mutual complex gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

fn complex_gradient(f: &BiquatField, sign: Sign) -> Result<BiquatField> {
    let g = *f.grid();
    g.require_nodes(0..4, 3)?;
    let vals = f.values();
    let i_sign = I * sign.value();
    let values = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let idx = g.multi_index(k);
            let dt = first_partial(vals, &g, k, idx, 0);
            let ds = [
                first_partial(vals, &g, k, idx, 1),
                first_partial(vals, &g, k, idx, 2),
                first_partial(vals, &g, k, idx, 3),
            ];
            dt + nabla_product(&ds) * i_sign
        })
        .collect();
    Ok(Field::from_parts(g, values, f.margin() + 1))
}

/// `D⁺F = (∂τf − i div F) + ∂τF + i grad f + i rot F`.
pub fn d_plus(f: &BiquatField) -> Result<BiquatField> {
    complex_gradient(f, Sign::Plus)
}

/// `D⁻F = (∂τf + i div F) + ∂τF − i grad f − i rot F`.
pub fn d_minus(f: &BiquatField) -> Result<BiquatField> {
    complex_gradient(f, Sign::Minus)
}

pub fn d_sign(f: &BiquatField, sign: Sign) -> Result<BiquatField> {
    complex_gradient(f, sign)
}

/// `□F = ∂²τF − ΔF` componentwise, compact stencils.
pub fn box_direct(f: &BiquatField) -> Result<BiquatField> {
    f.wave_operator()
}

/// `□F` as the composition `D⁻∘D⁺`.
pub fn box_factored(f: &BiquatField) -> Result<BiquatField> {
    d_minus(&d_plus(f)?)
}

/// Spatial half of `D±` on a single τ-slice: `±i Σⱼ eⱼ∘∂ⱼF`.
/// `slice` must live on a grid with `nτ = 1`.
pub fn spatial_gradient(slice: &BiquatField, sign: Sign) -> Result<BiquatField> {
    let g = *slice.grid();
    g.require_nodes(1..4, 3)?;
    let vals = slice.values();
    let i_sign = I * sign.value();
    let values = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let idx = g.multi_index(k);
            let ds = [
                first_partial(vals, &g, k, idx, 1),
                first_partial(vals, &g, k, idx, 2),
                first_partial(vals, &g, k, idx, 3),
            ];
            nabla_product(&ds) * i_sign
        })
        .collect();
    Ok(Field::from_parts(g, values, slice.margin() + 1))
}

/// Spatial divergence of a vector field.
pub fn divergence(f: &VectorField) -> Result<ComplexField> {
    let g = *f.grid();
    g.require_nodes(1..4, 3)?;
    let vals = f.values();
    let values = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let idx = g.multi_index(k);
            (1..4)
                .map(|a| first_partial(vals, &g, k, idx, a)[a - 1])
                .fold(C64::default(), |x, y| x + y)
        })
        .collect();
    Ok(Field::from_parts(g, values, f.margin() + 1))
}

/// Spatial gradient of a scalar field.
pub fn gradient(f: &ComplexField) -> Result<VectorField> {
    let g = *f.grid();
    g.require_nodes(1..4, 3)?;
    let vals = f.values();
    let values = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let idx = g.multi_index(k);
            Vec3C([
                first_partial(vals, &g, k, idx, 1),
                first_partial(vals, &g, k, idx, 2),
                first_partial(vals, &g, k, idx, 3),
            ])
        })
        .collect();
    Ok(Field::from_parts(g, values, f.margin() + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biquat::tests::random_bq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, d: f64) -> Grid4 {
        Grid4::new([n; 4], d, d, [0.0; 4]).unwrap()
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid4::new([3, 4, 5, 6], 0.1, 0.2, [1.0, -1.0, 0.5, 2.0]).unwrap();
        for k in 0..g.len() {
            let idx = g.multi_index(k);
            assert_eq!(g.index(idx), k);
            let u = g.locate(g.coord(idx));
            for a in 0..4 {
                assert!((u[a] - idx[a] as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nabla_product_matches_basis_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let d = [random_bq(&mut rng), random_bq(&mut rng), random_bq(&mut rng)];
            let oracle: Biquaternion = (0..3).map(|j| Biquaternion::basis(j) * d[j]).sum();
            assert!(crate::biquat::rel_dist(&nabla_product(&d), &oracle) < 1e-14);
        }
    }

    #[test]
    fn constant_fields_have_zero_gradients() {
        let g = grid(4, 0.3);
        let c = Biquaternion::new(C64::new(1.0, 2.0), Vec3C::real([3.0, -1.0, 0.5]));
        let f = BiquatField::from_fn(g, |_| c).unwrap();
        for d in [
            d_plus(&f).unwrap(),
            d_minus(&f).unwrap(),
            box_direct(&f).unwrap(),
            box_factored(&f).unwrap(),
        ] {
            assert!(d.values().iter().all(|v| v.norm() < 1e-12));
        }
    }

    #[test]
    fn d_plus_examples() {
        let g = grid(5, 0.25);
        let f = BiquatField::from_fn(g, |c| Biquaternion::scalar(c[0].into())).unwrap();
        let d = d_plus(&f).unwrap();
        assert!(d.values().iter().all(|v| (*v - Biquaternion::ONE).norm() < 1e-12));

        // F = e₁ x₂ → i rot F = −i e₃
        let f = BiquatField::from_fn(g, |c| Biquaternion::vector(Vec3C::real([c[2], 0.0, 0.0]))).unwrap();
        let d = d_plus(&f).unwrap();
        let expect = Biquaternion::vector(Vec3C::new(C64::default(), C64::default(), -I));
        assert!(d.values().iter().all(|v| (*v - expect).norm() < 1e-12));
    }

    #[test]
    fn d_minus_examples() {
        let g = grid(5, 0.25);
        let f = BiquatField::from_fn(g, |_| Biquaternion::basis(0)).unwrap();
        assert!(d_minus(&f).unwrap().values().iter().all(|v| v.norm() < 1e-12));
        let f = BiquatField::from_fn(g, |c| Biquaternion::scalar(c[1].into())).unwrap();
        let expect = Biquaternion::vector(Vec3C::new(-I, C64::default(), C64::default()));
        assert!(d_minus(&f)
            .unwrap()
            .values()
            .iter()
            .all(|v| (*v - expect).norm() < 1e-12));
    }

    #[test]
    fn box_direct_quadratic() {
        let g = grid(6, 0.2);
        let f = BiquatField::from_fn(g, |c| {
            Biquaternion::scalar((c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3]).into())
        })
        .unwrap();
        let b = box_direct(&f).unwrap();
        // quadratics are differentiated exactly, boundary stencils included
        assert!(b.values().iter().all(|v| (v.s - C64::new(-4.0, 0.0)).norm() < 1e-9));
    }

    #[test]
    fn plane_wave_is_null_for_box() {
        // with dτ = h the compact stencils annihilate a diagonal wave exactly
        let g = grid(9, 0.125);
        let f = BiquatField::from_fn(g, |c| Biquaternion::scalar((c[0] - c[1]).cos().into())).unwrap();
        assert!(box_direct(&f).unwrap().max_norm() < 1e-9);

        let mut errs = vec![];
        for n in [9usize, 17] {
            let h = 1.0 / (n - 1) as f64;
            let g = Grid4::new([n; 4], 0.5 * h, h, [0.0; 4]).unwrap();
            let f = BiquatField::from_fn(g, |c| Biquaternion::scalar((c[0] - c[1]).cos().into())).unwrap();
            errs.push(box_direct(&f).unwrap().max_norm());
        }
        let ratio = errs[0] / errs[1];
        assert!(errs[1] < 1e-3 && (3.5..4.5).contains(&ratio), "{errs:?}");
    }

    #[test]
    fn too_small_grid() {
        let g = Grid4::new([3, 2, 3, 3], 0.1, 0.1, [0.0; 4]).unwrap();
        let f = BiquatField::zeros(g);
        assert!(matches!(d_plus(&f), Err(Error::GridTooSmall { axis: 1, .. })));
        assert!(matches!(box_direct(&f), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn margins_track_stencil_depth() {
        let g = grid(7, 0.1);
        let f = BiquatField::zeros(g);
        assert_eq!(d_plus(&f).unwrap().margin(), 1);
        assert_eq!(box_factored(&f).unwrap().margin(), 2);
        assert_eq!(box_direct(&f).unwrap().margin(), 1);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_low_order_polynomials() {
        let g = Grid4::new([5, 6, 5, 5], 0.2, 0.3, [0.0, -0.5, 0.0, 0.1]).unwrap();
        let cubic = |c: [f64; 4]| c[0].powi(3) - 2.0 * c[1] * c[1] * c[2] + c[3] + c[1] * c[0];
        let f = RealField::from_fn(g, cubic).unwrap();
        for k in (0..g.len()).step_by(7) {
            let c = g.coord_of(k);
            assert_eq!(f.sample(c, Interpolation::Cubic), Some(f.values()[k]));
        }
        let p = [0.37, 0.11, 0.52, 0.77];
        let v = f.sample(p, Interpolation::Cubic).unwrap();
        assert!((v - cubic(p)).abs() < 1e-12);
        let lin = RealField::from_fn(g, |c| 2.0 * c[0] - c[1] + 0.5 * c[2] + c[3]).unwrap();
        let v = lin.sample(p, Interpolation::Linear).unwrap();
        assert!((v - (2.0 * p[0] - p[1] + 0.5 * p[2] + p[3])).abs() < 1e-12);
        assert!(f.sample([10.0, 0.0, 0.0, 0.0], Interpolation::Linear).is_none());
    }
}
