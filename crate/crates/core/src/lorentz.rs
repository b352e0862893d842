//! Lorentz transformations as biquaternion sandwiches.
//!
//! A boost along the real unit vector `e` is `U = ch θ + ie sh θ` with
//! `v = th 2θ`; a rotation by `2φ` about `e` is `W = cos φ + e sin φ`. The
//! general element is `L = W∘U = ch(θ − iφ) + ie sh(θ − iφ)`.
//!
//! Events `Z = τ + ix` map as `Z' = L∘Z∘L*`, with inverse `Z = L̄*∘Z'∘L̄`.
//! Under this map the gradients transform as `D⁺' = L̄∘D⁺∘L̄*`, so the
//! equation `D⁺A = Θ` keeps its form when
//!
//! ```text
//! A' = L∘A∘L̄*        (strength, FieldRule::Strength)
//! Θ' = L̄∘Θ∘L̄*       (source,   FieldRule::Source)
//! ```
//!
//! The sandwich `K' = L̄*∘K∘L` ([`FieldRule::Printed`]) is also provided. It
//! agrees with the covariant rules for pure rotations and for fields that
//! vary only along the boost axis, and is audited against them elsewhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biquat::{Biquaternion, Vec3C, C64, I};
use crate::error::{Error, Result};
use crate::grid::{self, BiquatField, Field, Grid4, Interpolation, Stats};

/// Parameters of `L`: unit axis `e`, boost half-rapidity `θ` and rotation
/// half-angle `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    e: [f64; 3],
    theta: f64,
    phi: f64,
}

impl TransformParams {
    pub fn new(e: [f64; 3], theta: f64, phi: f64) -> Result<Self> {
        let norm = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-10 {
            return Err(Error::BadUnitVector { norm });
        }
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidParameter("non-finite transform parameter".into()));
        }
        Ok(TransformParams {
            e: e.map(|x| x / norm),
            theta,
            phi,
        })
    }

    /// From the dimensionless velocity `v`, `|v| < 1`.
    pub fn from_velocity(v: f64, e: [f64; 3], phi: f64) -> Result<Self> {
        if !(v.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("|v| must be < 1, got {v}")));
        }
        Self::new(e, 0.5 * v.atanh(), phi)
    }

    pub fn e(&self) -> [f64; 3] {
        self.e
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn velocity(&self) -> f64 {
        (2.0 * self.theta).tanh()
    }

    /// `1/√(1 − v²) = ch 2θ`.
    pub fn gamma(&self) -> f64 {
        (2.0 * self.theta).cosh()
    }
}

/// `L` with its three conjugates cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzElement {
    pub params: TransformParams,
    pub l: Biquaternion,
    pub l_star: Biquaternion,
    pub l_bar: Biquaternion,
    pub l_bar_star: Biquaternion,
}

pub fn make_transform(p: TransformParams) -> LorentzElement {
    let e = Vec3C::real(p.e);
    let w = Biquaternion::new(C64::new(p.phi.cos(), 0.0), e * p.phi.sin());
    let u = Biquaternion::new(C64::new(p.theta.cosh(), 0.0), e * (I * p.theta.sinh()));
    LorentzElement::from_biquaternion(p, w * u)
}

impl LorentzElement {
    fn from_biquaternion(params: TransformParams, l: Biquaternion) -> Self {
        LorentzElement {
            params,
            l,
            l_star: l.star(),
            l_bar: l.bar(),
            l_bar_star: l.quat_conj(),
        }
    }

    pub fn identity() -> Self {
        make_transform(TransformParams {
            e: [1.0, 0.0, 0.0],
            theta: 0.0,
            phi: 0.0,
        })
    }

    /// `ch(θ − iφ) + ie sh(θ − iφ)` evaluated directly.
    pub fn closed_form(p: &TransformParams) -> Biquaternion {
        let z = C64::new(p.theta, -p.phi);
        Biquaternion::new(z.cosh(), Vec3C::real(p.e) * (I * z.sinh()))
    }

    /// `max(|L̄∘L* − 1|, |L*∘L̄ − 1|)`.
    pub fn unitarity_defect(&self) -> f64 {
        let a = (self.l_bar * self.l_star - Biquaternion::ONE).norm();
        let b = (self.l_star * self.l_bar - Biquaternion::ONE).norm();
        a.max(b)
    }
}

/// `Z' = L∘Z∘L*`.
pub fn transform_event(l: &LorentzElement, z: Biquaternion) -> Biquaternion {
    if z.s.im.abs() > 1e-12 || z.v.re().iter().any(|x| x.abs() > 1e-12) {
        log::warn!("transform_event: {z} is not of the form τ + ix");
    }
    l.l * z * l.l_star
}

/// `Z = L̄*∘Z'∘L̄`.
pub fn inverse_event(l: &LorentzElement, z: Biquaternion) -> Biquaternion {
    l.l_bar_star * z * l.l_bar
}

/// `(τ, x)` of an event biquaternion.
pub fn event_coords(z: &Biquaternion) -> [f64; 4] {
    let x = z.v.im();
    [z.s.re, x[0], x[1], x[2]]
}

/// How a field value is carried between frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldRule {
    /// `K' = L̄*∘K∘L`.
    Printed,
    /// `A' = L∘A∘L̄*`.
    Strength,
    /// `Θ' = L̄∘Θ∘L̄*`.
    Source,
}

pub fn transform_value(l: &LorentzElement, k: Biquaternion, rule: FieldRule) -> Biquaternion {
    match rule {
        FieldRule::Printed => l.l_bar_star * k * l.l,
        FieldRule::Strength => l.l * k * l.l_bar_star,
        FieldRule::Source => l.l_bar * k * l.l_bar_star,
    }
}

pub fn inverse_value(l: &LorentzElement, k: Biquaternion, rule: FieldRule) -> Biquaternion {
    match rule {
        FieldRule::Printed => l.l * k * l.l_bar_star,
        FieldRule::Strength => l.l_bar_star * k * l.l,
        FieldRule::Source => l.l_star * k * l.l,
    }
}

/// `K' = L̄*∘K∘L`.
pub fn transform_field_value(l: &LorentzElement, k: Biquaternion) -> Biquaternion {
    transform_value(l, k, FieldRule::Printed)
}

/// A field carried to a target grid, with the nodes whose preimage fell
/// inside the source grid.
#[derive(Debug, Clone)]
pub struct TransformedField {
    pub field: BiquatField,
    pub covered: Vec<bool>,
    pub covered_fraction: f64,
}

/// Pullback transform: each target node `Z'` takes the transformed value of
/// `F` at the preimage `Z = L̄*∘Z'∘L̄`. Uncovered nodes are set to zero.
pub fn transform_field_masked(
    l: &LorentzElement,
    f: &BiquatField,
    target: Grid4,
    rule: FieldRule,
    interp: Interpolation,
) -> TransformedField {
    let samples: Vec<Option<Biquaternion>> = (0..target.len())
        .into_par_iter()
        .map(|k| {
            let c = target.coord_of(k);
            let z = inverse_event(l, Biquaternion::event(c[0], [c[1], c[2], c[3]]));
            f.sample(event_coords(&z), interp).map(|v| transform_value(l, v, rule))
        })
        .collect();
    let covered: Vec<bool> = samples.iter().map(Option::is_some).collect();
    let n_cov = covered.iter().filter(|&&c| c).count();
    let values = samples.into_iter().map(Option::unwrap_or_default).collect();
    TransformedField {
        field: Field::from_parts(target, values, 0),
        covered,
        covered_fraction: n_cov as f64 / target.len() as f64,
    }
}

/// As [`transform_field_masked`], failing unless every target node is covered.
pub fn transform_field(
    l: &LorentzElement,
    f: &BiquatField,
    target: Grid4,
    rule: FieldRule,
    interp: Interpolation,
) -> Result<BiquatField> {
    let t = transform_field_masked(l, f, target, rule, interp);
    if t.covered_fraction < 1.0 {
        return Err(Error::Coverage {
            uncovered_fraction: 1.0 - t.covered_fraction,
        });
    }
    Ok(t.field)
}

/// Printed boost formula for the strength vector.
pub fn rel_strength(a: Vec3C, p: &TransformParams) -> Vec3C {
    let e = Vec3C::real(p.e);
    let ea = e.dot(&a);
    (a - e * ea) + e * (ea * p.gamma())
}

/// Printed boost formulas for `(ρ, J)`.
pub fn rel_charge_current(rho: C64, j: Vec3C, p: &TransformParams) -> (C64, Vec3C) {
    let (e, v, g) = (Vec3C::real(p.e), p.velocity(), p.gamma());
    let ej = e.dot(&j);
    ((rho - ej * v) * g, (j - e * ej) + e * ((ej - rho * v) * g))
}

/// Printed boost formulas for power and force `(M, F)`.
pub fn rel_force_power(m: C64, f: Vec3C, p: &TransformParams) -> (C64, Vec3C) {
    let (e, v, g) = (Vec3C::real(p.e), p.velocity(), p.gamma());
    let ef = e.dot(&f);
    ((m + ef * v) * g, (f - e * ef) + e * ((ef - m * v) * g))
}

/// Options for [`covariance_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceOptions {
    pub interpolation: Interpolation,
    /// Fail with a coverage error below this covered fraction.
    pub min_coverage: f64,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        CovarianceOptions {
            interpolation: Interpolation::Cubic,
            min_coverage: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub v: f64,
    pub e: [f64; 3],
    pub phi: f64,
    /// `‖D⁺A' − Θ'‖` with the covariant rules.
    pub residual_max: f64,
    pub residual_mean: f64,
    /// Same residual with `K' = L̄*∘K∘L` for both fields.
    pub printed_rule_residual_max: f64,
    /// `max |cubic − linear|` over the transformed samples.
    pub interpolation_error_max: f64,
    /// `‖D⁺A − Θ‖` in the source frame.
    pub source_residual_max: f64,
    pub covered_fraction: f64,
    pub interior_nodes: usize,
    pub refinement_ratio: Option<f64>,
}

/// Nodes at least one step inside the target grid whose full first-derivative
/// stencil was covered.
fn stencil_mask(g: &Grid4, covered: &[bool]) -> Vec<bool> {
    let st = g.strides();
    (0..g.len())
        .map(|k| {
            let idx = g.multi_index(k);
            g.in_margin(idx, 1) && covered[k] && (0..4).all(|a| covered[k - st[a]] && covered[k + st[a]])
        })
        .collect()
}

fn masked_stats(f: &BiquatField, mask: &[bool]) -> Stats {
    f.stats_where(|k| mask[k])
}

/// Checks that `D⁺A = Θ` keeps its form in the frame of `l`: both fields are
/// pulled back onto `target` and the residual is taken there.
pub fn covariance_residual(
    l: &LorentzElement,
    a: &BiquatField,
    theta: &BiquatField,
    target: Grid4,
    opts: CovarianceOptions,
) -> Result<CovarianceReport> {
    a.grid().check_same(theta.grid())?;
    let interp = opts.interpolation;
    let a_t = transform_field_masked(l, a, target, FieldRule::Strength, interp);
    if a_t.covered_fraction < opts.min_coverage || a_t.covered_fraction == 0.0 {
        return Err(Error::Coverage {
            uncovered_fraction: 1.0 - a_t.covered_fraction,
        });
    }
    let t_t = transform_field_masked(l, theta, target, FieldRule::Source, interp);
    let mask = stencil_mask(&target, &a_t.covered);
    let res = grid::d_plus(&a_t.field)?.sub(&t_t.field)?;
    let stats = masked_stats(&res, &mask);

    let a_p = transform_field_masked(l, a, target, FieldRule::Printed, interp);
    let t_p = transform_field_masked(l, theta, target, FieldRule::Printed, interp);
    let res_p = grid::d_plus(&a_p.field)?.sub(&t_p.field)?;
    let printed = masked_stats(&res_p, &mask).max;

    let other = match interp {
        Interpolation::Cubic => Interpolation::Linear,
        Interpolation::Linear => Interpolation::Cubic,
    };
    let a_o = transform_field_masked(l, a, target, FieldRule::Strength, other);
    let t_o = transform_field_masked(l, theta, target, FieldRule::Source, other);
    let mut interp_err = 0.0f64;
    for k in 0..target.len() {
        if a_t.covered[k] {
            interp_err = interp_err
                .max((a_t.field.values()[k] - a_o.field.values()[k]).norm())
                .max((t_t.field.values()[k] - t_o.field.values()[k]).norm());
        }
    }

    let source_res = grid::d_plus(a)?.sub(theta)?.max_norm();
    Ok(CovarianceReport {
        v: l.params.velocity(),
        e: l.params.e,
        phi: l.params.phi,
        residual_max: stats.max,
        residual_mean: stats.mean,
        printed_rule_residual_max: printed,
        interpolation_error_max: interp_err,
        source_residual_max: source_res,
        covered_fraction: a_t.covered_fraction,
        interior_nodes: stats.count,
        refinement_ratio: None,
    })
}

/// Sandwich candidates the component formulas are compared against.
pub const SANDWICHES: [&str; 5] = [
    "field_printed",
    "field_strength",
    "field_source",
    "event_forward",
    "event_inverse",
];

fn sandwich(l: &LorentzElement, k: Biquaternion, which: usize) -> Biquaternion {
    match which {
        0 => transform_value(l, k, FieldRule::Printed),
        1 => transform_value(l, k, FieldRule::Strength),
        2 => transform_value(l, k, FieldRule::Source),
        3 => l.l * k * l.l_star,
        _ => l.l_bar_star * k * l.l_bar,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDeviation {
    pub sandwich: String,
    /// Largest relative deviation of the scalar quantity.
    pub scalar_max: f64,
    /// Largest relative deviation of the vector quantity.
    pub vector_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaAudit {
    pub formula: String,
    pub samples: usize,
    pub candidates: Vec<CandidateDeviation>,
}

impl FormulaAudit {
    /// Sandwiches reproducing the formula in full (scalar and vector).
    pub fn full_matches(&self, tol: f64) -> Vec<&str> {
        self.candidates
            .iter()
            .filter(|c| c.scalar_max <= tol && c.vector_max <= tol)
            .map(|c| c.sandwich.as_str())
            .collect()
    }

    pub fn scalar_matches(&self, tol: f64) -> Vec<&str> {
        self.candidates
            .iter()
            .filter(|c| c.scalar_max <= tol)
            .map(|c| c.sandwich.as_str())
            .collect()
    }

    pub fn vector_matches(&self, tol: f64) -> Vec<&str> {
        self.candidates
            .iter()
            .filter(|c| c.vector_max <= tol)
            .map(|c| c.sandwich.as_str())
            .collect()
    }
}

fn random_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_v(rng: &mut ChaCha8Rng) -> Vec3C {
    Vec3C::new(random_c(rng), random_c(rng), random_c(rng))
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0f64..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.map(|x| x / n);
        }
    }
}

/// Compares the printed boost formulas for strength, charge-current and
/// force-power with every sandwich in [`SANDWICHES`] on seeded random
/// inputs (`φ = 0`, `|v| ≤ 0.9`).
pub fn audit_component_formulas(samples: usize, seed: u64) -> Vec<FormulaAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev = [[[0.0f64; 2]; 5]; 3];
    let rel = |a: f64, scale: f64| a / scale.max(1.0);
    for _ in 0..samples {
        let v = rng.gen_range(-0.9..0.9);
        let p = TransformParams::from_velocity(v, random_unit(&mut rng), 0.0).expect("valid sample");
        let l = make_transform(p);

        let a = random_v(&mut rng);
        let a_f = rel_strength(a, &p);
        let (rho, j) = (random_c(&mut rng), random_v(&mut rng));
        let (rho_f, j_f) = rel_charge_current(rho, j, &p);
        let (m, f) = (random_c(&mut rng), random_v(&mut rng));
        let (m_f, f_f) = rel_force_power(m, f, &p);

        for w in 0..5 {
            let k = sandwich(&l, Biquaternion::vector(a), w);
            dev[0][w][0] = dev[0][w][0].max(rel(k.s.norm(), a_f.norm()));
            dev[0][w][1] = dev[0][w][1].max(rel((k.v - a_f).norm(), a_f.norm()));

            let k = sandwich(&l, Biquaternion::new(-I * rho, -j), w);
            let (rho_s, j_s) = (I * k.s, -k.v);
            dev[1][w][0] = dev[1][w][0].max(rel((rho_s - rho_f).norm(), rho_f.norm()));
            dev[1][w][1] = dev[1][w][1].max(rel((j_s - j_f).norm(), j_f.norm()));

            let k = sandwich(&l, Biquaternion::new(m, f * (-I)), w);
            let (m_s, f_s) = (k.s, k.v * I);
            dev[2][w][0] = dev[2][w][0].max(rel((m_s - m_f).norm(), m_f.norm()));
            dev[2][w][1] = dev[2][w][1].max(rel((f_s - f_f).norm(), f_f.norm()));
        }
    }
    ["strength", "charge_current", "force_power"]
        .iter()
        .enumerate()
        .map(|(i, name)| FormulaAudit {
            formula: name.to_string(),
            samples,
            candidates: (0..5)
                .map(|w| CandidateDeviation {
                    sandwich: SANDWICHES[w].to_string(),
                    scalar_max: dev[i][w][0],
                    vector_max: dev[i][w][1],
                })
                .collect(),
        })
        .collect()
}
