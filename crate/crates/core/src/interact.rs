//! Interaction of charge-currents with external fields.
//!
//! The force-power density acting on `Θ` from a strength `A'` is the product
//! `Θ∘A' = M − iF`. The transformation equation `κD⁻Θ = Θ∘A'` plays the part
//! of Newton's second law, `D⁻Θ = 0` the law of inertia and
//! `Θ∘A' = −Θ'∘A` action and reaction.
//!
//! Component reports are derived from the biquaternion residuals. Where the
//! printed component laws differ in sign from the algebra, both forms are
//! returned so the difference can be measured.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biquat::{Biquaternion, Vec3C, C64, I};
use crate::emfield::{charge_current_parts, MediumConstants};
use crate::error::{Error, Result};
use crate::grid::{self, BiquatField, ComplexField, Field, Grid4, RealField, Sign, VectorField};

/// Interaction constant `κ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Kappa(f64);

impl Kappa {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be > 0, got {k}")));
        }
        Ok(Kappa(k))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Kappa {
    fn default() -> Self {
        Kappa(1.0)
    }
}

impl TryFrom<f64> for Kappa {
    type Error = Error;
    fn try_from(k: f64) -> Result<Self> {
        Kappa::new(k)
    }
}

impl From<Kappa> for f64 {
    fn from(k: Kappa) -> f64 {
        k.0
    }
}

/// Which complex gradient drives the transformation equation.
///
/// `DMinus`: `κD⁻Θ = Θ∘A'`. `DPlus`: `κD⁺Θ + Θ∘A' = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecondLawOperator {
    #[default]
    DMinus,
    DPlus,
}

impl SecondLawOperator {
    fn sign(self) -> Sign {
        match self {
            SecondLawOperator::DMinus => Sign::Minus,
            SecondLawOperator::DPlus => Sign::Plus,
        }
    }

    /// Sign in front of the force term on the right side.
    fn force_sign(self) -> f64 {
        match self {
            SecondLawOperator::DMinus => 1.0,
            SecondLawOperator::DPlus => -1.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Force-power

/// Force-power density `M − iF` at one node, with the split `F = Fᴴ + iFᴱ`
/// of the force into real 3-vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcePower {
    pub m: C64,
    pub f: Vec3C,
    /// Mass force `ρᴱE' + ρᴴH' + jᴱ×B' − jᴴ×D'`.
    pub f_h: [f64; 3],
    /// Electric force `c(ρᴱB' − ρᴴD') + c⁻¹(E'×jᴱ + H'×jᴴ)`.
    pub f_e: [f64; 3],
}

impl ForcePower {
    /// `M − iF`.
    pub fn biquaternion(&self) -> Biquaternion {
        Biquaternion::new(self.m, self.f * (-I))
    }

    /// `M − i(Fᴴ + iFᴱ)` from the component split.
    pub fn reassembled(&self) -> Biquaternion {
        let f = Vec3C::from_parts(self.f_h, self.f_e);
        Biquaternion::new(self.m, f * (-I))
    }
}

/// `Θ∘A'`.
#[inline]
pub fn force_power_node(theta: &Biquaternion, a_prime: &Biquaternion) -> Biquaternion {
    *theta * *a_prime
}

/// Force-power at one node with the component expansions. The expansions
/// assume `a' = 0`; when they disagree with the product a warning is logged.
pub fn force_power(theta: &Biquaternion, a_prime: &Biquaternion, m: &MediumConstants) -> ForcePower {
    let prod = force_power_node(theta, a_prime);
    let f = prod.v * I;
    let (se, sm, c) = (m.eps().sqrt(), m.mu().sqrt(), m.c());
    let (rho, j) = charge_current_parts(theta);
    let rho_e = rho.re * se;
    let rho_h = -rho.im * sm;
    let je = j.re().map(|x| x / sm);
    let jh = j.im().map(|x| -x / se);
    let e = a_prime.v.re().map(|x| x / se);
    let h = a_prime.v.im().map(|x| x / sm);
    let d = e.map(|x| x * m.eps());
    let b = h.map(|x| x * m.mu());
    let jb = cross(je, b);
    let jd = cross(jh, d);
    let ej = cross(e, je);
    let hj = cross(h, jh);
    let mut f_h = [0.0; 3];
    let mut f_e = [0.0; 3];
    for k in 0..3 {
        f_h[k] = rho_e * e[k] + rho_h * h[k] + jb[k] - jd[k];
        f_e[k] = c * (rho_e * b[k] - rho_h * d[k]) + (ej[k] + hj[k]) / c;
    }
    let out = ForcePower { m: prod.s, f, f_h, f_e };
    if a_prime.s.norm() == 0.0 {
        let gap = (out.reassembled() - prod).norm();
        if gap > 1e-10 * (1.0 + prod.norm()) {
            log::warn!("force-power component split differs from product by {gap:.3e}");
        }
    }
    out
}

/// `M = c⁻¹((E',jᴱ) + (H',jᴴ)) + i((B',jᴱ) − (D',jᴴ))` from real components.
pub fn power_component_form(e: [f64; 3], h: [f64; 3], je: [f64; 3], jh: [f64; 3], m: &MediumConstants) -> C64 {
    let re = (dot3(e, je) + dot3(h, jh)) / m.c();
    let im = m.mu() * dot3(h, je) - m.eps() * dot3(e, jh);
    C64::new(re, im)
}

/// `Θ∘A'` at every node.
pub fn force_power_field(theta: &BiquatField, a_prime: &BiquatField) -> Result<BiquatField> {
    theta.zip_map(a_prime, force_power_node)
}

/// `Θ₁∘A₂ + Θ₂∘A₁`; zero when action equals reaction.
pub fn action_reaction_residual(
    theta1: &BiquatField,
    a1: &BiquatField,
    theta2: &BiquatField,
    a2: &BiquatField,
) -> Result<BiquatField> {
    force_power_field(theta1, a2)?.add(&force_power_field(theta2, a1)?)
}

// ---------------------------------------------------------------------------
// Second law and inertia

/// `κD⁻Θ − Θ∘A'` (or `κD⁺Θ + Θ∘A'`).
pub fn second_law_residual(
    theta: &BiquatField,
    a_prime: &BiquatField,
    kappa: Kappa,
    op: SecondLawOperator,
) -> Result<BiquatField> {
    let d = grid::d_sign(theta, op.sign())?;
    let f = force_power_field(theta, a_prime)?;
    let (k, s) = (kappa.value(), op.force_sign());
    d.zip_map(&f, move |d, f| *d * k - *f * s)
}

/// Components of the second-law residual for `κD⁻Θ = Θ∘A'`.
///
/// With `D⁻Θ = −i(∂τρ + div J) − (∂τJ − i rot J + ∇ρ)` the algebra gives
/// `κ(∂τρ + div J) = iM` and `κ(∂τJ − i rot J + ∇ρ) = iF`. The printed forms
/// are `iκ(∂τρ + div J) = M` and `iκ(∂τJ − i rot J + ∇ρ) = F`.
#[derive(Debug, Clone)]
pub struct SecondLawComponents {
    /// `κ(∂τρ + div J) − iM`.
    pub charge: ComplexField,
    /// `κ(∂τJ − i rot J + ∇ρ) − iF`.
    pub force: VectorField,
    /// `iκ(∂τρ + div J) − M`.
    pub printed_charge: ComplexField,
    /// `iκ(∂τJ − i rot J + ∇ρ) − F`.
    pub printed_force: VectorField,
}

impl SecondLawComponents {
    /// Max residual of the algebraic and printed forms.
    pub fn summary(&self) -> LawComparison {
        LawComparison {
            charge: self.charge.stats().max,
            force: self.force.stats().max,
            printed_charge: self.printed_charge.stats().max,
            printed_force: self.printed_force.stats().max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawComparison {
    pub charge: f64,
    pub force: f64,
    pub printed_charge: f64,
    pub printed_force: f64,
}

pub fn second_law_components(theta: &BiquatField, a_prime: &BiquatField, kappa: Kappa) -> Result<SecondLawComponents> {
    let d = grid::d_minus(theta)?;
    let f = force_power_field(theta, a_prime)?;
    let k = kappa.value();
    // ∂τρ + div J = i·scal(D⁻Θ); ∂τJ − i rot J + ∇ρ = −vec(D⁻Θ); F = i·vec(Θ∘A').
    let charge = d.zip_map(&f, move |d, f| I * d.s * k - I * f.s)?;
    let force = d.zip_map(&f, move |d, f| -d.v * k - (f.v * I) * I)?;
    let printed_charge = d.zip_map(&f, move |d, f| I * (I * d.s) * k - f.s)?;
    let printed_force = d.zip_map(&f, move |d, f| (-d.v) * (I * k) - f.v * I)?;
    Ok(SecondLawComponents {
        charge,
        force,
        printed_charge,
        printed_force,
    })
}

/// `D⁻Θ`.
pub fn inertia_residual(theta: &BiquatField) -> Result<BiquatField> {
    grid::d_minus(theta)
}

/// Inertia law in terms of `(ρᴱ, ρᴴ, jᴱ, jᴴ)`:
/// `∂τρᴱ + c⁻¹div jᴱ`, `∂τρᴴ + c⁻¹div jᴴ`,
/// `∂τjᴱ − √(ε/μ) rot jᴴ + c grad ρᴱ`, `∂τjᴴ + √(μ/ε) rot jᴱ + c grad ρᴴ`.
#[derive(Debug, Clone)]
pub struct InertiaComponents {
    pub charge_e: RealField,
    pub charge_h: RealField,
    pub current_e: VectorField,
    pub current_h: VectorField,
}

/// Splits a residual `r = D⁻Θ` (or any field of the same shape) into the
/// real component laws.
pub fn inertia_components(r: &BiquatField, m: &MediumConstants) -> InertiaComponents {
    let (se, sm) = (m.eps().sqrt(), m.mu().sqrt());
    // c_s = ∂τρ + div J = i r_s, X = ∂τJ − i rot J + ∇ρ = −r_v
    InertiaComponents {
        charge_e: r.map(move |r| (I * r.s).re * se),
        charge_h: r.map(move |r| -(I * r.s).im * sm),
        current_e: r.map(move |r| Vec3C::real((-r.v).re()) * (1.0 / sm)),
        current_h: r.map(move |r| Vec3C::real((-r.v).im()) * (-1.0 / se)),
    }
}

/// `iκ□a − M`. The scalar part of `□A = κ⁻¹Θ∘A'` with `A = ia + A`.
pub fn scalar_field_source_residual(a: &ComplexField, power: &ComplexField, kappa: Kappa) -> Result<ComplexField> {
    let k = kappa.value();
    a.wave_operator()?.zip_map(power, move |b, m| I * *b * k - *m)
}

/// `−iκ□a − M`, the printed sign.
pub fn scalar_field_source_residual_printed(
    a: &ComplexField,
    power: &ComplexField,
    kappa: Kappa,
) -> Result<ComplexField> {
    let k = kappa.value();
    a.wave_operator()?.zip_map(power, move |b, m| -I * *b * k - *m)
}

// ---------------------------------------------------------------------------
// Charge-current energy

/// Pointwise parts of `½Θ∘Θ* = (W_Θ + Q) + i(P_J − Re(ρ̄J))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEnergyNode {
    /// `½|ρ|² = ½(ρᴱ²/ε + ρᴴ²/μ)`.
    pub w_theta: f64,
    /// `½‖J‖²`.
    pub q: f64,
    /// `½i J×J̄ = c⁻¹ jᴴ×jᴱ`.
    pub p_j: [f64; 3],
    /// `Re(ρ̄J)`.
    pub rho_current: [f64; 3],
}

impl ThetaEnergyNode {
    pub fn biquaternion(&self) -> Biquaternion {
        let v: [f64; 3] = std::array::from_fn(|k| self.p_j[k] - self.rho_current[k]);
        Biquaternion::new(C64::new(self.w_theta + self.q, 0.0), Vec3C::real(v) * I)
    }
}

pub fn theta_energy_node(theta: &Biquaternion) -> ThetaEnergyNode {
    let (rho, j) = charge_current_parts(theta);
    let p = j.cross(&j.conj()) * (0.5 * I);
    let rj = j * rho.conj();
    ThetaEnergyNode {
        w_theta: 0.5 * rho.norm_sqr(),
        q: 0.5 * j.norm_sqr(),
        p_j: p.re(),
        rho_current: rj.re(),
    }
}

/// `½Θ∘Θ*`.
pub fn theta_energy_product(theta: &Biquaternion) -> Biquaternion {
    (*theta * theta.star()) * 0.5
}

/// `c⁻¹ jᴴ×jᴱ` from real currents.
pub fn current_poynting_component_form(je: [f64; 3], jh: [f64; 3], m: &MediumConstants) -> [f64; 3] {
    cross(jh, je).map(|x| x / m.c())
}

/// Energy fields of a charge-current, with the own rate
/// `U = div P_J − Re(∇ρ, J̄)`.
#[derive(Debug, Clone)]
pub struct ThetaEnergy {
    pub w_theta: RealField,
    pub q: RealField,
    pub p_j: VectorField,
    pub u: RealField,
}

pub fn theta_energy(theta: &BiquatField) -> Result<ThetaEnergy> {
    let nodes = theta.map(|t| {
        let n = theta_energy_node(t);
        Biquaternion::new(C64::new(n.w_theta, n.q), Vec3C::real(n.p_j))
    });
    let p_j = nodes.map(|n| n.v);
    let u = own_rate(theta, &p_j)?;
    Ok(ThetaEnergy {
        w_theta: nodes.map(|n| n.s.re),
        q: nodes.map(|n| n.s.im),
        p_j,
        u,
    })
}

fn own_rate(theta: &BiquatField, p_j: &VectorField) -> Result<RealField> {
    let rho = theta.map(|t| charge_current_parts(t).0);
    let grad_rho = grid::gradient(&rho)?;
    let div_p = grid::divergence(p_j)?;
    let g = grad_rho.zip_map(theta, |gr, t| {
        let (_, j) = charge_current_parts(t);
        gr.dot(&j.conj()).re
    })?;
    div_p.zip_map(&g, |d, g| d.re - g)
}

/// `κ(∂τQ − div P_J + Re(∇ρ, J̄)) + Im(F, J̄)`, where `force` holds `M − iF`.
///
/// This is the energy balance that follows from the force law by taking the
/// scalar product with `−iJ̄`. With `force = 0` it reduces to `∂τQ = U`.
pub fn first_law_residual(theta: &BiquatField, force: &BiquatField, kappa: Kappa) -> Result<RealField> {
    first_law_with_sign(theta, force, kappa, 1.0)
}

/// The printed balance `κ(∂τQ − div P_J + Re(∇ρ, J̄)) − Im(F, J̄)`.
pub fn first_law_residual_printed(theta: &BiquatField, force: &BiquatField, kappa: Kappa) -> Result<RealField> {
    first_law_with_sign(theta, force, kappa, -1.0)
}

fn first_law_with_sign(theta: &BiquatField, force: &BiquatField, kappa: Kappa, s: f64) -> Result<RealField> {
    theta.grid().check_same(force.grid())?;
    let e = theta_energy(theta)?;
    let dq = e.q.partial(0)?;
    let k = kappa.value();
    let work = theta.zip_map(force, force_work)?;
    dq.zip_map(&e.u, move |dq, u| k * (dq - u))?
        .zip_map(&work, move |l, w| l + s * w)
}

/// `Im(F, J̄)` with `F = i·vec(force)`.
#[inline]
fn force_work(theta: &Biquaternion, force: &Biquaternion) -> f64 {
    let (_, j) = charge_current_parts(theta);
    (force.v * I).dot(&j.conj()).im
}

/// Axis-aligned spatial box `D`, snapped to grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

/// Terms of the integrated energy balance over `D × (τ₀, t)`:
/// `∫(Q(t) − Q(τ₀)) = ∫∮(P_J, n) − ∫∫Re(∇ρ, J̄) − κ⁻¹∫∫Im(F, J̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstLawBalance {
    pub q_change: f64,
    pub flux: f64,
    pub gradient_term: f64,
    pub force_term: f64,
    /// LHS − RHS.
    pub defect: f64,
    pub volume: f64,
    pub duration: f64,
}

pub fn first_law_integral(
    theta: &BiquatField,
    force: &BiquatField,
    kappa: Kappa,
    region: &Region,
    t: f64,
) -> Result<FirstLawBalance> {
    let g = *theta.grid();
    g.check_same(force.grid())?;
    g.require_nodes(0..4, 3)?;
    let snap = |x: f64, axis: usize| -> Result<usize> {
        let u = (x - g.origin[axis]) / g.spacing(axis);
        let i = u.round();
        if i < -1e-9 || i > (g.shape[axis] - 1) as f64 + 1e-9 || (u - i).abs() > 1e-6 {
            return Err(Error::RegionOutsideGrid(format!(
                "coordinate {x} on axis {axis} is not a node of the grid"
            )));
        }
        Ok(i as usize)
    };
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        lo[a] = snap(region.lo[a], a + 1)?;
        hi[a] = snap(region.hi[a], a + 1)?;
        if hi[a] <= lo[a] {
            return Err(Error::RegionOutsideGrid(format!("empty extent on axis {}", a + 1)));
        }
    }
    let it_end = snap(t, 0)?;
    if it_end == 0 {
        return Err(Error::RegionOutsideGrid("time interval has zero length".into()));
    }

    let e = theta_energy(theta)?;
    let rho = theta.map(|t| charge_current_parts(t).0);
    let grad_rho = grid::gradient(&rho)?;
    let q = e.q.values();
    let p = e.p_j.values();
    let th = theta.values();
    let fo = force.values();
    let gr = grad_rho.values();
    let h = g.h;
    let wt = trapezoid(0, it_end, g.d_tau);
    let wx: [Vec<f64>; 3] = std::array::from_fn(|a| trapezoid(lo[a], hi[a], h));

    let mut q_change = 0.0;
    let mut gradient_term = 0.0;
    let mut force_term = 0.0;
    let mut flux = 0.0;
    let idx = |it: usize, i: usize, j: usize, k: usize| g.index([it, i, j, k]);
    for i in lo[0]..=hi[0] {
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                let w = wx[0][i - lo[0]] * wx[1][j - lo[1]] * wx[2][k - lo[2]];
                q_change += w * (q[idx(it_end, i, j, k)] - q[idx(0, i, j, k)]);
                for it in 0..=it_end {
                    let n = idx(it, i, j, k);
                    let (_, jc) = charge_current_parts(&th[n]);
                    let wtv = w * wt[it];
                    gradient_term += wtv * gr[n].dot(&jc.conj()).re;
                    force_term += wtv * force_work(&th[n], &fo[n]);
                }
            }
        }
    }
    force_term /= kappa.value();
    // faces normal to each axis, outward sign
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for (side, sign) in [(lo[a], -1.0), (hi[a], 1.0)] {
            for ib in lo[b]..=hi[b] {
                for ic in lo[c]..=hi[c] {
                    let mut s = [0usize; 3];
                    s[a] = side;
                    s[b] = ib;
                    s[c] = ic;
                    let w = wx[b][ib - lo[b]] * wx[c][ic - lo[c]];
                    for (it, wtv) in wt.iter().enumerate() {
                        flux += sign * w * wtv * p[idx(it, s[0], s[1], s[2])][a].re;
                    }
                }
            }
        }
    }
    let rhs = flux - gradient_term - force_term;
    let volume = (0..3).map(|a| (hi[a] - lo[a]) as f64 * h).product();
    Ok(FirstLawBalance {
        q_change,
        flux,
        gradient_term,
        force_term,
        defect: q_change - rhs,
        volume,
        duration: it_end as f64 * g.d_tau,
    })
}

/// Trapezoid weights for nodes `lo..=hi` with spacing `d`.
fn trapezoid(lo: usize, hi: usize, d: f64) -> Vec<f64> {
    let n = hi - lo + 1;
    (0..n).map(|k| if k == 0 || k == n - 1 { 0.5 * d } else { d }).collect()
}

// ---------------------------------------------------------------------------
// Interaction energy

/// `Ξᵏˡ = ½(Θᵏ∘Θˡ* + Θˡ∘Θᵏ*)`.
pub fn interaction_pair(tk: &Biquaternion, tl: &Biquaternion) -> Biquaternion {
    (*tk * tl.star() + *tl * tk.star()) * 0.5
}

/// `Ξᵏˡ` from the real charges and currents of each field in its own medium:
/// `Re(ρᵏρ̄ˡ + (Jᵏ, J̄ˡ)) − i{Re(ρᵏJ̄ˡ + ρ̄ˡJᵏ) + Im[Jᵏ, J̄ˡ]}`, where
/// `Im[Jᵏ, J̄ˡ] = √(εₗμₖ)[jᴱₖ, jᴴₗ] + √(εₖμₗ)[jᴱₗ, jᴴₖ]`.
pub fn interaction_pair_components(
    tk: &Biquaternion,
    mk: &MediumConstants,
    tl: &Biquaternion,
    ml: &MediumConstants,
) -> Biquaternion {
    let parts = |t: &Biquaternion, m: &MediumConstants| {
        let (rho, j) = charge_current_parts(t);
        let (se, sm) = (m.eps().sqrt(), m.mu().sqrt());
        (
            rho.re * se,
            -rho.im * sm,
            j.re().map(|x| x / sm),
            j.im().map(|x| -x / se),
        )
    };
    let (re_k, rh_k, je_k, jh_k) = parts(tk, mk);
    let (re_l, rh_l, je_l, jh_l) = parts(tl, ml);
    let (ek, uk, el, ul) = (mk.eps(), mk.mu(), ml.eps(), ml.mu());
    let w = re_k * re_l / (ek * el).sqrt()
        + rh_k * rh_l / (uk * ul).sqrt()
        + (uk * ul).sqrt() * dot3(je_k, je_l)
        + (ek * el).sqrt() * dot3(jh_k, jh_l);
    let c1 = cross(je_k, jh_l);
    let c2 = cross(je_l, jh_k);
    let p: [f64; 3] = std::array::from_fn(|i| {
        (ul / ek).sqrt() * re_k * je_l[i]
            + (el / uk).sqrt() * rh_k * jh_l[i]
            + (uk / el).sqrt() * re_l * je_k[i]
            + (ek / ul).sqrt() * rh_l * jh_k[i]
            + (el * uk).sqrt() * c1[i]
            + (ek * ul).sqrt() * c2[i]
    });
    Biquaternion::new(C64::new(w, 0.0), Vec3C::real(p) * (-I))
}

/// Sign of the interaction energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyClass {
    /// `δW_Θ > tol`.
    Release,
    /// `δW_Θ < −tol`.
    Absorb,
    /// `‖δΞ_Θ‖ ≤ tol`.
    Conserve,
    /// `|δW_Θ| ≤ tol` but `δP_Θ` is not negligible.
    Indeterminate,
}

impl EnergyClass {
    pub fn classify(delta_w: f64, delta_xi_norm: f64, tol: f64) -> EnergyClass {
        if delta_w > tol {
            EnergyClass::Release
        } else if delta_w < -tol {
            EnergyClass::Absorb
        } else if delta_xi_norm <= tol {
            EnergyClass::Conserve
        } else {
            EnergyClass::Indeterminate
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnergyClass::Release => "release",
            EnergyClass::Absorb => "absorb",
            EnergyClass::Conserve => "conserve",
            EnergyClass::Indeterminate => "indeterminate",
        }
    }
}

/// `δΞ_Θ = δW_Θ + iδP_Θ = Σ_{k≠l} Ξᵏˡ` over ordered pairs. The summary
/// energy-momentum is `½Θ∘Θ* = Σₖ ½Θᵏ∘Θᵏ* + ½δΞ_Θ`.
#[derive(Debug, Clone)]
pub struct InteractionEnergy {
    pub delta_w: RealField,
    pub delta_p: VectorField,
    pub classes: Vec<EnergyClass>,
    /// `Σ δW_Θ` over nodes in index order.
    pub total_delta_w: f64,
    pub aggregate: EnergyClass,
    pub tol: f64,
}

pub fn interaction_energy(fields: &[BiquatField]) -> Result<InteractionEnergy> {
    let Some(first) = fields.first() else {
        return Err(Error::InvalidParameter(
            "interaction energy needs at least one field".into(),
        ));
    };
    let g = *first.grid();
    for f in fields {
        g.check_same(f.grid())?;
    }
    let max_sq = fields
        .iter()
        .flat_map(|f| f.values().iter())
        .map(|t| t.norm_sqr())
        .fold(0.0f64, f64::max);
    let tol = 1e-9 * max_sq;
    let xi: Vec<Biquaternion> = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let mut acc = Biquaternion::ZERO;
            for k in 0..fields.len() {
                for l in k + 1..fields.len() {
                    acc += interaction_pair(&fields[k].values()[n], &fields[l].values()[n]) * 2.0;
                }
            }
            acc
        })
        .collect();
    let classes = xi
        .iter()
        .map(|x| EnergyClass::classify(x.s.re, x.norm(), tol))
        .collect();
    let total: Biquaternion = xi.iter().copied().sum();
    let count = g.len() as f64;
    let aggregate = EnergyClass::classify(total.s.re, total.norm(), tol * count);
    let delta_w = Field::from_parts(g, xi.iter().map(|x| x.s.re).collect(), 0);
    let delta_p = Field::from_parts(g, xi.iter().map(|x| x.v * (-I)).collect(), 0);
    Ok(InteractionEnergy {
        delta_w,
        delta_p,
        classes,
        total_delta_w: total.s.re,
        aggregate,
        tol,
    })
}

/// `D∓(ΣΘᵏ)` for the operator in use, the free law for the summary field.
pub fn summary_free_residual(thetas: &[BiquatField], op: SecondLawOperator) -> Result<BiquatField> {
    let Some(first) = thetas.first() else {
        return Err(Error::InvalidParameter("no fields".into()));
    };
    let mut sum = first.clone();
    for t in &thetas[1..] {
        sum = sum.add(t)?;
    }
    grid::d_sign(&sum, op.sign())
}

// ---------------------------------------------------------------------------
// Multi-field dynamics

/// One interacting field on a τ-slice: its charge-current and strength.
#[derive(Debug, Clone)]
pub struct InteractingField {
    pub theta: BiquatField,
    pub a: BiquatField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsConfig {
    pub kappa: Kappa,
    pub d_tau: f64,
    /// Upper bound on `Δτ/h`.
    pub cfl_bound: f64,
    /// Advance each strength by `∂τA = Θ − S⁺A`; otherwise strengths are frozen.
    pub evolve_strength: bool,
    pub second_law_operator: SecondLawOperator,
    pub divergence_bound: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            kappa: Kappa::default(),
            d_tau: 0.05,
            cfl_bound: 0.5,
            evolve_strength: false,
            second_law_operator: SecondLawOperator::DMinus,
            divergence_bound: 1e6,
        }
    }
}

/// Diagnostics for one step, written as one JSON line per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub tau: f64,
    pub residual_second_law: f64,
    pub residual_summary_free: f64,
    #[serde(rename = "deltaW_theta")]
    pub delta_w_theta: f64,
    pub classification: EnergyClass,
    #[serde(rename = "energy_Q")]
    pub energy_q: f64,
    #[serde(rename = "flux_PJ")]
    pub flux_pj: f64,
    pub action_reaction: f64,
}

type State = Vec<(Vec<Biquaternion>, Vec<Biquaternion>)>;

fn check_slices(fields: &[InteractingField]) -> Result<Grid4> {
    if fields.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "multi-field dynamics needs at least 2 fields, got {}",
            fields.len()
        )));
    }
    let g = *fields[0].theta.grid();
    if g.shape[0] != 1 {
        return Err(Error::InvalidGrid("dynamics state must be a single tau-slice".into()));
    }
    g.require_nodes(1..4, 3)?;
    for f in fields {
        g.check_same(f.theta.grid())?;
        g.check_same(f.a.grid())?;
    }
    Ok(g)
}

fn spatial(vals: &[Biquaternion], g: Grid4, sign: Sign) -> Vec<Biquaternion> {
    let f = Field::from_parts(g, vals.to_vec(), 0);
    grid::spatial_gradient(&f, sign)
        .expect("slice size checked")
        .into_values()
}

fn others_sum(state: &State, k: usize, n: usize) -> Vec<Biquaternion> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            state
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != k)
                .map(|(_, (_, a))| a[i])
                .sum()
        })
        .collect()
}

fn rates(state: &State, g: Grid4, cfg: &DynamicsConfig) -> State {
    let n = g.len();
    let op = cfg.second_law_operator;
    let (inv_k, fs) = (1.0 / cfg.kappa.value(), op.force_sign());
    (0..state.len())
        .map(|k| {
            let (theta, a) = &state[k];
            let ext = others_sum(state, k, n);
            let s = spatial(theta, g, op.sign());
            let dtheta = (0..n)
                .into_par_iter()
                .map(|i| (theta[i] * ext[i]) * (fs * inv_k) - s[i])
                .collect();
            let da = if cfg.evolve_strength {
                let sa = spatial(a, g, Sign::Plus);
                (0..n).into_par_iter().map(|i| theta[i] - sa[i]).collect()
            } else {
                vec![Biquaternion::ZERO; n]
            };
            (dtheta, da)
        })
        .collect()
}

fn axpy(x: &State, d: &State, c: f64) -> State {
    x.iter()
        .zip(d)
        .map(|((t, a), (dt, da))| {
            (
                t.iter().zip(dt).map(|(t, d)| *t + *d * c).collect(),
                a.iter().zip(da).map(|(a, d)| *a + *d * c).collect(),
            )
        })
        .collect()
}

/// One classical Runge–Kutta step of
/// `∂τΘᵏ = κ⁻¹Θᵏ∘Σ_{m≠k}Aᵐ − S⁻Θᵏ` (with `S⁻ = −iΣⱼeⱼ∘∂ⱼ`), or the `D⁺`
/// variant, on a τ-slice. Returned slices carry the advanced τ.
pub fn multi_field_step(fields: &[InteractingField], cfg: &DynamicsConfig) -> Result<Vec<InteractingField>> {
    let g = check_slices(fields)?;
    let ratio = cfg.d_tau / g.h;
    if !(cfg.d_tau > 0.0) || ratio > cfg.cfl_bound {
        return Err(Error::CflViolation {
            ratio,
            bound: cfg.cfl_bound,
        });
    }
    let x: State = fields
        .iter()
        .map(|f| (f.theta.values().to_vec(), f.a.values().to_vec()))
        .collect();
    let dt = cfg.d_tau;
    let k1 = rates(&x, g, cfg);
    let k2 = rates(&axpy(&x, &k1, 0.5 * dt), g, cfg);
    let k3 = rates(&axpy(&x, &k2, 0.5 * dt), g, cfg);
    let k4 = rates(&axpy(&x, &k3, dt), g, cfg);
    let mut next = axpy(&x, &k1, dt / 6.0);
    next = axpy(&next, &k2, dt / 3.0);
    next = axpy(&next, &k3, dt / 3.0);
    next = axpy(&next, &k4, dt / 6.0);

    let mut ng = g;
    ng.origin[0] += dt;
    let mut magnitude = 0.0f64;
    for (t, a) in &next {
        for v in t.iter().chain(a) {
            if !v.is_finite() {
                magnitude = f64::INFINITY;
            } else {
                magnitude = magnitude.max(v.norm());
            }
        }
    }
    if magnitude > cfg.divergence_bound {
        return Err(Error::Divergence {
            iteration: 0,
            magnitude,
            bound: cfg.divergence_bound,
        });
    }
    Ok(next
        .into_iter()
        .map(|(t, a)| InteractingField {
            theta: Field::from_parts(ng, t, 0),
            a: Field::from_parts(ng, a, 0),
        })
        .collect())
}

/// Diagnostics comparing two consecutive slices. Time derivatives are
/// `(Θₙ₊₁ − Θₙ)/Δτ` and everything else is taken at the midpoint.
pub fn step_record(
    step: usize,
    before: &[InteractingField],
    after: &[InteractingField],
    cfg: &DynamicsConfig,
) -> Result<StepRecord> {
    let g = check_slices(before)?;
    check_slices(after)?;
    let n = g.len();
    let dt = after[0].theta.grid().origin[0] - g.origin[0];
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("slices are not ordered in tau".into()));
    }
    let op = cfg.second_law_operator;
    let (k, fs) = (cfg.kappa.value(), op.force_sign());
    let mid: State = before
        .iter()
        .zip(after)
        .map(|(b, a)| {
            let avg = |x: &BiquatField, y: &BiquatField| -> Vec<Biquaternion> {
                x.values()
                    .iter()
                    .zip(y.values())
                    .map(|(p, q)| (*p + *q) * 0.5)
                    .collect()
            };
            (avg(&b.theta, &a.theta), avg(&b.a, &a.a))
        })
        .collect();
    let interior = |i: usize| g.in_margin(g.multi_index(i), 1);

    let mut residual_second_law = 0.0f64;
    let mut dsum = vec![Biquaternion::ZERO; n];
    let mut msum = vec![Biquaternion::ZERO; n];
    for (f, (b, a)) in before.iter().zip(after).enumerate() {
        let ext = others_sum(&mid, f, n);
        let s = spatial(&mid[f].0, g, op.sign());
        for i in 0..n {
            let d = (a.theta.values()[i] - b.theta.values()[i]) * (1.0 / dt);
            dsum[i] += d;
            msum[i] += mid[f].0[i];
            if interior(i) {
                let r = (d + s[i]) * k - (mid[f].0[i] * ext[i]) * fs;
                residual_second_law = residual_second_law.max(r.norm());
            }
        }
    }
    let ssum = spatial(&msum, g, op.sign());
    let mut residual_summary_free = 0.0f64;
    for i in 0..n {
        if interior(i) {
            residual_summary_free = residual_summary_free.max((dsum[i] + ssum[i]).norm());
        }
    }

    let thetas: Vec<BiquatField> = after.iter().map(|f| f.theta.clone()).collect();
    let ie = interaction_energy(&thetas)?;
    let cell = g.h.powi(3);
    let mut action_reaction = 0.0f64;
    for p in 0..after.len() {
        for q in p + 1..after.len() {
            let r = action_reaction_residual(&after[p].theta, &after[p].a, &after[q].theta, &after[q].a)?;
            action_reaction = action_reaction.max(r.stats().max);
        }
    }
    let sum = thetas[1..].iter().try_fold(thetas[0].clone(), |acc, t| acc.add(t))?;
    let nodes: Vec<ThetaEnergyNode> = sum.values().iter().map(theta_energy_node).collect();
    let energy_q = nodes.iter().map(|e| e.q).sum::<f64>() * cell;
    let flux_pj = box_flux(&nodes, &after[0].theta.grid().slice_grid(0));
    Ok(StepRecord {
        step,
        tau: after[0].theta.grid().origin[0],
        residual_second_law,
        residual_summary_free,
        delta_w_theta: ie.total_delta_w * cell,
        classification: ie.aggregate,
        energy_q,
        flux_pj,
        action_reaction,
    })
}

/// Outward flux of `P_J` through the faces of a slice, trapezoid on faces.
fn box_flux(nodes: &[ThetaEnergyNode], g: &Grid4) -> f64 {
    let [_, nx, ny, nz] = g.shape;
    let dims = [nx, ny, nz];
    let w: [Vec<f64>; 3] = std::array::from_fn(|a| trapezoid(0, dims[a] - 1, g.h));
    let mut flux = 0.0;
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for (side, sign) in [(0, -1.0), (dims[a] - 1, 1.0)] {
            for ib in 0..dims[b] {
                for ic in 0..dims[c] {
                    let mut s = [0usize; 3];
                    s[a] = side;
                    s[b] = ib;
                    s[c] = ic;
                    flux += sign * w[b][ib] * w[c][ic] * nodes[g.index([0, s[0], s[1], s[2]])].p_j[a];
                }
            }
        }
    }
    flux
}

/// Runs `steps` steps, returning the final state and one record per step.
pub fn run_dynamics(
    fields: Vec<InteractingField>,
    cfg: &DynamicsConfig,
    steps: usize,
) -> Result<(Vec<InteractingField>, Vec<StepRecord>)> {
    let mut state = fields;
    let mut records = Vec::with_capacity(steps);
    for step in 1..=steps {
        let next = multi_field_step(&state, cfg).map_err(|e| match e {
            Error::Divergence { magnitude, bound, .. } => Error::Divergence {
                iteration: step,
                magnitude,
                bound,
            },
            other => other,
        })?;
        let rec = step_record(step, &state, &next, cfg)?;
        log::debug!(
            "step {step}: tau={:.4} second-law residual {:.3e}",
            rec.tau,
            rec.residual_second_law
        );
        records.push(rec);
        state = next;
    }
    Ok((state, records))
}

/// Per-field residuals of the interacting system on a 4-D grid:
/// `κD∓Θᵏ ∓ Θᵏ∘Σ_{m≠k}Aᵐ`.
pub fn interacting_residuals(
    fields: &[(BiquatField, BiquatField)],
    kappa: Kappa,
    op: SecondLawOperator,
) -> Result<Vec<BiquatField>> {
    let Some((t0, _)) = fields.first() else {
        return Err(Error::InvalidParameter("no fields".into()));
    };
    let g = *t0.grid();
    fields
        .iter()
        .enumerate()
        .map(|(k, (theta, _))| {
            let mut ext = BiquatField::zeros(g);
            for (m, (_, a)) in fields.iter().enumerate() {
                if m != k {
                    ext = ext.add(a)?;
                }
            }
            second_law_residual(theta, &ext, kappa, op)
        })
        .collect()
}

#[inline]
fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
