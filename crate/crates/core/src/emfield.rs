//! EGM field data model and the Maxwell system in biquaternion form.
//!
//! Per node the objects are biquaternions:
//! - strength `ia + A`, with `A = √ε E + i√μ H`;
//! - charge-current `Θ = −iρ − J`, with `ρ = ρᴱ/√ε − iρᴴ/√μ`,
//!   `J = √μ jᴱ − i√ε jᴴ`;
//! - potential `Φ = iφ − Ψ`;
//! - energy-momentum `Ξ = ½ A∘A* = W + iP`.
//!
//! The field equation is `D⁺A = Θ`. With `a ≠ 0` the same equation is the
//! modified system `ρ = div A − ∂τa`, `J = −∂τA + grad a − i rot A`.
//!
//! Real 3-vector inputs (`E`, `H`, `jᴱ`, `jᴴ`) are passed as [`VectorField`]s
//! whose imaginary parts are ignored.

use serde::{Deserialize, Serialize};

use crate::biquat::{Biquaternion, Vec3C, C64, I};
use crate::error::{Error, Result};
use crate::grid::{self, BiquatField, ComplexField, Field, RealField, VectorField};

/// Permittivity, permeability and the derived wave speed `c = 1/√(εμ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MediumSpec", into = "MediumSpec")]
pub struct MediumConstants {
    eps: f64,
    mu: f64,
    c: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct MediumSpec {
    eps: f64,
    mu: f64,
}

impl TryFrom<MediumSpec> for MediumConstants {
    type Error = Error;
    fn try_from(s: MediumSpec) -> Result<Self> {
        MediumConstants::new(s.eps, s.mu)
    }
}

impl From<MediumConstants> for MediumSpec {
    fn from(m: MediumConstants) -> Self {
        MediumSpec { eps: m.eps, mu: m.mu }
    }
}

impl Default for MediumConstants {
    fn default() -> Self {
        MediumConstants {
            eps: 1.0,
            mu: 1.0,
            c: 1.0,
        }
    }
}

impl MediumConstants {
    pub fn new(eps: f64, mu: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite() && mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "medium needs eps, mu > 0, got {eps}, {mu}"
            )));
        }
        Ok(MediumConstants {
            eps,
            mu,
            c: 1.0 / (eps * mu).sqrt(),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// Strength node `ia + A`.
pub fn strength_node(a: C64, vec: Vec3C) -> Biquaternion {
    Biquaternion::new(I * a, vec)
}

/// Charge-current node `−iρ − J`.
pub fn charge_current_node(rho: C64, j: Vec3C) -> Biquaternion {
    Biquaternion::new(-I * rho, -j)
}

/// Potential node `iφ − Ψ`.
pub fn potential_node(phi: C64, psi: Vec3C) -> Biquaternion {
    Biquaternion::new(I * phi, -psi)
}

/// `(ρ, J)` of a charge-current node.
pub fn charge_current_parts(theta: &Biquaternion) -> (C64, Vec3C) {
    (I * theta.s, -theta.v)
}

/// `(a, A)` of a strength node.
pub fn strength_parts(k: &Biquaternion) -> (C64, Vec3C) {
    (-I * k.s, k.v)
}

/// `½ A∘A*`, which expands to `W + iP` for a pure vector strength.
pub fn energy_momentum_node(a: &Biquaternion) -> Biquaternion {
    (*a * a.star()) * 0.5
}

/// `½ A*∘A`, the reversed ordering. For pure vector strength this is
/// `W − iP`.
pub fn energy_momentum_node_reversed(a: &Biquaternion) -> Biquaternion {
    (a.star() * *a) * 0.5
}

/// `W = ½(ε|E|² + μ|H|²)`, `P = c⁻¹ E×H` from real field vectors.
pub fn energy_momentum_components(e: [f64; 3], h: [f64; 3], m: &MediumConstants) -> (f64, [f64; 3]) {
    let sq = |v: [f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let w = 0.5 * (m.eps * sq(e) + m.mu * sq(h));
    let p = [
        (e[1] * h[2] - e[2] * h[1]) / m.c,
        (e[2] * h[0] - e[0] * h[2]) / m.c,
        (e[0] * h[1] - e[1] * h[0]) / m.c,
    ];
    (w, p)
}

/// Field strength `ia + A` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStrength(pub BiquatField);

/// Charge-current `−iρ − J` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeCurrent(pub BiquatField);

/// Potential `iφ − Ψ` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential(pub BiquatField);

/// Energy-momentum `W + iP` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMomentum(pub BiquatField);

fn real_parts(v: &Vec3C) -> [f64; 3] {
    v.re()
}

impl FieldStrength {
    pub fn field(&self) -> &BiquatField {
        &self.0
    }

    /// The scalar part `a`.
    pub fn scalar(&self) -> ComplexField {
        self.0.map(|k| strength_parts(k).0)
    }

    pub fn vector(&self) -> VectorField {
        self.0.map(|k| k.v)
    }

    /// `E = Re A / √ε`.
    pub fn electric(&self, m: &MediumConstants) -> VectorField {
        let s = 1.0 / m.eps.sqrt();
        self.0.map(move |k| Vec3C::real(k.v.re()) * s)
    }

    /// `H = Im A / √μ`.
    pub fn magnetic(&self, m: &MediumConstants) -> VectorField {
        let s = 1.0 / m.mu.sqrt();
        self.0.map(move |k| Vec3C::real(k.v.im()) * s)
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        self.0.values().iter().all(|k| k.s.norm() <= tol)
    }
}

impl ChargeCurrent {
    pub fn field(&self) -> &BiquatField {
        &self.0
    }

    pub fn rho(&self) -> ComplexField {
        self.0.map(|t| charge_current_parts(t).0)
    }

    pub fn current(&self) -> VectorField {
        self.0.map(|t| charge_current_parts(t).1)
    }

    /// `(ρᴱ, ρᴴ, jᴱ, jᴴ)`, the inverse of [`assemble_charge_current`].
    pub fn components(&self, m: &MediumConstants) -> (RealField, RealField, VectorField, VectorField) {
        let (se, sm) = (m.eps.sqrt(), m.mu.sqrt());
        let rho = self.rho();
        let j = self.current();
        (
            rho.map(move |r| r.re * se),
            rho.map(move |r| -r.im * sm),
            j.map(move |v| Vec3C::real(v.re()) * (1.0 / sm)),
            j.map(move |v| Vec3C::real(v.im()) * (-1.0 / se)),
        )
    }
}

impl Potential {
    pub fn field(&self) -> &BiquatField {
        &self.0
    }

    /// `A = D⁻Φ`; a genuine strength when the Lorenz gauge holds.
    pub fn strength(&self) -> Result<FieldStrength> {
        Ok(FieldStrength(grid::d_minus(&self.0)?))
    }

    /// `∂τφ − div Ψ`, equal to `−i` times the scalar part of `D⁻Φ`.
    pub fn lorenz_gauge_residual(&self) -> Result<ComplexField> {
        Ok(grid::d_minus(&self.0)?.map(|k| -I * k.s))
    }
}

impl EnergyMomentum {
    pub fn field(&self) -> &BiquatField {
        &self.0
    }

    /// Energy density `W` (real part of the scalar).
    pub fn energy(&self) -> RealField {
        self.0.map(|x| x.s.re)
    }

    /// Poynting vector `P` (imaginary part of the vector).
    pub fn poynting(&self) -> VectorField {
        self.0.map(|x| Vec3C::real(x.v.im()))
    }
}

/// `A = √ε E + i√μ H`, `a = 0`.
pub fn assemble_strength(e: &VectorField, h: &VectorField, m: &MediumConstants) -> Result<FieldStrength> {
    let (se, sm) = (m.eps.sqrt(), m.mu.sqrt());
    let f = e.zip_map(h, move |e, h| {
        let (e, h) = (real_parts(e), real_parts(h));
        Biquaternion::vector(Vec3C::from_parts(
            [se * e[0], se * e[1], se * e[2]],
            [sm * h[0], sm * h[1], sm * h[2]],
        ))
    })?;
    Ok(FieldStrength(f))
}

/// `ρ = ρᴱ/√ε − iρᴴ/√μ`, `J = √μ jᴱ − i√ε jᴴ`.
pub fn assemble_charge_current(
    rho_e: &RealField,
    rho_h: &RealField,
    j_e: &VectorField,
    j_h: &VectorField,
    m: &MediumConstants,
) -> Result<ChargeCurrent> {
    let (se, sm) = (m.eps.sqrt(), m.mu.sqrt());
    let rho = rho_e.zip_map(rho_h, move |re, rh| C64::new(re / se, -rh / sm))?;
    let j = j_e.zip_map(j_h, move |je, jh| {
        let (je, jh) = (je.re(), jh.re());
        Vec3C::from_parts(
            [sm * je[0], sm * je[1], sm * je[2]],
            [-se * jh[0], -se * jh[1], -se * jh[2]],
        )
    })?;
    Ok(ChargeCurrent(rho.zip_map(&j, |r, j| charge_current_node(*r, *j))?))
}

/// `Θ = D⁺A`.
pub fn theta_of_field(a: &FieldStrength) -> Result<ChargeCurrent> {
    Ok(ChargeCurrent(grid::d_plus(&a.0)?))
}

/// `D⁺A − Θ`.
pub fn maxwell_residual(a: &FieldStrength, theta: &ChargeCurrent) -> Result<BiquatField> {
    grid::d_plus(&a.0)?.sub(&theta.0)
}

/// `Ξ = ½ A∘A*` at every node.
pub fn energy_momentum(a: &FieldStrength) -> EnergyMomentum {
    EnergyMomentum(a.0.map(energy_momentum_node))
}

/// `□A − D⁻Θ`.
pub fn wave_residual(a: &FieldStrength, theta: &ChargeCurrent) -> Result<BiquatField> {
    grid::box_direct(&a.0)?.sub(&grid::d_minus(&theta.0)?)
}

/// `i rot J − grad ρ − ∂τJ` from separately differentiated components;
/// equals the vector part of `D⁻Θ`.
pub fn wave_source_component_form(theta: &ChargeCurrent) -> Result<VectorField> {
    let rho = theta.rho();
    let j = theta.current();
    let grad_rho = grid::gradient(&rho)?;
    let dj = [j.partial(1)?, j.partial(2)?, j.partial(3)?];
    let dtj = j.partial(0)?;
    let g = *theta.0.grid();
    let values = (0..g.len())
        .map(|k| {
            let d = |a: usize, c: usize| dj[a].values()[k][c];
            let rot = Vec3C([d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)]);
            rot * I - grad_rho.values()[k] - dtj.values()[k]
        })
        .collect();
    Ok(Field::from_parts(g, values, theta.0.margin() + 1))
}

/// `∂τρ + div J`.
pub fn charge_conservation_residual(theta: &ChargeCurrent) -> Result<ComplexField> {
    let drho = theta.rho().partial(0)?;
    let div = grid::divergence(&theta.current())?;
    drho.add(&div)
}

/// `∂τW + div P + Re(J, Ā)`.
pub fn energy_conservation_residual(a: &FieldStrength, theta: &ChargeCurrent) -> Result<RealField> {
    a.0.grid().check_same(theta.0.grid())?;
    let xi = energy_momentum(a);
    let dw = xi.energy().partial(0)?;
    let div_p = grid::divergence(&xi.poynting())?;
    let source = a.0.zip_map(&theta.0, |k, t| {
        let (_, j) = charge_current_parts(t);
        j.dot(&k.v.conj()).re
    })?;
    dw.zip_map(&div_p, |w, p| w + p.re)?.add(&source)
}

/// `c⁻¹(jᴴ·H − jᴱ·E)`, the component form of the energy source `−Re(J, Ā)`.
pub fn energy_source_component_form(
    j_e: [f64; 3],
    j_h: [f64; 3],
    e: [f64; 3],
    h: [f64; 3],
    m: &MediumConstants,
) -> f64 {
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    (dot(j_h, h) - dot(j_e, e)) / m.c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biquat::rel_dist;
    use crate::grid::Grid4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rvec(rng: &mut impl Rng) -> [f64; 3] {
        [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ]
    }

    fn small_grid() -> Grid4 {
        Grid4::new([5, 6, 6, 6], 0.1, 0.2, [0.0, -0.5, -0.5, -0.5]).unwrap()
    }

    #[test]
    fn medium_constants() {
        let m = MediumConstants::new(4.0, 9.0).unwrap();
        assert_eq!(m.c() * (m.eps() * m.mu()).sqrt(), 1.0);
        assert!(MediumConstants::new(0.0, 1.0).is_err());
        let j = serde_json_roundtrip(&m);
        assert_eq!(j, m);
    }

    fn serde_json_roundtrip(m: &MediumConstants) -> MediumConstants {
        // no json dependency here; round-trip through the raw spec instead
        MediumConstants::try_from(MediumSpec::from(*m)).unwrap()
    }

    #[test]
    fn strength_assembly_examples_and_roundtrip() {
        let g = small_grid();
        let e = VectorField::from_fn(g, |_| Vec3C::real([1.0, 0.0, 0.0])).unwrap();
        let h = VectorField::from_fn(g, |_| Vec3C::real([0.0, 1.0, 0.0])).unwrap();
        let a = assemble_strength(&e, &h, &MediumConstants::default()).unwrap();
        let expect = Vec3C::new(C64::new(1.0, 0.0), I, C64::default());
        assert!(a.0.values().iter().all(|k| k.s == C64::default() && k.v == expect));

        let m = MediumConstants::new(4.0, 1.0).unwrap();
        let zero = VectorField::zeros(g);
        let a = assemble_strength(&e, &zero, &m).unwrap();
        assert!(a.0.values().iter().all(|k| k.v == Vec3C::real([2.0, 0.0, 0.0])));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = MediumConstants::new(2.5, 0.7).unwrap();
        let e: Vec<_> = (0..g.len()).map(|_| Vec3C::real(rvec(&mut rng))).collect();
        let h: Vec<_> = (0..g.len()).map(|_| Vec3C::real(rvec(&mut rng))).collect();
        let ef = VectorField::from_values(g, e).unwrap();
        let hf = VectorField::from_values(g, h).unwrap();
        let a = assemble_strength(&ef, &hf, &m).unwrap();
        for (x, y) in a.electric(&m).values().iter().zip(ef.values()) {
            assert!((*x - *y).norm() < 1e-14);
        }
        for (x, y) in a.magnetic(&m).values().iter().zip(hf.values()) {
            assert!((*x - *y).norm() < 1e-14);
        }
        let other = Grid4::new([5, 6, 6, 7], 0.1, 0.2, [0.0; 4]).unwrap();
        assert!(matches!(
            assemble_strength(&ef, &VectorField::zeros(other), &m),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn charge_current_assembly_examples_and_roundtrip() {
        let g = small_grid();
        let m = MediumConstants::default();
        let one = RealField::from_fn(g, |_| 1.0).unwrap();
        let zero = RealField::zeros(g);
        let e1 = VectorField::from_fn(g, |_| Vec3C::basis(0)).unwrap();
        let e2 = VectorField::from_fn(g, |_| Vec3C::basis(1)).unwrap();
        let t = assemble_charge_current(&one, &zero, &e1, &e2, &m).unwrap();
        let expect_j = Vec3C::new(C64::new(1.0, 0.0), -I, C64::default());
        for (r, j) in t.rho().values().iter().zip(t.current().values()) {
            assert_eq!(*r, C64::new(1.0, 0.0));
            assert_eq!(*j, expect_j);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = MediumConstants::new(0.3, 5.0).unwrap();
        let re = RealField::from_fn(g, |c| c[1] * 2.0 - c[0]).unwrap();
        let rh = RealField::from_fn(g, |c| c[2].sin()).unwrap();
        let je = VectorField::from_values(g, (0..g.len()).map(|_| Vec3C::real(rvec(&mut rng))).collect()).unwrap();
        let jh = VectorField::from_values(g, (0..g.len()).map(|_| Vec3C::real(rvec(&mut rng))).collect()).unwrap();
        let t = assemble_charge_current(&re, &rh, &je, &jh, &m).unwrap();
        let (re2, rh2, je2, jh2) = t.components(&m);
        for k in 0..g.len() {
            assert!((re2.values()[k] - re.values()[k]).abs() < 1e-13);
            assert!((rh2.values()[k] - rh.values()[k]).abs() < 1e-13);
            assert!((je2.values()[k] - je.values()[k]).norm() < 1e-13);
            assert!((jh2.values()[k] - jh.values()[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn energy_momentum_ordering() {
        // ½A∘A* reproduces (W, P); ½A*∘A flips the sign of P
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let m = MediumConstants::new(rng.gen_range(0.2..5.0), rng.gen_range(0.2..5.0)).unwrap();
            let (e, h) = (rvec(&mut rng), rvec(&mut rng));
            let a = Biquaternion::vector(Vec3C::from_parts(
                e.map(|x| x * m.eps().sqrt()),
                h.map(|x| x * m.mu().sqrt()),
            ));
            let (w, p) = energy_momentum_components(e, h, &m);
            let oracle = Biquaternion::new(C64::new(w, 0.0), Vec3C::from_parts([0.0; 3], p));
            assert!(rel_dist(&energy_momentum_node(&a), &oracle) < 1e-13);
            let rev = energy_momentum_node_reversed(&a);
            assert!(rel_dist(&rev, &oracle.bar()) < 1e-13);
            assert!(Vec3C::real(p).norm() <= w + 1e-12);
        }
        let a = Biquaternion::vector(Vec3C::new(C64::new(1.0, 0.0), I, C64::default()));
        let xi = energy_momentum_node(&a);
        assert!(
            rel_dist(
                &xi,
                &Biquaternion::new(C64::new(1.0, 0.0), Vec3C::new(C64::default(), C64::default(), I))
            ) < 1e-15
        );
        // E ∥ H gives no flux
        let a = Biquaternion::vector(Vec3C::from_parts([1.0, 2.0, 0.0], [2.0, 4.0, 0.0]));
        assert!(energy_momentum_node(&a).v.norm() < 1e-15);
    }

    #[test]
    fn energy_source_component_form_matches_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let m = MediumConstants::new(rng.gen_range(0.2..5.0), rng.gen_range(0.2..5.0)).unwrap();
            let (e, h, je, jh) = (rvec(&mut rng), rvec(&mut rng), rvec(&mut rng), rvec(&mut rng));
            let a = Vec3C::from_parts(e.map(|x| x * m.eps().sqrt()), h.map(|x| x * m.mu().sqrt()));
            let j = Vec3C::from_parts(je.map(|x| x * m.mu().sqrt()), jh.map(|x| -x * m.eps().sqrt()));
            let lhs = -j.dot(&a.conj()).re;
            assert!((lhs - energy_source_component_form(je, jh, e, h, &m)).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_examples() {
        let g = small_grid();
        let a = FieldStrength(BiquatField::from_fn(g, |c| strength_node(C64::new(c[0], 0.0), Vec3C::ZERO)).unwrap());
        let t = theta_of_field(&a).unwrap();
        for (r, j) in t.rho().values().iter().zip(t.current().values()) {
            assert!((*r - C64::new(-1.0, 0.0)).norm() < 1e-12);
            assert!(j.norm() < 1e-12);
        }
        // div A = 2x + 2z, a = 0 → ρ = div A
        let a = FieldStrength(
            BiquatField::from_fn(g, |c| {
                Biquaternion::vector(Vec3C::real([c[1] * c[1], 0.0, c[3] * c[3]]))
            })
            .unwrap(),
        );
        let t = theta_of_field(&a).unwrap();
        for (k, r) in t.rho().values().iter().enumerate() {
            let c = g.coord_of(k);
            let idx = g.multi_index(k);
            if g.in_margin(idx, 1) {
                assert!((*r - C64::new(2.0 * c[1] + 2.0 * c[3], 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn maxwell_residual_linear_in_theta() {
        let g = small_grid();
        let a = FieldStrength(
            BiquatField::from_fn(g, |c| Biquaternion::vector(Vec3C::real([c[2], c[0] * c[1], 0.0]))).unwrap(),
        );
        let t = theta_of_field(&a).unwrap();
        let delta = Biquaternion::new(C64::new(0.1, -0.2), Vec3C::real([0.3, 0.0, 1.0]));
        let tp = ChargeCurrent(t.0.map(move |x| *x + delta));
        let r = maxwell_residual(&a, &tp).unwrap();
        assert!(r.values().iter().all(|x| (*x + delta).norm() < 1e-14));
    }

    fn trig_theta(g: Grid4) -> ChargeCurrent {
        ChargeCurrent(
            BiquatField::from_fn(g, |c| {
                let [t, x, y, z] = c;
                Biquaternion::new(
                    C64::new((t + x).sin(), (y - z).cos()),
                    Vec3C::from_parts(
                        [(x * y).cos(), t * z, (x + 2.0 * t).sin()],
                        [y.sin(), (z + t).cos(), x * x],
                    ),
                )
            })
            .unwrap(),
        )
    }

    #[test]
    fn wave_source_component_form_equals_d_minus() {
        let g = small_grid();
        let t = trig_theta(g);
        let comp = wave_source_component_form(&t).unwrap();
        let dm = grid::d_minus(&t.0).unwrap();
        for (c, d) in comp.values().iter().zip(dm.values()) {
            assert!((*c - d.v).norm() < 1e-10);
        }
    }

    #[test]
    fn wave_residual_second_order() {
        let field = |g: Grid4| {
            FieldStrength(
                BiquatField::from_fn(g, |c| {
                    let [t, x, y, z] = c;
                    Biquaternion::vector(Vec3C::from_parts(
                        [(t - 0.5 * x).sin(), (y + z).cos(), x * t],
                        [(x + y).sin(), 0.0, (z - t).cos()],
                    ))
                })
                .unwrap(),
            )
        };
        let mut errs = vec![];
        for n in [9usize, 17] {
            let h = 0.8 / (n - 1) as f64;
            let g = Grid4::new([n; 4], 0.5 * h, h, [0.0; 4]).unwrap();
            let a = field(g);
            let t = theta_of_field(&a).unwrap();
            errs.push(wave_residual(&a, &t).unwrap().max_norm());
        }
        let ratio = errs[0] / errs[1];
        assert!((3.0..5.0).contains(&ratio), "{errs:?}");
    }

    #[test]
    fn charge_conservation_examples() {
        let g = small_grid();
        let t =
            ChargeCurrent(BiquatField::from_fn(g, |c| charge_current_node(C64::new(c[0], 0.0), Vec3C::ZERO)).unwrap());
        assert!(charge_conservation_residual(&t)
            .unwrap()
            .values()
            .iter()
            .all(|r| (*r - 1.0).norm() < 1e-12));
        // J₀ = (x², xy, 0), div J₀ = 3x; ρ = −3xτ + y
        let t = ChargeCurrent(
            BiquatField::from_fn(g, |c| {
                let [t, x, y, _] = c;
                charge_current_node(C64::new(-3.0 * x * t + y, 0.0), Vec3C::real([x * x, x * y, 0.0]))
            })
            .unwrap(),
        );
        assert!(charge_conservation_residual(&t).unwrap().max_norm() < 1e-10);
        // a Maxwell-consistent pair conserves charge to stencil order
        let a = FieldStrength(
            BiquatField::from_fn(g, |c| {
                Biquaternion::vector(Vec3C::real([c[0] * c[1] * c[2], c[2] * c[2], 0.0]))
            })
            .unwrap(),
        );
        let t = theta_of_field(&a).unwrap();
        assert!(charge_conservation_residual(&t).unwrap().max_norm() < 1e-10);
    }

    #[test]
    fn plane_wave_energy_balance() {
        let mut errs = vec![];
        for n in [9usize, 17] {
            let h = 1.0 / (n - 1) as f64;
            let g = Grid4::new([n; 4], 0.5 * h, h, [0.0; 4]).unwrap();
            // E = e₂ cos(τ − x), H = e₃ cos(τ − x): a free wave along e₁
            let a = FieldStrength(
                BiquatField::from_fn(g, |c| {
                    let p = (c[0] - c[1]).cos();
                    Biquaternion::vector(Vec3C::from_parts([0.0, p, 0.0], [0.0, 0.0, p]))
                })
                .unwrap(),
            );
            let t = theta_of_field(&a).unwrap();
            assert!(t.0.max_norm() < 1e-1);
            errs.push(
                energy_conservation_residual(&a, &ChargeCurrent(BiquatField::zeros(g)))
                    .unwrap()
                    .max_norm(),
            );
        }
        assert!(errs[1] < 1e-2 && errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn energy_residual_for_consistent_pair() {
        let g = Grid4::new([9, 9, 9, 9], 0.05, 0.1, [0.0; 4]).unwrap();
        let a = FieldStrength(
            BiquatField::from_fn(g, |c| {
                let [t, x, y, z] = c;
                Biquaternion::vector(Vec3C::from_parts(
                    [(t + y).sin(), x * z, 0.2],
                    [z.cos(), t * x, (y - t).sin()],
                ))
            })
            .unwrap(),
        );
        let t = theta_of_field(&a).unwrap();
        let r = energy_conservation_residual(&a, &t).unwrap();
        assert!(r.max_norm() < 1e-2, "{}", r.max_norm());
    }

    #[test]
    fn lorenz_gauge() {
        let g = small_grid();
        // φ = τ x, Ψ = (τ x, 0, 0): ∂τφ − div Ψ = x − τ
        let p = Potential(
            BiquatField::from_fn(g, |c| {
                potential_node(C64::new(c[0] * c[1], 0.0), Vec3C::real([c[0] * c[1], 0.0, 0.0]))
            })
            .unwrap(),
        );
        let r = p.lorenz_gauge_residual().unwrap();
        for (k, v) in r.values().iter().enumerate() {
            let c = g.coord_of(k);
            assert!((*v - C64::new(c[1] - c[0], 0.0)).norm() < 1e-10);
        }
        assert!(p.strength().is_ok());
    }
}
