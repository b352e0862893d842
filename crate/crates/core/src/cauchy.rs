//! Cauchy problems for `D±K = G` through light-cone convolutions.
//!
//! With `ψ = (4π‖x‖)⁻¹ δ(τ − ‖x‖)` the two convolutions are
//!
//! ```text
//! u = (H G) ∗ ψ  = (4π)⁻¹ ∫_{r≤τ} G(τ − r, y) / r dV(y)
//! v = K₀ ∗ₓ ψ    = (τ/4π) ∮ K₀(x + τn) dΩ(n)
//! ```
//!
//! `u + v` solves `□Φ = G` with `Φ(0) = 0`, `∂τΦ(0) = K₀`, so
//! `K = D∓(u + v)` solves `D±K = G` with `K(0) = K₀`. The outer gradient is
//! taken by finite differences of the quadrature functionals. Applying it
//! outside the convolution means no separate `G(0)∗ₓψ` term appears.
//!
//! Radial integrals use Gauss–Legendre shells, angular integrals a
//! [`SphereQuadrature`]. A compact [`Support`] clips the radial interval,
//! so points whose backward cone misses the support get exactly zero.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biquat::{Biquaternion, C64, I};
use crate::error::{Error, Result};
use crate::grid::{nabla_product, BiquatField, Field, Grid4, Interpolation, Sign};
use crate::quadrature::{gauss_legendre, SphereQuadrature};

pub type SourceFn = Arc<dyn Fn(f64, [f64; 3]) -> Biquaternion + Send + Sync>;
pub type InitialFn = Arc<dyn Fn([f64; 3]) -> Biquaternion + Send + Sync>;

/// Smallest admissible finite-difference step, `ε^{1/3}`.
pub fn step_floor() -> f64 {
    f64::EPSILON.cbrt()
}

/// Spatial ball outside which a callable vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Support {
    /// Radial interval `[lo, hi]` of spheres about `x` that meet the ball.
    fn radial_window(&self, x: [f64; 3]) -> (f64, f64) {
        let d = dist(x, self.center);
        ((d - self.radius).max(0.0), d + self.radius)
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Source `G(τ, x)` and initial data `K₀(x)`, either of which may be absent.
#[derive(Clone, Default)]
pub struct SourceSpec {
    pub source: Option<SourceFn>,
    pub source_support: Option<Support>,
    pub initial: Option<InitialFn>,
    pub initial_support: Option<Support>,
}

impl SourceSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_source(mut self, g: SourceFn, support: Option<Support>) -> Self {
        self.source = Some(g);
        self.source_support = support;
        self
    }

    pub fn with_initial(mut self, k0: InitialFn, support: Option<Support>) -> Self {
        self.initial = Some(k0);
        self.initial_support = support;
        self
    }
}

/// Solver settings, shared by the point solvers and the Picard iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub sphere_degree: usize,
    pub radial_shells: usize,
    /// Finite-difference step for the outer gradient. `None` picks `1e-3`
    /// for point evaluations and for [`cauchy_solve_grid`] (capped at the
    /// grid spacing), and `max(min(Δτ, h), ε^{1/3})` for the Picard solver.
    pub delta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub omega: f64,
    /// Maximum integrand evaluations per solution value.
    pub budget: u64,
    /// Picard iterates above this magnitude count as divergence.
    pub divergence_bound: f64,
    /// Sampling of grid-valued sources inside the Picard iteration.
    pub interpolation: Interpolation,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sphere_degree: 16,
            radial_shells: 32,
            delta: None,
            tol: 1e-8,
            max_iter: 50,
            omega: 1.0,
            budget: 50_000_000,
            divergence_bound: 1e6,
            interpolation: Interpolation::Linear,
        }
    }
}

/// Quadrature rules for the cone integrals plus the solver settings.
#[derive(Debug, Clone)]
pub struct ConeQuadrature {
    pub sphere: SphereQuadrature,
    radial_x: Vec<f64>,
    radial_w: Vec<f64>,
    pub config: SolverConfig,
}

impl ConeQuadrature {
    pub fn new(config: SolverConfig) -> Result<Self> {
        if config.radial_shells == 0 {
            return Err(Error::InvalidParameter("radial_shells must be >= 1".into()));
        }
        if !(config.omega > 0.0 && config.omega <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "omega must lie in (0, 1], got {}",
                config.omega
            )));
        }
        let (radial_x, radial_w) = gauss_legendre(config.radial_shells);
        Ok(ConeQuadrature {
            sphere: SphereQuadrature::new(config.sphere_degree)?,
            radial_x,
            radial_w,
            config,
        })
    }

    fn point_delta(&self) -> f64 {
        self.config.delta.unwrap_or(1e-3)
    }

    /// The solution is exact at `τ = 0`, so a step comparable to `Δτ` would
    /// leave an `O(δ²/Δτ)` kink in grid τ-derivatives.
    fn solve_grid_delta(&self, g: &Grid4) -> f64 {
        self.config
            .delta
            .unwrap_or(g.d_tau.min(g.h).min(1e-3).max(step_floor()))
    }

    fn grid_delta(&self, g: &Grid4) -> f64 {
        self.config.delta.unwrap_or(g.d_tau.min(g.h).max(step_floor()))
    }

    /// Integrand evaluations needed for one solution value.
    fn cost(&self, spec: &SourceSpec) -> u64 {
        let n = self.sphere.len() as u64;
        let per =
            spec.source.as_ref().map_or(0, |_| n * self.radial_x.len() as u64) + spec.initial.as_ref().map_or(0, |_| n);
        9 * per
    }

    fn check_budget(&self, spec: &SourceSpec) -> Result<()> {
        let required = self.cost(spec);
        if required > self.config.budget {
            return Err(Error::QuadratureBudgetExceeded {
                required,
                budget: self.config.budget,
            });
        }
        Ok(())
    }
}

/// `τ⁻¹ ∮_{‖y−x‖=τ} f(y) dS = τ Σ wᵢ f(x + τnᵢ)`; zero at `τ = 0`.
pub fn sphere_mean<F>(f: F, center: [f64; 3], radius: f64, q: &SphereQuadrature) -> Biquaternion
where
    F: Fn([f64; 3]) -> Biquaternion,
{
    if radius == 0.0 {
        return Biquaternion::ZERO;
    }
    let mut acc = Biquaternion::ZERO;
    for (n, w) in q.nodes.iter().zip(&q.weights) {
        let y = [
            center[0] + radius * n[0],
            center[1] + radius * n[1],
            center[2] + radius * n[2],
        ];
        acc += f(y) * *w;
    }
    acc * radius
}

/// `(4π)⁻¹ ∫_{r≤τ} G(τ − r, y)/r dV(y)`.
pub fn convolve_wave(
    g: &SourceFn,
    support: Option<Support>,
    tau: f64,
    x: [f64; 3],
    q: &ConeQuadrature,
) -> Biquaternion {
    let (mut lo, mut hi) = (0.0f64, tau);
    if let Some(s) = support {
        let (a, b) = s.radial_window(x);
        lo = lo.max(a);
        hi = hi.min(b);
    }
    if hi <= lo {
        return Biquaternion::ZERO;
    }
    let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
    let mut acc = Biquaternion::ZERO;
    for (t, w) in q.radial_x.iter().zip(&q.radial_w) {
        let r = mid + half * t;
        let shell = sphere_mean(|y| g(tau - r, y), x, r, &q.sphere);
        acc += shell * *w;
    }
    acc * (half / (4.0 * PI))
}

/// `K₀ ∗ₓ ψ = (τ/4π) ∮ K₀(x + τn) dΩ`.
pub fn initial_term(
    k0: &InitialFn,
    support: Option<Support>,
    tau: f64,
    x: [f64; 3],
    q: &ConeQuadrature,
) -> Biquaternion {
    if let Some(s) = support {
        let (a, b) = s.radial_window(x);
        if tau < a || tau > b {
            return Biquaternion::ZERO;
        }
    }
    sphere_mean(|y| k0(y), x, tau, &q.sphere) * (1.0 / (4.0 * PI))
}

/// `u + v` at `(τ, x)`.
pub fn wave_potential(spec: &SourceSpec, tau: f64, x: [f64; 3], q: &ConeQuadrature) -> Result<Biquaternion> {
    let mut acc = Biquaternion::ZERO;
    if let Some(g) = &spec.source {
        acc += convolve_wave(g, spec.source_support, tau, x, q);
    }
    if let Some(k0) = &spec.initial {
        acc += initial_term(k0, spec.initial_support, tau, x, q);
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite(format!("wave potential at tau={tau}, x={x:?}")));
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TauStencil {
    Central,
    Forward,
    Backward,
}

/// Picks the τ-stencil and step for a gradient at `τ` when the functional is
/// only available on `[0, horizon]`.
fn tau_stencil(tau: f64, delta: f64, horizon: f64) -> Result<(TauStencil, f64)> {
    let central = tau.min(horizon - tau);
    let forward = 0.5 * (horizon - tau);
    let backward = 0.5 * tau;
    let (kind, d) = if central >= delta {
        (TauStencil::Central, delta)
    } else if forward >= delta {
        (TauStencil::Forward, delta)
    } else if backward >= delta {
        (TauStencil::Backward, delta)
    } else {
        [
            (TauStencil::Central, central),
            (TauStencil::Forward, forward),
            (TauStencil::Backward, backward),
        ]
        .into_iter()
        .fold((TauStencil::Central, f64::NEG_INFINITY), |best, c| {
            if c.1 > best.1 {
                c
            } else {
                best
            }
        })
    };
    if d < step_floor() {
        return Err(Error::StepTooSmall {
            delta: d,
            floor: step_floor(),
        });
    }
    Ok((kind, d))
}

/// `∂τΦ + s·i Σⱼ eⱼ∘∂ⱼΦ` by finite differences of `phi` with step `delta`.
fn gradient_fd<P>(phi: P, sign: Sign, tau: f64, x: [f64; 3], delta: f64, horizon: f64) -> Result<Biquaternion>
where
    P: Fn(f64, [f64; 3]) -> Result<Biquaternion>,
{
    let (kind, d) = tau_stencil(tau, delta, horizon)?;
    let inv = 0.5 / d;
    let dt = match kind {
        TauStencil::Central => (phi(tau + d, x)? - phi(tau - d, x)?) * inv,
        TauStencil::Forward => (phi(tau + d, x)? * 4.0 - phi(tau, x)? * 3.0 - phi(tau + 2.0 * d, x)?) * inv,
        TauStencil::Backward => (phi(tau, x)? * 3.0 - phi(tau - d, x)? * 4.0 + phi(tau - 2.0 * d, x)?) * inv,
    };
    let mut ds = [Biquaternion::ZERO; 3];
    for (j, dj) in ds.iter_mut().enumerate() {
        let mut xp = x;
        let mut xm = x;
        xp[j] += d;
        xm[j] -= d;
        *dj = (phi(tau, xp)? - phi(tau, xm)?) * inv;
    }
    Ok(dt + nabla_product(&ds) * (I * sign.value()))
}

/// Solution of `D^sign K = G`, `K(0, ·) = K₀` at one point. At `τ = 0`
/// returns `K₀(x)`.
pub fn cauchy_solve(sign: Sign, spec: &SourceSpec, tau: f64, x: [f64; 3], q: &ConeQuadrature) -> Result<Biquaternion> {
    cauchy_solve_with(sign, spec, tau, x, q, q.point_delta(), f64::INFINITY)
}

fn cauchy_solve_with(
    sign: Sign,
    spec: &SourceSpec,
    tau: f64,
    x: [f64; 3],
    q: &ConeQuadrature,
    delta: f64,
    horizon: f64,
) -> Result<Biquaternion> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cauchy_solve needs tau >= 0, got {tau}"
        )));
    }
    q.check_budget(spec)?;
    if tau == 0.0 {
        return Ok(spec.initial.as_ref().map_or(Biquaternion::ZERO, |k0| k0(x)));
    }
    gradient_fd(
        |t, y| wave_potential(spec, t, y, q),
        sign.flip(),
        tau,
        x,
        delta,
        horizon,
    )
}

/// `D⁺A = Θ` with `A(0) = A₀`: `spec.source` is `Θ`, `spec.initial` is `A₀`.
pub fn maxwell_cauchy(spec: &SourceSpec, tau: f64, x: [f64; 3], q: &ConeQuadrature) -> Result<Biquaternion> {
    cauchy_solve(Sign::Plus, spec, tau, x, q)
}

/// Free charge-current under the inertia law `D⁻Θ = 0`, `Θ(0) = Θ₀`.
pub fn free_theta_evolve(
    theta0: &InitialFn,
    support: Option<Support>,
    tau: f64,
    x: [f64; 3],
    q: &ConeQuadrature,
) -> Result<Biquaternion> {
    let spec = SourceSpec::new().with_initial(theta0.clone(), support);
    cauchy_solve(Sign::Minus, &spec, tau, x, q)
}

/// [`cauchy_solve`] at every node of `grid` (nodes need `τ ≥ 0`).
pub fn cauchy_solve_grid(sign: Sign, spec: &SourceSpec, grid: Grid4, q: &ConeQuadrature) -> Result<BiquatField> {
    if grid.origin[0] < 0.0 {
        return Err(Error::InvalidGrid("solver grids must start at tau >= 0".into()));
    }
    q.check_budget(spec)?;
    let delta = q.solve_grid_delta(&grid);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let c = grid.coord_of(k);
            cauchy_solve_with(sign, spec, c[0], [c[1], c[2], c[3]], q, delta, f64::INFINITY)
        })
        .collect::<Result<Vec<_>>>()?;
    Field::from_values(grid, values)
}

/// Outcome of [`cauchy_self_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfCheck {
    /// `|D^sign K − G|` with `D^sign` discretized on the output stencil.
    pub residual: f64,
    pub source_magnitude: f64,
    pub h: f64,
}

/// Applies a discrete `D^sign` with spacing `h` to solver outputs around
/// `(τ, x)` and compares with `G(τ, x)`.
pub fn cauchy_self_check(
    sign: Sign,
    spec: &SourceSpec,
    tau: f64,
    x: [f64; 3],
    h: f64,
    q: &ConeQuadrature,
) -> Result<SelfCheck> {
    let k = |t: f64, y: [f64; 3]| cauchy_solve(sign, spec, t, y, q);
    let d = gradient_fd(k, sign, tau, x, h, f64::INFINITY)?;
    let g = spec.source.as_ref().map_or(Biquaternion::ZERO, |g| g(tau, x));
    Ok(SelfCheck {
        residual: (d - g).norm(),
        source_magnitude: g.norm(),
        h,
    })
}

/// Right side of the transformation equation at a node: the force-power
/// `F(Θ, τ, x)` acting on the current iterate.
pub type ForceFn<'a> = &'a (dyn Fn(&Biquaternion, [f64; 4]) -> Biquaternion + Sync);

/// Data for `κD⁻Θ = F(Θ)`, `Θ(0) = Θ₀`.
pub struct PicardProblem<'a> {
    pub theta0: InitialFn,
    pub theta0_support: Option<Support>,
    pub force: ForceFn<'a>,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub iterations: usize,
    /// `‖Θⁿ⁺¹ − Θⁿ‖∞` over the grid, per iteration.
    pub increments: Vec<f64>,
    /// Ratios of successive increments.
    pub contraction: Vec<f64>,
    pub converged: bool,
    pub valid_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub theta: BiquatField,
    /// Nodes whose backward cone (plus the gradient stencil) stays inside
    /// the grid, so the interpolated source is complete there.
    pub valid: Vec<bool>,
    pub free: BiquatField,
    pub report: PicardReport,
}

/// Nodes whose ball of radius `τ + 3δ` lies inside the spatial box.
pub fn cone_validity(grid: &Grid4, delta: f64) -> Vec<bool> {
    let lo = grid.origin;
    let hi = grid.upper();
    (0..grid.len())
        .map(|k| {
            let c = grid.coord_of(k);
            let r = c[0] + 3.0 * delta;
            (1..4).all(|a| c[a] - r >= lo[a] - 1e-12 && c[a] + r <= hi[a] + 1e-12)
        })
        .collect()
}

/// Fixed-point iteration for `Θ = D⁺{Θ₀ ∗ₓ ψ} + κ⁻¹ D⁺{(H F(Θ)) ∗ ψ}`.
///
/// The source is sampled from the current iterate on `grid` (zero outside
/// the box); the grid must start at `τ = 0`. Iteration starts from free
/// evolution and relaxes with `ω`.
pub fn transform_picard(problem: &PicardProblem<'_>, grid: Grid4, q: &ConeQuadrature) -> Result<PicardSolution> {
    let cfg = q.config;
    if !(problem.kappa > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa must be > 0, got {}",
            problem.kappa
        )));
    }
    if grid.origin[0].abs() > 1e-12 {
        return Err(Error::InvalidGrid("Picard grids must start at tau = 0".into()));
    }
    let free_spec = SourceSpec::new().with_initial(problem.theta0.clone(), problem.theta0_support);
    let free = cauchy_solve_grid(Sign::Minus, &free_spec, grid, q)?;
    let delta = q.grid_delta(&grid);
    let valid = cone_validity(&grid, delta);
    let valid_nodes = valid.iter().filter(|&&v| v).count();
    let horizon = grid.upper()[0];
    let interp = cfg.interpolation;

    let mut theta = free.clone();
    let mut increments = Vec::new();
    let mut contraction = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let force_vals: Vec<Biquaternion> = theta
            .values()
            .par_iter()
            .enumerate()
            .map(|(k, t)| (problem.force)(t, grid.coord_of(k)))
            .collect();
        let force = Arc::new(Field::from_parts(grid, force_vals, 0));
        let src: SourceFn = {
            let f = force.clone();
            Arc::new(move |t: f64, y: [f64; 3]| f.sample([t, y[0], y[1], y[2]], interp).unwrap_or_default())
        };
        let spec = SourceSpec::new().with_source(src, None);
        q.check_budget(&spec)?;
        let inv_kappa = 1.0 / problem.kappa;
        let forced = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let c = grid.coord_of(k);
                if c[0] == 0.0 {
                    return Ok(Biquaternion::ZERO);
                }
                gradient_fd(
                    |t, y| wave_potential(&spec, t, y, q),
                    Sign::Plus,
                    c[0],
                    [c[1], c[2], c[3]],
                    delta,
                    horizon,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let omega = cfg.omega;
        let next: Vec<Biquaternion> = theta
            .values()
            .iter()
            .zip(free.values())
            .zip(&forced)
            .map(|((old, fr), fo)| *old * (1.0 - omega) + (*fr + *fo * inv_kappa) * omega)
            .collect();
        let mut inc = 0.0f64;
        let mut mag = 0.0f64;
        for k in 0..grid.len() {
            if !next[k].is_finite() {
                return Err(Error::Divergence {
                    iteration: iterations,
                    magnitude: f64::INFINITY,
                    bound: cfg.divergence_bound,
                });
            }
            inc = inc.max((next[k] - theta.values()[k]).norm());
            mag = mag.max(next[k].norm());
        }
        if mag > cfg.divergence_bound {
            return Err(Error::Divergence {
                iteration: iterations,
                magnitude: mag,
                bound: cfg.divergence_bound,
            });
        }
        if let Some(prev) = increments.last() {
            let prev: f64 = *prev;
            contraction.push(if prev > 0.0 { inc / prev } else { 0.0 });
        }
        increments.push(inc);
        theta = Field::from_parts(grid, next, 0);
        log::debug!("picard iteration {iterations}: increment {inc:.3e}");
        if inc < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(PicardSolution {
        theta,
        valid,
        free,
        report: PicardReport {
            iterations,
            increments,
            contraction,
            converged,
            valid_nodes,
        },
    })
}

/// Convenience for scalar sources: `G(τ, x) = g(τ, x)` as a biquaternion scalar.
pub fn scalar_source<F>(g: F) -> SourceFn
where
    F: Fn(f64, [f64; 3]) -> f64 + Send + Sync + 'static,
{
    Arc::new(move |t, x| Biquaternion::scalar(C64::new(g(t, x), 0.0)))
}
