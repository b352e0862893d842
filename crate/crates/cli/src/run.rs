//! The scenario pipeline: build fields, solve, transform, audit, write.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use egm_core::cauchy::{self, ConeQuadrature, PicardProblem};
use egm_core::emfield::{self, ChargeCurrent, FieldStrength, MediumConstants};
use egm_core::grid::{Field, Stats};
use egm_core::interact::{self, InteractingField, Kappa};
use egm_core::lorentz::{self, CovarianceOptions, TransformParams};
use egm_core::{fieldio, BiquatField, Biquaternion, Grid4, Vec3C, C64};
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use crate::expr::Expr;
use crate::scenario::{self, FieldSource, Law, Scenario};
use crate::CliError;

/// One row of the audit report. `pass ⇔ residual_max ≤ tolerance`.
#[derive(Debug, Clone, Serialize)]
pub struct AuditResult {
    pub name: String,
    pub residual_max: f64,
    pub residual_mean: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub details: Value,
}

/// A field ready for auditing.
#[derive(Debug, Clone)]
pub struct BuiltField {
    pub name: String,
    pub medium: MediumConstants,
    pub kappa: Kappa,
    pub strength: BiquatField,
    pub theta: BiquatField,
    /// `A'` acting on this field.
    pub external: BiquatField,
    /// Nodes where the field is trusted; `None` means all.
    pub mask: Option<Vec<bool>>,
}

impl BuiltField {
    fn stats_of<T: egm_core::grid::Linear>(&self, f: &Field<T>) -> Stats {
        match &self.mask {
            Some(m) => f.stats_where(|k| m[k]),
            None => f.stats(),
        }
    }
}

pub struct Outcome {
    pub report: Value,
    pub out_dir: PathBuf,
    pub passed: bool,
}

fn runtime(context: &str) -> impl Fn(egm_core::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

fn parse_components(exprs: &[String], what: &str) -> Result<Vec<Expr>, CliError> {
    exprs
        .iter()
        .enumerate()
        .map(|(j, s)| Expr::parse(s).map_err(|e| CliError::Config(format!("{what}[{j}] '{s}': parse error {e}"))))
        .collect()
}

fn assemble(parts: &[Expr], c: [f64; 4]) -> Biquaternion {
    let v = |k: usize| parts.get(k).map_or(C64::new(0.0, 0.0), |e| e.eval(c));
    Biquaternion::new(v(0), Vec3C::new(v(1), v(2), v(3)))
}

/// Evaluates component expressions on every node of `grid`.
pub fn expression_field(exprs: &[String], grid: Grid4, what: &str) -> Result<BiquatField, CliError> {
    let parts = parse_components(exprs, what)?;
    let values: Vec<Biquaternion> = (0..grid.len()).map(|k| assemble(&parts, grid.coord_of(k))).collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(non_finite(what, grid.coord_of(k)));
    }
    BiquatField::from_values(grid, values).map_err(runtime(what))
}

fn non_finite(what: &str, c: [f64; 4]) -> CliError {
    CliError::Config(format!(
        "{what}: NonFiniteValue at node (tau, x, y, z) = ({}, {}, {}, {})",
        c[0], c[1], c[2], c[3]
    ))
}

fn check_finite(f: &BiquatField, what: &str) -> Result<(), CliError> {
    if let Some(k) = f.values().iter().position(|v| !v.is_finite()) {
        return Err(non_finite(what, f.grid().coord_of(k)));
    }
    Ok(())
}

fn load_source(src: &FieldSource, grid: Grid4, base: &Path, what: &str) -> Result<BiquatField, CliError> {
    match src {
        FieldSource::Exprs(e) => expression_field(e, grid, what),
        FieldSource::Csv { csv } => {
            let f = fieldio::read_field(&base.join(csv)).map_err(|e| CliError::Config(format!("{what}: {e}")))?;
            if !f.grid().same_as(&grid) {
                return Err(CliError::Config(format!(
                    "{what}: grid of {} does not match the scenario grid",
                    csv.display()
                )));
            }
            check_finite(&f, what)?;
            Ok(f)
        }
    }
}

/// Builds every field, including the Picard solution. Any failure here is
/// reported before artifacts are written.
pub fn build_fields(s: &Scenario, base: &Path) -> Result<(Vec<BuiltField>, Value), CliError> {
    let Some(grid) = s.grid else {
        return Ok((Vec::new(), Value::Null));
    };
    let mut out = Vec::new();
    let mut externals = Vec::new();
    for (k, f) in s.fields.iter().enumerate() {
        let load = |src: &Option<FieldSource>, part: &str| -> Result<Option<BiquatField>, CliError> {
            src.as_ref()
                .map(|src| load_source(src, grid, base, &format!("fields[{k}].{part}")))
                .transpose()
        };
        let strength = load(&f.strength, "strength")?.unwrap_or_else(|| BiquatField::zeros(grid));
        let theta = load(&f.theta, "theta")?.unwrap_or_else(|| BiquatField::zeros(grid));
        externals.push(load(&f.external, "external")?);
        out.push(BuiltField {
            name: f.name.clone(),
            medium: f.medium,
            kappa: s.kappa,
            strength,
            theta,
            external: BiquatField::zeros(grid),
            mask: None,
        });
    }
    for k in 0..out.len() {
        out[k].external = match externals[k].take() {
            Some(e) => e,
            None => {
                let mut sum = BiquatField::zeros(grid);
                for (m, other) in out.iter().enumerate() {
                    if m != k {
                        sum = sum.add(&other.strength).map_err(runtime("external strength"))?;
                    }
                }
                sum
            }
        };
    }

    let mut picard_report = Value::Null;
    if let Some(p) = &s.picard {
        info!("solving the transformation equation for '{}'", p.name);
        let theta0 = parse_components(&p.theta0, "picard.theta0")?;
        let ext = parse_components(&p.external, "picard.external")?;
        let external = expression_field(&p.external, grid, "picard.external")?;
        let init: cauchy::InitialFn = Arc::new(move |x: [f64; 3]| assemble(&theta0, [0.0, x[0], x[1], x[2]]));
        let force = move |t: &Biquaternion, c: [f64; 4]| *t * assemble(&ext, c);
        let problem = PicardProblem {
            theta0: init,
            theta0_support: None,
            force: &force,
            kappa: p.kappa.value(),
        };
        let q = ConeQuadrature::new(p.solver).map_err(|e| CliError::Config(format!("picard.solver: {e}")))?;
        let sol = cauchy::transform_picard(&problem, grid, &q).map_err(runtime("picard"))?;
        if !sol.report.converged {
            warn!(
                "picard iteration did not reach tol after {} iterations",
                sol.report.iterations
            );
        }
        picard_report = serde_json::to_value(&sol.report).expect("report serializes");
        out.push(BuiltField {
            name: p.name.clone(),
            medium: MediumConstants::default(),
            kappa: p.kappa,
            strength: BiquatField::zeros(grid),
            theta: sol.theta,
            external,
            mask: Some(sol.valid),
        });
    }
    Ok((out, picard_report))
}

/// Per-field stats folded into one row.
struct Fold {
    max: f64,
    sum: f64,
    count: usize,
    details: Vec<Value>,
}

impl Fold {
    fn new() -> Self {
        Fold {
            max: 0.0,
            sum: 0.0,
            count: 0,
            details: Vec::new(),
        }
    }

    fn push(&mut self, label: &str, st: Stats, extra: Value) {
        self.max = if st.max.is_nan() || self.max.is_nan() {
            f64::NAN
        } else {
            self.max.max(st.max)
        };
        self.sum += st.mean * st.count as f64;
        self.count += st.count;
        let mut d = json!({"field": label, "residual_max": st.max, "residual_mean": st.mean, "nodes": st.count});
        if let (Value::Object(d), Value::Object(x)) = (&mut d, extra) {
            d.extend(x);
        }
        self.details.push(d);
    }

    fn finish(self, law: Law, tolerance: f64) -> AuditResult {
        let mean = if self.count > 0 {
            self.sum / self.count as f64
        } else {
            0.0
        };
        AuditResult {
            name: law.name().into(),
            residual_max: self.max,
            residual_mean: mean,
            tolerance,
            pass: self.max <= tolerance,
            details: Value::Array(self.details),
        }
    }
}

fn target_grid(t: &scenario::TransformSpec, grid: Option<Grid4>) -> Option<Grid4> {
    t.target.or(grid)
}

pub fn run_audit(law: Law, tolerance: f64, s: &Scenario, fields: &[BuiltField]) -> Result<AuditResult, CliError> {
    let mut fold = Fold::new();
    match law {
        Law::Maxwell => {
            for f in fields {
                let r = emfield::maxwell_residual(&FieldStrength(f.strength.clone()), &ChargeCurrent(f.theta.clone()))
                    .map_err(runtime("maxwell audit"))?;
                fold.push(&f.name, f.stats_of(&r), Value::Null);
            }
        }
        Law::Charge => {
            for f in fields {
                let r = emfield::charge_conservation_residual(&ChargeCurrent(f.theta.clone()))
                    .map_err(runtime("charge audit"))?;
                fold.push(&f.name, f.stats_of(&r), Value::Null);
            }
        }
        Law::Energy => {
            for f in fields {
                let r = emfield::energy_conservation_residual(
                    &FieldStrength(f.strength.clone()),
                    &ChargeCurrent(f.theta.clone()),
                )
                .map_err(runtime("energy audit"))?;
                fold.push(&f.name, f.stats_of(&r), Value::Null);
            }
        }
        Law::Covariance => {
            for (k, t) in s.transforms.iter().enumerate() {
                let ctx = format!("transforms[{k}]");
                let params = TransformParams::from_velocity(t.v, t.e, t.phi)
                    .map_err(|e| CliError::Config(format!("{ctx}: {e}")))?;
                let l = lorentz::make_transform(params);
                for f in fields {
                    let target = target_grid(t, s.grid).expect("validated");
                    let opts = CovarianceOptions {
                        interpolation: t.interpolation,
                        min_coverage: t.min_coverage,
                    };
                    let rep =
                        lorentz::covariance_residual(&l, &f.strength, &f.theta, target, opts).map_err(runtime(&ctx))?;
                    let st = Stats {
                        max: rep.residual_max,
                        mean: rep.residual_mean,
                        count: rep.interior_nodes,
                    };
                    let extra = json!({"transform": k, "report": rep});
                    fold.push(&f.name, st, extra);
                }
            }
        }
        Law::FirstLaw => {
            for f in fields {
                let force = interact::force_power_field(&f.theta, &f.external).map_err(runtime("first law audit"))?;
                let r = interact::first_law_residual(&f.theta, &force, f.kappa).map_err(runtime("first law audit"))?;
                let printed = interact::first_law_residual_printed(&f.theta, &force, f.kappa)
                    .map_err(runtime("first law audit"))?;
                let second = interact::second_law_residual(&f.theta, &f.external, f.kappa, Default::default())
                    .map_err(runtime("first law audit"))?;
                let extra = json!({
                    "printed_sign_residual_max": f.stats_of(&printed).max,
                    "second_law_residual_max": f.stats_of(&second).max,
                });
                fold.push(&f.name, f.stats_of(&r), extra);
            }
        }
        Law::InteractionEnergy => {
            if let Some(first) = fields.first() {
                let thetas: Vec<BiquatField> = fields.iter().map(|f| f.theta.clone()).collect();
                let ie = interact::interaction_energy(&thetas).map_err(runtime("interaction energy audit"))?;
                let g = *first.theta.grid();
                // ½(ΣΘ)∘(ΣΘ)* = Σ½Θᵏ∘Θᵏ* + ½δΞ
                let defect = (0..g.len())
                    .map(|k| {
                        let total: Biquaternion = thetas.iter().map(|t| t.values()[k]).sum();
                        let own: Biquaternion = thetas
                            .iter()
                            .map(|t| interact::theta_energy_product(&t.values()[k]))
                            .sum();
                        let dxi = Biquaternion::new(
                            C64::new(ie.delta_w.values()[k], 0.0),
                            ie.delta_p.values()[k] * egm_core::I,
                        );
                        interact::theta_energy_product(&total) - own - dxi * 0.5
                    })
                    .collect();
                let defect = BiquatField::from_values(g, defect).map_err(runtime("interaction energy audit"))?;
                let mut counts = std::collections::BTreeMap::new();
                for c in &ie.classes {
                    *counts.entry(c.as_str()).or_insert(0usize) += 1;
                }
                let extra = json!({
                    "total_delta_w": ie.total_delta_w,
                    "aggregate": ie.aggregate.as_str(),
                    "classification_tolerance": ie.tol,
                    "node_classes": counts,
                });
                fold.push("all", defect.stats(), extra);
            }
        }
        Law::ActionReaction => {
            for k in 0..fields.len() {
                for l in k + 1..fields.len() {
                    let (a, b) = (&fields[k], &fields[l]);
                    let r = interact::action_reaction_residual(&a.theta, &a.strength, &b.theta, &b.strength)
                        .map_err(runtime("action-reaction audit"))?;
                    fold.push(&format!("{}+{}", a.name, b.name), r.stats(), Value::Null);
                }
            }
        }
    }
    Ok(fold.finish(law, tolerance))
}

fn slice_of(f: &BiquatField, it: usize) -> BiquatField {
    let g = f.grid();
    let n = g.slice_len();
    BiquatField::from_values(g.slice_grid(it), f.values()[it * n..(it + 1) * n].to_vec()).expect("slice matches grid")
}

fn run_dynamics(s: &Scenario, fields: &[BuiltField]) -> Result<Option<(Value, Vec<interact::StepRecord>)>, CliError> {
    let Some(d) = &s.dynamics else { return Ok(None) };
    let state: Vec<InteractingField> = fields
        .iter()
        .map(|f| InteractingField {
            theta: slice_of(&f.theta, d.slice),
            a: slice_of(&f.strength, d.slice),
        })
        .collect();
    info!("running {} dynamics steps", d.steps);
    let (end, records) = interact::run_dynamics(state, &d.config, d.steps).map_err(runtime("dynamics"))?;
    let summary = json!({
        "steps": d.steps,
        "config": d.config,
        "final_tau": end.first().map(|f| f.theta.grid().origin[0]),
        "last": records.last(),
    });
    Ok(Some((summary, records)))
}

/// Runs a loaded scenario. Nothing is written unless every stage succeeds.
pub fn run_scenario(s: &Scenario, echo: Value, base: &Path, out_dir: Option<PathBuf>) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let (fields, picard) = build_fields(s, base)?;
    info!("built {} fields", fields.len());

    let mut audits = Vec::new();
    for a in &s.audits {
        let r = run_audit(a.law, a.tolerance, s, &fields)?;
        info!(
            "audit {}: max {:e} tol {:e} {}",
            r.name,
            r.residual_max,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        );
        audits.push(r);
    }
    let dynamics = run_dynamics(s, &fields)?;
    let passed = audits.iter().all(|a| a.pass);

    let payload = json!({
        "scenario": echo,
        "audits": audits,
        "picard": picard,
        "dynamics": dynamics.as_ref().map(|d| &d.0),
        "pass": passed,
    });
    let metadata = json!({
        "timestamp_unix": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        "egm_version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "elapsed_ms": started.elapsed().as_millis() as u64,
    });
    let report = json!({"payload": payload, "metadata": metadata});

    let out_dir = out_dir
        .or_else(|| s.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("egm_out"));
    write_artifacts(
        &out_dir,
        &report,
        s.output.write_fields.then_some(&fields[..]),
        dynamics.as_ref().map(|d| &d.1[..]),
    )?;
    Ok(Outcome {
        report,
        out_dir,
        passed,
    })
}

fn io_err(p: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", p.display()))
}

fn write_artifacts(
    dir: &Path,
    report: &Value,
    fields: Option<&[BuiltField]>,
    records: Option<&[interact::StepRecord]>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = dir.join("report.json");
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&p, text + "\n").map_err(io_err(&p))?;
    for f in fields.unwrap_or_default() {
        for (part, field) in [("strength", &f.strength), ("theta", &f.theta)] {
            let p = dir.join(format!("fields_{}_{part}.csv", f.name));
            fieldio::write_field(&p, field).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
        }
    }
    if let Some(records) = records {
        let p = dir.join("dynamics.jsonl");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&p).map_err(io_err(&p))?);
        for r in records {
            serde_json::to_writer(&mut w, r).expect("record serializes");
            w.write_all(b"\n").map_err(io_err(&p))?;
        }
        w.flush().map_err(io_err(&p))?;
    }
    Ok(())
}
