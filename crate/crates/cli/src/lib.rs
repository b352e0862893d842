//! Batch runner for the egm-core field model.
//!
//! `egm run` executes a JSON scenario (build fields, solve, transform,
//! audit) and writes `report.json`, `fields_*.csv` and `dynamics.jsonl`.
//! `egm audit` and `egm transform` work directly on CSV field dumps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod expr;
pub mod run;
pub mod scenario;

use std::path::{Path, PathBuf};

use egm_core::emfield::{self, ChargeCurrent, FieldStrength};
use egm_core::grid::{self, Interpolation, Stats};
use egm_core::lorentz::{self, FieldRule, TransformParams};
use egm_core::{fieldio, BiquatField};
use serde_json::json;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad scenario, arguments or inputs. Exit code 1; nothing is written.
    Config(String),
    /// A solver or I/O failure while running. Exit code 1.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_AUDIT_FAILED: i32 = 2;

/// Loads and runs a scenario; returns the exit code.
pub fn run_command(path: &Path, out: Option<PathBuf>, overrides: &[String]) -> Result<i32, CliError> {
    let (s, echo, base) = scenario::load(path, overrides)?;
    let outcome = run::run_scenario(&s, echo, &base, out)?;
    for a in outcome.report["payload"]["audits"].as_array().into_iter().flatten() {
        println!(
            "{:<20} max {:<12.4e} tol {:<10.3e} {}",
            a["name"].as_str().unwrap_or(""),
            a["residual_max"].as_f64().unwrap_or(f64::NAN),
            a["tolerance"].as_f64().unwrap_or(f64::NAN),
            if a["pass"].as_bool() == Some(true) {
                "pass"
            } else {
                "FAIL"
            }
        );
    }
    println!("report: {}", outcome.out_dir.join("report.json").display());
    Ok(if outcome.passed { EXIT_PASS } else { EXIT_AUDIT_FAILED })
}

/// Laws `egm audit` can check on a single field dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileLaw {
    /// File is `A`: `D⁺A − Θ`.
    Maxwell,
    /// File is `Θ`: `D⁻Θ`.
    Inertia,
    /// File is `Θ`: `∂τρ + div J`.
    Charge,
    /// File is `A`: `∂τW + div P + Re(J, Ā)`.
    Energy,
}

impl std::str::FromStr for FileLaw {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "maxwell" => Ok(FileLaw::Maxwell),
            "inertia" => Ok(FileLaw::Inertia),
            "charge" => Ok(FileLaw::Charge),
            "energy" => Ok(FileLaw::Energy),
            _ => Err(format!(
                "unknown law '{s}' (expected maxwell, inertia, charge or energy)"
            )),
        }
    }
}

fn read(path: &Path) -> Result<BiquatField, CliError> {
    fieldio::read_field(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Residual stats of `law` on a field dump; `theta` is used by the laws
/// whose file holds a strength.
pub fn audit_file(path: &Path, law: FileLaw, theta: Option<&Path>) -> Result<Stats, CliError> {
    let f = read(path)?;
    let theta = match theta {
        Some(p) => {
            let t = read(p)?;
            if !t.grid().same_as(f.grid()) {
                return Err(CliError::Config(format!(
                    "{} and {} have different grids",
                    path.display(),
                    p.display()
                )));
            }
            t
        }
        None => BiquatField::zeros(*f.grid()),
    };
    let rt = |e: egm_core::Error| CliError::Runtime(e.to_string());
    Ok(match law {
        FileLaw::Maxwell => emfield::maxwell_residual(&FieldStrength(f), &ChargeCurrent(theta))
            .map_err(rt)?
            .stats(),
        FileLaw::Inertia => grid::d_minus(&f).map_err(rt)?.stats(),
        FileLaw::Charge => emfield::charge_conservation_residual(&ChargeCurrent(f))
            .map_err(rt)?
            .stats(),
        FileLaw::Energy => emfield::energy_conservation_residual(&FieldStrength(f), &ChargeCurrent(theta))
            .map_err(rt)?
            .stats(),
    })
}

pub fn audit_command(path: &Path, law: FileLaw, theta: Option<&Path>, tol: f64) -> Result<i32, CliError> {
    let st = audit_file(path, law, theta)?;
    let pass = st.max <= tol;
    let out = json!({
        "law": format!("{law:?}").to_lowercase(),
        "residual_max": st.max,
        "residual_mean": st.mean,
        "nodes": st.count,
        "tolerance": tol,
        "pass": pass,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
    Ok(if pass { EXIT_PASS } else { EXIT_AUDIT_FAILED })
}

pub struct TransformArgs {
    pub v: f64,
    pub e: [f64; 3],
    pub phi: f64,
    pub rule: FieldRule,
    pub interpolation: Interpolation,
}

/// Carries a field dump into the frame of a boost (plus rotation) on the
/// same grid; uncovered nodes are written as zero.
pub fn transform_command(path: &Path, args: &TransformArgs, out: &Path) -> Result<i32, CliError> {
    let f = read(path)?;
    let params =
        TransformParams::from_velocity(args.v, args.e, args.phi).map_err(|e| CliError::Config(e.to_string()))?;
    let l = lorentz::make_transform(params);
    let t = lorentz::transform_field_masked(&l, &f, *f.grid(), args.rule, args.interpolation);
    fieldio::write_field(out, &t.field).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let summary = json!({
        "out": out.display().to_string(),
        "covered_fraction": t.covered_fraction,
        "gamma": params.gamma(),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("serializes"));
    Ok(EXIT_PASS)
}

/// Parses `1,0,0`.
pub fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|p: Vec<f64>| format!("expected 3 components, got {}", p.len()))
}
