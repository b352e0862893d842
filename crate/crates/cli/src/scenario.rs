//! Scenario files: schema, loading and `--override` handling.

use std::path::{Path, PathBuf};

use egm_core::cauchy::SolverConfig;
use egm_core::emfield::MediumConstants;
use egm_core::grid::Interpolation;
use egm_core::interact::{DynamicsConfig, Kappa};
use egm_core::Grid4;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// The audits a scenario may request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    Maxwell,
    Charge,
    Energy,
    Covariance,
    FirstLaw,
    InteractionEnergy,
    ActionReaction,
}

impl Law {
    pub const ALL: [Law; 7] = [
        Law::Maxwell,
        Law::Charge,
        Law::Energy,
        Law::Covariance,
        Law::FirstLaw,
        Law::InteractionEnergy,
        Law::ActionReaction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Law::Maxwell => "maxwell",
            Law::Charge => "charge",
            Law::Energy => "energy",
            Law::Covariance => "covariance",
            Law::FirstLaw => "first_law",
            Law::InteractionEnergy => "interaction_energy",
            Law::ActionReaction => "action_reaction",
        }
    }
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    pub law: Law,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

/// Biquaternion initial data: either component expressions or a CSV dump.
///
/// One expression sets the scalar part; four set `[f, F₁, F₂, F₃]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSource {
    Exprs(Vec<String>),
    Csv { csv: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    #[serde(default)]
    pub medium: MediumConstants,
    /// Strength `A`; zero when absent.
    #[serde(default)]
    pub strength: Option<FieldSource>,
    /// Charge-current `Θ`; zero when absent.
    #[serde(default)]
    pub theta: Option<FieldSource>,
    /// External strength `A'` acting on this field. Defaults to the sum of
    /// the other fields' strengths.
    #[serde(default)]
    pub external: Option<FieldSource>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub v: f64,
    pub e: [f64; 3],
    #[serde(default)]
    pub phi: f64,
    /// Grid in the moving frame; defaults to the scenario grid.
    #[serde(default)]
    pub target: Option<Grid4>,
    #[serde(default)]
    pub interpolation: Interpolation,
    /// Allowed uncovered fraction of the target grid.
    #[serde(default = "default_min_coverage")]
    pub min_coverage: f64,
}

fn default_min_coverage() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub steps: usize,
    /// τ-index of the slice the run starts from.
    #[serde(default)]
    pub slice: usize,
    #[serde(default)]
    pub config: DynamicsConfig,
}

/// A charge-current solved from the transformation equation under a frozen
/// external strength; added to the field list under `name`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSpec {
    #[serde(default = "default_picard_name")]
    pub name: String,
    pub theta0: Vec<String>,
    pub external: Vec<String>,
    #[serde(default)]
    pub kappa: Kappa,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_picard_name() -> String {
    "picard".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub write_fields: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            write_fields: true,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: Option<Grid4>,
    #[serde(default)]
    pub fields: Vec<FieldSpec>,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
    #[serde(default)]
    pub kappa: Kappa,
    #[serde(default)]
    pub dynamics: Option<DynamicsSpec>,
    #[serde(default)]
    pub picard: Option<PicardSpec>,
    #[serde(default)]
    pub audits: Vec<AuditSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Parses `key.path=value`; the value is read as JSON, falling back to a
/// plain string.
pub fn parse_override(s: &str) -> Result<(Vec<String>, Value), CliError> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{s}' is not of the form key=value")))?;
    if key.is_empty() {
        return Err(CliError::Config(format!("override '{s}' has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.split('.').map(str::to_string).collect(), value))
}

/// Sets `path` inside `root`, creating objects along the way. Numeric
/// segments index existing arrays.
pub fn apply_override(root: &mut Value, path: &[String], value: Value) -> Result<(), CliError> {
    let mut cur = root;
    for (depth, seg) in path.iter().enumerate() {
        let last = depth + 1 == path.len();
        let here = path[..=depth].join(".");
        cur = match cur {
            Value::Array(items) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| CliError::Config(format!("override '{here}': expected an array index")))?;
                let len = items.len();
                items
                    .get_mut(i)
                    .ok_or_else(|| CliError::Config(format!("override '{here}': index out of range (len {len})")))?
            }
            Value::Object(map) => {
                if last {
                    map.insert(seg.clone(), Value::Null);
                }
                map.entry(seg.clone())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Null => {
                *cur = Value::Object(Default::default());
                let Value::Object(map) = cur else { unreachable!() };
                map.entry(seg.clone())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            _ => {
                return Err(CliError::Config(format!(
                    "override '{here}': parent is not an object or array"
                )))
            }
        };
    }
    *cur = value;
    Ok(())
}

/// Reads, overrides and validates a scenario. Returns the scenario, the
/// effective JSON (for the config echo) and the directory relative paths
/// resolve against.
pub fn load(path: &Path, overrides: &[String]) -> Result<(Scenario, Value, PathBuf), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for o in overrides {
        let (p, v) = parse_override(o)?;
        apply_override(&mut value, &p, v)?;
    }
    let scenario = from_value(value.clone())?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    validate(&scenario, &base)?;
    Ok((scenario, value, base))
}

pub fn from_value(value: Value) -> Result<Scenario, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let at = e.path().to_string();
        CliError::Config(format!("scenario field '{at}': {}", e.into_inner()))
    })
}

fn check_grid(g: &Grid4, what: &str) -> Result<(), CliError> {
    Grid4::new(g.shape, g.d_tau, g.h, g.origin)
        .map(|_| ())
        .map_err(|e| CliError::Config(format!("{what}: {e}")))
}

fn check_source(src: &FieldSource, what: &str, base: &Path) -> Result<(), CliError> {
    match src {
        FieldSource::Exprs(v) if v.len() == 1 || v.len() == 4 => Ok(()),
        FieldSource::Exprs(v) => Err(CliError::Config(format!(
            "{what}: expected 1 or 4 component expressions, got {}",
            v.len()
        ))),
        FieldSource::Csv { csv } => {
            let p = base.join(csv);
            if p.is_file() {
                Ok(())
            } else {
                Err(CliError::Config(format!("{what}: file {} does not exist", p.display())))
            }
        }
    }
}

/// Structural checks that do not need field evaluation.
pub fn validate(s: &Scenario, base: &Path) -> Result<(), CliError> {
    let needs_grid = !s.fields.is_empty() || s.picard.is_some();
    match &s.grid {
        Some(g) => check_grid(g, "grid")?,
        None if needs_grid => {
            return Err(CliError::Config(
                "scenario field 'grid': required when fields are given".into(),
            ))
        }
        None => {}
    }
    let mut names: Vec<&str> = Vec::new();
    for (k, f) in s.fields.iter().enumerate() {
        if f.name.is_empty()
            || !f
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(CliError::Config(format!(
                "fields[{k}].name: '{}' must be non-empty and use [A-Za-z0-9_-]",
                f.name
            )));
        }
        names.push(&f.name);
        for (src, part) in [
            (&f.strength, "strength"),
            (&f.theta, "theta"),
            (&f.external, "external"),
        ] {
            if let Some(src) = src {
                check_source(src, &format!("fields[{k}].{part}"), base)?;
            }
        }
    }
    if let Some(p) = &s.picard {
        names.push(&p.name);
        check_source(&FieldSource::Exprs(p.theta0.clone()), "picard.theta0", base)?;
        check_source(&FieldSource::Exprs(p.external.clone()), "picard.external", base)?;
        if let Some(g) = &s.grid {
            if g.origin[0] != 0.0 {
                return Err(CliError::Config("picard: the grid must start at tau = 0".into()));
            }
        }
    }
    let mut sorted = names.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Config(format!("duplicate field name '{}'", w[0])));
    }
    for (k, t) in s.transforms.iter().enumerate() {
        if !(t.v.abs() < 1.0) {
            return Err(CliError::Config(format!(
                "transforms[{k}].v: |v| must be < 1, got {}",
                t.v
            )));
        }
        if !(0.0..=1.0).contains(&t.min_coverage) {
            return Err(CliError::Config(format!(
                "transforms[{k}].min_coverage must lie in [0, 1]"
            )));
        }
        match (&t.target, &s.grid) {
            (Some(g), _) => check_grid(g, &format!("transforms[{k}].target"))?,
            (None, None) if !s.fields.is_empty() => {
                return Err(CliError::Config(format!(
                    "transforms[{k}].target: no grid to default to"
                )))
            }
            _ => {}
        }
    }
    if let Some(d) = &s.dynamics {
        if let Some(g) = &s.grid {
            if d.slice >= g.shape[0] {
                return Err(CliError::Config(format!(
                    "dynamics.slice: {} is outside the {} tau nodes",
                    d.slice, g.shape[0]
                )));
            }
        }
    }
    for (k, a) in s.audits.iter().enumerate() {
        if !(a.tolerance >= 0.0 && a.tolerance.is_finite()) {
            return Err(CliError::Config(format!(
                "audits[{k}].tolerance must be finite and >= 0"
            )));
        }
    }
    Ok(())
}
