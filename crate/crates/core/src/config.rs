//! JSON experiment configuration.
//!
//! One file drives every subcommand; each reads the sections it needs.
//! Unknown keys are rejected and every error names the offending field path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ensemble::{make_entry_distribution, Convention, DistKind, DistParams, EnsembleSpec};
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, JPolicy, LemmaConfig};
use crate::testfn::{Repr, TestFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistConfig {
    pub kind: DistKind,
    pub w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub entry_dist: DistConfig,
    #[serde(default)]
    pub convention: Convention,
    /// Diagonal variance ratio; 2 unless the convention is general_diagonal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn default_j_policy() -> JPolicy {
    JPolicy::Middle
}

fn default_x_grid() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

fn default_t_grid() -> Vec<f64> {
    vec![1.0]
}

fn default_steps() -> Vec<f64> {
    vec![0.04, 0.02, 0.01]
}

/// The file as written, before semantic checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    spec: SpecConfig,
    phi: Value,
    #[serde(default)]
    phi2: Option<Value>,
    #[serde(default)]
    n_list: Vec<usize>,
    #[serde(default = "default_j_policy")]
    j_policy: JPolicy,
    #[serde(default)]
    replicas: usize,
    #[serde(default)]
    root_seed: u64,
    #[serde(default = "default_x_grid")]
    x_grid: Vec<f64>,
    #[serde(default = "default_t_grid")]
    t_grid: Vec<f64>,
    #[serde(default = "default_steps")]
    volterra_steps: Vec<f64>,
    #[serde(default)]
    outputs: OutputConfig,
}

/// A parsed and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub spec: EnsembleSpec,
    pub phi: TestFunction,
    pub phi2: Option<TestFunction>,
    pub n_list: Vec<usize>,
    pub j_policy: JPolicy,
    pub replicas: usize,
    pub root_seed: u64,
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub volterra_steps: Vec<f64>,
    pub outputs: OutputConfig,
}

impl Config {
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            spec: self.spec.clone(),
            phi: self.phi.clone(),
            phi2: self.phi2.clone(),
            n_list: self.n_list.clone(),
            j_policy: self.j_policy,
            replicas: self.replicas,
            root_seed: self.root_seed,
            x_grid: self.x_grid.clone(),
            t_grid: self.t_grid.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lemma(&self) -> Result<LemmaConfig> {
        let cfg = LemmaConfig {
            spec: self.spec.clone(),
            n_list: self.n_list.clone(),
            j_policy: self.j_policy,
            t_grid: self.t_grid.clone(),
            replicas: self.replicas,
            root_seed: self.root_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn schema_from_serde(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    Error::schema(if path == "." { String::new() } else { path }, e.into_inner().to_string())
}

/// Any sign that φ was meant to be complex-valued.
fn looks_complex(v: &Value) -> bool {
    match v {
        Value::Object(map) => {
            map.keys().any(|k| k.starts_with("imag") || k == "complex" || k == "im")
                || map.get("kind").and_then(Value::as_str).is_some_and(|k| k.contains("complex"))
                || ["coefficients", "values"]
                    .iter()
                    .filter_map(|k| map.get(*k).and_then(Value::as_array))
                    .any(|a| a.iter().any(|c| !c.is_number()))
        }
        _ => false,
    }
}

fn parse_phi(v: &Value, path: &str) -> Result<TestFunction> {
    if looks_complex(v) {
        return Err(Error::schema(
            path,
            "complex-valued test functions are not supported; distribution results need real φ",
        ));
    }
    let repr: Repr = serde_path_to_error::deserialize(v).map_err(|e| {
        let inner = e.path().to_string();
        let full = if inner == "." { path.to_string() } else { format!("{path}.{inner}") };
        Error::schema(full, e.into_inner().to_string())
    })?;
    TestFunction::new(repr).map_err(|e| match e {
        Error::Schema { path: inner, message } => Error::schema(format!("{path}.{inner}"), message),
        other => Error::schema(path, other.to_string()),
    })
}

fn build_spec(raw: &SpecConfig) -> Result<EnsembleSpec> {
    let d = &raw.entry_dist;
    if !(d.w.is_finite() && d.w > 0.0) {
        return Err(Error::schema("spec.entry_dist.w", format!("scale must be positive and finite, got {}", d.w)));
    }
    if let Some(p) = d.p {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::schema("spec.entry_dist.p", format!("probability must lie in (0, 1), got {p}")));
        }
    }
    let params = DistParams { p: d.p, atoms: d.atoms.clone() };
    let dist = make_entry_distribution(d.kind, d.w, &params).map_err(|e| Error::schema("spec.entry_dist", e.to_string()))?;
    let w2 = match (raw.convention, raw.w2) {
        (Convention::GeneralDiagonal, None) => {
            return Err(Error::schema("spec.w2", "general_diagonal needs an explicit w2"));
        }
        (_, Some(w2)) => w2,
        (_, None) => 2.0,
    };
    EnsembleSpec::new(dist, raw.convention, w2).map_err(|e| {
        let path = if raw.convention == Convention::Goe && d.kind != DistKind::Gaussian { "spec.convention" } else { "spec.w2" };
        Error::schema(path, e.to_string())
    })
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    match grid.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::schema(format!("{name}[{i}]"), "grid values must be finite")),
        None => Ok(()),
    }
}

/// Parses configuration text.
pub fn parse_config_str(text: &str) -> Result<Config> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(schema_from_serde)?;
    let spec = build_spec(&raw.spec)?;
    let phi = parse_phi(&raw.phi, "phi")?;
    let phi2 = raw.phi2.as_ref().map(|v| parse_phi(v, "phi2")).transpose()?;
    check_grid("x_grid", &raw.x_grid)?;
    check_grid("t_grid", &raw.t_grid)?;
    check_grid("volterra_steps", &raw.volterra_steps)?;
    if let Some(i) = raw.volterra_steps.iter().position(|&h| !(h > 0.0 && h <= 0.5)) {
        return Err(Error::schema(format!("volterra_steps[{i}]"), "steps must lie in (0, 0.5]"));
    }
    Ok(Config {
        spec,
        phi,
        phi2,
        n_list: raw.n_list,
        j_policy: raw.j_policy,
        replicas: raw.replicas,
        root_seed: raw.root_seed,
        x_grid: raw.x_grid,
        t_grid: raw.t_grid,
        volterra_steps: raw.volterra_steps,
        outputs: raw.outputs,
    })
}

pub fn parse_config(path: &Path) -> Result<Config> {
    parse_config_str(&std::fs::read_to_string(path)?)
}
