//! Experiment configuration: a structured-text schema with strict key
//! checking, plus dotted-path overrides from the command line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Grid1d;
use crate::model::SpinModel;
use crate::orlicz::YoungFunction;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub samples: usize,
    pub burn_in: usize,
    /// Mandatory: every stochastic stage derives its stream from this.
    pub seed: u64,
}

/// Scenario-specific knobs. Every field has a scenario-chosen default, so
/// configs only list what they pin down.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub box_radius: Option<u32>,
    /// Constant boundary fill.
    pub boundary: Option<f64>,
    /// Boundary fills for the two-boundary agreement probe.
    pub boundaries: Option<Vec<f64>>,
    pub start_shell: Option<u32>,
    pub sweep_steps: Option<u32>,
    /// Shell index for the gradient sweeping check.
    pub shell: Option<u32>,
    pub boundary_count: Option<usize>,
    pub j_values: Option<Vec<f64>>,
    pub lambda_grid: Option<Vec<f64>>,
    pub k_max: Option<u32>,
    pub c_scale: Option<f64>,
    pub r_grid: Option<Vec<f64>>,
    pub envelope_a: Option<f64>,
    pub envelope_c: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub t_star: Option<f64>,
    pub epsilon: Option<f64>,
    pub c_hat: Option<f64>,
    pub omega_grid: Option<Vec<f64>>,
    pub witness_cap: Option<usize>,
    /// "conjugate" or "power-4-3".
    pub gauge: Option<String>,
    /// Second grid resolution for the stability comparison.
    pub alt_grid_n: Option<usize>,
    /// "normalized-sum", "x0", or "tanh-x0".
    pub observable: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub model: SpinModel,
    pub grid: Grid1d,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub orlicz: Option<YoungFunction>,
    #[serde(default)]
    pub params: Params,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        // round-trip through the constructor to enforce grid invariants
        Grid1d::new(self.grid.lx, self.grid.n)?;
        if self.sampler.samples == 0 {
            return Err(Error::InvalidParameter("samples must be positive".into()));
        }
        Ok(())
    }

    pub fn orlicz_base(&self) -> Result<YoungFunction> {
        match &self.orlicz {
            Some(phi) => Ok(phi.clone()),
            None => YoungFunction::power(2.0),
        }
    }
}

/// Parses config text, applying `key.path=value` overrides before the
/// schema check so overridden keys are validated like file keys.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = toml::from_str(text)
        .map_err(|e| Error::InvalidParameter(format!("config parse error: {e}")))?;
    for item in overrides {
        let (path, raw) = item.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("override '{item}' is not of the form key=value"))
        })?;
        apply_override(&mut table, path.trim(), raw.trim())?;
    }
    let config: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::InvalidParameter(format!("config schema error: {e}")))?;
    config.validate()?;
    Ok(config)
}

fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let mut segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidParameter(format!(
            "override path '{path}' has an empty segment"
        )));
    }
    let leaf = segments.pop().expect("split is nonempty");
    let mut cursor = table;
    for seg in segments {
        cursor = cursor
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "override path '{path}' descends through non-table key '{seg}'"
                ))
            })?;
    }
    cursor.insert(leaf.to_string(), parse_value(raw));
    Ok(())
}

/// Parses the right-hand side of an override as a toml literal, falling
/// back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("key v exists"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
scenario = "sweep-convergence"

[model]
d = 1
j = 0.05
j0 = 0.05
[model.phase]
kind = "gaussian"
[model.potential]
kind = "bilinear"

[grid]
lx = 10.0
n = 33

[sampler]
samples = 1000
burn_in = 100
seed = 7
"#;

    #[test]
    fn parses_a_minimal_config() {
        let cfg = parse_config(BASE, &[]).unwrap();
        assert_eq!(cfg.scenario, "sweep-convergence");
        assert_eq!(cfg.grid.n, 33);
        assert_eq!(cfg.sampler.seed, 7);
        assert!(cfg.params.box_radius.is_none());
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{BASE}\nbogus = 1\n");
        assert!(parse_config(&bad, &[]).is_err());
        let bad = BASE.replace("[sampler]", "[sampler]\ntypo_field = 2");
        assert!(parse_config(&bad, &[]).is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        let bad = BASE.replace("seed = 7", "");
        assert!(parse_config(&bad, &[]).is_err());
    }

    #[test]
    fn overrides_win_over_file_values() {
        let cfg = parse_config(
            BASE,
            &[
                "sampler.seed=99".into(),
                "model.j=0.02".into(),
                "params.box_radius=2".into(),
                "params.r_grid=[1.0, 2.0]".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.sampler.seed, 99);
        assert_eq!(cfg.model.j, 0.02);
        assert_eq!(cfg.params.box_radius, Some(2));
        assert_eq!(cfg.params.r_grid.as_deref(), Some(&[1.0, 2.0][..]));
    }

    #[test]
    fn overrides_are_schema_checked_too() {
        assert!(parse_config(BASE, &["params.no_such_knob=1".into()]).is_err());
        assert!(parse_config(BASE, &["model.j".into()]).is_err());
    }

    #[test]
    fn invalid_model_values_are_rejected() {
        assert!(parse_config(BASE, &["model.j=0.2".into()]).is_err());
    }
}
