//! Run configuration: a single JSON document with a `version: 1` marker,
//! rejected on any unknown key so that a typo cannot silently change a
//! fit. Parsing is strict; model-level validation happens in `build`.

use crate::fail::Fail;
use kdglm_core::family::Family;
use kdglm_core::filter::{InterventionAction, InterventionSpec};
use kdglm_core::nalgebra::{DMatrix, DVector};
use kdglm_core::state_space::{build_structure, BlockKind, BlockSpec, StateModel};
use serde::Deserialize;
use std::fs;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub family: FamilyConfig,
    /// Response column name; the multinomial family lists one column per
    /// non-reference category, in predictor order.
    pub response: Vec<String>,
    /// Trial-count column, multinomial only.
    #[serde(default)]
    pub trials: Option<String>,
    pub blocks: Vec<BlockConfig>,
    /// Mean and diagonal covariance for the t=1 state prior; identity
    /// scale around zero when omitted.
    #[serde(default)]
    pub prior: Option<PriorConfig>,
    /// Forecast horizon J; 0 disables forecast output.
    #[serde(default)]
    pub horizon: usize,
    #[serde(default)]
    pub interventions: Vec<InterventionConfig>,
    /// Use the closed-form digamma approximation for Poisson projection.
    #[serde(default)]
    pub fast_poisson: bool,
    /// Trial count applied to forecast summaries, multinomial only;
    /// defaults to the last observed trial count.
    #[serde(default)]
    pub forecast_trials: Option<u64>,
    /// Optional label column copied verbatim into per-t outputs.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub outputs: OutputNames,
    /// Required by `simulate`, ignored by `fit`.
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyConfig {
    Poisson,
    Bernoulli,
    Normal,
    Multinomial { categories: usize },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub kind: BlockKindConfig,
    pub discount: f64,
    /// Linear-predictor rows this block feeds; defaults to the first.
    #[serde(default = "first_target")]
    pub targets: Vec<usize>,
}

fn first_target() -> Vec<usize> {
    vec![0]
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKindConfig {
    Polynomial { order: usize },
    Harmonic { period: f64, harmonic: usize },
    Regression { columns: Vec<String> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionConfig {
    /// 1-based time step, applied after evolution at that step.
    pub time: usize,
    pub action: ActionConfig,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionConfig {
    InflateVariance {
        factor: f64,
        #[serde(default)]
        blocks: Vec<usize>,
    },
    OverridePrior {
        mean: Vec<f64>,
        variance: Vec<f64>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputNames {
    #[serde(default = "name_filtered")]
    pub filtered: String,
    #[serde(default = "name_smoothed")]
    pub smoothed: String,
    #[serde(default = "name_forecast")]
    pub forecast: String,
}

fn name_filtered() -> String {
    "filtered.csv".into()
}
fn name_smoothed() -> String {
    "smoothed.csv".into()
}
fn name_forecast() -> String {
    "forecast.csv".into()
}

impl Default for OutputNames {
    fn default() -> Self {
        OutputNames {
            filtered: name_filtered(),
            smoothed: name_smoothed(),
            forecast: name_forecast(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub t_len: usize,
    /// Diagonal of the state innovation covariance W.
    pub state_noise: Vec<f64>,
    pub initial_state: Vec<f64>,
    /// Constant trial count per step, multinomial only.
    #[serde(default)]
    pub trials: Option<u64>,
}

pub fn load(path: &Path) -> Result<RunConfig, Fail> {
    let text = fs::read_to_string(path)
        .map_err(|e| Fail::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| Fail::Config(format!("{}: {e}", path.display())))?;
    if cfg.version != 1 {
        return Err(Fail::Config(format!(
            "unsupported config version {} (this build reads version 1)",
            cfg.version
        )));
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), Fail> {
    let family = cfg.family();
    let expect = match family {
        Family::Multinomial { categories } => categories - 1,
        _ => 1,
    };
    if cfg.response.len() != expect {
        return Err(Fail::Config(format!(
            "family needs {expect} response column(s), config lists {}",
            cfg.response.len()
        )));
    }
    match family {
        Family::Multinomial { .. } => {
            if cfg.trials.is_none() {
                return Err(Fail::Config(
                    "the multinomial family requires a trials column".into(),
                ));
            }
        }
        _ => {
            if cfg.trials.is_some() {
                return Err(Fail::Config(
                    "a trials column only applies to the multinomial family".into(),
                ));
            }
            if cfg.forecast_trials.is_some() {
                return Err(Fail::Config(
                    "forecast_trials only applies to the multinomial family".into(),
                ));
            }
        }
    }
    for (name, count) in [
        ("response", count_dup(&cfg.response)),
        ("covariate", count_dup(&covariate_columns(cfg))),
    ] {
        if count {
            return Err(Fail::Config(format!("duplicate {name} column name")));
        }
    }
    for iv in &cfg.interventions {
        if iv.time == 0 {
            return Err(Fail::Config("intervention time is 1-based".into()));
        }
    }
    Ok(())
}

fn count_dup(names: &[String]) -> bool {
    let mut seen: Vec<&str> = Vec::new();
    for n in names {
        if seen.contains(&n.as_str()) {
            return true;
        }
        seen.push(n);
    }
    false
}

fn covariate_columns(cfg: &RunConfig) -> Vec<String> {
    cfg.blocks
        .iter()
        .flat_map(|b| match &b.kind {
            BlockKindConfig::Regression { columns } => columns.clone(),
            _ => Vec::new(),
        })
        .collect()
}

impl RunConfig {
    pub fn family(&self) -> Family {
        match self.family {
            FamilyConfig::Poisson => Family::Poisson,
            FamilyConfig::Bernoulli => Family::Bernoulli,
            FamilyConfig::Normal => Family::Normal,
            FamilyConfig::Multinomial { categories } => Family::Multinomial { categories },
        }
    }

    pub fn build_model(&self) -> Result<StateModel, Fail> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| BlockSpec {
                kind: match &b.kind {
                    BlockKindConfig::Polynomial { order } => {
                        BlockKind::Polynomial { order: *order }
                    }
                    BlockKindConfig::Harmonic { period, harmonic } => BlockKind::Harmonic {
                        period: *period,
                        harmonic: *harmonic,
                    },
                    BlockKindConfig::Regression { columns } => BlockKind::Regression {
                        columns: columns.clone(),
                    },
                },
                discount: b.discount,
                targets: b.targets.clone(),
            })
            .collect();
        build_structure(self.family(), blocks).map_err(|e| Fail::Config(format!("{e}")))
    }

    /// The t=1 state prior: configured mean and diagonal variance, or the
    /// model default when the config omits it.
    pub fn prior(&self, model: &StateModel) -> Result<(DVector<f64>, DMatrix<f64>), Fail> {
        let p = model.state_dim();
        match &self.prior {
            None => Ok(model.default_prior()),
            Some(pr) => {
                if pr.mean.len() != p || pr.variance.len() != p {
                    return Err(Fail::Config(format!(
                        "prior dimensions ({}, {}) do not match the state dimension {p}",
                        pr.mean.len(),
                        pr.variance.len()
                    )));
                }
                if pr.variance.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Fail::Config(
                        "prior variances must be finite and >= 0".into(),
                    ));
                }
                Ok((
                    DVector::from_vec(pr.mean.clone()),
                    DMatrix::from_diagonal(&DVector::from_vec(pr.variance.clone())),
                ))
            }
        }
    }

    pub fn interventions(&self, model: &StateModel) -> Result<Vec<InterventionSpec>, Fail> {
        let p = model.state_dim();
        self.interventions
            .iter()
            .map(|iv| {
                let action = match &iv.action {
                    ActionConfig::InflateVariance { factor, blocks } => {
                        InterventionAction::InflateVariance {
                            factor: *factor,
                            blocks: blocks.clone(),
                        }
                    }
                    ActionConfig::OverridePrior { mean, variance } => {
                        if mean.len() != p || variance.len() != p {
                            return Err(Fail::Config(format!(
                                "override_prior at time {} does not match the state dimension {p}",
                                iv.time
                            )));
                        }
                        InterventionAction::OverridePrior {
                            mean: DVector::from_vec(mean.clone()),
                            cov: DMatrix::from_diagonal(&DVector::from_vec(variance.clone())),
                        }
                    }
                };
                Ok(InterventionSpec {
                    time: iv.time,
                    action,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn load_str(json: &str) -> Result<RunConfig, Fail> {
        let dir = std::env::temp_dir();
        let path = dir.join(format!(
            "kdglm-cfg-{}-{:p}.json",
            std::process::id(),
            &json
        ));
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(json.as_bytes()).unwrap();
        let out = load(&path);
        fs::remove_file(&path).unwrap();
        out
    }

    const MINIMAL: &str = r#"{
        "version": 1,
        "family": "poisson",
        "response": ["y"],
        "blocks": [{"kind": {"polynomial": {"order": 1}}, "discount": 0.95}]
    }"#;

    #[test]
    fn minimal_config_builds_a_local_level() {
        let cfg = load_str(MINIMAL).unwrap();
        let model = cfg.build_model().unwrap();
        assert_eq!(model.state_dim(), 1);
        assert_eq!(cfg.horizon, 0);
        assert!(!cfg.fast_poisson);
        let (m, c) = cfg.prior(&model).unwrap();
        assert_eq!((m.len(), c.nrows()), (1, 1));
    }

    #[test]
    fn unknown_keys_and_bad_versions_are_rejected() {
        let err = load_str(&MINIMAL.replace("\"version\": 1", "\"version\": 1, \"typo\": true"));
        assert!(matches!(err, Err(Fail::Config(_))));
        let err = load_str(&MINIMAL.replace("\"version\": 1", "\"version\": 2"));
        assert!(matches!(err, Err(Fail::Config(_))));
    }

    #[test]
    fn family_and_column_consistency_is_enforced() {
        // two response columns for a scalar family
        let err = load_str(&MINIMAL.replace("[\"y\"]", "[\"y\", \"z\"]"));
        assert!(matches!(err, Err(Fail::Config(_))));

        // multinomial without a trials column
        let json = r#"{
            "version": 1,
            "family": {"multinomial": {"categories": 3}},
            "response": ["a", "b"],
            "blocks": [
                {"kind": {"polynomial": {"order": 1}}, "discount": 1.0, "targets": [0]},
                {"kind": {"polynomial": {"order": 1}}, "discount": 1.0, "targets": [1]}
            ]
        }"#;
        assert!(matches!(load_str(json), Err(Fail::Config(_))));
        let with_trials = json.replace("\"response\"", "\"trials\": \"m\", \"response\"");
        let cfg = load_str(&with_trials).unwrap();
        assert_eq!(cfg.build_model().unwrap().predictor_dim(), 2);
    }

    #[test]
    fn interventions_convert_and_validate() {
        let json = MINIMAL.replace(
            "\"version\": 1",
            r#""version": 1, "interventions": [
                {"time": 4, "action": {"inflate_variance": {"factor": 4.0}}},
                {"time": 9, "action": {"override_prior": {"mean": [0.0], "variance": [9.0]}}}
            ]"#,
        );
        let cfg = load_str(&json).unwrap();
        let model = cfg.build_model().unwrap();
        let ivs = cfg.interventions(&model).unwrap();
        assert_eq!(ivs.len(), 2);
        assert_eq!(ivs[0].time, 4);

        let bad = json.replace("\"mean\": [0.0]", "\"mean\": [0.0, 1.0]");
        let cfg = load_str(&bad).unwrap();
        assert!(cfg.interventions(&model).is_err());
    }
}
