//! JSON study configuration: scenario selection plus overrides, resolved
//! into a ready-to-run [`ScenarioSpec`] with schemes and step sizes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use carfollow::{
    build_cutin, build_external_leader, build_start_stop, default_cutin_events,
    default_leader_profile, CutInEvent, FvdmParams, IdmParams, ModelKind, OvmParams, ScenarioSpec,
    SchemeKind, SpeedProfile, DEFAULT_H16, RECORD_INTERVAL,
};
use serde::Deserialize;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Top-level study configuration file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub scenario: ScenarioConfig,
    /// Subset of `euler`, `ballistic`, `trapezoidal`, `rk4`; all four when
    /// omitted.
    #[serde(default)]
    pub schemes: Option<Vec<String>>,
    /// Either the string `"default16"` or an explicit list of step sizes;
    /// every step must divide the 2.4 s recording interval.
    #[serde(default)]
    pub h_list: Option<HListConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioConfig {
    /// A queue of vehicles launches at t=0 and approaches a standing
    /// obstacle further down the road.
    StartStop {
        #[serde(default)]
        model: Option<ModelConfig>,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_light_distance")]
        light_distance: f64,
        #[serde(default = "default_t_max_short")]
        t_max: f64,
    },
    /// A platoon follows a leader with a prescribed speed profile given as
    /// `[time, speed]` breakpoints (linear in between).
    ExternalLeader {
        #[serde(default)]
        model: Option<ModelConfig>,
        #[serde(default = "default_followers")]
        n_followers: usize,
        #[serde(default)]
        profile: Option<Vec<(f64, f64)>>,
        #[serde(default = "default_t_max_short")]
        t_max: f64,
    },
    /// A single test vehicle behind a constant-speed leader that is
    /// replaced at each event time (gap rescaled, speed reset).
    CutIn {
        #[serde(default)]
        model: Option<ModelConfig>,
        #[serde(default = "default_leader_speed")]
        leader_speed: f64,
        #[serde(default)]
        events: Option<Vec<EventConfig>>,
        #[serde(default = "default_t_max_long")]
        t_max: f64,
    },
}

fn default_n() -> usize {
    20
}
fn default_light_distance() -> f64 {
    670.0
}
fn default_t_max_short() -> f64 {
    60.0
}
fn default_t_max_long() -> f64 {
    100.8
}
fn default_followers() -> usize {
    10
}
fn default_leader_speed() -> f64 {
    12.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// One of `idm`, `idm-plus`, `idm-modified-free`, `ovm`, `fvdm`.
    pub kind: String,
    /// Either a named set (`"standard"`, `"creep"`) or a map of parameter
    /// values by name.
    #[serde(default)]
    pub params: Option<ParamsConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ParamsConfig {
    Named(String),
    Custom(BTreeMap<String, f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub time: f64,
    pub gap_factor: f64,
    pub leader_speed_after: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum HListConfig {
    Named(String),
    Steps(Vec<f64>),
}

/// Everything a command needs to run, derived from the config file.
#[derive(Debug)]
pub struct ResolvedConfig {
    pub spec: ScenarioSpec,
    pub schemes: Vec<SchemeKind>,
    pub h_list: Vec<f64>,
    pub output_dir: PathBuf,
}

pub fn load(path: &Path) -> Result<StudyConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

/// A step size must tile the recording interval exactly.
pub fn validate_step(h: f64) -> Result<(), ConfigError> {
    if !(h > 0.0 && h.is_finite()) {
        return err(format!("step size must be positive, got {h}"));
    }
    let ratio = RECORD_INTERVAL / h;
    if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) || ratio.round() < 1.0 {
        return err(format!(
            "step size {h} s does not divide the {RECORD_INTERVAL} s recording interval"
        ));
    }
    Ok(())
}

fn idm_custom(map: &BTreeMap<String, f64>) -> Result<IdmParams, ConfigError> {
    let mut p = IdmParams::standard();
    for (key, &value) in map {
        match key.as_str() {
            "v0" => p.v0 = value,
            "t" => p.t = value,
            "s0" => p.s0 = value,
            "a" => p.a = value,
            "b" => p.b = value,
            other => return err(format!("unknown IDM parameter field `{other}`")),
        }
    }
    Ok(p)
}

fn ovm_custom(map: &BTreeMap<String, f64>) -> Result<OvmParams, ConfigError> {
    let mut p = OvmParams::default();
    for (key, &value) in map {
        match key.as_str() {
            "v0" => p.v0 = value,
            "tau" => p.tau = value,
            "delta_s" => p.delta_s = value,
            "beta" => p.beta = value,
            other => return err(format!("unknown OVM parameter field `{other}`")),
        }
    }
    Ok(p)
}

fn fvdm_custom(map: &BTreeMap<String, f64>) -> Result<FvdmParams, ConfigError> {
    let mut p = FvdmParams::default();
    for (key, &value) in map {
        match key.as_str() {
            "v0" => p.ovm.v0 = value,
            "tau" => p.ovm.tau = value,
            "delta_s" => p.ovm.delta_s = value,
            "beta" => p.ovm.beta = value,
            "lambda" => p.lambda = value,
            other => return err(format!("unknown FVDM parameter field `{other}`")),
        }
    }
    Ok(p)
}

fn idm_named(name: &str) -> Result<IdmParams, ConfigError> {
    match name {
        "standard" => Ok(IdmParams::standard()),
        "creep" => Ok(IdmParams::creep_to_stop()),
        other => err(format!("unknown parameter set `{other}` (expected `standard` or `creep`)")),
    }
}

pub fn build_model(config: Option<&ModelConfig>) -> Result<ModelKind, ConfigError> {
    let Some(config) = config else {
        return Ok(ModelKind::Idm(IdmParams::standard()));
    };
    let params = config.params.as_ref();
    let model = match config.kind.as_str() {
        kind @ ("idm" | "idm-plus" | "idm-modified-free") => {
            let p = match params {
                None => IdmParams::standard(),
                Some(ParamsConfig::Named(name)) => idm_named(name)?,
                Some(ParamsConfig::Custom(map)) => idm_custom(map)?,
            };
            match kind {
                "idm" => ModelKind::Idm(p),
                "idm-plus" => ModelKind::IdmPlus(p),
                _ => ModelKind::IdmModifiedFree(p),
            }
        }
        "ovm" => {
            let p = match params {
                None => OvmParams::default(),
                Some(ParamsConfig::Named(name)) if name == "standard" => OvmParams::default(),
                Some(ParamsConfig::Named(name)) => {
                    return err(format!("unknown OVM parameter set `{name}`"))
                }
                Some(ParamsConfig::Custom(map)) => ovm_custom(map)?,
            };
            ModelKind::Ovm(p)
        }
        "fvdm" => {
            let p = match params {
                None => FvdmParams::default(),
                Some(ParamsConfig::Named(name)) if name == "standard" => FvdmParams::default(),
                Some(ParamsConfig::Named(name)) => {
                    return err(format!("unknown FVDM parameter set `{name}`"))
                }
                Some(ParamsConfig::Custom(map)) => fvdm_custom(map)?,
            };
            ModelKind::Fvdm(p)
        }
        other => {
            return err(format!(
                "unknown model kind `{other}` (expected idm, idm-plus, idm-modified-free, ovm, or fvdm)"
            ))
        }
    };
    model.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(model)
}

impl StudyConfig {
    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let spec = match &self.scenario {
            ScenarioConfig::StartStop { model, n, light_distance, t_max } => {
                let model = build_model(model.as_ref())?;
                build_start_stop(model, *n, *light_distance, *t_max)
            }
            ScenarioConfig::ExternalLeader { model, n_followers, profile, t_max } => {
                let model = build_model(model.as_ref())?;
                let profile = match profile {
                    None => default_leader_profile(),
                    Some(points) => SpeedProfile::new(points.clone())
                        .map_err(|e| ConfigError(format!("scenario.profile: {e}")))?,
                };
                build_external_leader(model, *n_followers, profile, *t_max)
                    .map_err(|e| ConfigError(format!("scenario: {e}")))?
            }
            ScenarioConfig::CutIn { model, leader_speed, events, t_max } => {
                let model = build_model(model.as_ref())?;
                let events = match events {
                    None => default_cutin_events(),
                    Some(list) => list
                        .iter()
                        .map(|e| CutInEvent {
                            time: e.time,
                            gap_factor: e.gap_factor,
                            leader_speed_after: e.leader_speed_after,
                        })
                        .collect(),
                };
                build_cutin(model, *leader_speed, events, *t_max)
                    .map_err(|e| ConfigError(format!("scenario: {e}")))?
            }
        };
        spec.validate().map_err(|e| ConfigError(format!("scenario: {e}")))?;

        let schemes = match &self.schemes {
            None => SchemeKind::ALL.to_vec(),
            Some(names) if names.is_empty() => return err("schemes list must not be empty"),
            Some(names) => names
                .iter()
                .map(|s| {
                    SchemeKind::from_str(s)
                        .map_err(|_| ConfigError(format!("unknown scheme `{s}`")))
                })
                .collect::<Result<Vec<_>, _>>()?,
        };

        let h_list = match &self.h_list {
            None => DEFAULT_H16.to_vec(),
            Some(HListConfig::Named(name)) if name == "default16" => DEFAULT_H16.to_vec(),
            Some(HListConfig::Named(name)) => {
                return err(format!("unknown step list `{name}` (expected `default16`)"))
            }
            Some(HListConfig::Steps(steps)) if steps.is_empty() => {
                return err("h_list must not be empty")
            }
            Some(HListConfig::Steps(steps)) => {
                for &h in steps {
                    validate_step(h)?;
                }
                steps.clone()
            }
        };

        let output_dir = self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        Ok(ResolvedConfig { spec, schemes, h_list, output_dir })
    }
}
