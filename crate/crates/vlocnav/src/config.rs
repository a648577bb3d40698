//! Scenario files.
//!
//! A scenario is one TOML document with the sections `[world]`, `[gallery]`,
//! `[conditions]`, `[stack]` and `[metrics]`. Every key is optional; missing
//! keys take the library defaults, so `configs/default.toml` spells out the
//! complete set.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vlocnav_core::bench::{OdometryConfig, RecallThresholds, ScenarioConfig, StackConfig};
use vlocnav_core::vloc::GalleryParams;
use vlocnav_core::world::{DegradationModel, EnvironmentCondition, WorldSpec};

use crate::sweep::Axis;
use crate::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for episodes; the world keeps its own `world.seed`.
    pub seed: u64,
    pub world: WorldSpec,
    pub gallery: GalleryParams,
    pub conditions: ConditionsSection,
    pub stack: StackSection,
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsSection {
    pub illumination_k: u32,
    /// Fog visual range in meters; leave unset for clear air.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visual_range_v: Option<f64>,
    pub camera_offset_z: f64,
    pub camera_pitch_theta: f64,
    pub rain: bool,
    pub degradation: DegradationModel,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// `illumination`, `visual_range` or `viewpoint`.
    pub axis: AxisKind,
    pub illumination: Vec<u32>,
    pub visual_range: Vec<f64>,
    /// (z meters, θ degrees) pairs.
    pub viewpoint: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    Illumination,
    VisualRange,
    Viewpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StackSection {
    pub method_label: String,
    pub target_speed: f64,
    pub localization_rate: f64,
    pub localization_latency: f64,
    pub control_rate: f64,
    pub odometry: OdometryConfig,
    #[serde(flatten)]
    pub pipeline: StackConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub episodes: u32,
    pub failure_lateral_threshold: f64,
    pub stall_timeout: f64,
    pub stall_progress: f64,
    pub max_reinits: u32,
    pub trajectory_log_interval: f64,
    pub recall_thresholds: RecallThresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        Self {
            seed: s.seed,
            world: WorldSpec::default(),
            gallery: GalleryParams::default(),
            conditions: ConditionsSection::from_parts(&s.condition, &s.degradation),
            stack: StackSection {
                method_label: s.method_label.clone(),
                target_speed: s.target_speed,
                localization_rate: s.localization_rate,
                localization_latency: s.localization_latency,
                control_rate: s.control_rate,
                odometry: s.odometry,
                pipeline: s.stack,
            },
            metrics: MetricsSection {
                episodes: s.episodes,
                failure_lateral_threshold: s.failure_lateral_threshold,
                stall_timeout: s.stall_timeout,
                stall_progress: s.stall_progress,
                max_reinits: s.max_reinits,
                trajectory_log_interval: s.trajectory_log_interval,
                recall_thresholds: RecallThresholds::default(),
            },
        }
    }
}

impl Default for ConditionsSection {
    fn default() -> Self {
        Self::from_parts(&EnvironmentCondition::pristine(), &DegradationModel::default())
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: AxisKind::Illumination,
            illumination: (0..=EnvironmentCondition::MAX_ILLUMINATION_K).collect(),
            visual_range: vec![90.0, 60.0, 30.0, 10.0],
            viewpoint: vec![
                [0.0, 0.0],
                [2.0, 10.0],
                [4.0, 22.5],
                [5.0, 27.5],
                [6.0, 32.5],
                [7.0, 35.0],
                [8.0, 37.5],
                [9.0, 40.0],
                [10.0, 40.0],
                [11.0, 40.0],
                [13.0, 40.0],
                [15.0, 40.0],
                [16.0, 40.0],
            ],
        }
    }
}

impl Default for StackSection {
    fn default() -> Self {
        ExperimentConfig::default().stack
    }
}

impl Default for MetricsSection {
    fn default() -> Self {
        ExperimentConfig::default().metrics
    }
}

impl ConditionsSection {
    fn from_parts(c: &EnvironmentCondition, degradation: &DegradationModel) -> Self {
        Self {
            illumination_k: c.illumination_k,
            visual_range_v: c.visual_range_v,
            camera_offset_z: c.camera_offset_z,
            camera_pitch_theta: c.camera_pitch_theta,
            rain: c.rain,
            degradation: *degradation,
            sweep: SweepSection::default(),
        }
    }

    pub fn condition(&self) -> EnvironmentCondition {
        EnvironmentCondition {
            illumination_k: self.illumination_k,
            visual_range_v: self.visual_range_v,
            camera_offset_z: self.camera_offset_z,
            camera_pitch_theta: self.camera_pitch_theta,
            rain: self.rain,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.world.route.build(self.world.corner_radius, self.world.route_step).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let t = &self.metrics.recall_thresholds.levels;
        if !(t[0].0 < t[1].0 && t[1].0 < t[2].0 && t[0].1 < t[1].1 && t[1].1 < t[2].1) {
            return Err(ConfigError::Invalid("recall thresholds must be strictly increasing".into()));
        }
        self.axis(self.conditions.sweep.axis).map(|_| ())
    }

    /// Scenario for the base condition.
    pub fn scenario(&self) -> ScenarioConfig {
        let st = &self.stack;
        let m = &self.metrics;
        ScenarioConfig {
            condition: self.conditions.condition(),
            degradation: self.conditions.degradation,
            episodes: m.episodes,
            seed: self.seed,
            target_speed: st.target_speed,
            localization_rate: st.localization_rate,
            localization_latency: st.localization_latency,
            control_rate: st.control_rate,
            failure_lateral_threshold: m.failure_lateral_threshold,
            stall_timeout: m.stall_timeout,
            stall_progress: m.stall_progress,
            max_reinits: m.max_reinits,
            trajectory_log_interval: m.trajectory_log_interval,
            method_label: st.method_label.clone(),
            odometry: st.odometry,
            stack: st.pipeline,
            fault: None,
        }
    }

    /// Sweep axis of the given kind with the values listed in `[conditions.sweep]`.
    pub fn axis(&self, kind: AxisKind) -> Result<Axis, ConfigError> {
        let s = &self.conditions.sweep;
        let axis = match kind {
            AxisKind::Illumination => Axis::Illumination(s.illumination.clone()),
            AxisKind::VisualRange => Axis::VisualRange(s.visual_range.clone()),
            AxisKind::Viewpoint => Axis::Viewpoint(s.viewpoint.iter().map(|p| (p[0], p[1])).collect()),
        };
        if axis.is_empty() {
            return Err(ConfigError::Invalid(format!("sweep axis {kind:?} has no values")));
        }
        Ok(axis)
    }
}
