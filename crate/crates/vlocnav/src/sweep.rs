//! Scenario sweeps over one condition axis.
//!
//! Every axis point gets `episodes` closed-loop runs plus one reference-recall
//! pass; the odometry-only baseline runs once with the same episode seeds. All
//! units are independent and keyed by their position in the plan, so the
//! result is the same for any number of worker threads.

use rayon::prelude::*;
use vlocnav_core::bench::{run_episode, run_reference_recall, EpisodeResult, LocalizationRecord, ScenarioConfig};
use vlocnav_core::vloc::GalleryMap;
use vlocnav_core::world::{EnvironmentCondition, WorldMap};

use crate::formats::LogRecord;
use crate::FormatError;

pub const BASELINE_METHOD: &str = "baseline";
/// `axis_value` of the baseline, which does not depend on the axis.
pub const BASELINE_AXIS_VALUE: &str = "all";

#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    /// Only the template's own condition.
    Base,
    Illumination(Vec<u32>),
    /// Fog visual ranges, meters.
    VisualRange(Vec<f64>),
    /// (z meters, θ degrees).
    Viewpoint(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisPoint {
    pub value: String,
    pub condition: EnvironmentCondition,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Base => "base",
            Axis::Illumination(_) => "illumination",
            Axis::VisualRange(_) => "visual_range",
            Axis::Viewpoint(_) => "viewpoint",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::Base => 1,
            Axis::Illumination(v) => v.len(),
            Axis::VisualRange(v) => v.len(),
            Axis::Viewpoint(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Conditions along the axis; the other condition fields come from `base`.
    pub fn points(&self, base: &EnvironmentCondition) -> Vec<AxisPoint> {
        match self {
            Axis::Base => vec![AxisPoint { value: "base".into(), condition: *base }],
            Axis::Illumination(ks) => ks
                .iter()
                .map(|&k| AxisPoint { value: k.to_string(), condition: EnvironmentCondition { illumination_k: k, ..*base } })
                .collect(),
            Axis::VisualRange(vs) => vs
                .iter()
                .map(|&v| AxisPoint {
                    value: v.to_string(),
                    condition: EnvironmentCondition { visual_range_v: Some(v), ..*base },
                })
                .collect(),
            Axis::Viewpoint(ps) => ps
                .iter()
                .map(|&(z, theta)| AxisPoint {
                    value: format!("{z}/{theta}"),
                    condition: EnvironmentCondition { camera_offset_z: z, camera_pitch_theta: theta, ..*base },
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub axis_value: String,
    pub method: String,
    pub episodes: Vec<EpisodeResult>,
    pub reference: Vec<LocalizationRecord>,
    /// Set when any unit of the point failed; the point is then left out of
    /// the summary.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: String,
    pub seed: u64,
    pub route_length_km: f64,
    pub route: Vec<[f64; 2]>,
    pub points: Vec<PointResult>,
    /// Odometry-only runs; `None` when they were not run.
    pub baseline: Option<PointResult>,
}

#[derive(Debug, Clone, Copy)]
enum Unit {
    Episode { point: usize, episode: u32 },
    Reference { point: usize },
    Baseline { episode: u32 },
}

enum Output {
    Episode(EpisodeResult),
    Reference(Vec<LocalizationRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    pub with_baseline: bool,
    pub with_reference: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { jobs: 0, with_baseline: true, with_reference: true }
    }
}

pub fn run_sweep(
    world: &WorldMap,
    gallery: &GalleryMap,
    template: &ScenarioConfig,
    axis: &Axis,
    options: &SweepOptions,
) -> SweepResult {
    let points = axis.points(&template.condition);
    let mut units = Vec::new();
    for point in 0..points.len() {
        units.extend((0..template.episodes).map(|episode| Unit::Episode { point, episode }));
        if options.with_reference {
            units.push(Unit::Reference { point });
        }
    }
    if options.with_baseline {
        units.extend((0..template.episodes).map(|episode| Unit::Baseline { episode }));
    }

    let run = |unit: &Unit| -> Result<Output, String> {
        let cfg_at = |p: usize| ScenarioConfig { condition: points[p].condition, ..template.clone() };
        let out = match *unit {
            Unit::Episode { point, episode } => run_episode(world, gallery, &cfg_at(point), episode, true).map(Output::Episode),
            Unit::Reference { point } => run_reference_recall(world, gallery, &cfg_at(point)).map(Output::Reference),
            Unit::Baseline { episode } => run_episode(world, gallery, template, episode, false).map(Output::Episode),
        };
        out.map_err(|e| e.to_string())
    };
    let outputs: Vec<Result<Output, String>> = match rayon::ThreadPoolBuilder::new().num_threads(options.jobs).build() {
        Ok(pool) => pool.install(|| units.par_iter().map(run).collect()),
        Err(_) => units.iter().map(run).collect(),
    };

    let empty = |axis_value: &str, method: &str| PointResult {
        axis_value: axis_value.into(),
        method: method.into(),
        episodes: Vec::new(),
        reference: Vec::new(),
        error: None,
    };
    let mut results: Vec<PointResult> = points.iter().map(|p| empty(&p.value, &template.method_label)).collect();
    let mut baseline = options.with_baseline.then(|| empty(BASELINE_AXIS_VALUE, BASELINE_METHOD));
    for (unit, out) in units.iter().zip(outputs) {
        let slot = match *unit {
            Unit::Episode { point, .. } | Unit::Reference { point } => &mut results[point],
            Unit::Baseline { .. } => baseline.as_mut().expect("baseline units only when enabled"),
        };
        match out {
            Ok(Output::Episode(e)) => slot.episodes.push(e),
            Ok(Output::Reference(log)) => slot.reference = log,
            Err(msg) => {
                slot.error.get_or_insert(msg);
            }
        }
    }

    SweepResult {
        axis: axis.name().into(),
        seed: template.seed,
        route_length_km: world.route.total_length() / 1000.0,
        route: world.route.waypoints().iter().map(|w| [w.position.x, w.position.y]).collect(),
        points: results,
        baseline,
    }
}

impl SweepResult {
    pub fn to_log(&self) -> Vec<LogRecord> {
        let mut out = vec![LogRecord::Meta {
            axis: self.axis.clone(),
            route_length_km: self.route_length_km,
            route: self.route.clone(),
            seed: self.seed,
        }];
        for p in self.points.iter().chain(self.baseline.iter()) {
            if let Some(message) = &p.error {
                out.push(LogRecord::PointError {
                    axis_value: p.axis_value.clone(),
                    method: p.method.clone(),
                    message: message.clone(),
                });
            }
            for e in &p.episodes {
                out.push(LogRecord::Episode { axis_value: p.axis_value.clone(), method: p.method.clone(), result: e.clone() });
            }
            if p.method != BASELINE_METHOD {
                out.push(LogRecord::Reference {
                    axis_value: p.axis_value.clone(),
                    method: p.method.clone(),
                    localization_log: p.reference.clone(),
                });
            }
        }
        out
    }

    /// Regroups a log by (axis value, method) in order of first appearance.
    pub fn from_log(records: Vec<LogRecord>) -> Result<Self, FormatError> {
        let mut it = records.into_iter();
        let Some(LogRecord::Meta { axis, route_length_km, route, seed }) = it.next() else {
            return Err(FormatError::Invalid("episode log does not start with a meta record".into()));
        };
        let mut points: Vec<PointResult> = Vec::new();
        let mut baseline: Option<PointResult> = None;
        for record in it {
            let (axis_value, method) = match &record {
                LogRecord::Meta { .. } => return Err(FormatError::Invalid("repeated meta record".into())),
                LogRecord::Episode { axis_value, method, .. }
                | LogRecord::Reference { axis_value, method, .. }
                | LogRecord::PointError { axis_value, method, .. } => (axis_value.clone(), method.clone()),
            };
            let slot = if method == BASELINE_METHOD {
                baseline.get_or_insert_with(|| PointResult {
                    axis_value,
                    method,
                    episodes: Vec::new(),
                    reference: Vec::new(),
                    error: None,
                })
            } else {
                match points.iter().position(|p| p.axis_value == axis_value && p.method == method) {
                    Some(i) => &mut points[i],
                    None => {
                        points.push(PointResult { axis_value, method, episodes: Vec::new(), reference: Vec::new(), error: None });
                        points.last_mut().unwrap()
                    }
                }
            };
            match record {
                LogRecord::Episode { result, .. } => slot.episodes.push(result),
                LogRecord::Reference { localization_log, .. } => slot.reference = localization_log,
                LogRecord::PointError { message, .. } => slot.error = Some(message),
                LogRecord::Meta { .. } => unreachable!(),
            }
        }
        Ok(Self { axis, seed, route_length_km, route, points, baseline })
    }
}
