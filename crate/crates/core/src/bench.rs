//! Episode execution with re-initialization, and the benchmark metrics.

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{Vector2, Vector3};
use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::fusion::{ekf_predict, ekf_update, project_pose_to_plane, EkfState, FusionConfig};
use crate::geometry::{pose_error, Pose};
use crate::navstack::{pid_control, plan_global, Controllers, LocalPlanner, PidGains};
use crate::rng::{mix_key, stream, Purpose};
use crate::vloc::{localize, GalleryMap, LocalizeParams};
use crate::world::{
    calibrate_odometry_with, mounted_camera_pose, observe, sample_odometry, step_vehicle, vehicle_pose_from_camera,
    DegradationModel, EnvironmentCondition, OdometryBias, OdometryNoiseModel, VehicleParams, VehicleState, WorldError,
    WorldMap, DEFAULT_WHITE_FRACTION,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("gallery does not match the world: {0}")]
    GalleryMismatch(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct OdometryConfig {
    /// Fraction of distance traveled.
    pub position_drift_rate: f64,
    /// Degrees per meter.
    pub rotation_drift_rate: f64,
    pub white_fraction: f64,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self { position_drift_rate: 0.085, rotation_drift_rate: 0.4, white_fraction: DEFAULT_WHITE_FRACTION }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct StackConfig {
    pub waypoint_spacing: f64,
    pub lookahead: f64,
    pub lateral: PidGains,
    pub longitudinal: PidGains,
    pub vehicle: VehicleParams,
    pub fusion: FusionConfig,
    /// Replace `fusion.process_noise` with the value implied by the odometry model.
    pub process_noise_from_odometry: bool,
    /// Distance over which the odometry bias is treated as one random step
    /// when deriving the process noise, meters.
    pub process_noise_correlation_length: f64,
    pub localize: LocalizeParams,
    /// Shift delayed fixes by the odometry accumulated since their capture.
    pub latency_compensation: bool,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            waypoint_spacing: 2.0,
            lookahead: 4.0,
            lateral: PidGains::lateral(),
            longitudinal: PidGains::longitudinal(),
            vehicle: VehicleParams::default(),
            fusion: FusionConfig::default(),
            process_noise_from_odometry: true,
            process_noise_correlation_length: 20.0,
            localize: LocalizeParams::default(),
            latency_compensation: true,
        }
    }
}

/// Test hook: shove the true vehicle sideways once, unknown to the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct InjectedFault {
    /// Seconds after the episode start.
    pub time: f64,
    /// Meters to the left (negative: right).
    pub lateral_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct ScenarioConfig {
    pub condition: EnvironmentCondition,
    pub degradation: DegradationModel,
    pub episodes: u32,
    pub seed: u64,
    /// m/s.
    pub target_speed: f64,
    /// Hz.
    pub localization_rate: f64,
    /// Seconds from capture until the estimate reaches the filter.
    pub localization_latency: f64,
    /// Hz.
    pub control_rate: f64,
    pub failure_lateral_threshold: f64,
    /// Seconds without `stall_progress` meters of route progress.
    pub stall_timeout: f64,
    pub stall_progress: f64,
    /// Episodes that need more re-initializations than this are abandoned.
    pub max_reinits: u32,
    /// Seconds between trajectory log samples.
    pub trajectory_log_interval: f64,
    pub method_label: String,
    pub odometry: OdometryConfig,
    pub stack: StackConfig,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub fault: Option<InjectedFault>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            condition: EnvironmentCondition::pristine(),
            degradation: DegradationModel::default(),
            episodes: 5,
            seed: 0,
            target_speed: 4.0,
            localization_rate: 2.0,
            localization_latency: 0.166,
            control_rate: 50.0,
            failure_lateral_threshold: 2.0,
            stall_timeout: 30.0,
            stall_progress: 1.0,
            max_reinits: 400,
            trajectory_log_interval: 0.5,
            method_label: String::from("vloc"),
            odometry: OdometryConfig::default(),
            stack: StackConfig::default(),
            fault: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        self.condition.validate()?;
        self.degradation.validate()?;
        let positive = [
            (self.target_speed, "target_speed must be positive"),
            (self.localization_rate, "localization_rate must be positive"),
            (self.control_rate, "control_rate must be positive"),
            (self.failure_lateral_threshold, "failure_lateral_threshold must be positive"),
            (self.stall_timeout, "stall_timeout must be positive"),
            (self.trajectory_log_interval, "trajectory_log_interval must be positive"),
            (self.stack.waypoint_spacing, "waypoint_spacing must be positive"),
            (self.stack.lookahead, "lookahead must be positive"),
            (self.stack.process_noise_correlation_length, "process_noise_correlation_length must be positive"),
        ];
        for (v, msg) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BenchError::InvalidConfig(msg));
            }
        }
        if self.episodes == 0 {
            return Err(BenchError::InvalidConfig("episodes must be at least 1"));
        }
        if !(self.localization_latency >= 0.0) {
            return Err(BenchError::InvalidConfig("localization_latency must be non-negative"));
        }
        if self.localization_rate > self.control_rate {
            return Err(BenchError::InvalidConfig("localization_rate cannot exceed control_rate"));
        }
        let o = &self.odometry;
        if !(o.position_drift_rate >= 0.0 && o.rotation_drift_rate >= 0.0 && (0.0..=1.0).contains(&o.white_fraction)) {
            return Err(BenchError::InvalidConfig("odometry rates must be non-negative"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.control_rate
    }

    /// Odometry model for the nominal per-tick travel.
    pub fn odometry_model(&self) -> OdometryNoiseModel {
        let o = &self.odometry;
        calibrate_odometry_with(o.position_drift_rate, o.rotation_drift_rate, self.target_speed * self.dt(), o.white_fraction)
    }

    pub fn fusion_config(&self) -> FusionConfig {
        if !self.stack.process_noise_from_odometry {
            return self.stack.fusion;
        }
        let from = FusionConfig::from_odometry(
            &self.odometry_model(),
            self.target_speed * self.dt(),
            self.stack.process_noise_correlation_length,
        );
        FusionConfig { process_noise: from.process_noise, ..self.stack.fusion }
    }
}

/// Who steers: the fused estimate (normal runs) or the true state
/// (reference passes, where localization only runs passively).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum DriveMode {
    Estimate,
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LocalizationRecord {
    /// Capture time, seconds.
    pub timestamp: f64,
    /// True camera pose at capture.
    pub truth: Pose,
    /// Estimated camera pose.
    pub estimate: Option<Pose>,
    /// Whether the fix passed the gate and updated the filter.
    pub accepted: bool,
    pub latency: f64,
    pub num_inliers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrajectoryRecord {
    pub timestamp: f64,
    pub truth: VehicleState,
    /// (x, y, yaw).
    pub ekf_mean: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum FailureCause {
    Lateral,
    Stall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FailureEvent {
    pub timestamp: f64,
    pub position: Vector2<f64>,
    /// Arc length of the failure along the route.
    pub s: f64,
    pub cause: FailureCause,
}

/// Estimation error of the fused pose against the truth, sampled every tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrackingStats {
    pub rms_position_error: f64,
    pub max_position_error: f64,
    pub final_position_error: f64,
    /// Distance covered since the last (re)initialization, meters.
    pub final_segment_distance: f64,
    pub distance_traveled: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EpisodeResult {
    pub episode_index: u32,
    pub reinit_count: u32,
    pub completed: bool,
    /// Simulated seconds.
    pub duration: f64,
    pub localization_log: Vec<LocalizationRecord>,
    pub trajectory_log: Vec<TrajectoryRecord>,
    pub failure_events: Vec<FailureEvent>,
    pub tracking: TrackingStats,
}

struct Pending {
    available_tick: u64,
    record: usize,
    measurement: Vector3<f64>,
    /// Odometry accumulated since capture.
    since: Vector3<f64>,
}

/// Episode key of the single reference pass per condition.
pub const REFERENCE_EPISODE: u32 = u32::MAX;

fn check_gallery(world: &WorldMap, gallery: &GalleryMap) -> Result<(), BenchError> {
    for (id, p) in &gallery.points3d {
        let Some(l) = world.landmark(*id) else {
            return Err(BenchError::GalleryMismatch("gallery point without a world landmark"));
        };
        if (l.position - p.position).norm() > 1.0 {
            return Err(BenchError::GalleryMismatch("gallery point far from its landmark"));
        }
    }
    if gallery.keyframes.is_empty() {
        return Err(BenchError::GalleryMismatch("gallery has no keyframes"));
    }
    Ok(())
}

fn start_state(world: &WorldMap, s: f64) -> VehicleState {
    let p = world.route.point_at(s);
    VehicleState { x: p.position.x, y: p.position.y, yaw: p.heading, speed: 0.0 }
}

fn planar(v: &VehicleState) -> Vector3<f64> {
    Vector3::new(v.x, v.y, v.yaw)
}

/// Runs one episode from the route start until the goal is reached.
///
/// Every tick: subgoal and PID on the navigation pose, vehicle step, odometry
/// sample, EKF predict. Every `1/localization_rate` seconds (when `use_vloc`):
/// observe at the true camera pose, localize, and queue the fix; it reaches
/// the filter `localization_latency` later. In [`DriveMode::Estimate`] a true
/// lateral deviation beyond the threshold or a stall records a failure and
/// re-initializes vehicle, filter, controllers and odometry bias at the last
/// waypoint passed.
pub fn simulate(
    world: &WorldMap,
    gallery: &GalleryMap,
    config: &ScenarioConfig,
    episode_index: u32,
    use_vloc: bool,
    mode: DriveMode,
) -> Result<EpisodeResult, BenchError> {
    config.validate()?;
    if use_vloc {
        check_gallery(world, gallery)?;
    }
    let route = &world.route;
    let dt = config.dt();
    let episode = episode_index as u64;
    let odo_model = config.odometry_model();
    let fusion = config.fusion_config();
    let stack = &config.stack;
    let mount = gallery.mount.with_condition(&config.condition);
    let loc_every = libm::round(config.control_rate / config.localization_rate).max(1.0) as u64;
    let latency_ticks = libm::ceil(config.localization_latency / dt - 1e-9).max(0.0) as u64;
    let log_every = libm::round(config.trajectory_log_interval / dt).max(1.0) as u64;
    let nominal = route.total_length() / config.target_speed;

    let waypoints = plan_global(route, stack.waypoint_spacing);
    let mut planner = LocalPlanner::new(waypoints.clone(), stack.lookahead);
    let mut controllers = Controllers::new(stack.lateral, stack.longitudinal);
    let mut step_rng = stream(config.seed, Purpose::OdometryStep, episode, 0);
    let mut bias = OdometryBias::sample(&odo_model, &mut stream(config.seed, Purpose::OdometryBias, episode, 0));

    let mut truth = start_state(world, 0.0);
    let mut ekf = EkfState::new(planar(&truth), fusion.initial_covariance);
    let mut pending: Vec<Pending> = Vec::new();

    let mut result = EpisodeResult {
        episode_index,
        reinit_count: 0,
        completed: false,
        duration: 0.0,
        localization_log: Vec::new(),
        trajectory_log: Vec::new(),
        failure_events: Vec::new(),
        tracking: TrackingStats::default(),
    };
    let mut sq_err_sum = 0.0;
    let mut samples = 0u64;
    let mut segment_distance = 0.0;

    let mut s_hint = 0.0;
    let mut best_s = 0.0;
    let mut progress_tick = 0u64;
    let mut attempt = 0u64;
    let mut tick = 0u64;
    let mut fault = config.fault;

    loop {
        let nav = match mode {
            DriveMode::Estimate => ekf.mean,
            DriveMode::GroundTruth => planar(&truth),
        };
        let goal = planner.next_subgoal(&nav);
        if goal.goal_reached {
            result.completed = true;
            break;
        }
        let time_cap = 3.0 * nominal + 120.0 + 60.0 * result.reinit_count as f64;
        if tick as f64 * dt > time_cap || result.reinit_count >= config.max_reinits {
            break;
        }
        let cmd = pid_control(&mut controllers, &nav, truth.speed, &goal.position, config.target_speed, dt);
        let next = step_vehicle(&truth, &cmd.into(), &stack.vehicle, dt);
        let inc = sample_odometry(&truth, &next, &odo_model, &bias, &mut step_rng);
        ekf = ekf_predict(&ekf, &inc, &fusion);
        let inc_v = Vector3::new(inc.delta_translation.x, inc.delta_translation.y, inc.delta_yaw);
        for p in &mut pending {
            p.since += inc_v;
        }
        let moved = libm::hypot(next.x - truth.x, next.y - truth.y);
        result.tracking.distance_traveled += moved;
        segment_distance += moved;
        truth = next;
        tick += 1;
        let t = tick as f64 * dt;
        if let Some(f) = fault.filter(|f| t >= f.time) {
            truth.x -= libm::sin(truth.yaw) * f.lateral_offset;
            truth.y += libm::cos(truth.yaw) * f.lateral_offset;
            fault = None;
        }

        // Delayed fixes reach the filter in capture order.
        while pending.first().is_some_and(|p| p.available_tick <= tick) {
            let p = pending.remove(0);
            let mut z = p.measurement;
            if stack.latency_compensation {
                z += p.since;
            }
            let (next_ekf, accepted) = ekf_update(&ekf, &z, &fusion);
            ekf = next_ekf;
            result.localization_log[p.record].accepted = accepted;
        }

        if use_vloc && tick.is_multiple_of(loc_every) {
            let camera = mounted_camera_pose(&truth, &mount);
            let mut rng = stream(config.seed, Purpose::Observation, episode, attempt);
            let obs = observe(world, &camera, &gallery.intrinsics, &config.condition, &config.degradation, t, &mut rng);
            let params = LocalizeParams {
                latency: config.localization_latency,
                ransac: crate::geometry::RansacParams {
                    seed: mix_key(config.seed, Purpose::Ransac, episode, attempt),
                    ..stack.localize.ransac
                },
                ..stack.localize
            };
            let est = localize(gallery, &obs, &params);
            let measurement = est
                .as_ref()
                .and_then(|e| project_pose_to_plane(&vehicle_pose_from_camera(&e.pose, &mount)).ok());
            result.localization_log.push(LocalizationRecord {
                timestamp: t,
                truth: camera,
                estimate: est.as_ref().map(|e| e.pose),
                accepted: false,
                latency: config.localization_latency,
                num_inliers: est.as_ref().map_or(0, |e| e.num_inliers),
            });
            if let Some(measurement) = measurement {
                pending.push(Pending {
                    available_tick: tick + latency_ticks,
                    record: result.localization_log.len() - 1,
                    measurement,
                    since: Vector3::zeros(),
                });
            }
            attempt += 1;
        }

        let err = libm::hypot(ekf.mean.x - truth.x, ekf.mean.y - truth.y);
        sq_err_sum += err * err;
        samples += 1;
        result.tracking.max_position_error = result.tracking.max_position_error.max(err);
        result.tracking.final_position_error = err;
        result.tracking.final_segment_distance = segment_distance;

        if tick.is_multiple_of(log_every) {
            result.trajectory_log.push(TrajectoryRecord { timestamp: t, truth, ekf_mean: ekf.mean });
        }

        let proj = route.project_near(&Vector2::new(truth.x, truth.y), s_hint, 30.0);
        s_hint = proj.s;
        if proj.s > best_s + config.stall_progress {
            best_s = proj.s;
            progress_tick = tick;
        }
        if mode == DriveMode::GroundTruth {
            continue;
        }
        let cause = if proj.lateral.abs() > config.failure_lateral_threshold {
            Some(FailureCause::Lateral)
        } else if (tick - progress_tick) as f64 * dt > config.stall_timeout {
            Some(FailureCause::Stall)
        } else {
            None
        };
        let Some(cause) = cause else { continue };

        result.failure_events.push(FailureEvent { timestamp: t, position: Vector2::new(truth.x, truth.y), s: proj.s, cause });
        result.reinit_count += 1;
        let wp = waypoints.partition_point(|w| w.s <= proj.s).saturating_sub(1);
        let s0 = waypoints[wp].s;
        truth = start_state(world, s0);
        ekf = EkfState::new(planar(&truth), fusion.initial_covariance);
        planner.reset_to(wp);
        controllers.reset();
        pending.clear();
        bias = OdometryBias::sample(
            &odo_model,
            &mut stream(config.seed, Purpose::OdometryBias, episode, result.reinit_count as u64),
        );
        s_hint = s0;
        best_s = s0;
        progress_tick = tick;
        segment_distance = 0.0;
    }

    result.duration = tick as f64 * dt;
    if samples > 0 {
        result.tracking.rms_position_error = libm::sqrt(sq_err_sum / samples as f64);
    }
    debug_assert_eq!(result.reinit_count as usize, result.failure_events.len());
    Ok(result)
}

/// Closed-loop episode steered by the fused estimate.
pub fn run_episode(
    world: &WorldMap,
    gallery: &GalleryMap,
    config: &ScenarioConfig,
    episode_index: u32,
    use_vloc: bool,
) -> Result<EpisodeResult, BenchError> {
    simulate(world, gallery, config, episode_index, use_vloc, DriveMode::Estimate)
}

/// One ground-truth-steered pass with localization running passively.
pub fn run_reference_recall(
    world: &WorldMap,
    gallery: &GalleryMap,
    config: &ScenarioConfig,
) -> Result<Vec<LocalizationRecord>, BenchError> {
    Ok(simulate(world, gallery, config, REFERENCE_EPISODE, true, DriveMode::GroundTruth)?.localization_log)
}

/// Mean re-initializations per kilometer: `(1/N) Σ r_i / L`.
pub fn failure_rate(results: &[EpisodeResult], route_length_km: f64) -> f64 {
    if results.is_empty() || !(route_length_km > 0.0) {
        return 0.0;
    }
    let sum: f64 = results.iter().map(|r| r.reinit_count as f64 / route_length_km).sum();
    sum / results.len() as f64
}

/// (meters, degrees) bounds; both must hold strictly.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RecallThresholds {
    pub levels: [(f64, f64); 3],
}

impl Default for RecallThresholds {
    fn default() -> Self {
        Self { levels: [(0.25, 2.0), (0.5, 5.0), (5.0, 10.0)] }
    }
}

/// Fraction of attempts within each threshold; absent estimates are misses.
pub fn recall(log: &[LocalizationRecord], thresholds: &RecallThresholds) -> [f64; 3] {
    if log.is_empty() {
        return [0.0; 3];
    }
    let mut hits = [0usize; 3];
    for r in log {
        let Some(est) = &r.estimate else { continue };
        let e = pose_error(est, &r.truth);
        for (h, (t, a)) in hits.iter_mut().zip(thresholds.levels) {
            if e.within(t, a) {
                *h += 1;
            }
        }
    }
    hits.map(|h| h as f64 / log.len() as f64)
}

/// Episodes completed without a single re-initialization.
pub fn success_rate(results: &[EpisodeResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| r.completed && r.reinit_count == 0).count() as f64 / results.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EpisodeSummary {
    pub episode_index: u32,
    pub reinit_count: u32,
    pub completed: bool,
    pub failure_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CrashLocation {
    pub episode_index: u32,
    pub position: Vector2<f64>,
    pub s: f64,
    pub cause: FailureCause,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MetricsReport {
    pub failure_rate: f64,
    pub recall: [f64; 3],
    pub success_rate: f64,
    pub episodes: Vec<EpisodeSummary>,
    pub crash_locations: Vec<CrashLocation>,
}

impl MetricsReport {
    /// `recall_log` is usually the reference pass of the same condition.
    pub fn new(results: &[EpisodeResult], route_length_km: f64, recall_log: &[LocalizationRecord]) -> Self {
        Self {
            failure_rate: failure_rate(results, route_length_km),
            recall: recall(recall_log, &RecallThresholds::default()),
            success_rate: success_rate(results),
            episodes: results
                .iter()
                .map(|r| EpisodeSummary {
                    episode_index: r.episode_index,
                    reinit_count: r.reinit_count,
                    completed: r.completed,
                    failure_rate: r.reinit_count as f64 / route_length_km,
                })
                .collect(),
            crash_locations: results
                .iter()
                .flat_map(|r| {
                    r.failure_events.iter().map(|f| CrashLocation {
                        episode_index: r.episode_index,
                        position: f.position,
                        s: f.s,
                        cause: f.cause,
                    })
                })
                .collect(),
        }
    }
}
