//! Deterministic two-car kinematic simulation.
//!
//! Each step assesses the encounter from the current state, latches any
//! safety action it selects, lets adaptive cruise control override the
//! target car's acceleration, then integrates constant-acceleration
//! kinematics over one time step. Lanes only change when scripted; the lane
//! chains drive prediction, never motion.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Thresholds;
use crate::estimation::{lane_index, CurrentState, ModelDocument, VehicleModel};
use crate::prediction::{assess, CarId, CrashAssessment, EncounterInput, PredictionError, SafetyAction};
use crate::sensing::LidarReading;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("scenario schema error: {0}")]
    SchemaError(String),
    #[error("ACC target is not behind its lead (gap {0} m)")]
    LeadBehindEgo(f64),
    #[error(transparent)]
    Prediction(#[from] PredictionError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Constant-time-gap spacing policy parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccParams {
    /// Driver-set cruise speed; defaults to the controlled car's initial speed.
    pub set_speed_mps: Option<f64>,
    pub time_gap_s: f64,
    pub min_gap_m: f64,
    pub accel_min_mps2: f64,
    pub accel_max_mps2: f64,
    /// Gain on the spacing error, s⁻².
    pub gap_gain: f64,
    /// Gain on the relative speed, s⁻¹.
    pub speed_gain: f64,
    /// Gain toward the set speed in free cruise, s⁻¹.
    pub cruise_gain: f64,
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            set_speed_mps: None,
            time_gap_s: 1.4,
            min_gap_m: 10.0,
            accel_min_mps2: -3.0,
            accel_max_mps2: 3.0,
            gap_gain: 0.23,
            speed_gain: 0.74,
            cruise_gain: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSource {
    /// Model JSON file, relative to the scenario file.
    Path(PathBuf),
    Inline(ModelDocument),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarSpec {
    pub model: ModelSource,
    pub lane: u8,
    pub speed_mps: f64,
    #[serde(default)]
    pub accel_mps2: f64,
    pub pos_m: f64,
}

fn default_time_step() -> f64 {
    0.1
}

fn default_lateral_offset() -> f64 {
    3.7
}

/// Scenario file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub cars: Vec<CarSpec>,
    #[serde(default = "default_lateral_offset")]
    pub lateral_offset_m: f64,
    #[serde(default = "default_time_step")]
    pub time_step_s: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub acc: AccParams,
    #[serde(default)]
    pub disable_actions: bool,
    #[serde(default)]
    pub force_same_lane: bool,
}

/// One car's initial conditions and model.
#[derive(Debug, Clone, PartialEq)]
pub struct CarConfig {
    pub model: VehicleModel,
    pub lane: u8,
    pub speed_mps: f64,
    pub accel_mps2: f64,
    pub pos_m: f64,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub cars: [CarConfig; 2],
    pub lateral_offset_m: f64,
    pub time_step_s: f64,
    pub duration_s: f64,
    pub thresholds: Thresholds,
    pub acc: AccParams,
    /// Assess but never apply actions.
    pub disable_actions: bool,
    /// Put car 1 in car 2's lane.
    pub force_same_lane: bool,
}

impl ScenarioConfig {
    pub fn car(&self, id: CarId) -> &CarConfig {
        &self.cars[id as usize]
    }

    /// Longitudinal gap at the start, measured from the trailing car.
    pub fn initial_gap(&self) -> f64 {
        (self.cars[0].pos_m - self.cars[1].pos_m).abs()
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |msg: String| Err(SimError::SchemaError(msg));
        if !(self.time_step_s > 0.0 && self.time_step_s.is_finite()) {
            return schema(format!("time_step_s {} must be positive", self.time_step_s));
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return schema(format!("duration_s {} must be nonnegative", self.duration_s));
        }
        if !(self.lateral_offset_m >= 0.0) {
            return schema(format!("lateral_offset_m {} must be nonnegative", self.lateral_offset_m));
        }
        if let Err(msg) = self.thresholds.validate() {
            return schema(format!("thresholds: {msg}"));
        }
        let acc = &self.acc;
        if !(acc.accel_min_mps2 <= 0.0 && acc.accel_max_mps2 >= 0.0) {
            return schema("acc: accel limits must bracket zero".into());
        }
        if !(acc.time_gap_s >= 0.0 && acc.min_gap_m >= 0.0) {
            return schema("acc: time_gap_s and min_gap_m must be nonnegative".into());
        }
        for (idx, car) in self.cars.iter().enumerate() {
            if lane_index(car.lane).is_none() {
                return schema(format!("cars[{idx}].lane {} is outside 1..=6", car.lane));
            }
            if !(car.speed_mps >= 0.0) || !car.pos_m.is_finite() || !car.accel_mps2.is_finite() {
                return schema(format!("cars[{idx}] has an invalid kinematic state"));
            }
        }
        Ok(())
    }

    /// The car initially ahead; car 1 on a tie.
    pub fn initial_front(&self) -> CarId {
        if self.cars[1].pos_m > self.cars[0].pos_m {
            CarId::Car2
        } else {
            CarId::Car1
        }
    }
}

/// Reads and validates a scenario file. Model paths resolve against the
/// scenario's directory.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => SimError::FileNotFound(path.to_path_buf()),
        _ => SimError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| SimError::SchemaError(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve_scenario(file, base)
}

pub fn resolve_scenario(file: ScenarioFile, base_dir: &Path) -> Result<ScenarioConfig> {
    if file.cars.len() != 2 {
        return Err(SimError::SchemaError(format!(
            "cars: expected exactly 2 cars, found {}",
            file.cars.len()
        )));
    }
    let mut cars = Vec::with_capacity(2);
    for (idx, spec) in file.cars.into_iter().enumerate() {
        let doc = match spec.model {
            ModelSource::Inline(doc) => doc,
            ModelSource::Path(p) => {
                let full = base_dir.join(&p);
                let text = std::fs::read_to_string(&full).map_err(|_| SimError::FileNotFound(full.clone()))?;
                serde_json::from_str(&text)
                    .map_err(|e| SimError::SchemaError(format!("cars[{idx}].model {}: {e}", full.display())))?
            }
        };
        let state = CurrentState {
            lane: spec.lane,
            speed_mps: spec.speed_mps,
            pos_m: spec.pos_m,
        };
        let model = doc
            .into_model(Some(state))
            .map_err(|e| SimError::SchemaError(format!("cars[{idx}].model: {e}")))?;
        cars.push(CarConfig {
            model,
            lane: spec.lane,
            speed_mps: spec.speed_mps,
            accel_mps2: spec.accel_mps2,
            pos_m: spec.pos_m,
        });
    }
    let cars: [CarConfig; 2] = cars.try_into().expect("length checked");
    let config = ScenarioConfig {
        name: file.name,
        cars,
        lateral_offset_m: file.lateral_offset_m,
        time_step_s: file.time_step_s,
        duration_s: file.duration_s,
        thresholds: file.thresholds,
        acc: file.acc,
        disable_actions: file.disable_actions,
        force_same_lane: file.force_same_lane,
    };
    config.validate()?;
    Ok(config)
}

/// Kinematic state of one car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarState {
    pub lane: u8,
    pub speed_mps: f64,
    pub pos_m: f64,
    /// Acceleration applied during the last step.
    pub accel_mps2: f64,
}

/// Something that happened during a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEvent {
    pub time_s: f64,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub clock_s: f64,
    pub cars: [CarState; 2],
    /// Car whose acceleration ACC controls, once switched on.
    pub acc_target: Option<CarId>,
    pub steering_assist: bool,
    pub events: Vec<SimEvent>,
    pub last_assessment: Option<CrashAssessment>,
}

impl SimState {
    pub fn initial(config: &ScenarioConfig) -> Self {
        let lane2 = config.cars[1].lane;
        let cars = [0, 1].map(|i| {
            let c = &config.cars[i];
            CarState {
                lane: if config.force_same_lane && i == 0 { lane2 } else { c.lane },
                speed_mps: c.speed_mps,
                pos_m: c.pos_m,
                accel_mps2: c.accel_mps2,
            }
        });
        Self {
            clock_s: 0.0,
            cars,
            acc_target: None,
            steering_assist: false,
            events: Vec::new(),
            last_assessment: None,
        }
    }

    pub fn car(&self, id: CarId) -> &CarState {
        &self.cars[id as usize]
    }

    /// Car currently ahead; `fallback` on a tie.
    pub fn front(&self, fallback: CarId) -> CarId {
        let (p1, p2) = (self.cars[0].pos_m, self.cars[1].pos_m);
        if p1 > p2 {
            CarId::Car1
        } else if p2 > p1 {
            CarId::Car2
        } else {
            fallback
        }
    }

    /// Position of `front` minus the other car's; negative once overtaken.
    pub fn signed_gap(&self, front: CarId) -> f64 {
        self.car(front).pos_m - self.car(front.other()).pos_m
    }

    pub fn same_lane(&self) -> bool {
        self.cars[0].lane == self.cars[1].lane
    }
}

/// Spacing-policy acceleration for `ego` following `lead`.
///
/// Desired gap `g* = min_gap + time_gap · v_ego`. Beyond it the car cruises
/// toward `set_speed`; inside it the command is
/// `k_g (gap − g*) + k_v (v_lead − v_ego)`. Both are clipped to the limits.
pub fn acc_command(ego: &CarState, lead: &CarState, set_speed_mps: f64, params: &AccParams) -> Result<f64> {
    let gap = lead.pos_m - ego.pos_m;
    if gap <= 0.0 {
        return Err(SimError::LeadBehindEgo(gap));
    }
    let desired = params.min_gap_m + params.time_gap_s * ego.speed_mps;
    let raw = if gap > desired {
        params.cruise_gain * (set_speed_mps - ego.speed_mps)
    } else {
        params.gap_gain * (gap - desired) + params.speed_gain * (lead.speed_mps - ego.speed_mps)
    };
    Ok(raw.clamp(params.accel_min_mps2, params.accel_max_mps2))
}

/// Encounter as seen from `state`; the gap is measured through a simulated
/// Lidar return.
pub fn encounter_at(state: &SimState, config: &ScenarioConfig, front: CarId) -> Result<EncounterInput> {
    let gap = state.signed_gap(front).max(0.0);
    let lateral = if state.same_lane() { 0.0 } else { config.lateral_offset_m };
    let gap_d = if gap > 0.0 {
        LidarReading::for_geometry(gap, lateral)
            .longitudinal_gap()
            .map_err(|e| SimError::SchemaError(e.to_string()))?
    } else {
        0.0
    };
    let model_of = |id: CarId| {
        let c = state.car(id);
        config.car(id).model.clone().with_state(c.lane, c.speed_mps, c.pos_m)
    };
    Ok(EncounterInput {
        car1: model_of(CarId::Car1),
        car2: model_of(CarId::Car2),
        gap_d,
        front_car: front,
        thresholds: config.thresholds,
    })
}

fn set_speed_for(config: &ScenarioConfig, car: CarId) -> f64 {
    config.acc.set_speed_mps.unwrap_or(config.car(car).speed_mps)
}

/// Advances one time step: assess, latch actions, integrate.
pub fn step(state: &SimState, config: &ScenarioConfig) -> Result<SimState> {
    let mut next = state.clone();
    let front = state.front(config.initial_front());
    let assessment = assess(&encounter_at(state, config, front)?)?;

    if !config.disable_actions {
        for (lane, action) in assessment.actions() {
            match action {
                SafetyAction::AccOn { target } if next.acc_target.is_none() => {
                    next.acc_target = Some(target);
                    next.events.push(SimEvent {
                        time_s: state.clock_s,
                        kind: "acc_on".into(),
                        detail: format!("{target} follows {} (lane {lane})", target.other()),
                    });
                }
                SafetyAction::LaneDepartureAndSteering if !next.steering_assist => {
                    next.steering_assist = true;
                    next.events.push(SimEvent {
                        time_s: state.clock_s,
                        kind: "lane_departure_and_steering".into(),
                        detail: format!("both cars held out of lane {lane}"),
                    });
                }
                _ => {}
            }
        }
    }
    if assessment.t.is_some() && !assessment.speed_stable {
        next.events.push(SimEvent {
            time_s: state.clock_s,
            kind: "resample".into(),
            detail: "speed unstable, crash time re-estimated next step".into(),
        });
    }

    let dt = config.time_step_s;
    for id in [CarId::Car1, CarId::Car2] {
        let scripted = config.car(id).accel_mps2;
        let accel = match next.acc_target {
            Some(target) if target == id => {
                match acc_command(state.car(id), state.car(id.other()), set_speed_for(config, id), &config.acc) {
                    Ok(a) => a,
                    Err(SimError::LeadBehindEgo(_)) => scripted,
                    Err(e) => return Err(e),
                }
            }
            _ => scripted,
        };
        let car = &mut next.cars[id as usize];
        car.pos_m += car.speed_mps * dt + 0.5 * accel * dt * dt;
        car.speed_mps = (car.speed_mps + accel * dt).max(0.0);
        car.accel_mps2 = accel;
    }
    next.clock_s = state.clock_s + dt;
    next.last_assessment = Some(assessment);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelineEntry {
    pub time_s: f64,
    pub gap_m: f64,
    pub front: CarId,
    pub assessment: CrashAssessment,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub scenario: String,
    pub time_step_s: f64,
    pub duration_s: f64,
    pub actions_disabled: bool,
    pub timeline: Vec<TimelineEntry>,
    /// Smallest gap, signed against the initially leading car.
    pub min_gap_m: f64,
    pub min_gap_time_s: f64,
    pub crash: bool,
    pub crash_time_s: Option<f64>,
    pub events: Vec<SimEvent>,
    /// First closing assessment's clock plus its probable crash time.
    pub predicted_crash_time_s: Option<f64>,
    /// Time of the crash, or of the smallest gap when there was none.
    pub actual_closest_approach_s: f64,
    pub final_state: [CarState; 2],
}

impl SimReport {
    pub fn triggered_actions(&self) -> impl Iterator<Item = &SimEvent> {
        self.events.iter().filter(|e| e.kind != "resample")
    }
}

/// Steps from time zero until the duration elapses or the cars crash.
pub fn run(config: &ScenarioConfig) -> Result<SimReport> {
    config.validate()?;
    let reference = config.initial_front();
    let mut state = SimState::initial(config);
    let mut timeline = Vec::new();
    let mut min_gap = state.signed_gap(reference);
    let mut min_gap_time = 0.0;
    let mut crash_time = (state.same_lane() && min_gap <= 0.0).then_some(0.0);
    let mut predicted = None;

    let steps = (config.duration_s / config.time_step_s + 1e-9).floor() as usize;
    for _ in 0..steps {
        if crash_time.is_some() {
            break;
        }
        let gap_before = state.signed_gap(reference);
        let next = step(&state, config)?;
        let assessment = next.last_assessment.clone().expect("step always assesses");
        if predicted.is_none() {
            predicted = assessment.t.map(|t| state.clock_s + t);
        }
        timeline.push(TimelineEntry {
            time_s: state.clock_s,
            gap_m: gap_before,
            front: state.front(reference),
            assessment,
        });
        let gap_after = next.signed_gap(reference);
        if gap_after < min_gap {
            min_gap = gap_after;
            min_gap_time = next.clock_s;
        }
        if next.same_lane() && gap_after <= 0.0 {
            // Linear interpolation of the zero crossing inside the step.
            let fraction = if gap_before > gap_after {
                gap_before / (gap_before - gap_after)
            } else {
                1.0
            };
            crash_time = Some(state.clock_s + fraction * config.time_step_s);
        }
        state = next;
    }

    Ok(SimReport {
        scenario: config.name.clone(),
        time_step_s: config.time_step_s,
        duration_s: config.duration_s,
        actions_disabled: config.disable_actions,
        timeline,
        min_gap_m: min_gap,
        min_gap_time_s: min_gap_time,
        crash: crash_time.is_some(),
        crash_time_s: crash_time,
        events: state.events.clone(),
        predicted_crash_time_s: predicted,
        actual_closest_approach_s: crash_time.unwrap_or(min_gap_time),
        final_state: state.cars,
    })
}

/// Runs independent scenarios on separate threads, preserving order.
pub fn run_sweep(configs: &[ScenarioConfig]) -> Vec<Result<SimReport>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || run(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::ObservationMatrix;
    use crate::markov::StochasticMatrix;

    fn car(speed: f64, pos: f64) -> CarState {
        CarState {
            lane: 5,
            speed_mps: speed,
            pos_m: pos,
            accel_mps2: 0.0,
        }
    }

    fn stay_model() -> VehicleModel {
        VehicleModel {
            lane_chain: StochasticMatrix::identity(6),
            speed_chain: StochasticMatrix::identity(6),
            observation: ObservationMatrix::uniform(),
            current_lane: 1,
            current_speed_mps: 0.0,
            current_pos_m: 0.0,
            frame_interval_s: 1.0,
            unobserved_lane_rows: vec![],
            unobserved_speed_rows: vec![],
        }
    }

    fn config(cars: [(u8, f64, f64, f64); 2], duration_s: f64) -> ScenarioConfig {
        ScenarioConfig {
            name: "test".into(),
            cars: cars.map(|(lane, speed_mps, accel_mps2, pos_m)| CarConfig {
                model: stay_model(),
                lane,
                speed_mps,
                accel_mps2,
                pos_m,
            }),
            lateral_offset_m: 3.7,
            time_step_s: 0.1,
            duration_s,
            thresholds: Thresholds::default(),
            acc: AccParams::default(),
            disable_actions: true,
            force_same_lane: false,
        }
    }

    #[test]
    fn acc_policy_examples() {
        let p = AccParams::default();
        assert_eq!(acc_command(&car(30.0, 0.0), &car(30.0, 1000.0), 30.0, &p).unwrap(), 0.0);
        let desired = p.min_gap_m + p.time_gap_s * 30.0;
        let a = acc_command(&car(30.0, 0.0), &car(30.0, desired), 30.0, &p).unwrap();
        assert!(a.abs() < 1e-12);
        // 0.23 · (20 − 52) = −7.36, clipped
        assert_eq!(acc_command(&car(30.0, 0.0), &car(30.0, 20.0), 30.0, &p).unwrap(), -3.0);
        assert!(matches!(
            acc_command(&car(30.0, 10.0), &car(30.0, 5.0), 30.0, &p),
            Err(SimError::LeadBehindEgo(_))
        ));
    }

    #[test]
    fn kinematics_step() {
        let cfg = config([(2, 10.0, 0.0, 100.0), (4, 0.0, -1.0, 0.0)], 1.0);
        let s1 = step(&SimState::initial(&cfg), &cfg).unwrap();
        assert!((s1.cars[0].pos_m - 101.0).abs() < 1e-12);
        assert_eq!(s1.cars[1].speed_mps, 0.0);

        let cfg = config([(2, 30.0, 0.6, 100.0), (4, 0.0, 0.0, 0.0)], 1.0);
        let s1 = step(&SimState::initial(&cfg), &cfg).unwrap();
        assert!((s1.cars[0].pos_m - 103.003).abs() < 1e-9);
        assert!((s1.cars[0].speed_mps - 30.06).abs() < 1e-12);
        assert!((s1.clock_s - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_duration_is_empty() {
        let cfg = config([(5, 30.0, 0.0, 40.0), (5, 40.0, 0.0, 0.0)], 0.0);
        let report = run(&cfg).unwrap();
        assert!(report.timeline.is_empty());
        assert!(!report.crash);
        assert_eq!(report.min_gap_m, 40.0);
    }

    #[test]
    fn constant_speed_closure_crashes_at_gap_over_speed() {
        let cfg = config([(5, 30.0, 0.0, 40.0), (5, 40.0, 0.0, 0.0)], 10.0);
        let report = run(&cfg).unwrap();
        assert!(report.crash);
        assert!((report.crash_time_s.unwrap() - 4.0).abs() <= cfg.time_step_s);
        assert!(report.min_gap_m <= 0.0);
    }

    #[test]
    fn different_lanes_never_crash() {
        let cfg = config([(6, 30.0, 0.0, 40.0), (5, 40.0, 0.0, 0.0)], 10.0);
        let report = run(&cfg).unwrap();
        assert!(!report.crash);
        assert!(report.min_gap_m < 0.0);
    }

    #[test]
    fn validation_rejects_bad_step() {
        let mut cfg = config([(6, 30.0, 0.0, 40.0), (5, 40.0, 0.0, 0.0)], 10.0);
        cfg.time_step_s = 0.0;
        assert!(matches!(run(&cfg), Err(SimError::SchemaError(_))));
    }
}
