//! Crash prediction for a two-car encounter.
//!
//! Three stages run in order: the probable crash time with a speed
//! stability gate, the per-lane joint lane probabilities at that time, and
//! the choice of safety action for every lane whose joint probability
//! reaches the crash threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Thresholds, Tolerances};
use crate::estimation::{bin_speed_saturating, EstimationError, VehicleModel, LANE_COUNT};
use crate::markov::{propagate_flagged, ChainAnalysis, MarkovError, ProbabilityVector};
use crate::sensing::{probable_crash_time, SensingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CarId {
    Car1,
    Car2,
}

impl CarId {
    pub fn other(self) -> Self {
        match self {
            CarId::Car1 => CarId::Car2,
            CarId::Car2 => CarId::Car1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CarId::Car1 => "car1",
            CarId::Car2 => "car2",
        }
    }
}

impl std::fmt::Display for CarId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CarId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "car1" => Ok(CarId::Car1),
            "car2" => Ok(CarId::Car2),
            other => Err(format!("unknown car `{other}` (expected car1 or car2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SafetyAction {
    NoAction,
    /// Adaptive cruise control on the trailing car.
    AccOn { target: CarId },
    /// Lane-departure warning and steering assist on both cars.
    LaneDepartureAndSteering,
}

impl SafetyAction {
    pub fn name(&self) -> &'static str {
        match self {
            SafetyAction::NoAction => "no_action",
            SafetyAction::AccOn { .. } => "acc_on",
            SafetyAction::LaneDepartureAndSteering => "lane_departure_and_steering",
        }
    }

    pub fn target_label(&self) -> &'static str {
        match self {
            SafetyAction::NoAction => "none",
            SafetyAction::AccOn { target } => target.as_str(),
            SafetyAction::LaneDepartureAndSteering => "both",
        }
    }
}

/// Which condition selected the action for a lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Car 1's passage time into the lane exceeds `t`.
    Car1Passage,
    /// Car 1's did not, car 2's does.
    Car2Passage,
    /// Neither passage time exceeds `t`.
    Otherwise,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictionError {
    #[error("cars are not closing (relative speed {0} m/s)")]
    NonClosing(f64),
    #[error("{car}: lane chain is not regular, mean first passage times are undefined")]
    NotRegular { car: CarId },
    #[error("invalid encounter: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

pub type Result<T> = std::result::Result<T, PredictionError>;

/// Two vehicle models, their longitudinal gap and which one is ahead.
#[derive(Debug, Clone)]
pub struct EncounterInput {
    pub car1: VehicleModel,
    pub car2: VehicleModel,
    pub gap_d: f64,
    pub front_car: CarId,
    pub thresholds: Thresholds,
}

impl EncounterInput {
    pub fn car(&self, id: CarId) -> &VehicleModel {
        match id {
            CarId::Car1 => &self.car1,
            CarId::Car2 => &self.car2,
        }
    }

    pub fn trailing_car(&self) -> CarId {
        self.front_car.other()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_d >= 0.0) || !self.gap_d.is_finite() {
            return Err(PredictionError::InvalidInput(format!("gap {} m must be nonnegative", self.gap_d)));
        }
        self.thresholds.validate().map_err(PredictionError::InvalidInput)
    }
}

/// Probability of leaving the current speed bin in one step, `1 − s_kk`.
pub fn speed_change_probability(model: &VehicleModel) -> Result<f64> {
    let k = bin_speed_saturating(model.current_speed_mps)?.index();
    Ok(1.0 - model.speed_chain.get(k, k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbableTime {
    pub t: f64,
    pub closing_speed: f64,
    pub speed_stable: bool,
    /// Speed-change probabilities of car 1 and car 2.
    pub speed_change: [f64; 2],
}

/// Probable crash time `t = d / V` and the speed-stability gate.
///
/// Returns [`PredictionError::NonClosing`] when the trailing car is not
/// faster; an unstable result is flagged, not retried.
pub fn flow1_probable_time(input: &EncounterInput) -> Result<ProbableTime> {
    let lead = input.car(input.front_car);
    let trail = input.car(input.trailing_car());
    let closing_speed = trail.current_speed_mps - lead.current_speed_mps;
    let t = match probable_crash_time(input.gap_d, lead.current_speed_mps, trail.current_speed_mps) {
        Ok(t) => t,
        Err(SensingError::NonClosingSpeeds(v)) => return Err(PredictionError::NonClosing(v)),
        Err(other) => return Err(PredictionError::InvalidInput(other.to_string())),
    };
    let speed_change = [speed_change_probability(&input.car1)?, speed_change_probability(&input.car2)?];
    let speed_stable = speed_change.iter().all(|&p| p < input.thresholds.speed_stability);
    Ok(ProbableTime {
        t,
        closing_speed,
        speed_stable,
        speed_change,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneProbabilities {
    pub pi1: ProbabilityVector,
    pub pi2: ProbabilityVector,
    /// `pc[k] = pi1[k] · pi2[k]`, not renormalized.
    pub pc: [f64; LANE_COUNT],
    /// Set when a real matrix power fell back to an integer power.
    pub approximate: bool,
}

/// Lane distribution of `model` after `t` seconds, starting from certainty
/// on its current lane.
pub fn lane_distribution(model: &VehicleModel, t: f64, tol: &Tolerances) -> Result<(ProbabilityVector, bool)> {
    let start = ProbabilityVector::unit(LANE_COUNT, model.lane_state());
    Ok(propagate_flagged(&start, &model.lane_chain, t / model.frame_interval_s, tol)?)
}

/// Per-lane probability that both cars occupy the lane at time `t`.
pub fn flow2_crash_probabilities(car1: &VehicleModel, car2: &VehicleModel, t: f64) -> Result<LaneProbabilities> {
    if !(t >= 0.0) {
        return Err(PredictionError::InvalidInput(format!("time {t} s must be nonnegative")));
    }
    let tol = Tolerances::default();
    let (pi1, approx1) = lane_distribution(car1, t, &tol)?;
    let (pi2, approx2) = lane_distribution(car2, t, &tol)?;
    let mut pc = [0.0; LANE_COUNT];
    for (k, slot) in pc.iter_mut().enumerate() {
        *slot = pi1[k] * pi2[k];
    }
    Ok(LaneProbabilities {
        pi1,
        pi2,
        pc,
        approximate: approx1 || approx2,
    })
}

/// Which condition fires for passage times (already in seconds) and `t`.
pub fn select_branch(m1_entry: f64, m2_entry: f64, t: f64) -> Branch {
    if m1_entry > t {
        Branch::Car1Passage
    } else if m2_entry > t {
        Branch::Car2Passage
    } else {
        Branch::Otherwise
    }
}

/// Action prescribed by a branch: both passage branches switch on ACC for
/// the trailing car.
pub fn action_for(branch: Branch, front_car: CarId) -> SafetyAction {
    match branch {
        Branch::Car1Passage | Branch::Car2Passage => SafetyAction::AccOn {
            target: front_car.other(),
        },
        Branch::Otherwise => SafetyAction::LaneDepartureAndSteering,
    }
}

/// The action taken for one flagged lane, with the values that chose it.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneDecision {
    /// Lane number, 1-based.
    pub lane: u8,
    pub action: SafetyAction,
    /// Car 1's mean first passage time from its lane into `lane`, seconds.
    pub m1_entry: f64,
    /// Car 2's, seconds.
    pub m2_entry: f64,
    pub branch: Branch,
}

/// Action selection with caller-supplied passage times (seconds).
///
/// `passage(car, from, to)` is only called for lanes at or above the crash
/// threshold.
pub fn flow3_with_passage<F>(input: &EncounterInput, pc: &[f64; LANE_COUNT], t: f64, mut passage: F) -> Result<Vec<LaneDecision>>
where
    F: FnMut(CarId, usize, usize) -> Result<f64>,
{
    let i = input.car1.lane_state();
    let j = input.car2.lane_state();
    let mut decisions = Vec::new();
    for (k, &p) in pc.iter().enumerate() {
        if p < input.thresholds.crash {
            continue;
        }
        let m1_entry = passage(CarId::Car1, i, k)?;
        let m2_entry = passage(CarId::Car2, j, k)?;
        let branch = select_branch(m1_entry, m2_entry, t);
        decisions.push(LaneDecision {
            lane: k as u8 + 1,
            action: action_for(branch, input.front_car),
            m1_entry,
            m2_entry,
            branch,
        });
    }
    Ok(decisions)
}

/// Action selection using each car's mean first passage matrix, converted
/// from chain steps to seconds with the model's frame interval.
pub fn flow3_select_actions(input: &EncounterInput, pc: &[f64; LANE_COUNT], t: f64) -> Result<Vec<LaneDecision>> {
    let mut cache: [Option<ChainAnalysis>; 2] = [None, None];
    flow3_with_passage(input, pc, t, |car, from, to| {
        if from == to {
            return Ok(0.0);
        }
        let slot = &mut cache[car as usize];
        if slot.is_none() {
            let analysis = ChainAnalysis::of(&input.car(car).lane_chain).map_err(|e| match e {
                MarkovError::NotRegular => PredictionError::NotRegular { car },
                other => other.into(),
            })?;
            *slot = Some(analysis);
        }
        let analysis = slot.as_ref().expect("filled above");
        Ok(analysis.passage.get(from, to) * input.car(car).frame_interval_s)
    })
}

/// Outcome of running all three stages on one encounter.
#[derive(Debug, Clone, PartialEq)]
pub struct CrashAssessment {
    /// Probable crash time; `None` when the cars are not closing.
    pub t: Option<f64>,
    pub speed_stable: bool,
    pub pc: [f64; LANE_COUNT],
    pub decisions: Vec<LaneDecision>,
    pub approximate_power: bool,
}

impl CrashAssessment {
    fn not_closing() -> Self {
        Self {
            t: None,
            speed_stable: false,
            pc: [0.0; LANE_COUNT],
            decisions: Vec::new(),
            approximate_power: false,
        }
    }

    pub fn actions(&self) -> impl Iterator<Item = (u8, SafetyAction)> + '_ {
        self.decisions.iter().map(|d| (d.lane, d.action))
    }

    pub fn has_actions(&self) -> bool {
        !self.decisions.is_empty()
    }
}

/// Runs the three stages. Actions are withheld when either car fails the
/// speed-stability gate; the joint probabilities are still reported.
pub fn assess(input: &EncounterInput) -> Result<CrashAssessment> {
    assess_with(input, None)
}

/// [`assess`] with an optional externally supplied crash time, which
/// bypasses the closing-speed computation.
pub fn assess_with(input: &EncounterInput, t_override: Option<f64>) -> Result<CrashAssessment> {
    input.validate()?;
    let (t, speed_stable) = match t_override {
        Some(t) => {
            let stable = [&input.car1, &input.car2]
                .iter()
                .map(|m| speed_change_probability(m))
                .collect::<Result<Vec<_>>>()?
                .iter()
                .all(|&p| p < input.thresholds.speed_stability);
            (t, stable)
        }
        None => match flow1_probable_time(input) {
            Ok(flow1) => (flow1.t, flow1.speed_stable),
            Err(PredictionError::NonClosing(_)) => return Ok(CrashAssessment::not_closing()),
            Err(e) => return Err(e),
        },
    };
    let lanes = flow2_crash_probabilities(&input.car1, &input.car2, t)?;
    let decisions = if speed_stable {
        flow3_select_actions(input, &lanes.pc, t)?
    } else {
        Vec::new()
    };
    Ok(CrashAssessment {
        t: Some(t),
        speed_stable,
        pc: lanes.pc,
        decisions,
        approximate_power: lanes.approximate,
    })
}

#[derive(Serialize)]
struct ActionView {
    lane: u8,
    action: &'static str,
    target: &'static str,
}

#[derive(Serialize)]
struct DiagnosticView {
    lane: u8,
    m1_entry: f64,
    m2_entry: f64,
    branch: Branch,
}

#[derive(Serialize)]
struct AssessmentView<'a> {
    t: Option<f64>,
    speed_stable: bool,
    pc: &'a [f64; LANE_COUNT],
    actions: Vec<ActionView>,
    diagnostics: Vec<DiagnosticView>,
    approximate_power: bool,
}

impl Serialize for CrashAssessment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        AssessmentView {
            t: self.t,
            speed_stable: self.speed_stable,
            pc: &self.pc,
            actions: self
                .decisions
                .iter()
                .map(|d| ActionView {
                    lane: d.lane,
                    action: d.action.name(),
                    target: d.action.target_label(),
                })
                .collect(),
            diagnostics: self
                .decisions
                .iter()
                .map(|d| DiagnosticView {
                    lane: d.lane,
                    m1_entry: d.m1_entry,
                    m2_entry: d.m2_entry,
                    branch: d.branch,
                })
                .collect(),
            approximate_power: self.approximate_power,
        }
        .serialize(serializer)
    }
}
