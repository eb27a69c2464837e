//! Two-layer model estimation from trajectory logs.
//!
//! The lane layer counts lane-to-lane transitions between consecutive
//! samples, the speed layer does the same over six 10 m/s speed bins, and
//! the observation matrix records how speeds distribute within each lane.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::DEFAULT_FRAME_INTERVAL_S;
use crate::markov::{MarkovError, StochasticMatrix};

/// Lanes on one side of the road.
pub const LANE_COUNT: usize = 6;
/// Speed bins a–f.
pub const SPEED_BIN_COUNT: usize = 6;
/// Width of one speed bin, m/s.
pub const SPEED_BIN_WIDTH: f64 = 10.0;
/// Exclusive upper bound of the top speed bin, m/s.
pub const MAX_SPEED: f64 = SPEED_BIN_WIDTH * SPEED_BIN_COUNT as f64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("vehicle {vehicle} has more than one record for frame {frame}")]
    DuplicateFrame { vehicle: i64, frame: u64 },
    #[error("line {line}: lane {lane} is outside 1..={LANE_COUNT}")]
    LaneOutOfRange { line: u64, lane: i64 },
    #[error("line {line}: speed {speed} m/s is outside [0, {MAX_SPEED})")]
    SpeedOutOfRange { line: u64, speed: f64 },
    #[error("sequence has {len} samples; at least 2 are needed")]
    TooShort { len: usize },
    #[error("no records")]
    NoRecords,
    #[error("model document: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

pub type Result<T> = std::result::Result<T, EstimationError>;

/// Observed speed symbol; bin `k` covers `[10k, 10k + 10)` m/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedSymbol {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl SpeedSymbol {
    pub const ALL: [SpeedSymbol; SPEED_BIN_COUNT] = [Self::A, Self::B, Self::C, Self::D, Self::E, Self::F];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        (b'a' + self as u8) as char
    }
}

impl fmt::Display for SpeedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Bins are half-open; a boundary speed belongs to the upper bin.
pub fn bin_speed(speed: f64) -> Result<SpeedSymbol> {
    if !(0.0..MAX_SPEED).contains(&speed) {
        return Err(EstimationError::SpeedOutOfRange { line: 0, speed });
    }
    let idx = ((speed / SPEED_BIN_WIDTH).floor() as usize).min(SPEED_BIN_COUNT - 1);
    Ok(SpeedSymbol::ALL[idx])
}

/// Like [`bin_speed`] but speeds at or above the top bound fall in `f`.
///
/// Used for live kinematic speeds, which are not bounded like logged data.
pub fn bin_speed_saturating(speed: f64) -> Result<SpeedSymbol> {
    if speed >= MAX_SPEED {
        Ok(SpeedSymbol::F)
    } else {
        bin_speed(speed)
    }
}

/// One timestamped observation of a vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub vehicle_id: i64,
    pub frame: u64,
    pub lane: u8,
    pub speed_mps: f64,
    pub pos_m: f64,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    vehicle_id: i64,
    frame: u64,
    lane: i64,
    speed_mps: f64,
    pos_m: f64,
}

/// Reads the trajectory CSV and groups records by vehicle, sorted by frame.
pub fn ingest_trajectories<R: Read>(source: R) -> Result<BTreeMap<i64, Vec<TrajectoryRecord>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let parse_err = |e: csv::Error| EstimationError::ParseError {
        line: e.position().map(|p| p.line()).unwrap_or(1),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(parse_err)?.clone();
    let mut grouped: BTreeMap<i64, Vec<TrajectoryRecord>> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(parse_err)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let raw: RawRecord = record.deserialize(Some(&headers)).map_err(|e| EstimationError::ParseError {
            line,
            message: e.to_string(),
        })?;
        let lane = u8::try_from(raw.lane)
            .ok()
            .filter(|l| (1..=LANE_COUNT as u8).contains(l))
            .ok_or(EstimationError::LaneOutOfRange { line, lane: raw.lane })?;
        if !(0.0..MAX_SPEED).contains(&raw.speed_mps) {
            return Err(EstimationError::SpeedOutOfRange { line, speed: raw.speed_mps });
        }
        if !raw.pos_m.is_finite() {
            return Err(EstimationError::ParseError {
                line,
                message: "pos_m is not finite".into(),
            });
        }
        grouped.entry(raw.vehicle_id).or_default().push(TrajectoryRecord {
            vehicle_id: raw.vehicle_id,
            frame: raw.frame,
            lane,
            speed_mps: raw.speed_mps,
            pos_m: raw.pos_m,
        });
    }
    for (vehicle, records) in grouped.iter_mut() {
        records.sort_by_key(|r| r.frame);
        if let Some(pair) = records.windows(2).find(|w| w[0].frame == w[1].frame) {
            return Err(EstimationError::DuplicateFrame {
                vehicle: *vehicle,
                frame: pair[0].frame,
            });
        }
    }
    Ok(grouped)
}

/// A transition matrix estimated by counting, with its raw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedChain {
    pub matrix: StochasticMatrix,
    pub counts: Vec<Vec<u64>>,
    /// States never seen as the origin of a transition (0-based); their rows are self-loops.
    pub unobserved: Vec<usize>,
}

impl EstimatedChain {
    pub fn transitions(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// `counts[i][j]` = number of `k` with `states[k] = i` and `states[k+1] = j`.
pub fn count_transitions(states: &[usize], n: usize) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; n]; n];
    for pair in states.windows(2) {
        counts[pair[0]][pair[1]] += 1;
    }
    counts
}

/// Row-normalized transition counts over states `0..n`.
pub fn estimate_chain(states: &[usize], n: usize) -> Result<EstimatedChain> {
    if states.len() < 2 {
        return Err(EstimationError::TooShort { len: states.len() });
    }
    let counts = count_transitions(states, n);
    let mut unobserved = Vec::new();
    let rows: Vec<Vec<f64>> = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                unobserved.push(i);
                (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    Ok(EstimatedChain {
        matrix: StochasticMatrix::from_rows(&rows)?,
        counts,
        unobserved,
    })
}

/// Lane-change matrix from a lane sequence (lanes numbered 1..=6).
pub fn estimate_lane_transitions(lanes: &[u8]) -> Result<EstimatedChain> {
    let states = lanes
        .iter()
        .map(|&l| lane_index(l).ok_or(EstimationError::LaneOutOfRange { line: 0, lane: l as i64 }))
        .collect::<Result<Vec<_>>>()?;
    estimate_chain(&states, LANE_COUNT)
}

/// Speed-change matrix over the bins a–f.
pub fn estimate_speed_transitions(speeds: &[f64]) -> Result<EstimatedChain> {
    let states = speeds
        .iter()
        .map(|&v| bin_speed(v).map(SpeedSymbol::index))
        .collect::<Result<Vec<_>>>()?;
    estimate_chain(&states, SPEED_BIN_COUNT)
}

pub fn lane_index(lane: u8) -> Option<usize> {
    (1..=LANE_COUNT as u8).contains(&lane).then(|| lane as usize - 1)
}

/// Per-lane distribution of observed speed symbols.
///
/// `columns[j][s]` is the probability of symbol `s` given lane `j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub columns: [[f64; SPEED_BIN_COUNT]; LANE_COUNT],
    /// Lanes (0-based) with no records; their columns are uniform.
    pub uniform_lanes: Vec<usize>,
}

impl ObservationMatrix {
    pub fn uniform() -> Self {
        Self {
            columns: [[1.0 / SPEED_BIN_COUNT as f64; SPEED_BIN_COUNT]; LANE_COUNT],
            uniform_lanes: (0..LANE_COUNT).collect(),
        }
    }

    /// `b_lane(symbol)`, lane numbered from 1.
    pub fn prob(&self, lane: u8, symbol: SpeedSymbol) -> f64 {
        self.columns[lane as usize - 1][symbol.index()]
    }
}

pub fn estimate_observation_probs(records: &[TrajectoryRecord]) -> Result<ObservationMatrix> {
    if records.is_empty() {
        return Err(EstimationError::NoRecords);
    }
    let mut counts = [[0u64; SPEED_BIN_COUNT]; LANE_COUNT];
    for r in records {
        let lane = lane_index(r.lane).ok_or(EstimationError::LaneOutOfRange {
            line: 0,
            lane: r.lane as i64,
        })?;
        counts[lane][bin_speed(r.speed_mps)?.index()] += 1;
    }
    let mut out = ObservationMatrix::uniform();
    out.uniform_lanes.clear();
    for (lane, col) in counts.iter().enumerate() {
        let total: u64 = col.iter().sum();
        if total == 0 {
            out.uniform_lanes.push(lane);
        } else {
            for (s, &c) in col.iter().enumerate() {
                out.columns[lane][s] = c as f64 / total as f64;
            }
        }
    }
    Ok(out)
}

/// One vehicle's lane chain, speed chain, observation matrix and current state.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleModel {
    pub lane_chain: StochasticMatrix,
    pub speed_chain: StochasticMatrix,
    pub observation: ObservationMatrix,
    pub current_lane: u8,
    pub current_speed_mps: f64,
    pub current_pos_m: f64,
    /// Seconds represented by one chain step.
    pub frame_interval_s: f64,
    pub unobserved_lane_rows: Vec<usize>,
    pub unobserved_speed_rows: Vec<usize>,
}

impl VehicleModel {
    /// 0-based index of the current lane.
    pub fn lane_state(&self) -> usize {
        self.current_lane as usize - 1
    }

    pub fn with_state(mut self, lane: u8, speed_mps: f64, pos_m: f64) -> Self {
        self.current_lane = lane;
        self.current_speed_mps = speed_mps;
        self.current_pos_m = pos_m;
        self
    }
}

pub fn build_vehicle_model(records: &[TrajectoryRecord], frame_interval_s: f64) -> Result<VehicleModel> {
    if records.len() < 2 {
        return Err(EstimationError::TooShort { len: records.len() });
    }
    let lanes: Vec<u8> = records.iter().map(|r| r.lane).collect();
    let speeds: Vec<f64> = records.iter().map(|r| r.speed_mps).collect();
    let lane = estimate_lane_transitions(&lanes)?;
    let speed = estimate_speed_transitions(&speeds)?;
    let observation = estimate_observation_probs(records)?;
    let last = records.last().expect("length checked");
    Ok(VehicleModel {
        lane_chain: lane.matrix,
        speed_chain: speed.matrix,
        observation,
        current_lane: last.lane,
        current_speed_mps: last.speed_mps,
        current_pos_m: last.pos_m,
        frame_interval_s,
        unobserved_lane_rows: lane.unobserved,
        unobserved_speed_rows: speed.unobserved,
    })
}

/// Which layer an unobserved row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    Lane,
    Speed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnobservedRow {
    pub chain: ChainKind,
    /// 1-based row (lane number, or speed bin with a = 1).
    pub row: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentState {
    pub lane: u8,
    pub speed_mps: f64,
    pub pos_m: f64,
}

fn default_frame_interval() -> f64 {
    DEFAULT_FRAME_INTERVAL_S
}

/// On-disk model format.
///
/// `observation` is stored column-major by lane: element `j` is the symbol
/// distribution of lane `j + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub lane_chain: Vec<Vec<f64>>,
    pub speed_chain: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<CurrentState>,
    #[serde(default)]
    pub unobserved_rows: Vec<UnobservedRow>,
    #[serde(default)]
    pub uniform_observation_lanes: Vec<u8>,
    #[serde(default = "default_frame_interval")]
    pub frame_interval_s: f64,
}

impl From<&VehicleModel> for ModelDocument {
    fn from(m: &VehicleModel) -> Self {
        let unobserved_rows = m
            .unobserved_lane_rows
            .iter()
            .map(|&r| UnobservedRow { chain: ChainKind::Lane, row: r + 1 })
            .chain(
                m.unobserved_speed_rows
                    .iter()
                    .map(|&r| UnobservedRow { chain: ChainKind::Speed, row: r + 1 }),
            )
            .collect();
        Self {
            lane_chain: m.lane_chain.to_rows(),
            speed_chain: m.speed_chain.to_rows(),
            observation: Some(m.observation.columns.iter().map(|c| c.to_vec()).collect()),
            current: Some(CurrentState {
                lane: m.current_lane,
                speed_mps: m.current_speed_mps,
                pos_m: m.current_pos_m,
            }),
            unobserved_rows,
            uniform_observation_lanes: m.observation.uniform_lanes.iter().map(|&l| l as u8 + 1).collect(),
            frame_interval_s: m.frame_interval_s,
        }
    }
}

impl ModelDocument {
    /// Builds a model; `state` overrides (or supplies) the `current` block.
    pub fn into_model(self, state: Option<CurrentState>) -> Result<VehicleModel> {
        let invalid = |msg: String| EstimationError::InvalidModel(msg);
        let lane_chain = StochasticMatrix::from_rows(&self.lane_chain)?;
        let speed_chain = StochasticMatrix::from_rows(&self.speed_chain)?;
        if lane_chain.n() != LANE_COUNT || speed_chain.n() != SPEED_BIN_COUNT {
            return Err(invalid(format!(
                "expected {LANE_COUNT}x{LANE_COUNT} lane chain and {SPEED_BIN_COUNT}x{SPEED_BIN_COUNT} speed chain"
            )));
        }
        if !(self.frame_interval_s > 0.0 && self.frame_interval_s.is_finite()) {
            return Err(invalid(format!("frame_interval_s {} must be positive", self.frame_interval_s)));
        }
        let observation = match self.observation {
            None => ObservationMatrix::uniform(),
            Some(cols) => {
                if cols.len() != LANE_COUNT || cols.iter().any(|c| c.len() != SPEED_BIN_COUNT) {
                    return Err(invalid("observation must be 6 columns of 6".into()));
                }
                let mut out = ObservationMatrix::uniform();
                for (j, col) in cols.iter().enumerate() {
                    let sum: f64 = col.iter().sum();
                    if col.iter().any(|x| !(0.0..=1.0).contains(x)) || (sum - 1.0).abs() > 1e-9 {
                        return Err(invalid(format!("observation column for lane {} is not a distribution", j + 1)));
                    }
                    out.columns[j].copy_from_slice(col);
                }
                out.uniform_lanes = self.uniform_observation_lanes.iter().map(|&l| l as usize - 1).collect();
                out
            }
        };
        let current = state
            .or(self.current)
            .ok_or_else(|| invalid("missing `current` state".into()))?;
        if lane_index(current.lane).is_none() {
            return Err(EstimationError::LaneOutOfRange {
                line: 0,
                lane: current.lane as i64,
            });
        }
        if !(current.speed_mps >= 0.0) || !current.pos_m.is_finite() {
            return Err(invalid(format!("invalid current state {current:?}")));
        }
        let rows_of = |kind: ChainKind| {
            self.unobserved_rows
                .iter()
                .filter(|r| r.chain == kind)
                .map(|r| r.row - 1)
                .collect::<Vec<_>>()
        };
        Ok(VehicleModel {
            unobserved_lane_rows: rows_of(ChainKind::Lane),
            unobserved_speed_rows: rows_of(ChainKind::Speed),
            lane_chain,
            speed_chain,
            observation,
            current_lane: current.lane,
            current_speed_mps: current.speed_mps,
            current_pos_m: current.pos_m,
            frame_interval_s: self.frame_interval_s,
        })
    }
}
