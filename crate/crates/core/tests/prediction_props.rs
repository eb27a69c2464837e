mod support;

use crashguard::config::Thresholds;
use crashguard::estimation::{ObservationMatrix, VehicleModel};
use crashguard::markov::{propagate, ProbabilityVector, StochasticMatrix};
use crashguard::prediction::{
    action_for, assess, flow2_crash_probabilities, flow3_with_passage, select_branch, Branch, CarId, EncounterInput,
    SafetyAction,
};
use crashguard::synthetic::{adjacent_leak_chain, uniform_leak_chain};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn model(lane_chain: StochasticMatrix, lane: u8, speed: f64) -> VehicleModel {
    VehicleModel {
        lane_chain,
        speed_chain: uniform_leak_chain(6, 0.9).unwrap(),
        observation: ObservationMatrix::uniform(),
        current_lane: lane,
        current_speed_mps: speed,
        current_pos_m: 0.0,
        frame_interval_s: 1.0,
        unobserved_lane_rows: vec![],
        unobserved_speed_rows: vec![],
    }
}

fn positive_chain() -> impl Strategy<Value = StochasticMatrix> {
    prop::collection::vec(prop::collection::vec(0.02f64..1.0, 6), 6).prop_map(|rows| {
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|x| x / s).collect()
            })
            .collect();
        StochasticMatrix::from_rows(&rows).unwrap()
    })
}

/// Marginal by explicit vector-matrix products, no real powers involved.
fn marginal_by_steps(p: &StochasticMatrix, start: usize, steps: u32) -> Vec<f64> {
    let mut v = vec![0.0; 6];
    v[start] = 1.0;
    for _ in 0..steps {
        let m = DMatrix::from_row_slice(1, 6, &v) * p.as_matrix();
        v = m.iter().copied().collect();
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pc_is_product_of_marginals(
        p1 in positive_chain(),
        p2 in positive_chain(),
        i in 1u8..=6,
        j in 1u8..=6,
        t in prop::sample::select(vec![0u32, 1, 2, 4]),
    ) {
        let out = flow2_crash_probabilities(&model(p1.clone(), i, 30.0), &model(p2.clone(), j, 40.0), t as f64).unwrap();
        let m1 = marginal_by_steps(&p1, i as usize - 1, t);
        let m2 = marginal_by_steps(&p2, j as usize - 1, t);
        for k in 0..6 {
            prop_assert!((out.pc[k] - m1[k] * m2[k]).abs() < 1e-12);
            prop_assert!(out.pc[k] <= out.pi1[k].min(out.pi2[k]) + 1e-15);
        }
    }

    #[test]
    fn raising_threshold_never_adds_actions(
        p1 in positive_chain(),
        p2 in positive_chain(),
        i in 1u8..=6,
        j in 1u8..=6,
        low in 0.01f64..0.5,
        delta in 0.0f64..0.45,
    ) {
        let high = (low + delta).min(0.99);
        let run = |threshold: f64| {
            let input = EncounterInput {
                car1: model(p1.clone(), i, 30.0),
                car2: model(p2.clone(), j, 40.0),
                gap_d: 40.0,
                front_car: CarId::Car1,
                thresholds: Thresholds { speed_stability: 0.5, crash: threshold },
            };
            assess(&input).unwrap().decisions.into_iter().map(|d| (d.lane, d.action)).collect::<Vec<_>>()
        };
        let loose = run(low);
        let strict = run(high);
        prop_assert!(strict.iter().all(|a| loose.contains(a)));
    }

    #[test]
    fn acc_targets_the_trailing_car_under_relabeling(
        p1 in positive_chain(),
        p2 in positive_chain(),
        i in 1u8..=6,
        j in 1u8..=6,
        front_is_car1 in any::<bool>(),
        threshold in 0.01f64..0.2,
    ) {
        let (front, lead_speed, trail_speed) = if front_is_car1 { (CarId::Car1, 30.0, 40.0) } else { (CarId::Car2, 30.0, 40.0) };
        let speed_of = |c: CarId| if c == front { lead_speed } else { trail_speed };
        let thresholds = Thresholds { speed_stability: 0.5, crash: threshold };
        let a = EncounterInput {
            car1: model(p1.clone(), i, speed_of(CarId::Car1)),
            car2: model(p2.clone(), j, speed_of(CarId::Car2)),
            gap_d: 25.0,
            front_car: front,
            thresholds,
        };
        let swapped = EncounterInput {
            car1: a.car2.clone(),
            car2: a.car1.clone(),
            gap_d: 25.0,
            front_car: front.other(),
            thresholds,
        };
        let original = assess(&a).unwrap();
        let relabeled = assess(&swapped).unwrap();
        prop_assert_eq!(original.pc, relabeled.pc);
        let norm = |acts: Vec<(u8, SafetyAction)>, swap: bool| -> Vec<(u8, SafetyAction)> {
            acts.into_iter().map(|(lane, act)| match act {
                SafetyAction::AccOn { target } if swap => (lane, SafetyAction::AccOn { target: target.other() }),
                other => (lane, other),
            }).collect()
        };
        for (lane, act) in original.actions() {
            if let SafetyAction::AccOn { target } = act {
                prop_assert_eq!(target, front.other(), "lane {}", lane);
            }
        }
        prop_assert_eq!(
            norm(original.actions().collect(), false),
            norm(relabeled.actions().collect(), true)
        );
    }

    #[test]
    fn assess_is_deterministic(p1 in positive_chain(), p2 in positive_chain(), gap in 1.0f64..80.0) {
        let input = EncounterInput {
            car1: model(p1, 6, 30.0),
            car2: model(p2, 5, 40.0),
            gap_d: gap,
            front_car: CarId::Car1,
            thresholds: Thresholds { speed_stability: 0.5, crash: 0.05 },
        };
        prop_assert_eq!(assess(&input).unwrap(), assess(&input).unwrap());
    }
}

/// Hand-derived table: ACC for the trailing car iff either passage time
/// exceeds t, otherwise lane-departure/steering; nothing below threshold.
fn expected_action(m1_over: bool, m2_over: bool, front: CarId, pc: f64) -> Option<SafetyAction> {
    if pc < 0.3 {
        return None;
    }
    Some(if m1_over || m2_over {
        SafetyAction::AccOn { target: front.other() }
    } else {
        SafetyAction::LaneDepartureAndSteering
    })
}

#[test]
fn flow3_truth_table() {
    let t = 2.0;
    let base = model(StochasticMatrix::identity(6), 6, 30.0);
    let mut cells = 0;
    for m1 in [0.5 * t, 1.5 * t] {
        for m2 in [0.5 * t, 1.5 * t] {
            for front in [CarId::Car1, CarId::Car2] {
                for pc_value in [0.2, 0.4] {
                    let input = EncounterInput {
                        car1: base.clone(),
                        car2: model(StochasticMatrix::identity(6), 5, 40.0),
                        gap_d: 20.0,
                        front_car: front,
                        thresholds: Thresholds::default(),
                    };
                    let mut pc = [0.0; 6];
                    pc[4] = pc_value;
                    let got = flow3_with_passage(&input, &pc, t, |car, _, _| {
                        Ok(if car == CarId::Car1 { m1 } else { m2 })
                    })
                    .unwrap();
                    let expected = expected_action(m1 > t, m2 > t, front, pc_value);
                    assert_eq!(got.first().map(|d| d.action), expected, "m1={m1} m2={m2} {front} pc={pc_value}");
                    assert!(got.len() <= 1);
                    cells += 1;
                }
            }
        }
    }
    assert_eq!(cells, 16);
}

#[test]
fn branch_records_which_car_triggered() {
    assert_eq!(select_branch(3.0, 0.0, 2.0), Branch::Car1Passage);
    assert_eq!(select_branch(1.0, 3.0, 2.0), Branch::Car2Passage);
    assert_eq!(select_branch(2.0, 2.0, 2.0), Branch::Otherwise);
    assert_eq!(action_for(Branch::Car2Passage, CarId::Car2), SafetyAction::AccOn { target: CarId::Car1 });
}

#[test]
fn near_diagonal_chains_give_low_crash_probability() {
    // lanes 1 and 2, self-loops of at least 0.9, t = 30 / (60 - 50)
    let p1 = adjacent_leak_chain(&[0.95, 0.9, 0.9, 0.9, 0.9, 0.9], &[0.5; 6]).unwrap();
    let p2 = adjacent_leak_chain(&[0.9, 0.95, 0.9, 0.9, 0.9, 0.9], &[0.5; 6]).unwrap();
    let input = EncounterInput {
        car1: model(p1.clone(), 1, 50.0),
        car2: model(p2.clone(), 2, 59.0),
        gap_d: 30.0,
        front_car: CarId::Car1,
        thresholds: Thresholds::default(),
    };
    let t = 30.0 / 9.0;
    let a = assess(&input).unwrap();
    assert!((a.t.unwrap() - t).abs() < 1e-12);
    let m1 = propagate(&ProbabilityVector::unit(6, 0), &p1, t).unwrap();
    let m2 = propagate(&ProbabilityVector::unit(6, 1), &p2, t).unwrap();
    for k in 0..6 {
        assert!((a.pc[k] - m1[k] * m2[k]).abs() < 1e-12);
        assert!(a.pc[k] < 0.3);
    }
    assert!(!a.has_actions());
}
