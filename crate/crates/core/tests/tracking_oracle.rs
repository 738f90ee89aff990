mod common;

use common::*;
use rtfqi::dynamics::{
    generate_transitions, ControlInput, RepressilatorParams, SimConfig, SystemState,
};
use rtfqi::fqi::{run_fqi, FqiConfig, Transition};
use rtfqi::harness::RepressilatorTrackingCost;
use rtfqi::regression::ExtraTreesParams;
use rtfqi::tracking::{
    augment, phase_backup_targets, run_tracking_fqi, PeriodicReference, PhaseQEnsemble,
    TrackingCost, TrackingPolicy,
};

fn ring_reference() -> PeriodicReference {
    PeriodicReference::new(RING_REFERENCE.iter().map(|&v| vec![v]).collect()).unwrap()
}

fn config(iterations: usize) -> FqiConfig<f64> {
    let mut cfg = FqiConfig::new(ACTIONS.to_vec());
    cfg.iteration_cap = iterations;
    cfg.regression = memorizing(4, 3);
    cfg
}

fn phase_table(e: &PhaseQEnsemble<f64>, phase: usize) -> Vec<[f64; 2]> {
    (0..RING_STATES)
        .map(|s| {
            let v = e.phase(phase).action_values(&(s as f64)).unwrap();
            [v[0], v[1]]
        })
        .collect()
}

#[test]
fn per_phase_tables_match_product_value_iteration() {
    let cfg = config(25);
    let run = run_tracking_fqi(&ring_transitions(), &ring_reference(), RingCost, &cfg).unwrap();
    let oracle = ring_product_value_iteration(cfg.gamma, 25);
    assert_eq!(run.iterates.len(), 25);
    for (k, e) in run.iterates.iter().enumerate() {
        for phase in 0..RING_REFERENCE.len() {
            for (s, row) in phase_table(e, phase).iter().enumerate() {
                for a in 0..2 {
                    let want = oracle[k + 1][phase][s][a];
                    assert!(
                        (row[a] - want).abs() <= 1e-9,
                        "k={} phase={phase} s={s} a={a}: {} vs {want}",
                        k + 1,
                        row[a]
                    );
                }
            }
        }
    }
}

#[test]
fn policy_matches_oracle_argmin_in_every_phase() {
    let run = run_tracking_fqi(
        &ring_transitions(),
        &ring_reference(),
        RingCost,
        &config(25),
    )
    .unwrap();
    let oracle = ring_product_value_iteration(0.75, 25);
    for phase in 0..RING_REFERENCE.len() {
        for s in 0..RING_STATES {
            let [q0, q1] = oracle[25][phase][s];
            let want = if q1 < q0 { 1.0 } else { 0.0 };
            assert_eq!(
                run.policy.act(&(s as f64), phase).unwrap(),
                want,
                "phase {phase} s {s}"
            );
        }
    }
    assert!(run.policy.act(&0.0, RING_REFERENCE.len()).is_err());
}

#[test]
fn two_phase_reference_after_two_iterations() {
    let reference = PeriodicReference::new(vec![vec![1.0], vec![2.0]]).unwrap();
    let run = run_tracking_fqi(&ring_transitions(), &reference, RingCost, &config(2)).unwrap();
    let c = |s: usize, v: f64, a: usize| (s as f64 - v).abs() + 0.25 * a as f64;
    let v = [1.0, 2.0];
    let q1 = |i: usize, s: usize, a: usize| {
        let j = (i + 1) % 2;
        let n = ring_next(s, a);
        c(s, v[i], a) + 0.75 * c(n, v[j], 0).min(c(n, v[j], 1))
    };
    let q2 = |i: usize, s: usize, a: usize| {
        let j = (i + 1) % 2;
        let n = ring_next(s, a);
        c(s, v[i], a) + 0.75 * q1(j, n, 0).min(q1(j, n, 1))
    };
    let last = run.iterates.last().unwrap();
    for i in 0..2 {
        for (s, row) in phase_table(last, i).iter().enumerate() {
            for a in 0..2 {
                assert!((row[a] - q2(i, s, a)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn first_phase_targets_look_one_phase_ahead() {
    let f = ring_transitions();
    let reference = ring_reference();
    let data = phase_backup_targets(&f, &reference, None, &RingCost, 0.75, &ACTIONS, 2).unwrap();
    for (t, &y) in f.iter().zip(data.targets()) {
        let (s, a) = (t.state as usize, t.action as usize);
        let n = ring_next(s, a);
        let want = ring_cost(s, 2, a) + 0.75 * ring_cost(n, 0, 0).min(ring_cost(n, 0, 1));
        assert!((y - want).abs() < 1e-12);
    }
    assert!(phase_backup_targets(&f, &reference, None, &RingCost, 0.75, &ACTIONS, 3).is_err());
}

fn small_repressilator_set() -> Vec<Transition<SystemState, ControlInput>> {
    let params = RepressilatorParams::default();
    let sim = SimConfig {
        trajectory_count: 12,
        max_trajectory_length: 25,
        seed: 17,
        ..SimConfig::default()
    };
    generate_transitions(&sim, &params).unwrap()
}

#[test]
fn single_phase_tracking_reduces_to_plain_fqi() {
    let f = small_repressilator_set();
    let cost = RepressilatorTrackingCost::default();
    let target = vec![8.0];
    let reference = PeriodicReference::constant(target.clone()).unwrap();
    let mut cfg = FqiConfig::new(ControlInput::binary_set());
    cfg.iteration_cap = 6;
    cfg.regression = ExtraTreesParams {
        tree_count: 7,
        seed: 99,
        ..ExtraTreesParams::default()
    };

    let tracking = run_tracking_fqi(&f, &reference, cost, &cfg).unwrap();
    let composed = move |s: &SystemState, a: &ControlInput| cost.cost(s, &target, a);
    let plain = run_fqi(&f, composed, &cfg).unwrap();

    assert_eq!(tracking.iterates.len(), plain.iterates.len());
    for (e, q) in tracking.iterates.iter().zip(&plain.iterates) {
        for t in f.iter().step_by(7) {
            for u in ControlInput::binary_set() {
                let a = e.phase(0).value(&t.successor, &u).unwrap();
                let b = q.value(&t.successor, &u).unwrap();
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }
    for t in &f {
        assert_eq!(
            tracking.policy.act(&t.state, 0).unwrap(),
            plain.policy.act(&t.state).unwrap()
        );
    }
}

#[test]
fn augmented_set_has_one_row_per_transition_and_phase() {
    let f = ring_transitions();
    let reference = ring_reference();
    let set = augment(&f, &reference);
    assert_eq!(set.len(), f.len() * 3);
    let rows: Vec<_> = set.iter().collect();
    assert_eq!(rows.len(), set.len());
    for row in &rows {
        assert_eq!(row.successor_phase, (row.phase + 1) % 3);
        assert_eq!(row.reference, reference.value(row.phase));
        assert_eq!(
            row.successor_reference,
            reference.value(row.successor_phase)
        );
    }
}

#[test]
fn augmented_set_of_paper_size() {
    let f: Vec<Transition<f64, f64>> = (0..1000)
        .map(|i| Transition {
            state: i as f64,
            action: 0.0,
            successor: i as f64,
        })
        .collect();
    let reference = PeriodicReference::new((0..200).map(|i| vec![i as f64]).collect()).unwrap();
    let set = augment(&f, &reference);
    assert_eq!(set.len(), 200_000);
    assert_eq!(set.iter().count(), 200_000);
}

#[test]
fn zero_iteration_policy_minimizes_phase_stage_cost() {
    let run =
        run_tracking_fqi(&ring_transitions(), &ring_reference(), RingCost, &config(0)).unwrap();
    assert!(matches!(run.policy, TrackingPolicy::StageCost { .. }));
    for phase in 0..3 {
        for s in 0..RING_STATES {
            assert_eq!(run.policy.act(&(s as f64), phase).unwrap(), 0.0);
        }
    }
}
