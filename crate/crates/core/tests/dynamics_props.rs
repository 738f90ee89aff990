mod common;

use proptest::prelude::*;
use rtfqi::dynamics::io::{read_transitions, write_transitions};
use rtfqi::dynamics::{
    estimate_period, generate_transitions, rk4, simulate, step, ControlInput, RepressilatorParams,
    SimConfig, Species, SystemState,
};

fn params() -> RepressilatorParams {
    RepressilatorParams::default()
}

fn state() -> impl Strategy<Value = SystemState> {
    (
        prop::collection::vec(0.0..20.0f64, 6),
        prop::collection::vec(0.0..30.0f64, 6),
    )
        .prop_map(|(m, p)| SystemState::new(m, p).unwrap())
}

fn inputs() -> impl Strategy<Value = Vec<ControlInput>> {
    prop::collection::vec(
        (any::<bool>(), any::<bool>()).prop_map(|(a, b)| ControlInput::new(a, b)),
        1..40,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn concentrations_stay_nonnegative(init in state(), us in inputs()) {
        let states = simulate(&init, us, &params(), 1.0, 10).unwrap();
        for s in &states {
            prop_assert!(s.m.iter().chain(&s.p).all(|&v| v >= 0.0 && v.is_finite()));
        }
    }

    #[test]
    fn rotating_genes_commutes_with_the_flow(init in state(), shift in 1usize..6) {
        let dark = std::iter::repeat_n(ControlInput::DARK, 30);
        let a = simulate(&init, dark.clone(), &params(), 1.0, 10).unwrap();
        let b = simulate(&init.rotated(shift), dark, &params(), 1.0, 10).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let x = x.rotated(shift);
            for (u, v) in x.to_flat().iter().zip(y.to_flat()) {
                prop_assert!((u - v).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn light_never_lowers_gene_one_mrna(init in state(), u2 in any::<bool>()) {
        let dark = step(&init, ControlInput::new(false, u2), &params(), 1.0, 10).unwrap();
        let lit = step(&init, ControlInput::new(true, u2), &params(), 1.0, 10).unwrap();
        prop_assert!(lit.m[0] >= dark.m[0]);
    }
}

#[test]
fn transition_sets_are_deterministic() {
    let cfg = SimConfig {
        trajectory_count: 20,
        max_trajectory_length: 30,
        seed: 8,
        ..SimConfig::default()
    };
    let a = generate_transitions(&cfg, &params()).unwrap();
    let b = generate_transitions(&cfg, &params()).unwrap();
    assert_eq!(a, b);
    let other = generate_transitions(&SimConfig { seed: 9, ..cfg }, &params()).unwrap();
    assert_ne!(a, other);
}

#[test]
fn transition_sets_ignore_worker_count() {
    let cfg = SimConfig {
        trajectory_count: 16,
        max_trajectory_length: 20,
        seed: 3,
        ..SimConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate_transitions(&cfg, &params()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn full_protocol_size() {
    let f = generate_transitions(&SimConfig::default(), &params()).unwrap();
    assert_eq!(f.len(), 300 * 299);
    assert!(f
        .iter()
        .all(|t| t.state.validate().is_ok() && t.successor.validate().is_ok()));
    let actions = ControlInput::binary_set();
    for a in &actions {
        let share = f.iter().filter(|t| t.action == *a).count() as f64 / f.len() as f64;
        assert!((share - 0.25).abs() < 0.02, "{a:?}: {share}");
    }
}

#[test]
fn successive_transitions_chain() {
    let cfg = SimConfig {
        trajectory_count: 1,
        max_trajectory_length: 50,
        seed: 1,
        ..SimConfig::default()
    };
    let f = generate_transitions(&cfg, &params()).unwrap();
    assert_eq!(f.len(), 49);
    for w in f.windows(2) {
        assert_eq!(w[0].successor, w[1].state);
    }
    for t in &f {
        assert_eq!(
            step(&t.state, t.action, &params(), 1.0, 10).unwrap(),
            t.successor
        );
    }
}

#[test]
fn csv_round_trip_of_generated_set() {
    let cfg = SimConfig {
        trajectory_count: 3,
        max_trajectory_length: 10,
        ..SimConfig::default()
    };
    let f = generate_transitions(&cfg, &params()).unwrap();
    let mut buf = Vec::new();
    write_transitions(&mut buf, &f).unwrap();
    assert_eq!(read_transitions(buf.as_slice()).unwrap(), f);
}

#[test]
fn rk4_is_fourth_order() {
    let err = |dt: f64| {
        let mut y = [1.0];
        rk4(&mut y, 1.0, (1.0 / dt) as usize, |y, out| out[0] = -y[0]).unwrap();
        (y[0] - (-1.0f64).exp()).abs()
    };
    let ratio = err(0.2) / err(0.1);
    assert!((12.0..=20.0).contains(&ratio), "{ratio}");
}

#[test]
fn natural_oscillation_period() {
    for seed in 0..4 {
        let init = common::two_wall_state(0.1, seed);
        let dark = std::iter::repeat_n(ControlInput::DARK, 1500);
        let states = simulate(&init, dark, &params(), 1.0, 10).unwrap();
        for gene in 0..6 {
            let period = estimate_period(&states, Species::Protein(gene), 1.0).unwrap();
            assert!(
                (127.0..=173.0).contains(&period),
                "seed {seed} gene {gene}: {period}"
            );
        }
    }
}

#[test]
fn generic_initial_states_settle_into_a_fixed_point() {
    let init = SystemState::new(vec![1.0; 6], vec![3.0, 12.0, 7.0, 1.0, 9.0, 5.0]).unwrap();
    let dark = std::iter::repeat_n(ControlInput::DARK, 1500);
    let states = simulate(&init, dark, &params(), 1.0, 10).unwrap();
    let last = states.last().unwrap();
    let prev = &states[states.len() - 2];
    for (a, b) in last.p.iter().zip(&prev.p) {
        assert!((a - b).abs() < 1e-6);
    }
}
