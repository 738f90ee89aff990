//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rtfqi::dynamics::SystemState;
use rtfqi::fqi::Transition;
use rtfqi::regression::ExtraTreesParams;
use rtfqi::seed::stream_rng;
use rtfqi::tracking::TrackingCost;

pub const ACTIONS: [f64; 2] = [0.0, 1.0];

/// Deterministic 6-state, 2-action chain.
pub const CHAIN_STATES: usize = 6;

pub fn chain_next(s: usize, a: usize) -> usize {
    if a == 0 {
        (s + 1) % CHAIN_STATES
    } else {
        (5 * s + 2) % CHAIN_STATES
    }
}

pub fn chain_cost(s: usize, a: usize) -> f64 {
    const TABLE: [[f64; 2]; CHAIN_STATES] = [
        [1.0, 0.4],
        [0.3, 2.0],
        [0.0, 1.1],
        [2.5, 0.7],
        [0.9, 0.2],
        [1.6, 3.0],
    ];
    TABLE[s][a]
}

pub fn chain_transitions() -> Vec<Transition<f64, f64>> {
    let mut out = Vec::new();
    for s in 0..CHAIN_STATES {
        for a in 0..ACTIONS.len() {
            out.push(Transition {
                state: s as f64,
                action: ACTIONS[a],
                successor: chain_next(s, a) as f64,
            });
        }
    }
    out
}

pub fn chain_cost_fn(s: &f64, a: &f64) -> f64 {
    chain_cost(*s as usize, *a as usize)
}

/// Value iteration on the chain: entry `k` is `Q_k[s][a]`, with `Q_0 = c`.
pub fn chain_value_iteration(gamma: f64, iterations: usize) -> Vec<Vec<[f64; 2]>> {
    let q0: Vec<[f64; 2]> = (0..CHAIN_STATES)
        .map(|s| [chain_cost(s, 0), chain_cost(s, 1)])
        .collect();
    let mut out = vec![q0];
    for _ in 0..iterations {
        let prev = out.last().unwrap();
        let next = (0..CHAIN_STATES)
            .map(|s| {
                let mut row = [0.0; 2];
                for (a, v) in row.iter_mut().enumerate() {
                    let n = chain_next(s, a);
                    *v = chain_cost(s, a) + gamma * prev[n][0].min(prev[n][1]);
                }
                row
            })
            .collect();
        out.push(next);
    }
    out
}

/// Memorizing regressor: every leaf holds one distinct input.
pub fn memorizing(tree_count: usize, seed: u64) -> ExtraTreesParams {
    ExtraTreesParams {
        tree_count,
        split_candidates: None,
        min_leaf_size: 1,
        seed,
    }
}

/// 4-state, 2-action system tracked against a 3-phase reference.
pub const RING_STATES: usize = 4;
pub const RING_REFERENCE: [f64; 3] = [0.0, 3.0, 1.0];

pub fn ring_next(s: usize, a: usize) -> usize {
    if a == 0 {
        s.saturating_sub(1)
    } else {
        (s + 1).min(RING_STATES - 1)
    }
}

pub struct RingCost;

impl TrackingCost<f64, f64> for RingCost {
    fn distance(&self, state: &f64, reference: &[f64]) -> f64 {
        (state - reference[0]).abs()
    }

    fn stage_cost(&self, distance: f64, _state: &f64, action: &f64) -> f64 {
        distance + 0.25 * action
    }
}

pub fn ring_cost(s: usize, phase: usize, a: usize) -> f64 {
    (s as f64 - RING_REFERENCE[phase]).abs() + 0.25 * a as f64
}

pub fn ring_transitions() -> Vec<Transition<f64, f64>> {
    let mut out = Vec::new();
    for s in 0..RING_STATES {
        for a in 0..ACTIONS.len() {
            out.push(Transition {
                state: s as f64,
                action: ACTIONS[a],
                successor: ring_next(s, a) as f64,
            });
        }
    }
    out
}

/// Value iteration on the explicit `(state, phase)` product MDP; entry `k`
/// is `Q_k[phase][s][a]`.
pub fn ring_product_value_iteration(gamma: f64, iterations: usize) -> Vec<Vec<Vec<[f64; 2]>>> {
    let period = RING_REFERENCE.len();
    let q0: Vec<Vec<[f64; 2]>> = (0..period)
        .map(|i| {
            (0..RING_STATES)
                .map(|s| [ring_cost(s, i, 0), ring_cost(s, i, 1)])
                .collect()
        })
        .collect();
    let mut out = vec![q0];
    for _ in 0..iterations {
        let prev = out.last().unwrap();
        let next = (0..period)
            .map(|i| {
                let j = (i + 1) % period;
                (0..RING_STATES)
                    .map(|s| {
                        let mut row = [0.0; 2];
                        for (a, v) in row.iter_mut().enumerate() {
                            let n = ring_next(s, a);
                            *v = ring_cost(s, i, a) + gamma * prev[j][n][0].min(prev[j][n][1]);
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        out.push(next);
    }
    out
}

/// Ring of alternating high and low proteins with two adjacent highs three
/// genes apart, jittered by up to `jitter`. mRNA sits at its quasi-steady
/// value.
pub fn two_wall_state(jitter: f64, seed: u64) -> SystemState {
    let mut rng = stream_rng(seed, 0);
    let p: Vec<f64> = [15.0, 0.0, 15.0, 15.0, 0.0, 15.0]
        .iter()
        .map(|&x: &f64| (x + jitter * rng.gen_range(-1.0..1.0)).max(0.0))
        .collect();
    let m = p.iter().map(|x| 0.06 * x / 0.16).collect();
    SystemState::new(m, p).unwrap()
}
