//! Fitted Q Iteration.
//!
//! Starting from `Q_0 = c`, each round computes Bellman backup targets
//!
//! ```text
//! Q_k(n_l, u_l) = c(n_l, u_l) + gamma * min_u Q_{k-1}(n_l+, u)
//! ```
//!
//! on the logged transitions and regresses them over `(state, action)`
//! feature vectors. The policy is greedy with respect to the last iterate.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::io::fmt_real;
use crate::error::{Error, Result};
use crate::features::Features;
use crate::regression::{Dataset, ExtraTreesForest, ExtraTreesParams, TrainingInputs};
use crate::seed::regression_seed;

/// One logged step `(n_l, u_l, n_l+)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition<S, A> {
    pub state: S,
    pub action: A,
    pub successor: S,
}

/// Stage cost `c(state, action)`; must be finite and nonnegative.
pub trait CostFunction<S, A>: Sync {
    fn cost(&self, state: &S, action: &A) -> f64;
}

impl<S, A, F> CostFunction<S, A> for F
where
    F: Fn(&S, &A) -> f64 + Sync,
{
    fn cost(&self, state: &S, action: &A) -> f64 {
        self(state, action)
    }
}

pub(crate) fn checked_cost(c: f64) -> Result<f64> {
    if c >= 0.0 && c.is_finite() {
        Ok(c)
    } else {
        Err(Error::invalid(format!(
            "stage cost must be finite and >= 0, got {c}"
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FqiConfig<A> {
    pub gamma: f64,
    pub iteration_cap: usize,
    pub actions: Vec<A>,
    pub regression: ExtraTreesParams,
    /// Keep every fitted iterate, not only the last one.
    pub retain_iterates: bool,
}

impl<A: PartialEq> FqiConfig<A> {
    /// Discount 0.75 and 30 iterations.
    pub fn new(actions: Vec<A>) -> Self {
        Self {
            gamma: 0.75,
            iteration_cap: 30,
            actions,
            regression: ExtraTreesParams::default(),
            retain_iterates: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        validate_actions(&self.actions)?;
        self.regression.validate()
    }
}

pub(crate) fn validate_actions<A: PartialEq>(actions: &[A]) -> Result<()> {
    if actions.is_empty() {
        return Err(Error::invalid("action list is empty"));
    }
    for (i, a) in actions.iter().enumerate() {
        if actions[..i].contains(a) {
            return Err(Error::invalid(format!(
                "action {i} duplicates an earlier action"
            )));
        }
    }
    Ok(())
}

/// A fitted regressor over `(state features, action features)` together
/// with the action list it is minimized over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QFunction<A> {
    forest: ExtraTreesForest,
    actions: Vec<A>,
}

impl<A> QFunction<A> {
    pub fn new(forest: ExtraTreesForest, actions: Vec<A>) -> Self {
        Self { forest, actions }
    }

    pub fn forest(&self) -> &ExtraTreesForest {
        &self.forest
    }

    pub fn actions(&self) -> &[A] {
        &self.actions
    }
}

impl<A: Features> QFunction<A> {
    pub fn value<S: Features>(&self, state: &S, action: &A) -> Result<f64> {
        let mut x = state.features();
        action.append_features(&mut x);
        self.forest.predict(&x)
    }

    /// Q values of every configured action at `state`, in action order.
    pub fn action_values<S: Features>(&self, state: &S) -> Result<Vec<f64>> {
        let mut x = state.features();
        let base = x.len();
        self.actions
            .iter()
            .map(|a| {
                x.truncate(base);
                a.append_features(&mut x);
                self.forest.predict(&x)
            })
            .collect()
    }
}

/// Index of the first minimum; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// `argmin_u Q(state, u)` over the Q function's action list.
pub fn greedy_action<S: Features, A: Features + Clone>(q: &QFunction<A>, state: &S) -> Result<A> {
    let values = q.action_values(state)?;
    Ok(q.actions[argmin(&values)].clone())
}

/// Greedy feedback policy. With zero iterations there is no fitted
/// regressor and the policy minimizes the stage cost directly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Policy<A, C> {
    Greedy(QFunction<A>),
    StageCost { cost: C, actions: Vec<A> },
}

impl<A: Features + Clone, C> Policy<A, C> {
    pub fn act<S: Features>(&self, state: &S) -> Result<A>
    where
        C: CostFunction<S, A>,
    {
        match self {
            Policy::Greedy(q) => greedy_action(q, state),
            Policy::StageCost { cost, actions } => {
                let values: Vec<f64> = actions.iter().map(|a| cost.cost(state, a)).collect();
                Ok(actions[argmin(&values)].clone())
            }
        }
    }

    pub fn actions(&self) -> &[A] {
        match self {
            Policy::Greedy(q) => q.actions(),
            Policy::StageCost { actions, .. } => actions,
        }
    }
}

/// Feature rows shared by every backup over one transition set.
pub(crate) struct SampleFeatures {
    /// Row-major `(n_l, u_l)` features.
    pub inputs: Vec<f64>,
    pub input_dim: usize,
    /// Row-major `n_l+` features.
    pub successors: Vec<f64>,
    pub state_dim: usize,
    pub action_features: Vec<Vec<f64>>,
}

impl SampleFeatures {
    pub fn new<S: Features, A: Features>(
        transitions: &[Transition<S, A>],
        actions: &[A],
    ) -> Result<Self> {
        let first = transitions
            .first()
            .ok_or_else(|| Error::invalid("transition set is empty"))?;
        let state_dim = first.state.features().len();
        if state_dim == 0 {
            return Err(Error::invalid("states encode to no features"));
        }
        let action_features: Vec<Vec<f64>> = actions.iter().map(Features::features).collect();
        let action_dim = first.action.features().len();
        if action_features.iter().any(|a| a.len() != action_dim) {
            return Err(Error::invalid(
                "actions encode to different feature lengths",
            ));
        }
        let input_dim = state_dim + action_dim;

        let mut inputs = Vec::with_capacity(transitions.len() * input_dim);
        let mut successors = Vec::with_capacity(transitions.len() * state_dim);
        for (l, t) in transitions.iter().enumerate() {
            t.state.append_features(&mut inputs);
            t.action.append_features(&mut inputs);
            t.successor.append_features(&mut successors);
            if inputs.len() != (l + 1) * input_dim || successors.len() != (l + 1) * state_dim {
                return Err(Error::invalid(format!(
                    "transition {l} has inconsistent dimensions"
                )));
            }
        }
        Ok(Self {
            inputs,
            input_dim,
            successors,
            state_dim,
            action_features,
        })
    }

    /// `min_u Q(n_l+, u)` for every transition.
    pub fn lookahead(&self, q: &ExtraTreesForest) -> Result<Vec<f64>> {
        if q.dim() != self.input_dim {
            return Err(Error::invalid(format!(
                "Q regressor expects {} features, samples have {}",
                q.dim(),
                self.input_dim
            )));
        }
        const BLOCK: usize = 512;
        let actions = self.action_features.len();
        Ok(self
            .successors
            .par_chunks(BLOCK * self.state_dim)
            .flat_map_iter(|block| {
                let mut rows =
                    Vec::with_capacity(block.len() / self.state_dim * actions * self.input_dim);
                for succ in block.chunks_exact(self.state_dim) {
                    for a in &self.action_features {
                        rows.extend_from_slice(succ);
                        rows.extend_from_slice(a);
                    }
                }
                let values = q.predict_rows(&rows);
                values
                    .chunks_exact(actions)
                    .map(|v| v.iter().copied().fold(f64::INFINITY, f64::min))
                    .collect::<Vec<_>>()
            })
            .collect())
    }
}

/// `c(n_l, u_l) + gamma * lookahead_l`, validating every stage cost.
pub(crate) fn combine(stage: Vec<f64>, lookahead: &[f64], gamma: f64) -> Result<Vec<f64>> {
    stage
        .into_iter()
        .zip(lookahead)
        .map(|(c, m)| Ok(checked_cost(c)? + gamma * m))
        .collect()
}

fn stage_costs<S: Sync, A: Sync, C: CostFunction<S, A>>(
    transitions: &[Transition<S, A>],
    cost: &C,
) -> Vec<f64> {
    transitions
        .par_iter()
        .map(|t| cost.cost(&t.state, &t.action))
        .collect()
}

fn cost_lookahead<S: Sync, A: Sync, C: CostFunction<S, A>>(
    transitions: &[Transition<S, A>],
    cost: &C,
    actions: &[A],
) -> Result<Vec<f64>> {
    transitions
        .par_iter()
        .map(|t| {
            actions
                .iter()
                .map(|a| checked_cost(cost.cost(&t.successor, a)))
                .try_fold(f64::INFINITY, |m, c| Ok(m.min(c?)))
        })
        .collect()
}

fn backup_values<S, A, C>(
    transitions: &[Transition<S, A>],
    samples: &SampleFeatures,
    prev: Option<&QFunction<A>>,
    cost: &C,
    gamma: f64,
    actions: &[A],
) -> Result<Vec<f64>>
where
    S: Sync,
    A: Sync,
    C: CostFunction<S, A>,
{
    let lookahead = match prev {
        Some(q) => samples.lookahead(&q.forest)?,
        None => cost_lookahead(transitions, cost, actions)?,
    };
    combine(stage_costs(transitions, cost), &lookahead, gamma)
}

/// Bellman backup targets over `transitions`.
///
/// With `prev = None` the lookahead uses `Q_0 = c` directly.
pub fn backup_targets<S, A, C>(
    transitions: &[Transition<S, A>],
    prev: Option<&QFunction<A>>,
    cost: &C,
    gamma: f64,
    actions: &[A],
) -> Result<Dataset>
where
    S: Features + Sync,
    A: Features + Sync,
    C: CostFunction<S, A>,
{
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!(
            "gamma must lie in [0, 1), got {gamma}"
        )));
    }
    if actions.is_empty() {
        return Err(Error::invalid("action list is empty"));
    }
    let samples = SampleFeatures::new(transitions, actions)?;
    let targets = backup_values(transitions, &samples, prev, cost, gamma, actions)?;
    Dataset::from_flat(samples.inputs, samples.input_dim, targets)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub k: usize,
    /// `max_l |Q_k(n_l, u_l) - Q_{k-1}(n_l, u_l)|` over the backup targets.
    pub max_target_change: f64,
    pub mean_target: f64,
    pub wall_time_s: f64,
}

pub fn write_iteration_diagnostics<W: Write>(
    writer: W,
    rows: &[IterationDiagnostics],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "max_target_change", "mean_target", "wall_time_s"])?;
    for d in rows {
        w.write_record([
            d.k.to_string(),
            fmt_real(d.max_target_change),
            fmt_real(d.mean_target),
            fmt_real(d.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub struct FqiRun<A, C> {
    pub policy: Policy<A, C>,
    /// Fitted `Q_1 .. Q_N`; only the last one unless `retain_iterates`.
    pub iterates: Vec<QFunction<A>>,
    pub diagnostics: Vec<IterationDiagnostics>,
}

/// Runs `config.iteration_cap` rounds of backup and regression.
pub fn run_fqi<S, A, C>(
    transitions: &[Transition<S, A>],
    cost: C,
    config: &FqiConfig<A>,
) -> Result<FqiRun<A, C>>
where
    S: Features + Sync,
    A: Features + Clone + PartialEq + Sync + Send,
    C: CostFunction<S, A>,
{
    config.validate()?;
    let samples = SampleFeatures::new(transitions, &config.actions)?;
    let inputs = TrainingInputs::from_flat(&samples.inputs, samples.input_dim);

    let mut previous_values: Vec<f64> = stage_costs(transitions, &cost)
        .into_iter()
        .map(checked_cost)
        .collect::<Result<_>>()?;
    let mut iterates: Vec<QFunction<A>> = Vec::new();
    let mut diagnostics = Vec::with_capacity(config.iteration_cap);

    for k in 1..=config.iteration_cap {
        let started = Instant::now();
        let targets = backup_values(
            transitions,
            &samples,
            iterates.last(),
            &cost,
            config.gamma,
            &config.actions,
        )?;
        let params = config
            .regression
            .with_seed(regression_seed(config.regression.seed, k, 0));
        let forest = inputs.fit(&targets, &params)?;

        diagnostics.push(IterationDiagnostics {
            k,
            max_target_change: max_abs_diff(&targets, &previous_values),
            mean_target: targets.iter().sum::<f64>() / targets.len() as f64,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        log::debug!("fqi iteration {k}: {:?}", diagnostics.last());
        previous_values = targets;
        if !config.retain_iterates {
            iterates.clear();
        }
        iterates.push(QFunction::new(forest, config.actions.clone()));
    }

    let policy = match iterates.last() {
        Some(q) => Policy::Greedy(q.clone()),
        None => Policy::StageCost {
            cost,
            actions: config.actions.clone(),
        },
    };
    Ok(FqiRun {
        policy,
        iterates,
        diagnostics,
    })
}
