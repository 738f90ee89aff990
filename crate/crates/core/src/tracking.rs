//! Periodic reference tracking with Fitted Q Iteration.
//!
//! The reference cycles through `v_0 .. v_{T-1}` and then repeats, so the
//! pair (state, reference) is a Markov state whose reference part evolves
//! by the known successor map `g(v_i) = v_{(i+1) mod T}`. Instead of
//! regressing over that extended state, one Q regressor is kept per phase:
//!
//! ```text
//! Q^i_k(n_l, u_l) = c(d(n_l, v_i), n_l, u_l) + gamma * min_u Q^{g(i)}_{k-1}(n_l+, u)
//! ```
//!
//! Phases are 0-based throughout.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::io::fmt_real;
use crate::error::{Error, Result};
use crate::features::Features;
use crate::fqi::{
    argmin, checked_cost, combine, greedy_action, max_abs_diff, FqiConfig, QFunction,
    SampleFeatures, Transition,
};
use crate::regression::{Dataset, TrainingInputs};
use crate::seed::regression_seed;

/// A finite reference cycle of equal-dimension vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicReference {
    values: Vec<Vec<f64>>,
}

impl PeriodicReference {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let dim = values
            .first()
            .ok_or_else(|| Error::invalid("reference needs at least one value"))?
            .len();
        if dim == 0 {
            return Err(Error::invalid("reference vectors must be nonempty"));
        }
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::invalid("reference vectors differ in dimension"));
        }
        if values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("reference contains non-finite values"));
        }
        Ok(Self { values })
    }

    /// Single-valued reference with `g(v) = v`.
    pub fn constant(value: Vec<f64>) -> Result<Self> {
        Self::new(vec![value])
    }

    /// Stacks equal-period scalar references into one vector reference.
    pub fn stack(channels: &[PeriodicReference]) -> Result<Self> {
        let period = channels
            .first()
            .ok_or_else(|| Error::invalid("nothing to stack"))?
            .period();
        if channels.iter().any(|c| c.period() != period) {
            return Err(Error::invalid("stacked references must share one period"));
        }
        Self::new(
            (0..period)
                .map(|i| {
                    channels
                        .iter()
                        .flat_map(|c| c.value(i).iter().copied())
                        .collect()
                })
                .collect(),
        )
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, phase: usize) -> &[f64] {
        &self.values[phase]
    }

    /// Phase index of `g(v_phase)`.
    pub fn successor(&self, phase: usize) -> usize {
        (phase + 1) % self.period()
    }

    /// Phase active `t` control intervals after starting at `start_phase`.
    pub fn phase_at(&self, t: usize, start_phase: usize) -> usize {
        (start_phase + t) % self.period()
    }

    fn check_phase(&self, phase: usize) -> Result<()> {
        if phase >= self.period() {
            return Err(Error::invalid(format!(
                "phase {phase} out of range for period {}",
                self.period()
            )));
        }
        Ok(())
    }
}

/// One row of the augmented set: `(n_l, v_i, u_l, n_l+, g(v_i))`.
#[derive(Clone, Copy, Debug)]
pub struct AugmentedRow<'a, S, A> {
    pub transition: &'a Transition<S, A>,
    pub phase: usize,
    pub reference: &'a [f64],
    pub successor_phase: usize,
    pub successor_reference: &'a [f64],
}

/// The product of a transition set with every reference phase, without
/// materializing it.
pub struct AugmentedSet<'a, S, A> {
    transitions: &'a [Transition<S, A>],
    reference: &'a PeriodicReference,
}

impl<'a, S, A> AugmentedSet<'a, S, A> {
    pub fn len(&self) -> usize {
        self.transitions.len() * self.reference.period()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows grouped by phase, transitions in logged order within a phase.
    pub fn iter(&self) -> impl Iterator<Item = AugmentedRow<'a, S, A>> + '_ {
        let reference = self.reference;
        (0..reference.period()).flat_map(move |phase| {
            let next = reference.successor(phase);
            self.transitions.iter().map(move |transition| AugmentedRow {
                transition,
                phase,
                reference: reference.value(phase),
                successor_phase: next,
                successor_reference: reference.value(next),
            })
        })
    }
}

pub fn augment<'a, S, A>(
    transitions: &'a [Transition<S, A>],
    reference: &'a PeriodicReference,
) -> AugmentedSet<'a, S, A> {
    AugmentedSet {
        transitions,
        reference,
    }
}

/// Tracking cost `c(d(n, r), n, u)`.
///
/// `distance` must vanish when the tracked components of `n` equal `r`, and
/// `stage_cost` must be nondecreasing in its distance argument.
pub trait TrackingCost<S, A>: Sync {
    fn distance(&self, state: &S, reference: &[f64]) -> f64;

    fn stage_cost(&self, distance: f64, state: &S, action: &A) -> f64;

    fn cost(&self, state: &S, reference: &[f64], action: &A) -> f64 {
        self.stage_cost(self.distance(state, reference), state, action)
    }
}

/// One Q regressor per reference phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseQEnsemble<A> {
    per_phase: Vec<QFunction<A>>,
}

impl<A> PhaseQEnsemble<A> {
    pub fn new(per_phase: Vec<QFunction<A>>) -> Result<Self> {
        if per_phase.is_empty() {
            return Err(Error::invalid("ensemble needs at least one phase"));
        }
        Ok(Self { per_phase })
    }

    pub fn period(&self) -> usize {
        self.per_phase.len()
    }

    pub fn phase(&self, phase: usize) -> &QFunction<A> {
        &self.per_phase[phase]
    }
}

/// Greedy policy on the extended state `(n, phase)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum TrackingPolicy<A, C> {
    Greedy(PhaseQEnsemble<A>),
    /// Zero-iteration policy minimizing the phase-wise stage cost.
    StageCost {
        cost: C,
        reference: PeriodicReference,
        actions: Vec<A>,
    },
}

impl<A: Features + Clone, C> TrackingPolicy<A, C> {
    pub fn period(&self) -> usize {
        match self {
            TrackingPolicy::Greedy(e) => e.period(),
            TrackingPolicy::StageCost { reference, .. } => reference.period(),
        }
    }

    pub fn ensemble(&self) -> Option<&PhaseQEnsemble<A>> {
        match self {
            TrackingPolicy::Greedy(e) => Some(e),
            TrackingPolicy::StageCost { .. } => None,
        }
    }

    /// `argmin_u Q^phase(state, u)`, ties to the lowest action index.
    pub fn act<S: Features>(&self, state: &S, phase: usize) -> Result<A>
    where
        C: TrackingCost<S, A>,
    {
        if phase >= self.period() {
            return Err(Error::invalid(format!(
                "phase {phase} out of range for period {}",
                self.period()
            )));
        }
        match self {
            TrackingPolicy::Greedy(e) => greedy_action(e.phase(phase), state),
            TrackingPolicy::StageCost {
                cost,
                reference,
                actions,
            } => {
                let r = reference.value(phase);
                let values: Vec<f64> = actions.iter().map(|a| cost.cost(state, r, a)).collect();
                Ok(actions[argmin(&values)].clone())
            }
        }
    }
}

fn phase_stage_costs<S: Sync, A: Sync, C: TrackingCost<S, A>>(
    transitions: &[Transition<S, A>],
    cost: &C,
    reference: &[f64],
) -> Vec<f64> {
    transitions
        .par_iter()
        .map(|t| cost.cost(&t.state, reference, &t.action))
        .collect()
}

fn phase_cost_lookahead<S: Sync, A: Sync, C: TrackingCost<S, A>>(
    transitions: &[Transition<S, A>],
    cost: &C,
    reference: &[f64],
    actions: &[A],
) -> Result<Vec<f64>> {
    transitions
        .par_iter()
        .map(|t| {
            actions
                .iter()
                .map(|a| checked_cost(cost.cost(&t.successor, reference, a)))
                .try_fold(f64::INFINITY, |m, c| Ok(m.min(c?)))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn phase_backup_values<S, A, C>(
    transitions: &[Transition<S, A>],
    samples: &SampleFeatures,
    reference: &PeriodicReference,
    prev: Option<&PhaseQEnsemble<A>>,
    cost: &C,
    gamma: f64,
    actions: &[A],
    phase: usize,
) -> Result<Vec<f64>>
where
    S: Sync,
    A: Sync,
    C: TrackingCost<S, A>,
{
    let next = reference.successor(phase);
    let lookahead = match prev {
        Some(e) => samples.lookahead(e.phase(next).forest())?,
        None => phase_cost_lookahead(transitions, cost, reference.value(next), actions)?,
    };
    combine(
        phase_stage_costs(transitions, cost, reference.value(phase)),
        &lookahead,
        gamma,
    )
}

/// Backup targets for the regressor of `phase`.
///
/// Inputs are `(n_l, u_l)` only: the phase is encoded by which regressor
/// the dataset trains. With `prev = None` the lookahead is the stage cost.
#[allow(clippy::too_many_arguments)]
pub fn phase_backup_targets<S, A, C>(
    transitions: &[Transition<S, A>],
    reference: &PeriodicReference,
    prev: Option<&PhaseQEnsemble<A>>,
    cost: &C,
    gamma: f64,
    actions: &[A],
    phase: usize,
) -> Result<Dataset>
where
    S: Features + Sync,
    A: Features + Sync,
    C: TrackingCost<S, A>,
{
    reference.check_phase(phase)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!(
            "gamma must lie in [0, 1), got {gamma}"
        )));
    }
    if actions.is_empty() {
        return Err(Error::invalid("action list is empty"));
    }
    if let Some(e) = prev {
        if e.period() != reference.period() {
            return Err(Error::invalid(
                "ensemble period differs from the reference period",
            ));
        }
    }
    let samples = SampleFeatures::new(transitions, actions)?;
    let targets = phase_backup_values(
        transitions,
        &samples,
        reference,
        prev,
        cost,
        gamma,
        actions,
        phase,
    )?;
    Dataset::from_flat(samples.inputs, samples.input_dim, targets)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnostics {
    pub k: usize,
    pub phase: usize,
    pub max_target_change: f64,
    pub fit_time_s: f64,
}

pub fn write_phase_diagnostics<W: Write>(writer: W, rows: &[PhaseDiagnostics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "phase", "max_target_change", "fit_time_s"])?;
    for d in rows {
        w.write_record([
            d.k.to_string(),
            d.phase.to_string(),
            fmt_real(d.max_target_change),
            fmt_real(d.fit_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct TrackingRun<A, C> {
    pub policy: TrackingPolicy<A, C>,
    /// Fitted ensembles for `k = 1 .. N`; only the last unless
    /// `retain_iterates`.
    pub iterates: Vec<PhaseQEnsemble<A>>,
    pub diagnostics: Vec<PhaseDiagnostics>,
}

/// Runs `config.iteration_cap` rounds; each round computes the targets of
/// every phase from the previous ensemble and fits `T` fresh regressors.
pub fn run_tracking_fqi<S, A, C>(
    transitions: &[Transition<S, A>],
    reference: &PeriodicReference,
    cost: C,
    config: &FqiConfig<A>,
) -> Result<TrackingRun<A, C>>
where
    S: Features + Sync,
    A: Features + Clone + PartialEq + Send + Sync,
    C: TrackingCost<S, A>,
{
    config.validate()?;
    let samples = SampleFeatures::new(transitions, &config.actions)?;
    let inputs = TrainingInputs::from_flat(&samples.inputs, samples.input_dim);
    let period = reference.period();

    let mut previous_values: Vec<Vec<f64>> = (0..period)
        .map(|i| {
            phase_stage_costs(transitions, &cost, reference.value(i))
                .into_iter()
                .map(checked_cost)
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut iterates: Vec<PhaseQEnsemble<A>> = Vec::new();
    let mut diagnostics = Vec::with_capacity(config.iteration_cap * period);

    for k in 1..=config.iteration_cap {
        let prev = iterates.last();
        let mut per_phase = Vec::with_capacity(period);
        for (phase, previous) in previous_values.iter_mut().enumerate() {
            let started = Instant::now();
            let targets = phase_backup_values(
                transitions,
                &samples,
                reference,
                prev,
                &cost,
                config.gamma,
                &config.actions,
                phase,
            )?;
            let params =
                config
                    .regression
                    .with_seed(regression_seed(config.regression.seed, k, phase));
            let forest = inputs.fit(&targets, &params)?;
            diagnostics.push(PhaseDiagnostics {
                k,
                phase,
                max_target_change: max_abs_diff(&targets, previous),
                fit_time_s: started.elapsed().as_secs_f64(),
            });
            *previous = targets;
            per_phase.push(QFunction::new(forest, config.actions.clone()));
        }
        let tail = &diagnostics[diagnostics.len() - period..];
        log::info!(
            "iteration {k}/{}: max target change {:.4e}, {:.1} s",
            config.iteration_cap,
            tail.iter().map(|d| d.max_target_change).fold(0.0, f64::max),
            tail.iter().map(|d| d.fit_time_s).sum::<f64>()
        );
        if !config.retain_iterates {
            iterates.clear();
        }
        iterates.push(PhaseQEnsemble::new(per_phase)?);
    }

    let policy = match iterates.last() {
        Some(e) => TrackingPolicy::Greedy(e.clone()),
        None => TrackingPolicy::StageCost {
            cost,
            reference: reference.clone(),
            actions: config.actions.clone(),
        },
    };
    Ok(TrackingRun {
        policy,
        iterates,
        diagnostics,
    })
}
