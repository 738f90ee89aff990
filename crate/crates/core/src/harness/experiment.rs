use serde::{Deserialize, Serialize};

use super::cost::RepressilatorTrackingCost;
use super::eval::{evaluate_policy, EvalOptions, EvalReport};
use super::reference::{ReferenceKind, ReferenceSpec};
use crate::dynamics::{
    generate_transitions, ControlInput, RepressilatorParams, SimConfig, Transition,
};
use crate::error::{Error, Result};
use crate::fqi::FqiConfig;
use crate::regression::ExtraTreesParams;
use crate::seed::{derive_seed, stream_rng};
use crate::tracking::{run_tracking_fqi, PeriodicReference, PhaseDiagnostics, TrackingPolicy};

pub type RepressilatorPolicy = TrackingPolicy<ControlInput, RepressilatorTrackingCost>;

/// Experiment size: the full protocol, or a reduced one that runs in
/// minutes on a single core.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// 300 trajectories x 300 samples, 30 iterations, 50 trees.
    Paper,
    /// 60 trajectories x 100 samples, 12 iterations, 10 trees with
    /// at least 5 samples per split.
    Desk,
}

/// Ramp shapes for the two-ramp recipe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RampVariant {
    /// Long stretch at the low level (protein 1 escapes upward).
    LongLow,
    /// Short low stretch.
    ShortLow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub reference: ReferenceSpec,
    pub alpha: u8,
    pub params: RepressilatorParams,
    pub sim: SimConfig,
    pub fqi: FqiConfig<ControlInput>,
    pub horizon: usize,
    pub transient_cutoff: usize,
    pub start_phase: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    fn base(reference: ReferenceSpec, alpha: u8, scale: Scale) -> Self {
        let period = reference.period;
        let mut sim = SimConfig::default();
        let mut fqi = FqiConfig::new(ControlInput::binary_set());
        fqi.retain_iterates = false;
        if scale == Scale::Desk {
            sim.trajectory_count = 60;
            sim.max_trajectory_length = 100;
            fqi.iteration_cap = 12;
            fqi.regression = ExtraTreesParams {
                tree_count: 10,
                min_leaf_size: 5,
                ..ExtraTreesParams::default()
            };
        }
        let transient_cutoff = 2 * period;
        Self {
            reference,
            alpha,
            params: RepressilatorParams::default(),
            sim,
            fqi,
            horizon: transient_cutoff + (4 * period).max(400),
            transient_cutoff,
            start_phase: 0,
            seed: 0,
        }
        .with_seed(0)
    }

    /// Protein 2 tracks `8 + 7 sin(2 pi t / T)`.
    pub fn fig3(period: usize, scale: Scale) -> Self {
        Self::base(ReferenceSpec::sinusoid(period), 0, scale)
    }

    /// Proteins 1 and 2 track period-200 sinusoids, channel 2 shifted by 200/3.
    pub fn fig4(scale: Scale) -> Self {
        Self::base(ReferenceSpec::two_sinusoids(200, 200.0 / 3.0), 1, scale)
    }

    /// Proteins 1 and 2 track period-200 ramps between 2 and 14.
    pub fn fig5(variant: RampVariant, scale: Scale) -> Self {
        let (rise, hold) = match variant {
            RampVariant::LongLow => (0.1, 0.2),
            RampVariant::ShortLow => (0.3, 0.3),
        };
        Self::base(
            ReferenceSpec::two_ramps(200, 2.0, 14.0, rise, hold, 200.0 / 3.0),
            1,
            scale,
        )
    }

    /// Sets the master seed and re-derives the generation and regression seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sim.seed = derive_seed(seed, &[1]);
        self.fqi.regression.seed = derive_seed(seed, &[2]);
        self
    }

    pub fn cost(&self) -> Result<RepressilatorTrackingCost> {
        RepressilatorTrackingCost::with_alpha(self.alpha)
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            horizon: self.horizon,
            transient_cutoff: self.transient_cutoff,
            dt_control: self.sim.dt_control,
            rk4_substeps: self.sim.rk4_substeps,
            gamma: self.fqi.gamma,
            start_phase: self.start_phase,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon <= self.transient_cutoff {
            return Err(Error::invalid(format!(
                "horizon {} must exceed the transient cutoff {}",
                self.horizon, self.transient_cutoff
            )));
        }
        if self.alpha == 1 && self.reference.kind == ReferenceKind::Sinusoid {
            return Err(Error::invalid(
                "alpha = 1 needs a two-channel reference (two-sinusoids or two-ramps)",
            ));
        }
        if self.start_phase >= self.reference.period {
            return Err(Error::invalid("start_phase must be below the period"));
        }
        self.cost()?;
        self.params.validate()?;
        self.sim.validate(&self.params)?;
        self.fqi.validate()
    }
}

/// A trained policy together with the configuration that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicyBundle {
    pub config: ExperimentConfig,
    pub policy: RepressilatorPolicy,
}

impl PolicyBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rolls the policy out from a seeded random initial state.
    pub fn evaluate(&self) -> Result<EvalReport> {
        let reference = self.config.reference.build()?;
        let mut rng = stream_rng(derive_seed(self.config.seed, &[3]), 0);
        let init = self.config.sim.sample_initial_state(&mut rng);
        evaluate_policy(
            &self.policy,
            &reference,
            &init,
            &self.config.params,
            &self.config.cost()?,
            &self.config.eval_options(),
        )
    }
}

pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub diagnostics: Vec<PhaseDiagnostics>,
    pub reference: PeriodicReference,
    pub transition_count: usize,
}

/// Generates transitions and trains the tracking policy.
pub fn train_experiment(
    config: &ExperimentConfig,
) -> Result<(PolicyBundle, Vec<PhaseDiagnostics>, usize)> {
    config.validate()?;
    let transitions = generate_transitions(&config.sim, &config.params)?;
    let (bundle, diagnostics) = train_on_transitions(config, &transitions)?;
    Ok((bundle, diagnostics, transitions.len()))
}

/// Trains the tracking policy on an existing transition set.
pub fn train_on_transitions(
    config: &ExperimentConfig,
    transitions: &[Transition],
) -> Result<(PolicyBundle, Vec<PhaseDiagnostics>)> {
    config.validate()?;
    let reference = config.reference.build()?;
    log::info!(
        "training on {} transitions, period {}, {} iterations",
        transitions.len(),
        reference.period(),
        config.fqi.iteration_cap
    );
    let run = run_tracking_fqi(transitions, &reference, config.cost()?, &config.fqi)?;
    Ok((
        PolicyBundle {
            config: config.clone(),
            policy: run.policy,
        },
        run.diagnostics,
    ))
}

pub fn run_experiment_detailed(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let (bundle, diagnostics, transition_count) = train_experiment(config)?;
    let report = bundle.evaluate()?;
    Ok(ExperimentOutcome {
        report,
        diagnostics,
        reference: config.reference.build()?,
        transition_count,
    })
}

/// Generate, train, and evaluate in closed loop. Deterministic in the
/// master seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport> {
    Ok(run_experiment_detailed(config)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(mut cfg: ExperimentConfig) -> ExperimentConfig {
        cfg.sim.trajectory_count = 4;
        cfg.sim.max_trajectory_length = 20;
        cfg.fqi.iteration_cap = 2;
        cfg.fqi.regression.tree_count = 3;
        cfg.horizon = cfg.transient_cutoff + 30;
        cfg
    }

    #[test]
    fn recipes_validate() {
        for period in [50, 150, 250] {
            ExperimentConfig::fig3(period, Scale::Paper)
                .validate()
                .unwrap();
        }
        ExperimentConfig::fig4(Scale::Desk).validate().unwrap();
        ExperimentConfig::fig5(RampVariant::LongLow, Scale::Desk)
            .validate()
            .unwrap();
        ExperimentConfig::fig5(RampVariant::ShortLow, Scale::Paper)
            .validate()
            .unwrap();
        let cfg = ExperimentConfig::fig3(150, Scale::Paper);
        assert_eq!(cfg.fqi.gamma, 0.75);
        assert_eq!(cfg.fqi.iteration_cap, 30);
        assert_eq!(
            (cfg.sim.trajectory_count, cfg.sim.max_trajectory_length),
            (300, 300)
        );
        assert_eq!(cfg.transient_cutoff, 300);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ExperimentConfig::fig3(50, Scale::Desk);
        cfg.horizon = cfg.transient_cutoff;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::fig3(50, Scale::Desk);
        cfg.alpha = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_iteration_smoke_run() {
        let mut cfg = tiny(ExperimentConfig::fig4(Scale::Desk));
        cfg.fqi.iteration_cap = 0;
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.horizon(), cfg.horizon);
        assert!(report.rms(0).is_some() && report.rms(1).is_some());
    }

    #[test]
    fn end_to_end_is_deterministic() {
        let cfg = tiny(ExperimentConfig::fig3(10, Scale::Desk)).with_seed(5);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bundle_round_trip() {
        let cfg = tiny(ExperimentConfig::fig3(10, Scale::Desk));
        let (bundle, diagnostics, n) = train_experiment(&cfg).unwrap();
        assert_eq!(n, 4 * 19);
        assert_eq!(diagnostics.len(), 2 * 10);
        let back = PolicyBundle::from_json(&bundle.to_json().unwrap()).unwrap();
        assert_eq!(back.evaluate().unwrap(), bundle.evaluate().unwrap());
    }
}
