//! Repressilator experiments: tracking cost, reference builders,
//! closed-loop evaluation and the end-to-end recipes behind the CLI.

mod config;
mod cost;
mod eval;
mod experiment;
mod reference;

pub use config::{parse_config, to_config_text};
pub use cost::RepressilatorTrackingCost;
pub use eval::{
    evaluate_policy, rms_error, write_metrics, write_trajectory, Controller, EvalOptions,
    EvalReport, FnController, ProteinError,
};
pub use experiment::{
    run_experiment, run_experiment_detailed, train_experiment, train_on_transitions,
    ExperimentConfig, ExperimentOutcome, PolicyBundle, RampVariant, RepressilatorPolicy, Scale,
};
pub use reference::{build_ramp_reference, build_sinusoid_reference, ReferenceKind, ReferenceSpec};
