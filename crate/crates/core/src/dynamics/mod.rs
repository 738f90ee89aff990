//! Light-controlled generalised repressilator.
//!
//! A ring of `N` genes where the protein of gene `i-1` represses
//! transcription of gene `i` (cyclically, gene 1 is repressed by gene `N`).
//! Light inputs `u1` and `u2` induce transcription of genes 1 and 2:
//!
//! ```text
//! dm_i/dt = c1 / (1 + p_{i-1}^2) - c2 m_i + [i = 1] b1 u1 + [i = 2] b2 u2
//! dp_i/dt = c3 m_i - c4 p_i
//! ```

mod integrator;
pub mod io;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Features;
use crate::seed::stream_rng;

pub use integrator::rk4;

/// One logged step of the repressilator.
pub type Transition = crate::fqi::Transition<SystemState, ControlInput>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepressilatorParams {
    pub gene_count: usize,
    /// Maximal transcription rate.
    pub c1: f64,
    /// mRNA degradation rate.
    pub c2: f64,
    /// Translation rate.
    pub c3: f64,
    /// Protein degradation rate.
    pub c4: f64,
    /// Light-induced transcription gain on gene 1.
    pub b1: f64,
    /// Light-induced transcription gain on gene 2.
    pub b2: f64,
}

impl Default for RepressilatorParams {
    fn default() -> Self {
        Self {
            gene_count: 6,
            c1: 1.6,
            c2: 0.16,
            c3: 0.16,
            c4: 0.06,
            b1: 5.0,
            b2: 5.0,
        }
    }
}

impl RepressilatorParams {
    pub fn validate(&self) -> Result<()> {
        if self.gene_count < 3 {
            return Err(Error::invalid(format!(
                "a repressilator ring needs at least 3 genes, got {}",
                self.gene_count
            )));
        }
        let rates = [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("b1", self.b1),
            ("b2", self.b2),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Dimension of the flattened state `(m, p)`.
    pub fn state_dim(&self) -> usize {
        2 * self.gene_count
    }
}

/// mRNA and protein concentrations of every gene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub m: Vec<f64>,
    pub p: Vec<f64>,
}

impl SystemState {
    pub fn new(m: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let s = Self { m, p };
        s.validate()?;
        Ok(s)
    }

    pub fn zeros(gene_count: usize) -> Self {
        Self {
            m: vec![0.0; gene_count],
            p: vec![0.0; gene_count],
        }
    }

    /// Splits a flat `(m_1..m_N, p_1..p_N)` vector.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "odd flat state length {}",
                flat.len()
            )));
        }
        let n = flat.len() / 2;
        Self::new(flat[..n].to_vec(), flat[n..].to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m.len() * 2);
        out.extend_from_slice(&self.m);
        out.extend_from_slice(&self.p);
        out
    }

    pub fn gene_count(&self) -> usize {
        self.m.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m.len() != self.p.len() {
            return Err(Error::invalid(format!(
                "mRNA and protein vectors differ in length ({} vs {})",
                self.m.len(),
                self.p.len()
            )));
        }
        if let Some(v) = self
            .m
            .iter()
            .chain(&self.p)
            .find(|v| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::invalid(format!(
                "concentration {v} is negative or non-finite"
            )));
        }
        Ok(())
    }

    /// Relabels gene `i` as gene `i + shift` (mod N).
    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.gene_count();
        let rot = |v: &[f64]| (0..n).map(|i| v[(i + n - shift % n) % n]).collect();
        Self {
            m: rot(&self.m),
            p: rot(&self.p),
        }
    }

    pub fn species(&self, species: Species) -> f64 {
        match species {
            Species::Mrna(i) => self.m[i],
            Species::Protein(i) => self.p[i],
        }
    }
}

impl Features for SystemState {
    fn append_features(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.m);
        out.extend_from_slice(&self.p);
    }
}

/// Selects one concentration series; gene indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Species {
    Mrna(usize),
    Protein(usize),
}

/// Time derivative of a [`SystemState`]. Entries may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDerivative {
    pub dm: Vec<f64>,
    pub dp: Vec<f64>,
}

/// Light on/off for the two optogenetic channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ControlInput {
    pub u1: bool,
    pub u2: bool,
}

impl ControlInput {
    pub const DARK: ControlInput = ControlInput {
        u1: false,
        u2: false,
    };

    pub fn new(u1: bool, u2: bool) -> Self {
        Self { u1, u2 }
    }

    /// `{0,1} x {0,1}` in the order (0,0), (1,0), (0,1), (1,1).
    pub fn binary_set() -> Vec<ControlInput> {
        vec![
            Self::new(false, false),
            Self::new(true, false),
            Self::new(false, true),
            Self::new(true, true),
        ]
    }

    pub fn intensities(&self) -> [f64; 2] {
        [f64::from(u8::from(self.u1)), f64::from(u8::from(self.u2))]
    }

    /// Parses a channel value, which must be exactly 0 or 1.
    pub fn channel_from_f64(v: f64) -> Result<bool> {
        if v == 0.0 {
            Ok(false)
        } else if v == 1.0 {
            Ok(true)
        } else {
            Err(Error::invalid(format!(
                "light intensity must be 0 or 1, got {v}"
            )))
        }
    }
}

impl Features for ControlInput {
    fn append_features(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.intensities());
    }
}

/// Writes `d(m, p)/dt` for a flat state into `out`.
fn rhs_flat(y: &[f64], u: [f64; 2], params: &RepressilatorParams, out: &mut [f64]) {
    let n = params.gene_count;
    let (m, p) = y.split_at(n);
    let (dm, dp) = out.split_at_mut(n);
    for i in 0..n {
        let repressor = p[(i + n - 1) % n];
        let mut v = params.c1 / (1.0 + repressor * repressor) - params.c2 * m[i];
        if i == 0 {
            v += params.b1 * u[0];
        }
        if i == 1 {
            v += params.b2 * u[1];
        }
        dm[i] = v;
        dp[i] = params.c3 * m[i] - params.c4 * p[i];
    }
}

fn check_dims(state: &SystemState, params: &RepressilatorParams) -> Result<()> {
    if state.m.len() != params.gene_count || state.p.len() != params.gene_count {
        return Err(Error::invalid(format!(
            "state has {} mRNA / {} protein entries but the model has {} genes",
            state.m.len(),
            state.p.len(),
            params.gene_count
        )));
    }
    Ok(())
}

pub fn derivative(
    state: &SystemState,
    u: ControlInput,
    params: &RepressilatorParams,
) -> Result<StateDerivative> {
    check_dims(state, params)?;
    let y = state.to_flat();
    let mut out = vec![0.0; y.len()];
    rhs_flat(&y, u.intensities(), params, &mut out);
    let dp = out.split_off(params.gene_count);
    Ok(StateDerivative { dm: out, dp })
}

/// Integrates one control interval of length `dt` with `u` held constant.
///
/// The result is clamped at zero componentwise.
pub fn step(
    state: &SystemState,
    u: ControlInput,
    params: &RepressilatorParams,
    dt: f64,
    substeps: usize,
) -> Result<SystemState> {
    check_dims(state, params)?;
    let mut y = state.to_flat();
    let inputs = u.intensities();
    rk4(&mut y, dt, substeps, |y, out| {
        rhs_flat(y, inputs, params, out)
    })?;
    for v in &mut y {
        *v = v.max(0.0);
    }
    let p = y.split_off(params.gene_count);
    Ok(SystemState { m: y, p })
}

/// Simulates `inputs.len()` control intervals, returning the visited states
/// including the initial one.
pub fn simulate(
    init: &SystemState,
    inputs: impl IntoIterator<Item = ControlInput>,
    params: &RepressilatorParams,
    dt: f64,
    substeps: usize,
) -> Result<Vec<SystemState>> {
    let mut states = vec![init.clone()];
    for u in inputs {
        let next = step(states.last().unwrap(), u, params, dt, substeps)?;
        states.push(next);
    }
    Ok(states)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt_control: f64,
    pub rk4_substeps: usize,
    pub trajectory_count: usize,
    /// Number of states per trajectory; yields one fewer transition.
    pub max_trajectory_length: usize,
    pub seed: u64,
    /// Lower bounds of the uniform initial-state law, flat `(m, p)` order.
    pub init_low: Vec<f64>,
    pub init_high: Vec<f64>,
    /// Action set sampled uniformly while logging.
    pub actions: Vec<ControlInput>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::for_genes(6)
    }
}

impl SimConfig {
    /// Unit control interval, 300 trajectories of 300 samples, initial
    /// concentrations uniform on [0, 15].
    pub fn for_genes(gene_count: usize) -> Self {
        Self {
            dt_control: 1.0,
            rk4_substeps: 10,
            trajectory_count: 300,
            max_trajectory_length: 300,
            seed: 0,
            init_low: vec![0.0; 2 * gene_count],
            init_high: vec![15.0; 2 * gene_count],
            actions: ControlInput::binary_set(),
        }
    }

    /// Sets uniform initial-state bounds for every species.
    pub fn with_init_range(mut self, low: f64, high: f64) -> Self {
        let dim = self.init_low.len();
        self.init_low = vec![low; dim];
        self.init_high = vec![high; dim];
        self
    }

    pub fn validate(&self, params: &RepressilatorParams) -> Result<()> {
        if !(self.dt_control > 0.0 && self.dt_control.is_finite()) {
            return Err(Error::invalid("dt_control must be finite and > 0"));
        }
        if self.rk4_substeps == 0 || self.trajectory_count == 0 || self.max_trajectory_length == 0 {
            return Err(Error::invalid(
                "rk4_substeps, trajectory_count and max_trajectory_length must be >= 1",
            ));
        }
        let dim = params.state_dim();
        if self.init_low.len() != dim || self.init_high.len() != dim {
            return Err(Error::invalid(format!(
                "initial-state bounds must have {dim} entries"
            )));
        }
        for (lo, hi) in self.init_low.iter().zip(&self.init_high) {
            if !(*lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::invalid(format!(
                    "bad initial-state bounds [{lo}, {hi}]"
                )));
            }
        }
        if self.actions.is_empty() {
            return Err(Error::invalid("action set is empty"));
        }
        Ok(())
    }

    /// Draws one initial state from the configured uniform box.
    pub fn sample_initial_state<R: Rng>(&self, rng: &mut R) -> SystemState {
        let flat: Vec<f64> = self
            .init_low
            .iter()
            .zip(&self.init_high)
            .map(|(&lo, &hi)| if lo < hi { rng.gen_range(lo..hi) } else { lo })
            .collect();
        let n = flat.len() / 2;
        SystemState {
            m: flat[..n].to_vec(),
            p: flat[n..].to_vec(),
        }
    }
}

/// Logs `trajectory_count` random-action trajectories and flattens their
/// one-step transitions.
///
/// Trajectory `j` uses its own RNG stream keyed by `(seed, j)`, so the output
/// does not depend on the number of worker threads. A trajectory stops early
/// only if the integrator reports a numeric failure.
pub fn generate_transitions(
    config: &SimConfig,
    params: &RepressilatorParams,
) -> Result<Vec<Transition>> {
    params.validate()?;
    config.validate(params)?;

    let per_trajectory: Vec<Vec<Transition>> = (0..config.trajectory_count)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(config.seed, j as u64);
            let mut state = config.sample_initial_state(&mut rng);
            let mut out = Vec::with_capacity(config.max_trajectory_length.saturating_sub(1));
            for _ in 1..config.max_trajectory_length {
                let action = *config
                    .actions
                    .choose(&mut rng)
                    .expect("nonempty action set");
                let successor = match step(
                    &state,
                    action,
                    params,
                    config.dt_control,
                    config.rk4_substeps,
                ) {
                    Ok(s) => s,
                    Err(e) => {
                        log::warn!("trajectory {j} truncated after {} steps: {e}", out.len());
                        break;
                    }
                };
                out.push(Transition {
                    state: state.clone(),
                    action,
                    successor: successor.clone(),
                });
                state = successor;
            }
            out
        })
        .collect();

    Ok(per_trajectory.into_iter().flatten().collect())
}

/// Mean peak-to-peak interval of one species, in time units.
///
/// Returns `None` when the series has fewer than three peaks.
pub fn estimate_period(trajectory: &[SystemState], species: Species, dt: f64) -> Option<f64> {
    let series: Vec<f64> = trajectory.iter().map(|s| s.species(species)).collect();
    period_of_series(&series, dt)
}

/// Peaks must rise this fraction of the series range above the higher of
/// their two flanking troughs.
const MIN_PROMINENCE: f64 = 0.1;

pub(crate) fn period_of_series(series: &[f64], dt: f64) -> Option<f64> {
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let threshold = MIN_PROMINENCE * (hi - lo);
    let peaks: Vec<usize> = (1..series.len().saturating_sub(1))
        .filter(|&i| series[i] > series[i - 1] && series[i] >= series[i + 1])
        .filter(|&i| prominence(series, i) >= threshold && threshold > 0.0)
        .collect();
    if peaks.len() < 3 {
        return None;
    }
    let span = (peaks[peaks.len() - 1] - peaks[0]) as f64;
    Some(span / (peaks.len() - 1) as f64 * dt)
}

fn prominence(series: &[f64], peak: usize) -> f64 {
    let x = series[peak];
    let left = series[..peak]
        .iter()
        .rev()
        .take_while(|&&v| v <= x)
        .fold(x, |m, &v| m.min(v));
    let right = series[peak + 1..]
        .iter()
        .take_while(|&&v| v <= x)
        .fold(x, |m, &v| m.min(v));
    x - left.max(right)
}
