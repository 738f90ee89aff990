use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::io::fmt_real;
use crate::dynamics::{step, ControlInput, RepressilatorParams, SystemState};
use crate::error::{Error, Result};
use crate::tracking::{PeriodicReference, TrackingCost, TrackingPolicy};

/// Feedback law on `(state, phase)`.
pub trait Controller {
    fn control(&self, state: &SystemState, phase: usize) -> Result<ControlInput>;
}

impl<C> Controller for TrackingPolicy<ControlInput, C>
where
    C: TrackingCost<SystemState, ControlInput>,
{
    fn control(&self, state: &SystemState, phase: usize) -> Result<ControlInput> {
        self.act(state, phase)
    }
}

/// Wraps a closure as a [`Controller`].
pub struct FnController<F>(pub F);

impl<F> Controller for FnController<F>
where
    F: Fn(&SystemState, usize) -> ControlInput,
{
    fn control(&self, state: &SystemState, phase: usize) -> Result<ControlInput> {
        Ok((self.0)(state, phase))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Number of recorded samples.
    pub horizon: usize,
    /// Leading samples excluded from the RMS errors.
    pub transient_cutoff: usize,
    pub dt_control: f64,
    pub rk4_substeps: usize,
    /// Discount used for the reported total cost.
    pub gamma: f64,
    pub start_phase: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            horizon: 1000,
            transient_cutoff: 0,
            dt_control: 1.0,
            rk4_substeps: 10,
            gamma: 0.75,
            start_phase: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProteinError {
    /// 0-based gene index of the tracked protein.
    pub gene: usize,
    pub rms: f64,
}

/// Closed-loop rollout record. Entry `t` of every series describes sample
/// `t`: the state, the phase and reference in force, and the applied input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub states: Vec<SystemState>,
    pub actions: Vec<ControlInput>,
    pub phases: Vec<usize>,
    pub references: Vec<Vec<f64>>,
    pub rms_error: Vec<ProteinError>,
    pub total_discounted_cost: f64,
    pub pulse_counts: [usize; 2],
    pub transient_cutoff: usize,
}

impl EvalReport {
    pub fn rms(&self, gene: usize) -> Option<f64> {
        self.rms_error
            .iter()
            .find(|e| e.gene == gene)
            .map(|e| e.rms)
    }

    pub fn horizon(&self) -> usize {
        self.states.len()
    }
}

/// Root-mean-square of `series - reference` over samples `t >= cutoff`.
pub fn rms_error(series: &[f64], reference: &[f64], cutoff: usize) -> Result<f64> {
    if series.len() != reference.len() {
        return Err(Error::invalid("series and reference differ in length"));
    }
    if cutoff >= series.len() {
        return Err(Error::invalid(format!(
            "transient cutoff {cutoff} leaves no samples out of {}",
            series.len()
        )));
    }
    let tail = series[cutoff..].iter().zip(&reference[cutoff..]);
    let n = (series.len() - cutoff) as f64;
    Ok((tail.map(|(x, r)| (x - r).powi(2)).sum::<f64>() / n).sqrt())
}

/// Gene indices tracked by a reference of the given dimension.
fn tracked_genes(reference_dim: usize) -> Result<&'static [usize]> {
    match reference_dim {
        1 => Ok(&[1]),
        2 => Ok(&[0, 1]),
        d => Err(Error::invalid(format!(
            "repressilator references have 1 or 2 channels, got {d}"
        ))),
    }
}

/// Rolls out `controller` in closed loop, with the phase advancing by one
/// per control interval.
pub fn evaluate_policy<K, C>(
    controller: &K,
    reference: &PeriodicReference,
    init: &SystemState,
    params: &RepressilatorParams,
    cost: &C,
    options: &EvalOptions,
) -> Result<EvalReport>
where
    K: Controller + ?Sized,
    C: TrackingCost<SystemState, ControlInput>,
{
    if options.horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let genes = tracked_genes(reference.dim())?;
    init.validate()?;

    let mut states = Vec::with_capacity(options.horizon);
    let mut actions = Vec::with_capacity(options.horizon);
    let mut phases = Vec::with_capacity(options.horizon);
    let mut references = Vec::with_capacity(options.horizon);
    let mut total = 0.0;
    let mut discount = 1.0;
    let mut state = init.clone();

    for t in 0..options.horizon {
        let phase = reference.phase_at(t, options.start_phase);
        let r = reference.value(phase);
        let u = controller.control(&state, phase)?;
        total += discount * cost.cost(&state, r, &u);
        discount *= options.gamma;

        let next = step(&state, u, params, options.dt_control, options.rk4_substeps)?;
        states.push(std::mem::replace(&mut state, next));
        actions.push(u);
        phases.push(phase);
        references.push(r.to_vec());
    }

    let rms = genes
        .iter()
        .enumerate()
        .map(|(channel, &gene)| {
            let p: Vec<f64> = states.iter().map(|s| s.p[gene]).collect();
            let r: Vec<f64> = references.iter().map(|r| r[channel]).collect();
            Ok(ProteinError {
                gene,
                rms: rms_error(&p, &r, options.transient_cutoff)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pulse_counts = [
        actions.iter().filter(|u| u.u1).count(),
        actions.iter().filter(|u| u.u2).count(),
    ];

    Ok(EvalReport {
        states,
        actions,
        phases,
        references,
        rms_error: rms,
        total_discounted_cost: total,
        pulse_counts,
        transient_cutoff: options.transient_cutoff,
    })
}

/// `t, m1..mN, p1..pN, u1, u2, r1, r2`. For single-channel references the
/// `r1` column is `NaN`.
pub fn write_trajectory<W: Write>(writer: W, report: &EvalReport) -> Result<()> {
    let n = report.states.first().map_or(0, SystemState::gene_count);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("m{i}")));
    header.extend((1..=n).map(|i| format!("p{i}")));
    header.extend(["u1", "u2", "r1", "r2"].map(String::from));
    w.write_record(&header)?;
    for t in 0..report.horizon() {
        let mut row = vec![t.to_string()];
        row.extend(report.states[t].to_flat().into_iter().map(fmt_real));
        row.push(u8::from(report.actions[t].u1).to_string());
        row.push(u8::from(report.actions[t].u2).to_string());
        let (r1, r2) = match report.references[t].as_slice() {
            [r2] => (f64::NAN, *r2),
            [r1, r2] => (*r1, *r2),
            _ => (f64::NAN, f64::NAN),
        };
        row.push(fmt_real(r1));
        row.push(fmt_real(r2));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `metric, value` rows.
pub fn write_metrics<W: Write>(
    writer: W,
    report: &EvalReport,
    extra: &[(&str, f64)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["metric", "value"])?;
    for e in &report.rms_error {
        w.write_record([format!("rms_error_p{}", e.gene + 1), fmt_real(e.rms)])?;
    }
    w.write_record([
        "total_discounted_cost".into(),
        fmt_real(report.total_discounted_cost),
    ])?;
    w.write_record(["pulses_u1".into(), report.pulse_counts[0].to_string()])?;
    w.write_record(["pulses_u2".into(), report.pulse_counts[1].to_string()])?;
    w.write_record(["horizon".into(), report.horizon().to_string()])?;
    w.write_record([
        "transient_cutoff".into(),
        report.transient_cutoff.to_string(),
    ])?;
    for (name, value) in extra {
        w.write_record([name.to_string(), fmt_real(*value)])?;
    }
    w.flush()?;
    Ok(())
}
