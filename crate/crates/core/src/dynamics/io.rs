//! CSV encoding of transition sets.
//!
//! Columns: `m1..mN, p1..pN, u1, u2, m1_next..mN_next, p1_next..pN_next`.

use std::io::{Read, Write};

use super::{ControlInput, SystemState, Transition};
use crate::error::{Error, Result};

/// Scientific notation with 17 significant digits, which round-trips any f64.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn transition_header(gene_count: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(4 * gene_count + 2);
    cols.extend((1..=gene_count).map(|i| format!("m{i}")));
    cols.extend((1..=gene_count).map(|i| format!("p{i}")));
    cols.push("u1".into());
    cols.push("u2".into());
    cols.extend((1..=gene_count).map(|i| format!("m{i}_next")));
    cols.extend((1..=gene_count).map(|i| format!("p{i}_next")));
    cols
}

pub fn write_transitions<W: Write>(writer: W, transitions: &[Transition]) -> Result<()> {
    let gene_count = transitions.first().map_or(0, |t| t.state.gene_count());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(transition_header(gene_count))?;
    for t in transitions {
        if t.state.gene_count() != gene_count || t.successor.gene_count() != gene_count {
            return Err(Error::invalid("transitions mix different gene counts"));
        }
        let mut row: Vec<String> = t.state.to_flat().into_iter().map(fmt_real).collect();
        row.push(u8::from(t.action.u1).to_string());
        row.push(u8::from(t.action.u2).to_string());
        row.extend(t.successor.to_flat().into_iter().map(fmt_real));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_transitions<R: Read>(reader: R) -> Result<Vec<Transition>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.len() < 14 || (header.len() - 2) % 4 != 0 {
        return Err(Error::Format(format!(
            "transition CSV has {} columns, expected 4N + 2",
            header.len()
        )));
    }
    let n = (header.len() - 2) / 4;
    let expected = transition_header(n);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Format("unexpected transition CSV header".into()));
    }

    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let vals: Vec<f64> = record
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("row {}: {e}", line + 1)))?;
        let state = SystemState::from_flat(&vals[..2 * n])?;
        let action = ControlInput::new(
            ControlInput::channel_from_f64(vals[2 * n])?,
            ControlInput::channel_from_f64(vals[2 * n + 1])?,
        );
        let successor = SystemState::from_flat(&vals[2 * n + 2..])?;
        out.push(Transition {
            state,
            action,
            successor,
        });
    }
    Ok(out)
}
