use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracking::PeriodicReference;

/// Rounds a continuous lag to a whole number of phases in `[0, period)`.
fn lag_phases(lag: f64, period: usize) -> usize {
    (lag.round() as i64).rem_euclid(period as i64) as usize
}

/// `v_i = mean + amplitude * sin(2 pi (i + lag) / T)` for `i = 0 .. T-1`.
///
/// The lag is rounded to whole phases, so a lagged channel is an exact
/// cyclic shift of the unlagged one.
pub fn build_sinusoid_reference(
    period: usize,
    amplitude: f64,
    mean: f64,
    lag: f64,
) -> Result<PeriodicReference> {
    if period == 0 {
        return Err(Error::invalid("period must be >= 1"));
    }
    let shift = lag_phases(lag, period);
    PeriodicReference::new(
        (0..period)
            .map(|i| {
                let j = (i + shift) % period;
                vec![mean + amplitude * (2.0 * PI * j as f64 / period as f64).sin()]
            })
            .collect(),
    )
}

/// Periodic ramp: rise from `low` to `high` over `rise_fraction·T`, hold
/// `high` for `high_fraction·T`, fall symmetrically, then hold `low` for the
/// rest of the period. Sampled at the left edge of each phase.
pub fn build_ramp_reference(
    period: usize,
    low: f64,
    high: f64,
    rise_fraction: f64,
    high_fraction: f64,
    lag: f64,
) -> Result<PeriodicReference> {
    if period == 0 {
        return Err(Error::invalid("period must be >= 1"));
    }
    let in_unit = |f: f64| (0.0..=1.0).contains(&f);
    if !in_unit(rise_fraction)
        || !in_unit(high_fraction)
        || 2.0 * rise_fraction + high_fraction > 1.0
    {
        return Err(Error::invalid(format!(
            "infeasible ramp partition: 2 x rise {rise_fraction} + high {high_fraction} exceeds one period"
        )));
    }
    if !(low <= high) {
        return Err(Error::invalid("ramp needs low <= high"));
    }
    let t = period as f64;
    let rise = rise_fraction * t;
    let hold = high_fraction * t;
    let profile = |tau: f64| {
        if tau < rise {
            low + (high - low) * tau / rise
        } else if tau < rise + hold {
            high
        } else if tau < 2.0 * rise + hold {
            high - (high - low) * (tau - rise - hold) / rise
        } else {
            low
        }
    };
    let shift = lag_phases(lag, period);
    PeriodicReference::new(
        (0..period)
            .map(|i| vec![profile(((i + shift) % period) as f64)])
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Protein 2 follows one sinusoid.
    Sinusoid,
    /// Proteins 1 and 2 follow sinusoids, channel 2 shifted by `lag`.
    TwoSinusoids,
    /// Proteins 1 and 2 follow ramps, channel 2 shifted by `lag`.
    TwoRamps,
}

impl ReferenceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReferenceKind::Sinusoid => "sinusoid",
            ReferenceKind::TwoSinusoids => "two-sinusoids",
            ReferenceKind::TwoRamps => "two-ramps",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sinusoid" => Ok(ReferenceKind::Sinusoid),
            "two-sinusoids" => Ok(ReferenceKind::TwoSinusoids),
            "two-ramps" => Ok(ReferenceKind::TwoRamps),
            other => Err(Error::Config(format!("unknown reference kind {other:?}"))),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            ReferenceKind::Sinusoid => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpec {
    pub kind: ReferenceKind,
    pub period: usize,
    pub amplitude: f64,
    pub mean: f64,
    pub lag: f64,
    pub low: f64,
    pub high: f64,
    pub rise_fraction: f64,
    pub high_fraction: f64,
}

impl ReferenceSpec {
    /// Mean 8, amplitude 7.
    pub fn sinusoid(period: usize) -> Self {
        Self {
            kind: ReferenceKind::Sinusoid,
            period,
            amplitude: 7.0,
            mean: 8.0,
            lag: 0.0,
            low: 1.0,
            high: 15.0,
            rise_fraction: 0.25,
            high_fraction: 0.25,
        }
    }

    pub fn two_sinusoids(period: usize, lag: f64) -> Self {
        Self {
            kind: ReferenceKind::TwoSinusoids,
            lag,
            ..Self::sinusoid(period)
        }
    }

    pub fn two_ramps(period: usize, low: f64, high: f64, rise: f64, hold: f64, lag: f64) -> Self {
        Self {
            kind: ReferenceKind::TwoRamps,
            period,
            lag,
            low,
            high,
            rise_fraction: rise,
            high_fraction: hold,
            ..Self::sinusoid(period)
        }
    }

    pub fn build(&self) -> Result<PeriodicReference> {
        let sin = |lag| build_sinusoid_reference(self.period, self.amplitude, self.mean, lag);
        let ramp = |lag| {
            build_ramp_reference(
                self.period,
                self.low,
                self.high,
                self.rise_fraction,
                self.high_fraction,
                lag,
            )
        };
        match self.kind {
            ReferenceKind::Sinusoid => sin(self.lag),
            ReferenceKind::TwoSinusoids => PeriodicReference::stack(&[sin(0.0)?, sin(self.lag)?]),
            ReferenceKind::TwoRamps => PeriodicReference::stack(&[ramp(0.0)?, ramp(self.lag)?]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(r: &PeriodicReference) -> Vec<f64> {
        r.values().iter().map(|v| v[0]).collect()
    }

    #[test]
    fn sinusoid_defaults() {
        let r = build_sinusoid_reference(150, 7.0, 8.0, 0.0).unwrap();
        let v = scalar(&r);
        assert_eq!(v.len(), 150);
        assert_eq!(v[0], 8.0);
        assert!(v.iter().all(|x| (1.0..=15.0).contains(x)));
        // one full cycle: maximum a quarter in, minimum three quarters in
        let argmax = (0..150).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        let argmin = (0..150).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        assert!((argmax as i64 - 37).abs() <= 1 && (argmin as i64 - 112).abs() <= 1);
    }

    #[test]
    fn unit_period_is_mean() {
        assert_eq!(
            scalar(&build_sinusoid_reference(1, 7.0, 8.0, 0.0).unwrap()),
            vec![8.0]
        );
    }

    #[test]
    fn lagged_pair_is_a_shift() {
        let spec = ReferenceSpec::two_sinusoids(200, 200.0 / 3.0);
        let r = spec.build().unwrap();
        for i in 0..200 {
            assert_eq!(r.value(i)[1], r.value((i + 67) % 200)[0]);
        }
    }

    #[test]
    fn ramp_four_phases() {
        let r = build_ramp_reference(4, 0.0, 1.0, 0.25, 0.25, 0.0).unwrap();
        assert_eq!(scalar(&r), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn ramp_constant_high() {
        let r = build_ramp_reference(10, 2.0, 9.0, 0.0, 1.0, 0.0).unwrap();
        assert!(scalar(&r).iter().all(|&v| v == 9.0));
    }

    #[test]
    fn ramp_envelope() {
        let r = build_ramp_reference(200, 1.0, 14.0, 0.2, 0.3, 17.0).unwrap();
        let v = scalar(&r);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (1.0, 14.0));
    }

    #[test]
    fn infeasible_ramp() {
        assert!(build_ramp_reference(10, 0.0, 1.0, 0.4, 0.3, 0.0).is_err());
        assert!(build_ramp_reference(10, 0.0, 1.0, -0.1, 0.3, 0.0).is_err());
        assert!(build_ramp_reference(10, 2.0, 1.0, 0.1, 0.3, 0.0).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [
            ReferenceKind::Sinusoid,
            ReferenceKind::TwoSinusoids,
            ReferenceKind::TwoRamps,
        ] {
            assert_eq!(ReferenceKind::parse(k.as_str()).unwrap(), k);
        }
        assert!(ReferenceKind::parse("square").is_err());
    }
}
