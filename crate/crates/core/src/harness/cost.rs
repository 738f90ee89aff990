use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlInput, SystemState};
use crate::error::{Error, Result};
use crate::tracking::TrackingCost;

/// `w·α·(p1 - r1)^2 + w·(p2 - r2)^2 + wu·u1 + wu·u2`.
///
/// A one-dimensional reference is read as `r2` alone (protein 2 tracking);
/// a two-dimensional reference is `(r1, r2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepressilatorTrackingCost {
    pub alpha: u8,
    pub weight_track: f64,
    pub weight_u: f64,
}

impl Default for RepressilatorTrackingCost {
    fn default() -> Self {
        Self {
            alpha: 0,
            weight_track: 100.0,
            weight_u: 0.05,
        }
    }
}

impl RepressilatorTrackingCost {
    pub fn with_alpha(alpha: u8) -> Result<Self> {
        let c = Self {
            alpha,
            ..Default::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha > 1 {
            return Err(Error::invalid(format!(
                "alpha must be 0 or 1, got {}",
                self.alpha
            )));
        }
        if !(self.weight_track >= 0.0 && self.weight_u >= 0.0)
            || !self.weight_track.is_finite()
            || !self.weight_u.is_finite()
        {
            return Err(Error::invalid("cost weights must be finite and >= 0"));
        }
        Ok(())
    }
}

impl TrackingCost<SystemState, ControlInput> for RepressilatorTrackingCost {
    fn distance(&self, state: &SystemState, reference: &[f64]) -> f64 {
        let w = self.weight_track;
        match *reference {
            [r2] => w * (state.p[1] - r2).powi(2),
            [r1, r2] => {
                let first = if self.alpha == 1 {
                    w * (state.p[0] - r1).powi(2)
                } else {
                    0.0
                };
                first + w * (state.p[1] - r2).powi(2)
            }
            // Rejected downstream as a non-finite cost.
            _ => f64::NAN,
        }
    }

    fn stage_cost(&self, distance: f64, _state: &SystemState, action: &ControlInput) -> f64 {
        let [u1, u2] = action.intensities();
        distance + self.weight_u * u1 + self.weight_u * u2
    }
}
