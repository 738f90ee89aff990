//! Fixed-step classical Runge–Kutta integration.

use crate::error::{Error, Result};

/// Advances `y` by `dt` using `substeps` equal classical RK4 steps.
///
/// `rhs(y, dydt)` writes the time derivative at `y` into `dydt`. The
/// right-hand side is autonomous over the interval (inputs held constant).
pub fn rk4<F>(y: &mut [f64], dt: f64, substeps: usize, mut rhs: F) -> Result<()>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!(
            "step length must be finite and >= 0, got {dt}"
        )));
    }
    if substeps == 0 {
        return Err(Error::invalid("rk4 needs at least one substep"));
    }
    if dt == 0.0 {
        return Ok(());
    }

    let n = y.len();
    let h = dt / substeps as f64;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    for _ in 0..substeps {
        rhs(y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow(format!(
                "component {i} became non-finite during integration"
            )));
        }
    }
    Ok(())
}
