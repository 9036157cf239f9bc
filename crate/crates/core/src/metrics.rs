//! Goodness-of-fit metrics for observed vs estimated series.

use serde::Serialize;

use crate::error::{check_len, Error, Result};

/// Both coefficient-of-determination variants for one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RSquared {
    /// Squared Pearson correlation; always in `[0, 1]`.
    pub pearson: f64,
    /// `1 - SSE / SST`; may be negative for poor fits.
    pub explained: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Coefficient of determination between observations and estimates.
///
/// The primary value is the squared Pearson correlation. The
/// `1 - SSE/SST` form is returned alongside in [`RSquared::explained`].
pub fn r_squared(obs: &[f64], est: &[f64]) -> Result<RSquared> {
    check_len("r_squared", obs.len(), est.len())?;
    if obs.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "R² needs at least two points, got {}",
            obs.len()
        )));
    }
    let mo = mean(obs);
    let me = mean(est);
    let (mut sxy, mut sxx, mut syy, mut sse) = (0.0, 0.0, 0.0, 0.0);
    for (o, e) in obs.iter().zip(est) {
        let (dx, dy) = (o - mo, e - me);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
        sse += (o - e) * (o - e);
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedMetric(
            "observations are constant".to_string(),
        ));
    }
    // A constant estimate has no linear association with the observations.
    let pearson = if syy == 0.0 {
        0.0
    } else {
        ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(RSquared {
        pearson,
        explained: 1.0 - sse / sxx,
    })
}

pub fn rmse(obs: &[f64], est: &[f64]) -> Result<f64> {
    check_len("rmse", obs.len(), est.len())?;
    if obs.is_empty() {
        return Err(Error::UndefinedMetric(
            "RMSE of an empty series".to_string(),
        ));
    }
    let sse: f64 = obs.iter().zip(est).map(|(o, e)| (o - e) * (o - e)).sum();
    Ok((sse / obs.len() as f64).sqrt())
}

pub fn mean_residual(obs: &[f64], est: &[f64]) -> Result<f64> {
    check_len("mean_residual", obs.len(), est.len())?;
    if obs.is_empty() {
        return Err(Error::UndefinedMetric(
            "mean of an empty series".to_string(),
        ));
    }
    Ok(obs.iter().zip(est).map(|(o, e)| e - o).sum::<f64>() / obs.len() as f64)
}
