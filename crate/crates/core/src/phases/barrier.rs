use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::models::NetworkParams;
use crate::training::{evaluate, interpolate_params};
use crate::{Error, Result};

/// Full-dataset loss along the segment from `theta0` to `theta_t1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationProfile {
    pub s: Vec<f64>,
    pub loss: Vec<f64>,
    /// `max_s L_int(s) − L_int(0)`.
    pub u: f64,
}

pub fn barrier_profile(
    theta0: &NetworkParams,
    theta_t1: &NetworkParams,
    ds: &Dataset,
    s_points: usize,
) -> Result<InterpolationProfile> {
    if s_points < 3 {
        return Err(Error::Contract(format!(
            "need at least 3 interpolation points, got {s_points}"
        )));
    }
    let s: Vec<f64> = (0..s_points)
        .map(|k| k as f64 / (s_points - 1) as f64)
        .collect();
    let loss = s
        .iter()
        .map(|&si| evaluate(&interpolate_params(theta0, theta_t1, si)?, ds).map(|(l, _)| l))
        .collect::<Result<Vec<f64>>>()?;
    let max = loss.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(InterpolationProfile {
        u: max - loss[0],
        s,
        loss,
    })
}
