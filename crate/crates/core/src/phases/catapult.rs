use serde::{Deserialize, Serialize};

use crate::training::Trajectory;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatapultMode {
    Loss,
    Sharp,
}

/// Rounds to two decimal places.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// True iff some ratio exceeds 1 after rounding to two decimals.
pub fn ratio_catapults(ratio: f64) -> bool {
    round2(ratio) > 1.0
}

/// Whether the loss or sharpness ratio to its `t = 0` value exceeds 1.00
/// (after rounding) at some `t` in `[1, t1]`.
///
/// Steps missing because the run diverged early are not required; a
/// missing sharpness on a recorded step is a contract error.
pub fn detect_catapult(traj: &Trajectory, t1: usize, mode: CatapultMode) -> Result<bool> {
    let first = traj
        .record_at(0)
        .ok_or_else(|| Error::Contract("trajectory has no t = 0 record".into()))?;
    let last = traj.records.last().map_or(0, |r| r.t);
    if last < t1 && traj.diverged_at.is_none() {
        return Err(Error::Contract(format!(
            "trajectory ends at t = {last}, before T1 = {t1}"
        )));
    }
    let base = match mode {
        CatapultMode::Loss => first.loss,
        CatapultMode::Sharp => first
            .sharpness
            .ok_or_else(|| Error::Contract("no sharpness at t = 0".into()))?,
    };
    for t in 1..=t1.min(last) {
        let r = traj
            .record_at(t)
            .ok_or_else(|| Error::Contract(format!("missing record for t = {t}")))?;
        let value = match mode {
            CatapultMode::Loss => r.loss,
            CatapultMode::Sharp => match r.sharpness {
                Some(s) => s,
                None if traj.diverged_at == Some(t) => continue,
                None => return Err(Error::Contract(format!("no sharpness recorded at t = {t}"))),
            },
        };
        if !value.is_finite() || ratio_catapults(value / base) {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::StepRecord;

    fn traj(losses: &[f64], sharp: &[Option<f64>]) -> Trajectory {
        Trajectory {
            records: losses
                .iter()
                .zip(sharp)
                .enumerate()
                .map(|(t, (&loss, &sharpness))| StepRecord {
                    t,
                    loss,
                    accuracy: 0.0,
                    sharpness,
                })
                .collect(),
            lambda0: 1.0,
            eta: 1.0,
            c: 1.0,
            diverged_at: None,
            seed: 0,
            config_hash: String::new(),
        }
    }

    #[test]
    fn rounding_rule() {
        let t = traj(&[1.0, 1.004, 0.9, 1.0049], &[Some(1.0); 4]);
        assert!(!detect_catapult(&t, 3, CatapultMode::Loss).unwrap());
        let t = traj(&[1.0, 0.9, 0.8, 1.01], &[Some(1.0); 4]);
        assert!(detect_catapult(&t, 3, CatapultMode::Loss).unwrap());
        assert!(!detect_catapult(&t, 2, CatapultMode::Loss).unwrap());
        assert!(!detect_catapult(&t, 3, CatapultMode::Sharp).unwrap());
    }

    #[test]
    fn missing_sharpness_is_a_contract_error() {
        let t = traj(&[1.0, 1.0], &[Some(1.0), None]);
        assert!(matches!(
            detect_catapult(&t, 1, CatapultMode::Sharp),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            detect_catapult(&t, 5, CatapultMode::Loss),
            Err(Error::Contract(_))
        ));
    }
}
