//! Heuristic boundaries between the early transient, intermediate
//! saturation, progressive sharpening and edge-of-stability regimes.

use serde::{Deserialize, Serialize};

use crate::numkit::median;
use crate::training::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub t1: usize,
    /// Sharpening starts when sharpness exceeds this multiple of the
    /// running median since `t1` ...
    pub rise_ratio: f64,
    /// ... for this many consecutive probes.
    pub sustain: usize,
    /// Edge of stability starts at `sharpness >= eos_fraction · 2 / eta`.
    pub eos_fraction: f64,
}

impl Default for RegimeParams {
    fn default() -> Self {
        Self {
            t1: 10,
            rise_ratio: 1.2,
            sustain: 3,
            eos_fraction: 0.95,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regimes {
    pub t1: usize,
    pub t2: Option<usize>,
    pub t3: Option<usize>,
}

pub fn segment_regimes(traj: &Trajectory, params: &RegimeParams) -> Regimes {
    let probes: Vec<(usize, f64)> = traj
        .sharpness_points()
        .into_iter()
        .filter(|&(t, _)| t > params.t1)
        .collect();
    let mut t2 = None;
    for i in 1..probes.len() {
        if i + params.sustain > probes.len() {
            break;
        }
        let history: Vec<f64> = probes[..i].iter().map(|p| p.1).collect();
        let base = median(&history).expect("non-empty history");
        if probes[i..i + params.sustain]
            .iter()
            .all(|p| p.1 > params.rise_ratio * base)
        {
            t2 = Some(probes[i].0);
            break;
        }
    }
    let threshold = params.eos_fraction * 2.0 / traj.eta;
    let t3 = probes.iter().find(|p| p.1 >= threshold).map(|p| p.0);
    Regimes {
        t1: params.t1,
        t2,
        t3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::StepRecord;

    fn traj(eta: f64, sharp: impl Fn(usize) -> f64, steps: usize) -> Trajectory {
        Trajectory {
            records: (0..=steps)
                .map(|t| StepRecord {
                    t,
                    loss: 1.0,
                    accuracy: 0.0,
                    sharpness: Some(sharp(t)),
                })
                .collect(),
            lambda0: sharp(0),
            eta,
            c: eta * sharp(0),
            diverged_at: None,
            seed: 0,
            config_hash: String::new(),
        }
    }

    #[test]
    fn flat_then_ramp() {
        let eta = 0.2; // 2 / eta = 10
        let t = traj(
            eta,
            |t| {
                if t <= 50 {
                    1.0
                } else {
                    1.0 + 9.0 * (t.min(200) - 50) as f64 / 150.0
                }
            },
            300,
        );
        let r = segment_regimes(&t, &RegimeParams::default());
        let t2 = r.t2.unwrap();
        assert!((50..=62).contains(&t2), "{t2}");
        let t3 = r.t3.unwrap();
        assert!(1.0 + 9.0 * (t3 - 50) as f64 / 150.0 >= 9.5);
        assert!(1.0 + 9.0 * (t3 - 51) as f64 / 150.0 < 9.5);
    }

    #[test]
    fn decreasing_sharpness_has_only_t1() {
        let t = traj(0.01, |t| 5.0 / (1.0 + t as f64), 100);
        let r = segment_regimes(&t, &RegimeParams::default());
        assert_eq!(
            r,
            Regimes {
                t1: 10,
                t2: None,
                t3: None
            }
        );
    }
}
