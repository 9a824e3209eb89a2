//! Monte Carlo estimates over Gaussian `uv` initializations.
//!
//! Samples are split into a fixed number of shards with seeds derived from
//! the base seed; shards run in parallel and are reduced in shard order, so
//! results do not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{init_uv, UvState};
use crate::numkit::{derive_seed, SeededRng};

const SHARDS: usize = 64;

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// `(mean − reference) / se`; zero when both agree exactly.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = self.mean - reference;
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Acc {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Acc {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Acc) -> Acc {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Acc {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }

    fn estimate(self) -> Estimate {
        let var = if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            se: (var / self.n as f64).sqrt(),
            n: self.n,
        }
    }
}

/// Means of `k` statistics of `samples` fresh initializations of width `w`.
pub fn mc_estimate<F>(w: usize, samples: usize, seed: u64, k: usize, stat: F) -> Vec<Estimate>
where
    F: Fn(&UvState, &mut [f64]) + Sync,
{
    let shards: Vec<Vec<Acc>> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = samples / SHARDS + usize::from(shard < samples % SHARDS);
            let mut rng = SeededRng::new(derive_seed(seed, shard as u64));
            let mut accs = vec![Acc::default(); k];
            let mut out = vec![0.0; k];
            for _ in 0..count {
                let s = init_uv(w, &mut rng).expect("width checked by caller");
                stat(&s, &mut out);
                for (a, &x) in accs.iter_mut().zip(&out) {
                    a.push(x);
                }
            }
            accs
        })
        .collect();
    (0..k)
        .map(|j| {
            shards
                .iter()
                .fold(Acc::default(), |acc, s| acc.merge(s[j]))
                .estimate()
        })
        .collect()
}

/// Parameter-space gradient step on `L = f²/2`:
/// `u -= eta f v / sqrt(w)`, `v -= eta f u / sqrt(w)`.
pub fn uv_gd_step(s: &mut UvState, eta: f64) {
    let scale = eta * s.f() / (s.width() as f64).sqrt();
    for (u, v) in s.u.iter_mut().zip(s.v.iter_mut()) {
        let (du, dv) = (scale * *v, scale * *u);
        *u -= du;
        *v -= dv;
    }
}

/// Empirical `m2`, `m4`, `m42`.
pub fn mc_moments(w: usize, samples: usize, seed: u64) -> Vec<Estimate> {
    mc_estimate(w, samples, seed, 3, |s, out| {
        let (f, tr) = (s.f(), s.trace_h());
        let r2 = (f / tr).powi(2);
        out[0] = r2;
        out[1] = r2 * r2;
        out[2] = f.powi(4) / (tr * tr);
    })
}

/// Empirical `⟨L₁/L₀⟩` for each `k`, one gradient step with `eta = k / Tr H₀`.
pub fn mc_first_step_loss_ratio(ks: &[f64], w: usize, samples: usize, seed: u64) -> Vec<Estimate> {
    mc_estimate(w, samples, seed, ks.len(), |s, out| {
        let (l0, tr) = (s.loss(), s.trace_h());
        for (o, &k) in out.iter_mut().zip(ks) {
            let mut s1 = s.clone();
            uv_gd_step(&mut s1, k / tr);
            *o = s1.loss() / l0;
        }
    })
}

/// Empirical `⟨Δ‖H‖²_F⟩` after one step, with `‖H‖²_F` summed entrywise
/// from the block structure (no use of the trace identity).
pub fn mc_frobenius_change(k: f64, w: usize, samples: usize, seed: u64) -> Estimate {
    mc_estimate(w, samples, seed, 1, |s, out| {
        let mut s1 = s.clone();
        uv_gd_step(&mut s1, k / s.trace_h());
        out[0] = frobenius_sq_blocks(&s1) - frobenius_sq_blocks(s);
    })[0]
}

/// `‖H‖²_F` from `‖vvᵀ‖² + ‖uuᵀ‖² + 2‖vuᵀ + f sqrt(w) I‖²`, all over `w²`.
pub fn frobenius_sq_blocks(s: &UvState) -> f64 {
    let wf = s.width() as f64;
    let uu: f64 = s.u.iter().map(|x| x * x).sum();
    let vv: f64 = s.v.iter().map(|x| x * x).sum();
    let uv: f64 = s.u.iter().zip(&s.v).map(|(a, b)| a * b).sum();
    let f = s.f();
    // ‖vuᵀ + aI‖² = ‖u‖²‖v‖² + 2a (u·v) + a² w
    let a = f * wf.sqrt();
    let cross = uu * vv + 2.0 * a * uv + a * a * wf;
    (vv * vv + uu * uu + 2.0 * cross) / (wf * wf)
}
