//! Simulation drivers for the `uv` model.

use rayon::prelude::*;

use super::montecarlo::uv_gd_step;
use crate::data::Dataset;
use crate::models::{init_fcn, uv_top_eigenvalue, Activation, ArchConfig, PrefactorMode, UvState};
use crate::numkit::SeededRng;
use crate::phases::{CGrid, SaturationCurve, SaturationProtocol, ScanConfig, TauRule};
use crate::training::{init_seed, ProbeConfig, ProbeSchedule, SharpnessMethod};
use crate::Result;

/// The `uv` model as a depth-2 linear network with one input and output;
/// its prefactors are `1` and `1/sqrt(w)`.
pub fn uv_arch(w: usize) -> ArchConfig {
    ArchConfig {
        depth: 2,
        width: w,
        n_in: 1,
        n_out: 1,
        activation: Activation::Linear,
        prefactor: PrefactorMode::Critical,
    }
}

/// Initial state of run `seed`, identical to what the trainer draws.
pub fn uv_initial_state(w: usize, seed: u64) -> Result<UvState> {
    let p = init_fcn(&uv_arch(w), &mut SeededRng::new(init_seed(seed)))?;
    UvState::from_params(&p)
}

/// Grid scan setup for the `uv` model on its datum. With
/// [`SharpnessMethod::UvTrace`] the scanned constant is `k = eta · Tr H₀`;
/// with [`SharpnessMethod::UvTopEigen`] it is `c = eta · lambda_0`.
pub fn uv_scan_config(w: usize, method: SharpnessMethod) -> ScanConfig {
    let mut cfg = ScanConfig::new(
        uv_arch(w),
        1,
        ProbeConfig {
            m: 1,
            iters: 20,
            schedule: ProbeSchedule::EveryStep,
            method,
        },
    );
    cfg.dataset = "uv".into();
    cfg.barrier_points = 0;
    cfg
}

pub fn uv_dataset() -> Dataset {
    Dataset::uv_datum()
}

/// Mean of `lambda_t / lambda_0` over the protocol window with
/// `eta = c / lambda_0`, or `None` if the loss exceeds `k_div` or stops
/// being finite first.
pub fn uv_saturation_sharpness(
    w: usize,
    c: f64,
    seed: u64,
    protocol: &SaturationProtocol,
    k_div: f64,
) -> Result<Option<f64>> {
    let (lo, hi) = protocol.window(c)?;
    let mut s = uv_initial_state(w, seed)?;
    let lambda0 = uv_top_eigenvalue(&s);
    let eta = c / lambda0;
    let mut acc = 0.0;
    for t in 1..=hi {
        uv_gd_step(&mut s, eta);
        if s.loss().is_nan() || s.loss() >= k_div {
            return Ok(None);
        }
        if t >= lo {
            acc += uv_top_eigenvalue(&s);
        }
    }
    Ok(Some(acc / (hi - lo + 1) as f64 / lambda0))
}

/// Seed-averaged saturation sharpness at every grid point.
pub fn uv_saturation_curve(
    w: usize,
    grid: &CGrid,
    seeds: &[u64],
    protocol: &SaturationProtocol,
    k_div: f64,
) -> Result<SaturationCurve> {
    let cs = grid.values();
    let values: Vec<Vec<Option<f64>>> = cs
        .par_iter()
        .map(|&c| {
            seeds
                .iter()
                .map(|&seed| uv_saturation_sharpness(w, c, seed, protocol, k_div))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(SaturationCurve::from_samples(&cs, &values, *protocol))
}

/// The fixed-`tau` protocol used for the `uv` model: `tau = 100`, no
/// averaging window.
pub fn uv_saturation_protocol() -> SaturationProtocol {
    SaturationProtocol {
        tau: TauRule::Fixed { tau: 100 },
        half_window: 0,
    }
}
