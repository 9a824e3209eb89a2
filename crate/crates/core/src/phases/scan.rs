//! Learning-rate grid scans from one initialization.

use serde::{Deserialize, Serialize};

use super::barrier::barrier_profile;
use super::catapult::ratio_catapults;
use super::grid::CGrid;
use crate::data::Dataset;
use crate::models::ArchConfig;
use crate::training::{Initialization, LrRule, ProbeConfig, TrainConfig, Trainer};
use crate::{Error, Result};

/// Everything a scan needs besides the seed and the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub arch: ArchConfig,
    #[serde(default)]
    pub dataset: String,
    pub batch_size: usize,
    pub probe: ProbeConfig,
    pub t1: usize,
    pub divergence_k: f64,
    /// Interpolation points for the barrier; the barrier is skipped when 0.
    pub barrier_points: usize,
    /// Barrier threshold as a multiple of `L(theta_0)`.
    pub barrier_tol_rel: f64,
    /// Grid points are added beyond `x_max`, up to this exponent, until a
    /// divergent `c` brackets `c_max`.
    pub x_cap: f64,
}

impl ScanConfig {
    pub fn new(arch: ArchConfig, batch_size: usize, probe: ProbeConfig) -> Self {
        Self {
            arch,
            dataset: String::new(),
            batch_size,
            probe,
            t1: 10,
            divergence_k: 1e5,
            barrier_points: 50,
            barrier_tol_rel: 1e-6,
            x_cap: 10.0,
        }
    }

    pub fn train_config(&self, seed: u64, lr: LrRule, steps: usize) -> TrainConfig {
        TrainConfig {
            arch: self.arch,
            dataset: self.dataset.clone(),
            batch_size: self.batch_size,
            lr,
            steps,
            seed,
            probe: self.probe.clone(),
            divergence_k: self.divergence_k,
            loss: Default::default(),
        }
    }
}

/// Which thresholds a scan looks for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScanTargets {
    pub loss: bool,
    pub sharp: bool,
    pub max: bool,
    pub barrier: bool,
}

impl ScanTargets {
    pub const ALL: Self = Self {
        loss: true,
        sharp: true,
        max: true,
        barrier: true,
    };
}

/// Outcome at one grid point. `None` marks a predicate that was not
/// evaluated because its threshold was already found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub loss_catapult: bool,
    pub sharp_catapult: Option<bool>,
    pub diverged: bool,
    pub barrier: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants {
    pub seed: u64,
    pub depth: usize,
    pub width: usize,
    pub c_loss: Option<f64>,
    pub c_sharp: Option<f64>,
    pub c_max: Option<f64>,
    pub c_barrier: Option<f64>,
    pub lambda0: f64,
    pub loss0: f64,
    /// The smallest grid value already diverged.
    pub degenerate: bool,
    pub points: Vec<GridPoint>,
}

impl CriticalConstants {
    /// `c_loss <= c_sharp <= c_max`, or `None` when a constant is missing.
    pub fn ordering_holds(&self) -> Option<bool> {
        Some(self.c_loss? <= self.c_sharp? && self.c_sharp? <= self.c_max?)
    }

    pub fn barrier_ordering_holds(&self) -> Option<bool> {
        Some(self.c_sharp? <= self.c_barrier?)
    }

    /// Named constants in a fixed order.
    pub fn named(&self) -> [(&'static str, Option<f64>); 4] {
        [
            ("c_loss", self.c_loss),
            ("c_sharp", self.c_sharp),
            ("c_max", self.c_max),
            ("c_barrier", self.c_barrier),
        ]
    }
}

/// Runs `t1` steps at learning-rate constant `c` and evaluates the
/// requested predicates.
fn run_point(
    cfg: &ScanConfig,
    ds: &Dataset,
    init: &Initialization,
    seed: u64,
    c: f64,
    need_sharp: bool,
    need_barrier: bool,
) -> Result<GridPoint> {
    let tcfg = cfg.train_config(seed, LrRule::C(c), cfg.t1);
    let mut trainer = Trainer::new(&tcfg, ds, init)?;
    let mut loss_catapult = false;
    let mut sharp_catapult = need_sharp.then_some(false);
    let mut diverged = false;
    for _ in 0..cfg.t1 {
        if trainer
            .step()
            .is_err_and(|e| matches!(e, Error::Divergence { .. }))
        {
            diverged = true;
            loss_catapult = true;
            break;
        }
        let (loss, _) = trainer.evaluate()?;
        if loss.is_nan() || loss >= cfg.divergence_k {
            diverged = true;
            loss_catapult = true;
            break;
        }
        loss_catapult |= ratio_catapults(loss / init.loss0);
        if sharp_catapult == Some(false) {
            match trainer.sharpness() {
                Ok(s) => {
                    if ratio_catapults(s / init.lambda0) {
                        sharp_catapult = Some(true);
                    }
                }
                Err(Error::Divergence { .. }) => sharp_catapult = Some(true),
                Err(e) => return Err(e),
            }
        }
    }
    let barrier = if need_barrier && !diverged {
        Some(barrier_profile(&init.params, trainer.params(), ds, cfg.barrier_points)?.u)
    } else {
        None
    };
    Ok(GridPoint {
        c,
        loss_catapult,
        sharp_catapult,
        diverged,
        barrier,
    })
}

/// Scans the grid in increasing `c` from one shared initialization and
/// batch sequence.
///
/// `c_loss` and `c_sharp` are the first non-divergent grid values whose
/// ratio catapults, so neither exceeds `c_max`; `c_max` is the largest value whose loss stays below `K` for
/// `t in [1, T1]`; `c_barrier` the first non-divergent value with
/// `U > tol · L(theta_0)`. Sharpness and barrier evaluation stop once their
/// threshold is found.
pub fn scan_from_init(
    cfg: &ScanConfig,
    ds: &Dataset,
    init: &Initialization,
    grid: &CGrid,
    targets: ScanTargets,
) -> Result<CriticalConstants> {
    grid.validate()?;
    let seed = init.seed;
    let tol = cfg.barrier_tol_rel * init.loss0;
    let mut out = CriticalConstants {
        seed,
        depth: cfg.arch.depth,
        width: cfg.arch.width,
        c_loss: None,
        c_sharp: None,
        c_max: None,
        c_barrier: None,
        lambda0: init.lambda0,
        loss0: init.loss0,
        degenerate: false,
        points: Vec::new(),
    };
    let mut k = 0;
    loop {
        let within = k < grid.len();
        let extending = !within && grid.x(k) <= cfg.x_cap + 1e-9;
        let bracketed = out.points.last().is_some_and(|p| p.diverged);
        let settled = !targets.max
            && (!targets.loss || out.c_loss.is_some())
            && (!targets.sharp || out.c_sharp.is_some())
            && (!targets.barrier || out.c_barrier.is_some());
        if settled || !(within || (targets.max && extending && !bracketed)) {
            break;
        }
        let c = grid.c(k);
        let need_sharp = targets.sharp && out.c_sharp.is_none();
        let need_barrier = targets.barrier && cfg.barrier_points > 0 && out.c_barrier.is_none();
        let p = run_point(cfg, ds, init, seed, c, need_sharp, need_barrier)?;
        if targets.loss && out.c_loss.is_none() && p.loss_catapult && !p.diverged {
            out.c_loss = Some(c);
        }
        if p.sharp_catapult == Some(true) && out.c_sharp.is_none() && !p.diverged {
            out.c_sharp = Some(c);
        }
        if !p.diverged && targets.max {
            out.c_max = Some(c);
        }
        if k == 0 && p.diverged {
            out.degenerate = true;
        }
        if let Some(u) = p.barrier {
            if u > tol && out.c_barrier.is_none() {
                out.c_barrier = Some(c);
            }
        }
        out.points.push(p);
        k += 1;
    }
    Ok(out)
}

pub fn scan_critical_constants(
    cfg: &ScanConfig,
    ds: &Dataset,
    grid: &CGrid,
    seed: u64,
) -> Result<CriticalConstants> {
    let tcfg = cfg.train_config(seed, LrRule::C(1.0), cfg.t1);
    tcfg.validate(ds)?;
    let init = Initialization::new(&tcfg, ds)?;
    scan_from_init(cfg, ds, &init, grid, ScanTargets::ALL)
}

/// Smallest grid `c` whose interpolation barrier exceeds the tolerance.
pub fn detect_c_barrier(
    cfg: &ScanConfig,
    ds: &Dataset,
    grid: &CGrid,
    seed: u64,
) -> Result<Option<f64>> {
    let tcfg = cfg.train_config(seed, LrRule::C(1.0), cfg.t1);
    tcfg.validate(ds)?;
    let init = Initialization::new(&tcfg, ds)?;
    let targets = ScanTargets {
        loss: false,
        sharp: false,
        max: false,
        barrier: true,
    };
    Ok(scan_from_init(cfg, ds, &init, grid, targets)?.c_barrier)
}
