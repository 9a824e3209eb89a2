//! SGD with `eta = c / lambda_0`, trajectory records and the sharpness probe.

mod trajectory;

pub use trajectory::{StepRecord, Trajectory};

use serde::{Deserialize, Serialize};

use crate::autodiff::{hessian_operator, loss_and_grad, LossKind};
use crate::data::{Batch, BatchSampler, Dataset};
use crate::models::{
    forward_batch, init_fcn, uv_top_eigenvalue, ArchConfig, NetworkParams, UvState,
};
use crate::numkit::{derive_seed, power_iteration, SeededRng};
use crate::provenance::content_hash;
use crate::{Error, Result};

const TAG_INIT: u64 = 1;
const TAG_BATCHES: u64 = 2;
const TAG_PROBE_SET: u64 = 3;
const TAG_POWER: u64 = 4;

/// Steps at which sharpness is measured.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ProbeSchedule {
    Never,
    EveryStep,
    /// Every step `t <= last`.
    UpTo {
        last: usize,
    },
    Steps {
        steps: Vec<usize>,
    },
    /// Every step in the first epoch, every epoch from epoch 10 to 100 and
    /// every 10 epochs afterwards.
    Epochs {
        steps_per_epoch: usize,
    },
}

impl ProbeSchedule {
    pub fn contains(&self, t: usize) -> bool {
        match self {
            ProbeSchedule::Never => false,
            ProbeSchedule::EveryStep => true,
            ProbeSchedule::UpTo { last } => t <= *last,
            ProbeSchedule::Steps { steps } => steps.contains(&t),
            ProbeSchedule::Epochs { steps_per_epoch } => {
                let spe = (*steps_per_epoch).max(1);
                let (epoch, offset) = (t / spe, t % spe);
                t <= spe
                    || (offset == 0
                        && ((10..=100).contains(&epoch) || (epoch > 100 && epoch % 10 == 0)))
            }
        }
    }
}

/// How the top Hessian eigenvalue is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SharpnessMethod {
    /// Power iteration over Hessian-vector products on the probe set.
    #[default]
    PowerIteration,
    /// Exact top eigenvalue of the `uv` Hessian on the datum `(1, 0)`.
    UvTopEigen,
    /// `Tr H` of the `uv` model, the curvature used by `k`-scaled rates.
    UvTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub m: usize,
    pub iters: usize,
    pub schedule: ProbeSchedule,
    #[serde(default)]
    pub method: SharpnessMethod,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            m: 2048,
            iters: 20,
            schedule: ProbeSchedule::EveryStep,
            method: SharpnessMethod::PowerIteration,
        }
    }
}

/// Learning-rate rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrRule {
    /// `eta = c / lambda_0`.
    C(f64),
    /// A fixed `eta`; the recorded `c` is `eta · lambda_0`.
    Eta(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: ArchConfig,
    /// Free-form description of the dataset, part of the config hash.
    #[serde(default)]
    pub dataset: String,
    pub batch_size: usize,
    pub lr: LrRule,
    pub steps: usize,
    pub seed: u64,
    pub probe: ProbeConfig,
    pub divergence_k: f64,
    #[serde(default)]
    pub loss: LossKind,
}

impl TrainConfig {
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        self.arch.validate()?;
        match self.lr {
            LrRule::C(c) | LrRule::Eta(c) if !(c.is_finite() && c > 0.0) => {
                return Err(Error::Config(format!(
                    "learning-rate constant must be positive, got {c}"
                )));
            }
            _ => {}
        }
        if self.batch_size == 0 || self.batch_size > ds.len() {
            return Err(Error::Config(format!(
                "batch size {} must be in 1..={}",
                self.batch_size,
                ds.len()
            )));
        }
        if self.probe.m == 0 || self.probe.m > ds.len() {
            return Err(Error::Config(format!(
                "probe size {} must be in 1..={}",
                self.probe.m,
                ds.len()
            )));
        }
        if self.probe.iters == 0 {
            return Err(Error::Config(
                "power iteration needs at least one step".into(),
            ));
        }
        if ds.n_in() != self.arch.n_in || ds.n_out() != self.arch.n_out {
            return Err(Error::Config(format!(
                "dataset is {}→{} but the architecture is {}→{}",
                ds.n_in(),
                ds.n_out(),
                self.arch.n_in,
                self.arch.n_out
            )));
        }
        if self.divergence_k.is_nan() || self.divergence_k <= 0.0 {
            return Err(Error::Config(
                "divergence threshold K must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessEstimate {
    pub value: f64,
    pub probe_seed: u64,
    pub m: usize,
    pub iters: usize,
}

/// Seed of the weight initialization of a run.
pub fn init_seed(run_seed: u64) -> u64 {
    derive_seed(run_seed, TAG_INIT)
}

/// Seed of the power-iteration start vector for the measurement at step `t`.
pub fn power_seed(run_seed: u64, t: usize) -> u64 {
    derive_seed(derive_seed(run_seed, TAG_POWER), t as u64)
}

/// Top Hessian eigenvalue of the loss on `probe`.
pub fn measure_sharpness(
    params: &NetworkParams,
    probe: &Batch,
    cfg: &ProbeConfig,
    start_seed: u64,
) -> Result<SharpnessEstimate> {
    let value = match cfg.method {
        SharpnessMethod::PowerIteration => {
            let op = hessian_operator(params, probe, LossKind::Mse)?;
            power_iteration(&op, cfg.iters, &mut SeededRng::new(start_seed))?.value
        }
        SharpnessMethod::UvTopEigen => uv_top_eigenvalue(&UvState::from_params(params)?),
        SharpnessMethod::UvTrace => UvState::from_params(params)?.trace_h(),
    };
    if !value.is_finite() {
        return Err(Error::Divergence {
            step: 0,
            context: "non-finite sharpness".into(),
        });
    }
    Ok(SharpnessEstimate {
        value,
        probe_seed: start_seed,
        m: probe.len(),
        iters: cfg.iters,
    })
}

/// Loss and accuracy of `params` on the whole dataset.
///
/// With one output an example counts as correct when `|f − y| < 0.5`;
/// otherwise the arg-max output must match the arg-max target.
pub fn evaluate(params: &NetworkParams, ds: &Dataset) -> Result<(f64, f64)> {
    let out = forward_batch(params, &ds.inputs)?;
    let n = ds.len();
    let loss = 0.5 * out.sub(&ds.targets).frobenius_sq() / n as f64;
    let correct = (0..n)
        .filter(|&i| {
            let (o, y) = (out.row(i), ds.targets.row(i));
            if o.len() == 1 {
                (o[0] - y[0]).abs() < 0.5
            } else {
                argmax(o) == argmax(y)
            }
        })
        .count();
    Ok((loss, correct as f64 / n as f64))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// The probe subset: `m` distinct rows drawn with the run's probe seed, or
/// the whole dataset in order when `m == n`.
pub fn probe_batch(ds: &Dataset, m: usize, run_seed: u64) -> Result<Batch> {
    if m == 0 || m > ds.len() {
        return Err(Error::Config(format!(
            "probe size {m} must be in 1..={}",
            ds.len()
        )));
    }
    if m == ds.len() {
        return Ok(ds.full_batch());
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    SeededRng::new(derive_seed(run_seed, TAG_PROBE_SET)).shuffle(&mut idx);
    idx.truncate(m);
    idx.sort_unstable();
    ds.select(&idx)
}

/// Everything fixed at `t = 0` for one seed: shared by every `c` of a scan.
#[derive(Clone, Debug)]
pub struct Initialization {
    pub params: NetworkParams,
    pub probe: Batch,
    pub lambda0: f64,
    pub loss0: f64,
    pub accuracy0: f64,
    pub seed: u64,
}

impl Initialization {
    /// Critical initialization of `cfg.arch` from the run seed.
    pub fn new(cfg: &TrainConfig, ds: &Dataset) -> Result<Self> {
        let params = init_fcn(&cfg.arch, &mut SeededRng::new(init_seed(cfg.seed)))?;
        Self::from_params(params, cfg, ds)
    }

    pub fn from_params(params: NetworkParams, cfg: &TrainConfig, ds: &Dataset) -> Result<Self> {
        let probe = probe_batch(ds, cfg.probe.m, cfg.seed)?;
        let lambda0 =
            measure_sharpness(&params, &probe, &cfg.probe, power_seed(cfg.seed, 0))?.value;
        let (loss0, accuracy0) = evaluate(&params, ds)?;
        Ok(Self {
            params,
            probe,
            lambda0,
            loss0,
            accuracy0,
            seed: cfg.seed,
        })
    }

    pub fn eta(&self, lr: LrRule) -> Result<f64> {
        match lr {
            LrRule::Eta(eta) => Ok(eta),
            LrRule::C(c) if self.lambda0 > 0.0 => Ok(c / self.lambda0),
            LrRule::C(_) => Err(Error::Config(format!(
                "initial sharpness {} is not positive, eta = c / lambda_0 is undefined",
                self.lambda0
            ))),
        }
    }
}

/// A single SGD run in progress.
pub struct Trainer<'a> {
    cfg: &'a TrainConfig,
    ds: &'a Dataset,
    init: &'a Initialization,
    params: NetworkParams,
    sampler: BatchSampler,
    eta: f64,
    t: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a TrainConfig, ds: &'a Dataset, init: &'a Initialization) -> Result<Self> {
        cfg.validate(ds)?;
        Ok(Self {
            eta: init.eta(cfg.lr)?,
            sampler: BatchSampler::new(
                ds.len(),
                cfg.batch_size,
                derive_seed(cfg.seed, TAG_BATCHES),
            )?,
            params: init.params.clone(),
            cfg,
            ds,
            init,
            t: 0,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    /// One update `theta -= eta · g(theta)` on the next minibatch; returns
    /// the minibatch loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        let batch = self.sampler.next_batch(self.ds)?;
        let (loss, grad) =
            loss_and_grad(&self.params, &batch, self.cfg.loss).map_err(|e| at_step(e, self.t))?;
        self.params.axpy_flat(-self.eta, &grad)?;
        self.t += 1;
        Ok(loss)
    }

    pub fn evaluate(&self) -> Result<(f64, f64)> {
        evaluate(&self.params, self.ds)
    }

    pub fn sharpness(&self) -> Result<f64> {
        if self.t == 0 {
            return Ok(self.init.lambda0);
        }
        let est = measure_sharpness(
            &self.params,
            &self.init.probe,
            &self.cfg.probe,
            power_seed(self.cfg.seed, self.t),
        )
        .map_err(|e| at_step(e, self.t))?;
        Ok(est.value)
    }
}

fn at_step(e: Error, t: usize) -> Error {
    match e {
        Error::Divergence { context, .. } => Error::Divergence { step: t, context },
        other => other,
    }
}

/// Full training run from the critical initialization of `cfg.arch`.
pub fn sgd_trajectory(cfg: &TrainConfig, ds: &Dataset) -> Result<Trajectory> {
    cfg.validate(ds)?;
    let init = Initialization::new(cfg, ds)?;
    sgd_trajectory_from(cfg, ds, &init)
}

/// Training run from a prepared initialization.
///
/// Loss and accuracy are recorded at every `t = 0..=steps`, sharpness on the
/// probe schedule. The run stops after the first record whose loss exceeds
/// `divergence_k` or is not finite.
pub fn sgd_trajectory_from(
    cfg: &TrainConfig,
    ds: &Dataset,
    init: &Initialization,
) -> Result<Trajectory> {
    let mut trainer = Trainer::new(cfg, ds, init)?;
    let mut traj = Trajectory {
        records: Vec::with_capacity(cfg.steps + 1),
        lambda0: init.lambda0,
        eta: trainer.eta(),
        c: match cfg.lr {
            LrRule::C(c) => c,
            LrRule::Eta(eta) => eta * init.lambda0,
        },
        diverged_at: None,
        seed: cfg.seed,
        config_hash: cfg.hash(),
    };
    loop {
        let t = trainer.t();
        let (loss, accuracy) = trainer.evaluate()?;
        let diverged = loss.is_nan() || loss > cfg.divergence_k;
        let mut sharpness = None;
        if !diverged && cfg.probe.schedule.contains(t) {
            match trainer.sharpness() {
                Ok(v) => sharpness = Some(v),
                Err(Error::Divergence { .. }) => {
                    traj.records.push(StepRecord {
                        t,
                        loss,
                        accuracy,
                        sharpness,
                    });
                    traj.diverged_at = Some(t);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        traj.records.push(StepRecord {
            t,
            loss,
            accuracy,
            sharpness,
        });
        if diverged {
            traj.diverged_at = Some(t);
            break;
        }
        if t == cfg.steps {
            break;
        }
        match trainer.step() {
            Ok(_) => {}
            Err(Error::Divergence { .. }) => {
                traj.diverged_at = Some(t + 1);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(traj)
}

/// `(1 − s) · a + s · b` entrywise.
pub fn interpolate_params(a: &NetworkParams, b: &NetworkParams, s: f64) -> Result<NetworkParams> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "{:?} vs {:?}",
            a.shapes(),
            b.shapes()
        )));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Contract(format!(
            "interpolation weight {s} outside [0, 1]"
        )));
    }
    let mut out = a.clone();
    for (m, mb) in out.layers.iter_mut().zip(&b.layers) {
        for (x, y) in m.as_mut_slice().iter_mut().zip(mb.as_slice()) {
            *x = (1.0 - s) * *x + s * y;
        }
    }
    Ok(out)
}
