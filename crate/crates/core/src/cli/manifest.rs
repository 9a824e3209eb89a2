//! Sweep manifests: which models, data, grid and seeds an experiment covers.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{load_idx, synthetic_dataset, Dataset, Standardization};
use crate::models::{Activation, ArchConfig, PrefactorMode};
use crate::numkit::SeededRng;
use crate::phases::{CGrid, SaturationProtocol, ScanConfig};
use crate::provenance::content_hash;
use crate::training::{ProbeConfig, ProbeSchedule, SharpnessMethod};
use crate::uvlab::uv_arch;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

const SYNTHETIC_N_IN: usize = 32;
const SYNTHETIC_CLASSES: usize = 10;

/// One architecture of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ArchSpec {
    Fcn { depth: usize, width: usize },
    Uv { width: usize },
}

impl ArchSpec {
    /// Parses `DxW` (ReLU network) or `uv:W`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("architecture {s:?} is neither DxW nor uv:W"));
        if let Some(w) = s.strip_prefix("uv:") {
            return Ok(ArchSpec::Uv {
                width: w.parse().map_err(|_| bad())?,
            });
        }
        let (d, w) = s.split_once('x').ok_or_else(bad)?;
        Ok(ArchSpec::Fcn {
            depth: d.parse().map_err(|_| bad())?,
            width: w.parse().map_err(|_| bad())?,
        })
    }

    pub fn label(&self) -> String {
        match self {
            ArchSpec::Fcn { depth, width } => format!("{depth}x{width}"),
            ArchSpec::Uv { width } => format!("uv{width}"),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ArchSpec::Fcn { depth, .. } => *depth,
            ArchSpec::Uv { .. } => 2,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            ArchSpec::Fcn { width, .. } | ArchSpec::Uv { width } => *width,
        }
    }

    pub fn is_uv(&self) -> bool {
        matches!(self, ArchSpec::Uv { .. })
    }

    /// Phase-diagram abscissa: `d/w`, or `1/w` for the `uv` model.
    pub fn ratio(&self) -> f64 {
        match self {
            ArchSpec::Fcn { depth, width } => *depth as f64 / *width as f64,
            ArchSpec::Uv { width } => 1.0 / *width as f64,
        }
    }

    pub fn arch_config(&self, n_in: usize, n_out: usize) -> ArchConfig {
        match *self {
            ArchSpec::Fcn { depth, width } => ArchConfig {
                depth,
                width,
                n_in,
                n_out,
                activation: Activation::Relu,
                prefactor: PrefactorMode::Critical,
            },
            ArchSpec::Uv { width } => uv_arch(width),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    /// Gaussian class clusters.
    Synthetic {
        n: usize,
        n_in: usize,
        classes: usize,
        seed: u64,
    },
    /// IDX images and labels, optionally truncated to the first `limit`.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        classes: usize,
        #[serde(default)]
        limit: Option<usize>,
    },
    /// The single datum `(x, y) = (1, 0)` of the `uv` model.
    Uv,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic {
            n: 2048,
            n_in: SYNTHETIC_N_IN,
            classes: SYNTHETIC_CLASSES,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    /// Parses `synthetic`, `synthetic:N`, `idx:<images>,<labels>` or `uv`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "uv" {
            return Ok(DatasetSpec::Uv);
        }
        if s == "synthetic" {
            return Ok(DatasetSpec::default());
        }
        if let Some(n) = s.strip_prefix("synthetic:") {
            let n = n
                .parse()
                .map_err(|_| Error::Config(format!("bad synthetic size in {s:?}")))?;
            return Ok(DatasetSpec::Synthetic {
                n,
                n_in: SYNTHETIC_N_IN,
                classes: SYNTHETIC_CLASSES,
                seed: 0,
            });
        }
        if let Some(rest) = s.strip_prefix("idx:") {
            let (images, labels) = rest.split_once(',').ok_or_else(|| {
                Error::Config(format!("expected idx:<images>,<labels>, got {s:?}"))
            })?;
            return Ok(DatasetSpec::Idx {
                images: images.into(),
                labels: labels.into(),
                classes: 10,
                limit: None,
            });
        }
        Err(Error::Config(format!(
            "unknown dataset {s:?}; expected synthetic, synthetic:N, idx:<images>,<labels> or uv"
        )))
    }

    pub fn describe(&self) -> String {
        match self {
            DatasetSpec::Synthetic {
                n,
                n_in,
                classes,
                seed,
            } => {
                format!("synthetic(n={n},n_in={n_in},classes={classes},seed={seed})")
            }
            DatasetSpec::Idx {
                images,
                labels,
                limit,
                ..
            } => {
                format!(
                    "idx({},{},limit={limit:?})",
                    images.display(),
                    labels.display()
                )
            }
            DatasetSpec::Uv => "uv".into(),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        let mut ds = match self {
            DatasetSpec::Synthetic {
                n,
                n_in,
                classes,
                seed,
            } => synthetic_dataset(
                *n,
                *n_in,
                *classes,
                Standardization::Global,
                &mut SeededRng::new(*seed),
            )?,
            DatasetSpec::Idx {
                images,
                labels,
                classes,
                limit,
            } => {
                let ds = load_idx(images, labels, *classes, Standardization::Global)?;
                match limit {
                    Some(k) if *k < ds.len() => {
                        let idx: Vec<usize> = (0..*k).collect();
                        Dataset::new(
                            ds.select(&idx)?.inputs,
                            ds.labels[..*k].to_vec(),
                            *classes,
                            &ds.name,
                        )?
                    }
                    _ => ds,
                }
            }
            DatasetSpec::Uv => Dataset::uv_datum(),
        };
        ds.name = self.describe();
        Ok(ds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        let g = CGrid::default();
        Self {
            x_min: g.x_min,
            x_max: g.x_max,
            step: g.step,
        }
    }
}

impl GridSpec {
    pub fn grid(&self) -> Result<CGrid> {
        CGrid::new(self.x_min, self.x_max, self.step)
    }
}

/// Everything that determines the numbers an experiment produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub schema_version: u32,
    pub archs: Vec<ArchSpec>,
    pub dataset: DatasetSpec,
    pub grid: GridSpec,
    pub seeds: Vec<u64>,
    pub batch_size: usize,
    pub t1: usize,
    pub probe_m: usize,
    pub probe_iters: usize,
    #[serde(rename = "K")]
    pub divergence_k: f64,
    #[serde(default)]
    pub saturation: SaturationProtocol,
    /// Output root; not part of the manifest hash.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl Default for SweepManifest {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            archs: vec![ArchSpec::Fcn {
                depth: 4,
                width: 32,
            }],
            dataset: DatasetSpec::default(),
            grid: GridSpec::default(),
            seeds: (0..10).collect(),
            batch_size: 256,
            t1: 10,
            probe_m: 2048,
            probe_iters: 20,
            divergence_k: 1e5,
            saturation: SaturationProtocol::default(),
            output: None,
        }
    }
}

impl SweepManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: SweepManifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "manifest schema version {} is not the supported version {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.archs.is_empty() {
            return Err(Error::Config("manifest lists no architectures".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("manifest lists no seeds".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::Config("manifest seeds must be distinct".into()));
        }
        let uv = self.archs.iter().filter(|a| a.is_uv()).count();
        if uv != 0 && uv != self.archs.len() {
            return Err(Error::Config(
                "uv and FCN architectures cannot share a manifest".into(),
            ));
        }
        if (uv > 0) != (self.dataset == DatasetSpec::Uv) {
            return Err(Error::Config(
                "the uv model is trained on exactly the uv dataset".into(),
            ));
        }
        if self.archs.iter().any(|a| a.depth() == 0 || a.width() == 0) {
            return Err(Error::Config("depth and width must be positive".into()));
        }
        if self.batch_size == 0 || self.t1 == 0 || self.probe_iters == 0 || self.probe_m == 0 {
            return Err(Error::Config(
                "batch size, T1, probe size and probe iterations must be positive".into(),
            ));
        }
        if !(self.divergence_k.is_finite() && self.divergence_k > 0.0) {
            return Err(Error::Config(format!(
                "K must be positive, got {}",
                self.divergence_k
            )));
        }
        self.grid.grid()?;
        Ok(())
    }

    /// Hash of everything but the output location.
    pub fn hash(&self) -> String {
        let mut m = self.clone();
        m.output = None;
        content_hash(&m)
    }

    pub fn is_uv(&self) -> bool {
        self.archs.iter().all(ArchSpec::is_uv)
    }

    /// Scan configuration of one architecture. `uv` models use `k`-scaled
    /// learning rates (`eta = k / Tr H_0`) on a batch of one.
    pub fn scan_config(&self, arch: &ArchSpec, ds: &Dataset) -> ScanConfig {
        let mut cfg = match arch {
            ArchSpec::Uv { width } => {
                crate::uvlab::uv_scan_config(*width, SharpnessMethod::UvTrace)
            }
            ArchSpec::Fcn { .. } => {
                let mut cfg = ScanConfig::new(
                    arch.arch_config(ds.n_in(), ds.n_out()),
                    self.batch_size.min(ds.len()),
                    ProbeConfig {
                        m: self.probe_m.min(ds.len()),
                        iters: self.probe_iters,
                        schedule: ProbeSchedule::EveryStep,
                        method: SharpnessMethod::PowerIteration,
                    },
                );
                cfg.dataset = self.dataset.describe();
                cfg
            }
        };
        cfg.t1 = self.t1;
        cfg.divergence_k = self.divergence_k;
        cfg.probe.iters = self.probe_iters;
        cfg
    }
}
