//! Command-line front end: manifests, sweeps, persistence and figures.

mod commands;
mod manifest;
mod output;
mod render;
mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_phase_diagram, cmd_render, cmd_saturation, cmd_trajectory, cmd_uv_validate,
    constants_table, run_saturation, run_scans, set_quiet, trajectory_config, worker_pool,
    CellFailure, PhaseDiagramSidecar, RunInfo, TrajectoryRequest,
};
pub use manifest::{ArchSpec, DatasetSpec, GridSpec, SweepManifest, SCHEMA_VERSION};
pub use output::{OutputDir, Table};
pub use svg::{Panel, Series, Style};

use crate::uvlab::UvValidateOptions;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_ACCEPTANCE: i32 = 3;

/// Environment variable that replaces the output root of manifests.
pub const OUT_ENV: &str = "SHARPSCOPE_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "sharpscope",
    version,
    about = "Early-training sharpness and learning-rate phase diagrams"
)]
pub struct Cli {
    /// Suppress per-job progress on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one run and record loss, accuracy and sharpness per step.
    Trajectory {
        #[command(flatten)]
        sweep: SweepArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Learning-rate constant, eta = c / lambda_0.
        #[arg(long, conflicts_with = "k")]
        c: Option<f64>,
        /// Trace-scaled rate for the uv model, eta = k / Tr H_0.
        #[arg(long)]
        k: Option<f64>,
        /// Seed (defaults to the first manifest seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Scan the c grid for every architecture and seed and assemble the
    /// critical constants against d/w.
    PhaseDiagram {
        #[command(flatten)]
        sweep: SweepArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Intermediate-saturation sharpness curves and c_crit.
    Saturation {
        #[command(flatten)]
        sweep: SweepArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check the uv-model closed forms against Monte Carlo.
    UvValidate {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,3,3.9")]
        ks: Vec<f64>,
        /// Directory for the CSV and text report (stdout only when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Multiplies the closed-form m2 constant, for checking that the
        /// validator notices a wrong formula.
        #[arg(long, hide = true, default_value_t = 1.0)]
        corrupt_m2: f64,
    },
    /// Re-render every SVG below a directory from its CSV and JSON files.
    Render { dir: PathBuf },
    /// Print the manifest resolved from a file and flags.
    Manifest {
        #[command(flatten)]
        sweep: SweepArgs,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// JSON manifest; flags below override its fields.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Architectures as DxW (ReLU network) or uv:W, comma separated.
    #[arg(long = "arch", value_delimiter = ',')]
    pub archs: Vec<String>,
    /// synthetic, synthetic:N, idx:<images>,<labels> or uv.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long = "grid-xmin", allow_negative_numbers = true)]
    pub grid_xmin: Option<f64>,
    #[arg(long = "grid-xmax")]
    pub grid_xmax: Option<f64>,
    #[arg(long = "grid-step")]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub t1: Option<usize>,
    /// Divergence threshold on the loss.
    #[arg(long = "K")]
    pub divergence_k: Option<f64>,
    #[arg(long = "probe-m")]
    pub probe_m: Option<usize>,
    #[arg(long = "probe-iters")]
    pub probe_iters: Option<usize>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    /// Seeds as a comma list; `a..b` adds the half-open range.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<String>,
    /// Saturation step: tau = round(PRODUCT / c).
    #[arg(long = "tau-product")]
    pub tau_product: Option<f64>,
    /// Saturation step fixed for every c.
    #[arg(long = "tau", conflicts_with = "tau_product")]
    pub tau: Option<usize>,
    /// Half width of the saturation averaging window.
    #[arg(long = "half-window")]
    pub half_window: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutArgs {
    /// Output root (overrides SHARPSCOPE_OUT and the manifest).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace existing results produced by a different manifest.
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

pub fn parse_seeds(tokens: &[String]) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for tok in tokens {
        let bad = || Error::Config(format!("bad seed {tok:?}"));
        if let Some((a, b)) = tok.split_once("..") {
            let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            seeds.extend(a..b);
        } else {
            seeds.push(tok.parse().map_err(|_| bad())?);
        }
    }
    Ok(seeds)
}

impl SweepArgs {
    /// The manifest file (or defaults) with flag overrides applied, validated.
    pub fn resolve(&self) -> Result<SweepManifest> {
        let mut m = match &self.manifest {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text)?
            }
            None => SweepManifest::default(),
        };
        if !self.archs.is_empty() {
            m.archs = self
                .archs
                .iter()
                .map(|a| ArchSpec::parse(a))
                .collect::<Result<_>>()?;
        }
        if let Some(d) = &self.data {
            m.dataset = DatasetSpec::parse(d)?;
        } else if self.manifest.is_none() && m.archs.iter().all(ArchSpec::is_uv) {
            m.dataset = DatasetSpec::Uv;
        }
        if let Some(v) = self.grid_xmin {
            m.grid.x_min = v;
        }
        if let Some(v) = self.grid_xmax {
            m.grid.x_max = v;
        }
        if let Some(v) = self.grid_step {
            m.grid.step = v;
        }
        if let Some(v) = self.t1 {
            m.t1 = v;
        }
        if let Some(v) = self.divergence_k {
            m.divergence_k = v;
        }
        if let Some(v) = self.probe_m {
            m.probe_m = v;
        }
        if let Some(v) = self.probe_iters {
            m.probe_iters = v;
        }
        if let Some(v) = self.batch_size {
            m.batch_size = v;
        }
        if !self.seeds.is_empty() {
            m.seeds = parse_seeds(&self.seeds)?;
        }
        if let Some(p) = self.tau_product {
            m.saturation.tau = crate::phases::TauRule::CTimes { product: p };
        }
        if let Some(t) = self.tau {
            m.saturation.tau = crate::phases::TauRule::Fixed { tau: t };
        }
        if let Some(h) = self.half_window {
            m.saturation.half_window = h;
        }
        m.validate()?;
        Ok(m)
    }
}

/// Output root: `--out`, else `SHARPSCOPE_OUT`, else the manifest's, else
/// `sharpscope-out`.
pub fn output_root(flag: Option<&PathBuf>, manifest: &SweepManifest) -> PathBuf {
    flag.cloned()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| manifest.output.clone())
        .unwrap_or_else(|| PathBuf::from("sharpscope-out"))
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Divergence { .. } | Error::Fit(_) | Error::Undefined(_) => {
            EXIT_ERROR
        }
        _ => EXIT_VALIDATION,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    set_quiet(cli.quiet);
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Trajectory {
            sweep,
            out,
            c,
            k,
            seed,
            steps,
        } => {
            let m = sweep.resolve()?;
            let arch = match m.archs.as_slice() {
                [a] => *a,
                _ => {
                    return Err(Error::Config(
                        "a trajectory needs exactly one --arch".into(),
                    ))
                }
            };
            let (c, k_scaling) = match (c, k) {
                (Some(c), None) => (c, false),
                (None, Some(k)) => (k, true),
                _ => return Err(Error::Config("give exactly one of --c and --k".into())),
            };
            let req = TrajectoryRequest {
                arch,
                c,
                k_scaling,
                seed: seed.unwrap_or(m.seeds[0]),
                steps,
            };
            let dir = OutputDir::new(output_root(out.out.as_ref(), &m), out.force);
            let path = cmd_trajectory(&m, &req, &dir)?;
            emit(&format!("{}\n", path.display()));
            Ok(EXIT_OK)
        }
        Command::PhaseDiagram { sweep, out } => {
            let m = sweep.resolve()?;
            let dir = OutputDir::new(output_root(out.out.as_ref(), &m), out.force);
            let path = cmd_phase_diagram(&m, &dir, out.workers)?;
            emit(&format!("{}\n", path.display()));
            Ok(EXIT_OK)
        }
        Command::Saturation { sweep, out } => {
            let m = sweep.resolve()?;
            let dir = OutputDir::new(output_root(out.out.as_ref(), &m), out.force);
            let path = cmd_saturation(&m, &dir, out.workers)?;
            emit(&format!("{}\n", path.display()));
            Ok(EXIT_OK)
        }
        Command::UvValidate {
            widths,
            samples,
            seed,
            ks,
            out,
            force,
            workers,
            corrupt_m2,
        } => {
            let opts = UvValidateOptions {
                widths,
                samples,
                seed,
                ks,
                m2_factor: corrupt_m2,
            };
            let dir = out
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
                .map(|p| OutputDir::new(p, force));
            let report = cmd_uv_validate(&opts, dir.as_ref(), workers)?;
            emit(&report.to_text());
            Ok(if report.passed() {
                EXIT_OK
            } else {
                EXIT_ACCEPTANCE
            })
        }
        Command::Render { dir } => {
            for p in cmd_render(&dir)? {
                emit(&format!("{}\n", p.display()));
            }
            Ok(EXIT_OK)
        }
        Command::Manifest { sweep } => {
            let m = sweep.resolve()?;
            emit(&format!("{}\n", serde_json::to_string_pretty(&m)?));
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn seed_lists_and_ranges() {
        let toks: Vec<String> = ["3", "0..2"].iter().map(|s| s.to_string()).collect();
        assert_eq!(parse_seeds(&toks).unwrap(), vec![3, 0, 1]);
        assert!(parse_seeds(&["x".to_string()]).is_err());
    }

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::try_parse_from([
            "sharpscope",
            "phase-diagram",
            "--arch",
            "2x8,4x8",
            "--grid-xmax",
            "3",
            "--seeds",
            "0..3",
            "--K",
            "1e4",
        ])
        .unwrap();
        match cli.command {
            Command::PhaseDiagram { sweep, out } => {
                let m = sweep.resolve().unwrap();
                assert_eq!(m.archs.len(), 2);
                assert_eq!(m.grid.x_max, 3.0);
                assert_eq!(m.seeds, vec![0, 1, 2]);
                assert_eq!(m.divergence_k, 1e4);
                assert_eq!(out.workers, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_and_duplicate_seeds_are_validation_errors() {
        let args = SweepArgs {
            seeds: vec!["1".into(), "1".into()],
            ..Default::default()
        };
        let e = args.resolve().unwrap_err();
        assert_eq!(exit_code(&e), EXIT_VALIDATION);
    }

    #[test]
    fn uv_arch_selects_uv_data() {
        let args = SweepArgs {
            archs: vec!["uv:4".into(), "uv:8".into()],
            ..Default::default()
        };
        assert_eq!(args.resolve().unwrap().dataset, DatasetSpec::Uv);
    }
}
