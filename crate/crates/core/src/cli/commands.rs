//! Subcommand implementations. Computation runs on a worker pool; only the
//! calling thread touches the output directory.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{ArchSpec, SweepManifest};
use super::output::{opt, OutputDir, Table};
use super::render::{render_phase_diagram, render_saturation, render_trajectory};
use crate::data::Dataset;
use crate::numkit::SavGolParams;
use crate::phases::{
    assemble_phase_diagram, extract_c_crit, saturation_sharpness, scan_critical_constants,
    segment_regimes, CriticalConstants, PhaseCell, RegimeParams, Regimes, SaturationCurve,
    CONSTANT_NAMES,
};
use crate::provenance::content_hash;
use crate::training::{
    sgd_trajectory, Initialization, LrRule, ProbeSchedule, SharpnessMethod, TrainConfig,
};
use crate::uvlab::{
    run_uv_validation, uv_saturation_sharpness, UvValidateOptions, UvValidationReport,
};
use crate::{Error, Result};

pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

static QUIET: AtomicBool = AtomicBool::new(false);

/// Silences the per-job progress lines written to stderr.
pub fn set_quiet(quiet: bool) {
    QUIET.store(quiet, Ordering::Relaxed);
}

fn progress(done: &AtomicUsize, total: usize, what: &str) {
    let k = done.fetch_add(1, Ordering::Relaxed) + 1;
    if !QUIET.load(Ordering::Relaxed) {
        eprintln!("[{k}/{total}] {what}");
    }
}

fn manifest_json(m: &SweepManifest) -> Result<String> {
    #[derive(Serialize)]
    struct Stamped<'a> {
        manifest_hash: String,
        #[serde(flatten)]
        manifest: &'a SweepManifest,
    }
    Ok(serde_json::to_string_pretty(&Stamped {
        manifest_hash: m.hash(),
        manifest: m,
    })? + "\n")
}

/// Sidecar of a single trajectory run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub manifest_hash: String,
    pub arch: ArchSpec,
    /// `c` (or `k` for trace-scaled `uv` runs).
    pub c: f64,
    pub scaling: String,
    pub seed: u64,
    pub steps: usize,
    pub eta: f64,
    pub lambda0: f64,
    pub diverged_at: Option<usize>,
    pub regimes: Regimes,
    pub config_hash: String,
}

pub struct TrajectoryRequest {
    pub arch: ArchSpec,
    pub c: f64,
    /// Trace-scaled learning rate (`uv` only): `eta = k / Tr H_0`.
    pub k_scaling: bool,
    pub seed: u64,
    pub steps: usize,
}

pub fn trajectory_config(
    m: &SweepManifest,
    ds: &Dataset,
    req: &TrajectoryRequest,
) -> Result<TrainConfig> {
    if req.k_scaling && !req.arch.is_uv() {
        return Err(Error::Config(
            "trace scaling (--k) applies to the uv model only".into(),
        ));
    }
    let mut scan = m.scan_config(&req.arch, ds);
    if req.arch.is_uv() {
        scan.probe.method = if req.k_scaling {
            SharpnessMethod::UvTrace
        } else {
            SharpnessMethod::UvTopEigen
        };
        scan.probe.schedule = ProbeSchedule::EveryStep;
    } else {
        scan.probe.schedule = ProbeSchedule::Epochs {
            steps_per_epoch: ds.len().div_ceil(scan.batch_size),
        };
    }
    let cfg = scan.train_config(req.seed, LrRule::C(req.c), req.steps);
    cfg.validate(ds)?;
    Ok(cfg)
}

pub fn cmd_trajectory(
    m: &SweepManifest,
    req: &TrajectoryRequest,
    out: &OutputDir,
) -> Result<PathBuf> {
    m.validate()?;
    if !(req.c.is_finite() && req.c > 0.0) {
        return Err(Error::Config(format!("c must be positive, got {}", req.c)));
    }
    let hash = m.hash();
    let rel = format!(
        "trajectory/{}-{}{}-s{}",
        req.arch.label(),
        if req.k_scaling { "k" } else { "c" },
        req.c,
        req.seed
    );
    let dir = OutputDir::new(out.path(&rel), out.force);
    dir.check_manifest("manifest.json", &hash)?;
    let ds = m.dataset.load()?;
    let cfg = trajectory_config(m, &ds, req)?;
    let traj = sgd_trajectory(&cfg, &ds)?;
    let info = RunInfo {
        manifest_hash: hash.clone(),
        arch: req.arch,
        c: req.c,
        scaling: if req.k_scaling { "k" } else { "c" }.into(),
        seed: req.seed,
        steps: req.steps,
        eta: traj.eta,
        lambda0: traj.lambda0,
        diverged_at: traj.diverged_at,
        regimes: segment_regimes(&traj, &RegimeParams::default()),
        config_hash: traj.config_hash.clone(),
    };
    dir.write("manifest.json", &manifest_json(m)?)?;
    let csv = traj.to_csv(&hash);
    dir.write("trajectory.csv", &csv)?;
    dir.write("run.json", &(serde_json::to_string_pretty(&info)? + "\n"))?;
    dir.write("trajectory.svg", &render_trajectory(&csv, &info)?)?;
    Ok(dir.root)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellFailure {
    pub arch: ArchSpec,
    pub seed: u64,
    pub error: String,
}

/// Critical constants for every `(architecture, seed)`, in manifest order.
pub fn run_scans(
    m: &SweepManifest,
    ds: &Dataset,
    pool: &rayon::ThreadPool,
) -> Result<Vec<(ArchSpec, u64, Result<CriticalConstants>)>> {
    let grid = m.grid.grid()?;
    let jobs: Vec<(ArchSpec, u64)> = m
        .archs
        .iter()
        .flat_map(|a| m.seeds.iter().map(move |&s| (*a, s)))
        .collect();
    let done = AtomicUsize::new(0);
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|&(arch, seed)| {
                let r = scan_critical_constants(&m.scan_config(&arch, ds), ds, &grid, seed);
                progress(
                    &done,
                    jobs.len(),
                    &format!("scan {} seed {seed}", arch.label()),
                );
                (arch, seed, r)
            })
            .collect()
    }))
}

pub const CONSTANTS_HEADER: [&str; 14] = [
    "arch",
    "depth",
    "width",
    "ratio",
    "seed",
    "c_loss",
    "c_sharp",
    "c_max",
    "c_barrier",
    "lambda0",
    "loss0",
    "degenerate",
    "ordering",
    "barrier_ordering",
];

pub fn constants_table(hash: &str, results: &[(ArchSpec, CriticalConstants)]) -> Table {
    let mut t = Table::new(hash, &CONSTANTS_HEADER);
    let flag = |b: Option<bool>| b.map(|b| b.to_string()).unwrap_or_default();
    for (arch, r) in results {
        t.push(vec![
            arch.label(),
            arch.depth().to_string(),
            arch.width().to_string(),
            arch.ratio().to_string(),
            r.seed.to_string(),
            opt(r.c_loss),
            opt(r.c_sharp),
            opt(r.c_max),
            opt(r.c_barrier),
            r.lambda0.to_string(),
            r.loss0.to_string(),
            r.degenerate.to_string(),
            flag(r.ordering_holds()),
            flag(r.barrier_ordering_holds()),
        ]);
    }
    t
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseDiagramSidecar {
    pub manifest_hash: String,
    /// `c` for sharpness-scaled rates, `k` for the trace-scaled `uv` model.
    pub scaling: String,
    pub diagram: crate::phases::PhaseDiagram,
    pub failures: Vec<CellFailure>,
}

pub fn cmd_phase_diagram(m: &SweepManifest, out: &OutputDir, workers: usize) -> Result<PathBuf> {
    m.validate()?;
    if m.archs.len() < 2 {
        return Err(Error::Config(
            "a phase diagram needs at least 2 architectures".into(),
        ));
    }
    let hash = m.hash();
    let dir = OutputDir::new(out.path("phase-diagram"), out.force);
    dir.check_manifest("manifest.json", &hash)?;
    let ds = m.dataset.load()?;
    let pool = worker_pool(workers)?;
    let results = run_scans(m, &ds, &pool)?;

    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (arch, seed, r) in results {
        match r {
            Ok(c) => ok.push((arch, c)),
            Err(e) => failures.push(CellFailure {
                arch,
                seed,
                error: e.to_string(),
            }),
        }
    }
    let cells: Vec<PhaseCell> = m
        .archs
        .iter()
        .map(|a| PhaseCell {
            depth: a.depth(),
            width: a.width(),
            ratio: a.ratio(),
            runs: ok
                .iter()
                .filter(|(b, _)| b == a)
                .map(|(_, c)| c.clone())
                .collect(),
        })
        .filter(|c| !c.runs.is_empty())
        .collect();
    let diagram = assemble_phase_diagram(&cells)?;

    let constants = constants_table(&hash, &ok).to_csv();
    let rows = phase_rows_table(&hash, &diagram).to_csv();
    let fits = fits_table(&hash, &diagram).to_csv();
    let sidecar = PhaseDiagramSidecar {
        manifest_hash: hash.clone(),
        scaling: if m.is_uv() { "k" } else { "c" }.into(),
        diagram,
        failures,
    };
    dir.write("manifest.json", &manifest_json(m)?)?;
    dir.write("constants.csv", &constants)?;
    dir.write("phase_diagram.csv", &rows)?;
    dir.write("fits.csv", &fits)?;
    dir.write(
        "phase_diagram.json",
        &(serde_json::to_string_pretty(&sidecar)? + "\n"),
    )?;
    dir.write(
        "phase_diagram.svg",
        &render_phase_diagram(&rows, &fits, &sidecar.scaling)?,
    )?;
    Ok(dir.root)
}

pub fn phase_rows_table(hash: &str, d: &crate::phases::PhaseDiagram) -> Table {
    let mut header = vec!["depth", "width", "ratio", "seeds", "flagged"];
    let names: Vec<String> = CONSTANT_NAMES
        .iter()
        .flat_map(|n| ["mean", "q25", "q75", "n"].map(|s| format!("{n}_{s}")))
        .collect();
    header.extend(names.iter().map(String::as_str));
    let mut t = Table::new(hash, &header);
    for r in &d.rows {
        let mut row = vec![
            r.depth.to_string(),
            r.width.to_string(),
            r.ratio.to_string(),
            r.seeds.to_string(),
            r.flagged.to_string(),
        ];
        for s in &r.stats {
            match s {
                Some(s) => row.extend([
                    s.mean.to_string(),
                    s.q25.to_string(),
                    s.q75.to_string(),
                    s.n.to_string(),
                ]),
                None => row.extend([String::new(), String::new(), String::new(), "0".into()]),
            }
        }
        t.push(row);
    }
    t
}

pub fn fits_table(hash: &str, d: &crate::phases::PhaseDiagram) -> Table {
    let mut t = Table::new(
        hash,
        &[
            "name",
            "coeff0",
            "coeff1",
            "coeff2",
            "ratio_min",
            "ratio_max",
        ],
    );
    for f in &d.fits {
        let c = |i: usize| f.coeffs.get(i).copied().unwrap_or(0.0).to_string();
        t.push(vec![
            f.name.clone(),
            c(0),
            c(1),
            c(2),
            f.ratio_min.to_string(),
            f.ratio_max.to_string(),
        ]);
    }
    t
}

/// Normalized saturation sharpness of every `(architecture, seed)` over the
/// grid points where the averaging window fits.
pub fn run_saturation(
    m: &SweepManifest,
    ds: &Dataset,
    pool: &rayon::ThreadPool,
) -> Result<Vec<(ArchSpec, SaturationCurve)>> {
    let grid = m.grid.grid()?;
    let protocol = m.saturation;
    let cs: Vec<f64> = grid
        .values()
        .into_iter()
        .filter(|&c| protocol.window(c).is_ok())
        .collect();
    if cs.is_empty() {
        return Err(Error::Config(
            "no grid point leaves room for the saturation window".into(),
        ));
    }
    let jobs: Vec<(ArchSpec, u64)> = m
        .archs
        .iter()
        .flat_map(|a| m.seeds.iter().map(move |&s| (*a, s)))
        .collect();
    let done = AtomicUsize::new(0);
    let per_seed: Vec<Result<Vec<Option<f64>>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(arch, seed)| {
                let r = match arch {
                    ArchSpec::Uv { width } => cs
                        .iter()
                        .map(|&c| {
                            uv_saturation_sharpness(width, c, seed, &protocol, m.divergence_k)
                        })
                        .collect(),
                    ArchSpec::Fcn { .. } => {
                        let scan = m.scan_config(&arch, ds);
                        let tcfg = scan.train_config(seed, LrRule::C(1.0), 1);
                        tcfg.validate(ds)
                            .and_then(|_| Initialization::new(&tcfg, ds))
                            .and_then(|init| {
                                cs.iter()
                                    .map(|&c| saturation_sharpness(&scan, ds, &init, c, &protocol))
                                    .collect()
                            })
                    }
                };
                progress(
                    &done,
                    jobs.len(),
                    &format!("saturation {} seed {seed}", arch.label()),
                );
                r
            })
            .collect()
    });
    let per_seed: Vec<Vec<Option<f64>>> = per_seed.into_iter().collect::<Result<_>>()?;
    let n = m.seeds.len();
    Ok(m.archs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let rows = &per_seed[i * n..(i + 1) * n];
            let values: Vec<Vec<Option<f64>>> = (0..cs.len())
                .map(|k| rows.iter().map(|r| r[k]).collect())
                .collect();
            (*a, SaturationCurve::from_samples(&cs, &values, protocol))
        })
        .collect())
}

pub fn cmd_saturation(m: &SweepManifest, out: &OutputDir, workers: usize) -> Result<PathBuf> {
    m.validate()?;
    let hash = m.hash();
    let dir = OutputDir::new(out.path("saturation"), out.force);
    dir.check_manifest("manifest.json", &hash)?;
    let ds = m.dataset.load()?;
    let pool = worker_pool(workers)?;
    let curves = run_saturation(m, &ds, &pool)?;

    let filter = SavGolParams::default();
    let mut points = Table::new(
        &hash,
        &["arch", "c", "mean", "std", "count", "chi", "chi_prime"],
    );
    let mut crit = Table::new(&hash, &["arch", "c_crit", "error"]);
    for (arch, curve) in &curves {
        let chi = extract_c_crit(curve, filter);
        for (k, &c) in curve.cs.iter().enumerate() {
            let (x, xp) = match &chi {
                Ok(ch) => (Some(ch.chi[k]), Some(ch.chi_prime[k])),
                Err(_) => (None, None),
            };
            points.push(vec![
                arch.label(),
                c.to_string(),
                curve.mean[k].to_string(),
                curve.std[k].to_string(),
                curve.counts[k].to_string(),
                opt(x),
                opt(xp),
            ]);
        }
        match &chi {
            Ok(ch) => crit.push(vec![arch.label(), ch.c_crit.to_string(), String::new()]),
            Err(e) => crit.push(vec![
                arch.label(),
                String::new(),
                e.to_string().replace(',', ";"),
            ]),
        }
    }
    let points = points.to_csv();
    let crit = crit.to_csv();
    dir.write("manifest.json", &manifest_json(m)?)?;
    dir.write("saturation.csv", &points)?;
    dir.write("c_crit.csv", &crit)?;
    dir.write("saturation.svg", &render_saturation(&points, &crit)?)?;
    Ok(dir.root)
}

/// Runs the `uv` validator and writes its table; the report decides the
/// exit status.
pub fn cmd_uv_validate(
    opts: &UvValidateOptions,
    out: Option<&OutputDir>,
    workers: usize,
) -> Result<UvValidationReport> {
    let pool = worker_pool(workers)?;
    let report = pool.install(|| run_uv_validation(opts))?;
    if let Some(out) = out {
        let hash = content_hash(opts);
        let dir = OutputDir::new(out.path("uv-validate"), out.force);
        dir.write(
            "uv_validate.csv",
            &format!("# manifest={hash}\n{}", report.to_csv()),
        )?;
        dir.write("uv_validate.txt", &report.to_text())?;
    }
    Ok(report)
}

/// Regenerates every SVG under `root` from the CSV and JSON files next to it.
pub fn cmd_render(root: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(&dir, err)))
            .collect::<Result<_>>()?;
        entries.sort();
        for p in entries.iter().filter(|p| p.is_dir()) {
            stack.push(p.clone());
        }
        let out = OutputDir::new(&dir, true);
        let has = |name: &str| dir.join(name).is_file();
        if has("trajectory.csv") && has("run.json") {
            let info: RunInfo = serde_json::from_str(&out.read("run.json")?)?;
            let svg = render_trajectory(&out.read("trajectory.csv")?, &info)?;
            written.push(out.write("trajectory.svg", &svg)?);
        }
        if has("phase_diagram.csv") && has("fits.csv") {
            let scaling = if has("phase_diagram.json") {
                let v: serde_json::Value = serde_json::from_str(&out.read("phase_diagram.json")?)?;
                v.get("scaling")
                    .and_then(|s| s.as_str())
                    .unwrap_or("c")
                    .to_string()
            } else {
                "c".into()
            };
            let svg = render_phase_diagram(
                &out.read("phase_diagram.csv")?,
                &out.read("fits.csv")?,
                &scaling,
            )?;
            written.push(out.write("phase_diagram.svg", &svg)?);
        }
        if has("saturation.csv") && has("c_crit.csv") {
            let svg = render_saturation(&out.read("saturation.csv")?, &out.read("c_crit.csv")?)?;
            written.push(out.write("saturation.svg", &svg)?);
        }
    }
    Ok(written)
}
