//! End-to-end behaviour of the `sharpscope` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sharpscope"));
    cmd.env_remove("SHARPSCOPE_OUT");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SMALL_SWEEP: &[&str] = &[
    "--arch",
    "2x8,2x16",
    "--data",
    "synthetic:256",
    "--seeds",
    "0..3",
    "--batch-size",
    "64",
    "--probe-m",
    "128",
    "--grid-xmin",
    "0",
    "--grid-step",
    "0.5",
];

fn files_with_ext(root: &Path, ext: &str) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut found = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == ext) {
                found.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    found
}

fn phase_diagram(out: &Path, workers: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "phase-diagram",
        "--out",
        out.to_str().unwrap(),
        "--workers",
        workers,
    ];
    args.extend_from_slice(SMALL_SWEEP);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn phase_diagram_is_worker_count_independent() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = phase_diagram(a.path(), "1", &[]);
    assert_eq!(code(&one), 0, "{}", String::from_utf8_lossy(&one.stderr));
    let eight = phase_diagram(b.path(), "8", &[]);
    assert_eq!(
        code(&eight),
        0,
        "{}",
        String::from_utf8_lossy(&eight.stderr)
    );
    let (ca, cb) = (
        files_with_ext(a.path(), "csv"),
        files_with_ext(b.path(), "csv"),
    );
    assert!(ca.len() >= 3);
    assert_eq!(ca, cb);
}

#[test]
fn collisions_are_refused_without_force() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&phase_diagram(dir.path(), "1", &[])), 0);
    // Same manifest again is a no-op.
    assert_eq!(code(&phase_diagram(dir.path(), "1", &[])), 0);
    let before = files_with_ext(dir.path(), "csv");
    let clash = phase_diagram(dir.path(), "1", &["--t1", "5"]);
    assert_eq!(code(&clash), 2);
    assert!(String::from_utf8_lossy(&clash.stderr).contains("refusing to overwrite"));
    assert_eq!(files_with_ext(dir.path(), "csv"), before);
    assert_eq!(
        code(&phase_diagram(dir.path(), "1", &["--t1", "5", "--force"])),
        0
    );
    assert_ne!(files_with_ext(dir.path(), "csv"), before);
}

#[test]
fn svgs_are_regenerated_exactly_from_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&phase_diagram(dir.path(), "1", &[])), 0);
    let traj = run(&[
        "trajectory",
        "--out",
        out,
        "--arch",
        "uv:4",
        "--k",
        "3",
        "--steps",
        "50",
    ]);
    assert_eq!(code(&traj), 0, "{}", String::from_utf8_lossy(&traj.stderr));
    let sat = run(&[
        "saturation",
        "--out",
        out,
        "--arch",
        "uv:2,uv:8",
        "--seeds",
        "0..20",
        "--grid-xmin",
        "-1",
        "--grid-xmax",
        "1.8",
        "--tau",
        "100",
        "--half-window",
        "0",
    ]);
    assert_eq!(code(&sat), 0, "{}", String::from_utf8_lossy(&sat.stderr));

    let svgs = files_with_ext(dir.path(), "svg");
    assert_eq!(svgs.len(), 3);
    for p in svgs.keys() {
        std::fs::remove_file(dir.path().join(p)).unwrap();
    }
    assert_eq!(code(&run(&["render", out])), 0);
    assert_eq!(files_with_ext(dir.path(), "svg"), svgs);
}

#[test]
fn uv_trajectory_at_k3_spikes_then_decays() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "trajectory",
        "--out",
        dir.path().to_str().unwrap(),
        "--arch",
        "uv:64",
        "--k",
        "3",
        "--steps",
        "200",
    ]);
    assert_eq!(code(&out), 0);
    let run_dir = PathBuf::from(String::from_utf8(out.stdout).unwrap().trim());
    let csv = std::fs::read_to_string(run_dir.join("trajectory.csv")).unwrap();
    let (_, records) = sharpscope::training::Trajectory::records_from_csv(&csv).unwrap();
    let losses: Vec<f64> = records.iter().map(|r| r.loss).collect();
    let peak = losses.iter().cloned().fold(0.0, f64::max);
    assert!(peak > losses[0], "no catapult spike: {:?}", &losses[..5]);
    assert!(*losses.last().unwrap() < 1e-6 * losses[0]);
}

#[test]
fn out_env_var_sets_the_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("SHARPSCOPE_OUT", dir.path())
        .args(["trajectory", "--arch", "uv:2", "--k", "1", "--steps", "5"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with(dir.path().to_str().unwrap()));
}

#[test]
fn empty_seed_list_fails_validation_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    let printed = run(&["manifest", "--arch", "2x8,4x8"]);
    assert_eq!(code(&printed), 0);
    let mut json: serde_json::Value = serde_json::from_slice(&printed.stdout).unwrap();
    json["seeds"] = serde_json::json!([]);
    std::fs::write(&manifest, json.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let started = Instant::now();
    let out = run(&[
        "phase-diagram",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(started.elapsed().as_secs() < 5);
    assert!(!out_dir.exists());
}

#[test]
fn uv_validate_detects_a_corrupted_constant() {
    let out = run(&[
        "uv-validate",
        "--widths",
        "1,4",
        "--samples",
        "100000",
        "--corrupt-m2",
        "1.2",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stdout));
    let ok = run(&["uv-validate", "--widths", "1,4", "--samples", "100000"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
}

#[test]
fn uv_validate_minimal_run_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = run(&[
        "uv-validate",
        "--widths",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let secs = started.elapsed().as_secs_f64();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(secs < 10.0, "took {secs:.1} s");
    let csv = std::fs::read_to_string(dir.path().join("uv-validate/uv_validate.csv")).unwrap();
    assert!(csv.lines().count() > 5);
}

#[test]
fn usage_errors_exit_with_validation_code() {
    assert_eq!(code(&run(&["trajectory", "--arch", "0x8", "--c", "1"])), 2);
    assert_eq!(code(&run(&["uv-validate", "--samples", "10"])), 2);
    assert_eq!(code(&run(&["phase-diagram", "--arch", "2x8"])), 2);
}
