//! Compiles and runs a small C program against the generated header and
//! the static library. Skipped when no C compiler is available.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "sharpscope.h"

int main(void) {
    SsDataset *ds = NULL;
    if (ss_dataset_synthetic(64, 4, 2, 1, &ds) != SS_STATUS_OK) return 1;
    if (ss_dataset_len(ds) != 64) return 2;
    SsTrainOptions o = ss_train_options_default();
    o.depth = 2; o.width = 8; o.steps = 3; o.batch_size = 16; o.probe_m = 32;
    SsTrajectory *tr = NULL;
    if (ss_train(ds, &o, &tr) != SS_STATUS_OK) return 3;
    SsStepRecord r;
    if (ss_trajectory_get(tr, 3, &r) != SS_STATUS_OK || r.t != 3) return 4;
    if (ss_trajectory_get(tr, 99, &r) != SS_STATUS_OUT_OF_RANGE) return 5;
    char msg[256];
    ss_last_error_message(msg, sizeof msg);
    printf("%s|%.6f\n", msg, ss_trajectory_lambda0(tr));
    ss_trajectory_free(tr);
    ss_dataset_free(ds);
    return 0;
}
"#;

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    // target/<profile>/deps/<test> -> target/<profile>
    let dir = exe.parent()?.parent()?;
    let lib = dir.join("libsharpscope_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = static_lib() else {
        eprintln!("skipping: static library not built");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let exe = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let stdout = String::from_utf8(run.stdout).unwrap();
    let (msg, lambda0) = stdout.trim().split_once('|').unwrap();
    assert!(msg.contains("out of range"), "{msg}");
    assert!(lambda0.parse::<f64>().unwrap() > 0.0);
}
