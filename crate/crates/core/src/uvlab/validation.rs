//! Closed forms against Monte Carlo, as a table of z-scores.

use serde::{Deserialize, Serialize};

use super::closed_form::{
    uv_expected_first_step_loss_ratio, uv_expected_frobenius_change, uv_moments,
};
use super::montecarlo::{
    mc_estimate, mc_first_step_loss_ratio, mc_frobenius_change, mc_moments, Estimate,
};
use crate::numkit::derive_seed;
use crate::{Error, Result};

/// Rows whose `|z|` exceeds this fail the validation.
pub const Z_LIMIT: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UvValidateOptions {
    pub widths: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub ks: Vec<f64>,
    /// Multiplies the closed-form `m2` constant; anything but 1 corrupts the
    /// formula so the harness can be shown to notice.
    pub m2_factor: f64,
}

impl Default for UvValidateOptions {
    fn default() -> Self {
        Self {
            widths: vec![1, 2, 4, 8, 16],
            samples: 1_000_000,
            seed: 0,
            ks: vec![0.5, 1.0, 2.0, 3.0, 3.9],
            m2_factor: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub formula: String,
    pub w: usize,
    pub k: Option<f64>,
    pub closed_form: f64,
    pub monte_carlo: f64,
    pub se: f64,
    pub z: f64,
    /// Informational rows are reported but do not affect the verdict.
    pub gated: bool,
}

impl ValidationRow {
    fn new(
        formula: &str,
        w: usize,
        k: Option<f64>,
        closed_form: f64,
        est: Estimate,
        gated: bool,
    ) -> Self {
        Self {
            formula: formula.into(),
            w,
            k,
            closed_form,
            monte_carlo: est.mean,
            se: est.se,
            z: est.z_score(closed_form),
            gated,
        }
    }

    pub fn passed(&self) -> bool {
        !self.gated || self.z.abs() <= Z_LIMIT
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UvValidationReport {
    pub rows: Vec<ValidationRow>,
}

impl UvValidationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ValidationRow::passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("formula,w,k,closed_form,monte_carlo,se,z,gated,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.formula,
                r.w,
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                r.closed_form,
                r.monte_carlo,
                r.se,
                r.z,
                r.gated,
                r.passed()
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<22} {:>4} {:>5} {:>14} {:>14} {:>8}  {}\n",
            "formula", "w", "k", "closed form", "monte carlo", "z", "result"
        );
        for r in &self.rows {
            let verdict = match (r.gated, r.passed()) {
                (false, _) => "info",
                (true, true) => "pass",
                (true, false) => "FAIL",
            };
            out.push_str(&format!(
                "{:<22} {:>4} {:>5} {:>14.8} {:>14.8} {:>8.3}  {}\n",
                r.formula,
                r.w,
                r.k.map(|k| format!("{k}")).unwrap_or_else(|| "-".into()),
                r.closed_form,
                r.monte_carlo,
                r.z,
                verdict
            ));
        }
        out
    }
}

/// Every closed form of the `uv` model against simulation.
///
/// The expected Frobenius change rows are informational: the closed form
/// factorizes `⟨L₁ − L₀⟩` as `(⟨L₁/L₀⟩ − 1)⟨L₀⟩`, ignoring the correlation
/// between `L₀` and the ratio, and the z-score measures that gap.
pub fn run_uv_validation(opts: &UvValidateOptions) -> Result<UvValidationReport> {
    if opts.samples < 10_000 {
        return Err(Error::Config(format!(
            "need at least 10^4 samples, got {}",
            opts.samples
        )));
    }
    if opts.widths.is_empty() || opts.widths.contains(&0) {
        return Err(Error::Config(
            "widths must be a non-empty list of positive integers".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, &w) in opts.widths.iter().enumerate() {
        let seed = derive_seed(opts.seed, i as u64);
        let init = mc_estimate(w, opts.samples, derive_seed(seed, 0), 3, |s, out| {
            let f = s.f();
            out[0] = f;
            out[1] = f * f;
            out[2] = s.trace_h();
        });
        rows.push(ValidationRow::new("<f0>", w, None, 0.0, init[0], true));
        rows.push(ValidationRow::new("<f0^2>", w, None, 1.0, init[1], true));
        rows.push(ValidationRow::new("<TrH0>", w, None, 2.0, init[2], true));

        let m = uv_moments(w);
        let mc = mc_moments(w, opts.samples, derive_seed(seed, 1));
        rows.push(ValidationRow::new(
            "m2=<f0^2/TrH0^2>",
            w,
            None,
            m.m2 * opts.m2_factor,
            mc[0],
            true,
        ));
        rows.push(ValidationRow::new(
            "m4=<f0^4/TrH0^4>",
            w,
            None,
            m.m4,
            mc[1],
            true,
        ));
        rows.push(ValidationRow::new(
            "m42=<f0^4/TrH0^2>",
            w,
            None,
            m.m42,
            mc[2],
            true,
        ));

        let ratios = mc_first_step_loss_ratio(&opts.ks, w, opts.samples, derive_seed(seed, 2));
        for (&k, est) in opts.ks.iter().zip(ratios) {
            let cf = uv_expected_first_step_loss_ratio(k, w);
            rows.push(ValidationRow::new("<L1/L0>", w, Some(k), cf, est, true));
        }
        for k in [1.0, 3.0] {
            let est = mc_frobenius_change(k, w, opts.samples, derive_seed(seed, 3));
            rows.push(ValidationRow::new(
                "<dFrob^2>",
                w,
                Some(k),
                uv_expected_frobenius_change(k, w),
                est,
                false,
            ));
        }
    }
    Ok(UvValidationReport { rows })
}
