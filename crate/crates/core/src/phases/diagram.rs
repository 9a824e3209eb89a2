use serde::{Deserialize, Serialize};

use super::scan::CriticalConstants;
use crate::numkit::{mean, polyfit, polyval, quantile};
use crate::{Error, Result};

pub const CONSTANT_NAMES: [&str; 4] = ["c_loss", "c_sharp", "c_max", "c_barrier"];

/// All seeds of one architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub depth: usize,
    pub width: usize,
    /// Abscissa of the diagram: `d/w`, or `1/w` for the `uv` family.
    pub ratio: f64,
    pub runs: Vec<CriticalConstants>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantStats {
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
    /// Seeds where the constant exists.
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramRow {
    pub depth: usize,
    pub width: usize,
    pub ratio: f64,
    pub seeds: usize,
    /// In [`CONSTANT_NAMES`] order.
    pub stats: Vec<Option<ConstantStats>>,
    /// Too few seeds, or quartiles that do not bracket the mean; flagged
    /// rows are left out of the fits.
    pub flagged: bool,
}

/// `mean constant ≈ Σ coeffs[i] · ratio^i` over unflagged rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl ConstantFit {
    pub fn eval(&self, ratio: f64) -> f64 {
        polyval(&self.coeffs, ratio)
    }

    /// Whether the fitted curve is non-decreasing on its sampled range.
    pub fn non_decreasing(&self) -> bool {
        let n = 200;
        let xs: Vec<f64> = (0..=n)
            .map(|i| self.ratio_min + (self.ratio_max - self.ratio_min) * i as f64 / n as f64)
            .collect();
        xs.windows(2)
            .all(|p| polyval(&self.coeffs, p[1]) >= polyval(&self.coeffs, p[0]) - 1e-12)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub rows: Vec<PhaseDiagramRow>,
    pub fits: Vec<ConstantFit>,
}

pub const MIN_SEEDS: usize = 3;

fn stats(values: &[f64]) -> Option<ConstantStats> {
    Some(ConstantStats {
        mean: mean(values)?,
        q25: quantile(values, 0.25)?,
        q75: quantile(values, 0.75)?,
        n: values.len(),
    })
}

pub fn assemble_phase_diagram(cells: &[PhaseCell]) -> Result<PhaseDiagram> {
    let mut rows: Vec<PhaseDiagramRow> = cells
        .iter()
        .map(|cell| {
            let stats: Vec<Option<ConstantStats>> = (0..CONSTANT_NAMES.len())
                .map(|j| {
                    let vals: Vec<f64> = cell.runs.iter().filter_map(|r| r.named()[j].1).collect();
                    stats(&vals)
                })
                .collect();
            let bracket_ok = stats
                .iter()
                .flatten()
                .all(|s| s.q25 <= s.mean + 1e-12 && s.mean <= s.q75 + 1e-12);
            PhaseDiagramRow {
                depth: cell.depth,
                width: cell.width,
                ratio: cell.ratio,
                seeds: cell.runs.len(),
                flagged: cell.runs.len() < MIN_SEEDS || !bracket_ok,
                stats,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then(a.depth.cmp(&b.depth)));

    let mut distinct: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Contract(
            "a phase diagram needs at least 2 distinct ratios".into(),
        ));
    }

    let mut fits = Vec::new();
    for (j, name) in CONSTANT_NAMES.iter().enumerate() {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| !r.flagged)
            .filter_map(|r| {
                r.stats[j]
                    .filter(|s| s.n >= MIN_SEEDS && s.mean > 0.0)
                    .map(|s| (r.ratio, s.mean))
            })
            .unzip();
        let mut uniq = xs.clone();
        uniq.sort_by(f64::total_cmp);
        uniq.dedup();
        if uniq.len() < 2 {
            continue;
        }
        let degree = (uniq.len() - 1).min(2);
        let coeffs = polyfit(&xs, &ys, degree)?;
        fits.push(ConstantFit {
            name: name.to_string(),
            coeffs,
            ratio_min: uniq[0],
            ratio_max: *uniq.last().expect("non-empty"),
        });
    }
    Ok(PhaseDiagram { rows, fits })
}
