use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub sharpness: Option<f64>,
}

/// Step-indexed record of one `(config, c, seed)` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub lambda0: f64,
    pub eta: f64,
    pub c: f64,
    pub diverged_at: Option<usize>,
    pub seed: u64,
    pub config_hash: String,
}

impl Trajectory {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// `(t, sharpness)` for every probed step.
    pub fn sharpness_points(&self) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.sharpness.map(|s| (r.t, s)))
            .collect()
    }

    pub fn record_at(&self, t: usize) -> Option<&StepRecord> {
        self.records
            .get(t)
            .filter(|r| r.t == t)
            .or_else(|| self.records.iter().find(|r| r.t == t))
    }

    /// CSV with a `# manifest=<hash>` first line and columns
    /// `t,loss,accuracy,sharpness` (empty sharpness on unprobed steps).
    pub fn to_csv(&self, manifest_hash: &str) -> String {
        let mut out = format!("# manifest={manifest_hash}\nt,loss,accuracy,sharpness\n");
        for r in &self.records {
            let s = r.sharpness.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.t, r.loss, r.accuracy, s).expect("writing to a String");
        }
        out
    }

    /// Parses the records written by [`Trajectory::to_csv`], returning the
    /// embedded manifest hash alongside them.
    pub fn records_from_csv(text: &str) -> Result<(String, Vec<StepRecord>)> {
        let mut lines = text.lines();
        let hash = lines
            .next()
            .and_then(|l| l.strip_prefix("# manifest="))
            .ok_or_else(|| Error::Format {
                offset: 0,
                message: "missing manifest line".into(),
            })?
            .to_string();
        let mut offset = text.lines().take(2).map(|l| l.len() + 1).sum::<usize>();
        lines.next();
        let mut records = Vec::new();
        for line in lines {
            let bad = |message: String| Error::Format { offset, message };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad(format!("expected 4 columns, got {}", cols.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            records.push(StepRecord {
                t: cols[0]
                    .parse()
                    .map_err(|e| bad(format!("{:?}: {e}", cols[0])))?,
                loss: num(cols[1])?,
                accuracy: num(cols[2])?,
                sharpness: if cols[3].is_empty() {
                    None
                } else {
                    Some(num(cols[3])?)
                },
            });
            offset += line.len() + 1;
        }
        Ok((hash, records))
    }
}
