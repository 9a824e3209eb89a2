use serde::{Deserialize, Serialize};

use super::scan::ScanConfig;
use crate::data::Dataset;
use crate::numkit::{mean, savitzky_golay, std_dev, SavGolParams};
use crate::training::{Initialization, LrRule, Trainer};
use crate::{Error, Result};

/// When the intermediate-saturation sharpness is read off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TauRule {
    /// `tau = round(product / c)`.
    CTimes {
        product: f64,
    },
    Fixed {
        tau: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationProtocol {
    pub tau: TauRule,
    /// Sharpness is averaged over `t in [tau − h, tau + h]`.
    pub half_window: usize,
}

impl Default for SaturationProtocol {
    fn default() -> Self {
        Self {
            tau: TauRule::CTimes { product: 200.0 },
            half_window: 5,
        }
    }
}

impl SaturationProtocol {
    pub fn tau(&self, c: f64) -> usize {
        match self.tau {
            TauRule::CTimes { product } => (product / c).round() as usize,
            TauRule::Fixed { tau } => tau,
        }
    }

    /// First and last step of the averaging window.
    pub fn window(&self, c: f64) -> Result<(usize, usize)> {
        let tau = self.tau(c);
        if tau < self.half_window + 1 {
            return Err(Error::Contract(format!(
                "tau = {tau} leaves no room for a ±{} window after t = 0",
                self.half_window
            )));
        }
        Ok((tau - self.half_window, tau + self.half_window))
    }
}

/// Mean sharpness over the saturation window divided by `lambda_0`;
/// `None` when the run diverges first.
pub fn saturation_sharpness(
    cfg: &ScanConfig,
    ds: &Dataset,
    init: &Initialization,
    c: f64,
    protocol: &SaturationProtocol,
) -> Result<Option<f64>> {
    let (lo, hi) = protocol.window(c)?;
    let tcfg = cfg.train_config(init.seed, LrRule::C(c), hi);
    let mut trainer = Trainer::new(&tcfg, ds, init)?;
    let mut acc = Vec::with_capacity(hi - lo + 1);
    while trainer.t() < hi {
        match trainer.step() {
            Ok(loss) if loss < cfg.divergence_k => {}
            Ok(_) | Err(Error::Divergence { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
        if trainer.t() >= lo {
            match trainer.sharpness() {
                Ok(s) => acc.push(s),
                Err(Error::Divergence { .. }) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(mean(&acc).map(|m| m / init.lambda0))
}

/// Seed-averaged normalized saturation sharpness over a `c` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationCurve {
    pub cs: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Non-divergent seeds contributing at each `c`.
    pub counts: Vec<usize>,
    pub protocol: SaturationProtocol,
}

impl SaturationCurve {
    /// `values[i]` holds the per-seed normalized sharpness at `cs[i]`
    /// (`None` for divergent runs). Points where every seed diverged are
    /// dropped.
    pub fn from_samples(
        cs: &[f64],
        values: &[Vec<Option<f64>>],
        protocol: SaturationProtocol,
    ) -> Self {
        let mut curve = SaturationCurve {
            cs: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
            counts: Vec::new(),
            protocol,
        };
        for (&c, vals) in cs.iter().zip(values) {
            let ok: Vec<f64> = vals.iter().flatten().copied().collect();
            if let Some(m) = mean(&ok) {
                curve.cs.push(c);
                curve.mean.push(m);
                curve.std.push(std_dev(&ok));
                curve.counts.push(ok.len());
            }
        }
        curve
    }
}

/// Negative first and second derivatives of a saturation curve in `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiCurves {
    pub cs: Vec<f64>,
    pub chi: Vec<f64>,
    pub chi_prime: Vec<f64>,
    pub c_crit: f64,
    pub filter: SavGolParams,
}

/// `c_crit = argmax χ′` over the points whose filter window is centred.
///
/// The curve must be sampled uniformly in `x = log2 c`; Savitzky–Golay
/// derivatives in `x` are converted with `dy/dc = y_x / (c ln 2)` and
/// `d²y/dc² = (y_xx − ln 2 · y_x) / (c ln 2)²`.
pub fn extract_c_crit(curve: &SaturationCurve, filter: SavGolParams) -> Result<ChiCurves> {
    let n = curve.cs.len();
    if n < filter.window {
        return Err(Error::Parameter(format!(
            "{n} curve points are fewer than the filter window {}",
            filter.window
        )));
    }
    if curve.counts.iter().any(|&k| k < 2) {
        return Err(Error::Contract(
            "every curve point must average at least 2 seeds".into(),
        ));
    }
    let xs: Vec<f64> = curve.cs.iter().map(|c| c.log2()).collect();
    let h = xs[1] - xs[0];
    if h.is_nan() || h <= 0.0 || xs.windows(2).any(|p| ((p[1] - p[0]) - h).abs() > 1e-9) {
        return Err(Error::Parameter(
            "curve must be uniformly spaced in log2 c".into(),
        ));
    }
    let yx = savitzky_golay(&curve.mean, filter.window, filter.polyorder, 1, h)?;
    let yxx = savitzky_golay(&curve.mean, filter.window, filter.polyorder, 2, h)?;
    let ln2 = std::f64::consts::LN_2;
    let chi: Vec<f64> = curve
        .cs
        .iter()
        .zip(&yx)
        .map(|(c, d)| -d / (c * ln2))
        .collect();
    let chi_prime: Vec<f64> = curve
        .cs
        .iter()
        .zip(yx.iter().zip(&yxx))
        .map(|(c, (d1, d2))| -(d2 - ln2 * d1) / (c * ln2).powi(2))
        .collect();
    let half = filter.window / 2;
    let interior = half..n - half;
    let scale = curve
        .mean
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let (lo, hi) = interior
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            (lo.min(chi_prime[i]), hi.max(chi_prime[i]))
        });
    let spread = hi - lo;
    if spread.is_nan() || spread <= 1e-9 * scale {
        return Err(Error::Undefined(
            "no interior maximum: the curve has no curvature".into(),
        ));
    }
    let best = interior
        .max_by(|&a, &b| chi_prime[a].total_cmp(&chi_prime[b]).then(b.cmp(&a)))
        .expect("non-empty interior");
    Ok(ChiCurves {
        c_crit: curve.cs[best],
        cs: curve.cs.clone(),
        chi,
        chi_prime,
        filter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phases::CGrid;

    fn curve_from(f: impl Fn(f64) -> f64, grid: &CGrid) -> SaturationCurve {
        let cs = grid.values();
        SaturationCurve {
            mean: cs.iter().map(|&c| f(c)).collect(),
            std: vec![0.0; cs.len()],
            counts: vec![10; cs.len()],
            cs,
            protocol: SaturationProtocol::default(),
        }
    }

    #[test]
    fn step_curve_drops_at_four() {
        let grid = CGrid::new(0.0, 4.0, 0.1).unwrap();
        let curve = curve_from(|c| if c < 4.0 { 1.0 } else { 0.1 }, &grid);
        let chi = extract_c_crit(&curve, SavGolParams::default()).unwrap();
        // chi' peaks on the rising edge of chi, within one filter half-window
        // below the drop
        let x = chi.c_crit.log2();
        assert!((1.55..2.0).contains(&x), "{x}");
    }

    #[test]
    fn constant_curve_has_no_maximum() {
        let grid = CGrid::new(0.0, 3.0, 0.1).unwrap();
        let curve = curve_from(|_| 0.7, &grid);
        assert!(matches!(
            extract_c_crit(&curve, SavGolParams::default()),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn chain_rule_on_a_quadratic_in_c() {
        // y = -(c - 1)^2 / 2 => chi = c - 1, chi' = 1; SG with polyorder 3
        // is not exact in c, so compare loosely on a fine grid
        let grid = CGrid::new(0.0, 2.0, 0.02).unwrap();
        let curve = curve_from(|c| -(c - 1.0).powi(2) / 2.0, &grid);
        let chi = extract_c_crit(&curve, SavGolParams::default()).unwrap();
        for i in 10..grid.len() - 10 {
            assert!((chi.chi[i] - (curve.cs[i] - 1.0)).abs() < 1e-4);
            assert!((chi.chi_prime[i] - 1.0).abs() < 5e-3);
        }
    }

    #[test]
    fn window_contract() {
        let p = SaturationProtocol::default();
        assert_eq!(p.window(0.5).unwrap(), (395, 405));
        assert!(matches!(p.window(40.0), Err(Error::Contract(_))));
        assert_eq!(p.window(200.0 / 6.0).unwrap(), (1, 11));
    }
}
