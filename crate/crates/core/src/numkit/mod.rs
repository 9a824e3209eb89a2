//! Dense numerics shared by every other module.
//!
//! Everything here is a pure function over immutable inputs except
//! [`SeededRng`], which is owned by one caller at a time.

mod eigen;
mod matrix;
mod polyfit;
mod power;
mod rng;
mod savgol;

pub use eigen::{dense_sym_eigh, dense_sym_eigs};
pub use matrix::{dot, gemm, norm, Matrix};
pub use polyfit::{lstsq, polyder, polyfit, polyval, residual_sq};
pub use power::{power_iteration, Eigenpair, LinearOperator};
pub use rng::{derive_seed, SeededRng};
pub use savgol::{savitzky_golay, SavGolParams};

/// Linear-interpolated quantile (the "linear" rule of common numerics
/// libraries). `q` in `[0, 1]`; returns `None` for empty input.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values).unwrap_or(0.0);
    (values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}
