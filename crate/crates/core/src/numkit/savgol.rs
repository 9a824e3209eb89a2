use super::polyfit::lstsq;
use super::Matrix;
use crate::{Error, Result};

/// Savitzky–Golay smoothing / differentiation parameters.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SavGolParams {
    pub window: usize,
    pub polyorder: usize,
}

impl Default for SavGolParams {
    fn default() -> Self {
        Self {
            window: 9,
            polyorder: 3,
        }
    }
}

/// `deriv`-th smoothed derivative of uniformly spaced samples.
///
/// Each output point is the derivative at that point of the least-squares
/// polynomial of degree `polyorder` over a window of `window` samples. The
/// window is centred where possible; near the ends it is the first or last
/// `window` samples, so the output has the same length as the input.
pub fn savitzky_golay(
    values: &[f64],
    window: usize,
    polyorder: usize,
    deriv: usize,
    spacing: f64,
) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "window must be odd, got {window}"
        )));
    }
    if window <= polyorder {
        return Err(Error::Parameter(format!(
            "window {window} must exceed polyorder {polyorder}"
        )));
    }
    if deriv > polyorder {
        return Err(Error::Parameter(format!(
            "derivative order {deriv} exceeds polyorder {polyorder}"
        )));
    }
    if values.len() < window {
        return Err(Error::Parameter(format!(
            "{} samples are fewer than the window {window}",
            values.len()
        )));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::Parameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }

    let n = values.len();
    let half = window / 2;
    let weights: Vec<Vec<f64>> = (0..window)
        .map(|pos| window_weights(window, polyorder, deriv, pos, spacing))
        .collect::<Result<_>>()?;

    Ok((0..n)
        .map(|i| {
            let start = i.saturating_sub(half).min(n - window);
            let w = &weights[i - start];
            values[start..start + window]
                .iter()
                .zip(w)
                .map(|(y, c)| y * c)
                .sum()
        })
        .collect())
}

/// Filter taps giving the derivative at sample `pos` of the window.
fn window_weights(
    window: usize,
    polyorder: usize,
    deriv: usize,
    pos: usize,
    spacing: f64,
) -> Result<Vec<f64>> {
    let design = Matrix::from_fn(window, polyorder + 1, |j, k| {
        (j as f64 - pos as f64).powi(k as i32)
    });
    let factorial: f64 = (1..=deriv).map(|k| k as f64).product();
    let scale = factorial / spacing.powi(deriv as i32);
    (0..window)
        .map(|j| {
            let mut e = vec![0.0; window];
            e[j] = 1.0;
            Ok(lstsq(&design, &e)?[deriv] * scale)
        })
        .collect()
}
