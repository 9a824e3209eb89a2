use super::Matrix;
use crate::{Error, Result};

/// Least-squares solution of `design · x ≈ rhs` by Householder QR.
///
/// Fails when the design has (numerically) dependent columns.
pub fn lstsq(design: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = design.shape();
    if rhs.len() != m {
        return Err(Error::Shape(format!(
            "{m} design rows but {} targets",
            rhs.len()
        )));
    }
    if m < n {
        return Err(Error::Fit(format!(
            "{m} equations cannot determine {n} unknowns"
        )));
    }
    let mut a = design.clone();
    let mut b = rhs.to_vec();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for k in 0..n {
        let col_norm = (k..m).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if col_norm <= 1e-12 * scale * (m as f64).sqrt() {
            return Err(Error::Fit(format!(
                "design matrix is rank deficient at column {k}"
            )));
        }
        let alpha = if a[(k, k)] > 0.0 { -col_norm } else { col_norm };
        let mut v: Vec<f64> = (k..m).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        for j in k..n {
            let proj: f64 = (k..m).map(|i| v[i - k] * a[(i, j)]).sum::<f64>() * 2.0 / vnorm_sq;
            for i in k..m {
                a[(i, j)] -= proj * v[i - k];
            }
        }
        let proj: f64 = (k..m).map(|i| v[i - k] * b[i]).sum::<f64>() * 2.0 / vnorm_sq;
        for i in k..m {
            b[i] -= proj * v[i - k];
        }
    }

    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| a[(k, j)] * x[j]).sum();
        x[k] = (b[k] - s) / a[(k, k)];
    }
    Ok(x)
}

/// Least-squares polynomial coefficients, lowest degree first.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!(
            "{} abscissae but {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < degree + 1 {
        return Err(Error::Fit(format!(
            "degree {degree} needs at least {} points, got {}",
            degree + 1,
            xs.len()
        )));
    }
    if degree > 0 && xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::Fit("all abscissae are identical".into()));
    }
    let design = Matrix::from_fn(xs.len(), degree + 1, |i, j| xs[i].powi(j as i32));
    lstsq(&design, ys)
}

pub fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Derivative coefficients of a low-degree-first polynomial.
pub fn polyder(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect()
}

pub fn residual_sq(coeffs: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (polyval(coeffs, x) - y).powi(2))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let c = polyfit(&xs, &ys, 1).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-10 && (c[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn exact_parabola() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let c = polyfit(&xs, &ys, 2).unwrap();
        for (got, want) in c.iter().zip([0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn nested_models_reduce_residual() {
        let xs = [0.0, 0.5, 1.0, 1.5, 2.0];
        let ys = [0.1, 0.4, 1.2, 2.1, 4.3];
        let r1 = residual_sq(&polyfit(&xs, &ys, 1).unwrap(), &xs, &ys);
        let r2 = residual_sq(&polyfit(&xs, &ys, 2).unwrap(), &xs, &ys);
        assert!(r2 <= r1 + 1e-12);
    }

    #[test]
    fn rank_deficient_is_a_fit_error() {
        assert!(matches!(
            polyfit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0], 1),
            Err(Error::Fit(_))
        ));
        assert!(matches!(
            polyfit(&[1.0, 2.0], &[0.0, 1.0], 2),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn polyval_and_polyder() {
        let c = [1.0, -2.0, 3.0];
        assert_eq!(polyval(&c, 2.0), 1.0 - 4.0 + 12.0);
        assert_eq!(polyder(&c), vec![-2.0, 6.0]);
    }
}
