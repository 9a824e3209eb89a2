//! Cyclic Jacobi eigensolver for small dense symmetric matrices.
//!
//! Used as the reference for power iteration and for exact `uv`-model
//! Hessian spectra, so accuracy matters more than speed.

use super::Matrix;
use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn dense_sym_eigs(m: &Matrix) -> Result<Vec<f64>> {
    Ok(dense_sym_eigh(m)?.0)
}

/// Eigenvalues (descending) and matching unit eigenvectors as the columns
/// of the returned matrix.
pub fn dense_sym_eigh(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !m.is_square() {
        return Err(Error::Contract(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.all_finite() {
        return Err(Error::Contract(
            "eigensolver input has non-finite entries".into(),
        ));
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::Contract(format!(
            "matrix is not symmetric (relative asymmetry {asym:.3e})"
        )));
    }
    let n = m.rows();
    let mut a = m.clone();
    // symmetrize exactly so rotations see one consistent matrix
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    let mut v = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= f64::EPSILON * f64::EPSILON * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Applies the Jacobi rotation `J(p, q, θ)` as `Jᵀ A J` and accumulates `V J`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{dot, SeededRng};

    fn random_symmetric(n: usize, rng: &mut SeededRng) -> Matrix {
        let g = Matrix::from_fn(n, n, |_, _| rng.normal());
        g.add(&g.transpose()).scaled(0.5)
    }

    #[test]
    fn two_by_two_by_hand() {
        // det([[1-l, 2], [2, 1-l]]) = (1-l)^2 - 4 => l = 3, -1
        let e = dense_sym_eigs(&Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]])).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-14);
        assert!((e[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_and_zero() {
        assert_eq!(dense_sym_eigs(&Matrix::identity(4)).unwrap(), vec![1.0; 4]);
        assert_eq!(dense_sym_eigs(&Matrix::zeros(3, 3)).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn rejects_non_symmetric() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(dense_sym_eigs(&m), Err(Error::Contract(_))));
        assert!(matches!(
            dense_sym_eigs(&Matrix::zeros(2, 3)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn eigen_sum_matches_trace_on_random_matrices() {
        let mut rng = SeededRng::new(42);
        for trial in 0..100 {
            let n = 1 + trial % 12;
            let m = random_symmetric(n, &mut rng);
            let e = dense_sym_eigs(&m).unwrap();
            let sum: f64 = e.iter().sum();
            let tr = m.trace();
            let scale = m.max_abs() * n as f64;
            assert!(
                (sum - tr).abs() <= 1e-8 * scale.max(tr.abs()),
                "{sum} vs {tr}"
            );
            assert!(e.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eigenvectors_satisfy_definition() {
        let mut rng = SeededRng::new(5);
        let m = random_symmetric(9, &mut rng);
        let (vals, vecs) = dense_sym_eigh(&m).unwrap();
        for (k, &lam) in vals.iter().enumerate() {
            let col: Vec<f64> = (0..9).map(|r| vecs[(r, k)]).collect();
            let mv = m.matvec(&col);
            for r in 0..9 {
                assert!((mv[r] - lam * col[r]).abs() < 1e-10);
            }
            assert!((dot(&col, &col) - 1.0).abs() < 1e-12);
        }
    }
}
