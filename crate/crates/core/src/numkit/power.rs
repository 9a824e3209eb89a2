use super::{dot, norm, Matrix, SeededRng};
use crate::{Error, Result};

/// A linear map `R^n -> R^n` given only through its action on vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl LinearOperator for Matrix {
    fn dim(&self) -> usize {
        assert!(self.is_square(), "operator matrix must be square");
        self.rows()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols() {
            return Err(Error::Shape(format!(
                "vector of length {} applied to {}x{} matrix",
                x.len(),
                self.rows(),
                self.cols()
            )));
        }
        Ok(self.matvec(x))
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Plain power iteration: `iters` renormalized applications from a start
/// vector drawn uniformly on the unit sphere, then the Rayleigh quotient of
/// the final iterate.
///
/// Converges to the eigenvalue of largest magnitude, which is reported with
/// its sign.
pub fn power_iteration(
    op: &dyn LinearOperator,
    iters: usize,
    rng: &mut SeededRng,
) -> Result<Eigenpair> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::Contract(
            "power iteration on a 0-dimensional operator".into(),
        ));
    }
    if iters == 0 {
        return Err(Error::Contract(
            "power iteration needs at least one step".into(),
        ));
    }
    let mut v = rng.unit_vector(n);
    for step in 1..=iters {
        let w = op.apply(&v)?;
        let nrm = norm(&w);
        if !nrm.is_finite() {
            return Err(Error::Divergence {
                step,
                context: "power iteration produced a non-finite iterate".into(),
            });
        }
        if nrm == 0.0 {
            // v lies in the null space; every Rayleigh quotient there is 0.
            return Ok(Eigenpair {
                value: 0.0,
                vector: v,
            });
        }
        v = w.into_iter().map(|x| x / nrm).collect();
    }
    let av = op.apply(&v)?;
    // dividing by |v|² absorbs the rounding left by the last normalization
    let value = dot(&v, &av) / dot(&v, &v);
    if !value.is_finite() {
        return Err(Error::Divergence {
            step: iters + 1,
            context: "non-finite Rayleigh quotient".into(),
        });
    }
    Ok(Eigenpair { value, vector: v })
}
