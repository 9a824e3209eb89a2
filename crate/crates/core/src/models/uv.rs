use serde::{Deserialize, Serialize};

use super::{Activation, NetworkParams};
use crate::numkit::{dense_sym_eigs, dot, Matrix, SeededRng};
use crate::{Error, Result};

/// Parameters of `f(x) = vᵀu x / sqrt(w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UvState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Function-space coordinates of a `uv` state on the datum `(1, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UvReduced {
    pub f: f64,
    pub tr_h: f64,
}

impl UvReduced {
    pub fn loss(&self) -> f64 {
        0.5 * self.f * self.f
    }
}

impl UvState {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() || u.is_empty() {
            return Err(Error::Shape(format!(
                "u and v must have the same positive length, got {} and {}",
                u.len(),
                v.len()
            )));
        }
        Ok(Self { u, v })
    }

    pub fn width(&self) -> usize {
        self.u.len()
    }

    pub fn f(&self) -> f64 {
        dot(&self.u, &self.v) / (self.width() as f64).sqrt()
    }

    pub fn trace_h(&self) -> f64 {
        (dot(&self.u, &self.u) + dot(&self.v, &self.v)) / self.width() as f64
    }

    pub fn loss(&self) -> f64 {
        let f = self.f();
        0.5 * f * f
    }

    /// The model as a two-layer linear network: `u` is the `w × 1` input
    /// layer, `vᵀ` the `1 × w` readout, prefactors `1` and `1/sqrt(w)`.
    pub fn to_params(&self) -> NetworkParams {
        let w = self.width();
        NetworkParams {
            layers: vec![
                Matrix::from_vec(w, 1, self.u.clone()).expect("w x 1"),
                Matrix::from_vec(1, w, self.v.clone()).expect("1 x w"),
            ],
            prefactors: vec![1.0, 1.0 / (w as f64).sqrt()],
            activation: Activation::Linear,
        }
    }

    pub fn from_params(p: &NetworkParams) -> Result<Self> {
        let shapes = p.shapes();
        if shapes.len() != 2 || shapes[0].1 != 1 || shapes[1].0 != 1 {
            return Err(Error::Shape(format!("not a uv network: {shapes:?}")));
        }
        Self::new(
            p.layers[0].as_slice().to_vec(),
            p.layers[1].as_slice().to_vec(),
        )
    }
}

/// `u_i, v_i ~ N(0, 1)` i.i.d.; `u` is drawn first.
pub fn init_uv(w: usize, rng: &mut SeededRng) -> Result<UvState> {
    if w == 0 {
        return Err(Error::Config("uv width must be at least 1".into()));
    }
    let u = rng.normal_vec(w);
    let v = rng.normal_vec(w);
    UvState::new(u, v)
}

pub fn uv_reduce(s: &UvState) -> UvReduced {
    UvReduced {
        f: s.f(),
        tr_h: s.trace_h(),
    }
}

/// Exact Hessian of `L(u, v) = f² / 2` in the `(u, v)` ordering.
pub fn uv_hessian(s: &UvState) -> Matrix {
    let w = s.width();
    let wf = w as f64;
    let diag = s.f() * wf.sqrt();
    let mut h = Matrix::zeros(2 * w, 2 * w);
    for i in 0..w {
        for j in 0..w {
            h[(i, j)] = s.v[i] * s.v[j] / wf;
            h[(w + i, w + j)] = s.u[i] * s.u[j] / wf;
            let mut cross = s.v[i] * s.u[j];
            if i == j {
                cross += diag;
            }
            h[(i, w + j)] = cross / wf;
            h[(w + j, i)] = cross / wf;
        }
    }
    h
}

/// Largest Hessian eigenvalue without forming the `2w × 2w` matrix.
///
/// `span{(u,0), (v,0), (0,u), (0,v)}` is invariant under the Hessian and its
/// orthogonal complement has eigenvalues `±f/sqrt(w)`, so the spectrum
/// reduces to a 4 × 4 (or smaller) projected problem.
pub fn uv_top_eigenvalue(s: &UvState) -> f64 {
    let w = s.width();
    let wf = w as f64;
    let f = s.f();
    let basis = orthonormal_basis(&[&s.u, &s.v]);
    let r = basis.len();
    // block basis vectors: (b_a, 0) for a < r, (0, b_a) for a >= r
    let apply = |x: &[f64], y: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let vx = dot(&s.v, x);
        let uy = dot(&s.u, y);
        let hx: Vec<f64> = (0..w)
            .map(|i| (s.v[i] * vx + s.v[i] * uy) / wf + f / wf.sqrt() * y[i])
            .collect();
        let hy: Vec<f64> = (0..w)
            .map(|i| (s.u[i] * vx + s.u[i] * uy) / wf + f / wf.sqrt() * x[i])
            .collect();
        (hx, hy)
    };
    let zero = vec![0.0; w];
    let block: Vec<(Vec<f64>, Vec<f64>)> = basis
        .iter()
        .map(|b| (b.clone(), zero.clone()))
        .chain(basis.iter().map(|b| (zero.clone(), b.clone())))
        .collect();
    let n = block.len();
    let mut m = Matrix::zeros(n, n);
    for (j, (xj, yj)) in block.iter().enumerate() {
        let (hx, hy) = apply(xj, yj);
        for (i, (xi, yi)) in block.iter().enumerate() {
            m[(i, j)] = dot(xi, &hx) + dot(yi, &hy);
        }
    }
    // exact symmetry up to round-off
    let sym = m.add(&m.transpose()).scaled(0.5);
    let top = dense_sym_eigs(&sym).map(|e| e[0]).unwrap_or(f64::NAN);
    if w > r {
        top.max(f.abs() / wf.sqrt())
    } else {
        top
    }
}

fn orthonormal_basis(vectors: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let scale = dot(v, v).sqrt();
        if scale == 0.0 {
            continue;
        }
        let mut r = v.to_vec();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&r, b);
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&r, &r).sqrt();
        if n > 1e-12 * scale {
            r.iter_mut().for_each(|x| *x /= n);
            basis.push(r);
        }
    }
    basis
}
