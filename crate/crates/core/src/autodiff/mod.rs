//! Reverse-mode gradients and exact Hessian-vector products for bias-free
//! MLPs under the mean-squared-error loss `(1/B) Σ ½‖f(x) − y‖²`.

mod tape;

pub use tape::{NodeId, Op, Tape};

use serde::{Deserialize, Serialize};

use crate::data::Batch;
use crate::models::{Activation, NetworkParams};
use crate::numkit::{LinearOperator, Matrix};
use crate::{Error, Result};

/// Flat gradient or direction in [`NetworkParams::to_flat`] layout.
pub type GradVector = Vec<f64>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Mse,
}

/// The recorded loss graph of one (params, batch) pair.
pub struct LossGraph {
    tape: Tape,
    root: NodeId,
    params: Vec<NodeId>,
    layout: NetworkParams,
}

impl LossGraph {
    pub fn build(params: &NetworkParams, batch: &Batch, kind: LossKind) -> Result<Self> {
        let LossKind::Mse = kind;
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        if batch.inputs.cols() != params.n_in() || batch.targets.cols() != params.n_out() {
            return Err(Error::Config(format!(
                "batch is {}→{} but the network is {}→{}",
                batch.inputs.cols(),
                batch.targets.cols(),
                params.n_in(),
                params.n_out()
            )));
        }
        let mut tape = Tape::new();
        let mut a = tape.constant(batch.inputs.clone());
        let last = params.depth() - 1;
        let mut ids = Vec::with_capacity(params.depth());
        for (l, (w, &p)) in params.layers.iter().zip(&params.prefactors).enumerate() {
            let wid = tape.param(l, w.clone());
            ids.push(wid);
            a = tape.matmul_nt(a, wid, p);
            if l < last && params.activation == Activation::Relu {
                a = tape.relu(a);
            }
        }
        let y = tape.constant(batch.targets.clone());
        let r = tape.sub(a, y);
        let sq = tape.square(r);
        let mean = tape.reduce_mean(sq);
        let root = tape.scale(mean, 0.5);
        if !tape.value(root).all_finite() || !tape.value(a).all_finite() {
            return Err(Error::Divergence {
                step: 0,
                context: "non-finite forward pass".into(),
            });
        }
        Ok(Self {
            tape,
            root,
            params: ids,
            layout: params.clone(),
        })
    }

    pub fn loss(&self) -> f64 {
        self.tape.value(self.root)[(0, 0)]
    }

    fn flatten(&self, slots: &[Option<Matrix>]) -> GradVector {
        let mut out = Vec::with_capacity(self.layout.param_count());
        for (&id, shape) in self.params.iter().zip(self.layout.shapes()) {
            match &slots[id] {
                Some(m) => out.extend_from_slice(m.as_slice()),
                None => out.extend(std::iter::repeat_n(0.0, shape.0 * shape.1)),
            }
        }
        out
    }

    pub fn gradient(&self) -> GradVector {
        self.flatten(&self.tape.adjoints(self.root))
    }

    /// Precomputes the adjoints so repeated products only redo the tangent
    /// sweeps.
    pub fn hessian_operator(self) -> HessianOperator {
        let adjoints = self.tape.adjoints(self.root);
        HessianOperator {
            graph: self,
            adjoints,
        }
    }
}

pub fn loss_and_grad(
    params: &NetworkParams,
    batch: &Batch,
    kind: LossKind,
) -> Result<(f64, GradVector)> {
    let g = LossGraph::build(params, batch, kind)?;
    let grad = g.gradient();
    if !grad.iter().all(|x| x.is_finite()) {
        return Err(Error::Divergence {
            step: 0,
            context: "non-finite gradient".into(),
        });
    }
    Ok((g.loss(), grad))
}

/// Mean-squared-error loss without building a tape.
pub fn loss_only(params: &NetworkParams, batch: &Batch) -> Result<f64> {
    let out = crate::models::forward_batch(params, &batch.inputs)?;
    if out.cols() != batch.targets.cols() {
        return Err(Error::Config(
            "target width differs from network output".into(),
        ));
    }
    let sq = out.sub(&batch.targets).frobenius_sq();
    Ok(0.5 * sq / batch.len() as f64)
}

pub fn hvp(params: &NetworkParams, batch: &Batch, v: &[f64], kind: LossKind) -> Result<GradVector> {
    hessian_operator(params, batch, kind)?.apply(v)
}

pub fn hessian_operator(
    params: &NetworkParams,
    batch: &Batch,
    kind: LossKind,
) -> Result<HessianOperator> {
    Ok(LossGraph::build(params, batch, kind)?.hessian_operator())
}

/// The loss Hessian at fixed (params, batch) as a linear operator.
pub struct HessianOperator {
    graph: LossGraph,
    adjoints: Vec<Option<Matrix>>,
}

impl HessianOperator {
    pub fn loss(&self) -> f64 {
        self.graph.loss()
    }

    pub fn gradient(&self) -> GradVector {
        self.graph.flatten(&self.adjoints)
    }
}

impl LinearOperator for HessianOperator {
    fn dim(&self) -> usize {
        self.graph.layout.param_count()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Shape(format!(
                "direction of length {} for {} parameters",
                v.len(),
                self.dim()
            )));
        }
        let direction = self.graph.layout.split_flat(v)?;
        let tangents = self.graph.tape.tangents(&direction);
        let (_, dadj) =
            self.graph
                .tape
                .adjoint_tangents(self.graph.root, &tangents, Some(&self.adjoints));
        Ok(self.graph.flatten(&dadj))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_fcn, ArchConfig, UvState};
    use crate::numkit::{power_iteration, SeededRng};

    fn scalar_batch(x: f64, y: f64) -> Batch {
        Batch::new(Matrix::from_rows(&[[x]]), Matrix::from_rows(&[[y]])).unwrap()
    }

    #[test]
    fn scalar_linear_net() {
        let p = NetworkParams::new(
            vec![Matrix::from_rows(&[[2.0]])],
            vec![1.0],
            Activation::Linear,
        )
        .unwrap();
        let (loss, grad) = loss_and_grad(&p, &scalar_batch(1.0, 0.0), LossKind::Mse).unwrap();
        assert_eq!(loss, 2.0);
        assert_eq!(grad, vec![2.0]);
    }

    #[test]
    fn zero_network_with_zero_targets() {
        let cfg = ArchConfig::relu(3, 4, 2, 2);
        let mut p = init_fcn(&cfg, &mut SeededRng::new(0)).unwrap();
        p.set_flat(&vec![0.0; p.param_count()]).unwrap();
        let batch = Batch::new(
            Matrix::from_rows(&[[1.0, 2.0], [0.5, -1.0]]),
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let (loss, grad) = loss_and_grad(&p, &batch, LossKind::Mse).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
        let op = hessian_operator(&p, &batch, LossKind::Mse).unwrap();
        let v: Vec<f64> = (0..op.dim()).map(|i| i as f64 - 3.0).collect();
        assert!(op.apply(&v).unwrap().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn uv_unit_hessian() {
        let s = UvState::new(vec![1.0], vec![1.0]).unwrap();
        let p = s.to_params();
        let b = scalar_batch(1.0, 0.0);
        assert_eq!(
            hvp(&p, &b, &[1.0, 0.0], LossKind::Mse).unwrap(),
            vec![1.0, 2.0]
        );
        assert_eq!(
            hvp(&p, &b, &[0.0, 0.0], LossKind::Mse).unwrap(),
            vec![0.0, 0.0]
        );
        let op = hessian_operator(&p, &b, LossKind::Mse).unwrap();
        let top = power_iteration(&op, 50, &mut SeededRng::new(1))
            .unwrap()
            .value;
        assert!((top - 3.0).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_is_a_config_error() {
        let p = init_fcn(&ArchConfig::relu(2, 3, 4, 1), &mut SeededRng::new(0)).unwrap();
        let r = loss_and_grad(&p, &scalar_batch(1.0, 0.0), LossKind::Mse);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn loss_only_matches_tape() {
        let cfg = ArchConfig::relu(3, 5, 4, 3);
        let p = init_fcn(&cfg, &mut SeededRng::new(2)).unwrap();
        let mut rng = SeededRng::new(3);
        let b = Batch::new(
            Matrix::from_fn(6, 4, |_, _| rng.normal()),
            Matrix::from_fn(6, 3, |_, _| rng.normal()),
        )
        .unwrap();
        let (l, _) = loss_and_grad(&p, &b, LossKind::Mse).unwrap();
        assert!((l - loss_only(&p, &b).unwrap()).abs() < 1e-12);
    }
}
