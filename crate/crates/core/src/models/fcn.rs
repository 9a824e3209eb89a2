use serde::{Deserialize, Serialize};

use crate::numkit::{Matrix, SeededRng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Variance gain that keeps preactivation second moments constant
    /// from layer to layer.
    fn critical_gain(self) -> f64 {
        match self {
            Activation::Relu => 2.0,
            Activation::Linear => 1.0,
        }
    }
}

/// How the per-layer forward prefactor is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefactorMode {
    /// `sqrt(gain / fan_in)`: weight variance at criticality.
    #[default]
    Critical,
    /// `2 / sqrt(fan_in)` on hidden-to-hidden layers.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchConfig {
    /// Number of weight layers (`depth - 1` hidden layers).
    pub depth: usize,
    pub width: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub activation: Activation,
    #[serde(default)]
    pub prefactor: PrefactorMode,
}

impl ArchConfig {
    pub fn relu(depth: usize, width: usize, n_in: usize, n_out: usize) -> Self {
        Self {
            depth,
            width,
            n_in,
            n_out,
            activation: Activation::Relu,
            prefactor: PrefactorMode::Critical,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 || self.n_in == 0 || self.n_out == 0 {
            return Err(Error::Config(format!(
                "depth, width, n_in and n_out must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn depth_over_width(&self) -> f64 {
        self.depth as f64 / self.width as f64
    }

    /// `(rows, cols)` of every weight matrix, input layer first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        (0..self.depth)
            .map(|l| {
                let fan_in = if l == 0 { self.n_in } else { self.width };
                let fan_out = if l + 1 == self.depth {
                    self.n_out
                } else {
                    self.width
                };
                (fan_out, fan_in)
            })
            .collect()
    }

    /// Input and readout layers see unrectified inputs and use gain 1;
    /// hidden-to-hidden layers use the activation's critical gain.
    pub fn prefactors(&self) -> Vec<f64> {
        self.layer_shapes()
            .iter()
            .enumerate()
            .map(|(l, &(_, fan_in))| {
                let fan = fan_in as f64;
                let hidden_to_hidden = l > 0 && l + 1 < self.depth;
                if !hidden_to_hidden {
                    return (1.0 / fan).sqrt();
                }
                match self.prefactor {
                    PrefactorMode::Literal => 2.0 / fan.sqrt(),
                    PrefactorMode::Critical => (self.activation.critical_gain() / fan).sqrt(),
                }
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c).sum()
    }
}

/// Weights of a bias-free MLP in neural tangent parameterization.
///
/// Layer `l` maps `a_l` to `h_{l+1} = prefactor_l · W_l a_l`; the activation
/// is applied to every `h` except the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<Matrix>,
    pub prefactors: Vec<f64>,
    pub activation: Activation,
}

impl NetworkParams {
    pub fn new(layers: Vec<Matrix>, prefactors: Vec<f64>, activation: Activation) -> Result<Self> {
        if layers.is_empty() || layers.len() != prefactors.len() {
            return Err(Error::Shape(format!(
                "{} layers with {} prefactors",
                layers.len(),
                prefactors.len()
            )));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].cols() != pair[0].rows() {
                return Err(Error::Shape(format!(
                    "layer {} outputs {} units but layer {} expects {}",
                    l,
                    pair[0].rows(),
                    l + 1,
                    pair[1].cols()
                )));
            }
        }
        Ok(Self {
            layers,
            prefactors,
            activation,
        })
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().map_or(0, Matrix::rows)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Matrix::len).sum()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(Matrix::shape).collect()
    }

    pub fn same_shape(&self, other: &NetworkParams) -> bool {
        self.shapes() == other.shapes()
    }

    /// Concatenation of all weights, layer by layer in row-major order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for m in &self.layers {
            out.extend_from_slice(m.as_slice());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "flat vector of length {} for {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for m in &mut self.layers {
            let n = m.len();
            m.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Splits a flat vector into per-layer matrices with this layout.
    pub fn split_flat(&self, flat: &[f64]) -> Result<Vec<Matrix>> {
        let mut tmp = self.clone();
        tmp.set_flat(flat)?;
        Ok(tmp.layers)
    }

    /// `self += alpha * direction` for a flat direction.
    pub fn axpy_flat(&mut self, alpha: f64, direction: &[f64]) -> Result<()> {
        if direction.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "direction of length {} for {} parameters",
                direction.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for m in &mut self.layers {
            let n = m.len();
            for (w, d) in m
                .as_mut_slice()
                .iter_mut()
                .zip(&direction[offset..offset + n])
            {
                *w += alpha * d;
            }
            offset += n;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(Matrix::all_finite)
    }
}

/// Standard-normal weights with the architecture's prefactors.
pub fn init_fcn(cfg: &ArchConfig, rng: &mut SeededRng) -> Result<NetworkParams> {
    cfg.validate()?;
    let layers = cfg
        .layer_shapes()
        .into_iter()
        .map(|(r, c)| Matrix::from_fn(r, c, |_, _| rng.normal()))
        .collect();
    NetworkParams::new(layers, cfg.prefactors(), cfg.activation)
}

/// Output for a single input vector.
pub fn forward_fcn(params: &NetworkParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.n_in() {
        return Err(Error::Shape(format!(
            "input of length {} for a network with {} inputs",
            x.len(),
            params.n_in()
        )));
    }
    let last = params.depth() - 1;
    let mut a = x.to_vec();
    for (l, (w, &p)) in params.layers.iter().zip(&params.prefactors).enumerate() {
        let mut h = w.matvec(&a);
        h.iter_mut().for_each(|v| *v *= p);
        if l < last {
            h.iter_mut().for_each(|v| *v = params.activation.apply(*v));
        }
        a = h;
    }
    Ok(a)
}

/// Outputs for every row of `inputs` (batch × n_in), as a batch × n_out matrix.
pub fn forward_batch(params: &NetworkParams, inputs: &Matrix) -> Result<Matrix> {
    if inputs.cols() != params.n_in() {
        return Err(Error::Shape(format!(
            "inputs with {} columns for a network with {} inputs",
            inputs.cols(),
            params.n_in()
        )));
    }
    let last = params.depth() - 1;
    let mut a = inputs.clone();
    for (l, (w, &p)) in params.layers.iter().zip(&params.prefactors).enumerate() {
        let mut h = Matrix::zeros(a.rows(), w.rows());
        crate::numkit::gemm(p, &a, false, w, true, 0.0, &mut h);
        if l < last && params.activation == Activation::Relu {
            h.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        a = h;
    }
    Ok(a)
}
