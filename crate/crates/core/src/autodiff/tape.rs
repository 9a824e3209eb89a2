//! A linear tape of matrix primitives with three sweeps:
//!
//! - forward values, recorded as nodes are pushed;
//! - forward tangents `ẋ` along a parameter direction;
//! - reverse adjoints `x̄`, optionally with their tangents `(x̄)˙`.
//!
//! The tangent of the parameter adjoints is the Hessian-vector product
//! (forward-over-reverse), with second-order terms from `square` and `matmul`.

use crate::numkit::{gemm, Matrix};

pub type NodeId = usize;

#[derive(Clone, Debug)]
pub enum Op {
    /// Data with zero tangent.
    Constant,
    /// Weight matrix `slot` of the parameter set.
    Param(usize),
    /// `alpha · a · bᵀ`.
    MatMulNt {
        a: NodeId,
        b: NodeId,
        alpha: f64,
    },
    Relu(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Scale(NodeId, f64),
    Square(NodeId),
    /// Sum of all entries divided by the row count, as a `1 × 1` matrix.
    ReduceMean(NodeId),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Matrix,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

type Slots = Vec<Option<Matrix>>;

fn accumulate(slot: &mut Option<Matrix>, delta: Matrix) {
    match slot {
        Some(m) => m.axpy(1.0, &delta),
        None => *slot = Some(delta),
    }
}

fn relu_mask(x: &Matrix, g: &Matrix) -> Matrix {
    let mut out = g.clone();
    for (o, &xv) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
        if xv <= 0.0 {
            *o = 0.0;
        }
    }
    out
}

fn hadamard(a: &Matrix, b: &Matrix, scale: f64) -> Matrix {
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| scale * x * y)
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

fn mm(alpha: f64, a: &Matrix, ta: bool, b: &Matrix, tb: bool) -> Matrix {
    let rows = if ta { a.cols() } else { a.rows() };
    let cols = if tb { b.rows() } else { b.cols() };
    let mut c = Matrix::zeros(rows, cols);
    gemm(alpha, a, ta, b, tb, 0.0, &mut c);
    c
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id].value
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn param(&mut self, slot: usize, value: Matrix) -> NodeId {
        self.push(Op::Param(slot), value)
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId, alpha: f64) -> NodeId {
        let v = mm(alpha, self.value(a), false, self.value(b), true);
        self.push(Op::MatMulNt { a, b, alpha }, v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).add(self.value(b));
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).sub(self.value(b));
        self.push(Op::Sub(a, b), v)
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).scaled(s);
        self.push(Op::Scale(a, s), v)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), v)
    }

    pub fn reduce_mean(&mut self, a: NodeId) -> NodeId {
        let m = self.value(a);
        let v = m.as_slice().iter().sum::<f64>() / m.rows() as f64;
        self.push(
            Op::ReduceMean(a),
            Matrix::from_vec(1, 1, vec![v]).expect("1x1"),
        )
    }

    /// Forward tangents given the direction for each parameter slot.
    /// `None` marks a node whose tangent is identically zero.
    pub fn tangents(&self, direction: &[Matrix]) -> Slots {
        let mut t: Slots = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let next = match node.op {
                Op::Constant => None,
                Op::Param(slot) => Some(direction[slot].clone()),
                Op::MatMulNt { a, b, alpha } => {
                    let mut out: Option<Matrix> = None;
                    if let Some(ta) = &t[a] {
                        out = Some(mm(alpha, ta, false, self.value(b), true));
                    }
                    if let Some(tb) = &t[b] {
                        accumulate(&mut out, mm(alpha, self.value(a), false, tb, true));
                    }
                    out
                }
                Op::Relu(a) => t[a].as_ref().map(|ta| relu_mask(self.value(a), ta)),
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) {
                        -1.0
                    } else {
                        1.0
                    };
                    match (&t[a], &t[b]) {
                        (None, None) => None,
                        (Some(x), None) => Some(x.clone()),
                        (None, Some(y)) => Some(y.scaled(sign)),
                        (Some(x), Some(y)) => {
                            let mut s = x.clone();
                            s.axpy(sign, y);
                            Some(s)
                        }
                    }
                }
                Op::Scale(a, s) => t[a].as_ref().map(|ta| ta.scaled(s)),
                Op::Square(a) => t[a].as_ref().map(|ta| hadamard(self.value(a), ta, 2.0)),
                Op::ReduceMean(a) => t[a].as_ref().map(|ta| {
                    let v = ta.as_slice().iter().sum::<f64>() / ta.rows() as f64;
                    Matrix::from_vec(1, 1, vec![v]).expect("1x1")
                }),
            };
            t.push(next);
        }
        t
    }

    /// Reverse sweep seeded with `1` at the scalar `root`.
    pub fn adjoints(&self, root: NodeId) -> Slots {
        self.reverse(root, None, None).0
    }

    /// Adjoints and their tangents along the direction whose forward
    /// tangents are `tangents`. Passing precomputed `adjoints` skips
    /// recomputing them.
    pub fn adjoint_tangents(
        &self,
        root: NodeId,
        tangents: &Slots,
        adjoints: Option<&Slots>,
    ) -> (Slots, Slots) {
        let (adj, dadj) = self.reverse(root, Some(tangents), adjoints);
        (adj, dadj.expect("tangent sweep requested"))
    }

    fn reverse(
        &self,
        root: NodeId,
        tangents: Option<&Slots>,
        known: Option<&Slots>,
    ) -> (Slots, Option<Slots>) {
        let n = self.nodes.len();
        let compute_adj = known.is_none();
        let mut adj: Slots = match known {
            Some(a) => a.clone(),
            None => vec![None; n],
        };
        let mut dadj: Option<Slots> = tangents.map(|_| vec![None; n]);
        if compute_adj {
            adj[root] = Some(Matrix::from_vec(1, 1, vec![1.0]).expect("1x1"));
        }

        for id in (0..=root).rev() {
            let g = adj[id].clone();
            let dg = dadj.as_ref().and_then(|d| d[id].clone());
            if g.is_none() && dg.is_none() {
                continue;
            }
            let node = &self.nodes[id];
            let tan = |k: NodeId| tangents.and_then(|t| t[k].as_ref());

            // Pushes (adjoint contribution, its tangent) to child k.
            let emit = |k: NodeId,
                        da: Option<Matrix>,
                        dda: Option<Matrix>,
                        adj: &mut Slots,
                        dadj: &mut Option<Slots>| {
                if compute_adj {
                    if let Some(d) = da {
                        accumulate(&mut adj[k], d);
                    }
                }
                if let (Some(dd), Some(slots)) = (dda, dadj.as_mut()) {
                    accumulate(&mut slots[k], dd);
                }
            };

            match node.op {
                Op::Constant | Op::Param(_) => {}
                Op::MatMulNt { a, b, alpha } => {
                    let av = self.value(a);
                    let bv = self.value(b);
                    // C = α A Bᵀ:  Ā = α C̄ B,  B̄ = α C̄ᵀ A
                    let ga = g
                        .as_ref()
                        .filter(|_| compute_adj)
                        .map(|g| mm(alpha, g, false, bv, false));
                    let gb = g
                        .as_ref()
                        .filter(|_| compute_adj)
                        .map(|g| mm(alpha, g, true, av, false));
                    let (mut dga, mut dgb) = (None, None);
                    if dadj.is_some() {
                        if let Some(dg) = &dg {
                            dga = Some(mm(alpha, dg, false, bv, false));
                            dgb = Some(mm(alpha, dg, true, av, false));
                        }
                        if let Some(g) = &g {
                            if let Some(tb) = tan(b) {
                                accumulate(&mut dga, mm(alpha, g, false, tb, false));
                            }
                            if let Some(ta) = tan(a) {
                                accumulate(&mut dgb, mm(alpha, g, true, ta, false));
                            }
                        }
                    }
                    emit(a, ga, dga, &mut adj, &mut dadj);
                    emit(b, gb, dgb, &mut adj, &mut dadj);
                }
                Op::Relu(a) => {
                    let x = self.value(a);
                    let ga = g.as_ref().filter(|_| compute_adj).map(|g| relu_mask(x, g));
                    let dga = dg.as_ref().map(|dg| relu_mask(x, dg));
                    emit(a, ga, dga, &mut adj, &mut dadj);
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) {
                        -1.0
                    } else {
                        1.0
                    };
                    let ga = g.clone().filter(|_| compute_adj);
                    let gb = g.as_ref().filter(|_| compute_adj).map(|g| g.scaled(sign));
                    emit(a, ga, dg.clone(), &mut adj, &mut dadj);
                    emit(b, gb, dg.map(|d| d.scaled(sign)), &mut adj, &mut dadj);
                }
                Op::Scale(a, s) => {
                    let ga = g.as_ref().filter(|_| compute_adj).map(|g| g.scaled(s));
                    emit(a, ga, dg.map(|d| d.scaled(s)), &mut adj, &mut dadj);
                }
                Op::Square(a) => {
                    let x = self.value(a);
                    // x̄ = 2 x ȳ;  (x̄)˙ = 2 ẋ ȳ + 2 x (ȳ)˙
                    let ga = g
                        .as_ref()
                        .filter(|_| compute_adj)
                        .map(|g| hadamard(x, g, 2.0));
                    let mut dga = None;
                    if dadj.is_some() {
                        if let Some(dg) = &dg {
                            dga = Some(hadamard(x, dg, 2.0));
                        }
                        if let (Some(g), Some(ta)) = (&g, tan(a)) {
                            accumulate(&mut dga, hadamard(ta, g, 2.0));
                        }
                    }
                    emit(a, ga, dga, &mut adj, &mut dadj);
                }
                Op::ReduceMean(a) => {
                    let (r, c) = self.value(a).shape();
                    let spread = |m: &Matrix| {
                        Matrix::from_vec(r, c, vec![m.as_slice()[0] / r as f64; r * c])
                            .expect("shape")
                    };
                    let ga = g.as_ref().filter(|_| compute_adj).map(spread);
                    let dga = dg.as_ref().map(spread);
                    emit(a, ga, dga, &mut adj, &mut dadj);
                }
            }
        }
        (adj, dadj)
    }
}
