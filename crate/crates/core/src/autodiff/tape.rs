use std::cell::RefCell;
use std::fmt;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// Identifier of a node on a [`Tape`]; also its position in recording order.
pub type NodeId = usize;

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Neg(NodeId),
    Abs(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Square(NodeId),
    Relu(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Max { x: NodeId, at: (usize, usize) },
    SumRows(NodeId),
    SumCols(NodeId),
    SoftmaxRows { x: NodeId, tau: f64 },
    Broadcast(NodeId),
    Transpose(NodeId),
    SelectRow { x: NodeId, row: usize },
    Scale { x: NodeId, c: f64 },
    ClampMin { x: NodeId, lo: f64 },
    StraightThrough(NodeId),
}

impl Op {
    fn parents(&self) -> Vec<NodeId> {
        use Op::*;
        match *self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | MatMul(a, b) => vec![a, b],
            Neg(x) | Abs(x) | Exp(x) | Log(x) | Square(x) | Relu(x) | Sum(x) | Mean(x)
            | SumRows(x) | SumCols(x) | Broadcast(x) | Transpose(x) | StraightThrough(x) => {
                vec![x]
            }
            Max { x, .. }
            | SoftmaxRows { x, .. }
            | SelectRow { x, .. }
            | Scale { x, .. }
            | ClampMin { x, .. } => vec![x],
        }
    }

    fn tag(&self) -> &'static str {
        use Op::*;
        match self {
            Leaf => "leaf",
            Add(..) => "add",
            Sub(..) => "sub",
            Mul(..) => "mul",
            MatMul(..) => "matmul",
            Neg(_) => "neg",
            Abs(_) => "abs",
            Exp(_) => "exp",
            Log(_) => "log",
            Square(_) => "square",
            Relu(_) => "relu",
            Sum(_) => "sum",
            Mean(_) => "mean",
            Max { .. } => "max",
            SumRows(_) => "sum_rows",
            SumCols(_) => "sum_cols",
            SoftmaxRows { .. } => "softmax_rows",
            Broadcast(_) => "broadcast",
            Transpose(_) => "transpose",
            SelectRow { .. } => "select_row",
            Scale { .. } => "scale",
            ClampMin { .. } => "clamp_min",
            StraightThrough(_) => "straight_through",
        }
    }
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Append-only record of a computation, in topological order.
///
/// A tape has a single writer. Build one per independent computation; tapes
/// on different threads never interact.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

/// A handle to a node on a tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: NodeId,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("op", &self.op_tag())
            .field("shape", &self.shape())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable leaf.
    pub fn var(&self, value: Array2<f64>) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    /// A leaf whose gradient is never read. Identical to [`Tape::var`] on the
    /// tape; the separate name documents intent at call sites.
    pub fn constant(&self, value: Array2<f64>) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.var(Array2::from_elem((1, 1), value))
    }

    /// `n×1` column vector.
    pub fn column(&self, values: &[f64]) -> Var<'_> {
        self.var(Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap())
    }

    pub(crate) fn push(&self, value: Array2<f64>, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        debug_assert!(op.parents().iter().all(|&p| p < id));
        nodes.push(Node { value, op });
        Var { tape: self, id }
    }

    pub(crate) fn value_of(&self, id: NodeId) -> Array2<f64> {
        self.nodes.borrow()[id].value.clone()
    }

    pub(crate) fn shape_of(&self, id: NodeId) -> (usize, usize) {
        self.nodes.borrow()[id].value.dim()
    }

    /// Parents of a node, in operand order.
    pub fn parents(&self, id: NodeId) -> Vec<NodeId> {
        self.nodes.borrow()[id].op.parents()
    }

    /// Reverse sweep from a scalar root.
    ///
    /// Returns the adjoint `∂root/∂x` for every node `x` recorded before
    /// the root. Nodes that do not influence the root get zeros.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        assert!(
            std::ptr::eq(self, root.tape),
            "root belongs to another tape"
        );
        let nodes = self.nodes.borrow();
        let shape = nodes[root.id].value.dim();
        if shape != (1, 1) {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar root, got shape {shape:?}"
            )));
        }
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; root.id + 1];
        adj[root.id] = Some(Array2::ones((1, 1)));

        for id in (0..=root.id).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &nodes[id];
            for (parent, contrib) in local_gradients(&nodes, node, &g) {
                match &mut adj[parent] {
                    Some(acc) => *acc += &contrib,
                    slot @ None => *slot = Some(contrib),
                }
            }
            adj[id] = Some(g);
        }

        let shapes = nodes[..=root.id].iter().map(|n| n.value.dim()).collect();
        Ok(Gradients {
            adjoints: adj,
            shapes,
        })
    }
}

fn sum_to_shape(g: &Array2<f64>, shape: (usize, usize)) -> Array2<f64> {
    let mut out = g.clone();
    if shape.0 == 1 && out.nrows() != 1 {
        out = out.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape.1 == 1 && out.ncols() != 1 {
        out = out.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    out
}

fn local_gradients(nodes: &[Node], node: &Node, g: &Array2<f64>) -> Vec<(NodeId, Array2<f64>)> {
    let val = |id: NodeId| &nodes[id].value;
    match node.op {
        Op::Leaf => vec![],
        Op::Add(a, b) => vec![(a, g.clone()), (b, g.clone())],
        Op::Sub(a, b) => vec![(a, g.clone()), (b, -g)],
        Op::Mul(a, b) => vec![(a, g * val(b)), (b, g * val(a))],
        Op::MatMul(a, b) => vec![(a, g.dot(&val(b).t())), (b, val(a).t().dot(g))],
        Op::Neg(x) => vec![(x, -g)],
        // subgradient 0 at the kink
        Op::Abs(x) => vec![(
            x,
            g * &val(x).mapv(|v| {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }),
        )],
        Op::Exp(x) => vec![(x, g * &node.value)],
        Op::Log(x) => vec![(x, g / val(x))],
        Op::Square(x) => vec![(x, g * &val(x).mapv(|v| 2.0 * v))],
        Op::Relu(x) => vec![(x, g * &val(x).mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }))],
        Op::Sum(x) => vec![(x, Array2::from_elem(val(x).dim(), g[[0, 0]]))],
        Op::Mean(x) => {
            let n = val(x).len() as f64;
            vec![(x, Array2::from_elem(val(x).dim(), g[[0, 0]] / n))]
        }
        Op::Max { x, at } => {
            let mut d = Array2::zeros(val(x).dim());
            d[at] = g[[0, 0]];
            vec![(x, d)]
        }
        Op::SumRows(x) => vec![(x, Array2::from_shape_fn(val(x).dim(), |(i, _)| g[[i, 0]]))],
        Op::SumCols(x) => vec![(x, Array2::from_shape_fn(val(x).dim(), |(_, j)| g[[0, j]]))],
        Op::SoftmaxRows { x, tau } => {
            let y = &node.value;
            let gy = g * y;
            let dot = gy.sum_axis(Axis(1)).insert_axis(Axis(1));
            let d = (&gy - &(y * &dot)) / tau;
            vec![(x, d)]
        }
        Op::Broadcast(x) => vec![(x, sum_to_shape(g, val(x).dim()))],
        Op::Transpose(x) => vec![(x, g.t().to_owned())],
        Op::SelectRow { x, row } => {
            let mut d = Array2::zeros(val(x).dim());
            d.row_mut(row).assign(&g.row(0));
            vec![(x, d)]
        }
        Op::Scale { x, c } => vec![(x, g * c)],
        Op::ClampMin { x, lo } => vec![(x, g * &val(x).mapv(|v| if v > lo { 1.0 } else { 0.0 }))],
        Op::StraightThrough(x) => vec![(x, g.clone())],
    }
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<Option<Array2<f64>>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// `∂root/∂v`, zeros if `v` does not reach the root or was recorded after it.
    pub fn wrt(&self, v: Var<'_>) -> Array2<f64> {
        self.by_id(v.id).unwrap_or_else(|| Array2::zeros(v.shape()))
    }

    pub fn by_id(&self, id: NodeId) -> Option<Array2<f64>> {
        match self.adjoints.get(id) {
            Some(Some(a)) => Some(a.clone()),
            Some(None) => Some(Array2::zeros(self.shapes[id])),
            None => None,
        }
    }
}

impl<'t> Var<'t> {
    pub fn id(self) -> NodeId {
        self.id
    }

    pub fn tape(self) -> &'t Tape {
        self.tape
    }

    pub fn value(self) -> Array2<f64> {
        self.tape.value_of(self.id)
    }

    /// Value of a `1×1` node.
    pub fn scalar_value(self) -> f64 {
        let nodes = self.tape.nodes.borrow();
        nodes[self.id].value[[0, 0]]
    }

    pub fn shape(self) -> (usize, usize) {
        self.tape.shape_of(self.id)
    }

    pub fn op_tag(self) -> &'static str {
        self.tape.nodes.borrow()[self.id].op.tag()
    }

    pub fn backward(self) -> Result<Gradients> {
        self.tape.backward(self)
    }
}
