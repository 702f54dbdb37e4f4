//! Primitive operations. Each records one node and returns its handle.

use ndarray::{Array2, Axis};

use super::tape::{Op, Var};
use crate::error::{Error, Result};

fn same_tape(a: Var<'_>, b: Var<'_>) {
    assert!(
        std::ptr::eq(a.tape, b.tape),
        "operands live on different tapes"
    );
}

fn same_shape(op: &'static str, a: Var<'_>, b: Var<'_>) -> Result<()> {
    same_tape(a, b);
    let (l, r) = (a.shape(), b.shape());
    if l == r {
        Ok(())
    } else {
        Err(Error::Shape { op, lhs: l, rhs: r })
    }
}

impl<'t> Var<'t> {
    fn unary(self, op: Op, f: impl Fn(&Array2<f64>) -> Array2<f64>) -> Var<'t> {
        let v = f(&self.value());
        self.tape.push(v, op)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        same_shape("add", self, other)?;
        let v = self.value() + other.value();
        Ok(self.tape.push(v, Op::Add(self.id, other.id)))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        same_shape("sub", self, other)?;
        let v = self.value() - other.value();
        Ok(self.tape.push(v, Op::Sub(self.id, other.id)))
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        same_shape("mul", self, other)?;
        let v = self.value() * other.value();
        Ok(self.tape.push(v, Op::Mul(self.id, other.id)))
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        same_tape(self, other);
        let (l, r) = (self.shape(), other.shape());
        if l.1 != r.0 {
            return Err(Error::Shape {
                op: "matmul",
                lhs: l,
                rhs: r,
            });
        }
        let v = self.value().dot(&other.value());
        Ok(self.tape.push(v, Op::MatMul(self.id, other.id)))
    }

    pub fn neg(self) -> Var<'t> {
        self.unary(Op::Neg(self.id), |x| -x)
    }

    pub fn abs(self) -> Var<'t> {
        self.unary(Op::Abs(self.id), |x| x.mapv(f64::abs))
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Op::Exp(self.id), |x| x.mapv(f64::exp))
    }

    /// Natural log. Zero or negative entries are a domain error; NaN propagates.
    pub fn log(self) -> Result<Var<'t>> {
        let x = self.value();
        if let Some(bad) = x.iter().find(|&&v| v <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("non-positive entry {bad}"),
            });
        }
        Ok(self.tape.push(x.mapv(f64::ln), Op::Log(self.id)))
    }

    pub fn square(self) -> Var<'t> {
        self.unary(Op::Square(self.id), |x| x.mapv(|v| v * v))
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(Op::Relu(self.id), |x| x.mapv(|v| v.max(0.0)))
    }

    /// Sum of all entries, as a `1×1` node.
    pub fn sum(self) -> Var<'t> {
        self.unary(Op::Sum(self.id), |x| Array2::from_elem((1, 1), x.sum()))
    }

    pub fn mean(self) -> Var<'t> {
        self.unary(Op::Mean(self.id), |x| {
            Array2::from_elem((1, 1), x.sum() / x.len() as f64)
        })
    }

    /// Largest entry; the gradient goes to the first maximizer in row-major order.
    pub fn max(self) -> Var<'t> {
        let x = self.value();
        let mut at = (0, 0);
        let mut best = f64::NEG_INFINITY;
        for ((i, j), &v) in x.indexed_iter() {
            if v > best {
                best = v;
                at = (i, j);
            }
        }
        self.tape
            .push(Array2::from_elem((1, 1), best), Op::Max { x: self.id, at })
    }

    /// Row sums, `n×m → n×1`.
    pub fn sum_rows(self) -> Var<'t> {
        self.unary(Op::SumRows(self.id), |x| {
            x.sum_axis(Axis(1)).insert_axis(Axis(1))
        })
    }

    /// Column sums, `n×m → 1×m`.
    pub fn sum_cols(self) -> Var<'t> {
        self.unary(Op::SumCols(self.id), |x| {
            x.sum_axis(Axis(0)).insert_axis(Axis(0))
        })
    }

    /// Row-wise `softmax(x / tau)`, stabilized by the row max.
    pub fn softmax_rows(self, tau: f64) -> Result<Var<'t>> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidTemperature(tau));
        }
        let mut y = self.value();
        for mut row in y.rows_mut() {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| ((v - max) / tau).exp());
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        Ok(self.tape.push(y, Op::SoftmaxRows { x: self.id, tau }))
    }

    /// Expands a `1×1`, `1×m` or `n×1` node to `rows×cols`.
    pub fn broadcast(self, rows: usize, cols: usize) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if !((r == rows || r == 1) && (c == cols || c == 1)) {
            return Err(Error::Shape {
                op: "broadcast",
                lhs: (r, c),
                rhs: (rows, cols),
            });
        }
        let x = self.value();
        let v = x.broadcast((rows, cols)).expect("checked").to_owned();
        Ok(self.tape.push(v, Op::Broadcast(self.id)))
    }

    pub fn transpose(self) -> Var<'t> {
        self.unary(Op::Transpose(self.id), |x| x.t().to_owned())
    }

    /// Row `row` (0-based) as a `1×m` node.
    pub fn select_row(self, row: usize) -> Result<Var<'t>> {
        let (r, c) = self.shape();
        if row >= r {
            return Err(Error::Shape {
                op: "select_row",
                lhs: (r, c),
                rhs: (row, c),
            });
        }
        Ok(self.unary(Op::SelectRow { x: self.id, row }, |x| {
            x.row(row).to_owned().insert_axis(Axis(0))
        }))
    }

    /// Multiply every entry by a constant.
    pub fn scale(self, c: f64) -> Var<'t> {
        self.unary(Op::Scale { x: self.id, c }, |x| x * c)
    }

    /// Divide every entry by a non-zero constant.
    pub fn div_scalar(self, c: f64) -> Result<Var<'t>> {
        if c == 0.0 || !c.is_finite() {
            return Err(Error::Domain {
                op: "div_scalar",
                detail: format!("divisor {c}"),
            });
        }
        Ok(self.scale(1.0 / c))
    }

    /// `max(x, lo)` elementwise, NaN passing through; no gradient flows through clamped entries.
    pub fn clamp_min(self, lo: f64) -> Var<'t> {
        self.unary(Op::ClampMin { x: self.id, lo }, |x| {
            x.mapv(|v| if v.is_nan() { v } else { v.max(lo) })
        })
    }

    /// Forward value `forward`, backward pass routed unchanged into `self`.
    pub fn straight_through(self, forward: Array2<f64>) -> Result<Var<'t>> {
        if forward.dim() != self.shape() {
            return Err(Error::Shape {
                op: "straight_through",
                lhs: self.shape(),
                rhs: forward.dim(),
            });
        }
        Ok(self.tape.push(forward, Op::StraightThrough(self.id)))
    }

    /// Adds a constant array (recorded as a constant leaf).
    pub fn add_const(self, c: Array2<f64>) -> Result<Var<'t>> {
        let k = self.tape.constant(c);
        self.add(k)
    }

    /// Elementwise product with a constant array.
    pub fn mul_const(self, c: Array2<f64>) -> Result<Var<'t>> {
        let k = self.tape.constant(c);
        self.mul(k)
    }
}

#[cfg(test)]
mod tests {
    use super::super::Tape;
    use super::*;
    use ndarray::array;

    #[test]
    fn abs_at_zero_has_zero_subgradient() {
        let tape = Tape::new();
        let x = tape.var(array![[0.0, -2.0, 3.0]]);
        let y = x.abs().sum();
        assert_eq!(x.abs().value(), array![[0.0, 2.0, 3.0]]);
        let g = y.backward().unwrap();
        assert_eq!(g.wrt(x), array![[0.0, -1.0, 1.0]]);
    }

    #[test]
    fn relu_at_zero_has_zero_subgradient() {
        let tape = Tape::new();
        let x = tape.var(array![[0.0, -1.0, 2.0]]);
        let g = x.relu().sum().backward().unwrap();
        assert_eq!(g.wrt(x), array![[0.0, 0.0, 1.0]]);
    }

    #[test]
    fn softmax_rows_forward() {
        let tape = Tape::new();
        let x = tape.var(array![[0.0, -1.0]]);
        let y = x.softmax_rows(1.0).unwrap().value();
        assert!((y[[0, 0]] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((y[[0, 1]] - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!(matches!(
            x.softmax_rows(0.0),
            Err(Error::InvalidTemperature(_))
        ));
    }

    #[test]
    fn shape_errors() {
        let tape = Tape::new();
        let a = tape.var(Array2::zeros((2, 3)));
        let b = tape.var(Array2::zeros((3, 2)));
        assert!(matches!(a.add(b), Err(Error::Shape { op: "add", .. })));
        assert!(matches!(
            a.matmul(a),
            Err(Error::Shape { op: "matmul", .. })
        ));
        assert!(a.matmul(b).is_ok());
        assert!(a.broadcast(4, 3).is_err());
        assert!(a.select_row(2).is_err());
    }

    #[test]
    fn domain_errors() {
        let tape = Tape::new();
        let x = tape.var(array![[1.0, 0.0]]);
        assert!(matches!(x.log(), Err(Error::Domain { op: "log", .. })));
        assert!(matches!(x.div_scalar(0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let tape = Tape::new();
        let x = tape.var(array![[1.0, 2.0]]);
        assert!(matches!(
            x.square().backward(),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn dot_product_gradient() {
        // root = s·s  ⇒  ∇ = 2s
        let tape = Tape::new();
        let s = tape.column(&[0.5, -1.5, 2.0]);
        let root = s.transpose().matmul(s).unwrap();
        let g = root.backward().unwrap();
        assert_eq!(g.wrt(s), array![[1.0], [-3.0], [4.0]]);
    }

    #[test]
    fn broadcast_gradient_sums_over_expanded_axes() {
        let tape = Tape::new();
        let r = tape.var(array![[1.0, 2.0]]);
        let c = tape.var(array![[3.0], [4.0], [5.0]]);
        let y = r
            .broadcast(3, 2)
            .unwrap()
            .mul(c.broadcast(3, 2).unwrap())
            .unwrap()
            .sum();
        assert_eq!(y.scalar_value(), 3.0 * 12.0);
        let g = y.backward().unwrap();
        assert_eq!(g.wrt(r), array![[12.0, 12.0]]);
        assert_eq!(g.wrt(c), array![[3.0], [3.0], [3.0]]);
    }

    #[test]
    fn straight_through_routes_gradient() {
        let tape = Tape::new();
        let x = tape.var(array![[0.2, 0.8]]);
        let st = x.straight_through(array![[0.0, 1.0]]).unwrap();
        let y = st.mul_const(array![[3.0, 5.0]]).unwrap().sum();
        assert_eq!(y.scalar_value(), 5.0);
        assert_eq!(y.backward().unwrap().wrt(x), array![[3.0, 5.0]]);
    }

    #[test]
    fn unused_nodes_get_zero_adjoint() {
        let tape = Tape::new();
        let x = tape.var(array![[1.0]]);
        let unused = tape.var(array![[2.0, 3.0]]);
        let g = x.square().backward().unwrap();
        assert_eq!(g.wrt(unused), Array2::<f64>::zeros((1, 2)));
    }

    #[test]
    fn max_routes_to_first_maximizer() {
        let tape = Tape::new();
        let x = tape.var(array![[1.0, 3.0], [3.0, 0.0]]);
        let m = x.max();
        assert_eq!(m.scalar_value(), 3.0);
        assert_eq!(m.backward().unwrap().wrt(x), array![[0.0, 1.0], [0.0, 0.0]]);
    }
}
