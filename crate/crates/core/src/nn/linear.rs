use rand::Rng;

use super::kernels::{column_sums, matmul, matmul_a_bt, matmul_at_b};
use super::{he_init, NnError, ParamVisitor, Parameter, Result, Tensor};

/// Affine map `y = xW + b` applied to every row of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Parameter,
    pub b: Parameter,
}

impl Linear {
    /// He-initialized weights, zero biases.
    pub fn new<R: Rng + ?Sized>(prefix: &str, n_in: usize, n_out: usize, rng: &mut R) -> Self {
        Self {
            w: Parameter::new(format!("{prefix}.W"), he_init(&[n_in, n_out], n_in, rng), true),
            b: Parameter::zeros(format!("{prefix}.b"), &[n_out], false),
        }
    }

    /// Named with explicit weight/bias suffixes, e.g. `Wq`/`bq`.
    pub fn with_names<R: Rng + ?Sized>(
        w_name: String,
        b_name: String,
        n_in: usize,
        n_out: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            w: Parameter::new(w_name, he_init(&[n_in, n_out], n_in, rng), true),
            b: Parameter::zeros(b_name, &[n_out], false),
        }
    }

    pub fn n_in(&self) -> usize {
        self.w.value.shape()[0]
    }

    pub fn n_out(&self) -> usize {
        self.w.value.shape()[1]
    }

    /// `x` is viewed as `[rows, n_in]`; the output keeps the leading axes.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n_in, n_out) = (self.n_in(), self.n_out());
        if x.width() != n_in {
            return Err(NnError::ShapeMismatch {
                op: "linear",
                expected: vec![n_in],
                got: x.shape().to_vec(),
            });
        }
        let rows = x.rows();
        let mut y = matmul(x.data(), self.w.value.data(), rows, n_in, n_out);
        let b = self.b.value.data();
        for row in y.chunks_mut(n_out) {
            for (o, bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = n_out;
        Tensor::from_vec(&shape, y)
    }

    /// Accumulates `dW = xᵀ·dy`, `db = Σ dy` and returns `dx = dy·Wᵀ` when
    /// requested.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor, need_dx: bool) -> Result<Option<Tensor>> {
        let (n_in, n_out) = (self.n_in(), self.n_out());
        if dy.width() != n_out || dy.rows() != x.rows() {
            return Err(NnError::ShapeMismatch {
                op: "linear.backward",
                expected: vec![x.rows(), n_out],
                got: dy.shape().to_vec(),
            });
        }
        let rows = x.rows();
        let dw = matmul_at_b(x.data(), dy.data(), rows, n_in, n_out);
        self.w.accumulate(&dw);
        self.b.accumulate(&column_sums(dy.data(), rows, n_out));
        if !need_dx {
            return Ok(None);
        }
        let dx = matmul_a_bt(dy.data(), self.w.value.data(), rows, n_out, n_in);
        Ok(Some(Tensor::from_vec(x.shape(), dx)?))
    }
}

impl ParamVisitor for Linear {
    fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        f(&self.w);
        f(&self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}
