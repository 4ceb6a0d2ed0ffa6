use super::Tensor;

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    /// Whether decoupled weight decay applies (weight matrices only).
    pub decay: bool,
    /// Set when a backward pass has written into `grad`.
    pub has_grad: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor, decay: bool) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
            decay,
            has_grad: false,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: &[usize], decay: bool) -> Self {
        Self::new(name, Tensor::zeros(shape), decay)
    }

    /// Adds `g` into the gradient buffer.
    pub fn accumulate(&mut self, g: &[f64]) {
        debug_assert_eq!(g.len(), self.grad.len());
        for (a, b) in self.grad.data_mut().iter_mut().zip(g) {
            *a += b;
        }
        self.has_grad = true;
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
        self.has_grad = false;
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything that owns parameters, visited in a fixed order.
pub trait ParamVisitor {
    fn visit(&self, f: &mut dyn FnMut(&Parameter));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |p| n += p.len());
        n
    }

    fn zero_grad(&mut self) {
        self.visit_mut(&mut |p| p.zero_grad());
    }

    /// All parameter values concatenated in visit order.
    fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |p| out.extend_from_slice(p.value.data()));
        out
    }

    fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |p| out.extend_from_slice(p.grad.data()));
        out
    }

    /// Overwrites parameter values from a flat vector in visit order.
    fn set_flat_values(&mut self, values: &[f64]) {
        let mut offset = 0;
        self.visit_mut(&mut |p| {
            let n = p.len();
            p.value.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        });
        assert_eq!(offset, values.len(), "flat parameter length mismatch");
    }

    fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |p| out.push(p.name.clone()));
        out
    }
}
