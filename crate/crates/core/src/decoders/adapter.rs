use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{add_outer, matvec, matvec_t_add};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, u: f64) -> f64 {
        match self {
            Activation::Relu => u.max(0.0),
            Activation::Tanh => u.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `u` and output `v`.
    #[inline]
    fn derivative(self, u: f64, v: f64) -> f64 {
        match self {
            Activation::Relu => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - v * v,
        }
    }
}

/// Residual bottleneck `x + W1 φ(W2 x)` with `W1: d x d'` and `W2: d' x d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterLayer {
    d: usize,
    inner: usize,
    pub(crate) w1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    activation: Activation,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct AdapterTrace {
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGrad {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl AdapterLayer {
    pub fn new(d: usize, inner: usize, w1: Vec<f64>, w2: Vec<f64>, activation: Activation) -> Result<Self> {
        if inner == 0 || inner >= d {
            return Err(Error::Parameter(format!(
                "adapter inner width must satisfy 0 < d' < d, got d'={inner}, d={d}"
            )));
        }
        if w1.len() != d * inner || w2.len() != inner * d {
            return Err(Error::Dimension(format!(
                "adapter weights must be {d}x{inner} and {inner}x{d}, got {} and {} entries",
                w1.len(),
                w2.len()
            )));
        }
        Ok(Self {
            d,
            inner,
            w1,
            w2,
            activation,
        })
    }

    pub fn zeros(d: usize, inner: usize) -> Result<Self> {
        Self::new(d, inner, vec![0.0; d * inner], vec![0.0; inner * d], Activation::Relu)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn inner_dim(&self) -> usize {
        self.inner
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    /// Mutable `(W1, W2)`.
    pub fn weights_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.w1, &mut self.w2)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::Dimension(format!(
                "adapter expects input of dimension {}, got {}",
                self.d,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.d];
        self.forward_into(x, &mut out, &mut AdapterTrace::default());
        Ok(out)
    }

    pub(crate) fn forward_into(&self, x: &[f64], out: &mut [f64], trace: &mut AdapterTrace) {
        trace.pre.resize(self.inner, 0.0);
        trace.act.resize(self.inner, 0.0);
        matvec(&self.w2, self.inner, self.d, x, &mut trace.pre);
        for (v, &u) in trace.act.iter_mut().zip(&trace.pre) {
            *v = self.activation.apply(u);
        }
        matvec(&self.w1, self.d, self.inner, &trace.act, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o += xi;
        }
    }

    /// Accumulates parameter gradients for upstream gradient `dy` and adds
    /// the input gradient to `dx`.
    pub(crate) fn backward(&self, x: &[f64], trace: &AdapterTrace, dy: &[f64], grad: &mut AdapterGrad, dx: &mut [f64]) {
        add_outer(&mut grad.w1, dy, &trace.act);
        let mut du = vec![0.0; self.inner];
        matvec_t_add(&self.w1, self.d, self.inner, dy, &mut du);
        for ((g, &u), &v) in du.iter_mut().zip(&trace.pre).zip(&trace.act) {
            *g *= self.activation.derivative(u, v);
        }
        add_outer(&mut grad.w2, &du, x);
        for (a, b) in dx.iter_mut().zip(dy) {
            *a += b;
        }
        matvec_t_add(&self.w2, self.inner, self.d, &du, dx);
    }

    pub fn zero_grad(&self) -> AdapterGrad {
        AdapterGrad {
            w1: vec![0.0; self.w1.len()],
            w2: vec![0.0; self.w2.len()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_w1_is_identity() {
        let mut layer = AdapterLayer::zeros(3, 2).unwrap();
        layer.w2 = vec![0.3, -1.0, 2.0, 0.5, 0.5, 0.5];
        let x = [0.1, -2.0, 7.0];
        assert_eq!(layer.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn negative_branch_is_cut_by_relu() {
        let layer = AdapterLayer::new(2, 1, vec![5.0, -4.0], vec![-1.0, -1.0], Activation::Relu).unwrap();
        assert_eq!(layer.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn hand_worked_case() {
        let layer = AdapterLayer::new(2, 1, vec![2.0, 3.0], vec![1.0, 1.0], Activation::Relu).unwrap();
        let x = [1.0, 2.0];
        let y = layer.forward(&x).unwrap();
        // Straight-line evaluation of x + W1 relu(W2 x).
        let h = (1.0 * x[0] + 1.0 * x[1]).max(0.0);
        let direct = [x[0] + 2.0 * h, x[1] + 3.0 * h];
        assert_eq!(y, direct.to_vec());
        assert_eq!(y, vec![7.0, 11.0]);
    }

    #[test]
    fn shape_errors() {
        let layer = AdapterLayer::zeros(3, 2).unwrap();
        assert!(matches!(layer.forward(&[1.0]), Err(Error::Dimension(_))));
        assert!(matches!(AdapterLayer::zeros(2, 2), Err(Error::Parameter(_))));
        assert!(matches!(
            AdapterLayer::new(3, 1, vec![0.0; 2], vec![0.0; 3], Activation::Relu),
            Err(Error::Dimension(_))
        ));
    }
}
