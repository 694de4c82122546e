//! Dense feedforward networks with ReLU or identity activations.
//!
//! Weights are stored exactly for the verification path and as `f64` for
//! the loss path. A network also exposes its affine restriction to a fixed
//! ReLU activation pattern, which the built-in solver enumerates.

use alloc::vec::Vec;

use thiserror::Error;

use crate::qelim::{LinearConstraint, LinearExpr};
use crate::rational::{to_f64, Q};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `outputs × inputs`.
    pub weights: Vec<Vec<Q>>,
    pub bias: Vec<Q>,
    pub activation: Activation,
    weights_f64: Vec<Vec<f64>>,
    bias_f64: Vec<f64>,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("network has no layers")]
    Empty,
    #[error("layer {layer}: {detail}")]
    Dimension { layer: usize, detail: alloc::string::String },
    #[error("expected an input of length {expected}, got {actual}")]
    InputLength { expected: usize, actual: usize },
    #[error("expected {expected} parameters, got {actual}")]
    ParameterCount { expected: usize, actual: usize },
}

/// Per-ReLU-unit flags in layer order, `true` for active.
pub type ActivationPattern = Vec<bool>;

/// On the region where every guard holds, the network computes
/// `outputs[j]` exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineRestriction<V: Ord> {
    pub outputs: Vec<LinearExpr<V>>,
    pub guard: Vec<LinearConstraint<V>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    /// Validates layer dimensions and builds the float copy.
    pub fn new(layers: Vec<(Vec<Vec<Q>>, Vec<Q>, Activation)>) -> Result<Self, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut out: Vec<Layer> = Vec::with_capacity(layers.len());
        for (i, (weights, bias, activation)) in layers.into_iter().enumerate() {
            let dim = |detail| NetworkError::Dimension { layer: i, detail };
            if weights.is_empty() {
                return Err(dim("weight matrix has no rows".into()));
            }
            let cols = weights[0].len();
            if cols == 0 || weights.iter().any(|r| r.len() != cols) {
                return Err(dim("weight rows differ in length or are empty".into()));
            }
            if bias.len() != weights.len() {
                return Err(dim(alloc::format!("{} weight rows but bias of length {}", weights.len(), bias.len())));
            }
            if let Some(prev) = out.last() {
                if prev.outputs() != cols {
                    return Err(dim(alloc::format!("expects {cols} inputs but the previous layer has {} outputs", prev.outputs())));
                }
            }
            let weights_f64 = weights.iter().map(|r| r.iter().map(to_f64).collect()).collect();
            let bias_f64 = bias.iter().map(to_f64).collect();
            out.push(Layer { weights, bias, activation, weights_f64, bias_f64 });
        }
        Ok(Network { layers: out })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn relu_count(&self) -> usize {
        self.layers.iter().filter(|l| l.activation == Activation::Relu).map(Layer::outputs).sum()
    }

    fn check_input(&self, n: usize) -> Result<(), NetworkError> {
        if n == self.input_dim() {
            Ok(())
        } else {
            Err(NetworkError::InputLength { expected: self.input_dim(), actual: n })
        }
    }

    pub fn eval_exact(&self, input: &[Q]) -> Result<Vec<Q>, NetworkError> {
        self.check_input(input.len())?;
        let mut x = input.to_vec();
        for l in &self.layers {
            x = l
                .weights
                .iter()
                .zip(&l.bias)
                .map(|(row, b)| {
                    let pre: Q = row.iter().zip(&x).map(|(w, v)| w * v).sum::<Q>() + b;
                    match l.activation {
                        Activation::Relu if pre < Q::from_integer(0.into()) => Q::from_integer(0.into()),
                        _ => pre,
                    }
                })
                .collect();
        }
        Ok(x)
    }

    pub fn eval_f64(&self, input: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(input.len())?;
        let mut x = input.to_vec();
        for l in &self.layers {
            x = l
                .weights_f64
                .iter()
                .zip(&l.bias_f64)
                .map(|(row, b)| {
                    let pre = row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + b;
                    match l.activation {
                        Activation::Relu => pre.max(0.0),
                        Activation::Identity => pre,
                    }
                })
                .collect();
        }
        Ok(x)
    }

    /// Number of weights and biases, in [`Network::params_f64`] order.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum()
    }

    /// Flattened parameters: per layer, the weight matrix row-major, then
    /// the bias.
    pub fn params_f64(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            for row in &l.weights_f64 {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&l.bias_f64);
        }
        out
    }

    /// Forward pass with the structure of `self` but parameters `params`.
    /// `kink` is lowered to the smallest `|pre-activation|` seen at a ReLU.
    pub fn eval_with<T: Scalar>(&self, params: &[T], input: &[T], kink: &mut f64) -> Result<Vec<T>, NetworkError> {
        self.check_input(input.len())?;
        if params.len() != self.param_count() {
            return Err(NetworkError::ParameterCount { expected: self.param_count(), actual: params.len() });
        }
        let mut x = input.to_vec();
        let mut at = 0;
        for l in &self.layers {
            let (n, m) = (l.outputs(), l.inputs());
            let w = &params[at..at + n * m];
            let b = &params[at + n * m..at + n * m + n];
            at += n * (m + 1);
            let mut next = Vec::with_capacity(n);
            for i in 0..n {
                let mut pre = b[i].clone();
                for j in 0..m {
                    pre = pre.add(&w[i * m + j].mul(&x[j]));
                }
                if l.activation == Activation::Relu {
                    *kink = kink.min(libm::fabs(pre.value()));
                    pre = pre.relu();
                }
                next.push(pre);
            }
            x = next;
        }
        Ok(x)
    }

    /// The activation pattern realised at `input`; a unit with zero
    /// pre-activation counts as active.
    pub fn pattern_at(&self, input: &[Q]) -> Result<ActivationPattern, NetworkError> {
        self.check_input(input.len())?;
        let zero = Q::from_integer(0.into());
        let mut pattern = Vec::with_capacity(self.relu_count());
        let mut x = input.to_vec();
        for l in &self.layers {
            x = l
                .weights
                .iter()
                .zip(&l.bias)
                .map(|(row, b)| {
                    let pre: Q = row.iter().zip(&x).map(|(w, v)| w * v).sum::<Q>() + b;
                    if l.activation == Activation::Relu {
                        pattern.push(pre >= zero);
                        if pre < zero {
                            return zero.clone();
                        }
                    }
                    pre
                })
                .collect();
        }
        Ok(pattern)
    }

    /// Pre-activations of layer `layer` as affine expressions of the
    /// layer's inputs.
    pub fn layer_affine<V: Ord + Clone>(&self, layer: usize, inputs: &[LinearExpr<V>]) -> Vec<LinearExpr<V>> {
        let l = &self.layers[layer];
        l.weights
            .iter()
            .zip(&l.bias)
            .map(|(row, b)| {
                let mut e = LinearExpr::constant(b.clone());
                for (w, x) in row.iter().zip(inputs) {
                    e = e.add(&x.scale(w));
                }
                e
            })
            .collect()
    }

    /// The affine map the network computes on the region of `pattern`,
    /// over inputs `vars`. Active units are guarded by `pre >= 0`,
    /// inactive ones by `pre < 0`, so the guards of distinct patterns
    /// partition the input space.
    pub fn affine_restriction<V: Ord + Clone>(&self, vars: &[V], pattern: &[bool]) -> AffineRestriction<V> {
        assert_eq!(vars.len(), self.input_dim(), "one variable per input");
        assert_eq!(pattern.len(), self.relu_count(), "one flag per ReLU unit");
        let zero = LinearExpr::zero();
        let mut x: Vec<LinearExpr<V>> = vars.iter().cloned().map(LinearExpr::var).collect();
        let mut guard = Vec::new();
        let mut flags = pattern.iter();
        for i in 0..self.layers.len() {
            let pre = self.layer_affine(i, &x);
            x = match self.layers[i].activation {
                Activation::Identity => pre,
                Activation::Relu => pre
                    .into_iter()
                    .map(|e| {
                        if *flags.next().expect("pattern length checked") {
                            guard.push(LinearConstraint::ge(&e, &zero));
                            e
                        } else {
                            guard.push(LinearConstraint::lt(&e, &zero));
                            LinearExpr::zero()
                        }
                    })
                    .collect(),
            };
        }
        AffineRestriction { outputs: x, guard }
    }
}
