use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::nn::Params;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// Fully connected layer, `weight` stored row-major as `n_out x n_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub n_in: usize,
    pub n_out: usize,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Dense {
            weight: vec![T::zero(); n_in * n_out],
            bias: vec![T::zero(); n_out],
            n_in,
            n_out,
        }
    }

    /// Uniform fan-in initialisation with bound `sqrt(6 / n_in)`, zero bias.
    pub fn he_uniform<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / n_in.max(1) as f64).sqrt();
        let weight = (0..n_in * n_out)
            .map(|_| T::lit(rng.random_range(-bound..bound)))
            .collect();
        Dense {
            weight,
            bias: vec![T::zero(); n_out],
            n_in,
            n_out,
        }
    }

    fn apply(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        for (row, &b) in self.weight.chunks_exact(self.n_in).zip(&self.bias) {
            let mut acc = b;
            for (&w, &xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

/// Feed-forward network: ReLU on every hidden layer, linear output, inverted
/// dropout after each hidden activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
    /// One rate per hidden layer (`layers.len() - 1` entries).
    pub dropout: Vec<T>,
    pub activation: Activation,
}

/// Multiplicative masks per hidden layer; entries are 0 or `1 / (1 - p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask<T> {
    pub layers: Vec<Vec<T>>,
}

/// Activations recorded by a forward pass and consumed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct MlpCache<T> {
    /// Input seen by each layer (after dropout for hidden inputs).
    inputs: Vec<Vec<T>>,
    /// Hidden pre-activations.
    pre: Vec<Vec<T>>,
    masks: Option<DropoutMask<T>>,
}

/// Gradient buffers with the same layout as [`Mlp`] parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads<T> {
    pub weight: Vec<Vec<T>>,
    pub bias: Vec<Vec<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// `sizes = [input, hidden..., output]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], dropout: T, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(SurvError::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| Dense::he_uniform(w[0], w[1], rng))
            .collect::<Vec<_>>();
        Self::from_layers(layers, vec![dropout; sizes.len() - 2])
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(SurvError::invalid("an MLP needs at least one layer"));
        }
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self::from_layers(layers, vec![T::zero(); sizes.len() - 2])
    }

    pub fn from_layers(layers: Vec<Dense<T>>, dropout: Vec<T>) -> Result<Self> {
        if layers.is_empty() {
            return Err(SurvError::invalid("an MLP needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weight.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return Err(SurvError::dim(
                    format!("layer {i} parameter buffer"),
                    l.n_in * l.n_out,
                    l.weight.len(),
                ));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].n_out != w[1].n_in {
                return Err(SurvError::dim(
                    format!("layer {} input", i + 1),
                    w[0].n_out,
                    w[1].n_in,
                ));
            }
        }
        if dropout.len() != layers.len() - 1 {
            return Err(SurvError::dim(
                "dropout rates",
                layers.len() - 1,
                dropout.len(),
            ));
        }
        if let Some(p) = dropout.iter().find(|&&p| !(p >= T::zero() && p < T::one())) {
            return Err(SurvError::invalid(format!(
                "dropout rate {p} outside [0, 1)"
            )));
        }
        Ok(Mlp {
            layers,
            dropout,
            activation: Activation::Relu,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    /// Layer widths including input and output.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.n_out))
            .collect()
    }

    pub fn sample_dropout<R: Rng + ?Sized>(&self, rng: &mut R) -> DropoutMask<T> {
        let layers = self
            .layers
            .iter()
            .zip(&self.dropout)
            .map(|(l, &p)| {
                let keep = T::one() / (T::one() - p);
                let p = p.as_f64();
                (0..l.n_out)
                    .map(|_| {
                        if p > 0.0 && rng.random::<f64>() < p {
                            T::zero()
                        } else {
                            keep
                        }
                    })
                    .collect()
            })
            .collect();
        DropoutMask { layers }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(SurvError::dim("mlp input", self.input_dim(), x.len()));
        }
        Ok(())
    }

    fn check_mask(&self, mask: &DropoutMask<T>) -> Result<()> {
        if mask.layers.len() != self.layers.len() - 1 {
            return Err(SurvError::dim(
                "dropout mask layers",
                self.layers.len() - 1,
                mask.layers.len(),
            ));
        }
        for (m, l) in mask.layers.iter().zip(&self.layers) {
            if m.len() != l.n_out {
                return Err(SurvError::dim("dropout mask width", l.n_out, m.len()));
            }
        }
        Ok(())
    }

    /// Evaluation-mode forward pass (no dropout, no cache).
    pub fn predict(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i < last {
                relu_in_place(&mut next);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass recording what the backward pass needs. `mask` is only
    /// passed in training mode.
    pub fn forward(&self, x: &[T], mask: Option<&DropoutMask<T>>) -> Result<(Vec<T>, MlpCache<T>)> {
        self.check_input(x)?;
        if let Some(m) = mask {
            self.check_mask(m)?;
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.n_out);
            layer.apply(&cur, &mut z);
            inputs.push(cur);
            if i < last {
                let mut a = z.clone();
                relu_in_place(&mut a);
                if let Some(m) = mask {
                    for (v, &k) in a.iter_mut().zip(&m.layers[i]) {
                        *v *= k;
                    }
                }
                pre.push(z);
                cur = a;
            } else {
                cur = z;
            }
        }
        Ok((
            cur,
            MlpCache {
                inputs,
                pre,
                masks: mask.cloned(),
            },
        ))
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the network input.
    pub fn backward(
        &self,
        cache: &MlpCache<T>,
        upstream: &[T],
        grads: &mut MlpGrads<T>,
    ) -> Result<Vec<T>> {
        if cache.inputs.len() != self.layers.len()
            || cache
                .inputs
                .iter()
                .zip(&self.layers)
                .any(|(x, l)| x.len() != l.n_in)
        {
            return Err(SurvError::invalid(
                "stale cache: layer shapes do not match network",
            ));
        }
        if upstream.len() != self.output_dim() {
            return Err(SurvError::dim(
                "mlp upstream gradient",
                self.output_dim(),
                upstream.len(),
            ));
        }
        if grads.weight.len() != self.layers.len() {
            return Err(SurvError::dim(
                "gradient buffers",
                self.layers.len(),
                grads.weight.len(),
            ));
        }
        let mut g = upstream.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let x = &cache.inputs[i];
            let gw = &mut grads.weight[i];
            let gb = &mut grads.bias[i];
            for (o, &go) in g.iter().enumerate() {
                gb[o] += go;
                if go != T::zero() {
                    let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                    for (w, &xi) in row.iter_mut().zip(x) {
                        *w += go * xi;
                    }
                }
            }
            let mut gin = vec![T::zero(); layer.n_in];
            for (o, &go) in g.iter().enumerate() {
                if go == T::zero() {
                    continue;
                }
                let row = &layer.weight[o * layer.n_in..(o + 1) * layer.n_in];
                for (gi, &w) in gin.iter_mut().zip(row) {
                    *gi += go * w;
                }
            }
            if i > 0 {
                let pre = &cache.pre[i - 1];
                if let Some(m) = &cache.masks {
                    for (gi, &k) in gin.iter_mut().zip(&m.layers[i - 1]) {
                        *gi *= k;
                    }
                }
                for (gi, &z) in gin.iter_mut().zip(pre) {
                    if z <= T::zero() {
                        *gi = T::zero();
                    }
                }
            }
            g = gin;
        }
        Ok(g)
    }
}

fn relu_in_place<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

impl<T: Scalar> MlpGrads<T> {
    pub fn zeros_like(mlp: &Mlp<T>) -> Self {
        MlpGrads {
            weight: mlp
                .layers
                .iter()
                .map(|l| vec![T::zero(); l.weight.len()])
                .collect(),
            bias: mlp
                .layers
                .iter()
                .map(|l| vec![T::zero(); l.bias.len()])
                .collect(),
        }
    }
}

impl<T: Scalar> Params<T> for Mlp<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.weight"), l.weight.as_slice()));
            out.push((format!("layer{i}.bias"), l.bias.as_slice()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }
}

impl<T: Scalar> Params<T> for MlpGrads<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::with_capacity(self.weight.len() * 2);
        for (i, (w, b)) in self.weight.iter().zip(&self.bias).enumerate() {
            out.push((format!("layer{i}.weight"), w.as_slice()));
            out.push((format!("layer{i}.bias"), b.as_slice()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(self.weight.len() * 2);
        for (w, b) in self.weight.iter_mut().zip(self.bias.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}
