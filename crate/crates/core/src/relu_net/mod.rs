//! Layered affine + activation networks.
//!
//! During construction a layer may mix relu and identity neurons. [`lower`]
//! turns every hidden identity neuron into a shifted relu so the final
//! artifact is a plain ReLU network with an affine readout.

mod json;
mod ops;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ops::{compose, lower, pad, pad_depth, parallel, stack, sum_nets, sum_outputs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

/// Affine expression `constant + Σ w_j v_j` over the neurons of one layer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn var(i: usize) -> Self {
        Affine {
            terms: vec![(i, 1.0)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(i: usize, w: f64) -> Self {
        Affine {
            terms: vec![(i, w)],
            constant: 0.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Affine {
            terms: self.terms.iter().map(|&(i, w)| (i, c * w)).collect(),
            constant: c * self.constant,
        }
    }

    pub fn plus(&self, other: &Affine) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Affine {
            terms,
            constant: self.constant + other.constant,
        }
    }

    pub fn plus_const(&self, c: f64) -> Self {
        Affine {
            terms: self.terms.clone(),
            constant: self.constant + c,
        }
    }

    pub fn add_term(&mut self, i: usize, w: f64) {
        self.terms.push((i, w));
    }

    /// Merges repeated indices (in order of appearance), drops zero weights
    /// and sorts by index, so evaluation order matches a dense row.
    fn normalized_terms(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, w) in &self.terms {
            match out.iter_mut().find(|(j, _)| *j == i) {
                Some(slot) => slot.1 += w,
                None => out.push((i, w)),
            }
        }
        out.retain(|&(_, w)| w != 0.0);
        out.sort_by_key(|&(i, _)| i);
        out
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(i, w)| acc + w * v[i])
    }
}

/// One layer: `out_i = act_i(bias_i + Σ_j w_ij in_j)` with sparse rows.
/// `hint_i`, when present, is a magnitude bound on the neuron's value over
/// the network's domain, guaranteed by whoever built the neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    inputs: usize,
    rows: Vec<Vec<(usize, f64)>>,
    bias: Vec<f64>,
    act: Vec<Activation>,
    hint: Vec<Option<f64>>,
}

impl Layer {
    pub fn new(inputs: usize) -> Self {
        Layer {
            inputs,
            rows: Vec::new(),
            bias: Vec::new(),
            act: Vec::new(),
            hint: Vec::new(),
        }
    }

    pub fn dense(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.len() != bias.len() {
            return Err(Error::LengthMismatch {
                left: weights.len(),
                right: bias.len(),
            });
        }
        let inputs = weights.first().map_or(0, Vec::len);
        let mut layer = Layer::new(inputs);
        for (row, b) in weights.into_iter().zip(bias) {
            if row.len() != inputs {
                return Err(Error::DimensionMismatch {
                    expected: inputs,
                    got: row.len(),
                });
            }
            let terms = row.into_iter().enumerate().collect();
            layer.push(activation, &Affine { terms, constant: b }, None);
        }
        Ok(layer)
    }

    /// Appends a neuron computing `act(expr)`; returns its index.
    pub fn push(&mut self, act: Activation, expr: &Affine, hint: Option<f64>) -> usize {
        let row = expr.normalized_terms();
        debug_assert!(row.iter().all(|&(j, _)| j < self.inputs));
        self.rows.push(row);
        self.bias.push(expr.constant);
        self.act.push(act);
        self.hint.push(hint);
        self.rows.len() - 1
    }

    pub fn relu(&mut self, expr: &Affine) -> usize {
        self.push(Activation::Relu, expr, None)
    }

    pub fn identity(&mut self, expr: &Affine, hint: Option<f64>) -> usize {
        self.push(Activation::Identity, expr, hint)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activations(&self) -> &[Activation] {
        &self.act
    }

    pub fn hints(&self) -> &[Option<f64>] {
        &self.hint
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|&&(k, _)| k == j)
            .map_or(0.0, |&(_, w)| w)
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) {
        let row = &mut self.rows[i];
        match row.iter_mut().find(|(k, _)| *k == j) {
            Some(slot) => slot.1 = w,
            None => row.push((j, w)),
        }
        row.retain(|&(_, w)| w != 0.0);
        row.sort_by_key(|&(k, _)| k);
    }

    pub fn set_bias(&mut self, i: usize, b: f64) {
        self.bias[i] = b;
    }

    pub fn dense_weights(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; self.inputs];
                for &(j, w) in row {
                    dense[j] = w;
                }
                dense
            })
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// The layer's activation if it is uniform.
    pub fn uniform_activation(&self) -> Option<Activation> {
        let first = *self.act.first()?;
        self.act.iter().all(|&a| a == first).then_some(first)
    }

    fn is_readout(&self) -> bool {
        self.act.iter().all(|&a| a == Activation::Identity)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows.len())
            .map(|i| {
                let z = self.rows[i]
                    .iter()
                    .fold(self.bias[i], |acc, &(j, w)| acc + w * x[j]);
                self.act[i].apply(z)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeReport {
    pub width: usize,
    pub depth: usize,
    pub params: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReluNet {
    input_dim: usize,
    layers: Vec<Layer>,
    domain: (f64, f64),
}

const CHUNK: usize = 512;

impl ReluNet {
    pub fn new(input_dim: usize, layers: Vec<Layer>, domain: (f64, f64)) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("no layers".into()));
        }
        if !(domain.0 <= domain.1) {
            return Err(Error::InvalidNetwork(format!(
                "domain [{}, {}] is empty",
                domain.0, domain.1
            )));
        }
        let mut width = input_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.inputs != width {
                return Err(Error::InvalidNetwork(format!(
                    "layer {l} expects {} inputs but receives {width}",
                    layer.inputs
                )));
            }
            if layer.is_empty() {
                return Err(Error::InvalidNetwork(format!("layer {l} is empty")));
            }
            if layer
                .rows
                .iter()
                .flatten()
                .any(|&(j, w)| j >= width || !w.is_finite())
                || layer.bias.iter().any(|b| !b.is_finite())
            {
                return Err(Error::InvalidNetwork(format!(
                    "layer {l} has out-of-range or non-finite entries"
                )));
            }
            width = layer.len();
        }
        Ok(ReluNet {
            input_dim,
            layers,
            domain,
        })
    }

    /// The identity map on `dim` inputs (depth 0).
    pub fn identity(dim: usize, domain: (f64, f64)) -> Self {
        let mut l = Layer::new(dim);
        for i in 0..dim {
            l.identity(&Affine::var(i), None);
        }
        ReluNet::new(dim, vec![l], domain).expect("well formed")
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::len)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn with_domain(mut self, domain: (f64, f64)) -> Self {
        self.domain = domain;
        self
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub(crate) fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    fn ends_with_readout(&self) -> bool {
        self.layers.last().is_some_and(Layer::is_readout)
    }

    /// Number of hidden layers: all layers but a final all-identity readout.
    pub fn depth(&self) -> usize {
        self.layers.len() - self.ends_with_readout() as usize
    }

    /// Largest hidden layer.
    pub fn width(&self) -> usize {
        self.layers[..self.depth()]
            .iter()
            .map(Layer::len)
            .max()
            .unwrap_or(0)
    }

    /// Dense parameter count `Σ (out·in + out)`.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.len() * (l.inputs + 1)).sum()
    }

    pub fn size_report(&self) -> SizeReport {
        SizeReport {
            width: self.width(),
            depth: self.depth(),
            params: self.param_count(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.layers.iter().map(Layer::nnz).sum()
    }

    /// True when hidden layers are pure relu and the last layer is either a
    /// pure identity readout or pure relu.
    pub fn is_lowered(&self) -> bool {
        let d = self.depth();
        self.layers[..d]
            .iter()
            .all(|l| l.act.iter().all(|&a| a == Activation::Relu))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut v = x.to_vec();
        for layer in &self.layers {
            v = layer.apply(&v);
        }
        Ok(v)
    }

    /// Scalar evaluation of a 1-input, 1-output net.
    pub fn eval1(&self, x: f64) -> f64 {
        self.forward(&[x]).expect("scalar network")[0]
    }

    /// Evaluates a 1-input net at many points; returns one vector per output.
    /// Arithmetic is performed in the same order as [`ReluNet::forward`], so
    /// results agree bit for bit.
    pub fn eval_batch(&self, xs: &[f64]) -> Result<Vec<Vec<f64>>> {
        if self.input_dim != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.input_dim,
            });
        }
        let k = self.output_dim();
        let mut out = vec![Vec::with_capacity(xs.len()); k];
        let max_w = self.layers.iter().map(Layer::len).max().unwrap_or(1).max(1);
        let mut cur = vec![0.0; max_w * CHUNK];
        let mut next = vec![0.0; max_w * CHUNK];
        for chunk in xs.chunks(CHUNK) {
            let c = chunk.len();
            cur[..c].copy_from_slice(chunk);
            for layer in &self.layers {
                for (i, row) in layer.rows.iter().enumerate() {
                    let dst = &mut next[i * c..(i + 1) * c];
                    dst.fill(layer.bias[i]);
                    for &(j, w) in row {
                        let src = &cur[j * c..(j + 1) * c];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += w * s;
                        }
                    }
                    if layer.act[i] == Activation::Relu {
                        for d in dst.iter_mut() {
                            *d = d.max(0.0);
                        }
                    }
                }
                std::mem::swap(&mut cur, &mut next);
            }
            for (o, col) in out.iter_mut().enumerate() {
                col.extend_from_slice(&cur[o * c..(o + 1) * c]);
            }
        }
        Ok(out)
    }

    /// Scalar batch evaluation of a 1-input, 1-output net.
    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        let mut out = self.eval_batch(xs).expect("scalar network");
        assert_eq!(out.len(), 1, "scalar network");
        out.pop().unwrap()
    }

    /// Per-layer, per-neuron value intervals over the declared domain
    /// (after activation), intersected with the neurons' bound hints.
    pub fn intervals(&self) -> Vec<Vec<(f64, f64)>> {
        let mut prev: Vec<(f64, f64)> = vec![self.domain; self.input_dim];
        let mut all = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut cur = Vec::with_capacity(layer.len());
            for i in 0..layer.len() {
                let (mut lo, mut hi) = (layer.bias[i], layer.bias[i]);
                for &(j, w) in &layer.rows[i] {
                    let (a, b) = prev[j];
                    if w > 0.0 {
                        lo += w * a;
                        hi += w * b;
                    } else {
                        lo += w * b;
                        hi += w * a;
                    }
                }
                if layer.act[i] == Activation::Relu {
                    lo = lo.max(0.0);
                    hi = hi.max(0.0);
                }
                if let Some(h) = layer.hint[i] {
                    lo = lo.max(-h);
                    hi = hi.min(h);
                    if lo > hi {
                        // inconsistent hint; fall back to the hint itself
                        lo = -h;
                        hi = h;
                    }
                }
                cur.push((lo, hi));
            }
            all.push(cur.clone());
            prev = cur;
        }
        all
    }

    /// Magnitude hints of the outputs, if every output neuron carries one.
    pub fn output_hints(&self) -> Option<Vec<f64>> {
        self.layers.last()?.hint.iter().copied().collect()
    }

    /// Multiplies the outputs by `c`.
    pub fn scale_output(mut self, c: f64) -> Self {
        let last = self.layers.last_mut().expect("nonempty");
        if !last.is_readout() {
            self = self.with_readout();
            return self.scale_output(c);
        }
        for i in 0..last.len() {
            for t in &mut last.rows[i] {
                t.1 *= c;
            }
            last.rows[i].retain(|&(_, w)| w != 0.0);
            last.bias[i] *= c;
            last.hint[i] = last.hint[i].map(|h| h * c.abs());
        }
        self
    }

    /// Precomposes with `x -> a x - b` (all inputs). The declared domain is
    /// mapped accordingly.
    pub fn affine_input(mut self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::NonPositiveDilation(a));
        }
        let first = &mut self.layers[0];
        for i in 0..first.len() {
            let mut shift = 0.0;
            for t in &mut first.rows[i] {
                shift += t.1 * b;
                t.1 *= a;
            }
            first.bias[i] -= shift;
        }
        self.domain = ((self.domain.0 + b) / a, (self.domain.1 + b) / a);
        Ok(self)
    }

    /// Appends an identity readout if the last layer is not one already.
    pub fn with_readout(mut self) -> Self {
        if !self.ends_with_readout() {
            let prev = self.layers.last().unwrap();
            let mut l = Layer::new(prev.len());
            for i in 0..prev.len() {
                let hint = prev.hint[i];
                l.identity(&Affine::var(i), hint);
            }
            self.layers.push(l);
        }
        self
    }

    pub fn to_json(&self) -> Result<String> {
        json::to_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        json::from_json(s)
    }
}
