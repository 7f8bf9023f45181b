use serde::{Deserialize, Serialize};

use super::{Activation, Affine, Layer, ReluNet};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct NetJson {
    input_dim: usize,
    output_dim: usize,
    domain: [f64; 2],
    layers: Vec<LayerJson>,
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    weights: Vec<Vec<Num>>,
    bias: Vec<Num>,
    activation: Activation,
}

/// Written as a decimal string with round-trip precision; numbers are also
/// accepted on input.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Num {
    Text(String),
    Plain(f64),
}

impl Num {
    fn of(v: f64) -> Self {
        // Debug formatting is the shortest string that parses back exactly.
        Num::Text(format!("{v:?}"))
    }

    fn value(&self) -> Result<f64> {
        match self {
            Num::Plain(v) => Ok(*v),
            Num::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidNetwork(format!("bad number `{s}`"))),
        }
    }
}

pub(super) fn to_json(net: &ReluNet) -> Result<String> {
    let mut layers = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        let activation = layer
            .uniform_activation()
            .ok_or(Error::MixedActivations(l))?;
        layers.push(LayerJson {
            weights: layer
                .dense_weights()
                .into_iter()
                .map(|row| row.into_iter().map(Num::of).collect())
                .collect(),
            bias: layer.bias.iter().copied().map(Num::of).collect(),
            activation,
        });
    }
    let doc = NetJson {
        input_dim: net.input_dim,
        output_dim: net.output_dim(),
        domain: [net.domain.0, net.domain.1],
        layers,
    };
    Ok(serde_json::to_string(&doc)?)
}

pub(super) fn from_json(s: &str) -> Result<ReluNet> {
    let doc: NetJson = serde_json::from_str(s)?;
    let mut width = doc.input_dim;
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (l, raw) in doc.layers.iter().enumerate() {
        if raw.weights.len() != raw.bias.len() {
            return Err(Error::InvalidNetwork(format!(
                "layer {l}: {} weight rows but {} biases",
                raw.weights.len(),
                raw.bias.len()
            )));
        }
        let mut layer = Layer::new(width);
        for (row, b) in raw.weights.iter().zip(&raw.bias) {
            if row.len() != width {
                return Err(Error::InvalidNetwork(format!(
                    "layer {l}: row of length {} where {width} expected",
                    row.len()
                )));
            }
            let terms = row
                .iter()
                .enumerate()
                .map(|(j, w)| Ok((j, w.value()?)))
                .collect::<Result<Vec<_>>>()?;
            layer.push(
                raw.activation,
                &Affine {
                    terms,
                    constant: b.value()?,
                },
                None,
            );
        }
        width = layer.len();
        layers.push(layer);
    }
    let net = ReluNet::new(doc.input_dim, layers, (doc.domain[0], doc.domain[1]))?;
    if net.output_dim() != doc.output_dim {
        return Err(Error::InvalidNetwork(format!(
            "declared output_dim {} but last layer has {}",
            doc.output_dim,
            net.output_dim()
        )));
    }
    Ok(net)
}
