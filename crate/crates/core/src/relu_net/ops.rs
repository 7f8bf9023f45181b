use super::{Activation, Affine, Layer, ReluNet};
use crate::error::{Error, Result};

/// `f ∘ g`. If `g` ends in an identity readout it is fused into the first
/// layer of `f`, so `depth(f ∘ g) = depth(f) + depth(g)`.
pub fn compose(f: &ReluNet, g: &ReluNet) -> Result<ReluNet> {
    if g.output_dim() != f.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: f.input_dim(),
            got: g.output_dim(),
        });
    }
    let mut layers: Vec<Layer> = g.layers().to_vec();
    let mut rest = f.layers().iter();
    if g.ends_with_readout() {
        let readout = layers.pop().unwrap();
        let first = rest.next().unwrap();
        layers.push(fuse(first, &readout));
    }
    layers.extend(rest.cloned());
    ReluNet::new(g.input_dim(), layers, g.domain())
}

/// The layer `outer ∘ inner` where `inner` is affine (identity activations).
fn fuse(outer: &Layer, inner: &Layer) -> Layer {
    let mut out = Layer::new(inner.inputs());
    for i in 0..outer.len() {
        let mut expr = Affine::constant(outer.bias[i]);
        for &(j, w) in &outer.rows[i] {
            expr.constant += w * inner.bias[j];
            for &(k, v) in &inner.rows[j] {
                expr.add_term(k, w * v);
            }
        }
        out.push(outer.act[i], &expr, outer.hint[i]);
    }
    out
}

/// Inserts pass-through layers before the readout until the net has
/// `target` hidden layers.
pub fn pad_depth(net: &ReluNet, target: usize) -> Result<ReluNet> {
    let depth = net.depth();
    if target < depth {
        return Err(Error::PadBelowCurrent {
            what: "depth",
            current: depth,
            target,
        });
    }
    if target == depth {
        return Ok(net.clone());
    }
    let net = net.clone().with_readout();
    let mut layers = net.clone().into_layers();
    let readout = layers.pop().unwrap();
    for _ in depth..target {
        let copy = match layers.last() {
            Some(prev) => {
                let mut l = Layer::new(prev.len());
                for i in 0..prev.len() {
                    l.push(prev.act[i], &Affine::var(i), prev.hint[i]);
                }
                l
            }
            None => {
                let mut l = Layer::new(net.input_dim());
                let act = if net.domain().0 >= 0.0 {
                    Activation::Relu
                } else {
                    Activation::Identity
                };
                for i in 0..net.input_dim() {
                    l.push(act, &Affine::var(i), None);
                }
                l
            }
        };
        layers.push(copy);
    }
    layers.push(readout);
    ReluNet::new(net.input_dim(), layers, net.domain())
}

/// Pads to exactly `target_width` and `target_depth` with inert zero relu
/// neurons and pass-through layers.
pub fn pad(net: &ReluNet, target_width: usize, target_depth: usize) -> Result<ReluNet> {
    if target_width < net.width() {
        return Err(Error::PadBelowCurrent {
            what: "width",
            current: net.width(),
            target: target_width,
        });
    }
    let deep = pad_depth(net, target_depth)?;
    let d = deep.depth();
    let input_dim = deep.input_dim();
    let domain = deep.domain();
    let mut layers = deep.into_layers();
    for l in 0..d {
        while layers[l].len() < target_width {
            layers[l].relu(&Affine::constant(0.0));
        }
        if l + 1 < layers.len() {
            layers[l + 1].inputs = layers[l].len();
        }
    }
    ReluNet::new(input_dim, layers, domain)
}

/// Runs `f` and `g` side by side on a shared input; outputs are concatenated.
/// The declared domain is the hull of both domains.
pub fn stack(f: &ReluNet, g: &ReluNet) -> Result<ReluNet> {
    if f.input_dim() != g.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: f.input_dim(),
            got: g.input_dim(),
        });
    }
    let domain = (
        f.domain().0.min(g.domain().0),
        f.domain().1.max(g.domain().1),
    );
    let depth = f.depth().max(g.depth());
    let a_layers = pad_depth(f, depth)?.with_readout().into_layers();
    let b_layers = pad_depth(g, depth)?.with_readout().into_layers();
    let mut layers = Vec::with_capacity(a_layers.len());
    for (l, (a, b)) in a_layers.iter().zip(&b_layers).enumerate() {
        let (inputs, offset) = if l == 0 {
            (a.inputs(), 0)
        } else {
            (a.inputs() + b.inputs(), a.inputs())
        };
        let mut out = Layer::new(inputs);
        append_rows(&mut out, a, 0);
        append_rows(&mut out, b, offset);
        layers.push(out);
    }
    ReluNet::new(f.input_dim(), layers, domain)
}

fn append_rows(out: &mut Layer, src: &Layer, offset: usize) {
    for i in 0..src.len() {
        let expr = Affine {
            terms: src.rows[i].iter().map(|&(j, w)| (j + offset, w)).collect(),
            constant: src.bias[i],
        };
        out.push(src.act[i], &expr, src.hint[i]);
    }
}

/// Pointwise sum of nets with equal input and output dimensions, built as a
/// chain: each net runs in turn while `d` channels carry the input forward and
/// `k` channels accumulate the finished outputs. Width grows by `d + k`,
/// depths add. A single net is returned unchanged.
///
/// The forwarded input carries no hint: its bound comes from the domain at
/// lowering time, so lower after the final domain is set.
pub fn sum_nets(nets: &[ReluNet]) -> Result<ReluNet> {
    let first = nets.first().ok_or(Error::Empty("network list"))?;
    let (d, k) = (first.input_dim(), first.output_dim());
    for net in nets {
        if net.input_dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: net.input_dim(),
            });
        }
        if net.output_dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: net.output_dim(),
            });
        }
    }
    if nets.len() == 1 {
        return Ok(first.clone());
    }
    let domain = nets.iter().fold(first.domain(), |(lo, hi), n| {
        (lo.min(n.domain().0), hi.max(n.domain().1))
    });
    let x_act = if domain.0 >= 0.0 {
        Activation::Relu
    } else {
        Activation::Identity
    };

    let parts: Vec<Vec<Layer>> = nets
        .iter()
        .map(|n| Ok(pad_depth(n, n.depth().max(1))?.with_readout().into_layers()))
        .collect::<Result<_>>()?;

    let mut acc_hint: Option<Vec<f64>> = Some(vec![0.0; k]);
    let mut layers: Vec<Layer> = Vec::new();
    // Where the previous layer keeps the forwarded input and the accumulator.
    let mut x_at: Vec<usize> = (0..d).collect();
    let mut acc_at: Option<Vec<usize>> = None;
    let mut prev_width = d;
    let mut prev_readout: Option<(&Layer, usize)> = None;

    for (t, part) in parts.iter().enumerate() {
        let last_net = t + 1 == parts.len();
        let hidden = &part[..part.len() - 1];
        for (l, src) in hidden.iter().enumerate() {
            let mut out = Layer::new(prev_width);
            if l == 0 {
                for i in 0..src.len() {
                    let expr = Affine {
                        terms: src.rows[i].iter().map(|&(j, w)| (x_at[j], w)).collect(),
                        constant: src.bias[i],
                    };
                    out.push(src.act[i], &expr, src.hint[i]);
                }
            } else {
                append_rows(&mut out, src, 0);
            }
            let new_x: Vec<usize> = if last_net {
                Vec::new()
            } else {
                x_at.iter()
                    .map(|&j| out.push(x_act, &Affine::var(j), None))
                    .collect()
            };
            let new_acc = if l == 0 {
                match prev_readout.take() {
                    Some((readout, offset)) => {
                        let hint = acc_hint.as_ref().zip(readout_hints(readout)).map(|(a, r)| {
                            a.iter().zip(&r).map(|(x, y)| x + y).collect::<Vec<f64>>()
                        });
                        acc_hint = hint;
                        let idx: Vec<usize> = (0..k)
                            .map(|o| {
                                let mut expr = shifted_row(readout, o, offset);
                                if let Some(acc) = &acc_at {
                                    expr.add_term(acc[o], 1.0);
                                }
                                out.identity(&expr, acc_hint.as_ref().map(|h| h[o]))
                            })
                            .collect();
                        Some(idx)
                    }
                    None => None,
                }
            } else {
                acc_at.as_ref().map(|acc| {
                    acc.iter()
                        .enumerate()
                        .map(|(o, &j)| {
                            out.identity(&Affine::var(j), acc_hint.as_ref().map(|h| h[o]))
                        })
                        .collect()
                })
            };
            if l + 1 == hidden.len() {
                prev_readout = Some((&part[part.len() - 1], 0));
            }
            x_at = new_x;
            acc_at = new_acc;
            prev_width = out.len();
            layers.push(out);
        }
    }
    let (readout, offset) = prev_readout.expect("at least one hidden layer");
    let mut out = Layer::new(prev_width);
    let final_hint = acc_hint
        .as_ref()
        .zip(readout_hints(readout))
        .map(|(a, r)| a.iter().zip(&r).map(|(x, y)| x + y).collect::<Vec<f64>>());
    for o in 0..k {
        let mut expr = shifted_row(readout, o, offset);
        if let Some(acc) = &acc_at {
            expr.add_term(acc[o], 1.0);
        }
        out.identity(&expr, final_hint.as_ref().map(|h| h[o]));
    }
    layers.push(out);
    ReluNet::new(d, layers, domain)
}

fn shifted_row(layer: &Layer, i: usize, offset: usize) -> Affine {
    Affine {
        terms: layer.rows[i]
            .iter()
            .map(|&(j, w)| (j + offset, w))
            .collect(),
        constant: layer.bias[i],
    }
}

fn readout_hints(layer: &Layer) -> Option<Vec<f64>> {
    layer.hint.iter().copied().collect()
}

/// Replaces every hidden identity neuron `v` by `relu(v + S)` with
/// `S = 2 * bound(v)` and subtracts the shift downstream. Bounds come from
/// interval propagation over the declared domain, tightened by hints.
pub fn lower(net: &ReluNet) -> Result<ReluNet> {
    let depth = net.depth();
    let intervals = net.intervals();
    let mut layers = net.layers().to_vec();
    for l in 0..depth {
        if l + 1 == layers.len() {
            break;
        }
        for (i, &(lo, hi)) in intervals[l].iter().enumerate() {
            if layers[l].act[i] != Activation::Identity {
                continue;
            }
            let bound = lo.abs().max(hi.abs());
            if !bound.is_finite() {
                return Err(Error::UnboundedChannel {
                    layer: l,
                    neuron: i,
                });
            }
            let shift = 2.0 * bound;
            layers[l].act[i] = Activation::Relu;
            layers[l].bias[i] += shift;
            let next = &mut layers[l + 1];
            for r in 0..next.len() {
                if let Some(&(_, w)) = next.rows[r].iter().find(|&&(j, _)| j == i) {
                    next.bias[r] -= w * shift;
                }
            }
        }
    }
    ReluNet::new(net.input_dim(), layers, net.domain())
}

/// Block-diagonal combination: inputs and outputs are concatenated in order.
pub fn parallel(nets: &[ReluNet]) -> Result<ReluNet> {
    let first = nets.first().ok_or(Error::Empty("network list"))?;
    let depth = nets.iter().map(ReluNet::depth).max().unwrap_or(0);
    let domain = nets.iter().fold(first.domain(), |(lo, hi), n| {
        (lo.min(n.domain().0), hi.max(n.domain().1))
    });
    let parts: Vec<Vec<Layer>> = nets
        .iter()
        .map(|n| Ok(pad_depth(n, depth)?.with_readout().into_layers()))
        .collect::<Result<_>>()?;
    let input_dim = nets.iter().map(ReluNet::input_dim).sum();
    let mut layers = Vec::with_capacity(depth + 1);
    for l in 0..parts[0].len() {
        let inputs = parts.iter().map(|p| p[l].inputs()).sum();
        let mut out = Layer::new(inputs);
        let mut offset = 0;
        for p in &parts {
            append_rows(&mut out, &p[l], offset);
            offset += p[l].inputs();
        }
        layers.push(out);
    }
    ReluNet::new(input_dim, layers, domain)
}

/// Replaces the outputs by their sum.
pub fn sum_outputs(net: &ReluNet) -> Result<ReluNet> {
    let net = net.clone().with_readout();
    let input_dim = net.input_dim();
    let domain = net.domain();
    let mut layers = net.into_layers();
    let readout = layers.pop().unwrap();
    let mut expr = Affine::constant(0.0);
    let mut hint = Some(0.0);
    for i in 0..readout.len() {
        expr = expr.plus(&shifted_row(&readout, i, 0));
        hint = hint.zip(readout.hint[i]).map(|(a, b)| a + b);
    }
    let mut out = Layer::new(readout.inputs());
    out.identity(&expr, hint);
    layers.push(out);
    ReluNet::new(input_dim, layers, domain)
}
