//! Compilation of refinement iterates into ReLU networks.

mod build;
pub mod recursion;
mod verify;

use serde::{Deserialize, Serialize};

use crate::cpwl::{hat_decompose, hat_decompose_on_nodes, Cpwl, HatTerm};
use crate::error::{Error, Result};
use crate::gadgets::{check_special, GadgetParams};
use crate::masks::Mask;
use crate::relu_net::{lower, sum_nets, ReluNet};

pub use verify::{verify, Report};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stage {
    /// `g(R̂ⁿ x)` on `[-1/2, 3/2]`.
    Grn,
    /// `ḡ_k` on `[0, 1]`.
    Coordinate { k: usize },
    /// `Vⁿg` for special `g`, on `[-1, N+1]`.
    Special,
    /// `Vⁿg₀` through a hat decomposition, on `[-1, N+1]`.
    General,
}

impl Stage {
    pub fn label(&self) -> String {
        match self {
            Stage::Grn => "grn".into(),
            Stage::Coordinate { k } => format!("coordinate_{k}"),
            Stage::Special => "special".into(),
            Stage::General => "general".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CompileOptions {
    /// Replace the a priori `M` by twice the largest sampled trajectory entry
    /// when that is smaller.
    pub tight_m: bool,
    /// Sum the coordinate nets sequentially instead of side by side.
    pub depth_heavy: bool,
}

#[derive(Clone, Debug)]
pub struct CompileArtifact {
    pub net: ReluNet,
    pub stage: Stage,
    pub params: GadgetParams,
    pub width_bound: usize,
    pub depth_bound: usize,
    /// Hat terms in the decomposition (nonzero or not); 1 for special seeds.
    pub terms: usize,
}

impl CompileArtifact {
    pub fn bounds_ok(&self) -> bool {
        self.net.width() <= self.width_bound && self.net.depth() <= self.depth_bound
    }
}

/// `max{1 + 2 max(m, 5), N + 10, 4N + 3}` for a seed with `m` breakpoints.
pub fn coordinate_width_bound(m: usize, big_n: usize) -> usize {
    (1 + 2 * m.max(5)).max(big_n + 10).max(4 * big_n + 3)
}

pub fn default_params(n: usize, mask: &Mask, g: &Cpwl, tight_m: bool) -> Result<GadgetParams> {
    let p = GadgetParams::default_for(n, mask, g)?;
    if tight_m {
        let m = recursion::tight_m(g, mask, &p)?.min(p.m);
        p.with_m(m)
    } else {
        Ok(p)
    }
}

pub fn compile_grn(g: &Cpwl, params: &GadgetParams) -> Result<CompileArtifact> {
    check_special(g)?;
    params.validate()?;
    let net = lower(&build::grn_net(g, params)?)?;
    Ok(CompileArtifact {
        net,
        stage: Stage::Grn,
        params: *params,
        width_bound: 2 * g.len().max(5),
        depth_bound: params.n + 2,
        terms: 1,
    })
}

pub fn compile_coordinate(
    g: &Cpwl,
    k: usize,
    mask: &Mask,
    params: &GadgetParams,
) -> Result<CompileArtifact> {
    check_special(g)?;
    params.validate()?;
    let net = lower(&build::coordinate_net(g, k, mask, params)?)?;
    Ok(CompileArtifact {
        net,
        stage: Stage::Coordinate { k },
        params: *params,
        width_bound: coordinate_width_bound(g.len(), mask.support_len()),
        depth_bound: 4 * params.n + 1,
        terms: 1,
    })
}

pub fn compile_special(
    g: &Cpwl,
    mask: &Mask,
    params: &GadgetParams,
    depth_heavy: bool,
) -> Result<CompileArtifact> {
    check_special(g)?;
    params.validate()?;
    let big_n = mask.support_len();
    let net = lower(&build::special_net(g, mask, params, depth_heavy)?)?;
    let w = coordinate_width_bound(g.len(), big_n);
    let d = 4 * params.n + 2;
    let (width_bound, depth_bound) = if depth_heavy {
        (w + 2, big_n * d)
    } else {
        (big_n * w, d)
    };
    Ok(CompileArtifact {
        net,
        stage: Stage::Special,
        params: *params,
        width_bound,
        depth_bound,
        terms: 1,
    })
}

/// How a general seed is split into hats.
#[derive(Clone, Debug, PartialEq)]
pub enum HatGrid {
    Uniform(f64),
    Nodes(Vec<f64>),
}

fn on_grid(x: f64, h: f64) -> bool {
    let s = x / h;
    (s - s.round()).abs() < 1e-9
}

/// Step `1/8` when every breakpoint allows it, else the dyadic step
/// `2^{-⌈log2(1/gap)⌉-3}` for the smallest breakpoint gap, else the
/// breakpoints themselves refined until no gap exceeds `3/8`.
pub fn choose_grid(g0: &Cpwl, big_n: usize) -> HatGrid {
    let len = big_n as f64;
    let mut nodes: Vec<f64> = std::iter::once(0.0)
        .chain(
            g0.breakpoints()
                .iter()
                .copied()
                .filter(|&x| x > 0.0 && x < len),
        )
        .chain(std::iter::once(len))
        .collect();
    nodes.dedup();
    if nodes.iter().all(|&x| on_grid(x, 0.125)) {
        return HatGrid::Uniform(0.125);
    }
    let gap = nodes
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let e = (1.0 / gap).log2().ceil() as i32 + 3;
    if e <= 40 {
        let h = 2f64.powi(-e);
        if nodes.iter().all(|&x| on_grid(x, h)) {
            return HatGrid::Uniform(h);
        }
    }
    let mut refined = vec![nodes[0]];
    for w in nodes.windows(2) {
        let pieces = ((w[1] - w[0]) / 0.375).ceil().max(1.0) as usize;
        for i in 1..=pieces {
            refined.push(w[0] + (w[1] - w[0]) * i as f64 / pieces as f64);
        }
    }
    HatGrid::Nodes(refined)
}

pub fn decompose(g0: &Cpwl, big_n: usize) -> Result<(HatGrid, Vec<HatTerm>)> {
    let grid = choose_grid(g0, big_n);
    let terms = match &grid {
        HatGrid::Uniform(h) => hat_decompose(g0, big_n, *h)?,
        HatGrid::Nodes(nodes) => hat_decompose_on_nodes(g0, big_n, nodes)?,
    };
    Ok((grid, terms))
}

/// `Vⁿg₀` for any `g₀` vanishing outside `[0, N]`, as a sum of shifted
/// special networks.
pub fn compile_general(
    g0: &Cpwl,
    n: usize,
    mask: &Mask,
    opts: CompileOptions,
) -> Result<CompileArtifact> {
    let mut art = compile_general_unlowered(g0, n, mask, opts)?;
    art.net = lower(&art.net)?;
    Ok(art)
}

/// [`compile_general`] before lowering, for callers that precompose or
/// re-domain the network; exact on all of ℝ.
pub fn compile_general_unlowered(
    g0: &Cpwl,
    n: usize,
    mask: &Mask,
    opts: CompileOptions,
) -> Result<CompileArtifact> {
    let big_n = mask.support_len();
    let domain = (-1.0, big_n as f64 + 1.0);
    let (grid, terms) = decompose(g0, big_n)?;
    let scale = 2f64.powi(-(n as i32));

    let mut specials: Vec<(Cpwl, GadgetParams, ReluNet)> = Vec::new();
    let mut nets = Vec::new();
    for t in terms.iter().filter(|t| t.coeff != 0.0) {
        let (hat, shift) = match grid {
            HatGrid::Uniform(h) => (Cpwl::hat(0.5 - h, 0.5, 0.5 + h)?, t.peak - 0.5),
            HatGrid::Nodes(_) => (t.special_hat(), t.special_shift()),
        };
        let idx = match specials.iter().position(|(c, _, _)| *c == hat) {
            Some(i) => i,
            None => {
                let p = default_params(n, mask, &hat, opts.tight_m)?;
                let net = build::special_net(&hat, mask, &p, opts.depth_heavy)?;
                specials.push((hat, p, net));
                specials.len() - 1
            }
        };
        let net = specials[idx]
            .2
            .clone()
            .affine_input(1.0, scale * shift)?
            .scale_output(t.coeff)
            .with_domain(domain);
        nets.push(net);
    }

    let params = match specials.first() {
        Some((_, p, _)) => *p,
        None => default_params(n, mask, &Cpwl::hat(0.375, 0.5, 0.625)?, false)?,
    };
    let net = if nets.is_empty() {
        build::zero_net(domain)
    } else {
        sum_nets(&nets)?.with_domain(domain)
    };
    let w = coordinate_width_bound(3, big_n);
    let d = 4 * n + 2;
    let count = terms.len().max(1);
    let (width_bound, depth_bound) = if opts.depth_heavy {
        (w + 4, count * big_n * d)
    } else {
        (big_n * w + 2, count * d)
    };
    Ok(CompileArtifact {
        net,
        stage: Stage::General,
        params,
        width_bound,
        depth_bound,
        terms: terms.len(),
    })
}

/// Special route when the seed qualifies, general route otherwise.
pub fn compile(
    seed: &Cpwl,
    n: usize,
    mask: &Mask,
    opts: CompileOptions,
) -> Result<CompileArtifact> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    if check_special(seed).is_ok() && seed.support().is_some_and(|(a, b)| a < b) {
        let p = default_params(n, mask, seed, opts.tight_m)?;
        compile_special(seed, mask, &p, opts.depth_heavy)
    } else {
        compile_general(seed, n, mask, opts)
    }
}
