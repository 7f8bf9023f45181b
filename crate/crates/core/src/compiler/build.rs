//! Layer-by-layer construction of the cascade networks.

use crate::cpwl::Cpwl;
use crate::error::{Error, Result};
use crate::gadgets::{
    build_min, build_ramp, chi_hat_cpwls, emit_cpwl, emit_pi_first, emit_pi_second, net_of_cpwl,
    rhat_cpwl, rhat_power_net, GadgetParams,
};
use crate::masks::Mask;
use crate::relu_net::{compose, parallel, stack, sum_nets, sum_outputs, Affine, Layer, ReluNet};

/// `min(g(R̂₁ⁿ x), g(R̂₂ⁿ x))` from generic combinators.
pub(crate) fn grn_net(g: &Cpwl, p: &GadgetParams) -> Result<ReluNet> {
    let dom = (-0.5, 1.5);
    let gnet = net_of_cpwl(g, dom);
    let a = compose(&gnet, &rhat_power_net(p.alpha1, p.beta1, p.n)?)?;
    let b = compose(&gnet, &rhat_power_net(p.alpha2, p.beta2, p.n)?)?;
    let both = stack(&a, &b)?;
    Ok(compose(&build_min(), &both)?.with_domain(dom))
}

/// The network for `ḡ_k` on `[0, 1]`.
pub(crate) fn coordinate_net(g: &Cpwl, k: usize, mask: &Mask, p: &GadgetParams) -> Result<ReluNet> {
    let big_n = mask.support_len();
    if k == 0 || k > big_n {
        return Err(Error::CoordinateOutOfRange { k, n: big_n });
    }
    let n = p.n;
    let m = p.m;
    let t = mask.transfer_matrices();
    let r1 = rhat_cpwl(p.alpha1, p.beta1)?;
    let r2 = rhat_cpwl(p.alpha2, p.beta2)?;
    let rm = rhat_cpwl(p.alpha_mat, p.beta_mat)?;
    let (c0, c1) = chi_hat_cpwls(p.delta0)?;

    let mut layers = Vec::with_capacity(4 * n + 2);
    let mut width = 1;

    // both smoothed residual chains, with x carried alongside (x ≥ 0 here)
    let (mut u1, mut u2, mut x) = (Affine::var(0), Affine::var(0), Affine::var(0));
    for _ in 0..n {
        let mut l = Layer::new(width);
        u1 = emit_cpwl(&mut l, &u1, &r1);
        u2 = emit_cpwl(&mut l, &u2, &r2);
        x = Affine::var(l.relu(&x));
        width = l.len();
        layers.push(l);
    }
    let mut l = Layer::new(width);
    let a = emit_cpwl(&mut l, &u1, g);
    let b = emit_cpwl(&mut l, &u2, g);
    x = Affine::var(l.relu(&x));
    width = l.len();
    layers.push(l);

    // F^0 = min(a, b) e_k; b ≥ 0 so min = b_+ - (b - a)_+.
    // Built in the same layer as the first block's indicators.
    let mut l = Layer::new(width);
    let vb = l.relu(&b);
    let vd = l.relu(&b.plus(&a.scaled(-1.0)));
    let mut f0 = Affine::var(vb);
    f0.add_term(vd, -1.0);
    let mut f: Vec<Affine> = vec![Affine::constant(0.0); big_n];
    f[k - 1] = f0;
    let mut r_next = (n > 1).then(|| emit_cpwl(&mut l, &x, &rm));
    let mut chi = (emit_cpwl(&mut l, &x, &c0), emit_cpwl(&mut l, &x, &c1));

    for j in 1..=n {
        if j > 1 {
            layers.push(l);
            l = Layer::new(width);
            let r = r_next.take().expect("carried residual");
            r_next = (j < n).then(|| emit_cpwl(&mut l, &r, &rm));
            chi = (emit_cpwl(&mut l, &r, &c0), emit_cpwl(&mut l, &r, &c1));
            for e in f.iter_mut() {
                *e = Affine::var(l.identity(e, Some(m)));
            }
        }
        width = l.len();
        layers.push(l);

        // product layer 1
        let ys = |tb: &crate::masks::Matrix| -> Vec<Affine> {
            (0..big_n)
                .map(|i| {
                    (0..big_n).fold(Affine::constant(0.0), |acc, r| {
                        let w = tb.get(r, i);
                        if w == 0.0 {
                            acc
                        } else {
                            acc.plus(&f[r].scaled(w))
                        }
                    })
                })
                .collect()
        };
        let (y0, y1) = (ys(&t.t0), ys(&t.t1));
        let mut la = Layer::new(width);
        let p0 = emit_pi_first(&mut la, &chi.0, &y0, m);
        let p1 = emit_pi_first(&mut la, &chi.1, &y1, m);
        let carry = r_next.as_ref().map(|r| la.relu(r));
        width = la.len();
        layers.push(la);

        // product layer 2
        let mut lb = Layer::new(width);
        let o0 = emit_pi_second(&mut lb, &p0, m);
        let o1 = emit_pi_second(&mut lb, &p1, m);
        r_next = carry.map(|c| Affine::var(lb.relu(&Affine::var(c))));
        f = o0.iter().zip(&o1).map(|(a, b)| a.plus(b)).collect();
        width = lb.len();
        l = lb;
    }

    let mut readout = Layer::new(width);
    readout.identity(&f[0], Some(m));
    layers.push(l);
    layers.push(readout);
    ReluNet::new(1, layers, (0.0, 1.0))
}

/// `x ↦ (r_1(x), ..., r_N(x))`: one hidden layer of `2N` relus.
fn ramp_net(big_n: usize, domain: (f64, f64)) -> Result<ReluNet> {
    let mut hidden = Layer::new(1);
    let mut outs = Vec::with_capacity(big_n);
    for k in 1..=big_n {
        let kf = k as f64;
        let lo = hidden.relu(&Affine::var(0).plus_const(1.0 - kf));
        let hi = hidden.relu(&Affine::var(0).plus_const(-kf));
        let mut e = Affine::var(lo);
        e.add_term(hi, -1.0);
        outs.push(e);
    }
    let mut readout = Layer::new(hidden.len());
    for e in &outs {
        readout.identity(e, Some(1.0));
    }
    ReluNet::new(1, vec![hidden, readout], domain)
}

/// `Σ_k ḡ_k(r_k(x))` on `[-1, N+1]`.
pub(crate) fn special_net(
    g: &Cpwl,
    mask: &Mask,
    p: &GadgetParams,
    depth_heavy: bool,
) -> Result<ReluNet> {
    let big_n = mask.support_len();
    let domain = (-1.0, big_n as f64 + 1.0);
    let coords = (1..=big_n)
        .map(|k| coordinate_net(g, k, mask, p))
        .collect::<Result<Vec<_>>>()?;
    let net = if depth_heavy {
        let terms = coords
            .iter()
            .enumerate()
            .map(|(i, c)| compose(c, &build_ramp(i + 1)?.1))
            .collect::<Result<Vec<_>>>()?;
        sum_nets(&terms)?
    } else {
        let summed = sum_outputs(&parallel(&coords)?)?;
        compose(&summed, &ramp_net(big_n, domain)?)?
    };
    Ok(net.with_domain(domain))
}

/// The constant zero function as a width-1, depth-1 network.
pub(crate) fn zero_net(domain: (f64, f64)) -> ReluNet {
    let mut hidden = Layer::new(1);
    hidden.relu(&Affine::constant(0.0));
    let mut readout = Layer::new(1);
    readout.identity(&Affine::constant(0.0), Some(0.0));
    ReluNet::new(1, vec![hidden, readout], domain).expect("well formed")
}
