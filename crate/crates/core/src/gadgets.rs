//! Primitive sub-networks and their piecewise-linear twins.

use serde::{Deserialize, Serialize};

use crate::cpwl::{Cpwl, VALUE_TOL};
use crate::error::{Error, Result};
use crate::masks::Mask;
use crate::relu_net::{Affine, Layer, ReluNet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GadgetParams {
    pub n: usize,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub delta0: f64,
    pub alpha_mat: f64,
    pub beta_mat: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

/// `M = ‖g‖∞ · max(1, B)^n`, with `B` the larger max-column-abs-sum of the
/// transfer matrices. Bounds every `|T_bᵀ F^j|` entry of the recursion.
pub fn conservative_m(n: usize, mask: &Mask, g: &Cpwl) -> f64 {
    let b = mask.transfer_matrices().growth_bound().max(1.0);
    let m = g.sup_norm() * b.powi(n as i32);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

impl GadgetParams {
    pub fn default_for(n: usize, mask: &Mask, g: &Cpwl) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams("n must be at least 1".into()));
        }
        let n32 = n as i32;
        let p = GadgetParams {
            n,
            alpha1: 0.5 - pow2(-n32 - 4),
            beta1: 0.5 - pow2(-n32 - 5),
            alpha2: 0.5 - pow2(-2 * n32 - 5),
            beta2: 0.5 - pow2(-2 * n32 - 6),
            delta0: pow2(-n32 - 3),
            alpha_mat: 0.5 - pow2(-n32 - 4),
            beta_mat: 0.5 - pow2(-n32 - 5),
            m: conservative_m(n, mask, g),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_m(mut self, m: f64) -> Result<Self> {
        self.m = m;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        let n = self.n as i32;
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if !(7.0 / 16.0 < self.alpha1
            && self.alpha1 < self.beta1
            && self.beta1 < self.alpha2
            && self.alpha2 < self.beta2
            && self.beta2 < 0.5)
        {
            return bad("need 7/16 < alpha1 < beta1 < alpha2 < beta2 < 1/2");
        }
        if !(0.5 - self.alpha1 < pow2(-n - 3)) {
            return bad("1/2 - alpha1 must be below 2^(-n-3)");
        }
        if !(0.5 - self.alpha2 < (0.5 - self.beta1) * pow2(-n + 1)) {
            return bad("1/2 - alpha2 must be below (1/2 - beta1) 2^(-n+1)");
        }
        if self.delta0 != pow2(-n - 3) {
            return bad("delta0 must equal 2^(-n-3)");
        }
        if !(7.0 / 16.0 < self.alpha_mat && self.alpha_mat < self.beta_mat && self.beta_mat < 0.5) {
            return bad("need 7/16 < alpha_mat < beta_mat < 1/2");
        }
        if !(0.5 - self.alpha_mat < pow2(-n - 3)) {
            return bad("1/2 - alpha_mat must be below 2^(-n-3)");
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return bad("M must be positive");
        }
        Ok(())
    }
}

/// `f(u) = c + Σ_i a_i (u - ξ_i)_+` for a CPwL `f`: one relu per breakpoint.
pub fn relu_expansion(f: &Cpwl) -> (f64, Vec<(f64, f64)>) {
    let xs = f.breakpoints();
    let ys = f.values();
    let slope = |i: usize| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    let mut prev = 0.0;
    let mut terms = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        let s = if i + 1 < xs.len() { slope(i) } else { 0.0 };
        terms.push((xs[i], s - prev));
        prev = s;
    }
    (ys[0], terms)
}

/// Pushes the relus of `f(u)` into `layer`; returns `f(u)` as an expression
/// over `layer`.
pub fn emit_cpwl(layer: &mut Layer, u: &Affine, f: &Cpwl) -> Affine {
    let (c, terms) = relu_expansion(f);
    let mut out = Affine::constant(c);
    for (xi, a) in terms {
        let idx = layer.relu(&u.plus_const(-xi));
        out.add_term(idx, a);
    }
    out
}

/// Depth-1 network computing `f` on ℝ with `m` relus for `m` breakpoints.
pub fn net_of_cpwl(f: &Cpwl, domain: (f64, f64)) -> ReluNet {
    let mut hidden = Layer::new(1);
    let out = emit_cpwl(&mut hidden, &Affine::var(0), f);
    let mut readout = Layer::new(hidden.len());
    readout.identity(&out, Some(f.sup_norm()));
    ReluNet::new(1, vec![hidden, readout], domain).expect("well formed")
}

/// The smoothed residual: breakpoints `0, α, β, 1/2, 1` with values
/// `0, 2α, 0, 0, 1`.
pub fn rhat_cpwl(alpha: f64, beta: f64) -> Result<Cpwl> {
    if !(7.0 / 16.0 < alpha && alpha < beta && beta < 0.5) {
        return Err(Error::InvalidParams(format!(
            "need 7/16 < alpha < beta < 1/2, got alpha = {alpha}, beta = {beta}"
        )));
    }
    Cpwl::new(
        vec![0.0, alpha, beta, 0.5, 1.0],
        vec![0.0, 2.0 * alpha, 0.0, 0.0, 1.0],
    )
}

pub fn build_rhat(alpha: f64, beta: f64) -> Result<(Cpwl, ReluNet)> {
    let f = rhat_cpwl(alpha, beta)?;
    let net = net_of_cpwl(&f, (0.0, 1.0));
    Ok((f, net))
}

/// `R̂ⁿ` as a width-5, depth-`n` network.
pub fn rhat_power_net(alpha: f64, beta: f64, n: usize) -> Result<ReluNet> {
    let (_, one) = build_rhat(alpha, beta)?;
    let mut net = one.clone();
    for _ in 1..n.max(1) {
        net = crate::relu_net::compose(&one, &net)?;
    }
    Ok(net)
}

pub fn chi_hat_cpwls(delta0: f64) -> Result<(Cpwl, Cpwl)> {
    if !(delta0 > 0.0) {
        return Err(Error::InvalidParams(format!(
            "delta0 must be positive, got {delta0}"
        )));
    }
    let c0 = Cpwl::new(vec![0.5, 0.5 + delta0], vec![1.0, 0.0])?;
    let c1 = Cpwl::new(vec![0.5 - delta0, 0.5], vec![0.0, 1.0])?;
    Ok((c0, c1))
}

pub fn build_chi_hats(delta0: f64) -> Result<(Cpwl, Cpwl, ReluNet, ReluNet)> {
    let (c0, c1) = chi_hat_cpwls(delta0)?;
    let n0 = net_of_cpwl(&c0, (0.0, 1.0));
    let n1 = net_of_cpwl(&c1, (0.0, 1.0));
    Ok((c0, c1, n0, n1))
}

/// Neurons of the first product layer for one copy of the product gadget.
#[derive(Clone, Debug)]
pub struct PiFirst {
    /// `ReLU(M x - y_i)`
    pub p: Vec<usize>,
    /// `ReLU(-y_i)`
    pub q: Vec<usize>,
    /// `ReLU(x)`
    pub s: usize,
}

pub fn emit_pi_first(layer: &mut Layer, x: &Affine, ys: &[Affine], m: f64) -> PiFirst {
    let mx = x.scaled(m);
    let p = ys
        .iter()
        .map(|y| layer.relu(&mx.plus(&y.scaled(-1.0))))
        .collect();
    let q = ys.iter().map(|y| layer.relu(&y.scaled(-1.0))).collect();
    let s = layer.relu(x);
    PiFirst { p, q, s }
}

/// Second product layer; returns the gadget's outputs as expressions over
/// `layer`: `-p_i - ReLU(M - M s - q_i) + M`.
pub fn emit_pi_second(layer: &mut Layer, first: &PiFirst, m: f64) -> Vec<Affine> {
    let p2: Vec<usize> = first
        .p
        .iter()
        .map(|&p| layer.relu(&Affine::var(p)))
        .collect();
    let r: Vec<usize> = first
        .q
        .iter()
        .map(|&q| {
            let mut e = Affine::constant(m);
            e.add_term(first.s, -m);
            e.add_term(q, -1.0);
            layer.relu(&e)
        })
        .collect();
    p2.iter()
        .zip(&r)
        .map(|(&p, &r)| {
            let mut e = Affine::constant(m);
            e.add_term(p, -1.0);
            e.add_term(r, -1.0);
            e
        })
        .collect()
}

/// `Π(x, y) = -ReLU(M x e - y) - ReLU(M (1 - x) e - ReLU(-y)) + M e` on
/// inputs `(x, y_1..y_N)`; width `2N + 1`, depth 2.
pub fn build_pi(n: usize, m: f64) -> Result<ReluNet> {
    if n == 0 || !(m > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need N >= 1 and M > 0, got N = {n}, M = {m}"
        )));
    }
    let mut l1 = Layer::new(n + 1);
    let ys: Vec<Affine> = (1..=n).map(Affine::var).collect();
    let first = emit_pi_first(&mut l1, &Affine::var(0), &ys, m);
    let mut l2 = Layer::new(l1.len());
    let outs = emit_pi_second(&mut l2, &first, m);
    let mut readout = Layer::new(l2.len());
    for e in &outs {
        readout.identity(e, Some(m));
    }
    ReluNet::new(n + 1, vec![l1, l2, readout], (-m, m))
}

/// `min(x, y) = y_+ - (-y)_+ - (y - x)_+` on inputs `(x, y)`.
pub fn build_min() -> ReluNet {
    let mut l = Layer::new(2);
    let a = l.relu(&Affine::var(1));
    let b = l.relu(&Affine::term(1, -1.0));
    let c = l.relu(&Affine::var(1).plus(&Affine::term(0, -1.0)));
    let mut out = Affine::var(a);
    out.add_term(b, -1.0);
    out.add_term(c, -1.0);
    let mut readout = Layer::new(3);
    readout.identity(&out, None);
    ReluNet::new(2, vec![l, readout], (f64::NEG_INFINITY, f64::INFINITY)).expect("well formed")
}

/// `r_k(x) = (x - k + 1)_+ - (x - k)_+`.
pub fn ramp_cpwl(k: usize) -> Cpwl {
    let k = k as f64;
    Cpwl::new(vec![k - 1.0, k], vec![0.0, 1.0]).expect("ordered")
}

pub fn build_ramp(k: usize) -> Result<(Cpwl, ReluNet)> {
    if k == 0 {
        return Err(Error::InvalidParams("ramp index starts at 1".into()));
    }
    let f = ramp_cpwl(k);
    let net = net_of_cpwl(&f, (f64::NEG_INFINITY, f64::INFINITY));
    Ok((f, net))
}

/// The hat with breakpoints `3/8, 1/2, 5/8` and peak 1.
pub fn h_cpwl() -> Cpwl {
    Cpwl::hat(0.375, 0.5, 0.625).expect("ordered")
}

pub fn build_h() -> (Cpwl, ReluNet) {
    let f = h_cpwl();
    let net = net_of_cpwl(&f, (f64::NEG_INFINITY, f64::INFINITY));
    (f, net)
}

/// Non-negative with support inside `[1/8, 7/8]`.
pub fn check_special(g: &Cpwl) -> Result<()> {
    if g.min_value() < -VALUE_TOL {
        return Err(Error::NotSpecial(format!(
            "takes negative value {}",
            g.min_value()
        )));
    }
    match g.support() {
        None => Err(Error::NotSpecial("nonzero tails".into())),
        Some((a, b)) if a == b => Ok(()),
        Some((a, b)) if a >= 0.125 && b <= 0.875 => Ok(()),
        Some((a, b)) => Err(Error::NotSpecial(format!(
            "support [{a}, {b}] is not inside [1/8, 7/8]"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::in_omega;
    use crate::cascade::residual_rn;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn agree(f: &Cpwl, net: &ReluNet, lo: f64, hi: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = rng.gen_range(lo..hi);
            assert!((f.eval(x) - net.eval1(x)).abs() <= 1e-12, "x = {x}");
        }
    }

    #[test]
    fn default_schedule() {
        let m = Mask::builtin("hat").unwrap();
        let p = GadgetParams::default_for(1, &m, &h_cpwl()).unwrap();
        assert_eq!(p.alpha1, 15.0 / 32.0);
        let p3 = GadgetParams::default_for(3, &m, &h_cpwl()).unwrap();
        assert_eq!(0.5 - p3.alpha2, pow2(-11));
        assert!(0.5 - p3.alpha2 < (0.5 - p3.beta1) * pow2(-2));
        for n in 1..=20 {
            GadgetParams::default_for(n, &m, &h_cpwl())
                .unwrap()
                .validate()
                .unwrap();
        }
        assert!(GadgetParams::default_for(0, &m, &h_cpwl()).is_err());
    }

    #[test]
    fn conservative_m_for_hat_mask() {
        // columns of the hat mask's transfer matrices sum to 1 in absolute value
        let m = Mask::builtin("hat").unwrap();
        assert_eq!(conservative_m(5, &m, &h_cpwl()), 1.0);
    }

    #[test]
    fn rhat_examples() {
        let (a, b) = (0.45, 0.48);
        let (f, net) = build_rhat(a, b).unwrap();
        assert!((f.eval(a / 2.0) - a).abs() < 1e-15);
        assert_eq!(f.eval((b + 0.5) / 2.0), 0.0);
        assert_eq!(net.size_report().width, 5);
        assert_eq!(net.size_report().depth, 1);
        agree(&f, &net, -1.0, 2.0);
        assert!(build_rhat(0.4, 0.45).is_err());
        assert!(build_rhat(0.48, 0.47).is_err());
    }

    #[test]
    fn chi_hat_examples() {
        let d = 1.0 / 64.0;
        let (c0, c1, n0, n1) = build_chi_hats(d).unwrap();
        assert_eq!(c0.eval(0.25), 1.0);
        assert_eq!(c0.eval(0.9), 0.0);
        assert_eq!(c1.eval(0.25), 0.0);
        assert_eq!(c1.eval(0.9), 1.0);
        assert_eq!(c0.eval(0.5 + d / 2.0), 0.5);
        assert_eq!(n0.width(), 2);
        assert_eq!(n1.width(), 2);
        agree(&c0, &n0, -1.0, 2.0);
        agree(&c1, &n1, -1.0, 2.0);
        assert!(build_chi_hats(0.0).is_err());
    }

    #[test]
    fn pi_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=4 {
            let m = 3.5;
            let net = build_pi(n, m).unwrap();
            assert_eq!(net.size_report().width, 2 * n + 1);
            assert_eq!(net.size_report().depth, 2);
            for _ in 0..500 {
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-m..=m)).collect();
                let mut inp = vec![1.0];
                inp.extend(&y);
                let out = net.forward(&inp).unwrap();
                for (a, b) in out.iter().zip(&y) {
                    assert!((a - b).abs() <= 1e-12);
                }
                inp[0] = 0.0;
                assert!(net.forward(&inp).unwrap().iter().all(|v| v.abs() <= 1e-12));
                let x: f64 = rng.gen_range(0.0..=1.0);
                let mut z = vec![x];
                z.extend(vec![0.0; n]);
                assert!(net.forward(&z).unwrap().iter().all(|v| v.abs() <= 1e-12));
            }
        }
        let net = build_pi(2, 1.0).unwrap();
        assert_eq!(net.forward(&[0.37, 0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn min_examples() {
        let net = build_min();
        assert_eq!(net.forward(&[2.0, 3.0]).unwrap(), vec![2.0]);
        assert_eq!(net.forward(&[-1.0, -2.0]).unwrap(), vec![-2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-10.0..10.0);
            let y: f64 = rng.gen_range(-10.0..10.0);
            assert_eq!(net.forward(&[x, x]).unwrap()[0], x);
            assert!((net.forward(&[x, y]).unwrap()[0] - x.min(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_examples() {
        let (f, net) = build_ramp(2).unwrap();
        assert_eq!(f.eval(1.5), 0.5);
        assert_eq!(f.eval(3.0), 1.0);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(net.width(), 2);
        agree(&f, &net, -3.0, 5.0);
        for k in 1..5 {
            let (f, _) = build_ramp(k).unwrap();
            for i in -40..=80 {
                let x = i as f64 / 8.0;
                if x < k as f64 - 1.0 || x > k as f64 {
                    let v = f.eval(x);
                    assert!(v == 0.0 || v == 1.0);
                }
            }
        }
        assert!(build_ramp(0).is_err());
    }

    #[test]
    fn h_examples() {
        let (f, net) = build_h();
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(0.375), 0.0);
        assert_eq!(f.eval(0.625), 0.0);
        assert!((f.eval(0.45) - 0.6).abs() < 1e-15);
        assert_eq!(net.width(), 3);
        assert_eq!(net.depth(), 1);
        check_special(&f).unwrap();
        agree(&f, &net, -1.0, 2.0);
    }

    #[test]
    fn special_check() {
        assert!(check_special(&Cpwl::hat(0.0, 1.0, 2.0).unwrap()).is_err());
        assert!(check_special(&Cpwl::hat(0.375, 0.5, 0.625).unwrap().scale(-1.0)).is_err());
        assert!(check_special(&Cpwl::zero()).is_ok());
    }

    #[test]
    fn rhat_power_agrees_with_residual_on_omega() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mask = Mask::builtin("hat").unwrap();
        for n in 1..=8 {
            let p = GadgetParams::default_for(n, &mask, &h_cpwl()).unwrap();
            let net = rhat_power_net(p.alpha1, p.beta1, n).unwrap();
            assert_eq!(net.depth(), n);
            assert_eq!(net.width(), 5);
            let delta = 0.5 - p.alpha1;
            let mut hits = 0;
            while hits < 1000 {
                let x: f64 = rng.gen_range(0.0..=1.0);
                if !in_omega(x, n, delta) {
                    continue;
                }
                hits += 1;
                assert!(
                    (net.eval1(x) - residual_rn(x, n)).abs() < 1e-9,
                    "n={n} x={x}"
                );
            }
            let dp = 0.5 - p.beta1;
            let h = pow2(-(n as i32));
            for k in 1..(1usize << n) {
                let right = k as f64 * h;
                let left = right - dp * 2.0 * h;
                for t in 0..5 {
                    let x = left + (right - left) * t as f64 / 4.0;
                    assert!(net.eval1(x).abs() < 1e-9, "n={n} x={x}");
                }
            }
        }
    }
}
