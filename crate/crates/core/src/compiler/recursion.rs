//! Scalar twin of the coordinate network: the same smoothed recursion
//! evaluated directly, plus the exact bit-driven recursion it approximates.

use crate::cascade::bit_trace;
use crate::cpwl::Cpwl;
use crate::error::{Error, Result};
use crate::gadgets::{chi_hat_cpwls, rhat_cpwl, GadgetParams};
use crate::masks::{Mask, TransferPair};

#[inline]
fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// The product gadget on scalars, in the network's operation order.
#[inline]
pub fn pi_scalar(x: f64, y: f64, m: f64) -> f64 {
    -relu(m * x - y) - relu(m - m * relu(x) - relu(-y)) + m
}

/// Row vectors `F^0, ..., F^n` plus the indicator pairs used at each step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<Vec<f64>>,
    pub indicators: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn output(&self) -> f64 {
        self.rows.last().map_or(0.0, |f| f[0])
    }
}

pub struct Recursion {
    g: Cpwl,
    n: usize,
    support: usize,
    m: f64,
    t: TransferPair,
    r1: Cpwl,
    r2: Cpwl,
    rm: Cpwl,
    chi0: Cpwl,
    chi1: Cpwl,
}

impl Recursion {
    pub fn new(g: &Cpwl, mask: &Mask, params: &GadgetParams) -> Result<Self> {
        params.validate()?;
        let (chi0, chi1) = chi_hat_cpwls(params.delta0)?;
        Ok(Recursion {
            g: g.clone(),
            n: params.n,
            support: mask.support_len(),
            m: params.m,
            t: mask.transfer_matrices(),
            r1: rhat_cpwl(params.alpha1, params.beta1)?,
            r2: rhat_cpwl(params.alpha2, params.beta2)?,
            rm: rhat_cpwl(params.alpha_mat, params.beta_mat)?,
            chi0,
            chi1,
        })
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.support {
            return Err(Error::CoordinateOutOfRange { k, n: self.support });
        }
        Ok(())
    }

    fn start(&self, k: usize, gval: f64) -> Vec<f64> {
        let mut f = vec![0.0; self.support];
        f[k - 1] = gval;
        f
    }

    /// `min(g(R̂₁ⁿ x), g(R̂₂ⁿ x))`.
    pub fn head(&self, x: f64) -> f64 {
        let (mut u1, mut u2) = (x, x);
        for _ in 0..self.n {
            u1 = self.r1.eval(u1);
            u2 = self.r2.eval(u2);
        }
        let a = self.g.eval(u1);
        let b = self.g.eval(u2);
        relu(b) - relu(b - a)
    }

    pub fn smoothed(&self, k: usize, x: f64) -> Result<Trajectory> {
        self.check_k(k)?;
        let mut rows = vec![self.start(k, self.head(x))];
        let mut indicators = Vec::with_capacity(self.n);
        let mut r = x;
        for _ in 0..self.n {
            let f = rows.last().unwrap();
            let c = (self.chi0.eval(r), self.chi1.eval(r));
            let y0 = self.t.t0.transpose_mul_vec(f);
            let y1 = self.t.t1.transpose_mul_vec(f);
            let next = y0
                .iter()
                .zip(&y1)
                .map(|(&a, &b)| pi_scalar(c.0, a, self.m) + pi_scalar(c.1, b, self.m))
                .collect();
            rows.push(next);
            indicators.push(c);
            r = self.rm.eval(r);
        }
        Ok(Trajectory { rows, indicators })
    }

    /// The same recursion driven by the true bits of `x ∈ [0, 1]`.
    pub fn exact(&self, k: usize, x: f64) -> Result<Trajectory> {
        self.check_k(k)?;
        let trace = bit_trace(x, self.n)?;
        let rn = if self.n == 0 {
            x
        } else {
            trace.residuals[self.n - 1]
        };
        let mut rows = vec![self.start(k, self.g.eval(rn))];
        let mut indicators = Vec::with_capacity(self.n);
        for &b in &trace.bits {
            let next = self.t.get(b).transpose_mul_vec(rows.last().unwrap());
            rows.push(next);
            indicators.push(if b == 0 { (1.0, 0.0) } else { (0.0, 1.0) });
        }
        Ok(Trajectory { rows, indicators })
    }

    /// Largest `|T_bᵀ F^j|` entry along exact trajectories sampled on the
    /// grid of step `2^{-n-4}`, over every coordinate, step and bit.
    pub fn trajectory_bound(&self) -> Result<f64> {
        let cells = 1usize << (self.n + 4);
        let mut best = 0.0f64;
        for i in 0..=cells {
            let x = i as f64 / cells as f64;
            for k in 1..=self.support {
                let tr = self.exact(k, x)?;
                for f in &tr.rows {
                    for t in [&self.t.t0, &self.t.t1] {
                        for v in t.transpose_mul_vec(f) {
                            best = best.max(v.abs());
                        }
                    }
                }
            }
        }
        Ok(best)
    }
}

/// Twice the sampled trajectory bound, or 1 when it vanishes.
pub fn tight_m(g: &Cpwl, mask: &Mask, params: &GadgetParams) -> Result<f64> {
    let b = Recursion::new(g, mask, params)?.trajectory_bound()?;
    Ok(if b > 0.0 { 2.0 * b } else { 1.0 })
}
