//! The reference evaluator: exact refinement iterates, bit extraction and the
//! transfer-matrix form of the cascade algorithm.

use crate::cpwl::Cpwl;
use crate::error::{Error, Result};
use crate::masks::Mask;

/// `Vg(x) = Σ c_j g(2x - j)`, exactly.
pub fn apply_v(mask: &Mask, g: &Cpwl) -> Cpwl {
    let terms: Vec<Cpwl> = (0..mask.coefficients().len())
        .map(|j| {
            g.dilate_shift(2.0, j as f64)
                .expect("dilation 2 is positive")
        })
        .collect();
    Cpwl::linear_combine(mask.coefficients(), &terms.iter().collect::<Vec<_>>())
        .expect("one coefficient per term")
}

pub fn apply_vn(mask: &Mask, g: &Cpwl, n: usize) -> Cpwl {
    let mut f = g.clone();
    for _ in 0..n {
        f = apply_v(mask, &f);
    }
    f
}

/// All iterates `V^0 g, ..., V^n g`.
pub fn iterates(mask: &Mask, g: &Cpwl, n: usize) -> Vec<Cpwl> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(g.clone());
    for i in 0..n {
        let next = apply_v(mask, &out[i]);
        out.push(next);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BitTrace {
    pub x: f64,
    pub bits: Vec<u8>,
    pub residuals: Vec<f64>,
}

impl BitTrace {
    /// `Σ B_k 2^{-k} + 2^{-n} R_n`, which reproduces `x`.
    pub fn reconstruct(&self) -> f64 {
        let n = self.bits.len();
        let mut s = 0.0;
        let mut w = 0.5;
        for &b in &self.bits {
            s += b as f64 * w;
            w *= 0.5;
        }
        let r = if n == 0 {
            self.x
        } else {
            self.residuals[n - 1]
        };
        s + r * 2f64.powi(-(n as i32))
    }
}

/// `Q = χ_[1/2, 1]`.
#[inline]
pub fn quantize(x: f64) -> u8 {
    (0.5..=1.0).contains(&x) as u8
}

/// One step of the residual map, extended by 0 left of 0 and 1 right of 1.
#[inline]
pub fn residual(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        2.0 * x - quantize(x) as f64
    }
}

pub fn bit_trace(x: f64, n: usize) -> Result<BitTrace> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutsideUnitInterval(x));
    }
    let mut bits = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut r = x;
    for _ in 0..n {
        let b = quantize(r);
        r = 2.0 * r - b as f64;
        bits.push(b);
        residuals.push(r);
    }
    Ok(BitTrace { x, bits, residuals })
}

/// `R^n(x)` by iteration, defined on all of ℝ.
pub fn residual_rn(x: f64, n: usize) -> f64 {
    (0..n).fold(x, |r, _| residual(r))
}

/// Closed form `2^n x - k` on `[k 2^{-n}, (k+1) 2^{-n})`, for `x` in `[0, 1)`.
pub fn residual_rn_closed(x: f64, n: usize) -> f64 {
    let s = x * 2f64.powi(n as i32);
    s - s.floor()
}

/// `G(x) = (g(x), g(x+1), ..., g(x+N-1))`.
pub fn vec_eval(g: &Cpwl, x: f64, n_support: usize) -> Vec<f64> {
    (0..n_support).map(|k| g.eval(x + k as f64)).collect()
}

/// `G_n(x) = T_{B_1} ... T_{B_n} G(R^n x)`, the vectorized `V^n g` at `x`.
pub fn cascade_gn(mask: &Mask, g: &Cpwl, x: f64, n: usize) -> Result<Vec<f64>> {
    let trace = bit_trace(x, n)?;
    let t = mask.transfer_matrices();
    let r = if n == 0 { x } else { trace.residuals[n - 1] };
    let mut v = vec_eval(g, r, mask.support_len());
    for &b in trace.bits.iter().rev() {
        v = t.get(b).mul_vec(&v);
    }
    Ok(v)
}

/// Successive increments `(n, ‖V^{n+1}φ₀ - V^nφ₀‖∞)` for `n = 0..n_max`, with
/// the fitted geometric rate.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointRun {
    pub increments: Vec<(usize, f64)>,
    pub fit: Option<RateFit>,
}

pub fn fixed_point_iterate(mask: &Mask, phi0: &Cpwl, n_max: usize) -> FixedPointRun {
    let mut increments = Vec::with_capacity(n_max);
    let mut cur = phi0.clone();
    for n in 0..n_max {
        let next = apply_v(mask, &cur);
        increments.push((n, next.sup_distance(&cur)));
        cur = next;
    }
    let fit = fit_rate(&increments);
    FixedPointRun { increments, fit }
}

/// Values at or below this are treated as numerical zero when fitting rates.
pub const FIT_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub lambda: f64,
    pub intercept: f64,
    /// Largest `|log e_n - (a + n log λ)|` over the fitted points.
    pub max_residual: f64,
    pub points: usize,
}

/// Least squares fit of `log e_n ≈ a + n log λ` over the points above
/// [`FIT_FLOOR`]. `None` with fewer than two such points.
pub fn fit_rate(points: &[(usize, f64)]) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > FIT_FLOOR && e.is_finite())
        .map(|&(n, e)| (n as f64, e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Some(RateFit {
        lambda: slope.exp(),
        intercept,
        max_residual,
        points: pts.len(),
    })
}

/// The set on which `g(R^n x)` vanishes for every special `g`: the points of
/// `[0, 1]` within `2^{-n-3}` of a multiple of `2^{-n}`.
pub fn lambda_intervals(n: usize) -> Vec<(f64, f64)> {
    let h = 2f64.powi(-(n as i32));
    let r = h / 8.0;
    (0..=(1usize << n))
        .map(|j| {
            let c = j as f64 * h;
            ((c - r).max(0.0), (c + r).min(1.0))
        })
        .collect()
}

pub fn in_lambda(x: f64, n: usize) -> bool {
    if !(0.0..=1.0).contains(&x) {
        return false;
    }
    let s = x * 2f64.powi(n as i32);
    (s - s.round()).abs() <= 0.125
}

/// Whether `x ∈ [0,1]` avoids every `E_j = ∪_{0<i<2^j} [i 2^{-j} - δ 2^{-j+1}, i 2^{-j}]`
/// for `j = 1..=n`.
pub fn in_omega(x: f64, n: usize, delta: f64) -> bool {
    if !(0.0..=1.0).contains(&x) {
        return false;
    }
    for j in 1..=n {
        let scale = 2f64.powi(j as i32);
        let s = x * scale;
        let i = s.ceil();
        if i > 0.0 && i < scale && s >= i - 2.0 * delta {
            return false;
        }
    }
    true
}
