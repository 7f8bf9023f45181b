//! Approximation experiments: compiled iterates against a deep reference
//! iterate, wavelet networks built from them, and an n-term sum demo.

use serde::{Deserialize, Serialize};

use crate::cascade::{apply_vn, fit_rate, RateFit};
use crate::compiler::{compile_general, compile_general_unlowered, CompileOptions};
use crate::cpwl::Cpwl;
use crate::error::{Error, Result};
use crate::masks::Mask;
use crate::relu_net::{lower, sum_nets, ReluNet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub error: f64,
    pub width: usize,
    pub depth: usize,
    pub params: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub mask: String,
    pub phi0: String,
    /// Refinement level of the reference iterate.
    pub reference_level: usize,
    pub records: Vec<ConvergenceRecord>,
    pub fitted_lambda: Option<f64>,
    /// Largest per-point residual of the log-linear fit.
    pub fit_max_residual: Option<f64>,
    pub fit_points: usize,
}

impl ConvergenceRun {
    pub fn fit(&self) -> Option<RateFit> {
        fit_rate(&self.errors())
    }

    pub fn errors(&self) -> Vec<(usize, f64)> {
        self.records.iter().map(|r| (r.n, r.error)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,error,width,depth,params\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:?},{},{},{}\n",
                r.n, r.error, r.width, r.depth, r.params
            ));
        }
        out
    }
}

/// Compiles `Vⁿφ₀` for `n = 1..=n_max` and measures each network against
/// `V^{n_max + ref_extra} φ₀` at the reference's breakpoints, where the sup
/// distance between the two piecewise-linear functions is attained.
pub fn approximate_phi(
    mask: &Mask,
    phi0: &Cpwl,
    n_max: usize,
    ref_extra: usize,
) -> Result<ConvergenceRun> {
    if n_max == 0 {
        return Err(Error::InvalidParams("n_max must be at least 1".into()));
    }
    let big_n = mask.support_len() as f64;
    if !phi0.vanishes_outside(0.0, big_n) {
        return Err(Error::Unsupported(mask.support_len()));
    }
    let level = n_max + ref_extra;
    let reference = apply_vn(mask, phi0, level);
    let mut xs: Vec<f64> = reference
        .breakpoints()
        .iter()
        .copied()
        .filter(|&x| (-1.0..=big_n + 1.0).contains(&x))
        .collect();
    xs.push(-1.0);
    xs.push(big_n + 1.0);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let want = reference.eval_sorted(&xs);

    let mut records = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let art = compile_general(phi0, n, mask, CompileOptions::default())?;
        let got = art.net.eval_many(&xs);
        let error = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let size = art.net.size_report();
        records.push(ConvergenceRecord {
            n,
            error,
            width: size.width,
            depth: size.depth,
            params: size.params,
        });
    }
    let mut run = ConvergenceRun {
        mask: mask.name().unwrap_or("custom").to_string(),
        phi0: describe(phi0),
        reference_level: level,
        records,
        fitted_lambda: None,
        fit_max_residual: None,
        fit_points: 0,
    };
    if let Some(fit) = run.fit() {
        run.fitted_lambda = Some(fit.lambda);
        run.fit_max_residual = Some(fit.max_residual);
        run.fit_points = fit.points;
    }
    Ok(run)
}

fn describe(f: &Cpwl) -> String {
    let pts: Vec<String> = f
        .breakpoints()
        .iter()
        .zip(f.values())
        .map(|(x, y)| format!("({x:?},{y:?})"))
        .collect();
    format!("cpwl[{}]", pts.join(","))
}

/// `(coeff, shift)` pairs `((-1)^j c_{1-j}, j)` for `j` with `c_{1-j} ≠ 0`.
pub fn wavelet_combo(mask: &Mask) -> Vec<(f64, f64)> {
    let len = mask.coefficients().len() as i64;
    (2 - len..=1)
        .filter_map(|j| {
            let c = mask.c(1 - j);
            let sign = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            (c != 0.0).then_some((sign * c, j as f64))
        })
        .collect()
}

/// `ψ = Σ coeff · φ(2x - shift)` for a piecewise-linear `φ`.
pub fn wavelet_cpwl(phi: &Cpwl, combo: &[(f64, f64)]) -> Result<Cpwl> {
    if combo.is_empty() {
        return Err(Error::EmptyCombination);
    }
    let parts = combo
        .iter()
        .map(|&(_, s)| phi.dilate_shift(2.0, s))
        .collect::<Result<Vec<_>>>()?;
    let coeffs: Vec<f64> = combo.iter().map(|c| c.0).collect();
    Cpwl::linear_combine(&coeffs, &parts.iter().collect::<Vec<_>>())
}

/// `ψ̂ = Σ coeff · φ̂(2x - shift)`, not lowered. The domain is the hull of the
/// mapped domains of the terms. `phi_net` must be exact wherever the terms
/// evaluate it, so pass it unlowered.
pub fn build_wavelet(phi_net: &ReluNet, combo: &[(f64, f64)]) -> Result<ReluNet> {
    if combo.is_empty() {
        return Err(Error::EmptyCombination);
    }
    if let [(c, s)] = combo {
        if *c == 1.0 && *s == 0.0 {
            return Ok(phi_net.clone());
        }
    }
    let terms = combo
        .iter()
        .map(|&(c, s)| Ok(phi_net.clone().affine_input(2.0, s)?.scale_output(c)))
        .collect::<Result<Vec<_>>>()?;
    let domain = hull(terms.iter().map(ReluNet::domain));
    let nets: Vec<ReluNet> = terms.into_iter().map(|t| t.with_domain(domain)).collect();
    Ok(sum_nets(&nets)?.with_domain(domain))
}

fn hull(ds: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    ds.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
        (lo.min(a), hi.max(b))
    })
}

/// The dyadic interval `[j, j+1] 2^{-k}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub k: u32,
    pub j: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NTermReport {
    pub terms: usize,
    pub level: usize,
    pub abs_coeff_sum: f64,
    /// Largest measured `‖ψ_I - ψ̂_I‖` over the terms, unit coefficient.
    pub per_wavelet_linf: f64,
    pub per_wavelet_l2: f64,
    pub error_linf: f64,
    pub error_l2: f64,
    pub bound_linf: f64,
    pub bound_l2: f64,
    pub params: usize,
    pub grid_step: f64,
    pub within_bound: bool,
}

pub const NTERM_GRID_STEP: f64 = 1.0 / 4096.0;
const BOUND_SLACK: f64 = 1e-12;

/// Everything `nterm_demo` needs about one wavelet: the reference `ψ` and an
/// unlowered network approximating it.
pub struct WaveletPair {
    pub psi: Cpwl,
    pub net: ReluNet,
    pub level: usize,
}

impl WaveletPair {
    /// `φ̂` compiled at `level` from `phi0`; `ψ` from `V^{level+ref_extra}φ₀`.
    pub fn new(mask: &Mask, phi0: &Cpwl, level: usize, ref_extra: usize) -> Result<Self> {
        let combo = wavelet_combo(mask);
        let phi_ref = apply_vn(mask, phi0, level + ref_extra);
        let psi = wavelet_cpwl(&phi_ref, &combo)?;
        let phi_net = compile_general_unlowered(phi0, level, mask, CompileOptions::default())?.net;
        let net = build_wavelet(&phi_net, &combo)?;
        Ok(WaveletPair { psi, net, level })
    }
}

fn norms(d: &[f64], step: f64) -> (f64, f64) {
    let linf = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let l2 = (d.iter().map(|v| v * v).sum::<f64>() * step).sqrt();
    (linf, l2)
}

/// `S = Σ f_I ψ_I` against `Ŝ = Σ f_I ψ̂_I`, with `ψ_I = 2^{k/2} ψ(2^k x - j)`,
/// measured on a grid of step `2^{-12}` over the union of the supports.
pub fn nterm_demo(pair: &WaveletPair, coeffs: &[(DyadicInterval, f64)]) -> Result<NTermReport> {
    if coeffs.is_empty() {
        return Err(Error::EmptyCombination);
    }
    if coeffs.iter().any(|(i, f)| !f.is_finite() || i.k > 30) {
        return Err(Error::InvalidInterval(
            "coefficients must be finite, levels at most 30".into(),
        ));
    }
    let (plo, phi) = pair.psi.support().unwrap_or((0.0, 0.0));
    let mut parts = Vec::with_capacity(coeffs.len());
    let mut nets = Vec::with_capacity(coeffs.len());
    for &(iv, f) in coeffs {
        let scale = 2f64.powi(iv.k as i32);
        let amp = scale.sqrt();
        let j = iv.j as f64;
        parts.push((f, pair.psi.dilate_shift(scale, j)?.scale(amp)));
        nets.push(pair.net.clone().affine_input(scale, j)?.scale_output(amp));
    }
    let lo = coeffs
        .iter()
        .map(|(iv, _)| (plo + iv.j as f64) / 2f64.powi(iv.k as i32))
        .fold(f64::INFINITY, f64::min);
    let hi = coeffs
        .iter()
        .map(|(iv, _)| (phi + iv.j as f64) / 2f64.powi(iv.k as i32))
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = (lo / NTERM_GRID_STEP).floor() * NTERM_GRID_STEP;
    let count = ((hi - lo) / NTERM_GRID_STEP).ceil() as usize;
    let xs: Vec<f64> = (0..=count)
        .map(|i| lo + i as f64 * NTERM_GRID_STEP)
        .collect();
    let domain = hull(nets.iter().map(ReluNet::domain)).0.min(lo);
    let domain = (domain, hull(nets.iter().map(ReluNet::domain)).1.max(hi));
    let units: Vec<ReluNet> = nets.into_iter().map(|n| n.with_domain(domain)).collect();
    let weighted: Vec<ReluNet> = units
        .iter()
        .zip(&parts)
        .map(|(n, (f, _))| n.clone().scale_output(*f))
        .collect();
    let s_hat = lower(&sum_nets(&weighted)?.with_domain(domain))?;

    let mut s = vec![0.0; xs.len()];
    let mut per = (0.0f64, 0.0f64);
    for ((f, psi_i), net) in parts.iter().zip(&units) {
        let exact = psi_i.eval_sorted(&xs);
        let approx = net.eval_many(&xs);
        let unit: Vec<f64> = exact.iter().zip(&approx).map(|(e, a)| e - a).collect();
        let (li, l2) = norms(&unit, NTERM_GRID_STEP);
        per = (per.0.max(li), per.1.max(l2));
        for (acc, e) in s.iter_mut().zip(&exact) {
            *acc += f * e;
        }
    }
    let got = s_hat.eval_many(&xs);
    let diff: Vec<f64> = s.iter().zip(&got).map(|(a, b)| a - b).collect();
    let (error_linf, error_l2) = norms(&diff, NTERM_GRID_STEP);
    let abs_coeff_sum: f64 = coeffs.iter().map(|c| c.1.abs()).sum();
    let bound_linf = abs_coeff_sum * per.0 + BOUND_SLACK;
    let bound_l2 = abs_coeff_sum * per.1 + BOUND_SLACK;
    Ok(NTermReport {
        terms: coeffs.len(),
        level: pair.level,
        abs_coeff_sum,
        per_wavelet_linf: per.0,
        per_wavelet_l2: per.1,
        error_linf,
        error_l2,
        bound_linf,
        bound_l2,
        params: s_hat.param_count(),
        grid_step: NTERM_GRID_STEP,
        within_bound: error_linf <= bound_linf && error_l2 <= bound_l2,
    })
}
