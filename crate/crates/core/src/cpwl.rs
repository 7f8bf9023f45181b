//! Exact arithmetic on univariate continuous piecewise-linear functions.
//!
//! A [`Cpwl`] is stored as a strictly increasing list of breakpoints with the
//! function values there. Between breakpoints the function is the linear
//! interpolant, and outside the breakpoint span it is constant (equal to the
//! nearest endpoint value). Compactly supported functions are the special case
//! of zero tails.
//!
//! All operations are exact up to floating-point rounding of the arithmetic on
//! breakpoints and values; with dyadic inputs they are exact in binary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Abscissae closer than this are merged when forming breakpoint unions.
pub const MERGE_TOL: f64 = 1e-12;
/// Segments of `f - g` whose slope is below this are treated as non-crossing.
pub const PARALLEL_TOL: f64 = 1e-12;
/// Tolerance used when checking that a function vanishes or is non-negative.
pub const VALUE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CpwlJson", into = "CpwlJson")]
pub struct Cpwl {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CpwlJson {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<CpwlJson> for Cpwl {
    type Error = Error;

    fn try_from(raw: CpwlJson) -> Result<Self> {
        Cpwl::new(raw.breakpoints, raw.values)
    }
}

impl From<Cpwl> for CpwlJson {
    fn from(f: Cpwl) -> Self {
        CpwlJson {
            breakpoints: f.xs,
            values: f.ys,
        }
    }
}

impl Cpwl {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::Empty("breakpoints"));
        }
        if breakpoints.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: breakpoints.len(),
                right: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("values"));
        }
        if breakpoints.iter().any(|x| !x.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidBreakpoints);
        }
        Ok(Cpwl {
            xs: breakpoints,
            ys: values,
        })
    }

    pub fn constant(c: f64) -> Self {
        Cpwl {
            xs: vec![0.0],
            ys: vec![c],
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Unit-height hat with the given three breakpoints.
    pub fn hat(left: f64, peak: f64, right: f64) -> Result<Self> {
        Self::new(vec![left, peak, right], vec![0.0, 1.0, 0.0])
    }

    /// The identity on `[lo, hi]`, clamped to constants outside.
    pub fn clamped_identity(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![lo, hi])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn left_tail(&self) -> f64 {
        self.ys[0]
    }

    pub fn right_tail(&self) -> f64 {
        self.ys[self.ys.len() - 1]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&b| b <= x) - 1;
        self.interp(i, x)
    }

    #[inline]
    fn interp(&self, i: usize, x: f64) -> f64 {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        if x == x0 {
            return y0;
        }
        y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
    }

    /// Evaluates at an ascending sequence of points in one pass.
    pub fn eval_sorted(&self, points: &[f64]) -> Vec<f64> {
        let n = self.xs.len();
        let mut out = Vec::with_capacity(points.len());
        let mut i = 0;
        for &x in points {
            if x <= self.xs[0] {
                out.push(self.ys[0]);
            } else if x >= self.xs[n - 1] {
                out.push(self.ys[n - 1]);
            } else {
                while self.xs[i + 1] <= x {
                    i += 1;
                }
                out.push(self.interp(i, x));
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Cpwl {
        Cpwl {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(|y| c * y).collect(),
        }
    }

    /// Exact pointwise linear combination `sum_i coeffs[i] * fs[i]`. The
    /// breakpoints of the result are the union of the inputs' breakpoints.
    pub fn linear_combine(coeffs: &[f64], fs: &[&Cpwl]) -> Result<Cpwl> {
        if coeffs.len() != fs.len() {
            return Err(Error::LengthMismatch {
                left: coeffs.len(),
                right: fs.len(),
            });
        }
        if fs.is_empty() {
            return Err(Error::Empty("linear combination"));
        }
        let xs = union_breakpoints(fs.iter().map(|f| f.breakpoints()));
        let mut ys = vec![0.0; xs.len()];
        for (&c, f) in coeffs.iter().zip(fs) {
            if c == 0.0 {
                continue;
            }
            for (y, v) in ys.iter_mut().zip(f.eval_sorted(&xs)) {
                *y += c * v;
            }
        }
        Ok(Cpwl { xs, ys })
    }

    /// `x -> f(a x - b)`; breakpoints map as `xi -> (xi + b) / a`.
    pub fn dilate_shift(&self, a: f64, b: f64) -> Result<Cpwl> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::NonPositiveDilation(a));
        }
        let xs: Vec<f64> = self.xs.iter().map(|xi| (xi + b) / a).collect();
        Cpwl::new(xs, self.ys.clone())
    }

    /// `x -> f(x - delta)`.
    pub fn shift(&self, delta: f64) -> Cpwl {
        Cpwl {
            xs: self.xs.iter().map(|xi| xi + delta).collect(),
            ys: self.ys.clone(),
        }
    }

    pub fn pointwise_min(&self, other: &Cpwl) -> Cpwl {
        let base = union_breakpoints([self.breakpoints(), other.breakpoints()]);
        let fa = self.eval_sorted(&base);
        let fb = other.eval_sorted(&base);
        let mut xs = Vec::with_capacity(base.len() * 2);
        let mut ys = Vec::with_capacity(base.len() * 2);
        for i in 0..base.len() {
            xs.push(base[i]);
            ys.push(fa[i].min(fb[i]));
            if i + 1 == base.len() {
                break;
            }
            let (p, q) = (base[i], base[i + 1]);
            let (dp, dq) = (fa[i] - fb[i], fa[i + 1] - fb[i + 1]);
            if dp * dq < 0.0 && ((dq - dp) / (q - p)).abs() >= PARALLEL_TOL {
                let t = p + (q - p) * (dp / (dp - dq));
                if t - p > MERGE_TOL && q - t > MERGE_TOL {
                    xs.push(t);
                    ys.push(self.eval(t).min(other.eval(t)));
                }
            }
        }
        Cpwl { xs, ys }
    }

    /// Exact `||f - g||_inf`: the difference is piecewise linear with constant
    /// tails, so the supremum is attained at a breakpoint of either function.
    pub fn sup_distance(&self, other: &Cpwl) -> f64 {
        let xs = union_breakpoints([self.breakpoints(), other.breakpoints()]);
        self.eval_sorted(&xs)
            .into_iter()
            .zip(other.eval_sorted(&xs))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.ys.iter().fold(0.0, |m, y| m.max(y.abs()))
    }

    /// `x -> self(inner(x))`.
    pub fn compose(&self, inner: &Cpwl) -> Cpwl {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(inner.len() * (self.len() + 1));
        for i in 0..inner.len() {
            pts.push((inner.xs[i], self.eval(inner.ys[i])));
            if i + 1 == inner.len() {
                break;
            }
            let (p, q) = (inner.xs[i], inner.xs[i + 1]);
            let (u, v) = (inner.ys[i], inner.ys[i + 1]);
            if u == v {
                continue;
            }
            let (lo, hi) = if u < v { (u, v) } else { (v, u) };
            let start = self.xs.partition_point(|&b| b <= lo);
            let end = self.xs.partition_point(|&b| b < hi);
            let mut seg: Vec<(f64, f64)> = (start..end)
                .map(|j| {
                    let xi = self.xs[j];
                    (p + (xi - u) * ((q - p) / (v - u)), self.ys[j])
                })
                .collect();
            if u > v {
                seg.reverse();
            }
            pts.extend(seg.into_iter().filter(|&(t, _)| t > p && t < q));
        }
        dedup_points(pts)
    }

    /// Copy of `self` with breakpoints restricted to `[lo, hi]` (endpoints
    /// added); agrees with `self` on `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Cpwl {
        let mut xs = vec![lo];
        xs.extend(self.xs.iter().copied().filter(|&x| x > lo && x < hi));
        if hi > lo {
            xs.push(hi);
        }
        let ys = self.eval_sorted(&xs);
        Cpwl { xs, ys }
    }

    /// Smallest closed interval outside which the function vanishes, or
    /// `None` if a tail is nonzero. The zero function reports `Some` of an
    /// empty interval at its first breakpoint.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.left_tail().abs() > VALUE_TOL || self.right_tail().abs() > VALUE_TOL {
            return None;
        }
        let nz: Vec<usize> = (0..self.len())
            .filter(|&i| self.ys[i].abs() > VALUE_TOL)
            .collect();
        match (nz.first(), nz.last()) {
            (Some(&a), Some(&b)) => Some((self.xs[a - 1], self.xs[b + 1])),
            _ => Some((self.xs[0], self.xs[0])),
        }
    }

    pub fn vanishes_outside(&self, lo: f64, hi: f64) -> bool {
        match self.support() {
            Some((a, b)) => a >= lo - VALUE_TOL && b <= hi + VALUE_TOL || a == b,
            None => false,
        }
    }

    pub fn min_value(&self) -> f64 {
        self.ys.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Sorted union of breakpoint lists with abscissae closer than
/// [`MERGE_TOL`] merged (the smaller one is kept).
pub fn union_breakpoints<'a, I>(lists: I) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut all: Vec<f64> = lists.into_iter().flatten().copied().collect();
    all.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        match out.last() {
            Some(&last) if x - last <= MERGE_TOL => {}
            _ => out.push(x),
        }
    }
    out
}

fn dedup_points(mut pts: Vec<(f64, f64)>) -> Cpwl {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut xs: Vec<f64> = Vec::with_capacity(pts.len());
    let mut ys: Vec<f64> = Vec::with_capacity(pts.len());
    for (x, y) in pts {
        match xs.last() {
            Some(&last) if x - last <= MERGE_TOL => {}
            _ => {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    Cpwl { xs, ys }
}

/// The vectorization `Vec(g) = (g_1, ..., g_N)` with `g_k(x) = g(x + k - 1)`,
/// each component restricted to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VecFunction {
    components: Vec<Cpwl>,
}

impl VecFunction {
    pub fn of(g: &Cpwl, n: usize) -> Self {
        let components = (1..=n)
            .map(|k| g.shift(-((k - 1) as f64)).restrict(0.0, 1.0))
            .collect();
        VecFunction { components }
    }

    pub fn components(&self) -> &[Cpwl] {
        &self.components
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Checks `g_k(1) = g_{k+1}(0)` for consecutive components.
    pub fn is_matched(&self, tol: f64) -> bool {
        self.components
            .windows(2)
            .all(|w| (w[0].eval(1.0) - w[1].eval(0.0)).abs() <= tol)
    }
}

/// One scaled hat `coeff * hat(left, peak, right)` of a hat decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HatTerm {
    pub coeff: f64,
    pub left: f64,
    pub peak: f64,
    pub right: f64,
}

impl HatTerm {
    pub fn hat(&self) -> Cpwl {
        Cpwl::hat(self.left, self.peak, self.right).expect("hat breakpoints are ordered")
    }

    /// Shift `s` such that `hat(x) = special_hat(x - s)` with the special hat
    /// centred in `[0, 1]`.
    pub fn special_shift(&self) -> f64 {
        (self.left + self.right) / 2.0 - 0.5
    }

    pub fn special_hat(&self) -> Cpwl {
        let s = self.special_shift();
        Cpwl::hat(self.left - s, self.peak - s, self.right - s).expect("ordered")
    }
}

/// Writes `g0` (vanishing outside `[0, support_len]`) as a combination of
/// unit hats centred at the interior points `j * grid_step` of a uniform grid.
/// Every breakpoint of `g0` inside `(0, support_len)` must be a grid point.
pub fn hat_decompose(g0: &Cpwl, support_len: usize, grid_step: f64) -> Result<Vec<HatTerm>> {
    if !(grid_step > 0.0) {
        return Err(Error::OffGrid {
            point: support_len as f64,
            step: grid_step,
        });
    }
    let len = support_len as f64;
    if !g0.vanishes_outside(0.0, len) {
        return Err(Error::Unsupported(support_len));
    }
    let count = (len / grid_step).round();
    if (count * grid_step - len).abs() > 1e-9 * len.max(1.0) {
        return Err(Error::OffGrid {
            point: len,
            step: grid_step,
        });
    }
    for &x in g0.breakpoints() {
        if x > 0.0 && x < len {
            let k = (x / grid_step).round();
            if (k * grid_step - x).abs() > 1e-9 * grid_step {
                return Err(Error::OffGrid {
                    point: x,
                    step: grid_step,
                });
            }
        }
    }
    let count = count as usize;
    Ok((1..count)
        .map(|j| {
            let peak = j as f64 * grid_step;
            HatTerm {
                coeff: g0.eval(peak),
                left: peak - grid_step,
                peak,
                right: peak + grid_step,
            }
        })
        .collect())
}

/// Hat decomposition on an arbitrary node set: `nodes` must be strictly
/// increasing, start at 0, end at `support_len`, and contain every breakpoint
/// of `g0` in between.
pub fn hat_decompose_on_nodes(
    g0: &Cpwl,
    support_len: usize,
    nodes: &[f64],
) -> Result<Vec<HatTerm>> {
    let len = support_len as f64;
    if !g0.vanishes_outside(0.0, len) {
        return Err(Error::Unsupported(support_len));
    }
    if nodes.len() < 2
        || nodes[0] != 0.0
        || nodes[nodes.len() - 1] != len
        || nodes.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidBreakpoints);
    }
    for &x in g0.breakpoints() {
        if x > 0.0 && x < len && !nodes.iter().any(|&t| (t - x).abs() <= MERGE_TOL) {
            return Err(Error::OffGrid {
                point: x,
                step: 0.0,
            });
        }
    }
    Ok(nodes
        .windows(3)
        .map(|w| HatTerm {
            coeff: g0.eval(w[1]),
            left: w[0],
            peak: w[1],
            right: w[2],
        })
        .collect())
}

/// Sum of the scaled hats of a decomposition.
pub fn reconstruct(terms: &[HatTerm]) -> Result<Cpwl> {
    if terms.is_empty() {
        return Ok(Cpwl::zero());
    }
    let hats: Vec<Cpwl> = terms.iter().map(HatTerm::hat).collect();
    let coeffs: Vec<f64> = terms.iter().map(|t| t.coeff).collect();
    Cpwl::linear_combine(&coeffs, &hats.iter().collect::<Vec<_>>())
}
