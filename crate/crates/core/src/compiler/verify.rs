use serde::{Deserialize, Serialize};

use super::{CompileArtifact, Stage};
use crate::cascade::{apply_vn, residual_rn};
use crate::cpwl::Cpwl;
use crate::error::{Error, Result};
use crate::masks::Mask;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub stage: String,
    pub max_dev: f64,
    pub mean_dev: f64,
    pub width: usize,
    pub depth: usize,
    pub params: usize,
    pub bounds_ok: bool,
    pub width_bound: usize,
    pub depth_bound: usize,
    pub points: usize,
    pub grid_step: f64,
    pub tol: f64,
    /// Deviation within `tol` and sizes within their bounds.
    pub passed: bool,
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|i| lo + i as f64 * step).collect()
}

/// Compares the artifact with the exact iterate it stands for, on a uniform
/// grid over the stage's domain. `seed` is the `g` (or `g₀`) it was built from.
pub fn verify(
    art: &CompileArtifact,
    mask: &Mask,
    seed: &Cpwl,
    grid_step: f64,
    tol: f64,
) -> Result<Report> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "grid step {grid_step} must be positive"
        )));
    }
    let n = art.params.n;
    let big_n = mask.support_len() as f64;
    let (xs, want): (Vec<f64>, Vec<f64>) = match art.stage {
        Stage::Grn => {
            let xs = grid(-0.5, 1.5, grid_step);
            let want = xs.iter().map(|&x| seed.eval(residual_rn(x, n))).collect();
            (xs, want)
        }
        Stage::Coordinate { k } => {
            let f = apply_vn(mask, seed, n).shift(1.0 - k as f64);
            let xs = grid(0.0, 1.0, grid_step);
            let want = f.eval_sorted(&xs);
            (xs, want)
        }
        Stage::Special | Stage::General => {
            let f = apply_vn(mask, seed, n);
            let xs = grid(-1.0, big_n + 1.0, grid_step);
            let want = f.eval_sorted(&xs);
            (xs, want)
        }
    };
    let got = art.net.eval_many(&xs);
    let mut max_dev = 0.0f64;
    let mut total = 0.0;
    for (a, b) in got.iter().zip(&want) {
        let d = (a - b).abs();
        // NaN must not pass silently
        max_dev = if d.is_nan() {
            f64::INFINITY
        } else {
            max_dev.max(d)
        };
        total += d;
    }
    let size = art.net.size_report();
    let bounds_ok = art.bounds_ok();
    Ok(Report {
        stage: art.stage.label(),
        max_dev,
        mean_dev: total / xs.len() as f64,
        width: size.width,
        depth: size.depth,
        params: size.params,
        bounds_ok,
        width_bound: art.width_bound,
        depth_bound: art.depth_bound,
        points: xs.len(),
        grid_step,
        tol,
        passed: max_dev <= tol && bounds_ok,
    })
}
