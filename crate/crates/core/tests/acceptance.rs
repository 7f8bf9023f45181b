//! Acceptance suite: one [PASS]/[FAIL] line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relu_cascade::approx::{approximate_phi, nterm_demo, DyadicInterval, WaveletPair};
use relu_cascade::cascade::{apply_vn, bit_trace, cascade_gn, in_omega, residual_rn};
use relu_cascade::compiler::{
    compile, compile_grn, coordinate_width_bound, default_params, verify, CompileOptions, Stage,
};
use relu_cascade::cpwl::Cpwl;
use relu_cascade::gadgets::{build_min, build_pi, h_cpwl, rhat_power_net, GadgetParams};
use relu_cascade::masks::Mask;

type Outcome = (bool, String);

fn mask(name: &str) -> Mask {
    Mask::builtin(name).unwrap()
}

fn step(n: usize) -> f64 {
    2f64.powi(-(n as i32) - 6)
}

struct SizeRow {
    label: String,
    special: bool,
    big_n: usize,
    n: usize,
    width: usize,
    depth: usize,
}

/// Criterion 1; also collects the sizes checked by criterion 2.
fn oracle_equivalence(sizes: &mut Vec<SizeRow>) -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    for name in ["hat", "bspline3", "d4"] {
        let m = mask(name);
        let big_n = m.support_len();
        let len = big_n as f64;
        let seeds = [
            ("H", h_cpwl()),
            ("hat", Cpwl::hat(0.0, len / 2.0, len).unwrap()),
        ];
        for (seed_name, seed) in &seeds {
            for n in 1..=8 {
                let art = match compile(seed, n, &m, CompileOptions::default()) {
                    Ok(a) => a,
                    Err(e) => return (false, format!("{name}/{seed_name}/n={n}: {e}")),
                };
                let r = verify(&art, &m, seed, step(n), 1e-9).unwrap();
                if r.max_dev > worst.0 || worst.1.is_empty() {
                    worst = (r.max_dev, format!("{name}/{seed_name}/n={n}"));
                }
                sizes.push(SizeRow {
                    label: format!("{name}/{seed_name}/n={n}"),
                    special: art.stage == Stage::Special,
                    big_n,
                    n,
                    width: r.width,
                    depth: r.depth,
                });
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst.0 <= 1e-9 && secs < 60.0,
        format!(
            "max sup deviation {:.3e} ({}), tol 1e-9; {secs:.1} s (limit 60 s)",
            worst.0, worst.1
        ),
    )
}

fn size_bounds(sizes: &[SizeRow]) -> Outcome {
    let mut bad = Vec::new();
    for s in sizes {
        let ok = if s.special {
            s.width <= s.big_n * coordinate_width_bound(3, s.big_n) && s.depth == 4 * s.n + 2
        } else {
            let w = (s.big_n + 10).max(4 * s.big_n + 3);
            s.width <= s.big_n * w + 2 && s.depth <= (8 * s.big_n - 1) * (4 * s.n + 2)
        };
        if !ok {
            bad.push(format!("{} (w {}, d {})", s.label, s.width, s.depth));
        }
    }
    let special = sizes.iter().filter(|s| s.special).count();
    (
        bad.is_empty() && !sizes.is_empty(),
        if bad.is_empty() {
            format!(
                "{special} special nets at depth 4n+2, {} general nets within bounds",
                sizes.len() - special
            )
        } else {
            format!("violations: {}", bad.join(", "))
        },
    )
}

fn gadget_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let big_m = 3.0;
    let pi = build_pi(1, big_m).unwrap();
    let mut pi_err = 0.0f64;
    for _ in 0..10_000 {
        let y: f64 = rng.gen_range(-big_m..=big_m);
        let x: f64 = rng.gen_range(0.0..=1.0);
        pi_err = pi_err
            .max((pi.forward(&[1.0, y]).unwrap()[0] - y).abs())
            .max(pi.forward(&[0.0, y]).unwrap()[0].abs())
            .max(pi.forward(&[x, 0.0]).unwrap()[0].abs());
    }
    let min = build_min();
    let mut min_err = 0.0f64;
    for _ in 0..10_000 {
        let a: f64 = rng.gen_range(-10.0..10.0);
        let b: f64 = rng.gen_range(-10.0..10.0);
        min_err = min_err.max((min.forward(&[a, b]).unwrap()[0] - a.min(b)).abs());
    }
    let mut rhat_err = 0.0f64;
    let mut samples = 0;
    for n in 1..=8 {
        let p = GadgetParams::default_for(n, &mask("hat"), &h_cpwl()).unwrap();
        let net = rhat_power_net(p.alpha1, p.beta1, n).unwrap();
        let delta = 0.5 - p.alpha1;
        let mut hits = 0;
        while hits < 1000 {
            let x: f64 = rng.gen_range(0.0..=1.0);
            if in_omega(x, n, delta) {
                hits += 1;
                rhat_err = rhat_err.max((net.eval1(x) - residual_rn(x, n)).abs());
            }
        }
        let h = 2f64.powi(-(n as i32));
        let dp = 0.5 - p.beta1;
        for k in 1..(1usize << n) {
            let right = k as f64 * h;
            let left = right - dp * 2.0 * h;
            for t in 0..5 {
                rhat_err = rhat_err.max(net.eval1(left + (right - left) * t as f64 / 4.0).abs());
            }
        }
        samples += hits;
    }
    // R̂ⁿ composes relus with slopes near 2^(n+6); cancellation leaves about
    // 2^(2n) ulp, so it is held to the oracle tolerance instead.
    (
        pi_err <= 1e-12 && min_err <= 1e-12 && rhat_err <= 1e-9,
        format!(
            "product {pi_err:.1e}, min {min_err:.1e} (1e4 probes each, tol 1e-12); R̂ⁿ {rhat_err:.1e} over {samples} Ω_n points and zero intervals, n ≤ 8 (tol 1e-9)"
        ),
    )
}

fn min_composition() -> Outcome {
    let g = h_cpwl();
    let mut worst = 0.0f64;
    for n in 1..=8 {
        let p = default_params(n, &mask("hat"), &g, false).unwrap();
        let art = compile_grn(&g, &p).unwrap();
        worst = worst.max(
            verify(&art, &mask("hat"), &g, step(n), 1e-10)
                .unwrap()
                .max_dev,
        );
    }
    (
        worst <= 1e-10,
        format!("max deviation {worst:.3e} over [-1/2, 3/2], n ≤ 8; tol 1e-10"),
    )
}

fn cascade_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut bits = 0.0f64;
    for name in ["haar", "hat", "bspline3", "d4"] {
        let m = mask(name);
        let len = m.support_len() as f64;
        let g = Cpwl::hat(0.0, len / 2.0, len).unwrap();
        for n in 0..=6 {
            let vn = apply_vn(&m, &g, n);
            for _ in 0..1000 {
                let x: f64 = rng.gen_range(0.0..1.0);
                for (k, v) in cascade_gn(&m, &g, x, n).unwrap().iter().enumerate() {
                    worst = worst.max((v - vn.eval(x + k as f64)).abs());
                }
                bits = bits.max((bit_trace(x, n).unwrap().reconstruct() - x).abs());
            }
        }
    }
    (
        worst <= 1e-9 && bits <= 1e-12,
        format!(
            "matrix form vs iteration {worst:.3e} (tol 1e-9); bit identity {bits:.1e} (tol 1e-12)"
        ),
    )
}

fn exponential_approximation() -> Outcome {
    let phi0 = Cpwl::hat(0.0, 1.0, 2.0).unwrap();
    let d4 = approximate_phi(&mask("d4"), &phi0, 8, 4).unwrap();
    let hat = approximate_phi(&mask("hat"), &phi0, 8, 4).unwrap();
    let hat_max = hat.records.iter().map(|r| r.error).fold(0.0, f64::max);
    let (lambda, resid) = match (d4.fitted_lambda, d4.fit_max_residual) {
        (Some(l), Some(r)) => (l, r),
        _ => return (false, "d4 errors too small to fit".into()),
    };
    (
        lambda > 0.0 && lambda < 0.9 && resid < 0.5 && hat_max <= 1e-10,
        format!(
            "d4 fitted λ = {lambda:.4} (need < 0.9), max log residual {resid:.3} (need < 0.5); hat mask max E_n {hat_max:.1e} (need ≤ 1e-10)"
        ),
    )
}

fn shift_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let g = Cpwl::new(vec![0.0, 0.4, 1.1, 2.0], vec![0.0, 1.0, -0.5, 0.0]).unwrap();
    for i in 0..20 {
        let m = mask(["hat", "bspline3", "d4"][i % 3]);
        let delta: f64 = rng.gen_range(-1.0..1.0);
        let n = rng.gen_range(0..=5usize);
        let lhs = apply_vn(&m, &g, n);
        let rhs = apply_vn(&m, &g.shift(delta), n);
        let s = delta * 2f64.powi(-(n as i32));
        for j in 0..=4000 {
            let x = -2.0 + 6.0 * j as f64 / 4000.0;
            worst = worst.max((lhs.eval(x) - rhs.eval(x + s)).abs());
        }
    }
    (
        worst <= 1e-10,
        format!("max deviation {worst:.3e} over 20 (δ, n ≤ 5) pairs; tol 1e-10"),
    )
}

fn nterm() -> Outcome {
    let phi0 = Cpwl::hat(0.0, 1.0, 2.0).unwrap();
    let pair = WaveletPair::new(&mask("d4"), &phi0, 2, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_ratio = 0.0f64;
    let mut all = true;
    for _ in 0..10 {
        let size = rng.gen_range(1..=8);
        let coeffs: Vec<(DyadicInterval, f64)> = (0..size)
            .map(|_| {
                let k = rng.gen_range(0..3u32);
                let j = rng.gen_range(-1..(1i64 << k) + 1);
                (DyadicInterval { k, j }, rng.gen_range(-1.0..1.0))
            })
            .collect();
        let r = nterm_demo(&pair, &coeffs).unwrap();
        all &= r.within_bound;
        worst_ratio = worst_ratio
            .max(r.error_l2 / r.bound_l2)
            .max(r.error_linf / r.bound_linf);
    }
    (
        all,
        format!("10 sets of ≤ 8 terms; largest error/bound ratio {worst_ratio:.3} (L2 and L∞)"),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_relu-cascade"))
        .args(args)
        .current_dir(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let root = std::env::temp_dir().join(format!("relu-cascade-acceptance-{}", std::process::id()));
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let dir = root.join(run);
        std::fs::create_dir_all(&dir).unwrap();
        let ok = run_cli(
            &dir,
            &[
                "compile", "--mask", "d4", "--seed", "hat", "--n", "3", "--out", "net.json",
            ],
        ) && run_cli(
            &dir,
            &[
                "compile",
                "--mask",
                "bspline3",
                "--seed",
                "H",
                "--n",
                "5",
                "--out",
                "special.json",
            ],
        ) && run_cli(
            &dir,
            &["converge", "--mask", "d4", "--nmax", "5", "--out", "."],
        );
        if !ok {
            return (false, format!("CLI run {run} failed"));
        }
        let files: Vec<Vec<u8>> = [
            "net.json",
            "special.json",
            "convergence.csv",
            "increments.csv",
            "summary.json",
        ]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap_or_default())
        .collect();
        outputs.push(files);
    }
    let _ = std::fs::remove_dir_all(&root);
    let same = outputs[0] == outputs[1] && outputs[0].iter().all(|f| !f.is_empty());
    (
        same,
        "two compile/converge runs, 5 output files compared byte for byte".into(),
    )
}

fn main() {
    let mut sizes = Vec::new();
    let first = oracle_equivalence(&mut sizes);
    let results: Vec<(&str, Outcome)> = vec![
        ("1 oracle equivalence", first),
        ("2 size bounds", size_bounds(&sizes)),
        ("3 gadget identities", gadget_identities()),
        ("4 min composition", min_composition()),
        ("5 cascade self-consistency", cascade_consistency()),
        ("6 exponential approximation", exponential_approximation()),
        ("7 shift identity", shift_identity()),
        ("8 n-term bound", nterm()),
        ("9 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, (ok, detail)) in &results {
        println!("[{}] {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
