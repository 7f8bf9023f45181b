use relu_cascade::cascade::apply_vn;
use relu_cascade::compiler::{
    compile, compile_coordinate, coordinate_width_bound, default_params, verify, CompileOptions,
    Stage,
};
use relu_cascade::cpwl::Cpwl;
use relu_cascade::gadgets::h_cpwl;
use relu_cascade::masks::Mask;

#[test]
fn coordinate_examples_hat_mask() {
    let m = Mask::builtin("hat").unwrap();
    let g = h_cpwl();
    let p = default_params(2, &m, &g, false).unwrap();
    let v2 = apply_vn(&m, &g, 2);
    for k in [1, 2] {
        let art = compile_coordinate(&g, k, &m, &p).unwrap();
        assert!(art.net.width() <= 12);
        assert_eq!(art.width_bound, 12);
        assert_eq!(art.net.depth(), 9);
        for i in 0..=512 {
            let x = i as f64 / 512.0;
            assert!((art.net.eval1(x) - v2.eval(x + k as f64 - 1.0)).abs() <= 1e-9);
        }
    }
    assert!(compile_coordinate(&g, 3, &m, &p).is_err());
}

#[test]
fn special_sizes_across_n() {
    let g = h_cpwl();
    for name in ["hat", "bspline3", "d4"] {
        let m = Mask::builtin(name).unwrap();
        let big_n = m.support_len();
        let mut widths = Vec::new();
        for n in 1..=8 {
            let art = compile(&g, n, &m, CompileOptions::default()).unwrap();
            assert_eq!(art.stage, Stage::Special);
            assert_eq!(art.net.depth(), 4 * n + 2);
            assert!(art.net.width() <= big_n * coordinate_width_bound(3, big_n));
            // zero up to the rounding of the lowering shifts
            assert!(art.net.eval1(-0.5).abs() < 1e-9);
            let v = art.net.eval1(big_n as f64 + 0.5);
            assert!(v.abs() < 1e-9, "{name} n={n}: {v}");
            widths.push(art.net.width());
        }
        // width settles once a block boundary exists
        assert!(
            widths[1..].iter().all(|&w| w == widths[1]),
            "{name}: {widths:?}"
        );
    }
}

#[test]
fn general_examples() {
    let m = Mask::builtin("hat").unwrap();
    let g0 = Cpwl::hat(0.0, 1.0, 2.0).unwrap();
    let art = compile(&g0, 4, &m, CompileOptions::default()).unwrap();
    let r = verify(&art, &m, &g0, 2f64.powi(-10), 1e-9).unwrap();
    assert!(r.passed && r.max_dev <= 1e-9, "{r:?}");

    let m = Mask::builtin("bspline3").unwrap();
    let g0 = Cpwl::hat(0.0, 1.5, 3.0).unwrap();
    for n in 1..=6 {
        let art = compile(&g0, n, &m, CompileOptions::default()).unwrap();
        assert!(art.net.width() <= 3 * 15 + 2);
        assert!(art.net.depth() <= 23 * (4 * n + 2));
        let r = verify(&art, &m, &g0, 2f64.powi(-(n as i32) - 6), 1e-9).unwrap();
        assert!(r.passed, "n={n}: {r:?}");
    }
}

#[test]
fn serialized_nets_round_trip_exactly() {
    let m = Mask::builtin("d4").unwrap();
    let art = compile(&h_cpwl(), 3, &m, CompileOptions::default()).unwrap();
    let back = relu_cascade::relu_net::ReluNet::from_json(&art.net.to_json().unwrap()).unwrap();
    for i in 0..=1000 {
        let x = -1.0 + 5.0 * i as f64 / 1000.0;
        assert_eq!(back.eval1(x), art.net.eval1(x));
    }
}
