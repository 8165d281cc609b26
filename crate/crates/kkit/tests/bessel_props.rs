use std::f64::consts::PI;

use kkit::bessel::*;
use kkit::testfn::{special_minus, special_plus, TestFunction};
use kkit::verify::{bessel_cross_check, cross_grid};
use kkit::C64;
use proptest::prelude::*;

#[test]
fn cross_method_grid() {
    let (w, t) = cross_grid();
    let rep = bessel_cross_check(&w, &t).unwrap();
    assert_eq!(rep.points.len(), 400);
    assert_eq!(rep.single_method, 0);
    assert!(rep.max_discrepancy <= 1e-8, "{}", rep.max_discrepancy);
}

#[test]
fn mellin_barnes_example() {
    let w = C64::new(0.6, 0.3);
    let s = j_series_scaled(w, 2.0).0 * (0.5 * PI * 0.3).exp();
    let mb = j_mellin_barnes(w, 2.0, 1e-13).unwrap();
    assert!((s - mb).norm() <= 1e-8 * s.norm());
}

#[test]
fn maximum_of_j_follows_cube_root_law() {
    // max_t J_u(t) = 0.67488 u^{-1/3} (1 + O(u^{-2/3}))
    for u in [10.0, 20.0, 50.0] {
        let m = (0..40_000)
            .map(|i| bessel_jn_all(u as usize, u + i as f64 * 1e-3)[u as usize].abs())
            .fold(0.0, f64::max);
        let lead = 0.674_885 * f64::powf(u, -1.0 / 3.0);
        assert!((m / lead - 1.0).abs() < 0.05, "{u}: {m} {lead}");
    }
    let m2 = (1..20_000)
        .map(|i| bessel_j(C64::new(2.0, 0.0), i as f64 * 1e-3).unwrap().re.abs())
        .fold(0.0, f64::max);
    assert!(2.0 * m2 < 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn real_order_gives_real_values(u in -4.0f64..4.0, lt in -2.0f64..4.0) {
        let t = 10f64.powf(lt);
        let v = bessel_j(C64::new(u, 0.0), t).unwrap();
        prop_assert!(v.im.abs() <= 1e-12 * v.norm() + 1e-300, "{} {}", v, t);
    }

    #[test]
    fn recurrence_in_the_order(x in -2.9f64..2.9, y in -20.0f64..20.0, lt in -1.0f64..3.0) {
        // J_{w-1} + J_{w+1} = (2w/t) J_w
        let t = 10f64.powf(lt);
        let w = C64::new(x, y);
        let a = bessel_j_scaled(w - 1.0, t).unwrap().0 + bessel_j_scaled(w + 1.0, t).unwrap().0;
        let b = 2.0 * w / t * bessel_j_scaled(w, t).unwrap().0;
        let scale = a.norm().max(b.norm()).max(1e-6 * (2.0 / (PI * t)).sqrt().min(1.0));
        prop_assert!((a - b).norm() <= 1e-8 * scale, "{} {} {} {}", w, t, a, b);
    }
}

#[test]
fn transform_is_linear() {
    let k1 = special_plus(0.3).unwrap();
    let k2 = special_minus(0.2).unwrap();
    let k3 = special_plus(1.1).unwrap();
    let (a, b) = (C64::new(2.0, 0.0), C64::new(-0.7, 0.0));
    let k = TestFunction::linear(a, &k1, b, &k2);
    let kk = TestFunction::linear(C64::new(1.0, 0.0), &k, C64::new(0.5, 0.0), &k3);
    for alpha in [0.0, 0.6] {
        for y in [1e-3, 0.4, 7.0, 150.0] {
            let v1 = bessel_transform_plus(&k1, y, alpha, 1e-10).unwrap().value;
            let v2 = bessel_transform_plus(&k2, y, alpha, 1e-10).unwrap().value;
            let v3 = bessel_transform_plus(&k3, y, alpha, 1e-10).unwrap().value;
            let v = bessel_transform_plus(&k, y, alpha, 1e-10).unwrap().value;
            let vv = bessel_transform_plus(&kk, y, alpha, 1e-10).unwrap().value;
            assert!((v - (a * v1 + b * v2)).norm() < 1e-8, "{alpha} {y}");
            assert!((vv - (v + 0.5 * v3)).norm() < 1e-8, "{alpha} {y}");
        }
    }
}

#[test]
fn discrete_only_transform() {
    let k = TestFunction::single_half(4, 1.0).unwrap();
    for y in [1e-4, 0.05, 1.0, 30.0, 1e3] {
        let x = 4.0 * PI * f64::sqrt(y);
        let want = 3.0 * bessel_jn_all(3, x)[3];
        let got = bessel_transform_plus(&k, y, 0.6, 1e-12).unwrap().value;
        assert!((got.re - want).abs() <= 1e-9 && got.im == 0.0, "{y}");
    }
}

#[test]
fn bound_report_small_y_slopes() {
    let ys = [1e-6, 1e-5, 1e-4, 1e-3, 1.0, 1e3];
    for sign in [Sign::Plus, Sign::Minus] {
        let rep = verify_bessel_bounds(sign, &[0.5, 0.1], &ys, 0.6, 0.1).unwrap();
        assert_eq!(rep.rows.len(), 12);
        assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
        for &(s, slope) in &rep.small_y_slopes {
            assert!(slope >= 0.6 - 0.05, "{sign:?} {s}: {slope}");
        }
    }
}
