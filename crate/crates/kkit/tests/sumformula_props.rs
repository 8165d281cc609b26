use std::f64::consts::PI;

use kkit::numberfield::{AlgInt, FieldContext, FieldElt};
use kkit::sumformula::*;
use kkit::testfn::{special_plus, TestFunction};

fn q_field() -> FieldContext {
    FieldContext::new(1).unwrap()
}

#[test]
fn delta_limit_over_q() {
    let f = q_field();
    let p = Partition::parse(1, "Q+=1").unwrap();
    let fit = delta_asymptotics(&f, &p, &[], &[1e-1, 1e-2, 1e-3]).unwrap();
    assert!((fit.constant - 1.0 / PI).abs() < 1e-15);
    let last = fit.rows.last().unwrap();
    assert!(last.rel_dev < 0.01, "{last:?}");
    assert!(fit.residual_slope >= 0.9, "{}", fit.residual_slope);
}

#[test]
fn delta_limit_over_sqrt5() {
    let f = FieldContext::new(5).unwrap();
    let p = Partition::parse(2, "Q+=1,2").unwrap();
    let fit = delta_asymptotics(&f, &p, &[], &[1e-2, 1e-3]).unwrap();
    assert!((fit.constant - 0.11328).abs() < 1e-5);
    assert!(fit.rows[1].rel_dev <= 0.05, "{:?}", fit.rows[1]);
}

#[test]
fn minus_place_residual_is_square_root() {
    let f = FieldContext::new(5).unwrap();
    let p = Partition::parse(2, "Q+=1;Q-=2").unwrap();
    let fit = delta_asymptotics(&f, &p, &[], &[1e-2, 3e-3, 1e-3, 3e-4]).unwrap();
    assert!(fit.residual_slope >= 0.45, "{}", fit.residual_slope);
    // s Eta_+ = 1/2 + s/3 + ..., s Eta_- = 1/2 - s/3 + ...: the linear terms cancel
    assert!((fit.residual_slope - 2.0).abs() < 0.05, "{}", fit.residual_slope);
    let q = q_field();
    let m = Partition::parse(1, "Q-=1").unwrap();
    let fit = delta_asymptotics(&q, &m, &[], &[1e-2, 1e-3, 1e-4]).unwrap();
    assert!((fit.residual_slope - 1.0).abs() < 0.05, "{}", fit.residual_slope);
    let dev = fit.rows[1].rel_dev * fit.constant;
    assert!((dev - 2.0 / PI * 3.333e-4).abs() < 1e-6, "{dev}");
}

#[test]
fn e_places_scale_by_eta() {
    // |E| = 1 over Q(sqrt5): Delta s = 2^2/(2 pi)^2 sqrt5 Eta(k_E) + o(1)
    let f = FieldContext::new(5).unwrap();
    let p = Partition::parse(2, "E=2;Q+=1").unwrap();
    let ke = special_plus(0.7).unwrap();
    let fit = delta_asymptotics(&f, &p, &[ke.clone()], &[1e-3]).unwrap();
    let eta_e = kkit::testfn::eta(&ke, 1e-12).unwrap().total.re;
    assert!((fit.constant - 4.0 / (4.0 * PI * PI) * 5f64.sqrt() * eta_e).abs() < 1e-12);
    assert!(fit.rows[0].rel_dev < 0.01);
}

#[test]
fn kloosterman_side_over_q() {
    let f = q_field();
    let p = Partition::parse(1, "Q+=1").unwrap();
    let q = f.ideal_int(1);
    let r = FieldElt::int(AlgInt::ONE);
    let o = SideOptions::default();
    let anchor = kloosterman_side(&f, &q, r, &p, &[], 0.5, &o).unwrap();
    let c = (anchor.value.abs() + anchor.tail) / anchor.bound_shape;
    let at = kloosterman_side(&f, &q, r, &p, &[], 0.1, &o).unwrap();
    assert!(at.value.is_finite() && at.tail >= 0.0);
    assert!(at.value.abs() <= c * at.bound_shape, "{} {}", at.value, c * at.bound_shape);
    let half = kloosterman_side(&f, &q, r, &p, &[], 0.05, &o).unwrap();
    assert!((half.bound_shape / at.bound_shape - 2f64.powf(0.85)).abs() < 1e-12);
}

#[test]
fn kloosterman_side_matches_direct_weights() {
    // table route against a direct sum with freshly evaluated transforms
    let f = q_field();
    let p = Partition::parse(1, "Q+=1").unwrap();
    let q = f.ideal_int(1);
    let r = FieldElt::int(AlgInt::ONE);
    let o = SideOptions { bound_b: 60.0, ..SideOptions::default() };
    let s = 0.2;
    let rep = kloosterman_side(&f, &q, r, &p, &[], s, &o).unwrap();
    let k = special_plus(s).unwrap();
    let mut direct = 0.0;
    for c in 1..=60i64 {
        let mut sum = 0.0;
        for d in 1..=c {
            if num_integer::Integer::gcd(&d, &c) == 1 {
                let a = (1..=c).find(|a| (a * d) % c == 1 % c).unwrap();
                sum += (2.0 * PI * (-(a + d)) as f64 / c as f64).cos();
            }
        }
        let y = 1.0 / (c * c) as f64;
        let b = kkit::bessel::bessel_transform_plus(&k, y, 0.6, 1e-11).unwrap().value.re;
        direct += 2.0 * sum * b / c as f64;
    }
    assert!((rep.value - direct).abs() < 1e-5, "{} {direct}", rep.value);
}

#[test]
fn dominance_over_q() {
    let f = q_field();
    let p = Partition::parse(1, "Q+=1").unwrap();
    let grid = parse_grid("0.5:0.02:log").unwrap();
    let rep = dominance_scan(&f, &f.ideal_int(1), FieldElt::int(AlgInt::ONE), &p, &[], &grid, &SideOptions::default()).unwrap();
    assert!((rep.p_delta + 1.0).abs() < 0.15, "{}", rep.p_delta);
    assert!(rep.p_k >= -0.85, "{}", rep.p_k);
    assert!(rep.inconclusive.is_none(), "{:?}", rep.inconclusive);
    assert!(rep.passed && rep.bound_held);
}

#[test]
fn reports_are_reproducible() {
    let f = q_field();
    let p = Partition::parse(1, "Q+=1").unwrap();
    let o = SideOptions { bound_b: 300.0, ..SideOptions::default() };
    let grid = [0.5, 0.3, 0.2, 0.1];
    let run = || {
        let rep = dominance_scan(&f, &f.ideal_int(1), FieldElt::int(AlgInt::ONE), &p, &[], &grid, &o).unwrap();
        serde_json::to_string(&rep).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn preconditions() {
    let f = q_field();
    let one = FieldElt::int(AlgInt::ONE);
    let p = Partition::parse(1, "Q+=1").unwrap();
    let o = SideOptions::default();
    let q = f.ideal_int(1);
    assert!(dominance_scan(&f, &q, one, &p, &[], &[0.5, 0.2, 0.1], &o).is_err());
    assert!(dominance_scan(&f, &q, one, &p, &[], &[0.9, 0.5, 0.2, 0.1], &o).is_err());
    let e = Partition::parse(1, "E=1").unwrap();
    assert!(dominance_scan(&f, &q, one, &e, &[TestFunction::zero()], &[0.5, 0.3, 0.2, 0.1], &o).is_err());
    let bad = SideOptions { alpha: 0.5, ..o };
    assert!(kloosterman_side(&f, &q, one, &p, &[], 0.1, &bad).is_err());
    let bad = SideOptions { eps: 0.5, ..o };
    assert!(kloosterman_side(&f, &q, one, &p, &[], 0.1, &bad).is_err());
}
