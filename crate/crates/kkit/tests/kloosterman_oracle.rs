use std::f64::consts::PI;

use kkit::kloosterman::*;
use kkit::numberfield::*;
use proptest::prelude::*;

/// Double loop over residues with float traces; shares nothing with the
/// library's exact phase code.
fn oracle(f: &FieldContext, r: FieldElt, c: AlgInt) -> (f64, f64) {
    let rr = ResidueRing::new(f.principal(c).unwrap(), f);
    let reps: Vec<AlgInt> = rr.reps().collect();
    let one = rr.reduce(AlgInt::ONE);
    let re = f.embed_elt(r);
    let ce = f.embed2(c);
    let (mut sr, mut si) = (0.0, 0.0);
    for &d in &reps {
        for &a in &reps {
            if rr.reduce(f.mul(a, d)) != one {
                continue;
            }
            let de = f.embed2(d);
            let ae = f.embed2(a);
            let tr: f64 = (0..f.d).map(|j| re[j] * (de[j] + ae[j]) / ce[j]).sum();
            sr += (2.0 * PI * tr).cos();
            si += (2.0 * PI * tr).sin();
        }
    }
    (sr, si)
}

#[test]
fn rational_against_double_loop() {
    let f = FieldContext::new(1).unwrap();
    for r in 1..=3 {
        let rf = FieldElt::int(AlgInt::int(r));
        for c in 1..=50 {
            let s = kloosterman_sum(&f, rf, AlgInt::int(c)).unwrap();
            let (o, _) = oracle(&f, rf, AlgInt::int(c));
            assert!((s.re - o).abs() < 1e-10, "r={r} c={c}: {} vs {o}", s.re);
            assert!(s.im.abs() < 1e-9 * s.terms as f64);
        }
    }
}

#[test]
fn quadratic_against_double_loop() {
    for dd in [2i64, 5] {
        let f = FieldContext::new(dd).unwrap();
        let r = f.dual_generator();
        for c in [
            AlgInt::int(2),
            AlgInt::int(3),
            AlgInt::new(4, 1),
            AlgInt::new(1, 2),
            AlgInt::new(-3, 5),
            AlgInt::int(7),
        ] {
            let s = kloosterman_sum(&f, r, c).unwrap();
            let (o, oi) = oracle(&f, r, c);
            assert!((s.re - o).abs() < 1e-9 && (s.im - oi).abs() < 1e-9, "D={dd} c={c}");
            assert!(s.im.abs() < 1e-9 * s.terms as f64);
        }
    }
}

#[test]
fn unit_multiples_change_the_sum() {
    // S(r,r; eps c) = S(r eps^-1, r eps^-1; c), and in general differs from S(r,r;c)
    let f = FieldContext::new(5).unwrap();
    let r = f.dual_generator();
    let c = AlgInt::int(2);
    let vals: Vec<f64> = (0..6)
        .map(|k| kloosterman_sum(&f, r, f.mul(f.unit_pow(k), c)).unwrap().re)
        .collect();
    let want = [3.0, -1.0, -1.0, 3.0, -1.0, -1.0];
    for (v, w) in vals.iter().zip(want) {
        assert!((v - w).abs() < 1e-9, "{vals:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sign_and_unit_identities(a in -12i64..12, b in -12i64..12, k in -3i64..4,
                                dd in prop::sample::select(vec![2i64, 5])) {
        let f = FieldContext::new(dd).unwrap();
        let c = AlgInt::new(a, b);
        prop_assume!(!c.is_zero() && f.norm(c).abs() <= 200);
        let r = f.dual_generator();
        let s = kloosterman_sum(&f, r, c).unwrap();
        let sm = kloosterman_sum(&f, r, f.neg(c)).unwrap();
        prop_assert!((s.re - sm.re).abs() < 1e-9);
        prop_assert!(s.im.abs() < 1e-9 * s.terms as f64);
        // eps c versus r eps^-1
        let e = f.unit_pow(k);
        let einv = f.unit_pow(-k);
        let lhs = kloosterman_sum(&f, r, f.mul(e, c)).unwrap();
        let r2 = f.elt_mul_int(r, einv);
        let rhs = kloosterman_sum(&f, r2, c).unwrap();
        prop_assert!((lhs.re - rhs.re).abs() < 1e-9);
        // eps^2 = 1 mod c leaves the sum unchanged
        let rr = ResidueRing::new(f.principal(c).unwrap(), &f);
        if rr.reduce(f.mul(e, e)) == rr.reduce(AlgInt::ONE) {
            prop_assert!((lhs.re - s.re).abs() < 1e-9);
        }
    }
}
