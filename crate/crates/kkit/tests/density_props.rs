use std::f64::consts::PI;

use kkit::density::*;
use kkit::numberfield::FieldContext;
use kkit::sumformula::Partition;
use kkit::C64;
use proptest::prelude::*;

fn field(dd: i64) -> FieldContext {
    FieldContext::new(dd).unwrap()
}

fn part(d: usize, s: &str) -> Partition {
    Partition::parse(d, s).unwrap()
}

fn atom(lambda: Vec<f64>, weight: f64) -> Atom {
    Atom { lambda, weight }
}

fn grid_spec(resolution: usize, x_max: f64) -> MockSpec {
    MockSpec { model: MockModel::EtaGrid, resolution, x_max, seed: 7 }
}

#[test]
fn zeta_transform_examples() {
    let p = part(1, "Q+=1");
    let z = zeta_transform(&[atom(vec![1.0], 1.0)], &p, &[], 0.3).unwrap();
    assert!((z - C64::new((-0.3f64).exp(), 0.0)).norm() < 1e-15);
    let ladder: Vec<Atom> = (1..=10_000).map(|k| atom(vec![k as f64], 1.0)).collect();
    let z = zeta_transform(&ladder, &p, &[], 0.01).unwrap();
    assert!((0.01 * z.re - 1.0).abs() < 0.01);
    let zero = zeta_transform(&[atom(vec![2.0], 0.0)], &p, &[], 0.5).unwrap();
    assert_eq!(zero, C64::new(0.0, 0.0));
    // Q- excludes lambda >= 0
    assert_eq!(zeta_transform(&ladder, &part(1, "Q-=1"), &[], 0.5).unwrap(), C64::new(0.0, 0.0));
    assert!(zeta_transform(&ladder, &p, &[], 0.0).is_err());
}

#[test]
fn counting_examples() {
    let p = part(1, "Q+=1");
    let ladder: Vec<Atom> = (1..=1000).map(|k| atom(vec![k as f64], 1.0)).collect();
    assert_eq!(counting_mu(&ladder, &p, &[], 0.5), C64::new(0.0, 0.0));
    for x in [1.0, 7.5, 99.99, 500.0] {
        assert_eq!(counting_mu(&ladder, &p, &[], x).re, x.floor());
        assert_eq!(Counting::new(&ladder, &p, &[]).at(x).re, x.floor());
    }
}

#[test]
fn tauberian_on_the_integer_ladder() {
    let p = part(1, "Q+=1");
    let ladder: Vec<Atom> = (1..=200_000).map(|k| atom(vec![k as f64], 1.0)).collect();
    let r = tauberian_check(&ladder, &p, &[], &[5e-4, 1e-3], &[5e4, 1e5]).unwrap();
    assert!((r.l1.re - 1.0).abs() < 1e-3 && (r.l2.re - 1.0).abs() < 1e-3, "{r:?}");
    assert!(r.passed);
    let zero: Vec<Atom> = ladder.iter().map(|a| atom(a.lambda.clone(), 0.0)).collect();
    let r = tauberian_check(&zero, &p, &[], &[5e-4, 1e-3], &[5e4, 1e5]).unwrap();
    assert_eq!((r.l1, r.l2), (C64::new(0.0, 0.0), C64::new(0.0, 0.0)));
    assert!(r.passed);
    assert!(tauberian_check(&ladder, &p, &[], &[1e-3, 5e-4], &[5e4, 1e5]).is_err());
}

#[test]
fn tauberian_on_a_sparse_ladder_is_inconclusive() {
    // atoms at 2^k: mu(X) ~ log X, no power law
    let p = part(1, "Q+=1");
    let atoms: Vec<Atom> = (0..40).map(|k| atom(vec![2f64.powi(k)], 1.0)).collect();
    let r = tauberian_check(&atoms, &p, &[], &[1e-3, 2e-3], &[1e3, 1e4]).unwrap();
    assert!(r.inconclusive && !r.passed);
}

#[test]
fn closed_forms() {
    let q = field(1);
    let f = field(5);
    for s in ["Q+=1", "Q-=1"] {
        let c = mainthm_constant(&q, &part(1, s), &Hypercube::EMPTY).unwrap();
        assert!((c.value - 1.0 / PI).abs() < 1e-15);
    }
    assert_eq!(weyl_constant(&q), 1.0 / PI);
    assert!((weyl_constant(&f) - 2.0 * 5f64.sqrt() / (2.0 * 4.0 * PI * PI)).abs() < 1e-15);
    assert!((weyl_constant(&f) - 0.056640).abs() < 1e-6);
    let h = Hypercube::parse("2:-2.5,-1.5").unwrap();
    let c = mainthm_constant(&f, &part(2, "E=2;Q-=1"), &h).unwrap();
    assert_eq!(c.factors, vec![3.0]);
    assert!((c.value - 0.3398).abs() < 1e-4);
    let ds = dseries_constant(&f, 0, &[(1, -2.0)]).unwrap();
    assert!((ds - 5f64.sqrt() / (PI * PI) * 1.5).abs() < 1e-15);
    assert!((c.value - ds).abs() < 1e-10);
    assert!(dseries_constant(&f, 0, &[(1, -3.0)]).is_err());
}

#[test]
fn complementary_series_cube_is_empty() {
    let f = field(5);
    for (ps, hs) in [("E=1;Q+=2", "1:0.21,0.25"), ("E=2;Q-=1", "2:0.01,0.25")] {
        let p = part(2, ps);
        let h = Hypercube::parse(hs).unwrap();
        assert_eq!(mainthm_constant(&f, &p, &h).unwrap().value, 0.0);
        let m = generate_mock_measure(&f, &p, &h, &grid_spec(200, 2e4)).unwrap();
        let rows = density_rows(&m.atoms, &p, &h, 0.0, &[1e4]);
        assert_eq!(rows[0].scaled, 0.0);
    }
}

#[test]
fn endpoints_on_the_discrete_set_are_rejected() {
    let f = field(5);
    let p = part(2, "E=2;Q+=1");
    for hs in ["2:-2,1", "2:-7,0", "2:-12,-3"] {
        let e = mainthm_constant(&f, &p, &Hypercube::parse(hs).unwrap()).unwrap_err();
        assert!(e.to_string().contains("b = "), "{e}");
    }
    assert!(mainthm_constant(&f, &part(2, "E=1,2"), &Hypercube::parse("1:1,2;2:1,2").unwrap()).is_err());
    assert!(mainthm_constant(&f, &p, &Hypercube::EMPTY).is_err());
}

#[test]
fn pseries_tanh_gap() {
    let f = field(5);
    let c = pseries_constant(&f, 0, &[(1, 10.0, 11.0)]).unwrap();
    assert!((c.approx - c.exact) / c.exact < 4e-9);
    assert!(c.exact < c.approx);
    assert!((c.approx - 5f64.sqrt() / (2.0 * PI * PI)).abs() < 1e-15);
    assert!(pseries_constant(&f, 0, &[(1, 0.2, 1.0)]).is_err());
    // same number through the main constant with E = {2}, Q+ = {1}
    let m = mainthm_constant(&f, &part(2, "E=2;Q+=1"), &Hypercube::parse("2:10,11").unwrap()).unwrap();
    assert!((m.value - c.exact).abs() < 1e-14);
}

#[test]
fn mock_measures_are_seeded() {
    let f = field(5);
    let p = part(2, "E=1;Q+=2");
    let h = Hypercube::parse("1:0.1,5").unwrap();
    for model in [MockModel::EtaGrid, MockModel::Uniform, MockModel::Adversarial] {
        let spec = MockSpec { model, resolution: 50, x_max: 1e3, seed: 11 };
        let a = generate_mock_measure(&f, &p, &h, &spec).unwrap();
        assert_eq!(a, generate_mock_measure(&f, &p, &h, &spec).unwrap());
        assert!(a.atoms.iter().all(|x| x.weight >= 0.0));
        if model != MockModel::EtaGrid {
            let b = generate_mock_measure(&f, &p, &h, &MockSpec { seed: 12, ..spec }).unwrap();
            assert_ne!(a, b);
        }
    }
    let spec = MockSpec { model: MockModel::EtaGrid, resolution: 9, x_max: 1e3, seed: 0 };
    assert!(generate_mock_measure(&f, &p, &h, &spec).is_err());
}

#[test]
fn eta_grid_cells_in_one_dimension() {
    // cell weights are (1/pi) times the tanh integral over the cell, i.e.
    // 2 sqrt|D| / pi^d times the d-eta mass
    let q = field(1);
    let p = part(1, "Q+=1");
    let m = generate_mock_measure(&q, &p, &Hypercube::EMPTY, &grid_spec(100, 100.0)).unwrap();
    assert_eq!(m.atoms[0], atom(vec![0.0], 1.0 / PI));
    let c = &m.atoms[1];
    assert!((c.lambda[0] - 0.75).abs() < 1e-12);
    assert!((c.weight - tanh_integral(0.25, 1.25) / PI).abs() < 1e-15);
}

#[test]
fn adversarial_mass_has_zero_density() {
    let f = field(5);
    let p = part(2, "E=1;Q+=2");
    let h = Hypercube::parse("1:0.1,0.25").unwrap();
    let spec = MockSpec { model: MockModel::Adversarial, resolution: 100, x_max: 1e4, seed: 3 };
    let m = generate_mock_measure(&f, &p, &h, &spec).unwrap();
    assert_eq!(exceptional_filter(&m.atoms).len(), m.atoms.len());
    assert!(exceptional_filter(&m.atoms).iter().any(|e| !e.violating.is_empty()));
    let target = mainthm_constant(&f, &p, &h).unwrap().value;
    assert_eq!(target, 0.0);
    let rows = density_rows(&m.atoms, &p, &h, target, &[1e2, 1e3, 1e4]);
    assert!(rows[2].rel_err < 0.05 && rows[2].rel_err < rows[0].rel_err, "{rows:?}");
}

#[test]
fn uniform_model_misses_the_constant() {
    let f = field(5);
    let p = part(2, "Q+=1,2");
    let spec = MockSpec { model: MockModel::Uniform, resolution: 1000, x_max: 2e4, seed: 5 };
    let m = generate_mock_measure(&f, &p, &Hypercube::EMPTY, &spec).unwrap();
    let target = mainthm_constant(&f, &p, &Hypercube::EMPTY).unwrap().value;
    let rows = density_rows(&m.atoms, &p, &Hypercube::EMPTY, target, &[1e4]);
    assert!(rows[0].rel_err > 0.5, "{rows:?}");
}

#[test]
fn eta_grid_reaches_the_main_constant_in_every_sign_pattern() {
    let cases: [(i64, usize, &str, &str); 12] = [
        (1, 1, "Q+=1", ""),
        (1, 1, "Q-=1", ""),
        (5, 2, "Q+=1,2", ""),
        (5, 2, "Q+=1;Q-=2", ""),
        (5, 2, "Q-=1;Q+=2", ""),
        (5, 2, "Q-=1,2", ""),
        (5, 2, "E=2;Q+=1", "2:-2.5,3"),
        (5, 2, "E=2;Q-=1", "2:-2.5,3"),
        (5, 2, "E=1;Q+=2", "1:-7,20"),
        (5, 2, "E=1;Q-=2", "1:0.3,4"),
        (2, 2, "Q+=1;Q-=2", ""),
        (2, 2, "E=1;Q-=2", "1:1,2"),
    ];
    for (dd, d, ps, hs) in cases {
        let f = field(dd);
        let p = part(d, ps);
        let h = Hypercube::parse(hs).unwrap();
        let c = mainthm_constant(&f, &p, &h).unwrap();
        let m = generate_mock_measure(&f, &p, &h, &grid_spec(1000, 2e4)).unwrap();
        let g = indicator_factors(&h);
        let t = tauberian_check(&m.atoms, &p, &g, &[2e-3, 4e-3], &[5e3, 1e4]).unwrap();
        assert!(t.passed, "{ps} {hs}: {t:?}");
        assert!((t.l1.re - c.value * c.factorial).abs() / (c.value * c.factorial) < 0.05, "{ps} {hs}");
        let rows = density_rows(&m.atoms, &p, &h, c.value, &[1e4]);
        assert!(rows[0].rel_err < 0.05, "{ps} {hs}: {rows:?}");
        // Laplace-Stieltjes identity between the two routes
        let counting = Counting::new(&m.atoms, &p, &g);
        for s in [1e-3, 1e-2, 0.1] {
            let z = zeta_transform(&m.atoms, &p, &g, s).unwrap();
            assert!((z - counting.laplace(s)).norm() <= 1e-10 * z.norm(), "{ps} s = {s}");
        }
    }
}

#[test]
fn corgen_sums_sign_splits() {
    let f = field(5);
    for (e, hs) in [(vec![], ""), (vec![1], "2:-2.5,3"), (vec![0], "1:0.3,40")] {
        let h = Hypercube::parse(hs).unwrap();
        let total: f64 = sign_splits(2, &e).iter().map(|p| mainthm_constant(&f, p, &h).unwrap().value).sum();
        assert!((total - corgen_constant(&f, &e, &h).unwrap()).abs() < 1e-10);
    }
}

fn off_discrete(y: f64) -> bool {
    discrete_index(y).is_none()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn additivity(a in -40.0f64..40.0, w1 in 0.01f64..30.0, w2 in 0.01f64..30.0) {
        let (b, c) = (a + w1, a + w1 + w2);
        prop_assume!(off_discrete(a) && off_discrete(b) && off_discrete(c));
        let f = field(5);
        let p = part(2, "E=2;Q+=1");
        let k = |lo: f64, hi: f64| {
            mainthm_constant(&f, &p, &Hypercube { sides: vec![(1, lo, hi)] }).unwrap().value
        };
        prop_assert!((k(a, c) - k(a, b) - k(b, c)).abs() < 1e-10);
    }

    #[test]
    fn corgen_identity(a in -30.0f64..10.0, w in 0.01f64..50.0, dd in prop::sample::select(vec![2i64, 3, 5, 13])) {
        prop_assume!(off_discrete(a) && off_discrete(a + w));
        let f = field(dd);
        let h = Hypercube { sides: vec![(0, a, a + w)] };
        let total: f64 = sign_splits(2, &[0]).iter().map(|p| mainthm_constant(&f, p, &h).unwrap().value).sum();
        prop_assert!((total - corgen_constant(&f, &[0], &h).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn laplace_identity_on_random_atoms(
        pts in prop::collection::vec((-50.0f64..50.0, 0.0f64..3.0), 1..200),
        s in 0.01f64..2.0,
    ) {
        let atoms: Vec<Atom> = pts.iter().map(|&(y, w)| atom(vec![y.round() / 2.0], w)).collect();
        for ps in ["Q+=1", "Q-=1"] {
            let p = part(1, ps);
            let z = zeta_transform(&atoms, &p, &[], s).unwrap();
            let l = Counting::new(&atoms, &p, &[]).laplace(s);
            prop_assert!((z - l).norm() <= 1e-10 * z.norm().max(1e-300));
        }
    }
}
