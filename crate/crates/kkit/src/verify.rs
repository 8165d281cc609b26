//! Numerical checks shared by the acceptance suite and the command line.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bessel::{
    bessel_j_scaled, j_continued_back_scaled, j_continued_scaled, j_hankel_scaled, j_mellin_barnes, j_miller_checked, j_series_scaled,
};
use crate::{Result, C64};

#[derive(Debug, Clone, Serialize)]
pub struct CrossPoint {
    pub w: C64,
    pub t: f64,
    pub methods: Vec<String>,
    /// max over method pairs of |a - b| / max(|a|, floor)
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossReport {
    pub points: Vec<CrossPoint>,
    pub max_discrepancy: f64,
    /// grid points where only one method applies
    pub single_method: usize,
}

/// The 20 orders and 20 arguments of the cross-method grid.
pub fn cross_grid() -> (Vec<C64>, Vec<f64>) {
    let w = (0..20)
        .map(|i| {
            let f = i as f64 / 19.0;
            C64::new(-3.9 + 7.8 * f, -30.0 + 60.0 * ((7 * i) % 20) as f64 / 19.0)
        })
        .collect();
    let t = (0..20).map(|j| 10f64.powf(-1.0 + 4.0 * j as f64 / 19.0)).collect();
    (w, t)
}

/// All applicable evaluations of the scaled J_w(t), with method names.
pub fn all_methods(w: C64, t: f64) -> Vec<(&'static str, C64)> {
    let mut out = Vec::new();
    let (v, loss) = j_series_scaled(w, t);
    if loss <= 1e5 {
        out.push(("series", v));
    }
    if t <= 20.0 && w.im.abs() <= 8.0 {
        if let Ok(v) = j_mellin_barnes(w, t, 1e-13) {
            out.push(("mellin-barnes", v * (-0.5 * PI * w.im.abs()).exp()));
        }
    }
    if let Some(v) = j_miller_checked(w, t) {
        out.push(("recurrence", v));
    }
    if let Some(v) = j_hankel_scaled(w, t) {
        out.push(("large-argument", v));
    }
    if t >= 1.0 {
        out.push(("continuation", j_continued_scaled(w, t)));
        // carrying back into t < |w| amplifies the growing solution
        if t >= w.norm() {
            if let Some(v) = j_continued_back_scaled(w, t) {
                out.push(("continuation-back", v));
            }
        }
    }
    out
}

/// Relative discrepancies are taken against max(|J|, 1e-6 sqrt(2/(pi t)))
/// so that points next to a zero of J do not dominate.
pub fn bessel_cross_check(orders: &[C64], args: &[f64]) -> Result<CrossReport> {
    use rayon::prelude::*;
    let jobs: Vec<(C64, f64)> = orders.iter().flat_map(|&w| args.iter().map(move |&t| (w, t))).collect();
    let points: Vec<CrossPoint> = jobs
        .par_iter()
        .map(|&(w, t)| {
            let (auto, _) = bessel_j_scaled(w, t)?;
            let ms = all_methods(w, t);
            let floor = 1e-6 * (2.0 / (PI * t)).sqrt().min(1.0);
            let scale = auto.norm().max(floor);
            let mut disc: f64 = 0.0;
            for (i, a) in ms.iter().enumerate() {
                for b in &ms[i + 1..] {
                    disc = disc.max((a.1 - b.1).norm() / scale);
                }
            }
            Ok(CrossPoint { w, t, methods: ms.iter().map(|m| m.0.to_string()).collect(), discrepancy: disc })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_discrepancy = points.iter().map(|p| p.discrepancy).fold(0.0, f64::max);
    let single_method = points.iter().filter(|p| p.methods.len() < 2).count();
    Ok(CrossReport { points, max_discrepancy, single_method })
}

/// One acceptance criterion: pass/fail, the measured numbers, and timing.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub measured: Vec<(String, f64)>,
    pub detail: String,
    pub seconds: f64,
    /// runtime budget in seconds, if the criterion has one
    pub budget: Option<f64>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let m: Vec<String> = self.measured.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
        let budget = self.budget.map(|b| format!(" (budget {b:.0} s)")).unwrap_or_default();
        format!(
            "{} {:<4} {}: {} [{:.1} s{budget}]{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            m.join(" "),
            self.seconds,
            if self.detail.is_empty() { String::new() } else { format!(" -- {}", self.detail) }
        )
    }
}

struct Builder {
    id: &'static str,
    title: &'static str,
    budget: Option<f64>,
    start: std::time::Instant,
    measured: Vec<(String, f64)>,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Builder {
    fn new(id: &'static str, title: &'static str, budget: Option<f64>) -> Self {
        Builder {
            id,
            title,
            budget,
            start: std::time::Instant::now(),
            measured: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn measure(&mut self, key: impl Into<String>, v: f64) {
        self.measured.push((key.into(), v));
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn finish(mut self) -> CriterionResult {
        let seconds = self.start.elapsed().as_secs_f64();
        if let Some(b) = self.budget {
            self.require(seconds < b, format!("runtime {seconds:.1} s over {b} s"));
        }
        let mut detail = self.failures.clone();
        detail.extend(self.notes);
        CriterionResult {
            id: self.id.into(),
            title: self.title.into(),
            passed: self.failures.is_empty(),
            measured: self.measured,
            detail: detail.join("; "),
            seconds,
            budget: self.budget,
        }
    }

    fn error(mut self, e: crate::Error) -> CriterionResult {
        self.failures.push(format!("error: {e}"));
        self.finish()
    }
}

macro_rules! attempt {
    ($b:ident, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return $b.error(e),
        }
    };
}

/// O(c^2) double loop over residues for Q.
fn kloosterman_double_loop(r: i64, c: i64) -> f64 {
    let mut s = 0.0;
    for d in 0..c {
        for a in 0..c {
            if (a * d) % c == 1 % c {
                s += (2.0 * PI * (r * (a + d)) as f64 / c as f64).cos();
            }
        }
    }
    s
}

pub fn criterion_kloosterman() -> CriterionResult {
    use crate::kloosterman::kloosterman_sum;
    use crate::numberfield::{AlgInt, FieldContext, FieldElt};
    let mut b = Builder::new("C1", "Kloosterman sums over Q against a double loop", Some(5.0));
    let f = attempt!(b, FieldContext::new(1));
    let mut worst: f64 = 0.0;
    for r in 1..=3 {
        for c in 1..=50 {
            let s = attempt!(b, kloosterman_sum(&f, FieldElt::int(AlgInt::int(r)), AlgInt::int(c)));
            worst = worst.max((s.value() - C64::new(kloosterman_double_loop(r, c), 0.0)).norm());
        }
    }
    b.measure("max_err", worst);
    b.require(worst <= 1e-10, "module differs from the double loop");
    let one = FieldElt::int(AlgInt::ONE);
    for (c, want) in [(2, 1.0), (3, -1.0), (5, 2.0 + 2.0 * (4.0 * PI / 5.0).cos())] {
        let s = attempt!(b, kloosterman_sum(&f, one, AlgInt::int(c))).value();
        b.require((s - C64::new(want, 0.0)).norm() <= 1e-10, format!("S(1,1;{c}) = {s}"));
    }
    b.finish()
}

pub fn criterion_weil_salie() -> CriterionResult {
    use crate::kloosterman::weil_salie_ratio;
    use crate::numberfield::{EnumMode, FieldContext, FieldElt};
    let mut b = Builder::new("C2", "Weil-Salie ratio stable from |N(c)| <= 300 to 500", Some(120.0));
    let mut worst_growth: f64 = 0.0;
    for dd in [1i64, 2, 5] {
        let f = attempt!(b, FieldContext::new(dd));
        let r = if dd == 1 { FieldElt::int(crate::numberfield::AlgInt::ONE) } else { f.dual_generator() };
        for m in [1, 2] {
            let q = f.ideal_int(m);
            let mode = EnumMode::UpToUnits { group: f.full_unit_group(), shift: None };
            let cs = f.enumerate_ideal_elements(&q, 500.0, mode);
            let (mut m300, mut m500): (f64, f64) = (0.0, 0.0);
            for c in cs {
                let ratio = attempt!(b, weil_salie_ratio(&f, r, c, 0.1));
                if f.norm(c).unsigned_abs() <= 300 {
                    m300 = m300.max(ratio);
                }
                m500 = m500.max(ratio);
            }
            let growth = m500 / m300 - 1.0;
            b.measure(format!("D{dd}q{m}_max500"), m500);
            b.require(m500.is_finite(), format!("D = {dd}, q = ({m}): ratio not finite"));
            b.require(growth < 0.2, format!("D = {dd}, q = ({m}): grew by {:.1}%", 100.0 * growth));
            worst_growth = worst_growth.max(growth);
        }
    }
    b.measure("max_growth", worst_growth);
    b.finish()
}

pub fn criterion_delta() -> CriterionResult {
    use crate::numberfield::FieldContext;
    use crate::sumformula::{delta_asymptotics, Partition};
    let mut b = Builder::new("C3", "Delta-term asymptotics", Some(60.0));
    let q = attempt!(b, FieldContext::new(1));
    let f5 = attempt!(b, FieldContext::new(5));
    let p = attempt!(b, Partition::parse(1, "Q+=1"));
    let fit = attempt!(b, delta_asymptotics(&q, &p, &[], &[1e-3]));
    b.measure("Q_rel_dev", fit.rows[0].rel_dev);
    b.require(fit.rows[0].rel_dev <= 0.02, "Q, Q+: deviation above 2%");
    let p = attempt!(b, Partition::parse(2, "Q+=1,2"));
    let fit = attempt!(b, delta_asymptotics(&f5, &p, &[], &[1e-3]));
    b.measure("sqrt5_rel_dev", fit.rows[0].rel_dev);
    b.require(fit.rows[0].rel_dev <= 0.05, "Q(sqrt5), Q+Q+: deviation above 5%");
    for (f, d, ps, name) in [(&f5, 2, "Q+=1;Q-=2", "sqrt5_QpQm"), (&f5, 2, "Q-=1,2", "sqrt5_QmQm"), (&q, 1, "Q-=1", "Q_Qm")] {
        let p = attempt!(b, Partition::parse(d, ps));
        let fit = attempt!(b, delta_asymptotics(f, &p, &[], &[1e-2, 3e-3, 1e-3, 3e-4]));
        b.measure(format!("{name}_exponent"), fit.residual_slope);
        b.require(fit.residual_slope >= 0.45, format!("{name}: residual exponent below 0.45"));
    }
    b.finish()
}

pub fn criterion_dominance() -> CriterionResult {
    use crate::numberfield::{AlgInt, FieldContext, FieldElt};
    use crate::sumformula::{dominance_scan, parse_grid, Partition, SideOptions};
    let mut b = Builder::new("C4", "Kloosterman term dominated by the delta term", Some(600.0));
    let grid = attempt!(b, parse_grid("0.5:0.02:log"));
    for (dd, ps, bound, name) in [(1, "Q+=1", 2000.0, "Q_Qp"), (5, "Q+=1,2", 1600.0, "sqrt5_QpQp"), (5, "Q+=1;Q-=2", 1600.0, "sqrt5_QpQm")] {
        let f = attempt!(b, FieldContext::new(dd));
        let p = attempt!(b, Partition::parse(f.d, ps));
        let r = if dd == 1 { FieldElt::int(AlgInt::ONE) } else { f.dual_generator() };
        let o = SideOptions { bound_b: bound, ..SideOptions::default() };
        let rep = attempt!(b, dominance_scan(&f, &f.ideal_int(1), r, &p, &[], &grid, &o));
        b.measure(format!("{name}_gap"), rep.margin);
        let worst_tail = rep.rows.iter().map(|r| r.kl_tail / r.kl_value.abs()).fold(0.0, f64::max);
        b.measure(format!("{name}_tail_frac"), worst_tail);
        b.require(rep.margin >= 0.2, format!("{name}: slope gap {:.3} below 0.2", rep.margin));
        if let Some(why) = rep.inconclusive {
            b.require(false, format!("{name}: {why}"));
        }
    }
    b.finish()
}

pub fn criterion_eisenstein() -> CriterionResult {
    use crate::numberfield::{AlgInt, FieldContext, FieldElt};
    use crate::rayclass::*;
    let mut b = Builder::new("C5", "Eisenstein series: direct sum against ray class decomposition", Some(180.0));
    let one = FieldElt::int(AlgInt::ONE);
    let cusp = CuspData { gamma: AlgInt::ONE, delta: AlgInt::ZERO };
    let half = C64::new(0.5, 0.0);
    let q = attempt!(b, FieldContext::new(1));
    let g1 = attempt!(b, ray_class_group(&q, &q.ideal_int(1)));
    let p = attempt!(b, phi_series(&g1, &HeckeCharacter::TRIVIAL, one, &cusp, half, &PhiOptions { bound_b: 2000, q_terms: 100_000 }));
    let Some(d) = p.direct else { return b.error(crate::Error::Numerical("no direct sum".into())) };
    b.measure("Q_direct_gap", (d.value - p.assembled).norm());
    b.require((d.value - p.assembled).norm() <= 1e-3, "Q: direct and decomposed Phi differ");
    let ram = (p.assembled - 6.0 / (PI * PI)).norm();
    b.measure("zeta2_err", ram);
    b.require(ram <= 1e-5, "1/zeta(2) case off");
    let f5 = attempt!(b, FieldContext::new(5));
    let g5 = attempt!(b, ray_class_group(&f5, &f5.ideal_int(1)));
    let p = attempt!(
        b,
        phi_series(&g5, &HeckeCharacter::TRIVIAL, f5.dual_generator(), &cusp, half, &PhiOptions { bound_b: 500, q_terms: 100_000 })
    );
    let Some(d) = p.direct else { return b.error(crate::Error::Numerical("no direct sum".into())) };
    b.measure("sqrt5_direct_gap", (d.value - p.assembled).norm());
    b.require((d.value - p.assembled).norm() <= 1e-2, "Q(sqrt5): direct and decomposed Phi differ");
    let mut worst: f64 = 0.0;
    let cases = [(&g1, HeckeCharacter::TRIVIAL), (&g5, HeckeCharacter::TRIVIAL), (&g5, attempt!(b, HeckeCharacter::new(&g5, mu_lattice(&f5))))];
    for (g, lam) in cases {
        let t = attempt!(b, ideal_table(g, &lam, 100_000));
        for nu in [C64::new(0.5, 0.0), C64::new(0.5, 3.0), C64::new(1.0, 0.0), C64::new(1.0, -2.5)] {
            let qf = attempt!(b, q_factor(g, &t, 0, nu));
            if let Some(m) = qf.via_mobius {
                worst = worst.max((m - qf.via_l).norm());
            }
        }
    }
    b.measure("Q_dual_route_gap", worst);
    b.require(worst <= 1e-4, "Mobius and 1/L routes differ");
    b.finish()
}

pub fn criterion_ray_zeta() -> CriterionResult {
    use crate::numberfield::FieldContext;
    use crate::rayclass::*;
    let mut b = Builder::new("C6", "Ray class zeta partial sums", Some(120.0));
    let f = attempt!(b, FieldContext::new(5));
    let g = attempt!(b, ray_class_group(&f, &f.ideal_int(1)));
    let t = attempt!(b, ideal_table(&g, &HeckeCharacter::TRIVIAL, 100_000));
    let s: Vec<f64> = [1000u64, 10_000, 100_000].iter().map(|&n| t.s_lambda(0, n).re / n as f64).collect();
    let shrink = (s[1] - s[0]).abs() / (s[2] - s[1]).abs();
    b.measure("shrink_factor", shrink);
    b.require(shrink >= 2.0, "differences shrink by less than 2 per decade");
    let lam = attempt!(b, HeckeCharacter::new(&g, mu_lattice(&f)));
    let t = attempt!(b, ideal_table(&g, &lam, 20_000));
    let ns: Vec<u64> = (1..=200).map(|k| k * 100).collect();
    let worst = ns.iter().zip(t.s_lambda_curve(0, &ns)).map(|(&n, v)| v.norm() / (n as f64).sqrt()).fold(0.0, f64::max);
    b.measure("max_s_over_sqrt_n", worst);
    b.require(worst.is_finite(), "s_lambda not finite");
    b.finish()
}

pub fn criterion_l_lower() -> CriterionResult {
    use crate::numberfield::FieldContext;
    use crate::rayclass::*;
    let mut b = Builder::new("C7", "Lower bound for |zeta(1+it)| log^7(2+t)", Some(60.0));
    let q = attempt!(b, FieldContext::new(1));
    let g = attempt!(b, ray_class_group(&q, &q.ideal_int(1)));
    let z = attempt!(b, LSeries::build(&g, &HeckeCharacter::TRIVIAL, 0, MAX_TERMS));
    let rep = attempt!(b, l_lower_bound_check(&z, 0.5, 50.0, 0.25));
    b.measure("min", rep.constant);
    b.measure("min_refined", rep.refined_constant);
    b.measure("ratio", rep.ratio);
    b.require(rep.passed, "lower bound not positive or not stable");
    b.finish()
}

pub fn criterion_density() -> CriterionResult {
    use crate::density::*;
    use crate::numberfield::FieldContext;
    use crate::sumformula::Partition;
    let mut b = Builder::new("C8", "Tauberian harness against the density constants", None);
    let f = attempt!(b, FieldContext::new(5));
    let cases = [
        ("Q+=1,2", ""),
        ("Q+=1;Q-=2", ""),
        ("Q-=1;Q+=2", ""),
        ("Q-=1,2", ""),
        ("E=2;Q+=1", "2:-2.5,3"),
        ("E=2;Q-=1", "2:-2.5,3"),
        ("E=1;Q+=2", "1:-7,20"),
        ("E=1;Q-=2", "1:0.3,4"),
    ];
    let spec = MockSpec { model: MockModel::EtaGrid, resolution: 1000, x_max: 2e4, seed: 1 };
    let mut worst: f64 = 0.0;
    for (ps, hs) in cases {
        let p = attempt!(b, Partition::parse(2, ps));
        let h = attempt!(b, Hypercube::parse(hs));
        let c = attempt!(b, mainthm_constant(&f, &p, &h));
        let m = attempt!(b, generate_mock_measure(&f, &p, &h, &spec));
        let row = density_rows(&m.atoms, &p, &h, c.value, &[1e4])[0];
        b.require(row.rel_err <= 0.05, format!("{ps} {hs}: {:.2}% off", 100.0 * row.rel_err));
        worst = worst.max(row.rel_err);
    }
    b.measure("max_rel_err", worst);
    let mut corgen: f64 = 0.0;
    for (e, hs) in [(vec![], ""), (vec![1], "2:-2.5,3"), (vec![0], "1:0.3,40")] {
        let h = attempt!(b, Hypercube::parse(hs));
        let mut total = 0.0;
        for p in sign_splits(2, &e) {
            total += attempt!(b, mainthm_constant(&f, &p, &h)).value;
        }
        corgen = corgen.max((total - attempt!(b, corgen_constant(&f, &e, &h))).abs());
    }
    b.measure("corgen_err", corgen);
    b.require(corgen <= 1e-10, "sign splits do not add up to the split constant");
    let p = attempt!(b, Partition::parse(2, "E=1;Q+=2"));
    let h = attempt!(b, Hypercube::parse("1:0.21,0.25"));
    let c = attempt!(b, mainthm_constant(&f, &p, &h)).value;
    let m = attempt!(b, generate_mock_measure(&f, &p, &h, &spec));
    let cs = density_rows(&m.atoms, &p, &h, c, &[1e4])[0].scaled;
    b.measure("cseries_constant", c);
    b.measure("cseries_mock", cs);
    b.require(c == 0.0 && cs == 0.0, "complementary series cube not empty");
    let p = attempt!(b, Partition::parse(2, "E=2;Q-=1"));
    let h = attempt!(b, Hypercube::parse("2:-2.5,-1.5"));
    let c = attempt!(b, mainthm_constant(&f, &p, &h)).value;
    let ds = attempt!(b, dseries_constant(&f, 0, &[(1, -2.0)]));
    b.measure("dseries_gap", (c - ds).abs());
    b.require((c - ds).abs() <= 1e-10 && (ds - 5f64.sqrt() / (PI * PI) * 1.5).abs() <= 1e-10, "dseries constant mismatch");
    b.finish()
}

pub fn criterion_bessel() -> CriterionResult {
    use crate::bessel::{bessel_transform_plus, verify_bessel_bounds, Sign};
    use crate::bessel::bessel_jn_all;
    use crate::testfn::TestFunction;
    let mut b = Builder::new("C9", "Bessel integrity", None);
    let (w, t) = cross_grid();
    let rep = attempt!(b, bessel_cross_check(&w, &t));
    b.measure("cross_max", rep.max_discrepancy);
    b.require(rep.max_discrepancy <= 1e-8, "methods disagree on the grid");
    if rep.single_method > 0 {
        b.note(format!("{} grid points have a single method", rep.single_method));
    }
    let k = attempt!(b, TestFunction::single_half(4, 1.0));
    let mut worst: f64 = 0.0;
    for y in [1e-4f64, 0.05, 1.0, 30.0, 1e3] {
        let want = 3.0 * bessel_jn_all(3, 4.0 * PI * y.sqrt())[3];
        let got = attempt!(b, bessel_transform_plus(&k, y, 0.6, 1e-12)).value;
        worst = worst.max((got - C64::new(want, 0.0)).norm());
    }
    b.measure("discrete_err", worst);
    b.require(worst <= 1e-9, "discrete-only transform differs from 3 J_3");
    let s_grid = [0.5, 0.1, 0.02];
    let y_grid = [1e-4, 1.0, 1e3];
    for (sign, name) in [(Sign::Plus, "plus"), (Sign::Minus, "minus")] {
        let rep = attempt!(b, verify_bessel_bounds(sign, &s_grid, &y_grid, 0.6, 0.1));
        let anchor = rep.rows.iter().filter(|r| r.s == 0.5).map(|r| r.ratio).fold(0.0, f64::max);
        let worst = rep.rows.iter().map(|r| r.ratio / anchor).fold(0.0, f64::max);
        b.measure(format!("{name}_envelope_excess"), worst);
        if let Some(r) = rep.rows.iter().find(|r| r.ratio > anchor * (1.0 + 1e-12)) {
            b.require(false, format!("{name}: ratio {:.3} at (s, y) = ({}, {}) above anchor {:.3}", r.ratio, r.s, r.y, anchor));
        }
    }
    b.finish()
}

/// The stated bound u max_t |J_u(t)| <= 1 (with 5% slack) for integer u >= 2.
pub fn invariant_bessel_order_bound() -> CriterionResult {
    use crate::bessel::bessel_jn_all;
    let mut b = Builder::new("J1", "|J_u(t)| <= 1/u for u >= 2", None);
    let mut worst: f64 = 0.0;
    for u in [2usize, 3, 5, 10, 50] {
        let uf = u as f64;
        let peak = (0..=4000).map(|i| bessel_jn_all(u, uf * (0.5 + i as f64 / 2000.0))[u].abs()).fold(0.0, f64::max);
        b.measure(format!("u{u}"), uf * peak);
        worst = worst.max(uf * peak);
    }
    b.require(worst <= 1.05, format!("u max|J_u| reaches {worst:.3}"));
    b.finish()
}

pub type Runner = fn() -> CriterionResult;

/// Criteria 1-9 and the extra invariant, in order.
pub fn runners(quick: bool) -> Vec<(&'static str, Runner)> {
    let mut v: Vec<(&'static str, Runner)> = vec![
        ("C1", criterion_kloosterman),
        ("C2", criterion_weil_salie),
        ("C3", criterion_delta),
        ("C4", criterion_dominance),
        ("C5", criterion_eisenstein),
        ("C6", criterion_ray_zeta),
        ("C7", criterion_l_lower),
        ("C8", criterion_density),
        ("C9", criterion_bessel),
        ("J1", invariant_bessel_order_bound),
    ];
    if quick {
        v.retain(|(id, _)| *id != "C4");
    }
    v
}

/// Results with the timing zeroed, for byte comparison across runs.
fn fingerprint(rs: &[CriterionResult]) -> Vec<(String, bool, Vec<(String, u64)>)> {
    rs.iter().map(|r| (r.id.clone(), r.passed || r.detail.contains("runtime"), r.measured.iter().map(|(k, v)| (k.clone(), v.to_bits())).collect())).collect()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Runs every criterion, then criterion 10: total time, and a rerun of the
/// cheaper criteria on one thread and on four threads compared bit for bit.
pub fn verify_all(quick: bool, mut progress: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let start = std::time::Instant::now();
    let mut out = Vec::new();
    for (_, run) in runners(quick) {
        let r = run();
        progress(&r);
        out.push(r);
    }
    let mut b = Builder::new("C10", "Whole suite runtime and determinism", None);
    let cheap: Vec<Runner> = vec![criterion_kloosterman, criterion_delta, criterion_ray_zeta, criterion_density, criterion_bessel];
    let ids = ["C1", "C3", "C6", "C8", "C9"];
    let base: Vec<CriterionResult> = out.iter().filter(|r| ids.contains(&r.id.as_str())).cloned().collect();
    let one = in_pool(1, || cheap.iter().map(|f| f()).collect::<Vec<_>>());
    let four = in_pool(4, || cheap.iter().map(|f| f()).collect::<Vec<_>>());
    let same_runs = fingerprint(&base) == fingerprint(&one);
    let same_threads = fingerprint(&one) == fingerprint(&four);
    let total = start.elapsed().as_secs_f64();
    b.measure("suite_seconds", total);
    b.require(total < 1200.0, format!("suite took {total:.0} s"));
    b.require(same_runs, "reruns differ");
    b.require(same_threads, "results depend on the thread count");
    if quick {
        b.note("quick mode skips C4");
    }
    let r = b.finish();
    progress(&r);
    out.push(r);
    out
}
