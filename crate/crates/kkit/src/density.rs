//! Mock spectral measures, their zeta transforms and counting functions, and
//! the closed-form density constants they are compared with.

use std::f64::consts::PI;

use rand::rngs::Xoshiro256PlusPlus;
use rand::{RngExt, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::numberfield::FieldContext;
use crate::quad::integrate_real;
use crate::sumformula::{Partition, Place};
use crate::{Error, Result, C64};

/// Lower bound for exceptional eigenvalue coordinates used as input data.
pub const EXCEPTIONAL_BOUND: f64 = 0.21;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub lambda: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MockModel {
    EtaGrid,
    Uniform,
    Adversarial,
}

impl std::str::FromStr for MockModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dgrid" | "eta-grid" => Ok(MockModel::EtaGrid),
            "uniform" => Ok(MockModel::Uniform),
            "adversarial" => Ok(MockModel::Adversarial),
            _ => Err(Error::Invalid(format!("unknown model '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralAtomList {
    pub d: usize,
    pub model: MockModel,
    pub seed: u64,
    pub atoms: Vec<Atom>,
}

/// Intervals [a_j, b_j] at the places of E (0-based place, a, b).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypercube {
    pub sides: Vec<(usize, f64, f64)>,
}

impl Hypercube {
    pub const EMPTY: Hypercube = Hypercube { sides: Vec::new() };

    /// "j:a,b;..." with 1-based places.
    pub fn parse(s: &str) -> Result<Self> {
        let mut sides = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || Error::Invalid(format!("bad hypercube side '{part}'"));
            let (j, ab) = part.split_once(':').ok_or_else(bad)?;
            let (a, b) = ab.split_once(',').ok_or_else(bad)?;
            let j: usize = j.trim().parse().map_err(|_| bad())?;
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if j == 0 || !(a <= b) {
                return Err(bad());
            }
            sides.push((j - 1, a, b));
        }
        Ok(Hypercube { sides })
    }

    pub fn side(&self, j: usize) -> Option<(f64, f64)> {
        self.sides.iter().find(|s| s.0 == j).map(|s| (s.1, s.2))
    }

    fn check(&self, p: &Partition) -> Result<()> {
        if self.sides.len() != p.e.len() || p.e.iter().any(|&j| self.side(j).is_none()) {
            return Err(Error::Invalid(format!("hypercube must give exactly one interval per place of E = {:?}", p.e)));
        }
        Ok(())
    }
}

pub fn lambda_q_norm(lambda: &[f64], q: &[usize]) -> f64 {
    q.iter().map(|&j| lambda[j].abs()).sum()
}

/// The point b/2 (1 - b/2) of the discrete set for even b >= 2.
pub fn discrete_point(b: u64) -> f64 {
    let h = (b / 2) as f64;
    h * (1.0 - h)
}

/// Even b >= 2 with b/2 (1 - b/2) = y, if any.
pub fn discrete_index(y: f64) -> Option<u64> {
    if y > 0.0 {
        return None;
    }
    let k = (0.5 + (0.25 - y).sqrt()).round();
    (discrete_point(2 * k as u64) == y).then_some(2 * k as u64)
}

/// Even b >= 2 whose discrete point lies strictly inside (a, b).
fn discrete_inside(a: f64, b: f64) -> impl Iterator<Item = u64> {
    (1u64..)
        .map(|k| 2 * k)
        .take_while(move |&bb| discrete_point(bb) > a)
        .filter(move |&bb| discrete_point(bb) < b)
}

/// int_0^U 4u / (e^{2 pi u} + 1) du; the integrand is below 1e-40 past u = 15.
fn tanh_defect(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let f = |x: f64| 4.0 * x / ((2.0 * PI * x).exp() + 1.0);
    let top = u.min(15.0);
    let pts: Vec<f64> = (0..=(top / 0.5).ceil() as usize).map(|i| (0.5 * i as f64).min(top)).collect();
    pts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| integrate_real(f, w[0], w[1], 1e-17, 1e-15).map(|r| r.0).unwrap_or(f64::NAN))
        .sum()
}

/// int_{1/4}^y tanh(pi sqrt(t - 1/4)) dt
fn tanh_antiderivative(y: f64) -> f64 {
    if y <= 0.25 {
        return 0.0;
    }
    let x = y - 0.25;
    x - tanh_defect(x.sqrt())
}

/// int over [a, b] cap [1/4, oo) of tanh(pi sqrt(y - 1/4)) dy
pub fn tanh_integral(a: f64, b: f64) -> f64 {
    tanh_antiderivative(b) - tanh_antiderivative(a)
}

/// Twice the d-eta volume of [a, b]: the tanh integral plus (b - 1) per
/// discrete point strictly inside.
pub fn place_factor(a: f64, b: f64) -> Result<f64> {
    for y in [a, b] {
        if let Some(bb) = discrete_index(y) {
            return Err(Error::Invalid(format!("endpoint {y} is the discrete point of b = {bb}")));
        }
    }
    Ok(tanh_integral(a, b) + discrete_inside(a, b).map(|bb| (bb - 1) as f64).sum::<f64>())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityConstants {
    pub d: usize,
    pub disc: i64,
    pub partition: String,
    pub hypercube: Hypercube,
    /// per place of E, in the order of the hypercube
    pub factors: Vec<f64>,
    /// (d - |E|)!
    pub factorial: f64,
    pub value: f64,
    pub weyl: f64,
}

pub fn weyl_constant(f: &FieldContext) -> f64 {
    2.0 * (f.disc as f64).sqrt() / (factorial(f.d) * (2.0 * PI).powi(f.d as i32))
}

pub fn mainthm_constant(f: &FieldContext, p: &Partition, h: &Hypercube) -> Result<DensityConstants> {
    if p.d != f.d {
        return Err(Error::Invalid(format!("partition has {} places, field has {}", p.d, f.d)));
    }
    if p.q_len() == 0 {
        return Err(Error::Invalid("E must be a proper subset of the places".into()));
    }
    h.check(p)?;
    let factors = h.sides.iter().map(|&(_, a, b)| place_factor(a, b)).collect::<Result<Vec<_>>>()?;
    let fact = factorial(p.q_len());
    let value = 2.0 * (f.disc as f64).sqrt() / (fact * (2.0 * PI).powi(f.d as i32)) * factors.iter().product::<f64>();
    Ok(DensityConstants {
        d: f.d,
        disc: f.disc,
        partition: p.to_string(),
        hypercube: h.clone(),
        factors,
        factorial: fact,
        value,
        weyl: weyl_constant(f),
    })
}

/// The limit with no sign condition on Q = complement of E.
pub fn corgen_constant(f: &FieldContext, e: &[usize], h: &Hypercube) -> Result<f64> {
    let q = f.d.checked_sub(e.len()).filter(|&q| q > 0).ok_or_else(|| Error::Invalid("E must be a proper subset".into()))?;
    let mut prod = 1.0;
    for &j in e {
        let (a, b) = h.side(j).ok_or_else(|| Error::Invalid(format!("no interval at place {}", j + 1)))?;
        prod *= place_factor(a, b)?;
    }
    Ok(2.0 * (f.disc as f64).sqrt() / (factorial(q) * PI.powi(f.d as i32) * 2f64.powi(e.len() as i32)) * prod)
}

/// Every split of the complement of E into Q+ and Q-.
pub fn sign_splits(d: usize, e: &[usize]) -> Vec<Partition> {
    let q: Vec<usize> = (0..d).filter(|j| !e.contains(j)).collect();
    (0..1usize << q.len())
        .map(|mask| {
            let (mut qp, mut qm) = (Vec::new(), Vec::new());
            for (i, &j) in q.iter().enumerate() {
                if mask >> i & 1 == 0 {
                    qp.push(j)
                } else {
                    qm.push(j)
                }
            }
            Partition { d, e: e.to_vec(), q_plus: qp, q_minus: qm }
        })
        .collect()
}

/// Discrete series at every place but l, with the eigenvalues fixed there.
pub fn dseries_constant(f: &FieldContext, l: usize, fixed: &[(usize, f64)]) -> Result<f64> {
    if l >= f.d || fixed.len() + 1 != f.d || fixed.iter().any(|&(j, _)| j == l || j >= f.d) {
        return Err(Error::Invalid("fixed eigenvalues must cover every place except l".into()));
    }
    let mut prod = 1.0;
    for &(_, y) in fixed {
        if discrete_index(y).is_none() {
            return Err(Error::Invalid(format!("{y} is not of the form b/2 (1 - b/2) with b even")));
        }
        prod *= (0.25 - y).sqrt();
    }
    Ok((f.disc as f64).sqrt() / PI.powi(f.d as i32) * prod)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PSeriesConstant {
    /// with the exact tanh integrals
    pub exact: f64,
    /// with b_j - a_j in place of the tanh integrals
    pub approx: f64,
}

pub fn pseries_constant(f: &FieldContext, l: usize, intervals: &[(usize, f64, f64)]) -> Result<PSeriesConstant> {
    if l >= f.d || intervals.len() + 1 != f.d || intervals.iter().any(|&(j, _, _)| j == l || j >= f.d) {
        return Err(Error::Invalid("intervals must cover every place except l".into()));
    }
    if let Some(&(j, a, b)) = intervals.iter().find(|&&(_, a, b)| a < 0.25 || b < a) {
        return Err(Error::Invalid(format!("[{a}, {b}] at place {} is not inside [1/4, oo)", j + 1)));
    }
    let c = 2f64.powi(1 - f.d as i32) * (f.disc as f64).sqrt() / PI.powi(f.d as i32);
    Ok(PSeriesConstant {
        exact: c * intervals.iter().map(|&(_, a, b)| tanh_integral(a, b)).product::<f64>(),
        approx: c * intervals.iter().map(|&(_, a, b)| b - a).product::<f64>(),
    })
}

/// Weight functions g_j at the places of E.
pub type PlaceFn = Box<dyn Fn(f64) -> C64 + Send + Sync>;

/// Indicator functions of the hypercube sides.
pub fn indicator_factors(h: &Hypercube) -> Vec<(usize, PlaceFn)> {
    h.sides
        .iter()
        .map(|&(j, a, b)| {
            let g: PlaceFn = Box::new(move |y| C64::new(if a <= y && y <= b { 1.0 } else { 0.0 }, 0.0));
            (j, g)
        })
        .collect()
}

fn admissible(p: &Partition, lambda: &[f64]) -> bool {
    p.q_plus.iter().all(|&j| lambda[j] >= 0.0) && p.q_minus.iter().all(|&j| lambda[j] < 0.0)
}

fn q_places(p: &Partition) -> Vec<usize> {
    let mut q: Vec<usize> = p.q_plus.iter().chain(&p.q_minus).copied().collect();
    q.sort_unstable();
    q
}

/// (||lambda_Q||_1, weight * prod g_j) for the atoms of R(E, Q+, Q-).
fn weighted_norms(atoms: &[Atom], p: &Partition, g: &[(usize, PlaceFn)]) -> Vec<(f64, C64)> {
    let q = q_places(p);
    atoms
        .iter()
        .filter(|a| admissible(p, &a.lambda))
        .map(|a| {
            let v = g.iter().fold(C64::new(a.weight, 0.0), |acc, (j, gj)| acc * gj(a.lambda[*j]));
            (lambda_q_norm(&a.lambda, &q), v)
        })
        .collect()
}

/// Chunked parallel sum; the chunk boundaries do not depend on the thread count.
fn det_sum<T: Sync, F: Fn(&T) -> C64 + Sync>(xs: &[T], f: F) -> C64 {
    let parts: Vec<C64> = xs.par_chunks(CHUNK).map(|c| c.iter().map(&f).sum()).collect();
    parts.into_iter().sum()
}

pub fn zeta_transform(atoms: &[Atom], p: &Partition, g: &[(usize, PlaceFn)], s: f64) -> Result<C64> {
    if !(s > 0.0) {
        return Err(Error::Invalid(format!("s = {s} must be positive")));
    }
    Ok(det_sum(&weighted_norms(atoms, p, g), |&(x, v)| v * (-s * x).exp()))
}

pub fn counting_mu(atoms: &[Atom], p: &Partition, g: &[(usize, PlaceFn)], x: f64) -> C64 {
    det_sum(&weighted_norms(atoms, p, g), |&(n, v)| if n <= x { v } else { C64::new(0.0, 0.0) })
}

/// The counting function as a sorted step function.
#[derive(Debug, Clone)]
pub struct Counting {
    /// jump locations, increasing
    pub xs: Vec<f64>,
    /// mu at and after each jump
    pub cum: Vec<C64>,
}

impl Counting {
    pub fn new(atoms: &[Atom], p: &Partition, g: &[(usize, PlaceFn)]) -> Self {
        let mut wn = weighted_norms(atoms, p, g);
        wn.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut xs, mut cum) = (Vec::new(), Vec::<C64>::new());
        let mut acc = C64::new(0.0, 0.0);
        for (x, v) in wn {
            acc += v;
            if xs.last() == Some(&x) {
                *cum.last_mut().unwrap() = acc;
            } else {
                xs.push(x);
                cum.push(acc);
            }
        }
        Counting { xs, cum }
    }

    pub fn at(&self, x: f64) -> C64 {
        match self.xs.partition_point(|&t| t <= x) {
            0 => C64::new(0.0, 0.0),
            k => self.cum[k - 1],
        }
    }

    /// int_0^oo e^{-sX} d mu(X) by parts: sum_k mu_k (e^{-s x_k} - e^{-s x_{k+1}}).
    pub fn laplace(&self, s: f64) -> C64 {
        let n = self.xs.len();
        (0..n)
            .map(|k| {
                let next = if k + 1 < n { (-s * self.xs[k + 1]).exp() } else { 0.0 };
                self.cum[k] * ((-s * self.xs[k]).exp() - next)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TauberReport {
    /// d - |E|
    pub q: usize,
    pub factorial: f64,
    /// (s, s^q Z_s)
    pub s_estimates: Vec<(f64, C64)>,
    /// (X, X^{-q} mu(X) q!)
    pub x_estimates: Vec<(f64, C64)>,
    /// linear extrapolation to s = 0 from the two smallest s
    pub l1: C64,
    /// at the largest X
    pub l2: C64,
    pub rel_gap: f64,
    pub inconclusive: bool,
    pub passed: bool,
}

pub const TAUBER_TOL: f64 = 0.05;
const STABLE_TOL: f64 = 0.1;

fn rel(a: C64, b: C64) -> f64 {
    let m = a.norm().max(b.norm());
    if m == 0.0 {
        0.0
    } else {
        (a - b).norm() / m
    }
}

pub fn tauberian_check(atoms: &[Atom], p: &Partition, g: &[(usize, PlaceFn)], s_grid: &[f64], x_grid: &[f64]) -> Result<TauberReport> {
    let ordered = |v: &[f64], name: &str| {
        if v.len() < 2 || v.iter().any(|&x| !(x > 0.0)) || v.windows(2).any(|w| w[0] >= w[1]) {
            Err(Error::Invalid(format!("{name} grid must be positive, increasing, with at least two points")))
        } else {
            Ok(())
        }
    };
    ordered(s_grid, "s")?;
    ordered(x_grid, "X")?;
    let q = p.q_len();
    let fact = factorial(q);
    let counting = Counting::new(atoms, p, g);
    let s_estimates: Vec<(f64, C64)> =
        s_grid.iter().map(|&s| Ok((s, s.powi(q as i32) * zeta_transform(atoms, p, g, s)?))).collect::<Result<_>>()?;
    let x_estimates: Vec<(f64, C64)> = x_grid.iter().map(|&x| (x, counting.at(x) * fact / x.powi(q as i32))).collect();
    let ((s0, f0), (s1, f1)) = (s_estimates[0], s_estimates[1]);
    let l1 = (f0 * s1 - f1 * s0) / (s1 - s0);
    let l2 = x_estimates[x_estimates.len() - 1].1;
    let l2_prev = x_estimates[x_estimates.len() - 2].1;
    let inconclusive = rel(f0, l1) > STABLE_TOL || rel(l2, l2_prev) > STABLE_TOL;
    let rel_gap = rel(l1, l2);
    Ok(TauberReport {
        q,
        factorial: fact,
        s_estimates,
        x_estimates,
        l1,
        l2,
        rel_gap,
        inconclusive,
        passed: !inconclusive && rel_gap <= TAUBER_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityRow {
    pub x: f64,
    /// X^{|E| - d} mu(X)
    pub scaled: f64,
    pub target: f64,
    /// relative error, or the absolute value when the target is 0
    pub rel_err: f64,
}

pub fn density_rows(atoms: &[Atom], p: &Partition, h: &Hypercube, target: f64, x_grid: &[f64]) -> Vec<DensityRow> {
    let counting = Counting::new(atoms, p, &indicator_factors(h));
    x_grid
        .iter()
        .map(|&x| {
            let scaled = counting.at(x).re / x.powi(p.q_len() as i32);
            let rel_err = if target == 0.0 { scaled.abs() } else { (scaled - target).abs() / target };
            DensityRow { x, scaled, target, rel_err }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MockSpec {
    pub model: MockModel,
    /// cells per axis of a Q place for the eta grid, number of atoms / 10 otherwise
    pub resolution: usize,
    /// largest ||lambda_Q||_1 generated
    pub x_max: f64,
    pub seed: u64,
}

/// Cells per side at an E place.
const E_CELLS: usize = 16;

/// (position, twice the d-eta mass) on one place.
fn place_points(place: Place, side: Option<(f64, f64)>, cells: usize, x_max: f64) -> Vec<(f64, f64)> {
    let grid = |lo: f64, hi: f64, n: usize| -> Vec<(f64, f64)> {
        if hi <= lo {
            return Vec::new();
        }
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|k| {
                let (a, b) = (lo + k as f64 * h, if k + 1 == n { hi } else { lo + (k + 1) as f64 * h });
                (0.5 * (a + b), tanh_integral(a, b))
            })
            .collect()
    };
    let discrete = |lo: f64, hi: f64| discrete_inside(lo, hi).map(|bb| (discrete_point(bb), (bb - 1) as f64));
    match place {
        Place::Plus => discrete(-0.5, 0.25).chain(grid(0.25, x_max + 0.25, cells)).collect(),
        Place::Minus => discrete(-x_max - 0.5, -0.5).collect(),
        Place::E => {
            let (a, b) = side.unwrap();
            let mut v: Vec<(f64, f64)> = discrete(a, b).collect();
            v.extend(grid(a.max(0.25), b, E_CELLS));
            v
        }
    }
}

fn eta_grid(f: &FieldContext, p: &Partition, h: &Hypercube, spec: &MockSpec) -> Vec<Atom> {
    // half of each point's mass times 2 sqrt|D| / pi^d reproduces the limit
    let k = 2.0 * (f.disc as f64).sqrt() / PI.powi(f.d as i32) / 2f64.powi(p.d as i32);
    let pts: Vec<Vec<(f64, f64)>> =
        (0..p.d).map(|j| place_points(p.place(j), h.side(j), spec.resolution, spec.x_max)).collect();
    let mut atoms = Vec::new();
    let mut lambda = vec![0.0; p.d];
    fn rec(
        j: usize,
        budget: f64,
        w: f64,
        p: &Partition,
        pts: &[Vec<(f64, f64)>],
        lambda: &mut Vec<f64>,
        out: &mut Vec<Atom>,
    ) {
        if j == pts.len() {
            out.push(Atom { lambda: lambda.clone(), weight: w });
            return;
        }
        let counted = p.place(j) != Place::E;
        for &(y, m) in &pts[j] {
            let rest = if counted { budget - y.abs() } else { budget };
            if rest < 0.0 {
                continue;
            }
            lambda[j] = y;
            rec(j + 1, rest, w * m, p, pts, lambda, out);
        }
    }
    rec(0, spec.x_max, k, p, &pts, &mut lambda, &mut atoms);
    atoms
}

pub fn generate_mock_measure(f: &FieldContext, p: &Partition, h: &Hypercube, spec: &MockSpec) -> Result<SpectralAtomList> {
    if spec.resolution < 10 {
        return Err(Error::Invalid(format!("resolution {} is below 10", spec.resolution)));
    }
    if p.d != f.d {
        return Err(Error::Invalid(format!("partition has {} places, field has {}", p.d, f.d)));
    }
    h.check(p)?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let n = 10 * spec.resolution;
    let atoms = match spec.model {
        MockModel::EtaGrid => eta_grid(f, p, h, spec),
        MockModel::Uniform => (0..n)
            .map(|_| {
                let lambda = (0..p.d)
                    .map(|j| {
                        let u: f64 = rng.random();
                        match p.place(j) {
                            Place::Plus => u * spec.x_max,
                            Place::Minus => -(1.0 - u) * spec.x_max,
                            Place::E => {
                                let (a, b) = h.side(j).unwrap();
                                a + u * (b - a)
                            }
                        }
                    })
                    .collect();
                Atom { lambda, weight: rng.random() }
            })
            .collect(),
        MockModel::Adversarial => (0..n)
            .map(|_| {
                let lambda = (0..p.d).map(|_| 0.25 * rng.random::<f64>()).collect();
                Atom { lambda, weight: rng.random() }
            })
            .collect(),
    };
    Ok(SpectralAtomList { d: p.d, model: spec.model, seed: spec.seed, atoms })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceptionalAtom {
    pub index: usize,
    /// places with a coordinate in (0, 1/4)
    pub places: Vec<usize>,
    /// places with a coordinate below the exceptional bound
    pub violating: Vec<usize>,
}

pub fn exceptional_filter(atoms: &[Atom]) -> Vec<ExceptionalAtom> {
    atoms
        .iter()
        .enumerate()
        .filter_map(|(index, a)| {
            let places: Vec<usize> = (0..a.lambda.len()).filter(|&j| a.lambda[j] > 0.0 && a.lambda[j] < 0.25).collect();
            let violating = places.iter().copied().filter(|&j| a.lambda[j] < EXCEPTIONAL_BOUND).collect();
            (!places.is_empty()).then_some(ExceptionalAtom { index, places, violating })
        })
        .collect()
}
