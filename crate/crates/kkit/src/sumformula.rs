//! Geometric side of the sum formula: the delta term with its exact constant,
//! the truncated Kloosterman term with Bessel-transform weights, and the
//! log-log dominance scan.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::bessel::bessel_transform_plus;
use crate::kloosterman::{kloosterman_term, KlEnvelope, TermOptions};
use crate::numberfield::{FieldContext, FieldElt, Ideal};
use crate::testfn::{eta, product_norm, special_minus, special_plus, TestFunction};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Place {
    E,
    Plus,
    Minus,
}

/// Disjoint index sets E, Q+, Q- covering the d real places (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub d: usize,
    pub e: Vec<usize>,
    pub q_plus: Vec<usize>,
    pub q_minus: Vec<usize>,
}

impl Partition {
    pub fn new(d: usize, e: Vec<usize>, q_plus: Vec<usize>, q_minus: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; d];
        for &j in e.iter().chain(&q_plus).chain(&q_minus) {
            if j >= d || seen[j] {
                return Err(Error::Invalid(format!("place {} repeated or out of range", j + 1)));
            }
            seen[j] = true;
        }
        if seen.iter().any(|&b| !b) {
            return Err(Error::Invalid("partition does not cover every place".into()));
        }
        Ok(Partition { d, e, q_plus, q_minus })
    }

    /// "E=;Q+=1,2;Q-=" with 1-based places.
    pub fn parse(d: usize, s: &str) -> Result<Self> {
        let (mut e, mut qp, mut qm) = (Vec::new(), Vec::new(), Vec::new());
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, list) = part
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("partition item '{part}' lacks '='")))?;
            let target = match key.trim() {
                "E" => &mut e,
                "Q+" => &mut qp,
                "Q-" => &mut qm,
                other => return Err(Error::Invalid(format!("unknown partition set '{other}'"))),
            };
            for x in list.split(',').map(str::trim).filter(|x| !x.is_empty()) {
                let j: usize = x.parse().map_err(|_| Error::Invalid(format!("bad place '{x}'")))?;
                if j == 0 {
                    return Err(Error::Invalid("places are numbered from 1".into()));
                }
                target.push(j - 1);
            }
        }
        Partition::new(d, e, qp, qm)
    }

    pub fn place(&self, j: usize) -> Place {
        if self.q_plus.contains(&j) {
            Place::Plus
        } else if self.q_minus.contains(&j) {
            Place::Minus
        } else {
            Place::E
        }
    }

    pub fn q_len(&self) -> usize {
        self.q_plus.len() + self.q_minus.len()
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let l = |v: &Vec<usize>| v.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(",");
        write!(f, "E={};Q+={};Q-={}", l(&self.e), l(&self.q_plus), l(&self.q_minus))
    }
}

/// The product test function place by place: k_E at E (in order), the
/// special families at Q+ and Q-.
pub fn place_functions(p: &Partition, k_e: &[TestFunction], s: f64) -> Result<Vec<TestFunction>> {
    if k_e.len() != p.e.len() {
        return Err(Error::Invalid(format!("{} E-factors given for |E| = {}", k_e.len(), p.e.len())));
    }
    (0..p.d)
        .map(|j| match p.place(j) {
            Place::Plus => special_plus(s),
            Place::Minus => special_minus(s),
            Place::E => Ok(k_e[p.e.iter().position(|&i| i == j).unwrap()].clone()),
        })
        .collect()
}

pub const ETA_TOL: f64 = 1e-12;

/// Delta = 2 pi^{-d} sqrt|D_F| prod_j Eta(k_j).
pub fn delta_term(f: &FieldContext, ks: &[TestFunction]) -> Result<f64> {
    if ks.len() != f.d {
        return Err(Error::Invalid(format!("{} factors for degree {}", ks.len(), f.d)));
    }
    let mut prod = 1.0;
    for k in ks {
        prod *= eta(k, ETA_TOL)?.total.re;
    }
    Ok(2.0 * PI.powi(-(f.d as i32)) * (f.disc as f64).sqrt() * prod)
}

/// 2^{1+|E|} (2 pi)^{-d} sqrt|D_F| Eta_E(k).
pub fn main_constant(f: &FieldContext, p: &Partition, k_e: &[TestFunction]) -> Result<f64> {
    let mut eta_e = 1.0;
    for k in k_e {
        eta_e *= eta(k, ETA_TOL)?.total.re;
    }
    Ok(2f64.powi(1 + p.e.len() as i32) / (2.0 * PI).powi(f.d as i32) * (f.disc as f64).sqrt() * eta_e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaRow {
    pub s: f64,
    pub delta: f64,
    pub predicted: f64,
    /// |Delta s^{d-|E|} - C| / |C|
    pub rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaFit {
    pub constant: f64,
    pub rows: Vec<DeltaRow>,
    /// least-squares slope of log|Delta s^{d-|E|} - C| against log s
    pub residual_slope: f64,
}

pub fn delta_asymptotics(f: &FieldContext, p: &Partition, k_e: &[TestFunction], s_grid: &[f64]) -> Result<DeltaFit> {
    if p.q_len() == 0 {
        return Err(Error::Invalid("Q must be nonempty".into()));
    }
    let c = main_constant(f, p, k_e)?;
    let m = (p.d - p.e.len()) as i32;
    let rows = s_grid
        .iter()
        .map(|&s| {
            let delta = delta_term(f, &place_functions(p, k_e, s)?)?;
            let predicted = c * s.powi(-m);
            Ok(DeltaRow { s, delta, predicted, rel_dev: (delta * s.powi(m) - c).abs() / c.abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.rel_dev > 0.0)
        .map(|r| (r.s.ln(), (r.rel_dev * c.abs()).ln()))
        .collect();
    Ok(DeltaFit { constant: c, rows, residual_slope: ls_slope(&pts) })
}

pub fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// beta_+ k sampled in x = 4 pi sqrt(y): geometric nodes on [1e-4, 1], step
/// 0.2 beyond, six-point Lagrange interpolation in between and a power law
/// below the first node.
#[derive(Debug, Clone, Serialize)]
pub struct BesselTable {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    slope0: f64,
}

pub const TABLE_X_MIN: f64 = 1e-4;

impl BesselTable {
    pub fn build(k: &TestFunction, alpha: f64, y_max: f64, tol: f64) -> Result<Self> {
        let x_max = 4.0 * PI * y_max.sqrt();
        let mut x = vec![TABLE_X_MIN];
        while *x.last().unwrap() < 1.0 {
            let n = x.last().unwrap() * 1.05;
            x.push(n.min(1.0));
        }
        let mut i = 1;
        while *x.last().unwrap() < x_max + 0.6 {
            x.push(1.0 + 0.2 * i as f64);
            i += 1;
        }
        let v = x
            .par_iter()
            .map(|&xx| {
                let y = (xx / (4.0 * PI)).powi(2);
                bessel_transform_plus(k, y, alpha, tol).map(|b| b.value.re)
            })
            .collect::<Result<Vec<_>>>()?;
        let slope0 = if v[0] != 0.0 && v[1] != 0.0 {
            (v[1] / v[0]).abs().ln() / (x[1] / x[0]).ln()
        } else {
            2.0 * alpha
        };
        Ok(BesselTable { x, v, slope0: slope0.max(2.0 * alpha) })
    }

    /// Least-squares slope of log|beta| against log y over the nodes with x <= 1e-2.
    pub fn small_y_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .x
            .iter()
            .zip(&self.v)
            .filter(|(&x, &v)| x <= 1e-2 && v != 0.0)
            .map(|(&x, &v)| (2.0 * x.ln(), v.abs().ln()))
            .collect();
        if pts.len() < 2 {
            f64::INFINITY
        } else {
            ls_slope(&pts)
        }
    }

    pub fn y_max(&self) -> f64 {
        // the last three nodes are only interpolation support
        (self.x[self.x.len() - 4] / (4.0 * PI)).powi(2)
    }

    pub fn eval(&self, y: f64) -> f64 {
        let xx = 4.0 * PI * y.abs().sqrt();
        if xx <= self.x[0] {
            return self.v[0] * (xx / self.x[0]).powf(self.slope0);
        }
        let n = self.x.len();
        let i = self.x.partition_point(|&t| t < xx).min(n - 1);
        let lo = i.saturating_sub(3).min(n - 6);
        let mut acc = 0.0;
        for a in lo..lo + 6 {
            let mut l = 1.0;
            for b in lo..lo + 6 {
                if a != b {
                    l *= (xx - self.x[b]) / (self.x[a] - self.x[b]);
                }
            }
            acc += l * self.v[a];
        }
        acc
    }
}

/// Cap on the small-y exponent of the fitted envelope.
pub const MAX_ENV_EXP: f64 = 1.5;

/// Safety factor over the largest ratio seen on the table nodes.
pub const ENVELOPE_SLACK: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SideOptions {
    pub alpha: f64,
    pub eps: f64,
    pub bound_b: f64,
    pub y_cap: f64,
    pub tol: f64,
}

impl Default for SideOptions {
    fn default() -> Self {
        SideOptions { alpha: 0.6, eps: 0.1, bound_b: 2000.0, y_cap: 100.0, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KlSideReport {
    pub s: f64,
    pub value: f64,
    pub tail: f64,
    /// ||k||_{alpha,a,E} s^{-exponent}; the constant in front is fitted by the caller
    pub bound_shape: f64,
    pub exponent: f64,
    /// fitted envelope min(p_j, q_j y^env_exp) per place
    pub env_p: Vec<f64>,
    pub env_q: Vec<f64>,
    pub env_exp: f64,
    pub norm_tail: f64,
    pub unit_tail: f64,
    pub orbits: usize,
    pub c_ws: f64,
    pub c_div: f64,
}

/// (3/4 + eps)|Q+| + (1/4 + 1/(8 alpha) + eps)|Q-|.
pub fn bound_exponent(p: &Partition, alpha: f64, eps: f64) -> f64 {
    (0.75 + eps) * p.q_plus.len() as f64 + (0.25 + 1.0 / (8.0 * alpha) + eps) * p.q_minus.len() as f64
}

/// K_{-r,-r}(B k) with B k(y) = prod_j beta_+ k_j(y_j).
pub fn kloosterman_side(
    f: &FieldContext,
    q: &Ideal,
    r: FieldElt,
    p: &Partition,
    k_e: &[TestFunction],
    s: f64,
    o: &SideOptions,
) -> Result<KlSideReport> {
    if !(o.alpha > 0.5 && o.alpha <= crate::testfn::TAU) {
        return Err(Error::Invalid(format!("alpha = {} not in (1/2, tau]", o.alpha)));
    }
    if !(o.eps > 0.0 && o.eps < 1.0 - crate::testfn::TAU) {
        return Err(Error::Invalid(format!("eps = {} not in (0, 1 - tau)", o.eps)));
    }
    if p.d != f.d {
        return Err(Error::Invalid("partition degree differs from the field degree".into()));
    }
    let ks = place_functions(p, k_e, s)?;
    // y_j = r_j^2 / c_j^2 <= r_j^2 over Q; d = 2 truncates at y_cap
    let re = f.embed_elt(r);
    let y_top = if f.d == 1 { re[0] * re[0] } else { o.y_cap };
    let mut tables: Vec<BesselTable> = Vec::with_capacity(f.d);
    for j in 0..f.d {
        let place = p.place(j);
        let same = (0..j).find(|&i| p.place(i) == place && place != Place::E);
        tables.push(match same {
            Some(i) => tables[i].clone(),
            None => BesselTable::build(&ks[j], o.alpha, y_top, o.tol)?,
        });
    }
    let a_env = tables
        .iter()
        .map(|t| t.small_y_slope() - 0.05)
        .fold(MAX_ENV_EXP, f64::min)
        .max(o.alpha);
    let mut env = KlEnvelope { p: [0.0; 2], q: [0.0; 2], alpha: a_env };
    for (j, t) in tables.iter().enumerate() {
        let mut sup: f64 = 0.0;
        let mut lead: f64 = 0.0;
        for (&x, &v) in t.x.iter().zip(&t.v) {
            let y = (x / (4.0 * PI)).powi(2);
            sup = sup.max(v.abs());
            lead = lead.max(v.abs() / y.powf(a_env));
        }
        env.p[j] = ENVELOPE_SLACK * sup;
        env.q[j] = ENVELOPE_SLACK * lead;
    }
    let weight = |y: &[f64; 2]| -> f64 { (0..tables.len()).map(|j| tables[j].eval(y[j])).product() };
    let opts = TermOptions { y_cap: o.y_cap, eps: o.eps, ..TermOptions::default() };
    let neg_r = FieldElt::new(f.neg(r.num), r.den);
    let rep = kloosterman_term(f, q, neg_r, &weight, &env, o.bound_b, &opts)?;
    let exponent = bound_exponent(p, o.alpha, o.eps);
    let norm_e = product_norm(k_e, o.alpha, 4.0)?;
    Ok(KlSideReport {
        s,
        value: rep.value,
        tail: rep.tail,
        bound_shape: norm_e * s.powf(-exponent),
        exponent,
        env_p: env.p[..f.d].to_vec(),
        env_q: env.q[..f.d].to_vec(),
        env_exp: a_env,
        norm_tail: rep.norm_tail,
        unit_tail: rep.unit_tail,
        orbits: rep.orbits,
        c_ws: rep.c_ws,
        c_div: rep.c_div,
    })
}

/// One row of the geometric-side scan.
#[derive(Debug, Clone, Serialize)]
pub struct GeometricSideReport {
    pub s: f64,
    pub delta: f64,
    pub delta_pred: f64,
    pub kl_value: f64,
    pub kl_tail: f64,
    pub kl_bound: f64,
    pub kl: KlSideReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct DominanceReport {
    pub rows: Vec<GeometricSideReport>,
    pub p_delta: f64,
    pub p_k: f64,
    pub margin: f64,
    /// constant in front of the Kloosterman bound, fitted at the largest s
    pub bound_const: f64,
    pub bound_held: bool,
    /// set when the tail exceeds 10% of the value somewhere
    pub inconclusive: Option<String>,
    pub passed: bool,
}

pub const DOMINANCE_MARGIN: f64 = 0.2;
pub const TAIL_FRACTION: f64 = 0.1;

#[allow(clippy::too_many_arguments)]
pub fn dominance_scan(
    f: &FieldContext,
    q: &Ideal,
    r: FieldElt,
    p: &Partition,
    k_e: &[TestFunction],
    s_grid: &[f64],
    o: &SideOptions,
) -> Result<DominanceReport> {
    if s_grid.len() < 4 {
        return Err(Error::Invalid("the s grid needs at least 4 points".into()));
    }
    if s_grid.iter().any(|&s| !(s > 0.0 && s <= 0.5)) {
        return Err(Error::Invalid("the s grid must lie in (0, 0.5]".into()));
    }
    if p.q_len() == 0 {
        return Err(Error::Invalid("Q must be nonempty".into()));
    }
    let c = main_constant(f, p, k_e)?;
    let m = (p.d - p.e.len()) as i32;
    let mut rows = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let delta = delta_term(f, &place_functions(p, k_e, s)?)?;
        let kl = kloosterman_side(f, q, r, p, k_e, s, o)?;
        rows.push(GeometricSideReport {
            s,
            delta,
            delta_pred: c * s.powi(-m),
            kl_value: kl.value,
            kl_tail: kl.tail,
            kl_bound: 0.0,
            kl,
        });
    }
    let anchor = rows
        .iter()
        .max_by(|a, b| a.s.total_cmp(&b.s))
        .map(|r| (r.kl_value.abs() + r.kl_tail) / r.kl.bound_shape)
        .unwrap_or(0.0);
    let mut bound_held = true;
    for r in &mut rows {
        r.kl_bound = anchor * r.kl.bound_shape;
        if r.kl_value.abs() > r.kl_bound * (1.0 + 1e-12) {
            bound_held = false;
        }
    }
    let slope = |g: &dyn Fn(&GeometricSideReport) -> f64| {
        ls_slope(&rows.iter().map(|r| (r.s.ln(), g(r).abs().ln())).collect::<Vec<_>>())
    };
    let p_delta = slope(&|r| r.delta);
    let p_k = slope(&|r| r.kl_value);
    let inconclusive = rows
        .iter()
        .find(|r| !(r.kl_tail <= TAIL_FRACTION * r.kl_value.abs()))
        .map(|r| format!("tail {:.3e} exceeds 10% of |K| = {:.3e} at s = {}", r.kl_tail, r.kl_value.abs(), r.s));
    let margin = p_k - p_delta;
    let passed = inconclusive.is_none() && margin >= DOMINANCE_MARGIN;
    Ok(DominanceReport { rows, p_delta, p_k, margin, bound_const: anchor, bound_held, inconclusive, passed })
}

/// `start:end:log[:n]` or `start:end:lin[:n]` (n defaults to 5), or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| Error::Invalid(format!("grid '{s}': {m}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(&format!("'{t}' is not a number")));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() < 3 || parts.len() > 4 {
            return Err(bad("expected start:end:log[:n]"));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let n: usize = match parts.get(3) {
            Some(t) => t.trim().parse().map_err(|_| bad("bad point count"))?,
            None => 5,
        };
        if n < 2 {
            return Err(bad("need at least two points"));
        }
        let step = |i: usize| i as f64 / (n - 1) as f64;
        match parts[2].trim() {
            "log" => {
                if !(a > 0.0 && b > 0.0) {
                    return Err(bad("log grids need positive ends"));
                }
                Ok((0..n).map(|i| (a.ln() + (b.ln() - a.ln()) * step(i)).exp()).collect())
            }
            "lin" => Ok((0..n).map(|i| a + (b - a) * step(i)).collect()),
            other => Err(bad(&format!("unknown spacing '{other}'"))),
        }
    } else {
        s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect()
    }
}
