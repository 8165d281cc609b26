//! Test functions on the strip |Re nu| <= tau plus the half-integers, the
//! functionals Eta and Eta-tilde, norms, mollifier and bump.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::quad::{integrate, integrate_panels};
use crate::{Error, Result, C64};

pub const TAU: f64 = 0.6;
pub const QUAD_TOL: f64 = 1e-10;
/// sampled range of |Im nu| for suprema and invariant checks
pub const SAMPLE_T_MAX: f64 = 1e3;

pub type StripFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;
/// value at nu = (b-1)/2 for even b >= 2
pub type HalfFn = Arc<dyn Fn(u64) -> C64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Family {
    Plus(f64),
    Minus(f64),
    /// |k(x + iu)| <= c exp(-s u^2) on the strip
    Gaussian { s: f64, c: f64 },
    General,
}

impl Family {
    /// (s, c) of a Gaussian strip bound, if the family has one; c = 0 when
    /// the strip part vanishes.
    fn gaussian(&self, strip_zero: bool, tau: f64) -> Option<(f64, f64)> {
        if strip_zero {
            return Some((f64::INFINITY, 0.0));
        }
        match *self {
            Family::Plus(s) => Some((s, (s * (tau * tau - 0.25).max(0.0)).exp())),
            Family::Gaussian { s, c } => Some((s, c)),
            _ => None,
        }
    }
}

#[derive(Clone)]
pub struct TestFunction {
    strip: StripFn,
    half: HalfFn,
    pub decay: f64,
    pub tau: f64,
    pub even: bool,
    pub family: Family,
    /// the strip part vanishes identically
    pub strip_zero: bool,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("decay", &self.decay)
            .field("tau", &self.tau)
            .field("family", &self.family)
            .finish()
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

impl TestFunction {
    pub fn new(strip: StripFn, half: HalfFn, decay: f64, tau: f64) -> Result<Self> {
        if !(decay > 2.0) {
            return Err(Error::Invalid(format!("decay exponent {decay} must exceed 2")));
        }
        if !(tau > 0.5 && tau < 0.75) {
            return Err(Error::Invalid(format!("strip width {tau} outside (1/2, 3/4)")));
        }
        Ok(TestFunction { strip, half, decay, tau, even: true, family: Family::General, strip_zero: false })
    }

    pub fn zero() -> Self {
        TestFunction {
            strip: Arc::new(|_| c(0.0)),
            half: Arc::new(|_| c(0.0)),
            decay: 4.0,
            tau: TAU,
            even: true,
            family: Family::General,
            strip_zero: true,
        }
    }

    /// Only the half-integer value at (b-1)/2 is nonzero; b >= 4.
    pub fn single_half(b: u64, value: f64) -> Result<Self> {
        if b < 4 || b % 2 == 1 {
            return Err(Error::Invalid(format!("b = {b} must be even and at least 4")));
        }
        let mut k = TestFunction::zero();
        k.half = Arc::new(move |bb| if bb == b { c(value) } else { c(0.0) });
        Ok(k)
    }

    /// k on the strip |Re nu| <= tau.
    pub fn eval(&self, nu: C64) -> C64 {
        (self.strip)(nu)
    }

    /// k((b-1)/2) for even b >= 2.
    pub fn at_half(&self, b: u64) -> C64 {
        (self.half)(b)
    }

    /// a k1 + b k2.
    pub fn linear(a: C64, k1: &TestFunction, b: C64, k2: &TestFunction) -> TestFunction {
        let (s1, s2) = (k1.strip.clone(), k2.strip.clone());
        let (h1, h2) = (k1.half.clone(), k2.half.clone());
        TestFunction {
            strip: Arc::new(move |nu| a * s1(nu) + b * s2(nu)),
            half: Arc::new(move |n| a * h1(n) + b * h2(n)),
            decay: k1.decay.min(k2.decay),
            tau: k1.tau.min(k2.tau),
            even: k1.even && k2.even,
            family: match (k1.family.gaussian(k1.strip_zero, k1.tau), k2.family.gaussian(k2.strip_zero, k2.tau)) {
                (Some((s1, c1)), Some((s2, c2))) => Family::Gaussian { s: s1.min(s2), c: a.norm() * c1 + b.norm() * c2 },
                _ => Family::General,
            },
            strip_zero: k1.strip_zero && k2.strip_zero,
        }
    }

    /// Sampled checks of evenness, the decay bound and convergence of the
    /// discrete series.
    pub fn validate(&self, alpha: f64) -> Result<()> {
        for &t in &[0.0, 0.3, 1.0, 2.5, 7.0, 30.0] {
            for &x in &[0.0, 0.25, self.tau] {
                let nu = C64::new(x, t);
                let (a, b) = (self.eval(nu), self.eval(-nu));
                if (a - b).norm() > 1e-12 * a.norm().max(1.0) {
                    return Err(Error::Invalid(format!("not even at nu = {nu}")));
                }
            }
        }
        for x in [0.0, alpha] {
            let n = sup_weighted(self, x, self.decay);
            if !n.is_finite() {
                return Err(Error::Invalid(format!("decay bound fails on Re nu = {x}")));
            }
        }
        let s = discrete_sum(self, true)?;
        if !s.0.re.is_finite() {
            return Err(Error::Invalid("discrete series diverges".into()));
        }
        Ok(())
    }

    /// Bound for int_T^inf |k(it)| t dt.
    pub fn continuous_tail(&self, t: f64) -> f64 {
        match self.family {
            Family::Plus(s) => (-s * (0.25 + t * t)).exp() / (2.0 * s),
            Family::Minus(_) => 0.0,
            _ if self.strip_zero => 0.0,
            Family::Gaussian { s, c } => c * (-s * t * t).exp() / (2.0 * s),
            Family::General => {
                let m = sup_weighted(self, 0.0, self.decay);
                m * (1.0 + t).powf(2.0 - self.decay) / (self.decay - 2.0)
            }
        }
    }

    /// Smallest T (on a doubling grid) with continuous_tail(T) <= tol.
    pub fn cutoff(&self, tol: f64) -> f64 {
        let mut t = 8.0;
        while self.continuous_tail(t) > tol && t < 1e8 {
            t *= 1.25;
        }
        t
    }
}

pub fn special_plus(s: f64) -> Result<TestFunction> {
    if !(s > 0.0) {
        return Err(Error::Invalid(format!("s = {s} must be positive")));
    }
    Ok(TestFunction {
        strip: Arc::new(move |nu: C64| (-s * (0.25 - nu * nu)).exp()),
        // only b = 2 (nu = 1/2, inside the strip) is nonzero
        half: Arc::new(move |b| if b == 2 { c(1.0) } else { c(0.0) }),
        decay: 4.0,
        tau: TAU,
        even: true,
        family: Family::Plus(s),
        strip_zero: false,
    })
}

pub fn special_minus(s: f64) -> Result<TestFunction> {
    if !(s > 0.0) {
        return Err(Error::Invalid(format!("s = {s} must be positive")));
    }
    Ok(TestFunction {
        strip: Arc::new(|_| c(0.0)),
        half: Arc::new(move |b| {
            if b == 2 {
                c(0.0)
            } else {
                let nu = (b as f64 - 1.0) / 2.0;
                c((-s * (nu * nu - 0.25)).exp())
            }
        }),
        decay: 4.0,
        tau: TAU,
        even: true,
        family: Family::Minus(s),
        strip_zero: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaValue {
    pub total: C64,
    pub continuous: C64,
    pub discrete: C64,
    pub err: f64,
}

/// sum over even b >= 2 of (b-1)/2 k((b-1)/2) (or of its absolute values),
/// stopped after five consecutive terms below 1e-16 relative.
fn discrete_sum(k: &TestFunction, absolute: bool) -> Result<(C64, u64)> {
    let mut sum = c(0.0);
    let mut small = 0;
    let mut b = 2u64;
    while b < 40_000_000 {
        let v = k.at_half(b) * ((b as f64 - 1.0) / 2.0);
        let v = if absolute { c(v.norm()) } else { v };
        sum += v;
        if v.norm() <= 1e-16 * sum.norm() || v.norm() == 0.0 && b > 64 {
            small += 1;
            if small >= 5 {
                return Ok((sum, b));
            }
        } else {
            small = 0;
        }
        b += 2;
    }
    Err(Error::Numerical("discrete series did not settle".into()))
}

/// Eta(k) = int_0^inf k(it) t tanh(pi t) dt + sum_b (b-1)/2 k((b-1)/2).
pub fn eta(k: &TestFunction, tol: f64) -> Result<EtaValue> {
    let (continuous, err) = if k.strip_zero {
        (c(0.0), 0.0)
    } else {
        let t_max = k.cutoff(tol / 2.0);
        let mut pts = vec![0.0];
        let mut p = 1.0;
        while p < t_max {
            pts.push(p);
            p *= 2.0;
        }
        pts.push(t_max);
        let r = integrate_panels(|t| k.eval(C64::new(0.0, t)) * (t * (PI * t).tanh()), &pts, tol / 2.0, 0.0)?;
        (r.value, r.err + k.continuous_tail(t_max))
    };
    let (discrete, _) = discrete_sum(k, false)?;
    Ok(EtaValue { total: continuous + discrete, continuous, discrete, err })
}

/// The set A_d = {b/2 (1 - b/2)}: 0, -2, -6, -12, ...
pub fn exceptional_point(b: u64) -> f64 {
    let h = b as f64 / 2.0;
    h * (1.0 - h)
}

/// Eta-tilde(g) = 1/2 int_{1/4}^inf g(y) tanh(pi sqrt(y - 1/4)) dy
/// + sum over y in A_d of sqrt(1/4 - y) g(y).
/// The continuous part is integrated in u = sqrt(y - 1/4) up to u_max;
/// breakpoints (in y) help with non-smooth g.
pub fn eta_tilde<G: Fn(f64) -> f64>(g: G, u_max: f64, breaks: &[f64], tol: f64) -> Result<EtaValue> {
    let mut pts = vec![0.0];
    for &y in breaks {
        if y > 0.25 {
            let u = (y - 0.25).sqrt();
            if u < u_max {
                pts.push(u);
            }
        }
    }
    pts.push(u_max);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let r = integrate_panels(|u| c(g(0.25 + u * u) * u * (PI * u).tanh()), &pts, tol, 0.0)?;
    let mut disc = 0.0;
    let mut small = 0;
    let mut b = 2u64;
    while small < 5 && b < 40_000_000 {
        let y = exceptional_point(b);
        let v = (0.25 - y).sqrt() * g(y);
        disc += v;
        if v.abs() <= 1e-16 * disc.abs() || v == 0.0 && b > 64 {
            small += 1;
        } else {
            small = 0;
        }
        b += 2;
    }
    Ok(EtaValue { total: r.value + disc, continuous: r.value, discrete: c(disc), err: r.err })
}

/// sup over Re nu = alpha, |Im nu| <= SAMPLE_T_MAX, of (1+|Im nu|)^b |k(nu)|.
fn sup_weighted(k: &TestFunction, alpha: f64, b: f64) -> f64 {
    if k.strip_zero {
        return 0.0;
    }
    let w = |t: f64| (1.0 + t).powf(b) * k.eval(C64::new(alpha, t)).norm();
    let n = 20_000;
    let grid = |i: usize| {
        // denser near zero
        let x = i as f64 / n as f64;
        SAMPLE_T_MAX * x * x
    };
    let mut best = (0.0f64, 0usize);
    for i in 0..=n {
        let v = w(grid(i));
        if !v.is_finite() {
            return f64::INFINITY;
        }
        if v > best.0 {
            best = (v, i);
        }
    }
    // golden-section refinement between the neighbours of the best sample
    let (mut lo, mut hi) = (grid(best.1.saturating_sub(1)), grid((best.1 + 1).min(n)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - g * (hi - lo);
        let bb = lo + g * (hi - lo);
        if w(a) >= w(bb) {
            hi = bb;
        } else {
            lo = a;
        }
    }
    best.0.max(w(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub n_alpha: f64,
    pub n_zero: f64,
    pub n_discr: f64,
    pub total: f64,
}

/// (N_{alpha,b}, N_{0,b}, Ndiscr, N_{alpha,b} + N_{0,b} + Ndiscr).
pub fn norms(k: &TestFunction, alpha: f64, b: f64) -> Result<Norms> {
    if !(0.0..=k.tau).contains(&alpha) {
        return Err(Error::Invalid(format!("alpha = {alpha} outside [0, tau]")));
    }
    let (n_alpha, n_zero) = if b > k.decay {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (sup_weighted(k, alpha, b), sup_weighted(k, 0.0, b))
    };
    let n_discr = discrete_sum(k, true)?.0.re;
    Ok(Norms { n_alpha, n_zero, n_discr, total: n_alpha + n_zero + n_discr })
}

/// prod over the list of N_{alpha,a}; the empty product is 1.
pub fn product_norm(ks: &[TestFunction], alpha: f64, a: f64) -> Result<f64> {
    let mut p = 1.0;
    for k in ks {
        p *= norms(k, alpha, a)?.total;
    }
    Ok(p)
}

/// Real function with known compact support and sup norm.
#[derive(Clone)]
pub struct CompactFn {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support: (f64, f64),
    /// points where f is not smooth
    pub kinks: Vec<f64>,
}

impl CompactFn {
    pub fn tent(lo: f64, hi: f64, height: f64) -> Self {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        CompactFn {
            f: Arc::new(move |x| if x <= lo || x >= hi { 0.0 } else { height * (1.0 - (x - mid).abs() / half) }),
            support: (lo, hi),
            kinks: vec![lo, mid, hi],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn sup(&self) -> f64 {
        let (lo, hi) = self.support;
        let mut m = 0.0f64;
        for i in 0..=10_000 {
            m = m.max(self.eval(lo + (hi - lo) * i as f64 / 10_000.0).abs());
        }
        for &x in &self.kinks {
            m = m.max(self.eval(x).abs());
        }
        m
    }
}

/// h(lambda) = sqrt(u/pi) int e^{-u (lambda - x)^2} k(x) dx, entire in lambda.
#[derive(Clone)]
pub struct Mollified {
    pub target: CompactFn,
    pub u: f64,
}

impl Mollified {
    pub fn eval(&self, lambda: C64) -> C64 {
        let (lo, hi) = self.target.support;
        let w = 12.0 / self.u.sqrt();
        let mut pts: Vec<f64> = self.target.kinks.iter().copied().filter(|&x| x > lo && x < hi).collect();
        pts.push(lo);
        pts.push(hi);
        if lambda.im == 0.0 {
            // the kernel is negligible outside lambda +- w
            for x in [lambda.re - w, lambda.re, lambda.re + w] {
                if x > lo && x < hi {
                    pts.push(x);
                }
            }
            pts.retain(|&x| x >= (lambda.re - w).max(lo) && x <= (lambda.re + w).min(hi));
            pts.push((lambda.re - w).max(lo));
            pts.push((lambda.re + w).min(hi));
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if pts.len() < 2 || pts[0] >= pts[pts.len() - 1] {
            return c(0.0);
        }
        let g = |x: f64| (-self.u * (lambda - x) * (lambda - x)).exp() * self.target.eval(x);
        let r = integrate_panels(g, &pts, 1e-13, 1e-12).map(|r| r.value).unwrap_or(c(f64::NAN));
        r * (self.u / PI).sqrt()
    }

    pub fn eval_real(&self, lambda: f64) -> f64 {
        self.eval(c(lambda)).re
    }

    pub fn to_test_function(&self) -> TestFunction {
        let a = self.clone();
        let b = self.clone();
        TestFunction {
            strip: Arc::new(move |nu: C64| a.eval(0.25 - nu * nu)),
            half: Arc::new(move |n| b.eval(c(exceptional_point(n)))),
            decay: 4.0,
            tau: TAU,
            even: true,
            family: Family::General,
            strip_zero: false,
        }
    }
}

pub fn mollify(target: &CompactFn, u: f64) -> Result<Mollified> {
    if !(u > 0.0) {
        return Err(Error::Invalid(format!("u = {u} must be positive")));
    }
    Ok(Mollified { target: target.clone(), u })
}

/// b_A(lambda) = ((1+lambda)/(1+A))^{-2} for lambda >= -1/2,
/// ((1-lambda)/(1+A))^{-2} below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub a: f64,
}

pub fn bump(a: f64) -> Result<Bump> {
    if !(a > 1.0) {
        return Err(Error::Invalid(format!("A = {a} must exceed 1")));
    }
    Ok(Bump { a })
}

impl Bump {
    pub fn eval(&self, lambda: f64) -> f64 {
        let x = if lambda >= -0.5 { 1.0 + lambda } else { 1.0 - lambda };
        ((1.0 + self.a) / x).powi(2)
    }

    /// Holomorphic extension of the lambda >= -1/2 branch on the strip,
    /// exact values on the half-integers.
    pub fn to_test_function(&self) -> TestFunction {
        let a = self.a;
        let me = *self;
        TestFunction {
            strip: Arc::new(move |nu: C64| {
                let x = (1.25 - nu * nu) / (1.0 + a);
                1.0 / (x * x)
            }),
            half: Arc::new(move |n| c(me.eval(exceptional_point(n)))),
            decay: 4.0,
            tau: TAU,
            even: true,
            family: Family::General,
            strip_zero: false,
        }
    }
}

/// k(nu) = (1 - nu^2)^{-2}, which equals (1 + t^2)^{-2} at nu = it.
pub fn rational_profile() -> TestFunction {
    TestFunction {
        strip: Arc::new(|nu: C64| {
            let x = 1.0 - nu * nu;
            1.0 / (x * x)
        }),
        half: Arc::new(|n| {
            let nu = (n as f64 - 1.0) / 2.0;
            let x = 1.0 - nu * nu;
            c(1.0 / (x * x))
        }),
        decay: 4.0,
        tau: TAU,
        even: true,
        family: Family::General,
        strip_zero: false,
    }
}

/// k(nu) = (1 + |Im nu|)^{-a}. Not holomorphic; only meant for the sampled
/// norms, where the weighted supremum is attained everywhere.
pub fn power_profile(a: f64) -> TestFunction {
    TestFunction {
        strip: Arc::new(move |nu: C64| c((1.0 + nu.im.abs()).powf(-a))),
        half: Arc::new(|_| c(0.0)),
        decay: a,
        tau: TAU,
        even: true,
        family: Family::General,
        strip_zero: false,
    }
}

/// Integral of f over [a, b] for a real integrand, used by the oracles here.
pub fn integrate_plain<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    Ok(integrate(|x| c(f(x)), a, b, tol, 0.0)?.value.re)
}
