//! J-Bessel functions of complex order and the transform beta_+.

use std::f64::consts::PI;

use crate::gamma::lgamma;
use crate::{Error, Result, C64};

mod transform;
pub use transform::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Method {
    Series,
    Integral,
    Recurrence,
    Continuation,
    LargeArgument,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BesselEval {
    pub w: C64,
    pub t: f64,
    pub value: C64,
    pub method: Method,
}

pub const MAX_RE_ORDER: f64 = 4.0;
pub const MAX_ARG: f64 = 1e4;
/// largest tolerated ratio max|term| / |sum| before the series is abandoned
const SERIES_MAX_LOSS: f64 = 1e5;
const HANKEL_MIN_ARG: f64 = 25.0;

fn scale_exp(w: C64) -> f64 {
    0.5 * PI * w.im.abs()
}

/// J_w(t) for |Re w| <= 4, 0 < t <= 1e4.
pub fn bessel_j(w: C64, t: f64) -> Result<C64> {
    Ok(bessel_j_eval(w, t)?.value)
}

pub fn bessel_j_eval(w: C64, t: f64) -> Result<BesselEval> {
    let (v, method) = bessel_j_scaled(w, t)?;
    Ok(BesselEval { w, t, value: v * scale_exp(w).exp(), method })
}

/// J_w(t) exp(-pi |Im w| / 2), which stays O(1) for large imaginary order.
pub fn bessel_j_scaled(w: C64, t: f64) -> Result<(C64, Method)> {
    if !(t > 0.0 && t <= MAX_ARG) || w.re.abs() > MAX_RE_ORDER || !w.im.is_finite() {
        return Err(Error::Invalid(format!("J_w(t) outside supported region: w = {w}, t = {t}")));
    }
    Ok(j_auto(w, t))
}

fn j_auto(w: C64, t: f64) -> (C64, Method) {
    if t <= 10f64.max(2.0 * w.norm()) {
        let (v, loss) = j_series_scaled(w, t);
        if loss <= SERIES_MAX_LOSS {
            return (v, Method::Series);
        }
    }
    if t >= HANKEL_MIN_ARG {
        if let Some(v) = j_hankel_scaled(w, t) {
            return (v, Method::LargeArgument);
        }
    }
    if let Some(v) = j_miller_checked(w, t) {
        return (v, Method::Recurrence);
    }
    (j_continued_scaled(w, t), Method::Continuation)
}

fn neg_integer(w: C64) -> Option<i64> {
    (w.im == 0.0 && w.re < 0.0 && w.re.fract() == 0.0).then_some(-w.re as i64)
}

/// Power series, scaled; also returns max|term| / |sum|.
pub fn j_series_scaled(w: C64, t: f64) -> (C64, f64) {
    let (v, _, l) = j_series_scaled_d(w, t);
    (v, l)
}

/// Scaled value, scaled t-derivative and loss estimate from the power series.
fn j_series_scaled_d(w: C64, t: f64) -> (C64, C64, f64) {
    if let Some(m) = neg_integer(w) {
        let (v, d, l) = j_series_scaled_d(C64::new(m as f64, 0.0), t);
        return if m % 2 == 0 { (v, d, l) } else { (-v, -d, l) };
    }
    let h = 0.5 * t;
    let pref = (w * h.ln() - lgamma(w + 1.0) - scale_exp(w)).exp();
    let q = -h * h;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    let mut dsum = w * term;
    let mut big = 1.0f64;
    let mut n = 1.0;
    loop {
        term *= q / (n * (w + n));
        sum += term;
        dsum += (w + 2.0 * n) * term;
        big = big.max(term.norm());
        let shrinking = (q / (n * (w + n))).norm() < 0.5;
        if shrinking && term.norm() <= 1e-17 * sum.norm() || n > 10_000.0 {
            break;
        }
        n += 1.0;
    }
    let loss = if sum.norm() > 0.0 { big / sum.norm() } else { f64::INFINITY };
    (pref * sum, pref * dsum / t, loss)
}

/// Starts from the power series at a point where it is well conditioned and
/// carries (J, J') forward with Taylor steps of the Bessel equation.
pub fn j_continued_scaled(w: C64, t: f64) -> C64 {
    let mut t0 = t.min(10f64.max(w.norm()));
    let (mut y, mut dy, mut loss) = j_series_scaled_d(w, t0);
    while loss > 1e3 && t0 > 0.5 {
        t0 *= 0.7;
        (y, dy, loss) = j_series_scaled_d(w, t0);
    }
    taylor_carry(w, t0, y, dy, t).0
}

/// Starts from the large-argument expansion at the first t1 >= t where it
/// converges (for orders w and w - 1) and carries (J, J') back to t.
pub fn j_continued_back_scaled(w: C64, t: f64) -> Option<C64> {
    let mut t1 = t;
    for _ in 0..60 {
        if let (Some(y), Some(ym)) = (j_hankel_scaled(w, t1), j_hankel_scaled(w - 1.0, t1)) {
            // J_w' = J_{w-1} - (w/t) J_w
            let dy = ym - w / t1 * y;
            return Some(taylor_carry(w, t1, y, dy, t).0);
        }
        t1 *= 1.25;
    }
    None
}

/// Taylor steps of t^2 J'' + t J' + (t^2 - w^2) J = 0 from t0 to t, in
/// either direction.
fn taylor_carry(w: C64, mut t0: f64, mut y: C64, mut dy: C64, t: f64) -> (C64, C64) {
    let w2 = w * w;
    while t0 != t {
        let dir = (t - t0).signum();
        let mut step = (t - t0).abs().min(0.5 * t0).min(1.0);
        if (t - t0).abs() - step < 1e-12 * t {
            step = (t - t0).abs();
        }
        let h = dir * step;
        let mut a = [C64::new(0.0, 0.0); 4];
        // a[k-2], a[k-1], a[k], a[k+1]
        a[2] = y;
        a[3] = dy;
        let mut val = y + dy * h;
        let mut der = dy;
        let mut hp = h;
        let mut k = 0usize;
        loop {
            let kf = k as f64;
            let next = -((2.0 * t0 * kf * (kf + 1.0) + t0 * (kf + 1.0)) * a[3]
                + (kf * kf + t0 * t0 - w2) * a[2]
                + 2.0 * t0 * a[1]
                + a[0])
                / (t0 * t0 * (kf + 1.0) * (kf + 2.0));
            a = [a[1], a[2], a[3], next];
            der += (kf + 2.0) * next * hp;
            hp *= h;
            val += next * hp;
            k += 1;
            let sz = (next * hp).norm();
            if k > 4 && sz < 1e-18 * val.norm().max(1e-300) || k > 400 {
                break;
            }
        }
        y = val;
        dy = der;
        t0 = if step == (t - t0).abs() { t } else { t0 + h };
    }
    (y, dy)
}

/// Hankel asymptotic expansion, scaled; None if it does not reach full
/// precision before the terms start growing.
pub fn j_hankel_scaled(w: C64, t: f64) -> Option<C64> {
    let mu = 4.0 * w * w;
    let mut term = C64::new(1.0, 0.0);
    let mut p = term;
    let mut q = C64::new(0.0, 0.0);
    let mut prev = f64::INFINITY;
    let mut k = 1;
    loop {
        let j = (2 * k - 1) as f64;
        term *= (mu - j * j) / (k as f64 * 8.0 * t);
        let tn = term.norm();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if tn < 1e-17 * p.norm().max(q.norm()) {
            break;
        }
        if tn > prev && k > 2 || k > 200 {
            return None;
        }
        prev = tn;
        k += 1;
    }
    let chi = t - (0.5 * w + 0.25) * PI;
    let i = C64::new(0.0, 1.0);
    let s = scale_exp(w);
    let ep = (i * chi - s).exp();
    let em = (-i * chi - s).exp();
    let cos = 0.5 * (ep + em);
    let sin = (ep - em) / (2.0 * i);
    Some((2.0 / (PI * t)).sqrt() * (p * cos - q * sin))
}

/// Miller backward recurrence normalized by the Neumann series of
/// (t/2)^w / Gamma(w+1), scaled.
pub fn j_miller_scaled(w: C64, t: f64) -> C64 {
    j_miller_loss(w, t).0
}

/// Miller's value, or None when the normalizing sum cancels badly.
pub fn j_miller_checked(w: C64, t: f64) -> Option<C64> {
    let (v, loss) = j_miller_loss(w, t);
    (loss <= SERIES_MAX_LOSS).then_some(v)
}

fn j_miller_loss(w: C64, t: f64) -> (C64, f64) {
    if let Some(m) = neg_integer(w) {
        let (v, l) = j_miller_loss(C64::new(m as f64, 0.0), t);
        return (if m % 2 == 0 { v } else { -v }, l);
    }
    let m = if w.re < 0.0 { (-w.re).ceil() as usize } else { 0 };
    let w0 = w + m as f64;
    let n = (t + w.norm() + 40.0 + 10.0 * t.cbrt()).ceil() as usize + m;
    let mut f = vec![C64::new(0.0, 0.0); n + 2];
    f[n] = C64::new(1e-30, 0.0);
    for k in (1..=n).rev() {
        let v = 2.0 * (w + k as f64) / t * f[k] - f[k + 1];
        f[k - 1] = v;
        if v.norm() > 1e150 {
            for x in f[k - 1..].iter_mut() {
                *x *= 1e-150;
            }
        }
    }
    let mut s = f[m];
    let mut sabs = f[m].norm();
    let mut c = w0 + 2.0;
    let mut j = 1;
    while m + 2 * j <= n {
        s += c * f[m + 2 * j];
        sabs += (c * f[m + 2 * j]).norm();
        j += 1;
        let jf = j as f64;
        c *= (w0 + 2.0 * jf) / (w0 + 2.0 * jf - 2.0) * (w0 + jf - 1.0) / jf;
    }
    let h = 0.5 * t;
    let pref = (w0 * h.ln() - lgamma(w0 + 1.0) - scale_exp(w)).exp();
    let sn = s.norm();
    ((f[0] / sn) * pref / (s / sn), sabs / sn)
}

/// Mellin-Barnes integral
/// J_mu(t) = 1/(2 pi i) int (t/2)^{-2s} Gamma(mu/2 + s) / Gamma(1 + mu/2 - s) ds
/// on Re s = c for |Im s| <= U, bent to the left beyond. The poles
/// -mu/2 - n all have Im s = -Im mu/2, so U just above |Im mu/2| keeps them
/// to the left.
pub fn j_mellin_barnes(mu: C64, t: f64, tol: f64) -> Result<C64> {
    let half = 0.5 * mu;
    let c = -half.re + 0.75;
    let big_u = half.im.abs() + 1.0;
    let lh = (0.5 * t).ln();
    let i = C64::new(0.0, 1.0);
    let sc = scale_exp(mu);
    let point = |u: f64| -> (C64, C64) {
        if u.abs() <= big_u {
            (C64::new(c, u), i)
        } else {
            (C64::new(c - (u.abs() - big_u), u), C64::new(-u.signum(), 1.0))
        }
    };
    let logg = |u: f64| -> C64 {
        let s = point(u).0;
        -2.0 * s * lh + lgamma(half + s) - lgamma(1.0 + half - s) - sc
    };
    let g = |u: f64| -> C64 { logg(u).exp() * point(u).1 / (2.0 * PI * i) };
    let mut peak = f64::NEG_INFINITY;
    let mut u = -60.0 - big_u;
    while u <= 60.0 + big_u {
        peak = peak.max(logg(u).re);
        u += 0.25;
    }
    let reach = |dir: f64| -> f64 {
        let mut u = big_u + 1.0;
        while logg(dir * u).re > peak - 46.0 && u < 1e3 {
            u += 1.0;
        }
        u
    };
    let pts = [-reach(-1.0), -big_u, 0.0, big_u, reach(1.0)];
    let r = crate::quad::integrate_panels(&g, &pts, tol * peak.exp(), tol)?;
    Ok(r.value * sc.exp())
}

/// J_0(t), ..., J_nmax(t) for integer orders (any size), by Miller's
/// algorithm with J_0 + 2 sum J_{2k} = 1.
pub fn bessel_jn_all(nmax: usize, t: f64) -> Vec<f64> {
    assert!(t > 0.0);
    let n = (nmax as f64).max(t).ceil() as usize + 40 + (10.0 * t.cbrt()) as usize;
    let mut f = vec![0.0f64; n + 2];
    f[n] = 1e-30;
    for k in (1..=n).rev() {
        f[k - 1] = 2.0 * k as f64 / t * f[k] - f[k + 1];
        if f[k - 1].abs() > 1e150 {
            for x in f[k - 1..].iter_mut() {
                *x *= 1e-150;
            }
        }
    }
    let s: f64 = f[0] + 2.0 * f[2..].iter().step_by(2).sum::<f64>();
    f.truncate(nmax + 1);
    f.iter().map(|x| x / s).collect()
}
