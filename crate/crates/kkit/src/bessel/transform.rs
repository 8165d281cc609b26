use std::f64::consts::PI;

use serde::Serialize;

use super::{bessel_j_scaled, bessel_jn_all};
use crate::quad::integrate_panels;
use crate::testfn::{Family, TestFunction};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesselTransform {
    pub alpha: f64,
    pub y: f64,
    pub value: C64,
    pub continuous: C64,
    pub discrete: C64,
    pub err: f64,
}

/// Bound for int_T^inf |k(alpha + iu)| (1 + u) du.
fn strip_tail(k: &TestFunction, alpha: f64, t: f64) -> f64 {
    match k.family {
        Family::Plus(s) => {
            // |k| = e^{-s(1/4 - alpha^2 + u^2)}
            let g = (-s * (0.25 - alpha * alpha + t * t)).exp();
            g * (1.0 / (2.0 * s) + 1.0 / (2.0 * s * t))
        }
        _ if k.strip_zero => 0.0,
        Family::Gaussian { s, c } => c * (-s * t * t).exp() * (1.0 / (2.0 * s) + 1.0 / (2.0 * s * t)),
        _ => {
            let m = crate::testfn::norms(k, alpha, k.decay).map(|n| n.n_alpha).unwrap_or(f64::INFINITY);
            m * (1.0 + t).powf(2.0 - k.decay) / (k.decay - 2.0)
        }
    }
}

fn cutoff(k: &TestFunction, alpha: f64, tol: f64) -> f64 {
    let mut t = 4.0;
    while strip_tail(k, alpha, t) > tol && t < 1e7 {
        t *= 1.2;
    }
    t
}

fn panels(t_max: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut p = 0.5;
    while p < t_max {
        pts.push(p);
        p *= 1.6;
    }
    pts.push(t_max);
    pts
}

/// 2 sum_{b >= b0, b even} (-1)^{b/2} (b-1)/2 k((b-1)/2) J_{b-1}(x).
pub fn discrete_part(k: &TestFunction, x: f64, b0: u64) -> C64 {
    // J_n(x) is negligible once n exceeds this
    let n_j = (x + 60.0 + 12.0 * x.cbrt()).ceil() as u64;
    let mut ks = Vec::new();
    let mut b = b0;
    let mut small = 0;
    while b <= n_j + 1 {
        let v = k.at_half(b);
        ks.push((b, v));
        if v.norm() * b as f64 <= 1e-300 && b > 64 {
            small += 1;
            if small >= 5 {
                break;
            }
        } else {
            small = 0;
        }
        b += 2;
    }
    let nmax = ks.last().map(|&(b, _)| b as usize - 1).unwrap_or(1);
    let j = bessel_jn_all(nmax, x);
    let mut sum = C64::new(0.0, 0.0);
    for (b, v) in ks {
        let sign = if (b / 2) % 2 == 0 { 1.0 } else { -1.0 };
        sum += 2.0 * sign * (b as f64 - 1.0) / 2.0 * v * j[b as usize - 1];
    }
    sum
}

/// beta_+ k(y) with the continuous part on Re nu = alpha, alpha in {0} or
/// (1/2, tau].
pub fn bessel_transform_plus(k: &TestFunction, y: f64, alpha: f64, tol: f64) -> Result<BesselTransform> {
    if !(y > 0.0) {
        return Err(Error::Invalid(format!("y = {y} must be positive")));
    }
    if !(alpha == 0.0 || alpha > 0.5 && alpha <= k.tau) {
        return Err(Error::Invalid(format!("contour Re nu = {alpha} not in {{0}} or (1/2, tau]")));
    }
    let x = 4.0 * PI * y.sqrt();
    let b0 = if alpha == 0.0 { 2 } else { 4 };
    let discrete = discrete_part(k, x, b0);
    if k.strip_zero {
        return Ok(BesselTransform { alpha, y, value: discrete, continuous: C64::new(0.0, 0.0), discrete, err: 0.0 });
    }
    let (continuous, err) = if alpha == 0.0 {
        // -2 int_0^inf k(it) Im J_{2it}(x) t / cosh(pi t) dt; |J_{2it}| e^{-pi t} <= 1
        let t_max = cutoff(k, 0.0, tol / 16.0);
        let f = |t: f64| {
            let (j, _) = bessel_j_scaled(C64::new(0.0, 2.0 * t), x).unwrap_or((C64::new(f64::NAN, 0.0), super::Method::Series));
            -2.0 * k.eval(C64::new(0.0, t)) * (t * j.im * 2.0 / (1.0 + (-2.0 * PI * t).exp()))
        };
        let r = integrate_panels(f, &panels(t_max), tol / 2.0, 1e-13)?;
        (r.value, r.err + 4.0 * strip_tail(k, 0.0, t_max))
    } else {
        // int_R k(nu) J_{2nu}(x) nu / cos(pi nu) du, nu = alpha + iu
        let (sa, ca) = (PI * alpha).sin_cos();
        let jmax = 1f64.max((0.5 * x).powf(2.0 * alpha));
        let t_max = cutoff(k, alpha, tol / (16.0 * jmax / sa.abs()));
        let f = |u: f64| {
            let nu = C64::new(alpha, u);
            let (j, _) = bessel_j_scaled(2.0 * nu, x).unwrap_or((C64::new(f64::NAN, 0.0), super::Method::Series));
            let e = (-2.0 * PI * u.abs()).exp();
            let cs = C64::new(ca * (1.0 + e) / 2.0, -sa * u.signum() * (1.0 - e) / 2.0);
            k.eval(nu) * j * nu / cs
        };
        let mut pts: Vec<f64> = panels(t_max).iter().rev().map(|p| -p).collect();
        pts.pop();
        pts.extend(panels(t_max));
        let r = integrate_panels(f, &pts, tol / 2.0, 1e-13)?;
        (r.value, r.err + 2.0 * 2.0 * jmax / sa.abs() * strip_tail(k, alpha, t_max))
    };
    Ok(BesselTransform { alpha, y, value: continuous + discrete, continuous, discrete, err })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub s: f64,
    pub y: f64,
    pub value: C64,
    pub envelope: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub rows: Vec<BoundRow>,
    pub max_ratio: f64,
    /// least-squares slope of log|beta| against log y over y <= 1e-3, per s
    pub small_y_slopes: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// Envelope min(s^{alpha-1-eps} y^alpha, 1/s) for Q_+,
/// min(s^{alpha-1} y^alpha, s^{-1/2}) for Q_-.
pub fn bessel_envelope(sign: Sign, s: f64, y: f64, alpha: f64, eps: f64) -> f64 {
    match sign {
        Sign::Plus => (s.powf(alpha - 1.0 - eps) * y.powf(alpha)).min(1.0 / s),
        Sign::Minus => (s.powf(alpha - 1.0) * y.powf(alpha)).min(s.powf(-0.5)),
    }
}

pub fn family(sign: Sign, s: f64) -> Result<TestFunction> {
    match sign {
        Sign::Plus => crate::testfn::special_plus(s),
        Sign::Minus => crate::testfn::special_minus(s),
    }
}

pub fn verify_bessel_bounds(sign: Sign, s_grid: &[f64], y_grid: &[f64], alpha: f64, eps: f64) -> Result<BoundsReport> {
    use rayon::prelude::*;
    if !(alpha > 0.5 && alpha <= crate::testfn::TAU) {
        return Err(Error::Invalid(format!("alpha = {alpha} not in (1/2, tau]")));
    }
    let jobs: Vec<(f64, f64)> = s_grid.iter().flat_map(|&s| y_grid.iter().map(move |&y| (s, y))).collect();
    let rows: Vec<BoundRow> = jobs
        .par_iter()
        .map(|&(s, y)| {
            let k = family(sign, s)?;
            let v = bessel_transform_plus(&k, y, alpha, 1e-10)?.value;
            let env = bessel_envelope(sign, s, y, alpha, eps);
            Ok(BoundRow { s, y, value: v, envelope: env, ratio: v.norm() / env })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mut small_y_slopes = Vec::new();
    for &s in s_grid {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.s == s && r.y <= 1e-3 && r.value.norm() > 0.0)
            .map(|r| (r.y.ln(), r.value.norm().ln()))
            .collect();
        if pts.len() >= 2 {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            small_y_slopes.push((s, sxy / sxx));
        }
    }
    Ok(BoundsReport { rows, max_ratio, small_y_slopes })
}
