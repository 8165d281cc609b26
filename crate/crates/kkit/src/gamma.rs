//! Complex Gamma function (Lanczos, g = 7) with reflection.

use std::f64::consts::PI;

use crate::C64;

const G: f64 = 7.0;
const COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(z: C64) -> C64 {
    // z is the shifted argument (Gamma(z+1) form)
    let mut x = C64::new(COEF[0], 0.0);
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    x
}

/// log Gamma(z) for Re z >= 1/2 (principal branch of the Lanczos form).
fn lgamma_right(z: C64) -> C64 {
    let z = z - 1.0;
    let t = z + G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

/// log Gamma(z); any branch (only its exponential is meaningful).
pub fn lgamma(z: C64) -> C64 {
    if z.re >= 0.5 {
        lgamma_right(z)
    } else {
        // Gamma(z) = pi / (sin(pi z) Gamma(1 - z))
        C64::new(PI.ln(), 0.0) - sin_pi(z).ln() - lgamma_right(1.0 - z)
    }
}

pub fn gamma(z: C64) -> C64 {
    if z.re >= 0.5 {
        lgamma_right(z).exp()
    } else {
        let s = sin_pi(z);
        if s == C64::new(0.0, 0.0) {
            return C64::new(f64::INFINITY, 0.0);
        }
        PI / (s * lgamma_right(1.0 - z).exp())
    }
}

/// 1 / Gamma(z), exactly zero at the poles.
pub fn rgamma(z: C64) -> C64 {
    if z.re >= 0.5 {
        (-lgamma_right(z)).exp()
    } else {
        sin_pi(z) * lgamma_right(1.0 - z).exp() / PI
    }
}

/// sin(pi z) with exact zeros at integers.
pub fn sin_pi(z: C64) -> C64 {
    let r = z.re - 2.0 * (z.re / 2.0).round();
    let (s, c) = if r.fract() == 0.0 {
        (0.0, if r == 0.0 { 1.0 } else { -1.0 })
    } else {
        ((PI * r).sin(), (PI * r).cos())
    };
    let y = PI * z.im;
    C64::new(s * y.cosh(), c * y.sinh())
}

/// cos(pi z) with exact zeros at half-integers.
pub fn cos_pi(z: C64) -> C64 {
    sin_pi(C64::new(z.re + 0.5, z.im))
}

pub fn gamma_real(x: f64) -> f64 {
    gamma(C64::new(x, 0.0)).re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_and_half() {
        let mut f = 1.0;
        for n in 1..20 {
            let g = gamma_real(n as f64);
            assert!((g / f - 1.0).abs() < 1e-13, "{n}");
            f *= n as f64;
        }
        assert!((gamma_real(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma_real(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert_eq!(rgamma(C64::new(-3.0, 0.0)), C64::new(0.0, 0.0));
    }

    #[test]
    fn recurrence_and_reflection() {
        for &(x, y) in &[(0.3, 2.0), (-2.7, 0.4), (4.1, -7.5), (0.5, 30.0), (-3.5, -1.0)] {
            let z = C64::new(x, y);
            let lhs = gamma(z + 1.0);
            let rhs = z * gamma(z);
            assert!((lhs / rhs - 1.0).norm() < 1e-13, "{z}");
            let refl = gamma(z) * gamma(1.0 - z) * sin_pi(z) / PI;
            assert!((refl - 1.0).norm() < 1e-12, "{z}");
        }
    }

    #[test]
    fn abs_on_imaginary_axis() {
        // |Gamma(iy)|^2 = pi / (y sinh(pi y))
        for y in [0.1, 1.0, 5.0, 20.0] {
            let g = gamma(C64::new(0.0, y)).norm_sqr();
            let want = PI / (y * (PI * y).sinh());
            assert!((g / want - 1.0).abs() < 1e-12, "{y}");
        }
    }
}
