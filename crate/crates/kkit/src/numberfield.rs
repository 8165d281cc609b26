//! Arithmetic in Q and in real quadratic fields Q(sqrt D).
//!
//! Integers are stored in the basis {1, w}, with w = (1+sqrt D)/2 when
//! D = 1 mod 4 and w = sqrt D otherwise, so that w^2 = t*w + n.
//! Ideals are Z-lattices a*Z + (b + c*w)*Z in Hermite normal form.

use std::fmt;

use serde::Serialize;

use crate::arith;
use crate::{Error, Result};

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Default, PartialOrd, Ord, Serialize)]
pub struct AlgInt {
    pub a: i64,
    pub b: i64,
}

impl AlgInt {
    pub const ZERO: AlgInt = AlgInt { a: 0, b: 0 };
    pub const ONE: AlgInt = AlgInt { a: 1, b: 0 };

    pub fn new(a: i64, b: i64) -> Self {
        AlgInt { a, b }
    }

    pub fn int(a: i64) -> Self {
        AlgInt { a, b: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }
}

impl fmt::Display for AlgInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a, self.b) {
            (a, 0) => write!(f, "{a}"),
            (0, b) => write!(f, "{b}*w"),
            (a, b) if b < 0 => write!(f, "{a}-{}*w", -b),
            (a, b) => write!(f, "{a}+{b}*w"),
        }
    }
}

pub(crate) fn narrow(v: i128) -> i64 {
    i64::try_from(v).unwrap_or_else(|_| panic!("{}", Error::Overflow))
}

/// An element num/den of F, den > 0.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct FieldElt {
    pub num: AlgInt,
    pub den: i64,
}

impl FieldElt {
    pub fn new(num: AlgInt, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let s = den.signum();
        let g = arith::gcd(arith::gcd(num.a as i128, num.b as i128), den as i128) as i64;
        let g = if g == 0 { 1 } else { g };
        FieldElt {
            num: AlgInt::new(s * num.a / g, s * num.b / g),
            den: s * den / g,
        }
    }

    pub fn int(x: AlgInt) -> Self {
        FieldElt { num: x, den: 1 }
    }
}

impl fmt::Display for FieldElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/{}", self.num, self.den)
        }
    }
}

/// Integral ideal as the lattice a*Z + (b + c*w)*Z; for F = Q only `a` matters.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize)]
pub struct Ideal {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl Ideal {
    pub const UNIT: Ideal = Ideal { a: 1, b: 0, c: 1 };

    pub fn norm(&self) -> u64 {
        (self.a as u64) * (self.c as u64)
    }

    pub fn basis(&self) -> [AlgInt; 2] {
        [AlgInt::int(self.a), AlgInt::new(self.b, self.c)]
    }

    pub fn is_unit(&self) -> bool {
        *self == Ideal::UNIT
    }
}

impl fmt::Display for Ideal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}; {}]", self.a, AlgInt::new(self.b, self.c))
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize)]
pub enum Splitting {
    Split,
    Inert,
    Ramified,
}

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize)]
pub struct PrimeIdeal {
    pub ideal: Ideal,
    pub p: u64,
    /// residue degree
    pub f: u32,
}

impl PrimeIdeal {
    pub fn norm(&self) -> u64 {
        self.ideal.norm()
    }
}

/// Subgroup of the unit group generated by `gen = sign * eps0^m`, together
/// with -1 when `has_neg`.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize)]
pub struct UnitSubgroup {
    pub m: u32,
    pub sign: i64,
    pub has_neg: bool,
}

#[derive(Copy, Clone, Debug)]
pub enum EnumMode {
    /// all lattice points with max_j |x_j| <= bound
    Box,
    /// one point per orbit of the unit subgroup, |N(x)| <= bound; the
    /// section is log|x1/x2| in [shift, shift + 2 m log eps0)
    UpToUnits { group: UnitSubgroup, shift: Option<f64> },
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldContext {
    pub d: usize,
    pub dd: i64,
    pub disc: i64,
    pub t: i64,
    pub n: i64,
    pub eps0: AlgInt,
    pub eps0_norm: i64,
    pub different: AlgInt,
    /// real images of w
    pub sigma: [f64; 2],
    /// log of the larger embedding of eps0 (0 for Q)
    pub log_eps: f64,
}

impl FieldContext {
    pub fn new(dd: i64) -> Result<Self> {
        if dd < 1 || !arith::is_squarefree(dd as u64) {
            return Err(Error::NotSquarefree(dd));
        }
        if dd == 1 {
            return Ok(FieldContext {
                d: 1,
                dd: 1,
                disc: 1,
                t: 0,
                n: 0,
                eps0: AlgInt::ONE,
                eps0_norm: 1,
                different: AlgInt::ONE,
                sigma: [0.0, 0.0],
                log_eps: 0.0,
            });
        }
        let (t, n, disc) = if dd % 4 == 1 {
            (1, (dd - 1) / 4, dd)
        } else {
            (0, dd, 4 * dd)
        };
        let sd = (disc as f64).sqrt();
        let sigma = [(t as f64 + sd) / 2.0, (t as f64 - sd) / 2.0];
        let mut f = FieldContext {
            d: 2,
            dd,
            disc,
            t,
            n,
            eps0: AlgInt::ONE,
            eps0_norm: 1,
            different: AlgInt::new(-t, 2),
            sigma,
            log_eps: 0.0,
        };
        let e = f.fundamental_unit()?;
        f.eps0 = e;
        f.eps0_norm = f.norm(e) as i64;
        f.log_eps = f.embed(e)[0].abs().ln();
        Ok(f)
    }

    /// Continued fraction of -w' = (sqrt(D_F) - t)/2; the first convergent
    /// p/q with N(p + q w) = +-1 gives eps0.
    fn fundamental_unit(&self) -> Result<AlgInt> {
        let dd = self.dd as i128;
        let s = arith::isqrt(dd as u128) as i128;
        let (mut pp, mut qq) = if self.t == 1 { (-1i128, 2i128) } else { (0, 1) };
        let (mut p0, mut p1) = (0i128, 1i128);
        let (mut q0, mut q1) = (1i128, 0i128);
        for _ in 0..100_000 {
            let a = (pp + s).div_euclid(qq);
            let p2 = a * p1 + p0;
            let q2 = a * q1 + q0;
            if p2.abs() > (1 << 62) || q2.abs() > (1 << 62) {
                return Err(Error::Overflow);
            }
            let cand = AlgInt::new(p2 as i64, q2 as i64);
            if self.norm(cand).abs() == 1 {
                return Ok(cand);
            }
            (p0, p1, q0, q1) = (p1, p2, q1, q2);
            pp = a * qq - pp;
            qq = (dd - pp * pp) / qq;
        }
        Err(Error::Numerical("continued fraction did not reach a unit".into()))
    }

    pub fn is_rational(&self) -> bool {
        self.d == 1
    }

    pub fn add(&self, x: AlgInt, y: AlgInt) -> AlgInt {
        AlgInt::new(narrow(x.a as i128 + y.a as i128), narrow(x.b as i128 + y.b as i128))
    }

    pub fn sub(&self, x: AlgInt, y: AlgInt) -> AlgInt {
        AlgInt::new(narrow(x.a as i128 - y.a as i128), narrow(x.b as i128 - y.b as i128))
    }

    pub fn neg(&self, x: AlgInt) -> AlgInt {
        AlgInt::new(-x.a, -x.b)
    }

    pub fn scale(&self, x: AlgInt, k: i64) -> AlgInt {
        AlgInt::new(narrow(x.a as i128 * k as i128), narrow(x.b as i128 * k as i128))
    }

    pub fn mul_wide(&self, x: AlgInt, y: AlgInt) -> (i128, i128) {
        let (a, b, c, d) = (x.a as i128, x.b as i128, y.a as i128, y.b as i128);
        let bd = b * d;
        (a * c + bd * self.n as i128, a * d + b * c + bd * self.t as i128)
    }

    pub fn mul(&self, x: AlgInt, y: AlgInt) -> AlgInt {
        let (u, v) = self.mul_wide(x, y);
        AlgInt::new(narrow(u), narrow(v))
    }

    pub fn checked_mul(&self, x: AlgInt, y: AlgInt) -> Result<AlgInt> {
        let (a, b, c, d) = (x.a as i128, x.b as i128, y.a as i128, y.b as i128);
        let bd = b.checked_mul(d).ok_or(Error::Overflow)?;
        let u = a
            .checked_mul(c)
            .and_then(|v| v.checked_add(bd.checked_mul(self.n as i128)?))
            .ok_or(Error::Overflow)?;
        let v = a
            .checked_mul(d)
            .and_then(|v| v.checked_add(b.checked_mul(c)?))
            .and_then(|v| v.checked_add(bd.checked_mul(self.t as i128)?))
            .ok_or(Error::Overflow)?;
        Ok(AlgInt::new(
            i64::try_from(u).map_err(|_| Error::Overflow)?,
            i64::try_from(v).map_err(|_| Error::Overflow)?,
        ))
    }

    pub fn conj(&self, x: AlgInt) -> AlgInt {
        if self.d == 1 {
            x
        } else {
            // w' = t - w
            AlgInt::new(narrow(x.a as i128 + x.b as i128 * self.t as i128), -x.b)
        }
    }

    pub fn trace(&self, x: AlgInt) -> i128 {
        if self.d == 1 {
            x.a as i128
        } else {
            2 * x.a as i128 + x.b as i128 * self.t as i128
        }
    }

    pub fn norm(&self, x: AlgInt) -> i128 {
        if self.d == 1 {
            x.a as i128
        } else {
            let (a, b) = (x.a as i128, x.b as i128);
            a * a + a * b * self.t as i128 - self.n as i128 * b * b
        }
    }

    pub fn trace_and_norm(&self, x: AlgInt) -> (i128, i128) {
        (self.trace(x), self.norm(x))
    }

    pub fn pow(&self, x: AlgInt, e: u32) -> AlgInt {
        let mut r = AlgInt::ONE;
        for _ in 0..e {
            r = self.mul(r, x);
        }
        r
    }

    /// eps0^k for any integer k.
    pub fn unit_pow(&self, k: i64) -> AlgInt {
        if self.d == 1 {
            return AlgInt::ONE;
        }
        let base = if k >= 0 {
            self.eps0
        } else {
            self.scale(self.conj(self.eps0), self.eps0_norm)
        };
        self.pow(base, k.unsigned_abs() as u32)
    }

    /// (x^{sigma_1}, x^{sigma_2}); the smaller image is recomputed from the
    /// exact norm so both carry full relative accuracy.
    pub fn embed2(&self, x: AlgInt) -> [f64; 2] {
        if self.d == 1 {
            return [x.a as f64, x.a as f64];
        }
        let u = x.a as f64 + x.b as f64 * self.sigma[0];
        let v = x.a as f64 + x.b as f64 * self.sigma[1];
        if x.b == 0 || x.a == 0 {
            return [u, v];
        }
        let nm = self.norm(x) as f64;
        if u.abs() >= v.abs() {
            [u, nm / u]
        } else {
            [nm / v, v]
        }
    }

    pub fn embed(&self, x: AlgInt) -> Vec<f64> {
        self.embed2(x)[..self.d].to_vec()
    }

    pub fn embed_elt(&self, r: FieldElt) -> [f64; 2] {
        let e = self.embed2(r.num);
        [e[0] / r.den as f64, e[1] / r.den as f64]
    }

    /// 1/delta for the different generator delta.
    pub fn dual_generator(&self) -> FieldElt {
        if self.d == 1 {
            FieldElt::int(AlgInt::ONE)
        } else {
            // delta^2 = D_F, so 1/delta = delta / D_F
            FieldElt::new(self.different, self.disc)
        }
    }

    /// rational trace of num*y / den as (numerator, denominator)
    pub fn trace_elt(&self, r: FieldElt, y: AlgInt) -> (i128, i128) {
        let (u, v) = self.mul_wide(r.num, y);
        let tr = if self.d == 1 { u } else { 2 * u + v * self.t as i128 };
        (tr, r.den as i128)
    }

    /// r in the inverse different: Tr(r) and Tr(r w) integral.
    pub fn is_dual(&self, r: FieldElt) -> bool {
        let (t0, den) = self.trace_elt(r, AlgInt::ONE);
        if t0 % den != 0 {
            return false;
        }
        if self.d == 1 {
            return true;
        }
        let (t1, den) = self.trace_elt(r, AlgInt::new(0, 1));
        t1 % den == 0
    }

    pub fn elt_mul_int(&self, r: FieldElt, x: AlgInt) -> FieldElt {
        FieldElt::new(self.mul(r.num, x), r.den)
    }

    // ---------------------------------------------------------------- ideals

    fn hnf(&self, vecs: &[(i128, i128)]) -> Result<Ideal> {
        let (mut a, mut bx, mut c) = (0i128, 0i128, 0i128);
        for &(x, y) in vecs {
            if y == 0 {
                a = arith::gcd(a, x);
            } else if c == 0 {
                bx = x;
                c = y;
            } else {
                let (g, u, v) = arith::xgcd(c, y);
                let k = (y / g) * bx - (c / g) * x;
                a = arith::gcd(a, k);
                bx = u * bx + v * x;
                c = g;
            }
            if a > 0 {
                bx = bx.rem_euclid(a);
            }
        }
        if c < 0 {
            c = -c;
            bx = -bx;
        }
        if a == 0 || c == 0 {
            return Err(Error::Zero);
        }
        let to64 = |v: i128| i64::try_from(v).map_err(|_| Error::Overflow);
        Ok(Ideal {
            a: to64(a)?,
            b: to64(bx.rem_euclid(a))?,
            c: to64(c)?,
        })
    }

    pub fn ideal_from_gens(&self, gens: &[AlgInt]) -> Result<Ideal> {
        if self.d == 1 {
            let g = gens.iter().fold(0i128, |g, x| arith::gcd(g, x.a as i128));
            if g == 0 {
                return Err(Error::Zero);
            }
            return Ok(Ideal { a: g as i64, b: 0, c: 1 });
        }
        let mut v = Vec::with_capacity(2 * gens.len());
        for &g in gens {
            v.push((g.a as i128, g.b as i128));
            v.push(self.mul_wide(g, AlgInt::new(0, 1)));
        }
        self.hnf(&v)
    }

    pub fn principal(&self, x: AlgInt) -> Result<Ideal> {
        self.ideal_from_gens(&[x])
    }

    pub fn ideal_int(&self, m: i64) -> Ideal {
        if self.d == 1 {
            Ideal { a: m.abs(), b: 0, c: 1 }
        } else {
            Ideal { a: m.abs(), b: 0, c: m.abs() }
        }
    }

    pub fn ideal_mul(&self, x: &Ideal, y: &Ideal) -> Ideal {
        if self.d == 1 {
            return Ideal { a: narrow(x.a as i128 * y.a as i128), b: 0, c: 1 };
        }
        let bx = x.basis();
        let by = y.basis();
        let v: Vec<(i128, i128)> = bx
            .iter()
            .flat_map(|&u| by.iter().map(move |&w| (u, w)))
            .map(|(u, w)| self.mul_wide(u, w))
            .collect();
        self.hnf(&v).expect("product of nonzero ideals")
    }

    pub fn ideal_pow(&self, x: &Ideal, e: u32) -> Ideal {
        (0..e).fold(Ideal::UNIT, |acc, _| self.ideal_mul(&acc, x))
    }

    pub fn ideal_add(&self, x: &Ideal, y: &Ideal) -> Ideal {
        if self.d == 1 {
            return Ideal { a: arith::gcd(x.a as i128, y.a as i128) as i64, b: 0, c: 1 };
        }
        let v: Vec<(i128, i128)> = x
            .basis()
            .iter()
            .chain(y.basis().iter())
            .map(|g| (g.a as i128, g.b as i128))
            .collect();
        self.hnf(&v).expect("sum of nonzero ideals")
    }

    pub fn ideal_conj(&self, x: &Ideal) -> Ideal {
        if self.d == 1 {
            return *x;
        }
        let v: Vec<(i128, i128)> = x
            .basis()
            .iter()
            .map(|&g| {
                let c = self.conj(g);
                (c.a as i128, c.b as i128)
            })
            .collect();
        self.hnf(&v).expect("conjugate of a nonzero ideal")
    }

    pub fn contains(&self, id: &Ideal, x: AlgInt) -> bool {
        if self.d == 1 {
            return x.a % id.a == 0;
        }
        if x.b % id.c != 0 {
            return false;
        }
        let k = x.b as i128 / id.c as i128;
        (x.a as i128 - k * id.b as i128) % id.a as i128 == 0
    }

    /// y is contained in x, i.e. x divides y.
    pub fn ideal_divides(&self, x: &Ideal, y: &Ideal) -> bool {
        if self.d == 1 {
            return y.a % x.a == 0;
        }
        y.basis().iter().all(|&g| self.contains(x, g))
    }

    /// x / m for an integer m dividing every element of x.
    pub fn ideal_div_int(&self, x: &Ideal, m: i64) -> Option<Ideal> {
        if self.d == 1 {
            return (x.a % m == 0).then(|| Ideal { a: x.a / m, b: 0, c: 1 });
        }
        if x.a % m != 0 || x.b % m != 0 || x.c % m != 0 {
            return None;
        }
        Some(Ideal { a: x.a / m, b: x.b / m, c: x.c / m })
    }

    /// x / y when y divides x (uses y * conj(y) = (N y)).
    pub fn ideal_div(&self, x: &Ideal, y: &Ideal) -> Option<Ideal> {
        if !self.ideal_divides(y, x) {
            return None;
        }
        if self.d == 1 {
            return Some(Ideal { a: x.a / y.a, b: 0, c: 1 });
        }
        let p = self.ideal_mul(x, &self.ideal_conj(y));
        self.ideal_div_int(&p, y.norm() as i64)
    }

    pub fn ideal_lcm(&self, x: &Ideal, y: &Ideal) -> Ideal {
        let p = self.ideal_mul(x, y);
        let s = self.ideal_add(x, y);
        self.ideal_div(&p, &s).expect("gcd divides product")
    }

    pub fn coprime(&self, x: &Ideal, y: &Ideal) -> bool {
        self.ideal_add(x, y).is_unit()
    }

    /// Prime ideals above the rational prime p.
    pub fn primes_above(&self, p: u64) -> Vec<PrimeIdeal> {
        if self.d == 1 {
            return vec![PrimeIdeal { ideal: self.ideal_int(p as i64), p, f: 1 }];
        }
        let k = arith::kronecker(self.disc, p);
        if k == -1 {
            return vec![PrimeIdeal { ideal: self.ideal_int(p as i64), p, f: 2 }];
        }
        let r = self.root_mod(p);
        let mk = |r: u64| {
            let id = self
                .ideal_from_gens(&[AlgInt::int(p as i64), AlgInt::new(-(r as i64), 1)])
                .expect("nonzero");
            PrimeIdeal { ideal: id, p, f: 1 }
        };
        if k == 0 {
            vec![mk(r)]
        } else {
            let r2 = (self.t as u64 + p - r) % p;
            let mut v = vec![mk(r), mk(r2)];
            v.sort();
            v
        }
    }

    /// a root of x^2 - t x - n mod p (exists for split or ramified p)
    fn root_mod(&self, p: u64) -> u64 {
        let (t, n) = (self.t as i128, self.n as i128);
        let pi = p as i128;
        if p < 64 {
            for x in 0..pi {
                if (x * x - t * x - n).rem_euclid(pi) == 0 {
                    return x as u64;
                }
            }
            unreachable!("no root of the minimal polynomial mod {p}");
        }
        if self.t == 0 {
            arith::sqrt_mod(n.rem_euclid(pi) as u64, p).expect("residue")
        } else {
            let s = arith::sqrt_mod((self.dd as i128).rem_euclid(pi) as u64, p).expect("residue") as i128;
            let inv2 = (pi + 1) / 2;
            ((1 + s) * inv2).rem_euclid(pi) as u64
        }
    }

    pub fn valuation(&self, x: &Ideal, p: &PrimeIdeal) -> u32 {
        let mut v = 0;
        let mut cur = *x;
        while let Some(q) = self.ideal_div(&cur, &p.ideal) {
            cur = q;
            v += 1;
        }
        v
    }

    /// v_P of an element of F (may be negative)
    pub fn valuation_elt(&self, r: FieldElt, p: &PrimeIdeal) -> i64 {
        let num = self.principal(r.num).expect("nonzero");
        let den = self.ideal_int(r.den);
        self.valuation(&num, p) as i64 - self.valuation(&den, p) as i64
    }

    pub fn factor_ideal(&self, x: &Ideal) -> Result<Vec<(PrimeIdeal, u32)>> {
        let nm = x.norm();
        if nm > (1u64 << 60) {
            return Err(Error::Range(nm as u128));
        }
        let mut out = Vec::new();
        let mut cur = *x;
        for (p, _) in arith::factor(nm) {
            for pr in self.primes_above(p) {
                let mut e = 0;
                while let Some(q) = self.ideal_div(&cur, &pr.ideal) {
                    cur = q;
                    e += 1;
                }
                if e > 0 {
                    out.push((pr, e));
                }
            }
        }
        debug_assert!(cur.is_unit());
        Ok(out)
    }

    pub fn different_ideal(&self) -> Ideal {
        self.principal(self.different).expect("nonzero")
    }

    // ------------------------------------------------------------- residues

    pub fn residue_ring(&self, c: AlgInt) -> Result<ResidueRing> {
        if c.is_zero() {
            return Err(Error::Zero);
        }
        Ok(ResidueRing { ideal: self.principal(c)?, d: self.d })
    }

    pub fn residues_mod(&self, c: AlgInt) -> Result<Vec<AlgInt>> {
        Ok(self.residue_ring(c)?.reps().collect())
    }

    /// Pairs (d, a) with a d = 1 mod (c), d over invertible residues.
    pub fn invertible_residues_mod(&self, c: AlgInt) -> Result<Vec<(AlgInt, AlgInt)>> {
        let rr = self.residue_ring(c)?;
        Ok(rr
            .reps()
            .filter_map(|d| rr.inverse(self, d).map(|a| (d, a)))
            .collect())
    }

    // ---------------------------------------------------------------- units

    /// +-eps0^n with max_j |eps^{sigma_j}| <= bound.
    pub fn enumerate_units(&self, bound: f64) -> Vec<AlgInt> {
        if self.d == 1 {
            return if bound >= 1.0 { vec![AlgInt::ONE, AlgInt::int(-1)] } else { vec![] };
        }
        let mut out = Vec::new();
        if bound < 1.0 {
            return out;
        }
        let kmax = (bound.ln() / self.log_eps).floor() as i64 + 1;
        for k in -kmax..=kmax {
            let e = self.unit_pow(k);
            let em = self.embed2(e);
            if em[0].abs().max(em[1].abs()) <= bound {
                out.push(e);
                out.push(self.neg(e));
            }
        }
        out
    }

    /// Units congruent to 1 mod q: generator sign*eps0^m, plus -1 when 2 is in q.
    pub fn unit_subgroup(&self, q: &Ideal) -> UnitSubgroup {
        let has_neg = self.contains(q, AlgInt::int(2));
        if self.d == 1 {
            return UnitSubgroup { m: 0, sign: 1, has_neg };
        }
        let rr = ResidueRing { ideal: *q, d: 2 };
        let e = rr.reduce(self.eps0);
        let one = rr.reduce(AlgInt::ONE);
        let mone = rr.reduce(AlgInt::int(-1));
        let mut cur = e;
        for m in 1..=(4 * q.norm() as u32 + 8) {
            if cur == one {
                return UnitSubgroup { m, sign: 1, has_neg };
            }
            if cur == mone {
                return UnitSubgroup { m, sign: -1, has_neg };
            }
            cur = rr.reduce(self.mul(cur, e));
        }
        unreachable!("unit order search did not terminate")
    }

    pub fn full_unit_group(&self) -> UnitSubgroup {
        UnitSubgroup { m: if self.d == 1 { 0 } else { 1 }, sign: 1, has_neg: true }
    }

    /// log|x1/x2|
    pub fn log_ratio(&self, x: AlgInt) -> f64 {
        let e = self.embed2(x);
        e[0].abs().ln() - e[1].abs().ln()
    }

    pub fn default_shift(&self, g: &UnitSubgroup) -> f64 {
        // offset keeps section boundaries away from exact ties
        -(g.m as f64) * self.log_eps - 1.234_567e-7
    }

    pub fn enumerate_ideal_elements(&self, id: &Ideal, bound: f64, mode: EnumMode) -> Vec<AlgInt> {
        if self.d == 1 {
            let b = bound.floor() as i64;
            let mut out = Vec::new();
            let mut k = id.a;
            let both = match mode {
                EnumMode::Box => true,
                EnumMode::UpToUnits { group, .. } => !group.has_neg,
            };
            while k <= b {
                out.push(AlgInt::int(k));
                if both {
                    out.push(AlgInt::int(-k));
                }
                k += id.a;
            }
            return out;
        }
        match mode {
            EnumMode::Box => self
                .lattice_box(id, bound, bound)
                .into_iter()
                .filter(|x| !x.is_zero())
                .collect(),
            EnumMode::UpToUnits { group, shift } => {
                let w = 2.0 * group.m as f64 * self.log_eps;
                let s0 = shift.unwrap_or_else(|| self.default_shift(&group));
                let r1 = (bound * (s0 + w).exp()).sqrt() * (1.0 + 1e-9);
                let r2 = (bound * (-s0).exp()).sqrt() * (1.0 + 1e-9);
                let mut out: Vec<AlgInt> = self
                    .lattice_box(id, r1, r2)
                    .into_iter()
                    .filter(|&x| {
                        if x.is_zero() || self.norm(x).unsigned_abs() as f64 > bound {
                            return false;
                        }
                        let l = self.log_ratio(x);
                        if l < s0 || l >= s0 + w {
                            return false;
                        }
                        !group.has_neg || self.embed2(x)[0] > 0.0
                    })
                    .collect();
                out.sort_by_key(|x| (self.norm(*x).unsigned_abs(), *x));
                out
            }
        }
    }

    /// lattice points of id with |x1| <= r1 and |x2| <= r2
    fn lattice_box(&self, id: &Ideal, r1: f64, r2: f64) -> Vec<AlgInt> {
        let sd = (self.disc as f64).sqrt();
        let ymax = (r1 + r2) / sd;
        let vmax = (ymax / id.c as f64).floor() as i64 + 1;
        let mut out = Vec::new();
        for v in -vmax..=vmax {
            let y = v * id.c;
            let yf = y as f64;
            let lo = (-r1 - yf * self.sigma[0]).max(-r2 - yf * self.sigma[1]);
            let hi = (r1 - yf * self.sigma[0]).min(r2 - yf * self.sigma[1]);
            if lo > hi + 1.0 {
                continue;
            }
            // x = v*b + u*a
            let base = v * id.b;
            let ulo = ((lo - 1.0 - base as f64) / id.a as f64).ceil() as i64;
            let uhi = ((hi + 1.0 - base as f64) / id.a as f64).floor() as i64;
            for u in ulo..=uhi {
                let x = AlgInt::new(base + u * id.a, y);
                let e = self.embed2(x);
                if e[0].abs() <= r1 && e[1].abs() <= r2 {
                    out.push(x);
                }
            }
        }
        out
    }

    // -------------------------------------------------------------- parsing

    pub fn parse_elt(&self, s: &str) -> Result<FieldElt> {
        parse_elt(s)
    }

    pub fn parse_ideal(&self, s: &str) -> Result<Ideal> {
        let t = s.trim();
        let inner = t
            .strip_prefix('[')
            .and_then(|u| u.strip_suffix(']'))
            .ok_or(Error::Parse { col: 0, msg: "ideal must be written as [g1; g2; ...]".into() })?;
        let mut gens = Vec::new();
        for part in inner.split(';') {
            gens.push(parse_algint(part)?);
        }
        self.ideal_from_gens(&gens)
    }
}

/// Residue ring O/(c) with representatives x + y w, 0 <= x < a, 0 <= y < c.
#[derive(Copy, Clone, Debug)]
pub struct ResidueRing {
    pub ideal: Ideal,
    d: usize,
}

impl ResidueRing {
    pub fn new(ideal: Ideal, field: &FieldContext) -> Self {
        ResidueRing { ideal, d: field.d }
    }

    pub fn size(&self) -> u64 {
        self.ideal.norm()
    }

    pub fn reduce(&self, x: AlgInt) -> AlgInt {
        let id = &self.ideal;
        if self.d == 1 {
            return AlgInt::int(x.a.rem_euclid(id.a));
        }
        let k = x.b.div_euclid(id.c);
        let y = x.b - k * id.c;
        let xa = (x.a as i128 - k as i128 * id.b as i128).rem_euclid(id.a as i128);
        AlgInt::new(xa as i64, y)
    }

    pub fn index(&self, x: AlgInt) -> usize {
        let r = self.reduce(x);
        (r.b as usize) * self.ideal.a as usize + r.a as usize
    }

    pub fn reps(&self) -> impl Iterator<Item = AlgInt> + '_ {
        let (a, c) = (self.ideal.a, if self.d == 1 { 1 } else { self.ideal.c });
        (0..c).flat_map(move |y| (0..a).map(move |x| AlgInt::new(x, y)))
    }

    pub fn is_unit(&self, f: &FieldContext, x: AlgInt) -> bool {
        if x.is_zero() {
            return self.ideal.is_unit();
        }
        let px = f.principal(x).expect("nonzero");
        f.coprime(&px, &self.ideal)
    }

    /// Inverse of x mod the ideal, if x is invertible.
    pub fn inverse(&self, f: &FieldContext, x: AlgInt) -> Option<AlgInt> {
        let one = self.reduce(AlgInt::ONE);
        if self.ideal.is_unit() {
            return Some(AlgInt::ZERO);
        }
        if self.d == 1 {
            return arith::mod_inverse(x.a as i128, self.ideal.a as i128).map(|v| AlgInt::int(v as i64));
        }
        if !self.is_unit(f, x) {
            return None;
        }
        let a = self.ideal.a as i128;
        let try_norm = |y: AlgInt| -> Option<AlgInt> {
            let nm = f.norm(y);
            let inv = arith::mod_inverse(nm.rem_euclid(a), a)?;
            let cj = f.conj(y);
            let cand = AlgInt::new(
                (cj.a as i128 * inv).rem_euclid(a) as i64,
                (cj.b as i128 * inv).rem_euclid(a) as i64,
            );
            let cand = self.reduce(cand);
            (self.reduce(f.mul(y, cand)) == one).then_some(cand)
        };
        if let Some(r) = try_norm(x) {
            return Some(r);
        }
        let [e1, e2] = self.ideal.basis();
        for j in 1..40 {
            for e in [e2, f.add(e1, e2), f.sub(e2, e1)] {
                let y = f.add(x, f.scale(e, j));
                if let Some(r) = try_norm(y) {
                    return Some(self.reduce(r));
                }
            }
        }
        self.reps().find(|&y| self.reduce(f.mul(x, y)) == one)
    }
}

pub fn parse_algint(s: &str) -> Result<AlgInt> {
    let src: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if src.is_empty() {
        return Err(Error::Parse { col: 0, msg: "empty element".into() });
    }
    let bytes: Vec<char> = src.chars().collect();
    let (mut a, mut b) = (0i64, 0i64);
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let mut sign = 1i64;
        if bytes[i] == '+' || bytes[i] == '-' {
            if bytes[i] == '-' {
                sign = -1;
            }
            i += 1;
        } else if start != 0 {
            return Err(Error::Parse { col: i, msg: "expected + or -".into() });
        }
        let ns = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        let coef: Option<i64> = if i > ns {
            Some(
                bytes[ns..i]
                    .iter()
                    .collect::<String>()
                    .parse()
                    .map_err(|_| Error::Parse { col: ns, msg: "bad integer".into() })?,
            )
        } else {
            None
        };
        let mut is_w = false;
        if i < bytes.len() && bytes[i] == '*' {
            i += 1;
            if i < bytes.len() && bytes[i] == 'w' {
                is_w = true;
                i += 1;
            } else {
                return Err(Error::Parse { col: i, msg: "expected w after *".into() });
            }
        } else if i < bytes.len() && bytes[i] == 'w' {
            is_w = true;
            i += 1;
        }
        match (coef, is_w) {
            (Some(c), false) => a += sign * c,
            (Some(c), true) => b += sign * c,
            (None, true) => b += sign,
            (None, false) => {
                return Err(Error::Parse { col: i, msg: "expected integer or w".into() })
            }
        }
    }
    Ok(AlgInt::new(a, b))
}

/// `a+b*w`, `(a+b*w)/n` or `a+b*w/n`.
pub fn parse_elt(s: &str) -> Result<FieldElt> {
    let t = s.trim();
    let (num, den) = match t.rfind('/') {
        Some(pos) => {
            let d: i64 = t[pos + 1..]
                .trim()
                .parse()
                .map_err(|_| Error::Parse { col: pos + 1, msg: "bad denominator".into() })?;
            if d == 0 {
                return Err(Error::Parse { col: pos + 1, msg: "zero denominator".into() });
            }
            (&t[..pos], d)
        }
        None => (t, 1),
    };
    let num = num.trim();
    let num = num
        .strip_prefix('(')
        .and_then(|u| u.strip_suffix(')'))
        .unwrap_or(num);
    Ok(FieldElt::new(parse_algint(num)?, den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q5() -> FieldContext {
        FieldContext::new(5).unwrap()
    }

    #[test]
    fn fields() {
        let q = FieldContext::new(1).unwrap();
        assert_eq!((q.d, q.disc), (1, 1));
        let f = q5();
        assert_eq!(f.disc, 5);
        assert_eq!(f.eps0, AlgInt::new(0, 1));
        assert_eq!(f.eps0_norm, -1);
        let f2 = FieldContext::new(2).unwrap();
        assert_eq!(f2.disc, 8);
        assert_eq!(f2.eps0, AlgInt::new(1, 1));
        let f3 = FieldContext::new(3).unwrap();
        assert_eq!(f3.eps0, AlgInt::new(2, 1));
        assert!(matches!(FieldContext::new(12), Err(Error::NotSquarefree(12))));
        for dd in [2, 3, 5, 6, 7, 13, 14, 21, 29, 94] {
            let f = FieldContext::new(dd).unwrap();
            assert_eq!(f.norm(f.eps0).abs(), 1);
            assert!(f.embed2(f.eps0)[0] > 1.0);
            assert_eq!(f.norm(f.different).abs(), f.disc as i128);
        }
    }

    #[test]
    fn embeddings_and_traces() {
        let f = q5();
        let s5 = AlgInt::new(-1, 2);
        let e = f.embed2(s5);
        assert!((e[0] - 5f64.sqrt()).abs() < 1e-15 && (e[1] + 5f64.sqrt()).abs() < 1e-15);
        let e = f.embed2(AlgInt::new(0, 1));
        assert!((e[0] - 1.618_033_988_749_895).abs() < 1e-15);
        assert!((e[1] + 0.618_033_988_749_895).abs() < 1e-15);
        assert_eq!(f.trace_and_norm(AlgInt::new(0, 1)), (1, -1));
        let f2 = FieldContext::new(2).unwrap();
        assert_eq!(f2.trace_and_norm(AlgInt::new(1, 1)), (2, -1));
        let q = FieldContext::new(1).unwrap();
        assert_eq!(q.trace_and_norm(AlgInt::int(7)), (7, 7));
        // a unit power with heavy cancellation in the small embedding
        let big = f.unit_pow(40);
        let e = f.embed2(big);
        let phi: f64 = 1.618_033_988_749_895;
        assert!((e[1] / phi.powi(-40) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn ideal_examples() {
        let f = q5();
        let two = f.principal(AlgInt::int(2)).unwrap();
        assert_eq!(two.norm(), 4);
        assert_eq!(f.primes_above(2).len(), 1);
        let s5 = f.principal(AlgInt::new(-1, 2)).unwrap();
        assert_eq!(f.ideal_mul(&s5, &s5), f.ideal_int(5));
        let q = FieldContext::new(1).unwrap();
        let i = q.ideal_from_gens(&[AlgInt::int(6), AlgInt::int(4)]).unwrap();
        assert_eq!((i.a, i.norm()), (2, 2));
        let fac = f.factor_ideal(&f.ideal_int(5)).unwrap();
        assert_eq!(fac.len(), 1);
        assert_eq!((fac[0].0.ideal, fac[0].1), (s5, 2));
        let fac = f.factor_ideal(&f.ideal_int(11)).unwrap();
        assert_eq!(fac.len(), 2);
        assert!(fac.iter().all(|(p, e)| p.norm() == 11 && *e == 1));
        assert_eq!(q.factor_ideal(&q.ideal_int(7)).unwrap()[0].1, 1);
    }

    #[test]
    fn residue_examples() {
        let q = FieldContext::new(1).unwrap();
        let inv = q.invertible_residues_mod(AlgInt::int(5)).unwrap();
        let want: Vec<(AlgInt, AlgInt)> =
            [(1, 1), (2, 3), (3, 2), (4, 4)].iter().map(|&(d, a)| (AlgInt::int(d), AlgInt::int(a))).collect();
        assert_eq!(inv, want);
        let f = q5();
        assert_eq!(f.residues_mod(AlgInt::int(2)).unwrap().len(), 4);
        assert_eq!(f.invertible_residues_mod(AlgInt::int(2)).unwrap().len(), 3);
        let s5 = AlgInt::new(-1, 2);
        assert_eq!(f.residues_mod(s5).unwrap().len(), 5);
        assert_eq!(f.invertible_residues_mod(s5).unwrap().len(), 4);
    }

    #[test]
    fn dual_elements() {
        let f = q5();
        let r = f.dual_generator();
        assert_eq!(r, FieldElt::new(AlgInt::new(-1, 2), 5));
        assert!(f.is_dual(r));
        assert!(!f.is_dual(FieldElt::new(AlgInt::ONE, 2)));
        let q = FieldContext::new(1).unwrap();
        assert!(q.is_dual(FieldElt::int(AlgInt::ONE)));
    }

    #[test]
    fn unit_enumeration() {
        let q = FieldContext::new(1).unwrap();
        assert_eq!(q.enumerate_units(3.0).len(), 2);
        let f = q5();
        let u = f.enumerate_units(10.0);
        assert_eq!(u.len(), 18);
        let mut ks: Vec<AlgInt> = (-4..=4).flat_map(|k| {
            let e = f.unit_pow(k);
            [e, f.neg(e)]
        }).collect();
        ks.sort();
        let mut u2 = u.clone();
        u2.sort();
        assert_eq!(u2, ks);
        let f2 = FieldContext::new(2).unwrap();
        assert_eq!(f2.enumerate_units(6.0).len(), 10);
    }

    #[test]
    fn orbit_sections() {
        let q = FieldContext::new(1).unwrap();
        let g = q.unit_subgroup(&Ideal::UNIT);
        let v = q.enumerate_ideal_elements(&Ideal::UNIT, 3.0, EnumMode::UpToUnits { group: g, shift: None });
        assert_eq!(v, vec![AlgInt::int(1), AlgInt::int(2), AlgInt::int(3)]);
        let f = q5();
        let g = f.full_unit_group();
        let v = f.enumerate_ideal_elements(&Ideal::UNIT, 5.0, EnumMode::UpToUnits { group: g, shift: None });
        // ideals of norm <= 5: (1), (2), (sqrt5)
        assert_eq!(v.len(), 3);
        let two = f.ideal_int(2);
        let v = f.enumerate_ideal_elements(&two, 4.0, EnumMode::UpToUnits { group: g, shift: None });
        assert_eq!(v, vec![AlgInt::int(2)]);
    }

    #[test]
    fn unit_subgroups() {
        let f = q5();
        let g = f.unit_subgroup(&f.ideal_int(2));
        // w^3 = 1 + 2w = 1 mod 2
        assert_eq!((g.m, g.has_neg), (3, true));
        let g = f.unit_subgroup(&Ideal::UNIT);
        assert_eq!(g.m, 1);
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_algint("3-2*w").unwrap(), AlgInt::new(3, -2));
        assert_eq!(parse_algint("w").unwrap(), AlgInt::new(0, 1));
        assert_eq!(parse_algint("-w+4").unwrap(), AlgInt::new(4, -1));
        assert_eq!(parse_elt("(-1+2*w)/5").unwrap(), FieldElt::new(AlgInt::new(-1, 2), 5));
        assert!(parse_algint("3*x").is_err());
        let f = q5();
        assert_eq!(f.parse_ideal("[2; 1+w]").unwrap(), Ideal::UNIT);
    }

    proptest! {
        #[test]
        fn norm_multiplicative(a in -10_000i64..10_000, b in -10_000i64..10_000,
                               c in -10_000i64..10_000, d in -10_000i64..10_000,
                               dd in prop::sample::select(vec![2i64, 3, 5, 13])) {
            let f = FieldContext::new(dd).unwrap();
            let x = AlgInt::new(a, b);
            let y = AlgInt::new(c, d);
            prop_assert_eq!(f.norm(f.mul(x, y)), f.norm(x) * f.norm(y));
            prop_assert_eq!(f.trace(f.add(x, y)), f.trace(x) + f.trace(y));
        }

        #[test]
        fn hnf_canonical(a in -30i64..30, b in -30i64..30, c in -30i64..30, d in -30i64..30, k in -3i64..4) {
            let f = q5();
            let x = AlgInt::new(a, b);
            let y = AlgInt::new(c, d);
            prop_assume!(!x.is_zero() && !y.is_zero());
            let i1 = f.ideal_from_gens(&[x, y]).unwrap();
            let u = f.unit_pow(k);
            let i2 = f.ideal_from_gens(&[f.mul(y, u), f.neg(x)]).unwrap();
            prop_assert_eq!(i1, i2);
            let p = f.principal(x).unwrap();
            prop_assert_eq!(p.norm() as i128, f.norm(x).abs());
        }
    }
}
