//! Strict ray class groups, Hecke characters, ray class zeta partial sums,
//! L-series on Re s >= 1 and the finite Dirichlet pieces of Eisenstein
//! Fourier coefficients.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::arith;
use crate::numberfield::{AlgInt, EnumMode, FieldContext, FieldElt, Ideal, ResidueRing, UnitSubgroup};
use crate::{Error, Result, C64};

const MAX_MODULUS_NORM: u64 = 100;
pub const DEFAULT_PRIME_BOUND: u64 = 200;
/// accuracy asked of `l_function`
pub const L_TARGET: f64 = 1e-4;
pub const MAX_TERMS: u64 = 1_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct RayClassGroup {
    #[serde(skip)]
    pub field: FieldContext,
    pub modulus: Ideal,
    /// integral representatives, norms prime to N(q); index 0 is the unit class
    pub reps: Vec<Ideal>,
    pub table: Vec<Vec<usize>>,
    /// chars[k][tau]; chars[0] is trivial
    pub chars: Vec<Vec<C64>>,
    pub order: usize,
    /// units congruent to 1 mod q
    pub units: UnitSubgroup,
    #[serde(skip)]
    residue_index: Vec<Option<usize>>,
}

pub fn ray_class_group(f: &FieldContext, q: &Ideal) -> Result<RayClassGroup> {
    ray_class_group_with_bound(f, q, DEFAULT_PRIME_BOUND)
}

/// Classes are collected by multiplying representatives with the prime
/// ideals of norm <= bound; the search fails if the last new class appeared
/// above bound/2.
pub fn ray_class_group_with_bound(f: &FieldContext, q: &Ideal, bound: u64) -> Result<RayClassGroup> {
    let nq = q.norm();
    if nq == 0 {
        return Err(Error::Zero);
    }
    if nq > MAX_MODULUS_NORM {
        return Err(Error::Range(nq as u128));
    }
    let mut g = RayClassGroup {
        field: f.clone(),
        modulus: *q,
        reps: Vec::new(),
        table: Vec::new(),
        chars: Vec::new(),
        order: 0,
        units: f.unit_subgroup(q),
        residue_index: Vec::new(),
    };
    if f.d == 1 {
        let m = q.a as u64;
        let mut idx = vec![None; m as usize];
        for k in 1..=m {
            if arith::gcd(k as i128, m as i128) == 1 {
                idx[(k % m) as usize] = Some(g.reps.len());
                g.reps.push(f.ideal_int(k as i64));
            }
        }
        g.residue_index = idx;
    } else {
        g.reps.push(Ideal::UNIT);
        let mut last_new = 0;
        for p in primes_up_to(bound) {
            if nq % p == 0 {
                continue;
            }
            for pr in f.primes_above(p) {
                if pr.norm() > bound {
                    continue;
                }
                let mut i = 0;
                while i < g.reps.len() {
                    let prod = f.ideal_mul(&g.reps[i], &pr.ideal);
                    if g.find_class(&prod).is_none() {
                        g.reps.push(prod);
                        last_new = pr.norm();
                    }
                    i += 1;
                }
            }
        }
        if 2 * last_new > bound {
            return Err(Error::Numerical(format!(
                "ray class group not closed below norm {bound} (last new class at norm {last_new}); raise the bound"
            )));
        }
    }
    g.order = g.reps.len();
    let mut table = vec![vec![0; g.order]; g.order];
    for i in 0..g.order {
        for j in 0..g.order {
            let prod = f.ideal_mul(&g.reps[i], &g.reps[j]);
            table[i][j] = g
                .find_class(&prod)
                .ok_or_else(|| Error::Numerical(format!("product {prod} falls outside the found classes")))?;
        }
    }
    g.chars = character_table(&table);
    g.table = table;
    Ok(g)
}

impl RayClassGroup {
    fn find_class(&self, a: &Ideal) -> Option<usize> {
        let f = &self.field;
        if f.d == 1 {
            let m = self.modulus.a;
            return self.residue_index[a.a.rem_euclid(m) as usize];
        }
        // a ~ b  iff  a conj(b) = (beta), beta >> 0, beta = N(b) mod q
        self.reps.iter().position(|b| {
            let prod = f.ideal_mul(a, &f.ideal_conj(b));
            self.congruent_generator(&prod, AlgInt::int(b.norm() as i64))
        })
    }

    /// Class index of an integral ideal prime to q.
    pub fn class_of(&self, a: &Ideal) -> Result<usize> {
        if !self.field.coprime(a, &self.modulus) {
            return Err(Error::Invalid(format!("{a} is not prime to the modulus")));
        }
        if self.order == 1 {
            return Ok(0);
        }
        self.find_class(a)
            .ok_or_else(|| Error::Numerical(format!("{a} matches no class representative")))
    }

    /// Does c have a totally positive generator congruent to target mod q?
    fn congruent_generator(&self, c: &Ideal, target: AlgInt) -> bool {
        let f = &self.field;
        let rq = ResidueRing::new(self.modulus, f);
        let want = rq.reduce(target);
        let Some(g) = principal_generator(f, c) else {
            return false;
        };
        let gres = rq.reduce(g);
        let ge = f.embed2(g);
        let ee = f.embed2(f.eps0);
        let eps_res = rq.reduce(f.eps0);
        let mut u = rq.reduce(AlgInt::ONE);
        let mut sg = [ge[0].signum(), ge[1].signum()];
        // (sign eps0^m)^2 is totally positive and 1 mod q
        for _ in 0..2 * self.units.m.max(1) {
            for s in [1i64, -1] {
                let sf = s as f64;
                if sf * sg[0] > 0.0 && sf * sg[1] > 0.0 {
                    let y = rq.reduce(f.scale(f.mul(u, gres), s));
                    if y == want {
                        return true;
                    }
                }
            }
            u = rq.reduce(f.mul(u, eps_res));
            sg = [sg[0] * ee[0].signum(), sg[1] * ee[1].signum()];
        }
        false
    }

    pub fn inverse(&self, tau: usize) -> usize {
        (0..self.order).find(|&j| self.table[tau][j] == 0).expect("group table has inverses")
    }

    /// Identity, inverses, commutativity and associativity of the table.
    pub fn check_axioms(&self) -> bool {
        let h = self.order;
        let t = &self.table;
        (0..h).all(|i| t[0][i] == i && t[i][0] == i)
            && (0..h).all(|i| (0..h).any(|j| t[i][j] == 0))
            && (0..h).all(|i| (0..h).all(|j| t[i][j] == t[j][i]))
            && (0..h).all(|i| (0..h).all(|j| (0..h).all(|k| t[t[i][j]][k] == t[i][t[j][k]])))
    }

    /// max |sum_chi chi(tau) conj chi(tau') - h [tau = tau']|
    pub fn orthogonality_defect(&self) -> f64 {
        let h = self.order;
        let mut worst: f64 = 0.0;
        for a in 0..h {
            for b in 0..h {
                let s: C64 = self.chars.iter().map(|c| c[a] * c[b].conj()).sum();
                let want = if a == b { h as f64 } else { 0.0 };
                worst = worst.max((s - want).norm());
            }
        }
        worst
    }
}

/// Characters of a finite abelian group from its multiplication table, by
/// trying every assignment of roots of unity on a generating set.
fn character_table(table: &[Vec<usize>]) -> Vec<Vec<C64>> {
    let h = table.len();
    let order = |g: usize| {
        let (mut x, mut k) = (g, 1);
        while x != 0 {
            x = table[x][g];
            k += 1;
        }
        k
    };
    let mut in_sub = vec![false; h];
    in_sub[0] = true;
    let mut gens = Vec::new();
    for g in 0..h {
        if in_sub[g] {
            continue;
        }
        gens.push(g);
        let mut elems: Vec<usize> = (0..h).filter(|&x| in_sub[x]).collect();
        let mut i = 0;
        while i < elems.len() {
            for &s in &gens {
                let y = table[elems[i]][s];
                if !in_sub[y] {
                    in_sub[y] = true;
                    elems.push(y);
                }
            }
            i += 1;
        }
    }
    let ords: Vec<usize> = gens.iter().map(|&g| order(g)).collect();
    let e = ords.iter().fold(1usize, |a, &b| a / arith::gcd(a as i128, b as i128) as usize * b);
    let total: usize = ords.iter().product();
    let mut chars = Vec::new();
    for idx in 0..total {
        let mut k = idx;
        let mut vals = Vec::with_capacity(ords.len());
        for &o in &ords {
            vals.push((k % o) * (e / o));
            k /= o;
        }
        let mut v = vec![usize::MAX; h];
        v[0] = 0;
        let mut queue = vec![0];
        let mut ok = true;
        let mut i = 0;
        while i < queue.len() && ok {
            let x = queue[i];
            i += 1;
            for (gi, &g) in gens.iter().enumerate() {
                let y = table[x][g];
                let val = (v[x] + vals[gi]) % e;
                if v[y] == usize::MAX {
                    v[y] = val;
                    queue.push(y);
                } else if v[y] != val {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            chars.push(v.iter().map(|&k| C64::from_polar(1.0, 2.0 * PI * k as f64 / e as f64)).collect());
        }
    }
    chars
}

/// A generator of a principal ideal, or None.
pub fn principal_generator(f: &FieldContext, c: &Ideal) -> Option<AlgInt> {
    if f.d == 1 {
        return Some(AlgInt::int(c.a));
    }
    let n = c.norm();
    f.enumerate_ideal_elements(c, n as f64, EnumMode::UpToUnits { group: f.full_unit_group(), shift: None })
        .into_iter()
        .find(|&x| f.norm(x).unsigned_abs() == n as u128)
}

pub fn primes_up_to(n: u64) -> Vec<u64> {
    let n = n as usize;
    if n < 2 {
        return Vec::new();
    }
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n {
        if sieve[i] {
            let mut j = i * i;
            while j <= n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    (0..=n).filter(|&k| sieve[k]).map(|k| k as u64).collect()
}

/// Spacing of the admissible mu_1 at the cusp infinity: every unit eps acts
/// there through a = eps^2, so mu_1 runs over (pi / (2 log eps0)) Z.
pub fn mu_lattice(f: &FieldContext) -> f64 {
    if f.d == 1 {
        0.0
    } else {
        PI / (2.0 * f.log_eps)
    }
}

/// lambda_mu, extended by 1 on the class representatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeckeCharacter {
    pub mu: [f64; 2],
}

impl HeckeCharacter {
    pub const TRIVIAL: HeckeCharacter = HeckeCharacter { mu: [0.0, 0.0] };

    pub fn new(rc: &RayClassGroup, mu1: f64) -> Result<Self> {
        if mu1 == 0.0 {
            return Ok(Self::TRIVIAL);
        }
        let f = &rc.field;
        if f.d == 1 {
            return Err(Error::Invalid("over Q the only admissible mu is 0".into()));
        }
        if rc.order > 1 {
            return Err(Error::Invalid("mu != 0 needs a trivial ray class group".into()));
        }
        let ch = HeckeCharacter { mu: [mu1, -mu1] };
        if (ch.on_element(f, f.eps0) - 1.0).norm() > 1e-9 {
            return Err(Error::Invalid(format!("mu_1 = {mu1} is not a multiple of {}", mu_lattice(f))));
        }
        Ok(ch)
    }

    pub fn is_trivial(&self) -> bool {
        self.mu == [0.0, 0.0]
    }

    pub fn norm(&self) -> f64 {
        self.mu[0].hypot(self.mu[1])
    }

    /// prod_j |x_j|^{2 i mu_j}
    pub fn on_element(&self, f: &FieldContext, x: AlgInt) -> C64 {
        if self.is_trivial() {
            return C64::new(1.0, 0.0);
        }
        C64::from_polar(1.0, 2.0 * self.mu[0] * f.log_ratio(x))
    }

    pub fn value(&self, rc: &RayClassGroup, id: &Ideal) -> Result<C64> {
        if self.is_trivial() {
            return Ok(C64::new(1.0, 0.0));
        }
        let g = principal_generator(&rc.field, id)
            .ok_or_else(|| Error::Numerical(format!("no generator found for {id}")))?;
        Ok(self.on_element(&rc.field, g))
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IdealEntry {
    pub norm: u64,
    pub class: u32,
    pub mobius: i8,
    pub lambda: C64,
}

/// All integral ideals prime to q with norm <= bound, sorted by norm.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdealTable {
    pub bound: u64,
    pub mu_norm: f64,
    pub d: usize,
    pub entries: Vec<IdealEntry>,
}

pub fn ideal_table(rc: &RayClassGroup, lambda: &HeckeCharacter, n: u64) -> Result<IdealTable> {
    if n > MAX_TERMS {
        return Err(Error::Range(n as u128));
    }
    let f = &rc.field;
    let mut primes: Vec<(u64, u32, C64)> = Vec::new();
    for p in primes_up_to(n) {
        for pr in f.primes_above(p) {
            if pr.norm() > n || !f.coprime(&pr.ideal, &rc.modulus) {
                continue;
            }
            let class = rc.class_of(&pr.ideal)? as u32;
            primes.push((pr.norm(), class, lambda.value(rc, &pr.ideal)?));
        }
    }
    primes.sort_by_key(|p| p.0);
    let one = IdealEntry { norm: 1, class: 0, mobius: 1, lambda: C64::new(1.0, 0.0) };
    let mut entries = vec![one];
    extend_ideals(&primes, 0, one, n, &rc.table, &mut entries);
    entries.sort_by_key(|e| e.norm);
    Ok(IdealTable { bound: n, mu_norm: lambda.norm(), d: f.d, entries })
}

fn extend_ideals(
    primes: &[(u64, u32, C64)],
    start: usize,
    base: IdealEntry,
    n: u64,
    table: &[Vec<usize>],
    out: &mut Vec<IdealEntry>,
) {
    for (i, &(pn, pc, pl)) in primes.iter().enumerate().skip(start) {
        if base.norm * pn > n {
            break;
        }
        let mut cur = base;
        let mut e = 0;
        while cur.norm * pn <= n {
            e += 1;
            cur = IdealEntry {
                norm: cur.norm * pn,
                class: table[cur.class as usize][pc as usize] as u32,
                mobius: if e == 1 { -base.mobius } else { 0 },
                lambda: cur.lambda * pl,
            };
            out.push(cur);
            extend_ideals(primes, i + 1, cur, n, table, out);
        }
    }
}

impl IdealTable {
    /// sum of lambda(b) over b in tau with N(b) <= n
    pub fn s_lambda(&self, tau: usize, n: u64) -> C64 {
        self.entries
            .iter()
            .take_while(|e| e.norm <= n)
            .filter(|e| e.class as usize == tau)
            .map(|e| e.lambda)
            .sum()
    }

    pub fn s_lambda_curve(&self, tau: usize, ns: &[u64]) -> Vec<C64> {
        ns.iter().map(|&n| self.s_lambda(tau, n)).collect()
    }
}

pub fn s_lambda(rc: &RayClassGroup, lambda: &HeckeCharacter, tau: usize, n: u64) -> Result<C64> {
    if tau >= rc.order {
        return Err(Error::Invalid(format!("class {tau} out of range")));
    }
    Ok(ideal_table(rc, lambda, n)?.s_lambda(tau, n))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LValue {
    pub s: C64,
    pub value: C64,
    /// estimate of the partial-summation remainder
    pub err: f64,
    pub terms: u64,
}

/// L(s, conj(lambda), chi) by partial summation against the coefficient sums.
#[derive(Clone, Debug)]
pub struct LSeries {
    cum: Vec<C64>,
    coeffs: Vec<C64>,
    pole: bool,
    main: Option<f64>,
    /// growth exponent of the coefficient-sum remainder
    theta: f64,
    pub mu_norm: f64,
}

impl LSeries {
    pub fn new(rc: &RayClassGroup, table: &IdealTable, chi: usize) -> Result<Self> {
        if chi >= rc.chars.len() {
            return Err(Error::Invalid(format!("character {chi} out of range")));
        }
        let m = table.bound as usize;
        let mut coeffs = vec![C64::new(0.0, 0.0); m + 1];
        for e in &table.entries {
            coeffs[e.norm as usize] += e.lambda.conj() * rc.chars[chi][e.class as usize];
        }
        let mut cum = coeffs.clone();
        for k in 1..=m {
            cum[k] = cum[k - 1] + coeffs[k];
        }
        let pole = chi == 0 && table.mu_norm == 0.0;
        let main = (pole && table.d == 1).then(|| {
            let q = rc.modulus.a as u64;
            arith::euler_phi(q) as f64 / q as f64
        });
        Ok(LSeries { cum, coeffs, pole, main, theta: if table.d == 1 { 0.0 } else { 0.5 }, mu_norm: table.mu_norm })
    }

    pub fn build(rc: &RayClassGroup, lambda: &HeckeCharacter, chi: usize, terms: u64) -> Result<Self> {
        LSeries::new(rc, &ideal_table(rc, lambda, terms)?, chi)
    }

    pub fn max_terms(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Uses the first m coefficients.
    pub fn eval_at(&self, s: C64, m: usize) -> Result<LValue> {
        let sig = s.re;
        if sig <= self.theta {
            return Err(Error::Invalid(format!("Re s = {sig} is outside the partial-summation range")));
        }
        if self.pole && (s - 1.0).norm() < 1e-9 {
            return Err(Error::Invalid("pole at s = 1 for the trivial pair".into()));
        }
        let m = m.clamp(16, self.max_terms());
        let mut partial = C64::new(0.0, 0.0);
        for k in 1..=m {
            if self.coeffs[k] != C64::new(0.0, 0.0) {
                partial += self.coeffs[k] * (-s * (k as f64).ln()).exp();
            }
        }
        // fit A(x) = c x + e0 + E(x) on [m/2, m]
        let k0 = m / 2;
        let c = if !self.pole {
            0.0
        } else if let Some(c) = self.main {
            c
        } else {
            let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
            let cnt = (m - k0 + 1) as f64;
            for k in k0..=m {
                let (x, y) = (k as f64, self.cum[k].re);
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
            }
            (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx)
        };
        let mut e0 = C64::new(0.0, 0.0);
        for k in k0..=m {
            e0 += self.cum[k] - c * (k as f64 + 0.5);
        }
        e0 /= (m - k0 + 1) as f64;
        let mut emax: f64 = 0.0;
        for k in k0..=m {
            let lo = self.cum[k] - c * k as f64 - e0;
            let hi = self.cum[k] - c * (k + 1) as f64 - e0;
            emax = emax.max(lo.norm()).max(hi.norm());
        }
        let mf = m as f64;
        let ms = (-s * mf.ln()).exp();
        let mut tail = (e0 - self.cum[m]) * ms;
        if self.pole {
            tail += c * s * mf * ms / (s - 1.0);
        }
        let mut err = s.norm() * emax * mf.powf(-sig) / (sig - self.theta);
        if self.pole && self.main.is_none() {
            err += (emax / mf) * s.norm() / (s - 1.0).norm() * mf.powf(1.0 - sig);
        }
        Ok(LValue { s, value: partial + tail, err, terms: m as u64 })
    }

    /// Lengthens the sum by factors of 4 until the remainder estimate is
    /// below target or the coefficients run out.
    pub fn eval(&self, s: C64, target: f64) -> Result<LValue> {
        let mut m = 1024.min(self.max_terms());
        loop {
            let v = self.eval_at(s, m)?;
            if v.err <= target || m >= self.max_terms() {
                return Ok(v);
            }
            m = (4 * m).min(self.max_terms());
        }
    }
}

/// L(s, conj(lambda), chi) with ideals of norm up to MAX_TERMS; fails if the
/// remainder estimate exceeds L_TARGET.
pub fn l_function(rc: &RayClassGroup, lambda: &HeckeCharacter, chi: usize, s: C64) -> Result<LValue> {
    let v = LSeries::build(rc, lambda, chi, MAX_TERMS)?.eval(s, L_TARGET)?;
    if v.err > L_TARGET {
        return Err(Error::Numerical(format!("L accuracy {:.2e} not reached at s = {s}", v.err)));
    }
    Ok(v)
}

pub fn log7_factor(t: f64, mu_norm: f64) -> f64 {
    let mut v = (2.0 + t.abs()).ln().powi(7);
    if mu_norm > 0.0 {
        v += mu_norm.max(2.0).ln().powi(7);
    }
    v
}

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    pub step: f64,
    pub constant: f64,
    pub t_at_min: f64,
    pub refined_constant: f64,
    pub refined_t_at_min: f64,
    /// refined / coarse
    pub ratio: f64,
    pub max_err: f64,
    pub stable: bool,
    pub passed: bool,
}

struct Scan {
    constant: f64,
    t_at_min: f64,
    max_err: f64,
    /// min over the grid of |L| - err
    gap: f64,
}

fn scan_min(series: &LSeries, t0: f64, t1: f64, step: f64) -> Result<Scan> {
    use rayon::prelude::*;
    let n = ((t1 - t0) / step).round() as usize;
    let vals = (0..=n)
        .into_par_iter()
        .map(|k| {
            let t = t0 + k as f64 * step;
            let v = series.eval(C64::new(1.0, t), L_TARGET)?;
            Ok((v.value.norm(), t, v.err))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sc = Scan { constant: f64::INFINITY, t_at_min: t0, max_err: 0.0, gap: f64::INFINITY };
    for &(a, t, e) in &vals {
        let v = a * log7_factor(t, series.mu_norm);
        if v < sc.constant {
            sc.constant = v;
            sc.t_at_min = t;
        }
        sc.max_err = sc.max_err.max(e);
        sc.gap = sc.gap.min(a - e);
    }
    Ok(sc)
}

/// min over the grid of |L(1+it)| (log^7(2+|t|) + log^7 max(2, |mu|)), and the
/// same with the step halved.
pub fn l_lower_bound_check(series: &LSeries, t0: f64, t1: f64, step: f64) -> Result<LowerBoundReport> {
    if !(step > 0.0 && t1 >= t0) {
        return Err(Error::Invalid("bad t grid".into()));
    }
    let a = scan_min(series, t0, t1, step)?;
    let b = scan_min(series, t0, t1, step / 2.0)?;
    let ratio = b.constant / a.constant;
    let stable = (0.5..=1.5).contains(&ratio);
    Ok(LowerBoundReport {
        step,
        constant: a.constant,
        t_at_min: a.t_at_min,
        refined_constant: b.constant,
        refined_t_at_min: b.t_at_min,
        ratio,
        max_err: a.max_err.max(b.max_err),
        stable,
        passed: a.constant > 0.0 && b.constant > 0.0 && stable && a.gap.min(b.gap) > 0.0,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QFactor {
    pub tau: usize,
    pub nu: C64,
    /// (1/h) sum_chi conj chi(tau) / L(1+2nu, conj lambda, chi)
    pub via_l: C64,
    pub l_err: f64,
    /// sum over b in tau of mu_q(b) N(b)^{-1-2nu} / lambda(b), when Re nu > 0
    pub via_mobius: Option<C64>,
    pub mobius_tail: f64,
    pub terms: u64,
}

pub fn q_factor(rc: &RayClassGroup, table: &IdealTable, tau: usize, nu: C64) -> Result<QFactor> {
    if nu.re < 0.0 {
        return Err(Error::Invalid("Re nu must be >= 0".into()));
    }
    if tau >= rc.order {
        return Err(Error::Invalid(format!("class {tau} out of range")));
    }
    let s = 1.0 + 2.0 * nu;
    let h = rc.order as f64;
    let mut via_l = C64::new(0.0, 0.0);
    let mut l_err = 0.0;
    for chi in 0..rc.chars.len() {
        let l = LSeries::new(rc, table, chi)?.eval(s, 1e-12)?;
        via_l += rc.chars[chi][tau].conj() / l.value / h;
        l_err += l.err / l.value.norm_sqr() / h;
    }
    let (via_mobius, mobius_tail) = if nu.re > 0.0 {
        let v: C64 = table
            .entries
            .iter()
            .filter(|e| e.class as usize == tau && e.mobius != 0)
            .map(|e| e.mobius as f64 * (-s * (e.norm as f64).ln()).exp() * e.lambda.conj())
            .sum();
        let m = table.bound as f64;
        let density = table.entries.len() as f64 / m;
        (Some(v), density * m.powf(-2.0 * nu.re) / (2.0 * nu.re))
    } else {
        (None, f64::INFINITY)
    };
    Ok(QFactor { tau, nu, via_l, l_err, via_mobius, mobius_tail, terms: table.bound })
}

/// Cusp -delta/gamma; the ideal (gamma, delta) must be prime to q.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CuspData {
    pub gamma: AlgInt,
    pub delta: AlgInt,
}

impl CuspData {
    pub fn ideal(&self, f: &FieldContext) -> Result<Ideal> {
        f.ideal_from_gens(&[self.gamma, self.delta])
    }
}

/// r times the different generator, which is integral for r in the inverse different.
fn integral_part(f: &FieldContext, r: FieldElt) -> Result<AlgInt> {
    let x = f.elt_mul_int(r, f.different);
    if x.den != 1 {
        return Err(Error::NotDual(r.to_string()));
    }
    if x.num.is_zero() {
        return Err(Error::Zero);
    }
    Ok(x.num)
}

/// (numerator, denominator) of 1/g
fn inverse_parts(f: &FieldContext, g: AlgInt) -> (AlgInt, i128) {
    if f.d == 1 {
        (AlgInt::ONE, g.a as i128)
    } else {
        (f.conj(g), f.norm(g))
    }
}

/// Tr(r y) / (den_r * n) mod 1
fn trace_phase(f: &FieldContext, r: FieldElt, y: AlgInt, n: i128) -> f64 {
    let (tr, den) = f.trace_elt(r, y);
    let (mut num, mut m) = (tr, den * n);
    if m < 0 {
        num = -num;
        m = -m;
    }
    num.rem_euclid(m) as f64 / m as f64
}

/// Coset representatives u of O*/U_q as (u mod q, u^{-1} mod q, log|u_j|).
fn unit_cosets(rc: &RayClassGroup) -> Vec<(AlgInt, AlgInt, [f64; 2])> {
    let f = &rc.field;
    let rq = ResidueRing::new(rc.modulus, f);
    let signs: &[i64] = if rc.units.has_neg { &[1] } else { &[1, -1] };
    let mut out = Vec::new();
    if f.d == 1 {
        for &s in signs {
            out.push((rq.reduce(AlgInt::int(s)), rq.reduce(AlgInt::int(s)), [0.0, 0.0]));
        }
        return out;
    }
    let ee = f.embed2(f.eps0);
    let le = [ee[0].abs().ln(), ee[1].abs().ln()];
    let step = rq.reduce(f.eps0);
    let step_inv = rq.reduce(f.scale(f.conj(f.eps0), f.eps0_norm));
    let (mut u, mut v) = (rq.reduce(AlgInt::ONE), rq.reduce(AlgInt::ONE));
    for k in 0..rc.units.m {
        for &s in signs {
            out.push((rq.reduce(f.scale(u, s)), rq.reduce(f.scale(v, s)), [k as f64 * le[0], k as f64 * le[1]]));
        }
        u = rq.reduce(f.mul(u, step));
        v = rq.reduce(f.mul(v, step_inv));
    }
    out
}

/// An element of the ideal congruent to 1 mod q.
fn one_mod_q_in(f: &FieldContext, id: &Ideal, rq: &ResidueRing) -> Result<AlgInt> {
    let one = rq.reduce(AlgInt::ONE);
    let mut bound = (id.norm() * rq.size()) as f64 + 2.0;
    for _ in 0..12 {
        let found = f
            .enumerate_ideal_elements(id, bound, EnumMode::Box)
            .into_iter()
            .filter(|&x| rq.reduce(x) == one)
            .min_by_key(|x| (x.a.abs() + x.b.abs(), *x));
        if let Some(x) = found {
            return Ok(x);
        }
        bound *= 2.0;
    }
    Err(Error::Invalid(format!("{id} is not prime to the modulus")))
}

pub fn ideal_divisors(f: &FieldContext, id: &Ideal) -> Result<Vec<Ideal>> {
    let mut out = vec![Ideal::UNIT];
    if f.d == 1 {
        out[0] = f.ideal_int(1);
    }
    for (p, e) in f.factor_ideal(id)? {
        let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
        for base in &out {
            let mut cur = *base;
            next.push(cur);
            for _ in 0..e {
                cur = f.ideal_mul(&cur, &p.ideal);
                next.push(cur);
            }
        }
        out = next;
    }
    out.sort();
    Ok(out)
}

/// psi_r^{b0}: the finite sum over c with a b0 | (c) | r d q a b0 and
/// c = gamma mod q, c up to units = 1 mod q, of
/// |N c|^{-2 nu} |c|^{-2 i mu} e(S(r delta'/c)) / N(a b0), where
/// delta' = delta mod q and delta' in a b0. The phase is 1 when q = (1).
pub fn psi_factor(
    rc: &RayClassGroup,
    lambda: &HeckeCharacter,
    r: FieldElt,
    cusp: &CuspData,
    b0: &Ideal,
    nu: C64,
) -> Result<C64> {
    let f = &rc.field;
    let q = &rc.modulus;
    let a = cusp.ideal(f)?;
    if !f.coprime(&a, q) || !f.coprime(b0, q) {
        return Err(Error::Invalid("cusp ideal and b0 must be prime to q".into()));
    }
    let ab = f.ideal_mul(&a, b0);
    let rd = f.principal(integral_part(f, r)?)?;
    let top = f.ideal_mul(&rd, q);
    let rq = ResidueRing::new(*q, f);
    let dprime = f.mul(cusp.delta, one_mod_q_in(f, &ab, &rq)?);
    let gamma_res = rq.reduce(cusp.gamma);
    let cosets = unit_cosets(rc);
    let mut sum = C64::new(0.0, 0.0);
    for dv in ideal_divisors(f, &top)? {
        let cid = f.ideal_mul(&ab, &dv);
        let Some(g) = principal_generator(f, &cid) else {
            continue;
        };
        let (ginv, ng) = inverse_parts(f, g);
        let ge = f.embed2(g);
        let gres = rq.reduce(g);
        let weight = (-2.0 * nu * (ng.unsigned_abs() as f64).ln()).exp();
        for &(ures, uinv, ulog) in &cosets {
            if rq.reduce(f.mul(ures, gres)) != gamma_res {
                continue;
            }
            let arg_mu = -2.0
                * (lambda.mu[0] * (ge[0].abs().ln() + ulog[0]) + lambda.mu[1] * (ge[1].abs().ln() + ulog[1]));
            let y = f.mul(f.mul(dprime, uinv), ginv);
            let ph = trace_phase(f, r, y, ng);
            sum += weight * C64::from_polar(1.0, arg_mu + 2.0 * PI * ph);
        }
    }
    Ok(sum / ab.norm() as f64)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DirectSum {
    pub value: C64,
    pub tail: f64,
    pub bound_b: u64,
    pub moduli: usize,
    pub pairs: u64,
}

/// Phi_r straight from its definition: pairs (c, d) in a x a with
/// Oc + Od = a, c = gamma and d = delta mod q, d mod q(c), c up to units
/// = 1 mod q, truncated at |N c| <= B.
pub fn phi_direct(
    rc: &RayClassGroup,
    lambda: &HeckeCharacter,
    r: FieldElt,
    cusp: &CuspData,
    nu: C64,
    bound_b: u64,
) -> Result<DirectSum> {
    if nu.re < 0.5 {
        return Err(Error::Invalid("the direct sum needs Re nu >= 1/2".into()));
    }
    let f = &rc.field;
    let q = &rc.modulus;
    let a = cusp.ideal(f)?;
    if !f.coprime(&a, q) {
        return Err(Error::Invalid("cusp ideal must be prime to q".into()));
    }
    let rd = f.principal(integral_part(f, r)?)?;
    let aq = f.ideal_mul(&a, q);
    let rq = ResidueRing::new(*q, f);
    let gamma_res = rq.reduce(cusp.gamma);
    let cs: Vec<AlgInt> = f
        .enumerate_ideal_elements(&a, bound_b as f64, EnumMode::UpToUnits { group: rc.units, shift: None })
        .into_iter()
        .filter(|&c| rq.reduce(c) == gamma_res)
        .collect();
    let mut value = C64::new(0.0, 0.0);
    let mut pairs = 0u64;
    for &c in &cs {
        let (cinv, nc) = inverse_parts(f, c);
        let qc = f.ideal_mul(q, &f.principal(c)?);
        let rr = ResidueRing::new(qc, f);
        let mut inner = C64::new(0.0, 0.0);
        for y in rr.reps() {
            if !f.contains(&aq, y) {
                continue;
            }
            let d = f.add(cusp.delta, y);
            if f.ideal_from_gens(&[c, d])? != a {
                continue;
            }
            inner += C64::from_polar(1.0, 2.0 * PI * trace_phase(f, r, f.mul(d, cinv), nc));
            pairs += 1;
        }
        let weight = (-(1.0 + 2.0 * nu) * (nc.unsigned_abs() as f64).ln()).exp();
        value += weight * lambda.on_element(f, c).conj() * inner;
    }
    // |inner| <= tau(r d q) N(r d q); orbit count grows like density * B
    let top = f.ideal_mul(&rd, q);
    let ndiv = ideal_divisors(f, &top)?.len() as f64;
    let density = cs.len().max(1) as f64 / bound_b as f64;
    let sig = nu.re;
    let tail = ndiv * top.norm() as f64 * density * (bound_b as f64).powf(-2.0 * sig) / (2.0 * sig);
    Ok(DirectSum { value, tail, bound_b, moduli: cs.len(), pairs })
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassPiece {
    pub tau: usize,
    pub b0: Ideal,
    pub lambda_b0: C64,
    pub q: QFactor,
    pub psi: C64,
    /// lambda(b0) N(b0)^{1+2nu} Q psi
    pub phi: C64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirichletPieces {
    pub nu: C64,
    pub mu1: f64,
    pub extension: String,
    pub pieces: Vec<ClassPiece>,
    pub assembled: C64,
    pub direct: Option<DirectSum>,
}

#[derive(Clone, Copy, Debug)]
pub struct PhiOptions {
    pub bound_b: u64,
    pub q_terms: u64,
}

impl Default for PhiOptions {
    fn default() -> Self {
        PhiOptions { bound_b: 2000, q_terms: 100_000 }
    }
}

/// Phi_r assembled over the ray classes, with the direct double sum when
/// Re nu >= 1/2.
pub fn phi_series(
    rc: &RayClassGroup,
    lambda: &HeckeCharacter,
    r: FieldElt,
    cusp: &CuspData,
    nu: C64,
    o: &PhiOptions,
) -> Result<DirichletPieces> {
    let table = ideal_table(rc, lambda, o.q_terms)?;
    let mut pieces = Vec::with_capacity(rc.order);
    let mut assembled = C64::new(0.0, 0.0);
    for tau in 0..rc.order {
        let b0 = rc.reps[tau];
        let lambda_b0 = lambda.value(rc, &b0)?;
        let qf = q_factor(rc, &table, tau, nu)?;
        let psi = psi_factor(rc, lambda, r, cusp, &b0, nu)?;
        let nb = b0.norm() as f64;
        let phi = lambda_b0 * ((1.0 + 2.0 * nu) * nb.ln()).exp() * qf.via_l * psi;
        assembled += phi;
        pieces.push(ClassPiece { tau, b0, lambda_b0, q: qf, psi, phi });
    }
    let direct = if nu.re >= 0.5 { Some(phi_direct(rc, lambda, r, cusp, nu, o.bound_b)?) } else { None };
    Ok(DirichletPieces {
        nu,
        mu1: lambda.mu[0],
        extension: "lambda = 1 on the class representatives".into(),
        pieces,
        assembled,
        direct,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CoeffBound {
    pub value: f64,
    pub divisor_count: usize,
    pub log_factor: f64,
    pub lower_constant: f64,
}

/// Bound for |Phi_r| on Re nu = 0: h tau(r d q) (log^7(2+|t|) + log^7 |mu|) / c_L,
/// with c_L from `l_lower_bound_check`.
pub fn eisenstein_coeff_bound(
    rc: &RayClassGroup,
    r: FieldElt,
    t: f64,
    mu_norm: f64,
    lower_constant: f64,
) -> Result<CoeffBound> {
    if lower_constant <= 0.0 {
        return Err(Error::Invalid("lower-bound constant must be positive".into()));
    }
    let f = &rc.field;
    let top = f.ideal_mul(&f.principal(integral_part(f, r)?)?, &rc.modulus);
    let divisor_count = ideal_divisors(f, &top)?.len();
    let log_factor = log7_factor(t, mu_norm);
    Ok(CoeffBound {
        value: rc.order as f64 * divisor_count as f64 * log_factor / lower_constant,
        divisor_count,
        log_factor,
        lower_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q1(dd: i64) -> (FieldContext, Ideal) {
        let f = FieldContext::new(dd).unwrap();
        let q = f.ideal_int(1);
        (f, q)
    }

    #[test]
    fn groups_over_q() {
        let f = FieldContext::new(1).unwrap();
        assert_eq!(ray_class_group(&f, &f.ideal_int(1)).unwrap().order, 1);
        let g = ray_class_group(&f, &f.ideal_int(4)).unwrap();
        assert_eq!(g.order, 2);
        assert_eq!(g.class_of(&f.ideal_int(7)).unwrap(), g.class_of(&f.ideal_int(3)).unwrap());
        let g = ray_class_group(&f, &f.ideal_int(15)).unwrap();
        assert_eq!(g.order, 8);
        assert!(g.check_axioms());
        assert!(g.orthogonality_defect() < 1e-12);
    }

    #[test]
    fn narrow_classes_of_quadratic_fields() {
        let (f, q) = q1(5);
        assert_eq!(ray_class_group(&f, &q).unwrap().order, 1);
        // eps0 = 2 + sqrt 3 has norm 1, so the narrow class number is 2
        let (f, q) = q1(3);
        let g = ray_class_group(&f, &q).unwrap();
        assert_eq!(g.order, 2);
        assert!(g.check_axioms());
        // 1 + sqrt 3 has norm -2 and so does every generator
        let two = f.principal(AlgInt::new(1, 1)).unwrap();
        assert_eq!(g.class_of(&two).unwrap(), 1);
        assert_eq!(g.class_of(&f.ideal_mul(&two, &two)).unwrap(), 0);
    }

    #[test]
    fn modulus_three_over_sqrt5() {
        let f = FieldContext::new(5).unwrap();
        let g = ray_class_group(&f, &f.ideal_int(3)).unwrap();
        // 2^2 * 8 / [units : totally positive units = 1 mod 3] = 32 / 16
        assert_eq!(g.order, 2);
        assert!(g.orthogonality_defect() < 1e-12);
    }

    #[test]
    fn character_tables_are_orthogonal() {
        let f = FieldContext::new(1).unwrap();
        for m in [1, 5, 8, 12, 24, 60] {
            let g = ray_class_group(&f, &f.ideal_int(m)).unwrap();
            assert_eq!(g.order as u64, arith::euler_phi(m as u64));
            assert_eq!(g.chars.len(), g.order);
            assert!(g.orthogonality_defect() < 1e-12, "m = {m}");
        }
    }

    #[test]
    fn lattice_generator_satisfies_the_definition() {
        let (f, q) = q1(5);
        let g = ray_class_group(&f, &q).unwrap();
        let mu = mu_lattice(&f);
        let ch = HeckeCharacter::new(&g, mu).unwrap();
        // a = eps0^2 acting at infinity: a^{i mu} = 1
        let e2 = f.mul(f.eps0, f.eps0);
        let a = C64::from_polar(1.0, ch.mu[0] * f.log_ratio(e2));
        assert!((a - 1.0).norm() < 1e-12);
        assert!(HeckeCharacter::new(&g, 0.5 * mu).is_err());
        assert_eq!(mu_lattice(&FieldContext::new(1).unwrap()), 0.0);
    }

    #[test]
    fn hecke_character_is_multiplicative() {
        let (f, q) = q1(5);
        let g = ray_class_group(&f, &q).unwrap();
        let ch = HeckeCharacter::new(&g, 2.0 * mu_lattice(&f)).unwrap();
        let ids: Vec<Ideal> = [AlgInt::new(3, 1), AlgInt::new(5, -2), AlgInt::new(7, 3)]
            .iter()
            .map(|&x| f.principal(x).unwrap())
            .collect();
        for a in &ids {
            assert!((ch.value(&g, a).unwrap().norm() - 1.0).abs() < 1e-12);
            for b in &ids {
                let ab = ch.value(&g, &f.ideal_mul(a, b)).unwrap();
                let prod = ch.value(&g, a).unwrap() * ch.value(&g, b).unwrap();
                assert!((ab - prod).norm() < 1e-12);
            }
        }
        // independent of the generator
        let x = AlgInt::new(3, 1);
        for k in -3..=3 {
            let y = f.mul(x, f.unit_pow(k));
            assert!((ch.on_element(&f, y) - ch.on_element(&f, x)).norm() < 1e-10);
        }
    }

    #[test]
    fn counting_over_q() {
        let f = FieldContext::new(1).unwrap();
        let g = ray_class_group(&f, &f.ideal_int(1)).unwrap();
        let t = ideal_table(&g, &HeckeCharacter::TRIVIAL, 1000).unwrap();
        for n in [1, 10, 999, 1000] {
            assert_eq!(t.s_lambda(0, n), C64::new(n as f64, 0.0));
        }
        let mob: i64 = t.entries.iter().map(|e| e.mobius as i64).sum();
        assert_eq!(mob, 2); // Mertens M(1000)
    }

    #[test]
    fn zeta_two() {
        let f = FieldContext::new(1).unwrap();
        let g = ray_class_group(&f, &f.ideal_int(1)).unwrap();
        let l = LSeries::build(&g, &HeckeCharacter::TRIVIAL, 0, 10_000).unwrap();
        let v = l.eval(C64::new(2.0, 0.0), 1e-12).unwrap();
        assert!((v.value.re - PI * PI / 6.0).abs() < 1e-9);
        assert!(l.eval_at(C64::new(1.0, 0.0), 100).is_err());
    }

    #[test]
    fn character_at_one_has_no_pole() {
        let f = FieldContext::new(1).unwrap();
        let g = ray_class_group(&f, &f.ideal_int(4)).unwrap();
        let l = LSeries::build(&g, &HeckeCharacter::TRIVIAL, 1, 100_000).unwrap();
        let v = l.eval(C64::new(1.0, 0.0), 1e-6).unwrap();
        // Leibniz
        assert!((v.value.re - PI / 4.0).abs() < 1e-6, "{}", v.value);
    }

    #[test]
    fn psi_examples_over_q() {
        let f = FieldContext::new(1).unwrap();
        let g = ray_class_group(&f, &f.ideal_int(1)).unwrap();
        let cusp = CuspData { gamma: AlgInt::ONE, delta: AlgInt::ZERO };
        let one = f.ideal_int(1);
        let nu = C64::new(0.5, 0.0);
        let p1 = psi_factor(&g, &HeckeCharacter::TRIVIAL, FieldElt::int(AlgInt::ONE), &cusp, &one, nu).unwrap();
        assert!((p1 - 1.0).norm() < 1e-14);
        let nu = C64::new(0.3, 0.7);
        let p2 = psi_factor(&g, &HeckeCharacter::TRIVIAL, FieldElt::int(AlgInt::int(2)), &cusp, &one, nu).unwrap();
        let want = 1.0 + (-2.0 * nu * 2f64.ln()).exp();
        assert!((p2 - want).norm() < 1e-14);
    }

    #[test]
    fn divisors() {
        let f = FieldContext::new(5).unwrap();
        assert_eq!(ideal_divisors(&f, &f.ideal_int(6)).unwrap().len(), 2 * 2);
        assert_eq!(ideal_divisors(&f, &f.ideal_int(11)).unwrap().len(), 4);
        let q = FieldContext::new(1).unwrap();
        assert_eq!(ideal_divisors(&q, &q.ideal_int(12)).unwrap().len(), 6);
    }
}
