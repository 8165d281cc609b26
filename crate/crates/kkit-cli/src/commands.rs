use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use num_complex::Complex64 as C64;
use serde::Serialize;

use kkit::density::{self, Hypercube, MockModel, MockSpec};
use kkit::numberfield::{parse_algint, parse_elt, AlgInt, FieldContext, FieldElt, Ideal};
use kkit::rayclass::{self, HeckeCharacter, IdealTable, RayClassGroup};
use kkit::sumformula::{self, parse_grid, Partition};

use crate::config::RunConfig;
use crate::output::{num, Sink};
use crate::{missing, Command, DensityCmd, FieldArgs, ModulusArgs};

/// Resolved settings for one subcommand.
struct Ctx {
    cfg: RunConfig,
    path: &'static [&'static str],
}

impl Ctx {
    fn need(&self, key: &str, flag: &str) -> String {
        match self.cfg.get(key) {
            Some(v) => v.to_string(),
            None => missing(self.path, flag, key),
        }
    }

    fn parse<T: FromStr>(&self, key: &str, flag: &str) -> anyhow::Result<T> {
        let v = self.need(key, flag);
        v.parse().map_err(|_| anyhow!("{key}: cannot parse '{v}'"))
    }

    fn parse_or<T: FromStr>(&self, key: &str, default: T) -> anyhow::Result<T> {
        match self.cfg.get(key) {
            Some(v) => v.parse().map_err(|_| anyhow!("{key}: cannot parse '{v}'")),
            None => Ok(default),
        }
    }

    fn field(&self) -> anyhow::Result<FieldContext> {
        Ok(FieldContext::new(self.parse("field.D", "--D")?)?)
    }

    /// The modulus, (1) when not given.
    fn modulus(&self, f: &FieldContext) -> anyhow::Result<Ideal> {
        match self.cfg.get("field.modulus") {
            None => Ok(f.ideal_int(1)),
            Some(s) if s.trim_start().starts_with('[') => Ok(f.parse_ideal(s)?),
            Some(s) => Ok(f.ideal_int(s.trim().parse().map_err(|_| anyhow!("field.modulus: cannot parse '{s}'"))?)),
        }
    }

    /// r from the config, else 1 over Q and the generator of the inverse different otherwise.
    fn r(&self, f: &FieldContext) -> anyhow::Result<FieldElt> {
        match self.cfg.get("sum.r") {
            Some(s) => Ok(parse_elt(s)?),
            None if f.d == 1 => Ok(FieldElt::int(AlgInt::ONE)),
            None => Ok(f.dual_generator()),
        }
    }
}

fn put_field(cfg: &mut RunConfig, a: &FieldArgs) {
    cfg.set_opt("field.D", a.d);
}

fn put_modulus(cfg: &mut RunConfig, a: &ModulusArgs) {
    cfg.set_opt("field.modulus", a.q.clone());
}

fn parse_complex(s: &str) -> anyhow::Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || anyhow!("cannot parse complex number '{s}'");
    let Some(body) = t.strip_suffix('i') else {
        return Ok(C64::new(t.parse().map_err(|_| bad())?, 0.0));
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let im = &body[i..];
            let im = if im == "+" || im == "-" { format!("{im}1") } else { im.to_string() };
            Ok(C64::new(body[..i].parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?))
        }
        None => {
            let im = if body.is_empty() || body == "+" || body == "-" { format!("{body}1") } else { body.to_string() };
            Ok(C64::new(0.0, im.parse().map_err(|_| bad())?))
        }
    }
}

/// Ideal tables, memoized as JSON under $KKIT_CACHE_DIR when it is set.
fn cached_table(f: &FieldContext, rc: &RayClassGroup, lambda: &HeckeCharacter, mu_k: i64, n: u64) -> anyhow::Result<IdealTable> {
    let Ok(dir) = std::env::var("KKIT_CACHE_DIR") else {
        return Ok(rayclass::ideal_table(rc, lambda, n)?);
    };
    let m = rc.modulus;
    let name = format!("ideals-D{}-q{}_{}_{}-mu{}-n{}.json", f.dd, m.a, m.b, m.c, mu_k, n);
    let path = std::path::Path::new(&dir).join(name);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(t) = serde_json::from_str::<IdealTable>(&text) {
            return Ok(t);
        }
    }
    let t = rayclass::ideal_table(rc, lambda, n)?;
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {dir}"))?;
    std::fs::write(&path, serde_json::to_string(&t)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(t)
}

fn hecke(f: &FieldContext, rc: &RayClassGroup, mu_k: i64) -> anyhow::Result<HeckeCharacter> {
    Ok(HeckeCharacter::new(rc, mu_k as f64 * rayclass::mu_lattice(f))?)
}

#[derive(Serialize)]
struct FieldInfo {
    #[serde(rename = "D")]
    dd: i64,
    #[serde(rename = "D_F")]
    disc: i64,
    degree: usize,
    omega_min_poly: String,
    eps0: String,
    eps0_norm: i64,
    log_eps0: f64,
    different: String,
    dual_generator: String,
    embeddings_of_omega: Vec<f64>,
}

pub fn run(command: Command, mut cfg: RunConfig, sink: &Sink) -> anyhow::Result<ExitCode> {
    use crate::{BesselCmd, EtaCmd, FieldCmd, GeometricCmd, KloostermanCmd, LfunCmd, PhiCmd, RayclassCmd};
    match command {
        Command::Field(FieldCmd::Info(a)) => {
            put_field(&mut cfg, &a);
            let ctx = Ctx { cfg, path: &["field", "info"] };
            let f = ctx.field()?;
            let info = FieldInfo {
                dd: f.dd,
                disc: f.disc,
                degree: f.d,
                omega_min_poly: if f.d == 1 { "w = 1".into() } else { format!("w^2 = {} w + {}", f.t, f.n) },
                eps0: f.eps0.to_string(),
                eps0_norm: f.eps0_norm,
                log_eps0: f.log_eps,
                different: f.different.to_string(),
                dual_generator: f.dual_generator().to_string(),
                embeddings_of_omega: if f.d == 1 { vec![1.0] } else { f.sigma.to_vec() },
            };
            sink.json("field info", &ctx.cfg, &info)?;
        }
        Command::Kloosterman(KloostermanCmd::Eval { field, r, c }) => {
            put_field(&mut cfg, &field);
            cfg.set_opt("sum.r", r);
            cfg.set_opt("kloosterman.c", c);
            let ctx = Ctx { cfg, path: &["kloosterman", "eval"] };
            let f = ctx.field()?;
            let r = parse_elt(&ctx.need("sum.r", "--r"))?;
            let c = parse_algint(&ctx.need("kloosterman.c", "--c"))?;
            #[derive(Serialize)]
            struct Out {
                value: kkit::kloosterman::KloostermanValue,
                abs: f64,
                norm_c: i128,
                weil_salie_ratio: f64,
            }
            let value = kkit::kloosterman::kloosterman_sum(&f, r, c)?;
            let out = Out {
                abs: value.value().norm(),
                norm_c: f.norm(c),
                weil_salie_ratio: kkit::kloosterman::weil_salie_ratio(&f, r, c, 0.1)?,
                value,
            };
            sink.json("kloosterman eval", &ctx.cfg, &out)?;
        }
        Command::Kloosterman(KloostermanCmd::Scan { field, modulus, r, max_norm, eps }) => {
            put_field(&mut cfg, &field);
            put_modulus(&mut cfg, &modulus);
            cfg.set_opt("sum.r", r);
            cfg.set_opt("kloosterman.max_norm", max_norm);
            cfg.set_opt("kloosterman.eps", eps);
            let ctx = Ctx { cfg, path: &["kloosterman", "scan"] };
            let f = ctx.field()?;
            let q = ctx.modulus(&f)?;
            let r = ctx.r(&f)?;
            let bound: u64 = ctx.parse("kloosterman.max_norm", "--max-norm")?;
            let eps: f64 = ctx.parse_or("kloosterman.eps", 0.1)?;
            let mode = kkit::numberfield::EnumMode::UpToUnits { group: f.full_unit_group(), shift: None };
            let mut cs = f.enumerate_ideal_elements(&q, bound as f64, mode);
            cs.sort_by_key(|&c| (f.norm(c).unsigned_abs(), c));
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            let mut max_im: f64 = 0.0;
            for c in cs {
                let s = kkit::kloosterman::kloosterman_sum(&f, r, c)?;
                let nrr = kkit::kloosterman::nrr_factor(&f, r, c)?;
                let ratio = kkit::kloosterman::weil_salie_ratio(&f, r, c, eps)?;
                worst = worst.max(ratio);
                max_im = max_im.max(s.im.abs());
                rows.push(vec![
                    f.dd.to_string(),
                    q.norm().to_string(),
                    r.to_string(),
                    c.to_string(),
                    f.norm(c).to_string(),
                    num(s.re),
                    num(nrr),
                    num(ratio),
                ]);
            }
            let notes = [("max_ratio".to_string(), num(worst)), ("max_abs_imag".to_string(), num(max_im))];
            let header = ["D", "q_norm", "r", "c_repr", "norm_c", "S_value", "nrr", "ratio"];
            sink.csv("kloosterman scan", &ctx.cfg, &header, &rows, &notes)?;
        }
        Command::Eta(EtaCmd::Eval { family, s }) => {
            cfg.set_opt("testfn.family", family);
            cfg.set_opt("testfn.s", s);
            let ctx = Ctx { cfg, path: &["eta", "eval"] };
            let s: f64 = ctx.parse("testfn.s", "--s")?;
            let k = match ctx.need("testfn.family", "--family").as_str() {
                "plus" => kkit::testfn::special_plus(s)?,
                "minus" => kkit::testfn::special_minus(s)?,
                other => return Err(anyhow!("testfn.family: expected plus or minus, got '{other}'")),
            };
            let v = kkit::testfn::eta(&k, sumformula::ETA_TOL)?;
            sink.json("eta eval", &ctx.cfg, &v)?;
        }
        Command::Bessel(BesselCmd::Check { family, alpha, eps, s_grid, y_grid, cross }) => {
            if cross {
                let ctx = Ctx { cfg, path: &["bessel", "check"] };
                let (w, t) = kkit::verify::cross_grid();
                let rep = kkit::verify::bessel_cross_check(&w, &t)?;
                let rows: Vec<Vec<String>> = rep
                    .points
                    .iter()
                    .map(|p| vec![num(p.w.re), num(p.w.im), num(p.t), p.methods.join("|"), num(p.discrepancy)])
                    .collect();
                let notes = [
                    ("max_discrepancy".to_string(), num(rep.max_discrepancy)),
                    ("single_method_points".to_string(), rep.single_method.to_string()),
                ];
                sink.csv("bessel check", &ctx.cfg, &["w_re", "w_im", "t", "methods", "discrepancy"], &rows, &notes)?;
                return Ok(ExitCode::SUCCESS);
            }
            cfg.set_opt("testfn.family", family);
            cfg.set_opt("bessel.alpha", alpha);
            cfg.set_opt("bessel.eps", eps);
            cfg.set_opt("grids.s", s_grid);
            cfg.set_opt("grids.y", y_grid);
            let ctx = Ctx { cfg, path: &["bessel", "check"] };
            use kkit::bessel::Sign;
            let sign = match ctx.need("testfn.family", "--family").as_str() {
                "plus" => Sign::Plus,
                "minus" => Sign::Minus,
                other => return Err(anyhow!("testfn.family: expected plus or minus, got '{other}'")),
            };
            let alpha: f64 = ctx.parse_or("bessel.alpha", 0.6)?;
            let eps: f64 = ctx.parse_or("bessel.eps", 0.1)?;
            let ss = parse_grid(ctx.cfg.get("grids.s").unwrap_or("0.5,0.1,0.02"))?;
            let ys = parse_grid(ctx.cfg.get("grids.y").unwrap_or("1e-4:1e3:log:8"))?;
            let rep = kkit::bessel::verify_bessel_bounds(sign, &ss, &ys, alpha, eps)?;
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| vec![num(r.s), num(r.y), num(r.value.re), num(r.value.im), num(r.envelope), num(r.ratio)])
                .collect();
            let mut notes = vec![("max_ratio".to_string(), num(rep.max_ratio))];
            for (s, slope) in &rep.small_y_slopes {
                notes.push((format!("small_y_slope(s={s})"), num(*slope)));
            }
            sink.csv("bessel check", &ctx.cfg, &["s", "y", "value_re", "value_im", "envelope", "ratio"], &rows, &notes)?;
        }
        Command::Geometric(GeometricCmd::Scan { field, modulus, r, partition, s_grid, bound_b }) => {
            put_field(&mut cfg, &field);
            put_modulus(&mut cfg, &modulus);
            cfg.set_opt("sum.r", r);
            cfg.set_opt("sum.partition", partition);
            cfg.set_opt("grids.s", s_grid);
            cfg.set_opt("sum.B", bound_b);
            let ctx = Ctx { cfg, path: &["geometric", "scan"] };
            let f = ctx.field()?;
            let q = ctx.modulus(&f)?;
            let r = ctx.r(&f)?;
            let p = Partition::parse(f.d, &ctx.need("sum.partition", "--partition"))?;
            if !p.e.is_empty() {
                return Err(anyhow!("geometric scan takes Q places only; E must be empty"));
            }
            let grid = parse_grid(&ctx.need("grids.s", "--s-grid"))?;
            let o = sumformula::SideOptions { bound_b: ctx.parse_or("sum.B", 2000.0)?, ..Default::default() };
            let rep = sumformula::dominance_scan(&f, &q, r, &p, &[], &grid, &o)?;
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| vec![num(r.s), num(r.delta), num(r.delta_pred), num(r.kl_value), num(r.kl_tail), num(r.kl_bound)])
                .collect();
            let notes = [
                ("p_delta".to_string(), num(rep.p_delta)),
                ("p_k".to_string(), num(rep.p_k)),
                ("margin".to_string(), num(rep.margin)),
                ("bound_held".to_string(), rep.bound_held.to_string()),
                ("inconclusive".to_string(), rep.inconclusive.clone().unwrap_or_else(|| "no".into())),
                ("passed".to_string(), rep.passed.to_string()),
            ];
            sink.csv("geometric scan", &ctx.cfg, &["s", "delta", "delta_pred", "kl_value", "kl_tail", "kl_bound"], &rows, &notes)?;
        }
        Command::Rayclass(RayclassCmd::Table { field, modulus, terms }) => {
            put_field(&mut cfg, &field);
            put_modulus(&mut cfg, &modulus);
            cfg.set_opt("rayclass.terms", terms);
            let ctx = Ctx { cfg, path: &["rayclass", "table"] };
            let f = ctx.field()?;
            let q = ctx.modulus(&f)?;
            let n: u64 = ctx.parse_or("rayclass.terms", 1000)?;
            let rc = rayclass::ray_class_group(&f, &q)?;
            let t = cached_table(&f, &rc, &HeckeCharacter::TRIVIAL, 0, n)?;
            #[derive(Serialize)]
            struct Out<'a> {
                group: &'a RayClassGroup,
                norm_bound: u64,
                ideals_per_class: Vec<u64>,
            }
            let ideals_per_class = (0..rc.order).map(|tau| t.entries.iter().filter(|e| e.class as usize == tau).count() as u64).collect();
            sink.json("rayclass table", &ctx.cfg, &Out { group: &rc, norm_bound: n, ideals_per_class })?;
        }
        Command::Lfun(LfunCmd::Eval { field, modulus, chi, mu_k, t0, t1, steps, t, terms }) => {
            put_field(&mut cfg, &field);
            put_modulus(&mut cfg, &modulus);
            cfg.set_opt("rayclass.chi", chi);
            cfg.set_opt("rayclass.mu_k", mu_k);
            cfg.set_opt("grids.t", t);
            cfg.set_opt("lfun.t0", t0);
            cfg.set_opt("lfun.t1", t1);
            cfg.set_opt("lfun.steps", steps);
            cfg.set_opt("rayclass.terms", terms);
            let ctx = Ctx { cfg, path: &["lfun", "eval"] };
            let f = ctx.field()?;
            let q = ctx.modulus(&f)?;
            let chi: usize = ctx.parse_or("rayclass.chi", 0)?;
            let mu_k: i64 = ctx.parse_or("rayclass.mu_k", 0)?;
            let ts = match ctx.cfg.get("grids.t") {
                Some(g) => parse_grid(g)?,
                None => {
                    let t0: f64 = ctx.parse("lfun.t0", "--t0")?;
                    let t1: f64 = ctx.parse("lfun.t1", "--t1")?;
                    let steps: usize = ctx.parse("lfun.steps", "--steps")?;
                    if steps == 0 {
                        return Err(anyhow!("lfun.steps must be at least 1"));
                    }
                    (0..=steps).map(|i| t0 + (t1 - t0) * i as f64 / steps as f64).collect()
                }
            };
            let n: u64 = ctx.parse_or("rayclass.terms", rayclass::MAX_TERMS)?;
            let rc = rayclass::ray_class_group(&f, &q)?;
            let lam = hecke(&f, &rc, mu_k)?;
            let table = cached_table(&f, &rc, &lam, mu_k, n)?;
            let series = rayclass::LSeries::new(&rc, &table, chi)?;
            let mut rows = Vec::new();
            for t in ts {
                let v = series.eval(C64::new(1.0, t), rayclass::L_TARGET)?;
                let lb = v.value.norm() * rayclass::log7_factor(t, series.mu_norm);
                rows.push(vec![num(t), num(v.value.re), num(v.value.im), num(v.value.norm()), num(lb)]);
            }
            sink.csv("lfun eval", &ctx.cfg, &["t", "re", "im", "abs", "log7bound"], &rows, &[])?;
        }
        Command::Phi(PhiCmd::Check { field, modulus, r, nu, bound_b, mu_k, gamma, delta }) => {
            put_field(&mut cfg, &field);
            put_modulus(&mut cfg, &modulus);
            cfg.set_opt("sum.r", r);
            cfg.set_opt("eisenstein.nu", nu);
            cfg.set_opt("sum.B", bound_b);
            cfg.set_opt("rayclass.mu_k", mu_k);
            cfg.set_opt("eisenstein.gamma", gamma);
            cfg.set_opt("eisenstein.delta", delta);
            let ctx = Ctx { cfg, path: &["phi", "check"] };
            let f = ctx.field()?;
            let q = ctx.modulus(&f)?;
            let r = ctx.r(&f)?;
            let nu = parse_complex(&ctx.need("eisenstein.nu", "--nu"))?;
            let bound_b: u64 = ctx.parse_or("sum.B", 500)?;
            let mu_k: i64 = ctx.parse_or("rayclass.mu_k", 0)?;
            let gamma = parse_algint(ctx.cfg.get("eisenstein.gamma").unwrap_or("1"))?;
            let delta = parse_algint(ctx.cfg.get("eisenstein.delta").unwrap_or("0"))?;
            let rc = rayclass::ray_class_group(&f, &q)?;
            let lam = hecke(&f, &rc, mu_k)?;
            let cusp = rayclass::CuspData { gamma, delta };
            let o = rayclass::PhiOptions { bound_b, ..Default::default() };
            let pieces = rayclass::phi_series(&rc, &lam, r, &cusp, nu, &o)?;
            sink.json("phi check", &ctx.cfg, &pieces)?;
        }
        Command::Density(DensityCmd::Constants { field, partition, cube }) => {
            put_field(&mut cfg, &field);
            cfg.set_opt("sum.partition", partition);
            cfg.set_opt("density.cube", cube);
            let ctx = Ctx { cfg, path: &["density", "constants"] };
            let f = ctx.field()?;
            let p = Partition::parse(f.d, &ctx.need("sum.partition", "--partition"))?;
            let h = Hypercube::parse(ctx.cfg.get("density.cube").unwrap_or(""))?;
            #[derive(Serialize)]
            struct Out {
                main: density::DensityConstants,
                corgen: f64,
            }
            let out = Out { main: density::mainthm_constant(&f, &p, &h)?, corgen: density::corgen_constant(&f, &p.e, &h)? };
            sink.json("density constants", &ctx.cfg, &out)?;
        }
        Command::Density(DensityCmd::Tauber { field, model, seed, partition, cube, resolution, x_max, x }) => {
            put_field(&mut cfg, &field);
            cfg.set_opt("density.model", model);
            cfg.set_opt("seed", seed);
            cfg.set_opt("sum.partition", partition);
            cfg.set_opt("density.cube", cube);
            cfg.set_opt("density.resolution", resolution);
            cfg.set_opt("density.x_max", x_max);
            cfg.set_opt("grids.X", x);
            let ctx = Ctx { cfg, path: &["density", "tauber"] };
            let model: MockModel = ctx.need("density.model", "--model").parse()?;
            let seed: u64 = ctx.parse("seed", "--seed")?;
            let f = ctx.field()?;
            let p = Partition::parse(f.d, &ctx.need("sum.partition", "--partition"))?;
            let h = Hypercube::parse(ctx.cfg.get("density.cube").unwrap_or(""))?;
            let spec = MockSpec {
                model,
                resolution: ctx.parse_or("density.resolution", 1000)?,
                x_max: ctx.parse_or("density.x_max", 2e4)?,
                seed,
            };
            let xs = parse_grid(ctx.cfg.get("grids.X").unwrap_or("100:10000:log"))?;
            let target = density::mainthm_constant(&f, &p, &h)?.value;
            let m = density::generate_mock_measure(&f, &p, &h, &spec)?;
            let rows: Vec<Vec<String>> = density::density_rows(&m.atoms, &p, &h, target, &xs)
                .iter()
                .map(|r| vec![num(r.x), num(r.scaled), num(r.target), num(r.rel_err)])
                .collect();
            let notes = [("atoms".to_string(), m.atoms.len().to_string())];
            sink.csv("density tauber", &ctx.cfg, &["X", "muX_scaled", "target", "rel_err"], &rows, &notes)?;
        }
        Command::VerifyAll(a) => {
            let results = kkit::verify::verify_all(a.quick, |r| println!("{}", r.line()));
            let passed = results.iter().filter(|r| r.passed).count();
            println!("{passed}/{} passed", results.len());
            if sink.path.is_some() {
                cfg.set("verify.quick", a.quick.to_string());
                sink.json("verify-all", &cfg, &results)?;
            }
            return Ok(if passed == results.len() { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_complex("0.5+3i").unwrap(), C64::new(0.5, 3.0));
        assert_eq!(parse_complex("1 - 2.5i").unwrap(), C64::new(1.0, -2.5));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("1e-3+2e-1i").unwrap(), C64::new(1e-3, 0.2));
        assert!(parse_complex("x").is_err());
    }
}
