//! The `surgery` subcommand: storage-replacement operations with SAT, GAC
//! and SOPP verdicts.

use droplab::circuit::{first_site, hull_and_facets, interior_area, outermost_circuit, regeneration_sites};
use droplab::snapshot::Snapshot;
use droplab::surgery::{
    gac_check, sector_storage_replace, sopp_check, storage_shift_replace, SurgeryOutcome, DEFAULT_RESAMPLE_SWEEPS,
    GAC_EPS,
};
use droplab::wulff::DEFAULT_ANNULUS;
use droplab::{BondConfig, BoxGeom, Error, Region, Result, Site, StreamRng};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::SurgeryArgs;
use crate::commands::{default_disc, read_wulff};
use crate::Ctx;

/// The first satisfactory-input event and its ingredients. `x`, `y` end
/// the longest hull facet; `x'`, `y'` are the first regeneration sites
/// met clockwise from `x` and counterclockwise from `y`.
#[derive(Debug, Clone, Serialize)]
pub struct SatReport {
    pub n: u32,
    pub t: f64,
    pub circuit: bool,
    pub area: u64,
    pub area_event: bool,
    pub mfl: f64,
    pub mfl_threshold: f64,
    pub mfl_event: bool,
    pub x: Option<Site>,
    pub y: Option<Site>,
    pub x_prime: Option<Site>,
    pub y_prime: Option<Site>,
    pub regen_offset: Option<f64>,
    pub regen_threshold: f64,
    pub regen_event: bool,
    pub annulus: (f64, f64),
    pub annulus_event: bool,
    pub sat1: bool,
}

pub fn sat_report(cfg: &BondConfig, n: u32, t: f64, q0: f64, c0: f64, annulus: (f64, f64)) -> Result<SatReport> {
    let nf = n as f64;
    let mut r = SatReport {
        n,
        t,
        circuit: false,
        area: 0,
        area_event: false,
        mfl: 0.0,
        mfl_threshold: nf.powf(2.0 / 3.0) * t,
        mfl_event: false,
        x: None,
        y: None,
        x_prime: None,
        y_prime: None,
        regen_offset: None,
        regen_threshold: nf.cbrt() * t.sqrt(),
        regen_event: false,
        annulus: (annulus.0 * nf, annulus.1 * nf),
        annulus_event: false,
        sat1: false,
    };
    let Some(c) = outermost_circuit(cfg) else {
        return Ok(r);
    };
    r.circuit = true;
    r.area = interior_area(&c);
    r.area_event = r.area >= n as u64 * n as u64;
    // longest facet, first in hull order on ties
    let hull = hull_and_facets(&c);
    let mut best: Option<(Site, Site)> = None;
    for (a, b) in hull.facets() {
        if best.is_none_or(|(p, q)| a.dist(b) > p.dist(q)) {
            best = Some((a, b));
        }
    }
    if let Some((a, b)) = best {
        let (x, y) = if a.cross(b) > 0 { (a, b) } else { (b, a) };
        r.mfl = x.dist(y);
        r.mfl_event = r.mfl >= r.mfl_threshold;
        r.x = Some(x);
        r.y = Some(y);
        let rg = regeneration_sites(&c, q0, c0)?;
        r.x_prime = first_site(x, &rg, true);
        r.y_prime = first_site(y, &rg, false);
        if let (Some(xp), Some(yp)) = (r.x_prime, r.y_prime) {
            let off = xp.dist(x).max(yp.dist(y));
            r.regen_offset = Some(off);
            r.regen_event = off <= r.regen_threshold;
        }
    }
    r.annulus_event = c.vertices().iter().all(|v| (r.annulus.0..=r.annulus.1).contains(&v.norm()));
    r.sat1 = r.area_event && r.mfl_event && r.regen_event && r.annulus_event;
    Ok(r)
}

fn parse_site(s: &str) -> Result<Site> {
    s.trim().parse::<Site>()
}

/// Rectangle `x0,y0:x1,y1`.
fn parse_rect(geom: BoxGeom, s: &str) -> Result<Region> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| Error::input(format!("expected `x0,y0:x1,y1`, got `{s}`")))?;
    Ok(Region::rect(geom, parse_site(lo)?, parse_site(hi)?))
}

fn gac_json(cfg: &BondConfig, x: Site, y: Site, eps: f64, q0: f64) -> Result<Value> {
    Ok(match gac_check(cfg, x, y, eps, q0) {
        Ok(v) => json!({ "holds": v.holds(), "detail": v }),
        Err(e @ Error::Input(_)) => json!({ "error": e.to_string() }),
        Err(e) => return Err(e),
    })
}

/// `omega_2` placed in an otherwise closed box.
fn stored_config(geom: BoxGeom, out: &SurgeryOutcome) -> BondConfig {
    let mut cfg = BondConfig::closed(geom);
    for &(e, s) in &out.stored {
        cfg.set(e, s);
    }
    cfg
}

pub fn surgery(ctx: &Ctx, a: &SurgeryArgs) -> Result<()> {
    let input = a.input.as_ref().ok_or_else(|| Error::input("surgery needs --input"))?;
    let snap = Snapshot::read(input)?;
    let cfg = &snap.config;
    let geom = cfg.geom();
    let (mut q0, mut c0, mut annulus) = match &a.wulff {
        Some(p) => {
            let w = read_wulff(p)?;
            let k = w.shape.constants.expect("checked on read");
            (k.q0, k.c0, w.annulus)
        }
        None => {
            let k = default_disc()?.constants.expect("set by default_disc");
            (k.q0, k.c0, DEFAULT_ANNULUS)
        }
    };
    q0 = a.q0.unwrap_or(q0);
    c0 = a.c0.unwrap_or(c0);
    if !(c0 > 0.0 && c0 < q0 / 2.0) {
        return Err(Error::input(format!("need 0 < c0 < q0 / 2, got q0 = {q0}, c0 = {c0}")));
    }
    if !(annulus.0 > 0.0 && annulus.0 < annulus.1) {
        annulus = DEFAULT_ANNULUS;
    }
    let eps = a.eps.unwrap_or(GAC_EPS);
    let t = a.t.unwrap_or(1.0);
    let n = match a.n {
        Some(n) => n,
        None => (droplab::conditioned::enclosed_area(cfg) as f64).sqrt().floor() as u32,
    };
    if n == 0 {
        return Err(Error::input("n must be positive; give --n or an input whose circuit encloses the origin"));
    }
    let before = sat_report(cfg, n, t, q0, c0, annulus)?;
    let sweeps = a.sweeps.unwrap_or(DEFAULT_RESAMPLE_SWEEPS);
    let mut rng = StreamRng::new(ctx.seed, 0);
    let given = |s: &Option<String>| s.as_deref().map(parse_site).transpose();
    let (x, y) = (given(&a.x)?, given(&a.y)?);
    let op = a.op.as_deref().unwrap_or("sector");
    let (out, pair) = match op {
        "sector" => {
            let x = x.or(before.x_prime);
            let y = y.or(before.y_prime);
            let (Some(x), Some(y)) = (x, y) else {
                return Err(Error::Infeasible(
                    "input is not satisfactory: no regeneration pair; give --x and --y".into(),
                ));
            };
            (sector_storage_replace(cfg, x, y, &snap.params, sweeps, &mut rng)?, Some((x, y)))
        }
        "shift" => {
            let need =
                |s: &Option<String>, flag: &str| s.clone().ok_or_else(|| Error::input(format!("shift needs --{flag}")));
            let f = parse_rect(geom, &need(&a.f, "F")?)?;
            let g = parse_rect(geom, &need(&a.g, "G")?)?;
            let shift = parse_site(&need(&a.shift, "shift")?)?;
            (storage_shift_replace(cfg, &f, &g, shift, &snap.params, sweeps, &mut rng)?, x.zip(y))
        }
        other => return Err(Error::input(format!("unknown operation `{other}`; use sector or shift"))),
    };
    let after = sat_report(&out.full_plane, n, t, q0, c0, annulus)?;
    let (gac_before, gac_after, sopp) = match pair {
        Some((x, y)) => {
            let ring = Some((annulus.0 * n as f64, annulus.1 * n as f64));
            (
                gac_json(cfg, x, y, eps, q0)?,
                gac_json(&out.full_plane, x, y, eps, q0)?,
                json!(sopp_check(&stored_config(geom, &out), y, x, q0, ring)?),
            )
        }
        None => (Value::Null, Value::Null, Value::Null),
    };
    Snapshot::new(snap.params, ctx.seed, out.full_plane.clone()).write(&ctx.path("surgery_out.rcg"))?;
    ctx.write_json(
        "surgery_stored.json",
        &json!({ "region": out.region, "stored": out.stored, "resampled": out.resampled.len(), "rng": out.rng }),
    )?;
    let verdict = json!({
        "op": op,
        "x": pair.map(|p| p.0),
        "y": pair.map(|p| p.1),
        "eps": eps,
        "q0": q0,
        "c0": c0,
        "annulus": annulus,
        "sat_before": before,
        "sat_after": after,
        "gac_before": gac_before,
        "gac_after": gac_after,
        "sopp": sopp,
    });
    ctx.write_json("verdict.json", &verdict)?;
    let mut m = ctx.manifest("surgery", a, Some(&snap.params))?;
    m.outputs = vec!["surgery_out.rcg".into(), "surgery_stored.json".into(), "verdict.json".into()];
    m.results = json!({ "sat_before": before.sat1, "sat_after": after.sat1, "sopp": verdict["sopp"] });
    ctx.finish(m)
}
