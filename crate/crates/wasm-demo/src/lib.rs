//! Browser front end: draw unconditioned and conditioned droplets and apply
//! the sector storage-replacement operation.

use std::fmt::Write;

use droplab::circuit::{first_site, hull_and_facets, outermost_circuit, regeneration_sites, Circuit};
use droplab::conditioned::{default_half_width, warm_start, ConditionSpec, ConstrainedChain};
use droplab::droplet::{circuit_stats, SampleTag};
use droplab::model::sample_fk;
use droplab::surgery::{sector_storage_replace, DEFAULT_RESAMPLE_SWEEPS};
use droplab::wulff::{choose_constants, disc, WulffShape, DEFAULT_ANNULUS};
use droplab::{BondConfig, Boundary, BoxGeom, Error, RcParams, Result, Site, StreamRng};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest box the page will draw.
pub const MAX_HALF_WIDTH: u32 = 60;

/// Session state: the current configuration and the generator.
#[wasm_bindgen]
pub struct Lab {
    rng: StreamRng,
    shape: WulffShape,
    current: Option<(BondConfig, RcParams, u32)>,
}

fn check_width(half_width: u32) -> Result<()> {
    if half_width == 0 || half_width > MAX_HALF_WIDTH {
        return Err(Error::input(format!("half-width must be in 1..={MAX_HALF_WIDTH}")));
    }
    Ok(())
}

/// Longest hull facet, oriented counterclockwise.
fn longest_facet(c: &Circuit) -> Option<(Site, Site)> {
    let mut best: Option<(Site, Site)> = None;
    for (a, b) in hull_and_facets(c).facets() {
        if best.is_none_or(|(p, q)| a.dist(b) > p.dist(q)) {
            best = Some((a, b));
        }
    }
    best.map(|(a, b)| if a.cross(b) > 0 { (a, b) } else { (b, a) })
}

impl Lab {
    pub fn with_seed(seed: u32) -> Result<Self> {
        let mut shape = disc();
        shape.constants = Some(choose_constants(&shape, DEFAULT_ANNULUS.0, DEFAULT_ANNULUS.1)?);
        Ok(Lab { rng: StreamRng::new(seed as u64, 0), shape, current: None })
    }

    fn constants(&self) -> (f64, f64) {
        let k = self.shape.constants.expect("set on construction");
        (k.q0, k.c0)
    }

    /// Unconditioned draw after `sweeps` heat-bath sweeps.
    pub fn run_sample(&mut self, half_width: u32, p: f64, q: f64, sweeps: u32) -> Result<Value> {
        check_width(half_width)?;
        let params = RcParams::new(p, q, Boundary::Free)?;
        let cfg = sample_fk(BoxGeom::new(half_width)?, &params, sweeps, &mut self.rng)?;
        self.current = Some((cfg, params, 0));
        self.describe()
    }

    /// Conditioned draw at `q = 1` with trapped area at least `n^2`.
    pub fn run_condition(&mut self, n: u32, p: f64, sweeps: u32) -> Result<Value> {
        let half_width = default_half_width(n);
        check_width(half_width)?;
        let params = RcParams::new(p, 1.0, Boundary::Free)?;
        let geom = BoxGeom::new(half_width)?;
        let start = warm_start(geom, &params, n, &mut self.rng)?;
        let mut chain = ConstrainedChain::new(params, ConditionSpec::new(n)?, start)?;
        for _ in 0..sweeps {
            chain.sweep(&mut self.rng)?;
        }
        self.current = Some((chain.config().clone(), params, n));
        self.describe()
    }

    /// Sector storage-replacement between the regeneration sites next to
    /// the longest hull facet.
    pub fn run_surgery(&mut self) -> Result<Value> {
        let (cfg, params, n) = self.current.clone().ok_or_else(|| Error::input("draw a configuration first"))?;
        let c = outermost_circuit(&cfg).ok_or(Error::NoCircuit)?;
        let (q0, c0) = self.constants();
        let rg = regeneration_sites(&c, q0, c0)?;
        let (x, y) = longest_facet(&c).ok_or_else(|| Error::input("degenerate hull"))?;
        let (Some(xp), Some(yp)) = (first_site(x, &rg, true), first_site(y, &rg, false)) else {
            return Err(Error::Infeasible("no regeneration pair around the longest facet".into()));
        };
        let out = sector_storage_replace(&cfg, xp, yp, &params, DEFAULT_RESAMPLE_SWEEPS, &mut self.rng)?;
        self.current = Some((out.full_plane, params, n));
        let mut v = self.describe()?;
        v["surgery"] = json!({ "x": xp.to_string(), "y": yp.to_string(), "resampled": out.resampled.len() });
        Ok(v)
    }

    /// Picture and statistics of the current configuration.
    pub fn describe(&self) -> Result<Value> {
        let (cfg, params, n) = self.current.as_ref().ok_or_else(|| Error::input("nothing drawn yet"))?;
        let circuit = outermost_circuit(cfg);
        let (q0, c0) = self.constants();
        let rg = match &circuit {
            Some(c) => regeneration_sites(c, q0, c0)?,
            None => Vec::new(),
        };
        let stats = match &circuit {
            Some(c) => {
                let area = droplab::circuit::interior_area(c);
                let n = if *n > 0 { *n } else { ((area as f64).sqrt().floor() as u32).max(1) };
                serde_json::to_value(circuit_stats(c, n, &self.shape, SampleTag { seed: 0, stream: 0, sample: 0 })?)?
            }
            None => Value::Null,
        };
        Ok(json!({
            "p": params.p,
            "q": params.q,
            "open_edges": cfg.open_edges().count(),
            "circuit": circuit.is_some(),
            "regeneration_sites": rg.len(),
            "stats": stats,
            "svg": render(cfg, circuit.as_ref(), &rg),
        }))
    }
}

/// Open edges in grey, the outermost circuit in red, its hull dashed and
/// regeneration sites as green dots.
pub fn render(cfg: &BondConfig, circuit: Option<&Circuit>, rg: &[Site]) -> String {
    let geom = cfg.geom();
    let l = geom.half_width() as f64 + 1.0;
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="600" height="600">"#,
        -l,
        -l,
        2.0 * l,
        2.0 * l
    );
    s.push_str(r#"<g transform="scale(1,-1)" stroke-linecap="round">"#);
    let stroke = (0.12 * (10.0 / l).min(1.0)).max(0.04);
    let _ = write!(s, r##"<g stroke="#9a9a9a" stroke-width="{stroke:.3}">"##);
    for e in cfg.open_edges() {
        let (a, b) = geom.endpoints(e);
        let _ = write!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, a.x, a.y, b.x, b.y);
    }
    s.push_str("</g>");
    if let Some(c) = circuit {
        let pts = |vs: &[Site]| vs.iter().map(|v| format!("{},{}", v.x, v.y)).collect::<Vec<_>>().join(" ");
        let _ = write!(
            s,
            r##"<polygon points="{}" fill="#d62728" fill-opacity="0.08" stroke="#d62728" stroke-width="{:.3}"/>"##,
            pts(c.vertices()),
            2.0 * stroke
        );
        let hull = hull_and_facets(c);
        let _ = write!(
            s,
            r##"<polygon points="{}" fill="none" stroke="#1f77b4" stroke-width="{stroke:.3}" stroke-dasharray="{:.2}"/>"##,
            pts(&hull.vertices),
            4.0 * stroke
        );
        for v in rg {
            let _ = write!(s, r##"<circle cx="{}" cy="{}" r="{:.3}" fill="#2ca02c"/>"##, v.x, v.y, 3.0 * stroke);
        }
    }
    let _ = write!(s, r#"<circle cx="0" cy="0" r="{:.3}" fill="black"/>"#, 2.5 * stroke);
    s.push_str("</g></svg>");
    s
}

fn js(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
impl Lab {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> std::result::Result<Lab, JsError> {
        Lab::with_seed(seed).map_err(|e| JsError::new(&e.to_string()))
    }

    /// JSON with `svg` and `stats`.
    pub fn sample(&mut self, half_width: u32, p: f64, q: f64, sweeps: u32) -> std::result::Result<String, JsError> {
        js(self.run_sample(half_width, p, q, sweeps))
    }

    pub fn condition(&mut self, n: u32, p: f64, sweeps: u32) -> std::result::Result<String, JsError> {
        js(self.run_condition(n, p, sweeps))
    }

    pub fn surgery(&mut self) -> std::result::Result<String, JsError> {
        js(self.run_surgery())
    }
}
