//! Configuration surgery: sector storage-replacement, storage-shift-replacement,
//! good area capture, and the LOCATE scan for strip endpoints.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{theta_rg_max, Circuit};
use crate::error::{Error, Result};
use crate::geometry::{in_backward_cone, in_forward_cone, shoelace2, wrap_tau, Sector, Site};
use crate::lattice::{connected, open_cluster, BondConfig, BoxGeom, EdgeId, Region};
use crate::model::{HeatBath, RcParams};
use crate::rng::{RngTag, StreamRng};

/// Heat-bath sweeps used to resample at `q > 1` unless overridden.
pub const DEFAULT_RESAMPLE_SWEEPS: u32 = 200;

/// Largest `touched + resampled` edge count accepted by [`kernel_report`].
pub const KERNEL_LIMIT: usize = 26;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StoredRegion {
    Sector { x: Site, y: Site },
    Shift { f: Vec<EdgeId>, g: Vec<EdgeId>, shift: Site },
}

/// A deterministic surgery: which edges of the output copy which input
/// edges, which are resampled, and which input edges are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurgeryPlan {
    geom: BoxGeom,
    kind: StoredRegion,
    /// `(dst, src)`: the output at `dst` is the input at `src`.
    copies: Vec<(EdgeId, EdgeId)>,
    resampled: Vec<EdgeId>,
    stored: Vec<EdgeId>,
}

impl SurgeryPlan {
    /// Store `E(A_{x,y})` and resample it given the rest.
    pub fn sector(geom: BoxGeom, x: Site, y: Site) -> Result<Self> {
        for v in [x, y] {
            if !geom.contains(v) {
                return Err(Error::input(format!("vertex {v} outside the box")));
            }
        }
        if x.cross(y) == 0 {
            return Err(Error::input(format!("degenerate sector: {x} and {y} are parallel")));
        }
        let sector = Sector::new(x, y)?;
        let region = Region::sector(geom, &sector);
        let inside: Vec<EdgeId> = region.edges().collect();
        let copies = geom.edges().filter(|&e| !region.contains(e)).map(|e| (e, e)).collect();
        Ok(SurgeryPlan { geom, kind: StoredRegion::Sector { x, y }, copies, resampled: inside.clone(), stored: inside })
    }

    /// Keep `F`, move the contents of `G` by `shift`, resample the rest and
    /// store everything outside `F` and `G`.
    pub fn shift(geom: BoxGeom, f: &Region, g: &Region, shift: Site) -> Result<Self> {
        if !f.is_disjoint(g) {
            return Err(Error::input("E(F) and E(G) overlap"));
        }
        let mut moved = Vec::new();
        for e in g.edges() {
            let (a, b) = geom.endpoints(e);
            let dst = geom
                .edge_between(a + shift, b + shift)
                .ok_or_else(|| Error::input(format!("G shifted by {shift} leaves the box")))?;
            moved.push((dst, e));
        }
        if moved.iter().any(|&(dst, _)| f.contains(dst)) {
            return Err(Error::input("E(F) and E(G) + shift overlap"));
        }
        let mut copies: Vec<(EdgeId, EdgeId)> = f.edges().map(|e| (e, e)).collect();
        copies.extend(moved.iter().copied());
        copies.sort_unstable();
        let mut assigned = vec![false; geom.edge_count()];
        for &(dst, _) in &copies {
            assigned[dst] = true;
        }
        let resampled = geom.edges().filter(|&e| !assigned[e]).collect();
        let stored = geom.edges().filter(|&e| !f.contains(e) && !g.contains(e)).collect();
        Ok(SurgeryPlan {
            geom,
            kind: StoredRegion::Shift { f: f.edges().collect(), g: g.edges().collect(), shift },
            copies,
            resampled,
            stored,
        })
    }

    pub fn geom(&self) -> BoxGeom {
        self.geom
    }

    pub fn kind(&self) -> &StoredRegion {
        &self.kind
    }

    pub fn resampled(&self) -> &[EdgeId] {
        &self.resampled
    }

    pub fn stored(&self) -> &[EdgeId] {
        &self.stored
    }

    pub fn copies(&self) -> &[(EdgeId, EdgeId)] {
        &self.copies
    }

    /// `omega_1` given the input and the values drawn for the resampled edges.
    pub fn apply(&self, cfg: &BondConfig, fresh: &[bool]) -> BondConfig {
        assert_eq!(fresh.len(), self.resampled.len());
        let mut out = BondConfig::closed(self.geom);
        for &(dst, src) in &self.copies {
            out.set(dst, cfg.is_open(src));
        }
        for (&e, &s) in self.resampled.iter().zip(fresh) {
            out.set(e, s);
        }
        out
    }

    /// `omega_2`: the input on the stored edges.
    pub fn store(&self, cfg: &BondConfig) -> Vec<(EdgeId, bool)> {
        self.stored.iter().map(|&e| (e, cfg.is_open(e))).collect()
    }

    /// Edges whose law can be affected by the plan. Edges copied onto
    /// themselves and neither stored nor resampled pass through unchanged.
    pub fn touched(&self) -> Vec<EdgeId> {
        let mut t: Vec<EdgeId> = self.resampled.iter().chain(&self.stored).copied().collect();
        for &(dst, src) in &self.copies {
            if dst != src {
                t.push(dst);
                t.push(src);
            }
        }
        t.sort_unstable();
        t.dedup();
        t
    }

    /// Run the plan: at `q = 1` the resampled edges are fresh Bernoulli(p)
    /// draws in edge order; at `q > 1` they start closed and receive
    /// `sweeps` heat-bath sweeps with everything else frozen.
    pub fn run(&self, cfg: &BondConfig, params: &RcParams, sweeps: u32, rng: &mut StreamRng) -> Result<SurgeryOutcome> {
        if cfg.geom() != self.geom {
            return Err(Error::input("configuration and plan use different boxes"));
        }
        let tag = rng.tag();
        let full_plane = if params.q == 1.0 {
            let fresh: Vec<bool> = self.resampled.iter().map(|_| rng.random::<f64>() < params.p).collect();
            self.apply(cfg, &fresh)
        } else {
            if sweeps == 0 {
                return Err(Error::input("resampling at q > 1 needs at least one sweep"));
            }
            let mut out = self.apply(cfg, &vec![false; self.resampled.len()]);
            let mut hb = HeatBath::new(self.geom);
            for _ in 0..sweeps {
                for &e in &self.resampled {
                    hb.step(&mut out, params, e, rng);
                }
            }
            out
        };
        Ok(SurgeryOutcome {
            full_plane,
            stored: self.store(cfg),
            region: self.kind.clone(),
            resampled: self.resampled.clone(),
            rng: tag,
        })
    }
}

/// `(omega_1, omega_2)` with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SurgeryOutcome {
    pub full_plane: BondConfig,
    pub stored: Vec<(EdgeId, bool)>,
    pub region: StoredRegion,
    pub resampled: Vec<EdgeId>,
    pub rng: RngTag,
}

/// The sector storage-replacement operation `sigma_{x,y}`.
pub fn sector_storage_replace(
    cfg: &BondConfig,
    x: Site,
    y: Site,
    params: &RcParams,
    sweeps: u32,
    rng: &mut StreamRng,
) -> Result<SurgeryOutcome> {
    SurgeryPlan::sector(cfg.geom(), x, y)?.run(cfg, params, sweeps, rng)
}

/// The storage-shift-replacement operation `phi_{F,G,shift}`.
pub fn storage_shift_replace(
    cfg: &BondConfig,
    f: &Region,
    g: &Region,
    shift: Site,
    params: &RcParams,
    sweeps: u32,
    rng: &mut StreamRng,
) -> Result<SurgeryOutcome> {
    SurgeryPlan::shift(cfg.geom(), f, g, shift)?.run(cfg, params, sweeps, rng)
}

/// Exact output law of a plan at `q = 1` under product input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub touched: usize,
    pub resampled: usize,
    /// Total variation between the law of `omega_1` and the product law.
    pub tv_to_product: f64,
    /// Conditional mutual information between the resampled part of
    /// `omega_1` and `omega_2` given the rest of `omega_1`, in nats.
    pub mutual_information: f64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.carry += (self.total - t) + x;
        } else {
            self.carry += (x - t) + self.total;
        }
        self.total = t;
    }

    fn value(&self) -> f64 {
        self.total + self.carry
    }
}

/// Enumerate input and resampling randomness over the touched edges.
pub fn kernel_report(plan: &SurgeryPlan, p: f64) -> Result<KernelReport> {
    let touched = plan.touched();
    let r = plan.resampled.len();
    if touched.len() + r > KERNEL_LIMIT || touched.len() > 63 {
        return Err(Error::TooLarge { edges: touched.len() + r, limit: KERNEL_LIMIT });
    }
    let pos: HashMap<EdgeId, usize> = touched.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let bern = |bits: u64, len: usize| -> f64 {
        let k = bits.count_ones() as i32;
        p.powi(k) * (1.0 - p).powi(len as i32 - k)
    };
    // per touched edge: where its omega_1 value comes from
    enum Src {
        Input(usize),
        Fresh(usize),
    }
    let resampled_pos: HashMap<EdgeId, usize> = plan.resampled.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let copy_src: HashMap<EdgeId, EdgeId> = plan.copies.iter().copied().collect();
    let mut srcs = Vec::with_capacity(touched.len());
    let mut frozen_mask = 0u64;
    for (i, e) in touched.iter().enumerate() {
        if let Some(&k) = resampled_pos.get(e) {
            srcs.push(Src::Fresh(k));
        } else {
            let s = copy_src.get(e).ok_or_else(|| Error::Invariant(format!("edge {e} has no source")))?;
            let j = *pos.get(s).ok_or_else(|| Error::Invariant(format!("source {s} not touched")))?;
            srcs.push(Src::Input(j));
            frozen_mask |= 1 << i;
        }
    }
    let stored_pos: Vec<usize> = plan.stored.iter().map(|e| pos[e]).collect();

    let nt = touched.len();
    let mut law: BTreeMap<u64, Sum> = BTreeMap::new();
    let mut joint: BTreeMap<(u64, u64, u64), Sum> = BTreeMap::new();
    for input in 0..(1u64 << nt) {
        let pin = bern(input, nt);
        let mut w2 = 0u64;
        for (k, &j) in stored_pos.iter().enumerate() {
            w2 |= ((input >> j) & 1) << k;
        }
        for fresh in 0..(1u64 << r) {
            let pr = pin * bern(fresh, r);
            let mut w1 = 0u64;
            for (i, s) in srcs.iter().enumerate() {
                let bit = match *s {
                    Src::Input(j) => (input >> j) & 1,
                    Src::Fresh(k) => (fresh >> k) & 1,
                };
                w1 |= bit << i;
            }
            law.entry(w1).or_default().add(pr);
            joint.entry((w1 & frozen_mask, w1 & !frozen_mask, w2)).or_default().add(pr);
        }
    }
    let mut tv = Sum::default();
    let mut seen_mass = Sum::default();
    for (&w1, pr) in &law {
        let target = bern(w1, nt);
        seen_mass.add(target);
        tv.add((pr.value() - target).abs());
    }
    let tv = 0.5 * (tv.value() + (1.0 - seen_mass.value()).max(0.0));

    let mut pf: BTreeMap<u64, Sum> = BTreeMap::new();
    let mut pfr: BTreeMap<(u64, u64), Sum> = BTreeMap::new();
    let mut pfs: BTreeMap<(u64, u64), Sum> = BTreeMap::new();
    for (&(f, rr, s), pr) in &joint {
        let pr = pr.value();
        pf.entry(f).or_default().add(pr);
        pfr.entry((f, rr)).or_default().add(pr);
        pfs.entry((f, s)).or_default().add(pr);
    }
    let mut mi = Sum::default();
    for (&(f, rr, s), pr) in &joint {
        let pr = pr.value();
        if pr > 0.0 {
            let num = pr * pf[&f].value();
            let den = pfr[&(f, rr)].value() * pfs[&(f, s)].value();
            mi.add(pr * ((num - den) / den).ln_1p());
        }
    }
    let mi = mi.value();
    Ok(KernelReport { touched: nt, resampled: r, tv_to_product: tv, mutual_information: mi.max(0.0) })
}

/// The outermost open path from `x` to `y` inside `A_{x,y}`: a right-hand
/// walk along the open edges of the sector, loop-erased.
pub fn outermost_sector_path(cfg: &BondConfig, x: Site, y: Site) -> Result<Option<Vec<Site>>> {
    let geom = cfg.geom();
    let sector = Sector::new(x, y)?;
    let region = Region::sector(geom, &sector);
    if !connected(cfg, x, y, &region)? {
        return Ok(None);
    }
    const DIRS: [Site; 4] = [Site { x: 1, y: 0 }, Site { x: 0, y: 1 }, Site { x: -1, y: 0 }, Site { x: 0, y: -1 }];
    let usable = |v: Site, d: usize| -> bool {
        geom.edge_between(v, v + DIRS[d]).is_some_and(|e| region.contains(e) && cfg.is_open(e))
    };
    // first move: sweep counterclockwise from the outward radial direction
    let base = x.arg();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let ka = wrap_tau(DIRS[a].arg() - base);
        let kb = wrap_tau(DIRS[b].arg() - base);
        ka.total_cmp(&kb)
    });
    let Some(&first) = order.iter().find(|&&d| usable(x, d)) else {
        return Ok(None);
    };
    let mut path = vec![x];
    let mut index: HashMap<Site, usize> = HashMap::from([(x, 0)]);
    let mut v = x;
    let mut heading = first;
    let limit = 4 * region.len() + 8;
    for _ in 0..limit {
        v = v + DIRS[heading];
        if let Some(&i) = index.get(&v) {
            for w in path.drain(i + 1..) {
                index.remove(&w);
            }
        } else {
            index.insert(v, path.len());
            path.push(v);
        }
        if v == y {
            return Ok(Some(path));
        }
        heading = [(heading + 3) % 4, heading, (heading + 1) % 4, (heading + 2) % 4]
            .into_iter()
            .find(|&d| usable(v, d))
            .ok_or_else(|| Error::Invariant("wall follower stranded".into()))?;
    }
    Err(Error::Invariant(format!("wall follower did not reach {y} from {x}")))
}

/// `|I_{x,y}(gamma)|`: area enclosed by `[0, x]`, the path and `[y, 0]`.
pub fn sector_path_area(path: &[Site]) -> f64 {
    let mut poly = Vec::with_capacity(path.len() + 1);
    poly.push(Site::new(0, 0));
    poly.extend_from_slice(path);
    shoelace2(&poly) as f64 / 2.0
}

/// Area of the triangle with corners `0`, `x`, `y`.
pub fn triangle_area(x: Site, y: Site) -> f64 {
    (x.cross(y) as f64).abs() / 2.0
}

fn diameter(points: &[Site]) -> f64 {
    let mut best = 0i64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((*a - *b).norm2());
        }
    }
    (best as f64).sqrt()
}

/// The four conditions of epsilon-good area capture, evaluated separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GacVerdict {
    pub connected: bool,
    pub confined: bool,
    pub diameter_ok: bool,
    pub area_ok: bool,
    pub captured_area: Option<f64>,
    pub triangle_area: f64,
    pub required_area: f64,
    pub path: Option<Vec<Site>>,
}

impl GacVerdict {
    pub fn holds(&self) -> bool {
        self.connected && self.confined && self.diameter_ok && self.area_ok
    }
}

/// The default `eps` of the GAC event.
pub const GAC_EPS: f64 = 0.1;

/// Epsilon-good area capture for the sector `A_{x,y}`. The cluster of `x`
/// and `y` must sit in `C^F_{pi/2 - q0/2}(x) ∩ C^B_{pi/2 - q0/2}(y)`.
pub fn gac_check(cfg: &BondConfig, x: Site, y: Site, eps: f64, q0: f64) -> Result<GacVerdict> {
    if x.cross(y) <= 0 {
        return Err(Error::input(format!("need arg({x}) < arg({y}) within a half-turn")));
    }
    if !(eps > 0.0) {
        return Err(Error::input("eps must be positive"));
    }
    if !(q0 > 0.0 && q0 < FRAC_PI_2) {
        return Err(Error::input("q0 must lie in (0, pi/2)"));
    }
    let h = x.dist(y);
    if h <= 1.0 {
        return Err(Error::input(format!("|x - y| = {h} is too small for the area bound")));
    }
    let tri = triangle_area(x, y);
    let required = tri + eps * h.powf(1.5) * h.ln().sqrt();
    let mut verdict = GacVerdict {
        connected: false,
        confined: false,
        diameter_ok: false,
        area_ok: false,
        captured_area: None,
        triangle_area: tri,
        required_area: required,
        path: None,
    };
    let Some(path) = outermost_sector_path(cfg, x, y)? else {
        return Ok(verdict);
    };
    verdict.connected = true;
    let region = Region::sector(cfg.geom(), &Sector::new(x, y)?);
    let alpha = FRAC_PI_2 - q0 / 2.0;
    let cluster = open_cluster(cfg, x, &region)?;
    verdict.confined = cluster
        .iter()
        .all(|w| in_forward_cone(w.to_f64(), x.to_f64(), alpha) && in_backward_cone(w.to_f64(), y.to_f64(), alpha));
    verdict.diameter_ok = diameter(&path) <= 2.0 * h;
    let area = sector_path_area(&path);
    verdict.area_ok = area >= required;
    verdict.captured_area = Some(area);
    verdict.path = Some(path);
    Ok(verdict)
}

/// Open path from `a` to `b` using edges inside
/// `C^B_{pi/2 - q0}(a) ∩ C^F_{pi/2 - q0}(b)`, optionally also inside the
/// annulus `r_in <= |z| <= r_out`.
pub fn sopp_check(cfg: &BondConfig, a: Site, b: Site, q0: f64, annulus: Option<(f64, f64)>) -> Result<bool> {
    let alpha = FRAC_PI_2 - q0;
    let keep = |v: Site| {
        let ok_cone = in_backward_cone(v.to_f64(), a.to_f64(), alpha) && in_forward_cone(v.to_f64(), b.to_f64(), alpha);
        let ok_ring = annulus.is_none_or(|(lo, hi)| (lo..=hi).contains(&v.norm()));
        ok_cone && ok_ring
    };
    let region = Region::from_predicate(cfg.geom(), |u, v| keep(u) && keep(v));
    connected(cfg, a, b, &region)
}

/// Constants of the LOCATE scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocateConstants {
    pub c1: f64,
    pub big_c1: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c_prime: f64,
    /// Distortion gate `GD <= n / c_tilde`; skipped when absent.
    pub c_tilde: Option<f64>,
}

impl LocateConstants {
    /// Defaults meeting every stated inequality with five percent slack
    /// on `C3`.
    pub fn from_regen(c1: f64, big_c1: f64, q0: f64, c0: f64) -> Result<Self> {
        if !(c1 > 0.0 && big_c1 >= c1 && q0 > 0.0 && c0 > 0.0) {
            return Err(Error::input("need 0 < c1 <= C1 and positive q0, c0"));
        }
        let c4 = 1.0 / (q0 / 2.0).sin();
        let c5 = c4 / (0.75 * q0).tan();
        let c3 = 1.05 / (c1 * c0.min(q0 / 2.0).sin());
        let c_prime = 4.0 * big_c1 * big_c1 * c4;
        Ok(LocateConstants { c1, big_c1, c3, c4, c5, c_prime, c_tilde: None })
    }

    pub fn check(&self, q0: f64, c0: f64) -> Result<()> {
        if 1.0 / self.c3 >= self.c1 * c0.min(q0 / 2.0).sin() {
            return Err(Error::input("C3 too small: need 1/C3 < c1 sin(min(c0, q0/2))"));
        }
        if self.c_prime < 4.0 * self.big_c1 * self.big_c1 * self.c4 {
            return Err(Error::input("C' too small: need C' >= 4 C1^2 C4"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LocateOutcome {
    Found { upper: (Site, Site), lower: (Site, Site) },
    HypothesisFailed { reason: String },
    ConstructionFailed { reason: String },
}

/// The LOCATE scan on both half-planes. `gd` enters the hypothesis gate
/// only when `consts.c_tilde` is set.
pub fn locate(c: &Circuit, rg: &[Site], n: f64, t: f64, consts: &LocateConstants, gd: Option<f64>) -> LocateOutcome {
    let fail = |reason: String| LocateOutcome::HypothesisFailed { reason };
    let (lo, hi) = (consts.c1 * n, consts.big_c1 * n);
    if let Some(v) = c.vertices().iter().find(|v| !(lo..=hi).contains(&v.norm())) {
        return fail(format!("vertex {v} outside the annulus [{lo}, {hi}]"));
    }
    if let (Some(ct), Some(gd)) = (consts.c_tilde, gd) {
        if gd > n / ct {
            return fail(format!("GD = {gd} exceeds n / C~ = {}", n / ct));
        }
    }
    let theta = theta_rg_max(rg);
    if theta > t / (consts.c_prime * n) {
        return fail(format!("theta_RG^MAX = {theta} exceeds t / (C' n) = {}", t / (consts.c_prime * n)));
    }
    let flip = |v: &Site| Site::new(v.x, -v.y);
    let upper = locate_half(c.vertices(), rg, n, t, consts);
    let verts_down: Vec<Site> = c.vertices().iter().map(flip).collect();
    let rg_down: Vec<Site> = rg.iter().map(flip).collect();
    let lower = locate_half(&verts_down, &rg_down, n, t, consts);
    match (upper, lower) {
        (Ok(u), Ok((a, b))) => LocateOutcome::Found { upper: u, lower: (flip(&a), flip(&b)) },
        (Err(reason), _) => LocateOutcome::ConstructionFailed { reason: format!("upper half: {reason}") },
        (_, Err(reason)) => LocateOutcome::ConstructionFailed { reason: format!("lower half: {reason}") },
    }
}

fn locate_half(
    _verts: &[Site],
    rg: &[Site],
    n: f64,
    t: f64,
    k: &LocateConstants,
) -> std::result::Result<(Site, Site), String> {
    let lim = n / k.c3;
    let step = t / (4.0 * k.big_c1);
    let mut upper: Vec<Site> = rg.iter().copied().filter(|v| v.y > 0).collect();
    upper.sort();
    let us: Vec<Site> = upper.iter().copied().filter(|v| (v.x as f64).abs() <= lim).collect();
    if us.is_empty() {
        return Err("no regeneration site near the vertical axis".into());
    }
    // v_i: smallest x-coordinate at least u_i(1) + t/(4 C1)
    let mut vs = Vec::new();
    for u in &us {
        let target = u.x as f64 + step;
        match upper.iter().find(|w| w.x as f64 >= target) {
            Some(&v) if v.x as f64 <= lim => vs.push(v),
            _ => break,
        }
    }
    let m = vs.len();
    if m == 0 {
        return Err("no admissible (u, v) pair".into());
    }
    let diff = |i: usize| vs[i].y - us[i].y;
    let index_of = |w: Site| us.iter().position(|&u| u == w);
    // chain u_{j_{k+1}} = v_{j_k}
    let mut chain = vec![0usize];
    loop {
        let last = *chain.last().unwrap();
        if us[last].x as f64 >= lim / 2.0 && chain.len() > 1 {
            break;
        }
        if last >= m {
            return Err("interval chain ran out before reaching n / (2 C3)".into());
        }
        match index_of(vs[last]) {
            Some(j) if j > last => chain.push(j),
            _ => return Err("interval chain broke".into()),
        }
    }
    let q = chain.len() - 1;
    let r = (1..q)
        .find(|&i| chain[i] < m && (vs[chain[i]].x as f64).abs() <= lim / 8.0)
        .ok_or("no chain interval ends within n / (8 C3) of the axis")?;
    let i1 = (1..=r).map(|i| chain[i]).find(|&j| diff(j) > 0).ok_or("no rising interval left of the axis")?;
    let i2 =
        (r + 1..q).map(|i| chain[i]).find(|&j| j < m && diff(j) < 0).ok_or("no falling interval right of the axis")?;
    let i0 = (i1..=i2).filter(|&i| diff(i) > 0).max().expect("i1 qualifies");
    Ok((us[i0], vs[i0]))
}

/// Points of the circuit with `y > 0` (or `y < 0`) on the vertical line
/// through `p` are exactly `{p}`.
pub fn single_crossing(vertices: &[Site], p: Site, upper: bool) -> bool {
    vertices.iter().filter(|v| v.x == p.x && if upper { v.y > 0 } else { v.y < 0 }).all(|&v| v == p)
        && vertices.contains(&p)
}

/// Re-check the displayed constraints on a located pair; returns the list
/// of violated ones.
pub fn verify_pair(
    vertices: &[Site],
    pair: (Site, Site),
    n: f64,
    t: f64,
    k: &LocateConstants,
    upper: bool,
) -> Vec<&'static str> {
    let (a, b) = pair;
    let (ax, bx) = (a.x as f64, b.x as f64);
    let lim = n / k.c3;
    let mut bad = Vec::new();
    let side = |v: Site| if upper { v.y > 0 } else { v.y < 0 };
    if !(side(a) && side(b)) {
        bad.push("half-plane");
    }
    if !(-lim <= ax && ax <= bx && bx <= lim) {
        bad.push("axis window");
    }
    let step = t / (4.0 * k.big_c1);
    if !(ax + step <= bx && bx <= ax + (1.0 / (4.0 * k.big_c1) + k.c4 * k.big_c1 / k.c_prime) * t) {
        bad.push("horizontal separation");
    }
    if ((b.y - a.y) as f64).abs() > 3.0 * k.c5 * k.big_c1 * t / k.c_prime {
        bad.push("vertical offset");
    }
    if !(single_crossing(vertices, a, upper) && single_crossing(vertices, b, upper)) {
        bad.push("single crossing");
    }
    bad
}

/// Smallest angle at the origin between consecutive sites, for reporting.
pub fn min_angular_gap(rg: &[Site]) -> f64 {
    let mut angles: Vec<f64> = rg.iter().map(|v| wrap_tau(v.arg())).collect();
    angles.sort_by(f64::total_cmp);
    if angles.len() < 2 {
        return 2.0 * PI;
    }
    let mut best = 2.0 * PI - angles[angles.len() - 1] + angles[0];
    for w in angles.windows(2) {
        best = best.min(w[1] - w[0]);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Boundary;

    fn q1(p: f64) -> RcParams {
        RcParams::new(p, 1.0, Boundary::Free).unwrap()
    }

    fn open_path(geom: BoxGeom, pts: &[Site]) -> BondConfig {
        let mut cfg = BondConfig::closed(geom);
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let step = Site::new((b.x - a.x).signum(), (b.y - a.y).signum());
            let mut v = a;
            while v != b {
                cfg.set(geom.edge_between(v, v + step).unwrap(), true);
                v = v + step;
            }
        }
        cfg
    }

    #[test]
    fn sector_plan_freezes_outside_and_stores_inside() {
        let g = BoxGeom::new(3).unwrap();
        let mut rng = StreamRng::new(3, 0);
        let cfg = crate::model::sample_q1(g, 0.5, &mut rng);
        let out = sector_storage_replace(&cfg, Site::new(3, 0), Site::new(0, 3), &q1(0.3), 0, &mut rng).unwrap();
        let region = Region::sector(g, &Sector::new(Site::new(3, 0), Site::new(0, 3)).unwrap());
        for e in g.edges() {
            if !region.contains(e) {
                assert_eq!(out.full_plane.is_open(e), cfg.is_open(e));
            }
        }
        assert_eq!(out.stored.len(), region.len());
        assert!(out.stored.iter().all(|&(e, s)| cfg.is_open(e) == s));
        assert!(SurgeryPlan::sector(g, Site::new(1, 1), Site::new(2, 2)).is_err());
    }

    #[test]
    fn shift_plan_translates_g() {
        let g = BoxGeom::new(3).unwrap();
        let f = Region::rect(g, Site::new(-3, -3), Site::new(-1, 3));
        let gg = Region::rect(g, Site::new(1, -3), Site::new(3, 3));
        let shift = Site::new(-1, 0);
        let mut rng = StreamRng::new(8, 0);
        let cfg = crate::model::sample_q1(g, 0.5, &mut rng);
        let out = storage_shift_replace(&cfg, &f, &gg, shift, &q1(0.4), 0, &mut rng).unwrap();
        for e in gg.edges() {
            let (a, b) = g.endpoints(e);
            let dst = g.edge_between(a + shift, b + shift).unwrap();
            assert_eq!(out.full_plane.is_open(dst), cfg.is_open(e));
        }
        for e in f.edges() {
            assert_eq!(out.full_plane.is_open(e), cfg.is_open(e));
        }
        assert!(out.stored.iter().all(|&(e, _)| !f.contains(e) && !gg.contains(e)));
        // overlapping F and G + shift
        assert!(SurgeryPlan::shift(g, &f, &gg, Site::new(-3, 0)).is_err());
        assert!(SurgeryPlan::shift(g, &f, &f, Site::new(0, 0)).is_err());
    }

    #[test]
    fn shift_zero_with_full_cover_is_identity() {
        let g = BoxGeom::new(2).unwrap();
        let f = Region::rect(g, Site::new(-2, -2), Site::new(0, 2));
        let gg = f.complement();
        let mut rng = StreamRng::new(1, 1);
        let cfg = crate::model::sample_q1(g, 0.5, &mut rng);
        let out = storage_shift_replace(&cfg, &f, &gg, Site::new(0, 0), &q1(0.5), 0, &mut rng).unwrap();
        assert_eq!(out.full_plane, cfg);
        assert!(out.resampled.is_empty());
    }

    #[test]
    fn kernels_preserve_product_law() {
        let g = BoxGeom::new(2).unwrap();
        let plan = SurgeryPlan::sector(g, Site::new(2, 1), Site::new(2, 2)).unwrap();
        let rep = kernel_report(&plan, 0.3).unwrap();
        assert!(rep.touched >= 1 && rep.touched <= 14);
        assert!(rep.tv_to_product < 1e-12 && rep.mutual_information < 1e-12, "{rep:?}");

        let g1 = BoxGeom::new(1).unwrap();
        let f = Region::rect(g1, Site::new(-1, -1), Site::new(-1, 1));
        let gg = Region::rect(g1, Site::new(1, 0), Site::new(1, 1));
        let plan = SurgeryPlan::shift(g1, &f, &gg, Site::new(0, -1)).unwrap();
        let rep = kernel_report(&plan, 0.7).unwrap();
        assert!(rep.tv_to_product < 1e-12 && rep.mutual_information < 1e-12, "{rep:?}");
    }

    #[test]
    fn kernel_detects_a_biased_plan() {
        // copying one input edge onto two outputs breaks independence
        let g = BoxGeom::new(1).unwrap();
        let mut plan = SurgeryPlan::shift(g, &Region::empty(g), &Region::empty(g), Site::new(0, 0)).unwrap();
        plan.copies = vec![(0, 0), (1, 0)];
        plan.resampled.retain(|&e| e > 1);
        plan.resampled.truncate(2);
        plan.stored = vec![0];
        let rep = kernel_report(&plan, 0.5).unwrap();
        assert!(rep.tv_to_product > 0.1);
    }

    #[test]
    fn q_above_one_resamples_only_inside() {
        let g = BoxGeom::new(2).unwrap();
        let params = RcParams::new(0.4, 2.0, Boundary::Wired).unwrap();
        let mut rng = StreamRng::new(2, 2);
        let cfg = BondConfig::open(g);
        let out = sector_storage_replace(&cfg, Site::new(2, 0), Site::new(0, 2), &params, 5, &mut rng).unwrap();
        let plan = SurgeryPlan::sector(g, Site::new(2, 0), Site::new(0, 2)).unwrap();
        for &(e, _) in plan.copies() {
            assert!(out.full_plane.is_open(e));
        }
        assert!(sector_storage_replace(&cfg, Site::new(2, 0), Site::new(0, 2), &params, 0, &mut rng).is_err());
    }

    #[test]
    fn gac_hand_examples() {
        let g = BoxGeom::new(8).unwrap();
        let (x, y) = (Site::new(5, -5), Site::new(5, 5));
        let bulge = open_path(g, &[x, Site::new(6, -5), Site::new(6, 5), y]);
        let v = gac_check(&bulge, x, y, GAC_EPS, 0.4).unwrap();
        assert_eq!(v.captured_area, Some(35.0));
        assert_eq!(v.triangle_area, 25.0);
        assert!(v.holds(), "{v:?}");

        let straight = open_path(g, &[x, y]);
        let v = gac_check(&straight, x, y, GAC_EPS, 0.4).unwrap();
        assert!(v.connected && v.confined && v.diameter_ok);
        assert!(!v.area_ok && !v.holds());

        let none = BondConfig::closed(g);
        assert!(!gac_check(&none, x, y, GAC_EPS, 0.4).unwrap().connected);
        assert!(gac_check(&none, Site::new(5, 0), Site::new(5, 1), GAC_EPS, 0.4).is_err());
        assert!(gac_check(&none, y, x, GAC_EPS, 0.4).is_err());

        // with both open, the bulge is the outermost path
        let mut both = bulge.clone();
        for e in straight.open_edges() {
            both.set(e, true);
        }
        let v = gac_check(&both, x, y, GAC_EPS, 0.4).unwrap();
        assert_eq!(v.captured_area, Some(35.0));
        // monotone in eps
        assert!(gac_check(&bulge, x, y, 0.01, 0.4).unwrap().holds());
    }

    #[test]
    fn sopp_follows_cones() {
        let g = BoxGeom::new(8).unwrap();
        let (a, b) = (Site::new(-2, 6), Site::new(2, 6));
        let cfg = open_path(g, &[a, b]);
        assert!(sopp_check(&cfg, a, b, 0.4, None).unwrap());
        assert!(!sopp_check(&cfg, a, b, 0.4, Some((6.5, 10.0))).unwrap());
        let detour = open_path(g, &[a, Site::new(-2, 2), Site::new(2, 2), b]);
        assert!(!sopp_check(&detour, a, b, 0.4, None).unwrap());
    }

    fn lattice_circle(r: f64) -> Circuit {
        // boundary of the union of unit faces whose centres lie inside the circle
        let ri = r.ceil() as i32 + 1;
        let inside = |x: i32, y: i32| ((x as f64 + 0.5).powi(2) + (y as f64 + 0.5).powi(2)).sqrt() <= r;
        let l = ri + 1;
        let g = BoxGeom::new(l as u32).unwrap();
        let mut cfg = BondConfig::closed(g);
        for e in g.edges() {
            let [f, h] = g.faces_of_edge(e);
            let is_in = |f: usize| {
                f != crate::lattice::OUT && {
                    let c = g.face_corner(f);
                    inside(c.x, c.y)
                }
            };
            if is_in(f) != is_in(h) {
                cfg.set(e, true);
            }
        }
        crate::circuit::outermost_circuit(&cfg).unwrap()
    }

    #[test]
    fn locate_on_a_large_circle() {
        let c = lattice_circle(200.0);
        let (q0, c0) = (0.8, 0.39);
        let k = LocateConstants::from_regen(0.5, 0.6, q0, c0).unwrap();
        k.check(q0, c0).unwrap();
        let n = 360.0;
        let t = 20.0;
        // dense site set: every vertex, except shared columns near the axis
        let rg: Vec<Site> = c
            .vertices()
            .iter()
            .copied()
            .filter(|&v| (v.x as f64).abs() > n / k.c3 || single_crossing(c.vertices(), v, v.y > 0))
            .collect();
        match locate(&c, &rg, n, t, &k, None) {
            LocateOutcome::Found { upper, lower } => {
                let bad = verify_pair(c.vertices(), upper, n, t, &k, true);
                assert!(bad.is_empty(), "{upper:?} {bad:?}");
                let bad = verify_pair(c.vertices(), lower, n, t, &k, false);
                assert!(bad.is_empty(), "{lower:?} {bad:?}");
            }
            other => panic!("{other:?}"),
        }
        // sparse sites break the angular gate
        let sparse: Vec<Site> = rg.iter().step_by(200).copied().collect();
        assert!(matches!(locate(&c, &sparse, n, t, &k, None), LocateOutcome::HypothesisFailed { .. }));
    }

    #[test]
    fn locate_constants_match_stated_inequalities() {
        let k = LocateConstants::from_regen(0.5, 0.6, 0.393, 0.19).unwrap();
        assert!(k.c3 > 10.3 && k.c3 < 11.5, "{}", k.c3);
        assert!((k.c_prime - 7.37).abs() < 0.01, "{}", k.c_prime);
        let mut bad = k;
        bad.c_prime = 1.0;
        assert!(bad.check(0.393, 0.19).is_err());
    }
}
