//! The random-cluster measure on a finite box.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{BondConfig, BoxGeom, EdgeId, PlanarGraph};

/// Largest box handled by [`exact_distribution`].
pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Free,
    Wired,
}

impl Boundary {
    pub fn opposite(self) -> Self {
        match self {
            Boundary::Free => Boundary::Wired,
            Boundary::Wired => Boundary::Free,
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Free => "free",
            Boundary::Wired => "wired",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(Boundary::Free),
            "wired" => Ok(Boundary::Wired),
            _ => Err(Error::Parse(format!("boundary condition must be `free` or `wired`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcParams {
    pub p: f64,
    pub q: f64,
    pub bc: Boundary,
}

impl RcParams {
    pub fn new(p: f64, q: f64, bc: Boundary) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::input(format!("p must lie in [0,1], got {p}")));
        }
        if !q.is_finite() || q < 1.0 {
            return Err(Error::input(format!("q must be a finite real >= 1, got {q}")));
        }
        Ok(RcParams { p, q, bc })
    }

    pub fn from_beta(beta: f64, q: f64, bc: Boundary) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::input(format!("beta must be nonnegative, got {beta}")));
        }
        RcParams::new(-(-2.0 * beta).exp_m1(), q, bc)
    }

    pub fn beta(&self) -> f64 {
        -0.5 * (-self.p).ln_1p()
    }

    /// Dual parameter solving `p*/(1-p*) = q(1-p)/p`.
    pub fn p_star(&self) -> Option<f64> {
        if self.p <= 0.0 || self.p >= 1.0 {
            return None;
        }
        let r = self.q * (1.0 - self.p);
        Some(r / (r + self.p))
    }

    /// Uniform bound on single-edge conditional probabilities.
    pub fn c_be(&self) -> f64 {
        let p = self.p;
        (1.0 - p).min(p / (p + (1.0 - p) * self.q))
    }

    /// Conditional probability that an edge is open given whether its
    /// endpoints are joined off the edge.
    pub fn open_probability(&self, joined_off_edge: bool) -> f64 {
        if joined_off_edge || self.q == 1.0 {
            self.p
        } else {
            self.p / (self.p + (1.0 - self.p) * self.q)
        }
    }

    pub fn is_subcritical(&self) -> bool {
        self.p < critical_point(self.q).0
    }
}

/// Resolved parameters with every derived quantity, for run metadata.
#[derive(Debug, Clone, Serialize)]
pub struct ParamsReport {
    pub p: f64,
    pub q: f64,
    pub bc: Boundary,
    pub beta: f64,
    pub p_star: Option<f64>,
    pub c_be: f64,
    pub p_c: f64,
    pub beta_c: f64,
}

impl From<&RcParams> for ParamsReport {
    fn from(r: &RcParams) -> Self {
        let (p_c, beta_c) = critical_point(r.q);
        ParamsReport { p: r.p, q: r.q, bc: r.bc, beta: r.beta(), p_star: r.p_star(), c_be: r.c_be(), p_c, beta_c }
    }
}

pub fn dual_params(params: &RcParams) -> Result<RcParams> {
    let p_star =
        params.p_star().ok_or_else(|| Error::DegenerateParams(format!("no dual parameter at p = {}", params.p)))?;
    Ok(RcParams { p: p_star, q: params.q, bc: params.bc.opposite() })
}

/// Self-dual point `(p_c, beta_c)`, with `beta_c` taken from `p = 1 - exp(-2 beta)`.
pub fn critical_point(q: f64) -> (f64, f64) {
    let s = q.sqrt();
    (s / (1.0 + s), 0.5 * (1.0 + s).ln())
}

/// Log-weight of an edge-state vector on an arbitrary graph.
pub fn log_weight_graph(graph: &PlanarGraph, open: &[bool], params: &RcParams) -> f64 {
    let n_open = open.iter().filter(|&&s| s).count();
    let n_closed = open.len() - n_open;
    let term = |count: usize, prob: f64| if count == 0 { 0.0 } else { count as f64 * prob.ln() };
    let k = graph.cluster_count(open, params.bc == Boundary::Wired);
    term(n_open, params.p) + term(n_closed, 1.0 - params.p) + k as f64 * params.q.ln()
}

/// `ln(p^open (1-p)^closed q^k)` with `k` counted according to `params.bc`.
pub fn weight(cfg: &BondConfig, params: &RcParams) -> f64 {
    log_weight_graph(&cfg.geom().graph(), cfg.states(), params)
}

/// Normalized law on all edge-state vectors of a small graph, indexed by the
/// bit pattern of the open edges.
pub fn exact_distribution_graph(graph: &PlanarGraph, params: &RcParams) -> Result<Vec<f64>> {
    let m = graph.edges.len();
    if m > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { edges: m, limit: ENUMERATION_LIMIT });
    }
    let mut open = vec![false; m];
    let logw: Vec<f64> = (0..1u64 << m)
        .map(|bits| {
            for (e, s) in open.iter_mut().enumerate() {
                *s = bits >> e & 1 == 1;
            }
            log_weight_graph(graph, &open, params)
        })
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Exact law on the box; entry `b` is the probability of
/// [`BondConfig::from_bits`]`(geom, b)`.
pub fn exact_distribution(geom: BoxGeom, params: &RcParams) -> Result<Vec<f64>> {
    exact_distribution_graph(&geom.graph(), params)
}

/// Independent bond percolation.
pub fn sample_q1(geom: BoxGeom, p: f64, rng: &mut impl RngCore) -> BondConfig {
    let states = geom.edges().map(|_| rng.random::<f64>() < p).collect();
    BondConfig::from_states(geom, states).expect("edge count matches")
}

/// Single-edge heat-bath dynamics with reusable search buffers.
///
/// Connectivity off an edge is decided by a bidirectional breadth-first
/// search that stops as soon as the two frontiers meet or one runs dry.
#[derive(Debug, Clone)]
pub struct HeatBath {
    geom: BoxGeom,
    nbr: Vec<[(u32, u32); 4]>,
    boundary: Vec<u32>,
    is_boundary: Vec<bool>,
    mark_a: Vec<u32>,
    mark_b: Vec<u32>,
    stamp: u32,
    queue_a: Vec<u32>,
    queue_b: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl HeatBath {
    pub fn new(geom: BoxGeom) -> Self {
        let nv = geom.vertex_count();
        let mut nbr = vec![[(NONE, NONE); 4]; nv];
        for (i, slot) in nbr.iter_mut().enumerate() {
            for (k, (e, w)) in geom.incident(geom.vertex(i)).enumerate() {
                slot[k] = (e as u32, geom.vertex_index(w) as u32);
            }
        }
        let is_boundary: Vec<bool> = geom.vertices().map(|v| geom.is_boundary(v)).collect();
        let boundary = (0..nv as u32).filter(|&i| is_boundary[i as usize]).collect();
        // one extra slot for the ghost vertex standing for the wired boundary
        HeatBath {
            geom,
            nbr,
            boundary,
            is_boundary,
            mark_a: vec![0; nv + 1],
            mark_b: vec![0; nv + 1],
            stamp: 0,
            queue_a: Vec::new(),
            queue_b: Vec::new(),
        }
    }

    pub fn geom(&self) -> BoxGeom {
        self.geom
    }

    fn next_stamp(&mut self) -> u32 {
        if self.stamp == u32::MAX {
            self.mark_a.fill(0);
            self.mark_b.fill(0);
            self.stamp = 0;
        }
        self.stamp += 1;
        self.stamp
    }

    /// Whether the endpoints of `e` are joined by an open path avoiding `e`.
    /// With `wired`, all boundary vertices count as joined.
    pub fn connected_off_edge(&mut self, cfg: &BondConfig, e: EdgeId, wired: bool) -> bool {
        let (a, b) = self.geom.endpoints(e);
        let (a, b) = (self.geom.vertex_index(a) as u32, self.geom.vertex_index(b) as u32);
        if wired && self.is_boundary[a as usize] && self.is_boundary[b as usize] {
            return true;
        }
        let states = cfg.states();
        let skip = e as u32;
        let isolated = |v: u32| {
            !(wired && self.is_boundary[v as usize])
                && self.nbr[v as usize].iter().all(|&(f, _)| f == NONE || f == skip || !states[f as usize])
        };
        if isolated(a) || isolated(b) {
            return false;
        }
        let ghost = self.geom.vertex_count() as u32;
        let stamp = self.next_stamp();
        let mut qa = std::mem::take(&mut self.queue_a);
        let mut qb = std::mem::take(&mut self.queue_b);
        qa.clear();
        qb.clear();
        qa.push(a);
        qb.push(b);
        self.mark_a[a as usize] = stamp;
        self.mark_b[b as usize] = stamp;
        let (mut ha, mut hb) = (0usize, 0usize);
        let result = 'search: loop {
            for side in 0..2 {
                let (queue, head, mine, theirs) = if side == 0 {
                    (&mut qa, &mut ha, &mut self.mark_a, &self.mark_b)
                } else {
                    (&mut qb, &mut hb, &mut self.mark_b, &self.mark_a)
                };
                let Some(&v) = queue.get(*head) else {
                    break 'search false;
                };
                *head += 1;
                let mut visit = |w: u32, queue: &mut Vec<u32>| -> bool {
                    if theirs[w as usize] == stamp {
                        return true;
                    }
                    if mine[w as usize] != stamp {
                        mine[w as usize] = stamp;
                        queue.push(w);
                    }
                    false
                };
                if v == ghost {
                    for &w in &self.boundary {
                        if visit(w, queue) {
                            break 'search true;
                        }
                    }
                    continue;
                }
                for &(f, w) in &self.nbr[v as usize] {
                    if f != NONE && f != skip && states[f as usize] && visit(w, queue) {
                        break 'search true;
                    }
                }
                if wired && self.is_boundary[v as usize] && visit(ghost, queue) {
                    break 'search true;
                }
            }
        };
        self.queue_a = qa;
        self.queue_b = qb;
        result
    }

    pub fn open_probability(&mut self, cfg: &BondConfig, params: &RcParams, e: EdgeId) -> f64 {
        if params.q == 1.0 {
            return params.p;
        }
        let joined = self.connected_off_edge(cfg, e, params.bc == Boundary::Wired);
        params.open_probability(joined)
    }

    /// Resample edge `e` from its conditional law given all other edges.
    /// Consumes exactly one uniform variate.
    pub fn step(&mut self, cfg: &mut BondConfig, params: &RcParams, e: EdgeId, rng: &mut impl RngCore) {
        let u: f64 = rng.random();
        // connectivity only matters when u falls between the two rates
        let (a, b) = (params.open_probability(false), params.open_probability(true));
        let open = if u < a.min(b) {
            true
        } else if u >= a.max(b) {
            false
        } else {
            u < self.open_probability(cfg, params, e)
        };
        cfg.set(e, open);
    }

    /// One systematic sweep over all edges in id order.
    pub fn sweep(&mut self, cfg: &mut BondConfig, params: &RcParams, rng: &mut impl RngCore) {
        for e in self.geom.edges() {
            self.step(cfg, params, e, rng);
        }
    }
}

/// Resample one edge of `cfg` from its conditional law.
pub fn heat_bath_step(cfg: &BondConfig, params: &RcParams, e: EdgeId, rng: &mut impl RngCore) -> Result<BondConfig> {
    if e >= cfg.geom().edge_count() {
        return Err(Error::input(format!("edge {e} outside box")));
    }
    let mut out = cfg.clone();
    HeatBath::new(cfg.geom()).step(&mut out, params, e, rng);
    Ok(out)
}

/// `sweeps` systematic heat-bath sweeps from the all-closed configuration.
/// At `q = 1` this is a single independent draw.
pub fn sample_fk(geom: BoxGeom, params: &RcParams, sweeps: u32, rng: &mut impl RngCore) -> Result<BondConfig> {
    if sweeps == 0 {
        return Err(Error::input("sweeps must be at least 1"));
    }
    if params.q == 1.0 {
        return Ok(sample_q1(geom, params.p, rng));
    }
    let mut hb = HeatBath::new(geom);
    let mut cfg = BondConfig::closed(geom);
    for _ in 0..sweeps {
        hb.sweep(&mut cfg, params, rng);
    }
    Ok(cfg)
}
