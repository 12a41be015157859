//! Sampling conditioned on the outermost circuit trapping area at least
//! `n^2`: exact rejection, and a constrained single-edge heat-bath chain.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::circuit::{flood_reached, origin_faces, origin_lobe};
use crate::error::{Error, Result};
use crate::geometry::Site;
use crate::lattice::{BondConfig, BoxGeom, EdgeId, OUT};
use crate::model::{sample_fk, HeatBath, RcParams};

/// Sweeps between full re-extractions of the enclosure.
pub const CHECK_INTERVAL: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    Off,
    MeasureOnly,
}

/// The event `|INT(Gamma_0)| >= n^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub n: u32,
    pub center_mode: CenterMode,
}

impl ConditionSpec {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("n must be positive"));
        }
        Ok(ConditionSpec { n, center_mode: CenterMode::MeasureOnly })
    }

    pub fn min_area(&self) -> usize {
        (self.n as usize).pow(2)
    }

    /// The constraint must be satisfiable with room to spare in the box.
    pub fn check_box(&self, geom: BoxGeom) -> Result<()> {
        let side = 2 * geom.half_width() as i64 - 2;
        if (self.n as i64) > side {
            return Err(Error::Infeasible(format!(
                "n = {} needs n^2 <= (2L-2)^2, but L = {}",
                self.n,
                geom.half_width()
            )));
        }
        Ok(())
    }
}

/// Smallest box half-width used for a given `n`: `ceil(2.5 n)`.
pub fn default_half_width(n: u32) -> u32 {
    (5 * n).div_ceil(2).max(2)
}

/// Area of the outermost circuit, zero when the origin is not enclosed.
pub fn enclosed_area(cfg: &BondConfig) -> usize {
    origin_lobe(cfg.geom(), &flood_reached(cfg)).map_or(0, |(_, a)| a)
}

/// Draw unconditioned configurations until the constraint holds. At
/// `q > 1` each try runs `sweeps` heat-bath sweeps from scratch.
pub fn rejection_sample(
    geom: BoxGeom,
    params: &RcParams,
    spec: &ConditionSpec,
    max_tries: u64,
    sweeps: u32,
    rng: &mut impl RngCore,
) -> Result<(BondConfig, u64)> {
    for t in 1..=max_tries {
        let cfg = sample_fk(geom, params, sweeps, rng)?;
        if enclosed_area(&cfg) >= spec.min_area() {
            return Ok((cfg, t));
        }
    }
    // rule-of-three 95% upper bound on the acceptance rate
    Err(Error::Exhausted { tries: max_tries, rate_bound: 3.0 / max_tries.max(1) as f64 })
}

/// Open square circuit of the smallest even side `s >= n`, centred at the
/// origin; other edges open independently with probability `p`.
pub fn warm_start(geom: BoxGeom, params: &RcParams, n: u32, rng: &mut impl RngCore) -> Result<BondConfig> {
    let s = (n + n % 2) as i32;
    let h = s / 2;
    if h > geom.half_width() {
        return Err(Error::Infeasible(format!(
            "square of side {s} does not fit in box of half-width {}",
            geom.half_width()
        )));
    }
    let mut cfg = BondConfig::closed(geom);
    for e in geom.edges() {
        cfg.set(e, rng.random::<f64>() < params.p);
    }
    let sq = crate::circuit::square_circuit(Site::new(-h, -h), s);
    for (a, b) in sq.edges() {
        cfg.set(geom.edge_between(a, b).expect("square inside box"), true);
    }
    Ok(cfg)
}

/// Acceptance bookkeeping of a chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainCounters {
    pub sweeps: u64,
    pub proposals: u64,
    pub flips: u64,
    pub rejected: u64,
}

impl ChainCounters {
    pub fn acceptance_rate(&self) -> f64 {
        let changes = self.flips + self.rejected;
        if changes == 0 {
            1.0
        } else {
            self.flips as f64 / changes as f64
        }
    }
}

const NO: u32 = u32::MAX;

/// Heat-bath chain on `{|INT(Gamma_0)| >= n^2}`: proposals that would break
/// the constraint are rejected. The set of faces reachable from outside
/// through closed edges and the origin's enclosed lobe are maintained
/// incrementally.
#[derive(Debug, Clone)]
pub struct ConstrainedChain {
    params: RcParams,
    spec: ConditionSpec,
    cfg: BondConfig,
    hb: Option<HeatBath>,
    active: Vec<EdgeId>,
    edge_faces: Vec<[u32; 2]>,
    face_nbr: Vec<[(u32, u32); 4]>,
    reached: Vec<bool>,
    lobe: Vec<bool>,
    area: usize,
    origin: [u32; 4],
    mark: Vec<u32>,
    mark_b: Vec<u32>,
    stamp: u32,
    buf: Vec<u32>,
    buf_b: Vec<u32>,
    counters: ChainCounters,
}

impl ConstrainedChain {
    pub fn new(params: RcParams, spec: ConditionSpec, cfg: BondConfig) -> Result<Self> {
        let geom = cfg.geom();
        let reached = flood_reached(&cfg);
        let (lobe, area) = origin_lobe(geom, &reached).unwrap_or((vec![false; geom.face_count()], 0));
        if area < spec.min_area() {
            return Err(Error::input(format!(
                "start configuration traps area {area}, below the required {}",
                spec.min_area()
            )));
        }
        let to32 = |f: usize| if f == OUT { NO } else { f as u32 };
        let edge_faces = geom.edges().map(|e| geom.faces_of_edge(e).map(to32)).collect();
        let face_nbr = (0..geom.face_count())
            .map(|f| {
                geom.face_edges(f).map(|e| {
                    let [a, b] = geom.faces_of_edge(e);
                    (e as u32, to32(if a == f { b } else { a }))
                })
            })
            .collect();
        let nf = geom.face_count();
        Ok(ConstrainedChain {
            hb: (params.q != 1.0).then(|| HeatBath::new(geom)),
            params,
            spec,
            active: geom.edges().collect(),
            edge_faces,
            face_nbr,
            reached,
            lobe,
            area,
            origin: origin_faces(geom).map(|f| f as u32),
            mark: vec![0; nf + 1],
            mark_b: vec![0; nf + 1],
            stamp: 0,
            buf: Vec::new(),
            buf_b: Vec::new(),
            cfg,
            counters: ChainCounters::default(),
        })
    }

    /// Restrict updates to the given edges; all others stay frozen.
    pub fn with_active_edges(mut self, mut edges: Vec<EdgeId>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        self.active = edges;
        self
    }

    pub fn config(&self) -> &BondConfig {
        &self.cfg
    }

    pub fn area(&self) -> usize {
        self.area
    }

    pub fn counters(&self) -> ChainCounters {
        self.counters
    }

    fn next_stamp(&mut self) -> u32 {
        if self.stamp >= u32::MAX - 1 {
            self.mark.fill(0);
            self.mark_b.fill(0);
            self.stamp = 0;
        }
        self.stamp += 1;
        self.stamp
    }

    /// One heat-bath update of edge `e`, rejected if it would break the
    /// constraint.
    pub fn step(&mut self, e: EdgeId, rng: &mut impl RngCore) {
        let u: f64 = rng.random();
        let prob = match &mut self.hb {
            Some(hb) => hb.open_probability(&self.cfg, &self.params, e),
            None => self.params.p,
        };
        let want = u < prob;
        self.counters.proposals += 1;
        if want == self.cfg.is_open(e) {
            return;
        }
        let ok = if want { self.open_edge(e) } else { self.close_edge(e) };
        if ok {
            self.cfg.set(e, want);
            self.counters.flips += 1;
        } else {
            self.counters.rejected += 1;
        }
    }

    fn is_reached(&self, f: u32) -> bool {
        f == NO || self.reached[f as usize]
    }

    /// Opening never lowers the trapped area. If both sides were reachable,
    /// a pocket may be cut off from the outside and join the lobe.
    fn open_edge(&mut self, e: EdgeId) -> bool {
        let [f, g] = self.edge_faces[e];
        if !(self.is_reached(f) && self.is_reached(g)) {
            return true;
        }
        if let Some(pocket) = self.find_pocket(e, f, g) {
            for &h in &pocket {
                self.reached[h as usize] = false;
            }
            self.absorb_into_lobe(&pocket);
            self.buf = pocket;
        }
        true
    }

    /// Alternating search from both faces over reached faces through closed
    /// edges other than `e`. Returns the side cut off from the outside, if
    /// any.
    fn find_pocket(&mut self, e: EdgeId, f: u32, g: u32) -> Option<Vec<u32>> {
        let stamp = self.next_stamp();
        let out_slot = self.mark.len() - 1;
        let slot = |x: u32| if x == NO { out_slot } else { x as usize };
        let mut queues = [std::mem::take(&mut self.buf), std::mem::take(&mut self.buf_b)];
        for (q, start) in queues.iter_mut().zip([f, g]) {
            q.clear();
            q.push(start);
        }
        self.mark[slot(f)] = stamp;
        self.mark_b[slot(g)] = stamp;
        let mut heads = [0usize; 2];
        let mut outside = [f == NO, g == NO];
        let mut pocket = None;
        'search: loop {
            for side in 0..2 {
                let Some(&v) = queues[side].get(heads[side]) else {
                    if !outside[side] {
                        pocket = Some(side);
                        break 'search;
                    }
                    continue;
                };
                heads[side] += 1;
                if v == NO {
                    continue;
                }
                for k in 0..4 {
                    let (edge, w) = self.face_nbr[v as usize][k];
                    if edge as usize == e || self.cfg.is_open(edge as usize) {
                        continue;
                    }
                    let s = slot(w);
                    let (mine, theirs) =
                        if side == 0 { (&mut self.mark, &self.mark_b) } else { (&mut self.mark_b, &self.mark) };
                    if theirs[s] == stamp {
                        break 'search;
                    }
                    if mine[s] != stamp {
                        mine[s] = stamp;
                        queues[side].push(w);
                        outside[side] |= w == NO;
                    }
                }
            }
            if outside[0] && outside[1] {
                break;
            }
            if heads[0] >= queues[0].len() && heads[1] >= queues[1].len() {
                pocket = (0..2).find(|&side| !outside[side]);
                break;
            }
        }
        let found = pocket.map(|side| queues[side].clone());
        let [qa, qb] = queues;
        self.buf = qa;
        self.buf_b = qb;
        found
    }

    /// Merge newly unreached faces, and every unreached face they connect
    /// to, into the lobe when they touch it or the origin.
    fn absorb_into_lobe(&mut self, pocket: &[u32]) {
        let touches = pocket.iter().any(|&h| {
            self.origin.contains(&h) || self.face_nbr[h as usize].iter().any(|&(_, w)| w != NO && self.lobe[w as usize])
        });
        if !touches {
            return;
        }
        let mut queue: Vec<u32> = Vec::new();
        for &h in pocket {
            if !self.lobe[h as usize] {
                self.lobe[h as usize] = true;
                self.area += 1;
                queue.push(h);
            }
        }
        while let Some(h) = queue.pop() {
            for k in 0..4 {
                let (_, w) = self.face_nbr[h as usize][k];
                if w != NO && !self.reached[w as usize] && !self.lobe[w as usize] {
                    self.lobe[w as usize] = true;
                    self.area += 1;
                    queue.push(w);
                }
            }
        }
    }

    /// Closing an edge between a reachable and an unreachable face floods
    /// the latter's closed component; reject if that exposes the origin or
    /// leaves too little area.
    fn close_edge(&mut self, e: EdgeId) -> bool {
        let [f, g] = self.edge_faces[e];
        let (rf, rg) = (self.is_reached(f), self.is_reached(g));
        if rf == rg {
            return true;
        }
        let b = if rf { g } else { f };
        let budget = self.area - self.spec.min_area();
        let stamp = self.next_stamp();
        let mut flood = std::mem::take(&mut self.buf);
        flood.clear();
        flood.push(b);
        self.mark[b as usize] = stamp;
        let mut head = 0;
        let mut lobe_lost = 0usize;
        let mut ok = true;
        while head < flood.len() {
            let v = flood[head];
            head += 1;
            if self.lobe[v as usize] {
                lobe_lost += 1;
                if lobe_lost > budget || self.origin.contains(&v) {
                    ok = false;
                    break;
                }
            }
            for &(edge, w) in &self.face_nbr[v as usize] {
                // e is about to close; the reached side is never entered
                if (edge as usize != e && self.cfg.is_open(edge as usize)) || w == NO {
                    continue;
                }
                if !self.reached[w as usize] && self.mark[w as usize] != stamp {
                    self.mark[w as usize] = stamp;
                    flood.push(w);
                }
            }
        }
        if ok && lobe_lost > 0 {
            // the remaining lobe may split; keep the origin's piece
            let new_area = self.lobe_area_without(stamp);
            if new_area < self.spec.min_area() {
                ok = false;
            } else {
                self.drop_split_pieces(&flood, stamp);
            }
        }
        if ok {
            for &v in &flood {
                self.reached[v as usize] = true;
                self.lobe[v as usize] = false;
            }
        }
        self.buf = flood;
        ok
    }

    /// Size of the origin's component of lobe faces not marked `stamp`.
    fn lobe_area_without(&mut self, stamp: u32) -> usize {
        let seen = self.next_stamp();
        let mut queue = std::mem::take(&mut self.buf_b);
        queue.clear();
        let start = self.origin[3];
        queue.push(start);
        self.mark_b[start as usize] = seen;
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            for &(_, w) in &self.face_nbr[v as usize] {
                if w != NO && self.lobe[w as usize] && self.mark[w as usize] != stamp && self.mark_b[w as usize] != seen
                {
                    self.mark_b[w as usize] = seen;
                    queue.push(w);
                }
            }
        }
        let n = queue.len();
        self.buf_b = queue;
        n
    }

    /// Drop the lobe pieces cut off from the origin's component found by
    /// the preceding [`Self::lobe_area_without`] call. Every such piece
    /// borders the flooded faces in `flood`.
    fn drop_split_pieces(&mut self, flood: &[u32], flood_stamp: u32) {
        let kept = self.stamp;
        self.area = self.buf_b.len();
        let mut stack: Vec<u32> = Vec::new();
        for &v in flood {
            for &(_, w) in &self.face_nbr[v as usize] {
                if w != NO
                    && self.lobe[w as usize]
                    && self.mark[w as usize] != flood_stamp
                    && self.mark_b[w as usize] != kept
                {
                    self.lobe[w as usize] = false;
                    stack.push(w);
                }
            }
        }
        while let Some(v) = stack.pop() {
            for &(_, w) in &self.face_nbr[v as usize] {
                if w != NO
                    && self.lobe[w as usize]
                    && self.mark[w as usize] != flood_stamp
                    && self.mark_b[w as usize] != kept
                {
                    self.lobe[w as usize] = false;
                    stack.push(w);
                }
            }
        }
    }

    /// Compare the incremental state with a full re-extraction.
    pub fn verify(&self) -> Result<()> {
        let geom = self.cfg.geom();
        let reached = flood_reached(&self.cfg);
        if reached != self.reached {
            return Err(Error::Invariant("incremental reachability diverged from full flood".into()));
        }
        let (lobe, area) = origin_lobe(geom, &reached)
            .ok_or_else(|| Error::Invariant("chain state does not enclose the origin".into()))?;
        if lobe != self.lobe || area != self.area {
            return Err(Error::Invariant(format!("incremental lobe diverged: tracked area {} vs {}", self.area, area)));
        }
        if area < self.spec.min_area() {
            return Err(Error::Invariant(format!("constraint broken: area {area}")));
        }
        Ok(())
    }

    /// One systematic sweep over the active edges; every
    /// [`CHECK_INTERVAL`] sweeps the state is re-verified.
    pub fn sweep(&mut self, rng: &mut impl RngCore) -> Result<()> {
        for i in 0..self.active.len() {
            let e = self.active[i];
            self.step(e, rng);
        }
        self.counters.sweeps += 1;
        if self.counters.sweeps.is_multiple_of(CHECK_INTERVAL) {
            self.verify()?;
        }
        Ok(())
    }
}

/// Run a chain from [`warm_start`] for `burn_in + sweeps` sweeps and collect
/// the configuration after every `thin`-th post-burn-in sweep.
pub fn constrained_chain(
    geom: BoxGeom,
    params: &RcParams,
    spec: &ConditionSpec,
    burn_in: u64,
    sweeps: u64,
    thin: u64,
    rng: &mut impl RngCore,
) -> Result<(Vec<BondConfig>, ChainCounters)> {
    if thin == 0 {
        return Err(Error::input("thin must be positive"));
    }
    spec.check_box(geom)?;
    let start = warm_start(geom, params, spec.n, rng)?;
    let mut chain = ConstrainedChain::new(*params, *spec, start)?;
    for _ in 0..burn_in {
        chain.sweep(rng)?;
    }
    let mut out = Vec::with_capacity((sweeps / thin) as usize);
    for s in 1..=sweeps {
        chain.sweep(rng)?;
        if s % thin == 0 {
            out.push(chain.config().clone());
        }
    }
    chain.verify()?;
    Ok((out, chain.counters()))
}
