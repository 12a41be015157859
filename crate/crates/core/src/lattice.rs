//! Finite boxes of the square lattice, bond configurations, connectivity and
//! planar duality.

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{Sector, Site};

pub type EdgeId = usize;

/// Sentinel face index for the unbounded face outside the box.
pub const OUT: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// Edge from `v` to `v + (1, 0)`.
    X,
    /// Edge from `v` to `v + (0, 1)`.
    Y,
}

/// The box `[-L, L]^2` with dense edge ids.
///
/// Edges are keyed by their lower-left endpoint and axis, ordered
/// lexicographically by endpoint and then `X` before `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxGeom {
    half_width: i32,
}

impl BoxGeom {
    pub fn new(half_width: u32) -> Result<Self> {
        if half_width == 0 || half_width > 4096 {
            return Err(Error::input(format!("box half-width must be in 1..=4096, got {half_width}")));
        }
        Ok(BoxGeom { half_width: half_width as i32 })
    }

    pub fn half_width(&self) -> i32 {
        self.half_width
    }

    pub fn side(&self) -> i32 {
        2 * self.half_width + 1
    }

    pub fn vertex_count(&self) -> usize {
        (self.side() as usize).pow(2)
    }

    pub fn edge_count(&self) -> usize {
        2 * self.side() as usize * 2 * self.half_width as usize
    }

    pub fn contains(&self, v: Site) -> bool {
        v.x.abs() <= self.half_width && v.y.abs() <= self.half_width
    }

    pub fn is_boundary(&self, v: Site) -> bool {
        v.x.abs() == self.half_width || v.y.abs() == self.half_width
    }

    pub fn vertex_index(&self, v: Site) -> usize {
        debug_assert!(self.contains(v));
        ((v.x + self.half_width) * self.side() + v.y + self.half_width) as usize
    }

    pub fn vertex(&self, idx: usize) -> Site {
        let s = self.side() as usize;
        Site::new((idx / s) as i32 - self.half_width, (idx % s) as i32 - self.half_width)
    }

    pub fn vertices(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.vertex_count()).map(|i| self.vertex(i))
    }

    pub fn edges(&self) -> std::ops::Range<EdgeId> {
        0..self.edge_count()
    }

    pub fn edge_id(&self, v: Site, axis: Axis) -> Option<EdgeId> {
        if !self.contains(v) {
            return None;
        }
        let l2 = 2 * self.half_width;
        let (cx, cy) = (v.x + self.half_width, v.y + self.half_width);
        let col = (cx * (2 * self.side() - 1)) as usize;
        match axis {
            Axis::X if cx < l2 => Some(col + 2 * cy as usize),
            Axis::Y if cy < l2 && cx < l2 => Some(col + 2 * cy as usize + 1),
            Axis::Y if cy < l2 => Some(col + cy as usize),
            _ => None,
        }
    }

    pub fn edge_between(&self, a: Site, b: Site) -> Option<EdgeId> {
        match (b.x - a.x, b.y - a.y) {
            (1, 0) => self.edge_id(a, Axis::X),
            (-1, 0) => self.edge_id(b, Axis::X),
            (0, 1) => self.edge_id(a, Axis::Y),
            (0, -1) => self.edge_id(b, Axis::Y),
            _ => None,
        }
    }

    /// Lower-left endpoint and axis of an edge.
    pub fn edge(&self, e: EdgeId) -> (Site, Axis) {
        let l2 = 2 * self.half_width;
        let stride = (2 * self.side() - 1) as usize;
        let cx = (e / stride) as i32;
        let r = (e % stride) as i32;
        let (cy, axis) = if cx < l2 { (r / 2, if r % 2 == 0 { Axis::X } else { Axis::Y }) } else { (r, Axis::Y) };
        (Site::new(cx - self.half_width, cy - self.half_width), axis)
    }

    pub fn endpoints(&self, e: EdgeId) -> (Site, Site) {
        let (v, axis) = self.edge(e);
        match axis {
            Axis::X => (v, Site::new(v.x + 1, v.y)),
            Axis::Y => (v, Site::new(v.x, v.y + 1)),
        }
    }

    /// Edges incident to `v` together with the opposite endpoint.
    pub fn incident(&self, v: Site) -> impl Iterator<Item = (EdgeId, Site)> + '_ {
        [(1, 0), (0, 1), (-1, 0), (0, -1)].into_iter().filter_map(move |(dx, dy)| {
            let w = Site::new(v.x + dx, v.y + dy);
            self.edge_between(v, w).map(|e| (e, w))
        })
    }

    pub fn face_count(&self) -> usize {
        (2 * self.half_width as usize).pow(2)
    }

    /// Index of the unit face with lower-left corner `c`, or [`OUT`].
    pub fn face_index(&self, c: Site) -> usize {
        let l = self.half_width;
        if c.x < -l || c.x >= l || c.y < -l || c.y >= l {
            return OUT;
        }
        ((c.x + l) * 2 * l + c.y + l) as usize
    }

    pub fn face_corner(&self, f: usize) -> Site {
        let w = 2 * self.half_width as usize;
        Site::new((f / w) as i32 - self.half_width, (f % w) as i32 - self.half_width)
    }

    /// The two faces separated by an edge: below/above for horizontal edges,
    /// left/right for vertical ones.
    pub fn faces_of_edge(&self, e: EdgeId) -> [usize; 2] {
        let (v, axis) = self.edge(e);
        match axis {
            Axis::X => [self.face_index(Site::new(v.x, v.y - 1)), self.face_index(v)],
            Axis::Y => [self.face_index(Site::new(v.x - 1, v.y)), self.face_index(v)],
        }
    }

    /// Bottom, right, top and left edges of a face.
    pub fn face_edges(&self, f: usize) -> [EdgeId; 4] {
        let c = self.face_corner(f);
        let get = |v, a| self.edge_id(v, a).expect("face edge inside box");
        [get(c, Axis::X), get(Site::new(c.x + 1, c.y), Axis::Y), get(Site::new(c.x, c.y + 1), Axis::X), get(c, Axis::Y)]
    }

    /// The box as an abstract graph with its boundary vertices marked.
    pub fn graph(&self) -> PlanarGraph {
        PlanarGraph {
            n_vertices: self.vertex_count(),
            edges: self
                .edges()
                .map(|e| {
                    let (a, b) = self.endpoints(e);
                    (self.vertex_index(a) as u32, self.vertex_index(b) as u32)
                })
                .collect(),
            boundary: self.vertices().map(|v| self.is_boundary(v)).collect(),
        }
    }

    /// The dual box: vertices at `(i + 1/2, j + 1/2)` for `i, j` in
    /// `[-L-1, L]`, one dual edge per primal edge, with the same ids.
    pub fn dual_graph(&self) -> PlanarGraph {
        let l = self.half_width;
        let w = 2 * l + 2;
        let idx = |i: i32, j: i32| ((i + l + 1) * w + j + l + 1) as u32;
        let edges = self
            .edges()
            .map(|e| {
                let (v, axis) = self.edge(e);
                match axis {
                    Axis::X => (idx(v.x, v.y - 1), idx(v.x, v.y)),
                    Axis::Y => (idx(v.x - 1, v.y), idx(v.x, v.y)),
                }
            })
            .collect();
        let boundary = (0..w * w)
            .map(|k| {
                let (i, j) = (k / w, k % w);
                i == 0 || j == 0 || i == w - 1 || j == w - 1
            })
            .collect();
        PlanarGraph { n_vertices: (w * w) as usize, edges, boundary }
    }

    /// Index in [`BoxGeom::dual_graph`] of the dual vertex `(i + 1/2, j + 1/2)`.
    pub fn dual_vertex_index(&self, i: i32, j: i32) -> usize {
        let l = self.half_width;
        ((i + l + 1) * (2 * l + 2) + j + l + 1) as usize
    }
}

/// A finite graph given by an edge list, with marked boundary vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanarGraph {
    pub n_vertices: usize,
    pub edges: Vec<(u32, u32)>,
    pub boundary: Vec<bool>,
}

impl PlanarGraph {
    /// Union-find over the open edges.
    pub fn components(&self, open: &[bool]) -> UnionFind<u32> {
        let mut uf = UnionFind::new(self.n_vertices);
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if open[i] {
                uf.union(a, b);
            }
        }
        uf
    }

    /// Number of open clusters; with `wired` only clusters containing no
    /// boundary vertex are counted.
    pub fn cluster_count(&self, open: &[bool], wired: bool) -> usize {
        let uf = self.components(open);
        let labels = uf.into_labeling();
        let mut is_root = vec![false; self.n_vertices];
        for &r in &labels {
            is_root[r as usize] = true;
        }
        if wired {
            for v in 0..self.n_vertices {
                if self.boundary[v] {
                    is_root[labels[v] as usize] = false;
                }
            }
        }
        is_root.iter().filter(|&&r| r).count()
    }
}

/// Bond states of a box; `true` is open.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BondConfig {
    geom: BoxGeom,
    states: Vec<bool>,
    open_count: usize,
}

impl BondConfig {
    pub fn closed(geom: BoxGeom) -> Self {
        BondConfig { geom, states: vec![false; geom.edge_count()], open_count: 0 }
    }

    pub fn open(geom: BoxGeom) -> Self {
        let m = geom.edge_count();
        BondConfig { geom, states: vec![true; m], open_count: m }
    }

    pub fn from_states(geom: BoxGeom, states: Vec<bool>) -> Result<Self> {
        if states.len() != geom.edge_count() {
            return Err(Error::input(format!("expected {} edge states, got {}", geom.edge_count(), states.len())));
        }
        let open_count = states.iter().filter(|&&s| s).count();
        Ok(BondConfig { geom, states, open_count })
    }

    /// Configuration whose edge `e` is open iff bit `e` of `bits` is set.
    pub fn from_bits(geom: BoxGeom, bits: u64) -> Self {
        assert!(geom.edge_count() <= 64);
        let states: Vec<bool> = geom.edges().map(|e| bits >> e & 1 == 1).collect();
        let open_count = bits.count_ones() as usize;
        BondConfig { geom, states, open_count }
    }

    pub fn to_bits(&self) -> u64 {
        assert!(self.states.len() <= 64);
        self.states.iter().enumerate().fold(0, |acc, (e, &s)| acc | (s as u64) << e)
    }

    pub fn geom(&self) -> BoxGeom {
        self.geom
    }

    pub fn states(&self) -> &[bool] {
        &self.states
    }

    pub fn is_open(&self, e: EdgeId) -> bool {
        self.states[e]
    }

    pub fn open_count(&self) -> usize {
        self.open_count
    }

    pub fn closed_count(&self) -> usize {
        self.states.len() - self.open_count
    }

    pub fn set(&mut self, e: EdgeId, open: bool) {
        if self.states[e] != open {
            self.states[e] = open;
            if open {
                self.open_count += 1;
            } else {
                self.open_count -= 1;
            }
        }
    }

    pub fn open_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.states.iter().enumerate().filter(|(_, &s)| s).map(|(e, _)| e)
    }

    pub fn is_open_between(&self, a: Site, b: Site) -> bool {
        self.geom.edge_between(a, b).is_some_and(|e| self.states[e])
    }
}

/// A set of edges of a box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    mask: Vec<bool>,
}

impl Region {
    pub fn full(geom: BoxGeom) -> Self {
        Region { mask: vec![true; geom.edge_count()] }
    }

    pub fn empty(geom: BoxGeom) -> Self {
        Region { mask: vec![false; geom.edge_count()] }
    }

    pub fn from_edges(geom: BoxGeom, edges: impl IntoIterator<Item = EdgeId>) -> Self {
        let mut r = Region::empty(geom);
        for e in edges {
            r.mask[e] = true;
        }
        r
    }

    pub fn from_predicate(geom: BoxGeom, mut keep: impl FnMut(Site, Site) -> bool) -> Self {
        Region {
            mask: geom
                .edges()
                .map(|e| {
                    let (a, b) = geom.endpoints(e);
                    keep(a, b)
                })
                .collect(),
        }
    }

    /// `E(A)`: edges whose closed segment lies in the sector.
    pub fn sector(geom: BoxGeom, sector: &Sector) -> Self {
        Region::from_predicate(geom, |a, b| sector.contains_segment(a, b))
    }

    /// `E*(A)`: edges whose closed segment meets the sector.
    pub fn sector_touching(geom: BoxGeom, sector: &Sector) -> Self {
        Region::from_predicate(geom, |a, b| sector.touches_segment(a, b))
    }

    /// Edges with both endpoints in the closed rectangle `[lo, hi]`.
    pub fn rect(geom: BoxGeom, lo: Site, hi: Site) -> Self {
        let inside = |v: Site| v.x >= lo.x && v.x <= hi.x && v.y >= lo.y && v.y <= hi.y;
        Region::from_predicate(geom, |a, b| inside(a) && inside(b))
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.mask[e]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(e, _)| e)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn complement(&self) -> Self {
        Region { mask: self.mask.iter().map(|&m| !m).collect() }
    }

    pub fn union(&self, other: &Region) -> Self {
        Region { mask: self.mask.iter().zip(&other.mask).map(|(&a, &b)| a || b).collect() }
    }

    pub fn intersect(&self, other: &Region) -> Self {
        Region { mask: self.mask.iter().zip(&other.mask).map(|(&a, &b)| a && b).collect() }
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        !self.mask.iter().zip(&other.mask).any(|(&a, &b)| a && b)
    }

    /// Image under translation by `shift`; edges leaving the box are dropped.
    pub fn translate(&self, geom: BoxGeom, shift: Site) -> Self {
        let mut out = Region::empty(geom);
        for e in self.edges() {
            let (a, b) = geom.endpoints(e);
            if let Some(f) = geom.edge_between(a + shift, b + shift) {
                out.mask[f] = true;
            }
        }
        out
    }
}

fn check_vertex(geom: BoxGeom, v: Site) -> Result<()> {
    if geom.contains(v) {
        Ok(())
    } else {
        Err(Error::input(format!("vertex {v} outside box of half-width {}", geom.half_width())))
    }
}

fn bfs(cfg: &BondConfig, x: Site, region: &Region, mut stop: impl FnMut(Site) -> bool) -> Vec<bool> {
    let geom = cfg.geom();
    let mut seen = vec![false; geom.vertex_count()];
    let mut queue = VecDeque::new();
    seen[geom.vertex_index(x)] = true;
    queue.push_back(x);
    while let Some(v) = queue.pop_front() {
        if stop(v) {
            break;
        }
        for (e, w) in geom.incident(v) {
            if cfg.is_open(e) && region.contains(e) {
                let wi = geom.vertex_index(w);
                if !seen[wi] {
                    seen[wi] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    seen
}

/// Whether an open path using only edges of `region` joins `x` and `y`.
pub fn connected(cfg: &BondConfig, x: Site, y: Site, region: &Region) -> Result<bool> {
    let geom = cfg.geom();
    check_vertex(geom, x)?;
    check_vertex(geom, y)?;
    let mut found = false;
    bfs(cfg, x, region, |v| {
        found = v == y;
        found
    });
    Ok(found)
}

/// The open cluster of `x` within `region`, sorted lexicographically.
pub fn open_cluster(cfg: &BondConfig, x: Site, region: &Region) -> Result<Vec<Site>> {
    let geom = cfg.geom();
    check_vertex(geom, x)?;
    let seen = bfs(cfg, x, region, |_| false);
    Ok(seen.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| geom.vertex(i)).collect())
}

/// Configuration on the dual box: a dual edge is open iff the primal edge it
/// crosses is closed. Dual edges share ids with the primal edges they cross.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualConfig {
    primal: BoxGeom,
    states: Vec<bool>,
}

impl DualConfig {
    pub fn primal_geom(&self) -> BoxGeom {
        self.primal
    }

    pub fn states(&self) -> &[bool] {
        &self.states
    }

    pub fn is_open(&self, e: EdgeId) -> bool {
        self.states[e]
    }

    pub fn graph(&self) -> PlanarGraph {
        self.primal.dual_graph()
    }

    /// The dual of the dual, which is the original primal configuration.
    pub fn dual(&self) -> BondConfig {
        BondConfig::from_states(self.primal, self.states.iter().map(|&s| !s).collect()).expect("edge counts agree")
    }
}

pub fn dual_config(cfg: &BondConfig) -> DualConfig {
    DualConfig { primal: cfg.geom(), states: cfg.states().iter().map(|&s| !s).collect() }
}
