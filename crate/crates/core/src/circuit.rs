//! Open circuits, the outermost circuit around the origin, and circuit
//! geometry: convex hull, roughness, cutpoints and regeneration sites.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{segment_meets_ray, shoelace2, Site};
use crate::lattice::{BondConfig, BoxGeom, OUT};

/// A simple closed nearest-neighbour cycle, counterclockwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    vertices: Vec<Site>,
}

impl Circuit {
    pub fn new(vertices: Vec<Site>) -> Result<Self> {
        let n = vertices.len();
        if n < 4 {
            return Err(Error::input("a circuit needs at least four vertices"));
        }
        for i in 0..n {
            if !vertices[i].is_neighbour(vertices[(i + 1) % n]) {
                return Err(Error::input(format!(
                    "{} and {} are not lattice neighbours",
                    vertices[i],
                    vertices[(i + 1) % n]
                )));
            }
        }
        let mut sorted = vertices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("circuit repeats a vertex"));
        }
        if shoelace2(&vertices) <= 0 {
            return Err(Error::input("circuit must be counterclockwise"));
        }
        Ok(Circuit { vertices })
    }

    /// Accepts either orientation.
    pub fn from_cycle(mut vertices: Vec<Site>) -> Result<Self> {
        if shoelace2(&vertices) < 0 {
            vertices.reverse();
        }
        Circuit::new(vertices)
    }

    pub fn vertices(&self) -> &[Site] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Site, Site)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn translate(&self, v: Site) -> Circuit {
        Circuit { vertices: self.vertices.iter().map(|&w| w + v).collect() }
    }

    /// Winding test for a point off the lattice lines.
    pub fn encloses(&self, p: [f64; 2]) -> bool {
        let poly: Vec<[f64; 2]> = self.vertices.iter().map(|v| v.to_f64()).collect();
        crate::geometry::point_in_polygon(p, &poly)
    }

    /// Whether the origin lies in the bounded complementary component.
    pub fn encloses_origin(&self) -> bool {
        if self.vertices.contains(&Site::ORIGIN) {
            return false;
        }
        // the origin's four faces are all inside or all outside
        self.encloses([0.5, 0.5]) && self.encloses([-0.5, -0.5])
    }
}

/// `|INT(c)|`, the number of unit faces enclosed.
pub fn interior_area(c: &Circuit) -> u64 {
    (shoelace2(c.vertices()) / 2) as u64
}

/// Faces reachable from outside the box through closed edges.
pub fn flood_reached(cfg: &BondConfig) -> Vec<bool> {
    let geom = cfg.geom();
    let mut reached = vec![false; geom.face_count()];
    let mut queue = VecDeque::new();
    for e in geom.edges() {
        let [f, g] = geom.faces_of_edge(e);
        if !cfg.is_open(e) {
            for (a, b) in [(f, g), (g, f)] {
                if a == OUT && b != OUT && !reached[b] {
                    reached[b] = true;
                    queue.push_back(b);
                }
            }
        }
    }
    while let Some(f) = queue.pop_front() {
        for e in geom.face_edges(f) {
            if cfg.is_open(e) {
                continue;
            }
            let [a, b] = geom.faces_of_edge(e);
            let g = if a == f { b } else { a };
            if g != OUT && !reached[g] {
                reached[g] = true;
                queue.push_back(g);
            }
        }
    }
    reached
}

/// The four faces sharing the origin as a corner.
pub fn origin_faces(geom: BoxGeom) -> [usize; 4] {
    [(-1, -1), (0, -1), (-1, 0), (0, 0)].map(|(x, y)| geom.face_index(Site::new(x, y)))
}

/// Unreached faces 4-connected to the origin, or `None` when some face at
/// the origin is reachable from outside. Returns the membership mask and
/// its size.
pub fn origin_lobe(geom: BoxGeom, reached: &[bool]) -> Option<(Vec<bool>, usize)> {
    let start = origin_faces(geom);
    if start.iter().any(|&f| reached[f]) {
        return None;
    }
    let mut lobe = vec![false; geom.face_count()];
    let mut queue = VecDeque::from([start[3]]);
    lobe[start[3]] = true;
    let mut area = 1;
    while let Some(f) = queue.pop_front() {
        for e in geom.face_edges(f) {
            let [a, b] = geom.faces_of_edge(e);
            let g = if a == f { b } else { a };
            if g != OUT && !reached[g] && !lobe[g] {
                lobe[g] = true;
                area += 1;
                queue.push_back(g);
            }
        }
    }
    Some((lobe, area))
}

/// Boundary of a simply connected set of faces containing face `(0,0)`,
/// traversed counterclockwise.
pub fn trace_lobe(geom: BoxGeom, lobe: &[bool]) -> Result<Circuit> {
    let inside = |c: Site| {
        let f = geom.face_index(c);
        f != OUT && lobe[f]
    };
    if !inside(Site::ORIGIN) {
        return Err(Error::Invariant("face at the origin is not in the traced region".into()));
    }
    let mut i = 0;
    while inside(Site::new(i + 1, 0)) {
        i += 1;
    }
    let start = Site::new(i + 1, 0);
    let mut v = start;
    let mut d = Site::new(0, 1);
    let mut out = Vec::new();
    let limit = geom.edge_count();
    loop {
        out.push(v);
        v = v + d;
        if v == start {
            break;
        }
        if out.len() > limit {
            return Err(Error::Invariant("boundary trace did not close".into()));
        }
        let left = Site::new(-d.y, d.x);
        let corner = |w: Site| Site::new(v.x + (w.x - 1) / 2, v.y + (w.y - 1) / 2);
        let ahead_left = inside(corner(d + left));
        let ahead_right = inside(corner(d - left));
        d = if !ahead_left {
            left
        } else if !ahead_right {
            d
        } else {
            -left
        };
    }
    Circuit::new(out).map_err(|e| Error::Invariant(format!("traced boundary is not a circuit: {e}")))
}

/// The outermost open circuit enclosing the origin, if any.
pub fn outermost_circuit(cfg: &BondConfig) -> Option<Circuit> {
    let geom = cfg.geom();
    let reached = flood_reached(cfg);
    let (lobe, _) = origin_lobe(geom, &reached)?;
    Some(trace_lobe(geom, &lobe).expect("lobe boundary traces to a circuit"))
}

/// Extreme points of the convex hull, counterclockwise, starting from the
/// lexicographically smallest. Collinear boundary points are dropped, so
/// consecutive hull vertices bound maximal facets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hull {
    pub vertices: Vec<Site>,
}

impl Hull {
    pub fn facets(&self) -> Vec<(Site, Site)> {
        let n = self.vertices.len();
        (0..n).map(|i| (self.vertices[i], self.vertices[(i + 1) % n])).collect()
    }

    /// Whether `p` lies on the hull boundary.
    pub fn on_boundary(&self, p: Site) -> bool {
        self.facets()
            .iter()
            .any(|&(a, b)| (b - a).cross(p - a) == 0 && (p - a).dot(b - a) >= 0 && (p - b).dot(a - b) >= 0)
    }
}

pub fn convex_hull(points: &[Site]) -> Hull {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return Hull { vertices: pts };
    }
    let mut lower: Vec<Site> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && (lower[lower.len() - 1] - lower[lower.len() - 2]).cross(p - lower[lower.len() - 2]) <= 0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Site> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && (upper[upper.len() - 1] - upper[upper.len() - 2]).cross(p - upper[upper.len() - 2]) <= 0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Hull { vertices: lower }
}

pub fn hull_and_facets(c: &Circuit) -> Hull {
    convex_hull(c.vertices())
}

/// Squared distance from `x` to the line through facet `(a, b)` as an exact
/// fraction `num / den`.
fn line_dist2(x: Site, a: Site, b: Site) -> (i128, i128) {
    let c = (b - a).cross(x - a) as i128;
    (c * c, (b - a).norm2() as i128)
}

fn frac_cmp(a: (i128, i128), b: (i128, i128)) -> Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

/// Maximum local roughness: the vertex farthest from the hull boundary,
/// ties broken towards the lexicographically smallest vertex.
pub fn max_local_roughness(c: &Circuit, hull: &Hull) -> (f64, Site) {
    let facets = hull.facets();
    let mut best: Option<((i128, i128), Site)> = None;
    for &x in c.vertices() {
        let d = facets.iter().map(|&(a, b)| line_dist2(x, a, b)).min_by(|&u, &v| frac_cmp(u, v)).unwrap_or((0, 1));
        let better = match best {
            None => true,
            Some((bd, bx)) => match frac_cmp(d, bd) {
                Ordering::Greater => true,
                Ordering::Equal => x < bx,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((d, x));
        }
    }
    let ((num, den), x) = best.expect("nonempty circuit");
    ((num as f64 / den as f64).sqrt(), x)
}

pub fn max_facet_length(hull: &Hull) -> f64 {
    hull.facets().iter().map(|&(a, b)| a.dist(b)).fold(0.0, f64::max)
}

/// The hull facet met first clockwise and counterclockwise from `x`, as seen
/// from the origin. A hull vertex exactly in the direction of `x` counts as
/// the counterclockwise end.
pub fn facet_facing(hull: &Hull, x: Site) -> (Site, Site) {
    for (a, b) in hull.facets() {
        if a.cross(x) > 0 && x.cross(b) >= 0 {
            return (a, b);
        }
    }
    // unreachable when the origin is strictly inside the hull
    hull.facets()[0]
}

/// Vertices whose ray from the origin meets the circuit only at the vertex.
pub fn cutpoints(c: &Circuit) -> Result<Vec<Site>> {
    if !c.encloses_origin() {
        return Err(Error::input("cutpoints require a circuit enclosing the origin"));
    }
    let vs = c.vertices();
    let n = vs.len();
    let mut out = Vec::new();
    for i in 0..n {
        let v = vs[i];
        let prev = vs[(i + n - 1) % n];
        let next = vs[(i + 1) % n];
        if v.cross(prev - v) == 0 || v.cross(next - v) == 0 {
            continue;
        }
        let hit = (0..n).any(|j| {
            let (a, b) = (vs[j], vs[(j + 1) % n]);
            a != v && b != v && segment_meets_ray(a, b, v)
        });
        if !hit {
            out.push(v);
        }
    }
    Ok(out)
}

/// The two closed polygons obtained by cutting the circuit along the radial
/// segments to cutpoints `v1` and `v2`: the counterclockwise arc from `v1`
/// to `v2` closed through the origin, and the complementary arc.
pub fn cutpoint_pieces(c: &Circuit, v1: Site, v2: Site) -> Result<(Vec<Site>, Vec<Site>)> {
    let vs = c.vertices();
    let n = vs.len();
    let i1 = vs.iter().position(|&v| v == v1).ok_or_else(|| Error::input(format!("{v1} not on circuit")))?;
    let i2 = vs.iter().position(|&v| v == v2).ok_or_else(|| Error::input(format!("{v2} not on circuit")))?;
    if i1 == i2 {
        return Err(Error::input("cutpoints must differ"));
    }
    let arc = |from: usize, to: usize| {
        let mut p = vec![Site::ORIGIN];
        let mut k = from;
        loop {
            p.push(vs[k]);
            if k == to {
                break;
            }
            k = (k + 1) % n;
        }
        p
    };
    Ok((arc(i1, i2), arc(i2, i1)))
}

/// Maximal distance from the path to the segment `[x, y]`.
pub fn fluc(path: &[Site], x: Site, y: Site) -> Result<f64> {
    if path.first() != Some(&x) || path.last() != Some(&y) {
        return Err(Error::input("x and y must be the path's endpoints"));
    }
    let (a, b) = (x.to_f64(), y.to_f64());
    Ok(path.iter().map(|v| crate::geometry::point_segment_distance(v.to_f64(), a, b)).fold(0.0, f64::max))
}

/// Smallest angular distance from direction `c` to the arc that starts at
/// `start` and sweeps `len >= 0` counterclockwise.
fn angle_to_arc(c: f64, start: f64, len: f64) -> f64 {
    let off = (c - start).rem_euclid(2.0 * PI);
    if off <= len {
        return 0.0;
    }
    let to_start = 2.0 * PI - off;
    let to_end = off - len;
    to_start.min(to_end)
}

fn check_constants(q0: f64, c0: f64) -> Result<()> {
    if !(c0 > 0.0 && c0 < q0 / 2.0 && q0 / 2.0 < PI / 4.0) {
        return Err(Error::input(format!("need 0 < c0 < q0/2 < pi/4, got q0 = {q0}, c0 = {c0}")));
    }
    Ok(())
}

/// Portion `[t0, t1]` of the segment `a + t (b - a)` inside the convex cone
/// bounded by unit directions `lo` (clockwise edge) and `hi`.
fn clip_to_cone(a: [f64; 2], b: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> Option<(f64, f64)> {
    use crate::geometry::cross2;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (f0, f1) in [(cross2(lo, a), cross2(lo, b)), (cross2(a, hi), cross2(b, hi))] {
        // need f0 + t (f1 - f0) >= 0
        let df = f1 - f0;
        if df == 0.0 {
            if f0 < 0.0 {
                return None;
            }
        } else {
            let t = -f0 / df;
            if df > 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Whether `v` is a regeneration site: every circuit point within angular
/// distance `c0` of `v` lies in the forward or backward cone of aperture
/// `pi/2 - q0` at `v`. Equivalently no such point sees `v` along a
/// direction within `q0` of the radial line through `v`.
pub fn is_regeneration_site(c: &Circuit, v: Site, q0: f64, c0: f64) -> bool {
    let th = v.arg();
    let lo = [(th - c0).cos(), (th - c0).sin()];
    let hi = [(th + c0).cos(), (th + c0).sin()];
    let vf = v.to_f64();
    let blocked = [th, th + PI];
    for (a, b) in c.edges() {
        let (af, bf) = (a.to_f64(), b.to_f64());
        let Some((t0, t1)) = clip_to_cone(af, bf, lo, hi) else { continue };
        let at = |t: f64| [af[0] + t * (bf[0] - af[0]) - vf[0], af[1] + t * (bf[1] - af[1]) - vf[1]];
        let (p, q) = (at(t0), at(t1));
        let dirs: Vec<[f64; 2]> = if a == v || b == v {
            // direction from v along the edge, if any of it survives clipping
            let other = if a == v { bf } else { af };
            if t1 - t0 <= 0.0 {
                continue;
            }
            vec![[other[0] - vf[0], other[1] - vf[1]]]
        } else {
            vec![p, q]
        };
        let (start, len) = if dirs.len() == 1 {
            (dirs[0][1].atan2(dirs[0][0]), 0.0)
        } else {
            let (ap, aq) = (p[1].atan2(p[0]), q[1].atan2(q[0]));
            let ccw = (aq - ap).rem_euclid(2.0 * PI);
            if ccw <= PI {
                (ap, ccw)
            } else {
                (aq, 2.0 * PI - ccw)
            }
        };
        if blocked.iter().any(|&cdir| angle_to_arc(cdir, start, len) < q0) {
            return false;
        }
    }
    true
}

/// All regeneration sites of a circuit enclosing the origin, in circuit order.
pub fn regeneration_sites(c: &Circuit, q0: f64, c0: f64) -> Result<Vec<Site>> {
    check_constants(q0, c0)?;
    if !c.encloses_origin() {
        return Err(Error::input("regeneration sites require a circuit enclosing the origin"));
    }
    Ok(c.vertices().iter().copied().filter(|&v| is_regeneration_site(c, v, q0, c0)).collect())
}

/// Exact comparison of counterclockwise angular offsets of `a` and `b`
/// measured from `base`.
pub fn ccw_offset_cmp(base: Site, a: Site, b: Site) -> Ordering {
    let half = |v: Site| {
        let c = base.cross(v);
        if c > 0 || (c == 0 && base.dot(v) > 0) {
            0
        } else {
            1
        }
    };
    half(a).cmp(&half(b)).then_with(|| 0.cmp(&a.cross(b)))
}

/// Counterclockwise angle from `a` to `b` in `[0, 2pi)`.
pub fn ccw_angle(a: Site, b: Site) -> f64 {
    if a.cross(b) == 0 && a.dot(b) > 0 {
        return 0.0;
    }
    let t = (a.cross(b) as f64).atan2(a.dot(b) as f64);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Width of the largest origin-rooted sector free of the given sites.
pub fn theta_rg_max(rg: &[Site]) -> f64 {
    if rg.len() <= 1 {
        return 2.0 * PI;
    }
    let base = Site::new(1, 0);
    let mut sites = rg.to_vec();
    sites.sort_by(|&a, &b| ccw_offset_cmp(base, a, b));
    let n = sites.len();
    (0..n).map(|i| ccw_angle(sites[i], sites[(i + 1) % n])).fold(0.0, f64::max)
}

/// First site met by a counterclockwise (or, with `clockwise`, clockwise)
/// angular search from `x`. Sites in the same direction as `x` are met
/// immediately; equal directions are resolved towards the site nearest `x`.
pub fn first_site(x: Site, rg: &[Site], clockwise: bool) -> Option<Site> {
    let flip = |v: Site| if clockwise { Site::new(v.x, -v.y) } else { v };
    rg.iter().copied().min_by(|&a, &b| {
        ccw_offset_cmp(flip(x), flip(a), flip(b))
            .then_with(|| (a - x).norm2().cmp(&(b - x).norm2()))
            .then_with(|| a.cmp(&b))
    })
}

/// Maximum point-to-regeneration-site distance; infinite without sites.
pub fn mprg(c: &Circuit, rg: &[Site]) -> f64 {
    if rg.is_empty() {
        return f64::INFINITY;
    }
    c.vertices()
        .iter()
        .map(|&x| {
            let a = first_site(x, rg, false).expect("nonempty");
            let b = first_site(x, rg, true).expect("nonempty");
            x.dist(a).max(x.dist(b))
        })
        .fold(0.0, f64::max)
}

/// Axis-aligned square circuit with lower-left corner `lo` and side `s`.
pub fn square_circuit(lo: Site, s: i32) -> Circuit {
    let mut v = Vec::with_capacity(4 * s as usize);
    for i in 0..s {
        v.push(Site::new(lo.x + i, lo.y));
    }
    for i in 0..s {
        v.push(Site::new(lo.x + s, lo.y + i));
    }
    for i in 0..s {
        v.push(Site::new(lo.x + s - i, lo.y + s));
    }
    for i in 0..s {
        v.push(Site::new(lo.x, lo.y + s - i));
    }
    Circuit::new(v).expect("square is a circuit")
}
