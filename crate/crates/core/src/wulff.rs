//! Inverse correlation length, the unit-area Wulff shape, and the
//! regeneration constants `(q0, c0)` derived from it.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Site;
use crate::geometry::{angle_between, cross2, perp, Vec2};
use crate::lattice::BoxGeom;
use crate::model::{critical_point, sample_fk, RcParams};
use crate::rng::StreamRng;

/// Samples per independent work unit in [`estimate_xi`].
const CHUNK: u64 = 1024;

/// Per-direction inverse correlation length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiTable {
    /// Direction angles `2 pi j / dirs`.
    pub angles: Vec<f64>,
    pub xi: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Set where the fit window had to be widened because of zero counts.
    pub flagged: Vec<bool>,
    /// Root-mean-square residual of each fit.
    pub residual: Vec<f64>,
    pub meta: XiMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiMeta {
    pub p: f64,
    pub q: f64,
    pub kmax: u32,
    pub samples: u64,
    pub seed: u64,
    pub symmetrized: bool,
}

impl XiTable {
    pub fn dirs(&self) -> usize {
        self.angles.len()
    }

    pub fn direction(&self, j: usize) -> Vec2 {
        [self.angles[j].cos(), self.angles[j].sin()]
    }

    /// Table with `xi(u) = f(u)` exactly and zero error, for constructing
    /// shapes from a known support function.
    pub fn from_fn(dirs: usize, f: impl Fn(Vec2) -> f64) -> Self {
        let angles: Vec<f64> = (0..dirs).map(|j| 2.0 * PI * j as f64 / dirs as f64).collect();
        let xi = angles.iter().map(|&a| f([a.cos(), a.sin()])).collect();
        XiTable {
            angles,
            xi,
            stderr: vec![0.0; dirs],
            flagged: vec![false; dirs],
            residual: vec![0.0; dirs],
            meta: XiMeta { p: f64::NAN, q: f64::NAN, kmax: 0, samples: 0, seed: 0, symmetrized: false },
        }
    }

    /// Inverse-variance weighted average over the orbits of the eight lattice
    /// symmetries. Requires `dirs` divisible by 8.
    pub fn symmetrize(&self) -> Result<XiTable> {
        let d = self.dirs();
        if !d.is_multiple_of(8) {
            return Err(Error::input(format!("symmetrization needs a multiple of 8 directions, got {d}")));
        }
        let quarter = d / 4;
        let mut out = self.clone();
        for j in 0..d {
            let orbit: Vec<usize> = (0..4).flat_map(|r| [(j + r * quarter) % d, (d - j + r * quarter) % d]).collect();
            let mut members = orbit.clone();
            members.sort_unstable();
            members.dedup();
            let weighted = members.iter().all(|&k| self.stderr[k] > 0.0 && self.stderr[k].is_finite());
            let (mut sw, mut sx) = (0.0, 0.0);
            for &k in &members {
                let w = if weighted { self.stderr[k].powi(-2) } else { 1.0 };
                sw += w;
                sx += w * self.xi[k];
            }
            out.xi[j] = sx / sw;
            out.stderr[j] = if weighted {
                sw.powf(-0.5)
            } else {
                members.iter().map(|&k| self.stderr[k]).fold(f64::INFINITY, f64::min)
            };
            out.flagged[j] = members.iter().any(|&k| self.flagged[k]);
            out.residual[j] = members.iter().map(|&k| self.residual[k]).fold(0.0, f64::max);
        }
        out.meta.symmetrized = true;
        Ok(out)
    }
}

/// Lattice target `floor(k u)` for every direction and every `k` in
/// `1..=kmax`.
fn targets(angles: &[f64], kmax: u32) -> Vec<Vec<Site>> {
    angles
        .iter()
        .map(|&a| {
            (1..=kmax)
                .map(|k| {
                    let t = k as f64;
                    Site::new((t * a.cos()).floor() as i32, (t * a.sin()).floor() as i32)
                })
                .collect()
        })
        .collect()
}

/// Counts of `0 <-> floor(k u)` over `n` draws, accumulated into `hits`
/// (indexed `[dir * kmax + k - 1]`).
fn count_connections(
    params: &RcParams,
    geom: BoxGeom,
    tgt: &[Vec<Site>],
    n: u64,
    rng: &mut StreamRng,
    hits: &mut [u64],
) -> Result<()> {
    let idx: Vec<Vec<usize>> = tgt.iter().map(|row| row.iter().map(|&s| geom.vertex_index(s)).collect()).collect();
    let kmax = tgt.first().map_or(0, |r| r.len());
    if params.q == 1.0 {
        let mut explorer = LazyCluster::new(geom);
        for _ in 0..n {
            explorer.explore(params.p, rng);
            for (d, row) in idx.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    if explorer.contains(v) {
                        hits[d * kmax + k] += 1;
                    }
                }
            }
        }
    } else {
        for _ in 0..n {
            let cfg = sample_fk(geom, params, 100, rng)?;
            let cluster = crate::lattice::open_cluster(&cfg, Site::ORIGIN, &crate::lattice::Region::full(geom))?;
            let mut inside = vec![false; geom.vertex_count()];
            for v in cluster {
                inside[geom.vertex_index(v)] = true;
            }
            for (d, row) in idx.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    if inside[v] {
                        hits[d * kmax + k] += 1;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Breadth-first exploration of the origin's open cluster under
/// independent percolation, revealing each edge only when first examined.
struct LazyCluster {
    geom: BoxGeom,
    edge_state: Vec<u8>,
    touched: Vec<usize>,
    mark: Vec<u32>,
    stamp: u32,
    queue: Vec<Site>,
}

impl LazyCluster {
    fn new(geom: BoxGeom) -> Self {
        LazyCluster {
            geom,
            edge_state: vec![0; geom.edge_count()],
            touched: Vec::new(),
            mark: vec![0; geom.vertex_count()],
            stamp: 0,
            queue: Vec::new(),
        }
    }

    fn explore(&mut self, p: f64, rng: &mut StreamRng) {
        use rand::Rng;
        for &e in &self.touched {
            self.edge_state[e] = 0;
        }
        self.touched.clear();
        self.stamp += 1;
        self.queue.clear();
        self.queue.push(Site::ORIGIN);
        self.mark[self.geom.vertex_index(Site::ORIGIN)] = self.stamp;
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            for (e, w) in self.geom.incident(v) {
                if self.edge_state[e] == 0 {
                    self.edge_state[e] = if rng.random::<f64>() < p { 1 } else { 2 };
                    self.touched.push(e);
                }
                let wi = self.geom.vertex_index(w);
                if self.edge_state[e] == 1 && self.mark[wi] != self.stamp {
                    self.mark[wi] = self.stamp;
                    self.queue.push(w);
                }
            }
        }
    }

    fn contains(&self, v: usize) -> bool {
        self.mark[v] == self.stamp
    }
}

/// Weighted least-squares slope of `y` on `x`; returns `(slope, se, rms)`.
fn wls_slope(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    let rms = (x.iter().zip(y).map(|(a, c)| (c - my - slope * (a - mx)).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    (slope, sxx.powf(-0.5), rms)
}

/// Least hit count for a distance to enter the decay fit.
const MIN_HITS: u64 = 5;

/// Fit `-log P(0 <-> floor(k u))` against `k`. Uses `k` in
/// `[kmax/2, kmax]` when at least two of those have [`MIN_HITS`] hits,
/// otherwise every such `k`; the fallback is flagged and its error doubled.
fn fit_direction(hits: &[u64], samples: u64) -> Option<(f64, f64, bool, f64)> {
    let kmax = hits.len();
    let collect = |lo: usize| {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut ws = Vec::new();
        for k in lo..=kmax {
            let h = hits[k - 1];
            if h < MIN_HITS {
                continue;
            }
            let ph = h as f64 / samples as f64;
            xs.push(k as f64);
            ys.push(-ph.ln());
            // delta-method variance of -log P-hat; a certain event carries
            // only binomial resolution
            let var = ((1.0 - ph) / (samples as f64 * ph)).max(1.0 / samples as f64);
            ws.push(1.0 / var);
        }
        (xs, ys, ws)
    };
    let (xs, ys, ws) = collect((kmax / 2).max(1));
    if xs.len() >= 2 {
        let (s, se, r) = wls_slope(&xs, &ys, &ws);
        return Some((s, se, false, r));
    }
    let (xs, ys, ws) = collect(1);
    if xs.len() >= 2 {
        let (s, se, r) = wls_slope(&xs, &ys, &ws);
        return Some((s, 2.0 * se, true, r));
    }
    None
}

/// Monte Carlo estimate of the inverse correlation length on `dirs` equally
/// spaced directions. Connection probabilities are estimated in the box of
/// half-width `2 kmax`.
pub fn estimate_xi(params: &RcParams, dirs: usize, kmax: u32, samples: u64, seed: u64) -> Result<XiTable> {
    if !params.is_subcritical() {
        let (pc, _) = critical_point(params.q);
        return Err(Error::input(format!("p = {} is not below p_c = {pc:.6}", params.p)));
    }
    if kmax < 8 {
        return Err(Error::input(format!("kmax must be at least 8, got {kmax}")));
    }
    if dirs == 0 || samples == 0 {
        return Err(Error::input("dirs and samples must be positive"));
    }
    let geom = BoxGeom::new(2 * kmax)?;
    let angles: Vec<f64> = (0..dirs).map(|j| 2.0 * PI * j as f64 / dirs as f64).collect();
    let tgt = targets(&angles, kmax);
    let chunks = samples.div_ceil(CHUNK);
    let base = StreamRng::new(seed, 0);
    let run = |c: u64| -> Result<Vec<u64>> {
        let n = CHUNK.min(samples - c * CHUNK);
        let mut hits = vec![0u64; dirs * kmax as usize];
        let mut rng = base.child(c);
        count_connections(params, geom, &tgt, n, &mut rng, &mut hits)?;
        Ok(hits)
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Vec<u64>>> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Vec<u64>>> = (0..chunks).map(run).collect();
    let mut hits = vec![0u64; dirs * kmax as usize];
    for part in parts {
        for (h, x) in hits.iter_mut().zip(part?) {
            *h += x;
        }
    }
    let k = kmax as usize;
    let mut table = XiTable {
        angles,
        xi: Vec::with_capacity(dirs),
        stderr: Vec::with_capacity(dirs),
        flagged: Vec::with_capacity(dirs),
        residual: Vec::with_capacity(dirs),
        meta: XiMeta { p: params.p, q: params.q, kmax, samples, seed, symmetrized: false },
    };
    for d in 0..dirs {
        let (xi, se, flag, res) = fit_direction(&hits[d * k..(d + 1) * k], samples).ok_or_else(|| {
            Error::Infeasible(format!(
                "direction {d}: fewer than two distances with observed connections; raise samples"
            ))
        })?;
        if !(xi > 0.0) {
            return Err(Error::Infeasible(format!("direction {d}: fitted xi = {xi} is not positive")));
        }
        table.xi.push(xi);
        table.stderr.push(se);
        table.flagged.push(flag);
        table.residual.push(res);
    }
    Ok(table)
}

/// Regeneration constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegenConstants {
    pub q0: f64,
    pub c0: f64,
}

/// Convex polygon of unit area with unit tangents at its vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WulffShape {
    /// Counterclockwise boundary.
    pub boundary: Vec<Vec2>,
    pub tangents: Vec<Vec2>,
    /// Scale applied to the half-plane intersection to reach unit area.
    pub lambda: f64,
    pub constants: Option<RegenConstants>,
}

fn polygon_area(p: &[Vec2]) -> f64 {
    let n = p.len();
    0.5 * (0..n).map(|i| cross2(p[i], p[(i + 1) % n])).sum::<f64>()
}

/// Keep the part of a convex polygon with `t . u <= h`.
fn clip(poly: &[Vec2], u: Vec2, h: f64) -> Vec<Vec2> {
    let f = |t: Vec2| t[0] * u[0] + t[1] * u[1] - h;
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (fa, fb) = (f(a), f(b));
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn normalize(v: Vec2) -> Vec2 {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

/// Resample a closed polygon at `count` points equally spaced in arc length.
pub fn resample_closed(poly: &[Vec2], count: usize) -> Vec<Vec2> {
    let n = poly.len();
    let lens: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
        })
        .collect();
    let total: f64 = lens.iter().sum();
    let mut out = Vec::with_capacity(count);
    let (mut i, mut acc) = (0usize, 0.0f64);
    for j in 0..count {
        let s = total * j as f64 / count as f64;
        while i + 1 < n && acc + lens[i] < s {
            acc += lens[i];
            i += 1;
        }
        let t = if lens[i] > 0.0 { ((s - acc) / lens[i]).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    out
}

/// Minimum number of boundary vertices of a built shape.
pub const MIN_VERTICES: usize = 256;

impl WulffShape {
    /// Shape from a closed convex polygon containing the origin: rescaled to
    /// unit area and densified.
    pub fn from_polygon(poly: Vec<Vec2>) -> Result<Self> {
        let area = polygon_area(&poly);
        if poly.len() < 3 || !(area > 1e-12) {
            return Err(Error::Infeasible("Wulff polygon has empty interior".into()));
        }
        let lambda = area.powf(-0.5);
        let scaled: Vec<Vec2> = poly.iter().map(|p| [p[0] * lambda, p[1] * lambda]).collect();
        let boundary = densify(&scaled, MIN_VERTICES);
        let n = boundary.len();
        let tangents = (0..n)
            .map(|i| {
                let (a, b) = (boundary[(i + n - 1) % n], boundary[(i + 1) % n]);
                normalize([b[0] - a[0], b[1] - a[1]])
            })
            .collect();
        Ok(WulffShape { boundary, tangents, lambda, constants: None })
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.boundary)
    }

    /// Convexity check by cross products around the boundary (collinear
    /// runs allowed).
    pub fn is_convex(&self) -> bool {
        let p = &self.boundary;
        let n = p.len();
        (0..n).all(|i| {
            let (a, b, c) = (p[i], p[(i + 1) % n], p[(i + 2) % n]);
            cross2([b[0] - a[0], b[1] - a[1]], [c[0] - b[0], c[1] - b[1]]) >= -1e-12
        })
    }

    pub fn contains_origin(&self) -> bool {
        let p = &self.boundary;
        let n = p.len();
        (0..n).all(|i| cross2(p[i], p[(i + 1) % n]) > 0.0)
    }

    /// Boundary point on the ray at angle `theta`, with the edge index and
    /// the position along it.
    pub fn ray_hit(&self, theta: f64) -> (Vec2, usize, f64) {
        let u = [theta.cos(), theta.sin()];
        let p = &self.boundary;
        let n = p.len();
        // vertex arguments increase counterclockwise from p[0]; binary search
        // for the last vertex at or before u
        let base = p[0][1].atan2(p[0][0]);
        let off = |v: Vec2| (v[1].atan2(v[0]) - base).rem_euclid(2.0 * PI);
        let target = off(u);
        let (mut lo, mut hi) = (0usize, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if off(p[mid]) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let i = lo;
        let (a, b) = (p[i], p[(i + 1) % n]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let den = cross2(u, d);
        let t = if den != 0.0 { (-cross2(u, a) / den).clamp(0.0, 1.0) } else { 0.0 };
        ([a[0] + t * d[0], a[1] + t * d[1]], i, t)
    }

    /// Unit tangent at the boundary point in direction `theta`,
    /// interpolated between vertex tangents.
    pub fn tangent_at(&self, theta: f64) -> (Vec2, Vec2) {
        let (z, i, t) = self.ray_hit(theta);
        let n = self.boundary.len();
        let (a, b) = (self.tangents[i], self.tangents[(i + 1) % n]);
        (z, normalize([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]))
    }

    /// `sup angle(w_z, z^perp)` over `m` equally spaced boundary directions.
    pub fn sup_tangent_angle(&self, m: usize) -> f64 {
        (0..m)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / m as f64;
                let (z, w) = self.tangent_at(th);
                angle_between(w, perp(z))
            })
            .fold(0.0, f64::max)
    }

    /// Whether `angle(x - y, -y^perp) <= pi/2 - 3 q0` for pairs of sampled
    /// boundary points with `arg x < arg y` within `2 c0`. Sweeps finer
    /// than [`SWEEP`] check every `y` against partners at the [`SWEEP`]
    /// spacing.
    pub fn czercond_holds(&self, q0: f64, c0: f64, m: usize) -> bool {
        let pts: Vec<Vec2> = (0..m).map(|j| self.ray_hit(2.0 * PI * j as f64 / m as f64).0).collect();
        let step = 2.0 * PI / m as f64;
        let span = (2.0 * c0 / step).floor() as usize;
        let bound = PI / 2.0 - 3.0 * q0;
        for i in 0..m {
            let x = pts[i];
            // chord partners at the coarse spacing, plus the nearest and the
            // farthest one at full resolution
            let span = span.min(m - 1);
            let stride = (m / SWEEP).max(1);
            let ks = (1..=span).step_by(stride).chain([1, span]).filter(|&k| k >= 1);
            for k in ks {
                let y = pts[(i + k) % m];
                let yp = perp(y);
                if angle_between([x[0] - y[0], x[1] - y[1]], [-yp[0], -yp[1]]) > bound {
                    return false;
                }
            }
        }
        true
    }

    /// `scale * boundary + shift`, resampled to `count` points.
    pub fn scaled_boundary(&self, scale: f64, count: usize) -> Vec<Vec2> {
        resample_closed(&self.boundary, count).into_iter().map(|p| [scale * p[0], scale * p[1]]).collect()
    }
}

/// Insert points along edges until there are at least `min` vertices.
fn densify(poly: &[Vec2], min: usize) -> Vec<Vec2> {
    if poly.len() >= min {
        return poly.to_vec();
    }
    let n = poly.len();
    let lens: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
        })
        .collect();
    let total: f64 = lens.iter().sum();
    let mut out = Vec::with_capacity(min + n);
    for i in 0..n {
        let pieces = ((lens[i] / total * min as f64).ceil() as usize).max(1);
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for s in 0..pieces {
            let t = s as f64 / pieces as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// `lambda * intersection over u of {t : (t, u) <= xi(u)}`, with `lambda`
/// giving unit area.
pub fn build_wulff(xi: &XiTable) -> Result<WulffShape> {
    if xi.dirs() < 3 {
        return Err(Error::input("need at least three directions"));
    }
    if let Some(j) = xi.xi.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::input(format!("xi must be positive, got {} in direction {j}", xi.xi[j])));
    }
    let r = 4.0 * xi.xi.iter().cloned().fold(0.0, f64::max);
    let mut poly = vec![[-r, -r], [r, -r], [r, r], [-r, r]];
    for j in 0..xi.dirs() {
        poly = clip(&poly, xi.direction(j), xi.xi[j]);
        if poly.len() < 3 {
            return Err(Error::Infeasible("half-plane intersection is empty".into()));
        }
    }
    // drop near-duplicate vertices produced by clipping through corners
    let mut clean: Vec<Vec2> = Vec::with_capacity(poly.len());
    for p in poly {
        if clean.last().is_none_or(|q: &Vec2| (q[0] - p[0]).hypot(q[1] - p[1]) > 1e-12) {
            clean.push(p);
        }
    }
    if clean.len() > 1 {
        let (f, l) = (clean[0], clean[clean.len() - 1]);
        if (f[0] - l[0]).hypot(f[1] - l[1]) <= 1e-12 {
            clean.pop();
        }
    }
    WulffShape::from_polygon(clean)
}

/// Sweep resolution used by [`choose_constants`].
pub const SWEEP: usize = 4096;

/// Pick `q0` from the tangent-angle bound and `q0 <= c1 / (2 C1)`, then the
/// largest `c0 = j q0 / 2048` (`j < 1024`) satisfying the chord condition.
/// Both are re-verified on a sweep ten times finer.
pub fn choose_constants(w: &WulffShape, c1: f64, big_c1: f64) -> Result<RegenConstants> {
    if !(c1 > 0.0 && c1 < big_c1) {
        return Err(Error::input(format!("need 0 < c1 < C1, got c1 = {c1}, C1 = {big_c1}")));
    }
    let grid = |x: f64| (x * 65536.0).floor() / 65536.0;
    let mut sup = w.sup_tangent_angle(SWEEP).max(w.sup_tangent_angle(10 * SWEEP));
    if sup >= PI / 2.0 {
        return Err(Error::Infeasible(format!("tangent-angle bound violated: sup angle {sup:.4} >= pi/2")));
    }
    sup = sup.max(0.0);
    let q0 = grid(((PI / 2.0 - sup) / 4.0).min(c1 / (2.0 * big_c1)));
    if !(q0 > 0.0) {
        return Err(Error::Infeasible("no positive q0 on the grid".into()));
    }
    let ok = |j: u32, m: usize| w.czercond_holds(q0, j as f64 * q0 / 2048.0, m);
    if !ok(1, SWEEP) {
        return Err(Error::Infeasible(format!("chord condition fails for every c0 at q0 = {q0}")));
    }
    let (mut lo, mut hi) = (1u32, 1023u32);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if ok(mid, SWEEP) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let mut j = lo;
    while j > 1 && !ok(j, 10 * SWEEP) {
        j -= 1;
    }
    if !ok(j, 10 * SWEEP) {
        return Err(Error::Infeasible("chord condition fails on the fine sweep".into()));
    }
    Ok(RegenConstants { q0, c0: j as f64 * q0 / 2048.0 })
}

/// Empirical annulus constants: the 0.5% and 99.5% quantiles of `|x| / n`
/// over the given circuit vertices.
pub fn estimate_annulus(points: &[Site], n: u32) -> Result<(f64, f64)> {
    if points.is_empty() {
        return Err(Error::input("no circuit vertices to estimate annulus constants from"));
    }
    let mut r: Vec<f64> = points.iter().map(|p| p.norm() / n as f64).collect();
    r.sort_by(f64::total_cmp);
    let q = |f: f64| r[((f * (r.len() - 1) as f64).round() as usize).min(r.len() - 1)];
    Ok((q(0.005), q(0.995)))
}

/// Default annulus constants for a disc-like shape.
pub const DEFAULT_ANNULUS: (f64, f64) = (0.4, 1.2);

/// Unit-area disc, approximated with [`MIN_VERTICES`] vertices.
pub fn disc() -> WulffShape {
    build_wulff(&XiTable::from_fn(MIN_VERTICES, |_| 1.0)).expect("disc is nondegenerate")
}

/// Exact probability that the origin's cluster reaches `target` in the box,
/// restricted to the edge set of `region`, by enumeration. For tests and
/// small oracles only.
pub fn exact_connection_probability(
    geom: BoxGeom,
    region: &crate::lattice::Region,
    p: f64,
    target: Site,
) -> Result<f64> {
    let edges: Vec<usize> = region.edges().collect();
    if edges.len() > 24 {
        return Err(Error::TooLarge { edges: edges.len(), limit: 24 });
    }
    let mut cfg = crate::lattice::BondConfig::closed(geom);
    let mut total = 0.0;
    for bits in 0u64..1 << edges.len() {
        for (k, &e) in edges.iter().enumerate() {
            cfg.set(e, bits >> k & 1 == 1);
        }
        if crate::lattice::connected(&cfg, Site::ORIGIN, target, region)? {
            let k = bits.count_ones() as i32;
            total += p.powi(k) * (1.0 - p).powi(edges.len() as i32 - k);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_shape() {
        let w = disc();
        assert!((w.area() - 1.0).abs() < 1e-6);
        assert!(w.is_convex());
        assert!(w.contains_origin());
        assert!(w.boundary.len() >= MIN_VERTICES);
        let r = (1.0 / PI).sqrt();
        for p in &w.boundary {
            let d = p[0].hypot(p[1]);
            assert!((d - r).abs() < 1e-3 * r);
        }
        assert!(w.sup_tangent_angle(1000) < 0.02);
    }

    #[test]
    fn l1_support_gives_square() {
        let w = build_wulff(&XiTable::from_fn(256, |u| u[0].abs() + u[1].abs())).unwrap();
        assert!((w.area() - 1.0).abs() < 1e-9);
        for p in &w.boundary {
            assert!(p[0].abs().max(p[1].abs()) - 0.5 < 1e-9);
            assert!(p[0].abs().max(p[1].abs()) - 0.5 > -1e-9);
        }
    }

    #[test]
    fn dilation_invariance() {
        let f = |u: Vec2| 1.0 + 0.3 * u[0].abs() + 0.1 * u[1] * u[1];
        let a = build_wulff(&XiTable::from_fn(64, f)).unwrap();
        let b = build_wulff(&XiTable::from_fn(64, |u| 7.5 * f(u))).unwrap();
        assert_eq!(a.boundary.len(), b.boundary.len());
        for (p, q) in a.boundary.iter().zip(&b.boundary) {
            assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn disc_constants() {
        let w = disc();
        let k = choose_constants(&w, 0.4, 1.2).unwrap();
        assert!((k.q0 - (PI / 8.0).min(0.4 / 2.4)).abs() < 1e-4);
        let k = choose_constants(&w, 0.9, 1.0).unwrap();
        assert!((k.q0 - PI / 8.0).abs() < 0.01);
        assert!(k.c0 > 0.0 && k.c0 < k.q0 / 2.0);
        assert!(w.czercond_holds(k.q0, k.c0, 10 * SWEEP));
        assert!(w.sup_tangent_angle(10 * SWEEP) <= PI / 2.0 - 4.0 * k.q0);
    }

    #[test]
    fn square_constants_smaller_than_disc() {
        let sq = build_wulff(&XiTable::from_fn(256, |u| u[0].abs() + u[1].abs())).unwrap();
        let ks = choose_constants(&sq, 0.9, 1.0).unwrap();
        let kd = choose_constants(&disc(), 0.9, 1.0).unwrap();
        assert!(ks.q0 < kd.q0);
        // side tangents near a corner meet the radial normal at 45 degrees
        assert!((sq.sup_tangent_angle(SWEEP) - PI / 4.0).abs() < 0.02);
    }

    #[test]
    fn constant_validation() {
        assert!(choose_constants(&disc(), 0.5, 0.4).is_err());
        assert!(build_wulff(&XiTable::from_fn(16, |_| -1.0)).is_err());
    }

    #[test]
    fn symmetrize_reduces_error() {
        let mut t = XiTable::from_fn(16, |_| 1.0);
        for j in 0..16 {
            t.xi[j] = 1.0 + 0.01 * j as f64;
            t.stderr[j] = 0.05 + 0.001 * j as f64;
        }
        let s = t.symmetrize().unwrap();
        for j in 0..16 {
            assert!(s.stderr[j] <= t.stderr[j]);
        }
        // orbit of direction 0 is {0, 4, 8, 12}
        assert!((s.xi[0] - s.xi[4]).abs() < 1e-15);
        assert!((s.xi[1] - s.xi[3]).abs() < 1e-15);
        assert!(XiTable::from_fn(12, |_| 1.0).symmetrize().is_err());
    }

    #[test]
    fn xi_refuses_supercritical() {
        let r = RcParams::new(0.6, 1.0, crate::model::Boundary::Free).unwrap();
        assert!(estimate_xi(&r, 8, 8, 10, 1).is_err());
        let r = RcParams::new(0.2, 1.0, crate::model::Boundary::Free).unwrap();
        assert!(estimate_xi(&r, 8, 4, 10, 1).is_err());
    }

    #[test]
    fn annulus_quantiles() {
        let pts: Vec<Site> = (1..=200).map(|i| Site::new(i, 0)).collect();
        let (lo, hi) = estimate_annulus(&pts, 100).unwrap();
        assert!(lo <= 0.03 && hi >= 1.98);
    }
}
