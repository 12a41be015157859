//! Per-sample droplet statistics: roughness, facets, area excess, global
//! distortion and regeneration structure.

use serde::{Deserialize, Serialize};

use crate::circuit::{
    facet_facing, hull_and_facets, interior_area, max_facet_length, max_local_roughness, mprg, outermost_circuit,
    regeneration_sites, theta_rg_max, Circuit,
};
use crate::error::{Error, Result};
use crate::geometry::{Site, Vec2};
use crate::lattice::BondConfig;
use crate::wulff::WulffShape;

/// Uniform bucket grid for nearest-neighbour distance queries.
struct PointGrid {
    pts: Vec<Vec2>,
    origin: Vec2,
    cell: f64,
    nx: i64,
    ny: i64,
    start: Vec<usize>,
    order: Vec<usize>,
}

impl PointGrid {
    fn new(pts: Vec<Vec2>, cell: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &pts {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let nx = ((hi[0] - lo[0]) / cell).floor() as i64 + 1;
        let ny = ((hi[1] - lo[1]) / cell).floor() as i64 + 1;
        let key = |p: &Vec2| {
            let i = ((p[0] - lo[0]) / cell).floor() as i64;
            let j = ((p[1] - lo[1]) / cell).floor() as i64;
            (i.clamp(0, nx - 1) * ny + j.clamp(0, ny - 1)) as usize
        };
        let mut counts = vec![0usize; (nx * ny) as usize + 1];
        for p in &pts {
            counts[key(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; pts.len()];
        for (idx, p) in pts.iter().enumerate() {
            let k = key(p);
            order[fill[k]] = idx;
            fill[k] += 1;
        }
        PointGrid { pts, origin: lo, cell, nx, ny, start: counts, order }
    }

    /// Distance from `q` to the nearest stored point.
    fn nearest(&self, q: Vec2) -> f64 {
        let ci = ((q[0] - self.origin[0]) / self.cell).floor() as i64;
        let cj = ((q[1] - self.origin[1]) / self.cell).floor() as i64;
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            for i in (ci - ring).max(0)..=(ci + ring).min(self.nx - 1) {
                for j in (cj - ring).max(0)..=(cj + ring).min(self.ny - 1) {
                    if (i - ci).abs() != ring && (j - cj).abs() != ring {
                        continue;
                    }
                    let k = (i * self.ny + j) as usize;
                    for &idx in &self.order[self.start[k]..self.start[k + 1]] {
                        let p = self.pts[idx];
                        best = best.min((p[0] - q[0]).hypot(p[1] - q[1]));
                    }
                }
            }
            // every unvisited cell is at least `ring * cell` away
            if best <= ring as f64 * self.cell {
                return best;
            }
            if ci - ring <= 0 && cj - ring <= 0 && ci + ring >= self.nx - 1 && cj + ring >= self.ny - 1 {
                return best;
            }
            ring += 1;
        }
    }
}

/// Circuit as a point set: vertices and edge midpoints.
pub fn circuit_points(c: &Circuit) -> Vec<Vec2> {
    c.edges().flat_map(|(a, b)| [a.to_f64(), [(a.x + b.x) as f64 / 2.0, (a.y + b.y) as f64 / 2.0]]).collect()
}

/// Number of points on the discretized `n dW`.
pub fn wulff_resolution(n: u32) -> usize {
    256.max(16 * n as usize)
}

/// Hausdorff distance between the circuit points and `n dW + z`, or any
/// value above `cap` once it is certain to exceed `cap`.
fn hausdorff(cg: &PointGrid, wg: &PointGrid, z: Vec2, cap: f64) -> f64 {
    let mut h = 0.0f64;
    for &s in &cg.pts {
        h = h.max(wg.nearest([s[0] - z[0], s[1] - z[1]]));
        if h > cap {
            return h;
        }
    }
    for &w in &wg.pts {
        h = h.max(cg.nearest([w[0] + z[0], w[1] + z[1]]));
        if h > cap {
            return h;
        }
    }
    h
}

/// Global distortion and centre: the best lattice translate of the
/// `n`-dilated Wulff boundary in Hausdorff distance, ties broken
/// lexicographically.
pub fn gd_and_center(c: &Circuit, wulff: &WulffShape, n: u32) -> (f64, Site) {
    let cpts = circuit_points(c);
    let wpts = wulff.scaled_boundary(n as f64, wulff_resolution(n));
    let cg = PointGrid::new(cpts, 2.0);
    let wg = PointGrid::new(wpts, 2.0);
    let k = c.len() as f64;
    let (sx, sy) = c.vertices().iter().fold((0.0, 0.0), |(x, y), v| (x + v.x as f64, y + v.y as f64));
    let z0 = Site::new((sx / k).round() as i32, (sy / k).round() as i32);
    let gd0 = hausdorff(&cg, &wg, z0.to_f64(), f64::INFINITY);
    let mut best = (gd0, z0);
    let r = (2.0 * gd0).floor() as i32 + 1;
    let r2 = 4.0 * gd0 * gd0;
    for dx in -r..=r {
        for dy in -r..=r {
            if ((dx * dx + dy * dy) as f64) > r2 {
                continue;
            }
            let z = Site::new(z0.x + dx, z0.y + dy);
            let h = hausdorff(&cg, &wg, z.to_f64(), best.0);
            if h < best.0 || (h == best.0 && z < best.1) {
                best = (h, z);
            }
        }
    }
    best
}

/// One row of droplet measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropletStats {
    pub n: u32,
    pub area: u64,
    pub exc: i64,
    pub mlr: f64,
    pub mfl: f64,
    pub mlrf: f64,
    pub gd: f64,
    pub cen_x: i32,
    pub cen_y: i32,
    pub theta_rg_max: f64,
    pub mprg: f64,
    pub rg_count: usize,
    pub x_mlr_x: i32,
    pub x_mlr_y: i32,
    /// Circuit vertices strictly inside the hull.
    pub off_hull: usize,
    pub circuit_len: usize,
    /// Largest distance from the origin to a circuit vertex.
    pub radius: f64,
    pub seed: u64,
    pub stream: u64,
    pub sample: u64,
}

/// CSV column order of [`DropletStats`].
pub const COLUMNS: [&str; 20] = [
    "n",
    "area",
    "exc",
    "mlr",
    "mfl",
    "mlrf",
    "gd",
    "cen_x",
    "cen_y",
    "theta_rg_max",
    "mprg",
    "rg_count",
    "x_mlr_x",
    "x_mlr_y",
    "off_hull",
    "circuit_len",
    "radius",
    "seed",
    "stream",
    "sample",
];

impl DropletStats {
    /// Row-level consistency: area excess, facet ordering, and zero
    /// roughness exactly when every vertex is on the hull.
    pub fn validate(&self) -> Result<()> {
        let n2 = self.n as i64 * self.n as i64;
        if self.area as i64 >= n2 && self.exc != self.area as i64 - n2 {
            return Err(Error::Invariant(format!("exc {} != area {} - n^2", self.exc, self.area)));
        }
        if self.mlrf > self.mfl {
            return Err(Error::Invariant(format!("mlrf {} > mfl {}", self.mlrf, self.mfl)));
        }
        if (self.mlr == 0.0) != (self.off_hull == 0) {
            return Err(Error::Invariant(format!("mlr {} with {} off-hull vertices", self.mlr, self.off_hull)));
        }
        Ok(())
    }
}

/// Provenance attached to a measured sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleTag {
    pub seed: u64,
    pub stream: u64,
    pub sample: u64,
}

/// Statistics of a given circuit.
pub fn circuit_stats(c: &Circuit, n: u32, wulff: &WulffShape, tag: SampleTag) -> Result<DropletStats> {
    let k = wulff.constants.ok_or_else(|| Error::input("Wulff shape carries no regeneration constants"))?;
    let hull = hull_and_facets(c);
    let (mlr, x_mlr) = max_local_roughness(c, &hull);
    let (a, b) = facet_facing(&hull, x_mlr);
    let rg = regeneration_sites(c, k.q0, k.c0)?;
    let (gd, cen) = gd_and_center(c, wulff, n);
    let area = interior_area(c);
    let off_hull = c.vertices().iter().filter(|&&v| !hull.on_boundary(v)).count();
    Ok(DropletStats {
        n,
        area,
        exc: area as i64 - n as i64 * n as i64,
        mlr,
        mfl: max_facet_length(&hull),
        mlrf: a.dist(b),
        gd,
        cen_x: cen.x,
        cen_y: cen.y,
        theta_rg_max: theta_rg_max(&rg),
        mprg: mprg(c, &rg),
        rg_count: rg.len(),
        x_mlr_x: x_mlr.x,
        x_mlr_y: x_mlr.y,
        off_hull,
        circuit_len: c.len(),
        radius: c.vertices().iter().map(|v| v.norm()).fold(0.0, f64::max),
        seed: tag.seed,
        stream: tag.stream,
        sample: tag.sample,
    })
}

/// Statistics of the outermost circuit of `cfg`.
pub fn droplet_stats(cfg: &BondConfig, n: u32, wulff: &WulffShape, tag: SampleTag) -> Result<DropletStats> {
    let c = outermost_circuit(cfg).ok_or(Error::NoCircuit)?;
    circuit_stats(&c, n, wulff, tag)
}

/// Write rows with a single header line.
pub fn write_csv<W: std::io::Write>(out: W, rows: &[DropletStats]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<DropletStats>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header != COLUMNS {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
