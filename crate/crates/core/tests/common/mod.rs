//! Brute-force oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::BTreeSet;

use droplab::lattice::PlanarGraph;
use droplab::{BondConfig, Site};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Open clusters by depth-first search; with `wired`, clusters touching the
/// boundary are not counted.
pub fn cluster_count(graph: &PlanarGraph, open: &[bool], wired: bool) -> usize {
    let mut adj = vec![Vec::new(); graph.n_vertices];
    for (i, &(a, b)) in graph.edges.iter().enumerate() {
        if open[i] {
            adj[a as usize].push(b as usize);
            adj[b as usize].push(a as usize);
        }
    }
    let mut seen = vec![false; graph.n_vertices];
    let mut count = 0;
    for s in 0..graph.n_vertices {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut touches = false;
        while let Some(v) = stack.pop() {
            touches |= graph.boundary[v];
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if !(wired && touches) {
            count += 1;
        }
    }
    count
}

pub fn bits_to_open(bits: u64, m: usize) -> Vec<bool> {
    (0..m).map(|e| bits >> e & 1 == 1).collect()
}

/// Normalized random-cluster law on every edge-state vector.
pub fn brute_distribution(graph: &PlanarGraph, p: f64, q: f64, wired: bool) -> Vec<f64> {
    let m = graph.edges.len();
    let w: Vec<f64> = (0..1u64 << m)
        .map(|bits| {
            let open = bits_to_open(bits, m);
            let o = open.iter().filter(|&&s| s).count() as i32;
            let k = cluster_count(graph, &open, wired) as i32;
            p.powi(o) * (1.0 - p).powi(m as i32 - o) * q.powi(k)
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rpow(x: &BigRational, k: usize) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, _| acc * x)
}

/// Unnormalized weight `p^o (1-p)^c q^k` in exact arithmetic.
pub fn rational_weight(
    graph: &PlanarGraph,
    open: &[bool],
    p: &BigRational,
    q: &BigRational,
    wired: bool,
) -> BigRational {
    let o = open.iter().filter(|&&s| s).count();
    let k = cluster_count(graph, open, wired);
    rpow(p, o) * rpow(&(BigRational::one() - p), open.len() - o) * rpow(q, k)
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Faces `(x, y)` (lower-left corners) enclosed by a closed lattice cycle,
/// by counting vertical cycle edges to the right of each face centre.
pub fn enclosed_faces(cycle: &[Site]) -> BTreeSet<(i32, i32)> {
    let n = cycle.len();
    let verticals: Vec<(i32, i32)> = (0..n)
        .filter_map(|i| {
            let (a, b) = (cycle[i], cycle[(i + 1) % n]);
            (a.x == b.x).then(|| (a.x, a.y.min(b.y)))
        })
        .collect();
    let (xmin, xmax) = (cycle.iter().map(|v| v.x).min().unwrap(), cycle.iter().map(|v| v.x).max().unwrap());
    let (ymin, ymax) = (cycle.iter().map(|v| v.y).min().unwrap(), cycle.iter().map(|v| v.y).max().unwrap());
    let mut out = BTreeSet::new();
    for fx in xmin..xmax {
        for fy in ymin..ymax {
            let crossings = verticals.iter().filter(|&&(x, y)| y == fy && x > fx).count();
            if crossings % 2 == 1 {
                out.insert((fx, fy));
            }
        }
    }
    out
}

/// Every simple cycle of the open subgraph, each listed once.
pub fn simple_cycles(cfg: &BondConfig) -> Vec<Vec<Site>> {
    let geom = cfg.geom();
    let nv = geom.vertex_count();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for e in cfg.open_edges() {
        let (a, b) = geom.endpoints(e);
        let (a, b) = (geom.vertex_index(a), geom.vertex_index(b));
        adj[a].push(b);
        adj[b].push(a);
    }
    // strip vertices of degree < 2 repeatedly
    let mut alive = vec![true; nv];
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut stack: Vec<usize> = (0..nv).filter(|&v| deg[v] < 2).collect();
    while let Some(v) = stack.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &w in &adj[v] {
            if alive[w] {
                deg[w] -= 1;
                if deg[w] < 2 {
                    stack.push(w);
                }
            }
        }
    }
    fn dfs(
        adj: &[Vec<usize>],
        alive: &[bool],
        s: usize,
        v: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        out: &mut Vec<Vec<usize>>,
    ) {
        for &w in &adj[v] {
            if w == s && path.len() >= 4 && path[1] < path[path.len() - 1] {
                out.push(path.clone());
            } else if w > s && alive[w] && !on_path[w] {
                on_path[w] = true;
                path.push(w);
                dfs(adj, alive, s, w, path, on_path, out);
                path.pop();
                on_path[w] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; nv];
    for s in (0..nv).filter(|&s| alive[s]) {
        let mut path = vec![s];
        on_path[s] = true;
        dfs(&adj, &alive, s, s, &mut path, &mut on_path, &mut out);
        on_path[s] = false;
    }
    out.into_iter().map(|c| c.into_iter().map(|i| geom.vertex(i)).collect()).collect()
}

type Cycle = (Vec<Site>, BTreeSet<(i32, i32)>);

/// Outermost open cycle around the origin found by exhaustive search:
/// sorted vertex set and enclosed area. Panics if the enclosing cycles have
/// no common outermost member.
pub fn outermost_oracle(cfg: &BondConfig) -> Option<(Vec<Site>, usize)> {
    let around: Vec<Cycle> = simple_cycles(cfg)
        .into_iter()
        .filter(|c| !c.contains(&Site::ORIGIN))
        .map(|c| {
            let faces = enclosed_faces(&c);
            (c, faces)
        })
        .filter(|(_, f)| f.contains(&(0, 0)))
        .collect();
    let (best, faces) = around.iter().max_by_key(|(_, f)| f.len())?;
    for (_, other) in &around {
        assert!(other.is_subset(faces), "enclosing cycles have no outermost member");
    }
    let mut verts = best.clone();
    verts.sort();
    Some((verts, faces.len()))
}

/// Whether the ray from the origin through `v` meets the closed polygon only
/// at `v`, in exact integer arithmetic.
pub fn is_cutpoint_oracle(cycle: &[Site], v: Site) -> bool {
    let n = cycle.len();
    for i in 0..n {
        let (a, b) = (cycle[i], cycle[(i + 1) % n]);
        let d = b - a;
        let (ca, cb) = (v.cross(a), v.cross(b));
        if ca == 0 && cb == 0 {
            // collinear with the ray's line: meets the ray beyond v or between 0 and v
            let on_ray = |p: Site| p.dot(v) >= 0;
            if (on_ray(a) && a != v) || (on_ray(b) && b != v) || (a.dot(v) < 0) != (b.dot(v) < 0) {
                return false;
            }
            continue;
        }
        // a + s d on the line through v: cross(v, a) + s cross(v, d) = 0
        let den = v.cross(d);
        if den == 0 {
            continue;
        }
        let num = -ca;
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        if num < 0 || num > den {
            continue;
        }
        // point a + (num/den) d, scaled by den
        let px = a.x as i64 * den + num * d.x as i64;
        let py = a.y as i64 * den + num * d.y as i64;
        if px * (v.x as i64) + py * (v.y as i64) < 0 {
            continue;
        }
        if px == v.x as i64 * den && py == v.y as i64 * den {
            continue;
        }
        return false;
    }
    true
}

pub fn is_zero(x: &BigRational) -> bool {
    x.is_zero()
}

/// Winding number of a closed polygon around a point off its boundary.
pub fn winding_number(pt: [f64; 2], poly: &[[f64; 2]]) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let side = (b[0] - a[0]) * (pt[1] - a[1]) - (pt[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= pt[1] {
            if b[1] > pt[1] && side > 0.0 {
                w += 1;
            }
        } else if b[1] <= pt[1] && side < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Open every edge with both endpoints in the closed disc of radius `r`.
pub fn lattice_disc_config(r: f64) -> BondConfig {
    let geom = droplab::BoxGeom::new(r.ceil() as u32 + 2).unwrap();
    let states = geom
        .edges()
        .map(|e| {
            let (a, b) = geom.endpoints(e);
            a.norm() <= r && b.norm() <= r
        })
        .collect();
    BondConfig::from_states(geom, states).unwrap()
}

/// Outcome of checking the cutpoint decomposition for one pair.
pub fn cutpoint_decomposition_holds(c: &droplab::circuit::Circuit, v1: Site, v2: Site) -> Result<(), String> {
    let (p1, p2) = droplab::circuit::cutpoint_pieces(c, v1, v2).map_err(|e| e.to_string())?;
    let f = |poly: &[Site]| poly.iter().map(|v| [v.x as f64, v.y as f64]).collect::<Vec<_>>();
    let (gamma, a, b) = (f(c.vertices()), f(&p1), f(&p2));
    let vs = c.vertices();
    let (xmin, xmax) = (vs.iter().map(|v| v.x).min().unwrap(), vs.iter().map(|v| v.x).max().unwrap());
    let (ymin, ymax) = (vs.iter().map(|v| v.y).min().unwrap(), vs.iter().map(|v| v.y).max().unwrap());
    // face centres nudged off every rational direction through the origin
    let (dx, dy) = (0.5 + 1e-3 * std::f64::consts::PI, 0.5 - 1e-3 * std::f64::consts::E);
    for x in xmin..xmax {
        for y in ymin..ymax {
            let pt = [x as f64 + dx, y as f64 + dy];
            let (w, w1, w2) = (winding_number(pt, &gamma), winding_number(pt, &a), winding_number(pt, &b));
            if !(0..=1).contains(&w1) || !(0..=1).contains(&w2) || w != w1 + w2 {
                return Err(format!("face ({x},{y}): circuit {w}, pieces {w1} + {w2}"));
            }
        }
    }
    Ok(())
}

/// Area enclosed by the outermost open circuit around the origin: faces not
/// reachable from outside the box through closed edges and joined to the
/// origin's faces. Zero when some face at the origin is reachable.
pub fn oracle_enclosed_area(cfg: &BondConfig) -> usize {
    let l = cfg.geom().half_width();
    let side = (2 * l) as usize;
    let idx = |x: i32, y: i32| ((x + l) as usize) * side + (y + l) as usize;
    let inside = |x: i32, y: i32| x >= -l && x < l && y >= -l && y < l;
    // the edge shared by face (x, y) and its neighbour in direction (dx, dy)
    let wall = |x: i32, y: i32, dx: i32, dy: i32| -> bool {
        let (a, b) = match (dx, dy) {
            (1, 0) => (Site::new(x + 1, y), Site::new(x + 1, y + 1)),
            (-1, 0) => (Site::new(x, y), Site::new(x, y + 1)),
            (0, 1) => (Site::new(x, y + 1), Site::new(x + 1, y + 1)),
            _ => (Site::new(x, y), Site::new(x + 1, y)),
        };
        cfg.is_open_between(a, b)
    };
    let dirs = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    let mut reached = vec![false; side * side];
    let mut stack = Vec::new();
    for x in -l..l {
        for y in -l..l {
            let on_rim = dirs.iter().any(|&(dx, dy)| !inside(x + dx, y + dy) && !wall(x, y, dx, dy));
            if on_rim {
                reached[idx(x, y)] = true;
                stack.push((x, y));
            }
        }
    }
    while let Some((x, y)) = stack.pop() {
        for &(dx, dy) in &dirs {
            let (u, v) = (x + dx, y + dy);
            if inside(u, v) && !reached[idx(u, v)] && !wall(x, y, dx, dy) {
                reached[idx(u, v)] = true;
                stack.push((u, v));
            }
        }
    }
    if [(-1, -1), (0, -1), (-1, 0), (0, 0)].iter().any(|&(x, y)| reached[idx(x, y)]) {
        return 0;
    }
    let mut lobe = vec![false; side * side];
    lobe[idx(0, 0)] = true;
    let mut stack = vec![(0, 0)];
    let mut area = 1;
    while let Some((x, y)) = stack.pop() {
        for &(dx, dy) in &dirs {
            let (u, v) = (x + dx, y + dy);
            if inside(u, v) && !reached[idx(u, v)] && !lobe[idx(u, v)] {
                lobe[idx(u, v)] = true;
                area += 1;
                stack.push((u, v));
            }
        }
    }
    area
}

/// A half-width 5 box with 20 free edges around the origin and every other
/// edge frozen at a Bernoulli(0.6) draw; the free edges start with the
/// side-2 square around the origin open.
pub fn reduced_instance(seed: u64) -> (BondConfig, Vec<droplab::EdgeId>) {
    use rand::Rng;
    let geom = droplab::BoxGeom::new(5).unwrap();
    let mut rng = droplab::StreamRng::new(seed, 0);
    let mut cfg = BondConfig::closed(geom);
    for e in geom.edges() {
        cfg.set(e, rng.random::<f64>() < 0.6);
    }
    let s = |x, y| Site::new(x, y);
    let mut active: Vec<droplab::EdgeId> = geom
        .edges()
        .filter(|&e| {
            let (a, b) = geom.endpoints(e);
            a.x.abs().max(a.y.abs()) <= 1 && b.x.abs().max(b.y.abs()) <= 1
        })
        .collect();
    for (a, b) in [
        (s(1, 0), s(2, 0)),
        (s(-1, 0), s(-2, 0)),
        (s(0, 1), s(0, 2)),
        (s(0, -1), s(0, -2)),
        (s(1, 1), s(2, 1)),
        (s(-1, -1), s(-2, -1)),
        (s(1, -1), s(1, -2)),
        (s(-1, 1), s(-1, 2)),
    ] {
        active.push(geom.edge_between(a, b).unwrap());
    }
    for e in &active {
        let (a, b) = geom.endpoints(*e);
        let ring = |v: Site| v.x.abs().max(v.y.abs()) == 1;
        cfg.set(*e, ring(a) && ring(b));
    }
    (cfg, active)
}

/// Exact law of the enclosed area given `area >= min_area` at `q = 1`, with
/// only `active` edges random.
pub fn exact_conditional_area(
    start: &BondConfig,
    active: &[droplab::EdgeId],
    p: f64,
    min_area: usize,
) -> Vec<(usize, f64)> {
    let mut cfg = start.clone();
    let mut law = std::collections::BTreeMap::new();
    let mut z = 0.0;
    for bits in 0..1u64 << active.len() {
        for (i, &e) in active.iter().enumerate() {
            cfg.set(e, bits >> i & 1 == 1);
        }
        let area = oracle_enclosed_area(&cfg);
        if area >= min_area {
            let o = bits.count_ones() as i32;
            let w = p.powi(o) * (1.0 - p).powi(active.len() as i32 - o);
            *law.entry(area).or_insert(0.0) += w;
            z += w;
        }
    }
    law.into_iter().map(|(a, w)| (a, w / z)).collect()
}

/// Mean and batch-means standard error of a correlated series.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let len = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| xs[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (xs.iter().sum::<f64>() / xs.len() as f64, (var / batches as f64).sqrt())
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
