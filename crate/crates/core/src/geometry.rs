//! Planar geometry on lattice points.
//!
//! Predicates that decide membership of lattice objects in sectors rooted at
//! the origin use exact integer arithmetic. Cones with irrational apertures
//! (regeneration cones, angular windows) are necessarily evaluated in `f64`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};

/// A point of the square lattice. Ordering is lexicographic in `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

impl Site {
    pub const ORIGIN: Site = Site { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        Site { x, y }
    }

    pub fn cross(self, other: Site) -> i64 {
        self.x as i64 * other.y as i64 - self.y as i64 * other.x as i64
    }

    pub fn dot(self, other: Site) -> i64 {
        self.x as i64 * other.x as i64 + self.y as i64 * other.y as i64
    }

    pub fn norm2(self) -> i64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        (self.norm2() as f64).sqrt()
    }

    pub fn to_f64(self) -> [f64; 2] {
        [self.x as f64, self.y as f64]
    }

    /// Argument in `(-pi, pi]`.
    pub fn arg(self) -> f64 {
        (self.y as f64).atan2(self.x as f64)
    }

    pub fn dist(self, other: Site) -> f64 {
        (self - other).norm()
    }

    pub fn is_neighbour(self, other: Site) -> bool {
        (self - other).norm2() == 1
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl std::str::FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut it = t.split(',').map(|v| v.trim().parse::<i32>());
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => Ok(Site::new(x, y)),
            _ => Err(Error::Parse(format!("expected `x,y`, got `{s}`"))),
        }
    }
}

impl Add for Site {
    type Output = Site;
    fn add(self, o: Site) -> Site {
        Site::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Site {
    type Output = Site;
    fn sub(self, o: Site) -> Site {
        Site::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        Site::new(-self.x, -self.y)
    }
}

pub type Vec2 = [f64; 2];

pub fn sub2(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn cross2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub fn norm2(a: Vec2) -> f64 {
    dot2(a, a).sqrt()
}

pub fn dist2(a: Vec2, b: Vec2) -> f64 {
    norm2(sub2(a, b))
}

/// Counterclockwise rotation by a quarter turn.
pub fn perp(a: Vec2) -> Vec2 {
    [-a[1], a[0]]
}

/// Unsigned angle in `[0, pi]` between two nonzero vectors.
pub fn angle_between(a: Vec2, b: Vec2) -> f64 {
    cross2(a, b).atan2(dot2(a, b)).abs()
}

/// Reduce an angle to `[0, 2pi)`.
pub fn wrap_tau(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = sub2(b, a);
    let len2 = dot2(ab, ab);
    if len2 == 0.0 {
        return dist2(p, a);
    }
    let t = (dot2(sub2(p, a), ab) / len2).clamp(0.0, 1.0);
    dist2(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Twice the signed area of a closed polygon.
pub fn shoelace2(pts: &[Site]) -> i64 {
    let n = pts.len();
    (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum()
}

/// Even-odd point-in-polygon test for a point in general position.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// The closed sector `A_{x,y}`: points whose argument runs counterclockwise
/// from `arg x` to `arg y`, together with the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    pub from: Site,
    pub to: Site,
}

/// Interval of a parameter `s in [0,1]` on which an affine function
/// `f0 + s (f1 - f0)` is strictly positive. Endpoints are rationals
/// `num/den` with `den > 0`.
#[derive(Debug, Clone, Copy)]
struct PosInterval {
    lo: (i64, i64),
    lo_open: bool,
    hi: (i64, i64),
    hi_open: bool,
    empty: bool,
}

impl PosInterval {
    fn of(f0: i64, f1: i64) -> Self {
        let full = PosInterval { lo: (0, 1), lo_open: false, hi: (1, 1), hi_open: false, empty: false };
        match (f0 > 0, f1 > 0) {
            (true, true) => full,
            (false, false) => PosInterval { empty: true, ..full },
            // zero crossing at s* = f0 / (f0 - f1)
            (true, false) => {
                let den = f0 - f1;
                PosInterval { hi: (f0, den), hi_open: true, ..full }
            }
            (false, true) => {
                let den = f1 - f0;
                PosInterval { lo: (-f0, den), lo_open: true, ..full }
            }
        }
    }

    fn intersects(&self, o: &PosInterval) -> bool {
        if self.empty || o.empty {
            return false;
        }
        // max(lo) vs min(hi)
        let cmp = |a: (i64, i64), b: (i64, i64)| (a.0 as i128 * b.1 as i128).cmp(&(b.0 as i128 * a.1 as i128));
        let (lo, lo_open) = match cmp(self.lo, o.lo) {
            std::cmp::Ordering::Greater => (self.lo, self.lo_open),
            std::cmp::Ordering::Less => (o.lo, o.lo_open),
            std::cmp::Ordering::Equal => (self.lo, self.lo_open || o.lo_open),
        };
        let (hi, hi_open) = match cmp(self.hi, o.hi) {
            std::cmp::Ordering::Less => (self.hi, self.hi_open),
            std::cmp::Ordering::Greater => (o.hi, o.hi_open),
            std::cmp::Ordering::Equal => (self.hi, self.hi_open || o.hi_open),
        };
        match cmp(lo, hi) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => !lo_open && !hi_open,
            std::cmp::Ordering::Greater => false,
        }
    }
}

impl Sector {
    pub fn new(from: Site, to: Site) -> Result<Self> {
        if from == Site::ORIGIN || to == Site::ORIGIN {
            return Err(Error::input("sector boundary points must be nonzero"));
        }
        if from.cross(to) == 0 && from.dot(to) > 0 {
            return Err(Error::input(format!("degenerate sector: {from} and {to} are parallel")));
        }
        Ok(Sector { from, to })
    }

    /// Whether the opening angle is at most pi.
    pub fn is_convex(&self) -> bool {
        let c = self.from.cross(self.to);
        c > 0 || (c == 0 && self.from.dot(self.to) < 0)
    }

    /// Opening angle in `(0, 2pi)`.
    pub fn opening(&self) -> f64 {
        let a = wrap_tau(self.to.arg() - self.from.arg());
        if a == 0.0 {
            2.0 * PI
        } else {
            a
        }
    }

    pub fn contains_point(&self, z: Site) -> bool {
        if z == Site::ORIGIN {
            return true;
        }
        if self.is_convex() {
            self.from.cross(z) >= 0 && z.cross(self.to) >= 0
        } else {
            !(self.to.cross(z) > 0 && z.cross(self.from) > 0)
        }
    }

    /// `[a, b] ⊆ A`.
    pub fn contains_segment(&self, a: Site, b: Site) -> bool {
        if self.is_convex() {
            self.contains_point(a) && self.contains_point(b)
        } else {
            !self.complement_meets_segment(a, b)
        }
    }

    /// `[a, b] ∩ A ≠ ∅`.
    pub fn touches_segment(&self, a: Site, b: Site) -> bool {
        if self.contains_point(a) || self.contains_point(b) {
            return true;
        }
        if self.is_convex() {
            segment_meets_ray(a, b, self.from) || segment_meets_ray(a, b, self.to)
        } else {
            // complement is an open convex cone containing both endpoints
            false
        }
    }

    /// Whether the open complementary cone (counterclockwise from `to` to
    /// `from`) meets `[a, b]`. Only meaningful for reflex sectors, whose
    /// complement is convex.
    fn complement_meets_segment(&self, a: Site, b: Site) -> bool {
        let f = PosInterval::of(self.to.cross(a), self.to.cross(b));
        let g = PosInterval::of(a.cross(self.from), b.cross(self.from));
        f.intersects(&g)
    }
}

/// Whether the closed segment `[a, b]` meets the closed ray `{t d : t >= 0}`.
pub fn segment_meets_ray(a: Site, b: Site, d: Site) -> bool {
    let ca = d.cross(a);
    let cb = d.cross(b);
    if (ca > 0 && cb > 0) || (ca < 0 && cb < 0) {
        return false;
    }
    if ca == 0 && cb == 0 {
        // collinear with the ray's line
        return d.dot(a) >= 0 || d.dot(b) >= 0;
    }
    // crossing point a + s (b - a), s = ca / (ca - cb); need d·p >= 0
    let den = ca - cb;
    let num_dot = d.dot(a) as i128 * den as i128 + ca as i128 * (d.dot(b) - d.dot(a)) as i128;
    if den > 0 {
        num_dot >= 0
    } else {
        num_dot <= 0
    }
}

/// Forward cone `C^F_alpha(v)`: `w` with `angle(w - v, v^perp) <= alpha`.
pub fn in_forward_cone(w: Vec2, v: Vec2, alpha: f64) -> bool {
    let d = sub2(w, v);
    if d == [0.0, 0.0] {
        return true;
    }
    angle_between(d, perp(v)) <= alpha
}

/// Backward cone `C^B_alpha(v)`: `w` with `angle(w - v, -v^perp) <= alpha`.
pub fn in_backward_cone(w: Vec2, v: Vec2, alpha: f64) -> bool {
    let d = sub2(w, v);
    if d == [0.0, 0.0] {
        return true;
    }
    let p = perp(v);
    angle_between(d, [-p[0], -p[1]]) <= alpha
}
