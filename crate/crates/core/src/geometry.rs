//! Planar geometry: points, analytic regions, pixel grids and exterior data.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    /// Angle in [0, 2pi).
    pub fn angle(self) -> f64 {
        normalize_angle(self.y.atan2(self.x))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Reduce an angle to [0, 2pi).
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub min: Point,
    pub max: Point,
}

impl BoxDomain {
    pub fn new(min: Point, max: Point) -> Self {
        BoxDomain { min, max }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        BoxDomain::new(Point::new(lo, lo), Point::new(hi, hi))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            self.min,
            Point::new(self.max.x, self.min.y),
            self.max,
            Point::new(self.min.x, self.max.y),
        ]
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn to_polygon(&self) -> AnalyticRegion {
        AnalyticRegion::Polygon { vertices: self.corners().to_vec() }
    }
}

/// Analytic planar sets used for the domain, exterior data and cones.
///
/// Boundaries are measure-zero; membership on a boundary follows the
/// conventions of [`AnalyticRegion::contains`] and never matters for the
/// integrals computed from these regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticRegion {
    /// `{x : x . normal > offset}`.
    HalfPlane { normal: Point, offset: f64 },
    /// Points whose angle seen from `vertex` lies in `[start_angle, end_angle)` mod 2pi.
    Sector { vertex: Point, start_angle: f64, end_angle: f64 },
    /// Simple polygon, counterclockwise. No vertices means the empty set.
    Polygon { vertices: Vec<Point> },
    /// Open disk.
    Disk { center: Point, radius: f64 },
    /// The whole plane.
    Plane,
    Complement { region: Box<AnalyticRegion> },
    Intersection { regions: Vec<AnalyticRegion> },
    Union { regions: Vec<AnalyticRegion> },
}

impl AnalyticRegion {
    pub fn half_plane(normal: Point, offset: f64) -> Self {
        AnalyticRegion::HalfPlane { normal, offset }
    }

    /// Sector with normalized start angle and the given opening.
    pub fn sector(vertex: Point, start_angle: f64, opening: f64) -> Self {
        let start = normalize_angle(start_angle);
        AnalyticRegion::Sector { vertex, start_angle: start, end_angle: start + opening }
    }

    pub fn disk(center: Point, radius: f64) -> Self {
        AnalyticRegion::Disk { center, radius }
    }

    pub fn empty() -> Self {
        AnalyticRegion::Polygon { vertices: vec![] }
    }

    pub fn complement(self) -> Self {
        AnalyticRegion::Complement { region: Box::new(self) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnalyticRegion::HalfPlane { normal, offset } => {
                if (normal.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "half-plane normal must be a unit vector, |n| = {}",
                        normal.norm()
                    )));
                }
                if !offset.is_finite() {
                    return Err(Error::InvalidParameter("half-plane offset must be finite".into()));
                }
            }
            AnalyticRegion::Sector { start_angle, end_angle, .. } => {
                let open = end_angle - start_angle;
                if !(open > 0.0 && open < TAU) {
                    return Err(Error::InvalidParameter(format!(
                        "sector opening must lie in (0, 2pi), got {open}"
                    )));
                }
            }
            AnalyticRegion::Polygon { vertices } => {
                if vertices.is_empty() {
                    return Ok(());
                }
                if vertices.len() < 3 {
                    return Err(Error::InvalidParameter("polygon needs at least 3 vertices".into()));
                }
                if signed_area(vertices) <= 0.0 {
                    return Err(Error::InvalidParameter("polygon must be counterclockwise".into()));
                }
                if !is_simple(vertices) {
                    return Err(Error::InvalidParameter("polygon is not simple".into()));
                }
            }
            AnalyticRegion::Disk { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidParameter("disk radius must be positive".into()));
                }
            }
            AnalyticRegion::Plane => {}
            AnalyticRegion::Complement { region } => region.validate()?,
            AnalyticRegion::Intersection { regions } | AnalyticRegion::Union { regions } => {
                for r in regions {
                    r.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            AnalyticRegion::HalfPlane { normal, offset } => p.dot(*normal) > *offset,
            AnalyticRegion::Sector { vertex, start_angle, end_angle } => {
                let v = p - *vertex;
                if v.x == 0.0 && v.y == 0.0 {
                    return false;
                }
                let rel = normalize_angle(v.angle() - start_angle);
                rel < end_angle - start_angle
            }
            AnalyticRegion::Polygon { vertices } => point_in_polygon(vertices, p),
            AnalyticRegion::Disk { center, radius } => p.dist(*center) < *radius,
            AnalyticRegion::Plane => true,
            AnalyticRegion::Complement { region } => !region.contains(p),
            AnalyticRegion::Intersection { regions } => regions.iter().all(|r| r.contains(p)),
            AnalyticRegion::Union { regions } => regions.iter().any(|r| r.contains(p)),
        }
    }

    /// Ray parameters `t > 0` at which `origin + t*dir` may cross the boundary.
    fn push_ray_breaks(&self, o: Point, d: Point, out: &mut Vec<f64>) {
        match self {
            AnalyticRegion::HalfPlane { normal, offset } => {
                let den = d.dot(*normal);
                if den != 0.0 {
                    let t = (offset - o.dot(*normal)) / den;
                    if t > 0.0 {
                        out.push(t);
                    }
                }
            }
            AnalyticRegion::Sector { vertex, start_angle, end_angle } => {
                for a in [*start_angle, *end_angle] {
                    let e = Point::polar(1.0, a);
                    // o + t d = vertex + u e
                    let den = d.cross(e);
                    if den != 0.0 {
                        let w = *vertex - o;
                        let t = w.cross(e) / den;
                        let u = w.cross(d) / den;
                        if t > 0.0 && u >= 0.0 {
                            out.push(t);
                        }
                    }
                }
            }
            AnalyticRegion::Polygon { vertices } => {
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = b - a;
                    let den = d.cross(e);
                    if den != 0.0 {
                        let w = a - o;
                        let t = w.cross(e) / den;
                        let u = w.cross(d) / den;
                        if t > 0.0 && (0.0..=1.0).contains(&u) {
                            out.push(t);
                        }
                    }
                }
            }
            AnalyticRegion::Disk { center, radius } => {
                let oc = o - *center;
                let b = d.dot(oc);
                let c = oc.dot(oc) - radius * radius;
                let disc = b * b - c;
                if disc > 0.0 {
                    let sq = disc.sqrt();
                    for t in [-b - sq, -b + sq] {
                        if t > 0.0 {
                            out.push(t);
                        }
                    }
                }
            }
            AnalyticRegion::Plane => {}
            AnalyticRegion::Complement { region } => region.push_ray_breaks(o, d, out),
            AnalyticRegion::Intersection { regions } | AnalyticRegion::Union { regions } => {
                for r in regions {
                    r.push_ray_breaks(o, d, out);
                }
            }
        }
    }

    /// Maximal parameter intervals `[lo, hi]` (with `hi` possibly infinite)
    /// along the ray `origin + t*dir`, `t >= 0`, that lie inside the region.
    /// `dir` must be a unit vector.
    pub fn ray_intervals(&self, origin: Point, dir: Point) -> Vec<(f64, f64)> {
        let mut breaks = Vec::with_capacity(8);
        self.push_ray_breaks(origin, dir, &mut breaks);
        intervals_from_breaks(&mut breaks, |t| self.contains(origin + dir * t))
    }

    /// Directions (angles in [0, 2pi)) seen from `x` across which the ray
    /// intervals change non-smoothly: toward vertices, tangent to disks, and
    /// parallel to unbounded boundary lines.
    pub fn angular_breaks(&self, x: Point, out: &mut Vec<f64>) {
        match self {
            AnalyticRegion::HalfPlane { normal, .. } => {
                let t = Point::new(-normal.y, normal.x);
                out.push(t.angle());
                out.push((-t).angle());
            }
            AnalyticRegion::Sector { vertex, start_angle, end_angle } => {
                let v = *vertex - x;
                if v.norm() > 0.0 {
                    out.push(v.angle());
                    out.push((-v).angle());
                }
                out.push(normalize_angle(*start_angle));
                out.push(normalize_angle(*end_angle));
            }
            AnalyticRegion::Polygon { vertices } => {
                for v in vertices {
                    let w = *v - x;
                    if w.norm() > 0.0 {
                        out.push(w.angle());
                    }
                }
            }
            AnalyticRegion::Disk { center, radius } => {
                let w = *center - x;
                let dd = w.norm();
                if dd >= *radius * (1.0 - 1e-12) {
                    let half = (radius / dd).min(1.0).asin();
                    out.push(normalize_angle(w.angle() - half));
                    out.push(normalize_angle(w.angle() + half));
                } else if dd > 0.0 {
                    out.push(w.angle());
                }
            }
            AnalyticRegion::Plane => {}
            AnalyticRegion::Complement { region } => region.angular_breaks(x, out),
            AnalyticRegion::Intersection { regions } | AnalyticRegion::Union { regions } => {
                for r in regions {
                    r.angular_breaks(x, out);
                }
            }
        }
    }

    /// True when the region is known to be empty (empty polygon, or a
    /// combination that reduces to one).
    pub fn is_trivially_empty(&self) -> bool {
        match self {
            AnalyticRegion::Polygon { vertices } => vertices.is_empty(),
            AnalyticRegion::Intersection { regions } => regions.iter().any(|r| r.is_trivially_empty()),
            AnalyticRegion::Union { regions } => regions.iter().all(|r| r.is_trivially_empty()),
            AnalyticRegion::Complement { region } => matches!(**region, AnalyticRegion::Plane),
            _ => false,
        }
    }
}

/// Turn boundary crossings into inside-intervals by probing each gap.
pub(crate) fn intervals_from_breaks<F: Fn(f64) -> bool>(breaks: &mut Vec<f64>, inside: F) -> Vec<(f64, f64)> {
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut lo = 0.0;
    for i in 0..=breaks.len() {
        let hi = if i < breaks.len() { breaks[i] } else { f64::INFINITY };
        let probe = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo + 1.0 };
        if inside(probe) {
            match out.last_mut() {
                Some(last) if last.1 == lo => last.1 = hi,
                _ => out.push((lo, hi)),
            }
        }
        lo = hi;
    }
    out
}

pub fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>() * 0.5
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = (p2 - p1).cross(q1 - p1);
    let d2 = (p2 - p1).cross(q2 - p1);
    let d3 = (q2 - q1).cross(p1 - q1);
    let d4 = (q2 - q1).cross(p2 - q1);
    ((d1 > 0.0) != (d2 > 0.0)) && ((d3 > 0.0) != (d4 > 0.0)) && d1 != 0.0 && d2 != 0.0
}

fn is_simple(v: &[Point]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

fn point_in_polygon(v: &[Point], p: Point) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < xc {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Uniform pixel grid over a box with a per-cell domain mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Point,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major (`j * nx + i`), true when the cell center lies in the domain.
    pub omega_mask: Vec<bool>,
}

impl Grid {
    pub fn center(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin.x + (i as f64 + 0.5) * self.h,
            self.origin.y + (j as f64 + 0.5) * self.h,
        )
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn bounds(&self) -> BoxDomain {
        BoxDomain::new(
            self.origin,
            Point::new(self.origin.x + self.nx as f64 * self.h, self.origin.y + self.ny as f64 * self.h),
        )
    }

    pub fn interior_count(&self) -> usize {
        self.omega_mask.iter().filter(|m| **m).count()
    }

    /// Cell coordinates `(i, j)` of the cells inside the domain, row-major.
    pub fn interior_cells(&self) -> Vec<(usize, usize)> {
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .filter(|&(i, j)| self.omega_mask[self.index(i, j)])
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || self.nx * self.ny == 0 || self.omega_mask.len() != self.nx * self.ny {
            return Err(Error::InvalidParameter("malformed grid".into()));
        }
        if self.interior_count() == 0 {
            return Err(Error::EmptyDomain);
        }
        Ok(())
    }

    /// Stable 64-bit fingerprint (FNV-1a) of the grid geometry and mask.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(&self.origin.x.to_le_bytes());
        feed(&self.origin.y.to_le_bytes());
        feed(&self.h.to_le_bytes());
        feed(&(self.nx as u64).to_le_bytes());
        feed(&(self.ny as u64).to_le_bytes());
        for m in &self.omega_mask {
            feed(&[*m as u8]);
        }
        h
    }
}

/// Discretize `domain` into `n` cells along x (square cells) and mark the
/// cells whose centers lie in `omega`.
pub fn build_grid(domain: BoxDomain, n: usize, omega: &AnalyticRegion) -> Result<Grid> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 cells per side, got {n}")));
    }
    if !(domain.width() > 0.0 && domain.height() > 0.0) {
        return Err(Error::InvalidParameter("box must have positive extent".into()));
    }
    omega.validate()?;
    let h = domain.width() / n as f64;
    let ny = ((domain.height() / h) - 1e-9).ceil().max(1.0) as usize;
    let mut grid = Grid { origin: domain.min, h, nx: n, ny, omega_mask: vec![false; n * ny] };
    for j in 0..ny {
        for i in 0..n {
            grid.omega_mask[j * n + i] = omega.contains(grid.center(i, j));
        }
    }
    if grid.interior_count() == 0 {
        return Err(Error::EmptyDomain);
    }
    Ok(grid)
}

/// Phases prescribed outside the domain; phase `i` occupies `phases[i]`
/// minus the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExteriorDatum {
    pub phases: Vec<AnalyticRegion>,
}

impl ExteriorDatum {
    pub fn new(phases: Vec<AnalyticRegion>) -> Self {
        ExteriorDatum { phases }
    }

    pub fn k(&self) -> usize {
        self.phases.len()
    }

    /// First phase whose region contains `p`.
    pub fn phase_at(&self, p: Point) -> Option<usize> {
        self.phases.iter().position(|r| r.contains(p))
    }

    /// Sample points outside the domain on the grid box and on rings around
    /// it; every sample must belong to exactly one phase.
    pub fn check_partition(&self, grid: &Grid, rings: usize) -> Result<()> {
        for r in &self.phases {
            r.validate()?;
        }
        let check = |p: Point| -> Result<()> {
            let hits = self.phases.iter().filter(|r| r.contains(p)).count();
            if hits != 1 {
                return Err(Error::ExteriorDatum(format!(
                    "point ({:.6}, {:.6}) lies in {hits} phases",
                    p.x, p.y
                )));
            }
            Ok(())
        };
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if !grid.omega_mask[grid.index(i, j)] {
                    check(grid.center(i, j))?;
                }
            }
        }
        let b = grid.bounds();
        let per_side = 4 * (grid.nx.max(grid.ny));
        for ring in 1..=rings {
            let pad = ring as f64 * grid.h * 1.37;
            let lo = b.min - Point::new(pad, pad);
            let w = b.width() + 2.0 * pad;
            let hgt = b.height() + 2.0 * pad;
            for k in 0..per_side {
                let t = (k as f64 + 0.5) / per_side as f64;
                check(lo + Point::new(t * w, 0.0))?;
                check(lo + Point::new(t * w, hgt))?;
                check(lo + Point::new(0.0, t * hgt))?;
                check(lo + Point::new(w, t * hgt))?;
            }
        }
        Ok(())
    }
}

/// Unit normals `n_i = (cos(2 pi i/3), sin(2 pi i/3))`, `i = 1, 2, 3`.
pub fn steiner_normals() -> [Point; 3] {
    [1, 2, 3].map(|i| Point::polar(1.0, TAU * i as f64 / 3.0))
}

/// Three 120-degree sectors with vertex at the origin, phase `i` bisected by
/// `n_{i+1}`. They partition the plane minus the origin.
pub fn steiner_exterior_datum() -> ExteriorDatum {
    let phases = steiner_normals()
        .iter()
        .map(|n| AnalyticRegion::sector(Point::new(0.0, 0.0), n.angle() - PI / 3.0, TAU / 3.0))
        .collect();
    ExteriorDatum::new(phases)
}

/// Half-planes `{x . n_i > 1/2}` with overlaps assigned to the phase of
/// largest `x . n_i`. The central triangle `{x . n_i <= 1/2 for all i}` is
/// left uncovered and must lie inside the domain.
pub fn steiner_halfplane_datum() -> ExteriorDatum {
    let sectors = steiner_exterior_datum();
    let phases = steiner_normals()
        .iter()
        .zip(sectors.phases)
        .map(|(n, sector)| AnalyticRegion::Intersection {
            regions: vec![AnalyticRegion::half_plane(*n, 0.5), sector],
        })
        .collect();
    ExteriorDatum::new(phases)
}
