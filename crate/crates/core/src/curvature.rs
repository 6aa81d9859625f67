//! Fractional curvature
//!
//! ```text
//! H_s(x, E) = PV int (chi_{E^c}(y) - chi_E(y)) |x - y|^{-(2+s)} dy
//! ```
//!
//! evaluated in polar coordinates about `x` with a ball of radius `eps`
//! excised. Along each ray the signed radial integral is exact; the angular
//! integral is adaptive with breaks at every direction where the ray
//! intervals change. Excision radii `eps, eps/2, eps/4` are combined by
//! Richardson extrapolation with the leading exponent `1 - s` of a curved
//! boundary; for locally straight boundaries all three values coincide.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::energy::Cluster;
use crate::error::{Error, Result};
use crate::geometry::{intervals_from_breaks, normalize_angle, AnalyticRegion, Point};
use crate::kernel::FractionalParameter;
use crate::quad::integrate_piecewise;

#[derive(Debug, Clone, Copy)]
pub enum CurvatureTarget<'a> {
    Region(&'a AnalyticRegion),
    Phase { cluster: &'a Cluster, phase: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct CurvatureQuery<'a> {
    pub x: Point,
    pub target: CurvatureTarget<'a>,
    /// Largest excision radius; `None` picks `1e-2` for regions and `h/4` for grid phases.
    pub eps: Option<f64>,
    pub r_cut: Option<f64>,
    /// Accepted disagreement between the two extrapolated values.
    pub tol: f64,
}

impl<'a> CurvatureQuery<'a> {
    pub fn region(x: Point, e: &'a AnalyticRegion) -> Self {
        CurvatureQuery { x, target: CurvatureTarget::Region(e), eps: None, r_cut: None, tol: 1e-6 }
    }

    pub fn phase(x: Point, cluster: &'a Cluster, phase: usize) -> Self {
        CurvatureQuery { x, target: CurvatureTarget::Phase { cluster, phase }, eps: None, r_cut: None, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Curvature {
    pub value: f64,
    pub error: f64,
    /// Point the excision ball was centered at.
    pub center: Point,
}

/// Membership test plus ray geometry for a set.
trait RaySet {
    fn contains(&self, p: Point) -> bool;
    fn ray_intervals(&self, o: Point, d: Point) -> Vec<(f64, f64)>;
    fn angular_breaks(&self, x: Point, out: &mut Vec<f64>);
}

impl RaySet for AnalyticRegion {
    fn contains(&self, p: Point) -> bool {
        AnalyticRegion::contains(self, p)
    }
    fn ray_intervals(&self, o: Point, d: Point) -> Vec<(f64, f64)> {
        AnalyticRegion::ray_intervals(self, o, d)
    }
    fn angular_breaks(&self, x: Point, out: &mut Vec<f64>) {
        AnalyticRegion::angular_breaks(self, x, out)
    }
}

/// One phase of a cluster: labeled cells inside the grid box, the analytic
/// exterior phase outside it.
struct GridPhase<'a> {
    cl: &'a Cluster,
    full: Vec<Option<usize>>,
    phase: usize,
    /// Directions are taken to interface corners within this radius.
    near: f64,
}

impl<'a> GridPhase<'a> {
    fn new(cl: &'a Cluster, phase: usize) -> Self {
        GridPhase { cl, full: cl.full_labels(), phase, near: 8.0 * cl.grid.h }
    }

    fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let g = &self.cl.grid;
        let fx = (p.x - g.origin.x) / g.h;
        let fy = (p.y - g.origin.y) / g.h;
        if fx < 0.0 || fy < 0.0 || fx >= g.nx as f64 || fy >= g.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    fn in_cell(&self, i: usize, j: usize) -> bool {
        self.full[self.cl.grid.index(i, j)] == Some(self.phase)
    }

    /// Midpoints of grid edges separating the phase from the rest.
    fn interface_edges(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> Vec<Point> {
        let g = &self.cl.grid;
        let mut out = Vec::new();
        for j in j0..=j1.min(g.ny - 1) {
            for i in i0..=i1.min(g.nx - 1) {
                let c = g.center(i, j);
                let here = self.in_cell(i, j);
                if i + 1 < g.nx && here != self.in_cell(i + 1, j) {
                    out.push(Point::new(c.x + 0.5 * g.h, c.y));
                }
                if j + 1 < g.ny && here != self.in_cell(i, j + 1) {
                    out.push(Point::new(c.x, c.y + 0.5 * g.h));
                }
            }
        }
        out
    }
}

impl RaySet for GridPhase<'_> {
    fn contains(&self, p: Point) -> bool {
        match self.cell_of(p) {
            Some((i, j)) => self.in_cell(i, j),
            None => self.cl.ext.phases[self.phase].contains(p),
        }
    }

    fn ray_intervals(&self, o: Point, d: Point) -> Vec<(f64, f64)> {
        let g = &self.cl.grid;
        let b = g.bounds();
        let mut breaks = Vec::new();
        self.cl.ext.phases[self.phase].ray_intervals(o, d).iter().for_each(|&(lo, hi)| {
            breaks.push(lo);
            if hi.is_finite() {
                breaks.push(hi);
            }
        });
        // grid lines crossed inside the box
        let mut axis = |o: f64, d: f64, lo: f64, n: usize| {
            if d.abs() < 1e-300 {
                return;
            }
            for k in 0..=n {
                let t = (lo + k as f64 * g.h - o) / d;
                if t > 0.0 {
                    breaks.push(t);
                }
            }
        };
        axis(o.x, d.x, b.min.x, g.nx);
        axis(o.y, d.y, b.min.y, g.ny);
        intervals_from_breaks(&mut breaks, |t| self.contains(o + d * t))
    }

    fn angular_breaks(&self, x: Point, out: &mut Vec<f64>) {
        let g = &self.cl.grid;
        self.cl.ext.phases[self.phase].angular_breaks(x, out);
        for c in g.bounds().corners() {
            out.push((c - x).angle());
        }
        let fi = ((x.x - g.origin.x) / g.h).floor() as i64;
        let fj = ((x.y - g.origin.y) / g.h).floor() as i64;
        let r = (self.near / g.h).ceil() as i64;
        for j in (fj - r).max(0)..=(fj + r + 1).min(g.ny as i64) {
            for i in (fi - r).max(0)..=(fi + r + 1).min(g.nx as i64) {
                let p = Point::new(g.origin.x + i as f64 * g.h, g.origin.y + j as f64 * g.h);
                let w = p - x;
                if w.norm() > 1e-12 * g.h {
                    out.push(w.angle());
                    out.push((-w).angle());
                }
            }
        }
    }
}

/// `int_0^{2pi} int_eps^{R} (chi_{E^c} - chi_E)(x + r e) r^{-1-s} dr dtheta`.
fn excised_integral<S: RaySet>(e: &S, x: Point, eps: f64, r_cut: Option<f64>, s: f64, tol: f64) -> Result<f64> {
    let mut breaks = vec![0.0, TAU];
    let mut raw = Vec::new();
    e.angular_breaks(x, &mut raw);
    breaks.extend(raw.into_iter().map(normalize_angle));
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let outer = r_cut.map_or(0.0, |r| r.powf(-s));
    let inner = eps.powf(-s);
    let signed = |th: f64| {
        let d = Point::polar(1.0, th);
        let mut v = inner - outer;
        for (lo, hi) in e.ray_intervals(x, d) {
            let lo = lo.max(eps);
            let hi = r_cut.map_or(hi, |r| hi.min(r));
            if hi > lo {
                v -= 2.0 * (lo.powf(-s) - if hi.is_finite() { hi.powf(-s) } else { 0.0 });
            }
        }
        v / s
    };
    let est = integrate_piecewise(signed, &breaks, tol * 1e-3, tol * 1e-3, 4000)?;
    Ok(est.value)
}

/// Principal-value fractional curvature with an error estimate.
pub fn fractional_curvature(q: &CurvatureQuery, p: &FractionalParameter) -> Result<Curvature> {
    p.validate()?;
    if !(q.tol > 0.0) {
        return Err(Error::InvalidParameter("curvature tolerance must be positive".into()));
    }
    match q.target {
        CurvatureTarget::Region(e) => {
            e.validate()?;
            check_on_boundary(e, q.x, 1e-9 * (1.0 + q.x.norm()))?;
            let eps = q.eps.unwrap_or(1e-2);
            extrapolate(e, q.x, eps, q, p)
        }
        CurvatureTarget::Phase { cluster, phase } => {
            cluster.validate()?;
            if phase >= cluster.k() {
                return Err(Error::PhaseOutOfRange(phase));
            }
            let gp = GridPhase::new(cluster, phase);
            let center = grid_center(&gp, q.x)?;
            let eps = q.eps.unwrap_or(0.25 * cluster.grid.h).min(0.25 * cluster.grid.h);
            extrapolate(&gp, center, eps, q, p)
        }
    }
}

fn extrapolate<S: RaySet>(e: &S, x: Point, eps: f64, q: &CurvatureQuery, p: &FractionalParameter) -> Result<Curvature> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("excision radius must be positive, got {eps}")));
    }
    let s = p.s;
    let v: Vec<f64> = [1.0, 0.5, 0.25]
        .iter()
        .map(|f| excised_integral(e, x, eps * f, q.r_cut, s, q.tol))
        .collect::<Result<_>>()?;
    let g = 2f64.powf(1.0 - s);
    let r1 = (g * v[1] - v[0]) / (g - 1.0);
    let r2 = (g * v[2] - v[1]) / (g - 1.0);
    let scale = r2.abs().max(1.0);
    let mut error = (r2 - r1).abs();
    if error > 10.0 * q.tol * scale {
        return Err(Error::Extrapolation(vec![v[0], v[1], v[2], r1, r2]));
    }
    if let Some(r) = q.r_cut {
        error += TAU * r.powf(-s) / s;
    }
    Ok(Curvature { value: r2, error, center: x })
}

fn check_on_boundary(e: &AnalyticRegion, x: Point, delta: f64) -> Result<()> {
    let mut inside = false;
    let mut outside = false;
    for k in 0..16 {
        let y = x + Point::polar(delta, TAU * (k as f64 + 0.5) / 16.0);
        if e.contains(y) {
            inside = true;
        } else {
            outside = true;
        }
    }
    if inside && outside {
        Ok(())
    } else {
        Err(Error::NotOnBoundary(format!("({}, {})", x.x, x.y)))
    }
}

/// Interface edge midpoint nearest to the projection of `x` onto a line
/// fitted through the interface edges of the surrounding 5x5 cells.
fn grid_center(gp: &GridPhase, x: Point) -> Result<Point> {
    let g = &gp.cl.grid;
    let (ci, cj) = gp.cell_of(x).ok_or_else(|| Error::NotOnBoundary("point outside the grid".into()))?;
    let edges = gp.interface_edges(ci.saturating_sub(2), ci + 2, cj.saturating_sub(2), cj + 2);
    let nearest = |p: Point| edges.iter().copied().min_by(|a, b| a.dist(p).partial_cmp(&b.dist(p)).unwrap());
    let closest = nearest(x).ok_or_else(|| Error::NotOnBoundary(format!("no interface near ({}, {})", x.x, x.y)))?;
    if closest.dist(x) > 0.5 * g.h * 2f64.sqrt() {
        return Err(Error::NotOnBoundary(format!("({}, {}) is farther than h/2 from the interface", x.x, x.y)));
    }
    if edges.len() < 2 {
        return Ok(closest);
    }
    let n = edges.len() as f64;
    let m = edges.iter().fold(Point::new(0.0, 0.0), |a, &p| a + p) * (1.0 / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in &edges {
        let d = *p - m;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let dir = Point::polar(1.0, angle);
    let proj = m + dir * (x - m).dot(dir);
    Ok(nearest(proj).unwrap())
}

/// `(H_s(x, E), lambda^s H_s(lambda x, E))` for a cone `E` with vertex at the origin.
pub fn curvature_scaling_check(e: &AnalyticRegion, x: Point, lambda: f64, s: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {lambda}")));
    }
    let p = FractionalParameter::new(s)?;
    let a = fractional_curvature(&CurvatureQuery::region(x, e), &p)?;
    let mut q = CurvatureQuery::region(x * lambda, e);
    q.eps = Some(1e-2 * lambda);
    let b = fractional_curvature(&q, &p)?;
    Ok((a.value, lambda.powf(s) * b.value))
}
