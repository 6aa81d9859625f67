//! Evaluation of the interaction `J_s(A, B) = int_A int_B |x - y|^{-(d+s)} dx dy`
//! between square cells and between cells and analytic regions.
//!
//! Cell pairs are reduced to a two-dimensional integral over the difference
//! variable `z = y - x`, weighted by the overlap function of the two cells
//! (a product of two hat functions). Near pairs integrate that weight in
//! polar coordinates around `z = 0` with the radial part in closed form;
//! far pairs use tensor Gauss-Legendre. Region integrals use the same polar
//! trick around each quadrature point, where the radial integral of
//! `r^{-1-s}` over every ray interval is exact all the way to infinity.

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, AnalyticRegion, BoxDomain, ExteriorDatum, Grid, Point};
use crate::quad::{gauss_legendre, integrate_piecewise, NeumaierSum};

/// Fractional exponent plus quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractionalParameter {
    pub s: f64,
    #[serde(default = "default_dim")]
    pub d: u32,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    /// Truncation radius for unbounded regions. `None` integrates the radial
    /// tail exactly.
    #[serde(default)]
    pub r_cut: Option<f64>,
    /// Center distance, in cell sizes, beyond which cell pairs use the
    /// far-field rule.
    #[serde(default = "default_near")]
    pub near_threshold: f64,
}

fn default_dim() -> u32 {
    2
}
fn default_quad_tol() -> f64 {
    1e-10
}
fn default_near() -> f64 {
    4.0
}

impl FractionalParameter {
    pub fn new(s: f64) -> Result<Self> {
        let p = FractionalParameter {
            s,
            d: 2,
            quad_tol: default_quad_tol(),
            r_cut: None,
            near_threshold: default_near(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_quad_tol(mut self, tol: f64) -> Result<Self> {
        self.quad_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {}", self.s)));
        }
        if !(self.quad_tol > 0.0) {
            return Err(Error::InvalidParameter("quad_tol must be positive".into()));
        }
        if let Some(r) = self.r_cut {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter("r_cut must be positive".into()));
            }
        }
        if self.d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(self.near_threshold >= 1.0) {
            return Err(Error::InvalidParameter("near_threshold must be at least 1".into()));
        }
        Ok(())
    }
}

/// `|x - y|^{-(d+s)}`. The exponent is not range-checked so that limit
/// values such as `s = 1` can be probed.
pub fn kernel_value(x: Point, y: Point, s: f64, d: u32) -> Result<f64> {
    let r = x.dist(y);
    if r == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(r.powf(-(d as f64 + s)))
}

/// Axis-aligned square cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub center: Point,
    pub h: f64,
}

impl Cell {
    pub fn new(center: Point, h: f64) -> Self {
        Cell { center, h }
    }

    pub fn bounds(&self) -> BoxDomain {
        let r = 0.5 * self.h;
        BoxDomain::new(self.center - Point::new(r, r), self.center + Point::new(r, r))
    }

    pub fn diam(&self) -> f64 {
        self.h * std::f64::consts::SQRT_2
    }
}

/// Snap near-integers so that grid offsets computed from rounded centers hit
/// the same table entry bit for bit.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        v
    }
}

/// `J_s` between two equal square cells.
pub fn j_cells(a: &Cell, b: &Cell, p: &FractionalParameter) -> Result<f64> {
    if a.h != b.h || !(a.h > 0.0) {
        return Err(Error::InvalidParameter("j_cells needs two cells of equal positive size".into()));
    }
    let dx = snap(((b.center.x - a.center.x) / a.h).abs());
    let dy = snap(((b.center.y - a.center.y) / a.h).abs());
    let (u, v) = if dx >= dy { (dx, dy) } else { (dy, dx) };
    Ok(a.h.powf(2.0 - p.s) * j_unit(u, v, p)?)
}

/// `J_s` between unit cells whose centers differ by `(u, v)`, `u >= v >= 0`.
pub(crate) fn j_unit(u: f64, v: f64, p: &FractionalParameter) -> Result<f64> {
    if u < 1.0 {
        return Err(Error::SelfInteraction);
    }
    if u.hypot(v) > p.near_threshold {
        Ok(j_unit_far(u, v, p.s))
    } else {
        j_unit_near(u, v, p)
    }
}

/// Linear pieces `(lo, hi, a, b)` of the hat `1 - |t - c|`, weight `a + b t`,
/// further split at `t = 0`.
fn hat_pieces(c: f64) -> Vec<(f64, f64, f64, f64)> {
    let mut out = Vec::with_capacity(3);
    for (lo, hi, a, b) in [(c - 1.0, c, 1.0 - c, 1.0), (c, c + 1.0, 1.0 + c, -1.0)] {
        if lo < 0.0 && hi > 0.0 {
            out.push((lo, 0.0, a, b));
            out.push((0.0, hi, a, b));
        } else {
            out.push((lo, hi, a, b));
        }
    }
    out
}

const FAR_GL_ORDER: usize = 10;

fn j_unit_far(u: f64, v: f64, s: f64) -> f64 {
    let (gx, gw) = gauss_legendre(FAR_GL_ORDER);
    let e = -(2.0 + s) / 2.0;
    let mut sum = NeumaierSum::default();
    for (x0, x1, a1, b1) in hat_pieces(u) {
        for &(y0, y1, a2, b2) in &hat_pieces(v) {
            let (cx, hx) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
            let (cy, hy) = (0.5 * (y0 + y1), 0.5 * (y1 - y0));
            let mut acc = 0.0;
            for (xi, wi) in gx.iter().zip(&gw) {
                let z1 = cx + hx * xi;
                let w1 = a1 + b1 * z1;
                for (yj, wj) in gx.iter().zip(&gw) {
                    let z2 = cy + hy * yj;
                    acc += wi * wj * w1 * (a2 + b2 * z2) * (z1 * z1 + z2 * z2).powf(e);
                }
            }
            sum.add(acc * hx * hy);
        }
    }
    sum.total()
}

/// Exit parameter of the ray `t*(c, s)` from the rectangle `[x0,x1]x[y0,y1]`
/// and entry parameter, for a ray that meets it.
fn slab(x0: f64, x1: f64, y0: f64, y1: f64, c: f64, sn: f64) -> (f64, f64) {
    let mut tin = 0.0f64;
    let mut tout = f64::INFINITY;
    for (lo, hi, d) in [(x0, x1, c), (y0, y1, sn)] {
        if d.abs() < 1e-300 {
            continue;
        }
        let (t0, t1) = if d > 0.0 { (lo / d, hi / d) } else { (hi / d, lo / d) };
        tin = tin.max(t0);
        tout = tout.min(t1);
    }
    (tin, tout.max(tin))
}

fn j_unit_near(u: f64, v: f64, p: &FractionalParameter) -> Result<f64> {
    let s = p.s;
    let mut total = NeumaierSum::default();
    for (x0, x1, a1, b1) in hat_pieces(u) {
        for &(y0, y1, a2, b2) in &hat_pieces(v) {
            let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
            let touches_origin = corners.iter().any(|&(x, y)| x == 0.0 && y == 0.0);
            let a0 = a1 * a2;
            if touches_origin && a0.abs() > 1e-14 {
                return Err(Error::SelfInteraction);
            }
            let mut angles: Vec<f64> = corners
                .iter()
                .filter(|&&(x, y)| x != 0.0 || y != 0.0)
                .map(|&(x, y)| y.atan2(x))
                .collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            angles.dedup();
            let radial = |th: f64| {
                let (c, sn) = (th.cos(), th.sin());
                let (rin, rout) = slab(x0, x1, y0, y1, c, sn);
                if rout <= rin {
                    return 0.0;
                }
                let bcoef = a1 * b2 * sn + b1 * a2 * c;
                let ccoef = b1 * b2 * c * sn;
                let mut val = bcoef * (rout.powf(1.0 - s) - rin.powf(1.0 - s)) / (1.0 - s)
                    + ccoef * (rout.powf(2.0 - s) - rin.powf(2.0 - s)) / (2.0 - s);
                if !touches_origin {
                    val += a0 * (rin.powf(-s) - rout.powf(-s)) / s;
                }
                val
            };
            let est = integrate_piecewise(radial, &angles, 1e-15, p.quad_tol * 1e-3, 400)?;
            total.add(est.value);
        }
    }
    Ok(total.total())
}

/// Radial integral `int r^{-1-s} dr` over the given intervals, optionally
/// truncated at `r_cut`. Returns `(value, tail_bound)`.
pub(crate) fn radial_sum(intervals: &[(f64, f64)], s: f64, r_cut: Option<f64>) -> Result<(f64, f64)> {
    let mut v = 0.0;
    let mut tail = 0.0;
    for &(lo, hi) in intervals {
        if lo <= 0.0 {
            return Err(Error::RegionOverlap);
        }
        match r_cut {
            Some(rc) if hi > rc => {
                if lo < rc {
                    v += (lo.powf(-s) - rc.powf(-s)) / s;
                }
                tail += (lo.max(rc)).powf(-s) / s;
            }
            _ => v += (lo.powf(-s) - hi.powf(-s)) / s,
        }
    }
    Ok((v, tail))
}

/// `int_R |x - y|^{-(2+s)} dy` for a point `x` outside the closure of `R`.
/// Returns `(value, tail_bound)`.
pub fn point_region_integral(x: Point, region: &AnalyticRegion, p: &FractionalParameter) -> Result<(f64, f64)> {
    if region.is_trivially_empty() {
        return Ok((0.0, 0.0));
    }
    let mut breaks = vec![0.0, TAU];
    let mut raw = Vec::new();
    region.angular_breaks(x, &mut raw);
    breaks.extend(raw.into_iter().map(normalize_angle));
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    let mut failure = None;
    let mut tail = 0.0f64;
    let est = integrate_piecewise(
        |th| {
            let iv = region.ray_intervals(x, Point::polar(1.0, th));
            match radial_sum(&iv, p.s, p.r_cut) {
                Ok((v, t)) => {
                    tail = tail.max(t);
                    v
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        &breaks,
        1e-300,
        p.quad_tol * 1e-2,
        2000,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((est.value, tail * TAU))
}

/// Interaction of a cell with an analytic region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionInteraction {
    pub value: f64,
    /// Bound on the neglected contribution beyond `r_cut` (zero when the
    /// tail is integrated exactly).
    pub tail_bound: f64,
}

/// Gauss-Legendre order per axis for a cell whose nearest region boundary
/// is at least `gap` away, so that the product rule meets `tol`.
fn cell_rule_order(gap: f64, h: f64, tol: f64) -> usize {
    let a = 1.0 + 2.0 * gap / h;
    let rho = a + (a * a - 1.0).sqrt();
    let n = ((0.1 * tol).ln() / (-2.0 * rho.ln())).ceil() as usize;
    n.clamp(2, 12)
}

/// `J_s(cell, region)`; the region must not meet the cell.
///
/// The inner integral over the region is evaluated exactly in the radial
/// direction around each quadrature point; the cell integral uses a
/// Gauss-Legendre product rule, compared against one of higher order and
/// refined by quadrisection when the two disagree.
pub fn j_cell_region(cell: &Cell, region: &AnalyticRegion, p: &FractionalParameter) -> Result<RegionInteraction> {
    if region.is_trivially_empty() {
        return Ok(RegionInteraction { value: 0.0, tail_bound: 0.0 });
    }
    let b = cell.bounds();
    if region.contains(cell.center) || b.corners().iter().any(|c| region.contains(*c)) {
        return Err(Error::RegionOverlap);
    }
    cell_region_adaptive(cell, region, p, 0)
}

fn cell_rule(cell: &Cell, n: usize, f: &mut dyn FnMut(Point) -> Result<(f64, f64)>) -> Result<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let hh = 0.5 * cell.h;
    let mut sum = NeumaierSum::default();
    let mut tail = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        for (yj, wj) in x.iter().zip(&w) {
            let q = cell.center + Point::new(hh * xi, hh * yj);
            let (v, t) = f(q)?;
            sum.add(wi * wj * v);
            tail += wi * wj * t;
        }
    }
    Ok((sum.total() * hh * hh, tail * hh * hh))
}

fn cell_region_adaptive(cell: &Cell, region: &AnalyticRegion, p: &FractionalParameter, depth: usize) -> Result<RegionInteraction> {
    let mut f = |q: Point| point_region_integral(q, region, p);
    let (lo, _) = cell_rule(cell, 4, &mut f)?;
    let (hi, tail) = cell_rule(cell, 8, &mut f)?;
    if (hi - lo).abs() <= p.quad_tol * hi.abs() || depth >= 6 {
        return Ok(RegionInteraction { value: hi, tail_bound: tail });
    }
    let q = 0.25 * cell.h;
    let mut v = NeumaierSum::default();
    let mut t = 0.0;
    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        let sub = Cell::new(cell.center + Point::new(sx * q, sy * q), 0.5 * cell.h);
        let r = cell_region_adaptive(&sub, region, p, depth + 1)?;
        v.add(r.value);
        t += r.tail_bound;
    }
    Ok(RegionInteraction { value: v.total(), tail_bound: t })
}

/// Ray intervals of `region` beyond the exit point of a box that contains `x`.
fn intervals_outside_box(region: &AnalyticRegion, b: &BoxDomain, x: Point, d: Point) -> Vec<(f64, f64)> {
    let mut t_exit = f64::INFINITY;
    for (lo, hi, o, dd) in [(b.min.x, b.max.x, x.x, d.x), (b.min.y, b.max.y, x.y, d.y)] {
        if dd > 0.0 {
            t_exit = t_exit.min((hi - o) / dd);
        } else if dd < 0.0 {
            t_exit = t_exit.min((lo - o) / dd);
        }
    }
    region
        .ray_intervals(x, d)
        .into_iter()
        .filter_map(|(lo, hi)| {
            let lo = lo.max(t_exit);
            (hi > lo).then_some((lo, hi))
        })
        .collect()
}

/// `J_s(cell, region minus box)` for a cell lying inside `b`, at distance at
/// least `gap` from its boundary.
pub fn j_cell_region_outside_box(
    cell: &Cell,
    region: &AnalyticRegion,
    b: &BoxDomain,
    gap: f64,
    p: &FractionalParameter,
) -> Result<RegionInteraction> {
    if region.is_trivially_empty() {
        return Ok(RegionInteraction { value: 0.0, tail_bound: 0.0 });
    }
    if !(gap > 0.0) {
        return Err(Error::RegionOverlap);
    }
    let n = cell_rule_order(gap, cell.h, p.quad_tol);
    let mut f = |x: Point| -> Result<(f64, f64)> {
        let mut breaks = vec![0.0, TAU];
        let mut raw: Vec<f64> = b.corners().iter().map(|c| (*c - x).angle()).collect();
        region.angular_breaks(x, &mut raw);
        breaks.extend(raw.into_iter().map(normalize_angle));
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let mut tail = 0.0f64;
        let mut failure = None;
        let est = integrate_piecewise(
            |th| {
                let iv = intervals_outside_box(region, b, x, Point::polar(1.0, th));
                match radial_sum(&iv, p.s, p.r_cut) {
                    Ok((v, t)) => {
                        tail = tail.max(t);
                        v
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            &breaks,
            1e-300,
            p.quad_tol * 1e-2,
            2000,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((est.value, tail * TAU))
    };
    let (value, tail_bound) = cell_rule(cell, n, &mut f)?;
    Ok(RegionInteraction { value, tail_bound })
}

/// Upper bound `m * (2 pi / s) * R^{-s}` on the interaction of mass `m` with
/// everything at distance at least `R`.
pub fn radial_tail_bound(mass: f64, radius: f64, s: f64) -> f64 {
    mass * TAU / s * radius.powf(-s)
}

/// Precomputed interactions for a grid and an exterior datum.
///
/// The grid is padded by `pad` rings of exterior cells whose labels come
/// from the datum at their centers; beyond the padded box each phase is the
/// analytic region itself. Cell-cell interactions depend only on the index
/// offset, so they are stored once per offset.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    pub s: f64,
    pub quad_tol: f64,
    pub h: f64,
    pub k: usize,
    pub pad: usize,
    /// Padded dimensions.
    pub mx: usize,
    pub my: usize,
    /// `table[du * side + dv]` for offsets `0 <= du, dv < side`.
    table: Vec<f64>,
    side: usize,
    /// Padded coordinates of domain cells, in `Grid::interior_cells` order.
    pub interior: Vec<(usize, usize)>,
    /// Padded coordinates and phase of rasterized exterior cells.
    pub exterior: Vec<((usize, usize), usize)>,
    /// `far[a * k + j]`: interaction of domain cell `a` with phase `j` beyond the padded box.
    pub far: Vec<f64>,
    /// `ext[a * k + j]`: interaction of domain cell `a` with all of exterior phase `j`.
    pub ext: Vec<f64>,
    pub tail_bound: f64,
}

/// Default cap on stored entries (table plus per-cell exterior data).
pub const DEFAULT_MEMORY_BUDGET: usize = 200_000_000;

impl InteractionMatrix {
    /// Interaction of two cells at index offset `(di, dj)`.
    pub fn w_offset(&self, di: usize, dj: usize) -> f64 {
        self.table[di * self.side + dj]
    }

    /// Interaction between domain cells `a` and `b` (indices into `interior`).
    pub fn w(&self, a: usize, b: usize) -> f64 {
        let (ia, ja) = self.interior[a];
        let (ib, jb) = self.interior[b];
        self.w_offset(ia.abs_diff(ib), ja.abs_diff(jb))
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// Row of interactions of domain cell `a` with every domain cell (the
    /// diagonal entry is zero).
    pub fn row(&self, a: usize) -> Vec<f64> {
        (0..self.interior.len()).map(|b| if a == b { 0.0 } else { self.w(a, b) }).collect()
    }

    pub fn ext_row(&self, a: usize) -> &[f64] {
        &self.ext[a * self.k..(a + 1) * self.k]
    }

    pub fn offset_table(&self) -> (&[f64], usize) {
        (&self.table, self.side)
    }

    /// Write a binary cache: magic, parameters, then row-major little-endian f64 blocks.
    pub fn write_cache(&self, path: &Path, grid_hash: u64) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&grid_hash.to_le_bytes());
        for v in [self.s, self.quad_tol, self.h, self.tail_bound] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in [self.k, self.pad, self.mx, self.my, self.side, self.interior.len(), self.exterior.len()] {
            buf.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for &(i, j) in &self.interior {
            buf.extend_from_slice(&(i as u64).to_le_bytes());
            buf.extend_from_slice(&(j as u64).to_le_bytes());
        }
        for &((i, j), ph) in &self.exterior {
            for v in [i, j, ph] {
                buf.extend_from_slice(&(v as u64).to_le_bytes());
            }
        }
        for block in [&self.table, &self.far, &self.ext] {
            for v in block.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let tmp = path.with_extension("tmp");
        std::fs::File::create(&tmp)?.write_all(&buf)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    /// Read a cache written by [`write_cache`](Self::write_cache); fails
    /// unless the key `(grid_hash, s, quad_tol)` matches.
    pub fn read_cache(path: &Path, grid_hash: u64, s: f64, quad_tol: f64) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = CacheReader { bytes: &bytes, pos: 0 };
        if cur.take(CACHE_MAGIC.len())? != CACHE_MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let hash = cur.u64()?;
        let (cs, ctol, h, tail_bound) = (cur.f64()?, cur.f64()?, cur.f64()?, cur.f64()?);
        if hash != grid_hash || cs != s || ctol != quad_tol {
            return Err(Error::Cache("key mismatch".into()));
        }
        let k = cur.u64()? as usize;
        let pad = cur.u64()? as usize;
        let mx = cur.u64()? as usize;
        let my = cur.u64()? as usize;
        let side = cur.u64()? as usize;
        let n_int = cur.u64()? as usize;
        let n_ext = cur.u64()? as usize;
        let mut interior = Vec::with_capacity(n_int);
        for _ in 0..n_int {
            interior.push((cur.u64()? as usize, cur.u64()? as usize));
        }
        let mut exterior = Vec::with_capacity(n_ext);
        for _ in 0..n_ext {
            exterior.push(((cur.u64()? as usize, cur.u64()? as usize), cur.u64()? as usize));
        }
        let table = cur.f64s(side * side)?;
        let far = cur.f64s(n_int * k)?;
        let ext = cur.f64s(n_int * k)?;
        if cur.pos != bytes.len() {
            return Err(Error::Cache("trailing bytes".into()));
        }
        Ok(InteractionMatrix { s, quad_tol, h, k, pad, mx, my, table, side, interior, exterior, far, ext, tail_bound })
    }
}

const CACHE_MAGIC: &[u8; 8] = b"FRCLUSv1";

struct CacheReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> CacheReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Cache("truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Padded box and labels of the rasterized exterior ring.
pub(crate) struct Padded {
    pub bounds: BoxDomain,
    pub mx: usize,
    pub my: usize,
}

pub(crate) fn padded_frame(grid: &Grid, pad: usize) -> Padded {
    let off = pad as f64 * grid.h;
    let mx = grid.nx + 2 * pad;
    let my = grid.ny + 2 * pad;
    let min = grid.origin - Point::new(off, off);
    let bounds = BoxDomain::new(min, min + Point::new(mx as f64 * grid.h, my as f64 * grid.h));
    Padded { bounds, mx, my }
}

pub(crate) fn padded_center(grid: &Grid, pad: usize, i: usize, j: usize) -> Point {
    let off = pad as f64 * grid.h;
    Point::new(
        grid.origin.x - off + (i as f64 + 0.5) * grid.h,
        grid.origin.y - off + (j as f64 + 0.5) * grid.h,
    )
}

/// Default number of rasterized exterior rings around the grid.
pub const DEFAULT_PAD: usize = 2;

/// Build the interaction data for a grid and exterior datum.
pub fn build_interaction_matrix(grid: &Grid, ext: &ExteriorDatum, p: &FractionalParameter) -> Result<InteractionMatrix> {
    build_interaction_matrix_with(grid, ext, p, DEFAULT_PAD, DEFAULT_MEMORY_BUDGET)
}

pub fn build_interaction_matrix_with(
    grid: &Grid,
    ext: &ExteriorDatum,
    p: &FractionalParameter,
    pad: usize,
    budget: usize,
) -> Result<InteractionMatrix> {
    p.validate()?;
    grid.validate()?;
    if pad < 1 {
        return Err(Error::InvalidParameter("at least one exterior ring is required".into()));
    }
    for r in &ext.phases {
        r.validate()?;
    }
    let k = ext.k();
    let frame = padded_frame(grid, pad);
    let (mx, my) = (frame.mx, frame.my);
    let side = mx.max(my);
    let interior: Vec<(usize, usize)> =
        grid.interior_cells().into_iter().map(|(i, j)| (i + pad, j + pad)).collect();
    let needed = side * side + 2 * interior.len() * k;
    if needed > budget {
        return Err(Error::MemoryBudget { needed, budget });
    }

    let mut exterior = Vec::new();
    for j in 0..my {
        for i in 0..mx {
            let inside = i >= pad && j >= pad && i < pad + grid.nx && j < pad + grid.ny && grid.omega_mask[grid.index(i - pad, j - pad)];
            if inside {
                continue;
            }
            let c = padded_center(grid, pad, i, j);
            let phase = ext.phase_at(c).ok_or_else(|| {
                Error::ExteriorDatum(format!("cell center ({:.6}, {:.6}) is not covered by any phase", c.x, c.y))
            })?;
            exterior.push(((i, j), phase));
        }
    }

    // offsets (du, dv) with du >= dv, mirrored afterwards
    let pairs: Vec<(usize, usize)> = (0..side).flat_map(|du| (0..=du).map(move |dv| (du, dv))).collect();
    let scale = grid.h.powf(2.0 - p.s);
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(du, dv)| if du == 0 { Ok(0.0) } else { j_unit(du as f64, dv as f64, p).map(|v| scale * v) })
        .collect::<Result<_>>()?;
    let mut table = vec![0.0; side * side];
    for (&(du, dv), v) in pairs.iter().zip(values) {
        table[du * side + dv] = v;
        table[dv * side + du] = v;
    }

    let far_regions: Vec<AnalyticRegion> = ext.phases.clone();
    let bounds = frame.bounds;
    let far: Vec<Vec<(f64, f64)>> = interior
        .par_iter()
        .map(|&(i, j)| {
            let c = padded_center(grid, pad, i, j);
            let cell = Cell::new(c, grid.h);
            let gap = [c.x - bounds.min.x, bounds.max.x - c.x, c.y - bounds.min.y, bounds.max.y - c.y]
                .into_iter()
                .fold(f64::INFINITY, f64::min)
                - 0.5 * grid.h;
            far_regions
                .iter()
                .map(|r| j_cell_region_outside_box(&cell, r, &bounds, gap, p).map(|ri| (ri.value, ri.tail_bound)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let tail_bound = far.iter().flatten().map(|x| x.1).sum();
    let far: Vec<f64> = far.into_iter().flatten().map(|x| x.0).collect();

    let mut m = InteractionMatrix {
        s: p.s,
        quad_tol: p.quad_tol,
        h: grid.h,
        k,
        pad,
        mx,
        my,
        table,
        side,
        interior,
        exterior,
        far,
        ext: Vec::new(),
        tail_bound,
    };
    let ext_rows: Vec<Vec<f64>> = (0..m.interior.len())
        .into_par_iter()
        .map(|a| {
            let (ia, ja) = m.interior[a];
            let mut acc: Vec<NeumaierSum> = vec![NeumaierSum::default(); k];
            for &((ib, jb), ph) in &m.exterior {
                acc[ph].add(m.w_offset(ia.abs_diff(ib), ja.abs_diff(jb)));
            }
            (0..k)
                .map(|ph| {
                    acc[ph].add(m.far[a * k + ph]);
                    acc[ph].total()
                })
                .collect()
        })
        .collect();
    m.ext = ext_rows.into_iter().flatten().collect();
    Ok(m)
}
