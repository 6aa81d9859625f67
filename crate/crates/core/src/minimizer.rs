//! Label-field minimization of the weighted cluster energy with fixed
//! exterior data, plus diagnostics on the result.
//!
//! The energy of domain cell `a` carrying label `p` is
//! `sum_j g(p, j) U(a, j)` with `g(p, j) = (c_p + c_j) [j != p]` and
//! `U(a, j)` the interaction of `a` with everything labeled `j` (domain cells
//! and exterior). The solver keeps `U` up to date so a flip is evaluated in
//! `O(k)` and applied in `O(N)`.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{cluster_energy, Cluster, EnergyBreakdown, Weights};
use crate::error::{Error, Result};
use crate::geometry::{build_grid, AnalyticRegion, BoxDomain, ExteriorDatum, Grid, Point};
use crate::kernel::{build_interaction_matrix, FractionalParameter, InteractionMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    #[default]
    Greedy,
    /// Metropolis sweeps at `t0 * cooling^sweep`, then greedy.
    Anneal { t0: f64, cooling: f64, sweeps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Each domain cell takes the phase of the nearest exterior cell.
    #[default]
    NearestExterior,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub domain: BoxDomain,
    pub n: usize,
    pub omega: AnalyticRegion,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        build_grid(self.domain, self.n, &self.omega)
    }
}

fn default_max_sweeps() -> usize {
    500
}

fn default_restarts() -> usize {
    8
}

fn default_quad_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub s: f64,
    pub weights: Weights,
    pub grid: GridSpec,
    pub exterior: ExteriorDatum,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    /// Restart 0 uses `init`; the others start from random labels.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub init: Init,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
}

impl SolverConfig {
    pub fn new(s: f64, weights: Weights, grid: GridSpec, exterior: ExteriorDatum) -> Self {
        SolverConfig {
            s,
            weights,
            grid,
            exterior,
            schedule: Schedule::Greedy,
            seed: 0,
            max_sweeps: default_max_sweeps(),
            restarts: default_restarts(),
            init: Init::NearestExterior,
            quad_tol: default_quad_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.parameter()?;
        self.weights.validate()?;
        if self.weights.len() != self.exterior.k() {
            return Err(Error::WeightCount { expected: self.exterior.k(), got: self.weights.len() });
        }
        if let Schedule::Anneal { t0, cooling, sweeps } = self.schedule {
            if !(t0 >= 0.0 && t0.is_finite()) {
                return Err(Error::InvalidParameter(format!("t0 must be >= 0, got {t0}")));
            }
            if !(cooling > 0.0 && cooling < 1.0) {
                return Err(Error::InvalidParameter(format!("cooling must lie in (0, 1), got {cooling}")));
            }
            if sweeps == 0 {
                return Err(Error::InvalidParameter("anneal needs at least one sweep".into()));
            }
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn parameter(&self) -> Result<FractionalParameter> {
        FractionalParameter::new(self.s)?.with_quad_tol(self.quad_tol)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub cluster: Cluster,
    pub energy: EnergyBreakdown,
    /// Energy before the first sweep and after each sweep of the kept restart.
    pub energy_trace: Vec<f64>,
    pub flips: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub best_restart: usize,
    pub restart_energies: Vec<f64>,
    pub junction: JunctionReport,
    pub density: Vec<DensityRow>,
    pub wall_time: f64,
}

struct State<'a> {
    w: &'a InteractionMatrix,
    c: &'a [f64],
    k: usize,
    labels: Vec<usize>,
    u: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(w: &'a InteractionMatrix, c: &'a [f64], labels: Vec<usize>) -> Self {
        let mut st = State { w, c, k: c.len(), labels, u: Vec::new() };
        st.recompute();
        st
    }

    fn recompute(&mut self) {
        let (w, k, labels) = (self.w, self.k, &self.labels);
        self.u = (0..labels.len())
            .into_par_iter()
            .flat_map_iter(|a| {
                let mut row = w.ext_row(a).to_vec();
                for (b, &lb) in labels.iter().enumerate() {
                    if b != a {
                        row[lb] += w.w(a, b);
                    }
                }
                debug_assert_eq!(row.len(), k);
                row
            })
            .collect();
    }

    fn delta(&self, a: usize, m: usize) -> f64 {
        let u = &self.u[a * self.k..(a + 1) * self.k];
        delta_from_row(u, self.labels[a], m, self.c)
    }

    fn flip(&mut self, a: usize, m: usize) {
        let i = self.labels[a];
        let k = self.k;
        for b in 0..self.labels.len() {
            if b != a {
                let w = self.w.w(a, b);
                self.u[b * k + i] -= w;
                self.u[b * k + m] += w;
            }
        }
        self.labels[a] = m;
    }

    /// Rounding guard for "strictly improving".
    fn threshold(&self, a: usize) -> f64 {
        let u: f64 = self.u[a * self.k..(a + 1) * self.k].iter().sum();
        1e-12 * u * self.c.iter().cloned().fold(0.0, f64::max)
    }
}

fn delta_from_row(u: &[f64], i: usize, m: usize, c: &[f64]) -> f64 {
    let g = |p: usize, j: usize| if j == p { 0.0 } else { c[p] + c[j] };
    u.iter().enumerate().map(|(j, uj)| uj * (g(m, j) - g(i, j))).sum()
}

/// Energy change of relabeling domain cell `cell` to `new_label`.
pub fn flip_delta(cl: &Cluster, cell: usize, new_label: usize, c: &Weights, w: &InteractionMatrix) -> Result<f64> {
    cl.validate()?;
    if cell >= cl.labels.len() {
        return Err(Error::CellOutsideDomain(cell));
    }
    if new_label >= cl.k() {
        return Err(Error::PhaseOutOfRange(new_label));
    }
    if c.len() != cl.k() {
        return Err(Error::WeightCount { expected: cl.k(), got: c.len() });
    }
    if w.n_interior() != cl.labels.len() || w.k != cl.k() {
        return Err(Error::InvalidParameter("interaction data does not match the cluster".into()));
    }
    let i = cl.labels[cell];
    if new_label == i {
        return Err(Error::InvalidParameter(format!("cell {cell} already carries label {i}")));
    }
    let mut u = w.ext_row(cell).to_vec();
    for (b, &lb) in cl.labels.iter().enumerate() {
        if b != cell {
            u[lb] += w.w(cell, b);
        }
    }
    Ok(delta_from_row(&u, i, new_label, &c.c))
}

/// Label of the nearest rasterized exterior cell for every domain cell.
pub fn nearest_exterior_labels(w: &InteractionMatrix) -> Vec<usize> {
    w.interior
        .par_iter()
        .map(|&(i, j)| {
            let mut best = (usize::MAX, 0);
            for &((ei, ej), ph) in &w.exterior {
                let (di, dj) = (i.abs_diff(ei), j.abs_diff(ej));
                let d = di * di + dj * dj;
                if d < best.0 {
                    best = (d, ph);
                }
            }
            best.1
        })
        .collect()
}

struct RunOutcome {
    labels: Vec<usize>,
    trace: Vec<f64>,
    flips: usize,
    sweeps: usize,
    converged: bool,
}

fn greedy(st: &mut State, rng: &mut ChaCha8Rng, e0: f64, max_sweeps: usize, trace: &mut Vec<f64>) -> (usize, usize, bool) {
    let n = st.labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut energy = e0;
    let mut flips = 0;
    for sweep in 0..max_sweeps {
        if sweep > 0 {
            st.recompute();
        }
        order.shuffle(rng);
        let mut changed = 0;
        for &a in &order {
            let cur = st.labels[a];
            let thr = st.threshold(a);
            let mut best: Option<(f64, usize)> = None;
            for m in 0..st.k {
                if m == cur {
                    continue;
                }
                let d = st.delta(a, m);
                if d < -thr && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, m));
                }
            }
            if let Some((d, m)) = best {
                st.flip(a, m);
                energy += d;
                changed += 1;
            }
        }
        flips += changed;
        trace.push(energy);
        if changed == 0 {
            return (flips, sweep + 1, true);
        }
    }
    (flips, max_sweeps, false)
}

fn run_once(
    w: &InteractionMatrix,
    c: &Weights,
    cl0: &Cluster,
    init: Vec<usize>,
    cfg: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RunOutcome> {
    let start = Cluster { labels: init, ..cl0.clone() };
    let e0 = cluster_energy(&start, c, w)?.total;
    let mut st = State::new(w, &c.c, start.labels);
    let mut trace = vec![e0];
    let mut energy = e0;
    let mut flips = 0;
    let mut sweeps = 0;
    if let Schedule::Anneal { t0, cooling, sweeps: n_anneal } = cfg.schedule {
        let n = st.labels.len();
        let mut order: Vec<usize> = (0..n).collect();
        for sweep in 0..n_anneal {
            if sweep > 0 {
                st.recompute();
            }
            let t = t0 * cooling.powi(sweep as i32);
            order.shuffle(rng);
            for &a in &order {
                let cur = st.labels[a];
                let mut m = rng.gen_range(0..st.k - 1);
                if m >= cur {
                    m += 1;
                }
                let d = st.delta(a, m);
                let accept = d < 0.0 || (t > 0.0 && rng.gen::<f64>() < (-d / t).exp());
                if accept {
                    st.flip(a, m);
                    energy += d;
                    flips += 1;
                }
            }
            sweeps += 1;
            trace.push(energy);
        }
        st.recompute();
    }
    let (f, s, converged) = greedy(&mut st, rng, energy, cfg.max_sweeps, &mut trace);
    Ok(RunOutcome { labels: st.labels, trace, flips: flips + f, sweeps: sweeps + s, converged })
}

/// Solve the discrete Dirichlet problem described by `cfg`.
pub fn minimize_dirichlet(cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let w = build_interaction_matrix(&grid, &cfg.exterior, &cfg.parameter()?)?;
    minimize_with(cfg, grid, &w)
}

/// As [`minimize_dirichlet`] with prebuilt interaction data.
pub fn minimize_with(cfg: &SolverConfig, grid: Grid, w: &InteractionMatrix) -> Result<SolveReport> {
    let t0 = Instant::now();
    cfg.validate()?;
    let n = grid.interior_count();
    if w.n_interior() != n || w.k != cfg.exterior.k() || w.s != cfg.s {
        return Err(Error::InvalidParameter("interaction data does not match the configuration".into()));
    }
    let k = cfg.exterior.k();
    let cl0 = Cluster::new(grid, cfg.exterior.clone(), vec![0; n])?;
    let nearest = nearest_exterior_labels(w);
    let outcomes: Vec<RunOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let init = if r == 0 && cfg.init == Init::NearestExterior {
                nearest.clone()
            } else {
                (0..n).map(|_| rng.gen_range(0..k)).collect()
            };
            run_once(w, &cfg.weights, &cl0, init, cfg, &mut rng)
        })
        .collect::<Result<_>>()?;
    let restart_energies: Vec<f64> = outcomes.iter().map(|o| *o.trace.last().unwrap()).collect();
    let best = (0..outcomes.len()).fold(0, |b, r| if restart_energies[r] < restart_energies[b] { r } else { b });
    let out = outcomes.into_iter().nth(best).unwrap();
    let cluster = Cluster { labels: out.labels, ..cl0 };
    let energy = cluster_energy(&cluster, &cfg.weights, w)?;
    let junction = measure_junction(&cluster);
    let h = cluster.grid.h;
    let density = density_check(&cluster, &[4.0 * h, 8.0 * h])?;
    Ok(SolveReport {
        cluster,
        energy,
        energy_trace: out.trace,
        flips: out.flips,
        sweeps: out.sweeps,
        converged: out.converged,
        best_restart: best,
        restart_energies,
        junction,
        density,
        wall_time: t0.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriplePoint {
    pub location: Point,
    /// Phases meeting at the point, ascending.
    pub phases: Vec<usize>,
    /// Opening angle of each phase in `phases` order, when measurable.
    pub angles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JunctionReport {
    pub triple_points: Vec<TriplePoint>,
    pub note: String,
}

/// Locate triple points and, when there is exactly one, measure the
/// opening angles of the phases meeting there.
pub fn measure_junction(cl: &Cluster) -> JunctionReport {
    let g = &cl.grid;
    let full = cl.full_labels();
    let label = |i: i64, j: i64| -> Option<usize> {
        if i < 0 || j < 0 || i >= g.nx as i64 || j >= g.ny as i64 {
            return None;
        }
        full[g.index(i as usize, j as usize)]
    };
    let in_omega = |i: i64, j: i64| i >= 0 && j >= 0 && i < g.nx as i64 && j < g.ny as i64 && g.omega_mask[g.index(i as usize, j as usize)];
    // cells whose centers lie within 2h of a lattice corner
    const NEAR: [(i64, i64); 12] =
        [(-1, -1), (0, -1), (-1, 0), (0, 0), (-2, -1), (1, -1), (-2, 0), (1, 0), (-1, -2), (0, -2), (-1, 1), (0, 1)];
    let mut candidates: Vec<((i64, i64), Vec<usize>)> = Vec::new();
    for cj in 1..g.ny as i64 {
        for ci in 1..g.nx as i64 {
            if ![(-1, -1), (0, -1), (-1, 0), (0, 0)].iter().any(|&(a, b)| in_omega(ci + a, cj + b)) {
                continue;
            }
            let mut ph: Vec<usize> = NEAR.iter().filter_map(|&(a, b)| label(ci + a, cj + b)).collect();
            ph.sort_unstable();
            ph.dedup();
            if ph.len() >= 3 {
                candidates.push(((ci, cj), ph));
            }
        }
    }
    // group candidates whose corners are within two cells of each other
    let mut comp = vec![usize::MAX; candidates.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..candidates.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut q = 0;
        while q < members.len() {
            let (a, _) = &candidates[members[q]];
            for (o, (b, _)) in candidates.iter().enumerate() {
                if comp[o] == usize::MAX && (a.0 - b.0).abs() <= 2 && (a.1 - b.1).abs() <= 2 {
                    comp[o] = id;
                    members.push(o);
                }
            }
            q += 1;
        }
        groups.push(members);
    }
    let mut points: Vec<TriplePoint> = groups
        .iter()
        .map(|m| {
            let n = m.len() as f64;
            let (sx, sy) = m.iter().fold((0.0, 0.0), |acc, &c| {
                let (ci, cj) = candidates[c].0;
                (acc.0 + ci as f64, acc.1 + cj as f64)
            });
            let location = Point::new(g.origin.x + sx / n * g.h, g.origin.y + sy / n * g.h);
            let mut phases: Vec<usize> = m.iter().flat_map(|&c| candidates[c].1.iter().copied()).collect();
            phases.sort_unstable();
            phases.dedup();
            TriplePoint { location, phases, angles: None }
        })
        .collect();
    let note = match points.len() {
        0 => "no triple point".to_string(),
        1 => {
            let tp = &mut points[0];
            if tp.phases.len() == 3 {
                tp.angles = junction_angles(cl, &full, tp.location, [tp.phases[0], tp.phases[1], tp.phases[2]]);
            }
            match tp.angles {
                Some(_) => "one triple point".to_string(),
                None => "one triple point, angles not measurable".to_string(),
            }
        }
        n => format!("{n} triple points, angles not measured"),
    };
    JunctionReport { triple_points: points, note }
}

/// Direction of the interface between phases `p` and `q`, fitted as a ray
/// from `center` through edge midpoints in the annulus `[4h, 12h]`.
fn interface_ray(cl: &Cluster, full: &[Option<usize>], center: Point, p: usize, q: usize) -> Option<f64> {
    let g = &cl.grid;
    let (r0, r1) = (4.0 * g.h, 12.0 * g.h);
    let mut pts = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let a = full[g.index(i, j)];
            let c = g.center(i, j);
            let mut push = |b: Option<usize>, mid: Point| {
                if let (Some(a), Some(b)) = (a, b) {
                    if (a == p && b == q) || (a == q && b == p) {
                        let r = mid.dist(center);
                        if r >= r0 && r <= r1 {
                            pts.push(mid - center);
                        }
                    }
                }
            };
            if i + 1 < g.nx {
                push(full[g.index(i + 1, j)], Point::new(c.x + 0.5 * g.h, c.y));
            }
            if j + 1 < g.ny {
                push(full[g.index(i, j + 1)], Point::new(c.x, c.y + 0.5 * g.h));
            }
        }
    }
    if pts.len() < 2 {
        return None;
    }
    // least-squares line through the center: principal axis of the second moments
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let mut mean = Point::new(0.0, 0.0);
    for d in &pts {
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
        mean = mean + *d;
    }
    let axis = Point::polar(1.0, 0.5 * (2.0 * sxy).atan2(sxx - syy));
    let dir = if axis.dot(mean) >= 0.0 { axis } else { -axis };
    Some(dir.angle())
}

fn junction_angles(cl: &Cluster, full: &[Option<usize>], center: Point, ph: [usize; 3]) -> Option<Vec<f64>> {
    let r01 = interface_ray(cl, full, center, ph[0], ph[1])?;
    let r12 = interface_ray(cl, full, center, ph[1], ph[2])?;
    let r20 = interface_ray(cl, full, center, ph[2], ph[0])?;
    let ccw = |from: f64, to: f64| (to - from).rem_euclid(TAU);
    // the sector of a phase is bounded by its two rays and avoids the third ray
    let opening = |a: f64, b: f64, other: f64| {
        let d = ccw(a, b);
        if ccw(a, other) < d {
            TAU - d
        } else {
            d
        }
    };
    Some(vec![opening(r20, r01, r12), opening(r01, r12, r20), opening(r12, r20, r01)])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRow {
    pub r: f64,
    /// Boundary cells whose ball lies in the domain.
    pub points: usize,
    /// Boundary cells skipped because the ball leaves the domain.
    pub skipped: usize,
    pub min_fraction: f64,
    pub max_fraction: f64,
}

/// Volume fractions of the incident phases in balls around boundary cells.
/// Fractions are cell counts over the cells of the discrete ball.
pub fn density_check(cl: &Cluster, radii: &[f64]) -> Result<Vec<DensityRow>> {
    cl.validate()?;
    let g = &cl.grid;
    let full = cl.full_labels();
    let lab = |i: i64, j: i64| -> Option<usize> {
        if i < 0 || j < 0 || i >= g.nx as i64 || j >= g.ny as i64 {
            None
        } else {
            full[g.index(i as usize, j as usize)]
        }
    };
    let mut boundary: Vec<((i64, i64), Vec<usize>)> = Vec::new();
    for (i, j) in g.interior_cells() {
        let (i, j) = (i as i64, j as i64);
        let own = lab(i, j).unwrap();
        let mut inc = vec![own];
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            if let Some(o) = lab(i + di, j + dj) {
                if o != own {
                    inc.push(o);
                }
            }
        }
        if inc.len() > 1 {
            inc.sort_unstable();
            inc.dedup();
            boundary.push(((i, j), inc));
        }
    }
    let mut rows = Vec::new();
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
        }
        let m = (r / g.h).ceil() as i64;
        let mut row = DensityRow { r, points: 0, skipped: 0, min_fraction: f64::INFINITY, max_fraction: f64::NEG_INFINITY };
        'cells: for ((i, j), inc) in &boundary {
            let mut counts = vec![0usize; cl.k()];
            let mut total = 0usize;
            for dj in -m..=m {
                for di in -m..=m {
                    if ((di * di + dj * dj) as f64).sqrt() * g.h > r {
                        continue;
                    }
                    let (ii, jj) = (i + di, j + dj);
                    let inside = ii >= 0
                        && jj >= 0
                        && ii < g.nx as i64
                        && jj < g.ny as i64
                        && g.omega_mask[g.index(ii as usize, jj as usize)];
                    if !inside {
                        row.skipped += 1;
                        continue 'cells;
                    }
                    counts[lab(ii, jj).unwrap()] += 1;
                    total += 1;
                }
            }
            row.points += 1;
            for &p in inc {
                let f = counts[p] as f64 / total as f64;
                row.min_fraction = row.min_fraction.min(f);
                row.max_fraction = row.max_fraction.max(f);
            }
        }
        if row.points == 0 {
            row.min_fraction = f64::NAN;
            row.max_fraction = f64::NAN;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Area of domain cells outside `B(0, r_excl)` whose label differs from
/// the reference partition evaluated at the cell center.
pub fn symmetric_difference_area(cl: &Cluster, reference: &ExteriorDatum, r_excl: f64) -> f64 {
    let g = &cl.grid;
    let cells = g.interior_cells();
    let diff = cells
        .iter()
        .zip(&cl.labels)
        .filter(|(&(i, j), &l)| {
            let c = g.center(i, j);
            c.norm() >= r_excl && reference.phase_at(c) != Some(l)
        })
        .count();
    diff as f64 * g.h * g.h
}

/// Cone with vertex at the origin: phase `i` is the sector starting at
/// `start + sum_{j<i} alpha_j` with opening `alpha_i`.
pub fn cone_datum(alpha: &[f64], start: f64) -> Result<ExteriorDatum> {
    let sum: f64 = alpha.iter().sum();
    if (sum - TAU).abs() > 1e-9 || alpha.iter().any(|a| !(*a > 0.0 && *a < TAU)) {
        return Err(Error::InvalidParameter(format!("cone openings must be positive and sum to 2pi, got {alpha:?}")));
    }
    let mut a0 = start;
    let phases = alpha
        .iter()
        .map(|&a| {
            let r = AnalyticRegion::sector(Point::new(0.0, 0.0), a0, a);
            a0 += a;
            r
        })
        .collect();
    Ok(ExteriorDatum::new(phases))
}

/// Opening angle error, in degrees, of measured angles against a target.
pub fn angle_error_deg(measured: &[f64], target: &[f64]) -> f64 {
    measured.iter().zip(target).map(|(m, t)| (m - t).abs()).fold(0.0, f64::max) * 180.0 / PI
}
