//! Command-line front end: argument parsing, configuration files, commands
//! and on-disk artifacts.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::cones::{classical_weighted_angles, f_alpha, stationarity_residual_with, solve_weighted_cone_with, FTable};
use crate::curvature::{fractional_curvature, CurvatureQuery};
use crate::energy::{cluster_energy, Cluster, EnergyBreakdown, Weights};
use crate::error::{Error, Result};
use crate::geometry::{steiner_exterior_datum, AnalyticRegion, ExteriorDatum, Grid, Point};
use crate::kernel::{build_interaction_matrix, FractionalParameter, InteractionMatrix, DEFAULT_PAD};
use crate::minimizer::{angle_error_deg, minimize_with, symmetric_difference_area, SolveReport, SolverConfig};

#[derive(Debug, Parser)]
#[command(name = "fracluster", version, about = "Fractional perimeters of planar clusters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary weighted three-phase cone angles, one CSV row per s.
    ConeAngles(ConeArgs),
    /// Angles of the classical weighted triple junction.
    ClassicalAngles(WeightArgs),
    /// Minimize a cluster energy with fixed exterior data.
    Minimize(RunArgs),
    /// Minimize over a list of s values and tabulate convergence data.
    GammaSweep(RunArgs),
    /// Fractional curvature of an analytic region at given points.
    Curvature(CurvatureArgs),
    /// Energy of a labeled cluster.
    Energy(RunArgs),
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    /// Comma-separated positive weights.
    #[arg(long, value_delimiter = ',', default_value = "1,1,1")]
    pub weights: Vec<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConeArgs {
    /// Comma-separated values of s.
    #[arg(long, value_delimiter = ',', required = true)]
    pub s: Vec<f64>,
    #[command(flatten)]
    pub w: WeightArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override s (gamma-sweep: comma-separated list).
    #[arg(long, value_delimiter = ',')]
    pub s: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Override the number of cells per side.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (minimize, gamma-sweep) or file (energy); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Configuration of the `curvature` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureConfig {
    pub region: AnalyticRegion,
    pub points: Vec<Point>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub r_cut: Option<f64>,
    /// For a sector with vertex at the origin: also report `F(pi - opening)`.
    #[serde(default)]
    pub f_check: bool,
}

/// Configuration of the `energy` command: a solver configuration plus
/// optional labels (default: the datum evaluated inside the domain).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub solver: SolverConfig,
    #[serde(default)]
    pub labels: Option<Vec<usize>>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ConeAngles(a) => {
            let w = Weights::new(a.w.weights)?;
            let out = cmd_cone_angles(&a.s, &w)?;
            emit(a.w.out.as_deref(), out.as_bytes())
        }
        Command::ClassicalAngles(a) => {
            let w = Weights::new(a.weights)?;
            let out = cmd_classical_angles(&w)?;
            emit(a.out.as_deref(), out.as_bytes())
        }
        Command::Minimize(a) => {
            let cfg = resolve_solver_config(&a)?;
            let rep = cmd_minimize(&cfg)?;
            match &a.out {
                Some(dir) => write_run_artifacts(dir, &cfg, &rep),
                None => emit(None, serde_json::to_string_pretty(&report_json(&cfg, &rep))?.as_bytes()),
            }
        }
        Command::GammaSweep(a) => {
            let base = resolve_solver_config(&a)?;
            let s = if a.s.is_empty() { vec![base.s] } else { a.s.clone() };
            let rows = cmd_gamma_sweep(&base, &s)?;
            let csv = sweep_csv(&rows)?;
            match &a.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    write_atomic(&dir.join("sweep.csv"), csv.as_bytes())?;
                    let summary = serde_json::json!({ "config": base, "s": s, "rows": rows, "summary": sweep_summary(&rows) });
                    write_atomic(&dir.join("sweep.json"), serde_json::to_string_pretty(&summary)?.as_bytes())
                }
                None => emit(None, csv.as_bytes()),
            }
        }
        Command::Curvature(a) => {
            let mut cfg: CurvatureConfig = read_config(&a.config)?;
            if a.s.is_some() {
                cfg.s = a.s;
            }
            let v = cmd_curvature(&cfg)?;
            emit(a.out.as_deref(), serde_json::to_string_pretty(&v)?.as_bytes())
        }
        Command::Energy(a) => {
            let mut cfg: EnergyConfig = read_config(&a.config)?;
            apply_overrides(&mut cfg.solver, &a)?;
            if let [s] = a.s[..] {
                cfg.solver.s = s;
            }
            let e = cmd_energy(&cfg)?;
            let v = serde_json::json!({ "config": cfg, "energy": e });
            emit(a.out.as_deref(), serde_json::to_string_pretty(&v)?.as_bytes())
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(bytes)?;
            if !bytes.ends_with(b"\n") {
                o.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Parse a JSON config; errors carry the line and column.
pub fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn parse_config<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))
}

fn apply_overrides(cfg: &mut SolverConfig, a: &RunArgs) -> Result<()> {
    if let Some(w) = &a.weights {
        cfg.weights = Weights::new(w.clone())?;
    }
    if let Some(n) = a.grid {
        cfg.grid.n = n;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    Ok(())
}

fn resolve_solver_config(a: &RunArgs) -> Result<SolverConfig> {
    let mut cfg: SolverConfig = read_config(&a.config)?;
    apply_overrides(&mut cfg, a)?;
    if let [s] = a.s[..] {
        cfg.s = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_cone_angles(s: &[f64], w: &Weights) -> Result<String> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["s", "c1", "c2", "c3", "alpha1", "alpha2", "alpha3", "res12", "res23", "res31"])?;
    for &s in s {
        let table = FTable::new(s)?;
        let a = solve_weighted_cone_with(w, &table)?;
        let r = stationarity_residual_with(&a, w, &table)?;
        let mut rec = vec![s];
        rec.extend(&w.c);
        rec.extend(a.alpha);
        rec.extend(r);
        out.serialize(rec)?;
    }
    csv_string(out)
}

pub fn cmd_classical_angles(w: &Weights) -> Result<String> {
    let a = classical_weighted_angles(w)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["c1", "c2", "c3", "alpha1", "alpha2", "alpha3"])?;
    let mut rec = w.c.clone();
    rec.extend(a.alpha);
    out.serialize(rec)?;
    csv_string(out)
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Cache key covering the grid, the exterior datum and the padding.
fn cache_key(grid: &Grid, ext: &ExteriorDatum) -> Result<u64> {
    let mut h: u64 = grid.fingerprint();
    for b in serde_json::to_vec(ext)?.into_iter().chain((DEFAULT_PAD as u64).to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    Ok(h)
}

/// Interaction data, read from or written to `FRACLUSTER_CACHE_DIR` when set.
pub fn interaction_matrix_cached(grid: &Grid, ext: &ExteriorDatum, p: &FractionalParameter) -> Result<InteractionMatrix> {
    let Some(dir) = std::env::var_os("FRACLUSTER_CACHE_DIR") else {
        return build_interaction_matrix(grid, ext, p);
    };
    let key = cache_key(grid, ext)?;
    let dir = PathBuf::from(dir);
    let path = dir.join(format!("w_{key:016x}_s{}_t{:e}.bin", p.s, p.quad_tol));
    if let Ok(m) = InteractionMatrix::read_cache(&path, key, p.s, p.quad_tol) {
        return Ok(m);
    }
    let m = build_interaction_matrix(grid, ext, p)?;
    std::fs::create_dir_all(&dir)?;
    m.write_cache(&path, key)?;
    Ok(m)
}

pub fn cmd_minimize(cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    cfg.exterior.check_partition(&grid, 2)?;
    let w = interaction_matrix_cached(&grid, &cfg.exterior, &cfg.parameter()?)?;
    minimize_with(cfg, grid, &w)
}

pub fn cmd_energy(cfg: &EnergyConfig) -> Result<EnergyBreakdown> {
    let s = &cfg.solver;
    s.validate()?;
    let grid = s.grid.build()?;
    let cl = match &cfg.labels {
        Some(l) => Cluster::new(grid, s.exterior.clone(), l.clone())?,
        None => Cluster::from_datum(grid, s.exterior.clone(), 0)?,
    };
    let w = interaction_matrix_cached(&cl.grid, &cl.ext, &s.parameter()?)?;
    cluster_energy(&cl, &s.weights, &w)
}

/// Label image: binary PGM, one byte per cell (0 outside the domain,
/// `phase + 1` inside), rows from top to bottom, `h` and origin in comments.
pub fn encode_pgm(cl: &Cluster) -> Vec<u8> {
    let g = &cl.grid;
    let mut out = format!(
        "P5\n# h {:e}\n# origin {:e} {:e}\n{} {}\n255\n",
        g.h, g.origin.x, g.origin.y, g.nx, g.ny
    )
    .into_bytes();
    let mut img = vec![0u8; g.nx * g.ny];
    for ((i, j), &l) in g.interior_cells().into_iter().zip(&cl.labels) {
        img[(g.ny - 1 - j) * g.nx + i] = (l + 1).min(255) as u8;
    }
    out.extend(img);
    out
}

fn report_json(cfg: &SolverConfig, rep: &SolveReport) -> serde_json::Value {
    serde_json::json!({
        "config": cfg,
        "energy": rep.energy,
        "energy_trace": rep.energy_trace,
        "flips": rep.flips,
        "sweeps": rep.sweeps,
        "converged": rep.converged,
        "best_restart": rep.best_restart,
        "restart_energies": rep.restart_energies,
        "junction": rep.junction,
        "density": rep.density,
        "wall_time": rep.wall_time,
        "grid": { "origin": rep.cluster.grid.origin, "h": rep.cluster.grid.h, "nx": rep.cluster.grid.nx, "ny": rep.cluster.grid.ny },
    })
}

/// `labels.pgm`, `report.json` and `trace.csv` in `dir`.
pub fn write_run_artifacts(dir: &Path, cfg: &SolverConfig, rep: &SolveReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("labels.pgm"), &encode_pgm(&rep.cluster))?;
    write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(&report_json(cfg, rep))?.as_bytes())?;
    let mut t = csv::Writer::from_writer(Vec::new());
    t.write_record(["sweep", "energy"])?;
    for (i, e) in rep.energy_trace.iter().enumerate() {
        t.serialize((i, e))?;
    }
    write_atomic(&dir.join("trace.csv"), csv_string(t)?.as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub s: f64,
    pub scaled_energy: Option<f64>,
    pub triple_points: Option<usize>,
    pub angles: Option<Vec<f64>>,
    /// Largest deviation from 120 degrees, for three-phase runs.
    pub angle_error_deg: Option<f64>,
    /// Against the classical Steiner cone, outside `B(0, 0.2)`.
    pub symmetric_difference: Option<f64>,
    pub error: Option<String>,
}

/// One minimization per `s`; failures are recorded per row.
pub fn cmd_gamma_sweep(base: &SolverConfig, s_list: &[f64]) -> Result<Vec<SweepRow>> {
    let steiner = steiner_exterior_datum();
    let mut rows = Vec::new();
    for &s in s_list {
        let mut cfg = base.clone();
        cfg.s = s;
        let row = match cmd_minimize(&cfg) {
            Ok(rep) => {
                let tp = &rep.junction.triple_points;
                let angles = if tp.len() == 1 { tp[0].angles.clone() } else { None };
                let three = cfg.exterior.k() == 3;
                SweepRow {
                    s,
                    scaled_energy: Some(rep.energy.scaled),
                    triple_points: Some(tp.len()),
                    angle_error_deg: angles
                        .as_ref()
                        .filter(|_| three)
                        .map(|a| angle_error_deg(a, &[std::f64::consts::TAU / 3.0; 3])),
                    angles,
                    symmetric_difference: three.then(|| symmetric_difference_area(&rep.cluster, &steiner, 0.2)),
                    error: None,
                }
            }
            Err(e) => SweepRow {
                s,
                scaled_energy: None,
                triple_points: None,
                angles: None,
                angle_error_deg: None,
                symmetric_difference: None,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

fn non_increasing(v: &[Option<f64>]) -> Option<bool> {
    let v: Option<Vec<f64>> = v.iter().copied().collect();
    v.map(|v| v.windows(2).all(|w| w[1] <= w[0]))
}

pub fn sweep_summary(rows: &[SweepRow]) -> serde_json::Value {
    serde_json::json!({
        "angle_error_non_increasing": non_increasing(&rows.iter().map(|r| r.angle_error_deg).collect::<Vec<_>>()),
        "symmetric_difference_non_increasing": non_increasing(&rows.iter().map(|r| r.symmetric_difference).collect::<Vec<_>>()),
        "failures": rows.iter().filter(|r| r.error.is_some()).count(),
    })
}

fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["s", "scaled_energy", "triple_points", "alpha1", "alpha2", "alpha3", "angle_error_deg", "symmetric_difference", "error"])?;
    let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let a = |i: usize| f(r.angles.as_ref().and_then(|a| a.get(i).copied()));
        w.write_record([
            r.s.to_string(),
            f(r.scaled_energy),
            r.triple_points.map(|n| n.to_string()).unwrap_or_default(),
            a(0),
            a(1),
            a(2),
            f(r.angle_error_deg),
            f(r.symmetric_difference),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    csv_string(w)
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvaturePoint {
    pub x: Point,
    pub h_s: f64,
    pub error_bar: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_check: Option<f64>,
}

pub fn cmd_curvature(cfg: &CurvatureConfig) -> Result<serde_json::Value> {
    let s = cfg.s.ok_or_else(|| Error::Config("s is required (config or --s)".into()))?;
    let p = FractionalParameter::new(s)?;
    let f_ref = match (&cfg.region, cfg.f_check) {
        (AnalyticRegion::Sector { vertex, start_angle, end_angle }, true) if *vertex == Point::default() => {
            let opening = (end_angle - start_angle).rem_euclid(std::f64::consts::TAU);
            let a = std::f64::consts::PI - opening;
            Some(if a >= 0.0 { f_alpha(a, s)? } else { -f_alpha(-a, s)? })
        }
        (_, true) => return Err(Error::Config("f_check needs a sector with vertex at the origin".into())),
        _ => None,
    };
    let mut results = Vec::new();
    for &x in &cfg.points {
        let mut q = CurvatureQuery::region(x, &cfg.region);
        q.eps = cfg.eps;
        q.r_cut = cfg.r_cut;
        let h = fractional_curvature(&q, &p)?;
        let f_check = f_ref.filter(|_| (x.norm() - 1.0).abs() < 1e-12);
        results.push(CurvaturePoint { x, h_s: h.value, error_bar: h.error, f_check });
    }
    Ok(serde_json::json!({ "config": cfg, "results": results }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_angles_csv() {
        let out = cmd_cone_angles(&[0.5], &Weights::new(vec![1.0, 1.0, 1.0]).unwrap()).unwrap();
        let mut r = csv::Reader::from_reader(out.as_bytes());
        let row: Vec<f64> = r.deserialize().next().unwrap().unwrap();
        for a in &row[4..7] {
            assert!((a - 2.094_395_102_393_195).abs() < 1e-8);
        }
        let scaled = cmd_cone_angles(&[0.5], &Weights::new(vec![2.0, 2.0, 2.0]).unwrap()).unwrap();
        let row2: Vec<f64> = csv::Reader::from_reader(scaled.as_bytes()).deserialize().next().unwrap().unwrap();
        assert_eq!(row[4..7], row2[4..7]);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = parse_config::<CurvatureConfig>("{\n \"region\": {\"type\": \"plane\"},\n \"points\": [],\n \"bogus\": 1\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 4") && msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn curvature_with_f_check() {
        let cfg = CurvatureConfig {
            region: AnalyticRegion::sector(Point::default(), 0.0, std::f64::consts::FRAC_PI_2),
            points: vec![Point::new(1.0, 0.0)],
            s: Some(0.5),
            eps: None,
            r_cut: None,
            f_check: true,
        };
        let v = cmd_curvature(&cfg).unwrap();
        let r = &v["results"][0];
        let (h, f) = (r["h_s"].as_f64().unwrap(), r["f_check"].as_f64().unwrap());
        assert!((h - f).abs() < 1e-4 * f);
    }

    #[test]
    fn pgm_layout() {
        let grid = crate::geometry::build_grid(crate::geometry::BoxDomain::square(0.0, 1.0), 2, &AnalyticRegion::Plane).unwrap();
        let ext = ExteriorDatum::new(vec![AnalyticRegion::Plane, AnalyticRegion::empty()]);
        let cl = Cluster::new(grid, ext, vec![0, 1, 1, 0]).unwrap();
        let b = encode_pgm(&cl);
        assert!(b.starts_with(b"P5\n# h 5e-1\n"));
        assert_eq!(&b[b.len() - 4..], &[2, 1, 1, 2]);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
