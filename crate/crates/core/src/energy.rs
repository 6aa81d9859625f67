//! Discrete fractional perimeters and cluster energies.
//!
//! Labels live on the domain cells; everything outside the domain carries
//! the exterior datum. With `W` the cell interactions and `T(a, j)` the
//! interaction of domain cell `a` with all of exterior phase `j`,
//!
//! ```text
//! Per_i = sum_{a: L(a)=i} [ sum_{b: L(b)!=i} W(a,b) + sum_{j!=i} T(a,j) ] + sum_{a: L(a)!=i} T(a,i)
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ExteriorDatum, Grid};
use crate::kernel::InteractionMatrix;
use crate::quad::{integrate, NeumaierSum};

/// Positive phase weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Weights {
    pub c: Vec<f64>,
}

impl Weights {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        let w = Weights { c };
        w.validate()?;
        Ok(w)
    }

    pub fn uniform(k: usize) -> Self {
        Weights { c: vec![1.0; k] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.is_empty() {
            return Err(Error::InvalidParameter("no weights given".into()));
        }
        if let Some(c) = self.c.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::InvalidParameter(format!("weights must be positive and finite, got {c}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.c.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Labeled domain cells together with the exterior datum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cluster {
    pub grid: Grid,
    pub ext: ExteriorDatum,
    /// One label per domain cell, in `Grid::interior_cells` order.
    pub labels: Vec<usize>,
}

impl Cluster {
    pub fn new(grid: Grid, ext: ExteriorDatum, labels: Vec<usize>) -> Result<Self> {
        let c = Cluster { grid, ext, labels };
        c.validate()?;
        Ok(c)
    }

    /// Each domain cell takes the exterior phase found at its center, or
    /// `fallback` where the datum leaves a gap.
    pub fn from_datum(grid: Grid, ext: ExteriorDatum, fallback: usize) -> Result<Self> {
        let labels = grid
            .interior_cells()
            .into_iter()
            .map(|(i, j)| ext.phase_at(grid.center(i, j)).unwrap_or(fallback))
            .collect();
        Cluster::new(grid, ext, labels)
    }

    pub fn k(&self) -> usize {
        self.ext.k()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k() < 2 {
            return Err(Error::InvalidParameter("a cluster needs at least two phases".into()));
        }
        let n = self.grid.interior_count();
        if self.labels.len() != n {
            return Err(Error::InvalidParameter(format!("{} labels for {} domain cells", self.labels.len(), n)));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.k()) {
            return Err(Error::PhaseOutOfRange(l));
        }
        Ok(())
    }

    /// Labels over the whole grid; cells outside the domain take the datum.
    pub fn full_labels(&self) -> Vec<Option<usize>> {
        let g = &self.grid;
        let mut out = vec![None; g.nx * g.ny];
        let mut it = self.labels.iter();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let idx = g.index(i, j);
                out[idx] = if g.omega_mask[idx] { it.next().copied() } else { self.ext.phase_at(g.center(i, j)) };
            }
        }
        out
    }

    /// Indicator of phase `i` over the domain cells.
    pub fn phase_cells(&self, i: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l == i).collect()
    }
}

fn check_matrix(cl: &Cluster, w: &InteractionMatrix) -> Result<()> {
    cl.validate()?;
    if w.n_interior() != cl.labels.len() || w.k != cl.k() {
        return Err(Error::InvalidParameter("interaction data does not match the cluster".into()));
    }
    Ok(())
}

/// Fractional perimeter of phase `i` relative to the domain.
pub fn perimeter_s(cl: &Cluster, i: usize, w: &InteractionMatrix) -> Result<f64> {
    check_matrix(cl, w)?;
    if i >= cl.k() {
        return Err(Error::PhaseOutOfRange(i));
    }
    Ok(perimeter_unchecked(&cl.labels, i, w))
}

fn perimeter_unchecked(labels: &[usize], i: usize, w: &InteractionMatrix) -> f64 {
    let mut sum = NeumaierSum::default();
    for (a, &la) in labels.iter().enumerate() {
        let t = w.ext_row(a);
        if la == i {
            for (b, &lb) in labels.iter().enumerate() {
                if lb != i {
                    sum.add(w.w(a, b));
                }
            }
            for (j, &tj) in t.iter().enumerate() {
                if j != i {
                    sum.add(tj);
                }
            }
        } else {
            sum.add(t[i]);
        }
    }
    sum.total()
}

/// Interaction of the domain with its complement.
pub fn domain_perimeter(w: &InteractionMatrix) -> f64 {
    (0..w.n_interior()).flat_map(|a| w.ext_row(a).iter().copied()).collect::<NeumaierSum>().total()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub per_phase: Vec<f64>,
    pub total: f64,
    /// `(1 - s) * total`.
    pub scaled: f64,
    /// Bound on the neglected far-field contribution.
    pub tail_bound: f64,
}

/// `sum_i c_i Per_i`, summed in phase order.
pub fn cluster_energy(cl: &Cluster, c: &Weights, w: &InteractionMatrix) -> Result<EnergyBreakdown> {
    check_matrix(cl, w)?;
    c.validate()?;
    if c.len() != cl.k() {
        return Err(Error::WeightCount { expected: cl.k(), got: c.len() });
    }
    let per_phase: Vec<f64> = (0..cl.k()).into_par_iter().map(|i| perimeter_unchecked(&cl.labels, i, w)).collect();
    let total = per_phase.iter().zip(&c.c).map(|(p, c)| p * c).collect::<NeumaierSum>().total();
    Ok(EnergyBreakdown {
        per_phase,
        total,
        scaled: scaled_energy(total, w.s),
        tail_bound: 2.0 * c.max() * w.tail_bound,
    })
}

pub fn scaled_energy(e: f64, s: f64) -> f64 {
    (1.0 - s) * e
}

/// `int_R (1 + t^2)^{-(2+s)/2} dt`, computed as `int cos^s` over `(-pi/2, pi/2)`.
///
/// Integrating the kernel along a line at unit distance gives this factor,
/// so the interaction across a flat interface of length `L` inside the
/// domain grows like `line_constant(s) L / (s (1 - s))` and `(1 - s) Per_s`
/// tends to `line_constant(1) L`.
pub fn line_constant(s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0, 1], got {s}")));
    }
    let h = std::f64::consts::FRAC_PI_2;
    let e = integrate(|phi: f64| phi.cos().max(0.0).powf(s), -h, h, 1e-15, 1e-14, 1000)?;
    Ok(e.value)
}

/// Limit constant of the scaled perimeter in the plane, `line_constant(1) = 2`.
pub fn omega_1() -> f64 {
    line_constant(1.0).expect("s = 1 is in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, AnalyticRegion, BoxDomain, Point};
    use crate::kernel::{build_interaction_matrix, FractionalParameter};

    fn two_phase(n: usize, s: f64) -> (Grid, ExteriorDatum, InteractionMatrix) {
        let grid = build_grid(BoxDomain::square(-1.0, 1.0), n, &AnalyticRegion::Plane).unwrap();
        let upper = AnalyticRegion::half_plane(Point::new(0.0, 1.0), 0.0);
        let ext = ExteriorDatum::new(vec![upper.clone(), upper.complement()]);
        let w = build_interaction_matrix(&grid, &ext, &FractionalParameter::new(s).unwrap()).unwrap();
        (grid, ext, w)
    }

    #[test]
    fn omega_one_is_two() {
        assert!((omega_1() - 2.0).abs() < 1e-12);
        // B(1/2, 3/4) at s = 1/2
        assert!((line_constant(0.5).unwrap() - 2.396_280_469_471_184).abs() < 1e-10);
    }

    #[test]
    fn two_phase_perimeters_agree() {
        let (grid, ext, w) = two_phase(6, 0.5);
        let cl = Cluster::from_datum(grid, ext, 0).unwrap();
        let p0 = perimeter_s(&cl, 0, &w).unwrap();
        let p1 = perimeter_s(&cl, 1, &w).unwrap();
        assert!((p0 - p1).abs() <= 1e-12 * p0.abs(), "{p0} {p1}");
    }

    #[test]
    fn single_phase_everywhere_has_zero_perimeter() {
        let grid = build_grid(BoxDomain::square(0.0, 1.0), 3, &AnalyticRegion::Plane).unwrap();
        let ext = ExteriorDatum::new(vec![AnalyticRegion::Plane, AnalyticRegion::empty()]);
        let w = build_interaction_matrix(&grid, &ext, &FractionalParameter::new(0.5).unwrap()).unwrap();
        let cl = Cluster::new(grid, ext, vec![0; 9]).unwrap();
        let e = cluster_energy(&cl, &Weights::uniform(2), &w).unwrap();
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn brute_force_checkerboard() {
        let (grid, ext, w) = two_phase(2, 0.4);
        let labels = vec![0, 1, 1, 0];
        let cl = Cluster::new(grid, ext, labels.clone()).unwrap();
        let c = Weights::new(vec![1.0, 2.5]).unwrap();
        let e = cluster_energy(&cl, &c, &w).unwrap();
        // mixed pairs weighted by c_i + c_j
        let mut brute = 0.0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                if labels[a] != labels[b] {
                    brute += (c.c[labels[a]] + c.c[labels[b]]) * w.w(a, b);
                }
            }
            for j in 0..2 {
                if j != labels[a] {
                    brute += (c.c[labels[a]] + c.c[j]) * w.ext_row(a)[j];
                }
            }
        }
        assert!((e.total - brute).abs() <= 1e-12 * brute);
    }

    #[test]
    fn energy_is_linear_in_weights() {
        let (grid, ext, w) = two_phase(4, 0.6);
        let cl = Cluster::from_datum(grid, ext, 0).unwrap();
        let e1 = cluster_energy(&cl, &Weights::new(vec![1.0, 2.0]).unwrap(), &w).unwrap();
        let e2 = cluster_energy(&cl, &Weights::new(vec![3.0, 6.0]).unwrap(), &w).unwrap();
        assert!((e2.total - 3.0 * e1.total).abs() <= 1e-12 * e2.total);
        assert!((e1.scaled - 0.4 * e1.total).abs() <= 1e-15 * e1.total);
    }

    #[test]
    fn filled_competitor_is_bounded_by_domain_perimeter() {
        let (grid, ext, w) = two_phase(5, 0.5);
        let n = grid.interior_count();
        let cl = Cluster::new(grid, ext, vec![0; n]).unwrap();
        let c = Weights::new(vec![1.0, 3.0]).unwrap();
        let e = cluster_energy(&cl, &c, &w).unwrap();
        assert!(e.total <= 2.0 * 3.0 * domain_perimeter(&w));
    }

    #[test]
    fn rejects_mismatches() {
        let (grid, ext, w) = two_phase(2, 0.5);
        assert!(matches!(Cluster::new(grid.clone(), ext.clone(), vec![0, 1, 2, 0]), Err(Error::PhaseOutOfRange(2))));
        let cl = Cluster::new(grid, ext, vec![0; 4]).unwrap();
        assert!(matches!(
            cluster_energy(&cl, &Weights::uniform(3), &w),
            Err(Error::WeightCount { expected: 2, got: 3 })
        ));
        assert!(perimeter_s(&cl, 5, &w).is_err());
    }
}
