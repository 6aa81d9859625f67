//! Stationary three-phase cones.
//!
//! For a cone with opening angles `alpha_i` and a boundary point at unit
//! distance from the vertex, the fractional curvature of phase `i` equals
//! `F(pi - alpha_i)` where
//!
//! ```text
//! F(a) = 2 int_0^a int_0^inf rho / (1 + rho^2 + 2 rho cos t)^{1 + s/2} drho dt
//! ```
//!
//! is the interaction of `(1, 0)` with the sector of opening `2a` bisected by
//! the negative axis. Stationarity for weights `c` reads
//! `c_1 F(pi - alpha_1) = c_2 F(pi - alpha_2) = c_3 F(pi - alpha_3)`; with
//! the common value `k`, the angles are `alpha_i = pi - F^{-1}(k / c_i)` and
//! `k` is the unique root of `sum_i F^{-1}(k / c_i) = pi`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::energy::Weights;
use crate::error::{Error, Result};
use crate::quad::{bisect, gauss_legendre, integrate, NeumaierSum};

/// Opening angles of a three-phase cone, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeAngles {
    pub alpha: [f64; 3],
}

impl ConeAngles {
    pub fn new(alpha: [f64; 3]) -> Result<Self> {
        let a = ConeAngles { alpha };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.iter().any(|a| !(*a > 0.0 && *a < PI)) {
            return Err(Error::InvalidParameter(format!("cone angles must lie in (0, pi): {:?}", self.alpha)));
        }
        let sum: f64 = self.alpha.iter().sum();
        if (sum - 2.0 * PI).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("cone angles must sum to 2pi, got {sum}")));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &ConeAngles) -> f64 {
        self.alpha.iter().zip(&other.alpha).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
    }
    Ok(())
}

static GL32: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();

/// `int_0^theta sin^s` for `theta <= pi/2`. The substitution
/// `psi = theta v^q`, `q = 12/(1+s)`, turns the endpoint power into `v^11`
/// so a fixed 32-point rule is accurate to roughly 1e-14.
fn sin_power_integral_half(theta: f64, s: f64) -> f64 {
    if theta == 0.0 {
        return 0.0;
    }
    let (x, w) = GL32.get_or_init(|| gauss_legendre(32));
    let q = 12.0 / (1.0 + s);
    let mut sum = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        let v = 0.5 * (xi + 1.0);
        let vq = v.powf(q);
        let y = theta * vq;
        let sinc = if y == 0.0 { 1.0 } else { y.sin() / y };
        sum += wi * v.powf(q * (1.0 + s) - 1.0) * sinc.powf(s);
    }
    0.5 * q * theta.powf(1.0 + s) * sum
}

/// `int_0^inf rho (1 + rho^2 + 2 rho cos t)^{-1-s/2} drho`, i.e. half of `F'(t)`.
///
/// Splitting `rho = (rho + cos t) - cos t` and substituting
/// `rho + cos t = sin t tan phi` gives
/// `1/s - cos t sin^{-1-s} t int_0^t sin^s`.
pub fn f_derivative_half(theta: f64, s: f64) -> f64 {
    if theta > FRAC_PI_2 {
        return f_derivative_half_reflected(PI - theta, s);
    }
    if theta == 0.0 {
        return 1.0 / (s * (1.0 + s));
    }
    1.0 / s - theta.cos() * sin_power_integral_half(theta, s) / theta.sin().powf(1.0 + s)
}

/// [`f_derivative_half`] at `pi - d`, accurate when `d` is tiny.
fn f_derivative_half_reflected(d: f64, s: f64) -> f64 {
    let full = 2.0 * sin_power_integral_half(FRAC_PI_2, s) - sin_power_integral_half(d, s);
    1.0 / s + d.cos() * full / d.sin().powf(1.0 + s)
}

/// `2 int_a^b` of [`f_derivative_half`]; the part above `pi/2` is
/// integrated in `d = pi - t`.
fn f_segment(a: f64, b: f64, s: f64) -> Result<f64> {
    if a >= b {
        return Ok(0.0);
    }
    let mut sum = NeumaierSum::default();
    if a < FRAC_PI_2 {
        let e = integrate(|t| f_derivative_half(t, s), a, b.min(FRAC_PI_2), 1e-14, 1e-13, 2000)?;
        sum.add(e.value);
    }
    if b > FRAC_PI_2 {
        let (dlo, dhi) = (PI - b, PI - a.max(FRAC_PI_2));
        let e = integrate(|d| f_derivative_half_reflected(d, s), dlo, dhi, 1e-14, 1e-13, 2000)?;
        sum.add(e.value);
    }
    Ok(2.0 * sum.total())
}

/// `F(alpha)` for `0 <= alpha < pi`.
pub fn f_alpha(alpha: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    if !(0.0..PI).contains(&alpha) {
        return Err(Error::AngleDomain(alpha));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    // split so that the peak of the inner integrand near t = pi stays resolved
    let mut knots = vec![0.0];
    let mut gap = PI - alpha;
    let mut lo = PI - 0.5;
    while lo > 0.0 && lo < alpha && gap < 0.5 {
        knots.push(lo);
        lo = PI - (PI - lo) * 0.5;
        gap *= 2.0;
    }
    knots.push(alpha);
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup();
    let mut sum = NeumaierSum::default();
    for w in knots.windows(2) {
        sum.add(f_segment(w[0], w[1], s)?);
    }
    Ok(sum.total())
}

/// Monotone table of `F` on `[0, pi - eps]` used to bracket inversions.
#[derive(Debug, Clone)]
pub struct FTable {
    pub s: f64,
    pub alpha: Vec<f64>,
    pub value: Vec<f64>,
}

impl FTable {
    pub fn new(s: f64) -> Result<Self> {
        check_s(s)?;
        let mut alpha: Vec<f64> = (0..=96).map(|j| (PI - 0.1) * j as f64 / 96.0).collect();
        let mut d = 0.1;
        for _ in 0..30 {
            d *= 0.5;
            alpha.push(PI - d);
        }
        let segs: Vec<f64> = {
            use rayon::prelude::*;
            alpha.par_windows(2).map(|w| f_segment(w[0], w[1], s)).collect::<Result<_>>()?
        };
        let mut value = Vec::with_capacity(alpha.len());
        let mut acc = NeumaierSum::default();
        value.push(0.0);
        for v in segs {
            acc.add(v);
            value.push(acc.total());
        }
        let t = FTable { s, alpha, value };
        debug_assert!(t.value.windows(2).all(|w| w[1] > w[0]));
        Ok(t)
    }

    /// `F(alpha)` from the nearest table knot below plus one segment integral.
    pub fn f(&self, alpha: f64) -> Result<f64> {
        if !(0.0..PI).contains(&alpha) {
            return Err(Error::AngleDomain(alpha));
        }
        let j = match self.alpha.partition_point(|a| *a <= alpha) {
            0 => 0,
            n => n - 1,
        };
        if self.alpha[j] == alpha {
            return Ok(self.value[j]);
        }
        Ok(self.value[j] + f_segment(self.alpha[j], alpha, self.s)?)
    }

    /// `F^{-1}(v)` by bisection inside the table bracket.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!("F^-1 needs a finite v >= 0, got {v}")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        let last = self.value.len() - 1;
        let (lo, hi, base) = if v <= self.value[last] {
            let j = self.value.partition_point(|f| *f <= v);
            let j = j.clamp(1, last);
            (self.alpha[j - 1], self.alpha[j], self.value[j - 1])
        } else {
            // grow the upper bracket toward pi
            let mut lo = self.alpha[last];
            let mut base = self.value[last];
            let mut d = PI - lo;
            loop {
                d *= 0.5;
                let hi = PI - d;
                if hi <= lo {
                    return Err(Error::AngleDomain(hi));
                }
                let fh = base + f_segment(lo, hi, self.s)?;
                if fh >= v {
                    break (lo, hi, base);
                }
                lo = hi;
                base = fh;
            }
        };
        let s = self.s;
        let a = bisect(|x| base + f_segment(lo, x, s).unwrap_or(f64::NAN) - v, lo, hi, 200);
        Ok(a)
    }
}

/// `F^{-1}(v)`.
pub fn f_inverse(v: f64, s: f64) -> Result<f64> {
    FTable::new(s)?.inverse(v)
}

/// Unique stationary cone for three positive weights.
pub fn solve_weighted_cone(c: &Weights, s: f64) -> Result<ConeAngles> {
    let table = FTable::new(s)?;
    solve_weighted_cone_with(c, &table)
}

pub fn solve_weighted_cone_with(c: &Weights, table: &FTable) -> Result<ConeAngles> {
    c.validate()?;
    if c.c.len() != 3 {
        return Err(Error::WeightCount { expected: 3, got: c.c.len() });
    }
    let w = &c.c;
    let g = |k: f64| -> f64 {
        let mut sum = NeumaierSum::default();
        for ci in w {
            sum.add(table.inverse(k / ci).unwrap_or(f64::NAN));
        }
        sum.total() - PI
    };
    let mut hi = w.iter().cloned().fold(f64::INFINITY, f64::min);
    while g(hi) < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::DegenerateWeights("k-bracket diverged".into()));
        }
    }
    let mut lo = hi * 0.5;
    while g(lo) > 0.0 {
        lo *= 0.5;
    }
    let k = bisect(g, lo, hi, 200);
    let mut alpha = [0.0; 3];
    for (a, ci) in alpha.iter_mut().zip(w) {
        *a = PI - table.inverse(k / ci)?;
    }
    let angles = ConeAngles { alpha };
    let sum: f64 = alpha.iter().sum();
    if (sum - 2.0 * PI).abs() > 1e-9 {
        return Err(Error::DegenerateWeights(format!("angle sum {sum} after k-solve")));
    }
    Ok(angles)
}

/// Pairwise residuals `(r12, r23, r31)` with `r_ij = c_i F(pi - a_i) - c_j F(pi - a_j)`.
pub fn stationarity_residual(a: &ConeAngles, c: &Weights, s: f64) -> Result<[f64; 3]> {
    let table = FTable::new(s)?;
    stationarity_residual_with(a, c, &table)
}

pub fn stationarity_residual_with(a: &ConeAngles, c: &Weights, table: &FTable) -> Result<[f64; 3]> {
    a.validate()?;
    c.validate()?;
    if c.c.len() != 3 {
        return Err(Error::WeightCount { expected: 3, got: c.c.len() });
    }
    let mut v = [0.0; 3];
    for i in 0..3 {
        v[i] = c.c[i] * table.f(PI - a.alpha[i])?;
    }
    Ok([v[0] - v[1], v[1] - v[2], v[2] - v[0]])
}

/// Angles of the classical weighted triple junction:
/// `sin a_1 / (c_2 + c_3) = sin a_2 / (c_1 + c_3) = sin a_3 / (c_1 + c_2)`,
/// `a_1 + a_2 + a_3 = 2 pi`.
///
/// The interface between phases `i` and `j` carries tension `c_i + c_j`; the
/// junction angle of phase `i` is `pi` minus the angle opposite the side
/// `c_j + c_h` in the triangle of tensions.
pub fn classical_weighted_angles(c: &Weights) -> Result<ConeAngles> {
    c.validate()?;
    if c.c.len() != 3 {
        return Err(Error::WeightCount { expected: 3, got: c.c.len() });
    }
    let w = &c.c;
    let side = |i: usize| w[(i + 1) % 3] + w[(i + 2) % 3];
    let mut alpha = [0.0; 3];
    for i in 0..3 {
        let (a, b, o) = (side((i + 1) % 3), side((i + 2) % 3), side(i));
        if !(o < a + b && a < o + b && b < o + a) {
            return Err(Error::DegenerateWeights(format!("tension triangle {o}, {a}, {b} is degenerate")));
        }
        let cos_opposite = ((a * a + b * b - o * o) / (2.0 * a * b)).clamp(-1.0, 1.0);
        alpha[i] = PI - cos_opposite.acos();
    }
    ConeAngles::new(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_at_zero_is_exactly_zero() {
        for s in [0.1, 0.5, 0.9] {
            assert_eq!(f_alpha(0.0, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_matches_radial_quadrature() {
        for (t, s) in [(0.3, 0.2), (1.5, 0.5), (2.9, 0.8), (1e-3, 0.5)] {
            let c: f64 = f64::cos(t);
            let f = |r: f64| r * (1.0 + r * r + 2.0 * r * c).powf(-1.0 - 0.5 * s);
            let near = integrate(f, 0.0, 2.0, 1e-13, 1e-12, 2000).unwrap().value;
            let g = |u: f64| u.powf(s - 1.0) * (u * u + 2.0 * u * c + 1.0).powf(-1.0 - 0.5 * s);
            let far = integrate(g, 0.0, 0.5, 1e-13, 1e-12, 2000).unwrap().value;
            let v = f_derivative_half(t, s);
            assert!((v - near - far).abs() < 1e-9 * v, "t={t} s={s}: {v} vs {}", near + far);
        }
    }

    #[test]
    fn f_is_increasing() {
        assert!(f_alpha(0.5, 0.5).unwrap() < f_alpha(1.0, 0.5).unwrap());
        let t = FTable::new(0.5).unwrap();
        assert!(t.value.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn f_domain() {
        assert!(matches!(f_alpha(PI, 0.5), Err(Error::AngleDomain(_))));
        assert!(f_alpha(-0.1, 0.5).is_err());
    }

    #[test]
    fn limit_s_to_one_matches_two_tan() {
        // at s = 1 the inner integral is 1/(1 + cos t), so F(a) = 2 tan(a/2)
        let v = f_alpha(1.0, 0.999_999).unwrap();
        assert!((v - 2.0 * (0.5f64).tan()).abs() < 1e-5, "{v}");
    }

    #[test]
    fn inverse_round_trip() {
        let v = f_alpha(1.2, 0.7).unwrap();
        assert!((f_inverse(v, 0.7).unwrap() - 1.2).abs() < 1e-8);
        assert_eq!(f_inverse(0.0, 0.7).unwrap(), 0.0);
        let big = f_alpha(PI / 3.0, 0.5).unwrap() * 2.0;
        assert!(f_inverse(big, 0.5).unwrap() > PI / 3.0);
    }

    #[test]
    fn inverse_beyond_table() {
        let t = FTable::new(0.5).unwrap();
        let v = t.value.last().unwrap() * 3.0;
        let a = t.inverse(v).unwrap();
        assert!(a < PI);
        // one ulp in alpha moves F by F'(alpha) * ulp near pi
        let slack = 2.0 * f_derivative_half(a, 0.5) * 4.0 * f64::EPSILON * PI;
        assert!((t.f(a).unwrap() - v).abs() < 1e-10 * v + slack);
    }

    #[test]
    fn equal_weights_give_120_degrees() {
        let c = Weights::new(vec![1.0; 3]).unwrap();
        let a = solve_weighted_cone(&c, 0.5).unwrap();
        for x in a.alpha {
            assert!((x - 2.0 * PI / 3.0).abs() < 1e-8);
        }
        let r = stationarity_residual(&a, &c, 0.5).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-7));
    }

    #[test]
    fn residual_signs() {
        let c = Weights::new(vec![1.0; 3]).unwrap();
        let a = ConeAngles::new([PI / 2.0, 0.75 * PI, 0.75 * PI]).unwrap();
        let r = stationarity_residual(&a, &c, 0.5).unwrap();
        let expect = f_alpha(PI / 2.0, 0.5).unwrap() - f_alpha(PI / 4.0, 0.5).unwrap();
        assert!(r[0] > 0.0 && (r[0] - expect).abs() < 1e-9);
        assert!((r.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn classical_angles() {
        let a = classical_weighted_angles(&Weights::new(vec![1.0; 3]).unwrap()).unwrap();
        assert!(a.alpha.iter().all(|x| (x - 2.0 * PI / 3.0).abs() < 1e-14));
        let b = classical_weighted_angles(&Weights::new(vec![1.0, 1.0, 2.0]).unwrap()).unwrap();
        let ratio: Vec<f64> = (0..3).map(|i| b.alpha[i].sin() / [3.0, 3.0, 2.0][i]).collect();
        assert!((ratio[0] - ratio[2]).abs() < 1e-14 && (ratio[1] - ratio[2]).abs() < 1e-14);
        let p = classical_weighted_angles(&Weights::new(vec![2.0, 1.0, 1.0]).unwrap()).unwrap();
        assert!((p.alpha[0] - b.alpha[2]).abs() < 1e-14 && (p.alpha[1] - b.alpha[0]).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(Weights::new(vec![1.0, 0.0, 1.0]).is_err());
        assert!(classical_weighted_angles(&Weights::new(vec![1.0, 1.0]).unwrap()).is_err());
    }
}
