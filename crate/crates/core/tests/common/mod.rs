//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the quadrature paths it is used to check.
#![allow(dead_code)]

/// 4D midpoint Riemann sum of `|x-y|^{-(2+s)}` over two unit cells whose
/// centers differ by `(u, v)`, each cell split into `m x m` sub-cells.
/// Evaluated in the difference variable with exact multiplicities.
pub fn riemann_cells(u: f64, v: f64, s: f64, m: usize) -> f64 {
    let hp = 1.0 / m as f64;
    let e = -(2.0 + s) / 2.0;
    let mi = m as i64;
    let mut total = 0.0;
    for k in -(mi - 1)..mi {
        let ck = (mi - k.abs()) as f64;
        let z1 = u + k as f64 * hp;
        let mut row = 0.0;
        for l in -(mi - 1)..mi {
            let cl = (mi - l.abs()) as f64;
            let z2 = v + l as f64 * hp;
            row += cl * (z1 * z1 + z2 * z2).powf(e);
        }
        total += ck * row;
    }
    total * hp.powi(4)
}

/// Richardson extrapolation of `riemann_cells` over `m = 4, 8, ..., 2^levels`
/// eliminating the error exponents `1 - s + j` and `2j` in increasing order.
pub fn riemann_richardson(u: f64, v: f64, s: f64, levels: u32) -> f64 {
    let mut vals: Vec<f64> = (2..=levels).map(|i| riemann_cells(u, v, s, 1usize << i)).collect();
    let mut exps: Vec<f64> = (0..12).map(|j| 1.0 - s + j as f64).chain((1..7).map(|j| 2.0 * j as f64)).collect();
    exps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    exps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    for p in exps {
        if vals.len() == 1 {
            break;
        }
        let f = 2f64.powf(p);
        vals = vals.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
    }
    vals[vals.len() - 1]
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// `int_K |x - y|^{-(2+s)} dy` for `x = (1, 0)` and `K` the sector with
/// vertex 0, opening `2 alpha`, bisected by the negative x-axis, computed
/// in polar coordinates centered at `x`: the radial part is exact and the
/// angular part uses brute-force composite Simpson between the kinks.
pub fn sector_oracle(alpha: f64, s: f64, panels: usize) -> f64 {
    use std::f64::consts::PI;
    // boundary rays of K: directions pi - alpha and pi + alpha from the origin
    let edges = [PI - alpha, PI + alpha];
    let radial = |th: f64| -> f64 {
        let d = (th.cos(), th.sin());
        // parameter intervals of x + t d inside K, via crossings with the edge rays
        let mut ts = vec![];
        for a in edges {
            let e = (a.cos(), a.sin());
            // (1,0) + t d = u e
            let den = d.0 * e.1 - d.1 * e.0;
            if den.abs() < 1e-300 {
                continue;
            }
            let t = -(e.1) / den;
            let u = -(d.1) / den;
            if t > 0.0 && u >= 0.0 {
                ts.push(t);
            }
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let inside = |t: f64| {
            let p = (1.0 + t * d.0, t * d.1);
            let ang = p.1.atan2(p.0).rem_euclid(2.0 * PI);
            (ang - PI).abs() < alpha
        };
        let mut lo = 0.0;
        let mut acc = 0.0;
        for i in 0..=ts.len() {
            let hi = if i < ts.len() { ts[i] } else { f64::INFINITY };
            let probe = if hi.is_finite() { 0.5 * (lo + hi) } else { lo + 1.0 };
            if inside(probe) {
                acc += (lo.powf(-s) - if hi.is_finite() { hi.powf(-s) } else { 0.0 }) / s;
            }
            lo = hi;
        }
        acc
    };
    // kinks: direction toward the vertex (pi) and directions parallel to the edges
    let mut kinks = vec![0.0, PI, 2.0 * PI, (PI - alpha).rem_euclid(2.0 * PI), (PI + alpha).rem_euclid(2.0 * PI)];
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kinks.dedup();
    kinks.windows(2).map(|w| simpson(radial, w[0], w[1], panels)).sum()
}

/// `B(1/2, (1+s)/2) = int_R (1 + t^2)^{-(2+s)/2} dt` by Simpson after `t = tan(phi)`.
pub fn line_constant(s: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    simpson(|phi: f64| phi.cos().powf(s), -FRAC_PI_2, FRAC_PI_2, 20000)
}
