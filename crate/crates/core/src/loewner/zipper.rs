//! Geodesic zipper, forward traces and Dirichlet energy of driving functions.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Chordal driving function sampled at half-plane-capacity times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingFunction {
    t: Vec<f64>,
    w: Vec<f64>,
}

impl DrivingFunction {
    pub fn new(t: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if t.len() != w.len() || t.is_empty() {
            return Err(Error::InvalidArgument("need matching, non-empty t and W".into()));
        }
        if t[0] != 0.0 {
            return Err(Error::InvalidArgument("driving function must start at t = 0".into()));
        }
        if t.iter().chain(w.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
        if t.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::DegenerateTimeStep);
        }
        Ok(Self { t, w })
    }

    /// Samples `w(t)` on a uniform grid of `n` steps over `[0, total]`.
    pub fn from_fn(total: f64, n: usize, w: impl Fn(f64) -> f64) -> Result<Self> {
        let t: Vec<f64> = (0..=n).map(|i| total * i as f64 / n as f64).collect();
        let w = t.iter().map(|&s| w(s)).collect();
        Self::new(t, w)
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Piecewise-linear interpolation, constant beyond the last sample.
    pub fn at(&self, s: f64) -> f64 {
        let k = self.t.partition_point(|&x| x <= s);
        if k == 0 {
            return self.w[0];
        }
        if k == self.t.len() {
            return *self.w.last().unwrap();
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        self.w[k - 1] + (self.w[k] - self.w[k - 1]) * (s - t0) / (t1 - t0)
    }

    /// Two-column `t,W` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,W\n");
        for (t, w) in self.t.iter().zip(&self.w) {
            s.push_str(&format!("{t:.17e},{w:.17e}\n"));
        }
        s
    }
}

/// Which prevertex a point sitting exactly at the base of a slit goes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// The hydrodynamically normalized conformal map removing the hyperbolic
/// geodesic from `0` to `c ∈ ℍ` (the arc of the circle through `0` and `c`
/// orthogonal to `ℝ`).
///
/// It factors as a real Möbius map sending the arc to `[0, i/b]`, the slit
/// map `√(u² + 1/b²)` and a real Möbius map restoring `g(z) = z + O(1/z)`,
/// written here without the cancelling poles of the factors.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicMap {
    a: f64,
    b: f64,
    q: f64,
    c: C64,
}

impl GeodesicMap {
    pub fn new(c: C64) -> Self {
        let inv = 1.0 / c;
        Self { a: inv.re, b: -inv.im, q: inv.norm_sqr(), c }
    }

    /// Half-plane capacity of the arc.
    pub fn capacity(&self) -> f64 {
        (self.c.re * self.c.re + 2.0 * self.c.im * self.c.im) / 8.0
    }

    /// Image of the tip `c`.
    pub fn tip_image(&self) -> f64 {
        1.5 * self.c.re
    }

    /// `g(z)` for `z` in the closed upper half-plane off the arc; `side`
    /// resolves the base point `z = 0`.
    pub fn eval(&self, z: C64, side: Side) -> C64 {
        let (a, b, q) = (self.a, self.b, self.q);
        let d = 1.0 - a * z;
        // r = ±S·d where S = √(T² + 1/b²), T = z/d
        let mut r = (z * z + d * d / (b * b)).sqrt();
        if z.im > 0.0 {
            if (r * d.conj()).im < 0.0 {
                r = -r;
            }
        } else {
            let want = if z.re > 0.0 || (z.re == 0.0 && side == Side::Right) { 1.0 } else { -1.0 };
            // real case: sign(S) = sign(T) with S·d = r, T·d = z
            let sign_s = (r.re * d.re).signum();
            let sign_t = if z.re == 0.0 { want } else { (z.re * d.re).signum() };
            if sign_s != sign_t {
                r = -r;
            }
            r.im = 0.0;
        }
        let den = 1.0 - 2.0 * a * z;
        if den.norm() < 1e-6 {
            return self.eval_factored(r / d);
        }
        b * d * r / (q.sqrt() * den) - a * z * z / den + a / (2.0 * q)
    }

    /// The three-factor form, used near the removable singularity `1 − 2az = 0`.
    fn eval_factored(&self, s: C64) -> C64 {
        let (a, b, q) = (self.a, self.b, self.q);
        let root = q.sqrt();
        // p = S(T(∞)), α and β the next Laurent coefficients at ∞
        let p = -a.signum() * root / (a.abs() * b);
        let alpha = 1.0 / (a * a * a * p);
        let beta_over_alpha = (1.5 * a * a + b * b) / (a * q);
        alpha / (s - p) + beta_over_alpha
    }
}

/// Maps `pts` through `g` about the real point `base`, in parallel for long inputs.
pub(crate) fn map_points(g: &GeodesicMap, base: f64, pts: &mut [C64]) {
    use rayon::prelude::*;
    let f = |z: &mut C64| *z = base + g.eval(*z - base, Side::Right);
    if pts.len() > 512 {
        pts.par_iter_mut().for_each(f);
    } else {
        pts.iter_mut().for_each(f);
    }
}

/// Driving function of a polygonal arc in `ℍ` starting on `ℝ`, by removing
/// the vertices one at a time with geodesic slit maps.
pub fn extract_driving(arc: &[C64]) -> Result<DrivingFunction> {
    if arc.len() < 2 {
        return Err(Error::InvalidArgument("arc needs at least two points".into()));
    }
    let scale = arc.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if arc[0].im.abs() > 1e-12 * scale {
        return Err(Error::InvalidArgument("arc must start on the real line".into()));
    }
    if arc[1..].iter().any(|z| z.im <= 0.0) {
        return Err(Error::InvalidArgument("arc must lie in the open upper half-plane".into()));
    }
    if arc.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::InvalidArgument("consecutive points coincide".into()));
    }
    let mut pts = arc[1..].to_vec();
    let mut base = arc[0].re;
    let mut t = vec![0.0];
    let mut w = vec![base];
    for k in 0..pts.len() {
        let c = pts[k] - base;
        if !(c.im > 0.0) {
            return Err(Error::ZipperSelfIntersection);
        }
        let g = GeodesicMap::new(c);
        map_points(&g, base, &mut pts[k + 1..]);
        t.push(t.last().unwrap() + g.capacity());
        base += g.tip_image();
        w.push(base);
    }
    DrivingFunction::new(t, w)
}

/// Tip positions of the Loewner chain driven by `d`, on a time grid of
/// spacing at most `step`. The flow over each grid interval is the vertical
/// slit at the midpoint driving value. The first point is `W(0)`.
pub fn trace_from_driving(d: &DrivingFunction, step: f64) -> Result<Vec<C64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let total = d.total_time();
    let n = ((total / step).ceil() as usize).max(1);
    let grid: Vec<f64> = (0..=n).map(|i| total * i as f64 / n as f64).collect();
    let slits: Vec<(f64, f64)> = grid
        .windows(2)
        .map(|g| (d.at(0.5 * (g[0] + g[1])), g[1] - g[0]))
        .collect();
    let mut out = Vec::with_capacity(n + 1);
    out.push(C64::new(d.values()[0], 0.0));
    for j in 0..n {
        let (wj, dt) = slits[j];
        let mut z = C64::new(wj, 2.0 * dt.sqrt());
        for &(wi, dti) in slits[..j].iter().rev() {
            let u = z - wi;
            let mut r = (u * u - 4.0 * dti).sqrt();
            if r.im < 0.0 {
                r = -r;
            }
            z = wi + r;
        }
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidArgument("trace overflow".into()));
        }
        out.push(z);
    }
    Ok(out)
}

/// `½ Σ (ΔW)² / Δt`, the energy of the piecewise-linear interpolant.
pub fn dirichlet_energy(d: &DrivingFunction) -> Result<f64> {
    if d.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    Ok(energy_terms(d.times(), d.values()).sum())
}

pub(crate) fn energy_terms<'a>(t: &'a [f64], w: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    t.windows(2).zip(w.windows(2)).map(|(t, w)| 0.5 * (w[1] - w[0]).powi(2) / (t[1] - t[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn geodesic_map_normalization() {
        for c in [C64::new(0.3, 1.0), C64::new(-1.2, 0.4), C64::new(0.0, 2.0), C64::new(1e-9, 0.5)] {
            let g = GeodesicMap::new(c);
            assert!((g.eval(c, Side::Right) - g.tip_image()).norm() < 1e-6);
            let big = C64::new(3e3, 4e3);
            let hcap = ((g.eval(big, Side::Right) - big) * big).re / 2.0;
            assert!((hcap - g.capacity()).abs() < 1e-3 * g.capacity().max(1e-3), "{hcap} {}", g.capacity());
            // points of the arc go to the real line, from both sides
            let center = C64::new(c.norm_sqr() / (2.0 * c.re), 0.0);
            if c.re.abs() > 1e-6 {
                let mid = center + (c - center) * ((-center) / (c - center)).sqrt().sqrt();
                let w = g.eval(mid + C64::new(0.0, 1e-9), Side::Right);
                assert!(w.im.abs() < 1e-3, "{w}");
            }
            assert!(g.eval(C64::new(0.7, 0.1), Side::Right).im > 0.0);
            let l = g.eval(C64::new(0.0, 0.0), Side::Left).re;
            let r = g.eval(C64::new(0.0, 0.0), Side::Right).re;
            assert!(l < g.tip_image() && g.tip_image() < r);
        }
    }

    #[test]
    fn vertical_slit_driving() {
        let arc: Vec<C64> = (0..64).map(|k| C64::new(0.0, k as f64 / 63.0)).collect();
        let d = extract_driving(&arc).unwrap();
        assert!(d.values().iter().all(|w| w.abs() < 1e-3));
        assert!((d.total_time() - 0.25).abs() < 1e-3);
        let scaled: Vec<C64> = arc.iter().map(|z| z * 2.0).collect();
        let d2 = extract_driving(&scaled).unwrap();
        assert!((d2.total_time() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn forward_trace_examples() {
        let t = 1.5;
        let zero = DrivingFunction::from_fn(t, 10, |_| 0.0).unwrap();
        let tip = *trace_from_driving(&zero, 0.01).unwrap().last().unwrap();
        assert!((tip - C64::new(0.0, 2.0 * t.sqrt())).norm() < 1e-9);
        let three = DrivingFunction::from_fn(t, 10, |_| 3.0).unwrap();
        for z in trace_from_driving(&three, 0.01).unwrap() {
            assert!((z.re - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_trace_converges() {
        let d = DrivingFunction::from_fn(1.0, 4000, |s| 0.5 * (4.0 * s).sin()).unwrap();
        let tip = |h: f64| *trace_from_driving(&d, h).unwrap().last().unwrap();
        let (a, b, c) = (tip(0.01), tip(0.005), tip(0.0025));
        assert!((b - c).norm() <= 0.6 * (a - b).norm() + 1e-12, "{} {}", (a - b).norm(), (b - c).norm());
    }

    #[test]
    fn extract_inverts_trace() {
        let d = DrivingFunction::from_fn(1.0, 4000, |s| 0.5 * (4.0 * s).sin()).unwrap();
        let residual = |h: f64| {
            let arc = trace_from_driving(&d, h).unwrap();
            let e = extract_driving(&arc).unwrap();
            e.times().iter().zip(e.values()).map(|(t, w)| (w - d.at(*t)).abs()).fold(0.0, f64::max)
        };
        let (r1, r2) = (residual(0.004), residual(0.001));
        assert!(r2 < 0.02 && r2 < r1, "{r1} {r2}");
    }

    fn trace_angle(k: f64) -> f64 {
        let d = DrivingFunction::from_fn(1.0, 2000, |s| k * s.sqrt()).unwrap();
        trace_from_driving(&d, 1e-3).unwrap().last().unwrap().arg()
    }

    #[test]
    fn straight_segment_at_angle() {
        let alpha = 1.0 / 3.0;
        let dir = C64::from_polar(1.0, alpha * PI);
        let arc: Vec<C64> = (0..400).map(|k| dir * (k as f64 / 399.0)).collect();
        let d = extract_driving(&arc).unwrap();
        // least-squares fit of W = k √t over the later half
        let (mut num, mut den) = (0.0, 0.0);
        for (t, w) in d.times().iter().zip(d.values()).skip(d.len() / 2) {
            num += w * t.sqrt();
            den += t;
        }
        let k_fit = num / den;
        // forward oracle: bisect on the trace angle
        let (mut lo, mut hi) = (0.0, 3.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if trace_angle(mid) > alpha * PI {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k_oracle = 0.5 * (lo + hi);
        assert!((k_fit - k_oracle).abs() < 0.05, "{k_fit} vs {k_oracle}");
    }

    #[test]
    fn energy_examples() {
        let zero = DrivingFunction::from_fn(2.0, 10, |_| 0.0).unwrap();
        assert_eq!(dirichlet_energy(&zero).unwrap(), 0.0);
        let t: Vec<f64> = vec![0.0, 0.1, 0.7, 1.3, 2.0];
        let w: Vec<f64> = t.iter().map(|s| 1.7 * s).collect();
        let lin = DrivingFunction::new(t, w).unwrap();
        assert!((dirichlet_energy(&lin).unwrap() - 1.7f64.powi(2)).abs() < 1e-12);
        let sin = DrivingFunction::from_fn(2.0 * PI, 4096, f64::sin).unwrap();
        assert!((dirichlet_energy(&sin).unwrap() - PI / 2.0).abs() < 1e-4);
        assert_eq!(DrivingFunction::new(vec![0.0, 1.0, 1.0], vec![0.0; 3]), Err(Error::DegenerateTimeStep));
    }
}
