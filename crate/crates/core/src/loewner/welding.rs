//! Interior and exterior Riemann maps of a Jordan curve.
//!
//! The numerical route zips the whole curve open: after the edge `[v₀, v₁]`
//! is opened and the remaining vertices are removed by geodesic slit maps,
//! `z ↦ (z − c)²` straightens the last edge, leaving the curve on `ℝ` with
//! the two complementary components on either side. Tracking an interior
//! point and `∞` then gives both boundary correspondences.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::zipper::{map_points, GeodesicMap, Side};
use crate::geometry::JordanCurve;
use crate::maps::ConformalTestMap;
use crate::{Error, Result, C64};

/// `f: 𝔻 → Ω` with `f(0) = center` and `f′(0) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorMap {
    /// `f(e^{2πij/N})`.
    pub boundary: Vec<C64>,
    /// Taylor coefficients at 0.
    pub coeffs: Vec<C64>,
    pub derivative_at_zero: f64,
    pub exact: Option<ConformalTestMap>,
}

/// `g: 𝔻* → Ω*` with `g(∞) = ∞` and `g′(∞) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorMap {
    /// `g(e^{2πij/N})`.
    pub boundary: Vec<C64>,
    /// Laurent coefficients `b₁, b₀, b₋₁, …` of `g(ζ) = Σ b_k ζ^k`.
    pub coeffs: Vec<C64>,
    pub derivative_at_infinity: f64,
    pub exact: Option<ConformalTestMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    Exact,
    Zipper,
    /// Exact interior, zipper exterior.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPair {
    pub interior: InteriorMap,
    pub exterior: ExteriorMap,
    pub source: MapSource,
    /// Prevertex angles of the curve vertices, when computed by the zipper.
    pub interior_angles: Vec<f64>,
    pub exterior_angles: Vec<f64>,
}

impl InteriorMap {
    fn from_boundary(boundary: Vec<C64>, derivative_at_zero: f64) -> Self {
        let n = boundary.len();
        let spec = fft(&boundary, false);
        let coeffs = spec[..n / 2].iter().map(|c| c / n as f64).collect();
        Self { boundary, coeffs, derivative_at_zero, exact: None }
    }

    /// `[f, f′, f″]` at `z` in the open disk.
    pub fn jet(&self, z: C64) -> [C64; 3] {
        match &self.exact {
            Some(m) => m.jet(z),
            None => taylor_jet(&self.coeffs, z),
        }
    }

    /// Largest relative size of the negative-frequency part of the boundary data.
    pub fn analyticity_defect(&self) -> f64 {
        let n = self.boundary.len();
        if n == 0 {
            return 0.0;
        }
        let spec = fft(&self.boundary, false);
        let neg = spec[n / 2 + 1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
        neg / spec[1].norm().max(1e-300)
    }
}

impl ExteriorMap {
    fn from_boundary(boundary: Vec<C64>, derivative_at_infinity: f64) -> Self {
        let n = boundary.len();
        let spec = fft(&boundary, false);
        // b₁, b₀, b₋₁, …
        let mut coeffs = vec![spec[1] / n as f64, spec[0] / n as f64];
        coeffs.extend((1..n / 2).map(|k| spec[n - k] / n as f64));
        Self { boundary, coeffs, derivative_at_infinity, exact: None }
    }

    /// `[g, g′, g″]` at `|ζ| > 1`.
    pub fn jet(&self, zeta: C64) -> [C64; 3] {
        match &self.exact {
            Some(m) => m.jet(zeta),
            None => laurent_jet(&self.coeffs, zeta),
        }
    }
}

fn fft(data: &[C64], inverse: bool) -> Vec<C64> {
    let mut planner = FftPlanner::new();
    let plan = if inverse { planner.plan_fft_inverse(data.len()) } else { planner.plan_fft_forward(data.len()) };
    let mut buf = data.to_vec();
    plan.process(&mut buf);
    buf
}

fn taylor_jet(a: &[C64], z: C64) -> [C64; 3] {
    let (mut f, mut d1, mut d2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for (k, c) in a.iter().enumerate().rev() {
        let k = k as f64;
        d2 = d2 * z + c * k * (k - 1.0);
        d1 = d1 * z + c * k;
        f = f * z + c;
    }
    // d1 and d2 were accumulated with one and two spare powers of z
    let d1 = if z == C64::new(0.0, 0.0) { a.get(1).copied().unwrap_or_default() } else { d1 / z };
    let d2 = if z == C64::new(0.0, 0.0) { a.get(2).copied().unwrap_or_default() * 2.0 } else { d2 / (z * z) };
    [f, d1, d2]
}

/// Jet of `b₁ ζ + b₀ + Σ_{k≥1} b₋ₖ ζ^{−k}`.
fn laurent_jet(b: &[C64], zeta: C64) -> [C64; 3] {
    let w = 1.0 / zeta;
    let tail = &b[2..];
    // h(w) = Σ b₋ₖ w^k
    let mut ext = vec![C64::new(0.0, 0.0)];
    ext.extend_from_slice(tail);
    let [h, h1, h2] = taylor_jet(&ext, w);
    // d/dζ = −w² d/dw
    let g = b[0] * zeta + b[1] + h;
    let g1 = b[0] - w * w * h1;
    let g2 = w * w * w * (2.0 * h1 + w * h2);
    [g, g1, g2]
}

/// Prevertex data of the zipper run.
struct Welding {
    /// Interior prevertex angles, one per vertex.
    theta: Vec<f64>,
    psi: Vec<f64>,
    f_prime0: f64,
    g_prime_inf: f64,
}

fn weld(verts: &[C64], center: C64) -> Result<Welding> {
    let n = verts.len();
    let fail = |why: &str| Error::MapConstruction(format!("map construction failed: {why}"));
    let (v0, v1) = (verts[0], verts[1]);
    let open = |z: C64| C64::i() * ((z - v1) / (z - v0)).sqrt();
    let scale = verts.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
    let dist = verts.iter().map(|z| (z - center).norm()).fold(f64::INFINITY, f64::min);
    let delta = 1e-5 * dist;
    let big = 1e4 * scale;
    let mut pts: Vec<C64> = verts[2..].iter().map(|&z| open(z)).collect();
    // interior point ± δ, then ∞ and ±big
    let mut special = vec![
        open(center),
        open(center + delta),
        open(center - delta),
        C64::i(),
        open(center + big),
        open(center - big),
    ];
    let mut left = vec![0.0; n];
    let mut right = vec![0.0; n];
    let mut base = 0.0;
    for k in 0..pts.len() {
        let c = pts[k] - base;
        if !(c.im > 0.0) || !c.re.is_finite() {
            return Err(fail(&format!("vertex {} left the half-plane", k + 2)));
        }
        let g = GeodesicMap::new(c);
        map_points(&g, base, &mut pts[k + 1..]);
        map_points(&g, base, &mut special);
        // vertex k + 1 sits at the base and splits
        let j = k + 1;
        for i in 1..j {
            left[i] = base + g.eval(C64::new(left[i] - base, 0.0), Side::Left).re;
            right[i] = base + g.eval(C64::new(right[i] - base, 0.0), Side::Right).re;
        }
        left[j] = base + g.eval(C64::new(0.0, 0.0), Side::Left).re;
        right[j] = base + g.eval(C64::new(0.0, 0.0), Side::Right).re;
        base += g.tip_image();
    }
    // straighten the last edge; vertex n − 1 sits at the base
    left[n - 1] = base;
    right[n - 1] = base;
    let sq = |z: C64| (z - base) * (z - base);
    let special: Vec<C64> = special.into_iter().map(sq).collect();
    let lx: Vec<f64> = left.iter().map(|x| (x - base).powi(2)).collect();
    let rx: Vec<f64> = right.iter().map(|x| (x - base).powi(2)).collect();
    let (p, q) = (special[0], special[3]);
    if p.im * q.im >= 0.0 {
        return Err(fail("interior point and infinity not separated"));
    }
    // right copies bound the upper half-plane
    let (inner_x, outer_x) = if p.im > 0.0 { (&rx, &lx) } else { (&lx, &rx) };
    let phi_prime0 = (special[1] - special[2]) / (2.0 * delta);
    let kappa = (special[4] - special[5]) * big / 2.0;
    // disk coordinates: C(w) = (w − p)/(w − p̄), E(w) = (w − q̄)/(w − q)
    let lambda = phi_prime0 / (p - p.conj());
    let l_inf = (q - q.conj()) / kappa;
    let angle = |x: Option<f64>, a: C64, b: C64, rot: f64| -> f64 {
        let w = match x {
            Some(x) => (C64::new(x, 0.0) - a) / (C64::new(x, 0.0) - b),
            None => C64::new(1.0, 0.0),
        };
        w.arg() - rot
    };
    let mut theta = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    for j in 0..n {
        let x = if j == 0 { None } else { Some(j) };
        theta.push(angle(x.map(|j| inner_x[j]), p, p.conj(), lambda.arg()));
        psi.push(angle(x.map(|j| outer_x[j]), q.conj(), q, l_inf.arg()));
    }
    Ok(Welding { theta, psi, f_prime0: 1.0 / lambda.norm(), g_prime_inf: 1.0 / l_inf.norm() })
}

/// Catmull–Rom interpolation through four consecutive samples at `u ∈ [0, 1]`.
fn catmull<T>(p0: T, p1: T, p2: T, p3: T, u: f64) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let (u2, u3) = (u * u, u * u * u);
    let m1 = (p2 - p0) * 0.5;
    let m2 = (p3 - p1) * 0.5;
    p1 * (2.0 * u3 - 3.0 * u2 + 1.0) + m1 * (u3 - 2.0 * u2 + u) + p2 * (-2.0 * u3 + 3.0 * u2) + m2 * (u3 - u2)
}

/// Resamples the boundary correspondence `angle_j ↦ verts_j` at `e^{2πim/N}`.
fn uniform_boundary(verts: &[C64], angles: &[f64], samples: usize) -> Result<Vec<C64>> {
    let n = verts.len();
    let mut theta = vec![angles[0]];
    for j in 1..n {
        let mut d = angles[j] - angles[j - 1];
        d -= 2.0 * PI * (d / (2.0 * PI)).round();
        theta.push(theta[j - 1] + d);
    }
    let turn = theta[n - 1] - theta[0] + {
        let mut d = angles[0] - angles[n - 1];
        d -= 2.0 * PI * (d / (2.0 * PI)).round();
        d
    };
    let (verts, theta): (Vec<C64>, Vec<f64>) = if turn < 0.0 {
        (verts.iter().rev().copied().collect(), theta.iter().rev().copied().collect())
    } else {
        (verts.to_vec(), theta)
    };
    if (turn.abs() - 2.0 * PI).abs() > 1e-6 || theta.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::MapConstruction("map construction failed: prevertices out of order".into()));
    }
    // periodic extension
    let th = |j: isize| -> f64 {
        let k = j.rem_euclid(n as isize) as usize;
        theta[k] + 2.0 * PI * (j.div_euclid(n as isize)) as f64
    };
    let vz = |j: isize| verts[j.rem_euclid(n as isize) as usize];
    let t0 = theta[0];
    let mut out = Vec::with_capacity(samples);
    let mut j: isize = 0;
    for m in 0..samples {
        let target_abs = 2.0 * PI * m as f64 / samples as f64;
        let target = t0 + (target_abs - t0).rem_euclid(2.0 * PI);
        while th(j + 1) <= target {
            j += 1;
        }
        while th(j) > target {
            j -= 1;
        }
        let f = |u: f64| catmull(th(j - 1), th(j), th(j + 1), th(j + 2), u) - target;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(catmull(vz(j - 1), vz(j), vz(j + 1), vz(j + 2), 0.5 * (lo + hi)));
    }
    Ok(out)
}

/// Number of boundary samples for a curve with `n` vertices.
fn sample_count(n: usize) -> usize {
    (2 * n).next_power_of_two().max(512)
}

/// The point the interior map sends 0 to: the origin when enclosed, else the
/// vertex centroid.
fn interior_center(curve: &JordanCurve) -> Result<C64> {
    let origin = C64::new(0.0, 0.0);
    if curve.winding_number(origin).map(|k| k != 0).unwrap_or(false) {
        return Ok(origin);
    }
    let v = curve.vertices();
    let centroid = v.iter().sum::<C64>() / v.len() as f64;
    match curve.winding_number(centroid) {
        Ok(k) if k != 0 => Ok(centroid),
        _ => Err(Error::InvalidArgument("translate the curve so that 0 is enclosed".into())),
    }
}

/// `lim g(R)/R` from `R ∈ {10, 20, 40}` with two Richardson steps.
pub fn derivative_at_infinity(g: &ExteriorMap) -> f64 {
    let s = |r: f64| g.jet(C64::new(r, 0.0))[0] / r;
    let (a, b, c) = (s(10.0), s(20.0), s(40.0));
    let ab = 2.0 * b - a;
    let bc = 2.0 * c - b;
    ((4.0 * bc - ab) / 3.0).norm()
}

/// Interior and exterior maps by the zipper.
pub fn riemann_maps(curve: &JordanCurve) -> Result<MapPair> {
    let center = interior_center(curve)?;
    let verts = curve.vertices();
    let w = weld(verts, center)?;
    let samples = sample_count(verts.len());
    let interior = InteriorMap::from_boundary(uniform_boundary(verts, &w.theta, samples)?, w.f_prime0);
    let mut exterior = ExteriorMap::from_boundary(uniform_boundary(verts, &w.psi, samples)?, w.g_prime_inf);
    exterior.derivative_at_infinity = derivative_at_infinity(&exterior);
    Ok(MapPair {
        interior,
        exterior,
        source: MapSource::Zipper,
        interior_angles: w.theta,
        exterior_angles: w.psi,
    })
}

/// Circle through three points, as `(center, radius)`.
fn circumcircle(a: C64, b: C64, c: C64) -> (C64, f64) {
    let (b, c2) = (b - a, c - a);
    let d = 2.0 * (b.re * c2.im - b.im * c2.re);
    let ux = (c2.im * b.norm_sqr() - b.im * c2.norm_sqr()) / d;
    let uy = (b.re * c2.norm_sqr() - c2.re * b.norm_sqr()) / d;
    let u = C64::new(ux, uy);
    (a + u, u.norm())
}

/// Map pair built from the analytic source `h` of a curve `h(S¹)`: the
/// interior map is `h` after a disk automorphism; the exterior map is exact
/// for circles and computed by the zipper otherwise.
pub fn exact_map_pair(curve: &JordanCurve) -> Result<Option<MapPair>> {
    let Some(src) = curve.source() else { return Ok(None) };
    let h = &src.map;
    let circle_of = |h: &ConformalTestMap| {
        circumcircle(
            h.eval_unchecked(C64::new(1.0, 0.0), 0),
            h.eval_unchecked(C64::new(0.0, 1.0), 0),
            h.eval_unchecked(C64::new(-1.0, 0.0), 0),
        )
    };
    // Anchored at the centre, the interior map of a round circle is affine.
    let center = if h.is_mobius() { circle_of(h).0 } else { interior_center(curve)? };
    let w0 = h.invert(center, Some(C64::new(0.0, 0.0)))?;
    if w0.norm() >= 1.0 {
        return Err(Error::MapConstruction("interior point not in the image of the disk".into()));
    }
    let rot = C64::from_polar(1.0, -h.eval_unchecked(w0, 1).arg());
    let auto = ConformalTestMap::mobius(rot, w0, w0.conj() * rot, C64::new(1.0, 0.0))?;
    let f = auto.then(h);
    let samples = sample_count(curve.len());
    let circle: Vec<C64> = (0..samples).map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / samples as f64)).collect();
    let mut interior =
        InteriorMap::from_boundary(circle.iter().map(|z| f.eval_unchecked(*z, 0)).collect(), f.jet(C64::new(0.0, 0.0))[1].norm());
    interior.exact = Some(f);
    let (exterior, source, angles) = if h.is_mobius() {
        let (c, r) = circle_of(h);
        let g = ConformalTestMap::affine(C64::new(r, 0.0), c);
        let mut e = ExteriorMap::from_boundary(circle.iter().map(|z| g.eval_unchecked(*z, 0)).collect(), r);
        e.exact = Some(g);
        (e, MapSource::Exact, Vec::new())
    } else {
        let w = weld(curve.vertices(), center)?;
        let mut e = ExteriorMap::from_boundary(uniform_boundary(curve.vertices(), &w.psi, samples)?, w.g_prime_inf);
        e.derivative_at_infinity = derivative_at_infinity(&e);
        (e, MapSource::Mixed, w.psi)
    };
    Ok(Some(MapPair { interior, exterior, source, interior_angles: Vec::new(), exterior_angles: angles }))
}
