//! Curve geometry on the plane and the Riemann sphere.
//!
//! Curves are closed polylines: the last vertex connects back to the first.
//! Analytic loops are represented by dense samples of an analytic image of the
//! unit circle, optionally remembering the map and the circle parameters so that
//! downstream code can re-evaluate the curve exactly.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::maps::ConformalTestMap;
use crate::{Error, Result, C64};

/// Minimum number of vertices of a [`JordanCurve`].
pub const MIN_VERTICES: usize = 8;

/// A point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpherePoint {
    Finite(C64),
    Infinity,
}

impl From<C64> for SpherePoint {
    fn from(z: C64) -> Self {
        SpherePoint::Finite(z)
    }
}

/// Chordal distance on the Riemann sphere, `2|p-q| / sqrt((1+|p|²)(1+|q|²))`.
pub fn spherical_distance(p: SpherePoint, q: SpherePoint) -> f64 {
    match (p, q) {
        (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
        (SpherePoint::Finite(z), SpherePoint::Infinity)
        | (SpherePoint::Infinity, SpherePoint::Finite(z)) => 2.0 / (1.0 + z.norm_sqr()).sqrt(),
        (SpherePoint::Finite(a), SpherePoint::Finite(b)) => {
            2.0 * (a - b).norm() / ((1.0 + a.norm_sqr()) * (1.0 + b.norm_sqr())).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Spherical,
}

impl Metric {
    fn dist(self, a: C64, b: C64) -> f64 {
        match self {
            Metric::Euclidean => (a - b).norm(),
            Metric::Spherical => spherical_distance(a.into(), b.into()),
        }
    }
}

/// Hausdorff distance between two finite point samples.
pub fn hausdorff_distance(k1: &[C64], k2: &[C64], metric: Metric) -> Result<f64> {
    if k1.is_empty() || k2.is_empty() {
        return Err(Error::EmptySet);
    }
    let directed = |a: &[C64], b: &[C64]| {
        a.iter()
            .map(|&p| b.iter().map(|&q| metric.dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(k1, k2).max(directed(k2, k1)))
}

/// Hausdorff distance between two closed polylines after refining every edge
/// to at most `max_edge`.
pub fn hausdorff_curves(a: &[C64], b: &[C64], metric: Metric, max_edge: f64) -> Result<f64> {
    hausdorff_distance(&refine_closed(a, max_edge), &refine_closed(b, max_edge), metric)
}

/// Inserts points on every edge of a closed polyline so that no edge exceeds `max_edge`.
pub fn refine_closed(pts: &[C64], max_edge: f64) -> Vec<C64> {
    let n = pts.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let k = ((b - a).norm() / max_edge).ceil().max(1.0) as usize;
        for j in 0..k {
            out.push(a + (b - a) * (j as f64 / k as f64));
        }
    }
    out
}

/// Twice the signed area of a closed polyline (positive for counter-clockwise).
pub fn signed_area2(pts: &[C64]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            a.re * b.im - a.im * b.re
        })
        .sum()
}

fn dist_to_segment(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

/// Winding number of a closed polyline around `p`, by summed turning angles.
pub fn winding_number_polyline(pts: &[C64], p: C64) -> Result<i32> {
    let n = pts.len();
    if n < 2 {
        return Err(Error::InvalidCurve("fewer than two vertices".into()));
    }
    let scale = pts.iter().map(|z| z.norm()).fold(p.norm(), f64::max) + 1.0;
    let tol = 1e-12 * scale;
    let mut total = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        if dist_to_segment(p, a, b) <= tol {
            return Err(Error::PointOnCurve);
        }
        total += ((b - p) / (a - p)).arg();
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

fn orient(a: C64, b: C64, c: C64) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

fn on_segment(a: C64, b: C64, p: C64) -> bool {
    p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
}

fn segments_intersect(a: C64, b: C64, c: C64, d: C64) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// True iff the closed polyline has no degenerate edge, no two non-adjacent
/// edges meet, and adjacent edges meet only at their shared vertex.
///
/// Edges are swept in order of their left endpoint; only pairs whose
/// x-extents overlap are tested.
pub fn is_simple(pts: &[C64]) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    if (0..n).any(|i| pts[i] == pts[(i + 1) % n]) {
        return false;
    }
    let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
    let mut order: Vec<usize> = (0..n).collect();
    let xmin = |i: usize| seg(i).0.re.min(seg(i).1.re);
    let xmax = |i: usize| seg(i).0.re.max(seg(i).1.re);
    order.sort_by(|&i, &j| xmin(i).total_cmp(&xmin(j)));
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let x0 = xmin(i);
        active.retain(|&j| xmax(j) >= x0);
        let (a, b) = seg(i);
        for &j in &active {
            let (c, d) = seg(j);
            let adjacent = (i + 1) % n == j || (j + 1) % n == i;
            if adjacent {
                // shared vertex is fine; overlap beyond it (fold-back) is not
                let (shared, other_i, other_j) = if (i + 1) % n == j { (b, a, d) } else { (a, b, c) };
                if n == 3 {
                    continue;
                }
                if orient(shared, other_i, other_j) == 0.0
                    && ((other_i - shared) * (other_j - shared).conj()).re > 0.0
                {
                    return false;
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
        active.push(i);
    }
    true
}

/// Provenance of an analytic curve: the image of the unit circle under `map`,
/// vertex `k` being `map(exp(i params[k]))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSource {
    pub map: ConformalTestMap,
    pub params: Vec<f64>,
}

/// A closed, simple, rooted polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanCurve {
    vertices: Vec<C64>,
    root: usize,
    source: Option<CurveSource>,
}

impl JordanCurve {
    pub fn new(vertices: Vec<C64>, root: usize) -> Result<Self> {
        if vertices.len() < MIN_VERTICES {
            return Err(Error::InvalidCurve(format!(
                "need at least {MIN_VERTICES} vertices, got {}",
                vertices.len()
            )));
        }
        if root >= vertices.len() {
            return Err(Error::InvalidCurve("root index out of range".into()));
        }
        if vertices.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidCurve("non-finite vertex".into()));
        }
        if !is_simple(&vertices) {
            return Err(Error::InvalidCurve("polyline is not simple".into()));
        }
        Ok(Self { vertices, root, source: None })
    }

    pub(crate) fn with_source(mut self, source: CurveSource) -> Self {
        debug_assert_eq!(source.params.len(), self.vertices.len());
        self.source = Some(source);
        self
    }

    /// Counter-clockwise circle of radius `r` about `center`, `n` vertices, root at angle 0.
    pub fn circle(center: C64, r: f64, n: usize) -> Self {
        let params: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
        let vertices = params.iter().map(|&t| center + C64::from_polar(r, t)).collect();
        let map = ConformalTestMap::affine(C64::new(r, 0.0), center);
        Self::new(vertices, 0)
            .expect("circle is simple")
            .with_source(CurveSource { map, params })
    }

    pub fn unit_circle(n: usize) -> Self {
        Self::circle(C64::new(0.0, 0.0), 1.0, n)
    }

    pub fn vertices(&self) -> &[C64] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn source(&self) -> Option<&CurveSource> {
        self.source.as_ref()
    }

    pub fn is_ccw(&self) -> bool {
        signed_area2(&self.vertices) > 0.0
    }

    /// Vertices listed starting from the root.
    pub fn rooted_vertices(&self) -> Vec<C64> {
        let n = self.len();
        (0..n).map(|k| self.vertices[(self.root + k) % n]).collect()
    }

    pub fn with_root(&self, root: usize) -> Result<Self> {
        if root >= self.len() {
            return Err(Error::InvalidCurve("root index out of range".into()));
        }
        Ok(Self { root, ..self.clone() })
    }

    /// Same point set traversed backwards; the root stays at the same point.
    pub fn reversed(&self) -> Self {
        let n = self.len();
        let vertices: Vec<C64> = self.vertices.iter().rev().copied().collect();
        let source = self.source.as_ref().map(|s| CurveSource {
            map: s.map.clone(),
            params: s.params.iter().rev().copied().collect(),
        });
        Self { vertices, root: n - 1 - self.root, source }
    }

    pub fn translated(&self, by: C64) -> Self {
        let vertices = self.vertices.iter().map(|z| z + by).collect();
        let source = self.source.as_ref().map(|s| CurveSource {
            map: s.map.then(&ConformalTestMap::affine(C64::new(1.0, 0.0), by)),
            params: s.params.clone(),
        });
        Self { vertices, root: self.root, source }
    }

    pub fn winding_number(&self, p: C64) -> Result<i32> {
        winding_number_polyline(&self.vertices, p)
    }

    /// Distance from `p` to the polyline.
    pub fn distance_to(&self, p: C64) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| dist_to_segment(p, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Parses the text curve format: one `re,im` vertex per line, optional
    /// header `# root=<index> orientation=<ccw|cw>`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut root = 0usize;
        let mut want_ccw: Option<bool> = None;
        let mut vertices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                for tok in header.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("root=") {
                        root = v.parse().map_err(|_| {
                            Error::InvalidCurve(format!("line {}: bad root", lineno + 1))
                        })?;
                    } else if let Some(v) = tok.strip_prefix("orientation=") {
                        want_ccw = Some(match v {
                            "ccw" => true,
                            "cw" => false,
                            _ => {
                                return Err(Error::InvalidCurve(format!(
                                    "line {}: bad orientation",
                                    lineno + 1
                                )))
                            }
                        });
                    }
                }
                continue;
            }
            let (re, im) = line
                .split_once(',')
                .ok_or_else(|| Error::InvalidCurve(format!("line {}: expected re,im", lineno + 1)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidCurve(format!("line {}: bad number", lineno + 1)))
            };
            vertices.push(C64::new(parse(re)?, parse(im)?));
        }
        let curve = Self::new(vertices, root)?;
        if let Some(ccw) = want_ccw {
            if ccw != curve.is_ccw() {
                return Err(Error::InvalidCurve("orientation header disagrees with signed area".into()));
            }
        }
        Ok(curve)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# root={} orientation={}\n",
            self.root,
            if self.is_ccw() { "ccw" } else { "cw" }
        );
        for z in &self.vertices {
            let _ = writeln!(s, "{:.17e},{:.17e}", z.re, z.im);
        }
        s
    }
}

/// Shape of an annular region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnulusKind {
    /// The round annulus `r < |z| < 1/r`.
    Round,
    /// The image of the round annulus under a conformal map.
    MapImage { map: ConformalTestMap },
    /// Region between two nested Jordan curves.
    BetweenCurves { inner: JordanCurve, outer: JordanCurve },
}

/// A doubly connected region together with a point of its bounded
/// complementary component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnularRegion {
    pub kind: AnnulusKind,
    pub r: f64,
    pub core_point: C64,
}

impl AnnularRegion {
    pub fn round(r: f64) -> Result<Self> {
        check_r(r)?;
        Ok(Self { kind: AnnulusKind::Round, r, core_point: C64::new(0.0, 0.0) })
    }

    /// `map(A_r)`; the core point is `map(0)` when the map is defined there.
    pub fn map_image(r: f64, map: ConformalTestMap) -> Result<Self> {
        check_r(r)?;
        map.check_injective_on_annulus(r)?;
        let core_point = map.eval_unchecked(C64::new(0.0, 0.0), 0);
        if !core_point.re.is_finite() || !core_point.im.is_finite() {
            return Err(Error::OutsideMapDomain);
        }
        Ok(Self { kind: AnnulusKind::MapImage { map }, r, core_point })
    }

    pub fn between_curves(inner: JordanCurve, outer: JordanCurve, core_point: C64) -> Result<Self> {
        if inner.winding_number(core_point)? == 0 || outer.winding_number(core_point)? == 0 {
            return Err(Error::InvalidArgument("core point must be enclosed by both curves".into()));
        }
        Ok(Self { kind: AnnulusKind::BetweenCurves { inner, outer }, r: 0.5, core_point })
    }

    /// Membership of `w` in the sub-region corresponding to `rho < |z| < 1/rho`
    /// (`rho >= r`). For `BetweenCurves`, `rho` is ignored.
    pub fn contains_scaled(&self, w: C64, rho: f64, hint: Option<C64>) -> Result<bool> {
        match &self.kind {
            AnnulusKind::Round => Ok(w.norm() > rho && w.norm() < 1.0 / rho),
            AnnulusKind::MapImage { map } => match map.invert_in_annulus(w, self.r, hint) {
                Ok(z) => Ok(z.norm() > rho && z.norm() < 1.0 / rho),
                Err(Error::OutsideMapDomain) => Ok(false),
                Err(e) => Err(e),
            },
            AnnulusKind::BetweenCurves { inner, outer } => {
                let inside_outer = match outer.winding_number(w) {
                    Ok(k) => k != 0,
                    Err(Error::PointOnCurve) => return Ok(false),
                    Err(e) => return Err(e),
                };
                let inside_inner = match inner.winding_number(w) {
                    Ok(k) => k != 0,
                    Err(Error::PointOnCurve) => return Ok(false),
                    Err(e) => return Err(e),
                };
                Ok(inside_outer && !inside_inner)
            }
        }
    }

    pub fn contains(&self, w: C64) -> Result<bool> {
        self.contains_scaled(w, self.r, None)
    }
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("annulus parameter r = {r} not in (0,1)")));
    }
    Ok(())
}

/// The admissible neighbourhood built from `base` by shrinking to `A_{1-epsilon}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub base: AnnularRegion,
    pub epsilon: f64,
}

impl NeighborhoodSpec {
    pub fn new(base: AnnularRegion, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0 - base.r) {
            return Err(Error::InvalidArgument(format!(
                "epsilon = {epsilon} not in (0, {})",
                1.0 - base.r
            )));
        }
        Ok(Self { base, epsilon })
    }

    pub fn inner_param(&self) -> f64 {
        1.0 - self.epsilon
    }
}

/// Whether `curve` is a non-contractible loop inside the neighbourhood region.
///
/// Edges are refined so that no sub-edge exceeds 1/64 of the curve diameter
/// before the pointwise test.
pub fn in_neighborhood(curve: &JordanCurve, spec: &NeighborhoodSpec) -> Result<bool> {
    let rho = spec.inner_param();
    let pts = refine_closed(curve.vertices(), curve.diameter() / 64.0);
    let mut hint: Option<C64> = None;
    for &w in &pts {
        let inside = match &spec.base.kind {
            AnnulusKind::MapImage { map } => match map.invert_in_annulus(w, spec.base.r, hint) {
                Ok(z) => {
                    hint = Some(z);
                    z.norm() > rho && z.norm() < 1.0 / rho
                }
                Err(Error::OutsideMapDomain) => false,
                Err(e) => return Err(e),
            },
            _ => spec.base.contains_scaled(w, rho, None)?,
        };
        if !inside {
            return Ok(false);
        }
    }
    match curve.winding_number(spec.base.core_point) {
        Ok(k) => Ok(k != 0),
        Err(Error::PointOnCurve) => Ok(false),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn chordal_distance_examples() {
        let o = SpherePoint::Finite(c(0.0, 0.0));
        assert_eq!(spherical_distance(o, o), 0.0);
        assert!((spherical_distance(o, SpherePoint::Infinity) - 2.0).abs() < 1e-15);
        let d = spherical_distance(c(1.0, 0.0).into(), c(-1.0, 0.0).into());
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn hausdorff_examples() {
        let k = vec![c(0.0, 0.0), c(1.0, 2.0)];
        assert_eq!(hausdorff_distance(&k, &k, Metric::Euclidean).unwrap(), 0.0);
        let d = hausdorff_distance(&[c(0.0, 0.0)], &[c(3.0, 0.0)], Metric::Euclidean).unwrap();
        assert_eq!(d, 3.0);
        assert_eq!(hausdorff_distance(&[], &k, Metric::Euclidean), Err(Error::EmptySet));
        let s1 = JordanCurve::unit_circle(512);
        let s_half = JordanCurve::circle(c(0.0, 0.0), 0.5, 512);
        let d = hausdorff_curves(s1.vertices(), s_half.vertices(), Metric::Euclidean, 0.01).unwrap();
        assert!((d - 0.5).abs() < 0.01);
    }

    #[test]
    fn winding_examples() {
        let s1 = JordanCurve::unit_circle(64);
        assert_eq!(s1.winding_number(c(0.0, 0.0)).unwrap(), 1);
        assert_eq!(s1.winding_number(c(2.0, 0.0)).unwrap(), 0);
        assert_eq!(s1.reversed().winding_number(c(0.0, 0.0)).unwrap(), -1);
        assert_eq!(s1.winding_number(c(1.0, 0.0)), Err(Error::PointOnCurve));
    }

    #[test]
    fn simplicity_examples() {
        assert!(is_simple(JordanCurve::unit_circle(64).vertices()));
        let bowtie = [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0)];
        assert!(!is_simple(&bowtie));
        let mut pts = JordanCurve::unit_circle(16).vertices().to_vec();
        pts.insert(5, pts[4]);
        assert!(!is_simple(&pts));
        // fold-back spike: adjacent edges overlapping
        let spike = [c(0.0, 0.0), c(2.0, 0.0), c(1.0, 0.0), c(1.0, 1.0)];
        assert!(!is_simple(&spike));
    }

    #[test]
    fn neighborhood_examples() {
        let spec = NeighborhoodSpec::new(AnnularRegion::round(0.5).unwrap(), 0.1).unwrap();
        assert!(in_neighborhood(&JordanCurve::unit_circle(256), &spec).unwrap());
        let small = JordanCurve::circle(c(0.95, 0.0), 0.05, 64);
        assert!(!in_neighborhood(&small, &spec).unwrap());
        let r085 = JordanCurve::circle(c(0.0, 0.0), 0.85, 256);
        assert!(!in_neighborhood(&r085, &spec).unwrap());
    }

    #[test]
    fn curve_text_round_trip() {
        let s = JordanCurve::unit_circle(16).with_root(3).unwrap();
        let back = JordanCurve::parse(&s.to_text()).unwrap();
        assert_eq!(back.vertices(), s.vertices());
        assert_eq!(back.root(), 3);
        assert!(JordanCurve::parse("# orientation=cw\n1,0\n0,1\n-1,0\n0,-1\n0.5,-0.9\n0.9,-0.5\n0.99,-0.1\n0.99,-0.05\n").is_err());
    }
}
