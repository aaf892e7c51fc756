//! Geometric set descriptions rasterized onto `h ℤ²`.

use serde::{Deserialize, Serialize};

use super::domain::{inner_boundary, outer_layer, Site, SiteSet};
use crate::geometry::winding_number_polyline;
use crate::maps::ConformalTestMap;
use crate::{Error, Result, C64};

/// A planar set given by a membership predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetSpec {
    /// Closed disk.
    Disk { center: C64, radius: f64 },
    /// Closed axis-parallel square of half side `half`.
    Square { center: C64, half: f64 },
    /// Round annulus `r < |z| < 1/r`.
    Annulus { r: f64 },
    /// Points within `thickness` of the segment `[from, to]`.
    Segment { from: C64, to: C64, thickness: f64 },
    /// Points within `thickness` of a closed polyline.
    CurveTube { curve: Vec<C64>, thickness: f64 },
    /// Closed region bounded by a closed polyline.
    Interior { curve: Vec<C64> },
    Union(Vec<SetSpec>),
    /// `map(of)`.
    Image { map: ConformalTestMap, of: Box<SetSpec> },
    /// Complement of a bounded set.
    Complement(Box<SetSpec>),
}

fn dist_segment(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

fn polyline_dist(p: C64, curve: &[C64]) -> f64 {
    let n = curve.len();
    (0..n)
        .map(|i| dist_segment(p, curve[i], curve[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

impl SetSpec {
    pub fn disk(center: C64, radius: f64) -> Self {
        SetSpec::Disk { center, radius }
    }

    pub fn complement(self) -> Self {
        SetSpec::Complement(Box::new(self))
    }

    pub fn image(self, map: &ConformalTestMap) -> Self {
        SetSpec::Image { map: map.clone(), of: Box::new(self) }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, SetSpec::Complement(_))
    }

    /// Membership; tube-like sets are widened to at least `min_width` so that
    /// they rasterize to connected site sets.
    pub fn contains(&self, z: C64, min_width: f64) -> bool {
        match self {
            SetSpec::Disk { center, radius } => (z - center).norm() <= *radius,
            SetSpec::Square { center, half } => {
                (z.re - center.re).abs() <= *half && (z.im - center.im).abs() <= *half
            }
            SetSpec::Annulus { r } => z.norm() > *r && z.norm() < 1.0 / r,
            SetSpec::Segment { from, to, thickness } => dist_segment(z, *from, *to) <= thickness.max(min_width),
            SetSpec::CurveTube { curve, thickness } => polyline_dist(z, curve) <= thickness.max(min_width),
            SetSpec::Interior { curve } => match winding_number_polyline(curve, z) {
                Ok(k) => k != 0,
                Err(_) => true,
            },
            SetSpec::Union(parts) => parts.iter().any(|p| p.contains(z, min_width)),
            SetSpec::Image { map, of } => match map.invert(z, None) {
                // a thin preimage tube is widened by the local inverse scale
                Ok(w) => {
                    let scale = map.eval_unchecked(w, 1).norm().max(1e-12);
                    of.contains(w, min_width / scale)
                }
                Err(_) => false,
            },
            SetSpec::Complement(inner) => !inner.contains(z, min_width),
        }
    }

    /// Bounding box `(lo, hi)` of a bounded set (of the complemented set for complements).
    pub fn bbox(&self) -> (C64, C64) {
        match self {
            SetSpec::Disk { center, radius } => (center - C64::new(*radius, *radius), center + C64::new(*radius, *radius)),
            SetSpec::Square { center, half } => (center - C64::new(*half, *half), center + C64::new(*half, *half)),
            SetSpec::Annulus { r } => (C64::new(-1.0 / r, -1.0 / r), C64::new(1.0 / r, 1.0 / r)),
            SetSpec::Segment { from, to, thickness } => {
                let t = C64::new(*thickness, *thickness);
                (
                    C64::new(from.re.min(to.re), from.im.min(to.im)) - t,
                    C64::new(from.re.max(to.re), from.im.max(to.im)) + t,
                )
            }
            SetSpec::CurveTube { curve, thickness } => {
                let (lo, hi) = points_bbox(curve);
                let t = C64::new(*thickness, *thickness);
                (lo - t, hi + t)
            }
            SetSpec::Interior { curve } => points_bbox(curve),
            SetSpec::Union(parts) => {
                let boxes: Vec<(C64, C64)> = parts.iter().map(|p| p.bbox()).collect();
                let pts: Vec<C64> = boxes.iter().flat_map(|(a, b)| [*a, *b]).collect();
                points_bbox(&pts)
            }
            SetSpec::Image { map, of } => {
                let (lo, hi) = of.bbox();
                let n = 200;
                let step = (hi.re - lo.re).max(hi.im - lo.im) / n as f64;
                let mut pts = Vec::new();
                for i in 0..=n {
                    for j in 0..=n {
                        let z = C64::new(
                            lo.re + (hi.re - lo.re) * i as f64 / n as f64,
                            lo.im + (hi.im - lo.im) * j as f64 / n as f64,
                        );
                        if of.contains(z, step) {
                            if let Ok(w) = map.eval(z, 0) {
                                pts.push(w);
                            }
                        }
                    }
                }
                let (a, b) = points_bbox(&pts);
                let pad = 0.02 * (b - a).norm() + 1e-9;
                (a - C64::new(pad, pad), b + C64::new(pad, pad))
            }
            SetSpec::Complement(inner) => inner.bbox(),
        }
    }

    /// Sites of a bounded set.
    pub fn sites(&self, mesh: f64) -> Result<SiteSet> {
        if !self.is_bounded() {
            return Err(Error::InvalidArgument("cannot rasterize an unbounded set".into()));
        }
        let (lo, hi) = self.bbox();
        let mut out = SiteSet::new();
        let x0 = (lo.re / mesh).floor() as i32 - 1;
        let x1 = (hi.re / mesh).ceil() as i32 + 1;
        let y0 = (lo.im / mesh).floor() as i32 - 1;
        let y1 = (hi.im / mesh).ceil() as i32 + 1;
        for y in y0..=y1 {
            for x in x0..=x1 {
                if self.contains(C64::new(x as f64 * mesh, y as f64 * mesh), mesh) {
                    out.insert(Site::new(x, y));
                }
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("set has no lattice sites at this mesh".into()));
        }
        Ok(out)
    }

    /// Sites that every nearest-neighbour path entering the set from far
    /// away must visit: the inner boundary of a bounded set, the outer layer
    /// of the complemented set for complements.
    pub fn entry_sites(&self, mesh: f64) -> Result<SiteSet> {
        match self {
            SetSpec::Complement(inner) => Ok(outer_layer(&inner.sites(mesh)?)),
            other => Ok(inner_boundary(&other.sites(mesh)?)),
        }
    }
}

fn points_bbox(pts: &[C64]) -> (C64, C64) {
    let mut lo = C64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.re = lo.re.min(p.re);
        lo.im = lo.im.min(p.im);
        hi.re = hi.re.max(p.re);
        hi.im = hi.im.max(p.im);
    }
    (lo, hi)
}

/// Diameter of the union of bounding boxes.
pub fn config_diameter(sets: &[&SetSpec]) -> f64 {
    let pts: Vec<C64> = sets.iter().flat_map(|s| {
        let (a, b) = s.bbox();
        [a, b]
    }).collect();
    let (lo, hi) = points_bbox(&pts);
    (hi - lo).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_raster_is_fat() {
        let s = SetSpec::disk(C64::new(0.0, 0.0), 0.25).sites(1.0 / 16.0).unwrap();
        assert!(s.contains(&Site::new(4, 0)) && !s.contains(&Site::new(5, 0)));
        assert!(s.contains(&Site::new(1, 1)));
    }

    #[test]
    fn complement_entry_is_outer_layer() {
        let d = SetSpec::disk(C64::new(0.0, 0.0), 1.0);
        let e = d.clone().complement().entry_sites(0.25).unwrap();
        assert!(e.contains(&Site::new(5, 0)) && !e.contains(&Site::new(4, 0)));
        let inner = d.entry_sites(0.25).unwrap();
        assert!(inner.contains(&Site::new(4, 0)) && inner.is_disjoint(&e));
    }

    #[test]
    fn thin_tube_is_connected() {
        let tube = SetSpec::Segment { from: C64::new(0.0, 0.0), to: C64::new(1.0, 0.37), thickness: 0.0 };
        let s = tube.sites(0.05).unwrap();
        let start = *s.iter().next().unwrap();
        let mut seen = SiteSet::new();
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(v.neighbors().into_iter().filter(|n| s.contains(n)));
            }
        }
        assert_eq!(seen.len(), s.len());
    }

    #[test]
    fn image_of_disk_under_scaling() {
        let m = ConformalTestMap::affine(C64::new(2.0, 0.0), C64::new(0.0, 0.0));
        let img = SetSpec::disk(C64::new(0.0, 0.0), 0.5).image(&m);
        assert!(img.contains(C64::new(0.99, 0.0), 0.0));
        assert!(!img.contains(C64::new(1.01, 0.0), 0.0));
        let (lo, hi) = img.bbox();
        assert!(lo.re < -0.99 && hi.re > 0.99);
    }

    #[test]
    fn image_of_a_thin_tube_keeps_its_extent() {
        let q = ConformalTestMap::quadratic_auto(C64::new(0.2, 0.0)).unwrap();
        let circle: Vec<C64> = (0..256).map(|k| C64::from_polar(1.0, k as f64 * std::f64::consts::TAU / 256.0)).collect();
        let tube = SetSpec::CurveTube { curve: circle.clone(), thickness: 0.0 };
        let pushed: Vec<C64> = circle.iter().map(|z| z + 0.2 * z * z).collect();
        let direct = SetSpec::CurveTube { curve: pushed, thickness: 0.0 }.sites(1.0 / 32.0).unwrap();
        let image = tube.image(&q).sites(1.0 / 32.0).unwrap();
        assert!((image.len() as f64 - direct.len() as f64).abs() < 0.05 * direct.len() as f64);
    }
}
