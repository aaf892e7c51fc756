//! The disk formula for the loop energy and equipotential annuli.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::rooted::{EnergyRoute, EnergyValue};
use super::welding::{exact_map_pair, riemann_maps, MapPair};
use crate::geometry::{AnnularRegion, JordanCurve};
use crate::quad::gauss_legendre;
use crate::stats::richardson;
use crate::{Error, Result, C64};

/// Polar quadrature over the disk truncated at `1 − δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Angular nodes for exact maps; numerical maps use their sample count.
    pub angles: usize,
    /// Gauss–Legendre order per radial panel.
    pub order: usize,
    /// Truncations, halving.
    pub deltas: Vec<f64>,
    /// Allowed disagreement between the two extrapolants.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { angles: 512, order: 10, deltas: vec![1e-2, 5e-3, 2.5e-3], tolerance: 5e-3 }
    }
}

/// Radial nodes and weights on `[0, 1 − δ]`, with panels `[1 − 2^{−k}, 1 − 2^{−k−1}]`.
fn radial_rule(delta: f64, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let mut edges = vec![0.0];
    let mut k = 1;
    while 1.0 - 0.5f64.powi(k) < 1.0 - delta {
        edges.push(1.0 - 0.5f64.powi(k));
        k += 1;
    }
    edges.push(1.0 - delta);
    let mut out = Vec::new();
    for e in edges.windows(2) {
        let (a, b) = (e[0], e[1]);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((0.5 * (a + b) + 0.5 * (b - a) * xi, 0.5 * (b - a) * wi));
        }
    }
    out
}

/// Values of `Σ c_k r^k e^{ikθ}` at `M` equally spaced angles, by one inverse FFT.
fn ring(coeffs: &[C64], r: f64, m: usize, planner: &mut FftPlanner<f64>) -> Vec<C64> {
    let mut buf = vec![C64::new(0.0, 0.0); m];
    let mut p = 1.0;
    for (k, c) in coeffs.iter().enumerate() {
        buf[k % m] += c * p;
        p *= r;
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf
}

/// `Σ_θ |f″/f′|²(re^{iθ}) · 2π/M` for the interior map.
fn interior_ring(maps: &MapPair, r: f64, m: usize) -> f64 {
    let f = &maps.interior;
    let vals: Vec<f64> = if f.exact.is_some() {
        (0..m)
            .map(|j| {
                let [_, d1, d2] = f.jet(C64::from_polar(r, 2.0 * PI * j as f64 / m as f64));
                (d2 / d1).norm_sqr()
            })
            .collect()
    } else {
        let a = &f.coeffs;
        let d1: Vec<C64> = (1..a.len()).map(|k| a[k] * k as f64).collect();
        let d2: Vec<C64> = (2..a.len()).map(|k| a[k] * (k * (k - 1)) as f64).collect();
        let mut planner = FftPlanner::new();
        let v1 = ring(&d1, r, m, &mut planner);
        let v2 = ring(&d2, r, m, &mut planner);
        v1.iter().zip(&v2).map(|(a, b)| (b / a).norm_sqr()).collect()
    };
    vals.iter().sum::<f64>() * 2.0 * PI / m as f64
}

/// The exterior integrand in `w = 1/ζ`: `|g″/g′|²(1/w) |w|^{−4}`, summed over a ring.
fn exterior_ring(maps: &MapPair, rho: f64, m: usize) -> f64 {
    let g = &maps.exterior;
    let vals: Vec<f64> = if g.exact.is_some() {
        (0..m)
            .map(|j| {
                let w = C64::from_polar(rho, 2.0 * PI * j as f64 / m as f64);
                let [_, d1, d2] = g.jet(1.0 / w);
                (d2 / d1).norm_sqr() / rho.powi(4)
            })
            .collect()
    } else {
        // g′ = b₁ − w² h′(w), g″ = w³ (2h′ + w h″), h(w) = Σ b₋ₖ w^k
        let b = &g.coeffs;
        let tail = &b[2..];
        let h1: Vec<C64> = tail.iter().enumerate().map(|(i, c)| c * (i + 1) as f64).collect();
        let h2: Vec<C64> = tail.iter().enumerate().skip(1).map(|(i, c)| c * ((i + 1) * i) as f64).collect();
        let mut planner = FftPlanner::new();
        let v1 = ring(&h1, rho, m, &mut planner);
        let v2 = ring(&h2, rho, m, &mut planner);
        (0..m)
            .map(|j| {
                let w = C64::from_polar(rho, 2.0 * PI * j as f64 / m as f64);
                let gp = b[0] - w * w * v1[j];
                let num = w * w * w * (2.0 * v1[j] + w * v2[j]);
                (num / gp).norm_sqr() / rho.powi(4)
            })
            .collect()
    };
    vals.iter().sum::<f64>() * 2.0 * PI / m as f64
}

fn truncated_integral(maps: &MapPair, delta: f64, spec: &QuadratureSpec) -> f64 {
    let mi = if maps.interior.exact.is_some() { spec.angles } else { maps.interior.boundary.len() };
    let me = if maps.exterior.exact.is_some() { spec.angles } else { maps.exterior.boundary.len() };
    let rule = radial_rule(delta, spec.order);
    let parts: Vec<f64> = rule
        .par_iter()
        .map(|&(r, w)| w * r * (interior_ring(maps, r, mi) + exterior_ring(maps, r, me)))
        .collect();
    parts.iter().sum::<f64>() / PI
}

/// `(1/π)∫_𝔻 |f″/f′|² + (1/π)∫_{𝔻*} |g″/g′|² + 4 log |f′(0)/g′(∞)|`.
pub fn liouville_action(maps: &MapPair, spec: &QuadratureSpec) -> Result<EnergyValue> {
    if spec.deltas.len() < 3 {
        return Err(Error::InvalidArgument("need three truncations".into()));
    }
    let vals: Vec<f64> = spec.deltas.iter().map(|&d| truncated_integral(maps, d, spec)).collect();
    let k = vals.len();
    let e1 = richardson(vals[k - 3], vals[k - 2], 1.0);
    let e2 = richardson(vals[k - 2], vals[k - 1], 1.0);
    let disagreement = (e1 - e2).abs();
    if !(disagreement <= spec.tolerance) {
        return Err(Error::Quadrature(format!(
            "truncation extrapolants {e1:.6} and {e2:.6} differ by {disagreement:.2e}; raw values {vals:?}"
        )));
    }
    let logs = 4.0 * (maps.interior.derivative_at_zero / maps.exterior.derivative_at_infinity).ln();
    Ok(EnergyValue { value: e2 + logs, route: EnergyRoute::DiskFormula, error_estimate: disagreement, eps_sequence: None })
}

/// Exact map pair when the curve has an analytic source, zipper maps otherwise.
pub fn best_map_pair(curve: &JordanCurve) -> Result<MapPair> {
    match exact_map_pair(curve)? {
        Some(m) => Ok(m),
        None => riemann_maps(curve),
    }
}

/// Region between the equipotentials `f(S_{1−δ})` and `g(S_{1+δ})`.
pub fn equipotential_annulus(curve: &JordanCurve, delta: f64) -> Result<AnnularRegion> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidArgument("delta must lie in (0, 1/2)".into()));
    }
    let maps = best_map_pair(curve)?;
    let k = (2 * curve.len()).max(256);
    let ring_pts = |rad: f64, inner: bool| -> Vec<C64> {
        (0..k)
            .map(|j| {
                let z = C64::from_polar(rad, 2.0 * PI * j as f64 / k as f64);
                if inner { maps.interior.jet(z)[0] } else { maps.exterior.jet(z)[0] }
            })
            .collect()
    };
    let inner = JordanCurve::new(ring_pts(1.0 - delta, true), 0)?;
    let outer = JordanCurve::new(ring_pts(1.0 + delta, false), 0)?;
    let core = maps.interior.jet(C64::new(0.0, 0.0))[0];
    AnnularRegion::between_curves(inner, outer, core)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::rooted::{rooted_loop_energy, DEFAULT_EPS_SCHEDULE};
    use crate::maps::ConformalTestMap;

    #[test]
    fn circles_have_zero_action() {
        let spec = QuadratureSpec::default();
        let c = JordanCurve::unit_circle(256);
        let e = liouville_action(&exact_map_pair(&c).unwrap().unwrap(), &spec).unwrap();
        assert!(e.value.abs() < 1e-8);
        let t = JordanCurve::circle(C64::new(5.0, 0.0), 1.0, 256);
        let e = liouville_action(&exact_map_pair(&t).unwrap().unwrap(), &spec).unwrap();
        assert!(e.value.abs() < 1e-6);
        let m = ConformalTestMap::mobius(C64::new(2.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(2.0, 0.0))
            .unwrap();
        let mc = m.push_curve(&c, None).unwrap();
        assert!(liouville_action(&exact_map_pair(&mc).unwrap().unwrap(), &spec).unwrap().value.abs() < 1e-6);
    }

    #[test]
    fn agrees_with_rooted_energy() {
        let q = ConformalTestMap::quadratic_auto(C64::new(0.2, 0.0)).unwrap();
        let c = q.push_curve(&JordanCurve::unit_circle(1024), None).unwrap();
        let maps = exact_map_pair(&c).unwrap().unwrap();
        assert_eq!(maps.source, crate::loewner::MapSource::Mixed);
        let disk = liouville_action(&maps, &QuadratureSpec::default()).unwrap();
        let rooted = rooted_loop_energy(&c, &DEFAULT_EPS_SCHEDULE).unwrap();
        assert!(disk.value > 0.0);
        assert!((disk.value - rooted.value).abs() <= 0.05f64.max(0.05 * disk.value));
    }

    #[test]
    fn radial_rule_integrates_polynomials() {
        let rule = radial_rule(1e-2, 8);
        let s: f64 = rule.iter().map(|(r, w)| w * r * r).sum();
        assert!((s - 0.99f64.powi(3) / 3.0).abs() < 1e-13);
    }

    #[test]
    fn equipotentials_of_circles() {
        let y = equipotential_annulus(&JordanCurve::unit_circle(256), 0.1).unwrap();
        for (r, inside) in [(0.89, false), (0.91, true), (1.09, true), (1.11, false)] {
            assert_eq!(y.contains(C64::from_polar(r, 0.3)).unwrap(), inside, "r = {r}");
        }
        let y = equipotential_annulus(&JordanCurve::circle(C64::new(0.0, 0.0), 2.0, 256), 0.1).unwrap();
        for (r, inside) in [(1.79, false), (1.81, true), (2.19, true), (2.21, false)] {
            assert_eq!(y.contains(C64::from_polar(r, 1.1)).unwrap(), inside, "r = {r}");
        }
    }

    #[test]
    fn equipotentials_enclose_the_curve() {
        let q = ConformalTestMap::quadratic_auto(C64::new(0.2, 0.0)).unwrap();
        let c = q.push_curve(&JordanCurve::unit_circle(512), None).unwrap();
        let y = equipotential_annulus(&c, 0.1).unwrap();
        let crate::geometry::AnnulusKind::BetweenCurves { inner, outer } = &y.kind else { panic!() };
        for z in c.vertices() {
            assert!(y.contains(*z).unwrap());
            assert!(inner.distance_to(*z) > 0.01 && outer.distance_to(*z) > 0.01);
        }
    }
}
