//! Loop energy through the rooted limit: the chordal energy of `γ[ε, 1]` in
//! `Ĉ ∖ γ[0, ε]` from `γ(ε)` to `γ(0)`, as `ε → 0`.

use serde::{Deserialize, Serialize};

use super::zipper::{map_points, GeodesicMap};
use crate::geometry::JordanCurve;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyRoute {
    Rooted,
    DiskFormula,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    /// Raw value; may be slightly negative from discretization.
    pub value: f64,
    pub route: EnergyRoute,
    pub error_estimate: f64,
    /// `(ε, energy)` pairs in schedule order, for the rooted route.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_sequence: Option<Vec<(f64, f64)>>,
}

impl EnergyValue {
    /// `max(value, 0)`, for reporting.
    pub fn clamped(&self) -> f64 {
        self.value.max(0.0)
    }
}

pub const DEFAULT_EPS_SCHEDULE: [f64; 3] = [0.2, 0.1, 0.05];

/// Per-step energies of unzipping a closed polygon from its first vertex.
///
/// `z ↦ i √((z − v₁)/(z − v₀))` opens the edge `[v₀, v₁]`, sending `v₀` to
/// `∞` and `v₁` to `0`; vertex `k ≥ 2` is then removed by a geodesic slit
/// map. Entry `k` holds `½ (ΔW)² / Δt` of that step (zero for `k < 2`).
/// On failure returns the index of the vertex that left the half-plane.
fn step_energies(verts: &[C64]) -> std::result::Result<Vec<f64>, usize> {
    let n = verts.len();
    let (v0, v1) = (verts[0], verts[1]);
    let mut pts: Vec<C64> = verts[2..].iter().map(|&z| C64::i() * ((z - v1) / (z - v0)).sqrt()).collect();
    let mut out = vec![0.0; n];
    let mut base = 0.0;
    for k in 0..pts.len() {
        let c = pts[k] - base;
        if !(c.im > 0.0) || !c.re.is_finite() {
            return Err(k + 2);
        }
        let g = GeodesicMap::new(c);
        map_points(&g, base, &mut pts[k + 1..]);
        out[k + 2] = 0.5 * g.tip_image().powi(2) / g.capacity();
        base += g.tip_image();
    }
    Ok(out)
}

fn check_schedule(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::InvalidArgument("empty epsilon schedule".into()));
    }
    if eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || eps.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::InvalidArgument("epsilon schedule must decrease within (0, 1)".into()));
    }
    Ok(())
}

/// Index of the last vertex of `γ[0, ε]` for `n` vertices parametrized uniformly.
fn cut_index(eps: f64, n: usize) -> usize {
    (eps * n as f64).round() as usize
}

fn energies_for(verts: &[C64], eps: &[f64]) -> Result<Vec<f64>> {
    let n = verts.len();
    let steps = step_energies(verts).map_err(|k| {
        let bad = eps.iter().copied().find(|&e| cut_index(e, n) < k).unwrap_or(eps[0]);
        Error::ZipperFailed { eps: bad, reason: format!("vertex {k} left the half-plane") }
    })?;
    eps.iter()
        .map(|&e| {
            let m = cut_index(e, n);
            if m == 0 {
                return Err(Error::EpsilonTooSmall);
            }
            if m + 2 >= n {
                return Err(Error::InvalidArgument(format!("epsilon {e} leaves no arc")));
            }
            Ok(steps[m + 1..].iter().sum())
        })
        .collect()
}

/// Rooted loop energy with the full `ε` sequence; the value is the entry for
/// the smallest `ε`. The error estimate is the change against the curve
/// with every other vertex.
pub fn rooted_loop_energy(curve: &JordanCurve, eps_schedule: &[f64]) -> Result<EnergyValue> {
    check_schedule(eps_schedule)?;
    let verts = curve.rooted_vertices();
    let half: Vec<C64> = verts.iter().step_by(2).copied().collect();
    let (full, coarse) = rayon::join(|| energies_for(&verts, eps_schedule), || energies_for(&half, eps_schedule));
    let full = full?;
    let value = *full.last().unwrap();
    let error_estimate = match coarse {
        Ok(c) => (value - c.last().unwrap()).abs(),
        Err(_) => f64::INFINITY,
    };
    Ok(EnergyValue {
        value,
        route: EnergyRoute::Rooted,
        error_estimate,
        eps_sequence: Some(eps_schedule.iter().copied().zip(full).collect()),
    })
}
