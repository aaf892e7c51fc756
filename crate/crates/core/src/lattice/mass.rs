//! Loop masses: total mass, hitting masses `B(V₁, V₂; D)` and the renormalized `Λ*`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::domain::{inner_boundary, LatticeDomain, Site, SiteSet};
use super::green::{
    capacity_functional, green_block, green_disk_far_field, green_outside, mutual_log_det, to_vec, EnvelopeLdl,
};
use super::sets::{config_diameter, SetSpec};
use crate::stats::richardson;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassKind {
    ExactLogdet,
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassValue {
    pub value: f64,
    pub kind: MassKind,
    pub stderr: f64,
}

impl MassValue {
    pub fn exact(value: f64) -> Self {
        Self { value, kind: MassKind::ExactLogdet, stderr: 0.0 }
    }
}

/// `m(D) = −log det(I − P_D)`, the total mass of lattice loops in `D`.
pub fn loop_mass(domain: &LatticeDomain) -> Result<MassValue> {
    if domain.is_empty() {
        return Err(Error::InvalidArgument("empty domain".into()));
    }
    let ldl = EnvelopeLdl::natural(domain, false)?;
    Ok(MassValue::exact(-ldl.log_det()))
}

fn check_pair(v1: &SiteSet, v2: &SiteSet) -> Result<()> {
    if v1.is_empty() || v2.is_empty() {
        return Err(Error::EmptySet);
    }
    if !v1.is_disjoint(v2) {
        return Err(Error::SetsNotDisjoint);
    }
    Ok(())
}

/// Mass of loops in `D` visiting both `V₁` and `V₂`.
///
/// Evaluated as `log det G[S₁] + log det G[S₂] − log det G[S₁ ∪ S₂]` where `Sᵢ`
/// is the inner boundary of `Vᵢ`; a loop reaching both sets enters each through it.
pub fn hitting_mass(v1: &SiteSet, v2: &SiteSet, domain: &LatticeDomain) -> Result<MassValue> {
    check_pair(v1, v2)?;
    if v1.iter().chain(v2.iter()).any(|s| !domain.contains(*s)) {
        return Err(Error::InvalidArgument("sets must lie in the domain".into()));
    }
    let s1 = to_vec(&inner_boundary(v1));
    let s2 = to_vec(&inner_boundary(v2));
    let joint: Vec<Site> = s1.iter().chain(s2.iter()).copied().collect();
    let g = green_block(domain, &joint)?;
    Ok(MassValue::exact(mutual_log_det(&g, s1.len())?.max(0.0)))
}

/// Inclusion–exclusion over the four avoidance domains.
pub fn hitting_mass_by_exclusion(v1: &SiteSet, v2: &SiteSet, domain: &LatticeDomain) -> Result<MassValue> {
    check_pair(v1, v2)?;
    let m = |removed: &SiteSet| -> Result<f64> {
        let d = domain.minus(removed);
        if d.is_empty() {
            Ok(0.0)
        } else {
            Ok(loop_mass(&d)?.value)
        }
    };
    let both: SiteSet = v1.union(v2).copied().collect();
    let value = m(&SiteSet::new())? - m(v1)? - m(v2)? + m(&both)?;
    Ok(MassValue::exact(value))
}

/// Mass of loops avoiding `removed` that visit both `S₁` and `S₂`, where the
/// `Sᵢ` are entry sets (already reduced to boundaries) outside `removed`.
pub fn hitting_mass_avoiding(s1: &SiteSet, s2: &SiteSet, removed: &SiteSet) -> Result<MassValue> {
    check_pair(s1, s2)?;
    let killing = to_vec(&inner_boundary(removed));
    let a = to_vec(s1);
    let b = to_vec(s2);
    let joint: Vec<Site> = a.iter().chain(b.iter()).copied().collect();
    if joint.iter().any(|s| removed.contains(s)) {
        return Err(Error::SetsNotDisjoint);
    }
    let g = green_outside(&killing, &joint)?;
    Ok(MassValue::exact(mutual_log_det(&g, a.len())?.max(0.0)))
}

/// `R → ∞` limit of `B(S₁, S₂; D_R) − log log R` for entry sets at a fixed mesh:
/// `log(2/π) + Φ(S₁) + Φ(S₂) − Φ(S₁ ∪ S₂)`.
pub fn lambda_star_limit(s1: &SiteSet, s2: &SiteSet) -> Result<f64> {
    check_pair(s1, s2)?;
    let joint: SiteSet = s1.union(s2).copied().collect();
    Ok((2.0 / PI).ln() + capacity_functional(&to_vec(s1))? + capacity_functional(&to_vec(s2))?
        - capacity_functional(&to_vec(&joint))?)
}

/// `B(S₁, S₂; D_R)` on the disk of radius `radius` (plane units) centred at 0.
pub fn disk_hitting_mass(s1: &SiteSet, s2: &SiteSet, radius: f64, mesh: f64) -> Result<f64> {
    check_pair(s1, s2)?;
    let a = to_vec(s1);
    let b = to_vec(s2);
    let joint: Vec<Site> = a.iter().chain(b.iter()).copied().collect();
    let g = green_disk_far_field(radius / mesh, &joint);
    mutual_log_det(&g, a.len())
}

/// One row of the `Λ*` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaStarRow {
    pub mesh: f64,
    pub r: f64,
    pub mass: f64,
    pub renormalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaStarEstimate {
    pub value: f64,
    pub r_sequence: Vec<f64>,
    pub mesh_sequence: Vec<f64>,
    pub rows: Vec<LambdaStarRow>,
    /// Mesh-extrapolated renormalized mass per radius.
    pub extrapolants: Vec<f64>,
    pub stabilization_gap: f64,
    /// `|extrapolant − finest-mesh value|` at the largest radius.
    pub mesh_error: f64,
    /// Exact `R → ∞` lattice limit per mesh.
    pub limits: Vec<f64>,
}

/// Default radius multipliers, in units of the configuration diameter. The
/// renormalized mass converges like `1/log R`, hence the wide range.
pub const DEFAULT_R_FACTORS: [f64; 10] =
    [4.0, 16.0, 64.0, 256.0, 1024.0, 4096.0, 16384.0, 65536.0, 262144.0, 1048576.0];

/// Tolerance on a non-monotone mesh sequence.
const MESH_TOLERANCE: f64 = 0.05;

/// `B(V₁, V₂; 𝔻_R) − log log R` over radii `r_factors × diameter` and the
/// given meshes, extrapolated in the mesh at each radius.
pub fn lambda_star(v1: &SetSpec, v2: &SetSpec, r_factors: &[f64], meshes: &[f64]) -> Result<LambdaStarEstimate> {
    if r_factors.is_empty() || meshes.is_empty() {
        return Err(Error::InvalidArgument("empty schedule".into()));
    }
    let diameter = config_diameter(&[v1, v2]);
    let radii: Vec<f64> = r_factors.iter().map(|k| k * diameter).collect();
    let mut rows = Vec::new();
    let mut limits = Vec::new();
    let mut table = vec![vec![0.0; meshes.len()]; radii.len()];
    for (mi, &h) in meshes.iter().enumerate() {
        let s1 = v1.entry_sites(h)?;
        let s2 = v2.entry_sites(h)?;
        limits.push(lambda_star_limit(&s1, &s2)?);
        for (ri, &r) in radii.iter().enumerate() {
            let mass = disk_hitting_mass(&s1, &s2, r, h)?;
            let renormalized = mass - r.ln().ln();
            table[ri][mi] = renormalized;
            rows.push(LambdaStarRow { mesh: h, r, mass, renormalized });
        }
    }
    let mut extrapolants = Vec::new();
    let mut mesh_error = 0.0;
    for row in &table {
        let (value, err) = mesh_extrapolate(row)?;
        extrapolants.push(value);
        mesh_error = err;
    }
    let k = extrapolants.len();
    let stabilization_gap = if k >= 2 { (extrapolants[k - 1] - extrapolants[k - 2]).abs() } else { f64::INFINITY };
    Ok(LambdaStarEstimate {
        value: extrapolants[k - 1],
        r_sequence: radii,
        mesh_sequence: meshes.to_vec(),
        rows,
        extrapolants,
        stabilization_gap,
        mesh_error,
        limits,
    })
}

/// First-order Richardson on the two finest meshes (meshes halve along the
/// sequence). Returns the extrapolant and its distance from the finest value.
pub fn mesh_extrapolate(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n == 1 {
        return Ok((values[0], 0.0));
    }
    if n >= 3 {
        let d1 = values[n - 2] - values[n - 3];
        let d2 = values[n - 1] - values[n - 2];
        if d1 * d2 < 0.0 && d2.abs() > MESH_TOLERANCE {
            return Err(Error::MeshNotConverged(format!(
                "successive mesh differences {d1:.4} and {d2:.4} change sign"
            )));
        }
    }
    let e = richardson(values[n - 2], values[n - 1], 1.0);
    Ok((e, (e - values[n - 1]).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn single_site_has_no_loops() {
        let d = LatticeDomain::rect(1.0, 0, 0, 1, 1).unwrap();
        assert_eq!(loop_mass(&d).unwrap().value, 0.0);
    }

    #[test]
    fn two_sites() {
        let d = LatticeDomain::rect(1.0, 0, 0, 2, 1).unwrap();
        assert!((loop_mass(&d).unwrap().value - (16.0f64 / 15.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn hitting_mass_formulas_agree() {
        let d = LatticeDomain::rect(1.0, 0, 0, 8, 6).unwrap();
        let v1: SiteSet = [Site::new(1, 1), Site::new(1, 2), Site::new(2, 1)].into_iter().collect();
        let v2: SiteSet = [Site::new(6, 4), Site::new(5, 4)].into_iter().collect();
        let a = hitting_mass(&v1, &v2, &d).unwrap().value;
        let b = hitting_mass_by_exclusion(&v1, &v2, &d).unwrap().value;
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        let swapped = hitting_mass(&v2, &v1, &d).unwrap().value;
        assert!((a - swapped).abs() < 1e-12);
        assert_eq!(hitting_mass(&v1, &v1, &d), Err(Error::SetsNotDisjoint));
        assert_eq!(hitting_mass(&SiteSet::new(), &v1, &d), Err(Error::EmptySet));
    }

    #[test]
    fn disk_mass_approaches_limit() {
        let h = 1.0 / 8.0;
        let s1 = SetSpec::disk(C64::new(-0.5, 0.0), 0.25).entry_sites(h).unwrap();
        let s2 = SetSpec::disk(C64::new(0.5, 0.0), 0.25).entry_sites(h).unwrap();
        let limit = lambda_star_limit(&s1, &s2).unwrap();
        // the approach is O(1 / log R)
        let gap = |r: f64| disk_hitting_mass(&s1, &s2, r, h).unwrap() - r.ln().ln() - limit;
        let (g1, g2) = (gap(1e50), gap(1e200));
        assert!(g2.abs() < 0.01, "{g2}");
        assert!((g1 * 1e50f64.ln() - g2 * 1e200f64.ln()).abs() < 0.1 * g1.abs() * 1e50f64.ln());
    }
}
