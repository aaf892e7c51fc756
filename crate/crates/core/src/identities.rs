//! Experiment harness: both sides of each identity with explicit error
//! budgets, the Onsager–Machlup prediction, and its empirical checks.
//!
//! A report passes when `|lhs − rhs| ≤ 3·(combined stderr) + allowance` and
//! every trend condition it lists holds.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::geometry::{winding_number_polyline, AnnularRegion, AnnulusKind, JordanCurve};
use crate::lattice::domain::{inner_boundary, outer_layer};
use crate::lattice::mass::{hitting_mass, hitting_mass_avoiding, lambda_star_limit};
use crate::lattice::werner::{boundary_event_counts, werner_counts, SiteMask};
use crate::lattice::{LatticeDomain, SetSpec, Site, SiteSet};
use crate::loewner::{
    best_map_pair, dirichlet_energy, liouville_action, rooted_loop_energy, DrivingFunction, EnergyValue,
    QuadratureSpec, DEFAULT_EPS_SCHEDULE,
};
use crate::maps::ConformalTestMap;
use crate::stats::{paired_difference, rng_for, Estimate};
use crate::{Error, Result, C64};

/// Discretization allowance in mass units.
pub const MASS_ALLOWANCE: f64 = 0.1;
/// Discretization allowance in energy units.
pub const ENERGY_ALLOWANCE: f64 = 0.05;

/// `c(κ) = (6 − κ)(3κ − 8) / 2κ`.
pub fn central_charge(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!("kappa = {kappa} must be positive")));
    }
    Ok((6.0 - kappa) * (3.0 * kappa - 8.0) / (2.0 * kappa))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// A value with its standard error (zero for deterministic quantities).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub stderr: f64,
}

impl Measured {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    fn from(e: Estimate) -> Self {
        Self { value: e.mean, stderr: e.stderr }
    }
}

/// A named trend condition attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: Measured,
    pub rhs: Measured,
    pub discrepancy: f64,
    pub allowance: f64,
    pub budget: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    /// Sequences and intermediate values.
    pub details: Value,
    /// Echo of every input that determines the result.
    pub provenance: Value,
}

impl IdentityReport {
    pub fn new(name: &str, lhs: Measured, rhs: Measured, allowance: f64, details: Value, provenance: Value) -> Self {
        let discrepancy = (lhs.value - rhs.value).abs();
        let budget = 3.0 * lhs.stderr.hypot(rhs.stderr) + allowance;
        let verdict = if discrepancy <= budget { Verdict::Pass } else { Verdict::Fail };
        Self {
            name: name.into(),
            lhs,
            rhs,
            discrepancy,
            allowance,
            budget,
            verdict,
            checks: Vec::new(),
            details,
            provenance,
        }
    }

    /// Adds a trend condition; a failing one fails the report.
    pub fn check(mut self, name: &str, ok: bool) -> Self {
        if !ok {
            self.verdict = Verdict::Fail;
        }
        self.checks.push(Check { name: name.into(), ok });
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// One summary line.
    pub fn summary(&self) -> String {
        format!(
            "{:<28} lhs {:>10.5} ± {:<8.5} rhs {:>10.5} ± {:<8.5} |Δ| {:.5} budget {:.5} {}",
            self.name,
            self.lhs.value,
            self.lhs.stderr,
            self.rhs.value,
            self.rhs.stderr,
            self.discrepancy,
            self.budget,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Lattice and soup parameters shared by the Monte-Carlo identities. Plane
/// quantities are evaluated in the box `[−box_half, box_half]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoupSettings {
    pub mesh: f64,
    pub box_half: f64,
    pub replicas: u64,
    pub seed: u64,
}

impl Default for SoupSettings {
    fn default() -> Self {
        Self { mesh: 1.0 / 32.0, box_half: 4.0, replicas: 4000, seed: 1 }
    }
}

impl SoupSettings {
    fn validate(&self) -> Result<()> {
        if !(self.mesh > 0.0 && self.box_half > self.mesh) || self.replicas < 2 {
            return Err(Error::InvalidArgument("soup settings need mesh > 0, box_half > mesh, replicas ≥ 2".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<LatticeDomain> {
        self.validate()?;
        let n = (self.box_half / self.mesh).round() as i32;
        LatticeDomain::rect(self.mesh, -n, -n, 2 * n + 1, 2 * n + 1)
    }
}

/// Set description of an annular region.
pub fn region_set(region: &AnnularRegion) -> Result<SetSpec> {
    let round = SetSpec::Annulus { r: region.r };
    match &region.kind {
        AnnulusKind::Round => Ok(round),
        AnnulusKind::MapImage { map } => Ok(round.image(map)),
        AnnulusKind::BetweenCurves { .. } => {
            Err(Error::InvalidArgument("only round annuli and their images are rasterized".into()))
        }
    }
}

fn site_mask(spec: &SetSpec, h: f64) -> Result<SiteMask> {
    match spec {
        SetSpec::Complement(inner) => SiteMask::complement_of(&inner.sites(h)?),
        other => SiteMask::set(&other.sites(h)?),
    }
}

fn as_f64(c: &[u32]) -> Vec<f64> {
    c.iter().map(|&x| x as f64).collect()
}

/// Per-replica Werner counts for `(V₁ᵢ, V₂ᵢ)` from one soup in the settings box.
fn werner_family(v1: &[SetSpec], v2: &[SetSpec], s: &SoupSettings) -> Result<Vec<Vec<f64>>> {
    let domain = s.domain()?;
    let v1_sites: Vec<SiteSet> = v1.iter().map(|v| v.sites(s.mesh)).collect::<Result<_>>()?;
    let masks: Vec<SiteMask> = v2.iter().map(|v| site_mask(v, s.mesh)).collect::<Result<_>>()?;
    for (a, b) in v1_sites.iter().zip(&masks) {
        if a.iter().any(|x| b.contains(*x)) {
            return Err(Error::SetsNotDisjoint);
        }
    }
    let counts = werner_counts(&v1_sites, &masks, &domain, s.replicas, s.seed)?;
    Ok(counts.iter().map(|c| as_f64(c)).collect())
}

/// `Λ*(V₁, V₂)` in the `R → ∞` lattice limit at mesh `h`.
fn lambda_limit(v1: &SetSpec, v2: &SetSpec, h: f64) -> Result<f64> {
    lambda_star_limit(&v1.entry_sites(h)?, &v2.entry_sites(h)?)
}

fn check_nested(inner: &SiteSet, outer: &SiteSet, what: &str) -> Result<()> {
    if !inner.is_subset(outer) {
        return Err(Error::InvalidArgument(format!("{what}: sets are not nested")));
    }
    Ok(())
}

/// `Λ*(K, D′ᶜ) = Λ*(K, Dᶜ) + B(K, D ∖ D′; D)` for `K ⊂ D′ ⊂ D`, evaluated at
/// each mesh with exact lattice linear algebra. The allowance is the
/// mesh-halving gap of the left side plus `1e−6`.
pub fn verify_restriction_lemma(k: &SetSpec, d_prime: &SetSpec, d: &SetSpec, meshes: &[f64]) -> Result<IdentityReport> {
    if meshes.is_empty() || meshes.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidArgument("mesh schedule must be non-empty and positive".into()));
    }
    let mut rows = Vec::new();
    for &h in meshes {
        let ks = k.sites(h)?;
        let dps = d_prime.sites(h)?;
        let ds = d.sites(h)?;
        check_nested(&ks, &dps, "K ⊂ D′")?;
        check_nested(&dps, &ds, "D′ ⊂ D")?;
        let entry_k = inner_boundary(&ks);
        let layer_dp = outer_layer(&dps);
        if layer_dp.iter().any(|s| ks.contains(s)) {
            return Err(Error::InvalidArgument("K touches the boundary of D′".into()));
        }
        let lhs = lambda_star_limit(&entry_k, &layer_dp)?;
        let base = lambda_star_limit(&entry_k, &outer_layer(&ds))?;
        // loops in D reach D ∖ D′ exactly when they visit the layer just outside D′
        let ring: SiteSet = layer_dp.intersection(&ds).copied().collect();
        let b = if ring.is_empty() {
            0.0
        } else {
            hitting_mass(&ks, &ring, &LatticeDomain::new(h, ds.iter().copied())?)?.value
        };
        rows.push((h, lhs, base, b));
    }
    let n = rows.len();
    let (_, lhs, base, b) = rows[n - 1];
    let gap = if n >= 2 { (rows[n - 1].1 - rows[n - 2].1).abs() } else { 0.0 };
    let details = json!({
        "columns": ["mesh", "lambda_k_dprime_c", "lambda_k_d_c", "b_k_ring_d"],
        "rows": rows.iter().map(|r| json!([r.0, r.1, r.2, r.3])).collect::<Vec<_>>(),
        "mesh_gap": gap,
    });
    let provenance = json!({ "k": k, "d_prime": d_prime, "d": d, "meshes": meshes });
    Ok(IdentityReport::new(
        "restriction_lemma",
        Measured::exact(lhs),
        Measured::exact(base + b),
        gap + 1e-6,
        details,
        provenance,
    ))
}

/// Concentric disks `𝔻_{radius·ratio^k}(center)`, `k = 0..stages`.
pub fn shrinking_disks(center: C64, radius: f64, ratio: f64, stages: usize) -> Vec<SetSpec> {
    (0..stages).map(|k| SetSpec::disk(center, radius * ratio.powi(k as i32))).collect()
}

/// Trends along a decreasing family `K₁ ⊃ K₂ ⊃ …` disjoint from `K`.
///
/// The first report compares the telescoped change `Λ*(K, K_n) − Λ*(K, K₁)`
/// with `−Σ B(K, K_k ∖ K_{k+1}; K_{k+1}ᶜ)` at the soup mesh, and requires a
/// strictly decreasing `Λ*` sequence with every increment matched. The second
/// compares the final Werner mass `Ŵ(K, K_n)` with its limit 0, requiring a
/// decreasing sequence ending at most at 0.05.
pub fn verify_divergence_lemma(
    k: &SetSpec,
    family: &[SetSpec],
    soup: &SoupSettings,
) -> Result<(IdentityReport, IdentityReport)> {
    if family.len() < 4 {
        return Err(Error::InvalidArgument("need at least four shrink stages".into()));
    }
    let h = soup.mesh;
    let ks = k.sites(h)?;
    let entry_k = inner_boundary(&ks);
    let stages: Vec<SiteSet> = family.iter().map(|s| s.sites(h)).collect::<Result<_>>()?;
    for w in stages.windows(2) {
        check_nested(&w[1], &w[0], "K_{k+1} ⊂ K_k")?;
        if inner_boundary(&w[0]).iter().any(|s| w[1].contains(s)) {
            return Err(Error::InvalidArgument("stages must shrink strictly".into()));
        }
    }
    if !ks.is_disjoint(&stages[0]) {
        return Err(Error::SetsNotDisjoint);
    }
    let lambdas: Vec<f64> =
        stages.iter().map(|s| lambda_star_limit(&entry_k, &inner_boundary(s))).collect::<Result<_>>()?;
    let b: Vec<f64> = stages
        .windows(2)
        .map(|w| Ok(hitting_mass_avoiding(&entry_k, &inner_boundary(&w[0]), &w[1])?.value))
        .collect::<Result<_>>()?;
    let increments: Vec<f64> = lambdas.windows(2).map(|w| w[1] - w[0]).collect();
    let worst = increments.iter().zip(&b).map(|(i, b)| (i + b).abs()).fold(0.0, f64::max);
    let tol = 1e-6;
    let provenance = json!({ "k": k, "family": family, "soup": soup });
    let lam = IdentityReport::new(
        "divergence_lambda_star",
        Measured::exact(lambdas[lambdas.len() - 1] - lambdas[0]),
        Measured::exact(-b.iter().sum::<f64>()),
        tol,
        json!({ "lambda_star": lambdas, "increments": increments, "b_increments": b, "worst_increment_gap": worst }),
        provenance.clone(),
    )
    .check("lambda_star strictly decreasing", increments.iter().all(|d| *d < 0.0))
    .check("increments match -B", worst <= tol);

    let v1: Vec<SetSpec> = vec![k.clone(); family.len()];
    let counts = werner_family(&v1, family, soup)?;
    let w: Vec<Estimate> = counts.iter().map(|c| Estimate::from_samples(c)).collect();
    let last = w[w.len() - 1];
    let wr = IdentityReport::new(
        "divergence_werner",
        Measured::from(last),
        Measured::exact(0.0),
        0.05,
        json!({
            "werner": w.iter().map(|e| e.mean).collect::<Vec<_>>(),
            "stderr": w.iter().map(|e| e.stderr).collect::<Vec<_>>(),
        }),
        provenance,
    )
    .check("werner decreasing", w.windows(2).all(|p| p[1].mean <= p[0].mean) && last.mean < w[0].mean)
    .check("final werner at most 0.05", last.mean <= 0.05);
    Ok((lam, wr))
}

fn check_injective(region: &AnnularRegion, f: &ConformalTestMap) -> Result<()> {
    match region.kind {
        AnnulusKind::Round => f.check_injective_on_annulus(region.r),
        _ => Ok(()),
    }
}

/// `W(K, Aᶜ) − W(f(K), f(A)ᶜ) = Λ*(K, Aᶜ) − Λ*(f(K), f(A)ᶜ)`.
///
/// `K` is either a compact set in `A` or a tube around a non-contractible
/// loop. Both Werner masses come from one soup, so the left side is a paired
/// difference; the right side is the exact lattice limit at the soup mesh.
pub fn verify_mass_identity(
    k: &SetSpec,
    region: &AnnularRegion,
    f: &ConformalTestMap,
    soup: &SoupSettings,
) -> Result<IdentityReport> {
    check_injective(region, f)?;
    let a = region_set(region)?;
    let h = soup.mesh;
    let ks = k.sites(h)?;
    if !ks.is_subset(&a.sites(h)?) {
        return Err(Error::InvalidArgument("K must lie in A".into()));
    }
    let a_c = a.clone().complement();
    let fk = k.clone().image(f);
    let fa_c = a.image(f).complement();
    let counts = werner_family(&[k.clone(), fk.clone()], &[a_c.clone(), fa_c.clone()], soup)?;
    let w0 = Estimate::from_samples(&counts[0]);
    let w1 = Estimate::from_samples(&counts[1]);
    let dw = paired_difference(&counts[0], &counts[1]);
    let l0 = lambda_limit(k, &a_c, h)?;
    let l1 = lambda_limit(&fk, &fa_c, h)?;
    let coarse = lambda_limit(k, &a_c, 2.0 * h).and_then(|x| Ok(x - lambda_limit(&fk, &fa_c, 2.0 * h)?));
    let details = json!({
        "werner": [w0.mean, w1.mean],
        "werner_stderr": [w0.stderr, w1.stderr],
        "lambda_star": [l0, l1],
        "lambda_star_difference_coarse_mesh": coarse.ok(),
    });
    let provenance = json!({ "k": k, "region": region, "map": f, "soup": soup });
    Ok(IdentityReport::new("mass_identity", Measured::from(dw), Measured::exact(l0 - l1), MASS_ALLOWANCE, details, provenance))
}

/// Loop energy averaged over the rooted and disk-formula routes, with their
/// disagreement.
pub fn two_route_energy(curve: &JordanCurve) -> Result<(f64, f64, [EnergyValue; 2])> {
    let rooted = rooted_loop_energy(curve, &DEFAULT_EPS_SCHEDULE)?;
    let disk = liouville_action(&best_map_pair(curve)?, &QuadratureSpec::default())?;
    Ok((0.5 * (rooted.value + disk.value), (rooted.value - disk.value).abs(), [rooted, disk]))
}

fn curve_tube(c: &JordanCurve) -> SetSpec {
    SetSpec::CurveTube { curve: c.vertices().to_vec(), thickness: 0.0 }
}

/// `I^L(f(γ)) − I^L(γ) = 12 W(γ, Aᶜ) − 12 W(f(γ), f(A)ᶜ)`.
///
/// Half of each curve's route disagreement is added to `allowance`.
pub fn verify_energy_variation(
    gamma: &JordanCurve,
    region: &AnnularRegion,
    f: &ConformalTestMap,
    soup: &SoupSettings,
    allowance: f64,
) -> Result<IdentityReport> {
    check_injective(region, f)?;
    for z in gamma.vertices() {
        if !region.contains(*z)? {
            return Err(Error::InvalidArgument("curve must lie in A".into()));
        }
    }
    let f_gamma = f.push_curve(gamma, None)?;
    let (e0, d0, r0) = two_route_energy(gamma)?;
    let (e1, d1, r1) = two_route_energy(&f_gamma)?;
    let a = region_set(region)?;
    let counts = werner_family(
        &[curve_tube(gamma), curve_tube(&f_gamma)],
        &[a.clone().complement(), a.image(f).complement()],
        soup,
    )?;
    let dw = paired_difference(&counts[0], &counts[1]);
    let details = json!({
        "energy": [e0, e1],
        "routes": [r0, r1],
        "werner": [Estimate::from_samples(&counts[0]), Estimate::from_samples(&counts[1])],
    });
    let provenance = json!({
        "gamma": gamma.vertices(), "region": region, "map": f, "soup": soup, "allowance": allowance,
    });
    Ok(IdentityReport::new(
        "energy_variation",
        Measured::exact(e1 - e0),
        Measured { value: 12.0 * dw.mean, stderr: 12.0 * dw.stderr },
        allowance + 0.5 * (d0 + d1),
        details,
        provenance,
    ))
}

/// Deterministic test loops in `A_{1−ε}`: circles across the width
/// alternating with wavy curves that sweep it.
pub fn test_loops(eps: f64, count: usize, vertices: usize) -> Result<Vec<JordanCurve>> {
    let q = 1.0 - eps;
    (0..count)
        .map(|j| {
            let s = if count > 1 { j as f64 / (count - 1) as f64 } else { 0.5 };
            let pts: Vec<C64> = (0..vertices)
                .map(|i| {
                    let th = 2.0 * std::f64::consts::PI * i as f64 / vertices as f64;
                    let expo = if j % 2 == 0 { 0.9 * (2.0 * s - 1.0) } else { (0.3 + 0.6 * s) * (((j / 2 + 2) as f64) * th).sin() };
                    C64::from_polar(q.powf(expo), th)
                })
                .collect();
            JordanCurve::new(pts, 0)
        })
        .collect()
}

/// Continuity of `η ↦ W(η, f(A)ᶜ)` at `γ = f(S¹)` along shrinking
/// neighbourhoods, and `W(K, 𝔻 ∖ 𝔻_{1−ε}; 𝔻) ↓ 0` for the core `K`.
///
/// The report compares the largest deviation `max_η |Ŵ(η) − Ŵ(γ)|` at the
/// smallest `ε` with 0. Checks: the spread of the family shrinks, the family
/// brackets `Ŵ(γ)` within 3σ at the smallest `ε`, and the core mass decreases
/// to at most 0.05.
pub fn verify_continuity(
    region: &AnnularRegion,
    f: &ConformalTestMap,
    core: &SetSpec,
    eps_schedule: &[f64],
    sample_count: usize,
    soup: &SoupSettings,
) -> Result<IdentityReport> {
    if sample_count < 8 {
        return Err(Error::InvalidArgument("need at least 8 test loops".into()));
    }
    if eps_schedule.is_empty()
        || eps_schedule.windows(2).any(|w| w[1] >= w[0])
        || eps_schedule.iter().any(|e| !(*e > 0.0 && *e < 1.0 - region.r))
    {
        return Err(Error::InvalidArgument("epsilon schedule must decrease within (0, 1 − r)".into()));
    }
    check_injective(region, f)?;
    let a_c = region_set(region)?.image(f).complement();
    let gamma = f.push_curve(&JordanCurve::unit_circle(256), None)?;
    let h = soup.mesh;
    let disk = LatticeDomain::new(h, SetSpec::disk(C64::new(0.0, 0.0), 1.0).sites(h)?)?;
    let core_sites = core.sites(h)?;
    let mut per_eps = Vec::new();
    let (mut spreads, mut core_w) = (Vec::new(), Vec::new());
    let mut last = (0.0, 0.0, true);
    for &eps in eps_schedule {
        let loops: Vec<JordanCurve> =
            test_loops(eps, sample_count, 256)?.iter().map(|c| f.push_curve(c, None)).collect::<Result<_>>()?;
        let mut v1 = vec![curve_tube(&gamma)];
        v1.extend(loops.iter().map(curve_tube));
        let counts = werner_family(&v1, &vec![a_c.clone(); v1.len()], soup)?;
        let wg = Estimate::from_samples(&counts[0]);
        let diffs: Vec<Estimate> = counts[1..].iter().map(|c| paired_difference(c, &counts[0])).collect();
        let vals: Vec<f64> = counts[1..].iter().map(|c| Estimate::from_samples(c).mean).collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let worst = diffs.iter().max_by(|a, b| a.mean.abs().total_cmp(&b.mean.abs())).copied().unwrap();
        let sig = diffs.iter().map(|d| d.stderr).fold(0.0, f64::max);
        let bracket = lo - 3.0 * sig <= wg.mean && wg.mean <= hi + 3.0 * sig;
        let ring = SiteMask::complement_of(&SetSpec::disk(C64::new(0.0, 0.0), 1.0 - eps).sites(h)?)?;
        let cw = werner_counts(&[core_sites.clone()], &[ring], &disk, soup.replicas, soup.seed)?;
        let cw = Estimate::from_samples(&as_f64(&cw[0]));
        spreads.push(hi - lo);
        core_w.push(cw.mean);
        last = (worst.mean.abs(), worst.stderr, bracket);
        per_eps.push(json!({
            "eps": eps, "werner_gamma": wg, "werner_loops": vals, "spread": hi - lo,
            "max_deviation": worst, "core_werner": cw,
        }));
    }
    let n = spreads.len();
    let provenance = json!({
        "region": region, "map": f, "core": core, "eps_schedule": eps_schedule,
        "sample_count": sample_count, "soup": soup,
    });
    Ok(IdentityReport::new(
        "continuity",
        Measured { value: last.0, stderr: last.1 },
        Measured::exact(0.0),
        MASS_ALLOWANCE,
        json!({ "per_eps": per_eps }),
        provenance,
    )
    .check("spread shrinks", n < 2 || spreads[n - 1] < spreads[0])
    .check("family brackets W(gamma)", last.2)
    .check("core mass decreasing", core_w.windows(2).all(|w| w[1] <= w[0]))
    .check("core mass at most 0.05", core_w[n - 1] <= 0.05))
}

/// Setup of the Onsager–Machlup statement: `γ = f(S¹)` inside `A = f(𝔸_r)`,
/// with neighbourhoods `O_ε(γ)` of loops in `f(𝔸_{1−ε})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OMConfig {
    pub kappa: f64,
    pub map: ConformalTestMap,
    pub r: f64,
    /// Vertices of the `S¹` polyline pushed through `map`.
    pub vertices: usize,
    pub eps_schedule: Vec<f64>,
}

impl OMConfig {
    pub fn new(kappa: f64, map: ConformalTestMap, r: f64, eps_schedule: Vec<f64>) -> Result<Self> {
        let cfg = Self { kappa, map, r, vertices: 1024, eps_schedule };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 4.0) {
            return Err(Error::InvalidArgument(format!("kappa = {} not in (0, 4]", self.kappa)));
        }
        AnnularRegion::map_image(self.r, self.map.clone())?;
        if self.vertices < 16 {
            return Err(Error::InvalidArgument("need at least 16 vertices".into()));
        }
        let e = &self.eps_schedule;
        if e.is_empty() || e.windows(2).any(|w| w[1] >= w[0]) || e.iter().any(|x| !(*x > 0.0 && *x < 1.0 - self.r)) {
            return Err(Error::InvalidArgument("epsilon schedule must decrease within (0, 1 − r)".into()));
        }
        Ok(())
    }

    pub fn curve(&self) -> Result<JordanCurve> {
        self.map.push_curve(&JordanCurve::unit_circle(self.vertices), None)
    }

    pub fn region(&self) -> Result<AnnularRegion> {
        AnnularRegion::map_image(self.r, self.map.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmPrediction {
    pub kappa: f64,
    pub central_charge: f64,
    pub energy: EnergyValue,
    /// `(c/24) I^L(γ)`.
    pub exponent: f64,
    /// `exp((c/24) I^L(γ))`.
    pub value: f64,
}

/// `lim μ(O_ε(γ)) / μ(O_ε(S¹)) = exp(c(κ)/24 · I^L(γ))`, with the energy from
/// the disk formula (the rooted route if the quadrature fails).
pub fn om_prediction(cfg: &OMConfig) -> Result<OmPrediction> {
    cfg.validate()?;
    let c = central_charge(cfg.kappa)?;
    let curve = cfg.curve()?;
    let energy = match best_map_pair(&curve).and_then(|m| liouville_action(&m, &QuadratureSpec::default())) {
        Ok(e) => e,
        Err(_) => rooted_loop_energy(&curve, &DEFAULT_EPS_SCHEDULE)?,
    };
    let value = om_value(cfg.kappa, energy.clamped())?;
    Ok(OmPrediction { kappa: cfg.kappa, central_charge: c, exponent: value.ln(), energy, value })
}

/// `exp(c(κ)/24 · energy)`; exactly 1 when `c(κ) = 0`.
pub fn om_value(kappa: f64, energy: f64) -> Result<f64> {
    let c = central_charge(kappa)?;
    Ok(if c == 0.0 { 1.0 } else { (c / 24.0 * energy).exp() })
}

/// The restriction exponent behind the prediction: `(c/24) I^L(γ)` against
/// `(c/2)(W(S¹, 𝔸_rᶜ) − W(γ, Aᶜ))`, the log of `J_κ(S¹, ·)/J_κ(γ, ·)`.
pub fn om_consistency(cfg: &OMConfig, soup: &SoupSettings) -> Result<IdentityReport> {
    let pred = om_prediction(cfg)?;
    let c = pred.central_charge;
    let curve = cfg.curve()?;
    let a = SetSpec::Annulus { r: cfg.r };
    let counts = werner_family(
        &[curve_tube(&JordanCurve::unit_circle(cfg.vertices)), curve_tube(&curve)],
        &[a.clone().complement(), a.image(&cfg.map).complement()],
        soup,
    )?;
    let dw = paired_difference(&counts[0], &counts[1]);
    Ok(IdentityReport::new(
        "om_restriction_exponent",
        Measured::exact(pred.exponent),
        Measured { value: 0.5 * c * dw.mean, stderr: 0.5 * c.abs() * dw.stderr },
        c.abs() / 24.0 * 0.1,
        json!({ "prediction": pred, "werner_difference": dw }),
        json!({ "config": cfg, "soup": soup }),
    ))
}

/// Ratio `m₁/m₀` of paired per-replica means, with a delta-method stderr.
fn paired_ratio(num: &[f64], den: &[f64]) -> Result<Measured> {
    let a = Estimate::from_samples(num);
    let b = Estimate::from_samples(den);
    if !(b.mean > 0.0) {
        return Err(Error::InsufficientReplicas);
    }
    let r = a.mean / b.mean;
    let resid: Vec<f64> = num.iter().zip(den).map(|(x, y)| x - r * y).collect();
    Ok(Measured { value: r, stderr: Estimate::from_samples(&resid).stderr / b.mean })
}

/// Empirical check at `κ = 8/3`, where the loop measure is Werner's measure
/// and the prediction is 1.
///
/// Counts soup loops whose outer boundary stays in the rasterized `A_{1−ε}`
/// (resp. `f(A_{1−ε})`) and winds around the core point, over one soup for
/// all `ε`. Only loops through the ray from the core point to the right can
/// wind around it, so the soup is rooted there.
pub fn om_empirical_83(cfg: &OMConfig, soup: &SoupSettings) -> Result<IdentityReport> {
    cfg.validate()?;
    if (cfg.kappa - 8.0 / 3.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("the empirical check needs kappa = 8/3".into()));
    }
    let h = soup.mesh;
    let domain = soup.domain()?;
    let region = cfg.region()?;
    let core = region.core_point;
    let origin = C64::new(0.0, 0.0);
    let mut masks = Vec::new();
    for &eps in &cfg.eps_schedule {
        let round = SetSpec::Annulus { r: 1.0 - eps };
        masks.push(SiteMask::set(&round.sites(h)?)?);
        masks.push(SiteMask::set(&round.image(&cfg.map).sites(h)?)?);
    }
    // loops must stay inside the filled outer curves of the largest neighbourhood
    let outer = SetSpec::disk(origin, 1.0 / (1.0 - cfg.eps_schedule[0]));
    let filled = [SiteMask::set(&outer.sites(h)?)?, SiteMask::set(&outer.image(&cfg.map).sites(h)?)?];
    let row = (core.im / h).round() as i32;
    let roots: Vec<Site> = domain
        .sites()
        .iter()
        .filter(|s| s.y == row && s.x as f64 * h > core.re && filled.iter().any(|m| m.contains(**s)))
        .copied()
        .collect();
    let centers = [origin, core];
    let events = masks.len();
    let counts = boundary_event_counts(
        &roots,
        &domain,
        soup.replicas,
        soup.seed,
        events,
        |t| filled.iter().any(|m| t.iter().all(|s| m.contains(*s))),
        |b, flags| {
            let pts: Vec<C64> = b.iter().map(|s| C64::new(s.x as f64 * h, s.y as f64 * h)).collect();
            for (e, m) in masks.iter().enumerate() {
                if b.iter().all(|s| m.contains(*s)) {
                    flags[e] = winding_number_polyline(&pts, centers[e % 2]).map(|w| w != 0).unwrap_or(false);
                }
            }
        },
    )?;
    let counts: Vec<Vec<f64>> = counts.iter().map(|c| as_f64(c)).collect();
    let totals: Vec<f64> = counts.iter().map(|c| c.iter().sum()).collect();
    let mut ratios = Vec::new();
    for k in 0..cfg.eps_schedule.len() {
        ratios.push(paired_ratio(&counts[2 * k + 1], &counts[2 * k])?);
    }
    let monotone = |off: usize| (0..cfg.eps_schedule.len() - 1).all(|k| totals[2 * (k + 1) + off] <= totals[2 * k + off]);
    let within = ratios.iter().all(|r| (r.value - 1.0).abs() <= 3.0 * r.stderr);
    let last = *ratios.last().unwrap();
    Ok(IdentityReport::new(
        "om_empirical_8_3",
        last,
        Measured::exact(1.0),
        0.0,
        json!({
            "eps": cfg.eps_schedule,
            "circle_counts": (0..cfg.eps_schedule.len()).map(|k| totals[2 * k]).collect::<Vec<_>>(),
            "curve_counts": (0..cfg.eps_schedule.len()).map(|k| totals[2 * k + 1]).collect::<Vec<_>>(),
            "ratios": ratios,
            "roots": roots.len(),
        }),
        json!({ "config": cfg, "soup": soup }),
    )
    .check("every ratio within 3 sigma of 1", within)
    .check("counts decrease with epsilon", monotone(0) && monotone(1)))
}

/// Time steps of the discretized Brownian paths.
pub const BROWNIAN_STEPS: usize = 1024;

/// `exp(−O(φ)/κ)` with `O(φ) = ½∫φ′²`.
pub fn brownian_om_prediction(phi: &DrivingFunction, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidArgument("kappa must be positive".into()));
    }
    Ok((-dirichlet_energy(phi)? / kappa).exp())
}

/// Particles per chunk; chunk `c` at step `k` draws from its own stream.
const CHUNK: usize = 4096;

/// Tube estimate for the discretized walk `Y` with `N(0, σ²)` steps.
struct TubeRun {
    /// `log P(|Y_k| < ε for all k)`.
    log_p: f64,
    /// Weighted mean of `exp(−Σ Δφ_k ΔY_k / σ²)` under the tube-conditioned law.
    tilt: f64,
    tilt_stderr: f64,
    min_ess: f64,
}

/// Sequential Monte Carlo over the tube event: every step draws the
/// increment from the Gaussian restricted to the tube window, weights the
/// particle by the window mass and resamples systematically when the
/// effective sample size halves.
fn tube_smc(dphi: &[f64], sigma: f64, eps: f64, n: usize, seed: u64, stream: u64) -> TubeRun {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut y = vec![0.0f64; n];
    let mut g = vec![0.0f64; n];
    let mut w = vec![1.0f64; n];
    let mut log_p = 0.0;
    let mut min_ess = n as f64;
    let chunks = n.div_ceil(CHUNK) as u64;
    for (k, &d) in dphi.iter().enumerate() {
        y.par_chunks_mut(CHUNK)
            .zip(g.par_chunks_mut(CHUNK))
            .zip(w.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, ((ys, gs), ws))| {
                let mut rng = rng_for(seed, stream, k as u64 * chunks + c as u64);
                for ((yi, gi), wi) in ys.iter_mut().zip(gs.iter_mut()).zip(ws.iter_mut()) {
                    let mut lo = (-eps - *yi) / sigma;
                    let mut hi = (eps - *yi) / sigma;
                    // keep the window in the lower tail, where the CDF is accurate
                    let flip = lo > 0.0;
                    if flip {
                        (lo, hi) = (-hi, -lo);
                    }
                    let (pa, pb) = (normal.cdf(lo), normal.cdf(hi));
                    let mass = (pb - pa).max(0.0);
                    let u: f64 = rng.gen();
                    let z = normal.inverse_cdf(pa + u * (pb - pa)).clamp(lo, hi);
                    let dy = sigma * if flip { -z } else { z };
                    *yi += dy;
                    *gi += d * dy;
                    *wi *= mass;
                }
            });
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return TubeRun { log_p: f64::NEG_INFINITY, tilt: f64::NAN, tilt_stderr: f64::NAN, min_ess: 0.0 };
        }
        log_p += (total / n as f64).ln();
        let scale = n as f64 / total;
        w.iter_mut().for_each(|x| *x *= scale);
        let ess = n as f64 * n as f64 / w.iter().map(|x| x * x).sum::<f64>();
        min_ess = min_ess.min(ess);
        if ess < 0.5 * n as f64 {
            let u: f64 = rng_for(seed, stream, u64::MAX - k as u64).gen();
            let mut idx = Vec::with_capacity(n);
            let mut cum = w[0];
            let mut j = 0;
            for i in 0..n {
                let target = u + i as f64;
                while cum < target && j + 1 < n {
                    j += 1;
                    cum += w[j];
                }
                idx.push(j);
            }
            y = idx.iter().map(|&j| y[j]).collect();
            g = idx.iter().map(|&j| g[j]).collect();
            w.iter_mut().for_each(|x| *x = 1.0);
        }
    }
    let s2 = sigma * sigma;
    let e: Vec<f64> = g.iter().map(|x| (-x / s2).exp()).collect();
    let sw: f64 = w.iter().sum();
    let tilt = e.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let var = e.iter().zip(&w).map(|(a, b)| b * (a - tilt).powi(2)).sum::<f64>() / sw;
    let ess = sw * sw / w.iter().map(|x| x * x).sum::<f64>();
    TubeRun { log_p, tilt, tilt_stderr: (var / ess).sqrt(), min_ess }
}

/// `P(sup|√κB − φ| < ε) / P(sup|√κB| < ε)` along `eps_schedule`, against
/// `exp(−O(φ)/κ)`, for the walk with `BROWNIAN_STEPS` Gaussian steps checked
/// at the grid times.
///
/// The report compares the ratio at the smallest `ε` with the prediction,
/// allowing 10%; the check requires the distance to the prediction not to
/// grow along the schedule.
pub fn brownian_om_check(
    phi: &DrivingFunction,
    kappa: f64,
    eps_schedule: &[f64],
    sample_count: u64,
    seed: u64,
) -> Result<IdentityReport> {
    if (phi.total_time() - 1.0).abs() > 1e-12 || phi.values()[0] != 0.0 {
        return Err(Error::InvalidArgument("phi must start at 0 on [0, 1]".into()));
    }
    if eps_schedule.is_empty() || eps_schedule.windows(2).any(|w| w[1] >= w[0]) || eps_schedule.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("epsilon schedule must be positive and decreasing".into()));
    }
    if sample_count < 100_000 {
        return Err(Error::InvalidArgument("need at least 1e5 sample paths".into()));
    }
    let prediction = brownian_om_prediction(phi, kappa)?;
    let dt = 1.0 / BROWNIAN_STEPS as f64;
    let sigma = (kappa * dt).sqrt();
    let centers: Vec<f64> = (1..=BROWNIAN_STEPS).map(|k| phi.at(k as f64 * dt)).collect();
    let dphi: Vec<f64> = centers.iter().scan(0.0, |prev, &c| {
        let d = c - *prev;
        *prev = c;
        Some(d)
    }).collect();
    // discrete Girsanov: the shifted tube is the centred one reweighted by
    // exp(−Σ Δφ ΔY/σ² − Σ Δφ²/2σ²)
    let shift = dphi.iter().map(|d| d * d).sum::<f64>() / (2.0 * sigma * sigma);
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for (i, &eps) in eps_schedule.iter().enumerate() {
        let run = tube_smc(&dphi, sigma, eps, sample_count as usize, seed, i as u64);
        if !run.log_p.is_finite() {
            return Err(Error::EpsilonTooSmall);
        }
        let factor = (-shift).exp();
        let ratio = Measured { value: factor * run.tilt, stderr: factor * run.tilt_stderr };
        rows.push(json!({
            "eps": eps,
            "log_p_zero": run.log_p,
            "log_p_phi": run.log_p + ratio.value.ln(),
            "ratio": ratio,
            "min_ess": run.min_ess,
        }));
        ratios.push(ratio);
    }
    let gaps: Vec<f64> = ratios.iter().map(|r| (r.value - prediction).abs()).collect();
    let approaching = gaps.windows(2).all(|g| g[1] <= g[0]);
    let last = *ratios.last().unwrap();
    Ok(IdentityReport::new(
        "brownian_om",
        last,
        Measured::exact(prediction),
        0.1 * prediction,
        json!({ "per_eps": rows, "onsager_machlup": dirichlet_energy(phi)? }),
        json!({
            "phi_t": phi.times(), "phi": phi.values(), "kappa": kappa, "eps_schedule": eps_schedule,
            "sample_count": sample_count, "seed": seed, "steps": BROWNIAN_STEPS,
        }),
    )
    .check("ratios approach the prediction", approaching))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn central_charge_values() {
        assert_eq!(central_charge(8.0 / 3.0).unwrap(), 0.0);
        assert!((central_charge(2.0).unwrap() + 2.0).abs() < 1e-15);
        assert!((central_charge(4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(central_charge(0.0).is_err());
        assert!(central_charge(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn verdict_matches_budget(l in -5.0..5.0f64, r in -5.0..5.0f64, sl in 0.0..1.0f64, sr in 0.0..1.0f64, a in 0.0..1.0f64) {
            let rep = IdentityReport::new("t", Measured { value: l, stderr: sl }, Measured { value: r, stderr: sr }, a, Value::Null, Value::Null);
            prop_assert!((rep.budget - (3.0 * (sl * sl + sr * sr).sqrt() + a)).abs() < 1e-12);
            prop_assert_eq!(rep.passed(), (l - r).abs() <= rep.budget);
        }

        #[test]
        fn om_value_is_one_at_zero_charge(e in 0.0..100.0f64) {
            prop_assert_eq!(om_value(8.0 / 3.0, e).unwrap(), 1.0);
        }
    }

    #[test]
    fn om_value_arithmetic() {
        assert!((om_value(2.0, 12.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn om_prediction_for_circles() {
        for kappa in [1.0, 2.0, 8.0 / 3.0, 4.0] {
            let cfg = OMConfig::new(kappa, ConformalTestMap::identity(), 0.5, vec![0.2, 0.1]).unwrap();
            let p = om_prediction(&cfg).unwrap();
            let c = central_charge(kappa).unwrap().abs();
            assert!(p.value >= (-c / 24.0 * 0.05).exp() && p.value <= (c / 24.0 * 0.05).exp());
        }
        let q = ConformalTestMap::quadratic_auto(C64::new(0.2, 0.0)).unwrap();
        assert_eq!(om_prediction(&OMConfig::new(8.0 / 3.0, q, 0.5, vec![0.2]).unwrap()).unwrap().value, 1.0);
    }

    #[test]
    fn om_config_is_validated() {
        let id = ConformalTestMap::identity();
        assert!(OMConfig::new(5.0, id.clone(), 0.5, vec![0.2]).is_err());
        assert!(OMConfig::new(2.0, id.clone(), 0.5, vec![0.1, 0.2]).is_err());
        assert!(OMConfig::new(2.0, id, 0.5, vec![0.6]).is_err());
    }

    #[test]
    fn brownian_prediction_scales_with_kappa() {
        let phi = DrivingFunction::from_fn(1.0, 16, |t| t / 2.0).unwrap();
        let p1 = brownian_om_prediction(&phi, 1.0).unwrap();
        assert!((p1 - (-0.125f64).exp()).abs() < 1e-12);
        assert!((brownian_om_prediction(&phi, 4.0).unwrap() - p1.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn zero_path_has_unit_ratio() {
        let phi = DrivingFunction::from_fn(1.0, 4, |_| 0.0).unwrap();
        let r = brownian_om_check(&phi, 1.0, &[0.5], 100_000, 3).unwrap();
        assert_eq!(r.lhs.value, 1.0);
        assert!(r.passed());
        assert!(brownian_om_check(&phi, 1.0, &[0.5], 10, 3).is_err());
    }

    #[test]
    fn restriction_lemma_trivial_and_nested() {
        let o = C64::new(0.0, 0.0);
        let k = SetSpec::disk(o, 0.25);
        let d = SetSpec::disk(o, 1.0);
        let same = verify_restriction_lemma(&k, &d, &d, &[1.0 / 8.0]).unwrap();
        assert_eq!(same.lhs.value, same.rhs.value);
        let r = verify_restriction_lemma(&k, &SetSpec::disk(o, 0.5), &d, &[1.0 / 8.0, 1.0 / 16.0]).unwrap();
        assert!(r.passed(), "{}", r.summary());
        assert!(r.discrepancy < 1e-8);
        assert!(verify_restriction_lemma(&d, &k, &d, &[1.0 / 8.0]).is_err());
    }

    #[test]
    fn mobius_mass_identity_is_balanced() {
        let soup = SoupSettings { mesh: 1.0 / 8.0, box_half: 4.0, replicas: 400, seed: 9 };
        let m = ConformalTestMap::mobius(C64::new(1.0, 0.0), C64::new(0.1, 0.0), C64::new(0.1, 0.0), C64::new(1.0, 0.0))
            .unwrap();
        let k = SetSpec::Segment { from: C64::new(0.7, 0.0), to: C64::new(1.3, 0.0), thickness: 0.0 };
        let rep = verify_mass_identity(&k, &AnnularRegion::round(0.5).unwrap(), &m, &soup).unwrap();
        assert!(rep.passed(), "{}", rep.summary());
        let again = verify_mass_identity(&k, &AnnularRegion::round(0.5).unwrap(), &m, &soup).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn empirical_check_needs_hits() {
        let cfg = OMConfig::new(8.0 / 3.0, ConformalTestMap::identity(), 0.5, vec![0.2]).unwrap();
        let soup = SoupSettings { mesh: 1.0 / 8.0, box_half: 2.0, replicas: 20, seed: 1 };
        assert!(matches!(om_empirical_83(&cfg, &soup), Err(Error::InsufficientReplicas)));
        let two = OMConfig::new(2.0, ConformalTestMap::identity(), 0.5, vec![0.2]).unwrap();
        assert!(om_empirical_83(&two, &soup).is_err());
    }

    #[test]
    fn test_loops_stay_in_the_neighbourhood() {
        for eps in [0.2, 0.05] {
            for c in test_loops(eps, 8, 128).unwrap() {
                assert!(c.vertices().iter().all(|z| z.norm() >= 1.0 - eps && z.norm() <= 1.0 / (1.0 - eps)));
            }
        }
    }
}
