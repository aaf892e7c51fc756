//! Acceptance run: every criterion at its stated tolerance, one line each.
//!
//! `LOOPLAB_ACCEPTANCE_ONLY=4,7` restricts the run to the listed criteria.

use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use looplab::geometry::{AnnularRegion, JordanCurve};
use looplab::identities::{
    brownian_om_check, om_empirical_83, om_prediction, shrinking_disks, verify_divergence_lemma,
    verify_energy_variation, verify_mass_identity, verify_restriction_lemma, IdentityReport, OMConfig,
    SoupSettings,
};
use looplab::lattice::{
    hitting_mass, lambda_star, loop_mass, werner_mass, LatticeDomain, SetSpec, Site, SiteMask, SiteSet, SoupSampler,
    DEFAULT_R_FACTORS,
};
use looplab::loewner::{
    exact_map_pair, liouville_action, riemann_maps, rooted_loop_energy, DrivingFunction, QuadratureSpec,
    DEFAULT_EPS_SCHEDULE,
};
use looplab::maps::ConformalTestMap;
use looplab::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
    /// Serialized stochastic output, compared across thread counts.
    fingerprint: Option<String>,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, fingerprint: None }
}

fn stochastic(pass: bool, detail: String, fingerprint: String) -> Outcome {
    Outcome { pass, detail, fingerprint: Some(fingerprint) }
}

type Criterion = fn() -> looplab::Result<Outcome>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn report_json(r: &IdentityReport) -> String {
    serde_json::to_string(r).unwrap()
}

/// All fixed polyominoes with at most `max` cells, normalized to the origin.
fn polyominoes(max: usize) -> Vec<Vec<(i32, i32)>> {
    let normalize = |cells: &BTreeSet<(i32, i32)>| -> Vec<(i32, i32)> {
        let x0 = cells.iter().map(|p| p.0).min().unwrap();
        let y0 = cells.iter().map(|p| p.1).min().unwrap();
        cells.iter().map(|&(x, y)| (x - x0, y - y0)).collect()
    };
    let mut layer: HashSet<Vec<(i32, i32)>> = HashSet::from([vec![(0, 0)]]);
    let mut all: Vec<Vec<(i32, i32)>> = layer.iter().cloned().collect();
    for _ in 1..max {
        let mut next = HashSet::new();
        for p in &layer {
            let set: BTreeSet<(i32, i32)> = p.iter().copied().collect();
            for &(x, y) in p {
                for q in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
                    if !set.contains(&q) {
                        let mut grown = set.clone();
                        grown.insert(q);
                        next.insert(normalize(&grown));
                    }
                }
            }
        }
        all.extend(next.iter().cloned());
        layer = next;
    }
    all
}

/// `Σ_k tr(P^k)/k` by dense matrix powers.
fn loop_mass_series(cells: &[(i32, i32)]) -> f64 {
    let n = cells.len();
    let p: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (a, b) = (cells[i], cells[j]);
                    if (a.0 - b.0).abs() + (a.1 - b.1).abs() == 1 { 0.25 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let mut pk = p.clone();
    let mut total = 0.0;
    // spectral radius stays below 0.6 for six cells
    for k in 1..=200 {
        total += (0..n).map(|i| pk[i][i]).sum::<f64>() / k as f64;
        pk = (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| pk[i][l] * p[l][j]).sum()).collect()).collect();
    }
    total
}

fn criterion_1() -> looplab::Result<Outcome> {
    let two = LatticeDomain::new(1.0, [Site::new(0, 0), Site::new(1, 0)])?;
    let m2 = loop_mass(&two)?.value;
    let err2 = (m2 - (16.0f64 / 15.0).ln()).abs();
    let shapes = polyominoes(6);
    let mut worst = 0.0f64;
    for cells in &shapes {
        let d = LatticeDomain::new(1.0, cells.iter().map(|&(x, y)| Site::new(x, y)))?;
        worst = worst.max((loop_mass(&d)?.value - loop_mass_series(cells)).abs());
    }
    Ok(outcome(
        err2 <= 1e-10 && worst <= 1e-8 && shapes.len() == 1 + 2 + 6 + 19 + 63 + 216,
        format!("two-site error {err2:.1e}; worst of {} polyominoes {worst:.1e}", shapes.len()),
    ))
}

fn criterion_2() -> looplab::Result<Outcome> {
    let d = LatticeDomain::rect(1.0, 0, 0, 20, 20)?;
    let exact = loop_mass(&d)?.value;
    let sampler = SoupSampler::full(&d)?;
    let counts: Vec<f64> = sampler.map_replicas(10_000, |s, r| {
        let mut n = 0u32;
        s.for_each_loop(17, r, |_| n += 1);
        n as f64
    });
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let z = (mean - exact) / se;
    Ok(stochastic(
        z.abs() <= 4.0,
        format!("mean loops {mean:.3} ± {se:.3} vs loop mass {exact:.3} ({z:+.2} se)"),
        format!("{counts:?}"),
    ))
}

fn block(x0: i32, y0: i32, w: i32, h: i32) -> SiteSet {
    (y0..y0 + h).flat_map(|y| (x0..x0 + w).map(move |x| Site::new(x, y))).collect()
}

fn criterion_3() -> looplab::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut lines = Vec::new();
    let mut prints = Vec::new();
    let mut pass = true;
    for i in 0..5 {
        let (a, b, gap) = (rng.gen_range(2..5), rng.gen_range(2..5), rng.gen_range(1..5));
        let x1 = rng.gen_range(1..4);
        let x2 = x1 + a + gap;
        let (w, h) = (x2 + b + rng.gen_range(1..5), rng.gen_range(8..13));
        let d = LatticeDomain::rect(1.0, 0, 0, w, h)?;
        let v1 = block(x1, rng.gen_range(1..h - a), a, a);
        let v2 = block(x2, rng.gen_range(1..h - b), b, b);
        let bound = hitting_mass(&v1, &v2, &d)?.value;
        let est = werner_mass(&v1, &SiteMask::set(&v2)?, &d, 1000, 100 + i)?;
        let ok = est.mass.value <= bound + 3.0 * est.mass.stderr;
        pass &= ok;
        lines.push(format!("{:.3}±{:.3} ≤ {:.3}", est.mass.value, est.mass.stderr, bound));
        prints.push(serde_json::to_string(&est).unwrap());
    }
    Ok(stochastic(pass, format!("W vs B: {}", lines.join(", ")), prints.join("\n")))
}

fn criterion_4() -> looplab::Result<Outcome> {
    let o = c(0.0, 0.0);
    let r = verify_restriction_lemma(
        &SetSpec::disk(o, 0.25),
        &SetSpec::disk(o, 0.5),
        &SetSpec::disk(o, 1.0),
        &[1.0 / 64.0, 1.0 / 128.0],
    )?;
    Ok(outcome(r.passed(), r.summary()))
}

fn criterion_5() -> looplab::Result<Outcome> {
    let meshes = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let v1 = SetSpec::disk(c(-0.5, 0.0), 0.25);
    let v2 = SetSpec::disk(c(0.5, 0.0), 0.25);
    let est = lambda_star(&v1, &v2, &DEFAULT_R_FACTORS, &meshes)?;
    let scaled = lambda_star(&SetSpec::disk(c(-1.0, 0.0), 0.5), &SetSpec::disk(c(1.0, 0.0), 0.5), &DEFAULT_R_FACTORS, &meshes)?;
    let gap = est.stabilization_gap;
    let scale_diff = (est.value - scaled.value).abs();
    Ok(outcome(
        gap <= 0.05 && scaled.stabilization_gap <= 0.05 && scale_diff <= 0.05,
        format!(
            "Λ* {:.4}, last extrapolants differ by {gap:.4}; scaled ×2 gives {:.4} (|Δ| {scale_diff:.4})",
            est.value, scaled.value
        ),
    ))
}

fn criterion_6() -> looplab::Result<Outcome> {
    let soup = SoupSettings { mesh: 1.0 / 64.0, box_half: 3.0, replicas: 4000, seed: 5 };
    let family = shrinking_disks(c(1.5, 0.0), 0.3, 0.4, 4);
    let (lambda, werner) = verify_divergence_lemma(&SetSpec::disk(c(0.0, 0.0), 0.5), &family, &soup)?;
    Ok(stochastic(
        lambda.passed() && werner.passed(),
        format!("Λ* trend {}; final Ŵ {:.4} ± {:.4}", if lambda.passed() { "holds" } else { "broken" }, werner.lhs.value, werner.lhs.stderr),
        report_json(&lambda) + &report_json(&werner),
    ))
}

fn criterion_7() -> looplab::Result<Outcome> {
    let spec = QuadratureSpec::default();
    let circles = [
        JordanCurve::unit_circle(1024),
        JordanCurve::circle(c(5.0, 0.0), 1.0, 1024),
        JordanCurve::circle(c(0.3, -0.2), 2.0, 1024),
    ];
    let (mut rooted, mut exact, mut numerical) = (0.0f64, 0.0f64, 0.0f64);
    for circle in &circles {
        rooted = rooted.max(rooted_loop_energy(circle, &DEFAULT_EPS_SCHEDULE)?.value.abs());
        let maps = exact_map_pair(circle)?.expect("circles have exact maps");
        exact = exact.max(liouville_action(&maps, &spec)?.value.abs());
        let bare = JordanCurve::new(circle.vertices().to_vec(), 0)?;
        numerical = numerical.max(liouville_action(&riemann_maps(&bare)?, &spec)?.value.abs());
    }
    Ok(outcome(
        rooted <= 0.05 && exact <= 1e-6 && numerical <= 0.01,
        format!("max rooted {rooted:.2e}, disk exact maps {exact:.2e}, disk numerical maps {numerical:.2e}"),
    ))
}

fn quadratic_curve(coef: f64, n: usize) -> looplab::Result<JordanCurve> {
    ConformalTestMap::quadratic_auto(c(coef, 0.0))?.push_curve(&JordanCurve::unit_circle(n), None)
}

fn criterion_8() -> looplab::Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for coef in [0.1, 0.2, 0.3] {
        let curve = quadratic_curve(coef, 1024)?;
        let rooted = rooted_loop_energy(&curve, &DEFAULT_EPS_SCHEDULE)?.value;
        let disk = liouville_action(&exact_map_pair(&curve)?.expect("exact"), &QuadratureSpec::default())?.value;
        pass &= (rooted - disk).abs() <= 0.05f64.max(0.05 * disk.abs());
        parts.push(format!("c={coef}: {rooted:.4} vs {disk:.4}"));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn criterion_9() -> looplab::Result<Outcome> {
    let curve = quadratic_curve(0.2, 1024)?;
    let base = rooted_loop_energy(&curve, &DEFAULT_EPS_SCHEDULE)?.value;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut unit = || c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut worst = 0.0f64;
    let mut tried = 0;
    while tried < 10 {
        let (a, b, cc, d) = (unit(), unit(), unit(), unit());
        if (a * d - b * cc).norm() < 0.3 || (cc.norm() > 1e-9 && curve.distance_to(-d / cc) < 1.0) {
            continue;
        }
        let m = ConformalTestMap::mobius(a, b, cc, d)?;
        let image = m.push_curve(&curve, None)?;
        let e = rooted_loop_energy(&image, &DEFAULT_EPS_SCHEDULE)?.value;
        worst = worst.max((e - base).abs());
        tried += 1;
    }
    Ok(outcome(worst <= 0.05, format!("energy {base:.4}; worst change over 10 Möbius maps {worst:.1e}")))
}

fn mass_soup() -> SoupSettings {
    SoupSettings { mesh: 1.0 / 32.0, box_half: 4.0, replicas: 4000, seed: 5 }
}

fn criterion_10() -> looplab::Result<Outcome> {
    let soup = mass_soup();
    let a5 = AnnularRegion::round(0.5)?;
    let q2 = ConformalTestMap::quadratic_auto(c(0.2, 0.0))?;
    let stick = SetSpec::Segment { from: c(0.6, 0.0), to: c(1.4, 0.0), thickness: 0.0 };
    let tube = SetSpec::CurveTube { curve: JordanCurve::unit_circle(256).vertices().to_vec(), thickness: 0.0 };
    let mobius = ConformalTestMap::mobius(c(1.0, 0.0), c(0.2, 0.1), c(0.1, 0.0), c(1.0, 0.0))?;
    let m = verify_mass_identity(&stick, &a5, &mobius, &soup)?;
    let mobius_ok = m.lhs.value.abs() <= m.budget && m.rhs.value.abs() <= m.budget;
    let quadratic = [
        verify_mass_identity(&stick, &a5, &q2, &soup)?,
        verify_mass_identity(&tube, &a5, &q2, &soup)?,
        verify_mass_identity(
            &SetSpec::disk(c(0.0, 1.1), 0.2),
            &AnnularRegion::round(0.6)?,
            &ConformalTestMap::quadratic_auto(c(0.15, 0.0))?,
            &soup,
        )?,
    ];
    let quad_ok = quadratic.iter().all(|r| r.discrepancy <= 3.0 * r.lhs.stderr + 0.1 && r.passed());
    let mut detail = vec![format!("Möbius ΔŴ {:.4} ΔΛ* {:.4} budget {:.4}", m.lhs.value, m.rhs.value, m.budget)];
    detail.extend(quadratic.iter().map(|r| format!("ΔŴ {:.4}±{:.4} vs ΔΛ* {:.4}", r.lhs.value, r.lhs.stderr, r.rhs.value)));
    let print = std::iter::once(&m).chain(&quadratic).map(report_json).collect::<Vec<_>>().join("\n");
    Ok(stochastic(mobius_ok && quad_ok, detail.join("; "), print))
}

fn criterion_11() -> looplab::Result<Outcome> {
    let r = verify_energy_variation(
        &JordanCurve::unit_circle(1024),
        &AnnularRegion::round(0.5)?,
        &ConformalTestMap::quadratic_auto(c(0.2, 0.0))?,
        &mass_soup(),
        0.1,
    )?;
    let ok = (r.lhs.value - r.rhs.value).abs() <= 3.0 * r.rhs.stderr + 0.1;
    Ok(stochastic(
        ok && r.passed(),
        format!("ΔI {:.4} vs 12ΔŴ {:.4} ± {:.4}", r.lhs.value, r.rhs.value, r.rhs.stderr),
        report_json(&r),
    ))
}

fn om83_config() -> looplab::Result<OMConfig> {
    OMConfig::new(8.0 / 3.0, ConformalTestMap::quadratic_auto(c(0.2, 0.0))?, 0.5, vec![0.2, 0.1, 0.05])
}

fn criterion_12() -> looplab::Result<Outcome> {
    let cfg = om83_config()?;
    let prediction = om_prediction(&cfg)?.value;
    let soup = SoupSettings { mesh: 1.0 / 16.0, box_half: 3.0, replicas: 100_000, seed: 3 };
    Ok(match om_empirical_83(&cfg, &soup) {
        Ok(r) => stochastic(
            r.passed() && prediction == 1.0,
            format!("prediction {prediction}; {}", r.summary()),
            report_json(&r),
        ),
        Err(e) => stochastic(
            false,
            format!("prediction {prediction}; empirical ratio unavailable: {e} (no sampled loop in any neighbourhood)"),
            e.to_string(),
        ),
    })
}

fn half_slope() -> DrivingFunction {
    DrivingFunction::from_fn(1.0, 1024, |t| 0.5 * t).unwrap()
}

fn criterion_13() -> looplab::Result<Outcome> {
    let target = (-0.125f64).exp();
    let r = brownian_om_check(&half_slope(), 1.0, &[0.4, 0.3, 0.2], 100_000, 7)?;
    let zero = DrivingFunction::from_fn(1.0, 1024, |_| 0.0)?;
    let z = brownian_om_check(&zero, 1.0, &[0.4], 100_000, 3)?;
    let ok = r.passed() && (r.rhs.value - target).abs() < 1e-12 && (r.lhs.value - target).abs() <= 0.1 * target;
    Ok(stochastic(
        ok && z.lhs.value == 1.0,
        format!("final ratio {:.4} ± {:.4} vs e^(-1/8) = {target:.4}; zero path ratio {}", r.lhs.value, r.lhs.stderr, z.lhs.value),
        report_json(&r) + &report_json(&z),
    ))
}

/// Criteria that are reported but not asserted; see the README.
const REPORT_ONLY: [u32; 1] = [12];

const CRITERIA: [(u32, &str, Criterion); 13] = [
    (1, "exact small-instance loop mass", criterion_1),
    (2, "soup calibration", criterion_2),
    (3, "Werner mass dominated by hitting mass", criterion_3),
    (4, "restriction identity", criterion_4),
    (5, "Λ* renormalization and scaling", criterion_5),
    (6, "shrinking-set trends", criterion_6),
    (7, "circles have zero energy", criterion_7),
    (8, "rooted and disk routes agree", criterion_8),
    (9, "Möbius invariance of the energy", criterion_9),
    (10, "Werner mass identity", criterion_10),
    (11, "energy variation identity", criterion_11),
    (12, "κ = 8/3 neighbourhood ratio", criterion_12),
    (13, "Brownian Onsager–Machlup ratio", criterion_13),
];

fn selected() -> Option<Vec<u32>> {
    let only = std::env::var("LOOPLAB_ACCEPTANCE_ONLY").ok()?;
    Some(only.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn acceptance() {
    let only = selected();
    let wanted = |id: u32| only.as_ref().map_or(true, |v| v.contains(&id));
    let wide = pool(4);
    let mut failures = Vec::new();
    let mut prints = Vec::new();
    for (id, name, run) in CRITERIA {
        if !wanted(id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match wide.install(run) {
            Ok(o) => {
                if let Some(f) = o.fingerprint {
                    prints.push((id, run, f));
                }
                (o.pass, o.detail)
            }
            Err(e) => (false, format!("error: {e}")),
        };
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} [{:.1}s] {name}: {detail}", start.elapsed().as_secs_f64());
        if !pass && !REPORT_ONLY.contains(&id) {
            failures.push(id);
        }
    }
    if wanted(14) {
        let start = Instant::now();
        let narrow = pool(1);
        let mut differing = Vec::new();
        for (id, run, first) in &prints {
            let again = match narrow.install(run) {
                Ok(o) => o.fingerprint.unwrap_or_default(),
                Err(e) => e.to_string(),
            };
            if &again != first {
                differing.push(*id);
            }
        }
        let ids: Vec<u32> = prints.iter().map(|p| p.0).collect();
        let pass = differing.is_empty() && !prints.is_empty();
        println!(
            "criterion 14 {} [{:.1}s] determinism across thread counts: runs {ids:?} repeated on 1 thread vs 4, differing {differing:?}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !pass {
            failures.push(14);
        }
    }
    if wanted(12) {
        let prediction = om_prediction(&om83_config().unwrap()).unwrap().value;
        assert_eq!(prediction, 1.0, "κ = 8/3 prediction must be exactly 1");
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
