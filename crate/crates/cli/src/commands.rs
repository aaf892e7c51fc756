//! Command implementations. Each resolves its defaults into the configuration
//! first, so the echoed configuration is complete.

use std::fs;

use looplab::geometry::{AnnularRegion, JordanCurve};
use looplab::identities::{
    brownian_om_check, om_consistency, om_empirical_83, om_prediction, shrinking_disks,
    verify_continuity, verify_divergence_lemma, verify_energy_variation, verify_mass_identity,
    verify_restriction_lemma, IdentityReport, OMConfig, SoupSettings,
};
use looplab::lattice::{
    hitting_mass, lambda_star, loop_mass, werner_mass, LatticeDomain, SetSpec, SiteMask, SiteSet, SoupSampler,
    DEFAULT_R_FACTORS,
};
use looplab::loewner::{liouville_action, rooted_loop_energy, best_map_pair, DrivingFunction, QuadratureSpec};
use looplab::maps::ConformalTestMap;
use looplab::C64;
use serde_json::{json, Value};

use crate::config::{config_err, CommandKind, CurveArg, Identity, PhiArg, Route, RunConfig};
use crate::output::{fmt, Sink, Table};

pub struct Outcome {
    pub payload: Value,
    pub tables: Vec<Table>,
    /// `Some(false)` for a failed verification.
    pub passed: Option<bool>,
    pub summary: Vec<String>,
}

impl Outcome {
    fn new(payload: Value) -> Self {
        Self { payload, tables: Vec::new(), passed: None, summary: Vec::new() }
    }
}

pub const DEFAULT_MESHES: [f64; 3] = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
pub const RESTRICTION_MESHES: [f64; 2] = [1.0 / 64.0, 1.0 / 128.0];
pub const OM_EPS: [f64; 3] = [0.2, 0.1, 0.05];
pub const CONTINUITY_EPS: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];
pub const BROWNIAN_EPS: [f64; 3] = [0.4, 0.3, 0.2];

fn need<T: Clone>(v: &Option<T>, what: &str, cmd: &str) -> anyhow::Result<T> {
    v.clone().ok_or_else(|| config_err(format!("{cmd}: missing `{what}`")))
}

fn need_seed(cfg: &RunConfig, cmd: &str) -> anyhow::Result<u64> {
    need(&cfg.seed, "seed", cmd)
}

pub fn load_curve(arg: &CurveArg) -> anyhow::Result<JordanCurve> {
    match arg {
        CurveArg::Vertices { vertices, root } => Ok(JordanCurve::new(vertices.clone(), *root)?),
        CurveArg::Named(s) => {
            let parts: Vec<&str> = s.split(':').collect();
            let count = |p: &str| p.parse::<usize>().map_err(|_| config_err(format!("bad vertex count in {s:?}")));
            match parts.as_slice() {
                ["circle", n] => Ok(JordanCurve::unit_circle(count(n)?)),
                ["quadratic", c, n] => {
                    let c: f64 = c.parse().map_err(|_| config_err(format!("bad coefficient in {s:?}")))?;
                    let q = ConformalTestMap::quadratic_auto(C64::new(c, 0.0))?;
                    Ok(q.push_curve(&JordanCurve::unit_circle(count(n)?), None)?)
                }
                _ => {
                    let text =
                        fs::read_to_string(s).map_err(|e| config_err(format!("cannot read curve {s:?}: {e}")))?;
                    JordanCurve::parse(&text).map_err(|e| config_err(format!("{s}: {e}")))
                }
            }
        }
    }
}

fn load_phi(arg: &PhiArg) -> anyhow::Result<DrivingFunction> {
    match arg {
        PhiArg::Samples { t, w } => Ok(DrivingFunction::new(t.clone(), w.clone())?),
        PhiArg::Named(s) => {
            let (kind, a) = s.split_once(':').ok_or_else(|| config_err(format!("bad phi {s:?}")))?;
            let a: f64 = a.parse().map_err(|_| config_err(format!("bad phi parameter in {s:?}")))?;
            let n = 1024;
            Ok(match kind {
                "linear" => DrivingFunction::from_fn(1.0, n, |t| a * t)?,
                "sine" => DrivingFunction::from_fn(1.0, n, |t| a * (std::f64::consts::PI * t).sin())?,
                _ => return Err(config_err(format!("unknown phi {kind:?}; use linear:<a> or sine:<a>"))),
            })
        }
    }
}

fn soup_settings(cfg: &mut RunConfig, cmd: &str) -> anyhow::Result<SoupSettings> {
    let d = SoupSettings::default();
    let s = SoupSettings {
        mesh: *cfg.mesh.get_or_insert(d.mesh),
        box_half: *cfg.box_half.get_or_insert(d.box_half),
        replicas: *cfg.replicas.get_or_insert(d.replicas),
        seed: need_seed(cfg, cmd)?,
    };
    Ok(s)
}

fn lattice_domain(spec: &SetSpec, mesh: f64) -> anyhow::Result<LatticeDomain> {
    if !spec.is_bounded() {
        return Err(config_err("domain must be bounded"));
    }
    Ok(LatticeDomain::new(mesh, spec.sites(mesh)?)?)
}

fn within(set: SiteSet, domain: &LatticeDomain) -> SiteSet {
    set.into_iter().filter(|s| domain.contains(*s)).collect()
}

fn region(cfg: &mut RunConfig) -> anyhow::Result<(AnnularRegion, ConformalTestMap)> {
    let r = *cfg.annulus_r.get_or_insert(0.5);
    let map = cfg.map.get_or_insert_with(ConformalTestMap::identity).clone();
    Ok((AnnularRegion::round(r)?, map))
}

pub fn run(kind: CommandKind, cfg: &mut RunConfig, sink: &Sink) -> anyhow::Result<Outcome> {
    match kind {
        CommandKind::Energy => energy(cfg),
        CommandKind::Mass => mass(cfg),
        CommandKind::LambdaStar => lambda(cfg),
        CommandKind::Werner => werner(cfg),
        CommandKind::Soup => soup(cfg, sink),
        CommandKind::Verify => verify(cfg),
        CommandKind::Om => om(cfg),
        CommandKind::BrownianOm => brownian(cfg),
    }
}

fn energy(cfg: &mut RunConfig) -> anyhow::Result<Outcome> {
    let mut curve = load_curve(&need(&cfg.curve, "curve", "energy")?)?;
    if let Some(m) = &cfg.map {
        curve = m.push_curve(&curve, None)?;
    }
    let route = *cfg.route.get_or_insert(Route::Both);
    let eps = cfg.eps_schedule.get_or_insert_with(|| looplab::loewner::DEFAULT_EPS_SCHEDULE.to_vec()).clone();
    let rooted = match route {
        Route::Disk => None,
        _ => Some(rooted_loop_energy(&curve, &eps)?),
    };
    let disk = match route {
        Route::Rooted => None,
        _ => Some(liouville_action(&best_map_pair(&curve)?, &QuadratureSpec::default())?),
    };
    let mut out = Outcome::new(json!({ "vertices": curve.len(), "rooted": rooted, "disk": disk }));
    let mut t = Table::new("energy", &["eps", "energy"]);
    if let Some(r) = &rooted {
        for (e, v) in r.eps_sequence.iter().flatten() {
            t.push([fmt(*e), fmt(*v)]);
        }
        out.summary.push(format!("rooted energy {:.6} (error {:.2e})", r.value, r.error_estimate));
    }
    if let Some(d) = &disk {
        out.summary.push(format!("disk formula {:.6} (error {:.2e})", d.value, d.error_estimate));
    }
    out.tables.push(t);
    Ok(out)
}

fn mass(cfg: &mut RunConfig) -> anyhow::Result<Outcome> {
    let mesh = *cfg.mesh.get_or_insert(1.0 / 32.0);
    let domain = lattice_domain(&need(&cfg.domain, "domain", "mass")?, mesh)?;
    let (label, value) = match (&cfg.v1, &cfg.v2) {
        (Some(v1), Some(v2)) => {
            let s1 = within(v1.entry_sites(mesh)?, &domain);
            let s2 = within(v2.entry_sites(mesh)?, &domain);
            ("hitting_mass", hitting_mass(&s1, &s2, &domain)?)
        }
        (None, None) => ("loop_mass", loop_mass(&domain)?),
        _ => return Err(config_err("mass: give both `v1` and `v2`, or neither")),
    };
    let mut out = Outcome::new(json!({ "sites": domain.len(), label: value }));
    out.summary.push(format!("{label} {:.9}", value.value));
    Ok(out)
}

fn lambda(cfg: &mut RunConfig) -> anyhow::Result<Outcome> {
    let v1 = need(&cfg.v1, "v1", "lambda-star")?;
    let v2 = need(&cfg.v2, "v2", "lambda-star")?;
    let rf = cfg.r_factors.get_or_insert_with(|| DEFAULT_R_FACTORS.to_vec()).clone();
    let meshes = cfg.meshes.get_or_insert_with(|| DEFAULT_MESHES.to_vec()).clone();
    let est = lambda_star(&v1, &v2, &rf, &meshes)?;
    let mut t = Table::new("lambda_star", &["mesh", "R", "mass", "renormalized"]);
    for r in &est.rows {
        t.push([fmt(r.mesh), fmt(r.r), fmt(r.mass), fmt(r.renormalized)]);
    }
    let mut out = Outcome::new(serde_json::to_value(&est)?);
    out.summary.push(format!(
        "lambda* {:.6} (stabilization gap {:.2e}, mesh error {:.2e})",
        est.value, est.stabilization_gap, est.mesh_error
    ));
    out.tables.push(t);
    Ok(out)
}

fn werner(cfg: &mut RunConfig) -> anyhow::Result<Outcome> {
    let v1 = need(&cfg.v1, "v1", "werner")?;
    let v2 = need(&cfg.v2, "v2", "werner")?;
    let s = soup_settings(cfg, "werner")?;
    let domain = match &cfg.domain {
        Some(d) => lattice_domain(d, s.mesh)?,
        None => s.domain()?,
    };
    let s1 = within(v1.sites(s.mesh)?, &domain);
    let mask = match &v2 {
        SetSpec::Complement(inner) => SiteMask::complement_of(&inner.sites(s.mesh)?)?,
        other => SiteMask::set(&other.sites(s.mesh)?)?,
    };
    let est = werner_mass(&s1, &mask, &domain, s.replicas, s.seed)?;
    let mut t = Table::new("werner_counts", &["replica", "count"]);
    for (i, c) in est.counts.iter().enumerate() {
        t.push([i.to_string(), c.to_string()]);
    }
    let mut out = Outcome::new(json!({
        "mass": est.mass,
        "loops_per_replica": est.loops_per_replica,
        "sites": domain.len(),
    }));
    out.summary.push(format!("werner mass {:.6} ± {:.6}", est.mass.value, est.mass.stderr));
    out.tables.push(t);
    Ok(out)
}

fn soup(cfg: &mut RunConfig, sink: &Sink) -> anyhow::Result<Outcome> {
    let mesh = *cfg.mesh.get_or_insert(1.0 / 32.0);
    let seed = need_seed(cfg, "soup")?;
    let replicas = *cfg.replicas.get_or_insert(1);
    let domain = lattice_domain(&need(&cfg.domain, "domain", "soup")?, mesh)?;
    let sampler = SoupSampler::full(&domain)?;
    let name = sink.fresh_name(&format!("soup-{seed}"), "jsonl");
    let mut file = std::io::BufWriter::new(sink.create(&name)?);
    let mut t = Table::new("soup", &["replica", "loops", "steps"]);
    let mut counts = Vec::new();
    for r in 0..replicas {
        let s = sampler.sample(seed, r);
        s.write_jsonl(&mut file)?;
        let steps: usize = s.loops.iter().map(|l| l.sites.len()).sum();
        t.push([r.to_string(), s.loops.len().to_string(), steps.to_string()]);
        counts.push(s.loops.len());
    }
    std::io::Write::flush(&mut file)?;
    let mut out = Outcome::new(json!({
        "sites": domain.len(),
        "total_mass": sampler.total_mass(),
        "loop_counts": counts,
        "file": name,
    }));
    out.summary.push(format!("{replicas} soup sample(s) written to {}", sink.dir().join(&name).display()));
    out.tables.push(t);
    Ok(out)
}

fn verify(cfg: &mut RunConfig) -> anyhow::Result<Outcome> {
    let identity = need(&cfg.identity, "identity", "verify")?;
    let reports: Vec<IdentityReport> = match identity {
        Identity::Restriction => {
            let k = need(&cfg.k, "k", "verify")?;
            let dp = need(&cfg.d_prime, "d_prime", "verify")?;
            let d = need(&cfg.domain, "domain", "verify")?;
            let meshes = cfg.meshes.get_or_insert_with(|| RESTRICTION_MESHES.to_vec()).clone();
            vec![verify_restriction_lemma(&k, &dp, &d, &meshes)?]
        }
        Identity::Divergence => {
            let k = need(&cfg.k, "k", "verify")?;
            let family = cfg
                .family
                .get_or_insert_with(|| shrinking_disks(C64::new(1.5, 0.0), 0.3, 0.4, 4))
                .clone();
            let s = soup_settings(cfg, "verify")?;
            let (a, b) = verify_divergence_lemma(&k, &family, &s)?;
            vec![a, b]
        }
        Identity::Mass => {
            let k = need(&cfg.k, "k", "verify")?;
            let (region, f) = region(cfg)?;
            let s = soup_settings(cfg, "verify")?;
            vec![verify_mass_identity(&k, &region, &f, &s)?]
        }
        Identity::Energy => {
            let gamma = load_curve(&need(&cfg.curve, "curve", "verify")?)?;
            let (region, f) = region(cfg)?;
            let allowance = *cfg.allowance.get_or_insert(0.1);
            let s = soup_settings(cfg, "verify")?;
            vec![verify_energy_variation(&gamma, &region, &f, &s, allowance)?]
        }
        Identity::Continuity => {
            let core = need(&cfg.k, "k", "verify")?;
            let (region, f) = region(cfg)?;
            let eps = cfg.eps_schedule.get_or_insert_with(|| CONTINUITY_EPS.to_vec()).clone();
            let count = *cfg.samples.get_or_insert(16) as usize;
            let s = soup_settings(cfg, "verify")?;
            vec![verify_continuity(&region, &f, &core, &eps, count, &s)?]
        }
        Identity::OmConsistency => {
            let om = om_config(cfg)?;
            let s = soup_settings(cfg, "verify")?;
            vec![om_consistency(&om, &s)?]
        }
    };
    Ok(reports_outcome(reports))
}

fn reports_outcome(reports: Vec<IdentityReport>) -> Outcome {
    let mut t = Table::new(
        "verify",
        &["identity", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "discrepancy", "budget", "verdict"],
    );
    let mut out = Outcome::new(json!({ "reports": reports }));
    for r in &reports {
        t.push([
            r.name.clone(),
            fmt(r.lhs.value),
            fmt(r.lhs.stderr),
            fmt(r.rhs.value),
            fmt(r.rhs.stderr),
            fmt(r.discrepancy),
            fmt(r.budget),
            if r.passed() { "pass".into() } else { "fail".into() },
        ]);
        out.summary.push(r.summary());
    }
    out.passed = Some(reports.iter().all(IdentityReport::passed));
    out.tables.push(t);
    out
}

fn om_config(cfg: &mut RunConfig) -> anyhow::Result<OMConfig> {
    let kappa = need(&cfg.kappa, "kappa", "om")?;
    let (_, map) = region(cfg)?;
    let r = cfg.annulus_r.expect("set by region");
    let eps = cfg.eps_schedule.get_or_insert_with(|| OM_EPS.to_vec()).clone();
    Ok(OMConfig::new(kappa, map, r, eps)?)
}

fn om(cfg: &mut RunConfig) -> anyhow::Result<Outcome> {
    let om = om_config(cfg)?;
    let prediction = om_prediction(&om)?;
    let empirical = *cfg.empirical.get_or_insert(false);
    let mut out = Outcome::new(json!({ "prediction": prediction }));
    out.summary.push(format!(
        "kappa {} c {:.6} energy {:.6} predicted ratio {:.6}",
        prediction.kappa, prediction.central_charge, prediction.energy.value, prediction.value
    ));
    if empirical {
        let s = soup_settings(cfg, "om")?;
        let report = om_empirical_83(&om, &s)?;
        let mut t = Table::new("om_ratio", &["eps", "ratio", "stderr"]);
        let ratios = report.details["ratios"].as_array().cloned().unwrap_or_default();
        for (e, r) in om.eps_schedule.iter().zip(&ratios) {
            let v = |k: &str| r[k].as_f64().unwrap_or(f64::NAN);
            t.push([fmt(*e), fmt(v("value")), fmt(v("stderr"))]);
        }
        out.summary.push(report.summary());
        out.passed = Some(report.passed());
        out.payload["empirical"] = serde_json::to_value(&report).expect("report serializes");
        out.tables.push(t);
    }
    Ok(out)
}

fn brownian(cfg: &mut RunConfig) -> anyhow::Result<Outcome> {
    let phi = load_phi(cfg.phi.get_or_insert_with(|| PhiArg::Named("linear:0.5".into())))?;
    let kappa = *cfg.kappa.get_or_insert(1.0);
    let eps = cfg.eps_schedule.get_or_insert_with(|| BROWNIAN_EPS.to_vec()).clone();
    let samples = *cfg.samples.get_or_insert(100_000);
    let seed = need_seed(cfg, "brownian-om")?;
    let report = brownian_om_check(&phi, kappa, &eps, samples, seed)?;
    let mut t = Table::new("brownian_ratio", &["eps", "ratio", "stderr"]);
    for row in report.details["per_eps"].as_array().into_iter().flatten() {
        let r = |k: &str| row["ratio"][k].as_f64().unwrap_or(f64::NAN);
        t.push([fmt(row["eps"].as_f64().unwrap_or(f64::NAN)), fmt(r("value")), fmt(r("stderr"))]);
    }
    let mut out = Outcome::new(json!({ "report": report }));
    out.summary.push(report.summary());
    out.passed = Some(report.passed());
    out.tables.push(t);
    Ok(out)
}
