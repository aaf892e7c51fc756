//! Werner-mass estimates from loop soups.
//!
//! `Ŵ(V₁, V₂; D)` is the expected number of soup loops in `D` whose outer
//! boundary meets both sets. Only loops visiting `V₁` matter, so the soup is
//! restricted to loops through the inner boundary of `V₁`.

use serde::{Deserialize, Serialize};

use super::domain::{inner_boundary, LatticeDomain, Site, SiteSet};
use super::hull::outer_boundary_of_sites;
use super::mass::{MassKind, MassValue};
use super::soup::SoupSampler;
use crate::stats::Estimate;
use crate::{Error, Result};

/// Membership test for a set of sites, possibly the complement of a finite set.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteMask {
    Set(LatticeDomain),
    Complement(LatticeDomain),
}

impl SiteMask {
    pub fn set(sites: &SiteSet) -> Result<Self> {
        Ok(SiteMask::Set(LatticeDomain::new(1.0, sites.iter().copied())?))
    }

    pub fn complement_of(sites: &SiteSet) -> Result<Self> {
        Ok(SiteMask::Complement(LatticeDomain::new(1.0, sites.iter().copied())?))
    }

    #[inline]
    pub fn contains(&self, s: Site) -> bool {
        match self {
            SiteMask::Set(d) => d.contains(s),
            SiteMask::Complement(d) => !d.contains(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WernerEstimate {
    pub mass: MassValue,
    /// Per-replica counts, in replica order.
    pub counts: Vec<u32>,
    /// Mean number of sampled loops per replica (all loops through `V₁`).
    pub loops_per_replica: f64,
}

/// Counts, per replica, the loops of the soup in `domain` whose outer
/// boundary meets `V₁` (a finite set) and `V₂`.
pub fn werner_mass(
    v1: &SiteSet,
    v2: &SiteMask,
    domain: &LatticeDomain,
    replicas: u64,
    seed: u64,
) -> Result<WernerEstimate> {
    werner_mass_with(v1, domain, replicas, seed, |boundary| boundary.iter().any(|s| v2.contains(*s)), |trace| {
        trace.iter().any(|s| v2.contains(*s))
    })
}

/// General form: `accept(outer_boundary)` decides a loop, `prefilter(trace)`
/// must be implied by it and is checked first.
pub fn werner_mass_with<A, P>(
    v1: &SiteSet,
    domain: &LatticeDomain,
    replicas: u64,
    seed: u64,
    accept: A,
    prefilter: P,
) -> Result<WernerEstimate>
where
    A: Fn(&[Site]) -> bool + Sync,
    P: Fn(&[Site]) -> bool + Sync,
{
    if v1.is_empty() {
        return Err(Error::EmptySet);
    }
    if v1.iter().any(|s| !domain.contains(*s)) {
        return Err(Error::InvalidArgument("V1 must lie in the domain".into()));
    }
    let roots: Vec<Site> = inner_boundary(v1).into_iter().collect();
    let sampler = SoupSampler::rooted(domain, &roots)?;
    let mask = SiteMask::set(v1)?;
    let per: Vec<(u32, u32)> = sampler.map_replicas(replicas, |s, r| {
        let mut hits = 0u32;
        let mut total = 0u32;
        s.for_each_loop(seed, r, |lp| {
            total += 1;
            if !prefilter(&lp.sites) {
                return;
            }
            let b = outer_boundary_of_sites(&lp.sites).expect("soup loops are closed paths");
            if b.iter().any(|x| mask.contains(*x)) && accept(&b) {
                hits += 1;
            }
        });
        (hits, total)
    });
    let counts: Vec<u32> = per.iter().map(|p| p.0).collect();
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let e = Estimate::from_samples(&xs);
    let loops_per_replica = per.iter().map(|p| p.1 as f64).sum::<f64>() / replicas.max(1) as f64;
    Ok(WernerEstimate {
        mass: MassValue { value: e.mean, kind: MassKind::Estimate, stderr: e.stderr },
        counts,
        loops_per_replica,
    })
}

/// Per-event, per-replica counts from one soup rooted at `roots`.
///
/// Every loop whose trace passes `prefilter` has its outer boundary passed to
/// `classify`, which raises the flags of the events it belongs to. Sharing the
/// soup between events makes differences of counts paired.
pub fn boundary_event_counts<P, C>(
    roots: &[Site],
    domain: &LatticeDomain,
    replicas: u64,
    seed: u64,
    events: usize,
    prefilter: P,
    classify: C,
) -> Result<Vec<Vec<u32>>>
where
    P: Fn(&[Site]) -> bool + Sync,
    C: Fn(&[Site], &mut [bool]) + Sync,
{
    if roots.is_empty() {
        return Err(Error::EmptySet);
    }
    let sampler = SoupSampler::rooted(domain, roots)?;
    let per: Vec<Vec<u32>> = sampler.map_replicas(replicas, |s, r| {
        let mut counts = vec![0u32; events];
        let mut flags = vec![false; events];
        s.for_each_loop(seed, r, |lp| {
            if !prefilter(&lp.sites) {
                return;
            }
            let b = outer_boundary_of_sites(&lp.sites).expect("soup loops are closed paths");
            flags.iter_mut().for_each(|f| *f = false);
            classify(&b, &mut flags);
            for (c, f) in counts.iter_mut().zip(&flags) {
                *c += *f as u32;
            }
        });
        counts
    });
    Ok((0..events).map(|e| per.iter().map(|c| c[e]).collect()).collect())
}

/// A pair of site sets whose outer-boundary hits are counted.
#[derive(Debug, Clone, PartialEq)]
pub struct WernerEvent {
    pub v1: SiteMask,
    pub v2: SiteMask,
}

/// Paired Werner counts for several `(V₁, V₂)` pairs, from the soup rooted at
/// the inner boundaries of all the finite `V₁` sets.
pub fn werner_counts(
    v1_sets: &[SiteSet],
    v2: &[SiteMask],
    domain: &LatticeDomain,
    replicas: u64,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    if v1_sets.len() != v2.len() {
        return Err(Error::InvalidArgument("one V2 per V1 required".into()));
    }
    let mut roots = SiteSet::new();
    for v in v1_sets {
        if v.is_empty() {
            return Err(Error::EmptySet);
        }
        if v.iter().any(|s| !domain.contains(*s)) {
            return Err(Error::InvalidArgument("V1 must lie in the domain".into()));
        }
        roots.extend(inner_boundary(v));
    }
    let roots: Vec<Site> = roots.into_iter().collect();
    let events: Vec<WernerEvent> = v1_sets
        .iter()
        .zip(v2)
        .map(|(a, b)| Ok(WernerEvent { v1: SiteMask::set(a)?, v2: b.clone() }))
        .collect::<Result<_>>()?;
    let hits = |sites: &[Site], e: &WernerEvent| sites.iter().any(|s| e.v1.contains(*s)) && sites.iter().any(|s| e.v2.contains(*s));
    boundary_event_counts(
        &roots,
        domain,
        replicas,
        seed,
        events.len(),
        |t| events.iter().any(|e| hits(t, e)),
        |b, flags| {
            for (f, e) in flags.iter_mut().zip(&events) {
                *f = hits(b, e);
            }
        },
    )
}

/// Mean count of soup loops through `V₁` satisfying `event(trace)`; the
/// unconditioned analogue of [`werner_mass_with`], used for calibration.
pub fn event_count<E>(v1: &SiteSet, domain: &LatticeDomain, replicas: u64, seed: u64, event: E) -> Result<Estimate>
where
    E: Fn(&[Site]) -> bool + Sync,
{
    let roots: Vec<Site> = inner_boundary(v1).into_iter().collect();
    let sampler = SoupSampler::rooted(domain, &roots)?;
    let counts: Vec<f64> = sampler.map_replicas(replicas, |s, r| {
        let mut c = 0u32;
        s.for_each_loop(seed, r, |lp| {
            if event(&lp.sites) {
                c += 1;
            }
        });
        c as f64
    });
    Ok(Estimate::from_samples(&counts))
}
