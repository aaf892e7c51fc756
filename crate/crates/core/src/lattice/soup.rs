//! Poissonian random-walk loop soups.
//!
//! Sites are visited in a fixed order `v₁, v₂, …`. Loops whose first visited
//! site (in that order) is `vᵢ` live in `Dᵢ = D ∖ {v₁, …, vᵢ₋₁}`; their number is
//! Poisson with mean `log G_{Dᵢ}(vᵢ, vᵢ)`, each loop is a concatenation of
//! `k` independent excursions from `vᵢ` in `Dᵢ` conditioned to return, and `k`
//! has the logarithmic law `P(k) = pᵏ / (k · (−log(1 − p)))` with `p` the
//! return probability.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::domain::{LatticeDomain, Site};
use super::green::{green_block, EnvelopeLdl};
use crate::stats::rng_for;
use crate::{Error, Result};

/// A closed nearest-neighbour path; the last site is adjacent to the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopSample {
    pub sites: Vec<Site>,
    pub excursions: u32,
}

impl LoopSample {
    pub fn root(&self) -> Site {
        self.sites[0]
    }

    pub fn is_closed_path(&self) -> bool {
        let n = self.sites.len();
        n >= 2 && (0..n).all(|i| self.sites[i].is_adjacent(self.sites[(i + 1) % n]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoupSample {
    pub loops: Vec<LoopSample>,
    pub mesh: f64,
    pub seed: u64,
    pub replica: u64,
    pub domain_hash: u64,
    pub intensity: f64,
}

impl SoupSample {
    /// JSON-lines: a header record, then one array of `[x, y]` pairs per loop.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = json!({
            "mesh": self.mesh,
            "seed": self.seed,
            "replica": self.replica,
            "domain_hash": format!("{:016x}", self.domain_hash),
            "loops": self.loops.len(),
        });
        writeln!(w, "{header}")?;
        for l in &self.loops {
            writeln!(w, "{}", serde_json::to_string(&l.sites).expect("sites serialize"))?;
        }
        Ok(())
    }
}

/// Precomputed per-root intensities for repeated soup sampling on one domain.
#[derive(Debug, Clone)]
pub struct SoupSampler {
    domain: LatticeDomain,
    /// Domain indices of the roots in order.
    roots: Vec<usize>,
    /// Position of a domain site in the root order (`u32::MAX` for non-roots).
    rank: Vec<u32>,
    lambdas: Vec<f64>,
}

impl SoupSampler {
    /// The full soup with row-major site order.
    pub fn full(domain: &LatticeDomain) -> Result<Self> {
        let n = domain.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty domain".into()));
        }
        let ldl = EnvelopeLdl::factor(domain, (0..n).rev().collect(), false)?;
        // elimination position k holds site n−1−k with domain {v_{n−1−k}, …, v_{n−1}}
        let lambdas: Vec<f64> = (0..n).map(|i| -ldl.pivots()[n - 1 - i].ln()).collect();
        Ok(Self { domain: domain.clone(), roots: (0..n).collect(), rank: (0..n as u32).collect(), lambdas })
    }

    /// Only loops visiting `roots`; loops are attributed to the first root they visit.
    pub fn rooted(domain: &LatticeDomain, roots: &[Site]) -> Result<Self> {
        let idx: Vec<usize> = roots
            .iter()
            .map(|s| domain.index_of(*s).ok_or_else(|| Error::InvalidArgument("root outside domain".into())))
            .collect::<Result<_>>()?;
        let g = green_block(domain, roots)?;
        let chol = g.cholesky().ok_or_else(|| Error::InvalidArgument("Green block not positive definite".into()))?;
        let lambdas: Vec<f64> = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).collect();
        let mut rank = vec![u32::MAX; domain.len()];
        for (k, &i) in idx.iter().enumerate() {
            if rank[i] != u32::MAX {
                return Err(Error::InvalidArgument("repeated root".into()));
            }
            rank[i] = k as u32;
        }
        Ok(Self { domain: domain.clone(), roots: idx, rank, lambdas })
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    /// Expected number of loops, the loop mass of the sampled family.
    pub fn total_mass(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Streams the loops of one replica to `visit`, in root order.
    pub fn for_each_loop<F: FnMut(&LoopSample)>(&self, seed: u64, replica: u64, mut visit: F) {
        let mut buf = LoopSample { sites: Vec::new(), excursions: 0 };
        for (i, &root) in self.roots.iter().enumerate() {
            let lambda = self.lambdas[i];
            if lambda <= 0.0 {
                continue;
            }
            let mut rng = rng_for(seed, i as u64, replica);
            let count = Poisson::new(lambda).map(|p| p.sample(&mut rng) as u64).unwrap_or(0);
            if count == 0 {
                continue;
            }
            let p = 1.0 - (-lambda).exp();
            for _ in 0..count {
                let k = sample_logarithmic(&mut rng, p, lambda);
                buf.sites.clear();
                buf.excursions = k;
                for _ in 0..k {
                    self.excursion(&mut rng, root, i as u32, &mut buf.sites);
                }
                visit(&buf);
            }
        }
    }

    /// Appends an excursion from `root` conditioned to return before leaving
    /// `Dᵢ`; the returning step is not appended.
    fn excursion(&self, rng: &mut ChaCha8Rng, root: usize, i: u32, out: &mut Vec<Site>) {
        let start = self.domain.sites()[root];
        let mark = out.len();
        'retry: loop {
            out.truncate(mark);
            out.push(start);
            let mut cur = start;
            let mut bits = 0u64;
            let mut left = 0;
            loop {
                if left == 0 {
                    bits = rng.gen();
                    left = 32;
                }
                let dir = (bits & 3) as usize;
                bits >>= 2;
                left -= 1;
                let next = cur.neighbors()[dir];
                match self.domain.index_of(next) {
                    None => continue 'retry,
                    Some(j) if j == root => return,
                    Some(j) if self.rank[j] < i => continue 'retry,
                    Some(_) => {
                        out.push(next);
                        cur = next;
                    }
                }
            }
        }
    }

    pub fn sample(&self, seed: u64, replica: u64) -> SoupSample {
        let mut loops = Vec::new();
        self.for_each_loop(seed, replica, |l| loops.push(l.clone()));
        SoupSample {
            loops,
            mesh: self.domain.mesh(),
            seed,
            replica,
            domain_hash: self.domain.fingerprint(),
            intensity: 1.0,
        }
    }

    /// Applies `stat` to every replica in parallel; results come back in replica order.
    pub fn map_replicas<T, F>(&self, replicas: u64, stat: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&Self, u64) -> T + Sync,
    {
        (0..replicas).into_par_iter().map(|r| stat(self, r)).collect()
    }
}

/// Inverse-transform sample of the logarithmic law with parameter `p`,
/// `lambda = −log(1 − p)`.
fn sample_logarithmic(rng: &mut ChaCha8Rng, p: f64, lambda: f64) -> u32 {
    let u: f64 = rng.gen::<f64>() * lambda;
    let mut k = 1u32;
    let mut term = p;
    let mut cum = term;
    while u > cum && k < 1_000_000 {
        term *= p * k as f64 / (k + 1) as f64;
        k += 1;
        cum += term;
        if term < 1e-300 {
            break;
        }
    }
    k
}

/// One replica of the full soup on `D`.
pub fn sample_soup(domain: &LatticeDomain, seed: u64) -> Result<SoupSample> {
    Ok(SoupSampler::full(domain)?.sample(seed, 0))
}
