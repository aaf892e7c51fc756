//! Finite subsets of the scaled grid `h ℤ²`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// A grid site `(x, y)`; sites order row-major (by `y`, then `x`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(i32, i32)", into = "(i32, i32)")]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

impl Site {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn neighbors(self) -> [Site; 4] {
        [
            Site::new(self.x + 1, self.y),
            Site::new(self.x, self.y + 1),
            Site::new(self.x - 1, self.y),
            Site::new(self.x, self.y - 1),
        ]
    }

    pub fn is_adjacent(self, other: Site) -> bool {
        (self.x - other.x).abs() + (self.y - other.y).abs() == 1
    }
}

impl Ord for Site {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Site {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl From<(i32, i32)> for Site {
    fn from((x, y): (i32, i32)) -> Self {
        Site::new(x, y)
    }
}

impl From<Site> for (i32, i32) {
    fn from(s: Site) -> Self {
        (s.x, s.y)
    }
}

pub type SiteSet = BTreeSet<Site>;

/// Sites of `set` with at least one neighbour outside `set`.
pub fn inner_boundary(set: &SiteSet) -> SiteSet {
    set.iter()
        .filter(|s| s.neighbors().iter().any(|n| !set.contains(n)))
        .copied()
        .collect()
}

/// Sites outside `set` adjacent to it.
pub fn outer_layer(set: &SiteSet) -> SiteSet {
    set.iter()
        .flat_map(|s| s.neighbors())
        .filter(|n| !set.contains(n))
        .collect()
}

/// Dense membership index over a bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct GridIndex {
    x0: i32,
    y0: i32,
    w: usize,
    h: usize,
    slot: Vec<u32>,
}

impl GridIndex {
    const EMPTY: u32 = u32::MAX;

    fn build(sites: &[Site]) -> Self {
        if sites.is_empty() {
            return Self { x0: 0, y0: 0, w: 0, h: 0, slot: Vec::new() };
        }
        let x0 = sites.iter().map(|s| s.x).min().unwrap();
        let x1 = sites.iter().map(|s| s.x).max().unwrap();
        let y0 = sites.iter().map(|s| s.y).min().unwrap();
        let y1 = sites.iter().map(|s| s.y).max().unwrap();
        let w = (x1 - x0 + 1) as usize;
        let h = (y1 - y0 + 1) as usize;
        let mut slot = vec![Self::EMPTY; w * h];
        for (k, s) in sites.iter().enumerate() {
            slot[(s.y - y0) as usize * w + (s.x - x0) as usize] = k as u32;
        }
        Self { x0, y0, w, h, slot }
    }

    #[inline]
    pub fn get(&self, s: Site) -> Option<usize> {
        let dx = s.x.wrapping_sub(self.x0);
        let dy = s.y.wrapping_sub(self.y0);
        if dx < 0 || dy < 0 || dx as usize >= self.w || dy as usize >= self.h {
            return None;
        }
        match self.slot[dy as usize * self.w + dx as usize] {
            Self::EMPTY => None,
            k => Some(k as usize),
        }
    }
}

/// A finite set of sites of `h ℤ²` with nearest-neighbour adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDomain {
    mesh: f64,
    sites: Vec<Site>,
    index: GridIndex,
}

impl LatticeDomain {
    pub fn new<I: IntoIterator<Item = Site>>(mesh: f64, sites: I) -> Result<Self> {
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::InvalidArgument(format!("mesh {mesh} must be positive")));
        }
        let set: SiteSet = sites.into_iter().collect();
        let sites: Vec<Site> = set.into_iter().collect();
        let index = GridIndex::build(&sites);
        Ok(Self { mesh, sites, index })
    }

    /// The `w × h` block with lower-left site `(x0, y0)`.
    pub fn rect(mesh: f64, x0: i32, y0: i32, w: i32, h: i32) -> Result<Self> {
        Self::new(mesh, (y0..y0 + h).flat_map(|y| (x0..x0 + w).map(move |x| Site::new(x, y))))
    }

    /// Sites whose points satisfy `pred`, searched inside the box `[lo, hi]` (plane coordinates).
    pub fn from_predicate<F: Fn(C64) -> bool>(mesh: f64, lo: C64, hi: C64, pred: F) -> Result<Self> {
        let xs = (lo.re / mesh).floor() as i32..=(hi.re / mesh).ceil() as i32;
        let ys = (lo.im / mesh).floor() as i32..=(hi.im / mesh).ceil() as i32;
        let mut sites = Vec::new();
        for y in ys {
            for x in xs.clone() {
                if pred(C64::new(x as f64 * mesh, y as f64 * mesh)) {
                    sites.push(Site::new(x, y));
                }
            }
        }
        Self::new(mesh, sites)
    }

    /// Sites strictly inside the open disk.
    pub fn disk(mesh: f64, center: C64, radius: f64) -> Result<Self> {
        let d = C64::new(radius, radius);
        Self::from_predicate(mesh, center - d, center + d, |z| (z - center).norm() < radius)
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    #[inline]
    pub fn index_of(&self, s: Site) -> Option<usize> {
        self.index.get(s)
    }

    #[inline]
    pub fn contains(&self, s: Site) -> bool {
        self.index.get(s).is_some()
    }

    pub fn point(&self, s: Site) -> C64 {
        C64::new(s.x as f64 * self.mesh, s.y as f64 * self.mesh)
    }

    pub fn site_set(&self) -> SiteSet {
        self.sites.iter().copied().collect()
    }

    pub fn minus(&self, removed: &SiteSet) -> Self {
        let sites: Vec<Site> = self.sites.iter().filter(|s| !removed.contains(s)).copied().collect();
        let index = GridIndex::build(&sites);
        Self { mesh: self.mesh, sites, index }
    }

    /// Sites outside the domain adjacent to it.
    pub fn outer_layer(&self) -> SiteSet {
        self.sites
            .iter()
            .flat_map(|s| s.neighbors())
            .filter(|n| !self.contains(*n))
            .collect()
    }

    /// Stable 64-bit fingerprint of the mesh and site list (FNV-1a).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&self.mesh.to_le_bytes());
        for s in &self.sites {
            eat(&s.x.to_le_bytes());
            eat(&s.y.to_le_bytes());
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_order_and_lookup() {
        let d = LatticeDomain::rect(0.5, -1, -1, 3, 2).unwrap();
        assert_eq!(d.len(), 6);
        assert_eq!(d.sites()[0], Site::new(-1, -1));
        assert_eq!(d.sites()[3], Site::new(-1, 0));
        assert_eq!(d.index_of(Site::new(1, 0)), Some(5));
        assert_eq!(d.index_of(Site::new(2, 0)), None);
        assert_eq!(d.point(Site::new(1, -1)), C64::new(0.5, -0.5));
    }

    #[test]
    fn boundaries_of_a_block() {
        let d = LatticeDomain::rect(1.0, 0, 0, 3, 3).unwrap();
        let set = d.site_set();
        assert_eq!(inner_boundary(&set).len(), 8);
        assert_eq!(outer_layer(&set).len(), 12);
        assert_eq!(d.outer_layer(), outer_layer(&set));
    }

    #[test]
    fn disk_is_symmetric() {
        let d = LatticeDomain::disk(0.1, C64::new(0.0, 0.0), 1.0).unwrap();
        for s in d.sites() {
            assert!(d.contains(Site::new(-s.x, s.y)) && d.contains(Site::new(s.y, s.x)));
        }
    }
}
