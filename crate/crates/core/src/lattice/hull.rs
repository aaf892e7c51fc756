//! Outer boundaries of lattice loops.
//!
//! The trace is thickened to closed unit cells centred at the visited sites.
//! The complement is flood-filled 4-connectedly from a padded frame; the hull
//! is everything not reached. Its boundary, a simple closed polygon of cell
//! edges, is followed counter-clockwise and converted into a nearest-neighbour
//! path of hull sites touching the exterior (including corner contacts).

use std::collections::VecDeque;

use super::domain::{LatticeDomain, Site};
use super::soup::LoopSample;
use crate::{Error, Result};

struct Raster {
    x0: i32,
    y0: i32,
    w: i32,
    h: i32,
    /// 0 = free, 1 = trace, 2 = exterior
    cell: Vec<u8>,
}

impl Raster {
    fn at(&self, x: i32, y: i32) -> u8 {
        let (dx, dy) = (x - self.x0, y - self.y0);
        if dx < 0 || dy < 0 || dx >= self.w || dy >= self.h {
            return 2;
        }
        self.cell[(dy * self.w + dx) as usize]
    }

    fn in_hull(&self, x: i32, y: i32) -> bool {
        self.at(x, y) != 2
    }
}

fn hull_raster(sites: &[Site]) -> Raster {
    let x0 = sites.iter().map(|s| s.x).min().unwrap() - 1;
    let x1 = sites.iter().map(|s| s.x).max().unwrap() + 1;
    let y0 = sites.iter().map(|s| s.y).min().unwrap() - 1;
    let y1 = sites.iter().map(|s| s.y).max().unwrap() + 1;
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let mut cell = vec![0u8; (w * h) as usize];
    for s in sites {
        cell[((s.y - y0) * w + (s.x - x0)) as usize] = 1;
    }
    let mut queue = VecDeque::new();
    for x in 0..w {
        for y in [0, h - 1] {
            queue.push_back((x, y));
        }
    }
    for y in 0..h {
        for x in [0, w - 1] {
            queue.push_back((x, y));
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let k = (y * w + x) as usize;
        if cell[k] != 0 {
            continue;
        }
        cell[k] = 2;
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx >= 0 && ny >= 0 && nx < w && ny < h && cell[(ny * w + nx) as usize] == 0 {
                queue.push_back((nx, ny));
            }
        }
    }
    Raster { x0, y0, w, h, cell }
}

/// Directions E, N, W, S.
const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Cell on the left of the edge leaving corner `(cx, cy)` in direction `d`;
/// corner `(cx, cy)` is the lower-left corner of cell `(cx, cy)`.
fn left_cell(cx: i32, cy: i32, d: usize) -> (i32, i32) {
    match d {
        0 => (cx, cy),
        1 => (cx - 1, cy),
        2 => (cx - 1, cy - 1),
        _ => (cx, cy - 1),
    }
}

fn right_cell(cx: i32, cy: i32, d: usize) -> (i32, i32) {
    match d {
        0 => (cx, cy - 1),
        1 => (cx, cy),
        2 => (cx - 1, cy),
        _ => (cx - 1, cy - 1),
    }
}

/// Outer boundary of a set of sites forming a 4-connected trace, as a closed
/// nearest-neighbour path starting at the lowest row-major hull site and
/// running counter-clockwise. Sites on one-cell-wide necks appear twice.
pub fn outer_boundary_of_sites(sites: &[Site]) -> Result<Vec<Site>> {
    if sites.is_empty() {
        return Err(Error::DegenerateTrace);
    }
    let r = hull_raster(sites);
    let start = (0..r.h)
        .flat_map(|y| (0..r.w).map(move |x| (x, y)))
        .map(|(x, y)| (x + r.x0, y + r.y0))
        .find(|&(x, y)| r.in_hull(x, y))
        .ok_or(Error::DegenerateTrace)?;
    let mut path: Vec<Site> = vec![Site::new(start.0, start.1)];
    let (mut cx, mut cy, mut d) = (start.0, start.1, 0usize);
    let limit = 4 * (r.w as usize) * (r.h as usize) + 8;
    let mut steps = 0;
    loop {
        // walk the edge
        cx += DIRS[d].0;
        cy += DIRS[d].1;
        steps += 1;
        if steps > limit {
            return Err(Error::DegenerateTrace);
        }
        let ahead_left = left_cell(cx, cy, d);
        let ahead_right = right_cell(cx, cy, d);
        let nd = if !r.in_hull(ahead_left.0, ahead_left.1) {
            (d + 1) % 4
        } else if !r.in_hull(ahead_right.0, ahead_right.1) {
            push_site(&mut path, ahead_left);
            d
        } else {
            push_site(&mut path, ahead_left);
            push_site(&mut path, ahead_right);
            (d + 3) % 4
        };
        d = nd;
        // loop closes when the starting edge is about to be walked again
        if (cx, cy, d) == (start.0, start.1, 0) {
            break;
        }
    }
    if path.len() > 1 && path.last() == path.first() {
        path.pop();
    }
    Ok(path)
}

fn push_site(path: &mut Vec<Site>, c: (i32, i32)) {
    let s = Site::new(c.0, c.1);
    if path.last() != Some(&s) {
        path.push(s);
    }
}

/// Outer boundary of a loop inside `bbox`.
pub fn outer_boundary(lp: &LoopSample, bbox: &LatticeDomain) -> Result<Vec<Site>> {
    if lp.sites.is_empty() || (lp.sites.len() > 1 && !lp.is_closed_path()) {
        return Err(Error::DegenerateTrace);
    }
    if lp.sites.iter().any(|s| !bbox.contains(*s)) {
        return Err(Error::InvalidArgument("loop leaves the bounding domain".into()));
    }
    outer_boundary_of_sites(&lp.sites)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn rect_loop(x0: i32, y0: i32, w: i32, h: i32) -> Vec<Site> {
        let mut v = Vec::new();
        for x in x0..x0 + w - 1 {
            v.push(Site::new(x, y0));
        }
        for y in y0..y0 + h - 1 {
            v.push(Site::new(x0 + w - 1, y));
        }
        for x in (x0 + 1..x0 + w).rev() {
            v.push(Site::new(x, y0 + h - 1));
        }
        for y in (y0 + 1..y0 + h).rev() {
            v.push(Site::new(x0, y));
        }
        v
    }

    fn closed(path: &[Site]) -> bool {
        let n = path.len();
        (0..n).all(|i| path[i].is_adjacent(path[(i + 1) % n]))
    }

    #[test]
    fn rectangle_is_its_own_boundary() {
        let rect = rect_loop(2, 3, 5, 4);
        let b = outer_boundary_of_sites(&rect).unwrap();
        assert_eq!(b, rect);
        // clockwise input gives the same counter-clockwise cycle
        let mut cw = rect.clone();
        cw.reverse();
        assert_eq!(outer_boundary_of_sites(&cw).unwrap(), rect);
    }

    #[test]
    fn interior_excursion_is_excluded() {
        let mut lp = rect_loop(0, 0, 6, 6);
        // from (0,2) go in to (2,2) and back
        let pos = lp.iter().position(|s| *s == Site::new(0, 2)).unwrap();
        let spur = [Site::new(1, 2), Site::new(2, 2), Site::new(1, 2), Site::new(0, 2)];
        for (k, s) in spur.iter().enumerate() {
            lp.insert(pos + 1 + k, *s);
        }
        let b = outer_boundary_of_sites(&lp).unwrap();
        assert_eq!(b, rect_loop(0, 0, 6, 6));
        assert!(closed(&b));
    }

    #[test]
    fn figure_eight_gives_hull_of_union() {
        // two squares sharing the site (3, 3)
        let mut fig = rect_loop(0, 0, 4, 4);
        let second = rect_loop(3, 3, 4, 4);
        let k = fig.iter().position(|s| *s == Site::new(3, 3)).unwrap();
        for (j, s) in second.iter().enumerate().skip(1) {
            fig.insert(k + j, *s);
        }
        fig.insert(k + second.len(), Site::new(3, 3));
        let b = outer_boundary_of_sites(&fig).unwrap();
        assert!(closed(&b));
        let set: BTreeSet<Site> = b.iter().copied().collect();
        let expect: BTreeSet<Site> = fig.iter().copied().collect();
        assert_eq!(set, expect);
        // the pinch site is visited twice
        assert_eq!(b.iter().filter(|s| **s == Site::new(3, 3)).count(), 2);
    }

    #[test]
    fn concave_corners_are_filled_in() {
        // an L-shaped loop
        let lp = vec![
            Site::new(0, 0), Site::new(1, 0), Site::new(2, 0), Site::new(2, 1),
            Site::new(1, 1), Site::new(1, 2), Site::new(0, 2), Site::new(0, 1),
        ];
        let b = outer_boundary_of_sites(&lp).unwrap();
        assert!(closed(&b));
        assert!(b.contains(&Site::new(1, 1)));
        assert_eq!(outer_boundary_of_sites(&b).unwrap(), b);
    }

    #[test]
    fn back_and_forth_pair() {
        let b = outer_boundary_of_sites(&[Site::new(0, 0), Site::new(1, 0)]).unwrap();
        assert_eq!(b, vec![Site::new(0, 0), Site::new(1, 0)]);
    }
}
