//! Green functions of the killed walk: envelope LDLᵀ of `I − P_D`, the
//! potential-kernel formula for `ℤ² ∖ U`, and the far-field disk approximation.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::domain::{LatticeDomain, Site, SiteSet};
use super::potential::{k0, potential};
use crate::{Error, Result, C64};

/// Envelope (profile) LDLᵀ factorization of `I − P_D` under a site ordering.
#[derive(Debug, Clone)]
pub struct EnvelopeLdl {
    /// `order[k]` is the domain index of the `k`-th eliminated site.
    order: Vec<usize>,
    first: Vec<usize>,
    rows: Vec<Vec<f64>>,
    pivots: Vec<f64>,
}

impl EnvelopeLdl {
    /// Factors `I − P_D` with sites eliminated in `order` (domain indices).
    /// With `keep_rows = false` only the pivots survive, and memory stays at
    /// one envelope width of rows.
    pub fn factor(domain: &LatticeDomain, order: Vec<usize>, keep_rows: bool) -> Result<Self> {
        let n = domain.len();
        debug_assert_eq!(order.len(), n);
        let mut pos = vec![0usize; n];
        for (k, &d) in order.iter().enumerate() {
            pos[d] = k;
        }
        let sites = domain.sites();
        let mut first = vec![0usize; n];
        let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
        for k in 0..n {
            let s = sites[order[k]];
            let mut f = k;
            for nb in s.neighbors() {
                if let Some(j) = domain.index_of(nb) {
                    let pj = pos[j];
                    if pj < k {
                        nbrs[k].push(pj);
                        f = f.min(pj);
                    }
                }
            }
            first[k] = f;
        }
        // rows are needed until the last row whose envelope reaches them
        let mut last_use: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for j in first[i]..i {
                last_use[j] = last_use[j].max(i);
            }
        }
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut pivots = vec![0.0; n];
        let mut u = Vec::new();
        for i in 0..n {
            let fi = first[i];
            let width = i - fi;
            u.clear();
            u.resize(width, 0.0);
            for &j in &nbrs[i] {
                u[j - fi] = -0.25;
            }
            // u_j ← M_ij − Σ_k u_k L_jk, then L_ij = u_j / d_j
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let rj = &rows[j];
                let mut s = u[j - fi];
                for k in lo..j {
                    s -= u[k - fi] * rj[k - fj];
                }
                u[j - fi] = s;
            }
            let mut d = 1.0;
            let mut row = vec![0.0; width];
            for j in fi..i {
                let l = u[j - fi] / pivots[j];
                row[j - fi] = l;
                d -= u[j - fi] * l;
            }
            if !(d > 1e-14) {
                return Err(Error::NotSubStochastic);
            }
            pivots[i] = d;
            // replace the scaled row by L itself for later inner products
            rows[i] = row;
            if !keep_rows {
                for j in fi..i {
                    if last_use[j] == i {
                        rows[j] = Vec::new();
                    }
                }
                if last_use[i] == i {
                    rows[i] = Vec::new();
                }
            }
        }
        Ok(Self { order, first, rows, pivots })
    }

    /// Row-major elimination order.
    pub fn natural(domain: &LatticeDomain, keep_rows: bool) -> Result<Self> {
        Self::factor(domain, (0..domain.len()).collect(), keep_rows)
    }

    /// `log det(I − P_D)`.
    pub fn log_det(&self) -> f64 {
        self.pivots.iter().map(|d| d.ln()).sum()
    }

    /// Pivots in elimination order; pivot `k` is `1 / G(v, v)` at `v = order[k]`
    /// for the domain made of the sites `order[0..=k]`.
    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Solves `(I − P_D) x = b`, vectors indexed by domain index.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.order.len();
        assert!(self.rows.iter().enumerate().all(|(i, r)| r.len() == i - self.first[i]), "rows were dropped");
        let mut y: Vec<f64> = self.order.iter().map(|&d| b[d]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let mut s = y[i];
            for (k, l) in self.rows[i].iter().enumerate() {
                s -= l * y[fi + k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.pivots[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i];
            for (k, l) in self.rows[i].iter().enumerate() {
                y[fi + k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &d) in self.order.iter().enumerate() {
            x[d] = y[k];
        }
        x
    }
}

/// The killed-walk resolvent `G_D = (I − P_D)⁻¹` of a finite domain.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    domain: LatticeDomain,
    ldl: EnvelopeLdl,
}

impl GreenOperator {
    pub fn new(domain: LatticeDomain) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::InvalidArgument("empty domain".into()));
        }
        let ldl = EnvelopeLdl::natural(&domain, true)?;
        Ok(Self { domain, ldl })
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    pub fn log_det(&self) -> f64 {
        self.ldl.log_det()
    }

    /// `G_D(·, y)` as a vector over domain indices.
    pub fn column(&self, y: Site) -> Result<Vec<f64>> {
        let j = self.domain.index_of(y).ok_or_else(|| Error::InvalidArgument("site outside domain".into()))?;
        let mut e = vec![0.0; self.domain.len()];
        e[j] = 1.0;
        Ok(self.ldl.solve(&e))
    }

    /// `G_D[S, S]` for sites of the domain.
    pub fn block(&self, set: &[Site]) -> Result<DMatrix<f64>> {
        let idx: Vec<usize> = set
            .iter()
            .map(|s| self.domain.index_of(*s).ok_or_else(|| Error::InvalidArgument("site outside domain".into())))
            .collect::<Result<_>>()?;
        let mut g = DMatrix::zeros(set.len(), set.len());
        for (b, &s) in set.iter().enumerate() {
            let col = self.column(s)?;
            for (a, &i) in idx.iter().enumerate() {
                g[(a, b)] = col[i];
            }
        }
        Ok(g)
    }
}

fn pot(a: Site, b: Site) -> f64 {
    potential(a.x - b.x, a.y - b.y)
}

/// Potential-kernel matrix `a(x − y)` for `x ∈ rows`, `y ∈ cols`.
pub fn potential_matrix(rows: &[Site], cols: &[Site]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| pot(rows[i], cols[j]))
}

/// Green function of the walk on `ℤ² ∖ U` killed on hitting the finite set `U`,
/// evaluated on `S × S` (`S` disjoint from `U`):
/// `G(x, y) = [a(x − U); 1]ᵀ N⁻¹ [a(U − y); 1] − a(x − y)` with `N = [[A_UU, 1], [1ᵀ, 0]]`.
pub fn green_outside(killing: &[Site], set: &[Site]) -> Result<DMatrix<f64>> {
    let u = killing.len();
    if u == 0 {
        return Err(Error::InvalidArgument("empty killing set".into()));
    }
    let mut n = DMatrix::zeros(u + 1, u + 1);
    n.view_mut((0, 0), (u, u)).copy_from(&potential_matrix(killing, killing));
    for i in 0..u {
        n[(i, u)] = 1.0;
        n[(u, i)] = 1.0;
    }
    let mut b = DMatrix::zeros(u + 1, set.len());
    b.view_mut((0, 0), (u, set.len())).copy_from(&potential_matrix(killing, set));
    for j in 0..set.len() {
        b[(u, j)] = 1.0;
    }
    let x = n.lu().solve(&b).ok_or_else(|| Error::InvalidArgument("singular boundary system".into()))?;
    let g = b.transpose() * x - potential_matrix(set, set);
    Ok(symmetrize(g))
}

/// `G_D[S, S]` for a finite domain, via killing on the outer layer of `D`.
pub fn green_block(domain: &LatticeDomain, set: &[Site]) -> Result<DMatrix<f64>> {
    if set.iter().any(|s| !domain.contains(*s)) {
        return Err(Error::InvalidArgument("site outside domain".into()));
    }
    let killing: Vec<Site> = domain.outer_layer().into_iter().collect();
    green_outside(&killing, set)
}

/// Far-field approximation of `G` for the lattice disk of radius `radius`
/// (lattice units, centered at the origin site):
/// `(2/π) log N + k₀ + (2/π) log|1 − x ȳ / N²| − a(x − y)`.
pub fn green_disk_far_field(radius: f64, set: &[Site]) -> DMatrix<f64> {
    let l = 2.0 / PI * radius.ln() + k0();
    let z = |s: Site| C64::new(s.x as f64, s.y as f64);
    let r2 = radius * radius;
    let g = DMatrix::from_fn(set.len(), set.len(), |i, j| {
        let (x, y) = (z(set[i]), z(set[j]));
        l + 2.0 / PI * (C64::new(1.0, 0.0) - x * y.conj() / r2).norm().ln() - pot(set[i], set[j])
    });
    symmetrize(g)
}

fn symmetrize(g: DMatrix<f64>) -> DMatrix<f64> {
    (&g + g.transpose()) * 0.5
}

/// `log det` of a symmetric positive-definite matrix.
pub fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let ch = m.clone().cholesky().ok_or_else(|| Error::InvalidArgument("Green block not positive definite".into()))?;
    Ok(ch.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum())
}

/// `log det(G[S1]) + log det(G[S2]) − log det(G[S1 ∪ S2])` from the joint block,
/// the first `n1` rows belonging to `S1`.
pub fn mutual_log_det(g: &DMatrix<f64>, n1: usize) -> Result<f64> {
    let n = g.nrows();
    let g1 = g.view((0, 0), (n1, n1)).into_owned();
    let g2 = g.view((n1, n1), (n - n1, n - n1)).into_owned();
    Ok(log_det_spd(&g1)? + log_det_spd(&g2)? - log_det_spd(g)?)
}

/// `Φ(S) = log(−det [[−A_SS, 1], [1ᵀ, 0]])`, the capacity-type functional whose
/// combinations give the renormalized mass.
pub fn capacity_functional(set: &[Site]) -> Result<f64> {
    let s = set.len();
    if s == 0 {
        return Err(Error::EmptySet);
    }
    let mut m = DMatrix::zeros(s + 1, s + 1);
    m.view_mut((0, 0), (s, s)).copy_from(&(-potential_matrix(set, set)));
    for i in 0..s {
        m[(i, s)] = 1.0;
        m[(s, i)] = 1.0;
    }
    let lu = m.lu();
    let mut log_abs = 0.0;
    let mut sign: f64 = lu.p().determinant();
    for d in lu.u().diagonal().iter() {
        log_abs += d.abs().ln();
        sign *= d.signum();
    }
    if sign >= 0.0 {
        return Err(Error::InvalidArgument("bordered potential matrix has wrong sign".into()));
    }
    Ok(log_abs)
}

/// Sorted vector of a site set.
pub fn to_vec(set: &SiteSet) -> Vec<Site> {
    set.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_i_minus_p(d: &LatticeDomain) -> DMatrix<f64> {
        let n = d.len();
        let mut m = DMatrix::identity(n, n);
        for (i, s) in d.sites().iter().enumerate() {
            for nb in s.neighbors() {
                if let Some(j) = d.index_of(nb) {
                    m[(i, j)] = -0.25;
                }
            }
        }
        m
    }

    #[test]
    fn envelope_matches_dense_factorization() {
        let d = LatticeDomain::disk(1.0, C64::new(0.3, 0.1), 6.0).unwrap();
        let m = dense_i_minus_p(&d);
        let ldl = EnvelopeLdl::natural(&d, true).unwrap();
        assert!((ldl.log_det() - log_det_spd(&m).unwrap()).abs() < 1e-10);
        let b: Vec<f64> = (0..d.len()).map(|i| (i as f64).sin()).collect();
        let x = ldl.solve(&b);
        let r = &m * DMatrix::from_column_slice(d.len(), 1, &x) - DMatrix::from_column_slice(d.len(), 1, &b);
        assert!(r.norm() < 1e-10);
        let reversed = EnvelopeLdl::factor(&d, (0..d.len()).rev().collect(), false).unwrap();
        assert!((reversed.log_det() - ldl.log_det()).abs() < 1e-10);
    }

    #[test]
    fn boundary_formula_matches_factorization() {
        let d = LatticeDomain::rect(1.0, 0, 0, 9, 7).unwrap();
        let set = vec![Site::new(1, 1), Site::new(4, 3), Site::new(7, 5), Site::new(8, 6)];
        let exact = GreenOperator::new(d.clone()).unwrap().block(&set).unwrap();
        let via_boundary = green_block(&d, &set).unwrap();
        assert!((exact - via_boundary).amax() < 1e-10);
    }

    #[test]
    fn single_killing_site_formula() {
        let set = vec![Site::new(2, 1), Site::new(-3, 4)];
        let g = green_outside(&[Site::new(0, 0)], &set).unwrap();
        let a = |s: Site| potential(s.x, s.y);
        let expect = a(set[0]) + a(set[1]) - potential(5, -3);
        assert!((g[(0, 1)] - expect).abs() < 1e-12);
    }

    #[test]
    fn far_field_tracks_exact_disk_green() {
        let radius = 40.0;
        let d = LatticeDomain::disk(1.0, C64::new(0.0, 0.0), radius).unwrap();
        let set = vec![Site::new(-3, 0), Site::new(0, 2), Site::new(5, 5)];
        let exact = green_block(&d, &set).unwrap();
        let approx = green_disk_far_field(radius, &set);
        assert!((exact - approx).amax() < 0.02);
    }

    #[test]
    fn capacity_functional_of_a_point_vanishes() {
        assert!(capacity_functional(&[Site::new(3, 3)]).unwrap().abs() < 1e-14);
        assert!(capacity_functional(&[Site::new(0, 0), Site::new(1, 0)]).is_ok());
    }
}
