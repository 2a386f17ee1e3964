//! Dense complex linear algebra shared by the certification, discretization
//! and analysis code. Everything is carried out over `Complex64`; real
//! problems are simply complex problems with zero imaginary parts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Build a complex matrix from row-major real data.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| c64(data[i * cols + j], 0.0))
}

pub fn real_vector(data: &[f64]) -> CVec {
    CVec::from_iterator(data.len(), data.iter().map(|&x| c64(x, 0.0)))
}

pub fn diag_real(values: &[f64]) -> CMat {
    let n = values.len();
    CMat::from_fn(n, n, |i, j| if i == j { c64(values[i], 0.0) } else { ZERO })
}

/// `(A + A*) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |m, &s| m.max(s))
}

/// Singular values in descending order.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn block_diag(blocks: &[CMat]) -> CMat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Stack matrices with equal column counts on top of each other.
pub fn vstack(blocks: &[&CMat]) -> CMat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), b.shape()).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), b.shape()).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Eigen-decomposition of the Hermitian part of a matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEig {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
    pub fn vector(&self, k: usize) -> CVec {
        self.vectors.column(k).into_owned()
    }
}

pub fn hermitian_eig(a: &CMat) -> HermitianEig {
    let n = a.nrows();
    if n == 0 {
        return HermitianEig { values: Vec::new(), vectors: CMat::zeros(0, 0) };
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    HermitianEig { values, vectors }
}

/// `v* A v`, real part.
pub fn quad_form(a: &CMat, v: &CVec) -> f64 {
    v.dotc(&(a * v)).re
}

/// Orthonormal basis of the null space of `a` together with the numerical rank.
/// Singular values at or below `rel_tol * sigma_max` count as zero.
pub fn null_space(a: &CMat, rel_tol: f64) -> (CMat, usize) {
    let (r, c) = a.shape();
    if c == 0 {
        return (CMat::zeros(0, 0), 0);
    }
    if r == 0 {
        return (CMat::identity(c, c), 0);
    }
    // pad to at least square so that the SVD returns a full right basis
    let padded = if r < c {
        let mut p = CMat::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().fold(0.0_f64, |m, &s| m.max(s));
    let tol = rel_tol * smax;
    let null_rows: Vec<usize> = (0..sigma.len()).filter(|&i| smax == 0.0 || sigma[i] <= tol).collect();
    let rank = sigma.len() - null_rows.len();
    let mut z = CMat::zeros(c, null_rows.len());
    for (k, &i) in null_rows.iter().enumerate() {
        for j in 0..c {
            z[(j, k)] = v_t[(i, j)].conj();
        }
    }
    (z, rank)
}

/// Orthonormal basis of the range of `a`.
pub fn range_basis(a: &CMat, rel_tol: f64) -> CMat {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return CMat::zeros(r, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().fold(0.0_f64, |m, &s| m.max(s));
    let keep: Vec<usize> = (0..sigma.len()).filter(|&i| smax > 0.0 && sigma[i] > rel_tol * smax).collect();
    CMat::from_fn(r, keep.len(), |i, k| u[(i, keep[k])])
}

/// Solve `a x = b` by LU; `None` when `a` is singular.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse()
}

/// Powers `D^0 .. D^k` of a square matrix.
pub fn powers(d: &CMat, k: usize) -> Vec<CMat> {
    let n = d.nrows();
    let mut out = vec![CMat::identity(n, n)];
    for p in 1..=k {
        let next = &out[p - 1] * d;
        out.push(next);
    }
    out
}

/// Upper-triangular eigenvectors of a Schur factor `t`. Column `k` has a unit
/// entry at position `k` and zeros below.
pub fn triangular_eigenvectors(t: &CMat) -> CMat {
    let n = t.nrows();
    let scale = max_abs(t).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let mut v = CMat::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        v[(k, k)] = ONE;
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in (i + 1)..=k {
                s += t[(i, j)] * v[(j, k)];
            }
            let mut den = t[(i, i)] - lambda;
            if den.norm() < small {
                den = c64(small, 0.0);
            }
            v[(i, k)] = -s / den;
        }
        let nrm = v.column(k).norm();
        if nrm > 0.0 {
            v.column_mut(k).unscale_mut(nrm);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let a = real_matrix(1, 3, &[1.0, 1.0, 0.0]);
        let (z, rank) = null_space(&a, 1e-10);
        assert_eq!(rank, 1);
        assert_eq!(z.ncols(), 2);
        assert!((&a * &z).norm() < 1e-14);
        let g = z.adjoint() * &z;
        assert!((g - CMat::identity(2, 2)).norm() < 1e-13);
    }

    #[test]
    fn null_space_of_rank_deficient_tall_matrix() {
        let a = real_matrix(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        let (z, rank) = null_space(&a, 1e-10);
        assert_eq!(rank, 1);
        assert_eq!(z.ncols(), 1);
        assert!((&a * &z).norm() < 1e-13);
    }

    #[test]
    fn hermitian_eig_sorted() {
        let a = real_matrix(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = hermitian_eig(&a);
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let v = e.vector(1);
        assert!((quad_form(&a, &v) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn triangular_eigenvectors_are_eigenvectors() {
        let t = CMat::from_fn(4, 4, |i, j| if j >= i { c64(1.0 + i as f64 + 0.3 * j as f64, 0.1 * j as f64) } else { ZERO });
        let v = triangular_eigenvectors(&t);
        for k in 0..4 {
            let x = v.column(k).into_owned();
            let r = &t * &x - x.scale(1.0) * t[(k, k)];
            assert!(r.norm() < 1e-12, "column {k}");
        }
    }

    #[test]
    fn kron_and_block_diag_shapes() {
        let a = CMat::identity(2, 2);
        let b = real_matrix(1, 2, &[1.0, 2.0]);
        assert_eq!(kron(&a, &b).shape(), (2, 4));
        assert_eq!(block_diag(&[a, b]).shape(), (3, 4));
    }
}
