//! Dense complex linear algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C = Complex64;
pub type Mat = DMatrix<C>;
pub type Vector = DVector<C>;

/// Relative threshold for rank decisions.
pub const RANK_REL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn real(x: f64) -> C {
    C::new(x, 0.0)
}

pub fn hermitian_part(m: &Mat) -> Mat {
    (m + m.adjoint()) * real(0.5)
}

/// Largest entry modulus of `m - m*`.
pub fn hermitian_residual(m: &Mat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of `m`.
pub fn herm_eig(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Functional calculus on the Hermitian part of `m`.
pub fn herm_fn(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let (vals, vecs) = herm_eig(m);
    let d = Mat::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&x| real(f(x))),
    ));
    &vecs * d * vecs.adjoint()
}

/// Complex-valued functional calculus (used for unitaries `exp(iY)`).
pub fn herm_fn_complex(m: &Mat, f: impl Fn(f64) -> C) -> Mat {
    let (vals, vecs) = herm_eig(m);
    let d = Mat::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|&x| f(x))));
    &vecs * d * vecs.adjoint()
}

pub fn min_eig(m: &Mat) -> f64 {
    herm_eig(m).0.first().copied().unwrap_or(0.0)
}

pub fn max_eig(m: &Mat) -> f64 {
    herm_eig(m).0.last().copied().unwrap_or(0.0)
}

/// Thin singular value decomposition `m = u diag(s) v*`, values descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

/// SVD through the Hermitian eigenproblem of `[[0, m], [m*, 0]]`, after a QR
/// reduction to a square factor. The eigenvalues of the augmented matrix are
/// `±s_i`, with eigenvectors `(u_i, ±v_i)/√2`.
pub fn svd(m: &Mat) -> Svd {
    let (r, cdim) = (m.nrows(), m.ncols());
    let k = r.min(cdim);
    if k == 0 {
        return Svd {
            u: Mat::zeros(r, 0),
            s: Vec::new(),
            v: Mat::zeros(cdim, 0),
        };
    }
    if r > cdim {
        let qr = m.clone().qr();
        let inner = svd_square(&qr.r());
        return Svd {
            u: qr.q() * inner.u,
            s: inner.s,
            v: inner.v,
        };
    }
    if r < cdim {
        let qr = m.adjoint().qr();
        let inner = svd_square(&qr.r().adjoint());
        return Svd {
            u: inner.u,
            s: inner.s,
            v: qr.q() * inner.v,
        };
    }
    svd_square(m)
}

fn svd_square(m: &Mat) -> Svd {
    let n = m.nrows();
    let mut aug = Mat::zeros(2 * n, 2 * n);
    aug.view_mut((0, n), (n, n)).copy_from(m);
    aug.view_mut((n, 0), (n, n)).copy_from(&m.adjoint());
    let (vals, vecs) = herm_eig(&aug);
    let scale = real(std::f64::consts::SQRT_2);
    let mut u = Mat::zeros(n, n);
    let mut v = Mat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for k in 0..n {
        let idx = 2 * n - 1 - k;
        s.push(vals[idx].max(0.0));
        u.set_column(k, &(vecs.column(idx).rows(0, n) * scale));
        v.set_column(k, &(vecs.column(idx).rows(n, n) * scale));
    }
    Svd { u, s, v }
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    svd(m).s
}

/// Spectral norm, as `λ_max(m* m)^{1/2}` on the smaller Gram side.
pub fn spec_norm(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let g = if m.nrows() < m.ncols() { m * m.adjoint() } else { m.adjoint() * m };
    max_eig(&g).max(0.0).sqrt()
}

pub fn rank(m: &Mat) -> usize {
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    if top <= f64::MIN_POSITIVE {
        return 0;
    }
    s.iter().filter(|&&x| x > RANK_REL * top).count()
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(m: &Mat) -> Mat {
    let d = svd(m);
    let top = d.s.first().copied().unwrap_or(0.0);
    let mut out = Mat::zeros(m.ncols(), m.nrows());
    for (k, &s) in d.s.iter().enumerate() {
        if top > 0.0 && s > RANK_REL * top {
            out += d.v.column(k) * d.u.column(k).adjoint() * real(1.0 / s);
        }
    }
    out
}

/// Orthonormal basis of the column space.
pub fn range_basis(m: &Mat) -> Mat {
    let d = svd(m);
    let top = d.s.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..d.s.len()).filter(|&k| top > 0.0 && d.s[k] > RANK_REL * top).collect();
    let mut out = Mat::zeros(m.nrows(), keep.len());
    for (j, &k) in keep.iter().enumerate() {
        out.set_column(j, &d.u.column(k));
    }
    out
}

/// Modified Gram-Schmidt over the given vectors, in order, dropping dependent ones.
pub fn gram_schmidt(vectors: &[Vector]) -> Vec<Vector> {
    let scale = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut out: Vec<Vector> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let proj = q.dotc(&w);
                w -= q * proj;
            }
        }
        let n = w.norm();
        if scale > 0.0 && n > 1e-9 * scale {
            out.push(w / real(n));
        }
    }
    out
}

pub fn columns_to_mat(rows: usize, cols: &[Vector]) -> Mat {
    let mut m = Mat::zeros(rows, cols.len());
    for (j, v) in cols.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Whitening pair `(H^{1/2}, H^{-1/2})` of a positive definite Hermitian matrix.
pub fn sqrt_pair(h: &Mat) -> (Mat, Mat) {
    let (vals, vecs) = herm_eig(h);
    let n = vals.len();
    let s = DVector::from_iterator(n, vals.iter().map(|&x| real(x.max(0.0).sqrt())));
    let si = DVector::from_iterator(
        n,
        vals.iter().map(|&x| if x > 0.0 { real(1.0 / x.sqrt()) } else { real(0.0) }),
    );
    (
        &vecs * Mat::from_diagonal(&s) * vecs.adjoint(),
        &vecs * Mat::from_diagonal(&si) * vecs.adjoint(),
    )
}

pub fn is_identity(m: &Mat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - Mat::identity(m.nrows(), m.ncols()))) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_one() {
        let v = Vector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let m = &v * v.adjoint();
        let p = pinv(&m);
        assert!(max_abs(&(&m * &p * &m - &m)) < 1e-12);
        assert_eq!(rank(&m), 1);
    }

    #[test]
    fn eig_sorted_and_fn() {
        let m = Mat::from_diagonal(&DVector::from_vec(vec![real(4.0), real(1.0)]));
        let (vals, _) = herm_eig(&m);
        assert_eq!(vals, vec![1.0, 4.0]);
        let s = herm_fn(&m, f64::sqrt);
        assert!((s[(0, 0)].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn svd_reconstructs_repeated_values() {
        // complex matrix with fourfold repeated singular values
        let base = Mat::from_fn(3, 5, |i, j| c((i * 5 + j) as f64 * 0.37 - 1.0, ((i + 2 * j) % 3) as f64));
        let m = base.kronecker(&Mat::identity(2, 2).map(|z| z * c(0.0, 1.0)));
        for t in [m.clone(), m.adjoint()] {
            let d = svd(&t);
            let s = Mat::from_diagonal(&DVector::from_iterator(d.s.len(), d.s.iter().map(|&x| real(x))));
            assert!(max_abs(&(&d.u * s * d.v.adjoint() - &t)) < 1e-12);
            let p = pinv(&t);
            assert!(max_abs(&(&t * &p * &t - &t)) < 1e-12);
        }
    }

    #[test]
    fn gram_schmidt_drops_dependent() {
        let a = Vector::from_vec(vec![real(1.0), real(0.0)]);
        let b = Vector::from_vec(vec![real(2.0), real(0.0)]);
        assert_eq!(gram_schmidt(&[a, b]).len(), 1);
    }
}
