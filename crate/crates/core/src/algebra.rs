//! Finite-dimensional C*-algebras as direct sums of full matrix blocks.
//!
//! The basis of an algebra is the family of matrix units `E^k_{ij}`, ordered
//! by block and then row-major. It is orthonormal for the inner product
//! `(x, y) = faithful_trace(y* x)`, so coordinates are plain entry lists.

use crate::error::{Error, Result};
use crate::linalg::{self, c, real, Mat, Vector, C};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlgebraSpec {
    pub block_dims: Vec<usize>,
}

impl AlgebraSpec {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::InvalidSpec("at least one block required".into()));
        }
        if block_dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidSpec("block sizes must be positive".into()));
        }
        Ok(AlgebraSpec { block_dims })
    }

    /// Shorthand for specs known to be valid; panics otherwise.
    pub fn of(block_dims: &[usize]) -> Self {
        Self::new(block_dims.to_vec()).expect("valid block sizes")
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.block_dims.clone()).map(|_| ())
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Complex dimension, the sum of squared block sizes.
    pub fn dim(&self) -> usize {
        self.block_dims.iter().map(|n| n * n).sum()
    }

    /// Size of the block-diagonal embedding.
    pub fn embed_size(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn block_offset(&self, k: usize) -> usize {
        self.block_dims[..k].iter().map(|n| n * n).sum()
    }

    pub fn basis_index(&self, k: usize, i: usize, j: usize) -> usize {
        self.block_offset(k) + i * self.block_dims[k] + j
    }

    /// Inverse of `basis_index`.
    pub fn basis_label(&self, idx: usize) -> (usize, usize, usize) {
        let mut rest = idx;
        for (k, &n) in self.block_dims.iter().enumerate() {
            if rest < n * n {
                return (k, rest / n, rest % n);
            }
            rest -= n * n;
        }
        panic!("basis index {idx} out of range for {:?}", self.block_dims);
    }

    /// Index of the adjoint matrix unit.
    pub fn adjoint_index(&self, idx: usize) -> usize {
        let (k, i, j) = self.basis_label(idx);
        self.basis_index(k, j, i)
    }

    pub fn basis_element(&self, idx: usize) -> Element {
        let (k, i, j) = self.basis_label(idx);
        let mut e = Element::zero(self);
        e.blocks[k][(i, j)] = real(1.0);
        e
    }

    pub fn basis(&self) -> Vec<Element> {
        (0..self.dim()).map(|i| self.basis_element(i)).collect()
    }

    /// Block sizes of the tensor product, pairs `(k, l)` in lexicographic order.
    pub fn tensor(&self, other: &AlgebraSpec) -> AlgebraSpec {
        let mut dims = Vec::with_capacity(self.num_blocks() * other.num_blocks());
        for &n in &self.block_dims {
            for &m in &other.block_dims {
                dims.push(n * m);
            }
        }
        AlgebraSpec { block_dims: dims }
    }

    /// Basis index of `e_a ⊗ f_b` in the tensor product algebra.
    pub fn tensor_index(&self, other: &AlgebraSpec, a: usize, b: usize) -> usize {
        let (k, i, j) = self.basis_label(a);
        let (l, r, s) = other.basis_label(b);
        let prod = self.tensor(other);
        let m = other.block_dims[l];
        prod.basis_index(k * other.num_blocks() + l, i * m + r, j * m + s)
    }

    /// For each block, a finite unitary group whose conjugation average is the
    /// projection onto the commutant of that block (shift-clock operators
    /// together with the sign flip of the block).
    pub fn block_groups(&self) -> Vec<Vec<Element>> {
        let mut groups = Vec::new();
        for (k, &n) in self.block_dims.iter().enumerate() {
            let omega = std::f64::consts::TAU / n as f64;
            let mut g = Vec::with_capacity(2 * n * n);
            for sign in [1.0, -1.0] {
                for a in 0..n {
                    for b in 0..n {
                        let mut u = Element::unit(self);
                        let mut blk = Mat::zeros(n, n);
                        for col in 0..n {
                            let phase = C::from_polar(1.0, omega * (b * col) as f64);
                            blk[((col + a) % n, col)] = phase * sign;
                        }
                        u.blocks[k] = blk;
                        g.push(u);
                    }
                }
            }
            groups.push(g);
        }
        groups
    }
}

/// An element of a block algebra, one square matrix per block.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub(crate) blocks: Vec<Mat>,
}

fn check_same(a: &Element, b: &Element) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "blocks {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

impl Element {
    pub fn from_blocks(spec: &AlgebraSpec, blocks: Vec<Mat>) -> Result<Self> {
        if blocks.len() != spec.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks for a spec with {}",
                blocks.len(),
                spec.num_blocks()
            )));
        }
        for (b, &n) in blocks.iter().zip(&spec.block_dims) {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "block {}x{} where {n}x{n} expected",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Invalid("non-finite entry".into()));
            }
        }
        Ok(Element { blocks })
    }

    pub fn zero(spec: &AlgebraSpec) -> Self {
        Element {
            blocks: spec.block_dims.iter().map(|&n| Mat::zeros(n, n)).collect(),
        }
    }

    pub fn unit(spec: &AlgebraSpec) -> Self {
        Self::scalar(spec, real(1.0))
    }

    pub fn scalar(spec: &AlgebraSpec, z: C) -> Self {
        Element {
            blocks: spec
                .block_dims
                .iter()
                .map(|&n| Mat::identity(n, n) * z)
                .collect(),
        }
    }

    pub fn spec(&self) -> AlgebraSpec {
        AlgebraSpec {
            block_dims: self.shape(),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &Mat {
        &self.blocks[k]
    }

    /// Coordinates in the matrix-unit basis.
    pub fn coords(&self) -> Vector {
        let mut v = Vec::with_capacity(self.blocks.iter().map(|b| b.len()).sum());
        for b in &self.blocks {
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    v.push(b[(i, j)]);
                }
            }
        }
        Vector::from_vec(v)
    }

    pub fn from_coords(spec: &AlgebraSpec, v: &Vector) -> Self {
        assert_eq!(v.len(), spec.dim(), "coordinate length");
        let mut e = Element::zero(spec);
        let mut idx = 0;
        for b in e.blocks.iter_mut() {
            let n = b.nrows();
            for i in 0..n {
                for j in 0..n {
                    b[(i, j)] = v[idx];
                    idx += 1;
                }
            }
        }
        e
    }

    /// Matrix of left multiplication by `self` in basis coordinates.
    pub fn left_mul_matrix(&self) -> Mat {
        let spec = self.spec();
        let d = spec.dim();
        let mut m = Mat::zeros(d, d);
        for j in 0..d {
            m.set_column(j, &(self * &spec.basis_element(j)).coords());
        }
        m
    }

    /// Matrix of right multiplication by `self` in basis coordinates.
    pub fn right_mul_matrix(&self) -> Mat {
        let spec = self.spec();
        let d = spec.dim();
        let mut m = Mat::zeros(d, d);
        for j in 0..d {
            m.set_column(j, &(&spec.basis_element(j) * self).coords());
        }
        m
    }

    pub fn checked_add(&self, other: &Element) -> Result<Element> {
        check_same(self, other)?;
        Ok(self + other)
    }

    pub fn checked_mul(&self, other: &Element) -> Result<Element> {
        check_same(self, other)?;
        Ok(self * other)
    }

    pub fn scale(&self, z: C) -> Element {
        Element {
            blocks: self.blocks.iter().map(|b| b * z).collect(),
        }
    }

    pub fn scale_real(&self, x: f64) -> Element {
        self.scale(real(x))
    }

    pub fn adjoint(&self) -> Element {
        Element {
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    /// Operator norm: the largest singular value over all blocks.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::spec_norm).fold(0.0, f64::max)
    }

    /// Largest entry modulus; a cheap residual measure.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.blocks.iter().map(linalg::hermitian_residual).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(linalg::min_eig)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        let n = self.norm();
        self.hermitian_residual() <= tol * n.max(f64::MIN_POSITIVE)
            && self.min_eigenvalue() >= -tol * n.max(1.0)
    }

    pub fn is_projection(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol && (&(self * self) - self).max_abs() <= tol
    }

    /// Functional calculus on the Hermitian part, blockwise.
    pub fn apply_hermitian(&self, f: impl Fn(f64) -> f64) -> Element {
        Element {
            blocks: self.blocks.iter().map(|b| linalg::herm_fn(b, &f)).collect(),
        }
    }

    pub fn sqrt(&self, tol: f64) -> Result<Element> {
        if !self.is_positive(tol) {
            return Err(Error::NotPositive {
                min_eigenvalue: self.min_eigenvalue(),
            });
        }
        Ok(self.apply_hermitian(|x| x.max(0.0).sqrt()))
    }

    /// `y = (‖x‖² 1 − x* x)^{1/2}`, so that `y*y + x*x = ‖x‖² 1`.
    pub fn defect(&self) -> Element {
        let spec = self.spec();
        let n2 = self.norm().powi(2);
        let m = &Element::scalar(&spec, real(n2)) - &(&self.adjoint() * self);
        m.apply_hermitian(|x| x.max(0.0).sqrt())
    }

    /// Positive `p_0..p_3` with `self = Σ i^k p_k`.
    pub fn positive_decompose(&self) -> [Element; 4] {
        let re = (self + &self.adjoint()).scale_real(0.5);
        let im = (self - &self.adjoint()).scale(c(0.0, -0.5));
        let pos = |h: &Element| h.apply_hermitian(|x| x.max(0.0));
        let neg = |h: &Element| h.apply_hermitian(|x| (-x).max(0.0));
        [pos(&re), pos(&im), neg(&re), neg(&im)]
    }

    /// Sum of the unnormalised block traces.
    pub fn faithful_trace(&self) -> C {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    /// Block-diagonal embedding.
    pub fn to_block_diag(&self) -> Mat {
        let n: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let mut m = Mat::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            m.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
            off += b.nrows();
        }
        m
    }

    /// Tensor product element in the algebra `self.spec().tensor(other.spec())`.
    pub fn kron(&self, other: &Element) -> Element {
        let mut blocks = Vec::with_capacity(self.blocks.len() * other.blocks.len());
        for a in &self.blocks {
            for b in &other.blocks {
                blocks.push(a.kronecker(b));
            }
        }
        Element { blocks }
    }

    pub fn distance(&self, other: &Element) -> f64 {
        (self - other).norm()
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl std::ops::$tr<&Element> for &Element {
            type Output = Element;
            fn $f(self, rhs: &Element) -> Element {
                assert_eq!(self.shape(), rhs.shape(), "element shape mismatch");
                Element {
                    blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a $op b).collect(),
                }
            }
        }
    };
}
binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

/// Blockwise product, failing on mismatched shapes.
pub fn mul(a: &Element, b: &Element) -> Result<Element> {
    a.checked_mul(b)
}

pub fn norm(a: &Element) -> f64 {
    a.norm()
}

pub fn is_positive(a: &Element, tol: f64) -> bool {
    a.is_positive(tol)
}

pub fn sqrt(a: &Element, tol: f64) -> Result<Element> {
    a.sqrt(tol)
}

pub fn defect(x: &Element) -> Element {
    x.defect()
}

pub fn positive_decompose(m: &Element) -> [Element; 4] {
    m.positive_decompose()
}

pub fn faithful_trace(a: &Element) -> C {
    a.faithful_trace()
}

/// Recombine `Σ i^k p_k`.
pub fn recombine(parts: &[Element; 4]) -> Element {
    let phases = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
    let mut out = Element::zero(&parts[0].spec());
    for (p, z) in parts.iter().zip(phases) {
        out = &out + &p.scale(z);
    }
    out
}

/// Increasing projections `u_i = 1_{block 1} + … + 1_{block i}`.
#[derive(Clone, Debug)]
pub struct PartialUnitNet {
    pub spec: AlgebraSpec,
    pub length: usize,
}

impl PartialUnitNet {
    pub fn new(spec: &AlgebraSpec) -> Self {
        PartialUnitNet {
            spec: spec.clone(),
            length: spec.num_blocks(),
        }
    }

    /// Element with index `i` in `1..=length`.
    pub fn element(&self, i: usize) -> Element {
        let mut e = Element::zero(&self.spec);
        for k in 0..i.min(self.spec.num_blocks()) {
            let n = self.spec.block_dims[k];
            e.blocks[k] = Mat::identity(n, n);
        }
        e
    }

    pub fn elements(&self) -> Vec<Element> {
        (1..=self.length).map(|i| self.element(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_spec() -> impl Strategy<Value = AlgebraSpec> {
        prop::collection::vec(1usize..=3, 1..=3).prop_map(|d| AlgebraSpec { block_dims: d })
    }

    fn arb_element(spec: AlgebraSpec) -> impl Strategy<Value = Element> {
        let d = spec.dim();
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), d).prop_map(move |v| {
            Element::from_coords(&spec, &Vector::from_iterator(d, v.into_iter().map(|(a, b)| c(a, b))))
        })
    }

    fn spec_and_pair() -> impl Strategy<Value = (Element, Element)> {
        arb_spec().prop_flat_map(|s| (arb_element(s.clone()), arb_element(s)))
    }

    #[test]
    fn unit_law_and_norms() {
        let s = AlgebraSpec::of(&[1, 2]);
        let x = Element::from_coords(&s, &Vector::from_iterator(5, (0..5).map(|i| c(i as f64, 1.0))));
        assert_eq!(&Element::unit(&s) * &x, x);
        assert!((Element::unit(&s).norm() - 1.0).abs() < 1e-14);
        let d = Element::from_blocks(
            &AlgebraSpec::of(&[2]),
            vec![Mat::from_diagonal(&Vector::from_vec(vec![real(3.0), real(-4.0)]))],
        )
        .unwrap();
        assert!((d.norm() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_shapes_error() {
        let a = Element::unit(&AlgebraSpec::of(&[2]));
        let b = Element::unit(&AlgebraSpec::of(&[1, 1]));
        assert!(matches!(mul(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn nilpotent_is_not_positive() {
        let s = AlgebraSpec::of(&[2]);
        assert!(!s.basis_element(1).is_positive(1e-9));
        assert!(Element::unit(&s).is_positive(1e-9));
    }

    #[test]
    fn sqrt_examples_and_trace() {
        let s = AlgebraSpec::of(&[1, 2]);
        let four = Element::scalar(&s, real(4.0));
        assert!(four.sqrt(1e-9).unwrap().distance(&Element::scalar(&s, real(2.0))) < 1e-12);
        assert_eq!(Element::unit(&s).faithful_trace(), real(3.0));
        assert!(matches!(
            Element::scalar(&s, real(-1.0)).sqrt(1e-9),
            Err(Error::NotPositive { .. })
        ));
        assert!(Element::zero(&s).defect().norm() < 1e-15);
        assert!(Element::unit(&s).defect().norm() < 1e-12);
    }

    #[test]
    fn partial_units_are_increasing_projections() {
        let s = AlgebraSpec::of(&[2, 1, 3]);
        let net = PartialUnitNet::new(&s);
        let els = net.elements();
        for w in els.windows(2) {
            assert!(w[0].is_projection(1e-14));
            assert!((&w[1] - &w[0]).is_positive(1e-12));
        }
        assert_eq!(els.last().unwrap(), &Element::unit(&s));
    }

    #[test]
    fn block_groups_are_unitary() {
        let s = AlgebraSpec::of(&[3, 1]);
        for g in s.block_groups() {
            for u in g {
                assert!((&u.adjoint() * &u).distance(&Element::unit(&s)) < 1e-12);
            }
        }
    }

    #[test]
    fn tensor_index_matches_kron() {
        let a = AlgebraSpec::of(&[1, 2]);
        let b = AlgebraSpec::of(&[2, 1]);
        let p = a.tensor(&b);
        for i in 0..a.dim() {
            for j in 0..b.dim() {
                let k = a.basis_element(i).kron(&b.basis_element(j));
                assert_eq!(k, p.basis_element(a.tensor_index(&b, i, j)));
            }
        }
    }

    proptest! {
        #[test]
        fn mul_matches_block_diagonal_embedding((x, y) in spec_and_pair()) {
            let prod = (&x * &y).to_block_diag();
            let direct = x.to_block_diag() * y.to_block_diag();
            prop_assert!(linalg::max_abs(&(prod - direct)) < 1e-12);
        }

        #[test]
        fn c_star_identity((x, _y) in spec_and_pair()) {
            let n = x.norm();
            let lhs = (&x.adjoint() * &x).norm();
            prop_assert!((lhs - n * n).abs() <= 1e-9 * (n * n).max(1.0));
        }

        #[test]
        fn sqrt_squares_back((x, _y) in spec_and_pair()) {
            let a = &x.adjoint() * &x;
            let r = a.sqrt(1e-9).unwrap();
            prop_assert!(r.is_positive(1e-9));
            prop_assert!((&r * &r).distance(&a) <= 1e-10 * a.norm().max(1.0));
        }

        #[test]
        fn defect_identity((x, _y) in spec_and_pair()) {
            let y = x.defect();
            let n2 = x.norm().powi(2);
            let lhs = &(&y.adjoint() * &y) + &(&x.adjoint() * &x);
            prop_assert!(lhs.distance(&Element::scalar(&x.spec(), real(n2))) <= 1e-9 * n2.max(1.0));
        }

        #[test]
        fn decomposition_recombines((x, _y) in spec_and_pair()) {
            let parts = x.positive_decompose();
            for p in &parts {
                prop_assert!(p.is_positive(1e-9));
            }
            prop_assert!(recombine(&parts).distance(&x) <= 1e-10 * x.norm().max(1.0));
        }

        #[test]
        fn hermitian_decomposition_has_no_imaginary_part((x, _y) in spec_and_pair()) {
            let h = &x + &x.adjoint();
            let parts = h.positive_decompose();
            prop_assert!(parts[1].norm() < 1e-10 * h.norm().max(1.0));
            prop_assert!(parts[3].norm() < 1e-10 * h.norm().max(1.0));
        }

        #[test]
        fn trace_is_frobenius((x, _y) in spec_and_pair()) {
            let t = (&x.adjoint() * &x).faithful_trace();
            let fro: f64 = x.coords().iter().map(|z| z.norm_sqr()).sum();
            prop_assert!(t.im.abs() < 1e-10 && (t.re - fro).abs() <= 1e-10 * fro.max(1.0));
        }

        #[test]
        fn positivity_closed_under_sums((x, y) in spec_and_pair()) {
            let a = &x.adjoint() * &x;
            let b = &y.adjoint() * &y;
            prop_assert!((&a + &b).is_positive(1e-9));
        }

        #[test]
        fn hereditary_compression((x, _y) in spec_and_pair()) {
            let spec = x.spec();
            let a = &x.adjoint() * &x;
            let p = PartialUnitNet::new(&spec).element(1);
            prop_assert!((&(&p * &a) * &p).is_positive(1e-9));
        }

        #[test]
        fn adjoint_is_involution((x, _y) in spec_and_pair()) {
            prop_assert_eq!(x.adjoint().adjoint(), x);
        }
    }
}
