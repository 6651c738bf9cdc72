//! Finite-dimensional Hilbert C*-modules over a block algebra and the
//! B-linear maps between them.
//!
//! A module is stored on a complex basis `e_1..e_d` with the right action of
//! every matrix unit of `B` and the B-valued Gram tensor `⟨e_i, e_j⟩`. The
//! inner product is linear in the first variable and `⟨x·b, y⟩ = ⟨x, y⟩ b`.
//! The scalar product `(x, y) = faithful_trace ⟨x, y⟩ = y* H x` gives the
//! Hilbert space on which norms, adjoints and positivity are computed; this is
//! faithful because the trace is.

use crate::algebra::{AlgebraSpec, Element};
use crate::error::{Error, Result};
use crate::linalg::{self, real, Mat, Vector};
use rand::Rng;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct ModuleRep {
    base: AlgebraSpec,
    action: Vec<Mat>,
    gram: Vec<Vec<Element>>,
    h: Mat,
    h_inv: Mat,
    h_sqrt: Mat,
    h_inv_sqrt: Mat,
}

/// Residuals of the module axioms.
#[derive(Clone, Debug)]
pub struct ModuleResiduals {
    pub conjugate_symmetry: f64,
    pub compatibility: f64,
    pub action_homomorphism: f64,
    pub positivity_min_eig: f64,
    pub scalar_gram_min_eig: f64,
}

impl ModuleRep {
    /// Module from action matrices and the B-valued Gram tensor.
    pub fn new(base: AlgebraSpec, action: Vec<Mat>, gram: Vec<Vec<Element>>) -> Result<Self> {
        let d = gram.len();
        Self::check_action(&base, &action, d)?;
        let shape = base.block_dims.clone();
        for row in &gram {
            if row.len() != d || row.iter().any(|g| g.shape() != shape) {
                return Err(Error::ShapeMismatch("gram tensor".into()));
            }
        }
        let h = Mat::from_fn(d, d, |j, i| gram[i][j].faithful_trace());
        Self::assemble(base, action, gram, h)
    }

    /// Module whose B-valued Gram is recovered from the action and the scalar
    /// Gram through `Tr(e_δ* ⟨x, y⟩) = (x·e_δ*, y)`.
    pub fn from_scalar_gram(base: AlgebraSpec, action: Vec<Mat>, h: Mat) -> Result<Self> {
        let d = h.nrows();
        Self::check_action(&base, &action, d)?;
        let h = linalg::hermitian_part(&h);
        let coeffs: Vec<Mat> = (0..base.dim())
            .map(|delta| &h * &action[base.adjoint_index(delta)])
            .collect();
        let gram = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let v = Vector::from_iterator(base.dim(), coeffs.iter().map(|m| m[(j, i)]));
                        Element::from_coords(&base, &v)
                    })
                    .collect()
            })
            .collect();
        Self::assemble(base, action, gram, h)
    }

    /// The algebra `B` as a right module over itself, `⟨x, y⟩ = y* x`.
    pub fn free(base: &AlgebraSpec) -> Self {
        let action = (0..base.dim())
            .map(|b| base.basis_element(b).right_mul_matrix())
            .collect();
        let d = base.dim();
        Self::from_scalar_gram(base.clone(), action, Mat::identity(d, d)).expect("free module")
    }

    pub fn zero(base: &AlgebraSpec) -> Self {
        Self::from_scalar_gram(
            base.clone(),
            vec![Mat::zeros(0, 0); base.dim()],
            Mat::zeros(0, 0),
        )
        .expect("zero module")
    }

    fn check_action(base: &AlgebraSpec, action: &[Mat], d: usize) -> Result<()> {
        if action.len() != base.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} action matrices for an algebra of dimension {}",
                action.len(),
                base.dim()
            )));
        }
        if action.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::ShapeMismatch("action matrix size".into()));
        }
        Ok(())
    }

    fn assemble(base: AlgebraSpec, action: Vec<Mat>, gram: Vec<Vec<Element>>, h: Mat) -> Result<Self> {
        let h = linalg::hermitian_part(&h);
        let d = h.nrows();
        if d > 0 {
            let (vals, _) = linalg::herm_eig(&h);
            let top = vals.last().copied().unwrap_or(0.0);
            if vals[0] <= 1e-12 * top.max(f64::MIN_POSITIVE) {
                return Err(Error::Invalid(format!(
                    "degenerate scalar Gram (smallest eigenvalue {:e})",
                    vals[0]
                )));
            }
        }
        let (h_sqrt, h_inv_sqrt) = linalg::sqrt_pair(&h);
        let h_inv = &h_inv_sqrt * &h_inv_sqrt;
        Ok(ModuleRep {
            base,
            action,
            gram,
            h,
            h_inv,
            h_sqrt,
            h_inv_sqrt,
        })
    }

    pub fn base(&self) -> &AlgebraSpec {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn action(&self, basis_index: usize) -> &Mat {
        &self.action[basis_index]
    }

    pub fn actions(&self) -> &[Mat] {
        &self.action
    }

    /// Matrix of right multiplication by a general element.
    pub fn action_of(&self, b: &Element) -> Mat {
        let d = self.dim();
        let mut m = Mat::zeros(d, d);
        for (z, a) in b.coords().iter().zip(&self.action) {
            if z.norm() != 0.0 {
                m += a * *z;
            }
        }
        m
    }

    pub fn gram(&self, i: usize, j: usize) -> &Element {
        &self.gram[i][j]
    }

    pub fn gram_tensor(&self) -> &[Vec<Element>] {
        &self.gram
    }

    pub fn scalar_gram(&self) -> &Mat {
        &self.h
    }

    pub fn h_inv(&self) -> &Mat {
        &self.h_inv
    }

    pub fn h_sqrt(&self) -> &Mat {
        &self.h_sqrt
    }

    pub fn h_inv_sqrt(&self) -> &Mat {
        &self.h_inv_sqrt
    }

    pub fn basis_vector(&self, i: usize) -> Vector {
        let mut v = Vector::zeros(self.dim());
        v[i] = real(1.0);
        v
    }

    /// `⟨x, y⟩`, expanded over the Gram tensor.
    pub fn inner(&self, x: &Vector, y: &Vector) -> Result<Element> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::ShapeMismatch("module vector length".into()));
        }
        Ok(self.inner_unchecked(x, y))
    }

    pub(crate) fn inner_unchecked(&self, x: &Vector, y: &Vector) -> Element {
        let mut out = Element::zero(&self.base);
        for (i, xi) in x.iter().enumerate() {
            if xi.norm() == 0.0 {
                continue;
            }
            for (j, yj) in y.iter().enumerate() {
                let w = xi * yj.conj();
                if w.norm() != 0.0 {
                    out = &out + &self.gram[i][j].scale(w);
                }
            }
        }
        out
    }

    pub fn scalar_inner(&self, x: &Vector, y: &Vector) -> linalg::C {
        (y.adjoint() * &self.h * x)[(0, 0)]
    }

    pub fn right_mul(&self, x: &Vector, b: &Element) -> Vector {
        self.action_of(b) * x
    }

    pub fn vec_norm_sq(&self, x: &Vector) -> f64 {
        self.inner_unchecked(x, x).norm()
    }

    /// `‖x‖ = ‖⟨x, x⟩‖^{1/2}`.
    pub fn vec_norm(&self, x: &Vector) -> f64 {
        self.vec_norm_sq(x).sqrt()
    }

    /// Whitened action matrices of a unitary group of `B`.
    pub(crate) fn whitened_right_groups(&self) -> Vec<Vec<Mat>> {
        self.base
            .block_groups()
            .iter()
            .map(|g| {
                g.iter()
                    .map(|u| &self.h_sqrt * self.action_of(u) * &self.h_inv_sqrt)
                    .collect()
            })
            .collect()
    }

    pub fn residuals(&self) -> ModuleResiduals {
        let d = self.dim();
        let mut sym: f64 = 0.0;
        let mut compat: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                sym = sym.max(self.gram[i][j].adjoint().distance(&self.gram[j][i]));
            }
        }
        for beta in 0..self.base.dim() {
            let b = self.base.basis_element(beta);
            for i in 0..d {
                let xb = &self.action[beta] * self.basis_vector(i);
                for j in 0..d {
                    let lhs = self.inner_unchecked(&xb, &self.basis_vector(j));
                    let rhs = &self.gram[i][j] * &b;
                    compat = compat.max(lhs.distance(&rhs));
                }
            }
        }
        let mut hom: f64 = 0.0;
        for a in 0..self.base.dim() {
            for b in 0..self.base.dim() {
                let prod = &self.base.basis_element(a) * &self.base.basis_element(b);
                let lhs = self.action_of(&prod);
                let rhs = &self.action[b] * &self.action[a];
                hom = hom.max(linalg::max_abs(&(lhs - rhs)));
            }
        }
        let pos = self.amplified_gram_min_eig();
        let scalar = linalg::min_eig(&self.h);
        ModuleResiduals {
            conjugate_symmetry: sym,
            compatibility: compat,
            action_homomorphism: hom,
            positivity_min_eig: pos,
            scalar_gram_min_eig: scalar,
        }
    }

    /// Smallest eigenvalue of `[⟨e_i, e_j⟩]_{j,i}` in the amplification of `B`.
    fn amplified_gram_min_eig(&self) -> f64 {
        let d = self.dim();
        let mut worst = f64::INFINITY;
        for (l, &m) in self.base.block_dims.iter().enumerate() {
            let mut big = Mat::zeros(d * m, d * m);
            for j in 0..d {
                for i in 0..d {
                    big.view_mut((j * m, i * m), (m, m))
                        .copy_from(self.gram[i][j].block(l));
                }
            }
            worst = worst.min(linalg::min_eig(&big));
        }
        if d == 0 {
            0.0
        } else {
            worst
        }
    }

    /// Conjugates the module by an invertible `u`: new basis coordinates are
    /// `u x`.
    pub fn conjugated(&self, u: &Mat) -> Result<ModuleRep> {
        let ui = u
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invalid("singular change of basis".into()))?;
        let action = self.action.iter().map(|r| u * r * &ui).collect();
        let h = ui.adjoint() * &self.h * &ui;
        ModuleRep::from_scalar_gram(self.base.clone(), action, h)
    }
}

/// Right action tensor `E_1 ⊗ E_2` over `B_1 ⊗ B_2` with Kronecker Gram.
pub fn tensor_module(e1: &ModuleRep, e2: &ModuleRep) -> ModuleRep {
    let (b1, b2) = (e1.base(), e2.base());
    let base = b1.tensor(b2);
    let mut action = vec![Mat::zeros(0, 0); base.dim()];
    for x in 0..b1.dim() {
        for y in 0..b2.dim() {
            action[b1.tensor_index(b2, x, y)] = e1.action(x).kronecker(e2.action(y));
        }
    }
    let (d1, d2) = (e1.dim(), e2.dim());
    let mut gram = vec![Vec::with_capacity(d1 * d2); d1 * d2];
    for i in 0..d1 {
        for k in 0..d2 {
            let row = &mut gram[i * d2 + k];
            for j in 0..d1 {
                for l in 0..d2 {
                    row.push(e1.gram(i, j).kron(e2.gram(k, l)));
                }
            }
        }
    }
    if d1 * d2 == 0 {
        return ModuleRep::zero(&base);
    }
    ModuleRep::new(base, action, gram).expect("tensor of nondegenerate modules")
}

fn same_module(a: &ModuleRep, b: &ModuleRep) -> bool {
    a.dim() == b.dim() && a.base() == b.base()
}

/// A map between modules, stored as a matrix in the module bases.
#[derive(Clone, Debug)]
pub struct ModuleMap {
    source: Arc<ModuleRep>,
    target: Arc<ModuleRep>,
    mat: Mat,
}

impl ModuleMap {
    pub fn new(source: Arc<ModuleRep>, target: Arc<ModuleRep>, mat: Mat) -> Result<Self> {
        if mat.nrows() != target.dim() || mat.ncols() != source.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix for a map of dimension {} -> {}",
                mat.nrows(),
                mat.ncols(),
                source.dim(),
                target.dim()
            )));
        }
        Ok(ModuleMap { source, target, mat })
    }

    pub(crate) fn raw(source: &Arc<ModuleRep>, target: &Arc<ModuleRep>, mat: Mat) -> Self {
        debug_assert_eq!(mat.shape(), (target.dim(), source.dim()));
        ModuleMap {
            source: source.clone(),
            target: target.clone(),
            mat,
        }
    }

    pub fn identity(e: &Arc<ModuleRep>) -> Self {
        Self::raw(e, e, Mat::identity(e.dim(), e.dim()))
    }

    pub fn zero(source: &Arc<ModuleRep>, target: &Arc<ModuleRep>) -> Self {
        Self::raw(source, target, Mat::zeros(target.dim(), source.dim()))
    }

    pub fn source(&self) -> &Arc<ModuleRep> {
        &self.source
    }

    pub fn target(&self) -> &Arc<ModuleRep> {
        &self.target
    }

    pub fn mat(&self) -> &Mat {
        &self.mat
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.mat * x
    }

    /// `max_β ‖t R_β − R_β t‖`.
    pub fn b_linearity_residual(&self) -> f64 {
        (0..self.source.base().dim())
            .map(|b| {
                linalg::max_abs(&(&self.mat * self.source.action(b) - self.target.action(b) * &self.mat))
            })
            .fold(0.0, f64::max)
    }

    /// Adjoint for the scalar products: `H_s^{-1} t* H_t`.
    pub fn adjoint(&self) -> ModuleMap {
        let m = self.source.h_inv() * self.mat.adjoint() * self.target.scalar_gram();
        Self::raw(&self.target, &self.source, m)
    }

    /// `max_δ` over basis pairs of `‖⟨t x, y⟩ − ⟨x, s y⟩‖`, coefficientwise.
    pub fn adjoint_residual(&self, s: &ModuleMap) -> f64 {
        let base = self.source.base();
        let mut worst: f64 = 0.0;
        for delta in 0..base.dim() {
            let ds = base.adjoint_index(delta);
            let lhs = self.target.scalar_gram() * self.target.action(ds) * &self.mat;
            let rhs = s.mat.adjoint() * self.source.scalar_gram() * self.source.action(ds);
            worst = worst.max(linalg::max_abs(&(lhs - rhs)));
        }
        worst
    }

    /// Solves `⟨t x, y⟩ = ⟨x, t* y⟩` for `t*` and checks it at the B-valued level.
    pub fn adjoint_solve(&self, tol: f64) -> Result<ModuleMap> {
        let cand = self.adjoint();
        let residual = self.adjoint_residual(&cand);
        let scale = linalg::max_abs(&self.mat).max(1.0);
        if residual > tol * scale {
            return Err(Error::NotAdjointable { residual });
        }
        Ok(cand)
    }

    /// `self ∘ rhs`.
    pub fn compose(&self, rhs: &ModuleMap) -> Result<ModuleMap> {
        if !same_module(&rhs.target, &self.source) {
            return Err(Error::ShapeMismatch("composition of incompatible maps".into()));
        }
        Ok(Self::raw(&rhs.source, &self.target, &self.mat * &rhs.mat))
    }

    pub(crate) fn then(&self, rhs: &ModuleMap) -> ModuleMap {
        self.compose(rhs).expect("compatible maps")
    }

    pub fn add(&self, other: &ModuleMap) -> Result<ModuleMap> {
        self.check_parallel(other)?;
        Ok(Self::raw(&self.source, &self.target, &self.mat + &other.mat))
    }

    pub fn sub(&self, other: &ModuleMap) -> Result<ModuleMap> {
        self.check_parallel(other)?;
        Ok(Self::raw(&self.source, &self.target, &self.mat - &other.mat))
    }

    fn check_parallel(&self, other: &ModuleMap) -> Result<()> {
        if !same_module(&self.source, &other.source) || !same_module(&self.target, &other.target) {
            return Err(Error::ShapeMismatch("maps between different modules".into()));
        }
        Ok(())
    }

    pub fn scale(&self, z: f64) -> ModuleMap {
        Self::raw(&self.source, &self.target, &self.mat * real(z))
    }

    /// Matrix of the map between the whitened (orthonormal) coordinates.
    pub fn whitened(&self) -> Mat {
        self.target.h_sqrt() * &self.mat * self.source.h_inv_sqrt()
    }

    fn from_whitened_endo(&self, w: Mat) -> ModuleMap {
        let m = self.source.h_inv_sqrt() * w * self.source.h_sqrt();
        Self::raw(&self.source, &self.source, m)
    }

    /// The C*-norm, equal to the operator norm on the scalarized space.
    pub fn op_norm(&self) -> f64 {
        linalg::spec_norm(&self.whitened())
    }

    /// Distance in operator norm.
    pub fn distance(&self, other: &ModuleMap) -> f64 {
        Self::raw(&self.source, &self.target, &self.mat - &other.mat).op_norm()
    }

    fn assert_endo(&self) {
        assert!(same_module(&self.source, &self.target), "endomorphism expected");
    }

    pub fn self_adjoint_residual(&self) -> f64 {
        self.assert_endo();
        linalg::hermitian_residual(&self.whitened())
    }

    /// Smallest eigenvalue of the (self-adjoint part of the) endomorphism.
    pub fn min_eigenvalue(&self) -> f64 {
        self.assert_endo();
        linalg::min_eig(&self.whitened())
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.assert_endo();
        linalg::max_eig(&self.whitened())
    }

    /// Positivity in `L(E)`, with a relative tolerance. Accepted operators
    /// are also fed to the global monitor of `‖Tv‖² ≤ ‖T‖ ‖⟨Tv,v⟩‖`.
    pub fn positive_part_check(&self, tol: f64) -> bool {
        self.assert_endo();
        let w = self.whitened();
        let scale = linalg::spec_norm(&w).max(1.0);
        let ok = linalg::hermitian_residual(&w) <= tol * scale && linalg::min_eig(&w) >= -tol * scale;
        if ok {
            crate::verify::inequality_monitor::observe_basis(self);
        }
        ok
    }

    /// Functional calculus on a self-adjoint endomorphism.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> ModuleMap {
        self.assert_endo();
        self.from_whitened_endo(linalg::herm_fn(&self.whitened(), f))
    }

    pub fn sqrt(&self, tol: f64) -> Result<ModuleMap> {
        self.assert_endo();
        let w = self.whitened();
        let scale = linalg::spec_norm(&w).max(1.0);
        let m = linalg::min_eig(&w);
        if m < -tol * scale || linalg::hermitian_residual(&w) > tol * scale {
            return Err(Error::NotPositive { min_eigenvalue: m });
        }
        Ok(self.psd_sqrt())
    }

    /// Square root of a positive endomorphism; eigenvalues at rounding level
    /// relative to the norm are treated as zero.
    pub fn psd_sqrt(&self) -> ModuleMap {
        let floor = 1e-14 * self.op_norm();
        self.apply_fn(|x| if x <= floor { 0.0 } else { x.sqrt() })
    }

    /// For an endomorphism of the free module `B`: the element `t(1)`, which
    /// acts by left multiplication when `t` is B-linear.
    pub fn to_element(&self) -> Element {
        let base = self.source.base().clone();
        let one = Element::unit(&base).coords();
        Element::from_coords(&base, &(&self.mat * one))
    }

    /// Kronecker product onto given product modules.
    pub fn kron(&self, other: &ModuleMap, source: &Arc<ModuleRep>, target: &Arc<ModuleRep>) -> Result<ModuleMap> {
        ModuleMap::new(source.clone(), target.clone(), self.mat.kronecker(&other.mat))
    }
}

/// `x` with `t(b) = x·b`; for unital `B` this is `t(1)`.
pub fn compact_rep(t: &ModuleMap) -> Result<Vector> {
    let base = t.source().base().clone();
    if t.source().dim() != base.dim() {
        return Err(Error::NoRepresentative);
    }
    Ok(t.apply(&Element::unit(&base).coords()))
}

/// Projection onto the commutant of the given unitary groups (whitened
/// coordinates), by averaging conjugations over each group in turn.
pub(crate) fn average_over_groups(y: &Mat, groups: &[Vec<Mat>]) -> Mat {
    let mut cur = y.clone();
    for g in groups {
        let mut acc = Mat::zeros(cur.nrows(), cur.ncols());
        for u in g {
            acc += u * &cur * u.adjoint();
        }
        cur = acc * real(1.0 / g.len() as f64);
    }
    cur
}

pub(crate) fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let g = Mat::from_fn(n, n, |_, _| crate::random::gaussian_c(rng));
    linalg::hermitian_part(&g)
}

/// A random unitary of `E` commuting with the right action of `B`.
pub fn random_b_linear_unitary<R: Rng>(e: &Arc<ModuleRep>, rng: &mut R) -> ModuleMap {
    let y = average_over_groups(&random_hermitian(rng, e.dim()), &e.whitened_right_groups());
    let w = linalg::herm_fn_complex(&y, |x| crate::linalg::C::from_polar(1.0, x));
    let m = e.h_inv_sqrt() * w * e.h_sqrt();
    ModuleMap::raw(e, e, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{self, substream};
    use proptest::prelude::*;

    fn random_module(seed: u64) -> Arc<ModuleRep> {
        let mut rng = substream(seed, "module");
        let base = AlgebraSpec::of(&[1, 2]);
        let free = ModuleRep::free(&base);
        // direct sum of two free copies, with a non-orthonormal basis
        let d = 2 * free.dim();
        let mut action = Vec::new();
        for b in 0..base.dim() {
            let mut m = Mat::zeros(d, d);
            m.view_mut((0, 0), (5, 5)).copy_from(free.action(b));
            m.view_mut((5, 5), (5, 5)).copy_from(free.action(b));
            action.push(m);
        }
        let e = ModuleRep::from_scalar_gram(base, action, Mat::identity(d, d)).unwrap();
        let g = Mat::from_fn(d, d, |_, _| random::gaussian_c(&mut rng));
        let u = Mat::identity(d, d) + g * real(0.3);
        Arc::new(e.conjugated(&u).unwrap())
    }

    #[test]
    fn free_module_inner_is_y_star_x() {
        let base = AlgebraSpec::of(&[2]);
        let f = ModuleRep::free(&base);
        let one = Element::unit(&base).coords();
        assert_eq!(f.inner(&one, &one).unwrap(), Element::unit(&base));
        let r = f.residuals();
        assert!(r.compatibility < 1e-14 && r.conjugate_symmetry < 1e-14);
        assert!(r.action_homomorphism < 1e-14 && r.positivity_min_eig > -1e-14);
    }

    #[test]
    fn identity_and_scaled_identity_norms() {
        let e = random_module(1);
        let id = ModuleMap::identity(&e);
        assert!((id.op_norm() - 1.0).abs() < 1e-12);
        assert!((id.scale(-3.0).op_norm() - 3.0).abs() < 1e-12);
        assert!(id.positive_part_check(1e-9));
        assert!(!id.scale(-1.0).positive_part_check(1e-9));
        let adj = id.adjoint_solve(1e-9).unwrap();
        assert!(adj.distance(&id) < 1e-12);
    }

    #[test]
    fn compact_rep_of_zero() {
        let base = AlgebraSpec::of(&[1, 1]);
        let f = Arc::new(ModuleRep::free(&base));
        let z = ModuleMap::zero(&f, &f);
        assert_eq!(compact_rep(&z).unwrap().norm(), 0.0);
    }

    #[test]
    fn non_b_linear_map_is_not_adjointable() {
        let base = AlgebraSpec::of(&[2]);
        let f = Arc::new(ModuleRep::free(&base));
        // left multiplication by nothing in particular: swap two coordinates
        let mut m = Mat::identity(4, 4);
        m.swap_columns(0, 1);
        let t = ModuleMap::new(f.clone(), f, m).unwrap();
        assert!(t.b_linearity_residual() > 0.5);
        assert!(matches!(t.adjoint_solve(1e-9), Err(Error::NotAdjointable { .. })));
    }

    #[test]
    fn tensor_with_rank_one_free_module() {
        let e = random_module(2);
        let one = ModuleRep::free(&AlgebraSpec::of(&[1]));
        let t = tensor_module(&e, &one);
        assert_eq!(t.dim(), e.dim());
        for i in 0..e.dim() {
            for j in 0..e.dim() {
                assert!((t.gram(i, j).block(0) - e.gram(i, j).block(0)).norm() < 1e-12);
            }
        }
        let e2 = ModuleRep::free(&AlgebraSpec::of(&[1, 1, 1]));
        let small = ModuleRep::free(&AlgebraSpec::of(&[1, 1]));
        assert_eq!(tensor_module(&small, &e2).dim(), 6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn module_axioms_and_cauchy_schwarz(seed in 0u64..1000) {
            let e = random_module(seed);
            let r = e.residuals();
            prop_assert!(r.compatibility < 1e-9 && r.conjugate_symmetry < 1e-9);
            prop_assert!(r.positivity_min_eig > -1e-9);
            let mut rng = substream(seed, "vectors");
            for _ in 0..10 {
                let x = random::gaussian_vector(&mut rng, e.dim());
                let y = random::gaussian_vector(&mut rng, e.dim());
                prop_assert!(e.inner(&x, &x).unwrap().is_positive(1e-9));
                let b = random::gaussian_element(&mut rng, e.base());
                let lhs = e.inner(&e.right_mul(&x, &b), &y).unwrap();
                let rhs = &e.inner(&x, &y).unwrap() * &b;
                prop_assert!(lhs.distance(&rhs) < 1e-9 * (1.0 + rhs.norm()));
                let xy = e.inner(&x, &y).unwrap().faithful_trace().norm_sqr();
                let xx = e.inner(&x, &x).unwrap().faithful_trace().re;
                let yy = e.inner(&y, &y).unwrap().faithful_trace().re;
                prop_assert!(xy <= xx * yy * (1.0 + 1e-9));
            }
        }

        #[test]
        fn adjoint_is_involution_and_norms_square(seed in 0u64..1000) {
            let e = random_module(seed);
            let mut rng = substream(seed, "map");
            let y = random_hermitian(&mut rng, e.dim());
            let g = average_over_groups(&(y.clone() + y * crate::linalg::c(0.0, 0.3)), &e.whitened_right_groups());
            let t = ModuleMap::raw(&e, &e, e.h_inv_sqrt() * g * e.h_sqrt());
            prop_assert!(t.b_linearity_residual() < 1e-9);
            let ts = t.adjoint_solve(1e-9).unwrap();
            let tss = ts.adjoint_solve(1e-9).unwrap();
            prop_assert!(tss.distance(&t) < 1e-10 * (1.0 + t.op_norm()));
            let n = t.op_norm();
            let tt = ts.then(&t);
            prop_assert!((tt.op_norm() - n * n).abs() < 1e-9 * (1.0 + n * n));
            prop_assert!(tt.positive_part_check(1e-9));
            let d = tt.sub(&ts.then(&t)).unwrap();
            prop_assert!(d.op_norm() < 1e-12);
        }

        #[test]
        fn compact_rep_reproduces_t_star_t(seed in 0u64..1000) {
            let base = AlgebraSpec::of(&[2, 1]);
            let f = Arc::new(ModuleRep::free(&base));
            let mut rng = substream(seed, "compact");
            let a = random::gaussian_element(&mut rng, &base);
            let t = ModuleMap::raw(&f, &f, a.left_mul_matrix());
            let x = compact_rep(&t).unwrap();
            let tt = t.adjoint().then(&t).to_element();
            prop_assert!(f.inner(&x, &x).unwrap().distance(&tt) <= 1e-10 * (1.0 + tt.norm()));
        }

        #[test]
        fn tensor_gram_is_positive(seed in 0u64..1000) {
            let e1 = random_module(seed);
            let e2 = ModuleRep::free(&AlgebraSpec::of(&[1, 1]));
            let t = tensor_module(&e1, &e2);
            prop_assert_eq!(t.dim(), e1.dim() * 2);
            prop_assert!(t.residuals().positivity_min_eig > -1e-9);
        }
    }
}
