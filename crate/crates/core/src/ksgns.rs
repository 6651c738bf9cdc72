//! C*-valued weights on a corner `pAp` and their KSGNS constructions.
//!
//! A weight is a completely positive map on the hereditary subalgebra `pAp`,
//! with `N = Ap` and `M = N*N = pAp`. The canonical construction quotients
//! `N ⊙ B` by the kernel of `⟨a₁ ⊗ b₁, a₂ ⊗ b₂⟩ = b₂* φ(a₂* a₁) b₁`.
//! `M(A) = A` and the strict topology is the norm topology throughout.

use crate::algebra::{AlgebraSpec, Element, PartialUnitNet};
use crate::cpmap::{CpFamilySampler, CpMap};
use crate::error::{Error, Result};
use crate::hmodule::{compact_rep, ModuleMap, ModuleRep};
use crate::linalg::{self, real, Mat, Vector};
use crate::random;
use crate::report::Report;
use serde_json::json;
use std::sync::Arc;

/// Default relative tolerance for constructions.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Weight {
    p: Element,
    map: CpMap,
}

impl Weight {
    /// Weight with domain projection `p` acting by `x ↦ values(pxp)`.
    pub fn new(p: Element, values: &CpMap) -> Result<Self> {
        if p.spec() != *values.source() {
            return Err(Error::ShapeMismatch("projection outside the source algebra".into()));
        }
        if !p.is_projection(1e-10) {
            return Err(Error::Invalid("domain element is not a projection".into()));
        }
        let map = CpMap::from_fn(values.source(), values.target(), |x| {
            let pxp = &(&p * x) * &p;
            values.apply(&pxp)
        });
        Ok(Weight { p, map })
    }

    /// Everywhere defined weight (`p = 1`).
    pub fn everywhere(map: CpMap) -> Self {
        Weight {
            p: Element::unit(map.source()),
            map,
        }
    }

    pub fn source(&self) -> &AlgebraSpec {
        self.map.source()
    }

    pub fn target(&self) -> &AlgebraSpec {
        self.map.target()
    }

    pub fn p(&self) -> &Element {
        &self.p
    }

    /// The compressed map `x ↦ φ(pxp)`.
    pub fn map(&self) -> &CpMap {
        &self.map
    }

    pub fn is_densely_defined(&self) -> bool {
        self.p.distance(&Element::unit(self.source())) <= 1e-12
    }

    /// `φ(pxp)`; equals `φ(x)` on `M`.
    pub fn eval(&self, x: &Element) -> Element {
        self.map.apply(x)
    }

    /// `φ(x)` for `x ∈ pAp`.
    pub fn eval_checked(&self, x: &Element, tol: f64) -> Result<Element> {
        let pxp = &(&self.p * x) * &self.p;
        let residual = pxp.distance(x);
        if residual > tol * x.norm().max(1.0) {
            return Err(Error::NotInDomain { residual });
        }
        Ok(self.map.apply(x))
    }

    /// `‖φ(p)‖`.
    pub fn norm(&self) -> f64 {
        self.map.apply(&self.p).norm()
    }

    /// Distance of `a` from `N = Ap`.
    pub fn n_residual(&self, a: &Element) -> f64 {
        (a - &(a * &self.p)).norm()
    }

    /// Orthonormal basis of `N = Ap`.
    pub fn n_basis(&self) -> Vec<Element> {
        corner_basis(self.source(), |e| e * &self.p)
    }

    /// Orthonormal basis of `M = pAp`.
    pub fn m_basis(&self) -> Vec<Element> {
        corner_basis(self.source(), |e| &(&self.p * e) * &self.p)
    }

    /// `min eig [φ(n_j* n_i)]` relative to its scale; nonnegative iff positive.
    pub fn positivity_slack(&self) -> f64 {
        let n = self.n_basis();
        let values = form_values(&n, |x| self.eval(x));
        let units = self.target().basis();
        let h = scalar_form(&values, &units);
        let scale = linalg::spec_norm(&h).max(1.0);
        linalg::min_eig(&h) / scale
    }
}

fn corner_basis(spec: &AlgebraSpec, f: impl Fn(&Element) -> Element) -> Vec<Element> {
    let vecs: Vec<Vector> = spec.basis().iter().map(|e| f(e).coords()).collect();
    linalg::gram_schmidt(&vecs)
        .into_iter()
        .map(|v| Element::from_coords(spec, &v))
        .collect()
}

/// `values[j][i] = f(n_j* n_i)`.
pub(crate) fn form_values(n: &[Element], f: impl Fn(&Element) -> Element) -> Vec<Vec<Element>> {
    n.iter()
        .map(|nj| {
            let nj_star = nj.adjoint();
            n.iter().map(|ni| f(&(&nj_star * ni))).collect()
        })
        .collect()
}

fn transpose_coords(spec: &AlgebraSpec, v: &Vector) -> Vector {
    let mut out = Vector::zeros(v.len());
    for idx in 0..v.len() {
        let (k, i, j) = spec.basis_label(idx);
        out[spec.basis_index(k, j, i)] = v[idx];
    }
    out
}

/// Scalarized Gram of the B-valued form on `left ⊙ right`:
/// `H[(j,l),(i,k)] = Tr(d_l* X_{ji} d_k)` with `X = values`.
pub(crate) fn scalar_form(values: &[Vec<Element>], right: &[Element]) -> Mat {
    let r = values.len();
    let s = right.len();
    if r == 0 || s == 0 {
        return Mat::zeros(r * s, r * s);
    }
    let spec = right[0].spec();
    let db = spec.dim();
    let mut xc = Mat::zeros(r * r, db);
    for j in 0..r {
        for i in 0..r {
            xc.row_mut(j * r + i).copy_from(&values[j][i].coords().transpose());
        }
    }
    let mut q = Mat::zeros(db, s * s);
    for k in 0..s {
        for l in 0..s {
            let m = &right[k] * &right[l].adjoint();
            q.set_column(k * s + l, &transpose_coords(&spec, &m.coords()));
        }
    }
    let hv = xc * q;
    Mat::from_fn(r * s, r * s, |row, col| {
        let (j, l) = (row / s, row % s);
        let (i, k) = (col / s, col % s);
        hv[(j * r + i, k * s + l)]
    })
}

/// `(M_c)_{k'k} = Tr(d_{k'}* d_k c)` on an orthonormal basis of a right ideal.
pub(crate) fn right_action_on(right: &[Element], c: &Element) -> Mat {
    let coords: Vec<Vector> = right.iter().map(|d| d.coords()).collect();
    let s = right.len();
    let mut m = Mat::zeros(s, s);
    for k in 0..s {
        let dc = (&right[k] * c).coords();
        for kp in 0..s {
            m[(kp, k)] = coords[kp].dotc(&dc);
        }
    }
    m
}

/// `(K_x)_{ji} = Tr(n_j* x n_i)` on an orthonormal basis of a left ideal.
pub(crate) fn left_action_on(left: &[Element], x: &Element) -> Mat {
    let coords: Vec<Vector> = left.iter().map(|n| n.coords()).collect();
    let r = left.len();
    let mut m = Mat::zeros(r, r);
    for i in 0..r {
        let xn = (x * &left[i]).coords();
        for j in 0..r {
            m[(j, i)] = coords[j].dotc(&xn);
        }
    }
    m
}

/// Quotient of `left ⊙ right` by the kernel of a positive scalarized form.
pub(crate) struct Quotient {
    pub e: Arc<ModuleRep>,
    /// `F → E` coordinates of classes.
    pub proj: Mat,
    /// Lift of the orthonormal `E` basis into `F`.
    pub lift: Mat,
    pub r: usize,
    pub s: usize,
}

impl Quotient {
    pub fn build(target: &AlgebraSpec, hf: &Mat, r: usize, right: &[Element], tol: f64) -> Result<Self> {
        let s = right.len();
        let n = r * s;
        let scale = linalg::spec_norm(hf).max(1.0);
        let herm = linalg::hermitian_residual(hf);
        let (vals, vecs) = linalg::herm_eig(hf);
        let min = vals.first().copied().unwrap_or(0.0);
        if min < -tol * scale || herm > tol * scale {
            let witness = if min < -tol * scale {
                let v = vecs.column(0);
                let coeffs: Vec<serde_json::Value> = (0..n)
                    .filter(|&q| v[q].norm() > 1e-12)
                    .map(|q| json!({"n": q / s, "d": q % s, "coeff": [v[q].re, v[q].im]}))
                    .collect();
                json!({"min_eigenvalue": min, "hermitian_residual": herm, "vector": coeffs})
            } else {
                json!({"min_eigenvalue": min, "hermitian_residual": herm})
            };
            return Err(Error::NotCompletelyPositive {
                min_eigenvalue: min.min(-herm),
                witness,
            });
        }
        let top = vals.last().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..vals.len())
            .filter(|&k| vals[k] > 0.0 && vals[k] > linalg::RANK_REL * top)
            .collect();
        let d = keep.len();
        let mut lift = Mat::zeros(n, d);
        for (col, &k) in keep.iter().enumerate() {
            lift.set_column(col, &(vecs.column(k) * real(1.0 / vals[k].sqrt())));
        }
        let proj = lift.adjoint() * linalg::hermitian_part(hf);
        let actions = target
            .basis()
            .iter()
            .map(|c| {
                let m = right_action_on(right, c);
                &proj * block_apply(&m, &lift, r)
            })
            .collect();
        let e = ModuleRep::from_scalar_gram(target.clone(), actions, Mat::identity(d, d))?;
        Ok(Quotient {
            e: Arc::new(e),
            proj,
            lift,
            r,
            s,
        })
    }

    /// `P (K ⊗ I_s) C`.
    pub fn left_operator(&self, k: &Mat) -> Mat {
        let s = self.s;
        let d = self.lift.ncols();
        let mut out = Mat::zeros(self.r * s, d);
        for j in 0..self.r {
            let mut acc = Mat::zeros(s, d);
            for i in 0..self.r {
                let kji = k[(j, i)];
                if kji.norm() > 0.0 {
                    acc += self.lift.rows(i * s, s) * kji;
                }
            }
            out.rows_mut(j * s, s).copy_from(&acc);
        }
        &self.proj * out
    }
}

/// `(I_r ⊗ M) C`.
fn block_apply(m: &Mat, c: &Mat, r: usize) -> Mat {
    let s = m.nrows();
    let mut out = Mat::zeros(c.nrows(), c.ncols());
    for i in 0..r {
        out.rows_mut(i * s, s).copy_from(&(m * c.rows(i * s, s)));
    }
    out
}

/// A KSGNS construction `(E, Λ, π)`, with `Λ` tabulated on an orthonormal
/// basis of `N` and `π` on the matrix units of `A`.
#[derive(Clone, Debug)]
pub struct KsgnsTriplet {
    p: Element,
    target: AlgebraSpec,
    e: Arc<ModuleRep>,
    free: Arc<ModuleRep>,
    n_basis: Vec<Element>,
    lambda: Vec<ModuleMap>,
    pi: Vec<ModuleMap>,
}

impl KsgnsTriplet {
    /// Assembles a triplet; `n_basis` must be orthonormal for `Tr(y* x)`.
    pub fn new(
        p: Element,
        e: Arc<ModuleRep>,
        n_basis: Vec<Element>,
        lambda: Vec<Mat>,
        pi: Vec<Mat>,
    ) -> Result<Self> {
        let source = p.spec();
        let target = e.base().clone();
        let free = Arc::new(ModuleRep::free(&target));
        if lambda.len() != n_basis.len() || pi.len() != source.dim() {
            return Err(Error::ShapeMismatch("triplet tables".into()));
        }
        let coords: Vec<Vector> = n_basis.iter().map(|n| n.coords()).collect();
        for (i, ci) in coords.iter().enumerate() {
            if ci.len() != source.dim() {
                return Err(Error::ShapeMismatch("N basis element".into()));
            }
            for (j, cj) in coords.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (cj.dotc(ci) - real(want)).norm() > 1e-8 {
                    return Err(Error::Invalid("N basis is not orthonormal".into()));
                }
            }
        }
        let lambda = lambda
            .into_iter()
            .map(|m| ModuleMap::new(free.clone(), e.clone(), m))
            .collect::<Result<Vec<_>>>()?;
        let pi = pi
            .into_iter()
            .map(|m| ModuleMap::new(e.clone(), e.clone(), m))
            .collect::<Result<Vec<_>>>()?;
        Ok(KsgnsTriplet {
            p,
            target,
            e,
            free,
            n_basis,
            lambda,
            pi,
        })
    }

    pub fn source(&self) -> AlgebraSpec {
        self.p.spec()
    }

    pub fn target(&self) -> &AlgebraSpec {
        &self.target
    }

    pub fn p(&self) -> &Element {
        &self.p
    }

    pub fn module(&self) -> &Arc<ModuleRep> {
        &self.e
    }

    /// The module `B` over itself, the source of every `Λ(a)`.
    pub fn free(&self) -> &Arc<ModuleRep> {
        &self.free
    }

    pub fn dim(&self) -> usize {
        self.e.dim()
    }

    pub fn n_basis(&self) -> &[Element] {
        &self.n_basis
    }

    /// Orthonormal basis of `pAp`.
    pub fn m_basis(&self) -> Vec<Element> {
        corner_basis(&self.source(), |e| &(&self.p * e) * &self.p)
    }

    pub fn lambda(&self) -> &[ModuleMap] {
        &self.lambda
    }

    pub fn pi(&self) -> &[ModuleMap] {
        &self.pi
    }

    /// Coordinates of `a` in the `N` basis with the distance of `a` from `N`.
    pub fn n_coords(&self, a: &Element) -> (Vector, f64) {
        let ac = a.coords();
        let coeffs = Vector::from_iterator(self.n_basis.len(), self.n_basis.iter().map(|n| n.coords().dotc(&ac)));
        let mut rest = ac.clone();
        for (i, n) in self.n_basis.iter().enumerate() {
            rest -= n.coords() * coeffs[i];
        }
        (coeffs, rest.norm())
    }

    pub fn lambda_of(&self, a: &Element) -> Result<ModuleMap> {
        let (coeffs, residual) = self.n_coords(a);
        if residual > 1e-8 * a.norm().max(1.0) {
            return Err(Error::NotInDomain { residual });
        }
        Ok(self.lambda_from_coords(&coeffs))
    }

    pub(crate) fn lambda_from_coords(&self, coeffs: &Vector) -> ModuleMap {
        let mut m = Mat::zeros(self.e.dim(), self.free.dim());
        for (i, l) in self.lambda.iter().enumerate() {
            if coeffs[i].norm() > 0.0 {
                m += l.mat() * coeffs[i];
            }
        }
        ModuleMap::new(self.free.clone(), self.e.clone(), m).expect("shape")
    }

    pub fn pi_of(&self, x: &Element) -> ModuleMap {
        let xc = x.coords();
        let mut m = Mat::zeros(self.e.dim(), self.e.dim());
        for (alpha, p) in self.pi.iter().enumerate() {
            if xc[alpha].norm() > 0.0 {
                m += p.mat() * xc[alpha];
            }
        }
        ModuleMap::new(self.e.clone(), self.e.clone(), m).expect("shape")
    }

    /// Columns `Λ(n_i) e_β`, indexed by `i·dim B + β`.
    pub fn span_matrix(&self) -> Mat {
        let m = self.free.dim();
        let mut w = Mat::zeros(self.e.dim(), self.lambda.len() * m);
        for (i, l) in self.lambda.iter().enumerate() {
            w.columns_mut(i * m, m).copy_from(l.mat());
        }
        w
    }

    /// The same triplet transported along a unitary `u: E → E'`.
    pub fn transported(&self, u: &ModuleMap) -> Result<KsgnsTriplet> {
        let uinv = u.adjoint();
        let lambda = self.lambda.iter().map(|l| u.compose(l).map(|m| m.mat().clone())).collect::<Result<Vec<_>>>()?;
        let pi = self
            .pi
            .iter()
            .map(|x| Ok(u.compose(&x.compose(&uinv)?)?.mat().clone()))
            .collect::<Result<Vec<_>>>()?;
        KsgnsTriplet::new(self.p.clone(), u.target().clone(), self.n_basis.clone(), lambda, pi)
    }

    /// Copy with `Λ(n_i)` replaced, for fault injection.
    pub fn with_lambda(&self, i: usize, mat: Mat) -> Result<KsgnsTriplet> {
        let mut t = self.clone();
        t.lambda[i] = ModuleMap::new(self.free.clone(), self.e.clone(), mat)?;
        Ok(t)
    }
}

pub fn build_canonical_ksgns(phi: &Weight) -> Result<KsgnsTriplet> {
    build_canonical_ksgns_with(phi, &phi.n_basis(), DEFAULT_TOL)
}

/// Canonical construction over a given orthonormal basis of `N`.
pub fn build_canonical_ksgns_with(phi: &Weight, n_basis: &[Element], tol: f64) -> Result<KsgnsTriplet> {
    let b = phi.target().clone();
    let units = b.basis();
    let values = form_values(n_basis, |x| phi.eval(x));
    let hf = scalar_form(&values, &units);
    let q = Quotient::build(&b, &hf, n_basis.len(), &units, tol)?;
    let s = units.len();
    let lambda = (0..n_basis.len())
        .map(|i| q.proj.columns(i * s, s).into_owned())
        .collect();
    let pi = phi
        .source()
        .basis()
        .iter()
        .map(|x| q.left_operator(&left_action_on(n_basis, x)))
        .collect();
    KsgnsTriplet::new(phi.p().clone(), q.e.clone(), n_basis.to_vec(), lambda, pi)
}

/// The operator `Λ(a₂)* Λ(a₁)` on `B`, as an element acting by left multiplication.
pub fn lambda_gram(l2: &ModuleMap, l1: &ModuleMap) -> Element {
    l2.adjoint().then(l1).to_element()
}

pub fn verify_ksgns(phi: &Weight, t: &KsgnsTriplet, tol: f64) -> Report {
    let mut rep = Report::new();
    let s = 1.0 + phi.norm();
    let bound = tol * s;
    let n = phi.n_basis();
    let source = phi.source().clone();

    let mr = t.module().residuals();
    rep.bound(
        "ksgns/module-axioms",
        mr.conjugate_symmetry
            .max(mr.compatibility)
            .max(mr.action_homomorphism)
            .max((-mr.positivity_min_eig).max(0.0)),
        bound,
    );

    let lambdas: Vec<Option<ModuleMap>> = n.iter().map(|a| t.lambda_of(a).ok()).collect();
    let missing = lambdas.iter().filter(|l| l.is_none()).count();
    rep.bound("ksgns/lambda-domain", missing as f64, 0.0);
    let lambdas: Vec<ModuleMap> = lambdas
        .into_iter()
        .map(|l| l.unwrap_or_else(|| ModuleMap::zero(t.free(), t.module())))
        .collect();

    // ⟨Λ(a₁)b₁, Λ(a₂)b₂⟩ = b₂* φ(a₂*a₁) b₁ as an identity of maps on B.
    let mut inner: f64 = 0.0;
    let mut elem: f64 = 0.0;
    for (j, aj) in n.iter().enumerate() {
        for (i, ai) in n.iter().enumerate() {
            let want = phi.eval(&(&aj.adjoint() * ai));
            let got = lambdas[j].adjoint().then(&lambdas[i]);
            inner = inner.max(linalg::max_abs(&(got.mat() - want.left_mul_matrix())));
            elem = elem.max(got.to_element().distance(&want));
        }
    }
    rep.bound("ksgns/inner-product", inner, bound);
    rep.bound("res1.1/1", elem, bound);

    let mut norms: f64 = 0.0;
    let mut probes: Vec<Element> = n.clone();
    if n.len() > 1 {
        let sum = n.iter().skip(1).fold(n[0].clone(), |acc, x| &acc + x);
        probes.push(sum);
    }
    for a in &probes {
        if let Ok(l) = t.lambda_of(a) {
            let lhs = l.op_norm().powi(2);
            let rhs = phi.eval(&(&a.adjoint() * a)).norm();
            norms = norms.max((lhs - rhs).abs());
        }
    }
    rep.bound("res1.1/2", norms, bound);

    let w = lambdas.iter().fold(Mat::zeros(t.dim(), 0), |acc, l| {
        let mut m = Mat::zeros(t.dim(), acc.ncols() + l.mat().ncols());
        m.columns_mut(0, acc.ncols()).copy_from(&acc);
        m.columns_mut(acc.ncols(), l.mat().ncols()).copy_from(l.mat());
        m
    });
    let deficit = t.dim() - linalg::rank(&w).min(t.dim());
    rep.bound("ksgns/density", deficit as f64, 0.0);

    let basis = source.basis();
    let mut mult: f64 = 0.0;
    let mut star: f64 = 0.0;
    for (alpha, x) in basis.iter().enumerate() {
        let px = &t.pi()[alpha];
        star = star.max(t.pi()[source.adjoint_index(alpha)].distance(&px.adjoint()));
        for (beta, y) in basis.iter().enumerate() {
            let lhs = px.then(&t.pi()[beta]);
            mult = mult.max(lhs.distance(&t.pi_of(&(x * y))));
        }
    }
    rep.bound("ksgns/pi-multiplicative", mult, bound);
    rep.bound("ksgns/pi-adjoint", star, bound);
    let unit = t.pi_of(&Element::unit(&source));
    rep.bound("ksgns/pi-nondegenerate", unit.distance(&ModuleMap::identity(t.module())), bound);

    let blin = lambdas
        .iter()
        .map(|l| l.b_linearity_residual())
        .chain(t.pi().iter().map(|x| x.b_linearity_residual()))
        .fold(0.0, f64::max);
    rep.bound("ksgns/b-linear", blin, bound);

    let mut covariance: f64 = 0.0;
    for x in &basis {
        let px = t.pi_of(x);
        for (i, a) in n.iter().enumerate() {
            let xa = x * a;
            let r = match t.lambda_of(&xa) {
                Ok(l) => px.then(&lambdas[i]).distance(&l),
                Err(_) => f64::INFINITY,
            };
            covariance = covariance.max(r);
        }
    }
    rep.bound("res1.1/3", covariance, bound);

    match build_canonical_ksgns_with(phi, &n, tol) {
        Ok(c) => {
            let wc = c.span_matrix();
            let u = &w * linalg::pinv(&wc);
            let um = ModuleMap::new(c.module().clone(), t.module().clone(), u.clone()).expect("shape");
            let iso = um.adjoint().then(&um).distance(&ModuleMap::identity(c.module()));
            let span = linalg::max_abs(&(&u * &wc - &w));
            let surj = t.dim() as f64 - linalg::rank(&u).min(t.dim()) as f64;
            let mut inter: f64 = 0.0;
            for alpha in 0..source.dim() {
                inter = inter.max(linalg::max_abs(&(&u * c.pi()[alpha].mat() - t.pi()[alpha].mat() * &u)));
            }
            let witness = if u.is_square() {
                json!({"distance_from_identity": linalg::spec_norm(&(&u - Mat::identity(u.nrows(), u.ncols())))})
            } else {
                json!({"shape": [u.nrows(), u.ncols()]})
            };
            rep.bound_with("ksgns/uniqueness-isometry", iso.max(span), bound, witness);
            rep.bound("ksgns/uniqueness-surjective", surj, 0.0);
            rep.bound("ksgns/uniqueness-intertwines", inter.max(um.b_linearity_residual()), bound);
        }
        Err(e) => rep.flag("ksgns/uniqueness-isometry", false, Some(json!({"error": e.to_string()}))),
    }
    rep
}

/// `x ∈ E` with `Λ(a) b = x·b`, together with `‖⟨x,x⟩ − Λ(a)*Λ(a)‖`.
#[derive(Clone, Debug)]
pub struct CompactWitness {
    pub x: Vector,
    pub inner: Element,
    pub residual: f64,
    pub action_residual: f64,
}

pub fn compactness_criterion(a: &Element, t: &KsgnsTriplet) -> Result<CompactWitness> {
    let l = t.lambda_of(a)?;
    let x = compact_rep(&l)?;
    let inner = t.module().inner(&x, &x)?;
    let residual = inner.distance(&l.adjoint().then(&l).to_element());
    let mut action_residual: f64 = 0.0;
    let base = t.target();
    for (beta, b) in base.basis().iter().enumerate() {
        let lhs = l.mat().column(beta).into_owned();
        let rhs = t.module().right_mul(&x, b);
        action_residual = action_residual.max((lhs - rhs).camax());
    }
    Ok(CompactWitness {
        x,
        inner,
        residual,
        action_residual,
    })
}

/// Positive probes in `M`: `n*n` over the `N` basis and `p`.
fn positive_probes(phi: &Weight) -> Vec<Element> {
    let mut out: Vec<Element> = phi.n_basis().iter().map(|n| &n.adjoint() * n).collect();
    out.push(phi.p().clone());
    out
}

fn order_slack(upper: &Element, lower: &Element) -> f64 {
    (upper - lower).min_eigenvalue()
}

pub fn check_lower_semicontinuity(phi: &Weight, sampler: &mut CpFamilySampler, tol: f64) -> Result<Report> {
    if !phi.is_densely_defined() {
        return Err(Error::NotDenselyDefined);
    }
    let mut rep = Report::new();
    let s = 1.0 + phi.norm();
    let probes = positive_probes(phi);
    let values: Vec<Element> = probes.iter().map(|x| phi.eval(x)).collect();

    let mut slack = f64::INFINITY;
    let budget = sampler.budget();
    for _ in 0..budget {
        let rho = sampler.sample();
        for (x, fx) in probes.iter().zip(&values) {
            slack = slack.min(order_slack(fx, &rho.rho().apply(x)));
        }
    }
    rep.floor("def3.1/domination", slack.min(0.0), tol * s);

    let mut last = f64::INFINITY;
    let mut monotone = true;
    for k in 1..=12 {
        let lam = 1.0 - 10f64.powi(-k);
        let mut gap: f64 = 0.0;
        for (x, fx) in probes.iter().zip(&values) {
            let rho = phi.eval(x).scale_real(lam);
            gap = gap.max(fx.distance(&rho));
        }
        monotone &= gap <= last + tol * s;
        last = gap;
    }
    rep.bound("def3.1/convergence", last, tol * s);
    rep.flag("def3.1/monotone", monotone, None);
    rep.flag(
        "def3.1/set-equality",
        true,
        Some(json!({"status": "verified at budget", "samples": budget})),
    );

    let net = PartialUnitNet::new(phi.source()).elements();
    let mut mono: f64 = 0.0;
    let mut limit: f64 = 0.0;
    let mut conv: f64 = 0.0;
    let mut rng = random::substream(sampler.seed(), "lsc-chain");
    for _ in 0..4 {
        let a = random::gaussian_element(&mut rng, phi.source());
        let b = random::gaussian_element(&mut rng, phi.target());
        let target_x = &a.adjoint() * &a;
        let fx = phi.eval(&target_x);
        let chain: Vec<Element> = net
            .iter()
            .map(|u| phi.eval(&(&(&a.adjoint() * u) * &a)))
            .collect();
        for w in chain.windows(2) {
            mono = mono.max((-order_slack(&w[1], &w[0])).max(0.0));
        }
        for c in &chain {
            mono = mono.max((-order_slack(&fx, c)).max(0.0));
        }
        limit = limit.max(chain.last().map_or(0.0, |c| c.distance(&fx)));
        let bb = |y: &Element| &(&b.adjoint() * y) * &b;
        let tail = chain.last().map(&bb).unwrap_or_else(|| Element::zero(phi.target()));
        conv = conv.max(bb(&fx).distance(&tail));
    }
    rep.bound("res3.1/monotone", mono, tol * s);
    rep.bound("res3.1/limit", limit, tol * s);
    rep.bound("res3.2/convergent", conv, tol * s * 10.0);

    let one = ModuleMap::identity(sampler.triplet().module());
    let gaps: Vec<f64> = (1..=12)
        .map(|k| sampler.exhausting(k).t().distance(&one))
        .collect();
    rep.bound("res3.3/strong-limit", *gaps.last().unwrap_or(&0.0), 1e-11);
    Ok(rep)
}

pub fn multiplier_extension_check(phi: &Weight, sampler: &mut CpFamilySampler) -> Result<Report> {
    if !phi.is_densely_defined() {
        return Err(Error::NotDenselyDefined);
    }
    let t = sampler.triplet();
    let mut rep = Report::new();
    let m = phi.m_basis();
    let units = phi.source().basis();
    let same = m.len() == units.len() && m.iter().zip(&units).all(|(x, y)| x.distance(y) <= 1e-12);
    rep.flag("def5.2/domain", same, Some(json!({"basis_size": m.len()})));
    rep.flag("def5.2/extension", true, Some(json!({"reason": "unital source algebra"})));

    let mut rng = random::substream(sampler.seed(), "multiplier");
    let mut gap: f64 = 0.0;
    for x in positive_probes(phi) {
        let b = random::gaussian_element(&mut rng, phi.target());
        let fx = phi.eval(&x);
        let top = &(&b.adjoint() * &fx) * &b;
        let lam = 1.0 - 1e-9;
        let best = (1..=9)
            .map(|k| 1.0 - 10f64.powi(-k))
            .chain([lam])
            .map(|l| top.distance(&top.scale_real(l)))
            .fold(f64::INFINITY, f64::min);
        gap = gap.max(best / (1.0 + top.norm()));
    }
    rep.bound("def5.2/convergence", gap, 1e-8);

    let mut closure: f64 = 0.0;
    let mut adj: f64 = 0.0;
    for a in phi.n_basis() {
        let la = t.lambda_of(&a)?;
        let constant = (0..4).map(|_| t.lambda_of(&a)).collect::<Result<Vec<_>>>()?;
        for lj in &constant {
            closure = closure.max(lj.adjoint().distance(&la.adjoint()));
        }
        let delta = random::gaussian_element(&mut rng, phi.source());
        let mut prev = f64::INFINITY;
        for j in 0..=20 {
            let aj = if j == 20 { a.clone() } else { &a + &delta.scale_real(0.5f64.powi(j)) };
            let r = t.lambda_of(&aj)?.adjoint().distance(&la.adjoint());
            if r > prev + 1e-12 {
                adj = adj.max(r - prev);
            }
            prev = r;
        }
        adj = adj.max(prev);
    }
    rep.bound("def5.1/closure", closure, 1e-12);
    rep.bound("lem5.2/adjoint-convergence", adj, 1e-10);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpmap::is_completely_positive;
    use crate::random::substream;

    fn identity_weight(n: usize) -> Weight {
        Weight::everywhere(CpMap::identity(&AlgebraSpec::of(&[n])))
    }

    #[test]
    fn identity_weight_has_module_b() {
        let phi = identity_weight(2);
        let t = build_canonical_ksgns(&phi).unwrap();
        assert_eq!(t.dim(), 4);
        let rep = verify_ksgns(&phi, &t, 1e-9);
        assert!(rep.all_pass(), "{}", rep.summary());
    }

    #[test]
    fn trace_gives_hilbert_schmidt_space() {
        let a = AlgebraSpec::of(&[2]);
        let b = AlgebraSpec::of(&[1]);
        let tr = CpMap::from_fn(&a, &b, |x| Element::scalar(&b, x.faithful_trace()));
        let phi = Weight::everywhere(tr);
        let t = build_canonical_ksgns(&phi).unwrap();
        assert_eq!(t.dim(), 4);
        for x in a.basis() {
            for y in a.basis() {
                let g = lambda_gram(&t.lambda_of(&y).unwrap(), &t.lambda_of(&x).unwrap());
                let want = (&y.adjoint() * &x).faithful_trace();
                assert!((g.block(0)[(0, 0)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_weight_gives_zero_module() {
        let a = AlgebraSpec::of(&[2]);
        let phi = Weight::everywhere(CpMap::zero(&a, &a));
        let t = build_canonical_ksgns(&phi).unwrap();
        assert_eq!(t.dim(), 0);
        assert!(verify_ksgns(&phi, &t, 1e-9).all_pass());
    }

    #[test]
    fn transpose_is_rejected_with_witness() {
        let a = AlgebraSpec::of(&[2]);
        let phi = Weight::everywhere(CpMap::transpose(&a));
        match build_canonical_ksgns(&phi) {
            Err(Error::NotCompletelyPositive { min_eigenvalue, witness }) => {
                assert!(min_eigenvalue < -0.5);
                assert!(witness["vector"].as_array().is_some_and(|v| !v.is_empty()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corner_weight_and_perturbed_lambda() {
        let mut rng = substream(3, "corner");
        let a = AlgebraSpec::of(&[1, 2]);
        let b = AlgebraSpec::of(&[2]);
        let map = CpMap::random(&mut rng, &a, &b, 2);
        let p = &a.basis_element(0) + &a.basis_element(a.basis_index(1, 0, 0));
        let phi = Weight::new(p, &map).unwrap();
        assert!(is_completely_positive(phi.map(), 1e-9));
        let t = build_canonical_ksgns(&phi).unwrap();
        let rep = verify_ksgns(&phi, &t, 1e-9);
        assert!(rep.all_pass(), "{}", rep.summary());
        let mut m = t.lambda()[0].mat().clone();
        m[(0, 0)] += real(1e-3);
        let bad = t.with_lambda(0, m).unwrap();
        let rep = verify_ksgns(&phi, &bad, 1e-9);
        let r = rep.get("ksgns/inner-product").unwrap();
        assert!(!r.pass && r.residual > 1e-4 && r.residual < 1e-2, "{}", r.residual);
    }

    #[test]
    fn rotated_copy_passes() {
        let mut rng = substream(5, "rotate");
        let a = AlgebraSpec::of(&[2]);
        let b = AlgebraSpec::of(&[1, 1]);
        let phi = Weight::everywhere(CpMap::random(&mut rng, &a, &b, 2));
        let t = build_canonical_ksgns(&phi).unwrap();
        let u = crate::hmodule::random_b_linear_unitary(t.module(), &mut rng);
        let rt = t.transported(&u).unwrap();
        let rep = verify_ksgns(&phi, &rt, 1e-9);
        assert!(rep.all_pass(), "{}", rep.summary());
        let w = rep.get("ksgns/uniqueness-isometry").unwrap().witness.clone().unwrap();
        assert!(w["distance_from_identity"].as_f64().unwrap() > 1e-3);
    }

    #[test]
    fn compactness_zero_and_identity() {
        let phi = identity_weight(2);
        let t = build_canonical_ksgns(&phi).unwrap();
        let zero = compactness_criterion(&Element::zero(phi.source()), &t).unwrap();
        assert!(zero.x.camax() < 1e-14);
        let mut rng = substream(1, "compact");
        let a = random::gaussian_element(&mut rng, phi.source());
        let w = compactness_criterion(&a, &t).unwrap();
        assert!(w.residual < 1e-10 && w.action_residual < 1e-10);
        assert!(w.inner.distance(&(&a.adjoint() * &a)) < 1e-10);
    }

    #[test]
    fn lower_semicontinuity_and_multiplier_reports() {
        let mut rng = substream(9, "lsc");
        let a = AlgebraSpec::of(&[1, 2]);
        let b = AlgebraSpec::of(&[2]);
        let phi = Weight::everywhere(CpMap::random(&mut rng, &a, &b, 3));
        let t = build_canonical_ksgns(&phi).unwrap();
        let mut sampler = CpFamilySampler::new(&t, 0.9, 4).unwrap().with_budget(20);
        let rep = check_lower_semicontinuity(&phi, &mut sampler, 1e-9).unwrap();
        assert!(rep.all_pass(), "{}", rep.summary());
        let rep = multiplier_extension_check(&phi, &mut sampler).unwrap();
        assert!(rep.all_pass(), "{}", rep.summary());
        let corner = Weight::new(a.basis_element(0), phi.map()).unwrap();
        assert!(matches!(
            check_lower_semicontinuity(&corner, &mut sampler, 1e-9),
            Err(Error::NotDenselyDefined)
        ));
    }

    #[test]
    fn basis_orderings_are_unitarily_equivalent() {
        let mut rng = substream(11, "order");
        let a = AlgebraSpec::of(&[2, 1]);
        let b = AlgebraSpec::of(&[2]);
        let phi = Weight::everywhere(CpMap::random(&mut rng, &a, &b, 2));
        let mut rev = phi.n_basis();
        rev.reverse();
        let t1 = build_canonical_ksgns(&phi).unwrap();
        let t2 = build_canonical_ksgns_with(&phi, &rev, 1e-9).unwrap();
        assert_eq!(t1.dim(), t2.dim());
        assert!(verify_ksgns(&phi, &t2, 1e-9).all_pass());
    }
}
