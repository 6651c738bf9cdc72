//! Weights built from seed data, truncating nets, and the module `M(A) ⊗̇ D`.
//!
//! Nets are finite sequences (or product grids) whose last element is the
//! unit; convergence clauses become exact attainment at the last index plus
//! monotone residuals along the order.

use crate::algebra::{AlgebraSpec, Element, PartialUnitNet};
use crate::cpmap::{CpFamilySampler, CpMap, DominatedMap};
use crate::error::{Error, Result};
use crate::hmodule::{ModuleMap, ModuleRep};
use crate::ksgns::{
    build_canonical_ksgns, form_values, left_action_on, scalar_form, verify_ksgns, KsgnsTriplet, Quotient,
    Weight,
};
use crate::linalg::{self, Mat, Vector};
use crate::report::Report;
use serde_json::json;
use std::sync::Arc;

/// Subspace membership tolerance for structural checks on the seed.
const STRUCT_TOL: f64 = 1e-8;

/// `N₀`, `Λ₀` on `N₀`, and the family `(T_i, ρ_i)` with the last `T` equal to 1.
#[derive(Clone, Debug)]
pub struct SeedData {
    pub a: AlgebraSpec,
    pub b: AlgebraSpec,
    pub e: Arc<ModuleRep>,
    pub n0: Vec<Element>,
    /// `Λ₀(a_k)` as `dim E × dim B` matrices.
    pub lambda0: Vec<Mat>,
    pub family: Vec<(ModuleMap, CpMap)>,
}

impl SeedData {
    pub fn new(
        e: Arc<ModuleRep>,
        a: AlgebraSpec,
        n0: Vec<Element>,
        lambda0: Vec<Mat>,
        family: Vec<(ModuleMap, CpMap)>,
    ) -> Result<Self> {
        let b = e.base().clone();
        if n0.len() != lambda0.len() {
            return Err(Error::ShapeMismatch("N0 and Lambda0 differ in length".into()));
        }
        if n0.iter().any(|x| x.spec() != a) {
            return Err(Error::ShapeMismatch("N0 element outside A".into()));
        }
        if lambda0.iter().any(|m| m.shape() != (e.dim(), b.dim())) {
            return Err(Error::ShapeMismatch("Lambda0 entry".into()));
        }
        if family.is_empty() {
            return Err(Error::Invalid("empty operator family".into()));
        }
        for (t, rho) in &family {
            if t.source().dim() != e.dim() || t.target().dim() != e.dim() {
                return Err(Error::ShapeMismatch("family operator".into()));
            }
            if *rho.source() != a || *rho.target() != b {
                return Err(Error::ShapeMismatch("family map".into()));
            }
        }
        Ok(SeedData {
            a,
            b,
            e,
            n0,
            lambda0,
            family,
        })
    }

    /// Seed read off a triplet of `φ` with the family `(λ·1, λφ)`.
    pub fn from_triplet(phi: &Weight, t: &KsgnsTriplet, scales: &[f64]) -> Result<Self> {
        let e = t.module().clone();
        let family = scales
            .iter()
            .map(|&l| (ModuleMap::identity(&e).scale(l), phi.map().scale(l)))
            .collect();
        Self::new(
            e,
            phi.source().clone(),
            t.n_basis().to_vec(),
            t.lambda().iter().map(|l| l.mat().clone()).collect(),
            family,
        )
    }

    /// Seed whose family is the `(T_i, ρ_i)` of a verified net.
    pub fn from_net(t: &KsgnsTriplet, net: &TruncatingNet) -> Result<Self> {
        let family = net.t.iter().cloned().zip(net.rho.iter().cloned()).collect();
        Self::new(
            t.module().clone(),
            t.source(),
            t.n_basis().to_vec(),
            t.lambda().iter().map(|l| l.mat().clone()).collect(),
            family,
        )
    }

    fn free(&self) -> Arc<ModuleRep> {
        Arc::new(ModuleRep::free(&self.b))
    }
}

fn inconsistent(residual: f64, reason: &str) -> Error {
    Error::SeedInconsistent {
        residual,
        reason: reason.into(),
    }
}

/// Right support projection of `Σ a_k* a_k`.
fn support_projection(spec: &AlgebraSpec, elems: &[Element]) -> Element {
    let s = elems
        .iter()
        .fold(Element::zero(spec), |acc, a| &acc + &(&a.adjoint() * a));
    let cut = 1e-10 * s.norm();
    if s.norm() == 0.0 {
        return Element::zero(spec);
    }
    s.apply_hermitian(|x| if x > cut { 1.0 } else { 0.0 })
}

fn ideal_basis(spec: &AlgebraSpec, p: &Element) -> Vec<Element> {
    let vecs: Vec<Vector> = spec.basis().iter().map(|e| (e * p).coords()).collect();
    linalg::gram_schmidt(&vecs)
        .into_iter()
        .map(|v| Element::from_coords(spec, &v))
        .collect()
}

fn coords_matrix(spec: &AlgebraSpec, elems: &[Element]) -> Mat {
    let cols: Vec<Vector> = elems.iter().map(|x| x.coords()).collect();
    linalg::columns_to_mat(spec.dim(), &cols)
}

/// Column `k·r + l` holds the coordinates of `Λ_k* T Λ_l` (with `T = 1` when
/// `op` is `None`), read off at the unit of `B`.
pub(crate) fn lambda_gram_table(e: &ModuleRep, free: &ModuleRep, lambdas: &[Mat], op: Option<&Mat>) -> Mat {
    let r = lambdas.len();
    let one = Element::unit(free.base()).coords();
    let d = e.dim();
    let mut vs = Mat::zeros(d, r);
    for (l, lm) in lambdas.iter().enumerate() {
        let v = lm * &one;
        let v = match op {
            Some(t) => t * v,
            None => v,
        };
        vs.set_column(l, &v);
    }
    let hv = e.scalar_gram() * vs;
    let mut out = Mat::zeros(free.dim(), r * r);
    for (k, lk) in lambdas.iter().enumerate() {
        let block = free.h_inv() * lk.adjoint() * &hv;
        out.columns_mut(k * r, r).copy_from(&block);
    }
    out
}

/// Closes `Λ₀` to `N = A·p` and builds `π`, checking the seed along the way.
pub fn close_lambda(seed: &SeedData, tol: f64) -> Result<KsgnsTriplet> {
    let a = &seed.a;
    let e = &seed.e;
    let d = e.dim();
    let k = seed.n0.len();

    for (idx, (t, _)) in seed.family.iter().enumerate() {
        if d == 0 {
            break;
        }
        let herm = t.self_adjoint_residual();
        let lo = t.min_eigenvalue();
        let hi = t.max_eigenvalue();
        let bad = herm.max(-lo).max(hi - 1.0);
        if bad > tol {
            return Err(inconsistent(bad, &format!("family operator {idx} outside [0, 1]")));
        }
    }
    if d > 0 {
        let last = &seed.family.last().expect("nonempty").0;
        let r = last.distance(&ModuleMap::identity(e));
        if r > tol {
            return Err(inconsistent(r, "last family operator differs from 1"));
        }
    }

    let mut scale: f64 = 1.0;
    let mut identity: f64 = 0.0;
    let free = seed.free();
    let products: Vec<Vec<Element>> = form_values(&seed.n0, |x| x.clone());
    for (t, rho) in &seed.family {
        let table = lambda_gram_table(e, &free, &seed.lambda0, Some(t.mat()));
        for j in 0..k {
            for i in 0..k {
                let want = rho.apply(&products[j][i]).coords();
                scale = scale.max(1.0 + want.camax());
                identity = identity.max((want - table.column(j * k + i)).camax());
            }
        }
    }
    if identity > tol * scale {
        return Err(inconsistent(identity, "rho_i(a*b) differs from Lambda0(a)* T_i Lambda0(b)"));
    }

    let x = coords_matrix(a, &seed.n0);
    let xp = linalg::pinv(&x);
    let null = Mat::identity(k, k) - &xp * &x;
    let mut linear: f64 = 0.0;
    for col in 0..k {
        let mut acc = Mat::zeros(d, seed.b.dim());
        for (row, l) in seed.lambda0.iter().enumerate() {
            acc += l * null[(row, col)];
        }
        linear = linear.max(linalg::max_abs(&acc));
    }
    if linear > STRUCT_TOL * scale {
        return Err(inconsistent(linear, "Lambda0 is not linear on span N0"));
    }

    let p = support_projection(a, &seed.n0);
    let n_basis = ideal_basis(a, &p);
    let rank_x = linalg::rank(&x);
    let q = linalg::range_basis(&x);
    let mut outside: f64 = 0.0;
    for n in &n_basis {
        let v = n.coords();
        outside = outside.max((&v - &q * (q.adjoint() * &v)).norm());
    }
    if rank_x != n_basis.len() || outside > STRUCT_TOL {
        return Err(inconsistent(outside.max(1.0), "span N0 is not a left ideal"));
    }

    let mb = seed.b.dim();
    let lambda: Vec<Mat> = n_basis
        .iter()
        .map(|n| {
            let c = &xp * n.coords();
            let mut m = Mat::zeros(d, mb);
            for (row, l) in seed.lambda0.iter().enumerate() {
                m += l * c[row];
            }
            m
        })
        .collect();
    let r = n_basis.len();
    let mut w = Mat::zeros(d, r * mb);
    for (i, l) in lambda.iter().enumerate() {
        w.columns_mut(i * mb, mb).copy_from(l);
    }
    let rank_w = linalg::rank(&w);
    if rank_w != d {
        return Err(inconsistent((d - rank_w) as f64, "Lambda0(N0)B is not dense in E"));
    }
    let wp = linalg::pinv(&w);

    let mut solve: f64 = 0.0;
    let pi: Vec<Mat> = a
        .basis()
        .iter()
        .map(|xe| {
            let kx = left_action_on(&n_basis, xe);
            let mut wx = Mat::zeros(d, r * mb);
            for i in 0..r {
                let mut acc = Mat::zeros(d, mb);
                for (j, l) in lambda.iter().enumerate() {
                    if kx[(j, i)].norm() > 0.0 {
                        acc += l * kx[(j, i)];
                    }
                }
                wx.columns_mut(i * mb, mb).copy_from(&acc);
            }
            let px = &wx * &wp;
            solve = solve.max(linalg::max_abs(&(&px * &w - &wx)));
            px
        })
        .collect();
    if solve > tol * scale {
        return Err(inconsistent(solve, "pi(x) Lambda(a) = Lambda(xa) has no solution"));
    }

    let t = KsgnsTriplet::new(p, e.clone(), n_basis, lambda, pi)?;
    let hom = homomorphism_residual(&t);
    if hom > tol * scale {
        return Err(inconsistent(hom, "pi is not a *-homomorphism"));
    }
    let units = PartialUnitNet::new(a).elements();
    if let Some(last) = units.last() {
        let r = t.pi_of(last).distance(&ModuleMap::identity(e));
        if r > tol * scale {
            return Err(inconsistent(r, "pi is degenerate"));
        }
    }
    Ok(t)
}

/// Worst of multiplicativity and adjoint residuals of `π` on basis pairs.
fn homomorphism_residual(t: &KsgnsTriplet) -> f64 {
    let spec = t.source();
    let basis = spec.basis();
    let mut worst: f64 = 0.0;
    for (alpha, x) in basis.iter().enumerate() {
        let px = &t.pi()[alpha];
        worst = worst.max(linalg::max_abs(&(t.pi()[spec.adjoint_index(alpha)].mat() - px.adjoint().mat())));
        for (beta, y) in basis.iter().enumerate() {
            worst = worst.max(linalg::max_abs(&(px.mat() * t.pi()[beta].mat() - t.pi_of(&(x * y)).mat())));
        }
    }
    worst
}

/// Output of [`construct_weight`].
#[derive(Clone, Debug)]
pub struct Construction {
    pub weight: Weight,
    pub triplet: KsgnsTriplet,
    /// Worst `‖Σ Λ(b_k)* T Λ(a_k)‖` over kernel directions of the multiplication map.
    pub kernel_residual: f64,
    pub report: Report,
}

/// `φ(Σ b_k* a_k) = Σ Λ(b_k)* Λ(a_k)` on `N*N`, certified on the kernel of
/// `(b, a) ↦ b* a`.
pub fn construct_weight(seed: &SeedData, tol: f64) -> Result<Construction> {
    let t = close_lambda(seed, tol)?;
    let a = &seed.a;
    let b = &seed.b;
    let n = t.n_basis();
    let r = n.len();
    let mut mu = Mat::zeros(a.dim(), r * r);
    for k in 0..r {
        let nk = n[k].adjoint();
        for l in 0..r {
            mu.set_column(k * r + l, &(&nk * &n[l]).coords());
        }
    }
    let mup = linalg::pinv(&mu);
    let adj: Vec<ModuleMap> = t.lambda().iter().map(|l| l.adjoint()).collect();
    let lmats: Vec<Mat> = t.lambda().iter().map(|l| l.mat().clone()).collect();
    let gamma = |op: &ModuleMap| lambda_gram_table(t.module(), t.free(), &lmats, Some(op.mat()));
    let ops: Vec<ModuleMap> = seed
        .family
        .iter()
        .map(|(op, _)| op.clone())
        .chain(std::iter::once(ModuleMap::identity(t.module())))
        .collect();
    let mut kernel: f64 = 0.0;
    let mut scale: f64 = 1.0;
    let mut y = Mat::zeros(b.dim(), r * r);
    for (idx, op) in ops.iter().enumerate() {
        let g = gamma(op);
        scale = scale.max(1.0 + linalg::max_abs(&g));
        let res = (&g - (&g * &mup) * &mu).norm();
        kernel = kernel.max(res);
        if idx + 1 == ops.len() {
            y = g;
        }
    }
    if kernel > tol * scale {
        return Err(Error::IllDefined { residual: kernel });
    }
    let phi_mat = &y * &mup;
    let map = CpMap::from_matrix(a, b, phi_mat)?;
    let weight = Weight::new(t.p().clone(), &map)?;

    let mut report = Report::new();
    report.bound("def7.1/well-defined", kernel, tol * scale);
    let mut values: f64 = 0.0;
    for j in 0..r {
        for i in 0..r {
            let got = weight.eval(&(&n[j].adjoint() * &n[i]));
            values = values.max(got.distance(&adj[j].then(&t.lambda()[i]).to_element()));
        }
    }
    report.bound("def7.1/values", values, tol * scale);
    report.floor("def7.1/positive", weight.positivity_slack(), tol);
    report.extend_prefixed("corol7.2/", verify_ksgns(&weight, &t, tol));
    Ok(Construction {
        weight,
        triplet: t,
        kernel_residual: kernel,
        report,
    })
}

/// Solves `π(n_i) V = rhs_i` for all `N` basis elements in whitened
/// coordinates; returns `V` with the stacked residual.
pub(crate) fn intertwiner(t: &KsgnsTriplet, rhs: &[Mat]) -> (ModuleMap, f64) {
    let e = t.module();
    let d = e.dim();
    let n = t.n_basis();
    let mb = t.free().dim();
    let mut stack = Mat::zeros(n.len() * d, d);
    let mut right = Mat::zeros(n.len() * d, mb);
    for (i, a) in n.iter().enumerate() {
        stack
            .rows_mut(i * d, d)
            .copy_from(&(e.h_sqrt() * t.pi_of(a).mat() * e.h_inv_sqrt()));
        right.rows_mut(i * d, d).copy_from(&(e.h_sqrt() * &rhs[i]));
    }
    let z = linalg::pinv(&stack) * &right;
    let residual = linalg::max_abs(&(&stack * &z - &right));
    let v = ModuleMap::new(t.free().clone(), e.clone(), e.h_inv_sqrt() * z).expect("shape");
    (v, residual)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetOrder {
    Chain,
    /// Product order on `n_1 × … × n_k`, flattened row-major.
    Grid(Vec<usize>),
}

impl NetOrder {
    pub fn dims(&self, len: usize) -> Vec<usize> {
        match self {
            NetOrder::Chain => vec![len],
            NetOrder::Grid(d) => d.clone(),
        }
    }

    /// Order on the product index set, the first factor slowest.
    pub fn product(&self, len: usize, other: &NetOrder, other_len: usize) -> NetOrder {
        let mut d = self.dims(len);
        d.extend(other.dims(other_len));
        NetOrder::Grid(d)
    }

    /// Immediate successors of index `i`.
    fn successors(&self, i: usize, len: usize) -> Vec<usize> {
        let dims = self.dims(len);
        let mut out = Vec::new();
        let mut stride = 1;
        for &n in dims.iter().rev() {
            if (i / stride) % n + 1 < n {
                out.push(i + stride);
            }
            stride *= n;
        }
        out
    }

    fn len(&self, fallback: usize) -> usize {
        self.dims(fallback).iter().product()
    }
}

/// Largest increase of `values` along the order.
fn monotone_excess(order: &NetOrder, values: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..values.len() {
        for j in order.successors(i, values.len()) {
            worst = worst.max(values[j] - values[i]);
        }
    }
    worst
}

/// A verified truncating net with its derived operators.
#[derive(Clone, Debug)]
pub struct TruncatingNet {
    u: Vec<Element>,
    s: Vec<ModuleMap>,
    t: Vec<ModuleMap>,
    w: Vec<ModuleMap>,
    v: Vec<ModuleMap>,
    rho: Vec<CpMap>,
    order: NetOrder,
    report: Report,
}

impl TruncatingNet {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &[Element] {
        &self.u
    }

    pub fn s(&self) -> &[ModuleMap] {
        &self.s
    }

    pub fn t(&self) -> &[ModuleMap] {
        &self.t
    }

    pub fn w(&self) -> &[ModuleMap] {
        &self.w
    }

    pub fn v(&self) -> &[ModuleMap] {
        &self.v
    }

    pub fn rho(&self) -> &[CpMap] {
        &self.rho
    }

    pub fn order(&self) -> &NetOrder {
        &self.order
    }

    pub fn report(&self) -> &Report {
        &self.report
    }
}

/// Derives `S_i, T_i, w_i, v_i, ρ_i` from candidate elements and checks every
/// truncating-net clause.
pub fn verify_truncating_net(
    phi: &Weight,
    t: &KsgnsTriplet,
    net: &[Element],
    order: NetOrder,
    tol: f64,
) -> std::result::Result<TruncatingNet, Report> {
    let mut rep = Report::new();
    let scale = 1.0 + phi.norm();
    let bound = tol * scale;
    if !phi.is_densely_defined() {
        rep.flag("regular/densely-defined", false, Some(json!({"reason": "p differs from 1"})));
        return Err(rep);
    }
    if net.is_empty() || order.len(net.len()) != net.len() {
        rep.flag("regular/index-set", false, Some(json!({"elements": net.len()})));
        return Err(rep);
    }
    let source = t.source();
    let e = t.module();
    let n = t.n_basis();
    let lambdas = t.lambda();
    let w_span = t.span_matrix();
    let wp = linalg::pinv(&w_span);
    let mb = t.free().dim();
    let id = ModuleMap::identity(e);

    let mut u_norm = (0.0f64, 0usize);
    let mut ideal: f64 = 0.0;
    let mut s_solve: f64 = 0.0;
    let mut contraction: f64 = 0.0;
    let mut commutant: f64 = 0.0;
    let mut blin: f64 = 0.0;
    let mut rho_identity: f64 = 0.0;
    let mut w_solve: f64 = 0.0;
    let mut v_solve: f64 = 0.0;
    let mut norms: f64 = 0.0;
    let mut gram: f64 = 0.0;
    let mut lambda_au: f64 = 0.0;
    let mut residuals = Vec::with_capacity(net.len());
    let (mut ss, mut ts, mut ws, mut vs, mut rhos) = (vec![], vec![], vec![], vec![], vec![]);

    for (idx, u) in net.iter().enumerate() {
        let excess = u.norm() - 1.0;
        if excess > u_norm.0 {
            u_norm = (excess, idx);
        }
        let mut wu = Mat::zeros(e.dim(), n.len() * mb);
        for (j, nj) in n.iter().enumerate() {
            let (coeffs, res) = t.n_coords(&(nj * u));
            ideal = ideal.max(res);
            wu.columns_mut(j * mb, mb).copy_from(t.lambda_from_coords(&coeffs).mat());
        }
        let s_mat = &wu * &wp;
        s_solve = s_solve.max(linalg::max_abs(&(&s_mat * &w_span - &wu)));
        let s = ModuleMap::new(e.clone(), e.clone(), s_mat).expect("shape");
        contraction = contraction.max(s.op_norm() - 1.0);
        commutant = commutant.max(
            t.pi()
                .iter()
                .map(|x| s.then(x).distance(&x.then(&s)))
                .fold(0.0, f64::max),
        );
        blin = blin.max(s.b_linearity_residual());
        let tt = s.adjoint().then(&s);
        let sqrt = tt.psd_sqrt();
        let w_rhs: Vec<Mat> = lambdas.iter().map(|l| s.then(l).mat().clone()).collect();
        let v_rhs: Vec<Mat> = lambdas.iter().map(|l| sqrt.then(l).mat().clone()).collect();
        let (w, wr) = intertwiner(t, &w_rhs);
        let (v, vr) = intertwiner(t, &v_rhs);
        w_solve = w_solve.max(wr);
        v_solve = v_solve.max(vr);
        let wadj = w.adjoint();
        let rho = CpMap::from_fn(&source, t.target(), |x| wadj.then(&t.pi_of(x).then(&w)).to_element());
        for (j, lj) in lambdas.iter().enumerate() {
            let lj_adj = lj.adjoint();
            for (i, li) in lambdas.iter().enumerate() {
                let want = lj_adj.then(&tt.then(li)).to_element();
                rho_identity = rho_identity.max(rho.apply(&(&n[j].adjoint() * &n[i])).distance(&want));
            }
        }
        let rn = rho.apply(&Element::unit(&source)).norm();
        norms = norms
            .max((v.op_norm().powi(2) - rn).abs())
            .max((w.op_norm().powi(2) - rn).abs());
        gram = gram.max(v.adjoint().then(&v).distance(&wadj.then(&w)));
        for x in source.basis() {
            let r = match t.lambda_of(&(&x * u)) {
                Ok(l) => l.distance(&t.pi_of(&x).then(&w)),
                Err(_) => f64::INFINITY,
            };
            lambda_au = lambda_au.max(r);
        }
        residuals.push(
            lambdas
                .iter()
                .map(|l| l.distance(&s.then(l)))
                .fold(0.0, f64::max),
        );
        ss.push(s);
        ts.push(tt);
        ws.push(w);
        vs.push(v);
        rhos.push(rho);
    }

    rep.bound_with("regular/u-norm", u_norm.0.max(0.0), tol, json!({"index": u_norm.1}));
    rep.bound("regular/ideal", ideal, bound);
    rep.bound("regular/s-solve", s_solve, bound);
    rep.bound("regular/s-contraction", contraction.max(0.0), bound);
    rep.bound("regular/s-commutant", commutant, bound);
    rep.bound("regular/b-linear", blin, bound);
    rep.bound("regular/rho-identity", rho_identity, bound);
    let last = net.len() - 1;
    let unit = Element::unit(&source);
    let limit = net[last].distance(&unit).max(ss[last].distance(&id));
    rep.bound("regular/limit", limit, bound);
    rep.bound("regular/monotone", monotone_excess(&order, &residuals), bound);
    rep.bound("net/w-solve", w_solve, bound);
    rep.bound("net/v-solve", v_solve, bound);
    rep.bound("net/norm-identity", norms, bound);
    rep.bound("net/v-w-gram", gram, bound);
    rep.bound("net/lambda-au", lambda_au, bound);

    if !rep.all_pass() {
        return Err(rep);
    }
    Ok(TruncatingNet {
        u: net.to_vec(),
        s: ss,
        t: ts,
        w: ws,
        v: vs,
        rho: rhos,
        order,
        report: rep,
    })
}

/// `M(A) ⊗̇ D` for `D = qB`, with `U(Λ(a)d) = a ⊗̇ d`.
#[derive(Clone, Debug)]
pub struct QuotientModule {
    d_basis: Vec<Element>,
    module: Arc<ModuleRep>,
    u: ModuleMap,
    /// Classes `n_i ⊗̇ d_k`, column `i·|D| + k`.
    classes: Mat,
    /// `Λ(n_i) d_k` in `E`, same column order.
    span: Mat,
    theta: Vec<ModuleMap>,
    report: Report,
}

impl QuotientModule {
    pub fn d_basis(&self) -> &[Element] {
        &self.d_basis
    }

    pub fn module(&self) -> &Arc<ModuleRep> {
        &self.module
    }

    pub fn u(&self) -> &ModuleMap {
        &self.u
    }

    /// `θ` on the matrix units of `A`.
    pub fn theta(&self) -> &[ModuleMap] {
        &self.theta
    }

    pub fn report(&self) -> &Report {
        &self.report
    }

    /// `F_ρ(a ⊗̇ d) = π(a) v_ρ d`, `R_ρ = U T_ρ^{1/2} F_ρ`, and the identities
    /// they satisfy for `ρ ∈ 𝓕`.
    pub fn check_dominated(&self, t: &KsgnsTriplet, rho: &DominatedMap, tol: f64) -> Report {
        let mut rep = Report::new();
        let e = t.module();
        let q = &self.module;
        let n = t.n_basis();
        let s = self.d_basis.len();
        let scale = 1.0 + rho.rho().apply(t.p()).norm().max(1.0);
        let bound = tol * scale;
        let mut z = Mat::zeros(e.dim(), n.len() * s);
        for (i, a) in n.iter().enumerate() {
            let pv = t.pi_of(a).then(rho.v());
            for (k, d) in self.d_basis.iter().enumerate() {
                z.set_column(i * s + k, &pv.apply(&d.coords()));
            }
        }
        let f = &z * linalg::pinv(&self.classes);
        let sqrt = rho.t().psd_sqrt();
        let uadj = self.u.adjoint();
        let transport = linalg::max_abs(&(sqrt.mat() * uadj.mat() * &self.classes - &z));
        rep.bound("lem7.6/transport", transport, bound);

        let r_mat = self.u.mat() * sqrt.mat() * &f;
        let r = ModuleMap::new(q.clone(), q.clone(), r_mat).expect("shape");
        let values = form_values(n, |x| rho.rho().apply(x));
        let g = scalar_form(&values, &self.d_basis);
        let got = self.classes.adjoint() * q.scalar_gram() * r.mat() * &self.classes;
        rep.bound("lem7.2/inner", linalg::max_abs(&(got - g)), bound);
        if q.dim() > 0 {
            rep.bound("lem7.2/self-adjoint", r.self_adjoint_residual(), bound);
            rep.floor("lem7.2/positive", r.min_eigenvalue(), bound);
            rep.floor("lem7.2/contraction", 1.0 - r.max_eigenvalue(), bound);
        }
        let lhs = self.span.adjoint() * e.scalar_gram() * uadj.mat() * r.mat() * self.u.mat() * &self.span;
        let rhs = self.span.adjoint() * e.scalar_gram() * rho.t().mat() * &self.span;
        rep.bound("lem7.4/transport", linalg::max_abs(&(lhs - rhs)), bound);
        rep
    }
}

/// Builds `M(A) ⊗̇ D` for `D = qB` from the form `b₂* ρ_L(a₂* a₁) b₁` of the
/// last net element, and the map `U`.
pub fn build_quotient_module(
    phi: &Weight,
    t: &KsgnsTriplet,
    net: &TruncatingNet,
    q: &Element,
    tol: f64,
) -> Result<QuotientModule> {
    if !phi.is_densely_defined() {
        return Err(Error::NotDenselyDefined);
    }
    let b = phi.target().clone();
    if q.spec() != b || !q.is_projection(1e-10) {
        return Err(Error::Invalid("D must be generated by a projection of B".into()));
    }
    let d_vecs: Vec<Vector> = b.basis().iter().map(|x| (q * x).coords()).collect();
    let d_basis: Vec<Element> = linalg::gram_schmidt(&d_vecs)
        .into_iter()
        .map(|v| Element::from_coords(&b, &v))
        .collect();
    let n = t.n_basis();
    let r = n.len();
    let s = d_basis.len();
    let form = net.rho().last().expect("verified net is nonempty");
    let values = form_values(n, |x| form.apply(x));
    let hf = scalar_form(&values, &d_basis);
    let quot = Quotient::build(&b, &hf, r, &d_basis, tol)?;
    let module = quot.e.clone();
    let e = t.module();
    let classes = quot.proj.clone();
    let mut span = Mat::zeros(e.dim(), r * s);
    for (i, l) in t.lambda().iter().enumerate() {
        for (k, d) in d_basis.iter().enumerate() {
            span.set_column(i * s + k, &l.apply(&d.coords()));
        }
    }
    let ws = e.h_sqrt() * &span;
    let u_mat = &classes * linalg::pinv(&ws) * e.h_sqrt();
    let u = ModuleMap::new(e.clone(), module.clone(), u_mat)?;

    let rank_u = linalg::rank(u.mat());
    if rank_u < module.dim() {
        return Err(Error::NotSurjective {
            deficit: module.dim() - rank_u,
        });
    }

    let scale = 1.0 + phi.norm();
    let bound = tol * scale;
    let mut rep = Report::new();
    let well = linalg::max_abs(&(u.mat() * &span - &classes));
    rep.bound("prop7.4/well-defined", well, bound);
    let iso = linalg::max_abs(
        &(span.adjoint() * (u.mat().adjoint() * module.scalar_gram() * u.mat()) * &span
            - span.adjoint() * e.scalar_gram() * &span),
    );
    rep.bound("prop7.4/isometry", iso, bound);
    rep.bound("prop7.4/b-linear", u.b_linearity_residual(), bound);
    let span_rank = linalg::rank(&span);
    rep.bound(
        "prop7.4/rank-equality",
        (span_rank as f64 - module.dim() as f64).abs().max((rank_u as f64 - module.dim() as f64).abs()),
        0.0,
    );

    let source = t.source();
    let theta: Vec<ModuleMap> = source
        .basis()
        .iter()
        .map(|x| {
            ModuleMap::new(module.clone(), module.clone(), quot.left_operator(&left_action_on(n, x)))
                .expect("shape")
        })
        .collect();
    let theta_of = |x: &Element| {
        let xc = x.coords();
        let mut m = Mat::zeros(module.dim(), module.dim());
        for (alpha, th) in theta.iter().enumerate() {
            if xc[alpha].norm() > 0.0 {
                m += th.mat() * xc[alpha];
            }
        }
        m
    };
    let basis = source.basis();
    let mut hom: f64 = 0.0;
    for (alpha, x) in basis.iter().enumerate() {
        hom = hom.max(theta[source.adjoint_index(alpha)].distance(&theta[alpha].adjoint()));
        for (beta, y) in basis.iter().enumerate() {
            hom = hom.max(linalg::max_abs(&(theta[alpha].mat() * theta[beta].mat() - theta_of(&(x * y)))));
        }
    }
    let unit = theta_of(&Element::unit(&source));
    hom = hom.max(linalg::max_abs(&(unit - Mat::identity(module.dim(), module.dim()))));
    rep.bound("prop7.4/theta-homomorphism", hom, bound);
    let uadj = u.adjoint();
    let mut inter: f64 = 0.0;
    for (alpha, th) in theta.iter().enumerate() {
        let lhs = span.adjoint() * e.scalar_gram() * uadj.mat() * th.mat() * u.mat() * &span;
        let rhs = span.adjoint() * e.scalar_gram() * t.pi()[alpha].mat() * &span;
        inter = inter.max(linalg::max_abs(&(lhs - rhs)));
    }
    rep.bound("prop7.4/intertwines", inter, bound);

    Ok(QuotientModule {
        d_basis,
        module,
        u,
        classes,
        span,
        theta,
        report: rep,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ApproxMode {
    /// `‖Λ(a_j)‖ ≤ ‖Λ(a)‖`; needs `Λ(a) ≠ 0`.
    Exact,
    /// `‖Λ(a_j)‖ ≤ M` for a bound `M > ‖Λ(a)‖`.
    Slack(f64),
}

#[derive(Clone, Debug)]
pub struct ApproxStep {
    /// Net index `i` used at this step.
    pub index: usize,
    /// Target distance `‖b − a‖` of the rounded element.
    pub precision: f64,
    /// The factor `min(λ, μ)` or `min(λ, 1)`.
    pub factor: f64,
    pub element: Element,
}

#[derive(Clone, Debug)]
pub struct CoreApproximation {
    pub a: Element,
    pub mode: ApproxMode,
    /// `‖Λ(a)‖` in exact mode, `M` in slack mode.
    pub lambda_bound: f64,
    pub steps: Vec<ApproxStep>,
}

/// Coefficients of `a` rounded to the grid `2^{-e}(ℤ + iℤ)`.
fn dyadic_round(coeffs: &Vector, e: u32) -> Vector {
    let h = 2f64.powi(e as i32);
    coeffs.map(|z| linalg::c((z.re * h).round() / h, (z.im * h).round() / h))
}

/// Elements `a_j = c·b_j·u_{i_j}` with `b_j` a rounding of `a` from the span
/// of `k_basis`, rescaled to respect the norm bounds.
pub fn core_approximation(
    t: &KsgnsTriplet,
    net: &TruncatingNet,
    k_basis: &[Element],
    a: &Element,
    mode: ApproxMode,
    eps: f64,
) -> Result<CoreApproximation> {
    let spec = t.source();
    if !(eps > 0.0) {
        return Err(Error::Invalid("eps must be positive".into()));
    }
    let kmat = coords_matrix(&spec, k_basis);
    if linalg::rank(&kmat) < spec.dim() {
        return Err(Error::Invalid("K does not span A".into()));
    }
    let la = t.lambda_of(a)?;
    let la_norm = la.op_norm();
    let lambda_bound = match mode {
        ApproxMode::Exact => {
            if la_norm <= 1e-12 * (1.0 + a.norm()) {
                return Err(Error::ZeroLambdaExactMode);
            }
            la_norm
        }
        ApproxMode::Slack(m) => {
            if !(m > la_norm) {
                return Err(Error::SlackTooSmall { norm: la_norm, bound: m });
            }
            m
        }
    };
    let coeffs = linalg::pinv(&kmat) * a.coords();
    let ksum: f64 = k_basis.iter().map(|k| k.norm()).sum::<f64>().max(1e-300);
    let a_norm = a.norm();
    let len = net.len();
    let piw = |x: &Element, i: usize| t.pi_of(x).then(&net.w()[i]).op_norm();
    let nonzero: Vec<bool> = (0..len).map(|i| piw(a, i) > 1e-12 * (1.0 + la_norm)).collect();
    let start = match mode {
        ApproxMode::Exact => (0..len).rev().take_while(|&i| nonzero[i]).last().unwrap_or(len - 1),
        ApproxMode::Slack(_) => 0,
    };
    let depth = ((1.0 / eps).log2().ceil().max(0.0) as usize + 1).max(len - start).min(64);

    let mut steps = Vec::with_capacity(depth);
    for j in 0..depth {
        let i = (start + j).min(len - 1);
        let wnorm = net.w()[i].op_norm();
        let precision = 2f64.powi(-(j as i32)) / (wnorm + 1.0);
        let mut e: u32 = 0;
        while 2f64.powi(-(e as i32)) / std::f64::consts::SQRT_2 * ksum > precision && e < 1000 {
            e += 1;
        }
        let build = |e: u32| Element::from_coords(&spec, &(&kmat * dyadic_round(&coeffs, e)));
        let mut b = build(e);
        let factor;
        if a_norm == 0.0 {
            factor = 0.0;
        } else {
            let mut tries = 0;
            loop {
                let bn = b.norm();
                let pb = piw(&b, i);
                let ok = bn > 0.0
                    && match mode {
                        ApproxMode::Exact => pb > 0.0,
                        ApproxMode::Slack(m) => pb <= m,
                    };
                if ok || tries > 80 {
                    break;
                }
                e += 1;
                tries += 1;
                b = build(e);
            }
            let lam = a_norm / b.norm();
            factor = match mode {
                ApproxMode::Exact => lam.min(piw(a, i) / piw(&b, i)),
                ApproxMode::Slack(_) => lam.min(1.0),
            };
        }
        let element = &b.scale_real(factor) * &net.u()[i];
        steps.push(ApproxStep {
            index: i,
            precision,
            factor,
            element,
        });
    }
    Ok(CoreApproximation {
        a: a.clone(),
        mode,
        lambda_bound,
        steps,
    })
}

/// Norm bounds on every step, convergence of the last step within `eps`.
pub fn check_core_approximation(t: &KsgnsTriplet, approx: &CoreApproximation, probes: &[Element], eps: f64) -> Report {
    let mut rep = Report::new();
    let a = &approx.a;
    let an = a.norm();
    let mut norm_excess: f64 = 0.0;
    let mut lambda_excess: f64 = 0.0;
    for step in &approx.steps {
        norm_excess = norm_excess.max(step.element.norm() - an);
        let l = match t.lambda_of(&step.element) {
            Ok(l) => l.op_norm(),
            Err(_) => f64::INFINITY,
        };
        lambda_excess = lambda_excess.max(l - approx.lambda_bound);
    }
    rep.bound("prop8.3/norm-bound", norm_excess.max(0.0), 1e-12 * (1.0 + an));
    rep.bound("prop8.3/lambda-bound", lambda_excess.max(0.0), 1e-12 * (1.0 + approx.lambda_bound));
    let last = approx.steps.last().map(|s| s.element.clone()).unwrap_or_else(|| a.clone());
    rep.bound("prop8.3/convergence", last.distance(a), eps);
    let strong = match (t.lambda_of(&last), t.lambda_of(a)) {
        (Ok(l1), Ok(l0)) => {
            let e = t.module();
            probes
                .iter()
                .map(|c| {
                    let cv = c.coords();
                    e.vec_norm(&(l1.apply(&cv) - l0.apply(&cv)))
                })
                .fold(0.0, f64::max)
        }
        _ => f64::INFINITY,
    };
    rep.bound("prop8.3/strong-convergence", strong, eps);
    rep
}

/// `ρ_i(a) → φ(a)` with attainment at the last index, domination on positive
/// elements, and the same domination for sampled members of `𝓕`.
pub fn rho_family_convergence(
    phi: &Weight,
    t: &KsgnsTriplet,
    net: &TruncatingNet,
    sampler: &mut CpFamilySampler,
    tol: f64,
) -> Report {
    let mut rep = Report::new();
    let scale = 1.0 + phi.norm();
    let last = net.rho().last().expect("verified net is nonempty");
    let limit = t
        .m_basis()
        .iter()
        .map(|x| last.apply(x).distance(&phi.eval(x)))
        .fold(0.0, f64::max);
    rep.bound("prop8.2/limit", limit, tol * scale);

    let n = t.n_basis();
    let mut positives: Vec<Element> = n.iter().map(|x| &x.adjoint() * x).collect();
    if let Some(first) = n.first() {
        let sum = n.iter().skip(1).fold(first.clone(), |acc, x| &acc + x);
        positives.push(&sum.adjoint() * &sum);
    }
    let mut dom = f64::INFINITY;
    let mut monotone: f64 = 0.0;
    for a in &positives {
        let fa = phi.eval(a);
        let gaps: Vec<f64> = net
            .rho()
            .iter()
            .map(|rho| {
                let diff = &fa - &rho.apply(a);
                dom = dom.min(diff.min_eigenvalue());
                diff.norm()
            })
            .collect();
        monotone = monotone.max(monotone_excess(net.order(), &gaps));
    }
    if dom.is_infinite() {
        dom = 0.0;
    }
    rep.floor("prop8.2/domination", dom, tol * scale);
    rep.bound("prop8.2/monotone", monotone, tol * scale);

    let mut transfer = f64::INFINITY;
    for _ in 0..sampler.budget() {
        let rho = sampler.sample_f();
        for a in &positives {
            transfer = transfer.min((&phi.eval(a) - &rho.rho().apply(a)).min_eigenvalue());
        }
    }
    if transfer.is_infinite() {
        transfer = 0.0;
    }
    rep.floor("prop7.3/transfer", transfer, tol * scale);
    rep
}

/// Partial-unit net of `A` together with its chain order.
pub fn partial_unit_net(spec: &AlgebraSpec) -> (Vec<Element>, NetOrder) {
    (PartialUnitNet::new(spec).elements(), NetOrder::Chain)
}

/// Canonical triplet plus partial-unit net for an everywhere-defined weight.
pub fn regular_data(phi: &Weight, tol: f64) -> Result<(KsgnsTriplet, TruncatingNet)> {
    let t = build_canonical_ksgns(phi)?;
    let (u, order) = partial_unit_net(phi.source());
    let net = verify_truncating_net(phi, &t, &u, order, tol)
        .map_err(|r| Error::CertificationFailed(r.summary()))?;
    Ok((t, net))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{self, substream};
    use crate::linalg::real;
    use proptest::prelude::*;

    fn central(spec: &AlgebraSpec, k: usize) -> Element {
        let blocks: Vec<Mat> = spec
            .block_dims
            .iter()
            .enumerate()
            .map(|(j, &n)| if j == k { Mat::identity(n, n) } else { Mat::zeros(n, n) })
            .collect();
        Element::from_blocks(spec, blocks).unwrap()
    }

    fn block_weight<R: rand::Rng>(rng: &mut R, spec: &AlgebraSpec, target: &AlgebraSpec) -> Weight {
        let parts: Vec<CpMap> = (0..spec.num_blocks())
            .map(|k| {
                let pk = central(spec, k);
                let r = CpMap::random(rng, spec, target, 2);
                CpMap::from_fn(spec, target, |x| r.apply(&(&(&pk * x) * &pk)))
            })
            .collect();
        let total = parts.iter().skip(1).fold(parts[0].clone(), |acc, p| acc.add(p).unwrap());
        Weight::everywhere(total)
    }

    fn identity_weight(dims: &[usize]) -> Weight {
        Weight::everywhere(CpMap::identity(&AlgebraSpec::of(dims)))
    }

    #[test]
    fn closure_of_canonical_seed_is_itself() {
        let phi = identity_weight(&[2, 1]);
        let t = build_canonical_ksgns(&phi).unwrap();
        let seed = SeedData::from_triplet(&phi, &t, &[0.25, 0.5, 1.0]).unwrap();
        let closed = close_lambda(&seed, 1e-9).unwrap();
        for (l, m) in closed.lambda().iter().zip(t.lambda()) {
            assert!(l.distance(m) < 1e-10);
        }
        for (x, y) in closed.pi().iter().zip(t.pi()) {
            assert!(x.distance(y) < 1e-10);
        }
    }

    #[test]
    fn closure_recovers_left_ideal() {
        let spec = AlgebraSpec::of(&[3]);
        let mut rng = substream(3, "closure-ideal");
        let p = Element::from_blocks(
            &spec,
            vec![Mat::from_diagonal(&Vector::from_vec(vec![real(1.0), real(1.0), real(0.0)]))],
        )
        .unwrap();
        let phi = Weight::new(p.clone(), &CpMap::random(&mut rng, &spec, &spec, 3)).unwrap();
        let t = build_canonical_ksgns(&phi).unwrap();
        // Mix the basis so N0 is not already orthonormal.
        let n = t.n_basis();
        let mut n0 = Vec::new();
        let mut l0 = Vec::new();
        for k in 0..n.len() {
            let j = (k + 1) % n.len();
            n0.push(&n[k] + &n[j].scale_real(0.5));
            l0.push(t.lambda()[k].mat() + t.lambda()[j].mat() * real(0.5));
        }
        let family = vec![(ModuleMap::identity(t.module()), phi.map().clone())];
        let seed = SeedData::new(t.module().clone(), spec.clone(), n0, l0, family).unwrap();
        let closed = close_lambda(&seed, 1e-9).unwrap();
        assert!(closed.p().distance(&p) < 1e-10);
        assert_eq!(closed.n_basis().len(), 6);
        assert!(verify_ksgns(&phi, &closed, 1e-9).all_pass());
    }

    #[test]
    fn fault_injection_is_rejected() {
        let phi = identity_weight(&[2]);
        let t = build_canonical_ksgns(&phi).unwrap();
        let mut seed = SeedData::from_triplet(&phi, &t, &[1.0]).unwrap();
        seed.lambda0[0] *= real(1.01);
        match close_lambda(&seed, 1e-9) {
            Err(Error::SeedInconsistent { residual, .. }) => assert!(residual >= 1e-3),
            other => panic!("expected SeedInconsistent, got {other:?}"),
        }
    }

    #[test]
    fn construction_round_trip() {
        let mut rng = substream(11, "construct");
        let spec = AlgebraSpec::of(&[2, 1]);
        let target = AlgebraSpec::of(&[2]);
        let phi = Weight::everywhere(CpMap::random(&mut rng, &spec, &target, 2));
        let t = build_canonical_ksgns(&phi).unwrap();
        let seed = SeedData::from_triplet(&phi, &t, &[0.5, 1.0]).unwrap();
        let c = construct_weight(&seed, 1e-9).unwrap();
        assert!(c.weight.map().distance(phi.map()) < 1e-9);
        assert!(c.kernel_residual < 1e-9);
        assert!(c.report.all_pass(), "{}", c.report.summary());
    }

    #[test]
    fn construction_of_zero_module_is_zero_weight() {
        let spec = AlgebraSpec::of(&[2]);
        let b = AlgebraSpec::of(&[1]);
        let e = Arc::new(ModuleRep::zero(&b));
        let n0 = spec.basis();
        let l0 = vec![Mat::zeros(0, 1); n0.len()];
        let family = vec![(ModuleMap::identity(&e), CpMap::zero(&spec, &b))];
        let seed = SeedData::new(e, spec.clone(), n0, l0, family).unwrap();
        let c = construct_weight(&seed, 1e-9).unwrap();
        assert!(c.weight.map().matrix().norm() < 1e-12);
        assert_eq!(c.triplet.dim(), 0);
    }

    #[test]
    fn construction_from_scalar_table() {
        let spec = AlgebraSpec::of(&[1, 1]);
        let b = AlgebraSpec::of(&[1]);
        let e = Arc::new(ModuleRep::from_scalar_gram(b.clone(), vec![Mat::identity(2, 2)], Mat::identity(2, 2)).unwrap());
        let l0 = vec![
            Mat::from_column_slice(2, 1, &[real(2.0), real(0.0)]),
            Mat::from_column_slice(2, 1, &[real(0.0), real(3.0)]),
        ];
        let phi0 = CpMap::new(
            &spec,
            &b,
            &[Element::scalar(&b, real(4.0)), Element::scalar(&b, real(9.0))],
        )
        .unwrap();
        let family = vec![(ModuleMap::identity(&e), phi0.clone())];
        let seed = SeedData::new(e, spec.clone(), spec.basis(), l0, family).unwrap();
        let c = construct_weight(&seed, 1e-9).unwrap();
        assert!(c.weight.map().distance(&phi0) < 1e-12);
        assert!(crate::cpmap::is_completely_positive(c.weight.map(), 1e-9));
    }

    #[test]
    fn ill_defined_kernel_is_rejected() {
        // A family operator outside the commutant breaks the kernel identity.
        let phi = identity_weight(&[2]);
        let t = build_canonical_ksgns(&phi).unwrap();
        let e = t.module();
        let mut d = Mat::zeros(e.dim(), e.dim());
        d[(0, 0)] = real(1.0);
        let bad = ModuleMap::new(e.clone(), e.clone(), d).unwrap();
        let c = construct_weight(
            &SeedData {
                family: vec![(bad, phi.map().clone()), (ModuleMap::identity(e), phi.map().clone())],
                ..SeedData::from_triplet(&phi, &t, &[1.0]).unwrap()
            },
            1e-9,
        );
        assert!(matches!(c, Err(Error::SeedInconsistent { .. }) | Err(Error::IllDefined { .. })));
    }

    #[test]
    fn single_unit_net() {
        let mut rng = substream(5, "unit-net");
        let spec = AlgebraSpec::of(&[2, 1]);
        let phi = Weight::everywhere(CpMap::random(&mut rng, &spec, &spec, 2));
        let t = build_canonical_ksgns(&phi).unwrap();
        let net = verify_truncating_net(&phi, &t, &[Element::unit(&spec)], NetOrder::Chain, 1e-9).unwrap();
        assert!(net.rho()[0].distance(phi.map()) < 1e-9);
        let mut sampler = CpFamilySampler::new(&t, 0.5, 1).unwrap().with_budget(4);
        assert!(rho_family_convergence(&phi, &t, &net, &mut sampler, 1e-9).all_pass());
    }

    #[test]
    fn partial_units_on_block_weight() {
        let mut rng = substream(6, "block-net");
        let spec = AlgebraSpec::of(&[2, 1, 2]);
        let target = AlgebraSpec::of(&[2]);
        let phi = block_weight(&mut rng, &spec, &target);
        let (t, net) = regular_data(&phi, 1e-9).unwrap();
        for s in net.s() {
            assert!(s.then(s).distance(s) < 1e-9);
            assert!(s.self_adjoint_residual() < 1e-9);
        }
        for (u, rho) in net.u().iter().zip(net.rho()) {
            let want = CpMap::from_fn(&spec, &target, |x| phi.eval(&(&(u * x) * u)));
            assert!(rho.distance(&want) < 1e-9);
        }
        let mut sampler = CpFamilySampler::new(&t, 0.5, 2).unwrap().with_budget(8);
        let rep = rho_family_convergence(&phi, &t, &net, &mut sampler, 1e-9);
        assert!(rep.all_pass(), "{}", rep.summary());
        assert!(rep.get("prop8.2/limit").unwrap().residual < 1e-10);
    }

    #[test]
    fn oversized_element_fails_norm_clause() {
        let phi = identity_weight(&[2]);
        let t = build_canonical_ksgns(&phi).unwrap();
        let spec = phi.source().clone();
        let net = vec![Element::unit(&spec).scale_real(2.0), Element::unit(&spec)];
        let rep = verify_truncating_net(&phi, &t, &net, NetOrder::Chain, 1e-9).unwrap_err();
        assert!(!rep.get("regular/u-norm").unwrap().pass);
    }

    #[test]
    fn non_central_projection_is_not_truncating() {
        // Λ(a)b ↦ Λ(a e₁₁)b is not well defined for the identity weight.
        let phi = identity_weight(&[2]);
        let t = build_canonical_ksgns(&phi).unwrap();
        let spec = phi.source().clone();
        let e11 = spec.basis_element(0);
        let rep = verify_truncating_net(&phi, &t, &[e11, Element::unit(&spec)], NetOrder::Chain, 1e-9).unwrap_err();
        assert!(!rep.get("regular/s-solve").unwrap().pass);
        assert!(rep.get("regular/s-solve").unwrap().residual > 0.1);
    }

    #[test]
    fn quotient_of_identity_weight() {
        let phi = identity_weight(&[2]);
        let (t, net) = regular_data(&phi, 1e-9).unwrap();
        let q = build_quotient_module(&phi, &t, &net, &Element::unit(phi.target()), 1e-9).unwrap();
        assert!(q.report().all_pass(), "{}", q.report().summary());
        assert_eq!(q.module().dim(), t.dim());
        assert!(q.u().mat().is_square());
    }

    #[test]
    fn quotient_with_proper_ideal() {
        let mut rng = substream(8, "quotient-ideal");
        let spec = AlgebraSpec::of(&[2]);
        let target = AlgebraSpec::of(&[3]);
        let phi = Weight::everywhere(CpMap::random(&mut rng, &spec, &target, 3));
        let (t, net) = regular_data(&phi, 1e-9).unwrap();
        let full = build_quotient_module(&phi, &t, &net, &Element::unit(&target), 1e-9).unwrap();
        let qproj = Element::from_blocks(
            &target,
            vec![Mat::from_diagonal(&Vector::from_vec(vec![real(1.0), real(0.0), real(0.0)]))],
        )
        .unwrap();
        let part = build_quotient_module(&phi, &t, &net, &qproj, 1e-9).unwrap();
        assert!(part.report().all_pass(), "{}", part.report().summary());
        assert_eq!(full.module().dim(), t.dim());
        assert!(part.module().dim() < full.module().dim());
        assert!(part.report().get("prop7.4/rank-equality").unwrap().pass);
        let mut sampler = CpFamilySampler::new(&t, 0.5, 4).unwrap();
        for _ in 0..4 {
            let rho = sampler.sample_f();
            let rep = part.check_dominated(&t, &rho, 1e-8);
            assert!(rep.all_pass(), "{}", rep.summary());
        }
    }

    #[test]
    fn quotient_dimension_over_commutative_target() {
        let spec = AlgebraSpec::of(&[1, 1, 1]);
        let phi = identity_weight(&[1, 1, 1]);
        let (t, net) = regular_data(&phi, 1e-9).unwrap();
        let q = Element::from_blocks(&spec, vec![Mat::identity(1, 1), Mat::zeros(1, 1), Mat::zeros(1, 1)]).unwrap();
        let part = build_quotient_module(&phi, &t, &net, &q, 1e-9).unwrap();
        assert_eq!(part.module().dim() * 3, t.dim());
        assert!(part.report().all_pass(), "{}", part.report().summary());
    }

    #[test]
    fn dominated_transport_on_random_weight() {
        let mut rng = substream(9, "quotient-random");
        let spec = AlgebraSpec::of(&[2, 1]);
        let target = AlgebraSpec::of(&[2]);
        let phi = Weight::everywhere(CpMap::random(&mut rng, &spec, &target, 2));
        let (t, net) = regular_data(&phi, 1e-9).unwrap_or_else(|_| {
            let t = build_canonical_ksgns(&phi).unwrap();
            let n = verify_truncating_net(&phi, &t, &[Element::unit(&spec)], NetOrder::Chain, 1e-9).unwrap();
            (t, n)
        });
        let q = build_quotient_module(&phi, &t, &net, &Element::unit(&target), 1e-9).unwrap();
        assert!(q.report().get("prop7.4/isometry").unwrap().residual < 1e-8);
        let mut sampler = CpFamilySampler::new(&t, 0.5, 5).unwrap();
        for _ in 0..6 {
            let rho = sampler.sample_f();
            let rep = q.check_dominated(&t, &rho, 1e-8);
            assert!(rep.all_pass(), "{}", rep.summary());
        }
    }

    #[test]
    fn core_approximation_trivial() {
        let phi = identity_weight(&[2]);
        let spec = phi.source().clone();
        let t = build_canonical_ksgns(&phi).unwrap();
        let net = verify_truncating_net(&phi, &t, &[Element::unit(&spec)], NetOrder::Chain, 1e-9).unwrap();
        let a = spec.basis_element(1);
        let approx = core_approximation(&t, &net, &spec.basis(), &a, ApproxMode::Exact, 1e-3).unwrap();
        assert!(approx.steps[0].element.distance(&a) < 1e-12);
    }

    #[test]
    fn core_approximation_slack_for_null_element() {
        // φ(x) = q x q has Λ(a) = 0 for a = a(1 − q).
        let spec = AlgebraSpec::of(&[2]);
        let q = Element::from_blocks(
            &spec,
            vec![Mat::from_diagonal(&Vector::from_vec(vec![real(1.0), real(0.0)]))],
        )
        .unwrap();
        let map = CpMap::from_fn(&spec, &spec, |x| &(&q * x) * &q);
        let phi = Weight::everywhere(map);
        let t = build_canonical_ksgns(&phi).unwrap();
        let net = verify_truncating_net(&phi, &t, &[Element::unit(&spec)], NetOrder::Chain, 1e-9).unwrap();
        let a = spec.basis_element(spec.basis_index(0, 0, 1));
        assert!(t.lambda_of(&a).unwrap().op_norm() < 1e-12);
        assert!(matches!(
            core_approximation(&t, &net, &spec.basis(), &a, ApproxMode::Exact, 1e-3),
            Err(Error::ZeroLambdaExactMode)
        ));
        assert!(matches!(
            core_approximation(&t, &net, &spec.basis(), &a, ApproxMode::Slack(0.0), 1e-3),
            Err(Error::SlackTooSmall { .. })
        ));
        let approx = core_approximation(&t, &net, &spec.basis(), &a, ApproxMode::Slack(1.0), 1e-3).unwrap();
        let rep = check_core_approximation(&t, &approx, &phi.target().basis(), 1e-3);
        assert!(rep.all_pass(), "{}", rep.summary());
    }

    #[test]
    fn core_approximation_random_converges() {
        let mut rng = substream(10, "core-random");
        let spec = AlgebraSpec::of(&[2, 1]);
        let target = AlgebraSpec::of(&[2]);
        let phi = block_weight(&mut rng, &spec, &target);
        let (t, net) = regular_data(&phi, 1e-9).unwrap();
        let k: Vec<Element> = (0..spec.dim() + 2).map(|_| random::gaussian_element(&mut rng, &spec)).collect();
        let a = random::gaussian_element(&mut rng, &spec);
        let approx = core_approximation(&t, &net, &k, &a, ApproxMode::Exact, 1e-6).unwrap();
        let rep = check_core_approximation(&t, &approx, &target.basis(), 1e-6);
        assert!(rep.all_pass(), "{}", rep.summary());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn kernel_certificate_holds(seed in 0u64..1000) {
            let mut rng = substream(seed, "kernel-prop");
            let spec = random::spec(&mut rng, 2, 2);
            let target = random::spec(&mut rng, 2, 2);
            let phi = Weight::everywhere(CpMap::random(&mut rng, &spec, &target, 2));
            let t = build_canonical_ksgns(&phi).unwrap();
            let seed = SeedData::from_triplet(&phi, &t, &[0.3, 1.0]).unwrap();
            let c = construct_weight(&seed, 1e-9).unwrap();
            prop_assert!(c.kernel_residual <= 1e-9 * (1.0 + phi.norm()));
            prop_assert!(c.weight.map().distance(phi.map()) <= 1e-9 * (1.0 + phi.norm()));
        }
    }
}
