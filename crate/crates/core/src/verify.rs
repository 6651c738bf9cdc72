//! Convergence utilities for operator families, the dominated-form
//! reconstruction on a GNS space, and the global monitor for the inequality
//! `‖Tv‖² ≤ ‖T‖ ‖⟨Tv, v⟩‖`.
//!
//! The convergence checks take arbitrary Hilbert modules; the C*-algebra
//! versions are the same calls on `ModuleRep::free(B)`.

use crate::algebra::{AlgebraSpec, Element};
use crate::error::{Error, Result};
use crate::hmodule::ModuleMap;
use crate::linalg::{self, real, Mat, Vector, C};
use crate::report::Report;

/// Linear functional on `A`, stored by its values on the matrix-unit basis.
#[derive(Clone, Debug)]
pub struct Functional {
    spec: AlgebraSpec,
    values: Vector,
}

impl Functional {
    pub fn new(spec: &AlgebraSpec, values: Vector) -> Result<Self> {
        if values.len() != spec.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} functional values for an algebra of dimension {}",
                values.len(),
                spec.dim()
            )));
        }
        Ok(Functional { spec: spec.clone(), values })
    }

    pub fn from_fn(spec: &AlgebraSpec, f: impl Fn(&Element) -> C) -> Self {
        let values = Vector::from_iterator(spec.dim(), spec.basis().iter().map(f));
        Functional { spec: spec.clone(), values }
    }

    pub fn zero(spec: &AlgebraSpec) -> Self {
        Functional { spec: spec.clone(), values: Vector::zeros(spec.dim()) }
    }

    /// `Tr` summed over all blocks.
    pub fn trace(spec: &AlgebraSpec) -> Self {
        Self::from_fn(spec, |x| x.faithful_trace())
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn values(&self) -> &Vector {
        &self.values
    }

    pub fn eval(&self, x: &Element) -> C {
        self.values.iter().zip(x.coords().iter()).map(|(v, c)| v * c).sum()
    }

    pub fn scale(&self, z: f64) -> Functional {
        Functional { spec: self.spec.clone(), values: &self.values * real(z) }
    }

    /// `[θ(b_j* b_i)]_{j,i}`.
    pub fn gram(&self, elems: &[Element]) -> Mat {
        let k = elems.len();
        let mut g = Mat::zeros(k, k);
        for j in 0..k {
            let bj = elems[j].adjoint();
            for i in 0..k {
                g[(j, i)] = self.eval(&(&bj * &elems[i]));
            }
        }
        g
    }

    pub fn distance(&self, other: &Functional) -> f64 {
        (&self.values - &other.values).camax()
    }
}

/// `(π, H, v)` for a positive functional, with `H` carried in orthonormal
/// coordinates.
#[derive(Clone, Debug)]
pub struct GnsData {
    theta: Functional,
    class: Mat,
    pi: Vec<Mat>,
    v: Vector,
    report: Report,
}

impl GnsData {
    pub fn theta(&self) -> &Functional {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.class.nrows()
    }

    /// Map from basis coordinates of `A` to `H`.
    pub fn class_map(&self) -> &Mat {
        &self.class
    }

    pub fn class_of(&self, a: &Element) -> Vector {
        &self.class * a.coords()
    }

    /// `π(e_α)` for each basis index.
    pub fn pi_basis(&self) -> &[Mat] {
        &self.pi
    }

    pub fn pi(&self, x: &Element) -> Mat {
        let d = self.dim();
        let mut m = Mat::zeros(d, d);
        for (c, p) in x.coords().iter().zip(&self.pi) {
            if c.norm() != 0.0 {
                m += p * *c;
            }
        }
        m
    }

    pub fn cyclic_vector(&self) -> &Vector {
        &self.v
    }

    pub fn report(&self) -> &Report {
        &self.report
    }
}

fn psd_floor(m: &Mat) -> f64 {
    1e-10 * linalg::spec_norm(m).max(1.0)
}

pub fn gns(theta: &Functional) -> Result<GnsData> {
    let spec = theta.spec().clone();
    let basis = spec.basis();
    let g = theta.gram(&basis);
    let (vals, vecs) = linalg::herm_eig(&g);
    let floor = psd_floor(&g);
    let lo = vals.first().copied().unwrap_or(0.0);
    if lo < -floor || linalg::hermitian_residual(&g) > floor {
        return Err(Error::NotPositiveFunctional { min_eigenvalue: lo });
    }
    let top = vals.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| top > 0.0 && vals[k] > linalg::RANK_REL * top).collect();
    let n = spec.dim();
    let r = keep.len();
    let mut class = Mat::zeros(r, n);
    let mut lift = Mat::zeros(n, r);
    for (j, &k) in keep.iter().enumerate() {
        let s = vals[k].sqrt();
        let col = vecs.column(k);
        class.set_row(j, &(col.adjoint() * real(s)));
        lift.set_column(j, &(col * real(1.0 / s)));
    }
    let pi: Vec<Mat> = basis.iter().map(|x| &class * x.left_mul_matrix() * &lift).collect();
    let v = &class * Element::unit(&spec).coords();

    let mut report = Report::new();
    let mut reproduce: f64 = 0.0;
    let mut hom: f64 = 0.0;
    let mut orbit = Vec::with_capacity(n);
    for (x, p) in basis.iter().zip(&pi) {
        let pv = p * &v;
        reproduce = reproduce.max((theta.eval(x) - v.dotc(&pv)).norm());
        hom = hom.max(linalg::max_abs(&(p * &class - &class * x.left_mul_matrix())));
        orbit.push(pv);
    }
    let scale = top.max(1.0);
    report.bound("gns/reproduce", reproduce, 1e-10 * scale);
    report.bound("gns/homomorphism", hom, 1e-10 * scale.sqrt());
    let cyclic_rank = if r == 0 { 0 } else { linalg::rank(&linalg::columns_to_mat(r, &orbit)) };
    report.flag(
        "gns/cyclic",
        cyclic_rank == r,
        Some(serde_json::json!({ "rank": cyclic_rank, "dim": r })),
    );
    Ok(GnsData { theta: theta.clone(), class, pi, v, report })
}

/// A sesquilinear form on a left ideal `N`, linear in the first slot,
/// stored as `values[(j, i)] = s(b_i, b_j)` over a basis of `N`.
#[derive(Clone, Debug)]
pub struct SesquilinearForm {
    ideal: Vec<Element>,
    values: Mat,
    theta: Functional,
}

impl SesquilinearForm {
    pub fn new(ideal: Vec<Element>, values: Mat, theta: Functional) -> Result<Self> {
        let k = ideal.len();
        if values.shape() != (k, k) {
            return Err(Error::ShapeMismatch("form values must be square over the ideal basis".into()));
        }
        if ideal.iter().any(|b| b.spec() != *theta.spec()) {
            return Err(Error::ShapeMismatch("ideal basis outside the algebra of the functional".into()));
        }
        Ok(SesquilinearForm { ideal, values, theta })
    }

    /// `s(b₁, b₂) = c·θ(b₂* b₁)`.
    pub fn scaled_theta(ideal: Vec<Element>, theta: Functional, c: f64) -> Self {
        let values = theta.gram(&ideal) * real(c);
        SesquilinearForm { ideal, values, theta }
    }

    pub fn ideal(&self) -> &[Element] {
        &self.ideal
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn theta(&self) -> &Functional {
        &self.theta
    }

    fn basis_mat(&self) -> Mat {
        let n = self.theta.spec().dim();
        let cols: Vec<Vector> = self.ideal.iter().map(|b| b.coords()).collect();
        linalg::columns_to_mat(n, &cols)
    }

    /// `(closure residual, covariance residual)` over the basis of `A`.
    pub fn covariance_residuals(&self) -> (f64, f64) {
        let b = self.basis_mat();
        let bp = linalg::pinv(&b);
        let spec = self.theta.spec().clone();
        let mut closure: f64 = 0.0;
        let mut cov: f64 = 0.0;
        for a in spec.basis() {
            let la = a.left_mul_matrix();
            let las = a.adjoint().left_mul_matrix();
            let img = &la * &b;
            let c = &bp * &img;
            closure = closure.max(linalg::max_abs(&(&b * &c - &img)));
            let imgs = &las * &b;
            let cs = &bp * &imgs;
            closure = closure.max(linalg::max_abs(&(&b * &cs - &imgs)));
            // s(a b_i, b_j) = Σ_k c_{ki} s(b_k, b_j); s(b_i, a* b_j) = Σ_k conj(c*_{kj}) s(b_i, b_k)
            let left = &self.values * &c;
            let right = cs.adjoint() * &self.values;
            cov = cov.max(linalg::max_abs(&(left - right)));
        }
        (closure, cov)
    }

    /// Smallest eigenvalue of `[θ(b_j* b_i)] − [s(b_i, b_j)]`.
    pub fn domination_slack(&self) -> f64 {
        let g = self.theta.gram(&self.ideal);
        linalg::min_eig(&(g - &self.values))
    }
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub omega: Functional,
    /// `T` on the GNS space of `θ`, in orthonormal coordinates.
    pub t: Mat,
    pub gns: GnsData,
    pub report: Report,
}

/// Builds `ω(x) = ⟨Tπ(x)v, v⟩` from a dominated form on a left ideal.
pub fn reconstruct_omega(s: &SesquilinearForm) -> Result<Reconstruction> {
    let g_theta = s.theta.gram(&s.ideal);
    let scale = linalg::spec_norm(&g_theta).max(linalg::spec_norm(&s.values)).max(1.0);
    let tol = 1e-10 * scale;
    let slack = s.domination_slack();
    if slack < -tol {
        return Err(Error::DominationViolated { slack });
    }
    let gns = gns(&s.theta)?;
    let d = gns.dim();
    let mut report = Report::new();
    report.extend(gns.report.clone());

    report.bound("lemA6/self-adjoint", linalg::hermitian_residual(&s.values), tol);
    report.floor("lemA6/positive", linalg::min_eig(&s.values), tol);
    report.floor("lemA6/domination", slack, tol);
    let (closure, cov) = s.covariance_residuals();
    report.bound("lemA6/left-ideal", closure, tol);
    report.bound("lemA6/covariance", cov, tol);

    let x = &gns.class * s.basis_mat();
    let xp = linalg::pinv(&x);
    let t = linalg::hermitian_part(&(xp.adjoint() * &s.values * &xp));

    report.bound("lemA6/form", linalg::max_abs(&(x.adjoint() * &t * &x - &s.values)), tol);
    report.floor("lemA6/t-positive", linalg::min_eig(&t), tol);
    let one = Mat::identity(d, d);
    report.floor("lemA6/t-contraction", linalg::min_eig(&(&one - &t)), tol);
    let comm = gns
        .pi
        .iter()
        .map(|p| linalg::max_abs(&(&t * p - p * &t)))
        .fold(0.0, f64::max);
    report.bound("lemA6/commutant", comm, tol);

    let tv = t.adjoint() * &gns.v;
    let omega = Functional {
        spec: s.theta.spec.clone(),
        values: Vector::from_iterator(gns.pi.len(), gns.pi.iter().map(|p| tv.dotc(&(p * &gns.v)))),
    };
    let og = omega.gram(&s.ideal);
    report.bound("lemA6/values", linalg::max_abs(&(og - &s.values)), tol);
    let basis = s.theta.spec.basis();
    let diff = s.theta.gram(&basis) - omega.gram(&basis);
    report.floor("lemA6/dominated", linalg::min_eig(&diff), tol);
    report.floor("lemA6/omega-positive", linalg::min_eig(&omega.gram(&basis)), tol);
    Ok(Reconstruction { omega, t, gns, report })
}

/// Residual chains of a dominated family against its candidate limit.
#[derive(Clone, Debug)]
pub struct ConvergenceProfile {
    /// `max_v ‖⟨Tv,v⟩ − ⟨T_i v,v⟩‖`.
    pub weak: Vec<f64>,
    /// `max_v ‖Tv − T_i v‖`.
    pub strong: Vec<f64>,
    /// Worst excess of `‖Tv − T_i v‖² ≤ 2‖T‖·‖⟨Tv,v⟩ − ⟨T_i v,v⟩‖`.
    pub bound_excess: f64,
}

impl ConvergenceProfile {
    fn chain_ok(chain: &[f64], tol: f64) -> bool {
        chain.windows(2).all(|w| w[1] <= w[0] + tol) && chain.last().is_none_or(|&x| x <= tol)
    }

    pub fn converges(&self, tol: f64) -> bool {
        self.bound_excess <= tol
            && Self::chain_ok(&self.weak, tol)
            && Self::chain_ok(&self.strong, tol)
    }
}

fn check_domination(lower: &ModuleMap, upper: &ModuleMap, tol: f64) -> Result<ModuleMap> {
    let d = upper.sub(lower)?;
    let scale = upper.op_norm().max(lower.op_norm()).max(1.0);
    let slack = d.min_eigenvalue();
    if slack < -tol * scale || d.self_adjoint_residual() > tol * scale {
        return Err(Error::DominationViolated { slack });
    }
    Ok(d)
}

pub fn convergence_profile(t_list: &[ModuleMap], t: &ModuleMap, probes: &[Vector], tol: f64) -> Result<ConvergenceProfile> {
    let e = t.source().clone();
    let norm_t = t.op_norm();
    let mut weak = Vec::with_capacity(t_list.len());
    let mut strong = Vec::with_capacity(t_list.len());
    let mut excess: f64 = 0.0;
    for ti in t_list {
        let d = check_domination(ti, t, tol)?;
        let mut w: f64 = 0.0;
        let mut s: f64 = 0.0;
        for v in probes {
            let dv = d.apply(v);
            let wi = e.inner_unchecked(&dv, v).norm();
            let si = e.vec_norm_sq(&dv);
            excess = excess.max(si - 2.0 * norm_t * wi - 1e-12 * (1.0 + si));
            inequality_monitor::observe(&d, v);
            w = w.max(wi);
            s = s.max(si.sqrt());
        }
        weak.push(w);
        strong.push(s);
    }
    Ok(ConvergenceProfile { weak, strong, bound_excess: excess.max(0.0) })
}

/// Whether `T_i → T` strongly, decided through the weak residuals and the
/// inequality linking the two chains.
pub fn strong_convergence_equiv(t_list: &[ModuleMap], t: &ModuleMap, probes: &[Vector], tol: f64) -> Result<bool> {
    Ok(convergence_profile(t_list, t, probes, tol)?.converges(tol))
}

/// Certifies an increasing positive family and returns its last element.
pub fn monotone_limit(t_list: &[ModuleMap], probes: &[Vector], tol: f64) -> Result<ModuleMap> {
    let Some(last) = t_list.last() else {
        return Err(Error::Invalid("empty family".into()));
    };
    let scale = last.op_norm().max(1.0);
    let first = &t_list[0];
    let m = first.min_eigenvalue();
    if m < -tol * scale {
        return Err(Error::NotMonotone { index: 0, slack: m });
    }
    for (i, w) in t_list.windows(2).enumerate() {
        let d = w[1].sub(&w[0])?;
        let slack = d.min_eigenvalue();
        if slack < -tol * scale || d.self_adjoint_residual() > tol * scale {
            return Err(Error::NotMonotone { index: i + 1, slack });
        }
    }
    let e = last.source().clone();
    for v in probes {
        let mut prev = f64::NEG_INFINITY;
        for (i, ti) in t_list.iter().enumerate() {
            let x = e.inner_unchecked(&ti.apply(v), v);
            let n = x.norm();
            if n < prev - tol * scale * (1.0 + n) {
                return Err(Error::NotMonotone { index: i, slack: n - prev });
            }
            prev = n;
        }
        for (i, ti) in t_list.iter().enumerate() {
            for tj in &t_list[i + 1..] {
                let d = tj.sub(ti)?;
                let ex = inequality_monitor::observe(&d, v);
                let dv = d.apply(v);
                if ex > 1e-12 * (1.0 + e.vec_norm_sq(&dv)) {
                    return Err(Error::CertificationFailed(format!("Cauchy bound exceeded by {ex:e}")));
                }
            }
        }
    }
    Ok(last.clone())
}

pub mod inequality_monitor {
    //! Process-wide record of the worst violation of `‖Tv‖² ≤ ‖T‖ ‖⟨Tv,v⟩‖`
    //! seen on any positive operator and probe vector.

    use crate::hmodule::ModuleMap;
    use crate::linalg::Vector;
    use std::sync::atomic::{AtomicU64, Ordering};

    static MAX_VIOLATION: AtomicU64 = AtomicU64::new(0);
    static OBSERVATIONS: AtomicU64 = AtomicU64::new(0);

    /// Evaluates the inequality for positive `t` at `v` and records the
    /// excess relative to `max(1, ‖Tv‖²)`.
    pub fn observe(t: &ModuleMap, v: &Vector) -> f64 {
        let e = t.source();
        let tv = t.apply(v);
        let lhs = e.vec_norm_sq(&tv);
        let rhs = t.op_norm() * e.inner_unchecked(&tv, v).norm();
        let excess = (lhs - rhs).max(0.0) / lhs.max(1.0);
        OBSERVATIONS.fetch_add(1, Ordering::Relaxed);
        MAX_VIOLATION.fetch_max(excess.to_bits(), Ordering::Relaxed);
        excess
    }

    /// Observes every basis vector of the source module.
    pub fn observe_basis(t: &ModuleMap) -> f64 {
        let d = t.source().dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            let mut v = Vector::zeros(d);
            v[i] = crate::linalg::real(1.0);
            worst = worst.max(observe(t, &v));
        }
        worst
    }

    pub fn max_violation() -> f64 {
        f64::from_bits(MAX_VIOLATION.load(Ordering::Relaxed))
    }

    pub fn observations() -> u64 {
        OBSERVATIONS.load(Ordering::Relaxed)
    }
}
