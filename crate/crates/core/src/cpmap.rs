//! Completely positive maps and the family of maps dominated by a KSGNS
//! construction `(E, Λ, π)`: `ρ(a₂* a₁) = Λ(a₂)* T_ρ Λ(a₁)` with `T_ρ ≥ 0`.
//!
//! Every linear map into a finite-dimensional algebra is strict, so
//! membership in the dominated family reduces to the operator equation.

use crate::algebra::{AlgebraSpec, Element};
use crate::error::{Error, Result};
use crate::hmodule::{average_over_groups, random_hermitian, ModuleMap};
use crate::ksgns::{form_values, scalar_form, KsgnsTriplet};
use crate::linalg::{self, real, Mat, Vector};
use crate::random::{self, Rng64};
use rand::Rng;
use serde_json::json;

/// A linear map `A → B` stored as its matrix in the matrix-unit bases.
#[derive(Clone, Debug)]
pub struct CpMap {
    source: AlgebraSpec,
    target: AlgebraSpec,
    mat: Mat,
}

impl CpMap {
    /// Map sending the `α`-th matrix unit of `A` to `coeffs[α]`.
    pub fn new(source: &AlgebraSpec, target: &AlgebraSpec, coeffs: &[Element]) -> Result<Self> {
        if coeffs.len() != source.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a source of dimension {}",
                coeffs.len(),
                source.dim()
            )));
        }
        let mut mat = Mat::zeros(target.dim(), source.dim());
        for (alpha, c) in coeffs.iter().enumerate() {
            if c.spec() != *target {
                return Err(Error::ShapeMismatch("coefficient outside the target".into()));
            }
            mat.set_column(alpha, &c.coords());
        }
        Ok(CpMap {
            source: source.clone(),
            target: target.clone(),
            mat,
        })
    }

    pub fn from_matrix(source: &AlgebraSpec, target: &AlgebraSpec, mat: Mat) -> Result<Self> {
        if mat.shape() != (target.dim(), source.dim()) {
            return Err(Error::ShapeMismatch("map matrix".into()));
        }
        Ok(CpMap {
            source: source.clone(),
            target: target.clone(),
            mat,
        })
    }

    pub fn from_fn(source: &AlgebraSpec, target: &AlgebraSpec, f: impl Fn(&Element) -> Element) -> Self {
        let coeffs: Vec<Element> = source.basis().iter().map(f).collect();
        Self::new(source, target, &coeffs).expect("values in the target")
    }

    pub fn zero(source: &AlgebraSpec, target: &AlgebraSpec) -> Self {
        CpMap {
            source: source.clone(),
            target: target.clone(),
            mat: Mat::zeros(target.dim(), source.dim()),
        }
    }

    pub fn identity(spec: &AlgebraSpec) -> Self {
        CpMap {
            source: spec.clone(),
            target: spec.clone(),
            mat: Mat::identity(spec.dim(), spec.dim()),
        }
    }

    /// Blockwise transpose; positive but not completely positive.
    pub fn transpose(spec: &AlgebraSpec) -> Self {
        Self::from_fn(spec, spec, |x| {
            let blocks = x.blocks().iter().map(|b| b.transpose()).collect();
            Element::from_blocks(spec, blocks).expect("same shape")
        })
    }

    /// `x ↦ ⊕_l Σ_r V_{lr}* x V_{lr}` with `x` embedded block-diagonally.
    pub fn kraus(source: &AlgebraSpec, target: &AlgebraSpec, ops: &[Vec<Mat>]) -> Result<Self> {
        if ops.len() != target.num_blocks() {
            return Err(Error::ShapeMismatch("one operator list per target block".into()));
        }
        let emb = source.embed_size();
        for (l, list) in ops.iter().enumerate() {
            if list.iter().any(|v| v.shape() != (emb, target.block_dims[l])) {
                return Err(Error::ShapeMismatch("Kraus operator".into()));
            }
        }
        Ok(Self::from_fn(source, target, |x| {
            let xb = x.to_block_diag();
            let blocks = ops
                .iter()
                .zip(&target.block_dims)
                .map(|(list, &n)| {
                    list.iter()
                        .fold(Mat::zeros(n, n), |acc, v| acc + v.adjoint() * &xb * v)
                })
                .collect();
            Element::from_blocks(target, blocks).expect("shape")
        }))
    }

    /// Random Kraus map with `count` operators per target block.
    pub fn random<R: Rng>(rng: &mut R, source: &AlgebraSpec, target: &AlgebraSpec, count: usize) -> Self {
        let emb = source.embed_size();
        let scale = 1.0 / ((emb * count.max(1)) as f64).sqrt();
        let ops: Vec<Vec<Mat>> = target
            .block_dims
            .iter()
            .map(|&n| {
                (0..count)
                    .map(|_| random::gaussian_mat(rng, emb, n) * real(scale))
                    .collect()
            })
            .collect();
        Self::kraus(source, target, &ops).expect("shapes")
    }

    pub fn source(&self) -> &AlgebraSpec {
        &self.source
    }

    pub fn target(&self) -> &AlgebraSpec {
        &self.target
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    /// Image of the `α`-th matrix unit.
    pub fn coeff(&self, alpha: usize) -> Element {
        Element::from_coords(&self.target, &self.mat.column(alpha).into_owned())
    }

    pub fn coeffs(&self) -> Vec<Element> {
        (0..self.source.dim()).map(|a| self.coeff(a)).collect()
    }

    pub fn apply(&self, x: &Element) -> Element {
        Element::from_coords(&self.target, &(&self.mat * x.coords()))
    }

    fn check_parallel(&self, other: &CpMap) -> Result<()> {
        if self.source != other.source || self.target != other.target {
            return Err(Error::ShapeMismatch("maps between different algebras".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &CpMap) -> Result<CpMap> {
        self.check_parallel(other)?;
        Ok(CpMap {
            mat: &self.mat + &other.mat,
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &CpMap) -> Result<CpMap> {
        self.check_parallel(other)?;
        Ok(CpMap {
            mat: &self.mat - &other.mat,
            ..self.clone()
        })
    }

    pub fn scale(&self, lambda: f64) -> CpMap {
        CpMap {
            mat: &self.mat * real(lambda),
            ..self.clone()
        }
    }

    pub fn distance(&self, other: &CpMap) -> f64 {
        linalg::max_abs(&(&self.mat - &other.mat))
    }

    /// `ρ₁ ⊗ ρ₂ : A₁ ⊗ A₂ → B₁ ⊗ B₂`.
    pub fn kron(&self, other: &CpMap) -> CpMap {
        let source = self.source.tensor(&other.source);
        let target = self.target.tensor(&other.target);
        let mut coeffs = vec![Element::zero(&target); source.dim()];
        for a in 0..self.source.dim() {
            let ca = self.coeff(a);
            for b in 0..other.source.dim() {
                coeffs[self.source.tensor_index(&other.source, a, b)] = ca.kron(&other.coeff(b));
            }
        }
        CpMap::new(&source, &target, &coeffs).expect("product shapes")
    }

    /// `max_α ‖ρ(e_α*) − ρ(e_α)*‖`.
    pub fn star_residual(&self) -> f64 {
        (0..self.source.dim())
            .map(|a| self.coeff(self.source.adjoint_index(a)).distance(&self.coeff(a).adjoint()))
            .fold(0.0, f64::max)
    }

    /// For each block of `B`, the amplified Gram `[ρ(e_j* e_i)]_{j,i}` over the
    /// matrix units `e_i` of `A`, as a `(dim A · n_l)`-square matrix.
    pub fn amplified_gram(&self) -> Vec<Mat> {
        let a = &self.source;
        let da = a.dim();
        let coeffs = self.coeffs();
        let labels: Vec<(usize, usize, usize)> = (0..da).map(|i| a.basis_label(i)).collect();
        self.target
            .block_dims
            .iter()
            .enumerate()
            .map(|(l, &n)| {
                let mut g = Mat::zeros(da * n, da * n);
                for (j, &(kj, rj, cj)) in labels.iter().enumerate() {
                    for (i, &(ki, ri, ci)) in labels.iter().enumerate() {
                        // e_j* e_i = E_{cj rj} E_{ri ci}
                        if kj == ki && rj == ri {
                            let blk = coeffs[a.basis_index(kj, cj, ci)].block(l).clone();
                            g.view_mut((j * n, i * n), (n, n)).copy_from(&blk);
                        }
                    }
                }
                g
            })
            .collect()
    }
}

/// Minimal violation data of complete positivity.
#[derive(Clone, Debug)]
pub struct CpWitness {
    pub min_eigenvalue: f64,
    pub hermitian_residual: f64,
    /// Block of `B` carrying the violation.
    pub block: usize,
    /// Eigenvector over `(A-basis index, row)`: the tuple `b_i` has first
    /// column `vector[i·n + ·]` in that block.
    pub vector: Vector,
}

impl CpWitness {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "min_eigenvalue": self.min_eigenvalue,
            "hermitian_residual": self.hermitian_residual,
            "block": self.block,
            "vector": self.vector.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        })
    }
}

/// `None` if `ρ` is completely positive within `tol`, else a witness.
pub fn cp_witness(rho: &CpMap, tol: f64) -> Option<CpWitness> {
    let grams = rho.amplified_gram();
    let scale = grams.iter().map(linalg::spec_norm).fold(1.0, f64::max);
    let mut worst: Option<CpWitness> = None;
    for (l, g) in grams.iter().enumerate() {
        let herm = linalg::hermitian_residual(g);
        let (vals, vecs) = linalg::herm_eig(g);
        let min = vals.first().copied().unwrap_or(0.0);
        if min < -tol * scale || herm > tol * scale {
            let better = worst.as_ref().is_none_or(|w| min < w.min_eigenvalue);
            if better {
                worst = Some(CpWitness {
                    min_eigenvalue: min,
                    hermitian_residual: herm,
                    block: l,
                    vector: vecs.column(0).into_owned(),
                });
            }
        }
    }
    worst
}

pub fn is_completely_positive(rho: &CpMap, tol: f64) -> bool {
    cp_witness(rho, tol).is_none()
}

/// `Ok` if completely positive, else `NotCompletelyPositive` with the witness.
pub fn check_completely_positive(rho: &CpMap, tol: f64) -> Result<()> {
    match cp_witness(rho, tol) {
        None => Ok(()),
        Some(w) => Err(Error::NotCompletelyPositive {
            min_eigenvalue: w.min_eigenvalue,
            witness: w.to_json(),
        }),
    }
}

/// Independent CP oracle: the smallest relative eigenvalue of
/// `Σ b_j* ρ(a_j* a_i) b_i` over random tuples of length up to `dim A`.
pub fn random_sum_min<R: Rng>(rho: &CpMap, rng: &mut R, tuples: usize) -> f64 {
    let kmax = rho.source().dim().max(1);
    let mut worst = f64::INFINITY;
    for _ in 0..tuples {
        let k = rng.random_range(1..=kmax);
        let a: Vec<Element> = (0..k).map(|_| random::gaussian_element(rng, rho.source())).collect();
        let b: Vec<Element> = (0..k).map(|_| random::gaussian_element(rng, rho.target())).collect();
        let mut s = Element::zero(rho.target());
        for j in 0..k {
            let bj = b[j].adjoint();
            for i in 0..k {
                let v = rho.apply(&(&a[j].adjoint() * &a[i]));
                s = &s + &(&(&bj * &v) * &b[i]);
            }
        }
        worst = worst.min(s.min_eigenvalue() / s.norm().max(1.0));
    }
    worst
}

/// Residuals of a recovered dominated map.
#[derive(Clone, Debug, Default)]
pub struct SolveDiagnostics {
    pub identity: f64,
    pub commutator: f64,
    pub min_eigenvalue: f64,
    pub v_solve: f64,
    pub norm_identity: f64,
    pub dilation: f64,
}

/// `ρ` together with `T_ρ ∈ L(E)` and `v_ρ ∈ L(B, E)`.
#[derive(Clone, Debug)]
pub struct DominatedMap {
    rho: CpMap,
    t: ModuleMap,
    v: ModuleMap,
    null_dim: usize,
    diagnostics: SolveDiagnostics,
}

impl DominatedMap {
    pub fn rho(&self) -> &CpMap {
        &self.rho
    }

    pub fn t(&self) -> &ModuleMap {
        &self.t
    }

    pub fn v(&self) -> &ModuleMap {
        &self.v
    }

    /// Dimension of the solution set of the `T`-equation.
    pub fn null_dim(&self) -> usize {
        self.null_dim
    }

    pub fn diagnostics(&self) -> &SolveDiagnostics {
        &self.diagnostics
    }

    /// `λρ`, with `T_{λρ} = λT_ρ` and `v_{λρ} = √λ v_ρ`.
    pub fn scaled(&self, lambda: f64) -> DominatedMap {
        DominatedMap {
            rho: self.rho.scale(lambda),
            t: self.t.scale(lambda),
            v: self.v.scale(lambda.max(0.0).sqrt()),
            null_dim: self.null_dim,
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// The dominated map with a given `T ∈ π(A)'`, `T ≥ 0`:
    /// `v = T^{1/2} Λ(p)` and `ρ(x) = v* π(x) v`.
    pub fn from_operator(triplet: &KsgnsTriplet, t: &ModuleMap, tol: f64) -> Result<DominatedMap> {
        let commutator = commutator_residual(triplet, t);
        let scale = t.op_norm().max(1.0);
        let min = if triplet.dim() == 0 { 0.0 } else { t.min_eigenvalue() };
        if commutator > tol * scale || min < -tol * scale || t.self_adjoint_residual() > tol * scale {
            return Err(Error::NotInH {
                residual: 0.0,
                commutator,
                min_eigenvalue: min,
            });
        }
        let sqrt = t.psd_sqrt();
        let v = sqrt.then(&triplet.lambda_of(triplet.p())?);
        let vadj = v.adjoint();
        let source = triplet.source();
        let rho = CpMap::from_fn(&source, triplet.target(), |x| vadj.then(&triplet.pi_of(x).then(&v)).to_element());
        let w = triplet.span_matrix();
        let rk = linalg::rank(&w);
        Ok(DominatedMap {
            rho,
            t: t.clone(),
            v,
            null_dim: triplet.dim().pow(2) - rk * rk,
            diagnostics: SolveDiagnostics {
                commutator,
                min_eigenvalue: min,
                ..Default::default()
            },
        })
    }
}

fn commutator_residual(triplet: &KsgnsTriplet, t: &ModuleMap) -> f64 {
    triplet
        .pi()
        .iter()
        .map(|x| t.then(x).distance(&x.then(t)))
        .fold(0.0, f64::max)
}

/// Recovers `T_ρ` from `ρ(a₂* a₁) = Λ(a₂)* T Λ(a₁)` by a minimum-norm least
/// squares solve, then `v_ρ` from `π(a) v = T^{1/2} Λ(a)`.
#[allow(non_snake_case)]
pub fn solve_T(rho: &CpMap, triplet: &KsgnsTriplet, tol: f64) -> Result<DominatedMap> {
    if *rho.source() != triplet.source() || rho.target() != triplet.target() {
        return Err(Error::ShapeMismatch("map and triplet act between different algebras".into()));
    }
    let e = triplet.module();
    let d = e.dim();
    let n = triplet.n_basis();
    let units = triplet.target().basis();
    let values = form_values(n, |x| rho.apply(x));
    let g = scalar_form(&values, &units);
    let w = triplet.span_matrix();
    let x = linalg::pinv(&w);
    let m = linalg::hermitian_part(&(x.adjoint() * &g * &x));
    let t = ModuleMap::new(e.clone(), e.clone(), e.h_inv() * &m)?;
    let rk = linalg::rank(&w);
    let null_dim = d * d - rk * rk;

    let scale = 1.0 + linalg::max_abs(&g);
    let lambdas = triplet.lambda();
    let tl: Vec<ModuleMap> = lambdas.iter().map(|l| t.then(l)).collect();
    let mut identity: f64 = 0.0;
    for (j, lj) in lambdas.iter().enumerate() {
        let lj_adj = lj.adjoint();
        for (i, tli) in tl.iter().enumerate() {
            identity = identity.max(values[j][i].distance(&lj_adj.then(tli).to_element()));
        }
    }
    let commutator = commutator_residual(triplet, &t);
    let min = if d == 0 { 0.0 } else { t.min_eigenvalue() };
    let fail = |residual: f64| Error::NotInH {
        residual,
        commutator,
        min_eigenvalue: min,
    };
    if identity > tol * scale || commutator > tol * scale || min < -tol * scale {
        return Err(fail(identity));
    }

    let sqrt = t.psd_sqrt();
    let r = n.len();
    let mb = triplet.free().dim();
    let mut stack = Mat::zeros(r * d, d);
    let mut rhs = Mat::zeros(r * d, mb);
    for (i, a) in n.iter().enumerate() {
        stack
            .rows_mut(i * d, d)
            .copy_from(&(e.h_sqrt() * triplet.pi_of(a).mat() * e.h_inv_sqrt()));
        rhs.rows_mut(i * d, d).copy_from(&(e.h_sqrt() * sqrt.then(&lambdas[i]).mat()));
    }
    let z = linalg::pinv(&stack) * &rhs;
    let v_solve = linalg::max_abs(&(&stack * &z - &rhs));
    let v = ModuleMap::new(triplet.free().clone(), e.clone(), e.h_inv_sqrt() * z)?;
    let rho_p = rho.apply(triplet.p()).norm();
    let norm_identity = (v.op_norm().powi(2) - rho_p).abs();
    let vadj = v.adjoint();
    let dilation = triplet
        .m_basis()
        .iter()
        .map(|x| rho.apply(x).distance(&vadj.then(&triplet.pi_of(x).then(&v)).to_element()))
        .fold(0.0, f64::max);
    let worst = v_solve.max(norm_identity).max(dilation);
    if worst > tol * scale {
        return Err(fail(worst));
    }
    Ok(DominatedMap {
        rho: rho.clone(),
        t,
        v,
        null_dim,
        diagnostics: SolveDiagnostics {
            identity,
            commutator,
            min_eigenvalue: min,
            v_solve,
            norm_identity,
            dilation,
        },
    })
}

/// `ρ₁ ≤ ρ₂`, i.e. `ρ₂ − ρ₁` completely positive.
pub fn order_leq(rho1: &CpMap, rho2: &CpMap, tol: f64) -> bool {
    match rho2.sub(rho1) {
        Ok(diff) => is_completely_positive(&diff, tol),
        Err(_) => false,
    }
}

/// Both order criteria for dominated maps: complete positivity of the
/// difference and `T_{ρ₁} ≤ T_{ρ₂}`.
pub fn order_leq_dominated(d1: &DominatedMap, d2: &DominatedMap, tol: f64) -> (bool, bool) {
    let by_map = order_leq(&d1.rho, &d2.rho, tol);
    let by_t = match d2.t.sub(&d1.t) {
        Ok(diff) => {
            let scale = d1.t.op_norm().max(d2.t.op_norm()).max(1.0);
            diff.source().dim() == 0 || diff.min_eigenvalue() >= -tol * scale
        }
        Err(_) => false,
    };
    (by_map, by_t)
}

/// Operator-monotone map `t ↦ t/(1+t)` on positive inputs.
pub trait CayleyMonotone: Sized {
    fn cayley(&self, tol: f64) -> Result<Self>;
}

impl CayleyMonotone for ModuleMap {
    fn cayley(&self, tol: f64) -> Result<Self> {
        if self.source().dim() == 0 {
            return Ok(self.clone());
        }
        if !self.positive_part_check(tol) {
            return Err(Error::NotPositive {
                min_eigenvalue: self.min_eigenvalue(),
            });
        }
        Ok(self.apply_fn(|t| {
            let t = t.max(0.0);
            t / (1.0 + t)
        }))
    }
}

impl CayleyMonotone for Element {
    fn cayley(&self, tol: f64) -> Result<Self> {
        if !self.is_positive(tol) {
            return Err(Error::NotPositive {
                min_eigenvalue: self.min_eigenvalue(),
            });
        }
        Ok(self.apply_hermitian(|t| {
            let t = t.max(0.0);
            t / (1.0 + t)
        }))
    }
}

pub fn cayley_monotone<X: CayleyMonotone>(x: &X, tol: f64) -> Result<X> {
    x.cayley(tol)
}

/// Result of joining two members of the family.
#[derive(Clone, Debug)]
pub struct Join {
    /// The map `ρ = Λ* T Λ` with `T = (S₁+S₂)/(1+S₁+S₂)`.
    pub map: DominatedMap,
    /// Scale with `λρ ≥ λ₁ρ₁, λ₂ρ₂`.
    pub lambda: f64,
    pub gamma: f64,
    pub s1: ModuleMap,
    pub s2: ModuleMap,
}

pub fn directed_join(
    triplet: &KsgnsTriplet,
    rho1: &DominatedMap,
    rho2: &DominatedMap,
    lambda1: f64,
    lambda2: f64,
    gamma: Option<f64>,
    tol: f64,
) -> Result<Join> {
    for l in [lambda1, lambda2] {
        if !(0.0..1.0).contains(&l) {
            return Err(Error::Invalid(format!("scale {l} outside [0, 1)")));
        }
    }
    let lower = lambda1.max(lambda2);
    let gamma = gamma.unwrap_or((1.0 + lower) / 2.0);
    if !(gamma > lower && gamma < 1.0) {
        return Err(Error::GammaOutOfRange { gamma, lower });
    }
    let d = triplet.dim();
    for r in [rho1, rho2] {
        if d > 0 && (r.t.min_eigenvalue() < -tol || r.t.max_eigenvalue() > 1.0 + tol) {
            return Err(Error::Invalid("T outside [0, 1]".into()));
        }
    }
    let s = |t: &ModuleMap| {
        t.apply_fn(|x| {
            let x = x.clamp(0.0, 1.0);
            gamma * x / (1.0 - gamma * x)
        })
    };
    let s1 = s(&rho1.t);
    let s2 = s(&rho2.t);
    let t = cayley_monotone(&s1.add(&s2)?, tol)?;
    let map = DominatedMap::from_operator(triplet, &t, tol.max(1e-9))?;
    Ok(Join {
        map,
        lambda: lower / gamma,
        gamma,
        s1,
        s2,
    })
}

/// Random members of `𝓕 = {ρ : T_ρ ≤ 1}` and `𝓖 = λ𝓕` for a fixed triplet.
/// Operators are drawn in `π(A)' ∩ [0, 1]` by averaging a random Hermitian
/// matrix over finite unitary groups generating the relevant algebras.
#[derive(Clone, Debug)]
pub struct CpFamilySampler<'a> {
    triplet: &'a KsgnsTriplet,
    lambda: f64,
    seed: u64,
    budget: usize,
    rng: Rng64,
    groups: Vec<Vec<Mat>>,
}

impl<'a> CpFamilySampler<'a> {
    pub fn new(triplet: &'a KsgnsTriplet, lambda: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::Invalid(format!("sampler scale {lambda} outside [0, 1)")));
        }
        let e = triplet.module();
        let mut groups: Vec<Vec<Mat>> = triplet
            .source()
            .block_groups()
            .iter()
            .map(|g| {
                g.iter()
                    .map(|u| e.h_sqrt() * triplet.pi_of(u).mat() * e.h_inv_sqrt())
                    .collect()
            })
            .collect();
        groups.extend(e.whitened_right_groups());
        Ok(CpFamilySampler {
            triplet,
            lambda,
            seed,
            budget: 16,
            rng: random::substream(seed, "cp-family"),
            groups,
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn triplet(&self) -> &'a KsgnsTriplet {
        self.triplet
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Random `T ∈ π(A)' ∩ L(E)` with `0 ≤ T ≤ 1`.
    pub fn sample_operator(&mut self) -> ModuleMap {
        let e = self.triplet.module();
        let d = e.dim();
        let y = random_hermitian(&mut self.rng, d);
        let p = average_over_groups(&y, &self.groups);
        let spectral = self.rng.random_range(0..8) == 0;
        let tw = if spectral {
            linalg::herm_fn(&p, |x| if x > 0.0 { 1.0 } else { 0.0 })
        } else {
            linalg::herm_fn(&p, |x| (1.0 + x.tanh()) / 2.0)
        };
        let m = e.h_inv_sqrt() * tw * e.h_sqrt();
        ModuleMap::new(e.clone(), e.clone(), m).expect("shape")
    }

    /// A member of `𝓕`.
    pub fn sample_f(&mut self) -> DominatedMap {
        let t = self.sample_operator();
        DominatedMap::from_operator(self.triplet, &t, 1e-8).expect("commutant sample")
    }

    /// A member of `𝓖`: `λρ` with `ρ ∈ 𝓕`.
    pub fn sample(&mut self) -> DominatedMap {
        self.sample_f().scaled(self.lambda)
    }

    /// `(1 − 10⁻ⁿ) φ`, with `T = (1 − 10⁻ⁿ)·1`.
    pub fn exhausting(&self, n: i32) -> DominatedMap {
        let t = ModuleMap::identity(self.triplet.module()).scale(1.0 - 10f64.powi(-n));
        DominatedMap::from_operator(self.triplet, &t, 1e-8).expect("scalar operator")
    }

    /// `φ` itself, `T = 1`.
    pub fn top(&self) -> DominatedMap {
        let t = ModuleMap::identity(self.triplet.module());
        DominatedMap::from_operator(self.triplet, &t, 1e-8).expect("identity operator")
    }
}

/// Decides whether `(b* ρ(a) b)_{ρ ∈ 𝓖}` converges to `x`: requires the
/// upper bound on every sampled member of `𝓖`, then for each `ε` in a fixed
/// grid an `η ∈ 𝓕` within `ε/2` of `x`, from which `ρ₀ = λη ∈ 𝓖` with
/// `λ = 1 − ε/(2‖x‖+2)` is within `ε`.
pub fn gs_limit_check(a: &Element, b: &Element, x: &Element, sampler: &mut CpFamilySampler, tol: f64) -> bool {
    let xs = x.norm();
    let eval = |rho: &CpMap| &(&b.adjoint() * &rho.apply(a)) * b;
    for _ in 0..sampler.budget() {
        let rho = sampler.sample();
        if (x - &eval(rho.rho())).min_eigenvalue() < -tol * (1.0 + xs) {
            return false;
        }
    }
    let mut candidates: Vec<Element> = Vec::new();
    for _ in 0..sampler.budget() {
        candidates.push(eval(sampler.sample_f().rho()));
    }
    for k in 1..=12 {
        candidates.push(eval(sampler.exhausting(k).rho()));
    }
    candidates.push(eval(sampler.top().rho()));
    for eps in [1e-2, 1e-4, 1e-6] {
        let lam = 1.0 - eps / (2.0 * xs + 2.0);
        let found = candidates
            .iter()
            .any(|eta| x.distance(eta) <= eps / 2.0 && x.distance(&eta.scale_real(lam)) <= eps);
        if !found {
            return false;
        }
    }
    true
}

/// `v ↦ ‖T^{1/2} Λ(a)‖² − ‖ρ(a*a)‖` over the `N` basis.
pub fn sqrt_norm_residual(d: &DominatedMap, triplet: &KsgnsTriplet) -> f64 {
    let sqrt = d.t.psd_sqrt();
    triplet
        .n_basis()
        .iter()
        .zip(triplet.lambda())
        .map(|(a, l)| (sqrt.then(l).op_norm().powi(2) - d.rho.apply(&(&a.adjoint() * a)).norm()).abs())
        .fold(0.0, f64::max)
}
