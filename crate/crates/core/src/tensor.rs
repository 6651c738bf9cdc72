//! Tensor products of regular weights.
//!
//! The product is built from a seed on `E₁ ⊗ E₂` with `N₀ = N₁ ⊙ N₂`,
//! `Λ₀ = Λ₁ ⊗ Λ₂` and the family `(T¹ ⊗ T², ρ¹ ⊗ ρ²)` over the product grid,
//! then certified like any constructed weight.

use crate::algebra::{AlgebraSpec, Element};
use crate::cpmap::{solve_T, CpFamilySampler, DominatedMap};
use crate::error::{Error, Result};
use crate::hmodule::{tensor_module, ModuleMap};
use crate::ksgns::{KsgnsTriplet, Weight};
use crate::linalg::{self, Mat};
use crate::regular::{construct_weight, regular_data, verify_truncating_net, SeedData, TruncatingNet};
use crate::report::Report;
use serde_json::json;
use std::sync::Arc;

/// A regular weight with its triplet and verified net.
#[derive(Clone, Debug)]
pub struct RegularWeight {
    pub weight: Weight,
    pub triplet: KsgnsTriplet,
    pub net: TruncatingNet,
}

impl RegularWeight {
    /// Canonical triplet and central partial-unit net of an everywhere-defined weight.
    pub fn canonical(weight: Weight, tol: f64) -> Result<Self> {
        let (triplet, net) = regular_data(&weight, tol)?;
        Ok(RegularWeight { weight, triplet, net })
    }
}

#[derive(Clone, Debug)]
pub struct TensorWeight {
    first: RegularWeight,
    second: RegularWeight,
    product: RegularWeight,
    report: Report,
}

impl TensorWeight {
    pub fn factors(&self) -> (&RegularWeight, &RegularWeight) {
        (&self.first, &self.second)
    }

    pub fn product(&self) -> &Weight {
        &self.product.weight
    }

    pub fn triplet(&self) -> &KsgnsTriplet {
        &self.product.triplet
    }

    pub fn net(&self) -> &TruncatingNet {
        &self.product.net
    }

    pub fn as_regular(&self) -> &RegularWeight {
        &self.product
    }

    /// Certification of the product construction and its net.
    pub fn report(&self) -> &Report {
        &self.report
    }

    /// `Λ₁(a₁) ⊗ Λ₂(a₂)` as a map from `B₁ ⊗ B₂` into `E₁ ⊗ E₂`.
    pub fn lambda_pair(&self, a1: &Element, a2: &Element) -> Result<Mat> {
        let l1 = self.first.triplet.lambda_of(a1)?;
        let l2 = self.second.triplet.lambda_of(a2)?;
        Ok(free_kron(
            self.first.weight.target(),
            self.second.weight.target(),
            l1.mat(),
            l2.mat(),
        ))
    }
}

/// Kronecker product of maps out of the free modules, with columns moved to
/// the matrix-unit order of `B₁ ⊗ B₂`.
fn free_kron(b1: &AlgebraSpec, b2: &AlgebraSpec, m1: &Mat, m2: &Mat) -> Mat {
    let k = m1.kronecker(m2);
    let mut out = Mat::zeros(k.nrows(), k.ncols());
    for x in 0..b1.dim() {
        for y in 0..b2.dim() {
            out.set_column(b1.tensor_index(b2, x, y), &k.column(x * b2.dim() + y));
        }
    }
    out
}

pub fn tensor_weight(f1: &RegularWeight, f2: &RegularWeight, tol: f64) -> Result<TensorWeight> {
    let (t1, t2) = (&f1.triplet, &f2.triplet);
    let (b1, b2) = (f1.weight.target(), f2.weight.target());
    let a = f1.weight.source().tensor(f2.weight.source());
    let e = Arc::new(tensor_module(t1.module(), t2.module()));
    let mut n0 = Vec::new();
    let mut lambda0 = Vec::new();
    for (x, lx) in t1.n_basis().iter().zip(t1.lambda()) {
        for (y, ly) in t2.n_basis().iter().zip(t2.lambda()) {
            n0.push(x.kron(y));
            lambda0.push(free_kron(b1, b2, lx.mat(), ly.mat()));
        }
    }
    let (n1, n2) = (f1.net.len(), f2.net.len());
    let mut family = Vec::with_capacity(n1 * n2);
    let mut units = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let t = f1.net.t()[i].kron(&f2.net.t()[j], &e, &e)?;
            family.push((t, f1.net.rho()[i].kron(&f2.net.rho()[j])));
            units.push(f1.net.u()[i].kron(&f2.net.u()[j]));
        }
    }
    let seed = SeedData::new(e, a, n0, lambda0, family)?;
    let construction = construct_weight(&seed, tol)?;
    let mut report = Report::new();
    report.extend_prefixed("def9.1/", construction.report);
    report.bound(
        "def9.1/dimension",
        (construction.triplet.dim() as f64 - (t1.dim() * t2.dim()) as f64).abs(),
        0.0,
    );
    let net = match verify_truncating_net(
        &construction.weight,
        &construction.triplet,
        &units,
        f1.net.order().product(n1, f2.net.order(), n2),
        tol,
    ) {
        Ok(net) => net,
        Err(r) => return Err(Error::CertificationFailed(format!("product net: {}", r.summary()))),
    };
    report.extend_prefixed("prop9.1/", net.report().clone());
    Ok(TensorWeight {
        first: f1.clone(),
        second: f2.clone(),
        product: RegularWeight {
            weight: construction.weight,
            triplet: construction.triplet,
            net,
        },
        report,
    })
}

/// `(φ₁ ⊗ φ₂)(a₁ ⊗ a₂) = φ₁(a₁) ⊗ φ₂(a₂)` and `Λ(a₁ ⊗ a₂) = Λ₁(a₁) ⊗ Λ₂(a₂)`
/// over basis pairs.
pub fn check_factorization(tw: &TensorWeight, tol: f64) -> Report {
    let mut rep = Report::new();
    let (f1, f2) = tw.factors();
    let scale = 1.0 + f1.weight.norm() * f2.weight.norm();
    let m1 = f1.triplet.m_basis();
    let m2 = f2.triplet.m_basis();
    let mut fact: f64 = 0.0;
    for x in &m1 {
        let px = f1.weight.eval(x);
        for y in &m2 {
            let want = px.kron(&f2.weight.eval(y));
            fact = fact.max(tw.product().eval(&x.kron(y)).distance(&want));
        }
    }
    rep.bound("corol9.1/factorization", fact, tol * scale);
    let mut lam: f64 = 0.0;
    for x in f1.triplet.n_basis() {
        for y in f2.triplet.n_basis() {
            let r = match (tw.triplet().lambda_of(&x.kron(y)), tw.lambda_pair(x, y)) {
                (Ok(l), Ok(m)) => linalg::max_abs(&(l.mat() - m)),
                _ => f64::INFINITY,
            };
            lam = lam.max(r);
        }
    }
    rep.bound("corol9.1/lambda", lam, tol * scale);
    rep.bound(
        "corol9.1/dimension",
        (tw.triplet().dim() as f64 - (f1.triplet.dim() * f2.triplet.dim()) as f64).abs(),
        0.0,
    );
    rep
}

/// `T_{ω₁ ⊗ ω₂} = T_{ω₁} ⊗ T_{ω₂}` by solving against the product triplet.
#[allow(non_snake_case)]
pub fn check_T_transport(tw: &TensorWeight, w1: &DominatedMap, w2: &DominatedMap, tol: f64) -> Report {
    let mut rep = Report::new();
    let e = tw.triplet().module();
    let rho = w1.rho().kron(w2.rho());
    let want = match w1.t().kron(w2.t(), e, e) {
        Ok(t) => t,
        Err(err) => {
            rep.flag("res9.1/transport", false, Some(json!({"error": err.to_string()})));
            return rep;
        }
    };
    match solve_T(&rho, tw.triplet(), tol) {
        Ok(d) => {
            rep.bound("res9.1/transport", d.t().distance(&want), 10.0 * tol);
            let (m1, m2) = (w1.t().max_eigenvalue(), w2.t().max_eigenvalue());
            if m1 < 1.0 && m2 < 1.0 {
                rep.floor("res9.1/in-G", 1.0 - d.t().max_eigenvalue(), 0.0);
            } else {
                rep.flag(
                    "res9.1/in-G",
                    true,
                    Some(json!({"skipped": "a factor has scale 1"})),
                );
            }
        }
        Err(err) => rep.flag("res9.1/transport", false, Some(json!({"error": err.to_string()}))),
    }
    rep
}

/// On the product grid of sampled members of `𝓖₁ × 𝓖₂`, `d*(ω₁ ⊗ ω₂)(c)d`
/// stays below `d*(φ₁ ⊗ φ₂)(c)d` and reaches it along `(1 − 10⁻ⁿ)φ₁ ⊗ (1 − 10⁻ⁿ)φ₂`.
pub fn check_product_convergence(
    tw: &TensorWeight,
    c: &Element,
    d: &Element,
    s1: &mut CpFamilySampler,
    s2: &mut CpFamilySampler,
    tol: f64,
) -> Report {
    let mut rep = Report::new();
    let dstar = d.adjoint();
    let limit = &(&dstar * &tw.product().eval(c)) * d;
    let scale = 1.0 + limit.norm();
    let eval = |w1: &DominatedMap, w2: &DominatedMap| {
        let rho = w1.rho().kron(w2.rho());
        &(&dstar * &rho.apply(c)) * d
    };
    let mut slack = f64::INFINITY;
    let budget = s1.budget().min(s2.budget());
    let grid: Vec<DominatedMap> = (0..budget).map(|_| s2.sample()).collect();
    for _ in 0..budget {
        let w1 = s1.sample();
        for w2 in &grid {
            slack = slack.min((&limit - &eval(&w1, w2)).min_eigenvalue());
        }
    }
    if slack.is_infinite() {
        slack = 0.0;
    }
    rep.floor("theo9.1/domination", slack, tol * scale);
    let gaps: Vec<f64> = (1..=12)
        .map(|n| limit.distance(&eval(&s1.exhausting(n), &s2.exhausting(n))))
        .collect();
    let increase = gaps.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    rep.bound("lem9.1/monotone", increase, tol * scale);
    let top = limit.distance(&eval(&s1.top(), &s2.top()));
    rep.bound("theo9.1/attainment", gaps.last().copied().unwrap_or(0.0).min(top), 1e2 * tol * scale);
    rep
}

/// `T` of `ω₁ ⊗ ω₂` when both factors are given by operators.
pub fn product_operator(tw: &TensorWeight, w1: &DominatedMap, w2: &DominatedMap) -> Result<ModuleMap> {
    let e = tw.triplet().module();
    w1.t().kron(w2.t(), e, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpmap::CpMap;
    use crate::linalg::real;
    use crate::random::{self, substream};

    fn canonical(map: CpMap) -> RegularWeight {
        RegularWeight::canonical(Weight::everywhere(map), 1e-9).unwrap()
    }

    #[test]
    fn identity_weights_multiply() {
        let spec = AlgebraSpec::of(&[2]);
        let f = canonical(CpMap::identity(&spec));
        let tw = tensor_weight(&f, &f, 1e-9).unwrap();
        assert!(tw.report().all_pass(), "{}", tw.report().summary());
        assert_eq!(tw.triplet().dim(), 16);
        let prod = spec.tensor(&spec);
        assert!(tw.product().map().distance(&CpMap::identity(&prod)) < 1e-9);
        assert!(check_factorization(&tw, 1e-9).all_pass());
    }

    #[test]
    fn scalar_unit_factor() {
        let mut rng = substream(1, "unit-factor");
        let spec = AlgebraSpec::of(&[2, 1]);
        let target = AlgebraSpec::of(&[2]);
        let f1 = canonical(CpMap::random(&mut rng, &spec, &target, 2));
        let c1 = AlgebraSpec::of(&[1]);
        let f2 = canonical(CpMap::identity(&c1));
        let tw = tensor_weight(&f1, &f2, 1e-9).unwrap();
        assert_eq!(tw.triplet().dim(), f1.triplet.dim());
        assert!(linalg::max_abs(&(tw.product().map().matrix() - f1.weight.map().matrix())) < 1e-9);
    }

    #[test]
    fn random_pair_certifies() {
        let mut rng = substream(2, "tensor-pair");
        for _ in 0..3 {
            let a1 = random::spec(&mut rng, 2, 2);
            let a2 = random::spec(&mut rng, 2, 1);
            let b1 = random::spec(&mut rng, 1, 2);
            let b2 = random::spec(&mut rng, 1, 2);
            let f1 = canonical(CpMap::random(&mut rng, &a1, &b1, 2));
            let f2 = canonical(CpMap::random(&mut rng, &a2, &b2, 2));
            let tw = tensor_weight(&f1, &f2, 1e-9).unwrap();
            assert!(tw.report().all_pass(), "{}", tw.report().summary());
            let rep = check_factorization(&tw, 1e-9);
            assert!(rep.all_pass(), "{}", rep.summary());
            let mut s1 = CpFamilySampler::new(&f1.triplet, 0.5, 3).unwrap().with_budget(4);
            let mut s2 = CpFamilySampler::new(&f2.triplet, 0.5, 4).unwrap().with_budget(4);
            let (w1, w2) = (s1.sample(), s2.sample());
            let rep = check_T_transport(&tw, &w1, &w2, 1e-9);
            assert!(rep.all_pass(), "{}", rep.summary());
            let c = random::positive_element(&mut rng, tw.product().source());
            let d = random::gaussian_element(&mut rng, tw.product().target());
            let rep = check_product_convergence(&tw, &c, &d, &mut s1, &mut s2, 1e-9);
            assert!(rep.all_pass(), "{}", rep.summary());
        }
    }

    #[test]
    fn transport_of_scaled_factors() {
        let spec = AlgebraSpec::of(&[2]);
        let f = canonical(CpMap::identity(&spec));
        let tw = tensor_weight(&f, &f, 1e-9).unwrap();
        let s = CpFamilySampler::new(&f.triplet, 0.5, 0).unwrap();
        let top = s.top();
        let half = top.scaled(0.5);
        let rep = check_T_transport(&tw, &top, &top, 1e-9);
        assert!(rep.all_pass());
        let rep = check_T_transport(&tw, &half, &top, 1e-9);
        assert!(rep.all_pass());
        let t = product_operator(&tw, &half, &top).unwrap();
        assert!(t.distance(&ModuleMap::identity(tw.triplet().module()).scale(0.5)) < 1e-12);
    }

    #[test]
    fn product_of_factor_pair_is_limit() {
        let mut rng = substream(5, "factor-limit");
        let spec = AlgebraSpec::of(&[1, 1]);
        let f1 = canonical(CpMap::random(&mut rng, &spec, &spec, 2));
        let f2 = canonical(CpMap::identity(&AlgebraSpec::of(&[2])));
        let tw = tensor_weight(&f1, &f2, 1e-9).unwrap();
        let a1 = random::positive_element(&mut rng, f1.weight.source());
        let a2 = random::positive_element(&mut rng, f2.weight.source());
        let c = a1.kron(&a2);
        let want = f1.weight.eval(&a1).kron(&f2.weight.eval(&a2));
        assert!(tw.product().eval(&c).distance(&want) < 1e-9);
        let c2 = &c + &a2.kron(&a1).scale(real(0.0));
        assert!(tw.product().eval(&c2).distance(&want) < 1e-9);
    }

    #[test]
    fn associativity_up_to_unitary() {
        let mut rng = substream(6, "assoc");
        let spec = AlgebraSpec::of(&[1, 1]);
        let target = AlgebraSpec::of(&[1]);
        let f: Vec<RegularWeight> = (0..3)
            .map(|_| canonical(CpMap::random(&mut rng, &spec, &target, 1)))
            .collect();
        let left = tensor_weight(&tensor_weight(&f[0], &f[1], 1e-9).unwrap().as_regular().clone(), &f[2], 1e-9).unwrap();
        let right = tensor_weight(&f[0], tensor_weight(&f[1], &f[2], 1e-9).unwrap().as_regular(), 1e-9).unwrap();
        let spectrum = |t: &KsgnsTriplet| {
            let w = t.span_matrix();
            let mut v = linalg::herm_eig(&(w.adjoint() * t.module().scalar_gram() * &w)).0;
            v.sort_by(f64::total_cmp);
            v
        };
        let (l, r) = (spectrum(left.triplet()), spectrum(right.triplet()));
        assert_eq!(l.len(), r.len());
        for (x, y) in l.iter().zip(&r) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
