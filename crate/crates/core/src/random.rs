//! Seeded random instances. Every stream is derived from a run seed and a
//! stable label, so adding a consumer never perturbs the others.

use crate::algebra::{AlgebraSpec, Element};
use crate::linalg::{c, Mat, Vector, C};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Rng64 = ChaCha8Rng;

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Generator for `(seed, label)`.
pub fn substream(seed: u64, label: &str) -> Rng64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label));
    rng
}

pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_c<R: Rng>(rng: &mut R) -> C {
    c(gaussian(rng), gaussian(rng))
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| gaussian_c(rng))
}

pub fn gaussian_mat<R: Rng>(rng: &mut R, r: usize, cols: usize) -> Mat {
    Mat::from_fn(r, cols, |_, _| gaussian_c(rng))
}

pub fn gaussian_element<R: Rng>(rng: &mut R, spec: &AlgebraSpec) -> Element {
    Element::from_coords(spec, &gaussian_vector(rng, spec.dim()))
}

pub fn positive_element<R: Rng>(rng: &mut R, spec: &AlgebraSpec) -> Element {
    let x = gaussian_element(rng, spec);
    &x.adjoint() * &x
}

/// Spec with `1..=max_blocks` blocks of size `1..=max_size`.
pub fn spec<R: Rng>(rng: &mut R, max_blocks: usize, max_size: usize) -> AlgebraSpec {
    let k = rng.random_range(1..=max_blocks);
    AlgebraSpec::of(&(0..k).map(|_| rng.random_range(1..=max_size)).collect::<Vec<_>>())
}

/// Nonzero diagonal projection built from matrix units.
pub fn diagonal_projection<R: Rng>(rng: &mut R, spec: &AlgebraSpec) -> Element {
    loop {
        let mut p = Element::zero(spec);
        let mut any = false;
        for (k, &n) in spec.block_dims.iter().enumerate() {
            for i in 0..n {
                if rng.random_bool(0.6) {
                    p = &p + &spec.basis_element(spec.basis_index(k, i, i));
                    any = true;
                }
            }
        }
        if any {
            return p;
        }
    }
}
