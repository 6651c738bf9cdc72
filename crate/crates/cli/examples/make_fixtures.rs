//! Regenerates the files under `fixtures/`.

use opweight::cpmap::CpMap;
use opweight::json;
use opweight::ksgns::Weight;
use opweight::linalg::real;
use opweight::random::substream;
use opweight::regular::{regular_data, SeedData};
use opweight::{AlgebraSpec, Element};
use std::path::Path;

fn write(dir: &Path, name: &str, v: &serde_json::Value) {
    let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    std::fs::write(dir.join(name), text).expect("writable fixture directory");
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    std::fs::create_dir_all(&dir).expect("fixture directory");

    let m2 = AlgebraSpec::of(&[2]);
    let identity = Weight::everywhere(CpMap::identity(&m2));
    write(&dir, "identity_weight.json", &json::weight_to_json(&identity));

    let zero = Weight::everywhere(CpMap::zero(&m2, &AlgebraSpec::of(&[1])));
    write(&dir, "zero_weight.json", &json::weight_to_json(&zero));

    write(&dir, "transpose_weight.json", &json::weight_to_json(&Weight::everywhere(CpMap::transpose(&m2))));

    // x + Tr(x)·1: Choi matrix positive definite.
    let faithful = CpMap::from_fn(&m2, &m2, |x| x + &Element::scalar(&m2, x.faithful_trace()));
    write(&dir, "faithful_weight.json", &json::weight_to_json(&Weight::everywhere(faithful)));

    let a = AlgebraSpec::of(&[1, 2]);
    let b = AlgebraSpec::of(&[2]);
    let mut rng = substream(2024, "fixture");
    let phi = Weight::everywhere(CpMap::random(&mut rng, &a, &b, 2));
    write(&dir, "roundtrip_weight.json", &json::weight_to_json(&phi));
    let (t, net) = regular_data(&phi, 1e-9).expect("regular weight");
    let seed = SeedData::from_net(&t, &net).expect("seed");
    write(&dir, "roundtrip_seed.json", &json::seed_to_json(&seed));

    let mut bad = seed.clone();
    bad.lambda0[0] *= real(1.5);
    write(&dir, "inconsistent_seed.json", &json::seed_to_json(&bad));

    let c2 = AlgebraSpec::of(&[1, 1]);
    write(&dir, "tensor_first.json", &json::weight_to_json(&identity));
    write(&dir, "tensor_second.json", &json::weight_to_json(&Weight::everywhere(CpMap::identity(&c2))));

    std::fs::write(dir.join("malformed.json"), "{\n  \"A\": {\"block_dims\": [2]},\n  \"B\": {\"block_dims\": [2]\n  \"coeffs\": {}\n}\n")
        .expect("writable fixture directory");
}
