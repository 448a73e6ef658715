//! Shared fixtures for the benchmarks.

use polyaniso::calibrate::{cache_records, CachedRecord};
use polyaniso::data::{generate_dataset, preset, Dataset, ReferenceMaterial};
use polyaniso::kinematics::random_deformation;
use polyaniso::pann::ModelOptions;
use polyaniso::{GroupId, PannModel, PreferredFrame, Tensor2, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default-sized cubic model of `variant`.
pub fn cubic_model(variant: Variant) -> PannModel {
    PannModel::build(variant, GroupId::Cub, &PreferredFrame::standard(), &ModelOptions::default(), 1).expect("cubic variants build")
}

/// Random admissible deformations.
pub fn deformations(n: usize, seed: u64) -> Vec<Tensor2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_deformation(&mut rng, 0.25, 0.6, 1.5)).collect()
}

/// The 500 + 500 point desk dataset of the cubic reference material.
pub fn desk_dataset() -> Dataset {
    generate_dataset(&ReferenceMaterial::cubic_default(), &preset("desk").expect("preset exists"), false, 0).expect("valid material")
}

/// Calibration records of the desk dataset with features cached for `m`.
pub fn cached_calibration(m: &PannModel) -> Vec<CachedRecord> {
    cache_records(m, &desk_dataset().calibration()).expect("admissible records")
}
