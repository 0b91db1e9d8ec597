//! Shared inputs for the benchmarks.

use fbd_core::seqcore::max_normalize_interferograms;
use fbd_core::synth::{make_experiment, Experiment, ExperimentId, ExperimentSpec};
use fbd_core::{build_interferograms, InterferogramSet, Sequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_sequence(len: usize, seed: u64) -> Sequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Sequence::new(0, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("finite samples")
}

pub fn experiment(nr: usize) -> Experiment {
    let mut spec = ExperimentSpec::new(ExperimentId::I, 1);
    spec.nr = nr;
    make_experiment(&spec).expect("valid spec")
}

/// Max-normalised data interferograms on the full lag range.
pub fn data_interferograms(e: &Experiment) -> InterferogramSet {
    let raw = build_interferograms(&e.data, e.spec.t).expect("maxlag within span");
    max_normalize_interferograms(&raw).expect("nonzero data")
}
