//! Seeded inputs shared by the `kernels` benchmarks.

use gausscover::double_cover::{lift, CoverElement};
use gausscover::phase_space::{random_generator, standard_kahler};
use gausscover::{GroupElement, KahlerStructure, LieGenerator, Statistics};

pub const SEED: u64 = 1_234;

pub fn generator(n_modes: usize, statistics: Statistics, scale: f64) -> (LieGenerator, KahlerStructure) {
    let kahler = standard_kahler(n_modes, statistics);
    (random_generator(n_modes, statistics, SEED, scale).0, kahler)
}

/// Two group elements drawn with neighbouring seeds.
pub fn element_pair(n_modes: usize, statistics: Statistics) -> (GroupElement, GroupElement, KahlerStructure) {
    let kahler = standard_kahler(n_modes, statistics);
    let a = random_generator(n_modes, statistics, SEED, 0.5).0.exp();
    let b = random_generator(n_modes, statistics, SEED + 1, 0.5).0.exp();
    (a, b, kahler)
}

pub fn cover_element(n_modes: usize, statistics: Statistics) -> CoverElement {
    let (m, _, kahler) = element_pair(n_modes, statistics);
    lift(&m, 1, &kahler).expect("random element off the boundary")
}
