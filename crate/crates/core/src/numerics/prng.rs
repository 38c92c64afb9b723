use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256StarStar;

/// Tags for the independent sub-streams derived from one run seed.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const FORWARD: u64 = 3;
    pub const DATA: u64 = 4;
    pub const TEST_DATA: u64 = 5;
    pub const DROPOUT_MASKS: u64 = 6;
    pub const LATTICE: u64 = 7;
    pub const FILL: u64 = 8;
    pub const SUBSET: u64 = 9;
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded xoshiro256** stream.
///
/// Sub-streams are derived from the seed and a path of tags, never from the
/// current stream position, so `Prng::derive(s, &[a, b])` yields the same
/// numbers no matter how much of any other stream has been consumed.
#[derive(Clone, Debug)]
pub struct Prng {
    seed: u64,
    rng: Xoshiro256StarStar,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    /// Independent stream for `(seed, path[0], path[1], ...)`.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mixed = path
            .iter()
            .fold(splitmix64(seed), |acc, &tag| splitmix64(acc ^ splitmix64(tag)));
        Self::new(mixed)
    }

    /// Independent child stream of this stream's seed.
    pub fn substream(&self, tag: u64) -> Self {
        Self::derive(self.seed, &[tag])
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        mean + std * z
    }

    /// `true` with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    /// `0..n` in a seed-determined order.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}

impl RngCore for Prng {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
