use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams inside one cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Map = 1,
    Env = 2,
    Learner = 3,
    Adversary = 4,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `stream` of run `run` on map `map`. Maps ignore the run index so
/// every run of a map sees the same layout.
pub fn derive_seed(master: u64, map: usize, run: usize, stream: Stream) -> u64 {
    let run = if stream == Stream::Map { 0 } else { run as u64 + 1 };
    [map as u64, run, stream as u64]
        .into_iter()
        .fold(splitmix64(master), |h, v| splitmix64(h ^ v))
}

pub fn stream_rng(master: u64, map: usize, run: usize, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, map, run, stream))
}
