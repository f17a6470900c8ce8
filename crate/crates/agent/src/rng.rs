//! Named random streams derived from one root seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const POLICY: &str = "policy";
pub const BUFFER: &str = "buffer";
pub const DATA_NOISE: &str = "data-noise";
pub const EPISODE: &str = "episode";
pub const INIT: &str = "init";

fn fnv1a(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Independent generator for the component called `name`.
pub fn stream(root: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(fnv1a(name));
    rng
}
