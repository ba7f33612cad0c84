use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-node random stream. A ChaCha block counter makes every draw a
/// function of `(seed, domain, node, draw index)`.
pub type NodeRng = ChaCha8Rng;

/// Stream for `node` inside the named `domain` (a phase label).
pub fn node_rng(seed: u64, domain: &str, node: u32) -> NodeRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain_hash(domain));
    rng.set_stream(node as u64);
    rng
}

/// 64-bit FNV-1a of the domain label.
pub fn domain_hash(domain: &str) -> u64 {
    domain.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Mixes a base seed with an attempt counter (used for retries).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_independent_of_interleaving() {
        let mut a = node_rng(7, "x", 3);
        let first: Vec<u64> = (0..5).map(|_| a.gen()).collect();
        let mut other = node_rng(7, "x", 4);
        let _: u64 = other.gen();
        let mut b = node_rng(7, "x", 3);
        let again: Vec<u64> = (0..5).map(|_| b.gen()).collect();
        assert_eq!(first, again);
        let mut c = node_rng(7, "y", 3);
        assert_ne!(first[0], c.gen::<u64>());
    }
}
