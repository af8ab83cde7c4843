//! Deterministic derivation of independent random substreams from a root seed.
//!
//! Simulators split a single root seed into one substream for the latent
//! log-volatility and one for the Gaussian (or fractional Gaussian)
//! innovations. The split is a fixed SplitMix64 hash, so a test or an oracle
//! can replay either stream on its own: `latent_stream(root)` is exactly the
//! seed that `simulate_mrw(n, p, root)` feeds to `sample_log_volatility`, and
//! `innovation_stream(root)` seeds its innovation noise. Ensemble drivers and
//! multi-start fitting derive one seed per replicate with
//! `replicate_stream(root, index)`.

const LATENT_TAG: u64 = 0x6c61_7465_6e74_0001; // "latent"
const INNOVATION_TAG: u64 = 0x696e_6e6f_7661_0002; // "innova"
const REPLICATE_TAG: u64 = 0x7265_706c_6963_0003; // "replic"

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the latent log-volatility substream for a given root seed.
pub fn latent_stream(root: u64) -> u64 {
    mix(root ^ LATENT_TAG)
}

/// Seed of the innovation-noise substream for a given root seed.
pub fn innovation_stream(root: u64) -> u64 {
    mix(root ^ INNOVATION_TAG)
}

/// Seed of the `index`-th replicate substream (ensembles, fit starts).
pub fn replicate_stream(root: u64, index: u64) -> u64 {
    mix(mix(root ^ REPLICATE_TAG).wrapping_add(index))
}
