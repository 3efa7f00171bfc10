//! Random channels, path loss and seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use structopt_core::numkernel::{CMat, C64};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 finalizer; a bijection on `u64`.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the channel draw for one (SNR point, trial) pair.
///
/// `(snr_idx << 32) | trial` is injective for `trial < 2^32`, multiplying by
/// an odd constant and adding the master seed are bijections mod 2^64, and so
/// is splitmix64, so distinct pairs never share a seed.
pub fn trial_seed(master: u64, snr_idx: usize, trial: usize) -> u64 {
    let key = ((snr_idx as u64) << 32) | (trial as u64 & 0xFFFF_FFFF);
    splitmix64(master.wrapping_add(key.wrapping_mul(GOLDEN)))
}

/// Independent sub-stream of a trial seed, e.g. for solver initialization.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// CN(0, 1) entries: real and imaginary parts each N(0, 1/2).
pub fn gen_cscg(rows: usize, cols: usize, seed: u64) -> CMat {
    gen_cscg_with(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn gen_cscg_with(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut out = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            out[(i, j)] = C64::new(s * re, s * im);
        }
    }
    out
}

/// Linear amplitude scale `10^{−(ref_db + 10·exponent·log10 d)/20}`.
pub fn pathloss_scale(distance_m: f64, exponent: f64, ref_db: f64) -> f64 {
    10f64.powf(-(ref_db + 10.0 * exponent * distance_m.log10()) / 20.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
