//! Chunked, shuffled low-frequency DCT sensing.
//!
//! A gradient vector of length `n` is zero-padded to `n_padded` (a multiple of
//! the chunk count), permuted with a seed-derived shuffle, split into equal
//! chunks, and each chunk is replaced by its first `m / chunks` orthonormal
//! DCT coefficients. The map is linear in the input.

use serde::{Deserialize, Serialize};

use crate::dct::Dct;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingConfig {
    pub n: usize,
    pub m: usize,
    pub chunks: usize,
    pub shuffle_seed: u64,
    pub n_padded: usize,
}

impl SensingConfig {
    pub fn new(n: usize, m: usize, chunks: usize, shuffle_seed: u64) -> Result<Self> {
        if n == 0 || chunks == 0 {
            return Err(Error::invalid("sensing config needs n >= 1 and chunks >= 1"));
        }
        let n_padded = n.div_ceil(chunks) * chunks;
        if m == 0 || m > n_padded {
            return Err(Error::invalid(format!(
                "measurement count m={m} must lie in 1..={n_padded}"
            )));
        }
        if m % chunks != 0 {
            return Err(Error::invalid(format!(
                "measurement count m={m} must be a multiple of the chunk count {chunks}"
            )));
        }
        Ok(SensingConfig { n, m, chunks, shuffle_seed, n_padded })
    }

    /// Build from a compression ratio `r = m / n`. `m` is rounded to the
    /// nearest multiple of `chunks`, with at least one measurement per chunk.
    pub fn with_ratio(n: usize, ratio: f64, chunks: usize, shuffle_seed: u64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::invalid(format!("compression ratio {ratio} outside (0, 1]")));
        }
        if chunks == 0 || n == 0 {
            return Err(Error::invalid("sensing config needs n >= 1 and chunks >= 1"));
        }
        let n_padded = n.div_ceil(chunks) * chunks;
        let per_chunk = if ratio == 1.0 {
            n_padded / chunks
        } else {
            ((ratio * n as f64 / chunks as f64).round() as usize).clamp(1, n_padded / chunks)
        };
        Self::new(n, per_chunk * chunks, chunks, shuffle_seed)
    }

    pub fn chunk_len(&self) -> usize {
        self.n_padded / self.chunks
    }

    pub fn chunk_meas(&self) -> usize {
        self.m / self.chunks
    }

    /// `m / n`.
    pub fn ratio(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    fn validate(&self) -> Result<()> {
        let again = Self::new(self.n, self.m, self.chunks, self.shuffle_seed)?;
        if again != *self {
            return Err(Error::invalid("inconsistent n_padded in sensing config"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedUpdate {
    pub coeffs: Vec<f64>,
    pub cfg: SensingConfig,
}

impl CompressedUpdate {
    pub fn new(coeffs: Vec<f64>, cfg: SensingConfig) -> Result<Self> {
        if coeffs.len() != cfg.m {
            return Err(Error::invalid(format!(
                "compressed update has {} coefficients, config expects {}",
                coeffs.len(),
                cfg.m
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::numeric("non-finite coefficient in compressed update"));
        }
        Ok(CompressedUpdate { coeffs, cfg })
    }

    pub fn zeros(cfg: SensingConfig) -> Self {
        CompressedUpdate { coeffs: vec![0.0; cfg.m], cfg }
    }

    pub fn chunk(&self, j: usize) -> &[f64] {
        let k = self.cfg.chunk_meas();
        &self.coeffs[j * k..(j + 1) * k]
    }
}

/// `out[i] = x[perm[i]]`.
fn apply_perm(x: &[f64], perm: &[usize]) -> Vec<f64> {
    perm.iter().map(|&p| x[p]).collect()
}

/// Inverse of [`apply_perm`].
fn invert_perm(x: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (i, &p) in perm.iter().enumerate() {
        out[p] = x[i];
    }
    out
}

pub fn shuffle(x: &[f64], seed: u64) -> Vec<f64> {
    apply_perm(x, &rng::permutation(x.len(), seed))
}

pub fn unshuffle(x: &[f64], seed: u64) -> Vec<f64> {
    invert_perm(x, &rng::permutation(x.len(), seed))
}

/// Sensing operator for one [`SensingConfig`], with the permutation and DCT
/// plan precomputed.
#[derive(Debug, Clone)]
pub struct Codec {
    cfg: SensingConfig,
    perm: Vec<usize>,
    dct: Dct,
}

impl Codec {
    pub fn new(cfg: SensingConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Codec {
            perm: rng::permutation(cfg.n_padded, cfg.shuffle_seed),
            dct: Dct::new(cfg.chunk_len())?,
            cfg,
        })
    }

    pub fn config(&self) -> &SensingConfig {
        &self.cfg
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Zero-pad to `n_padded` and shuffle.
    pub fn pad_shuffle(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cfg.n {
            return Err(Error::invalid(format!(
                "vector has length {}, config expects {}",
                x.len(),
                self.cfg.n
            )));
        }
        let mut padded = x.to_vec();
        padded.resize(self.cfg.n_padded, 0.0);
        Ok(apply_perm(&padded, &self.perm))
    }

    /// Unshuffle a length-`n_padded` vector and drop the padding.
    pub fn unshuffle_truncate(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cfg.n_padded {
            return Err(Error::invalid(format!(
                "vector has length {}, expected n_padded = {}",
                v.len(),
                self.cfg.n_padded
            )));
        }
        let mut out = invert_perm(v, &self.perm);
        out.truncate(self.cfg.n);
        Ok(out)
    }

    /// Θs for one chunk: the first `m / chunks` DCT coefficients.
    pub fn measure_chunk(&self, s: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.cfg.chunk_meas());
        self.dct.forward_into(s, out);
    }

    /// Θᵀr for one chunk: zero-fill the high frequencies, inverse DCT.
    pub fn adjoint_chunk(&self, r: &[f64], out: &mut [f64]) {
        debug_assert_eq!(r.len(), self.cfg.chunk_meas());
        self.dct.inverse_into(r, out);
    }

    pub fn compress(&self, x: &[f64]) -> Result<CompressedUpdate> {
        let shuffled = self.pad_shuffle(x)?;
        let (len, k) = (self.cfg.chunk_len(), self.cfg.chunk_meas());
        let mut coeffs = vec![0.0; self.cfg.m];
        for (src, dst) in shuffled.chunks_exact(len).zip(coeffs.chunks_exact_mut(k)) {
            self.measure_chunk(src, dst);
        }
        Ok(CompressedUpdate { coeffs, cfg: self.cfg })
    }

    /// Zero-fill the missing coefficients and invert every chunk. Exact
    /// inverse of [`Codec::compress`] when `m == n_padded`.
    pub fn lowpass_reconstruct(&self, y: &CompressedUpdate) -> Result<Vec<f64>> {
        self.check(y)?;
        let len = self.cfg.chunk_len();
        let mut full = vec![0.0; self.cfg.n_padded];
        for (j, dst) in full.chunks_exact_mut(len).enumerate() {
            self.adjoint_chunk(y.chunk(j), dst);
        }
        self.unshuffle_truncate(&full)
    }

    pub(crate) fn check(&self, y: &CompressedUpdate) -> Result<()> {
        if y.cfg != self.cfg {
            return Err(Error::invalid("compressed update was produced with a different sensing config"));
        }
        if y.coeffs.len() != self.cfg.m {
            return Err(Error::invalid("compressed update has the wrong length"));
        }
        Ok(())
    }
}

/// One-shot compression; builds a [`Codec`] for `cfg`.
pub fn compress(x: &[f64], cfg: &SensingConfig) -> Result<CompressedUpdate> {
    Codec::new(*cfg)?.compress(x)
}

pub fn lowpass_reconstruct(y: &CompressedUpdate) -> Result<Vec<f64>> {
    Codec::new(y.cfg)?.lowpass_reconstruct(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_seed(len: usize) -> u64 {
        (0..10_000u64)
            .find(|&s| rng::permutation(len, s).iter().enumerate().all(|(i, &p)| i == p))
            .expect("some seed yields the identity permutation")
    }

    #[test]
    fn config_validation() {
        assert!(SensingConfig::new(10, 0, 1, 0).is_err());
        assert!(SensingConfig::new(10, 11, 1, 0).is_err());
        assert!(SensingConfig::new(10, 3, 2, 0).is_err());
        let c = SensingConfig::new(10, 4, 4, 0).unwrap();
        assert_eq!(c.n_padded, 12);
        assert_eq!(c.chunk_len(), 3);
        let r = SensingConfig::with_ratio(1000, 0.05, 10, 0).unwrap();
        assert_eq!(r.m, 50);
        let full = SensingConfig::with_ratio(1001, 1.0, 10, 0).unwrap();
        assert_eq!(full.m, full.n_padded);
    }

    #[test]
    fn zero_in_zero_out() {
        let cfg = SensingConfig::new(30, 10, 5, 4).unwrap();
        let y = compress(&[0.0; 30], &cfg).unwrap();
        assert_eq!(y.coeffs, vec![0.0; 10]);
        assert_eq!(lowpass_reconstruct(&y).unwrap(), vec![0.0; 30]);
    }

    #[test]
    fn identity_permutation_reduces_to_dct() {
        let seed = identity_seed(4);
        let cfg = SensingConfig::new(4, 4, 1, seed).unwrap();
        let y = compress(&[1.0; 4], &cfg).unwrap();
        assert!((y.coeffs[0] - 2.0).abs() < 1e-12);
        assert!(y.coeffs[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn constant_signal_survives_lowpass() {
        // A constant vector is invariant under any permutation.
        let cfg = SensingConfig::new(8, 2, 1, 3).unwrap();
        let x = [0.37; 8];
        let full = crate::dct::dct_forward(&x).unwrap();
        assert!(full[1..].iter().all(|c| c.abs() < 1e-12));
        let back = lowpass_reconstruct(&compress(&x, &cfg).unwrap()).unwrap();
        assert!(back.iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn full_measurement_round_trip_with_padding() {
        let cfg = SensingConfig::with_ratio(103, 1.0, 4, 77).unwrap();
        let x: Vec<f64> = (0..103).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let codec = Codec::new(cfg).unwrap();
        let y = codec.compress(&x).unwrap();
        let back = codec.lowpass_reconstruct(&y).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
        let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny: f64 = y.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((nx - ny).abs() / nx < 1e-9);
    }

    #[test]
    fn shuffle_examples() {
        let x: Vec<f64> = (1..=32).map(f64::from).collect();
        let a = shuffle(&x, 1);
        let b = shuffle(&x, 2);
        assert_ne!(a, b);
        let mut sorted = a.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(sorted, x);
        assert_eq!(unshuffle(&a, 1), x);
        assert_eq!(unshuffle(&[4.5], 99), vec![4.5]);
        let seed = identity_seed(5);
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(unshuffle(&v, seed), v);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let cfg = SensingConfig::new(16, 8, 2, 0).unwrap();
        let codec = Codec::new(cfg).unwrap();
        assert!(codec.compress(&[1.0; 15]).is_err());
        assert!(codec.unshuffle_truncate(&[0.0; 15]).is_err());
        assert!(CompressedUpdate::new(vec![0.0; 7], cfg).is_err());
    }

    #[test]
    fn same_config_same_permutation() {
        let cfg = SensingConfig::new(500, 100, 5, 12345).unwrap();
        let a = Codec::new(cfg).unwrap();
        let b = Codec::new(cfg).unwrap();
        assert_eq!(a.permutation(), b.permutation());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn unshuffle_inverts_shuffle(x in proptest::collection::vec(-1e3f64..1e3, 1..200), seed: u64) {
            prop_assert_eq!(unshuffle(&shuffle(&x, seed), seed), x);
        }

        #[test]
        fn compression_is_linear(
            seed: u64,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            x1 in proptest::collection::vec(-1e3f64..1e3, 64),
            x2 in proptest::collection::vec(-1e3f64..1e3, 64),
        ) {
            let codec = Codec::new(SensingConfig::new(64, 16, 4, seed).unwrap()).unwrap();
            let mix: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| a * p + b * q).collect();
            let lhs = codec.compress(&mix).unwrap();
            let y1 = codec.compress(&x1).unwrap();
            let y2 = codec.compress(&x2).unwrap();
            for i in 0..16 {
                let rhs = a * y1.coeffs[i] + b * y2.coeffs[i];
                prop_assert!((lhs.coeffs[i] - rhs).abs() <= 1e-9);
            }
        }
    }
}
