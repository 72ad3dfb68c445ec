//! Additive masking over a fixed-point ring.
//!
//! Values are encoded as `round(v · 2^frac_bits)` and masked modulo
//! `p · 2^frac_bits`. Because both factors are powers of two the ring modulus
//! divides 2⁶⁴, so residues are plain `u64`s reduced with a bit mask and all
//! additions may wrap freely.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_FRAC_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingParams {
    /// Power-of-two range of the real values (the sum must stay inside ±p/2).
    pub p: u64,
    pub frac_bits: u32,
}

impl RingParams {
    pub fn new(p: u64, frac_bits: u32) -> Result<Self> {
        if !p.is_power_of_two() {
            return Err(Error::invalid(format!("ring size p={p} is not a power of two")));
        }
        if p.trailing_zeros() + frac_bits > 63 {
            return Err(Error::invalid(format!(
                "p·2^frac_bits = 2^{} overflows the 64-bit residue word; use fewer frac_bits",
                p.trailing_zeros() + frac_bits
            )));
        }
        Ok(RingParams { p, frac_bits })
    }

    pub fn scale(&self) -> f64 {
        (1u64 << self.frac_bits) as f64
    }

    /// `p · scale`, the residue modulus.
    pub fn modulus(&self) -> u64 {
        self.p << self.frac_bits
    }

    fn reduce(&self, x: u64) -> u64 {
        x & (self.modulus() - 1)
    }

    /// Interpret a residue as a signed integer in `[-M/2, M/2)`.
    pub fn recenter(&self, r: u64) -> i64 {
        let m = self.modulus();
        let r = self.reduce(r);
        if r >= m / 2 {
            -((m - r) as i64)
        } else {
            r as i64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedVector {
    pub residues: Vec<u64>,
    pub ring: RingParams,
}

/// Smallest power of two covering `max_abs · num_clients` (at least 2).
pub fn derive_modulus(max_abs: f64, num_clients: usize) -> Result<RingParams> {
    derive_modulus_with(max_abs, num_clients, DEFAULT_FRAC_BITS)
}

pub fn derive_modulus_with(max_abs: f64, num_clients: usize, frac_bits: u32) -> Result<RingParams> {
    if !(max_abs > 0.0) || !max_abs.is_finite() {
        return Err(Error::invalid(format!("max_abs must be positive and finite, got {max_abs}")));
    }
    if num_clients == 0 {
        return Err(Error::invalid("need at least one client"));
    }
    let bound = max_abs * num_clients as f64;
    let bits = bound.log2().ceil().max(1.0);
    if bits > 63.0 {
        return Err(Error::invalid(format!("ring size 2^{bits} does not fit in 64 bits")));
    }
    RingParams::new(1u64 << bits as u32, frac_bits)
}

/// Masks that sum to zero modulo the ring: the first `num_clients − 1` are
/// uniform draws from `mask_seed`, the last cancels their sum.
pub fn gen_masks(num_clients: usize, dim: usize, ring: &RingParams, mask_seed: u64) -> Vec<Vec<u64>> {
    if num_clients == 0 {
        return Vec::new();
    }
    let mut rng = rng::stream(mask_seed);
    let mut masks = Vec::with_capacity(num_clients);
    let mut partial = vec![0u64; dim];
    for _ in 0..num_clients - 1 {
        let mask: Vec<u64> = (0..dim).map(|_| ring.reduce(rng.next_u64())).collect();
        for (acc, m) in partial.iter_mut().zip(&mask) {
            *acc = acc.wrapping_add(*m);
        }
        masks.push(mask);
    }
    masks.push(partial.iter().map(|s| ring.reduce(s.wrapping_neg())).collect());
    masks
}

/// Fixed-point encode `v` and add `mask`.
pub fn encrypt(v: &[f64], mask: &[u64], ring: &RingParams) -> Result<MaskedVector> {
    if v.len() != mask.len() {
        return Err(Error::invalid(format!("vector length {} but mask length {}", v.len(), mask.len())));
    }
    let half = ring.p as f64 / 2.0;
    let scale = ring.scale();
    let residues = v
        .iter()
        .zip(mask)
        .enumerate()
        .map(|(i, (&x, &k))| {
            if !x.is_finite() || x.abs() >= half {
                return Err(Error::Range(format!(
                    "entry {i} = {x} is outside the ring range ±{half}; the modulus is misconfigured"
                )));
            }
            let q = (x * scale).round() as i64;
            Ok(ring.reduce((q as u64).wrapping_add(k)))
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(MaskedVector { residues, ring: *ring })
}

/// Sum residues in ring order and re-center, without de-scaling.
///
/// `expected` is the number of clients whose masks were generated together;
/// fewer shares leave the sum uniformly masked.
pub fn aggregate_fixed(masked: &[MaskedVector], expected: usize) -> Result<Vec<i64>> {
    if masked.len() != expected {
        return Err(Error::Protocol(format!(
            "received {} masked shares but masks were issued to {expected} clients",
            masked.len()
        )));
    }
    let first = masked.first().ok_or_else(|| Error::invalid("no masked vectors to aggregate"))?;
    let ring = first.ring;
    let dim = first.residues.len();
    let mut sum = vec![0u64; dim];
    for (k, mv) in masked.iter().enumerate() {
        if mv.ring != ring {
            return Err(Error::invalid(format!("share {k} uses a different ring")));
        }
        if mv.residues.len() != dim {
            return Err(Error::invalid(format!("share {k} has length {} instead of {dim}", mv.residues.len())));
        }
        for (acc, r) in sum.iter_mut().zip(&mv.residues) {
            *acc = acc.wrapping_add(*r);
        }
    }
    Ok(sum.into_iter().map(|s| ring.recenter(s)).collect())
}

/// Decoded sum of all clients' vectors.
pub fn aggregate(masked: &[MaskedVector], expected: usize) -> Result<Vec<f64>> {
    let fixed = aggregate_fixed(masked, expected)?;
    let scale = masked[0].ring.scale();
    Ok(fixed.into_iter().map(|q| q as f64 / scale).collect())
}
