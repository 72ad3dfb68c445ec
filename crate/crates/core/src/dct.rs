//! Orthonormal DCT-II and its inverse (DCT-III) on top of a complex FFT.
//!
//! Uses Makhoul's reordering: an N-point DCT-II is one N-point complex FFT of
//! the even/odd interleaved input followed by a quarter-sample twiddle.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Planned transform for one length. Cheap to share across threads.
#[derive(Clone)]
pub struct Dct {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    // e^{-iπk/(2N)}
    twiddle: Vec<Complex<f64>>,
    scale0: f64,
    scale: f64,
}

impl std::fmt::Debug for Dct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct").field("len", &self.len).finish()
    }
}

impl Dct {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("DCT length must be at least 1"));
        }
        let mut planner = FftPlanner::new();
        let n = len as f64;
        let twiddle = (0..len)
            .map(|k| Complex::from_polar(1.0, -std::f64::consts::PI * k as f64 / (2.0 * n)))
            .collect();
        Ok(Dct {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
            twiddle,
            scale0: (1.0 / n).sqrt(),
            scale: (2.0 / n).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Orthonormal DCT-II of `x`, writing the first `out.len()` coefficients.
    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len;
        assert_eq!(x.len(), n, "DCT input length");
        assert!(out.len() <= n, "DCT output longer than transform");
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n];
        let half = n.div_ceil(2);
        for i in 0..half {
            buf[i] = Complex::new(x[2 * i], 0.0);
        }
        for i in 0..n / 2 {
            buf[n - 1 - i] = Complex::new(x[2 * i + 1], 0.0);
        }
        self.fwd.process(&mut buf);
        for (k, o) in out.iter_mut().enumerate() {
            let c = (self.twiddle[k] * buf[k]).re;
            *o = c * if k == 0 { self.scale0 } else { self.scale };
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        self.forward_into(x, &mut out);
        out
    }

    /// Inverse of [`Dct::forward`]. `coeffs` may be shorter than the transform
    /// length; missing high-frequency coefficients are taken as zero.
    pub fn inverse_into(&self, coeffs: &[f64], out: &mut [f64]) {
        let n = self.len;
        assert!(coeffs.len() <= n, "too many DCT coefficients");
        assert_eq!(out.len(), n, "DCT output length");
        let c = |k: usize| -> f64 {
            if k >= coeffs.len() {
                0.0
            } else if k == 0 {
                coeffs[0] / self.scale0
            } else {
                coeffs[k] / self.scale
            }
        };
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|k| {
                let z = Complex::new(c(k), if k == 0 { 0.0 } else { -c(n - k) });
                self.twiddle[k].conj() * z
            })
            .collect();
        self.inv.process(&mut buf);
        let inv_n = 1.0 / n as f64;
        let half = n.div_ceil(2);
        for i in 0..half {
            out[2 * i] = buf[i].re * inv_n;
        }
        for i in 0..n / 2 {
            out[2 * i + 1] = buf[n - 1 - i].re * inv_n;
        }
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        self.inverse_into(coeffs, &mut out);
        out
    }
}

/// Orthonormal DCT-II.
pub fn dct_forward(x: &[f64]) -> Result<Vec<f64>> {
    Ok(Dct::new(x.len())?.forward(x))
}

/// Orthonormal DCT-III, the exact inverse of [`dct_forward`].
pub fn dct_inverse(c: &[f64]) -> Result<Vec<f64>> {
    Ok(Dct::new(c.len())?.inverse(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Direct O(L²) orthonormal DCT-II.
    fn matrix_dct(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let nf = n as f64;
        (0..n)
            .map(|k| {
                let s: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        v * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * nf)).cos()
                    })
                    .sum();
                s * if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() }
            })
            .collect()
    }

    #[test]
    fn constant_vector_concentrates_in_dc() {
        let y = dct_forward(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-12);
        assert!(y[1..].iter().all(|v| v.abs() < 1e-12));
        assert_eq!(dct_forward(&[0.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn unit_impulse_matches_matrix() {
        let y = dct_forward(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let expect = [0.5, 0.653_281_482_438_188_3, 0.5, 0.270_598_050_073_098_5];
        for (a, b) in y.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{y:?}");
        }
        assert_eq!(y.len(), matrix_dct(&[1.0, 0.0, 0.0, 0.0]).len());
    }

    #[test]
    fn matches_matrix_oracle_for_many_lengths() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for n in [1usize, 2, 3, 5, 7, 8, 16, 31, 64, 100, 255] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = dct_forward(&x).unwrap();
            let slow = matrix_dct(&x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for n in [1usize, 4, 9, 128, 257] {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let back = dct_inverse(&dct_forward(&x).unwrap()).unwrap();
            let dev = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-10, "n={n} dev={dev}");
        }
        let ones = dct_inverse(&[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(dct_inverse(&[0.0; 6]).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn truncated_inverse_is_adjoint_of_truncated_forward() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let dct = Dct::new(40).unwrap();
        let x: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..11).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut ax = vec![0.0; 11];
        dct.forward_into(&x, &mut ax);
        let aty = dct.inverse(&r);
        let lhs: f64 = ax.iter().zip(&r).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(dct_forward(&[]).is_err());
        assert!(dct_inverse(&[]).is_err());
    }
}
