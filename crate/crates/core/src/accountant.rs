//! Moments accountant for the subsampled Gaussian mechanism.
//!
//! The log-moment of order λ compares `η₀ = N(0, σ²)` with the mixture
//! `η₁ = (1 − q)·N(0, σ²) + q·N(1, σ²)` in both directions:
//!
//! ```text
//! α(λ) = log max( ∫ η₀ (η₀/η₁)^λ dx , ∫ η₁ (η₁/η₀)^λ dx )
//! ```
//!
//! Both integrands are evaluated in log space and rescaled by their maximum
//! before integration. Moments compose additively over rounds and the
//! resulting ε is `min_λ (T·α(λ) − ln δ) / λ`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

pub const DEFAULT_LAMBDA_MAX: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    /// Noise multiplier: noise std divided by the sensitivity.
    pub sigma: f64,
    /// Per-round sampling probability of a client.
    pub q: f64,
    pub delta: f64,
    pub steps: u64,
}

impl PrivacyParams {
    pub fn validate(&self) -> Result<()> {
        check_sigma_q(self.sigma, self.q)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpend {
    pub epsilon: f64,
    pub lambda_star: u32,
    pub delta: f64,
}

fn check_sigma_q(sigma: f64, q: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!("sampling probability must lie in (0, 1], got {q}")));
    }
    Ok(())
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log ∫ exp(logf(x)) dx` over `[a, b]`.
fn log_integral<F: Fn(f64) -> f64>(logf: F, a: f64, b: f64, probes: &[f64], panels: usize) -> Result<f64> {
    let grid = 4 * panels;
    let step = (b - a) / grid as f64;
    let peak = (0..=grid)
        .map(|i| a + step * i as f64)
        .chain(probes.iter().copied().filter(|p| *p >= a && *p <= b))
        .map(&logf)
        .fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::numeric("log-moment integrand has no finite maximum"));
    }
    // exp(logf − peak) carries relative rounding noise of order eps·|logf|,
    // so the attainable tolerance degrades with the size of the exponent.
    let scale = peak.abs().max(1.0);
    let tol = 1e-12f64.max(64.0 * f64::EPSILON * scale);
    let mass = quadrature::integrate(|x| (logf(x) - peak).exp(), a, b, panels, tol)?;
    if !(mass > 0.0) {
        return Err(Error::numeric("log-moment integral vanished"));
    }
    Ok(peak + mass.ln())
}

/// Log-moment `α(λ | q)` of one round of the subsampled Gaussian mechanism.
pub fn log_moment(lambda: u32, sigma: f64, q: f64) -> Result<f64> {
    if lambda == 0 {
        return Err(Error::invalid("moment order must be at least 1"));
    }
    check_sigma_q(sigma, q)?;
    let l = f64::from(lambda);
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let norm = ((2.0 * std::f64::consts::PI).sqrt() * sigma).ln();
    let ln_q = q.ln();
    let ln_1mq = if q < 1.0 { (-q).ln_1p() } else { f64::NEG_INFINITY };
    let log_eta0 = move |x: f64| -x * x * inv2s2 - norm;
    let log_eta1 = move |x: f64| {
        let shifted = ln_q - (x - 1.0) * (x - 1.0) * inv2s2 - norm;
        log_add_exp(ln_1mq + log_eta0(x), shifted)
    };

    // E₁ peaks near x = −λ and E₂ near x = λ + 1 once the mixture tail
    // dominates; both bulks sit within a few σ of [0, 1].
    let tail = sigma * ((2.0 * l).sqrt() + 12.0);
    let (a, b) = (-l - tail, l + 1.0 + tail);
    let panels = (((b - a) / (0.5 * sigma)).ceil() as usize).clamp(16, 4096);
    let probes = [-l, 0.0, 0.5, 1.0, l + 1.0];

    let e1 = log_integral(|x| (l + 1.0) * log_eta0(x) - l * log_eta1(x), a, b, &probes, panels)?;
    let e2 = log_integral(|x| (l + 1.0) * log_eta1(x) - l * log_eta0(x), a, b, &probes, panels)?;
    Ok(e1.max(e2))
}

/// Precomputed log-moments for a fixed `(σ, q, δ)`; answers ε for any number
/// of composed rounds without further integration.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentsAccountant {
    pub sigma: f64,
    pub q: f64,
    pub delta: f64,
    /// `alphas[i]` is the log-moment of order `i + 1`.
    pub alphas: Vec<f64>,
}

impl MomentsAccountant {
    pub fn new(sigma: f64, q: f64, delta: f64, lambda_max: u32) -> Result<Self> {
        check_sigma_q(sigma, q)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        if lambda_max == 0 {
            return Err(Error::invalid("lambda_max must be at least 1"));
        }
        let alphas = (1..=lambda_max).map(|l| log_moment(l, sigma, q)).collect::<Result<Vec<_>>>()?;
        Ok(MomentsAccountant { sigma, q, delta, alphas })
    }

    /// `(steps·α(λ) − ln δ)/λ` for every order.
    pub fn bounds(&self, steps: u64) -> Vec<f64> {
        let ln_delta = self.delta.ln();
        self.alphas
            .iter()
            .enumerate()
            .map(|(i, a)| (steps as f64 * a - ln_delta) / (i + 1) as f64)
            .collect()
    }

    pub fn spend(&self, steps: u64) -> PrivacySpend {
        let (best, eps) = self
            .bounds(steps)
            .into_iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        PrivacySpend { epsilon: eps.max(0.0), lambda_star: best as u32 + 1, delta: self.delta }
    }
}

/// ε after `params.steps` rounds, minimized over integer orders `1..=lambda_max`.
pub fn epsilon_for(params: &PrivacyParams, lambda_max: u32) -> Result<PrivacySpend> {
    params.validate()?;
    Ok(MomentsAccountant::new(params.sigma, params.q, params.delta, lambda_max)?.spend(params.steps))
}

/// `dim` i.i.d. draws from `N(0, std²)`.
pub fn gaussian_vector<R: Rng + ?Sized>(dim: usize, std: f64, rng: &mut R) -> Vec<f64> {
    if std == 0.0 {
        return vec![0.0; dim];
    }
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * std
        })
        .collect()
}
