//! Client and server steps for every federated scheme.
//!
//! A round is: sample clients, let each train locally and build its payload
//! ([`client_update`]), then fold the payloads into the [`ServerState`]
//! ([`server_round`]). Payloads are reduced in client-index order so the
//! result never depends on thread scheduling.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::accountant::gaussian_vector;
use crate::bpdn::{decompress, max_correlation, SolveReport, SolverOptions};
use crate::codec::{Codec, CompressedUpdate};
use crate::dct::Dct;
use crate::error::{Error, Result};
use crate::ml::{sgd, Dataset, Model};
use crate::rng;
use crate::secure_agg::{self, MaskedVector, RingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "fl-std")]
    Std,
    #[serde(rename = "fl-std-dp")]
    StdDp,
    #[serde(rename = "fl-cs")]
    Cs,
    #[serde(rename = "fl-cs-dp")]
    CsDp,
    #[serde(rename = "fl-rnd")]
    Rnd,
    #[serde(rename = "fl-rnd-dp")]
    RndDp,
    #[serde(rename = "fl-freq")]
    Freq,
    #[serde(rename = "fl-freq-dp")]
    FreqDp,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Std,
        Scheme::StdDp,
        Scheme::Cs,
        Scheme::CsDp,
        Scheme::Rnd,
        Scheme::RndDp,
        Scheme::Freq,
        Scheme::FreqDp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Std => "fl-std",
            Scheme::StdDp => "fl-std-dp",
            Scheme::Cs => "fl-cs",
            Scheme::CsDp => "fl-cs-dp",
            Scheme::Rnd => "fl-rnd",
            Scheme::RndDp => "fl-rnd-dp",
            Scheme::Freq => "fl-freq",
            Scheme::FreqDp => "fl-freq-dp",
        }
    }

    pub fn is_dp(self) -> bool {
        matches!(self, Scheme::StdDp | Scheme::CsDp | Scheme::RndDp | Scheme::FreqDp)
    }

    /// The non-private scheme with the same payload.
    pub fn base(self) -> Scheme {
        match self {
            Scheme::StdDp => Scheme::Std,
            Scheme::CsDp => Scheme::Cs,
            Scheme::RndDp => Scheme::Rnd,
            Scheme::FreqDp => Scheme::Freq,
            s => s,
        }
    }

    pub fn is_compressed(self) -> bool {
        self.base() != Scheme::Std
    }

    /// Averaging rule when the configuration does not override it: data-size
    /// weights for the plain, sampled and low-pass schemes, uniform for FL-CS.
    pub fn default_weighting(self) -> Weighting {
        match self {
            Scheme::Std | Scheme::Rnd | Scheme::Freq => Weighting::DataSize,
            _ => Weighting::Uniform,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// `|D_k| / Σ_j |D_j|` over the sampled clients.
    DataSize,
    /// `1 / |K|`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    /// Client SGD step size.
    pub eta: f64,
    #[serde(default = "one")]
    pub eta_g: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Clipping bound and sensitivity `S`.
    #[serde(default = "one")]
    pub sensitivity: f64,
    /// Noise multiplier; only read by the private schemes.
    #[serde(default)]
    pub sigma: f64,
    /// Fraction of clients sampled per round.
    pub client_fraction: f64,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Override of the scheme's averaging rule (non-private schemes only).
    #[serde(default)]
    pub weighting: Option<Weighting>,
    /// Fixed BPDN weight; by default it is derived each round.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Mask private payloads over the fixed-point ring. When off, the noisy
    /// clipped payloads are summed in floating point (test mode).
    #[serde(default = "yes")]
    pub masking: bool,
    #[serde(default = "default_frac_bits")]
    pub frac_bits: u32,
}

fn one() -> f64 {
    1.0
}
fn default_rho() -> f64 {
    0.9
}
fn default_delta() -> f64 {
    1e-5
}
fn yes() -> bool {
    true
}
fn default_frac_bits() -> u32 {
    secure_agg::DEFAULT_FRAC_BITS
}

impl HyperParams {
    pub fn validate(&self, scheme: Scheme) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.eta >= 0.0 && self.eta.is_finite()) || !self.eta_g.is_finite() {
            return bad("learning rates must be finite and eta ≥ 0".into());
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("momentum rho={} must lie in [0, 1)", self.rho));
        }
        if !(self.client_fraction > 0.0 && self.client_fraction <= 1.0) {
            return bad(format!("client fraction {} must lie in (0, 1]", self.client_fraction));
        }
        if self.rounds == 0 || self.local_epochs == 0 || self.batch_size == 0 {
            return bad("rounds, local_epochs and batch_size must be positive".into());
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("lambda override {l} must be finite and ≥ 0"));
            }
        }
        if scheme.is_dp() {
            if !(self.sensitivity > 0.0 && self.sensitivity.is_finite()) {
                return bad("private schemes need a positive finite sensitivity".into());
            }
            if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
                return bad("private schemes need a finite noise multiplier sigma ≥ 0".into());
            }
            if !(self.delta > 0.0 && self.delta < 1.0) {
                return bad(format!("delta={} must lie in (0, 1)", self.delta));
            }
            if self.weighting == Some(Weighting::DataSize) {
                return bad("private schemes average uniformly; data-size weighting is not allowed".into());
            }
        } else if self.sigma != 0.0 {
            return bad(format!("sigma is set but {scheme} is not a private scheme"));
        }
        Ok(())
    }

    pub fn weighting(&self, scheme: Scheme) -> Weighting {
        if scheme.is_dp() {
            Weighting::Uniform
        } else {
            self.weighting.unwrap_or(scheme.default_weighting())
        }
    }

    /// Per-client noise standard deviation `S·σ/√|K|`.
    pub fn client_noise_std(&self, k: usize) -> f64 {
        self.sensitivity * self.sigma / (k as f64).sqrt()
    }
}

/// Global model plus the compressed-domain momentum and error feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub round: usize,
}

impl ServerState {
    /// `m` is the compressed length for FL-CS(-DP); other schemes keep empty
    /// momentum and error vectors.
    pub fn new(w: Vec<f64>, m: usize) -> Self {
        ServerState { w, u: vec![0.0; m], e: vec![0.0; m], round: 0 }
    }
}

/// `|K| = round(C·N)` distinct clients, in ascending order.
pub fn sample_clients<R: RngCore + ?Sized>(n: usize, c: f64, rng: &mut R) -> Result<Vec<usize>> {
    let k = client_count(n, c)?;
    let mut picked = rng::sample_indices_with(rng, n, k);
    picked.sort_unstable();
    Ok(picked)
}

pub fn client_count(n: usize, c: f64) -> Result<usize> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::invalid(format!("client fraction {c} outside (0, 1]")));
    }
    let k = (c * n as f64).round() as usize;
    if k < 1 {
        return Err(Error::invalid(format!("round({c}·{n}) selects no clients")));
    }
    Ok(k.min(n))
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scale `v` so its L2 norm is at most `s`.
pub fn clip(v: &[f64], s: f64) -> Vec<f64> {
    let factor = (l2_norm(v) / s).max(1.0);
    v.iter().map(|x| x / factor).collect()
}

/// Median of the observed update norms.
pub fn calibrate_sensitivity(norms: &[f64]) -> Result<f64> {
    if norms.is_empty() {
        return Err(Error::invalid("cannot calibrate sensitivity from no norms"));
    }
    let mut v = norms.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

pub fn averaging_weights(sizes: &[usize], weighting: Weighting) -> Vec<f64> {
    match weighting {
        Weighting::Uniform => vec![1.0 / sizes.len() as f64; sizes.len()],
        Weighting::DataSize => {
            let total: usize = sizes.iter().sum();
            sizes.iter().map(|&s| s as f64 / total as f64).collect()
        }
    }
}

/// A client's local data: `rows` of a shared dataset.
#[derive(Clone, Copy)]
pub struct LocalData<'a> {
    pub data: &'a Dataset,
    pub rows: &'a [usize],
}

/// Local SGD from `w`; returns the weight delta.
pub fn client_update_std<M: Model + ?Sized, R: RngCore + ?Sized>(
    model: &M,
    w: &[f64],
    local: LocalData<'_>,
    hp: &HyperParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut trained = w.to_vec();
    sgd(model, local.data, local.rows, &mut trained, hp.local_epochs, hp.eta, hp.batch_size, rng)?;
    Ok(trained.iter().zip(w).map(|(a, b)| a - b).collect())
}

/// Round-shared coordinate set for FL-RND.
pub fn rnd_indices(n: usize, m: usize, round_seed: u64) -> Vec<usize> {
    rng::sample_indices(n, m.min(n), round_seed)
}

pub fn sample_coords(delta: &[f64], indices: &[usize]) -> Vec<f64> {
    indices.iter().map(|&i| delta[i]).collect()
}

/// First `m` coefficients of the single-block DCT of `delta`.
pub fn lowpass_coeffs(dct: &Dct, delta: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    dct.forward_into(delta, &mut out);
    out
}

/// Clip to `S`, add `G(0, S·σ/√|K|)` noise, and mask when a ring is given.
pub fn privatize<R: RngCore + ?Sized>(
    payload: &[f64],
    hp: &HyperParams,
    k: usize,
    ring: Option<(&RingParams, &[u64])>,
    rng: &mut R,
) -> Result<ClientUpdate> {
    let mut v = clip(payload, hp.sensitivity);
    let noise = gaussian_vector(v.len(), hp.client_noise_std(k), rng);
    v.iter_mut().zip(&noise).for_each(|(a, z)| *a += z);
    match ring {
        Some((ring, mask)) => Ok(ClientUpdate::Masked(secure_agg::encrypt(&v, mask, ring)?)),
        None => Ok(ClientUpdate::Noisy(v)),
    }
}

/// What a client sends.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientUpdate {
    Plain(Vec<f64>),
    Compressed(CompressedUpdate),
    Sampled(Vec<f64>),
    LowPass(Vec<f64>),
    /// Clipped and noised but unmasked (masking disabled).
    Noisy(Vec<f64>),
    Masked(MaskedVector),
}

impl ClientUpdate {
    /// Number of transmitted entries.
    pub fn payload_len(&self) -> usize {
        match self {
            ClientUpdate::Plain(v) | ClientUpdate::Sampled(v) | ClientUpdate::LowPass(v) | ClientUpdate::Noisy(v) => {
                v.len()
            }
            ClientUpdate::Compressed(c) => c.coeffs.len(),
            ClientUpdate::Masked(m) => m.residues.len(),
        }
    }
}

/// Per-round material shared by the server and all sampled clients.
pub struct RoundContext<'a> {
    pub scheme: Scheme,
    pub k: usize,
    pub codec: Option<&'a Codec>,
    /// FL-RND coordinate set.
    pub indices: Option<&'a [usize]>,
    /// FL-FREQ transform over the full model and the kept coefficient count.
    pub freq: Option<(&'a Dct, usize)>,
    /// Ring and per-slot masks for private schemes with masking on.
    pub ring: Option<(RingParams, &'a [Vec<u64>])>,
}

impl RoundContext<'_> {
    fn codec(&self) -> Result<&Codec> {
        self.codec.ok_or_else(|| Error::Protocol(format!("{} round without a sensing codec", self.scheme)))
    }
    fn indices(&self) -> Result<&[usize]> {
        self.indices.ok_or_else(|| Error::Protocol(format!("{} round without an index set", self.scheme)))
    }
    fn freq(&self) -> Result<(&Dct, usize)> {
        self.freq.ok_or_else(|| Error::Protocol(format!("{} round without a transform", self.scheme)))
    }
}

/// Ring for a private round: room for `|K|` payloads bounded by `S` plus
/// six noise standard deviations, doubled for the sign.
pub fn round_ring(hp: &HyperParams, k: usize) -> Result<RingParams> {
    let max_abs = hp.sensitivity + 6.0 * hp.client_noise_std(k);
    secure_agg::derive_modulus_with(2.0 * max_abs, k, hp.frac_bits)
}

/// Build the payload of the client in position `slot` of the round from
/// its local delta.
pub fn client_update<R: RngCore + ?Sized>(
    ctx: &RoundContext<'_>,
    hp: &HyperParams,
    delta: &[f64],
    slot: usize,
    noise_rng: &mut R,
) -> Result<ClientUpdate> {
    let payload = match ctx.scheme.base() {
        Scheme::Std => delta.to_vec(),
        Scheme::Cs => {
            let c = ctx.codec()?.compress(delta)?;
            if !ctx.scheme.is_dp() {
                return Ok(ClientUpdate::Compressed(c));
            }
            c.coeffs
        }
        Scheme::Rnd => sample_coords(delta, ctx.indices()?),
        Scheme::Freq => {
            let (dct, m) = ctx.freq()?;
            lowpass_coeffs(dct, delta, m)
        }
        _ => unreachable!("base() is never private"),
    };
    if !ctx.scheme.is_dp() {
        return Ok(match ctx.scheme {
            Scheme::Std => ClientUpdate::Plain(payload),
            Scheme::Rnd => ClientUpdate::Sampled(payload),
            _ => ClientUpdate::LowPass(payload),
        });
    }
    let ring = match &ctx.ring {
        Some((ring, masks)) => {
            let mask = masks.get(slot).ok_or_else(|| Error::Protocol(format!("no mask issued for client slot {slot}")))?;
            Some((ring, mask.as_slice()))
        }
        None => None,
    };
    privatize(&payload, hp, ctx.k, ring, noise_rng)
}

/// How the BPDN weight is chosen each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    Fixed(f64),
    /// A fraction of `‖Θᵀy‖∞` of the vector being decompressed.
    Relative(f64),
}

impl LambdaRule {
    /// Explicit override, else `1e-6·‖Θᵀy‖∞` without privacy and the noise
    /// floor `σ·S·√(2 ln m)/|K|` of the averaged aggregate with privacy.
    pub fn for_round(scheme: Scheme, hp: &HyperParams, m: usize, k: usize) -> Self {
        match hp.lambda {
            Some(l) => LambdaRule::Fixed(l),
            None if scheme.is_dp() => {
                let ln_m = (m.max(2) as f64).ln();
                LambdaRule::Fixed(hp.sigma * hp.sensitivity * (2.0 * ln_m).sqrt() / k as f64)
            }
            None => LambdaRule::Relative(1e-6),
        }
    }

    fn resolve(self, codec: &Codec, y: &CompressedUpdate) -> f64 {
        match self {
            LambdaRule::Fixed(l) => l,
            LambdaRule::Relative(f) => f * max_correlation(codec, y),
        }
    }
}

/// Diagnostics of one server step.
#[derive(Debug, Clone, Default)]
pub struct RoundInfo {
    pub k: usize,
    pub lambda: Option<f64>,
    pub solver_iterations: usize,
    pub solver_converged: Option<bool>,
    /// `max |e_new + C(s) − (η_G·u + e_old)|` for the compressed-sensing schemes.
    pub ef_gap: Option<f64>,
    pub ring: Option<RingParams>,
    pub reports: Vec<SolveReport>,
    /// Reconstructed update `s` applied to the weights (compressed sensing).
    pub s: Vec<f64>,
}

/// `w ← w + Σ_k weight_k·Δw_k`.
pub fn server_round_std(state: &mut ServerState, updates: &[Vec<f64>], weights: &[f64]) -> Result<()> {
    let avg = weighted_mean(updates, weights, state.w.len())?;
    state.w.iter_mut().zip(&avg).for_each(|(w, d)| *w += d);
    state.round += 1;
    Ok(())
}

/// One FL-CS server step on the averaged measurement `y`. On error the
/// state is left untouched.
pub fn server_step_cs(
    state: &mut ServerState,
    y: &[f64],
    hp: &HyperParams,
    codec: &Codec,
    solver: &SolverOptions,
    rule: LambdaRule,
) -> Result<RoundInfo> {
    let cfg = *codec.config();
    if y.len() != cfg.m || state.u.len() != cfg.m || state.e.len() != cfg.m {
        return Err(Error::invalid(format!(
            "measurement, momentum and error lengths ({}, {}, {}) must all equal m = {}",
            y.len(),
            state.u.len(),
            state.e.len(),
            cfg.m
        )));
    }
    let u: Vec<f64> = state.u.iter().zip(y).map(|(u, y)| hp.rho * u + y).collect();
    let target: Vec<f64> = u.iter().zip(&state.e).map(|(u, e)| hp.eta_g * u + e).collect();
    let target = CompressedUpdate::new(target, cfg)?;
    let lambda = rule.resolve(codec, &target);
    let opts = SolverOptions { lambda, ..*solver };
    let (s, reports) = decompress(codec, &target, &opts)?;
    let cs = codec.compress(&s)?.coeffs;
    let e: Vec<f64> = target.coeffs.iter().zip(&cs).map(|(t, c)| t - c).collect();
    let ef_gap = e.iter().zip(&cs).zip(&target.coeffs).map(|((e, c), t)| (e + c - t).abs()).fold(0.0, f64::max);
    state.w.iter_mut().zip(&s).for_each(|(w, d)| *w += d);
    state.u = u;
    state.e = e;
    state.round += 1;
    Ok(RoundInfo {
        lambda: Some(lambda),
        solver_iterations: reports.iter().map(|r| r.iterations).sum(),
        solver_converged: Some(reports.iter().all(|r| r.converged)),
        ef_gap: Some(ef_gap),
        reports,
        s,
        ..Default::default()
    })
}

/// Average the clients' measurements, then [`server_step_cs`].
pub fn server_round_cs(
    state: &mut ServerState,
    updates: &[CompressedUpdate],
    weights: &[f64],
    hp: &HyperParams,
    codec: &Codec,
    solver: &SolverOptions,
    rule: LambdaRule,
) -> Result<RoundInfo> {
    for u in updates {
        if u.cfg != *codec.config() {
            return Err(Error::invalid("client update was compressed with a different sensing config"));
        }
    }
    let coeffs: Vec<Vec<f64>> = updates.iter().map(|u| u.coeffs.clone()).collect();
    let y = weighted_mean(&coeffs, weights, codec.config().m)?;
    server_step_cs(state, &y, hp, codec, solver, rule)
}

/// Add weighted sampled coordinates to their positions in `w`.
pub fn server_round_rnd(state: &mut ServerState, updates: &[Vec<f64>], weights: &[f64], indices: &[usize]) -> Result<()> {
    let y = weighted_mean(updates, weights, indices.len())?;
    apply_sampled(state, &y, indices)
}

fn apply_sampled(state: &mut ServerState, y: &[f64], indices: &[usize]) -> Result<()> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= state.w.len()) {
        return Err(Error::invalid(format!("coordinate {bad} outside the model")));
    }
    for (&i, v) in indices.iter().zip(y) {
        state.w[i] += v;
    }
    state.round += 1;
    Ok(())
}

/// Weighted low-pass coefficients, zero-filled and inverted over the model.
pub fn server_round_freq(state: &mut ServerState, updates: &[Vec<f64>], weights: &[f64], dct: &Dct, m: usize) -> Result<()> {
    let y = weighted_mean(updates, weights, m)?;
    apply_lowpass(state, &y, dct)
}

fn apply_lowpass(state: &mut ServerState, y: &[f64], dct: &Dct) -> Result<()> {
    if dct.len() != state.w.len() || y.len() > dct.len() {
        return Err(Error::invalid("transform length must equal the model size"));
    }
    let mut full = vec![0.0; dct.len()];
    dct.inverse_into(y, &mut full);
    state.w.iter_mut().zip(&full).for_each(|(w, d)| *w += d);
    state.round += 1;
    Ok(())
}

/// Sum private payloads (unmasking if needed) and divide by `|K|`.
pub fn decode_private(updates: &[ClientUpdate], k: usize) -> Result<Vec<f64>> {
    if updates.len() != k {
        return Err(Error::Protocol(format!("{} private payloads for {k} sampled clients", updates.len())));
    }
    let mean = match updates.first() {
        Some(ClientUpdate::Masked(_)) => {
            let masked = updates
                .iter()
                .map(|u| match u {
                    ClientUpdate::Masked(m) => Ok(m.clone()),
                    _ => Err(Error::Protocol("mixed masked and unmasked payloads".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            let inv = 1.0 / k as f64;
            secure_agg::aggregate(&masked, k)?.into_iter().map(|v| v * inv).collect()
        }
        Some(ClientUpdate::Noisy(first)) => {
            // Same accumulation order as the non-private uniform mean, so a
            // noiseless unmasked round reproduces it bit for bit.
            let inv = 1.0 / k as f64;
            let mut mean = vec![0.0; first.len()];
            for u in updates {
                match u {
                    ClientUpdate::Noisy(v) if v.len() == mean.len() => mean.iter_mut().zip(v).for_each(|(s, x)| *s += inv * x),
                    _ => return Err(Error::Protocol("mixed or mis-sized private payloads".into())),
                }
            }
            mean
        }
        Some(_) => return Err(Error::Protocol("expected private payloads".into())),
        None => return Err(Error::Protocol("no private payloads".into())),
    };
    Ok(mean)
}

/// `w ← w + (1/|K|)·Σ_k Δw̃_k`.
pub fn server_round_std_dp(state: &mut ServerState, updates: &[ClientUpdate], k: usize) -> Result<()> {
    let mean = decode_private(updates, k)?;
    if mean.len() != state.w.len() {
        return Err(Error::invalid("private payload length differs from the model size"));
    }
    state.w.iter_mut().zip(&mean).for_each(|(w, d)| *w += d);
    state.round += 1;
    Ok(())
}

pub fn server_round_cs_dp(
    state: &mut ServerState,
    updates: &[ClientUpdate],
    k: usize,
    hp: &HyperParams,
    codec: &Codec,
    solver: &SolverOptions,
    rule: LambdaRule,
) -> Result<RoundInfo> {
    let mean = decode_private(updates, k)?;
    server_step_cs(state, &mean, hp, codec, solver, rule)
}

/// Dispatch on the context's scheme. `sizes` are the sampled clients'
/// record counts, in the same order as `updates`.
pub fn server_round(
    ctx: &RoundContext<'_>,
    state: &mut ServerState,
    updates: &[ClientUpdate],
    sizes: &[usize],
    hp: &HyperParams,
    solver: &SolverOptions,
) -> Result<RoundInfo> {
    if updates.len() != ctx.k || sizes.len() != ctx.k {
        return Err(Error::Protocol(format!("expected {} client payloads, got {}", ctx.k, updates.len())));
    }
    let weights = averaging_weights(sizes, hp.weighting(ctx.scheme));
    let plain = |want: fn(&ClientUpdate) -> Option<&Vec<f64>>| -> Result<Vec<Vec<f64>>> {
        updates
            .iter()
            .map(|u| want(u).cloned().ok_or_else(|| Error::Protocol(format!("unexpected payload kind for {}", ctx.scheme))))
            .collect()
    };
    let mut info = RoundInfo { k: ctx.k, ring: ctx.ring.as_ref().map(|r| r.0), ..Default::default() };
    match ctx.scheme {
        Scheme::Std => {
            server_round_std(state, &plain(|u| if let ClientUpdate::Plain(v) = u { Some(v) } else { None })?, &weights)?
        }
        Scheme::Rnd => server_round_rnd(
            state,
            &plain(|u| if let ClientUpdate::Sampled(v) = u { Some(v) } else { None })?,
            &weights,
            ctx.indices()?,
        )?,
        Scheme::Freq => {
            let (dct, m) = ctx.freq()?;
            server_round_freq(state, &plain(|u| if let ClientUpdate::LowPass(v) = u { Some(v) } else { None })?, &weights, dct, m)?
        }
        Scheme::Cs => {
            let cs: Vec<CompressedUpdate> = updates
                .iter()
                .map(|u| match u {
                    ClientUpdate::Compressed(c) => Ok(c.clone()),
                    _ => Err(Error::Protocol("fl-cs expects compressed payloads".into())),
                })
                .collect::<Result<_>>()?;
            let codec = ctx.codec()?;
            let rule = LambdaRule::for_round(ctx.scheme, hp, codec.config().m, ctx.k);
            let r = server_round_cs(state, &cs, &weights, hp, codec, solver, rule)?;
            info = RoundInfo { k: ctx.k, ring: info.ring, ..r };
        }
        Scheme::StdDp => server_round_std_dp(state, updates, ctx.k)?,
        Scheme::CsDp => {
            let codec = ctx.codec()?;
            let rule = LambdaRule::for_round(ctx.scheme, hp, codec.config().m, ctx.k);
            let r = server_round_cs_dp(state, updates, ctx.k, hp, codec, solver, rule)?;
            info = RoundInfo { k: ctx.k, ring: info.ring, ..r };
        }
        Scheme::RndDp => {
            let y = decode_private(updates, ctx.k)?;
            apply_sampled(state, &y, ctx.indices()?)?;
        }
        Scheme::FreqDp => {
            let y = decode_private(updates, ctx.k)?;
            apply_lowpass(state, &y, ctx.freq()?.0)?;
        }
    }
    Ok(info)
}

fn weighted_mean(updates: &[Vec<f64>], weights: &[f64], len: usize) -> Result<Vec<f64>> {
    if updates.is_empty() || updates.len() != weights.len() {
        return Err(Error::Protocol(format!("{} updates with {} weights", updates.len(), weights.len())));
    }
    let mut acc = vec![0.0; len];
    for (k, (u, &wk)) in updates.iter().zip(weights).enumerate() {
        if u.len() != len {
            return Err(Error::invalid(format!("update {k} has length {}, expected {len}", u.len())));
        }
        acc.iter_mut().zip(u).for_each(|(a, x)| *a += wk * x);
    }
    Ok(acc)
}
