//! Experiment orchestration: configuration, the round loop, bandwidth and
//! privacy bookkeeping, evaluation and result files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::MomentsAccountant;
use crate::bpdn::{decompress, SolverOptions};
use crate::codec::{Codec, SensingConfig};
use crate::dct::Dct;
use crate::error::{Error, Result};
use crate::fl::{self, ClientUpdate, HyperParams, LocalData, RoundContext, Scheme, ServerState};
use crate::ml::{self, Dataset, Model, ModelSpec, PartitionMode, SyntheticSpec};
use crate::rng;
use crate::secure_agg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Keep only the first records of each split.
        #[serde(default)]
        limit_train: Option<usize>,
        #[serde(default)]
        limit_test: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSpec {
    /// Compression ratio `r = m / n`; ignored by FL-STD(-DP).
    pub ratio: f64,
    #[serde(default = "one_chunk")]
    pub chunks: usize,
    /// Shuffle seed; derived from the master seed when absent.
    #[serde(default)]
    pub shuffle_seed: Option<u64>,
}

fn one_chunk() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" | "json-lines" => Ok(OutputFormat::Jsonl),
            _ => Err(Error::invalid(format!("unknown output format `{s}` (csv | jsonl)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub scheme: Scheme,
    pub hyper: HyperParams,
    pub sensing: SensingSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    pub model: ModelSpec,
    pub data: DataSource,
    pub clients: usize,
    #[serde(default = "iid")]
    pub partition: PartitionMode,
    /// Balance every client's shard by dropping majority-class records.
    #[serde(default)]
    pub downsample: bool,
    /// Give every client at least one record of this class (iid only).
    #[serde(default)]
    pub guarantee_class: Option<usize>,
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "one_round")]
    pub eval_every: usize,
    /// Fill the `wallclock_ms` column; off keeps result files reproducible.
    #[serde(default)]
    pub timing: bool,
}

fn iid() -> PartitionMode {
    PartitionMode::Iid
}

fn one_round() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // Relative data paths are resolved against the config's directory.
        if let (DataSource::Idx { train_images, train_labels, test_images, test_labels, .. }, Some(dir)) =
            (&mut cfg.data, path.parent())
        {
            for p in [train_images, train_labels, test_images, test_labels] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate(self.scheme)?;
        self.model.validate()?;
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        let r = self.sensing.ratio;
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::Config(format!("compression ratio r={r} must lie in (0, 1]")));
        }
        if self.sensing.chunks == 0 {
            return Err(Error::Config("chunk count must be positive".into()));
        }
        if self.clients == 0 {
            return Err(Error::Config("need at least one client".into()));
        }
        fl::client_count(self.clients, self.hyper.client_fraction).map_err(|e| Error::Config(e.to_string()))?;
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        if let DataSource::Idx { train_images, train_labels, test_images, test_labels, .. } = &self.data {
            for p in [train_images, train_labels, test_images, test_labels] {
                if !p.is_file() {
                    return Err(Error::Config(format!("data file {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Compression ratio actually charged by the bandwidth formula.
    pub fn effective_ratio(&self) -> f64 {
        if self.scheme.is_compressed() {
            self.sensing.ratio
        } else {
            1.0
        }
    }

    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        match &self.data {
            DataSource::Synthetic(spec) => spec.generate(),
            DataSource::Idx { train_images, train_labels, test_images, test_labels, limit_train, limit_test } => {
                let cut = |d: Dataset, limit: &Option<usize>| match limit {
                    Some(n) if *n < d.len() => d.subset(&(0..*n).collect::<Vec<_>>()),
                    _ => d,
                };
                let train = cut(ml::load_idx_files(train_images, train_labels)?, limit_train);
                let test = cut(ml::load_idx_files(test_images, test_labels)?, limit_test);
                Ok((train, test))
            }
        }
    }
}

/// `r · n · 32 · rounds · C` bits.
pub fn bandwidth_cost(r: f64, n: usize, rounds: usize, c: f64) -> f64 {
    r * n as f64 * 32.0 * rounds as f64 * c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub scheme: Scheme,
    pub r: f64,
    /// Privacy spent so far; absent for non-private schemes.
    pub epsilon: Option<f64>,
    pub cumulative_cost_bits: f64,
    /// `cumulative_cost_bits / 10⁶`.
    pub cost_mbits: f64,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub auroc: f64,
    pub wallclock_ms: f64,
    /// Solver iterations since the previous record (compressed sensing only).
    pub solver_iterations: Option<usize>,
    /// Secure-aggregation ring size of the latest round.
    pub ring_p: Option<u64>,
}

pub const CSV_HEADER: &str = "round,scheme,r,epsilon,cumulative_cost_bits,cost_mbits,accuracy,balanced_accuracy,auroc,wallclock_ms,solver_iterations,ring_p";

/// `x` with six significant digits, `%g`-style.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-4..6).contains(&exp) {
        trim(format!("{x:.*}", (5 - exp).max(0) as usize))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa.to_string()), exp.abs())
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RoundRecord {
    pub fn csv_row(&self) -> String {
        [
            self.round.to_string(),
            self.scheme.to_string(),
            fmt_sig(self.r),
            opt(self.epsilon.map(fmt_sig)),
            fmt_sig(self.cumulative_cost_bits),
            fmt_sig(self.cost_mbits),
            fmt_sig(self.accuracy),
            fmt_sig(self.balanced_accuracy),
            fmt_sig(self.auroc),
            fmt_sig(self.wallclock_ms),
            opt(self.solver_iterations),
            opt(self.ring_p),
        ]
        .join(",")
    }

    pub fn json_line(&self) -> String {
        let num = |x: f64| if x.is_finite() { fmt_sig(x) } else { "null".into() };
        let maybe = |x: Option<String>| x.unwrap_or_else(|| "null".into());
        format!(
            "{{\"round\":{},\"scheme\":\"{}\",\"r\":{},\"epsilon\":{},\"cumulative_cost_bits\":{},\"cost_mbits\":{},\"accuracy\":{},\"balanced_accuracy\":{},\"auroc\":{},\"wallclock_ms\":{},\"solver_iterations\":{},\"ring_p\":{}}}",
            self.round,
            self.scheme,
            num(self.r),
            maybe(self.epsilon.map(num)),
            num(self.cumulative_cost_bits),
            num(self.cost_mbits),
            num(self.accuracy),
            num(self.balanced_accuracy),
            num(self.auroc),
            num(self.wallclock_ms),
            maybe(self.solver_iterations.map(|v| v.to_string())),
            maybe(self.ring_p.map(|v| v.to_string())),
        )
    }
}

/// Streams records to a file, flushing after each one so that a failed run
/// keeps everything recorded before the failure.
pub struct RecordWriter {
    out: std::io::BufWriter<std::fs::File>,
    format: OutputFormat,
}

impl RecordWriter {
    pub fn create(path: &Path, format: OutputFormat) -> Result<Self> {
        let file = std::fs::File::create(path)?;
        let mut w = RecordWriter { out: std::io::BufWriter::new(file), format };
        if format == OutputFormat::Csv {
            writeln!(w.out, "{CSV_HEADER}")?;
            w.out.flush()?;
        }
        Ok(w)
    }

    pub fn write(&mut self, rec: &RoundRecord) -> Result<()> {
        match self.format {
            OutputFormat::Csv => writeln!(self.out, "{}", rec.csv_row())?,
            OutputFormat::Jsonl => writeln!(self.out, "{}", rec.json_line())?,
        }
        self.out.flush()?;
        Ok(())
    }
}

pub fn emit_results(records: &[RoundRecord], path: &Path, format: OutputFormat) -> Result<()> {
    let mut w = RecordWriter::create(path, format)?;
    records.iter().try_for_each(|r| w.write(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Accuracy,
    BalancedAccuracy,
    Auroc,
}

impl Metric {
    pub fn of(self, r: &RoundRecord) -> f64 {
        match self {
            Metric::Accuracy => r.accuracy,
            Metric::BalancedAccuracy => r.balanced_accuracy,
            Metric::Auroc => r.auroc,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStop {
    /// Index (0-based) of the evaluation at which training should stop.
    pub stop_at: Option<usize>,
    /// Index of the best evaluation seen up to the stop (or the end).
    pub best: usize,
}

/// Stop once `metric` has not improved for `patience` consecutive evaluations.
pub fn early_stop(records: &[RoundRecord], patience: usize, metric: Metric) -> Result<EarlyStop> {
    if records.is_empty() {
        return Err(Error::invalid("no records to inspect"));
    }
    let mut best = 0;
    for i in 1..records.len() {
        if metric.of(&records[i]) > metric.of(&records[best]) {
            best = i;
        } else if i - best >= patience {
            return Ok(EarlyStop { stop_at: Some(i), best });
        }
    }
    Ok(EarlyStop { stop_at: None, best })
}

/// Per-round diagnostics that do not go into result files.
#[derive(Debug, Clone)]
pub struct RoundTrace {
    pub round: usize,
    pub clients: Vec<usize>,
    pub lambda: Option<f64>,
    pub solver_iterations: usize,
    pub solver_converged: Option<bool>,
    pub ef_gap: Option<f64>,
    pub ring: Option<secure_agg::RingParams>,
}

pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub traces: Vec<RoundTrace>,
    pub state: ServerState,
    pub model: ModelSpec,
}

fn seed_index(round: usize, client: usize) -> u64 {
    ((round as u64) << 32) | client as u64
}

/// Everything that stays fixed across rounds.
struct Setup {
    train: Dataset,
    test: Dataset,
    shards: Vec<Vec<usize>>,
    codec: Option<Codec>,
    freq: Option<(Dct, usize)>,
    /// Coordinates per round for FL-RND.
    rnd_m: usize,
    accountant: Option<MomentsAccountant>,
    k: usize,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let (train, test) = cfg.load_data()?;
    if train.dim != cfg.model.input_dim() || test.dim != train.dim {
        return Err(Error::Config(format!(
            "model input width {} does not match the data width {}",
            cfg.model.input_dim(),
            train.dim
        )));
    }
    let outputs = cfg.model.n_outputs();
    if (outputs == 1 && train.n_classes != 2) || (outputs > 1 && outputs != train.n_classes) {
        return Err(Error::Config(format!("model head of width {outputs} cannot fit {} classes", train.n_classes)));
    }
    let seed = cfg.master_seed;
    let mut prng = rng::stream(rng::derive_seed(seed, "partition", 0));
    let part = ml::partition(&train.labels, train.n_classes, cfg.clients, cfg.partition, cfg.guarantee_class, &mut prng)?;
    let mut shards = part.clients;
    if cfg.downsample {
        for (k, shard) in shards.iter_mut().enumerate() {
            let mut r = rng::stream(rng::derive_seed(seed, "downsample", k as u64));
            *shard = ml::downsample(&train, shard, &mut r)?;
        }
    }
    let n = cfg.model.n_params();
    let ratio = cfg.sensing.ratio;
    let codec = match cfg.scheme.base() {
        Scheme::Cs => {
            let shuffle = cfg.sensing.shuffle_seed.unwrap_or_else(|| rng::derive_seed(seed, "shuffle", 0));
            Some(Codec::new(SensingConfig::with_ratio(n, ratio, cfg.sensing.chunks, shuffle)?)?)
        }
        _ => None,
    };
    let m_flat = ((ratio * n as f64).round() as usize).clamp(1, n);
    let freq = match cfg.scheme.base() {
        Scheme::Freq => Some((Dct::new(n)?, m_flat)),
        _ => None,
    };
    let k = fl::client_count(cfg.clients, cfg.hyper.client_fraction)?;
    let accountant = if cfg.scheme.is_dp() && cfg.hyper.sigma > 0.0 {
        Some(MomentsAccountant::new(
            cfg.hyper.sigma,
            cfg.hyper.client_fraction,
            cfg.hyper.delta,
            crate::accountant::DEFAULT_LAMBDA_MAX,
        )?)
    } else {
        None
    };
    Ok(Setup { train, test, shards, codec, freq, rnd_m: m_flat, accountant, k })
}

/// Run every round, handing each record to `sink` as soon as it exists.
pub fn run_experiment_with(cfg: &ExperimentConfig, sink: &mut dyn FnMut(&RoundRecord) -> Result<()>) -> Result<RunOutput> {
    let setup = prepare(cfg)?;
    let seed = cfg.master_seed;
    let hp = &cfg.hyper;
    let model = &cfg.model;
    let n = model.n_params();
    let w0 = model.init(&mut rng::stream(rng::derive_seed(seed, "init", 0)));
    let m_state = setup.codec.as_ref().map_or(0, |c| c.config().m);
    let mut state = ServerState::new(w0, m_state);
    let r = cfg.effective_ratio();
    let started = Instant::now();
    let mut records = Vec::new();
    let mut traces = Vec::new();
    let mut iters_since = 0usize;

    for t in 1..=hp.rounds {
        let round = (|| -> Result<RoundTrace> {
            let mut srng = rng::stream(rng::derive_seed(seed, "sample-clients", t as u64));
            let clients = fl::sample_clients(cfg.clients, hp.client_fraction, &mut srng)?;
            let k = clients.len();
            debug_assert_eq!(k, setup.k);
            let indices = match cfg.scheme.base() {
                Scheme::Rnd => Some(fl::rnd_indices(n, setup.rnd_m, rng::derive_seed(seed, "rnd-index", t as u64))),
                _ => None,
            };
            let (ring, masks) = if cfg.scheme.is_dp() && hp.masking {
                let ring = fl::round_ring(hp, k)?;
                let len = match cfg.scheme.base() {
                    Scheme::Std => n,
                    Scheme::Cs => m_state,
                    _ => setup.rnd_m,
                };
                let masks = secure_agg::gen_masks(k, len, &ring, rng::derive_seed(seed, "mask", t as u64));
                (Some(ring), masks)
            } else {
                (None, Vec::new())
            };
            let ctx = RoundContext {
                scheme: cfg.scheme,
                k,
                codec: setup.codec.as_ref(),
                indices: indices.as_deref(),
                freq: setup.freq.as_ref().map(|(d, m)| (d, *m)),
                ring: ring.map(|r| (r, masks.as_slice())),
            };
            let w = &state.w;
            let updates: Vec<ClientUpdate> = clients
                .par_iter()
                .enumerate()
                .map(|(slot, &client)| {
                    let idx = seed_index(t, client);
                    let mut train_rng = rng::stream(rng::derive_seed(seed, "local-sgd", idx));
                    let local = LocalData { data: &setup.train, rows: &setup.shards[client] };
                    let delta = fl::client_update_std(model, w, local, hp, &mut train_rng)?;
                    let mut noise_rng = rng::stream(rng::derive_seed(seed, "dp-noise", idx));
                    fl::client_update(&ctx, hp, &delta, slot, &mut noise_rng)
                })
                .collect::<Result<_>>()?;
            let sizes: Vec<usize> = clients.iter().map(|&c| setup.shards[c].len()).collect();
            let info = fl::server_round(&ctx, &mut state, &updates, &sizes, hp, &cfg.solver)?;
            if state.w.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric("global weights became non-finite"));
            }
            Ok(RoundTrace {
                round: t,
                clients,
                lambda: info.lambda,
                solver_iterations: info.solver_iterations,
                solver_converged: info.solver_converged,
                ef_gap: info.ef_gap,
                ring: info.ring,
            })
        })()
        .map_err(|e| e.in_round(t))?;
        iters_since += round.solver_iterations;
        let ring_p = round.ring.map(|r| r.p);
        traces.push(round);

        if t % cfg.eval_every == 0 || t == hp.rounds {
            let report = ml::evaluate(model, &state.w, &setup.test)?;
            let cost = bandwidth_cost(r, n, t, hp.client_fraction);
            let rec = RoundRecord {
                round: t,
                scheme: cfg.scheme,
                r,
                epsilon: match (&setup.accountant, cfg.scheme.is_dp()) {
                    (Some(acc), _) => Some(acc.spend(t as u64).epsilon),
                    (None, true) => Some(f64::INFINITY),
                    (None, false) => None,
                },
                cumulative_cost_bits: cost,
                cost_mbits: cost / 1e6,
                accuracy: report.accuracy,
                balanced_accuracy: report.balanced_accuracy,
                auroc: report.auroc,
                wallclock_ms: if cfg.timing { started.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
                solver_iterations: setup.codec.as_ref().map(|_| iters_since),
                ring_p,
            };
            iters_since = 0;
            sink(&rec)?;
            records.push(rec);
        }
    }
    Ok(RunOutput { records, traces, state, model: model.clone() })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    run_experiment_with(cfg, &mut |_| Ok(()))
}

/// Median L2 norm of one local update per client, from the initial model.
pub fn calibrate_from_config(cfg: &ExperimentConfig) -> Result<f64> {
    let setup = prepare(cfg)?;
    let w0 = cfg.model.init(&mut rng::stream(rng::derive_seed(cfg.master_seed, "init", 0)));
    let codec = setup.codec.as_ref();
    let norms: Vec<f64> = (0..setup.shards.len())
        .into_par_iter()
        .map(|client| {
            let mut r = rng::stream(rng::derive_seed(cfg.master_seed, "calibration", client as u64));
            let local = LocalData { data: &setup.train, rows: &setup.shards[client] };
            let delta = fl::client_update_std(&cfg.model, &w0, local, &cfg.hyper, &mut r)?;
            // The clipped object is the transmitted payload.
            let payload = match (cfg.scheme.base(), codec, &setup.freq) {
                (Scheme::Cs, Some(c), _) => c.compress(&delta)?.coeffs,
                (Scheme::Freq, _, Some((dct, m))) => fl::lowpass_coeffs(dct, &delta, *m),
                (Scheme::Rnd, _, _) => {
                    fl::sample_coords(&delta, &fl::rnd_indices(delta.len(), setup.rnd_m, rng::derive_seed(cfg.master_seed, "rnd-index", 0)))
                }
                _ => delta,
            };
            Ok(fl::l2_norm(&payload))
        })
        .collect::<Result<_>>()?;
    fl::calibrate_sensitivity(&norms)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodecTrial {
    pub trial: usize,
    pub rel_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_norm: f64,
}

/// Planted-sparse recovery experiments: `sparsity` ±1 spikes in a length-`n`
/// vector, compressed to `m` measurements over `p` chunks, optional Gaussian
/// measurement noise, decompressed with `solver`.
pub fn codec_trials(
    n: usize,
    m: usize,
    p: usize,
    sparsity: usize,
    noise_std: f64,
    trials: usize,
    seed: u64,
    solver: &SolverOptions,
    lambda: Option<f64>,
) -> Result<Vec<CodecTrial>> {
    if sparsity == 0 || sparsity > n {
        return Err(Error::invalid(format!("sparsity must lie in 1..={n}")));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid("noise std must be finite and ≥ 0"));
    }
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::stream(rng::derive_seed(seed, "codec-trial", trial as u64));
            let shuffle = r.random::<u64>();
            let codec = Codec::new(SensingConfig::new(n, m, p, shuffle)?)?;
            let mut x = vec![0.0; n];
            for i in rng::sample_indices_with(&mut r, n, sparsity) {
                x[i] = if r.random::<bool>() { 1.0 } else { -1.0 };
            }
            let mut y = codec.compress(&x)?;
            if noise_std > 0.0 {
                let normal = Normal::new(0.0, noise_std).map_err(|e| Error::invalid(e.to_string()))?;
                y.coeffs.iter_mut().for_each(|c| *c += normal.sample(&mut r));
            }
            let lam = match lambda {
                Some(l) => l,
                None if noise_std > 0.0 => noise_std * (2.0 * (m as f64).ln()).sqrt(),
                None => 1e-6 * crate::bpdn::max_correlation(&codec, &y),
            };
            let (s, reports) = decompress(&codec, &y, &SolverOptions { lambda: lam, ..*solver })?;
            let err = s.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / fl::l2_norm(&x);
            Ok(CodecTrial {
                trial,
                rel_error: err,
                iterations: reports.iter().map(|r| r.iterations).sum(),
                converged: reports.iter().all(|r| r.converged),
                residual_norm: reports.iter().map(|r| r.residual_norm * r.residual_norm).sum::<f64>().sqrt(),
            })
        })
        .collect()
}

/// Train a model centrally (one client holding all data); used to sanity
/// check a model/data pair before federating it.
pub fn centralized_baseline(spec: &ModelSpec, train: &Dataset, test: &Dataset, epochs: usize, eta: f64, batch: usize, seed: u64) -> Result<f64> {
    let mut w = spec.init(&mut rng::stream(rng::derive_seed(seed, "init", 0)));
    let rows: Vec<usize> = (0..train.len()).collect();
    let mut r = rng::stream(rng::derive_seed(seed, "central-sgd", 0));
    ml::sgd(spec as &dyn Model, train, &rows, &mut w, epochs, eta, batch, &mut r)?;
    Ok(ml::evaluate(spec, &w, test)?.accuracy)
}
