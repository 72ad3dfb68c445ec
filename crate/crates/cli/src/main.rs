use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedcs::accountant::{MomentsAccountant, PrivacyParams, DEFAULT_LAMBDA_MAX};
use fedcs::bpdn::SolverOptions;
use fedcs::fl::Scheme;
use fedcs::sim::{self, fmt_sig, ExperimentConfig, OutputFormat, RecordWriter, CSV_HEADER};

#[derive(Parser)]
#[command(name = "fedcs", version, about = "Federated learning with compressed, privatized updates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and stream its round records.
    #[command(allow_negative_numbers = true)]
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Result file; stdout when absent from both flags and config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<OutputFormat>,
        /// Replace the configured sensitivity with the median client payload norm.
        #[arg(long)]
        calibrate: bool,
    },
    /// Print the median client payload norm for a config (sensitivity calibration).
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Privacy spent after `steps` subsampled Gaussian rounds.
    #[command(allow_negative_numbers = true)]
    Accountant {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_LAMBDA_MAX)]
        lambda_max: u32,
        /// Print every order's log-moment and ε bound instead of the summary.
        #[arg(long)]
        table: bool,
    },
    /// Planted-sparse recovery trials through compress + BPDN decompress.
    #[command(allow_negative_numbers = true)]
    Codec {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long)]
        sparsity: usize,
        #[arg(long, default_value_t = 0.0)]
        noise_std: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixed BPDN weight; derived from the noise level when absent.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        /// One row per trial instead of summary statistics.
        #[arg(long)]
        per_trial: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}

fn load(config: &PathBuf, scheme: Option<Scheme>, ratio: Option<f64>) -> fedcs::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = scheme {
        cfg.scheme = s;
    }
    if let Some(r) = ratio {
        cfg.sensing.ratio = r;
    }
    Ok(cfg)
}

fn dispatch(command: Command) -> fedcs::Result<()> {
    match command {
        Command::Run { config, scheme, ratio, sigma, rounds, seed, out, format, calibrate } => {
            let mut cfg = load(&config, scheme, ratio)?;
            if let Some(s) = sigma {
                cfg.hyper.sigma = s;
            }
            if let Some(t) = rounds {
                cfg.hyper.rounds = t;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let format = format.unwrap_or(cfg.format);
            if calibrate {
                cfg.hyper.sensitivity = sim::calibrate_from_config(&cfg)?;
                eprintln!("calibrated sensitivity S = {}", fmt_sig(cfg.hyper.sensitivity));
            }
            match out.or_else(|| cfg.output.clone()) {
                Some(path) => {
                    let mut writer = RecordWriter::create(&path, format)?;
                    sim::run_experiment_with(&cfg, &mut |r| writer.write(r))?;
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    if format == OutputFormat::Csv {
                        writeln!(stdout, "{CSV_HEADER}")?;
                    }
                    sim::run_experiment_with(&cfg, &mut |r| {
                        let line = if format == OutputFormat::Csv { r.csv_row() } else { r.json_line() };
                        writeln!(stdout, "{line}")?;
                        stdout.flush()?;
                        Ok(())
                    })?;
                }
            }
        }
        Command::Calibrate { config, scheme, ratio } => {
            let cfg = load(&config, scheme, ratio)?;
            println!("{}", fmt_sig(sim::calibrate_from_config(&cfg)?));
        }
        Command::Accountant { sigma, q, steps, delta, lambda_max, table } => {
            PrivacyParams { sigma, q, delta, steps }.validate()?;
            let acc = MomentsAccountant::new(sigma, q, delta, lambda_max)?;
            if table {
                println!("lambda,log_moment,epsilon_bound");
                for (i, (a, b)) in acc.alphas.iter().zip(acc.bounds(steps)).enumerate() {
                    println!("{},{},{}", i + 1, fmt_sig(*a), fmt_sig(b));
                }
            } else {
                let spend = acc.spend(steps);
                println!("sigma,q,steps,delta,epsilon,lambda_star");
                println!(
                    "{},{},{steps},{},{},{}",
                    fmt_sig(sigma),
                    fmt_sig(q),
                    fmt_sig(delta),
                    fmt_sig(spend.epsilon),
                    spend.lambda_star
                );
            }
        }
        Command::Codec { n, m, p, sparsity, noise_std, trials, seed, lambda, max_iters, per_trial } => {
            let solver = SolverOptions { max_iters, ..Default::default() };
            let results = sim::codec_trials(n, m, p, sparsity, noise_std, trials, seed, &solver, lambda)?;
            if per_trial {
                println!("trial,rel_error,iterations,converged,residual_norm");
                for t in &results {
                    println!(
                        "{},{},{},{},{}",
                        t.trial,
                        fmt_sig(t.rel_error),
                        t.iterations,
                        t.converged,
                        fmt_sig(t.residual_norm)
                    );
                }
            } else {
                let mut errs: Vec<f64> = results.iter().map(|t| t.rel_error).collect();
                errs.sort_by(f64::total_cmp);
                let count = errs.len().max(1) as f64;
                let median = match errs.len() {
                    0 => f64::NAN,
                    l if l % 2 == 1 => errs[l / 2],
                    l => 0.5 * (errs[l / 2 - 1] + errs[l / 2]),
                };
                println!("n,m,p,sparsity,noise_std,trials,mean_rel_error,median_rel_error,max_rel_error,recovered_1e-2,converged");
                println!(
                    "{n},{m},{p},{sparsity},{},{trials},{},{},{},{},{}",
                    fmt_sig(noise_std),
                    fmt_sig(errs.iter().sum::<f64>() / count),
                    fmt_sig(median),
                    fmt_sig(errs.last().copied().unwrap_or(f64::NAN)),
                    errs.iter().filter(|&&e| e <= 1e-2).count(),
                    results.iter().filter(|t| t.converged).count()
                );
            }
        }
    }
    Ok(())
}
