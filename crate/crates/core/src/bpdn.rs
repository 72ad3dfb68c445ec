//! Basis pursuit denoising: `min_s ½‖y − Θs‖² + λ‖s‖₁`, chunk by chunk.
//!
//! Θ is the per-chunk sensing operator of a [`Codec`] (first `m / P` DCT
//! rows), applied matrix-free. Chunks are solved independently and in
//! parallel; results are reassembled in chunk order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{Codec, CompressedUpdate};
use crate::error::{Error, Result};
use crate::owlqn::{self, OwlqnOptions};

pub use crate::owlqn::pseudo_gradient;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub lambda: f64,
    pub memory: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub obj_rel_tol: f64,
    /// Solve a decreasing sequence of L1 weights, from `‖Θᵀy‖∞` down to
    /// `lambda` by this factor per stage, warm-starting each stage. `None`
    /// runs a single OWL-QN pass at `lambda` from zero.
    pub continuation: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            lambda: 0.0,
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-6,
            obj_rel_tol: 1e-9,
            continuation: Some(0.3),
        }
    }
}

impl SolverOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        SolverOptions { lambda, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.memory == 0 || self.max_iters == 0 {
            return Err(Error::invalid("solver memory and max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0 && self.obj_rel_tol > 0.0) {
            return Err(Error::invalid("solver tolerances must be positive"));
        }
        if let Some(f) = self.continuation {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(format!("continuation factor must lie in (0, 1), got {f}")));
            }
        }
        Ok(())
    }

    fn owlqn(&self) -> OwlqnOptions {
        OwlqnOptions {
            memory: self.memory,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            obj_rel_tol: self.obj_rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// OWL-QN iterations summed over all continuation stages.
    pub iterations: usize,
    pub evaluations: usize,
    pub final_objective: f64,
    pub converged: bool,
    pub residual_norm: f64,
    pub pg_norm_inf: f64,
    /// Per stage: the BPDN objective (at that stage's λ) at the start point
    /// and after every accepted iterate. The last stage runs at the target λ.
    pub stage_traces: Vec<Vec<f64>>,
    pub orthant_violations: usize,
    pub stop_reasons: Vec<owlqn::StopReason>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_chunk(codec: &Codec, s_len: Option<usize>, y_len: usize) -> Result<()> {
    let cfg = codec.config();
    if y_len != cfg.chunk_meas() {
        return Err(Error::invalid(format!(
            "measurement chunk has length {y_len}, expected {}",
            cfg.chunk_meas()
        )));
    }
    if let Some(l) = s_len {
        if l != cfg.chunk_len() {
            return Err(Error::invalid(format!("signal chunk has length {l}, expected {}", cfg.chunk_len())));
        }
    }
    Ok(())
}

/// `½‖y − Θs‖² + λ‖s‖₁` for one chunk.
pub fn bpdn_objective(s: &[f64], y: &[f64], codec: &Codec, lambda: f64) -> Result<f64> {
    check_chunk(codec, Some(s.len()), y.len())?;
    let mut theta_s = vec![0.0; y.len()];
    codec.measure_chunk(s, &mut theta_s);
    let r2: f64 = theta_s.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(0.5 * r2 + lambda * s.iter().map(|v| v.abs()).sum::<f64>())
}

/// `‖Θᵀy‖∞` over every chunk of `y`. The smallest λ for which `s = 0` is optimal.
pub fn max_correlation(codec: &Codec, y: &CompressedUpdate) -> f64 {
    let cfg = codec.config();
    let mut buf = vec![0.0; cfg.chunk_len()];
    (0..cfg.chunks)
        .map(|j| {
            codec.adjoint_chunk(y.chunk(j), &mut buf);
            buf.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .fold(0.0, f64::max)
}

/// Solve BPDN for one measurement chunk with OWL-QN.
pub fn solve_chunk(codec: &Codec, y: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    opts.validate()?;
    check_chunk(codec, None, y.len())?;
    let len = codec.config().chunk_len();
    let mut residual = vec![0.0; y.len()];
    let mut eval = |s: &[f64], g: &mut [f64]| -> f64 {
        codec.measure_chunk(s, &mut residual);
        for (r, yi) in residual.iter_mut().zip(y) {
            *r -= yi;
        }
        codec.adjoint_chunk(&residual, g);
        0.5 * residual.iter().map(|r| r * r).sum::<f64>()
    };
    let scale = norm2(y).max(1.0);

    let mut lambdas = Vec::new();
    if let Some(factor) = opts.continuation {
        let mut aty = vec![0.0; len];
        codec.adjoint_chunk(y, &mut aty);
        let mut l = aty.iter().fold(0.0f64, |m, v| m.max(v.abs())) * factor;
        while l > opts.lambda {
            lambdas.push(l);
            l *= factor;
        }
    }
    lambdas.push(opts.lambda);

    let mut x = vec![0.0; len];
    let mut traces = Vec::with_capacity(lambdas.len());
    let mut stops = Vec::with_capacity(lambdas.len());
    let (mut iterations, mut evaluations, mut violations) = (0, 0, 0);
    let mut last = None;
    for &l in &lambdas {
        // A pseudo-gradient test looser than λ accepts any point with a small
        // residual; keep the stage tolerance below the stage's L1 weight.
        let stage_scale = if l > 0.0 { scale.min(0.1 * l / opts.grad_tol) } else { scale };
        let out = owlqn::minimize(&mut eval, x, l, stage_scale, &opts.owlqn())?;
        iterations += out.iterations;
        evaluations += out.evaluations;
        violations += out.orthant_violations;
        x = out.x.clone();
        traces.push(out.trace.clone());
        stops.push(out.stop);
        last = Some(out);
    }
    let out = last.expect("at least the target stage runs");

    let mut theta_s = vec![0.0; y.len()];
    codec.measure_chunk(&x, &mut theta_s);
    let residual_norm = theta_s.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let report = SolveReport {
        iterations,
        evaluations,
        final_objective: out.objective,
        converged: out.converged,
        residual_norm,
        pg_norm_inf: out.pg_norm_inf,
        stage_traces: traces,
        orthant_violations: violations,
        stop_reasons: stops,
    };
    Ok((x, report))
}

/// Reconstruct a length-`n` vector from a compressed update: solve every
/// chunk, concatenate, unshuffle, drop padding.
pub fn decompress(codec: &Codec, y: &CompressedUpdate, opts: &SolverOptions) -> Result<(Vec<f64>, Vec<SolveReport>)> {
    codec.check(y)?;
    let cfg = codec.config();
    let solved: Vec<(Vec<f64>, SolveReport)> = (0..cfg.chunks)
        .into_par_iter()
        .map(|j| solve_chunk(codec, y.chunk(j), opts))
        .collect::<Result<_>>()?;
    let mut full = Vec::with_capacity(cfg.n_padded);
    let mut reports = Vec::with_capacity(cfg.chunks);
    for (s, r) in solved {
        full.extend_from_slice(&s);
        reports.push(r);
    }
    Ok((codec.unshuffle_truncate(&full)?, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::SensingConfig;
    use crate::rng;
    use rand::Rng;

    fn identity_seed(len: usize) -> u64 {
        (0..10_000u64)
            .find(|&s| rng::permutation(len, s).iter().enumerate().all(|(i, &p)| i == p))
            .unwrap()
    }

    fn codec(n: usize, m: usize, p: usize, seed: u64) -> Codec {
        Codec::new(SensingConfig::new(n, m, p, seed).unwrap()).unwrap()
    }

    fn soft(v: f64, t: f64) -> f64 {
        v.signum() * (v.abs() - t).max(0.0)
    }

    #[test]
    fn objective_examples() {
        let c = codec(4, 4, 1, identity_seed(4));
        assert_eq!(bpdn_objective(&[0.0; 4], &[0.0; 4], &c, 3.0).unwrap(), 0.0);
        let y = [0.5, -1.0, 2.0, 0.0];
        assert!((bpdn_objective(&[0.0; 4], &y, &c, 3.0).unwrap() - 0.5 * 5.25).abs() < 1e-12);
        let v = bpdn_objective(&[1.0; 4], &[2.0, 0.0, 0.0, 0.0], &c, 1.0).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        assert!(bpdn_objective(&[0.0; 3], &y, &c, 1.0).is_err());
    }

    #[test]
    fn zero_measurements_give_zero() {
        let c = codec(64, 32, 1, 3);
        let (s, rep) = solve_chunk(&c, &[0.0; 32], &SolverOptions::with_lambda(0.1)).unwrap();
        assert!(s.iter().all(|v| *v == 0.0));
        assert!(rep.iterations <= 1);
        assert!(rep.converged);
    }

    #[test]
    fn square_orthonormal_case_is_soft_thresholding() {
        let c = codec(4, 4, 1, identity_seed(4));
        let mut y = vec![0.0; 4];
        c.measure_chunk(&[2.0, 0.0, 0.0, 0.0], &mut y);
        let (s, _) = solve_chunk(&c, &y, &SolverOptions::with_lambda(0.5)).unwrap();
        let expect = [1.5, 0.0, 0.0, 0.0];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).abs() < 1e-6, "{s:?}");
        }
    }

    #[test]
    fn soft_threshold_equivalence_random() {
        let mut r = rng::stream(5);
        for t in 0..100u64 {
            let c = codec(32, 32, 1, t);
            let y: Vec<f64> = (0..32).map(|_| r.random_range(-2.0..2.0)).collect();
            let lambda = r.random_range(0.05..1.0);
            let (s, rep) = solve_chunk(&c, &y, &SolverOptions::with_lambda(lambda)).unwrap();
            let mut aty = vec![0.0; 32];
            c.adjoint_chunk(&y, &mut aty);
            for (a, b) in s.iter().zip(&aty) {
                assert!((a - soft(*b, lambda)).abs() < 1e-6, "trial {t}");
            }
            assert!(rep.stage_traces.iter().all(|t| t.windows(2).all(|w| w[1] <= w[0])));
        }
    }

    #[test]
    fn planted_three_sparse_recovery() {
        let c = codec(64, 32, 1, 11);
        let mut s0 = vec![0.0; 64];
        s0[5] = 1.0;
        s0[29] = -1.0;
        s0[50] = 1.0;
        let mut y = vec![0.0; 32];
        c.measure_chunk(&s0, &mut y);
        let opts = SolverOptions { lambda: 1e-6, max_iters: 5000, ..Default::default() };
        let (s, rep) = solve_chunk(&c, &y, &opts).unwrap();
        let err = s.iter().zip(&s0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / 3f64.sqrt();
        assert!(err <= 1e-3, "relative error {err}, report {:?}", (rep.iterations, rep.converged));
    }
}
