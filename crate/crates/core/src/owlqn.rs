//! Orthant-Wise Limited-memory Quasi-Newton for `f(x) + λ‖x‖₁` with smooth `f`.
//!
//! The L1 term is handled through the pseudo-gradient; the L-BFGS direction
//! is computed from it, sign-constrained to agree with the steepest
//! pseudo-descent direction, and every line-search trial point is projected
//! back onto the orthant chosen at the start of the search. Curvature pairs
//! are built from the gradient of the smooth part only.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OwlqnOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when ‖pseudo-gradient‖∞ ≤ `grad_tol · grad_scale`.
    pub grad_tol: f64,
    /// Stop when the objective fell by at most `obj_rel_tol` (relative)
    /// over the last `stall_window` iterations.
    pub obj_rel_tol: f64,
    pub stall_window: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for OwlqnOptions {
    fn default() -> Self {
        OwlqnOptions {
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-6,
            obj_rel_tol: 1e-9,
            stall_window: 10,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    PseudoGradient,
    ObjectiveStalled,
    LineSearchFailed,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OwlqnOutcome {
    pub stop: StopReason,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Objective/gradient evaluations, line-search trials included.
    pub evaluations: usize,
    pub converged: bool,
    pub pg_norm_inf: f64,
    /// Objective at the start point followed by every accepted iterate.
    pub trace: Vec<f64>,
    /// Coordinates that ended an accepted step on the wrong side of the
    /// orthant chosen for that step. Always zero for a correct projection.
    pub orthant_violations: usize,
}

/// Coordinate-wise pseudo-gradient of `f + λ‖x‖₁`.
pub fn pseudo_gradient(x: &[f64], grad: &[f64], lambda: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    pseudo_gradient_into(x, grad, lambda, &mut out);
    out
}

fn pseudo_gradient_into(x: &[f64], grad: &[f64], lambda: f64, out: &mut [f64]) {
    for ((o, &xi), &gi) in out.iter_mut().zip(x).zip(grad) {
        *o = if xi > 0.0 {
            gi + lambda
        } else if xi < 0.0 {
            gi - lambda
        } else if gi < -lambda {
            gi + lambda
        } else if gi > lambda {
            gi - lambda
        } else {
            0.0
        };
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: returns `-H q`.
fn lbfgs_direction(q: &[f64], history: &VecDeque<Pair>) -> Vec<f64> {
    let mut d: Vec<f64> = q.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for p in history.iter().rev() {
        let a = p.rho * dot(&p.s, &d);
        for (di, yi) in d.iter_mut().zip(&p.y) {
            *di -= a * yi;
        }
        alphas.push(a);
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for di in d.iter_mut() {
            *di *= gamma;
        }
    }
    for (p, a) in history.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &d);
        for (di, si) in d.iter_mut().zip(&p.s) {
            *di += (a - b) * si;
        }
    }
    d.iter_mut().for_each(|v| *v = -*v);
    d
}

/// Minimize `f(x) + λ‖x‖₁` starting from `x0`.
///
/// `eval` fills the gradient of the smooth part and returns its value.
/// `grad_scale` multiplies `grad_tol` in the convergence test.
pub fn minimize<F>(
    mut eval: F,
    x0: Vec<f64>,
    lambda: f64,
    grad_scale: f64,
    opts: &OwlqnOptions,
) -> Result<OwlqnOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("L1 weight must be nonnegative, got {lambda}")));
    }
    if opts.memory == 0 || opts.max_iters == 0 {
        return Err(Error::invalid("memory and max_iters must be at least 1"));
    }
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = eval(&x, &mut g) + lambda * l1(&x);
    let mut evaluations = 1;
    if !fx.is_finite() {
        return Err(Error::numeric("objective is not finite at the start point"));
    }
    let mut pg = vec![0.0; n];
    pseudo_gradient_into(&x, &g, lambda, &mut pg);

    let tol = opts.grad_tol * grad_scale;
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut trace = vec![fx];
    let mut iterations = 0;
    let mut violations = 0;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    let mut converged = norm_inf(&pg) <= tol;
    let mut stop = if converged { StopReason::PseudoGradient } else { StopReason::MaxIterations };
    while !converged && iterations < opts.max_iters {
        let mut d = lbfgs_direction(&pg, &history);
        // Keep only components that descend along the pseudo-gradient.
        let mut any = false;
        for (di, &p) in d.iter_mut().zip(&pg) {
            if *di * p >= 0.0 {
                *di = 0.0;
            } else {
                any = true;
            }
        }
        if !any {
            history.clear();
            d = pg.iter().map(|p| -p).collect();
        }
        let orthant: Vec<f64> = x
            .iter()
            .zip(&pg)
            .map(|(&xi, &p)| if xi != 0.0 { xi.signum() } else if p != 0.0 { -p.signum() } else { 0.0 })
            .collect();

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                let v = x[i] + step * d[i];
                x_new[i] = if v * orthant[i] > 0.0 { v } else { 0.0 };
            }
            let f_new = eval(&x_new, &mut g_new) + lambda * l1(&x_new);
            evaluations += 1;
            if f_new.is_nan() {
                return Err(Error::numeric("objective evaluated to NaN during line search"));
            }
            let decrease: f64 = pg.iter().zip(x_new.iter().zip(&x)).map(|(p, (a, b))| p * (a - b)).sum();
            if f_new <= fx + opts.armijo * decrease {
                accepted = Some(f_new);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            stop = StopReason::LineSearchFailed;
            break;
        };
        iterations += 1;
        violations += x_new.iter().zip(&orthant).filter(|(v, o)| **v * **o < 0.0).count();

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y, rho: 1.0 / sy });
        }

        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        trace.push(fx);
        pseudo_gradient_into(&x, &g, lambda, &mut pg);

        if norm_inf(&pg) <= tol {
            converged = true;
            stop = StopReason::PseudoGradient;
            break;
        }
        let window = opts.stall_window.max(1);
        if trace.len() > window && trace[trace.len() - 1 - window] - fx <= opts.obj_rel_tol * fx.abs() {
            stop = StopReason::ObjectiveStalled;
            break;
        }
    }

    Ok(OwlqnOutcome {
        stop,
        pg_norm_inf: norm_inf(&pg),
        x,
        objective: fx,
        iterations,
        evaluations,
        converged,
        trace,
        orthant_violations: violations,
    })
}
