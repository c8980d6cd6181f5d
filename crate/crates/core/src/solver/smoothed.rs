//! Gradient ascent on the log-sum-exp smoothing
//! `λ_μ(x) = λ(x) − μ log Σ_i exp(−(r_i(x) − λ(x)) / μ)`,
//! which satisfies `λ_μ ≤ λ ≤ λ_μ + μ log m` for `m` defined ratios.

use super::{defined_gradients, guarded_lambda, LocalRun, SolveConfig, Termination, TraceEntry};
use crate::linalg::{dot, norm_inf, sub};
use crate::model::{lambda_of, ParametricSystem};
use crate::scalar::Real;

/// `(λ_μ, λ)` for the given ratios. Shifting by the minimum keeps every
/// exponent non-positive, so the sum lies in `[1, m]`.
pub fn smoothed_value<T: Real>(ratios: &[T], mu: T) -> (T, T) {
    let lambda = ratios.iter().copied().fold(T::infinity(), T::min);
    let sum: T = ratios.iter().map(|&r| (-(r - lambda) / mu).exp()).sum();
    (lambda - mu * sum.ln(), lambda)
}

/// Softmin weights `w_i ∝ exp(−(r_i − λ)/μ)`.
fn weights<T: Real>(ratios: &[T], lambda: T, mu: T) -> Vec<T> {
    let e: Vec<T> = ratios.iter().map(|&r| (-(r - lambda) / mu).exp()).collect();
    let total: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / total).collect()
}

struct Eval<T> {
    idx: Vec<usize>,
    value: T,
    lambda: T,
    grad: Vec<T>,
}

fn evaluate<T: Real>(system: &ParametricSystem<T>, x: &[T], mu: T) -> Option<Eval<T>> {
    let (idx, ratios, grads) = defined_gradients(system, x)?;
    let (value, lambda) = smoothed_value(&ratios, mu);
    let w = weights(&ratios, lambda, mu);
    let mut grad = vec![T::zero(); x.len()];
    for (wi, g) in w.iter().zip(&grads) {
        grad.iter_mut().zip(g).for_each(|(a, &b)| *a += *wi * b);
    }
    Some(Eval {
        idx,
        value,
        lambda,
        grad,
    })
}

/// `λ_μ` at a trial point, rejecting points that leave `Q` or lose a ratio.
fn trial_value<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
    mu: T,
    required: &[usize],
) -> Option<T> {
    guarded_lambda(system, x, required)?;
    let g = system.g(x);
    let h = system.h(x);
    let ratios: Vec<T> = (0..g.len())
        .filter(|&i| h[i].abs() > T::lit(crate::model::WEIGHT_TOL))
        .map(|i| g[i] / h[i])
        .collect();
    Some(smoothed_value(&ratios, mu).0)
}

pub(super) fn run<T: Real>(
    system: &ParametricSystem<T>,
    x0: &[T],
    config: &SolveConfig<T>,
) -> LocalRun<T> {
    let domain = system.domain();
    let initial_lambda = lambda_of(system, x0).unwrap_or_else(T::neg_infinity);
    let mut best = (x0.to_vec(), initial_lambda);
    let mut trace = Vec::new();
    let mut x = x0.to_vec();
    let mut termination = Termination::IterationCap;
    let mut iterations = 0;
    let armijo = T::lit(1e-4);
    let mut step0 = config
        .trust_radius_init
        .unwrap_or_else(|| T::lit(0.1) * (T::one() + norm_inf(x0)));
    for &mu in &config.smoothing_schedule {
        let Some(mut cur) = evaluate(system, &x, mu) else {
            break;
        };
        let mut prev: Option<(Vec<T>, Vec<T>)> = None;
        termination = Termination::IterationCap;
        for _ in 0..config.max_iters {
            iterations += 1;
            let gnorm = norm_inf(&cur.grad);
            if gnorm <= config.tol_stationarity * T::lit(1e-3) {
                termination = Termination::Stationary;
                break;
            }
            // Barzilai–Borwein length, bounded by the trust scale
            let mut alpha = match &prev {
                Some((xp, gp)) => {
                    let s = sub(&x, xp);
                    let y = sub(gp, &cur.grad);
                    let sy = dot(&s, &y);
                    if sy > T::zero() {
                        dot(&s, &s) / sy
                    } else {
                        step0 / gnorm
                    }
                }
                None => step0 / gnorm,
            };
            alpha = alpha.min(step0 / gnorm);
            let full: Vec<T> = cur.grad.iter().map(|&g| alpha * g).collect();
            alpha *= domain.max_step_fraction(&x, &full, T::lit(0.5));
            let slope = dot(&cur.grad, &cur.grad);
            let mut accepted = None;
            while alpha * gnorm > config.tol_step * (T::one() + norm_inf(&x)) {
                let trial: Vec<T> = x
                    .iter()
                    .zip(&cur.grad)
                    .map(|(&a, &g)| a + alpha * g)
                    .collect();
                if let Some(v) = trial_value(system, &trial, mu, &cur.idx) {
                    if v >= cur.value + armijo * alpha * slope {
                        accepted = Some(trial);
                        break;
                    }
                }
                alpha *= T::lit(0.5);
            }
            let Some(trial) = accepted else {
                trace.push(TraceEntry {
                    lambda: cur.lambda,
                    step: T::zero(),
                    accepted: false,
                    smoothed: Some((mu, cur.value)),
                });
                termination = Termination::StepTolerance;
                break;
            };
            let step = alpha * gnorm;
            let Some(next) = evaluate(system, &trial, mu) else {
                break;
            };
            prev = Some((
                std::mem::replace(&mut x, trial),
                std::mem::take(&mut cur.grad),
            ));
            cur = next;
            trace.push(TraceEntry {
                lambda: cur.lambda,
                step,
                accepted: true,
                smoothed: Some((mu, cur.value)),
            });
            if cur.lambda > best.1 {
                best = (x.clone(), cur.lambda);
            }
        }
        step0 = step0.min(T::lit(10.0) * mu * (T::one() + norm_inf(&x)));
    }
    LocalRun {
        x: best.0,
        lambda: best.1,
        initial_lambda,
        termination,
        iterations,
        trace,
    }
}
