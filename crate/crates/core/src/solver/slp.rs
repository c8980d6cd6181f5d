//! Sequential linear programming on `max s  s.t.  r_i(x) + ∇r_i(x)·d ≥ λ(x) + s`
//! with an ℓ∞ trust region on `d`.

use super::{defined_gradients, guarded_lambda, LocalRun, SolveConfig, Termination, TraceEntry};
use crate::certify::stationarity_residual;
use crate::linalg::{norm_inf, Matrix};
use crate::lp::{maximize, LpOutcome};
use crate::model::{lambda_of, ParametricSystem};
use crate::scalar::Real;

const POLISH_BAND: f64 = 1e-2;

/// Solves the linearized subproblem; returns `(d, predicted increase)`.
fn subproblem<T: Real>(
    x: &[T],
    lambda: T,
    ratios: &[T],
    grads: &[Vec<T>],
    lo: &[T],
    hi: &[T],
) -> Option<(Vec<T>, T)> {
    let n = x.len();
    let m = ratios.len();
    // z = (s, d⁺, d⁻) ≥ 0
    let cols = 1 + 2 * n;
    let mut a = Matrix::zeros(m + 2 * n, cols);
    let mut b = Vec::with_capacity(m + 2 * n);
    for (row, (r, g)) in ratios.iter().zip(grads).enumerate() {
        a[(row, 0)] = T::one();
        for j in 0..n {
            a[(row, 1 + j)] = -g[j];
            a[(row, 1 + n + j)] = g[j];
        }
        b.push((*r - lambda).max(T::zero()));
    }
    for j in 0..n {
        a[(m + j, 1 + j)] = T::one();
        b.push(hi[j]);
        a[(m + n + j, 1 + n + j)] = T::one();
        b.push(-lo[j]);
    }
    let mut c = vec![T::zero(); cols];
    c[0] = T::one();
    match maximize(&c, &a, &b) {
        LpOutcome::Optimal { z, objective } | LpOutcome::Stalled { z, objective } => {
            let d = (0..n).map(|j| z[1 + j] - z[1 + n + j]).collect();
            Some((d, objective))
        }
        LpOutcome::Unbounded => None,
    }
}

pub(super) fn run<T: Real>(
    system: &ParametricSystem<T>,
    x0: &[T],
    config: &SolveConfig<T>,
) -> LocalRun<T> {
    let domain = system.domain();
    let n = system.dim();
    let mut x = x0.to_vec();
    let initial_lambda = lambda_of(system, x0).unwrap_or_else(T::neg_infinity);
    let mut run = LocalRun {
        x: x.clone(),
        lambda: initial_lambda,
        initial_lambda,
        termination: Termination::IterationCap,
        iterations: 0,
        trace: Vec::new(),
    };
    let mut lambda = initial_lambda;
    let mut delta = config
        .trust_radius_init
        .unwrap_or_else(|| T::lit(0.1) * (T::one() + norm_inf(x0)));
    let half = T::lit(0.5);
    let mut last_polish: Option<usize> = None;
    for k in 0..config.max_iters {
        run.iterations = k + 1;
        let Some((idx, ratios, grads)) = defined_gradients(system, &x) else {
            break;
        };
        let lo: Vec<T> = (0..n)
            .map(|j| {
                let room = if domain.lower[j].is_finite() {
                    half * (x[j] - domain.lower[j])
                } else {
                    T::infinity()
                };
                -delta.min(room)
            })
            .collect();
        let hi: Vec<T> = (0..n)
            .map(|j| {
                let room = if domain.upper[j].is_finite() {
                    half * (domain.upper[j] - x[j])
                } else {
                    T::infinity()
                };
                delta.min(room)
            })
            .collect();
        let Some((d, predicted)) = subproblem(&x, lambda, &ratios, &grads, &lo, &hi) else {
            break;
        };
        let step = norm_inf(&d);
        let scale = T::one() + norm_inf(&x);
        if step <= config.tol_step * scale {
            run.termination = Termination::StepTolerance;
            break;
        }
        if predicted <= T::epsilon() * T::lit(8.0) * (T::one() + lambda.abs()) {
            run.termination = Termination::Stationary;
            break;
        }
        let trial: Vec<T> = x.iter().zip(&d).map(|(&a, &b)| a + b).collect();
        let accepted = match guarded_lambda(system, &trial, &idx) {
            Some(lt) if lt > lambda => {
                let rho = (lt - lambda) / predicted;
                let at_edge = step >= T::lit(0.99) * delta;
                if rho > T::lit(0.75) && at_edge {
                    delta *= T::lit(2.0);
                } else if rho < T::lit(0.25) {
                    delta *= half;
                }
                x = trial;
                lambda = lt;
                true
            }
            _ => {
                delta = half * delta.min(step);
                false
            }
        };
        run.trace.push(TraceEntry {
            lambda,
            step: if accepted { step } else { T::zero() },
            accepted,
            smoothed: None,
        });
        let spread = ratios.iter().fold(T::zero(), |m, &r| m.max(r - lambda));
        let near = ratios.len() == n && spread <= T::lit(POLISH_BAND) * (T::one() + lambda.abs());
        let due = !accepted || (k + 1) % 10 == 0;
        if near && due && last_polish.is_none_or(|p| k >= p + 3) {
            last_polish = Some(k);
            if config.polish {
                run.x = x.clone();
                run.lambda = lambda;
                if run.try_polish(system) {
                    return run;
                }
            }
            if let Ok(st) = stationarity_residual(system, &x) {
                if st.residual <= config.tol_stationarity {
                    run.termination = Termination::Stationary;
                    break;
                }
            }
        }
    }
    run.x = x;
    run.lambda = lambda;
    run
}
