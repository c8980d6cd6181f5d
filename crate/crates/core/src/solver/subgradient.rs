//! Ascent along the minimum-norm element of the ε-active gradient hull with
//! diminishing steps `α_k = α₀ / √(k+1)`. Keeps the best point seen.

use super::{defined_gradients, guarded_lambda, LocalRun, SolveConfig, Termination, TraceEntry};
use crate::certify::{HULL_CAP, HULL_TOL};
use crate::hull::min_norm_point;
use crate::linalg::{norm2, norm_inf};
use crate::model::{lambda_of, ParametricSystem};
use crate::scalar::Real;

pub(super) fn run<T: Real>(
    system: &ParametricSystem<T>,
    x0: &[T],
    config: &SolveConfig<T>,
) -> LocalRun<T> {
    let domain = system.domain();
    let initial_lambda = lambda_of(system, x0).unwrap_or_else(T::neg_infinity);
    let alpha0 = config
        .trust_radius_init
        .unwrap_or_else(|| T::lit(0.1) * (T::one() + norm_inf(x0)));
    let mut x = x0.to_vec();
    let mut best = (x.clone(), initial_lambda);
    let mut trace = Vec::new();
    let mut termination = Termination::IterationCap;
    let mut iterations = 0;
    for k in 0..config.max_iters {
        iterations = k + 1;
        let Some((idx, ratios, grads)) = defined_gradients(system, &x) else {
            break;
        };
        let lambda = ratios.iter().copied().fold(T::infinity(), T::min);
        let alpha = alpha0 / T::lit((k + 1) as f64).sqrt();
        if alpha <= config.tol_step * (T::one() + norm_inf(&x)) {
            termination = Termination::StepTolerance;
            break;
        }
        let gmax = grads.iter().map(|g| norm2(g)).fold(T::zero(), T::max);
        let eps = alpha * gmax;
        let near: Vec<Vec<T>> = ratios
            .iter()
            .zip(&grads)
            .filter(|(&r, _)| r - lambda <= eps)
            .map(|(_, g)| g.clone())
            .collect();
        let mnp = min_norm_point(&near, T::tol(HULL_TOL), HULL_CAP);
        if mnp.norm <= config.tol_stationarity {
            termination = Termination::Stationary;
            break;
        }
        let mut d: Vec<T> = mnp.point.iter().map(|&v| alpha * v / mnp.norm).collect();
        let t = domain.max_step_fraction(&x, &d, T::lit(0.5));
        d.iter_mut().for_each(|v| *v *= t);
        let trial: Vec<T> = x.iter().zip(&d).map(|(&a, &b)| a + b).collect();
        match guarded_lambda(system, &trial, &idx) {
            Some(lt) => {
                x = trial;
                trace.push(TraceEntry {
                    lambda: lt,
                    step: norm_inf(&d),
                    accepted: true,
                    smoothed: None,
                });
                if lt > best.1 {
                    best = (x.clone(), lt);
                }
            }
            None => trace.push(TraceEntry {
                lambda,
                step: T::zero(),
                accepted: false,
                smoothed: None,
            }),
        }
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
