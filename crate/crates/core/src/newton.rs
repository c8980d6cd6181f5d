//! Damped Newton on `x ↦ g(x) − λ h(x)` at fixed `λ`, kept inside the domain.

use serde::Serialize;

use crate::linalg::{axpy, dot, norm_inf, solve_robust};
use crate::model::ParametricSystem;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions<T> {
    pub max_steps: usize,
    /// Convergence when `‖f‖∞ ≤ tol`.
    pub tol: T,
    /// Armijo constant on `‖f‖²`.
    pub armijo: T,
}

impl<T: Real> Default for NewtonOptions<T> {
    fn default() -> Self {
        Self {
            max_steps: 200,
            tol: T::tol(1e-10),
            armijo: T::lit(1e-4),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonOutcome<T> {
    pub x: Vec<T>,
    pub residual: T,
    pub initial_residual: T,
    pub converged: bool,
    pub steps: usize,
}

pub fn damped_newton<T: Real>(
    system: &ParametricSystem<T>,
    lambda: T,
    x0: &[T],
    opts: NewtonOptions<T>,
) -> NewtonOutcome<T> {
    let domain = system.domain();
    let mut x = x0.to_vec();
    let mut f = system.residual(&x, lambda);
    let initial_residual = norm_inf(&f);
    let mut steps = 0;
    let finite = |v: &[T]| v.iter().all(|a| a.is_finite());
    if !domain.contains(&x) || !finite(&f) {
        return NewtonOutcome {
            x,
            residual: T::infinity(),
            initial_residual,
            converged: false,
            steps,
        };
    }
    while steps < opts.max_steps {
        let res = norm_inf(&f);
        if res <= opts.tol {
            return NewtonOutcome {
                x,
                residual: res,
                initial_residual,
                converged: true,
                steps,
            };
        }
        steps += 1;
        let jac = system.jac_x(&x, lambda);
        let neg_f: Vec<T> = f.iter().map(|&v| -v).collect();
        let d = solve_robust(&jac, &neg_f);
        if !finite(&d) {
            break;
        }
        let phi = dot(&f, &f);
        let mut alpha = T::one();
        let mut accepted = false;
        while alpha > T::lit(1e-10) {
            let trial = axpy(&x, alpha, &d);
            if domain.contains(&trial) {
                let ft = system.residual(&trial, lambda);
                if finite(&ft) {
                    let phit = dot(&ft, &ft);
                    if phit <= (T::one() - T::lit(2.0) * opts.armijo * alpha) * phi {
                        x = trial;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha /= T::lit(2.0);
        }
        if !accepted {
            break;
        }
    }
    let res = norm_inf(&f);
    NewtonOutcome {
        x,
        residual: res,
        initial_residual,
        converged: res <= opts.tol,
        steps,
    }
}
