use rayon::prelude::*;

use super::{SolveResult, Strategy, Termination};
use crate::certify::stationarity_residual;
use crate::error::{Error, Result};
use crate::model::{lambda_of, ratio_profile, ParametricSystem, SamplingBox};
use crate::scalar::Real;

/// Exhaustive search of `λ(x)` over a uniform grid (endpoints included) on
/// `sbox`. Ties go to the lexicographically smallest grid point. Only for
/// `n ≤ 3`.
pub fn grid_oracle<T: Real>(
    system: &ParametricSystem<T>,
    sbox: &SamplingBox<T>,
    resolution: &[usize],
) -> Result<SolveResult<T>> {
    let n = system.dim();
    if n > 3 {
        return Err(Error::DimensionTooLarge { n });
    }
    if sbox.dim() != n || resolution.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if sbox.dim() != n {
                sbox.dim()
            } else {
                resolution.len()
            },
        });
    }
    if resolution.iter().any(|&r| r < 2) {
        return Err(Error::InvalidConfig(
            "grid resolution must be at least 2 per axis".into(),
        ));
    }
    let coord = |axis: usize, k: usize| {
        let frac = T::lit(k as f64) / T::lit((resolution[axis] - 1) as f64);
        if k + 1 == resolution[axis] {
            sbox.upper[axis]
        } else {
            sbox.lower[axis] + frac * sbox.width(axis)
        }
    };
    let inner: usize = resolution[1..].iter().product();
    let best_per_slice: Vec<Option<(T, Vec<T>)>> = (0..resolution[0])
        .into_par_iter()
        .map(|k0| {
            let mut best: Option<(T, Vec<T>)> = None;
            let mut x = vec![T::zero(); n];
            x[0] = coord(0, k0);
            for flat in 0..inner {
                // row-major over the remaining axes keeps lexicographic order
                let mut rem = flat;
                for axis in (1..n).rev() {
                    x[axis] = coord(axis, rem % resolution[axis]);
                    rem /= resolution[axis];
                }
                if let Some(l) = lambda_of(system, &x) {
                    if best.as_ref().is_none_or(|(b, _)| l > *b) {
                        best = Some((l, x.clone()));
                    }
                }
            }
            best
        })
        .collect();
    let (lambda, x) = best_per_slice
        .into_iter()
        .flatten()
        .fold(None::<(T, Vec<T>)>, |acc, cand| match acc {
            Some(a) if cand.0 <= a.0 => Some(a),
            _ => Some(cand),
        })
        .ok_or(Error::InfeasibleStart)?;
    let profile = ratio_profile(system, &x)?;
    let stat = stationarity_residual(system, &x)
        .map(|s| s.residual)
        .unwrap_or_else(|_| T::infinity());
    Ok(SolveResult {
        strategy: Strategy::GridOracle,
        lambda_star: profile.lambda_of_x,
        x_star: x,
        profile,
        stationarity_residual: stat,
        starts_converged: 1,
        best_start_index: 0,
        initial_lambda: lambda,
        termination: Termination::GridExhausted,
        trace: Vec::new(),
        starts: Vec::new(),
        unbounded_suspected: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DomainSpec, FnModel};

    #[test]
    fn constant_functional_picks_lexicographic_corner() {
        let m = FnModel::new(
            2,
            |_: &[f64], o: &mut [f64]| o.fill(1.0),
            |_: &[f64], o: &mut [f64]| o.fill(1.0),
        );
        let s = ParametricSystem::new("const", m, DomainSpec::unbounded(2)).unwrap();
        let b = SamplingBox::new(vec![-1.0, 2.0], vec![1.0, 3.0]).unwrap();
        let r = grid_oracle(&s, &b, &[5, 7]).unwrap();
        assert_eq!(r.lambda_star, 1.0);
        assert_eq!(r.x_star, vec![-1.0, 2.0]);
    }

    #[test]
    fn linear_diagonal_ray() {
        let m = FnModel::new(
            2,
            |x: &[f64], o: &mut [f64]| {
                o[0] = 2.0 * x[0] + x[1];
                o[1] = x[0] + 2.0 * x[1];
            },
            |x: &[f64], o: &mut [f64]| o.copy_from_slice(x),
        );
        let s = ParametricSystem::new("lin", m, DomainSpec::open_uniform(2, 0.0, 10.0)).unwrap();
        let b = SamplingBox::uniform(2, 0.01, 10.0);
        let r = grid_oracle(&s, &b, &[500, 500]).unwrap();
        assert!(
            r.lambda_star <= 3.0 + 1e-12 && r.lambda_star > 3.0 - 0.05,
            "{}",
            r.lambda_star
        );
    }

    #[test]
    fn rejects_large_dimension() {
        let m = FnModel::new(
            4,
            |_: &[f64], o: &mut [f64]| o.fill(1.0),
            |_: &[f64], o: &mut [f64]| o.fill(1.0),
        );
        let s = ParametricSystem::new("c4", m, DomainSpec::unbounded(4)).unwrap();
        let b = SamplingBox::uniform(4, 0.0, 1.0);
        assert_eq!(
            grid_oracle(&s, &b, &[2; 4]).unwrap_err(),
            Error::DimensionTooLarge { n: 4 }
        );
    }
}
