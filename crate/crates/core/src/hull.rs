//! Minimum-norm point in the convex hull of finitely many vectors.
//!
//! Frank–Wolfe with away steps finds the support of the optimal weights;
//! Wolfe's affine-minimizer cycles then polish the weights on that support
//! so that exact zeros (e.g. opposite gradients) are hit to rounding level.

use serde::Serialize;

use crate::linalg::{dot, norm2, Matrix, Svd};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinNormPoint<T> {
    /// Simplex weights, one per input vector.
    pub weights: Vec<T>,
    pub point: Vec<T>,
    pub norm: T,
    pub iterations: usize,
}

fn combine<T: Real>(vectors: &[Vec<T>], w: &[T]) -> Vec<T> {
    let mut z = vec![T::zero(); vectors[0].len()];
    for (v, &wi) in vectors.iter().zip(w) {
        if wi != T::zero() {
            for (zk, &vk) in z.iter_mut().zip(v) {
                *zk += wi * vk;
            }
        }
    }
    z
}

/// Minimizes `‖Σ w_j v_j‖` over the unit simplex. `tol` is relative to the
/// largest input norm; `cap` bounds the Frank–Wolfe iterations.
///
/// Panics on an empty input.
pub fn min_norm_point<T: Real>(vectors: &[Vec<T>], tol: T, cap: usize) -> MinNormPoint<T> {
    assert!(!vectors.is_empty(), "min-norm point of an empty set");
    let m = vectors.len();
    let scale = vectors.iter().map(|v| norm2(v)).fold(T::zero(), T::max);
    if scale == T::zero() {
        let mut weights = vec![T::zero(); m];
        weights[0] = T::one();
        return MinNormPoint {
            point: vectors[0].clone(),
            weights,
            norm: T::zero(),
            iterations: 0,
        };
    }
    // start from the shortest vertex
    let start = (0..m)
        .min_by(|&a, &b| norm2(&vectors[a]).partial_cmp(&norm2(&vectors[b])).unwrap())
        .unwrap();
    let mut w = vec![T::zero(); m];
    w[start] = T::one();
    let mut z = vectors[start].clone();
    let gap_tol = (tol * scale) * (tol * scale);
    let mut iterations = 0;
    while iterations < cap {
        iterations += 1;
        if iterations % 64 == 0 {
            z = combine(vectors, &w);
        }
        let zz = dot(&z, &z);
        let scores: Vec<T> = vectors.iter().map(|v| dot(v, &z)).collect();
        let s = (0..m)
            .min_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap())
            .unwrap();
        let a = (0..m)
            .filter(|&j| w[j] > T::zero())
            .max_by(|&x, &y| scores[x].partial_cmp(&scores[y]).unwrap())
            .unwrap();
        let fw_gap = zz - scores[s];
        if fw_gap <= gap_tol {
            break;
        }
        let away_gap = scores[a] - zz;
        if fw_gap >= away_gap || w[a] >= T::one() {
            let dz: Vec<T> = vectors[s].iter().zip(&z).map(|(&v, &zk)| v - zk).collect();
            let dd = dot(&dz, &dz);
            if dd == T::zero() {
                break;
            }
            let gamma = (-dot(&z, &dz) / dd).max(T::zero()).min(T::one());
            for wj in w.iter_mut() {
                *wj *= T::one() - gamma;
            }
            w[s] += gamma;
            z.iter_mut().zip(&dz).for_each(|(zk, &d)| *zk += gamma * d);
        } else {
            let dz: Vec<T> = z.iter().zip(&vectors[a]).map(|(&zk, &v)| zk - v).collect();
            let dd = dot(&dz, &dz);
            if dd == T::zero() {
                break;
            }
            let gmax = w[a] / (T::one() - w[a]);
            let gamma = (-dot(&z, &dz) / dd).max(T::zero()).min(gmax);
            for wj in w.iter_mut() {
                *wj *= T::one() + gamma;
            }
            w[a] -= gamma;
            if gamma == gmax {
                w[a] = T::zero();
            }
            z.iter_mut().zip(&dz).for_each(|(zk, &d)| *zk += gamma * d);
        }
    }
    wolfe_polish(vectors, &mut w, tol * scale);
    let point = combine(vectors, &w);
    MinNormPoint {
        norm: norm2(&point),
        point,
        weights: w,
        iterations,
    }
}

/// Affine minimizer of `‖Σ_{j∈S} c_j v_j‖` subject to `Σ c_j = 1`.
fn affine_minimizer<T: Real>(vectors: &[Vec<T>], support: &[usize]) -> Vec<T> {
    let k = support.len();
    if k == 1 {
        return vec![T::one()];
    }
    let last = &vectors[support[k - 1]];
    let d = Matrix::from_fn(last.len(), k - 1, |i, j| vectors[support[j]][i] - last[i]);
    let rhs: Vec<T> = last.iter().map(|&v| -v).collect();
    let c = Svd::new(&d).solve(&rhs, T::epsilon() * T::lit(64.0));
    let mut out = c.clone();
    out.push(T::one() - c.iter().copied().sum::<T>());
    out
}

fn wolfe_polish<T: Real>(vectors: &[Vec<T>], w: &mut [T], abs_tol: T) {
    let m = vectors.len();
    let mut current = combine(vectors, w);
    let mut best_norm = norm2(&current);
    for _major in 0..(2 * m + 4) {
        let mut support: Vec<usize> = (0..m).filter(|&j| w[j] > T::zero()).collect();
        // minor cycles: move toward the affine minimizer, dropping vertices
        for _minor in 0..=m {
            let aff = affine_minimizer(vectors, &support);
            let neg_cut = -T::epsilon() * T::lit(16.0);
            if aff.iter().all(|&c| c >= neg_cut) {
                let mut trial = vec![T::zero(); m];
                let total: T = aff.iter().map(|&c| c.max(T::zero())).sum();
                for (idx, &j) in support.iter().enumerate() {
                    trial[j] = aff[idx].max(T::zero()) / total;
                }
                let z = combine(vectors, &trial);
                let nz = norm2(&z);
                if nz <= best_norm {
                    w.copy_from_slice(&trial);
                    current = z;
                }
                break;
            }
            // largest step from w toward aff keeping weights nonnegative
            let mut theta = T::one();
            for (idx, &j) in support.iter().enumerate() {
                if aff[idx] < w[j] && aff[idx] < T::zero() {
                    theta = theta.min(w[j] / (w[j] - aff[idx]));
                }
            }
            for (idx, &j) in support.iter().enumerate() {
                w[j] = (T::one() - theta) * w[j] + theta * aff[idx];
                if w[j] <= T::epsilon() * T::lit(16.0) {
                    w[j] = T::zero();
                }
            }
            let total: T = w.iter().copied().sum();
            w.iter_mut().for_each(|x| *x /= total);
            support.retain(|&j| w[j] > T::zero());
            current = combine(vectors, w);
            best_norm = norm2(&current);
        }
        // entering vertex: most negative directional score
        let zz = dot(&current, &current);
        let entering = (0..m)
            .filter(|&j| w[j] == T::zero())
            .map(|j| (j, dot(&vectors[j], &current)))
            .filter(|&(_, s)| s < zz - abs_tol * abs_tol)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        match entering {
            Some((j, _)) => {
                // give the entering vertex a tiny weight so the next affine
                // solve includes it
                let eps = T::epsilon().sqrt();
                w.iter_mut().for_each(|x| *x *= T::one() - eps);
                w[j] = eps;
                current = combine(vectors, w);
                best_norm = norm2(&current);
            }
            None => break,
        }
    }
}
