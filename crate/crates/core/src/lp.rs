//! Dense tableau simplex for `maximize cᵀz  s.t.  A z ≤ b, z ≥ 0` with `b ≥ 0`,
//! so the slack basis is an initial feasible vertex. Sizes are small (the
//! linearized epigraph subproblem), so no factorization updates are used.

use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal {
        z: Vec<T>,
        objective: T,
    },
    Unbounded,
    /// Pivot cap reached; the last vertex is still feasible.
    Stalled {
        z: Vec<T>,
        objective: T,
    },
}

pub fn maximize<T: Real>(c: &[T], a: &Matrix<T>, b: &[T]) -> LpOutcome<T> {
    let m = a.rows();
    let n = a.cols();
    assert_eq!(c.len(), n);
    assert_eq!(b.len(), m);
    debug_assert!(b.iter().all(|&v| v >= T::zero()));
    let width = n + m + 1;
    // rows 0..m constraints, row m objective (reduced costs, negated)
    let mut t = Matrix::zeros(m + 1, width);
    for i in 0..m {
        for j in 0..n {
            t[(i, j)] = a[(i, j)];
        }
        t[(i, n + i)] = T::one();
        t[(i, width - 1)] = b[i].max(T::zero());
    }
    for j in 0..n {
        t[(m, j)] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let eps = T::epsilon() * T::lit(1e3);
    let cap = 50 * (m + n) + 100;
    let mut degenerate_run = 0usize;
    for _ in 0..cap {
        // Dantzig's rule, Bland's rule after a run of degenerate pivots
        let bland = degenerate_run > m;
        let entering = if bland {
            (0..n + m).find(|&j| t[(m, j)] < -eps)
        } else {
            (0..n + m)
                .filter(|&j| t[(m, j)] < -eps)
                .min_by(|&x, &y| t[(m, x)].partial_cmp(&t[(m, y)]).unwrap())
        };
        let Some(q) = entering else {
            return LpOutcome::Optimal {
                objective: t[(m, width - 1)],
                z: extract(&t, &basis, n),
            };
        };
        let mut leave: Option<(usize, T)> = None;
        for i in 0..m {
            let aiq = t[(i, q)];
            if aiq > eps {
                let ratio = t[(i, width - 1)] / aiq;
                let better = match leave {
                    None => true,
                    Some((r, best)) => ratio < best || (ratio == best && basis[i] < basis[r]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((p, ratio)) = leave else {
            return LpOutcome::Unbounded;
        };
        degenerate_run = if ratio <= eps { degenerate_run + 1 } else { 0 };
        pivot(&mut t, p, q);
        basis[p] = q;
    }
    LpOutcome::Stalled {
        objective: t[(m, width - 1)],
        z: extract(&t, &basis, n),
    }
}

fn pivot<T: Real>(t: &mut Matrix<T>, p: usize, q: usize) {
    let rows = t.rows();
    let cols = t.cols();
    let piv = t[(p, q)];
    for j in 0..cols {
        t[(p, j)] /= piv;
    }
    let prow: Vec<T> = t.row(p).to_vec();
    for i in 0..rows {
        if i == p {
            continue;
        }
        let f = t[(i, q)];
        if f == T::zero() {
            continue;
        }
        for j in 0..cols {
            t[(i, j)] -= f * prow[j];
        }
        t[(i, q)] = T::zero();
    }
}

fn extract<T: Real>(t: &Matrix<T>, basis: &[usize], n: usize) -> Vec<T> {
    let rhs = t.cols() - 1;
    let mut z = vec![T::zero(); n];
    for (i, &bj) in basis.iter().enumerate() {
        if bj < n {
            z[bj] = t[(i, rhs)].max(T::zero());
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let a = Matrix::<f64>::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]]);
        match maximize::<f64>(&[3.0, 5.0], &a, &[4.0, 12.0, 18.0]) {
            LpOutcome::Optimal { z, objective } => {
                assert!((objective - 36.0).abs() < 1e-12);
                assert!((z[0] - 2.0).abs() < 1e-12 && (z[1] - 6.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_detected() {
        let a = Matrix::<f64>::from_rows(&[vec![1.0, -1.0]]);
        assert_eq!(maximize(&[0.0, 1.0], &a, &[1.0]), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_start() {
        // max s with s - d ≤ 0, s + d ≤ 0, d ≤ 1: optimum 0
        let a = Matrix::<f64>::from_rows(&[
            vec![1.0, -1.0, 1.0],
            vec![1.0, 1.0, -1.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        match maximize::<f64>(&[1.0, 0.0, 0.0], &a, &[0.0, 0.0, 1.0, 1.0]) {
            LpOutcome::Optimal { objective, .. } => assert!(objective.abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }
}
