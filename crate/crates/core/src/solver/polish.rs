//! Newton refinement of a near-fold point on the extended system
//! `F(x, λ, ξ) = [g − λh;  J_fᵀ ξ;  ⟨h, ξ⟩ − 1]`.

use crate::linalg::{dot, norm_inf, solve_robust, Matrix, Svd};
use crate::model::{lambda_of, ParametricSystem};
use crate::scalar::Real;

const MAX_STEPS: usize = 40;
const BAND: f64 = 1e-2;

fn extended_residual<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
    lambda: T,
    xi: &[T],
) -> Vec<T> {
    let mut f = system.residual(x, lambda);
    f.extend(system.jac_x(x, lambda).tr_mul_vec(xi));
    f.push(dot(&system.h(x), xi) - T::one());
    f
}

fn extended_jacobian<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
    lambda: T,
    xi: &[T],
) -> Matrix<T> {
    let n = x.len();
    let jf = system.jac_x(x, lambda);
    let jh = system.jac_h(x);
    let h = system.h(x);
    let jh_xi = jh.tr_mul_vec(xi);
    let step = T::fd_step() * T::lit(10.0);
    // columns of ∂(J_fᵀξ)/∂x by central differences
    let mut hess = Matrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let hj = step * (T::one() + x[j].abs());
        xp[j] = x[j] + hj;
        let up = system.jac_x(&xp, lambda).tr_mul_vec(xi);
        xp[j] = x[j] - hj;
        let dn = system.jac_x(&xp, lambda).tr_mul_vec(xi);
        xp[j] = x[j];
        for i in 0..n {
            hess[(i, j)] = (up[i] - dn[i]) / (hj + hj);
        }
    }
    let dim = 2 * n + 1;
    Matrix::from_fn(dim, dim, |r, c| match (r < n, r < 2 * n, c) {
        (true, _, c) if c < n => jf[(r, c)],
        (true, _, c) if c == n => -h[r],
        (true, _, _) => T::zero(),
        (false, true, c) if c < n => hess[(r - n, c)],
        (false, true, c) if c == n => -jh_xi[r - n],
        (false, true, c) => jf[(c - n - 1, r - n)],
        (false, false, c) if c < n => jh_xi[c],
        (false, false, c) if c == n => T::zero(),
        (false, false, c) => h[c - n - 1],
    })
}

/// Refines `x` toward a fold `(x*, λ*, ξ*)`. Returns the refined point and
/// `λ(x*)` when Newton converges inside the domain with sign-consistent
/// multipliers `ζ_i = ξ_i h_i ≥ 0`; `None` otherwise (including when the
/// ratios at `x` are not all within a narrow band of `λ(x)`).
pub fn kkt_polish<T: Real>(system: &ParametricSystem<T>, x: &[T]) -> Option<(Vec<T>, T)> {
    let n = system.dim();
    let lambda0 = lambda_of(system, x)?;
    let g = system.g(x);
    let h = system.h(x);
    let weight = T::lit(crate::model::WEIGHT_TOL);
    let band = T::lit(BAND) * (T::one() + lambda0.abs());
    if (0..n).any(|i| h[i].abs() <= weight || g[i] / h[i] - lambda0 > band) {
        return None;
    }
    let jf = system.jac_x(x, lambda0);
    let mut xi = Svd::new(&jf.transpose()).smallest_right_vector();
    let hx = dot(&h, &xi);
    if !(hx.abs() > T::epsilon().sqrt() * crate::linalg::norm2(&h)) {
        return None;
    }
    xi.iter_mut().for_each(|v| *v /= hx);

    let domain = system.domain();
    let mut z: Vec<T> = x
        .iter()
        .copied()
        .chain(std::iter::once(lambda0))
        .chain(xi)
        .collect();
    let split = |z: &[T]| (z[..n].to_vec(), z[n], z[n + 1..].to_vec());
    let (mut xc, mut lc, mut xic) = split(&z);
    let mut f = extended_residual(system, &xc, lc, &xic);
    let fscale = T::one() + norm_inf(&g).max(lambda0.abs() * norm_inf(&h));
    let jscale = T::one() + jf.norm_inf();
    // blocks measured relative to their own magnitudes
    let scaled = |f: &[T], xi: &[T]| {
        let a = norm_inf(&f[..n]) / fscale;
        let b = norm_inf(&f[n..2 * n]) / (jscale * norm_inf(xi).max(T::min_positive_value()));
        a.max(b).max(f[2 * n].abs())
    };
    let tol = T::tol(1e-13);
    let mut converged = false;
    for _ in 0..MAX_STEPS {
        if !f.iter().all(|v| v.is_finite()) {
            return None;
        }
        if scaled(&f, &xic) <= tol {
            converged = true;
            break;
        }
        let jac = extended_jacobian(system, &xc, lc, &xic);
        let rhs: Vec<T> = f.iter().map(|&v| -v).collect();
        let dz = solve_robust(&jac, &rhs);
        if !dz.iter().all(|v| v.is_finite()) {
            return None;
        }
        let phi = norm_inf(&f);
        let mut alpha = T::one();
        let mut moved = false;
        while alpha > T::lit(1e-4) {
            let trial: Vec<T> = z.iter().zip(&dz).map(|(&a, &b)| a + alpha * b).collect();
            let (tx, tl, txi) = split(&trial);
            if domain.contains(&tx) {
                let ft = extended_residual(system, &tx, tl, &txi);
                if ft.iter().all(|v| v.is_finite()) && norm_inf(&ft) < phi {
                    z = trial;
                    (xc, lc, xic) = (tx, tl, txi);
                    f = ft;
                    moved = true;
                    break;
                }
            }
            alpha *= T::lit(0.5);
        }
        if !moved {
            // stagnation at rounding level still counts
            converged = scaled(&f, &xic) <= T::tol(1e-9);
            break;
        }
        let step = norm_inf(&dz) * alpha;
        if step <= T::epsilon() * T::lit(4.0) * (T::one() + norm_inf(&z)) {
            converged = scaled(&f, &xic) <= T::tol(1e-9);
            break;
        }
    }
    if !converged || !domain.contains(&xc) {
        return None;
    }
    let hc = system.h(&xc);
    let zeta_floor = -T::tol(1e-8);
    if (0..n).any(|i| xic[i] * hc[i] < zeta_floor) {
        return None;
    }
    let lam = lambda_of(system, &xc)?;
    Some((xc, lam))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DomainSpec, FnModel};

    #[test]
    fn one_variable_bratu_fold() {
        // 2u = λ τ² eᵘ with τ = 1/2: fold at u = 1, λ = 8/e
        let m = FnModel::new(
            1,
            |x: &[f64], o: &mut [f64]| o[0] = 2.0 * x[0],
            |x: &[f64], o: &mut [f64]| o[0] = 0.25 * x[0].exp(),
        )
        .with_jacobians(
            |_: &[f64]| Matrix::diag(&[2.0]),
            |x: &[f64]| Matrix::diag(&[0.25 * x[0].exp()]),
        );
        let s = ParametricSystem::new("b1", m, DomainSpec::positive_orthant(1)).unwrap();
        let (x, l) = kkt_polish(&s, &[0.97]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9);
        assert!((l - 8.0 / std::f64::consts::E).abs() < 1e-13);
    }

    #[test]
    fn far_from_balanced_is_refused() {
        let m = FnModel::new(
            2,
            |x: &[f64], o: &mut [f64]| {
                o[0] = x[0];
                o[1] = 5.0 * x[1];
            },
            |x: &[f64], o: &mut [f64]| o.copy_from_slice(x),
        );
        let s = ParametricSystem::new("diag", m, DomainSpec::positive_orthant(2)).unwrap();
        assert!(kkt_polish(&s, &[1.0, 1.0]).is_none());
    }
}
