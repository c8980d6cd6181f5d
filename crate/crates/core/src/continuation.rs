//! Pseudo-arclength continuation of solution branches of `g(x) − λ h(x) = 0`
//! and refinement of the turning points found along them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, norm_inf, normalized, sign_normalize, solve_robust, Matrix, Svd};
use crate::model::{ParametricSystem, Seed};
use crate::newton::{damped_newton, NewtonOptions};
use crate::scalar::Real;

/// Tangent λ-components below this are treated as zero when looking for sign changes.
pub const TANGENT_NOISE: f64 = 1e-12;
/// Fold refinement stops once `|dλ/ds|` falls below this.
pub const FOLD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig<T> {
    /// Nominal arclength step in `(x, λ)` space.
    pub step: T,
    pub corrector_tol: T,
    pub max_points: usize,
    /// `+1` traces initially increasing `λ`, `−1` decreasing.
    pub direction: i8,
    pub max_halvings: usize,
    pub max_corrector_iters: usize,
}

impl<T: Real> Default for ContinuationConfig<T> {
    fn default() -> Self {
        Self {
            step: T::lit(0.05),
            corrector_tol: T::tol(1e-10),
            max_points: 400,
            direction: 1,
            max_halvings: 8,
            max_corrector_iters: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint<T> {
    pub x: Vec<T>,
    pub lambda: T,
    /// Accumulated arclength (chord lengths between accepted points).
    pub s: T,
    /// Target step the point was accepted at (zero for the start).
    pub step: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxPoints,
    DomainExit,
    StepUnderflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch<T> {
    pub points: Vec<BranchPoint<T>>,
    /// Unit `(ẋ, λ̇)` at each point, oriented along the direction of travel.
    pub tangents: Vec<Vec<T>>,
    /// Index `i` such that `λ̇` changed sign on arriving at point `i`.
    pub fold_indices: Vec<usize>,
    pub stop: StopReason,
}

impl<T: Real> Branch<T> {
    pub fn tangent_lambda(&self, i: usize) -> T {
        *self.tangents[i].last().expect("tangent has a λ component")
    }

    pub fn max_lambda(&self) -> T {
        self.points
            .iter()
            .map(|p| p.lambda)
            .fold(T::neg_infinity(), T::max)
    }

    /// One row per point: `s, lambda, x_1..x_n, tangent_lambda`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::result::Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.points.first().map_or(0, |p| p.x.len());
        let mut header = vec!["s".to_string(), "lambda".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.push("tangent_lambda".into());
        out.write_record(&header)?;
        for (i, p) in self.points.iter().enumerate() {
            let mut row = vec![p.s.to_string(), p.lambda.to_string()];
            row.extend(p.x.iter().map(|v| v.to_string()));
            row.push(self.tangent_lambda(i).to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing CSV to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPoint<T> {
    pub x: Vec<T>,
    pub lambda: T,
    pub s: T,
    /// `|dλ/ds|` at the refined point.
    pub tangent_lambda: T,
}

/// `[J_x f | −h]`, the Jacobian of `f` with respect to `(x, λ)`.
fn augmented_jacobian<T: Real>(system: &ParametricSystem<T>, x: &[T], lambda: T) -> Matrix<T> {
    let n = x.len();
    let jf = system.jac_x(x, lambda);
    let h = system.h(x);
    Matrix::from_fn(n, n + 1, |i, j| if j < n { jf[(i, j)] } else { -h[i] })
}

fn bordered<T: Real>(aug: &Matrix<T>, border: &[T]) -> Matrix<T> {
    let n = aug.rows();
    Matrix::from_fn(
        n + 1,
        n + 1,
        |i, j| if i < n { aug[(i, j)] } else { border[j] },
    )
}

/// Unit tangent at `(x, λ)`, oriented to have a positive inner product with
/// `reference`.
fn tangent_with<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
    lambda: T,
    reference: &[T],
) -> Vec<T> {
    let n = x.len();
    let aug = augmented_jacobian(system, x, lambda);
    let mut rhs = vec![T::zero(); n + 1];
    rhs[n] = T::one();
    let t = solve_robust(&bordered(&aug, reference), &rhs);
    let mut t = normalized(&t).unwrap_or_else(|| Svd::new(&aug).smallest_right_vector());
    if dot(&t, reference) < T::zero() {
        t.iter_mut().for_each(|v| *v = -*v);
    }
    t
}

/// Kernel of `[J_x f | −h]` via SVD, oriented by `direction` on `λ̇`.
fn initial_tangent<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
    lambda: T,
    direction: i8,
) -> Vec<T> {
    let aug = augmented_jacobian(system, x, lambda);
    let mut t = Svd::new(&aug).smallest_right_vector();
    let n = x.len();
    if t[n].abs() > T::lit(TANGENT_NOISE) {
        if t[n] < T::zero() {
            t.iter_mut().for_each(|v| *v = -*v);
        }
    } else {
        sign_normalize(&mut t);
    }
    if direction < 0 {
        t.iter_mut().for_each(|v| *v = -*v);
    }
    t
}

/// Newton on `[f(z); p·(z − anchor) − σ] = 0`.
fn correct<T: Real>(
    system: &ParametricSystem<T>,
    guess: &[T],
    anchor: &[T],
    p: &[T],
    sigma: T,
    config: &ContinuationConfig<T>,
) -> std::result::Result<(Vec<T>, usize), bool> {
    let n = system.dim();
    let domain = system.domain();
    let mut z = guess.to_vec();
    for it in 0..config.max_corrector_iters {
        let (x, lambda) = (&z[..n], z[n]);
        if !domain.contains(x) {
            return Err(true);
        }
        let mut f = system.residual(x, lambda);
        let constraint = dot(p, &crate::linalg::sub(&z, anchor)) - sigma;
        if !f.iter().all(|v| v.is_finite()) {
            return Err(false);
        }
        let fres = norm_inf(&f);
        f.push(constraint);
        let aug = augmented_jacobian(system, x, lambda);
        let rhs: Vec<T> = f.iter().map(|&v| -v).collect();
        let dz = solve_robust(&bordered(&aug, p), &rhs);
        if !dz.iter().all(|v| v.is_finite()) {
            return Err(false);
        }
        let small = norm_inf(&dz) <= T::tol(1e-12) * (T::one() + norm_inf(&z));
        if fres <= config.corrector_tol
            && (small || it > 0 && constraint.abs() <= config.corrector_tol)
        {
            return Ok((z, it));
        }
        z.iter_mut().zip(&dz).for_each(|(a, &b)| *a += b);
    }
    let (x, lambda) = (&z[..n], z[n]);
    if !domain.contains(x) {
        return Err(true);
    }
    let f = system.residual(x, lambda);
    if norm_inf(&f) <= config.corrector_tol {
        Ok((z, config.max_corrector_iters))
    } else {
        Err(false)
    }
}

/// Newton at the seed's fixed `λ`, giving a start point for [`trace_branch`].
pub fn start_from_seed<T: Real>(
    system: &ParametricSystem<T>,
    seed: &Seed<T>,
) -> Result<(Vec<T>, T)> {
    system.domain().check(&seed.x)?;
    let out = damped_newton(system, seed.lambda, &seed.x, NewtonOptions::default());
    if !out.converged {
        return Err(Error::StartInfeasible {
            residual: out.residual.to_f64_lossy(),
        });
    }
    Ok((out.x, seed.lambda))
}

/// Gauss–Newton on `f(x, λ) = 0` in both `x` and `λ` (minimum-norm steps),
/// which also works when the start is itself a fold.
fn polish_start<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
    lambda: T,
    tol: T,
) -> Option<(Vec<T>, T)> {
    let n = x.len();
    let mut z: Vec<T> = x.iter().copied().chain(std::iter::once(lambda)).collect();
    for _ in 0..20 {
        if !system.domain().contains(&z[..n]) {
            return None;
        }
        let f = system.residual(&z[..n], z[n]);
        if norm_inf(&f) <= tol {
            return Some((z[..n].to_vec(), z[n]));
        }
        let aug = augmented_jacobian(system, &z[..n], z[n]);
        let rhs: Vec<T> = f.iter().map(|&v| -v).collect();
        let dz = Svd::new(&aug).solve(&rhs, T::epsilon() * T::lit((n + 1) as f64));
        z.iter_mut().zip(&dz).for_each(|(a, &b)| *a += b);
    }
    let f = system.residual(&z[..n], z[n]);
    (system.domain().contains(&z[..n]) && norm_inf(&f) <= tol).then(|| (z[..n].to_vec(), z[n]))
}

/// Traces the branch through `(x0, λ0)` by pseudo-arclength continuation.
pub fn trace_branch<T: Real>(
    system: &ParametricSystem<T>,
    x0: &[T],
    lambda0: T,
    config: &ContinuationConfig<T>,
) -> Result<Branch<T>> {
    if !(config.step > T::zero()) || !(config.corrector_tol > T::zero()) || config.max_points < 2 {
        return Err(Error::InvalidConfig(
            "continuation needs a positive step and tolerance and at least two points".into(),
        ));
    }
    system.domain().check(x0)?;
    let n = system.dim();
    let r0 = norm_inf(&system.residual(x0, lambda0));
    if !(r0 <= T::lit(1e3) * config.corrector_tol) {
        return Err(Error::StartInfeasible {
            residual: r0.to_f64_lossy(),
        });
    }
    let (x, lambda) =
        polish_start(system, x0, lambda0, config.corrector_tol).ok_or(Error::StartInfeasible {
            residual: r0.to_f64_lossy(),
        })?;
    let mut z: Vec<T> = x.iter().copied().chain(std::iter::once(lambda)).collect();
    let mut t = initial_tangent(system, &x, lambda, config.direction);
    let mut branch = Branch {
        points: vec![BranchPoint {
            x,
            lambda,
            s: T::zero(),
            step: T::zero(),
        }],
        tangents: vec![t.clone()],
        fold_indices: Vec::new(),
        stop: StopReason::MaxPoints,
    };
    let mut last_sign = sign_of(t[n]);
    let mut h = config.step;
    let mut prev: Option<Vec<T>> = None;
    let mut s = T::zero();
    while branch.points.len() < config.max_points {
        let p = match &prev {
            Some(zp) => normalized(&crate::linalg::sub(&z, zp)).unwrap_or_else(|| t.clone()),
            None => t.clone(),
        };
        let mut halvings = 0;
        let mut domain_fail = false;
        let accepted = loop {
            let guess: Vec<T> = z.iter().zip(&p).map(|(&a, &b)| a + h * b).collect();
            match correct(system, &guess, &z, &p, h, config) {
                Ok((zn, iters)) => {
                    let dist = norm2(&crate::linalg::sub(&zn, &z));
                    if dist >= T::lit(0.1) * h && dist <= T::lit(10.0) * h {
                        break Some((zn, iters, dist));
                    }
                    domain_fail = false;
                }
                Err(domain) => domain_fail = domain,
            }
            halvings += 1;
            if halvings > config.max_halvings {
                break None;
            }
            h *= T::lit(0.5);
        };
        let Some((zn, iters, dist)) = accepted else {
            if branch.points.len() == 1 {
                return Err(Error::CorrectorDivergence {
                    halvings: config.max_halvings,
                });
            }
            branch.stop = if domain_fail {
                StopReason::DomainExit
            } else {
                StopReason::StepUnderflow
            };
            return Ok(branch);
        };
        let tn = tangent_with(system, &zn[..n], zn[n], &t);
        s += dist;
        prev = Some(std::mem::replace(&mut z, zn));
        t = tn;
        branch.points.push(BranchPoint {
            x: z[..n].to_vec(),
            lambda: z[n],
            s,
            step: h,
        });
        branch.tangents.push(t.clone());
        let sg = sign_of(t[n]);
        if sg != 0 {
            if last_sign != 0 && sg != last_sign {
                branch.fold_indices.push(branch.points.len() - 1);
            }
            last_sign = sg;
        }
        if iters <= 3 {
            h = (h * T::lit(2.0)).min(config.step);
        }
    }
    Ok(branch)
}

fn sign_of<T: Real>(v: T) -> i8 {
    if v > T::lit(TANGENT_NOISE) {
        1
    } else if v < -T::lit(TANGENT_NOISE) {
        -1
    } else {
        0
    }
}

/// Refines every fold bracketed in `branch` by bisection on arclength along
/// the tangent at the bracket's left end, until `|dλ/ds| ≤ 10⁻⁸`. Corrector
/// residuals are driven to `10⁻¹²` or to the rounding level of `f`.
pub fn fold_from_branch<T: Real>(
    system: &ParametricSystem<T>,
    branch: &Branch<T>,
) -> Vec<FoldPoint<T>> {
    let n = system.dim();
    let mut out = Vec::new();
    for &i in &branch.fold_indices {
        let Some(a) = (0..i)
            .rev()
            .find(|&j| sign_of(branch.tangent_lambda(j)) != 0)
        else {
            continue;
        };
        let pa = &branch.points[a];
        // 1e-12, or the rounding level of f near the bracket when that is larger
        let rounding = system.jac_x(&pa.x, pa.lambda).norm_inf() * norm_inf(&pa.x)
            + pa.lambda.abs() * norm_inf(&system.h(&pa.x));
        let config = ContinuationConfig {
            corrector_tol: T::tol(1e-12).max(T::epsilon() * T::lit(64.0) * rounding),
            max_corrector_iters: 30,
            ..ContinuationConfig::default()
        };
        let ta = &branch.tangents[a];
        let za: Vec<T> =
            pa.x.iter()
                .copied()
                .chain(std::iter::once(pa.lambda))
                .collect();
        let sign_a = sign_of(ta[n]);
        let zb: Vec<T> = branch.points[i]
            .x
            .iter()
            .copied()
            .chain(std::iter::once(branch.points[i].lambda))
            .collect();
        let (mut lo, mut hi) = (T::zero(), dot(ta, &crate::linalg::sub(&zb, &za)));
        let mut best: Option<FoldPoint<T>> = None;
        let mut guess = zb.clone();
        for _ in 0..80 {
            let mid = (lo + hi) * T::lit(0.5);
            let start: Vec<T> = za.iter().zip(ta).map(|(&a, &b)| a + mid * b).collect();
            let seed = if best.is_some() { guess.clone() } else { start };
            let Ok((zm, _)) = correct(system, &seed, &za, ta, mid, &config) else {
                break;
            };
            let tm = tangent_with(system, &zm[..n], zm[n], ta);
            let point = FoldPoint {
                x: zm[..n].to_vec(),
                lambda: zm[n],
                s: pa.s + mid,
                tangent_lambda: tm[n].abs(),
            };
            let done = tm[n].abs() <= T::lit(FOLD_TOL);
            guess = zm;
            if sign_of(tm[n]) == sign_a {
                lo = mid;
            } else {
                hi = mid;
            }
            best = Some(point);
            if done || (hi - lo) <= T::epsilon() * (T::one() + hi.abs()) {
                break;
            }
        }
        if let Some(b) = best {
            out.push(b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DomainSpec, FnModel};

    fn bratu1() -> ParametricSystem<f64> {
        let m = FnModel::new(
            1,
            |x: &[f64], o: &mut [f64]| o[0] = 2.0 * x[0],
            |x: &[f64], o: &mut [f64]| o[0] = 0.25 * x[0].exp(),
        )
        .with_jacobians(
            |_: &[f64]| Matrix::diag(&[2.0]),
            |x: &[f64]| Matrix::diag(&[0.25 * x[0].exp()]),
        );
        ParametricSystem::new("b1", m, DomainSpec::positive_orthant(1)).unwrap()
    }

    #[test]
    fn bratu_one_variable_fold() {
        let s = bratu1();
        let l0 = 8.0 * 0.1 * (-0.1f64).exp();
        let cfg = ContinuationConfig {
            step: 0.1,
            max_points: 60,
            ..Default::default()
        };
        let b = trace_branch(&s, &[0.1], l0, &cfg).unwrap();
        assert_eq!(b.fold_indices.len(), 1);
        let peak = 8.0 / std::f64::consts::E;
        assert!(b.max_lambda() <= peak + 1e-10);
        let folds = fold_from_branch(&s, &b);
        assert_eq!(folds.len(), 1);
        assert!((folds[0].x[0] - 1.0).abs() < 1e-6, "{:?}", folds[0]);
        assert!((folds[0].lambda - peak).abs() < 1e-8);
        for (p, t) in b.points.iter().zip(&b.tangents) {
            let r = 2.0 * p.x[0] - p.lambda * 0.25 * p.x[0].exp();
            assert!(r.abs() <= 1e-10);
            let lin =
                2.0 * t[0] - p.lambda * 0.25 * p.x[0].exp() * t[0] - 0.25 * p.x[0].exp() * t[1];
            assert!(lin.abs() <= 1e-8);
        }
    }

    #[test]
    fn csv_layout() {
        let s = bratu1();
        let l0 = 8.0 * 0.1 * (-0.1f64).exp();
        let cfg = ContinuationConfig {
            max_points: 3,
            ..Default::default()
        };
        let csv = trace_branch(&s, &[0.1], l0, &cfg).unwrap().to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("s,lambda,x_1,tangent_lambda"));
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn infeasible_start() {
        let s = bratu1();
        assert!(matches!(
            trace_branch(&s, &[0.1], 2.0, &ContinuationConfig::default()),
            Err(Error::StartInfeasible { .. })
        ));
    }
}
