//! Machine-checkable fold certificate at a candidate `(x*, λ*)`.
//!
//! The checklist, in order: `x*` solves the system, the active set is full,
//! `0` lies in the generalized gradient (KKT of the epigraph problem), the
//! Jacobian satisfies (R) at the point, its kernel is one-dimensional with
//! strictly positive right and left vectors, and `⟨h(x*), ξ*⟩ ≠ 0`.
//!
//! Global maximality cannot be decided numerically. A certified fold is
//! maximal relative to the evidence collected: the multistart history of the
//! solver and the root probe above `λ*`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::hull::min_norm_point;
use crate::linalg::{dot, norm2, norm_inf, Svd};
use crate::matrix::{check_matrix, kernel_pair, PerronCertificate, RCheckReport, ZERO_TOL};
use crate::model::{ratio_profile, subdifferential, ParametricSystem, RatioProfile};
use crate::newton::{damped_newton, NewtonOptions};
use crate::scalar::Real;

pub const HULL_TOL: f64 = 1e-10;
pub const HULL_CAP: usize = 10_000;
/// Probe roots closer than this to a finite bound are limits on `∂Q`.
pub const PROBE_BOUNDARY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityResult<T> {
    /// `min_{ζ ∈ simplex} ‖Σ_{i∈N(x)} ζ_i ∇r_i(x)‖₂`.
    pub residual: T,
    /// Active indices the weights refer to.
    pub active: Vec<usize>,
    pub zeta: Vec<T>,
    /// `ξ_i = ζ_i / h_i(x)` on `N(x)`, zero elsewhere.
    pub xi: Vec<T>,
}

pub fn stationarity_residual<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
) -> Result<StationarityResult<T>> {
    let profile = ratio_profile(system, x)?;
    stationarity_at(system, &profile)
}

pub fn stationarity_at<T: Real>(
    system: &ParametricSystem<T>,
    profile: &RatioProfile<T>,
) -> Result<StationarityResult<T>> {
    let sd = subdifferential(system, profile)?;
    let mnp = min_norm_point(&sd.gradients, T::tol(HULL_TOL), HULL_CAP);
    let mut xi = vec![T::zero(); system.dim()];
    for (&i, &z) in sd.indices.iter().zip(&mnp.weights) {
        xi[i] = z / profile.h[i];
    }
    Ok(StationarityResult {
        residual: mnp.norm,
        active: sd.indices,
        zeta: mnp.weights,
        xi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedFold,
    StationaryButDegenerate,
    NotStationary,
    FailedSolution,
}

impl Verdict {
    pub fn describe(self) -> &'static str {
        match self {
            Verdict::CertifiedFold => {
                "certified saddle-node: every checklist item holds; maximal relative to the \
                 multistart and probe evidence (global maximality is not decidable numerically)"
            }
            Verdict::StationaryButDegenerate => {
                "stationary solution, but a structural item (full active set, condition (R), \
                 simple kernel, positivity or transversality) fails"
            }
            Verdict::NotStationary => {
                "solution of the system, but not a stationary point of the max-min functional"
            }
            Verdict::FailedSolution => "the point does not solve g(x) - lambda h(x) = 0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyTolerances<T> {
    pub stationarity: T,
    /// Minimum component a normalized kernel vector needs to count as positive.
    pub positivity: T,
}

impl<T: Real> Default for CertifyTolerances<T> {
    fn default() -> Self {
        Self {
            stationarity: T::tol(1e-7),
            positivity: T::tol(1e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldCertificate<T> {
    pub x: Vec<T>,
    pub lambda: T,
    pub solution_residual: T,
    pub tol_res: T,
    pub active_full: bool,
    pub active_count: usize,
    pub stationarity: StationarityResult<T>,
    pub tol_stationarity: T,
    pub r_check: RCheckReport<T>,
    pub kernel: PerronCertificate<T>,
    pub right_positive: bool,
    pub left_positive: bool,
    pub tol_positivity: T,
    /// `⟨h(x*), ξ*⟩` with `ξ*` the unit left kernel vector.
    pub transversality: T,
    pub tol_trans: T,
    /// `‖J y − h‖ / ‖h‖` for the least-squares `y`; nonzero iff `h ∉ Range(J)`.
    pub range_residual: T,
    pub verdict: Verdict,
}

impl<T: Real> FoldCertificate<T> {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::CertifiedFold
    }

    /// Human-readable checklist.
    pub fn report(&self) -> String {
        let mark = |ok: bool| if ok { "ok " } else { "FAIL" };
        let mut s = String::new();
        s.push_str(&format!(
            "candidate lambda = {:.12e}\n",
            self.lambda.to_f64_lossy()
        ));
        s.push_str(&format!(
            "[{}] solution residual {:.3e} <= {:.3e}\n",
            mark(self.solution_residual <= self.tol_res),
            self.solution_residual.to_f64_lossy(),
            self.tol_res.to_f64_lossy()
        ));
        s.push_str(&format!(
            "[{}] full active set |N(x)| = {} of {}\n",
            mark(self.active_full),
            self.active_count,
            self.x.len()
        ));
        s.push_str(&format!(
            "[{}] stationarity residual {:.3e} <= {:.3e}\n",
            mark(self.stationarity.residual <= self.tol_stationarity),
            self.stationarity.residual.to_f64_lossy(),
            self.tol_stationarity.to_f64_lossy()
        ));
        s.push_str(&format!(
            "[{}] condition (R) at the point: sign-constant {}, irreducible {} ({} SCC)\n",
            mark(self.r_check.passes()),
            self.r_check.sign_constant,
            self.r_check.irreducible,
            self.r_check.scc_count
        ));
        s.push_str(&format!(
            "[{}] dim Ker J = {} (sigma_min {:.3e})\n",
            mark(self.kernel.kernel_dim_estimate == 1),
            self.kernel.kernel_dim_estimate,
            self.kernel.sigma_min.map_or(f64::NAN, |v| v.to_f64_lossy())
        ));
        s.push_str(&format!(
            "[{}] right kernel vector positive (min {:.3e} > {:.1e})\n",
            mark(self.right_positive),
            self.kernel.right_min().to_f64_lossy(),
            self.tol_positivity.to_f64_lossy()
        ));
        s.push_str(&format!(
            "[{}] left kernel vector positive (min {:.3e} > {:.1e})\n",
            mark(self.left_positive),
            self.kernel.left_min().to_f64_lossy(),
            self.tol_positivity.to_f64_lossy()
        ));
        s.push_str(&format!(
            "[{}] transversality <h, xi> = {:.3e}, |.| > {:.3e}\n",
            mark(self.transversality.abs() > self.tol_trans),
            self.transversality.to_f64_lossy(),
            self.tol_trans.to_f64_lossy()
        ));
        s.push_str(&format!(
            "verdict: {:?}\n  {}\n",
            self.verdict,
            self.verdict.describe()
        ));
        s
    }
}

pub fn certify_saddle_node<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
    lambda: T,
) -> Result<FoldCertificate<T>> {
    certify_with(system, x, lambda, CertifyTolerances::default())
}

pub fn certify_with<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
    lambda: T,
    tol: CertifyTolerances<T>,
) -> Result<FoldCertificate<T>> {
    system.domain().check(x)?;
    let profile = ratio_profile(system, x)?;
    let h = &profile.h;
    let residual = system.residual(x, lambda);
    let solution_residual = norm_inf(&residual);
    let hmax = norm_inf(h);
    let tol_res = T::tol(1e-8) * (T::one() + lambda.abs()) * hmax;

    let stationarity = stationarity_at(system, &profile)?;

    let jg = system.jac_g(x);
    let jh = system.jac_h(x);
    let jac = jg.add_scaled(-lambda, &jh);
    let r_check = check_matrix(&jac, T::lit(ZERO_TOL));
    let reference = jg.norm_fro() + lambda.abs() * jh.norm_fro();
    let kernel = kernel_pair(&jac, Some(reference));
    let right_positive = kernel.right_min() > tol.positivity;
    let left_positive = kernel.left_min() > tol.positivity;
    let transversality = dot(h, &kernel.left_vec);
    let tol_trans = T::tol(1e-6) * norm2(h) * norm2(&kernel.left_vec);

    let svd = Svd::new(&jac);
    let rank_cut =
        T::lit(jac.rows() as f64 * crate::matrix::RANK_TOL) * svd.sigma_max().max(reference);
    let rcond = if svd.sigma_max() > T::zero() {
        rank_cut / svd.sigma_max()
    } else {
        T::one()
    };
    let y = svd.solve(h, rcond);
    let jy = jac.mul_vec(&y);
    let range_residual = norm2(&crate::linalg::sub(&jy, h)) / norm2(h).max(T::min_positive_value());

    let verdict = if !(solution_residual <= tol_res) {
        Verdict::FailedSolution
    } else if !(stationarity.residual <= tol.stationarity) {
        Verdict::NotStationary
    } else if profile.full_active
        && r_check.passes()
        && kernel.kernel_dim_estimate == 1
        && right_positive
        && left_positive
        && transversality.abs() > tol_trans
    {
        Verdict::CertifiedFold
    } else {
        Verdict::StationaryButDegenerate
    };
    Ok(FoldCertificate {
        x: x.to_vec(),
        lambda,
        solution_residual,
        tol_res,
        active_full: profile.full_active,
        active_count: profile.active.len(),
        stationarity,
        tol_stationarity: tol.stationarity,
        r_check,
        kernel,
        right_positive,
        left_positive,
        tol_positivity: tol.positivity,
        transversality,
        tol_trans,
        range_residual,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRoot<T> {
    pub start: usize,
    pub x: Vec<T>,
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport<T> {
    pub lambda: T,
    pub attempts: usize,
    /// Roots inside `Q` with `‖f‖∞ ≤ 1e-10`, one entry per converging start.
    pub converged_in_q: Vec<ProbeRoot<T>>,
    /// Starts whose Newton iterates converged onto the boundary of `Q`.
    pub boundary_roots: usize,
    /// Largest relative residual reduction `1 − ‖f_end‖ / ‖f_start‖` over starts.
    pub max_residual_drop: T,
}

impl<T: Real> ProbeReport<T> {
    /// Roots merged when closer than `tol · (1 + ‖x‖∞)`.
    pub fn distinct_roots(&self, tol: T) -> Vec<Vec<T>> {
        let mut out: Vec<Vec<T>> = Vec::new();
        for r in &self.converged_in_q {
            let dup = out.iter().any(|y| {
                let d = norm_inf(&crate::linalg::sub(&r.x, y));
                d <= tol * (T::one() + norm_inf(y))
            });
            if !dup {
                out.push(r.x.clone());
            }
        }
        out
    }
}

/// Damped Newton at fixed `lambda` from every start. An empty
/// `converged_in_q` is evidence (not proof) that no solution exists in `Q`.
pub fn probe_no_solutions_above<T: Real>(
    system: &ParametricSystem<T>,
    lambda: T,
    starts: &[Vec<T>],
) -> ProbeReport<T> {
    let opts = NewtonOptions::default();
    let outcomes: Vec<_> = starts
        .par_iter()
        .map(|x0| damped_newton(system, lambda, x0, opts))
        .collect();
    let domain = system.domain();
    let margin = T::tol(PROBE_BOUNDARY_MARGIN).max(domain.membership_margin);
    let mut converged_in_q = Vec::new();
    let mut boundary_roots = 0;
    let mut max_drop = T::zero();
    for (k, o) in outcomes.into_iter().enumerate() {
        if o.initial_residual.is_finite()
            && o.initial_residual > T::zero()
            && o.residual.is_finite()
        {
            max_drop = max_drop.max(T::one() - o.residual / o.initial_residual);
        }
        if !o.converged || !domain.contains(&o.x) {
            continue;
        }
        if domain.boundary_distance(&o.x) <= margin {
            boundary_roots += 1;
        } else {
            converged_in_q.push(ProbeRoot {
                start: k,
                x: o.x,
                residual: o.residual,
            });
        }
    }
    ProbeReport {
        lambda,
        attempts: starts.len(),
        converged_in_q,
        boundary_roots,
        max_residual_drop: max_drop,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::linalg::Matrix;
    use crate::problems::{build_bratu_fd, build_linear, build_power_flow};
    use std::f64::consts::E;

    #[test]
    fn bratu_single_node_is_certified() {
        let s = build_bratu_fd::<f64>(1, 1.0).unwrap();
        let c = certify_saddle_node(&s, &[1.0], 8.0 / E).unwrap();
        assert_eq!(c.verdict, Verdict::CertifiedFold);
        assert!(c.solution_residual < 1e-14);
        assert_eq!(c.kernel.kernel_dim_estimate, 1);
        // ξ = 1 and h = e
        assert!((c.transversality.abs() - E).abs() < 1e-12);
        assert!(c.report().contains("certified"));
    }

    #[test]
    fn linear_perron_point_is_certified() {
        let s = build_linear(Matrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]])).unwrap();
        let t = 0.8;
        let c = certify_saddle_node(&s, &[t, t], 3.0).unwrap();
        assert_eq!(c.verdict, Verdict::CertifiedFold);
        assert!(c.stationarity.residual < 1e-12);
        assert!((c.stationarity.zeta[0] - 0.5).abs() < 1e-10);
        assert!(c.transversality.abs() > c.tol_trans);
    }

    #[test]
    fn off_solution_point_fails_first() {
        let s = build_bratu_fd::<f64>(1, 1.0).unwrap();
        let c = certify_saddle_node(&s, &[1.2], 8.0 / E).unwrap();
        assert_eq!(c.verdict, Verdict::FailedSolution);
    }

    #[test]
    fn solution_away_from_the_fold_is_not_stationary() {
        // 8u = λ eᵘ at u = 0.5
        let s = build_bratu_fd::<f64>(1, 1.0).unwrap();
        let lambda = 4.0 * (-0.5f64).exp();
        let c = certify_saddle_node(&s, &[0.5], lambda).unwrap();
        assert_eq!(c.verdict, Verdict::NotStationary);
    }

    #[test]
    fn singleton_active_set_residual_is_gradient_norm() {
        let s = build_power_flow::<f64>(1.0, 1.0).unwrap();
        let x = [0.3, 0.8];
        let st = stationarity_residual(&s, &x).unwrap();
        assert_eq!(st.active.len(), 1);
        let i = st.active[0];
        let r = |y: &[f64]| s.g(y)[i] / s.h(y)[i];
        let h = 1e-6;
        let fd: Vec<f64> = (0..2)
            .map(|j| {
                let (mut a, mut b) = (x, x);
                a[j] += h;
                b[j] -= h;
                (r(&a) - r(&b)) / (2.0 * h)
            })
            .collect();
        let norm = (fd[0] * fd[0] + fd[1] * fd[1]).sqrt();
        assert!((st.residual - norm).abs() < 1e-7 * norm);
    }

    #[test]
    fn outside_domain_is_an_error() {
        let s = build_bratu_fd::<f64>(1, 1.0).unwrap();
        assert!(matches!(
            certify_saddle_node(&s, &[-1.0], 1.0),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn probe_counts_bratu_roots() {
        let s = build_bratu_fd::<f64>(1, 1.0).unwrap();
        let starts: Vec<Vec<f64>> = (0..50)
            .map(|k| vec![0.01 + 5.99 * k as f64 / 49.0])
            .collect();
        let above = probe_no_solutions_above(&s, 8.0 / E + 0.3, &starts);
        assert!(above.converged_in_q.is_empty());
        assert_eq!(above.attempts, 50);
        let below = probe_no_solutions_above(&s, 8.0 / E - 0.3, &starts);
        let roots = below.distinct_roots(1e-6);
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().any(|r| r[0] < 1.0) && roots.iter().any(|r| r[0] > 1.0));
    }

    #[test]
    fn zero_load_has_only_the_boundary_root() {
        let s = build_bratu_fd::<f64>(4, 1.0).unwrap();
        let starts: Vec<Vec<f64>> = (1..=20).map(|k| vec![0.1 * k as f64; 4]).collect();
        let p = probe_no_solutions_above(&s, 0.0, &starts);
        assert!(p.converged_in_q.is_empty());
    }
}
