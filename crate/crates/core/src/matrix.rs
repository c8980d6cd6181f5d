//! Structure checks on Jacobians (off-diagonal sign constancy, irreducibility)
//! and Perron / kernel eigenpair certificates.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, sign_normalize, Matrix, Svd};
use crate::model::ParametricSystem;
use crate::scalar::Real;

/// Absolute threshold below which an off-diagonal entry counts as zero.
pub const ZERO_TOL: f64 = 1e-10;
/// Relative rank tolerance per dimension: `σ ≤ n · RANK_TOL · σ_ref` is kernel.
pub const RANK_TOL: f64 = 1e-10;
const POWER_TOL: f64 = 1e-12;
const POWER_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffDiagonalSign {
    Nonnegative,
    Nonpositive,
    /// No off-diagonal entry above the zero tolerance.
    BothPossibleZero,
    /// Entries of both strict signs.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignReport<T> {
    pub sign_constant: bool,
    pub sign: OffDiagonalSign,
    /// `(row, col, value)`, 0-based.
    pub violating_entries: Vec<(usize, usize, T)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrreducibilityReport {
    pub irreducible: bool,
    pub scc_count: usize,
}

/// Condition (R) at a single matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RCheckReport<T> {
    pub sign_constant: bool,
    pub sign: OffDiagonalSign,
    pub irreducible: bool,
    pub scc_count: usize,
    pub violating_entries: Vec<(usize, usize, T)>,
}

impl<T> RCheckReport<T> {
    pub fn passes(&self) -> bool {
        self.sign_constant && self.irreducible
    }
}

pub fn check_off_diagonal_sign<T: Real>(a: &Matrix<T>, zero_tol: T) -> SignReport<T> {
    let n = a.rows();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..n {
        for j in 0..a.cols() {
            if i == j {
                continue;
            }
            let v = a[(i, j)];
            if v > zero_tol {
                pos.push((i, j, v));
            } else if v < -zero_tol {
                neg.push((i, j, v));
            }
        }
    }
    let (sign, violating) = match (pos.is_empty(), neg.is_empty()) {
        (true, true) => (OffDiagonalSign::BothPossibleZero, Vec::new()),
        (false, true) => (OffDiagonalSign::Nonnegative, Vec::new()),
        (true, false) => (OffDiagonalSign::Nonpositive, Vec::new()),
        (false, false) => {
            // minority sign entries plus one witness of the majority sign
            let (mut minority, majority) = if neg.len() <= pos.len() {
                (neg, pos)
            } else {
                (pos, neg)
            };
            minority.push(majority[0]);
            minority.sort_by_key(|&(i, j, _)| (i, j));
            (OffDiagonalSign::Mixed, minority)
        }
    };
    SignReport {
        sign_constant: sign != OffDiagonalSign::Mixed,
        sign,
        violating_entries: violating,
    }
}

/// Strong connectivity of the digraph with an edge `i → j` for every
/// off-diagonal entry with `|a_ij| > zero_tol`. A 1×1 matrix is irreducible by
/// convention.
pub fn check_irreducible<T: Real>(a: &Matrix<T>, zero_tol: T) -> IrreducibilityReport {
    let n = a.rows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * 2);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)].abs() > zero_tol {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let scc_count = tarjan_scc(&graph).len();
    IrreducibilityReport {
        irreducible: scc_count == 1,
        scc_count,
    }
}

pub fn check_matrix<T: Real>(a: &Matrix<T>, zero_tol: T) -> RCheckReport<T> {
    let s = check_off_diagonal_sign(a, zero_tol);
    let r = check_irreducible(a, zero_tol);
    RCheckReport {
        sign_constant: s.sign_constant,
        sign: s.sign,
        irreducible: r.irreducible,
        scc_count: r.scc_count,
        violating_entries: s.violating_entries,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "note")]
pub enum REvidence {
    /// Established from the structure of the Jacobian by the problem builder.
    Structural(String),
    /// Only the listed samples were checked; (R) on all of `Q × ℝ` is not implied.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RSampleFailure<T> {
    pub sample: usize,
    pub x: Vec<T>,
    pub lambda: T,
    pub report: RCheckReport<T>,
}

/// Aggregated condition (R) evidence over sample points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRReport<T> {
    /// Conjunction over all samples.
    pub holds: bool,
    pub evidence: REvidence,
    pub samples: usize,
    /// Index of the first failing sample.
    pub witness: Option<usize>,
    pub failures: Vec<RSampleFailure<T>>,
}

pub fn check_condition_r<T: Real>(
    system: &ParametricSystem<T>,
    points: &[(Vec<T>, T)],
) -> Result<ConditionRReport<T>> {
    let zero_tol = T::lit(ZERO_TOL);
    let mut failures = Vec::new();
    for (k, (x, lambda)) in points.iter().enumerate() {
        system.domain().check(x)?;
        let report = check_matrix(&system.jac_x(x, *lambda), zero_tol);
        if !report.passes() {
            failures.push(RSampleFailure {
                sample: k,
                x: x.clone(),
                lambda: *lambda,
                report,
            });
        }
    }
    let evidence = match system.structural_r() {
        Some(note) => REvidence::Structural(note.to_string()),
        None => REvidence::Sampled,
    };
    Ok(ConditionRReport {
        holds: failures.is_empty(),
        evidence,
        samples: points.len(),
        witness: failures.first().map(|f| f.sample),
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerronMode {
    /// Perron root of a sign-constant matrix via shifted power iteration.
    DominantStructure,
    /// Singular vectors of the smallest singular value.
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerronCertificate<T> {
    pub mode: PerronMode,
    pub eigenvalue: T,
    pub right_vec: Vec<T>,
    pub left_vec: Vec<T>,
    pub kernel_dim_estimate: usize,
    pub min_component: T,
    /// Smallest singular value (kernel mode).
    pub sigma_min: Option<T>,
    /// Power iterations used for the right vector (dominant mode).
    pub iterations: usize,
}

impl<T: Real> PerronCertificate<T> {
    pub fn right_min(&self) -> T {
        self.right_vec.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn left_min(&self) -> T {
        self.left_vec.iter().copied().fold(T::infinity(), T::min)
    }
}

/// Collatz–Wielandt bounds `min_i (Bv)_i / v_i` and `max_i (Bv)_i / v_i`
/// observed at one power iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwBounds<T> {
    pub lower: T,
    pub upper: T,
}

/// Power iteration on a nonnegative matrix from the all-ones vector. The
/// observer sees the Collatz–Wielandt bounds of every iterate.
pub fn power_iteration<T: Real>(
    b: &Matrix<T>,
    tol: T,
    cap: usize,
    mut observer: impl FnMut(CwBounds<T>),
) -> Result<(T, Vec<T>, usize)> {
    let n = b.rows();
    let mut v = vec![T::one() / T::lit(n as f64).sqrt(); n];
    for it in 1..=cap {
        let w = b.mul_vec(&v);
        let mut lower = T::infinity();
        let mut upper = T::neg_infinity();
        for i in 0..n {
            if v[i] > T::zero() {
                let q = w[i] / v[i];
                lower = lower.min(q);
                upper = upper.max(q);
            } else if w[i] > T::zero() {
                upper = T::infinity();
            }
        }
        observer(CwBounds { lower, upper });
        let nw = norm2(&w);
        if nw == T::zero() {
            return Ok((T::zero(), v, it));
        }
        let next: Vec<T> = w.iter().map(|&x| x / nw).collect();
        if upper - lower <= tol * upper.abs().max(T::min_positive_value()) {
            return Ok(((lower + upper) / T::lit(2.0), next, it));
        }
        v = next;
    }
    Err(Error::NoConvergence { iterations: cap })
}

pub fn perron_pair<T: Real>(a: &Matrix<T>, mode: PerronMode) -> Result<PerronCertificate<T>> {
    match mode {
        PerronMode::DominantStructure => dominant_pair(a, |_| {}),
        PerronMode::Kernel => Ok(kernel_pair(a, None)),
    }
}

/// Dominant-structure pair with an observer on every power iterate of `B` and
/// `Bᵀ`; `B` is the nonnegative shift of `a`.
pub fn dominant_pair<T: Real>(
    a: &Matrix<T>,
    mut observer: impl FnMut(CwBounds<T>),
) -> Result<PerronCertificate<T>> {
    assert!(a.is_square());
    let n = a.rows();
    let sign = check_off_diagonal_sign(a, T::lit(ZERO_TOL));
    let flip = match sign.sign {
        OffDiagonalSign::Mixed => return Err(Error::NotSignConstant),
        OffDiagonalSign::Nonpositive => true,
        _ => false,
    };
    let sigma = a.norm_inf();
    let base = if flip { a.scaled(-T::one()) } else { a.clone() };
    let b = base.add_scaled(sigma, &Matrix::identity(n));
    let tol = T::tol(POWER_TOL);
    let (rho, mut right, iterations) = power_iteration(&b, tol, POWER_CAP, &mut observer)?;
    let (_, mut left, _) = power_iteration(&b.transpose(), tol, POWER_CAP, &mut observer)?;
    sign_normalize(&mut right);
    sign_normalize(&mut left);
    let eigenvalue = if flip { sigma - rho } else { rho - sigma };
    let shifted = a.add_scaled(-eigenvalue, &Matrix::identity(n));
    let svd = Svd::new(&shifted);
    let cut = T::lit(n as f64 * RANK_TOL) * svd.sigma_max().max(a.norm_fro());
    let kernel_dim_estimate = svd.singular_values.iter().filter(|&&s| s <= cut).count();
    let min_component = right
        .iter()
        .chain(&left)
        .copied()
        .fold(T::infinity(), T::min);
    Ok(PerronCertificate {
        mode: PerronMode::DominantStructure,
        eigenvalue,
        right_vec: right,
        left_vec: left,
        kernel_dim_estimate,
        min_component,
        sigma_min: None,
        iterations,
    })
}

/// Kernel evidence from the SVDs of `a` and `aᵀ`. Singular values at most
/// `n · RANK_TOL · max(σ_max, reference_scale)` count toward the kernel; pass
/// the size of the terms that cancel in `a` as `reference_scale` when `a`
/// itself may be numerically zero.
pub fn kernel_pair<T: Real>(a: &Matrix<T>, reference_scale: Option<T>) -> PerronCertificate<T> {
    assert!(a.is_square());
    let n = a.rows();
    let svd = Svd::new(a);
    let svd_t = Svd::new(&a.transpose());
    let scale = svd.sigma_max().max(reference_scale.unwrap_or_else(T::zero));
    let cut = T::lit(n as f64 * RANK_TOL) * scale;
    let kernel_dim_estimate = svd.singular_values.iter().filter(|&&s| s <= cut).count();
    let mut right = svd.smallest_right_vector();
    let mut left = svd_t.smallest_right_vector();
    sign_normalize(&mut right);
    sign_normalize(&mut left);
    let eigenvalue = dot(&right, &a.mul_vec(&right));
    let min_component = right
        .iter()
        .chain(&left)
        .copied()
        .fold(T::infinity(), T::min);
    PerronCertificate {
        mode: PerronMode::Kernel,
        eigenvalue,
        right_vec: right,
        left_vec: left,
        kernel_dim_estimate,
        min_component,
        sigma_min: Some(svd.sigma_min()),
        iterations: 0,
    }
}
