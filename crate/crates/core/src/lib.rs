//! Maximal saddle-node bifurcations of `g(x) − λ h(x) = 0`.
//!
//! The largest fold is located by maximizing the bifurcation functional
//! `λ(x) = min_i g_i(x) / h_i(x)` over the domain, a nonlinear form of the
//! Collatz–Wielandt formula. Candidates are then checked against sufficient
//! conditions for a maximal fold (full active set, stationarity, positive
//! kernel vectors of an irreducible sign-constant Jacobian, transversality)
//! and can be cross-checked by pseudo-arclength continuation and a root probe.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certify;
pub mod continuation;
pub mod error;
pub mod hull;
pub mod linalg;
pub mod lp;
pub mod matrix;
pub mod model;
pub mod newton;
pub mod problems;
pub mod scalar;
pub mod solver;

pub use certify::{
    certify_saddle_node, probe_no_solutions_above, FoldCertificate, ProbeReport, Verdict,
};
pub use continuation::{
    fold_from_branch, start_from_seed, trace_branch, Branch, ContinuationConfig,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use matrix::{check_condition_r, check_matrix, perron_pair, PerronMode};
pub use model::{
    lambda_of, ratio_profile, DomainSpec, FnModel, Model, ParametricSystem, Ratio, RatioProfile,
    SamplingBox, Seed,
};
pub use scalar::Real;
pub use solver::{grid_oracle, solve_maxmin, SolveConfig, SolveResult, Strategy, Termination};

pub type System = model::ParametricSystem<f64>;
pub type Domain = model::DomainSpec<f64>;
pub type Profile = model::RatioProfile<f64>;
pub type Config = solver::SolveConfig<f64>;
pub type Solution = solver::SolveResult<f64>;
pub type Certificate = certify::FoldCertificate<f64>;
pub type Probe = certify::ProbeReport<f64>;
pub type BranchF64 = continuation::Branch<f64>;
pub type Perron = matrix::PerronCertificate<f64>;
