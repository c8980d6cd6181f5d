//! Maximization of the bifurcation functional `λ(x) = min_i r_i(x)` over `Q`.
//!
//! Every strategy only ever reports attained values `λ(x_star)`, so the
//! returned `lambda_star` is a certified lower bound on the supremum.

mod grid;
mod polish;
mod slp;
mod smoothed;
mod subgradient;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::stationarity_residual;
use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::model::{lambda_of, ratio_profile, ParametricSystem, RatioProfile, SamplingBox};
use crate::scalar::Real;

pub use grid::grid_oracle;
pub use polish::kkt_polish;
pub use smoothed::smoothed_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Sequential linear programming on the epigraph form inside an ℓ∞ trust region.
    EpigraphSlp,
    /// Gradient ascent on the log-sum-exp smoothing, tightened along a schedule.
    SmoothedAscent,
    /// Ascent along the minimum-norm element of the ε-subdifferential.
    Subgradient,
    /// Exhaustive uniform grid (n ≤ 3).
    GridOracle,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epigraph-slp" => Ok(Strategy::EpigraphSlp),
            "smoothed-ascent" => Ok(Strategy::SmoothedAscent),
            "subgradient" => Ok(Strategy::Subgradient),
            "grid-oracle" => Ok(Strategy::GridOracle),
            other => Err(Error::InvalidConfig(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig<T> {
    pub strategy: Strategy,
    /// Iteration cap per start (per smoothing level for smoothed ascent).
    pub max_iters: usize,
    /// Relative step tolerance: stop once steps fall below `tol_step · (1 + ‖x‖∞)`.
    pub tol_step: T,
    pub tol_stationarity: T,
    pub starts: usize,
    pub seed: u64,
    /// Overrides the system's sampling box.
    pub sampling_box: Option<SamplingBox<T>>,
    /// Decreasing smoothing parameters (smoothed ascent only).
    pub smoothing_schedule: Vec<T>,
    /// Initial ℓ∞ trust radius; defaults to `0.1 · (1 + ‖x0‖∞)`.
    pub trust_radius_init: Option<T>,
    /// Newton refinement of the KKT system once the active set is full.
    pub polish: bool,
    /// Grid points per axis (grid oracle only).
    pub grid_resolution: usize,
    /// Fail with `IterationCap` when every start exhausts its budget.
    pub require_convergence: bool,
}

impl<T: Real> Default for SolveConfig<T> {
    fn default() -> Self {
        Self {
            strategy: Strategy::EpigraphSlp,
            max_iters: 500,
            tol_step: T::tol(1e-10),
            tol_stationarity: T::tol(1e-7),
            starts: 4,
            seed: 0,
            sampling_box: None,
            smoothing_schedule: [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
                .iter()
                .map(|&v| T::lit(v))
                .collect(),
            trust_radius_init: None,
            polish: true,
            grid_resolution: 400,
            require_convergence: false,
        }
    }
}

impl<T: Real> SolveConfig<T> {
    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_starts(mut self, starts: usize, seed: u64) -> Self {
        self.starts = starts;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        if !positive(self.tol_step) || !positive(self.tol_stationarity) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.starts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidConfig(
                "starts and max_iters must be at least 1".into(),
            ));
        }
        if self.trust_radius_init.is_some_and(|r| !positive(r)) {
            return Err(Error::InvalidConfig("trust radius must be positive".into()));
        }
        if self.smoothing_schedule.is_empty()
            || !self.smoothing_schedule.iter().all(|&m| positive(m))
            || self.smoothing_schedule.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(Error::InvalidConfig(
                "smoothing schedule must be a decreasing sequence of positive values".into(),
            ));
        }
        if self.grid_resolution < 2 {
            return Err(Error::InvalidConfig(
                "grid resolution must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    StepTolerance,
    Stationary,
    /// KKT Newton refinement converged to a full-active stationary point.
    Polished,
    IterationCap,
    GridExhausted,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::IterationCap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry<T> {
    pub lambda: T,
    /// ℓ∞ length of the step taken (0 for rejected steps).
    pub step: T,
    pub accepted: bool,
    /// `(μ, λ_μ(x))` for smoothed ascent.
    pub smoothed: Option<(T, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LocalRun<T> {
    pub x: Vec<T>,
    pub lambda: T,
    pub initial_lambda: T,
    pub termination: Termination,
    pub iterations: usize,
    pub trace: Vec<TraceEntry<T>>,
}

impl<T: Real> LocalRun<T> {
    /// Replaces the current point by a polished one when it does not lose value.
    pub(crate) fn try_polish(&mut self, system: &ParametricSystem<T>) -> bool {
        let Some((xp, lp)) = kkt_polish(system, &self.x) else {
            return false;
        };
        let slack = T::tol(1e-13) * (T::one() + self.lambda.abs());
        if lp >= self.lambda - slack {
            if lp >= self.lambda {
                self.x = xp;
                self.lambda = lp;
            }
            self.termination = Termination::Polished;
            return true;
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary<T> {
    pub initial_lambda: T,
    pub lambda: T,
    pub termination: Termination,
    pub iterations: usize,
    pub stationarity_residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult<T> {
    pub strategy: Strategy,
    pub x_star: Vec<T>,
    /// Equals `profile.lambda_of_x`.
    pub lambda_star: T,
    pub profile: RatioProfile<T>,
    pub stationarity_residual: T,
    pub starts_converged: usize,
    pub best_start_index: usize,
    /// `λ(x0)` of the best start.
    pub initial_lambda: T,
    pub termination: Termination,
    pub trace: Vec<TraceEntry<T>>,
    pub starts: Vec<StartSummary<T>>,
    /// `λ(x)` kept growing far outside the sampling box along an unbounded
    /// direction of `Q`; `λ* < ∞` is then doubtful.
    pub unbounded_suspected: bool,
}

pub fn solve_maxmin<T: Real>(
    system: &ParametricSystem<T>,
    config: &SolveConfig<T>,
) -> Result<SolveResult<T>> {
    config.validate()?;
    let sbox = config
        .sampling_box
        .as_ref()
        .or(system.sampling_box())
        .cloned()
        .ok_or(Error::MissingSamplingBox)?;
    if sbox.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: sbox.dim(),
        });
    }
    if config.strategy == Strategy::GridOracle {
        let res = vec![config.grid_resolution; system.dim()];
        return grid_oracle(system, &sbox, &res);
    }
    let starts = start_points(system, &sbox, config.starts, config.seed)?;
    let runs: Vec<(LocalRun<T>, T)> = starts
        .par_iter()
        .map(|x0| {
            let run = local_solve(system, x0, config);
            let stat = stationarity_residual(system, &run.x)
                .map(|s| s.residual)
                .unwrap_or_else(|_| T::infinity());
            (run, stat)
        })
        .collect();
    if config.require_convergence
        && runs
            .iter()
            .all(|(r, _)| r.termination == Termination::IterationCap)
    {
        return Err(Error::IterationCap {
            iterations: config.max_iters,
        });
    }
    let best = pick_best(&runs);
    let summaries: Vec<StartSummary<T>> = runs
        .iter()
        .map(|(r, s)| StartSummary {
            initial_lambda: r.initial_lambda,
            lambda: r.lambda,
            termination: r.termination,
            iterations: r.iterations,
            stationarity_residual: *s,
        })
        .collect();
    let starts_converged = runs
        .iter()
        .filter(|(r, _)| r.termination.converged())
        .count();
    let (run, stat) = runs.into_iter().nth(best).expect("at least one start");
    let profile = ratio_profile(system, &run.x)?;
    let unbounded_suspected = suspect_unbounded(system, &sbox, &run.x);
    Ok(SolveResult {
        strategy: config.strategy,
        x_star: run.x,
        lambda_star: profile.lambda_of_x,
        profile,
        stationarity_residual: stat,
        starts_converged,
        best_start_index: best,
        initial_lambda: run.initial_lambda,
        termination: run.termination,
        trace: run.trace,
        starts: summaries,
        unbounded_suspected,
    })
}

fn local_solve<T: Real>(
    system: &ParametricSystem<T>,
    x0: &[T],
    config: &SolveConfig<T>,
) -> LocalRun<T> {
    let mut run = match config.strategy {
        Strategy::EpigraphSlp => slp::run(system, x0, config),
        Strategy::SmoothedAscent => smoothed::run(system, x0, config),
        Strategy::Subgradient => subgradient::run(system, x0, config),
        Strategy::GridOracle => unreachable!("grid oracle has no local solve"),
    };
    if config.polish && run.termination != Termination::Polished {
        run.try_polish(system);
    }
    run
}

/// Highest `λ`; near-ties by smaller stationarity residual, then lexicographic `x`.
fn pick_best<T: Real>(runs: &[(LocalRun<T>, T)]) -> usize {
    let mut best = 0;
    for k in 1..runs.len() {
        let (a, sa) = (&runs[best].0, runs[best].1);
        let (b, sb) = (&runs[k].0, runs[k].1);
        let tie = T::tol(1e-12) * (T::one() + a.lambda.abs());
        let better = if (b.lambda - a.lambda).abs() <= tie {
            if sb != sa {
                sb < sa
            } else {
                lexicographic_less(&b.x, &a.x)
            }
        } else {
            b.lambda > a.lambda
        };
        if better {
            best = k;
        }
    }
    best
}

pub(crate) fn lexicographic_less<T: Real>(a: &[T], b: &[T]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Multistart points: the system's start point (if any) followed by uniform
/// samples from the box that lie in `Q` and have a defined `λ`.
pub fn start_points<T: Real>(
    system: &ParametricSystem<T>,
    sbox: &SamplingBox<T>,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(count);
    if let Some(p) = system.start_point() {
        if lambda_of(system, p).is_some() {
            out.push(p.to_vec());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 1000 * count {
        attempts += 1;
        let x = sample_box(sbox, &mut rng);
        if lambda_of(system, &x).is_some() {
            out.push(x);
        }
    }
    if out.is_empty() {
        return Err(Error::InfeasibleStart);
    }
    Ok(out)
}

/// Uniform samples from the box, with no feasibility filtering.
pub fn sample_points<T: Real>(sbox: &SamplingBox<T>, count: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_box(sbox, &mut rng)).collect()
}

fn sample_box<T: Real>(sbox: &SamplingBox<T>, rng: &mut ChaCha8Rng) -> Vec<T> {
    (0..sbox.dim())
        .map(|i| {
            let u: f64 = rng.random();
            sbox.lower[i] + T::lit(u) * sbox.width(i)
        })
        .collect()
}

fn suspect_unbounded<T: Real>(
    system: &ParametricSystem<T>,
    sbox: &SamplingBox<T>,
    x: &[T],
) -> bool {
    let d = system.domain();
    (0..x.len()).any(|i| {
        let w = sbox.width(i);
        (!d.upper[i].is_finite() && x[i] > sbox.upper[i] + w)
            || (!d.lower[i].is_finite() && x[i] < sbox.lower[i] - w)
    }) || !norm_inf(x).is_finite()
}

/// `λ(x)`, treated as undefined (`None`) when any ratio in `required` has lost
/// its weight, so line searches never trade a defined ratio for an undefined one.
pub(crate) fn guarded_lambda<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
    required: &[usize],
) -> Option<T> {
    if !system.domain().contains(x) {
        return None;
    }
    let g = system.g(x);
    let h = system.h(x);
    let weight = T::lit(crate::model::WEIGHT_TOL);
    if required.iter().any(|&i| h[i].abs() <= weight) {
        return None;
    }
    let mut best: Option<T> = None;
    for (&gi, &hi) in g.iter().zip(&h) {
        if hi.abs() > weight {
            let r = gi / hi;
            if r.is_nan() {
                return None;
            }
            best = Some(best.map_or(r, |b| b.min(r)));
        }
    }
    best
}

/// Indices of the defined ratios, their values and their gradients.
pub(crate) type RatioGradients<T> = (Vec<usize>, Vec<T>, Vec<Vec<T>>);

/// Gradients of every defined ratio at `x`, with the ratios themselves.
/// `None` when `x` is outside `Q` or no ratio is defined.
pub(crate) fn defined_gradients<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
) -> Option<RatioGradients<T>> {
    if !system.domain().contains(x) {
        return None;
    }
    let g = system.g(x);
    let h = system.h(x);
    let weight = T::lit(crate::model::WEIGHT_TOL);
    let idx: Vec<usize> = (0..g.len()).filter(|&i| h[i].abs() > weight).collect();
    if idx.is_empty() {
        return None;
    }
    let ratios: Vec<T> = idx.iter().map(|&i| g[i] / h[i]).collect();
    if ratios.iter().any(|r| !r.is_finite()) {
        return None;
    }
    let jg = system.jac_g(x);
    let jh = system.jac_h(x);
    let grads = idx
        .iter()
        .zip(&ratios)
        .map(|(&i, &r)| {
            jg.row(i)
                .iter()
                .zip(jh.row(i))
                .map(|(&a, &b)| (a - r * b) / h[i])
                .collect()
        })
        .collect();
    Some((idx, ratios, grads))
}
