//! Parametric systems `f(x, λ) = g(x) − λ h(x)`, their box domains, and the
//! bifurcation functional `λ(x) = min_{i : h_i(x) ≠ 0} g_i(x) / h_i(x)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Svd};
use crate::scalar::Real;

/// Absolute threshold below which a weight `h_i(x)` counts as zero.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Relative tolerance for membership in the active set `N(x)`.
pub const ACTIVE_TOL: f64 = 1e-8;

/// Evaluators for `g` and `h`. Implementations must be stateless: the solvers
/// call them concurrently from several worker threads.
pub trait Model<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_g(&self, x: &[T], out: &mut [T]);
    fn eval_h(&self, x: &[T], out: &mut [T]);

    /// Analytic Jacobian of `g`, when available.
    fn jac_g(&self, _x: &[T]) -> Option<Matrix<T>> {
        None
    }

    /// Analytic Jacobian of `h`, when available.
    fn jac_h(&self, _x: &[T]) -> Option<Matrix<T>> {
        None
    }
}

type VecFn<T> = dyn Fn(&[T], &mut [T]) + Send + Sync;
type MatFn<T> = dyn Fn(&[T]) -> Matrix<T> + Send + Sync;

/// Closure-backed [`Model`], handy for ad-hoc systems.
pub struct FnModel<T> {
    n: usize,
    g: Box<VecFn<T>>,
    h: Box<VecFn<T>>,
    jac_g: Option<Box<MatFn<T>>>,
    jac_h: Option<Box<MatFn<T>>>,
}

impl<T: Real> FnModel<T> {
    pub fn new(
        n: usize,
        g: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
        h: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            g: Box::new(g),
            h: Box::new(h),
            jac_g: None,
            jac_h: None,
        }
    }

    pub fn with_jacobians(
        mut self,
        jac_g: impl Fn(&[T]) -> Matrix<T> + Send + Sync + 'static,
        jac_h: impl Fn(&[T]) -> Matrix<T> + Send + Sync + 'static,
    ) -> Self {
        self.jac_g = Some(Box::new(jac_g));
        self.jac_h = Some(Box::new(jac_h));
        self
    }
}

impl<T: Real> Model<T> for FnModel<T> {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval_g(&self, x: &[T], out: &mut [T]) {
        (self.g)(x, out)
    }
    fn eval_h(&self, x: &[T], out: &mut [T]) {
        (self.h)(x, out)
    }
    fn jac_g(&self, x: &[T]) -> Option<Matrix<T>> {
        self.jac_g.as_ref().map(|f| f(x))
    }
    fn jac_h(&self, x: &[T]) -> Option<Matrix<T>> {
        self.jac_h.as_ref().map(|f| f(x))
    }
}

/// Open (or half-open) box `Q`. Bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    /// Per coordinate: whether both bounds are excluded.
    pub strict: Vec<bool>,
    /// Points closer than this to a finite bound are flagged near-boundary.
    pub membership_margin: T,
}

impl<T: Real> DomainSpec<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, strict: Vec<bool>) -> Result<Self> {
        let n = lower.len();
        if upper.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: upper.len(),
            });
        }
        if strict.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: strict.len(),
            });
        }
        if let Some(i) = (0..n).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::InvalidConfig(format!(
                "domain bound {i}: lower must be below upper"
            )));
        }
        Ok(Self {
            lower,
            upper,
            strict,
            membership_margin: T::zero(),
        })
    }

    /// Open box with the same bounds in every coordinate.
    pub fn open_uniform(n: usize, lower: T, upper: T) -> Self {
        Self {
            lower: vec![lower; n],
            upper: vec![upper; n],
            strict: vec![true; n],
            membership_margin: T::zero(),
        }
    }

    /// The open positive orthant.
    pub fn positive_orthant(n: usize) -> Self {
        Self::open_uniform(n, T::zero(), T::infinity())
    }

    pub fn unbounded(n: usize) -> Self {
        Self::open_uniform(n, T::neg_infinity(), T::infinity())
    }

    pub fn with_margin(mut self, margin: T) -> Self {
        self.membership_margin = margin;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// First coordinate violating a bound, if any.
    pub fn violation(&self, x: &[T]) -> Option<usize> {
        (0..self.dim()).find(|&i| {
            let v = x[i];
            if v.is_nan() {
                return true;
            }
            if self.strict[i] {
                !(v > self.lower[i] && v < self.upper[i])
            } else {
                !(v >= self.lower[i] && v <= self.upper[i])
            }
        })
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim() && self.violation(x).is_none()
    }

    pub fn check(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        match self.violation(x) {
            None => Ok(()),
            Some(i) => Err(Error::DomainViolation {
                coordinate: i,
                value: x[i].to_f64_lossy(),
            }),
        }
    }

    /// Whether `x` lies within `membership_margin` of a finite bound.
    pub fn near_boundary(&self, x: &[T]) -> bool {
        self.boundary_distance(x) <= self.membership_margin
    }

    /// Distance from `x` to the nearest finite bound (`+∞` if there is none).
    pub fn boundary_distance(&self, x: &[T]) -> T {
        (0..self.dim()).fold(T::infinity(), |d, i| {
            let lo = self.lower[i];
            let hi = self.upper[i];
            let d = if lo.is_finite() { d.min(x[i] - lo) } else { d };
            if hi.is_finite() {
                d.min(hi - x[i])
            } else {
                d
            }
        })
    }

    /// Largest `t ∈ [0, 1]` with `x + t·d` inside the closure of the box,
    /// shrunk by `fraction` so the result stays strictly inside.
    pub fn max_step_fraction(&self, x: &[T], d: &[T], fraction: T) -> T {
        let mut t = T::one();
        for i in 0..self.dim() {
            if d[i] > T::zero() && self.upper[i].is_finite() {
                t = t.min(fraction * (self.upper[i] - x[i]) / d[i]);
            } else if d[i] < T::zero() && self.lower[i].is_finite() {
                t = t.min(fraction * (self.lower[i] - x[i]) / d[i]);
            }
        }
        t.max(T::zero())
    }
}

/// Finite axis-aligned box used to draw multistart points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingBox<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> SamplingBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for i in 0..lower.len() {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(Error::MissingSamplingBox);
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(n: usize, lower: T, upper: T) -> Self {
        Self {
            lower: vec![lower; n],
            upper: vec![upper; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> T {
        self.upper[i] - self.lower[i]
    }
}

/// Near-solution used to start continuation: Newton at fixed `lambda` from `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed<T> {
    pub x: Vec<T>,
    pub lambda: T,
}

/// The parametric system `g(x) − λ h(x) = 0` on a box domain.
#[derive(Clone)]
pub struct ParametricSystem<T: Real> {
    name: String,
    model: Arc<dyn Model<T>>,
    domain: DomainSpec<T>,
    sampling_box: Option<SamplingBox<T>>,
    start_point: Option<Vec<T>>,
    seed: Option<Seed<T>>,
    structural_r: Option<String>,
}

impl<T: Real> fmt::Debug for ParametricSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricSystem")
            .field("name", &self.name)
            .field("n", &self.dim())
            .field("domain", &self.domain)
            .field("structural_r", &self.structural_r)
            .finish()
    }
}

impl<T: Real> ParametricSystem<T> {
    pub fn new(
        name: impl Into<String>,
        model: impl Model<T> + 'static,
        domain: DomainSpec<T>,
    ) -> Result<Self> {
        Self::from_arc(name, Arc::new(model), domain)
    }

    pub fn from_arc(
        name: impl Into<String>,
        model: Arc<dyn Model<T>>,
        domain: DomainSpec<T>,
    ) -> Result<Self> {
        if model.dim() == 0 {
            return Err(Error::InvalidConfig(
                "system dimension must be positive".into(),
            ));
        }
        if domain.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: domain.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            model,
            domain,
            sampling_box: None,
            start_point: None,
            seed: None,
            structural_r: None,
        })
    }

    pub fn with_sampling_box(mut self, b: SamplingBox<T>) -> Result<Self> {
        if b.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: b.dim(),
            });
        }
        self.sampling_box = Some(b);
        Ok(self)
    }

    /// Deterministic first multistart point.
    pub fn with_start_point(mut self, x: Vec<T>) -> Result<Self> {
        self.domain.check(&x)?;
        self.start_point = Some(x);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: Seed<T>) -> Result<Self> {
        if seed.x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: seed.x.len(),
            });
        }
        self.seed = Some(seed);
        Ok(self)
    }

    /// Marks condition (R) as established structurally (not by sampling); the
    /// note records the argument and any caveat.
    pub fn with_structural_r(mut self, note: impl Into<String>) -> Self {
        self.structural_r = Some(note.into());
        self
    }

    pub fn with_domain(mut self, domain: DomainSpec<T>) -> Result<Self> {
        if domain.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: domain.dim(),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn domain(&self) -> &DomainSpec<T> {
        &self.domain
    }

    pub fn sampling_box(&self) -> Option<&SamplingBox<T>> {
        self.sampling_box.as_ref()
    }

    pub fn start_point(&self) -> Option<&[T]> {
        self.start_point.as_deref()
    }

    pub fn seed(&self) -> Option<&Seed<T>> {
        self.seed.as_ref()
    }

    pub fn structural_r(&self) -> Option<&str> {
        self.structural_r.as_deref()
    }

    pub fn model(&self) -> &Arc<dyn Model<T>> {
        &self.model
    }

    pub fn g(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.model.eval_g(x, &mut out);
        out
    }

    pub fn h(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.model.eval_h(x, &mut out);
        out
    }

    /// `f(x, λ) = g(x) − λ h(x)`.
    pub fn residual(&self, x: &[T], lambda: T) -> Vec<T> {
        let g = self.g(x);
        let h = self.h(x);
        g.iter().zip(&h).map(|(&a, &b)| a - lambda * b).collect()
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        let x = self.any_point();
        self.model.jac_g(&x).is_some() && self.model.jac_h(&x).is_some()
    }

    fn any_point(&self) -> Vec<T> {
        if let Some(p) = &self.start_point {
            return p.clone();
        }
        (0..self.dim())
            .map(|i| {
                let (lo, hi) = (self.domain.lower[i], self.domain.upper[i]);
                match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => (lo + hi) / T::lit(2.0),
                    (true, false) => lo + T::one(),
                    (false, true) => hi - T::one(),
                    (false, false) => T::zero(),
                }
            })
            .collect()
    }

    pub fn jac_g(&self, x: &[T]) -> Matrix<T> {
        self.model.jac_g(x).unwrap_or_else(|| self.fd_jac_g(x))
    }

    pub fn jac_h(&self, x: &[T]) -> Matrix<T> {
        self.model.jac_h(x).unwrap_or_else(|| self.fd_jac_h(x))
    }

    /// `J_x f(x, λ) = J_g(x) − λ J_h(x)`.
    pub fn jac_x(&self, x: &[T], lambda: T) -> Matrix<T> {
        self.jac_g(x).add_scaled(-lambda, &self.jac_h(x))
    }

    pub fn fd_jac_g(&self, x: &[T]) -> Matrix<T> {
        central_difference(x, self.dim(), |p, out| self.model.eval_g(p, out))
    }

    pub fn fd_jac_h(&self, x: &[T]) -> Matrix<T> {
        central_difference(x, self.dim(), |p, out| self.model.eval_h(p, out))
    }
}

/// Central-difference Jacobian with step `fd_step · (1 + |x_j|)` per column.
pub fn central_difference<T: Real>(x: &[T], m: usize, f: impl Fn(&[T], &mut [T])) -> Matrix<T> {
    let n = x.len();
    let mut jac = Matrix::zeros(m, n);
    let mut xp = x.to_vec();
    let mut fp = vec![T::zero(); m];
    let mut fm = vec![T::zero(); m];
    for j in 0..n {
        let step = T::fd_step() * (T::one() + x[j].abs());
        xp[j] = x[j] + step;
        let hp = xp[j] - x[j];
        f(&xp, &mut fp);
        xp[j] = x[j] - step;
        let hm = x[j] - xp[j];
        f(&xp, &mut fm);
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (hp + hm);
        }
    }
    jac
}

/// A ratio `g_i / h_i`, undefined when the weight vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ratio<T> {
    Defined(T),
    Undefined,
}

impl<T: Copy> Ratio<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Ratio::Defined(v) => Some(v),
            Ratio::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Ratio::Defined(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTolerances<T> {
    /// `|h_i| ≤ weight` means the ratio is undefined.
    pub weight: T,
    /// Index `i` is active when `r_i − λ ≤ active · (1 + |λ|)`.
    pub active: T,
}

impl<T: Real> Default for ProfileTolerances<T> {
    fn default() -> Self {
        Self {
            weight: T::lit(WEIGHT_TOL),
            active: T::tol(ACTIVE_TOL),
        }
    }
}

/// Per-component ratios at `x`, the functional value `λ(x)` and the active set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioProfile<T> {
    pub x: Vec<T>,
    pub ratios: Vec<Ratio<T>>,
    pub lambda_of_x: T,
    /// Indices (0-based) of `N(x)`, ascending.
    pub active: Vec<usize>,
    pub full_active: bool,
    /// `g(x)` and `h(x)` as evaluated.
    pub g: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Real> RatioProfile<T> {
    pub fn defined_ratios(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.ratios
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.value().map(|v| (i, v)))
    }

    /// `‖g(x) − λ(x) h(x)‖∞`.
    pub fn solution_residual(&self) -> T {
        self.g.iter().zip(&self.h).fold(T::zero(), |m, (&g, &h)| {
            m.max((g - self.lambda_of_x * h).abs())
        })
    }
}

pub fn ratio_profile<T: Real>(system: &ParametricSystem<T>, x: &[T]) -> Result<RatioProfile<T>> {
    ratio_profile_with(system, x, ProfileTolerances::default())
}

pub fn ratio_profile_with<T: Real>(
    system: &ParametricSystem<T>,
    x: &[T],
    tol: ProfileTolerances<T>,
) -> Result<RatioProfile<T>> {
    system.domain().check(x)?;
    let g = system.g(x);
    let h = system.h(x);
    let ratios: Vec<Ratio<T>> = g
        .iter()
        .zip(&h)
        .map(|(&gi, &hi)| {
            if hi.abs() <= tol.weight {
                Ratio::Undefined
            } else {
                Ratio::Defined(gi / hi)
            }
        })
        .collect();
    let lambda = ratios
        .iter()
        .filter_map(|r| r.value())
        .fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| m.min(v))))
        .ok_or(Error::DegenerateWeight)?;
    let cut = tol.active * (T::one() + lambda.abs());
    let active: Vec<usize> = ratios
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.value().filter(|&v| v - lambda <= cut).map(|_| i))
        .collect();
    let full_active = active.len() == x.len();
    Ok(RatioProfile {
        x: x.to_vec(),
        ratios,
        lambda_of_x: lambda,
        active,
        full_active,
        g,
        h,
    })
}

/// `λ(x)` without building a profile; `None` outside the domain or when no
/// ratio is defined.
pub fn lambda_of<T: Real>(system: &ParametricSystem<T>, x: &[T]) -> Option<T> {
    if !system.domain().contains(x) {
        return None;
    }
    let g = system.g(x);
    let h = system.h(x);
    let weight = T::lit(WEIGHT_TOL);
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

/// Generalized gradient data: `∇r_i(x)` for every active index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subdifferential<T> {
    pub indices: Vec<usize>,
    pub gradients: Vec<Vec<T>>,
    /// Affine dimension of the gradient set.
    pub hull_dimension: usize,
}

/// `∇r_i = (∇g_i − r_i ∇h_i) / h_i` for the rows selected by `indices`.
pub fn ratio_gradients<T: Real>(
    system: &ParametricSystem<T>,
    profile: &RatioProfile<T>,
    indices: &[usize],
) -> Result<Vec<Vec<T>>> {
    let jg = system.jac_g(&profile.x);
    let jh = system.jac_h(&profile.x);
    indices
        .iter()
        .map(|&i| {
            let r = profile.ratios[i]
                .value()
                .ok_or(Error::DegenerateActiveWeight { index: i })?;
            let hi = profile.h[i];
            Ok(jg
                .row(i)
                .iter()
                .zip(jh.row(i))
                .map(|(&dg, &dh)| (dg - r * dh) / hi)
                .collect())
        })
        .collect()
}

pub fn subdifferential<T: Real>(
    system: &ParametricSystem<T>,
    profile: &RatioProfile<T>,
) -> Result<Subdifferential<T>> {
    if profile.active.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let gradients = ratio_gradients(system, profile, &profile.active)?;
    let hull_dimension = affine_dimension(&gradients);
    Ok(Subdifferential {
        indices: profile.active.clone(),
        gradients,
        hull_dimension,
    })
}

fn affine_dimension<T: Real>(points: &[Vec<T>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let base = &points[0];
    let diffs = Matrix::from_fn(base.len(), points.len() - 1, |i, j| {
        points[j + 1][i] - base[i]
    });
    let svd = Svd::new(&diffs);
    let scale = svd.sigma_max().max(
        points
            .iter()
            .map(|p| crate::linalg::norm_inf(p))
            .fold(T::zero(), T::max),
    );
    let cut = T::tol(1e-10) * scale;
    svd.singular_values.iter().filter(|&&s| s > cut).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_2x2() -> ParametricSystem<f64> {
        let model = FnModel::new(
            2,
            |x: &[f64], o: &mut [f64]| {
                o[0] = 2.0 * x[0] + x[1];
                o[1] = x[0] + 2.0 * x[1];
            },
            |x: &[f64], o: &mut [f64]| o.copy_from_slice(x),
        );
        ParametricSystem::new("linear", model, DomainSpec::positive_orthant(2)).unwrap()
    }

    #[test]
    fn symmetric_linear_profile() {
        let s = linear_2x2();
        let p = ratio_profile(&s, &[1.0, 1.0]).unwrap();
        assert_eq!(p.ratios, vec![Ratio::Defined(3.0), Ratio::Defined(3.0)]);
        assert_eq!(p.lambda_of_x, 3.0);
        assert_eq!(p.active, vec![0, 1]);
        assert!(p.full_active);
    }

    #[test]
    fn opposite_gradients_on_symmetric_point() {
        let s = linear_2x2();
        let p = ratio_profile(&s, &[1.0, 1.0]).unwrap();
        let sd = subdifferential(&s, &p).unwrap();
        // r_1 = 2 + x2/x1 → ∇r_1 = (−1, 1)
        for (got, want) in sd.gradients[0].iter().zip([-1.0, 1.0]) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        for (got, want) in sd.gradients[1].iter().zip([1.0, -1.0]) {
            assert!((got - want).abs() < 1e-8);
        }
        assert_eq!(sd.hull_dimension, 1);
    }

    #[test]
    fn domain_violation_and_degenerate_weight() {
        let s = linear_2x2();
        assert!(matches!(
            ratio_profile(&s, &[-1.0, 1.0]),
            Err(Error::DomainViolation { coordinate: 0, .. })
        ));
        let zero_h = FnModel::new(
            1,
            |_: &[f64], o: &mut [f64]| o[0] = 1.0,
            |_: &[f64], o: &mut [f64]| o[0] = 0.0,
        );
        let s = ParametricSystem::new("zero", zero_h, DomainSpec::unbounded(1)).unwrap();
        assert_eq!(ratio_profile(&s, &[0.3]), Err(Error::DegenerateWeight));
    }

    #[test]
    fn undefined_ratio_is_excluded_from_min() {
        let m = FnModel::new(
            2,
            |x: &[f64], o: &mut [f64]| {
                o[0] = -5.0;
                o[1] = x[1];
            },
            |_: &[f64], o: &mut [f64]| {
                o[0] = 0.0;
                o[1] = 1.0;
            },
        );
        let s = ParametricSystem::new("partial", m, DomainSpec::unbounded(2)).unwrap();
        let p = ratio_profile(&s, &[0.0, 2.0]).unwrap();
        assert_eq!(p.ratios[0], Ratio::Undefined);
        assert_eq!(p.lambda_of_x, 2.0);
        assert_eq!(p.active, vec![1]);
        assert!(!p.full_active);
    }

    #[test]
    fn domain_membership_and_margin() {
        let d = DomainSpec::new(vec![0.0, -1.0], vec![f64::INFINITY, 1.0], vec![true, false])
            .unwrap()
            .with_margin(0.1);
        assert!(d.contains(&[0.5, 1.0]));
        assert!(!d.contains(&[0.0, 0.0]));
        assert!(d.near_boundary(&[0.05, 0.0]));
        assert!(!d.near_boundary(&[0.5, 0.5]));
        assert!(DomainSpec::new(vec![1.0], vec![1.0], vec![true]).is_err());
    }
}
