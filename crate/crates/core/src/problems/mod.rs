//! Built-in systems and the config-file front end.
//!
//! * [`build_linear`]: `g = Ax`, `h = x`, the Collatz–Wielandt baseline.
//! * [`build_power_flow`]: the two-bus power-flow equations.
//! * [`build_convex_concave_fd`]: `−u'' + p(u) = λ u^q` on `(0, L)`, Dirichlet.
//! * [`build_bratu_fd`]: `−u'' = λ eᵘ` on `(0, L)`, Dirichlet.
//!
//! The differential problems use the standard three-point scheme with
//! `τ = L/(n+1)` and `u_0 = u_{n+1} = 0`.

mod config;
pub mod expr;

use std::f64::consts::FRAC_PI_2;

pub use config::{parse_problem, DomainTable, Expressions, Nonlinear, ProblemKind, ProblemSpec};
pub use expr::{default_vars, parse_expr, Expr};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::matrix::{check_irreducible, ZERO_TOL};
use crate::model::{lambda_of, DomainSpec, Model, ParametricSystem, SamplingBox, Seed};
use crate::scalar::Real;

struct Linear<T> {
    a: Matrix<T>,
}

impl<T: Real> Model<T> for Linear<T> {
    fn dim(&self) -> usize {
        self.a.rows()
    }
    fn eval_g(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.a.mul_vec(x));
    }
    fn eval_h(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(x);
    }
    fn jac_g(&self, _x: &[T]) -> Option<Matrix<T>> {
        Some(self.a.clone())
    }
    fn jac_h(&self, _x: &[T]) -> Option<Matrix<T>> {
        Some(Matrix::identity(self.a.rows()))
    }
}

/// `g(x) = Ax`, `h(x) = x` on the open positive orthant. `A` must be square,
/// entrywise nonnegative and irreducible.
pub fn build_linear<T: Real>(a: Matrix<T>) -> Result<ParametricSystem<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let n = a.rows();
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)];
            if !(v >= T::zero()) {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: v.to_f64_lossy(),
                });
            }
        }
    }
    let irr = check_irreducible(&a, T::lit(ZERO_TOL));
    if !irr.irreducible {
        return Err(Error::NotIrreducible {
            scc_count: irr.scc_count,
        });
    }
    ParametricSystem::new("linear", Linear { a }, DomainSpec::positive_orthant(n))?
        .with_sampling_box(SamplingBox::uniform(n, T::lit(0.1), T::one()))?
        .with_start_point(vec![T::one(); n])
        .map(|s| {
            s.with_structural_r("J = A - λI: off-diagonal part of A is nonnegative and irreducible")
        })
}

struct PowerFlow<T> {
    p: T,
    q: T,
}

impl<T: Real> Model<T> for PowerFlow<T> {
    fn dim(&self) -> usize {
        2
    }
    fn eval_g(&self, x: &[T], out: &mut [T]) {
        let (th, v) = (x[0], x[1]);
        out[0] = -v * th.sin();
        out[1] = v * th.cos() - v * v;
    }
    fn eval_h(&self, _x: &[T], out: &mut [T]) {
        out[0] = self.p;
        out[1] = self.q;
    }
    fn jac_g(&self, x: &[T]) -> Option<Matrix<T>> {
        let (th, v) = (x[0], x[1]);
        Some(Matrix::from_rows(&[
            vec![-v * th.cos(), -th.sin()],
            vec![-v * th.sin(), th.cos() - T::lit(2.0) * v],
        ]))
    }
    fn jac_h(&self, _x: &[T]) -> Option<Matrix<T>> {
        Some(Matrix::zeros(2, 2))
    }
}

/// Two-bus power flow in `x = (θ, v)`: `−v sin θ = λp`, `v cos θ − v² = λq`
/// on `(−π/2, π/2) × (0, ∞)`.
pub fn build_power_flow<T: Real>(p: T, q: T) -> Result<ParametricSystem<T>> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(v > T::zero() && v.is_finite()) {
            return Err(Error::NonpositiveParameter {
                name,
                value: v.to_f64_lossy(),
            });
        }
    }
    let half_pi = T::lit(FRAC_PI_2);
    let domain = DomainSpec::new(
        vec![-half_pi, T::zero()],
        vec![half_pi, T::infinity()],
        vec![true, true],
    )?;
    ParametricSystem::new("power-flow", PowerFlow { p, q }, domain)?
        .with_sampling_box(SamplingBox::new(
            vec![T::lit(-1.5), T::lit(0.01)],
            vec![T::lit(1.5), T::lit(2.0)],
        )?)?
        .with_start_point(vec![T::lit(-0.2), T::lit(0.6)])?
        .with_seed(Seed {
            x: vec![T::zero(), T::one()],
            lambda: T::lit(0.01),
        })
        .map(|s| {
            s.with_structural_r(
                "off-diagonals -sin θ and -v sin θ share the sign of -θ; both vanish at θ = 0, where irreducibility fails",
            )
        })
}

/// The nonlinearity `p(u)` of the convex–concave problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `p(u) = u^γ`, `γ > 1`.
    Power(f64),
    /// Expression in the variable `u`.
    Expression(Expr),
}

impl Nonlinearity {
    /// Parses an expression in `u`.
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Nonlinearity::Expression(parse_expr(
            src,
            &["u".to_string()],
            "p",
        )?))
    }

    fn value<T: Real>(&self, u: T) -> T {
        match self {
            Nonlinearity::Power(g) => u.powf(T::lit(*g)),
            Nonlinearity::Expression(e) => e.eval(&[u]),
        }
    }

    fn derivative(&self) -> Option<Expr> {
        match self {
            Nonlinearity::Power(_) => None,
            Nonlinearity::Expression(e) => Some(e.derivative(0)),
        }
    }
}

struct ConvexConcave<T> {
    n: usize,
    inv_tau2: T,
    q: T,
    p: Nonlinearity,
    dp: Option<Expr>,
}

impl<T: Real> ConvexConcave<T> {
    fn dp(&self, u: T) -> T {
        match (&self.p, &self.dp) {
            (Nonlinearity::Power(g), _) => T::lit(*g) * u.powf(T::lit(*g - 1.0)),
            (_, Some(d)) => d.eval(&[u]),
            _ => unreachable!("expression nonlinearity carries its derivative"),
        }
    }
}

fn laplacian<T: Real>(x: &[T], inv_tau2: T, out: &mut [T]) {
    let n = x.len();
    for i in 0..n {
        let left = if i > 0 { x[i - 1] } else { T::zero() };
        let right = if i + 1 < n { x[i + 1] } else { T::zero() };
        out[i] = (T::lit(2.0) * x[i] - left - right) * inv_tau2;
    }
}

fn laplacian_matrix<T: Real>(n: usize, inv_tau2: T) -> Matrix<T> {
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            T::lit(2.0) * inv_tau2
        } else if i.abs_diff(j) == 1 {
            -inv_tau2
        } else {
            T::zero()
        }
    })
}

impl<T: Real> Model<T> for ConvexConcave<T> {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval_g(&self, x: &[T], out: &mut [T]) {
        laplacian(x, self.inv_tau2, out);
        for (o, &u) in out.iter_mut().zip(x) {
            *o -= self.p.value(u);
        }
    }
    fn eval_h(&self, x: &[T], out: &mut [T]) {
        for (o, &u) in out.iter_mut().zip(x) {
            *o = u.powf(self.q);
        }
    }
    fn jac_g(&self, x: &[T]) -> Option<Matrix<T>> {
        let mut j = laplacian_matrix(self.n, self.inv_tau2);
        for (i, &u) in x.iter().enumerate() {
            let d = j[(i, i)] - self.dp(u);
            j[(i, i)] = d;
        }
        Some(j)
    }
    fn jac_h(&self, x: &[T]) -> Option<Matrix<T>> {
        let d: Vec<T> = x
            .iter()
            .map(|&u| self.q * u.powf(self.q - T::one()))
            .collect();
        Some(Matrix::diag(&d))
    }
}

fn check_mesh<T: Real>(n: usize, l: T) -> Result<T> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "mesh size n must be at least 1".into(),
        ));
    }
    if !(l > T::zero() && l.is_finite()) {
        return Err(Error::NonpositiveParameter {
            name: "L",
            value: l.to_f64_lossy(),
        });
    }
    Ok(l / T::lit((n + 1) as f64))
}

/// Growth condition on `p`: superlinear relative to `t^q` at infinity and
/// `o(t)` at zero, checked at a few sample points.
fn growth_condition_holds(p: &Nonlinearity, q: f64) -> bool {
    let at = |t: f64| p.value::<f64>(t);
    let big = [1e3, 1e6].map(|t| at(t) / t.powf(q));
    let small = [1e-3, 1e-6].map(|t| at(t) / t);
    big.iter().all(|v| v.is_finite())
        && big[1] > big[0]
        && big[1] > 1e3
        && small.iter().all(|v| v.abs() < 1.0)
        && small[1].abs() <= small[0].abs()
}

/// Largest `δ = 2^{-k}` for which `λ(δ φ) > 0`, `φ_i = sin(iπ/(n+1))`.
fn positive_sine_start<T: Real>(system: &ParametricSystem<T>) -> Option<Vec<T>> {
    let n = system.dim();
    let phi: Vec<T> = (1..=n)
        .map(|i| T::lit((i as f64 * std::f64::consts::PI / (n + 1) as f64).sin()))
        .collect();
    let mut delta = T::one();
    for _ in 0..60 {
        let x: Vec<T> = phi.iter().map(|&p| delta * p).collect();
        if lambda_of(system, &x).is_some_and(|l| l > T::zero()) {
            return Some(x);
        }
        delta *= T::lit(0.5);
    }
    None
}

/// `(2u_i − u_{i−1} − u_{i+1})/τ² − p(u_i) = λ u_i^q` on the open positive
/// orthant, `0 < q < 1`.
pub fn build_convex_concave_fd<T: Real>(
    n: usize,
    l: T,
    q: T,
    p: Nonlinearity,
) -> Result<ParametricSystem<T>> {
    let tau = check_mesh(n, l)?;
    let qf = q.to_f64_lossy();
    if !(qf > 0.0 && qf < 1.0) {
        return Err(Error::BadExponent(format!("q = {qf} must lie in (0, 1)")));
    }
    match &p {
        Nonlinearity::Power(g) if !(*g > 1.0) => {
            return Err(Error::BadExponent(format!("gamma = {g} must exceed 1")));
        }
        Nonlinearity::Expression(e) => {
            if e.max_var().is_some_and(|v| v > 0) {
                return Err(Error::InvalidConfig("p may only depend on u".into()));
            }
            if !growth_condition_holds(&p, qf) {
                log::warn!("p(u) does not appear superlinear at infinity and o(u) at zero");
            }
        }
        _ => {}
    }
    let dp = p.derivative();
    let model = ConvexConcave {
        n,
        inv_tau2: T::one() / (tau * tau),
        q,
        p,
        dp,
    };
    let system =
        ParametricSystem::new("convex-concave-fd", model, DomainSpec::positive_orthant(n))?
            .with_sampling_box(SamplingBox::uniform(n, T::lit(0.01), T::lit(10.0)))?
            .with_structural_r("tridiagonal with constant off-diagonals -1/τ²");
    let Some(start) = positive_sine_start(&system) else {
        return Ok(system);
    };
    // small-amplitude solution guess for continuation
    let guess: Vec<T> = start.iter().map(|&v| v * T::lit(0.05)).collect();
    let seed_lambda = lambda_of(&system, &guess).filter(|l| *l > T::zero());
    let system = system.with_start_point(start)?;
    match seed_lambda {
        Some(lambda) => system.with_seed(Seed { x: guess, lambda }),
        None => Ok(system),
    }
}

struct Bratu<T> {
    n: usize,
    inv_tau2: T,
}

impl<T: Real> Model<T> for Bratu<T> {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval_g(&self, x: &[T], out: &mut [T]) {
        laplacian(x, self.inv_tau2, out);
    }
    fn eval_h(&self, x: &[T], out: &mut [T]) {
        for (o, &u) in out.iter_mut().zip(x) {
            *o = u.exp();
        }
    }
    fn jac_g(&self, _x: &[T]) -> Option<Matrix<T>> {
        Some(laplacian_matrix(self.n, self.inv_tau2))
    }
    fn jac_h(&self, x: &[T]) -> Option<Matrix<T>> {
        let d: Vec<T> = x.iter().map(|u| u.exp()).collect();
        Some(Matrix::diag(&d))
    }
}

/// `(2u_i − u_{i−1} − u_{i+1})/τ² = λ e^{u_i}` on the open positive orthant.
pub fn build_bratu_fd<T: Real>(n: usize, l: T) -> Result<ParametricSystem<T>> {
    let tau = check_mesh(n, l)?;
    let model = Bratu {
        n,
        inv_tau2: T::one() / (tau * tau),
    };
    let system = ParametricSystem::new("bratu-fd", model, DomainSpec::positive_orthant(n))?
        .with_sampling_box(SamplingBox::uniform(n, T::lit(0.01), T::lit(3.0)))?
        .with_structural_r("tridiagonal with constant off-diagonals -1/τ²");
    let v: Vec<T> = (1..=n).map(|i| (T::lit(i as f64) * tau).sin()).collect();
    let start = if system.domain().contains(&v) {
        v
    } else {
        (1..=n)
            .map(|i| T::lit((i as f64 * std::f64::consts::PI / (n + 1) as f64).sin()))
            .collect()
    };
    // u ≈ λ w with w'' = -1: w_i = t_i (L - t_i) / 2, exact for the scheme
    let lambda = T::lit(0.1);
    let guess: Vec<T> = (1..=n)
        .map(|i| {
            let t = T::lit(i as f64) * tau;
            lambda * t * (l - t) / T::lit(2.0)
        })
        .collect();
    system
        .with_start_point(start)?
        .with_seed(Seed { x: guess, lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ratio_profile;

    #[test]
    fn linear_rejects_reducible_and_negative() {
        assert_eq!(
            build_linear(Matrix::<f64>::identity(2)).unwrap_err(),
            Error::NotIrreducible { scc_count: 2 }
        );
        let neg = Matrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]);
        assert!(matches!(
            build_linear::<f64>(neg),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
        assert!(build_linear(Matrix::from_rows(&[vec![0.0f64]])).is_ok());
    }

    #[test]
    fn power_flow_reference_ratio() {
        let s = build_power_flow(1.0f64, 1.0).unwrap();
        let p = ratio_profile(&s, &[0.0, 0.5]).unwrap();
        assert_eq!(p.ratios[1].value(), Some(0.25));
        assert_eq!(p.ratios[0].value(), Some(0.0));
        assert!(matches!(
            build_power_flow(0.0f64, 1.0),
            Err(Error::NonpositiveParameter { name: "p", .. })
        ));
    }

    #[test]
    fn bratu_single_node() {
        let s = build_bratu_fd(1, 1.0f64).unwrap();
        let l = lambda_of(&s, &[1.0]).unwrap();
        assert!((l - 8.0 / std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn bratu_positivity_start() {
        let s = build_bratu_fd(9, 1.0f64).unwrap();
        assert!(lambda_of(&s, s.start_point().unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn convex_concave_validation_and_start() {
        assert!(matches!(
            build_convex_concave_fd(3, 1.0f64, 1.5, Nonlinearity::Power(2.0)),
            Err(Error::BadExponent(_))
        ));
        assert!(matches!(
            build_convex_concave_fd(3, 1.0f64, 0.5, Nonlinearity::Power(1.0)),
            Err(Error::BadExponent(_))
        ));
        let s = build_convex_concave_fd(9, 1.0f64, 0.5, Nonlinearity::Power(2.0)).unwrap();
        assert!(lambda_of(&s, s.start_point().unwrap()).unwrap() > 0.0);
        let one = build_convex_concave_fd(1, 1.0f64, 0.5, Nonlinearity::Power(2.0)).unwrap();
        let u: f64 = 8.0 / 3.0;
        let expect = 16.0 / 3.0 * u.sqrt();
        assert!((lambda_of(&one, &[u]).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn expression_nonlinearity_matches_power() {
        let a = build_convex_concave_fd(4, 1.0f64, 0.5, Nonlinearity::Power(2.0)).unwrap();
        let b =
            build_convex_concave_fd(4, 1.0f64, 0.5, Nonlinearity::parse("u^2").unwrap()).unwrap();
        let x = [0.3, 1.1, 2.0, 0.7];
        assert_eq!(a.g(&x), b.g(&x));
        let (ja, jb) = (a.jac_g(&x), b.jac_g(&x));
        for i in 0..4 {
            assert!((ja[(i, i)] - jb[(i, i)]).abs() < 1e-12);
        }
    }
}
