//! TOML problem files.
//!
//! ```toml
//! kind = "custom"
//! n = 2
//! sampling_box = { lower = [-1.5, 0.01], upper = [1.5, 2.0] }
//! domain = { lower = [-1.5707963, 0.0], upper = [1.5707963, inf] }
//!
//! [expressions]
//! g = ["-x2*sin(x1)", "x2*cos(x1) - x2^2"]
//! h = ["1", "1"]
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::{default_vars, parse_expr, Expr};
use super::{
    build_bratu_fd, build_convex_concave_fd, build_linear, build_power_flow, Nonlinearity,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{DomainSpec, Model, ParametricSystem, SamplingBox, Seed};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Linear,
    PowerFlow,
    ConvexConcaveFd,
    BratuFd,
    Custom,
}

/// `p` as a number is the exponent `γ` of `u^γ`; as a string it is an
/// expression in `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Nonlinear {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expressions {
    pub g: Vec<String>,
    pub h: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainTable {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Defaults to open bounds in every coordinate.
    pub strict: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxTable {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Image of a problem file. Which keys apply depends on `kind`:
///
/// | kind               | keys                                    |
/// |--------------------|-----------------------------------------|
/// | `linear`           | `matrix`                                |
/// | `power-flow`       | `p`, `q` (loads)                        |
/// | `convex-concave-fd`| `n`, `L`, `q` or `q_param`, `gamma` or `p` |
/// | `bratu-fd`         | `n`, `L`                                |
/// | `custom`           | `n`, `expressions.g`, `expressions.h`   |
///
/// `domain`, `sampling_box`, `seed_point` and `seed_lambda` apply to every kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: Option<usize>,
    #[serde(rename = "L")]
    pub length: Option<f64>,
    pub q: Option<f64>,
    pub q_param: Option<f64>,
    pub gamma: Option<f64>,
    pub p: Option<Nonlinear>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub expressions: Option<Expressions>,
    pub domain: Option<DomainTable>,
    pub sampling_box: Option<BoxTable>,
    pub seed_point: Option<Vec<f64>>,
    pub seed_lambda: Option<f64>,
}

fn missing(key: &str, kind: ProblemKind) -> Error {
    Error::InvalidConfig(format!("`{key}` is required for kind {kind:?}"))
}

impl ProblemSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let (line, column) = e.span().map_or((0, 0), |span| {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
                (line, column)
            });
            Error::Parse {
                context: "problem file".into(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        Self::from_toml(&toml::to_string(&table).map_err(|e| Error::InvalidConfig(e.to_string()))?)
    }

    pub fn build<T: Real>(&self) -> Result<ParametricSystem<T>> {
        let lit = |v: f64| T::lit(v);
        let system = match self.kind {
            ProblemKind::Linear => {
                let rows = self
                    .matrix
                    .as_ref()
                    .ok_or_else(|| missing("matrix", self.kind))?;
                let n = rows.len();
                if let Some(r) = rows.iter().find(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: r.len(),
                    });
                }
                let conv: Vec<Vec<T>> = rows
                    .iter()
                    .map(|r| r.iter().map(|&v| lit(v)).collect())
                    .collect();
                build_linear(Matrix::from_rows(&conv))?
            }
            ProblemKind::PowerFlow => {
                let p = match &self.p {
                    Some(Nonlinear::Number(v)) => *v,
                    Some(Nonlinear::Text(_)) => {
                        return Err(Error::InvalidConfig(
                            "power-flow `p` must be a number".into(),
                        ))
                    }
                    None => 1.0,
                };
                let q = self.q.or(self.q_param).unwrap_or(1.0);
                build_power_flow(lit(p), lit(q))?
            }
            ProblemKind::ConvexConcaveFd => {
                let n = self.n.ok_or_else(|| missing("n", self.kind))?;
                let q = self
                    .q_param
                    .or(self.q)
                    .ok_or_else(|| missing("q", self.kind))?;
                let p = match (&self.p, self.gamma) {
                    (Some(Nonlinear::Text(src)), _) => Nonlinearity::parse(src)?,
                    (Some(Nonlinear::Number(g)), _) => Nonlinearity::Power(*g),
                    (None, Some(g)) => Nonlinearity::Power(g),
                    (None, None) => return Err(missing("gamma", self.kind)),
                };
                build_convex_concave_fd(n, lit(self.length.unwrap_or(1.0)), lit(q), p)?
            }
            ProblemKind::BratuFd => {
                let n = self.n.ok_or_else(|| missing("n", self.kind))?;
                build_bratu_fd(n, lit(self.length.unwrap_or(1.0)))?
            }
            ProblemKind::Custom => self.build_custom()?,
        };
        self.apply_overrides(system)
    }

    fn build_custom<T: Real>(&self) -> Result<ParametricSystem<T>> {
        let n = self.n.ok_or_else(|| missing("n", self.kind))?;
        let ex = self
            .expressions
            .as_ref()
            .ok_or_else(|| missing("expressions", self.kind))?;
        for list in [&ex.g, &ex.h] {
            if list.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: list.len(),
                });
            }
        }
        let vars = default_vars(n);
        let parse_all = |list: &[String], name: &str| -> Result<Vec<Expr>> {
            list.iter()
                .enumerate()
                .map(|(i, src)| parse_expr(src, &vars, &format!("{name}[{}]", i + 1)))
                .collect()
        };
        let model = ExprModel::new(parse_all(&ex.g, "g")?, parse_all(&ex.h, "h")?);
        ParametricSystem::from_arc("custom", Arc::new(model), DomainSpec::unbounded(n))
    }

    fn apply_overrides<T: Real>(
        &self,
        mut system: ParametricSystem<T>,
    ) -> Result<ParametricSystem<T>> {
        let conv = |v: &[f64]| v.iter().map(|&a| T::lit(a)).collect::<Vec<T>>();
        if let Some(d) = &self.domain {
            let strict = d
                .strict
                .clone()
                .unwrap_or_else(|| vec![true; d.lower.len()]);
            system =
                system.with_domain(DomainSpec::new(conv(&d.lower), conv(&d.upper), strict)?)?;
        }
        if let Some(b) = &self.sampling_box {
            system = system.with_sampling_box(SamplingBox::new(conv(&b.lower), conv(&b.upper))?)?;
        }
        if let Some(x) = &self.seed_point {
            let x = conv(x);
            match self.seed_lambda {
                Some(l) => {
                    system = system.with_seed(Seed {
                        x: x.clone(),
                        lambda: T::lit(l),
                    })?;
                }
                None => system = system.with_start_point(x)?,
            }
        }
        Ok(system)
    }
}

/// Parses a TOML problem file and builds the system.
pub fn parse_problem<T: Real>(text: &str) -> Result<ParametricSystem<T>> {
    ProblemSpec::from_toml(text)?.build()
}

/// System defined by parsed expressions, with Jacobians from symbolic
/// differentiation.
struct ExprModel {
    g: Vec<Expr>,
    h: Vec<Expr>,
    jg: Vec<Vec<Expr>>,
    jh: Vec<Vec<Expr>>,
}

impl ExprModel {
    fn new(g: Vec<Expr>, h: Vec<Expr>) -> Self {
        let n = g.len();
        let jac = |list: &[Expr]| -> Vec<Vec<Expr>> {
            list.iter()
                .map(|e| (0..n).map(|j| e.derivative(j)).collect())
                .collect()
        };
        let jg = jac(&g);
        let jh = jac(&h);
        Self { g, h, jg, jh }
    }
}

fn eval_matrix<T: Real>(m: &[Vec<Expr>], x: &[T]) -> Matrix<T> {
    Matrix::from_fn(m.len(), x.len(), |i, j| m[i][j].eval(x))
}

impl<T: Real> Model<T> for ExprModel {
    fn dim(&self) -> usize {
        self.g.len()
    }
    fn eval_g(&self, x: &[T], out: &mut [T]) {
        for (o, e) in out.iter_mut().zip(&self.g) {
            *o = e.eval(x);
        }
    }
    fn eval_h(&self, x: &[T], out: &mut [T]) {
        for (o, e) in out.iter_mut().zip(&self.h) {
            *o = e.eval(x);
        }
    }
    fn jac_g(&self, x: &[T]) -> Option<Matrix<T>> {
        Some(eval_matrix(&self.jg, x))
    }
    fn jac_h(&self, x: &[T]) -> Option<Matrix<T>> {
        Some(eval_matrix(&self.jh, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bratu_file() {
        let s = parse_problem::<f64>("kind = \"bratu-fd\"\nn = 3\nL = 1.0\n").unwrap();
        assert_eq!(s.dim(), 3);
        assert!(s.structural_r().is_some());
    }

    #[test]
    fn custom_power_flow_with_infinite_bound() {
        let text = r#"
kind = "custom"
n = 2
domain = { lower = [-1.5707963267948966, 0.0], upper = [1.5707963267948966, inf] }
sampling_box = { lower = [-1.5, 0.01], upper = [1.5, 2.0] }

[expressions]
g = ["−x2*sin(x1)", "x2*cos(x1) − x2^2"]
h = ["1", "1"]
"#;
        let s = parse_problem::<f64>(text).unwrap();
        assert!(s.structural_r().is_none());
        let b = build_power_flow(1.0f64, 1.0).unwrap();
        let x = [-0.3, 0.8];
        assert_eq!(s.g(&x), b.g(&x));
        assert!(s.domain().upper[1].is_infinite());
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            parse_problem::<f64>("kind = \"bratu-fd\"\n"),
            Err(Error::InvalidConfig(_))
        ));
        let bad = "kind = \"custom\"\nn = 2\n[expressions]\ng = [\"x1 + \", \"x2\"]\nh = [\"1\", \"1\"]\n";
        assert!(matches!(
            parse_problem::<f64>(bad),
            Err(Error::Parse { .. })
        ));
        let arity =
            "kind = \"custom\"\nn = 2\n[expressions]\ng = [\"x3\", \"x2\"]\nh = [\"1\", \"1\"]\n";
        assert!(matches!(
            parse_problem::<f64>(arity),
            Err(Error::UnknownIdentifier { .. })
        ));
        let dims = "kind = \"custom\"\nn = 2\n[expressions]\ng = [\"x1\"]\nh = [\"1\", \"1\"]\n";
        assert!(matches!(
            parse_problem::<f64>(dims),
            Err(Error::DimensionMismatch { .. })
        ));
        match parse_problem::<f64>("kind = \"bratu-fd\"\nn = \"x\"\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn convex_concave_expression_p() {
        let s = parse_problem::<f64>("kind = \"convex-concave-fd\"\nn = 1\nq = 0.5\np = \"u^2\"\n")
            .unwrap();
        let u: f64 = 8.0 / 3.0;
        let l = crate::model::lambda_of(&s, &[u]).unwrap();
        assert!((l - 16.0 / 3.0 * u.sqrt()).abs() < 1e-12);
    }
}
