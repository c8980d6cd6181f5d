use foldfinder::hull::min_norm_point;
use foldfinder::matrix::{
    check_irreducible, check_off_diagonal_sign, kernel_pair, perron_pair, PerronMode,
};
use foldfinder::problems::{
    build_bratu_fd, build_convex_concave_fd, build_linear, build_power_flow, default_vars,
    parse_expr, Nonlinearity,
};
use foldfinder::solver::{sample_points, smoothed_value};
use foldfinder::{
    lambda_of, ratio_profile, solve_maxmin, Config, DomainSpec, FnModel, Matrix, ParametricSystem,
    System,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn builtins() -> Vec<System> {
    vec![
        build_linear(Matrix::from_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 0.5],
        ]))
        .unwrap(),
        build_power_flow(1.0, 1.0).unwrap(),
        build_convex_concave_fd(6, 1.0, 0.5, Nonlinearity::Power(2.0)).unwrap(),
        build_convex_concave_fd(4, 2.0, 0.3, Nonlinearity::parse("u^3 + u").unwrap()).unwrap(),
        build_bratu_fd(7, 1.0).unwrap(),
    ]
}

/// Nonnegative matrix with a full cycle, hence irreducible.
fn irreducible_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(
                prop::collection::vec(prop_oneof![Just(0.0), 0.0..2.0], n),
                n,
            ),
            prop::collection::vec(0.1..1.0f64, n),
        )
            .prop_map(move |(mut a, cycle)| {
                for i in 0..n {
                    a[i][(i + 1) % n] += cycle[i];
                }
                a
            })
    })
}

fn dense_perron(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    DMatrix::from_fn(n, n, |i, j| a[i][j])
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() < 1e-9)
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    for (k, s) in builtins().iter().enumerate() {
        for x in sample_points(s.sampling_box().unwrap(), 100, k as u64) {
            for (an, fd) in [(s.jac_g(&x), s.fd_jac_g(&x)), (s.jac_h(&x), s.fd_jac_h(&x))] {
                let scale = fd.norm_inf().max(1.0);
                let err = an.add_scaled(-1.0, &fd).norm_inf() / scale;
                assert!(err <= 1e-5, "{}: {err}", s.name());
            }
        }
    }
}

#[test]
fn dense_perron_pair_matches_eigensolver() {
    let a = vec![
        vec![0.2, 0.5, 0.0, 0.1, 0.0, 0.3],
        vec![0.0, 0.1, 0.7, 0.0, 0.2, 0.0],
        vec![0.4, 0.0, 0.3, 0.6, 0.0, 0.0],
        vec![0.0, 0.2, 0.0, 0.0, 0.9, 0.1],
        vec![0.3, 0.0, 0.0, 0.0, 0.1, 0.8],
        vec![0.6, 0.1, 0.2, 0.0, 0.0, 0.05],
    ];
    let c = perron_pair(&Matrix::from_rows(&a), PerronMode::DominantStructure).unwrap();
    assert!((c.eigenvalue - dense_perron(&a)).abs() < 1e-8);
    let m = Matrix::from_rows(&a);
    let av = m.mul_vec(&c.right_vec);
    let res = av
        .iter()
        .zip(&c.right_vec)
        .map(|(x, v)| (x - c.eigenvalue * v).abs())
        .fold(0.0, f64::max);
    assert!(res <= 1e-8 * m.norm_inf());
    assert!(c.min_component > 0.0);
}

#[test]
fn kernel_dimension_of_near_identity() {
    for n in 1..6 {
        let mut d = vec![1.0; n];
        assert_eq!(kernel_pair(&Matrix::diag(&d), None).kernel_dim_estimate, 0);
        d[n - 1] = 0.0;
        assert_eq!(kernel_pair(&Matrix::diag(&d), None).kernel_dim_estimate, 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn common_factor_cancels(c in 1e-3..1e3f64, which in 0usize..5, seed in 0u64..1000) {
        let s = &builtins()[which];
        let base = s.clone();
        let base_h = s.clone();
        let scaled = ParametricSystem::new(
            "scaled",
            FnModel::new(
                s.dim(),
                move |x: &[f64], o: &mut [f64]| o.iter_mut().zip(base.g(x)).for_each(|(a, b)| *a = c * b),
                move |x: &[f64], o: &mut [f64]| o.iter_mut().zip(base_h.h(x)).for_each(|(a, b)| *a = c * b),
            ),
            s.domain().clone(),
        )
        .unwrap();
        let x = sample_points(s.sampling_box().unwrap(), 1, seed).remove(0);
        let p = ratio_profile(s, &x).unwrap();
        let q = ratio_profile(&scaled, &x).unwrap();
        prop_assert!((p.lambda_of_x - q.lambda_of_x).abs() <= 1e-12 * (1.0 + p.lambda_of_x.abs()));
        prop_assert_eq!(p.active, q.active);
    }

    #[test]
    fn profile_invariants(which in 0usize..5, seed in 0u64..1000) {
        let s = &builtins()[which];
        let x = sample_points(s.sampling_box().unwrap(), 1, seed).remove(0);
        let p = ratio_profile(s, &x).unwrap();
        let min = p.defined_ratios().map(|(_, v)| v).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(p.lambda_of_x, min);
        prop_assert_eq!(lambda_of(s, &x), Some(min));
        for &i in &p.active {
            prop_assert!(p.ratios[i].value().unwrap() <= p.lambda_of_x + 1e-8 * (1.0 + p.lambda_of_x.abs()));
        }
        if p.full_active {
            let hmax = p.h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let bound = s.dim() as f64 * 1e-8 * (1.0 + p.lambda_of_x.abs()) * hmax;
            prop_assert!(p.solution_residual() <= bound);
        }
    }

    #[test]
    fn perron_vector_is_a_full_active_solution(a in irreducible_matrix()) {
        let m = Matrix::from_rows(&a);
        let c = perron_pair(&m, PerronMode::DominantStructure).unwrap();
        let s = build_linear(m.clone()).unwrap();
        let p = ratio_profile(&s, &c.right_vec).unwrap();
        prop_assert!(p.full_active);
        prop_assert!(p.solution_residual() <= 1e-9 * (1.0 + c.eigenvalue));
        // a generic positive point is not a solution
        let mut x = c.right_vec.clone();
        x[0] *= 1.5;
        let q = ratio_profile(&s, &x).unwrap();
        prop_assert!(!q.full_active);
        prop_assert!(q.solution_residual() > 0.0);
    }

    #[test]
    fn shift_moves_only_the_eigenvalue(a in irreducible_matrix(), c in -5.0..5.0f64) {
        let m = Matrix::from_rows(&a);
        let n = m.rows();
        let base = perron_pair(&m, PerronMode::DominantStructure).unwrap();
        let shifted = perron_pair(&m.add_scaled(c, &Matrix::identity(n)), PerronMode::DominantStructure).unwrap();
        prop_assert!((shifted.eigenvalue - base.eigenvalue - c).abs() <= 1e-9 * (1.0 + base.eigenvalue.abs()));
        for (u, v) in base.right_vec.iter().zip(&shifted.right_vec) {
            prop_assert!((u - v).abs() <= 1e-8);
        }
        prop_assert!((base.eigenvalue - dense_perron(&a)).abs() <= 1e-8 * (1.0 + base.eigenvalue));
        prop_assert!(base.min_component > 0.0);
    }

    #[test]
    fn sign_and_connectivity_reports(entries in prop::collection::vec(-1.0..1.0f64, 16), mask in prop::collection::vec(any::<bool>(), 16)) {
        let a = Matrix::from_fn(4, 4, |i, j| if mask[4 * i + j] { entries[4 * i + j] } else { 0.0 });
        let sign = check_off_diagonal_sign(&a, 1e-10);
        if !sign.sign_constant {
            prop_assert!(sign.violating_entries.iter().any(|e| e.2 > 0.0));
            prop_assert!(sign.violating_entries.iter().any(|e| e.2 < 0.0));
        }
        let irr = check_irreducible(&a, 1e-10);
        prop_assert_eq!(irr.irreducible, irr.scc_count == 1);
    }

    #[test]
    fn smoothing_brackets_the_minimum(r in prop::collection::vec(-50.0..50.0f64, 1..12), log_mu in -8.0..1.0f64) {
        let mu = 10f64.powf(log_mu);
        let (lmu, l) = smoothed_value(&r, mu);
        prop_assert!(lmu <= l);
        prop_assert!(l <= lmu + mu * (r.len() as f64).ln());
    }

    #[test]
    fn min_norm_weights_are_optimal(v in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 3), 1..6)) {
        let mnp = min_norm_point(&v, 1e-10, 10_000);
        let sum: f64 = mnp.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(mnp.weights.iter().all(|&w| w >= 0.0));
        // no vertex direction improves the objective to first order
        let z = &mnp.point;
        let zz: f64 = z.iter().map(|a| a * a).sum();
        for vj in &v {
            let g: f64 = vj.iter().zip(z).map(|(a, b)| a * b).sum();
            prop_assert!(g - zz >= -1e-10 * (1.0 + zz.sqrt()));
        }
    }

    #[test]
    fn domain_membership_is_consistent(x in -2.0..2.0f64, y in -2.0..2.0f64, margin in 0.0..0.5f64) {
        let d = DomainSpec::open_uniform(2, -1.0, 1.0).with_margin(margin);
        let inside = x.abs() < 1.0 && y.abs() < 1.0;
        prop_assert_eq!(d.contains(&[x, y]), inside);
        if inside && 1.0 - x.abs() > margin && 1.0 - y.abs() > margin {
            prop_assert!(!d.near_boundary(&[x, y]));
        }
    }

    #[test]
    fn expression_display_round_trips(a in 0.1..3.0f64, b in 0.1..3.0f64, pick in 0usize..6) {
        let vars = default_vars(2);
        let srcs = [
            format!("x1^{a:.3} - {b:.3}*x2"),
            "−x1^2 + sin(x2)/(1 + x1)".to_string(),
            format!("exp(-{a:.2}*x1) * log(x2 + {b:.2})"),
            "pow(x1, x2) - 2^-x1^2".to_string(),
            format!("cos(x1 - x2)^3 / ({b:.2} + x2^2)"),
            format!("-(x1 - {a:.1}) * -(x2)"),
        ];
        let e = parse_expr(&srcs[pick], &vars, "g").unwrap();
        let shown = e.display(&vars).to_string();
        let back = parse_expr(&shown, &vars, "g").unwrap();
        prop_assert_eq!(&back, &e);
        let x = [a, b];
        let (u, v): (f64, f64) = (e.eval(&x), back.eval(&x));
        prop_assert!(u == v || (u.is_nan() && v.is_nan()));
    }
}

#[test]
fn slp_accepted_values_increase() {
    let s = build_bratu_fd(4, 1.0).unwrap();
    let r = solve_maxmin(&s, &Config::default().with_starts(1, 3)).unwrap();
    let accepted: Vec<f64> = r
        .trace
        .iter()
        .filter(|t| t.accepted)
        .map(|t| t.lambda)
        .collect();
    assert!(accepted.len() > 1);
    assert!(accepted.windows(2).all(|w| w[1] > w[0]));
}
