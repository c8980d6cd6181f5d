//! The numerics run unchanged in single precision.

use foldfinder::problems::{build_bratu_fd, build_linear, build_power_flow};
use foldfinder::{certify_saddle_node, lambda_of, solve_maxmin, Matrix, SolveConfig, Verdict};

#[test]
fn single_node_bratu_in_f32() {
    let s = build_bratu_fd::<f32>(1, 1.0).unwrap();
    let r = solve_maxmin(&s, &SolveConfig::<f32>::default()).unwrap();
    let peak = 8.0 / std::f32::consts::E;
    assert!((r.lambda_star - peak).abs() < 1e-5 * peak);
    assert!((r.x_star[0] - 1.0).abs() < 1e-2);
    let c = certify_saddle_node(&s, &r.x_star, r.lambda_star).unwrap();
    assert_eq!(c.verdict, Verdict::CertifiedFold);
}

#[test]
fn linear_perron_root_in_f32() {
    let s = build_linear(Matrix::<f32>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]])).unwrap();
    let r = solve_maxmin(&s, &SolveConfig::default()).unwrap();
    assert!((r.lambda_star - 3.0).abs() < 1e-4);
}

#[test]
fn precisions_agree_on_power_flow() {
    let x = [-0.3, 0.7];
    let a = lambda_of(&build_power_flow::<f64>(1.0, 1.0).unwrap(), &x).unwrap();
    let b = lambda_of(
        &build_power_flow::<f32>(1.0, 1.0).unwrap(),
        &x.map(|v| v as f32),
    )
    .unwrap();
    assert!((a - b as f64).abs() < 1e-6);
}
