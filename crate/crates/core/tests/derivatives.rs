use approx::assert_abs_diff_eq;
use optcert::certify::{derivative_vector, Tolerances};
use optcert::expr::{parse, EvalError};
use optcert::hadamard::{
    hadamard_diff_check, lower_hadamard, sample_unit_directions, tangent_cone_member,
};
use optcert::{load_problem, ExtReal, SamplingSchedule};
use proptest::prelude::*;

fn everywhere(_: &[f64]) -> Result<bool, EvalError> {
    Ok(true)
}

fn estimate(text: &str, dim: usize, x: &[f64], u: &[f64]) -> ExtReal {
    let e = parse(text, dim).unwrap();
    lower_hadamard(
        |y: &[f64]| e.eval(y),
        everywhere,
        x,
        u,
        &SamplingSchedule::default(),
    )
    .unwrap()
    .value
}

#[test]
fn smooth_functions_match_gradients() {
    // f = x1^2 x2 + sin(x2), grad at (0.5, 1) = (1, 0.25 + cos 1)
    let grad = [1.0, 0.25 + 1f64.cos()];
    for u in sample_unit_directions(16, 2, 3) {
        let want = grad[0] * u[0] + grad[1] * u[1];
        let got = estimate("x1^2*x2 + sin(x2)", 2, &[0.5, 1.0], &u);
        assert_abs_diff_eq!(got.to_f64(), want, epsilon = 5e-2);
    }
}

#[test]
fn smooth_function_is_hadamard_differentiable() {
    let e = parse("exp(x1) - x2^2", 2).unwrap();
    let check = hadamard_diff_check(
        |y: &[f64]| e.eval(y),
        everywhere,
        &[0.0, 1.0],
        &[0.6, 0.8],
        &SamplingSchedule::default(),
        1e-2,
    )
    .unwrap();
    assert!(check.differentiable);
    assert_abs_diff_eq!(check.value.to_f64(), 0.6 - 1.6, epsilon = 1e-2);
}

#[test]
fn oscillating_quotients_are_not_hadamard_differentiable() {
    let phi = |y: &[f64]| -> Result<f64, EvalError> {
        Ok(if y[0] == 0.0 {
            0.0
        } else {
            y[0] * (1.0 / y[0]).sin()
        })
    };
    let check = hadamard_diff_check(
        phi,
        everywhere,
        &[0.0],
        &[1.0],
        &SamplingSchedule::default(),
        1e-2,
    )
    .unwrap();
    assert!(!check.differentiable);
    assert!(check.spread.unwrap() > 1.0);
}

#[test]
fn kink_line_has_a_directional_limit() {
    let e = parse("abs(x1 - x2)", 2).unwrap();
    let u = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
    let check = hadamard_diff_check(
        |y: &[f64]| e.eval(y),
        everywhere,
        &[0.0, 0.0],
        &u,
        &SamplingSchedule::default(),
        1e-2,
    )
    .unwrap();
    assert!(check.differentiable);
    assert_abs_diff_eq!(check.value.to_f64(), 0.0, epsilon = 1e-2);
}

#[test]
fn baseline_condition_at_minimizers() {
    for u in sample_unit_directions(32, 2, 5) {
        assert!(estimate("abs(x1) + x2^2", 2, &[0.0, 0.0], &u) >= ExtReal::new(-5e-2).unwrap());
    }
    assert!(estimate("-abs(x1)", 1, &[0.0], &[1.0]) < ExtReal::ZERO);
}

#[test]
fn every_direction_is_tangent_to_the_whole_space() {
    let sched = SamplingSchedule::default();
    for u in sample_unit_directions(32, 3, 9) {
        assert!(tangent_cone_member(everywhere, &[0.1, -2.0, 3.0], &u, &sched).unwrap());
    }
}

#[test]
fn parabola_tangent_cone_is_the_upper_half_plane() {
    let sched = SamplingSchedule::default();
    let above = |y: &[f64]| -> Result<bool, EvalError> { Ok(y[1] - y[0] * y[0] >= -1e-4) };
    let origin = [0.0, 0.0];
    assert!(tangent_cone_member(above, &origin, &[1.0, 0.0], &sched).unwrap());
    assert!(tangent_cone_member(above, &origin, &[0.6, 0.8], &sched).unwrap());
    assert!(!tangent_cone_member(above, &origin, &[0.0, -1.0], &sched).unwrap());
    assert!(!tangent_cone_member(above, &origin, &[0.6, -0.8], &sched).unwrap());
}

#[test]
fn off_cone_direction_has_infinite_estimate() {
    let e = parse("x1", 1).unwrap();
    let nonneg = |y: &[f64]| -> Result<bool, EvalError> { Ok(y[0] >= 0.0) };
    let est = lower_hadamard(
        |y: &[f64]| e.eval(y),
        nonneg,
        &[0.0],
        &[-1.0],
        &SamplingSchedule::default(),
    )
    .unwrap();
    assert_eq!(est.value, ExtReal::PosInf);
    assert_eq!(est.admissible_samples, 0);
}

#[test]
fn penalty_component_ignores_gamma_for_smooth_equalities() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/problems/ex_pen_smooth.toml");
    let (p, cand) = load_problem(path).unwrap();
    let sched = SamplingSchedule::default();
    let tols = Tolerances::default();
    for u in sample_unit_directions(8, 2, 4) {
        let base = derivative_vector(&p, &cand, &u, 0.0, &sched, &tols)
            .unwrap()
            .vector
            .alpha0;
        for gamma in [0.5, 2.0, 10.0] {
            let other = derivative_vector(&p, &cand, &u, gamma, &sched, &tols)
                .unwrap()
                .vector
                .alpha0;
            assert_abs_diff_eq!(base.to_f64(), other.to_f64(), epsilon = 1e-2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimate_is_positively_homogeneous(c in 0.5f64..3.0, angle in 0.0f64..std::f64::consts::TAU) {
        let u = [angle.cos(), angle.sin()];
        let scaled = [c * u[0], c * u[1]];
        let f = "abs(x1) + max(x2, 0) - 0.5*abs(x2)";
        let a = estimate(f, 2, &[0.0, 0.0], &u).to_f64();
        let b = estimate(f, 2, &[0.0, 0.0], &scaled).to_f64();
        prop_assert!((b - c * a).abs() <= 5e-2 * c);
    }

    #[test]
    fn estimate_is_monotone_in_the_function(angle in 0.0f64..std::f64::consts::TAU) {
        // abs(x1) + abs(x2) >= max(abs(x1), abs(x2)) with equality at the origin
        let u = [angle.cos(), angle.sin()];
        let big = estimate("abs(x1) + abs(x2)", 2, &[0.0, 0.0], &u).to_f64();
        let small = estimate("max(abs(x1), abs(x2))", 2, &[0.0, 0.0], &u).to_f64();
        prop_assert!(big >= small - 5e-2);
    }
}
