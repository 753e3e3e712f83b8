mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::scalar;
use wdro_mpc::model::{
    finite_difference_jacobians, hessian_mu, BoxSet, ContinuousModel, DiscreteModel, Dynamics,
    JacobianMethod, LinearContinuous, MassSpring,
};
use wdro_mpc::{Matrix, Vector};

fn mass_spring() -> DiscreteModel<MassSpring> {
    DiscreteModel::new(MassSpring::default(), 0.1).unwrap()
}

/// Textbook RK4 written against the raw equations.
fn reference_rk4(x: [f64; 2], u: f64, h: f64) -> [f64; 2] {
    let (m, k1, k2) = (2.0, 3.0, 2.0);
    let f = |s: [f64; 2]| [s[1], -(k2 / m) * s[0].powi(5) - (k1 / m) * s[1] + u / m];
    let add = |s: [f64; 2], d: [f64; 2], c: f64| [s[0] + c * d[0], s[1] + c * d[1]];
    let a = f(x);
    let b = f(add(x, a, h / 2.0));
    let c = f(add(x, b, h / 2.0));
    let d = f(add(x, c, h));
    [
        x[0] + h / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]),
        x[1] + h / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]),
    ]
}

#[test]
fn mass_spring_step_from_case_study_start() {
    let next = mass_spring()
        .step(&Vector::from_vec(vec![-2.0, 0.0]), &Vector::zeros(1))
        .unwrap();
    let expect = reference_rk4([-2.0, 0.0], 0.0, 0.1);
    assert!((next[0] - expect[0]).abs() < 1e-14);
    assert!((next[1] - expect[1]).abs() < 1e-14);
    // the quintic spring pushes the mass towards the origin
    assert!(next[1] > 0.0);
}

#[test]
fn mass_spring_step_random_points() {
    let model = mass_spring();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let x = [rng.random_range(-2.5..0.5), rng.random_range(-1.0..1.0)];
        let u = rng.random_range(-10.0..10.0);
        let got = model
            .step(&Vector::from_vec(x.to_vec()), &Vector::from_element(1, u))
            .unwrap();
        let want = reference_rk4(x, u, 0.1);
        assert!((got[0] - want[0]).abs() < 1e-13 && (got[1] - want[1]).abs() < 1e-13);
    }
}

fn exp_series(a: &Matrix, terms: usize) -> Matrix {
    let mut sum = Matrix::identity(a.nrows(), a.ncols());
    let mut term = sum.clone();
    for k in 1..terms {
        term = &term * a / k as f64;
        sum += &term;
    }
    sum
}

fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn rk4_matches_exponential_to_fifth_order(
        entries in prop::array::uniform4(-1.0f64..1.0),
        shift in 0.1f64..1.5,
        x in prop::array::uniform2(-3.0f64..3.0),
        h in 0.01f64..0.3,
    ) {
        let a = Matrix::from_row_slice(2, 2, &entries) - Matrix::identity(2, 2) * shift;
        let model = DiscreteModel::new(
            LinearContinuous { a: a.clone(), b: Matrix::zeros(2, 1) },
            h,
        ).unwrap();
        let x = Vector::from_vec(x.to_vec());
        let got = model.step(&x, &Vector::zeros(1)).unwrap();
        let want = exp_series(&(&a * h), 40) * &x;
        // the omitted tail sum_{k >= 5} (Ah)^k / k!
        let r = inf_norm(&a) * h;
        let tail = r.exp() - (1.0 + r + r * r / 2.0 + r.powi(3) / 6.0 + r.powi(4) / 24.0);
        prop_assert!((got - want).amax() <= tail * x.amax() + 1e-14);
    }

    #[test]
    fn rk4_of_zero_field_is_identity(
        x in prop::array::uniform3(-1e3f64..1e3),
        u in -5.0f64..5.0,
        h in 1e-6f64..10.0,
    ) {
        let model = DiscreteModel::new(
            LinearContinuous { a: Matrix::zeros(3, 3), b: Matrix::zeros(3, 1) },
            h,
        ).unwrap();
        let x = Vector::from_vec(x.to_vec());
        prop_assert_eq!(model.step(&x, &Vector::from_element(1, u)).unwrap(), x);
    }
}

#[test]
fn origin_jacobians_match_discretized_linearization() {
    let ms = MassSpring::default();
    let (ac, bc) = ms
        .rhs_jacobians(&Vector::zeros(2), &Vector::zeros(1))
        .unwrap();
    let lin = DiscreteModel::new(LinearContinuous { a: ac, b: bc }, 0.1).unwrap();
    let zero_u = Vector::zeros(1);
    let mut a_ref = Matrix::zeros(2, 2);
    for j in 0..2 {
        let e = Vector::from_fn(2, |i, _| if i == j { 1.0 } else { 0.0 });
        a_ref.set_column(j, &lin.step(&e, &zero_u).unwrap());
    }
    let b_ref = lin
        .step(&Vector::zeros(2), &Vector::from_element(1, 1.0))
        .unwrap();

    let (a, b) = mass_spring().jacobians(&Vector::zeros(2), &zero_u).unwrap();
    assert!((a - a_ref).amax() < 1e-14);
    assert!((b.column(0) - b_ref).amax() < 1e-14);
}

#[test]
fn finite_difference_and_analytic_jacobians_agree() {
    let analytic = mass_spring();
    let fd = mass_spring().with_jacobian_method(JacobianMethod::FiniteDifference);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let z = Vector::from_vec(vec![
            rng.random_range(-2.5..0.5),
            rng.random_range(-1.0..1.0),
        ]);
        let v = Vector::from_element(1, rng.random_range(-10.0..10.0));
        let (a, b) = analytic.jacobians(&z, &v).unwrap();
        let (a_fd, b_fd) = fd.jacobians(&z, &v).unwrap();
        let (a_gen, b_gen) = finite_difference_jacobians(&analytic, &z, &v).unwrap();
        let scale = a.amax().max(b.amax()).max(1.0);
        assert!((&a - a_fd).amax() <= 1e-6 * scale);
        assert!((&b - b_fd).amax() <= 1e-6 * scale);
        assert!((a - a_gen).amax() <= 1e-6 * scale);
        assert!((b - b_gen).amax() <= 1e-6 * scale);
    }
}

fn case_boxes() -> (BoxSet, BoxSet) {
    (
        BoxSet::from_slices(&[-2.5, -1.0], &[0.5, 1.0]).unwrap(),
        BoxSet::from_slices(&[-10.0], &[10.0]).unwrap(),
    )
}

#[test]
fn curvature_bound_is_stable_under_grid_refinement() {
    let model = mass_spring();
    let (xb, ub) = case_boxes();
    let coarse = hessian_mu(&model, &xb, &ub, 9, 1.1).unwrap();
    let fine = hessian_mu(&model, &xb, &ub, 17, 1.1).unwrap();
    for n in 0..2 {
        assert!(coarse[n] > 0.0);
        assert!(
            (fine[n] - coarse[n]).abs() < 0.02 * fine[n],
            "output {n}: {} vs {}",
            coarse[n],
            fine[n]
        );
    }
    // the quintic term dominates the velocity output
    assert!(fine[1] > fine[0]);
}

#[test]
fn curvature_bound_grows_with_the_box() {
    let model = mass_spring();
    // same grid spacing, so the small grid is a subset of the large one
    let small_x = BoxSet::from_slices(&[-1.5, -1.0], &[0.5, 1.0]).unwrap();
    let small_u = BoxSet::from_slices(&[-10.0], &[10.0]).unwrap();
    let big_x = BoxSet::from_slices(&[-2.5, -1.5], &[0.5, 1.5]).unwrap();
    let big_u = BoxSet::from_slices(&[-15.0], &[15.0]).unwrap();
    let small = hessian_mu(&model, &small_x, &small_u, 5, 1.1).unwrap();
    let big = hessian_mu(&model, &big_x, &big_u, 7, 1.1).unwrap();
    assert!(small.iter().zip(big.iter()).all(|(s, b)| s <= b));
}

#[test]
fn invalid_models_and_boxes() {
    assert!(DiscreteModel::new(MassSpring::default(), 0.0).is_err());
    assert!(BoxSet::from_slices(&[1.0], &[0.0]).is_err());
    let (xb, _) = case_boxes();
    assert!(hessian_mu(
        &mass_spring(),
        &xb,
        &BoxSet::from_slices(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
        3,
        1.1
    )
    .is_err());
    let lin = DiscreteModel::new(
        LinearContinuous {
            a: scalar(-1.0),
            b: scalar(1.0),
        },
        0.1,
    )
    .unwrap();
    assert!(lin.step(&Vector::zeros(2), &Vector::zeros(1)).is_err());
}
