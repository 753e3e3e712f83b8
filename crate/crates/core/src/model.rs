//! Nonlinear models, RK4 discretization, Jacobians and curvature bounds.

use crate::{Error, Matrix, Result, Vector};

/// Continuous-time vector field `xdot = rhs(x, u)`.
pub trait ContinuousModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn rhs(&self, x: &Vector, u: &Vector) -> Vector;

    /// Analytic `(d rhs/dx, d rhs/du)`, if the model provides them.
    fn rhs_jacobians(&self, _x: &Vector, _u: &Vector) -> Option<(Matrix, Matrix)> {
        None
    }
}

/// Discrete-time map `x+ = f_d(x, u)`.
///
/// Everything downstream of the model (linearization, OCP, simulation) works
/// against this trait so linear test systems and RK4-discretized nonlinear
/// models are interchangeable.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn step(&self, x: &Vector, u: &Vector) -> Result<Vector>;
    /// `(A, B) = (d f_d/dx, d f_d/du)` evaluated at `(z, v)`.
    fn jacobians(&self, z: &Vector, v: &Vector) -> Result<(Matrix, Matrix)>;
}

/// Nonlinear mass with a quintic spring and linear damping:
/// `x1' = x2`, `x2' = -(k2/m) x1^5 - (k1/m) x2 + u/m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSpring {
    pub mass: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for MassSpring {
    fn default() -> Self {
        MassSpring {
            mass: 2.0,
            k1: 3.0,
            k2: 2.0,
        }
    }
}

impl ContinuousModel for MassSpring {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn rhs(&self, x: &Vector, u: &Vector) -> Vector {
        let (p, vel) = (x[0], x[1]);
        Vector::from_vec(vec![
            vel,
            -(self.k2 / self.mass) * p.powi(5) - (self.k1 / self.mass) * vel + u[0] / self.mass,
        ])
    }

    fn rhs_jacobians(&self, x: &Vector, _u: &Vector) -> Option<(Matrix, Matrix)> {
        let a = Matrix::from_row_slice(
            2,
            2,
            &[
                0.0,
                1.0,
                -5.0 * (self.k2 / self.mass) * x[0].powi(4),
                -self.k1 / self.mass,
            ],
        );
        let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0 / self.mass]);
        Some((a, b))
    }
}

/// Continuous linear system `xdot = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearContinuous {
    pub a: Matrix,
    pub b: Matrix,
}

impl ContinuousModel for LinearContinuous {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    fn rhs(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }

    fn rhs_jacobians(&self, _x: &Vector, _u: &Vector) -> Option<(Matrix, Matrix)> {
        Some((self.a.clone(), self.b.clone()))
    }
}

/// How [`DiscreteModel`] produces its Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianMethod {
    /// Differentiate through the four RK4 stages using the model's analytic
    /// Jacobians; falls back to finite differences when none are provided.
    #[default]
    Analytic,
    FiniteDifference,
}

/// A continuous model discretized by one classical RK4 step of length `h`
/// with zero-order-hold input.
#[derive(Debug, Clone)]
pub struct DiscreteModel<M> {
    pub base: M,
    pub h: f64,
    pub jacobian_method: JacobianMethod,
}

impl<M: ContinuousModel> DiscreteModel<M> {
    pub fn new(base: M, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!(
                "sampling period must be positive, got {h}"
            )));
        }
        Ok(DiscreteModel {
            base,
            h,
            jacobian_method: JacobianMethod::Analytic,
        })
    }

    pub fn with_jacobian_method(mut self, method: JacobianMethod) -> Self {
        self.jacobian_method = method;
        self
    }

    pub fn rk4_step(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        check_dims(self.base.state_dim(), self.base.input_dim(), x, u)?;
        let h = self.h;
        let f = &self.base;
        let k1 = f.rhs(x, u);
        let k2 = f.rhs(&(x + &k1 * (0.5 * h)), u);
        let k3 = f.rhs(&(x + &k2 * (0.5 * h)), u);
        let k4 = f.rhs(&(x + &k3 * h), u);
        let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if next.iter().all(|v| v.is_finite()) {
            Ok(next)
        } else {
            Err(Error::numerical("RK4 step produced a non-finite state"))
        }
    }

    /// Jacobians of the RK4 map obtained by the chain rule through the stages.
    fn rk4_jacobians(&self, x: &Vector, u: &Vector) -> Option<(Matrix, Matrix)> {
        let f = &self.base;
        let (nx, nu) = (f.state_dim(), f.input_dim());
        let h = self.h;
        let eye = Matrix::identity(nx, nx);

        let k1 = f.rhs(x, u);
        let (a1, b1) = f.rhs_jacobians(x, u)?;
        let x2 = x + &k1 * (0.5 * h);
        let k2 = f.rhs(&x2, u);
        let (a2, b2) = f.rhs_jacobians(&x2, u)?;
        let x3 = x + &k2 * (0.5 * h);
        let k3 = f.rhs(&x3, u);
        let (a3, b3) = f.rhs_jacobians(&x3, u)?;
        let x4 = x + &k3 * h;
        let (a4, b4) = f.rhs_jacobians(&x4, u)?;

        let dk1x = a1;
        let dk1u = b1;
        let dk2x = &a2 * (&eye + &dk1x * (0.5 * h));
        let dk2u = &a2 * &dk1u * (0.5 * h) + b2;
        let dk3x = &a3 * (&eye + &dk2x * (0.5 * h));
        let dk3u = &a3 * &dk2u * (0.5 * h) + b3;
        let dk4x = &a4 * (&eye + &dk3x * h);
        let dk4u = &a4 * &dk3u * h + b4;

        let ax = &eye + (dk1x + dk2x * 2.0 + dk3x * 2.0 + dk4x) * (h / 6.0);
        let bu = (dk1u + dk2u * 2.0 + dk3u * 2.0 + dk4u) * (h / 6.0);
        debug_assert_eq!(bu.shape(), (nx, nu));
        Some((ax, bu))
    }
}

impl<M: ContinuousModel> Dynamics for DiscreteModel<M> {
    fn state_dim(&self) -> usize {
        self.base.state_dim()
    }

    fn input_dim(&self) -> usize {
        self.base.input_dim()
    }

    fn step(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        self.rk4_step(x, u)
    }

    fn jacobians(&self, z: &Vector, v: &Vector) -> Result<(Matrix, Matrix)> {
        check_dims(self.state_dim(), self.input_dim(), z, v)?;
        check_finite(z, v)?;
        if self.jacobian_method == JacobianMethod::Analytic {
            if let Some(jac) = self.rk4_jacobians(z, v) {
                return Ok(jac);
            }
        }
        finite_difference_jacobians(self, z, v)
    }
}

/// Discrete linear system `x+ = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDiscrete {
    pub a: Matrix,
    pub b: Matrix,
}

impl LinearDiscrete {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if !a.is_square() || b.nrows() != a.nrows() {
            return Err(Error::invalid(format!(
                "linear model needs square A and matching B, got A {:?}, B {:?}",
                a.shape(),
                b.shape()
            )));
        }
        Ok(LinearDiscrete { a, b })
    }
}

impl Dynamics for LinearDiscrete {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    fn step(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        check_dims(self.state_dim(), self.input_dim(), x, u)?;
        let next = &self.a * x + &self.b * u;
        if next.iter().all(|v| v.is_finite()) {
            Ok(next)
        } else {
            Err(Error::numerical("linear step produced a non-finite state"))
        }
    }

    fn jacobians(&self, z: &Vector, v: &Vector) -> Result<(Matrix, Matrix)> {
        check_dims(self.state_dim(), self.input_dim(), z, v)?;
        Ok((self.a.clone(), self.b.clone()))
    }
}

fn check_dims(nx: usize, nu: usize, x: &Vector, u: &Vector) -> Result<()> {
    if x.len() != nx || u.len() != nu {
        return Err(Error::invalid(format!(
            "expected state/input of dimension {nx}/{nu}, got {}/{}",
            x.len(),
            u.len()
        )));
    }
    Ok(())
}

fn check_finite(x: &Vector, u: &Vector) -> Result<()> {
    if x.iter().chain(u.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numerical("non-finite linearization point"))
    }
}

/// Central-difference step for a coordinate of magnitude `value`.
pub(crate) fn fd_step(value: f64) -> f64 {
    1e-5 * (1.0 + value.abs())
}

/// Central finite-difference Jacobians of any discrete map.
pub fn finite_difference_jacobians(
    model: &dyn Dynamics,
    z: &Vector,
    v: &Vector,
) -> Result<(Matrix, Matrix)> {
    let (nx, nu) = (model.state_dim(), model.input_dim());
    check_dims(nx, nu, z, v)?;
    check_finite(z, v)?;
    let mut a = Matrix::zeros(nx, nx);
    let mut b = Matrix::zeros(nx, nu);
    for j in 0..nx {
        let (plus, minus, width) = perturbed(z, j)?;
        let col = (model.step(&plus, v)? - model.step(&minus, v)?) / width;
        a.set_column(j, &col);
    }
    for j in 0..nu {
        let (plus, minus, width) = perturbed(v, j)?;
        let col = (model.step(z, &plus)? - model.step(z, &minus)?) / width;
        b.set_column(j, &col);
    }
    Ok((a, b))
}

fn perturbed(x: &Vector, j: usize) -> Result<(Vector, Vector, f64)> {
    let delta = fd_step(x[j]);
    let mut plus = x.clone();
    let mut minus = x.clone();
    plus[j] += delta;
    minus[j] -= delta;
    let width = plus[j] - minus[j];
    if width <= 0.0 || !width.is_finite() {
        return Err(Error::numerical(format!(
            "finite-difference step underflow at coordinate {j} (value {})",
            x[j]
        )));
    }
    Ok((plus, minus, width))
}

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: Vector,
    upper: Vector,
}

impl BoxSet {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::invalid("box bounds have different lengths"));
        }
        if lower.is_empty() {
            return Err(Error::invalid("box has no dimensions"));
        }
        for (i, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::invalid(format!(
                    "box is empty in dimension {i}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(BoxSet { lower, upper })
    }

    pub fn from_slices(lower: &[f64], upper: &[f64]) -> Result<Self> {
        Self::new(
            Vector::from_column_slice(lower),
            Vector::from_column_slice(upper),
        )
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// Evenly spaced grid values along dimension `d` (`points >= 2`).
    fn axis(&self, d: usize, points: usize) -> Vec<f64> {
        let (lo, hi) = (self.lower[d], self.upper[d]);
        (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect()
    }
}

/// Default inflation applied to the sampled curvature maxima.
pub const DEFAULT_MU_SAFETY: f64 = 1.1;

/// Curvature constants `mu_n` bounding the second-order remainder of each
/// output of `f_d` over `x_box x u_box`.
///
/// For output `n`, `mu_n = safety * 1/2 * max |h' H_n h|`, the max taken over
/// the grid points and over `||h||_inf <= 1`. `H_n` is the central-difference
/// Hessian of `f_d,n` in `(x, u)`, built from the model's Jacobians.
pub fn hessian_mu(
    model: &dyn Dynamics,
    x_box: &BoxSet,
    u_box: &BoxSet,
    grid: usize,
    safety: f64,
) -> Result<Vector> {
    let (nx, nu) = (model.state_dim(), model.input_dim());
    if x_box.dim() != nx || u_box.dim() != nu {
        return Err(Error::invalid(
            "curvature boxes do not match model dimensions",
        ));
    }
    if grid < 2 {
        return Err(Error::invalid(
            "curvature grid needs at least 2 points per dimension",
        ));
    }
    let dim = nx + nu;
    if dim > 12 {
        return Err(Error::invalid(
            "curvature bound limited to 12 joint dimensions",
        ));
    }
    let axes: Vec<Vec<f64>> = (0..nx)
        .map(|d| x_box.axis(d, grid))
        .chain((0..nu).map(|d| u_box.axis(d, grid)))
        .collect();

    let mut mu = Vector::zeros(nx);
    let mut index = vec![0usize; dim];
    loop {
        let point: Vec<f64> = index.iter().enumerate().map(|(d, &k)| axes[d][k]).collect();
        let x = Vector::from_column_slice(&point[..nx]);
        let u = Vector::from_column_slice(&point[nx..]);
        for (n, hess) in output_hessians(model, &x, &u)?.iter().enumerate() {
            mu[n] = mu[n].max(0.5 * cube_form_max(hess));
        }
        // odometer increment over the grid
        let mut d = 0;
        loop {
            if d == dim {
                return Ok(mu * safety);
            }
            index[d] += 1;
            if index[d] < grid {
                break;
            }
            index[d] = 0;
            d += 1;
        }
    }
}

/// `max |h'Hh|` over `||h||_inf <= 1` for symmetric `H`.
///
/// Every maximizer of a quadratic over the cube is a stationary point of its
/// restriction to some face, so the faces are enumerated (`3^d` of them):
/// coordinates are pinned to `-1`/`+1` or left free, and the free block is
/// solved from `H_FF h_F = -H_FS h_S`. Faces with a singular free block are
/// skipped; their stationary values are also attained on a smaller face.
pub fn cube_form_max(hess: &Matrix) -> f64 {
    let d = hess.nrows();
    let mut best: f64 = 0.0;
    let mut code = vec![0u8; d];
    loop {
        let free: Vec<usize> = (0..d).filter(|&i| code[i] == 0).collect();
        let mut h = Vector::from_fn(d, |i, _| match code[i] {
            1 => -1.0,
            2 => 1.0,
            _ => 0.0,
        });
        let mut inside = true;
        if !free.is_empty() {
            let k = free.len();
            let hff = Matrix::from_fn(k, k, |a, b| hess[(free[a], free[b])]);
            let rhs = Vector::from_fn(k, |a, _| -(hess.row(free[a]) * &h)[0]);
            match hff.lu().solve(&rhs) {
                Some(sol) if sol.iter().all(|v| v.is_finite()) => {
                    for (a, &i) in free.iter().enumerate() {
                        inside &= sol[a].abs() <= 1.0 + 1e-12;
                        h[i] = sol[a].clamp(-1.0, 1.0);
                    }
                }
                _ => inside = false,
            }
        }
        if inside {
            best = best.max(h.dot(&(hess * &h)).abs());
        }
        let mut i = 0;
        loop {
            if i == d {
                return best;
            }
            code[i] += 1;
            if code[i] < 3 {
                break;
            }
            code[i] = 0;
            i += 1;
        }
    }
}

/// Hessians of every output of `f_d` with respect to `(x, u)` at one point,
/// by central differences of the Jacobian `[A B]`.
pub fn output_hessians(model: &dyn Dynamics, x: &Vector, u: &Vector) -> Result<Vec<Matrix>> {
    let (nx, nu) = (model.state_dim(), model.input_dim());
    let dim = nx + nu;
    let joint = |a: Matrix, b: Matrix| {
        let mut j = Matrix::zeros(nx, dim);
        j.view_mut((0, 0), (nx, nx)).copy_from(&a);
        j.view_mut((0, nx), (nx, nu)).copy_from(&b);
        j
    };
    let mut hess = vec![Matrix::zeros(dim, dim); nx];
    for k in 0..dim {
        let (mut xp, mut xm, mut up, mut um) = (x.clone(), x.clone(), u.clone(), u.clone());
        let width = if k < nx {
            let d = fd_step(x[k]);
            xp[k] += d;
            xm[k] -= d;
            xp[k] - xm[k]
        } else {
            let d = fd_step(u[k - nx]);
            up[k - nx] += d;
            um[k - nx] -= d;
            up[k - nx] - um[k - nx]
        };
        let (ap, bp) = model.jacobians(&xp, &up)?;
        let (am, bm) = model.jacobians(&xm, &um)?;
        let diff = (joint(ap, bp) - joint(am, bm)) / width;
        for (n, h) in hess.iter_mut().enumerate() {
            for j in 0..dim {
                h[(j, k)] = diff[(n, j)];
            }
        }
    }
    for h in &mut hess {
        let sym = (&*h + h.transpose()) * 0.5;
        *h = sym;
    }
    Ok(hess)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mass_spring() -> DiscreteModel<MassSpring> {
        DiscreteModel::new(MassSpring::default(), 0.1).unwrap()
    }

    struct Zero;
    impl ContinuousModel for Zero {
        fn state_dim(&self) -> usize {
            3
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn rhs(&self, _x: &Vector, _u: &Vector) -> Vector {
            Vector::zeros(3)
        }
    }

    #[test]
    fn zero_field_is_fixed_point() {
        for h in [1e-3, 0.1, 7.0] {
            let m = DiscreteModel::new(Zero, h).unwrap();
            let x = Vector::from_vec(vec![1.5, -2.0, 1e4]);
            let u = Vector::from_vec(vec![3.0]);
            assert_eq!(m.rk4_step(&x, &u).unwrap(), x);
        }
    }

    #[test]
    fn mass_spring_step_matches_hand_rk4() {
        let m = mass_spring();
        let f = |x: [f64; 2]| [x[1], -(x[0].powi(5)) - 1.5 * x[1]];
        let x = [-2.0, 0.0];
        let h = 0.1;
        let k1 = f(x);
        let k2 = f([x[0] + h / 2.0 * k1[0], x[1] + h / 2.0 * k1[1]]);
        let k3 = f([x[0] + h / 2.0 * k2[0], x[1] + h / 2.0 * k2[1]]);
        let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]]);
        let expect: Vec<f64> = (0..2)
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let got = m
            .rk4_step(&Vector::from_vec(vec![-2.0, 0.0]), &Vector::zeros(1))
            .unwrap();
        for i in 0..2 {
            assert!((got[i] - expect[i]).abs() < 1e-14);
        }
        // spring pulls the mass toward the origin
        assert!(got[1] > 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = mass_spring();
        assert!(matches!(
            m.rk4_step(&Vector::zeros(3), &Vector::zeros(1)),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            m.rk4_step(&Vector::from_vec(vec![1e80, 0.0]), &Vector::zeros(1)),
            Err(Error::Numerical(_))
        ));
        assert!(DiscreteModel::new(MassSpring::default(), 0.0).is_err());
        assert!(BoxSet::from_slices(&[1.0], &[0.0]).is_err());
        assert!(BoxSet::from_slices(&[], &[]).is_err());
    }

    #[test]
    fn linear_model_jacobians_are_exact() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.1, -0.3, 0.9]);
        let b = Matrix::from_row_slice(2, 1, &[0.0, 0.1]);
        let m = LinearDiscrete::new(a.clone(), b.clone()).unwrap();
        let (ja, jb) = m
            .jacobians(
                &Vector::from_vec(vec![3.0, -1.0]),
                &Vector::from_vec(vec![2.0]),
            )
            .unwrap();
        assert_eq!(ja, a);
        assert_eq!(jb, b);
    }

    #[test]
    fn fd_and_analytic_jacobians_agree_on_linear_rk4() {
        let base = LinearContinuous {
            a: Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -0.5]),
            b: Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        };
        let m = DiscreteModel::new(base, 0.2).unwrap();
        let z = Vector::from_vec(vec![0.3, -0.7]);
        let v = Vector::from_vec(vec![1.1]);
        let (a1, b1) = m.jacobians(&z, &v).unwrap();
        let (a2, b2) = finite_difference_jacobians(&m, &z, &v).unwrap();
        assert!((a1 - a2).amax() < 1e-9);
        assert!((b1 - b2).amax() < 1e-9);
    }

    #[test]
    fn mu_of_linear_model_is_zero() {
        let m =
            LinearDiscrete::new(Matrix::identity(2, 2), Matrix::from_element(2, 1, 0.5)).unwrap();
        let xb = BoxSet::from_slices(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let ub = BoxSet::from_slices(&[-1.0], &[1.0]).unwrap();
        let mu = hessian_mu(&m, &xb, &ub, 3, DEFAULT_MU_SAFETY).unwrap();
        assert!(mu.amax() < 1e-12);
    }

    struct Square;
    impl Dynamics for Square {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn step(&self, x: &Vector, _u: &Vector) -> Result<Vector> {
            Ok(Vector::from_element(1, x[0] * x[0]))
        }
        fn jacobians(&self, z: &Vector, _v: &Vector) -> Result<(Matrix, Matrix)> {
            Ok((Matrix::from_element(1, 1, 2.0 * z[0]), Matrix::zeros(1, 1)))
        }
    }

    #[test]
    fn mu_of_square_is_one() {
        let xb = BoxSet::from_slices(&[-1.0], &[1.0]).unwrap();
        let ub = BoxSet::from_slices(&[0.0], &[0.0]).unwrap();
        let mu = hessian_mu(&Square, &xb, &ub, 5, 1.0).unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-8, "{}", mu[0]);
        let mu = hessian_mu(&Square, &xb, &ub, 5, DEFAULT_MU_SAFETY).unwrap();
        assert!((mu[0] - 1.1).abs() < 1e-8);
    }

    #[test]
    fn mu_rejects_degenerate_grid() {
        let xb = BoxSet::from_slices(&[-1.0], &[1.0]).unwrap();
        let ub = BoxSet::from_slices(&[0.0], &[0.0]).unwrap();
        assert!(hessian_mu(&Square, &xb, &ub, 1, 1.0).is_err());
    }

    #[test]
    fn cube_form_handles_indefinite_forms() {
        let h = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        assert!((cube_form_max(&h) - 1.0).abs() < 1e-15);
        let h = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((cube_form_max(&h) - 2.0).abs() < 1e-15);
        // concave form with interior-face maximum of -q
        let h = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -3.0]);
        assert!((cube_form_max(&h) - 3.0).abs() < 1e-15);
    }
}
