//! Soft-constrained convex QP subproblem of the SQP iteration, backed by the
//! Clarabel interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT,
};

use crate::{Error, Matrix, Result, Vector};

pub(crate) struct SoftQpSolution {
    pub step: Vector,
    pub slack: Vector,
    pub multipliers: Vector,
}

/// ```text
/// min  1/2 d'Hd + g'd + rho 1's
/// s.t. G d - s <= r,  s >= 0
/// ```
pub(crate) fn solve_soft_qp(
    h: &Matrix,
    g: &Vector,
    g_mat: &Matrix,
    r: &Vector,
    rho: f64,
    tol: f64,
) -> Result<SoftQpSolution> {
    let n = h.nrows();
    let m = g_mat.nrows();
    let nv = n + m;

    let (mut pi, mut pj, mut pv) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..n {
        for i in 0..=j {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]);
            if v != 0.0 {
                pi.push(i);
                pj.push(j);
                pv.push(v);
            }
        }
    }
    let p = CscMatrix::new_from_triplets(nv, nv, pi, pj, pv);

    let mut q = vec![0.0; nv];
    q[..n].copy_from_slice(g.as_slice());
    for v in &mut q[n..] {
        *v = rho;
    }

    let (mut ai, mut aj, mut av) = (Vec::new(), Vec::new(), Vec::new());
    for row in 0..m {
        for col in 0..n {
            let v = g_mat[(row, col)];
            if v != 0.0 {
                ai.push(row);
                aj.push(col);
                av.push(v);
            }
        }
        ai.push(row);
        aj.push(n + row);
        av.push(-1.0);
        ai.push(m + row);
        aj.push(n + row);
        av.push(-1.0);
    }
    let a = CscMatrix::new_from_triplets(2 * m, nv, ai, aj, av);
    let mut b = vec![0.0; 2 * m];
    b[..m].copy_from_slice(r.as_slice());
    let cones: [SupportedConeT<f64>; 1] = [NonnegativeConeT(2 * m)];

    let settings = DefaultSettings::<f64> {
        verbose: false,
        tol_gap_abs: tol,
        tol_gap_rel: tol,
        tol_feas: tol,
        max_iter: 200,
        ..Default::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| Error::numerical(format!("QP setup failed: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        other => {
            return Err(Error::numerical(format!(
                "QP subproblem ended with {other:?}"
            )))
        }
    }
    Ok(SoftQpSolution {
        step: Vector::from_column_slice(&sol.x[..n]),
        slack: Vector::from_column_slice(&sol.x[n..]),
        multipliers: Vector::from_column_slice(&sol.z[..m]),
    })
}
