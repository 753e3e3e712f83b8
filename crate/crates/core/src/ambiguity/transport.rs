use super::GroundNorm;
use crate::{Error, Matrix, Result, Vector};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row/column potentials, `O(n^3)`). Returns `(col_of_row, total_cost)`.
pub fn assignment(cost: &Matrix) -> Result<(Vec<usize>, f64)> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(Error::invalid(format!(
            "assignment needs a square cost matrix, got {:?}",
            cost.shape()
        )));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("assignment costs must be finite"));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    // 1-based arrays; index 0 is the virtual column used to grow the tree
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    let total = col_of.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
    Ok((col_of, total))
}

/// Exact type-1 Wasserstein distance between two uniform sample sets of
/// equal size.
pub fn w1_distance(a: &[Vector], b: &[Vector], norm: GroundNorm) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "sample sets differ in size: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("sample sets are empty"));
    }
    let n = a.len();
    let cost = Matrix::from_fn(n, n, |i, j| norm.norm(&(&a[i] - &b[j])));
    let (_, total) = assignment(&cost)?;
    Ok(total / n as f64)
}
