use ndarray::{Array2, ArrayView1, ArrayView2};

use super::{Method, SelectionResult};
use crate::error::{invalid, Error, Result};
use crate::solvers::linalg::{cholesky, cholesky_solve_in_place};

/// Ridge coefficients restricted to `active`, from precomputed `XᵀX`, `Xᵀy`.
fn ridge_on(gram: &Array2<f64>, xty: &[f64], active: &[usize], lambda: f64) -> Result<Vec<f64>> {
    let k = active.len();
    let sub = Array2::from_shape_fn((k, k), |(a, b)| {
        gram[[active[a], active[b]]] + if a == b { lambda } else { 0.0 }
    });
    let l =
        cholesky(sub.view()).ok_or_else(|| Error::InvalidArgument("ridge system is not positive definite".into()))?;
    let mut rhs = Array2::from_shape_fn((k, 1), |(a, _)| xty[active[a]]);
    cholesky_solve_in_place(&l, &mut rhs);
    Ok(rhs.column(0).to_vec())
}

/// Recursive feature elimination around ridge regression, one feature per
/// round. Scores are `d - rank`: survivors rank by final |coefficient|, then
/// eliminated features in reverse elimination order.
pub fn rfe_select(x: ArrayView2<f64>, y: ArrayView1<f64>, m: usize, lambda: f64) -> Result<SelectionResult> {
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(invalid("target length does not match rows"));
    }
    if m == 0 || m > d {
        return Err(invalid(format!("selection size {m} must lie in 1..={d}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("RFE ridge penalty must be positive, got {lambda}")));
    }
    let gram = x.t().dot(&x);
    let xty = x.t().dot(&y).to_vec();

    let mut active: Vec<usize> = (0..d).collect();
    let mut eliminated = Vec::with_capacity(d - m);
    let final_coef = loop {
        let coef = ridge_on(&gram, &xty, &active, lambda)?;
        if active.len() == m {
            break coef;
        }
        let drop = (0..active.len())
            .min_by(|&a, &b| coef[a].abs().total_cmp(&coef[b].abs()).then(active[a].cmp(&active[b])))
            .expect("active set is non-empty");
        eliminated.push(active.remove(drop));
    };

    let mut survivors: Vec<(usize, f64)> = active.iter().copied().zip(final_coef).collect();
    survivors.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    let ranking: Vec<usize> = survivors
        .iter()
        .map(|s| s.0)
        .chain(eliminated.iter().rev().copied())
        .collect();
    let mut scores = vec![0.0; d];
    for (rank, &f) in ranking.iter().enumerate() {
        scores[f] = (d - rank) as f64;
    }
    Ok(SelectionResult {
        method: Method::Rfe,
        selected: ranking[..m].to_vec(),
        scores,
    })
}
