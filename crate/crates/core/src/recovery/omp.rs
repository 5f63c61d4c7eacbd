use nalgebra::{DMatrix, DVector};

use super::{check_inputs, norm2, RecoveryResult, RecoveryStatus};
use crate::error::{Error, Result};
use crate::fast::LinearOperator;

/// Orthogonal matching pursuit: at each step adds the column most
/// correlated with the residual (lowest index on ties) and refits by least
/// squares. Stops after `m` steps or once `|r| < tol |y|`.
pub fn omp(op: &dyn LinearOperator, y: &[f64], m: usize, tol: f64) -> Result<RecoveryResult> {
    check_inputs(op, y, tol)?;
    let (n, big_n) = op.dims();
    if m > n || m > big_n {
        return Err(Error::InvalidParameter(format!(
            "sparsity {m} exceeds dimensions {n}x{big_n}"
        )));
    }
    let y_norm = norm2(y);
    let target = tol * y_norm;
    let mut support: Vec<usize> = Vec::with_capacity(m);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut coef: Vec<f64> = Vec::new();
    let mut residual = y.to_vec();
    let mut iterations = 0;

    let estimate = |support: &[usize], coef: &[f64]| {
        let mut x = vec![0.0; big_n];
        for (&j, &c) in support.iter().zip(coef) {
            x[j] = c;
        }
        x
    };

    while iterations < m && norm2(&residual) > target {
        let corr = op.apply_adjoint(&residual);
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in corr.iter().enumerate() {
            if support.contains(&j) {
                continue;
            }
            if best.is_none_or(|(_, b)| c.abs() > b) {
                best = Some((j, c.abs()));
            }
        }
        let Some((j, _)) = best else { break };
        support.push(j);
        cols.push(op.column(j));
        iterations += 1;

        let k = support.len();
        let a_s = DMatrix::from_fn(n, k, |i, c| cols[c][i]);
        let qr = a_s.clone().qr();
        let r = qr.r();
        let scale = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if r.diagonal()
            .iter()
            .any(|v| v.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE))
        {
            let x = estimate(&support[..k - 1], &coef);
            return Ok(RecoveryResult::finish(
                op,
                y,
                x,
                iterations,
                RecoveryStatus::Infeasible,
            ));
        }
        let qty = qr.q().tr_mul(&DVector::from_column_slice(y));
        let sol = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| crate::error::Error::Numerical("singular refit".into()))?;
        coef = sol.as_slice().to_vec();
        let fit = &a_s * &sol;
        residual = y.iter().zip(fit.iter()).map(|(a, b)| a - b).collect();
    }

    let status = if norm2(&residual) <= target {
        RecoveryStatus::Converged
    } else {
        RecoveryStatus::MaxIter
    };
    Ok(RecoveryResult::finish(
        op,
        y,
        estimate(&support, &coef),
        iterations,
        status,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::build_devore;

    #[test]
    fn single_spike_one_step() {
        let m = build_devore(5, 1, 25).unwrap();
        let mut x = vec![0.0; 25];
        x[7] = 2.5;
        let y = LinearOperator::apply(&m, &x);
        let res = omp(&m, &y, 3, 1e-10).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.status, RecoveryStatus::Converged);
        assert!((res.estimate[7] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn zero_measurements() {
        let a = DMatrix::<f64>::identity(4, 4);
        let res = omp(&a, &[0.0; 4], 2, 1e-9).unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(res.estimate, vec![0.0; 4]);
        assert_eq!(res.status, RecoveryStatus::Converged);
    }

    #[test]
    fn duplicate_columns_are_rank_deficient() {
        // y leaves a residual outside the range, so the second pick repeats
        // the first column
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let res = omp(&a, &[1.0, 1.0], 2, 1e-12).unwrap();
        assert_eq!(res.status, RecoveryStatus::Infeasible);
        assert_eq!(res.estimate, vec![1.0, 0.0]);
        assert!(omp(&a, &[1.0, 1.0], 3, 1e-12).is_err());
    }
}
