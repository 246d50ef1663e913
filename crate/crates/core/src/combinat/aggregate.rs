use nalgebra::DMatrix;

use super::CombinatError;
use crate::subspace::IndexSet;

/// Sign-then-sum column aggregation. Column `l` in part `T_j` is negated when
/// `A[j, l] < 0`, then `A'[i, j] = sum over l in T_j of s_l A[i, l]`. The
/// result is `k' x k'` with `A'[j, j] = sum over T_j of |A[j, l]|`.
pub fn aggregate_columns(a: &DMatrix<f64>, parts: &[IndexSet]) -> Result<DMatrix<f64>, CombinatError> {
    let (rows, cols) = a.shape();
    if parts.len() != rows {
        return Err(CombinatError::InvalidArgument(format!("{} parts for {rows} rows", parts.len())));
    }
    let mut owner = vec![None; cols];
    for (j, part) in parts.iter().enumerate() {
        if part.universe() != cols {
            return Err(CombinatError::InvalidArgument(format!("part {} lives in [{}], matrix has {cols} columns", j + 1, part.universe())));
        }
        for l in part.zero_based() {
            if owner[l].replace(j).is_some() {
                return Err(CombinatError::OverlappingParts(l + 1));
            }
        }
    }
    let mut out = DMatrix::zeros(rows, rows);
    for (j, part) in parts.iter().enumerate() {
        for l in part.zero_based() {
            let sign = if a[(j, l)] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..rows {
                out[(i, j)] += sign * a[(i, l)];
            }
        }
    }
    Ok(out)
}
