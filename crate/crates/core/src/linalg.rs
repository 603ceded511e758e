//! Least-squares helpers shared by the likelihood families.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on the scaled `R` diagonal below which a design is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Set when the strict solve failed and a pseudo-inverse was used.
    pub rank_deficient: bool,
}

/// Ordinary least squares through a Householder QR of the column-scaled
/// design. Fails on (numerically) rank-deficient designs.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<LeastSquares> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: y.len(), right: n });
    }
    if n < p {
        return Err(Error::RankDeficientDesign { rank: n, cols: p });
    }
    let scale: Vec<f64> = (0..p).map(|c| x.column(c).norm()).collect();
    if scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        let rank = scale.iter().filter(|&&s| s > 0.0 && s.is_finite()).count();
        return Err(Error::RankDeficientDesign { rank, cols: p });
    }
    let mut xs = x.clone();
    for (c, s) in scale.iter().enumerate() {
        xs.column_mut(c).scale_mut(1.0 / s);
    }
    let qr = xs.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let rank = diag.iter().filter(|&&d| d > RANK_TOL * max).count();
    if rank < p {
        return Err(Error::RankDeficientDesign { rank, cols: p });
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let coef_scaled = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficientDesign { rank, cols: p })?;
    let coef: Vec<f64> = coef_scaled.iter().zip(&scale).map(|(b, s)| b / s).collect();
    Ok(finish(x, y, coef, false))
}

/// Like [`least_squares`] but falls back to the minimum-norm SVD solution
/// when the design is rank deficient.
pub(crate) fn least_squares_lenient(x: &DMatrix<f64>, y: &[f64]) -> Result<LeastSquares> {
    match least_squares(x, y) {
        Err(Error::RankDeficientDesign { .. }) => {
            let svd = x.clone().svd(true, true);
            let max = svd.singular_values.max();
            let eps = (RANK_TOL * max).max(f64::MIN_POSITIVE);
            let sol = svd
                .solve(&DVector::from_column_slice(y), eps)
                .map_err(|e| Error::Dimension(e.to_string()))?;
            Ok(finish(x, y, sol.iter().copied().collect(), true))
        }
        other => other,
    }
}

fn finish(x: &DMatrix<f64>, y: &[f64], coef: Vec<f64>, rank_deficient: bool) -> LeastSquares {
    let fitted = x * DVector::from_column_slice(&coef);
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    LeastSquares {
        coef,
        residuals,
        rss,
        rank_deficient,
    }
}

/// Rows of `x` selected by `rows`, in order.
pub(crate) fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |r, c| x[(rows[r], c)])
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
