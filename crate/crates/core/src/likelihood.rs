//! Gaussian log-likelihoods and maximum-likelihood fits for the OLS, SAR,
//! SEM and SLX families on one unit sample.
//!
//! SAR and SEM are fitted by profiling: for a fixed spatial parameter the
//! coefficients and variance have closed forms, leaving a scalar
//! concentrated log-likelihood that is maximised by Brent's method over the
//! admissible interval of the sample's own weight matrix. Variances use the
//! ML divisor `N`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dataset::intercept_columns;
use crate::error::{Error, Result};
use crate::linalg::{dot, least_squares, least_squares_lenient, LeastSquares};
use crate::optimize::{brent_maximize, refine_stationary};
use crate::weights::SpatialWeights;

/// Residual variances below this are rejected as degenerate.
pub const MIN_VARIANCE: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Ols,
    Sar,
    Sem,
    Slx,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [ModelFamily::Ols, ModelFamily::Sar, ModelFamily::Sem, ModelFamily::Slx];

    /// Whether the family carries a scalar spatial autoregressive parameter.
    pub fn has_spatial_param(self) -> bool {
        matches!(self, ModelFamily::Sar | ModelFamily::Sem)
    }

    /// Smallest sample size accepted for a design with `p` columns.
    pub fn min_units(self, p: usize) -> usize {
        match self {
            ModelFamily::Ols => p + 2,
            ModelFamily::Sar | ModelFamily::Sem => p + 3,
            ModelFamily::Slx => 2 * p + 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Ols => "ols",
            ModelFamily::Sar => "sar",
            ModelFamily::Sem => "sem",
            ModelFamily::Slx => "slx",
        }
    }

    /// Conventional symbol of the spatial parameter.
    pub fn spatial_symbol(self) -> Option<&'static str> {
        match self {
            ModelFamily::Sar => Some("rho"),
            ModelFamily::Sem => Some("lambda"),
            _ => None,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(ModelFamily::Ols),
            "sar" => Ok(ModelFamily::Sar),
            "sem" => Ok(ModelFamily::Sem),
            "slx" => Ok(ModelFamily::Slx),
            other => Err(Error::InvalidConfig(format!("unknown model family `{other}`"))),
        }
    }
}

/// Estimated parameters of one family on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFit {
    pub family: ModelFamily,
    /// rho (SAR) or lambda (SEM); 0 for OLS and SLX.
    pub spatial_param: f64,
    /// Coefficients on X; for SLX followed by the coefficients of the lagged
    /// columns listed in `lagged_columns`.
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    /// Log-likelihood of the nested non-spatial OLS model on the same sample.
    pub loglik_linear: f64,
    /// `ln|det(I - spatial_param W)|` of the sample's own weight matrix.
    pub log_det: f64,
    /// Standard errors of `(spatial_param, theta)` for SAR/SEM, of `theta`
    /// otherwise. `None` when the Hessian was not invertible or not requested.
    pub std_errors: Option<Vec<f64>>,
    pub n_units: usize,
    /// X columns whose spatial lags enter the SLX design.
    pub lagged_columns: Vec<usize>,
    /// The weight matrix had no edges, so the spatial parameter was fixed at 0.
    pub spatial_pinned: bool,
    /// A pseudo-inverse or variance floor was needed (lenient fits only).
    pub degenerate: bool,
}

impl ClusterFit {
    /// Number of columns of the original design X.
    pub fn n_covariates(&self) -> usize {
        self.theta.len() - self.lagged_columns.len()
    }

    pub fn has_free_spatial_param(&self) -> bool {
        self.family.has_spatial_param() && !self.spatial_pinned
    }

    /// Free parameters: coefficients, variance and, when free, the spatial parameter.
    pub fn n_params(&self) -> usize {
        self.theta.len() + 1 + usize::from(self.has_free_spatial_param())
    }

    pub fn n_params_linear(&self) -> usize {
        self.n_covariates() + 1
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.n_params() as f64 - 2.0 * self.loglik
    }

    pub fn aic_linear(&self) -> f64 {
        2.0 * self.n_params_linear() as f64 - 2.0 * self.loglik_linear
    }

    pub fn bic(&self) -> f64 {
        self.n_params() as f64 * (self.n_units as f64).ln() - 2.0 * self.loglik
    }

    /// Estimates in reporting order: spatial parameter first when free.
    pub fn estimates(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.theta.len() + 1);
        if self.has_free_spatial_param() {
            v.push(self.spatial_param);
        }
        v.extend_from_slice(&self.theta);
        v
    }
}

/// Knobs for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    /// Tolerate rank-deficient designs and vanishing variance instead of
    /// failing (used inside the clustering loop).
    pub lenient: bool,
    pub std_errors: bool,
    /// Keep the spatial lag of the intercept column in SLX designs.
    pub slx_lag_intercept: bool,
}

impl FitOptions {
    pub fn strict() -> Self {
        Self {
            lenient: false,
            std_errors: true,
            slx_lag_intercept: false,
        }
    }
}

fn check_shapes(y: &[f64], x: &DMatrix<f64>, w: Option<&SpatialWeights>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: y.len(), right: x.nrows() });
    }
    if let Some(w) = w {
        if w.n() != y.len() {
            return Err(Error::Dimension(format!("W has {} units, data has {}", w.n(), y.len())));
        }
    }
    if x.ncols() == 0 || y.is_empty() {
        return Err(Error::Dimension("empty design".into()));
    }
    Ok(())
}

fn gaussian(n: usize, rss: f64, sigma2: f64) -> f64 {
    let n = n as f64;
    -0.5 * n * LN_2PI - 0.5 * n * sigma2.ln() - rss / (2.0 * sigma2)
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("sigma2 must be positive, got {sigma2}")))
    }
}

fn xb(x: &DMatrix<f64>, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != x.ncols() {
        return Err(Error::LengthMismatch { left: theta.len(), right: x.ncols() });
    }
    Ok((x * DVector::from_column_slice(theta)).iter().copied().collect())
}

/// Gaussian log-likelihood of `y = X theta + e`.
pub fn loglik_ols(y: &[f64], x: &DMatrix<f64>, theta: &[f64], sigma2: f64) -> Result<f64> {
    check_shapes(y, x, None)?;
    check_sigma2(sigma2)?;
    let fitted = xb(x, theta)?;
    let rss = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(gaussian(y.len(), rss, sigma2))
}

/// SAR log-likelihood at `(rho, theta, sigma2)`.
pub fn loglik_sar(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights, rho: f64, theta: &[f64], sigma2: f64) -> Result<f64> {
    check_shapes(y, x, Some(w))?;
    check_sigma2(sigma2)?;
    let log_det = w.log_det(rho)?;
    let e = sar_residuals(y, x, w, rho, theta)?;
    Ok(gaussian(y.len(), dot(&e, &e), sigma2) + log_det)
}

/// SEM log-likelihood at `(lambda, theta, sigma2)`.
pub fn loglik_sem(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights, lambda: f64, theta: &[f64], sigma2: f64) -> Result<f64> {
    check_shapes(y, x, Some(w))?;
    check_sigma2(sigma2)?;
    let log_det = w.log_det(lambda)?;
    let e = sem_residuals(y, x, w, lambda, theta)?;
    Ok(gaussian(y.len(), dot(&e, &e), sigma2) + log_det)
}

/// SLX log-likelihood with `beta` on X and `theta_lag` on the lags of
/// `lagged_columns`.
pub fn loglik_slx(
    y: &[f64],
    x: &DMatrix<f64>,
    w: &SpatialWeights,
    beta: &[f64],
    theta_lag: &[f64],
    lagged_columns: &[usize],
    sigma2: f64,
) -> Result<f64> {
    check_shapes(y, x, Some(w))?;
    check_sigma2(sigma2)?;
    let design = slx_design(x, w, lagged_columns);
    let coef: Vec<f64> = beta.iter().chain(theta_lag).copied().collect();
    let fitted = xb(&design, &coef)?;
    let rss = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(gaussian(y.len(), rss, sigma2))
}

fn sar_residuals(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights, rho: f64, theta: &[f64]) -> Result<Vec<f64>> {
    let wy = w.lag(y);
    let fitted = xb(x, theta)?;
    Ok(y.iter()
        .zip(&wy)
        .zip(&fitted)
        .map(|((yi, wyi), fi)| yi - rho * wyi - fi)
        .collect())
}

fn sem_residuals(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights, lambda: f64, theta: &[f64]) -> Result<Vec<f64>> {
    let fitted = xb(x, theta)?;
    let u: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let wu = w.lag(&u);
    Ok(u.iter().zip(&wu).map(|(a, b)| a - lambda * b).collect())
}

fn slx_design(x: &DMatrix<f64>, w: &SpatialWeights, lagged_columns: &[usize]) -> DMatrix<f64> {
    let wx = w.lag_matrix(x);
    let p = x.ncols();
    DMatrix::from_fn(x.nrows(), p + lagged_columns.len(), |r, c| {
        if c < p {
            x[(r, c)]
        } else {
            wx[(r, lagged_columns[c - p])]
        }
    })
}

/// Model residuals of `fit` on `(y, X)` with weight matrix `w`.
pub fn residuals(fit: &ClusterFit, y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<Vec<f64>> {
    check_shapes(y, x, Some(w))?;
    match fit.family {
        ModelFamily::Ols => {
            let fitted = xb(x, &fit.theta)?;
            Ok(y.iter().zip(&fitted).map(|(a, b)| a - b).collect())
        }
        ModelFamily::Sar => sar_residuals(y, x, w, fit.spatial_param, &fit.theta),
        ModelFamily::Sem => sem_residuals(y, x, w, fit.spatial_param, &fit.theta),
        ModelFamily::Slx => {
            let design = slx_design(x, w, &fit.lagged_columns);
            let fitted = xb(&design, &fit.theta)?;
            Ok(y.iter().zip(&fitted).map(|(a, b)| a - b).collect())
        }
    }
}

/// Full log-likelihood of `fit`'s parameters on `(y, X, w)`.
pub fn loglik_at(fit: &ClusterFit, y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<f64> {
    check_sigma2(fit.sigma2)?;
    let log_det = if fit.family.has_spatial_param() {
        w.log_det(fit.spatial_param)?
    } else {
        0.0
    };
    let e = residuals(fit, y, x, w)?;
    Ok(gaussian(y.len(), dot(&e, &e), fit.sigma2) + log_det)
}

/// Per-unit log-likelihood contributions used by the membership step:
/// the Gaussian log-density of each unit's residual plus an equal
/// `1/n_units` share of the fit's log-determinant.
pub fn unit_logliks(fit: &ClusterFit, y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<Vec<f64>> {
    let e = residuals(fit, y, x, w)?;
    let share = if fit.n_units > 0 { fit.log_det / fit.n_units as f64 } else { 0.0 };
    let c = -0.5 * (LN_2PI + fit.sigma2.ln());
    Ok(e.iter().map(|ei| c - ei * ei / (2.0 * fit.sigma2) + share).collect())
}

/// Contribution of unit `i`; see [`unit_logliks`].
pub fn unit_loglik(fit: &ClusterFit, y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights, i: usize) -> Result<f64> {
    if i >= y.len() {
        return Err(Error::IndexOutOfRange { index: i, len: y.len() });
    }
    Ok(unit_logliks(fit, y, x, w)?[i])
}

fn solve(x: &DMatrix<f64>, y: &[f64], lenient: bool) -> Result<LeastSquares> {
    if lenient {
        least_squares_lenient(x, y)
    } else {
        least_squares(x, y)
    }
}

fn ml_variance(rss: f64, n: usize, lenient: bool) -> Result<(f64, bool)> {
    let s2 = rss / n as f64;
    if s2 < MIN_VARIANCE || !s2.is_finite() {
        if lenient {
            return Ok((MIN_VARIANCE, true));
        }
        return Err(Error::MinVariance(s2));
    }
    Ok((s2, false))
}

fn check_size(family: ModelFamily, n: usize, p: usize, lenient: bool) -> Result<()> {
    let needed = family.min_units(p);
    if !lenient && n < needed {
        return Err(Error::TooFewUnits { needed, got: n });
    }
    if n == 0 {
        return Err(Error::TooFewUnits { needed, got: 0 });
    }
    Ok(())
}

/// Fits `family` by maximum likelihood.
pub fn fit(family: ModelFamily, y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights, opts: &FitOptions) -> Result<ClusterFit> {
    check_shapes(y, x, Some(w))?;
    let mut out = match family {
        ModelFamily::Ols => fit_ols_impl(y, x, opts.lenient)?,
        ModelFamily::Sar => fit_sar_impl(y, x, w, opts.lenient)?,
        ModelFamily::Sem => fit_sem_impl(y, x, w, opts.lenient)?,
        ModelFamily::Slx => fit_slx_impl(y, x, w, opts)?,
    };
    if opts.std_errors {
        out.std_errors = std_errors(&out, y, x, w).ok();
    }
    Ok(out)
}

/// Closed-form OLS with ML variance.
pub fn fit_ols(y: &[f64], x: &DMatrix<f64>) -> Result<ClusterFit> {
    check_shapes(y, x, None)?;
    let w = SpatialWeights::empty(y.len());
    fit(ModelFamily::Ols, y, x, &w, &FitOptions::strict())
}

pub fn fit_sar(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<ClusterFit> {
    fit(ModelFamily::Sar, y, x, w, &FitOptions::strict())
}

pub fn fit_sem(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<ClusterFit> {
    fit(ModelFamily::Sem, y, x, w, &FitOptions::strict())
}

pub fn fit_slx(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<ClusterFit> {
    fit(ModelFamily::Slx, y, x, w, &FitOptions::strict())
}

fn fit_ols_impl(y: &[f64], x: &DMatrix<f64>, lenient: bool) -> Result<ClusterFit> {
    let (n, p) = x.shape();
    check_size(ModelFamily::Ols, n, p, lenient)?;
    let ls = solve(x, y, lenient)?;
    let (sigma2, floored) = ml_variance(ls.rss, n, lenient)?;
    let loglik = gaussian(n, ls.rss, sigma2);
    Ok(ClusterFit {
        family: ModelFamily::Ols,
        spatial_param: 0.0,
        theta: ls.coef,
        sigma2,
        loglik,
        loglik_linear: loglik,
        log_det: 0.0,
        std_errors: None,
        n_units: n,
        lagged_columns: Vec::new(),
        spatial_pinned: false,
        degenerate: ls.rank_deficient || floored,
    })
}

fn concentrated(n: usize, rss: f64, log_det: f64) -> f64 {
    let n = n as f64;
    -0.5 * n * (LN_2PI + 1.0) - 0.5 * n * (rss / n).ln() + log_det
}

/// Finds the maximiser of a concentrated log-likelihood over the search
/// interval, polishing it to a stationary point when interior, and never
/// returning a value worse than the non-spatial point 0.
fn maximize_profile<F, G>(w: &SpatialWeights, mut conc: F, mut grad: G) -> f64
where
    F: FnMut(f64) -> f64,
    G: FnMut(f64) -> f64,
{
    let (lo, hi) = w.search_interval().expect("caller checked edges");
    let (mut best, mut best_val) = brent_maximize(&mut conc, lo, hi, 1e-12, 500);
    if let Some(r) = refine_stationary(&mut grad, best, lo, hi, 1e-11) {
        let v = conc(r);
        if v >= best_val {
            best = r;
            best_val = v;
        }
    }
    let at_zero = conc(0.0);
    if !(best_val >= at_zero) {
        best = 0.0;
    }
    best
}

fn fit_sar_impl(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights, lenient: bool) -> Result<ClusterFit> {
    let (n, p) = x.shape();
    check_size(ModelFamily::Sar, n, p, lenient)?;
    let base = fit_ols_impl(y, x, lenient)?;
    if w.is_edgeless() {
        return Ok(ClusterFit {
            family: ModelFamily::Sar,
            spatial_pinned: true,
            ..base
        });
    }
    let wy = w.lag(y);
    let ls0 = solve(x, y, lenient)?;
    let ls1 = solve(x, &wy, lenient)?;
    // e(rho) = e0 - rho * e1, rss(rho) = a - 2 rho b + rho^2 c
    let a = ls0.rss;
    let b = dot(&ls0.residuals, &ls1.residuals);
    let c = ls1.rss;
    let rss = |r: f64| (a - 2.0 * r * b + r * r * c).max(f64::MIN_POSITIVE);
    let rho = maximize_profile(
        w,
        |r| match w.log_det(r) {
            Ok(ld) => concentrated(n, rss(r), ld),
            Err(_) => f64::NEG_INFINITY,
        },
        |r| -0.5 * n as f64 * (-2.0 * b + 2.0 * r * c) / rss(r) + w.log_det_derivative(r),
    );
    let theta: Vec<f64> = ls0.coef.iter().zip(&ls1.coef).map(|(t0, t1)| t0 - rho * t1).collect();
    let e = sar_residuals(y, x, w, rho, &theta)?;
    let rss_hat = dot(&e, &e);
    let (sigma2, floored) = ml_variance(rss_hat, n, lenient)?;
    let log_det = w.log_det(rho)?;
    Ok(ClusterFit {
        family: ModelFamily::Sar,
        spatial_param: rho,
        theta,
        sigma2,
        loglik: gaussian(n, rss_hat, sigma2) + log_det,
        loglik_linear: base.loglik,
        log_det,
        std_errors: None,
        n_units: n,
        lagged_columns: Vec::new(),
        spatial_pinned: false,
        degenerate: base.degenerate || ls1.rank_deficient || floored,
    })
}

struct SemProfile<'a> {
    y: &'a [f64],
    x: &'a DMatrix<f64>,
    wy: Vec<f64>,
    wx: DMatrix<f64>,
    lenient: bool,
}

impl SemProfile<'_> {
    fn filtered(&self, lambda: f64) -> (Vec<f64>, DMatrix<f64>) {
        let yf = self.y.iter().zip(&self.wy).map(|(a, b)| a - lambda * b).collect();
        let xf = self.x - &self.wx * lambda;
        (yf, xf)
    }

    fn solve(&self, lambda: f64) -> Option<LeastSquares> {
        let (yf, xf) = self.filtered(lambda);
        solve(&xf, &yf, self.lenient).ok()
    }

    /// Derivative of the concentrated log-likelihood without the log-det term.
    fn rss_term_derivative(&self, lambda: f64) -> f64 {
        let Some(ls) = self.solve(lambda) else { return f64::NAN };
        let theta = DVector::from_column_slice(&ls.coef);
        let wxt = &self.wx * &theta;
        // W u with u = y - X theta; filtered residual e = u - lambda W u
        let wu: Vec<f64> = self.wy.iter().zip(wxt.iter()).map(|(a, b)| a - b).collect();
        let drss = -2.0 * dot(&ls.residuals, &wu);
        -0.5 * self.y.len() as f64 * drss / ls.rss
    }
}

fn fit_sem_impl(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights, lenient: bool) -> Result<ClusterFit> {
    let (n, p) = x.shape();
    check_size(ModelFamily::Sem, n, p, lenient)?;
    let base = fit_ols_impl(y, x, lenient)?;
    if w.is_edgeless() {
        return Ok(ClusterFit {
            family: ModelFamily::Sem,
            spatial_pinned: true,
            ..base
        });
    }
    let prof = SemProfile {
        y,
        x,
        wy: w.lag(y),
        wx: w.lag_matrix(x),
        lenient,
    };
    let lambda = maximize_profile(
        w,
        |l| match (w.log_det(l), prof.solve(l)) {
            (Ok(ld), Some(ls)) => concentrated(n, ls.rss.max(f64::MIN_POSITIVE), ld),
            _ => f64::NEG_INFINITY,
        },
        |l| prof.rss_term_derivative(l) + w.log_det_derivative(l),
    );
    let (yf, xf) = prof.filtered(lambda);
    let ls = solve(&xf, &yf, lenient)?;
    let (sigma2, floored) = ml_variance(ls.rss, n, lenient)?;
    let log_det = w.log_det(lambda)?;
    Ok(ClusterFit {
        family: ModelFamily::Sem,
        spatial_param: lambda,
        theta: ls.coef,
        sigma2,
        loglik: gaussian(n, ls.rss, sigma2) + log_det,
        loglik_linear: base.loglik,
        log_det,
        std_errors: None,
        n_units: n,
        lagged_columns: Vec::new(),
        spatial_pinned: false,
        degenerate: base.degenerate || ls.rank_deficient || floored,
    })
}

/// Columns of X whose lags enter an SLX design: every column with a
/// nonzero lag, minus intercept columns unless `lag_intercept`.
pub fn slx_lag_columns(x: &DMatrix<f64>, w: &SpatialWeights, lag_intercept: bool) -> Vec<usize> {
    let intercepts = intercept_columns(x);
    let wx = w.lag_matrix(x);
    (0..x.ncols())
        .filter(|c| lag_intercept || !intercepts.contains(c))
        .filter(|&c| wx.column(c).iter().any(|&v| v != 0.0))
        .collect()
}

fn fit_slx_impl(y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights, opts: &FitOptions) -> Result<ClusterFit> {
    let (n, p) = x.shape();
    check_size(ModelFamily::Slx, n, p, opts.lenient)?;
    let base = fit_ols_impl(y, x, opts.lenient)?;
    let lagged_columns = slx_lag_columns(x, w, opts.slx_lag_intercept);
    let design = slx_design(x, w, &lagged_columns);
    let ls = solve(&design, y, opts.lenient)?;
    let (sigma2, floored) = ml_variance(ls.rss, n, opts.lenient)?;
    Ok(ClusterFit {
        family: ModelFamily::Slx,
        spatial_param: 0.0,
        theta: ls.coef,
        sigma2,
        loglik: gaussian(n, ls.rss, sigma2),
        loglik_linear: base.loglik,
        log_det: 0.0,
        std_errors: None,
        n_units: n,
        lagged_columns,
        spatial_pinned: false,
        degenerate: base.degenerate || ls.rank_deficient || floored,
    })
}

/// Relative finite-difference step for the numerical Hessian.
const HESSIAN_REL_STEP: f64 = 1e-5;
/// Absolute floor of the finite-difference step.
const HESSIAN_MIN_STEP: f64 = 1e-7;

/// Standard errors from the inverse of the negative numerical Hessian of
/// the full log-likelihood in `(spatial_param?, theta, sigma2)`; the
/// variance entry is dropped from the result.
pub fn std_errors(fit: &ClusterFit, y: &[f64], x: &DMatrix<f64>, w: &SpatialWeights) -> Result<Vec<f64>> {
    check_shapes(y, x, Some(w))?;
    let spatial = fit.has_free_spatial_param();
    let mut params = Vec::with_capacity(fit.theta.len() + 2);
    if spatial {
        params.push(fit.spatial_param);
    }
    params.extend_from_slice(&fit.theta);
    params.push(fit.sigma2);
    let k = params.len();

    let design = match fit.family {
        ModelFamily::Slx => slx_design(x, w, &fit.lagged_columns),
        _ => x.clone(),
    };
    let wy = w.lag(y);
    let wx = w.lag_matrix(&design);
    let n = y.len();
    let family = fit.family;
    let ll = |v: &[f64]| -> f64 {
        let (sp, rest) = if spatial { (v[0], &v[1..]) } else { (0.0, v) };
        let (theta, s2) = rest.split_at(rest.len() - 1);
        let s2 = s2[0];
        if s2 <= 0.0 {
            return f64::NAN;
        }
        let log_det = if spatial {
            match w.log_det(sp) {
                Ok(v) => v,
                Err(_) => return f64::NAN,
            }
        } else {
            0.0
        };
        let t = DVector::from_column_slice(theta);
        let fitted = &design * &t;
        let rss = match family {
            ModelFamily::Sar => (0..n).map(|i| (y[i] - sp * wy[i] - fitted[i]).powi(2)).sum(),
            ModelFamily::Sem => {
                let wfit = &wx * &t;
                (0..n)
                    .map(|i| (y[i] - fitted[i] - sp * (wy[i] - wfit[i])).powi(2))
                    .sum()
            }
            _ => (0..n).map(|i| (y[i] - fitted[i]).powi(2)).sum(),
        };
        gaussian(n, rss, s2) + log_det
    };

    let h: Vec<f64> = params
        .iter()
        .map(|v| (HESSIAN_REL_STEP * v.abs()).max(HESSIAN_MIN_STEP))
        .collect();
    let f0 = ll(&params);
    let mut hess = DMatrix::<f64>::zeros(k, k);
    let mut p = params.clone();
    for a in 0..k {
        p[a] = params[a] + h[a];
        let fp = ll(&p);
        p[a] = params[a] - h[a];
        let fm = ll(&p);
        p[a] = params[a];
        hess[(a, a)] = (fp - 2.0 * f0 + fm) / (h[a] * h[a]);
        for b in 0..a {
            let mut eval = |da: f64, db: f64| {
                p[a] = params[a] + da * h[a];
                p[b] = params[b] + db * h[b];
                let v = ll(&p);
                p[a] = params[a];
                p[b] = params[b];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h[a] * h[b]);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    if hess.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularHessian);
    }
    let info = -hess;
    // invert through the correlation form to keep scales comparable
    let d: Vec<f64> = (0..k).map(|i| info[(i, i)]).collect();
    if d.iter().any(|&v| v <= 0.0) {
        return Err(Error::SingularHessian);
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| info[(i, j)] / (d[i] * d[j]).sqrt());
    let chol = scaled.clone().cholesky().ok_or(Error::SingularHessian)?;
    let inv = chol.inverse();
    let mut se = Vec::with_capacity(k - 1);
    for i in 0..k - 1 {
        let var = inv[(i, i)] / d[i];
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::SingularHessian);
        }
        se.push(var.sqrt());
    }
    // reject numerically meaningless inverses
    let cond = {
        let eig = scaled.symmetric_eigenvalues();
        let max = eig.max();
        let min = eig.min();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    };
    if cond > 1e14 {
        return Err(Error::SingularHessian);
    }
    Ok(se)
}

/// Likelihood-ratio test of the spatial model against its nested OLS model.
/// Returns `(statistic, p_value)` with the statistic floored at 0 and the
/// p-value from a chi-square with one degree of freedom.
pub fn lr_test(fit: &ClusterFit) -> Result<(f64, f64)> {
    if !fit.family.has_spatial_param() {
        return Err(Error::NotApplicable(format!(
            "likelihood-ratio test is defined for sar and sem, not {}",
            fit.family
        )));
    }
    let stat = (2.0 * (fit.loglik - fit.loglik_linear)).max(0.0);
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    Ok((stat, chi.sf(stat)))
}

/// Two-sided normal p-value of `estimate / se`.
pub fn wald_p_value(estimate: f64, se: f64) -> Option<f64> {
    use statrs::distribution::Normal;
    if !(se > 0.0) || !se.is_finite() {
        return None;
    }
    let z = (estimate / se).abs();
    Some(2.0 * Normal::standard().sf(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept(n: usize) -> DMatrix<f64> {
        DMatrix::from_element(n, 1, 1.0)
    }

    fn edge2() -> SpatialWeights {
        SpatialWeights::from_index_pairs(2, [(0, 1)]).unwrap()
    }

    #[test]
    fn sar_two_unit_hand_value() {
        let v = loglik_sar(&[1.0, 0.0], &intercept(2), &edge2(), 0.5, &[0.0], 1.0).unwrap();
        let expected = -LN_2PI + 0.75f64.ln() - 0.625;
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn sem_two_unit_hand_value() {
        let v = loglik_sem(&[1.0, 0.0], &intercept(2), &edge2(), 0.5, &[0.0], 1.0).unwrap();
        let expected = -LN_2PI + 0.75f64.ln() - 0.625;
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn spatial_zero_is_ols() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.3, 1.0, -1.0, 1.0, 2.0]);
        let y = [0.5, 1.5, -0.2];
        let w = SpatialWeights::from_index_pairs(3, [(0, 1), (1, 2)]).unwrap();
        let theta = [0.1, 0.4];
        let ols = loglik_ols(&y, &x, &theta, 0.7).unwrap();
        assert_eq!(loglik_sar(&y, &x, &w, 0.0, &theta, 0.7).unwrap(), ols);
        assert_eq!(loglik_sem(&y, &x, &w, 0.0, &theta, 0.7).unwrap(), ols);
    }

    #[test]
    fn boundary_is_rejected() {
        let w = edge2();
        let (_, hi) = w.admissible_interval().unwrap();
        assert!(matches!(
            loglik_sar(&[1.0, 0.0], &intercept(2), &w, hi, &[0.0], 1.0),
            Err(Error::SpatialParamOutOfRange { .. })
        ));
    }

    #[test]
    fn ols_sample_mean() {
        let f = fit_ols(&[1.0, 2.0, 3.0], &intercept(3)).unwrap();
        assert!((f.theta[0] - 2.0).abs() < 1e-14);
        assert!((f.sigma2 - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(f.loglik, f.loglik_linear);
    }

    #[test]
    fn ols_perfect_fit_is_min_variance() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = [1.0, 3.0, 5.0, 7.0];
        assert!(matches!(fit_ols(&y, &x), Err(Error::MinVariance(_))));
        let lenient = fit(
            ModelFamily::Ols,
            &y,
            &x,
            &SpatialWeights::empty(4),
            &FitOptions { lenient: true, ..Default::default() },
        )
        .unwrap();
        assert!(lenient.degenerate);
    }

    #[test]
    fn too_few_units() {
        assert!(matches!(
            fit_ols(&[1.0, 2.0], &intercept(2)),
            Err(Error::TooFewUnits { needed: 3, got: 2 })
        ));
        let w = SpatialWeights::from_index_pairs(3, [(0, 1)]).unwrap();
        assert!(matches!(
            fit_sar(&[1.0, 2.0, 0.0], &intercept(3), &w),
            Err(Error::TooFewUnits { needed: 4, .. })
        ));
    }

    #[test]
    fn lr_contract() {
        let f = fit_ols(&[1.0, 2.0, 3.0, 5.0], &intercept(4)).unwrap();
        assert!(matches!(lr_test(&f), Err(Error::NotApplicable(_))));
        let sar = ClusterFit {
            family: ModelFamily::Sar,
            ..f.clone()
        };
        let (stat, p) = lr_test(&sar).unwrap();
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-15);
        let shifted = ClusterFit {
            family: ModelFamily::Sar,
            loglik: f.loglik_linear + 0.5 * 3.841_458_820_694_124,
            ..f
        };
        let (_, p) = lr_test(&shifted).unwrap();
        assert!((p - 0.05).abs() < 1e-9);
    }

    #[test]
    fn family_parsing() {
        for fam in ModelFamily::ALL {
            assert_eq!(fam.as_str().parse::<ModelFamily>().unwrap(), fam);
        }
        assert!("sdm".parse::<ModelFamily>().is_err());
    }
}
