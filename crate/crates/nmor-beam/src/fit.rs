//! Beam reconstruction: fit the normalized rotation signal to the
//! erf - atan model and derive reportable quantities.
//!
//! The model is z-independent — every masked pixel of a row shares one model
//! value — so the residuals are accumulated row-wise with per-pixel weights.
//! The Jacobian is analytic (closed-form derivatives of erf and atan).

use std::f64::consts::{FRAC_2_PI, PI};

use thiserror::Error;

use crate::field::GeometryParams;
use crate::grid::ScalarMap;
use crate::imaging::NormalizedMap;
use crate::lm::{self, LmConfig, LmError};
use crate::special::erf;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("normalized map has {0} valid pixels; at least {MIN_PIXELS} required")]
    TooFewPixels(usize),
    #[error("z-averaged profile does not change sign; no beam centroid to bracket")]
    NoSignChange,
    #[error("degenerate parameters; normal equations singular")]
    SingularJacobian,
    #[error("regression input degenerate: {0}")]
    DegenerateInput(&'static str),
    #[error("weight map grid does not match the data grid")]
    WeightGridMismatch,
}

impl From<LmError> for FitError {
    fn from(e: LmError) -> Self {
        match e {
            LmError::SingularJacobian(_) | LmError::BadDimension(_) => FitError::SingularJacobian,
        }
    }
}

/// Minimum number of valid pixels for a meaningful 2-D fit.
pub const MIN_PIXELS: usize = 100;

/// Solver settings for [`fit_erf_model`].
#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub parameter_tolerance: f64,
    pub residual_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 200,
            parameter_tolerance: 1e-10,
            residual_tolerance: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

impl FitConfig {
    fn lm(&self) -> LmConfig {
        LmConfig {
            max_iterations: self.max_iterations,
            param_tol: self.parameter_tolerance,
            residual_tol: self.residual_tolerance,
            initial_damping: self.initial_damping,
        }
    }
}

/// Recovered beam parameters with standard errors and diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub current: f64,
    pub current_err: f64,
    pub center_y0: f64,
    pub center_y0_err: f64,
    pub width_w: f64,
    pub width_w_err: f64,
    /// sqrt(sum of squared residuals) in amperes.
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual-scaled covariance of (I0, y0, w), row-major.
    pub covariance: [[f64; 3]; 3],
}

/// The erf - atan model value at vertical position `y`.
pub fn erf_model(y: f64, current: f64, center_y0: f64, width_w: f64, cell_path_l: f64) -> f64 {
    let u = y - center_y0;
    0.5 * current * (erf(u / width_w) - FRAC_2_PI * (2.0 * u / cell_path_l).atan())
}

/// Analytic partial derivatives of [`erf_model`] with respect to
/// (current, center_y0, width_w).
pub fn erf_model_jacobian(
    y: f64,
    current: f64,
    center_y0: f64,
    width_w: f64,
    cell_path_l: f64,
) -> [f64; 3] {
    let u = y - center_y0;
    let bracket = erf(u / width_w) - FRAC_2_PI * (2.0 * u / cell_path_l).atan();
    let gauss = (-u * u / (width_w * width_w)).exp();
    let erf_slope = 2.0 / PI.sqrt() * gauss / width_w;
    let atan_slope = (4.0 / (PI * cell_path_l)) / (1.0 + 4.0 * u * u / (cell_path_l * cell_path_l));
    [
        0.5 * bracket,
        -0.5 * current * (erf_slope - atan_slope),
        -0.5 * current * erf_slope * u / width_w,
    ]
}

/// Starting point (I0, y0, w) read off the z-averaged profile: the centroid
/// from the sign change nearest the grid center, the amplitude from the
/// peak-to-peak span, and the width from a quarter of the peak-to-trough
/// separation (the profile extrema sit near +-1.9 w for typical cell/width
/// ratios, so half their separation would land near 2 w, not w).
pub fn initial_guess(map: &NormalizedMap) -> Result<(f64, f64, f64), FitError> {
    let data = &map.signal;
    let valid = data.valid_count();
    if valid < MIN_PIXELS {
        return Err(FitError::TooFewPixels(valid));
    }

    let profile = data.row_means();
    let grid = data.grid;

    // sign changes between consecutive rows that have data
    let rows: Vec<(usize, f64)> = profile
        .iter()
        .enumerate()
        .filter_map(|(iy, v)| v.map(|m| (iy, m)))
        .collect();
    let mut crossings: Vec<f64> = Vec::new();
    for pair in rows.windows(2) {
        let (iy_a, va) = pair[0];
        let (iy_b, vb) = pair[1];
        if va == 0.0 {
            crossings.push(grid.y(iy_a));
        } else if va.signum() != vb.signum() && vb != 0.0 {
            let ya = grid.y(iy_a);
            let yb = grid.y(iy_b);
            crossings.push(ya + (yb - ya) * (0.0 - va) / (vb - va));
        }
    }
    // the crossing nearest the grid center wins when noise creates several
    let y0 = crossings
        .into_iter()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .ok_or(FitError::NoSignChange)?;

    let (mut max_v, mut max_y) = (f64::NEG_INFINITY, 0.0);
    let (mut min_v, mut min_y) = (f64::INFINITY, 0.0);
    for &(iy, v) in &rows {
        if v > max_v {
            max_v = v;
            max_y = grid.y(iy);
        }
        if v < min_v {
            min_v = v;
            min_y = grid.y(iy);
        }
    }
    if !(max_v > min_v) {
        return Err(FitError::NoSignChange);
    }
    let amplitude = max_v - min_v;
    // rising profile through the crossing means positive current
    let sign = if max_y > min_y { 1.0 } else { -1.0 };
    let width = ((max_y - min_y).abs() / 4.0).max(grid.step_y);
    Ok((sign * amplitude, y0, width))
}

/// Fit the masked 2-D normalized signal to the erf - atan model with unit
/// weights and an automatic starting point.
pub fn fit_erf_model(
    map: &NormalizedMap,
    g: &GeometryParams,
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    let guess = initial_guess(map)?;
    fit_erf_model_with(map, None, Some(guess), g, cfg)
}

/// Fit with optional per-pixel weights (1/variance) and an optional explicit
/// starting point.
pub fn fit_erf_model_with(
    map: &NormalizedMap,
    weights: Option<&ScalarMap>,
    guess: Option<(f64, f64, f64)>,
    g: &GeometryParams,
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    let data = &map.signal;
    if let Some(w) = weights {
        if w.grid != data.grid {
            return Err(FitError::WeightGridMismatch);
        }
    }
    let (i0, y0, w0) = match guess {
        Some(gss) => gss,
        None => initial_guess(map)?,
    };
    let grid = data.grid;
    let half_span = 0.5 * grid.span_y();
    let cell = g.cell_path_l;

    let visit = |p: &[f64], emit: &mut dyn FnMut(f64, &[f64])| {
        for iy in 0..grid.ny {
            let y = grid.y(iy);
            let model = erf_model(y, p[0], p[1], p[2], cell);
            let jac = erf_model_jacobian(y, p[0], p[1], p[2], cell);
            for iz in 0..grid.nz {
                let px = grid.idx(iy, iz);
                if !data.mask[px] {
                    continue;
                }
                let sqrt_w = match weights {
                    Some(wmap) => wmap.data[px].max(0.0).sqrt(),
                    None => 1.0,
                };
                if sqrt_w == 0.0 {
                    continue;
                }
                let r = (data.data[px] - model) * sqrt_w;
                emit(
                    r,
                    &[jac[0] * sqrt_w, jac[1] * sqrt_w, jac[2] * sqrt_w],
                );
            }
        }
    };
    let valid = |p: &[f64]| p[2] > 0.0 && p[1].abs() <= half_span;

    let report = lm::fit(visit, valid, &[i0, y0, w0], &cfg.lm())?;

    let mut covariance = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            covariance[i][j] = report.covariance[i * 3 + j];
        }
    }
    Ok(FitResult {
        current: report.params[0],
        current_err: covariance[0][0].max(0.0).sqrt(),
        center_y0: report.params[1],
        center_y0_err: covariance[1][1].max(0.0).sqrt(),
        width_w: report.params[2],
        width_w_err: covariance[2][2].max(0.0).sqrt(),
        residual_norm: report.residual_norm,
        gradient_norm: report.gradient_norm,
        iterations: report.iterations,
        converged: report.converged,
        covariance,
    })
}

/// Full width at half maximum of the exp(-r^2/w^2) current-density profile:
/// `2 w sqrt(ln 2)`.
pub fn fwhm_from_w(w: f64) -> f64 {
    2.0 * w * (2.0f64).ln().sqrt()
}

/// Zero-intercept least-squares slope with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regression {
    pub slope: f64,
    pub slope_err: f64,
    pub points: usize,
}

/// Regress `y = slope * x` through the origin: `slope = sum(xy)/sum(x^2)`,
/// standard error from the residual scatter.
pub fn regression_compare(x: &[f64], y: &[f64]) -> Result<Regression, FitError> {
    if x.len() != y.len() {
        return Err(FitError::DegenerateInput("x and y lengths differ"));
    }
    if x.len() < 2 {
        return Err(FitError::DegenerateInput("need at least 2 points"));
    }
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx <= 0.0 {
        return Err(FitError::DegenerateInput("x values are all zero"));
    }
    let sxy: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let slope = sxy / sxx;
    let ssr: f64 = x
        .iter()
        .zip(y.iter())
        .map(|(a, b)| (b - slope * a).powi(2))
        .sum();
    let sigma2 = ssr / (x.len() - 1) as f64;
    Ok(Regression {
        slope,
        slope_err: (sigma2 / sxx).sqrt(),
        points: x.len(),
    })
}
