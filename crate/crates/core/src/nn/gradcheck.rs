//! Central finite-difference verification of tape gradients (64-bit only).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::tape::Parameter;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Coordinates checked per parameter; parameters with fewer entries are
    /// checked exhaustively.
    pub coords_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            coords_per_param: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoordinateError {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// The coordinate that produced `max_rel_error`.
    pub worst: Option<CoordinateError>,
}

impl GradCheckReport {
    /// True when nothing was checked (a model with no parameters).
    pub fn is_vacuous(&self) -> bool {
        self.coords_checked == 0
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`, or 0 when both are below 1e-10.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    if analytic.abs() < 1e-10 && numeric.abs() < 1e-10 {
        return 0.0;
    }
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the gradients written by `loss_fn` against central differences.
///
/// `loss_fn` must evaluate the loss at the current parameter values and
/// overwrite every `grad` with the tape gradient. It is called once for the
/// analytic gradient and twice per checked coordinate.
pub fn gradient_check<F>(params: &mut [Parameter<f64>], mut loss_fn: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&mut [Parameter<f64>]) -> Result<f64>,
{
    let mut report = GradCheckReport {
        coords_checked: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: None,
    };
    if params.iter().all(|p| p.numel() == 0) {
        log::warn!("gradient check has no coordinates to verify; reporting a vacuous pass");
        return Ok(report);
    }

    let base = loss_fn(params)?;
    if !base.is_finite() {
        return Err(Error::Numeric(format!("loss is {base}")));
    }
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.grad.as_slice().to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    for pi in 0..params.len() {
        let n = params[pi].numel();
        let coords: Vec<usize> = if n <= opts.coords_per_param {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, opts.coords_per_param).into_vec();
            c.sort_unstable();
            c
        };
        for idx in coords {
            let orig = params[pi].value.as_slice()[idx];
            params[pi].value.as_mut_slice()[idx] = orig + opts.eps;
            let plus = loss_fn(params)?;
            params[pi].value.as_mut_slice()[idx] = orig - opts.eps;
            let minus = loss_fn(params)?;
            params[pi].value.as_mut_slice()[idx] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while perturbing {}[{idx}]",
                    params[pi].name
                )));
            }
            let numeric = (plus - minus) / (2.0 * opts.eps);
            let a = analytic[pi][idx];
            let rel = relative_error(a, numeric);
            report.coords_checked += 1;
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some(CoordinateError {
                    param: params[pi].name.clone(),
                    index: idx,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    // leave the analytic gradient in place for callers
    for (p, g) in params.iter_mut().zip(analytic) {
        p.grad.as_mut_slice().copy_from_slice(&g);
    }
    Ok(report)
}
