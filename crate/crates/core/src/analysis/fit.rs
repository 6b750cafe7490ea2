//! Gaussian-plus-baseline least-squares fit of a correlation peak.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::CorrelationHistogram;
use crate::error::{Error, Result};
use crate::units::FWHM_PER_SIGMA;

/// Fitted peak parameters with standard errors from the fit covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    #[serde(rename = "center_ps")]
    pub center: f64,
    #[serde(rename = "center_stderr_ps")]
    pub center_stderr: f64,
    #[serde(rename = "fwhm_ps")]
    pub fwhm: f64,
    #[serde(rename = "fwhm_stderr_ps")]
    pub fwhm_stderr: f64,
    pub amplitude: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub max_iterations: usize,
    /// Stop once every parameter changes by less than this relative amount.
    pub tolerance: f64,
    /// A peak needs a bin at least this many times the median bin.
    pub peak_to_median: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-8,
            peak_to_median: 5,
        }
    }
}

fn model(p: &Vector4<f64>, x: f64) -> (f64, Vector4<f64>) {
    let (amp, mu, sigma, base) = (p[0], p[1], p[2], p[3]);
    let z = (x - mu) / sigma;
    let g = (-0.5 * z * z).exp();
    let grad = Vector4::new(g, amp * g * z / sigma, amp * g * z * z / sigma, 1.0);
    (amp * g + base, grad)
}

/// Damped Gauss–Newton (Levenberg–Marquardt) fit with Poisson weights
/// `1/max(model, 1)`, refreshed from the current model every iteration.
/// Starts from the maximum bin, amplitude `max − median`, baseline `median`
/// and a width of two bins.
pub fn fit_gaussian_peak(h: &CorrelationHistogram) -> Result<PeakFit> {
    fit_gaussian_peak_with(h, &FitSettings::default())
}

pub fn fit_gaussian_peak_with(h: &CorrelationHistogram, settings: &FitSettings) -> Result<PeakFit> {
    if h.is_empty() {
        return Err(Error::NoPeakFound { max: 0, median: 0 });
    }
    let kmax = h.argmax();
    let max = h.counts[kmax];
    let median = h.median();
    if max < settings.peak_to_median * median.max(1) || h.len() < 5 {
        return Err(Error::NoPeakFound { max, median });
    }

    let xs: Vec<f64> = (0..h.len()).map(|k| h.bin_center_ps(k)).collect();
    let ys: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
    // weighting by the model rather than the data avoids the downward bias
    // of low-count bins
    let weights = |p: &Vector4<f64>| -> Vec<f64> { xs.iter().map(|&x| 1.0 / model(p, x).0.max(1.0)).collect() };

    let chi2 = |p: &Vector4<f64>, ws: &[f64]| -> f64 {
        xs.iter()
            .zip(&ys)
            .zip(ws)
            .map(|((&x, &y), &w)| {
                let r = y - model(p, x).0;
                w * r * r
            })
            .sum()
    };
    let normal_equations = |p: &Vector4<f64>, ws: &[f64]| -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for ((&x, &y), &w) in xs.iter().zip(&ys).zip(ws) {
            let (f, g) = model(p, x);
            jtj += g * g.transpose() * w;
            jtr += g * (w * (y - f));
        }
        (jtj, jtr)
    };

    let mut p = Vector4::new(
        (max - median) as f64,
        xs[kmax],
        2.0 * h.bin_width_ps(),
        median as f64,
    );
    let mut lambda = 1e-3;
    for _ in 0..settings.max_iterations {
        let ws = weights(&p);
        let cost = chi2(&p, &ws);
        let (jtj, jtr) = normal_equations(&p, &ws);
        let mut accepted = None;
        for _ in 0..30 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] *= 1.0 + lambda;
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let c = chi2(&trial, &ws);
            if c.is_finite() && c <= cost && trial[2] != 0.0 {
                accepted = Some((trial, step));
                break;
            }
            lambda *= 10.0;
        }
        let Some((trial, step)) = accepted else {
            break;
        };
        p = trial;
        lambda = (lambda * 0.1).max(1e-12);
        let converged = (0..4).all(|i| step[i].abs() <= settings.tolerance * p[i].abs().max(1e-12));
        if converged {
            break;
        }
    }

    let ws = weights(&p);
    let cost = chi2(&p, &ws);
    let (jtj, _) = normal_equations(&p, &ws);
    let dof = (h.len() as f64 - 4.0).max(1.0);
    // Poisson weights give absolute errors; only overdispersion inflates them
    let cov = jtj
        .try_inverse()
        .ok_or(Error::NoPeakFound { max, median })?
        * (cost / dof).max(1.0);
    let sigma = p[2].abs();
    if !(sigma.is_finite() && sigma > 0.0 && p[0] > 0.0) {
        return Err(Error::NoPeakFound { max, median });
    }
    Ok(PeakFit {
        center: p[1],
        center_stderr: cov[(1, 1)].max(0.0).sqrt(),
        fwhm: FWHM_PER_SIGMA * sigma,
        fwhm_stderr: FWHM_PER_SIGMA * cov[(2, 2)].max(0.0).sqrt(),
        amplitude: p[0],
        baseline: p[3],
    })
}
