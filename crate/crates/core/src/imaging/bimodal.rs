use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};
use statrs::function::factorial::ln_factorial;

use super::DetectionModel;
use crate::{Element, Error, Result};

const MIN_SAMPLES: usize = 100;
const MIN_WEIGHT: f64 = 0.05;
const EM_MAX_ITERS: usize = 2000;
const EM_TOL: f64 = 1e-10;
/// The density dip between the modes must be at least this deep relative to
/// the lower of the two mode peaks, otherwise the data is called unimodal.
const DIP_RATIO: f64 = 0.5;

/// Two-component Poisson mixture; `weight` is the fraction in the bright mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimodalFit {
    pub mean0: f64,
    pub mean1: f64,
    pub weight: f64,
    /// Counts strictly above this are classified as occupied.
    pub threshold: u64,
    pub iterations: usize,
}

fn log_poisson(k: u64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * lambda.ln() - lambda - ln_factorial(k)
}

fn log_mixture(k: u64, w: f64, mu0: f64, mu1: f64) -> f64 {
    let a = (1.0 - w).ln() + log_poisson(k, mu0);
    let b = w.ln() + log_poisson(k, mu1);
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Integer minimizing the mixture density strictly between the means, and
/// the log-density there.
fn density_minimum(w: f64, mu0: f64, mu1: f64) -> Option<(u64, f64)> {
    let lo = mu0.floor() as u64 + 1;
    let hi = mu1.ceil() as u64;
    (lo..hi)
        .filter(|&k| (k as f64) > mu0 && (k as f64) < mu1)
        .map(|k| (k, log_mixture(k, w, mu0, mu1)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Fits a two-component Poisson mixture by expectation-maximization and
/// places the threshold at the minimum of the fitted density between modes.
pub fn fit_bimodal(counts: &[u64]) -> Result<BimodalFit> {
    if counts.len() < MIN_SAMPLES {
        return Err(Error::Fit(format!("need at least {MIN_SAMPLES} samples, got {}", counts.len())));
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let median = sorted[sorted.len() / 2];
    let (low, high): (Vec<u64>, Vec<u64>) = counts.iter().partition(|&&c| c <= median);
    let (low, high) = if high.is_empty() {
        let (l, h): (Vec<u64>, Vec<u64>) = counts.iter().partition(|&&c| c < median);
        (l, h)
    } else {
        (low, high)
    };
    if low.is_empty() || high.is_empty() {
        return Err(Error::Fit("all samples are equal; data is unimodal".into()));
    }
    let mean = |v: &[u64]| v.iter().sum::<u64>() as f64 / v.len() as f64;
    let (mut mu0, mut mu1) = (mean(&low), mean(&high));
    let mut w = high.len() as f64 / counts.len() as f64;

    // Histogram-weighted EM: identical counts share responsibilities.
    let hist: Vec<(u64, f64)> = {
        let mut h: Vec<(u64, f64)> = Vec::new();
        for &c in &sorted {
            match h.last_mut() {
                Some((v, n)) if *v == c => *n += 1.0,
                _ => h.push((c, 1.0)),
            }
        }
        h
    };
    let total = counts.len() as f64;
    let mut iterations = 0;
    for it in 1..=EM_MAX_ITERS {
        iterations = it;
        let (mut r_sum, mut r_k, mut q_k) = (0.0, 0.0, 0.0);
        for &(k, n) in &hist {
            let a = (1.0 - w).ln() + log_poisson(k, mu0);
            let b = w.ln() + log_poisson(k, mu1);
            let r = 1.0 / (1.0 + (a - b).exp());
            r_sum += n * r;
            r_k += n * r * k as f64;
            q_k += n * (1.0 - r) * k as f64;
        }
        if r_sum <= 0.0 || r_sum >= total {
            return Err(Error::Fit("mixture collapsed onto one mode; data is unimodal".into()));
        }
        let (new_w, new_mu1, new_mu0) = (r_sum / total, r_k / r_sum, q_k / (total - r_sum));
        let delta = (new_w - w).abs() + (new_mu0 - mu0).abs() / mu0.max(1.0) + (new_mu1 - mu1).abs() / mu1.max(1.0);
        (w, mu0, mu1) = (new_w, new_mu0, new_mu1);
        if delta < EM_TOL {
            break;
        }
    }
    if mu1 < mu0 {
        (mu0, mu1) = (mu1, mu0);
        w = 1.0 - w;
    }
    if !(MIN_WEIGHT..=1.0 - MIN_WEIGHT).contains(&w) {
        return Err(Error::Fit(format!("bright-mode weight {w:.4} outside [{MIN_WEIGHT}, {}]", 1.0 - MIN_WEIGHT)));
    }
    let (threshold, dip) =
        density_minimum(w, mu0, mu1).ok_or_else(|| Error::Fit(format!("modes at {mu0:.2} and {mu1:.2} overlap")))?;
    let peak = log_mixture(mu0.round() as u64, w, mu0, mu1).min(log_mixture(mu1.round() as u64, w, mu0, mu1));
    if dip > peak + DIP_RATIO.ln() {
        return Err(Error::Fit(format!("no density minimum between {mu0:.2} and {mu1:.2}; data is unimodal")));
    }
    Ok(BimodalFit { mean0: mu0, mean1: mu1, weight: w, threshold, iterations })
}

/// Per-site thresholds; a failing site is named in the error.
pub fn fit_thresholds(samples: &[(u32, Vec<u64>)]) -> Result<Vec<(u32, BimodalFit)>> {
    samples
        .iter()
        .map(|(id, counts)| {
            fit_bimodal(counts).map(|f| (*id, f)).map_err(|e| match e {
                Error::Fit(msg) => Error::Fit(format!("site {id}: {msg}")),
                other => other,
            })
        })
        .collect()
}

/// Occupied iff counts exceed the site's threshold.
pub fn detect(counts: &[u64], thresholds: &[u64]) -> Result<Vec<bool>> {
    if counts.len() != thresholds.len() {
        return Err(Error::Validation(format!(
            "{} counts but {} thresholds",
            counts.len(),
            thresholds.len()
        )));
    }
    Ok(counts.iter().zip(thresholds).map(|(c, t)| c > t).collect())
}

/// Threshold from the model's expected mode means at equal weights.
pub fn nominal_threshold(model: &DetectionModel, element: Element) -> Result<u64> {
    let (mu0, mu1) = model.expected_roi_counts(element);
    density_minimum(0.5, mu0, mu1)
        .map(|(k, _)| k)
        .ok_or_else(|| Error::Validation(format!("{element} signal too weak to separate from background")))
}

/// Exact misclassification probability at equal priors:
/// ½[P(K > t | μ0) + P(K ≤ t | μ1)].
pub fn classification_error(mu0: f64, mu1: f64, threshold: u64) -> Result<f64> {
    let p0 = Poisson::new(mu0).map_err(|e| Error::Validation(e.to_string()))?;
    let p1 = Poisson::new(mu1).map_err(|e| Error::Validation(e.to_string()))?;
    Ok(0.5 * (p0.sf(threshold) + p1.cdf(threshold)))
}

/// Writes `counts,frequency` for every integer from 0 to the maximum.
pub fn write_histogram_csv(counts: &[u64], mut out: impl Write) -> Result<()> {
    writeln!(out, "counts,frequency")?;
    for (value, freq) in crate::stats::histogram(counts).iter().enumerate() {
        writeln!(out, "{value},{freq}")?;
    }
    Ok(())
}

pub fn write_thresholds_csv(thresholds: &[(u32, u64)], mut out: impl Write) -> Result<()> {
    writeln!(out, "site_id,threshold")?;
    for (id, t) in thresholds {
        writeln!(out, "{id},{t}")?;
    }
    Ok(())
}
