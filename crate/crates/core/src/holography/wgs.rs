use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{raw_index, slm_field, window_sum, Fft2, PhaseMask, Target};
use crate::{rng_from_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WgsConfig {
    pub max_iters: usize,
    /// Target RMS fractional nonuniformity.
    pub tol: f64,
    pub seed: u64,
}

impl Default for WgsConfig {
    fn default() -> Self {
        Self { max_iters: 100, tol: 0.02, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct WgsReport {
    /// Number of far-field evaluations performed.
    pub iterations: usize,
    /// Nonuniformity of the sampled trap intensities at each evaluation.
    pub rms_nonuniformity: Vec<f64>,
    pub best_mask: PhaseMask,
    pub best_nonuniformity: f64,
    /// Window-integrated intensities produced by `best_mask`.
    pub best_samples: Vec<f64>,
    pub converged: bool,
}

impl WgsReport {
    pub fn best_so_far(&self) -> Vec<f64> {
        self.rms_nonuniformity
            .iter()
            .scan(f64::INFINITY, |best, &v| {
                *best = best.min(v);
                Some(*best)
            })
            .collect()
    }
}

/// Population standard deviation over mean.
pub fn rms_nonuniformity(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return f64::INFINITY;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Weighted Gerchberg-Saxton solver for a fixed aperture and target set.
///
/// Each iteration propagates the SLM field to the focal plane, measures the
/// window-integrated intensity `I_m` of every target, multiplies its weight
/// by `⟨A⟩/A_m` with `A_m = sqrt(I_m/T_m)`, imposes the weighted amplitudes
/// on the target pixels (zero elsewhere) while keeping their phases, and
/// back-propagates, keeping only the phase.
pub struct Wgs {
    aperture: Array2<f64>,
    targets: Vec<Target>,
    target_intensity: Vec<f64>,
    fft: Fft2,
}

impl Wgs {
    pub fn new(aperture: Array2<f64>, targets: Vec<Target>) -> Result<Self> {
        let n = aperture.nrows();
        if aperture.ncols() != n {
            return Err(Error::Validation("aperture must be square".into()));
        }
        if targets.is_empty() {
            return Err(Error::Validation("weighted GS needs at least one target".into()));
        }
        if let Some(t) = targets.iter().find(|t| t.row >= n || t.col >= n) {
            return Err(Error::Validation(format!("target {} lies outside the {n}x{n} grid", t.id)));
        }
        let m = targets.len();
        Ok(Self { aperture, targets, target_intensity: vec![1.0; m], fft: Fft2::new(n) })
    }

    pub fn n(&self) -> usize {
        self.aperture.nrows()
    }

    pub fn aperture(&self) -> &Array2<f64> {
        &self.aperture
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn target_intensities(&self) -> &[f64] {
        &self.target_intensity
    }

    /// Relative target intensities, one per target, all positive.
    pub fn set_target_intensities(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.targets.len() {
            return Err(Error::Validation(format!(
                "{} target intensities for {} targets",
                values.len(),
                self.targets.len()
            )));
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Validation("target intensities must be positive and finite".into()));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        self.target_intensity = values.iter().map(|v| v / mean).collect();
        Ok(())
    }

    /// Window-integrated intensity at every target for a given mask.
    pub fn sample(&mut self, mask: &PhaseMask) -> Result<Vec<f64>> {
        if mask.n() != self.n() {
            return Err(Error::Validation(format!("mask is {} but grid is {}", mask.n(), self.n())));
        }
        let mut field = slm_field(mask.values(), &self.aperture);
        self.fft.forward(&mut field);
        Ok(self.sample_field(&field))
    }

    fn sample_field(&self, field: &[Complex64]) -> Vec<f64> {
        let n = self.n();
        self.targets.iter().map(|t| window_sum(field, n, t.row, t.col)).collect()
    }

    fn ratio_nonuniformity(&self, samples: &[f64]) -> f64 {
        let ratios: Vec<f64> = samples.iter().zip(&self.target_intensity).map(|(i, t)| i / t).collect();
        rms_nonuniformity(&ratios)
    }

    /// Runs the solver. Without a warm start the initial phase comes from
    /// back-propagating random target phases drawn from `config.seed`.
    pub fn run(&mut self, config: &WgsConfig, warm_start: Option<&PhaseMask>) -> Result<WgsReport> {
        let n = self.n();
        let mut phase: Array2<f64> = match warm_start {
            Some(mask) if mask.n() != n => {
                return Err(Error::Validation(format!("warm start is {} but grid is {n}", mask.n())));
            }
            Some(mask) => mask.values().clone(),
            None => self.random_start(config.seed),
        };
        let mut weights = vec![1.0; self.targets.len()];
        let mut trace = Vec::with_capacity(config.max_iters);
        let mut best: Option<(f64, Array2<f64>, Vec<f64>)> = None;
        let mut converged = false;
        let mut field = vec![Complex64::default(); n * n];

        for _ in 0..config.max_iters.max(1) {
            for ((f, &p), &a) in field.iter_mut().zip(phase.iter()).zip(self.aperture.iter()) {
                *f = Complex64::from_polar(a, p);
            }
            self.fft.forward(&mut field);
            let samples = self.sample_field(&field);
            let nonuniformity = self.ratio_nonuniformity(&samples);
            trace.push(nonuniformity);
            if best.as_ref().map_or(true, |(b, _, _)| nonuniformity < *b) {
                best = Some((nonuniformity, phase.clone(), samples.clone()));
            }
            if nonuniformity <= config.tol {
                converged = true;
                break;
            }

            let amps: Vec<f64> = samples
                .iter()
                .zip(&self.target_intensity)
                .map(|(i, t)| (i / t).sqrt().max(f64::MIN_POSITIVE))
                .collect();
            let mean_amp = amps.iter().sum::<f64>() / amps.len() as f64;
            for (w, a) in weights.iter_mut().zip(&amps) {
                *w *= mean_amp / a;
            }

            let mut focal = vec![Complex64::default(); n * n];
            for ((t, w), ti) in self.targets.iter().zip(&weights).zip(&self.target_intensity) {
                let idx = raw_index(n, t.row, t.col);
                let here = field[idx];
                let unit = if here.norm() > 0.0 { here / here.norm() } else { Complex64::new(1.0, 0.0) };
                focal[idx] = unit * (w * ti.sqrt());
            }
            self.fft.inverse(&mut focal);
            for (p, f) in phase.iter_mut().zip(&focal) {
                *p = f.arg().rem_euclid(TAU);
            }
        }

        let (best_nonuniformity, best_phase, best_samples) = best.expect("at least one iteration runs");
        Ok(WgsReport {
            iterations: trace.len(),
            rms_nonuniformity: trace,
            best_mask: PhaseMask::from_radians(best_phase)?,
            best_nonuniformity,
            best_samples,
            converged,
        })
    }

    fn random_start(&mut self, seed: u64) -> Array2<f64> {
        let n = self.n();
        let mut rng = rng_from_seed(seed);
        let mut focal = vec![Complex64::default(); n * n];
        for (t, ti) in self.targets.iter().zip(&self.target_intensity) {
            focal[raw_index(n, t.row, t.col)] = Complex64::from_polar(ti.sqrt(), rng.random::<f64>() * TAU);
        }
        self.fft.inverse(&mut focal);
        Array2::from_shape_vec((n, n), focal.iter().map(|f| f.arg().rem_euclid(TAU)).collect())
            .expect("n*n elements")
    }
}
