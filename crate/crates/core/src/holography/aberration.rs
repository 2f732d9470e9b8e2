use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::zernike::zernike_sum;
use super::{raw_index, slm_field, zernike_basis, Fft2, ZernikeCoeffs};
use crate::{Error, Result};

/// Anything that reports the peak intensity of the central tweezer for a given
/// corrective phase (unwrapped, radians, SLM grid).
pub trait FocalProbe {
    fn grid(&self) -> usize;
    fn central_intensity(&mut self, correction: &Array2<f64>) -> f64;
}

/// Single-spot forward model with an aberration unknown to the optimizer.
pub struct HiddenAberrationSystem {
    aperture: Array2<f64>,
    hidden: Array2<f64>,
    fft: Fft2,
}

impl HiddenAberrationSystem {
    pub fn new(aperture: Array2<f64>, hidden: &ZernikeCoeffs) -> Self {
        let n = aperture.nrows();
        Self { hidden: zernike_sum(hidden, n), fft: Fft2::new(n), aperture }
    }
}

impl FocalProbe for HiddenAberrationSystem {
    fn grid(&self) -> usize {
        self.aperture.nrows()
    }

    fn central_intensity(&mut self, correction: &Array2<f64>) -> f64 {
        let n = self.grid();
        let phase = &self.hidden + correction;
        let mut field = slm_field(&phase, &self.aperture);
        self.fft.forward(&mut field);
        field[raw_index(n, n / 2, n / 2)].norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { min: -1.0, max: 1.0, steps: 41 }
    }
}

impl ScanConfig {
    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.steps - 1) as f64
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(move |k| self.min + k as f64 * self.step())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AberrationFit {
    pub coeffs: ZernikeCoeffs,
    /// Noll indices whose best value sat on the edge of the scan range.
    pub at_bound: Vec<usize>,
    pub intensity_before: f64,
    pub intensity_after: f64,
}

/// Coordinate-ascent scan of Zernike terms 4..=`max_noll` (piston and
/// tip/tilt are skipped), keeping a new value only if it strictly raises the
/// central-trap intensity.
pub fn aberration_correct(probe: &mut dyn FocalProbe, max_noll: usize, scan: &ScanConfig) -> Result<AberrationFit> {
    if max_noll < 2 {
        return Err(Error::Validation(format!("need at least Noll index 2, got {max_noll}")));
    }
    if scan.steps < 2 || !(scan.max > scan.min) {
        return Err(Error::Validation(format!("invalid scan {scan:?}")));
    }
    let n = probe.grid();
    let mut coeffs = ZernikeCoeffs::zeros(max_noll);
    let mut correction = Array2::<f64>::zeros((n, n));
    let before = probe.central_intensity(&correction);
    let mut current = before;
    let mut at_bound = Vec::new();

    for j in 4..=max_noll {
        let basis = zernike_basis(j, n);
        let base = correction.clone();
        let mut best = (coeffs.get(j), current);
        let mut best_index = None;
        for (k, value) in scan.values().enumerate() {
            let trial = &base + &(&basis * (value - coeffs.get(j)));
            let intensity = probe.central_intensity(&trial);
            if intensity > best.1 {
                best = (value, intensity);
                best_index = Some(k);
            }
        }
        if let Some(k) = best_index {
            correction.scaled_add(best.0 - coeffs.get(j), &basis);
            coeffs.set(j, best.0);
            current = best.1;
            if k == 0 || k == scan.steps - 1 {
                at_bound.push(j);
            }
        }
    }

    Ok(AberrationFit { coeffs, at_bound, intensity_before: before, intensity_after: current })
}
