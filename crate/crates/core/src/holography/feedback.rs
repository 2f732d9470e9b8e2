use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use super::{slm_field, window_sum, Fft2, PhaseMask, Target, Wgs, WgsConfig};
use super::wgs::rms_nonuniformity;
use crate::{Error, Result, SimRng};

/// Source of per-site Stark-shift measurements for a displayed mask.
pub trait ShiftProbe {
    fn measure(&mut self, mask: &PhaseMask) -> Result<Vec<f64>>;
}

/// Atoms sitting in the traps of the true optical system.
///
/// The true trap depth differs from the modelled focal intensity by a fixed
/// per-site transfer factor (camera/atom mismatch); shifts carry optional
/// multiplicative Gaussian noise.
pub struct SimulatedStarkProbe {
    aperture: Array2<f64>,
    targets: Vec<Target>,
    transfer: Vec<f64>,
    /// Shift per unit window intensity, MHz.
    pub kappa: f64,
    pub noise_rel: f64,
    rng: SimRng,
    fft: Fft2,
}

impl SimulatedStarkProbe {
    pub fn new(
        aperture: Array2<f64>,
        targets: Vec<Target>,
        transfer: Vec<f64>,
        kappa: f64,
        noise_rel: f64,
        rng: SimRng,
    ) -> Result<Self> {
        if transfer.len() != targets.len() {
            return Err(Error::Validation("one transfer factor per target required".into()));
        }
        let n = aperture.nrows();
        Ok(Self { aperture, targets, transfer, kappa, noise_rel, rng, fft: Fft2::new(n) })
    }
}

impl ShiftProbe for SimulatedStarkProbe {
    fn measure(&mut self, mask: &PhaseMask) -> Result<Vec<f64>> {
        let n = self.aperture.nrows();
        if mask.n() != n {
            return Err(Error::Validation(format!("mask is {} but probe grid is {n}", mask.n())));
        }
        let mut field = slm_field(mask.values(), &self.aperture);
        self.fft.forward(&mut field);
        Ok(self
            .targets
            .iter()
            .zip(&self.transfer)
            .map(|(t, eta)| {
                let noise: f64 = StandardNormal.sample(&mut self.rng);
                self.kappa * eta * window_sum(&field, n, t.row, t.col) * (1.0 + self.noise_rel * noise)
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct FeedbackResult {
    pub mask: PhaseMask,
    /// RMS fractional shift spread: entry 0 is the input measurement,
    /// entry k the measurement after round k.
    pub trace: Vec<f64>,
    /// Final relative target intensities.
    pub targets: Vec<f64>,
}

fn check_shifts(shifts: &[f64], expected: usize) -> Result<()> {
    if shifts.len() != expected {
        return Err(Error::Measurement(format!("{} shifts for {expected} sites", shifts.len())));
    }
    if let Some((i, s)) = shifts.iter().enumerate().find(|(_, &s)| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Measurement(format!("non-positive Stark shift {s} at site index {i}")));
    }
    Ok(())
}

/// Closed-loop homogenization on measured Stark shifts.
///
/// Each round rescales the WGS target intensities by `⟨S⟩/S_m` relative to
/// the intensities the current mask produces, re-runs WGS warm-started from
/// the current mask, and measures again through `probe`.
pub fn atom_feedback_homogenize(
    wgs: &mut Wgs,
    mask: &PhaseMask,
    measured_shifts: &[f64],
    probe: &mut dyn ShiftProbe,
    rounds: usize,
    config: &WgsConfig,
) -> Result<FeedbackResult> {
    let m = wgs.targets().len();
    check_shifts(measured_shifts, m)?;
    let mut mask = mask.clone();
    let mut shifts = measured_shifts.to_vec();
    let mut trace = vec![rms_nonuniformity(&shifts)];

    for _ in 0..rounds {
        let achieved = wgs.sample(&mask)?;
        let mean_shift = shifts.iter().sum::<f64>() / m as f64;
        let targets: Vec<f64> = achieved.iter().zip(&shifts).map(|(i, s)| i * mean_shift / s).collect();
        wgs.set_target_intensities(&targets)?;
        mask = wgs.run(config, Some(&mask))?.best_mask;
        shifts = probe.measure(&mask)?;
        check_shifts(&shifts, m)?;
        trace.push(rms_nonuniformity(&shifts));
    }

    Ok(FeedbackResult { mask, trace, targets: wgs.target_intensities().to_vec() })
}
