use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SimRng};

/// Push-out frequency scan used to read the light shift of each trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StarkScanConfig {
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub step_mhz: f64,
    /// Differential light shift per µK of trap depth.
    pub kappa_mhz_per_uk: f64,
    pub linewidth_mhz: f64,
    /// Loss probability on resonance.
    pub pushout_depth: f64,
    /// Shots per frequency; `None` gives the noiseless expectation.
    pub shots_per_point: Option<u64>,
}

impl Default for StarkScanConfig {
    fn default() -> Self {
        Self {
            start_mhz: 0.0,
            stop_mhz: 40.0,
            step_mhz: 0.25,
            kappa_mhz_per_uk: 0.028,
            linewidth_mhz: 6.0,
            pushout_depth: 0.95,
            shots_per_point: None,
        }
    }
}

impl StarkScanConfig {
    pub fn frequencies(&self) -> Vec<f64> {
        let n = ((self.stop_mhz - self.start_mhz) / self.step_mhz + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.start_mhz + k as f64 * self.step_mhz).collect()
    }

    fn lorentzian(&self, detuning: f64) -> f64 {
        let x = 2.0 * detuning / self.linewidth_mhz;
        1.0 / (1.0 + x * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftMeasurement {
    pub shift_mhz: f64,
    pub uncertainty_mhz: f64,
    /// The survival minimum sat at the edge of the scan.
    pub flagged: bool,
}

/// Simulates a push-out scan on every trap and fits the resonance of each.
pub fn stark_shift_scan(depths_uk: &[f64], config: &StarkScanConfig, rng: &mut SimRng) -> Result<Vec<ShiftMeasurement>> {
    if !(config.step_mhz > 0.0 && config.stop_mhz > config.start_mhz && config.linewidth_mhz > 0.0) {
        return Err(Error::Validation(format!("invalid scan {config:?}")));
    }
    if !(0.0..=1.0).contains(&config.pushout_depth) {
        return Err(Error::Validation("push-out depth must lie in [0, 1]".into()));
    }
    let freqs = config.frequencies();
    if freqs.len() < 5 {
        return Err(Error::Validation("scan needs at least 5 points".into()));
    }
    depths_uk
        .iter()
        .map(|&u| {
            let center = config.kappa_mhz_per_uk * u;
            let survival: Vec<f64> = freqs
                .iter()
                .map(|&f| {
                    let s = 1.0 - config.pushout_depth * config.lorentzian(f - center);
                    match config.shots_per_point {
                        None => Ok(s),
                        Some(shots) => Binomial::new(shots, s)
                            .map(|b| b.sample(rng) as f64 / shots as f64)
                            .map_err(|e| Error::Validation(e.to_string())),
                    }
                })
                .collect::<Result<_>>()?;
            Ok(fit_dip(&freqs, &survival, config))
        })
        .collect()
}

/// Sum of squared residuals for a Lorentzian dip centred at `c`, with the
/// amplitude solved in closed form.
fn dip_sse(freqs: &[f64], survival: &[f64], c: f64, config: &StarkScanConfig) -> f64 {
    let a = dip_amplitude(freqs, survival, c, config);
    freqs.iter().zip(survival).map(|(&f, &s)| ((1.0 - s) - a * config.lorentzian(f - c)).powi(2)).sum()
}

fn dip_amplitude(freqs: &[f64], survival: &[f64], c: f64, config: &StarkScanConfig) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (&f, &s) in freqs.iter().zip(survival) {
        let l = config.lorentzian(f - c);
        num += (1.0 - s) * l;
        den += l * l;
    }
    num / den
}

fn fit_dip(freqs: &[f64], survival: &[f64], config: &StarkScanConfig) -> ShiftMeasurement {
    let imin = survival
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    let flagged = imin == 0 || imin == freqs.len() - 1;
    let sse = |c: f64| dip_sse(freqs, survival, c, config);
    // Coarse search within a linewidth of the noisy minimum, then refine.
    let lo = (freqs[imin] - config.linewidth_mhz).max(freqs[0]);
    let hi = (freqs[imin] + config.linewidth_mhz).min(freqs[freqs.len() - 1]);
    let h = config.step_mhz / 2.0;
    let coarse = (0..=((hi - lo) / h).round() as usize)
        .map(|k| lo + k as f64 * h)
        .min_by(|x, y| sse(*x).total_cmp(&sse(*y)))
        .unwrap_or(freqs[imin]);
    let (mut a, mut b) = ((coarse - h).max(lo), (coarse + h).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    while b - a > 1e-9 * config.step_mhz.max(1.0) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sse(d);
        }
    }
    let center = 0.5 * (a + b);
    let uncertainty = match config.shots_per_point {
        // Fisher information of the centre for binomial survival counts; the
        // amplitude decouples from the centre by symmetry.
        Some(shots) => {
            let amp = dip_amplitude(freqs, survival, center, config);
            let info: f64 = freqs
                .iter()
                .map(|&f| {
                    let s = (1.0 - amp * config.lorentzian(f - center)).clamp(1e-6, 1.0 - 1e-6);
                    let x = 2.0 * (f - center) / config.linewidth_mhz;
                    let ds_dc = -amp * 4.0 * x / config.linewidth_mhz / (1.0 + x * x).powi(2);
                    ds_dc * ds_dc * shots as f64 / (s * (1.0 - s))
                })
                .sum();
            if info > 0.0 { info.recip().sqrt() } else { f64::INFINITY }
        }
        None => {
            let cost = sse(center);
            let h = config.step_mhz * 0.1;
            let curvature = (sse(center + h) - 2.0 * cost + sse(center - h)) / (h * h);
            let dof = freqs.len().saturating_sub(2).max(1) as f64;
            if curvature > 0.0 { (2.0 * cost / dof / curvature).sqrt() } else { f64::INFINITY }
        }
    };
    ShiftMeasurement { shift_mhz: center, uncertainty_mhz: uncertainty, flagged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn noiseless_scan_recovers_shift() {
        let cfg = StarkScanConfig::default();
        let depths = [400.0, 500.0, 660.0, 700.0];
        let out = stark_shift_scan(&depths, &cfg, &mut rng_from_seed(0)).unwrap();
        for (m, u) in out.iter().zip(depths) {
            assert!((m.shift_mhz - cfg.kappa_mhz_per_uk * u).abs() < 1e-6, "{m:?}");
            assert!(!m.flagged);
            assert!(m.uncertainty_mhz < 1e-3);
        }
    }

    #[test]
    fn shot_noise_gives_finite_error_bar() {
        let cfg = StarkScanConfig { shots_per_point: Some(100), ..StarkScanConfig::default() };
        let out = stark_shift_scan(&[600.0; 20], &cfg, &mut rng_from_seed(5)).unwrap();
        let truth = cfg.kappa_mhz_per_uk * 600.0;
        let within = out.iter().filter(|m| (m.shift_mhz - truth).abs() <= 3.0 * m.uncertainty_mhz).count();
        assert!(within >= 18, "{within}");
        assert!(out.iter().all(|m| m.uncertainty_mhz > 0.0 && m.uncertainty_mhz < 1.0));
    }

    #[test]
    fn relative_depth_spread_carries_over() {
        let cfg = StarkScanConfig { shots_per_point: Some(200), ..StarkScanConfig::default() };
        let out = stark_shift_scan(&[600.0, 624.0], &cfg, &mut rng_from_seed(8)).unwrap();
        let ratio = out[1].shift_mhz / out[0].shift_mhz;
        let err = ratio * ((out[0].uncertainty_mhz / out[0].shift_mhz).powi(2) + (out[1].uncertainty_mhz / out[1].shift_mhz).powi(2)).sqrt();
        assert!((ratio - 1.04).abs() <= 3.0 * err, "{ratio} ± {err}");
    }

    #[test]
    fn dip_outside_scan_is_flagged() {
        let cfg = StarkScanConfig::default();
        let out = stark_shift_scan(&[5000.0], &cfg, &mut rng_from_seed(0)).unwrap();
        assert!(out[0].flagged);
    }

    #[test]
    fn invalid_scan() {
        let cfg = StarkScanConfig { step_mhz: 0.0, ..StarkScanConfig::default() };
        assert!(stark_shift_scan(&[1.0], &cfg, &mut rng_from_seed(0)).is_err());
    }
}
