use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::trap::{SpeciesTrap, BOLTZMANN, GRAVITY};
use crate::{rng_from_seed, Error, Result, SimRng};

/// Standard-normal phase-space draws, rescaled to a temperature on demand so
/// that curves at different temperatures share the same random numbers.
struct PhaseSpaceDraws {
    z: Vec<[f64; 6]>,
}

impl PhaseSpaceDraws {
    fn new(n: usize, rng: &mut SimRng) -> Self {
        let z = (0..n)
            .map(|_| {
                let mut a = [0.0; 6];
                for v in a.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
                a
            })
            .collect();
        Self { z }
    }

    /// Survival fraction after each release time (µs), counting only atoms
    /// that start bound.
    fn curve(&self, temperature_uk: f64, trap: &SpeciesTrap, times_us: &[f64]) -> Vec<f64> {
        let m = trap.mass_kg();
        let kt = temperature_uk * 1e-6 * BOLTZMANN;
        let sr = (kt / (m * trap.omega_r().powi(2))).sqrt();
        let sz = (kt / (m * trap.omega_z().powi(2))).sqrt();
        let sv = (kt / m).sqrt();
        let mut bound = 0usize;
        let mut kept = vec![0usize; times_us.len()];
        for z in &self.z {
            let (x, y, zz) = (z[0] * sr, z[1] * sr, z[2] * sz);
            let (vx, vy, vz) = (z[3] * sv, z[4] * sv, z[5] * sv);
            let kinetic = 0.5 * m * (vx * vx + vy * vy + vz * vz);
            if kinetic + trap.potential(x, y, zz) >= 0.0 {
                continue;
            }
            bound += 1;
            for (t_us, k) in times_us.iter().zip(kept.iter_mut()) {
                let t = t_us * 1e-6;
                let (x1, y1, z1) = (x + vx * t, y + vy * t - 0.5 * GRAVITY * t * t, zz + vz * t);
                // The trap is switched back on instantly; velocities are unchanged.
                let vy1 = vy - GRAVITY * t;
                let kinetic = 0.5 * m * (vx * vx + vy1 * vy1 + vz * vz);
                if kinetic + trap.potential(x1, y1, z1) < 0.0 {
                    *k += 1;
                }
            }
        }
        if bound == 0 {
            return vec![0.0; times_us.len()];
        }
        kept.into_iter().map(|k| k as f64 / bound as f64).collect()
    }
}

/// Monte Carlo recapture probability after switching the trap off for
/// `t_release_us`. Atoms are drawn from the harmonic thermal distribution and
/// conditioned on being bound in the full Gaussian potential.
pub fn release_recapture_survival(
    temperature_uk: f64,
    trap: &SpeciesTrap,
    t_release_us: f64,
    n_mc: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    Ok(release_recapture_curve(temperature_uk, trap, &[t_release_us], n_mc, rng)?[0])
}

/// Recapture curve over several release times using one set of atoms.
pub fn release_recapture_curve(
    temperature_uk: f64,
    trap: &SpeciesTrap,
    times_us: &[f64],
    n_mc: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    if !(temperature_uk > 0.0) {
        return Err(Error::Validation(format!("temperature must be positive, got {temperature_uk}")));
    }
    if n_mc < 100 {
        return Err(Error::Validation(format!("need at least 100 Monte Carlo samples, got {n_mc}")));
    }
    if times_us.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Validation("release times must be non-negative".into()));
    }
    Ok(PhaseSpaceDraws::new(n_mc, rng).curve(temperature_uk, trap, times_us))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermometryFitConfig {
    pub t_min_uk: f64,
    pub t_max_uk: f64,
    pub grid_points: usize,
    pub n_mc: usize,
    pub seed: u64,
    /// Fits whose RMS residual exceeds this are rejected.
    pub max_rms_residual: f64,
}

impl Default for ThermometryFitConfig {
    fn default() -> Self {
        Self { t_min_uk: 1.0, t_max_uk: 500.0, grid_points: 40, n_mc: 10_000, seed: 0, max_rms_residual: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    pub temperature_uk: f64,
    pub rms_residual: f64,
    /// The best grid point was an end of the search range.
    pub at_bound: bool,
}

/// Least-squares temperature from a measured (release time µs, survival) curve.
pub fn fit_temperature(curve: &[(f64, f64)], trap: &SpeciesTrap, config: &ThermometryFitConfig) -> Result<TemperatureFit> {
    if curve.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 release times, got {}", curve.len())));
    }
    if curve.iter().any(|&(t, s)| !(t >= 0.0) || !(0.0..=1.0).contains(&s)) {
        return Err(Error::Fit("survival values must lie in [0, 1] at non-negative times".into()));
    }
    if !(config.t_min_uk > 0.0 && config.t_max_uk > config.t_min_uk) || config.grid_points < 3 {
        return Err(Error::Validation(format!("invalid fit range {config:?}")));
    }
    let times: Vec<f64> = curve.iter().map(|p| p.0).collect();
    let draws = PhaseSpaceDraws::new(config.n_mc, &mut rng_from_seed(config.seed));
    let sse = |t: f64| -> f64 {
        draws.curve(t, trap, &times).iter().zip(curve).map(|(m, &(_, s))| (m - s).powi(2)).sum()
    };

    let ratio = (config.t_max_uk / config.t_min_uk).ln() / (config.grid_points - 1) as f64;
    let grid: Vec<f64> = (0..config.grid_points).map(|k| config.t_min_uk * (ratio * k as f64).exp()).collect();
    let costs: Vec<f64> = grid.iter().map(|&t| sse(t)).collect();
    let best = costs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");

    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (sse(c.exp()), sse(d.exp()));
    for _ in 0..40 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sse(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sse(d.exp());
        }
    }
    let (mut t_fit, mut cost) = if fc <= fd { (c.exp(), fc) } else { (d.exp(), fd) };
    if costs[best] < cost {
        t_fit = grid[best];
        cost = costs[best];
    }
    let rms = (cost / curve.len() as f64).sqrt();
    if rms > config.max_rms_residual {
        return Err(Error::Fit(format!("curve not described by the thermal model (RMS residual {rms:.3})")));
    }
    Ok(TemperatureFit { temperature_uk: t_fit, rms_residual: rms, at_bound: best == 0 || best == grid.len() - 1 })
}
