//! Crossed acousto-optic deflector planning: RF tones, grid formation,
//! amplitude feedback and spatial-filter masks.
//!
//! Trap depth at grid site (i, j) is modeled as ∝ (a_i · b_j)², the product
//! of the diffraction efficiencies of the two tones.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryMask, Site, SiteMap};
use crate::holography::rms_nonuniformity;
use crate::{Element, Error, Result};

/// Target sites must lie this close to a grid intersection.
pub const INTERSECTION_TOL_UM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }
}

/// Linear frequency → position map of one AOD axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    pub um_per_mhz: f64,
    /// Position of the 0 MHz (centre) tone.
    pub offset_um: f64,
    pub min_spacing_mhz: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self { um_per_mhz: 2.0, offset_um: 0.0, min_spacing_mhz: 0.5 }
    }
}

impl Calibration {
    pub fn position(&self, freq_mhz: f64) -> f64 {
        self.offset_um + self.um_per_mhz * freq_mhz
    }

    pub fn frequency(&self, position_um: f64) -> f64 {
        (position_um - self.offset_um) / self.um_per_mhz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub freq_mhz: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneSet {
    pub axis: Axis,
    tones: Vec<Tone>,
    pub calibration: Calibration,
}

impl ToneSet {
    pub fn new(axis: Axis, tones: Vec<Tone>, calibration: Calibration) -> Result<Self> {
        if !(calibration.um_per_mhz != 0.0 && calibration.um_per_mhz.is_finite()) {
            return Err(Error::Planning("calibration slope must be finite and non-zero".into()));
        }
        for w in tones.windows(2) {
            let gap = w[1].freq_mhz - w[0].freq_mhz;
            if !(gap > 0.0) {
                return Err(Error::Planning(format!("{} tones must be strictly increasing", axis.as_str())));
            }
            if gap < calibration.min_spacing_mhz - 1e-12 {
                return Err(Error::Planning(format!(
                    "{} tones at {:.4} and {:.4} MHz are closer than {} MHz",
                    axis.as_str(),
                    w[0].freq_mhz,
                    w[1].freq_mhz,
                    calibration.min_spacing_mhz
                )));
            }
        }
        if let Some(t) = tones.iter().find(|t| !(t.amplitude > 0.0 && t.amplitude <= 1.0)) {
            return Err(Error::Planning(format!("tone amplitude {} outside (0, 1]", t.amplitude)));
        }
        Ok(Self { axis, tones, calibration })
    }

    pub fn tones(&self) -> &[Tone] {
        &self.tones
    }

    pub fn len(&self) -> usize {
        self.tones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.tones.iter().map(|t| self.calibration.position(t.freq_mhz)).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.tones.iter().map(|t| t.amplitude).collect()
    }

    /// Σ a², the RF power shared by the tones.
    pub fn total_power(&self) -> f64 {
        self.tones.iter().map(|t| t.amplitude * t.amplitude).sum()
    }

    fn with_amplitudes(&self, amps: &[f64]) -> Self {
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        let tones = self
            .tones
            .iter()
            .zip(amps)
            .map(|(t, a)| Tone { freq_mhz: t.freq_mhz, amplitude: a / norm })
            .collect();
        Self { axis: self.axis, tones, calibration: self.calibration }
    }
}

/// Tones placing deflected beams at `positions_um`, sharing unit RF power.
pub fn tones_for_positions(positions_um: &[f64], axis: Axis, calibration: &Calibration) -> Result<ToneSet> {
    let mut freqs: Vec<f64> = positions_um.iter().map(|&x| calibration.frequency(x)).collect();
    if freqs.iter().any(|f| !f.is_finite()) {
        return Err(Error::Planning("positions map to non-finite frequencies".into()));
    }
    freqs.sort_by(f64::total_cmp);
    let amp = 1.0 / (freqs.len().max(1) as f64).sqrt();
    let tones = freqs.into_iter().map(|freq_mhz| Tone { freq_mhz, amplitude: amp }).collect();
    ToneSet::new(axis, tones, *calibration)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AodGrid {
    pub x: ToneSet,
    pub y: ToneSet,
    /// Kept grid ids; id of (x index i, y index j) is j·|x| + i.
    pub mask: GeometryMask,
}

impl AodGrid {
    pub fn full(x: ToneSet, y: ToneSet) -> Self {
        let n = (x.len() * y.len()) as u32;
        Self { x, y, mask: GeometryMask::new(0..n) }
    }

    pub fn with_mask(x: ToneSet, y: ToneSet, mask: GeometryMask) -> Result<Self> {
        let n = (x.len() * y.len()) as u32;
        if let Some(bad) = mask.keep.iter().find(|&&id| id >= n) {
            return Err(Error::Planning(format!("mask id {bad} outside the {}x{} grid", x.len(), y.len())));
        }
        Ok(Self { x, y, mask })
    }

    pub fn site_id(&self, i: usize, j: usize) -> u32 {
        (j * self.x.len() + i) as u32
    }

    pub fn indices(&self, id: u32) -> (usize, usize) {
        let nx = self.x.len();
        (id as usize % nx, id as usize / nx)
    }

    /// Relative depth (a_i b_j)² of a grid site.
    pub fn depth(&self, id: u32) -> f64 {
        let (i, j) = self.indices(id);
        (self.x.tones[i].amplitude * self.y.tones[j].amplitude).powi(2)
    }
}

/// Rb sites at the kept grid intersections.
pub fn grid_sites(grid: &AodGrid) -> Result<SiteMap> {
    let xs = grid.x.positions();
    let ys = grid.y.positions();
    let sites = grid
        .mask
        .keep
        .iter()
        .map(|&id| {
            let (i, j) = grid.indices(id);
            Site { id, element: Element::Rb, x: xs[i], y: ys[j] }
        })
        .collect();
    let spacing = match (xs.len(), ys.len()) {
        (a, _) if a >= 2 => Some((xs[1] - xs[0]).abs()),
        (_, b) if b >= 2 => Some((ys[1] - ys[0]).abs()),
        _ => None,
    };
    SiteMap::new(sites, spacing)
}

/// One row/column update of the tone amplitudes from per-site shifts,
/// renormalized to unit RF power per axis. Tones without measured sites keep
/// their relative amplitude.
pub fn amplitude_feedback(grid: &AodGrid, shifts: &[(u32, f64)]) -> Result<AodGrid> {
    let mut seen = BTreeMap::new();
    for &(id, s) in shifts {
        if !grid.mask.contains(id) {
            return Err(Error::Measurement(format!("shift reported for masked or unknown site {id}")));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Measurement(format!("site {id} has non-positive shift {s}")));
        }
        if seen.insert(id, s).is_some() {
            return Err(Error::Measurement(format!("duplicate shift for site {id}")));
        }
    }
    if seen.len() != grid.mask.len() {
        return Err(Error::Measurement(format!("expected {} shifts, got {}", grid.mask.len(), seen.len())));
    }
    let mean = seen.values().sum::<f64>() / seen.len().max(1) as f64;
    let (nx, ny) = (grid.x.len(), grid.y.len());
    let mut col = vec![(0.0, 0usize); nx];
    let mut row = vec![(0.0, 0usize); ny];
    for (&id, &s) in &seen {
        let (i, j) = grid.indices(id);
        col[i].0 += s;
        col[i].1 += 1;
        row[j].0 += s;
        row[j].1 += 1;
    }
    let scale = |a: f64, (sum, n): (f64, usize)| if n == 0 { a } else { a * (mean / (sum / n as f64)).sqrt() };
    let ax: Vec<f64> = grid.x.tones.iter().zip(&col).map(|(t, &c)| scale(t.amplitude, c)).collect();
    let ay: Vec<f64> = grid.y.tones.iter().zip(&row).map(|(t, &r)| scale(t.amplitude, r)).collect();
    Ok(AodGrid { x: grid.x.with_amplitudes(&ax), y: grid.y.with_amplitudes(&ay), mask: grid.mask.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeLoopResult {
    pub grid: AodGrid,
    /// RMS spread of the measured shifts before each update and after the last.
    pub trace: Vec<f64>,
}

/// Repeats measure → [`amplitude_feedback`] for `rounds` rounds.
pub fn amplitude_feedback_loop(
    grid: &AodGrid,
    mut measure: impl FnMut(&AodGrid) -> Result<Vec<(u32, f64)>>,
    rounds: usize,
) -> Result<AmplitudeLoopResult> {
    let mut grid = grid.clone();
    let mut trace = Vec::with_capacity(rounds + 1);
    for _ in 0..rounds {
        let shifts = measure(&grid)?;
        trace.push(rms_nonuniformity(&shifts.iter().map(|s| s.1).collect::<Vec<_>>()));
        grid = amplitude_feedback(&grid, &shifts)?;
    }
    let shifts = measure(&grid)?;
    trace.push(rms_nonuniformity(&shifts.iter().map(|s| s.1).collect::<Vec<_>>()));
    Ok(AmplitudeLoopResult { grid, trace })
}

/// Mask keeping exactly the grid intersections that coincide with `target`.
pub fn spatial_filter_plan(target: &SiteMap, grid: &AodGrid) -> Result<GeometryMask> {
    let xs = grid.x.positions();
    let ys = grid.y.positions();
    let nearest = |v: &[f64], p: f64| -> Option<usize> {
        v.iter()
            .enumerate()
            .map(|(k, &q)| (k, (q - p).abs()))
            .filter(|&(_, d)| d <= INTERSECTION_TOL_UM)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
    };
    let mut keep = Vec::with_capacity(target.len());
    let mut offenders = Vec::new();
    for s in target.sites() {
        match (nearest(&xs, s.x), nearest(&ys, s.y)) {
            (Some(i), Some(j)) => keep.push(grid.site_id(i, j)),
            _ => offenders.push(format!("{} ({:.3}, {:.3})", s.id, s.x, s.y)),
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Planning(format!("sites not on any AOD intersection: {}", offenders.join(", "))));
    }
    Ok(GeometryMask::new(keep))
}

/// Writes `axis,freq_MHz,amplitude` for both axes.
pub fn write_tones_csv(grid: &AodGrid, mut out: impl Write) -> Result<()> {
    writeln!(out, "axis,freq_MHz,amplitude")?;
    for set in [&grid.x, &grid.y] {
        for t in &set.tones {
            writeln!(out, "{},{:.9},{:.12}", set.axis.as_str(), t.freq_mhz, t.amplitude)?;
        }
    }
    Ok(())
}
