//! SLM hologram synthesis and evaluation.
//!
//! The SLM sits in the Fourier plane of the objective, so the focal field is
//! a single unitary 2D FFT of `aperture · exp(i·phase)`. Focal-plane arrays
//! are stored centered: pixel (N/2, N/2) is the optical axis.

mod aberration;
mod feedback;
mod fft;
mod wgs;
mod zernike;

use std::f64::consts::TAU;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::SiteMap;
use crate::{pgm, Element, Error, Result};

pub use aberration::{aberration_correct, AberrationFit, FocalProbe, HiddenAberrationSystem, ScanConfig};
pub use feedback::{atom_feedback_homogenize, FeedbackResult, ShiftProbe, SimulatedStarkProbe};
pub use fft::Fft2;
pub use wgs::{rms_nonuniformity, Wgs, WgsConfig, WgsReport};
pub use zernike::{noll_to_nm, zernike_basis, zernike_phase, zernike_value, ZernikeCoeffs, DEFAULT_NOLL_TERMS};

/// Default propagation grid size.
pub const DEFAULT_GRID: usize = 512;
/// Side of the square pixel window integrated for each trap.
pub const SAMPLE_WINDOW: usize = 3;

/// SLM phase pattern in radians, every value in [0, 2π).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    values: Array2<f64>,
}

impl PhaseMask {
    /// Wraps arbitrary radian values into [0, 2π).
    pub fn from_radians(mut values: Array2<f64>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != cols {
            return Err(Error::Validation(format!("phase mask must be square, got {rows}x{cols}")));
        }
        values.mapv_inplace(wrap_phase);
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: Array2::zeros((n, n)) }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Pointwise sum, wrapped.
    pub fn add(&self, other: &Array2<f64>) -> Result<PhaseMask> {
        if other.dim() != self.values.dim() {
            return Err(Error::Validation("phase arrays differ in shape".into()));
        }
        PhaseMask::from_radians(&self.values + other)
    }

    /// 16-bit grayscale PGM, [0, 2π) mapped linearly onto [0, 65535].
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let n = self.n();
        let data: Vec<u16> = self.values.iter().map(|&p| phase_to_level(p)).collect();
        pgm::write_pgm16(path, n, n, &data)
    }

    pub fn read_pgm(path: &Path) -> Result<PhaseMask> {
        let img = pgm::read_pgm16(path)?;
        if img.width != img.height {
            return Err(Error::Validation(format!("phase PGM must be square, got {}x{}", img.width, img.height)));
        }
        let values = img.data.iter().map(|&v| level_to_phase(v)).collect();
        let values = Array2::from_shape_vec((img.height, img.width), values).expect("PGM size checked");
        Ok(PhaseMask { values })
    }
}

pub fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Phase to PGM level: round(φ/2π · 65536) mod 65536.
pub fn phase_to_level(p: f64) -> u16 {
    ((wrap_phase(p) / TAU * 65536.0).round() as u32 % 65536) as u16
}

pub fn level_to_phase(v: u16) -> f64 {
    v as f64 / 65536.0 * TAU
}

/// Uniform disk inscribed in the N×N SLM grid.
pub fn circular_aperture(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(r, c)| if disk_radius(n, r, c) <= 1.0 { 1.0 } else { 0.0 })
}

/// Normalized radius of pixel (r, c) relative to the inscribed disk.
pub(crate) fn disk_radius(n: usize, r: usize, c: usize) -> f64 {
    let half = n as f64 / 2.0;
    let center = (n as f64 - 1.0) / 2.0;
    ((r as f64 - center) / half).hypot((c as f64 - center) / half)
}

/// A trap site placed on the focal-plane pixel grid (centered coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub id: u32,
    pub row: usize,
    pub col: usize,
}

/// Maps µm focal-plane coordinates onto the propagation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoloGrid {
    pub n: usize,
    /// Focal-plane size of one pixel in µm.
    pub pixel_um: f64,
}

impl Default for HoloGrid {
    fn default() -> Self {
        // 5 µm lattice period = 8 pixels.
        Self { n: DEFAULT_GRID, pixel_um: 0.625 }
    }
}

impl HoloGrid {
    /// Projects the sites of one element onto pixels. Sites must land within
    /// a quarter pixel of a pixel center, stay clear of the grid edge and
    /// keep their sampling windows disjoint.
    pub fn project(&self, map: &SiteMap, element: Element) -> Result<Vec<Target>> {
        let n = self.n;
        if n < 16 || n % 2 != 0 {
            return Err(Error::Validation(format!("grid size must be even and >= 16, got {n}")));
        }
        let half = (n / 2) as f64;
        let margin = (SAMPLE_WINDOW / 2) as f64;
        let mut targets = Vec::new();
        for s in map.sites_of(element) {
            let fc = s.x / self.pixel_um + half;
            let fr = s.y / self.pixel_um + half;
            let (c, r) = (fc.round(), fr.round());
            if (fc - c).abs() > 0.25 || (fr - r).abs() > 0.25 {
                return Err(Error::Validation(format!(
                    "site {} at ({}, {}) µm is not representable on a {} µm pixel grid",
                    s.id, s.x, s.y, self.pixel_um
                )));
            }
            if c < margin || r < margin || c > n as f64 - 1.0 - margin || r > n as f64 - 1.0 - margin {
                return Err(Error::Validation(format!("site {} falls outside the {n}x{n} grid", s.id)));
            }
            targets.push(Target { id: s.id, row: r as usize, col: c as usize });
        }
        if targets.is_empty() {
            return Err(Error::Validation(format!("no {element} sites to place on the grid")));
        }
        for (i, a) in targets.iter().enumerate() {
            for b in &targets[i + 1..] {
                if a.row.abs_diff(b.row) < SAMPLE_WINDOW && a.col.abs_diff(b.col) < SAMPLE_WINDOW {
                    return Err(Error::Validation(format!(
                        "sites {} and {} are closer than the {SAMPLE_WINDOW}-pixel sampling window",
                        a.id, b.id
                    )));
                }
            }
        }
        Ok(targets)
    }
}

/// Focal-plane intensity plus the per-target window integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMap {
    pub values: Array2<f64>,
    pub samples: Vec<(u32, f64)>,
}

impl IntensityMap {
    pub fn total_power(&self) -> f64 {
        self.values.sum()
    }

    pub fn sample_values(&self) -> Vec<f64> {
        self.samples.iter().map(|&(_, v)| v).collect()
    }

    /// Per-site table `site_id,intensity`.
    pub fn write_samples_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "site_id,intensity")?;
        for (id, v) in &self.samples {
            writeln!(out, "{id},{v:e}")?;
        }
        Ok(())
    }

    /// 16-bit PGM scaled so the brightest pixel maps to 65535.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
        let data: Vec<u16> = self.values.iter().map(|&v| (v * scale).round() as u16).collect();
        let (h, w) = self.values.dim();
        pgm::write_pgm16(path, w, h, &data)
    }
}

/// Raw (unshifted) FFT index of a centered pixel coordinate.
pub(crate) fn raw_index(n: usize, row: usize, col: usize) -> usize {
    ((row + n / 2) % n) * n + (col + n / 2) % n
}

/// Sum of |field|² over the sampling window of a centered pixel, with the
/// field in raw FFT layout.
pub(crate) fn window_sum(field: &[Complex64], n: usize, row: usize, col: usize) -> f64 {
    let h = (SAMPLE_WINDOW / 2) as isize;
    let mut acc = 0.0;
    for dr in -h..=h {
        for dc in -h..=h {
            let r = (row as isize + dr).rem_euclid(n as isize) as usize;
            let c = (col as isize + dc).rem_euclid(n as isize) as usize;
            acc += field[raw_index(n, r, c)].norm_sqr();
        }
    }
    acc
}

pub(crate) fn slm_field(phase: &Array2<f64>, aperture: &Array2<f64>) -> Vec<Complex64> {
    phase
        .iter()
        .zip(aperture.iter())
        .map(|(&p, &a)| Complex64::from_polar(a, p))
        .collect()
}

/// Focal-plane intensity of `aperture · exp(i·phase)`, sampled at `targets`.
pub fn far_field(mask: &PhaseMask, aperture: &Array2<f64>, targets: &[Target]) -> Result<IntensityMap> {
    let mut fft = Fft2::new(mask.n());
    far_field_with(&mut fft, mask.values(), aperture, targets)
}

pub(crate) fn far_field_with(
    fft: &mut Fft2,
    phase: &Array2<f64>,
    aperture: &Array2<f64>,
    targets: &[Target],
) -> Result<IntensityMap> {
    let n = phase.nrows();
    if phase.dim() != aperture.dim() || phase.nrows() != phase.ncols() {
        return Err(Error::Validation(format!(
            "mask {:?} and aperture {:?} must be the same square shape",
            phase.dim(),
            aperture.dim()
        )));
    }
    if fft.n() != n {
        return Err(Error::Validation(format!("FFT planned for {} but grid is {n}", fft.n())));
    }
    if let Some(t) = targets.iter().find(|t| t.row >= n || t.col >= n) {
        return Err(Error::Validation(format!("target {} lies outside the grid", t.id)));
    }
    let mut field = slm_field(phase, aperture);
    fft.forward(&mut field);
    let values = Array2::from_shape_fn((n, n), |(r, c)| field[raw_index(n, r, c)].norm_sqr());
    let samples = targets.iter().map(|t| (t.id, window_sum(&field, n, t.row, t.col))).collect();
    Ok(IntensityMap { values, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_rect_lattice;
    use std::f64::consts::PI;

    /// Direct O(N⁴) DFT of the SLM field evaluated at one centered pixel.
    fn direct_dft_intensity(phase: &Array2<f64>, aperture: &Array2<f64>, row: usize, col: usize) -> f64 {
        let n = phase.nrows();
        let u = (row + n / 2) % n;
        let v = (col + n / 2) % n;
        let mut acc = Complex64::default();
        for r in 0..n {
            for c in 0..n {
                let arg = -2.0 * PI * ((u * r) as f64 + (v * c) as f64) / n as f64;
                acc += Complex64::from_polar(aperture[[r, c]], phase[[r, c]]) * Complex64::from_polar(1.0, arg);
            }
        }
        (acc / n as f64).norm_sqr()
    }

    fn grating_4x4(n: usize) -> (PhaseMask, Vec<Target>) {
        // Sum of plane waves toward a 4x4 grid of spots, phase only.
        let spots: Vec<(isize, isize)> = (0..4).flat_map(|i| (0..4).map(move |j| (6 * i - 9, 6 * j - 9))).collect();
        let phase = Array2::from_shape_fn((n, n), |(r, c)| {
            let mut f = Complex64::default();
            for (k, &(sr, sc)) in spots.iter().enumerate() {
                let arg = 2.0 * PI * (sr as f64 * r as f64 + sc as f64 * c as f64) / n as f64 + 0.7 * k as f64;
                f += Complex64::from_polar(1.0, arg);
            }
            f.arg()
        });
        let targets = spots
            .iter()
            .enumerate()
            .map(|(k, &(sr, sc))| Target {
                id: k as u32,
                row: (n as isize / 2 + sr) as usize,
                col: (n as isize / 2 + sc) as usize,
            })
            .collect();
        (PhaseMask::from_radians(phase).unwrap(), targets)
    }

    #[test]
    fn flat_phase_focuses_on_axis() {
        let n = 64;
        let aperture = circular_aperture(n);
        let out = far_field(&PhaseMask::zeros(n), &aperture, &[]).unwrap();
        let (mut best, mut at) = (0.0, (0, 0));
        for ((r, c), &v) in out.values.indexed_iter() {
            if v > best {
                best = v;
                at = (r, c);
            }
        }
        assert_eq!(at, (n / 2, n / 2));
    }

    #[test]
    fn power_is_conserved() {
        let n = 64;
        let aperture = circular_aperture(n);
        let (mask, targets) = grating_4x4(n);
        let out = far_field(&mask, &aperture, &targets).unwrap();
        let input: f64 = aperture.iter().map(|a| a * a).sum();
        assert!((out.total_power() - input).abs() / input < 1e-10);
    }

    #[test]
    fn grating_matches_direct_dft() {
        let n = 64;
        let aperture = circular_aperture(n);
        let (mask, targets) = grating_4x4(n);
        let out = far_field(&mask, &aperture, &targets).unwrap();
        for t in &targets {
            let direct = direct_dft_intensity(mask.values(), &aperture, t.row, t.col);
            assert!((out.values[[t.row, t.col]] - direct).abs() < 1e-8, "target {}", t.id);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let err = far_field(&PhaseMask::zeros(32), &circular_aperture(16), &[]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn projection() {
        let grid = HoloGrid { n: 64, pixel_um: 1.25 };
        let map = make_rect_lattice(Element::Cs, 2, 2, 5.0, (0.0, 0.0)).unwrap();
        // ±2.5 µm is exactly two pixels either side of the axis.
        let t = grid.project(&map, Element::Cs).unwrap();
        assert_eq!((t[0].row, t[0].col), (30, 30));
        assert_eq!((t[3].row, t[3].col), (34, 34));
        let off = make_rect_lattice(Element::Cs, 1, 2, 1.7, (0.0, 0.0)).unwrap();
        assert!(grid.project(&off, Element::Cs).is_err());
        assert!(grid.project(&map, Element::Rb).is_err());
    }

    #[test]
    fn pgm_levels() {
        assert_eq!(phase_to_level(0.0), 0);
        assert_eq!(phase_to_level(PI), 32768);
        assert_eq!(phase_to_level(TAU - 1e-9), 0);
        assert!((level_to_phase(phase_to_level(1.234)) - 1.234).abs() <= TAU / 65536.0);
    }
}
