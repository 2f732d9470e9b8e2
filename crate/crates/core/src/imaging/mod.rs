//! Fluorescence image synthesis and single-atom detection.
//!
//! Each element is imaged on its own wavelength channel, so a frame only
//! ever contains light from atoms of its channel element.

mod bimodal;

use std::io::Write;

use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

pub use bimodal::{
    classification_error, detect, fit_bimodal, fit_thresholds, nominal_threshold, write_histogram_csv,
    write_thresholds_csv, BimodalFit,
};

use crate::dynamics::OccupancyState;
use crate::geometry::{Site, SiteMap};
use crate::pgm::write_pgm_plain;
use crate::{Element, Error, PerElement, Result, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionModel {
    /// Mean photoelectrons collected from one atom during the exposure.
    pub signal: PerElement<f64>,
    /// Mean background photoelectrons inside one site ROI.
    pub background: PerElement<f64>,
    pub psf_sigma_um: f64,
    pub pixel_um: f64,
    /// ROI side length in pixels (odd).
    pub roi_px: usize,
    pub exposure_ms: f64,
    /// Pixels of padding around the outermost sites.
    pub margin_px: usize,
    /// Electron-multiplying gain; `None` disables gain noise.
    pub emccd_gain: Option<f64>,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            signal: PerElement::splat(150.0),
            background: PerElement::splat(8.0),
            psf_sigma_um: 0.5,
            pixel_um: 1.25,
            roi_px: 3,
            exposure_ms: 40.0,
            margin_px: 4,
            emccd_gain: None,
        }
    }
}

impl DetectionModel {
    pub fn validate(&self) -> Result<()> {
        for e in Element::ALL {
            if !(self.signal[e] >= 0.0 && self.signal[e].is_finite()) {
                return Err(Error::Validation(format!("{e} signal must be finite and non-negative")));
            }
            if !(self.background[e] >= 0.0 && self.background[e].is_finite()) {
                return Err(Error::Validation(format!("{e} background must be finite and non-negative")));
            }
        }
        if !(self.psf_sigma_um > 0.0 && self.pixel_um > 0.0 && self.exposure_ms > 0.0) {
            return Err(Error::Validation("PSF width, pixel size and exposure must be positive".into()));
        }
        if self.roi_px % 2 == 0 {
            return Err(Error::Validation(format!("ROI must have odd side length, got {}", self.roi_px)));
        }
        if let Some(g) = self.emccd_gain {
            if !(g > 0.0) {
                return Err(Error::Validation("EMCCD gain must be positive".into()));
            }
        }
        Ok(())
    }

    fn background_per_pixel(&self, element: Element) -> f64 {
        self.background[element] / (self.roi_px * self.roi_px) as f64
    }

    /// Fraction of one atom's light falling inside its ROI.
    pub fn roi_fraction(&self) -> f64 {
        let half = self.roi_px as f64 * self.pixel_um / 2.0;
        erf(half / (self.psf_sigma_um * std::f64::consts::SQRT_2)).powi(2)
    }

    /// Expected ROI counts for an empty and an occupied site.
    pub fn expected_roi_counts(&self, element: Element) -> (f64, f64) {
        let bg = self.background[element];
        (bg, bg + self.signal[element] * self.roi_fraction())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub channel: Element,
    pub exposure_ms: f64,
    pub pixel_um: f64,
    /// Position of the centre of pixel (0, 0), µm.
    pub origin_um: (f64, f64),
    pub width: usize,
    pub height: usize,
    /// Row-major photoelectron counts; row index grows with y.
    pub pixels: Vec<u32>,
}

impl Frame {
    /// Blank frame covering every site of `map` plus a margin.
    pub fn blank(map: &SiteMap, channel: Element, model: &DetectionModel) -> Self {
        let p = model.pixel_um;
        let m = model.margin_px as f64;
        let (min_x, min_y, width, height) = match map.bounding_box() {
            Some(b) => (
                b.min_x,
                b.min_y,
                ((b.max_x - b.min_x) / p).ceil() as usize + 1,
                ((b.max_y - b.min_y) / p).ceil() as usize + 1,
            ),
            None => (0.0, 0.0, 1, 1),
        };
        let width = width + 2 * model.margin_px;
        let height = height + 2 * model.margin_px;
        Self {
            channel,
            exposure_ms: model.exposure_ms,
            pixel_um: p,
            origin_um: (min_x - m * p, min_y - m * p),
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u32) {
        self.pixels[row * self.width + col] = value;
    }

    /// Pixel containing a position, as signed (row, col).
    pub fn pixel_of(&self, x: f64, y: f64) -> (i64, i64) {
        let col = ((x - self.origin_um.0) / self.pixel_um).round() as i64;
        let row = ((y - self.origin_um.1) / self.pixel_um).round() as i64;
        (row, col)
    }

    pub fn write_pgm(&self, out: impl Write) -> Result<()> {
        let max = self.pixels.iter().copied().max().unwrap_or(0).max(1);
        write_pgm_plain(out, self.width, self.height, &self.pixels, max)
    }
}

fn psf_integral(center: f64, lo: f64, hi: f64, sigma: f64) -> f64 {
    let s = sigma * std::f64::consts::SQRT_2;
    0.5 * (erf((hi - center) / s) - erf((lo - center) / s))
}

/// Simulated fluorescence image of one element channel.
pub fn synth_frame(
    state: &OccupancyState,
    map: &SiteMap,
    channel: Element,
    model: &DetectionModel,
    rng: &mut SimRng,
) -> Result<Frame> {
    model.validate()?;
    let mut frame = Frame::blank(map, channel, model);
    let p = model.pixel_um;
    let mut expected = vec![model.background_per_pixel(channel); frame.pixels.len()];
    let reach = (4.0 * model.psf_sigma_um / p).ceil() as i64 + 1;
    let occ = state.get(channel);
    for (&id, _) in occ.site_ids.iter().zip(&occ.occupied).filter(|(_, o)| **o) {
        let site = map
            .get(id)
            .ok_or_else(|| Error::Validation(format!("occupied site {id} is not in the site map")))?;
        let (r0, c0) = frame.pixel_of(site.x, site.y);
        for r in (r0 - reach).max(0)..=(r0 + reach).min(frame.height as i64 - 1) {
            let yc = frame.origin_um.1 + r as f64 * p;
            let fy = psf_integral(site.y, yc - p / 2.0, yc + p / 2.0, model.psf_sigma_um);
            for c in (c0 - reach).max(0)..=(c0 + reach).min(frame.width as i64 - 1) {
                let xc = frame.origin_um.0 + c as f64 * p;
                let fx = psf_integral(site.x, xc - p / 2.0, xc + p / 2.0, model.psf_sigma_um);
                expected[r as usize * frame.width + c as usize] += model.signal[channel] * fx * fy;
            }
        }
    }
    for (px, &mean) in frame.pixels.iter_mut().zip(&expected) {
        let n = if mean > 0.0 {
            Poisson::new(mean).map_err(|e| Error::Validation(e.to_string()))?.sample(rng) as u64
        } else {
            0
        };
        *px = match model.emccd_gain {
            Some(g) if n > 0 => {
                let amplified: f64 = Gamma::new(n as f64, g).map_err(|e| Error::Validation(e.to_string()))?.sample(rng);
                (amplified / g).round() as u32
            }
            _ => n as u32,
        };
    }
    Ok(frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteCount {
    pub site_id: u32,
    pub counts: u64,
    /// Part of the ROI fell outside the frame.
    pub clipped: bool,
}

/// Sums each channel site's ROI.
pub fn site_counts(frame: &Frame, map: &SiteMap, model: &DetectionModel) -> Vec<SiteCount> {
    let sites: Vec<&Site> = map.sites_of(frame.channel).collect();
    roi_counts(frame, &sites, model.roi_px)
}

fn roi_counts(frame: &Frame, sites: &[&Site], roi_px: usize) -> Vec<SiteCount> {
    let half = (roi_px / 2) as i64;
    sites
        .iter()
        .map(|s| {
            let (r0, c0) = frame.pixel_of(s.x, s.y);
            let mut counts = 0u64;
            let mut clipped = false;
            for r in r0 - half..=r0 + half {
                for c in c0 - half..=c0 + half {
                    if r < 0 || c < 0 || r >= frame.height as i64 || c >= frame.width as i64 {
                        clipped = true;
                    } else {
                        counts += frame.get(r as usize, c as usize) as u64;
                    }
                }
            }
            SiteCount { site_id: s.id, counts, clipped }
        })
        .collect()
}
