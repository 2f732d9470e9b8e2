//! JSON experiment configuration shared by every front-end command.
//!
//! Every section is optional and falls back to the library defaults.
//! Unknown keys are rejected so that typos surface as errors.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aod::Calibration;
use crate::dynamics::{
    LossModel, Selectivity, SpeciesTrap, ThermalState, ThermometryFitConfig, TrapPhysics, DEFAULT_LOAD_PROBABILITY,
};
use crate::geometry::{make_interleaved_dual_lattice, make_rect_lattice, parse_bitmap, preset_geometry, read_sites_csv, Preset, SiteMap};
use crate::holography::{HoloGrid, WgsConfig};
use crate::imaging::DetectionModel;
use crate::sequencer::{default_sequence, ContinuousConfig, SequenceStep, World};
use crate::{Element, Error, PerElement, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    /// Cs rectangular lattice with Rb at the plaquette centres.
    Interleaved { cs_rows: usize, cs_cols: usize, spacing_um: f64 },
    /// Single-element rectangular lattice centred on the origin.
    Rect { element: Element, rows: usize, cols: usize, spacing_um: f64 },
    Preset { preset: Preset },
    /// Bitmap text file, resolved relative to the config file.
    BitmapFile { path: PathBuf, spacing_um: f64 },
    /// `id,element,x_um,y_um` table, resolved relative to the config file.
    SitesCsv { path: PathBuf },
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig::Interleaved { cs_rows: 17, cs_cols: 16, spacing_um: 5.0 }
    }
}

impl GeometryConfig {
    pub fn build(&self, base_dir: &Path) -> Result<SiteMap> {
        match self {
            GeometryConfig::Interleaved { cs_rows, cs_cols, spacing_um } => {
                make_interleaved_dual_lattice(*cs_rows, *cs_cols, *spacing_um)
            }
            GeometryConfig::Rect { element, rows, cols, spacing_um } => {
                make_rect_lattice(*element, *rows, *cols, *spacing_um, (0.0, 0.0))
            }
            GeometryConfig::Preset { preset } => preset_geometry(preset),
            GeometryConfig::BitmapFile { path, spacing_um } => {
                let text = fs::read_to_string(base_dir.join(path))?;
                parse_bitmap(&text, *spacing_um)
            }
            GeometryConfig::SitesCsv { path } => {
                let f = fs::File::open(base_dir.join(path))?;
                read_sites_csv(std::io::BufReader::new(f))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackConfig {
    pub rounds: usize,
    /// Relative 1σ multiplicative noise on every shift measurement.
    pub noise_rel: f64,
    /// Relative 1σ spread of the static per-site intensity→shift transfer.
    pub transfer_spread: f64,
    /// Shift per unit tweezer intensity, MHz.
    pub kappa_mhz: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self { rounds: 5, noise_rel: 0.01, transfer_spread: 0.05, kappa_mhz: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoloConfig {
    pub element: Element,
    pub grid: HoloGrid,
    pub wgs: WgsConfig,
    /// Noll-indexed coefficients (index 1 first) of an aberration to correct.
    pub aberration: Vec<f64>,
    pub feedback: Option<FeedbackConfig>,
}

impl Default for HoloConfig {
    fn default() -> Self {
        Self {
            element: Element::Cs,
            grid: HoloGrid::default(),
            wgs: WgsConfig::default(),
            aberration: Vec::new(),
            feedback: Some(FeedbackConfig::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AodConfig {
    pub calibration: Calibration,
    pub feedback_rounds: usize,
    /// Relative 1σ of the injected per-site depth disturbance.
    pub disturbance_rel: f64,
}

impl Default for AodConfig {
    fn default() -> Self {
        Self { calibration: Calibration::default(), feedback_rounds: 5, disturbance_rel: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSpec {
    pub waist_um: f64,
    pub power_mw: f64,
    pub trap_frequency_khz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub traps: PerElement<TrapSpec>,
    pub selectivity: Selectivity,
    pub p_load: PerElement<f64>,
    pub thermal: ThermalState,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            traps: PerElement::new(
                TrapSpec { waist_um: 0.8, power_mw: 1.0, trap_frequency_khz: 100.0 },
                TrapSpec { waist_um: 0.8, power_mw: 1.0, trap_frequency_khz: 60.0 },
            ),
            selectivity: Selectivity::default(),
            p_load: PerElement::splat(DEFAULT_LOAD_PROBABILITY),
            thermal: ThermalState::default(),
        }
    }
}

impl PhysicsConfig {
    pub fn trap_physics(&self) -> Result<TrapPhysics> {
        let trap = |e: Element| {
            let s = self.traps[e];
            SpeciesTrap::from_trap_frequency(e, s.waist_um, s.power_mw, 2.0 * PI * 1e3 * s.trap_frequency_khz)
        };
        TrapPhysics::new(PerElement::new(trap(Element::Rb)?, trap(Element::Cs)?), self.selectivity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermometryConfig {
    pub release_times_us: Vec<f64>,
    pub n_mc: usize,
    pub fit: ThermometryFitConfig,
}

impl Default for ThermometryConfig {
    fn default() -> Self {
        Self {
            release_times_us: (0..=12).map(|k| 5.0 * k as f64).collect(),
            n_mc: 10_000,
            fit: ThermometryFitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Repetitions of the sequence.
    pub shots: usize,
    pub sequence: Vec<SequenceStep>,
    /// Spurious shallow Cs traps removed by the blowout step.
    pub phantom_cs_sites: usize,
    pub thermometry: Option<ThermometryConfig>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { shots: 100, sequence: default_sequence(), phantom_cs_sites: 0, thermometry: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub holography: HoloConfig,
    pub aod: AodConfig,
    pub physics: PhysicsConfig,
    pub loss: LossModel,
    pub detection: DetectionModel,
    pub simulate: SimulateConfig,
    pub continuous: ContinuousConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; errors carry the path, line and column.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
        })
    }

    pub fn world(&self, map: SiteMap) -> Result<World> {
        let world = World {
            map,
            physics: self.physics.trap_physics()?,
            loss: self.loss,
            detection: self.detection,
            p_load: self.physics.p_load,
            phantom_cs_sites: self.simulate.phantom_cs_sites,
        };
        world.validate()?;
        Ok(world)
    }
}
