//! Single-atom dynamics in the tweezers: loading, losses, thermometry and
//! Stark-shift spectroscopy.
//!
//! All stochastic operations take the RNG by reference; seeding the RNG
//! fixes the outcome bit for bit.

pub(crate) mod loss;
mod occupancy;
mod stark;
mod thermometry;
mod trap;

pub use loss::{hold_loss, reload_cycle_loss, LossModel, REFERENCE_BASELINE_LOSS, REFERENCE_RELOAD_LOSS};
pub use occupancy::{load_array, load_element, ElementOccupancy, OccupancyState, DEFAULT_LOAD_PROBABILITY};
pub use stark::{stark_shift_scan, ShiftMeasurement, StarkScanConfig};
pub use thermometry::{
    fit_temperature, release_recapture_curve, release_recapture_survival, TemperatureFit, ThermometryFitConfig,
};
pub use trap::{Selectivity, SpeciesTrap, ThermalState, TrapPhysics, BOLTZMANN, GRAVITY};
