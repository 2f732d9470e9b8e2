use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OccupancyState;
use crate::{Element, Error, PerElement, Result, SimRng};

/// Measured image-to-image loss with the other element's MOT off
/// (value, 1σ uncertainty).
pub const REFERENCE_BASELINE_LOSS: PerElement<(f64, f64)> = PerElement { rb: (0.093, 0.020), cs: (0.109, 0.032) };
/// Measured image-to-image loss while the other element is reloaded.
pub const REFERENCE_RELOAD_LOSS: PerElement<(f64, f64)> = PerElement { rb: (0.095, 0.013), cs: (0.104, 0.032) };

/// Loss channels for trapped atoms.
///
/// `cycle_loss` is the intrinsic probability of losing an atom between two
/// consecutive images (imaging heating, background collisions during one
/// cycle). `crosstalk` is the extra loss caused by the other element's MOT
/// and cooling light during its reload. `lifetime_s` drives [`hold_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossModel {
    pub cycle_loss: PerElement<f64>,
    pub crosstalk: PerElement<f64>,
    pub lifetime_s: PerElement<f64>,
}

impl Default for LossModel {
    fn default() -> Self {
        Self {
            cycle_loss: PerElement::new(0.095, 0.104),
            crosstalk: PerElement::splat(0.0),
            lifetime_s: PerElement::splat(60.0),
        }
    }
}

impl LossModel {
    pub fn validate(&self) -> Result<()> {
        for e in Element::ALL {
            let p = self.cycle_loss[e] + self.crosstalk[e];
            if !(0.0..=1.0).contains(&self.cycle_loss[e]) || !(0.0..=1.0).contains(&self.crosstalk[e]) || p > 1.0 {
                return Err(Error::Validation(format!("{e} loss probabilities out of range")));
            }
            if !(self.lifetime_s[e] > 0.0) {
                return Err(Error::Validation(format!("{e} lifetime must be positive")));
            }
        }
        Ok(())
    }

    /// Loss probability per cycle for `element`, with or without the other
    /// element being reloaded meanwhile.
    pub fn per_cycle(&self, element: Element, other_reloaded: bool) -> f64 {
        let extra = if other_reloaded { self.crosstalk[element] } else { 0.0 };
        (self.cycle_loss[element] + extra).clamp(0.0, 1.0)
    }
}

pub(crate) fn drop_atoms(state: &mut OccupancyState, element: Element, p_loss: f64, rng: &mut SimRng) {
    for o in state.elements[element].occupied.iter_mut().filter(|o| **o) {
        if rng.random_bool(p_loss) {
            *o = false;
        }
    }
}

/// Exponential vacuum-limited loss during an idle hold.
pub fn hold_loss(state: &OccupancyState, duration_s: f64, model: &LossModel, rng: &mut SimRng) -> Result<OccupancyState> {
    if !(duration_s >= 0.0) {
        return Err(Error::Validation(format!("hold duration must be non-negative, got {duration_s}")));
    }
    let mut next = state.clone();
    for e in Element::ALL {
        let p = 1.0 - (-duration_s / model.lifetime_s[e]).exp();
        drop_atoms(&mut next, e, p, rng);
    }
    next.time_s += duration_s;
    Ok(next)
}

/// Applies one reload cycle of `reloaded` to the atoms of the other element,
/// which stay trapped throughout. The reloaded element itself is not touched.
pub fn reload_cycle_loss(state: &OccupancyState, reloaded: Element, model: &LossModel, rng: &mut SimRng) -> OccupancyState {
    let held = reloaded.other();
    let mut next = state.clone();
    drop_atoms(&mut next, held, model.per_cycle(held, true), rng);
    next
}
