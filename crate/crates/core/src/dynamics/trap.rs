use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Element, Error, PerElement, Result};

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const GRAVITY: f64 = 9.806_65;

/// Gaussian tweezer for one element. Depth and radial frequency are tied by
/// ω_r = sqrt(4 U0 / (m w0²)); both are stored and always consistent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesTrap {
    pub element: Element,
    pub waist_um: f64,
    pub power_mw: f64,
    depth_uk: f64,
    omega_r: f64,
}

impl SpeciesTrap {
    /// Trap defined by its measured radial frequency (rad/s).
    pub fn from_trap_frequency(element: Element, waist_um: f64, power_mw: f64, omega_r: f64) -> Result<Self> {
        check_positive("waist", waist_um)?;
        check_positive("radial frequency", omega_r)?;
        let w0 = waist_um * 1e-6;
        let depth_j = element.mass_kg() * w0 * w0 * omega_r * omega_r / 4.0;
        Ok(Self { element, waist_um, power_mw, depth_uk: depth_j / BOLTZMANN * 1e6, omega_r })
    }

    /// Trap defined by its depth in µK (energy / k_B).
    pub fn from_depth(element: Element, waist_um: f64, power_mw: f64, depth_uk: f64) -> Result<Self> {
        check_positive("waist", waist_um)?;
        check_positive("depth", depth_uk)?;
        let w0 = waist_um * 1e-6;
        let omega_r = (4.0 * depth_uk * 1e-6 * BOLTZMANN / (element.mass_kg() * w0 * w0)).sqrt();
        Ok(Self { element, waist_um, power_mw, depth_uk, omega_r })
    }

    pub fn depth_uk(&self) -> f64 {
        self.depth_uk
    }

    pub fn depth_joule(&self) -> f64 {
        self.depth_uk * 1e-6 * BOLTZMANN
    }

    /// Radial trap frequency in rad/s.
    pub fn omega_r(&self) -> f64 {
        self.omega_r
    }

    pub fn mass_kg(&self) -> f64 {
        self.element.mass_kg()
    }

    pub fn rayleigh_range_m(&self) -> f64 {
        let w0 = self.waist_um * 1e-6;
        PI * w0 * w0 / (self.element.trap_wavelength_nm() * 1e-9)
    }

    /// Axial frequency of the harmonic approximation, rad/s.
    pub fn omega_z(&self) -> f64 {
        let zr = self.rayleigh_range_m();
        (2.0 * self.depth_joule() / (self.mass_kg() * zr * zr)).sqrt()
    }

    /// Gaussian-beam potential in J at a position in m (z along the beam).
    pub fn potential(&self, x: f64, y: f64, z: f64) -> f64 {
        let zr = self.rayleigh_range_m();
        let w0 = self.waist_um * 1e-6;
        let s = 1.0 + (z / zr).powi(2);
        -self.depth_joule() / s * (-2.0 * (x * x + y * y) / (w0 * w0 * s)).exp()
    }
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} must be positive, got {v}")))
    }
}

/// Depth multiplier of an element in the other element's tweezer, relative
/// to that tweezer's depth for its own element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Selectivity {
    /// Rb in the 910 nm (Cs) tweezer: nearly zero.
    pub rb_in_cs_tweezer: f64,
    /// Cs in the 811 nm (Rb) tweezer: repulsive, must be ≤ 0.
    pub cs_in_rb_tweezer: f64,
}

impl Default for Selectivity {
    fn default() -> Self {
        Self { rb_in_cs_tweezer: 0.05, cs_in_rb_tweezer: -0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapPhysics {
    pub traps: PerElement<SpeciesTrap>,
    pub selectivity: Selectivity,
}

impl Default for TrapPhysics {
    fn default() -> Self {
        let khz = 2.0 * PI * 1e3;
        Self {
            traps: PerElement::new(
                SpeciesTrap::from_trap_frequency(Element::Rb, 0.8, 1.0, 100.0 * khz).expect("valid defaults"),
                SpeciesTrap::from_trap_frequency(Element::Cs, 0.8, 1.0, 60.0 * khz).expect("valid defaults"),
            ),
            selectivity: Selectivity::default(),
        }
    }
}

impl TrapPhysics {
    pub fn new(traps: PerElement<SpeciesTrap>, selectivity: Selectivity) -> Result<Self> {
        if selectivity.cs_in_rb_tweezer > 0.0 {
            return Err(Error::Validation("Cs must be anti-trapped by the 811 nm tweezer".into()));
        }
        if traps.rb.element != Element::Rb || traps.cs.element != Element::Cs {
            return Err(Error::Validation("trap entries must match their element".into()));
        }
        Ok(Self { traps, selectivity })
    }

    /// Depth (µK) that `atom` sees in a tweezer built for `tweezer`.
    pub fn depth_in(&self, atom: Element, tweezer: Element) -> f64 {
        let own = self.traps[tweezer].depth_uk();
        match (atom, tweezer) {
            (a, t) if a == t => own,
            (Element::Rb, Element::Cs) => own * self.selectivity.rb_in_cs_tweezer,
            _ => own * self.selectivity.cs_in_rb_tweezer,
        }
    }
}

/// Atom temperature per element, µK.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalState {
    pub temperature_uk: PerElement<f64>,
}

impl Default for ThermalState {
    fn default() -> Self {
        Self { temperature_uk: PerElement::new(50.0, 30.0) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_depth_relation_holds() {
        let phys = TrapPhysics::default();
        for e in Element::ALL {
            let t = phys.traps[e];
            let w0 = t.waist_um * 1e-6;
            let omega = (4.0 * t.depth_joule() / (t.mass_kg() * w0 * w0)).sqrt();
            assert!((omega / t.omega_r() - 1.0).abs() < 1e-9);
            let back = SpeciesTrap::from_depth(e, t.waist_um, t.power_mw, t.depth_uk()).unwrap();
            assert!((back.omega_r() / t.omega_r() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn default_depths_are_sub_millikelvin() {
        let phys = TrapPhysics::default();
        // m w0² ω² / 4k_B for 87Rb at 2π·100 kHz and 133Cs at 2π·60 kHz.
        assert!((phys.traps.rb.depth_uk() - 660.2).abs() < 1.0, "{}", phys.traps.rb.depth_uk());
        assert!((phys.traps.cs.depth_uk() - 363.5).abs() < 1.0, "{}", phys.traps.cs.depth_uk());
    }

    #[test]
    fn harmonic_limit_matches_potential_curvature() {
        let t = TrapPhysics::default().traps.rb;
        let h = 1e-9;
        let curv = (t.potential(h, 0.0, 0.0) - 2.0 * t.potential(0.0, 0.0, 0.0) + t.potential(-h, 0.0, 0.0)) / (h * h);
        assert!(((curv / t.mass_kg()).sqrt() / t.omega_r() - 1.0).abs() < 1e-4);
        let curv_z = (t.potential(0.0, 0.0, h) - 2.0 * t.potential(0.0, 0.0, 0.0) + t.potential(0.0, 0.0, -h)) / (h * h);
        assert!(((curv_z / t.mass_kg()).sqrt() / t.omega_z() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn selectivity() {
        let phys = TrapPhysics::default();
        assert!(phys.depth_in(Element::Cs, Element::Rb) <= 0.0);
        assert!(phys.depth_in(Element::Rb, Element::Cs) < 0.1 * phys.depth_in(Element::Rb, Element::Rb));
        let bad = Selectivity { cs_in_rb_tweezer: 0.2, ..Selectivity::default() };
        assert!(TrapPhysics::new(phys.traps, bad).is_err());
    }

    #[test]
    fn rejects_non_positive() {
        assert!(SpeciesTrap::from_depth(Element::Rb, 0.8, 1.0, 0.0).is_err());
        assert!(SpeciesTrap::from_trap_frequency(Element::Cs, -1.0, 1.0, 1e5).is_err());
    }
}
