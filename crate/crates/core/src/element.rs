use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Atomic element held in the array.
///
/// Rb is trapped by the 811 nm AOD tweezers, Cs by the 910 nm SLM tweezers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    Rb,
    Cs,
}

impl Element {
    pub const ALL: [Element; 2] = [Element::Rb, Element::Cs];

    /// Tweezer wavelength in nm.
    pub fn trap_wavelength_nm(self) -> f64 {
        match self {
            Element::Rb => 811.0,
            Element::Cs => 910.0,
        }
    }

    /// Fluorescence (D2) wavelength in nm.
    pub fn imaging_wavelength_nm(self) -> f64 {
        match self {
            Element::Rb => 780.0,
            Element::Cs => 852.0,
        }
    }

    /// Atomic mass in kg (87Rb, 133Cs).
    pub fn mass_kg(self) -> f64 {
        const AMU: f64 = 1.660_539_066_60e-27;
        match self {
            Element::Rb => 86.909_180_527 * AMU,
            Element::Cs => 132.905_451_961 * AMU,
        }
    }

    pub fn other(self) -> Element {
        match self {
            Element::Rb => Element::Cs,
            Element::Cs => Element::Rb,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Element::Rb => "Rb",
            Element::Cs => "Cs",
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Rb" | "rb" | "RB" => Ok(Element::Rb),
            "Cs" | "cs" | "CS" => Ok(Element::Cs),
            other => Err(Error::Validation(format!("unknown element '{other}'"))),
        }
    }
}

/// A value held separately for each element.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerElement<T> {
    pub rb: T,
    pub cs: T,
}

impl<T> PerElement<T> {
    pub fn new(rb: T, cs: T) -> Self {
        Self { rb, cs }
    }

    pub fn get(&self, element: Element) -> &T {
        match element {
            Element::Rb => &self.rb,
            Element::Cs => &self.cs,
        }
    }

    pub fn get_mut(&mut self, element: Element) -> &mut T {
        match element {
            Element::Rb => &mut self.rb,
            Element::Cs => &mut self.cs,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Element, &T) -> U) -> PerElement<U> {
        PerElement {
            rb: f(Element::Rb, &self.rb),
            cs: f(Element::Cs, &self.cs),
        }
    }
}

impl<T: Clone> PerElement<T> {
    pub fn splat(value: T) -> Self {
        Self { rb: value.clone(), cs: value }
    }
}

impl<T> std::ops::Index<Element> for PerElement<T> {
    type Output = T;
    fn index(&self, e: Element) -> &T {
        self.get(e)
    }
}

impl<T> std::ops::IndexMut<Element> for PerElement<T> {
    fn index_mut(&mut self, e: Element) -> &mut T {
        self.get_mut(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelengths_are_fixed() {
        assert_eq!(Element::Rb.trap_wavelength_nm(), 811.0);
        assert_eq!(Element::Cs.trap_wavelength_nm(), 910.0);
        assert_eq!(Element::Rb.imaging_wavelength_nm(), 780.0);
        assert_eq!(Element::Cs.imaging_wavelength_nm(), 852.0);
        assert_eq!(Element::ALL.len(), 2);
    }

    #[test]
    fn parse_round_trip() {
        for e in Element::ALL {
            assert_eq!(e.as_str().parse::<Element>().unwrap(), e);
        }
        assert!("K".parse::<Element>().is_err());
    }
}
