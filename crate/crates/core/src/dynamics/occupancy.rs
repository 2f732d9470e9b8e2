use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::SiteMap;
use crate::{Element, Error, PerElement, Result, SimRng};

/// Stochastic single-atom loading probability under collisional blockade.
pub const DEFAULT_LOAD_PROBABILITY: f64 = 0.55;

/// Occupation flags for the tweezers of one element, aligned with `site_ids`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementOccupancy {
    pub site_ids: Vec<u32>,
    pub occupied: Vec<bool>,
}

impl ElementOccupancy {
    pub fn empty(site_ids: Vec<u32>) -> Self {
        let occupied = vec![false; site_ids.len()];
        Self { site_ids, occupied }
    }

    pub fn len(&self) -> usize {
        self.site_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.site_ids.is_empty()
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn fill_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.len() as f64
        }
    }

    pub fn clear(&mut self) {
        self.occupied.iter_mut().for_each(|o| *o = false);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyState {
    pub time_s: f64,
    pub elements: PerElement<ElementOccupancy>,
}

impl OccupancyState {
    pub fn empty(map: &SiteMap) -> Self {
        Self {
            time_s: 0.0,
            elements: PerElement::new(
                ElementOccupancy::empty(map.sites_of(Element::Rb).map(|s| s.id).collect()),
                ElementOccupancy::empty(map.sites_of(Element::Cs).map(|s| s.id).collect()),
            ),
        }
    }

    pub fn get(&self, element: Element) -> &ElementOccupancy {
        &self.elements[element]
    }

    pub fn count(&self, element: Element) -> usize {
        self.elements[element].count()
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Validation(format!("load probability must lie in [0, 1], got {p}")))
    }
}

/// Loads every tweezer of both elements independently with probability `p_load`.
pub fn load_array(map: &SiteMap, p_load: f64, rng: &mut SimRng) -> Result<OccupancyState> {
    let mut state = OccupancyState::empty(map);
    for e in Element::ALL {
        load_element(&mut state, e, p_load, rng)?;
    }
    Ok(state)
}

/// Reloads one element from its MOT: previous contents are discarded and each
/// site is refilled independently. The other element is untouched.
pub fn load_element(state: &mut OccupancyState, element: Element, p_load: f64, rng: &mut SimRng) -> Result<()> {
    check_probability(p_load)?;
    for o in state.elements[element].occupied.iter_mut() {
        *o = rng.random_bool(p_load);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_interleaved_dual_lattice;
    use crate::rng_from_seed;

    #[test]
    fn loading_fraction_matches_probability() {
        let map = make_interleaved_dual_lattice(16, 16, 5.0).unwrap();
        let mut rng = rng_from_seed(3);
        let (mut k, mut n) = (0usize, 0usize);
        for _ in 0..200 {
            let s = load_array(&map, 0.55, &mut rng).unwrap();
            for e in Element::ALL {
                k += s.count(e);
                n += s.get(e).len();
            }
        }
        let p = k as f64 / n as f64;
        let sigma = (0.55 * 0.45 / n as f64).sqrt();
        assert!((p - 0.55).abs() < 5.0 * sigma, "{p}");
    }

    #[test]
    fn occupancy_only_on_own_sites() {
        let map = make_interleaved_dual_lattice(4, 4, 5.0).unwrap();
        let s = load_array(&map, 1.0, &mut rng_from_seed(0)).unwrap();
        for e in Element::ALL {
            assert_eq!(s.count(e), map.count(e));
            for id in &s.get(e).site_ids {
                assert_eq!(map.get(*id).unwrap().element, e);
            }
        }
    }

    #[test]
    fn reload_leaves_other_element() {
        let map = make_interleaved_dual_lattice(8, 8, 5.0).unwrap();
        let mut rng = rng_from_seed(11);
        let mut s = load_array(&map, 0.5, &mut rng).unwrap();
        let cs = s.get(Element::Cs).clone();
        load_element(&mut s, Element::Rb, 0.5, &mut rng).unwrap();
        assert_eq!(s.get(Element::Cs), &cs);
    }

    #[test]
    fn rejects_bad_probability() {
        let map = make_interleaved_dual_lattice(2, 2, 5.0).unwrap();
        assert!(load_array(&map, 1.5, &mut rng_from_seed(0)).is_err());
        assert!(load_array(&map, -0.1, &mut rng_from_seed(0)).is_err());
    }
}
