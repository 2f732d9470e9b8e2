//! Trap-site layouts for the two tweezer arrays.
//!
//! Coordinates live in the focal plane, in µm, with the origin at the array
//! center. Every constructor validates its output against [`SiteMap::validate`].

mod io;
mod lattice;
mod preset;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::{Element, Error, Result};

pub use io::{parse_bitmap, read_sites_csv, write_sites_csv};
pub use lattice::{make_interleaved_dual_lattice, make_rect_lattice, make_rect_lattice_xy};
pub use preset::{honeycomb_by_mask, preset_geometry, Preset};

/// Default lattice period in µm.
pub const DEFAULT_SPACING_UM: f64 = 5.0;
/// Full width of the microscope field of view in µm.
pub const FIELD_OF_VIEW_UM: f64 = 300.0;
/// Minimum distance between two traps of the same element.
pub const MIN_SEPARATION_UM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: u32,
    pub element: Element,
    pub x: f64,
    pub y: f64,
}

impl Site {
    pub fn distance(&self, other: &Site) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

/// Element-tagged trap coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteMap {
    sites: Vec<Site>,
    /// Nominal lattice period, when the map came from a periodic generator.
    pub spacing_um: Option<f64>,
}

impl SiteMap {
    /// Builds a map and checks id uniqueness, same-element separation and
    /// the field of view.
    pub fn new(sites: Vec<Site>, spacing_um: Option<f64>) -> Result<Self> {
        let map = Self { sites, spacing_um };
        map.validate()?;
        Ok(map)
    }

    pub fn empty() -> Self {
        Self { sites: Vec::new(), spacing_um: None }
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn count(&self, element: Element) -> usize {
        self.sites.iter().filter(|s| s.element == element).count()
    }

    pub fn sites_of(&self, element: Element) -> impl Iterator<Item = &Site> {
        self.sites.iter().filter(move |s| s.element == element)
    }

    pub fn ids(&self) -> BTreeSet<u32> {
        self.sites.iter().map(|s| s.id).collect()
    }

    pub fn get(&self, id: u32) -> Option<&Site> {
        self.sites.iter().find(|s| s.id == id)
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let first = self.sites.first()?;
        let init = BoundingBox { min_x: first.x, min_y: first.y, max_x: first.x, max_y: first.y };
        Some(self.sites.iter().fold(init, |b, s| BoundingBox {
            min_x: b.min_x.min(s.x),
            min_y: b.min_y.min(s.y),
            max_x: b.max_x.max(s.x),
            max_y: b.max_y.max(s.y),
        }))
    }

    /// Merges two maps, renumbering the second so ids stay unique.
    pub fn merge(&self, other: &SiteMap) -> Result<SiteMap> {
        let offset = self.sites.iter().map(|s| s.id + 1).max().unwrap_or(0);
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().map(|s| Site { id: s.id + offset, ..*s }));
        let spacing = if self.spacing_um == other.spacing_um { self.spacing_um } else { None };
        SiteMap::new(sites, spacing)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        let half = FIELD_OF_VIEW_UM / 2.0;
        for s in &self.sites {
            if !ids.insert(s.id) {
                return Err(Error::Geometry(format!("duplicate site id {}", s.id)));
            }
            if !(s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::Geometry(format!("site {} has non-finite coordinates", s.id)));
            }
            if s.x.abs() > half || s.y.abs() > half {
                return Err(Error::Geometry(format!(
                    "site {} at ({:.3}, {:.3}) µm lies outside the {FIELD_OF_VIEW_UM} µm field of view",
                    s.id, s.x, s.y
                )));
            }
        }
        if let Some((a, b)) = self.closest_same_element_violation() {
            return Err(Error::Geometry(format!(
                "sites {a} and {b} are closer than {MIN_SEPARATION_UM} µm"
            )));
        }
        Ok(())
    }

    // Bucketed neighbor search; cells are one separation wide so only the
    // 3x3 block around a site needs checking.
    fn closest_same_element_violation(&self) -> Option<(u32, u32)> {
        let cell = MIN_SEPARATION_UM;
        let mut buckets: HashMap<(Element, i64, i64), Vec<usize>> = HashMap::new();
        for (idx, s) in self.sites.iter().enumerate() {
            let key = ((s.x / cell).floor() as i64, (s.y / cell).floor() as i64);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = buckets.get(&(s.element, key.0 + dx, key.1 + dy)) {
                        for &j in list {
                            if self.sites[j].distance(s) < MIN_SEPARATION_UM {
                                return Some((self.sites[j].id, s.id));
                            }
                        }
                    }
                }
            }
            buckets.entry((s.element, key.0, key.1)).or_default().push(idx);
        }
        None
    }
}

/// Set of site ids to keep.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GeometryMask {
    pub keep: BTreeSet<u32>,
}

impl GeometryMask {
    pub fn new(keep: impl IntoIterator<Item = u32>) -> Self {
        Self { keep: keep.into_iter().collect() }
    }

    pub fn full(map: &SiteMap) -> Self {
        Self { keep: map.ids() }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.keep.contains(&id)
    }
}

/// Keeps exactly the masked sites. Ids are preserved.
pub fn apply_mask(map: &SiteMap, mask: &GeometryMask) -> Result<SiteMap> {
    let ids = map.ids();
    let unknown: Vec<u32> = mask.keep.iter().copied().filter(|id| !ids.contains(id)).collect();
    if !unknown.is_empty() {
        return Err(Error::Validation(format!("mask references unknown site ids {unknown:?}")));
    }
    let sites = map.sites.iter().copied().filter(|s| mask.contains(s.id)).collect();
    Ok(SiteMap { sites, spacing_um: map.spacing_um })
}
