use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{apply_mask, make_rect_lattice_xy, parse_bitmap, GeometryMask, Site, SiteMap};
use crate::{Element, Result};

/// Named geometry generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    /// Cs honeycomb lattice with an Rb site on every bond midpoint.
    HexagonalDressed { rows: usize, cols: usize, spacing_um: f64 },
    /// Honeycomb lattice whose two triangular sublattices hold Cs and Rb.
    HoneycombBipartite { rows: usize, cols: usize, spacing_um: f64 },
    /// Text grid of {0,1,2,3} = {empty, Rb, Cs, both}.
    CustomBitmap { bitmap: String, spacing_um: f64 },
}

pub fn preset_geometry(preset: &Preset) -> Result<SiteMap> {
    match preset {
        Preset::HexagonalDressed { rows, cols, spacing_um } => hexagonal_dressed(*rows, *cols, *spacing_um),
        Preset::HoneycombBipartite { rows, cols, spacing_um } => honeycomb_bipartite(*rows, *cols, *spacing_um),
        Preset::CustomBitmap { bitmap, spacing_um } => parse_bitmap(bitmap, *spacing_um),
    }
}

/// Honeycomb site positions on the (√3a/2, a/2) sub-grid, as integer
/// (k, m) pairs. Sublattice A sits at m ≡ 0 (mod 3), B at m ≡ 2.
fn honeycomb_cells(rows: usize, cols: usize) -> (Vec<(i64, i64)>, Vec<(i64, i64)>) {
    let mut a = Vec::with_capacity(rows * cols);
    let mut b = Vec::with_capacity(rows * cols);
    for j in 0..rows as i64 {
        for i in 0..cols as i64 {
            a.push((2 * i + j, 3 * j));
            b.push((2 * i + j, 3 * j + 2));
        }
    }
    (a, b)
}

fn check_dims(rows: usize, cols: usize, spacing: f64) -> Result<()> {
    if rows == 0 || cols == 0 || !(spacing > 0.0) {
        return Err(crate::Error::Geometry(format!(
            "honeycomb needs rows, cols >= 1 and spacing > 0 (got {rows}x{cols}, {spacing})"
        )));
    }
    Ok(())
}

fn to_um(cells: &[(i64, i64)], rows: usize, cols: usize, spacing: f64) -> Vec<(f64, f64)> {
    let dx = 3f64.sqrt() * spacing / 2.0;
    let dy = spacing / 2.0;
    let k_max = (2 * (cols - 1) + (rows - 1)) as f64;
    let m_max = (3 * (rows - 1) + 2) as f64;
    cells
        .iter()
        .map(|&(k, m)| ((k as f64 - k_max / 2.0) * dx, (m as f64 - m_max / 2.0) * dy))
        .collect()
}

fn honeycomb_bipartite(rows: usize, cols: usize, spacing: f64) -> Result<SiteMap> {
    check_dims(rows, cols, spacing)?;
    let (a, b) = honeycomb_cells(rows, cols);
    let mut sites = Vec::with_capacity(a.len() + b.len());
    for (element, cells) in [(Element::Cs, &a), (Element::Rb, &b)] {
        for (x, y) in to_um(cells, rows, cols, spacing) {
            sites.push(Site { id: sites.len() as u32, element, x, y });
        }
    }
    SiteMap::new(sites, Some(spacing))
}

fn hexagonal_dressed(rows: usize, cols: usize, spacing: f64) -> Result<SiteMap> {
    check_dims(rows, cols, spacing)?;
    let (mut cells, b) = honeycomb_cells(rows, cols);
    cells.extend(b);
    let cs = to_um(&cells, rows, cols, spacing);
    let mut sites: Vec<Site> = cs
        .iter()
        .enumerate()
        .map(|(id, &(x, y))| Site { id: id as u32, element: Element::Cs, x, y })
        .collect();
    // Bonds are nearest-neighbor pairs on the sub-grid: (0, ±2) or (±1, ±1).
    let lookup: BTreeSet<(i64, i64)> = cells.iter().copied().collect();
    let mut midpoints = Vec::new();
    for &(k, m) in &cells {
        for (dk, dm) in [(0, 2), (1, 1), (-1, 1)] {
            let other = (k + dk, m + dm);
            if lookup.contains(&other) {
                midpoints.push(((k, m), other));
            }
        }
    }
    for (p, q) in midpoints {
        let pp = to_um(&[p, q], rows, cols, spacing);
        sites.push(Site {
            id: sites.len() as u32,
            element: Element::Rb,
            x: (pp[0].0 + pp[1].0) / 2.0,
            y: (pp[0].1 + pp[1].1) / 2.0,
        });
    }
    SiteMap::new(sites, Some(spacing))
}

/// Single-element honeycomb obtained by masking a rectangular lattice
/// with periods (√3a/2, a/2). Matches the honeycomb presets site for site.
pub fn honeycomb_by_mask(rows: usize, cols: usize, spacing: f64, element: Element) -> Result<(SiteMap, GeometryMask)> {
    check_dims(rows, cols, spacing)?;
    let k_count = 2 * (cols - 1) + (rows - 1) + 1;
    let m_count = 3 * (rows - 1) + 3;
    let rect = make_rect_lattice_xy(
        element,
        m_count,
        k_count,
        (3f64.sqrt() * spacing / 2.0, spacing / 2.0),
        (0.0, 0.0),
    )?;
    let keep = (0..m_count).flat_map(|m| (0..k_count).map(move |k| (k, m))).filter_map(|(k, m)| {
        if m % 3 == 1 {
            return None;
        }
        let j = m / 3;
        if k < j || (k - j) % 2 != 0 || (k - j) / 2 >= cols || j >= rows {
            return None;
        }
        Some((m * k_count + k) as u32)
    });
    let mask = GeometryMask::new(keep);
    Ok((apply_mask(&rect, &mask)?, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_distances(from: &Site, to: &[&Site]) -> Vec<f64> {
        let mut d: Vec<f64> = to.iter().filter(|s| s.id != from.id).map(|s| s.distance(from)).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    #[test]
    fn dressed_rb_has_two_equal_nearest_cs() {
        let map = preset_geometry(&Preset::HexagonalDressed { rows: 4, cols: 5, spacing_um: 4.0 }).unwrap();
        let cs: Vec<&Site> = map.sites_of(Element::Cs).collect();
        assert!(map.count(Element::Rb) > 0);
        for rb in map.sites_of(Element::Rb) {
            let d = sorted_distances(rb, &cs);
            assert!((d[0] - d[1]).abs() < 1e-9);
            assert!((d[0] - 2.0).abs() < 1e-9);
            assert!(d[2] > d[1] + 1e-6, "third neighbor should be farther");
        }
    }

    #[test]
    fn bipartite_sublattices_are_triangular() {
        let a = 5.0;
        let map = preset_geometry(&Preset::HoneycombBipartite { rows: 6, cols: 6, spacing_um: a }).unwrap();
        assert_eq!(map.count(Element::Cs), 36);
        assert_eq!(map.count(Element::Rb), 36);
        let all: Vec<&Site> = map.sites().iter().collect();
        for e in Element::ALL {
            let same: Vec<&Site> = map.sites_of(e).collect();
            let mut six_fold = 0;
            for s in &same {
                let d = sorted_distances(s, &same);
                // Same-element neighbors sit at √3·a.
                assert!((d[0] - 3f64.sqrt() * a).abs() < 1e-9);
                if d.iter().take_while(|&&x| (x - 3f64.sqrt() * a).abs() < 1e-9).count() == 6 {
                    six_fold += 1;
                }
                // The nearest site overall belongs to the other sublattice.
                let nearest = all
                    .iter()
                    .filter(|o| o.id != s.id)
                    .min_by(|p, q| p.distance(s).total_cmp(&q.distance(s)))
                    .unwrap();
                assert_eq!(nearest.element, e.other());
                assert!((nearest.distance(s) - a).abs() < 1e-9);
            }
            assert!(six_fold > 0, "interior sites should have six same-element neighbors");
        }
    }

    #[test]
    fn masked_rect_matches_direct_honeycomb() {
        for (rows, cols) in [(1, 1), (2, 3), (5, 4), (7, 7)] {
            let direct = preset_geometry(&Preset::HoneycombBipartite { rows, cols, spacing_um: 5.0 }).unwrap();
            let (masked, mask) = honeycomb_by_mask(rows, cols, 5.0, Element::Cs).unwrap();
            assert_eq!(mask.len(), direct.len());
            assert_eq!(masked.len(), direct.len());
            for s in direct.sites() {
                assert!(
                    masked.sites().iter().any(|m| m.distance(s) < 1e-9),
                    "site {} at ({}, {}) missing from the masked lattice",
                    s.id,
                    s.x,
                    s.y
                );
            }
        }
    }

    #[test]
    fn empty_bitmap_preset() {
        let map = preset_geometry(&Preset::CustomBitmap { bitmap: "000\n000\n".into(), spacing_um: 5.0 }).unwrap();
        assert!(map.is_empty());
    }
}
