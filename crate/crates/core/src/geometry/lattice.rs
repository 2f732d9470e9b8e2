use super::{Site, SiteMap};
use crate::{Element, Error, Result};

/// Rectangular lattice centered on `origin`, ids row-major from 0.
pub fn make_rect_lattice(
    element: Element,
    rows: usize,
    cols: usize,
    spacing: f64,
    origin: (f64, f64),
) -> Result<SiteMap> {
    make_rect_lattice_xy(element, rows, cols, (spacing, spacing), origin)
}

/// Rectangular lattice with independent x and y periods.
pub fn make_rect_lattice_xy(
    element: Element,
    rows: usize,
    cols: usize,
    spacing: (f64, f64),
    origin: (f64, f64),
) -> Result<SiteMap> {
    if rows == 0 || cols == 0 {
        return Err(Error::Geometry(format!("lattice needs at least one row and column, got {rows}x{cols}")));
    }
    if !(spacing.0 > 0.0 && spacing.1 > 0.0) {
        return Err(Error::Geometry(format!("lattice spacing must be positive, got {spacing:?}")));
    }
    let cx = (cols as f64 - 1.0) / 2.0;
    let cy = (rows as f64 - 1.0) / 2.0;
    let mut sites = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            sites.push(Site {
                id: (r * cols + c) as u32,
                element,
                x: origin.0 + (c as f64 - cx) * spacing.0,
                y: origin.1 + (r as f64 - cy) * spacing.1,
            });
        }
    }
    let nominal = (spacing.0 == spacing.1).then_some(spacing.0);
    SiteMap::new(sites, nominal)
}

/// Cs square lattice with one Rb site at the center of every plaquette.
///
/// Cs ids come first (row-major), Rb ids continue after them.
pub fn make_interleaved_dual_lattice(cs_rows: usize, cs_cols: usize, spacing: f64) -> Result<SiteMap> {
    if cs_rows < 2 || cs_cols < 2 {
        return Err(Error::Geometry(format!(
            "interleaved lattice needs at least 2x2 Cs sites, got {cs_rows}x{cs_cols}"
        )));
    }
    let cs = make_rect_lattice(Element::Cs, cs_rows, cs_cols, spacing, (0.0, 0.0))?;
    let rb = make_rect_lattice(Element::Rb, cs_rows - 1, cs_cols - 1, spacing, (0.0, 0.0))?;
    cs.merge(&rb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cs_17x16() {
        let map = make_rect_lattice(Element::Cs, 17, 16, 5.0, (0.0, 0.0)).unwrap();
        assert_eq!(map.len(), 272);
    }

    #[test]
    fn rb_16x15_with_cs_totals_512() {
        let rb = make_rect_lattice(Element::Rb, 16, 15, 5.0, (0.0, 0.0)).unwrap();
        assert_eq!(rb.len(), 240);
        assert_eq!(rb.len() + 272, 512);
    }

    #[test]
    fn single_site_at_origin() {
        let map = make_rect_lattice(Element::Rb, 1, 1, 7.3, (2.0, -3.0)).unwrap();
        assert_eq!(map.len(), 1);
        let s = map.sites()[0];
        assert_eq!((s.id, s.x, s.y), (0, 2.0, -3.0));
    }

    #[test]
    fn row_major_ids() {
        let map = make_rect_lattice(Element::Rb, 2, 3, 1.0, (0.0, 0.0)).unwrap();
        let s = map.get(4).unwrap();
        assert_eq!((s.x, s.y), (0.0, 0.5));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(make_rect_lattice(Element::Rb, 0, 3, 1.0, (0.0, 0.0)).is_err());
        assert!(make_rect_lattice(Element::Rb, 2, 3, 0.0, (0.0, 0.0)).is_err());
        // 61 sites at 5 µm spans 300 µm plus the offset: outside the field of view.
        assert!(make_rect_lattice(Element::Rb, 1, 61, 5.0, (10.0, 0.0)).is_err());
        assert!(make_interleaved_dual_lattice(1, 5, 5.0).is_err());
    }

    #[test]
    fn single_plaquette() {
        let map = make_interleaved_dual_lattice(2, 2, 4.0).unwrap();
        assert_eq!(map.count(Element::Cs), 4);
        assert_eq!(map.count(Element::Rb), 1);
        let rb = map.sites_of(Element::Rb).next().unwrap();
        let (mx, my) = map
            .sites_of(Element::Cs)
            .fold((0.0, 0.0), |(x, y), s| (x + s.x / 4.0, y + s.y / 4.0));
        assert!((rb.x - mx).abs() < 1e-12 && (rb.y - my).abs() < 1e-12);
    }

    #[test]
    fn rb_equidistant_from_four_cs() {
        let s = 5.0;
        let map = make_interleaved_dual_lattice(17, 16, s).unwrap();
        assert_eq!(map.len(), 512);
        let cs: Vec<_> = map.sites_of(Element::Cs).collect();
        for rb in map.sites_of(Element::Rb) {
            let mut d: Vec<f64> = cs.iter().map(|c| c.distance(rb)).collect();
            d.sort_by(f64::total_cmp);
            let target = s / 2f64.sqrt();
            for k in 0..4 {
                assert!((d[k] - target).abs() < 1e-9, "rb {} neighbor {k} at {}", rb.id, d[k]);
            }
            assert!(d[4] > target + 1.0);
        }
    }
}
