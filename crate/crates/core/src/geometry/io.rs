use std::io::{BufRead, Write};

use super::{Site, SiteMap};
use crate::{Element, Error, Result};

/// Parses a text bitmap: one row per line, cells in {0,1,2,3} meaning
/// {empty, Rb, Cs, both}. Whitespace inside a row is ignored, as are blank
/// lines and lines starting with `#`. The first row has the smallest y.
pub fn parse_bitmap(text: &str, spacing: f64) -> Result<SiteMap> {
    if !(spacing > 0.0) {
        return Err(Error::Geometry(format!("bitmap spacing must be positive, got {spacing}")));
    }
    let mut grid: Vec<(usize, Vec<u8>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for ch in line.chars().filter(|c| !c.is_whitespace()) {
            match ch.to_digit(10) {
                Some(d) if d <= 3 => row.push(d as u8),
                _ => {
                    return Err(Error::Parse { line: lineno + 1, msg: format!("invalid bitmap cell '{ch}'") });
                }
            }
        }
        if let Some((_, first)) = grid.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("row has {} cells, expected {}", row.len(), first.len()),
                });
            }
        }
        grid.push((lineno + 1, row));
    }
    let rows = grid.len();
    let cols = grid.first().map_or(0, |(_, r)| r.len());
    let cx = (cols as f64 - 1.0) / 2.0;
    let cy = (rows as f64 - 1.0) / 2.0;
    let mut sites = Vec::new();
    for (r, (_, row)) in grid.iter().enumerate() {
        for (c, &cell) in row.iter().enumerate() {
            let x = (c as f64 - cx) * spacing;
            let y = (r as f64 - cy) * spacing;
            if cell & 1 != 0 {
                sites.push(Site { id: sites.len() as u32, element: Element::Rb, x, y });
            }
            if cell & 2 != 0 {
                sites.push(Site { id: sites.len() as u32, element: Element::Cs, x, y });
            }
        }
    }
    SiteMap::new(sites, Some(spacing))
}

/// Writes `id,element,x_um,y_um` with a header row.
pub fn write_sites_csv<W: Write>(map: &SiteMap, mut out: W) -> Result<()> {
    writeln!(out, "id,element,x_um,y_um")?;
    for s in map.sites() {
        writeln!(out, "{},{},{},{}", s.id, s.element, s.x, s.y)?;
    }
    Ok(())
}

pub fn read_sites_csv<R: BufRead>(input: R) -> Result<SiteMap> {
    let mut sites = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("id")) {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: lineno + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
        }
        let id = fields[0].parse::<u32>().map_err(|e| parse_err(format!("bad id: {e}")))?;
        let element = fields[1].parse::<Element>().map_err(|e| parse_err(e.to_string()))?;
        let x = fields[2].parse::<f64>().map_err(|e| parse_err(format!("bad x_um: {e}")))?;
        let y = fields[3].parse::<f64>().map_err(|e| parse_err(format!("bad y_um: {e}")))?;
        sites.push(Site { id, element, x, y });
    }
    SiteMap::new(sites, None)
}
