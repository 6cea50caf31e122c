//! Mask files and field dumps.
//!
//! A mask file starts with a header line, either `torus NX NY LX LY` or
//! `sphere NTHETA NPHI R`, followed by rows of `0`/`1` characters. A torus
//! file has `NY` rows of `NX` entries (row `j` is `y = j h_y`). A sphere file
//! has `NTHETA + 1` rows of `NPHI` entries, row `j` being latitude
//! `θ = jπ/NTHETA`; the first and last rows are the poles and must be
//! uniform. Blank lines and whitespace between entries are ignored.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::domain::GridDomain;
use super::surface::ClosedSurface;
use super::GridField;
use crate::error::{invalid, Result};

pub fn parse_mask(text: &str) -> Result<(ClosedSurface, Vec<bool>)> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| crate::Error::InvalidInput("mask file is empty".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let num = |i: usize| -> Result<f64> {
        fields
            .get(i)
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| crate::Error::InvalidInput(format!("bad mask header: {header}")))
    };
    let int = |i: usize| -> Result<usize> {
        fields
            .get(i)
            .and_then(|f| f.parse::<usize>().ok())
            .ok_or_else(|| crate::Error::InvalidInput(format!("bad mask header: {header}")))
    };
    let (surface, rows, cols) = match fields.first().copied() {
        Some("torus") if fields.len() == 5 => {
            let (nx, ny) = (int(1)?, int(2)?);
            (ClosedSurface::flat_torus(num(3)?, num(4)?, nx, ny)?, ny, nx)
        }
        Some("sphere") if fields.len() == 4 => {
            let (nt, np) = (int(1)?, int(2)?);
            (ClosedSurface::round_sphere(num(3)?, nt, np)?, nt + 1, np)
        }
        _ => return invalid(format!("bad mask header: {header}")),
    };

    let mut grid: Vec<Vec<bool>> = Vec::with_capacity(rows);
    for line in lines {
        let row: Vec<bool> = line
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => invalid(format!("unexpected character {other:?} in mask")),
            })
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return invalid(format!("mask row {} has {} entries, expected {cols}", grid.len() + 1, row.len()));
        }
        grid.push(row);
    }
    if grid.len() != rows {
        return invalid(format!("mask has {} rows, expected {rows}", grid.len()));
    }

    let mask = match surface {
        ClosedSurface::FlatTorus { .. } => grid.into_iter().flatten().collect(),
        ClosedSurface::RoundSphere { .. } => {
            for pole in [0, rows - 1] {
                if grid[pole].iter().any(|b| *b != grid[pole][0]) {
                    return invalid("pole rows of a sphere mask must be uniform");
                }
            }
            let mut mask = vec![grid[0][0]];
            for row in &grid[1..rows - 1] {
                mask.extend(row.iter().copied());
            }
            mask.push(grid[rows - 1][0]);
            mask
        }
    };
    Ok((surface, mask))
}

pub fn read_mask_file(path: &Path) -> Result<(ClosedSurface, Vec<bool>)> {
    let text = fs::read_to_string(path)?;
    parse_mask(&text)
}

/// Renders a node mask in the file format.
pub fn format_mask(surface: &ClosedSurface, mask: &[bool]) -> String {
    let bit = |b: bool| if b { '1' } else { '0' };
    let mut out = String::new();
    match *surface {
        ClosedSurface::FlatTorus { lx, ly, nx, ny } => {
            out.push_str(&format!("torus {nx} {ny} {lx} {ly}\n"));
            for j in 0..ny {
                out.extend((0..nx).map(|i| bit(mask[surface.torus_node(i, j)])));
                out.push('\n');
            }
        }
        ClosedSurface::RoundSphere { radius, ntheta, nphi } => {
            out.push_str(&format!("sphere {ntheta} {nphi} {radius}\n"));
            for j in 0..=ntheta {
                out.extend((0..nphi).map(|k| bit(mask[surface.sphere_node(j, k)])));
                out.push('\n');
            }
        }
    }
    out
}

/// CSV dump of an interior field: `index,a,b,value` with `(a, b)` the node
/// coordinates (`x, y` or `θ, φ`).
pub fn write_field_csv<W: Write>(domain: &GridDomain, field: &GridField, out: W) -> Result<()> {
    if field.len() != domain.interior_len() {
        return invalid("field does not match the domain");
    }
    let (a, b) = match domain.surface() {
        ClosedSurface::FlatTorus { .. } => ("x", "y"),
        ClosedSurface::RoundSphere { .. } => ("theta", "phi"),
    };
    let mut w = out;
    writeln!(w, "index,{a},{b},value")?;
    for (slot, &node) in domain.interior_nodes().iter().enumerate() {
        let (x, y) = domain.surface().coordinates(node);
        writeln!(w, "{node},{x},{y},{}", field.values()[slot])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_round_trip() {
        let t = ClosedSurface::flat_torus(1.0, 2.0, 16, 16).unwrap();
        let mask: Vec<bool> = (0..t.node_count()).map(|i| i % 3 == 0).collect();
        let text = format_mask(&t, &mask);
        let (s, m) = parse_mask(&text).unwrap();
        assert_eq!(s, t);
        assert_eq!(m, mask);
    }

    #[test]
    fn sphere_round_trip_and_pole_check() {
        let s = ClosedSurface::round_sphere(1.0, 16, 32).unwrap();
        let mut mask: Vec<bool> = (0..s.node_count()).map(|i| i % 5 == 1).collect();
        mask[0] = true;
        let text = format_mask(&s, &mask);
        let (s2, m) = parse_mask(&text).unwrap();
        assert_eq!(s2, s);
        assert_eq!(m, mask);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[1].replace_range(0..1, "0");
        assert!(parse_mask(&lines.join("\n")).is_err());
    }

    #[test]
    fn malformed_files() {
        assert!(parse_mask("").is_err());
        assert!(parse_mask("cube 16 16 1").is_err());
        assert!(parse_mask("torus 16 16 1 1\n0101").is_err());
        let mut bad = String::from("torus 16 16 1 1\n");
        for _ in 0..16 {
            bad.push_str("000000000000000x\n");
        }
        assert!(parse_mask(&bad).is_err());
    }
}
