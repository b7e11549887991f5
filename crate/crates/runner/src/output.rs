//! Files written by the subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use maxenergy::energy::NodeState;
use maxenergy::{io, DensityField, Domain, SolveReport};
use serde::Serialize;

/// Gray level of grid cells outside the domain.
pub const OUTSIDE_GRAY: u8 = 64;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_density_csv(path: &Path, domain: &Domain, rho: &DensityField) -> Result<()> {
    let mut w = create(path)?;
    io::write_nodes(&mut w, domain, Some(rho.values()))?;
    w.flush()?;
    Ok(())
}

/// ρ₊ → 255, ρ₋ → 0, intermediate values linearly in between (1..=254).
pub fn gray_level(rho: &DensityField, i: usize) -> u8 {
    match rho.state(i) {
        NodeState::Plus => 255,
        NodeState::Minus => 0,
        NodeState::Fractional => {
            let b = rho.bounds();
            let t = (rho.values()[i] - b.rho_minus) / (b.rho_plus - b.rho_minus);
            (255.0 * t).round().clamp(1.0, 254.0) as u8
        }
    }
}

/// Pixel rows of the image: the grid with the top row at maximal y, or a
/// single row in node order when the domain has no grid.
pub fn image_rows(domain: &Domain, rho: &DensityField) -> Vec<Vec<u8>> {
    match domain.grid() {
        Some(g) => {
            let mut rows = vec![vec![OUTSIDE_GRAY; g.nx]; g.ny];
            for (i, &(ix, iy)) in g.cells.iter().enumerate() {
                rows[g.ny - 1 - iy][ix] = gray_level(rho, i);
            }
            rows
        }
        None => vec![(0..domain.len()).map(|i| gray_level(rho, i)).collect()],
    }
}

/// Plain (P2) PGM with lines of at most 70 characters.
pub fn write_pgm(path: &Path, domain: &Domain, rho: &DensityField) -> Result<()> {
    let rows = image_rows(domain, rho);
    let mut w = create(path)?;
    writeln!(w, "P2")?;
    writeln!(w, "{} {}", rows[0].len(), rows.len())?;
    writeln!(w, "255")?;
    for row in &rows {
        for chunk in row.chunks(17) {
            let line: Vec<String> = chunk.iter().map(u8::to_string).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per iterate: `iteration,energy,l1_change,set_changed`. Row 0 is
/// the initial density and has the last two fields empty.
pub fn write_trace(path: &Path, report: &SolveReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "iteration,energy,l1_change,set_changed")?;
    for (s, e) in report.energies.iter().enumerate() {
        if s == 0 {
            writeln!(w, "0,{e},,")?;
        } else {
            writeln!(w, "{s},{e},{},{}", report.l1_changes[s - 1], report.set_changed[s - 1])?;
        }
    }
    w.flush()?;
    Ok(())
}
