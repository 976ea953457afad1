//! CSV time series and PGM snapshots.

use std::path::Path;

use anyhow::{Context, Result};
use frontlab::geometry::GridDomain;
use frontlab::solver::{HistoryRow, ScalarField};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use serde::Serialize;

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    write_rows(path, rows)
}

/// Any serializable rows as CSV with a header from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// 8-bit grey levels, top row = largest x₂. `shade` maps a cell to [0, 1].
fn grey(grid: &GridDomain, shade: impl Fn(usize) -> f64) -> Vec<u8> {
    let mut pixels = Vec::with_capacity(grid.len());
    for j in (0..grid.ny).rev() {
        for i in 0..grid.nx {
            let v = shade(grid.idx(i, j)).clamp(0.0, 1.0);
            pixels.push((v * 255.0).round() as u8);
        }
    }
    pixels
}

fn save_pgm(path: &Path, grid: &GridDomain, pixels: &[u8]) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let enc = PnmEncoder::new(std::io::BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    enc.write_image(pixels, grid.nx as u32, grid.ny as u32, ExtendedColorType::L8)?;
    Ok(())
}

/// A field in [0, 1] as grey levels; solid cells are black.
pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let v = field.values();
    save_pgm(path, g, &grey(g, |k| if g.is_fluid(k) { v[k] } else { 0.0 }))
}

/// The fluid mask: fluid white, solid black.
pub fn write_mask(path: &Path, grid: &GridDomain) -> Result<()> {
    save_pgm(path, grid, &grey(grid, |k| if grid.is_fluid(k) { 1.0 } else { 0.0 }))
}
