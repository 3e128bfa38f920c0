//! Dataset files: sites and observations as headered CSV.
//!
//! A sites file has columns `site_x, site_y`; an observations file has one
//! row per replicate and one column per site. Any line starting with `#`
//! ahead of the data is skipped on read, which is where the command line
//! tool records tool version, config hash, and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::SpatialDataset;
use crate::error::{Error, Result};
use crate::partition::SetPartition;

fn writer_with_note(path: &Path, note: Option<&str>) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = BufWriter::new(File::create(path)?);
    if let Some(note) = note {
        writeln!(out, "# {}", note)?;
    }
    Ok(csv::Writer::from_writer(out))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?)
}

fn parse_field(rec: &csv::StringRecord, row: usize, col: usize) -> Result<f64> {
    let raw = rec.get(col).ok_or_else(|| {
        Error::InvalidData(format!("data row {}: missing column {}", row, col + 1))
    })?;
    raw.trim().parse().map_err(|_| {
        Error::InvalidData(format!(
            "data row {}, column {}: {:?} is not a number",
            row,
            col + 1,
            raw
        ))
    })
}

/// Write a sites file. `note` becomes a single `#` comment line above the
/// header and must not contain newlines.
pub fn write_sites(path: impl AsRef<Path>, sites: &[[f64; 2]], note: Option<&str>) -> Result<()> {
    let mut w = writer_with_note(path.as_ref(), note)?;
    w.write_record(["site_x", "site_y"])?;
    for s in sites {
        w.write_record(&[s[0].to_string(), s[1].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sites(path: impl AsRef<Path>) -> Result<Vec<[f64; 2]>> {
    let mut rdr = reader(path.as_ref())?;
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(["site_x", "site_y"]) {
        return Err(Error::InvalidData(format!(
            "expected header site_x,site_y, got {:?}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut sites = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        sites.push([parse_field(&rec, i, 0)?, parse_field(&rec, i, 1)?]);
    }
    Ok(sites)
}

/// Write an observations file with header `z1..zD`. Rows must be
/// rectangular and nonempty.
pub fn write_observations(
    path: impl AsRef<Path>,
    observations: &[Vec<f64>],
    note: Option<&str>,
) -> Result<()> {
    let dim = match observations.first() {
        Some(row) if !row.is_empty() => row.len(),
        _ => return Err(Error::InvalidData("no observations to write".into())),
    };
    if observations.iter().any(|row| row.len() != dim) {
        return Err(Error::InvalidData("ragged observation rows".into()));
    }
    let mut w = writer_with_note(path.as_ref(), note)?;
    w.write_record((1..=dim).map(|j| format!("z{}", j)))?;
    for row in observations {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Read an observations file. The header row sets the number of sites; its
/// column names are not interpreted.
pub fn read_observations(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let mut rdr = reader(path.as_ref())?;
    let dim = rdr.headers()?.len();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row: Result<Vec<f64>> = (0..dim).map(|c| parse_field(&rec, i, c)).collect();
        rows.push(row?);
    }
    Ok(rows)
}

/// Read a sites file and an observations file into one validated dataset.
pub fn read_dataset(
    sites_path: impl AsRef<Path>,
    obs_path: impl AsRef<Path>,
) -> Result<SpatialDataset> {
    SpatialDataset::new(read_sites(sites_path)?, read_observations(obs_path)?)
}

/// Write per-replicate partitions with header `replicate,partition`, the
/// partition in its canonical text form. Replicate indices are zero based,
/// matching the random stream child used to draw each replicate.
pub fn write_partitions(
    path: impl AsRef<Path>,
    partitions: &[SetPartition],
    note: Option<&str>,
) -> Result<()> {
    let mut w = writer_with_note(path.as_ref(), note)?;
    w.write_record(["replicate", "partition"])?;
    for (r, part) in partitions.iter().enumerate() {
        w.write_record(&[r.to_string(), part.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_partitions(path: impl AsRef<Path>) -> Result<Vec<(usize, SetPartition)>> {
    let mut rdr = reader(path.as_ref())?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let idx: usize = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidData(format!("data row {}: bad replicate index", i)))?;
        let part: SetPartition = rec
            .get(1)
            .ok_or_else(|| Error::InvalidData(format!("data row {}: missing partition", i)))?
            .trim()
            .parse()?;
        out.push((idx, part));
    }
    Ok(out)
}
