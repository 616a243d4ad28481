//! Field snapshots: CSV for inspection, JSON header plus raw little-endian
//! `f64` blob for exact round trips.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::torus::field::{PeriodicField, SpaceTimeField};
use crate::torus::grid::GridSpec;

pub const FORMAT_TAG: &str = "burgers-fbsde-field";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub points_per_axis: usize,
    pub components: usize,
    /// Present for space-time fields; one slice per entry, in blob order.
    pub times: Option<Vec<f64>>,
    pub dtype: String,
    pub byte_order: String,
    pub value_count: usize,
    pub blob: String,
}

fn csv_header(dim: usize, components: usize, with_time: bool) -> Vec<String> {
    let mut cols = Vec::new();
    if with_time {
        cols.push("time_index".to_string());
        cols.push("time".to_string());
    }
    cols.extend((0..dim).map(|a| format!("i{a}")));
    cols.extend((0..dim).map(|a| format!("theta{a}")));
    cols.extend((0..components).map(|c| format!("v{c}")));
    cols
}

fn write_rows<T: Real, W: Write>(
    out: &mut csv::Writer<W>,
    field: &PeriodicField<T>,
    time: Option<(usize, T)>,
) -> Result<()> {
    let g = field.grid();
    let d = g.dim();
    let mut multi = vec![0usize; d];
    let mut row = Vec::new();
    for node in 0..g.node_count() {
        row.clear();
        if let Some((j, t)) = time {
            row.push(j.to_string());
            row.push(format!("{:e}", t.as_f64()));
        }
        g.multi_index(node, &mut multi);
        row.extend(multi.iter().map(usize::to_string));
        row.extend(multi.iter().map(|&i| format!("{:e}", g.coordinate::<f64>(i))));
        row.extend(field.node(node).iter().map(|v| format!("{:e}", v.as_f64())));
        out.write_record(&row)?;
    }
    Ok(())
}

pub fn write_field_csv<T: Real, W: Write>(field: &PeriodicField<T>, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(csv_header(field.grid().dim(), field.components(), false))?;
    write_rows(&mut out, field, None)?;
    out.flush()?;
    Ok(())
}

pub fn write_spacetime_csv<T: Real, W: Write>(field: &SpaceTimeField<T>, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(csv_header(field.grid().dim(), field.components(), true))?;
    for (j, (t, slice)) in field.times().iter().zip(field.slices()).enumerate() {
        write_rows(&mut out, slice, Some((j, *t)))?;
    }
    out.flush()?;
    Ok(())
}

fn blob_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("bin")
}

fn write_blob<'a, T: Real>(path: &Path, values: impl Iterator<Item = &'a T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_blob(path: &Path, count: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::ShapeMismatch(format!(
            "blob {} holds {} bytes, header promises {} values",
            path.display(),
            bytes.len(),
            count
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn header_for(grid: GridSpec, components: usize, times: Option<Vec<f64>>, count: usize, blob: &Path) -> FieldHeader {
    FieldHeader {
        format: FORMAT_TAG.into(),
        version: 1,
        dim: grid.dim(),
        points_per_axis: grid.points_per_axis(),
        components,
        times,
        dtype: "f64".into(),
        byte_order: "little".into(),
        value_count: count,
        blob: blob.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    }
}

/// Writes `<path>` (JSON header) and `<path>.bin` (values).
pub fn save_field<T: Real>(field: &PeriodicField<T>, path: &Path) -> Result<()> {
    let blob = blob_path(path);
    let header = header_for(field.grid(), field.components(), None, field.values().len(), &blob);
    write_blob(&blob, field.values().iter())?;
    std::fs::write(path, serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn save_spacetime<T: Real>(field: &SpaceTimeField<T>, path: &Path) -> Result<()> {
    let blob = blob_path(path);
    let count = field.slices().iter().map(|s| s.values().len()).sum();
    let times = field.times().iter().map(|t| t.as_f64()).collect();
    let header = header_for(field.grid(), field.components(), Some(times), count, &blob);
    write_blob(&blob, field.slices().iter().flat_map(|s| s.values()))?;
    std::fs::write(path, serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_header(path: &Path) -> Result<FieldHeader> {
    let header: FieldHeader = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if header.format != FORMAT_TAG || header.dtype != "f64" || header.byte_order != "little" {
        return Err(Error::InvalidArgument(format!(
            "{}: unsupported field format {:?}/{}/{}",
            path.display(),
            header.format,
            header.dtype,
            header.byte_order
        )));
    }
    Ok(header)
}

fn load_values(path: &Path, header: &FieldHeader) -> Result<Vec<f64>> {
    let blob = path.with_file_name(&header.blob);
    read_blob(&blob, header.value_count)
}

pub fn load_field<T: Real>(path: &Path) -> Result<PeriodicField<T>> {
    let header = read_header(path)?;
    if header.times.is_some() {
        return Err(Error::InvalidArgument(format!("{} holds a space-time field", path.display())));
    }
    let grid = GridSpec::new(header.dim, header.points_per_axis)?;
    let values = load_values(path, &header)?;
    PeriodicField::new(grid, header.components, values.into_iter().map(T::of).collect())
}

pub fn load_spacetime<T: Real>(path: &Path) -> Result<SpaceTimeField<T>> {
    let header = read_header(path)?;
    let times = header
        .times
        .clone()
        .ok_or_else(|| Error::InvalidArgument(format!("{} holds a single slice", path.display())))?;
    let grid = GridSpec::new(header.dim, header.points_per_axis)?;
    let values = load_values(path, &header)?;
    let per_slice = grid.node_count() * header.components;
    if values.len() != per_slice * times.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} values do not fill {} slices",
            values.len(),
            times.len()
        )));
    }
    let slices = values
        .chunks_exact(per_slice)
        .map(|c| PeriodicField::new(grid, header.components, c.iter().map(|&v| T::of(v)).collect()))
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(times.into_iter().map(T::of).collect(), slices)
}
