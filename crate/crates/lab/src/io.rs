//! Artifact files. Every write goes to a temporary file in the target
//! directory and is renamed into place, so readers never see partial output.

use std::io::Write;
use std::path::Path;

use asip_core::dynamics::DensityGrid;

use crate::error::LabError;

/// Version stamped into every CSV header comment and the density header.
pub const SCHEMA_VERSION: u32 = 1;

const DENSITY_MAGIC: &[u8; 8] = b"ASIPDEN1";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LabError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| LabError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| LabError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| LabError::io(path, e))?;
    tmp.persist(path).map_err(|e| LabError::io(path, e.error))?;
    Ok(())
}

/// A CSV table whose first line is `# asip <schema> v<version>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &'static str, header: &[&'static str]) -> Self {
        Self { schema, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, LabError> {
        let mut out = format!("# asip {} v{}\n", self.schema, SCHEMA_VERSION).into_bytes();
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| LabError::io(Path::new("<csv>"), e))?;
        drop(w);
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), LabError> {
        write_atomic(path, &self.to_bytes()?)
    }

    /// Read a table written by [`Table::write`], checking schema and version.
    pub fn read(path: &Path, schema: &'static str) -> Result<Vec<csv::StringRecord>, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
        let want = format!("# asip {schema} v{SCHEMA_VERSION}");
        if first != want {
            return Err(LabError::Format(format!("{}: expected header `{want}`, found `{first}`", path.display())));
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        Ok(r.records().collect::<Result<Vec<_>, _>>()?)
    }
}

/// Shortest round-trip decimal form, so CSV output is platform independent.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Little-endian density file: magic, version, bin count, residual,
/// iteration count, then the cell values.
pub fn density_to_bytes(grid: &DensityGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + 8 * grid.bins());
    out.extend_from_slice(DENSITY_MAGIC);
    out.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.bins() as u64).to_le_bytes());
    out.extend_from_slice(&grid.residual().to_le_bytes());
    out.extend_from_slice(&(grid.iterations() as u64).to_le_bytes());
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn density_from_bytes(bytes: &[u8]) -> Result<DensityGrid, LabError> {
    let bad = |what: &str| LabError::Format(format!("density file: {what}"));
    if bytes.len() < 36 || &bytes[..8] != DENSITY_MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    if u32_at(8) != SCHEMA_VERSION {
        return Err(bad("unsupported version"));
    }
    let bins = u64_at(12) as usize;
    let residual = f64::from_bits(u64_at(20));
    if bytes.len() != 36 + 8 * bins {
        return Err(bad("truncated"));
    }
    let values = (0..bins).map(|k| f64::from_bits(u64_at(36 + 8 * k))).collect();
    Ok(DensityGrid::from_values(values, residual)?)
}

pub fn read_density(path: &Path) -> Result<DensityGrid, LabError> {
    density_from_bytes(&std::fs::read(path).map_err(|e| LabError::io(path, e))?)
}
