//! Look-up table files and the on-disk table cache.
//!
//! ```text
//! # microfrac-table v1; shape=circle; f=1/4; E_m=60000; nu_m=0.3; E_i=340000; nu_i=0.18; K=0.005; cell_n=64; g_variant=literal
//! d,C1111,C1122,C2222,C1112,C2212,C1212
//! 0.0000000000000000e0,1.0896...e5,...
//! ```
//!
//! Samples are written with 17 significant digits, so a save/load round
//! trip reproduces them bit for bit and the refitted spline is identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use microfrac_core::homogenize::{CellProblem, Degradation};
use microfrac_core::lookup::{sample_grid, DamageLookup, Fraction, TableMetadata, MIN_SAMPLES};
use microfrac_core::mesh::build_unit_cell_mesh;
use microfrac_core::InclusionShape;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "v1";
const MAGIC: &str = "# microfrac-table";
const COLUMNS: &str = "d,C1111,C1122,C2222,C1112,C2212,C1212";

pub fn header_line(meta: &TableMetadata) -> String {
    let (e_i, nu_i) = match meta.inclusion {
        Some((e, nu)) => (e.to_string(), nu.to_string()),
        None => ("matrix".to_string(), "matrix".to_string()),
    };
    format!(
        "{MAGIC} {FORMAT_VERSION}; shape={}; f={}; E_m={}; nu_m={}; E_i={e_i}; nu_i={nu_i}; K={}; cell_n={}; g_variant={}",
        meta.shape,
        meta.fraction,
        meta.e_matrix,
        meta.nu_matrix,
        meta.residual,
        meta.cell_n,
        meta.degradation.as_str()
    )
}

/// Serialized table, header and all.
pub fn table_to_string(table: &DamageLookup) -> String {
    let mut out = header_line(table.metadata());
    out.push('\n');
    out.push_str(COLUMNS);
    out.push('\n');
    for (d, row) in table.knots().iter().zip(table.samples()) {
        write!(out, "{d:.16e}").unwrap();
        for v in row {
            write!(out, ",{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_table(table: &DamageLookup, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, table_to_string(table)).map_err(|e| Error::io(path, e))
}

pub fn load_table(path: &Path) -> Result<DamageLookup> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(path, &text)
}

/// Loads a table and checks it was built for `expected`.
pub fn load_table_checked(path: &Path, expected: &TableMetadata) -> Result<DamageLookup> {
    let table = load_table(path)?;
    check_metadata(path, table.metadata(), expected)?;
    Ok(table)
}

pub fn check_metadata(path: &Path, found: &TableMetadata, expected: &TableMetadata) -> Result<()> {
    if found == expected {
        return Ok(());
    }
    let f = header_line(found);
    let e = header_line(expected);
    let diffs: Vec<String> = f
        .split("; ")
        .zip(e.split("; "))
        .filter(|(a, b)| a != b)
        .map(|(a, b)| format!("file has {a}, config wants {b}"))
        .collect();
    Err(Error::TableMismatch { path: path.to_path_buf(), message: diffs.join("; ") })
}

pub fn parse_table(path: &Path, text: &str) -> Result<DamageLookup> {
    let err = |line: usize, message: String| Error::Format { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty table file".into()))?;
    let meta = parse_header(header).map_err(|m| err(1, m))?;
    match lines.next() {
        Some((_, l)) if l.trim() == COLUMNS => {}
        Some((n, l)) => return Err(err(n, format!("expected column header '{COLUMNS}', got '{l}'"))),
        None => return Err(err(2, "missing column header (file truncated?)".into())),
    }
    let mut knots = Vec::new();
    let mut samples = Vec::new();
    let mut last_line = 2;
    for (n, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        last_line = n;
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != 7 {
            return Err(err(n, format!("expected 7 comma-separated values, found {}", fields.len())));
        }
        let mut v = [0.0; 7];
        for (slot, field) in v.iter_mut().zip(&fields) {
            *slot = field.trim().parse().map_err(|_| err(n, format!("invalid number '{}'", field.trim())))?;
        }
        knots.push((n, v[0]));
        samples.push([v[1], v[2], v[3], v[4], v[5], v[6]]);
    }
    if samples.len() < MIN_SAMPLES {
        return Err(err(
            last_line,
            format!("table has {} samples, at least {MIN_SAMPLES} required (file truncated?)", samples.len()),
        ));
    }
    let grid = sample_grid(samples.len());
    for (&(n, d), &expect) in knots.iter().zip(&grid) {
        if (d - expect).abs() > 1e-12 {
            return Err(err(n, format!("damage value {d} is off the uniform grid (expected {expect}; file truncated?)")));
        }
    }
    DamageLookup::from_samples(meta, samples).map_err(|e| err(3, e.to_string()))
}

fn parse_header(line: &str) -> std::result::Result<TableMetadata, String> {
    let rest = line.strip_prefix(MAGIC).ok_or_else(|| format!("not a table file: header must start with '{MAGIC}'"))?;
    let mut parts = rest.split(';').map(str::trim);
    let version = parts.next().unwrap_or("");
    if version != FORMAT_VERSION {
        return Err(format!("incompatible table version '{version}' (this build reads {FORMAT_VERSION})"));
    }
    let mut fields = std::collections::BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| format!("malformed header field '{p}'"))?;
        fields.insert(k.trim(), v.trim());
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| format!("header lacks '{k}'"));
    let num = |k: &str| -> std::result::Result<f64, String> {
        get(k)?.parse::<f64>().map_err(|_| format!("header field {k} is not a number"))
    };
    let shape = match get("shape")? {
        "circle" => InclusionShape::Circle,
        "square" => InclusionShape::Square,
        s => return Err(format!("unknown shape '{s}'")),
    };
    let fraction: Fraction = get("f")?.parse().map_err(|e: microfrac_core::Error| e.to_string())?;
    let inclusion = match (get("E_i")?, get("nu_i")?) {
        ("matrix", "matrix") => None,
        _ => Some((num("E_i")?, num("nu_i")?)),
    };
    let degradation: Degradation = get("g_variant")?.parse().map_err(|e: microfrac_core::Error| e.to_string())?;
    Ok(TableMetadata {
        shape,
        fraction,
        e_matrix: num("E_m")?,
        nu_matrix: num("nu_m")?,
        inclusion,
        residual: num("K")?,
        cell_n: get("cell_n")?.parse().map_err(|_| "header field cell_n is not an integer".to_string())?,
        degradation,
    })
}

/// Samples the cell over the damage grid, one rayon task per sample.
pub fn build_table_parallel(meta: TableMetadata, n_samples: usize) -> Result<DamageLookup> {
    if n_samples < MIN_SAMPLES {
        return Err(microfrac_core::Error::InvalidParameter { name: "table samples", reason: "need at least 21" }.into());
    }
    let mats = meta.materials()?;
    let mesh = build_unit_cell_mesh(meta.cell_n, &meta.inclusion_spec()?)?;
    let cell = CellProblem::new(&mesh)?;
    let samples = sample_grid(n_samples)
        .into_par_iter()
        .map(|d| cell.effective_tensor(&mats, d).map(|c| c.components()))
        .collect::<microfrac_core::Result<Vec<_>>>()?;
    Ok(DamageLookup::from_samples(meta, samples)?)
}

/// Cache file name. Every metadata field is spelled out with a round-trip
/// float format, so distinct metadata never share a file.
pub fn cache_file_name(meta: &TableMetadata, n_samples: usize) -> String {
    let inclusion = match meta.inclusion {
        Some((e, nu)) => format!("Ei{e}_nui{nu}"),
        None => "Eimatrix".to_string(),
    };
    format!(
        "table_{}_f{}-{}_Em{}_num{}_{inclusion}_K{}_n{}_{}_s{n_samples}.csv",
        meta.shape,
        meta.fraction.num(),
        meta.fraction.den(),
        meta.e_matrix,
        meta.nu_matrix,
        meta.residual,
        meta.cell_n,
        meta.degradation.as_str()
    )
}

/// Where a table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableSource {
    Cache,
    Built,
}

/// Returns the cached table for `meta`, building and saving it when the
/// cache has no valid copy.
pub fn obtain_table(cache_dir: &Path, meta: &TableMetadata, n_samples: usize) -> Result<(DamageLookup, PathBuf, TableSource)> {
    let path = cache_dir.join(cache_file_name(meta, n_samples));
    if path.is_file() {
        match load_table_checked(&path, meta) {
            Ok(t) if t.samples().len() == n_samples => {
                log::info!("using cached table {}", path.display());
                return Ok((t, path, TableSource::Cache));
            }
            Ok(_) => log::warn!("cached table {} has the wrong sample count; rebuilding", path.display()),
            Err(e) => log::warn!("ignoring cached table: {e}"),
        }
    }
    log::info!("building table {} with {n_samples} samples", microfrac_core::lookup::describe(meta));
    let table = build_table_parallel(*meta, n_samples)?;
    save_table(&table, &path)?;
    Ok((table, path, TableSource::Built))
}
