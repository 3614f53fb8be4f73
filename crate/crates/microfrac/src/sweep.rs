//! Cross-product runs over shape, volume fraction, length scale and notch.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use microfrac_core::lookup::DamageLookup;

use crate::config::{Case, RunConfig};
use crate::error::Result;
use crate::output::write_text;
use crate::scenario::{solve_case, table_for};

pub const SWEEP_HEADER: &str = "shape,f,ell_mm,notched,T22_max_MPa,H22_at_max";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub case: Case,
    /// `(T22_max, H22_at_max)`; `None` when the case produced no converged step.
    pub peak: Option<(f64, f64)>,
    /// Why the case stopped early, if it did.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub path: PathBuf,
}

impl SweepSummary {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.failure.is_some())
    }
}

pub fn summary_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let c = &r.case;
        write!(out, "{},{},{},{},", c.shape, c.fraction, c.length_scale, c.notched).unwrap();
        match r.peak {
            Some((t, h)) => writeln!(out, "{t:.16e},{h:.16e}").unwrap(),
            None => out.push_str(",\n"),
        }
    }
    out
}

/// Runs every case, each writing its own files under `<out>/cases`. A case
/// that fails is reported in its row and does not stop the others.
pub fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<SweepSummary> {
    let cases = cfg.cases()?;
    // tables first, one per microstructure, so concurrent cases never race on the cache
    let mut tables: BTreeMap<String, DamageLookup> = BTreeMap::new();
    for c in &cases {
        let key = format!("{}_{}", c.shape, c.fraction);
        if !tables.contains_key(&key) {
            tables.insert(key, table_for(cfg, out, c.shape, c.fraction)?.0);
        }
    }
    let dir = out.join("cases");
    let rows: Vec<SweepRow> = cases
        .par_iter()
        .map(|c| {
            let table = &tables[&format!("{}_{}", c.shape, c.fraction)];
            match solve_case(cfg, c, table, &dir, &format!("{}_", c.stem())) {
                Ok(o) => SweepRow { case: *c, peak: o.run.peak(), failure: o.run.failure.map(|e| e.to_string()) },
                Err(e) => {
                    log::error!("{}: {e}", c.stem());
                    SweepRow { case: *c, peak: None, failure: Some(e.to_string()) }
                }
            }
        })
        .collect();
    let path = out.join("sweep.csv");
    write_text(&path, &summary_csv(&rows))?;
    Ok(SweepSummary { rows, path })
}
