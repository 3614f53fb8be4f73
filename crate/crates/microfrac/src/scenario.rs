//! The `homogenize`, `solve` and `downscale` commands.

use std::path::{Path, PathBuf};

use microfrac_core::downscale::{evaluate_macro_point, reconstruct_from, MicroField};
use microfrac_core::homogenize::CellProblem;
use microfrac_core::lookup::{DamageLookup, Fraction};
use microfrac_core::mesh::build_unit_cell_mesh;
use microfrac_core::phase_field::{run_load_schedule, LoadRun};
use microfrac_core::{InclusionShape, Quad4Mesh};

use crate::config::{Case, RunConfig};
use crate::error::{Error, Result};
use crate::output::{write_curve, write_field, write_micro_field};
use crate::table_io::{load_table_checked, obtain_table};

/// Table for one microstructure: the configured file if there is one,
/// otherwise the cache under `<out>/tables`.
pub fn table_for(cfg: &RunConfig, out: &Path, shape: InclusionShape, fraction: Fraction) -> Result<(DamageLookup, PathBuf)> {
    let meta = cfg.table_metadata(shape, fraction);
    match &cfg.cell.table {
        Some(path) => Ok((load_table_checked(path, &meta)?, path.clone())),
        None => obtain_table(&out.join("tables"), &meta, cfg.cell.samples).map(|(t, p, _)| (t, p)),
    }
}

/// Builds (or finds) the table of every configured microstructure.
pub fn homogenize(cfg: &RunConfig, out: &Path) -> Result<Vec<(DamageLookup, PathBuf)>> {
    let mut tables = Vec::new();
    for &shape in &cfg.cell.shapes {
        for &fraction in &cfg.cell.fractions {
            tables.push(table_for(cfg, out, shape, fraction)?);
        }
    }
    Ok(tables)
}

#[derive(Debug)]
pub struct SolveOutcome {
    pub case: Case,
    pub run: LoadRun,
    pub mesh: Quad4Mesh,
    pub curve: PathBuf,
    pub fields: Vec<PathBuf>,
}

/// Runs one case and writes its curve and field snapshots under `out`,
/// with file names prefixed by `prefix`.
pub fn solve_case(cfg: &RunConfig, case: &Case, table: &DamageLookup, out: &Path, prefix: &str) -> Result<SolveOutcome> {
    let mesh = cfg.specimen_mesh(case.notched)?;
    let config = cfg.solver_config(case)?;
    log::info!("solving {} over {} load steps", case.stem(), config.schedule.len());
    let run = run_load_schedule(&mesh, table, &config)?;
    let curve = out.join(format!("{prefix}curve.csv"));
    write_curve(&run.records, &curve)?;
    let mut fields = Vec::new();
    for snap in &run.snapshots {
        let path = out.join(format!("{prefix}field_H22_{}.vtk", snap.requested_h22));
        let title = format!("{}; H22={:e}; delta={:e}", case.stem(), snap.requested_h22, snap.state.delta);
        write_field(&mesh, &snap.state, &title, &path)?;
        fields.push(path);
    }
    let path = out.join(format!("{prefix}field_final.vtk"));
    write_field(&mesh, &run.final_state, &format!("{}; final; delta={:e}", case.stem(), run.final_state.delta), &path)?;
    fields.push(path);
    if let Some(e) = &run.failure {
        log::warn!("{}: load schedule stopped early: {e}", case.stem());
    }
    Ok(SolveOutcome { case: *case, run, mesh, curve, fields })
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<SolveOutcome> {
    let case = cfg.single_case()?;
    let (table, _) = table_for(cfg, out, case.shape, case.fraction)?;
    solve_case(cfg, &case, &table, out, "")
}

#[derive(Debug)]
pub struct DownscaleOutcome {
    pub solve: SolveOutcome,
    pub field: MicroField,
    pub path: PathBuf,
}

/// Solves up to the requested strain, then reconstructs the micro field at
/// the configured point on the cell mesh.
pub fn downscale(cfg: &RunConfig, out: &Path) -> Result<DownscaleOutcome> {
    let point = cfg.output.point.ok_or_else(|| Error::Invalid("downscale needs [output] point".into()))?;
    let at = cfg.output.at_h22.ok_or_else(|| Error::Invalid("downscale needs [output] at_H22".into()))?;
    let mut cfg = cfg.clone();
    if let Some(mc) = cfg.macro_.as_mut() {
        mc.snapshots.push(at);
    }
    let case = cfg.single_case()?;
    let (table, _) = table_for(&cfg, out, case.shape, case.fraction)?;
    let solved = solve_case(&cfg, &case, &table, out, "")?;
    let snap = solved
        .run
        .snapshots
        .iter()
        .find(|s| s.requested_h22 == at)
        .ok_or_else(|| Error::Invalid(format!("the load schedule never reached H22 = {at}")))?;
    let macro_point = evaluate_macro_point(&solved.mesh, &snap.state, point)?;
    let meta = table.metadata();
    let cell_mesh = build_unit_cell_mesh(meta.cell_n, &meta.inclusion_spec()?)?;
    let correctors = CellProblem::new(&cell_mesh)?.solve(&meta.materials()?, macro_point.damage)?;
    let field = reconstruct_from(&macro_point, &correctors, cfg.cell.epsilon)?;
    let path = out.join("micro_field.vtk");
    write_micro_field(&cell_mesh, &field, &path)?;
    Ok(DownscaleOutcome { solve: solved, field, path })
}
