//! Curve CSV and legacy-VTK field files.

use std::fmt::Write as _;
use std::path::Path;

use microfrac_core::downscale::MicroField;
use microfrac_core::phase_field::{MacroState, StepRecord};
use microfrac_core::Quad4Mesh;

use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "step,delta_mm,H22_avg,T22_avg_MPa,max_d,newton_iters";

pub fn curve_csv(records: &[StepRecord]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in records.iter().filter(|r| r.converged) {
        writeln!(out, "{},{:.16e},{:.16e},{:.16e},{:.16e},{}", r.step, r.delta, r.h22, r.t22, r.max_d, r.newton_iterations)
            .unwrap();
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_curve(records: &[StepRecord], path: &Path) -> Result<()> {
    write_text(path, &curve_csv(records))
}

/// Nodal array attached to a VTK file.
#[derive(Debug, Clone, Copy)]
pub enum PointData<'a> {
    /// In-plane vectors, padded with a zero third component.
    Vectors(&'a str, &'a [[f64; 2]]),
    Scalars(&'a str, &'a [f64]),
}

/// Legacy ASCII unstructured grid of the mesh with the given point arrays.
/// The title is truncated to the 256 characters the format allows.
pub fn vtk_string(mesh: &Quad4Mesh, title: &str, data: &[PointData<'_>]) -> Result<String> {
    let n = mesh.n_nodes();
    for d in data {
        let (name, len) = match d {
            PointData::Vectors(name, v) => (name, v.len()),
            PointData::Scalars(name, v) => (name, v.len()),
        };
        if len != n || name.contains(char::is_whitespace) {
            return Err(Error::Invalid(format!("point array '{name}' has {len} values for {n} nodes")));
        }
    }
    let title: String = title.lines().next().unwrap_or("").chars().take(255).collect();
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {n} double").unwrap();
    for p in mesh.nodes() {
        writeln!(s, "{:.16e} {:.16e} 0", p.x1, p.x2).unwrap();
    }
    let m = mesh.n_elements();
    writeln!(s, "CELLS {m} {}", 5 * m).unwrap();
    for e in mesh.elements() {
        writeln!(s, "4 {} {} {} {}", e[0], e[1], e[2], e[3]).unwrap();
    }
    writeln!(s, "CELL_TYPES {m}").unwrap();
    for _ in 0..m {
        s.push_str("9\n");
    }
    if !data.is_empty() {
        writeln!(s, "POINT_DATA {n}").unwrap();
    }
    for d in data {
        match d {
            PointData::Vectors(name, v) => {
                writeln!(s, "VECTORS {name} double").unwrap();
                for u in *v {
                    writeln!(s, "{:.16e} {:.16e} 0", u[0], u[1]).unwrap();
                }
            }
            PointData::Scalars(name, v) => {
                writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
                for x in *v {
                    writeln!(s, "{x:.16e}").unwrap();
                }
            }
        }
    }
    Ok(s)
}

/// Displacement `U` and phase field `d` of a macro state.
pub fn write_field(mesh: &Quad4Mesh, state: &MacroState, title: &str, path: &Path) -> Result<()> {
    let u = state.displacement_field();
    let d = state.damage_field();
    let text = vtk_string(mesh, title, &[PointData::Vectors("U", &u), PointData::Scalars("d", &d)])?;
    write_text(path, &text)
}

/// Title line recording where and how the micro field was reconstructed.
pub fn micro_field_title(field: &MicroField) -> String {
    let p = &field.point;
    format!(
        "microfrac micro field; x=({:.9e},{:.9e}); eps={:.9e}; d={:.9e}; U=({:.9e},{:.9e}); gradU=(({:.9e},{:.9e}),({:.9e},{:.9e}))",
        p.x.x1, p.x.x2, field.epsilon, p.damage, p.u[0], p.u[1], p.grad[0][0], p.grad[0][1], p.grad[1][0], p.grad[1][1]
    )
}

/// Writes `u` as a vector plus the dimensionless components `u1/U1` and
/// `u2/U2` as scalars; a component is left out when its `U_i` is zero.
pub fn write_micro_field(cell_mesh: &Quad4Mesh, field: &MicroField, path: &Path) -> Result<()> {
    let u1: Vec<f64> = field.u.iter().map(|v| v[0]).collect();
    let u2: Vec<f64> = field.u.iter().map(|v| v[1]).collect();
    let t1 = field.dimensionless(0);
    let t2 = field.dimensionless(1);
    let mut data = vec![PointData::Vectors("u", &field.u), PointData::Scalars("u1", &u1), PointData::Scalars("u2", &u2)];
    match &t1 {
        Some(t) => data.push(PointData::Scalars("u1_tilde", t)),
        None => log::warn!("U1 = 0 at the macro point; u1_tilde is not written"),
    }
    match &t2 {
        Some(t) => data.push(PointData::Scalars("u2_tilde", t)),
        None => log::warn!("U2 = 0 at the macro point; u2_tilde is not written"),
    }
    let text = vtk_string(cell_mesh, &micro_field_title(field), &data)?;
    write_text(path, &text)
}
