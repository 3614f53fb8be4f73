//! First-order reconstruction of the micro displacement at a macro point:
//! `u_k(x, ξ) = U_k(x) + ε N_kI(ξ) E_I(x)` with `E = (H11, H22, H12 + H21)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::element::b_matrices;
use crate::homogenize::{CellProblem, CorrectorSet, MicroMaterials};
use crate::mesh::{Point2, Quad4Mesh};
use crate::phase_field::MacroState;

/// Macro fields interpolated at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroPoint {
    pub x: Point2,
    pub element: usize,
    pub local: [f64; 2],
    pub u: [f64; 2],
    /// `grad[i][j] = ∂U_i/∂x_j`
    pub grad: [[f64; 2]; 2],
    pub damage: f64,
}

impl MacroPoint {
    /// Voigt strain `(H11, H22, H12 + H21)`.
    pub fn voigt_strain(&self) -> [f64; 3] {
        [self.grad[0][0], self.grad[1][1], self.grad[0][1] + self.grad[1][0]]
    }
}

/// Interpolates `U`, `∇U` and `d` at `x` from the converged macro state.
pub fn evaluate_macro_point(mesh: &Quad4Mesh, state: &MacroState, x: Point2) -> Result<MacroPoint> {
    if state.n_nodes() != mesh.n_nodes() {
        return Err(Error::Mismatch("macro state does not belong to this mesh"));
    }
    let (element, local) = mesh.locate_point(x)?;
    let qp = b_matrices(&mesh.element_coords(element), local[0], local[1], 1.0).map_err(|e| match e {
        Error::NonPositiveJacobian { det, .. } => Error::NonPositiveJacobian { element, det },
        other => other,
    })?;
    let conn = mesh.elements()[element];
    let mut u = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    let mut damage = 0.0;
    for a in 0..4 {
        let ua = state.displacement(conn[a]);
        for i in 0..2 {
            u[i] += qp.n[a] * ua[i];
            for j in 0..2 {
                grad[i][j] += qp.b_d[j][a] * ua[i];
            }
        }
        damage += qp.n[a] * state.damage(conn[a]);
    }
    Ok(MacroPoint { x, element, local, u, grad, damage: damage.clamp(0.0, 1.0) })
}

/// Reconstructed micro displacement on the cell mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroField {
    pub point: MacroPoint,
    /// Cell size `ε` in mm.
    pub epsilon: f64,
    /// `(u1, u2)` per cell node.
    pub u: Vec<[f64; 2]>,
}

impl MicroField {
    /// `u_i / U_i` per node, or `None` when `U_i = 0`.
    pub fn dimensionless(&self, component: usize) -> Option<Vec<f64>> {
        let big = self.point.u[component];
        if big == 0.0 {
            return None;
        }
        Some(self.u.iter().map(|v| v[component] / big).collect())
    }

    /// `u − U` per node.
    pub fn fluctuation(&self) -> Vec<[f64; 2]> {
        self.u.iter().map(|v| [v[0] - self.point.u[0], v[1] - self.point.u[1]]).collect()
    }

    /// Interleaved `(u1, u2)` for mean computations and export.
    pub fn interleaved(&self) -> Vec<f64> {
        self.u.iter().flat_map(|v| [v[0], v[1]]).collect()
    }
}

/// Combines a macro point with correctors solved at its damage level.
pub fn reconstruct_from(point: &MacroPoint, correctors: &CorrectorSet, epsilon: f64) -> Result<MicroField> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter { name: "cell size epsilon", reason: "must be positive" });
    }
    let e = point.voigt_strain();
    let u = (0..correctors.n_nodes())
        .map(|node| {
            let mut v = point.u;
            for (case, &ei) in e.iter().enumerate() {
                let n = correctors.at(case, node);
                v[0] += epsilon * n[0] * ei;
                v[1] += epsilon * n[1] * ei;
            }
            v
        })
        .collect();
    Ok(MicroField { point: *point, epsilon, u })
}

/// Locates `x`, re-solves the cell problem at the local damage level and
/// reconstructs the micro displacement.
pub fn reconstruct(
    mesh: &Quad4Mesh,
    state: &MacroState,
    cell_mesh: &Quad4Mesh,
    mats: &MicroMaterials,
    x: Point2,
    epsilon: f64,
) -> Result<MicroField> {
    let point = evaluate_macro_point(mesh, state, x)?;
    let correctors = CellProblem::new(cell_mesh)?.solve(mats, point.damage)?;
    reconstruct_from(&point, &correctors, epsilon)
}
