//! First-order periodic cell problem and the homogenized elastic tensor.
//!
//! For each unit macroscopic strain `e_I` (`I` = 11, 22, 12 with the shear
//! case as unit engineering shear) the corrector `N_I` is the periodic,
//! zero-mean field with
//!
//! ```text
//! ∫_Q (B v)ᵀ C (B N_I + e_I) dξ = 0   for all periodic v,
//! ```
//!
//! and the homogenized stiffness is the cell average of the corrected strain
//! energy, `C_IJ = ⟨(e_I + B N_I)ᵀ C (e_J + B N_J)⟩`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::assembly::{element_dofs, Assembler, ElementContribution};
use crate::fem::dofmap::DofMap;
use crate::fem::element::{element_quadrature, QuadPoint};
use crate::fem::solve::{annotate, best_ordering, Factorization, Method};
use crate::mesh::{Material, Quad4Mesh};
use crate::tensor::ElasticTensor;

/// Degradation function applied to the matrix stiffness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Degradation {
    /// `g(d) = (1 − d)² + K`, so `g(0) = 1 + K`.
    #[default]
    Literal,
    /// `g(d) = (1 − K)(1 − d)² + K`, so `g(0) = 1`.
    Normalized,
}

impl Degradation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Degradation::Literal => "literal",
            Degradation::Normalized => "normalized",
        }
    }

    pub fn value(&self, d: f64, residual: f64) -> f64 {
        let s = (1.0 - d) * (1.0 - d);
        match self {
            Degradation::Literal => s + residual,
            Degradation::Normalized => (1.0 - residual) * s + residual,
        }
    }

    pub fn derivative(&self, d: f64, residual: f64) -> f64 {
        match self {
            Degradation::Literal => -2.0 * (1.0 - d),
            Degradation::Normalized => -2.0 * (1.0 - residual) * (1.0 - d),
        }
    }

    pub fn second_derivative(&self, residual: f64) -> f64 {
        match self {
            Degradation::Literal => 2.0,
            Degradation::Normalized => 2.0 * (1.0 - residual),
        }
    }
}

impl core::str::FromStr for Degradation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "literal" => Ok(Degradation::Literal),
            "normalized" => Ok(Degradation::Normalized),
            other => Err(Error::Parse(alloc::format!("unknown degradation variant '{other}'"))),
        }
    }
}

/// Stiffness of the inclusion phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InclusionPhase {
    /// A distinct, undamageable material.
    Tensor(ElasticTensor),
    /// Same material as the matrix, degrading with it. This turns the cell
    /// homogeneous at every damage level.
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroMaterials {
    pub matrix: ElasticTensor,
    pub inclusion: InclusionPhase,
    /// Residual stiffness `K`.
    pub residual: f64,
    pub degradation: Degradation,
}

impl MicroMaterials {
    pub fn new(
        matrix: ElasticTensor,
        inclusion: InclusionPhase,
        residual: f64,
        degradation: Degradation,
    ) -> Result<Self> {
        if !(residual > 0.0 && residual < 1.0) {
            return Err(Error::InvalidParameter { name: "residual stiffness K", reason: "must lie in (0, 1)" });
        }
        if !matrix.is_positive_definite() {
            return Err(Error::InvalidParameter { name: "matrix tensor", reason: "not positive definite" });
        }
        if let InclusionPhase::Tensor(c) = inclusion {
            if !c.is_positive_definite() {
                return Err(Error::InvalidParameter { name: "inclusion tensor", reason: "not positive definite" });
            }
        }
        Ok(MicroMaterials { matrix, inclusion, residual, degradation })
    }

    pub fn g(&self, d: f64) -> f64 {
        self.degradation.value(d, self.residual)
    }

    /// Matrix and inclusion stiffness at damage `d`.
    pub fn phase_tensors(&self, d: f64) -> Result<(ElasticTensor, ElasticTensor)> {
        check_damage(d)?;
        let m = self.matrix.scaled(self.g(d));
        let i = match self.inclusion {
            InclusionPhase::Tensor(c) => c,
            InclusionPhase::Matrix => m,
        };
        Ok((m, i))
    }
}

fn check_damage(d: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::DamageOutOfRange(d));
    }
    Ok(())
}

/// `[(1 − d)² + K] · C_0`.
pub fn degrade_matrix(c0: &ElasticTensor, d: f64, residual: f64) -> Result<ElasticTensor> {
    check_damage(d)?;
    Ok(c0.scaled(Degradation::Literal.value(d, residual)))
}

/// Nodal corrector fields for the three unit strain cases, interleaved
/// `(N1, N2)` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorSet {
    pub fields: [Vec<f64>; 3],
    pub damage: f64,
    n_nodes: usize,
    n_elements: usize,
}

impl CorrectorSet {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Corrector displacement `N_I` at node `node`.
    pub fn at(&self, case: usize, node: usize) -> [f64; 2] {
        [self.fields[case][2 * node], self.fields[case][2 * node + 1]]
    }

    fn check(&self, mesh: &Quad4Mesh) -> Result<()> {
        if self.n_nodes != mesh.n_nodes() || self.n_elements != mesh.n_elements() {
            return Err(Error::Mismatch("correctors were solved on a different cell mesh"));
        }
        Ok(())
    }
}

/// Unit strain vectors for the three cases.
pub const UNIT_STRAINS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Precomputed cell discretization, reusable across damage levels.
#[derive(Debug, Clone)]
pub struct CellProblem {
    quadrature: Vec<[QuadPoint; 4]>,
    element_dofs: Vec<Vec<usize>>,
    materials: Vec<Material>,
    dofs: DofMap,
    assembler: Assembler,
    ordering: Vec<usize>,
    coords: Vec<crate::mesh::Point2>,
    area: f64,
    n_nodes: usize,
}

impl CellProblem {
    /// Builds the periodic DOF map (slaves tied to masters, one master node
    /// pinned) and the sparsity pattern.
    pub fn new(mesh: &Quad4Mesh) -> Result<Self> {
        let master = mesh.periodic_master().ok_or(Error::Mismatch("cell mesh has no periodic pairing"))?;
        let mut dofs = DofMap::new(mesh.n_nodes(), 2);
        for (node, &m) in master.iter().enumerate() {
            if m != node {
                dofs.tie_nodes(node, m)?;
            }
        }
        let pin = master[0];
        dofs.set_dirichlet(pin, 0, 0.0)?;
        dofs.set_dirichlet(pin, 1, 0.0)?;
        dofs.finalize();
        let quadrature =
            (0..mesh.n_elements()).map(|e| element_quadrature(e, &mesh.element_coords(e))).collect::<Result<Vec<_>>>()?;
        let area = quadrature.iter().flatten().map(|q| q.weight).sum();
        let element_dofs = element_dofs(mesh, 2);
        let assembler = Assembler::new(&dofs, &element_dofs)?;
        let ordering = best_ordering(assembler.pattern(), Method::Ldlt, &[]);
        Ok(CellProblem {
            quadrature,
            element_dofs,
            materials: mesh.materials().to_vec(),
            dofs,
            assembler,
            ordering,
            coords: mesh.nodes().to_vec(),
            area,
            n_nodes: mesh.n_nodes(),
        })
    }

    pub fn n_equations(&self) -> usize {
        self.dofs.n_equations()
    }

    fn tensors(&self, mats: &MicroMaterials, d: f64) -> Result<[ElasticTensor; 2]> {
        let (m, i) = mats.phase_tensors(d)?;
        Ok([m, i])
    }

    fn tensor_of(t: &[ElasticTensor; 2], m: Material) -> &ElasticTensor {
        match m {
            Material::Matrix => &t[0],
            Material::Inclusion => &t[1],
        }
    }

    /// Solves the three corrector problems at damage `d`.
    pub fn solve(&self, mats: &MicroMaterials, d: f64) -> Result<CorrectorSet> {
        let t = self.tensors(mats, d)?;
        let n_el = self.quadrature.len();
        let mut loads = [vec![0.0; 2 * self.n_nodes], vec![0.0; 2 * self.n_nodes], vec![0.0; 2 * self.n_nodes]];
        let system = self.assembler.assemble(&self.dofs, n_el, |e| {
            let c = Self::tensor_of(&t, self.materials[e]);
            let mut k = vec![0.0; 64];
            for qp in &self.quadrature[e] {
                // CB (3×8)
                let mut cb = [[0.0; 8]; 3];
                for r in 0..3 {
                    for a in 0..8 {
                        cb[r][a] = (0..3).map(|s| c.0[r][s] * qp.b_u[s][a]).sum();
                    }
                }
                for a in 0..8 {
                    for b in 0..8 {
                        k[a * 8 + b] += (0..3).map(|r| qp.b_u[r][a] * cb[r][b]).sum::<f64>() * qp.weight;
                    }
                }
                for (case, e_i) in UNIT_STRAINS.iter().enumerate() {
                    let sigma = c.apply(e_i);
                    for a in 0..8 {
                        let f: f64 = (0..3).map(|r| qp.b_u[r][a] * sigma[r]).sum();
                        loads[case][self.element_dofs[e][a]] -= f * qp.weight;
                    }
                }
            }
            Ok(ElementContribution { dofs: self.element_dofs[e].clone(), matrix: k, rhs: Vec::new() })
        })?;
        let fact = Factorization::with_ordering(&system.matrix, Method::Ldlt, self.ordering.clone())
            .map_err(|err| annotate(err, &system.matrix, &self.dofs, Some(&self.coords)))?;
        let mut fields: [Vec<f64>; 3] = Default::default();
        for case in 0..3 {
            let rhs = self.dofs.restrict(&loads[case]);
            let x = fact.solve(&system.matrix, &rhs)?;
            let mut full = self.dofs.expand(&x);
            let mean = self.mean(&full, 2);
            for (k, v) in full.iter_mut().enumerate() {
                *v -= mean[k % 2];
            }
            fields[case] = full;
        }
        Ok(CorrectorSet { fields, damage: d, n_nodes: self.n_nodes, n_elements: n_el })
    }

    /// Quadrature-weighted cell mean of each component of a nodal field.
    pub fn mean(&self, field: &[f64], components: usize) -> Vec<f64> {
        let mut acc = vec![0.0; components];
        for (e, qps) in self.quadrature.iter().enumerate() {
            let conn = &self.element_dofs[e];
            for qp in qps {
                for a in 0..4 {
                    let node = conn[2 * a] / 2;
                    for c in 0..components {
                        acc[c] += qp.n[a] * field[node * components + c] * qp.weight;
                    }
                }
            }
        }
        acc.iter_mut().for_each(|v| *v /= self.area);
        acc
    }

    /// Strain `e_I + B N_I` at every quadrature point of element `e`.
    fn corrected_strains(&self, correctors: &CorrectorSet, e: usize) -> [[[f64; 3]; 3]; 4] {
        let dofs = &self.element_dofs[e];
        let mut out = [[[0.0; 3]; 3]; 4];
        for case in 0..3 {
            let mut u = [0.0; 8];
            for a in 0..8 {
                u[a] = correctors.fields[case][dofs[a]];
            }
            for (g, qp) in self.quadrature[e].iter().enumerate() {
                let s = qp.strain(&u);
                for r in 0..3 {
                    out[g][case][r] = UNIT_STRAINS[case][r] + s[r];
                }
            }
        }
        out
    }

    /// `C_IJ = ⟨(e_I + B N_I)ᵀ C (e_J + B N_J)⟩`.
    pub fn homogenize(&self, mats: &MicroMaterials, correctors: &CorrectorSet) -> Result<ElasticTensor> {
        if correctors.n_nodes != self.n_nodes || correctors.n_elements != self.quadrature.len() {
            return Err(Error::Mismatch("correctors were solved on a different cell mesh"));
        }
        let t = self.tensors(mats, correctors.damage)?;
        let mut out = [[0.0; 3]; 3];
        for e in 0..self.quadrature.len() {
            let c = Self::tensor_of(&t, self.materials[e]);
            let strains = self.corrected_strains(correctors, e);
            for (g, qp) in self.quadrature[e].iter().enumerate() {
                for i in 0..3 {
                    let sigma = c.apply(&strains[g][i]);
                    for j in 0..3 {
                        out[i][j] += (0..3).map(|r| sigma[r] * strains[g][j][r]).sum::<f64>() * qp.weight;
                    }
                }
            }
        }
        out.iter_mut().flatten().for_each(|v| *v /= self.area);
        Ok(ElasticTensor(out))
    }

    /// Average stress under each corrected unit strain, `⟨C (e_J + B N_J)⟩_I`.
    /// Equal to [`CellProblem::homogenize`] when the correctors satisfy the
    /// cell problem, so it serves as an independent check.
    pub fn mean_stress_tensor(&self, mats: &MicroMaterials, correctors: &CorrectorSet) -> Result<ElasticTensor> {
        let t = self.tensors(mats, correctors.damage)?;
        let mut out = [[0.0; 3]; 3];
        for e in 0..self.quadrature.len() {
            let c = Self::tensor_of(&t, self.materials[e]);
            let strains = self.corrected_strains(correctors, e);
            for (g, qp) in self.quadrature[e].iter().enumerate() {
                for j in 0..3 {
                    let sigma = c.apply(&strains[g][j]);
                    for i in 0..3 {
                        out[i][j] += sigma[i] * qp.weight;
                    }
                }
            }
        }
        out.iter_mut().flatten().for_each(|v| *v /= self.area);
        Ok(ElasticTensor(out))
    }

    /// Correctors and homogenized tensor in one call.
    pub fn effective_tensor(&self, mats: &MicroMaterials, d: f64) -> Result<ElasticTensor> {
        let n = self.solve(mats, d)?;
        self.homogenize(mats, &n)
    }
}

/// Solves the three cell problems on `mesh` at damage `d`.
pub fn solve_correctors(mesh: &Quad4Mesh, mats: &MicroMaterials, d: f64) -> Result<CorrectorSet> {
    CellProblem::new(mesh)?.solve(mats, d)
}

/// Homogenized tensor from previously solved correctors.
pub fn homogenize(mesh: &Quad4Mesh, mats: &MicroMaterials, correctors: &CorrectorSet) -> Result<ElasticTensor> {
    correctors.check(mesh)?;
    CellProblem::new(mesh)?.homogenize(mats, correctors)
}

/// Area-weighted cell mean of each component of a nodal field with
/// `components` values per node.
pub fn upscale_mean(mesh: &Quad4Mesh, field: &[f64], components: usize) -> Result<Vec<f64>> {
    if components == 0 || field.len() != mesh.n_nodes() * components {
        return Err(Error::Mismatch("field length does not match the mesh"));
    }
    let mut acc = vec![0.0; components];
    let mut area = 0.0;
    for e in 0..mesh.n_elements() {
        let conn = mesh.elements()[e];
        for qp in element_quadrature(e, &mesh.element_coords(e))? {
            area += qp.weight;
            for a in 0..4 {
                for c in 0..components {
                    acc[c] += qp.n[a] * field[conn[a] * components + c] * qp.weight;
                }
            }
        }
    }
    acc.iter_mut().for_each(|v| *v /= area);
    Ok(acc)
}
