use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::dofmap::{DofMap, DofTarget};
use crate::fem::sparse::{CsrMatrix, SparseSystem};
use crate::mesh::Quad4Mesh;

/// Element matrix (row-major, `dofs.len()²`) and optional load vector in
/// terms of global DOF indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementContribution {
    pub dofs: Vec<usize>,
    pub matrix: Vec<f64>,
    /// Empty when the element adds no load.
    pub rhs: Vec<f64>,
}

/// Global DOF indices of every element, node-major.
pub fn element_dofs(mesh: &Quad4Mesh, dofs_per_node: usize) -> Vec<Vec<usize>> {
    mesh.elements()
        .iter()
        .map(|conn| conn.iter().flat_map(|&n| (0..dofs_per_node).map(move |c| n * dofs_per_node + c)).collect())
        .collect()
}

/// Reusable sparsity pattern of the reduced system for a fixed constraint
/// structure. Values are scattered sequentially in element order, so
/// repeated assemblies are bit-identical.
#[derive(Debug, Clone)]
pub struct Assembler {
    pattern: CsrMatrix,
    n_equations: usize,
}

impl Assembler {
    pub fn new(dofs: &DofMap, element_dofs: &[Vec<usize>]) -> Result<Self> {
        if !dofs.is_finalized() {
            return Err(Error::Mismatch("DofMap must be finalized before assembly"));
        }
        let n = dofs.n_equations();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut eqs = Vec::new();
        for list in element_dofs {
            eqs.clear();
            for &dof in list {
                if dof >= dofs.n_dofs() {
                    return Err(Error::IndexOutOfRange { index: dof, len: dofs.n_dofs() });
                }
                if let DofTarget::Equation(k) = dofs.target(dof) {
                    eqs.push(k);
                }
            }
            for &i in &eqs {
                rows[i].extend_from_slice(&eqs);
            }
        }
        // Keep the diagonal even for equations no element touches, so a
        // missing coupling shows up as a singular pivot, not a bad index.
        for (i, r) in rows.iter_mut().enumerate() {
            r.push(i);
        }
        Ok(Assembler { pattern: CsrMatrix::from_pattern(n, rows), n_equations: n })
    }

    pub fn n_equations(&self) -> usize {
        self.n_equations
    }

    /// Zero-valued matrix carrying the sparsity pattern.
    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    /// Scatters element contributions into a fresh reduced system.
    /// Prescribed columns move to the right-hand side.
    pub fn assemble<F>(&self, dofs: &DofMap, n_elements: usize, mut element: F) -> Result<SparseSystem>
    where
        F: FnMut(usize) -> Result<ElementContribution>,
    {
        let mut matrix = self.pattern.clone();
        let mut rhs = vec![0.0; self.n_equations];
        let mut targets = Vec::new();
        for e in 0..n_elements {
            let c = element(e)?;
            let n = c.dofs.len();
            if c.matrix.len() != n * n || !(c.rhs.is_empty() || c.rhs.len() == n) {
                return Err(Error::Mismatch("element contribution dimensions"));
            }
            targets.clear();
            for &dof in &c.dofs {
                if dof >= dofs.n_dofs() {
                    return Err(Error::IndexOutOfRange { index: dof, len: dofs.n_dofs() });
                }
                targets.push(dofs.target(dof));
            }
            for a in 0..n {
                let DofTarget::Equation(i) = targets[a] else { continue };
                if !c.rhs.is_empty() {
                    rhs[i] += c.rhs[a];
                }
                for b in 0..n {
                    let k = c.matrix[a * n + b];
                    match targets[b] {
                        DofTarget::Equation(j) => matrix.add(i, j, k)?,
                        DofTarget::Fixed(v) => rhs[i] -= k * v,
                    }
                }
            }
        }
        Ok(SparseSystem { matrix, rhs })
    }
}

/// One-shot assembly over every element of `mesh`.
pub fn assemble<F>(mesh: &Quad4Mesh, dofs: &DofMap, element: F) -> Result<SparseSystem>
where
    F: FnMut(usize) -> Result<ElementContribution>,
{
    let lists = element_dofs(mesh, dofs.dofs_per_node());
    Assembler::new(dofs, &lists)?.assemble(dofs, mesh.n_elements(), element)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Material, Point2};

    fn two_disjoint_squares() -> Quad4Mesh {
        let nodes = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(3.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(4.0, 1.0),
            Point2::new(3.0, 1.0),
        ];
        Quad4Mesh::from_parts(nodes, vec![[0, 1, 2, 3], [4, 5, 6, 7]], vec![Material::Matrix; 2]).unwrap()
    }

    fn identity(dofs: Vec<usize>) -> ElementContribution {
        let n = dofs.len();
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            matrix[i * n + i] = 1.0 + i as f64;
        }
        ElementContribution { dofs, matrix, rhs: Vec::new() }
    }

    #[test]
    fn single_element_equals_element_matrix() {
        let nodes = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];
        let mesh = Quad4Mesh::from_parts(nodes, vec![[0, 1, 2, 3]], vec![Material::Matrix]).unwrap();
        let mut dm = DofMap::new(4, 1);
        dm.finalize();
        let sys = assemble(&mesh, &dm, |_| Ok(identity(vec![0, 1, 2, 3]))).unwrap();
        let d = sys.matrix.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d[i][j], if i == j { 1.0 + i as f64 } else { 0.0 });
            }
        }
    }

    #[test]
    fn disjoint_groups_are_block_diagonal() {
        let mesh = two_disjoint_squares();
        let mut dm = DofMap::new(8, 1);
        dm.finalize();
        let lists = element_dofs(&mesh, 1);
        let sys = assemble(&mesh, &dm, |e| {
            let n = 4;
            Ok(ElementContribution { dofs: lists[e].clone(), matrix: vec![1.0; n * n], rhs: Vec::new() })
        })
        .unwrap();
        let d = sys.matrix.to_dense();
        for i in 0..8 {
            for j in 0..8 {
                let same = (i < 4) == (j < 4);
                assert_eq!(d[i][j] != 0.0, same, "({i},{j})");
            }
        }
    }

    #[test]
    fn prescribed_columns_move_to_rhs() {
        let mesh = two_disjoint_squares();
        let mut dm = DofMap::new(8, 1);
        dm.set_dirichlet(1, 0, 2.0).unwrap();
        dm.finalize();
        let lists = element_dofs(&mesh, 1);
        let sys = assemble(&mesh, &dm, |e| {
            Ok(ElementContribution { dofs: lists[e].clone(), matrix: vec![1.0; 16], rhs: vec![0.5; 4] })
        })
        .unwrap();
        assert_eq!(sys.matrix.n_rows(), 7);
        // equation 0 is dof 0: rhs 0.5 - 1.0 * 2.0
        assert_eq!(sys.rhs[0], -1.5);
        assert_eq!(sys.rhs[4], 0.5);
    }

    #[test]
    fn bad_dof_index() {
        let mesh = two_disjoint_squares();
        let mut dm = DofMap::new(8, 1);
        dm.finalize();
        let r = assemble(&mesh, &dm, |_| Ok(identity(vec![0, 1, 2, 99])));
        assert!(matches!(r, Err(Error::IndexOutOfRange { index: 99, .. })));
    }
}
