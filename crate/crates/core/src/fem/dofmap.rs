use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Where a global DOF ends up in the reduced system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofTarget {
    Equation(usize),
    Fixed(f64),
}

/// Global DOF numbering with Dirichlet values and master–slave ties.
///
/// DOF `k` of node `i` has global index `i * dofs_per_node + k`. Slaves are
/// resolved to their final master when tied, so a target lookup is a single
/// indirection. Call [`DofMap::finalize`] before using equation numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    dofs_per_node: usize,
    master: Vec<usize>,
    prescribed: Vec<Option<f64>>,
    equation: Vec<Option<usize>>,
    n_equations: usize,
    finalized: bool,
}

impl DofMap {
    pub fn new(n_nodes: usize, dofs_per_node: usize) -> Self {
        let n = n_nodes * dofs_per_node;
        DofMap {
            dofs_per_node,
            master: (0..n).collect(),
            prescribed: vec![None; n],
            equation: vec![None; n],
            n_equations: 0,
            finalized: false,
        }
    }

    pub fn dofs_per_node(&self) -> usize {
        self.dofs_per_node
    }

    pub fn n_dofs(&self) -> usize {
        self.master.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.master.len() / self.dofs_per_node
    }

    #[inline]
    pub fn dof(&self, node: usize, component: usize) -> usize {
        node * self.dofs_per_node + component
    }

    pub fn set_dirichlet(&mut self, node: usize, component: usize, value: f64) -> Result<()> {
        let dof = self.dof(node, component);
        self.check(dof)?;
        if self.master[dof] != dof {
            return Err(Error::ConstraintConflict { dof });
        }
        self.prescribed[dof] = Some(value);
        self.finalized = false;
        Ok(())
    }

    /// Ties every component of `slave` to the same component of `master`.
    pub fn tie_nodes(&mut self, slave: usize, master: usize) -> Result<()> {
        for c in 0..self.dofs_per_node {
            self.tie(self.dof(slave, c), self.dof(master, c))?;
        }
        Ok(())
    }

    pub fn tie(&mut self, slave: usize, master: usize) -> Result<()> {
        self.check(slave)?;
        self.check(master)?;
        let root = self.master[master];
        if root == slave {
            return Ok(());
        }
        if self.prescribed[slave].is_some() {
            return Err(Error::ConstraintConflict { dof: slave });
        }
        // Re-point anything that was tied to `slave`.
        for m in self.master.iter_mut() {
            if *m == slave {
                *m = root;
            }
        }
        self.master[slave] = root;
        self.finalized = false;
        Ok(())
    }

    fn check(&self, dof: usize) -> Result<()> {
        if dof >= self.master.len() {
            return Err(Error::IndexOutOfRange { index: dof, len: self.master.len() });
        }
        Ok(())
    }

    /// Numbers the free masters consecutively.
    pub fn finalize(&mut self) {
        let mut next = 0;
        for dof in 0..self.master.len() {
            self.equation[dof] = None;
            if self.master[dof] == dof && self.prescribed[dof].is_none() {
                self.equation[dof] = Some(next);
                next += 1;
            }
        }
        self.n_equations = next;
        self.finalized = true;
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn n_equations(&self) -> usize {
        self.n_equations
    }

    pub fn master_of(&self, dof: usize) -> usize {
        self.master[dof]
    }

    pub fn is_slave(&self, dof: usize) -> bool {
        self.master[dof] != dof
    }

    pub fn prescribed(&self, dof: usize) -> Option<f64> {
        self.prescribed[self.master[dof]]
    }

    #[inline]
    pub fn target(&self, dof: usize) -> DofTarget {
        debug_assert!(self.finalized, "DofMap used before finalize()");
        let m = self.master[dof];
        match self.prescribed[m] {
            Some(v) => DofTarget::Fixed(v),
            None => DofTarget::Equation(self.equation[m].expect("finalized free master")),
        }
    }

    /// Global DOF owning each equation.
    pub fn equation_dofs(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_equations];
        for (dof, eq) in self.equation.iter().enumerate() {
            if let Some(k) = eq {
                out[*k] = dof;
            }
        }
        out
    }

    /// Full DOF vector from reduced unknowns: prescribed values and slaves filled in.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        (0..self.n_dofs())
            .map(|dof| match self.target(dof) {
                DofTarget::Equation(k) => reduced[k],
                DofTarget::Fixed(v) => v,
            })
            .collect()
    }

    /// Like [`DofMap::expand`] but with every prescribed value taken as zero
    /// (for Newton increments).
    pub fn expand_increment(&self, reduced: &[f64]) -> Vec<f64> {
        (0..self.n_dofs())
            .map(|dof| match self.target(dof) {
                DofTarget::Equation(k) => reduced[k],
                DofTarget::Fixed(_) => 0.0,
            })
            .collect()
    }

    /// Restricts a full vector to the equation ordering, summing slave
    /// entries into their master (the transpose of [`DofMap::expand`]).
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_equations];
        for (dof, v) in full.iter().enumerate() {
            if let DofTarget::Equation(k) = self.target(dof) {
                out[k] += v;
            }
        }
        out
    }
}
