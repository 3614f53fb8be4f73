//! Coupled displacement / phase-field solver on the macroscale specimen.
//!
//! Unknowns are interleaved per node as `(u1, u2, d)`. With `x` the nodal
//! vector, the residual is `R = −∂Π/∂x` for the regularized energy
//!
//! ```text
//! Π = ∫ ½ εᵀ C(d) ε + G_C (d²/(2ℓ) + ℓ/2 |∇d|²) dΩ
//! ```
//!
//! (plus an optional viscous term), and each load step is solved by Newton
//! iteration on the full block tangent `K = −∂R/∂x`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::assembly::{Assembler, ElementContribution};
use crate::fem::dofmap::DofMap;
use crate::fem::element::{element_quadrature, QuadPoint};
use crate::fem::solve::{annotate, best_ordering, Factorization, Method};
use crate::fem::sparse::CsrMatrix;
use crate::lookup::DamageLookup;
use crate::mesh::{NodeSet, Point2, Quad4Mesh};

pub const DOFS_PER_NODE: usize = 3;

/// Lateral condition on the loaded edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grips {
    /// `u1 = 0` only at the middle node of each loaded edge.
    #[default]
    Anchored,
    /// `u1 = 0` on every node of the loaded edges.
    Clamped,
}

/// How the load factor `Δ` enters the boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loading {
    /// `u2 = ±Δ` on the top/bottom edges.
    Tension(Grips),
    /// `u = Δ · G · x` on every outer boundary node.
    Affine([[f64; 2]; 2]),
}

impl Default for Loading {
    fn default() -> Self {
        Loading::Tension(Grips::Anchored)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Full block tangent.
    #[default]
    Monolithic,
    /// Coupling blocks dropped, so each iteration solves the two fields
    /// independently against the other's last iterate.
    Staggered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Irreversibility {
    /// After each step, nodal `d` is projected onto `[d_prev, 1]`.
    #[default]
    Clamp,
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// `G_C` in N/mm.
    pub fracture_energy: f64,
    /// `ℓ` in mm.
    pub length_scale: f64,
    /// Imposed `Δ` values in mm.
    pub schedule: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_bisections: usize,
    /// Viscous regularization `η` (0 disables it).
    pub viscosity: f64,
    /// Pseudo-time per load step for the viscous term.
    pub time_step: f64,
    pub irreversibility: Irreversibility,
    pub scheme: Scheme,
    pub loading: Loading,
    /// Average strains `H22` at which field snapshots are kept.
    pub snapshot_strains: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            fracture_energy: 6.0,
            length_scale: 0.4,
            schedule: Vec::new(),
            tolerance: 1e-8,
            max_iterations: 25,
            max_bisections: 6,
            viscosity: 0.0,
            time_step: 1.0,
            irreversibility: Irreversibility::Clamp,
            scheme: Scheme::Monolithic,
            loading: Loading::default(),
            snapshot_strains: Vec::new(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fracture_energy > 0.0) {
            return Err(Error::InvalidParameter { name: "G_C", reason: "must be positive" });
        }
        if !(self.length_scale > 0.0) {
            return Err(Error::InvalidParameter { name: "length scale", reason: "must be positive" });
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidParameter { name: "Newton tolerance", reason: "must be positive" });
        }
        if !(self.viscosity >= 0.0) || !(self.time_step > 0.0) {
            return Err(Error::InvalidParameter { name: "viscosity", reason: "needs eta >= 0 and dt > 0" });
        }
        if self.schedule.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter { name: "load schedule", reason: "non-finite entry" });
        }
        Ok(())
    }

    /// `steps` equal increments from 0 to `delta_max`.
    pub fn uniform_schedule(delta_max: f64, steps: usize) -> Vec<f64> {
        (1..=steps).map(|k| delta_max * k as f64 / steps as f64).collect()
    }
}

/// Per-step summary of a converged (or failed) load step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub delta: f64,
    pub h22: f64,
    pub t22: f64,
    pub max_d: f64,
    pub newton_iterations: usize,
    pub converged: bool,
}

/// Nodal unknowns plus the history needed for the next step.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    /// `(u1, u2, d)` per node.
    pub x: Vec<f64>,
    /// Nodal `d` of the last accepted step.
    pub d_prev: Vec<f64>,
    pub delta: f64,
    pub record: Option<StepRecord>,
}

impl MacroState {
    pub fn zero(n_nodes: usize) -> Self {
        MacroState { x: vec![0.0; DOFS_PER_NODE * n_nodes], d_prev: vec![0.0; n_nodes], delta: 0.0, record: None }
    }

    pub fn n_nodes(&self) -> usize {
        self.x.len() / DOFS_PER_NODE
    }

    pub fn displacement(&self, node: usize) -> [f64; 2] {
        [self.x[3 * node], self.x[3 * node + 1]]
    }

    pub fn damage(&self, node: usize) -> f64 {
        self.x[3 * node + 2]
    }

    pub fn damage_field(&self) -> Vec<f64> {
        self.x.chunks_exact(3).map(|c| c[2]).collect()
    }

    pub fn displacement_field(&self) -> Vec<[f64; 2]> {
        self.x.chunks_exact(3).map(|c| [c[0], c[1]]).collect()
    }

    pub fn max_damage(&self) -> f64 {
        self.x.chunks_exact(3).fold(0.0_f64, |m, c| m.max(c[2]))
    }
}

/// Residual split by field, in full (unconstrained) node numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `(R_u1, R_u2)` per node.
    pub r_u: Vec<f64>,
    pub r_d: Vec<f64>,
}

/// Tangent blocks in full node numbering: `uu` is `2N × 2N`, `ud` is
/// `2N × N`, `du` is `N × 2N`, `dd` is `N × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentBlocks {
    pub uu: CsrMatrix,
    pub ud: CsrMatrix,
    pub du: CsrMatrix,
    pub dd: CsrMatrix,
}

/// Global DOF and its prescribed value per unit `Δ`.
fn prescribed_dofs(mesh: &Quad4Mesh, loading: &Loading) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    let need = |set: NodeSet| {
        let s = mesh.node_set(set);
        if s.is_empty() {
            Err(Error::MissingNodeSet(set.name()))
        } else {
            Ok(s)
        }
    };
    match loading {
        Loading::Tension(grips) => {
            let top = need(NodeSet::Top)?;
            let bottom = need(NodeSet::Bottom)?;
            for (set, sign) in [(top, 1.0), (bottom, -1.0)] {
                for &n in set {
                    out.push((3 * n + 1, sign));
                }
                match grips {
                    Grips::Clamped => out.extend(set.iter().map(|&n| (3 * n, 0.0))),
                    Grips::Anchored => {
                        let nodes = mesh.nodes();
                        let (lo, hi) = set.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &n| {
                            (lo.min(nodes[n].x1), hi.max(nodes[n].x1))
                        });
                        let mid = 0.5 * (lo + hi);
                        let anchor = *set
                            .iter()
                            .min_by(|&&a, &&b| {
                                let da = libm::fabs(nodes[a].x1 - mid);
                                let db = libm::fabs(nodes[b].x1 - mid);
                                da.partial_cmp(&db).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
                            })
                            .expect("non-empty set");
                        out.push((3 * anchor, 0.0));
                    }
                }
            }
        }
        Loading::Affine(g) => {
            let mut nodes: Vec<usize> = [NodeSet::Top, NodeSet::Bottom, NodeSet::Left, NodeSet::Right]
                .iter()
                .flat_map(|&s| mesh.node_set(s).iter().copied())
                .collect();
            if nodes.is_empty() {
                return Err(Error::MissingNodeSet("boundary"));
            }
            nodes.sort_unstable();
            nodes.dedup();
            for n in nodes {
                let p = mesh.nodes()[n];
                out.push((3 * n, g[0][0] * p.x1 + g[0][1] * p.x2));
                out.push((3 * n + 1, g[1][0] * p.x1 + g[1][1] * p.x2));
            }
        }
    }
    Ok(out)
}

/// Dirichlet data for load level `delta`. The phase field is left free
/// (natural zero-flux condition).
pub fn apply_boundary_conditions(mesh: &Quad4Mesh, loading: &Loading, delta: f64) -> Result<DofMap> {
    let mut dm = DofMap::new(mesh.n_nodes(), DOFS_PER_NODE);
    for (dof, unit) in prescribed_dofs(mesh, loading)? {
        dm.set_dirichlet(dof / 3, dof % 3, delta * unit)?;
    }
    dm.finalize();
    Ok(dm)
}

/// Precomputed discretization of the macro problem.
#[derive(Debug, Clone)]
pub struct MacroProblem<'a> {
    mesh: &'a Quad4Mesh,
    table: &'a DamageLookup,
    config: SolverConfig,
    quadrature: Vec<[QuadPoint; 4]>,
    element_dofs: Vec<Vec<usize>>,
    /// Constraint structure with all prescribed values zero (for increments).
    dofs: DofMap,
    assembler: Assembler,
    ordering: Vec<usize>,
    prescribed: Vec<(usize, f64)>,
    width: f64,
}

/// Element residual (12) and tangent (12×12), local order `(u1, u2, d)` per node.
struct ElementTerms {
    r: [f64; 12],
    k: [f64; 144],
}

impl<'a> MacroProblem<'a> {
    pub fn new(mesh: &'a Quad4Mesh, table: &'a DamageLookup, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let quadrature =
            (0..mesh.n_elements()).map(|e| element_quadrature(e, &mesh.element_coords(e))).collect::<Result<Vec<_>>>()?;
        let element_dofs = crate::fem::assembly::element_dofs(mesh, DOFS_PER_NODE);
        let prescribed = prescribed_dofs(mesh, &config.loading)?;
        let mut dofs = DofMap::new(mesh.n_nodes(), DOFS_PER_NODE);
        for &(dof, _) in &prescribed {
            dofs.set_dirichlet(dof / 3, dof % 3, 0.0)?;
        }
        dofs.finalize();
        let assembler = Assembler::new(&dofs, &element_dofs)?;
        let ordering = geometric_ordering(mesh, &dofs, assembler.pattern());
        let (lo, hi) = mesh.bounding_box();
        Ok(MacroProblem {
            mesh,
            table,
            config,
            quadrature,
            element_dofs,
            dofs,
            assembler,
            ordering,
            prescribed,
            width: hi.x1 - lo.x1,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn mesh(&self) -> &Quad4Mesh {
        self.mesh
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Writes the Dirichlet values for load level `delta` into `x`.
    pub fn impose(&self, x: &mut [f64], delta: f64) {
        for &(dof, unit) in &self.prescribed {
            x[dof] = delta * unit;
        }
    }

    fn element_terms(&self, e: usize, x: &[f64], d_prev: &[f64], with_tangent: bool) -> Result<ElementTerms> {
        let conn = self.mesh.elements()[e];
        let mut u = [0.0; 8];
        let mut d = [0.0; 4];
        let mut dp = [0.0; 4];
        for a in 0..4 {
            u[2 * a] = x[3 * conn[a]];
            u[2 * a + 1] = x[3 * conn[a] + 1];
            d[a] = x[3 * conn[a] + 2];
            dp[a] = d_prev[conn[a]];
        }
        let gc = self.config.fracture_energy;
        let l = self.config.length_scale;
        let visc = self.config.viscosity / self.config.time_step;
        let staggered = self.config.scheme == Scheme::Staggered;
        let mut t = ElementTerms { r: [0.0; 12], k: [0.0; 144] };
        let iu = |a: usize| 3 * (a / 2) + a % 2;
        let id = |a: usize| 3 * a + 2;
        for qp in &self.quadrature[e] {
            let eps = qp.strain(&u);
            let dg = qp.interpolate(&d);
            let grad = qp.gradient(&d);
            let dpg = qp.interpolate(&dp);
            let lv = self.table.eval(dg)?;
            if lv.clamped {
                log::trace!("damage {dg} clamped for constitutive evaluation in element {e}");
            }
            let sigma = lv.c.apply(&eps);
            let dsigma = lv.dc.apply(&eps);
            let half_s1 = 0.5 * (0..3).map(|r| dsigma[r] * eps[r]).sum::<f64>();
            let w = qp.weight;
            let mut bt_sigma = [0.0; 8];
            let mut bt_dsigma = [0.0; 8];
            for a in 0..8 {
                for r in 0..3 {
                    bt_sigma[a] += qp.b_u[r][a] * sigma[r];
                    bt_dsigma[a] += qp.b_u[r][a] * dsigma[r];
                }
                t.r[iu(a)] -= bt_sigma[a] * w;
            }
            for a in 0..4 {
                let diff = gc * l * (qp.b_d[0][a] * grad[0] + qp.b_d[1][a] * grad[1]);
                let local = qp.n[a] * ((gc / l) * dg + half_s1 + visc * (dg - dpg));
                t.r[id(a)] -= (diff + local) * w;
            }
            if !with_tangent {
                continue;
            }
            let mut cb = [[0.0; 8]; 3];
            for r in 0..3 {
                for a in 0..8 {
                    cb[r][a] = (0..3).map(|s| lv.c.0[r][s] * qp.b_u[s][a]).sum();
                }
            }
            for a in 0..8 {
                for b in 0..8 {
                    let v: f64 = (0..3).map(|r| qp.b_u[r][a] * cb[r][b]).sum();
                    t.k[iu(a) * 12 + iu(b)] += v * w;
                }
            }
            if !staggered {
                for a in 0..8 {
                    for b in 0..4 {
                        let v = bt_dsigma[a] * qp.n[b] * w;
                        t.k[iu(a) * 12 + id(b)] += v;
                        t.k[id(b) * 12 + iu(a)] += v;
                    }
                }
            }
            let d2 = lv.d2c.apply(&eps);
            let half_s2 = 0.5 * (0..3).map(|r| d2[r] * eps[r]).sum::<f64>();
            let react = gc / l + half_s2 + visc;
            for a in 0..4 {
                for b in 0..4 {
                    let grad_term = qp.b_d[0][a] * qp.b_d[0][b] + qp.b_d[1][a] * qp.b_d[1][b];
                    t.k[id(a) * 12 + id(b)] += (gc * l * grad_term + react * qp.n[a] * qp.n[b]) * w;
                }
            }
        }
        Ok(t)
    }

    /// Full residual vector `R = −∂Π/∂x`, including entries at prescribed DOFs.
    pub fn residual(&self, x: &[f64], d_prev: &[f64]) -> Result<Vec<f64>> {
        let mut r = vec![0.0; x.len()];
        for e in 0..self.quadrature.len() {
            let t = self.element_terms(e, x, d_prev, false)?;
            for (k, &dof) in self.element_dofs[e].iter().enumerate() {
                r[dof] += t.r[k];
            }
        }
        Ok(r)
    }

    pub fn residuals(&self, state: &MacroState) -> Result<Residuals> {
        let r = self.residual(&state.x, &state.d_prev)?;
        Ok(split_fields(&r))
    }

    /// Tangent blocks without constraints, for inspection and testing.
    pub fn tangent_blocks(&self, state: &MacroState) -> Result<TangentBlocks> {
        let n = self.mesh.n_nodes();
        let (mut uu, mut ud, mut du, mut dd) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for e in 0..self.quadrature.len() {
            let t = self.element_terms(e, &state.x, &state.d_prev, true)?;
            let dofs = &self.element_dofs[e];
            for a in 0..12 {
                for b in 0..12 {
                    let v = t.k[a * 12 + b];
                    let (ga, gb) = (dofs[a], dofs[b]);
                    let (na, ca) = (ga / 3, ga % 3);
                    let (nb, cb) = (gb / 3, gb % 3);
                    match (ca == 2, cb == 2) {
                        (false, false) => uu.push((2 * na + ca, 2 * nb + cb, v)),
                        (false, true) => ud.push((2 * na + ca, nb, v)),
                        (true, false) => du.push((na, 2 * nb + cb, v)),
                        (true, true) => dd.push((na, nb, v)),
                    }
                }
            }
        }
        Ok(TangentBlocks {
            uu: CsrMatrix::from_triplets(2 * n, 2 * n, &uu)?,
            ud: CsrMatrix::from_triplets(2 * n, n, &ud)?,
            du: CsrMatrix::from_triplets(n, 2 * n, &du)?,
            dd: CsrMatrix::from_triplets(n, n, &dd)?,
        })
    }

    fn reduced_norm(&self, r: &[f64]) -> f64 {
        let red = self.dofs.restrict(r);
        libm::sqrt(red.iter().map(|v| v * v).sum::<f64>())
    }

    fn full_norm(r: &[f64]) -> f64 {
        libm::sqrt(r.iter().map(|v| v * v).sum::<f64>())
    }

    /// Newton iteration for load level `delta`, starting from `state`.
    /// Returns the converged iterate (before the irreversibility projection)
    /// and the number of residual evaluations.
    pub fn newton(&self, state: &MacroState, delta: f64) -> Result<(Vec<f64>, usize)> {
        let mut x = state.x.clone();
        self.impose(&mut x, delta);
        let mut r = self.residual(&x, &state.d_prev)?;
        let mut evaluations = 1;
        let first = self.reduced_norm(&r);
        // Absolute floor relative to the reactions, so an exactly
        // balanced start (for instance Δ = 0) converges immediately.
        let floor = (1e-12 * Self::full_norm(&r)).max(f64::MIN_POSITIVE);
        let mut norm = first;
        loop {
            if !norm.is_finite() {
                return Err(Error::NewtonNotConverged { delta, iterations: evaluations, relative_residual: norm });
            }
            if norm <= floor || norm <= self.config.tolerance * first {
                return Ok((x, evaluations));
            }
            if evaluations > self.config.max_iterations {
                return Err(Error::NewtonNotConverged {
                    delta,
                    iterations: evaluations,
                    relative_residual: norm / first,
                });
            }
            let system = self.assembler.assemble(&self.dofs, self.quadrature.len(), |e| {
                let t = self.element_terms(e, &x, &state.d_prev, true)?;
                Ok(ElementContribution { dofs: self.element_dofs[e].clone(), matrix: t.k.to_vec(), rhs: Vec::new() })
            })?;
            let rhs = self.dofs.restrict(&r);
            let coords: &[Point2] = self.mesh.nodes();
            let fact = Factorization::with_ordering(&system.matrix, Method::BandLu, self.ordering.clone())
                .map_err(|e| annotate(e, &system.matrix, &self.dofs, Some(coords)))?;
            let dx = fact.solve(&system.matrix, &rhs)?;
            let full = self.dofs.expand_increment(&dx);
            x.iter_mut().zip(&full).for_each(|(x, d)| *x += d);
            r = self.residual(&x, &state.d_prev)?;
            evaluations += 1;
            norm = self.reduced_norm(&r);
        }
    }

    /// Reaction forces `F = −R` at the top-edge `u2` DOFs, summed, and the
    /// same for the bottom edge.
    pub fn edge_reactions(&self, x: &[f64], d_prev: &[f64]) -> Result<(f64, f64)> {
        let r = self.residual(x, d_prev)?;
        let sum = |set: NodeSet| -> f64 { self.mesh.node_set(set).iter().map(|&n| -r[3 * n + 1]).sum() };
        Ok((sum(NodeSet::Top), sum(NodeSet::Bottom)))
    }

    /// Sum of `u1` residual forces on the lateral edges.
    pub fn lateral_reaction(&self, x: &[f64], d_prev: &[f64]) -> Result<f64> {
        let r = self.residual(x, d_prev)?;
        Ok([NodeSet::Left, NodeSet::Right]
            .iter()
            .flat_map(|&s| self.mesh.node_set(s).iter())
            .map(|&n| -r[3 * n])
            .sum())
    }

    /// Solves one load step from `state` to `delta` and applies the
    /// irreversibility projection.
    pub fn step(&self, state: &MacroState, delta: f64, step: usize) -> Result<MacroState> {
        let (mut x, iterations) = self.newton(state, delta)?;
        let (top, _) = self.edge_reactions(&x, &state.d_prev)?;
        if self.config.irreversibility == Irreversibility::Clamp {
            for (node, c) in x.chunks_exact_mut(3).enumerate() {
                c[2] = c[2].clamp(state.d_prev[node], 1.0);
            }
        }
        let d_prev = x.chunks_exact(3).map(|c| c[2]).collect();
        let mut next = MacroState { x, d_prev, delta, record: None };
        next.record = Some(StepRecord {
            step,
            delta,
            h22: delta / self.width,
            t22: top / self.width,
            max_d: next.max_damage(),
            newton_iterations: iterations,
            converged: true,
        });
        Ok(next)
    }

    /// Like [`MacroProblem::step`], halving the increment on failure up to
    /// the configured bisection depth. Iteration counts of sub-steps add up.
    pub fn step_with_bisection(&self, state: &MacroState, delta: f64, step: usize) -> Result<MacroState> {
        self.bisect(state, delta, step, 0)
    }

    fn bisect(&self, state: &MacroState, delta: f64, step: usize, depth: usize) -> Result<MacroState> {
        match self.step(state, delta, step) {
            Ok(s) => Ok(s),
            Err(e) if retryable(&e) && depth < self.config.max_bisections => {
                log::debug!("step {step}: bisecting towards delta={delta} (depth {})", depth + 1);
                let mid = 0.5 * (state.delta + delta);
                let half = self.bisect(state, mid, step, depth + 1)?;
                let mut full = self.bisect(&half, delta, step, depth + 1)?;
                if let (Some(r), Some(h)) = (full.record.as_mut(), half.record.as_ref()) {
                    r.newton_iterations += h.newton_iterations;
                }
                Ok(full)
            }
            Err(e) => Err(e),
        }
    }

    /// Stored elastic energy `∫ ½ εᵀ C(d) ε dΩ`.
    pub fn elastic_energy(&self, state: &MacroState) -> Result<f64> {
        let mut total = 0.0;
        for (e, qps) in self.quadrature.iter().enumerate() {
            let (u, d) = self.gather(e, &state.x);
            for qp in qps {
                let eps = qp.strain(&u);
                total += self.table.eval(qp.interpolate(&d))?.c.energy_density(&eps) * qp.weight;
            }
        }
        Ok(total)
    }

    /// Dissipated crack energy `∫ G_C (d²/(2ℓ) + ℓ/2 |∇d|²) dΩ`.
    pub fn crack_energy(&self, state: &MacroState) -> f64 {
        let gc = self.config.fracture_energy;
        let l = self.config.length_scale;
        let mut total = 0.0;
        for (e, qps) in self.quadrature.iter().enumerate() {
            let (_, d) = self.gather(e, &state.x);
            for qp in qps {
                let dg = qp.interpolate(&d);
                let g = qp.gradient(&d);
                total += gc * (dg * dg / (2.0 * l) + 0.5 * l * (g[0] * g[0] + g[1] * g[1])) * qp.weight;
            }
        }
        total
    }

    fn gather(&self, e: usize, x: &[f64]) -> ([f64; 8], [f64; 4]) {
        let conn = self.mesh.elements()[e];
        let mut u = [0.0; 8];
        let mut d = [0.0; 4];
        for a in 0..4 {
            u[2 * a] = x[3 * conn[a]];
            u[2 * a + 1] = x[3 * conn[a] + 1];
            d[a] = x[3 * conn[a] + 2];
        }
        (u, d)
    }
}

/// Equation ordering for the band solver: node rows swept along either
/// axis, or RCM, whichever gives the narrower band.
fn geometric_ordering(mesh: &Quad4Mesh, dofs: &DofMap, pattern: &CsrMatrix) -> Vec<usize> {
    let eq_dofs = dofs.equation_dofs();
    let nodes = mesh.nodes();
    let key = |eq: usize, swap: bool| {
        let dof = eq_dofs[eq];
        let p = nodes[dof / DOFS_PER_NODE];
        let (a, b) = if swap { (p.x1, p.x2) } else { (p.x2, p.x1) };
        (a, b, dof)
    };
    let sorted = |swap: bool| {
        let mut order: Vec<usize> = (0..eq_dofs.len()).collect();
        order.sort_by(|&i, &j| key(i, swap).partial_cmp(&key(j, swap)).unwrap_or(core::cmp::Ordering::Equal));
        order
    };
    best_ordering(pattern, Method::BandLu, &[sorted(false), sorted(true)])
}

fn retryable(e: &Error) -> bool {
    matches!(e, Error::NewtonNotConverged { .. } | Error::SingularSystem { .. } | Error::InaccurateSolve { .. })
}

fn split_fields(r: &[f64]) -> Residuals {
    let mut r_u = Vec::with_capacity(2 * r.len() / 3);
    let mut r_d = Vec::with_capacity(r.len() / 3);
    for c in r.chunks_exact(3) {
        r_u.extend_from_slice(&c[..2]);
        r_d.push(c[2]);
    }
    Residuals { r_u, r_d }
}

/// `(R_U, R_d)` at `state`.
pub fn assemble_residuals(
    mesh: &Quad4Mesh,
    state: &MacroState,
    table: &DamageLookup,
    config: &SolverConfig,
) -> Result<Residuals> {
    MacroProblem::new(mesh, table, config.clone())?.residuals(state)
}

/// `(K_UU, K_Ud, K_dU, K_dd)` at `state`.
pub fn assemble_tangent(
    mesh: &Quad4Mesh,
    state: &MacroState,
    table: &DamageLookup,
    config: &SolverConfig,
) -> Result<TangentBlocks> {
    MacroProblem::new(mesh, table, config.clone())?.tangent_blocks(state)
}

/// One load step with bisection fallback.
pub fn newton_solve_step(problem: &MacroProblem<'_>, state: &MacroState, delta: f64) -> Result<MacroState> {
    let step = state.record.map_or(1, |r| r.step + 1);
    problem.step_with_bisection(state, delta, step)
}

/// Field kept when the schedule first reaches a requested average strain.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub requested_h22: f64,
    pub state: MacroState,
}

/// Outcome of a load schedule. `failure` is set when a step could not be
/// solved even after bisection; `records` then holds the steps before it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadRun {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: MacroState,
    pub failure: Option<Error>,
}

impl LoadRun {
    /// Peak average stress and the strain at which it occurs.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.records.iter().filter(|r| r.converged).fold(None, |best: Option<(f64, f64)>, r| match best {
            Some((t, _)) if t >= r.t22 => best,
            _ => Some((r.t22, r.h22)),
        })
    }

    /// Peak located between load steps: vertex of the parabola through the
    /// largest converged point and its two neighbours. Falls back to
    /// [`LoadRun::peak`] when the maximum is at either end of the curve.
    pub fn peak_interpolated(&self) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self.records.iter().filter(|r| r.converged).map(|r| (r.h22, r.t22)).collect();
        let k = (0..pts.len()).fold(None, |best: Option<usize>, i| match best {
            Some(b) if pts[b].1 >= pts[i].1 => best,
            _ => Some(i),
        })?;
        if k == 0 || k + 1 == pts.len() {
            return self.peak();
        }
        let [(x0, y0), (x1, y1), (x2, y2)] = [pts[k - 1], pts[k], pts[k + 1]];
        // divided differences
        let a = ((y2 - y1) / (x2 - x1) - (y1 - y0) / (x1 - x0)) / (x2 - x0);
        let b = (y1 - y0) / (x1 - x0) - a * (x0 + x1);
        if !(a < 0.0) {
            return self.peak();
        }
        let x = (-b / (2.0 * a)).clamp(x0, x2);
        let y = y1 + (x - x1) * ((y1 - y0) / (x1 - x0) + a * (x - x0));
        Some((y, x))
    }
}

/// Runs the whole schedule from the undeformed state.
pub fn run_load_schedule(mesh: &Quad4Mesh, table: &DamageLookup, config: &SolverConfig) -> Result<LoadRun> {
    let problem = MacroProblem::new(mesh, table, config.clone())?;
    run_with(&problem)
}

pub fn run_with(problem: &MacroProblem<'_>) -> Result<LoadRun> {
    let mut state = MacroState::zero(problem.mesh.n_nodes());
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = problem.config.snapshot_strains.clone();
    pending.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let mut failure = None;
    for (k, &delta) in problem.config.schedule.iter().enumerate() {
        match problem.step_with_bisection(&state, delta, k + 1) {
            Ok(next) => {
                let rec = next.record.expect("converged step has a record");
                log::debug!(
                    "step {}: delta={:.6e} T22={:.6e} max_d={:.4} iters={}",
                    rec.step,
                    rec.delta,
                    rec.t22,
                    rec.max_d,
                    rec.newton_iterations
                );
                records.push(rec);
                while let Some(&h) = pending.first() {
                    if rec.h22 + 1e-12 < h {
                        break;
                    }
                    snapshots.push(Snapshot { requested_h22: h, state: next.clone() });
                    pending.remove(0);
                }
                state = next;
            }
            Err(e) if retryable(&e) => {
                log::warn!("load step {} (delta={delta}) failed after bisection: {e}", k + 1);
                failure = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(LoadRun { records, snapshots, final_state: state, failure })
}
