//! Structured bilinear-quadrilateral meshes for the unit cell and the
//! macroscale specimen, plus point location.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::shape::q4_shape;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x1: f64,
    pub x2: f64,
}

impl Point2 {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Point2 { x1, x2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InclusionShape {
    Circle,
    Square,
}

impl InclusionShape {
    pub fn as_str(&self) -> &'static str {
        match self {
            InclusionShape::Circle => "circle",
            InclusionShape::Square => "square",
        }
    }
}

impl fmt::Display for InclusionShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InclusionShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "circle" => Ok(InclusionShape::Circle),
            "square" => Ok(InclusionShape::Square),
            other => Err(Error::Parse(alloc::format!("unknown inclusion shape '{other}'"))),
        }
    }
}

/// Centered inclusion of a given area fraction in the unit cell `[0,1]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionSpec {
    pub shape: InclusionShape,
    pub fraction: f64,
}

impl InclusionSpec {
    pub fn new(shape: InclusionShape, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidParameter { name: "volume fraction", reason: "out of range (0, 1)" });
        }
        let spec = InclusionSpec { shape, fraction };
        if spec.shape == InclusionShape::Circle && spec.size() > 0.5 {
            return Err(Error::InclusionOutsideCell { fraction });
        }
        Ok(spec)
    }

    /// Radius for a circle, side length for a square.
    pub fn size(&self) -> f64 {
        match self.shape {
            InclusionShape::Circle => libm::sqrt(self.fraction / PI),
            InclusionShape::Square => libm::sqrt(self.fraction),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        let dx = p.x1 - 0.5;
        let dy = p.x2 - 0.5;
        match self.shape {
            InclusionShape::Circle => {
                let r = self.size();
                dx * dx + dy * dy <= r * r
            }
            InclusionShape::Square => {
                let h = 0.5 * self.size();
                libm::fabs(dx) <= h && libm::fabs(dy) <= h
            }
        }
    }
}

/// Horizontal edge crack entering from the left side at height `x2_position`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotchSpec {
    pub present: bool,
    pub x2_position: f64,
    pub tip_x1: f64,
}

impl NotchSpec {
    pub const NONE: NotchSpec = NotchSpec { present: false, x2_position: 0.0, tip_x1: 0.0 };

    /// Crack with its mouth at mid-height of a `L × 2L` specimen and its tip at `x1 = L/2`.
    pub fn edge_crack(width: f64) -> Self {
        NotchSpec { present: true, x2_position: width, tip_x1: 0.5 * width }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Material {
    Matrix,
    Inclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSet {
    Top,
    Bottom,
    Left,
    Right,
    CrackUpper,
    CrackLower,
}

impl NodeSet {
    pub fn name(&self) -> &'static str {
        match self {
            NodeSet::Top => "top",
            NodeSet::Bottom => "bottom",
            NodeSet::Left => "left",
            NodeSet::Right => "right",
            NodeSet::CrackUpper => "crack_upper",
            NodeSet::CrackLower => "crack_lower",
        }
    }
}

/// Outer boundary sets: `bottom` and `top` own the corners, `left` and
/// `right` hold the remaining edge nodes, so the four sets partition the
/// boundary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeSets {
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub crack_upper: Vec<usize>,
    pub crack_lower: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quad4Mesh {
    nodes: Vec<Point2>,
    elements: Vec<[usize; 4]>,
    materials: Vec<Material>,
    node_sets: NodeSets,
    /// For unit-cell meshes, the periodic master of every node (itself for masters).
    periodic_master: Option<Vec<usize>>,
    notch: Option<NotchSpec>,
}

impl Quad4Mesh {
    /// Assembles a mesh from raw parts, checking indices and Jacobians.
    pub fn from_parts(nodes: Vec<Point2>, elements: Vec<[usize; 4]>, materials: Vec<Material>) -> Result<Self> {
        if materials.len() != elements.len() {
            return Err(Error::Mismatch("one material label per element"));
        }
        let mesh = Quad4Mesh {
            nodes,
            elements,
            materials,
            node_sets: NodeSets::default(),
            periodic_master: None,
            notch: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Checks connectivity indices and the Jacobian at every 2×2 Gauss point.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (e, conn) in self.elements.iter().enumerate() {
            for &i in conn {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, len: n });
                }
            }
            let xy = self.element_coords(e);
            for gp in crate::fem::shape::GAUSS_2X2.iter() {
                let det = crate::fem::element::jacobian(&xy, gp.xi, gp.eta).1;
                if !(det > 0.0) {
                    return Err(Error::NonPositiveJacobian { element: e, det });
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node_sets(&self) -> &NodeSets {
        &self.node_sets
    }

    pub fn node_set(&self, set: NodeSet) -> &[usize] {
        match set {
            NodeSet::Top => &self.node_sets.top,
            NodeSet::Bottom => &self.node_sets.bottom,
            NodeSet::Left => &self.node_sets.left,
            NodeSet::Right => &self.node_sets.right,
            NodeSet::CrackUpper => &self.node_sets.crack_upper,
            NodeSet::CrackLower => &self.node_sets.crack_lower,
        }
    }

    pub fn periodic_master(&self) -> Option<&[usize]> {
        self.periodic_master.as_deref()
    }

    pub fn notch(&self) -> Option<&NotchSpec> {
        self.notch.as_ref()
    }

    pub fn element_coords(&self, e: usize) -> [Point2; 4] {
        let c = &self.elements[e];
        [self.nodes[c[0]], self.nodes[c[1]], self.nodes[c[2]], self.nodes[c[3]]]
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let p = self.element_coords(e);
        // shoelace
        let mut a = 0.0;
        for k in 0..4 {
            let q = p[(k + 1) % 4];
            a += p[k].x1 * q.x2 - q.x1 * p[k].x2;
        }
        0.5 * a
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_area(e)).sum()
    }

    /// Area fraction of elements flagged [`Material::Inclusion`].
    pub fn inclusion_fraction(&self) -> f64 {
        let inc: f64 = (0..self.n_elements())
            .filter(|&e| self.materials[e] == Material::Inclusion)
            .map(|e| self.element_area(e))
            .sum();
        inc / self.total_area()
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.nodes {
            lo.x1 = lo.x1.min(p.x1);
            lo.x2 = lo.x2.min(p.x2);
            hi.x1 = hi.x1.max(p.x1);
            hi.x2 = hi.x2.max(p.x2);
        }
        (lo, hi)
    }

    /// Finds an element containing `p` and the local coordinates of `p` in it.
    ///
    /// Points on shared edges or nodes resolve to the lowest-numbered
    /// incident element.
    pub fn locate_point(&self, p: Point2) -> Result<(usize, [f64; 2])> {
        if !p.x1.is_finite() || !p.x2.is_finite() {
            return Err(Error::PointOutsideDomain { x1: p.x1, x2: p.x2 });
        }
        if let Some(notch) = &self.notch {
            if notch.present && p.x2 == notch.x2_position && p.x1 >= 0.0 && p.x1 < notch.tip_x1 {
                return Err(Error::PointOnSeam { x1: p.x1, x2: p.x2 });
            }
        }
        const SLACK: f64 = 1e-12;
        for e in 0..self.n_elements() {
            let xy = self.element_coords(e);
            let (mut lo1, mut lo2, mut hi1, mut hi2) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for q in &xy {
                lo1 = lo1.min(q.x1);
                lo2 = lo2.min(q.x2);
                hi1 = hi1.max(q.x1);
                hi2 = hi2.max(q.x2);
            }
            let tol = SLACK * (hi1 - lo1).max(hi2 - lo2);
            if p.x1 < lo1 - tol || p.x1 > hi1 + tol || p.x2 < lo2 - tol || p.x2 > hi2 + tol {
                continue;
            }
            if let Some(local) = inverse_map(&xy, p) {
                if libm::fabs(local[0]) <= 1.0 + 1e-10 && libm::fabs(local[1]) <= 1.0 + 1e-10 {
                    let local = [local[0].clamp(-1.0, 1.0), local[1].clamp(-1.0, 1.0)];
                    return Ok((e, local));
                }
            }
        }
        Err(Error::PointOutsideDomain { x1: p.x1, x2: p.x2 })
    }

    /// Maps local coordinates of element `e` to physical coordinates.
    pub fn map_local(&self, e: usize, local: [f64; 2]) -> Point2 {
        map(&self.element_coords(e), local)
    }
}

fn map(xy: &[Point2; 4], local: [f64; 2]) -> Point2 {
    let s = q4_shape(local[0], local[1]);
    let mut out = Point2::new(0.0, 0.0);
    for a in 0..4 {
        out.x1 += s.n[a] * xy[a].x1;
        out.x2 += s.n[a] * xy[a].x2;
    }
    out
}

/// Newton inversion of the bilinear map; `None` if it fails to converge.
fn inverse_map(xy: &[Point2; 4], p: Point2) -> Option<[f64; 2]> {
    let scale = libm::fabs(xy[2].x1 - xy[0].x1).max(libm::fabs(xy[2].x2 - xy[0].x2)).max(1e-300);
    let mut local = [0.0_f64, 0.0_f64];
    for _ in 0..50 {
        let q = map(xy, local);
        let r = [p.x1 - q.x1, p.x2 - q.x2];
        let (j, det) = crate::fem::element::jacobian(xy, local[0], local[1]);
        if det == 0.0 {
            return None;
        }
        // x = J^T-style: dx/dxi = j[0][0], dx/deta = j[1][0] with j[r][c] = d x_c / d local_r
        let a11 = j[0][0];
        let a12 = j[1][0];
        let a21 = j[0][1];
        let a22 = j[1][1];
        let det2 = a11 * a22 - a12 * a21;
        let dxi = (a22 * r[0] - a12 * r[1]) / det2;
        let deta = (-a21 * r[0] + a11 * r[1]) / det2;
        local[0] += dxi;
        local[1] += deta;
        if libm::fabs(dxi) + libm::fabs(deta) < 1e-15 {
            let q = map(xy, local);
            let res = libm::fabs(p.x1 - q.x1) + libm::fabs(p.x2 - q.x2);
            if res <= 1e-10 * scale.max(1.0) {
                return Some(local);
            }
        }
        if !local[0].is_finite() || libm::fabs(local[0]) > 10.0 || libm::fabs(local[1]) > 10.0 {
            return None;
        }
    }
    let q = map(xy, local);
    let res = libm::fabs(p.x1 - q.x1) + libm::fabs(p.x2 - q.x2);
    (res <= 1e-10 * scale.max(1.0)).then_some(local)
}

fn grid_nodes(nx: usize, ny: usize, width: f64, height: f64) -> Vec<Point2> {
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(Point2::new(width * i as f64 / nx as f64, height * j as f64 / ny as f64));
        }
    }
    nodes
}

fn grid_elements(nx: usize, ny: usize) -> Vec<[usize; 4]> {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    elements
}

fn grid_boundary(nx: usize, ny: usize) -> NodeSets {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    NodeSets {
        bottom: (0..=nx).map(|i| id(i, 0)).collect(),
        top: (0..=nx).map(|i| id(i, ny)).collect(),
        left: (1..ny).map(|j| id(0, j)).collect(),
        right: (1..ny).map(|j| id(nx, j)).collect(),
        crack_upper: Vec::new(),
        crack_lower: Vec::new(),
    }
}

/// Uniform `n × n` mesh of the unit cell with centroid-based material flags
/// and periodic pairing of opposite edges.
pub fn build_unit_cell_mesh(n: usize, inclusion: &InclusionSpec) -> Result<Quad4Mesh> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::MeshTooCoarse { required: "cell subdivisions must be even and at least 4" });
    }
    let inclusion = InclusionSpec::new(inclusion.shape, inclusion.fraction)?;
    let nodes = grid_nodes(n, n, 1.0, 1.0);
    let elements = grid_elements(n, n);
    let materials = elements
        .iter()
        .map(|conn| {
            let c = Point2::new(
                0.25 * conn.iter().map(|&k| nodes[k].x1).sum::<f64>(),
                0.25 * conn.iter().map(|&k| nodes[k].x2).sum::<f64>(),
            );
            if inclusion.contains(c) {
                Material::Inclusion
            } else {
                Material::Matrix
            }
        })
        .collect();

    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut master: Vec<usize> = (0..nodes.len()).collect();
    for j in 0..=n {
        for i in 0..=n {
            let mi = if i == n { 0 } else { i };
            let mj = if j == n { 0 } else { j };
            master[id(i, j)] = id(mi, mj);
        }
    }

    Ok(Quad4Mesh {
        nodes,
        elements,
        materials,
        node_sets: grid_boundary(n, n),
        periodic_master: Some(master),
        notch: None,
    })
}

/// Mesh of the `L × 2L` specimen, optionally with an edge crack seam.
///
/// Seam nodes strictly left of the crack tip are duplicated: the original
/// node stays with the elements above the seam (`crack_upper`) and the copy
/// goes to the elements below (`crack_lower`). The tip node stays shared, so
/// the displacement is continuous exactly at the tip.
pub fn build_specimen_mesh(nx: usize, ny: usize, width: f64, notch: &NotchSpec) -> Result<Quad4Mesh> {
    if nx < 2 || ny < 4 || ny % 2 != 0 {
        return Err(Error::MeshTooCoarse { required: "nx >= 2, ny >= 4 and ny even" });
    }
    if !(width > 0.0) {
        return Err(Error::InvalidParameter { name: "specimen width", reason: "must be positive" });
    }
    let height = 2.0 * width;
    let mut nodes = grid_nodes(nx, ny, width, height);
    let mut elements = grid_elements(nx, ny);
    let materials = vec![Material::Matrix; elements.len()];
    let mut sets = grid_boundary(nx, ny);

    let mut notch_out = None;
    if notch.present {
        if !(notch.tip_x1 > 0.0 && notch.tip_x1 < width) {
            return Err(Error::InvalidParameter { name: "notch tip", reason: "must lie strictly inside (0, L)" });
        }
        let j_seam_f = notch.x2_position / height * ny as f64;
        let j_seam = libm::round(j_seam_f) as usize;
        if libm::fabs(j_seam_f - j_seam as f64) > 1e-9 || j_seam == 0 || j_seam >= ny {
            return Err(Error::InvalidParameter { name: "notch height", reason: "must be on an interior mesh line" });
        }
        let i_tip_f = notch.tip_x1 / width * nx as f64;
        let i_tip = libm::round(i_tip_f) as usize;
        if libm::fabs(i_tip_f - i_tip as f64) > 1e-9 {
            return Err(Error::NotchTipOffGrid { tip_x1: notch.tip_x1 });
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut copy_of = vec![usize::MAX; nx + 1];
        for i in 0..i_tip {
            let orig = id(i, j_seam);
            let dup = nodes.len();
            nodes.push(nodes[orig]);
            copy_of[i] = dup;
            sets.crack_upper.push(orig);
            sets.crack_lower.push(dup);
            if i == 0 {
                sets.left.push(dup);
            }
        }
        // Elements in the row just below the seam use the copies on their top edge.
        let row = j_seam - 1;
        for i in 0..nx {
            let conn = &mut elements[row * nx + i];
            for slot in [2, 3] {
                let node = conn[slot];
                let ni = node % (nx + 1);
                if ni < i_tip && node / (nx + 1) == j_seam {
                    conn[slot] = copy_of[ni];
                }
            }
        }
        sets.left.sort_unstable_by(|a, b| {
            nodes[*a].x2.partial_cmp(&nodes[*b].x2).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(b))
        });
        notch_out = Some(*notch);
    }

    let mesh = Quad4Mesh { nodes, elements, materials, node_sets: sets, periodic_master: None, notch: notch_out };
    Ok(mesh)
}
