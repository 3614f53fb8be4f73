//! Direct solvers for the reduced systems.
//!
//! Both factorizations work on a reverse Cuthill–McKee reordering of the
//! equations: the symmetric positive-definite cell problem uses a profile
//! (skyline) LDLᵀ, and the non-symmetric-capable Newton tangent uses a band
//! LU with partial pivoting.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, NullMode, Result};
use crate::fem::dofmap::DofMap;
use crate::fem::sparse::{CsrMatrix, SparseSystem};
use crate::mesh::Point2;

/// Relative residual accepted after solving.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Profile LDLᵀ without pivoting. Symmetric matrices only.
    Ldlt,
    /// Band LU with partial pivoting.
    BandLu,
}

/// Symmetric adjacency of the matrix graph, without self loops.
fn adjacency(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.n_rows();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    adj
}

fn bfs_levels(adj: &[Vec<usize>], root: usize, level: &mut [usize]) -> (usize, Vec<usize>) {
    level.iter_mut().for_each(|l| *l = usize::MAX);
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut depth = 0;
    let mut last = vec![root];
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                if level[w] > depth {
                    depth = level[w];
                    last.clear();
                }
                if level[w] == depth {
                    last.push(w);
                }
                queue.push_back(w);
            }
        }
    }
    (depth, last)
}

/// Reverse Cuthill–McKee ordering; `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let adj = adjacency(a);
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![0; n];
    let mut scratch = Vec::new();
    for seed in 0..n {
        if placed[seed] {
            continue;
        }
        // pseudo-peripheral start (George–Liu), restricted to this component
        let mut root = seed;
        let (mut depth, mut last) = bfs_levels(&adj, root, &mut level);
        loop {
            let cand = *last.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
            let (d2, l2) = bfs_levels(&adj, cand, &mut level);
            if d2 > depth {
                root = cand;
                depth = d2;
                last = l2;
            } else {
                break;
            }
        }
        placed[root] = true;
        let start = order.len();
        order.push(root);
        let mut head = start;
        while head < order.len() {
            let v = order[head];
            head += 1;
            scratch.clear();
            scratch.extend(adj[v].iter().copied().filter(|&w| !placed[w]));
            scratch.sort_unstable_by_key(|&w| (degree[w], w));
            for &w in &scratch {
                placed[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let b = &b[..a.len()];
    let mut acc = [0.0; 4];
    let (ca, ra) = (a.chunks_exact(4), a.chunks_exact(4).remainder());
    let (cb, rb) = (b.chunks_exact(4), b.chunks_exact(4).remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `(kl, ku, profile)` of `a` under `perm`: lower and upper bandwidth and
/// the number of stored lower-envelope entries.
pub fn envelope(a: &CsrMatrix, perm: &[usize]) -> (usize, usize, usize) {
    let n = a.n_rows();
    let inv = inverse(perm);
    let (mut kl, mut ku) = (0, 0);
    let mut first: Vec<usize> = (0..n).collect();
    for old in 0..n {
        let i = inv[old];
        for &j in a.row(old).0 {
            let jn = inv[j];
            if jn < i {
                kl = kl.max(i - jn);
                first[i] = first[i].min(jn);
            } else {
                ku = ku.max(jn - i);
                first[jn] = first[jn].min(i);
            }
        }
    }
    let profile = (0..n).map(|i| i - first[i] + 1).sum();
    (kl, ku, profile)
}

/// Picks, among the natural ordering, RCM and `candidates`, the one with the
/// cheapest factorization for `method`.
pub fn best_ordering(a: &CsrMatrix, method: Method, candidates: &[Vec<usize>]) -> Vec<usize> {
    let n = a.n_rows();
    let cost = |p: &[usize]| {
        let (kl, ku, profile) = envelope(a, p);
        match method {
            Method::Ldlt => profile,
            Method::BandLu => n.saturating_mul(kl * (kl + ku) + 1),
        }
    };
    let mut best: Vec<usize> = (0..n).collect();
    let mut best_cost = cost(&best);
    for p in candidates.iter().cloned().chain(core::iter::once(rcm_ordering(a))) {
        if p.len() != n {
            continue;
        }
        let c = cost(&p);
        if c < best_cost {
            best = p;
            best_cost = c;
        }
    }
    best
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

#[derive(Debug, Clone)]
struct Profile {
    first: Vec<usize>,
    start: Vec<usize>,
    /// Row `i` holds `L[i][first..i]` followed by `D[i]`.
    store: Vec<f64>,
}

impl Profile {
    fn factor(a: &CsrMatrix, perm: &[usize], inv: &[usize]) -> Result<Self> {
        let n = a.n_rows();
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for &j in a.row(old).0 {
                let jn = inv[j];
                if jn < i {
                    first[i] = first[i].min(jn);
                } else if i < jn {
                    first[jn] = first[jn].min(i);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + i - first[i] + 1);
        }
        let mut store = vec![0.0; start[n]];
        let mut diag_scale = vec![0.0; n];
        for i in 0..n {
            let (cols, vals) = a.row(perm[i]);
            for (&j, &v) in cols.iter().zip(vals) {
                let jn = inv[j];
                if jn <= i {
                    store[start[i] + jn - first[i]] += v;
                }
            }
            diag_scale[i] = libm::fabs(a.get(perm[i], perm[i]));
        }
        let max_diag = diag_scale.iter().fold(0.0_f64, |m, v| m.max(*v));
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = store.split_at_mut(start[i]);
            let row_i = &mut rest[..i - fi + 1];
            // row_i[j - fi] <- w_j = L_ij D_j
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[start[j]..start[j] + j - fj];
                let dot = dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..]);
                row_i[j - fi] -= dot;
            }
            let mut d = row_i[i - fi];
            for j in fi..i {
                let dj = done[start[j] + j - first[j]];
                let w = row_i[j - fi];
                let l = w / dj;
                d -= w * l;
                row_i[j - fi] = l;
            }
            let scale = diag_scale[i].max(max_diag * f64::EPSILON);
            if !(libm::fabs(d) > 1e-11 * scale) {
                return Err(Error::SingularSystem { equation: perm[i], mode: NullMode::Unknown });
            }
            row_i[i - fi] = d;
        }
        Ok(Profile { first, start, store })
    }

    fn solve_in_place(&self, y: &mut [f64]) {
        let n = y.len();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.store[self.start[i]..self.start[i] + i - fi];
            let mut s = y[i];
            for (k, l) in row.iter().enumerate() {
                s -= l * y[fi + k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.store[self.start[i] + i - self.first[i]];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.store[self.start[i]..self.start[i] + i - fi];
            let yi = y[i];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
    }
}

/// Band LU in LINPACK `gbfa` layout: column `j` of the band is stored in
/// `ab[j * ld .. (j + 1) * ld]` with `A[i][j]` at row `kl + ku + i − j`,
/// leaving `kl` extra rows for pivoting fill.
#[derive(Debug, Clone)]
struct Band {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl Band {
    fn factor(a: &CsrMatrix, perm: &[usize], inv: &[usize]) -> Result<Self> {
        let n = a.n_rows();
        let (mut kl, mut ku) = (0, 0);
        for old in 0..n {
            let i = inv[old];
            for &j in a.row(old).0 {
                let jn = inv[j];
                if jn < i {
                    kl = kl.max(i - jn);
                } else {
                    ku = ku.max(jn - i);
                }
            }
        }
        let m = kl + ku;
        let ld = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ld * n];
        for old in 0..n {
            let i = inv[old];
            let (cols, vals) = a.row(old);
            for (&j, &v) in cols.iter().zip(vals) {
                let jn = inv[j];
                ab[jn * ld + m + i - jn] += v;
            }
        }
        let scale = a.norm_inf().max(f64::MIN_POSITIVE);
        let mut pivots = vec![0; n];
        let mut ju = 0;
        for k in 0..n {
            let lm = kl.min(n - 1 - k);
            // pivot search in column k, rows k..=k+lm
            let col = k * ld;
            let mut p = 0;
            let mut best = libm::fabs(ab[col + m]);
            for r in 1..=lm {
                let v = libm::fabs(ab[col + m + r]);
                if v > best {
                    best = v;
                    p = r;
                }
            }
            pivots[k] = k + p;
            if !(best > 1e-14 * scale) {
                return Err(Error::SingularSystem { equation: perm[k], mode: NullMode::Unknown });
            }
            ju = ju.max((k + ku + p).min(n - 1));
            // swap rows k and k+p in columns k..=ju
            if p != 0 {
                for j in k..=ju {
                    let base = j * ld + m + k - j;
                    ab.swap(base, base + p);
                }
            }
            let piv = ab[col + m];
            for r in 1..=lm {
                ab[col + m + r] /= piv;
            }
            for j in k + 1..=ju {
                let base = j * ld + m + k - j;
                let t = ab[base];
                if t != 0.0 {
                    for r in 1..=lm {
                        ab[base + r] -= ab[col + m + r] * t;
                    }
                }
            }
        }
        Ok(Band { n, kl, ku, ab, pivots })
    }

    fn solve_in_place(&self, y: &mut [f64]) {
        let n = self.n;
        let m = self.kl + self.ku;
        let ld = 2 * self.kl + self.ku + 1;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let t = y[k];
            let lm = self.kl.min(n - 1 - k);
            for r in 1..=lm {
                y[k + r] -= self.ab[k * ld + m + r] * t;
            }
        }
        for k in (0..n).rev() {
            let col = k * ld;
            y[k] /= self.ab[col + m];
            let t = y[k];
            let top = k.saturating_sub(m);
            for i in top..k {
                y[i] -= self.ab[col + m + i - k] * t;
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Factors {
    Ldlt(Profile),
    Lu(Band),
}

/// A factorized reduced matrix, reusable for several right-hand sides.
#[derive(Debug, Clone)]
pub struct Factorization {
    perm: Vec<usize>,
    inv: Vec<usize>,
    factors: Factors,
}

impl Factorization {
    /// Factorizes in the better of the natural and the RCM ordering.
    pub fn new(a: &CsrMatrix, method: Method) -> Result<Self> {
        let perm = best_ordering(a, method, &[]);
        Self::with_ordering(a, method, perm)
    }

    /// Factorizes in a caller-supplied ordering (`perm[new] = old`), for
    /// reuse across matrices with the same pattern.
    pub fn with_ordering(a: &CsrMatrix, method: Method, perm: Vec<usize>) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::Mismatch("matrix must be square"));
        }
        if perm.len() != a.n_rows() {
            return Err(Error::Mismatch("ordering length differs from matrix size"));
        }
        let inv = inverse(&perm);
        let factors = match method {
            Method::Ldlt => Factors::Ldlt(Profile::factor(a, &perm, &inv)?),
            Method::BandLu => Factors::Lu(Band::factor(a, &perm, &inv)?),
        };
        Ok(Factorization { perm, inv, factors })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// One forward/back substitution, no accuracy check.
    pub fn substitute(&self, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        match &self.factors {
            Factors::Ldlt(p) => p.solve_in_place(&mut y),
            Factors::Lu(l) => l.solve_in_place(&mut y),
        }
        (0..y.len()).map(|old| y[self.inv[old]]).collect()
    }

    /// Solves `A x = b` with one round of iterative refinement if the first
    /// residual exceeds [`RESIDUAL_TOLERANCE`].
    pub fn solve(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.substitute(b);
        let mut rel = relative_residual(a, &x, b);
        if rel > RESIDUAL_TOLERANCE {
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
            let dx = self.substitute(&r);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
            rel = relative_residual(a, &x, b);
        }
        if !(rel <= RESIDUAL_TOLERANCE) {
            return Err(Error::InaccurateSolve { relative_residual: rel });
        }
        Ok(x)
    }
}

/// `‖b − A x‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)`, zero for an all-zero system.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r = b.iter().zip(&ax).fold(0.0_f64, |m, (b, ax)| m.max(libm::fabs(b - ax)));
    let nx = x.iter().fold(0.0_f64, |m, v| m.max(libm::fabs(*v)));
    let nb = b.iter().fold(0.0_f64, |m, v| m.max(libm::fabs(*v)));
    let denom = a.norm_inf() * nx + nb;
    if denom == 0.0 {
        if r == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        r / denom
    }
}

/// Names the likely null vector of a singular reduced matrix by probing
/// candidate modes: a constant per DOF component, and an in-plane rotation
/// when node coordinates are given and the first two components are
/// displacements.
pub fn classify_null_mode(a: &CsrMatrix, dofs: &DofMap, coords: Option<&[Point2]>) -> NullMode {
    let eq_dofs = dofs.equation_dofs();
    let dpn = dofs.dofs_per_node();
    let scale = a.norm_inf();
    let is_null = |v: &[f64]| {
        let nv = v.iter().fold(0.0_f64, |m, x| m.max(libm::fabs(*x)));
        if nv == 0.0 {
            return false;
        }
        let av = a.mul_vec(v);
        av.iter().fold(0.0_f64, |m, x| m.max(libm::fabs(*x))) <= 1e-9 * scale * nv
    };
    for c in 0..dpn {
        let v: Vec<f64> = eq_dofs.iter().map(|&d| if d % dpn == c { 1.0 } else { 0.0 }).collect();
        if is_null(&v) {
            return if dpn >= 2 && c < 2 { NullMode::RigidTranslation } else { NullMode::UnconstrainedMean };
        }
    }
    if let (Some(xy), true) = (coords, dpn >= 2) {
        let v: Vec<f64> = eq_dofs
            .iter()
            .map(|&d| {
                let p = xy[d / dpn];
                match d % dpn {
                    0 => -p.x2,
                    1 => p.x1,
                    _ => 0.0,
                }
            })
            .collect();
        if is_null(&v) {
            return NullMode::RigidRotation;
        }
    }
    NullMode::Unknown
}

/// Factorizes and solves a reduced system, returning the full DOF vector.
/// A singular matrix is reported with the offending equation's global DOF
/// and the classified null mode.
pub fn solve_constrained(
    system: &SparseSystem,
    dofs: &DofMap,
    method: Method,
    coords: Option<&[Point2]>,
) -> Result<Vec<f64>> {
    let fact = Factorization::new(&system.matrix, method).map_err(|e| annotate(e, &system.matrix, dofs, coords))?;
    let x = fact.solve(&system.matrix, &system.rhs)?;
    Ok(dofs.expand(&x))
}

/// Maps a factorization failure's equation to its global DOF and fills in
/// the null mode.
pub fn annotate(e: Error, a: &CsrMatrix, dofs: &DofMap, coords: Option<&[Point2]>) -> Error {
    match e {
        Error::SingularSystem { equation, .. } => {
            let eq_dofs = dofs.equation_dofs();
            Error::SingularSystem {
                equation: eq_dofs.get(equation).copied().unwrap_or(equation),
                mode: classify_null_mode(a, dofs, coords),
            }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap()).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_1d(17, 0.0);
        let mut p = rcm_ordering(&a);
        p.sort_unstable();
        assert_eq!(p, (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn both_methods_match_dense() {
        // 2D grid Laplacian with a scrambled numbering and a non-symmetric perturbation
        let m = 6;
        let n = m * m;
        let id = |i: usize, j: usize| ((i * m + j) * 13) % n;
        let mut sym = Vec::new();
        let mut non = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let a = id(i, j);
                sym.push((a, a, 4.5));
                non.push((a, a, 0.5 + (a % 3) as f64 * 0.1));
                for (di, dj) in [(1usize, 0usize), (0, 1)] {
                    if i + di < m && j + dj < m {
                        let b = id(i + di, j + dj);
                        sym.push((a, b, -1.0));
                        sym.push((b, a, -1.0));
                        non.push((a, b, 0.3));
                    }
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
        let s = CsrMatrix::from_triplets(n, n, &sym).unwrap();
        let x = Factorization::new(&s, Method::Ldlt).unwrap().solve(&s, &b).unwrap();
        let xd = dense_solve(s.to_dense(), b.clone());
        for k in 0..n {
            assert!((x[k] - xd[k]).abs() < 1e-12);
        }
        let mut all = sym.clone();
        all.extend(non);
        let u = CsrMatrix::from_triplets(n, n, &all).unwrap();
        let x = Factorization::new(&u, Method::BandLu).unwrap().solve(&u, &b).unwrap();
        let xd = dense_solve(u.to_dense(), b.clone());
        for k in 0..n {
            assert!((x[k] - xd[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn band_lu_pivots_on_zero_diagonal() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let x = Factorization::new(&a, Method::BandLu).unwrap().solve(&a, &[2.0, 5.0]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_is_classified() {
        // pure Neumann 1D Laplacian: constants are null
        let n = 5;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let mut dm = DofMap::new(n, 1);
        dm.finalize();
        let sys = SparseSystem { matrix: a, rhs: vec![0.0; n] };
        for method in [Method::Ldlt, Method::BandLu] {
            let e = solve_constrained(&sys, &dm, method, None).unwrap_err();
            assert!(
                matches!(e, Error::SingularSystem { mode: NullMode::UnconstrainedMean, .. }),
                "{method:?}: {e:?}"
            );
        }
    }
}
