use crate::error::{Error, Result};
use crate::fem::shape::{q4_shape, GAUSS_2X2};
use crate::mesh::Point2;

/// Everything an integrand needs at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub n: [f64; 4],
    /// Maps `(u1_0, u2_0, u1_1, u2_1, …)` to Voigt strain `(H11, H22, γ12)`.
    pub b_u: [[f64; 8]; 3],
    /// Maps the four nodal scalars to the physical gradient.
    pub b_d: [[f64; 4]; 2],
    /// `det J · w`
    pub weight: f64,
}

impl QuadPoint {
    #[inline]
    pub fn strain(&self, u: &[f64; 8]) -> [f64; 3] {
        let mut e = [0.0; 3];
        for r in 0..3 {
            e[r] = self.b_u[r].iter().zip(u).map(|(b, v)| b * v).sum();
        }
        e
    }

    #[inline]
    pub fn gradient(&self, d: &[f64; 4]) -> [f64; 2] {
        [
            self.b_d[0].iter().zip(d).map(|(b, v)| b * v).sum(),
            self.b_d[1].iter().zip(d).map(|(b, v)| b * v).sum(),
        ]
    }

    #[inline]
    pub fn interpolate(&self, d: &[f64; 4]) -> f64 {
        self.n.iter().zip(d).map(|(n, v)| n * v).sum()
    }
}

/// Jacobian `j[r][c] = ∂x_c/∂(local_r)` and its determinant.
pub fn jacobian(xy: &[Point2; 4], xi: f64, eta: f64) -> ([[f64; 2]; 2], f64) {
    let s = q4_shape(xi, eta);
    let mut j = [[0.0; 2]; 2];
    for a in 0..4 {
        for r in 0..2 {
            j[r][0] += s.dn[a][r] * xy[a].x1;
            j[r][1] += s.dn[a][r] * xy[a].x2;
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    (j, det)
}

/// Shape functions, `B_U`, `B_d` and the integration weight at `(ξ, η)`.
pub fn b_matrices(xy: &[Point2; 4], xi: f64, eta: f64, gauss_weight: f64) -> Result<QuadPoint> {
    let s = q4_shape(xi, eta);
    let (j, det) = jacobian(xy, xi, eta);
    if !(det > 0.0) {
        return Err(Error::NonPositiveJacobian { element: usize::MAX, det });
    }
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let mut b_u = [[0.0; 8]; 3];
    let mut b_d = [[0.0; 4]; 2];
    for a in 0..4 {
        let dx1 = inv[0][0] * s.dn[a][0] + inv[0][1] * s.dn[a][1];
        let dx2 = inv[1][0] * s.dn[a][0] + inv[1][1] * s.dn[a][1];
        b_u[0][2 * a] = dx1;
        b_u[1][2 * a + 1] = dx2;
        b_u[2][2 * a] = dx2;
        b_u[2][2 * a + 1] = dx1;
        b_d[0][a] = dx1;
        b_d[1][a] = dx2;
    }
    Ok(QuadPoint { n: s.n, b_u, b_d, weight: det * gauss_weight })
}

/// The four 2×2 Gauss points of an element, tagged with the element index
/// in error reports.
pub fn element_quadrature(element: usize, xy: &[Point2; 4]) -> Result<[QuadPoint; 4]> {
    let mut out = [QuadPoint { n: [0.0; 4], b_u: [[0.0; 8]; 3], b_d: [[0.0; 4]; 2], weight: 0.0 }; 4];
    for (k, gp) in GAUSS_2X2.iter().enumerate() {
        out[k] = b_matrices(xy, gp.xi, gp.eta, gp.weight).map_err(|e| match e {
            Error::NonPositiveJacobian { det, .. } => Error::NonPositiveJacobian { element, det },
            other => other,
        })?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> [Point2; 4] {
        [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)]
    }

    fn nodal_u(xy: &[Point2; 4], f: impl Fn(Point2) -> [f64; 2]) -> [f64; 8] {
        let mut u = [0.0; 8];
        for a in 0..4 {
            let v = f(xy[a]);
            u[2 * a] = v[0];
            u[2 * a + 1] = v[1];
        }
        u
    }

    #[test]
    fn rigid_translation_has_no_strain() {
        let xy = unit_square();
        let u = nodal_u(&xy, |_| [0.3, -1.7]);
        for qp in element_quadrature(0, &xy).unwrap() {
            for e in qp.strain(&u) {
                assert!(e.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn affine_field_gives_exact_strain() {
        let xy = unit_square();
        let u = nodal_u(&xy, |p| [p.x1, 0.0]);
        for qp in element_quadrature(0, &xy).unwrap() {
            let e = qp.strain(&u);
            assert!((e[0] - 1.0).abs() < 1e-14 && e[1].abs() < 1e-14 && e[2].abs() < 1e-14);
        }
        // engineering shear from u1 = x2
        let u = nodal_u(&xy, |p| [p.x2, 0.0]);
        for qp in element_quadrature(0, &xy).unwrap() {
            let e = qp.strain(&u);
            assert!((e[2] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn scalar_gradient() {
        let xy = unit_square();
        let d = [xy[0].x2, xy[1].x2, xy[2].x2, xy[3].x2];
        for qp in element_quadrature(0, &xy).unwrap() {
            let g = qp.gradient(&d);
            assert!(g[0].abs() < 1e-15 && (g[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn distorted_element_patch() {
        let xy = [Point2::new(0.0, 0.0), Point2::new(2.0, 0.3), Point2::new(2.4, 1.9), Point2::new(-0.2, 1.2)];
        let u = nodal_u(&xy, |p| [0.1 * p.x1 + 0.2 * p.x2, -0.05 * p.x1 + 0.3 * p.x2]);
        let mut area = 0.0;
        for qp in element_quadrature(0, &xy).unwrap() {
            let e = qp.strain(&u);
            assert!((e[0] - 0.1).abs() < 1e-13);
            assert!((e[1] - 0.3).abs() < 1e-13);
            assert!((e[2] - 0.15).abs() < 1e-13);
            area += qp.weight;
        }
        // shoelace area
        let mut a = 0.0;
        for k in 0..4 {
            let q = xy[(k + 1) % 4];
            a += xy[k].x1 * q.x2 - q.x1 * xy[k].x2;
        }
        assert!((area - 0.5 * a).abs() < 1e-13);
    }

    #[test]
    fn inverted_element_rejected() {
        let mut xy = unit_square();
        xy.swap(1, 3);
        assert!(matches!(element_quadrature(7, &xy), Err(Error::NonPositiveJacobian { element: 7, .. })));
    }
}
