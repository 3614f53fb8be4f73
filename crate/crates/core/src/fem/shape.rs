/// Bilinear shape functions and their local derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub n: [f64; 4],
    /// `dn[a] = [∂N_a/∂ξ, ∂N_a/∂η]`
    pub dn: [[f64; 2]; 4],
}

/// Corner order of the reference square, counter-clockwise.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

#[derive(Debug, Clone, Copy)]
pub struct GaussPoint {
    pub xi: f64,
    pub eta: f64,
    pub weight: f64,
}

const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

pub const GAUSS_2X2: [GaussPoint; 4] = [
    GaussPoint { xi: -G, eta: -G, weight: 1.0 },
    GaussPoint { xi: G, eta: -G, weight: 1.0 },
    GaussPoint { xi: G, eta: G, weight: 1.0 },
    GaussPoint { xi: -G, eta: G, weight: 1.0 },
];

pub fn q4_shape(xi: f64, eta: f64) -> Shape {
    let mut n = [0.0; 4];
    let mut dn = [[0.0; 2]; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + c[0] * xi) * (1.0 + c[1] * eta);
        dn[a][0] = 0.25 * c[0] * (1.0 + c[1] * eta);
        dn[a][1] = 0.25 * c[1] * (1.0 + c[0] * xi);
    }
    Shape { n, dn }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_values() {
        assert_eq!(q4_shape(0.0, 0.0).n, [0.25; 4]);
    }

    #[test]
    fn nodal_interpolation() {
        for (a, c) in CORNERS.iter().enumerate() {
            let s = q4_shape(c[0], c[1]);
            for b in 0..4 {
                assert_eq!(s.n[b], if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn off_center_point() {
        assert_eq!(q4_shape(0.5, 0.0).n, [0.125, 0.375, 0.375, 0.125]);
    }

    #[test]
    fn partition_of_unity_everywhere() {
        for i in 0..=10 {
            for j in 0..=10 {
                let s = q4_shape(-1.0 + 0.2 * i as f64, -1.0 + 0.2 * j as f64);
                let sum: f64 = s.n.iter().sum();
                assert!((sum - 1.0).abs() < 1e-15);
                let d0: f64 = s.dn.iter().map(|d| d[0]).sum();
                let d1: f64 = s.dn.iter().map(|d| d[1]).sum();
                assert!(d0.abs() < 1e-15 && d1.abs() < 1e-15);
            }
        }
    }
}
