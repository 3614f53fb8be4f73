//! Plane-strain stiffness tensors in Voigt form.
//!
//! Ordering is `(11, 22, 12)` and the shear strain is the engineering shear
//! `γ12 = ∂u1/∂x2 + ∂u2/∂x1`, so for an isotropic material the `(2, 2)` entry
//! is the shear modulus. Units are MPa throughout.

use core::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Index pairs of the six independent Voigt entries, in the order
/// `C1111, C1122, C2222, C1112, C2212, C1212`.
pub const COMPONENT_INDEX: [(usize, usize); 6] = [(0, 0), (0, 1), (1, 1), (0, 2), (1, 2), (2, 2)];

/// Column names used for [`COMPONENT_INDEX`] in text output.
pub const COMPONENT_NAMES: [&str; 6] = ["C1111", "C1122", "C2222", "C1112", "C2212", "C1212"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticTensor(pub [[f64; 3]; 3]);

impl ElasticTensor {
    pub const ZERO: ElasticTensor = ElasticTensor([[0.0; 3]; 3]);

    /// Isotropic plane-strain stiffness from Young's modulus and Poisson ratio.
    pub fn plane_strain(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !young.is_finite() {
            return Err(Error::InvalidParameter { name: "Young's modulus", reason: "must be positive" });
        }
        if !(poisson > -1.0 && poisson < 0.5) {
            return Err(Error::InvalidParameter {
                name: "Poisson ratio",
                reason: "must lie in (-1, 1/2); plane strain is singular at 1/2",
            });
        }
        let denom = (1.0 + poisson) * (1.0 - 2.0 * poisson);
        let c11 = young * (1.0 - poisson) / denom;
        let c12 = young * poisson / denom;
        let mu = young / (2.0 * (1.0 + poisson));
        Ok(ElasticTensor([[c11, c12, 0.0], [c12, c11, 0.0], [0.0, 0.0, mu]]))
    }

    /// Builds a symmetric tensor from the six independent entries.
    pub fn from_components(c: [f64; 6]) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (k, &(i, j)) in COMPONENT_INDEX.iter().enumerate() {
            m[i][j] = c[k];
            m[j][i] = c[k];
        }
        ElasticTensor(m)
    }

    pub fn components(&self) -> [f64; 6] {
        let mut c = [0.0; 6];
        for (k, &(i, j)) in COMPONENT_INDEX.iter().enumerate() {
            c[k] = self.0[i][j];
        }
        c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.0;
        m.iter_mut().flatten().for_each(|v| *v *= s);
        ElasticTensor(m)
    }

    /// Stress from a Voigt strain vector.
    #[inline]
    pub fn apply(&self, strain: &[f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * strain[0] + m[0][1] * strain[1] + m[0][2] * strain[2],
            m[1][0] * strain[0] + m[1][1] * strain[1] + m[1][2] * strain[2],
            m[2][0] * strain[0] + m[2][1] * strain[1] + m[2][2] * strain[2],
        ]
    }

    /// `½ εᵀ C ε`.
    pub fn energy_density(&self, strain: &[f64; 3]) -> f64 {
        let s = self.apply(strain);
        0.5 * (s[0] * strain[0] + s[1] * strain[1] + s[2] * strain[2])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |acc, v| acc.max(libm::fabs(*v)))
    }

    /// Largest `|C_ij - C_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let m = &self.0;
        let d = libm::fabs(m[0][1] - m[1][0])
            .max(libm::fabs(m[0][2] - m[2][0]))
            .max(libm::fabs(m[1][2] - m[2][1]));
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            d / scale
        }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> Option<Self> {
        let m = &self.0;
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(ElasticTensor([
            [
                (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv,
                (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
                (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
            ],
            [
                (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv,
                (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
                (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
            ],
            [
                (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv,
                (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
                (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
            ],
        ]))
    }

    /// Eigenvalues of the symmetric part, ascending (cyclic Jacobi).
    pub fn eigenvalues(&self) -> [f64; 3] {
        let mut a = self.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let s = 0.5 * (a[i][j] + a[j][i]);
                a[i][j] = s;
                a[j][i] = s;
            }
        }
        for _sweep in 0..50 {
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
            if off <= 1e-32 * diag || off == 0.0 {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
        let mut ev = [a[0][0], a[1][1], a[2][2]];
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
        ev
    }

    pub fn is_positive_definite(&self) -> bool {
        // Cholesky on the symmetric part.
        let m = &self.0;
        let a11 = m[0][0];
        if !(a11 > 0.0) {
            return false;
        }
        let l21 = 0.5 * (m[1][0] + m[0][1]) / libm::sqrt(a11);
        let l31 = 0.5 * (m[2][0] + m[0][2]) / libm::sqrt(a11);
        let d2 = m[1][1] - l21 * l21;
        if !(d2 > 0.0) {
            return false;
        }
        let l22 = libm::sqrt(d2);
        let l32 = (0.5 * (m[2][1] + m[1][2]) - l31 * l21) / l22;
        m[2][2] - l31 * l31 - l32 * l32 > 0.0
    }

    /// Modulus relating `σ22` to `ε22` when `σ11 = σ12 = 0` (uniaxial
    /// in-plane stress under plane strain). For orthotropic tensors this is
    /// `C2222 − C1122² / C1111`.
    pub fn uniaxial_modulus_22(&self) -> Option<f64> {
        self.inverse().map(|s| 1.0 / s.0[1][1])
    }

    /// Arithmetic (Voigt) mixture `f·a + (1−f)·b`.
    pub fn voigt_mixture(a: &ElasticTensor, b: &ElasticTensor, fraction_a: f64) -> Self {
        a.scaled(fraction_a) + b.scaled(1.0 - fraction_a)
    }

    /// Harmonic (Reuss) mixture `(f·a⁻¹ + (1−f)·b⁻¹)⁻¹`.
    pub fn reuss_mixture(a: &ElasticTensor, b: &ElasticTensor, fraction_a: f64) -> Option<Self> {
        let sa = a.inverse()?;
        let sb = b.inverse()?;
        (sa.scaled(fraction_a) + sb.scaled(1.0 - fraction_a)).inverse()
    }
}

impl Add for ElasticTensor {
    type Output = ElasticTensor;
    fn add(self, rhs: ElasticTensor) -> ElasticTensor {
        let mut m = self.0;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += rhs.0[i][j];
            }
        }
        ElasticTensor(m)
    }
}

impl Sub for ElasticTensor {
    type Output = ElasticTensor;
    fn sub(self, rhs: ElasticTensor) -> ElasticTensor {
        self + rhs.scaled(-1.0)
    }
}

impl Mul<f64> for ElasticTensor {
    type Output = ElasticTensor;
    fn mul(self, rhs: f64) -> ElasticTensor {
        self.scaled(rhs)
    }
}
