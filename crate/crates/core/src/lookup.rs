//! Damage look-up table: homogenized tensor sampled on a uniform damage grid
//! and fitted per component with a C² cubic spline, so that `C(d)`, `C'(d)`
//! and `C''(d)` are available in closed form.
//!
//! The spline uses not-a-knot end conditions. A natural spline would force
//! `C''` to zero at both ends, which is wrong for the (near) quadratic
//! dependence produced by `g(d)` and spoils the second derivative the
//! tangent needs near `d = 0` and `d = 1`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::homogenize::{CellProblem, Degradation, InclusionPhase, MicroMaterials};
use crate::mesh::{build_unit_cell_mesh, InclusionShape, InclusionSpec};
use crate::tensor::ElasticTensor;

pub const MIN_SAMPLES: usize = 21;
pub const DEFAULT_SAMPLES: usize = 101;

/// Exact rational volume fraction, written as `p/q` in table headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::InvalidParameter { name: "volume fraction", reason: "out of range (0, 1)" });
        }
        let g = gcd(num, den);
        Ok(Fraction { num: num / g, den: den / g })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Accepts `p/q` or a plain decimal such as `0.25`.
impl FromStr for Fraction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(alloc::format!("invalid volume fraction '{s}'"));
        if let Some((p, q)) = s.split_once('/') {
            let p: u64 = p.trim().parse().map_err(|_| bad())?;
            let q: u64 = q.trim().parse().map_err(|_| bad())?;
            return Fraction::new(p, q);
        }
        let v: f64 = s.parse().map_err(|_| bad())?;
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidParameter { name: "volume fraction", reason: "out of range (0, 1)" });
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 15 || !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let num: u64 = alloc::format!("{int}{frac}").parse().map_err(|_| bad())?;
        Fraction::new(num, den)
    }
}

/// Everything that determines a table's contents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableMetadata {
    pub shape: InclusionShape,
    pub fraction: Fraction,
    pub e_matrix: f64,
    pub nu_matrix: f64,
    /// `None` when the inclusion is the matrix material itself.
    pub inclusion: Option<(f64, f64)>,
    pub residual: f64,
    pub cell_n: usize,
    pub degradation: Degradation,
}

impl TableMetadata {
    pub fn materials(&self) -> Result<MicroMaterials> {
        let matrix = ElasticTensor::plane_strain(self.e_matrix, self.nu_matrix)?;
        let inclusion = match self.inclusion {
            Some((e, nu)) => InclusionPhase::Tensor(ElasticTensor::plane_strain(e, nu)?),
            None => InclusionPhase::Matrix,
        };
        MicroMaterials::new(matrix, inclusion, self.residual, self.degradation)
    }

    pub fn inclusion_spec(&self) -> Result<InclusionSpec> {
        InclusionSpec::new(self.shape, self.fraction.value())
    }
}

/// `d_k = k / (m − 1)` for `k = 0..m`.
pub fn sample_grid(m: usize) -> Vec<f64> {
    (0..m).map(|k| k as f64 / (m - 1) as f64).collect()
}

/// Uniform-knot cubic spline on `[0, 1]` with not-a-knot end conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    y: Vec<f64>,
    /// Second derivative at each knot.
    m: Vec<f64>,
    h: f64,
}

impl CubicSpline {
    pub fn fit(y: &[f64]) -> Result<Self> {
        let n = y.len();
        if n < 4 {
            return Err(Error::InvalidParameter { name: "spline samples", reason: "need at least 4" });
        }
        let h = 1.0 / (n - 1) as f64;
        let r: Vec<f64> = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.0 } else { 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / (h * h) })
            .collect();
        let mut m = vec![0.0; n];
        // With M_0 = 2M_1 − M_2 the first interior row collapses to 6 M_1 = r_1,
        // and symmetrically at the other end.
        m[1] = r[1] / 6.0;
        m[n - 2] = r[n - 2] / 6.0;
        // Tridiagonal solve for M_2..M_{n-3}: M_{i-1} + 4 M_i + M_{i+1} = r_i.
        if n > 4 {
            let lo = 2;
            let hi = n - 3;
            let len = hi - lo + 1;
            let mut c = vec![0.0; len];
            let mut d = vec![0.0; len];
            for k in 0..len {
                let i = lo + k;
                let mut rhs = r[i];
                if i == lo {
                    rhs -= m[1];
                }
                if i == hi {
                    rhs -= m[n - 2];
                }
                let (prev_c, prev_d) = if k == 0 { (0.0, 0.0) } else { (c[k - 1], d[k - 1]) };
                let denom = 4.0 - prev_c;
                c[k] = 1.0 / denom;
                d[k] = (rhs - prev_d) / denom;
            }
            for k in (0..len).rev() {
                let next = if k + 1 < len { m[lo + k + 1] } else { 0.0 };
                m[lo + k] = d[k] - c[k] * next;
            }
        }
        m[0] = 2.0 * m[1] - m[2];
        m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
        Ok(CubicSpline { y: y.to_vec(), m, h })
    }

    /// Value, first and second derivative at `x ∈ [0, 1]`. At a knot the
    /// stored sample is returned as the value.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let n = self.y.len();
        let u = x * (n - 1) as f64;
        let k = (libm::floor(u) as usize).min(n - 2);
        let h = self.h;
        let t = x - k as f64 * h;
        let s = (k + 1) as f64 * h - x;
        let (mk, mk1) = (self.m[k], self.m[k + 1]);
        let a = self.y[k] / h - mk * h / 6.0;
        let b = self.y[k + 1] / h - mk1 * h / 6.0;
        let mut v = mk * s * s * s / (6.0 * h) + mk1 * t * t * t / (6.0 * h) + a * s + b * t;
        let dv = -mk * s * s / (2.0 * h) + mk1 * t * t / (2.0 * h) - a + b;
        let d2v = (mk * s + mk1 * t) / h;
        let nearest = libm::round(u) as usize;
        if nearest < n && nearest as f64 / (n - 1) as f64 == x {
            v = self.y[nearest];
        }
        [v, dv, d2v]
    }

    pub fn samples(&self) -> &[f64] {
        &self.y
    }
}

/// Tensor and its first two damage derivatives at one damage level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LookupValue {
    pub c: ElasticTensor,
    pub dc: ElasticTensor,
    pub d2c: ElasticTensor,
    /// The requested damage was outside `[0, 1]` and has been clamped.
    pub clamped: bool,
}

/// Sampled and spline-fitted map `d ↦ C(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageLookup {
    meta: TableMetadata,
    samples: Vec<[f64; 6]>,
    splines: [CubicSpline; 6],
}

impl DamageLookup {
    /// Fits the splines to samples taken on [`sample_grid`]`(samples.len())`.
    pub fn from_samples(meta: TableMetadata, samples: Vec<[f64; 6]>) -> Result<Self> {
        if samples.len() < MIN_SAMPLES {
            return Err(Error::InvalidParameter { name: "table samples", reason: "need at least 21" });
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "table samples", reason: "non-finite entry" });
        }
        let fit = |c: usize| CubicSpline::fit(&samples.iter().map(|s| s[c]).collect::<Vec<_>>());
        let splines = [fit(0)?, fit(1)?, fit(2)?, fit(3)?, fit(4)?, fit(5)?];
        Ok(DamageLookup { meta, samples, splines })
    }

    pub fn metadata(&self) -> &TableMetadata {
        &self.meta
    }

    pub fn samples(&self) -> &[[f64; 6]] {
        &self.samples
    }

    pub fn knots(&self) -> Vec<f64> {
        sample_grid(self.samples.len())
    }

    pub fn sample_tensor(&self, k: usize) -> ElasticTensor {
        ElasticTensor::from_components(self.samples[k])
    }

    pub fn eval(&self, d: f64) -> Result<LookupValue> {
        if d.is_nan() {
            return Err(Error::DamageOutOfRange(d));
        }
        let x = d.clamp(0.0, 1.0);
        let mut v = [[0.0; 6]; 3];
        for (c, s) in self.splines.iter().enumerate() {
            let r = s.eval(x);
            for k in 0..3 {
                v[k][c] = r[k];
            }
        }
        Ok(LookupValue {
            c: ElasticTensor::from_components(v[0]),
            dc: ElasticTensor::from_components(v[1]),
            d2c: ElasticTensor::from_components(v[2]),
            clamped: x != d,
        })
    }
}

/// Homogenizes the cell at every grid damage level and fits the table.
pub fn build_table(meta: TableMetadata, n_samples: usize) -> Result<DamageLookup> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter { name: "table samples", reason: "need at least 21" });
    }
    let mats = meta.materials()?;
    let mesh = build_unit_cell_mesh(meta.cell_n, &meta.inclusion_spec()?)?;
    let cell = CellProblem::new(&mesh)?;
    let samples = sample_grid(n_samples)
        .into_iter()
        .map(|d| cell.effective_tensor(&mats, d).map(|c| c.components()))
        .collect::<Result<Vec<_>>>()?;
    DamageLookup::from_samples(meta, samples)
}

/// Short human-readable description used in log lines.
pub fn describe(meta: &TableMetadata) -> String {
    alloc::format!("{} f={} n={} g={}", meta.shape, meta.fraction, meta.cell_n, meta.degradation.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn fractions() {
        assert_eq!("1/4".parse::<Fraction>().unwrap(), Fraction::new(1, 4).unwrap());
        assert_eq!("0.25".parse::<Fraction>().unwrap().to_string(), "1/4");
        assert_eq!("0.01".parse::<Fraction>().unwrap().to_string(), "1/100");
        assert_eq!("2/8".parse::<Fraction>().unwrap().to_string(), "1/4");
        assert!("1.5".parse::<Fraction>().is_err());
        assert!("1/0".parse::<Fraction>().is_err());
        assert!("abc".parse::<Fraction>().is_err());
    }

    #[test]
    fn spline_reproduces_cubics() {
        let m = 21;
        let f = |x: f64| 2.0 - 3.0 * x + 0.5 * x * x + 1.25 * x * x * x;
        let y: Vec<f64> = sample_grid(m).iter().map(|&x| f(x)).collect();
        let s = CubicSpline::fit(&y).unwrap();
        for k in 0..=200 {
            let x = k as f64 / 200.0;
            let [v, dv, d2v] = s.eval(x);
            assert!((v - f(x)).abs() < 1e-12, "{x}");
            assert!((dv - (-3.0 + x + 3.75 * x * x)).abs() < 1e-10);
            assert!((d2v - (1.0 + 7.5 * x)).abs() < 1e-8);
        }
    }

    #[test]
    fn knots_return_samples_exactly() {
        let y: Vec<f64> = (0..25).map(|k| libm::sin(k as f64 * 0.3)).collect();
        let s = CubicSpline::fit(&y).unwrap();
        for (k, x) in sample_grid(25).into_iter().enumerate() {
            assert_eq!(s.eval(x)[0], y[k]);
        }
    }
}
