//! Run configuration: flat `key = value` lines grouped under `[section]`
//! headers. `#` starts a comment. Keys that accept several values for a sweep
//! take a comma-separated list.
//!
//! ```text
//! [materials]
//! E_m = 60000
//! nu_m = 0.3
//! E_i = 340000
//! nu_i = 0.18
//!
//! [cell]
//! shape = circle
//! f = 1/4
//! n = 64
//!
//! [macro]
//! G_C = 6
//! ell = 0.4
//! delta_max = 0.03
//! steps = 150
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use microfrac_core::homogenize::Degradation;
use microfrac_core::lookup::{Fraction, TableMetadata, DEFAULT_SAMPLES, MIN_SAMPLES};
use microfrac_core::mesh::build_specimen_mesh;
use microfrac_core::phase_field::{Grips, Irreversibility, Loading, Scheme, SolverConfig};
use microfrac_core::{InclusionShape, NotchSpec, Point2, Quad4Mesh};

use crate::error::{Error, Result};

const SECTIONS: &[(&str, &[&str])] = &[
    ("materials", &["E_m", "nu_m", "E_i", "nu_i", "inclusion", "K", "g_variant"]),
    ("cell", &["shape", "f", "n", "samples", "epsilon", "table"]),
    ("macro", &["nx", "ny", "L", "notched", "G_C", "ell", "delta_max", "steps", "grips", "snapshots"]),
    ("solver", &["tolerance", "max_iterations", "max_bisections", "eta", "dt", "irreversibility", "scheme"]),
    ("output", &["dir", "point", "at_H22"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialConfig {
    pub e_matrix: f64,
    pub nu_matrix: f64,
    /// `None` when the inclusion is made of the matrix material.
    pub inclusion: Option<(f64, f64)>,
    pub residual: f64,
    pub degradation: Degradation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellConfig {
    pub shapes: Vec<InclusionShape>,
    pub fractions: Vec<Fraction>,
    pub n: usize,
    pub samples: usize,
    /// Cell size for down-scaling, mm.
    pub epsilon: f64,
    /// Prebuilt table to use instead of the cache.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroConfig {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub notched: Vec<bool>,
    pub fracture_energy: f64,
    pub lengths: Vec<f64>,
    pub delta_max: f64,
    pub steps: usize,
    pub grips: Grips,
    /// `H22` values at which nodal fields are written.
    pub snapshots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_bisections: usize,
    pub viscosity: f64,
    pub time_step: f64,
    pub irreversibility: Irreversibility,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Macro point for down-scaling.
    pub point: Option<Point2>,
    /// Average strain at which the down-scaling is evaluated.
    pub at_h22: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: PathBuf,
    pub materials: MaterialConfig,
    pub cell: CellConfig,
    pub macro_: Option<MacroConfig>,
    pub solver: SolverSettings,
    pub output: OutputConfig,
}

/// One concrete specimen run out of a possibly multi-valued configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub shape: InclusionShape,
    pub fraction: Fraction,
    pub length_scale: f64,
    pub notched: bool,
}

impl Case {
    /// File-name stem such as `circle_f1-4_ell0.4_notched`.
    pub fn stem(&self) -> String {
        format!(
            "{}_f{}-{}_ell{}_{}",
            self.shape,
            self.fraction.num(),
            self.fraction.den(),
            self.length_scale,
            if self.notched { "notched" } else { "unnotched" }
        )
    }
}

struct Entry {
    value: String,
    line: usize,
}

struct Raw {
    path: PathBuf,
    entries: BTreeMap<(&'static str, &'static str), Entry>,
}

impl Raw {
    fn err(&self, line: Option<usize>, message: impl Into<String>) -> Error {
        Error::Config { path: self.path.clone(), line, message: message.into() }
    }

    fn has_section(&self, section: &str) -> bool {
        self.entries.keys().any(|(s, _)| *s == section)
    }

    fn get<T: FromStr>(&self, section: &'static str, key: &'static str) -> Result<Option<(T, usize)>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(&(section, key)) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(|v| Some((v, e.line)))
                .map_err(|err| self.err(Some(e.line), format!("invalid value for {key}: {err}"))),
        }
    }

    fn required<T: FromStr>(&self, section: &'static str, key: &'static str) -> Result<(T, usize)>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)?.ok_or_else(|| self.err(None, format!("missing required key [{section}] {key}")))
    }

    fn list<T: FromStr>(&self, section: &'static str, key: &'static str) -> Result<Option<(Vec<T>, usize)>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entries.get(&(section, key)) else { return Ok(None) };
        let items = e
            .value
            .split(',')
            .map(|s| s.trim().parse::<T>().map_err(|err| self.err(Some(e.line), format!("invalid value for {key}: {err}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some((items, e.line)))
    }

    fn required_list<T: FromStr>(&self, section: &'static str, key: &'static str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.list(section, key)?
            .map(|(v, _)| v)
            .ok_or_else(|| self.err(None, format!("missing required key [{section}] {key}")))
    }

    fn positive(&self, section: &'static str, key: &'static str, default: Option<f64>) -> Result<f64> {
        let (v, line) = match default {
            Some(d) => self.get(section, key)?.unwrap_or((d, 0)),
            None => self.required(section, key)?,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(self.err(Some(line).filter(|&l| l > 0), format!("{key} must be positive")));
        }
        Ok(v)
    }
}

fn tokenize(path: &Path, text: &str) -> Result<Raw> {
    let err = |line: usize, message: String| Error::Config { path: path.to_path_buf(), line: Some(line), message };
    let mut entries = BTreeMap::new();
    let mut section: Option<(&'static str, &'static [&'static str])> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| err(line, format!("malformed section header '{content}'")))?;
            let found = SECTIONS.iter().find(|(s, _)| *s == name.trim());
            section = Some(*found.ok_or_else(|| err(line, format!("unknown section [{}]", name.trim())))?);
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| err(line, format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let (sname, keys) = section.ok_or_else(|| err(line, format!("key '{key}' appears before any [section]")))?;
        let known = keys.iter().find(|k| **k == key).ok_or_else(|| err(line, format!("unknown key '{key}' in [{sname}]")))?;
        if value.is_empty() {
            return Err(err(line, format!("empty value for {key}")));
        }
        if let Some(prev) = entries.insert((sname, *known), Entry { value: value.to_string(), line }) {
            return Err(err(line, format!("duplicate key '{key}' (first set on line {})", prev.line)));
        }
    }
    Ok(Raw { path: path.to_path_buf(), entries })
}

struct Shape(InclusionShape);

impl FromStr for Shape {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "circle" => Ok(Shape(InclusionShape::Circle)),
            "square" => Ok(Shape(InclusionShape::Square)),
            _ => Err(format!("unknown shape '{s}' (circle or square)")),
        }
    }
}

struct Keyword<T>(T);

macro_rules! keywords {
    ($t:ty, $($name:literal => $v:expr),+) => {
        impl FromStr for Keyword<$t> {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok(Keyword($v)),)+
                    _ => Err(format!("unknown keyword '{s}' (expected one of: {})", [$($name),+].join(", "))),
                }
            }
        }
    };
}

keywords!(Grips, "anchored" => Grips::Anchored, "clamped" => Grips::Clamped);
keywords!(Irreversibility, "clamp" => Irreversibility::Clamp, "off" => Irreversibility::Off);
keywords!(Scheme, "monolithic" => Scheme::Monolithic, "staggered" => Scheme::Staggered);
keywords!(Degradation, "literal" => Degradation::Literal, "normalized" => Degradation::Normalized);

/// Volume fraction with the validation message the config reports.
struct VolumeFraction(Fraction);

impl FromStr for VolumeFraction {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.parse::<Fraction>().map(VolumeFraction).map_err(|e| match e {
            microfrac_core::Error::InvalidParameter { .. } => "volume fraction out of range (0, 1)".to_string(),
            other => other.to_string(),
        })
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(path, &text)
}

/// Parses configuration text; `path` is used for messages and to resolve
/// relative paths.
pub fn parse_config_str(path: &Path, text: &str) -> Result<RunConfig> {
    let raw = tokenize(path, text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();

    let poisson = |key: &'static str| -> Result<f64> {
        let (nu, line): (f64, usize) = raw.required("materials", key)?;
        if !(nu > -1.0 && nu < 0.5) {
            return Err(raw.err(Some(line), format!("{key} must lie in (-1, 0.5) for plane strain")));
        }
        Ok(nu)
    };
    let homogeneous = match raw.get::<String>("materials", "inclusion")? {
        None => false,
        Some((v, line)) => match v.as_str() {
            "matrix" => true,
            "distinct" => false,
            _ => return Err(raw.err(Some(line), "inclusion must be 'distinct' or 'matrix'")),
        },
    };
    let inclusion = if homogeneous {
        if raw.entries.contains_key(&("materials", "E_i")) || raw.entries.contains_key(&("materials", "nu_i")) {
            return Err(raw.err(None, "E_i/nu_i conflict with 'inclusion = matrix'"));
        }
        None
    } else {
        Some((raw.positive("materials", "E_i", None)?, poisson("nu_i")?))
    };
    let (residual, k_line) = raw.get::<f64>("materials", "K")?.unwrap_or((0.005, 0));
    if !(residual > 0.0 && residual < 1.0) {
        return Err(raw.err(Some(k_line), "K must lie in (0, 1)"));
    }
    let materials = MaterialConfig {
        e_matrix: raw.positive("materials", "E_m", None)?,
        nu_matrix: poisson("nu_m")?,
        inclusion,
        residual,
        degradation: raw.get::<Keyword<Degradation>>("materials", "g_variant")?.map_or(Degradation::Literal, |(k, _)| k.0),
    };

    let (samples, s_line) = raw.get::<usize>("cell", "samples")?.unwrap_or((DEFAULT_SAMPLES, 0));
    if samples < MIN_SAMPLES {
        return Err(raw.err(Some(s_line), format!("samples must be at least {MIN_SAMPLES}")));
    }
    let (n, n_line) = raw.required::<usize>("cell", "n")?;
    if n < 4 || n % 2 != 0 {
        return Err(raw.err(Some(n_line), "n must be even and at least 4"));
    }
    let table = match raw.get::<PathBuf>("cell", "table")? {
        None => None,
        Some((p, line)) => {
            let p = if p.is_absolute() { p } else { base.join(p) };
            if !p.is_file() {
                return Err(raw.err(Some(line), format!("table file {} does not exist", p.display())));
            }
            Some(p)
        }
    };
    let cell = CellConfig {
        shapes: raw.required_list::<Shape>("cell", "shape")?.into_iter().map(|s| s.0).collect(),
        fractions: raw.required_list::<VolumeFraction>("cell", "f")?.into_iter().map(|f| f.0).collect(),
        n,
        samples,
        epsilon: raw.positive("cell", "epsilon", Some(0.05))?,
        table,
    };

    let macro_ = if raw.has_section("macro") { Some(parse_macro(&raw)?) } else { None };

    let (max_iterations, _) = raw.get::<usize>("solver", "max_iterations")?.unwrap_or((25, 0));
    if max_iterations == 0 {
        return Err(raw.err(None, "max_iterations must be at least 1"));
    }
    let (viscosity, eta_line) = raw.get::<f64>("solver", "eta")?.unwrap_or((0.0, 0));
    if !(viscosity >= 0.0 && viscosity.is_finite()) {
        return Err(raw.err(Some(eta_line), "eta must be non-negative"));
    }
    let solver = SolverSettings {
        tolerance: raw.positive("solver", "tolerance", Some(1e-8))?,
        max_iterations,
        max_bisections: raw.get::<usize>("solver", "max_bisections")?.map_or(6, |(v, _)| v),
        viscosity,
        time_step: raw.positive("solver", "dt", Some(1.0))?,
        irreversibility: raw
            .get::<Keyword<Irreversibility>>("solver", "irreversibility")?
            .map_or(Irreversibility::Clamp, |(k, _)| k.0),
        scheme: raw.get::<Keyword<Scheme>>("solver", "scheme")?.map_or(Scheme::Monolithic, |(k, _)| k.0),
    };

    let point = match raw.list::<f64>("output", "point")? {
        None => None,
        Some((v, _)) if v.len() == 2 => Some(Point2::new(v[0], v[1])),
        Some((_, line)) => return Err(raw.err(Some(line), "point needs two coordinates 'x1, x2'")),
    };
    let output = OutputConfig {
        dir: raw.get::<PathBuf>("output", "dir")?.map_or_else(|| PathBuf::from("out"), |(p, _)| p),
        point,
        at_h22: raw.get::<f64>("output", "at_H22")?.map(|_| raw.positive("output", "at_H22", None)).transpose()?,
    };

    Ok(RunConfig { source: path.to_path_buf(), materials, cell, macro_, solver, output })
}

fn parse_macro(raw: &Raw) -> Result<MacroConfig> {
    let (nx, nx_line) = raw.get::<usize>("macro", "nx")?.unwrap_or((20, 0));
    let (ny, ny_line) = raw.get::<usize>("macro", "ny")?.unwrap_or((40, 0));
    if nx < 2 || ny < 4 || ny % 2 != 0 {
        return Err(raw.err(Some(nx_line.max(ny_line)).filter(|&l| l > 0), "need nx >= 2 and even ny >= 4"));
    }
    let lengths = raw.required_list::<f64>("macro", "ell")?;
    if lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(raw.err(raw.entries.get(&("macro", "ell")).map(|e| e.line), "ell must be positive"));
    }
    let (steps, st_line) = raw.required::<usize>("macro", "steps")?;
    if steps == 0 {
        return Err(raw.err(Some(st_line), "steps must be at least 1"));
    }
    let snapshots = raw.list::<f64>("macro", "snapshots")?.map_or_else(Vec::new, |(v, _)| v);
    Ok(MacroConfig {
        nx,
        ny,
        width: raw.positive("macro", "L", Some(1.0))?,
        notched: raw.list::<bool>("macro", "notched")?.map_or_else(|| vec![false], |(v, _)| v),
        fracture_energy: raw.positive("macro", "G_C", None)?,
        lengths,
        delta_max: raw.positive("macro", "delta_max", None)?,
        steps,
        grips: raw.get::<Keyword<Grips>>("macro", "grips")?.map_or(Grips::Anchored, |(k, _)| k.0),
        snapshots,
    })
}

impl RunConfig {
    pub fn macro_config(&self) -> Result<&MacroConfig> {
        self.macro_.as_ref().ok_or_else(|| Error::Invalid("this command needs a [macro] section".into()))
    }

    pub fn table_metadata(&self, shape: InclusionShape, fraction: Fraction) -> TableMetadata {
        let m = &self.materials;
        TableMetadata {
            shape,
            fraction,
            e_matrix: m.e_matrix,
            nu_matrix: m.nu_matrix,
            inclusion: m.inclusion,
            residual: m.residual,
            cell_n: self.cell.n,
            degradation: m.degradation,
        }
    }

    /// Every (shape, f, ℓ, notch) combination, in a fixed order.
    pub fn cases(&self) -> Result<Vec<Case>> {
        let mc = self.macro_config()?;
        let mut out = Vec::new();
        for &shape in &self.cell.shapes {
            for &fraction in &self.cell.fractions {
                for &notched in &mc.notched {
                    for &length_scale in &mc.lengths {
                        out.push(Case { shape, fraction, length_scale, notched });
                    }
                }
            }
        }
        Ok(out)
    }

    /// The single case of a non-sweep run.
    pub fn single_case(&self) -> Result<Case> {
        let cases = self.cases()?;
        match cases.as_slice() {
            [c] => Ok(*c),
            _ => Err(Error::Invalid(format!(
                "expected a single value for shape, f, ell and notched, got {} combinations (use the sweep command)",
                cases.len()
            ))),
        }
    }

    pub fn solver_config(&self, case: &Case) -> Result<SolverConfig> {
        let mc = self.macro_config()?;
        let s = &self.solver;
        let config = SolverConfig {
            fracture_energy: mc.fracture_energy,
            length_scale: case.length_scale,
            schedule: SolverConfig::uniform_schedule(mc.delta_max, mc.steps),
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            max_bisections: s.max_bisections,
            viscosity: s.viscosity,
            time_step: s.time_step,
            irreversibility: s.irreversibility,
            scheme: s.scheme,
            loading: Loading::Tension(mc.grips),
            snapshot_strains: mc.snapshots.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn specimen_mesh(&self, notched: bool) -> Result<Quad4Mesh> {
        let mc = self.macro_config()?;
        let notch = if notched { NotchSpec::edge_crack(mc.width) } else { NotchSpec::NONE };
        Ok(build_specimen_mesh(mc.nx, mc.ny, mc.width, &notch)?)
    }

    /// Output directory, resolved against the config file's directory.
    pub fn output_dir(&self) -> PathBuf {
        if self.output.dir.is_absolute() {
            self.output.dir.clone()
        } else {
            self.source.parent().map(Path::to_path_buf).unwrap_or_default().join(&self.output.dir)
        }
    }
}
