use std::path::Path;

use microfrac::config::parse_config_str;
use microfrac::{parse_config, Error};
use microfrac_core::homogenize::Degradation;
use microfrac_core::lookup::Fraction;
use microfrac_core::phase_field::{Grips, Loading};
use microfrac_core::InclusionShape;

const MINIMAL: &str = "\
[materials]
E_m = 60000
nu_m = 0.3
E_i = 340000
nu_i = 0.18

[cell]
shape = circle
f = 1/4
n = 16
";

fn parse(text: &str) -> Result<microfrac::RunConfig, Error> {
    parse_config_str(Path::new("test.ini"), text)
}

fn line_of(e: &Error) -> Option<usize> {
    match e {
        Error::Config { line, .. } => *line,
        _ => panic!("expected a config error, got {e}"),
    }
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse(MINIMAL).unwrap();
    assert_eq!(cfg.cell.samples, 101);
    assert_eq!(cfg.materials.residual, 0.005);
    assert_eq!(cfg.materials.degradation, Degradation::Literal);
    assert_eq!(cfg.cell.epsilon, 0.05);
    assert_eq!(cfg.cell.fractions, vec![Fraction::new(1, 4).unwrap()]);
    assert!(cfg.macro_.is_none());
    assert!(cfg.macro_config().is_err());
}

#[test]
fn benchmark_config_parses_to_the_published_setup() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/benchmark.ini");
    let cfg = parse_config(&path).unwrap();
    let m = &cfg.materials;
    assert_eq!((m.e_matrix, m.nu_matrix, m.inclusion), (60000.0, 0.3, Some((340000.0, 0.18))));
    assert_eq!(m.residual, 0.005);
    let case = cfg.single_case().unwrap();
    assert_eq!(case.shape, InclusionShape::Circle);
    assert_eq!(case.fraction, Fraction::new(1, 4).unwrap());
    assert_eq!(case.length_scale, 0.4);
    assert!(!case.notched);
    let sc = cfg.solver_config(&case).unwrap();
    assert_eq!(sc.fracture_energy, 6.0);
    assert_eq!(sc.loading, Loading::Tension(Grips::Anchored));
    let mc = cfg.macro_config().unwrap();
    assert_eq!(mc.width, 1.0);
    let mesh = cfg.specimen_mesh(false).unwrap();
    assert_eq!(mesh.n_elements(), 800);
    assert!(cfg.output_dir().ends_with("configs/out/benchmark"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["homogenize.ini", "notched_downscale.ini", "sweep.ini"] {
        parse_config(&dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let sweep = parse_config(&dir.join("sweep.ini")).unwrap();
    assert_eq!(sweep.cases().unwrap().len(), 32);
    assert!(sweep.single_case().is_err());
}

#[test]
fn fraction_out_of_range_is_reported() {
    let e = parse(&MINIMAL.replace("f = 1/4", "f = 1.5")).unwrap_err();
    assert!(e.to_string().contains("volume fraction out of range"), "{e}");
    assert_eq!(line_of(&e), Some(9));
    assert!(parse(&MINIMAL.replace("f = 1/4", "f = 0.25")).is_ok());
}

#[test]
fn unknown_keys_and_sections_name_the_line() {
    let e = parse(&MINIMAL.replace("n = 16", "n = 16\nresolution = 3")).unwrap_err();
    assert_eq!(line_of(&e), Some(11));
    assert!(e.to_string().contains("unknown key 'resolution'"), "{e}");
    let e = parse(&format!("{MINIMAL}[plotting]\ncolor = red\n")).unwrap_err();
    assert_eq!(line_of(&e), Some(11));
    let e = parse(&format!("E_m = 1\n{MINIMAL}")).unwrap_err();
    assert_eq!(line_of(&e), Some(1));
}

#[test]
fn type_and_validity_errors() {
    let cases = [
        ("nu_m = 0.3", "nu_m = 0.5", Some(3)),
        ("E_m = 60000", "E_m = -1", Some(2)),
        ("E_m = 60000", "E_m = sixty", Some(2)),
        ("n = 16", "n = 15", Some(10)),
        ("shape = circle", "shape = hexagon", Some(8)),
        ("n = 16", "n = 16\nsamples = 10", Some(11)),
        ("n = 16", "n = 16\nn = 32", Some(11)),
        ("E_i = 340000\n", "", None),
    ];
    for (from, to, line) in cases {
        let e = parse(&MINIMAL.replace(from, to)).unwrap_err();
        assert_eq!(line_of(&e), line, "{to}: {e}");
        assert_eq!(e.exit_code(), 1);
    }
    let e = parse(&format!("{MINIMAL}[macro]\nG_C = 6\nell = 0.4\nsteps = 10\n")).unwrap_err();
    assert!(e.to_string().contains("delta_max"), "{e}");
}

#[test]
fn homogeneous_inclusion_and_lists() {
    let text = MINIMAL.replace("E_i = 340000\nnu_i = 0.18\n", "inclusion = matrix\ng_variant = normalized\n");
    let cfg = parse(&format!("{text}[macro]\nG_C = 6\nell = 0.1, 0.4\nnotched = true, false\ndelta_max = 0.01\nsteps = 5\ngrips = clamped\n"))
        .unwrap();
    assert_eq!(cfg.materials.inclusion, None);
    assert_eq!(cfg.materials.degradation, Degradation::Normalized);
    let cases = cfg.cases().unwrap();
    assert_eq!(cases.len(), 4);
    assert_eq!(cases[0].stem(), "circle_f1-4_ell0.1_notched");
    assert_eq!(cfg.solver_config(&cases[0]).unwrap().loading, Loading::Tension(Grips::Clamped));
    assert!(parse(&MINIMAL.replace("nu_i = 0.18", "nu_i = 0.18\ninclusion = matrix")).is_err());
}

#[test]
fn missing_table_file_is_rejected() {
    let e = parse(&MINIMAL.replace("n = 16", "n = 16\ntable = no/such/table.csv")).unwrap_err();
    assert_eq!(line_of(&e), Some(11));
}
