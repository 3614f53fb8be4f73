use std::path::Path;

use microfrac::output::{curve_csv, vtk_string, write_field, write_micro_field, PointData, CURVE_HEADER};
use microfrac::table_io::{
    build_table_parallel, cache_file_name, load_table, load_table_checked, obtain_table, parse_table, save_table,
    table_to_string, TableSource,
};
use microfrac::Error;
use microfrac_core::downscale::reconstruct;
use microfrac_core::homogenize::Degradation;
use microfrac_core::lookup::{build_table, Fraction, TableMetadata};
use microfrac_core::mesh::{build_specimen_mesh, build_unit_cell_mesh};
use microfrac_core::phase_field::{MacroState, StepRecord};
use microfrac_core::{InclusionShape, NotchSpec, Point2, Quad4Mesh};
use vtkio::model::{Attribute, DataSet, Piece};

fn meta() -> TableMetadata {
    TableMetadata {
        shape: InclusionShape::Square,
        fraction: Fraction::new(1, 4).unwrap(),
        e_matrix: 60000.0,
        nu_matrix: 0.3,
        inclusion: Some((340000.0, 0.18)),
        residual: 0.005,
        cell_n: 8,
        degradation: Degradation::Literal,
    }
}

#[test]
fn table_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let table = build_table_parallel(meta(), 31).unwrap();
    let path = dir.path().join("t.csv");
    save_table(&table, &path).unwrap();
    let back = load_table(&path).unwrap();
    assert_eq!(back.metadata(), table.metadata());
    assert_eq!(back.samples(), table.samples());
    // golden-ratio sequence: 1000 well-spread points in [0, 1)
    for k in 0..1000 {
        let d = (k as f64 * 0.618_033_988_749_895).fract();
        assert_eq!(back.eval(d).unwrap(), table.eval(d).unwrap());
    }
    // parallel sampling gives the same numbers as the sequential builder
    assert_eq!(build_table(meta(), 31).unwrap().samples(), table.samples());
    let text = table_to_string(&table);
    assert!(text.starts_with(
        "# microfrac-table v1; shape=square; f=1/4; E_m=60000; nu_m=0.3; E_i=340000; nu_i=0.18; K=0.005; cell_n=8; g_variant=literal\n\
         d,C1111,C1122,C2222,C1112,C2212,C1212\n"
    ));
}

#[test]
fn malformed_tables_name_the_line() {
    let text = table_to_string(&build_table(meta(), 21).unwrap());
    let p = Path::new("t.csv");
    let line = |r: Result<_, Error>| match r {
        Err(Error::Format { line, .. }) => line,
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("accepted"),
    };
    // cut in the middle of row 12 (file line 14)
    let cut: String = text.lines().take(13).collect::<Vec<_>>().join("\n") + "\n0.55,1.0,2.0\n";
    assert_eq!(line(parse_table(p, &cut)), 14);
    // cut at a row boundary
    let short: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
    assert_eq!(line(parse_table(p, &short)), 20);
    let bad_num = text.replacen(",", ",x", 3);
    assert!(matches!(parse_table(p, &bad_num), Err(Error::Format { .. })));
    let v2 = text.replace("microfrac-table v1", "microfrac-table v2");
    let e = parse_table(p, &v2).unwrap_err();
    assert!(e.to_string().contains("incompatible table version 'v2'"), "{e}");
    assert!(parse_table(p, "").is_err());
}

#[test]
fn metadata_mismatch_is_explicit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    save_table(&build_table(meta(), 21).unwrap(), &path).unwrap();
    let other = TableMetadata { nu_matrix: 0.31, ..meta() };
    let e = load_table_checked(&path, &other).unwrap_err();
    assert!(matches!(e, Error::TableMismatch { .. }));
    assert!(e.to_string().contains("nu_m=0.3, config wants nu_m=0.31"), "{e}");
    assert_eq!(e.exit_code(), 1);
}

#[test]
fn cache_key_changes_with_every_field() {
    let base = meta();
    let variants = [
        TableMetadata { shape: InclusionShape::Circle, ..base },
        TableMetadata { fraction: Fraction::new(1, 100).unwrap(), ..base },
        TableMetadata { e_matrix: 60001.0, ..base },
        TableMetadata { nu_matrix: 0.29, ..base },
        TableMetadata { inclusion: Some((340000.0, 0.2)), ..base },
        TableMetadata { inclusion: None, ..base },
        TableMetadata { residual: 0.001, ..base },
        TableMetadata { cell_n: 16, ..base },
        TableMetadata { degradation: Degradation::Normalized, ..base },
    ];
    let mut names: Vec<String> = variants.iter().map(|m| cache_file_name(m, 101)).collect();
    names.push(cache_file_name(&base, 101));
    names.push(cache_file_name(&base, 51));
    let n = names.len();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), n);
}

#[test]
fn cache_reuses_and_rebuilds() {
    let dir = tempfile::tempdir().unwrap();
    let (t1, path, src) = obtain_table(dir.path(), &meta(), 21).unwrap();
    assert_eq!(src, TableSource::Built);
    let (t2, _, src) = obtain_table(dir.path(), &meta(), 21).unwrap();
    assert_eq!(src, TableSource::Cache);
    assert_eq!(t1.samples(), t2.samples());
    std::fs::write(&path, "garbage").unwrap();
    let (_, _, src) = obtain_table(dir.path(), &meta(), 21).unwrap();
    assert_eq!(src, TableSource::Built);
}

fn record(step: usize, delta: f64) -> StepRecord {
    StepRecord { step, delta, h22: delta, t22: 1e5 * delta, max_d: 0.1, newton_iterations: 3, converged: true }
}

#[test]
fn curve_csv_format() {
    assert_eq!(curve_csv(&[]), format!("{CURVE_HEADER}\n"));
    let text = curve_csv(&[record(1, 0.001), record(2, 0.002)]);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1], "1,1.0000000000000000e-3,1.0000000000000000e-3,1.0000000000000000e2,1.0000000000000001e-1,3");
    let d: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(d[0] < d[1]);
}

struct Parsed {
    points: Vec<f64>,
    n_cells: usize,
    arrays: Vec<(String, Vec<f64>)>,
    title: String,
}

fn read_vtk(path: &Path) -> Parsed {
    let vtk = vtkio::Vtk::import(path).unwrap();
    let DataSet::UnstructuredGrid { pieces, .. } = vtk.data else { panic!("not an unstructured grid") };
    let Piece::Inline(piece) = pieces.into_iter().next().unwrap() else { panic!("not inline") };
    let arrays = piece
        .data
        .point
        .into_iter()
        .map(|a| match a {
            Attribute::DataArray(d) => (d.name, d.data.cast_into::<f64>().unwrap()),
            Attribute::Field { name, .. } => (name, Vec::new()),
        })
        .collect();
    Parsed {
        points: piece.points.cast_into::<f64>().unwrap(),
        n_cells: piece.cells.types.len(),
        arrays,
        title: vtk.title,
    }
}

#[test]
fn single_element_field_file() {
    let mesh = Quad4Mesh::from_parts(
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)],
        vec![[0, 1, 2, 3]],
        vec![microfrac_core::Material::Matrix],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.vtk");
    write_field(&mesh, &MacroState::zero(4), "one element", &path).unwrap();
    let p = read_vtk(&path);
    assert_eq!(p.points.len(), 12);
    assert_eq!(p.n_cells, 1);
    assert_eq!(p.arrays[1].0, "d");
    assert_eq!(p.arrays[1].1, vec![0.0; 4]);
    assert!(vtk_string(&mesh, "x", &[PointData::Scalars("d", &[0.0; 3])]).is_err());
}

#[test]
fn field_round_trip_through_independent_reader() {
    let mesh = build_specimen_mesh(4, 8, 1.0, &NotchSpec::edge_crack(1.0)).unwrap();
    let mut state = MacroState::zero(mesh.n_nodes());
    for (k, v) in state.x.iter_mut().enumerate() {
        *v = ((k * 7919) % 1000) as f64 / 997.0 * std::f64::consts::PI * 1e-3;
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.vtk");
    write_field(&mesh, &state, "snapshot", &path).unwrap();
    let p = read_vtk(&path);
    assert_eq!(p.title, "snapshot");
    assert_eq!(p.n_cells, mesh.n_elements());
    for (n, node) in mesh.nodes().iter().enumerate() {
        assert_eq!(p.points[3 * n], node.x1);
        assert_eq!(p.points[3 * n + 1], node.x2);
        let u = state.displacement(n);
        assert_eq!(p.arrays[0].1[3 * n], u[0]);
        assert_eq!(p.arrays[0].1[3 * n + 1], u[1]);
        assert_eq!(p.arrays[0].1[3 * n + 2], 0.0);
        assert_eq!(p.arrays[1].1[n], state.damage(n));
    }
    // deterministic bytes
    let again = dir.path().join("again.vtk");
    write_field(&mesh, &state, "snapshot", &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn micro_field_export() {
    let mesh = build_specimen_mesh(2, 4, 1.0, &NotchSpec::NONE).unwrap();
    let mut state = MacroState::zero(mesh.n_nodes());
    for (n, p) in mesh.nodes().iter().enumerate() {
        state.x[3 * n] = -0.002 * p.x1;
        state.x[3 * n + 1] = 0.01 * (p.x2 - 1.0);
    }
    let cell = build_unit_cell_mesh(8, &meta().inclusion_spec().unwrap()).unwrap();
    let x = Point2::new(0.75, 0.12);
    let field = reconstruct(&mesh, &state, &cell, &meta().materials().unwrap(), x, 0.05).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("micro.vtk");
    write_micro_field(&cell, &field, &path).unwrap();
    let p = read_vtk(&path);
    assert!(p.title.starts_with("microfrac micro field; x=(7.500000000e-1,1.200000000e-1); eps=5.000000000e-2"), "{}", p.title);
    assert!(p.title.contains("U=(") && p.title.contains("gradU=(("));
    let names: Vec<&str> = p.arrays.iter().map(|a| a.0.as_str()).collect();
    assert_eq!(names, ["u", "u1", "u2", "u1_tilde", "u2_tilde"]);
    let t1 = field.dimensionless(0).unwrap();
    for n in 0..cell.n_nodes() {
        assert_eq!(p.arrays[1].1[n], field.u[n][0]);
        assert_eq!(p.arrays[2].1[n], field.u[n][1]);
        assert_eq!(p.arrays[3].1[n], t1[n]);
    }

    // homogeneous cell: every row identical
    let homog = TableMetadata { inclusion: None, ..meta() };
    let flat = reconstruct(&mesh, &state, &cell, &homog.materials().unwrap(), x, 0.05).unwrap();
    write_micro_field(&cell, &flat, &path).unwrap();
    let p = read_vtk(&path);
    for (_, values) in &p.arrays[1..] {
        assert!(values.iter().all(|v| *v == values[0]));
    }
}
