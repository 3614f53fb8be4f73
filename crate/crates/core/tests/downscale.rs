use microfrac_core::downscale::{evaluate_macro_point, reconstruct, reconstruct_from};
use microfrac_core::homogenize::{upscale_mean, CellProblem, Degradation, InclusionPhase, MicroMaterials};
use microfrac_core::mesh::{build_specimen_mesh, build_unit_cell_mesh};
use microfrac_core::phase_field::MacroState;
use microfrac_core::{ElasticTensor, InclusionShape, InclusionSpec, NotchSpec, Point2, Quad4Mesh};
use proptest::prelude::*;

fn composite() -> MicroMaterials {
    MicroMaterials::new(
        ElasticTensor::plane_strain(60000.0, 0.3).unwrap(),
        InclusionPhase::Tensor(ElasticTensor::plane_strain(340000.0, 0.18).unwrap()),
        0.005,
        Degradation::Literal,
    )
    .unwrap()
}

fn cell_mesh() -> Quad4Mesh {
    build_unit_cell_mesh(16, &InclusionSpec::new(InclusionShape::Circle, 0.25).unwrap()).unwrap()
}

/// Macro state with a smooth nonlinear displacement and some damage.
fn macro_state(mesh: &Quad4Mesh, amplitude: f64) -> MacroState {
    let mut s = MacroState::zero(mesh.n_nodes());
    for (n, p) in mesh.nodes().iter().enumerate() {
        s.x[3 * n] = amplitude * (0.3 * p.x1 * p.x2 - 0.2 * p.x1);
        s.x[3 * n + 1] = amplitude * (p.x2 - 1.0 + 0.1 * p.x1 * p.x1);
        s.x[3 * n + 2] = 0.2 * p.x1;
    }
    s
}

#[test]
fn cell_mean_equals_macro_displacement() {
    let mesh = build_specimen_mesh(4, 8, 1.0, &NotchSpec::NONE).unwrap();
    let state = macro_state(&mesh, 0.01);
    let cm = cell_mesh();
    let field = reconstruct(&mesh, &state, &cm, &composite(), Point2::new(0.61, 0.37), 0.05).unwrap();
    let mean = upscale_mean(&cm, &field.interleaved(), 2).unwrap();
    for i in 0..2 {
        let u = field.point.u[i];
        assert!((mean[i] - u).abs() <= 1e-10 * u.abs(), "{} vs {u}", mean[i]);
    }
    assert!(field.fluctuation().iter().any(|f| f[0] != 0.0));
}

#[test]
fn homogeneous_cell_gives_constant_field() {
    let mesh = build_specimen_mesh(4, 8, 1.0, &NotchSpec::NONE).unwrap();
    let state = macro_state(&mesh, 0.01);
    let cm = cell_mesh();
    let mats = MicroMaterials::new(
        ElasticTensor::plane_strain(60000.0, 0.3).unwrap(),
        InclusionPhase::Matrix,
        0.005,
        Degradation::Literal,
    )
    .unwrap();
    let field = reconstruct(&mesh, &state, &cm, &mats, Point2::new(0.3, 1.4), 0.05).unwrap();
    let scale = field.point.u[0].abs().max(field.point.u[1].abs());
    for v in &field.u {
        assert!((v[0] - field.point.u[0]).abs() < 1e-12 * scale);
        assert!((v[1] - field.point.u[1]).abs() < 1e-12 * scale);
    }
    for c in 0..2 {
        assert!(field.dimensionless(c).unwrap().iter().all(|t| (t - 1.0).abs() < 1e-12));
    }
}

#[test]
fn macro_point_interpolation_is_exact_for_bilinear_fields() {
    let mesh = build_specimen_mesh(4, 8, 1.0, &NotchSpec::NONE).unwrap();
    let state = macro_state(&mesh, 1.0);
    let x = Point2::new(0.3, 0.55);
    let p = evaluate_macro_point(&mesh, &state, x).unwrap();
    // u1 = 0.3 x1 x2 − 0.2 x1 is bilinear; u2 has an x1² term only across elements
    assert!((p.u[0] - (0.3 * 0.3 * 0.55 - 0.2 * 0.3)).abs() < 1e-14);
    assert!((p.grad[0][0] - (0.3 * 0.55 - 0.2)).abs() < 1e-13);
    assert!((p.grad[0][1] - 0.3 * 0.3).abs() < 1e-13);
    assert!((p.grad[1][1] - 1.0).abs() < 1e-13);
    assert!((p.damage - 0.06).abs() < 1e-14);
}

#[test]
fn zero_macro_displacement_component_has_no_dimensionless_value() {
    let mesh = build_specimen_mesh(2, 4, 1.0, &NotchSpec::NONE).unwrap();
    let state = MacroState::zero(mesh.n_nodes());
    let cm = cell_mesh();
    let field = reconstruct(&mesh, &state, &cm, &composite(), Point2::new(0.5, 0.5), 0.05).unwrap();
    assert!(field.dimensionless(0).is_none());
    assert!(reconstruct(&mesh, &state, &cm, &composite(), Point2::new(1.5, 0.5), 0.05).is_err());
    assert!(reconstruct(&mesh, &state, &cm, &composite(), Point2::new(0.5, 0.5), 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fluctuation_is_linear_in_epsilon_and_gradient(
        eps in 0.005..0.2f64,
        scale in 0.1..10.0f64,
        x1 in 0.05..0.95f64,
        x2 in 0.05..1.95f64,
    ) {
        let mesh = build_specimen_mesh(4, 8, 1.0, &NotchSpec::NONE).unwrap();
        let state = macro_state(&mesh, 0.01);
        let cm = cell_mesh();
        let p = evaluate_macro_point(&mesh, &state, Point2::new(x1, x2)).unwrap();
        let corr = CellProblem::new(&cm).unwrap().solve(&composite(), p.damage).unwrap();
        let base = reconstruct_from(&p, &corr, eps).unwrap().fluctuation();
        let twice_eps = reconstruct_from(&p, &corr, 2.0 * eps).unwrap().fluctuation();
        let mut q = p;
        for row in q.grad.iter_mut() {
            for g in row.iter_mut() {
                *g *= scale;
            }
        }
        let scaled = reconstruct_from(&q, &corr, eps).unwrap().fluctuation();
        let norm = base.iter().fold(0.0_f64, |m, v| m.max(v[0].abs()).max(v[1].abs()));
        for k in 0..base.len() {
            for c in 0..2 {
                prop_assert!((twice_eps[k][c] - 2.0 * base[k][c]).abs() <= 1e-12 * norm);
                prop_assert!((scaled[k][c] - scale * base[k][c]).abs() <= 1e-11 * scale * norm);
            }
        }
    }
}
