use microfrac_core::fem::{rcm_ordering, relative_residual, CsrMatrix, DofMap, Factorization, Method};
use microfrac_core::ElasticTensor;
use proptest::prelude::*;

/// Sparse matrix with random entries on a random graph plus a dominant diagonal.
fn random_system(n: usize, edges: &[(usize, usize, f64)], symmetric: bool) -> CsrMatrix {
    let mut t = Vec::new();
    let mut diag = vec![1.0; n];
    for &(i, j, v) in edges {
        let (i, j) = (i % n, j % n);
        if i == j {
            continue;
        }
        t.push((i, j, v));
        t.push((j, i, if symmetric { v } else { 0.5 * v }));
        diag[i] += v.abs();
        diag[j] += v.abs();
    }
    t.extend(diag.iter().enumerate().map(|(i, d)| (i, i, *d)));
    CsrMatrix::from_triplets(n, n, &t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factorizations_meet_residual_contract(
        n in 2usize..60,
        edges in prop::collection::vec((0usize..60, 0usize..60, -1.0..1.0f64), 0..150),
        b in prop::collection::vec(-10.0..10.0f64, 60),
    ) {
        let b = &b[..n];
        let spd = random_system(n, &edges, true);
        let x = Factorization::new(&spd, Method::Ldlt).unwrap().solve(&spd, b).unwrap();
        prop_assert!(relative_residual(&spd, &x, b) <= 1e-10);
        let general = random_system(n, &edges, false);
        let y = Factorization::new(&general, Method::BandLu).unwrap().solve(&general, b).unwrap();
        prop_assert!(relative_residual(&general, &y, b) <= 1e-10);
    }

    #[test]
    fn rcm_is_a_permutation(n in 1usize..80, edges in prop::collection::vec((0usize..80, 0usize..80, 0.1..1.0f64), 0..200)) {
        let a = random_system(n, &edges, true);
        let mut p = rcm_ordering(&a);
        p.sort_unstable();
        prop_assert_eq!(p, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn restrict_is_adjoint_of_expand(values in prop::collection::vec(-1.0..1.0f64, 12), full in prop::collection::vec(-1.0..1.0f64, 12)) {
        let mut dm = DofMap::new(6, 2);
        dm.set_dirichlet(0, 0, 0.25).unwrap();
        dm.tie_nodes(5, 1).unwrap();
        dm.finalize();
        let reduced = &values[..dm.n_equations()];
        let expanded = dm.expand(reduced);
        prop_assert_eq!(expanded[0], 0.25);
        prop_assert_eq!(expanded[10], expanded[2]);
        // <restrict(f), r> = <f, expand_increment(r)>
        let lhs: f64 = dm.restrict(&full).iter().zip(reduced).map(|(a, b)| a * b).sum();
        let rhs: f64 = full.iter().zip(dm.expand_increment(reduced)).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn plane_strain_tensor_is_positive_definite(e in 1.0..1e6f64, nu in -0.9..0.49f64) {
        let c = ElasticTensor::plane_strain(e, nu).unwrap();
        prop_assert!(c.is_positive_definite());
        let inv = c.inverse().unwrap();
        let strain = [0.3, -0.2, 0.1];
        let back = inv.apply(&c.apply(&strain));
        for k in 0..3 {
            prop_assert!((back[k] - strain[k]).abs() < 1e-9);
        }
    }
}
