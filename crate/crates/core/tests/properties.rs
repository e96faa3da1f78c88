use proptest::prelude::*;
use sphere_blasso_core::arrangement::enumerate_strata;
use sphere_blasso_core::certificate::{candidates, sup_abs, DualCertificate};
use sphere_blasso_core::conditions::permanent;
use sphere_blasso_core::geometry::{normalize, Atom, ProblemInstance, SparseMeasure};
use sphere_blasso_core::operators::forward;
use sphere_blasso_core::solver::consolidate_regions;

fn planar_points(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), 1..=max)
        .prop_filter("nonzero points", |pts| pts.iter().all(|x| x[0].abs() + x[1].abs() > 1e-3))
}

fn measure(d: usize, max: usize) -> impl Strategy<Value = SparseMeasure> {
    prop::collection::vec((-2.0..2.0f64, prop::collection::vec(-1.0..1.0f64, d)), 0..=max).prop_map(|raw| {
        SparseMeasure::new(
            raw.into_iter()
                .filter_map(|(c, u)| normalize(&u).ok().map(|location| Atom { coefficient: c, location }))
                .collect(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merging_preserves_total_signed_mass(mu in measure(3, 8), radius in 0.0..0.5f64) {
        let merged = mu.merge_close(radius);
        let before: f64 = mu.coefficients().iter().sum();
        let after: f64 = merged.coefficients().iter().sum();
        prop_assert!((before - after).abs() < 1e-12);
        prop_assert!(merged.len() <= mu.len());
    }

    #[test]
    fn consolidation_keeps_the_forward_map(points in planar_points(6), mu in measure(2, 12)) {
        let n = points.len();
        let inst = ProblemInstance::new(points, vec![0.0; n], 0.1).unwrap();
        let merged = consolidate_regions(&mu, &inst);
        let a = forward(&mu, &inst);
        let b = forward(&merged, &inst);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10, "{:?} vs {:?}", a, b);
        }
        prop_assert!(merged.tv_norm() <= mu.tv_norm() + 1e-12);
    }

    #[test]
    fn sup_is_positively_homogeneous(points in planar_points(6), p in prop::collection::vec(-1.0..1.0f64, 6), s in 0.1..10.0f64) {
        let n = points.len();
        let inst = ProblemInstance::new(points, vec![0.0; n], 0.1).unwrap();
        let strata = enumerate_strata(inst.points()).unwrap();
        let cert = DualCertificate::new(p[..n].to_vec());
        let scaled = DualCertificate::new(cert.p.iter().map(|v| v * s).collect());
        let (a, _) = sup_abs(&cert, &inst, &strata);
        let (b, _) = sup_abs(&scaled, &inst, &strata);
        prop_assert!((s * a - b).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn candidates_respect_antipodal_exclusion(points in planar_points(6), p in prop::collection::vec(-1.0..1.0f64, 6)) {
        let n = points.len();
        let inst = ProblemInstance::new(points, vec![0.0; n], 0.1).unwrap();
        let strata = enumerate_strata(inst.points()).unwrap();
        let cert = DualCertificate::new(p[..n].to_vec());
        let cands = candidates(&cert, &inst, &strata);
        for k in 0..strata.len() {
            let inside: Vec<_> = cands.iter().filter(|c| c.stratum == k && c.in_closure && c.value.abs() > 1e-9).collect();
            // At most one orientation per stratum with a nonzero value.
            prop_assert!(inside.len() <= 1, "stratum {} has {} candidates", k, inside.len());
        }
    }

    #[test]
    fn permutation_matrices_have_unit_permanent(perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle()) {
        let m: Vec<Vec<u8>> = perm.iter().map(|&j| (0..8).map(|k| u8::from(k == j)).collect()).collect();
        prop_assert_eq!(permanent(&m).unwrap(), 1);
    }
}
