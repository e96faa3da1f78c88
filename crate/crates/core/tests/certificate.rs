use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphere_blasso_core::arrangement::enumerate_strata;
use sphere_blasso_core::certificate::{
    check_lc, check_nd, dual_from_primal, sup_abs, DualCertificate, DEFAULT_MATCH_RADIUS,
};
use sphere_blasso_core::geometry::{normalize, random_unit_vector, Atom, ProblemInstance, SparseMeasure};
use sphere_blasso_core::linalg::dot;
use sphere_blasso_core::operators::{adjoint_eval, adjoint_grad, forward, min_margin};
use sphere_blasso_core::{instances, Error};

fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ProblemInstance {
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ProblemInstance::new(points, y, 0.1).unwrap()
}

fn random_measure(rng: &mut ChaCha8Rng, atoms: usize, d: usize) -> SparseMeasure {
    SparseMeasure::new(
        (0..atoms)
            .map(|_| Atom {
                coefficient: rng.random_range(-2.0..2.0),
                location: random_unit_vector(rng, d),
            })
            .collect(),
    )
}

#[test]
fn forward_and_adjoint_are_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let d = rng.random_range(2..=4);
        let n = rng.random_range(1..=7);
        let inst = random_instance(&mut rng, n, d);
        let atoms = rng.random_range(0..=5);
        let mu = random_measure(&mut rng, atoms, d);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lhs = dot(&forward(&mu, &inst), &p);
        let rhs: f64 = mu
            .atoms
            .iter()
            .map(|a| a.coefficient * adjoint_eval(&p, &a.location, &inst))
            .sum();
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }
}

#[test]
fn adjoint_gradient_matches_finite_differences_on_the_sphere() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let mut checked = 0;
    while checked < 200 {
        let d = rng.random_range(2..=4);
        let n = rng.random_range(1..=6);
        let inst = random_instance(&mut rng, n, d);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = random_unit_vector(&mut rng, d);
        if min_margin(&w, &inst).1 < 1e-3 {
            continue;
        }
        let g = adjoint_grad(&p, &w, &inst).unwrap();
        assert!(dot(&g, &w).abs() < 1e-12);
        // Derivative along a tangent direction, through the retraction
        // w -> (w + t v) / |w + t v|.
        let mut v = random_unit_vector(&mut rng, d).into_inner();
        let wv = dot(&v, &w);
        v.iter_mut().zip(w.iter()).for_each(|(vk, wk)| *vk -= wv * wk);
        let at = |t: f64| {
            let moved: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            adjoint_eval(&p, &normalize(&moved).unwrap(), &inst)
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        assert!((fd - dot(&g, &v)).abs() < 1e-6, "{fd} vs {}", dot(&g, &v));
        checked += 1;
    }
}

#[test]
fn adjoint_gradient_refuses_kinks() {
    let inst = ProblemInstance::new(vec![vec![1.0, 0.0]], vec![1.0], 0.1).unwrap();
    let w = normalize(&[0.0, 1.0]).unwrap();
    assert!(matches!(adjoint_grad(&[1.0], &w, &inst), Err(Error::Nondifferentiable { .. })));
    // A zero dual weight makes the kink invisible.
    assert!(adjoint_grad(&[0.0], &w, &inst).is_ok());
}

#[test]
fn exact_sup_matches_dense_angular_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = 1_000_000;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let inst = random_instance(&mut rng, n, 2);
        let strata = enumerate_strata(inst.points()).unwrap();
        let cert = DualCertificate::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect());
        let (exact, best) = sup_abs(&cert, &inst, &strata);
        let mut dense = 0.0_f64;
        for k in 0..grid {
            let t = TAU * k as f64 / grid as f64;
            dense = dense.max(cert.eval(&[t.cos(), t.sin()], &inst).abs());
        }
        let lipschitz: f64 = cert
            .p
            .iter()
            .zip(inst.points())
            .map(|(p, x)| p.abs() * dot(x, x).sqrt())
            .sum();
        assert!(dense <= exact + 1e-12, "grid {dense} above exact {exact}");
        assert!(exact - dense <= lipschitz * TAU / grid as f64, "{exact} vs {dense}");
        if let Some(best) = best {
            assert!((cert.eval(&best.location, &inst).abs() - exact).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_certificate_has_zero_sup() {
    let inst = instances::arrangement_instance();
    let strata = enumerate_strata(inst.points()).unwrap();
    let (s, _) = sup_abs(&DualCertificate::zero(5), &inst, &strata);
    assert_eq!(s, 0.0);
}

#[test]
fn zero_measure_dual_is_scaled_target() {
    let inst = instances::arrangement_instance();
    let cert = dual_from_primal(&SparseMeasure::empty(), &inst).unwrap();
    for (p, y) in cert.p.iter().zip(inst.target()) {
        assert!((p - y / inst.effective_lambda()).abs() < 1e-15);
    }
    assert!(dual_from_primal(&SparseMeasure::empty(), &inst.with_lambda(0.0)).is_err());
}

fn atom(c: f64, w: [f64; 2]) -> Atom {
    Atom {
        coefficient: c,
        location: normalize(&w).unwrap(),
    }
}

/// The three-atom solution reported for the built-in arrangement instance,
/// to three decimals.
fn reported_solution() -> SparseMeasure {
    SparseMeasure::new(vec![
        atom(1.312, [-0.163, 0.987]),
        atom(1.256, [0.287, -0.958]),
        atom(-2.577, [-0.708, 0.706]),
    ])
}

#[test]
fn reported_solution_is_nearly_optimal() {
    let inst = instances::arrangement_instance();
    let strata = enumerate_strata(inst.points()).unwrap();
    let cert = dual_from_primal(&reported_solution(), &inst).unwrap();
    let (s, _) = sup_abs(&cert, &inst, &strata);
    assert!((s - 1.0).abs() < 2e-2, "sup {s}");
    let lc = check_lc(&cert, &reported_solution(), &inst, &strata, 5e-2, DEFAULT_MATCH_RADIUS);
    assert!(lc.unmatched_atoms.is_empty());
}

#[test]
fn nondegeneracy_family_of_interior_atom_is_its_region() {
    let inst = instances::arrangement_instance();
    let strata = enumerate_strata(inst.points()).unwrap();
    let mu = reported_solution();
    let cert = dual_from_primal(&mu, &inst).unwrap();
    for a in &mu.atoms {
        let nd = check_nd(&cert, &a.location, &inst, &strata, 1e-6).unwrap();
        assert_eq!(nd.family.len(), 1);
        assert!(strata[nd.family[0]].is_full_dimensional());
        assert!(nd.holds && nd.min_gap.is_none());
    }
}

#[test]
fn nondegeneracy_on_a_hyperplane_compares_adjacent_strata() {
    // The point (0, 1) sits on the hyperplane of x^0 = (1, 0) and strictly
    // activates x^1 = (1, 1).
    let inst = ProblemInstance::new(vec![vec![1.0, 0.0], vec![1.0, 1.0]], vec![0.0, 0.0], 0.1).unwrap();
    let strata = enumerate_strata(inst.points()).unwrap();
    let w = normalize(&[0.0, 1.0]).unwrap();
    // Gated vectors (2, 1), (1, 1) on the two sides and (0, 1) on the line.
    let cert = DualCertificate::new(vec![1.0, 1.0]);
    let nd = check_nd(&cert, &w, &inst, &strata, 1e-6).unwrap();
    assert_eq!(nd.strict, vec![1]);
    assert_eq!(nd.family.len(), 3);
    assert!(nd.holds);
    // With p^0 = 0 both sides carry the same gated vector.
    let flat = DualCertificate::new(vec![0.0, 1.0]);
    let nd = check_nd(&flat, &w, &inst, &strata, 1e-6).unwrap();
    assert!(!nd.holds);
    assert_eq!(nd.min_gap, Some(0.0));
}
