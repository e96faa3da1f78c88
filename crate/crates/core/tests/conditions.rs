use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphere_blasso_core::conditions::{check_full_rank, check_full_rank_with_bases, check_independence, permanent};
use sphere_blasso_core::geometry::{normalize, random_unit_vector, ProblemInstance, UnitVector};
use sphere_blasso_core::linalg::{dot, integer_det};
use sphere_blasso_core::operators::min_margin;
use sphere_blasso_core::Error;

/// Permanent by summing over all permutations.
fn permanent_brute(m: &[Vec<u8>]) -> u128 {
    fn go(m: &[Vec<u8>], row: usize, used: &mut Vec<bool>) -> u128 {
        if row == m.len() {
            return 1;
        }
        let mut total = 0;
        for col in 0..m.len() {
            if !used[col] && m[row][col] == 1 {
                used[col] = true;
                total += go(m, row + 1, used);
                used[col] = false;
            }
        }
        total
    }
    go(m, 0, &mut vec![false; m.len()])
}

#[test]
fn permanent_dominates_determinant_on_all_binary_3x3() {
    for bits in 0u32..512 {
        let m: Vec<Vec<u8>> = (0..3)
            .map(|r| (0..3).map(|c| (bits >> (3 * r + c) & 1) as u8).collect())
            .collect();
        let perm = permanent(&m).unwrap();
        assert_eq!(perm, permanent_brute(&m), "{m:?}");
        let det = integer_det(&m.iter().map(|r| r.iter().map(|&v| v as i64).collect()).collect::<Vec<_>>());
        assert!(perm >= det.unsigned_abs(), "{m:?}");
    }
}

#[test]
fn permanent_matches_brute_force_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.random_range(0..=7);
        let m: Vec<Vec<u8>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0..2)).collect()).collect();
        assert_eq!(permanent(&m).unwrap(), permanent_brute(&m));
    }
    let big = vec![vec![1u8; 15]; 15];
    assert!(matches!(permanent(&big), Err(Error::TooLarge { .. })));
}

#[test]
fn permanent_of_all_ones_is_factorial() {
    let mut f: u128 = 1;
    for n in 1..=12 {
        f *= n as u128;
        assert_eq!(permanent(&vec![vec![1u8; n]; n]).unwrap(), f);
    }
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ProblemInstance {
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    ProblemInstance::new(points, vec![0.0; n], 0.1).unwrap()
}

#[test]
fn independence_verdict_implies_full_numerical_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut positives = 0;
    for _ in 0..1000 {
        let d = rng.random_range(2..=3);
        let n = rng.random_range(1..=7);
        let inst = random_instance(&mut rng, n, d);
        let atoms = rng.random_range(1..=n);
        let locs: Vec<UnitVector> = (0..atoms).map(|_| random_unit_vector(&mut rng, d)).collect();
        let rep = check_independence(&locs, &inst).unwrap();
        if rep.independent {
            assert!(rep.applicable);
            assert!(rep.rank_full, "{:?}", rep.pattern);
            assert_eq!(rep.perm_value, rep.det_value.unsigned_abs());
            assert!(rep.perm_value > 0);
            positives += 1;
        }
    }
    assert!(positives > 100, "only {positives} positive verdicts");
}

#[test]
fn independence_is_refused_with_more_atoms_than_points() {
    let inst = ProblemInstance::new(vec![vec![1.0, 0.0]], vec![0.0], 0.1).unwrap();
    let locs = vec![normalize(&[1.0, 0.2]).unwrap(), normalize(&[1.0, -0.2]).unwrap()];
    let rep = check_independence(&locs, &inst).unwrap();
    assert!(!rep.applicable && !rep.independent);
}

/// Rotates each default tangent basis by a random orthogonal transform inside
/// the tangent space.
fn rotated_bases(rng: &mut ChaCha8Rng, locs: &[UnitVector]) -> Vec<Vec<Vec<f64>>> {
    locs.iter()
        .map(|w| {
            // Gram-Schmidt on random vectors orthogonal to w.
            let d = w.dim();
            let mut basis: Vec<Vec<f64>> = Vec::new();
            while basis.len() < d - 1 {
                let mut v = random_unit_vector(rng, d).into_inner();
                for b in std::iter::once(w.as_slice()).chain(basis.iter().map(Vec::as_slice)) {
                    let c = dot(&v, b);
                    v.iter_mut().zip(b).for_each(|(vk, bk)| *vk -= c * bk);
                }
                if let Ok(u) = normalize(&v) {
                    basis.push(u.into_inner());
                }
            }
            basis
        })
        .collect()
}

#[test]
fn full_rank_verdict_is_basis_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tried = 0;
    while tried < 200 {
        let d = rng.random_range(2..=4);
        let n = rng.random_range(2..=9);
        let inst = random_instance(&mut rng, n, d);
        let atoms = rng.random_range(1..=3);
        let locs: Vec<UnitVector> = (0..atoms).map(|_| random_unit_vector(&mut rng, d)).collect();
        if locs.iter().any(|w| min_margin(w, &inst).1 < 1e-3) {
            continue;
        }
        let a = check_full_rank(&locs, &inst).unwrap();
        let b = check_full_rank_with_bases(&locs, &inst, &rotated_bases(&mut rng, &locs)).unwrap();
        assert_eq!(a.rank, b.rank);
        assert_eq!(a.full, b.full);
        for (x, y) in a.singular_values.iter().zip(&b.singular_values) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        assert_eq!(a.deficient_by_shape, atoms * d > n);
        if a.deficient_by_shape {
            assert!(!a.full);
        }
        tried += 1;
    }
}

#[test]
fn full_rank_refuses_boundary_atoms() {
    let inst = ProblemInstance::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0; 2], 0.1).unwrap();
    let locs = vec![normalize(&[0.0, 1.0]).unwrap()];
    assert!(matches!(check_full_rank(&locs, &inst), Err(Error::StratumBoundary { .. })));
}

#[test]
fn aligned_single_atom_has_a_zero_derivative_row() {
    // The only active point is parallel to w, so the tangential derivative
    // vanishes.
    let inst = ProblemInstance::new(vec![vec![1.0, 0.0], vec![-1.0, 0.5]], vec![0.0; 2], 0.1).unwrap();
    let locs = vec![normalize(&[1.0, 0.0]).unwrap()];
    let rep = check_full_rank(&locs, &inst).unwrap();
    assert_eq!(rep.required, 2);
    assert!(rep.rank < 2);
}
