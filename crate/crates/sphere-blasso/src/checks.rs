//! Property checks against independent oracles: the adjoint identity,
//! finite differences, a dense angular grid for `sup |eta|`, a circle sweep
//! for the planar strata and brute-force permanents.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sphere_blasso_core::arrangement::{cover_count, enumerate_strata};
use sphere_blasso_core::certificate::{sup_abs, DualCertificate};
use sphere_blasso_core::conditions::permanent;
use sphere_blasso_core::geometry::{normalize, random_unit_vector, Atom, ProblemInstance, SparseMeasure};
use sphere_blasso_core::linalg::{dot, integer_det, norm};
use sphere_blasso_core::operators::{adjoint_eval, adjoint_grad, forward, min_margin};
use sphere_blasso_core::solver::{gradient, objective};

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ProblemInstance {
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ProblemInstance::new(points, y, 0.05).expect("random instance is valid")
}

/// `<K mu, p> = int eta_p d mu` on `pairs` random pairs, to `1e-12`
/// relative.
pub fn adjointness(pairs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let d = rng.random_range(2..=4);
        let n = rng.random_range(1..=8);
        let inst = random_instance(&mut rng, n, d);
        let atoms = rng.random_range(0..=6);
        let mu = SparseMeasure::new(
            (0..atoms)
                .map(|_| Atom {
                    coefficient: rng.random_range(-2.0..2.0),
                    location: random_unit_vector(&mut rng, d),
                })
                .collect(),
        );
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lhs = dot(&forward(&mu, &inst), &p);
        let rhs: f64 = mu
            .atoms
            .iter()
            .map(|a| a.coefficient * adjoint_eval(&p, &a.location, &inst))
            .sum();
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    Check {
        name: "adjointness",
        passed: worst <= 1e-12,
        detail: format!("{pairs} pairs, worst relative gap {worst:.2e} (tolerance 1e-12)"),
    }
}

fn rel_err(fd: f64, exact: f64) -> f64 {
    (fd - exact).abs() / fd.abs().max(exact.abs()).max(1.0)
}

/// Tangential gradient of `eta` and the particle gradient against central
/// differences with step `1e-6`, at `points` random smooth points each.
pub fn finite_differences(points: usize, seed: u64) -> Check {
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_eta = 0.0_f64;
    let mut done = 0;
    while done < points {
        let d = rng.random_range(2..=4);
        let n = rng.random_range(1..=6);
        let inst = random_instance(&mut rng, n, d);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = random_unit_vector(&mut rng, d);
        if min_margin(&w, &inst).1 < 1e-3 {
            continue;
        }
        let g = adjoint_grad(&p, &w, &inst).expect("smooth point");
        for k in 0..d {
            // Derivative along the tangential projection of e_k.
            let mut v = vec![0.0; d];
            v[k] = 1.0;
            let wk = w[k];
            v.iter_mut().zip(w.iter()).for_each(|(vi, wi)| *vi -= wk * wi);
            if norm(&v) < 1e-3 {
                continue;
            }
            let at = |t: f64| {
                let moved: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + t * b).collect();
                adjoint_eval(&p, &normalize(&moved).expect("nonzero"), &inst)
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            worst_eta = worst_eta.max(rel_err(fd, dot(&g, &v)));
        }
        done += 1;
    }

    let mut worst_obj = 0.0_f64;
    let mut done = 0;
    while done < points {
        let d = rng.random_range(2..=3);
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..=4);
        let inst = random_instance(&mut rng, n, d);
        let c: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let smooth = u
            .iter()
            .all(|ui| normalize(ui).is_ok_and(|w| min_margin(&w, &inst).1 >= 1e-3))
            && c.iter().all(|v| v.abs() >= 1e-3);
        if !smooth {
            continue;
        }
        let (gc, gu) = gradient(&c, &u, &inst).expect("valid particles");
        let f = |c: &[f64], u: &[Vec<f64>]| objective(c, u, &inst).expect("valid particles");
        for i in 0..m {
            let (mut cp, mut cm) = (c.clone(), c.clone());
            cp[i] += h;
            cm[i] -= h;
            worst_obj = worst_obj.max(rel_err((f(&cp, &u) - f(&cm, &u)) / (2.0 * h), gc[i]));
            for k in 0..d {
                let (mut up, mut um) = (u.clone(), u.clone());
                up[i][k] += h;
                um[i][k] -= h;
                worst_obj = worst_obj.max(rel_err((f(&c, &up) - f(&c, &um)) / (2.0 * h), gu[i][k]));
            }
        }
        done += 1;
    }
    Check {
        name: "finite differences",
        passed: worst_eta <= 1e-5 && worst_obj <= 1e-5,
        detail: format!(
            "{points} points each, worst relative error: eta gradient {worst_eta:.2e}, particle gradient {worst_obj:.2e} (tolerance 1e-5)"
        ),
    }
}

/// Exact `sup |eta|` against the maximum over `grid` equispaced angles:
/// the grid never exceeds it and falls short by at most the Lipschitz
/// constant times half the spacing.
pub fn dense_grid(certificates: usize, grid: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(ProblemInstance, DualCertificate)> = (0..certificates)
        .map(|_| {
            let n = rng.random_range(1..=8);
            let inst = random_instance(&mut rng, n, 2);
            let cert = DualCertificate::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect());
            (inst, cert)
        })
        .collect();
    let results: Vec<(bool, f64)> = cases
        .par_iter()
        .map(|(inst, cert)| {
            let strata = enumerate_strata(inst.points()).expect("planar strata");
            let (exact, _) = sup_abs(cert, inst, &strata);
            let dense = (0..grid)
                .map(|k| {
                    let t = TAU * k as f64 / grid as f64;
                    cert.eval(&[t.cos(), t.sin()], inst).abs()
                })
                .fold(0.0, f64::max);
            let lipschitz: f64 = cert.p.iter().zip(inst.points()).map(|(p, x)| p.abs() * norm(x)).sum();
            let ok = dense <= exact + 1e-12 && exact - dense <= lipschitz * PI / grid as f64 + 1e-12;
            (ok, exact - dense)
        })
        .collect();
    let failures = results.iter().filter(|r| !r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Check {
        name: "sup |eta| vs dense grid",
        passed: failures == 0,
        detail: format!(
            "{certificates} certificates, grid {grid}, {failures} outside resolution, largest shortfall {worst:.2e}"
        ),
    }
}

fn ternary_at(points: &[Vec<f64>], w: &[f64]) -> Vec<i8> {
    points
        .iter()
        .map(|x| {
            let v = dot(w, x);
            if v.abs() <= 1e-9 * norm(x) {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Ternary patterns of every point stratum and arc of a planar arrangement,
/// found by walking around the circle.
pub fn circle_sweep(points: &[Vec<f64>]) -> Vec<Vec<i8>> {
    let mut cuts: Vec<f64> = points
        .iter()
        .flat_map(|x| {
            let a = x[1].atan2(x[0]);
            [(a + PI / 2.0).rem_euclid(TAU), (a - PI / 2.0).rem_euclid(TAU)]
        })
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if cuts.len() > 1 && (cuts[0] + TAU - cuts[cuts.len() - 1]).abs() < 1e-9 {
        cuts.pop();
    }
    let mut out = Vec::new();
    for (k, &t) in cuts.iter().enumerate() {
        out.push(ternary_at(points, &[t.cos(), t.sin()]));
        let next = cuts.get(k + 1).copied().unwrap_or(cuts[0] + TAU);
        let mid = 0.5 * (t + next);
        out.push(ternary_at(points, &[mid.cos(), mid.sin()]));
    }
    out.sort();
    out
}

/// Enumerated planar strata against the circle sweep, and full-region
/// counts against the cover count.
pub fn strata_sweep(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut count_mismatches = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let strata = enumerate_strata(&points).expect("planar strata");
        let mut got: Vec<Vec<i8>> = strata.iter().map(|s| s.ternary()).collect();
        got.sort();
        if got != circle_sweep(&points) {
            mismatches += 1;
        }
        let full = strata.iter().filter(|s| s.is_full_dimensional()).count();
        if full as u128 != cover_count(n, 2) {
            count_mismatches += 1;
        }
    }
    Check {
        name: "strata vs circle sweep",
        passed: mismatches == 0 && count_mismatches == 0,
        detail: format!(
            "{instances} planar instances, {mismatches} stratum mismatches, {count_mismatches} region-count mismatches"
        ),
    }
}

fn permanent_brute(m: &[Vec<u8>]) -> u128 {
    fn go(m: &[Vec<u8>], row: usize, used: &mut [bool]) -> u128 {
        if row == m.len() {
            return 1;
        }
        (0..m.len())
            .filter(|&c| m[row][c] == 1)
            .map(|c| {
                if used[c] {
                    return 0;
                }
                used[c] = true;
                let v = go(m, row + 1, used);
                used[c] = false;
                v
            })
            .sum()
    }
    go(m, 0, &mut vec![false; m.len()])
}

/// `perm >= |det|` on every binary 3x3 matrix (with the permanent checked by
/// brute force) and `perm = 1` on permutation matrices.
pub fn permanents(seed: u64) -> Check {
    let mut failures = 0;
    for bits in 0u32..512 {
        let m: Vec<Vec<u8>> = (0..3)
            .map(|r| (0..3).map(|c| (bits >> (3 * r + c) & 1) as u8).collect())
            .collect();
        let perm = permanent(&m).expect("small matrix");
        let det = integer_det(&m.iter().map(|r| r.iter().map(|&v| i64::from(v)).collect()).collect::<Vec<_>>());
        if perm < det.unsigned_abs() || perm != permanent_brute(&m) {
            failures += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm_failures = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=10);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let m: Vec<Vec<u8>> = order.iter().map(|&j| (0..n).map(|k| u8::from(k == j)).collect()).collect();
        if permanent(&m).expect("small matrix") != 1 {
            perm_failures += 1;
        }
    }
    Check {
        name: "permanent vs determinant",
        passed: failures == 0 && perm_failures == 0,
        detail: format!(
            "512 binary 3x3 matrices ({failures} failures), 100 permutation matrices ({perm_failures} failures)"
        ),
    }
}

/// All oracle checks with their default sizes.
pub fn property_suite(seed: u64) -> Vec<Check> {
    vec![
        adjointness(1000, seed),
        finite_differences(200, seed.wrapping_add(1)),
        dense_grid(100, 1_000_000, seed.wrapping_add(2)),
        strata_sweep(100, seed.wrapping_add(3)),
        permanents(seed.wrapping_add(4)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        assert!(adjointness(50, 1).passed);
        assert!(finite_differences(20, 2).passed);
        assert!(dense_grid(5, 20_000, 3).passed);
        assert!(strata_sweep(20, 4).passed);
        assert!(permanents(5).passed);
    }

    #[test]
    fn circle_sweep_of_one_point() {
        let s = circle_sweep(&[vec![1.0, 0.0]]);
        assert_eq!(s, vec![vec![-1], vec![0], vec![0], vec![1]]);
    }
}
