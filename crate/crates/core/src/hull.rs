//! Distance from the origin to the convex hull of a finite point set.
//!
//! This is the Gilbert/GJK family of methods in the form given by Wolfe's
//! minimum-norm-point algorithm: a major step adds the support point that
//! most violates optimality, and minor steps walk back along the segment
//! towards the affine minimizer of the active simplex until its barycentric
//! weights are positive. Termination is finite in exact arithmetic; the
//! iteration cap only guards against floating-point cycling.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, norm, solve, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct HullDistance {
    /// Closest point of the hull to the origin.
    pub point: Vec<f64>,
    pub distance: f64,
    pub iterations: usize,
    /// `false` when the iteration cap was hit before the optimality test
    /// passed.
    pub converged: bool,
}

/// Minimum-norm point of `conv(points)`. `points` must be nonempty.
pub fn min_norm_point(points: &[Vec<f64>], tol: f64, max_iters: usize) -> HullDistance {
    assert!(!points.is_empty());
    let d = points[0].len();
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let start = (0..points.len())
        .min_by(|&a, &b| {
            dot(&points[a], &points[a])
                .partial_cmp(&dot(&points[b], &points[b]))
                .unwrap_or(core::cmp::Ordering::Equal)
        })
        .unwrap();
    let mut active: Vec<usize> = vec![start];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = points[start].clone();
    let mut iterations = 0;
    let mut converged = false;

    'major: while iterations < max_iters {
        iterations += 1;
        let xx = dot(&x, &x);
        if libm::sqrt(xx) <= tol * 1e-3 {
            converged = true;
            break;
        }
        let (j, xp) = (0..points.len())
            .map(|j| (j, dot(&x, &points[j])))
            .fold((usize::MAX, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        if xx - xp <= 1e-12 * scale || active.contains(&j) {
            converged = true;
            break;
        }
        active.push(j);
        weights.push(0.0);

        loop {
            iterations += 1;
            let alpha = match affine_minimizer(points, &active) {
                Some(a) => a,
                None => {
                    // Degenerate simplex: drop the newest point and stop.
                    active.pop();
                    weights.pop();
                    converged = true;
                    break 'major;
                }
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                weights = alpha;
                x = combine(points, &active, &weights, d);
                break;
            }
            let mut theta = 1.0_f64;
            for (l, a) in weights.iter().zip(&alpha) {
                if *a <= 1e-14 && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in weights.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            let mut k = 0;
            while k < active.len() {
                if weights[k] <= 1e-14 {
                    active.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            x = combine(points, &active, &weights, d);
            if iterations >= max_iters {
                break 'major;
            }
        }
    }

    HullDistance {
        distance: norm(&x),
        point: x,
        iterations,
        converged,
    }
}

fn combine(points: &[Vec<f64>], active: &[usize], weights: &[f64], d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for (&i, &w) in active.iter().zip(weights) {
        crate::linalg::axpy(w, &points[i], &mut x);
    }
    x
}

/// Weights (summing to one) of the min-norm point of the affine hull of the
/// active points.
fn affine_minimizer(points: &[Vec<f64>], active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let mut m = Matrix::zeros(k + 1, k + 1);
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            m[(a, b)] = dot(&points[i], &points[j]);
        }
        m[(a, k)] = 1.0;
        m[(k, a)] = 1.0;
    }
    let mut rhs = vec![0.0; k + 1];
    rhs[k] = 1.0;
    let sol = solve(&m, &rhs)?;
    Some(sol[..k].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hull(points: &[[f64; 2]]) -> HullDistance {
        let pts: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        min_norm_point(&pts, 1e-9, 1000)
    }

    #[test]
    fn segment_away_from_origin() {
        let h = hull(&[[1.0, -1.0], [1.0, 1.0]]);
        assert!(h.converged);
        assert!((h.distance - 1.0).abs() < 1e-12);
        assert!((h.point[0] - 1.0).abs() < 1e-12 && h.point[1].abs() < 1e-12);
    }

    #[test]
    fn origin_inside_triangle() {
        let h = hull(&[[1.0, 0.0], [-1.0, 1.0], [-1.0, -1.0]]);
        assert!(h.converged);
        assert!(h.distance < 1e-12);
    }

    #[test]
    fn origin_on_segment() {
        let h = hull(&[[1.0, 0.0], [-1.0, 0.0]]);
        assert!(h.distance < 1e-12);
    }

    #[test]
    fn vertex_is_closest() {
        let h = hull(&[[2.0, 1.0], [3.0, 3.0], [2.5, 0.5]]);
        // The perpendicular foot (1.5, 1.5) on the line through (2,1) and
        // (2.5,0.5) is off the segment, so the vertex (2,1) is closest.
        let expected = 5f64.sqrt();
        assert!((h.distance - expected).abs() < 1e-12, "{}", h.distance);
    }

    #[test]
    fn agrees_with_brute_force_on_random_sets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let k = rng.random_range(1..7);
            let shift: f64 = rng.random_range(-1.0..2.0);
            let pts: Vec<Vec<f64>> = (0..k)
                .map(|_| vec![rng.random_range(-1.0..1.0) + shift, rng.random_range(-1.0..1.0)])
                .collect();
            let h = min_norm_point(&pts, 1e-9, 1000);
            // Brute force: the closest point is on some vertex or some edge.
            let mut best = f64::INFINITY;
            for a in &pts {
                best = best.min(norm(a));
                for b in &pts {
                    let ab = [b[0] - a[0], b[1] - a[1]];
                    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
                    if len2 > 0.0 {
                        let t = (-(a[0] * ab[0] + a[1] * ab[1]) / len2).clamp(0.0, 1.0);
                        best = best.min(norm(&[a[0] + t * ab[0], a[1] + t * ab[1]]));
                    }
                }
            }
            // Duality: the distance equals max(0, max_u min_j <u, p_j>) over
            // unit directions u.
            let mut dual = f64::NEG_INFINITY;
            for s in 0..100_000 {
                let th = core::f64::consts::TAU * s as f64 / 100_000.0;
                let u = [libm::cos(th), libm::sin(th)];
                dual = dual.max(pts.iter().map(|p| dot(p, &u)).fold(f64::INFINITY, f64::min));
            }
            assert!((h.distance - dual.max(0.0)).abs() < 2e-4, "{} vs {}", h.distance, dual);
            if h.distance > 1e-9 {
                assert!((h.distance - best).abs() < 1e-9, "{} vs {}", h.distance, best);
            }
        }
    }
}
