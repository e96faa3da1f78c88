//! Algebraic sufficient conditions on a candidate support: linear
//! independence of the atoms' measurement vectors via a 0-1 activation minor
//! whose permanent equals its absolute determinant, and full rank of the
//! values stacked over the tangential derivatives.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{tangent_basis_in_flat, Flat, ProblemInstance, UnitVector, RANK_TOL};
use crate::linalg::{integer_det, rank_from_singular_values, singular_values, Matrix};
use crate::operators::{derivative_matrix, evaluation_matrix};

/// Largest matrix whose permanent is computed.
pub const PERMANENT_MAX: usize = 14;
/// Largest number of data points for the exhaustive minor search.
pub const MINOR_SEARCH_MAX: usize = 20;

/// Permanent of a square 0-1 matrix by Ryser's inclusion-exclusion formula.
pub fn permanent(m: &[Vec<u8>]) -> Result<u128> {
    let n = m.len();
    if n > PERMANENT_MAX {
        return Err(Error::TooLarge {
            size: n,
            max: PERMANENT_MAX,
        });
    }
    if n == 0 {
        return Ok(1);
    }
    let mut total: i128 = 0;
    for subset in 1u32..(1u32 << n) {
        let mut prod: i128 = 1;
        for row in m {
            let s: i128 = (0..n)
                .filter(|&j| subset >> j & 1 == 1)
                .map(|j| i128::from(row[j]))
                .sum();
            prod *= s;
            if prod == 0 {
                break;
            }
        }
        let sign = if (n - subset.count_ones() as usize).is_multiple_of(2) { 1 } else { -1 };
        total += sign * prod;
    }
    Ok(total as u128)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    /// Verdict of the sufficient condition.
    pub independent: bool,
    /// Whether the sufficient condition could be evaluated (every atom strictly
    /// inside a region, at most as many atoms as data points).
    pub applicable: bool,
    pub reason: Option<String>,
    /// First column subset (ascending, 0-based) whose minor has
    /// `perm = |det| > 0`.
    pub witness_minor: Option<Vec<usize>>,
    pub perm_value: u128,
    pub det_value: i128,
    /// Activation pattern, one row per atom.
    pub pattern: Vec<Vec<u8>>,
    /// Numerical rank of the evaluation matrix.
    pub rank_k: usize,
    pub singular_values: Vec<f64>,
    /// `rank_k` equals the number of atoms.
    pub rank_full: bool,
}

/// Searches column subsets of the activation pattern in lexicographic order
/// for a square minor with `perm = |det| > 0`, and independently reports the
/// numerical rank of the evaluation matrix.
pub fn check_independence(locations: &[UnitVector], instance: &ProblemInstance) -> Result<IndependenceReport> {
    let big_n = locations.len();
    let n = instance.n();
    let em = evaluation_matrix(locations, instance);
    let sv = singular_values(&em.entries);
    let rank_k = rank_from_singular_values(&sv, RANK_TOL);
    let mut report = IndependenceReport {
        independent: false,
        applicable: true,
        reason: None,
        witness_minor: None,
        perm_value: 0,
        det_value: 0,
        pattern: em.pattern.clone(),
        rank_k,
        singular_values: sv,
        rank_full: rank_k == big_n,
    };
    if big_n > n {
        report.applicable = false;
        report.reason = Some("more atoms than measurements".into());
        return Ok(report);
    }
    if em.has_boundary_entries() {
        report.applicable = false;
        report.reason = Some("an atom lies on a hyperplane; only the numerical rank is reported".into());
        return Ok(report);
    }
    if n > MINOR_SEARCH_MAX {
        return Err(Error::TooLarge {
            size: n,
            max: MINOR_SEARCH_MAX,
        });
    }
    if big_n > PERMANENT_MAX {
        return Err(Error::TooLarge {
            size: big_n,
            max: PERMANENT_MAX,
        });
    }
    let mut cols: Vec<usize> = (0..big_n).collect();
    loop {
        let minor: Vec<Vec<u8>> = em
            .pattern
            .iter()
            .map(|row| cols.iter().map(|&j| row[j]).collect())
            .collect();
        let as_int: Vec<Vec<i64>> = minor
            .iter()
            .map(|r| r.iter().map(|&v| i64::from(v)).collect())
            .collect();
        let det = integer_det(&as_int);
        if det != 0 {
            let perm = permanent(&minor)?;
            if perm == det.unsigned_abs() {
                report.independent = true;
                report.witness_minor = Some(cols);
                report.perm_value = perm;
                report.det_value = det;
                return Ok(report);
            }
        }
        if !next_combination(&mut cols, n) {
            break;
        }
    }
    report.reason = Some("no minor with permanent equal to |det| > 0".into());
    Ok(report)
}

/// Advances `c` (strictly increasing, values `< n`) to the next subset in
/// lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for l in i + 1..k {
                c[l] = c[l - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullRankReport {
    pub full: bool,
    pub rank: usize,
    /// `N d`, the rank required.
    pub required: usize,
    /// `n < N d`: deficient regardless of the data.
    pub deficient_by_shape: bool,
    pub singular_values: Vec<f64>,
    /// The stacked `N d x n` matrix.
    pub stacked: Matrix,
}

/// Rank of the evaluation matrix stacked over the derivative matrix in
/// tangent coordinates.
pub fn check_full_rank(locations: &[UnitVector], instance: &ProblemInstance) -> Result<FullRankReport> {
    let d = instance.dim();
    let bases: Vec<Vec<Vec<f64>>> = locations
        .iter()
        .map(|w| tangent_basis_in_flat(w, &Flat::full(d)))
        .collect();
    check_full_rank_with_bases(locations, instance, &bases)
}

/// As [`check_full_rank`], with explicit orthonormal tangent bases (`d - 1`
/// vectors per atom). The verdict does not depend on the choice.
pub fn check_full_rank_with_bases(
    locations: &[UnitVector],
    instance: &ProblemInstance,
    bases: &[Vec<Vec<f64>>],
) -> Result<FullRankReport> {
    let dm = derivative_matrix(locations, instance)?;
    let em = evaluation_matrix(locations, instance);
    let stacked = em.entries.vstack(&dm.in_tangent_coordinates(bases));
    let sv = if stacked.rows() == 0 {
        vec![]
    } else {
        singular_values(&stacked)
    };
    let rank = rank_from_singular_values(&sv, RANK_TOL);
    let required = locations.len() * instance.dim();
    Ok(FullRankReport {
        full: rank == required,
        rank,
        required,
        deficient_by_shape: instance.n() < required,
        singular_values: sv,
        stacked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::normalize;

    fn inst(points: &[[f64; 2]]) -> ProblemInstance {
        let n = points.len();
        ProblemInstance::new(points.iter().map(|p| p.to_vec()).collect(), vec![0.0; n], 1.0).unwrap()
    }

    #[test]
    fn permanent_examples() {
        let id = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
        assert_eq!(permanent(&id).unwrap(), 1);
        assert_eq!(permanent(&vec![vec![1u8; 3]; 3]).unwrap(), 6);
        assert_eq!(permanent(&[vec![1, 0], vec![1, 1]]).unwrap(), 1);
        assert_eq!(permanent(&vec![vec![1u8; 4]; 4]).unwrap(), 24);
        assert!(matches!(
            permanent(&vec![vec![0u8; 15]; 15]),
            Err(Error::TooLarge { size: 15, max: 14 })
        ));
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(
            seen,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
    }

    #[test]
    fn independence_with_permutation_minor() {
        let i = inst(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let locs = [normalize(&[1.0, -0.5]).unwrap(), normalize(&[-0.5, 1.0]).unwrap()];
        let r = check_independence(&locs, &i).unwrap();
        assert!(r.independent && r.rank_full);
        assert_eq!(r.witness_minor, Some(vec![0, 1]));
        assert_eq!((r.perm_value, r.det_value), (1, 1));
    }

    #[test]
    fn more_atoms_than_data() {
        let i = inst(&[[1.0, 0.0]]);
        let locs = [normalize(&[1.0, 0.5]).unwrap(), normalize(&[1.0, -0.5]).unwrap()];
        let r = check_independence(&locs, &i).unwrap();
        assert!(!r.independent && !r.applicable);
        assert_eq!(r.reason.as_deref(), Some("more atoms than measurements"));
    }

    #[test]
    fn boundary_atoms_make_independence_inapplicable() {
        let i = inst(&[[1.0, 0.0], [0.0, 1.0]]);
        let r = check_independence(&[normalize(&[0.0, 1.0]).unwrap()], &i).unwrap();
        assert!(!r.applicable);
        assert!(r.rank_full);
    }

    #[test]
    fn full_rank_shape_and_degenerate_cases() {
        let i = inst(&[[1.0, 0.0]]);
        let w = normalize(&[1.0, 0.0]).unwrap();
        let r = check_full_rank(&[w], &i).unwrap();
        // The only active point is aligned with w, so the tangent row is 0.
        assert_eq!(r.rank, 1);
        assert!(!r.full && r.deficient_by_shape);

        let i = inst(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let w = normalize(&[1.0, 0.2]).unwrap();
        let r = check_full_rank(&[w], &i).unwrap();
        assert!(r.full && !r.deficient_by_shape);
        assert_eq!(r.required, 2);
    }
}
