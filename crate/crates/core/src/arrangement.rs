//! The central hyperplane arrangement `{<w, x^j> = 0}` cut out by the data:
//! dual regions, their lower-dimensional strata, and counting bounds.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{flat_from_normals, normalize, Flat, UnitVector};
use crate::hull::min_norm_point;
use crate::linalg::{binomial, dot, norm};

/// Distance from the origin to the hull above which a pattern is feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Below this distance at the iteration cap the pattern is infeasible;
/// between this and [`FEASIBILITY_TOL`] the answer is inconclusive.
pub const INCONCLUSIVE_FLOOR: f64 = 1e-12;
/// Relative size below which a projected data point counts as zero.
pub const VANISH_TOL: f64 = 1e-10;

/// Signs `+1` / `-1` of `<w, x^j>` on a full dual region. The binary encoding
/// used for gating is `pi_j = 1` for `+1` and `pi_j = 0` for `-1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignPattern(pub Vec<i8>);

impl SignPattern {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Binary activation vector `pi`.
    pub fn binary(&self) -> Vec<u8> {
        self.0.iter().map(|&s| u8::from(s > 0)).collect()
    }
}

/// A stratum `R_pi^J`: strict signs on `J`, equalities off `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    /// Number of data points `n`.
    pub n: usize,
    /// Indices with a strict sign, sorted ascending.
    pub strict: Vec<usize>,
    /// Sign for each entry of `strict`.
    pub signs: Vec<i8>,
    /// `L^J`, the intersection of the hyperplanes indexed outside `J`.
    pub flat: Flat,
    /// A point of the stratum on the sphere, certified by the feasibility
    /// oracle.
    pub witness: UnitVector,
}

impl Stratum {
    /// Combinatorial codimension `n - |J|`.
    pub fn codim_label(&self) -> usize {
        self.n - self.strict.len()
    }

    pub fn is_full_dimensional(&self) -> bool {
        self.strict.len() == self.n
    }

    /// Ternary activation pattern: `+1`, `-1` on `J`, `0` off `J`.
    pub fn ternary(&self) -> Vec<i8> {
        let mut t = vec![0i8; self.n];
        for (&j, &s) in self.strict.iter().zip(&self.signs) {
            t[j] = s;
        }
        t
    }

    /// Sign pattern of a full-dimensional region.
    pub fn pattern(&self) -> Option<SignPattern> {
        self.is_full_dimensional().then(|| SignPattern(self.signs.clone()))
    }

    /// Sign of index `j` in this stratum (0 when `j` is on an equality).
    pub fn sign_of(&self, j: usize) -> i8 {
        match self.strict.binary_search(&j) {
            Ok(k) => self.signs[k],
            Err(_) => 0,
        }
    }

    /// Whether `w` lies in the closure of the stratum: non-strict signs on
    /// `J` within `strict_tol` and equalities within `eq_tol`.
    pub fn closure_contains(&self, points: &[Vec<f64>], w: &[f64], strict_tol: f64, eq_tol: f64) -> bool {
        for (j, x) in points.iter().enumerate() {
            let v = dot(w, x);
            match self.sign_of(j) {
                0 => {
                    if v.abs() > eq_tol {
                        return false;
                    }
                }
                s => {
                    if f64::from(s) * v < -strict_tol {
                        return false;
                    }
                }
            }
        }
        if self.strict.is_empty() && self.flat.dim() == 1 {
            // The two antipodal points of a line are separate strata.
            return dot(w, &self.witness) > 0.0;
        }
        true
    }

    fn sort_key(&self) -> (core::cmp::Reverse<usize>, Vec<usize>, Vec<i8>, bool) {
        let orientation = self
            .witness
            .iter()
            .find(|v| v.abs() > 1e-12)
            .is_some_and(|v| *v < 0.0);
        (
            core::cmp::Reverse(self.strict.len()),
            self.strict.clone(),
            self.signs.clone(),
            orientation,
        )
    }
}

/// Decides whether some `w` in `flat` on the sphere satisfies
/// `signs[k] * <w, x^{strict[k]}> > 0` for every `k`, returning a witness.
///
/// The strict system is solvable iff the origin is outside the convex hull of
/// `{signs[k] * P_flat x^{strict[k]}}`; the normalized closest hull point is
/// then a witness with margin equal to the hull distance.
pub fn pattern_feasible(
    points: &[Vec<f64>],
    strict: &[usize],
    signs: &[i8],
    flat: &Flat,
) -> Result<Option<UnitVector>> {
    assert_eq!(strict.len(), signs.len());
    if strict.is_empty() {
        return Ok(Some(UnitVector::from_normalized(flat.basis()[0].clone())));
    }
    let mut gens = Vec::with_capacity(strict.len());
    for (&j, &s) in strict.iter().zip(signs) {
        let p = flat.project(&points[j]);
        if norm(&p) <= VANISH_TOL * norm(&points[j]) {
            return Ok(None);
        }
        gens.push(p.into_iter().map(|v| f64::from(s) * v).collect::<Vec<f64>>());
    }
    let n = points.len();
    let d = flat.parent_dim();
    let cap = (10 * n * d).max(20);
    let h = min_norm_point(&gens, FEASIBILITY_TOL, cap);

    let inconclusive = || Error::Inconclusive {
        strict: strict.to_vec(),
        signs: signs.to_vec(),
        distance: h.distance,
    };

    if h.distance <= FEASIBILITY_TOL {
        if !h.converged && h.distance > INCONCLUSIVE_FLOOR {
            return Err(inconclusive());
        }
        return Ok(None);
    }
    let witness = normalize(&h.point).map_err(|_| inconclusive())?;
    let margin = gens.iter().map(|g| dot(g, &witness)).fold(f64::INFINITY, f64::min);
    if margin > FEASIBILITY_TOL {
        Ok(Some(witness))
    } else {
        Err(inconclusive())
    }
}

/// Feasibility of a full sign pattern on the whole space.
pub fn region_feasible(points: &[Vec<f64>], signs: &SignPattern) -> Result<Option<UnitVector>> {
    let d = points.first().map_or(0, Vec::len);
    let strict: Vec<usize> = (0..points.len()).collect();
    pattern_feasible(points, &strict, &signs.0, &Flat::full(d))
}

/// All nonempty strata of the arrangement, in canonical order: `|J|`
/// descending, then `J` and the signs lexicographically.
pub fn enumerate_strata(points: &[Vec<f64>]) -> Result<Vec<Stratum>> {
    let n = points.len();
    assert!(n < usize::BITS as usize, "too many data points");
    let d = points.first().map_or(0, Vec::len);
    let mut out = Vec::new();

    for mask in 0..(1usize << n) {
        let strict: Vec<usize> = (0..n).filter(|j| mask >> j & 1 == 1).collect();
        let normals: Vec<Vec<f64>> = (0..n)
            .filter(|j| mask >> j & 1 == 0)
            .map(|j| points[j].clone())
            .collect();
        let flat = match flat_from_normals(&normals, d) {
            Ok(f) => f,
            Err(Error::EmptyFlat) => continue,
            Err(e) => return Err(e),
        };
        if strict.is_empty() {
            let b = &flat.basis()[0];
            let mut witnesses = vec![UnitVector::from_normalized(b.clone())];
            if flat.dim() == 1 {
                witnesses.push(UnitVector::from_normalized(b.iter().map(|v| -v).collect()));
            }
            for witness in witnesses {
                out.push(Stratum {
                    n,
                    strict: Vec::new(),
                    signs: Vec::new(),
                    flat: flat.clone(),
                    witness,
                });
            }
            continue;
        }
        if strict
            .iter()
            .any(|&j| norm(&flat.project(&points[j])) <= VANISH_TOL * norm(&points[j]))
        {
            continue;
        }
        // Depth-first over signs; an infeasible prefix prunes every extension.
        let mut stack: Vec<Vec<i8>> = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            for s in [-1i8, 1] {
                let mut signs = prefix.clone();
                signs.push(s);
                let k = signs.len();
                if let Some(witness) = pattern_feasible(points, &strict[..k], &signs, &flat)? {
                    if k == strict.len() {
                        out.push(Stratum {
                            n,
                            strict: strict.clone(),
                            signs,
                            flat: flat.clone(),
                            witness,
                        });
                    } else {
                        stack.push(signs);
                    }
                }
            }
        }
    }

    out.sort_by_key(Stratum::sort_key);
    out.dedup_by(|a, b| a.sort_key() == b.sort_key());
    Ok(out)
}

/// `Xi(n, d) = 2 sum_{k<d} C(n-1, k)`: regions cut out of `R^d` by `n`
/// central hyperplanes in general position. `Xi(n, d) = 0` for `d < 0` and
/// `Xi(0, d) = 1` for `d >= 0` (the empty arrangement has one region).
pub fn cover_count(n: usize, d: i64) -> u128 {
    if d < 0 {
        return 0;
    }
    if n == 0 {
        return 1;
    }
    let mut total: u128 = 0;
    for k in 0..d as u64 {
        total = total.saturating_add(binomial(n as u64 - 1, k));
    }
    total.saturating_mul(2)
}

/// `max_k C(n, k) Xi(n - k, d - k)`: an upper bound on the number of points
/// where a certificate attains `|eta| = 1`, hence on the support size of any
/// minimizer.
pub fn sparsity_bound(n: usize, d: usize) -> u128 {
    (0..=n)
        .map(|k| binomial(n as u64, k as u64).saturating_mul(cover_count(n - k, d as i64 - k as i64)))
        .max()
        .unwrap_or(0)
}

/// Counts per codimension label plus the formula values, for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrangementSummary {
    pub n: usize,
    pub d: usize,
    pub full_regions: usize,
    pub strata_by_codim: BTreeMap<usize, usize>,
    pub cover_count: u128,
    pub sparsity_bound: u128,
    /// Whether the enumerated region count equals the general-position
    /// formula. Degenerate data can give fewer regions.
    pub matches_cover_count: bool,
}

pub fn summarize(points: &[Vec<f64>], strata: &[Stratum]) -> ArrangementSummary {
    let n = points.len();
    let d = points.first().map_or(0, Vec::len);
    let mut by_codim = BTreeMap::new();
    for s in strata {
        *by_codim.entry(s.codim_label()).or_insert(0) += 1;
    }
    let full = strata.iter().filter(|s| s.is_full_dimensional()).count();
    let cc = cover_count(n, d as i64);
    ArrangementSummary {
        n,
        d,
        full_regions: full,
        strata_by_codim: by_codim,
        cover_count: cc,
        sparsity_bound: sparsity_bound(n, d),
        matches_cover_count: full as u128 == cc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(raw: &[[f64; 2]]) -> Vec<Vec<f64>> {
        raw.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn first_quadrant_is_feasible() {
        let p = pts(&[[1.0, 0.0], [0.0, 1.0]]);
        let w = region_feasible(&p, &SignPattern(vec![1, 1])).unwrap().unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((w[0] - h).abs() < 1e-12 && (w[1] - h).abs() < 1e-12);
    }

    #[test]
    fn opposite_halfplanes_are_infeasible() {
        let p = pts(&[[1.0, 0.0], [-1.0, 0.0]]);
        assert!(region_feasible(&p, &SignPattern(vec![1, 1])).unwrap().is_none());
        assert!(region_feasible(&p, &SignPattern(vec![1, -1])).unwrap().is_some());
    }

    #[test]
    fn single_hyperplane_on_circle() {
        let strata = enumerate_strata(&pts(&[[1.0, 0.0]])).unwrap();
        assert_eq!(strata.len(), 4);
        assert_eq!(strata.iter().filter(|s| s.is_full_dimensional()).count(), 2);
        let points: Vec<&Stratum> = strata.iter().filter(|s| s.strict.is_empty()).collect();
        assert_eq!(points.len(), 2);
        assert!((points[0].witness[1] + points[1].witness[1]).abs() < 1e-15);
        assert!(points.iter().all(|s| s.witness[0].abs() < 1e-15));
    }

    #[test]
    fn two_axes_give_four_quadrants() {
        let strata = enumerate_strata(&pts(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        let mut full: Vec<Vec<u8>> = strata
            .iter()
            .filter_map(|s| s.pattern())
            .map(|p| p.binary())
            .collect();
        full.sort();
        assert_eq!(full, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        // Plus the four axis points.
        assert_eq!(strata.len(), 8);
    }

    #[test]
    fn witnesses_satisfy_constraints() {
        let p = pts(&[[0.2, -0.1], [1.0, 0.3], [1.0, 0.0], [-0.4, 0.9], [0.5, 0.5]]);
        for s in enumerate_strata(&p).unwrap() {
            for (j, x) in p.iter().enumerate() {
                let v = dot(&s.witness, x);
                match s.sign_of(j) {
                    0 => assert!(v.abs() <= 1e-10),
                    sg => assert!(f64::from(sg) * v > 1e-9),
                }
            }
        }
    }

    #[test]
    fn cover_count_values() {
        assert_eq!(cover_count(5, 2), 10);
        assert_eq!(cover_count(4, 1), 2);
        assert_eq!(cover_count(3, 3), 8);
        assert_eq!(cover_count(2, 5), 4);
        assert_eq!(cover_count(3, -1), 0);
        assert_eq!(cover_count(0, 0), 1);
    }

    #[test]
    fn sparsity_bound_values() {
        assert_eq!(sparsity_bound(5, 2), 10);
        for n in 1..=10usize {
            for d in 1..=6usize {
                let b = sparsity_bound(n, d);
                assert!(b <= 3u128.pow(n as u32));
                if n <= d {
                    let best = (0..=n)
                        .map(|k| binomial(n as u64, k as u64) * (1u128 << (n - k)))
                        .max()
                        .unwrap();
                    assert_eq!(b, best, "n={n} d={d}");
                }
            }
        }
    }

    #[test]
    fn parallel_data_points_share_a_hyperplane() {
        // x^1 and x^2 are parallel: strata where only one of them is on an
        // equality are empty.
        let p = pts(&[[1.0, 0.0], [2.0, 0.0]]);
        let strata = enumerate_strata(&p).unwrap();
        let ternaries: Vec<Vec<i8>> = strata.iter().map(Stratum::ternary).collect();
        assert_eq!(strata.iter().filter(|s| s.is_full_dimensional()).count(), 2);
        assert!(ternaries.contains(&vec![0, 0]));
        assert!(!ternaries.iter().any(|t| (t[0] == 0) != (t[1] == 0)));
        let s = summarize(&p, &strata);
        assert!(!s.matches_cover_count);
    }

    #[test]
    fn three_dimensional_arrangement_counts() {
        // Three coordinate planes in R^3: 8 octants, 12 quarter-planes,
        // 6 axis points.
        let p = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let strata = enumerate_strata(&p).unwrap();
        let s = summarize(&p, &strata);
        assert_eq!(s.full_regions, 8);
        assert_eq!(s.strata_by_codim.get(&1), Some(&12));
        assert_eq!(s.strata_by_codim.get(&2), Some(&6));
        assert!(s.matches_cover_count);
    }
}
