//! Dual certificates `eta = K_* p`, their exact global maximization over the
//! sphere, and the localization (LC) and boundary non-degeneracy (ND)
//! checks.
//!
//! On every stratum `R_pi^J` the certificate is the linear function
//! `w -> <z, w>` with the gated sum `z = sum_{j in J, pi_j = +} p^j x^j`, and
//! on the stratum's flat it equals `<P_L z, w>`. Its maximum over the closed
//! stratum on the sphere is therefore either `P_L z / |P_L z|` or lies on a
//! lower-dimensional face, which is itself a stratum. Taking the best
//! in-closure candidate over all strata gives `sup |eta|` exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::arrangement::Stratum;
use crate::error::{Error, Result};
use crate::geometry::{angular_distance, ProblemInstance, SparseMeasure, UnitVector};
use crate::linalg::{axpy, dot, norm};
use crate::operators::{adjoint_eval, adjoint_grad, forward, hyperplane_margin};

/// Gated sums shorter than this produce no candidate.
pub const GATED_ZERO: f64 = 1e-12;
/// Sign tolerance for closure membership of a candidate.
pub const CLOSURE_STRICT_TOL: f64 = 1e-9;
/// Equality tolerance for closure membership of a candidate.
pub const CLOSURE_EQ_TOL: f64 = 1e-10;
/// Candidates closer than this (angular) are the same point.
pub const CANDIDATE_DEDUP: f64 = 1e-8;
/// An atom whose angular margin to a hyperplane is at most this lies on it.
pub const ON_HYPERPLANE: f64 = 1e-8;
/// Default saturation tolerance `|1 - |eta||`.
pub const DEFAULT_TOL_SAT: f64 = 1e-2;
/// Default angular radius for matching saturation points to atoms.
pub const DEFAULT_MATCH_RADIUS: f64 = 5e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub p: Vec<f64>,
}

impl DualCertificate {
    pub fn new(p: Vec<f64>) -> Self {
        Self { p }
    }

    pub fn zero(n: usize) -> Self {
        Self { p: vec![0.0; n] }
    }

    /// `eta(w)`; positively 1-homogeneous in `w`.
    pub fn eval(&self, w: &[f64], instance: &ProblemInstance) -> f64 {
        adjoint_eval(&self.p, w, instance)
    }

    pub fn grad(&self, w: &UnitVector, instance: &ProblemInstance) -> Result<Vec<f64>> {
        adjoint_grad(&self.p, w, instance)
    }

    /// Gated sum `sum_{j in J, pi_j = +} p^j x^j` of a stratum.
    pub fn gated_sum(&self, stratum: &Stratum, instance: &ProblemInstance) -> Vec<f64> {
        let mut z = vec![0.0; instance.dim()];
        for (&j, &s) in stratum.strict.iter().zip(&stratum.signs) {
            if s > 0 {
                axpy(self.p[j], instance.point(j), &mut z);
            }
        }
        z
    }

    /// Projected gated sum `z~ = P_L z`.
    pub fn gated_vector(&self, stratum: &Stratum, instance: &ProblemInstance) -> Vec<f64> {
        stratum.flat.project(&self.gated_sum(stratum, instance))
    }

    /// `max_i |p^i - q^i|`.
    pub fn distance(&self, other: &DualCertificate) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `p = -(K mu - y_zeta) / lambda`, with `lambda` the effective weight of
/// the TV term under the instance's loss convention.
pub fn dual_from_primal(measure: &SparseMeasure, instance: &ProblemInstance) -> Result<DualCertificate> {
    let lambda = instance.effective_lambda();
    if !(lambda > 0.0) {
        return Err(Error::InvalidInstance("dual extraction needs lambda > 0".into()));
    }
    let km = forward(measure, instance);
    let p = km
        .iter()
        .zip(instance.target())
        .map(|(k, y)| -(k - y) / lambda)
        .collect();
    Ok(DualCertificate { p })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePoint {
    /// Index of the generating stratum in the slice passed to [`candidates`].
    pub stratum: usize,
    pub z_tilde: Vec<f64>,
    pub location: UnitVector,
    pub value: f64,
    pub in_closure: bool,
}

/// Both orientations `+-z~/|z~|` of every stratum with a nonzero gated
/// vector. Among in-closure candidates at the same location only the one from
/// the lowest-codimension stratum is kept.
pub fn candidates(cert: &DualCertificate, instance: &ProblemInstance, strata: &[Stratum]) -> Vec<CandidatePoint> {
    let points = instance.points();
    let mut out: Vec<CandidatePoint> = Vec::new();
    for (s, stratum) in strata.iter().enumerate() {
        let z_tilde = cert.gated_vector(stratum, instance);
        let len = norm(&z_tilde);
        if len <= GATED_ZERO {
            continue;
        }
        let mut in_closure_here = 0;
        for orientation in [1.0, -1.0] {
            let location =
                UnitVector::from_normalized(z_tilde.iter().map(|v| orientation * v / len).collect());
            let in_closure = stratum.closure_contains(points, &location, CLOSURE_STRICT_TOL, CLOSURE_EQ_TOL);
            if in_closure {
                in_closure_here += 1;
                let dup = out
                    .iter()
                    .any(|c| c.in_closure && angular_distance(&c.location, &location) <= CANDIDATE_DEDUP);
                if dup {
                    continue;
                }
            }
            let value = cert.eval(&location, instance);
            out.push(CandidatePoint {
                stratum: s,
                z_tilde: z_tilde.clone(),
                location,
                value,
                in_closure,
            });
        }
        debug_assert!(in_closure_here <= 1, "antipodal candidates in one closure");
    }
    out
}

/// `sup_{S^{d-1}} |eta|` with a maximizing candidate (`None` when `eta`
/// vanishes identically on every stratum).
pub fn sup_abs(
    cert: &DualCertificate,
    instance: &ProblemInstance,
    strata: &[Stratum],
) -> (f64, Option<CandidatePoint>) {
    best_of(candidates(cert, instance, strata))
}

fn best_of(cands: Vec<CandidatePoint>) -> (f64, Option<CandidatePoint>) {
    let mut best: Option<CandidatePoint> = None;
    for c in cands.into_iter().filter(|c| c.in_closure) {
        if best.as_ref().is_none_or(|b| c.value.abs() > b.value.abs()) {
            best = Some(c);
        }
    }
    (best.as_ref().map_or(0.0, |b| b.value.abs()), best)
}

/// Points where `|eta| = 1` within `tol_sat`, with the sign of `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSupport {
    pub points: Vec<(CandidatePoint, i8)>,
}

pub fn extended_support(
    cert: &DualCertificate,
    instance: &ProblemInstance,
    strata: &[Stratum],
    tol_sat: f64,
) -> ExtendedSupport {
    let points = candidates(cert, instance, strata)
        .into_iter()
        .filter(|c| c.in_closure && (c.value.abs() - 1.0).abs() <= tol_sat)
        .map(|c| {
            let s = if c.value > 0.0 { 1 } else { -1 };
            (c, s)
        })
        .collect();
    ExtendedSupport { points }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcReport {
    pub holds: bool,
    pub sup_abs: f64,
    pub tol_sat: f64,
    pub match_radius: f64,
    /// In-closure candidates with `|eta| >= 1 - tol_sat`.
    pub saturating: Vec<CandidatePoint>,
    /// Number of in-closure candidates with `|eta| < 1 - tol_sat`.
    pub strict_count: usize,
    /// For each saturating point, the matched atom (same sign, within the
    /// match radius).
    pub matches: Vec<Option<usize>>,
    /// Atoms without a saturating point nearby.
    pub unmatched_atoms: Vec<usize>,
}

/// Localization condition: `|eta| < 1` away from the atoms, `eta = sign(c_i)`
/// at each atom, and `sup |eta| <= 1` (all within `tol_sat`).
pub fn check_lc(
    cert: &DualCertificate,
    measure: &SparseMeasure,
    instance: &ProblemInstance,
    strata: &[Stratum],
    tol_sat: f64,
    match_radius: f64,
) -> LcReport {
    let cands: Vec<CandidatePoint> = candidates(cert, instance, strata)
        .into_iter()
        .filter(|c| c.in_closure)
        .collect();
    let sup = cands.iter().map(|c| c.value.abs()).fold(0.0, f64::max);
    let (saturating, strict): (Vec<_>, Vec<_>) =
        cands.into_iter().partition(|c| c.value.abs() >= 1.0 - tol_sat);

    let matches: Vec<Option<usize>> = saturating
        .iter()
        .map(|c| {
            measure
                .atoms
                .iter()
                .enumerate()
                .filter(|(_, a)| a.coefficient != 0.0 && (a.coefficient > 0.0) == (c.value > 0.0))
                .map(|(i, a)| (i, angular_distance(&a.location, &c.location)))
                .filter(|(_, dist)| *dist <= match_radius)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
        })
        .collect();
    let unmatched_atoms: Vec<usize> = (0..measure.len())
        .filter(|i| !matches.contains(&Some(*i)))
        .collect();
    let holds = sup <= 1.0 + tol_sat && unmatched_atoms.is_empty() && matches.iter().all(Option::is_some);
    LcReport {
        holds,
        sup_abs: sup,
        tol_sat,
        match_radius,
        saturating,
        strict_count: strict.len(),
        matches,
        unmatched_atoms,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdReport {
    pub holds: bool,
    /// Strict index set and signs of the stratum containing the atom.
    pub strict: Vec<usize>,
    pub signs: Vec<i8>,
    /// Indices (into the strata slice) of the compatible family.
    pub family: Vec<usize>,
    /// Smallest pairwise distance between normalized gated vectors, when the
    /// family has at least two members with nonzero gated vector.
    pub min_gap: Option<f64>,
    pub tol: f64,
}

/// Stratum data `(J, signs on J)` of the point `w`: hyperplanes within
/// [`ON_HYPERPLANE`] angular margin count as equalities.
pub fn locate(w: &[f64], instance: &ProblemInstance) -> (Vec<usize>, Vec<i8>) {
    let mut strict = Vec::new();
    let mut signs = Vec::new();
    for (j, x) in instance.points().iter().enumerate() {
        if hyperplane_margin(w, x) > ON_HYPERPLANE {
            strict.push(j);
            signs.push(if dot(w, x) > 0.0 { 1 } else { -1 });
        }
    }
    (strict, signs)
}

/// Boundary non-degeneracy at `atom`: the normalized gated vectors of the
/// compatible family (strata whose index set contains the atom's and whose
/// signs agree there) must be pairwise farther apart than `tol`.
pub fn check_nd(
    cert: &DualCertificate,
    atom: &UnitVector,
    instance: &ProblemInstance,
    strata: &[Stratum],
    tol: f64,
) -> Result<NdReport> {
    let (strict, signs) = locate(atom, instance);
    let family: Vec<usize> = strata
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            strict
                .iter()
                .zip(&signs)
                .all(|(&j, &sg)| s.sign_of(j) == sg)
        })
        .map(|(k, _)| k)
        .collect();
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let directions: Vec<Vec<f64>> = family
        .iter()
        .filter_map(|&k| {
            let z = cert.gated_vector(&strata[k], instance);
            let len = norm(&z);
            (len > GATED_ZERO).then(|| z.iter().map(|v| v / len).collect())
        })
        .collect();
    let mut min_gap: Option<f64> = None;
    for a in 0..directions.len() {
        for b in a + 1..directions.len() {
            let gap = norm(&crate::linalg::sub(&directions[a], &directions[b]));
            min_gap = Some(min_gap.map_or(gap, |g| g.min(gap)));
        }
    }
    Ok(NdReport {
        holds: min_gap.is_none_or(|g| g > tol),
        strict,
        signs,
        family,
        min_gap,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrangement::enumerate_strata;
    use crate::geometry::{normalize, Atom};

    fn inst(points: &[[f64; 2]], labels: &[f64], lambda: f64) -> ProblemInstance {
        ProblemInstance::new(points.iter().map(|p| p.to_vec()).collect(), labels.to_vec(), lambda).unwrap()
    }

    #[test]
    fn dual_from_primal_examples() {
        let i = inst(&[[1.0, 0.0], [0.0, 1.0]], &[2.0, 0.0], 0.5);
        let mu = SparseMeasure::new(vec![Atom {
            coefficient: 2.0,
            location: normalize(&[1.0, 0.0]).unwrap(),
        }]);
        assert_eq!(dual_from_primal(&mu, &i).unwrap().p, vec![0.0, 0.0]);
        let p1 = dual_from_primal(&SparseMeasure::empty(), &i).unwrap();
        let p2 = dual_from_primal(&SparseMeasure::empty(), &i.clone().with_lambda(1.0)).unwrap();
        assert_eq!(p1.p, vec![4.0, 0.0]);
        assert_eq!(p2.p, vec![2.0, 0.0]);
    }

    #[test]
    fn candidates_single_relu() {
        let i = inst(&[[1.0, 0.0]], &[1.0], 1.0);
        let strata = enumerate_strata(i.points()).unwrap();
        let cert = DualCertificate::new(vec![1.0]);
        let cands = candidates(&cert, &i, &strata);
        let inside: Vec<_> = cands.iter().filter(|c| c.in_closure).collect();
        assert_eq!(inside.len(), 1);
        assert!((inside[0].location[0] - 1.0).abs() < 1e-15);
        assert!((inside[0].value - 1.0).abs() < 1e-15);
        assert!(candidates(&DualCertificate::zero(1), &i, &strata).is_empty());
        assert_eq!(sup_abs(&DualCertificate::zero(1), &i, &strata).0, 0.0);
    }

    #[test]
    fn sup_abs_of_unit_dual_is_point_norm() {
        let i = inst(&[[0.2, -0.1], [1.0, 0.3], [1.0, 0.0]], &[0.0; 3], 1.0);
        let strata = enumerate_strata(i.points()).unwrap();
        let (s, arg) = sup_abs(&DualCertificate::new(vec![0.0, 1.0, 0.0]), &i, &strata);
        assert!((s - norm(&[1.0, 0.3])).abs() < 1e-14);
        let arg = arg.unwrap();
        assert!(angular_distance(&arg.location, &normalize(&[1.0, 0.3]).unwrap()) < 1e-12);
    }

    #[test]
    fn nd_interior_atom_is_singleton() {
        let i = inst(&[[1.0, 0.0], [0.0, 1.0]], &[0.0; 2], 1.0);
        let strata = enumerate_strata(i.points()).unwrap();
        let cert = DualCertificate::new(vec![0.3, 0.7]);
        let r = check_nd(&cert, &normalize(&[1.0, 1.0]).unwrap(), &i, &strata, 1e-6).unwrap();
        assert_eq!(r.family.len(), 1);
        assert!(r.holds);
        assert_eq!(r.min_gap, None);
    }

    #[test]
    fn nd_detects_identical_gated_sums() {
        // On the face x^1 = 0 with sign + on x^2, the face itself and the
        // region (-, +) both gate exactly p^2 x^2.
        let i = inst(&[[1.0, 0.0], [0.0, 1.0]], &[0.0; 2], 1.0);
        let strata = enumerate_strata(i.points()).unwrap();
        let cert = DualCertificate::new(vec![0.3, 0.7]);
        let r = check_nd(&cert, &normalize(&[0.0, 1.0]).unwrap(), &i, &strata, 1e-6).unwrap();
        assert_eq!(r.strict, vec![1]);
        assert_eq!(r.family.len(), 3);
        assert!(!r.holds);
        assert!(r.min_gap.unwrap() < 1e-15);
    }

    #[test]
    fn lc_fails_for_zero_dual() {
        let i = inst(&[[1.0, 0.0], [0.0, 1.0]], &[1.0, 0.0], 1.0);
        let strata = enumerate_strata(i.points()).unwrap();
        let mu = SparseMeasure::new(vec![Atom {
            coefficient: 1.0,
            location: normalize(&[1.0, 0.0]).unwrap(),
        }]);
        let r = check_lc(&DualCertificate::zero(2), &mu, &i, &strata, 1e-2, 5e-2);
        assert!(!r.holds);
        assert_eq!(r.unmatched_atoms, vec![0]);
    }

    #[test]
    fn lc_holds_for_single_feature_fit() {
        // y = (2), lambda = 1: mu = delta_{x} with c = 1 leaves residual 1,
        // so p = 1 and eta = ReLU<w, x> peaks at 1 exactly at x.
        let i = inst(&[[1.0, 0.0]], &[2.0], 1.0);
        let strata = enumerate_strata(i.points()).unwrap();
        let mu = SparseMeasure::new(vec![Atom {
            coefficient: 1.0,
            location: normalize(&[1.0, 0.0]).unwrap(),
        }]);
        let cert = dual_from_primal(&mu, &i).unwrap();
        let r = check_lc(&cert, &mu, &i, &strata, 1e-2, 5e-2);
        assert!(r.holds, "{r:?}");
        assert_eq!(r.saturating.len(), 1);
        let es = extended_support(&cert, &i, &strata, 1e-2);
        assert_eq!(es.points.len(), 1);
        assert_eq!(es.points[0].1, 1);
    }
}
