//! Vectors on the sphere, problem data, discrete measures and the linear
//! flats that carry lower-dimensional strata.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};

/// Norms at or below this are treated as zero when normalizing.
pub const ZERO_NORM: f64 = 1e-14;

/// Relative threshold used for rank and zero decisions in orthogonalization.
pub const RANK_TOL: f64 = 1e-10;

/// A point of the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps coordinates that are already unit norm (checked in debug builds).
    pub fn from_normalized(coords: Vec<f64>) -> Self {
        debug_assert!((norm(&coords) - 1.0).abs() < 1e-9);
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }

    /// Geodesic distance on the sphere, computed as `2 asin(|a - b| / 2)`
    /// which stays accurate for nearby points.
    pub fn angular_distance(&self, other: &UnitVector) -> f64 {
        angular_distance(&self.0, &other.0)
    }
}

impl Deref for UnitVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Geodesic distance between two unit vectors.
pub fn angular_distance(a: &[f64], b: &[f64]) -> f64 {
    let chord = norm(&crate::linalg::sub(a, b));
    2.0 * libm::asin((chord / 2.0).min(1.0))
}

/// Returns `v / |v|`.
pub fn normalize(v: &[f64]) -> Result<UnitVector> {
    let n = norm(v);
    if n <= ZERO_NORM || !n.is_finite() {
        return Err(Error::ZeroVector { norm: n });
    }
    Ok(UnitVector(v.iter().map(|x| x / n).collect()))
}

/// Standard normal sample by Box-Muller.
pub(crate) fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        if u1 > f64::MIN_POSITIVE {
            return libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2);
        }
    }
}

/// Uniform sample on `S^{d-1}`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> UnitVector {
    loop {
        let v: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
        if let Ok(u) = normalize(&v) {
            return u;
        }
    }
}

/// How the data-fit term is scaled relative to the TV penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossConvention {
    /// `1/2 sum_j r_j^2 + lambda |mu|`.
    #[default]
    HalfSum,
    /// `1/n sum_j r_j^2 + lambda |mu|`, the mean-squared-error training loss.
    /// Equivalent to `HalfSum` with `lambda * n / 2`.
    Mean,
}

/// Data points, labels, regularization and optional label noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    points: Vec<Vec<f64>>,
    labels: Vec<f64>,
    lambda: f64,
    noise: Option<Vec<f64>>,
    loss: LossConvention,
}

impl ProblemInstance {
    /// `lambda == 0` denotes the interpolation problem.
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<f64>, lambda: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInstance("no data points".into()));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidInstance("data points have dimension 0".into()));
        }
        for (j, x) in points.iter().enumerate() {
            if x.len() != d {
                return Err(Error::InvalidInstance(format!(
                    "point {j} has dimension {}, expected {d}",
                    x.len()
                )));
            }
            if norm(x) <= ZERO_NORM {
                return Err(Error::InvalidInstance(format!("point {j} is zero")));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInstance(format!("point {j} is not finite")));
            }
        }
        if labels.len() != points.len() {
            return Err(Error::InvalidInstance(format!(
                "{} labels for {} points",
                labels.len(),
                points.len()
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInstance(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self {
            points,
            labels,
            lambda,
            noise: None,
            loss: LossConvention::HalfSum,
        })
    }

    pub fn with_noise(mut self, noise: Vec<f64>) -> Result<Self> {
        if noise.len() != self.points.len() {
            return Err(Error::InvalidInstance(format!(
                "noise has length {}, expected {}",
                noise.len(),
                self.points.len()
            )));
        }
        self.noise = Some(noise);
        Ok(self)
    }

    pub fn without_noise(mut self) -> Self {
        self.noise = None;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_loss(mut self, loss: LossConvention) -> Self {
        self.loss = loss;
        self
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn noise(&self) -> Option<&[f64]> {
        self.noise.as_deref()
    }

    pub fn loss(&self) -> LossConvention {
        self.loss
    }

    /// The regularization parameter as given.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The parameter in front of the TV norm once the data term is written
    /// as `1/2 |K mu - y|^2`.
    pub fn effective_lambda(&self) -> f64 {
        match self.loss {
            LossConvention::HalfSum => self.lambda,
            LossConvention::Mean => self.lambda * self.n() as f64 / 2.0,
        }
    }

    /// Factor `s` with `objective = s * (1/2 |K mu - y|^2 + effective_lambda |mu|)`.
    pub fn loss_weight(&self) -> f64 {
        match self.loss {
            LossConvention::HalfSum => 1.0,
            LossConvention::Mean => 2.0 / self.n() as f64,
        }
    }

    pub fn is_interpolation(&self) -> bool {
        self.lambda == 0.0
    }

    /// Labels plus noise, `y_zeta`.
    pub fn target(&self) -> Vec<f64> {
        match &self.noise {
            Some(z) => self.labels.iter().zip(z).map(|(y, e)| y + e).collect(),
            None => self.labels.clone(),
        }
    }

    pub fn max_point_norm(&self) -> f64 {
        self.points.iter().map(|x| norm(x)).fold(0.0, f64::max)
    }
}

/// One Dirac atom `c delta_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub coefficient: f64,
    pub location: UnitVector,
}

/// A finite signed measure `sum_i c_i delta_{w_i}` on the sphere.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMeasure {
    pub atoms: Vec<Atom>,
}

impl SparseMeasure {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn tv_norm(&self) -> f64 {
        self.atoms.iter().map(|a| a.coefficient.abs()).sum()
    }

    pub fn locations(&self) -> Vec<UnitVector> {
        self.atoms.iter().map(|a| a.location.clone()).collect()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.coefficient).collect()
    }

    /// Smallest pairwise angular distance between atoms (infinite for fewer
    /// than two atoms).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                best = best.min(a.location.angular_distance(&b.location));
            }
        }
        best
    }

    /// Greedy merge of atoms closer than `radius`: coefficients are summed and
    /// the location is the `|c|`-weighted mean, renormalized.
    pub fn merge_close(&self, radius: f64) -> SparseMeasure {
        let mut order: Vec<usize> = (0..self.atoms.len()).collect();
        order.sort_by(|&a, &b| {
            self.atoms[b]
                .coefficient
                .abs()
                .partial_cmp(&self.atoms[a].coefficient.abs())
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        // (center, members)
        let mut clusters: Vec<(UnitVector, Vec<usize>)> = Vec::new();
        for i in order {
            let loc = &self.atoms[i].location;
            match clusters
                .iter_mut()
                .find(|(center, _)| center.angular_distance(loc) <= radius)
            {
                Some((_, members)) => members.push(i),
                None => clusters.push((loc.clone(), vec![i])),
            }
        }
        let atoms = clusters
            .into_iter()
            .map(|(center, members)| {
                if members.len() == 1 {
                    return self.atoms[members[0]].clone();
                }
                let d = center.dim();
                let mut mean = vec![0.0; d];
                let mut total = 0.0;
                for &i in &members {
                    let a = &self.atoms[i];
                    axpy(a.coefficient.abs(), &a.location, &mut mean);
                    total += a.coefficient;
                }
                let location = normalize(&mean).unwrap_or(center);
                Atom {
                    coefficient: total,
                    location,
                }
            })
            .collect();
        SparseMeasure { atoms }
    }
}

/// A linear subspace `L = {v : <v, x^z> = 0 for every equality normal}`
/// stored with an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Flat {
    parent_dim: usize,
    equality_normals: Vec<Vec<f64>>,
    basis: Vec<Vec<f64>>,
}

impl Flat {
    /// The whole space `R^d`.
    pub fn full(d: usize) -> Self {
        let basis = (0..d)
            .map(|k| {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                e
            })
            .collect();
        Self {
            parent_dim: d,
            equality_normals: Vec::new(),
            basis,
        }
    }

    pub fn parent_dim(&self) -> usize {
        self.parent_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn equality_normals(&self) -> &[Vec<f64>] {
        &self.equality_normals
    }

    pub fn is_full(&self) -> bool {
        self.basis.len() == self.parent_dim
    }

    /// Orthogonal projection onto the flat.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        project_onto_flat(v, self)
    }

    /// Coordinates of `v` in the flat's basis.
    pub fn coordinates(&self, v: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|b| dot(v, b)).collect()
    }

    /// Distance from `v` to the flat.
    pub fn distance(&self, v: &[f64]) -> f64 {
        norm(&crate::linalg::sub(v, &self.project(v)))
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Vectors whose
/// residual falls below `threshold` are dropped.
pub(crate) fn orthonormalize(vectors: &[Vec<f64>], threshold: f64, start: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = start.to_vec();
    let fixed = basis.len();
    for v in vectors {
        let mut r = v.clone();
        for _pass in 0..2 {
            for b in &basis {
                let c = dot(&r, b);
                axpy(-c, b, &mut r);
            }
        }
        let nr = norm(&r);
        if nr > threshold {
            r.iter_mut().for_each(|x| *x /= nr);
            basis.push(r);
        }
    }
    basis.split_off(fixed)
}

/// Orthonormal basis of the orthogonal complement of `span(normals)` in `R^d`.
pub fn flat_from_normals(normals: &[Vec<f64>], d: usize) -> Result<Flat> {
    for n in normals {
        if n.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: n.len(),
            });
        }
    }
    let scale = normals.iter().map(|n| norm(n)).fold(0.0, f64::max);
    let span = orthonormalize(normals, RANK_TOL * scale, &[]);
    let rank = span.len();
    if rank >= d {
        return Err(Error::EmptyFlat);
    }
    let standard = Flat::full(d).basis;
    let mut basis = orthonormalize(&standard, RANK_TOL, &span);
    basis.truncate(d - rank);
    if basis.is_empty() {
        return Err(Error::EmptyFlat);
    }
    Ok(Flat {
        parent_dim: d,
        equality_normals: normals.to_vec(),
        basis,
    })
}

/// `sum_b <v, b> b` over the flat's orthonormal basis.
pub fn project_onto_flat(v: &[f64], flat: &Flat) -> Vec<f64> {
    let mut out = vec![0.0; flat.parent_dim];
    for b in &flat.basis {
        axpy(dot(v, b), b, &mut out);
    }
    out
}

/// Orthonormal basis of `T_w S^{d-1}` intersected with `flat`, i.e. the
/// directions along which `w` can move while staying in the flat.
pub fn tangent_basis_in_flat(w: &[f64], flat: &Flat) -> Vec<Vec<f64>> {
    let wp = flat.project(w);
    let nw = norm(&wp);
    let start: Vec<Vec<f64>> = if nw > RANK_TOL {
        vec![wp.iter().map(|x| x / nw).collect()]
    } else {
        Vec::new()
    };
    let mut t = orthonormalize(&flat.basis, RANK_TOL, &start);
    t.truncate(flat.dim().saturating_sub(start.len()));
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalize_examples() {
        let u = normalize(&[3.0, 4.0]).unwrap();
        assert!((u[0] - 0.6).abs() < 1e-15 && (u[1] - 0.8).abs() < 1e-15);
        assert_eq!(normalize(&[1.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        assert!(matches!(normalize(&[0.0, 0.0]), Err(Error::ZeroVector { .. })));
    }

    #[test]
    fn flat_examples() {
        let f = flat_from_normals(&[], 2).unwrap();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.basis(), Flat::full(2).basis());

        let f = flat_from_normals(&[vec![1.0, 0.0]], 2).unwrap();
        assert_eq!(f.dim(), 1);
        assert!(f.basis()[0][0].abs() < 1e-15);
        assert!((f.basis()[0][1].abs() - 1.0).abs() < 1e-15);

        assert_eq!(
            flat_from_normals(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2),
            Err(Error::EmptyFlat)
        );
        // Parallel normals only remove one dimension.
        let f = flat_from_normals(&[vec![1.0, 1.0, 0.0], vec![-2.0, -2.0, 0.0]], 3).unwrap();
        assert_eq!(f.dim(), 2);
    }

    #[test]
    fn projection_examples() {
        let l = flat_from_normals(&[vec![1.0, 0.0]], 2).unwrap();
        let p = project_onto_flat(&[1.0, 1.0], &l);
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        let q = project_onto_flat(&[0.0, -2.5], &l);
        assert!((q[1] + 2.5).abs() < 1e-15);

        let l3 = flat_from_normals(&[vec![0.0, 0.0, 1.0]], 3).unwrap();
        let p = project_onto_flat(&[2.0, -3.0, 5.0], &l3);
        for (a, b) in p.iter().zip([2.0, -3.0, 0.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_invariants_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let d = 2 + trial % 5;
            let k = trial % d;
            let normals: Vec<Vec<f64>> =
                (0..k).map(|_| (0..d).map(|_| gaussian(&mut rng)).collect()).collect();
            let f = flat_from_normals(&normals, d).unwrap();
            assert_eq!(f.dim(), d - k);
            for (i, b) in f.basis().iter().enumerate() {
                assert!((norm(b) - 1.0).abs() < 1e-12);
                for c in &f.basis()[i + 1..] {
                    assert!(dot(b, c).abs() <= 1e-10);
                }
                for n in &normals {
                    assert!(dot(b, n).abs() <= 1e-10);
                }
            }
            let u: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
            let v: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
            let pu = f.project(&u);
            let ppu = f.project(&pu);
            for (a, b) in pu.iter().zip(&ppu) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((dot(&pu, &v) - dot(&u, &f.project(&v))).abs() < 1e-12);
            for n in &normals {
                assert!(dot(&pu, n).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tangent_basis_is_orthogonal_to_point() {
        let flat = flat_from_normals(&[vec![0.0, 0.0, 1.0]], 3).unwrap();
        let w = normalize(&[1.0, 1.0, 0.0]).unwrap();
        let t = tangent_basis_in_flat(&w, &flat);
        assert_eq!(t.len(), 1);
        assert!(dot(&t[0], &w).abs() < 1e-14);
        assert!(t[0][2].abs() < 1e-14);
        let t_full = tangent_basis_in_flat(&w, &Flat::full(3));
        assert_eq!(t_full.len(), 2);
    }

    #[test]
    fn merge_close_sums_coefficients() {
        let a = normalize(&[1.0, 0.0]).unwrap();
        let b = normalize(&[1.0, 1e-4]).unwrap();
        let c = normalize(&[0.0, 1.0]).unwrap();
        let m = SparseMeasure::new(vec![
            Atom { coefficient: 1.0, location: a },
            Atom { coefficient: 0.5, location: b },
            Atom { coefficient: -2.0, location: c },
        ]);
        let merged = m.merge_close(1e-3);
        assert_eq!(merged.len(), 2);
        assert!((merged.tv_norm() - 3.5).abs() < 1e-15);
    }

    #[test]
    fn instance_validation() {
        assert!(ProblemInstance::new(vec![vec![0.0, 0.0]], vec![1.0], 0.1).is_err());
        assert!(ProblemInstance::new(vec![vec![1.0, 0.0]], vec![1.0, 2.0], 0.1).is_err());
        assert!(ProblemInstance::new(vec![vec![1.0, 0.0]], vec![1.0], -1.0).is_err());
        let inst = ProblemInstance::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 2.0], 0.1)
            .unwrap()
            .with_loss(LossConvention::Mean);
        assert!((inst.effective_lambda() - 0.1).abs() < 1e-15);
        let noisy = inst.with_noise(vec![0.5, -0.5]).unwrap();
        assert_eq!(noisy.target(), vec![1.5, 1.5]);
    }
}
