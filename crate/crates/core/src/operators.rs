//! The measurement operator `K mu = (int ReLU<w, x^j> dmu(w))_j`, its
//! pre-adjoint `K_* p (w) = sum_j p^j ReLU<w, x^j>`, and the Riemannian
//! derivative of the latter.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{ProblemInstance, SparseMeasure, UnitVector};
use crate::linalg::{axpy, dot, norm, Matrix};

/// Activations in `(-ACTIVE_TOL, ACTIVE_TOL]` count as inactive and are
/// flagged in the evaluation matrix.
pub const ACTIVE_TOL: f64 = 1e-10;
/// Minimum angular margin to every hyperplane for the derivative matrix.
pub const INTERIOR_MARGIN: f64 = 1e-8;

/// ReLU with the subgradient convention `sigma'(0) = 0`.
#[inline]
pub fn relu(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

/// Angular margin `|<w, x>| / |x|` of `w` to the hyperplane `x^perp`.
#[inline]
pub fn hyperplane_margin(w: &[f64], x: &[f64]) -> f64 {
    dot(w, x).abs() / norm(x)
}

/// Smallest hyperplane margin of `w` over all data points, with its index.
pub fn min_margin(w: &[f64], instance: &ProblemInstance) -> (usize, f64) {
    instance
        .points()
        .iter()
        .enumerate()
        .map(|(j, x)| (j, hyperplane_margin(w, x)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// `(K mu)_j = sum_i c_i ReLU<w_i, x^j>`.
pub fn forward(measure: &SparseMeasure, instance: &ProblemInstance) -> Vec<f64> {
    let mut out = vec![0.0; instance.n()];
    for atom in &measure.atoms {
        for (o, x) in out.iter_mut().zip(instance.points()) {
            *o += atom.coefficient * relu(dot(&atom.location, x));
        }
    }
    out
}

/// `eta(w) = sum_j p^j ReLU<w, x^j>`.
pub fn adjoint_eval(p: &[f64], w: &[f64], instance: &ProblemInstance) -> f64 {
    debug_assert_eq!(p.len(), instance.n());
    p.iter()
        .zip(instance.points())
        .map(|(pj, x)| pj * relu(dot(w, x)))
        .sum()
}

/// Riemannian gradient of `eta` at `w`:
/// `sum_j p^j 1{<w,x^j> > 0} (x^j - <w,x^j> w)`.
pub fn adjoint_grad(p: &[f64], w: &UnitVector, instance: &ProblemInstance) -> Result<Vec<f64>> {
    let mut g = vec![0.0; w.dim()];
    for (j, (pj, x)) in p.iter().zip(instance.points()).enumerate() {
        let a = dot(w, x);
        if *pj != 0.0 && a.abs() <= ACTIVE_TOL {
            return Err(Error::Nondifferentiable { index: j, value: a });
        }
        if a > 0.0 {
            axpy(*pj, x, &mut g);
        }
    }
    project_tangent(&mut g, w);
    Ok(g)
}

/// Removes the component of `v` along the unit vector `w`.
pub fn project_tangent(v: &mut [f64], w: &[f64]) {
    let c = dot(v, w);
    axpy(-c, w, v);
}

/// `K(w)`: row `i` is `(K delta_{w_i})^T`, stored with the activation
/// pattern `Pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationMatrix {
    pub entries: Matrix,
    pub pattern: Vec<Vec<u8>>,
    /// `(atom, data index)` pairs whose activation lies within
    /// [`ACTIVE_TOL`] of zero.
    pub flagged: Vec<(usize, usize)>,
}

impl EvaluationMatrix {
    pub fn has_boundary_entries(&self) -> bool {
        !self.flagged.is_empty()
    }
}

pub fn evaluation_matrix(locations: &[UnitVector], instance: &ProblemInstance) -> EvaluationMatrix {
    let n = instance.n();
    let mut entries = Matrix::zeros(locations.len(), n);
    let mut pattern = vec![vec![0u8; n]; locations.len()];
    let mut flagged = Vec::new();
    for (i, w) in locations.iter().enumerate() {
        for (j, x) in instance.points().iter().enumerate() {
            let a = dot(w, x);
            if a > ACTIVE_TOL {
                pattern[i][j] = 1;
                entries[(i, j)] = a;
            } else if a > -ACTIVE_TOL {
                flagged.push((i, j));
            }
        }
    }
    EvaluationMatrix {
        entries,
        pattern,
        flagged,
    }
}

/// Blocks `grad_{S^{d-1}} ReLU<w_i, x^j>` of `K'(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMatrix {
    /// `blocks[i][j]` is a tangent vector at `w_i`.
    pub blocks: Vec<Vec<Vec<f64>>>,
}

impl DerivativeMatrix {
    /// The `N(d-1) x n` real matrix obtained by expressing every block in the
    /// given orthonormal tangent basis of its atom (`bases[i]` has `d-1`
    /// vectors).
    pub fn in_tangent_coordinates(&self, bases: &[Vec<Vec<f64>>]) -> Matrix {
        let n = self.blocks.first().map_or(0, Vec::len);
        let rows: usize = bases.iter().map(Vec::len).sum();
        let mut m = Matrix::zeros(rows, n);
        let mut r = 0;
        for (blocks, basis) in self.blocks.iter().zip(bases) {
            for t in basis {
                for (j, b) in blocks.iter().enumerate() {
                    m[(r, j)] = dot(t, b);
                }
                r += 1;
            }
        }
        m
    }
}

/// Builds `K'(w)`. Every atom must keep an angular margin above
/// [`INTERIOR_MARGIN`] from every hyperplane.
pub fn derivative_matrix(locations: &[UnitVector], instance: &ProblemInstance) -> Result<DerivativeMatrix> {
    let mut blocks = Vec::with_capacity(locations.len());
    for (i, w) in locations.iter().enumerate() {
        let (j, margin) = min_margin(w, instance);
        if margin <= INTERIOR_MARGIN {
            return Err(Error::StratumBoundary {
                atom: i,
                hyperplane: j,
                margin,
            });
        }
        let row = instance
            .points()
            .iter()
            .map(|x| {
                let a = dot(w, x);
                if a > 0.0 {
                    let mut g = x.clone();
                    axpy(-a, w, &mut g);
                    g
                } else {
                    vec![0.0; w.dim()]
                }
            })
            .collect();
        blocks.push(row);
    }
    Ok(DerivativeMatrix { blocks })
}
