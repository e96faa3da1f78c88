//! Support refinement after the particle phase.
//!
//! With the support size and every atom's activation pattern fixed, the
//! objective is smooth in `(c_i, w_i)`, so Newton's method converges
//! quadratically. Steps that would carry an atom across a hyperplane are
//! truncated there and the atom is pinned to the hyperplane; a pinned atom is
//! released again when a one-sided directional derivative shows descent off
//! it. Coefficients reaching zero remove their atom.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{
    angular_distance, flat_from_normals, normalize, tangent_basis_in_flat, Atom, ProblemInstance, SparseMeasure,
};
use crate::linalg::{axpy, dot, is_positive_definite, norm, solve, Matrix};

use super::measure_objective;

/// Same-sign atoms whose activation patterns never disagree strictly are
/// replaced by a single atom at `normalize(sum |c_i| w_i)`. On the shared
/// closed region `K` is linear, so the data term is unchanged while the TV
/// norm can only decrease.
pub fn consolidate_regions(measure: &SparseMeasure, instance: &ProblemInstance) -> SparseMeasure {
    let coefficients = measure.coefficients();
    let groups = region_groups(
        measure.atoms.iter().map(|a| a.location.as_slice()),
        &coefficients,
        instance,
    );
    let atoms = groups
        .into_iter()
        .filter_map(|members| {
            let sign = coefficients[members[0]].signum();
            let mut v = vec![0.0; instance.dim()];
            for &i in &members {
                axpy(coefficients[i].abs(), &measure.atoms[i].location, &mut v);
            }
            let len = norm(&v);
            normalize(&v).ok().map(|location| Atom {
                coefficient: sign * len,
                location,
            })
        })
        .collect();
    SparseMeasure::new(atoms)
}

/// Partition of the nonzero atoms into groups that share a coefficient sign
/// and a closed activation region, in order of first appearance.
pub(crate) fn region_groups<'a>(
    locations: impl Iterator<Item = &'a [f64]>,
    coefficients: &[f64],
    instance: &ProblemInstance,
) -> Vec<Vec<usize>> {
    const ZERO: f64 = 1e-12;
    let n = instance.n();
    let norms: Vec<f64> = instance.points().iter().map(|x| norm(x)).collect();
    // (sign, members, pattern with 0 for "on the hyperplane")
    let mut groups: Vec<(f64, Vec<usize>, Vec<i8>)> = Vec::new();
    for (i, w) in locations.enumerate() {
        let c = coefficients[i];
        if c == 0.0 {
            continue;
        }
        let sign = c.signum();
        let pattern: Vec<i8> = instance
            .points()
            .iter()
            .zip(&norms)
            .map(|(x, nx)| {
                let a = dot(w, x) / norm(w);
                if a > ZERO * nx {
                    1
                } else if a < -ZERO * nx {
                    -1
                } else {
                    0
                }
            })
            .collect();
        let slot = groups.iter_mut().find(|(s, _, p)| {
            *s == sign && (0..n).all(|j| p[j] == 0 || pattern[j] == 0 || p[j] == pattern[j])
        });
        match slot {
            Some((_, members, p)) => {
                members.push(i);
                for j in 0..n {
                    if p[j] == 0 {
                        p[j] = pattern[j];
                    }
                }
            }
            None => groups.push((sign, vec![i], pattern)),
        }
    }
    groups.into_iter().map(|(_, members, _)| members).collect()
}

struct RAtom {
    c: f64,
    w: Vec<f64>,
    /// Hyperplanes the atom is pinned to.
    pinned: Vec<usize>,
    /// Side `+1`/`-1` of each data point's hyperplane, `0` when pinned.
    side: Vec<i8>,
}

impl RAtom {
    fn tangent(&self, instance: &ProblemInstance, pinned: &[usize]) -> Vec<Vec<f64>> {
        let normals: Vec<Vec<f64>> = pinned.iter().map(|&j| instance.point(j).to_vec()).collect();
        match flat_from_normals(&normals, instance.dim()) {
            Ok(flat) => tangent_basis_in_flat(&self.w, &flat),
            Err(_) => Vec::new(),
        }
    }

    fn pin(&mut self, j: usize, instance: &ProblemInstance) {
        if !self.pinned.contains(&j) {
            self.pinned.push(j);
            self.pinned.sort_unstable();
        }
        self.side[j] = 0;
        let normals: Vec<Vec<f64>> = self.pinned.iter().map(|&k| instance.point(k).to_vec()).collect();
        if let Ok(flat) = flat_from_normals(&normals, instance.dim()) {
            if let Ok(w) = normalize(&flat.project(&self.w)) {
                self.w = w.into_inner();
            }
        }
    }
}

pub(crate) struct RefineOutcome {
    pub measure: SparseMeasure,
    pub objective: f64,
}

fn to_measure(atoms: &[RAtom]) -> SparseMeasure {
    SparseMeasure::new(
        atoms
            .iter()
            .map(|a| Atom {
                coefficient: a.c,
                location: crate::geometry::UnitVector::from_normalized(a.w.clone()),
            })
            .collect(),
    )
}

/// Residual `r = K mu - y` under the atoms' recorded sides.
fn model_residual(atoms: &[RAtom], instance: &ProblemInstance) -> Vec<f64> {
    let mut r: Vec<f64> = instance.target().iter().map(|y| -y).collect();
    for a in atoms {
        for (j, x) in instance.points().iter().enumerate() {
            if a.side[j] > 0 {
                r[j] += a.c * dot(&a.w, x);
            }
        }
    }
    r
}

/// Newton refinement of the support of `measure`; `merge_radius` controls
/// when two atoms pinned to the same point are fused.
pub(crate) fn newton_refine(measure: &SparseMeasure, instance: &ProblemInstance, merge_radius: f64) -> RefineOutcome {
    let n = instance.n();
    let lambda = instance.effective_lambda();
    let scale = instance.target().iter().fold(1.0_f64, |m, y| m.max(y.abs()));
    let gtol = 1e-13 * scale;
    let mut atoms: Vec<RAtom> = measure
        .atoms
        .iter()
        .map(|a| {
            let mut at = RAtom {
                c: a.coefficient,
                w: a.location.as_slice().to_vec(),
                pinned: Vec::new(),
                side: vec![0; n],
            };
            for (j, x) in instance.points().iter().enumerate() {
                let v = dot(&at.w, x);
                if v.abs() <= 1e-14 * norm(x) {
                    at.pin(j, instance);
                } else {
                    at.side[j] = if v > 0.0 { 1 } else { -1 };
                }
            }
            at
        })
        .collect();

    let mut current = measure_objective(&to_measure(&atoms), instance);
    for _ in 0..200 {
        if atoms.is_empty() {
            break;
        }
        let bases: Vec<Vec<Vec<f64>>> = atoms.iter().map(|a| a.tangent(instance, &a.pinned)).collect();
        let (grad, hess) = derivatives(&atoms, &bases, instance, lambda);
        let gmax = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));

        let mut moved = false;
        if gmax > gtol {
            let dir = newton_direction(&grad, &hess);
            moved = step(&mut atoms, &bases, &dir, &grad, instance, &mut current);
            if !moved {
                let steepest: Vec<f64> = grad.iter().map(|g| -g).collect();
                moved = step(&mut atoms, &bases, &steepest, &grad, instance, &mut current);
            }
        }
        if !moved && !release(&mut atoms, instance, &mut current) {
            break;
        }
        fuse(&mut atoms, instance, merge_radius);
        current = measure_objective(&to_measure(&atoms), instance);
    }
    let measure = to_measure(&atoms);
    RefineOutcome {
        objective: measure_objective(&measure, instance),
        measure,
    }
}

/// Gradient and Hessian of the smooth model in the variables
/// `(c_i, t_i)`, where `w_i(t) = normalize(w_i + Q_i t)`.
fn derivatives(
    atoms: &[RAtom],
    bases: &[Vec<Vec<f64>>],
    instance: &ProblemInstance,
    lambda: f64,
) -> (Vec<f64>, Matrix) {
    let n = instance.n();
    let r = model_residual(atoms, instance);
    let offsets: Vec<usize> = bases
        .iter()
        .scan(0, |o, b| {
            let cur = *o;
            *o += 1 + b.len();
            Some(cur)
        })
        .collect();
    let size = bases.iter().map(|b| 1 + b.len()).sum();
    // Jacobian of r, one column per variable.
    let mut jac = vec![vec![0.0; n]; size];
    let mut grad = vec![0.0; size];
    let mut hess = Matrix::zeros(size, size);
    for (i, a) in atoms.iter().enumerate() {
        let o = offsets[i];
        let q = &bases[i];
        let mut g_extra = vec![0.0; q.len()];
        let mut curv = 0.0;
        for (j, x) in instance.points().iter().enumerate() {
            if a.side[j] <= 0 {
                continue;
            }
            let act = dot(&a.w, x);
            jac[o][j] = act;
            for (k, qk) in q.iter().enumerate() {
                let qx = dot(qk, x);
                jac[o + 1 + k][j] = a.c * qx;
                g_extra[k] += r[j] * qx;
            }
            curv += r[j] * act;
        }
        grad[o] = dot(&jac[o], &r) + lambda * a.c.signum();
        for k in 0..q.len() {
            grad[o + 1 + k] = dot(&jac[o + 1 + k], &r);
            hess[(o, o + 1 + k)] += g_extra[k];
            hess[(o + 1 + k, o)] += g_extra[k];
            hess[(o + 1 + k, o + 1 + k)] -= a.c * curv;
        }
    }
    for a in 0..size {
        for b in a..size {
            let v = dot(&jac[a], &jac[b]);
            hess[(a, b)] += v;
            if a != b {
                hess[(b, a)] += v;
            }
        }
    }
    (grad, hess)
}

/// Solves `(H + mu I) delta = -g` with the smallest `mu` (from a doubling
/// sequence) that makes the system positive definite.
fn newton_direction(grad: &[f64], hess: &Matrix) -> Vec<f64> {
    let size = grad.len();
    let diag_scale = (0..size).map(|i| hess[(i, i)].abs()).fold(0.0_f64, f64::max).max(1e-300);
    let mut mu = 0.0;
    let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
    for _ in 0..80 {
        let mut m = hess.clone();
        for i in 0..size {
            m[(i, i)] += mu;
        }
        if is_positive_definite(&m) {
            if let Some(d) = solve(&m, &rhs) {
                return d;
            }
        }
        mu = if mu == 0.0 { 1e-12 * diag_scale } else { mu * 4.0 };
    }
    rhs
}

enum Event {
    Cross { atom: usize, plane: usize },
    Vanish { atom: usize },
}

fn apply(atoms: &[RAtom], bases: &[Vec<Vec<f64>>], dir: &[f64], alpha: f64) -> Vec<RAtom> {
    let mut o = 0;
    atoms
        .iter()
        .zip(bases)
        .map(|(a, q)| {
            let c = a.c + alpha * dir[o];
            let mut w = a.w.clone();
            for (k, qk) in q.iter().enumerate() {
                axpy(alpha * dir[o + 1 + k], qk, &mut w);
            }
            o += 1 + q.len();
            let w = normalize(&w).map(|u| u.into_inner()).unwrap_or_else(|_| a.w.clone());
            RAtom {
                c,
                w,
                pinned: a.pinned.clone(),
                side: a.side.clone(),
            }
        })
        .collect()
}

/// Truncated backtracking step along `dir`. Returns whether the objective
/// decreased.
fn step(
    atoms: &mut Vec<RAtom>,
    bases: &[Vec<Vec<f64>>],
    dir: &[f64],
    grad: &[f64],
    instance: &ProblemInstance,
    current: &mut f64,
) -> bool {
    let slope = dot(grad, dir);
    if !(slope < 0.0) {
        return false;
    }
    // Largest step before a sign change of an activation or coefficient. The
    // sign of <normalize(w + Q t), x> is that of <w + Q t, x>, linear in t.
    let mut alpha_max = 1.0;
    let mut event: Option<Event> = None;
    let mut o = 0;
    for (i, (a, q)) in atoms.iter().zip(bases).enumerate() {
        let dc = dir[o];
        if a.c * dc < 0.0 {
            let t = -a.c / dc;
            if t < alpha_max {
                alpha_max = t;
                event = Some(Event::Vanish { atom: i });
            }
        }
        let mut move_dir = vec![0.0; a.w.len()];
        for (k, qk) in q.iter().enumerate() {
            axpy(dir[o + 1 + k], qk, &mut move_dir);
        }
        for (j, x) in instance.points().iter().enumerate() {
            if a.side[j] == 0 {
                continue;
            }
            let v = dot(&a.w, x);
            let b = dot(&move_dir, x);
            if v * b < 0.0 {
                let t = -v / b;
                if t < alpha_max {
                    alpha_max = t;
                    event = Some(Event::Cross { atom: i, plane: j });
                }
            }
        }
        o += 1 + q.len();
    }

    let mut alpha = alpha_max;
    for attempt in 0..60 {
        let trial = apply(atoms, bases, dir, alpha);
        let value = measure_objective(&to_measure(&trial), instance);
        let armijo = *current + 1e-4 * alpha * slope;
        if value <= armijo || (value < *current && attempt > 0) {
            *atoms = trial;
            if attempt == 0 {
                match event {
                    Some(Event::Cross { atom, plane }) => atoms[atom].pin(plane, instance),
                    Some(Event::Vanish { atom }) => {
                        atoms.remove(atom);
                    }
                    None => {}
                }
            }
            resync_sides(atoms, instance);
            *current = measure_objective(&to_measure(atoms), instance);
            return true;
        }
        alpha *= 0.5;
        if alpha < 1e-16 {
            break;
        }
    }
    false
}

/// Pins any activation whose sign drifted against the recorded side (only
/// possible through rounding at the end of a truncated step).
fn resync_sides(atoms: &mut [RAtom], instance: &ProblemInstance) {
    for a in atoms.iter_mut() {
        for (j, x) in instance.points().iter().enumerate() {
            let s = a.side[j];
            if s != 0 && f64::from(s) * dot(&a.w, x) <= 0.0 {
                a.pin(j, instance);
            }
        }
    }
}

/// Frees one pinned hyperplane when moving off it to one side decreases the
/// objective; takes a steepest-descent step into that side.
fn release(atoms: &mut [RAtom], instance: &ProblemInstance, current: &mut f64) -> bool {
    let r = model_residual(atoms, instance);
    let mut best: Option<(usize, usize, i8, Vec<f64>, f64)> = None;
    for (i, a) in atoms.iter().enumerate() {
        for &j in &a.pinned {
            let rest: Vec<usize> = a.pinned.iter().copied().filter(|&k| k != j).collect();
            let q = a.tangent(instance, &rest);
            if q.is_empty() {
                continue;
            }
            for s in [1i8, -1] {
                // Gradient in the freed directions with j on side s.
                let mut g = vec![0.0; a.w.len()];
                for (k, x) in instance.points().iter().enumerate() {
                    let active = if k == j { s > 0 } else { a.side[k] > 0 };
                    if active {
                        axpy(a.c * r[k], x, &mut g);
                    }
                }
                let mut v = vec![0.0; a.w.len()];
                for qk in &q {
                    axpy(-dot(&g, qk), qk, &mut v);
                }
                let rate = dot(&v, &v);
                if f64::from(s) * dot(&v, instance.point(j)) > 1e-14 * norm(&v) * norm(instance.point(j))
                    && rate > 1e-24
                    && best.as_ref().is_none_or(|b| rate > b.4)
                {
                    best = Some((i, j, s, v, rate));
                }
            }
        }
    }
    let Some((i, j, s, v, _)) = best else {
        return false;
    };
    let saved_w = atoms[i].w.clone();
    let saved_pinned = atoms[i].pinned.clone();
    atoms[i].pinned.retain(|&k| k != j);
    atoms[i].side[j] = s;
    let mut alpha = 1.0;
    for _ in 0..80 {
        let mut w = saved_w.clone();
        axpy(alpha, &v, &mut w);
        if let Ok(w) = normalize(&w) {
            let ok = instance.points().iter().enumerate().all(|(k, x)| {
                let sk = atoms[i].side[k];
                sk == 0 || f64::from(sk) * dot(&w, x) > 0.0
            });
            if ok {
                let old = core::mem::replace(&mut atoms[i].w, w.into_inner());
                let value = measure_objective(&to_measure(atoms), instance);
                if value < *current {
                    *current = value;
                    return true;
                }
                atoms[i].w = old;
            }
        }
        alpha *= 0.5;
    }
    atoms[i].w = saved_w;
    atoms[i].pinned = saved_pinned;
    atoms[i].side[j] = 0;
    false
}

/// Fuses atoms at (numerically) the same location.
fn fuse(atoms: &mut Vec<RAtom>, instance: &ProblemInstance, merge_radius: f64) {
    let radius = merge_radius.min(1e-9);
    let mut i = 0;
    while i < atoms.len() {
        let mut k = i + 1;
        while k < atoms.len() {
            if angular_distance(&atoms[i].w, &atoms[k].w) <= radius {
                let other = atoms.remove(k);
                atoms[i].c += other.c;
                for j in other.pinned {
                    atoms[i].pin(j, instance);
                }
            } else {
                k += 1;
            }
        }
        if atoms[i].c == 0.0 {
            atoms.remove(i);
        } else {
            i += 1;
        }
    }
}
