//! ADAM on the particle parameters `(c_i, u_i)` with periodic pruning.

use alloc::vec;
use alloc::vec::Vec;

use super::{Particles, SolverConfig};
use crate::geometry::ProblemInstance;

/// One pruning pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneEvent {
    pub iteration: usize,
    pub removed: usize,
    /// Sum of `|c_i|` over the removed particles.
    pub removed_mass: f64,
    pub objective_before: f64,
    pub objective_after: f64,
    /// Upper bound on `objective_after - objective_before` from the removed
    /// mass, the residual before pruning and the data norms.
    pub bound: f64,
}

pub(crate) struct Schedule {
    pub iters: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub prune_every: Option<usize>,
    pub prune_threshold: f64,
}

impl Schedule {
    pub fn main(c: &SolverConfig) -> Self {
        Self {
            iters: c.max_iters,
            lr_start: c.step_size,
            lr_end: c.step_size,
            beta1: c.adam_beta1,
            beta2: c.adam_beta2,
            eps: c.adam_eps,
            prune_every: Some(c.prune_every),
            prune_threshold: c.prune_threshold,
        }
    }

    pub fn polish(c: &SolverConfig) -> Self {
        Self {
            iters: c.polish_iters,
            lr_end: c.step_size * 1e-3,
            prune_every: None,
            ..Self::main(c)
        }
    }

    fn lr(&self, iter: usize) -> f64 {
        if self.iters <= 1 || self.lr_start == self.lr_end {
            return self.lr_start;
        }
        let t = iter as f64 / (self.iters - 1) as f64;
        self.lr_start * libm::pow(self.lr_end / self.lr_start, t)
    }
}

pub(crate) struct RunStats {
    pub iterations: usize,
    pub initial_objective: f64,
    pub history: Vec<(usize, usize)>,
    pub prune_events: Vec<PruneEvent>,
}

/// Residual workspace shared by the objective and the gradient.
struct Eval {
    /// `<w_i, x^j>`, row-major `m x n`.
    act: Vec<f64>,
    norms: Vec<f64>,
    r: Vec<f64>,
}

fn evaluate(p: &Particles, points: &[f64], target: &[f64], eval: &mut Eval) {
    let d = p.dim;
    let n = target.len();
    let m = p.len();
    eval.act.resize(m * n, 0.0);
    eval.norms.resize(m, 0.0);
    eval.r.clear();
    eval.r.extend(target.iter().map(|y| -y));
    for i in 0..m {
        let u = &p.u[i * d..(i + 1) * d];
        let nu = libm::sqrt(u.iter().map(|v| v * v).sum::<f64>());
        eval.norms[i] = nu;
        let ci = p.c[i];
        for j in 0..n {
            let x = &points[j * d..(j + 1) * d];
            let a = u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / nu;
            eval.act[i * n + j] = a;
            if a > 0.0 {
                eval.r[j] += ci * a;
            }
        }
    }
}

fn objective_from(p: &Particles, r: &[f64], weight: f64, lambda: f64) -> f64 {
    let tv: f64 = p.c.iter().map(|v| v.abs()).sum();
    weight * (0.5 * r.iter().map(|v| v * v).sum::<f64>() + lambda * tv)
}

struct Moments {
    mc: Vec<f64>,
    vc: Vec<f64>,
    mu: Vec<f64>,
    vu: Vec<f64>,
}

/// Runs the schedule in place. Pruning removes particles with
/// `|c_i| < prune_threshold`.
pub(crate) fn run(p: &mut Particles, instance: &ProblemInstance, s: &Schedule) -> RunStats {
    let d = p.dim;
    let n = instance.n();
    let points: Vec<f64> = instance.points().iter().flatten().copied().collect();
    let target = instance.target();
    let weight = instance.loss_weight();
    let lambda = instance.effective_lambda();
    let norms_x: Vec<f64> = instance.points().iter().map(|x| crate::linalg::norm(x)).collect();

    let mut eval = Eval {
        act: Vec::new(),
        norms: Vec::new(),
        r: Vec::new(),
    };
    let mut mom = Moments {
        mc: vec![0.0; p.len()],
        vc: vec![0.0; p.len()],
        mu: vec![0.0; p.u.len()],
        vu: vec![0.0; p.u.len()],
    };
    evaluate(p, &points, &target, &mut eval);
    let initial_objective = objective_from(p, &eval.r, weight, lambda);
    let mut history = Vec::new();
    let mut prune_events = Vec::new();
    let mut b1t = 1.0;
    let mut b2t = 1.0;
    let mut g = vec![0.0; d];

    for iter in 0..s.iters {
        if iter > 0 {
            evaluate(p, &points, &target, &mut eval);
        }
        let lr = s.lr(iter);
        b1t *= s.beta1;
        b2t *= s.beta2;
        let m = p.len();
        for i in 0..m {
            let ci = p.c[i];
            let row = &eval.act[i * n..(i + 1) * n];
            g.iter_mut().for_each(|v| *v = 0.0);
            let mut fit = 0.0;
            for j in 0..n {
                let a = row[j];
                if a > 0.0 {
                    let rj = eval.r[j];
                    fit += rj * a;
                    let x = &points[j * d..(j + 1) * d];
                    for (gk, xk) in g.iter_mut().zip(x) {
                        *gk += rj * xk;
                    }
                }
            }
            let sign = if ci > 0.0 {
                1.0
            } else if ci < 0.0 {
                -1.0
            } else {
                0.0
            };
            let gc = weight * (fit + lambda * sign);

            // Tangential projection and the chain rule through u / |u|.
            let u = &mut p.u[i * d..(i + 1) * d];
            let nu = eval.norms[i];
            let gw: f64 = g.iter().zip(u.iter()).map(|(a, b)| a * b).sum::<f64>() / nu;
            let scale = weight * ci / nu;

            let mc = &mut mom.mc[i];
            let vc = &mut mom.vc[i];
            *mc = s.beta1 * *mc + (1.0 - s.beta1) * gc;
            *vc = s.beta2 * *vc + (1.0 - s.beta2) * gc * gc;
            p.c[i] -= lr * (*mc / (1.0 - b1t)) / (libm::sqrt(*vc / (1.0 - b2t)) + s.eps);

            for k in 0..d {
                let gu = scale * (g[k] - gw * u[k] / nu);
                let mu = &mut mom.mu[i * d + k];
                let vu = &mut mom.vu[i * d + k];
                *mu = s.beta1 * *mu + (1.0 - s.beta1) * gu;
                *vu = s.beta2 * *vu + (1.0 - s.beta2) * gu * gu;
                u[k] -= lr * (*mu / (1.0 - b1t)) / (libm::sqrt(*vu / (1.0 - b2t)) + s.eps);
            }
        }

        let done = iter + 1;
        if let Some(every) = s.prune_every {
            if done % every == 0 {
                evaluate(p, &points, &target, &mut eval);
                let before = objective_from(p, &eval.r, weight, lambda);
                let lin: f64 = eval.r.iter().zip(&norms_x).map(|(r, x)| r.abs() * x).sum();
                consolidate(p, &mut mom, instance);
                let keep: Vec<bool> = p.c.iter().map(|c| c.abs() >= s.prune_threshold).collect();
                let removed = keep.iter().filter(|k| !**k).count();
                if removed > 0 {
                    let removed_mass: f64 = p
                        .c
                        .iter()
                        .zip(&keep)
                        .filter(|(_, k)| !**k)
                        .map(|(c, _)| c.abs())
                        .sum();
                    // Consolidation leaves K mu unchanged. The removed particles
                    // then change it by delta with |delta_j| <= removed_mass |x^j|;
                    // the data term grows by -<r, delta> + |delta|^2 / 2 and the
                    // TV term shrinks.
                    retain(p, &mut mom, &keep);
                    evaluate(p, &points, &target, &mut eval);
                    let after = objective_from(p, &eval.r, weight, lambda);
                    let quad: f64 = norms_x.iter().map(|x| (removed_mass * x) * (removed_mass * x)).sum();
                    let bound = weight * (removed_mass * lin + 0.5 * quad);
                    prune_events.push(PruneEvent {
                        iteration: done,
                        removed,
                        removed_mass,
                        objective_before: before,
                        objective_after: after,
                        bound,
                    });
                }
                history.push((done, p.len()));
            }
        }
    }
    RunStats {
        iterations: s.iters,
        initial_objective,
        history,
        prune_events,
    }
}

/// Replaces every group of same-sign particles sharing a closed activation
/// region by one particle (see [`super::consolidate_regions`]). Untouched
/// particles keep their moments; merged ones restart from zero.
fn consolidate(p: &mut Particles, mom: &mut Moments, instance: &ProblemInstance) {
    let d = p.dim;
    let groups = super::refine::region_groups(p.u.chunks(d), &p.c, instance);
    if groups.iter().all(|g| g.len() == 1) && groups.len() == p.len() {
        return;
    }
    let mut c = Vec::with_capacity(groups.len());
    let mut u = Vec::with_capacity(groups.len() * d);
    let mut next = Moments {
        mc: Vec::with_capacity(groups.len()),
        vc: Vec::with_capacity(groups.len()),
        mu: Vec::with_capacity(groups.len() * d),
        vu: Vec::with_capacity(groups.len() * d),
    };
    for members in groups {
        if let [i] = members[..] {
            c.push(p.c[i]);
            u.extend_from_slice(&p.u[i * d..(i + 1) * d]);
            next.mc.push(mom.mc[i]);
            next.vc.push(mom.vc[i]);
            next.mu.extend_from_slice(&mom.mu[i * d..(i + 1) * d]);
            next.vu.extend_from_slice(&mom.vu[i * d..(i + 1) * d]);
            continue;
        }
        let mut v = vec![0.0; d];
        let mut radius = 0.0;
        for &i in &members {
            let row = &p.u[i * d..(i + 1) * d];
            let nr = crate::linalg::norm(row);
            radius += nr;
            for (vk, rk) in v.iter_mut().zip(row) {
                *vk += p.c[i].abs() * rk / nr;
            }
        }
        radius /= members.len() as f64;
        let len = crate::linalg::norm(&v);
        if len == 0.0 {
            continue;
        }
        c.push(p.c[members[0]].signum() * len);
        u.extend(v.iter().map(|vk| vk / len * radius));
        next.mc.push(0.0);
        next.vc.push(0.0);
        next.mu.extend(core::iter::repeat_n(0.0, d));
        next.vu.extend(core::iter::repeat_n(0.0, d));
    }
    p.c = c;
    p.u = u;
    *mom = next;
}

fn retain(p: &mut Particles, mom: &mut Moments, keep: &[bool]) {
    let d = p.dim;
    let mut w = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            p.c[w] = p.c[i];
            mom.mc[w] = mom.mc[i];
            mom.vc[w] = mom.vc[i];
            for l in 0..d {
                p.u[w * d + l] = p.u[i * d + l];
                mom.mu[w * d + l] = mom.mu[i * d + l];
                mom.vu[w * d + l] = mom.vu[i * d + l];
            }
            w += 1;
        }
    }
    p.c.truncate(w);
    p.u.truncate(w * d);
    mom.mc.truncate(w);
    mom.vc.truncate(w);
    mom.mu.truncate(w * d);
    mom.vu.truncate(w * d);
}

/// Removes particles with `|c_i| < threshold`.
pub(crate) fn prune(p: &mut Particles, threshold: f64) {
    let d = p.dim;
    let keep: Vec<bool> = p.c.iter().map(|c| c.abs() >= threshold).collect();
    let mut w = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            p.c[w] = p.c[i];
            for l in 0..d {
                p.u[w * d + l] = p.u[i * d + l];
            }
            w += 1;
        }
    }
    p.c.truncate(w);
    p.u.truncate(w * d);
}
