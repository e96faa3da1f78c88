//! Particle solver for the TV-regularized least-squares problem: many
//! weighted Diracs `c_i delta_{u_i / |u_i|}` trained with ADAM and pruned,
//! then merged, polished and refined on the surviving support before the
//! dual certificate is extracted and checked.

mod adam;
mod refine;
mod sweep;

use alloc::vec;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use adam::PruneEvent;
pub use refine::consolidate_regions;
pub use sweep::{
    fit_rows, lambda_max, match_atoms, min_norm_certificate_approx, noise_direction, seed_for, stability_baseline,
    stability_level, stability_sweep, sweep_lambda,
    ContinuationReport, LinearFit, StabilityReport, StabilityRow, SweepRow,
};

use crate::arrangement::{enumerate_strata, Stratum};
use crate::certificate::{dual_from_primal, sup_abs, DualCertificate};
use crate::error::{Error, Result};
use crate::geometry::{normalize, random_unit_vector, Atom, ProblemInstance, SparseMeasure};
use crate::linalg::dot;
use crate::operators::relu;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of particles at initialization.
    pub particles: usize,
    /// ADAM learning rate.
    pub step_size: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub max_iters: usize,
    pub prune_every: usize,
    pub prune_threshold: f64,
    /// Angular radius below which surviving atoms are merged.
    pub merge_radius: f64,
    pub seed: u64,
    pub cert_tolerance: f64,
    /// ADAM iterations on the merged support, with the learning rate decayed
    /// geometrically by `1e-3` over the run.
    pub polish_iters: usize,
    /// Active-set Newton refinement of the final support.
    pub refine: bool,
    /// Norm of the raw particle vectors `u_i` at initialization.
    pub init_radius: f64,
    /// Rounds of atom insertion at the maximizer of `|eta|` followed by
    /// refinement, applied while the certificate check fails. Requires
    /// `refine`.
    pub exchange_rounds: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            particles: 2000,
            step_size: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            max_iters: 20000,
            prune_every: 200,
            prune_threshold: 1e-2,
            merge_radius: 1e-3,
            seed: 0,
            cert_tolerance: 1e-2,
            polish_iters: 500,
            refine: true,
            init_radius: 1.0,
            exchange_rounds: 20,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_size", self.step_size),
            ("adam_eps", self.adam_eps),
            ("prune_threshold", self.prune_threshold),
            ("merge_radius", self.merge_radius),
            ("cert_tolerance", self.cert_tolerance),
            ("init_radius", self.init_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) || v == 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.particles == 0 {
            return Err(Error::InvalidConfig("particles must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if self.prune_every == 0 || self.prune_every > self.max_iters {
            return Err(Error::InvalidConfig(format!(
                "prune_every must lie in 1..={}, got {}",
                self.max_iters, self.prune_every
            )));
        }
        Ok(())
    }
}

/// Raw particle state `(c_i, u_i)`; `u` is stored row-major, `d` entries per
/// particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Particles {
    pub dim: usize,
    pub c: Vec<f64>,
    pub u: Vec<f64>,
}

impl Particles {
    /// `m` particles with `u_i` uniform on the sphere of radius `radius` and
    /// `c_i` uniform in `(-0.1, 0.1)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, m: usize, d: usize, radius: f64) -> Self {
        let mut c = Vec::with_capacity(m);
        let mut u = Vec::with_capacity(m * d);
        for _ in 0..m {
            u.extend(random_unit_vector(rng, d).iter().map(|v| v * radius));
            c.push(rng.random_range(-0.1..0.1));
        }
        Self { dim: d, c, u }
    }

    pub fn from_measure(measure: &SparseMeasure, d: usize) -> Self {
        let mut c = Vec::with_capacity(measure.len());
        let mut u = Vec::with_capacity(measure.len() * d);
        for a in &measure.atoms {
            c.push(a.coefficient);
            u.extend_from_slice(&a.location);
        }
        Self { dim: d, c, u }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn u_row(&self, i: usize) -> &[f64] {
        &self.u[i * self.dim..(i + 1) * self.dim]
    }

    /// The measure `sum c_i delta_{u_i/|u_i|}`.
    pub fn to_measure(&self) -> Result<SparseMeasure> {
        let atoms = (0..self.len())
            .map(|i| {
                Ok(Atom {
                    coefficient: self.c[i],
                    location: normalize(self.u_row(i))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SparseMeasure::new(atoms))
    }

    /// Appends `other`'s particles.
    pub fn extend(&mut self, other: &Particles) {
        assert_eq!(self.dim, other.dim);
        self.c.extend_from_slice(&other.c);
        self.u.extend_from_slice(&other.u);
    }
}

fn check_particles(c: &[f64], u: &[Vec<f64>], instance: &ProblemInstance) -> Result<()> {
    if c.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            found: u.len(),
        });
    }
    for ui in u {
        if ui.len() != instance.dim() {
            return Err(Error::DimensionMismatch {
                expected: instance.dim(),
                found: ui.len(),
            });
        }
    }
    Ok(())
}

/// `1/2 sum_j (sum_i c_i ReLU<u_i/|u_i|, x^j> - y_j)^2 + lambda sum_i |c_i|`,
/// scaled by the instance's loss convention.
pub fn objective(c: &[f64], u: &[Vec<f64>], instance: &ProblemInstance) -> Result<f64> {
    check_particles(c, u, instance)?;
    let w: Vec<_> = u.iter().map(|ui| normalize(ui)).collect::<Result<_>>()?;
    let mut r: Vec<f64> = instance.target().iter().map(|y| -y).collect();
    for (ci, wi) in c.iter().zip(&w) {
        for (rj, x) in r.iter_mut().zip(instance.points()) {
            *rj += ci * relu(dot(wi, x));
        }
    }
    let tv: f64 = c.iter().map(|v| v.abs()).sum();
    Ok(instance.loss_weight() * (0.5 * dot(&r, &r) + instance.effective_lambda() * tv))
}

/// Gradient of [`objective`] with respect to `c` and the raw vectors `u`.
/// `sign(0) = 0` for the TV term and `ReLU'(0) = 0`.
pub fn gradient(c: &[f64], u: &[Vec<f64>], instance: &ProblemInstance) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_particles(c, u, instance)?;
    let w: Vec<_> = u.iter().map(|ui| normalize(ui)).collect::<Result<_>>()?;
    let mut r: Vec<f64> = instance.target().iter().map(|y| -y).collect();
    for (ci, wi) in c.iter().zip(&w) {
        for (rj, x) in r.iter_mut().zip(instance.points()) {
            *rj += ci * relu(dot(wi, x));
        }
    }
    let s = instance.loss_weight();
    let lambda = instance.effective_lambda();
    let mut gc = Vec::with_capacity(c.len());
    let mut gu = Vec::with_capacity(c.len());
    for ((ci, wi), ui) in c.iter().zip(&w).zip(u) {
        let mut g = vec![0.0; instance.dim()];
        let mut fit = 0.0;
        for (rj, x) in r.iter().zip(instance.points()) {
            let a = dot(wi, x);
            if a > 0.0 {
                fit += rj * a;
                crate::linalg::axpy(*rj, x, &mut g);
            }
        }
        let sign = if *ci > 0.0 {
            1.0
        } else if *ci < 0.0 {
            -1.0
        } else {
            0.0
        };
        gc.push(s * (fit + lambda * sign));
        let gw = dot(&g, wi);
        crate::linalg::axpy(-gw, wi, &mut g);
        let scale = s * ci / crate::linalg::norm(ui);
        g.iter_mut().for_each(|v| *v *= scale);
        gu.push(g);
    }
    Ok((gc, gu))
}

/// Value of the objective at a sparse measure.
pub fn measure_objective(measure: &SparseMeasure, instance: &ProblemInstance) -> f64 {
    let km = crate::operators::forward(measure, instance);
    let r: Vec<f64> = km.iter().zip(instance.target()).map(|(k, y)| k - y).collect();
    instance.loss_weight() * (0.5 * dot(&r, &r) + instance.effective_lambda() * measure.tv_norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub measure: SparseMeasure,
    pub objective: f64,
    /// Objective of the initial particle configuration.
    pub initial_objective: f64,
    pub dual: DualCertificate,
    pub sup_abs_eta: f64,
    /// `|eta(w_i) - sign(c_i)|` per atom.
    pub saturation_errors: Vec<f64>,
    pub certified: bool,
    pub iterations_run: usize,
    /// `(iteration, particle count)` after every pruning pass.
    pub atom_count_history: Vec<(usize, usize)>,
    pub prune_events: Vec<PruneEvent>,
    /// Whether the Newton refinement was run and kept.
    pub refined: bool,
}

/// Solves from a fresh seeded initialization.
pub fn solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveReport> {
    solve_from(instance, config, None)
}

/// Solves from `warm` (if given) topped up with fresh random particles to
/// `config.particles`.
pub fn solve_from(
    instance: &ProblemInstance,
    config: &SolverConfig,
    warm: Option<&SparseMeasure>,
) -> Result<SolveReport> {
    config.validate()?;
    if !(instance.lambda() > 0.0) {
        return Err(Error::InvalidInstance("the particle solver needs lambda > 0".into()));
    }
    let strata = enumerate_strata(instance.points())?;
    solve_with_strata(instance, config, warm, &strata)
}

pub(crate) fn solve_with_strata(
    instance: &ProblemInstance,
    config: &SolverConfig,
    warm: Option<&SparseMeasure>,
    strata: &[Stratum],
) -> Result<SolveReport> {
    let d = instance.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut particles = match warm {
        Some(m) => Particles::from_measure(m, d),
        None => Particles::new_empty(d),
    };
    let fresh = config.particles.saturating_sub(particles.len());
    particles.extend(&Particles::random(&mut rng, fresh, d, config.init_radius));

    let main = adam::run(
        &mut particles,
        instance,
        &adam::Schedule::main(config),
    );
    let mut iterations = main.iterations;
    let mut history = main.history;
    let mut prune_events = main.prune_events;

    // Final prune, merge near-duplicates and polish the merged support.
    adam::prune(&mut particles, config.prune_threshold);
    let measure = particles.to_measure()?.merge_close(config.merge_radius);
    let measure = consolidate_regions(&measure, instance);
    let mut particles = Particles::from_measure(&measure, d);
    if config.polish_iters > 0 && !particles.is_empty() {
        let polish = adam::run(&mut particles, instance, &adam::Schedule::polish(config));
        iterations += polish.iterations;
        prune_events.extend(polish.prune_events);
    }
    adam::prune(&mut particles, config.prune_threshold);
    let measure = particles.to_measure()?.merge_close(config.merge_radius);
    let mut measure = consolidate_regions(&measure, instance);
    history.push((iterations, measure.len()));

    let mut refined = false;
    if config.refine && !measure.is_empty() {
        let before = measure_objective(&measure, instance);
        let out = refine::newton_refine(&measure, instance, config.merge_radius);
        if out.objective <= before {
            measure = out.measure;
            refined = true;
        }
        // Refinement can drive coefficients to zero.
        measure = SparseMeasure::new(
            measure
                .atoms
                .into_iter()
                .filter(|a| a.coefficient.abs() >= config.prune_threshold * 1e-6)
                .collect(),
        );
        history.push((iterations, measure.len()));
    }

    let (mut dual, mut sup, mut saturation_errors, mut certified) =
        certify(&measure, instance, strata, config.cert_tolerance)?;
    if config.refine {
        for _ in 0..config.exchange_rounds {
            if certified {
                break;
            }
            let Some(next) = exchange(&measure, &dual, instance, strata, config) else {
                break;
            };
            measure = next;
            refined = true;
            history.push((iterations, measure.len()));
            (dual, sup, saturation_errors, certified) = certify(&measure, instance, strata, config.cert_tolerance)?;
        }
    }
    Ok(SolveReport {
        objective: measure_objective(&measure, instance),
        initial_objective: main.initial_objective,
        measure,
        dual,
        sup_abs_eta: sup,
        saturation_errors,
        certified,
        iterations_run: iterations,
        atom_count_history: history,
        prune_events,
        refined,
    })
}

/// One exchange step: a new atom at the maximizer of `|eta|` with the sign
/// of `eta` there, a coefficient small enough to decrease the objective,
/// then refinement of the enlarged support. `None` when no step decreases
/// the objective.
fn exchange(
    measure: &SparseMeasure,
    dual: &DualCertificate,
    instance: &ProblemInstance,
    strata: &[Stratum],
    config: &SolverConfig,
) -> Option<SparseMeasure> {
    let (_, best) = sup_abs(dual, instance, strata);
    let best = best?;
    if best.value.abs() <= 1.0 {
        return None;
    }
    let before = measure_objective(measure, instance);
    let sign = best.value.signum();
    let mut eps = measure.atoms.iter().map(|a| a.coefficient.abs()).fold(1.0_f64, f64::max);
    for _ in 0..60 {
        let mut atoms = measure.atoms.clone();
        atoms.push(Atom {
            coefficient: sign * eps,
            location: best.location.clone(),
        });
        let trial = SparseMeasure::new(atoms);
        if measure_objective(&trial, instance) < before {
            let out = refine::newton_refine(&trial, instance, config.merge_radius);
            let next = if out.objective <= before { out.measure } else { trial };
            let next = SparseMeasure::new(
                next.atoms
                    .into_iter()
                    .filter(|a| a.coefficient.abs() >= config.prune_threshold * 1e-6)
                    .collect(),
            );
            return (measure_objective(&next, instance) < before).then_some(next);
        }
        eps *= 0.5;
    }
    None
}

impl Particles {
    fn new_empty(d: usize) -> Self {
        Self {
            dim: d,
            c: Vec::new(),
            u: Vec::new(),
        }
    }
}

/// Dual extraction and the optimality check: `sup |eta| <= 1 + tol` and
/// `|eta(w_i) - sign(c_i)| <= tol` at every atom.
pub fn certify(
    measure: &SparseMeasure,
    instance: &ProblemInstance,
    strata: &[Stratum],
    tol: f64,
) -> Result<(DualCertificate, f64, Vec<f64>, bool)> {
    let dual = dual_from_primal(measure, instance)?;
    let (sup, _) = sup_abs(&dual, instance, strata);
    let errors: Vec<f64> = measure
        .atoms
        .iter()
        .map(|a| (dual.eval(&a.location, instance) - a.coefficient.signum()).abs())
        .collect();
    let certified = sup <= 1.0 + tol && errors.iter().all(|e| *e <= tol);
    Ok((dual, sup, errors, certified))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LossConvention;

    fn small() -> ProblemInstance {
        let x = vec![vec![1.0, 0.2], vec![0.3, 1.0], vec![-0.7, 0.4], vec![0.5, -0.9]];
        ProblemInstance::new(x, vec![0.4, -0.3, 0.8, 0.1], 0.05).unwrap()
    }

    fn raw(c: &[f64], u: &[[f64; 2]]) -> (Vec<f64>, Vec<Vec<f64>>) {
        (c.to_vec(), u.iter().map(|v| v.to_vec()).collect())
    }

    #[test]
    fn objective_at_zero_coefficients_is_half_data_norm() {
        let inst = small();
        let (c, u) = raw(&[0.0, 0.0], &[[1.0, 0.0], [0.0, 1.0]]);
        let half: f64 = 0.5 * inst.target().iter().map(|y| y * y).sum::<f64>();
        assert!((objective(&c, &u, &inst).unwrap() - half).abs() < 1e-15);
    }

    #[test]
    fn objective_at_exact_interpolant_is_lambda_tv() {
        let x = vec![vec![1.0, 0.2], vec![0.3, 1.0], vec![-0.7, 0.4]];
        let w = normalize(&[0.6, 0.8]).unwrap();
        let y: Vec<f64> = x.iter().map(|xj| -1.5 * relu(dot(&w, xj))).collect();
        let inst = ProblemInstance::new(x, y, 0.2).unwrap();
        let v = objective(&[-1.5], &[vec![3.0, 4.0]], &inst).unwrap();
        assert!((v - 0.2 * 1.5).abs() < 1e-14);
    }

    #[test]
    fn objective_is_invariant_to_particle_scale() {
        let inst = small();
        let (c, u) = raw(&[0.7, -0.4, 1.1], &[[1.0, 0.3], [-0.2, 0.9], [0.4, -0.6]]);
        let u3: Vec<Vec<f64>> = u.iter().map(|v| v.iter().map(|a| 3.0 * a).collect()).collect();
        let a = objective(&c, &u, &inst).unwrap();
        let b = objective(&c, &u3, &inst).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn objective_rejects_zero_vector() {
        let inst = small();
        assert!(matches!(
            objective(&[1.0], &[vec![0.0, 0.0]], &inst),
            Err(Error::ZeroVector { .. })
        ));
    }

    #[test]
    fn mean_convention_scales_objective() {
        let inst = small();
        let mean = inst.clone().with_loss(LossConvention::Mean);
        let (c, u) = raw(&[0.7, -0.4], &[[1.0, 0.3], [-0.2, 0.9]]);
        // (1/n) |r|^2 + lambda |c| equals (2/n) (1/2 |r|^2 + (n lambda / 2) |c|).
        let (mut r, tv) = (inst.target().iter().map(|y| -y).collect::<Vec<_>>(), 1.1);
        for (ci, ui) in c.iter().zip(&u) {
            let w = normalize(ui).unwrap();
            for (rj, x) in r.iter_mut().zip(inst.points()) {
                *rj += ci * relu(dot(&w, x));
            }
        }
        let direct = dot(&r, &r) / 4.0 + 0.05 * tv;
        assert!((objective(&c, &u, &mean).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn tangential_gradient_is_orthogonal_to_location() {
        let inst = small();
        let (c, u) = raw(&[0.7, -0.4, 1.1], &[[1.0, 0.3], [-0.2, 0.9], [0.4, -0.6]]);
        let (_, gu) = gradient(&c, &u, &inst).unwrap();
        for (g, ui) in gu.iter().zip(&u) {
            assert!(dot(g, ui).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_is_stationary_at_exact_interpolant_without_penalty() {
        let x = vec![vec![1.0, 0.2], vec![0.3, 1.0], vec![-0.7, 0.4]];
        let w = normalize(&[0.6, 0.8]).unwrap();
        let y: Vec<f64> = x.iter().map(|xj| 2.0 * relu(dot(&w, xj))).collect();
        let inst = ProblemInstance::new(x, y, 0.0).unwrap();
        let (gc, gu) = gradient(&[2.0], &[vec![0.6, 0.8]], &inst).unwrap();
        assert!(gc[0].abs() < 1e-15);
        assert!(gu[0].iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn empty_data_gives_empty_measure() {
        let x = vec![vec![1.0, 0.2], vec![0.3, 1.0], vec![-0.7, 0.4]];
        let inst = ProblemInstance::new(x, vec![0.0; 3], 0.1).unwrap();
        let cfg = SolverConfig {
            particles: 200,
            max_iters: 2000,
            ..SolverConfig::default()
        };
        let rep = solve(&inst, &cfg).unwrap();
        assert!(rep.measure.is_empty());
        assert_eq!(rep.objective, 0.0);
        assert!(rep.certified);
    }

    #[test]
    fn solve_requires_positive_lambda() {
        let inst = small().with_lambda(0.0);
        assert!(matches!(
            solve(&inst, &SolverConfig::default()),
            Err(Error::InvalidInstance(_))
        ));
    }

    #[test]
    fn config_validation_names_the_field() {
        let cfg = SolverConfig {
            prune_every: 0,
            ..SolverConfig::default()
        };
        match cfg.validate() {
            Err(Error::InvalidConfig(msg)) => assert!(msg.contains("prune_every")),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = SolverConfig {
            step_size: -1.0,
            ..SolverConfig::default()
        };
        match cfg.validate() {
            Err(Error::InvalidConfig(msg)) => assert!(msg.contains("step_size")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
