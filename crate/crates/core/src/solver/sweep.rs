//! Parameter sweeps built on top of single solves: regularization paths,
//! label-noise stability and the small-`lambda` continuation that
//! approximates the minimal-norm certificate.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{solve_with_strata, SolveReport, SolverConfig};
use crate::arrangement::{enumerate_strata, Stratum};
use crate::certificate::{sup_abs, DualCertificate};
use crate::error::{Error, Result};
use crate::geometry::{angular_distance, random_unit_vector, ProblemInstance, SparseMeasure};
use crate::linalg::{norm, sub};
use crate::operators::min_margin;

/// Seed of the `index`-th solve of a sweep: splitmix64 of the base seed and
/// the index, so results do not depend on scheduling.
pub fn seed_for(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Smallest `lambda` (in the instance's convention) at which the zero
/// measure is optimal: `sup |K_* y|` divided by the effective-lambda factor.
pub fn lambda_max(instance: &ProblemInstance, strata: &[Stratum]) -> f64 {
    let factor = instance.clone().with_lambda(1.0).effective_lambda();
    let (s, _) = sup_abs(&DualCertificate::new(instance.target()), instance, strata);
    s / factor
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub atom_count: usize,
    pub objective: f64,
    pub certified: bool,
    pub sup_abs_eta: f64,
    pub measure: SparseMeasure,
}

/// Solves along `lambdas` in order, warm-starting each solve from the
/// previous solution (topped up with fresh particles).
pub fn sweep_lambda(instance: &ProblemInstance, lambdas: &[f64], config: &SolverConfig) -> Result<Vec<SweepRow>> {
    let strata = enumerate_strata(instance.points())?;
    let mut rows = Vec::with_capacity(lambdas.len());
    let mut warm: Option<SparseMeasure> = None;
    for (k, &lambda) in lambdas.iter().enumerate() {
        if !(lambda > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda values must be positive, got {lambda}")));
        }
        let inst = instance.clone().with_lambda(lambda);
        let cfg = SolverConfig {
            seed: seed_for(config.seed, k as u64),
            ..config.clone()
        };
        let report = solve_with_strata(&inst, &cfg, warm.as_ref(), &strata)?;
        rows.push(SweepRow {
            lambda,
            atom_count: report.measure.len(),
            objective: report.objective,
            certified: report.certified,
            sup_abs_eta: report.sup_abs_eta,
            measure: report.measure.clone(),
        });
        warm = Some(report.measure);
    }
    Ok(rows)
}

/// A unit noise direction in `R^n`, drawn from the seed.
pub fn noise_direction(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unit_vector(&mut rng, n).into_inner()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub noise_norm: f64,
    /// `|c_zeta^i - c_*^i|` per baseline atom.
    pub l_c: Vec<f64>,
    /// `|w_zeta^i - w_*^i|` per baseline atom.
    pub l_w: Vec<f64>,
    pub certified: bool,
    pub measure: SparseMeasure,
}

/// Least-squares line `y = slope x + intercept` with its coefficient of
/// determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl LinearFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Self {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let intercept = my - slope * mx;
        let ss_res: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let e = b - (slope * a + intercept);
                e * e
            })
            .sum();
        let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
        let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        Self { slope, intercept, r2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub baseline: SolveReport,
    pub direction: Vec<f64>,
    pub rows: Vec<StabilityRow>,
    /// Per baseline atom, fits of `L_c` and `L_w` against the noise norm.
    pub fit_c: Vec<LinearFit>,
    pub fit_w: Vec<LinearFit>,
}

/// Baseline solve at `zeta = 0`; fails unless it certifies with every atom
/// strictly inside a region.
pub fn stability_baseline(instance: &ProblemInstance, config: &SolverConfig, strata: &[Stratum]) -> Result<SolveReport> {
    let clean = instance.clone().without_noise();
    let baseline = solve_with_strata(&clean, config, None, strata)?;
    if !baseline.certified {
        return Err(Error::SolverFailed {
            lambda: instance.lambda(),
        });
    }
    for (i, a) in baseline.measure.atoms.iter().enumerate() {
        let (j, margin) = min_margin(&a.location, instance);
        if margin <= crate::operators::INTERIOR_MARGIN {
            return Err(Error::StratumBoundary {
                atom: i,
                hyperplane: j,
                margin,
            });
        }
    }
    Ok(baseline)
}

/// One noise level of the stability sweep; `index` selects the solve seed.
pub fn stability_level(
    instance: &ProblemInstance,
    baseline: &SparseMeasure,
    direction: &[f64],
    noise_norm: f64,
    index: u64,
    config: &SolverConfig,
    strata: &[Stratum],
) -> Result<StabilityRow> {
    let noise: Vec<f64> = direction.iter().map(|v| v * noise_norm).collect();
    let inst = instance.clone().with_noise(noise)?;
    let cfg = SolverConfig {
        seed: seed_for(config.seed, index),
        ..config.clone()
    };
    let report = solve_with_strata(&inst, &cfg, Some(baseline), strata)?;
    if report.measure.len() != baseline.len() {
        return Err(Error::AtomCountChanged {
            noise: noise_norm,
            expected: baseline.len(),
            found: report.measure.len(),
        });
    }
    let matched = match_atoms(baseline, &report.measure);
    let mut l_c = Vec::with_capacity(baseline.len());
    let mut l_w = Vec::with_capacity(baseline.len());
    for (b, &k) in baseline.atoms.iter().zip(&matched) {
        let a = &report.measure.atoms[k];
        l_c.push((a.coefficient - b.coefficient).abs());
        l_w.push(norm(&sub(&a.location, &b.location)));
    }
    Ok(StabilityRow {
        noise_norm,
        l_c,
        l_w,
        certified: report.certified,
        measure: report.measure,
    })
}

/// Greedy nearest-neighbour matching on angular distance: entry `i` is the
/// index in `other` matched to `baseline`'s atom `i`.
pub fn match_atoms(baseline: &SparseMeasure, other: &SparseMeasure) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, b) in baseline.atoms.iter().enumerate() {
        for (k, a) in other.atoms.iter().enumerate() {
            pairs.push((angular_distance(&b.location, &a.location), i, k));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = alloc::vec![usize::MAX; baseline.len()];
    let mut used = alloc::vec![false; other.len()];
    for (_, i, k) in pairs {
        if out[i] == usize::MAX && !used[k] {
            out[i] = k;
            used[k] = true;
        }
    }
    out
}

/// Fits `L_c` and `L_w` of every atom against the noise norm.
pub fn fit_rows(rows: &[StabilityRow], atoms: usize) -> (Vec<LinearFit>, Vec<LinearFit>) {
    let x: Vec<f64> = rows.iter().map(|r| r.noise_norm).collect();
    let fits = |pick: &dyn Fn(&StabilityRow) -> &Vec<f64>| -> Vec<LinearFit> {
        (0..atoms)
            .map(|i| {
                let y: Vec<f64> = rows.iter().map(|r| pick(r)[i]).collect();
                LinearFit::fit(&x, &y)
            })
            .collect()
    };
    (fits(&|r| &r.l_c), fits(&|r| &r.l_w))
}

/// Sequential stability sweep: a clean baseline, then one solve per noise
/// norm along a single seeded direction.
pub fn stability_sweep(
    instance: &ProblemInstance,
    noise_levels: &[f64],
    directions_seed: u64,
    config: &SolverConfig,
) -> Result<StabilityReport> {
    let strata = enumerate_strata(instance.points())?;
    let baseline = stability_baseline(instance, config, &strata)?;
    let direction = noise_direction(instance.n(), directions_seed);
    let rows = noise_levels
        .iter()
        .enumerate()
        .map(|(k, &level)| {
            stability_level(
                instance,
                &baseline.measure,
                &direction,
                level,
                k as u64 + 1,
                config,
                &strata,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let (fit_c, fit_w) = fit_rows(&rows, baseline.measure.len());
    Ok(StabilityReport {
        baseline,
        direction,
        rows,
        fit_c,
        fit_w,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationReport {
    /// The certificate at the smallest `lambda`.
    pub certificate: DualCertificate,
    pub lambdas: Vec<f64>,
    pub duals: Vec<DualCertificate>,
    /// `sup |eta_k - eta_{k+1}|` between consecutive certificates.
    pub cauchy_gaps: Vec<f64>,
    pub measure: SparseMeasure,
}

/// Approximates the minimal-norm interpolation certificate by solving the
/// regularized problem along a decreasing `lambda` sequence.
pub fn min_norm_certificate_approx(
    instance: &ProblemInstance,
    lambdas: &[f64],
    config: &SolverConfig,
) -> Result<ContinuationReport> {
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("empty lambda sequence".into()));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) || !(lambdas[lambdas.len() - 1] > 0.0) {
        return Err(Error::InvalidConfig("lambda sequence must be positive and decreasing".into()));
    }
    let clean = instance.clone().without_noise();
    let strata = enumerate_strata(clean.points())?;
    let mut duals = Vec::with_capacity(lambdas.len());
    let mut warm: Option<SparseMeasure> = None;
    for (k, &lambda) in lambdas.iter().enumerate() {
        let inst = clean.clone().with_lambda(lambda);
        let cfg = SolverConfig {
            seed: seed_for(config.seed, k as u64),
            ..config.clone()
        };
        let report = solve_with_strata(&inst, &cfg, warm.as_ref(), &strata)?;
        if !report.certified {
            return Err(Error::SolverFailed { lambda });
        }
        duals.push(report.dual);
        warm = Some(report.measure);
    }
    let cauchy_gaps = duals
        .windows(2)
        .map(|w| {
            let diff = DualCertificate::new(sub(&w[1].p, &w[0].p));
            sup_abs(&diff, &clean, &strata).0
        })
        .collect();
    Ok(ContinuationReport {
        certificate: duals[duals.len() - 1].clone(),
        lambdas: lambdas.to_vec(),
        duals,
        cauchy_gaps,
        measure: warm.unwrap_or_else(SparseMeasure::empty),
    })
}
