//! The subcommands: each reads a [`RunConfig`], runs the computation, writes
//! its files into the output directory and reports whether every check
//! passed.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sphere_blasso_core::arrangement::{enumerate_strata, summarize, Stratum};
use sphere_blasso_core::certificate::{check_lc, check_nd, dual_from_primal, DualCertificate};
use sphere_blasso_core::conditions::{check_full_rank, check_independence};
use sphere_blasso_core::geometry::{ProblemInstance, SparseMeasure};
use sphere_blasso_core::solver::{
    fit_rows, min_norm_certificate_approx, noise_direction, solve, stability_baseline, stability_level, sweep_lambda,
    SolveReport, SolverConfig, StabilityReport, SweepRow,
};

use crate::config::RunConfig;
use crate::output::{
    self, Certification, FullRankRecord, IndependenceRecord, LcRecord, NdAtomRecord, NdRecord, Regions, Solution,
};
use crate::plot::{self, Chart, Series};
use crate::CliError;

/// Environment variable capping the number of worker threads of sweeps.
pub const THREADS_ENV: &str = "SPHERE_BLASSO_THREADS";

/// Samples of `eta` written to `certificate.csv` for planar instances.
pub const CERTIFICATE_SAMPLES: usize = 3600;

/// Result of a command: the files written and whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    pub summary: String,
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))
}

fn strata_of(instance: &ProblemInstance) -> Result<Vec<Stratum>, CliError> {
    Ok(enumerate_strata(instance.points())?)
}

/// `eta` at equispaced angles of the circle.
pub fn sample_certificate(cert: &DualCertificate, instance: &ProblemInstance, samples: usize) -> Vec<(f64, [f64; 2], f64)> {
    (0..samples)
        .map(|k| {
            let t = TAU * k as f64 / samples as f64;
            let w = [t.cos(), t.sin()];
            (t, w, cert.eval(&w, instance))
        })
        .collect()
}

pub fn solve_cmd(cfg: &RunConfig, dir: &Path) -> Result<(Outcome, SolveReport), CliError> {
    let instance = cfg.problem()?;
    let solver = cfg.solver_config()?;
    prepare(dir)?;
    let report = solve(&instance, &solver)?;
    let mut files = vec![dir.join("solution.json")];
    output::write_json(&files[0], &Solution::from_report(&report, &instance))?;
    if instance.dim() == 2 {
        let csv = dir.join("certificate.csv");
        output::write_certificate_csv(&csv, &sample_certificate(&report.dual, &instance, CERTIFICATE_SAMPLES))?;
        let svg = dir.join("solution.svg");
        output::write_text(&svg, &plot::wheel(&instance, &report.measure, &report.dual, 720))?;
        files.extend([csv, svg]);
    }
    let summary = format!(
        "{} atoms, objective {:.6e}, sup|eta| = {:.6}, certified: {}",
        report.measure.len(),
        report.objective,
        report.sup_abs_eta,
        report.certified
    );
    Ok((
        Outcome {
            files,
            passed: report.certified,
            summary,
        },
        report,
    ))
}

pub fn certify_cmd(cfg: &RunConfig, solution: &Path, dir: &Path) -> Result<(Outcome, Certification), CliError> {
    let instance = cfg.problem()?;
    let solver = cfg.solver_config()?;
    let text = fs::read_to_string(solution)
        .map_err(|e| CliError::Input(format!("cannot read solution {}: {e}", solution.display())))?;
    let sol: Solution = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("invalid solution {}: {e}", solution.display())))?;
    let measure = sol.measure()?;
    if measure.atoms.iter().any(|a| a.location.dim() != instance.dim()) {
        return Err(CliError::Input(format!(
            "solution atoms must have dimension {}",
            instance.dim()
        )));
    }
    prepare(dir)?;
    let cert = certify_measure(&instance, &measure, cfg, &solver)?;
    let path = dir.join("certify.json");
    output::write_json(&path, &cert)?;
    let summary = format!(
        "LC {}, ND {}, independence {}, full rank {}",
        verdict(cert.lc.holds),
        cert.nd.as_ref().map_or("skipped", |n| verdict(n.holds)),
        verdict(cert.independence.independent),
        verdict(cert.full_rank.full)
    );
    Ok((
        Outcome {
            files: vec![path],
            passed: cert.passed,
            summary,
        },
        cert,
    ))
}

fn verdict(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "fails"
    }
}

/// Localization against the solution's own dual, non-degeneracy against the
/// small-`lambda` continuation certificate, and both sufficient conditions
/// on the atom locations.
pub fn certify_measure(
    instance: &ProblemInstance,
    measure: &SparseMeasure,
    cfg: &RunConfig,
    solver: &SolverConfig,
) -> Result<Certification, CliError> {
    let strata = strata_of(instance)?;
    let c = &cfg.certify;
    let dual = dual_from_primal(measure, instance)?;
    let lc = check_lc(&dual, measure, instance, &strata, c.tol_sat, c.match_radius);

    let (nd, nd_error) = match min_norm_certificate_approx(instance, &c.continuation_lambdas, solver) {
        Ok(cont) => {
            let atoms = measure
                .atoms
                .iter()
                .enumerate()
                .map(|(i, a)| check_nd(&cont.certificate, &a.location, instance, &strata, c.nd_tol).map(|r| NdAtomRecord::new(i, &r)))
                .collect::<Result<Vec<_>, _>>()?;
            (
                Some(NdRecord {
                    holds: atoms.iter().all(|a| a.holds),
                    tol: c.nd_tol,
                    lambdas: cont.lambdas,
                    cauchy_gaps: cont.cauchy_gaps,
                    certificate_p: cont.certificate.p,
                    atoms,
                }),
                None,
            )
        }
        Err(e) => (None, Some(e.to_string())),
    };

    let locations = measure.locations();
    let independence = IndependenceRecord::from(&check_independence(&locations, instance)?);
    let full_rank = match check_full_rank(&locations, instance) {
        Ok(r) => FullRankRecord::from(&r),
        Err(e) => FullRankRecord {
            full: false,
            rank: 0,
            required: locations.len() * instance.dim(),
            deficient_by_shape: instance.n() < locations.len() * instance.dim(),
            singular_values: vec![],
            stacked: vec![],
            error: Some(e.to_string()),
        },
    };
    let passed = lc.holds && nd.as_ref().is_some_and(|n| n.holds);
    Ok(Certification {
        lc: LcRecord::from(&lc),
        nd,
        nd_error,
        independence,
        full_rank,
        passed,
    })
}

pub fn regions_cmd(cfg: &RunConfig, dir: &Path) -> Result<(Outcome, Regions), CliError> {
    let instance = cfg.problem()?;
    prepare(dir)?;
    let strata = strata_of(&instance)?;
    let regions = Regions::new(&summarize(instance.points(), &strata), &strata);
    let path = dir.join("regions.json");
    output::write_json(&path, &regions)?;
    let summary = format!(
        "{} full-dimensional regions (cover count {}), {} strata, sparsity bound {}",
        regions.full_regions,
        regions.cover_count,
        strata.len(),
        regions.sparsity_bound
    );
    Ok((
        Outcome {
            files: vec![path],
            passed: true,
            summary,
        },
        regions,
    ))
}

pub fn sweep_cmd(cfg: &RunConfig, dir: &Path) -> Result<(Outcome, Vec<SweepRow>), CliError> {
    let instance = cfg.problem()?;
    let solver = cfg.solver_config()?;
    let grid = cfg.sweep.grid()?;
    prepare(dir)?;
    let rows = sweep_lambda(&instance, &grid, &solver)?;
    let csv = dir.join("atoms_vs_lambda.csv");
    output::write_sweep_csv(&csv, &rows)?;
    let svg = dir.join("atoms_vs_lambda.svg");
    output::write_text(&svg, &sweep_chart(&rows).render())?;
    let certified = rows.iter().filter(|r| r.certified).count();
    let summary = format!(
        "{} lambda values, {} certified, atom counts {:?}",
        rows.len(),
        certified,
        rows.iter().map(|r| r.atom_count).collect::<Vec<_>>()
    );
    Ok((
        Outcome {
            files: vec![csv, svg],
            passed: certified == rows.len(),
            summary,
        },
        rows,
    ))
}

pub fn sweep_chart(rows: &[SweepRow]) -> Chart {
    Chart {
        title: "Support size along the regularization path".into(),
        x_label: "lambda".into(),
        y_label: "number of atoms".into(),
        log_x: true,
        series: vec![Series {
            label: "atoms".into(),
            points: rows.iter().map(|r| (r.lambda, r.atom_count as f64)).collect(),
            markers: true,
            line: true,
            dashed: false,
            color: 0,
        }],
    }
}

/// Worker count from [`THREADS_ENV`], defaulting to the available cores.
pub fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Input(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, usize::from)),
    }
}

/// The stability sweep with noise levels solved in parallel. Each level owns
/// its seed, so the result equals the sequential sweep.
pub fn stability_parallel(
    instance: &ProblemInstance,
    levels: &[f64],
    direction_seed: u64,
    config: &SolverConfig,
    threads: usize,
) -> Result<StabilityReport, CliError> {
    let strata = strata_of(instance)?;
    let baseline = stability_baseline(instance, config, &strata)?;
    let direction = noise_direction(instance.n(), direction_seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let rows = pool.install(|| {
        levels
            .par_iter()
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
            .collect::<Result<Vec<_>, _>>()
    })?;
    let (fit_c, fit_w) = fit_rows(&rows, baseline.measure.len());
    Ok(StabilityReport {
        baseline,
        direction,
        rows,
        fit_c,
        fit_w,
    })
}

pub fn stability_cmd(cfg: &RunConfig, dir: &Path) -> Result<(Outcome, StabilityReport), CliError> {
    let instance = cfg.problem()?;
    let solver = cfg.solver_config()?;
    let levels = cfg.stability.levels()?;
    let threads = thread_count()?;
    prepare(dir)?;
    let report = stability_parallel(&instance, &levels, cfg.stability.direction_seed, &solver, threads)?;
    let csv = dir.join("stability.csv");
    output::write_stability_csv(&csv, &report)?;
    let (c_svg, w_svg) = (dir.join("stability_coefficients.svg"), dir.join("stability_locations.svg"));
    let (c_chart, w_chart) = stability_charts(&report);
    output::write_text(&c_svg, &c_chart.render())?;
    output::write_text(&w_svg, &w_chart.render())?;
    let certified = report.rows.iter().all(|r| r.certified);
    let r2: Vec<String> = report
        .fit_c
        .iter()
        .chain(&report.fit_w)
        .map(|f| format!("{:.4}", f.r2))
        .collect();
    let summary = format!(
        "{} noise levels, {} atoms, all certified: {certified}, R^2 (c then w): {}",
        report.rows.len(),
        report.baseline.measure.len(),
        r2.join(", ")
    );
    Ok((
        Outcome {
            files: vec![csv, c_svg, w_svg],
            passed: certified,
            summary,
        },
        report,
    ))
}

/// `L_c` and `L_w` against the noise norm, per atom, with fitted lines.
pub fn stability_charts(report: &StabilityReport) -> (Chart, Chart) {
    let x: Vec<f64> = report.rows.iter().map(|r| r.noise_norm).collect();
    let (lo, hi) = (
        x.iter().copied().fold(f64::INFINITY, f64::min),
        x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let chart = |title: &str, y_label: &str, pick: fn(&sphere_blasso_core::solver::StabilityRow) -> &Vec<f64>, fits: &[sphere_blasso_core::solver::LinearFit]| {
        let mut series = Vec::new();
        for (i, f) in fits.iter().enumerate() {
            series.push(Series {
                label: format!("atom {}", i + 1),
                points: report.rows.iter().map(|r| (r.noise_norm, pick(r)[i])).collect(),
                markers: true,
                line: false,
                dashed: false,
                color: i,
            });
            series.push(Series {
                label: format!("fit, R2 {:.3}", f.r2),
                points: vec![(lo, f.intercept + f.slope * lo), (hi, f.intercept + f.slope * hi)],
                markers: false,
                line: true,
                dashed: true,
                color: i,
            });
        }
        Chart {
            title: title.into(),
            x_label: "noise norm".into(),
            y_label: y_label.into(),
            log_x: false,
            series,
        }
    };
    (
        chart("Coefficient deviation", "|c - c*|", |r| &r.l_c, &report.fit_c),
        chart("Location deviation", "|w - w*|", |r| &r.l_w, &report.fit_w),
    )
}
