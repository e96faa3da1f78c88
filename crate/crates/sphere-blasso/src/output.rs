//! JSON records and CSV tables written by the commands. Field names follow
//! the schemas in `docs/schemas/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sphere_blasso_core::arrangement::{ArrangementSummary, Stratum};
use sphere_blasso_core::certificate::{LcReport, NdReport};
use sphere_blasso_core::conditions::{FullRankReport, IndependenceReport};
use sphere_blasso_core::geometry::{normalize, Atom, LossConvention, ProblemInstance, SparseMeasure};
use sphere_blasso_core::solver::{SolveReport, StabilityReport, SweepRow};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub c: f64,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub lambda: f64,
    pub loss: String,
    pub noise: Option<Vec<f64>>,
    pub atoms: Vec<AtomRecord>,
    pub objective: f64,
    pub dual_p: Vec<f64>,
    pub sup_abs_eta: f64,
    pub saturation_errors: Vec<f64>,
    pub certified: bool,
    pub iterations_run: usize,
}

pub fn loss_name(loss: LossConvention) -> &'static str {
    match loss {
        LossConvention::HalfSum => "half_sum",
        LossConvention::Mean => "mean",
    }
}

impl Solution {
    pub fn from_report(report: &SolveReport, instance: &ProblemInstance) -> Self {
        Self {
            lambda: instance.lambda(),
            loss: loss_name(instance.loss()).into(),
            noise: instance.noise().map(<[f64]>::to_vec),
            atoms: report
                .measure
                .atoms
                .iter()
                .map(|a| AtomRecord {
                    c: a.coefficient,
                    w: a.location.as_slice().to_vec(),
                })
                .collect(),
            objective: report.objective,
            dual_p: report.dual.p.clone(),
            sup_abs_eta: report.sup_abs_eta,
            saturation_errors: report.saturation_errors.clone(),
            certified: report.certified,
            iterations_run: report.iterations_run,
        }
    }

    /// The measure, with locations renormalized.
    pub fn measure(&self) -> Result<SparseMeasure, CliError> {
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                normalize(&a.w)
                    .map(|location| Atom {
                        coefficient: a.c,
                        location,
                    })
                    .map_err(|e| CliError::Input(format!("solution atoms[{i}].w: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SparseMeasure::new(atoms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumRecord {
    pub codim: usize,
    pub strict: Vec<usize>,
    pub signs: Vec<i8>,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regions {
    pub n: usize,
    pub d: usize,
    pub full_regions: usize,
    pub strata_by_codim: BTreeMap<String, usize>,
    pub cover_count: u128,
    pub sparsity_bound: u128,
    pub matches_cover_count: bool,
    pub witnesses: Vec<StratumRecord>,
}

impl Regions {
    pub fn new(summary: &ArrangementSummary, strata: &[Stratum]) -> Self {
        Self {
            n: summary.n,
            d: summary.d,
            full_regions: summary.full_regions,
            strata_by_codim: summary
                .strata_by_codim
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            cover_count: summary.cover_count,
            sparsity_bound: summary.sparsity_bound,
            matches_cover_count: summary.matches_cover_count,
            witnesses: strata
                .iter()
                .map(|s| StratumRecord {
                    codim: s.codim_label(),
                    strict: s.strict.clone(),
                    signs: s.signs.clone(),
                    witness: s.witness.as_slice().to_vec(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturatingRecord {
    pub w: Vec<f64>,
    pub eta: f64,
    pub stratum: usize,
    pub matched_atom: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcRecord {
    pub holds: bool,
    pub sup_abs: f64,
    pub tol_sat: f64,
    pub match_radius: f64,
    pub saturating: Vec<SaturatingRecord>,
    pub strict_count: usize,
    pub unmatched_atoms: Vec<usize>,
}

impl From<&LcReport> for LcRecord {
    fn from(r: &LcReport) -> Self {
        Self {
            holds: r.holds,
            sup_abs: r.sup_abs,
            tol_sat: r.tol_sat,
            match_radius: r.match_radius,
            saturating: r
                .saturating
                .iter()
                .zip(&r.matches)
                .map(|(c, m)| SaturatingRecord {
                    w: c.location.as_slice().to_vec(),
                    eta: c.value,
                    stratum: c.stratum,
                    matched_atom: *m,
                })
                .collect(),
            strict_count: r.strict_count,
            unmatched_atoms: r.unmatched_atoms.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NdAtomRecord {
    pub atom: usize,
    pub holds: bool,
    pub strict: Vec<usize>,
    pub signs: Vec<i8>,
    pub family_size: usize,
    pub min_gap: Option<f64>,
}

impl NdAtomRecord {
    pub fn new(atom: usize, r: &NdReport) -> Self {
        Self {
            atom,
            holds: r.holds,
            strict: r.strict.clone(),
            signs: r.signs.clone(),
            family_size: r.family.len(),
            min_gap: r.min_gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NdRecord {
    /// `true` when every atom passes.
    pub holds: bool,
    pub tol: f64,
    /// `lambda` sequence of the continuation producing the certificate.
    pub lambdas: Vec<f64>,
    pub cauchy_gaps: Vec<f64>,
    pub certificate_p: Vec<f64>,
    pub atoms: Vec<NdAtomRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceRecord {
    pub independent: bool,
    pub applicable: bool,
    pub reason: Option<String>,
    pub witness_minor: Option<Vec<usize>>,
    pub perm_value: u128,
    pub det_value: i128,
    pub pattern: Vec<Vec<u8>>,
    pub rank_k: usize,
    pub singular_values: Vec<f64>,
    pub rank_full: bool,
}

impl From<&IndependenceReport> for IndependenceRecord {
    fn from(r: &IndependenceReport) -> Self {
        Self {
            independent: r.independent,
            applicable: r.applicable,
            reason: r.reason.clone(),
            witness_minor: r.witness_minor.clone(),
            perm_value: r.perm_value,
            det_value: r.det_value,
            pattern: r.pattern.clone(),
            rank_k: r.rank_k,
            singular_values: r.singular_values.clone(),
            rank_full: r.rank_full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullRankRecord {
    pub full: bool,
    pub rank: usize,
    pub required: usize,
    pub deficient_by_shape: bool,
    pub singular_values: Vec<f64>,
    pub stacked: Vec<Vec<f64>>,
    /// Why the check could not run (an atom on a hyperplane).
    pub error: Option<String>,
}

impl From<&FullRankReport> for FullRankRecord {
    fn from(r: &FullRankReport) -> Self {
        Self {
            full: r.full,
            rank: r.rank,
            required: r.required,
            deficient_by_shape: r.deficient_by_shape,
            singular_values: r.singular_values.clone(),
            stacked: (0..r.stacked.rows()).map(|i| r.stacked.row(i).to_vec()).collect(),
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub lc: LcRecord,
    pub nd: Option<NdRecord>,
    /// Why the non-degeneracy check was skipped.
    pub nd_error: Option<String>,
    pub independence: IndependenceRecord,
    pub full_rank: FullRankRecord,
    /// Localization and non-degeneracy both hold.
    pub passed: bool,
}

/// `JSON` with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Failed(format!("cannot write {}: {e}", path.display()))
}

fn csv_io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Failed(format!("cannot write {}: {e}", path.display()))
}

/// `eta` at `samples` equispaced angles of the circle.
pub fn write_certificate_csv(path: &Path, samples: &[(f64, [f64; 2], f64)]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["angle", "w0", "w1", "eta"]).map_err(csv_err(path))?;
    for (t, v, eta) in samples {
        w.write_record([t.to_string(), v[0].to_string(), v[1].to_string(), eta.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(csv_io_err(path))
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["lambda", "atom_count", "objective", "certified"])
        .map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.lambda.to_string(),
            r.atom_count.to_string(),
            r.objective.to_string(),
            r.certified.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(csv_io_err(path))
}

/// One row per noise level and atom, then footer rows labelled
/// `slope_c_i`, `slope_w_i`, `r2_c_i` and `r2_w_i` (in the `noise_norm`
/// column) carrying the value of the fit for atom `i` in the `L_c` column.
pub fn write_stability_csv(path: &Path, report: &StabilityReport) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["noise_norm", "atom_index", "L_c", "L_w"])
        .map_err(csv_err(path))?;
    for r in &report.rows {
        for (i, (lc, lw)) in r.l_c.iter().zip(&r.l_w).enumerate() {
            w.write_record([r.noise_norm.to_string(), i.to_string(), lc.to_string(), lw.to_string()])
                .map_err(csv_err(path))?;
        }
    }
    for (i, (fc, fw)) in report.fit_c.iter().zip(&report.fit_w).enumerate() {
        let footers = [
            ("slope_c", fc.slope),
            ("slope_w", fw.slope),
            ("r2_c", fc.r2),
            ("r2_w", fw.r2),
        ];
        for (label, value) in footers {
            w.write_record([format!("{label}_{i}"), i.to_string(), value.to_string(), String::new()])
                .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(csv_io_err(path))
}
