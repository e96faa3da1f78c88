//! Run configuration: a TOML file with the instance inline and one optional
//! section per command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sphere_blasso_core::certificate::{DEFAULT_MATCH_RADIUS, DEFAULT_TOL_SAT};
use sphere_blasso_core::geometry::{LossConvention, ProblemInstance};
use sphere_blasso_core::instances;
use sphere_blasso_core::solver::SolverConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory receiving every output file.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub instance: InstanceConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub stability: StabilitySection,
    #[serde(default)]
    pub certify: CertifySection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    HalfSum,
    Mean,
}

impl From<Loss> for LossConvention {
    fn from(l: Loss) -> Self {
        match l {
            Loss::HalfSum => LossConvention::HalfSum,
            Loss::Mean => LossConvention::Mean,
        }
    }
}

/// Built-in data sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Arrangement,
    Recovery,
}

/// Either `builtin = "..."` or inline `points` and `labels`. `lambda` and
/// `loss` override the built-in values when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<Loss>,
    /// Label noise `zeta`, added to the labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<f64>>,
}

/// Every field defaults to [`SolverConfig::default`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam_beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam_beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cert_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polish_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange_rounds: Option<usize>,
}

/// `lambdas` explicitly, or a geometric grid of `count` values from
/// `lambda_max` down to `lambda_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "default_lambda_count")]
    pub count: usize,
}

fn default_lambda_max() -> f64 {
    1.0
}
fn default_lambda_min() -> f64 {
    5e-7
}
fn default_lambda_count() -> usize {
    11
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            lambdas: None,
            lambda_max: default_lambda_max(),
            lambda_min: default_lambda_min(),
            count: default_lambda_count(),
        }
    }
}

impl SweepSection {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match &self.lambdas {
            Some(l) => l.clone(),
            None => {
                if !(self.lambda_max > 0.0 && self.lambda_min > 0.0 && self.lambda_min <= self.lambda_max) {
                    return Err(CliError::Input(format!(
                        "sweep.lambda_min/lambda_max must satisfy 0 < lambda_min <= lambda_max, got {} and {}",
                        self.lambda_min, self.lambda_max
                    )));
                }
                instances::geometric_grid(self.lambda_max, self.lambda_min, self.count)
            }
        };
        if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(CliError::Input("sweep.lambdas must be a nonempty list of positive values".into()));
        }
        Ok(grid)
    }
}

/// `noise_levels` explicitly, or `count` equispaced levels from `min` to
/// `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_levels: Option<Vec<f64>>,
    #[serde(default = "default_noise_min")]
    pub min: f64,
    #[serde(default = "default_noise_max")]
    pub max: f64,
    #[serde(default = "default_noise_count")]
    pub count: usize,
    #[serde(default = "default_direction_seed")]
    pub direction_seed: u64,
}

fn default_noise_min() -> f64 {
    5e-4
}
fn default_noise_max() -> f64 {
    2.4e-3
}
fn default_noise_count() -> usize {
    8
}
fn default_direction_seed() -> u64 {
    7
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            noise_levels: None,
            min: default_noise_min(),
            max: default_noise_max(),
            count: default_noise_count(),
            direction_seed: default_direction_seed(),
        }
    }
}

impl StabilitySection {
    pub fn levels(&self) -> Result<Vec<f64>, CliError> {
        let levels = match &self.noise_levels {
            Some(l) => l.clone(),
            None => instances::linear_grid(self.min, self.max, self.count),
        };
        if levels.is_empty() || levels.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(CliError::Input(
                "stability.noise_levels must be a nonempty list of nonnegative values".into(),
            ));
        }
        Ok(levels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    #[serde(default = "default_tol_sat")]
    pub tol_sat: f64,
    #[serde(default = "default_match_radius")]
    pub match_radius: f64,
    /// Minimum gap between normalized gated vectors for non-degeneracy.
    #[serde(default = "default_nd_tol")]
    pub nd_tol: f64,
    /// Decreasing `lambda` sequence approximating the minimal-norm
    /// certificate used by the non-degeneracy check.
    #[serde(default = "default_continuation")]
    pub continuation_lambdas: Vec<f64>,
}

fn default_tol_sat() -> f64 {
    DEFAULT_TOL_SAT
}
fn default_match_radius() -> f64 {
    DEFAULT_MATCH_RADIUS
}
fn default_nd_tol() -> f64 {
    1e-6
}
fn default_continuation() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5]
}

impl Default for CertifySection {
    fn default() -> Self {
        Self {
            tol_sat: default_tol_sat(),
            match_radius: default_match_radius(),
            nd_tol: default_nd_tol(),
            continuation_lambdas: default_continuation(),
        }
    }
}

impl RunConfig {
    /// A configuration for a built-in data set with every other value at its
    /// default.
    pub fn builtin(which: Builtin) -> Self {
        Self {
            output_dir: default_output_dir(),
            instance: InstanceConfig {
                builtin: Some(which),
                points: None,
                labels: None,
                lambda: None,
                loss: None,
                noise: None,
            },
            solver: SolverSection::default(),
            sweep: SweepSection::default(),
            stability: StabilitySection::default(),
            certify: CertifySection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim().is_empty() {
            return Err(CliError::Input("config is empty: missing field `instance`".into()));
        }
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().to_string();
            if path.is_empty() || path == "." {
                CliError::Input(format!("invalid config: {msg}"))
            } else {
                CliError::Input(format!("invalid config at `{path}`: {msg}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn problem(&self) -> Result<ProblemInstance, CliError> {
        let inst = &self.instance;
        let base = match inst.builtin {
            Some(Builtin::Arrangement) => Some(instances::arrangement_instance()),
            Some(Builtin::Recovery) => Some(instances::recovery_instance()),
            None => None,
        };
        let mut problem = match (base, &inst.points, &inst.labels) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(CliError::Input(
                    "instance.builtin cannot be combined with instance.points/labels".into(),
                ))
            }
            (Some(p), None, None) => p,
            (None, Some(points), Some(labels)) => {
                let lambda = inst
                    .lambda
                    .ok_or_else(|| CliError::Input("missing field `instance.lambda`".into()))?;
                ProblemInstance::new(points.clone(), labels.clone(), lambda)
                    .map_err(|e| CliError::Input(format!("instance: {e}")))?
            }
            (None, None, _) => return Err(CliError::Input("missing field `instance.points`".into())),
            (None, _, None) => return Err(CliError::Input("missing field `instance.labels`".into())),
        };
        if let Some(lambda) = inst.lambda {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(CliError::Input(format!("instance.lambda must be >= 0, got {lambda}")));
            }
            problem = problem.with_lambda(lambda);
        }
        if let Some(loss) = inst.loss {
            problem = problem.with_loss(loss.into());
        }
        if let Some(noise) = &inst.noise {
            problem = problem
                .with_noise(noise.clone())
                .map_err(|e| CliError::Input(format!("instance.noise: {e}")))?;
        }
        Ok(problem)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let s = &self.solver;
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            particles: s.particles.unwrap_or(d.particles),
            step_size: s.step_size.unwrap_or(d.step_size),
            adam_beta1: s.adam_beta1.unwrap_or(d.adam_beta1),
            adam_beta2: s.adam_beta2.unwrap_or(d.adam_beta2),
            adam_eps: s.adam_eps.unwrap_or(d.adam_eps),
            max_iters: s.max_iters.unwrap_or(d.max_iters),
            prune_every: s.prune_every.unwrap_or(d.prune_every),
            prune_threshold: s.prune_threshold.unwrap_or(d.prune_threshold),
            merge_radius: s.merge_radius.unwrap_or(d.merge_radius),
            seed: s.seed.unwrap_or(d.seed),
            cert_tolerance: s.cert_tolerance.unwrap_or(d.cert_tolerance),
            polish_iters: s.polish_iters.unwrap_or(d.polish_iters),
            refine: s.refine.unwrap_or(d.refine),
            init_radius: s.init_radius.unwrap_or(d.init_radius),
            exchange_rounds: s.exchange_rounds.unwrap_or(d.exchange_rounds),
        };
        cfg.validate()
            .map_err(|e| CliError::Input(format!("solver: {e}")))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INLINE: &str = r#"
output_dir = "runs/a"

[instance]
points = [[0.2, -0.1], [1.0, 0.3]]
labels = [0.8, -0.1]
lambda = 0.03
loss = "mean"

[solver]
particles = 500
seed = 3

[sweep]
lambdas = [1.0, 0.1]
"#;

    #[test]
    fn parse_round_trips() {
        let cfg = RunConfig::parse(INLINE).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.solver_config().unwrap().particles, 500);
        assert_eq!(cfg.sweep.grid().unwrap(), vec![1.0, 0.1]);
        assert_eq!(cfg.problem().unwrap().loss(), LossConvention::Mean);
    }

    #[test]
    fn builtin_round_trips() {
        let cfg = RunConfig::builtin(Builtin::Recovery);
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.problem().unwrap().lambda(), 0.2);
    }

    fn message(text: &str) -> String {
        match RunConfig::parse(text).and_then(|c| c.problem().map(|_| c)).and_then(|c| c.solver_config()) {
            Err(CliError::Input(m)) => m,
            other => panic!("expected an input error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_offending_field() {
        assert!(message("").contains("instance"));
        assert!(message("[instance]\nlabels = [1.0]\nlambda = 0.1\n").contains("instance.points"));
        assert!(message("[instance]\nbuiltin = \"arrangement\"\nfoo = 1\n").contains("foo"));
        assert!(message("[instance]\nbuiltin = \"arrangement\"\n[solver]\nstep_size = -1.0\n").contains("step_size"));
        assert!(message("[instance]\nbuiltin = \"arrangement\"\n[solver]\nparticles = \"many\"\n").contains("many"));
    }

    #[test]
    fn default_grids() {
        let cfg = RunConfig::builtin(Builtin::Arrangement);
        let g = cfg.sweep.grid().unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 1.0);
        assert!((g[10] - 5e-7).abs() < 1e-20);
        let l = cfg.stability.levels().unwrap();
        assert_eq!(l.len(), 8);
        assert!((l[7] - 2.4e-3).abs() < 1e-18);
    }
}
