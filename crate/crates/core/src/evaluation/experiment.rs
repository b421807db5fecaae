use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{monte_carlo, ErrorStats};
use crate::error::{Error, Result};
use crate::graph::{Domain, PolicyFamily, PolicySpec};
use crate::mechanism::noise::derive_seed;
use crate::mechanism::{prepare, MechanismId, MechanismSpec, NoiseSource};
use crate::workload::{
    load_histogram, make_workload, parse_range_queries, sample_range_workload, synth_histogram, HistogramDB, Workload,
    WorkloadKind,
};

/// Which queries to ask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    /// Number of sampled ranges (`sampled-ranges` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Range query file (`custom` only): one query per line, 1-based
    /// `lo_1,…,lo_d,hi_1,…,hi_d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl WorkloadSpec {
    pub fn build(&self, domain: &Domain) -> Result<Workload> {
        match self.kind {
            WorkloadKind::SampledRanges => {
                let count =
                    self.count.ok_or_else(|| Error::invalid("workload.count is required for sampled-ranges"))?;
                Ok(sample_range_workload(domain, count, self.seed.unwrap_or(0))?.0)
            }
            WorkloadKind::Custom => {
                let path = self.path.as_ref().ok_or_else(|| Error::invalid("workload.path is required for custom"))?;
                let text = std::fs::read_to_string(path)?;
                let ranges = parse_range_queries(&text, &path.display().to_string(), domain)?;
                Workload::from_ranges(WorkloadKind::Custom, domain.clone(), ranges)
            }
            kind => make_workload(kind, domain),
        }
    }
}

/// Where the database comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DatasetSpec {
    Synthetic { scale: f64, zero_fraction: f64, seed: u64 },
    File { path: PathBuf },
}

impl DatasetSpec {
    pub fn load(&self, domain: &Domain) -> Result<HistogramDB> {
        match self {
            DatasetSpec::Synthetic { scale, zero_fraction, seed } => {
                synth_histogram(domain, *scale, *zero_fraction, *seed)
            }
            DatasetSpec::File { path } => load_histogram(path, Some(domain)),
        }
    }

    /// Short label for tables.
    pub fn name(&self) -> String {
        match self {
            DatasetSpec::Synthetic { zero_fraction, .. } => format!("synthetic-zf{zero_fraction}"),
            DatasetSpec::File { path } => {
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
            }
        }
    }
}

/// Neighbour notion for the differential-privacy baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselinePolicy {
    /// Unbounded: add or remove one tuple.
    Star,
    /// Bounded: change one tuple's value.
    Complete,
}

fn default_runs() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: Domain,
    /// The policy the edge-space mechanisms protect; supplies `theta` to
    /// mechanisms that need one and did not set it.
    pub policy: PolicySpec,
    pub workload: WorkloadSpec,
    pub mechanisms: Vec<MechanismSpec>,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSpec,
    /// Adds `mm-wavelet` under this policy as a baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselinePolicy>,
    /// Keep each record's per-query error vector.
    #[serde(default)]
    pub per_query: bool,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| Err(Error::invalid(format!("{name}: {msg}")));
        if self.epsilons.is_empty() {
            return field("epsilons", "at least one value is required".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return field("epsilons", format!("value {e} must be positive and finite"));
        }
        if self.runs == 0 {
            return field("runs", "must be at least 1".into());
        }
        if self.mechanisms.is_empty() && self.baseline.is_none() {
            return field("mechanisms", "at least one mechanism (or a baseline) is required".into());
        }
        if let Err(e) = self.policy.check() {
            return field("policy", e.to_string());
        }
        for m in &self.mechanisms {
            if m.id.needs_theta() && m.theta.or(self.policy.theta).is_none() {
                return field("mechanisms", format!("{} needs theta (set it on the mechanism or the policy)", m.id));
            }
        }
        if let DatasetSpec::Synthetic { scale, zero_fraction, .. } = self.dataset {
            if !(0.0..=1.0).contains(&zero_fraction) || !(scale >= 0.0 && scale.is_finite()) {
                return field("dataset", "need scale >= 0 and zero_fraction in [0, 1]".into());
            }
        }
        Ok(())
    }

    /// Makes relative file paths relative to `base` (the config's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.workload.path.as_mut() {
            fix(p);
        }
        if let DatasetSpec::File { path } = &mut self.dataset {
            fix(path);
        }
    }

    /// Mechanisms to run, baseline last.
    pub fn mechanism_specs(&self) -> Vec<MechanismSpec> {
        let mut specs: Vec<MechanismSpec> =
            self.mechanisms.iter().map(|m| MechanismSpec { theta: m.theta.or(self.policy.theta), ..*m }).collect();
        if let Some(b) = self.baseline {
            let family = match b {
                BaselinePolicy::Star => PolicyFamily::Star,
                BaselinePolicy::Complete => PolicyFamily::Complete,
            };
            specs.push(MechanismSpec::new(MechanismId::MmWavelet).with_policy(PolicySpec { family, theta: None }));
        }
        specs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub mechanism: MechanismId,
    /// Neighbour notion the noise was calibrated to.
    pub policy: String,
    pub epsilon: f64,
    pub dataset: String,
    pub mean_per_query_mse: f64,
    pub total_mse: f64,
    pub stretch: usize,
    pub wall_ms: f64,
    pub runs: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_query_mse: Vec<f64>,
}

impl ResultRecord {
    /// Mechanism name as shown in tables: the id, plus the policy for
    /// mechanisms whose neighbour notion is configurable.
    pub fn label(&self) -> String {
        if self.mechanism.is_blowfish() {
            self.mechanism.to_string()
        } else {
            format!("{}[{}]", self.mechanism, self.policy)
        }
    }
}

/// Config echo plus results; the JSON output of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub results: Vec<ResultRecord>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Tidy CSV: `mechanism,epsilon,dataset,mse` with per-query MSE.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mechanism,epsilon,dataset,mse\n");
        for r in &self.results {
            let _ = writeln!(s, "{},{},{},{}", r.label(), r.epsilon, r.dataset, r.mean_per_query_mse);
        }
        s
    }
}

/// Runs every mechanism at every ε. Mechanism `i` at ε index `j` uses seed
/// `derive_seed(derive_seed(seed, i), j)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let x = config.dataset.load(&config.domain)?;
    let w = config.workload.build(&config.domain)?;
    let dataset = config.dataset.name();
    let mut out = Vec::new();
    for (i, spec) in config.mechanism_specs().iter().enumerate() {
        for (j, &epsilon) in config.epsilons.iter().enumerate() {
            let start = Instant::now();
            let m = prepare(spec, &w, &x, epsilon)?;
            let seed = derive_seed(derive_seed(config.seed, i as u64), j as u64);
            let stats: ErrorStats = monte_carlo(m.as_ref(), config.runs, NoiseSource::seeded(seed))?;
            let policy = if spec.id.is_blowfish() { policy_of(spec) } else { spec.policy.to_string() };
            out.push(ResultRecord {
                mechanism: spec.id,
                policy,
                epsilon,
                dataset: dataset.clone(),
                mean_per_query_mse: stats.mean_per_query,
                total_mse: stats.total_mse,
                stretch: m.stretch(),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                runs: stats.runs,
                seed,
                per_query_mse: if config.per_query { stats.per_query_mse.into_inner() } else { Vec::new() },
            });
        }
    }
    Ok(out)
}

fn policy_of(spec: &MechanismSpec) -> String {
    match spec.id {
        MechanismId::BfLine | MechanismId::BfLineIso => "line".into(),
        MechanismId::BfGrid => "grid".into(),
        _ => format!("theta({})", spec.theta.unwrap_or(1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            domain: Domain::line(64).unwrap(),
            policy: PolicySpec { family: PolicyFamily::Line, theta: None },
            workload: WorkloadSpec { kind: WorkloadKind::SampledRanges, count: Some(50), seed: Some(3), path: None },
            mechanisms: vec![MechanismSpec::new(MechanismId::BfLine)],
            epsilons: vec![0.001, 0.01, 0.1, 1.0],
            runs: 5,
            seed: 7,
            dataset: DatasetSpec::Synthetic { scale: 1000.0, zero_fraction: 0.9, seed: 1 },
            baseline: Some(BaselinePolicy::Star),
            per_query: false,
        }
    }

    #[test]
    fn records_per_epsilon_and_round_trip() {
        let c = config();
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.len(), 8);
        let report = ExperimentReport { config: c.clone(), results: r.clone() };
        let back: ExperimentReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
        assert_eq!(report.to_csv().lines().count(), 9);
        let again = run_experiment(&c).unwrap();
        for (a, b) in r.iter().zip(&again) {
            assert_eq!(ResultRecord { wall_ms: 0.0, ..a.clone() }, ResultRecord { wall_ms: 0.0, ..b.clone() });
        }
    }

    #[test]
    fn validation_names_fields() {
        let mut c = config();
        c.epsilons = vec![0.1, -1.0];
        assert!(c.validate().unwrap_err().to_string().contains("epsilons"));
        let mut c = config();
        c.runs = 0;
        assert!(c.validate().unwrap_err().to_string().contains("runs"));
        let mut c = config();
        c.mechanisms = vec![MechanismSpec::new(MechanismId::BfTheta1d)];
        assert!(c.validate().unwrap_err().to_string().contains("theta"));
    }
}
