//! Identification experiments: simulate, add noise, reconstruct, describe,
//! match, and aggregate over Monte Carlo trials.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::{build_array, build_forward_operator, AcquisitionSpec, ForwardOperator};
use crate::descriptors::{best_match, compute_descriptor, match_descriptor, Dictionary, DictionaryConfig, MatchResult};
use crate::error::{Error, Result};
use crate::exec;
use crate::forward::{add_noise, simulate_msr, MSRDataset};
use crate::geometry::{apply_motion, make_shape_id, Material, RigidMotion, ShapeId};
use crate::gpt::PTSeries;
use crate::inversion::reconstruct_pt;

/// Plan and dictionary configurations shipped with the crate, by file name.
pub const BUNDLED_PLANS: &[(&str, &str)] = &[
    ("dictionary.json", include_str!("../plans/dictionary.json")),
    (
        "fig_errorbar_pi16.json",
        include_str!("../plans/fig_errorbar_pi16.json"),
    ),
    ("fig_noise_sweep.json", include_str!("../plans/fig_noise_sweep.json")),
    (
        "fig_scale_ablation.json",
        include_str!("../plans/fig_scale_ablation.json"),
    ),
];

/// Text of a bundled plan or dictionary configuration.
pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED_PLANS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses a bundled experiment plan.
pub fn bundled_plan(name: &str) -> Result<ExperimentPlan> {
    let text = bundled(name).ok_or_else(|| Error::InvalidArgument(format!("no bundled plan {name}")))?;
    let plan: ExperimentPlan = serde_json::from_str(text)?;
    plan.validate()?;
    Ok(plan)
}

/// Name of the rule that derives trial seeds from the seed base.
pub const SEED_SCHEME: &str = "splitmix64(seed_base ^ fnv1a(shape, noise bits, trial, scale))";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// Expected dictionary label.
    pub name: String,
    pub shape: ShapeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
    #[serde(default = "RigidMotion::reference_target")]
    pub motion: RigidMotion,
}

impl TargetSpec {
    pub fn new(shape: ShapeId) -> Self {
        Self {
            name: shape.name().to_string(),
            shape,
            material: None,
            motion: RigidMotion::reference_target(),
        }
    }

    pub fn material(&self) -> Material {
        self.material.unwrap_or_else(|| self.shape.material())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub name: String,
    pub targets: Vec<TargetSpec>,
    /// Array geometry; `aperture` and `z` are replaced per run.
    pub acquisition: AcquisitionSpec,
    pub apertures: Vec<f64>,
    /// Noise levels as fractions of the per-entry RMS (1.0 = 100%).
    pub noise_levels: Vec<f64>,
    pub trials: usize,
    pub scale_sets: Vec<Vec<i32>>,
    pub seed_base: u64,
    pub simulation_panels: usize,
    pub dictionary: DictionaryConfig,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        let dictionary = DictionaryConfig::default();
        Self {
            name: "identification".into(),
            targets: ShapeId::ALL.iter().map(|&s| TargetSpec::new(s)).collect(),
            acquisition: AcquisitionSpec::default(),
            apertures: vec![PI / 16.0],
            noise_levels: vec![1.0, 2.0],
            trials: 100,
            scale_sets: vec![dictionary.settings.scales.clone()],
            seed_base: 0,
            simulation_panels: 512,
            dictionary,
        }
    }
}

/// `n` levels from `lo` to `hi`, equally spaced on a log scale.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| {
            let x = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
            // keep grid points that should be round numbers exact
            let r = (x * 1e12).round() / 1e12;
            if (r - x).abs() < 1e-12 * x {
                r
            } else {
                x
            }
        })
        .collect()
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.targets.is_empty() || self.apertures.is_empty() || self.noise_levels.is_empty() {
            return Err(Error::InvalidArgument(
                "plan has an empty target, aperture or noise list".into(),
            ));
        }
        if let Some(r) = self.noise_levels.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "noise level {r} is not a nonnegative number"
            )));
        }
        if self.scale_sets.is_empty() {
            return Err(Error::InvalidArgument("plan has no scale set".into()));
        }
        for set in &self.scale_sets {
            if set.is_empty() || set.iter().any(|j| !self.dictionary.settings.scales.contains(j)) {
                return Err(Error::InvalidArgument(format!(
                    "scale set {set:?} is not a subset of the dictionary scales {:?}",
                    self.dictionary.settings.scales
                )));
            }
        }
        for &a in &self.apertures {
            build_array(&AcquisitionSpec {
                aperture: a,
                ..self.acquisition
            })?;
        }
        for t in &self.targets {
            t.motion.validate()?;
            t.material().validate()?;
            if !self.dictionary.entries.iter().any(|e| e.name == t.name) {
                return Err(Error::UnknownShape(format!(
                    "target label '{}' is not a dictionary entry",
                    t.name
                )));
            }
        }
        self.dictionary.settings.validate()
    }

    /// SHA-256 of the plan's JSON form.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }

    /// Scales that have to be simulated: all scale sets plus scale 0.
    pub fn simulated_scales(&self) -> Vec<i32> {
        let mut s: Vec<i32> = self.scale_sets.iter().flatten().copied().chain([0]).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the noise realization for one (target, level, trial, scale).
pub fn trial_seed(seed_base: u64, target: &str, noise: f64, trial: usize, scale: i32) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = target
        .as_bytes()
        .iter()
        .copied()
        .chain([0xff])
        .chain(noise.to_bits().to_le_bytes())
        .chain((trial as u64).to_le_bytes())
        .chain((scale as i64).to_le_bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed_base ^ h)
}

/// Clean data of one target seen by one array, for every simulated scale.
#[derive(Debug, Clone)]
pub struct TargetData {
    pub datasets: BTreeMap<i32, MSRDataset>,
    pub operator: ForwardOperator,
}

/// Simulates the moved target with the time-stepping solver. The reference
/// point of the expansion is the target's centroid.
pub fn simulate_target(
    target: &TargetSpec,
    acquisition: &AcquisitionSpec,
    panels: usize,
    duration: f64,
    samples: usize,
    scales: &[i32],
) -> Result<TargetData> {
    let mesh = apply_motion(&make_shape_id(target.shape, panels)?, &target.motion)?;
    let spec = AcquisitionSpec {
        z: [mesh.centroid.x, mesh.centroid.y],
        ..*acquisition
    };
    let config = build_array(&spec)?;
    let operator = build_forward_operator(&config, 1)?;
    let base = crate::pulse::base_pulse(duration, samples)?;
    let material = target.material();
    let mut datasets = BTreeMap::new();
    for &j in scales {
        let pulse = base.dilate(j)?;
        datasets.insert(j, simulate_msr(&mesh, &material, &config, &pulse)?);
    }
    Ok(TargetData { datasets, operator })
}

/// Reconstructed tensor series of one noisy trial, keyed by scale.
pub fn reconstruct_trial(
    data: &TargetData,
    seed_base: u64,
    label: &str,
    noise: f64,
    trial: usize,
) -> Result<BTreeMap<i32, PTSeries>> {
    data.datasets
        .iter()
        .map(|(&j, clean)| {
            let noisy = add_noise(clean, noise, trial_seed(seed_base, label, noise, trial, j))?;
            Ok((j, reconstruct_pt(&noisy, &data.operator)?.series))
        })
        .collect()
}

/// Ranks the dictionary for one set of reconstructed series.
pub fn identify(series: &BTreeMap<i32, PTSeries>, dict: &Dictionary) -> Result<Vec<MatchResult>> {
    let mut d = compute_descriptor(series, &dict.settings.scales)?;
    d.fingerprint = dict.settings_fingerprint.clone();
    match_descriptor(&d, dict)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub target: String,
    pub noise_level: f64,
    pub aperture: f64,
    pub scales: Vec<i32>,
    pub trials: usize,
    pub successes: usize,
    pub success_probability: f64,
    /// Mean distance to each dictionary entry, in dictionary order.
    pub mean_distance: Vec<f64>,
    pub std_distance: Vec<f64>,
}

impl ReportRow {
    /// Standard error of the success probability.
    pub fn binomial_error(&self) -> f64 {
        let p = self.success_probability;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub plan_name: String,
    pub plan_fingerprint: String,
    pub dictionary_fingerprint: String,
    pub dictionary_names: Vec<String>,
    /// Success probability of a uniform random guess.
    pub random_guess: f64,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, target: &str, aperture: f64, noise: f64, scales: &[i32]) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.target == target && r.aperture == aperture && r.noise_level == noise && r.scales == scales)
    }

    /// Mean success probability over targets at one setting.
    pub fn mean_success(&self, aperture: f64, noise: f64, scales: &[i32]) -> Option<f64> {
        let rows: Vec<&ReportRow> = self
            .rows
            .iter()
            .filter(|r| r.aperture == aperture && r.noise_level == noise && r.scales == scales)
            .collect();
        if rows.is_empty() {
            return None;
        }
        Some(rows.iter().map(|r| r.success_probability).sum::<f64>() / rows.len() as f64)
    }
}

/// Report plus the wall-clock metadata that is excluded from replay checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub runtime_seconds: f64,
}

/// Per-trial outcome for every scale set.
struct TrialOutcome {
    distances: Vec<Vec<f64>>,
    success: Vec<bool>,
}

fn run_trial(
    data: &TargetData,
    dicts: &[Dictionary],
    plan: &ExperimentPlan,
    target: &TargetSpec,
    noise: f64,
    trial: usize,
) -> Result<TrialOutcome> {
    let series = reconstruct_trial(data, plan.seed_base, &target.name, noise, trial)?;
    let mut distances = Vec::with_capacity(dicts.len());
    let mut success = Vec::with_capacity(dicts.len());
    for dict in dicts {
        let ranking = identify(&series, dict)?;
        success.push(best_match(&ranking) == Some(target.name.as_str()));
        let by_name: BTreeMap<&str, f64> = ranking.iter().map(|m| (m.name.as_str(), m.distance)).collect();
        distances.push(dict.entries.iter().map(|e| by_name[e.name.as_str()]).collect());
    }
    Ok(TrialOutcome { distances, success })
}

fn aggregate(
    target: &TargetSpec,
    noise: f64,
    aperture: f64,
    scales: &[i32],
    set: usize,
    outcomes: &[TrialOutcome],
) -> ReportRow {
    let trials = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.success[set]).count();
    let entries = outcomes[0].distances[set].len();
    let mut mean = vec![0.0; entries];
    let mut sq = vec![0.0; entries];
    for o in outcomes {
        for (k, d) in o.distances[set].iter().enumerate() {
            mean[k] += d;
            sq[k] += d * d;
        }
    }
    let n = trials as f64;
    let std = mean
        .iter()
        .zip(&sq)
        .map(|(m, s)| {
            if trials < 2 {
                0.0
            } else {
                ((s - m * m / n) / (n - 1.0)).max(0.0).sqrt()
            }
        })
        .collect();
    ReportRow {
        target: target.name.clone(),
        noise_level: noise,
        aperture,
        scales: scales.to_vec(),
        trials,
        successes,
        success_probability: successes as f64 / n,
        mean_distance: mean.iter().map(|m| m / n).collect(),
        std_distance: std,
    }
}

/// Runs the plan against a prebuilt dictionary. Rows are ordered by
/// target, aperture, scale set and noise level, following the plan.
pub fn run_identification_with(plan: &ExperimentPlan, dict: &Dictionary) -> Result<ExperimentRun> {
    plan.validate()?;
    dict.verify()?;
    if dict.settings != plan.dictionary.settings || dict.panels != plan.dictionary.panels {
        return Err(Error::FingerprintMismatch {
            expected: plan.dictionary.settings.fingerprint()?,
            found: dict.settings_fingerprint.clone(),
        });
    }
    let start = Instant::now();
    let dicts = plan
        .scale_sets
        .iter()
        .map(|s| dict.restrict(s))
        .collect::<Result<Vec<_>>>()?;
    let scales = plan.simulated_scales();
    let settings = &plan.dictionary.settings;
    let mut rows = Vec::new();
    for target in &plan.targets {
        for &aperture in &plan.apertures {
            let acquisition = AcquisitionSpec {
                aperture,
                ..plan.acquisition
            };
            let data = simulate_target(
                target,
                &acquisition,
                plan.simulation_panels,
                settings.duration,
                settings.samples,
                &scales,
            )?;
            let mut per_level = Vec::with_capacity(plan.noise_levels.len());
            for &noise in &plan.noise_levels {
                let outcomes = exec::try_map_indexed(plan.trials, |trial| {
                    run_trial(&data, &dicts, plan, target, noise, trial)
                })?;
                per_level.push(outcomes);
            }
            for (set, s) in plan.scale_sets.iter().enumerate() {
                for (&noise, outcomes) in plan.noise_levels.iter().zip(&per_level) {
                    rows.push(aggregate(target, noise, aperture, s, set, outcomes));
                }
            }
        }
    }
    Ok(ExperimentRun {
        report: ExperimentReport {
            plan_name: plan.name.clone(),
            plan_fingerprint: plan.fingerprint()?,
            dictionary_fingerprint: dict.fingerprint.clone(),
            dictionary_names: dict.names().iter().map(|s| s.to_string()).collect(),
            random_guess: 1.0 / dict.entries.len() as f64,
            rows,
        },
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Builds the plan's dictionary and runs it.
pub fn run_identification(plan: &ExperimentPlan) -> Result<ExperimentRun> {
    plan.validate()?;
    let dict = Dictionary::build(&plan.dictionary)?;
    run_identification_with(plan, &dict)
}

/// Success-probability curves over a noise grid.
pub fn run_noise_sweep(plan: &ExperimentPlan, dict: &Dictionary) -> Result<ExperimentRun> {
    if plan.noise_levels.len() < 2 {
        return Err(Error::InvalidArgument("a noise sweep needs at least two levels".into()));
    }
    run_identification_with(plan, dict)
}

/// Success curves for several scale sets on identical noise realizations.
pub fn run_scale_ablation(plan: &ExperimentPlan, dict: &Dictionary) -> Result<ExperimentRun> {
    if plan.scale_sets.len() < 2 {
        return Err(Error::InvalidArgument(
            "an ablation needs at least two scale sets".into(),
        ));
    }
    run_identification_with(plan, dict)
}

/// Everything needed to replay a run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub plan: ExperimentPlan,
    pub plan_fingerprint: String,
    pub dictionary_fingerprint: String,
    pub seed_scheme: String,
    pub parallel: bool,
    pub crate_version: String,
}

impl Manifest {
    pub fn new(plan: &ExperimentPlan, report: &ExperimentReport) -> Self {
        Self {
            plan: plan.clone(),
            plan_fingerprint: report.plan_fingerprint.clone(),
            dictionary_fingerprint: report.dictionary_fingerprint.clone(),
            seed_scheme: SEED_SCHEME.to_string(),
            parallel: exec::parallelism() == exec::Parallelism::Parallel,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}
