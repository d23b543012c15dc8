//! Task metrics and the batch evaluation harness.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::model::ArticulatedObject;
use crate::procgen::GeneratedObject;
use crate::policy::{rollout, FlowEstimator, GraspConstraints, ObservationMode, RolloutConfig, Termination};

/// Remaining fraction of the joint range: `|j_end − j_goal| / |j_goal − j_init|`.
pub fn normalized_distance(j_init: f64, j_end: f64, j_goal: f64) -> Result<f64> {
    let range = libm::fabs(j_goal - j_init);
    if !(range > 0.0) {
        return Err(Error::ZeroRange(alloc::format!("goal {j_goal} equals start {j_init}")));
    }
    Ok(libm::fabs(j_end - j_goal) / range)
}

pub fn success(e_goal: f64, delta: f64) -> bool {
    e_goal <= delta
}

/// An object entry of a suite. Objects that failed to load still produce
/// trials, all recorded as setup failures.
#[derive(Debug, Clone)]
pub struct SuiteObject {
    pub id: String,
    pub category: String,
    pub object: core::result::Result<ArticulatedObject, String>,
}

impl From<GeneratedObject> for SuiteObject {
    fn from(g: GeneratedObject) -> Self {
        Self { id: g.id, category: g.kind.category().to_string(), object: Ok(g.object) }
    }
}

impl SuiteObject {
    pub fn new(id: impl Into<String>, category: impl Into<String>, object: ArticulatedObject) -> Self {
        Self { id: id.into(), category: category.into(), object: Ok(object) }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NamedEstimator {
    pub label: String,
    pub estimator: FlowEstimator,
}

impl NamedEstimator {
    pub fn new(label: impl Into<String>, estimator: FlowEstimator) -> Self {
        Self { label: label.into(), estimator }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SuiteConfig {
    pub rollout: RolloutConfig,
    pub constraints: GraspConstraints,
    pub modes: Vec<ObservationMode>,
    pub repetitions: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            rollout: RolloutConfig::default(),
            constraints: GraspConstraints::default(),
            modes: alloc::vec![ObservationMode::full(), ObservationMode::camera()],
            repetitions: 1,
        }
    }
}

/// One unit of work. `seed` drives observation sampling and is shared by
/// every estimator on the same (object, joint, mode, repetition) so
/// estimators are compared on identical observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub index: usize,
    pub object_index: usize,
    pub joint_id: String,
    pub estimator_index: usize,
    pub mode_index: usize,
    pub repetition: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialRecord {
    pub index: usize,
    pub object_id: String,
    pub category: String,
    pub joint_id: String,
    pub estimator: String,
    pub mode: String,
    pub repetition: usize,
    pub seed: u64,
    pub e_goal: f64,
    pub success: bool,
    pub steps: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CategorySummary {
    pub category: String,
    pub trials: usize,
    pub mean_e_goal: f64,
    pub success_rate: f64,
}

/// Aggregates for one (estimator, observation mode) pair.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockSummary {
    pub estimator: String,
    pub mode: String,
    pub categories: Vec<CategorySummary>,
    pub trials: usize,
    pub mean_e_goal: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SuiteReport {
    pub suite_seed: u64,
    pub config: SuiteConfig,
    pub estimators: Vec<NamedEstimator>,
    pub blocks: Vec<BlockSummary>,
    pub trials: Vec<TrialRecord>,
}

impl SuiteReport {
    pub fn block(&self, estimator: &str, mode: &str) -> Option<&BlockSummary> {
        self.blocks.iter().find(|b| b.estimator == estimator && b.mode == mode)
    }
}

/// Every trial of the suite in canonical order: object, joint, mode,
/// repetition, estimator.
pub fn plan_trials(
    objects: &[SuiteObject],
    estimators: &[NamedEstimator],
    config: &SuiteConfig,
    suite_seed: u64,
) -> Result<Vec<TrialSpec>> {
    if objects.is_empty() || estimators.is_empty() || config.modes.is_empty() || config.repetitions == 0 {
        return Err(Error::InvalidArgument("suite needs objects, estimators, modes and repetitions".to_string()));
    }
    let mut labels: Vec<&str> = estimators.iter().map(|e| e.label.as_str()).collect();
    labels.sort_unstable();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("estimator labels must be unique".to_string()));
    }
    let mut out = Vec::new();
    for (oi, obj) in objects.iter().enumerate() {
        let joints: Vec<String> = match &obj.object {
            Ok(o) => o.joints().iter().map(|j| j.id.clone()).collect(),
            Err(_) => alloc::vec![String::new()],
        };
        let joints = if joints.is_empty() { alloc::vec![String::new()] } else { joints };
        for (ji, joint) in joints.iter().enumerate() {
            for mi in 0..config.modes.len() {
                for rep in 0..config.repetitions {
                    let seed = derive_seed(suite_seed, &[oi as u64, ji as u64, mi as u64, rep as u64]);
                    for ei in 0..estimators.len() {
                        out.push(TrialSpec {
                            index: out.len(),
                            object_index: oi,
                            joint_id: joint.clone(),
                            estimator_index: ei,
                            mode_index: mi,
                            repetition: rep,
                            seed,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn run_trial(objects: &[SuiteObject], estimators: &[NamedEstimator], config: &SuiteConfig, spec: &TrialSpec) -> TrialRecord {
    let entry = &objects[spec.object_index];
    let named = &estimators[spec.estimator_index];
    let mode = config.modes[spec.mode_index];
    let outcome = entry.object.as_ref().map_err(|_| ()).and_then(|obj| {
        let estimator = named.estimator.reseeded(derive_seed(spec.seed, &[u64::MAX]));
        rollout(obj, &obj.lower_state(), &spec.joint_id, &estimator, mode, &config.rollout, &config.constraints, spec.seed)
            .map_err(|_| ())
    });
    let (e_goal, ok, steps, termination) = match outcome {
        Ok(r) => (r.e_goal, r.success, r.steps_used, r.termination),
        Err(()) => (1.0, false, 0, Termination::SetupFailed),
    };
    TrialRecord {
        index: spec.index,
        object_id: entry.id.clone(),
        category: entry.category.clone(),
        joint_id: spec.joint_id.clone(),
        estimator: named.label.clone(),
        mode: mode.name().to_string(),
        repetition: spec.repetition,
        seed: spec.seed,
        e_goal,
        success: ok,
        steps,
        termination,
    }
}

/// Builds the report from raw records in any order.
pub fn aggregate(mut records: Vec<TrialRecord>, estimators: &[NamedEstimator], config: &SuiteConfig, suite_seed: u64) -> SuiteReport {
    records.sort_by_key(|r| r.index);
    let mut blocks = Vec::new();
    for est in estimators {
        let mut seen_modes: Vec<&str> = Vec::new();
        for mode in &config.modes {
            let mode = mode.name();
            if seen_modes.contains(&mode) {
                continue;
            }
            seen_modes.push(mode);
            let members: Vec<&TrialRecord> = records.iter().filter(|r| r.estimator == est.label && r.mode == mode).collect();
            let mut by_cat: BTreeMap<&str, Vec<&TrialRecord>> = BTreeMap::new();
            for r in &members {
                by_cat.entry(r.category.as_str()).or_default().push(r);
            }
            let categories = by_cat
                .into_iter()
                .map(|(c, rs)| {
                    let (mean_e_goal, success_rate) = means(&rs);
                    CategorySummary { category: c.to_string(), trials: rs.len(), mean_e_goal, success_rate }
                })
                .collect();
            let (mean_e_goal, success_rate) = means(&members);
            blocks.push(BlockSummary {
                estimator: est.label.clone(),
                mode: mode.to_string(),
                categories,
                trials: members.len(),
                mean_e_goal,
                success_rate,
            });
        }
    }
    SuiteReport { suite_seed, config: config.clone(), estimators: estimators.to_vec(), blocks, trials: records }
}

fn means(rs: &[&TrialRecord]) -> (f64, f64) {
    if rs.is_empty() {
        return (0.0, 0.0);
    }
    let n = rs.len() as f64;
    let e = rs.iter().map(|r| r.e_goal).sum::<f64>() / n;
    let s = rs.iter().filter(|r| r.success).count() as f64 / n;
    (e, s)
}

/// Sequential suite run. The companion crate provides a parallel driver
/// with identical output.
pub fn run_suite(
    objects: &[SuiteObject],
    estimators: &[NamedEstimator],
    config: &SuiteConfig,
    suite_seed: u64,
) -> Result<SuiteReport> {
    let plan = plan_trials(objects, estimators, config, suite_seed)?;
    let records = plan.iter().map(|t| run_trial(objects, estimators, config, t)).collect();
    Ok(aggregate(records, estimators, config, suite_seed))
}
