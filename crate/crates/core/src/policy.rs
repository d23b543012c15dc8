//! Flow-following manipulation: pluggable flow estimators, contact and
//! direction selection, and the two-phase grasp-then-articulate rollout.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{Point3, Unit, UnitQuaternion, Vector3};
use rand::Rng;

use crate::camera::{backproject, render_depth, CameraModel, CameraPlacement};
use crate::dynamics::{step_articulation, ContactState, DEFAULT_BREAK_ANGLE};
use crate::error::{Error, Result};
use crate::eval::{normalized_distance, success};
use crate::flow::{flow_from_screw, gt_flow, FlowField};
use crate::geom::{
    detect_edges, estimate_gaussian_curvature, normals_at, sample_surface, PointCloud, DEFAULT_ANGLE_GAP,
    DEFAULT_NEIGHBORS,
};
use crate::kdtree::KdTree;
use crate::model::{joint_screw, ArticulatedObject, JointState, ScrewAxis};
use crate::{derive_seed, seeded_rng};

/// Flows weaker than this are treated as no estimate at all.
pub const MIN_FLOW: f64 = 1e-6;

/// Error injected into the true screw axis by the screw-parameter baseline.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScrewPerturbation {
    /// Tilt of the axis direction, radians.
    pub direction_angle: f64,
    /// Displacement of the axis origin, meters.
    pub origin_offset: f64,
    /// Chooses the tilt plane and offset direction.
    pub seed: u64,
}

impl ScrewPerturbation {
    pub fn is_zero(&self) -> bool {
        self.direction_angle == 0.0 && self.origin_offset == 0.0
    }

    /// Tilts the direction by `direction_angle` about a seeded line through
    /// `pivot` perpendicular to the axis, then shifts the axis by
    /// `origin_offset` along a seeded unit vector. `pivot` should lie on the
    /// axis; the returned origin is the moved pivot.
    pub fn apply(&self, axis: &ScrewAxis, pivot: Point3<f64>) -> ScrewAxis {
        if self.is_zero() {
            return *axis;
        }
        let mut rng = seeded_rng(self.seed);
        let d = axis.direction.into_inner();
        let tilt_axis = loop {
            let v = random_unit(&mut rng);
            if let Some(u) = Unit::try_new(v - d * v.dot(&d), 1e-6) {
                break u;
            }
        };
        let offset = random_unit(&mut rng) * self.origin_offset;
        ScrewAxis {
            kind: axis.kind,
            direction: UnitQuaternion::from_axis_angle(&tilt_axis, self.direction_angle) * axis.direction,
            origin: pivot + offset,
        }
    }
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()) * 2.0 - Vector3::repeat(1.0);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FlowEstimator {
    /// Ground-truth flow from the true joint.
    OracleGt,
    /// Camera-facing surface normals used as flow; contact from ground truth.
    NormalDirection,
    /// Flow generated from a perturbed true screw axis.
    ScrewParameters(ScrewPerturbation),
}

impl FlowEstimator {
    pub fn kind_name(&self) -> &'static str {
        match self {
            FlowEstimator::OracleGt => "oracle",
            FlowEstimator::NormalDirection => "normal",
            FlowEstimator::ScrewParameters(_) => "screw",
        }
    }

    /// Same estimator with its random choices reseeded.
    pub fn reseeded(&self, seed: u64) -> Self {
        match *self {
            FlowEstimator::ScrewParameters(p) => FlowEstimator::ScrewParameters(ScrewPerturbation { seed, ..p }),
            other => other,
        }
    }
}

/// Points of `cloud` that belong to the target part: the part mask when
/// present, else the child-link labels, else everything.
fn target_mask(obj: &ArticulatedObject, cloud: &PointCloud, target_joint: &str) -> Result<Vec<bool>> {
    if let Some(m) = cloud.part_mask() {
        return Ok(m.to_vec());
    }
    if cloud.link_labels().is_some() {
        return Ok(cloud.link_mask(obj.child_link(target_joint)?));
    }
    Ok(alloc::vec![true; cloud.len()])
}

pub fn estimate_flow(
    estimator: &FlowEstimator,
    obj: &ArticulatedObject,
    state: &JointState,
    cloud: &PointCloud,
    target_joint: &str,
) -> Result<FlowField> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    match estimator {
        FlowEstimator::OracleGt => gt_flow(obj, state, cloud, target_joint),
        FlowEstimator::NormalDirection => {
            let view = cloud
                .sensor_origin()
                .ok_or_else(|| Error::InvalidArgument("normal estimation needs a sensor origin".to_string()))?;
            if cloud.len() <= 3 {
                return Err(Error::InvalidArgument("too few points for normal estimation".to_string()));
            }
            let mask = target_mask(obj, cloud, target_joint)?;
            let which: Vec<usize> = (0..cloud.len()).filter(|&i| mask[i]).collect();
            let k = DEFAULT_NEIGHBORS.min(cloud.len() - 1);
            let (normals, _) = normals_at(cloud.points(), &KdTree::new(cloud.points()), &which, k, view);
            let mut vectors = alloc::vec![Vector3::zeros(); cloud.len()];
            for (&i, n) in which.iter().zip(normals) {
                vectors[i] = n;
            }
            FlowField::new(vectors, target_joint)
        }
        FlowEstimator::ScrewParameters(p) => {
            let axis = joint_screw(obj, state, target_joint)?;
            let mask = target_mask(obj, cloud, target_joint)?;
            // Tilt about the axis point nearest the observed part, which is
            // where an axis predicted from the part would be anchored.
            let (sum, n) = cloud.points().iter().zip(&mask).filter(|(_, m)| **m).fold((Vector3::zeros(), 0usize), |(s, n), (p, _)| (s + p.coords, n + 1));
            let pivot = if n == 0 {
                axis.origin
            } else {
                let c = Point3::from(sum / n as f64);
                axis.origin + axis.direction.into_inner() * (c - axis.origin).dot(&axis.direction)
            };
            let axis = p.apply(&axis, pivot);
            FlowField::new(flow_from_screw(&axis, cloud.points(), &mask)?, target_joint)
        }
    }
}

/// Suction feasibility limits for contact selection.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GraspConstraints {
    /// Minimum distance to any edge or high-curvature point, meters.
    pub edge_clearance: f64,
    /// Largest acceptable Gaussian curvature, 1/m².
    pub curvature_max: f64,
    pub neighbor_k: usize,
}

impl Default for GraspConstraints {
    fn default() -> Self {
        Self { edge_clearance: 0.02, curvature_max: 500.0, neighbor_k: DEFAULT_NEIGHBORS }
    }
}

impl GraspConstraints {
    pub fn validate(&self) -> Result<()> {
        if !(self.edge_clearance > 0.0 && self.curvature_max > 0.0 && self.neighbor_k >= 6) {
            return Err(Error::InvalidArgument(alloc::format!("invalid grasp constraints {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GraspCandidate {
    pub index: usize,
    pub position: Point3<f64>,
    pub flow: Vector3<f64>,
}

/// Points allowed as suction contacts: not an edge, curvature at most
/// `curvature_max`, and farther than `edge_clearance` from every point that
/// fails either test.
pub fn feasible_contacts(
    cloud: &PointCloud,
    constraints: &GraspConstraints,
    edge_flags: &[bool],
    curvature: &[f64],
) -> Result<Vec<bool>> {
    let n = cloud.len();
    for len in [edge_flags.len(), curvature.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, found: len });
        }
    }
    let violating: Vec<bool> = (0..n).map(|i| edge_flags[i] || !(curvature[i] <= constraints.curvature_max)).collect();
    let bad: Vec<Point3<f64>> = (0..n).filter(|&i| violating[i]).map(|i| cloud.points()[i]).collect();
    let tree = KdTree::new(&bad);
    Ok((0..n)
        .map(|i| {
            !violating[i] && tree.nearest_distance(&cloud.points()[i]).map_or(true, |d| d > constraints.edge_clearance)
        })
        .collect())
}

/// Highest-flow feasible point, lowest index on ties.
pub fn select_contact(
    cloud: &PointCloud,
    flow: &FlowField,
    constraints: &GraspConstraints,
    edge_flags: &[bool],
    curvature: &[f64],
) -> Result<GraspCandidate> {
    if flow.len() != cloud.len() {
        return Err(Error::LengthMismatch { expected: cloud.len(), found: flow.len() });
    }
    let feasible = feasible_contacts(cloud, constraints, edge_flags, curvature)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in flow.vectors().iter().enumerate() {
        let m = v.norm();
        if feasible[i] && best.map_or(true, |(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    let (index, _) = best.ok_or(Error::ContactFailed)?;
    Ok(GraspCandidate { index, position: cloud.points()[index], flow: flow.vectors()[index] })
}

/// Relative tolerance under which flow magnitudes count as tied.
const MAGNITUDE_TIE: f64 = 1e-9;

/// Unit direction of the strongest flow within `contact_radius` of the
/// contact. Magnitudes equal to within a relative 1e-9 are tied and go to
/// the point nearest the contact, then the lowest index. The contact point
/// itself need not be in the cloud.
pub fn select_direction(
    cloud: &PointCloud,
    flow: &FlowField,
    contact_position: &Point3<f64>,
    contact_radius: f64,
) -> Result<Unit<Vector3<f64>>> {
    if flow.len() != cloud.len() {
        return Err(Error::LengthMismatch { expected: cloud.len(), found: flow.len() });
    }
    let r2 = contact_radius * contact_radius;
    let near: Vec<(usize, f64, f64)> = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p - contact_position).norm_squared()))
        .filter(|&(_, d2)| d2 <= r2)
        .map(|(i, d2)| (i, flow.vectors()[i].norm(), d2))
        .collect();
    let top = near.iter().map(|&(_, m, _)| m).fold(f64::NEG_INFINITY, f64::max);
    if near.is_empty() {
        return Err(Error::EstimatorDegenerate("no observed points near the contact".to_string()));
    }
    if top < MIN_FLOW {
        return Err(Error::EstimatorDegenerate("flow near the contact vanishes".to_string()));
    }
    let (i, _, _) = near
        .iter()
        .filter(|&&(_, m, _)| m >= top * (1.0 - MAGNITUDE_TIE))
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
        .copied()
        .expect("top is attained");
    Ok(Unit::new_normalize(flow.vectors()[i]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RolloutConfig {
    pub max_steps: usize,
    /// Gripper displacement per step, meters.
    pub step_size: f64,
    pub success_threshold: f64,
    pub contact_radius: f64,
    pub break_angle: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self { max_steps: 50, step_size: 0.01, success_threshold: 0.1, contact_radius: 0.05, break_angle: DEFAULT_BREAK_ANGLE }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_steps > 0
            && self.step_size > 0.0
            && self.success_threshold > 0.0
            && self.success_threshold < 1.0
            && self.contact_radius > 0.0
            && self.break_angle > 0.0;
        if !ok {
            return Err(Error::InvalidArgument(alloc::format!("invalid rollout config {self:?}")));
        }
        Ok(())
    }
}

/// How the policy observes the scene.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ObservationMode {
    /// Area-uniform samples over every surface, occluded or not. The
    /// placement only supplies the sensor origin used to orient normals.
    Full { points: usize, placement: CameraPlacement },
    /// Back-projected depth render from a fixed camera.
    Camera { placement: CameraPlacement, stride: u32 },
}

impl ObservationMode {
    pub fn full() -> Self {
        ObservationMode::Full { points: 12_000, placement: CameraPlacement::default() }
    }

    pub fn camera() -> Self {
        ObservationMode::Camera { placement: CameraPlacement::default(), stride: 2 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObservationMode::Full { .. } => "full",
            ObservationMode::Camera { .. } => "camera",
        }
    }

    fn placement(&self) -> &CameraPlacement {
        match self {
            ObservationMode::Full { placement, .. } | ObservationMode::Camera { placement, .. } => placement,
        }
    }
}

/// Observation source fixed for one episode; the camera is placed once
/// from the initial state.
#[derive(Debug, Clone)]
pub struct Observer {
    mode: ObservationMode,
    camera: CameraModel,
    seed: u64,
}

impl Observer {
    pub fn new(obj: &ArticulatedObject, initial: &JointState, mode: ObservationMode, seed: u64) -> Result<Self> {
        if let ObservationMode::Full { points: 0, .. } = mode {
            return Err(Error::InvalidArgument("full observation needs at least one point".to_string()));
        }
        let camera = mode.placement().camera_for(obj, initial)?;
        Ok(Self { mode, camera, seed })
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    /// Labeled cloud with the part mask of `target_joint`'s child and the
    /// camera center as sensor origin.
    pub fn observe(&self, obj: &ArticulatedObject, state: &JointState, target_joint: &str, step: usize) -> Result<PointCloud> {
        let cloud = match self.mode {
            ObservationMode::Full { points, .. } => {
                sample_surface(obj, state, points, derive_seed(self.seed, &[step as u64]))?.with_sensor_origin(self.camera.eye())
            }
            ObservationMode::Camera { stride, .. } => backproject(&render_depth(obj, state, &self.camera)?, &self.camera, stride)?,
        };
        let mask = cloud.link_mask(obj.child_link(target_joint)?);
        cloud.with_mask(mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Termination {
    Success,
    MaxSteps,
    ContactLost,
    ContactFailed,
    EstimatorDegenerate,
    /// The trial could not start (load failure, invalid joint or state).
    SetupFailed,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Success => "success",
            Termination::MaxSteps => "max_steps",
            Termination::ContactLost => "contact_lost",
            Termination::ContactFailed => "contact_failed",
            Termination::EstimatorDegenerate => "estimator_degenerate",
            Termination::SetupFailed => "setup_failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Termination::Success,
            Termination::MaxSteps,
            Termination::ContactLost,
            Termination::ContactFailed,
            Termination::EstimatorDegenerate,
            Termination::SetupFailed,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RolloutResult {
    /// Initial state followed by the state after every executed step.
    pub states: Vec<JointState>,
    pub e_goal: f64,
    pub success: bool,
    pub steps_used: usize,
    pub termination: Termination,
    /// World contact position chosen in the grasp phase.
    pub contact: Option<Point3<f64>>,
}

/// Per-step observation handed to a custom estimator.
pub struct StepObservation<'a> {
    pub step: usize,
    pub state: &'a JointState,
    pub cloud: &'a PointCloud,
}

/// Runs one episode from `initial` towards the upper limit of
/// `target_joint`. Runtime failures end the episode with a termination
/// reason; only invalid inputs are errors.
pub fn rollout(
    obj: &ArticulatedObject,
    initial: &JointState,
    target_joint: &str,
    estimator: &FlowEstimator,
    mode: ObservationMode,
    config: &RolloutConfig,
    constraints: &GraspConstraints,
    seed: u64,
) -> Result<RolloutResult> {
    let contact_source = match estimator {
        FlowEstimator::NormalDirection => ContactSource::GroundTruth,
        _ => ContactSource::Estimate,
    };
    rollout_with(obj, initial, target_joint, mode, config, constraints, seed, contact_source, &mut |o| {
        estimate_flow(estimator, obj, o.state, o.cloud, target_joint)
    })
}

/// Which flow drives contact selection in the grasp phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactSource {
    Estimate,
    GroundTruth,
}

/// [`rollout`] with an arbitrary estimator callback.
#[allow(clippy::too_many_arguments)]
pub fn rollout_with(
    obj: &ArticulatedObject,
    initial: &JointState,
    target_joint: &str,
    mode: ObservationMode,
    config: &RolloutConfig,
    constraints: &GraspConstraints,
    seed: u64,
    contact_source: ContactSource,
    estimate: &mut dyn FnMut(&StepObservation<'_>) -> Result<FlowField>,
) -> Result<RolloutResult> {
    config.validate()?;
    constraints.validate()?;
    initial.validate(obj)?;
    let joint = obj.joint(target_joint)?.clone();
    let q_init = initial.get(target_joint).expect("validated");
    let q_goal = joint.upper;
    if q_goal == q_init {
        return Err(Error::ZeroRange(target_joint.to_string()));
    }
    let child = obj.link_position(&joint.child_link).expect("validated");
    let observer = Observer::new(obj, initial, mode, seed)?;

    let mut states = alloc::vec![initial.clone()];
    let finish = |states: Vec<JointState>, steps_used, termination, contact| {
        let q_end = states.last().and_then(|s: &JointState| s.get(target_joint)).unwrap_or(q_init);
        let e_goal = normalized_distance(q_init, q_end, q_goal).expect("nonzero range");
        Ok(RolloutResult { states, e_goal, success: success(e_goal, config.success_threshold), steps_used, termination, contact })
    };

    // Grasp selection.
    let cloud = match observer.observe(obj, initial, target_joint, 0) {
        Ok(c) if !c.is_empty() => c,
        _ => return finish(states, 0, Termination::ContactFailed, None),
    };
    let flow = match estimate(&StepObservation { step: 0, state: initial, cloud: &cloud }) {
        Ok(f) if f.len() == cloud.len() && f.max_magnitude() >= MIN_FLOW => f,
        _ => return finish(states, 0, Termination::EstimatorDegenerate, None),
    };
    let contact_flow = match contact_source {
        ContactSource::Estimate => flow.clone(),
        ContactSource::GroundTruth => match gt_flow(obj, initial, &cloud, target_joint) {
            Ok(f) => f,
            Err(_) => return finish(states, 0, Termination::ContactFailed, None),
        },
    };
    let k = constraints.neighbor_k;
    let candidate = detect_edges(&cloud, k, DEFAULT_ANGLE_GAP).and_then(|edges| {
        let curvature = estimate_gaussian_curvature(&cloud, k)?;
        select_contact(&cloud, &contact_flow, constraints, &edges, &curvature)
    });
    let candidate = match candidate {
        Ok(c) if cloud.link_labels().map_or(false, |l| l[c.index] == joint.child_link) => c,
        _ => return finish(states, 0, Termination::ContactFailed, None),
    };
    let local = obj.link_poses(initial)?[child].inverse() * candidate.position;
    let mut contact = ContactState::attached_at(local);

    // Articulation.
    let mut state = initial.clone();
    let mut observation = Some((cloud, flow));
    for step in 1..=config.max_steps {
        let (cloud, flow) = match observation.take() {
            Some(o) => o,
            None => {
                let Ok(cloud) = observer.observe(obj, &state, target_joint, step) else {
                    return finish(states, step - 1, Termination::EstimatorDegenerate, Some(candidate.position));
                };
                match estimate(&StepObservation { step, state: &state, cloud: &cloud }) {
                    Ok(f) if f.len() == cloud.len() => (cloud, f),
                    _ => return finish(states, step - 1, Termination::EstimatorDegenerate, Some(candidate.position)),
                }
            }
        };
        let contact_world = obj.link_poses(&state)?[child] * contact.contact_point_local;
        let Ok(dir) = select_direction(&cloud, &flow, &contact_world, config.contact_radius) else {
            return finish(states, step - 1, Termination::EstimatorDegenerate, Some(candidate.position));
        };
        let (next, next_contact) =
            step_articulation(obj, &state, target_joint, &contact, &(dir.into_inner() * config.step_size), config.break_angle)?;
        if !next_contact.attached {
            return finish(states, step - 1, Termination::ContactLost, Some(candidate.position));
        }
        state = next;
        contact = next_contact;
        states.push(state.clone());
        let q = state.get(target_joint).expect("validated");
        if success(normalized_distance(q_init, q, q_goal)?, config.success_threshold) {
            return finish(states, step, Termination::Success, Some(candidate.position));
        }
    }
    finish(states, config.max_steps, Termination::MaxSteps, Some(candidate.position))
}
