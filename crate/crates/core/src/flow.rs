//! Articulation flow: the per-point direction of motion of a link under an
//! increase of one joint, scaled so the fastest observed point has unit
//! length.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix4, Point3, Vector3};

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::model::{joint_screw, ArticulatedObject, JointKind, JointState, ScrewAxis};

/// Radius below which every sampled child point is considered on the axis.
pub const MIN_RADIUS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    vectors: Vec<Vector3<f64>>,
    target_joint: String,
}

impl FlowField {
    pub fn new(vectors: Vec<Vector3<f64>>, target_joint: impl Into<String>) -> Result<Self> {
        if let Some(v) = vectors.iter().find(|v| !(v.norm() <= 1.0 + 1e-9)) {
            return Err(Error::InvalidArgument(alloc::format!("flow vector norm {} exceeds 1", v.norm())));
        }
        Ok(Self { vectors, target_joint: target_joint.into() })
    }

    pub fn zeros(n: usize, target_joint: impl Into<String>) -> Self {
        Self { vectors: alloc::vec![Vector3::zeros(); n], target_joint: target_joint.into() }
    }

    pub fn vectors(&self) -> &[Vector3<f64>] {
        &self.vectors
    }

    pub fn target_joint(&self) -> &str {
        &self.target_joint
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Checks the ground-truth contract against the points of `child_mask`:
    /// zero off the child, unit maximum on it when it is present.
    pub fn check_ground_truth(&self, child_mask: &[bool]) -> core::result::Result<(), String> {
        if child_mask.len() != self.vectors.len() {
            return Err("mask length mismatch".to_string());
        }
        let mut max_child = 0.0f64;
        for (v, &on) in self.vectors.iter().zip(child_mask) {
            let n = v.norm();
            if n > 1.0 + 1e-9 {
                return Err(alloc::format!("norm {n} above 1"));
            }
            if on {
                max_child = max_child.max(n);
            } else if n != 0.0 {
                return Err(alloc::format!("non-child point has flow of norm {n}"));
            }
        }
        if child_mask.iter().any(|&m| m) && max_child < 1.0 - 1e-6 {
            return Err(alloc::format!("child maximum {max_child} below 1"));
        }
        Ok(())
    }
}

/// Flow induced by `axis` on the masked points; zero elsewhere.
///
/// Prismatic points get the unit axis. Revolute points get `ω × r`
/// normalized by the largest `|ω × r|` among the masked points.
pub fn flow_from_screw(axis: &ScrewAxis, points: &[Point3<f64>], mask: &[bool]) -> Result<Vec<Vector3<f64>>> {
    if mask.len() != points.len() {
        return Err(Error::LengthMismatch { expected: points.len(), found: mask.len() });
    }
    let mut out = alloc::vec![Vector3::zeros(); points.len()];
    match axis.kind {
        JointKind::Prismatic => {
            for (o, _) in out.iter_mut().zip(mask).filter(|(_, m)| **m) {
                *o = axis.direction.into_inner();
            }
        }
        JointKind::Revolute => {
            let mut r_max = 0.0f64;
            for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
                let t = axis.direction.cross(&axis.radius_vector(&points[i]));
                r_max = r_max.max(t.norm());
                out[i] = t;
            }
            if mask.iter().any(|&m| m) {
                if r_max < MIN_RADIUS {
                    return Err(Error::DegenerateGeometry("all child points lie on the rotation axis".to_string()));
                }
                for v in &mut out {
                    *v /= r_max;
                }
            }
        }
    }
    Ok(out)
}

/// Ground-truth flow for `target_joint` on a labeled cloud.
pub fn gt_flow(obj: &ArticulatedObject, state: &JointState, cloud: &PointCloud, target_joint: &str) -> Result<FlowField> {
    let child = obj.child_link(target_joint)?;
    if cloud.link_labels().is_none() {
        return Err(Error::InvalidArgument("ground-truth flow needs link labels".to_string()));
    }
    let axis = joint_screw(obj, state, target_joint)?;
    let mask = cloud.link_mask(child);
    Ok(FlowField { vectors: flow_from_screw(&axis, cloud.points(), &mask)?, target_joint: target_joint.to_string() })
}

/// Finite-difference flow: displacement of each child point between the
/// configurations `q` and `q + δθ`, normalized by the largest displacement.
///
/// The displacement `T(q+δθ)·p − T(q)·p` is evaluated in difference form,
/// `R_joint · (M(q+δθ) − M(q)) · p_local`, with `M` the 4×4 joint motion built
/// from Rodrigues' formula. This avoids cancellation between nearly equal
/// world positions. When `q + δθ` leaves the limits, `−δθ` is used and the
/// result is negated so the flow still points towards increasing `q`.
pub fn fd_flow_oracle(
    obj: &ArticulatedObject,
    state: &JointState,
    cloud: &PointCloud,
    target_joint: &str,
    delta_theta: f64,
) -> Result<FlowField> {
    let joint = obj.joint(target_joint)?;
    if cloud.link_labels().is_none() {
        return Err(Error::InvalidArgument("finite-difference flow needs link labels".to_string()));
    }
    let q = state.get(target_joint).ok_or_else(|| Error::UnknownJoint(target_joint.to_string()))?;
    let step = if joint.contains(q + delta_theta) {
        delta_theta
    } else if joint.contains(q - delta_theta) {
        -delta_theta
    } else {
        return Err(Error::ZeroRange(target_joint.to_string()));
    };
    let frame = obj.joint_frame(state, target_joint)?;
    let child_pose = obj.link_poses(state)?[obj.link_position(&joint.child_link).expect("validated")];
    let inv = child_pose.inverse();
    let rot: Matrix3<f64> = frame.rotation.to_rotation_matrix().into_inner();

    let axis = joint.axis.into_inner();
    let diff: Matrix4<f64> = match joint.kind {
        // Linear in q: subtract the scalars first so every component sees
        // the same rounding.
        JointKind::Prismatic => {
            let mut m = Matrix4::zeros();
            m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(axis * ((q + step) - q)));
            m
        }
        JointKind::Revolute => motion_matrix(&axis, q + step) - motion_matrix(&axis, q),
    };
    let sign = if step < 0.0 { -1.0 } else { 1.0 };

    let mask = cloud.link_mask(&joint.child_link);
    let mut out = alloc::vec![Vector3::zeros(); cloud.len()];
    let mut max = 0.0f64;
    for (i, p) in cloud.points().iter().enumerate() {
        if !mask[i] {
            continue;
        }
        let local = inv * p;
        let d = rot * (diff * local.to_homogeneous()).xyz() * sign;
        max = max.max(d.norm());
        out[i] = d;
    }
    if mask.iter().any(|&m| m) {
        if !(max > 0.0) {
            return Err(Error::DegenerateGeometry("finite-difference displacement is zero".to_string()));
        }
        for v in &mut out {
            *v /= max;
        }
    }
    Ok(FlowField { vectors: out, target_joint: target_joint.to_string() })
}

/// Rodrigues rotation about the unit axis `a` as a homogeneous matrix.
fn motion_matrix(a: &Vector3<f64>, q: f64) -> Matrix4<f64> {
    let (s, c) = (libm::sin(q), libm::cos(q));
    let v = 1.0 - c;
    let (x, y, z) = (a.x, a.y, a.z);
    Matrix4::new(
        c + x * x * v, x * y * v - z * s, x * z * v + y * s, 0.0,
        y * x * v + z * s, c + y * y * v, y * z * v - x * s, 0.0,
        z * x * v - y * s, z * y * v + x * s, c + z * z * v, 0.0,
        0.0, 0.0, 0.0, 1.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowErrorReport {
    /// Per-point mean of `‖pred − gt‖₂`.
    pub mean_l2: f64,
    pub max_l2: f64,
    /// Mean of `1 − cos(pred, gt)` over points with `‖gt‖ > 1e-6`; a zero
    /// prediction counts as cosine 0.
    pub mean_cosine_distance: f64,
}

pub fn flow_error(pred: &FlowField, gt: &FlowField) -> Result<FlowErrorReport> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch { expected: gt.len(), found: pred.len() });
    }
    let n = gt.len().max(1) as f64;
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut cos_sum = 0.0;
    let mut cos_n = 0usize;
    for (p, g) in pred.vectors.iter().zip(&gt.vectors) {
        let e = (p - g).norm();
        sum += e;
        max = max.max(e);
        let gn = g.norm();
        if gn > 1e-6 {
            let pn = p.norm();
            let cos = if pn > 0.0 { (p.dot(g) / (pn * gn)).clamp(-1.0, 1.0) } else { 0.0 };
            cos_sum += 1.0 - cos;
            cos_n += 1;
        }
    }
    Ok(FlowErrorReport {
        mean_l2: sum / n,
        max_l2: max,
        mean_cosine_distance: if cos_n > 0 { cos_sum / cos_n as f64 } else { 0.0 },
    })
}

/// Angle between two vectors, 0 when both vanish.
pub fn vector_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    libm::atan2(a.cross(b).norm(), a.dot(b))
}
