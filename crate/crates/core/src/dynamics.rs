//! Idealized force analysis for a single 1-DoF articulation and the
//! quasi-static contact integrator used by rollouts.

use alloc::string::ToString;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::flow::{vector_angle, MIN_RADIUS};
use crate::geom::PointCloud;
use crate::model::{joint_screw, ArticulatedObject, JointKind, JointState};

pub const DEFAULT_BREAK_ANGLE: f64 = core::f64::consts::FRAC_PI_3;

/// A force applied at a point on the child surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedForce {
    pub point: Point3<f64>,
    pub force: Vector3<f64>,
}

impl AppliedForce {
    pub fn new(point: Point3<f64>, force: Vector3<f64>, budget: f64) -> Result<Self> {
        if !(force.norm() <= budget + 1e-9) {
            return Err(Error::InvalidArgument(alloc::format!("force norm {} exceeds budget {budget}", force.norm())));
        }
        Ok(Self { point, force })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContactState {
    pub attached: bool,
    /// Contact point in the child link frame.
    pub contact_point_local: Point3<f64>,
    /// Largest deviation seen so far between a commanded displacement and
    /// the feasible motion direction.
    pub break_angle: f64,
}

impl ContactState {
    pub fn attached_at(contact_point_local: Point3<f64>) -> Self {
        Self { attached: true, contact_point_local, break_angle: 0.0 }
    }
}

fn check_unit(v: &Vector3<f64>, what: &str) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(alloc::format!("{what} must be a unit vector, norm {}", v.norm())));
    }
    Ok(())
}

/// Net force along a prismatic axis: `(F·v) v`.
pub fn net_force_prismatic(force: &Vector3<f64>, v: &Vector3<f64>) -> Result<Vector3<f64>> {
    check_unit(v, "prismatic axis")?;
    Ok(v * force.dot(v))
}

/// Net force at radius `r` from a revolute axis `ω`, after the radial and
/// axial components are resisted: `F − (F·r/‖r‖²) r − (F·ω) ω`.
pub fn net_force_revolute(force: &Vector3<f64>, r: &Vector3<f64>, omega: &Vector3<f64>) -> Result<Vector3<f64>> {
    check_unit(omega, "rotation axis")?;
    let rn2 = r.norm_squared();
    if rn2 < MIN_RADIUS * MIN_RADIUS {
        return Err(Error::DegenerateGeometry("contact point lies on the rotation axis".to_string()));
    }
    if r.dot(omega).abs() > 1e-9 * r.norm().max(1.0) {
        return Err(Error::InvalidArgument("radius vector must be perpendicular to the axis".to_string()));
    }
    Ok(force - r * (force.dot(r) / rn2) - omega * force.dot(omega))
}

/// Contact point index and force that maximize the child's acceleration
/// under a force budget `c`.
///
/// Prismatic joints take the lowest-index child point with `F* = c·v`.
/// Revolute joints take the child point farthest from the axis (lowest index
/// on ties) with `F*` along `ω × r`.
pub fn optimal_contact(
    obj: &ArticulatedObject,
    state: &JointState,
    cloud: &PointCloud,
    target_joint: &str,
    c: f64,
) -> Result<(usize, Vector3<f64>)> {
    let child = obj.child_link(target_joint)?;
    let axis = joint_screw(obj, state, target_joint)?;
    let mask = cloud.link_mask(child);
    let mut candidates = mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i);
    match axis.kind {
        JointKind::Prismatic => {
            let i = candidates.next().ok_or(Error::ContactFailed)?;
            Ok((i, axis.direction.into_inner() * c))
        }
        JointKind::Revolute => {
            let mut best: Option<(usize, f64)> = None;
            for i in candidates {
                let r = axis.radius_vector(&cloud.points()[i]).norm();
                if best.map_or(true, |(_, b)| r > b) {
                    best = Some((i, r));
                }
            }
            let (i, r) = best.ok_or(Error::ContactFailed)?;
            if r < MIN_RADIUS {
                return Err(Error::DegenerateGeometry("all child points lie on the rotation axis".to_string()));
            }
            let t = axis.direction.cross(&axis.radius_vector(&cloud.points()[i]));
            Ok((i, t.normalize() * c))
        }
    }
}

/// Advances the target joint by projecting a commanded gripper displacement
/// onto the feasible direction at the contact.
///
/// Prismatic: `Δq = Δx·v`. Revolute: `Δq = (Δx·t̂)/‖r‖` with the tangent `t̂`
/// evaluated at the current contact position. The contact breaks, leaving
/// the state unchanged, when `Δx` deviates from the feasible direction by
/// more than `break_threshold`.
pub fn step_articulation(
    obj: &ArticulatedObject,
    state: &JointState,
    target_joint: &str,
    contact: &ContactState,
    displacement: &Vector3<f64>,
    break_threshold: f64,
) -> Result<(JointState, ContactState)> {
    if !contact.attached {
        return Err(Error::InvalidArgument("contact is not attached".to_string()));
    }
    let joint = obj.joint(target_joint)?;
    let axis = joint_screw(obj, state, target_joint)?;
    let poses = obj.link_poses(state)?;
    let child_pose = poses[obj.link_position(&joint.child_link).expect("validated")];
    let p = child_pose * contact.contact_point_local;
    let (dir, radius) = match joint.kind {
        JointKind::Prismatic => (axis.direction.into_inner(), 1.0),
        JointKind::Revolute => {
            let r = axis.radius_vector(&p);
            if r.norm() < MIN_RADIUS {
                return Err(Error::DegenerateGeometry("contact point lies on the rotation axis".to_string()));
            }
            (axis.direction.cross(&r).normalize(), r.norm())
        }
    };
    let q = state.get(target_joint).expect("validated");
    if displacement.norm() == 0.0 {
        return Ok((state.clone(), *contact));
    }
    let deviation = vector_angle(displacement, &dir);
    let mut next_contact = *contact;
    next_contact.break_angle = contact.break_angle.max(deviation);
    if deviation > break_threshold {
        next_contact.attached = false;
        return Ok((state.clone(), next_contact));
    }
    let dq = displacement.dot(&dir) / radius;
    Ok((state.with(target_joint, joint.clamp(q + dq)), next_contact))
}
