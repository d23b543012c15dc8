//! Cross-check of closed-form flow against the finite-difference oracle.

use articflow_core::flow::{fd_flow_oracle, gt_flow, vector_angle};
use articflow_core::geom::sample_surface;
use articflow_core::model::{ArticulatedObject, JointKind};
use articflow_core::{derive_seed, Error};

/// Points whose normalized ground-truth flow is weaker than this (points on
/// or next to a hinge line) are excluded from the direction and relative
/// magnitude statistics.
pub const MIN_COMPARED_FLOW: f64 = 1e-6;

/// Exactness bound for prismatic joints, where both sides reduce to the
/// same unit axis.
pub const PRISMATIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FlowValidation {
    pub objects: usize,
    pub states_per_object: usize,
    /// (object, state, joint) combinations compared.
    pub cases: usize,
    pub compared_points: usize,
    pub delta_theta: f64,
    /// Largest angle between closed-form and finite-difference vectors, rad.
    pub max_angle: f64,
    /// Largest `|‖fd‖ − ‖gt‖| / ‖gt‖`.
    pub max_relative_magnitude: f64,
    pub prismatic_cases: usize,
    /// Largest `‖fd − gt‖` over prismatic cases.
    pub max_prismatic_deviation: f64,
}

impl FlowValidation {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_angle < tolerance
            && self.max_relative_magnitude < tolerance
            && self.max_prismatic_deviation <= PRISMATIC_TOLERANCE
    }
}

/// Compares every joint of every object at `states` random configurations,
/// on `points` surface samples each.
pub fn validate_flow(
    objects: &[ArticulatedObject],
    states: usize,
    points: usize,
    delta_theta: f64,
    seed: u64,
) -> articflow_core::Result<FlowValidation> {
    if !(delta_theta > 0.0 && delta_theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {delta_theta}")));
    }
    if objects.is_empty() || states == 0 || points == 0 {
        return Err(Error::InvalidArgument("nothing to validate".to_string()));
    }
    let mut out = FlowValidation {
        objects: objects.len(),
        states_per_object: states,
        cases: 0,
        compared_points: 0,
        delta_theta,
        max_angle: 0.0,
        max_relative_magnitude: 0.0,
        prismatic_cases: 0,
        max_prismatic_deviation: 0.0,
    };
    for (oi, obj) in objects.iter().enumerate() {
        for si in 0..states {
            let state = obj.random_state(derive_seed(seed, &[oi as u64, si as u64, 0]));
            let cloud = sample_surface(obj, &state, points, derive_seed(seed, &[oi as u64, si as u64, 1]))?;
            for joint in obj.joints() {
                let gt = gt_flow(obj, &state, &cloud, &joint.id)?;
                let fd = fd_flow_oracle(obj, &state, &cloud, &joint.id, delta_theta)?;
                let mask = cloud.link_mask(&joint.child_link);
                out.cases += 1;
                let prismatic = joint.kind == JointKind::Prismatic;
                out.prismatic_cases += prismatic as usize;
                for i in (0..cloud.len()).filter(|&i| mask[i]) {
                    let (g, f) = (gt.vectors()[i], fd.vectors()[i]);
                    if prismatic {
                        out.max_prismatic_deviation = out.max_prismatic_deviation.max((f - g).norm());
                    }
                    let gn = g.norm();
                    if gn < MIN_COMPARED_FLOW {
                        continue;
                    }
                    out.compared_points += 1;
                    out.max_angle = out.max_angle.max(vector_angle(&g, &f));
                    out.max_relative_magnitude = out.max_relative_magnitude.max((f.norm() - gn).abs() / gn);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use articflow_core::procgen::{generate_many, ProcKind};

    #[test]
    fn zero_step_is_rejected() {
        let objs: Vec<_> = generate_many(&[ProcKind::Drawer], 1, 0).unwrap().into_iter().map(|g| g.object).collect();
        assert!(validate_flow(&objs, 1, 10, 0.0, 0).is_err());
        assert!(validate_flow(&objs, 1, 10, f64::NAN, 0).is_err());
    }

    #[test]
    fn single_prismatic_object_is_exact() {
        let objs: Vec<_> = generate_many(&[ProcKind::Drawer], 1, 3).unwrap().into_iter().map(|g| g.object).collect();
        let v = validate_flow(&objs, 3, 300, 1e-6, 1).unwrap();
        assert_eq!(v.prismatic_cases, 3);
        assert!(v.max_prismatic_deviation <= PRISMATIC_TOLERANCE, "{v:?}");
        assert!(v.passes(1e-4));
    }
}
