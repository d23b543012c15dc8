//! Kinematic tree of rigid links connected by 1-DoF joints.
//!
//! The root link frame is the world frame. Every other link frame is the
//! frame of its parent joint after the joint motion has been applied, so a
//! child pose is `parent ∘ origin ∘ motion(q)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::Pose;

/// Axis norms within this distance of 1 are silently renormalized.
pub const AXIS_NORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum JointKind {
    Revolute,
    Prismatic,
}

impl JointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub id: String,
    pub kind: JointKind,
    pub parent_link: String,
    pub child_link: String,
    /// Joint frame expressed in the parent link frame.
    pub origin: Pose,
    /// Motion axis in the joint frame.
    pub axis: Unit<Vector3<f64>>,
    pub lower: f64,
    pub upper: f64,
}

impl JointSpec {
    /// Builds a validated joint. The axis is normalized when it is within
    /// [`AXIS_NORMALIZE_TOLERANCE`] of unit length and rejected otherwise.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        kind: JointKind,
        parent_link: impl Into<String>,
        child_link: impl Into<String>,
        origin: Pose,
        axis: Vector3<f64>,
        lower: f64,
        upper: f64,
    ) -> Result<Self> {
        let id = id.into();
        let parent_link = parent_link.into();
        let child_link = child_link.into();
        if parent_link == child_link {
            return Err(Error::SelfLoop(id));
        }
        let norm = axis.norm();
        if !norm.is_finite() || libm::fabs(norm - 1.0) > AXIS_NORMALIZE_TOLERANCE {
            return Err(Error::NonUnitAxis { joint: id, norm });
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidLimits { joint: id, lower, upper });
        }
        let mut origin = origin;
        origin.rotation.renormalize();
        Ok(Self {
            id,
            kind,
            parent_link,
            child_link,
            origin,
            axis: Unit::new_normalize(axis),
            lower,
            upper,
        })
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.lower && q <= self.upper
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.lower, self.upper)
    }

    /// Rigid motion of the child frame relative to the joint frame.
    pub fn motion(&self, q: f64) -> Pose {
        match self.kind {
            JointKind::Revolute => {
                Isometry3::from_parts(Translation3::identity(), UnitQuaternion::from_axis_angle(&self.axis, q))
            }
            JointKind::Prismatic => Isometry3::from_parts(
                Translation3::from(self.axis.into_inner() * q),
                UnitQuaternion::identity(),
            ),
        }
    }
}

/// Indexed triangle mesh in a link frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> core::result::Result<Self, String> {
        if triangles.is_empty() {
            return Err("mesh has no triangles".to_string());
        }
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(format!("triangle {:?} references a vertex out of range (have {n})", t));
        }
        if vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err("non-finite vertex".to_string());
        }
        Ok(Self { vertices, triangles })
    }

    /// Closed axis-aligned box with outward winding.
    pub fn cuboid(center: Point3<f64>, extents: Vector3<f64>) -> Self {
        let h = extents * 0.5;
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8u32 {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            vertices.push(center + Vector3::new(sx * h.x, sy * h.y, sz * h.z));
        }
        let triangles = alloc::vec![
            // -x, +x
            [0, 4, 6], [0, 6, 2], [1, 3, 7], [1, 7, 5],
            // -y, +y
            [0, 1, 5], [0, 5, 4], [2, 6, 7], [2, 7, 3],
            // -z, +z
            [0, 2, 3], [0, 3, 1], [4, 5, 7], [4, 7, 6],
        ];
        Self { vertices, triangles }
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| triangle_area(&self.triangle(i))).sum()
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| pose * v).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| Point3::from(v.coords * s)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Concatenates meshes, re-indexing triangles.
    pub fn merge(meshes: &[TriMesh]) -> Self {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for m in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        Self { vertices, triangles }
    }
}

pub fn triangle_area(t: &[Point3<f64>; 3]) -> f64 {
    0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Mesh(TriMesh),
    /// Box centered on the link frame origin.
    Box { extents: Vector3<f64> },
    /// No surface; only produced by importers for frame-only links.
    Empty,
}

impl Geometry {
    pub fn to_mesh(&self) -> Option<TriMesh> {
        match self {
            Geometry::Mesh(m) => Some(m.clone()),
            Geometry::Box { extents } => Some(TriMesh::cuboid(Point3::origin(), *extents)),
            Geometry::Empty => None,
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Geometry::Mesh(m) => m.area(),
            Geometry::Box { extents: e } => 2.0 * (e.x * e.y + e.y * e.z + e.x * e.z),
            Geometry::Empty => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub id: String,
    pub geometry: Geometry,
    /// Only used by the force analysis; defaults to 1 kg.
    pub mass: f64,
}

impl LinkSpec {
    pub fn new(id: impl Into<String>, geometry: Geometry) -> Result<Self> {
        let id = id.into();
        if let Geometry::Box { extents } = &geometry {
            if !extents.iter().all(|e| e.is_finite() && *e > 0.0) {
                return Err(Error::InvalidGeometry {
                    link: id,
                    reason: format!("box extents must be positive, got {:?}", extents.as_slice()),
                });
            }
        }
        Ok(Self { id, geometry, mass: 1.0 })
    }

    pub fn with_mass(mut self, mass: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidGeometry { link: self.id, reason: format!("mass must be positive, got {mass}") });
        }
        self.mass = mass;
        Ok(self)
    }
}

/// Validated kinematic tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticulatedObject {
    links: Vec<LinkSpec>,
    joints: Vec<JointSpec>,
    root: usize,
    link_index: BTreeMap<String, usize>,
    joint_index: BTreeMap<String, usize>,
    /// Per link: index of the joint whose child it is.
    parent_joint: Vec<Option<usize>>,
    /// Joint indices ordered parents-first.
    order: Vec<usize>,
}

impl ArticulatedObject {
    pub fn new(root: &str, links: Vec<LinkSpec>, joints: Vec<JointSpec>) -> Result<Self> {
        let mut link_index = BTreeMap::new();
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.id.clone(), i).is_some() {
                return Err(Error::DuplicateLink(l.id.clone()));
            }
        }
        let mut joint_index = BTreeMap::new();
        for (i, j) in joints.iter().enumerate() {
            if joint_index.insert(j.id.clone(), i).is_some() {
                return Err(Error::DuplicateJoint(j.id.clone()));
            }
            if j.parent_link == j.child_link {
                return Err(Error::SelfLoop(j.id.clone()));
            }
            for l in [&j.parent_link, &j.child_link] {
                if !link_index.contains_key(l) {
                    return Err(Error::UnknownLink(l.clone()));
                }
            }
        }
        let root = *link_index.get(root).ok_or_else(|| Error::UnknownLink(root.to_string()))?;

        let mut parent_joint = alloc::vec![None; links.len()];
        for (ji, j) in joints.iter().enumerate() {
            let c = link_index[&j.child_link];
            if parent_joint[c].is_some() {
                return Err(Error::MultipleParents(j.child_link.clone()));
            }
            parent_joint[c] = Some(ji);
        }

        // Walk every link up its parent chain; a revisit means a cycle.
        for start in 0..links.len() {
            let mut seen = alloc::vec![false; links.len()];
            let mut cur = start;
            while let Some(ji) = parent_joint[cur] {
                if seen[cur] {
                    return Err(Error::Cycle(links[cur].id.clone()));
                }
                seen[cur] = true;
                cur = link_index[&joints[ji].parent_link];
            }
            if cur != root {
                return Err(Error::Disconnected(links[start].id.clone()));
            }
        }
        if parent_joint[root].is_some() {
            return Err(Error::RootHasParent(links[root].id.clone()));
        }

        let mut children: Vec<Vec<usize>> = alloc::vec![Vec::new(); links.len()];
        for (ji, j) in joints.iter().enumerate() {
            children[link_index[&j.parent_link]].push(ji);
        }
        let mut order = Vec::with_capacity(joints.len());
        let mut queue = alloc::collections::VecDeque::from([root]);
        while let Some(l) = queue.pop_front() {
            for &ji in &children[l] {
                order.push(ji);
                queue.push_back(link_index[&joints[ji].child_link]);
            }
        }

        Ok(Self { links, joints, root, link_index, joint_index, parent_joint, order })
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn root_link(&self) -> &str {
        &self.links[self.root].id
    }

    pub fn link(&self, id: &str) -> Option<&LinkSpec> {
        self.link_index.get(id).map(|&i| &self.links[i])
    }

    pub fn link_position(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn joint(&self, id: &str) -> Result<&JointSpec> {
        self.joint_index
            .get(id)
            .map(|&i| &self.joints[i])
            .ok_or_else(|| Error::UnknownJoint(id.to_string()))
    }

    /// Link whose frame is moved by `joint_id`.
    pub fn child_link(&self, joint_id: &str) -> Result<&str> {
        Ok(&self.joint(joint_id)?.child_link)
    }

    pub fn parent_joint_of(&self, link_id: &str) -> Option<&JointSpec> {
        let li = *self.link_index.get(link_id)?;
        self.parent_joint[li].map(|ji| &self.joints[ji])
    }

    /// Number of joints between the root and the deepest link.
    pub fn depth(&self) -> usize {
        (0..self.links.len())
            .map(|mut l| {
                let mut d = 0;
                while let Some(ji) = self.parent_joint[l] {
                    d += 1;
                    l = self.link_index[&self.joints[ji].parent_link];
                }
                d
            })
            .max()
            .unwrap_or(0)
    }

    pub fn total_area(&self) -> f64 {
        self.links.iter().map(|l| l.geometry.area()).sum()
    }

    /// State with every joint at its lower limit.
    pub fn lower_state(&self) -> JointState {
        JointState { values: self.joints.iter().map(|j| (j.id.clone(), j.lower)).collect() }
    }

    /// State with every joint at zero, clamped into its limits.
    pub fn zero_state(&self) -> JointState {
        JointState { values: self.joints.iter().map(|j| (j.id.clone(), j.clamp(0.0))).collect() }
    }

    /// Every joint drawn uniformly within its limits.
    pub fn random_state(&self, seed: u64) -> JointState {
        use rand::Rng;
        let mut rng = crate::seeded_rng(seed);
        JointState {
            values: self
                .joints
                .iter()
                .map(|j| {
                    let u: f64 = rng.random();
                    (j.id.clone(), j.clamp(j.lower + u * j.range()))
                })
                .collect(),
        }
    }

    /// World poses indexed like [`ArticulatedObject::links`].
    pub fn link_poses(&self, state: &JointState) -> Result<Vec<Pose>> {
        state.validate(self)?;
        Ok(self.link_poses_unchecked(state))
    }

    fn link_poses_unchecked(&self, state: &JointState) -> Vec<Pose> {
        let mut poses = alloc::vec![Pose::identity(); self.links.len()];
        for &ji in &self.order {
            let j = &self.joints[ji];
            let parent = poses[self.link_index[&j.parent_link]];
            let q = state.values[&j.id];
            poses[self.link_index[&j.child_link]] = parent * j.origin * j.motion(q);
        }
        poses
    }

    /// World pose of a joint frame before its own motion is applied.
    pub fn joint_frame(&self, state: &JointState, joint_id: &str) -> Result<Pose> {
        let j = self.joint(joint_id)?;
        let poses = self.link_poses(state)?;
        Ok(poses[self.link_index[&j.parent_link]] * j.origin)
    }

    /// Copy of the object with every point moved by `t` in the world frame.
    ///
    /// Root geometry is baked into a mesh; joints hanging off the root get
    /// their origins pre-multiplied by `t`.
    pub fn transformed(&self, t: &Pose) -> Self {
        let mut out = self.clone();
        let root = &mut out.links[self.root];
        root.geometry = match root.geometry.to_mesh() {
            Some(m) => Geometry::Mesh(m.transformed(t)),
            None => Geometry::Empty,
        };
        for j in &mut out.joints {
            if j.parent_link == self.links[self.root].id {
                j.origin = t * j.origin;
            }
        }
        out
    }

    /// Copy of the object with all lengths multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.links {
            l.geometry = match &l.geometry {
                Geometry::Mesh(m) => Geometry::Mesh(m.scaled(s)),
                Geometry::Box { extents } => Geometry::Box { extents: extents * s },
                Geometry::Empty => Geometry::Empty,
            };
        }
        for j in &mut out.joints {
            j.origin.translation.vector *= s;
            if j.kind == JointKind::Prismatic {
                j.lower *= s;
                j.upper *= s;
            }
        }
        out
    }

    /// The subtree rooted at `link_id` as a standalone object whose root
    /// frame is that link's frame.
    pub fn subtree(&self, link_id: &str) -> Result<Self> {
        let start = *self.link_index.get(link_id).ok_or_else(|| Error::UnknownLink(link_id.to_string()))?;
        let mut keep = alloc::vec![false; self.links.len()];
        keep[start] = true;
        let mut joints = Vec::new();
        for &ji in &self.order {
            let j = &self.joints[ji];
            if keep[self.link_index[&j.parent_link]] {
                keep[self.link_index[&j.child_link]] = true;
                joints.push(j.clone());
            }
        }
        let links = self.links.iter().zip(&keep).filter(|(_, k)| **k).map(|(l, _)| l.clone()).collect();
        Self::new(link_id, links, joints)
    }
}

/// Joint configuration, keyed by joint id.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct JointState {
    values: BTreeMap<String, f64>,
}

impl JointState {
    pub fn new(obj: &ArticulatedObject, values: BTreeMap<String, f64>) -> Result<Self> {
        let s = Self { values };
        s.validate(obj)?;
        Ok(s)
    }

    pub fn validate(&self, obj: &ArticulatedObject) -> Result<()> {
        if self.values.len() != obj.joints.len() {
            return Err(Error::InvalidState(format!(
                "expected {} joint values, found {}",
                obj.joints.len(),
                self.values.len()
            )));
        }
        for j in &obj.joints {
            let q = *self
                .values
                .get(&j.id)
                .ok_or_else(|| Error::InvalidState(format!("missing value for joint `{}`", j.id)))?;
            if !j.contains(q) {
                return Err(Error::InvalidState(format!(
                    "joint `{}` value {q} outside [{}, {}]",
                    j.id, j.lower, j.upper
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, joint_id: &str) -> Option<f64> {
        self.values.get(joint_id).copied()
    }

    pub fn values(&self) -> &BTreeMap<String, f64> {
        &self.values
    }

    /// Copy with one joint replaced; the caller re-validates against the object.
    pub fn with(&self, joint_id: &str, q: f64) -> Self {
        let mut values = self.values.clone();
        values.insert(joint_id.to_string(), q);
        Self { values }
    }
}

/// World-frame joint axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrewAxis {
    pub kind: JointKind,
    pub direction: Unit<Vector3<f64>>,
    /// A point on the axis line; unused for prismatic joints.
    pub origin: Point3<f64>,
}

impl ScrewAxis {
    /// Shortest vector from the axis line to `p`.
    pub fn radius_vector(&self, p: &Point3<f64>) -> Vector3<f64> {
        let d = p - self.origin;
        d - self.direction.into_inner() * d.dot(&self.direction)
    }

    /// Unit direction of motion of `p` under increasing joint value, or
    /// `None` for a point on a revolute axis.
    pub fn motion_direction(&self, p: &Point3<f64>) -> Option<Unit<Vector3<f64>>> {
        match self.kind {
            JointKind::Prismatic => Some(self.direction),
            JointKind::Revolute => {
                let t = self.direction.cross(&self.radius_vector(p));
                Unit::try_new(t, 1e-12)
            }
        }
    }
}

/// World pose of every link.
pub fn forward_kinematics(obj: &ArticulatedObject, state: &JointState) -> Result<BTreeMap<String, Pose>> {
    let poses = obj.link_poses(state)?;
    Ok(obj.links.iter().zip(poses).map(|(l, p)| (l.id.clone(), p)).collect())
}

/// World-frame axis of `joint_id`, including all parent motion.
pub fn joint_screw(obj: &ArticulatedObject, state: &JointState, joint_id: &str) -> Result<ScrewAxis> {
    let j = obj.joint(joint_id)?;
    let frame = obj.joint_frame(state, joint_id)?;
    Ok(ScrewAxis {
        kind: j.kind,
        direction: frame.rotation * j.axis,
        origin: Point3::from(frame.translation.vector),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::FRAC_PI_2;
    use nalgebra::Matrix4;

    fn boxed(id: &str) -> LinkSpec {
        LinkSpec::new(id, Geometry::Box { extents: Vector3::new(0.1, 0.2, 0.3) }).unwrap()
    }

    fn hinge(id: &str, parent: &str, child: &str, origin: Pose, axis: Vector3<f64>) -> JointSpec {
        JointSpec::new(id, JointKind::Revolute, parent, child, origin, axis, -3.0, 3.0).unwrap()
    }

    fn slider(id: &str, parent: &str, child: &str, origin: Pose, axis: Vector3<f64>) -> JointSpec {
        JointSpec::new(id, JointKind::Prismatic, parent, child, origin, axis, -1.0, 1.0).unwrap()
    }

    fn door() -> ArticulatedObject {
        ArticulatedObject::new(
            "base",
            vec![boxed("base"), boxed("door")],
            vec![hinge("hinge", "base", "door", Pose::identity(), Vector3::z())],
        )
        .unwrap()
    }

    fn homogeneous(p: &Pose) -> Matrix4<f64> {
        // Built by hand from the quaternion components, not via nalgebra's
        // isometry conversion.
        let q = p.rotation.quaternion();
        let (w, x, y, z) = (q.w, q.i, q.j, q.k);
        let t = p.translation.vector;
        Matrix4::new(
            1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y), t.x,
            2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x), t.y,
            2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y), t.z,
            0.0, 0.0, 0.0, 1.0,
        )
    }

    fn rodrigues(axis: &Vector3<f64>, q: f64) -> Matrix4<f64> {
        let (s, c) = (libm::sin(q), libm::cos(q));
        let (x, y, z) = (axis.x, axis.y, axis.z);
        let v = 1.0 - c;
        Matrix4::new(
            c + x * x * v, x * y * v - z * s, x * z * v + y * s, 0.0,
            y * x * v + z * s, c + y * y * v, y * z * v - x * s, 0.0,
            z * x * v - y * s, z * y * v + x * s, c + z * z * v, 0.0,
            0.0, 0.0, 0.0, 1.0,
        )
    }

    #[test]
    fn counts_and_self_loop() {
        assert_eq!(door().links().len(), 2);
        assert_eq!(door().joints().len(), 1);
        let err = JointSpec::new("j", JointKind::Revolute, "a", "a", Pose::identity(), Vector3::z(), 0.0, 1.0);
        assert!(matches!(err, Err(Error::SelfLoop(_))));
        assert_eq!(err.unwrap_err().to_string(), "self-loop joint `j`");
    }

    #[test]
    fn rejects_bad_trees() {
        let dup = ArticulatedObject::new("a", vec![boxed("a"), boxed("a")], vec![]);
        assert!(matches!(dup, Err(Error::DuplicateLink(_))));

        let cyc = ArticulatedObject::new(
            "r",
            vec![boxed("r"), boxed("a"), boxed("b")],
            vec![
                hinge("j1", "a", "b", Pose::identity(), Vector3::z()),
                hinge("j2", "b", "a", Pose::identity(), Vector3::z()),
            ],
        );
        assert!(matches!(cyc, Err(Error::Cycle(_))), "{cyc:?}");

        let dangling = ArticulatedObject::new(
            "r",
            vec![boxed("r")],
            vec![hinge("j", "r", "ghost", Pose::identity(), Vector3::z())],
        );
        assert!(matches!(dangling, Err(Error::UnknownLink(_))));

        let orphan = ArticulatedObject::new("r", vec![boxed("r"), boxed("x")], vec![]);
        assert!(matches!(orphan, Err(Error::Disconnected(_))));

        let two_parents = ArticulatedObject::new(
            "r",
            vec![boxed("r"), boxed("a"), boxed("b")],
            vec![
                hinge("j1", "r", "a", Pose::identity(), Vector3::z()),
                hinge("j2", "r", "b", Pose::identity(), Vector3::z()),
                hinge("j3", "a", "b", Pose::identity(), Vector3::z()),
            ],
        );
        assert!(matches!(two_parents, Err(Error::MultipleParents(_))));
    }

    #[test]
    fn axis_tolerance() {
        let ok = JointSpec::new("j", JointKind::Prismatic, "a", "b", Pose::identity(), Vector3::new(1.0 + 5e-7, 0.0, 0.0), 0.0, 1.0)
            .unwrap();
        assert_eq!(ok.axis.norm(), 1.0);
        let bad = JointSpec::new("j", JointKind::Prismatic, "a", "b", Pose::identity(), Vector3::new(1.1, 0.0, 0.0), 0.0, 1.0);
        assert!(matches!(bad, Err(Error::NonUnitAxis { .. })));
        let bad = JointSpec::new("j", JointKind::Prismatic, "a", "b", Pose::identity(), Vector3::x(), 1.0, 1.0);
        assert!(matches!(bad, Err(Error::InvalidLimits { .. })));
    }

    #[test]
    fn zero_state_uses_static_origins() {
        let o1 = Pose::new(Vector3::new(0.1, 0.2, 0.3), Vector3::new(0.0, 0.0, 0.4));
        let o2 = Pose::new(Vector3::new(-0.5, 0.0, 0.1), Vector3::new(0.3, 0.0, 0.0));
        let obj = ArticulatedObject::new(
            "r",
            vec![boxed("r"), boxed("a"), boxed("b")],
            vec![hinge("j1", "r", "a", o1, Vector3::z()), slider("j2", "a", "b", o2, Vector3::x())],
        )
        .unwrap();
        let fk = forward_kinematics(&obj, &obj.zero_state()).unwrap();
        assert_eq!(fk["r"], Pose::identity());
        assert!((fk["a"].to_homogeneous() - o1.to_homogeneous()).norm() < 1e-15);
        assert!(((fk["b"]).to_homogeneous() - (o1 * o2).to_homogeneous()).norm() < 1e-15);
    }

    #[test]
    fn prismatic_translates_along_parent_axis() {
        let obj = ArticulatedObject::new(
            "r",
            vec![boxed("r"), boxed("d")],
            vec![slider("s", "r", "d", Pose::translation(0.0, 0.5, 0.0), Vector3::x())],
        )
        .unwrap();
        let s0 = obj.zero_state();
        let p0 = forward_kinematics(&obj, &s0).unwrap()["d"];
        let p1 = forward_kinematics(&obj, &s0.with("s", 0.3)).unwrap()["d"];
        let d = p1.translation.vector - p0.translation.vector;
        assert!((d - Vector3::new(0.3, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn revolute_chain_matches_matrix_product() {
        let o1 = Pose::new(Vector3::new(0.3, 0.0, 0.2), Vector3::new(0.0, 0.7, 0.0));
        let o2 = Pose::new(Vector3::new(0.0, 0.4, 0.0), Vector3::new(0.2, 0.0, -0.1));
        let ax2 = Vector3::new(1.0, 1.0, 0.0).normalize();
        let obj = ArticulatedObject::new(
            "r",
            vec![boxed("r"), boxed("a"), boxed("b")],
            vec![hinge("j1", "r", "a", o1, Vector3::y()), hinge("j2", "a", "b", o2, ax2)],
        )
        .unwrap();
        let state = obj.zero_state().with("j1", 0.4).with("j2", FRAC_PI_2);
        let fk = forward_kinematics(&obj, &state).unwrap();
        let chain = homogeneous(&o1) * rodrigues(&Vector3::y(), 0.4) * homogeneous(&o2) * rodrigues(&ax2, FRAC_PI_2);
        let mesh = TriMesh::cuboid(Point3::origin(), Vector3::new(0.1, 0.2, 0.3));
        for v in mesh.vertices() {
            let expect = chain * v.to_homogeneous();
            let got = fk["b"] * v;
            assert!((got.coords - expect.xyz()).norm() < 1e-12);
        }
    }

    #[test]
    fn screw_identity_and_after_slide() {
        let s = joint_screw(&door(), &door().zero_state(), "hinge").unwrap();
        assert_eq!(s.direction.into_inner(), Vector3::z());
        assert_eq!(s.origin, Point3::origin());

        let obj = ArticulatedObject::new(
            "r",
            vec![boxed("r"), boxed("cart"), boxed("door")],
            vec![
                slider("slide", "r", "cart", Pose::identity(), Vector3::x()),
                hinge("hinge", "cart", "door", Pose::identity(), Vector3::z()),
            ],
        )
        .unwrap();
        let s = joint_screw(&obj, &obj.zero_state().with("slide", 0.5), "hinge").unwrap();
        assert!((s.origin - Point3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        assert!((s.direction.into_inner() - Vector3::z()).norm() < 1e-15);
        assert!(matches!(joint_screw(&obj, &obj.zero_state(), "nope"), Err(Error::UnknownJoint(_))));
    }

    #[test]
    fn screw_under_rotated_parent() {
        let obj = ArticulatedObject::new(
            "r",
            vec![boxed("r"), boxed("arm"), boxed("door")],
            vec![
                hinge("tilt", "r", "arm", Pose::identity(), Vector3::y()),
                hinge("hinge", "arm", "door", Pose::translation(0.0, 0.0, 0.2), Vector3::z()),
            ],
        )
        .unwrap();
        let state = obj.zero_state().with("tilt", FRAC_PI_2);
        let s = joint_screw(&obj, &state, "hinge").unwrap();
        let m = rodrigues(&Vector3::y(), FRAC_PI_2);
        let expect_dir = (m * Vector3::z().to_homogeneous()).xyz();
        let expect_origin = (m * Point3::new(0.0, 0.0, 0.2).to_homogeneous()).xyz();
        assert!((s.direction.into_inner() - expect_dir).norm() < 1e-12);
        assert!((s.origin.coords - expect_origin).norm() < 1e-12);
    }

    #[test]
    fn state_validation() {
        let obj = door();
        assert!(obj.zero_state().with("hinge", 4.0).validate(&obj).is_err());
        assert!(obj.zero_state().with("extra", 0.0).validate(&obj).is_err());
        assert!(JointState::new(&obj, BTreeMap::new()).is_err());
    }
}
