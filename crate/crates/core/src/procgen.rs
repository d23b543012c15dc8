//! Procedural desk-scale articulated objects.
//!
//! Conventions: +x points out of the object's front, +z is up and every
//! object rests on z = 0. Moving parts start closed at their lower limit.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ArticulatedObject, Geometry, JointKind, JointSpec, LinkSpec, TriMesh};
use crate::{derive_seed, seeded_rng, Pose};

/// Thickness of drawer fronts, door panels and flat lids.
pub const PANEL_THICKNESS: f64 = 0.04;
const GAP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LidShape {
    /// Quarter-sphere shell rotating about a diameter through its center.
    Sphere,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProcKind {
    Drawer,
    Door,
    Lid(LidShape),
    Cabinet2Joint,
}

impl ProcKind {
    pub const ALL: [ProcKind; 5] =
        [ProcKind::Drawer, ProcKind::Door, ProcKind::Lid(LidShape::Sphere), ProcKind::Lid(LidShape::Flat), ProcKind::Cabinet2Joint];

    /// Category tag used in suite reports.
    pub fn category(self) -> &'static str {
        match self {
            ProcKind::Drawer => "drawer",
            ProcKind::Door => "door",
            ProcKind::Lid(LidShape::Sphere) => "lid_sphere",
            ProcKind::Lid(LidShape::Flat) => "lid_flat",
            ProcKind::Cabinet2Joint => "cabinet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.category() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum HingeSide {
    Left,
    Right,
    /// Chosen by the seed.
    Either,
}

/// Sampling ranges, meters. `width` runs along y, `depth` along x,
/// `height` along z. `travel` is the drawer stroke; for lids `width` is the
/// sphere radius or lid width.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProcSpec {
    pub kind: ProcKind,
    pub seed: u64,
    pub width: (f64, f64),
    pub depth: (f64, f64),
    pub height: (f64, f64),
    pub travel: (f64, f64),
    pub hinge_side: HingeSide,
}

impl ProcSpec {
    /// Default ranges for `kind`, sized so a 1 cm-per-step rollout reaches
    /// 90 % of the range within 50 steps.
    pub fn new(kind: ProcKind, seed: u64) -> Self {
        let (width, depth, height) = match kind {
            ProcKind::Drawer => ((0.35, 0.5), (0.4, 0.5), (0.2, 0.3)),
            ProcKind::Door => ((0.26, 0.36), (0.3, 0.4), (0.4, 0.6)),
            ProcKind::Lid(LidShape::Sphere) => ((0.12, 0.16), (0.2, 0.3), (0.12, 0.2)),
            ProcKind::Lid(LidShape::Flat) => ((0.25, 0.4), (0.2, 0.3), (0.12, 0.2)),
            ProcKind::Cabinet2Joint => ((0.28, 0.36), (0.4, 0.5), (0.6, 0.8)),
        };
        Self { kind, seed, width, depth, height, travel: (0.25, 0.4), hinge_side: HingeSide::Either }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("width", self.width), ("depth", self.depth), ("height", self.height), ("travel", self.travel)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidArgument(alloc::format!("{name} range [{lo}, {hi}] must be positive and ordered")));
            }
        }
        let min_part = match self.kind {
            ProcKind::Drawer | ProcKind::Door => self.height.0,
            ProcKind::Cabinet2Joint => self.height.0 / 2.0,
            ProcKind::Lid(_) => self.width.0,
        };
        if min_part <= 2.0 * GAP + 0.02 || self.width.0 <= 2.0 * GAP + 0.02 {
            return Err(Error::InvalidArgument("object too small for its moving part".to_string()));
        }
        if self.kind == ProcKind::Drawer && self.travel.0 > self.depth.1 {
            return Err(Error::InvalidArgument("drawer travel exceeds the cabinet depth".to_string()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn mesh_link(id: &str, meshes: &[TriMesh]) -> Result<LinkSpec> {
    LinkSpec::new(id, Geometry::Mesh(TriMesh::merge(meshes)))
}

/// Closed cabinet body occupying `x ∈ [−depth, 0]`, centered on y = 0.
fn body(depth: f64, width: f64, height: f64) -> TriMesh {
    TriMesh::cuboid(Point3::new(-depth / 2.0, 0.0, height / 2.0), Vector3::new(depth, width, height))
}

/// Drawer front: a slab centered on its link frame, sliding along +x.
fn drawer_parts(id: &str, width: f64, height: f64, z_center: f64, travel: f64) -> Result<(LinkSpec, JointSpec)> {
    let link = LinkSpec::new(id, Geometry::Box { extents: Vector3::new(PANEL_THICKNESS, width, height) })?;
    let joint = JointSpec::new(
        alloc::format!("{id}_slide"),
        JointKind::Prismatic,
        "body",
        id,
        Pose::translation(PANEL_THICKNESS / 2.0, 0.0, z_center),
        Vector3::x(),
        0.0,
        travel,
    )?;
    Ok((link, joint))
}

/// Door panel hinged on its back vertical edge at `y_hinge`; it extends
/// towards +y when `extends_positive`, else towards −y, and opens outward.
fn door_parts(id: &str, y_hinge: f64, extends_positive: bool, width: f64, height: f64, z_bottom: f64) -> Result<(LinkSpec, JointSpec)> {
    let sign = if extends_positive { 1.0 } else { -1.0 };
    let panel = TriMesh::cuboid(
        Point3::new(PANEL_THICKNESS / 2.0, sign * width / 2.0, height / 2.0),
        Vector3::new(PANEL_THICKNESS, width, height),
    );
    let link = mesh_link(id, &[panel])?;
    let joint = JointSpec::new(
        alloc::format!("{id}_hinge"),
        JointKind::Revolute,
        "body",
        id,
        Pose::translation(0.0, y_hinge, z_bottom),
        -Vector3::z() * sign,
        0.0,
        FRAC_PI_2,
    )?;
    Ok((link, joint))
}

/// Open quarter-sphere shell `{x ≥ 0, z ≥ 0}` of radius `r` with outward
/// winding.
pub fn quarter_sphere_shell(r: f64, n_theta: usize, n_phi: usize) -> TriMesh {
    let at = |i: usize, j: usize| {
        let theta = PI * i as f64 / n_theta as f64;
        let phi = FRAC_PI_2 * j as f64 / n_phi as f64;
        Point3::new(
            r * libm::sin(theta) * libm::cos(phi),
            r * libm::cos(theta),
            r * libm::sin(theta) * libm::sin(phi),
        )
    };
    let mut vertices = Vec::with_capacity((n_theta + 1) * (n_phi + 1));
    for i in 0..=n_theta {
        for j in 0..=n_phi {
            vertices.push(at(i, j));
        }
    }
    let idx = |i: usize, j: usize| (i * (n_phi + 1) + j) as u32;
    let mut triangles = Vec::new();
    for i in 0..n_theta {
        for j in 0..n_phi {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if i > 0 {
                triangles.push([a, d, c]);
            }
            if i + 1 < n_theta {
                triangles.push([a, c, b]);
            }
        }
    }
    TriMesh::new(vertices, triangles).expect("valid by construction")
}

pub fn generate(spec: &ProcSpec) -> Result<ArticulatedObject> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let width = uniform(&mut rng, spec.width);
    let depth = uniform(&mut rng, spec.depth);
    let height = uniform(&mut rng, spec.height);
    let travel = uniform(&mut rng, spec.travel).min(depth);
    let left = match spec.hinge_side {
        HingeSide::Left => true,
        HingeSide::Right => false,
        HingeSide::Either => rng.random::<bool>(),
    };
    let (links, joints) = match spec.kind {
        ProcKind::Drawer => {
            let (l, j) = drawer_parts("drawer", width - 2.0 * GAP, height - 2.0 * GAP, height / 2.0, travel)?;
            (alloc::vec![mesh_link("body", &[body(depth, width, height)])?, l], alloc::vec![j])
        }
        ProcKind::Door => {
            let y = if left { -width / 2.0 } else { width / 2.0 };
            let (l, j) = door_parts("door", y, left, width - GAP, height - 2.0 * GAP, GAP)?;
            (alloc::vec![mesh_link("body", &[body(depth, width, height)])?, l], alloc::vec![j])
        }
        ProcKind::Lid(LidShape::Sphere) => {
            // Pot body under a lid whose hinge passes through the sphere center,
            // so the shell normal is perpendicular to its motion everywhere.
            let r = width;
            let pot = TriMesh::cuboid(Point3::new(0.0, 0.0, height / 2.0), Vector3::new(2.0 * r, 2.0 * r, height));
            let lid = LinkSpec::new("lid", Geometry::Mesh(quarter_sphere_shell(r, 24, 12)))?;
            let hinge = JointSpec::new("lid_hinge", JointKind::Revolute, "body", "lid", Pose::translation(0.0, 0.0, height), -Vector3::y(), 0.0, FRAC_PI_2)?;
            (alloc::vec![mesh_link("body", &[pot])?, lid], alloc::vec![hinge])
        }
        ProcKind::Lid(LidShape::Flat) => {
            let lid_mesh = TriMesh::cuboid(
                Point3::new(depth / 2.0, 0.0, PANEL_THICKNESS / 2.0),
                Vector3::new(depth, width, PANEL_THICKNESS),
            );
            let lid = mesh_link("lid", &[lid_mesh])?;
            let hinge = JointSpec::new(
                "lid_hinge",
                JointKind::Revolute,
                "body",
                "lid",
                Pose::translation(-depth, 0.0, height),
                -Vector3::y(),
                0.0,
                FRAC_PI_2,
            )?;
            (alloc::vec![mesh_link("body", &[body(depth, width, height)])?, lid], alloc::vec![hinge])
        }
        ProcKind::Cabinet2Joint => {
            let half = height / 2.0;
            let y = if left { -width / 2.0 } else { width / 2.0 };
            let (dl, dj) = door_parts("door", y, left, width - GAP, half - 2.0 * GAP, half + GAP)?;
            let (wl, wj) = drawer_parts("drawer", width - 2.0 * GAP, half - 2.0 * GAP, half / 2.0, travel)?;
            (alloc::vec![mesh_link("body", &[body(depth, width, height)])?, dl, wl], alloc::vec![dj, wj])
        }
    };
    ArticulatedObject::new("body", links, joints)
}

/// A named generated object for suites.
#[derive(Debug, Clone)]
pub struct GeneratedObject {
    pub id: String,
    pub kind: ProcKind,
    pub object: ArticulatedObject,
}

/// Objects `count` long, cycling through `kinds`, with per-object seeds
/// derived from `seed`.
pub fn generate_many(kinds: &[ProcKind], count: usize, seed: u64) -> Result<Vec<GeneratedObject>> {
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("no object kinds given".to_string()));
    }
    (0..count)
        .map(|i| {
            let kind = kinds[i % kinds.len()];
            let object = generate(&ProcSpec::new(kind, derive_seed(seed, &[i as u64])))?;
            Ok(GeneratedObject { id: alloc::format!("{}_{i:03}", kind.category()), kind, object })
        })
        .collect()
}

/// The fixed 20-object evaluation suite: 5 drawers, 5 doors, 4 spherical
/// lids, 2 flat lids and 4 two-joint cabinets.
pub fn default_suite(seed: u64) -> Result<Vec<GeneratedObject>> {
    let plan = [
        (ProcKind::Drawer, 5),
        (ProcKind::Door, 5),
        (ProcKind::Lid(LidShape::Sphere), 4),
        (ProcKind::Lid(LidShape::Flat), 2),
        (ProcKind::Cabinet2Joint, 4),
    ];
    let mut out = Vec::new();
    for (kind, n) in plan {
        for _ in 0..n {
            let i = out.len();
            let object = generate(&ProcSpec::new(kind, derive_seed(seed, &[i as u64])))?;
            out.push(GeneratedObject { id: alloc::format!("{}_{i:02}", kind.category()), kind, object });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::joint_screw;

    fn mesh_is_closed(m: &TriMesh) -> bool {
        // Every directed edge is matched by its reverse exactly once.
        let mut edges = alloc::collections::BTreeMap::new();
        for t in m.triangles() {
            for k in 0..3 {
                *edges.entry((t[k], t[(k + 1) % 3])).or_insert(0i32) += 1;
            }
        }
        edges.iter().all(|(&(a, b), &c)| c == 1 && edges.get(&(b, a)) == Some(&1))
    }

    #[test]
    fn deterministic_per_seed() {
        let s = ProcSpec::new(ProcKind::Drawer, 7);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        assert_ne!(generate(&s).unwrap(), generate(&ProcSpec::new(ProcKind::Drawer, 8)).unwrap());
    }

    #[test]
    fn door_hinge_on_panel_edge() {
        for seed in 0..10 {
            let obj = generate(&ProcSpec::new(ProcKind::Door, seed)).unwrap();
            let j = &obj.joints()[0];
            assert_eq!((j.lower, j.upper), (0.0, FRAC_PI_2));
            let axis = joint_screw(&obj, &obj.lower_state(), &j.id).unwrap();
            let mesh = obj.link("door").unwrap().geometry.to_mesh().unwrap();
            let origin = obj.joint_frame(&obj.lower_state(), &j.id).unwrap();
            // Exactly the two ends of the hinge edge lie on the axis line.
            let on_axis = mesh.vertices().iter().filter(|v| axis.radius_vector(&(origin * *v)).norm() < 1e-12).count();
            assert_eq!(on_axis, 2);
            // Opening moves the free edge outward.
            let far = mesh.vertices().iter().map(|v| origin * v).max_by(|a, b| axis.radius_vector(a).norm().total_cmp(&axis.radius_vector(b).norm())).unwrap();
            assert!(axis.motion_direction(&far).unwrap().x > 0.95);
        }
    }

    #[test]
    fn cabinet_has_two_joints_depth_one() {
        let obj = generate(&ProcSpec::new(ProcKind::Cabinet2Joint, 3)).unwrap();
        assert_eq!(obj.joints().len(), 2);
        assert_eq!(obj.depth(), 1);
    }

    #[test]
    fn invariants_over_many_objects() {
        for g in generate_many(&ProcKind::ALL, 50, 1).unwrap() {
            for j in g.object.joints() {
                assert!(j.range() >= 0.1, "{} {}", g.id, j.id);
            }
            for l in g.object.links() {
                let m = l.geometry.to_mesh().unwrap();
                if g.kind == ProcKind::Lid(LidShape::Sphere) && l.id == "lid" {
                    continue;
                }
                assert!(mesh_is_closed(&m), "{} {}", g.id, l.id);
                // Outward winding: positive signed volume.
                let vol: f64 = (0..m.triangles().len())
                    .map(|i| {
                        let [a, b, c] = m.triangle(i);
                        a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
                    })
                    .sum();
                assert!(vol > 0.0);
            }
        }
    }

    #[test]
    fn sphere_shell_faces_outward() {
        let m = quarter_sphere_shell(0.15, 24, 12);
        for i in 0..m.triangles().len() {
            let [a, b, c] = m.triangle(i);
            let n = (b - a).cross(&(c - a));
            let centroid = (a.coords + b.coords + c.coords) / 3.0;
            assert!(n.dot(&centroid) > 0.0);
        }
        // Area approaches a quarter of the sphere.
        let exact = PI * 0.15 * 0.15;
        assert!((m.area() - exact).abs() / exact < 0.01);
    }

    #[test]
    fn sphere_lid_normal_perpendicular_to_motion() {
        let obj = generate(&ProcSpec::new(ProcKind::Lid(LidShape::Sphere), 4)).unwrap();
        let s = obj.lower_state();
        let axis = joint_screw(&obj, &s, "lid_hinge").unwrap();
        let center = axis.origin;
        let pose = obj.link_poses(&s).unwrap()[1];
        for v in obj.link("lid").unwrap().geometry.to_mesh().unwrap().vertices() {
            let p = pose * v;
            if let Some(t) = axis.motion_direction(&p) {
                assert!(t.dot(&(p - center).normalize()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_suite_composition() {
        let suite = default_suite(0).unwrap();
        assert_eq!(suite.len(), 20);
        let count = |k: ProcKind| suite.iter().filter(|g| g.kind == k).count();
        assert_eq!(count(ProcKind::Drawer), 5);
        assert_eq!(count(ProcKind::Lid(LidShape::Sphere)), 4);
        assert_eq!(count(ProcKind::Cabinet2Joint), 4);
    }

    #[test]
    fn invalid_ranges() {
        let mut s = ProcSpec::new(ProcKind::Door, 0);
        s.width = (0.3, 0.2);
        assert!(generate(&s).is_err());
    }
}
