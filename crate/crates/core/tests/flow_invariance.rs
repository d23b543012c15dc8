use articflow_core::flow::gt_flow;
use articflow_core::geom::{detect_edges, estimate_gaussian_curvature, sample_surface, PointCloud, DEFAULT_ANGLE_GAP};
use articflow_core::model::{ArticulatedObject, JointKind, JointState};
use articflow_core::policy::{select_contact, GraspConstraints};
use articflow_core::procgen::{generate, ProcKind, ProcSpec};
use articflow_core::{Point3, Pose, Translation3, UnitQuaternion, Vector3};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn object(kind_index: usize, seed: u64) -> ArticulatedObject {
    generate(&ProcSpec::new(ProcKind::ALL[kind_index], seed)).unwrap()
}

fn scaled_state(obj: &ArticulatedObject, s: &JointState, k: f64) -> JointState {
    let mut out = s.clone();
    for j in obj.joints() {
        if j.kind == JointKind::Prismatic {
            out = out.with(&j.id, s.get(&j.id).unwrap() * k);
        }
    }
    out
}

fn scaled_cloud(c: &PointCloud, k: f64) -> PointCloud {
    PointCloud::new(c.points().iter().map(|p| Point3::from(p.coords * k)).collect())
        .with_labels(c.link_labels().unwrap().to_vec())
        .unwrap()
}

fn arb_pose() -> impl Strategy<Value = Pose> {
    (prop::array::uniform3(-5.0..5.0f64), prop::array::uniform3(-1.0..1.0f64), 0.0..std::f64::consts::PI).prop_filter_map(
        "axis too short",
        |(t, a, angle)| {
            let axis = nalgebra::Unit::try_new(Vector3::from(a), 1e-3)?;
            Some(Pose::from_parts(Translation3::from(Vector3::from(t)), UnitQuaternion::from_axis_angle(&axis, angle)))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flow_is_rigidly_equivariant(kind in 0usize..5, seed in 0u64..1000, t in arb_pose(), u in 0.0..1.0f64) {
        let obj = object(kind, seed);
        let s = obj.random_state(seed ^ (u.to_bits()));
        let cloud = sample_surface(&obj, &s, 400, seed).unwrap();
        let moved_obj = obj.transformed(&t);
        let moved_cloud = cloud.transformed(&t);
        for j in obj.joints() {
            let f = gt_flow(&obj, &s, &cloud, &j.id).unwrap();
            let g = gt_flow(&moved_obj, &s, &moved_cloud, &j.id).unwrap();
            for (a, b) in f.vectors().iter().zip(g.vectors()) {
                prop_assert!((t.rotation * a - b).norm() < TOL);
            }
        }
    }

    #[test]
    fn flow_is_translation_invariant(kind in 0usize..5, seed in 0u64..1000, d in prop::array::uniform3(-10.0..10.0f64)) {
        let obj = object(kind, seed);
        let s = obj.random_state(seed);
        let cloud = sample_surface(&obj, &s, 400, seed).unwrap();
        let t = Pose::from_parts(Translation3::from(Vector3::from(d)), UnitQuaternion::identity());
        let (obj2, cloud2) = (obj.transformed(&t), cloud.transformed(&t));
        for j in obj.joints() {
            let f = gt_flow(&obj, &s, &cloud, &j.id).unwrap();
            let g = gt_flow(&obj2, &s, &cloud2, &j.id).unwrap();
            for (a, b) in f.vectors().iter().zip(g.vectors()) {
                prop_assert!((a - b).norm() < TOL);
            }
        }
    }

    #[test]
    fn flow_is_scale_invariant(kind in 0usize..5, seed in 0u64..1000, k in 0.05..20.0f64) {
        let obj = object(kind, seed);
        let s = obj.random_state(seed);
        let cloud = sample_surface(&obj, &s, 400, seed).unwrap();
        let obj2 = obj.scaled(k);
        let s2 = scaled_state(&obj, &s, k);
        let cloud2 = scaled_cloud(&cloud, k);
        for j in obj.joints() {
            let f = gt_flow(&obj, &s, &cloud, &j.id).unwrap();
            let g = gt_flow(&obj2, &s2, &cloud2, &j.id).unwrap();
            for (a, b) in f.vectors().iter().zip(g.vectors()) {
                prop_assert!((a - b).norm() < TOL);
            }
        }
    }

    #[test]
    fn contact_index_survives_rigid_motion(kind in 0usize..5, seed in 0u64..200, t in arb_pose()) {
        let obj = object(kind, seed);
        let s = obj.lower_state();
        let joint = &obj.joints()[0].id;
        let cons = GraspConstraints::default();
        let pick = |o: &ArticulatedObject, c: &PointCloud| {
            let flow = gt_flow(o, &s, c, joint).unwrap();
            let edges = detect_edges(c, cons.neighbor_k, DEFAULT_ANGLE_GAP).unwrap();
            let curv = estimate_gaussian_curvature(c, cons.neighbor_k).unwrap();
            select_contact(c, &flow, &cons, &edges, &curv).map(|g| g.index).ok()
        };
        let cloud = sample_surface(&obj, &s, 1500, seed).unwrap();
        let before = pick(&obj, &cloud);
        let after = pick(&obj.transformed(&t), &cloud.transformed(&t));
        prop_assert_eq!(before, after);
    }
}
