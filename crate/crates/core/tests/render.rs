use articflow_core::camera::{backproject, render_depth, CameraModel, Intrinsics};
use articflow_core::model::{ArticulatedObject, Geometry, JointKind, JointSpec, LinkSpec};
use articflow_core::{Point3, Pose, Translation3, Vector3};

fn signed_box_distance(p: &Point3<f64>, center: &Point3<f64>, half: &Vector3<f64>) -> f64 {
    let q = (p - center).abs() - half;
    let outside = q.sup(&Vector3::zeros()).norm();
    outside + q.max().min(0.0)
}

fn two_boxes(front_offset: f64) -> ArticulatedObject {
    let links = vec![
        LinkSpec::new("back", Geometry::Box { extents: Vector3::new(1.0, 1.0, 1.0) }).unwrap(),
        LinkSpec::new("front", Geometry::Box { extents: Vector3::new(0.2, 0.2, 0.2) }).unwrap(),
    ];
    let origin = Pose::from_parts(Translation3::new(front_offset, 0.0, 0.0), articflow_core::UnitQuaternion::identity());
    let joints = vec![JointSpec::new("slide", JointKind::Prismatic, "back", "front", origin, Vector3::z(), 0.0, 0.1).unwrap()];
    ArticulatedObject::new("back", links, joints).unwrap()
}

#[test]
fn backprojected_box_points_lie_on_the_surface() {
    let links = vec![LinkSpec::new("box", Geometry::Box { extents: Vector3::new(0.6, 0.4, 0.3) }).unwrap()];
    let obj = ArticulatedObject::new("box", links, vec![]).unwrap();
    let half = Vector3::new(0.3, 0.2, 0.15);
    for eye in [Point3::new(2.0, 1.0, 1.5), Point3::new(-1.5, -2.0, 0.7), Point3::new(0.3, 0.1, 2.5)] {
        let cam = CameraModel::look_at(Intrinsics::square(128), eye, Point3::origin(), Vector3::z()).unwrap();
        let depth = render_depth(&obj, &obj.lower_state(), &cam).unwrap();
        let cloud = backproject(&depth, &cam, 1).unwrap();
        assert!(cloud.len() > 500);
        for p in cloud.points() {
            assert!(signed_box_distance(p, &Point3::origin(), &half).abs() < 1e-6, "{p:?}");
            // Only faces turned towards the camera are visible.
            let axis = (0..3).max_by(|&a, &b| (p[a].abs() / half[a]).total_cmp(&(p[b].abs() / half[b]))).unwrap();
            let mut normal = Vector3::zeros();
            normal[axis] = p[axis].signum();
            assert!(normal.dot(&(eye - p)) > 0.0, "back face point {p:?}");
        }
    }
}

#[test]
fn nearer_surface_occludes_farther_one() {
    let obj = two_boxes(0.8);
    let cam = CameraModel::look_at(Intrinsics::square(64), Point3::new(3.0, 0.0, 0.0), Point3::origin(), Vector3::z()).unwrap();
    let depth = render_depth(&obj, &obj.lower_state(), &cam).unwrap();
    let (cu, cv) = (32, 32);
    assert_eq!(depth.link_at(cu, cv), Some("front"));
    // Front face of the small box sits at x = 0.9, 2.1 m in front of the camera.
    assert!((depth.depth(cu, cv) - 2.1).abs() < 1e-9);
    let cloud = backproject(&depth, &cam, 1).unwrap();
    let labels = cloud.link_labels().unwrap();
    for (p, l) in cloud.points().iter().zip(labels) {
        let hidden_back = l == "back" && p.y.abs() < 0.05 && p.z.abs() < 0.05;
        assert!(!hidden_back, "back face visible through the front box at {p:?}");
    }

    // Moving the small box behind the large one hides it completely.
    let hidden = two_boxes(-0.8);
    let depth = render_depth(&hidden, &hidden.lower_state(), &cam).unwrap();
    let cloud = backproject(&depth, &cam, 1).unwrap();
    assert!(cloud.link_labels().unwrap().iter().all(|l| l == "back"));
}
