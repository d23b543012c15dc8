//! Point clouds, area-uniform surface sampling, and local surface analysis
//! (normals, Gaussian curvature, edge flags) over k-nearest neighbourhoods.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::format;

use nalgebra::{Matrix3, Matrix6, Point3, SymmetricEigen, Unit, Vector3, Vector6};
use rand::Rng;

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::model::{triangle_area, ArticulatedObject, JointState};
use crate::{seeded_rng, Pose};

pub const DEFAULT_NEIGHBORS: usize = 16;
pub const DEFAULT_ANGLE_GAP: f64 = core::f64::consts::FRAC_PI_2;
/// Ratio of the middle to smallest covariance eigenvalue below which a
/// neighbourhood is treated as a crease rather than a smooth sheet.
pub const CREASE_EIGEN_RATIO: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    link_labels: Option<Vec<String>>,
    part_mask: Option<Vec<bool>>,
    normals: Option<Vec<Vector3<f64>>>,
    sensor_origin: Option<Point3<f64>>,
}

impl PointCloud {
    /// A cloud may be empty (e.g. an all-background render); consumers that
    /// need points reject it with [`Error::EmptyCloud`].
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self { points, ..Self::default() }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        self.check_len(labels.len())?;
        self.link_labels = Some(labels);
        Ok(self)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        self.check_len(mask.len())?;
        self.part_mask = Some(mask);
        Ok(self)
    }

    pub fn with_normals(mut self, normals: Vec<Vector3<f64>>) -> Result<Self> {
        self.check_len(normals.len())?;
        if let Some(n) = normals.iter().find(|n| libm::fabs(n.norm() - 1.0) > 1e-6) {
            return Err(Error::InvalidArgument(format!("normal {:?} is not unit length", n.as_slice())));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_sensor_origin(mut self, origin: Point3<f64>) -> Self {
        self.sensor_origin = Some(origin);
        self
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.points.len() {
            return Err(Error::LengthMismatch { expected: self.points.len(), found: n });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn link_labels(&self) -> Option<&[String]> {
        self.link_labels.as_deref()
    }

    pub fn part_mask(&self) -> Option<&[bool]> {
        self.part_mask.as_deref()
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn sensor_origin(&self) -> Option<Point3<f64>> {
        self.sensor_origin
    }

    /// Per-point membership of `link_id`; all false when unlabeled.
    pub fn link_mask(&self, link_id: &str) -> Vec<bool> {
        match &self.link_labels {
            Some(l) => l.iter().map(|s| s == link_id).collect(),
            None => alloc::vec![false; self.points.len()],
        }
    }

    /// Rigidly moves points, normals and the sensor origin.
    pub fn transformed(&self, t: &Pose) -> Self {
        Self {
            points: self.points.iter().map(|p| t * p).collect(),
            link_labels: self.link_labels.clone(),
            part_mask: self.part_mask.clone(),
            normals: self.normals.as_ref().map(|ns| ns.iter().map(|n| t.rotation * n).collect()),
            sensor_origin: self.sensor_origin.map(|o| t * o),
        }
    }

    /// Keeps the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            link_labels: self.link_labels.as_ref().map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
            part_mask: self.part_mask.as_ref().map(|m| indices.iter().map(|&i| m[i]).collect()),
            normals: self.normals.as_ref().map(|n| indices.iter().map(|&i| n[i]).collect()),
            sensor_origin: self.sensor_origin,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample {
    pub point: Point3<f64>,
    pub link_id: String,
    /// Index into the link's triangle list (boxes use [`crate::model::TriMesh::cuboid`] order).
    pub triangle_index: usize,
    pub barycentric: [f64; 3],
}

/// Area-uniform samples over every posed link surface.
pub fn sample_surface_detailed(obj: &ArticulatedObject, state: &JointState, n: usize, seed: u64) -> Result<Vec<SurfaceSample>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".to_string()));
    }
    let poses = obj.link_poses(state)?;
    let mut tris: Vec<(usize, usize, [Point3<f64>; 3])> = Vec::new();
    for (li, link) in obj.links().iter().enumerate() {
        if let Some(mesh) = link.geometry.to_mesh() {
            for ti in 0..mesh.triangles().len() {
                let t = mesh.triangle(ti);
                tris.push((li, ti, [poses[li] * t[0], poses[li] * t[1], poses[li] * t[2]]));
            }
        }
    }
    let mut cumulative = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for (_, _, t) in &tris {
        total += triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }

    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.random::<f64>() * total;
        let k = cumulative.partition_point(|&c| c <= u).min(tris.len() - 1);
        let (li, ti, t) = &tris[k];
        let r1 = libm::sqrt(rng.random::<f64>());
        let r2 = rng.random::<f64>();
        let w = [1.0 - r1, r1 * (1.0 - r2), r1 * r2];
        let point = Point3::from(t[0].coords * w[0] + t[1].coords * w[1] + t[2].coords * w[2]);
        out.push(SurfaceSample { point, link_id: obj.links()[*li].id.clone(), triangle_index: *ti, barycentric: w });
    }
    Ok(out)
}

/// Labeled cloud of `n` area-uniform surface samples; deterministic per seed.
pub fn sample_surface(obj: &ArticulatedObject, state: &JointState, n: usize, seed: u64) -> Result<PointCloud> {
    let samples = sample_surface_detailed(obj, state, n, seed)?;
    let (points, labels) = samples.into_iter().map(|s| (s.point, s.link_id)).unzip();
    PointCloud::new(points).with_labels(labels)
}

/// PCA frame of a point neighbourhood. Eigenvalues ascend.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalFrame {
    pub normal: Vector3<f64>,
    pub t1: Vector3<f64>,
    pub t2: Vector3<f64>,
    pub eigenvalues: [f64; 3],
}

pub(crate) fn local_frame(points: &[Point3<f64>], center: usize, nbrs: &[usize]) -> Option<LocalFrame> {
    let m = (nbrs.len() + 1) as f64;
    let mut mean = points[center].coords;
    for &j in nbrs {
        mean += points[j].coords;
    }
    mean /= m;
    let mut cov = Matrix3::zeros();
    for d in core::iter::once(center).chain(nbrs.iter().copied()).map(|j| points[j].coords - mean) {
        cov += d * d.transpose();
    }
    cov /= m;
    if !(cov.trace() > 1e-24) {
        return None;
    }
    let eig = SymmetricEigen::new(cov);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let normal = eig.eigenvectors.column(idx[0]).into_owned().normalize();
    let t1 = eig.eigenvectors.column(idx[2]).into_owned().normalize();
    let t2 = normal.cross(&t1).normalize();
    Some(LocalFrame {
        normal,
        t1,
        t2,
        eigenvalues: [eig.eigenvalues[idx[0]].max(0.0), eig.eigenvalues[idx[1]].max(0.0), eig.eigenvalues[idx[2]].max(0.0)],
    })
}

fn check_neighbors(cloud: &PointCloud, k: usize, min_k: usize) -> Result<()> {
    if k < min_k || cloud.len() <= k {
        return Err(Error::InvalidArgument(format!(
            "need {} <= k < N, got k = {k}, N = {}",
            min_k,
            cloud.len()
        )));
    }
    Ok(())
}

/// Normals plus a per-point flag for neighbourhoods where the normal is
/// undefined (all points coincident). Undefined normals point at the view
/// point so the cloud invariant of unit normals still holds.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    pub defined: Vec<bool>,
}

pub fn estimate_normals(cloud: &PointCloud, k: usize, view_point: Point3<f64>) -> Result<NormalEstimate> {
    check_neighbors(cloud, k, 3)?;
    let all: Vec<usize> = (0..cloud.len()).collect();
    let (normals, defined) = normals_at(cloud.points(), &KdTree::new(cloud.points()), &all, k, view_point);
    Ok(NormalEstimate { cloud: cloud.clone().with_normals(normals)?, defined })
}

/// Camera-aligned PCA normals for a subset of points.
pub(crate) fn normals_at(
    points: &[Point3<f64>],
    tree: &KdTree,
    which: &[usize],
    k: usize,
    view_point: Point3<f64>,
) -> (Vec<Vector3<f64>>, Vec<bool>) {
    let mut normals = Vec::with_capacity(which.len());
    let mut defined = Vec::with_capacity(which.len());
    for &i in which {
        let to_view = view_point - points[i];
        let nbrs = tree.knn(&points[i], k, Some(i));
        match local_frame(points, i, &nbrs) {
            Some(f) => {
                let n = if f.normal.dot(&to_view) < 0.0 { -f.normal } else { f.normal };
                normals.push(n);
                defined.push(true);
            }
            None => {
                normals.push(Unit::try_new(to_view, 1e-300).map(|u| u.into_inner()).unwrap_or(Vector3::z()));
                defined.push(false);
            }
        }
    }
    (normals, defined)
}

/// Gaussian curvature (1/m²) from a least-squares quadric
/// `z = a x² + b xy + c y² + d x + e y + f` in each point's PCA tangent
/// frame. Degenerate fits report `f64::INFINITY`.
pub fn estimate_gaussian_curvature(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    check_neighbors(cloud, k, 6)?;
    let pts = cloud.points();
    let tree = KdTree::new(pts);
    Ok((0..pts.len())
        .map(|i| {
            let nbrs = tree.knn(&pts[i], k, Some(i));
            quadric_curvature(pts, i, &nbrs).unwrap_or(f64::INFINITY)
        })
        .collect())
}

fn quadric_curvature(pts: &[Point3<f64>], i: usize, nbrs: &[usize]) -> Option<f64> {
    let frame = local_frame(pts, i, nbrs)?;
    let p = pts[i];
    let scale = nbrs.iter().map(|&j| (pts[j] - p).norm()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let mut ata = Matrix6::<f64>::zeros();
    let mut atb = Vector6::<f64>::zeros();
    for j in core::iter::once(i).chain(nbrs.iter().copied()) {
        let d = (pts[j] - p) / scale;
        let (x, y, z) = (d.dot(&frame.t1), d.dot(&frame.t2), d.dot(&frame.normal));
        let row = Vector6::new(x * x, x * y, y * y, x, y, 1.0);
        ata += row * row.transpose();
        atb += row * z;
    }
    let chol = ata.cholesky()?;
    let diag = chol.l_dirty().diagonal();
    let (dmin, dmax) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(dmin > 0.0) || (dmin / dmax) < 1e-7 {
        return None;
    }
    let c = chol.solve(&atb);
    let (hxx, hxy, hyy, hx, hy) = (2.0 * c[0], c[1], 2.0 * c[2], c[3], c[4]);
    let g = 1.0 + hx * hx + hy * hy;
    let k = (hxx * hyy - hxy * hxy) / (g * g) / (scale * scale);
    k.is_finite().then_some(k)
}

/// Boundary and crease detection.
///
/// A point is an edge when the largest angular gap between its neighbours,
/// projected into the tangent plane, exceeds `angle_gap_threshold`, or when
/// its neighbourhood is not sheet-like: the two smallest covariance
/// eigenvalues are within [`CREASE_EIGEN_RATIO`] of each other.
pub fn detect_edges(cloud: &PointCloud, k: usize, angle_gap_threshold: f64) -> Result<Vec<bool>> {
    check_neighbors(cloud, k, 6)?;
    let pts = cloud.points();
    let tree = KdTree::new(pts);
    Ok((0..pts.len())
        .map(|i| {
            let nbrs = tree.knn(&pts[i], k, Some(i));
            let Some(frame) = local_frame(pts, i, &nbrs) else {
                return false;
            };
            let [l0, l1, _] = frame.eigenvalues;
            if l1 < CREASE_EIGEN_RATIO * l0 {
                return true;
            }
            max_angular_gap(pts, i, &nbrs, &frame) > angle_gap_threshold
        })
        .collect())
}

pub(crate) fn max_angular_gap(pts: &[Point3<f64>], i: usize, nbrs: &[usize], frame: &LocalFrame) -> f64 {
    let mut angles: Vec<f64> = nbrs
        .iter()
        .filter_map(|&j| {
            let d = pts[j] - pts[i];
            let (x, y) = (d.dot(&frame.t1), d.dot(&frame.t2));
            (x * x + y * y > 0.0).then(|| libm::atan2(y, x))
        })
        .collect();
    if angles.len() < 2 {
        return core::f64::consts::TAU;
    }
    angles.sort_by(f64::total_cmp);
    let wrap = core::f64::consts::TAU - (angles[angles.len() - 1] - angles[0]);
    angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Geometry, LinkSpec};
    use alloc::vec;
    use core::f64::consts::PI;
    use rand::Rng;

    fn unit_box() -> ArticulatedObject {
        ArticulatedObject::new("b", vec![LinkSpec::new("b", Geometry::Box { extents: Vector3::new(1.0, 2.0, 3.0) }).unwrap()], vec![])
            .unwrap()
    }

    fn grid_plane(n: usize, spacing: f64) -> Vec<Point3<f64>> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                v.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
            }
        }
        v
    }

    fn sphere_points(n: usize, r: f64, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|_| {
                let z: f64 = rng.random_range(-1.0..1.0);
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                let s = libm::sqrt(1.0 - z * z);
                Point3::new(r * s * libm::cos(phi), r * s * libm::sin(phi), r * z)
            })
            .collect()
    }

    /// Quasi-uniform Fibonacci lattice on a sphere.
    fn fibonacci_sphere(n: usize, r: f64) -> Vec<Point3<f64>> {
        let golden = PI * (3.0 - libm::sqrt(5.0));
        (0..n)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                let s = libm::sqrt(1.0 - z * z);
                let phi = golden * i as f64;
                Point3::new(r * s * libm::cos(phi), r * s * libm::sin(phi), r * z)
            })
            .collect()
    }

    fn gaussian(rng: &mut impl Rng) -> f64 {
        let u1: f64 = rng.random_range(1e-12..1.0);
        let u2: f64 = rng.random();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
    }

    fn angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        libm::atan2(a.cross(b).norm(), a.dot(b))
    }

    #[test]
    fn box_faces_sampled_by_area() {
        let obj = unit_box();
        let n = 10_000;
        let samples = sample_surface_detailed(&obj, &obj.zero_state(), n, 3).unwrap();
        // Faces: ±x 2×3, ±y 1×3, ±z 1×2; total 22.
        let face_area = [6.0, 6.0, 3.0, 3.0, 2.0, 2.0];
        let mut counts = [0usize; 6];
        for s in &samples {
            counts[s.triangle_index / 2] += 1;
            assert!(s.barycentric.iter().all(|&w| w >= 0.0));
            assert!((s.barycentric.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for f in 0..6 {
            let p = face_area[f] / 22.0;
            let sigma = libm::sqrt(n as f64 * p * (1.0 - p));
            assert!((counts[f] as f64 - n as f64 * p).abs() <= 3.0 * sigma, "face {f}: {} vs {}", counts[f], n as f64 * p);
        }
    }

    #[test]
    fn sampling_cardinality_and_determinism() {
        let obj = unit_box();
        let one = sample_surface(&obj, &obj.zero_state(), 1, 9).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.link_labels().unwrap()[0], "b");
        let p = one.points()[0];
        let on_face = [p.x.abs() - 0.5, p.y.abs() - 1.0, p.z.abs() - 1.5].iter().any(|d| d.abs() < 1e-12);
        assert!(on_face);
        let a = sample_surface(&obj, &obj.zero_state(), 500, 42).unwrap();
        let b = sample_surface(&obj, &obj.zero_state(), 500, 42).unwrap();
        assert!(a.points().iter().zip(b.points()).all(|(x, y)| x.coords.iter().zip(y.coords.iter()).all(|(u, v)| u.to_bits() == v.to_bits())));
        assert!(matches!(sample_surface(&obj, &obj.zero_state(), 0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_area_object_rejected() {
        let obj = ArticulatedObject::new("e", vec![LinkSpec::new("e", Geometry::Empty).unwrap()], vec![]).unwrap();
        assert_eq!(sample_surface(&obj, &obj.zero_state(), 10, 1), Err(Error::ZeroArea));
    }

    #[test]
    fn plane_normals_face_camera() {
        let cloud = PointCloud::new(grid_plane(20, 0.01));
        let est = estimate_normals(&cloud, 8, Point3::new(0.0, 0.0, 1.0)).unwrap();
        for n in est.cloud.normals().unwrap() {
            assert!((n - Vector3::z()).norm() < 1e-9);
        }
        assert!(est.defined.iter().all(|d| *d));
        let below = estimate_normals(&cloud, 8, Point3::new(0.0, 0.0, -1.0)).unwrap();
        assert!(below.cloud.normals().unwrap().iter().all(|n| n.z < -0.999_999));
    }

    #[test]
    fn coincident_neighbourhood_flagged() {
        let cloud = PointCloud::new(vec![Point3::new(1.0, 1.0, 1.0); 10]);
        let est = estimate_normals(&cloud, 4, Point3::origin()).unwrap();
        assert!(est.defined.iter().all(|d| !d));
        assert!(matches!(estimate_normals(&cloud, 10, Point3::origin()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn sphere_normals_are_radial() {
        let pts = fibonacci_sphere(2000, 1.0);
        let est = estimate_normals(&PointCloud::new(pts.clone()), 16, Point3::new(0.0, 0.0, 100.0)).unwrap();
        let ns = est.cloud.normals().unwrap();
        for (p, n) in pts.iter().zip(ns) {
            // Sign follows the camera, so compare lines rather than rays.
            let a = angle(n, &p.coords).min(angle(&-n, &p.coords));
            assert!(a < 5f64.to_radians(), "{}", a.to_degrees());
        }
    }

    #[test]
    fn noisy_plane_normals() {
        let mut rng = seeded_rng(11);
        let pts: Vec<_> = (0..3000)
            .map(|_| Point3::new(rng.random_range(0.0..0.5), rng.random_range(0.0..0.5), 1e-3 * gaussian(&mut rng)))
            .collect();
        let est = estimate_normals(&PointCloud::new(pts), 32, Point3::new(0.25, 0.25, 1.0)).unwrap();
        let ns = est.cloud.normals().unwrap();
        let mean = ns.iter().map(|n| angle(n, &Vector3::z())).sum::<f64>() / ns.len() as f64;
        assert!(mean < 2f64.to_radians(), "mean error {}°", mean.to_degrees());
    }

    #[test]
    fn plane_curvature_near_zero() {
        let cloud = PointCloud::new(grid_plane(30, 0.01));
        let k = estimate_gaussian_curvature(&cloud, 16).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                if (3..27).contains(&i) && (3..27).contains(&j) {
                    assert!(k[i * 30 + j].abs() < 1e-2);
                }
            }
        }
    }

    #[test]
    fn sphere_curvature() {
        let r = 0.1;
        let cloud = PointCloud::new(sphere_points(6000, r, 8));
        let k = estimate_gaussian_curvature(&cloud, 16).unwrap();
        let within = k.iter().filter(|&&v| (v - 100.0).abs() <= 20.0).count();
        assert_eq!(within, k.len(), "min {:?} max {:?}", k.iter().cloned().fold(f64::INFINITY, f64::min), k.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn cylinder_curvature_near_zero() {
        let mut rng = seeded_rng(13);
        let r = 0.1;
        let pts: Vec<_> = (0..6000)
            .map(|_| {
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                Point3::new(r * libm::cos(phi), r * libm::sin(phi), rng.random_range(0.0..0.6))
            })
            .collect();
        let k = estimate_gaussian_curvature(&PointCloud::new(pts.clone()), 16).unwrap();
        for (p, v) in pts.iter().zip(&k) {
            if p.z > 0.05 && p.z < 0.55 {
                assert!(v.abs() < 10.0, "κ = {v} at z = {}", p.z);
            }
        }
    }

    #[test]
    fn collinear_neighbourhood_is_degenerate() {
        let pts: Vec<_> = (0..20).map(|i| Point3::new(i as f64 * 0.01, 0.0, 0.0)).collect();
        let k = estimate_gaussian_curvature(&PointCloud::new(pts), 8).unwrap();
        assert!(k.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn plane_interior_and_boundary_edges() {
        let n = 30;
        let cloud = PointCloud::new(grid_plane(n, 0.01));
        let flags = detect_edges(&cloud, 16, DEFAULT_ANGLE_GAP).unwrap();
        // Interior point.
        assert!(!flags[15 * n + 15]);
        // Middle of the straight boundary y = 0 of the sampled half-plane.
        assert!(flags[15 * n]);
    }

    #[test]
    fn half_plane_gap_oracle() {
        // Constructed neighbourhood: eight neighbours spread over the upper
        // half-plane only; the exhaustive gap is the π wrap-around.
        let mut pts = vec![Point3::origin()];
        for i in 0..8 {
            let a = PI * i as f64 / 7.0;
            pts.push(Point3::new(libm::cos(a), libm::sin(a), 0.0) * (0.5 + 0.05 * i as f64));
        }
        let nbrs: Vec<usize> = (1..9).collect();
        let frame = local_frame(&pts, 0, &nbrs).unwrap();
        let gap = max_angular_gap(&pts, 0, &nbrs, &frame);
        assert!((gap - PI).abs() < 1e-12, "{gap}");
    }

    #[test]
    fn crease_flagged_by_eigenvalues() {
        // Two orthogonal half-planes meeting along the x axis.
        let mut pts = Vec::new();
        for i in 0..21 {
            for j in 0..10 {
                let x = (i as f64 - 10.0) * 0.01;
                let t = (j + 1) as f64 * 0.01;
                pts.push(Point3::new(x, t, 0.0));
                pts.push(Point3::new(x, 0.0, t));
            }
            pts.push(Point3::new((i as f64 - 10.0) * 0.01, 0.0, 0.0));
        }
        let crease = pts.iter().position(|p| *p == Point3::origin()).unwrap();
        let k = 24;
        let tree = KdTree::new(&pts);
        let nbrs = tree.knn(&pts[crease], k, Some(crease));
        let frame = local_frame(&pts, crease, &nbrs).unwrap();
        let [l0, l1, _] = frame.eigenvalues;
        assert!(l1 < CREASE_EIGEN_RATIO * l0, "{l0} {l1}");
        // The boundary test alone would not catch it.
        assert!(max_angular_gap(&pts, crease, &nbrs, &frame) < DEFAULT_ANGLE_GAP);
        let flags = detect_edges(&PointCloud::new(pts), k, DEFAULT_ANGLE_GAP).unwrap();
        assert!(flags[crease]);
    }

    #[test]
    fn rigid_invariance_of_normals_curvature_edges() {
        let pts = sphere_points(1500, 0.2, 21);
        let cloud = PointCloud::new(pts);
        let t = Pose::new(Vector3::new(0.3, -1.2, 2.0), Vector3::new(0.4, -0.9, 1.3));
        let view = Point3::new(0.0, 0.0, 5.0);
        let a = estimate_normals(&cloud, 16, view).unwrap();
        let b = estimate_normals(&cloud.transformed(&t), 16, t * view).unwrap();
        for (na, nb) in a.cloud.normals().unwrap().iter().zip(b.cloud.normals().unwrap()) {
            assert!(angle(&(t.rotation * na), nb) < 1e-6);
        }
        let ka = estimate_gaussian_curvature(&cloud, 16).unwrap();
        let kb = estimate_gaussian_curvature(&cloud.transformed(&t), 16).unwrap();
        for (x, y) in ka.iter().zip(&kb) {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
        }
        let scaled = PointCloud::new(cloud.points().iter().map(|p| Point3::from(p.coords * 3.0)).collect());
        let ks = estimate_gaussian_curvature(&scaled, 16).unwrap();
        for (x, y) in ka.iter().zip(&ks) {
            assert!((x / 9.0 - y).abs() <= 1e-6 * y.abs().max(1.0));
        }
        let plane = PointCloud::new(grid_plane(25, 0.01));
        let ea = detect_edges(&plane, 16, DEFAULT_ANGLE_GAP).unwrap();
        let eb = detect_edges(&plane.transformed(&t), 16, DEFAULT_ANGLE_GAP).unwrap();
        assert_eq!(ea, eb);
    }
}
