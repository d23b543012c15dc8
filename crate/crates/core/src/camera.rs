//! Simulated pinhole depth camera.
//!
//! Camera frame: +z forward, +x right, +y down. Pixel `(u, v)` samples the
//! ray through image coordinates `(u, v)`, so the principal point `(cx, cy)`
//! looks straight down the optical axis.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::model::{ArticulatedObject, JointState};
use crate::{seeded_rng, Pose};

const NEAR_PLANE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self { fx: 256.0, fy: 256.0, cx: 128.0, cy: 128.0, width: 256, height: 256 }
    }
}

impl Intrinsics {
    /// Square image of `size` pixels with focal length equal to `size`.
    pub fn square(size: u32) -> Self {
        let s = size as f64;
        Self { fx: s, fy: s, cx: s / 2.0, cy: s / 2.0, width: size, height: size }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if !ok {
            return Err(Error::InvalidArgument(alloc::format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    pub world_to_camera: Pose,
}

impl CameraModel {
    pub fn new(intrinsics: Intrinsics, world_to_camera: Pose) -> Result<Self> {
        intrinsics.validate()?;
        Ok(Self { intrinsics, world_to_camera })
    }

    /// Camera at `eye` looking at `target`, with `up` projecting to image-up.
    pub fn look_at(intrinsics: Intrinsics, eye: Point3<f64>, target: Point3<f64>, up: Vector3<f64>) -> Result<Self> {
        let forward = target - eye;
        let z = forward
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidArgument("eye and target coincide".to_string()))?;
        let x = z
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidArgument("view direction parallel to up".to_string()))?;
        let y = z.cross(&x);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]));
        let rotation = UnitQuaternion::from_rotation_matrix(&rot);
        let translation = Translation3::from(-(rotation * eye.coords));
        Self::new(intrinsics, Isometry3::from_parts(translation, rotation))
    }

    /// Camera center in world coordinates.
    pub fn eye(&self) -> Point3<f64> {
        self.world_to_camera.inverse() * Point3::origin()
    }

    pub fn camera_to_world(&self) -> Pose {
        self.world_to_camera.inverse()
    }
}

/// Depth in meters per pixel with a parallel link id buffer.
/// Background pixels hold `f64::INFINITY` and no id.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    depth: Vec<f64>,
    ids: Vec<u32>,
    link_names: Vec<String>,
}

const NO_ID: u32 = u32::MAX;

impl DepthImage {
    pub fn background(width: u32, height: u32) -> Self {
        let n = (width * height) as usize;
        Self { width, height, depth: alloc::vec![f64::INFINITY; n], ids: alloc::vec![NO_ID; n], link_names: Vec::new() }
    }

    pub fn depth(&self, u: u32, v: u32) -> f64 {
        self.depth[(v * self.width + u) as usize]
    }

    pub fn link_at(&self, u: u32, v: u32) -> Option<&str> {
        match self.ids[(v * self.width + u) as usize] {
            NO_ID => None,
            id => Some(self.link_names[id as usize].as_str()),
        }
    }

    pub fn depths(&self) -> &[f64] {
        &self.depth
    }

    pub fn foreground_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }

    /// Sets one pixel; used by tests and importers of external depth maps.
    pub fn set(&mut self, u: u32, v: u32, depth: f64, link: Option<&str>) {
        let i = (v * self.width + u) as usize;
        self.depth[i] = depth;
        self.ids[i] = match link {
            None => NO_ID,
            Some(name) => match self.link_names.iter().position(|n| n == name) {
                Some(p) => p as u32,
                None => {
                    self.link_names.push(name.to_string());
                    (self.link_names.len() - 1) as u32
                }
            },
        };
    }
}

/// Z-buffer rasterization of every posed link triangle, both windings.
pub fn render_depth(obj: &ArticulatedObject, state: &JointState, camera: &CameraModel) -> Result<DepthImage> {
    camera.intrinsics.validate()?;
    let poses = obj.link_poses(state)?;
    let k = &camera.intrinsics;
    let mut img = DepthImage::background(k.width, k.height);
    img.link_names = obj.links().iter().map(|l| l.id.clone()).collect();
    for (li, link) in obj.links().iter().enumerate() {
        let Some(mesh) = link.geometry.to_mesh() else { continue };
        let to_cam = camera.world_to_camera * poses[li];
        for ti in 0..mesh.triangles().len() {
            let t = mesh.triangle(ti);
            let cam = [to_cam * t[0], to_cam * t[1], to_cam * t[2]];
            let poly = clip_near(&cam);
            for fan in 1..poly.len().saturating_sub(1) {
                raster_triangle(&mut img, k, [poly[0], poly[fan], poly[fan + 1]], li as u32);
            }
        }
    }
    Ok(img)
}

/// Sutherland–Hodgman clip against `z >= NEAR_PLANE`.
fn clip_near(tri: &[Point3<f64>; 3]) -> Vec<Point3<f64>> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.z >= NEAR_PLANE;
        let b_in = b.z >= NEAR_PLANE;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let s = (NEAR_PLANE - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * s;
            p.z = NEAR_PLANE;
            out.push(p);
        }
    }
    out
}

fn raster_triangle(img: &mut DepthImage, k: &Intrinsics, tri: [Point3<f64>; 3], id: u32) {
    let proj = tri.map(|p| (k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy, 1.0 / p.z));
    let area = edge(proj[0], proj[1], proj[2].0, proj[2].1);
    if !(area.abs() > 1e-12) {
        return;
    }
    let min_u = proj.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_u = proj.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_v = proj.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_v = proj.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if max_u < 0.0 || max_v < 0.0 || min_u > (k.width - 1) as f64 || min_v > (k.height - 1) as f64 {
        return;
    }
    let u0 = libm::ceil(min_u.max(0.0)) as u32;
    let u1 = libm::floor(max_u.min((k.width - 1) as f64)) as u32;
    let v0 = libm::ceil(min_v.max(0.0)) as u32;
    let v1 = libm::floor(max_v.min((k.height - 1) as f64)) as u32;
    for v in v0..=v1 {
        let y = v as f64;
        for u in u0..=u1 {
            let x = u as f64;
            let w0 = edge(proj[1], proj[2], x, y) / area;
            let w1 = edge(proj[2], proj[0], x, y) / area;
            let w2 = edge(proj[0], proj[1], x, y) / area;
            if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                continue;
            }
            // Inverse depth is affine in screen space for a planar triangle.
            let inv_z = w0 * proj[0].2 + w1 * proj[1].2 + w2 * proj[2].2;
            let z = 1.0 / inv_z;
            let i = (v * img.width + u) as usize;
            if z < img.depth[i] {
                img.depth[i] = z;
                img.ids[i] = id;
            }
        }
    }
}

fn edge(a: (f64, f64, f64), b: (f64, f64, f64), x: f64, y: f64) -> f64 {
    (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
}

/// World-frame cloud of every `stride`-th foreground pixel, labeled from
/// the id buffer, with the camera center as sensor origin. An all-background
/// image yields an empty cloud.
pub fn backproject(depth: &DepthImage, camera: &CameraModel, stride: u32) -> Result<PointCloud> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".to_string()));
    }
    let k = &camera.intrinsics;
    let to_world = camera.camera_to_world();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for v in (0..depth.height).step_by(stride as usize) {
        for u in (0..depth.width).step_by(stride as usize) {
            let z = depth.depth(u, v);
            if !z.is_finite() {
                continue;
            }
            let p = Point3::new((u as f64 - k.cx) * z / k.fx, (v as f64 - k.cy) * z / k.fy, z);
            points.push(to_world * p);
            labels.push(depth.link_at(u, v).unwrap_or("").to_string());
        }
    }
    Ok(PointCloud::new(points).with_labels(labels)?.with_sensor_origin(camera.eye()))
}

/// Spherical-coordinate sampling box for viewpoint augmentation. Angles in
/// radians; azimuth 0 looks from +x, elevation is above the xy plane.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ViewpointRanges {
    pub elevation: (f64, f64),
    pub azimuth: (f64, f64),
    pub distance: (f64, f64),
}

impl ViewpointRanges {
    /// Elevation 15°–60°, azimuth ±60°, distance 1–2× the object diagonal.
    pub fn for_diagonal(diagonal: f64) -> Self {
        Self {
            elevation: (15f64.to_radians(), 60f64.to_radians()),
            azimuth: (-60f64.to_radians(), 60f64.to_radians()),
            distance: (diagonal, 2.0 * diagonal),
        }
    }
}

/// Camera position for spherical coordinates around `lookat`.
pub fn spherical_eye(lookat: Point3<f64>, elevation: f64, azimuth: f64, distance: f64) -> Point3<f64> {
    let ce = libm::cos(elevation);
    lookat + Vector3::new(ce * libm::cos(azimuth), ce * libm::sin(azimuth), libm::sin(elevation)) * distance
}

pub fn random_viewpoint(
    seed: u64,
    ranges: &ViewpointRanges,
    lookat: Point3<f64>,
    intrinsics: Intrinsics,
) -> Result<CameraModel> {
    let sample = |rng: &mut rand_chacha::ChaCha8Rng, (lo, hi): (f64, f64), what: &str| -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(alloc::format!("empty {what} range [{lo}, {hi}]")));
        }
        let u: f64 = rng.random();
        Ok(lo + (hi - lo) * u)
    };
    let mut rng = seeded_rng(seed);
    let el = sample(&mut rng, ranges.elevation, "elevation")?;
    let az = sample(&mut rng, ranges.azimuth, "azimuth")?;
    let d = sample(&mut rng, ranges.distance, "distance")?;
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("camera distance must be positive".to_string()));
    }
    CameraModel::look_at(intrinsics, spherical_eye(lookat, el, az, d), lookat, Vector3::z())
}

/// Axis-aligned bounds of all posed geometry, or `None` for an empty object.
pub fn bounding_box(obj: &ArticulatedObject, state: &JointState) -> Result<Option<(Point3<f64>, Point3<f64>)>> {
    let poses = obj.link_poses(state)?;
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for (li, link) in obj.links().iter().enumerate() {
        if let Some(mesh) = link.geometry.to_mesh() {
            for v in mesh.vertices() {
                let p = poses[li] * v;
                lo = lo.inf(&p.coords);
                hi = hi.sup(&p.coords);
            }
        }
    }
    Ok(lo.x.is_finite().then(|| (Point3::from(lo), Point3::from(hi))))
}

/// Fixed viewpoint used for rollouts: looks at the object's bounding-box
/// center from the given angles at `distance_scale` × diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraPlacement {
    pub elevation: f64,
    pub azimuth: f64,
    pub distance_scale: f64,
    pub intrinsics: Intrinsics,
}

impl Default for CameraPlacement {
    fn default() -> Self {
        Self {
            elevation: 30f64.to_radians(),
            azimuth: 35f64.to_radians(),
            distance_scale: 1.6,
            intrinsics: Intrinsics::default(),
        }
    }
}

impl CameraPlacement {
    /// Camera framing the object both at `state` and with every joint at
    /// its upper limit, so moving parts stay in view while they open.
    pub fn camera_for(&self, obj: &ArticulatedObject, state: &JointState) -> Result<CameraModel> {
        let open = obj.joints().iter().fold(state.clone(), |s, j| s.with(&j.id, j.upper));
        let boxes = [bounding_box(obj, state)?, bounding_box(obj, &open)?];
        let (lo, hi) = boxes
            .into_iter()
            .flatten()
            .reduce(|(l0, h0), (l1, h1)| (Point3::from(l0.coords.inf(&l1.coords)), Point3::from(h0.coords.sup(&h1.coords))))
            .unwrap_or((Point3::origin(), Point3::origin()));
        let center = nalgebra::center(&lo, &hi);
        let diag = (hi - lo).norm().max(0.1);
        let eye = spherical_eye(center, self.elevation, self.azimuth, self.distance_scale * diag);
        CameraModel::look_at(self.intrinsics, eye, center, Vector3::z())
    }
}
