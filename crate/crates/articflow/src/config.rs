//! Run configuration: defaults, overridden by a TOML file, overridden by
//! command-line flags.
//!
//! ```toml
//! seed = 7
//! jobs = 4
//! estimators = ["oracle", "normal", "screw:20"]
//! repetitions = 1
//!
//! [rollout]
//! max_steps = 50
//! step_size = 0.01
//! delta = 0.1
//! contact_radius = 0.05
//! break_angle_deg = 60
//!
//! [grasp]
//! edge_clearance = 0.02
//! curvature_max = 500
//! neighbors = 16
//!
//! [camera]
//! size = 256
//! focal = 256
//! elevation_deg = 30
//! azimuth_deg = 35
//! distance_scale = 1.6
//!
//! [observation]
//! modes = ["full", "camera"]
//! points = 12000
//! stride = 2
//! ```

use std::path::Path;

use articflow_core::camera::{CameraPlacement, Intrinsics};
use articflow_core::eval::{NamedEstimator, SuiteConfig};
use articflow_core::policy::{FlowEstimator, ObservationMode, ScrewPerturbation};
use serde::Deserialize;

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub estimators: Option<Vec<String>>,
    pub repetitions: Option<usize>,
    #[serde(default)]
    pub rollout: RolloutSection,
    #[serde(default)]
    pub grasp: GraspSection,
    #[serde(default)]
    pub camera: CameraSection,
    #[serde(default)]
    pub observation: ObservationSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSection {
    pub max_steps: Option<usize>,
    pub step_size: Option<f64>,
    pub delta: Option<f64>,
    pub contact_radius: Option<f64>,
    pub break_angle_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspSection {
    pub edge_clearance: Option<f64>,
    pub curvature_max: Option<f64>,
    pub neighbors: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub size: Option<u32>,
    pub focal: Option<f64>,
    pub elevation_deg: Option<f64>,
    pub azimuth_deg: Option<f64>,
    pub distance_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    pub modes: Option<Vec<String>>,
    pub points: Option<usize>,
    pub stride: Option<u32>,
}

impl FileConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    /// Layers `other` on top of `self`: values set in `other` win.
    pub fn overlay(self, other: FileConfig) -> FileConfig {
        fn pick<T>(a: Option<T>, b: Option<T>) -> Option<T> {
            b.or(a)
        }
        FileConfig {
            seed: pick(self.seed, other.seed),
            jobs: pick(self.jobs, other.jobs),
            estimators: pick(self.estimators, other.estimators),
            repetitions: pick(self.repetitions, other.repetitions),
            rollout: RolloutSection {
                max_steps: pick(self.rollout.max_steps, other.rollout.max_steps),
                step_size: pick(self.rollout.step_size, other.rollout.step_size),
                delta: pick(self.rollout.delta, other.rollout.delta),
                contact_radius: pick(self.rollout.contact_radius, other.rollout.contact_radius),
                break_angle_deg: pick(self.rollout.break_angle_deg, other.rollout.break_angle_deg),
            },
            grasp: GraspSection {
                edge_clearance: pick(self.grasp.edge_clearance, other.grasp.edge_clearance),
                curvature_max: pick(self.grasp.curvature_max, other.grasp.curvature_max),
                neighbors: pick(self.grasp.neighbors, other.grasp.neighbors),
            },
            camera: CameraSection {
                size: pick(self.camera.size, other.camera.size),
                focal: pick(self.camera.focal, other.camera.focal),
                elevation_deg: pick(self.camera.elevation_deg, other.camera.elevation_deg),
                azimuth_deg: pick(self.camera.azimuth_deg, other.camera.azimuth_deg),
                distance_scale: pick(self.camera.distance_scale, other.camera.distance_scale),
            },
            observation: ObservationSection {
                modes: pick(self.observation.modes, other.observation.modes),
                points: pick(self.observation.points, other.observation.points),
                stride: pick(self.observation.stride, other.observation.stride),
            },
        }
    }

    pub fn placement(&self) -> Result<CameraPlacement> {
        let d = CameraPlacement::default();
        let c = &self.camera;
        let intrinsics = match (c.size, c.focal) {
            (None, None) => d.intrinsics,
            (size, focal) => {
                let size = size.unwrap_or(d.intrinsics.width);
                let focal = focal.unwrap_or(d.intrinsics.fx * size as f64 / d.intrinsics.width as f64);
                let half = size as f64 / 2.0;
                Intrinsics { fx: focal, fy: focal, cx: half, cy: half, width: size, height: size }
            }
        };
        intrinsics.validate()?;
        let placement = CameraPlacement {
            elevation: c.elevation_deg.map_or(d.elevation, f64::to_radians),
            azimuth: c.azimuth_deg.map_or(d.azimuth, f64::to_radians),
            distance_scale: c.distance_scale.unwrap_or(d.distance_scale),
            intrinsics,
        };
        if !(placement.distance_scale > 0.0) {
            return Err(Error::Format("camera distance_scale must be positive".to_string()));
        }
        Ok(placement)
    }

    pub fn mode(&self, name: &str) -> Result<ObservationMode> {
        let placement = self.placement()?;
        match name {
            "full" => {
                let ObservationMode::Full { points, .. } = ObservationMode::full() else { unreachable!() };
                let points = self.observation.points.unwrap_or(points);
                if points == 0 {
                    return Err(Error::Format("observation points must be positive".to_string()));
                }
                Ok(ObservationMode::Full { points, placement })
            }
            "camera" => {
                let ObservationMode::Camera { stride, .. } = ObservationMode::camera() else { unreachable!() };
                let stride = self.observation.stride.unwrap_or(stride);
                if stride == 0 {
                    return Err(Error::Format("observation stride must be positive".to_string()));
                }
                Ok(ObservationMode::Camera { placement, stride })
            }
            other => Err(Error::Format(format!("unknown observation mode `{other}` (expected full or camera)"))),
        }
    }

    pub fn suite_config(&self) -> Result<SuiteConfig> {
        let mut cfg = SuiteConfig::default();
        let r = &self.rollout;
        cfg.rollout.max_steps = r.max_steps.unwrap_or(cfg.rollout.max_steps);
        cfg.rollout.step_size = r.step_size.unwrap_or(cfg.rollout.step_size);
        cfg.rollout.success_threshold = r.delta.unwrap_or(cfg.rollout.success_threshold);
        cfg.rollout.contact_radius = r.contact_radius.unwrap_or(cfg.rollout.contact_radius);
        cfg.rollout.break_angle = r.break_angle_deg.map_or(cfg.rollout.break_angle, f64::to_radians);
        cfg.rollout.validate()?;
        let g = &self.grasp;
        cfg.constraints.edge_clearance = g.edge_clearance.unwrap_or(cfg.constraints.edge_clearance);
        cfg.constraints.curvature_max = g.curvature_max.unwrap_or(cfg.constraints.curvature_max);
        cfg.constraints.neighbor_k = g.neighbors.unwrap_or(cfg.constraints.neighbor_k);
        cfg.constraints.validate()?;
        let names = self.observation.modes.clone().unwrap_or_else(|| vec!["full".into(), "camera".into()]);
        if names.is_empty() {
            return Err(Error::Format("no observation modes".to_string()));
        }
        cfg.modes = names.iter().map(|n| self.mode(n)).collect::<Result<_>>()?;
        cfg.repetitions = self.repetitions.unwrap_or(1);
        if cfg.repetitions == 0 {
            return Err(Error::Format("repetitions must be positive".to_string()));
        }
        Ok(cfg)
    }

    pub fn estimators(&self) -> Result<Vec<NamedEstimator>> {
        let names = self.estimators.clone().unwrap_or_else(|| DEFAULT_ESTIMATORS.iter().map(|s| s.to_string()).collect());
        names.iter().map(|n| Ok(NamedEstimator::new(n.clone(), parse_estimator(n)?))).collect()
    }
}

pub const DEFAULT_ESTIMATORS: [&str; 4] = ["oracle", "normal", "screw:0", "screw:20"];

/// `oracle`, `normal`, `screw`, `screw:<tilt degrees>` or
/// `screw:<tilt degrees>:<origin offset metres>`.
pub fn parse_estimator(token: &str) -> Result<FlowEstimator> {
    let mut parts = token.split(':');
    let head = parts.next().unwrap_or("");
    let nums: Vec<f64> = parts
        .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Format(format!("invalid estimator parameters in `{token}`")))?;
    match (head, nums.as_slice()) {
        ("oracle", []) => Ok(FlowEstimator::OracleGt),
        ("normal", []) => Ok(FlowEstimator::NormalDirection),
        ("screw", rest) if rest.len() <= 2 => Ok(FlowEstimator::ScrewParameters(ScrewPerturbation {
            direction_angle: rest.first().copied().unwrap_or(0.0).to_radians(),
            origin_offset: rest.get(1).copied().unwrap_or(0.0),
            seed: 0,
        })),
        _ => Err(Error::Format(format!("unknown estimator `{token}` (expected oracle, normal or screw[:deg[:offset]])"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = FileConfig::parse("seed = 3\njobs = 2\n[rollout]\nmax_steps = 20\ndelta = 0.2\n", "t").unwrap();
        let flags = FileConfig { seed: Some(9), rollout: RolloutSection { max_steps: Some(30), ..Default::default() }, ..Default::default() };
        let merged = file.overlay(flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.jobs, Some(2));
        let cfg = merged.suite_config().unwrap();
        assert_eq!(cfg.rollout.max_steps, 30);
        assert_eq!(cfg.rollout.success_threshold, 0.2);
        assert_eq!(cfg.modes.len(), 2);
    }

    #[test]
    fn unknown_keys_and_modes_are_errors() {
        assert!(FileConfig::parse("sead = 3\n", "t").is_err());
        let c = FileConfig::parse("[observation]\nmodes = [\"lidar\"]\n", "t").unwrap();
        assert!(c.suite_config().is_err());
        let c = FileConfig::parse("[rollout]\nstep_size = -1.0\n", "t").unwrap();
        assert!(c.suite_config().is_err());
    }

    #[test]
    fn estimator_tokens() {
        assert_eq!(parse_estimator("oracle").unwrap(), FlowEstimator::OracleGt);
        assert_eq!(parse_estimator("normal").unwrap(), FlowEstimator::NormalDirection);
        let FlowEstimator::ScrewParameters(p) = parse_estimator("screw:20:0.05").unwrap() else { panic!() };
        assert!((p.direction_angle - 20f64.to_radians()).abs() < 1e-15);
        assert_eq!(p.origin_offset, 0.05);
        assert!(parse_estimator("screw:x").is_err());
        assert!(parse_estimator("oracle:1").is_err());
        assert!(parse_estimator("learned").is_err());
        assert_eq!(FileConfig::default().estimators().unwrap().len(), 4);
    }
}
