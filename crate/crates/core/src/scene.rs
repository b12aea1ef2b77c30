//! Task scenes: the surface to cover, obstacles, and where the base may park.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{PlanarPolygon, ReachLimits, SamplingRegion};
use crate::sld::OrientedPointCloud;

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Oriented points of the surface to cover, world frame.
    pub task_cloud: OrientedPointCloud,
    /// Points the arm must not touch, world frame.
    pub obstacle_cloud: OrientedPointCloud,
    /// Floor-plan outlines the base footprint must stay clear of.
    pub footprint_obstacles: Vec<PlanarPolygon>,
    pub region: SamplingRegion,
    /// Overrides the default distance band between arm root and task.
    pub reach: Option<ReachLimits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonSpec {
    pub vertices: PlanarPolygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub xy_step: f64,
    /// Evenly spaced headings over the full turn. Ignored when `theta_values` is given.
    #[serde(default)]
    pub headings: Option<usize>,
    /// Explicit headings in radians.
    #[serde(default)]
    pub theta_values: Option<Vec<f64>>,
}

impl RegionSpec {
    fn to_region(&self) -> Result<SamplingRegion> {
        let theta_values = match (&self.theta_values, self.headings) {
            (Some(t), _) => t.clone(),
            (None, Some(n)) if n > 0 => SamplingRegion::even_headings(n),
            _ => {
                return Err(Error::parse(
                    "scene file",
                    "region needs headings or theta_values",
                ))
            }
        };
        let region = SamplingRegion {
            x_range: self.x_range,
            y_range: self.y_range,
            xy_step: self.xy_step,
            theta_values,
        };
        region.validate()?;
        Ok(region)
    }
}

/// On-disk layout of a scene (TOML). Cloud paths are relative to the scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub task_cloud: PathBuf,
    #[serde(default)]
    pub obstacle_cloud: Option<PathBuf>,
    #[serde(default, rename = "footprint_obstacle")]
    pub footprint_obstacles: Vec<PolygonSpec>,
    pub region: RegionSpec,
    #[serde(default)]
    pub reach: Option<ReachLimits>,
}

impl Scene {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let file: SceneFile = toml::from_str(&text).map_err(|e| Error::parse("scene file", e))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let task_cloud = OrientedPointCloud::load(dir.join(&file.task_cloud))?;
        let obstacle_cloud = match &file.obstacle_cloud {
            Some(p) => OrientedPointCloud::load(dir.join(p))?,
            None => OrientedPointCloud::default(),
        };
        Ok(Self {
            task_cloud,
            obstacle_cloud,
            footprint_obstacles: file.footprint_obstacles.into_iter().map(|p| p.vertices).collect(),
            region: file.region.to_region()?,
            reach: file.reach,
        })
    }

    /// Writes `<stem>.toml`, `<stem>-task.xyz` and `<stem>-obstacles.xyz` into `dir` and
    /// returns the scene file path.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let task = format!("{stem}-task.xyz");
        let obstacles = format!("{stem}-obstacles.xyz");
        std::fs::write(dir.join(&task), self.task_cloud.to_text())?;
        std::fs::write(dir.join(&obstacles), self.obstacle_cloud.to_text())?;
        let file = SceneFile {
            task_cloud: task.into(),
            obstacle_cloud: Some(obstacles.into()),
            footprint_obstacles: self
                .footprint_obstacles
                .iter()
                .map(|p| PolygonSpec { vertices: p.clone() })
                .collect(),
            region: RegionSpec {
                x_range: self.region.x_range,
                y_range: self.region.y_range,
                xy_step: self.region.xy_step,
                headings: None,
                theta_values: Some(self.region.theta_values.clone()),
            },
            reach: self.reach,
        };
        let path = dir.join(format!("{stem}.toml"));
        std::fs::write(&path, toml::to_string(&file).expect("scene serializes"))?;
        Ok(path)
    }
}

/// Shape of the synthetic washbasin counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WashbasinParams {
    pub basins: usize,
    pub counter_length: f64,
    pub counter_depth: f64,
    pub counter_height: f64,
    /// Radius of each basin's opening in the counter top.
    pub opening_radius: f64,
    pub basin_depth: f64,
    /// Spacing of the sampled task points.
    pub point_spacing: f64,
    pub obstacle_spacing: f64,
    pub xy_step: f64,
}

impl Default for WashbasinParams {
    fn default() -> Self {
        Self {
            basins: 3,
            counter_length: 1.8,
            counter_depth: 0.6,
            counter_height: 0.85,
            opening_radius: 0.21,
            basin_depth: 0.09,
            point_spacing: 0.01,
            obstacle_spacing: 0.03,
            xy_step: 0.1,
        }
    }
}

impl WashbasinParams {
    pub fn basin_centers(&self) -> Vec<[f64; 2]> {
        let pitch = self.counter_length / self.basins as f64;
        (0..self.basins)
            .map(|i| [pitch * (i as f64 + 0.5), self.counter_depth / 2.0])
            .collect()
    }
}

/// Counter along x from 0 to its length, back wall at `y = depth`, robot side at `y < 0`.
/// The task is the inside of the spherical-cap basins, with normals pointing into the bowl.
/// Obstacles are the counter top around the openings, the cabinet front and the back wall.
pub fn washbasin(params: &WashbasinParams) -> Scene {
    let p = params;
    let h = p.counter_height;
    let a = p.opening_radius;
    let sphere = (a * a + p.basin_depth * p.basin_depth) / (2.0 * p.basin_depth);
    let centre_z = h - p.basin_depth + sphere;
    let centers = p.basin_centers();

    let mut points = Vec::new();
    let mut normals = Vec::new();
    for c in &centers {
        // rings of constant spacing across the opening disc
        let rings = (a / p.point_spacing).ceil() as usize;
        for ring in 0..=rings {
            let rho = a * ring as f64 / rings as f64;
            let count = ((TAU * rho / p.point_spacing).ceil() as usize).max(1);
            for k in 0..count {
                let phi = TAU * k as f64 / count as f64;
                let x = c[0] + rho * phi.cos();
                let y = c[1] + rho * phi.sin();
                let z = centre_z - (sphere * sphere - rho * rho).sqrt();
                let pt = Vector3::new(x, y, z);
                points.push(pt);
                normals.push((Vector3::new(c[0], c[1], centre_z) - pt) / sphere);
            }
        }
    }
    let task_cloud = OrientedPointCloud::new(points, normals).expect("unit normals");

    let s = p.obstacle_spacing;
    let steps = |len: f64| (len / s).round().max(1.0) as usize;
    let mut obstacles = Vec::new();
    let (nx, ny) = (steps(p.counter_length), steps(p.counter_depth));
    for i in 0..=nx {
        for j in 0..=ny {
            let x = p.counter_length * i as f64 / nx as f64;
            let y = p.counter_depth * j as f64 / ny as f64;
            if centers.iter().all(|c| (x - c[0]).hypot(y - c[1]) > a) {
                obstacles.push(Vector3::new(x, y, h));
            }
        }
    }
    let nz = steps(h);
    for i in 0..=nx {
        for k in 0..nz {
            let x = p.counter_length * i as f64 / nx as f64;
            obstacles.push(Vector3::new(x, 0.0, h * k as f64 / nz as f64));
        }
    }
    let wall = 0.6;
    let nw = steps(wall);
    for i in 0..=nx {
        for k in 1..=nw {
            let x = p.counter_length * i as f64 / nx as f64;
            obstacles.push(Vector3::new(x, p.counter_depth, h + wall * k as f64 / nw as f64));
        }
    }
    let obstacle_cloud = OrientedPointCloud::from_points(obstacles);

    let cabinet = PlanarPolygon::rectangle(0.0, 0.0, p.counter_length, p.counter_depth);
    Scene {
        task_cloud,
        obstacle_cloud,
        footprint_obstacles: vec![cabinet],
        region: SamplingRegion {
            x_range: [-0.4, p.counter_length + 0.4],
            y_range: [-1.1, -0.2],
            xy_step: p.xy_step,
            theta_values: vec![0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2],
        },
        reach: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basin_points_lie_on_bowls_below_counter() {
        let params = WashbasinParams::default();
        let scene = washbasin(&params);
        assert!(scene.task_cloud.len() > 1000);
        for (pt, n) in scene.task_cloud.points().iter().zip(scene.task_cloud.normals()) {
            assert!(pt.z <= params.counter_height + 1e-12);
            assert!(pt.z >= params.counter_height - params.basin_depth - 1e-12);
            assert!(n.z > 0.0);
        }
    }

    #[test]
    fn scene_file_round_trip() {
        let scene = washbasin(&WashbasinParams {
            point_spacing: 0.03,
            obstacle_spacing: 0.1,
            ..Default::default()
        });
        let dir = tempfile::tempdir().unwrap();
        let path = scene.save(dir.path(), "basins").unwrap();
        let back = Scene::load(&path).unwrap();
        assert_eq!(back.region, scene.region);
        assert_eq!(back.footprint_obstacles, scene.footprint_obstacles);
        assert_eq!(back.task_cloud.len(), scene.task_cloud.len());
        for (a, b) in back.task_cloud.points().iter().zip(scene.task_cloud.points()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
