//! Candidate base placements, favoured-placement filtering, and world-to-arm transforms.

mod polygon;

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{IsometryMatrix3, Rotation3, Translation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::RobotModel;
use crate::sld::{OrientedPointCloud, Sld};
use crate::spatial::{voxel_index, VoxelIndex};

pub use polygon::{polygons_intersect, PlanarPolygon};

/// Planar pose of the mobile base. Id 0 is reserved for "no placement".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePlacement {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl BasePlacement {
    /// `theta` is wrapped into `[0, 2π)`.
    pub fn new(id: u32, x: f64, y: f64, theta: f64) -> Self {
        let mut theta = theta.rem_euclid(TAU);
        if theta >= TAU {
            theta = 0.0;
        }
        Self { id, x, y, theta }
    }

    /// Base frame in world coordinates.
    pub fn isometry(&self) -> IsometryMatrix3<f64> {
        IsometryMatrix3::from_parts(
            Translation3::new(self.x, self.y, 0.0),
            Rotation3::from_axis_angle(&Vector3::z_axis(), self.theta),
        )
    }

    /// Arm-root frame in world coordinates.
    pub fn arm_root(&self, model: &RobotModel) -> IsometryMatrix3<f64> {
        self.isometry() * model.mount().isometry()
    }

    pub fn footprint(&self, model: &RobotModel) -> PlanarPolygon {
        model.footprint().transformed(self.x, self.y, self.theta)
    }

    pub fn planar_distance(&self, other: &BasePlacement) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rectangular grid of base positions crossed with a list of headings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRegion {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub xy_step: f64,
    pub theta_values: Vec<f64>,
}

impl SamplingRegion {
    pub fn validate(&self) -> Result<()> {
        if !(self.xy_step > 0.0) {
            return Err(Error::InvalidInput("sampling step must be positive".into()));
        }
        if !(self.x_range[0] <= self.x_range[1]) || !(self.y_range[0] <= self.y_range[1]) {
            return Err(Error::InvalidInput("sampling range is empty".into()));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| lo + i as f64 * step).collect()
    }

    /// Evenly spaced headings `0, 2π/n, ...`.
    pub fn even_headings(n: usize) -> Vec<f64> {
        (0..n).map(|i| TAU * i as f64 / n as f64).collect()
    }
}

/// Full grid, ids `1..=N` in row-major order (x slowest, then y, then heading).
pub fn sample_candidates(region: &SamplingRegion) -> Result<Vec<BasePlacement>> {
    region.validate()?;
    let xs = SamplingRegion::axis(region.x_range[0], region.x_range[1], region.xy_step);
    let ys = SamplingRegion::axis(region.y_range[0], region.y_range[1], region.xy_step);
    let mut out = Vec::with_capacity(xs.len() * ys.len() * region.theta_values.len());
    for &x in &xs {
        for &y in &ys {
            for &theta in &region.theta_values {
                let id = out.len() as u32 + 1;
                out.push(BasePlacement::new(id, x, y, theta));
            }
        }
    }
    Ok(out)
}

/// Distance limits between the arm root and the task surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachLimits {
    pub min: f64,
    pub max: f64,
}

impl ReachLimits {
    pub const DEFAULT_MIN: f64 = 0.25;

    /// Default band: `[0.25 m, max_stretch]`.
    pub fn for_model(model: &RobotModel) -> Self {
        Self {
            min: Self::DEFAULT_MIN,
            max: model.max_stretch(),
        }
    }
}

/// Footprint clear of every obstacle polygon.
pub fn footprint_is_free(bp: &BasePlacement, model: &RobotModel, obstacles: &[PlanarPolygon]) -> bool {
    let fp = bp.footprint(model);
    !obstacles.iter().any(|o| polygons_intersect(&fp, o))
}

/// Horizontal distance from the arm root to the nearest SLD center.
pub fn nearest_sld_distance(bp: &BasePlacement, model: &RobotModel, slds: &[Sld]) -> f64 {
    let root = bp.arm_root(model).translation.vector;
    slds.iter()
        .map(|s| (s.center.x - root.x).hypot(s.center.y - root.y))
        .fold(f64::INFINITY, f64::min)
}

/// Both favoured-placement rules: collision-free footprint and task distance within `limits`.
pub fn is_favoured(
    bp: &BasePlacement,
    model: &RobotModel,
    obstacles: &[PlanarPolygon],
    slds: &[Sld],
    limits: ReachLimits,
) -> bool {
    let d = nearest_sld_distance(bp, model, slds);
    limits.min <= d && d <= limits.max && footprint_is_free(bp, model, obstacles)
}

/// Keeps the favoured candidates, preserving order and ids. An empty result is logged and
/// returned as-is; callers that need at least one placement decide how to fail.
pub fn filter_fbps(
    candidates: &[BasePlacement],
    model: &RobotModel,
    obstacles: &[PlanarPolygon],
    slds: &[Sld],
    limits: ReachLimits,
) -> Result<Vec<BasePlacement>> {
    if !(limits.min < limits.max) {
        return Err(Error::InvalidInput(format!(
            "reach_min {} must be below reach_max {}",
            limits.min, limits.max
        )));
    }
    let kept: Vec<_> = candidates
        .iter()
        .filter(|bp| is_favoured(bp, model, obstacles, slds, limits))
        .copied()
        .collect();
    if kept.is_empty() {
        log::warn!(
            "no favoured base placements out of {} candidates",
            candidates.len()
        );
    }
    Ok(kept)
}

/// Task data expressed in the arm-root frame of one placement.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmFrameTask {
    pub slds: Vec<Sld>,
    pub obstacles: HashSet<VoxelIndex>,
}

/// Maps SLDs and obstacle points from world into the arm-root frame of `bp`, rasterizing the
/// obstacles at voxel size `delta`.
pub fn to_arm_frame(
    bp: &BasePlacement,
    model: &RobotModel,
    slds: &[Sld],
    obstacle_cloud: &OrientedPointCloud,
    delta: f64,
) -> ArmFrameTask {
    let inv = bp.arm_root(model).inverse();
    let slds = slds
        .iter()
        .map(|s| Sld {
            center: inv.transform_point(&s.center.into()).coords,
            normal: inv.transform_vector(&s.normal),
            ..*s
        })
        .collect();
    let obstacles = obstacle_voxels(bp, model, obstacle_cloud, delta);
    ArmFrameTask { slds, obstacles }
}

pub fn obstacle_voxels(
    bp: &BasePlacement,
    model: &RobotModel,
    obstacle_cloud: &OrientedPointCloud,
    delta: f64,
) -> HashSet<VoxelIndex> {
    let inv = bp.arm_root(model).inverse();
    obstacle_cloud
        .points()
        .iter()
        .map(|p| voxel_index(&inv.transform_point(&(*p).into()).coords, delta))
        .collect()
}

pub const PLACEMENT_CSV_HEADER: &str = "id,x,y,theta";

pub fn placements_to_csv(placements: &[BasePlacement]) -> String {
    let mut out = format!("{PLACEMENT_CSV_HEADER}\n");
    for p in placements {
        writeln!(out, "{},{},{},{}", p.id, p.x, p.y, p.theta).unwrap();
    }
    out
}

pub fn placements_from_csv(text: &str) -> Result<Vec<BasePlacement>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|row| {
            let (id, x, y, theta): (u32, f64, f64, f64) = row?;
            Ok(BasePlacement::new(id, x, y, theta))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::kinematics::presets;

    fn sld_at(id: usize, x: f64, y: f64, z: f64) -> Sld {
        Sld {
            id,
            center: Vector3::new(x, y, z),
            normal: Vector3::z(),
            radius: 0.04,
        }
    }

    #[test]
    fn grid_counts() {
        let region = SamplingRegion {
            x_range: [0.0, 0.1],
            y_range: [0.0, 0.0],
            xy_step: 0.05,
            theta_values: vec![0.0],
        };
        let c = sample_candidates(&region).unwrap();
        assert_eq!(c.len(), 3);
        assert_relative_eq!(c[2].x, 0.1, epsilon = 1e-12);
        assert_eq!(c.iter().map(|b| b.id).collect::<Vec<_>>(), vec![1, 2, 3]);

        let empty = SamplingRegion {
            theta_values: vec![],
            ..region
        };
        assert!(sample_candidates(&empty).unwrap().is_empty());
    }

    #[test]
    fn large_region_count() {
        // 3.3 m x 1.5 m at 5 cm with four headings: 67 * 31 * 4
        let region = SamplingRegion {
            x_range: [0.0, 3.3],
            y_range: [0.0, 1.5],
            xy_step: 0.05,
            theta_values: SamplingRegion::even_headings(4),
        };
        assert_eq!(sample_candidates(&region).unwrap().len(), 67 * 31 * 4);
    }

    #[test]
    fn filter_rules() {
        let arm = presets::four_dof();
        let slds = vec![sld_at(0, 0.0, 0.0, 0.8)];
        let basin = PlanarPolygon::rectangle(-0.3, -0.3, 0.3, 0.3);
        let limits = ReachLimits { min: 0.25, max: 1.2 };
        let overlapping = BasePlacement::new(1, 0.0, -0.4, 0.0);
        let far = BasePlacement::new(2, 0.0, -10.0, 0.0);
        let good = BasePlacement::new(3, 0.0, -0.7, 0.0);
        let kept = filter_fbps(&[overlapping, far, good], &arm, &[basin], &slds, limits).unwrap();
        assert_eq!(kept, vec![good]);
        assert!(filter_fbps(&[good], &arm, &[], &slds, ReachLimits { min: 1.0, max: 0.5 }).is_err());
    }

    #[test]
    fn identity_transform_keeps_slds() {
        let arm = presets::planar(&[1.0, 1.0]);
        let slds = vec![sld_at(0, 0.3, -0.2, 0.5)];
        let t = to_arm_frame(
            &BasePlacement::new(1, 0.0, 0.0, 0.0),
            &arm,
            &slds,
            &OrientedPointCloud::default(),
            0.03,
        );
        assert_eq!(t.slds, slds);
    }

    #[test]
    fn translation_and_rotation() {
        let arm = presets::planar(&[1.0, 1.0]);
        let cloud = OrientedPointCloud::from_points(vec![Vector3::new(1.0, 0.0, 0.0)]);
        let t = to_arm_frame(&BasePlacement::new(1, 1.0, 0.0, 0.0), &arm, &[], &cloud, 0.03);
        assert!(t.obstacles.contains(&[0, 0, 0]));

        let slds = vec![sld_at(0, 0.5, 0.0, 0.0)];
        let t = to_arm_frame(
            &BasePlacement::new(1, 0.0, 0.0, FRAC_PI_2),
            &arm,
            &slds,
            &OrientedPointCloud::default(),
            0.03,
        );
        assert_relative_eq!(t.slds[0].center, Vector3::new(0.0, -0.5, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let ps = vec![
            BasePlacement::new(4, 0.1, -0.25, 1.5),
            BasePlacement::new(9, 2.0, 0.0, 0.0),
        ];
        assert_eq!(placements_from_csv(&placements_to_csv(&ps)).unwrap(), ps);
    }

    proptest! {
        #[test]
        fn arm_frame_inverse_restores_centers(
            x in -3.0..3.0f64, y in -3.0..3.0f64, th in 0.0..std::f64::consts::TAU,
            cx in -2.0..2.0f64, cy in -2.0..2.0f64, cz in 0.0..1.5f64,
        ) {
            let arm = presets::six_dof();
            let bp = BasePlacement::new(1, x, y, th);
            let s = sld_at(0, cx, cy, cz);
            let t = to_arm_frame(&bp, &arm, &[s], &OrientedPointCloud::default(), 0.03);
            let back = bp.arm_root(&arm).transform_point(&t.slds[0].center.into()).coords;
            prop_assert!((back - s.center).norm() < 1e-9);
        }

        #[test]
        fn filter_output_passes_rules(seed_x in -1.0..1.0f64) {
            let arm = presets::four_dof();
            let slds = vec![sld_at(0, seed_x, 0.0, 0.8), sld_at(1, seed_x + 0.4, 0.1, 0.8)];
            let obstacles = vec![PlanarPolygon::rectangle(-2.0, -0.2, 2.0, 0.3)];
            let region = SamplingRegion {
                x_range: [-1.5, 1.5],
                y_range: [-1.5, -0.2],
                xy_step: 0.1,
                theta_values: SamplingRegion::even_headings(4),
            };
            let cands = sample_candidates(&region).unwrap();
            let limits = ReachLimits::for_model(&arm);
            let kept = filter_fbps(&cands, &arm, &obstacles, &slds, limits).unwrap();
            for bp in &kept {
                prop_assert!(cands.contains(bp));
                prop_assert!(footprint_is_free(bp, &arm, &obstacles));
                let d = nearest_sld_distance(bp, &arm, &slds);
                prop_assert!(d >= limits.min && d <= limits.max);
            }
        }
    }
}
