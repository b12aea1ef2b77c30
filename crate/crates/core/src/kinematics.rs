//! Serial-chain kinematics in the standard (distal) Denavit-Hartenberg convention.
//!
//! Frame `i` is reached from frame `i - 1` by `Rz(q_i + theta_offset_i) Tz(d_i) Tx(a_i) Rx(alpha_i)`
//! and joint `i` turns about the z axis of frame `i - 1`. Every quantity in this module is
//! expressed in the arm-root frame (frame 0). [`RobotModel::mount`] places that frame on the
//! mobile base and is only used when moving between world, base and arm coordinates.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, IsometryMatrix3, Matrix3, Rotation3, Translation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::PlanarPolygon;
use crate::spatial::{sorted_intersects, voxelize_capsule, VoxelIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

impl DhRow {
    pub fn transform(&self, q: f64) -> IsometryMatrix3<f64> {
        let (st, ct) = (q + self.theta_offset).sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        #[rustfmt::skip]
        let rot = Matrix3::new(
            ct, -st * ca,  st * sa,
            st,  ct * ca, -ct * sa,
            0.0,      sa,       ca,
        );
        IsometryMatrix3::from_parts(
            Translation3::new(self.a * ct, self.a * st, self.d),
            Rotation3::from_matrix_unchecked(rot),
        )
    }
}

/// Inclusive joint interval in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimit {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimit {
    pub fn contains(&self, q: f64) -> bool {
        self.lower <= q && q <= self.upper
    }
}

/// Which column of the tool rotation is the approach direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolAxis {
    X,
    Y,
    #[default]
    Z,
}

impl ToolAxis {
    fn column(self) -> usize {
        match self {
            ToolAxis::X => 0,
            ToolAxis::Y => 1,
            ToolAxis::Z => 2,
        }
    }
}

/// Rigid transform from the mobile base frame to the arm root, as translation plus
/// roll/pitch/yaw (applied in that order about fixed axes).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MountPose {
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl MountPose {
    pub fn isometry(&self) -> IsometryMatrix3<f64> {
        IsometryMatrix3::from_parts(
            Translation3::new(self.xyz[0], self.xyz[1], self.xyz[2]),
            Rotation3::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]),
        )
    }
}

/// One `[[joint]]` table of the robot description file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
    pub lower: f64,
    pub upper: f64,
    pub link_radius: f64,
}

/// On-disk layout of a robot description (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotFile {
    pub name: String,
    #[serde(default)]
    pub tool_axis: ToolAxis,
    pub footprint: Vec<[f64; 2]>,
    #[serde(default)]
    pub mount: MountPose,
    #[serde(rename = "joint")]
    pub joints: Vec<JointSpec>,
}

/// Serial revolute chain plus the planar footprint of the base carrying it.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    name: String,
    dh: Vec<DhRow>,
    limits: Vec<JointLimit>,
    link_radii: Vec<f64>,
    footprint: PlanarPolygon,
    mount: MountPose,
    tool_axis: ToolAxis,
}

impl RobotModel {
    pub fn new(
        name: impl Into<String>,
        dh: Vec<DhRow>,
        limits: Vec<JointLimit>,
        link_radii: Vec<f64>,
        footprint: PlanarPolygon,
        mount: MountPose,
        tool_axis: ToolAxis,
    ) -> Result<Self> {
        if dh.is_empty() {
            return Err(Error::InvalidModel("robot has no joints".into()));
        }
        if dh.len() != limits.len() || dh.len() != link_radii.len() {
            return Err(Error::InvalidModel(format!(
                "{} DH rows, {} joint limits, {} link radii",
                dh.len(),
                limits.len(),
                link_radii.len()
            )));
        }
        for (i, lim) in limits.iter().enumerate() {
            if !(lim.lower < lim.upper) {
                return Err(Error::InvalidModel(format!(
                    "joint {i}: lower limit {} is not below upper limit {}",
                    lim.lower, lim.upper
                )));
            }
        }
        if let Some(i) = link_radii.iter().position(|&r| !(r > 0.0)) {
            return Err(Error::InvalidModel(format!("link {i}: radius must be positive")));
        }
        Ok(Self {
            name: name.into(),
            dh,
            limits,
            link_radii,
            footprint,
            mount,
            tool_axis,
        })
    }

    pub fn from_file_spec(file: RobotFile) -> Result<Self> {
        let footprint =
            PlanarPolygon::new(file.footprint).map_err(|e| Error::InvalidModel(format!("footprint: {e}")))?;
        let dh = file
            .joints
            .iter()
            .map(|j| DhRow {
                a: j.a,
                alpha: j.alpha,
                d: j.d,
                theta_offset: j.theta_offset,
            })
            .collect();
        let limits = file
            .joints
            .iter()
            .map(|j| JointLimit {
                lower: j.lower,
                upper: j.upper,
            })
            .collect();
        let radii = file.joints.iter().map(|j| j.link_radius).collect();
        Self::new(
            file.name,
            dh,
            limits,
            radii,
            footprint,
            file.mount,
            file.tool_axis,
        )
    }

    pub fn to_file_spec(&self) -> RobotFile {
        RobotFile {
            name: self.name.clone(),
            tool_axis: self.tool_axis,
            footprint: self.footprint.vertices().to_vec(),
            mount: self.mount,
            joints: self
                .dh
                .iter()
                .zip(&self.limits)
                .zip(&self.link_radii)
                .map(|((dh, lim), &r)| JointSpec {
                    a: dh.a,
                    alpha: dh.alpha,
                    d: dh.d,
                    theta_offset: dh.theta_offset,
                    lower: lim.lower,
                    upper: lim.upper,
                    link_radius: r,
                })
                .collect(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: RobotFile = toml::from_str(text).map_err(|e| Error::parse("robot file", e))?;
        Self::from_file_spec(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file_spec()).expect("robot file serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.dh.len()
    }

    pub fn dh_rows(&self) -> &[DhRow] {
        &self.dh
    }

    pub fn joint_limits(&self) -> &[JointLimit] {
        &self.limits
    }

    pub fn link_radii(&self) -> &[f64] {
        &self.link_radii
    }

    pub fn footprint(&self) -> &PlanarPolygon {
        &self.footprint
    }

    pub fn mount(&self) -> &MountPose {
        &self.mount
    }

    pub fn tool_axis(&self) -> ToolAxis {
        self.tool_axis
    }

    /// Upper bound on the distance between the arm root and the end effector.
    pub fn max_stretch(&self) -> f64 {
        self.dh.iter().map(|r| r.a.hypot(r.d)).sum()
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }
}

/// Joint angles checked against a model's dimension and limits.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig(Vec<f64>);

impl JointConfig {
    pub fn new(model: &RobotModel, q: Vec<f64>) -> Result<Self> {
        model.check_dim(&q)?;
        for (i, (&v, lim)) in q.iter().zip(model.joint_limits()).enumerate() {
            if !lim.contains(v) {
                return Err(Error::InvalidInput(format!(
                    "joint {i} value {v} outside [{}, {}]",
                    lim.lower, lim.upper
                )));
            }
        }
        Ok(Self(q))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for JointConfig {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndEffectorPose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub approach: Vector3<f64>,
}

impl EndEffectorPose {
    fn from_frame(frame: &IsometryMatrix3<f64>, axis: ToolAxis) -> Self {
        let rotation = *frame.rotation.matrix();
        Self {
            position: frame.translation.vector,
            approach: rotation.column(axis.column()).into_owned(),
            rotation,
        }
    }
}

/// Frames `0..=n` of the chain; frame 0 is the identity.
pub fn joint_frames(model: &RobotModel, q: &[f64]) -> Result<Vec<IsometryMatrix3<f64>>> {
    model.check_dim(q)?;
    let mut frames = Vec::with_capacity(q.len() + 1);
    frames.push(IsometryMatrix3::identity());
    for (row, &qi) in model.dh.iter().zip(q) {
        let next = frames.last().unwrap() * row.transform(qi);
        frames.push(next);
    }
    Ok(frames)
}

pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Result<EndEffectorPose> {
    let frames = joint_frames(model, q)?;
    Ok(EndEffectorPose::from_frame(
        frames.last().unwrap(),
        model.tool_axis,
    ))
}

/// End-effector pose expressed in the mobile base frame (mount applied).
pub fn forward_kinematics_in_base(model: &RobotModel, q: &[f64]) -> Result<EndEffectorPose> {
    let frames = joint_frames(model, q)?;
    let in_base = model.mount.isometry() * frames.last().unwrap();
    Ok(EndEffectorPose::from_frame(&in_base, model.tool_axis))
}

pub(crate) fn approach_of(frame: &IsometryMatrix3<f64>, axis: ToolAxis) -> Vector3<f64> {
    frame.rotation.matrix().column(axis.column()).into_owned()
}

/// Geometric Jacobian from precomputed frames: rows 0..3 linear, rows 3..6 angular.
pub fn jacobian_from_frames(frames: &[IsometryMatrix3<f64>]) -> DMatrix<f64> {
    let n = frames.len() - 1;
    let p = frames[n].translation.vector;
    let mut j = DMatrix::zeros(6, n);
    for i in 0..n {
        let z = frames[i].rotation.matrix().column(2).into_owned();
        let o = frames[i].translation.vector;
        let lin = z.cross(&(p - o));
        for r in 0..3 {
            j[(r, i)] = lin[r];
            j[(r + 3, i)] = z[r];
        }
    }
    j
}

pub fn jacobian(model: &RobotModel, q: &[f64]) -> Result<DMatrix<f64>> {
    Ok(jacobian_from_frames(&joint_frames(model, q)?))
}

/// `sqrt(det(B Bᵀ))` on the task row block `B` of the Jacobian.
///
/// Chains with six or more joints use all six rows; shorter chains use the three position rows.
/// When the block has more rows than columns the column Gram matrix `Bᵀ B` is used instead, so
/// the value is always the product of the block's singular values. Negative determinants from
/// round-off clamp to zero.
pub fn manipulability_of_jacobian(j: &DMatrix<f64>) -> f64 {
    let block = if j.ncols() >= 6 {
        j.clone()
    } else {
        j.rows(0, 3).into_owned()
    };
    let gram = if block.nrows() <= block.ncols() {
        &block * block.transpose()
    } else {
        block.transpose() * &block
    };
    gram.determinant().max(0.0).sqrt()
}

pub fn manipulability(model: &RobotModel, q: &[f64]) -> Result<f64> {
    Ok(manipulability_of_jacobian(&jacobian(model, q)?))
}

/// Axis polyline of link `i`: from the origin of frame `i - 1`, along its z axis by `d_i`, then to
/// the origin of frame `i`.
pub(crate) fn link_polyline(frames: &[IsometryMatrix3<f64>], row: &DhRow, i: usize) -> [Vector3<f64>; 3] {
    let start = frames[i].translation.vector;
    let z = frames[i].rotation.matrix().column(2).into_owned();
    let elbow = start + z * row.d;
    [start, elbow, frames[i + 1].translation.vector]
}

pub(crate) fn voxelize_link(polyline: &[Vector3<f64>; 3], radius: f64, delta: f64) -> Vec<VoxelIndex> {
    let mut cells = Vec::new();
    voxelize_capsule(&polyline[0], &polyline[1], radius, delta, &mut cells);
    voxelize_capsule(&polyline[1], &polyline[2], radius, delta, &mut cells);
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// Sorted voxel list per link.
pub fn link_voxels(model: &RobotModel, q: &[f64], delta: f64) -> Result<Vec<Vec<VoxelIndex>>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("voxel size must be positive".into()));
    }
    let frames = joint_frames(model, q)?;
    Ok((0..model.dof())
        .map(|i| {
            let poly = link_polyline(&frames, &model.dh[i], i);
            voxelize_link(&poly, model.link_radii[i], delta)
        })
        .collect())
}

/// Union of the voxels swept by every link capsule.
pub fn link_occupancy(model: &RobotModel, q: &[f64], delta: f64) -> Result<BTreeSet<VoxelIndex>> {
    Ok(link_voxels(model, q, delta)?.into_iter().flatten().collect())
}

/// Axis length of each link.
pub fn link_lengths(model: &RobotModel) -> Vec<f64> {
    model.dh.iter().map(|r| r.a.abs() + r.d.abs()).collect()
}

/// Whether links `i < j` are far enough apart along the chain to be checked against each other.
///
/// Links that touch in the chain, or are joined only by links shorter than what the voxel grid can
/// resolve (`r_i + r_j + 2 delta`), always share cells and are treated as adjacent.
pub fn links_checked_pairwise(lengths: &[f64], radii: &[f64], i: usize, j: usize, delta: f64) -> bool {
    if j <= i + 1 {
        return false;
    }
    let between: f64 = lengths[i + 1..j].iter().sum();
    between >= radii[i] + radii[j] + 2.0 * delta
}

pub fn self_collision(model: &RobotModel, q: &[f64], delta: f64) -> Result<bool> {
    let cells = link_voxels(model, q, delta)?;
    let lengths = link_lengths(model);
    let n = model.dof();
    for i in 0..n {
        for j in i + 2..n {
            if links_checked_pairwise(&lengths, &model.link_radii, i, j, delta)
                && sorted_intersects(&cells[i], &cells[j])
            {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Reference models used by tests, examples and the synthetic scene.
pub mod presets {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;

    fn square_footprint(half: f64) -> PlanarPolygon {
        PlanarPolygon::rectangle(-half, -half, half, half)
    }

    /// Planar chain of revolute joints about z with the given link lengths.
    pub fn planar(lengths: &[f64]) -> RobotModel {
        let n = lengths.len();
        RobotModel::new(
            format!("planar-{n}r"),
            lengths
                .iter()
                .map(|&a| DhRow {
                    a,
                    alpha: 0.0,
                    d: 0.0,
                    theta_offset: 0.0,
                })
                .collect(),
            vec![
                JointLimit {
                    lower: -PI,
                    upper: PI
                };
                n
            ],
            vec![1e-6; n],
            square_footprint(0.2),
            MountPose::default(),
            ToolAxis::Z,
        )
        .expect("valid planar model")
    }

    /// Six-joint industrial arm with UR5 proportions.
    pub fn six_dof() -> RobotModel {
        let rows = [
            (0.0, FRAC_PI_2, 0.089159),
            (-0.425, 0.0, 0.0),
            (-0.39225, 0.0, 0.0),
            (0.0, FRAC_PI_2, 0.10915),
            (0.0, -FRAC_PI_2, 0.09465),
            (0.0, 0.0, 0.0823),
        ];
        RobotModel::new(
            "six-dof",
            rows.iter()
                .map(|&(a, alpha, d)| DhRow {
                    a,
                    alpha,
                    d,
                    theta_offset: 0.0,
                })
                .collect(),
            vec![
                JointLimit {
                    lower: -PI,
                    upper: PI
                };
                6
            ],
            vec![0.05, 0.05, 0.04, 0.035, 0.035, 0.03],
            square_footprint(0.3),
            MountPose {
                xyz: [0.0, 0.0, 0.4],
                rpy: [0.0, 0.0, 0.0],
            },
            ToolAxis::Z,
        )
        .expect("valid six-dof model")
    }

    /// Four-joint arm (yaw, shoulder, elbow, wrist pitch) for desk-scale maps.
    pub fn four_dof() -> RobotModel {
        let rows = [
            (0.0, FRAC_PI_2, 0.2),
            (0.35, 0.0, 0.0),
            (0.3, 0.0, 0.0),
            (0.12, 0.0, 0.0),
        ];
        RobotModel::new(
            "four-dof",
            rows.iter()
                .map(|&(a, alpha, d)| DhRow {
                    a,
                    alpha,
                    d,
                    theta_offset: 0.0,
                })
                .collect(),
            vec![
                JointLimit {
                    lower: -PI,
                    upper: PI,
                },
                JointLimit {
                    lower: 0.0,
                    upper: PI,
                },
                JointLimit {
                    lower: -2.6,
                    upper: 2.6,
                },
                JointLimit {
                    lower: -2.0,
                    upper: 2.0,
                },
            ],
            vec![0.04, 0.035, 0.03, 0.025],
            square_footprint(0.25),
            MountPose {
                xyz: [0.0, 0.0, 0.5],
                rpy: [0.0, 0.0, 0.0],
            },
            ToolAxis::X,
        )
        .expect("valid four-dof model")
    }

    /// Five-joint arm with a sideways-swinging tool for surface work from a mobile base: yaw,
    /// shoulder, elbow, wrist pitch, then a wrist joint whose axis lies in the arm plane so the
    /// tool can tilt out of it. The tool points along the last frame's x axis.
    pub fn five_dof() -> RobotModel {
        let rows = [
            (0.0, FRAC_PI_2, 0.2),
            (0.42, 0.0, 0.0),
            (0.38, 0.0, 0.0),
            (0.0, FRAC_PI_2, 0.0),
            (0.14, 0.0, 0.0),
        ];
        RobotModel::new(
            "five-dof",
            rows.iter()
                .map(|&(a, alpha, d)| DhRow {
                    a,
                    alpha,
                    d,
                    theta_offset: 0.0,
                })
                .collect(),
            vec![
                JointLimit {
                    lower: -FRAC_PI_2,
                    upper: FRAC_PI_2,
                },
                JointLimit {
                    lower: -0.6,
                    upper: 1.8,
                },
                JointLimit {
                    lower: -2.6,
                    upper: 0.2,
                },
                JointLimit {
                    lower: -2.4,
                    upper: 1.2,
                },
                JointLimit {
                    lower: -1.4,
                    upper: 1.4,
                },
            ],
            vec![0.045, 0.04, 0.035, 0.03, 0.02],
            PlanarPolygon::rectangle(-0.3, -0.25, 0.3, 0.25),
            MountPose {
                xyz: [0.2, 0.0, 0.75],
                rpy: [0.0, 0.0, 0.0],
            },
            ToolAxis::X,
        )
        .expect("valid five-dof model")
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use approx::assert_relative_eq;

    use super::presets::*;
    use super::*;

    #[test]
    fn planar_fk_extended_and_rotated() {
        let arm = planar(&[1.0, 1.0]);
        let p = forward_kinematics(&arm, &[0.0, 0.0]).unwrap().position;
        assert_relative_eq!(p, Vector3::new(2.0, 0.0, 0.0), epsilon = 1e-12);
        let p = forward_kinematics(&arm, &[FRAC_PI_2, 0.0]).unwrap().position;
        assert_relative_eq!(p, Vector3::new(0.0, 2.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let arm = planar(&[1.0, 1.0]);
        assert!(matches!(
            forward_kinematics(&arm, &[0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(jacobian(&arm, &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn pose_rotation_is_orthonormal() {
        let arm = six_dof();
        let pose = forward_kinematics(&arm, &[0.3, -1.1, 0.7, 2.0, -0.4, 1.3]).unwrap();
        assert_relative_eq!(
            pose.rotation.transpose() * pose.rotation,
            Matrix3::identity(),
            epsilon = 1e-9
        );
        assert_relative_eq!(pose.approach.norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn planar_jacobian_matches_analytic_2r() {
        let arm = planar(&[1.0, 1.0]);
        let j = jacobian(&arm, &[0.0, FRAC_PI_2]).unwrap();
        // -l1 s1 - l2 s12, -l2 s12 ; l1 c1 + l2 c12, l2 c12
        assert_relative_eq!(j[(0, 0)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(j[(0, 1)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(j[(1, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(j[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn planar_angular_rows_share_z() {
        let arm = planar(&[0.5, 0.4, 0.3]);
        let j = jacobian(&arm, &[0.0, 0.0, 0.0]).unwrap();
        for c in 0..3 {
            assert_eq!([j[(3, c)], j[(4, c)], j[(5, c)]], [0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn planar_manipulability() {
        let arm = planar(&[1.0, 1.0]);
        assert_relative_eq!(
            manipulability(&arm, &[0.2, FRAC_PI_2]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_eq!(manipulability(&arm, &[0.4, 0.0]).unwrap(), 0.0);
        let arm = planar(&[0.7, 0.4]);
        let w = manipulability(&arm, &[1.0, 0.6]).unwrap();
        assert_relative_eq!(w, 0.7 * 0.4 * 0.6f64.sin(), epsilon = 1e-12);
    }

    #[test]
    fn single_link_occupancy_covers_segment() {
        let arm = planar(&[0.09]);
        let cells = link_occupancy(&arm, &[0.0], 0.03).unwrap();
        for a in 0..4 {
            assert!(cells.contains(&[a, 0, 0]), "missing cell {a}");
        }
    }

    #[test]
    fn occupancy_contains_every_joint_position() {
        let arm = six_dof();
        let q = [0.4, -0.9, 1.2, -0.3, 0.8, 0.1];
        let cells = link_occupancy(&arm, &q, 0.03).unwrap();
        for f in joint_frames(&arm, &q).unwrap() {
            assert!(cells.contains(&crate::spatial::voxel_index(&f.translation.vector, 0.03)));
        }
    }

    #[test]
    fn self_collision_cases() {
        assert!(!self_collision(&planar(&[1.0, 1.0]), &[0.0, 0.0], 0.03).unwrap());
        let arm = planar(&[1.0, 0.5, 1.0]);
        assert!(!self_collision(&arm, &[0.0, 0.0, 0.0], 0.03).unwrap());
        // link 2 doubles back, link 3 runs forward again over link 1
        assert!(self_collision(&arm, &[0.0, PI, PI], 0.03).unwrap());
    }

    #[test]
    fn stretched_six_dof_is_collision_free() {
        let arm = six_dof();
        assert!(!self_collision(&arm, &[0.0; 6], 0.03).unwrap());
        assert!(!self_collision(&arm, &[1.0, -FRAC_PI_2, 0.0, -FRAC_PI_2, 0.0, 0.0], 0.03).unwrap());
    }

    #[test]
    fn folded_six_dof_collides() {
        let arm = six_dof();
        // elbow folded flat so the forearm lies back along the upper arm
        assert!(self_collision(&arm, &[0.0, 0.0, PI, 0.0, 0.0, 0.0], 0.03).unwrap());
        let cells = link_voxels(&arm, &[0.0, 0.0, PI, 0.0, 0.0, 0.0], 0.03).unwrap();
        assert!(sorted_intersects(&cells[1], &cells[3]) || sorted_intersects(&cells[1], &cells[4]));
    }

    #[test]
    fn robot_file_round_trip() {
        let arm = four_dof();
        let back = RobotModel::from_toml_str(&arm.to_toml_string()).unwrap();
        assert_eq!(arm, back);
    }

    #[test]
    fn invalid_models_rejected() {
        let mut spec = four_dof().to_file_spec();
        spec.joints[1].lower = spec.joints[1].upper;
        assert!(RobotModel::from_file_spec(spec).is_err());
        let mut spec = four_dof().to_file_spec();
        spec.joints[0].link_radius = 0.0;
        assert!(RobotModel::from_file_spec(spec).is_err());
        let mut spec = four_dof().to_file_spec();
        spec.footprint.truncate(2);
        assert!(RobotModel::from_file_spec(spec).is_err());
    }

    #[test]
    fn joint_config_checks_limits() {
        let arm = four_dof();
        assert!(JointConfig::new(&arm, vec![0.0, 0.5, 0.0, 0.0]).is_ok());
        assert!(JointConfig::new(&arm, vec![0.0, -0.5, 0.0, 0.0]).is_err());
        assert!(JointConfig::new(&arm, vec![0.0, 0.5]).is_err());
    }
}
