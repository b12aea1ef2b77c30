//! Scale-like discs: circular surface patches that tile a task surface.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::SpatialHash;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sld {
    pub id: usize,
    pub center: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub radius: f64,
}

/// Surface samples with unit normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrientedPointCloud {
    points: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
}

impl OrientedPointCloud {
    /// Normals are re-normalized; zero normals are rejected.
    pub fn new(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        let normals = normals
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                let len = n.norm();
                if !(len > 1e-12) || !len.is_finite() {
                    Err(Error::InvalidInput(format!("point {i} has a degenerate normal")))
                } else {
                    Ok(n / len)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, normals })
    }

    /// Cloud without normals, used for obstacles. Normals are set to +z.
    pub fn from_points(points: Vec<Vector3<f64>>) -> Self {
        let normals = vec![Vector3::z(); points.len()];
        Self { points, normals }
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Parses whitespace-separated rows `x y z nx ny nz`. Blank lines and `#` comments are
    /// skipped. Rows with only `x y z` get a +z normal.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut normals = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(format!("point cloud line {}", lineno + 1), e))?;
            match vals.len() {
                3 => {
                    points.push(Vector3::new(vals[0], vals[1], vals[2]));
                    normals.push(Vector3::z());
                }
                6 => {
                    points.push(Vector3::new(vals[0], vals[1], vals[2]));
                    normals.push(Vector3::new(vals[3], vals[4], vals[5]));
                }
                n => {
                    return Err(Error::parse(
                        format!("point cloud line {}", lineno + 1),
                        format!("expected 3 or 6 values, got {n}"),
                    ))
                }
            }
        }
        Self::new(points, normals)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, n) in self.points.iter().zip(&self.normals) {
            writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z).unwrap();
        }
        out
    }
}

/// Greedy farthest-point tiling of `cloud` with discs of radius `radius`.
///
/// The first center is point 0; each further center is the point farthest from all chosen
/// centers (lowest index on ties), until every point lies within `radius` of a center. Disc
/// normals average the cloud normals within `radius` of the center, falling back to the center
/// point's own normal when that average vanishes.
pub fn decompose_surface(cloud: &OrientedPointCloud, radius: f64) -> Result<Vec<Sld>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput("SLD radius must be positive".into()));
    }
    if cloud.is_empty() {
        return Err(Error::InvalidInput(
            "cannot decompose an empty point cloud".into(),
        ));
    }
    let pts = cloud.points();
    let mut nearest = vec![f64::INFINITY; pts.len()];
    let mut centers = Vec::new();
    let mut next = 0usize;
    loop {
        centers.push(next);
        let c = pts[next];
        let mut far = (0usize, f64::NEG_INFINITY);
        for (i, p) in pts.iter().enumerate() {
            let d = (p - c).norm();
            if d < nearest[i] {
                nearest[i] = d;
            }
            if nearest[i] > far.1 {
                far = (i, nearest[i]);
            }
        }
        if far.1 <= radius {
            break;
        }
        next = far.0;
    }

    let grid = SpatialHash::new(pts, radius);
    Ok(centers
        .into_iter()
        .enumerate()
        .map(|(id, ci)| {
            let sum: Vector3<f64> = grid
                .within(pts, &pts[ci], radius)
                .into_iter()
                .map(|i| cloud.normals()[i])
                .sum();
            let normal = if sum.norm() > 1e-9 {
                sum.normalize()
            } else {
                cloud.normals()[ci]
            };
            Sld {
                id,
                center: pts[ci],
                normal,
                radius,
            }
        })
        .collect())
}

/// Pairwise Euclidean distances between SLD centers.
pub fn sweep_distance_matrix(slds: &[Sld]) -> DMatrix<f64> {
    let n = slds.len();
    DMatrix::from_fn(n, n, |i, j| (slds[i].center - slds[j].center).norm())
}

pub const SLD_CSV_HEADER: &str = "id,x,y,z,nx,ny,nz,r";

pub fn slds_to_csv(slds: &[Sld]) -> String {
    let mut out = format!("{SLD_CSV_HEADER}\n");
    for s in slds {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.id, s.center.x, s.center.y, s.center.z, s.normal.x, s.normal.y, s.normal.z, s.radius
        )
        .unwrap();
    }
    out
}

pub fn slds_from_csv(text: &str) -> Result<Vec<Sld>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut slds = Vec::new();
    for row in reader.deserialize() {
        let (id, x, y, z, nx, ny, nz, r): (usize, f64, f64, f64, f64, f64, f64, f64) = row?;
        slds.push(Sld {
            id,
            center: Vector3::new(x, y, z),
            normal: Vector3::new(nx, ny, nz),
            radius: r,
        });
    }
    if slds.iter().enumerate().any(|(i, s)| s.id != i) {
        return Err(Error::parse("SLD csv", "ids must be contiguous from 0"));
    }
    Ok(slds)
}
