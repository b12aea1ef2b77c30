//! Voxel indexing and a small spatial hash for radius queries.

use std::collections::HashMap;

use nalgebra::Vector3;

/// Integer cell coordinates `(a, b, c)` of a cube of side `delta`.
pub type VoxelIndex = [i32; 3];

/// Cell containing `p`: componentwise `floor(x / delta)`, so negative coordinates round toward
/// negative infinity.
pub fn voxel_index(p: &Vector3<f64>, delta: f64) -> VoxelIndex {
    [
        (p.x / delta).floor() as i32,
        (p.y / delta).floor() as i32,
        (p.z / delta).floor() as i32,
    ]
}

/// Appends every voxel whose closed cube intersects the closed ball `(center, radius)`.
pub fn voxelize_ball(center: &Vector3<f64>, radius: f64, delta: f64, out: &mut Vec<VoxelIndex>) {
    let lo = voxel_index(&center.add_scalar(-radius), delta);
    let hi = voxel_index(&center.add_scalar(radius), delta);
    let r2 = radius * radius;
    for a in lo[0]..=hi[0] {
        let dx = axis_gap(center.x, a, delta);
        for b in lo[1]..=hi[1] {
            let dy = axis_gap(center.y, b, delta);
            for c in lo[2]..=hi[2] {
                let dz = axis_gap(center.z, c, delta);
                if dx * dx + dy * dy + dz * dz <= r2 {
                    out.push([a, b, c]);
                }
            }
        }
    }
}

// Distance from coordinate `x` to the interval [i*delta, (i+1)*delta].
fn axis_gap(x: f64, i: i32, delta: f64) -> f64 {
    let lo = i as f64 * delta;
    let hi = lo + delta;
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

/// Appends the voxels covered by the capsule `(a, b, radius)`.
///
/// The segment is sampled at a spacing of at most `delta / 2` and each sample is inflated by
/// `radius` plus half the sample spacing, so every point of the capsule axis lands in an emitted
/// voxel. The output may contain duplicates.
pub fn voxelize_capsule(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    radius: f64,
    delta: f64,
    out: &mut Vec<VoxelIndex>,
) {
    let length = (b - a).norm();
    let intervals = ((length / (0.5 * delta)).ceil() as usize).max(1);
    let spacing = length / intervals as f64;
    let inflated = radius + 0.5 * spacing;
    for i in 0..=intervals {
        let t = i as f64 / intervals as f64;
        let p = a + (b - a) * t;
        voxelize_ball(&p, inflated, delta, out);
    }
}

/// True if two sorted, deduplicated voxel lists share an element.
pub fn sorted_intersects(a: &[VoxelIndex], b: &[VoxelIndex]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Uniform hash grid over point indices, used for fixed-radius neighbour queries.
#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell: f64,
    buckets: HashMap<VoxelIndex, Vec<usize>>,
}

impl SpatialHash {
    pub fn new(points: &[Vector3<f64>], cell: f64) -> Self {
        let mut buckets: HashMap<VoxelIndex, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(voxel_index(p, cell)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    /// Indices of points within `radius` of `center`, in ascending order.
    pub fn within(&self, points: &[Vector3<f64>], center: &Vector3<f64>, radius: f64) -> Vec<usize> {
        let lo = voxel_index(&center.add_scalar(-radius), self.cell);
        let hi = voxel_index(&center.add_scalar(radius), self.cell);
        let r2 = radius * radius;
        let mut found = Vec::new();
        for a in lo[0]..=hi[0] {
            for b in lo[1]..=hi[1] {
                for c in lo[2]..=hi[2] {
                    if let Some(bucket) = self.buckets.get(&[a, b, c]) {
                        found.extend(
                            bucket
                                .iter()
                                .copied()
                                .filter(|&i| (points[i] - center).norm_squared() <= r2),
                        );
                    }
                }
            }
        }
        found.sort_unstable();
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voxel_index_floors() {
        assert_eq!(voxel_index(&Vector3::new(0.07, 0.01, 0.10), 0.03), [2, 0, 3]);
        assert_eq!(voxel_index(&Vector3::zeros(), 0.03), [0, 0, 0]);
        assert_eq!(voxel_index(&Vector3::new(-0.01, 0.0, 0.0), 0.03), [-1, 0, 0]);
    }

    #[test]
    fn capsule_covers_dense_samples() {
        let a = Vector3::new(0.013, -0.02, 0.4);
        let b = Vector3::new(0.31, 0.17, 0.22);
        let mut cells = Vec::new();
        voxelize_capsule(&a, &b, 0.0, 0.03, &mut cells);
        cells.sort_unstable();
        cells.dedup();
        for i in 0..=1000 {
            let p = a + (b - a) * (i as f64 / 1000.0);
            assert!(cells.binary_search(&voxel_index(&p, 0.03)).is_ok());
        }
    }

    #[test]
    fn spatial_hash_matches_brute_force() {
        let pts: Vec<_> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.37;
                Vector3::new(t.sin(), (1.7 * t).cos(), 0.1 * t.sin() * t.cos())
            })
            .collect();
        let grid = SpatialHash::new(&pts, 0.1);
        let c = Vector3::new(0.2, 0.1, 0.0);
        let brute: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - c).norm() <= 0.3).collect();
        assert_eq!(grid.within(&pts, &c, 0.3), brute);
    }
}
