//! K-means over unit approach vectors with angular distance.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ReachRecord;

pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ApproachCluster {
    pub centroid: Vector3<f64>,
    /// Indices into the clustered slice.
    pub members: Vec<usize>,
}

/// Angle between two unit vectors.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

pub fn kmeans_approach_clusters(records: &[ReachRecord], k: usize, seed: u64) -> Vec<ApproachCluster> {
    let dirs: Vec<_> = records.iter().map(|r| r.approach).collect();
    cluster_directions(&dirs, k, seed)
}

/// Clusters unit vectors into `k` groups.
///
/// Seeding is k-means++ on squared angular distance, driven by a ChaCha stream seeded with
/// `seed`. Centroids are re-normalized means; a centroid whose members cancel out, or whose
/// cluster empties, keeps its previous direction. Stops when assignments are stable or after
/// [`MAX_ITERATIONS`] rounds, and always ends with every point on its nearest centroid (lowest
/// index on ties). With `dirs.len() <= k` every point forms its own cluster. Empty clusters are
/// returned so that the output always has `min(k, n)` entries.
pub fn cluster_directions(dirs: &[Vector3<f64>], k: usize, seed: u64) -> Vec<ApproachCluster> {
    let k = k.max(1);
    if dirs.len() <= k {
        return dirs
            .iter()
            .enumerate()
            .map(|(i, d)| ApproachCluster {
                centroid: *d,
                members: vec![i],
            })
            .collect();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Vec::with_capacity(k);
    centroids.push(dirs[rng.gen_range(0..dirs.len())]);
    let mut nearest: Vec<f64> = dirs
        .iter()
        .map(|d| angle_between(d, &centroids[0]).powi(2))
        .collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = dirs.len() - 1;
            for (i, w) in nearest.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..dirs.len())
        };
        let c = dirs[pick];
        for (w, d) in nearest.iter_mut().zip(dirs) {
            *w = w.min(angle_between(d, &c).powi(2));
        }
        centroids.push(c);
    }

    let mut assignment = assign(dirs, &centroids);
    for _ in 0..MAX_ITERATIONS {
        update(dirs, &assignment, &mut centroids);
        let next = assign(dirs, &centroids);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    // the iteration cap can leave centroids one update ahead of the assignment
    let assignment = assign(dirs, &centroids);

    let mut clusters: Vec<_> = centroids
        .into_iter()
        .map(|centroid| ApproachCluster {
            centroid,
            members: Vec::new(),
        })
        .collect();
    for (i, &c) in assignment.iter().enumerate() {
        clusters[c].members.push(i);
    }
    clusters
}

fn assign(dirs: &[Vector3<f64>], centroids: &[Vector3<f64>]) -> Vec<usize> {
    dirs.iter()
        .map(|d| {
            let mut best = (0, f64::INFINITY);
            for (ci, c) in centroids.iter().enumerate() {
                let a = angle_between(d, c);
                if a < best.1 {
                    best = (ci, a);
                }
            }
            best.0
        })
        .collect()
}

fn update(dirs: &[Vector3<f64>], assignment: &[usize], centroids: &mut [Vector3<f64>]) {
    let mut sums = vec![Vector3::zeros(); centroids.len()];
    for (d, &c) in dirs.iter().zip(assignment) {
        sums[c] += d;
    }
    for (c, s) in centroids.iter_mut().zip(sums) {
        let len = s.norm();
        if len > 1e-12 {
            *c = s / len;
        }
    }
}
