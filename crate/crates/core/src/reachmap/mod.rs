//! Offline reachability map: a voxel hash from end-effector cells to the joint configurations
//! that reach them, plus the inverse query used to score a surface disc from a base placement.
//!
//! Building enumerates the Cartesian product of evenly spaced joint values, drops self-colliding
//! configurations, and files each survivor under the cell of its end-effector position. Link
//! occupancy is stored per link in a shared pool: the cells swept by link `i` depend only on the
//! first `i` joints, so configurations sharing a joint prefix share those entries.

mod format;
pub mod kmeans;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::Range;
use std::sync::{Arc, RwLock};

use nalgebra::{IsometryMatrix3, Vector3};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kinematics::{
    approach_of, jacobian_from_frames, link_lengths, link_polyline, links_checked_pairwise,
    manipulability_of_jacobian, voxelize_link, RobotModel,
};
use crate::sld::Sld;
use crate::spatial::sorted_intersects;

pub use crate::spatial::{voxel_index, VoxelIndex};
pub use format::{MAP_MAGIC, MAP_VERSION};
pub use kmeans::{angle_between, kmeans_approach_clusters, ApproachCluster};

/// Default cap on `steps_per_joint ^ dof` before a build is refused.
pub const DEFAULT_MAX_CONFIGURATIONS: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ReachRecord {
    pub position: Vector3<f64>,
    pub q: Box<[f64]>,
    pub approach: Vector3<f64>,
    pub manipulability: f64,
    /// Ids into the map's occupancy pool; the record's occupied cells are their union.
    pub occupancy: Box<[u32]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapMeta {
    pub dof: usize,
    pub steps_per_joint: usize,
    pub delta_bits: u64,
    pub robot_hash: String,
    /// Size of the enumerated joint grid.
    pub enumerated: u64,
    /// Configurations rejected for self-collision.
    pub self_colliding: u64,
}

impl MapMeta {
    pub fn delta(&self) -> f64 {
        f64::from_bits(self.delta_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachMap {
    meta: MapMeta,
    cells: HashMap<VoxelIndex, Range<usize>>,
    records: Vec<ReachRecord>,
    pool: Vec<Vec<VoxelIndex>>,
}

/// Stable content hash of a robot model, hex encoded.
pub fn robot_hash(model: &RobotModel) -> String {
    hex::encode(Sha256::digest(model.to_toml_string().as_bytes()))
}

/// A record to be filed by [`ReachMap::from_records`], with its occupied cells given explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSpec {
    pub position: Vector3<f64>,
    pub q: Vec<f64>,
    pub approach: Vector3<f64>,
    pub manipulability: f64,
    pub occupancy: Vec<VoxelIndex>,
}

impl ReachMap {
    /// Assembles a map from loose records; each record's cell is derived from its position.
    pub fn from_records(meta: MapMeta, specs: Vec<RecordSpec>) -> Result<Self> {
        let delta = meta.delta();
        if !(delta > 0.0) {
            return Err(Error::InvalidInput("voxel size must be positive".into()));
        }
        let mut pool = Vec::with_capacity(specs.len());
        let filed = specs
            .into_iter()
            .map(|s| {
                let mut occ = s.occupancy;
                occ.sort_unstable();
                occ.dedup();
                let id = pool.len() as u32;
                pool.push(occ);
                (
                    voxel_index(&s.position, delta),
                    ReachRecord {
                        position: s.position,
                        q: s.q.into_boxed_slice(),
                        approach: s.approach,
                        manipulability: s.manipulability,
                        occupancy: vec![id].into_boxed_slice(),
                    },
                )
            })
            .collect();
        Ok(Self::assemble(meta, filed, pool))
    }

    // Groups records by cell (sorted keys, stable within a cell).
    fn assemble(
        meta: MapMeta,
        mut filed: Vec<(VoxelIndex, ReachRecord)>,
        pool: Vec<Vec<VoxelIndex>>,
    ) -> Self {
        filed.sort_by_key(|a| a.0);
        let mut cells = HashMap::new();
        let mut records = Vec::with_capacity(filed.len());
        let mut start = 0;
        for i in 0..filed.len() {
            if i + 1 == filed.len() || filed[i + 1].0 != filed[i].0 {
                cells.insert(filed[i].0, start..i + 1);
                start = i + 1;
            }
        }
        records.extend(filed.into_iter().map(|(_, r)| r));
        Self {
            meta,
            cells,
            records,
            pool,
        }
    }

    pub fn meta(&self) -> &MapMeta {
        &self.meta
    }

    pub fn delta(&self) -> f64 {
        self.meta.delta()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn records(&self) -> &[ReachRecord] {
        &self.records
    }

    pub fn cell(&self, key: &VoxelIndex) -> Option<&[ReachRecord]> {
        self.cells.get(key).map(|r| &self.records[r.clone()])
    }

    /// Cells in ascending key order.
    pub fn cells(&self) -> impl Iterator<Item = (VoxelIndex, &[ReachRecord])> + '_ {
        let mut keys: Vec<_> = self.cells.keys().copied().collect();
        keys.sort_unstable();
        keys.into_iter()
            .map(move |k| (k, &self.records[self.cells[&k].clone()]))
    }

    pub fn occupancy_pool(&self) -> &[Vec<VoxelIndex>] {
        &self.pool
    }

    /// Materialized set of cells occupied by `record`.
    pub fn occupancy(&self, record: &ReachRecord) -> BTreeSet<VoxelIndex> {
        record
            .occupancy
            .iter()
            .flat_map(|&id| self.pool[id as usize].iter().copied())
            .collect()
    }

    pub fn collides(&self, record: &ReachRecord, obstacles: &HashSet<VoxelIndex>) -> bool {
        !obstacles.is_empty()
            && record
                .occupancy
                .iter()
                .any(|&id| self.pool[id as usize].iter().any(|c| obstacles.contains(c)))
    }

    /// Fails if the map was not built for `model`.
    pub fn check_robot(&self, model: &RobotModel) -> Result<()> {
        let found = robot_hash(model);
        if found != self.meta.robot_hash {
            return Err(Error::RobotMismatch {
                expected: self.meta.robot_hash.clone(),
                found,
            });
        }
        Ok(())
    }
}

/// Evenly spaced values over each joint's inclusive limit interval.
pub fn joint_grid(model: &RobotModel, steps: usize) -> Vec<Vec<f64>> {
    model
        .joint_limits()
        .iter()
        .map(|lim| {
            (0..steps)
                .map(|i| lim.lower + (lim.upper - lim.lower) * i as f64 / (steps - 1) as f64)
                .collect()
        })
        .collect()
}

pub fn build_map(model: &RobotModel, steps_per_joint: usize, delta: f64) -> Result<ReachMap> {
    build_map_capped(model, steps_per_joint, delta, DEFAULT_MAX_CONFIGURATIONS)
}

pub fn build_map_capped(
    model: &RobotModel,
    steps_per_joint: usize,
    delta: f64,
    max_configurations: u64,
) -> Result<ReachMap> {
    if steps_per_joint < 2 {
        return Err(Error::InvalidInput("need at least 2 steps per joint".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("voxel size must be positive".into()));
    }
    let projected = (steps_per_joint as u128).pow(model.dof() as u32);
    if projected > max_configurations as u128 {
        return Err(Error::MapTooLarge {
            projected,
            cap: max_configurations,
        });
    }

    let grid = joint_grid(model, steps_per_joint);
    let lengths = link_lengths(model);
    let branches: Vec<Branch> = grid[0]
        .par_iter()
        .map(|&q0| {
            let mut b = Branch::new(model, &grid, &lengths, delta);
            b.frames[0] = IsometryMatrix3::identity();
            b.visit(0, q0);
            b
        })
        .collect();

    let mut pool = Vec::new();
    let mut filed = Vec::new();
    let mut self_colliding = 0;
    for b in branches {
        let (offset, used) = (pool.len() as u32, compact(&b));
        for (old, cells) in b.pool.into_iter().enumerate() {
            if used[old] != u32::MAX {
                pool.push(cells);
            }
        }
        self_colliding += b.self_colliding;
        filed.extend(b.records.into_iter().map(|(key, mut r)| {
            for id in r.occupancy.iter_mut() {
                *id = offset + used[*id as usize];
            }
            (key, r)
        }));
    }
    log::info!(
        "reachability map: {} of {} configurations stored, {} self-colliding",
        filed.len(),
        projected,
        self_colliding
    );
    let meta = MapMeta {
        dof: model.dof(),
        steps_per_joint,
        delta_bits: delta.to_bits(),
        robot_hash: robot_hash(model),
        enumerated: projected as u64,
        self_colliding,
    };
    Ok(ReachMap::assemble(meta, filed, pool))
}

// New dense ids for the pool entries referenced by surviving records (u32::MAX if unused).
fn compact(b: &Branch) -> Vec<u32> {
    let mut used = vec![u32::MAX; b.pool.len()];
    for (_, r) in &b.records {
        for &id in r.occupancy.iter() {
            used[id as usize] = 0;
        }
    }
    let mut next = 0;
    for u in used.iter_mut() {
        if *u == 0 {
            *u = next;
            next += 1;
        }
    }
    used
}

// Depth-first enumeration of one subtree of the joint grid.
struct Branch<'a> {
    model: &'a RobotModel,
    grid: &'a [Vec<f64>],
    lengths: &'a [f64],
    delta: f64,
    frames: Vec<IsometryMatrix3<f64>>,
    q: Vec<f64>,
    link_ids: Vec<u32>,
    pool: Vec<Vec<VoxelIndex>>,
    records: Vec<(VoxelIndex, ReachRecord)>,
    self_colliding: u64,
}

impl<'a> Branch<'a> {
    fn new(model: &'a RobotModel, grid: &'a [Vec<f64>], lengths: &'a [f64], delta: f64) -> Self {
        let n = model.dof();
        Self {
            model,
            grid,
            lengths,
            delta,
            frames: vec![IsometryMatrix3::identity(); n + 1],
            q: vec![0.0; n],
            link_ids: vec![0; n],
            pool: Vec::new(),
            records: Vec::new(),
            self_colliding: 0,
        }
    }

    fn visit(&mut self, depth: usize, value: f64) {
        let n = self.model.dof();
        let row = &self.model.dh_rows()[depth];
        self.q[depth] = value;
        self.frames[depth + 1] = self.frames[depth] * row.transform(value);

        let poly = link_polyline(&self.frames, row, depth);
        let cells = voxelize_link(&poly, self.model.link_radii()[depth], self.delta);
        let radii = self.model.link_radii();
        for earlier in 0..depth.saturating_sub(1) {
            if links_checked_pairwise(self.lengths, radii, earlier, depth, self.delta)
                && sorted_intersects(&self.pool[self.link_ids[earlier] as usize], &cells)
            {
                let remaining: u64 = self.grid[depth + 1..].iter().map(|g| g.len() as u64).product();
                self.self_colliding += remaining;
                return;
            }
        }
        self.link_ids[depth] = self.pool.len() as u32;
        self.pool.push(cells);

        if depth + 1 == n {
            self.emit();
        } else {
            for i in 0..self.grid[depth + 1].len() {
                let v = self.grid[depth + 1][i];
                self.visit(depth + 1, v);
            }
        }
    }

    fn emit(&mut self) {
        let tip = &self.frames[self.model.dof()];
        let position = tip.translation.vector;
        let record = ReachRecord {
            position,
            q: self.q.clone().into_boxed_slice(),
            approach: approach_of(tip, self.model.tool_axis()),
            manipulability: manipulability_of_jacobian(&jacobian_from_frames(&self.frames)),
            occupancy: self.link_ids.clone().into_boxed_slice(),
        };
        self.records.push((voxel_index(&position, self.delta), record));
    }
}

const CENTROID_TIE: f64 = 1e-12;

/// Query tuning: clustering and the admissible approach cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryParams {
    pub k: usize,
    pub max_angle: f64,
    pub seed: u64,
    /// Compare approach vectors against the inward (negated) SLD normal.
    pub oppose_normal: bool,
}

impl Default for QueryParams {
    fn default() -> Self {
        Self {
            k: 8,
            max_angle: 30f64.to_radians(),
            seed: 0,
            oppose_normal: true,
        }
    }
}

impl QueryParams {
    /// Direction the tool should point for a surface with this normal.
    pub fn target(&self, normal: &Vector3<f64>) -> Vector3<f64> {
        if self.oppose_normal {
            -normal
        } else {
            *normal
        }
    }

    fn cell_seed(&self, key: &VoxelIndex) -> u64 {
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for &c in key {
            h = (h ^ c as u32 as u64).wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachSolution<'m> {
    pub record: &'m ReachRecord,
    /// Angle between the record's approach and the target direction.
    pub angular_error: f64,
}

/// Map plus a per-cell cache of approach clusters. Safe to share across threads.
pub struct ReachQuery<'m> {
    map: &'m ReachMap,
    params: QueryParams,
    clusters: RwLock<HashMap<VoxelIndex, Arc<Vec<ApproachCluster>>>>,
}

impl<'m> ReachQuery<'m> {
    pub fn new(map: &'m ReachMap, params: QueryParams) -> Self {
        Self {
            map,
            params,
            clusters: RwLock::new(HashMap::new()),
        }
    }

    pub fn map(&self) -> &'m ReachMap {
        self.map
    }

    pub fn params(&self) -> &QueryParams {
        &self.params
    }

    /// Approach clusters of a cell (member indices refer to [`ReachMap::cell`]), or `None` for
    /// an empty cell.
    pub fn clusters(&self, key: &VoxelIndex) -> Option<Arc<Vec<ApproachCluster>>> {
        Some(self.clusters_for(key, self.map.cell(key)?))
    }

    fn clusters_for(&self, key: &VoxelIndex, records: &[ReachRecord]) -> Arc<Vec<ApproachCluster>> {
        if let Some(c) = self.clusters.read().unwrap().get(key) {
            return c.clone();
        }
        let c = Arc::new(kmeans_approach_clusters(
            records,
            self.params.k,
            self.params.cell_seed(key),
        ));
        self.clusters.write().unwrap().entry(*key).or_insert(c).clone()
    }

    /// Best configuration for a disc already expressed in the arm-root frame, or `None` when the
    /// disc's cell is empty or no record of the best-aligned cluster is collision-free and inside
    /// the approach cone.
    pub fn query(&self, sld: &Sld, obstacles: &HashSet<VoxelIndex>) -> Option<ReachSolution<'m>> {
        let key = voxel_index(&sld.center, self.map.delta());
        let records = self.map.cell(&key)?;
        let clusters = self.clusters_for(&key, records);
        let target = self.params.target(&sld.normal);
        let angles: Vec<f64> = clusters
            .iter()
            .map(|c| angle_between(&c.centroid, &target))
            .collect();
        let best = clusters
            .iter()
            .zip(&angles)
            .filter(|(c, _)| !c.members.is_empty())
            .map(|(_, a)| *a)
            .fold(f64::INFINITY, f64::min);
        // clusters whose centroids tie for best alignment are scanned together
        let mut ranked: Vec<&'m ReachRecord> = clusters
            .iter()
            .zip(&angles)
            .filter(|(c, a)| !c.members.is_empty() && **a <= best + CENTROID_TIE)
            .flat_map(|(c, _)| c.members.iter().map(|&i| &records[i]))
            .collect();
        ranked.sort_by(|a, b| {
            b.manipulability
                .total_cmp(&a.manipulability)
                .then_with(|| lexicographic(&a.q, &b.q))
        });
        ranked.into_iter().find_map(|r| {
            let err = angle_between(&r.approach, &target);
            (err <= self.params.max_angle && !self.map.collides(r, obstacles)).then_some(ReachSolution {
                record: r,
                angular_error: err,
            })
        })
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// One-off query without a shared cluster cache.
pub fn query<'m>(
    map: &'m ReachMap,
    sld_in_arm: &Sld,
    obstacles: &HashSet<VoxelIndex>,
    params: QueryParams,
) -> Option<ReachSolution<'m>> {
    ReachQuery::new(map, params).query(sld_in_arm, obstacles)
}
