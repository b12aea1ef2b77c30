//! Coverage, time and manipulability of a set of base placements.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::RobotModel;
use crate::placement::{to_arm_frame, BasePlacement};
use crate::reachmap::{QueryParams, ReachMap, ReachQuery, ReachSolution};
use crate::sld::{OrientedPointCloud, Sld};
use crate::tsp::{shortest_open_path, DEFAULT_HELD_KARP_MAX};

/// Coverage fraction, time in seconds, summed manipulability.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

impl ObjectiveVector {
    /// The vector that is minimized: `[-f1, f2, -f3]`.
    pub fn minimized(&self) -> [f64; 3] {
        [-self.f1, self.f2, -self.f3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeParams {
    /// Mean Cartesian speed of the end effector while sweeping, m/s.
    pub v_ee: f64,
    /// Fixed navigation time between consecutive placements, s.
    pub t_nav: f64,
    /// When set, navigation time is instead the shortest path through the placements divided by
    /// this base speed (m/s).
    #[serde(default)]
    pub base_velocity: Option<f64>,
    #[serde(default = "default_held_karp_max")]
    pub held_karp_max: usize,
}

fn default_held_karp_max() -> usize {
    DEFAULT_HELD_KARP_MAX
}

impl Default for TimeParams {
    fn default() -> Self {
        Self {
            v_ee: 0.1,
            t_nav: 10.0,
            base_velocity: None,
            held_karp_max: DEFAULT_HELD_KARP_MAX,
        }
    }
}

/// Which placement claims each SLD.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<'m> {
    pub placements: Vec<BasePlacement>,
    /// Per SLD id: index into `placements` and the chosen configuration.
    pub solutions: Vec<Option<(usize, ReachSolution<'m>)>>,
}

impl<'m> Assignment<'m> {
    /// `V(z_k)`: SLD ids claimed by placement `k`, ascending.
    pub fn visits(&self, k: usize) -> Vec<usize> {
        self.solutions
            .iter()
            .enumerate()
            .filter_map(|(sld, s)| matches!(s, Some((p, _)) if *p == k).then_some(sld))
            .collect()
    }

    /// `N(z_k)` for every placement.
    pub fn reach_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.placements.len()];
        for (p, _) in self.solutions.iter().flatten() {
            counts[*p] += 1;
        }
        counts
    }

    pub fn assigned_count(&self) -> usize {
        self.solutions.iter().flatten().count()
    }
}

/// Reachability of every SLD from one placement.
pub type ReachRow<'m> = Vec<Option<ReachSolution<'m>>>;

/// Gives each SLD to the placement whose solution has the largest manipulability; ties go to
/// the lower placement id. `rows[k]` belongs to `placements[k]`.
pub fn assign_slds<'m>(placements: &[BasePlacement], rows: &[&ReachRow<'m>]) -> Assignment<'m> {
    let n_slds = rows.first().map_or(0, |r| r.len());
    let solutions = (0..n_slds)
        .map(|j| {
            let mut best: Option<(usize, ReachSolution<'m>)> = None;
            for (k, row) in rows.iter().enumerate() {
                let Some(sol) = row[j] else { continue };
                let better = match &best {
                    None => true,
                    Some((bk, bs)) => {
                        sol.record.manipulability > bs.record.manipulability
                            || (sol.record.manipulability == bs.record.manipulability
                                && placements[k].id < placements[*bk].id)
                    }
                };
                if better {
                    best = Some((k, sol));
                }
            }
            best
        })
        .collect();
    Assignment {
        placements: placements.to_vec(),
        solutions,
    }
}

/// `f1`: claimed SLDs over the total count `c`.
pub fn coverage(assignment: &Assignment, c: usize) -> f64 {
    assignment.assigned_count() as f64 / c as f64
}

/// Result of the time objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeCost {
    pub seconds: f64,
    pub sweep_length: f64,
    /// Some per-placement path came from the heuristic solver.
    pub approximate: bool,
}

/// `f2`: per-placement shortest sweep through the claimed SLD centers over `v_ee`, plus
/// navigation between placements. `m` counts every placement in the set, including ones that
/// claim nothing.
pub fn time_cost(assignment: &Assignment, slds: &[Sld], params: &TimeParams) -> Result<TimeCost> {
    if !(params.v_ee > 0.0) || !(params.t_nav >= 0.0) {
        return Err(Error::InvalidInput(
            "v_ee must be positive and t_nav non-negative".into(),
        ));
    }
    let mut sweep = 0.0;
    let mut approximate = false;
    for k in 0..assignment.placements.len() {
        let visits = assignment.visits(k);
        if visits.len() <= 1 {
            continue;
        }
        let dist = DMatrix::from_fn(visits.len(), visits.len(), |a, b| {
            (slds[visits[a]].center - slds[visits[b]].center).norm()
        });
        let path = shortest_open_path(&dist, params.held_karp_max)?;
        sweep += path.length;
        approximate |= !path.exact;
    }
    let m = assignment.placements.len();
    let nav = match params.base_velocity {
        Some(v) if m > 1 => {
            let ps = &assignment.placements;
            let dist = DMatrix::from_fn(m, m, |a, b| ps[a].planar_distance(&ps[b]));
            shortest_open_path(&dist, params.held_karp_max)?.length / v
        }
        _ => m.saturating_sub(1) as f64 * params.t_nav,
    };
    Ok(TimeCost {
        seconds: sweep / params.v_ee + nav,
        sweep_length: sweep,
        approximate,
    })
}

/// `f3`: summed manipulability of the claimed solutions.
pub fn total_manipulability(assignment: &Assignment) -> f64 {
    assignment
        .solutions
        .iter()
        .flatten()
        .fold(0.0, |acc, (_, s)| acc + s.record.manipulability)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub objectives: ObjectiveVector,
    pub approximate_time: bool,
}

fn unique_poses(placements: &[BasePlacement]) -> Vec<BasePlacement> {
    let mut unique: Vec<BasePlacement> = Vec::with_capacity(placements.len());
    for p in placements {
        if !unique.contains(p) {
            unique.push(*p);
        }
    }
    unique
}

/// Everything needed to score placement sets on one task.
pub struct EvalContext<'m> {
    model: &'m RobotModel,
    query: ReachQuery<'m>,
    slds: &'m [Sld],
    obstacle_cloud: &'m OrientedPointCloud,
    fbps: HashMap<u32, BasePlacement>,
    time: TimeParams,
    rows: RwLock<HashMap<u32, Arc<ReachRow<'m>>>>,
    cache: Mutex<HashMap<Vec<u32>, Evaluation>>,
}

impl<'m> EvalContext<'m> {
    pub fn new(
        model: &'m RobotModel,
        map: &'m ReachMap,
        slds: &'m [Sld],
        obstacle_cloud: &'m OrientedPointCloud,
        fbps: &[BasePlacement],
        time: TimeParams,
        query: QueryParams,
    ) -> Result<Self> {
        map.check_robot(model)?;
        if slds.is_empty() {
            return Err(Error::InvalidInput("task has no SLDs".into()));
        }
        Ok(Self {
            model,
            query: ReachQuery::new(map, query),
            slds,
            obstacle_cloud,
            fbps: fbps.iter().map(|p| (p.id, *p)).collect(),
            time,
            rows: RwLock::new(HashMap::new()),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn model(&self) -> &'m RobotModel {
        self.model
    }

    pub fn slds(&self) -> &'m [Sld] {
        self.slds
    }

    pub fn time_params(&self) -> &TimeParams {
        &self.time
    }

    pub fn placement(&self, id: u32) -> Option<&BasePlacement> {
        self.fbps.get(&id)
    }

    /// Queries every SLD from `bp` (task and obstacles moved into its arm frame).
    pub fn reach_row(&self, bp: &BasePlacement) -> ReachRow<'m> {
        let task = to_arm_frame(
            bp,
            self.model,
            self.slds,
            self.obstacle_cloud,
            self.query.map().delta(),
        );
        task.slds
            .iter()
            .map(|s| self.query.query(s, &task.obstacles))
            .collect()
    }

    fn fbp_row(&self, id: u32) -> Result<Arc<ReachRow<'m>>> {
        if let Some(r) = self.rows.read().unwrap().get(&id) {
            return Ok(r.clone());
        }
        let bp = self
            .fbps
            .get(&id)
            .ok_or_else(|| Error::InvalidInput(format!("placement {id} is not a favoured placement")))?;
        let row = Arc::new(self.reach_row(bp));
        Ok(self.rows.write().unwrap().entry(id).or_insert(row).clone())
    }

    /// Computes the reach rows of all favoured placements up front.
    pub fn warm_up(&self) {
        let mut ids: Vec<u32> = self.fbps.keys().copied().collect();
        ids.sort_unstable();
        let rows: Vec<_> = ids
            .par_iter()
            .map(|&id| (id, Arc::new(self.reach_row(&self.fbps[&id]))))
            .collect();
        self.rows.write().unwrap().extend(rows);
    }

    /// Reach row of any placement; favoured placements are served from the cache.
    pub fn placement_row(&self, bp: &BasePlacement) -> Arc<ReachRow<'m>> {
        match self.fbps.get(&bp.id) {
            Some(f) if f == bp => self.fbp_row(bp.id).expect("known id"),
            _ => Arc::new(self.reach_row(bp)),
        }
    }

    /// Assignment for an explicit placement list (duplicate poses count once).
    pub fn assign_placements(&self, placements: &[BasePlacement]) -> Assignment<'m> {
        let unique = unique_poses(placements);
        let rows: Vec<Arc<ReachRow<'m>>> = unique.iter().map(|p| self.placement_row(p)).collect();
        let refs: Vec<&ReachRow<'m>> = rows.iter().map(|r| r.as_ref()).collect();
        assign_slds(&unique, &refs)
    }

    /// Scores `placements` from rows computed earlier; `rows[k]` must belong to
    /// `placements[k]`.
    pub fn evaluate_rows(&self, placements: &[BasePlacement], rows: &[&ReachRow<'m>]) -> Result<Evaluation> {
        if placements.len() != rows.len() {
            return Err(Error::InvalidInput("one reach row per placement expected".into()));
        }
        let unique = unique_poses(placements);
        let picked: Vec<&ReachRow<'m>> = unique
            .iter()
            .map(|u| {
                rows[placements
                    .iter()
                    .position(|p| p == u)
                    .expect("pose came from the list")]
            })
            .collect();
        self.evaluate_assignment(&assign_slds(&unique, &picked))
    }

    pub fn evaluate_assignment(&self, assignment: &Assignment) -> Result<Evaluation> {
        let time = time_cost(assignment, self.slds, &self.time)?;
        Ok(Evaluation {
            objectives: ObjectiveVector {
                f1: coverage(assignment, self.slds.len()),
                f2: time.seconds,
                f3: total_manipulability(assignment),
            },
            approximate_time: time.approximate,
        })
    }

    pub fn evaluate_placements(&self, placements: &[BasePlacement]) -> Result<Evaluation> {
        self.evaluate_assignment(&self.assign_placements(placements))
    }

    /// Objectives of a chromosome of favoured-placement ids (0 = no placement). Results are
    /// cached under the sorted multiset of nonzero genes.
    pub fn evaluate_genes(&self, genes: &[u32]) -> Result<Evaluation> {
        let mut key: Vec<u32> = genes.iter().copied().filter(|&g| g != 0).collect();
        key.sort_unstable();
        key.dedup();
        if let Some(e) = self.cache.lock().unwrap().get(&key) {
            return Ok(*e);
        }
        let placements =
            key.iter()
                .map(|id| {
                    self.fbps.get(id).copied().ok_or_else(|| {
                        Error::InvalidInput(format!("placement {id} is not a favoured placement"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        let eval = self.evaluate_placements(&placements)?;
        self.cache.lock().unwrap().insert(key, eval);
        Ok(eval)
    }

    pub fn cached_evaluations(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}
