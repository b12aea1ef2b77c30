//! Browser demo: a washbasin counter seen from above. Pick base placements by hand and score
//! them, or let NSGA-II find the coverage/time front.

use wasm_bindgen::prelude::*;

use basepose::kinematics::{presets, RobotModel};
use basepose::nsga2::{run, GaConfig, GenePool};
use basepose::objectives::{EvalContext, TimeParams};
use basepose::placement::{filter_fbps, sample_candidates, BasePlacement, ReachLimits};
use basepose::reachmap::{build_map, QueryParams, ReachMap};
use basepose::scene::{washbasin, Scene, WashbasinParams};
use basepose::sld::{decompose_surface, Sld};

const SLD_RADIUS: f64 = 0.04;
const MAP_DELTA: f64 = 0.05;

fn js(e: basepose::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    params: WashbasinParams,
    model: RobotModel,
    scene: Scene,
    slds: Vec<Sld>,
    fbps: Vec<BasePlacement>,
    map: ReachMap,
}

impl Demo {
    pub fn build(basins: usize, map_steps: usize) -> basepose::Result<Self> {
        let params = WashbasinParams {
            basins: basins.clamp(1, 4),
            counter_length: 0.6 * basins.clamp(1, 4) as f64,
            ..WashbasinParams::default()
        };
        let model = presets::five_dof();
        let scene = washbasin(&params);
        let slds = decompose_surface(&scene.task_cloud, SLD_RADIUS)?;
        let limits = scene.reach.unwrap_or_else(|| ReachLimits::for_model(&model));
        let fbps = filter_fbps(
            &sample_candidates(&scene.region)?,
            &model,
            &scene.footprint_obstacles,
            &slds,
            limits,
        )?;
        if fbps.is_empty() {
            return Err(basepose::Error::NoFavouredPlacements);
        }
        let map = build_map(&model, map_steps, MAP_DELTA)?;
        Ok(Self {
            params,
            model,
            scene,
            slds,
            fbps,
            map,
        })
    }

    fn context(&self) -> basepose::Result<EvalContext<'_>> {
        EvalContext::new(
            &self.model,
            &self.map,
            &self.slds,
            &self.scene.obstacle_cloud,
            &self.fbps,
            TimeParams::default(),
            QueryParams::default(),
        )
    }

    fn lookup(&self, ids: &[u32]) -> basepose::Result<Vec<BasePlacement>> {
        ids.iter()
            .map(|id| {
                self.fbps
                    .iter()
                    .find(|p| p.id == *id)
                    .copied()
                    .ok_or_else(|| basepose::Error::InvalidInput(format!("no favoured placement {id}")))
            })
            .collect()
    }

    pub fn score(&self, ids: &[u32]) -> basepose::Result<Vec<f64>> {
        let ctx = self.context()?;
        let placements = self.lookup(ids)?;
        let assignment = ctx.assign_placements(&placements);
        let o = ctx.evaluate_assignment(&assignment)?.objectives;
        let mut out = vec![o.f1, o.f2, o.f3];
        out.extend(assignment.solutions.iter().map(|s| match s {
            Some((k, _)) => assignment.placements[*k].id as f64,
            None => 0.0,
        }));
        Ok(out)
    }

    pub fn search(
        &self,
        genes: usize,
        population: usize,
        generations: usize,
        seed: u64,
    ) -> basepose::Result<Vec<f64>> {
        let config = GaConfig {
            genes_per_chromosome: genes,
            population_size: population,
            generations,
            tournament_size: GaConfig::default().tournament_size.min(population),
            seed,
            ..GaConfig::default()
        };
        let ctx = self.context()?;
        let pool = GenePool::new(&self.fbps, config.min_spacing)?;
        let res = run(&config, &pool, &ctx)?;
        Ok(res
            .front
            .iter()
            .flat_map(|p| {
                p.genes
                    .iter()
                    .map(|&g| g as f64)
                    .chain([p.objectives.f1, p.objectives.f2, p.objectives.f3])
                    .collect::<Vec<_>>()
            })
            .collect())
    }
}

#[wasm_bindgen]
impl Demo {
    /// Builds the counter with `basins` sinks and a reachability map with `map_steps` samples
    /// per joint.
    #[wasm_bindgen(constructor)]
    pub fn new(basins: usize, map_steps: usize) -> Result<Demo, JsError> {
        Self::build(basins, map_steps).map_err(js)
    }

    pub fn counter_length(&self) -> f64 {
        self.params.counter_length
    }

    pub fn counter_depth(&self) -> f64 {
        self.params.counter_depth
    }

    pub fn opening_radius(&self) -> f64 {
        self.params.opening_radius
    }

    /// `x, y` per basin.
    pub fn basin_centers(&self) -> Vec<f64> {
        self.params.basin_centers().concat()
    }

    /// `x, y` per disc.
    pub fn disc_centers(&self) -> Vec<f64> {
        self.slds.iter().flat_map(|s| [s.center.x, s.center.y]).collect()
    }

    /// `id, x, y, theta` per favoured placement.
    pub fn placements(&self) -> Vec<f64> {
        self.fbps
            .iter()
            .flat_map(|p| [p.id as f64, p.x, p.y, p.theta])
            .collect()
    }

    /// Base footprint corners `x, y` in the base frame.
    pub fn footprint(&self) -> Vec<f64> {
        self.model.footprint().vertices().concat()
    }

    /// Coverage, time and manipulability of the chosen placements, followed by the id of the
    /// placement serving each disc (0 when unreached).
    pub fn evaluate(&self, ids: &[u32]) -> Result<Vec<f64>, JsError> {
        self.score(ids).map_err(js)
    }

    /// Final NSGA-II front, one row per member: `genes` placement ids (0 for an empty slot)
    /// then coverage, time and manipulability.
    pub fn optimize(
        &self,
        genes: usize,
        population: usize,
        generations: usize,
        seed: u64,
    ) -> Result<Vec<f64>, JsError> {
        self.search(genes, population, generations, seed).map_err(js)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_and_optimizes_a_small_counter() {
        let demo = Demo::build(1, 8).unwrap();
        let n = demo.slds.len();
        let ids: Vec<u32> = demo.fbps.iter().step_by(40).take(2).map(|p| p.id).collect();
        let scored = demo.score(&ids).unwrap();
        assert_eq!(scored.len(), 3 + n);
        let covered = scored[3..].iter().filter(|&&v| v != 0.0).count();
        assert!((scored[0] - covered as f64 / n as f64).abs() < 1e-12);
        assert!(scored[3..].iter().all(|&v| v == 0.0 || ids.contains(&(v as u32))));

        let front = demo.search(2, 8, 3, 1).unwrap();
        assert!(!front.is_empty());
        assert_eq!(front.len() % 5, 0);
        assert_eq!(front, demo.search(2, 8, 3, 1).unwrap());
    }

    #[test]
    fn unknown_placement_is_an_error() {
        let demo = Demo::build(1, 6).unwrap();
        assert!(demo.score(&[u32::MAX]).is_err());
    }
}
