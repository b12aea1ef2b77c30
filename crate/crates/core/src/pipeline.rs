//! End-to-end run: reachability map, surface tiling, candidate filtering, optimization,
//! selection and fine-tuning, with every artifact written as CSV next to a run manifest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::finetune::{local_search, FineTuneConfig, PlacementRules};
use crate::kinematics::RobotModel;
use crate::nsga2::{front_to_csv, run, stats_to_csv, GaConfig, GenePool, Individual};
use crate::objectives::{EvalContext, ObjectiveVector, TimeParams};
use crate::placement::{filter_fbps, placements_to_csv, sample_candidates, BasePlacement, ReachLimits};
use crate::reachmap::{build_map, robot_hash, QueryParams, ReachMap};
use crate::scene::Scene;
use crate::sld::{decompose_surface, slds_to_csv};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub delta: f64,
    pub steps_per_joint: usize,
}

impl Default for MapSection {
    fn default() -> Self {
        Self {
            delta: 0.05,
            steps_per_joint: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySection {
    pub k: usize,
    pub max_angle_deg: f64,
    pub oppose_normal: bool,
}

impl Default for QuerySection {
    fn default() -> Self {
        Self {
            k: 8,
            max_angle_deg: 30.0,
            oppose_normal: true,
        }
    }
}

impl QuerySection {
    pub fn params(&self, seed: u64) -> QueryParams {
        QueryParams {
            k: self.k,
            max_angle: self.max_angle_deg.to_radians(),
            seed,
            oppose_normal: self.oppose_normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    #[default]
    MaxCoverage,
    MinTime,
    /// Largest coverage per second.
    Knee,
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-coverage" => Ok(Self::MaxCoverage),
            "min-time" => Ok(Self::MinTime),
            "knee" => Ok(Self::Knee),
            other => Err(Error::Config(format!(
                "unknown selection policy {other:?} (max-coverage, min-time, knee)"
            ))),
        }
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MaxCoverage => "max-coverage",
            Self::MinTime => "min-time",
            Self::Knee => "knee",
        })
    }
}

fn coverage_per_second(o: &ObjectiveVector) -> f64 {
    if o.f2 > 0.0 {
        o.f1 / o.f2
    } else if o.f1 > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Index of the chosen front member. Ties go to fewer placements, then to lower time, then to
/// the earlier row.
pub fn select_solution(front: &[(Vec<u32>, ObjectiveVector)], policy: SelectionPolicy) -> Result<usize> {
    let placements = |i: usize| front[i].0.iter().filter(|&&g| g != 0).count();
    let primary = |i: usize| {
        let o = &front[i].1;
        match policy {
            SelectionPolicy::MaxCoverage => o.f1,
            SelectionPolicy::MinTime => -o.f2,
            SelectionPolicy::Knee => coverage_per_second(o),
        }
    };
    (0..front.len())
        .min_by(|&a, &b| {
            primary(b)
                .total_cmp(&primary(a))
                .then(placements(a).cmp(&placements(b)))
                .then(front[a].1.f2.total_cmp(&front[b].1.f2))
                .then(a.cmp(&b))
        })
        .ok_or_else(|| Error::InvalidInput("empty Pareto front".into()))
}

/// Scenario file (TOML). Paths are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub robot: PathBuf,
    pub scene: PathBuf,
    pub output: PathBuf,
    /// Directory for cached reachability maps; defaults to the output directory.
    #[serde(default)]
    pub map_cache: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sld_radius")]
    pub sld_radius: f64,
    #[serde(default)]
    pub selection: SelectionPolicy,
    #[serde(default)]
    pub map: MapSection,
    #[serde(default)]
    pub query: QuerySection,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub time: TimeParams,
    #[serde(default)]
    pub finetune: Option<FineTuneConfig>,
}

fn default_sld_radius() -> f64 {
    0.04
}

impl ScenarioConfig {
    /// Parses and resolves relative paths against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for p in [&mut cfg.robot, &mut cfg.scene, &mut cfg.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = cfg.map_cache.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        cfg.ga.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        let config = |e: Error| Error::Config(e.to_string());
        for (what, p) in [("robot", &self.robot), ("scene", &self.scene)] {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "{what} file {} does not exist",
                    p.display()
                )));
            }
        }
        if !(self.sld_radius > 0.0) || !(self.map.delta > 0.0) || self.map.steps_per_joint == 0 {
            return Err(Error::Config(
                "sld_radius, map.delta and map.steps_per_joint must be positive".into(),
            ));
        }
        if self.query.k == 0 || !(self.query.max_angle_deg > 0.0) {
            return Err(Error::Config(
                "query.k and query.max_angle_deg must be positive".into(),
            ));
        }
        if !(self.time.v_ee > 0.0) || !(self.time.t_nav >= 0.0) {
            return Err(Error::Config(
                "time.v_ee must be positive and time.t_nav non-negative".into(),
            ));
        }
        self.ga.validate().map_err(config)?;
        if let Some(f) = &self.finetune {
            f.validate().map_err(config)?;
        }
        Ok(())
    }

    pub fn map_cache_dir(&self) -> &Path {
        self.map_cache.as_deref().unwrap_or(&self.output)
    }
}

/// Cache file name for a map of `model` at the given resolution.
pub fn map_cache_name(model: &RobotModel, map: &MapSection) -> String {
    let mut h = Sha256::new();
    h.update(model.to_toml_string().as_bytes());
    h.update(map.delta.to_bits().to_le_bytes());
    h.update((map.steps_per_joint as u64).to_le_bytes());
    format!("map-{}.bprm", &hex::encode(h.finalize())[..16])
}

/// Loads the cached map for these parameters or builds and stores it. The flag is true when
/// the map was built.
pub fn load_or_build_map(
    model: &RobotModel,
    map: &MapSection,
    cache_dir: &Path,
) -> Result<(ReachMap, PathBuf, bool)> {
    let path = cache_dir.join(map_cache_name(model, map));
    if path.is_file() {
        let loaded = ReachMap::load(&path)?;
        loaded.check_robot(model)?;
        log::info!("reusing reachability map {}", path.display());
        return Ok((loaded, path, false));
    }
    log::info!(
        "building reachability map: {} steps per joint, voxel {} m",
        map.steps_per_joint,
        map.delta
    );
    let built = build_map(model, map.steps_per_joint, map.delta)?;
    std::fs::create_dir_all(cache_dir)?;
    built.save(&path)?;
    Ok((built, path, true))
}

pub fn scene_hash(scene: &Scene) -> String {
    let mut h = Sha256::new();
    h.update(scene.task_cloud.to_text());
    h.update(scene.obstacle_cloud.to_text());
    for p in &scene.footprint_obstacles {
        for v in p.vertices() {
            h.update(v[0].to_le_bytes());
            h.update(v[1].to_le_bytes());
        }
    }
    h.update(format!("{:?}{:?}", scene.region, scene.reach));
    hex::encode(h.finalize())
}

/// Front of a finished search as plain rows.
pub fn front_rows(front: &[Individual]) -> Vec<(Vec<u32>, ObjectiveVector)> {
    front.iter().map(|p| (p.genes.clone(), p.objectives)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub file: String,
    pub delta: f64,
    pub steps_per_joint: usize,
    pub records: usize,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub genes: Vec<u32>,
    pub selected: ObjectiveVector,
    pub finetuned: Option<ObjectiveVector>,
    pub finetune_moves: usize,
}

/// Everything that determines a run's outputs, plus summary counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub seed: u64,
    pub robot_name: String,
    pub robot_hash: String,
    pub scene_hash: String,
    pub sld_radius: f64,
    pub slds: usize,
    pub candidates: usize,
    pub fbps: usize,
    pub reach: ReachLimits,
    pub selection: SelectionPolicy,
    pub map: MapRecord,
    pub query: QuerySection,
    pub ga: GaConfig,
    pub ga_seed: u64,
    pub time: TimeParams,
    pub finetune: Option<FineTuneConfig>,
    pub result: ResultRecord,
}

pub const SLD_FILE: &str = "slds.csv";
pub const FBP_FILE: &str = "fbps.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const FRONT_FILE: &str = "front.csv";
pub const SOLUTION_FILE: &str = "solution.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub manifest: Manifest,
    pub output: PathBuf,
    pub solution: Vec<BasePlacement>,
    pub map_built: bool,
}

/// Runs every stage. Inputs are loaded and checked before anything is written.
pub fn run_pipeline(cfg: &ScenarioConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let config = |what: &str, e: Error| Error::Config(format!("{what}: {e}"));
    let model = RobotModel::load(&cfg.robot).map_err(|e| config("robot", e))?;
    let scene = Scene::load(&cfg.scene).map_err(|e| config("scene", e))?;

    let slds = decompose_surface(&scene.task_cloud, cfg.sld_radius)?;
    let limits = scene.reach.unwrap_or_else(|| ReachLimits::for_model(&model));
    let candidates = sample_candidates(&scene.region)?;
    let fbps = filter_fbps(&candidates, &model, &scene.footprint_obstacles, &slds, limits)?;
    if fbps.is_empty() {
        return Err(Error::NoFavouredPlacements);
    }

    let (map, map_path, map_built) = load_or_build_map(&model, &cfg.map, cfg.map_cache_dir())?;
    let ctx = EvalContext::new(
        &model,
        &map,
        &slds,
        &scene.obstacle_cloud,
        &fbps,
        cfg.time,
        cfg.query.params(cfg.seed),
    )?;
    ctx.warm_up();
    let pool = GenePool::new(&fbps, cfg.ga.min_spacing)?;
    let ga = run(&cfg.ga, &pool, &ctx)?;
    let rows = front_rows(&ga.front);
    let pick = select_solution(&rows, cfg.selection)?;
    let genes = rows[pick].0.clone();
    let selected: Vec<BasePlacement> = genes
        .iter()
        .filter(|&&g| g != 0)
        .map(|g| *ctx.placement(*g).expect("front genes are favoured placements"))
        .collect();

    let (solution, finetuned, moves) = match &cfg.finetune {
        Some(ft) => {
            let rules = PlacementRules {
                footprint_obstacles: &scene.footprint_obstacles,
                limits,
            };
            let res = local_search(&selected, ft, &ctx, rules)?;
            (res.placements, Some(res.after), res.moves)
        }
        None => (selected, None, 0),
    };

    std::fs::create_dir_all(&cfg.output)?;
    let out = |name: &str| cfg.output.join(name);
    std::fs::write(out(SLD_FILE), slds_to_csv(&slds))?;
    std::fs::write(out(FBP_FILE), placements_to_csv(&fbps))?;
    std::fs::write(out(STATS_FILE), stats_to_csv(&ga.stats))?;
    std::fs::write(
        out(FRONT_FILE),
        front_to_csv(&ga.front, cfg.ga.genes_per_chromosome),
    )?;
    std::fs::write(out(SOLUTION_FILE), placements_to_csv(&solution))?;

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        robot_name: model.name().into(),
        robot_hash: robot_hash(&model),
        scene_hash: scene_hash(&scene),
        sld_radius: cfg.sld_radius,
        slds: slds.len(),
        candidates: candidates.len(),
        fbps: fbps.len(),
        reach: limits,
        selection: cfg.selection,
        map: MapRecord {
            file: map_path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
            delta: cfg.map.delta,
            steps_per_joint: cfg.map.steps_per_joint,
            records: map.len(),
            cells: map.cell_count(),
        },
        query: cfg.query,
        ga: cfg.ga,
        ga_seed: cfg.ga.seed,
        time: cfg.time,
        finetune: cfg.finetune,
        result: ResultRecord {
            genes,
            selected: rows[pick].1,
            finetuned,
            finetune_moves: moves,
        },
    };
    std::fs::write(
        out(MANIFEST_FILE),
        toml::to_string(&manifest).expect("manifest serializes"),
    )?;
    Ok(PipelineReport {
        manifest,
        output: cfg.output.clone(),
        solution,
        map_built,
    })
}
