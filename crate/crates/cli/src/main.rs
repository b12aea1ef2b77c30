use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use basepose::finetune::{local_search, FineTuneConfig, PlacementRules};
use basepose::kinematics::{presets, RobotModel};
use basepose::nsga2::{front_from_csv, front_to_csv, run, stats_to_csv, GaConfig, GenePool};
use basepose::objectives::{EvalContext, TimeParams};
use basepose::pipeline::{run_pipeline, select_solution, QuerySection, ScenarioConfig, SelectionPolicy};
use basepose::placement::{
    filter_fbps, placements_from_csv, placements_to_csv, sample_candidates, ReachLimits,
};
use basepose::reachmap::{build_map, ReachMap};
use basepose::scene::{washbasin, Scene, WashbasinParams};
use basepose::sld::{decompose_surface, slds_from_csv, slds_to_csv};
use clap::{Args, Parser, Subcommand};

const SCENARIO_TEMPLATE: &str = include_str!("../assets/scenario.toml");

/// Base placement optimization for mobile manipulators.
#[derive(Parser)]
#[command(name = "basepose", version)]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "BASEPOSE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline from a scenario file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build a reachability map.
    BuildRm {
        #[arg(long)]
        robot: PathBuf,
        #[arg(long, default_value_t = 16)]
        steps: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tile a scene's task surface with discs.
    Decompose {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0.04)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample candidate base placements and keep the favoured ones.
    Sample {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        robot: PathBuf,
        #[arg(long)]
        slds: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search placement sets with NSGA-II.
    Optimize {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        fbps: PathBuf,
        #[command(flatten)]
        ga: GaArgs,
        /// Directory for stats.csv and front.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine a solution by local search.
    Finetune {
        #[command(flatten)]
        task: TaskArgs,
        /// Placement CSV (id,x,y,theta).
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 0.15)]
        radius: f64,
        #[arg(long, default_value_t = 0.025)]
        xy_step: f64,
        #[arg(long, default_value_t = 15.0)]
        theta_step_deg: f64,
        #[arg(long, default_value_t = 0.2)]
        min_spacing: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick one solution from a front CSV.
    Select {
        #[arg(long)]
        front: PathBuf,
        #[arg(long, default_value = "max-coverage")]
        policy: String,
        /// Favoured placements; with --out, writes the chosen placements as CSV.
        #[arg(long, requires = "out")]
        fbps: Option<PathBuf>,
        #[arg(long, requires = "fbps")]
        out: Option<PathBuf>,
    },
    /// Write the synthetic washbasin robot, scene and an annotated scenario file.
    DemoScene {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long)]
    robot: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    slds: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 30.0)]
    max_angle_deg: f64,
    #[arg(long, default_value_t = 0.1)]
    v_ee: f64,
    #[arg(long, default_value_t = 10.0)]
    t_nav: f64,
    /// Derive navigation time from this base speed instead of --t-nav.
    #[arg(long)]
    base_velocity: Option<f64>,
}

#[derive(Args)]
struct GaArgs {
    #[arg(long, default_value_t = 40)]
    population: usize,
    #[arg(long, default_value_t = 80)]
    generations: usize,
    #[arg(long, default_value_t = 3)]
    genes: usize,
    #[arg(long, default_value_t = 0.6)]
    mutation_probability: f64,
    #[arg(long, default_value_t = 1)]
    mutation_genes: usize,
    #[arg(long, default_value_t = 20)]
    tournament: usize,
    #[arg(long, default_value_t = 0.2)]
    min_spacing: f64,
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    basepose::Error::Config(msg.into()).into()
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(config_error(format!(
            "{what} file {} does not exist",
            path.display()
        )))
    }
}

fn read(path: &Path, what: &str) -> Result<String> {
    require_file(path, what)?;
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

struct Task {
    model: RobotModel,
    scene: Scene,
    map: ReachMap,
    slds: Vec<basepose::sld::Sld>,
}

impl TaskArgs {
    fn load(&self) -> Result<Task> {
        require_file(&self.robot, "robot")?;
        require_file(&self.scene, "scene")?;
        require_file(&self.map, "map")?;
        let model = RobotModel::load(&self.robot).map_err(|e| config_error(format!("robot: {e}")))?;
        let scene = Scene::load(&self.scene).map_err(|e| config_error(format!("scene: {e}")))?;
        let slds = slds_from_csv(&read(&self.slds, "SLD")?)?;
        let map = ReachMap::load(&self.map)?;
        map.check_robot(&model)?;
        Ok(Task {
            model,
            scene,
            map,
            slds,
        })
    }

    fn time(&self) -> TimeParams {
        TimeParams {
            v_ee: self.v_ee,
            t_nav: self.t_nav,
            base_velocity: self.base_velocity,
            ..TimeParams::default()
        }
    }

    fn query(&self) -> QuerySection {
        QuerySection {
            k: self.k,
            max_angle_deg: self.max_angle_deg,
            oppose_normal: true,
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            let report = run_pipeline(&cfg)?;
            let r = &report.manifest.result;
            println!(
                "slds {}  fbps {}  map records {}",
                report.manifest.slds, report.manifest.fbps, report.manifest.map.records
            );
            println!(
                "selected genes {:?}: coverage {:.4}  time {:.2} s  manipulability {:.4}",
                r.genes, r.selected.f1, r.selected.f2, r.selected.f3
            );
            if let Some(f) = r.finetuned {
                println!(
                    "after fine-tuning: coverage {:.4}  time {:.2} s  manipulability {:.4}",
                    f.f1, f.f2, f.f3
                );
            }
            println!("artifacts in {}", report.output.display());
        }
        Command::BuildRm {
            robot,
            steps,
            delta,
            out,
        } => {
            require_file(&robot, "robot")?;
            let model = RobotModel::load(&robot).map_err(|e| config_error(format!("robot: {e}")))?;
            let map = build_map(&model, steps, delta)?;
            map.save(&out)?;
            let meta = map.meta();
            println!(
                "{} records in {} cells ({} enumerated, {} self-colliding) -> {}",
                map.len(),
                map.cell_count(),
                meta.enumerated,
                meta.self_colliding,
                out.display()
            );
        }
        Command::Decompose { scene, radius, out } => {
            require_file(&scene, "scene")?;
            let scene = Scene::load(&scene).map_err(|e| config_error(format!("scene: {e}")))?;
            let slds = decompose_surface(&scene.task_cloud, radius)?;
            std::fs::write(&out, slds_to_csv(&slds))?;
            println!("{} discs -> {}", slds.len(), out.display());
        }
        Command::Sample {
            scene,
            robot,
            slds,
            out,
        } => {
            require_file(&scene, "scene")?;
            require_file(&robot, "robot")?;
            let scene = Scene::load(&scene).map_err(|e| config_error(format!("scene: {e}")))?;
            let model = RobotModel::load(&robot).map_err(|e| config_error(format!("robot: {e}")))?;
            let slds = slds_from_csv(&read(&slds, "SLD")?)?;
            let limits = scene.reach.unwrap_or_else(|| ReachLimits::for_model(&model));
            let candidates = sample_candidates(&scene.region)?;
            let fbps = filter_fbps(&candidates, &model, &scene.footprint_obstacles, &slds, limits)?;
            if fbps.is_empty() {
                return Err(basepose::Error::NoFavouredPlacements.into());
            }
            std::fs::write(&out, placements_to_csv(&fbps))?;
            println!(
                "{} of {} candidates favoured -> {}",
                fbps.len(),
                candidates.len(),
                out.display()
            );
        }
        Command::Optimize { task, fbps, ga, out } => {
            let t = task.load()?;
            let fbps = placements_from_csv(&read(&fbps, "FBP")?)?;
            let config = GaConfig {
                population_size: ga.population,
                generations: ga.generations,
                genes_per_chromosome: ga.genes,
                mutation_probability: ga.mutation_probability,
                mutation_genes: ga.mutation_genes,
                tournament_size: ga.tournament,
                min_spacing: ga.min_spacing,
                seed: task.seed,
            };
            config.validate().map_err(|e| config_error(e.to_string()))?;
            let pool = GenePool::new(&fbps, config.min_spacing)?;
            let ctx = EvalContext::new(
                &t.model,
                &t.map,
                &t.slds,
                &t.scene.obstacle_cloud,
                &fbps,
                task.time(),
                task.query().params(task.seed),
            )?;
            ctx.warm_up();
            let result = run(&config, &pool, &ctx)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("stats.csv"), stats_to_csv(&result.stats))?;
            std::fs::write(
                out.join("front.csv"),
                front_to_csv(&result.front, config.genes_per_chromosome),
            )?;
            let last = result.stats.last().expect("generation 0 is always recorded");
            println!(
                "front of {} after {} generations; mean coverage {:.4}  mean time {:.2} s",
                result.front.len(),
                config.generations,
                last.mean[0],
                last.mean[1]
            );
        }
        Command::Finetune {
            task,
            solution,
            radius,
            xy_step,
            theta_step_deg,
            min_spacing,
            out,
        } => {
            let t = task.load()?;
            let placements = placements_from_csv(&read(&solution, "solution")?)?;
            let config = FineTuneConfig {
                radius,
                xy_step,
                theta_step: theta_step_deg.to_radians(),
                min_spacing,
                ..FineTuneConfig::default()
            };
            config.validate().map_err(|e| config_error(e.to_string()))?;
            let ctx = EvalContext::new(
                &t.model,
                &t.map,
                &t.slds,
                &t.scene.obstacle_cloud,
                &placements,
                task.time(),
                task.query().params(task.seed),
            )?;
            let rules = PlacementRules {
                footprint_obstacles: &t.scene.footprint_obstacles,
                limits: t.scene.reach.unwrap_or_else(|| ReachLimits::for_model(&t.model)),
            };
            let res = local_search(&placements, &config, &ctx, rules)?;
            std::fs::write(&out, placements_to_csv(&res.placements))?;
            println!(
                "coverage {:.4} -> {:.4}, time {:.2} -> {:.2} s, {} moves in {} sweeps",
                res.before.f1, res.after.f1, res.before.f2, res.after.f2, res.moves, res.sweeps
            );
        }
        Command::Select {
            front,
            policy,
            fbps,
            out,
        } => {
            let policy: SelectionPolicy = policy.parse()?;
            let rows = front_from_csv(&read(&front, "front")?)?;
            let i = select_solution(&rows, policy)?;
            let (genes, o) = &rows[i];
            println!("genes {genes:?}: f1 {} f2 {} f3 {}", o.f1, o.f2, o.f3);
            if let (Some(fbps), Some(out)) = (fbps, out) {
                let fbps = placements_from_csv(&read(&fbps, "FBP")?)?;
                let chosen = genes
                    .iter()
                    .filter(|&&g| g != 0)
                    .map(|g| {
                        fbps.iter()
                            .find(|p| p.id == *g)
                            .copied()
                            .ok_or_else(|| config_error(format!("placement {g} is not in the FBP file")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                std::fs::write(&out, placements_to_csv(&chosen))?;
            }
        }
        Command::DemoScene { out } => {
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("robot.toml"), presets::five_dof().to_toml_string())?;
            let scene = washbasin(&WashbasinParams::default());
            scene.save(&out, "washbasin")?;
            std::fs::write(out.join("scenario.toml"), SCENARIO_TEMPLATE)?;
            println!(
                "wrote robot.toml, washbasin.toml and scenario.toml to {}",
                out.display()
            );
        }
    }
    Ok(())
}

/// 2: bad configuration or input files, 3: no favoured placements, 4: map built for another
/// robot, 1: anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<basepose::Error>() {
        Some(basepose::Error::Config(_) | basepose::Error::Parse { .. }) => 2,
        Some(basepose::Error::NoFavouredPlacements) => 3,
        Some(basepose::Error::RobotMismatch { .. }) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
