//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to stderr (visible
//! without `--nocapture`) and then asserts.
//!
//! Run alone with `cargo test --release -p basepose --test acceptance`.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use basepose::finetune::{compare_objectives, local_search, FineTuneConfig, PlacementRules};
use basepose::kinematics::{forward_kinematics, jacobian, manipulability, presets, RobotModel};
use basepose::nsga2::{non_dominated_sort, run, run_with_observer, GaConfig, GenePool};
use basepose::objectives::{EvalContext, TimeParams};
use basepose::pipeline::{run_pipeline, ScenarioConfig, FRONT_FILE, STATS_FILE};
use basepose::placement::{filter_fbps, sample_candidates, BasePlacement, ReachLimits};
use basepose::reachmap::{
    build_map, voxel_index, MapMeta, QueryParams, ReachMap, ReachQuery, RecordSpec, VoxelIndex,
};
use basepose::scene::{washbasin, Scene, WashbasinParams};
use basepose::sld::{decompose_surface, Sld};
use basepose::tsp::held_karp_path;

const TSP_INSTANCES: usize = 200;
const TSP_TIME_LIMIT: Duration = Duration::from_secs(30);
const MANIP_CONFIGS: usize = 500;
const MANIP_REL_TOL: f64 = 1e-9;
const FD_STEP: f64 = 1e-6;
const FD_ABS_TOL: f64 = 1e-5;
const QUERY_CELLS: usize = 100;
const QUERY_MAX_RECORDS: usize = 200;
const SORT_POPULATIONS: usize = 100;
const SORT_MAX_SIZE: usize = 50;
const SMALL_RUNS: u64 = 100;
const SMALL_REQUIRED: usize = 95;
const SMALL_TIME_LIMIT: Duration = Duration::from_secs(120);
const TREND_SEEDS: u64 = 5;
const TREND_FINAL_COVERAGE: f64 = 0.90;
const TREND_EARLY_COVERAGE: f64 = 0.85;
const TREND_EARLY_GENERATION: usize = 15;
const TREND_TIME_LIMIT: Duration = Duration::from_secs(15 * 60);
const MONOTONE_PAIRS: usize = 100;
const PERTURBED_SOLUTIONS: usize = 50;

// demo scale: the washbasin task with the five-joint arm
const TASK_SLD_RADIUS: f64 = 0.04;
const TASK_MAP_STEPS: usize = 16;
const TASK_MAP_DELTA: f64 = 0.05;

fn report(name: &str, pass: bool, detail: impl AsRef<str>) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr().lock(),
        "acceptance {name:<26} {verdict}  {}",
        detail.as_ref()
    );
}

struct Task {
    model: &'static RobotModel,
    scene: &'static Scene,
    slds: &'static [Sld],
    fbps: &'static [BasePlacement],
    limits: ReachLimits,
    map: &'static ReachMap,
    ctx: EvalContext<'static>,
    setup: Duration,
}

// One map and one evaluation cache shared by every test that needs the full task.
fn task() -> &'static Task {
    static TASK: OnceLock<Task> = OnceLock::new();
    TASK.get_or_init(|| {
        let start = Instant::now();
        let model: &'static RobotModel = Box::leak(Box::new(presets::five_dof()));
        let scene: &'static Scene = Box::leak(Box::new(washbasin(&WashbasinParams::default())));
        let slds: &'static [Sld] = decompose_surface(&scene.task_cloud, TASK_SLD_RADIUS)
            .unwrap()
            .leak();
        let limits = scene.reach.unwrap_or_else(|| ReachLimits::for_model(model));
        let candidates = sample_candidates(&scene.region).unwrap();
        let fbps: &'static [BasePlacement] =
            filter_fbps(&candidates, model, &scene.footprint_obstacles, slds, limits)
                .unwrap()
                .leak();
        let map: &'static ReachMap = Box::leak(Box::new(
            build_map(model, TASK_MAP_STEPS, TASK_MAP_DELTA).unwrap(),
        ));
        let ctx = EvalContext::new(
            model,
            map,
            slds,
            &scene.obstacle_cloud,
            fbps,
            TimeParams::default(),
            QueryParams::default(),
        )
        .unwrap();
        ctx.warm_up();
        Task {
            model,
            scene,
            slds,
            fbps,
            limits,
            map,
            ctx,
            setup: start.elapsed(),
        }
    })
}

fn table_config(genes: usize, seed: u64) -> GaConfig {
    GaConfig {
        genes_per_chromosome: genes,
        seed,
        ..GaConfig::default()
    }
}

// ---- shortest open path against enumeration

fn permutations(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

#[test]
fn tsp_matches_enumeration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    for _ in 0..TSP_INSTANCES {
        let n = rng.gen_range(2..=8);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let w: f64 = rng.gen_range(0.0..10.0);
                d[(i, j)] = w;
                d[(j, i)] = w;
            }
        }
        let mut best = f64::INFINITY;
        permutations(&mut (0..n).collect(), 0, &mut |p| {
            let len = p.windows(2).fold(0.0, |acc, w| acc + d[(w[0], w[1])]);
            best = best.min(len);
        });
        let got = held_karp_path(&d).unwrap();
        if got.length.to_bits() != best.to_bits() || !got.exact {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < TSP_TIME_LIMIT;
    report(
        "tsp-vs-enumeration",
        pass,
        format!(
            "{mismatches}/{TSP_INSTANCES} mismatches, {:.2} s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---- manipulability and Jacobian

#[test]
fn manipulability_matches_svd_and_finite_differences() {
    let model = presets::six_dof();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_rel = 0.0f64;
    let mut worst_fd = 0.0f64;
    for _ in 0..MANIP_CONFIGS {
        let q: Vec<f64> = model
            .joint_limits()
            .iter()
            .map(|l| rng.gen_range(l.lower..=l.upper))
            .collect();
        let j = jacobian(&model, &q).unwrap();
        let singular: f64 = j.clone().svd(false, false).singular_values.iter().product();
        let w = manipulability(&model, &q).unwrap();
        worst_rel = worst_rel.max((w - singular).abs() / singular.abs().max(f64::MIN_POSITIVE));
        for c in 0..q.len() {
            let (mut plus, mut minus) = (q.clone(), q.clone());
            plus[c] += FD_STEP;
            minus[c] -= FD_STEP;
            let fd = (forward_kinematics(&model, &plus).unwrap().position
                - forward_kinematics(&model, &minus).unwrap().position)
                / (2.0 * FD_STEP);
            for r in 0..3 {
                worst_fd = worst_fd.max((fd[r] - j[(r, c)]).abs());
            }
        }
    }
    let pass = worst_rel <= MANIP_REL_TOL && worst_fd <= FD_ABS_TOL;
    report(
        "manipulability-oracle",
        pass,
        format!("{MANIP_CONFIGS} configs, worst W rel err {worst_rel:.2e}, worst FD err {worst_fd:.2e}"),
    );
    assert!(pass);
}

// ---- reachability map cells and serialization

#[test]
fn reach_map_cells_and_round_trip() {
    let model = presets::four_dof();
    let delta = 0.05;
    let map = build_map(&model, 10, delta).unwrap();
    let mut wrong = 0;
    for (key, records) in map.cells() {
        for r in records {
            let p = forward_kinematics(&model, &r.q).unwrap().position;
            if voxel_index(&p, delta) != key || p != r.position {
                wrong += 1;
            }
        }
    }
    let back = ReachMap::from_bytes(&map.to_bytes()).unwrap();
    let same = back == map && back.records().iter().zip(map.records()).all(|(a, b)| a == b);
    let pass = wrong == 0 && same && !map.is_empty();
    report(
        "reach-map-round-trip",
        pass,
        format!(
            "{} records in {} cells, {wrong} misfiled, reload identical: {same}",
            map.len(),
            map.cell_count()
        ),
    );
    assert!(pass);
}

// ---- query soundness and optimality on synthetic cells

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
}

#[test]
fn query_is_sound_and_optimal_in_its_cluster() {
    let delta = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut unsound, mut beaten, mut missed, mut answered) = (0, 0, 0, 0);
    for cell in 0..QUERY_CELLS {
        let key: VoxelIndex = [rng.gen_range(-5..5), rng.gen_range(-5..5), rng.gen_range(0..5)];
        let origin = Vector3::new(key[0] as f64, key[1] as f64, key[2] as f64) * delta;
        let inside = |rng: &mut ChaCha8Rng| {
            origin
                + Vector3::new(
                    rng.gen_range(0.0..delta),
                    rng.gen_range(0.0..delta),
                    rng.gen_range(0.0..delta),
                )
        };
        let near = |rng: &mut ChaCha8Rng| -> VoxelIndex {
            [
                key[0] + rng.gen_range(-2..=2),
                key[1] + rng.gen_range(-2..=2),
                key[2] - rng.gen_range(1..=4),
            ]
        };
        // a preferred direction keeps some records inside the cone
        let lean = random_unit(&mut rng);
        let n = rng.gen_range(1..=QUERY_MAX_RECORDS);
        let specs: Vec<RecordSpec> = (0..n)
            .map(|_| RecordSpec {
                position: inside(&mut rng),
                q: (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                approach: (lean * rng.gen_range(0.0..2.0) + random_unit(&mut rng)).normalize(),
                // coarse values so ties occur
                manipulability: (rng.gen_range(0..20) as f64) * 0.05,
                occupancy: (0..rng.gen_range(1..6)).map(|_| near(&mut rng)).collect(),
            })
            .collect();
        let meta = MapMeta {
            dof: 3,
            steps_per_joint: 1,
            delta_bits: delta.to_bits(),
            robot_hash: "synthetic".into(),
            enumerated: n as u64,
            self_colliding: 0,
        };
        let map = ReachMap::from_records(meta, specs).unwrap();
        let obstacles: HashSet<VoxelIndex> = (0..rng.gen_range(0..40)).map(|_| near(&mut rng)).collect();
        let params = QueryParams {
            seed: cell as u64,
            ..QueryParams::default()
        };
        let sld = Sld {
            id: 0,
            center: inside(&mut rng),
            normal: if rng.gen_bool(0.5) {
                -lean
            } else {
                random_unit(&mut rng)
            },
            radius: 0.04,
        };
        let query = ReachQuery::new(&map, params);
        let got = query.query(&sld, &obstacles);
        let target = params.target(&sld.normal);
        let records = map.cell(&key).unwrap();
        let admissible = |r: &basepose::reachmap::ReachRecord| {
            angle(&r.approach, &target) <= params.max_angle
                && map.occupancy(r).iter().all(|v| !obstacles.contains(v))
        };
        if let Some(s) = &got {
            answered += 1;
            if !admissible(s.record) {
                unsound += 1;
            }
        }
        // the cluster(s) whose centroid is closest to the target
        let clusters = query.clusters(&key).unwrap();
        let angles: Vec<f64> = clusters.iter().map(|c| angle(&c.centroid, &target)).collect();
        let best = clusters
            .iter()
            .zip(&angles)
            .filter(|(c, _)| !c.members.is_empty())
            .map(|(_, a)| *a)
            .fold(f64::INFINITY, f64::min);
        let selected: BTreeSet<usize> = clusters
            .iter()
            .zip(&angles)
            .filter(|(c, a)| !c.members.is_empty() && **a <= best + 1e-12)
            .flat_map(|(c, _)| c.members.iter().copied())
            .collect();
        let best_w = selected
            .iter()
            .map(|&i| &records[i])
            .filter(|r| admissible(r))
            .map(|r| r.manipulability)
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.max(w))));
        match (&got, best_w) {
            (Some(s), Some(w)) if w > s.record.manipulability => beaten += 1,
            (None, Some(_)) => missed += 1,
            (Some(_), None) => unsound += 1,
            _ => {}
        }
    }
    let pass = unsound == 0 && beaten == 0 && missed == 0;
    report(
        "query-soundness",
        pass,
        format!(
            "{QUERY_CELLS} cells, {answered} answered, {unsound} unsound, {beaten} beaten, {missed} missed"
        ),
    );
    assert!(pass);
}

// ---- non-dominated sorting against repeated peeling

fn peel(points: &[[f64; 3]]) -> Vec<BTreeSet<usize>> {
    let dominated_by = |a: &[f64; 3], b: &[f64; 3]| {
        b.iter().zip(a).all(|(x, y)| x <= y) && b.iter().zip(a).any(|(x, y)| x < y)
    };
    let mut left: BTreeSet<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: BTreeSet<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dominated_by(&points[i], &points[j])))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

#[test]
fn sorting_matches_peeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut mismatches = 0;
    for _ in 0..SORT_POPULATIONS {
        let n = rng.gen_range(1..=SORT_MAX_SIZE);
        let levels = rng.gen_range(2..8);
        let points: Vec<[f64; 3]> = (0..n)
            .map(|_| [0; 3].map(|_: i32| rng.gen_range(0..levels) as f64))
            .collect();
        let got: Vec<BTreeSet<usize>> = non_dominated_sort(&points)
            .into_iter()
            .map(|f| f.into_iter().collect())
            .collect();
        if got != peel(&points) {
            mismatches += 1;
        }
    }
    let pass = mismatches == 0;
    report(
        "sort-vs-peeling",
        pass,
        format!("{mismatches}/{SORT_POPULATIONS} populations differ"),
    );
    assert!(pass);
}

// ---- chromosome invariants every generation

#[test]
fn chromosome_invariants_hold_every_generation() {
    let t = task();
    let config = table_config(3, 0);
    let pool = GenePool::new(t.fbps, config.min_spacing).unwrap();
    let by_id = |id: u32| t.fbps.iter().find(|p| p.id == id);
    let (mut checked, mut broken, mut generations) = (0usize, 0usize, 0usize);
    run_with_observer(&config, &pool, &t.ctx, |_, population| {
        generations += 1;
        for ind in population {
            checked += 1;
            let placed: Vec<u32> = ind.genes.iter().copied().filter(|&g| g != 0).collect();
            let distinct = placed.iter().collect::<HashSet<_>>().len() == placed.len();
            let members: Option<Vec<&BasePlacement>> = placed.iter().map(|&g| by_id(g)).collect();
            let spaced = members.as_ref().is_some_and(|m| {
                m.iter().enumerate().all(|(i, a)| {
                    m[i + 1..]
                        .iter()
                        .all(|b| (a.x - b.x).hypot(a.y - b.y) >= config.min_spacing)
                })
            });
            if !distinct || members.is_none() || !spaced || placed.is_empty() {
                broken += 1;
            }
        }
    })
    .unwrap();
    let pass = broken == 0 && generations == config.generations + 1;
    report(
        "chromosome-invariants",
        pass,
        format!("{generations} generations, {checked} individuals, {broken} violations"),
    );
    assert!(pass);
}

// ---- small instance against exhaustive search

#[test]
fn small_instance_front_matches_exhaustive() {
    let t = task();
    let start = Instant::now();
    // the six placements with the best individual coverage
    let mut ranked: Vec<(f64, BasePlacement)> = t
        .fbps
        .iter()
        .map(|p| (t.ctx.evaluate_genes(&[p.id]).unwrap().objectives.f1, *p))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.id.cmp(&b.1.id)));
    let six: Vec<BasePlacement> = ranked.iter().take(6).map(|(_, p)| *p).collect();
    let ctx = EvalContext::new(
        t.model,
        t.map,
        t.slds,
        &t.scene.obstacle_cloud,
        &six,
        TimeParams::default(),
        QueryParams::default(),
    )
    .unwrap();
    let base = table_config(2, 0);

    let mut valid: Vec<Vec<u32>> = six.iter().map(|p| vec![p.id]).collect();
    for (i, a) in six.iter().enumerate() {
        for b in &six[i + 1..] {
            if a.planar_distance(b) >= base.min_spacing {
                let mut s = vec![a.id, b.id];
                s.sort_unstable();
                valid.push(s);
            }
        }
    }
    let scored: Vec<[f64; 3]> = valid
        .iter()
        .map(|s| ctx.evaluate_genes(s).unwrap().objectives.minimized())
        .collect();
    let pareto: BTreeSet<Vec<u32>> = non_dominated_sort(&scored)[0]
        .iter()
        .map(|&i| valid[i].clone())
        .collect();

    let pool = GenePool::new(&six, base.min_spacing).unwrap();
    let mut matched = 0;
    for seed in 0..SMALL_RUNS {
        let res = run(&GaConfig { seed, ..base }, &pool, &ctx).unwrap();
        let front: BTreeSet<Vec<u32>> = res.front.iter().map(|p| p.placement_set()).collect();
        if front == pareto {
            matched += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = matched >= SMALL_REQUIRED && elapsed < SMALL_TIME_LIMIT;
    report(
        "small-instance-optimality",
        pass,
        format!(
            "{} valid sets, {} Pareto-optimal, {matched}/{SMALL_RUNS} runs exact, {:.1} s",
            valid.len(),
            pareto.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---- directional trends on the washbasin task

#[test]
fn washbasin_trends() {
    let t = task();
    let start = Instant::now();
    let genes = [2usize, 3, 4];
    let mut final_f1 = [0.0; 3];
    let mut final_f2 = [0.0; 3];
    let mut early_f1 = [0.0; 3];
    for (g, &n) in genes.iter().enumerate() {
        for seed in 0..TREND_SEEDS {
            let config = table_config(n, seed);
            let pool = GenePool::new(t.fbps, config.min_spacing).unwrap();
            let res = run(&config, &pool, &t.ctx).unwrap();
            let last = res.stats.last().unwrap();
            final_f1[g] += last.mean[0] / TREND_SEEDS as f64;
            final_f2[g] += last.mean[1] / TREND_SEEDS as f64;
            early_f1[g] += res.stats[TREND_EARLY_GENERATION].mean[0] / TREND_SEEDS as f64;
        }
    }
    let elapsed = start.elapsed() + t.setup;
    let a = final_f1[1] >= TREND_FINAL_COVERAGE;
    let b = final_f1[0] <= final_f1[1] && final_f1[1] <= final_f1[2];
    let c = final_f2[0] < final_f2[1] && final_f2[1] < final_f2[2];
    let d = early_f1[1] >= TREND_EARLY_COVERAGE;
    let fast = elapsed < TREND_TIME_LIMIT;
    let flag = |ok: bool| if ok { "ok" } else { "no" };
    let pass = a && b && c && d && fast;
    report(
        "washbasin-trends",
        pass,
        format!(
            "{} slds, {} fbps; final f1 {:.3}/{:.3}/{:.3} (genes 2/3/4), final f2 {:.1}/{:.1}/{:.1} s, \
             gen {TREND_EARLY_GENERATION} f1 {:.3}/{:.3}/{:.3}; f1>={TREND_FINAL_COVERAGE} {}, f1 nondecreasing {}, \
             f2 increasing {}, early f1>={TREND_EARLY_COVERAGE} {}; {:.0} s",
            t.slds.len(),
            t.fbps.len(),
            final_f1[0],
            final_f1[1],
            final_f1[2],
            final_f2[0],
            final_f2[1],
            final_f2[2],
            early_f1[0],
            early_f1[1],
            early_f1[2],
            flag(a),
            flag(b),
            flag(c),
            flag(d),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass, "washbasin trends not reproduced");
}

// ---- coverage never drops when a placement is added

#[test]
fn coverage_is_monotone_in_placements() {
    let t = task();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut drops = 0;
    for _ in 0..MONOTONE_PAIRS {
        let size = rng.gen_range(1..=4);
        let mut picked: Vec<BasePlacement> = t.fbps.choose_multiple(&mut rng, size + 1).copied().collect();
        let extra = picked.pop().unwrap();
        let before = t.ctx.evaluate_placements(&picked).unwrap().objectives.f1;
        picked.push(extra);
        let after = t.ctx.evaluate_placements(&picked).unwrap().objectives.f1;
        if after < before {
            drops += 1;
        }
    }
    let pass = drops == 0;
    report(
        "coverage-monotone",
        pass,
        format!("{drops}/{MONOTONE_PAIRS} pairs lose coverage"),
    );
    assert!(pass);
}

// ---- fine-tuning never makes a solution worse

#[test]
fn finetune_never_regresses() {
    let t = task();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let config = FineTuneConfig {
        radius: 0.05,
        xy_step: 0.025,
        max_sweeps: 3,
        ..FineTuneConfig::default()
    };
    let rules = PlacementRules {
        footprint_obstacles: &t.scene.footprint_obstacles,
        limits: t.limits,
    };
    let (mut regressions, mut improved) = (0, 0);
    for _ in 0..PERTURBED_SOLUTIONS {
        let size = rng.gen_range(1..=3);
        let start: Vec<BasePlacement> = t
            .fbps
            .choose_multiple(&mut rng, size)
            .map(|p| {
                BasePlacement::new(
                    p.id,
                    p.x + rng.gen_range(-0.05..0.05),
                    p.y + rng.gen_range(-0.05..0.05),
                    p.theta + rng.gen_range(-0.2..0.2),
                )
            })
            .collect();
        let res = local_search(&start, &config, &t.ctx, rules).unwrap();
        let input = t.ctx.evaluate_placements(&start).unwrap().objectives;
        let output = t.ctx.evaluate_placements(&res.placements).unwrap().objectives;
        if compare_objectives(&output, &input).is_lt() || output != res.after {
            regressions += 1;
        }
        if compare_objectives(&output, &input).is_gt() {
            improved += 1;
        }
    }
    let pass = regressions == 0;
    report(
        "finetune-no-regression",
        pass,
        format!("{PERTURBED_SOLUTIONS} solutions, {improved} improved, {regressions} regressed"),
    );
    assert!(pass);
}

// ---- identical runs give identical artifacts

fn small_scenario(dir: &std::path::Path) -> ScenarioConfig {
    std::fs::write(dir.join("robot.toml"), presets::five_dof().to_toml_string()).unwrap();
    washbasin(&WashbasinParams::default())
        .save(dir, "washbasin")
        .unwrap();
    let text = r#"
robot = "robot.toml"
scene = "washbasin.toml"
output = "out"
seed = 9

[map]
delta = 0.05
steps_per_joint = 8

[ga]
population_size = 16
generations = 10
tournament_size = 4

[finetune]
radius = 0.05
xy_step = 0.05
max_sweeps = 1
"#;
    ScenarioConfig::from_toml_str(text, dir).unwrap()
}

#[test]
fn pipeline_runs_are_byte_identical() {
    let (one, two) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let reports: Vec<_> = [one.path(), two.path()]
        .iter()
        .map(|d| run_pipeline(&small_scenario(d)).unwrap())
        .collect();
    let read = |r: &basepose::pipeline::PipelineReport, f: &str| std::fs::read(r.output.join(f)).unwrap();
    let stats = read(&reports[0], STATS_FILE) == read(&reports[1], STATS_FILE);
    let front = read(&reports[0], FRONT_FILE) == read(&reports[1], FRONT_FILE);
    let fresh = reports.iter().all(|r| r.map_built);
    let pass = stats && front && fresh && reports[0].manifest == reports[1].manifest;
    report(
        "pipeline-determinism",
        pass,
        format!("stats identical {stats}, front identical {front}, maps rebuilt {fresh}"),
    );
    assert!(pass);
}
