//! NSGA-II over fixed-length chromosomes of favoured-placement ids, where gene 0 means "no
//! placement".

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{EvalContext, ObjectiveVector};
use crate::placement::BasePlacement;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub genes_per_chromosome: usize,
    /// Chance that an offspring is mutated at all.
    pub mutation_probability: f64,
    /// Genes replaced when an offspring mutates.
    pub mutation_genes: usize,
    pub tournament_size: usize,
    /// Smallest planar distance allowed between two placements of one chromosome, m.
    pub min_spacing: f64,
    /// Not read from config files; scenarios supply one seed for the whole run.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            generations: 80,
            genes_per_chromosome: 3,
            mutation_probability: 0.6,
            mutation_genes: 1,
            tournament_size: 20,
            min_spacing: 0.2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            return bad("population size must be even and at least 2");
        }
        if self.generations == 0 {
            return bad("generations must be at least 1");
        }
        if self.genes_per_chromosome == 0 {
            return bad("chromosomes need at least one gene");
        }
        if !(0.0..=1.0).contains(&self.mutation_probability) {
            return bad("mutation probability must lie in [0, 1]");
        }
        if self.mutation_genes > self.genes_per_chromosome {
            return bad("mutation genes exceed chromosome length");
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return bad("tournament size must lie in 1..=population size");
        }
        if !(self.min_spacing >= 0.0) {
            return bad("min spacing must be non-negative");
        }
        Ok(())
    }
}

/// Scores chromosomes. Implementations must be pure: equal genes give equal objectives.
pub trait Evaluator: Sync {
    fn evaluate(&self, genes: &[u32]) -> Result<ObjectiveVector>;
}

impl Evaluator for EvalContext<'_> {
    fn evaluate(&self, genes: &[u32]) -> Result<ObjectiveVector> {
        Ok(self.evaluate_genes(genes)?.objectives)
    }
}

impl<F> Evaluator for F
where
    F: Fn(&[u32]) -> ObjectiveVector + Sync,
{
    fn evaluate(&self, genes: &[u32]) -> Result<ObjectiveVector> {
        Ok(self(genes))
    }
}

/// The favoured placements genes may refer to, with the spacing rule between them.
#[derive(Debug, Clone)]
pub struct GenePool {
    ids: Vec<u32>,
    positions: HashMap<u32, (f64, f64)>,
    min_spacing: f64,
}

impl GenePool {
    pub fn new(fbps: &[BasePlacement], min_spacing: f64) -> Result<Self> {
        if fbps.is_empty() {
            return Err(Error::NoFavouredPlacements);
        }
        let mut ids = Vec::with_capacity(fbps.len());
        let mut positions = HashMap::with_capacity(fbps.len());
        for p in fbps {
            if p.id == 0 {
                return Err(Error::InvalidInput(
                    "placement id 0 is reserved for empty genes".into(),
                ));
            }
            if positions.insert(p.id, (p.x, p.y)).is_some() {
                return Err(Error::InvalidInput(format!("duplicate placement id {}", p.id)));
            }
            ids.push(p.id);
        }
        ids.sort_unstable();
        Ok(Self {
            ids,
            positions,
            min_spacing,
        })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn min_spacing(&self) -> f64 {
        self.min_spacing
    }

    pub fn contains(&self, id: u32) -> bool {
        self.positions.contains_key(&id)
    }

    fn spaced(&self, a: u32, b: u32) -> bool {
        let (pa, pb) = (self.positions[&a], self.positions[&b]);
        (pa.0 - pb.0).hypot(pa.1 - pb.1) >= self.min_spacing
    }

    /// Whether gene `i` is a known id that neither repeats nor crowds an earlier nonzero gene.
    fn gene_fits(&self, genes: &[u32], i: usize) -> bool {
        let g = genes[i];
        g == 0
            || (self.contains(g)
                && genes[..i]
                    .iter()
                    .all(|&h| h == 0 || (h != g && self.spaced(g, h))))
    }

    /// Chromosome invariants: known ids, no repeated nonzero gene, spacing, at least one placement.
    pub fn is_valid(&self, genes: &[u32]) -> bool {
        genes.iter().any(|&g| g != 0) && (0..genes.len()).all(|i| self.gene_fits(genes, i))
    }

    fn sample_id(&self, rng: &mut impl Rng) -> u32 {
        self.ids[rng.gen_range(0..self.ids.len())]
    }

    /// Uniform over `{0} ∪ ids`.
    fn sample_gene(&self, rng: &mut impl Rng) -> u32 {
        let i = rng.gen_range(0..=self.ids.len());
        if i == 0 {
            0
        } else {
            self.ids[i - 1]
        }
    }
}

pub const REPAIR_ATTEMPTS: usize = 100;
pub const INIT_ATTEMPTS: usize = 1000;

/// Scans left to right; a gene that is unknown, repeats an earlier gene or sits closer than the
/// spacing to one is redrawn from the pool up to [`REPAIR_ATTEMPTS`] times, then cleared. An
/// all-empty result gets its first gene drawn from the pool.
pub fn repair(genes: &mut [u32], pool: &GenePool, rng: &mut impl Rng) {
    for i in 0..genes.len() {
        let mut attempts = 0;
        while !pool.gene_fits(genes, i) {
            if attempts == REPAIR_ATTEMPTS {
                genes[i] = 0;
                break;
            }
            genes[i] = pool.sample_id(rng);
            attempts += 1;
        }
    }
    if genes.iter().all(|&g| g == 0) {
        genes[0] = pool.sample_id(rng);
    }
}

/// `a[..cut]` followed by `b[cut..]`.
pub fn crossover(a: &[u32], b: &[u32], cut: usize) -> Vec<u32> {
    a[..cut].iter().chain(&b[cut..]).copied().collect()
}

/// Replaces `count` distinct random positions with draws from `{0} ∪ ids`.
pub fn mutate(genes: &mut [u32], count: usize, pool: &GenePool, rng: &mut impl Rng) {
    for i in sample(rng, genes.len(), count.min(genes.len())) {
        genes[i] = pool.sample_gene(rng);
    }
}

pub fn random_chromosome(config: &GaConfig, pool: &GenePool, rng: &mut impl Rng) -> Vec<u32> {
    let mut genes = vec![0; config.genes_per_chromosome];
    for _ in 0..INIT_ATTEMPTS {
        genes.iter_mut().for_each(|g| *g = pool.sample_id(rng));
        if pool.is_valid(&genes) {
            return genes;
        }
    }
    repair(&mut genes, pool, rng);
    genes
}

/// `a` dominates `b` under minimization.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strict |= x < y;
    }
    strict
}

impl ObjectiveVector {
    pub fn dominates(&self, other: &ObjectiveVector) -> bool {
        dominates(&self.minimized(), &other.minimized())
    }
}

/// Fast non-dominated sort. Fronts hold indices in ascending order.
pub fn non_dominated_sort<T: AsRef<[f64]>>(points: &[T]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates(a, b) {
                dominated_by[i].push(j);
                count[j] += 1;
            } else if dominates(b, a) {
                dominated_by[j].push(i);
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of `front`, in the same order.
pub fn crowding_distance<T: AsRef<[f64]>>(points: &[T], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let dims = points[front[0]].as_ref().len();
    let mut distance = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for d in 0..dims {
        let value = |k: usize| points[front[k]].as_ref()[d];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let (lo, hi) = (value(order[0]), value(order[n - 1]));
        let range = hi - lo;
        if !(range > 0.0) {
            continue;
        }
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        for w in order.windows(3) {
            distance[w[1]] += (value(w[2]) - value(w[0])) / range;
        }
    }
    distance
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genes: Vec<u32>,
    pub objectives: ObjectiveVector,
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    /// Sorted nonzero genes: the placement set this chromosome encodes.
    pub fn placement_set(&self) -> Vec<u32> {
        placement_set(&self.genes)
    }
}

pub fn placement_set(genes: &[u32]) -> Vec<u32> {
    let mut set: Vec<u32> = genes.iter().copied().filter(|&g| g != 0).collect();
    set.sort_unstable();
    set
}

/// Tournament among `size` distinct random members: lowest rank, then largest crowding, then
/// lowest index wins.
pub fn tournament(pop: &[Individual], size: usize, rng: &mut impl Rng) -> usize {
    sample(rng, pop.len(), size.clamp(1, pop.len()))
        .into_iter()
        .min_by(|&a, &b| {
            pop[a]
                .rank
                .cmp(&pop[b].rank)
                .then(pop[b].crowding.total_cmp(&pop[a].crowding))
                .then(a.cmp(&b))
        })
        .expect("nonempty tournament")
}

/// One child per population slot: two tournaments, single-point crossover, mutation, repair.
pub fn make_offspring(
    parents: &[Individual],
    config: &GaConfig,
    pool: &GenePool,
    rng: &mut impl Rng,
) -> Vec<Vec<u32>> {
    let genes = config.genes_per_chromosome;
    (0..config.population_size)
        .map(|_| {
            let a = tournament(parents, config.tournament_size, rng);
            let b = tournament(parents, config.tournament_size, rng);
            let mut child = if genes > 1 {
                crossover(&parents[a].genes, &parents[b].genes, rng.gen_range(1..genes))
            } else {
                parents[a].genes.clone()
            };
            if rng.gen_bool(config.mutation_probability) {
                mutate(&mut child, config.mutation_genes, pool, rng);
            }
            repair(&mut child, pool, rng);
            child
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean: [f64; 3],
    /// Population variance (divided by N).
    pub variance: [f64; 3],
}

impl GenerationStats {
    pub fn of(generation: usize, pop: &[Individual]) -> Self {
        let n = pop.len() as f64;
        let values = |i: usize| {
            pop.iter().map(move |p| {
                let o = p.objectives;
                [o.f1, o.f2, o.f3][i]
            })
        };
        let mut mean = [0.0; 3];
        let mut variance = [0.0; 3];
        for i in 0..3 {
            mean[i] = values(i).sum::<f64>() / n;
            variance[i] = values(i).map(|v| (v - mean[i]).powi(2)).sum::<f64>() / n;
        }
        Self {
            generation,
            mean,
            variance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaResult {
    /// First front of the final population, one member per distinct placement set, ordered by
    /// placement set.
    pub front: Vec<Individual>,
    /// Generation 0 (initial population) through `generations`.
    pub stats: Vec<GenerationStats>,
    pub population: Vec<Individual>,
}

fn evaluate_all(evaluator: &dyn Evaluator, chromosomes: Vec<Vec<u32>>) -> Result<Vec<Individual>> {
    chromosomes
        .into_par_iter()
        .map(|genes| {
            let objectives = evaluator.evaluate(&genes)?;
            Ok(Individual {
                genes,
                objectives,
                rank: 0,
                crowding: 0.0,
            })
        })
        .collect()
}

/// Sorts `pop` into fronts and writes rank and crowding onto every member. Returns the fronts.
fn rank_population(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let points: Vec<[f64; 3]> = pop.iter().map(|p| p.objectives.minimized()).collect();
    let fronts = non_dominated_sort(&points);
    for (rank, front) in fronts.iter().enumerate() {
        for (&i, c) in front.iter().zip(crowding_distance(&points, front)) {
            pop[i].rank = rank;
            pop[i].crowding = c;
        }
    }
    fronts
}

/// Environmental selection: whole fronts while they fit, then the most crowded-apart members
/// of the splitting front.
fn select_survivors(merged: Vec<Individual>, n: usize) -> Vec<Individual> {
    let mut merged = merged;
    let fronts = rank_population(&mut merged);
    let mut chosen = Vec::with_capacity(n);
    for front in fronts {
        if chosen.len() + front.len() <= n {
            chosen.extend(front);
        } else {
            let mut rest = front;
            rest.sort_by(|&a, &b| merged[b].crowding.total_cmp(&merged[a].crowding).then(a.cmp(&b)));
            chosen.extend(rest.into_iter().take(n - chosen.len()));
        }
        if chosen.len() == n {
            break;
        }
    }
    let mut slots: Vec<Option<Individual>> = merged.into_iter().map(Some).collect();
    chosen.into_iter().map(|i| slots[i].take().unwrap()).collect()
}

/// Runs the search. `observer` sees every generation's population, starting with generation 0.
pub fn run_with_observer(
    config: &GaConfig,
    pool: &GenePool,
    evaluator: &dyn Evaluator,
    mut observer: impl FnMut(usize, &[Individual]),
) -> Result<GaResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = (0..config.population_size)
        .map(|_| random_chromosome(config, pool, &mut rng))
        .collect();
    let mut population = evaluate_all(evaluator, initial)?;
    rank_population(&mut population);
    observer(0, &population);
    let mut stats = vec![GenerationStats::of(0, &population)];

    for generation in 1..=config.generations {
        let children = make_offspring(&population, config, pool, &mut rng);
        let mut merged = population;
        merged.extend(evaluate_all(evaluator, children)?);
        population = select_survivors(merged, config.population_size);
        observer(generation, &population);
        stats.push(GenerationStats::of(generation, &population));
    }

    let mut front: Vec<Individual> = population.iter().filter(|p| p.rank == 0).cloned().collect();
    front.sort_by_key(|p| p.placement_set());
    front.dedup_by_key(|p| p.placement_set());
    Ok(GaResult {
        front,
        stats,
        population,
    })
}

pub fn run(config: &GaConfig, pool: &GenePool, evaluator: &dyn Evaluator) -> Result<GaResult> {
    run_with_observer(config, pool, evaluator, |_, _| {})
}

pub const STATS_CSV_HEADER: &str = "generation,mean_f1,var_f1,mean_f2,var_f2,mean_f3,var_f3";

pub fn stats_to_csv(stats: &[GenerationStats]) -> String {
    let mut out = format!("{STATS_CSV_HEADER}\n");
    for s in stats {
        write!(out, "{}", s.generation).unwrap();
        for i in 0..3 {
            write!(out, ",{},{}", s.mean[i], s.variance[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Header `gene_1,…,gene_k,f1,f2,f3`, one row per front member.
pub fn front_to_csv(front: &[Individual], genes: usize) -> String {
    let mut out = String::new();
    for i in 1..=genes {
        write!(out, "gene_{i},").unwrap();
    }
    out.push_str("f1,f2,f3\n");
    for p in front {
        for g in &p.genes {
            write!(out, "{g},").unwrap();
        }
        let o = p.objectives;
        writeln!(out, "{},{},{}", o.f1, o.f2, o.f3).unwrap();
    }
    out
}

/// Inverse of [`front_to_csv`]: genes and objectives per row.
pub fn front_from_csv(text: &str) -> Result<Vec<(Vec<u32>, ObjectiveVector)>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let n = header.len();
    if n < 4 || &header[n - 3] != "f1" || &header[n - 2] != "f2" || &header[n - 1] != "f3" {
        return Err(Error::parse("front csv", "header must end with f1,f2,f3"));
    }
    reader
        .records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec?;
            let bad = |e: String| Error::parse("front csv", format!("row {}: {e}", row + 1));
            let genes = (0..n - 3)
                .map(|i| rec[i].trim().parse::<u32>().map_err(|e| bad(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let f = |i: usize| rec[i].trim().parse::<f64>().map_err(|e| bad(e.to_string()));
            Ok((
                genes,
                ObjectiveVector {
                    f1: f(n - 3)?,
                    f2: f(n - 2)?,
                    f3: f(n - 1)?,
                },
            ))
        })
        .collect()
}
