//! The evolutionary loop: ramped half-and-half initialisation, tournament
//! selection, subtree crossover (single-tree and the RIC/SIC/AIC multi-tree
//! strategies), subtree mutation, and elitist generational replacement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{cluster, Partition};
use crate::data::{Dataset, NeighborIndex};
use crate::error::{Error, Result};
use crate::expr::{random_node, random_tree, ExprTree, GrowMethod, Individual};
use crate::fitness::evaluate_fitness;

/// How tree pairs are chosen for crossover in a multi-tree individual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossoverKind {
    /// Classic subtree crossover; requires single-tree individuals.
    Single,
    /// Random-index: an independent uniform tree index in each parent.
    Ric,
    /// Same-index: one shared uniform index.
    Sic,
    /// All-index: subtree crossover at every index simultaneously.
    Aic,
}

#[derive(Debug, Clone)]
pub struct GpConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism_count: usize,
    pub tournament_size: usize,
    pub tree_count: usize,
    pub depth_min: usize,
    pub depth_max: usize,
    pub crossover_kind: CrossoverKind,
    pub seed: u64,
}

impl GpConfig {
    /// Standard settings for the single-tree variant.
    pub fn single_tree(seed: u64) -> GpConfig {
        GpConfig {
            population_size: 1024,
            generations: 100,
            crossover_rate: 0.8,
            mutation_rate: 0.2,
            elitism_count: 10,
            tournament_size: 7,
            tree_count: 1,
            depth_min: 2,
            depth_max: 7,
            crossover_kind: CrossoverKind::Single,
            seed,
        }
    }

    /// Standard settings for the multi-tree variant (t = 7, shallower trees).
    pub fn multi_tree(seed: u64, kind: CrossoverKind) -> GpConfig {
        GpConfig {
            tree_count: 7,
            depth_max: 5,
            crossover_kind: kind,
            ..GpConfig::single_tree(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::Config("population_size must be positive".into()));
        }
        if self.crossover_rate + self.mutation_rate > 1.0 + 1e-12 {
            return Err(Error::Config("crossover + mutation rates exceed 1".into()));
        }
        if self.elitism_count > self.population_size {
            return Err(Error::Config("elitism_count exceeds population size".into()));
        }
        if self.depth_min < 2 || self.depth_max < self.depth_min {
            return Err(Error::Config("need depth_max >= depth_min >= 2".into()));
        }
        if self.tree_count == 0 {
            return Err(Error::Config("tree_count must be at least 1".into()));
        }
        if self.crossover_kind == CrossoverKind::Single && self.tree_count > 1 {
            return Err(Error::Config(
                "single-tree crossover requires tree_count = 1".into(),
            ));
        }
        if self.tournament_size == 0 {
            return Err(Error::Config("tournament_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenRecord {
    pub gen: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    #[serde(skip)]
    pub best: Option<Individual>,
}

#[derive(Debug, Clone, Default)]
pub struct EvolutionLog {
    pub records: Vec<GenRecord>,
}

impl EvolutionLog {
    /// JSON-lines form: one `{gen, best_fitness, mean_fitness}` per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).unwrap());
            out.push('\n');
        }
        out
    }
}

/// RNG stream for (seed, generation, slot); splitmix64-style mixing.
fn stream_rng(seed: u64, generation: u64, slot: u64) -> ChaCha8Rng {
    let mut x = seed
        .wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add(generation.wrapping_mul(0xBF58476D1CE4E5B9))
        .wrapping_add(slot.wrapping_mul(0x94D049BB133111EB));
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58476D1CE4E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D049BB133111EB);
    x ^= x >> 31;
    ChaCha8Rng::seed_from_u64(x)
}

/// Ramped half-and-half: per tree, a uniform target depth over the ramp and a
/// fifty-fifty grow/full split.
pub fn init_population(cfg: &GpConfig, m: usize, rng: &mut impl Rng) -> Vec<Individual> {
    (0..cfg.population_size)
        .map(|_| {
            let trees = (0..cfg.tree_count)
                .map(|_| {
                    let depth = rng.random_range(cfg.depth_min..=cfg.depth_max);
                    if rng.random::<bool>() {
                        random_tree(rng, m, (depth, depth), GrowMethod::Full)
                    } else {
                        random_tree(rng, m, (cfg.depth_min, depth), GrowMethod::Grow)
                    }
                })
                .collect();
            Individual::new(trees)
        })
        .collect()
}

/// Samples `k` individuals uniformly with replacement and returns the index
/// of the best fitness; ties go to the smaller population index.
pub fn tournament_select(fitnesses: &[f64], k: usize, rng: &mut impl Rng) -> usize {
    debug_assert!(!fitnesses.is_empty() && k > 0);
    let mut best = rng.random_range(0..fitnesses.len());
    for _ in 1..k {
        let c = rng.random_range(0..fitnesses.len());
        if fitnesses[c] > fitnesses[best] || (fitnesses[c] == fitnesses[best] && c < best) {
            best = c;
        }
    }
    best
}

const DEPTH_RETRIES: usize = 10;

fn depth_ok(tree: &ExprTree, cfg: &GpConfig) -> bool {
    let d = tree.depth();
    d >= cfg.depth_min && d <= cfg.depth_max
}

/// Swaps uniformly chosen subtrees between two trees. Offspring violating the
/// depth bounds are retried up to 10 times, then the pair is copied unchanged.
fn crossover_tree_pair(a: &mut ExprTree, b: &mut ExprTree, cfg: &GpConfig, rng: &mut impl Rng) {
    for _ in 0..DEPTH_RETRIES {
        let ia = rng.random_range(0..a.node_count());
        let ib = rng.random_range(0..b.node_count());
        let sub_a = a.subtree(ia).unwrap().clone();
        let sub_b = b.subtree(ib).unwrap().clone();
        let mut na = a.clone();
        let mut nb = b.clone();
        na.replace_subtree(ia, sub_b);
        nb.replace_subtree(ib, sub_a);
        if depth_ok(&na, cfg) && depth_ok(&nb, cfg) {
            *a = na;
            *b = nb;
            return;
        }
    }
}

/// Subtree crossover between two individuals using the configured strategy.
pub fn crossover(
    p1: &Individual,
    p2: &Individual,
    cfg: &GpConfig,
    rng: &mut impl Rng,
) -> Result<(Individual, Individual)> {
    if p1.tree_count() != p2.tree_count() {
        return Err(Error::Config(format!(
            "tree count mismatch: {} vs {}",
            p1.tree_count(),
            p2.tree_count()
        )));
    }
    let t = p1.tree_count();
    if cfg.crossover_kind == CrossoverKind::Single && t != 1 {
        return Err(Error::Config(
            "single-tree crossover requires tree_count = 1".into(),
        ));
    }
    let mut c1 = Individual::new(p1.trees.clone());
    let mut c2 = Individual::new(p2.trees.clone());
    match cfg.crossover_kind {
        CrossoverKind::Single => {
            crossover_tree_pair(&mut c1.trees[0], &mut c2.trees[0], cfg, rng);
        }
        CrossoverKind::Ric => {
            let i1 = rng.random_range(0..t);
            let i2 = rng.random_range(0..t);
            let (mut a, mut b) = (c1.trees[i1].clone(), c2.trees[i2].clone());
            crossover_tree_pair(&mut a, &mut b, cfg, rng);
            c1.trees[i1] = a;
            c2.trees[i2] = b;
        }
        CrossoverKind::Sic => {
            let i = rng.random_range(0..t);
            let (mut a, mut b) = (c1.trees[i].clone(), c2.trees[i].clone());
            crossover_tree_pair(&mut a, &mut b, cfg, rng);
            c1.trees[i] = a;
            c2.trees[i] = b;
        }
        CrossoverKind::Aic => {
            for i in 0..t {
                let (mut a, mut b) = (c1.trees[i].clone(), c2.trees[i].clone());
                crossover_tree_pair(&mut a, &mut b, cfg, rng);
                c1.trees[i] = a;
                c2.trees[i] = b;
            }
        }
    }
    Ok((c1, c2))
}

/// Replaces a uniformly chosen subtree of one uniformly chosen tree with a
/// freshly grown subtree that keeps the tree within the depth bounds.
pub fn mutate(p: &Individual, cfg: &GpConfig, rng: &mut impl Rng, m: usize) -> Individual {
    let mut child = Individual::new(p.trees.clone());
    let ti = rng.random_range(0..child.tree_count());
    let tree = &mut child.trees[ti];
    let node = rng.random_range(0..tree.node_count());
    let at_depth = tree.node_depth(node).unwrap();
    let budget = cfg.depth_max - at_depth + 1;
    let need = cfg.depth_min.saturating_sub(at_depth - 1).max(1);
    let target = if need < budget {
        rng.random_range(need..=budget)
    } else {
        need
    };
    let replacement = random_node(rng, m, 1, need.min(target), target, GrowMethod::Grow);
    tree.replace_subtree(node, replacement);
    debug_assert!(depth_ok(tree, cfg));
    child
}

/// Evaluates one individual: cluster, then score the partition.
pub fn evaluate_individual(ind: &Individual, ds: &Dataset, idx: &NeighborIndex) -> (Partition, f64) {
    let part = cluster(ind, ds, idx);
    let breakdown = evaluate_fitness(&part, ds, idx);
    (part, breakdown.fitness)
}

/// Runs the full generational loop and returns the highest-fitness individual
/// ever seen together with the per-generation log.
pub fn evolve(ds: &Dataset, cfg: &GpConfig) -> Result<(Individual, EvolutionLog)> {
    cfg.validate()?;
    if ds.n() < 2 {
        return Err(Error::Config("need at least 2 instances".into()));
    }
    let idx = NeighborIndex::build(ds);
    let m = ds.m();

    let mut init_rng = stream_rng(cfg.seed, 0, u64::MAX);
    let mut population = init_population(cfg, m, &mut init_rng);
    let mut log = EvolutionLog::default();
    let mut best_ever: Option<Individual> = None;
    let mut best_ever_fitness = f64::NEG_INFINITY;

    for gen in 0..=cfg.generations {
        let fitnesses: Vec<f64> = population
            .par_iter()
            .map(|ind| evaluate_individual(ind, ds, &idx).1)
            .collect();
        for (ind, &f) in population.iter_mut().zip(&fitnesses) {
            ind.cached_fitness = Some(f);
        }
        let gen_best = (0..population.len())
            .max_by(|&a, &b| {
                fitnesses[a]
                    .partial_cmp(&fitnesses[b])
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .unwrap();
        if fitnesses[gen_best] > best_ever_fitness {
            best_ever_fitness = fitnesses[gen_best];
            best_ever = Some(population[gen_best].clone());
        }
        log.records.push(GenRecord {
            gen,
            best_fitness: fitnesses[gen_best],
            mean_fitness: fitnesses.iter().sum::<f64>() / fitnesses.len() as f64,
            best: Some(population[gen_best].clone()),
        });
        if gen == cfg.generations {
            break;
        }

        // Elites: top individuals by (fitness desc, index asc).
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| {
            fitnesses[b]
                .partial_cmp(&fitnesses[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut next: Vec<Individual> = order[..cfg.elitism_count]
            .iter()
            .map(|&i| population[i].clone())
            .collect();

        let mut slot = 0u64;
        while next.len() < cfg.population_size {
            let mut rng = stream_rng(cfg.seed, gen as u64 + 1, slot);
            slot += 1;
            let r = rng.random::<f64>();
            if r < cfg.crossover_rate {
                let a = tournament_select(&fitnesses, cfg.tournament_size, &mut rng);
                let b = tournament_select(&fitnesses, cfg.tournament_size, &mut rng);
                let (c1, c2) = crossover(&population[a], &population[b], cfg, &mut rng)?;
                next.push(c1);
                if next.len() < cfg.population_size {
                    next.push(c2);
                }
            } else if r < cfg.crossover_rate + cfg.mutation_rate {
                let a = tournament_select(&fitnesses, cfg.tournament_size, &mut rng);
                next.push(mutate(&population[a], cfg, &mut rng, m));
            } else {
                // Remainder of the rate budget: straight reproduction.
                let a = tournament_select(&fitnesses, cfg.tournament_size, &mut rng);
                next.push(population[a].clone());
            }
        }
        population = next;
    }
    Ok((best_ever.unwrap(), log))
}
