//! Ask/tell optimizers: a generational genetic algorithm and uniform random
//! search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{Genotype, ParamRange};
use super::operators::{is_distinct, polynomial_mutation, sbx_crossover};
use crate::error::{Error, Result};

/// Optimizer driven from outside: `ask` proposes a batch, `tell` returns the
/// fitness of exactly that batch (lower is better).
pub trait AskTell {
    fn ask(&mut self) -> Result<Vec<Genotype>>;
    fn tell(&mut self, batch: &[Genotype], fitness: &[f64]) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub pop_size: usize,
    pub eta_c: f64,
    pub eta_m: f64,
    /// Probability that a selected pair is recombined.
    pub crossover_prob: f64,
    /// Probability that an offspring is mutated at all.
    pub mutation_prob: f64,
    /// Per-gene mutation rate; `None` means `1 / d`.
    pub gene_rate: Option<f64>,
    pub d_th: f64,
    /// Offspring draws allowed per slot before falling back to a fresh
    /// random individual.
    pub max_redraws: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            pop_size: 100,
            eta_c: 15.0,
            eta_m: 20.0,
            crossover_prob: 0.9,
            mutation_prob: 0.9,
            gene_rate: None,
            d_th: 0.05,
            max_redraws: 50,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(Error::config("pop_size", "needs at least two individuals"));
        }
        for (field, v) in [("eta_c", self.eta_c), ("eta_m", self.eta_m), ("d_th", self.d_th)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be non-negative"));
            }
        }
        for (field, v) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
            ("gene_rate", self.gene_rate.unwrap_or(0.0)),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub x: Genotype,
    pub fitness: f64,
}

#[derive(Debug, Clone)]
pub struct GeneticAlgorithm {
    cfg: GaConfig,
    genes: Vec<ParamRange>,
    population: Vec<Individual>,
    pending: Option<Vec<Genotype>>,
    generation: usize,
    best: Option<Individual>,
    rng: ChaCha8Rng,
}

impl GeneticAlgorithm {
    /// `genes` fixes the dimension and the initial sampling of each
    /// component.
    pub fn new(cfg: GaConfig, genes: Vec<ParamRange>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if genes.is_empty() {
            return Err(Error::config("genes", "genotype dimension must be positive"));
        }
        Ok(Self {
            cfg,
            genes,
            population: Vec::new(),
            pending: None,
            generation: 0,
            best: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn dim(&self) -> usize {
        self.genes.len()
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn best(&self) -> Option<&Individual> {
        self.best.as_ref()
    }

    fn random_individual(&mut self) -> Genotype {
        self.genes.iter().map(|g| g.sample_normalized(&mut self.rng)).collect()
    }

    fn initial_population(&mut self) -> Vec<Genotype> {
        let mut out: Vec<Genotype> = Vec::with_capacity(self.cfg.pop_size);
        let mut attempts = 0;
        while out.len() < self.cfg.pop_size {
            let x = self.random_individual();
            attempts += 1;
            if is_distinct(&x, &out, self.cfg.d_th) || attempts > self.cfg.pop_size * self.cfg.max_redraws {
                out.push(x);
            }
        }
        out
    }

    fn tournament(&mut self) -> usize {
        let n = self.population.len();
        let a = self.rng.gen_range(0..n);
        let b = self.rng.gen_range(0..n);
        if self.population[b].fitness < self.population[a].fitness {
            b
        } else {
            a
        }
    }

    fn mutate(&mut self, x: Genotype) -> Genotype {
        if self.rng.gen::<f64>() >= self.cfg.mutation_prob {
            return x;
        }
        let rate = self.cfg.gene_rate.unwrap_or(1.0 / self.dim() as f64);
        polynomial_mutation(&x, self.cfg.eta_m, rate, &mut self.rng)
    }

    fn offspring(&mut self) -> Vec<Genotype> {
        let existing: Vec<Genotype> = self.population.iter().map(|i| i.x.clone()).collect();
        let mut out: Vec<Genotype> = Vec::with_capacity(self.cfg.pop_size);
        let mut misses = 0;
        while out.len() < self.cfg.pop_size {
            let (i, j) = (self.tournament(), self.tournament());
            let (p1, p2) = (self.population[i].x.clone(), self.population[j].x.clone());
            let (c1, c2) = if self.rng.gen::<f64>() < self.cfg.crossover_prob {
                sbx_crossover(&p1, &p2, self.cfg.eta_c, &mut self.rng)
            } else {
                (p1, p2)
            };
            for child in [c1, c2] {
                if out.len() == self.cfg.pop_size {
                    break;
                }
                let child = self.mutate(child);
                if is_distinct(&child, &existing, self.cfg.d_th) && is_distinct(&child, &out, self.cfg.d_th) {
                    out.push(child);
                    misses = 0;
                } else {
                    misses += 1;
                }
            }
            if misses > self.cfg.max_redraws {
                let fresh = self.random_individual();
                out.push(fresh);
                misses = 0;
            }
        }
        out
    }
}

impl AskTell for GeneticAlgorithm {
    fn ask(&mut self) -> Result<Vec<Genotype>> {
        if self.pending.is_some() {
            return Err(Error::Protocol("ask while a batch is awaiting its fitness".into()));
        }
        let batch = if self.population.is_empty() {
            self.initial_population()
        } else {
            self.offspring()
        };
        self.pending = Some(batch.clone());
        Ok(batch)
    }

    fn tell(&mut self, batch: &[Genotype], fitness: &[f64]) -> Result<()> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("tell without a preceding ask".into()))?;
        if batch != pending.as_slice() || fitness.len() != pending.len() {
            self.pending = Some(pending);
            return Err(Error::Protocol("tell does not match the last asked batch".into()));
        }
        let mut next: Vec<Individual> = pending
            .into_iter()
            .zip(fitness)
            .map(|(x, &f)| Individual {
                x,
                fitness: if f.is_nan() { f64::INFINITY } else { f },
            })
            .collect();
        // Generational replacement keeping the single best parent.
        if let Some(elite) = self.population.iter().min_by(|a, b| a.fitness.total_cmp(&b.fitness)) {
            let best_child = next.iter().map(|i| i.fitness).fold(f64::INFINITY, f64::min);
            if elite.fitness < best_child {
                let worst = (0..next.len())
                    .max_by(|&a, &b| next[a].fitness.total_cmp(&next[b].fitness))
                    .expect("non-empty batch");
                next[worst] = elite.clone();
            }
        }
        for ind in &next {
            if self.best.as_ref().map_or(true, |b| ind.fitness < b.fitness) {
                self.best = Some(ind.clone());
            }
        }
        self.population = next;
        self.generation += 1;
        Ok(())
    }
}

/// Independent uniform sampling in batches of `batch_size`.
#[derive(Debug, Clone)]
pub struct RandomSearch {
    genes: Vec<ParamRange>,
    batch_size: usize,
    pending: Option<Vec<Genotype>>,
    rng: ChaCha8Rng,
}

impl RandomSearch {
    pub fn new(genes: Vec<ParamRange>, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        Ok(Self {
            genes,
            batch_size,
            pending: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl AskTell for RandomSearch {
    fn ask(&mut self) -> Result<Vec<Genotype>> {
        if self.pending.is_some() {
            return Err(Error::Protocol("ask while a batch is awaiting its fitness".into()));
        }
        let batch: Vec<Genotype> = (0..self.batch_size)
            .map(|_| self.genes.iter().map(|g| g.sample_normalized(&mut self.rng)).collect())
            .collect();
        self.pending = Some(batch.clone());
        Ok(batch)
    }

    fn tell(&mut self, batch: &[Genotype], fitness: &[f64]) -> Result<()> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("tell without a preceding ask".into()))?;
        if batch != pending.as_slice() || fitness.len() != pending.len() {
            self.pending = Some(pending);
            return Err(Error::Protocol("tell does not match the last asked batch".into()));
        }
        Ok(())
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone)]
pub struct Evaluated<T> {
    pub index: usize,
    pub x: Genotype,
    pub fitness: f64,
    pub value: T,
}

/// Drives `opt` for exactly `budget` evaluations. Each batch is evaluated in
/// parallel; `eval` receives the global evaluation index. A final batch cut
/// short by the budget is never told.
pub fn run_budgeted<O, T, F>(opt: &mut O, budget: usize, eval: F) -> Result<Vec<Evaluated<T>>>
where
    O: AskTell + ?Sized,
    T: Send,
    F: Fn(usize, &[f64]) -> Result<(f64, T)> + Sync,
{
    let mut out: Vec<Evaluated<T>> = Vec::with_capacity(budget);
    while out.len() < budget {
        let batch = opt.ask()?;
        if batch.is_empty() {
            return Err(Error::Protocol("optimizer asked an empty batch".into()));
        }
        let take = batch.len().min(budget - out.len());
        let start = out.len();
        let results: Vec<(f64, T)> = batch[..take]
            .par_iter()
            .enumerate()
            .map(|(k, x)| eval(start + k, x))
            .collect::<Result<_>>()?;
        let fitness: Vec<f64> = results.iter().map(|r| r.0).collect();
        if take == batch.len() {
            opt.tell(&batch, &fitness)?;
        }
        out.extend(batch.into_iter().zip(results).enumerate().map(|(k, (x, (f, v)))| Evaluated {
            index: start + k,
            x,
            fitness: f,
            value: v,
        }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::bounds::ParamBounds;
    use crate::search::operators::distance;

    fn ga(seed: u64) -> GeneticAlgorithm {
        let genes = ParamBounds::default().with_failure_ids(20).unwrap().genes();
        GeneticAlgorithm::new(GaConfig::default(), genes, seed).unwrap()
    }

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
    }

    #[test]
    fn first_ask_is_a_uniform_population() {
        let mut g = ga(0);
        let pop = g.ask().unwrap();
        assert_eq!(pop.len(), 100);
        assert!(pop.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        for i in 0..11 {
            let mean = pop.iter().map(|x| x[i]).sum::<f64>() / 100.0;
            assert!((0.4..=0.6).contains(&mean), "component {i}: {mean}");
        }
    }

    #[test]
    fn protocol_violations() {
        let mut g = ga(1);
        assert!(matches!(g.tell(&[], &[]), Err(Error::Protocol(_))));
        let pop = g.ask().unwrap();
        assert!(matches!(g.ask(), Err(Error::Protocol(_))));
        assert!(matches!(g.tell(&pop, &[0.0; 99]), Err(Error::Protocol(_))));
        assert!(matches!(g.tell(&pop[1..], &[0.0; 99]), Err(Error::Protocol(_))));
        let f: Vec<f64> = pop.iter().map(|x| sphere(x)).collect();
        g.tell(&pop, &f).unwrap();
        assert!(matches!(g.tell(&pop, &f), Err(Error::Protocol(_))));
    }

    #[test]
    fn elitism_and_no_duplicates() {
        let mut g = ga(2);
        let mut best = f64::INFINITY;
        let mut first = None;
        for _ in 0..15 {
            let pop = g.ask().unwrap();
            for i in 0..pop.len() {
                for j in i + 1..pop.len() {
                    assert!(distance(&pop[i], &pop[j]) >= 0.05);
                }
            }
            let f: Vec<f64> = pop.iter().map(|x| sphere(x)).collect();
            g.tell(&pop, &f).unwrap();
            let gen_best = g.population().iter().map(|i| i.fitness).fold(f64::INFINITY, f64::min);
            assert!(gen_best <= best);
            best = gen_best;
            first.get_or_insert(gen_best);
        }
        assert!(best < 0.5 * first.unwrap(), "{best} vs {first:?}");
    }

    #[test]
    fn budget_accounting_and_partial_batches() {
        let mut g = ga(3);
        let out = run_budgeted(&mut g, 250, |i, x| Ok((sphere(x), i))).unwrap();
        assert_eq!(out.len(), 250);
        assert!(out.iter().enumerate().all(|(k, e)| e.index == k && e.value == k));
        assert_eq!(g.generation(), 2);
        let mut g = ga(3);
        assert!(run_budgeted(&mut g, 0, |_, x| Ok((sphere(x), ()))).unwrap().is_empty());
    }

    #[test]
    fn seeded_runs_repeat() {
        let run = |seed| {
            let mut g = ga(seed);
            run_budgeted(&mut g, 300, |_, x| Ok((sphere(x), ())))
                .unwrap()
                .into_iter()
                .map(|e| e.x)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn random_search_is_uniform() {
        let genes = ParamBounds::default().genes();
        let mut rs = RandomSearch::new(genes, 1000, 4).unwrap();
        let batch = rs.ask().unwrap();
        let lanes = batch.iter().filter(|x| x[2] == 1.0).count();
        assert!((400..600).contains(&lanes));
        assert!(batch.iter().all(|x| x[2] == 0.0 || x[2] == 1.0));
        let mean = batch.iter().map(|x| x[0]).sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.05);
        assert!(rs.tell(&batch, &[0.0; 1000]).is_ok());
        assert!(rs.tell(&batch, &[0.0; 1000]).is_err());
    }
}
