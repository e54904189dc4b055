//! Genetic-algorithm training of `[coef, τ̃₁, …, τ̃ₙ]`.
//!
//! The optimizer ([`ga_minimize`]) is generic over the fitness function.
//! [`TrainingSet`] supplies the pipeline fitness: PAPR at the target CCDF
//! level over a frozen batch of symbols, plus a linear penalty on EVM above
//! budget. Every candidate of every generation sees the same symbols.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::ccdf::ccdf;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::hbf::{Pipeline, PipelineParams, Precoder, Projection};
use crate::rng::{stream, Purpose};
use crate::signal::{generate_dac_symbols, TimeSignal};

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub coef_bounds: (f64, f64),
    pub tau_bounds: (f64, f64),
    /// Probability that a child is a blend of its parents rather than a
    /// copy of the first.
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of the gene range.
    pub mutation_sigma: f64,
    /// Per-generation multiplier on `mutation_sigma`.
    pub sigma_decay: f64,
    /// BLX-α extension of the parents' interval.
    pub blend_alpha: f64,
    pub tournament: usize,
    pub elitism: usize,
    pub target_ccdf: f64,
    pub training_n_ofdm: usize,
    pub penalty_weight: f64,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 24,
            generations: 40,
            coef_bounds: (0.2, 2.0),
            tau_bounds: (1.0, 3.0),
            crossover_rate: 0.9,
            mutation_rate: 0.3,
            mutation_sigma: 0.1,
            sigma_decay: 0.95,
            blend_alpha: 0.3,
            tournament: 3,
            elitism: 2,
            target_ccdf: 1e-4,
            training_n_ofdm: 30,
            penalty_weight: 1000.0,
            rng_seed: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.population < 4 {
            return bad(format!("population = {} must be at least 4", self.population));
        }
        if self.elitism >= self.population {
            return bad(format!("elitism = {} must be below the population", self.elitism));
        }
        if self.tournament == 0 {
            return bad("tournament size must be positive".into());
        }
        for (name, (lo, hi)) in [("coef", self.coef_bounds), ("tau", self.tau_bounds)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo > 0.0) {
                return bad(format!("{name} bounds ({lo}, {hi}) must satisfy 0 < lo < hi"));
            }
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} = {r} outside [0, 1]"));
            }
        }
        if !(self.mutation_sigma >= 0.0 && self.sigma_decay > 0.0 && self.blend_alpha >= 0.0) {
            return bad("mutation and blend parameters must be non-negative".into());
        }
        if !(self.target_ccdf > 0.0 && self.target_ccdf <= 1.0) {
            return bad(format!("target_ccdf = {} outside (0, 1]", self.target_ccdf));
        }
        if self.training_n_ofdm == 0 {
            return bad("training_n_ofdm must be positive".into());
        }
        if !(self.penalty_weight >= 0.0) {
            return bad("penalty_weight must be non-negative".into());
        }
        Ok(())
    }

    /// Bounds of `[coef, τ̃₁, …, τ̃ₙ]`.
    pub fn gene_bounds(&self, n_iter: usize) -> Vec<(f64, f64)> {
        std::iter::once(self.coef_bounds)
            .chain(std::iter::repeat_n(self.tau_bounds, n_iter))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationLog {
    pub generation: usize,
    /// Best fitness seen up to and including this generation.
    pub best: f64,
    pub mean: f64,
    pub best_genes: Vec<f64>,
}

/// Outcome of [`ga_minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub genes: Vec<f64>,
    pub fitness: f64,
    pub log: Vec<GenerationLog>,
}

impl GaOutcome {
    pub fn history(&self) -> Vec<f64> {
        self.log.iter().map(|g| g.best).collect()
    }
}

pub const TRAINING_LOG_CSV_HEADER: &str = "generation,best,mean,genes";

pub fn write_training_log<W: Write>(log: &[GenerationLog], mut w: W) -> io::Result<()> {
    writeln!(w, "{TRAINING_LOG_CSV_HEADER}")?;
    for g in log {
        let genes: Vec<String> = g.best_genes.iter().map(f64::to_string).collect();
        writeln!(w, "{},{},{},{}", g.generation, g.best, g.mean, genes.join(";"))?;
    }
    Ok(())
}

fn clip(v: f64, (lo, hi): (f64, f64)) -> f64 {
    v.clamp(lo, hi)
}

fn tournament(rng: &mut ChaCha8Rng, fitness: &[f64], k: usize) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..k {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[best] {
            best = c;
        }
    }
    best
}

fn by_fitness(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    order
}

/// Minimizes `f` over the box `bounds`.
///
/// Tournament selection, BLX-α crossover and Gaussian mutation clipped to
/// the box; the `elitism` best candidates survive unchanged, so the best
/// fitness never increases. `seeds` are placed into the initial population
/// (clipped) ahead of the uniform random fill. Fitness of a generation is
/// evaluated in parallel; everything random happens on one seeded stream,
/// so the result depends only on the inputs.
pub fn ga_minimize<F>(cfg: &GaConfig, bounds: &[(f64, f64)], seeds: &[Vec<f64>], f: F) -> Result<GaOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    if bounds.is_empty() || bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
        return Err(Error::InvalidConfig(
            "gene bounds must be non-empty with lo < hi".into(),
        ));
    }
    if let Some(s) = seeds.iter().find(|s| s.len() != bounds.len()) {
        return Err(Error::Shape(format!(
            "seed genes of length {} for {} genes",
            s.len(),
            bounds.len()
        )));
    }
    let mut rng = stream(cfg.rng_seed, Purpose::Genetic, 0);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut pop: Vec<Vec<f64>> = seeds
        .iter()
        .take(cfg.population)
        .map(|s| s.iter().zip(bounds).map(|(&v, &b)| clip(v, b)).collect())
        .collect();
    while pop.len() < cfg.population {
        pop.push(bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect());
    }
    let mut fit: Vec<f64> = pop.par_iter().map(|g| f(g)).collect();

    let mut best_genes = Vec::new();
    let mut best_fit = f64::INFINITY;
    let mut log = Vec::with_capacity(cfg.generations + 1);
    let mut sigma = cfg.mutation_sigma;

    for generation in 0..=cfg.generations {
        let order = by_fitness(&fit);
        if fit[order[0]] < best_fit {
            best_fit = fit[order[0]];
            best_genes = pop[order[0]].clone();
        }
        let finite: Vec<f64> = fit.iter().copied().filter(|v| v.is_finite()).collect();
        log.push(GenerationLog {
            generation,
            best: best_fit,
            mean: finite.iter().sum::<f64>() / finite.len().max(1) as f64,
            best_genes: best_genes.clone(),
        });
        if generation == cfg.generations {
            break;
        }

        let mut next: Vec<Vec<f64>> = order[..cfg.elitism].iter().map(|&i| pop[i].clone()).collect();
        let mut next_fit: Vec<Option<f64>> = order[..cfg.elitism].iter().map(|&i| Some(fit[i])).collect();
        while next.len() < cfg.population {
            let a = &pop[tournament(&mut rng, &fit, cfg.tournament)];
            let b = &pop[tournament(&mut rng, &fit, cfg.tournament)];
            let blend = rng.random::<f64>() < cfg.crossover_rate;
            let child: Vec<f64> = a
                .iter()
                .zip(b)
                .zip(bounds)
                .map(|((&x, &y), &(lo, hi))| {
                    let mut v = if blend {
                        let (l, h) = (x.min(y), x.max(y));
                        let ext = cfg.blend_alpha * (h - l);
                        l - ext + rng.random::<f64>() * (h - l + 2.0 * ext)
                    } else {
                        x
                    };
                    if rng.random::<f64>() < cfg.mutation_rate {
                        v += sigma * (hi - lo) * unit.sample(&mut rng);
                    }
                    clip(v, (lo, hi))
                })
                .collect();
            next.push(child);
            next_fit.push(None);
        }
        fit = next
            .par_iter()
            .zip(&next_fit)
            .map(|(g, known)| known.unwrap_or_else(|| f(g)))
            .collect();
        pop = next;
        sigma *= cfg.sigma_decay;
    }

    Ok(GaOutcome {
        genes: best_genes,
        fitness: best_fit,
        log,
    })
}

/// Evaluates `f` on a regular grid over `bounds` with `points` values per
/// axis, in row-major order. Meant for debugging small gene spaces.
pub fn grid_scan<F>(bounds: &[(f64, f64)], points: usize, f: F) -> Vec<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let points = points.max(1);
    let total = points.pow(bounds.len() as u32);
    (0..total)
        .into_par_iter()
        .map(|mut k| {
            let mut genes = vec![0.0; bounds.len()];
            for (g, &(lo, hi)) in genes.iter_mut().zip(bounds).rev() {
                let i = k % points;
                k /= points;
                *g = if points == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (points - 1) as f64
                };
            }
            let v = f(&genes);
            (genes, v)
        })
        .collect()
}

/// One fitness evaluation of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub papr_db: f64,
    pub evm: f64,
    /// CCDF level the PAPR was read at; deeper than the sample count
    /// supports targets fall back to `1/samples`.
    pub level: f64,
}

/// First symbol index of the training batch. Training symbols are drawn
/// from the same seeded sequence as evaluation symbols, far past any
/// evaluation run.
pub const TRAINING_SYMBOL_OFFSET: usize = 1 << 40;

/// Frozen training batch shared by every candidate.
pub struct TrainingSet {
    cfg: SimConfig,
    precoder: Precoder,
    symbols: Vec<TimeSignal>,
    projection: Projection,
    target_ccdf: f64,
    penalty_weight: f64,
}

impl TrainingSet {
    pub fn new(cfg: &SimConfig, precoder: Precoder, ga: &GaConfig) -> Result<Self> {
        cfg.validate()?;
        let symbols = generate_dac_symbols(cfg, cfg.rng_seed, TRAINING_SYMBOL_OFFSET, ga.training_n_ofdm)?;
        Ok(TrainingSet {
            cfg: cfg.clone(),
            precoder,
            symbols,
            projection: Projection::Ls2,
            target_ccdf: ga.target_ccdf,
            penalty_weight: ga.penalty_weight,
        })
    }

    pub fn with_projection(mut self, projection: Projection) -> Self {
        self.projection = projection;
        self
    }

    pub fn symbols(&self) -> &[TimeSignal] {
        &self.symbols
    }

    pub fn evaluate(&self, genes: &[f64]) -> Result<Evaluation> {
        let mut params = PipelineParams::from_genes(genes)?;
        params.projection = self.projection;
        let mut cfg = self.cfg.clone();
        cfg.n_iter = params.schedule.n_iter();
        let pipeline = Pipeline::new(&cfg, self.precoder.clone(), params)?;
        // symbols are already spread over the pool by the population loop
        let outcomes: Vec<_> = self
            .symbols
            .iter()
            .map(|z| pipeline.process_symbol(z))
            .collect::<Result<_>>()?;
        let papr: Vec<f64> = outcomes
            .iter()
            .flat_map(|o| o.report.papr_out.iter().copied())
            .filter(|v| v.is_finite())
            .collect();
        let (d, s) = outcomes.iter().fold((0.0, 0.0), |(d, s), o| {
            (d + o.report.delta_energy, s + o.report.signal_energy)
        });
        let evm = (d / s).sqrt();
        let curve = ccdf(&papr)?;
        let level = self.target_ccdf.max(curve.deepest_level());
        let papr_db = curve.papr_at(level)?;
        Ok(Evaluation {
            fitness: papr_db + (evm - self.cfg.evm_budget).max(0.0) * self.penalty_weight,
            papr_db,
            evm,
            level,
        })
    }

    /// Fitness for the optimizer; invalid genes score `+∞`.
    pub fn fitness(&self, genes: &[f64]) -> f64 {
        self.evaluate(genes).map_or(f64::INFINITY, |e| e.fitness)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub genes: Vec<f64>,
    pub fitness: f64,
    pub papr_db: f64,
    pub evm: f64,
    pub level: f64,
    pub history: Vec<f64>,
    pub log: Vec<GenerationLog>,
}

/// Trains `n_iter + 1` genes on a fresh [`TrainingSet`].
pub fn ga_train(
    cfg: &SimConfig,
    precoder: Precoder,
    ga: &GaConfig,
    n_iter: usize,
    seeds: &[Vec<f64>],
) -> Result<TrainResult> {
    if n_iter == 0 {
        return Err(Error::InvalidConfig("n_iter must be positive".into()));
    }
    let set = TrainingSet::new(cfg, precoder, ga)?;
    let outcome = ga_minimize(ga, &ga.gene_bounds(n_iter), seeds, |g| set.fitness(g))?;
    let eval = set.evaluate(&outcome.genes)?;
    Ok(TrainResult {
        history: outcome.history(),
        genes: outcome.genes,
        fitness: outcome.fitness,
        papr_db: eval.papr_db,
        evm: eval.evm,
        level: eval.level,
        log: outcome.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hbf::build_precoder;

    fn sphere(center: &[f64]) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
        move |g: &[f64]| g.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum()
    }

    #[test]
    fn sphere_optimum_is_found() {
        let ga = GaConfig {
            generations: 80,
            ..GaConfig::default()
        };
        let bounds = ga.gene_bounds(2);
        let center = [0.85, 1.76, 1.68];
        let out = ga_minimize(&ga, &bounds, &[], sphere(&center)).unwrap();
        for (g, c) in out.genes.iter().zip(center) {
            assert!((g - c).abs() < 1e-2, "{:?}", out.genes);
        }
        assert!(out.fitness < 1e-4);
    }

    #[test]
    fn history_is_monotone_and_starts_at_generation_zero() {
        let ga = GaConfig::default();
        let out = ga_minimize(&ga, &ga.gene_bounds(3), &[], sphere(&[1.0, 2.0, 2.5, 1.2])).unwrap();
        assert_eq!(out.log.len(), ga.generations + 1);
        assert_eq!(out.log[0].generation, 0);
        assert!(out.history().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn training_is_deterministic() {
        let ga = GaConfig {
            generations: 10,
            ..GaConfig::default()
        };
        let f = sphere(&[1.0, 1.5]);
        let bounds = ga.gene_bounds(1);
        assert_eq!(
            ga_minimize(&ga, &bounds, &[], &f).unwrap(),
            ga_minimize(&ga, &bounds, &[], &f).unwrap()
        );
        let other = GaConfig {
            rng_seed: 2,
            ..ga.clone()
        };
        assert_ne!(
            ga_minimize(&ga, &bounds, &[], &f).unwrap().log,
            ga_minimize(&other, &bounds, &[], &f).unwrap().log
        );
    }

    #[test]
    fn genes_stay_in_bounds() {
        let ga = GaConfig {
            generations: 15,
            mutation_rate: 1.0,
            mutation_sigma: 2.0,
            ..GaConfig::default()
        };
        let bounds = ga.gene_bounds(2);
        // optimum outside the box pushes everything onto the boundary
        let out = ga_minimize(&ga, &bounds, &[], sphere(&[-5.0, 9.0, 0.0])).unwrap();
        for g in &out.log {
            for (v, &(lo, hi)) in g.best_genes.iter().zip(&bounds) {
                assert!((lo..=hi).contains(v));
            }
        }
    }

    #[test]
    fn seeds_enter_the_population() {
        let ga = GaConfig {
            generations: 0,
            ..GaConfig::default()
        };
        let target = vec![0.5, 2.5];
        let out = ga_minimize(&ga, &ga.gene_bounds(1), std::slice::from_ref(&target), sphere(&target)).unwrap();
        assert_eq!(out.genes, target);
        assert_eq!(out.fitness, 0.0);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = [
            GaConfig {
                population: 3,
                ..GaConfig::default()
            },
            GaConfig {
                tau_bounds: (2.0, 1.0),
                ..GaConfig::default()
            },
            GaConfig {
                mutation_rate: 1.5,
                ..GaConfig::default()
            },
            GaConfig {
                elitism: 24,
                ..GaConfig::default()
            },
        ];
        for ga in bad {
            assert!(ga.validate().is_err(), "{ga:?}");
        }
    }

    #[test]
    fn grid_scan_covers_the_box() {
        let pts = grid_scan(&[(0.0, 1.0), (2.0, 4.0)], 3, |g| g[0] + g[1]);
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0].0, vec![0.0, 2.0]);
        assert_eq!(pts[1].0, vec![0.0, 3.0]);
        assert_eq!(pts[8].0, vec![1.0, 4.0]);
        assert_eq!(pts[8].1, 5.0);
    }

    fn desk_set() -> TrainingSet {
        let cfg = SimConfig::desk();
        let p = build_precoder(cfg.n_ant, cfg.n_dac, cfg.rng_seed).unwrap();
        let ga = GaConfig {
            training_n_ofdm: 4,
            ..GaConfig::default()
        };
        TrainingSet::new(&cfg, p, &ga).unwrap()
    }

    #[test]
    fn unreachable_thresholds_leave_papr_unchanged() {
        let set = desk_set();
        let e = set.evaluate(&[1.0, 50.0, 50.0]).unwrap();
        assert_eq!(e.evm, 0.0);
        let cfg = SimConfig::desk();
        let p = build_precoder(cfg.n_ant, cfg.n_dac, cfg.rng_seed).unwrap();
        let before: Vec<f64> = set
            .symbols()
            .iter()
            .flat_map(|z| {
                let x = crate::hbf::digital_twin(&p, z).unwrap();
                crate::metrics::papr_per_stream(&x).unwrap()
            })
            .collect();
        let curve = ccdf(&before).unwrap();
        assert!((e.fitness - curve.papr_at(e.level).unwrap()).abs() < 1e-9);
        assert_eq!(e.level, curve.deepest_level());
    }

    #[test]
    fn duplicate_candidates_score_identically() {
        let set = desk_set();
        let g = [0.85, 1.76, 1.68];
        assert_eq!(set.evaluate(&g).unwrap(), set.evaluate(&g).unwrap());
    }

    #[test]
    fn evm_penalty_applies_above_budget() {
        let set = desk_set();
        let e = set.evaluate(&[2.0, 1.0, 1.0]).unwrap();
        assert!(e.evm > 0.135);
        let expected = e.papr_db + (e.evm - 0.135) * 1000.0;
        assert!((e.fitness - expected).abs() < 1e-9);
        assert_eq!(set.fitness(&[0.0, 1.0, 1.0]), f64::INFINITY);
    }
}
