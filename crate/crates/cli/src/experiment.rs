//! Experiment description and its text format.
//!
//! ```text
//! # comment
//! [sim]
//! n_fft = 1024
//! n_sc = 240
//!
//! [pipeline]
//! coef = 0.85
//! tau = 1.76, 1.68
//! projection = ls2
//! ```
//!
//! Sections are `sim`, `pipeline`, `ga`, `bound` and `output`. Keys left
//! out keep their defaults; the presence of `[ga]` or `[bound]` enables
//! that block. Unknown sections and keys, duplicated keys and unparsable
//! values are errors.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use hbf_papr::hbf::{PipelineParams, Projection};
use hbf_papr::{BoundVariant, GaConfig, Modulation, SimConfig, ThresholdNorm, ThresholdSchedule};

/// Invalid experiment description; maps to exit code 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecError(pub String);

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SpecError {}

fn err<T>(msg: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub variants: Vec<BoundVariant>,
    /// Symbols to solve; `None` uses `sim.n_ofdm`.
    pub n_ofdm: Option<usize>,
    /// EVM fraction setting the budget; `None` uses `sim.evm_budget`.
    /// Zero is allowed and leaves every symbol untouched.
    pub evm: Option<f64>,
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings {
            tol: 1e-3,
            max_iters: 20_000,
            variants: BoundVariant::ALL.to_vec(),
            n_ofdm: None,
            evm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub sim: SimConfig,
    pub pipeline: PipelineParams,
    pub ga: Option<GaConfig>,
    pub bound: Option<BoundSettings>,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            sim: SimConfig::default(),
            pipeline: PipelineParams::trained(),
            ga: None,
            bound: None,
            output_dir: PathBuf::from("out"),
            emit_plots: true,
        }
    }
}

/// Command-line overrides applied on top of a parsed file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n_ofdm: Option<usize>,
    pub iters: Option<usize>,
    pub projection: Option<Projection>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        Parser::default().run(text)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let wrap = |e: hbf_papr::Error| SpecError(e.to_string());
        self.sim.validate().map_err(wrap)?;
        self.pipeline.schedule.validate().map_err(wrap)?;
        if self.pipeline.schedule.n_iter() != self.sim.n_iter {
            return err(format!(
                "n_iter = {} but the threshold schedule has {} entries",
                self.sim.n_iter,
                self.pipeline.schedule.n_iter()
            ));
        }
        if let Some(w) = self.pipeline.window {
            if w == 0 || w > self.sim.n_fft {
                return err(format!("window = {w} outside 1..=n_fft"));
            }
        }
        if let Some(ga) = &self.ga {
            ga.validate().map_err(wrap)?;
        }
        if let Some(b) = &self.bound {
            if !(b.tol > 0.0) || b.max_iters == 0 || b.variants.is_empty() || b.n_ofdm == Some(0) {
                return err("bound needs tol > 0, max_iters > 0, n_ofdm > 0 and at least one variant");
            }
            if let Some(e) = b.evm {
                if !(0.0..1.0).contains(&e) {
                    return err(format!("bound evm = {e} outside [0, 1)"));
                }
            }
        }
        Ok(())
    }

    /// Applies overrides. A changed iteration count truncates the
    /// threshold schedule or extends it by repeating its last entry.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sim.rng_seed = seed;
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        if let Some(n) = o.n_ofdm {
            self.sim.n_ofdm = n;
        }
        if let Some(p) = o.projection {
            self.pipeline.projection = p;
        }
        if let Some(n) = o.iters {
            self.sim.n_iter = n;
            let tau = &mut self.pipeline.schedule.tau_norm;
            if let Some(&last) = tau.last() {
                tau.resize(n, last);
            }
        }
    }

    /// GA settings in effect for training.
    pub fn ga_or_default(&self) -> GaConfig {
        self.ga.clone().unwrap_or_default()
    }

    pub fn bound_or_default(&self) -> BoundSettings {
        self.bound.clone().unwrap_or_default()
    }

    /// The description in its own text format; parsing it back gives an
    /// equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let sim = &self.sim;
        let _ = writeln!(s, "[sim]");
        for (k, v) in [
            ("n_fft", sim.n_fft.to_string()),
            ("n_sc", sim.n_sc.to_string()),
            ("n_up", sim.n_up.to_string()),
            ("n_ant", sim.n_ant.to_string()),
            ("n_dac", sim.n_dac.to_string()),
            ("n_lpf", sim.n_lpf.to_string()),
            ("n_iter", sim.n_iter.to_string()),
            ("n_b", sim.n_b.to_string()),
            ("n_ofdm", sim.n_ofdm.to_string()),
            ("modulation", sim.modulation.to_string()),
            ("evm_budget", sim.evm_budget.to_string()),
            ("seed", sim.rng_seed.to_string()),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        let p = &self.pipeline;
        let _ = writeln!(s, "\n[pipeline]");
        let _ = writeln!(s, "coef = {}", p.schedule.coef);
        let _ = writeln!(s, "tau = {}", join(&p.schedule.tau_norm));
        let _ = writeln!(s, "norm = {}", p.schedule.norm);
        let _ = writeln!(s, "projection = {}", p.projection);
        let _ = writeln!(
            s,
            "window = {}",
            p.window.map_or_else(|| "none".to_string(), |w| w.to_string())
        );
        if let Some(ga) = &self.ga {
            let _ = writeln!(s, "\n[ga]");
            for (k, v) in [
                ("population", ga.population.to_string()),
                ("generations", ga.generations.to_string()),
                ("coef_lo", ga.coef_bounds.0.to_string()),
                ("coef_hi", ga.coef_bounds.1.to_string()),
                ("tau_lo", ga.tau_bounds.0.to_string()),
                ("tau_hi", ga.tau_bounds.1.to_string()),
                ("crossover_rate", ga.crossover_rate.to_string()),
                ("mutation_rate", ga.mutation_rate.to_string()),
                ("mutation_sigma", ga.mutation_sigma.to_string()),
                ("sigma_decay", ga.sigma_decay.to_string()),
                ("blend_alpha", ga.blend_alpha.to_string()),
                ("tournament", ga.tournament.to_string()),
                ("elitism", ga.elitism.to_string()),
                ("target_ccdf", ga.target_ccdf.to_string()),
                ("training_n_ofdm", ga.training_n_ofdm.to_string()),
                ("penalty_weight", ga.penalty_weight.to_string()),
                ("seed", ga.rng_seed.to_string()),
            ] {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        if let Some(b) = &self.bound {
            let _ = writeln!(s, "\n[bound]");
            let _ = writeln!(s, "tol = {}", b.tol);
            let _ = writeln!(s, "max_iters = {}", b.max_iters);
            let names: Vec<&str> = b.variants.iter().map(|v| v.name()).collect();
            let _ = writeln!(s, "variants = {}", names.join(", "));
            if let Some(n) = b.n_ofdm {
                let _ = writeln!(s, "n_ofdm = {n}");
            }
            if let Some(e) = b.evm {
                let _ = writeln!(s, "evm = {e}");
            }
        }
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", self.output_dir.display());
        let _ = writeln!(s, "plots = {}", self.emit_plots);
        s
    }

    /// Single-line rendering of [`Self::to_text`] for file headers.
    pub fn provenance(&self) -> String {
        let mut line = format!("hbf-papr seed={}", self.sim.rng_seed);
        for l in self.to_text().lines().filter(|l| !l.is_empty()) {
            line.push(' ');
            line.push_str(&l.replace(" = ", "="));
        }
        line
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Default)]
struct Parser {
    spec: ExperimentSpec,
    seen: BTreeSet<(String, String)>,
    n_iter_set: bool,
    tau_set: bool,
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T, SpecError> {
    raw.parse()
        .map_err(|_| SpecError(format!("cannot parse `{raw}` for `{key}`")))
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>, SpecError> {
    raw.split(',').map(|v| value(key, v.trim())).collect()
}

fn boolean(key: &str, raw: &str) -> Result<bool, SpecError> {
    match raw {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => err(format!("cannot parse `{raw}` for `{key}` as a boolean")),
    }
}

impl Parser {
    fn run(mut self, text: &str) -> Result<ExperimentSpec, SpecError> {
        let mut section: Option<String> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let at = |e: SpecError| SpecError(format!("line {}: {}", no + 1, e.0));
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim().to_string();
                match name.as_str() {
                    "sim" | "pipeline" | "output" => {}
                    "ga" => {
                        self.spec.ga.get_or_insert_with(GaConfig::default);
                    }
                    "bound" => {
                        self.spec.bound.get_or_insert_with(BoundSettings::default);
                    }
                    _ => return Err(at(SpecError(format!("unknown section [{name}]")))),
                }
                section = Some(name);
                continue;
            }
            let Some((key, val)) = line.split_once('=') else {
                return Err(at(SpecError(format!("expected `key = value`, got `{line}`"))));
            };
            let (key, val) = (key.trim(), val.trim());
            let Some(sec) = section.clone() else {
                return Err(at(SpecError(format!("`{key}` outside any section"))));
            };
            if !self.seen.insert((sec.clone(), key.to_string())) {
                return Err(at(SpecError(format!("duplicate key `{key}` in [{sec}]"))));
            }
            self.set(&sec, key, val).map_err(at)?;
        }
        if self.tau_set && !self.n_iter_set {
            self.spec.sim.n_iter = self.spec.pipeline.schedule.n_iter();
        }
        self.spec.validate()?;
        Ok(self.spec)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), SpecError> {
        let unknown = || err(format!("unknown key `{key}` in [{section}]"));
        let spec = &mut self.spec;
        match section {
            "sim" => {
                let sim = &mut spec.sim;
                match key {
                    "n_fft" => sim.n_fft = value(key, v)?,
                    "n_sc" => sim.n_sc = value(key, v)?,
                    "n_up" => sim.n_up = value(key, v)?,
                    "n_ant" => sim.n_ant = value(key, v)?,
                    "n_dac" => sim.n_dac = value(key, v)?,
                    "n_lpf" => sim.n_lpf = value(key, v)?,
                    "n_iter" => {
                        sim.n_iter = value(key, v)?;
                        self.n_iter_set = true;
                    }
                    "n_b" => sim.n_b = value(key, v)?,
                    "n_ofdm" => sim.n_ofdm = value(key, v)?,
                    "modulation" => sim.modulation = value::<Modulation>(key, v)?,
                    "evm_budget" => sim.evm_budget = value(key, v)?,
                    "seed" => sim.rng_seed = value(key, v)?,
                    _ => return unknown(),
                }
            }
            "pipeline" => {
                let p = &mut spec.pipeline;
                match key {
                    "coef" => p.schedule.coef = value(key, v)?,
                    "tau" => {
                        p.schedule.tau_norm = list(key, v)?;
                        self.tau_set = true;
                    }
                    "norm" => p.schedule.norm = value::<ThresholdNorm>(key, v)?,
                    "projection" => p.projection = value::<Projection>(key, v)?,
                    "window" => {
                        p.window = if v == "none" { None } else { Some(value(key, v)?) };
                    }
                    _ => return unknown(),
                }
            }
            "ga" => {
                let ga = spec.ga.get_or_insert_with(GaConfig::default);
                match key {
                    "population" => ga.population = value(key, v)?,
                    "generations" => ga.generations = value(key, v)?,
                    "coef_lo" => ga.coef_bounds.0 = value(key, v)?,
                    "coef_hi" => ga.coef_bounds.1 = value(key, v)?,
                    "tau_lo" => ga.tau_bounds.0 = value(key, v)?,
                    "tau_hi" => ga.tau_bounds.1 = value(key, v)?,
                    "crossover_rate" => ga.crossover_rate = value(key, v)?,
                    "mutation_rate" => ga.mutation_rate = value(key, v)?,
                    "mutation_sigma" => ga.mutation_sigma = value(key, v)?,
                    "sigma_decay" => ga.sigma_decay = value(key, v)?,
                    "blend_alpha" => ga.blend_alpha = value(key, v)?,
                    "tournament" => ga.tournament = value(key, v)?,
                    "elitism" => ga.elitism = value(key, v)?,
                    "target_ccdf" => ga.target_ccdf = value(key, v)?,
                    "training_n_ofdm" => ga.training_n_ofdm = value(key, v)?,
                    "penalty_weight" => ga.penalty_weight = value(key, v)?,
                    "seed" => ga.rng_seed = value(key, v)?,
                    _ => return unknown(),
                }
            }
            "bound" => {
                let b = spec.bound.get_or_insert_with(BoundSettings::default);
                match key {
                    "tol" => b.tol = value(key, v)?,
                    "max_iters" => b.max_iters = value(key, v)?,
                    "variants" => b.variants = list::<BoundVariant>(key, v)?,
                    "n_ofdm" => b.n_ofdm = Some(value(key, v)?),
                    "evm" => b.evm = Some(value(key, v)?),
                    _ => return unknown(),
                }
            }
            "output" => match key {
                "dir" => spec.output_dir = PathBuf::from(v),
                "plots" => spec.emit_plots = boolean(key, v)?,
                _ => return unknown(),
            },
            _ => unreachable!("sections are checked on entry"),
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    let t = line.trim_start();
    if t.starts_with('#') || t.starts_with(';') {
        return "";
    }
    match line.find(" #") {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Genes `[coef, τ̃₁, …]` of the pipeline block of a description.
pub fn genes_of(spec: &ExperimentSpec) -> Vec<f64> {
    spec.pipeline.schedule.genes()
}

/// Replaces the pipeline schedule by `genes` and syncs `n_iter`.
pub fn with_genes(spec: &ExperimentSpec, genes: &[f64]) -> Result<ExperimentSpec, SpecError> {
    let mut out = spec.clone();
    let norm = out.pipeline.schedule.norm;
    out.pipeline.schedule = ThresholdSchedule::from_genes(genes).map_err(|e| SpecError(e.to_string()))?;
    out.pipeline.schedule.norm = norm;
    out.sim.n_iter = out.pipeline.schedule.n_iter();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_reference_setup() {
        let s = ExperimentSpec::parse("").unwrap();
        assert_eq!(s, ExperimentSpec::default());
        assert_eq!(s.sim, SimConfig::default());
    }

    #[test]
    fn round_trip_is_lossless() {
        let mut s = ExperimentSpec {
            sim: SimConfig::desk(),
            ..Default::default()
        };
        s.pipeline.schedule = ThresholdSchedule::new(0.1 + 0.2, vec![1.0 / 3.0, 2.0f64.sqrt(), 1.68]).unwrap();
        s.sim.n_iter = 3;
        s.pipeline.window = Some(64);
        s.pipeline.projection = Projection::Ls1;
        s.ga = Some(GaConfig {
            target_ccdf: 1e-3,
            ..GaConfig::default()
        });
        s.bound = Some(BoundSettings {
            variants: vec![BoundVariant::UnlimitedBand],
            evm: Some(0.0),
            n_ofdm: Some(7),
            ..BoundSettings::default()
        });
        s.emit_plots = false;
        assert_eq!(ExperimentSpec::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let s = ExperimentSpec::parse(
            "# header\n; also a comment\n[sim]\n  n_ofdm = 7   # trailing\n\n[output]\nplots = no\n",
        )
        .unwrap();
        assert_eq!(s.sim.n_ofdm, 7);
        assert!(!s.emit_plots);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        for text in [
            "[sim]\nn_fftt = 1024\n",
            "[simulation]\n",
            "n_fft = 1024\n",
            "[sim]\nn_fft = 1024\nn_fft = 512\n",
            "[sim]\nn_fft\n",
            "[sim]\nn_fft = many\n",
            "[output]\nplots = maybe\n",
        ] {
            assert!(ExperimentSpec::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn inconsistent_descriptions_are_rejected() {
        assert!(ExperimentSpec::parse("[sim]\nn_iter = 3\n").is_err());
        assert!(ExperimentSpec::parse("[sim]\nn_fft = 1000\n").is_err());
        assert!(ExperimentSpec::parse("[ga]\npopulation = 2\n").is_err());
        assert!(ExperimentSpec::parse("[bound]\nevm = 1.5\n").is_err());
        let err = ExperimentSpec::parse("[sim]\nn_sc = 240\n\n[pipeline]\nwat = 1\n").unwrap_err();
        assert!(err.0.starts_with("line 5:"), "{err}");
    }

    #[test]
    fn schedule_length_sets_iterations() {
        let s = ExperimentSpec::parse("[pipeline]\ntau = 1.7, 1.6, 1.5\n").unwrap();
        assert_eq!(s.sim.n_iter, 3);
    }

    #[test]
    fn iteration_override_resizes_schedule() {
        let mut s = ExperimentSpec::default();
        s.apply(&Overrides {
            iters: Some(3),
            ..Overrides::default()
        });
        assert_eq!(s.pipeline.schedule.tau_norm, vec![1.76, 1.68, 1.68]);
        s.apply(&Overrides {
            iters: Some(1),
            ..Overrides::default()
        });
        assert_eq!(s.pipeline.schedule.tau_norm, vec![1.76]);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn provenance_is_one_line() {
        let p = ExperimentSpec::default().provenance();
        assert!(!p.contains('\n'));
        assert!(p.starts_with("hbf-papr seed=1 [sim] n_fft=1024"));
    }

    #[test]
    fn genes_replace_the_schedule() {
        let s = with_genes(&ExperimentSpec::default(), &[0.9, 1.5, 1.4, 1.3]).unwrap();
        assert_eq!(s.sim.n_iter, 3);
        assert_eq!(genes_of(&s), vec![0.9, 1.5, 1.4, 1.3]);
        assert!(with_genes(&s, &[0.9]).is_err());
    }
}
