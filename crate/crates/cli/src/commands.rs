use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use rayon::prelude::*;

use hbf_papr::bound::{bound_suite, BoundSuiteOutcome, SuiteSettings};
use hbf_papr::ccdf::{ccdf, CcdfCurve};
use hbf_papr::hbf::{build_precoder, digital_twin, RunOutcome};
use hbf_papr::metrics::{papr_per_stream, Psd, PsdAccumulator};
use hbf_papr::signal::{generate_dac_symbols, TimeSignal};
use hbf_papr::trainer::{ga_train, write_training_log, TrainResult};
use hbf_papr::{BoundVariant, Pipeline, Precoder};

use crate::experiment::{genes_of, with_genes, ExperimentSpec, SpecError};
use crate::plot::{Chart, Series};

/// CCDF levels reported in summaries.
pub const REPORT_LEVELS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Symbols per parallel spectrum chunk; fixed so sums are reproducible.
const SPECTRUM_CHUNK: usize = 8;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// Writes `# <provenance>` and then the body produced by `body`.
fn write_artifact<F>(dir: &Path, name: &str, provenance: &str, body: F) -> Result<PathBuf>
where
    F: FnOnce(&mut Vec<u8>) -> io::Result<()>,
{
    let path = dir.join(name);
    let mut buf = Vec::new();
    writeln!(buf, "# {provenance}")?;
    body(&mut buf)?;
    fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_plot(dir: &Path, name: &str, chart: &Chart, series: &[Series]) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, chart.render(series)).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn ccdf_series<'a>(name: &'a str, c: &CcdfCurve) -> Series<'a> {
    Series {
        name,
        points: c.papr_db.iter().copied().zip(c.exceed_prob.iter().copied()).collect(),
    }
}

fn psd_series<'a>(name: &'a str, p: &Psd) -> Series<'a> {
    Series {
        name,
        points: p
            .bin_hz_normalized
            .iter()
            .copied()
            .zip(p.psd_db.iter().copied())
            .collect(),
    }
}

fn validated(spec: &ExperimentSpec) -> Result<Precoder> {
    spec.validate()?;
    Ok(build_precoder(spec.sim.n_ant, spec.sim.n_dac, spec.sim.rng_seed).map_err(|e| SpecError(e.to_string()))?)
}

/// Antenna-domain spectrum of `P·Z` over a batch.
fn antenna_spectrum(p: &Precoder, symbols: &[TimeSignal], n_fft: usize) -> Result<Psd> {
    let parts: Vec<PsdAccumulator> = symbols
        .par_chunks(SPECTRUM_CHUNK)
        .map(|chunk| {
            let mut acc = PsdAccumulator::new(n_fft);
            for z in chunk {
                acc.add(&digital_twin(p, z)?)?;
            }
            Ok(acc)
        })
        .collect::<hbf_papr::Result<_>>()?;
    let mut total = PsdAccumulator::new(n_fft);
    for part in &parts {
        total.merge(part)?;
    }
    Ok(total.finish()?)
}

pub struct SimulateOutcome {
    pub run: RunOutcome,
    pub report: String,
    pub files: Vec<PathBuf>,
}

/// Runs the pipeline over `n_ofdm` seeded symbols and writes
/// `ccdf_before.csv`, `ccdf_after.csv`, `spectrum.csv` (output antennas),
/// `spectrum_before.csv`, `report.csv` (per symbol) and `report.txt`.
pub fn simulate(spec: &ExperimentSpec) -> Result<SimulateOutcome> {
    let precoder = validated(spec)?;
    let sim = &spec.sim;
    let dir = &spec.output_dir;
    create_dir(dir)?;
    let prov = spec.provenance();

    let symbols = generate_dac_symbols(sim, sim.rng_seed, 0, sim.n_ofdm)?;
    let pipeline = Pipeline::new(sim, precoder.clone(), spec.pipeline.clone())?;
    let run = pipeline.run(&symbols)?;
    let before = run.ccdf_before()?;
    let after = run.ccdf_after()?;
    let psd_before = antenna_spectrum(&precoder, &symbols, sim.n_fft)?;
    let psd_after = antenna_spectrum(&precoder, &run.z_hat, sim.n_fft)?;

    let mut files = vec![
        write_artifact(dir, "ccdf_before.csv", &prov, |w| before.write_csv(w))?,
        write_artifact(dir, "ccdf_after.csv", &prov, |w| after.write_csv(w))?,
        write_artifact(dir, "spectrum.csv", &prov, |w| psd_after.write_csv(w))?,
        write_artifact(dir, "spectrum_before.csv", &prov, |w| psd_before.write_csv(w))?,
        write_artifact(dir, "report.csv", &prov, |w| run.write_symbol_csv(w))?,
    ];
    let mut report = run.to_key_values(&REPORT_LEVELS);
    for p in REPORT_LEVELS {
        if let (Ok(b), Ok(a)) = (before.papr_at(p), after.papr_at(p)) {
            let _ = writeln!(report, "papr_reduction_db@{p:e}={}", b - a);
        }
    }
    files.push(write_artifact(dir, "report.txt", &prov, |w| {
        w.write_all(report.as_bytes())
    })?);

    if spec.emit_plots {
        let ccdf_chart = Chart {
            title: "CCDF of PAPR per antenna",
            x_label: "PAPR (dB)",
            y_label: "CCDF",
            log_y: true,
            provenance: &prov,
        };
        files.push(write_plot(
            dir,
            "ccdf.svg",
            &ccdf_chart,
            &[ccdf_series("before", &before), ccdf_series("after", &after)],
        )?);
        let psd_chart = Chart {
            title: "Antenna spectrum",
            x_label: "normalized frequency",
            y_label: "PSD (dB)",
            log_y: false,
            provenance: &prov,
        };
        files.push(write_plot(
            dir,
            "spectrum.svg",
            &psd_chart,
            &[psd_series("before", &psd_before), psd_series("after", &psd_after)],
        )?);
    }
    Ok(SimulateOutcome { run, report, files })
}

pub struct TrainOutcome {
    pub result: TrainResult,
    /// The input description with the trained schedule.
    pub trained: ExperimentSpec,
    pub elapsed: Duration,
    pub files: Vec<PathBuf>,
}

/// Trains the schedule for `sim.n_iter` iterations. `resume` genes are
/// placed in the initial population. Writes `training_log.csv`,
/// `trained.cfg` (loadable with `--config`) and `train_report.txt`.
pub fn train(spec: &ExperimentSpec, resume: Option<&[f64]>) -> Result<TrainOutcome> {
    let precoder = validated(spec)?;
    let ga = spec.ga_or_default();
    let n_iter = spec.sim.n_iter;
    if let Some(g) = resume {
        if g.len() != n_iter + 1 {
            return Err(SpecError(format!(
                "resume genes have {} entries, training needs {}",
                g.len(),
                n_iter + 1
            ))
            .into());
        }
    }
    let dir = &spec.output_dir;
    create_dir(dir)?;
    let mut resolved = spec.clone();
    resolved.ga = Some(ga.clone());
    let prov = resolved.provenance();

    let start = Instant::now();
    let seeds: Vec<Vec<f64>> = resume.map(|g| vec![g.to_vec()]).unwrap_or_default();
    let result = ga_train(&spec.sim, precoder, &ga, n_iter, &seeds)?;
    let elapsed = start.elapsed();
    let mut trained = with_genes(&resolved, &result.genes)?;
    trained.pipeline.projection = spec.pipeline.projection;

    let mut files = vec![write_artifact(dir, "training_log.csv", &prov, |w| {
        write_training_log(&result.log, w)
    })?];
    files.push(write_artifact(dir, "trained.cfg", &prov, |w| {
        w.write_all(trained.to_text().as_bytes())
    })?);
    let mut report = String::new();
    let genes: Vec<String> = result.genes.iter().map(f64::to_string).collect();
    let _ = writeln!(report, "genes={}", genes.join(","));
    let _ = writeln!(report, "fitness_db={}", result.fitness);
    let _ = writeln!(report, "papr_db={}", result.papr_db);
    let _ = writeln!(report, "ccdf_level={}", result.level);
    let _ = writeln!(report, "evm={}", result.evm);
    let _ = writeln!(report, "evm_budget={}", spec.sim.evm_budget);
    let _ = writeln!(report, "generations={}", ga.generations);
    let _ = writeln!(report, "runtime_s={}", elapsed.as_secs_f64());
    files.push(write_artifact(dir, "train_report.txt", &prov, |w| {
        w.write_all(report.as_bytes())
    })?);
    Ok(TrainOutcome {
        result,
        trained,
        elapsed,
        files,
    })
}

/// Genes stored in a description file such as `trained.cfg`.
pub fn read_genes(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(genes_of(&ExperimentSpec::parse(&text)?))
}

pub struct BoundOutcome {
    pub suite: BoundSuiteOutcome,
    pub before: CcdfCurve,
    pub report: String,
    pub files: Vec<PathBuf>,
}

/// File name of the CCDF of one bound variant.
pub fn bound_file(v: BoundVariant) -> String {
    format!("bound_{}.csv", v.name())
}

/// Solves the bounds for every symbol and variant. Writes
/// `bound_before.csv` (unreduced), one CCDF file per variant,
/// `bound_records.csv` and `bound_report.txt` with PAPR levels,
/// certified gaps and the pairwise differences between variants.
pub fn bound(spec: &ExperimentSpec) -> Result<BoundOutcome> {
    let precoder = validated(spec)?;
    let settings = spec.bound_or_default();
    let sim = &spec.sim;
    let n_ofdm = settings.n_ofdm.unwrap_or(sim.n_ofdm);
    let evm = settings.evm.unwrap_or(sim.evm_budget);
    let dir = &spec.output_dir;
    create_dir(dir)?;
    let mut resolved = spec.clone();
    resolved.bound = Some(settings.clone());
    let prov = resolved.provenance();

    let start = Instant::now();
    let symbols = generate_dac_symbols(sim, sim.rng_seed, 0, n_ofdm)?;
    let before_values: Vec<f64> = symbols
        .iter()
        .map(|z| papr_per_stream(&digital_twin(&precoder, z)?))
        .collect::<hbf_papr::Result<Vec<_>>>()?
        .concat();
    let before = ccdf(&before_values)?;
    let suite = bound_suite(
        sim.n_sc,
        &symbols,
        &precoder,
        evm,
        &settings.variants,
        SuiteSettings {
            tol: settings.tol,
            max_iters: settings.max_iters,
        },
    )?;
    let elapsed = start.elapsed();

    let mut files = vec![write_artifact(dir, "bound_before.csv", &prov, |w| before.write_csv(w))?];
    let mut curves = Vec::new();
    for &v in &settings.variants {
        let c = suite.curve(v).expect("variant was solved")?;
        files.push(write_artifact(dir, &bound_file(v), &prov, |w| c.write_csv(w))?);
        curves.push((v, c));
    }
    files.push(write_artifact(dir, "bound_records.csv", &prov, |w| {
        suite.write_records_csv(w)
    })?);

    let mut report = String::new();
    let _ = writeln!(report, "symbols={n_ofdm}");
    let _ = writeln!(report, "evm={evm}");
    let _ = writeln!(report, "tol={}", settings.tol);
    for p in REPORT_LEVELS {
        if let Ok(b) = before.papr_at(p) {
            let _ = writeln!(report, "papr_before_db@{p:e}={b}");
        }
    }
    for (v, c) in &curves {
        let recs: Vec<_> = suite.records.iter().filter(|r| r.variant == *v).collect();
        let worst = recs
            .iter()
            .map(|r| r.gap / r.objective.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        let unconverged = recs.iter().filter(|r| !r.converged).count();
        let _ = writeln!(report, "{}_max_relative_gap={worst}", v.name());
        let _ = writeln!(report, "{}_unconverged={unconverged}", v.name());
        for p in REPORT_LEVELS {
            if let Ok(x) = c.papr_at(p) {
                let _ = writeln!(report, "papr_{}_db@{p:e}={x}", v.name());
            }
        }
    }
    for (i, (va, ca)) in curves.iter().enumerate() {
        for (vb, cb) in &curves[i + 1..] {
            for p in REPORT_LEVELS {
                if let (Ok(a), Ok(b)) = (ca.papr_at(p), cb.papr_at(p)) {
                    let _ = writeln!(report, "gap_{}_minus_{}_db@{p:e}={}", va.name(), vb.name(), a - b);
                }
            }
        }
    }
    let _ = writeln!(report, "runtime_s={}", elapsed.as_secs_f64());
    files.push(write_artifact(dir, "bound_report.txt", &prov, |w| {
        w.write_all(report.as_bytes())
    })?);

    if spec.emit_plots {
        // The power budget is derived from the EVM target.
        let title = format!("PAPR bounds, budget = {:.1}% EVM of ||Z||", evm * 100.0);
        let chart = Chart {
            title: &title,
            x_label: "PAPR (dB)",
            y_label: "CCDF",
            log_y: true,
            provenance: &prov,
        };
        let mut series = vec![ccdf_series("before", &before)];
        series.extend(curves.iter().map(|(v, c)| ccdf_series(v.name(), c)));
        files.push(write_plot(dir, "bound.svg", &chart, &series)?);
    }
    Ok(BoundOutcome {
        suite,
        before,
        report,
        files,
    })
}
