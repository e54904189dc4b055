//! Fully-connected hybrid beamforming: precoder, digital twin, projections
//! of the antenna-domain correction into the DAC subspace, and the
//! end-to-end reduction pipeline.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;

use crate::ccdf::{ccdf, CcdfCurve};
use crate::config::SimConfig;
use crate::dft::Dft;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::signal::{Domain, TimeSignal};
use crate::tone::{build_sinc, iterate_str, windowed_kernel, SincKernel, ThresholdSchedule};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Analog phase-shifter network `P` (`n_ant × n_dac`).
///
/// Built from distinct columns of the `n_ant`-point DFT matrix, so every
/// entry has unit modulus and `PᴴP = n_ant·I`. Products with `P` and `Pᴴ`
/// then reduce to one `n_ant`-point transform per time sample.
#[derive(Debug, Clone)]
pub struct Precoder {
    matrix: Array2<C64>,
    column_bins: Option<Vec<usize>>,
    dft: Dft,
}

pub fn build_precoder(n_ant: usize, n_dac: usize, seed: u64) -> Result<Precoder> {
    if n_dac == 0 || n_dac > n_ant {
        return Err(Error::Shape(format!("cannot pick {n_dac} of {n_ant} DFT columns")));
    }
    let mut rng = stream(seed, Purpose::Precoder, 0);
    let bins = rand::seq::index::sample(&mut rng, n_ant, n_dac).into_vec();
    Ok(Precoder::from_dft_columns(n_ant, bins))
}

impl Precoder {
    /// Columns `e^{2πi·a·b/n_ant}` for each bin `b`.
    pub fn from_dft_columns(n_ant: usize, bins: Vec<usize>) -> Self {
        let matrix = Array2::from_shape_fn((n_ant, bins.len()), |(a, k)| {
            C64::from_polar(1.0, 2.0 * PI * ((a * bins[k]) % n_ant) as f64 / n_ant as f64)
        });
        Precoder {
            matrix,
            column_bins: Some(bins),
            dft: Dft::new(n_ant),
        }
    }

    /// Arbitrary precoder; products use dense matrix algebra.
    pub fn from_matrix(matrix: Array2<C64>) -> Result<Self> {
        if matrix.is_empty() {
            return Err(Error::Shape("empty precoder".into()));
        }
        let n_ant = matrix.nrows();
        Ok(Precoder {
            matrix,
            column_bins: None,
            dft: Dft::new(n_ant),
        })
    }

    pub fn n_ant(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_dac(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn column_bins(&self) -> Option<&[usize]> {
        self.column_bins.as_deref()
    }

    pub fn row(&self, antenna: usize) -> ArrayView1<'_, C64> {
        self.matrix.row(antenna)
    }
}

fn conj_transpose(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|v| v.conj())
}

/// Antenna signal `X = P·Z`. Uses one inverse `n_ant`-point FFT per time
/// sample when the precoder is a DFT submatrix.
pub fn digital_twin(p: &Precoder, z: &TimeSignal) -> Result<TimeSignal> {
    z.expect_domain(Domain::Dac)?;
    if z.streams() != p.n_dac() {
        return Err(Error::Shape(format!(
            "{} DAC streams for a precoder with {} columns",
            z.streams(),
            p.n_dac()
        )));
    }
    let Some(bins) = p.column_bins() else {
        return digital_twin_direct(p, z);
    };
    let (n_ant, n_fft) = (p.n_ant(), z.n_fft());
    let zd = z.data();
    let mut out = Array2::zeros((n_ant, n_fft));
    let mut buf = vec![ZERO; n_ant];
    for t in 0..n_fft {
        buf.iter_mut().for_each(|v| *v = ZERO);
        for (k, &b) in bins.iter().enumerate() {
            buf[b] += zd[[k, t]];
        }
        p.dft.inverse_unscaled(&mut buf);
        out.column_mut(t).iter_mut().zip(&buf).for_each(|(o, v)| *o = *v);
    }
    Ok(TimeSignal::from_parts(out, Domain::Antenna))
}

/// `X = P·Z` as a dense matrix product.
pub fn digital_twin_direct(p: &Precoder, z: &TimeSignal) -> Result<TimeSignal> {
    z.expect_domain(Domain::Dac)?;
    if z.streams() != p.n_dac() {
        return Err(Error::Shape(format!(
            "{} DAC streams for a precoder with {} columns",
            z.streams(),
            p.n_dac()
        )));
    }
    Ok(TimeSignal::from_parts(p.matrix.dot(&z.data()), Domain::Antenna))
}

/// Least-squares DAC correction of a dense antenna-domain correction:
/// `ΔZ = (coef/n_ant)·Pᴴ·ΔX`.
pub fn ls1_project(dx: &TimeSignal, p: &Precoder, coef: f64) -> Result<TimeSignal> {
    dx.expect_domain(Domain::Antenna)?;
    if dx.streams() != p.n_ant() {
        return Err(Error::Shape(format!(
            "{} antenna streams for a precoder with {} rows",
            dx.streams(),
            p.n_ant()
        )));
    }
    let Some(bins) = p.column_bins() else {
        return ls1_project_direct(dx, p, coef);
    };
    let (n_ant, n_fft) = (p.n_ant(), dx.n_fft());
    let scale = coef / n_ant as f64;
    let xd = dx.data();
    let mut out = Array2::zeros((p.n_dac(), n_fft));
    let mut buf = vec![ZERO; n_ant];
    for t in 0..n_fft {
        buf.iter_mut().zip(xd.column(t)).for_each(|(b, v)| *b = *v);
        p.dft.forward(&mut buf);
        for (k, &b) in bins.iter().enumerate() {
            out[[k, t]] = buf[b] * scale;
        }
    }
    Ok(TimeSignal::from_parts(out, Domain::Dac))
}

pub fn ls1_project_direct(dx: &TimeSignal, p: &Precoder, coef: f64) -> Result<TimeSignal> {
    dx.expect_domain(Domain::Antenna)?;
    let scale = coef / p.n_ant() as f64;
    let out = conj_transpose(&p.matrix).dot(&dx.data()).mapv(|v| v * scale);
    Ok(TimeSignal::from_parts(out, Domain::Dac))
}

/// Kernel amplitudes found by per-antenna tone reservation, one sparse row
/// per antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeGrid {
    n_fft: usize,
    rows: Vec<BTreeMap<usize, C64>>,
}

impl AmplitudeGrid {
    pub fn new(n_ant: usize, n_fft: usize) -> Self {
        AmplitudeGrid {
            n_fft,
            rows: vec![BTreeMap::new(); n_ant],
        }
    }

    pub fn from_rows(n_fft: usize, rows: Vec<BTreeMap<usize, C64>>) -> Result<Self> {
        if let Some(i) = rows.iter().flat_map(|r| r.keys()).find(|&&i| i >= n_fft) {
            return Err(Error::Shape(format!("amplitude index {i} beyond n_fft = {n_fft}")));
        }
        Ok(AmplitudeGrid { n_fft, rows })
    }

    pub fn add(&mut self, antenna: usize, index: usize, amplitude: C64) {
        *self.rows[antenna].entry(index).or_insert(ZERO) += amplitude;
    }

    pub fn rows(&self) -> &[BTreeMap<usize, C64>] {
        &self.rows
    }

    pub fn n_ant(&self) -> usize {
        self.rows.len()
    }

    pub fn entries(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    /// Dense antenna-domain correction `ΔX`: every row's amplitudes
    /// spread through the kernel.
    pub fn expand(&self, kernel: &SincKernel) -> TimeSignal {
        let mut out = Array2::zeros((self.rows.len(), self.n_fft));
        for (row, mut dst) in self.rows.iter().zip(out.rows_mut()) {
            let slice = dst.as_slice_mut().expect("row-major");
            for (&i, &a) in row {
                kernel.add_shifted(slice, i, a);
            }
        }
        TimeSignal::from_parts(out, Domain::Antenna)
    }
}

/// Sparse-amplitude DAC correction. For every time index `i` carrying
/// amplitudes, `δzᵢ = (coef/n_ant)·Pᵢᴴ·Δx̃ᵢ` over the antennas with an entry
/// at `i`; the DAC streams are then `ΔZ(:,t) = Σᵢ δzᵢ·tap(t - i)`.
pub fn ls2_project(
    amplitudes: &AmplitudeGrid,
    p: &Precoder,
    coef: f64,
    kernel: &SincKernel,
    dft: &Dft,
) -> Result<TimeSignal> {
    if amplitudes.n_ant() != p.n_ant() || amplitudes.n_fft != kernel.n_fft() {
        return Err(Error::Shape(format!(
            "amplitude grid {}×{} for precoder rows {} and kernel {}",
            amplitudes.n_ant(),
            amplitudes.n_fft,
            p.n_ant(),
            kernel.n_fft()
        )));
    }
    let (n_dac, n_fft) = (p.n_dac(), kernel.n_fft());
    let scale = coef / p.n_ant() as f64;
    // impulses[k][i] = δz_i[k]
    let mut impulses = vec![vec![ZERO; n_fft]; n_dac];
    for (a, row) in amplitudes.rows.iter().enumerate() {
        let prow = p.row(a);
        for (&i, &amp) in row {
            let amp = amp * scale;
            for (k, pk) in prow.iter().enumerate() {
                impulses[k][i] += pk.conj() * amp;
            }
        }
    }
    let mut out = Array2::zeros((n_dac, n_fft));
    for (imp, mut dst) in impulses.iter().zip(out.rows_mut()) {
        let conv = kernel.convolve(imp, dft);
        dst.iter_mut().zip(conv).for_each(|(d, v)| *d = v);
    }
    Ok(TimeSignal::from_parts(out, Domain::Dac))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Projection {
    /// Dense `ΔX` through `Pᴴ`.
    Ls1,
    /// Kernel amplitudes through the matching precoder rows.
    #[default]
    Ls2,
}

impl std::str::FromStr for Projection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls1" => Ok(Projection::Ls1),
            "ls2" => Ok(Projection::Ls2),
            other => Err(Error::InvalidConfig(format!("unknown projection `{other}`"))),
        }
    }
}

impl std::fmt::Display for Projection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Projection::Ls1 => "ls1",
            Projection::Ls2 => "ls2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub schedule: ThresholdSchedule,
    pub projection: Projection,
    /// Kernel window length; `None` keeps the full band-limited kernel.
    pub window: Option<usize>,
}

impl PipelineParams {
    /// Trained operating point for two iterations.
    pub fn trained() -> Self {
        PipelineParams {
            schedule: ThresholdSchedule::new(0.85, vec![1.76, 1.68]).expect("positive constants"),
            projection: Projection::Ls2,
            window: None,
        }
    }

    pub fn from_genes(genes: &[f64]) -> Result<Self> {
        Ok(PipelineParams {
            schedule: ThresholdSchedule::from_genes(genes)?,
            projection: Projection::Ls2,
            window: None,
        })
    }
}

/// Per-symbol measurements. PAPR vectors hold one value per antenna:
/// on the twin `X`, after per-antenna tone reservation, and on `P·Ẑ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolReport {
    pub papr_twin: Vec<f64>,
    pub papr_str: Vec<f64>,
    pub papr_out: Vec<f64>,
    pub peaks: usize,
    pub delta_energy: f64,
    pub signal_energy: f64,
}

impl SymbolReport {
    pub fn evm(&self) -> f64 {
        (self.delta_energy / self.signal_energy).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct SymbolOutcome {
    pub z_hat: TimeSignal,
    pub delta_z: TimeSignal,
    /// Accumulated per-antenna tone-reservation correction.
    pub delta_x: TimeSignal,
    pub amplitudes: AmplitudeGrid,
    pub report: SymbolReport,
    pub timing: StageTiming,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTiming {
    pub twin: Duration,
    pub tone_reservation: Duration,
    pub projection: Duration,
}

impl std::ops::AddAssign for StageTiming {
    fn add_assign(&mut self, o: Self) {
        self.twin += o.twin;
        self.tone_reservation += o.tone_reservation;
        self.projection += o.projection;
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub z_hat: Vec<TimeSignal>,
    pub delta_z: Vec<TimeSignal>,
    pub symbols: Vec<SymbolReport>,
    pub timing: StageTiming,
    pub elapsed: Duration,
    pub evm_budget: f64,
}

impl RunOutcome {
    pub fn evm(&self) -> f64 {
        let (d, s) = self
            .symbols
            .iter()
            .fold((0.0, 0.0), |(d, s), r| (d + r.delta_energy, s + r.signal_energy));
        (d / s).sqrt()
    }

    pub fn evm_over_budget(&self) -> bool {
        self.evm() > self.evm_budget
    }

    pub fn papr_before(&self) -> Vec<f64> {
        self.symbols.iter().flat_map(|r| r.papr_twin.iter().copied()).collect()
    }

    pub fn papr_str(&self) -> Vec<f64> {
        self.symbols.iter().flat_map(|r| r.papr_str.iter().copied()).collect()
    }

    pub fn papr_after(&self) -> Vec<f64> {
        self.symbols.iter().flat_map(|r| r.papr_out.iter().copied()).collect()
    }

    pub fn ccdf_before(&self) -> Result<CcdfCurve> {
        ccdf(&self.papr_before())
    }

    pub fn ccdf_after(&self) -> Result<CcdfCurve> {
        ccdf(&self.papr_after())
    }

    /// `key=value` summary, one per line.
    pub fn to_key_values(&self, levels: &[f64]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "symbols={}", self.symbols.len());
        let _ = writeln!(s, "evm={}", self.evm());
        let _ = writeln!(s, "evm_budget={}", self.evm_budget);
        let _ = writeln!(s, "evm_over_budget={}", self.evm_over_budget());
        let peaks: usize = self.symbols.iter().map(|r| r.peaks).sum();
        let _ = writeln!(s, "peaks={peaks}");
        for (name, values) in [
            ("twin", self.papr_before()),
            ("str", self.papr_str()),
            ("out", self.papr_after()),
        ] {
            if let Ok(curve) = ccdf(&values) {
                for &p in levels {
                    if let Ok(v) = curve.papr_at(p) {
                        let _ = writeln!(s, "papr_{name}_db@{p:e}={v}");
                    }
                }
            }
        }
        let _ = writeln!(s, "runtime_twin_s={}", self.timing.twin.as_secs_f64());
        let _ = writeln!(s, "runtime_str_s={}", self.timing.tone_reservation.as_secs_f64());
        let _ = writeln!(s, "runtime_projection_s={}", self.timing.projection.as_secs_f64());
        let _ = writeln!(s, "runtime_wall_s={}", self.elapsed.as_secs_f64());
        s
    }

    pub const SYMBOL_CSV_HEADER: &'static str = "symbol,peaks,evm,papr_twin_max_db,papr_str_max_db,papr_out_max_db";

    /// One row per symbol. Contains no timings, so reruns are byte-identical.
    pub fn write_symbol_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::SYMBOL_CSV_HEADER)?;
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (k, r) in self.symbols.iter().enumerate() {
            writeln!(
                w,
                "{k},{},{},{},{},{}",
                r.peaks,
                r.evm(),
                max(&r.papr_twin),
                max(&r.papr_str),
                max(&r.papr_out)
            )?;
        }
        Ok(())
    }
}

/// Per-antenna PAPR; an all-zero stream reports NaN.
fn papr_or_nan(x: &TimeSignal) -> Vec<f64> {
    (0..x.streams())
        .map(|k| crate::metrics::papr_db(x.stream_slice(k)).unwrap_or(f64::NAN))
        .collect()
}

/// The reduction pipeline: digital twin, per-antenna iterated tone
/// reservation, projection of the correction into the DAC subspace.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: SimConfig,
    precoder: Precoder,
    params: PipelineParams,
    kernel: SincKernel,
    dft: Dft,
}

impl Pipeline {
    pub fn new(cfg: &SimConfig, precoder: Precoder, params: PipelineParams) -> Result<Self> {
        cfg.validate()?;
        params.schedule.validate()?;
        if params.schedule.n_iter() != cfg.n_iter {
            return Err(Error::InvalidConfig(format!(
                "schedule has {} thresholds, n_iter = {}",
                params.schedule.n_iter(),
                cfg.n_iter
            )));
        }
        if precoder.n_ant() != cfg.n_ant || precoder.n_dac() != cfg.n_dac {
            return Err(Error::Shape(format!(
                "precoder {}×{} for n_ant = {}, n_dac = {}",
                precoder.n_ant(),
                precoder.n_dac(),
                cfg.n_ant,
                cfg.n_dac
            )));
        }
        let mut kernel = build_sinc(cfg.n_fft, cfg.n_sc)?;
        if let Some(w) = params.window {
            kernel = windowed_kernel(&kernel, w)?;
        }
        Ok(Pipeline {
            cfg: cfg.clone(),
            precoder,
            params,
            kernel,
            dft: Dft::new(cfg.n_fft),
        })
    }

    /// Replaces the reduction kernel, e.g. with a windowed or perturbed one.
    pub fn with_kernel(mut self, kernel: SincKernel) -> Result<Self> {
        if kernel.n_fft() != self.cfg.n_fft || kernel.n_sc() != self.cfg.n_sc {
            return Err(Error::Shape(format!(
                "kernel for n_fft = {}, n_sc = {} in a pipeline with n_fft = {}, n_sc = {}",
                kernel.n_fft(),
                kernel.n_sc(),
                self.cfg.n_fft,
                self.cfg.n_sc
            )));
        }
        self.kernel = kernel;
        Ok(self)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn precoder(&self) -> &Precoder {
        &self.precoder
    }

    pub fn params(&self) -> &PipelineParams {
        &self.params
    }

    pub fn kernel(&self) -> &SincKernel {
        &self.kernel
    }

    pub fn process_symbol(&self, z: &TimeSignal) -> Result<SymbolOutcome> {
        if z.n_fft() != self.cfg.n_fft {
            return Err(Error::Shape(format!(
                "symbol of {} samples for n_fft = {}",
                z.n_fft(),
                self.cfg.n_fft
            )));
        }
        let t0 = Instant::now();
        let x = digital_twin(&self.precoder, z)?;
        let t1 = Instant::now();

        let n_ant = self.cfg.n_ant;
        let mut amplitudes = AmplitudeGrid::new(n_ant, self.cfg.n_fft);
        let mut delta_x = Array2::zeros((n_ant, self.cfg.n_fft));
        let mut peaks = 0;
        for a in 0..n_ant {
            let out = iterate_str(x.stream_slice(a), &self.params.schedule, self.cfg.n_b, &self.kernel)?;
            peaks += out.peaks_per_iter.iter().sum::<usize>();
            for (&i, &amp) in &out.amplitudes {
                amplitudes.add(a, i, amp);
            }
            delta_x.row_mut(a).iter_mut().zip(&out.delta).for_each(|(d, v)| *d = *v);
        }
        let delta_x = TimeSignal::from_parts(delta_x, Domain::Antenna);
        let t2 = Instant::now();

        let coef = self.params.schedule.coef;
        let delta_z = match self.params.projection {
            Projection::Ls1 => ls1_project(&delta_x, &self.precoder, coef)?,
            Projection::Ls2 => ls2_project(&amplitudes, &self.precoder, coef, &self.kernel, &self.dft)?,
        };
        let z_hat = z.sub(&delta_z)?;
        let t3 = Instant::now();

        let x_str = x.sub(&delta_x)?;
        let x_hat = digital_twin(&self.precoder, &z_hat)?;
        let report = SymbolReport {
            papr_twin: papr_or_nan(&x),
            papr_str: papr_or_nan(&x_str),
            papr_out: papr_or_nan(&x_hat),
            peaks,
            delta_energy: delta_z.frobenius_norm().powi(2),
            signal_energy: z.frobenius_norm().powi(2),
        };
        Ok(SymbolOutcome {
            z_hat,
            delta_z,
            delta_x,
            amplitudes,
            report,
            timing: StageTiming {
                twin: t1 - t0,
                tone_reservation: t2 - t1,
                projection: t3 - t2,
            },
        })
    }

    /// Processes symbols independently and in parallel; output order follows
    /// input order.
    pub fn run(&self, symbols: &[TimeSignal]) -> Result<RunOutcome> {
        let start = Instant::now();
        let outcomes: Vec<SymbolOutcome> = symbols
            .par_iter()
            .map(|z| self.process_symbol(z))
            .collect::<Result<_>>()?;
        let mut timing = StageTiming::default();
        let mut run = RunOutcome {
            z_hat: Vec::with_capacity(outcomes.len()),
            delta_z: Vec::with_capacity(outcomes.len()),
            symbols: Vec::with_capacity(outcomes.len()),
            timing,
            elapsed: Duration::ZERO,
            evm_budget: self.cfg.evm_budget,
        };
        for o in outcomes {
            timing += o.timing;
            run.z_hat.push(o.z_hat);
            run.delta_z.push(o.delta_z);
            run.symbols.push(o.report);
        }
        run.timing = timing;
        run.elapsed = start.elapsed();
        Ok(run)
    }
}
