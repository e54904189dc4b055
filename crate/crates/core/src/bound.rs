//! Minimax performance bounds.
//!
//! For one symbol with antenna signal `X` the bound is
//!
//! ```text
//! minimize    max_{a,t} |X - P·dZ·K|_{a,t}
//! subject to  ‖dZ‖_F ≤ max_power
//! ```
//!
//! where `K` is the orthogonal projector onto the occupied band (the SINC
//! circulant scaled by `1/n_fft`) and `P` the precoder. Two relaxations drop
//! one restriction each: [`BoundVariant::UnlimitedSpace`] replaces `P` with a
//! free per-antenna correction, [`BoundVariant::UnlimitedBand`] drops `K`.
//!
//! Any optimal correction lies in the band, so the band-limited variants are
//! parameterized by subcarrier amplitudes on an orthonormal band basis,
//! which leaves the Frobenius norm unchanged.
//!
//! [`solve_bound`] smooths the max-modulus with a log-sum-exp of moduli and
//! runs accelerated projected gradient on the Frobenius ball while shrinking
//! the smoothing temperature. The softmax weights double as a dual point,
//! which certifies the optimality gap: for any `u` with `‖u‖₁ ≤ 1`,
//! `Re⟨u, X⟩ − R‖Aᴴu‖ ≤ optimum`.
//!
//! [`reference_oracle`] is an independent projected-subgradient method for
//! small instances.

use std::f64::consts::PI;
use std::io::{self, Write};

use ndarray::{Array2, Zip};
use rand::Rng;
use rayon::prelude::*;

use crate::ccdf::{ccdf, CcdfCurve};
use crate::dft::centered_bins;
use crate::error::{Error, Result};
use crate::hbf::{digital_twin, Precoder};
use crate::metrics::papr_db;
use crate::rng::{stream, Purpose};
use crate::signal::TimeSignal;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundVariant {
    LimitedBandAndSpace,
    UnlimitedSpace,
    UnlimitedBand,
}

impl BoundVariant {
    pub const ALL: [BoundVariant; 3] = [
        BoundVariant::LimitedBandAndSpace,
        BoundVariant::UnlimitedSpace,
        BoundVariant::UnlimitedBand,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundVariant::LimitedBandAndSpace => "limited_band_and_space",
            BoundVariant::UnlimitedSpace => "unlimited_space",
            BoundVariant::UnlimitedBand => "unlimited_band",
        }
    }
}

impl std::str::FromStr for BoundVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown bound variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundProblem {
    /// Antenna signal, `n_ant × n_fft`.
    pub x: Array2<C64>,
    /// Precoder, `n_ant × n_dac`. Ignored by `UnlimitedSpace`.
    pub precoder: Array2<C64>,
    /// Occupied subcarriers (DC-centred). Ignored by `UnlimitedBand`.
    pub n_sc: usize,
    /// Frobenius budget of the DAC-domain correction.
    pub max_power: f64,
    pub variant: BoundVariant,
}

impl BoundProblem {
    pub fn new(
        x: Array2<C64>,
        precoder: Array2<C64>,
        n_sc: usize,
        max_power: f64,
        variant: BoundVariant,
    ) -> Result<Self> {
        if x.nrows() != precoder.nrows() {
            return Err(Error::Shape(format!(
                "{} antenna rows for a precoder with {} rows",
                x.nrows(),
                precoder.nrows()
            )));
        }
        if x.is_empty() || precoder.ncols() == 0 {
            return Err(Error::Shape("empty bound problem".into()));
        }
        if n_sc == 0 || n_sc > x.ncols() {
            return Err(Error::Shape(format!("n_sc = {n_sc} for n_fft = {}", x.ncols())));
        }
        if !(max_power.is_finite() && max_power >= 0.0) {
            return Err(Error::InvalidConfig(format!("max_power = {max_power}")));
        }
        Ok(BoundProblem {
            x,
            precoder,
            n_sc,
            max_power,
            variant,
        })
    }

    pub fn n_ant(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_fft(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_dac(&self) -> usize {
        self.precoder.ncols()
    }

    /// Radius of the feasible ball in the variable's own domain. The
    /// per-antenna correction of `UnlimitedSpace` lives in the antenna
    /// domain, where a DAC budget `R` maps to `√n_ant·R` through a
    /// precoder with `PᴴP = n_ant·I`.
    pub fn radius(&self) -> f64 {
        match self.variant {
            BoundVariant::UnlimitedSpace => self.max_power * (self.n_ant() as f64).sqrt(),
            _ => self.max_power,
        }
    }

    /// `(rows, cols)` of the optimization variable.
    pub fn variable_shape(&self) -> (usize, usize) {
        match self.variant {
            BoundVariant::LimitedBandAndSpace => (self.n_dac(), self.n_sc),
            BoundVariant::UnlimitedSpace => (self.n_ant(), self.n_sc),
            BoundVariant::UnlimitedBand => (self.n_dac(), self.n_fft()),
        }
    }

    /// Number of real scalars in the optimization variable.
    pub fn real_dimension(&self) -> usize {
        let (r, c) = self.variable_shape();
        2 * r * c
    }
}

/// Orthonormal rows `e^{2πi·m·t/n}/√n` over the occupied bins.
fn band_basis(n_sc: usize, n_fft: usize) -> Array2<C64> {
    let bins = centered_bins(n_sc, n_fft);
    let norm = 1.0 / (n_fft as f64).sqrt();
    Array2::from_shape_fn((n_sc, n_fft), |(m, t)| {
        C64::from_polar(norm, 2.0 * PI * ((bins[m] * t) % n_fft) as f64 / n_fft as f64)
    })
}

fn adjoint_of(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|v| v.conj())
}

/// The linear map from the variable to the antenna-domain correction.
struct Operator {
    variant: BoundVariant,
    p: Array2<C64>,
    p_h: Array2<C64>,
    basis: Array2<C64>,
    basis_h: Array2<C64>,
}

impl Operator {
    fn new(problem: &BoundProblem) -> Self {
        let basis = match problem.variant {
            BoundVariant::UnlimitedBand => Array2::zeros((0, 0)),
            _ => band_basis(problem.n_sc, problem.n_fft()),
        };
        Operator {
            variant: problem.variant,
            p_h: adjoint_of(&problem.precoder),
            p: problem.precoder.clone(),
            basis_h: adjoint_of(&basis),
            basis,
        }
    }

    fn apply(&self, v: &Array2<C64>) -> Array2<C64> {
        match self.variant {
            BoundVariant::LimitedBandAndSpace => self.p.dot(&v.dot(&self.basis)),
            BoundVariant::UnlimitedSpace => v.dot(&self.basis),
            BoundVariant::UnlimitedBand => self.p.dot(v),
        }
    }

    fn adjoint(&self, g: &Array2<C64>) -> Array2<C64> {
        match self.variant {
            BoundVariant::LimitedBandAndSpace => self.p_h.dot(g).dot(&self.basis_h),
            BoundVariant::UnlimitedSpace => g.dot(&self.basis_h),
            BoundVariant::UnlimitedBand => self.p_h.dot(g),
        }
    }

    /// Variable mapped to the time domain (DAC streams, or antenna streams
    /// for `UnlimitedSpace`).
    fn to_time(&self, v: &Array2<C64>) -> Array2<C64> {
        match self.variant {
            BoundVariant::UnlimitedBand => v.clone(),
            _ => v.dot(&self.basis),
        }
    }

    /// `‖A‖²` by power iteration.
    fn norm_sq(&self, shape: (usize, usize)) -> f64 {
        let mut rng = stream(0, Purpose::Test, 0x0b);
        let mut v = Array2::from_shape_fn(shape, |_| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let mut est = 0.0;
        for _ in 0..30 {
            let n = frob(&v);
            if n == 0.0 {
                return 0.0;
            }
            v.mapv_inplace(|x| x / n);
            v = self.adjoint(&self.apply(&v));
            est = frob(&v);
        }
        est
    }
}

fn frob(m: &Array2<C64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn max_modulus(m: &Array2<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn re_inner(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn project_ball(v: &mut Array2<C64>, radius: f64) {
    let n = frob(v);
    if n > radius {
        let s = if n > 0.0 { radius / n } else { 0.0 };
        v.mapv_inplace(|x| x * s);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSolution {
    /// Optimal correction in the time domain: DAC streams (`n_dac × n_fft`),
    /// or antenna streams for `UnlimitedSpace`. Band-limited variants
    /// return it already projected onto the band.
    pub dz: Array2<C64>,
    /// `X` minus the antenna-domain correction.
    pub residual: Array2<C64>,
    /// `max |residual|`.
    pub objective: f64,
    /// Best certified lower bound on the optimum.
    pub lower_bound: f64,
    pub certified_gap: f64,
    pub iterations: usize,
    /// `certified_gap ≤ tol·objective` (or the objective is numerically 0).
    pub converged: bool,
}

impl BoundSolution {
    /// PAPR of every antenna row of the residual.
    pub fn papr_per_antenna(&self) -> Result<Vec<f64>> {
        self.residual.rows().into_iter().map(|r| papr_db(&r.to_vec())).collect()
    }
}

/// Continuation and step settings for [`solve_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSchedule {
    /// Initial temperature as a fraction of `max|X|`.
    pub initial_temperature: f64,
    /// Temperature multiplier between stages.
    pub temperature_decay: f64,
    /// A stage ends once the gap falls below this many smoothing widths.
    pub stage_gap_widths: f64,
    /// A stage also ends after this many iterations.
    pub stage_max_iters: usize,
}

impl Default for SolverSchedule {
    fn default() -> Self {
        SolverSchedule {
            initial_temperature: 0.02,
            temperature_decay: 0.5,
            stage_gap_widths: 2.0,
            stage_max_iters: 400,
        }
    }
}

/// Log-sum-exp of smoothed moduli and its dual weights.
struct Smoothed {
    value: f64,
    /// `w_j · r_j / s_j`, with `Σ|u_j| ≤ 1`.
    u: Array2<C64>,
}

fn smooth(r: &Array2<C64>, mu: f64, eta: f64) -> Smoothed {
    let s: Vec<f64> = r.iter().map(|v| (v.norm_sqr() + eta * eta).sqrt()).collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let e: Vec<f64> = s.iter().map(|&x| ((x - smax) / mu).exp()).collect();
    let z: f64 = e.iter().sum();
    let mut u = Array2::zeros(r.dim());
    for (((uj, rj), sj), ej) in u.iter_mut().zip(r.iter()).zip(&s).zip(&e) {
        *uj = rj * (ej / (z * sj));
    }
    Smoothed {
        value: smax + mu * z.ln(),
        u,
    }
}

fn smooth_value(r: &Array2<C64>, mu: f64, eta: f64) -> f64 {
    let s: Vec<f64> = r.iter().map(|v| (v.norm_sqr() + eta * eta).sqrt()).collect();
    let smax = s.iter().copied().fold(0.0, f64::max);
    let z: f64 = s.iter().map(|&x| ((x - smax) / mu).exp()).sum();
    smax + mu * z.ln()
}

/// ε-suboptimal bound with the default [`SolverSchedule`]. `tol` is
/// relative to the objective.
pub fn solve_bound(problem: &BoundProblem, tol: f64, max_iters: usize) -> Result<BoundSolution> {
    solve_bound_with(problem, tol, max_iters, &SolverSchedule::default())
}

pub fn solve_bound_with(
    problem: &BoundProblem,
    tol: f64,
    max_iters: usize,
    schedule: &SolverSchedule,
) -> Result<BoundSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tol = {tol} must be positive")));
    }
    let op = Operator::new(problem);
    let c = &problem.x;
    let shape = problem.variable_shape();
    let radius = problem.radius();
    let cmax = max_modulus(c);
    let zero_solution = |iterations| BoundSolution {
        dz: op.to_time(&Array2::zeros(shape)),
        residual: c.clone(),
        objective: cmax,
        lower_bound: cmax,
        certified_gap: 0.0,
        iterations,
        converged: true,
    };
    if radius == 0.0 || cmax == 0.0 {
        return Ok(zero_solution(0));
    }
    let norm_sq = op.norm_sq(shape);
    if norm_sq == 0.0 {
        return Ok(zero_solution(0));
    }

    let n_entries = c.len() as f64;
    let log_n = n_entries.ln().max(1.0);
    let eta = 1e-12 * cmax;
    let abs_floor = 1e-12 * cmax;

    let mut v: Array2<C64> = Array2::zeros(shape);
    let mut best_v = v.clone();
    let mut best_f = cmax;
    let mut best_r = c.clone();
    let mut lower = 0.0f64;
    let mut mu = schedule.initial_temperature * cmax;
    let mut lip = norm_sq / mu;
    let mut iterations = 0;
    let mut converged = false;

    'stages: while iterations < max_iters {
        let mut y = v.clone();
        let mut t = 1.0f64;
        let mut f_prev = smooth_value(&(c - &op.apply(&v)), mu, eta);
        let mut stage_iters = 0;
        loop {
            if iterations >= max_iters {
                break 'stages;
            }
            iterations += 1;
            stage_iters += 1;

            let r_y = c - &op.apply(&y);
            let sm = smooth(&r_y, mu, eta);
            let a_h_u = op.adjoint(&sm.u);
            // gradient of the smoothed objective is -Aᴴu
            let l1: f64 = sm.u.iter().map(|x| x.norm()).sum();
            let dual = re_inner(&sm.u, c) - radius * frob(&a_h_u);
            if dual > 0.0 && l1 > 0.0 {
                lower = lower.max(dual / l1);
            }

            let (cand, r_c, f_mu_c) = loop {
                let mut cand = &y + &a_h_u.mapv(|x| x / lip);
                project_ball(&mut cand, radius);
                let r_c = c - &op.apply(&cand);
                let f_mu_c = smooth_value(&r_c, mu, eta);
                let diff = &cand - &y;
                let model = sm.value - re_inner(&a_h_u, &diff) + 0.5 * lip * frob(&diff).powi(2);
                if f_mu_c <= model + 1e-12 * sm.value.abs() || lip > 1e30 {
                    break (cand, r_c, f_mu_c);
                }
                lip *= 2.0;
            };

            let f_c = max_modulus(&r_c);
            if f_c < best_f {
                best_f = f_c;
                best_v = cand.clone();
                best_r = r_c;
            }

            if f_mu_c > f_prev {
                // function-value restart
                t = 1.0;
                y = v.clone();
            } else {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                Zip::from(&mut y)
                    .and(&cand)
                    .and(&v)
                    .for_each(|yy, &cc, &vv| *yy = cc + (cc - vv) * beta);
                t = t_next;
                v = cand;
                f_prev = f_mu_c;
            }
            lip *= 0.97;

            let gap = best_f - lower;
            if gap <= tol * best_f || best_f <= abs_floor {
                converged = true;
                break 'stages;
            }
            if gap <= schedule.stage_gap_widths * mu * log_n || stage_iters >= schedule.stage_max_iters {
                break;
            }
        }
        // next stage restarts from the best point at a lower temperature
        v = best_v.clone();
        mu *= schedule.temperature_decay;
        lip /= schedule.temperature_decay;
    }

    Ok(BoundSolution {
        dz: op.to_time(&best_v),
        residual: best_r,
        objective: best_f,
        lower_bound: lower.min(best_f),
        certified_gap: (best_f - lower).max(0.0),
        iterations,
        converged,
    })
}

/// Objective `max|X - A·v|` at an arbitrary variable `v` (in the
/// variable's own coordinates, see [`BoundProblem::variable_shape`]).
pub fn objective_at(problem: &BoundProblem, v: &Array2<C64>) -> Result<f64> {
    if v.dim() != problem.variable_shape() {
        return Err(Error::Shape(format!(
            "variable {:?} for shape {:?}",
            v.dim(),
            problem.variable_shape()
        )));
    }
    let op = Operator::new(problem);
    Ok(max_modulus(&(&problem.x - &op.apply(v))))
}

/// Settings of the multi-start subgradient oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub starts: usize,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub step_decay: f64,
    pub seed: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            starts: 4,
            epochs: 80,
            iters_per_epoch: 600,
            step_decay: 0.75,
            seed: 0x5eed,
        }
    }
}

/// Largest variable the oracle accepts, in real scalars.
pub const ORACLE_DIMENSION_CAP: usize = 64;

/// Best objective found by projected subgradient descent from several
/// seeded starts. Steps are normalized and shrink geometrically from epoch
/// to epoch, each epoch restarting at the best point so far.
///
/// The map is assembled here column by column from its definition so that
/// the oracle shares nothing with [`solve_bound`] beyond the problem data.
pub fn reference_oracle(problem: &BoundProblem, settings: &OracleSettings) -> Result<f64> {
    let dim = problem.real_dimension();
    if dim > ORACLE_DIMENSION_CAP {
        return Err(Error::OracleTooLarge {
            dim,
            cap: ORACLE_DIMENSION_CAP,
        });
    }
    let c: Vec<C64> = problem.x.iter().copied().collect();
    let cmax = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let radius = problem.radius();
    if radius == 0.0 || cmax == 0.0 {
        return Ok(cmax);
    }
    let m = dense_map(problem);
    let n_var = m.ncols();
    let col_norm = m
        .columns()
        .into_iter()
        .map(|col| col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let step0 = radius.min(2.0 * cmax / col_norm.max(1e-300));

    let residual = |v: &[C64]| -> Vec<C64> {
        c.iter()
            .enumerate()
            .map(|(j, cj)| cj - m.row(j).iter().zip(v).map(|(a, b)| a * b).sum::<C64>())
            .collect()
    };
    let objective = |r: &[C64]| r.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let project = |v: &mut Vec<C64>| {
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n > radius {
            v.iter_mut().for_each(|x| *x *= radius / n);
        }
    };

    let mut rng = stream(settings.seed, Purpose::Test, 0x0c);
    let mut overall = cmax;
    for start in 0..settings.starts.max(1) {
        let mut v: Vec<C64> = if start == 0 {
            vec![ZERO; n_var]
        } else {
            (0..n_var)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * radius)
                .collect()
        };
        project(&mut v);
        let mut best_v = v.clone();
        let mut best_f = objective(&residual(&v));
        let mut step = step0;
        for _ in 0..settings.epochs {
            v.clone_from(&best_v);
            for _ in 0..settings.iters_per_epoch {
                let r = residual(&v);
                let (j, rj) = r
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                    .map(|(j, v)| (j, *v))
                    .expect("nonempty");
                let f = rj.norm();
                if f < best_f {
                    best_f = f;
                    best_v.clone_from(&v);
                }
                if f == 0.0 {
                    break;
                }
                // subgradient of |c_j - m_j·v| is -conj(m_j)·r_j/|r_j|
                let phase = rj / f;
                let g: Vec<C64> = m.row(j).iter().map(|a| -(a.conj() * phase)).collect();
                let gn = g.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if gn == 0.0 {
                    break;
                }
                v.iter_mut().zip(&g).for_each(|(x, gx)| *x -= gx * (step / gn));
                project(&mut v);
            }
            let f = objective(&residual(&best_v));
            best_f = best_f.min(f);
            step *= settings.step_decay;
        }
        overall = overall.min(best_f);
    }
    Ok(overall)
}

/// Dense `N × n` matrix of the correction map, rows in `(antenna, time)`
/// row-major order, columns in the variable's row-major order.
fn dense_map(problem: &BoundProblem) -> Array2<C64> {
    let (n_ant, n_fft, n_dac) = (problem.n_ant(), problem.n_fft(), problem.n_dac());
    let (rows, cols) = problem.variable_shape();
    let norm = 1.0 / (n_fft as f64).sqrt();
    let bins = centered_bins(problem.n_sc, n_fft);
    let tone = |m: usize, t: usize| C64::from_polar(norm, 2.0 * PI * (bins[m] as f64) * (t as f64) / n_fft as f64);
    let p = &problem.precoder;
    Array2::from_shape_fn((n_ant * n_fft, rows * cols), |(j, k)| {
        let (a, t) = (j / n_fft, j % n_fft);
        let (r, q) = (k / cols, k % cols);
        match problem.variant {
            BoundVariant::LimitedBandAndSpace => p[[a, r]] * tone(q, t),
            BoundVariant::UnlimitedSpace => {
                if a == r {
                    tone(q, t)
                } else {
                    ZERO
                }
            }
            BoundVariant::UnlimitedBand => {
                debug_assert!(r < n_dac);
                if t == q {
                    p[[a, r]]
                } else {
                    ZERO
                }
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRecord {
    pub variant: BoundVariant,
    pub symbol: usize,
    pub objective: f64,
    pub iterations: usize,
    pub gap: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct BoundSuiteOutcome {
    /// Per variant: PAPR of every (antenna, symbol) pair, symbol-major.
    pub papr: Vec<(BoundVariant, Vec<f64>)>,
    pub records: Vec<BoundRecord>,
}

pub const BOUND_RECORD_CSV_HEADER: &str = "variant,symbol,objective,iterations,gap";

impl BoundSuiteOutcome {
    pub fn curve(&self, variant: BoundVariant) -> Option<Result<CcdfCurve>> {
        self.papr
            .iter()
            .find(|(v, _)| *v == variant)
            .map(|(_, values)| ccdf(values))
    }

    pub fn write_records_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{BOUND_RECORD_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.variant.name(),
                r.symbol,
                r.objective,
                r.iterations,
                r.gap
            )?;
        }
        Ok(())
    }
}

/// Solver knobs shared by every solve of a suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteSettings {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SuiteSettings {
    fn default() -> Self {
        SuiteSettings {
            tol: 1e-3,
            max_iters: 20_000,
        }
    }
}

/// Solves every symbol under every variant with
/// `max_power = evm_budget·‖Z_symbol‖_F` and collects per-antenna PAPR of
/// the corrected antenna signals.
pub fn bound_suite(
    n_sc: usize,
    symbols: &[TimeSignal],
    precoder: &Precoder,
    evm_budget: f64,
    variants: &[BoundVariant],
    settings: SuiteSettings,
) -> Result<BoundSuiteOutcome> {
    let twins: Vec<(Array2<C64>, f64)> = symbols
        .iter()
        .map(|z| Ok((digital_twin(precoder, z)?.into_data(), z.frobenius_norm())))
        .collect::<Result<_>>()?;
    let jobs: Vec<(BoundVariant, usize)> = variants
        .iter()
        .flat_map(|&v| (0..symbols.len()).map(move |s| (v, s)))
        .collect();
    let solved: Vec<(BoundVariant, usize, BoundSolution)> = jobs
        .par_iter()
        .map(|&(variant, s)| {
            let (x, znorm) = &twins[s];
            let problem = BoundProblem::new(x.clone(), precoder.matrix().clone(), n_sc, evm_budget * znorm, variant)?;
            Ok((variant, s, solve_bound(&problem, settings.tol, settings.max_iters)?))
        })
        .collect::<Result<_>>()?;

    let mut papr = Vec::new();
    let mut records = Vec::new();
    for &variant in variants {
        let mut values = Vec::new();
        for (v, s, sol) in solved.iter().filter(|(v, _, _)| *v == variant) {
            values.extend(sol.papr_per_antenna()?);
            records.push(BoundRecord {
                variant: *v,
                symbol: *s,
                objective: sol.objective,
                iterations: sol.iterations,
                gap: sol.certified_gap,
                converged: sol.converged,
            });
        }
        papr.push((variant, values));
    }
    Ok(BoundSuiteOutcome { papr, records })
}
