//! Oracle-equivalence checks runnable from a fresh checkout.
//!
//! Each check is also usable on its own with larger workloads; the
//! `selftest` subcommand runs them at desk scale.

use std::time::{Duration, Instant};

use anyhow::Result;
use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use hbf_papr::bound::{reference_oracle, solve_bound, OracleSettings};
use hbf_papr::dft::Dft;
use hbf_papr::hbf::{build_precoder, digital_twin, digital_twin_direct, ls1_project};
use hbf_papr::metrics::out_of_band_rejection_db;
use hbf_papr::rng::{stream, Purpose};
use hbf_papr::signal::generate_dac_symbols;
use hbf_papr::tone::{build_sinc, dense_ls_project_band, sparse_reduce, threshold_excess, Peak, PeakSet};
use hbf_papr::{
    BoundProblem, BoundVariant, Domain, Pipeline, PipelineParams, Projection, SimConfig, SincKernel, TimeSignal, C64,
};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<22} {:<6} {:>9}  detail\n", "check", "result", "time_s");
        for c in &self.checks {
            s.push_str(&format!(
                "{:<22} {:<6} {:>9.3}  {}\n",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.elapsed.as_secs_f64(),
                c.detail
            ));
        }
        s
    }
}

fn random_c64(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

/// Largest relative deviation between `(n_sc/n_fft)·` the sparse SINC sum
/// and the FFT-based least-squares projection of the same peaks, over
/// `symbols` random peak sets with 1 to `max_peaks` peaks.
pub fn sparse_dense_error(kernel: &SincKernel, symbols: usize, max_peaks: usize, seed: u64) -> Result<f64> {
    let n = kernel.n_fft();
    let scale = kernel.n_sc() as f64 / n as f64;
    let worst = (0..symbols)
        .into_par_iter()
        .map(|s| -> Result<f64> {
            let dft = Dft::new(n);
            let mut rng = stream(seed, Purpose::Test, s as u64);
            let k = rng.random_range(1..=max_peaks);
            let idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
            let mut y = vec![C64::new(0.0, 0.0); n];
            let mut peaks = PeakSet::default();
            for i in idx {
                let a = random_c64(&mut rng) * 4.0;
                y[i] = a;
                peaks.peaks.push(Peak { index: i, amplitude: a });
            }
            peaks.peaks.sort_by_key(|p| p.index);
            let x = vec![C64::new(0.0, 0.0); n];
            let (dx, _) = sparse_reduce(&x, &peaks, kernel)?;
            let dense = dense_ls_project_band(&y, kernel, &dft)?;
            let peak = dense.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let err = dx
                .iter()
                .zip(&dense)
                .map(|(a, b)| (a * scale - b).norm())
                .fold(0.0, f64::max);
            Ok(err / peak)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Largest `|max|x − y| − τ|` over symbols whose peak exceeds `τ`, and
/// the number of such symbols.
pub fn clipping_error(n_fft: usize, symbols: usize, seed: u64) -> (f64, usize) {
    (0..symbols)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream(seed, Purpose::Test, 1 << 32 | s as u64);
            let x: Vec<C64> = (0..n_fft).map(|_| random_c64(&mut rng)).collect();
            let peak = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let tau = peak * rng.random_range(0.3..1.2);
            if peak <= tau {
                return (0.0, 0);
            }
            let y = threshold_excess(&x, tau);
            let clipped = x.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            ((clipped - tau).abs(), 1)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1))
}

/// Worst deviation of the fast twin from the direct product.
pub fn twin_error(cfg: &SimConfig, symbols: usize, seed: u64) -> Result<f64> {
    let p = build_precoder(cfg.n_ant, cfg.n_dac, seed)?;
    let mut worst = 0.0f64;
    for z in generate_dac_symbols(cfg, seed, 0, symbols)? {
        let fast = digital_twin(&p, &z)?;
        let direct = digital_twin_direct(&p, &z)?;
        let scale = direct.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = fast
            .data()
            .iter()
            .zip(direct.data().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    Ok(worst)
}

/// `(max |ls1(P·Z) − Z| / max|Z|, max |PᴴP − n_ant·I| / n_ant)` over seeds.
pub fn projector_errors(cfg: &SimConfig, seeds: std::ops::Range<u64>) -> Result<(f64, f64)> {
    let mut inv = 0.0f64;
    let mut orth = 0.0f64;
    for seed in seeds {
        let p = build_precoder(cfg.n_ant, cfg.n_dac, seed)?;
        let m = p.matrix();
        let gram = m.t().mapv(|v| v.conj()).dot(m);
        let eye = Array2::from_shape_fn(gram.dim(), |(i, j)| {
            C64::new(if i == j { cfg.n_ant as f64 } else { 0.0 }, 0.0)
        });
        let g = (&gram - &eye).iter().map(|v| v.norm()).fold(0.0, f64::max) / cfg.n_ant as f64;
        orth = orth.max(g);
        let z = generate_dac_symbols(cfg, seed, 0, 1)?.remove(0);
        let back = ls1_project(
            &TimeSignal::new(digital_twin(&p, &z)?.into_data(), Domain::Antenna)?,
            &p,
            1.0,
        )?;
        let scale = z.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let e = back
            .data()
            .iter()
            .zip(z.data().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        inv = inv.max(e / scale);
    }
    Ok((inv, orth))
}

/// Worst out-of-band rejection over every `Δx` and `ΔZ` the pipeline
/// emits for `symbols` symbols, under both projections.
pub fn band_rejection(cfg: &SimConfig, symbols: usize, kernel: Option<&SincKernel>) -> Result<f64> {
    let p = build_precoder(cfg.n_ant, cfg.n_dac, cfg.rng_seed)?;
    let batch = generate_dac_symbols(cfg, cfg.rng_seed, 0, symbols)?;
    let mut worst = f64::INFINITY;
    for projection in [Projection::Ls1, Projection::Ls2] {
        let mut params = PipelineParams::trained();
        params.projection = projection;
        params
            .schedule
            .tau_norm
            .resize(cfg.n_iter, *params.schedule.tau_norm.last().expect("nonempty"));
        let mut pl = Pipeline::new(cfg, p.clone(), params)?;
        if let Some(k) = kernel {
            pl = pl.with_kernel(k.clone())?;
        }
        let parts =
            batch
                .par_iter()
                .map(|z| -> Result<f64> {
                    let o = pl.process_symbol(z)?;
                    if o.report.peaks == 0 {
                        return Ok(f64::INFINITY);
                    }
                    Ok(out_of_band_rejection_db(&o.delta_x, cfg.n_sc)?
                        .min(out_of_band_rejection_db(&o.delta_z, cfg.n_sc)?))
                })
                .collect::<Result<Vec<_>>>()?;
        worst = parts.into_iter().fold(worst, f64::min);
    }
    Ok(worst)
}

/// Tiny bound instance: `n_ant = 4`, `n_dac = 2`, `n_fft = 16`, `n_sc = 8`,
/// 13.5% EVM budget.
pub fn tiny_bound_problem(seed: u64, variant: BoundVariant) -> Result<BoundProblem> {
    let cfg = SimConfig {
        n_fft: 16,
        n_sc: 8,
        n_ant: 4,
        n_dac: 2,
        n_b: 2,
        ..SimConfig::default()
    };
    let p = build_precoder(cfg.n_ant, cfg.n_dac, seed)?;
    let z = generate_dac_symbols(&cfg, seed, 0, 1)?.remove(0);
    let x = digital_twin(&p, &z)?.into_data();
    Ok(BoundProblem::new(
        x,
        p.matrix().clone(),
        cfg.n_sc,
        cfg.evm_budget * z.frobenius_norm(),
        variant,
    )?)
}

/// Per instance `(solver objective, oracle objective, budget use)` where
/// budget use is `‖dZ‖_F / radius`.
pub fn bound_vs_oracle(instances: usize) -> Result<Vec<(f64, f64, f64)>> {
    (0..instances)
        .into_par_iter()
        .map(|i| {
            let variant = BoundVariant::ALL[i % 3];
            let pr = tiny_bound_problem(i as u64, variant)?;
            let sol = solve_bound(&pr, 1e-5, 50_000)?;
            let oracle = reference_oracle(&pr, &OracleSettings::default())?;
            let used = sol.dz.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / pr.radius();
            Ok((sol.objective, oracle, used))
        })
        .collect()
}

fn timed<F>(name: &'static str, f: F) -> Check
where
    F: FnOnce() -> Result<(bool, String)>,
{
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e:#}")));
    Check {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

/// Runs every check at desk scale. With `corrupt_kernel` one tap of the
/// reduction kernel is perturbed, which must trip the kernel-based checks.
pub fn run(corrupt_kernel: bool) -> SelftestReport {
    let desk = SimConfig::desk();
    let kernel = build_sinc(desk.n_fft, desk.n_sc).map(|k| {
        if corrupt_kernel {
            let v = k.values()[3];
            k.with_tap(3, v * 1.05).expect("tap in range")
        } else {
            k
        }
    });
    let mut checks = Vec::new();
    checks.push(timed("sparse_vs_dense_str", || {
        let e = sparse_dense_error(kernel.as_ref().map_err(|e| anyhow::anyhow!("{e}"))?, 200, 32, 1)?;
        Ok((e <= 1e-9, format!("max relative error {e:.2e} (limit 1e-9)")))
    }));
    checks.push(timed("clipping_identity", || {
        let (e, n) = clipping_error(desk.n_fft, 2000, 2);
        Ok((
            e <= 1e-12 && n > 0,
            format!("max deviation {e:.2e} over {n} clipped symbols"),
        ))
    }));
    checks.push(timed("twin_fast_path", || {
        let e = twin_error(&desk, 8, 3)?;
        Ok((e <= 1e-9, format!("max relative error {e:.2e}")))
    }));
    checks.push(timed("projector_identities", || {
        let (inv, orth) = projector_errors(&desk, 0..8)?;
        Ok((
            inv <= 1e-9 && orth <= 1e-9,
            format!("ls1 after twin {inv:.2e}, gram {orth:.2e}"),
        ))
    }));
    checks.push(timed("band_limitation", || {
        let k = kernel.as_ref().map_err(|e| anyhow::anyhow!("{e}"))?;
        let r = band_rejection(&desk, 8, Some(k))?;
        Ok((r >= 100.0, format!("worst out-of-band rejection {r:.1} dB (need 100)")))
    }));
    checks.push(timed("bound_vs_oracle", || {
        let res = bound_vs_oracle(12)?;
        let worst = res.iter().map(|(s, o, _)| (s - o) / o).fold(f64::MIN, f64::max);
        let over = res.iter().map(|(_, _, u)| u - 1.0).fold(f64::MIN, f64::max);
        Ok((
            worst <= 1e-3 && over <= 1e-6,
            format!(
                "{} instances, worst excess {worst:.2e}, budget overshoot {over:.1e}",
                res.len()
            ),
        ))
    }));
    SelftestReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_selftest_passes() {
        let r = run(false);
        assert!(r.passed(), "{}", r.table());
        assert_eq!(r.checks.len(), 6);
    }

    #[test]
    fn corrupted_kernel_fails_band_limitation() {
        let r = run(true);
        let band = r.checks.iter().find(|c| c.name == "band_limitation").unwrap();
        assert!(!band.passed, "{}", r.table());
        assert!(!r.passed());
    }
}
