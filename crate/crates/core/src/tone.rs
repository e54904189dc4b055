//! Single-antenna sparse tone reservation.
//!
//! A peak signal `y` is cut out of the symbol by thresholding, one maximum
//! per time block is kept, and every kept peak is cancelled with a circularly
//! shifted copy of the band-limited kernel scaled to unit peak. Because the
//! kernel is the time response of the occupied band, the cancellation signal
//! is band-limited by construction and equals `n_fft/n_sc` times the dense
//! least-squares projection of the sparse `y` onto the occupied
//! subcarriers ([`dense_ls_project`]).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::dft::{band_mask, centered_bins, lowest_frequency, Dft};
use crate::error::{Error, Result};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Circular kernel of the DC-centred occupied band: `n_fft` times the
/// inverse DFT of the width-`n_sc` rectangle,
///
/// `values[d] = e^{2πi·c·d/n_fft} · sin(π n_sc d / n_fft) / sin(π d / n_fft)`
///
/// where `c` is the band centre (`-1/2` for even `n_sc`, `0` for odd).
/// The modulus is the digital SINC; for even `n_sc` the half-bin phase ramp
/// is what keeps the kernel periodic and exactly band-limited, so values are
/// Hermitian (`values[n-d] = conj(values[d])`) rather than real.
#[derive(Debug, Clone, PartialEq)]
pub struct SincKernel {
    values: Vec<C64>,
    n_sc: usize,
    window_len: Option<usize>,
    /// Offsets `d` (mod `n_fft`) carrying nonzero taps.
    support: Vec<usize>,
    /// DFT of the unit-peak kernel; the band mask scaled by `n_fft/n_sc`
    /// when unwindowed.
    response: Vec<C64>,
}

pub fn build_sinc(n_fft: usize, n_sc: usize) -> Result<SincKernel> {
    if n_sc == 0 || n_sc > n_fft {
        return Err(Error::Shape(format!("n_sc = {n_sc} outside 1..=n_fft = {n_fft}")));
    }
    let n = n_fft as f64;
    let centre = lowest_frequency(n_sc) as f64 + (n_sc as f64 - 1.0) / 2.0;
    let values = (0..n_fft)
        .map(|d| {
            if d == 0 {
                return C64::new(n_sc as f64, 0.0);
            }
            let d = d as f64;
            let mag = (PI * n_sc as f64 * d / n).sin() / (PI * d / n).sin();
            C64::from_polar(1.0, 2.0 * PI * centre * d / n) * mag
        })
        .collect();
    let gain = n / n_sc as f64;
    let response = band_mask(n_sc, n_fft)
        .into_iter()
        .map(|inband| if inband { C64::new(gain, 0.0) } else { ZERO })
        .collect();
    Ok(SincKernel {
        values,
        n_sc,
        window_len: None,
        support: (0..n_fft).collect(),
        response,
    })
}

/// Truncates the kernel to `window_len` taps centred on `d = 0`
/// (offsets `-window_len/2 ..= window_len - 1 - window_len/2`). Shorter
/// windows cut the per-peak cost proportionally but leak energy outside the
/// occupied band.
pub fn windowed_kernel(kernel: &SincKernel, window_len: usize) -> Result<SincKernel> {
    let n_fft = kernel.n_fft();
    if window_len == 0 || window_len > n_fft {
        return Err(Error::Shape(format!(
            "window of {window_len} taps for a kernel of {n_fft}"
        )));
    }
    if window_len == n_fft {
        let mut k = kernel.clone();
        k.window_len = Some(n_fft);
        return Ok(k);
    }
    let half = (window_len / 2) as isize;
    let support: Vec<usize> = (-half..window_len as isize - half)
        .map(|d| d.rem_euclid(n_fft as isize) as usize)
        .collect();
    let mut values = vec![ZERO; n_fft];
    for &d in &support {
        values[d] = kernel.values[d];
    }
    let mut response: Vec<C64> = values.iter().map(|v| v / kernel.peak()).collect();
    Dft::new(n_fft).forward(&mut response);
    Ok(SincKernel {
        values,
        n_sc: kernel.n_sc,
        window_len: Some(window_len),
        support,
        response,
    })
}

impl SincKernel {
    /// Copy with tap `d` overwritten by `value`. Exists to check that the
    /// band-limitation guards notice a damaged kernel.
    pub fn with_tap(&self, d: usize, value: C64) -> Result<SincKernel> {
        let n_fft = self.n_fft();
        if d >= n_fft {
            return Err(Error::Shape(format!("tap {d} of a kernel of {n_fft}")));
        }
        let mut values = self.values.clone();
        values[d] = value;
        let mut support = self.support.clone();
        if !support.contains(&d) {
            support.push(d);
            support.sort_unstable();
        }
        let mut response: Vec<C64> = values.iter().map(|v| v / self.peak()).collect();
        Dft::new(n_fft).forward(&mut response);
        Ok(SincKernel {
            values,
            n_sc: self.n_sc,
            window_len: self.window_len,
            support,
            response,
        })
    }

    pub fn n_fft(&self) -> usize {
        self.values.len()
    }

    pub fn n_sc(&self) -> usize {
        self.n_sc
    }

    pub fn window_len(&self) -> Option<usize> {
        self.window_len
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Offsets with nonzero taps.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Whether the kernel's spectrum is exactly zero outside the occupied
    /// band.
    pub fn is_band_limited(&self) -> bool {
        band_mask(self.n_sc, self.n_fft())
            .iter()
            .zip(&self.response)
            .all(|(&inside, r)| inside || *r == ZERO)
    }

    fn full_support(&self) -> bool {
        self.support.len() == self.n_fft()
    }

    /// `values[0] = n_sc`.
    pub fn peak(&self) -> f64 {
        self.n_sc as f64
    }

    /// Unit-peak tap at circular offset `d`.
    #[inline]
    pub fn tap(&self, d: usize) -> C64 {
        self.values[d] / self.peak()
    }

    /// Adds `amp · tap(i - index)` to `out[i]` for every supported offset.
    pub fn add_shifted(&self, out: &mut [C64], index: usize, amp: C64) {
        let n = self.n_fft();
        debug_assert_eq!(out.len(), n);
        let scale = amp / self.peak();
        if self.full_support() {
            // out[index + d] for d in 0..n, split at the wrap point.
            let (head, tail) = self.values.split_at(n - index);
            for (o, v) in out[index..].iter_mut().zip(head) {
                *o += scale * v;
            }
            for (o, v) in out[..index].iter_mut().zip(tail) {
                *o += scale * v;
            }
        } else {
            for &d in &self.support {
                let i = (index + d) % n;
                out[i] += scale * self.values[d];
            }
        }
    }

    /// Circular convolution of `impulses` with the unit-peak kernel through
    /// the frequency domain.
    pub fn convolve_fft(&self, impulses: &[C64], dft: &Dft) -> Vec<C64> {
        let mut buf = impulses.to_vec();
        dft.forward(&mut buf);
        buf.iter_mut().zip(&self.response).for_each(|(b, r)| *b *= r);
        dft.inverse(&mut buf);
        buf
    }

    /// Same result as [`Self::convolve_fft`], summing shifted kernels for the
    /// nonzero impulses only.
    pub fn convolve_sparse(&self, impulses: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.n_fft()];
        for (i, &a) in impulses.iter().enumerate() {
            if a != ZERO {
                self.add_shifted(&mut out, i, a);
            }
        }
        out
    }

    /// Picks the cheaper of the two convolution routes.
    pub fn convolve(&self, impulses: &[C64], dft: &Dft) -> Vec<C64> {
        let nnz = impulses.iter().filter(|&&a| a != ZERO).count();
        let n = self.n_fft();
        let fft_cost = 8 * n * (usize::BITS - n.leading_zeros()) as usize;
        if nnz * self.support.len() <= fft_cost {
            self.convolve_sparse(impulses)
        } else {
            self.convolve_fft(impulses, dft)
        }
    }
}

/// Peak signal above `tau`: `y(n) = x(n)(1 - tau/|x(n)|)` where
/// `|x(n)| ≥ tau`, zero elsewhere. `x - y` is `x` clipped to modulus `tau`.
pub fn threshold_excess(x: &[C64], tau: f64) -> Vec<C64> {
    x.iter()
        .map(|&v| {
            let a = v.norm();
            if a >= tau && a > 0.0 {
                v * (1.0 - tau / a)
            } else {
                ZERO
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub amplitude: C64,
}

/// Peaks selected for one symbol of one antenna, ordered by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Every nonzero sample of `y` as a peak (no block selection).
    pub fn from_sparse(y: &[C64]) -> Self {
        PeakSet {
            peaks: y
                .iter()
                .enumerate()
                .filter(|(_, &a)| a != ZERO)
                .map(|(index, &amplitude)| Peak { index, amplitude })
                .collect(),
        }
    }
}

/// Splits `y` into `n_b` contiguous blocks and keeps the largest-modulus
/// nonzero sample of each. Ties go to the lowest index. A maximum sitting on
/// a block edge is kept as is.
pub fn blockwise_peaks(y: &[C64], n_b: usize) -> Result<PeakSet> {
    if n_b == 0 || !y.len().is_multiple_of(n_b) {
        return Err(Error::Shape(format!("{n_b} blocks do not divide {} samples", y.len())));
    }
    let block = y.len() / n_b;
    let peaks = y
        .chunks_exact(block)
        .enumerate()
        .filter_map(|(b, chunk)| {
            let (k, best) = chunk.iter().enumerate().fold((0, 0.0f64), |(bk, bv), (k, v)| {
                let e = v.norm_sqr();
                if e > bv {
                    (k, e)
                } else {
                    (bk, bv)
                }
            });
            (best > 0.0).then(|| Peak {
                index: b * block + k,
                amplitude: chunk[k],
            })
        })
        .collect();
    Ok(PeakSet { peaks })
}

/// Cancellation signal `Δx(i) = Σ_k y(n_k)·tap(i - n_k)` and the reduced
/// symbol `x - Δx`. With the unit-peak kernel an isolated peak is removed
/// exactly at its own sample.
pub fn sparse_reduce(x: &[C64], peaks: &PeakSet, kernel: &SincKernel) -> Result<(Vec<C64>, Vec<C64>)> {
    let n = kernel.n_fft();
    if x.len() != n {
        return Err(Error::Shape(format!("symbol of {} samples, kernel of {n}", x.len())));
    }
    let mut dx = vec![ZERO; n];
    for p in &peaks.peaks {
        if p.index >= n {
            return Err(Error::Shape(format!("peak index {} out of range", p.index)));
        }
        kernel.add_shifted(&mut dx, p.index, p.amplitude);
    }
    let reduced = x.iter().zip(&dx).map(|(a, b)| a - b).collect();
    Ok((dx, reduced))
}

/// Least-squares fit of `y` by the occupied subcarriers:
/// `a = (1/n_fft)·Sᴴy` via the forward DFT restricted to `bins`, then
/// `Δx = S·a` via the inverse DFT.
pub fn dense_ls_project(y: &[C64], bins: &[usize], dft: &Dft) -> Result<Vec<C64>> {
    let n = dft.len();
    if y.len() != n {
        return Err(Error::Shape(format!("symbol of {} samples, DFT of {n}", y.len())));
    }
    let mut spec = y.to_vec();
    dft.forward(&mut spec);
    let mut kept = vec![ZERO; n];
    for &b in bins {
        if b >= n {
            return Err(Error::Shape(format!("bin {b} out of range")));
        }
        kept[b] = spec[b];
    }
    dft.inverse(&mut kept);
    Ok(kept)
}

/// Dense projection on the DC-centred band of `kernel`.
pub fn dense_ls_project_band(y: &[C64], kernel: &SincKernel, dft: &Dft) -> Result<Vec<C64>> {
    dense_ls_project(y, &centered_bins(kernel.n_sc(), kernel.n_fft()), dft)
}

/// How the normalized thresholds `τ̃` are turned into absolute ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdNorm {
    /// `τ = τ̃·‖x‖₂/√n_fft`: relative to the RMS amplitude.
    #[default]
    Rms,
    /// `τ = τ̃·‖x‖₂`, the literal Euclidean norm.
    L2,
}

impl ThresholdNorm {
    pub fn scale(self, x: &[C64]) -> f64 {
        let l2 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        match self {
            ThresholdNorm::Rms => l2 / (x.len() as f64).sqrt(),
            ThresholdNorm::L2 => l2,
        }
    }
}

impl std::str::FromStr for ThresholdNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rms" => Ok(ThresholdNorm::Rms),
            "l2" => Ok(ThresholdNorm::L2),
            other => Err(Error::InvalidConfig(format!("unknown threshold norm `{other}`"))),
        }
    }
}

impl std::fmt::Display for ThresholdNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ThresholdNorm::Rms => "rms",
            ThresholdNorm::L2 => "l2",
        })
    }
}

/// Per-iteration normalized thresholds plus the projection scale `coef`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedule {
    pub tau_norm: Vec<f64>,
    pub coef: f64,
    pub norm: ThresholdNorm,
}

impl ThresholdSchedule {
    pub fn new(coef: f64, tau_norm: Vec<f64>) -> Result<Self> {
        let s = ThresholdSchedule {
            tau_norm,
            coef,
            norm: ThresholdNorm::Rms,
        };
        s.validate()?;
        Ok(s)
    }

    /// Genes are laid out as `[coef, τ̃₁, …, τ̃ₙ]`.
    pub fn from_genes(genes: &[f64]) -> Result<Self> {
        match genes.split_first() {
            Some((&coef, taus)) if !taus.is_empty() => Self::new(coef, taus.to_vec()),
            _ => Err(Error::InvalidConfig("need at least [coef, tau]".into())),
        }
    }

    pub fn genes(&self) -> Vec<f64> {
        std::iter::once(self.coef)
            .chain(self.tau_norm.iter().copied())
            .collect()
    }

    pub fn n_iter(&self) -> usize {
        self.tau_norm.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_norm.is_empty() {
            return Err(Error::InvalidConfig("empty threshold schedule".into()));
        }
        if !(self.coef.is_finite() && self.coef > 0.0) {
            return Err(Error::InvalidConfig(format!("coef = {} must be positive", self.coef)));
        }
        if let Some(t) = self.tau_norm.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidConfig(format!("threshold {t} must be positive")));
        }
        Ok(())
    }
}

/// Result of the iterated single-antenna reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct StrOutput {
    /// Accumulated cancellation signal.
    pub delta: Vec<C64>,
    /// `x - delta`.
    pub residual: Vec<C64>,
    /// Kernel amplitudes by sample index, summed across iterations.
    pub amplitudes: BTreeMap<usize, C64>,
    pub peaks_per_iter: Vec<usize>,
}

/// Runs `schedule.n_iter()` rounds of threshold → block maxima → kernel
/// subtraction on the running residual. Thresholds are `τ̃_t` times the
/// norm of the input symbol.
pub fn iterate_str(x: &[C64], schedule: &ThresholdSchedule, n_b: usize, kernel: &SincKernel) -> Result<StrOutput> {
    let n = kernel.n_fft();
    if x.len() != n {
        return Err(Error::Shape(format!("symbol of {} samples, kernel of {n}", x.len())));
    }
    let scale = schedule.norm.scale(x);
    let mut out = StrOutput {
        delta: vec![ZERO; n],
        residual: x.to_vec(),
        amplitudes: BTreeMap::new(),
        peaks_per_iter: Vec::with_capacity(schedule.n_iter()),
    };
    if scale == 0.0 {
        out.peaks_per_iter.resize(schedule.n_iter(), 0);
        return Ok(out);
    }
    for &t in &schedule.tau_norm {
        let y = threshold_excess(&out.residual, t * scale);
        let peaks = blockwise_peaks(&y, n_b)?;
        let mut dx = vec![ZERO; n];
        for p in &peaks.peaks {
            kernel.add_shifted(&mut dx, p.index, p.amplitude);
            *out.amplitudes.entry(p.index).or_insert(ZERO) += p.amplitude;
        }
        for ((r, d), acc) in out.residual.iter_mut().zip(&dx).zip(out.delta.iter_mut()) {
            *r -= d;
            *acc += d;
        }
        out.peaks_per_iter.push(peaks.len());
    }
    Ok(out)
}
