//! Time- and frequency-domain containers and OFDM symbol generation.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::config::SimConfig;
use crate::dft::{centered_bins, Dft};
use crate::error::{Error, Result};
use crate::qam::{qam16_modulate, random_bits};
use crate::rng::{stream, Purpose};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// DAC-chain streams `Z`, one row per DAC.
    Dac,
    /// Antenna signals `X = P Z`, one row per antenna.
    Antenna,
}

/// One OFDM symbol of several streams: `streams × n_fft` complex samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    data: Array2<C64>,
    domain: Domain,
}

impl TimeSignal {
    pub fn new(data: Array2<C64>, domain: Domain) -> Result<Self> {
        if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Shape("time signal contains non-finite samples".into()));
        }
        Ok(TimeSignal { data, domain })
    }

    pub fn zeros(streams: usize, n_fft: usize, domain: Domain) -> Self {
        TimeSignal {
            data: Array2::zeros((streams, n_fft)),
            domain,
        }
    }

    pub(crate) fn from_parts(data: Array2<C64>, domain: Domain) -> Self {
        TimeSignal { data, domain }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn streams(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_fft(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, C64> {
        self.data.view()
    }

    pub fn stream(&self, k: usize) -> ArrayView1<'_, C64> {
        self.data.row(k)
    }

    /// Contiguous samples of stream `k`.
    pub fn stream_slice(&self, k: usize) -> &[C64] {
        self.data.row(k).to_slice().expect("time signals are stored row-major")
    }

    pub fn into_data(self) -> Array2<C64> {
        self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn expect_domain(&self, expected: Domain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::DomainMismatch {
                expected,
                got: self.domain,
            });
        }
        Ok(())
    }

    pub fn sub(&self, other: &TimeSignal) -> Result<TimeSignal> {
        self.expect_domain(other.domain)?;
        if self.data.dim() != other.data.dim() {
            return Err(Error::Shape(format!(
                "cannot subtract {:?} from {:?}",
                other.data.dim(),
                self.data.dim()
            )));
        }
        Ok(TimeSignal::from_parts(&self.data - &other.data, self.domain))
    }
}

/// Subcarrier amplitudes of one symbol: `streams × n_sc`, column `k` living
/// on FFT bin `subcarrier_indices[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    pub data: Array2<C64>,
    pub subcarrier_indices: Vec<usize>,
    pub n_fft: usize,
}

impl FreqGrid {
    /// Grid on the DC-centred occupied bins.
    pub fn centered(data: Array2<C64>, n_fft: usize) -> Result<Self> {
        let n_sc = data.ncols();
        if n_sc == 0 || n_sc > n_fft {
            return Err(Error::Shape(format!("{n_sc} subcarriers do not fit n_fft = {n_fft}")));
        }
        Ok(FreqGrid {
            data,
            subcarrier_indices: centered_bins(n_sc, n_fft),
            n_fft,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.subcarrier_indices.len() != self.data.ncols() {
            return Err(Error::Shape(format!(
                "{} indices for {} subcarrier columns",
                self.subcarrier_indices.len(),
                self.data.ncols()
            )));
        }
        let mut seen = vec![false; self.n_fft];
        for &b in &self.subcarrier_indices {
            if b >= self.n_fft || std::mem::replace(&mut seen[b], true) {
                return Err(Error::Shape(format!("bad or repeated subcarrier index {b}")));
            }
        }
        Ok(())
    }
}

/// Inverse DFT of the zero-padded grid with the `1/n_fft` convention: a
/// unit tone on bin `m` becomes `e^{2πi mn/n_fft} / n_fft`, so the mean
/// sample power equals the mean subcarrier power times `n_sc / n_fft²`.
pub fn ofdm_symbol(freq: &FreqGrid, dft: &Dft) -> Result<TimeSignal> {
    freq.validate()?;
    if dft.len() != freq.n_fft {
        return Err(Error::Shape(format!(
            "DFT of size {} for n_fft = {}",
            dft.len(),
            freq.n_fft
        )));
    }
    let mut out = Array2::zeros((freq.data.nrows(), freq.n_fft));
    let mut buf = vec![C64::new(0.0, 0.0); freq.n_fft];
    for (row, mut dst) in freq.data.rows().into_iter().zip(out.rows_mut()) {
        buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (&b, &a) in freq.subcarrier_indices.iter().zip(row.iter()) {
            buf[b] = a;
        }
        dft.inverse(&mut buf);
        dst.iter_mut().zip(&buf).for_each(|(d, s)| *d = *s);
    }
    TimeSignal::new(out, Domain::Dac)
}

/// Seeded DAC streams for `count` symbols starting at symbol `first`:
/// every stream carries independent random 16-QAM on the occupied bins.
/// Symbol `k` depends only on `(seed, k)`.
pub fn generate_dac_symbols(cfg: &SimConfig, seed: u64, first: usize, count: usize) -> Result<Vec<TimeSignal>> {
    let dft = Dft::new(cfg.n_fft);
    let bits_per = cfg.modulation.bits_per_symbol();
    (first..first + count)
        .map(|k| {
            let mut rng = stream(seed, Purpose::Symbols, k as u64);
            let mut grid = Array2::zeros((cfg.n_dac, cfg.n_sc));
            for mut row in grid.rows_mut() {
                let syms = qam16_modulate(&random_bits(&mut rng, bits_per * cfg.n_sc))?;
                row.iter_mut().zip(syms).for_each(|(d, s)| *d = s);
            }
            ofdm_symbol(&FreqGrid::centered(grid, cfg.n_fft)?, &dft)
        })
        .collect()
}
