use std::io::{self, Write};

use crate::dft::{band_mask, fftshift, Dft};
use crate::error::{Error, Result};
use crate::signal::TimeSignal;
use crate::C64;

/// `10·log10(max|x|² / mean|x|²)` of one symbol.
pub fn papr_db(x: &[C64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::UndefinedMetric("PAPR of an empty symbol"));
    }
    let (peak, total) = x.iter().fold((0.0f64, 0.0f64), |(p, t), v| {
        let e = v.norm_sqr();
        (p.max(e), t + e)
    });
    if total == 0.0 {
        return Err(Error::UndefinedMetric("PAPR of an all-zero symbol"));
    }
    Ok(10.0 * (peak * x.len() as f64 / total).log10())
}

/// PAPR of every stream of a symbol, in stream order.
pub fn papr_per_stream(x: &TimeSignal) -> Result<Vec<f64>> {
    (0..x.streams()).map(|k| papr_db(x.stream_slice(k))).collect()
}

/// `‖delta‖_F / ‖reference‖_F`.
pub fn evm_fraction(delta: &TimeSignal, reference: &TimeSignal) -> Result<f64> {
    evm_fraction_batch(std::slice::from_ref(delta), std::slice::from_ref(reference))
}

/// Frobenius-norm ratio accumulated over a batch of symbols.
pub fn evm_fraction_batch(delta: &[TimeSignal], reference: &[TimeSignal]) -> Result<f64> {
    if delta.len() != reference.len() {
        return Err(Error::Shape(format!(
            "{} delta symbols for {} reference symbols",
            delta.len(),
            reference.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (d, r) in delta.iter().zip(reference) {
        if d.data().dim() != r.data().dim() {
            return Err(Error::Shape(format!(
                "delta {:?} vs reference {:?}",
                d.data().dim(),
                r.data().dim()
            )));
        }
        num += d.data().iter().map(|v| v.norm_sqr()).sum::<f64>();
        den += r.data().iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("EVM against a zero reference"));
    }
    Ok((num / den).sqrt())
}

/// Averaged periodogram, DC-centred: entry `k` belongs to normalized
/// frequency `(k - n/2) / n` cycles per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub bin_hz_normalized: Vec<f64>,
    pub psd_db: Vec<f64>,
}

pub const PSD_CSV_HEADER: &str = "bin_hz_normalized,psd_db";

/// Floor applied to empty bins before taking the logarithm.
const PSD_FLOOR: f64 = 1e-300;

impl Psd {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{PSD_CSV_HEADER}")?;
        for (f, p) in self.bin_hz_normalized.iter().zip(&self.psd_db) {
            writeln!(w, "{f},{p}")?;
        }
        Ok(())
    }

    /// Value at signed frequency bin `m`.
    pub fn at(&self, m: isize) -> f64 {
        let n = self.psd_db.len() as isize;
        self.psd_db[(m + n / 2) as usize]
    }
}

/// Running sum of per-bin `|DFT|²` over streams. Partial accumulators
/// can be merged, which keeps parallel accumulation order-deterministic
/// when merged in a fixed order.
#[derive(Debug, Clone)]
pub struct PsdAccumulator {
    dft: Dft,
    acc: Vec<f64>,
    count: usize,
}

impl PsdAccumulator {
    pub fn new(n_fft: usize) -> Self {
        PsdAccumulator {
            dft: Dft::new(n_fft),
            acc: vec![0.0; n_fft],
            count: 0,
        }
    }

    pub fn add(&mut self, sym: &TimeSignal) -> Result<()> {
        let n = self.acc.len();
        if sym.n_fft() != n {
            return Err(Error::Shape(format!(
                "symbol of {} samples, spectrum of {n}",
                sym.n_fft()
            )));
        }
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for k in 0..sym.streams() {
            buf.copy_from_slice(sym.stream_slice(k));
            self.dft.forward(&mut buf);
            self.acc.iter_mut().zip(&buf).for_each(|(a, v)| *a += v.norm_sqr());
            self.count += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &PsdAccumulator) -> Result<()> {
        if other.acc.len() != self.acc.len() {
            return Err(Error::Shape("merging spectra of different lengths".into()));
        }
        self.acc.iter_mut().zip(&other.acc).for_each(|(a, b)| *a += b);
        self.count += other.count;
        Ok(())
    }

    /// Mean per bin in dB, DC-centred.
    pub fn finish(&self) -> Result<Psd> {
        if self.count == 0 {
            return Err(Error::Shape("spectrum of an empty batch".into()));
        }
        let n = self.acc.len();
        let shifted = fftshift(&self.acc);
        Ok(Psd {
            bin_hz_normalized: (0..n).map(|k| (k as f64 - (n / 2) as f64) / n as f64).collect(),
            psd_db: shifted
                .iter()
                .map(|p| 10.0 * (p / self.count as f64).max(PSD_FLOOR).log10())
                .collect(),
        })
    }
}

/// Mean of `|DFT|²` per bin over all symbols and streams, in dB.
pub fn spectrum(symbols: &[TimeSignal]) -> Result<Psd> {
    let first = symbols
        .first()
        .ok_or(Error::Shape("spectrum of an empty batch".into()))?;
    let mut acc = PsdAccumulator::new(first.n_fft());
    for sym in symbols {
        acc.add(sym)?;
    }
    acc.finish()
}

/// Per stream, the peak in-band bin energy over the total out-of-band
/// energy, in dB; the minimum over streams is returned. A signal with no
/// out-of-band energy at all scores `+∞`, an all-zero one is an error.
pub fn out_of_band_rejection_db(x: &TimeSignal, n_sc: usize) -> Result<f64> {
    let n = x.n_fft();
    let dft = Dft::new(n);
    let mask = band_mask(n_sc, n);
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let mut worst = f64::INFINITY;
    let mut any = false;
    for k in 0..x.streams() {
        buf.copy_from_slice(x.stream_slice(k));
        dft.forward(&mut buf);
        let (mut peak, mut oob) = (0.0f64, 0.0f64);
        for (v, &inside) in buf.iter().zip(&mask) {
            if inside {
                peak = peak.max(v.norm_sqr());
            } else {
                oob += v.norm_sqr();
            }
        }
        if peak == 0.0 && oob == 0.0 {
            continue;
        }
        any = true;
        worst = worst.min(10.0 * (peak / oob).log10());
    }
    if !any {
        return Err(Error::UndefinedMetric("band rejection of an all-zero signal"));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::signal::Domain;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn row_signal(v: Vec<C64>) -> TimeSignal {
        let n = v.len();
        TimeSignal::new(Array2::from_shape_vec((1, n), v).unwrap(), Domain::Antenna).unwrap()
    }

    #[test]
    fn constant_modulus_has_zero_papr() {
        let x: Vec<C64> = (0..64).map(|i| C64::from_polar(2.0, i as f64)).collect();
        assert!(papr_db(&x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn impulse_papr_is_ten_log_n() {
        let mut x = vec![C64::new(0.0, 0.0); 1024];
        x[17] = C64::new(0.0, 3.0);
        assert!((papr_db(&x).unwrap() - 10.0 * 1024f64.log10()).abs() < 1e-12);
        assert!((papr_db(&x).unwrap() - 30.10).abs() < 0.01);
    }

    #[test]
    fn zero_symbol_papr_is_undefined() {
        assert!(matches!(
            papr_db(&[C64::new(0.0, 0.0); 8]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn evm_cases() {
        let r = row_signal((0..16).map(|i| C64::new(i as f64, 1.0)).collect());
        let zero = TimeSignal::zeros(1, 16, Domain::Antenna);
        assert_eq!(evm_fraction(&zero, &r).unwrap(), 0.0);
        let scaled = row_signal(r.stream(0).iter().map(|v| v * 0.135).collect());
        assert!((evm_fraction(&scaled, &r).unwrap() - 0.135).abs() < 1e-15);
        assert!(matches!(evm_fraction(&r, &zero), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn single_tone_spectrum_stands_out() {
        let n = 64;
        let m = 5;
        let x: Vec<C64> = (0..n)
            .map(|i| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (m * i) as f64 / n as f64))
            .collect();
        let psd = spectrum(&[row_signal(x)]).unwrap();
        let tone = psd.at(m as isize);
        for k in -(n as isize / 2)..(n as isize / 2) {
            if k != m as isize {
                assert!(tone - psd.at(k) >= 60.0);
            }
        }
        assert_eq!(psd.bin_hz_normalized[0], -0.5);
        assert_eq!(psd.bin_hz_normalized[n / 2], 0.0);
    }

    #[test]
    fn white_noise_spectrum_is_flat() {
        let n = 64;
        let mut rng = stream(3, Purpose::Test, 1);
        let symbols: Vec<TimeSignal> = (0..10_000)
            .map(|_| {
                row_signal(
                    (0..n)
                        .map(|_| {
                            let re: f64 = StandardNormal.sample(&mut rng);
                            let im: f64 = StandardNormal.sample(&mut rng);
                            C64::new(re, im)
                        })
                        .collect(),
                )
            })
            .collect();
        let psd = spectrum(&symbols).unwrap();
        let mean = psd.psd_db.iter().sum::<f64>() / n as f64;
        for p in &psd.psd_db {
            assert!((p - mean).abs() <= 1.0, "{p} vs {mean}");
        }
    }

    #[test]
    fn band_rejection_separates_tones() {
        let n = 64;
        let tone = |m: isize| -> Vec<C64> {
            (0..n)
                .map(|i| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (m * i as isize) as f64 / n as f64))
                .collect()
        };
        assert!(out_of_band_rejection_db(&row_signal(tone(3)), 16).unwrap() > 250.0);
        let mut mixed = tone(3);
        mixed.iter_mut().zip(tone(20)).for_each(|(a, b)| *a += b * 1e-3);
        assert!((out_of_band_rejection_db(&row_signal(mixed), 16).unwrap() - 60.0).abs() < 1e-6);
        assert!(out_of_band_rejection_db(&row_signal(tone(-9)), 16).unwrap() < 0.0);
        assert!(out_of_band_rejection_db(&TimeSignal::zeros(2, n, Domain::Antenna), 16).is_err());
    }

    proptest! {
        #[test]
        fn papr_is_rotation_and_scale_invariant(
            v in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 32),
            shift in 0usize..32,
            g in (0.1..10.0f64, -3.2..3.2f64),
        ) {
            let x: Vec<C64> = v.iter().map(|&(a, b)| C64::new(a, b)).collect();
            prop_assume!(x.iter().any(|c| c.norm() > 1e-3));
            let base = papr_db(&x).unwrap();
            let mut rot = x.clone();
            rot.rotate_left(shift);
            let gain = C64::from_polar(g.0, g.1);
            let scaled: Vec<C64> = x.iter().map(|c| c * gain).collect();
            prop_assert!((papr_db(&rot).unwrap() - base).abs() < 1e-9);
            prop_assert!((papr_db(&scaled).unwrap() - base).abs() < 1e-9);
        }

        #[test]
        fn evm_is_linear_in_delta(
            v in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16),
            s in 0.0..5.0f64,
        ) {
            let r = row_signal(v.iter().map(|&(a, b)| C64::new(a + 2.0, b)).collect());
            let d = row_signal(v.iter().map(|&(a, b)| C64::new(b, a)).collect());
            let ds = row_signal(d.stream(0).iter().map(|c| c * s).collect());
            let e1 = evm_fraction(&d, &r).unwrap();
            prop_assert!((evm_fraction(&ds, &r).unwrap() - s * e1).abs() < 1e-12);
        }
    }
}
