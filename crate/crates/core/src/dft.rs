//! Planned FFTs with the crate-wide scaling convention: forward unscaled,
//! inverse scaled by `1/n`.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::C64;

#[derive(Clone)]
pub struct Dft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `X[k] = Σ x[n] e^{-2πi kn/N}` in place.
    pub fn forward(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.forward.process(buf);
    }

    /// `x[n] = (1/N) Σ X[k] e^{+2πi kn/N}` in place.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.inverse_unscaled(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    /// `Σ X[k] e^{+2πi kn/N}` without the `1/N` factor.
    pub fn inverse_unscaled(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.inverse.process(buf);
    }
}

/// FFT bin of signed frequency `m`.
pub fn bin_of(m: isize, n: usize) -> usize {
    m.rem_euclid(n as isize) as usize
}

/// Lowest signed frequency of the `n_sc` bins centred on DC.
pub fn lowest_frequency(n_sc: usize) -> isize {
    -((n_sc / 2) as isize)
}

/// The `n_sc` occupied bins centred on DC, ordered by ascending signed
/// frequency `m ∈ [-n_sc/2, n_sc/2 - 1]` (for odd `n_sc`,
/// `[-(n_sc-1)/2, (n_sc-1)/2]`).
pub fn centered_bins(n_sc: usize, n: usize) -> Vec<usize> {
    let lo = lowest_frequency(n_sc);
    (0..n_sc as isize).map(|k| bin_of(lo + k, n)).collect()
}

/// Membership mask of [`centered_bins`].
pub fn band_mask(n_sc: usize, n: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    for b in centered_bins(n_sc, n) {
        mask[b] = true;
    }
    mask
}

/// Reorders a length-`n` spectrum so that DC sits at index `n/2`.
pub fn fftshift<T: Clone>(v: &[T]) -> Vec<T> {
    let n = v.len();
    let half = n.div_ceil(2);
    v[half..].iter().chain(v[..half].iter()).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_bins_wrap_negative_frequencies() {
        assert_eq!(centered_bins(4, 16), vec![14, 15, 0, 1]);
        assert_eq!(centered_bins(3, 8), vec![7, 0, 1]);
        assert_eq!(band_mask(2, 4), vec![true, false, false, true]);
    }

    #[test]
    fn inverse_undoes_forward() {
        let dft = Dft::new(8);
        let orig: Vec<C64> = (0..8).map(|i| C64::new(i as f64, -(i as f64) / 3.0)).collect();
        let mut buf = orig.clone();
        dft.forward(&mut buf);
        dft.inverse(&mut buf);
        for (a, b) in orig.iter().zip(&buf) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn fftshift_centres_dc() {
        assert_eq!(fftshift(&[0, 1, 2, 3]), vec![2, 3, 0, 1]);
    }
}
