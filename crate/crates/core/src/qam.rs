use rand::Rng;

use crate::error::{Error, Result};
use crate::C64;

const QAM16_SCALE: f64 = 0.316_227_766_016_837_94; // 1/sqrt(10)

/// Gray-mapped 16-QAM with unit average power. Each group of four bits
/// `b0 b1 b2 b3` maps to
/// `((1-2b0)(2-(1-2b2)) + j(1-2b1)(2-(1-2b3))) / sqrt(10)`,
/// so `0000` lands on `(1+1j)/sqrt(10)`.
pub fn qam16_modulate(bits: &[bool]) -> Result<Vec<C64>> {
    if !bits.len().is_multiple_of(4) {
        return Err(Error::Shape(format!(
            "16-QAM needs a multiple of 4 bits, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .chunks_exact(4)
        .map(|b| C64::new(level(b[0], b[2]), level(b[1], b[3])) * QAM16_SCALE)
        .collect())
}

fn level(sign: bool, inner: bool) -> f64 {
    let s = if sign { -1.0 } else { 1.0 };
    let m = if inner { 3.0 } else { 1.0 };
    s * m
}

pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random::<bool>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn all_points() -> Vec<C64> {
        let bits: Vec<bool> = (0..16u8)
            .flat_map(|v| (0..4).map(move |k| (v >> (3 - k)) & 1 == 1))
            .collect();
        qam16_modulate(&bits).unwrap()
    }

    #[test]
    fn zero_bits_hit_inner_corner() {
        let s = qam16_modulate(&[false; 4]).unwrap();
        assert!((s[0] - C64::new(1.0, 1.0) / 10f64.sqrt()).norm() < 1e-15);
    }

    #[test]
    fn constellation_has_unit_power_and_distinct_points() {
        let pts = all_points();
        let p: f64 = pts.iter().map(|c| c.norm_sqr()).sum::<f64>() / 16.0;
        assert!((p - 1.0).abs() < 1e-12);
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                assert!((a - b).norm() > 0.5);
            }
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        // Per axis: levels -3,-1,+1,+3 carry (sign, inner) = 11,10,00,01.
        let order = [(true, true), (true, false), (false, false), (false, true)];
        for w in order.windows(2) {
            let diff = (w[0].0 != w[1].0) as u8 + (w[0].1 != w[1].1) as u8;
            assert_eq!(diff, 1);
            assert!(level(w[0].0, w[0].1) < level(w[1].0, w[1].1));
        }
    }

    #[test]
    fn rejects_ragged_bit_count() {
        assert!(matches!(qam16_modulate(&[true; 6]), Err(Error::Shape(_))));
    }

    #[test]
    fn random_symbols_have_unit_mean_power() {
        let n_sc = 240;
        let mut rng = stream(11, Purpose::Test, 0);
        for _ in 0..20 {
            let s = qam16_modulate(&random_bits(&mut rng, 4 * n_sc)).unwrap();
            let p = s.iter().map(|c| c.norm_sqr()).sum::<f64>() / n_sc as f64;
            assert!((p - 1.0).abs() <= 3.0 / (n_sc as f64).sqrt(), "{p}");
        }
    }
}
