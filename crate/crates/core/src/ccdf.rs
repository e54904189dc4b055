//! Empirical complementary CDF of PAPR values.
//!
//! Exceedance uses the upper-tie convention: the curve point at level `v`
//! carries `P(X ≥ v)`, the fraction of samples at or above `v`. With this
//! convention [`CcdfCurve::papr_at`] returns the smallest measured level
//! whose exceedance is at most `p`, e.g. `{1, …, 10}` at `p = 0.2` gives 9.

use std::io::{self, Write};

use crate::error::{Error, Result};

pub const CCDF_CSV_HEADER: &str = "papr_db,ccdf";

#[derive(Debug, Clone, PartialEq)]
pub struct CcdfCurve {
    /// Distinct measured levels, strictly increasing.
    pub papr_db: Vec<f64>,
    /// `P(X ≥ papr_db[i])`, strictly decreasing, in `(0, 1]`.
    pub exceed_prob: Vec<f64>,
    samples: usize,
}

/// Builds the curve from one PAPR value per (stream, symbol) pair.
pub fn ccdf(values: &[f64]) -> Result<CcdfCurve> {
    if values.is_empty() {
        return Err(Error::SampleDeficit {
            p: 1.0,
            needed: 1,
            have: 0,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::UndefinedMetric("non-finite PAPR value in CCDF input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut papr_db = Vec::new();
    let mut exceed_prob = Vec::new();
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        papr_db.push(v);
        exceed_prob.push((n - i) as f64 / n as f64);
        while i < n && sorted[i] == v {
            i += 1;
        }
    }
    Ok(CcdfCurve {
        papr_db,
        exceed_prob,
        samples: n,
    })
}

/// Smallest sample count that supports querying level `p`.
pub fn samples_needed(p: f64) -> usize {
    (1.0 / p * (1.0 - 1e-9)).ceil() as usize
}

impl CcdfCurve {
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.papr_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papr_db.is_empty()
    }

    /// Deepest exceedance level the sample count supports.
    pub fn deepest_level(&self) -> f64 {
        1.0 / self.samples as f64
    }

    /// Smallest level whose exceedance is at most `p`. When every measured
    /// level is exceeded more often than `p` (all-equal input) the maximum
    /// is returned.
    pub fn papr_at(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidConfig(format!("exceedance level {p} outside (0, 1]")));
        }
        let needed = samples_needed(p);
        if self.samples < needed {
            return Err(Error::SampleDeficit {
                p,
                needed,
                have: self.samples,
            });
        }
        let tol = 1e-12;
        let idx = self.exceed_prob.partition_point(|&e| e > p + tol);
        Ok(*self
            .papr_db
            .get(idx)
            .unwrap_or_else(|| self.papr_db.last().expect("curve is never empty")))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CCDF_CSV_HEADER}")?;
        for (v, p) in self.papr_db.iter().zip(&self.exceed_prob) {
            writeln!(w, "{v},{p}")?;
        }
        Ok(())
    }
}
