use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Modulation {
    #[default]
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qam16 => 4,
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulation::Qam16 => f.write_str("qam16"),
        }
    }
}

impl std::str::FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qam16" | "16qam" => Ok(Modulation::Qam16),
            other => Err(Error::InvalidConfig(format!("unknown modulation `{other}`"))),
        }
    }
}

/// Simulation geometry. [`SimConfig::default`] is the reference setup:
/// 1024-point symbols with 240 occupied subcarriers, 256 antennas driven
/// by 64 DAC chains, 32 peak-search blocks and a 13.5% EVM budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_fft: usize,
    pub n_sc: usize,
    /// Upsampling factor. Only 1 is supported.
    pub n_up: usize,
    pub n_ant: usize,
    pub n_dac: usize,
    /// Interpolation filter order. Stored, unused while `n_up == 1`.
    pub n_lpf: usize,
    pub n_iter: usize,
    pub n_b: usize,
    pub n_ofdm: usize,
    pub modulation: Modulation,
    pub evm_budget: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_fft: 1024,
            n_sc: 240,
            n_up: 1,
            n_ant: 256,
            n_dac: 64,
            n_lpf: 15,
            n_iter: 2,
            n_b: 32,
            n_ofdm: 120,
            modulation: Modulation::Qam16,
            evm_budget: 0.135,
            rng_seed: 1,
        }
    }
}

impl SimConfig {
    /// Reduced geometry used for bound experiments and quick checks.
    pub fn desk() -> Self {
        SimConfig {
            n_fft: 128,
            n_sc: 32,
            n_ant: 16,
            n_dac: 4,
            n_b: 8,
            n_ofdm: 16,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return fail(format!("n_fft = {} must be a power of two", self.n_fft));
        }
        if !self.n_ant.is_power_of_two() {
            return fail(format!("n_ant = {} must be a power of two", self.n_ant));
        }
        if self.n_sc == 0 || self.n_sc >= self.n_fft {
            return fail(format!("n_sc = {} must be in 1..n_fft", self.n_sc));
        }
        if self.n_dac == 0 || self.n_dac > self.n_ant {
            return fail(format!("n_dac = {} must be in 1..=n_ant", self.n_dac));
        }
        if self.n_up != 1 {
            return fail(format!("n_up = {} is unsupported, only 1", self.n_up));
        }
        if self.n_b == 0 || !self.n_fft.is_multiple_of(self.n_b) {
            return fail(format!("n_b = {} must divide n_fft = {}", self.n_b, self.n_fft));
        }
        if self.n_iter == 0 {
            return fail("n_iter must be at least 1".into());
        }
        if self.n_ofdm == 0 {
            return fail("n_ofdm must be at least 1".into());
        }
        if !(self.evm_budget > 0.0 && self.evm_budget < 1.0) {
            return fail(format!("evm_budget = {} must lie in (0, 1)", self.evm_budget));
        }
        Ok(())
    }

    pub fn block_len(&self) -> usize {
        self.n_fft / self.n_b
    }
}
