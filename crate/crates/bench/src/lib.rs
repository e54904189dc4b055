//! Shared fixtures for the criterion benches.

use hbf_papr::hbf::build_precoder;
use hbf_papr::signal::generate_dac_symbols;
use hbf_papr::{Precoder, Result, SimConfig, TimeSignal};

pub struct Fixture {
    pub cfg: SimConfig,
    pub precoder: Precoder,
    pub symbols: Vec<TimeSignal>,
}

impl Fixture {
    pub fn new(cfg: SimConfig, count: usize) -> Result<Self> {
        let precoder = build_precoder(cfg.n_ant, cfg.n_dac, cfg.rng_seed)?;
        let symbols = generate_dac_symbols(&cfg, cfg.rng_seed, 0, count)?;
        Ok(Fixture { cfg, precoder, symbols })
    }

    pub fn reference(count: usize) -> Result<Self> {
        Self::new(SimConfig::default(), count)
    }

    pub fn desk(count: usize) -> Result<Self> {
        Self::new(SimConfig::desk(), count)
    }
}
