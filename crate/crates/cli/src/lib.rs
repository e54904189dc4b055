//! Experiment front end for [`hbf_papr`]: the description format, the
//! `simulate`, `train`, `bound` and `selftest` commands and exit-code
//! classification.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod experiment;
pub mod plot;
pub mod selftest;

use std::io;

pub use experiment::{ExperimentSpec, Overrides, SpecError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_SELFTEST: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_SPEC: u8 = 3;

/// Exit code for a failed command: I/O problems map to 2, invalid
/// descriptions and parameters to 3. Anything else is reported as 1.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.downcast_ref::<io::Error>().is_some()) {
        return EXIT_IO;
    }
    for e in err.chain() {
        if e.downcast_ref::<SpecError>().is_some() {
            return EXIT_SPEC;
        }
        if let Some(core) = e.downcast_ref::<hbf_papr::Error>() {
            return match core {
                hbf_papr::Error::InvalidConfig(_) | hbf_papr::Error::Shape(_) => EXIT_SPEC,
                _ => EXIT_SELFTEST,
            };
        }
    }
    EXIT_SELFTEST
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn errors_map_to_exit_codes() {
        let io_err: anyhow::Error = io::Error::other("disk").into();
        assert_eq!(exit_code(&io_err.context("writing")), EXIT_IO);
        let spec: anyhow::Error = SpecError("bad".into()).into();
        assert_eq!(exit_code(&spec), EXIT_SPEC);
        let core: Result<(), _> = Err(hbf_papr::Error::InvalidConfig("x".into()));
        assert_eq!(exit_code(&core.context("running").unwrap_err()), EXIT_SPEC);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_SELFTEST);
    }
}
