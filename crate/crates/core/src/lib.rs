//! Monte Carlo simulation of a three-layer wireless sensor network.
//!
//! `L` sensors observe an `M`-ary event, each reports its (possibly wrong)
//! local decision as one of `M` orthogonal FSK tones in its own TDMA slot,
//! the reports cross independent block Rayleigh channels, and a fusion center
//! picks the event with selection combining over the tone energies.
//!
//! The crate is organized along the signal chain:
//!
//! * [`source`]: event generation, quantization and imperfect local detection.
//! * [`channel`]: fading gains and complex AWGN.
//! * [`phy`]: MFSK synthesis and the non-coherent correlator bank, plus an
//!   equivalent symbol-level model.
//! * [`fusion`]: selection, square-law and genie-aided coherent combiners.
//! * [`analytic`]: closed-form and brute-force reference values.
//! * [`metrics`]: error counting and confidence intervals.
//! * [`engine`]: deterministic parallel driver, sweeps and result files.
//! * [`acceptance`]: the end-to-end validation suite behind `wsn-sim verify`.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analytic;
pub mod channel;
pub mod engine;
mod error;
pub mod fusion;
pub mod metrics;
pub mod phy;
pub mod source;

pub use num_complex::Complex64;

pub use crate::channel::{ChannelRealization, NoiseModel};
pub use crate::engine::{
    emit_results, run_point, run_sweep, run_trial, Fading, Fidelity, OutputFormat, SimParams,
    SnrBasis, SweepSpec, TrialRecord,
};
pub use crate::error::{Error, Result};
pub use crate::fusion::{Combiner, FusionDecision};
pub use crate::metrics::{BerPoint, ErrorTally};
pub use crate::phy::{EnergyMatrix, WaveformParams};
pub use crate::source::{EventModel, SensorModel};

/// Number of bits carried by one symbol of an `M`-ary alphabet.
///
/// Callers must have validated that `m` is a power of two.
pub fn bits_per_symbol(m: usize) -> u32 {
    debug_assert!(m.is_power_of_two());
    m.trailing_zeros()
}

/// Validates a modulation order: at least 2 and a power of two.
pub fn check_order(m: usize) -> Result<()> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::param(format!(
            "modulation order must be a power of two >= 2, got {m}"
        )));
    }
    Ok(())
}
