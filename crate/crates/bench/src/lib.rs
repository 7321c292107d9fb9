//! Inputs shared by the benchmarks in `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsn_core::phy::synthesize_slot;
use wsn_core::{Complex64, EnergyMatrix, Result, WaveformParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `M x L` matrix of unit-mean exponential energies.
pub fn energy_matrix(order: usize, sensors: usize, seed: u64) -> EnergyMatrix {
    let mut rng = rng(seed);
    let data = (0..order * sensors).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    EnergyMatrix::new(order, sensors, data).expect("non-negative energies")
}

/// Noiseless received frame in which sensor `l` sends tone `l mod M + 1`.
pub fn received_frame(params: &WaveformParams) -> Result<Vec<Complex64>> {
    let mut frame = Vec::with_capacity(params.sensors * params.samples_per_slot);
    for l in 1..=params.sensors {
        frame.extend(synthesize_slot((l - 1) % params.order + 1, l, 0.0, params)?);
    }
    Ok(frame)
}
