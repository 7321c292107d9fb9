//! Block Rayleigh fading and complex AWGN.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Circular complex Gaussian sample with `E|z|^2 = power`.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let scale = (0.5 * power).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Per-sensor complex gains `h_l`, constant for one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gains: Vec<Complex64>,
    pub correlation: f64,
}

impl ChannelRealization {
    /// Non-faded channel (`h_l = 1`), used to validate against AWGN results.
    pub fn unit(sensors: usize) -> Self {
        Self {
            gains: vec![Complex64::new(1.0, 0.0); sensors],
            correlation: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param(format!(
            "channel correlation must lie in [0, 1], got {rho}"
        )));
    }
    Ok(())
}

/// Draws equicorrelated unit-power Rayleigh gains,
/// `h_l = sqrt(rho) c + sqrt(1 - rho) g_l`.
///
/// The common factor is drawn even when `rho = 0` so that the number of
/// random draws per call depends only on `sensors`.
pub fn draw_gains<R: Rng + ?Sized>(
    sensors: usize,
    rho: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if sensors == 0 {
        return Err(Error::param("sensor count must be at least 1"));
    }
    check_rho(rho)?;
    let mut gains = Vec::with_capacity(sensors);
    draw_gains_into(sensors, rho, rng, &mut gains);
    Ok(ChannelRealization {
        gains,
        correlation: rho,
    })
}

/// Buffer-reusing form of [`draw_gains`]; `rho` must already be validated.
pub(crate) fn draw_gains_into<R: Rng + ?Sized>(
    sensors: usize,
    rho: f64,
    rng: &mut R,
    out: &mut Vec<Complex64>,
) {
    let common = complex_normal(rng, 1.0);
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    out.clear();
    out.extend((0..sensors).map(|_| a * common + b * complex_normal(rng, 1.0)));
}

/// Additive noise description shared by every branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// One-sided noise power spectral density.
    pub n0: f64,
    /// Noise energy at each correlator output; identical across branches.
    pub branch_noise_power: f64,
}

impl NoiseModel {
    pub fn new(n0: f64) -> Result<Self> {
        if !(n0 >= 0.0) || !n0.is_finite() {
            return Err(Error::param(format!("n0 must be finite and >= 0, got {n0}")));
        }
        Ok(Self {
            n0,
            branch_noise_power: n0,
        })
    }
}

/// Adds i.i.d. circular complex Gaussian noise of power `n0` to every sample.
///
/// With `n0 = 0` the samples are left untouched, although the random stream
/// still advances by the same amount.
pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [Complex64], n0: f64, rng: &mut R) -> Result<()> {
    if !(n0 >= 0.0) {
        return Err(Error::param(format!("n0 must be >= 0, got {n0}")));
    }
    for s in samples.iter_mut() {
        let n = complex_normal(rng, n0);
        if n0 > 0.0 {
            *s += n;
        }
    }
    Ok(())
}
