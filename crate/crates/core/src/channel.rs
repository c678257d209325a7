//! Line-of-sight MIMO channel between two uniform linear arrays.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::quantizer::{sigma_delta_columns, SigmaDeltaConfig};
use crate::{CMatrix, CVector, Error, Result};

/// Uniform linear array. Only the spacing-to-wavelength ratio enters the
/// steering vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    n_elements: usize,
    spacing_ratio: f64,
}

impl ArrayGeometry {
    /// Element spacing and wavelength in meters.
    pub fn new(n_elements: usize, spacing_m: f64, wavelength_m: f64) -> Result<Self> {
        if !(wavelength_m.is_finite() && wavelength_m > 0.0) {
            return Err(Error::InvalidInput(format!(
                "wavelength must be positive, got {wavelength_m}"
            )));
        }
        Self::with_ratio(n_elements, spacing_m / wavelength_m)
    }

    /// Spacing given directly as `d/λ`.
    pub fn with_ratio(n_elements: usize, spacing_ratio: f64) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::InvalidInput(
                "array needs at least one element".into(),
            ));
        }
        if !(spacing_ratio.is_finite() && spacing_ratio > 0.0) {
            return Err(Error::InvalidInput(format!(
                "spacing ratio must be positive, got {spacing_ratio}"
            )));
        }
        Ok(Self {
            n_elements,
            spacing_ratio,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_ratio
    }
}

/// `a(θ)_n = exp(j·2π·(d/λ)·n·sin θ)` for `n = 0..N`, angle in degrees.
///
/// The first element is the phase reference, so `a[0] == 1` exactly.
pub fn steering_vector(angle_deg: f64, geometry: &ArrayGeometry) -> CVector {
    let step = 2.0 * PI * geometry.spacing_ratio * angle_deg.to_radians().sin();
    CVector::from_fn(geometry.n_elements, |n, _| {
        if n == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, step * n as f64)
        }
    })
}

fn check_angle(name: &str, deg: f64) -> Result<()> {
    if deg.is_finite() && deg.abs() < 90.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must lie in (-90, 90) degrees, got {deg}"
        )))
    }
}

/// A realized rank-1 channel `H = α·a_BS(θ)·a_MS(φ)ᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScenario {
    pub aoa_deg: f64,
    pub aod_deg: f64,
    pub gain: Complex64,
    pub bs_array: ArrayGeometry,
    pub ms_array: ArrayGeometry,
    /// `N_r × N_t`.
    pub channel: CMatrix,
}

pub fn make_los_channel(
    aoa_deg: f64,
    aod_deg: f64,
    gain: Complex64,
    bs: ArrayGeometry,
    ms: ArrayGeometry,
) -> Result<ChannelScenario> {
    check_angle("angle of arrival", aoa_deg)?;
    check_angle("angle of departure", aod_deg)?;
    if !(gain.re.is_finite() && gain.im.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite path gain {gain}")));
    }
    let channel = rank_one(
        gain,
        &steering_vector(aoa_deg, &bs),
        &steering_vector(aod_deg, &ms),
    );
    Ok(ChannelScenario {
        aoa_deg,
        aod_deg,
        gain,
        bs_array: bs,
        ms_array: ms,
        channel,
    })
}

pub(crate) fn rank_one(gain: Complex64, left: &CVector, right: &CVector) -> CMatrix {
    left * right.adjoint() * gain
}

/// Receiver noise source for [`synthesize_received`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverNoise {
    /// Unit-variance circular complex Gaussian noise from a seeded stream.
    Seeded(u64),
    /// `W = 0`.
    Noiseless,
}

/// Signals at the base station for one pilot block.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionRecord {
    /// Linear transmit power `P`, equal to the uplink SNR.
    pub snr_power: f64,
    /// `W`, `N_r × M`.
    pub noise_w: CMatrix,
    /// `X = sqrt(P/2N_t)·H·S + W`.
    pub received_x: CMatrix,
    /// Converter output; filled by [`receive_sigma_delta`].
    pub quantized_y: Option<CMatrix>,
}

/// I.i.d. circular complex Gaussian entries, variance ½ per component.
pub fn complex_gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid sigma");
    // fill column by column so the draw order is fixed
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = Complex64::new(normal.sample(rng), normal.sample(rng));
        }
    }
    m
}

pub fn synthesize_received(
    scenario: &ChannelScenario,
    transmit_s: &CMatrix,
    snr_power: f64,
    noise: ReceiverNoise,
) -> Result<TransmissionRecord> {
    let (n_r, n_t) = scenario.channel.shape();
    if transmit_s.nrows() != n_t {
        return Err(Error::dimension(
            "synthesize_received transmit rows",
            n_t,
            transmit_s.nrows(),
        ));
    }
    if !(snr_power.is_finite() && snr_power > 0.0) {
        return Err(Error::InvalidInput(format!(
            "transmit power must be positive, got {snr_power}"
        )));
    }
    let m = transmit_s.ncols();
    let noise_w = match noise {
        ReceiverNoise::Seeded(seed) => {
            complex_gaussian(&mut ChaCha20Rng::seed_from_u64(seed), n_r, m)
        }
        ReceiverNoise::Noiseless => CMatrix::zeros(n_r, m),
    };
    let amplitude = (snr_power / (2.0 * n_t as f64)).sqrt();
    let received_x = &scenario.channel * transmit_s * Complex64::new(amplitude, 0.0) + &noise_w;
    Ok(TransmissionRecord {
        snr_power,
        noise_w,
        received_x,
        quantized_y: None,
    })
}

/// Passes every column (time instant) of `X` through the base-station
/// converter.
pub fn receive_sigma_delta(
    mut record: TransmissionRecord,
    config: &SigmaDeltaConfig,
) -> Result<TransmissionRecord> {
    record.quantized_y = Some(sigma_delta_columns(&record.received_x, config)?);
    Ok(record)
}
