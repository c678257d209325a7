//! Monte Carlo harness: NMSE sweeps over SNR, the input/quantization-noise
//! correlation profile, and the spatial noise-shaping check.
//!
//! Every trial (or draw) owns an independent ChaCha20 stream selected by its
//! index, and results are reduced in index order, so output does not depend
//! on how rayon schedules the work.

use std::f64::consts::PI;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::{
    complex_gaussian, make_los_channel, synthesize_received, ArrayGeometry, ChannelScenario,
    ReceiverNoise,
};
use crate::estimator::{AngleGrid, ChannelEstimator};
use crate::linalg::{first_difference, frobenius_sq};
use crate::pilots::{predistort_pilots, PilotSet};
use crate::quantizer::{
    combined_noise_covariance, limit_amplitude, quantize_1bit, sigma_delta_columns,
    sigma_delta_forward, NoiseModel, SigmaDeltaConfig,
};
use crate::{CMatrix, CVector, Error, Result};

/// Receiver front end being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Spatial sigma-delta receiver with the shaped-noise whitener.
    #[serde(rename = "SD")]
    Sd,
    /// Unquantized samples, white-noise model.
    #[serde(rename = "UQ")]
    Uq,
    /// Plain per-antenna 1-bit quantizer with `b = 1`, white-noise model.
    #[serde(rename = "ONEBIT")]
    OneBit,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sd, Method::Uq, Method::OneBit];

    pub fn label(self) -> &'static str {
        match self {
            Method::Sd => "SD",
            Method::Uq => "UQ",
            Method::OneBit => "ONEBIT",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidInput(format!("unknown method {s:?} (expected SD, UQ or ONEBIT)"))
            })
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `b = sqrt(2·P·N_t) + 3·sqrt(½)`: the largest noiseless input magnitude
/// for a unit-modulus path gain plus three noise standard deviations.
pub fn select_voltage_level(snr_power: f64, n_transmit: usize) -> f64 {
    (2.0 * snr_power * n_transmit as f64).sqrt() + 3.0 * 0.5f64.sqrt()
}

/// Parameters of an NMSE sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub n_transmit: usize,
    pub n_receive: usize,
    /// `d/λ`, shared by both arrays.
    pub spacing_ratio: f64,
    pub snr_db_list: Vec<f64>,
    /// Angles are drawn uniformly from `[−Θ, Θ]` degrees.
    pub angular_halfwidth_deg: f64,
    pub n_trials: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    /// Number of stacked pilot blocks `K`.
    pub repetitions: usize,
    /// `|α|`; the voltage-level rule assumes 1.
    pub gain_magnitude: f64,
    /// Drop the receiver noise `W`.
    pub noiseless: bool,
    pub grid_points: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            n_transmit: 8,
            n_receive: 128,
            spacing_ratio: 0.125,
            snr_db_list: vec![-15.0, -10.0, -5.0, 0.0, 5.0, 10.0],
            angular_halfwidth_deg: 30.0,
            n_trials: 200,
            base_seed: 1,
            methods: Method::ALL.to_vec(),
            repetitions: 1,
            gain_magnitude: 1.0,
            noiseless: false,
            grid_points: AngleGrid::default().points,
        }
    }
}

impl MonteCarloConfig {
    /// Checks every field; the message names the offending key.
    pub fn validate(&self) -> Result<()> {
        match self.violation() {
            Some((key, msg)) => Err(Error::Config(format!("{key}: {msg}"))),
            None => Ok(()),
        }
    }

    /// First invalid field as `(key, reason)`.
    pub fn violation(&self) -> Option<(&'static str, String)> {
        let fail = |key: &'static str, msg: String| Some((key, msg));
        if self.n_transmit < 2 || !self.n_transmit.is_power_of_two() {
            return fail(
                "n_transmit",
                format!("must be a power of two >= 2, got {}", self.n_transmit),
            );
        }
        if self.n_receive < 2 {
            return fail("n_receive", format!("must be >= 2, got {}", self.n_receive));
        }
        if !(self.spacing_ratio.is_finite() && self.spacing_ratio > 0.0) {
            return fail(
                "spacing_ratio",
                format!("must be positive, got {}", self.spacing_ratio),
            );
        }
        if self.snr_db_list.is_empty() {
            return fail("snr_db_list", "must not be empty".into());
        }
        if let Some(bad) = self.snr_db_list.iter().find(|v| !v.is_finite()) {
            return fail("snr_db_list", format!("non-finite entry {bad}"));
        }
        if !(0.0..=85.0).contains(&self.angular_halfwidth_deg) {
            return fail(
                "angular_halfwidth_deg",
                format!("must lie in [0, 85], got {}", self.angular_halfwidth_deg),
            );
        }
        if self.n_trials == 0 {
            return fail("n_trials", "must be >= 1".into());
        }
        if self.methods.is_empty() {
            return fail("methods", "must name at least one method".into());
        }
        if self.repetitions == 0 {
            return fail("repetitions", "must be >= 1".into());
        }
        if !(self.gain_magnitude.is_finite() && self.gain_magnitude > 0.0) {
            return fail(
                "gain_magnitude",
                format!("must be positive, got {}", self.gain_magnitude),
            );
        }
        if self.methods.contains(&Method::Sd) && self.gain_magnitude != 1.0 {
            return fail(
                "gain_magnitude",
                "the SD voltage-level rule assumes a unit-modulus path gain".into(),
            );
        }
        if self.grid_points < 2 {
            return fail(
                "grid_points",
                format!("must be >= 2, got {}", self.grid_points),
            );
        }
        None
    }

    fn geometries(&self) -> Result<(ArrayGeometry, ArrayGeometry)> {
        Ok((
            ArrayGeometry::with_ratio(self.n_receive, self.spacing_ratio)?,
            ArrayGeometry::with_ratio(self.n_transmit, self.spacing_ratio)?,
        ))
    }

    fn grid(&self) -> AngleGrid {
        AngleGrid::with_points(self.grid_points)
    }
}

/// Seeds for the scenario and for the receiver noise of trial `index`.
///
/// Each index selects its own ChaCha20 stream under `base_seed`, so trials
/// never share random numbers.
pub fn trial_seeds(base_seed: u64, index: u64) -> (u64, u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    (rng.next_u64(), rng.next_u64())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform angles on `[−Θ, Θ]` and a uniform-phase gain of modulus `|α|`.
pub fn draw_scenario(
    rng: &mut impl Rng,
    halfwidth_deg: f64,
    gain_magnitude: f64,
    bs: ArrayGeometry,
    ms: ArrayGeometry,
) -> Result<ChannelScenario> {
    let mut angle = || {
        if halfwidth_deg > 0.0 {
            rng.random_range(-halfwidth_deg..=halfwidth_deg)
        } else {
            0.0
        }
    };
    let theta = angle();
    let phi = angle();
    let gain = Complex64::from_polar(gain_magnitude, rng.random_range(0.0..2.0 * PI));
    make_los_channel(theta, phi, gain, bs, ms)
}

/// Squared errors of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    /// `‖Ȟ − H‖²_F`.
    pub error_sq: f64,
    /// `‖H‖²_F`.
    pub channel_sq: f64,
}

impl TrialOutcome {
    pub fn nmse(&self) -> f64 {
        self.error_sq / self.channel_sq
    }
}

/// Everything a method needs at one SNR, prepared once and reused across
/// trials.
#[derive(Debug, Clone)]
pub struct MethodPipeline {
    method: Method,
    snr_power: f64,
    receiver: Option<SigmaDeltaConfig>,
    /// Output of the transmit converter fed with the predistorted pilots.
    emitted: CMatrix,
    /// Known pilot sequence `S` used for despreading.
    pilots: CMatrix,
    estimator: ChannelEstimator,
}

impl MethodPipeline {
    pub fn new(
        method: Method,
        snr_power: f64,
        bs: ArrayGeometry,
        ms: ArrayGeometry,
        pilots: &PilotSet,
        repetitions: usize,
        grid: AngleGrid,
    ) -> Result<Self> {
        let n_r = bs.n_elements();
        let n_t = ms.n_elements();
        if pilots.n_transmit() != n_t {
            return Err(Error::dimension(
                "MethodPipeline pilots",
                n_t,
                pilots.n_transmit(),
            ));
        }
        let transmitter = SigmaDeltaConfig::new(n_t, 1.0)?;
        let emitted =
            sigma_delta_columns(&pilots.repeated_predistorted(repetitions), &transmitter)?;
        let (receiver, noise) = match method {
            Method::Sd => {
                let b = select_voltage_level(snr_power, n_t);
                (
                    Some(SigmaDeltaConfig::new(n_r, b)?),
                    combined_noise_covariance(n_r, b)?,
                )
            }
            Method::Uq | Method::OneBit => (None, NoiseModel::white(n_r)),
        };
        Ok(Self {
            method,
            snr_power,
            receiver,
            emitted,
            pilots: pilots.repeated_transmit(repetitions),
            estimator: ChannelEstimator::new(noise, bs, ms, grid)?,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Receiver voltage level, when the method has a sigma-delta front end.
    pub fn level_b(&self) -> Option<f64> {
        self.receiver.map(|c| c.level_b())
    }

    pub fn estimator(&self) -> &ChannelEstimator {
        &self.estimator
    }

    /// Receiver output for the received block `X`.
    pub fn front_end(&self, received_x: &CMatrix) -> Result<CMatrix> {
        match self.method {
            Method::Sd => {
                sigma_delta_columns(received_x, self.receiver.as_ref().expect("SD receiver"))
            }
            Method::Uq => Ok(received_x.clone()),
            Method::OneBit => {
                let mut y = received_x.clone();
                for z in y.iter_mut() {
                    *z = quantize_1bit(*z, 1.0)?;
                }
                Ok(y)
            }
        }
    }

    pub fn run(&self, scenario: &ChannelScenario, noise: ReceiverNoise) -> Result<TrialOutcome> {
        let record = synthesize_received(scenario, &self.emitted, self.snr_power, noise)?;
        let y = self.front_end(&record.received_x)?;
        let result = self.estimator.estimate(&y, &self.pilots, self.snr_power)?;
        Ok(TrialOutcome {
            error_sq: frobenius_sq(&(&result.h_check - &scenario.channel)),
            channel_sq: frobenius_sq(&scenario.channel),
        })
    }
}

/// One trial of `method` on `scenario` with the default grid and a single
/// pilot block.
pub fn run_trial(
    scenario: &ChannelScenario,
    method: Method,
    snr_power: f64,
    noise: ReceiverNoise,
) -> Result<TrialOutcome> {
    let pilots = predistort_pilots(scenario.ms_array.n_elements())?;
    MethodPipeline::new(
        method,
        snr_power,
        scenario.bs_array,
        scenario.ms_array,
        &pilots,
        1,
        AngleGrid::default(),
    )?
    .run(scenario, noise)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmseRow {
    pub method: Method,
    pub snr_db: f64,
    /// `mean ‖Ȟ − H‖²_F / mean ‖H‖²_F`.
    pub nmse: f64,
    /// Standard error of the numerator mean, divided by the denominator mean.
    pub stderr: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmseTable {
    /// Sorted by method label, then SNR.
    pub rows: Vec<NmseRow>,
}

impl NmseTable {
    pub fn get(&self, method: Method, snr_db: f64) -> Option<&NmseRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.snr_db == snr_db)
    }
}

fn aggregate(method: Method, snr_db: f64, outcomes: &[TrialOutcome]) -> NmseRow {
    let n = outcomes.len() as f64;
    let mean_err = outcomes.iter().map(|o| o.error_sq).sum::<f64>() / n;
    let mean_h = outcomes.iter().map(|o| o.channel_sq).sum::<f64>() / n;
    let stderr = if outcomes.len() > 1 {
        let var = outcomes
            .iter()
            .map(|o| (o.error_sq - mean_err).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt() / mean_h
    } else {
        f64::NAN
    };
    NmseRow {
        method,
        snr_db,
        nmse: mean_err / mean_h,
        stderr,
        n_trials: outcomes.len(),
    }
}

/// Runs every requested method at every SNR on the same scenarios and the
/// same receiver-noise realizations.
pub fn nmse_sweep(config: &MonteCarloConfig) -> Result<NmseTable> {
    config.validate()?;
    let (bs, ms) = config.geometries()?;
    let pilots = predistort_pilots(config.n_transmit)?;

    let mut cases = Vec::new();
    for &snr_db in &config.snr_db_list {
        for &method in &config.methods {
            let pipeline = MethodPipeline::new(
                method,
                db_to_linear(snr_db),
                bs,
                ms,
                &pilots,
                config.repetitions,
                config.grid(),
            )?;
            cases.push((snr_db, pipeline));
        }
    }

    let per_trial: Vec<Vec<TrialOutcome>> = (0..config.n_trials as u64)
        .into_par_iter()
        .map(|t| {
            let (scenario_seed, noise_seed) = trial_seeds(config.base_seed, t);
            let scenario = draw_scenario(
                &mut ChaCha20Rng::seed_from_u64(scenario_seed),
                config.angular_halfwidth_deg,
                config.gain_magnitude,
                bs,
                ms,
            )?;
            let noise = if config.noiseless {
                ReceiverNoise::Noiseless
            } else {
                ReceiverNoise::Seeded(noise_seed)
            };
            cases
                .iter()
                .map(|(_, pipeline)| pipeline.run(&scenario, noise))
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<NmseRow> = cases
        .iter()
        .enumerate()
        .map(|(k, (snr_db, pipeline))| {
            let outcomes: Vec<TrialOutcome> = per_trial.iter().map(|t| t[k]).collect();
            aggregate(pipeline.method(), *snr_db, &outcomes)
        })
        .collect();
    rows.sort_by(|a, b| {
        a.method
            .label()
            .cmp(b.method.label())
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
    Ok(NmseTable { rows })
}

/// Parameters of the correlation study. The channel is fixed at broadside
/// (`θ = φ = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationConfig {
    pub n_transmit: usize,
    pub n_receive: usize,
    pub spacing_ratio: f64,
    pub snr_db: f64,
    pub n_draws: usize,
    pub seed: u64,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            n_transmit: 8,
            n_receive: 128,
            spacing_ratio: 0.125,
            snr_db: -5.0,
            n_draws: 2000,
            seed: 1,
        }
    }
}

/// Per-antenna Pearson correlation between `ℜ(x_i)` and the real part of
/// the quantization noise. `None` where either series has zero variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    /// Sigma-delta receiver, noise `q̃`.
    pub sd: Vec<Option<f64>>,
    /// Same level `b` without feedback, noise `y − x`.
    pub onebit: Vec<Option<f64>>,
    pub n_draws: usize,
    pub level_b: f64,
}

impl CorrelationProfile {
    /// Mean of `|corr|` over the 1-based antenna range, skipping undefined
    /// entries. `None` when nothing in range is defined.
    pub fn mean_abs(profile: &[Option<f64>], antennas: RangeInclusive<usize>) -> Option<f64> {
        let vals: Vec<f64> = antennas
            .filter_map(|i| profile.get(i.checked_sub(1)?).copied().flatten())
            .map(f64::abs)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Sample Pearson correlation; `None` for fewer than two samples or zero
/// variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs[..n].iter().zip(&ys[..n]) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

struct DrawSamples {
    input: Vec<f64>,
    sd_noise: Vec<f64>,
    onebit_noise: Vec<f64>,
}

/// Correlation between converter input and quantization noise per antenna.
///
/// Each draw uses a fresh uniform-phase unit gain, a uniformly chosen pilot
/// column and fresh receiver noise; the level `b` follows
/// [`select_voltage_level`].
pub fn correlation_experiment(config: &CorrelationConfig) -> Result<CorrelationProfile> {
    if config.n_draws < 100 {
        return Err(Error::Config(format!(
            "n_draws: must be >= 100, got {}",
            config.n_draws
        )));
    }
    let bs = ArrayGeometry::with_ratio(config.n_receive, config.spacing_ratio)?;
    let ms = ArrayGeometry::with_ratio(config.n_transmit, config.spacing_ratio)?;
    let pilots = predistort_pilots(config.n_transmit)?;
    let snr_power = db_to_linear(config.snr_db);
    let b = select_voltage_level(snr_power, config.n_transmit);
    let sd = SigmaDeltaConfig::new(config.n_receive, b)?;
    let amplitude = Complex64::new((snr_power / (2.0 * config.n_transmit as f64)).sqrt(), 0.0);

    let draws: Vec<DrawSamples> = (0..config.n_draws as u64)
        .into_par_iter()
        .map(|d| {
            let mut rng = stream_rng(config.seed, d);
            let gain = Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI));
            let scenario = make_los_channel(0.0, 0.0, gain, bs, ms)?;
            let column = rng.random_range(0..config.n_transmit);
            let s = pilots.transmit.column(column);
            let w = complex_gaussian(&mut rng, config.n_receive, 1);
            let x: CVector = (&scenario.channel * s * amplitude + w)
                .column(0)
                .into_owned();

            let trace = sigma_delta_forward(&x, &sd)?;
            let onebit_noise = trace
                .input_x
                .iter()
                .map(|&xi| Ok((quantize_1bit(xi, b)? - limit_amplitude(xi, b)?).re))
                .collect::<Result<Vec<_>>>()?;
            Ok(DrawSamples {
                input: trace.input_x.iter().map(|z| z.re).collect(),
                sd_noise: trace.floor_noise_qtilde.iter().map(|z| z.re).collect(),
                onebit_noise,
            })
        })
        .collect::<Result<_>>()?;

    let column = |i: usize, pick: fn(&DrawSamples) -> &Vec<f64>| -> Vec<f64> {
        draws.iter().map(|d| pick(d)[i]).collect()
    };
    let mut sd_profile = Vec::with_capacity(config.n_receive);
    let mut onebit_profile = Vec::with_capacity(config.n_receive);
    for i in 0..config.n_receive {
        let input = column(i, |d| &d.input);
        sd_profile.push(pearson(&input, &column(i, |d| &d.sd_noise)));
        onebit_profile.push(pearson(&input, &column(i, |d| &d.onebit_noise)));
    }
    Ok(CorrelationProfile {
        sd: sd_profile,
        onebit: onebit_profile,
        n_draws: config.n_draws,
        level_b: b,
    })
}

/// Averaged periodogram of the shaped noise `2b·U⁻¹·q̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingReport {
    /// Mean power per DFT bin, bin `k` at spatial frequency `2πk/N`.
    pub periodogram: Vec<f64>,
    /// Summed power over `|ω| < π/2`.
    pub lower_band_power: f64,
    /// Summed power over `|ω| ≥ π/2`.
    pub upper_band_power: f64,
    pub n_draws: usize,
}

/// Drives the converter with i.i.d. inputs uniform on the `[−b, b]` box and
/// measures where the shaped noise power lands.
pub fn noise_shaping_experiment(
    n_channels: usize,
    level_b: f64,
    n_draws: usize,
    seed: u64,
) -> Result<ShapingReport> {
    if n_draws == 0 {
        return Err(Error::InvalidInput("n_draws must be >= 1".into()));
    }
    let config = SigmaDeltaConfig::new(n_channels, level_b)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_channels);
    let mut periodogram = vec![0.0; n_channels];
    for d in 0..n_draws as u64 {
        let mut rng = stream_rng(seed, d);
        let x = CVector::from_fn(n_channels, |_, _| {
            Complex64::new(
                rng.random_range(-level_b..=level_b),
                rng.random_range(-level_b..=level_b),
            )
        });
        let trace = sigma_delta_forward(&x, &config)?;
        let mut shaped: Vec<Complex64> = first_difference(trace.floor_noise_qtilde.as_slice())
            .into_iter()
            .map(|q| q * (2.0 * level_b))
            .collect();
        fft.process(&mut shaped);
        for (acc, z) in periodogram.iter_mut().zip(&shaped) {
            *acc += z.norm_sqr() / n_channels as f64;
        }
    }
    periodogram.iter_mut().for_each(|p| *p /= n_draws as f64);

    let (mut lower, mut upper) = (0.0, 0.0);
    for (k, p) in periodogram.iter().enumerate() {
        // frequency folded into [0, π]
        let omega = 2.0 * PI * k.min(n_channels - k) as f64 / n_channels as f64;
        if omega < PI / 2.0 {
            lower += p;
        } else {
            upper += p;
        }
    }
    Ok(ShapingReport {
        periodogram,
        lower_band_power: lower,
        upper_band_power: upper,
        n_draws,
    })
}
