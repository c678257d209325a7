//! Fast invariant battery behind the `verify` subcommand.
//!
//! Each check is exact up to floating-point rounding, so a failure points at
//! a real defect rather than Monte Carlo noise.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::channel::{ArrayGeometry, ReceiverNoise};
use crate::estimator::AngleGrid;
use crate::experiments::{draw_scenario, noise_shaping_experiment, Method, MethodPipeline};
use crate::linalg::{accumulate, first_difference};
use crate::pilots::{predistort_pilots, verify_pilots_with};
use crate::quantizer::{
    combined_noise_covariance, floor_identity_residual, quantization_noise_closed_form,
    sigma_delta_forward, SigmaDeltaConfig, ZeroSign,
};
use crate::{CVector, Result};

/// Absolute tolerance of the exact identities.
pub const IDENTITY_TOL: f64 = 1e-9;
/// NMSE bound of the noiseless unquantized pipeline.
pub const NOISELESS_NMSE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Sign assigned to zero by the pilot quantizer. `Negative` is a fault
    /// that the pilot check must catch.
    pub pilot_zero_sign: ZeroSign,
    pub identity_vectors: usize,
    pub noiseless_scenarios: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            pilot_zero_sign: ZeroSign::Positive,
            identity_vectors: 10_000,
            noiseless_scenarios: 100,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(CheckResult {
            name,
            passed,
            detail,
        });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Worst-case deviations of the converter identities over a batch of random
/// inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentityStats {
    pub vectors: usize,
    /// Floor identity residual.
    pub floor_residual: f64,
    /// `|closed form − (y − r)|`.
    pub closed_form_error: f64,
    /// `|y − (x + 2b·U⁻¹·q̃)|`.
    pub reconstruction_error: f64,
    /// Every component of `q̃` lies in `(−½, ½]`.
    pub qtilde_in_range: bool,
}

/// Runs `vectors` inputs of length `n`, components uniform on `[−b, b]`,
/// through the converter and records the identity residuals.
pub fn identity_suite(n: usize, level_b: f64, vectors: usize, seed: u64) -> Result<IdentityStats> {
    let config = SigmaDeltaConfig::new(n, level_b)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut stats = IdentityStats {
        vectors,
        qtilde_in_range: true,
        ..IdentityStats::default()
    };
    for _ in 0..vectors {
        let x = CVector::from_fn(n, |_, _| {
            Complex64::new(
                rng.random_range(-level_b..=level_b),
                rng.random_range(-level_b..=level_b),
            )
        });
        let trace = sigma_delta_forward(&x, &config)?;
        stats.floor_residual = stats
            .floor_residual
            .max(floor_identity_residual(&trace, &config));

        let closed = quantization_noise_closed_form(&trace.input_x, &config)?;
        let direct = &trace.output_y - &trace.prequant_r;
        stats.closed_form_error = stats
            .closed_form_error
            .max(crate::max_abs(&(closed - direct)));

        let shaped = first_difference(trace.floor_noise_qtilde.as_slice());
        for ((y, x), s) in trace.output_y.iter().zip(&trace.input_x).zip(shaped) {
            stats.reconstruction_error = stats
                .reconstruction_error
                .max((y - (x + s * (2.0 * level_b))).norm());
        }
        let in_range = |v: f64| v > -0.5 && v <= 0.5;
        stats.qtilde_in_range &= trace
            .floor_noise_qtilde
            .iter()
            .all(|q| in_range(q.re) && in_range(q.im));

        // q̃ recomputed from its definition
        let uq = accumulate((&trace.output_y - &trace.input_x).as_slice());
        for (a, q) in uq.iter().zip(&trace.floor_noise_qtilde) {
            stats.reconstruction_error = stats
                .reconstruction_error
                .max((a / (2.0 * level_b) - q).norm());
        }
    }
    Ok(stats)
}

/// Runs the whole battery.
pub fn run_verification(options: &VerifyOptions) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let n = 128;

    for (k, b) in [1.0, 4.37].into_iter().enumerate() {
        let s = identity_suite(
            n,
            b,
            options.identity_vectors,
            options.seed.wrapping_add(k as u64),
        )?;
        report.push(
            "floor identity",
            s.floor_residual <= IDENTITY_TOL,
            format!(
                "b = {b}, {} vectors, max residual {:e}",
                s.vectors, s.floor_residual
            ),
        );
        report.push(
            "closed-form noise",
            s.closed_form_error <= IDENTITY_TOL,
            format!("b = {b}, max error {:e}", s.closed_form_error),
        );
        report.push(
            "linearized reconstruction",
            s.reconstruction_error <= IDENTITY_TOL && s.qtilde_in_range,
            format!(
                "b = {b}, max error {:e}, q̃ in (−½, ½]: {}",
                s.reconstruction_error, s.qtilde_in_range
            ),
        );
    }

    let mut bad_orders = Vec::new();
    for n_t in [2, 4, 8, 16, 32, 64] {
        if !verify_pilots_with(&predistort_pilots(n_t)?, options.pilot_zero_sign) {
            bad_orders.push(n_t);
        }
    }
    report.push(
        "pilot exactness",
        bad_orders.is_empty(),
        if bad_orders.is_empty() {
            "N_t = 2..64: ΣΔ(T) = G + jG and S·Sᴴ = 2N_t·I".into()
        } else {
            format!("failed for N_t = {bad_orders:?}")
        },
    );

    let mut worst_white: f64 = 0.0;
    for b in [1.0, 4.37, 14.77] {
        worst_white = worst_white.max(combined_noise_covariance(n, b)?.whitening_residual());
    }
    report.push(
        "whitening",
        worst_white <= IDENTITY_TOL,
        format!("max |W·R_n·Wᴴ − I| = {worst_white:e}"),
    );

    let bs = ArrayGeometry::with_ratio(n, 0.125)?;
    let ms = ArrayGeometry::with_ratio(8, 0.125)?;
    let pilots = predistort_pilots(8)?;
    let pipeline = MethodPipeline::new(Method::Uq, 1.0, bs, ms, &pilots, 1, AngleGrid::default())?;
    let mut rng = ChaCha20Rng::seed_from_u64(options.seed);
    let mut worst_nmse: f64 = 0.0;
    for _ in 0..options.noiseless_scenarios {
        let scenario = draw_scenario(&mut rng, 60.0, 1.0, bs, ms)?;
        worst_nmse = worst_nmse.max(pipeline.run(&scenario, ReceiverNoise::Noiseless)?.nmse());
    }
    report.push(
        "noiseless recovery",
        worst_nmse <= NOISELESS_NMSE_TOL,
        format!(
            "UQ, {} scenarios, Θ = 60°, max NMSE {worst_nmse:e}",
            options.noiseless_scenarios
        ),
    );

    let shaping = noise_shaping_experiment(n, 4.37, 500, options.seed)?;
    report.push(
        "noise shaping",
        shaping.upper_band_power > shaping.lower_band_power,
        format!(
            "upper-band power {:.6e} vs lower-band {:.6e}",
            shaping.upper_band_power, shaping.lower_band_power
        ),
    );

    Ok(report)
}
