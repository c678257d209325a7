//! First-order, 1-bit spatial sigma-delta converter.
//!
//! Each antenna's quantizer sees the running sum of the inputs minus the
//! running sum of the previous outputs:
//!
//! ```text
//! r_i = Σ_{l≤i} x_l − Σ_{l<i} y_l,    y_i = Q(r_i)
//! ```
//!
//! For amplitude-limited inputs the quantization noise is a deterministic
//! function of the input, which gives the floor identity checked by
//! [`floor_identity_residual`] and the linearized form
//! `y = x + 2b·U⁻¹·q̃` with `q̃` components in `(−½, ½]`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::linalg::{self, accumulate};
use crate::{CMatrix, CVector, Error, Result};

/// Output of `sign(0)` inside the 1-bit quantizer.
///
/// The pilot predistortion only produces the intended transmit sequence with
/// [`ZeroSign::Positive`]. The negative variant exists so the invariant
/// battery can demonstrate that coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroSign {
    #[default]
    Positive,
    Negative,
}

impl ZeroSign {
    #[inline]
    fn sign(self, v: f64) -> f64 {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            match self {
                ZeroSign::Positive => 1.0,
                ZeroSign::Negative => -1.0,
            }
        }
    }
}

/// Channel count and output level of a spatial sigma-delta converter.
///
/// The accumulation matrices `U` (lower-triangular ones) and `V = U − I` are
/// derived from `n_channels` on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaDeltaConfig {
    n_channels: usize,
    level_b: f64,
}

impl SigmaDeltaConfig {
    pub fn new(n_channels: usize, level_b: f64) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::InvalidInput("n_channels must be at least 1".into()));
        }
        if !(level_b.is_finite() && level_b > 0.0) {
            return Err(Error::InvalidInput(format!(
                "level_b must be positive and finite, got {level_b}"
            )));
        }
        Ok(Self {
            n_channels,
            level_b,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn level_b(&self) -> f64 {
        self.level_b
    }

    /// `U`.
    pub fn accumulator(&self) -> DMatrix<f64> {
        linalg::accumulator_matrix(self.n_channels)
    }

    /// `V = U − I`.
    pub fn feedback(&self) -> DMatrix<f64> {
        self.accumulator() - DMatrix::identity(self.n_channels, self.n_channels)
    }

    /// `U⁻¹`, built analytically.
    pub fn accumulator_inverse(&self) -> DMatrix<f64> {
        linalg::accumulator_inverse(self.n_channels)
    }
}

fn check_finite(value: Complex64) -> Result<()> {
    if value.re.is_finite() && value.im.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("non-finite sample {value}")))
    }
}

/// `b·sign(ℜx) + j·b·sign(ℑx)` with `sign(0) = +1`.
pub fn quantize_1bit(value: Complex64, level_b: f64) -> Result<Complex64> {
    check_finite(value)?;
    Ok(quantize_with(value, level_b, ZeroSign::Positive))
}

#[inline]
pub(crate) fn quantize_with(value: Complex64, level_b: f64, zero: ZeroSign) -> Complex64 {
    Complex64::new(level_b * zero.sign(value.re), level_b * zero.sign(value.im))
}

/// Clamps real and imaginary parts independently to `[−b, b]`.
pub fn limit_amplitude(value: Complex64, level_b: f64) -> Result<Complex64> {
    check_finite(value)?;
    Ok(Complex64::new(
        value.re.clamp(-level_b, level_b),
        value.im.clamp(-level_b, level_b),
    ))
}

/// Every intermediate of one pass through the converter.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationTrace {
    /// Converter input after the amplitude limiter.
    pub input_x: CVector,
    /// Quantizer inputs `r`.
    pub prequant_r: CVector,
    /// Outputs `y`, each in `{±b ± jb}`.
    pub output_y: CVector,
    /// `e = y − r`.
    pub noise_e: CVector,
    /// Equivalent floor noise `q̃ = (1/2b)·U·(y − x)`.
    pub floor_noise_qtilde: CVector,
}

/// Limits every entry of `input` to the `[−b, b]` box and runs the spatial
/// sigma-delta recursion across it.
pub fn sigma_delta_forward(
    input: &CVector,
    config: &SigmaDeltaConfig,
) -> Result<QuantizationTrace> {
    sigma_delta_forward_with(input, config, ZeroSign::Positive)
}

/// [`sigma_delta_forward`] with an explicit `sign(0)` convention.
pub fn sigma_delta_forward_with(
    input: &CVector,
    config: &SigmaDeltaConfig,
    zero: ZeroSign,
) -> Result<QuantizationTrace> {
    let n = config.n_channels;
    if input.len() != n {
        return Err(Error::dimension("sigma_delta_forward", n, input.len()));
    }
    let b = config.level_b;
    let x = input
        .iter()
        .map(|&v| limit_amplitude(v, b))
        .collect::<Result<Vec<_>>>()?;

    let mut r = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut acc = Complex64::new(0.0, 0.0);
    for &xi in &x {
        acc += xi;
        let yi = quantize_with(acc, b, zero);
        r.push(acc);
        y.push(yi);
        acc -= yi;
    }

    let e: Vec<_> = y.iter().zip(&r).map(|(yi, ri)| yi - ri).collect();
    let diff: Vec<_> = y.iter().zip(&x).map(|(yi, xi)| yi - xi).collect();
    let scale = 1.0 / (2.0 * b);
    let qtilde: Vec<_> = accumulate(&diff).into_iter().map(|v| v * scale).collect();

    Ok(QuantizationTrace {
        input_x: CVector::from_vec(x),
        prequant_r: CVector::from_vec(r),
        output_y: CVector::from_vec(y),
        noise_e: CVector::from_vec(e),
        floor_noise_qtilde: CVector::from_vec(qtilde),
    })
}

/// Runs every column of `input` through the converter independently.
pub fn sigma_delta_columns(input: &CMatrix, config: &SigmaDeltaConfig) -> Result<CMatrix> {
    sigma_delta_columns_with(input, config, ZeroSign::Positive)
}

pub(crate) fn sigma_delta_columns_with(
    input: &CMatrix,
    config: &SigmaDeltaConfig,
    zero: ZeroSign,
) -> Result<CMatrix> {
    if input.nrows() != config.n_channels {
        return Err(Error::dimension(
            "sigma-delta rows",
            config.n_channels,
            input.nrows(),
        ));
    }
    let mut out = CMatrix::zeros(input.nrows(), input.ncols());
    for (k, col) in input.column_iter().enumerate() {
        let trace = sigma_delta_forward_with(&col.clone_owned(), config, zero)?;
        out.set_column(k, &trace.output_y);
    }
    Ok(out)
}

fn fractional(v: f64) -> f64 {
    v - v.floor()
}

/// Deterministic quantization noise for amplitude-limited inputs:
///
/// `ℜ(e_i) = b − 2b·⟨(i−1)/2 + Σ_{k≤i} ℜ(x_k)/2b⟩`, likewise for `ℑ`.
pub fn quantization_noise_closed_form(
    input: &CVector,
    config: &SigmaDeltaConfig,
) -> Result<CVector> {
    let n = config.n_channels;
    if input.len() != n {
        return Err(Error::dimension(
            "quantization_noise_closed_form",
            n,
            input.len(),
        ));
    }
    let b = config.level_b;
    for (i, &v) in input.iter().enumerate() {
        check_finite(v)?;
        if v.re.abs() > b || v.im.abs() > b {
            return Err(Error::Precondition(format!(
                "entry {i} = {v} exceeds the amplitude bound {b}"
            )));
        }
    }
    let scale = 1.0 / (2.0 * b);
    let mut sum = Complex64::new(0.0, 0.0);
    Ok(CVector::from_iterator(
        n,
        input.iter().enumerate().map(|(i, &v)| {
            sum += v * scale;
            let offset = i as f64 / 2.0;
            Complex64::new(
                b - 2.0 * b * fractional(offset + sum.re),
                b - 2.0 * b * fractional(offset + sum.im),
            )
        }),
    ))
}

/// Largest deviation between the two sides of the floor identity
///
/// `(1/2b)·U·ℜ(y) + ½·V·1 − ½·1 = floor((1/2b)·U·ℜ(x) + ½·V·1)`
///
/// and its imaginary counterpart. Zero (to rounding) whenever the trace came
/// from an amplitude-limited input.
pub fn floor_identity_residual(trace: &QuantizationTrace, config: &SigmaDeltaConfig) -> f64 {
    let scale = 1.0 / (2.0 * config.level_b);
    let ux = accumulate(trace.input_x.as_slice());
    let uy = accumulate(trace.output_y.as_slice());
    let mut worst: f64 = 0.0;
    for (i, (sx, sy)) in ux.iter().zip(&uy).enumerate() {
        let half_v1 = i as f64 / 2.0;
        for (px, py) in [(sx.re, sy.re), (sx.im, sy.im)] {
            let lhs = scale * py + half_v1 - 0.5;
            let rhs = (scale * px + half_v1).floor();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

/// Covariance of the combined receiver-plus-shaped-quantization noise and a
/// whitener `W` with `W·R·Wᴴ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    covariance: CMatrix,
    whitener: CMatrix,
    white: bool,
}

impl NoiseModel {
    /// Unit white noise; the whitener is the identity.
    pub fn white(n: usize) -> Self {
        Self {
            covariance: CMatrix::identity(n, n),
            whitener: CMatrix::identity(n, n),
            white: true,
        }
    }

    /// Same covariance as [`combined_noise_covariance`], whitened by the
    /// inverse of its lower Cholesky factor instead of the principal root.
    pub fn cholesky_whitened(n_receive: usize, level_b: f64) -> Result<Self> {
        let real = shaped_covariance(n_receive, level_b)?;
        let chol = real
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("noise covariance is not positive definite".into()))?;
        let l_inv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        Ok(Self {
            covariance: linalg::to_complex(&real),
            whitener: linalg::to_complex(&l_inv),
            white: false,
        })
    }

    pub fn from_parts(covariance: CMatrix, whitener: CMatrix) -> Result<Self> {
        let n = covariance.nrows();
        if !covariance.is_square() || whitener.shape() != (n, n) {
            return Err(Error::dimension(
                "NoiseModel::from_parts",
                format!("{n}x{n}"),
                format!("{:?} / {:?}", covariance.shape(), whitener.shape()),
            ));
        }
        let white = covariance == CMatrix::identity(n, n) && whitener == covariance;
        Ok(Self {
            covariance,
            whitener,
            white,
        })
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    /// `R_n`.
    pub fn covariance(&self) -> &CMatrix {
        &self.covariance
    }

    /// `R_n^{-1/2}` (or whichever whitener this model was built with).
    pub fn whitener(&self) -> &CMatrix {
        &self.whitener
    }

    /// True when the whitener is exactly the identity.
    pub fn is_white(&self) -> bool {
        self.white
    }

    /// Largest entry of `|W·R·Wᴴ − I|`.
    pub fn whitening_residual(&self) -> f64 {
        let n = self.dim();
        let w = &self.whitener;
        let prod = w * &self.covariance * w.adjoint();
        crate::max_abs(&(prod - CMatrix::identity(n, n)))
    }
}

fn shaped_covariance(n_receive: usize, level_b: f64) -> Result<DMatrix<f64>> {
    // validates n and b
    SigmaDeltaConfig::new(n_receive, level_b)?;
    let u_inv = linalg::accumulator_inverse(n_receive);
    let gram = &u_inv * u_inv.transpose();
    Ok(DMatrix::identity(n_receive, n_receive) + gram * (2.0 * level_b * level_b / 3.0))
}

/// `R_n = I + (2b²/3)·U⁻¹·U⁻ᴴ` with its Hermitian principal inverse square
/// root as whitener.
pub fn combined_noise_covariance(n_receive: usize, level_b: f64) -> Result<NoiseModel> {
    let real = shaped_covariance(n_receive, level_b)?;
    let whitener = linalg::principal_inverse_sqrt(&real)?;
    Ok(NoiseModel {
        covariance: linalg::to_complex(&real),
        whitener: linalg::to_complex(&whitener),
        white: false,
    })
}
