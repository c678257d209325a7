//! Prewhitened MUSIC estimation of the line-of-sight channel.
//!
//! The received block is whitened with the noise model and despread with the
//! orthogonal pilots, giving `Ĥ ≈ W·H + noise`. The dominant singular pair of
//! `Ĥ` spans the signal subspaces; the angles are the peaks of
//!
//! ```text
//! ρ_BS(θ) = 1 / ‖P_nᴴ·W·a_BS(θ)‖²      ρ_MS(φ) = 1 / ‖Q_nᴴ·a_MS(φ)‖²
//! ```
//!
//! By default each steering vector is first scaled to unit norm (after
//! whitening), see [`SpectrumForm`]. Unwhitened steering vectors all have
//! norm `sqrt(N)`, so this only changes the base-station search of a
//! colored-noise model.
//!
//! The path gain is the least-squares fit of `vec(Ĥ)` onto
//! `vec(W·a_BS(θ̂)·a_MS(φ̂)ᴴ)`.

use num_complex::Complex64;

use crate::channel::{rank_one, steering_vector, ArrayGeometry};
use crate::linalg::complete_unitary;
use crate::quantizer::NoiseModel;
use crate::{CMatrix, CVector, Error, Result};

/// Denominators below this are clamped when forming the pseudo-spectrum.
pub const SPECTRUM_FLOOR: f64 = 1e-300;

/// Denominator of the pseudo-spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumForm {
    /// `‖Nᴴ·v‖² / ‖v‖²` with `v` the (whitened) steering vector.
    ///
    /// The whitener attenuates high spatial frequencies, so without the
    /// normalization steering vectors near endfire have small norms and
    /// win the search whenever the signal subspace is noisy.
    #[default]
    Normalized,
    /// `‖Nᴴ·v‖²` as is.
    Plain,
}

/// Uniform search grid followed by golden-section refinement around the
/// best grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGrid {
    pub start_deg: f64,
    pub end_deg: f64,
    pub points: usize,
    /// Width of the refinement bracket at which the search stops.
    pub refine_tol_deg: f64,
    pub form: SpectrumForm,
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self {
            start_deg: -89.9,
            end_deg: 89.9,
            points: 4096,
            refine_tol_deg: 1e-4,
            form: SpectrumForm::Normalized,
        }
    }
}

impl AngleGrid {
    pub fn with_points(points: usize) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.points >= 2
            && self.start_deg.is_finite()
            && self.end_deg.is_finite()
            && self.start_deg < self.end_deg
            && self.start_deg > -90.0
            && self.end_deg < 90.0
            && self.refine_tol_deg > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid angle grid {self:?}")))
        }
    }

    pub fn step(&self) -> f64 {
        (self.end_deg - self.start_deg) / (self.points - 1) as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.end_deg
                } else {
                    self.start_deg + step * i as f64
                }
            })
            .collect()
    }
}

/// `Ĥ` together with the noise model that whitened it.
#[derive(Debug, Clone)]
pub struct WhitenedChannelEstimate<'a> {
    /// `N_r × N_t`.
    pub h_hat: CMatrix,
    pub noise: &'a NoiseModel,
}

/// `Ĥ = W·Y·Sᴴ / (K·sqrt(2·P·N_t))` where `S` holds `K` pilot blocks.
pub fn whiten_despread<'a>(
    quantized_y: &CMatrix,
    transmit_s: &CMatrix,
    snr_power: f64,
    noise: &'a NoiseModel,
) -> Result<WhitenedChannelEstimate<'a>> {
    let (n_r, m) = quantized_y.shape();
    let n_t = transmit_s.nrows();
    if transmit_s.ncols() != m {
        return Err(Error::dimension(
            "whiten_despread pilot length",
            m,
            transmit_s.ncols(),
        ));
    }
    if n_t == 0 || m % n_t != 0 {
        return Err(Error::dimension(
            "whiten_despread pilot blocks",
            format!("a multiple of {n_t}"),
            m,
        ));
    }
    if noise.dim() != n_r {
        return Err(Error::dimension(
            "whiten_despread noise model",
            n_r,
            noise.dim(),
        ));
    }
    if !(snr_power.is_finite() && snr_power > 0.0) {
        return Err(Error::InvalidInput(format!(
            "transmit power must be positive and finite, got {snr_power}"
        )));
    }
    let repetitions = (m / n_t) as f64;
    let scale = 1.0 / (repetitions * (2.0 * snr_power * n_t as f64).sqrt());
    let despread = quantized_y * transmit_s.adjoint() * Complex64::new(scale, 0.0);
    let h_hat = if noise.is_white() {
        despread
    } else {
        noise.whitener() * despread
    };
    Ok(WhitenedChannelEstimate { h_hat, noise })
}

/// Left and right singular bases split into the rank-1 signal part and the
/// noise part.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceSplit {
    /// `p_s`, length `N_r`.
    pub signal_left: CVector,
    /// `P_n`, `N_r × (N_r − 1)`.
    pub noise_left: CMatrix,
    /// `q_s`, length `N_t`.
    pub signal_right: CVector,
    /// `Q_n`, `N_t × (N_t − 1)`.
    pub noise_right: CMatrix,
    /// Descending.
    pub singular_values: Vec<f64>,
}

pub fn split_subspaces(estimate: &WhitenedChannelEstimate<'_>) -> Result<SubspaceSplit> {
    let h = &estimate.h_hat;
    let (n_r, n_t) = h.shape();
    if n_r < 2 || n_t < 2 {
        return Err(Error::Precondition(format!(
            "subspace split needs at least 2x2, got {n_r}x{n_t}"
        )));
    }
    if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numerical(
            "channel estimate has non-finite entries".into(),
        ));
    }
    let svd = h
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("SVD returned no U".into()))?;
    let v = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD returned no Vᴴ".into()))?
        .adjoint();

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let left = complete_unitary(&u.select_columns(&order));
    let right = complete_unitary(&v.select_columns(&order));

    Ok(SubspaceSplit {
        signal_left: left.column(0).clone_owned(),
        noise_left: left.columns(1, n_r - 1).clone_owned(),
        signal_right: right.column(0).clone_owned(),
        noise_right: right.columns(1, n_t - 1).clone_owned(),
        singular_values,
    })
}

/// `1 / ‖noiseᴴ·w‖²`, evaluated with an explicit noise basis.
pub fn music_pseudo_spectrum(noise_basis: &CMatrix, w: &CVector) -> f64 {
    let denom = (noise_basis.adjoint() * w).norm_squared();
    denom.max(SPECTRUM_FLOOR).recip()
}

/// `‖(I − s·sᴴ)·w‖²`. Equal to `‖Nᴴ·w‖²` whenever `[s | N]` is unitary.
fn projection_residual<'a>(
    signal: &CVector,
    w: impl Iterator<Item = &'a Complex64> + Clone,
) -> f64 {
    let coeff: Complex64 = signal
        .iter()
        .zip(w.clone())
        .map(|(s, x)| s.conj() * x)
        .sum();
    signal
        .iter()
        .zip(w)
        .map(|(s, x)| (x - s * coeff).norm_sqr())
        .sum()
}

fn denominator<'a>(
    form: SpectrumForm,
    signal: &CVector,
    w: impl Iterator<Item = &'a Complex64> + Clone,
) -> f64 {
    let residual = projection_residual(signal, w.clone());
    match form {
        SpectrumForm::Plain => residual,
        SpectrumForm::Normalized => residual / w.map(|x| x.norm_sqr()).sum::<f64>(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleEstimate {
    pub angle_deg: f64,
    /// Pseudo-spectrum over [`AngleGrid::angles`].
    pub spectrum: Vec<f64>,
    /// Set when some denominator fell below [`SPECTRUM_FLOOR`].
    pub clamped: bool,
}

/// Steering vectors for every grid angle, optionally pre-multiplied by a
/// whitener.
#[derive(Debug, Clone)]
struct SteeringTable {
    geometry: ArrayGeometry,
    whitener: Option<CMatrix>,
    vectors: CMatrix,
}

impl SteeringTable {
    fn new(geometry: ArrayGeometry, whitener: Option<&CMatrix>, angles: &[f64]) -> Self {
        let n = geometry.n_elements();
        let mut raw = CMatrix::zeros(n, angles.len());
        for (k, &angle) in angles.iter().enumerate() {
            raw.set_column(k, &steering_vector(angle, &geometry));
        }
        let vectors = match whitener {
            Some(w) => w * raw,
            None => raw,
        };
        Self {
            geometry,
            whitener: whitener.cloned(),
            vectors,
        }
    }

    fn at(&self, angle_deg: f64) -> CVector {
        let a = steering_vector(angle_deg, &self.geometry);
        match &self.whitener {
            Some(w) => w * a,
            None => a,
        }
    }

    fn search(&self, grid: &AngleGrid, angles: &[f64], signal: &CVector) -> AngleEstimate {
        let denoms: Vec<f64> = self
            .vectors
            .column_iter()
            .map(|col| denominator(grid.form, signal, col.iter()))
            .collect();

        // first strict minimum: ties go to the smaller angle
        let mut best = 0;
        for (k, &d) in denoms.iter().enumerate() {
            if d < denoms[best] {
                best = k;
            }
        }
        let clamped = denoms.iter().any(|&d| d < SPECTRUM_FLOOR);
        let spectrum = denoms
            .iter()
            .map(|d| d.max(SPECTRUM_FLOOR).recip())
            .collect();

        let step = grid.step();
        let lo = (angles[best] - step).max(grid.start_deg);
        let hi = (angles[best] + step).min(grid.end_deg);
        let objective = |angle: f64| denominator(grid.form, signal, self.at(angle).iter());
        let refined = golden_section_min(objective, lo, hi, grid.refine_tol_deg);
        let angle_deg = if objective(refined) <= denoms[best] {
            refined
        } else {
            angles[best]
        };

        AngleEstimate {
            angle_deg,
            spectrum,
            clamped,
        }
    }
}

/// Minimizer of a unimodal function on `[lo, hi]`, to within `tol`.
pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::dimension(context, expected, actual))
    }
}

/// Angle of arrival from the whitened base-station pseudo-spectrum.
pub fn music_estimate_aoa(
    split: &SubspaceSplit,
    noise: &NoiseModel,
    bs: &ArrayGeometry,
    grid: &AngleGrid,
) -> Result<AngleEstimate> {
    grid.validate()?;
    check_len(
        "music_estimate_aoa array size",
        bs.n_elements(),
        split.signal_left.len(),
    )?;
    check_len(
        "music_estimate_aoa noise model",
        noise.dim(),
        split.signal_left.len(),
    )?;
    let angles = grid.angles();
    let whitener = (!noise.is_white()).then(|| noise.whitener());
    let table = SteeringTable::new(*bs, whitener, &angles);
    Ok(table.search(grid, &angles, &split.signal_left))
}

/// Angle of departure from the (unwhitened) mobile-station pseudo-spectrum.
pub fn music_estimate_aod(
    split: &SubspaceSplit,
    ms: &ArrayGeometry,
    grid: &AngleGrid,
) -> Result<AngleEstimate> {
    grid.validate()?;
    check_len(
        "music_estimate_aod array size",
        ms.n_elements(),
        split.signal_right.len(),
    )?;
    let angles = grid.angles();
    let table = SteeringTable::new(*ms, None, &angles);
    Ok(table.search(grid, &angles, &split.signal_right))
}

/// Least-squares path gain `α̂ = dᴴ·ĥ / ‖d‖²` with
/// `d = vec(W·a_BS(θ̂)·a_MS(φ̂)ᴴ)` and column-major `vec`.
pub fn estimate_gain(
    estimate: &WhitenedChannelEstimate<'_>,
    theta_hat: f64,
    phi_hat: f64,
    bs: &ArrayGeometry,
    ms: &ArrayGeometry,
) -> Result<Complex64> {
    if !(theta_hat.is_finite() && phi_hat.is_finite()) {
        return Err(Error::InvalidInput("angle estimates must be finite".into()));
    }
    let shape = (bs.n_elements(), ms.n_elements());
    if estimate.h_hat.shape() != shape {
        return Err(Error::dimension(
            "estimate_gain",
            format!("{shape:?}"),
            format!("{:?}", estimate.h_hat.shape()),
        ));
    }
    let a_bs = steering_vector(theta_hat, bs);
    let left = if estimate.noise.is_white() {
        a_bs
    } else {
        estimate.noise.whitener() * a_bs
    };
    let model = rank_one(
        Complex64::new(1.0, 0.0),
        &left,
        &steering_vector(phi_hat, ms),
    );
    // nalgebra storage is column-major, so the slices are vec(·)
    let d = model.as_slice();
    let h = estimate.h_hat.as_slice();
    let norm_sq: f64 = d.iter().map(|z| z.norm_sqr()).sum();
    assert!(norm_sq > 0.0, "steering model has zero norm");
    let num: Complex64 = d.iter().zip(h).map(|(di, hi)| di.conj() * hi).sum();
    Ok(num / norm_sq)
}

/// `Ȟ = α̂·a_BS(θ̂)·a_MS(φ̂)ᴴ` from unwhitened steering vectors.
pub fn reconstruct_channel(
    theta_hat: f64,
    phi_hat: f64,
    alpha_hat: Complex64,
    bs: &ArrayGeometry,
    ms: &ArrayGeometry,
) -> CMatrix {
    rank_one(
        alpha_hat,
        &steering_vector(theta_hat, bs),
        &steering_vector(phi_hat, ms),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub theta_hat: f64,
    pub phi_hat: f64,
    pub alpha_hat: Complex64,
    /// `Ȟ`.
    pub h_check: CMatrix,
    pub spectrum_bs: Vec<f64>,
    pub spectrum_ms: Vec<f64>,
    pub clamped: bool,
}

/// The whole estimation chain with steering tables cached for one noise
/// model, array pair and grid.
///
/// Building the whitened base-station table is the expensive part, so an
/// estimator should be reused across trials that share `b`.
#[derive(Debug, Clone)]
pub struct ChannelEstimator {
    noise: NoiseModel,
    bs: ArrayGeometry,
    ms: ArrayGeometry,
    grid: AngleGrid,
    angles: Vec<f64>,
    bs_table: SteeringTable,
    ms_table: SteeringTable,
}

impl ChannelEstimator {
    pub fn new(
        noise: NoiseModel,
        bs: ArrayGeometry,
        ms: ArrayGeometry,
        grid: AngleGrid,
    ) -> Result<Self> {
        grid.validate()?;
        if noise.dim() != bs.n_elements() {
            return Err(Error::dimension(
                "ChannelEstimator noise model",
                bs.n_elements(),
                noise.dim(),
            ));
        }
        let angles = grid.angles();
        let whitener = (!noise.is_white()).then(|| noise.whitener());
        let bs_table = SteeringTable::new(bs, whitener, &angles);
        let ms_table = SteeringTable::new(ms, None, &angles);
        Ok(Self {
            noise,
            bs,
            ms,
            grid,
            angles,
            bs_table,
            ms_table,
        })
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn estimate(
        &self,
        quantized_y: &CMatrix,
        transmit_s: &CMatrix,
        snr_power: f64,
    ) -> Result<EstimationResult> {
        let estimate = whiten_despread(quantized_y, transmit_s, snr_power, &self.noise)?;
        if estimate.h_hat.ncols() != self.ms.n_elements() {
            return Err(Error::dimension(
                "ChannelEstimator pilots",
                self.ms.n_elements(),
                estimate.h_hat.ncols(),
            ));
        }
        self.estimate_whitened(&estimate)
    }

    pub fn estimate_whitened(
        &self,
        estimate: &WhitenedChannelEstimate<'_>,
    ) -> Result<EstimationResult> {
        let split = split_subspaces(estimate)?;
        let aoa = self
            .bs_table
            .search(&self.grid, &self.angles, &split.signal_left);
        let aod = self
            .ms_table
            .search(&self.grid, &self.angles, &split.signal_right);
        let alpha_hat = estimate_gain(estimate, aoa.angle_deg, aod.angle_deg, &self.bs, &self.ms)?;
        Ok(EstimationResult {
            theta_hat: aoa.angle_deg,
            phi_hat: aod.angle_deg,
            alpha_hat,
            h_check: reconstruct_channel(
                aoa.angle_deg,
                aod.angle_deg,
                alpha_hat,
                &self.bs,
                &self.ms,
            ),
            spectrum_bs: aoa.spectrum,
            spectrum_ms: aod.spectrum,
            clamped: aoa.clamped || aod.clamped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_los_channel, synthesize_received, ReceiverNoise};
    use crate::pilots::predistort_pilots;
    use crate::quantizer::{combined_noise_covariance, sigma_delta_columns, SigmaDeltaConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ula(n: usize) -> ArrayGeometry {
        ArrayGeometry::with_ratio(n, 0.125).unwrap()
    }

    fn clean_block(
        theta: f64,
        phi: f64,
        alpha: Complex64,
        n_r: usize,
        n_t: usize,
        p: f64,
    ) -> (CMatrix, CMatrix, CMatrix) {
        let scen = make_los_channel(theta, phi, alpha, ula(n_r), ula(n_t)).unwrap();
        let s = predistort_pilots(n_t).unwrap().transmit;
        let rec = synthesize_received(&scen, &s, p, ReceiverNoise::Noiseless).unwrap();
        (rec.received_x, s, scen.channel)
    }

    #[test]
    fn grid_defaults() {
        let g = AngleGrid::default();
        let a = g.angles();
        assert_eq!(a.len(), 4096);
        assert_eq!(a[0], -89.9);
        assert_eq!(a[4095], 89.9);
        assert!(AngleGrid::with_points(1).validate().is_err());
        assert!(AngleGrid {
            end_deg: 90.0,
            ..AngleGrid::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn despread_recovers_channel() {
        let (y, s, h) = clean_block(12.0, -7.0, c(0.3, 0.9), 16, 4, 2.5);
        let white = NoiseModel::white(16);
        let est = whiten_despread(&y, &s, 2.5, &white).unwrap();
        assert!(crate::max_abs(&(&est.h_hat - &h)) < 1e-12);

        let shaped = combined_noise_covariance(16, 3.0).unwrap();
        let est = whiten_despread(&y, &s, 2.5, &shaped).unwrap();
        let expected = shaped.whitener() * &h;
        assert!(crate::max_abs(&(&est.h_hat - expected)) < 1e-10);
    }

    #[test]
    fn despread_with_repeated_blocks() {
        let scen = make_los_channel(3.0, 9.0, c(1.0, 0.0), ula(8), ula(4)).unwrap();
        let s = predistort_pilots(4).unwrap().repeated_transmit(3);
        let rec = synthesize_received(&scen, &s, 1.0, ReceiverNoise::Noiseless).unwrap();
        let white = NoiseModel::white(8);
        let est = whiten_despread(&rec.received_x, &s, 1.0, &white).unwrap();
        assert!(crate::max_abs(&(&est.h_hat - &scen.channel)) < 1e-12);
    }

    #[test]
    fn despread_errors() {
        let white = NoiseModel::white(4);
        let y = CMatrix::zeros(4, 2);
        let s = CMatrix::from_element(2, 2, c(1.0, 1.0));
        assert!(whiten_despread(&y, &CMatrix::zeros(2, 3), 1.0, &white).is_err());
        assert!(whiten_despread(&y, &CMatrix::zeros(4, 2), 1.0, &white).is_err());
        assert!(whiten_despread(&CMatrix::zeros(5, 2), &s, 1.0, &white).is_err());
        assert!(matches!(
            whiten_despread(&y, &s, f64::NAN, &white),
            Err(Error::InvalidInput(_))
        ));
        assert!(whiten_despread(&y, &s, 0.0, &white).is_err());
    }

    #[test]
    fn despread_brute_force_miniature() {
        // 2x2 link through the receive converter, no thermal noise
        let (x, s, _) = clean_block(20.0, -35.0, c(0.8, -0.6), 2, 2, 3.0);
        let b = 2.0;
        let y = sigma_delta_columns(&x, &SigmaDeltaConfig::new(2, b).unwrap()).unwrap();
        let noise = combined_noise_covariance(2, b).unwrap();
        let est = whiten_despread(&y, &s, 3.0, &noise).unwrap();

        let w = noise.whitener();
        let scale = 1.0 / (2.0 * 3.0 * 2.0f64).sqrt();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = c(0.0, 0.0);
                for k in 0..2 {
                    for m in 0..2 {
                        acc += w[(i, k)] * y[(k, m)] * s[(j, m)].conj();
                    }
                }
                assert!((est.h_hat[(i, j)] - acc * scale).norm() < 1e-12);
            }
        }
    }

    fn split_of(h: CMatrix) -> SubspaceSplit {
        let n = h.nrows();
        let noise = NoiseModel::white(n);
        split_subspaces(&WhitenedChannelEstimate {
            h_hat: h,
            noise: &noise,
        })
        .unwrap()
    }

    fn assert_unitary(m: &CMatrix) {
        let n = m.ncols();
        assert!(crate::max_abs(&(m.adjoint() * m - CMatrix::identity(n, n))) < 1e-10);
    }

    #[test]
    fn split_rank_one() {
        let u = CVector::from_fn(6, |i, _| c(1.0 + i as f64, -(i as f64) * 0.5));
        let v = CVector::from_fn(3, |i, _| c(0.2 * i as f64, 1.0));
        let split = split_of(&u * v.adjoint());
        let un = u.normalize();
        let vn = v.normalize();
        assert!((split.signal_left.dotc(&un).norm() - 1.0).abs() < 1e-10);
        assert!((split.signal_right.dotc(&vn).norm() - 1.0).abs() < 1e-10);
        assert!((split.noise_left.adjoint() * &un).norm() <= 1e-10);
        assert!((split.noise_right.adjoint() * &vn).norm() <= 1e-10);

        let mut left = split.noise_left.clone().insert_column(0, c(0.0, 0.0));
        left.set_column(0, &split.signal_left);
        assert_unitary(&left);
        let mut right = split.noise_right.clone().insert_column(0, c(0.0, 0.0));
        right.set_column(0, &split.signal_right);
        assert_unitary(&right);
        assert!(split.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(split.noise_left.shape(), (6, 5));
        assert_eq!(split.noise_right.shape(), (3, 2));
    }

    #[test]
    fn split_diagonal() {
        let h =
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        // swap so the larger value sits at (0, 0)
        let h = CMatrix::from_fn(2, 2, |i, j| h[(1 - i, 1 - j)]);
        let split = split_of(h);
        assert!((split.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((split.signal_left[0].norm() - 1.0).abs() < 1e-12);
        assert!((split.signal_right[0].norm() - 1.0).abs() < 1e-12);
        assert!((split.noise_left[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((split.noise_right[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rnd = |n| {
            CVector::from_fn(n, |_, _| {
                c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            })
        };
        let u = rnd(10);
        let v = rnd(4);
        let e = CMatrix::from_fn(10, 4, |i, j| {
            c(((i * 7 + j * 3) % 5) as f64 - 2.0, 1.0) * 1e-6
        });
        let base = split_of(&u * v.adjoint());
        let pert = split_of(&u * v.adjoint() + e);
        let angle = |a: &CVector, b: &CVector| a.dotc(b).norm().min(1.0).acos();
        assert!(angle(&base.signal_left, &pert.signal_left) < 1e-5);
        assert!(angle(&base.signal_right, &pert.signal_right) < 1e-5);
    }

    #[test]
    fn split_rejects_small_and_nonfinite() {
        let noise = NoiseModel::white(1);
        let h = CMatrix::from_element(1, 3, c(1.0, 0.0));
        assert!(matches!(
            split_subspaces(&WhitenedChannelEstimate {
                h_hat: h,
                noise: &noise
            }),
            Err(Error::Precondition(_))
        ));
        let noise = NoiseModel::white(2);
        let h = CMatrix::from_element(2, 2, c(f64::NAN, 0.0));
        assert!(matches!(
            split_subspaces(&WhitenedChannelEstimate {
                h_hat: h,
                noise: &noise
            }),
            Err(Error::Numerical(_))
        ));
    }

    fn noiseless_split(
        theta: f64,
        phi: f64,
        n_r: usize,
        n_t: usize,
        noise: &NoiseModel,
    ) -> SubspaceSplit {
        let (y, s, _) = clean_block(theta, phi, c(0.6, 0.8), n_r, n_t, 1.0);
        let est = whiten_despread(&y, &s, 1.0, noise).unwrap();
        split_subspaces(&est).unwrap()
    }

    #[test]
    fn music_broadside() {
        let noise = NoiseModel::white(128);
        let split = noiseless_split(0.0, 0.0, 128, 8, &noise);
        let grid = AngleGrid::default();
        let aoa = music_estimate_aoa(&split, &noise, &ula(128), &grid).unwrap();
        let aod = music_estimate_aod(&split, &ula(8), &grid).unwrap();
        assert!(aoa.angle_deg.abs() < 1e-4, "{}", aoa.angle_deg);
        assert!(aod.angle_deg.abs() < 1e-4, "{}", aod.angle_deg);
        for s in aoa.spectrum.iter().chain(&aod.spectrum) {
            assert!(s.is_finite() && *s > 0.0);
        }
    }

    /// Dense-grid argmax of the explicit `1/‖Nᴴ·W·a‖²` spectrum.
    fn dense_oracle(
        noise_basis: &CMatrix,
        whitener: Option<&CMatrix>,
        geom: &ArrayGeometry,
        center: f64,
    ) -> (f64, f64) {
        let grid = AngleGrid::default();
        let step = grid.step() / 10.0;
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for k in -200..=200 {
            let angle = center + k as f64 * step;
            let a = steering_vector(angle, geom);
            let w = whitener.map_or(a.clone(), |m| m * &a);
            let rho = music_pseudo_spectrum(noise_basis, &w);
            if rho > best.1 {
                best = (angle, rho);
            }
        }
        (best.0, step)
    }

    #[test]
    fn music_off_grid_angles() {
        let noise = combined_noise_covariance(128, 4.0).unwrap();
        let split = noiseless_split(23.7, -41.2, 128, 8, &noise);
        let grid = AngleGrid::default();

        let aoa = music_estimate_aoa(&split, &noise, &ula(128), &grid).unwrap();
        assert!((aoa.angle_deg - 23.7).abs() < 1e-3, "{}", aoa.angle_deg);
        let (oracle, step) =
            dense_oracle(&split.noise_left, Some(noise.whitener()), &ula(128), 23.7);
        assert!((aoa.angle_deg - oracle).abs() <= step);

        let aod = music_estimate_aod(&split, &ula(8), &grid).unwrap();
        assert!((aod.angle_deg + 41.2).abs() < 1e-3, "{}", aod.angle_deg);
        let (oracle, step) = dense_oracle(&split.noise_right, None, &ula(8), -41.2);
        assert!((aod.angle_deg - oracle).abs() <= step);
    }

    #[test]
    fn projector_spectrum_matches_explicit_basis() {
        let noise = combined_noise_covariance(32, 2.0).unwrap();
        let split = noiseless_split(10.0, 5.0, 32, 4, &noise);
        for form in [SpectrumForm::Plain, SpectrumForm::Normalized] {
            let grid = AngleGrid {
                form,
                ..AngleGrid::with_points(64)
            };
            let aoa = music_estimate_aoa(&split, &noise, &ula(32), &grid).unwrap();
            let aod = music_estimate_aod(&split, &ula(4), &grid).unwrap();
            let scale = |v: &CVector| match form {
                SpectrumForm::Plain => 1.0,
                SpectrumForm::Normalized => v.norm_squared(),
            };
            for (k, angle) in grid.angles().into_iter().enumerate() {
                let w = noise.whitener() * steering_vector(angle, &ula(32));
                let explicit = music_pseudo_spectrum(&split.noise_left, &w) * scale(&w);
                assert!((aoa.spectrum[k] - explicit).abs() <= 1e-8 * explicit);
                let a = steering_vector(angle, &ula(4));
                let explicit = music_pseudo_spectrum(&split.noise_right, &a) * scale(&a);
                assert!((aod.spectrum[k] - explicit).abs() <= 1e-8 * explicit);
            }
        }
    }

    #[test]
    fn small_array_bracket_is_unimodal() {
        let noise = NoiseModel::white(16);
        let split = noiseless_split(0.0, 31.0, 16, 8, &noise);
        let grid = AngleGrid::default();
        let aod = music_estimate_aod(&split, &ula(8), &grid).unwrap();
        let step = grid.step();
        let samples: Vec<f64> = (0..=400)
            .map(|k| {
                let angle = aod.angle_deg - step + 2.0 * step * k as f64 / 400.0;
                let a = steering_vector(angle, &ula(8));
                (split.noise_right.adjoint() * a).norm_squared()
            })
            .collect();
        let minima = (1..samples.len() - 1)
            .filter(|&k| samples[k] < samples[k - 1] && samples[k] <= samples[k + 1])
            .count();
        assert!(minima <= 1);
        assert!((aod.angle_deg - 31.0).abs() < 1e-3);
    }

    #[test]
    fn music_dimension_errors() {
        let noise = NoiseModel::white(16);
        let split = noiseless_split(0.0, 0.0, 16, 4, &noise);
        let grid = AngleGrid::with_points(32);
        assert!(music_estimate_aoa(&split, &noise, &ula(8), &grid).is_err());
        assert!(music_estimate_aoa(&split, &NoiseModel::white(8), &ula(16), &grid).is_err());
        assert!(music_estimate_aod(&split, &ula(5), &grid).is_err());
    }

    #[test]
    fn gain_exact_and_orthogonal_residual() {
        let noise = combined_noise_covariance(6, 1.5).unwrap();
        let (bs, ms) = (ula(6), ula(3));
        let alpha = c(-0.4, 0.7);
        let model =
            noise.whitener() * steering_vector(14.0, &bs) * steering_vector(-9.0, &ms).adjoint();
        let est = WhitenedChannelEstimate {
            h_hat: &model * alpha,
            noise: &noise,
        };
        let got = estimate_gain(&est, 14.0, -9.0, &bs, &ms).unwrap();
        assert!((got - alpha).norm() < 1e-10);

        // residual orthogonal to vec(model)
        let d = CVector::from_column_slice(model.as_slice());
        let mut e = CVector::from_fn(d.len(), |i, _| c((i % 3) as f64, 1.0 - (i % 2) as f64));
        let proj = d.dotc(&e) / d.norm_squared();
        e -= &d * proj;
        let est = WhitenedChannelEstimate {
            h_hat: &model * alpha + CMatrix::from_column_slice(6, 3, e.as_slice()),
            noise: &noise,
        };
        let got = estimate_gain(&est, 14.0, -9.0, &bs, &ms).unwrap();
        assert!((got - alpha).norm() < 1e-10);
        assert!(estimate_gain(&est, f64::NAN, 0.0, &bs, &ms).is_err());
        assert!(estimate_gain(&est, 0.0, 0.0, &ula(5), &ms).is_err());
    }

    #[test]
    fn gain_matches_grid_search() {
        let noise = NoiseModel::white(2);
        let (bs, ms) = (ula(2), ula(2));
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = CMatrix::from_fn(2, 2, |_, _| {
            c(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            )
        });
        let est = WhitenedChannelEstimate {
            h_hat: h.clone(),
            noise: &noise,
        };
        let got = estimate_gain(&est, 30.0, -15.0, &bs, &ms).unwrap();

        let model = steering_vector(30.0, &bs) * steering_vector(-15.0, &ms).adjoint();
        let cost = |a: Complex64| (&h - &model * a).norm_squared();
        let mut best = (c(0.0, 0.0), f64::INFINITY);
        let n = 400;
        for i in 0..=n {
            for j in 0..=n {
                let a = c(
                    -1.0 + 2.0 * i as f64 / n as f64,
                    -1.0 + 2.0 * j as f64 / n as f64,
                );
                let v = cost(a);
                if v < best.1 {
                    best = (a, v);
                }
            }
        }
        assert!(
            (got - best.0).norm() < 2.0 / n as f64,
            "{got} vs {}",
            best.0
        );
        assert!(cost(got) <= best.1 + 1e-12);
    }

    #[test]
    fn reconstruction() {
        let (bs, ms) = (ula(5), ula(3));
        assert_eq!(
            reconstruct_channel(0.0, 0.0, c(1.0, 0.0), &bs, &ms),
            CMatrix::from_element(5, 3, c(1.0, 0.0))
        );
        let h = reconstruct_channel(40.0, -12.0, c(0.3, 2.0), &bs, &ms);
        let mut sv: Vec<f64> = h.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        assert!(sv[1] <= 1e-12 * sv[0]);
    }

    fn run_estimator(noise: NoiseModel, y: &CMatrix, s: &CMatrix, p: f64) -> EstimationResult {
        let n_r = y.nrows();
        let est =
            ChannelEstimator::new(noise, ula(n_r), ula(s.nrows()), AngleGrid::default()).unwrap();
        est.estimate(y, s, p).unwrap()
    }

    #[test]
    fn noiseless_pipeline_recovers_channel() {
        let alpha = Complex64::from_polar(1.0, 2.1);
        let (y, s, h) = clean_block(-17.3, 44.4, alpha, 128, 8, 0.5);
        let r = run_estimator(NoiseModel::white(128), &y, &s, 0.5);
        let nmse = (&r.h_check - &h).norm_squared() / h.norm_squared();
        assert!(nmse < 1e-8, "{nmse}");
        assert!(!r.clamped);
    }

    #[test]
    fn consistent_rewhitening_keeps_angles() {
        let scen = make_los_channel(8.5, -3.0, c(0.0, 1.0), ula(128), ula(8)).unwrap();
        let s = predistort_pilots(8).unwrap().transmit;
        let p = 10f64.powf(-0.5);
        let b = (2.0 * p * 8.0).sqrt() + 3.0 * 0.5f64.sqrt();
        let rec = synthesize_received(&scen, &s, p, ReceiverNoise::Seeded(77)).unwrap();
        let y =
            sigma_delta_columns(&rec.received_x, &SigmaDeltaConfig::new(128, b).unwrap()).unwrap();

        let principal = run_estimator(combined_noise_covariance(128, b).unwrap(), &y, &s, p);
        let cholesky = run_estimator(NoiseModel::cholesky_whitened(128, b).unwrap(), &y, &s, p);
        assert!((principal.theta_hat - cholesky.theta_hat).abs() < 1e-3);
        assert!((principal.phi_hat - cholesky.phi_hat).abs() < 1e-3);
    }

    #[test]
    fn angles_invariant_to_positive_rescaling() {
        let scen = make_los_channel(-25.0, 12.0, c(0.6, -0.8), ula(64), ula(8)).unwrap();
        let s = predistort_pilots(8).unwrap().transmit;
        let rec = synthesize_received(&scen, &s, 0.3, ReceiverNoise::Seeded(5)).unwrap();
        let noise = combined_noise_covariance(64, 3.0).unwrap();
        let est = ChannelEstimator::new(noise, ula(64), ula(8), AngleGrid::default()).unwrap();
        let a = est.estimate(&rec.received_x, &s, 0.3).unwrap();
        let k = 3.7;
        let b = est
            .estimate(&(&rec.received_x * c(k, 0.0)), &s, 0.3 * k * k)
            .unwrap();
        assert!((a.theta_hat - b.theta_hat).abs() < 1e-9);
        assert!((a.phi_hat - b.phi_hat).abs() < 1e-9);
        for s in a.spectrum_bs.iter().chain(&a.spectrum_ms) {
            assert!(s.is_finite() && *s > 0.0);
        }
    }

    #[test]
    fn golden_section_finds_minimum() {
        let x = golden_section_min(|x| (x - 0.3).powi(2), -1.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-8);
    }
}
