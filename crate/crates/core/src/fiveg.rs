//! 5G downlink angle-of-arrival model: base-station layout, planar array
//! response, Fisher information of the arrival direction and synthesis of
//! noisy direction observations.
//!
//! Directions in the body frame are parameterized by azimuth `theta` and
//! elevation `phi` as `t = [cos phi cos theta, cos phi sin theta, sin phi]`.
//! The receive array lies in the body `u1-u2` plane.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix3x2, Matrix3xX, Matrix4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{Rotation, Vec3};
use crate::linalg::{block_diag, sym_pinv};

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Offsets of the eight base stations relative to the user (meters).
pub const TABLE1_OFFSETS: [[f64; 3]; 8] = [
    [10.0, 10.0, 10.0],
    [-10.0, -10.0, 10.0],
    [5.0, 10.0, 15.0],
    [-5.0, -10.0, 15.0],
    [15.0, 0.0, 10.0],
    [-15.0, 0.0, 10.0],
    [0.0, 15.0, 10.0],
    [0.0, -15.0, 10.0],
];

const POLE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub n_transmissions: u32,
    pub noise_psd_dbm_hz: f64,
    pub array_rows: usize,
    pub array_cols: usize,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            carrier_hz: 28e9,
            bandwidth_hz: 300e6,
            tx_power_dbm: 17.0,
            n_transmissions: 128,
            noise_psd_dbm_hz: -174.0,
            array_rows: 5,
            array_cols: 5,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.carrier_hz > 0.0
            && self.bandwidth_hz > 0.0
            && self.n_transmissions >= 1
            && self.array_rows >= 1
            && self.array_cols >= 1
            && self.tx_power_dbm.is_finite()
            && self.noise_psd_dbm_hz.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid radio configuration {self:?}")))
        }
    }

    pub fn tx_power_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Receive-array element positions in the body frame (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub element_positions: Vec<Vec3>,
}

/// Centered `rows x cols` grid in the body `u1-u2` plane with half-wavelength
/// spacing.
pub fn upa_geometry(cfg: &RadioConfig) -> ArrayGeometry {
    let spacing = cfg.wavelength() / 2.0;
    let (rows, cols) = (cfg.array_rows, cfg.array_cols);
    let r0 = (rows as f64 - 1.0) / 2.0;
    let c0 = (cols as f64 - 1.0) / 2.0;
    let mut element_positions = Vec::with_capacity(rows * cols);
    for c in 0..cols {
        for r in 0..rows {
            element_positions.push(Vec3::new((r as f64 - r0) * spacing, (c as f64 - c0) * spacing, 0.0));
        }
    }
    ArrayGeometry { element_positions }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsLayout {
    pub positions: Vec<Vec3>,
    pub user_position: Vec3,
}

impl BsLayout {
    pub fn new(positions: Vec<Vec3>, user_position: Vec3) -> Result<Self> {
        for (i, p) in positions.iter().enumerate() {
            if (p - user_position).norm() == 0.0 {
                return Err(Error::Config(format!("base station {} coincides with the user", i + 1)));
            }
        }
        Ok(BsLayout { positions, user_position })
    }

    pub fn n_bs(&self) -> usize {
        self.positions.len()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.positions.iter().map(|p| (p - self.user_position).norm()).collect()
    }
}

/// The first `l` stations of the reference layout around `user_position`.
pub fn bs_layout(user_position: Vec3, l: usize) -> Result<BsLayout> {
    if !(1..=TABLE1_OFFSETS.len()).contains(&l) {
        return Err(Error::Config(format!("preset layout has 1..=8 base stations, requested {l}")));
    }
    let positions = TABLE1_OFFSETS[..l].iter().map(|d| user_position + Vec3::from(*d)).collect();
    BsLayout::new(positions, user_position)
}

/// Unit directions from the user to each base station (columns of E).
pub fn los_unit_vectors(layout: &BsLayout) -> Result<Matrix3xX<f64>> {
    let mut e = Matrix3xX::zeros(layout.n_bs());
    for (l, p) in layout.positions.iter().enumerate() {
        let d = p - layout.user_position;
        let n = d.norm();
        if n == 0.0 {
            return Err(Error::DegenerateInput(format!("base station {} at the user position", l + 1)));
        }
        e.set_column(l, &(d / n));
    }
    Ok(e)
}

/// Far-field array response `gain * exp(-j 2 pi f / c <p_i, t>)`.
pub fn steering_response(array: &ArrayGeometry, t_bcs: &Vec3, gain: Complex64, f: f64) -> DVector<Complex64> {
    let k = 2.0 * PI * f / SPEED_OF_LIGHT;
    DVector::from_iterator(
        array.element_positions.len(),
        array.element_positions.iter().map(|p| gain * Complex64::from_polar(1.0, -k * p.dot(t_bcs))),
    )
}

/// Free-space complex gain: magnitude `lambda / (4 pi d)`, uniform phase.
pub fn channel_gain<R: Rng + ?Sized>(distance: f64, f: f64, rng: &mut R) -> Complex64 {
    assert!(distance > 0.0, "distance must be positive");
    let magnitude = (SPEED_OF_LIGHT / f) / (4.0 * PI * distance);
    Complex64::from_polar(magnitude, rng.random_range(0.0..2.0 * PI))
}

/// Thermal noise power over the signal bandwidth (watts).
pub fn noise_power(cfg: &RadioConfig) -> f64 {
    dbm_to_watts(cfg.noise_psd_dbm_hz) * cfg.bandwidth_hz
}

pub fn direction_from_angles(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(cp * ct, cp * st, sp)
}

/// Azimuth and elevation of a unit vector.
pub fn angles_from_direction(t: &Vec3) -> Result<(f64, f64)> {
    let phi = t.z.clamp(-1.0, 1.0).asin();
    if phi.cos().abs() < POLE_LIMIT {
        return Err(Error::ParameterizationSingularity(phi.cos().abs()));
    }
    Ok((t.y.atan2(t.x), phi))
}

/// `d t / d (theta, phi)`.
pub fn direction_jacobian(theta: f64, phi: f64) -> Matrix3x2<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Matrix3x2::new(-cp * st, -sp * ct, cp * ct, -sp * st, 0.0, cp)
}

/// Equivalent Fisher information of (azimuth, elevation) with the complex
/// channel gain treated as a nuisance parameter.
pub fn aoa_fim(array: &ArrayGeometry, t_bcs: &Vec3, gain: Complex64, cfg: &RadioConfig) -> Result<Matrix2<f64>> {
    let (theta, phi) = angles_from_direction(t_bcs)?;
    if gain.norm() == 0.0 {
        return Err(Error::SingularFim("zero channel gain".into()));
    }
    let jac = direction_jacobian(theta, phi);
    let t = direction_from_angles(theta, phi);
    let k = 2.0 * PI * cfg.carrier_hz / SPEED_OF_LIGHT;
    let j = Complex64::new(0.0, 1.0);

    // Rows: d h_i / d (theta, phi, Re alpha, Im alpha).
    let mut gram = Matrix4::<f64>::zeros();
    for p in &array.element_positions {
        let phase = Complex64::from_polar(1.0, -k * p.dot(&t));
        let dtheta = gain * phase * (-j * k * p.dot(&jac.column(0)));
        let dphi = gain * phase * (-j * k * p.dot(&jac.column(1)));
        let row = [dtheta, dphi, phase, j * phase];
        for a in 0..4 {
            for b in 0..4 {
                gram[(a, b)] += (row[a].conj() * row[b]).re;
            }
        }
    }
    let scale = 2.0 * cfg.n_transmissions as f64 * cfg.tx_power_watts() / noise_power(cfg);
    let full = gram * scale;
    Ok(schur_angles(&full))
}

/// Schur complement of the gain block in a 4x4 information matrix ordered
/// (theta, phi, Re alpha, Im alpha).
pub(crate) fn schur_angles(full: &Matrix4<f64>) -> Matrix2<f64> {
    let jtt = full.fixed_view::<2, 2>(0, 0).into_owned();
    let jta = full.fixed_view::<2, 2>(0, 2).into_owned();
    let jaa = full.fixed_view::<2, 2>(2, 2).into_owned();
    match jaa.try_inverse() {
        Some(inv) => {
            let e = jtt - jta * inv * jta.transpose();
            (e + e.transpose()) * 0.5
        }
        None => jtt,
    }
}

/// Pushes the angle-domain covariance `efim^-1` through the direction
/// Jacobian. The result is rank two with null vector `t_bcs`.
pub fn aoa_covariance(efim: &Matrix2<f64>, t_bcs: &Vec3) -> Result<Matrix3<f64>> {
    let (theta, phi) = angles_from_direction(t_bcs)?;
    let inv = efim
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::SingularFim("EFIM is not positive definite".into()))?;
    let jac = direction_jacobian(theta, phi);
    let q = jac * inv * jac.transpose();
    Ok((q + q.transpose()) * 0.5)
}

/// 5G direction observables with their dispersion.
#[derive(Debug, Clone)]
pub struct AoaSet {
    /// Measured body-frame directions, one column per station.
    pub d: Matrix3xX<f64>,
    /// Known local-frame directions, one column per station.
    pub e: Matrix3xX<f64>,
    /// Covariance of `vec(D)`, block diagonal with 3x3 rank-two blocks.
    pub q_d: DMatrix<f64>,
    /// Pseudo-inverse of `q_d`, used as the observation weight.
    pub q_d_weight: DMatrix<f64>,
}

impl AoaSet {
    pub fn n_bs(&self) -> usize {
        self.e.ncols()
    }
}

fn check_inputs(e: &Matrix3xX<f64>, per_bs_efim: &[Matrix2<f64>]) -> Result<()> {
    if e.ncols() != per_bs_efim.len() {
        return Err(Error::Model(format!(
            "{} directions but {} information matrices",
            e.ncols(),
            per_bs_efim.len()
        )));
    }
    for (l, col) in e.column_iter().enumerate() {
        if (col.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Model(format!("direction {} is not a unit vector", l + 1)));
        }
    }
    Ok(())
}

fn assemble(d: Matrix3xX<f64>, e: &Matrix3xX<f64>, blocks: Vec<DMatrix<f64>>) -> AoaSet {
    let weights: Vec<DMatrix<f64>> = blocks
        .iter()
        .map(|b| {
            let m3: Matrix3<f64> = b.fixed_view::<3, 3>(0, 0).into_owned();
            let w = sym_pinv(&m3, 1e-12);
            DMatrix::from_column_slice(3, 3, w.as_slice())
        })
        .collect();
    AoaSet { d, e: e.clone(), q_d: block_diag(&blocks), q_d_weight: block_diag(&weights) }
}

/// `D = R^T E + noise`, with the noise drawn in the angle domain from
/// `N(0, efim^-1)` so that every column of `D` stays a unit vector.
pub fn simulate_aoa<R: Rng + ?Sized>(
    e: &Matrix3xX<f64>,
    r_true: &Rotation,
    per_bs_efim: &[Matrix2<f64>],
    rng: &mut R,
) -> Result<AoaSet> {
    synthesize(e, r_true, per_bs_efim, Some(rng))
}

/// Exact observations `D = R^T E` with the same dispersion model.
pub fn noiseless_aoa(e: &Matrix3xX<f64>, r_true: &Rotation, per_bs_efim: &[Matrix2<f64>]) -> Result<AoaSet> {
    synthesize::<rand_chacha::ChaCha8Rng>(e, r_true, per_bs_efim, None)
}

fn synthesize<R: Rng + ?Sized>(
    e: &Matrix3xX<f64>,
    r_true: &Rotation,
    per_bs_efim: &[Matrix2<f64>],
    mut rng: Option<&mut R>,
) -> Result<AoaSet> {
    check_inputs(e, per_bs_efim)?;
    let l = e.ncols();
    let mut d = Matrix3xX::zeros(l);
    let mut blocks = Vec::with_capacity(l);
    for (k, efim) in per_bs_efim.iter().enumerate() {
        let t = r_true.matrix().transpose() * e.column(k);
        let (theta, phi) = angles_from_direction(&t)?;
        let q_t = aoa_covariance(efim, &t)?;
        let observed = match rng.as_deref_mut() {
            Some(rng) => {
                let chol = efim
                    .cholesky()
                    .and_then(|c| c.inverse().cholesky())
                    .ok_or_else(|| Error::SingularFim(format!("station {}", k + 1)))?;
                let white = nalgebra::Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
                let delta = chol.l() * white;
                direction_from_angles(theta + delta.x, phi + delta.y)
            }
            None => t,
        };
        d.set_column(k, &observed);
        blocks.push(DMatrix::from_column_slice(3, 3, q_t.as_slice()));
    }
    Ok(assemble(d, e, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn table1_layout() {
        let l1 = bs_layout(Vec3::zeros(), 1).unwrap();
        assert_eq!(l1.positions[0], Vec3::new(10.0, 10.0, 10.0));
        let l4 = bs_layout(Vec3::new(1.0, 2.0, 3.0), 4).unwrap();
        assert_eq!(l4.positions[3] - l4.user_position, Vec3::new(-5.0, -10.0, 15.0));
        let l8 = bs_layout(Vec3::zeros(), 8).unwrap();
        assert_eq!(l8.positions[6], Vec3::new(0.0, 15.0, 10.0));
        assert!((l8.distances()[6] - 325f64.sqrt()).abs() < 1e-12);
        assert!(bs_layout(Vec3::zeros(), 0).is_err());
        assert!(bs_layout(Vec3::zeros(), 9).is_err());
    }

    #[test]
    fn los_vectors() {
        let layout = BsLayout::new(vec![Vec3::new(12.0, 0.0, 0.0)], Vec3::new(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(los_unit_vectors(&layout).unwrap().column(0).into_owned(), Vec3::x());
        let e = los_unit_vectors(&bs_layout(Vec3::zeros(), 8).unwrap()).unwrap();
        assert!((e.column(0) - Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt()).norm() < 1e-15);
        assert!(e.column_iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
        assert!(BsLayout::new(vec![Vec3::zeros()], Vec3::zeros()).is_err());
    }

    #[test]
    fn upa_spacing_and_centroid() {
        let single = upa_geometry(&RadioConfig { array_rows: 1, array_cols: 1, ..Default::default() });
        assert_eq!(single.element_positions, vec![Vec3::zeros()]);
        let cfg = RadioConfig::default();
        let a = upa_geometry(&cfg);
        assert_eq!(a.element_positions.len(), 25);
        let spacing = (a.element_positions[1] - a.element_positions[0]).norm();
        assert!((spacing - 2.997_924_58e8 / (2.0 * 28e9)).abs() < 1e-15);
        assert!((spacing - 0.005353).abs() < 1e-6);
        let centroid: Vec3 = a.element_positions.iter().sum::<Vec3>() / 25.0;
        assert!(centroid.norm() < 1e-15);
        let odd = upa_geometry(&RadioConfig { array_rows: 4, array_cols: 3, ..Default::default() });
        let c: Vec3 = odd.element_positions.iter().sum::<Vec3>() / 12.0;
        assert!(c.norm() < 1e-15);
    }

    #[test]
    fn steering_response_examples() {
        let g = Complex64::new(0.3, -0.4);
        let single = ArrayGeometry { element_positions: vec![Vec3::zeros()] };
        assert_eq!(steering_response(&single, &Vec3::x(), g, 28e9)[0], g);

        let a = upa_geometry(&RadioConfig::default());
        let broadside = steering_response(&a, &Vec3::z(), Complex64::new(1.0, 0.0), 28e9);
        assert!(broadside.iter().all(|h| (h - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let t = Vec3::new(0.3, -0.5, 0.8).normalize();
        let plus = steering_response(&a, &t, Complex64::new(1.0, 0.0), 28e9);
        let minus = steering_response(&a, &(-t), Complex64::new(1.0, 0.0), 28e9);
        for (p, m) in plus.iter().zip(minus.iter()) {
            assert!((p.conj() - m).norm() < 1e-12);
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_gain_magnitude() {
        let f = 28e9;
        let lambda = SPEED_OF_LIGHT / f;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((channel_gain(lambda / (4.0 * PI), f, &mut rng).norm() - 1.0).abs() < 1e-12);
        let g = channel_gain(17.32, f, &mut rng);
        let expected = 0.010706873500 / (4.0 * PI * 17.32);
        assert!(rel(g.norm(), expected) < 1e-9);
        assert!(rel(g.norm(), 4.919e-5) < 1e-3);
        let a = channel_gain(5.0, f, &mut ChaCha8Rng::seed_from_u64(4));
        let b = channel_gain(5.0, f, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn noise_power_conversion() {
        let one_hz = RadioConfig { bandwidth_hz: 1.0, ..Default::default() };
        assert!(rel(noise_power(&one_hz), 3.981_071_705_534_97e-21) < 1e-12);
        let p = noise_power(&RadioConfig::default());
        assert!(rel(p, 1.194_321_511_660_49e-12) < 1e-12);
        assert!((10.0 * (p * 1e3).log10() + 89.2).abs() < 0.05);
        let silent = RadioConfig { noise_psd_dbm_hz: f64::NEG_INFINITY, ..Default::default() };
        assert_eq!(noise_power(&silent), 0.0);
    }

    #[test]
    fn fim_scales_linearly_in_transmissions_and_power() {
        let cfg = RadioConfig::default();
        let a = upa_geometry(&cfg);
        let t = Vec3::new(0.4, 0.2, 0.7).normalize();
        let g = Complex64::new(3e-5, 2e-5);
        let base = aoa_fim(&a, &t, g, &cfg).unwrap();
        let doubled = aoa_fim(&a, &t, g, &RadioConfig { n_transmissions: 256, ..cfg }).unwrap();
        assert!((doubled - base * 2.0).amax() <= 1e-12 * base.amax());
        let louder = aoa_fim(&a, &t, g, &RadioConfig { tx_power_dbm: 27.0, ..cfg }).unwrap();
        assert!((louder - base * 10.0).amax() <= 1e-9 * louder.amax());
    }

    #[test]
    fn fim_errors() {
        let cfg = RadioConfig::default();
        let a = upa_geometry(&cfg);
        let g = Complex64::new(1e-5, 0.0);
        assert!(matches!(aoa_fim(&a, &Vec3::z(), g, &cfg), Err(Error::ParameterizationSingularity(_))));
        let t = Vec3::new(0.4, 0.2, 0.7).normalize();
        assert!(matches!(aoa_fim(&a, &t, Complex64::new(0.0, 0.0), &cfg), Err(Error::SingularFim(_))));
    }

    #[test]
    fn covariance_isotropic_tangent_case() {
        // Azimuth 0, elevation 0: the Jacobian columns are orthonormal.
        let t = Vec3::x();
        let k = 4.0;
        let q = aoa_covariance(&(Matrix2::identity() * k), &t).unwrap();
        let mut eig: Vec<f64> = SymmetricEigen::new(q).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!(eig[0].abs() < 1e-15);
        assert!((eig[1] - 1.0 / k).abs() < 1e-15);
        assert!((eig[2] - 1.0 / k).abs() < 1e-15);
    }

    #[test]
    fn covariance_is_tangent_and_shrinks_with_transmissions() {
        let cfg = RadioConfig::default();
        let a = upa_geometry(&cfg);
        let g = Complex64::new(2e-5, -3e-5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let t = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5).normalize();
            let mut last = f64::INFINITY;
            for n_tx in [16, 64, 256] {
                let c = RadioConfig { n_transmissions: n_tx, ..cfg };
                let q = aoa_covariance(&aoa_fim(&a, &t, g, &c).unwrap(), &t).unwrap();
                assert!((q * t).norm() < 1e-10 * q.amax().max(1.0));
                assert!((q - q.transpose()).amax() == 0.0);
                let eig = SymmetricEigen::new(q).eigenvalues;
                assert!(eig.min() > -1e-12 * eig.max());
                assert!(q.trace() < last);
                last = q.trace();
            }
        }
    }

    #[test]
    fn noiseless_aoa_recovers_rotated_directions() {
        let e = los_unit_vectors(&bs_layout(Vec3::zeros(), 4).unwrap()).unwrap();
        let r = Rotation::rot_z(0.7) * Rotation::rot_x(-0.3);
        let efim = vec![Matrix2::identity() * 1e6; 4];
        let set = noiseless_aoa(&e, &r, &efim).unwrap();
        assert!((set.d.clone() - r.matrix().transpose() * &e).amax() < 1e-15);
    }

    #[test]
    fn simulated_columns_are_unit_and_weights_are_pseudo_inverse() {
        let e = los_unit_vectors(&bs_layout(Vec3::zeros(), 4).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = Rotation::random(&mut rng);
        let efim: Vec<_> = (0..4).map(|k| Matrix2::new(1e4 * (k + 1) as f64, 50.0, 50.0, 3e3)).collect();
        let set = simulate_aoa(&e, &r, &efim, &mut rng).unwrap();
        for c in set.d.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
        let (q, w) = (&set.q_d, &set.q_d_weight);
        assert!((q * w * q - q).amax() < 1e-8 * q.amax());
        assert!((w * q * w - w).amax() < 1e-8 * w.amax());
        assert!(((q * w).transpose() - q * w).amax() < 1e-8);
        assert!(((w * q).transpose() - w * q).amax() < 1e-8);
        for l in 0..4 {
            let block = q.view((3 * l, 3 * l), (3, 3)).into_owned();
            assert_eq!(block.clone().svd(false, false).rank(1e-12 * block.amax()), 2);
            let t = r.matrix().transpose() * e.column(l);
            assert!((block * DVector::from_column_slice(t.as_slice())).norm() < 1e-12);
        }
        assert!(q.view((0, 3), (3, 3)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aoa_noise_matches_linearized_covariance() {
        let e = Matrix3xX::from_column_slice(&Vec3::new(0.3, 0.5, 0.6).normalize().as_slice().to_vec());
        let r = Rotation::rot_y(0.2);
        let efim = vec![Matrix2::new(4e4, 1e4, 1e4, 2e4)];
        let t = r.matrix().transpose() * e.column(0);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut acc = Matrix3::<f64>::zeros();
        let n = 10_000;
        let mut q_t = Matrix3::zeros();
        for _ in 0..n {
            let set = simulate_aoa(&e, &r, &efim, &mut rng).unwrap();
            let dv: Vec3 = set.d.column(0) - t;
            acc += dv * dv.transpose();
            q_t = set.q_d.fixed_view::<3, 3>(0, 0).into_owned();
        }
        acc /= n as f64;
        let mut sample: Vec<f64> = SymmetricEigen::new(acc).eigenvalues.iter().copied().collect();
        let mut model: Vec<f64> = SymmetricEigen::new(q_t).eigenvalues.iter().copied().collect();
        sample.sort_by(f64::total_cmp);
        model.sort_by(f64::total_cmp);
        for k in 1..3 {
            assert!(rel(sample[k], model[k]) < 0.15, "{sample:?} vs {model:?}");
        }
    }
}
