//! Double-differenced GNSS functional and stochastic model for a
//! multi-antenna platform, and synthesis of single-epoch observations.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{Rotation, Vec3};

/// GPS L1 carrier wavelength in meters.
pub const GPS_L1_WAVELENGTH: f64 = 0.19029;

/// Ratio of code (pseudo-range) to carrier-phase standard deviation.
pub const CODE_TO_PHASE_RATIO: f64 = 100.0;

const MIN_SEPARATION_DEG: f64 = 10.0;
const MAX_GEOMETRY_DRAWS: usize = 1000;

/// Receiver-to-satellite line-of-sight directions in the global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    los: Vec<Vec3>,
    pivot: usize,
}

impl Constellation {
    /// Builds a constellation from unit line-of-sight vectors. The pivot is
    /// the highest-elevation satellite, lowest index on ties.
    pub fn new(los: Vec<Vec3>) -> Result<Self> {
        if los.len() < 3 {
            return Err(Error::Config(format!("need at least 3 satellites, got {}", los.len())));
        }
        for (i, u) in los.iter().enumerate() {
            if (u.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("line of sight {i} is not a unit vector")));
            }
        }
        for i in 0..los.len() {
            for j in i + 1..los.len() {
                if los[i].dot(&los[j]) >= 1.0 {
                    return Err(Error::Config(format!("satellites {i} and {j} coincide")));
                }
            }
        }
        let mut pivot = 0;
        for (i, u) in los.iter().enumerate() {
            if u.z > los[pivot].z {
                pivot = i;
            }
        }
        Ok(Constellation { los, pivot })
    }

    /// Builds a constellation from (azimuth, elevation) pairs in degrees.
    pub fn from_az_el_deg(pairs: &[(f64, f64)]) -> Result<Self> {
        for &(_, el) in pairs {
            if !(el > 0.0 && el <= 90.0) {
                return Err(Error::Config(format!("elevation {el} deg outside (0, 90]")));
            }
        }
        Self::new(pairs.iter().map(|&(az, el)| los_from_az_el_deg(az, el)).collect())
    }

    pub fn los(&self) -> &[Vec3] {
        &self.los
    }

    pub fn pivot_index(&self) -> usize {
        self.pivot
    }

    /// Number of tracked satellites (N + 1).
    pub fn n_satellites(&self) -> usize {
        self.los.len()
    }

    /// Number of double differences (N).
    pub fn n_dd(&self) -> usize {
        self.los.len() - 1
    }
}

/// `[cos el sin az, cos el cos az, sin el]` (east, north, up).
pub fn los_from_az_el_deg(az_deg: f64, el_deg: f64) -> Vec3 {
    let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
    Vec3::new(el.cos() * az.sin(), el.cos() * az.cos(), el.sin())
}

/// Source of satellite geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum SkyGeometry {
    AzElDeg(Vec<(f64, f64)>),
    Seeded(u64),
}

pub fn synth_constellation(n_sats: usize, geometry: &SkyGeometry) -> Result<Constellation> {
    match geometry {
        SkyGeometry::AzElDeg(pairs) => {
            if pairs.len() != n_sats {
                return Err(Error::Config(format!(
                    "expected {n_sats} azimuth/elevation pairs, got {}",
                    pairs.len()
                )));
            }
            Constellation::from_az_el_deg(pairs)
        }
        SkyGeometry::Seeded(seed) => random_constellation(n_sats, &mut ChaCha8Rng::seed_from_u64(*seed)),
    }
}

/// Draws azimuths on [0, 360) and elevations on [15, 75] degrees, redrawing
/// any satellite closer than 10 degrees to one already accepted.
pub fn random_constellation<R: Rng + ?Sized>(n_sats: usize, rng: &mut R) -> Result<Constellation> {
    if n_sats < 3 {
        return Err(Error::Config(format!("need at least 3 satellites, got {n_sats}")));
    }
    let min_cos = MIN_SEPARATION_DEG.to_radians().cos();
    let mut los: Vec<Vec3> = Vec::with_capacity(n_sats);
    let mut draws = 0;
    while los.len() < n_sats {
        if draws == MAX_GEOMETRY_DRAWS {
            return Err(Error::GeometrySynthesis { attempts: draws });
        }
        draws += 1;
        let az = rng.random_range(0.0..360.0);
        let el = rng.random_range(15.0..=75.0);
        let u = los_from_az_el_deg(az, el);
        if los.iter().all(|v| v.dot(&u) <= min_cos) {
            los.push(u);
        }
    }
    Constellation::new(los)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DdCorrelation {
    /// `2 (I + 1 1^T)`: i.i.d. undifferenced noise with a common pivot.
    #[default]
    Full,
    /// `2 I`, ignoring the pivot correlation.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnssNoiseModel {
    /// Undifferenced carrier-phase standard deviation (m).
    pub sigma_phase: f64,
    /// Undifferenced pseudo-range standard deviation (m).
    pub sigma_code: f64,
    pub wavelength: f64,
    pub dd_correlation: DdCorrelation,
}

impl GnssNoiseModel {
    /// Phase sigma `sigma`, code sigma `100 sigma`, GPS L1 wavelength.
    pub fn new(sigma_phase: f64) -> Self {
        GnssNoiseModel {
            sigma_phase,
            sigma_code: CODE_TO_PHASE_RATIO * sigma_phase,
            wavelength: GPS_L1_WAVELENGTH,
            dd_correlation: DdCorrelation::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_phase >= 0.0 && self.sigma_code >= 0.0 && self.wavelength > 0.0) {
            return Err(Error::Config(format!("invalid GNSS noise model {self:?}")));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_phase == 0.0 && self.sigma_code == 0.0
    }
}

/// Antenna baselines in the body frame, one per column (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSet {
    f: Matrix3xX<f64>,
}

impl BaselineSet {
    pub fn new(f: Matrix3xX<f64>) -> Result<Self> {
        let m = f.ncols();
        if m == 0 {
            return Err(Error::Config("at least one baseline is required".into()));
        }
        let rank = f.clone().svd(false, false).rank(1e-9 * f.amax().max(1e-300));
        if rank < m.min(3) {
            return Err(Error::Config(format!(
                "baseline matrix has rank {rank}, expected {} for {m} baselines",
                m.min(3)
            )));
        }
        Ok(BaselineSet { f })
    }

    /// Three orthonormal 1 m baselines along the body axes.
    pub fn unit_axes() -> Self {
        BaselineSet { f: Matrix3xX::from_column_slice(Matrix3::<f64>::identity().as_slice()) }
    }

    pub fn from_columns(columns: &[[f64; 3]]) -> Result<Self> {
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        Self::new(Matrix3xX::from_column_slice(&flat))
    }

    pub fn matrix(&self) -> &Matrix3xX<f64> {
        &self.f
    }

    pub fn n_baselines(&self) -> usize {
        self.f.ncols()
    }
}

/// Test hooks for mutation-style validation of downstream checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DesignOptions {
    /// Use `(u_j - u_pivot)` rows in G instead of `(u_pivot - u_j)`.
    pub flip_g0_sign: bool,
}

/// Design matrices and covariances of the multi-baseline DD model
/// `vec(Y) = (I (x) A) vec(Z) + (F^T (x) G) vec(R) + noise`.
#[derive(Debug, Clone)]
pub struct GnssDesign {
    pub a: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub sigma_eps: DMatrix<f64>,
    pub p_m: DMatrix<f64>,
    pub q_y: DMatrix<f64>,
    pub noise: GnssNoiseModel,
}

impl GnssDesign {
    /// Number of double differences per baseline (N).
    pub fn n_dd(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_baselines(&self) -> usize {
        self.p_m.nrows()
    }
}

/// `P_M`: unit diagonal, 0.5 elsewhere.
pub fn baseline_correlation(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.5 })
}

pub fn build_design(c: &Constellation, noise: &GnssNoiseModel, m: usize) -> GnssDesign {
    build_design_with(c, noise, m, DesignOptions::default())
}

pub fn build_design_with(
    c: &Constellation,
    noise: &GnssNoiseModel,
    m: usize,
    options: DesignOptions,
) -> GnssDesign {
    assert!(m >= 1, "at least one baseline");
    let n = c.n_dd();
    let pivot = c.los[c.pivot];
    let sign = if options.flip_g0_sign { -1.0 } else { 1.0 };

    let mut g = DMatrix::zeros(2 * n, 3);
    let others = c.los.iter().enumerate().filter(|(i, _)| *i != c.pivot).map(|(_, u)| u);
    for (row, u) in others.enumerate() {
        let d = (pivot - u) * sign;
        for k in 0..3 {
            g[(row, k)] = d[k];
            g[(row + n, k)] = d[k];
        }
    }

    let mut a = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        a[(n + i, i)] = noise.wavelength;
    }

    let corr = match noise.dd_correlation {
        DdCorrelation::Full => 2.0 * (DMatrix::identity(n, n) + DMatrix::from_element(n, n, 1.0)),
        DdCorrelation::Diagonal => 2.0 * DMatrix::identity(n, n),
    };
    let mut sigma_eps = DMatrix::zeros(2 * n, 2 * n);
    sigma_eps.view_mut((0, 0), (n, n)).copy_from(&(&corr * noise.sigma_code.powi(2)));
    sigma_eps.view_mut((n, n), (n, n)).copy_from(&(&corr * noise.sigma_phase.powi(2)));

    let p_m = baseline_correlation(m);
    let q_y = p_m.kronecker(&sigma_eps);
    GnssDesign { a, g, sigma_eps, p_m, q_y, noise: *noise }
}

/// One epoch of DD observations with its ground truth.
#[derive(Debug, Clone)]
pub struct GnssEpoch {
    pub y: DMatrix<f64>,
    pub z_true: DMatrix<i64>,
    pub noise_realization: DMatrix<f64>,
}

/// Noise-free part `A Z + G R F` of the observations.
pub fn predicted_observations(
    design: &GnssDesign,
    r: &nalgebra::Matrix3<f64>,
    f: &BaselineSet,
    z: &DMatrix<f64>,
) -> DMatrix<f64> {
    &design.a * z + &design.g * (r * f.matrix())
}

fn check_dims(design: &GnssDesign, f: &BaselineSet, z_true: &DMatrix<i64>) -> Result<()> {
    if z_true.shape() != (design.n_dd(), design.n_baselines()) || f.n_baselines() != design.n_baselines() {
        return Err(Error::Model(format!(
            "inconsistent dimensions: Z {:?}, design N={} M={}, F has {} columns",
            z_true.shape(),
            design.n_dd(),
            design.n_baselines(),
            f.n_baselines()
        )));
    }
    Ok(())
}

/// `Y = A Z + G R F + noise` with `vec(noise) ~ N(0, Q_Y)`. A noiseless
/// model skips the draw.
pub fn simulate_epoch<R: Rng + ?Sized>(
    design: &GnssDesign,
    r_true: &Rotation,
    f: &BaselineSet,
    z_true: &DMatrix<i64>,
    rng: &mut R,
) -> Result<GnssEpoch> {
    check_dims(design, f, z_true)?;
    if design.noise.is_noiseless() {
        return noiseless_epoch(design, r_true, f, z_true);
    }
    let chol = design
        .q_y
        .clone()
        .cholesky()
        .ok_or_else(|| Error::CovarianceNotSpd("Q_Y".into()))?;
    let white = DVector::from_fn(design.q_y.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let colored = chol.l() * white;
    let noise = DMatrix::from_column_slice(design.a.nrows(), design.n_baselines(), colored.as_slice());
    let z = z_true.map(|v| v as f64);
    let y = predicted_observations(design, r_true.matrix(), f, &z) + &noise;
    Ok(GnssEpoch { y, z_true: z_true.clone(), noise_realization: noise })
}

/// Exact observations without measurement noise.
pub fn noiseless_epoch(
    design: &GnssDesign,
    r_true: &Rotation,
    f: &BaselineSet,
    z_true: &DMatrix<i64>,
) -> Result<GnssEpoch> {
    check_dims(design, f, z_true)?;
    let z = z_true.map(|v| v as f64);
    let y = predicted_observations(design, r_true.matrix(), f, &z);
    let noise = DMatrix::zeros(y.nrows(), y.ncols());
    Ok(GnssEpoch { y, z_true: z_true.clone(), noise_realization: noise })
}

/// Integer ambiguities drawn uniformly on `[-half_range, half_range]`.
pub fn sample_ambiguities<R: Rng + ?Sized>(n: usize, m: usize, half_range: i64, rng: &mut R) -> DMatrix<i64> {
    let h = half_range.max(0);
    DMatrix::from_fn(n, m, |_, _| rng.random_range(-h..=h))
}
