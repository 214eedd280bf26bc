use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::fiveg::AoaSet;
use crate::gnss::{BaselineSet, GnssDesign, GnssEpoch};
use crate::linalg::{spd_inverse, transpose_index};

/// Stacked GNSS + 5G observation model
///
/// ```text
/// [vec(Y)  ]   [I (x) A   F^T (x) G] [vec(Z)]
/// [vec(D^T)] = [0         I (x) E^T] [vec(R)]
/// ```
///
/// with weight `blkdiag(Q_Y^-1, W_D)`, where `W_D` is the pseudo-inverse
/// dispersion of the direction observations permuted to `vec(D^T)` order.
#[derive(Debug, Clone)]
pub struct HybridModel {
    pub observation_vector: DVector<f64>,
    pub design_matrix: DMatrix<f64>,
    pub weight: DMatrix<f64>,
    pub n_dd: usize,
    pub n_baselines: usize,
    pub n_bs: usize,
}

impl HybridModel {
    pub fn n_ambiguities(&self) -> usize {
        self.n_dd * self.n_baselines
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_ambiguities() + 9
    }

    fn gnss_rows(&self) -> usize {
        2 * self.n_ambiguities()
    }

    /// Rows `[I (x) A, F^T (x) G]`.
    pub fn gnss_design(&self) -> DMatrix<f64> {
        self.design_matrix.rows(0, self.gnss_rows()).into_owned()
    }

    /// Rows `[0, I (x) E^T]`.
    pub fn fiveg_design(&self) -> DMatrix<f64> {
        self.design_matrix.rows(self.gnss_rows(), 3 * self.n_bs).into_owned()
    }

    /// GNSS-only contribution `M1^T Q_Y^-1 M1` to the normal matrix.
    pub fn gnss_normal(&self) -> DMatrix<f64> {
        let m1 = self.gnss_design();
        let g = self.gnss_rows();
        let w = self.weight.view((0, 0), (g, g));
        m1.transpose() * w * &m1
    }

    /// 5G-only contribution `M2^T W_D M2` to the normal matrix.
    pub fn fiveg_normal(&self) -> DMatrix<f64> {
        let m2 = self.fiveg_design();
        let g = self.gnss_rows();
        let k = 3 * self.n_bs;
        let w = self.weight.view((g, g), (k, k));
        m2.transpose() * w * &m2
    }

    pub fn normal_matrix(&self) -> DMatrix<f64> {
        let mw = self.design_matrix.transpose() * &self.weight;
        &mw * &self.design_matrix
    }

    /// Parameter vector `[vec(Z); vec(R)]`.
    pub fn stack_parameters(&self, z: &DMatrix<f64>, r: &Matrix3<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_unknowns());
        x.rows_mut(0, self.n_ambiguities()).copy_from_slice(z.as_slice());
        x.rows_mut(self.n_ambiguities(), 9).copy_from_slice(r.as_slice());
        x
    }

    /// Weighted squared residual of the full model at `(Z, R)`.
    pub fn weighted_residual(&self, z: &DMatrix<f64>, r: &Matrix3<f64>) -> f64 {
        let e = &self.observation_vector - &self.design_matrix * self.stack_parameters(z, r);
        crate::linalg::quad_form(&self.weight, &e)
    }
}

/// Weight of `vec(D^T)`: the direction weight is stated for `vec(D)`, so
/// rows and columns are permuted.
pub fn direction_weight(aoa: &AoaSet) -> DMatrix<f64> {
    let l = aoa.n_bs();
    let mut w = DMatrix::zeros(3 * l, 3 * l);
    for i in 0..3 * l {
        for j in 0..3 * l {
            w[(transpose_index(i, 3, l), transpose_index(j, 3, l))] = aoa.q_d_weight[(i, j)];
        }
    }
    w
}

/// Assembles the hybrid model. Without direction observations the result is
/// the pure GNSS model.
pub fn assemble_hybrid(
    design: &GnssDesign,
    epoch: &GnssEpoch,
    aoa: Option<&AoaSet>,
    f: &BaselineSet,
) -> Result<HybridModel> {
    let n = design.n_dd();
    let m = design.n_baselines();
    if epoch.y.shape() != (2 * n, m) || f.n_baselines() != m {
        return Err(Error::Model(format!(
            "observation matrix {:?} does not match N={n}, M={m}",
            epoch.y.shape()
        )));
    }
    let l = aoa.map_or(0, |a| a.n_bs());
    if let Some(a) = aoa {
        for (k, col) in a.e.column_iter().enumerate() {
            if (col.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::Model(format!("E column {} is not a unit vector", k + 1)));
            }
        }
        if a.d.ncols() != l || a.q_d_weight.shape() != (3 * l, 3 * l) {
            return Err(Error::Model("inconsistent direction observation dimensions".into()));
        }
    }

    let nm = n * m;
    let rows = 2 * nm + 3 * l;
    let cols = nm + 9;

    let mut obs = DVector::zeros(rows);
    obs.rows_mut(0, 2 * nm).copy_from_slice(epoch.y.as_slice());

    let mut dm = DMatrix::zeros(rows, cols);
    let i_a = DMatrix::<f64>::identity(m, m).kronecker(&design.a);
    dm.view_mut((0, 0), (2 * nm, nm)).copy_from(&i_a);
    let ft_g = f.matrix().transpose().kronecker(&design.g);
    dm.view_mut((0, nm), (2 * nm, 9)).copy_from(&ft_g);

    let q_y_inv = spd_inverse(&design.q_y).ok_or_else(|| Error::Model("Q_Y is not invertible".into()))?;
    let mut weight = DMatrix::zeros(rows, rows);
    weight.view_mut((0, 0), (2 * nm, 2 * nm)).copy_from(&q_y_inv);

    if let Some(a) = aoa {
        let dt = a.d.transpose();
        obs.rows_mut(2 * nm, 3 * l).copy_from_slice(dt.as_slice());
        let i_et = DMatrix::<f64>::identity(3, 3).kronecker(&a.e.transpose());
        dm.view_mut((2 * nm, nm), (3 * l, 9)).copy_from(&i_et);
        weight.view_mut((2 * nm, 2 * nm), (3 * l, 3 * l)).copy_from(&direction_weight(a));
    }

    Ok(HybridModel { observation_vector: obs, design_matrix: dm, weight, n_dd: n, n_baselines: m, n_bs: l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnss::DesignOptions;
    use crate::simulation::{draw_trial, ScenarioConfig, TrialData};

    fn trial(n_bs: usize, noise: bool) -> TrialData {
        let cfg = ScenarioConfig { n_bs, gnss_noise: noise, aoa_noise: noise, ..ScenarioConfig::default() };
        draw_trial(&cfg, 11, DesignOptions::default()).unwrap()
    }

    fn model(t: &TrialData) -> HybridModel {
        assemble_hybrid(&t.design, &t.epoch, t.aoa.as_ref(), &t.baselines).unwrap()
    }

    #[test]
    fn dimensions() {
        let t = trial(3, true);
        let m = model(&t);
        let nm = t.design.n_dd() * 3;
        assert_eq!(m.design_matrix.shape(), (2 * nm + 9, nm + 9));
        assert_eq!(m.weight.shape(), (2 * nm + 9, 2 * nm + 9));
        assert_eq!(m.observation_vector.len(), 2 * nm + 9);
    }

    #[test]
    fn noiseless_truth_has_zero_residual() {
        let t = trial(3, false);
        let m = model(&t);
        let z = t.z_true.map(|v| v as f64);
        assert!(m.weighted_residual(&z, t.r_true.matrix()) < 1e-12);
    }

    #[test]
    fn normal_matrix_splits_into_gnss_and_fiveg_parts() {
        let t = trial(4, true);
        let m = model(&t);
        let sum = m.gnss_normal() + m.fiveg_normal();
        let n = m.normal_matrix();
        assert!((&n - &sum).norm() <= 1e-9 * n.norm());
    }

    #[test]
    fn without_stations_only_gnss_rows_remain() {
        let t = trial(0, true);
        let m = model(&t);
        assert_eq!(m.n_bs, 0);
        assert_eq!(m.design_matrix.nrows(), 2 * m.n_ambiguities());
        assert!((m.normal_matrix() - m.gnss_normal()).norm() == 0.0);
    }

    #[test]
    fn direction_weight_matches_permutation_matrix() {
        let t = trial(3, true);
        let aoa = t.aoa.as_ref().unwrap();
        let l = aoa.n_bs();
        // P vec(D) = vec(D^T) for a 3 x L matrix D.
        let mut p = DMatrix::<f64>::zeros(3 * l, 3 * l);
        for r in 0..3 {
            for c in 0..l {
                p[(r * l + c, c * 3 + r)] = 1.0;
            }
        }
        let d = &aoa.d;
        let vec_d = DVector::from_column_slice(d.as_slice());
        let vec_dt = DVector::from_column_slice(d.transpose().as_slice());
        assert_eq!(&p * &vec_d, vec_dt);
        let expected = &p * &aoa.q_d_weight * p.transpose();
        assert!((direction_weight(aoa) - &expected).norm() < 1e-12 * expected.norm());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let t = trial(3, true);
        let two = BaselineSet::from_columns(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!(matches!(assemble_hybrid(&t.design, &t.epoch, t.aoa.as_ref(), &two), Err(Error::Model(_))));
    }
}
