use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3};

use super::model::HybridModel;
use crate::error::{Error, NormalBlock, Result};
use crate::frames::{unvec3x3, vec3x3, Mat9, Vec9};
use crate::linalg::{sym_condition, sym_pinv};

/// Condition-number guard on the normal matrix.
pub const MAX_CONDITION: f64 = 1e14;

/// Eigenvalues of the conditional attitude covariance below this fraction
/// of the largest are treated as exact directions when forming its weight.
pub const ATTITUDE_WEIGHT_REL_TOL: f64 = 1e-12;

/// Unconstrained least-squares solution with its covariance partition.
#[derive(Debug, Clone)]
pub struct FloatSolution {
    /// Float ambiguities, N x M.
    pub z_float: DMatrix<f64>,
    /// Float attitude, a general 3x3 matrix.
    pub r_float: Matrix3<f64>,
    pub q_z: DMatrix<f64>,
    pub q_r: Mat9,
    /// 9 x NM.
    pub q_rz: DMatrix<f64>,
    /// NM x 9.
    pub q_zr: DMatrix<f64>,
    pub normal_matrix: DMatrix<f64>,
    /// Weighted squared residual at the float solution.
    pub residual: f64,
    q_z_chol: Cholesky<f64, Dyn>,
    /// `Q_RZ Q_Z^-1`.
    gain: DMatrix<f64>,
    q_r_cond: Mat9,
}

impl FloatSolution {
    pub fn n_dd(&self) -> usize {
        self.z_float.nrows()
    }

    pub fn n_baselines(&self) -> usize {
        self.z_float.ncols()
    }

    pub fn z_float_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(self.z_float.as_slice())
    }

    /// Full covariance `[[Q_Z, Q_ZR], [Q_RZ, Q_R]]`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let nm = self.q_z.nrows();
        let mut q = DMatrix::zeros(nm + 9, nm + 9);
        q.view_mut((0, 0), (nm, nm)).copy_from(&self.q_z);
        q.view_mut((0, nm), (nm, 9)).copy_from(&self.q_zr);
        q.view_mut((nm, 0), (9, nm)).copy_from(&self.q_rz);
        q.view_mut((nm, nm), (9, 9)).copy_from(&self.q_r);
        q
    }

    /// `||vec(Z - Z_float)||^2` in the `Q_Z^-1` metric.
    pub fn ambiguity_distance(&self, z: &DVector<f64>) -> f64 {
        let d = z - self.z_float_vec();
        let s = self.q_z_chol.solve(&d);
        d.dot(&s)
    }

    /// Conditional attitude covariance `Q_R - Q_RZ Q_Z^-1 Q_ZR`. It does not
    /// depend on the ambiguities.
    pub fn conditional_covariance(&self) -> &Mat9 {
        &self.q_r_cond
    }

    /// Inverse of the conditional attitude covariance, with near-null
    /// directions dropped.
    pub fn attitude_weight(&self) -> Mat9 {
        attitude_weight(&self.q_r_cond)
    }

    /// `vec(R(Z)) = vec(R_float) - Q_RZ Q_Z^-1 vec(Z_float - Z)`.
    pub fn conditional_attitude_vec(&self, z: &DVector<f64>) -> Matrix3<f64> {
        let innovation = self.z_float_vec() - z;
        let delta = &self.gain * innovation;
        let v = vec3x3(&self.r_float) - Vec9::from_column_slice(delta.as_slice());
        unvec3x3(&v)
    }
}

pub fn attitude_weight(q_r_cond: &Mat9) -> Mat9 {
    sym_pinv(q_r_cond, ATTITUDE_WEIGHT_REL_TOL)
}

/// Solves the normal equations of the unconstrained weighted least-squares
/// problem and partitions `N^-1`.
pub fn solve_float(model: &HybridModel) -> Result<FloatSolution> {
    let nm = model.n_ambiguities();
    let normal = model.normal_matrix();
    let normal = (&normal + normal.transpose()) * 0.5;

    let condition = sym_condition(&normal);
    let chol = if condition <= MAX_CONDITION { normal.clone().cholesky() } else { None };
    let chol = match chol {
        Some(c) => c,
        None => {
            let nzz = normal.view((0, 0), (nm, nm)).into_owned();
            let block = if sym_condition(&nzz) > MAX_CONDITION {
                NormalBlock::Ambiguity
            } else {
                NormalBlock::Attitude
            };
            return Err(Error::RankDeficient { block, condition });
        }
    };

    let rhs = model.design_matrix.transpose() * (&model.weight * &model.observation_vector);
    let mut x = chol.solve(&rhs);
    // One step of iterative refinement.
    let r = &rhs - &normal * &x;
    x += chol.solve(&r);

    let q = chol.inverse();
    let q = (&q + q.transpose()) * 0.5;
    let q_z = q.view((0, 0), (nm, nm)).into_owned();
    let q_zr = q.view((0, nm), (nm, 9)).into_owned();
    let q_rz = q_zr.transpose();
    let q_r = Mat9::from_iterator(q.view((nm, nm), (9, 9)).iter().copied());

    let q_z_chol = q_z
        .clone()
        .cholesky()
        .ok_or_else(|| Error::RankDeficient { block: NormalBlock::Ambiguity, condition })?;
    let gain = q_z_chol.solve(&q_zr).transpose();
    let reduction = &gain * &q_zr;
    let mut q_r_cond = q_r - Mat9::from_iterator(reduction.iter().copied());
    q_r_cond = (q_r_cond + q_r_cond.transpose()) * 0.5;

    let n_dd = model.n_dd;
    let m = model.n_baselines;
    let z_float = DMatrix::from_column_slice(n_dd, m, &x.as_slice()[..nm]);
    let r_float = Matrix3::from_column_slice(&x.as_slice()[nm..]);
    let residual = model.weighted_residual(&z_float, &r_float);

    Ok(FloatSolution {
        z_float,
        r_float,
        q_z,
        q_r,
        q_rz,
        q_zr,
        normal_matrix: normal,
        residual,
        q_z_chol,
        gain,
        q_r_cond,
    })
}

/// Conditional attitude for integer ambiguities `z` and its covariance.
pub fn conditional_attitude(float: &FloatSolution, z: &DMatrix<i64>) -> (Matrix3<f64>, Mat9) {
    assert_eq!(z.shape(), float.z_float.shape(), "ambiguity matrix shape");
    let zv = DVector::from_iterator(z.len(), z.iter().map(|&v| v as f64));
    (float.conditional_attitude_vec(&zv), float.q_r_cond)
}
