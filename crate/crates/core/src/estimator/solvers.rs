use nalgebra::{DMatrix, DVector, Matrix3};

use super::float::{solve_float, FloatSolution};
use super::model::{assemble_hybrid, direction_weight};
use super::search::{constrained_search, FixedSolution};
use super::so3fix::weighted_so3_fix_admissible;
use super::SearchControl;
use crate::error::{Error, Result};
use crate::fiveg::AoaSet;
use crate::frames::{project_to_so3, Mat9, Rotation};
use crate::gnss::{BaselineSet, GnssDesign, GnssEpoch};
use crate::linalg::sym_pinv;

/// Float and fixed solution of the GNSS + 5G model.
pub fn hybrid_solve(
    design: &GnssDesign,
    epoch: &GnssEpoch,
    aoa: &AoaSet,
    f: &BaselineSet,
    ctrl: &SearchControl,
) -> Result<(FloatSolution, FixedSolution)> {
    let model = assemble_hybrid(design, epoch, Some(aoa), f)?;
    let float = solve_float(&model)?;
    let fixed = constrained_search(&float, ctrl)?;
    Ok((float, fixed))
}

/// The same pipeline without direction observations.
pub fn gnss_only_solve(
    design: &GnssDesign,
    epoch: &GnssEpoch,
    f: &BaselineSet,
    ctrl: &SearchControl,
) -> Result<(FloatSolution, FixedSolution)> {
    let model = assemble_hybrid(design, epoch, None, f)?;
    let float = solve_float(&model)?;
    let fixed = constrained_search(&float, ctrl)?;
    Ok((float, fixed))
}

/// 5G-only attitude: minimizes `||vec(D^T) - (I (x) E^T) vec(R)||^2_W`
/// over SO(3), started from the orthogonal Procrustes solution.
pub fn fiveg_only_solve(aoa: &AoaSet, ctrl: &SearchControl) -> Result<Rotation> {
    let l = aoa.n_bs();
    if l < 2 {
        return Err(Error::Observability(format!(
            "attitude is unobservable from {l} direction observation(s); at least 2 are required"
        )));
    }
    let sv = aoa.e.clone().svd(false, false).singular_values;
    if sv[1] <= 1e-9 * sv[0] {
        return Err(Error::Observability("station directions are collinear".into()));
    }

    let design = DMatrix::<f64>::identity(3, 3).kronecker(&aoa.e.transpose());
    let w = direction_weight(aoa);
    let dt = aoa.d.transpose();
    let obs = DVector::from_column_slice(dt.as_slice());
    let normal = design.transpose() * &w * &design;
    let rhs = design.transpose() * &w * obs;
    let normal = Mat9::from_column_slice(normal.as_slice());
    let normal = (normal + normal.transpose()) * 0.5;
    let rhs = nalgebra::SVector::<f64, 9>::from_column_slice(rhs.as_slice());
    // Minimum-norm solution; the normal matrix has rank at most 2L.
    let r_hat = Matrix3::from_column_slice((sym_pinv(&normal, 1e-12) * rhs).as_slice());

    let ed = &aoa.e * aoa.d.transpose();
    let initial = project_to_so3(&ed)?;
    // The rank-two direction weight cannot tell d from -d, so with coplanar
    // stations a half-turn about their normal fits equally well.
    let aligned = |r: &Rotation| (r.matrix().transpose() * ed).trace() > 0.0;
    let (rotation, _) = weighted_so3_fix_admissible(&r_hat, &normal, &initial, ctrl, aligned)?;
    Ok(rotation)
}
