//! Weighted nearest rotation: `min_{R in SO(3)} ||vec(R - R_c)||^2_W`.
//!
//! Damped Riemannian Newton on perturbations `R exp([delta]x)`, started from
//! the SVD projection of `R_c` and from its three half-turns about the body
//! axes. The best of the four basins is returned.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SMatrix};

use super::SearchControl;
use crate::error::{Error, Result};
use crate::frames::{exp_so3, project_to_so3, skew, unvec3x3, vec3x3, Mat9, Rotation, Vec3};

type Mat9x3 = SMatrix<f64, 9, 3>;

/// `||vec(R - R_c)||^2_W`.
pub fn so3_cost(r: &Matrix3<f64>, r_cond: &Matrix3<f64>, weight: &Mat9) -> f64 {
    let e = vec3x3(&(r - r_cond));
    e.dot(&(weight * e))
}

#[derive(Debug, Clone, Copy)]
struct Refined {
    rotation: Rotation,
    cost: f64,
    converged: bool,
}

fn refine(start: Rotation, r_cond: &Matrix3<f64>, weight: &Mat9, ctrl: &SearchControl) -> Refined {
    let mut r = start.into_matrix();
    let mut cost = so3_cost(&r, r_cond, weight);
    let mut mu = 0.0;
    let basis = [Vec3::x(), Vec3::y(), Vec3::z()];

    let mut last_newton = f64::INFINITY;
    for _ in 0..ctrl.so3_max_iterations {
        let e = vec3x3(&(r - r_cond));
        let we = weight * e;
        let s = unvec3x3(&we);
        let mut jac = Mat9x3::zeros();
        for (i, b) in basis.iter().enumerate() {
            jac.set_column(i, &vec3x3(&(r * skew(b))));
        }
        let grad = 2.0 * jac.transpose() * we;
        let a = r.transpose() * s;
        let sym_a = (a + a.transpose()) * 0.5;
        let hess = 2.0 * (jac.transpose() * weight * jac) + 2.0 * (sym_a - Matrix3::identity() * a.trace());
        let scale = hess.diagonal().amax().max(f64::MIN_POSITIVE);

        if let Some(newton) = hess.cholesky().map(|c| -c.solve(&grad)) {
            last_newton = newton.norm();
            if last_newton < ctrl.so3_tolerance {
                return Refined { rotation: Rotation::from_matrix_unchecked(r), cost, converged: true };
            }
            // Close to the minimum the cost change is below rounding, so a
            // short Newton step is taken on the model alone.
            if last_newton < ctrl.so3_tolerance.sqrt() {
                r *= exp_so3(&newton).into_matrix();
                cost = so3_cost(&r, r_cond, weight);
                mu = 0.0;
                continue;
            }
        }

        let mut accepted = false;
        let mut last_step = f64::INFINITY;
        while mu <= 1e16 * scale {
            let damped = hess + Matrix3::identity() * mu;
            let Some(chol) = damped.cholesky() else {
                mu = (mu * 10.0).max(1e-9 * scale);
                continue;
            };
            let step = -chol.solve(&grad);
            last_step = step.norm();
            let candidate = r * exp_so3(&step).into_matrix();
            let new_cost = so3_cost(&candidate, r_cond, weight);
            if new_cost <= cost {
                r = candidate;
                cost = new_cost;
                mu = if mu < 1e-9 * scale { 0.0 } else { mu / 10.0 };
                accepted = true;
                break;
            }
            mu = (mu * 10.0).max(1e-9 * scale);
        }
        if !accepted {
            let converged = last_step < ctrl.so3_tolerance.sqrt() || grad.norm() == 0.0;
            return Refined { rotation: Rotation::from_matrix_unchecked(r), cost, converged };
        }
        // Re-orthonormalize once rounding starts to accumulate.
        if Rotation::from_matrix_unchecked(r).orthonormality_defect() > 1e-13 {
            if let Ok(p) = project_to_so3(&r) {
                r = p.into_matrix();
                cost = so3_cost(&r, r_cond, weight);
            }
        }
    }
    let converged = last_newton < ctrl.so3_tolerance.sqrt();
    Refined { rotation: Rotation::from_matrix_unchecked(r), cost, converged }
}

/// Multi-start weighted SO(3) fix around the SVD projection of `r_cond`.
pub fn weighted_so3_fix(r_cond: &Matrix3<f64>, weight: &Mat9, ctrl: &SearchControl) -> Result<(Rotation, f64)> {
    let initial = project_to_so3(r_cond).unwrap_or_else(|_| Rotation::identity());
    weighted_so3_fix_from(r_cond, weight, &initial, ctrl)
}

/// Multi-start weighted SO(3) fix around a caller-supplied initial rotation.
pub fn weighted_so3_fix_from(
    r_cond: &Matrix3<f64>,
    weight: &Mat9,
    initial: &Rotation,
    ctrl: &SearchControl,
) -> Result<(Rotation, f64)> {
    weighted_so3_fix_admissible(r_cond, weight, initial, ctrl, |_| true)
}

/// As [`weighted_so3_fix_from`], preferring converged minima that satisfy
/// `admissible`; used to break symmetries the weight cannot see.
pub fn weighted_so3_fix_admissible(
    r_cond: &Matrix3<f64>,
    weight: &Mat9,
    initial: &Rotation,
    ctrl: &SearchControl,
    admissible: impl Fn(&Rotation) -> bool,
) -> Result<(Rotation, f64)> {
    let starts = [
        *initial,
        *initial * Rotation::rot_x(PI),
        *initial * Rotation::rot_y(PI),
        *initial * Rotation::rot_z(PI),
    ];
    let mut best: Option<Refined> = None;
    let mut best_admissible: Option<Refined> = None;
    let mut best_any: Option<Refined> = None;
    for start in starts {
        let out = refine(start, r_cond, weight, ctrl);
        if best_any.is_none_or(|b| out.cost < b.cost) {
            best_any = Some(out);
        }
        if out.converged && best.is_none_or(|b| out.cost < b.cost) {
            best = Some(out);
        }
        if out.converged && admissible(&out.rotation) && best_admissible.is_none_or(|b| out.cost < b.cost) {
            best_admissible = Some(out);
        }
    }
    match best_admissible.or(best) {
        Some(b) => Ok((b.rotation, b.cost.max(0.0))),
        None => {
            let b = best_any.expect("four starts");
            Err(Error::NonConvergence { best: b.rotation, cost: b.cost })
        }
    }
}
