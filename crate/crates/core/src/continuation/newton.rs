use nalgebra::{DMatrix, DVector};

use super::TraceSettings;
use crate::error::{PegError, Result};
use crate::residuals::ResidualSystem;

pub const MAX_NEWTON_ITERATIONS: usize = 50;

/// Relative cutoff below which singular values count as zero.
const RANK_CUTOFF: f64 = 1e-12;

const MAX_BACKTRACKS: usize = 30;

/// Minimum-norm least-squares solution of `j x = r`.
pub(crate) fn lstsq(j: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0 && smax.is_finite()) {
        return None;
    }
    svd.solve(r, smax * RANK_CUTOFF).ok()
}

/// Gauss–Newton with minimum-norm steps and backtracking. Works for square,
/// under- and overdetermined systems; converges when the residual norm is at
/// most `tol`.
pub fn newton(
    sys: &dyn ResidualSystem,
    u0: &[f64],
    tol: f64,
    floor: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let mut u = u0.to_vec();
    let mut r = sys.residual(&u);
    let mut nr = r.norm();
    for _ in 0..max_iter {
        if !nr.is_finite() {
            break;
        }
        if nr <= tol {
            return Ok(u);
        }
        let step = lstsq(&sys.jacobian(&u), &r).ok_or(PegError::NoConvergence {
            iterations: 0,
            residual: nr,
        })?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = u
                .iter()
                .zip(step.iter())
                .map(|(a, d)| a - lambda * d)
                .collect();
            let rt = sys.residual(&trial);
            let nt = rt.norm();
            if nt.is_finite() && nt < nr {
                accepted = Some((trial, rt, nt));
                break;
            }
            lambda *= 0.5;
        }
        let Some((trial, rt, nt)) = accepted else {
            break;
        };
        u = trial;
        r = rt;
        nr = nt;
        let b = sys.boundary_distance(&u);
        if b < floor && nr > tol {
            return Err(PegError::BoundaryExit { distance: b });
        }
    }
    if nr <= tol {
        let b = sys.boundary_distance(&u);
        if b < floor {
            return Err(PegError::BoundaryExit { distance: b });
        }
        return Ok(u);
    }
    Err(PegError::NoConvergence {
        iterations: max_iter,
        residual: nr,
    })
}

/// Corrector of the operations API: at most 50 iterations to `corrector_tol`,
/// failing if the iterate gets closer than `boundary_floor` to the boundary.
pub fn refine(sys: &dyn ResidualSystem, u0: &[f64], s: &TraceSettings) -> Result<Vec<f64>> {
    let u = newton(
        sys,
        u0,
        s.corrector_tol,
        s.boundary_floor,
        MAX_NEWTON_ITERATIONS,
    )?;
    let b = sys.boundary_distance(&u);
    if b < s.boundary_floor {
        return Err(PegError::BoundaryExit { distance: b });
    }
    Ok(u)
}

/// Newton on `F(v) = 0` together with the hyperplane `normal . (v - anchor) = 0`.
pub(crate) fn correct_on_plane(
    sys: &dyn ResidualSystem,
    start: &[f64],
    normal: &DVector<f64>,
    anchor: &[f64],
    tol: f64,
    max_iter: usize,
) -> Option<Vec<f64>> {
    let n = start.len();
    let m = sys.codomain_dim();
    let mut v = start.to_vec();
    let mut prev = f64::INFINITY;
    for it in 0..=max_iter {
        let f = sys.residual(&v);
        let plane: f64 = (0..n).map(|i| normal[i] * (v[i] - anchor[i])).sum();
        let nf = f.norm();
        if !nf.is_finite() {
            return None;
        }
        if nf <= tol && plane.abs() <= tol.max(1e-14) {
            return Some(v);
        }
        if it == max_iter || (it > 1 && nf > 4.0 * prev) {
            return None;
        }
        prev = nf;
        let j = sys.jacobian(&v);
        let mut a = DMatrix::zeros(m + 1, n);
        a.rows_mut(0, m).copy_from(&j);
        for c in 0..n {
            a[(m, c)] = normal[c];
        }
        let mut rhs = DVector::zeros(m + 1);
        rhs.rows_mut(0, m).copy_from(&f);
        rhs[m] = plane;
        let d = lstsq(&a, &rhs)?;
        for i in 0..n {
            v[i] -= d[i];
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::ClosedCurve;
    use crate::polygon::PolygonParam;
    use crate::residuals::QuadSystem;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    #[test]
    fn circle_square_from_perturbed_start() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let sys = QuadSystem::square(&c);
        let u = refine(&sys, &[0.0, 0.24, 0.26, 0.25], &TraceSettings::default()).unwrap();
        assert!(sys.residual(&u).norm() <= 1e-10);
        for g in &u[1..] {
            assert_abs_diff_eq!(*g, 0.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn ellipse_square_converges_to_algebraic_one() {
        let e = ClosedCurve::ellipse(2.0, 1.0).unwrap();
        let sys = QuadSystem::square(&e);
        let th = 2f64.atan() / TAU;
        let start = [
            th + 0.01,
            0.5 - 2.0 * th - 0.02,
            2.0 * th + 0.015,
            0.5 - 2.0 * th,
        ];
        let u = refine(&sys, &start, &TraceSettings::default()).unwrap();
        assert!(sys.residual(&u).norm() < 1e-10);
        let want = PolygonParam::from_vertices(
            &[th, 0.5 - th, 0.5 + th, 1.0 - th].map(crate::curve::CirclePoint::new),
        )
        .unwrap();
        assert!(PolygonParam::from_chart(&u).orbit_distance(&want) < 1e-9);
    }

    #[test]
    fn singular_start_uses_least_squares() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let sys = QuadSystem::square(&c);
        let j = sys.jacobian(&[0.0, 0.25, 0.25, 0.25]);
        let s = j.clone().svd(false, false).singular_values;
        assert!(s.min() < 1e-12 * s.max());
        let u = refine(&sys, &[0.1, 0.25, 0.25, 0.25], &TraceSettings::default()).unwrap();
        assert_abs_diff_eq!(u[0], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn boundary_exit_is_reported() {
        let c = ClosedCurve::circle(1.0).unwrap();
        let sys = QuadSystem::square(&c);
        let r = refine(&sys, &[0.0, 1e-6, 1e-6, 1e-6], &TraceSettings::default());
        assert!(matches!(r, Err(PegError::BoundaryExit { .. })), "{r:?}");
    }
}
