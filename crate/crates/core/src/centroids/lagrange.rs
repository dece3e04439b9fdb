use nalgebra::{DMatrix, DVector};

use super::{expected_loss, CentroidMethod, CentroidResult, Side};
use crate::divergences::{GBregmanDivergence, Mapping};
use crate::domain::{Domain, EqualityConstraints};
use crate::ensemble::{Point, WeightedEnsemble};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::loss::LossFunction;

/// Required constraint residual for the Lagrange solve.
pub const LAGRANGE_TOL: f64 = 1e-10;
const MAX_ITER: usize = 100;

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `map(x) = mean + Wᵀλ`, `W x = b` for `(x, λ)`.
///
/// Newton on `λ` from `λ = 0`; the Jacobian is `W J⁻¹ Wᵀ` with `J` the
/// Jacobian of `map` at the current `x`.
pub fn lagrange_solve(map: &dyn Mapping, mean: &[f64], eq: &EqualityConstraints) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = eq.w();
    let b = eq.b();
    let mean = DVector::from_column_slice(mean);
    let point_at = |lambda: &DVector<f64>| -> Result<(Vec<f64>, DVector<f64>)> {
        let eta = &mean + w.transpose() * lambda;
        let x = map.inverse(eta.as_slice())?;
        let r = w * DVector::from_column_slice(&x) - b;
        Ok((x, r))
    };
    let target = 1e-3 * LAGRANGE_TOL * (1.0 + inf_norm(b));
    let mut lambda = DVector::zeros(eq.count());
    let (mut x, mut r) = point_at(&lambda)?;
    for _ in 0..MAX_ITER {
        if inf_norm(&r) <= target {
            break;
        }
        let j = map.jacobian(&x)?;
        let j_inv = linalg::inverse(&j)?;
        let jac: DMatrix<f64> = w * j_inv * w.transpose();
        let step = linalg::solve(&jac, &(-&r))?;
        let res = inf_norm(&r);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &lambda + &step * t;
            if let Ok((xn, rn)) = point_at(&cand) {
                if inf_norm(&rn) < res {
                    lambda = cand;
                    x = xn;
                    r = rn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let res = inf_norm(&r);
    if res > LAGRANGE_TOL {
        return Err(Error::NoConvergence {
            method: "lagrange multiplier newton".into(),
            iterations: MAX_ITER,
            residual: res,
        });
    }
    Ok((x, lambda.iter().copied().collect()))
}

fn constrained(
    div: &GBregmanDivergence,
    map: &dyn Mapping,
    ens: &WeightedEnsemble,
    domain: &Domain,
    side: Side,
) -> Result<CentroidResult> {
    check_dim(domain.dim(), ens.dim())?;
    let eq = domain
        .equality()
        .ok_or_else(|| Error::InvalidInput("domain has no equality constraints".into()))?;
    let mean = ens.try_expectation(|p| map.forward(p))?;
    let (x, lambda) = lagrange_solve(map, &mean, eq)?;
    domain.relaxed().check_feasible(&x).map_err(|e| Error::Infeasible {
        point: x.clone(),
        reason: format!("constrained centroid violates the box bounds ({e}); active-set handling is not supported"),
    })?;
    let div = div.clone().with_domain(domain.clone())?;
    let objective = expected_loss(&div, ens, side, &x)?;
    Ok(CentroidResult {
        point: Point::new(x)?,
        multipliers: lambda,
        objective,
        method: CentroidMethod::Lagrange,
        non_unique: false,
    })
}

/// `y*` with `f(y*) = E f(Y) + Wᵀλ` and `W y* = b`, for `g = id`.
pub fn constrained_central_prediction(
    div: &GBregmanDivergence,
    preds: &WeightedEnsemble,
    domain: &Domain,
) -> Result<CentroidResult> {
    if !div.mapping().is_identity() {
        return Err(Error::Unsupported(format!(
            "constrained central prediction needs g = identity, {} has g = {}",
            div.name(),
            div.mapping().name()
        )));
    }
    let (_, f) = div.dual_pair();
    constrained(div, f.as_ref(), preds, domain, Side::FirstArg)
}

/// `t*` with `g(t*) = E g(T) + Wᵀλ` and `W t* = b`, for `f = id`.
pub fn constrained_central_label(
    div: &GBregmanDivergence,
    labels: &WeightedEnsemble,
    domain: &Domain,
) -> Result<CentroidResult> {
    let (_, f) = div.dual_pair();
    if !f.is_identity() {
        return Err(Error::Unsupported(format!(
            "constrained central label needs f = identity, {} has f = {}",
            div.name(),
            f.name()
        )));
    }
    constrained(div, div.mapping().as_ref(), labels, domain, Side::SecondArg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::catalog;
    use approx::assert_abs_diff_eq;

    fn ens(rows: &[&[f64]]) -> WeightedEnsemble {
        WeightedEnsemble::from_rows(rows, &vec![1.0; rows.len()]).unwrap()
    }

    /// Normalized geometric mean, computed independently.
    fn geometric(rows: &[&[f64]]) -> Vec<f64> {
        let d = rows[0].len();
        let raw: Vec<f64> = (0..d)
            .map(|i| (rows.iter().map(|r| r[i].ln()).sum::<f64>() / rows.len() as f64).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        raw.iter().map(|v| v / z).collect()
    }

    #[test]
    fn kl_simplex_prediction() {
        let rows: [&[f64]; 2] = [&[0.2, 0.8], &[0.8, 0.2]];
        let r = constrained_central_prediction(&catalog::kl(2), &ens(&rows), &Domain::simplex(2)).unwrap();
        assert_abs_diff_eq!(r.point[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.multipliers[0], -(0.8f64.ln()), epsilon = 1e-12);
        assert_abs_diff_eq!(r.objective, -(0.8f64.ln()), epsilon = 1e-12);
        assert_eq!(r.method, CentroidMethod::Lagrange);

        let rows: [&[f64]; 2] = [&[0.2, 0.8], &[0.5, 0.5]];
        let r = constrained_central_prediction(&catalog::kl(2), &ens(&rows), &Domain::simplex(2)).unwrap();
        assert_abs_diff_eq!(r.point[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.point[1], 2.0 / 3.0, epsilon = 1e-12);
        let g = geometric(&rows);
        assert_abs_diff_eq!(r.point[0], g[0], epsilon = 1e-12);
    }

    #[test]
    fn single_prediction_has_zero_multiplier() {
        let r =
            constrained_central_prediction(&catalog::kl(3), &ens(&[&[0.2, 0.3, 0.5]]), &Domain::simplex(3)).unwrap();
        assert_abs_diff_eq!(r.multipliers[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.point[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn reverse_kl_simplex_label() {
        let rk = catalog::reverse_kl(2);
        let rows: [&[f64]; 2] = [&[0.2, 0.8], &[0.8, 0.2]];
        let r = constrained_central_label(&rk, &ens(&rows), &Domain::simplex(2)).unwrap();
        assert_abs_diff_eq!(r.point[0], 0.5, epsilon = 1e-12);
        let rows: [&[f64]; 2] = [&[0.2, 0.8], &[0.5, 0.5]];
        let r = constrained_central_label(&rk, &ens(&rows), &Domain::simplex(2)).unwrap();
        assert_abs_diff_eq!(r.point[0], 1.0 / 3.0, epsilon = 1e-12);
        let r = constrained_central_label(&rk, &ens(&[&[0.4, 0.6]]), &Domain::simplex(2)).unwrap();
        assert_abs_diff_eq!(r.point[0], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn multipliers_satisfy_stationarity() {
        let rows: [&[f64]; 3] = [&[0.1, 0.3, 0.6], &[0.5, 0.25, 0.25], &[0.2, 0.2, 0.6]];
        let preds = ens(&rows);
        let div = catalog::kl(3);
        let r = constrained_central_prediction(&div, &preds, &Domain::simplex(3)).unwrap();
        let mean = preds.try_expectation(|y| div.moment(y)).unwrap();
        let fy = div.moment(&r.point).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(fy[i] - mean[i], r.multipliers[0], epsilon = 1e-9);
        }
        let g = geometric(&rows);
        for i in 0..3 {
            assert_abs_diff_eq!(r.point[i], g[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn wrong_form_is_rejected() {
        let p = ens(&[&[0.5, 0.5]]);
        assert!(constrained_central_prediction(&catalog::reverse_kl(2), &p, &Domain::simplex(2)).is_err());
        assert!(constrained_central_label(&catalog::kl(2), &p, &Domain::simplex(2)).is_err());
        assert!(constrained_central_prediction(&catalog::kl(2), &p, &Domain::unit_cube(2)).is_err());
    }

    #[test]
    fn box_violation_is_reported() {
        // Sum-to-two on the unit cube; the scaled geometric mean leaves the cube.
        let dom = Domain::unit_cube(3)
            .with_equality(
                DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
                DVector::from_vec(vec![2.0]),
            )
            .unwrap();
        let p = ens(&[&[1.0, 0.9, 0.1], &[1.0, 0.1, 0.9]]);
        assert!(matches!(
            constrained_central_prediction(&catalog::kl(3), &p, &dom),
            Err(Error::Infeasible { .. })
        ));
    }
}
