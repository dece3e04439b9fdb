//! Central labels and central predictions.

mod brute_force;
mod lagrange;

use serde::{Deserialize, Serialize};

pub use brute_force::{brute_force_centroid, brute_force_centroid_with, default_search_box, BruteForceOptions};
pub use lagrange::{constrained_central_label, constrained_central_prediction, lagrange_solve, LAGRANGE_TOL};

use crate::divergences::{Family, GBregmanDivergence};
use crate::ensemble::{Point, WeightedEnsemble};
use crate::error::{check_dim, Error, Result};
use crate::loss::LossFunction;

/// Which argument of the loss is being optimized.
///
/// `FirstArg` minimizes `E_Y L(x, Y)` (central prediction, variance term);
/// `SecondArg` minimizes `E_T L(T, x)` (central label, noise term).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    FirstArg,
    SecondArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidMethod {
    ClosedForm,
    Lagrange,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidResult {
    pub point: Point,
    /// Lagrange multipliers, one per equality row; empty when unconstrained.
    pub multipliers: Vec<f64>,
    /// The minimized expected loss.
    pub objective: f64,
    pub method: CentroidMethod,
    #[serde(default)]
    pub non_unique: bool,
}

/// Expected loss with the free argument on the given side.
pub fn expected_loss(loss: &dyn LossFunction, ens: &WeightedEnsemble, side: Side, x: &[f64]) -> Result<f64> {
    ens.expect_scalar(|p| match side {
        Side::FirstArg => loss.eval(x, p),
        Side::SecondArg => loss.eval(p, x),
    })
}

fn closed_form_result(
    div: &GBregmanDivergence,
    ens: &WeightedEnsemble,
    side: Side,
    point: Vec<f64>,
) -> Result<CentroidResult> {
    if let Err(e) = div.domain().check_feasible(&point) {
        return Err(match e {
            Error::Infeasible { .. } | Error::Boundary { .. } => Error::InfeasibleMean { mean: point },
            other => other,
        });
    }
    let objective = expected_loss(div, ens, side, &point)?;
    Ok(CentroidResult {
        point: Point::new(point)?,
        multipliers: Vec::new(),
        objective,
        method: CentroidMethod::ClosedForm,
        non_unique: false,
    })
}

/// `t̄ = g⁻¹(E g(T))`, the minimizer of `E_T D(T, ·)`.
pub fn g_mean_label(div: &GBregmanDivergence, labels: &WeightedEnsemble) -> Result<CentroidResult> {
    check_dim(div.domain().dim(), labels.dim())?;
    let mean = labels.try_expectation(|t| div.canonical(t))?;
    let point = div.mapping().inverse(&mean)?;
    closed_form_result(div, labels, Side::SecondArg, point)
}

/// `ȳ = f⁻¹(E f(Y))`, the minimizer of `E_Y D(·, Y)`.
pub fn f_mean_prediction(div: &GBregmanDivergence, preds: &WeightedEnsemble) -> Result<CentroidResult> {
    check_dim(div.domain().dim(), preds.dim())?;
    let mean = preds.try_expectation(|y| div.moment(y))?;
    let (_, f) = div.dual_pair();
    let point = f.inverse(&mean)?;
    closed_form_result(div, preds, Side::FirstArg, point)
}

/// Normalized power means for an α-divergence on the simplex:
/// `t*ᵢ ∝ (E Tᵢ^α)^{1/α}` for labels, `y*ᵢ ∝ (E Yᵢ^{1−α})^{1/(1−α)}` for predictions.
///
/// These minimize noise or variance under the sum-to-one constraint, but do
/// not give an additive decomposition there.
pub fn power_mean_centroids(div: &GBregmanDivergence, ens: &WeightedEnsemble, side: Side) -> Result<CentroidResult> {
    let alpha = match div.family() {
        Family::Alpha { alpha } => *alpha,
        other => {
            return Err(Error::Unsupported(format!(
                "power mean centroids need an alpha divergence, got {other:?}"
            )))
        }
    };
    // Reversal swaps argument roles, i.e. α ↔ 1 − α.
    let label_side = (side == Side::SecondArg) != div.is_reversed();
    let p = if label_side { alpha } else { 1.0 - alpha };
    let means = ens.try_expectation(|x| {
        if let Some(i) = x.iter().position(|v| *v < 0.0) {
            return Err(Error::Boundary {
                context: "power mean".into(),
                index: i,
                value: x[i],
            });
        }
        Ok(x.iter().map(|v| v.powf(p)).collect())
    })?;
    let raw: Vec<f64> = means.iter().map(|m| m.powf(1.0 / p)).collect();
    let z: f64 = raw.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidInput("power mean has no positive mass".into()));
    }
    let point: Vec<f64> = raw.iter().map(|v| v / z).collect();
    let objective = expected_loss(div, ens, side, &point)?;
    Ok(CentroidResult {
        point: Point::new(point)?,
        multipliers: Vec::new(),
        objective,
        method: CentroidMethod::ClosedForm,
        non_unique: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::catalog;
    use crate::domain::Domain;
    use approx::assert_abs_diff_eq;

    fn ens(rows: &[&[f64]], w: &[f64]) -> WeightedEnsemble {
        WeightedEnsemble::from_rows(rows, w).unwrap()
    }

    #[test]
    fn g_mean_examples() {
        let e = catalog::sq_euclidean(1);
        let r = g_mean_label(&e, &ens(&[&[0.0], &[2.0]], &[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(r.point[0], 1.0, epsilon = 1e-15);
        assert_eq!(r.method, CentroidMethod::ClosedForm);

        let g = catalog::gaussian_canonical();
        let r = g_mean_label(&g, &ens(&[&[0.0, 1.0], &[2.0, 3.0]], &[1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(r.point[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.point[1], 1.5, epsilon = 1e-12);

        let k = catalog::kl(2);
        let r = g_mean_label(&k, &ens(&[&[0.3, 0.6]], &[1.0])).unwrap();
        assert_eq!(r.point.coords(), &[0.3, 0.6]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn f_mean_examples() {
        let preds = ens(&[&[0.2, 0.8], &[0.8, 0.2]], &[1.0, 1.0]);
        let r = f_mean_prediction(&catalog::kl(2), &preds).unwrap();
        assert_abs_diff_eq!(r.point[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(r.point[1], 0.4, epsilon = 1e-12);
        let r = f_mean_prediction(&catalog::reverse_kl(2), &preds).unwrap();
        assert_abs_diff_eq!(r.point[0], 0.5, epsilon = 1e-15);

        let g = catalog::gaussian_canonical();
        let r = f_mean_prediction(&g, &ens(&[&[0.0, 1.0], &[2.0, 1.0]], &[1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(r.point[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.point[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_mean_is_reported() {
        let k = catalog::kl(2).with_domain(Domain::simplex(2)).unwrap();
        let preds = ens(&[&[0.2, 0.8], &[0.8, 0.2]], &[1.0, 1.0]);
        assert!(matches!(
            f_mean_prediction(&k, &preds),
            Err(Error::InfeasibleMean { .. })
        ));
    }

    #[test]
    fn power_mean_examples() {
        let a = catalog::alpha(2, 0.5).unwrap().with_domain(Domain::simplex(2)).unwrap();
        let r = power_mean_centroids(&a, &ens(&[&[0.2, 0.8], &[0.8, 0.2]], &[1.0, 1.0]), Side::FirstArg).unwrap();
        assert_abs_diff_eq!(r.point[0], 0.5, epsilon = 1e-15);
        let r = power_mean_centroids(&a, &ens(&[&[0.2, 0.8], &[0.5, 0.5]], &[1.0, 1.0]), Side::FirstArg).unwrap();
        let raw = [
            ((0.2f64.sqrt() + 0.5f64.sqrt()) / 2.0).powi(2),
            ((0.8f64.sqrt() + 0.5f64.sqrt()) / 2.0).powi(2),
        ];
        assert_abs_diff_eq!(r.point[0], raw[0] / (raw[0] + raw[1]), epsilon = 1e-14);
        let single = ens(&[&[0.3, 0.7]], &[1.0]);
        let r = power_mean_centroids(&a, &single, Side::SecondArg).unwrap();
        assert_abs_diff_eq!(r.point[0], 0.3, epsilon = 1e-15);
        assert!(power_mean_centroids(&catalog::kl(2), &single, Side::FirstArg).is_err());
    }

    #[test]
    fn result_json_round_trip() {
        let r = CentroidResult {
            point: Point::new(vec![0.5, 0.5]).unwrap(),
            multipliers: vec![0.2231435513142097],
            objective: 0.1,
            method: CentroidMethod::Lagrange,
            non_unique: false,
        };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"method\":\"lagrange\""));
        assert_eq!(serde_json::from_str::<CentroidResult>(&s).unwrap(), r);
    }
}
