//! Noise, bias and variance terms and the additivity gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centroids::{
    brute_force_centroid_with, constrained_central_label, constrained_central_prediction, default_search_box,
    f_mean_prediction, g_mean_label, power_mean_centroids, BruteForceOptions, Side,
};
use crate::divergences::{GBregmanDivergence, Generator};
use crate::domain::{Domain, SearchBox};
use crate::ensemble::{Point, WeightedEnsemble};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::loss::LossFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionMethod {
    /// Centroids from the brute-force oracle, terms by direct evaluation.
    Generic,
    /// Closed-form means and potentials.
    ClosedForm,
    /// Lagrange solve for an equality-constrained centroid.
    Constrained,
    /// Power-mean centroids on the simplex.
    PowerMean,
    /// Exponential-family negative log-likelihood.
    LogLikelihood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub expected_loss: f64,
    pub intrinsic_noise: f64,
    pub bias: f64,
    pub variance: f64,
    /// `expected_loss − intrinsic_noise − bias − variance`.
    pub gap: f64,
    pub central_label: Point,
    pub central_prediction: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multipliers: Option<Vec<f64>>,
    pub method: DecompositionMethod,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub non_unique: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DecompositionReport {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        expected_loss: f64,
        intrinsic_noise: f64,
        bias: f64,
        variance: f64,
        central_label: Vec<f64>,
        central_prediction: Vec<f64>,
        multipliers: Option<Vec<f64>>,
        method: DecompositionMethod,
    ) -> Result<Self> {
        Ok(DecompositionReport {
            expected_loss,
            intrinsic_noise,
            bias,
            variance,
            gap: expected_loss - intrinsic_noise - bias - variance,
            central_label: Point::new(central_label)?,
            central_prediction: Point::new(central_prediction)?,
            multipliers,
            method,
            non_unique: false,
            warnings: Vec::new(),
        })
    }

    /// Sum of the three terms.
    pub fn sum_of_terms(&self) -> f64 {
        self.intrinsic_noise + self.bias + self.variance
    }
}

/// `E_{T,Y} L(T, Y)` with independent labels and predictions, summed in
/// support order.
pub fn expected_pair_loss(loss: &dyn LossFunction, labels: &WeightedEnsemble, preds: &WeightedEnsemble) -> Result<f64> {
    labels.expect_scalar(|t| preds.expect_scalar(|y| loss.eval(t, y)))
}

/// Terms for given centroids `t*` and `y*`, all by direct evaluation:
/// noise `E L(T, t*)`, bias `L(t*, y*)`, variance `E L(y*, Y)`.
pub fn decompose_with_centroids(
    loss: &dyn LossFunction,
    labels: &WeightedEnsemble,
    preds: &WeightedEnsemble,
    central_label: &[f64],
    central_prediction: &[f64],
    method: DecompositionMethod,
) -> Result<DecompositionReport> {
    let expected = expected_pair_loss(loss, labels, preds)?;
    let noise = labels.expect_scalar(|t| loss.eval(t, central_label))?;
    let bias = loss.eval(central_label, central_prediction)?;
    let variance = preds.expect_scalar(|y| loss.eval(central_prediction, y))?;
    DecompositionReport::assemble(
        expected,
        noise,
        bias,
        variance,
        central_label.to_vec(),
        central_prediction.to_vec(),
        None,
        method,
    )
}

/// Decomposition with brute-force centroids; the gap is reported, not assumed zero.
///
/// Unbounded domains are searched over the ensembles' hull padded by
/// `max(range, 1)` per coordinate.
pub fn decompose_generic(
    loss: &dyn LossFunction,
    labels: &WeightedEnsemble,
    preds: &WeightedEnsemble,
    domain: &Domain,
) -> Result<DecompositionReport> {
    let opts = BruteForceOptions::default().with_search_box(default_search_box(domain, &[labels, preds]));
    decompose_generic_with(loss, labels, preds, domain, &opts)
}

pub fn decompose_generic_with(
    loss: &dyn LossFunction,
    labels: &WeightedEnsemble,
    preds: &WeightedEnsemble,
    domain: &Domain,
    opts: &BruteForceOptions,
) -> Result<DecompositionReport> {
    check_dim(domain.dim(), labels.dim())?;
    check_dim(domain.dim(), preds.dim())?;
    labels.check_within(domain)?;
    preds.check_within(domain)?;
    let t_star = brute_force_centroid_with(loss, labels, Side::SecondArg, domain, opts)?;
    let y_star = brute_force_centroid_with(loss, preds, Side::FirstArg, domain, opts)?;
    let mut report = decompose_with_centroids(
        loss,
        labels,
        preds,
        &t_star.point,
        &y_star.point,
        DecompositionMethod::Generic,
    )?;
    report.non_unique = t_star.non_unique || y_star.non_unique;
    Ok(report)
}

/// Closed-form decomposition for a g-Bregman divergence without equality
/// constraints: noise `E A(g(T)) − A(g(t̄))`, bias `D(t̄, ȳ)`, variance
/// `E B(f(Y)) − B(f(ȳ))`.
pub fn decompose_gbregman(
    div: &GBregmanDivergence,
    labels: &WeightedEnsemble,
    preds: &WeightedEnsemble,
) -> Result<DecompositionReport> {
    if div.domain().has_equality() {
        return Err(Error::Unsupported(
            "domain has equality constraints; use decompose_constrained_bregman".into(),
        ));
    }
    labels.check_within(div.domain())?;
    preds.check_within(div.domain())?;
    let t_bar = g_mean_label(div, labels)?.point.into_inner();
    let y_bar = f_mean_prediction(div, preds)?.point.into_inner();
    let expected = expected_pair_loss(div, labels, preds)?;
    let noise = labels.expect_scalar(|t| div.potential(t))? - div.potential(&t_bar)?;
    let variance = preds.expect_scalar(|y| div.dual_potential(y))? - div.dual_potential(&y_bar)?;
    let bias = div.gbregman_eval(&t_bar, &y_bar)?;
    DecompositionReport::assemble(
        expected,
        noise,
        bias,
        variance,
        t_bar,
        y_bar,
        None,
        DecompositionMethod::ClosedForm,
    )
}

/// Decomposition under equality constraints `W x = b`.
///
/// With `g = id` the central prediction comes from the Lagrange solve and the
/// variance is `λᵀb + E B(f(Y)) − B(f(y*))`; with `f = id` the roles of labels
/// and predictions are mirrored. Other divergences fall back to the
/// brute-force oracle with a warning.
pub fn decompose_constrained_bregman(
    div: &GBregmanDivergence,
    labels: &WeightedEnsemble,
    preds: &WeightedEnsemble,
    domain: &Domain,
) -> Result<DecompositionReport> {
    let eq = domain
        .equality()
        .ok_or_else(|| Error::InvalidInput("domain has no equality constraints".into()))?;
    let div = div.clone().with_domain(domain.clone())?;
    labels.check_within(domain)?;
    preds.check_within(domain)?;
    let b: Vec<f64> = eq.b().iter().copied().collect();
    let (_, f) = div.dual_pair();
    let expected = expected_pair_loss(&div, labels, preds)?;

    if div.mapping().is_identity() {
        let t_bar = g_mean_label(&div, labels)?.point.into_inner();
        let y = constrained_central_prediction(&div, preds, domain)?;
        let noise = labels.expect_scalar(|t| div.potential(t))? - div.potential(&t_bar)?;
        let variance = linalg::dot(&y.multipliers, &b) + preds.expect_scalar(|p| div.dual_potential(p))?
            - div.dual_potential(&y.point)?;
        let bias = div.gbregman_eval(&t_bar, &y.point)?;
        DecompositionReport::assemble(
            expected,
            noise,
            bias,
            variance,
            t_bar,
            y.point.into_inner(),
            Some(y.multipliers),
            DecompositionMethod::Constrained,
        )
    } else if f.is_identity() {
        let t = constrained_central_label(&div, labels, domain)?;
        let y_bar = f_mean_prediction(&div, preds)?.point.into_inner();
        let noise =
            linalg::dot(&t.multipliers, &b) + labels.expect_scalar(|p| div.potential(p))? - div.potential(&t.point)?;
        let variance = preds.expect_scalar(|p| div.dual_potential(p))? - div.dual_potential(&y_bar)?;
        let bias = div.gbregman_eval(&t.point, &y_bar)?;
        DecompositionReport::assemble(
            expected,
            noise,
            bias,
            variance,
            t.point.into_inner(),
            y_bar,
            Some(t.multipliers),
            DecompositionMethod::Constrained,
        )
    } else {
        let mut report = decompose_generic(&div, labels, preds, domain)?;
        report.warnings.push(format!(
            "{} has neither g nor f equal to the identity; centroids from the brute-force oracle",
            div.name()
        ));
        Ok(report)
    }
}

/// Power-mean centroids for an α-divergence on the simplex, terms by direct
/// evaluation. The gap is generally nonzero.
pub fn decompose_power_mean(
    div: &GBregmanDivergence,
    labels: &WeightedEnsemble,
    preds: &WeightedEnsemble,
    domain: &Domain,
) -> Result<DecompositionReport> {
    let div = div.clone().with_domain(domain.clone())?;
    labels.check_within(domain)?;
    preds.check_within(domain)?;
    let t = power_mean_centroids(&div, labels, Side::SecondArg)?;
    let y = power_mean_centroids(&div, preds, Side::FirstArg)?;
    decompose_with_centroids(&div, labels, preds, &t.point, &y.point, DecompositionMethod::PowerMean)
}

/// Which terms have their arguments interchanged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Swaps {
    /// Use `D(t*, T)` for the noise.
    pub noise: bool,
    /// Use `D(y*, t*)` for the bias.
    pub bias: bool,
    /// Use `D(Y, y*)` for the variance.
    pub variance: bool,
}

impl Swaps {
    pub const NONE: Swaps = Swaps {
        noise: false,
        bias: false,
        variance: false,
    };

    /// All eight combinations, identity first.
    pub fn all() -> Vec<Swaps> {
        (0..8)
            .map(|m| Swaps {
                noise: m & 1 != 0,
                bias: m & 2 != 0,
                variance: m & 4 != 0,
            })
            .collect()
    }
}

/// Additivity gap when some terms are evaluated with swapped arguments, the
/// centroids staying at the closed-form means.
pub fn ordering_violation_gap(
    div: &GBregmanDivergence,
    labels: &WeightedEnsemble,
    preds: &WeightedEnsemble,
    swaps: Swaps,
) -> Result<f64> {
    let t_bar = g_mean_label(div, labels)?.point.into_inner();
    let y_bar = f_mean_prediction(div, preds)?.point.into_inner();
    let d = |a: &[f64], b: &[f64], swap: bool| {
        if swap {
            div.gbregman_eval(b, a)
        } else {
            div.gbregman_eval(a, b)
        }
    };
    let expected = expected_pair_loss(div, labels, preds)?;
    let noise = labels.expect_scalar(|t| d(t, &t_bar, swaps.noise))?;
    let bias = d(&t_bar, &y_bar, swaps.bias)?;
    let variance = preds.expect_scalar(|y| d(&y_bar, y, swaps.variance))?;
    Ok(expected - noise - bias - variance)
}

/// Negative log-likelihood decomposition for an exponential family with
/// log-partition `B`, sufficient statistic `φ(z)` and log base measure
/// `log h(z)`:
///
/// `E[−log p(z; Θ)] = −log p(z; θ*) + (E B(Θ) − B(θ*))` with `θ* = E Θ`.
///
/// The bias may be negative; the variance is nonnegative by convexity of `B`.
pub fn exp_family_loglik_decompose(
    log_partition: &dyn Generator,
    sufficient_stat: &[f64],
    log_base_measure: f64,
    canonical_preds: &WeightedEnsemble,
) -> Result<DecompositionReport> {
    check_dim(sufficient_stat.len(), canonical_preds.dim())?;
    let nll = |theta: &[f64]| -> Result<f64> {
        Ok(-linalg::dot(theta, sufficient_stat) + log_partition.value(theta)? - log_base_measure)
    };
    let theta_star = canonical_preds.expectation(|p| p.to_vec())?;
    let expected = canonical_preds.expect_scalar(|p| nll(p))?;
    let bias = nll(&theta_star)?;
    let variance = canonical_preds.expect_scalar(|p| log_partition.value(p))? - log_partition.value(&theta_star)?;
    DecompositionReport::assemble(
        expected,
        0.0,
        bias,
        variance,
        sufficient_stat.to_vec(),
        theta_star,
        None,
        DecompositionMethod::LogLikelihood,
    )
}

/// Gaussian case of [`exp_family_loglik_decompose`]: observation `z`,
/// predictions given as `(mean, variance)` pairs.
pub fn gaussian_loglik_decompose(z: f64, mean_var_preds: &WeightedEnsemble) -> Result<DecompositionReport> {
    let canonical = WeightedEnsemble::try_map(mean_var_preds, |p| {
        if p.len() != 2 || p[1] <= 0.0 {
            return Err(Error::Boundary {
                context: "gaussian variance".into(),
                index: 1,
                value: *p.get(1).unwrap_or(&f64::NAN),
            });
        }
        Ok(vec![p[0] / p[1], -0.5 / p[1]])
    })?;
    exp_family_loglik_decompose(
        &crate::divergences::generator::GaussianLogPartition,
        &[z, z * z],
        0.0,
        &canonical,
    )
}

/// A stored ensemble pair whose decomposition does not add up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapWitness {
    pub labels: WeightedEnsemble,
    pub preds: WeightedEnsemble,
    pub report: DecompositionReport,
    pub seed: u64,
    pub trial: usize,
}

/// Draws random ensemble pairs from `sample_point` and returns the first with
/// `|gap| > threshold`.
///
/// `decompose` receives each candidate pair; evaluation errors skip the trial.
pub fn search_gap_witness<S, D>(
    seed: u64,
    trials: usize,
    max_support: usize,
    threshold: f64,
    mut sample_point: S,
    mut decompose: D,
) -> Option<GapWitness>
where
    S: FnMut(&mut ChaCha8Rng) -> Vec<f64>,
    D: FnMut(&WeightedEnsemble, &WeightedEnsemble) -> Result<DecompositionReport>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let mut draw = |rng: &mut ChaCha8Rng| -> Option<WeightedEnsemble> {
            let n = rng.gen_range(1..=max_support.max(1));
            let points = (0..n)
                .map(|_| Point::new(sample_point(rng)).ok())
                .collect::<Option<Vec<_>>>()?;
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            WeightedEnsemble::new(points, weights).ok()
        };
        let (Some(labels), Some(preds)) = (draw(&mut rng), draw(&mut rng)) else {
            continue;
        };
        if let Ok(report) = decompose(&labels, &preds) {
            if report.gap.abs() > threshold {
                return Some(GapWitness {
                    labels,
                    preds,
                    report,
                    seed,
                    trial,
                });
            }
        }
    }
    None
}

/// Uniform sampler for a box, rounding to `digits` decimals so witnesses
/// serialize exactly.
pub fn box_sampler(b: SearchBox, digits: i32) -> impl FnMut(&mut ChaCha8Rng) -> Vec<f64> {
    let scale = 10f64.powi(digits);
    move |rng| b.sample(rng).into_iter().map(|v| (v * scale).round() / scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::catalog;
    use crate::loss::Minkowski;
    use approx::assert_abs_diff_eq;

    fn ens(rows: &[&[f64]], w: &[f64]) -> WeightedEnsemble {
        WeightedEnsemble::from_rows(rows, w).unwrap()
    }

    #[test]
    fn generic_squared_error() {
        let e = catalog::sq_euclidean(1);
        let r = decompose_generic(
            &e,
            &ens(&[&[0.0]], &[1.0]),
            &ens(&[&[-1.0], &[1.0]], &[1.0, 1.0]),
            &Domain::unbounded(1),
        )
        .unwrap();
        assert_abs_diff_eq!(r.intrinsic_noise, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.bias, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.variance, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.gap, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn generic_l1_gap() {
        let l1 = Minkowski::new(1.0, Domain::unbounded(1)).unwrap();
        let r = decompose_generic(
            &l1,
            &ens(&[&[0.0]], &[1.0]),
            &ens(&[&[0.0], &[1.0]], &[1.0 / 3.0, 2.0 / 3.0]),
            &Domain::unbounded(1),
        )
        .unwrap();
        assert_abs_diff_eq!(r.expected_loss, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r.central_prediction.coords(), &[1.0]);
        assert_abs_diff_eq!(r.bias, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.variance, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.gap, -2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn point_ensembles_give_zero_terms() {
        let l1 = Minkowski::new(1.0, Domain::unbounded(2)).unwrap();
        let t = ens(&[&[0.3, -1.0]], &[1.0]);
        let r = decompose_generic(&l1, &t, &t, &Domain::unbounded(2)).unwrap();
        assert_eq!(
            (r.expected_loss, r.intrinsic_noise, r.bias, r.variance, r.gap),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
        let k = catalog::kl(2);
        let t = ens(&[&[0.3, 0.6]], &[1.0]);
        let r = decompose_gbregman(&k, &t, &t).unwrap();
        assert_abs_diff_eq!(r.sum_of_terms(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_squared_euclidean() {
        let e = catalog::sq_euclidean(2);
        let r = decompose_gbregman(
            &e,
            &ens(&[&[0.0, 0.0], &[2.0, 2.0]], &[1.0, 1.0]),
            &ens(&[&[1.0, 1.0], &[3.0, 3.0]], &[1.0, 1.0]),
        )
        .unwrap();
        assert_abs_diff_eq!(r.intrinsic_noise, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.bias, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.variance, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.expected_loss, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.gap, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_kl_box() {
        let k = catalog::kl(2);
        let labels = ens(&[&[0.5, 0.5]], &[1.0]);
        let preds = ens(&[&[0.2, 0.8], &[0.8, 0.2]], &[1.0, 1.0]);
        let r = decompose_gbregman(&k, &labels, &preds).unwrap();
        assert_abs_diff_eq!(r.intrinsic_noise, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.bias, catalog::kl_direct(&[0.5, 0.5], &[0.4, 0.4]), epsilon = 1e-12);
        let var = 0.5 * (catalog::kl_direct(&[0.4, 0.4], &[0.2, 0.8]) + catalog::kl_direct(&[0.4, 0.4], &[0.8, 0.2]));
        assert_abs_diff_eq!(r.variance, var, epsilon = 1e-12);
        assert!(r.gap.abs() < 1e-9);
        let g = decompose_generic(&k, &labels, &preds, k.domain()).unwrap();
        assert_abs_diff_eq!(g.bias, r.bias, epsilon = 1e-5);
        assert_abs_diff_eq!(g.variance, r.variance, epsilon = 1e-5);
    }

    #[test]
    fn constrained_kl_simplex() {
        let k = catalog::kl(2);
        let simplex = Domain::simplex(2);
        let r = decompose_constrained_bregman(
            &k,
            &ens(&[&[0.5, 0.5]], &[1.0]),
            &ens(&[&[0.2, 0.8], &[0.8, 0.2]], &[1.0, 1.0]),
            &simplex,
        )
        .unwrap();
        let v = -(0.8f64.ln());
        assert_abs_diff_eq!(r.intrinsic_noise, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.bias, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.variance, v, epsilon = 1e-12);
        assert_abs_diff_eq!(r.expected_loss, v, epsilon = 1e-12);
        assert!(r.gap.abs() < 1e-12);
        assert_abs_diff_eq!(r.multipliers.as_ref().unwrap()[0], v, epsilon = 1e-12);

        let r = decompose_constrained_bregman(&k, &ens(&[&[0.5, 0.5]], &[1.0]), &ens(&[&[0.3, 0.7]], &[1.0]), &simplex)
            .unwrap();
        assert_abs_diff_eq!(r.variance, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.multipliers.unwrap()[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constrained_reverse_kl_mirror() {
        let rk = catalog::reverse_kl(2);
        let r = decompose_constrained_bregman(
            &rk,
            &ens(&[&[0.2, 0.8], &[0.8, 0.2]], &[1.0, 1.0]),
            &ens(&[&[0.5, 0.5]], &[1.0]),
            &Domain::simplex(2),
        )
        .unwrap();
        assert_abs_diff_eq!(r.intrinsic_noise, -(0.8f64.ln()), epsilon = 1e-12);
        assert_abs_diff_eq!(r.bias, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.variance, 0.0, epsilon = 1e-15);
        assert!(r.gap.abs() < 1e-12);
    }

    #[test]
    fn ordering_swaps() {
        let k = catalog::kl(2);
        let labels = ens(&[&[0.3, 0.7]], &[1.0]);
        let preds = ens(&[&[0.2, 0.8], &[0.6, 0.4]], &[1.0, 1.0]);
        let swapped = ordering_violation_gap(
            &k,
            &labels,
            &preds,
            Swaps {
                bias: true,
                ..Swaps::NONE
            },
        )
        .unwrap();
        assert!(swapped.abs() > 1e-6);
        let plain = ordering_violation_gap(&k, &labels, &preds, Swaps::NONE).unwrap();
        assert!(plain.abs() < 1e-9);
        let e = catalog::sq_euclidean(2);
        for s in Swaps::all() {
            assert!(ordering_violation_gap(&e, &labels, &preds, s).unwrap().abs() < 1e-12);
        }
    }

    /// `−log N(z; m, σ)` written out directly.
    fn gaussian_nll(z: f64, m: f64, var: f64) -> f64 {
        0.5 * (2.0 * std::f64::consts::PI * var).ln() + (z - m).powi(2) / (2.0 * var)
    }

    #[test]
    fn gaussian_loglik() {
        let r = gaussian_loglik_decompose(0.0, &ens(&[&[0.0, 1.0]], &[1.0])).unwrap();
        assert_abs_diff_eq!(r.variance, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.bias, 0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-12);

        let preds = ens(&[&[-1.0, 1.0], &[1.0, 1.0]], &[1.0, 1.0]);
        let r = gaussian_loglik_decompose(0.0, &preds).unwrap();
        let expected = 0.5 * (gaussian_nll(0.0, -1.0, 1.0) + gaussian_nll(0.0, 1.0, 1.0));
        assert_abs_diff_eq!(r.expected_loss, expected, epsilon = 1e-12);
        assert!(r.gap.abs() < 1e-9);
        assert!(r.variance > 0.0);

        // Off-centre observation: only canonical averaging makes the terms add up.
        let preds = ens(&[&[-1.0, 0.5], &[2.0, 3.0], &[0.5, 1.0]], &[0.2, 0.3, 0.5]);
        let z = 1.3;
        let r = gaussian_loglik_decompose(z, &preds).unwrap();
        let expected: f64 = [(-1.0, 0.5, 0.2), (2.0, 3.0, 0.3), (0.5, 1.0, 0.5)]
            .iter()
            .map(|(m, v, w)| w * gaussian_nll(z, *m, *v))
            .sum();
        assert_abs_diff_eq!(r.expected_loss, expected, epsilon = 1e-12);
        assert!(r.gap.abs() < 1e-12);
        let theta = r.central_prediction.coords();
        let (m_star, v_star) = (-theta[0] / (2.0 * theta[1]), -0.5 / theta[1]);
        assert_abs_diff_eq!(r.bias, gaussian_nll(z, m_star, v_star), epsilon = 1e-12);

        assert!(gaussian_loglik_decompose(0.0, &ens(&[&[0.0, -1.0]], &[1.0])).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let e = catalog::sq_euclidean(1);
        let r = decompose_gbregman(&e, &ens(&[&[0.0]], &[1.0]), &ens(&[&[-1.0], &[1.0]], &[1.0, 1.0])).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<DecompositionReport>(&s).unwrap(), r);
    }
}
