//! Named divergences and losses, plus direct closed-form evaluators used as
//! independent cross-checks.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::gbregman::{Family, GBregmanDivergence};
use super::generator::{
    BernoulliNegEntropy, ExpSum, GaussianLogPartition, GaussianNegEntropy, NegEntropy, PowerSum, Quadratic, Softplus,
};
use super::mapping::{
    ComponentPower, Composed, GaussianMoment, GaussianNatural, Identity, Linear, Log, Logit, Mapping,
};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::{LossFunction, Minkowski, ZeroOneGrid};

/// Either a full g-Bregman divergence or a plain loss.
#[derive(Debug, Clone)]
pub enum CatalogEntry {
    Divergence(GBregmanDivergence),
    Loss(Arc<dyn LossFunction>),
}

impl CatalogEntry {
    pub fn as_loss(&self) -> &dyn LossFunction {
        match self {
            CatalogEntry::Divergence(d) => d,
            CatalogEntry::Loss(l) => l.as_ref(),
        }
    }

    pub fn divergence(&self) -> Option<&GBregmanDivergence> {
        match self {
            CatalogEntry::Divergence(d) => Some(d),
            CatalogEntry::Loss(_) => None,
        }
    }

    pub fn into_divergence(self) -> Result<GBregmanDivergence> {
        match self {
            CatalogEntry::Divergence(d) => Ok(d),
            CatalogEntry::Loss(l) => Err(Error::Unsupported(format!(
                "{} is not a g-Bregman divergence",
                l.name()
            ))),
        }
    }
}

/// Coordinate map choice for `g_mahalanobis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GChoice {
    Identity,
    Log,
    Power { exponent: f64 },
}

/// Parameters accepted by [`catalog`]; unused fields are ignored per entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<GChoice>,
}

/// `{"name": ..., "params": {...}, "domain": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceSpec {
    pub name: String,
    #[serde(default)]
    pub params: CatalogParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

impl DivergenceSpec {
    pub fn new(name: impl Into<String>, params: CatalogParams) -> Self {
        DivergenceSpec {
            name: name.into(),
            params,
            domain: None,
        }
    }

    pub fn build(&self) -> Result<CatalogEntry> {
        let entry = catalog(&self.name, &self.params)?;
        match (&self.domain, entry) {
            (None, e) => Ok(e),
            (Some(d), CatalogEntry::Divergence(div)) => Ok(CatalogEntry::Divergence(div.with_domain(d.clone())?)),
            (Some(d), CatalogEntry::Loss(l)) => {
                if l.support_grid().is_some() {
                    return Err(Error::Unsupported(format!("{} has a fixed grid domain", l.name())));
                }
                // Non-grid catalog losses are all Minkowski-type.
                let eps = self.params.epsilon.unwrap_or(1.0);
                Ok(CatalogEntry::Loss(Arc::new(Minkowski::new(eps, d.clone())?)))
            }
        }
    }
}

fn need_dim(params: &CatalogParams, default: usize) -> Result<usize> {
    let d = params.dim.unwrap_or(default);
    if d == 0 {
        return Err(Error::InvalidInput("dim must be at least 1".into()));
    }
    Ok(d)
}

/// Looks up a catalog entry by name.
pub fn catalog(name: &str, params: &CatalogParams) -> Result<CatalogEntry> {
    let div = |d: GBregmanDivergence| Ok(CatalogEntry::Divergence(d));
    match name {
        "sq_euclidean" => div(sq_euclidean(need_dim(params, 1)?)),
        "mahalanobis" => {
            let k = params
                .k
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("mahalanobis requires K".into()))?;
            div(mahalanobis(linalg::matrix_from_rows(k)?)?)
        }
        "kl" => div(kl(need_dim(params, 2)?)),
        "reverse_kl" => div(reverse_kl(need_dim(params, 2)?)),
        "alpha" => {
            let a = params
                .alpha
                .ok_or_else(|| Error::InvalidInput("alpha requires parameter alpha".into()))?;
            div(alpha(need_dim(params, 2)?, a)?)
        }
        "bernoulli_kl" => div(bernoulli_kl(need_dim(params, 1)?)),
        "gaussian_canonical" => {
            if params.dim.is_some_and(|d| d != 2) {
                return Err(Error::InvalidInput("gaussian_canonical is two-dimensional".into()));
            }
            div(gaussian_canonical())
        }
        "g_mahalanobis" => {
            let d = need_dim(params, 1)?;
            let k = match &params.k {
                Some(k) => linalg::matrix_from_rows(k)?,
                None => DMatrix::identity(d, d),
            };
            let g = params.g.clone().unwrap_or(GChoice::Log);
            div(g_mahalanobis(g, k)?)
        }
        "minkowski" => {
            let eps = params
                .epsilon
                .ok_or_else(|| Error::InvalidInput("minkowski requires epsilon".into()))?;
            minkowski(need_dim(params, 1)?, eps)
        }
        "l1" => Ok(CatalogEntry::Loss(Arc::new(Minkowski::new(
            1.0,
            Domain::unbounded(need_dim(params, 1)?),
        )?))),
        "zero_one_grid" => Ok(CatalogEntry::Loss(Arc::new(ZeroOneGrid::new(
            need_dim(params, 1)?,
            params.levels.unwrap_or(3),
        )?))),
        other => Err(Error::InvalidInput(format!("unknown catalog entry '{other}'"))),
    }
}

/// Every g-Bregman catalog entry at a representative parameterization.
pub fn gbregman_entries(dim: usize) -> Vec<GBregmanDivergence> {
    let k = spd_test_matrix(dim);
    let mut out = vec![
        sq_euclidean(dim),
        mahalanobis(k.clone()).expect("test matrix is SPD"),
        kl(dim),
        reverse_kl(dim),
        alpha(dim, 0.3).expect("valid alpha"),
        alpha(dim, 0.5).expect("valid alpha"),
        alpha(dim, 0.7).expect("valid alpha"),
        bernoulli_kl(dim),
        g_mahalanobis(GChoice::Log, k).expect("test matrix is SPD"),
    ];
    if dim == 2 {
        out.push(gaussian_canonical());
    }
    out
}

/// A fixed well-conditioned SPD matrix: `I + 0.3·(ones − I)/d`.
pub fn spd_test_matrix(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { 0.3 / dim as f64 })
}

pub fn sq_euclidean(dim: usize) -> GBregmanDivergence {
    let id = DMatrix::identity(dim, dim);
    GBregmanDivergence::new(
        "sq_euclidean",
        Arc::new(Quadratic::new(id.clone()).expect("identity is SPD")),
        Arc::new(Identity),
        Domain::unbounded(dim),
    )
    .with_closed_form_dual(
        Arc::new(Quadratic::new(&id * 0.25).expect("SPD")),
        Arc::new(Linear::new(&id * 2.0).expect("invertible")),
    )
    .with_family(Family::SqEuclidean)
}

pub fn mahalanobis(k: DMatrix<f64>) -> Result<GBregmanDivergence> {
    let dim = k.nrows();
    let quad = Quadratic::new(k.clone())?;
    let k_inv = linalg::inverse(&k)?;
    let k_inv = (&k_inv + k_inv.transpose()) * 0.125;
    Ok(GBregmanDivergence::new(
        "mahalanobis",
        Arc::new(quad),
        Arc::new(Identity),
        Domain::unbounded(dim),
    )
    .with_closed_form_dual(Arc::new(Quadratic::new(k_inv)?), Arc::new(Linear::new(&k * 2.0)?))
    .with_family(Family::Mahalanobis))
}

/// KL divergence in proper form on the unit cube.
pub fn kl(dim: usize) -> GBregmanDivergence {
    GBregmanDivergence::new("kl", Arc::new(NegEntropy), Arc::new(Identity), Domain::unit_cube(dim))
        .with_closed_form_dual(Arc::new(ExpSum), Arc::new(Log))
        .with_family(Family::Kl)
}

/// Reverse KL divergence in proper form on the unit cube.
pub fn reverse_kl(dim: usize) -> GBregmanDivergence {
    GBregmanDivergence::new("reverse_kl", Arc::new(ExpSum), Arc::new(Log), Domain::unit_cube(dim))
        .with_closed_form_dual(Arc::new(NegEntropy), Arc::new(Identity))
        .with_family(Family::ReverseKl)
}

/// α-divergence for `0 < α < 1`: `g_i(y) = y_i^α/(1−α)`,
/// `A(u) = (1−α)^{(1−α)/α} Σ u_i^{1/α}`.
pub fn alpha(dim: usize, alpha: f64) -> Result<GBregmanDivergence> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let beta = 1.0 - alpha;
    let gen = PowerSum::new(beta.powf(beta / alpha), 1.0 / alpha)?;
    let map = ComponentPower::new(1.0 / beta, alpha)?;
    let dual_gen = PowerSum::new(alpha.powf(alpha / beta), 1.0 / beta)?;
    let dual_map = ComponentPower::new(1.0 / alpha, beta)?;
    Ok(
        GBregmanDivergence::new("alpha", Arc::new(gen), Arc::new(map), Domain::unit_cube(dim))
            .with_closed_form_dual(Arc::new(dual_gen), Arc::new(dual_map))
            .with_family(Family::Alpha { alpha }),
    )
}

/// Sum of binary KL divergences, one per coordinate.
pub fn bernoulli_kl(dim: usize) -> GBregmanDivergence {
    GBregmanDivergence::new(
        "bernoulli_kl",
        Arc::new(BernoulliNegEntropy),
        Arc::new(Identity),
        Domain::unit_cube(dim),
    )
    .with_closed_form_dual(Arc::new(Softplus), Arc::new(Logit))
    .with_family(Family::BernoulliKl)
}

/// Univariate Gaussian in `(mean, variance)` coordinates; `g` maps to the
/// canonical parameters and `A` is the log-partition function.
pub fn gaussian_canonical() -> GBregmanDivergence {
    let domain = Domain::with_bounds(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY; 2]).expect("valid bounds");
    GBregmanDivergence::new(
        "gaussian_canonical",
        Arc::new(GaussianLogPartition),
        Arc::new(GaussianNatural),
        domain,
    )
    .with_closed_form_dual(Arc::new(GaussianNegEntropy), Arc::new(GaussianMoment))
    .with_family(Family::GaussianCanonical)
}

/// Squared Mahalanobis distance after the coordinate map `g`.
pub fn g_mahalanobis(g: GChoice, k: DMatrix<f64>) -> Result<GBregmanDivergence> {
    let dim = k.nrows();
    let (map, domain): (Arc<dyn Mapping>, Domain) = match g {
        GChoice::Identity => (Arc::new(Identity), Domain::unbounded(dim)),
        GChoice::Log => (
            Arc::new(Log),
            Domain::with_bounds(vec![0.0; dim], vec![f64::INFINITY; dim])?,
        ),
        GChoice::Power { exponent } => (
            Arc::new(ComponentPower::new(1.0, exponent)?),
            Domain::with_bounds(vec![0.0; dim], vec![f64::INFINITY; dim])?,
        ),
    };
    let k_inv = linalg::inverse(&k)?;
    let k_inv = (&k_inv + k_inv.transpose()) * 0.125;
    let dual_map = Composed::new(map.clone(), Arc::new(Linear::new(&k * 2.0)?));
    Ok(
        GBregmanDivergence::new("g_mahalanobis", Arc::new(Quadratic::new(k)?), map, domain)
            .with_closed_form_dual(Arc::new(Quadratic::new(k_inv)?), Arc::new(dual_map))
            .with_family(Family::GMahalanobis),
    )
}

/// `Σ|t_i − y_i|^ε`; a g-Bregman divergence only for `ε = 2`.
pub fn minkowski(dim: usize, epsilon: f64) -> Result<CatalogEntry> {
    if epsilon == 2.0 {
        return Ok(CatalogEntry::Divergence(sq_euclidean(dim)));
    }
    Ok(CatalogEntry::Loss(Arc::new(Minkowski::new(
        epsilon,
        Domain::unbounded(dim),
    )?)))
}

fn xlogx_over(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * (a / b).ln()
    }
}

/// `Σ t log(t/y) + Σ y − Σ t`, evaluated directly.
pub fn kl_direct(t: &[f64], y: &[f64]) -> f64 {
    t.iter().zip(y).map(|(a, b)| xlogx_over(*a, *b) + b - a).sum()
}

/// `Σ y log(y/t) + Σ t − Σ y`, evaluated directly.
pub fn reverse_kl_direct(t: &[f64], y: &[f64]) -> f64 {
    kl_direct(y, t)
}

/// `−Σ t^α y^{1−α}/(α(1−α)) + Σ t/(1−α) + Σ y/α`, evaluated directly.
pub fn alpha_direct(alpha: f64, t: &[f64], y: &[f64]) -> f64 {
    let beta = 1.0 - alpha;
    t.iter()
        .zip(y)
        .map(|(a, b)| -a.powf(alpha) * b.powf(beta) / (alpha * beta) + a / beta + b / alpha)
        .sum()
}

/// KL between Gaussians, in canonical parameters `t = (m/σ, −1/(2σ))`.
pub fn gaussian_kl_canonical(t: &[f64], y: &[f64]) -> f64 {
    let (t1, t2, y1, y2) = (t[0], t[1], y[0], y[1]);
    -0.5 + y1 * t1 / (2.0 * y2) - y1 * y1 * t2 / (4.0 * y2 * y2) + t2 / (2.0 * y2)
        - t1 * t1 / (4.0 * t2)
        - 0.5 * (t2 / y2).ln()
}

/// The same divergence in mean/variance coordinates `(m, σ)`.
pub fn gaussian_kl_mean_var(t: &[f64], y: &[f64]) -> f64 {
    let (mt, st, my, sy) = (t[0], t[1], y[0], y[1]);
    (my - mt).powi(2) / (2.0 * st) - 0.5 * (1.0 - sy / st + (sy / st).ln())
}
