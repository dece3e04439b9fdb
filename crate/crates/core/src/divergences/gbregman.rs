use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::generator::Generator;
use super::mapping::{Composed, Mapping};
use super::newton::{GradientMap, NewtonConjugate};
use crate::domain::Domain;
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::loss::LossFunction;

/// Values in `[−CLAMP_TOL, 0)` are rounding noise and are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-12;

/// How the dual pair `{B, f}` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualKind {
    ClosedForm,
    Newton,
}

/// Catalog family, kept so that family-specific closed forms can be found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    SqEuclidean,
    Mahalanobis,
    Kl,
    ReverseKl,
    Alpha { alpha: f64 },
    BernoulliKl,
    GaussianCanonical,
    GMahalanobis,
    Custom,
}

/// Serializable description of a divergence's construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceMetadata {
    pub name: String,
    #[serde(flatten)]
    pub family: Family,
    pub reversed: bool,
    pub generator: String,
    pub mapping: String,
    pub dual_generator: String,
    pub dual_mapping: String,
    pub dual: DualKind,
    pub domain: Domain,
}

/// `D(t, y) = (g(y) − g(t))ᵀ ∇A(g(y)) − A(g(y)) + A(g(t))` with its dual pair.
#[derive(Debug, Clone)]
pub struct GBregmanDivergence {
    name: String,
    family: Family,
    reversed: bool,
    gen: Arc<dyn Generator>,
    map: Arc<dyn Mapping>,
    dual_gen: Arc<dyn Generator>,
    dual_map: Arc<dyn Mapping>,
    dual_kind: DualKind,
    domain: Domain,
}

impl GBregmanDivergence {
    /// Builds a divergence whose dual pair is obtained numerically:
    /// `f = ∇A ∘ g` and `B = A*`, both inverted by damped Newton.
    pub fn new(name: impl Into<String>, gen: Arc<dyn Generator>, map: Arc<dyn Mapping>, domain: Domain) -> Self {
        let (dual_gen, dual_map) = newton_dual(&gen, &map);
        GBregmanDivergence {
            name: name.into(),
            family: Family::Custom,
            reversed: false,
            gen,
            map,
            dual_gen,
            dual_map,
            dual_kind: DualKind::Newton,
            domain,
        }
    }

    /// Replaces the numerical dual pair with closed forms.
    pub fn with_closed_form_dual(mut self, dual_gen: Arc<dyn Generator>, dual_map: Arc<dyn Mapping>) -> Self {
        self.dual_gen = dual_gen;
        self.dual_map = dual_map;
        self.dual_kind = DualKind::ClosedForm;
        self
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    /// The same divergence on a different domain (e.g. adding equality rows).
    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        check_dim(self.domain.dim(), domain.dim())?;
        self.domain = domain;
        Ok(self)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn generator(&self) -> &Arc<dyn Generator> {
        &self.gen
    }

    pub fn mapping(&self) -> &Arc<dyn Mapping> {
        &self.map
    }

    pub fn dual_kind(&self) -> DualKind {
        self.dual_kind
    }

    /// The dual pair `{B, f}` with `f(y) = ∇A(g(y))` and `B(f(y)) = g(y)ᵀf(y) − A(g(y))`.
    pub fn dual_pair(&self) -> (Arc<dyn Generator>, Arc<dyn Mapping>) {
        (self.dual_gen.clone(), self.dual_map.clone())
    }

    /// The dual pair recomputed numerically from `{A, g}`, ignoring closed forms.
    pub fn newton_dual_pair(&self) -> (Arc<dyn Generator>, Arc<dyn Mapping>) {
        newton_dual(&self.gen, &self.map)
    }

    /// `D_B^f` with arguments interchanged: `reverse().eval(y, t) == eval(t, y)`.
    pub fn reverse(&self) -> GBregmanDivergence {
        GBregmanDivergence {
            name: self.name.clone(),
            family: self.family.clone(),
            reversed: !self.reversed,
            gen: self.dual_gen.clone(),
            map: self.dual_map.clone(),
            dual_gen: self.gen.clone(),
            dual_map: self.map.clone(),
            dual_kind: self.dual_kind,
            domain: self.domain.clone(),
        }
    }

    pub fn metadata(&self) -> DivergenceMetadata {
        DivergenceMetadata {
            name: self.name.clone(),
            family: self.family.clone(),
            reversed: self.reversed,
            generator: self.gen.name(),
            mapping: self.map.name(),
            dual_generator: self.dual_gen.name(),
            dual_mapping: self.dual_map.name(),
            dual: self.dual_kind,
            domain: self.domain.clone(),
        }
    }

    /// `g(y)`.
    pub fn canonical(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.map.forward(y)
    }

    /// `f(y)`.
    pub fn moment(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.dual_map.forward(y)
    }

    /// `A(g(y))`.
    pub fn potential(&self, y: &[f64]) -> Result<f64> {
        self.gen.value(&self.map.forward(y)?)
    }

    /// `B(f(y))`.
    pub fn dual_potential(&self, y: &[f64]) -> Result<f64> {
        self.dual_gen.value(&self.dual_map.forward(y)?)
    }

    /// Evaluates the defining form after feasibility checks.
    pub fn gbregman_eval(&self, t: &[f64], y: &[f64]) -> Result<f64> {
        self.domain.check_feasible(t)?;
        self.domain.check_feasible(y)?;
        self.raw_eval(t, y)
    }

    /// Evaluates `A(g(t)) − f(y)ᵀg(t) + B(f(y))`.
    pub fn eval_concise(&self, t: &[f64], y: &[f64]) -> Result<f64> {
        self.domain.check_feasible(t)?;
        self.domain.check_feasible(y)?;
        check_dim(t.len(), y.len())?;
        let gt = self.map.forward(t)?;
        let fy = self.dual_map.forward(y)?;
        let value = self.gen.value(&gt)? - linalg::dot(&fy, &gt) + self.dual_gen.value(&fy)?;
        finalize(value)
    }

    fn raw_eval(&self, t: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(t.len(), y.len())?;
        let gt = self.map.forward(t)?;
        let gy = self.map.forward(y)?;
        let grad = self.gen.gradient(&gy)?;
        let cross: f64 = gy.iter().zip(&gt).zip(&grad).map(|((a, b), g)| (a - b) * g).sum();
        finalize(cross - self.gen.value(&gy)? + self.gen.value(&gt)?)
    }

    /// Largest deviation in the duality relations `f(y) = ∇A(g(y))`, `g(y) = ∇B(f(y))`.
    pub fn duality_residual(&self, y: &[f64]) -> Result<f64> {
        let gy = self.map.forward(y)?;
        let fy = self.dual_map.forward(y)?;
        let grad_a = self.gen.gradient(&gy)?;
        let grad_b = self.dual_gen.gradient(&fy)?;
        let scale = |v: &[f64]| 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok((linalg::max_abs_diff(&fy, &grad_a) / scale(&fy)).max(linalg::max_abs_diff(&gy, &grad_b) / scale(&gy)))
    }
}

fn newton_dual(gen: &Arc<dyn Generator>, map: &Arc<dyn Mapping>) -> (Arc<dyn Generator>, Arc<dyn Mapping>) {
    let dual_gen: Arc<dyn Generator> = Arc::new(NewtonConjugate::new(gen.clone()));
    let dual_map: Arc<dyn Mapping> = Arc::new(Composed::new(map.clone(), Arc::new(GradientMap::new(gen.clone()))));
    (dual_gen, dual_map)
}

fn finalize(value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: "divergence value".into(),
            index: 0,
            value,
        });
    }
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP_TOL {
        Ok(0.0)
    } else {
        Err(Error::ConvexityViolation(value))
    }
}

impl LossFunction for GBregmanDivergence {
    fn name(&self) -> String {
        if self.reversed {
            format!("reverse({})", self.name)
        } else {
            self.name.clone()
        }
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn eval_unchecked(&self, t: &[f64], y: &[f64]) -> Result<f64> {
        self.raw_eval(t, y)
    }
}
