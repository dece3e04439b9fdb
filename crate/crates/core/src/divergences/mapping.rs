//! Invertible coordinate maps `g` (and the derived moment maps `f`).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::generator::{require_positive, BOUNDARY_MIN};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg;

/// A bijection between the original space and its image.
pub trait Mapping: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn forward(&self, y: &[f64]) -> Result<Vec<f64>>;

    fn inverse(&self, v: &[f64]) -> Result<Vec<f64>>;

    /// `∂ forward_i / ∂ y_j`; the default uses central differences.
    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        fd_jacobian(self, y)
    }

    fn is_identity(&self) -> bool {
        false
    }
}

pub(crate) fn fd_jacobian<M: Mapping + ?Sized>(map: &M, y: &[f64]) -> Result<DMatrix<f64>> {
    let d = y.len();
    let mut jac = DMatrix::zeros(d, d);
    let mut probe = y.to_vec();
    for j in 0..d {
        let h = 1e-6 * (1.0 + y[j].abs());
        probe[j] = y[j] + h;
        let fp = map.forward(&probe)?;
        probe[j] = y[j] - h;
        let fm = map.forward(&probe)?;
        probe[j] = y[j];
        for i in 0..d {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn boundary(context: &str, index: usize, value: f64) -> Error {
    Error::Boundary {
        context: context.to_string(),
        index,
        value,
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Mapping for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(y.to_vec())
    }

    fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(v.to_vec())
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(y.len(), y.len()))
    }

    fn is_identity(&self) -> bool {
        true
    }
}

/// `y ↦ M y` for invertible `M`.
#[derive(Debug, Clone)]
pub struct Linear {
    m: DMatrix<f64>,
    m_inv: DMatrix<f64>,
}

impl Linear {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let m_inv = linalg::inverse(&m)?;
        Ok(Linear { m, m_inv })
    }

    fn apply(a: &DMatrix<f64>, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(a.ncols(), x.len())?;
        Ok((a * DVector::from_column_slice(x)).iter().copied().collect())
    }
}

impl Mapping for Linear {
    fn name(&self) -> String {
        "linear".into()
    }

    fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        Self::apply(&self.m, y)
    }

    fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        Self::apply(&self.m_inv, v)
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.m.ncols(), y.len())?;
        Ok(self.m.clone())
    }
}

/// Componentwise natural logarithm.
#[derive(Debug, Clone, Copy, Default)]
pub struct Log;

impl Mapping for Log {
    fn name(&self) -> String {
        "log".into()
    }

    fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        require_positive("log", y)?;
        Ok(y.iter().map(|x| x.ln()).collect())
    }

    fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        let out: Vec<f64> = v.iter().map(|x| x.exp()).collect();
        check_finite("exp", &out)?;
        Ok(out)
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        require_positive("log jacobian", y)?;
        Ok(DMatrix::from_diagonal(
            &y.iter().map(|x| 1.0 / x).collect::<Vec<_>>().into(),
        ))
    }
}

/// Componentwise `c · y^p` on `y ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ComponentPower {
    coef: f64,
    power: f64,
}

impl ComponentPower {
    pub fn new(coef: f64, power: f64) -> Result<Self> {
        if !(coef > 0.0 && coef.is_finite() && power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "component power needs positive coefficient and exponent, got ({coef}, {power})"
            )));
        }
        Ok(ComponentPower { coef, power })
    }

    pub fn coef(&self) -> f64 {
        self.coef
    }

    pub fn power(&self) -> f64 {
        self.power
    }
}

impl Mapping for ComponentPower {
    fn name(&self) -> String {
        "component_power".into()
    }

    fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        if let Some(i) = y.iter().position(|x| !(*x >= 0.0)) {
            return Err(boundary("component_power", i, y[i]));
        }
        Ok(y.iter().map(|x| self.coef * x.powf(self.power)).collect())
    }

    fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        if let Some(i) = v.iter().position(|x| !(*x >= 0.0)) {
            return Err(boundary("component_power inverse", i, v[i]));
        }
        let out: Vec<f64> = v.iter().map(|x| (x / self.coef).powf(1.0 / self.power)).collect();
        check_finite("component_power inverse", &out)?;
        Ok(out)
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        if self.power < 1.0 {
            require_positive("component_power jacobian", y)?;
        }
        let c = self.coef * self.power;
        Ok(DMatrix::from_diagonal(
            &y.iter()
                .map(|x| c * x.powf(self.power - 1.0))
                .collect::<Vec<_>>()
                .into(),
        ))
    }
}

/// Componentwise `ln(y / (1 − y))` on `(0, 1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Logit;

impl Mapping for Logit {
    fn name(&self) -> String {
        "logit".into()
    }

    fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        if let Some(i) = y.iter().position(|x| !(*x >= BOUNDARY_MIN && 1.0 - x >= BOUNDARY_MIN)) {
            return Err(boundary("logit", i, y[i]));
        }
        Ok(y.iter().map(|x| (x / (1.0 - x)).ln()).collect())
    }

    fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(v.iter()
            .map(|x| {
                if *x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            })
            .collect())
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        self.forward(y)?;
        Ok(DMatrix::from_diagonal(
            &y.iter().map(|x| 1.0 / (x * (1.0 - x))).collect::<Vec<_>>().into(),
        ))
    }
}

fn check_variance(context: &str, y: &[f64]) -> Result<()> {
    check_dim(2, y.len())?;
    if !(y[1] >= BOUNDARY_MIN) {
        return Err(boundary(context, 1, y[1]));
    }
    Ok(())
}

/// Gaussian mean/variance `(m, σ)` to canonical parameters `(m/σ, −1/(2σ))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianNatural;

impl Mapping for GaussianNatural {
    fn name(&self) -> String {
        "gaussian_natural".into()
    }

    fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_variance("gaussian_natural", y)?;
        Ok(vec![y[0] / y[1], -0.5 / y[1]])
    }

    fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(2, v.len())?;
        if !(-v[1] >= BOUNDARY_MIN) {
            return Err(boundary("gaussian_natural inverse", 1, v[1]));
        }
        let var = -0.5 / v[1];
        Ok(vec![v[0] * var, var])
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        check_variance("gaussian_natural jacobian", y)?;
        let (m, s) = (y[0], y[1]);
        Ok(DMatrix::from_row_slice(
            2,
            2,
            &[1.0 / s, -m / (s * s), 0.0, 0.5 / (s * s)],
        ))
    }
}

/// Gaussian mean/variance `(m, σ)` to moments `(m, m² + σ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianMoment;

impl Mapping for GaussianMoment {
    fn name(&self) -> String {
        "gaussian_moment".into()
    }

    fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_variance("gaussian_moment", y)?;
        Ok(vec![y[0], y[0] * y[0] + y[1]])
    }

    fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(2, v.len())?;
        let var = v[1] - v[0] * v[0];
        if !(var >= BOUNDARY_MIN) {
            return Err(boundary("gaussian_moment inverse", 1, v[1]));
        }
        Ok(vec![v[0], var])
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        check_variance("gaussian_moment jacobian", y)?;
        Ok(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0 * y[0], 1.0]))
    }
}

/// `second ∘ first`.
#[derive(Debug, Clone)]
pub struct Composed {
    first: Arc<dyn Mapping>,
    second: Arc<dyn Mapping>,
}

impl Composed {
    pub fn new(first: Arc<dyn Mapping>, second: Arc<dyn Mapping>) -> Self {
        Composed { first, second }
    }
}

impl Mapping for Composed {
    fn name(&self) -> String {
        format!("{}∘{}", self.second.name(), self.first.name())
    }

    fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.second.forward(&self.first.forward(y)?)
    }

    fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.first.inverse(&self.second.inverse(v)?)
    }

    fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let inner = self.first.forward(y)?;
        Ok(self.second.jacobian(&inner)? * self.first.jacobian(y)?)
    }

    fn is_identity(&self) -> bool {
        self.first.is_identity() && self.second.is_identity()
    }
}
