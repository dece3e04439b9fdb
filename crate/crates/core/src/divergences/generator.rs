//! Strictly convex generating functions `A` together with their derivatives.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Smallest coordinate accepted by log/power forms before a boundary error.
pub const BOUNDARY_MIN: f64 = 1e-300;

/// A strictly convex scalar function on (a subset of) ℝ^d.
pub trait Generator: Send + Sync + fmt::Debug {
    /// Stable identifier used when serializing closed-form duals.
    fn name(&self) -> String;

    fn value(&self, u: &[f64]) -> Result<f64>;

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>>;

    /// Hessian; the default uses central differences of the gradient.
    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        fd_hessian(self, u)
    }

    /// A point strictly inside the generator's domain, used to seed solvers.
    fn interior_point(&self, dim: usize) -> Vec<f64>;
}

pub(crate) fn fd_hessian<G: Generator + ?Sized>(gen: &G, u: &[f64]) -> Result<DMatrix<f64>> {
    let d = u.len();
    let mut h = DMatrix::zeros(d, d);
    let mut probe = u.to_vec();
    for j in 0..d {
        let step = 1e-6 * (1.0 + u[j].abs());
        probe[j] = u[j] + step;
        let gp = gen.gradient(&probe)?;
        probe[j] = u[j] - step;
        let gm = gen.gradient(&probe)?;
        probe[j] = u[j];
        for i in 0..d {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

fn boundary(context: &str, index: usize, value: f64) -> Error {
    Error::Boundary {
        context: context.to_string(),
        index,
        value,
    }
}

/// Fails on the first coordinate below [`BOUNDARY_MIN`].
pub(crate) fn require_positive(context: &str, u: &[f64]) -> Result<()> {
    match u.iter().position(|v| !(*v >= BOUNDARY_MIN)) {
        Some(i) => Err(boundary(context, i, u[i])),
        None => Ok(()),
    }
}

fn require_nonnegative(context: &str, u: &[f64]) -> Result<()> {
    match u.iter().position(|v| !(*v >= 0.0)) {
        Some(i) => Err(boundary(context, i, u[i])),
        None => Ok(()),
    }
}

fn finite_or(context: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
            index: 0,
            value: v,
        })
    }
}

/// `uᵀ K u` for symmetric positive definite `K`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    k: DMatrix<f64>,
}

impl Quadratic {
    pub fn new(k: DMatrix<f64>) -> Result<Self> {
        if !linalg::is_positive_definite(&k) {
            return Err(Error::InvalidInput("K must be symmetric positive definite".into()));
        }
        Ok(Quadratic { k })
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }
}

impl Generator for Quadratic {
    fn name(&self) -> String {
        "quadratic".into()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.k.nrows(), u.len())?;
        let d = u.len();
        let mut acc = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.k[(i, j)] * u[j];
            }
            acc += u[i] * row;
        }
        finite_or("quadratic", acc)
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.k.nrows(), u.len())?;
        let d = u.len();
        Ok((0..d)
            .map(|i| 2.0 * (0..d).map(|j| self.k[(i, j)] * u[j]).sum::<f64>())
            .collect())
    }

    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.k.nrows(), u.len())?;
        Ok(&self.k * 2.0)
    }

    fn interior_point(&self, dim: usize) -> Vec<f64> {
        vec![0.0; dim]
    }
}

/// `Σ u_i ln u_i − Σ u_i` on `u ≥ 0`, with `0 ln 0 = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NegEntropy;

impl Generator for NegEntropy {
    fn name(&self) -> String {
        "neg_entropy".into()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        require_nonnegative("neg_entropy", u)?;
        Ok(u.iter().map(|&x| if x == 0.0 { 0.0 } else { x * x.ln() - x }).sum())
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        require_positive("neg_entropy gradient", u)?;
        Ok(u.iter().map(|x| x.ln()).collect())
    }

    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        require_positive("neg_entropy hessian", u)?;
        Ok(DMatrix::from_diagonal(
            &u.iter().map(|x| 1.0 / x).collect::<Vec<_>>().into(),
        ))
    }

    fn interior_point(&self, dim: usize) -> Vec<f64> {
        vec![1.0; dim]
    }
}

/// `Σ exp u_i`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpSum;

impl Generator for ExpSum {
    fn name(&self) -> String {
        "exp_sum".into()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        finite_or("exp_sum", u.iter().map(|x| x.exp()).sum())
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let g: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        crate::error::check_finite("exp_sum gradient", &g)?;
        Ok(g)
    }

    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&self.gradient(u)?.into()))
    }

    fn interior_point(&self, dim: usize) -> Vec<f64> {
        vec![0.0; dim]
    }
}

/// `c Σ u_i^p` on `u ≥ 0` with `c > 0`, `p > 1`.
#[derive(Debug, Clone, Copy)]
pub struct PowerSum {
    scale: f64,
    power: f64,
}

impl PowerSum {
    pub fn new(scale: f64, power: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && power > 1.0 && power.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "power_sum needs scale > 0 and power > 1, got ({scale}, {power})"
            )));
        }
        Ok(PowerSum { scale, power })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn power(&self) -> f64 {
        self.power
    }
}

impl Generator for PowerSum {
    fn name(&self) -> String {
        "power_sum".into()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        require_nonnegative("power_sum", u)?;
        finite_or(
            "power_sum",
            self.scale * u.iter().map(|x| x.powf(self.power)).sum::<f64>(),
        )
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        require_nonnegative("power_sum gradient", u)?;
        Ok(u.iter()
            .map(|x| self.scale * self.power * x.powf(self.power - 1.0))
            .collect())
    }

    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        if self.power < 2.0 {
            require_positive("power_sum hessian", u)?;
        } else {
            require_nonnegative("power_sum hessian", u)?;
        }
        let c = self.scale * self.power * (self.power - 1.0);
        Ok(DMatrix::from_diagonal(
            &u.iter()
                .map(|x| c * x.powf(self.power - 2.0))
                .collect::<Vec<_>>()
                .into(),
        ))
    }

    fn interior_point(&self, dim: usize) -> Vec<f64> {
        vec![1.0; dim]
    }
}

/// `Σ u ln u + (1−u) ln(1−u)` on `[0,1]^d`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BernoulliNegEntropy;

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl Generator for BernoulliNegEntropy {
    fn name(&self) -> String {
        "bernoulli_neg_entropy".into()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        if let Some(i) = u.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(boundary("bernoulli_neg_entropy", i, u[i]));
        }
        Ok(u.iter().map(|&x| xlogx(x) + xlogx(1.0 - x)).sum())
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        if let Some(i) = u.iter().position(|x| !(*x >= BOUNDARY_MIN && 1.0 - x >= BOUNDARY_MIN)) {
            return Err(boundary("bernoulli_neg_entropy gradient", i, u[i]));
        }
        Ok(u.iter().map(|x| (x / (1.0 - x)).ln()).collect())
    }

    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.gradient(u)?;
        Ok(DMatrix::from_diagonal(
            &u.iter().map(|x| 1.0 / (x * (1.0 - x))).collect::<Vec<_>>().into(),
        ))
    }

    fn interior_point(&self, dim: usize) -> Vec<f64> {
        vec![0.5; dim]
    }
}

/// `Σ ln(1 + exp v)`, the conjugate of [`BernoulliNegEntropy`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Softplus;

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl Generator for Softplus {
    fn name(&self) -> String {
        "softplus".into()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        finite_or("softplus", u.iter().map(|v| softplus(*v)).sum())
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(u.iter().map(|v| sigmoid(*v)).collect())
    }

    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(
            &u.iter()
                .map(|v| {
                    let s = sigmoid(*v);
                    s * (1.0 - s)
                })
                .collect::<Vec<_>>()
                .into(),
        ))
    }

    fn interior_point(&self, dim: usize) -> Vec<f64> {
        vec![0.0; dim]
    }
}

/// Log-partition function of the univariate Gaussian in canonical parameters,
/// `A(θ) = −θ₁²/(4θ₂) − ½ ln(−θ₂/π)` on `θ₂ < 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianLogPartition;

impl GaussianLogPartition {
    fn check(context: &str, u: &[f64]) -> Result<()> {
        check_dim(2, u.len())?;
        if !(-u[1] >= BOUNDARY_MIN) {
            return Err(boundary(context, 1, u[1]));
        }
        Ok(())
    }
}

impl Generator for GaussianLogPartition {
    fn name(&self) -> String {
        "gaussian_log_partition".into()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        Self::check("gaussian_log_partition", u)?;
        let (a, b) = (u[0], u[1]);
        finite_or("gaussian_log_partition", -a * a / (4.0 * b) - 0.5 * (-b / PI).ln())
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        Self::check("gaussian_log_partition gradient", u)?;
        let (a, b) = (u[0], u[1]);
        Ok(vec![-a / (2.0 * b), a * a / (4.0 * b * b) - 1.0 / (2.0 * b)])
    }

    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        Self::check("gaussian_log_partition hessian", u)?;
        let (a, b) = (u[0], u[1]);
        let off = a / (2.0 * b * b);
        Ok(DMatrix::from_row_slice(
            2,
            2,
            &[
                -1.0 / (2.0 * b),
                off,
                off,
                -a * a / (2.0 * b * b * b) + 1.0 / (2.0 * b * b),
            ],
        ))
    }

    fn interior_point(&self, _dim: usize) -> Vec<f64> {
        vec![0.0, -0.5]
    }
}

/// Conjugate of [`GaussianLogPartition`] in moment parameters `η = (E z, E z²)`:
/// `B(η) = −½ − ½ ln(2π(η₂ − η₁²))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianNegEntropy;

impl GaussianNegEntropy {
    fn spread(context: &str, u: &[f64]) -> Result<f64> {
        check_dim(2, u.len())?;
        let s = u[1] - u[0] * u[0];
        if !(s >= BOUNDARY_MIN) {
            return Err(boundary(context, 1, u[1]));
        }
        Ok(s)
    }
}

impl Generator for GaussianNegEntropy {
    fn name(&self) -> String {
        "gaussian_neg_entropy".into()
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        let s = Self::spread("gaussian_neg_entropy", u)?;
        finite_or("gaussian_neg_entropy", -0.5 - 0.5 * (2.0 * PI * s).ln())
    }

    fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let s = Self::spread("gaussian_neg_entropy gradient", u)?;
        Ok(vec![u[0] / s, -0.5 / s])
    }

    fn hessian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let s = Self::spread("gaussian_neg_entropy hessian", u)?;
        let s2 = s * s;
        Ok(DMatrix::from_row_slice(
            2,
            2,
            &[(s + 2.0 * u[0] * u[0]) / s2, -u[0] / s2, -u[0] / s2, 0.5 / s2],
        ))
    }

    fn interior_point(&self, _dim: usize) -> Vec<f64> {
        vec![0.0, 1.0]
    }
}
