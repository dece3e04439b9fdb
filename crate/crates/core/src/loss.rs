//! The black-box loss interface and the non-Bregman losses used as counterexamples.

use std::fmt;
use std::sync::Arc;

use crate::domain::Domain;
use crate::error::{check_dim, Error, Result};

/// A loss `L(t, y)` between a label `t` and a prediction `y` on a common domain.
///
/// Implementations must be nonnegative and vanish exactly on the diagonal.
pub trait LossFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn domain(&self) -> &Domain;

    fn dim(&self) -> usize {
        self.domain().dim()
    }

    /// Evaluates the loss without checking the domain (bounds or equalities).
    fn eval_unchecked(&self, t: &[f64], y: &[f64]) -> Result<f64>;

    /// Evaluates the loss after checking that both arguments are feasible.
    fn eval(&self, t: &[f64], y: &[f64]) -> Result<f64> {
        let domain = self.domain();
        domain.check_feasible(t)?;
        domain.check_feasible(y)?;
        self.eval_unchecked(t, y)
    }

    /// Candidate set for losses defined on a finite grid.
    fn support_grid(&self) -> Option<Vec<Vec<f64>>> {
        None
    }

    /// Whether finite-difference derivatives are meaningful away from a null set.
    fn is_smooth(&self) -> bool {
        true
    }
}

/// `Σ_i |t_i − y_i|^ε`; `ε = 1` is the L1 loss.
#[derive(Debug, Clone)]
pub struct Minkowski {
    epsilon: f64,
    domain: Domain,
}

impl Minkowski {
    pub fn new(epsilon: f64, domain: Domain) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 2.0) {
            return Err(Error::InvalidInput(format!(
                "minkowski exponent must lie in (0, 2], got {epsilon}"
            )));
        }
        Ok(Minkowski { epsilon, domain })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl LossFunction for Minkowski {
    fn name(&self) -> String {
        if self.epsilon == 1.0 {
            "l1".into()
        } else {
            format!("minkowski({})", self.epsilon)
        }
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn eval_unchecked(&self, t: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(t.len(), y.len())?;
        Ok(t.iter().zip(y).map(|(a, b)| (a - b).abs().powf(self.epsilon)).sum())
    }
}

/// Zero-one loss on the integer grid `{0, …, levels−1}^d`.
#[derive(Debug, Clone)]
pub struct ZeroOneGrid {
    levels: usize,
    domain: Domain,
}

impl ZeroOneGrid {
    pub fn new(dim: usize, levels: usize) -> Result<Self> {
        if levels < 2 || dim == 0 {
            return Err(Error::InvalidInput("zero_one_grid needs dim ≥ 1 and ≥ 2 levels".into()));
        }
        let domain = Domain::with_bounds(vec![0.0; dim], vec![(levels - 1) as f64; dim])?;
        Ok(ZeroOneGrid { levels, domain })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    fn check_on_grid(&self, v: &[f64]) -> Result<()> {
        if let Some(i) = v.iter().position(|x| x.fract() != 0.0) {
            return Err(Error::Infeasible {
                point: v.to_vec(),
                reason: format!("coordinate {i} is not a grid level"),
            });
        }
        Ok(())
    }
}

impl LossFunction for ZeroOneGrid {
    fn name(&self) -> String {
        "zero_one_grid".into()
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn eval_unchecked(&self, t: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(t.len(), y.len())?;
        self.check_on_grid(t)?;
        self.check_on_grid(y)?;
        Ok(if t == y { 0.0 } else { 1.0 })
    }

    fn support_grid(&self) -> Option<Vec<Vec<f64>>> {
        let d = self.domain.dim();
        let total = self.levels.pow(d as u32);
        Some(
            (0..total)
                .map(|mut k| {
                    let mut p = vec![0.0; d];
                    for c in (0..d).rev() {
                        p[c] = (k % self.levels) as f64;
                        k /= self.levels;
                    }
                    p
                })
                .collect(),
        )
    }

    fn is_smooth(&self) -> bool {
        false
    }
}

type LossFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A user-supplied loss from a closure.
#[derive(Clone)]
pub struct FnLoss {
    name: String,
    domain: Domain,
    f: Arc<LossFn>,
}

impl FnLoss {
    pub fn new<F>(name: impl Into<String>, domain: Domain, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        FnLoss {
            name: name.into(),
            domain,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnLoss").field("name", &self.name).finish()
    }
}

impl LossFunction for FnLoss {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn eval_unchecked(&self, t: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(t.len(), y.len())?;
        let v = (self.f)(t, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                context: self.name.clone(),
                index: 0,
                value: v,
            })
        }
    }
}

/// Samples nonnegativity and the identity of indiscernibles on `points`.
///
/// Returns the first violating pair as an error.
pub fn check_loss_axioms(loss: &dyn LossFunction, points: &[Vec<f64>], tol: f64) -> Result<()> {
    for t in points {
        let diag = loss.eval(t, t)?;
        if diag.abs() > tol {
            return Err(Error::InvalidInput(format!(
                "{}: L(t, t) = {diag:e} at t = {t:?}",
                loss.name()
            )));
        }
        for y in points {
            let v = loss.eval(t, y)?;
            if v < -tol {
                return Err(Error::InvalidInput(format!(
                    "{}: negative loss {v:e} at t = {t:?}, y = {y:?}",
                    loss.name()
                )));
            }
            if t != y && v == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{}: zero loss off the diagonal at t = {t:?}, y = {y:?}",
                    loss.name()
                )));
            }
        }
    }
    Ok(())
}
