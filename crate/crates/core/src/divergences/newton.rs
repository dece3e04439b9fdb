//! Newton-based duals for generators and mappings that lack closed forms.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::generator::Generator;
use super::mapping::Mapping;
use crate::error::{Error, Result};
use crate::linalg;

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 100;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn residual(gen: &dyn Generator, x: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    let g = gen.gradient(x)?;
    let r: Vec<f64> = g.iter().zip(target).map(|(a, b)| a - b).collect();
    if r.iter().all(|v| v.is_finite()) {
        Ok(r)
    } else {
        Err(Error::NonFinite {
            context: "gradient residual".into(),
            index: 0,
            value: f64::NAN,
        })
    }
}

/// Solves `∇A(x) = target` by damped Newton on `A(x) − targetᵀx`.
///
/// Falls back to bracketing bisection in one dimension.
pub fn invert_gradient(gen: &dyn Generator, target: &[f64]) -> Result<Vec<f64>> {
    let start = gen.interior_point(target.len());
    match damped_newton(gen, target, start.clone()) {
        Ok(x) => Ok(x),
        Err(e) if target.len() == 1 => bisect_gradient(gen, target[0], start[0]).map_err(|_| e),
        Err(e) => Err(e),
    }
}

fn damped_newton(gen: &dyn Generator, target: &[f64], mut x: Vec<f64>) -> Result<Vec<f64>> {
    let tol = NEWTON_TOL * (1.0 + inf_norm(target));
    let objective = |x: &[f64]| -> Result<f64> { Ok(gen.value(x)? - linalg::dot(target, x)) };
    let mut last = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let r = residual(gen, &x, target)?;
        let res = inf_norm(&r);
        last = res;
        if res <= tol {
            return Ok(x);
        }
        let h = gen.hessian(&x)?;
        let step = linalg::solve(&h, &(-DVector::from_vec(r.clone())))?;
        let slope: f64 = r.iter().zip(step.iter()).map(|(a, b)| a * b).sum();
        let phi0 = objective(&x)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if let (Ok(phin), Ok(rn)) = (objective(&xn), residual(gen, &xn, target)) {
                if phin.is_finite() && (phin <= phi0 + 1e-4 * t * slope || inf_norm(&rn) < res) {
                    accepted = Some(xn);
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(xn) => x = xn,
            None => break,
        }
    }
    Err(Error::NoConvergence {
        method: format!("newton inverse of ∇{}", gen.name()),
        iterations: NEWTON_MAX_ITER,
        residual: last,
    })
}

fn bisect_gradient(gen: &dyn Generator, target: f64, start: f64) -> Result<Vec<f64>> {
    let r = |x: f64| -> Option<f64> { gen.gradient(&[x]).ok().map(|g| g[0] - target).filter(|v| v.is_finite()) };
    let fail = |res: f64| Error::NoConvergence {
        method: format!("bisection inverse of ∇{}", gen.name()),
        iterations: 200,
        residual: res,
    };
    let r0 = r(start).ok_or_else(|| fail(f64::NAN))?;
    if r0 == 0.0 {
        return Ok(vec![start]);
    }
    // Walk away from `start` in the direction that changes the residual sign.
    let dir = if r0 < 0.0 { 1.0 } else { -1.0 };
    let (mut near, mut step) = (start, 1.0);
    let mut far = None;
    for _ in 0..400 {
        let cand = near + dir * step;
        match r(cand) {
            None => step *= 0.5,
            Some(v) if v.signum() == r0.signum() => {
                near = cand;
                step *= 2.0;
            }
            Some(_) => {
                far = Some(cand);
                break;
            }
        }
    }
    let far = far.ok_or_else(|| fail(r0.abs()))?;
    let (mut lo, mut hi) = if dir > 0.0 { (near, far) } else { (far, near) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match r(mid) {
            Some(v) if v < 0.0 => lo = mid,
            Some(_) => hi = mid,
            None => return Err(fail(f64::NAN)),
        }
    }
    let x = 0.5 * (lo + hi);
    let res = r(x).ok_or_else(|| fail(f64::NAN))?;
    if res.abs() <= 1e-9 * (1.0 + target.abs()) {
        Ok(vec![x])
    } else {
        Err(fail(res.abs()))
    }
}

/// The convex conjugate `A*(v) = xᵀv − A(x)` with `∇A(x) = v` found numerically.
#[derive(Debug, Clone)]
pub struct NewtonConjugate {
    primal: Arc<dyn Generator>,
}

impl NewtonConjugate {
    pub fn new(primal: Arc<dyn Generator>) -> Self {
        NewtonConjugate { primal }
    }
}

impl Generator for NewtonConjugate {
    fn name(&self) -> String {
        format!("conjugate({})", self.primal.name())
    }

    fn value(&self, v: &[f64]) -> Result<f64> {
        let x = invert_gradient(self.primal.as_ref(), v)?;
        Ok(linalg::dot(&x, v) - self.primal.value(&x)?)
    }

    fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        invert_gradient(self.primal.as_ref(), v)
    }

    fn hessian(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        let x = invert_gradient(self.primal.as_ref(), v)?;
        linalg::inverse(&self.primal.hessian(&x)?)
    }

    fn interior_point(&self, dim: usize) -> Vec<f64> {
        let u = self.primal.interior_point(dim);
        self.primal.gradient(&u).unwrap_or(u)
    }
}

/// `u ↦ ∇A(u)`, inverted numerically.
#[derive(Debug, Clone)]
pub struct GradientMap {
    gen: Arc<dyn Generator>,
}

impl GradientMap {
    pub fn new(gen: Arc<dyn Generator>) -> Self {
        GradientMap { gen }
    }
}

impl Mapping for GradientMap {
    fn name(&self) -> String {
        format!("grad({})", self.gen.name())
    }

    fn forward(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.gen.gradient(u)
    }

    fn inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        invert_gradient(self.gen.as_ref(), v)
    }

    fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.gen.hessian(u)
    }
}

/// Solves `map(y) = target` by damped Newton from `start`.
pub fn newton_inverse(map: &dyn Mapping, target: &[f64], start: &[f64]) -> Result<Vec<f64>> {
    let tol = NEWTON_TOL * (1.0 + inf_norm(target));
    let resid = |y: &[f64]| -> Result<Vec<f64>> {
        let f = map.forward(y)?;
        Ok(f.iter().zip(target).map(|(a, b)| a - b).collect())
    };
    let mut y = start.to_vec();
    let mut r = resid(&y)?;
    for _ in 0..NEWTON_MAX_ITER {
        let res = inf_norm(&r);
        if res <= tol {
            return Ok(y);
        }
        let j = map.jacobian(&y)?;
        let step = j
            .lu()
            .solve(&(-DVector::from_vec(r.clone())))
            .ok_or_else(|| Error::InvalidInput(format!("singular jacobian of {}", map.name())))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let yn: Vec<f64> = y.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if let Ok(rn) = resid(&yn) {
                if inf_norm(&rn) < res {
                    y = yn;
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
    Err(Error::NoConvergence {
        method: format!("newton inverse of {}", map.name()),
        iterations: NEWTON_MAX_ITER,
        residual: inf_norm(&r),
    })
}
