//! Feasible sets: per-coordinate bounds intersected with linear equalities.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Absolute ∞-norm tolerance for feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Linear equality constraints `W y = b` with `W` of full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityConstraints {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

impl EqualityConstraints {
    pub fn new(w: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if w.nrows() != b.len() {
            return Err(Error::InvalidInput(format!(
                "W has {} rows but b has {} entries",
                w.nrows(),
                b.len()
            )));
        }
        if w.nrows() > w.ncols() {
            return Err(Error::InvalidInput("more equality rows than dimensions".into()));
        }
        if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite equality constraint".into()));
        }
        if linalg::numerical_rank(&w, linalg::RANK_TOL) != w.nrows() {
            return Err(Error::InvalidInput("W must have full row rank".into()));
        }
        Ok(EqualityConstraints { w, b })
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Number of constraints κ.
    pub fn count(&self) -> usize {
        self.w.nrows()
    }

    pub fn residual(&self, y: &[f64]) -> DVector<f64> {
        &self.w * DVector::from_column_slice(y) - &self.b
    }
}

/// A box (bounds may be infinite) optionally intersected with `W y = b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub struct Domain {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    eq: Option<EqualityConstraints>,
}

#[derive(Serialize, Deserialize)]
struct RawEquality {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDomain {
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eq: Option<RawEquality>,
}

impl TryFrom<RawDomain> for Domain {
    type Error = Error;

    fn try_from(raw: RawDomain) -> Result<Self> {
        let unpack = |v: Option<Vec<Option<f64>>>, fill: f64| -> Result<Vec<f64>> {
            match v {
                None => Ok(vec![fill; raw.dim]),
                Some(v) if v.len() != raw.dim => Err(Error::DimensionMismatch {
                    expected: raw.dim,
                    got: v.len(),
                }),
                Some(v) => Ok(v.into_iter().map(|x| x.unwrap_or(fill)).collect()),
            }
        };
        let lower = unpack(raw.lower, f64::NEG_INFINITY)?;
        let upper = unpack(raw.upper, f64::INFINITY)?;
        let mut domain = Domain::with_bounds(lower, upper)?;
        if let Some(eq) = raw.eq {
            let w = linalg::matrix_from_rows(&eq.w)?;
            domain = domain.with_equality(w, DVector::from_vec(eq.b))?;
        }
        Ok(domain)
    }
}

impl From<Domain> for RawDomain {
    fn from(d: Domain) -> Self {
        let pack = |v: &[f64]| -> Option<Vec<Option<f64>>> {
            if v.iter().all(|x| !x.is_finite()) {
                None
            } else {
                Some(v.iter().map(|x| x.is_finite().then_some(*x)).collect())
            }
        };
        RawDomain {
            dim: d.dim,
            lower: pack(&d.lower),
            upper: pack(&d.upper),
            eq: d.eq.as_ref().map(|e| RawEquality {
                w: linalg::matrix_to_rows(&e.w),
                b: e.b.iter().copied().collect(),
            }),
        }
    }
}

impl Domain {
    /// All of ℝ^d.
    pub fn unbounded(dim: usize) -> Self {
        Domain {
            dim,
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            eq: None,
        }
    }

    pub fn with_bounds(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidInput("domain dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidInput(format!("invalid bounds on coordinate {i}")));
            }
        }
        Ok(Domain {
            dim: lower.len(),
            lower,
            upper,
            eq: None,
        })
    }

    /// The unit cube `[0,1]^d`.
    pub fn unit_cube(dim: usize) -> Self {
        Domain {
            dim,
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
            eq: None,
        }
    }

    /// The probability simplex: `[0,1]^d` with one row of ones summing to one.
    pub fn simplex(dim: usize) -> Self {
        Domain::unit_cube(dim)
            .with_equality(DMatrix::from_element(1, dim, 1.0), DVector::from_element(1, 1.0))
            .expect("a row of ones has full rank")
    }

    pub fn with_equality(mut self, w: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if w.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: w.ncols(),
            });
        }
        self.eq = Some(EqualityConstraints::new(w, b)?);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn equality(&self) -> Option<&EqualityConstraints> {
        self.eq.as_ref()
    }

    pub fn has_equality(&self) -> bool {
        self.eq.is_some()
    }

    /// The same domain with its equality constraints dropped.
    pub fn relaxed(&self) -> Domain {
        Domain {
            eq: None,
            ..self.clone()
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    pub fn check_feasible(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "point".into(),
                    index: i,
                    value: *v,
                });
            }
            if *v < self.lower[i] - FEASIBILITY_TOL || *v > self.upper[i] + FEASIBILITY_TOL {
                return Err(Error::Infeasible {
                    point: y.to_vec(),
                    reason: format!("coordinate {i} = {v} outside [{}, {}]", self.lower[i], self.upper[i]),
                });
            }
        }
        if let Some(eq) = &self.eq {
            let r = eq.residual(y).amax();
            if r > FEASIBILITY_TOL {
                return Err(Error::Infeasible {
                    point: y.to_vec(),
                    reason: format!("equality residual {r:e}"),
                });
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, y: &[f64]) -> bool {
        self.check_feasible(y).is_ok()
    }

    /// The bounding box, failing on the first infinite bound.
    pub fn search_box(&self) -> Result<SearchBox> {
        if let Some(i) = (0..self.dim).find(|&i| !self.lower[i].is_finite() || !self.upper[i].is_finite()) {
            return Err(Error::UnboundedDomain(i));
        }
        SearchBox::new(self.lower.clone(), self.upper.clone())
    }

    /// Affine parameterization `y = origin + basis · z` of the equality set.
    pub fn affine_parameterization(&self) -> Result<AffineParam> {
        match &self.eq {
            None => Ok(AffineParam {
                origin: DVector::zeros(self.dim),
                basis: DMatrix::identity(self.dim, self.dim),
            }),
            Some(eq) => Ok(AffineParam {
                origin: linalg::min_norm_solution(&eq.w, &eq.b)?,
                basis: linalg::null_space(&eq.w),
            }),
        }
    }
}

/// `y = origin + basis · z` with orthonormal basis columns.
#[derive(Debug, Clone)]
pub struct AffineParam {
    pub origin: DVector<f64>,
    pub basis: DMatrix<f64>,
}

impl AffineParam {
    pub fn free_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn to_point(&self, z: &[f64]) -> Vec<f64> {
        (&self.origin + &self.basis * DVector::from_column_slice(z))
            .iter()
            .copied()
            .collect()
    }

    pub fn to_coords(&self, y: &[f64]) -> Vec<f64> {
        (self.basis.transpose() * (DVector::from_column_slice(y) - &self.origin))
            .iter()
            .copied()
            .collect()
    }
}

/// A finite axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidInput("search box bounds mismatch".into()));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !l.is_finite() || !u.is_finite() || l > u)
        {
            return Err(Error::InvalidInput("search box must be finite and ordered".into()));
        }
        Ok(SearchBox { lower, upper })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        SearchBox {
            lower: vec![lo; dim],
            upper: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Shrinks every side towards the centre by `fraction` of its width.
    pub fn shrink(&self, fraction: f64) -> Self {
        let (lower, upper) = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| {
                let pad = fraction * (u - l);
                (l + pad, u - pad)
            })
            .unzip();
        SearchBox { lower, upper }
    }

    /// Bounding box of `domain`, with infinite bounds replaced by `fallback`.
    pub fn from_domain(domain: &Domain, fallback: (f64, f64)) -> Self {
        let (lower, upper) = domain
            .lower()
            .iter()
            .zip(domain.upper())
            .map(|(l, u)| match (l.is_finite(), u.is_finite()) {
                (true, true) => (*l, *u),
                (true, false) => (*l, l + (fallback.1 - fallback.0)),
                (false, true) => (u - (fallback.1 - fallback.0), *u),
                (false, false) => fallback,
            })
            .unzip();
        SearchBox { lower, upper }
    }

    /// Uniform sample from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| if u > l { rng.gen_range(*l..*u) } else { *l })
            .collect()
    }
}
