//! Points and finite weighted ensembles.
//!
//! A [`WeightedEnsemble`] is the only kind of distribution this crate knows
//! about: a finite set of support points with normalized weights. Label
//! distributions and prediction distributions are both ensembles, and every
//! expectation is an exact weighted sum over the support.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{check_finite, Error, Result};

/// Tolerance on the sum of normalized weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A point in d-dimensional space with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("point must have at least one coordinate".into()));
        }
        check_finite("point", &coords)?;
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// A finite discrete distribution: support points with weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble", into = "RawEnsemble")]
pub struct WeightedEnsemble {
    points: Vec<Point>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawEnsemble {
    points: Vec<Vec<f64>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

impl TryFrom<RawEnsemble> for WeightedEnsemble {
    type Error = Error;

    fn try_from(raw: RawEnsemble) -> Result<Self> {
        let n = raw.points.len();
        let points = raw.points.into_iter().map(Point::new).collect::<Result<Vec<_>>>()?;
        let weights = raw.weights.unwrap_or_else(|| vec![1.0; n]);
        make_ensemble(points, weights)
    }
}

impl From<WeightedEnsemble> for RawEnsemble {
    fn from(e: WeightedEnsemble) -> Self {
        RawEnsemble {
            points: e.points.into_iter().map(Point::into_inner).collect(),
            weights: Some(e.weights),
        }
    }
}

/// Builds an ensemble, renormalizing the weights to sum to one.
pub fn make_ensemble(points: Vec<Point>, weights: Vec<f64>) -> Result<WeightedEnsemble> {
    if points.is_empty() {
        return Err(Error::InvalidInput("ensemble needs at least one point".into()));
    }
    if points.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    let d = points[0].dim();
    for p in &points {
        if p.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.dim(),
            });
        }
    }
    check_finite("weights", &weights)?;
    if let Some(i) = weights.iter().position(|w| *w < 0.0) {
        return Err(Error::InvalidInput(format!("weight {i} is negative ({})", weights[i])));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("all weights are zero".into()));
    }
    // Weights already summing to one are kept verbatim so that serialized
    // ensembles re-parse to identical values.
    let weights = if (total - 1.0).abs() <= WEIGHT_SUM_TOL {
        weights
    } else {
        weights.iter().map(|w| w / total).collect()
    };
    Ok(WeightedEnsemble { points, weights })
}

impl WeightedEnsemble {
    /// See [`make_ensemble`].
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        make_ensemble(points, weights)
    }

    /// Applies `f` to every support point, keeping the weights.
    pub fn try_map<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&Point) -> Result<Vec<f64>>,
    {
        let points = self
            .points
            .iter()
            .map(|p| Point::new(f(p)?))
            .collect::<Result<Vec<_>>>()?;
        make_ensemble(points, self.weights.clone())
    }

    /// Equal weights on every point.
    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        make_ensemble(points, vec![1.0; n])
    }

    /// Convenience constructor from raw coordinate rows.
    pub fn from_rows(rows: &[&[f64]], weights: &[f64]) -> Result<Self> {
        let points = rows
            .iter()
            .map(|r| Point::new(r.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        make_ensemble(points, weights.to_vec())
    }

    /// A single point with weight one.
    pub fn singleton(point: Point) -> Self {
        WeightedEnsemble {
            points: vec![point],
            weights: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Checks every support point against `domain`.
    pub fn check_within(&self, domain: &Domain) -> Result<()> {
        self.points.iter().try_for_each(|p| domain.check_feasible(p))
    }

    /// `Σ_k w_k f(p_k)` for an infallible vector-valued `f`.
    pub fn expectation<F>(&self, mut f: F) -> Result<Vec<f64>>
    where
        F: FnMut(&Point) -> Vec<f64>,
    {
        self.try_expectation(|p| Ok(f(p)))
    }

    /// `Σ_k w_k f(p_k)` for a fallible vector-valued `f`.
    ///
    /// Summation runs in support order so results are bit-reproducible.
    pub fn try_expectation<F>(&self, mut f: F) -> Result<Vec<f64>>
    where
        F: FnMut(&Point) -> Result<Vec<f64>>,
    {
        let mut acc: Option<Vec<f64>> = None;
        for (p, w) in self.iter() {
            let v = f(p)?;
            check_finite("expectation integrand", &v)?;
            match acc.as_mut() {
                None => acc = Some(v.iter().map(|x| w * x).collect()),
                Some(a) => {
                    if a.len() != v.len() {
                        return Err(Error::DimensionMismatch {
                            expected: a.len(),
                            got: v.len(),
                        });
                    }
                    for (ai, vi) in a.iter_mut().zip(&v) {
                        *ai += w * vi;
                    }
                }
            }
        }
        Ok(acc.expect("ensemble is never empty"))
    }

    /// Scalar expectation of a fallible function.
    pub fn expect_scalar<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(&Point) -> Result<f64>,
    {
        let mut acc = 0.0;
        for (p, w) in self.iter() {
            let v = f(p)?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "expectation integrand".into(),
                    index: 0,
                    value: v,
                });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Support points that are pairwise distinct (first occurrence kept).
    pub fn distinct_points(&self) -> Vec<&Point> {
        let mut out: Vec<&Point> = Vec::new();
        for p in &self.points {
            if !out.iter().any(|q| q.coords() == p.coords()) {
                out.push(p);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pts(rows: &[&[f64]]) -> Vec<Point> {
        rows.iter().map(|r| Point::new(r.to_vec()).unwrap()).collect()
    }

    #[test]
    fn normalizes_weights() {
        let e = make_ensemble(pts(&[&[0.0], &[2.0]]), vec![1.0, 1.0]).unwrap();
        assert_eq!(e.weights(), &[0.5, 0.5]);

        let e = make_ensemble(pts(&[&[0.2, 0.8]]), vec![3.0]).unwrap();
        assert_eq!(e.weights(), &[1.0]);

        let e = make_ensemble(pts(&[&[0.0], &[1.0], &[1.0]]), vec![1.0; 3]).unwrap();
        for w in e.weights() {
            assert_relative_eq!(*w, 1.0 / 3.0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            make_ensemble(pts(&[&[0.0], &[1.0, 2.0]]), vec![1.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(make_ensemble(pts(&[&[0.0]]), vec![0.0]).is_err());
        assert!(make_ensemble(pts(&[&[0.0]]), vec![f64::NAN]).is_err());
        assert!(make_ensemble(pts(&[&[0.0]]), vec![-1.0]).is_err());
        assert!(make_ensemble(pts(&[&[0.0]]), vec![1.0, 1.0]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(Point::new(vec![]).is_err());
    }

    #[test]
    fn expectation_examples() {
        let e = WeightedEnsemble::from_rows(&[&[0.0], &[2.0]], &[1.0, 1.0]).unwrap();
        assert_eq!(e.expectation(|p| p.to_vec()).unwrap(), vec![1.0]);

        let e = WeightedEnsemble::from_rows(&[&[0.2, 0.8]], &[1.0]).unwrap();
        let v = e.expectation(|p| p.iter().map(|x| x.ln()).collect()).unwrap();
        assert_eq!(v, vec![0.2f64.ln(), 0.8f64.ln()]);

        let e = WeightedEnsemble::from_rows(&[&[1.0], &[4.0]], &[1.0, 2.0]).unwrap();
        let v = e.expectation(|p| vec![p[0] * p[0]]).unwrap();
        assert_relative_eq!(v[0], 11.0, epsilon = 1e-12);
    }

    #[test]
    fn expectation_rejects_non_finite() {
        let e = WeightedEnsemble::from_rows(&[&[0.0], &[1.0]], &[1.0, 1.0]).unwrap();
        assert!(matches!(
            e.expectation(|p| vec![p[0].ln()]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn json_schema_round_trip() {
        let e: WeightedEnsemble = serde_json::from_str(r#"{"points": [[0.0], [2.0]], "weights": [1, 3]}"#).unwrap();
        assert_eq!(e.weights(), &[0.25, 0.75]);
        let s = serde_json::to_string(&e).unwrap();
        let back: WeightedEnsemble = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        assert!(serde_json::from_str::<WeightedEnsemble>(r#"{"points": [], "weights": []}"#).is_err());
    }

    proptest! {
        #[test]
        fn expectation_is_linear(
            rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..8),
            raw_w in prop::collection::vec(0.01f64..1.0, 8),
            a in -3.0f64..3.0,
        ) {
            let n = rows.len();
            let points = rows.into_iter().map(|r| Point::new(r).unwrap()).collect();
            let e = make_ensemble(points, raw_w[..n].to_vec()).unwrap();
            let sum: f64 = e.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
            let f = |p: &Point| vec![p[0] * p[1], p[0].sin()];
            let g = |p: &Point| vec![p[1], p[0] * p[0]];
            let lhs = e.expectation(|p| {
                f(p).iter().zip(g(p)).map(|(x, y)| a * x + y).collect()
            }).unwrap();
            let ef = e.expectation(f).unwrap();
            let eg = e.expectation(g).unwrap();
            for i in 0..2 {
                prop_assert!((lhs[i] - (a * ef[i] + eg[i])).abs() <= 1e-12 * (1.0 + lhs[i].abs()));
            }
        }
    }
}
