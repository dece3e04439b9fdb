use rayon::prelude::*;

use super::{expected_loss, CentroidMethod, CentroidResult, Side};
use crate::domain::{AffineParam, Domain, SearchBox};
use crate::ensemble::{Point, WeightedEnsemble};
use crate::error::{check_dim, Error, Result};
use crate::loss::LossFunction;
use crate::optimize::{nelder_mead, NelderMeadOptions};

/// Settings for the grid-plus-Nelder-Mead oracle.
#[derive(Debug, Clone)]
pub struct BruteForceOptions {
    /// Grid points per free dimension.
    pub grid: usize,
    /// Number of Nelder-Mead starts taken from the best separated grid points.
    pub restarts: usize,
    /// Search box for unbounded domains (and to narrow bounded ones).
    pub search_box: Option<SearchBox>,
    /// Objective slack within which candidates count as tied.
    pub tie_tol: f64,
    /// Tied candidates farther apart than this make the minimizer non-unique.
    pub distinct_tol: f64,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions {
            grid: 41,
            restarts: 5,
            search_box: None,
            tie_tol: 1e-9,
            distinct_tol: 1e-4,
        }
    }
}

impl BruteForceOptions {
    pub fn with_search_box(mut self, b: SearchBox) -> Self {
        self.search_box = Some(b);
        self
    }
}

/// Box used when a domain is unbounded: the domain bounds where finite,
/// otherwise the hull of the ensembles padded by `max(range, 1)`.
pub fn default_search_box(domain: &Domain, ensembles: &[&WeightedEnsemble]) -> SearchBox {
    let d = domain.dim();
    let (lower, upper) = (0..d)
        .map(|i| {
            let vals = ensembles.iter().flat_map(|e| e.points().iter().map(move |p| p[i]));
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
            let pad = (hi - lo).max(1.0);
            let l = if domain.lower()[i].is_finite() {
                domain.lower()[i]
            } else {
                lo - pad
            };
            let u = if domain.upper()[i].is_finite() {
                domain.upper()[i]
            } else {
                hi + pad
            };
            (l, u)
        })
        .unzip();
    SearchBox { lower, upper }
}

/// Minimizes the expected loss over one argument with the default options.
pub fn brute_force_centroid(
    loss: &dyn LossFunction,
    ens: &WeightedEnsemble,
    side: Side,
    domain: &Domain,
) -> Result<CentroidResult> {
    brute_force_centroid_with(loss, ens, side, domain, &BruteForceOptions::default())
}

struct Candidate {
    y: Vec<f64>,
    value: f64,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn by_value_then_lex(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    a.value.total_cmp(&b.value).then_with(|| lex_cmp(&a.y, &b.y))
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Bounding box of the free coordinates `z` when `y = origin + basis·z` ranges over `y_box`.
fn coordinate_box(param: &AffineParam, y_box: &SearchBox) -> SearchBox {
    let k = param.free_dim();
    let (lower, upper) = (0..k)
        .map(|c| {
            let mut lo = 0.0;
            let mut hi = 0.0;
            for j in 0..y_box.dim() {
                let bj = param.basis[(j, c)];
                let a = bj * (y_box.lower[j] - param.origin[j]);
                let b = bj * (y_box.upper[j] - param.origin[j]);
                lo += a.min(b);
                hi += a.max(b);
            }
            (lo, hi)
        })
        .unzip();
    SearchBox { lower, upper }
}

fn grid_point(z_box: &SearchBox, n: usize, mut idx: usize) -> Vec<f64> {
    (0..z_box.dim())
        .map(|c| {
            let k = idx % n;
            idx /= n;
            let (l, u) = (z_box.lower[c], z_box.upper[c]);
            if n == 1 {
                0.5 * (l + u)
            } else {
                l + (u - l) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Grid search over the search box followed by multi-start Nelder-Mead.
///
/// Equality constraints are eliminated through an affine parameterization of
/// their solution set; infeasible points score `+∞`. Losses with a finite
/// support grid are enumerated instead. Among candidates within `tie_tol` of
/// the best value, if any lies more than `distinct_tol` from the best point
/// the lexicographically smallest is returned and `non_unique` is set.
pub fn brute_force_centroid_with(
    loss: &dyn LossFunction,
    ens: &WeightedEnsemble,
    side: Side,
    domain: &Domain,
    opts: &BruteForceOptions,
) -> Result<CentroidResult> {
    check_dim(domain.dim(), ens.dim())?;
    if opts.grid == 0 {
        return Err(Error::InvalidInput("grid resolution must be positive".into()));
    }
    let objective = |y: &[f64]| -> f64 {
        if !domain.is_feasible(y) {
            return f64::INFINITY;
        }
        expected_loss(loss, ens, side, y).unwrap_or(f64::INFINITY)
    };

    let candidates: Vec<Candidate> = if let Some(points) = loss.support_grid() {
        points
            .par_iter()
            .map(|y| Candidate {
                y: y.clone(),
                value: objective(y),
            })
            .collect()
    } else {
        let y_box = match &opts.search_box {
            Some(b) => {
                check_dim(domain.dim(), b.dim())?;
                b.clone()
            }
            None => domain.search_box()?,
        };
        let param = domain.affine_parameterization()?;
        let k = param.free_dim();
        let z_box = coordinate_box(&param, &y_box);
        let n = if k == 0 { 1 } else { opts.grid };
        let total = n
            .checked_pow(k as u32)
            .ok_or_else(|| Error::InvalidInput("grid too large".into()))?;
        let z_obj = |z: &[f64]| objective(&param.to_point(z));

        let mut grid: Vec<(Vec<f64>, f64)> = (0..total)
            .into_par_iter()
            .map(|i| {
                let z = grid_point(&z_box, n, i);
                let v = z_obj(&z);
                (z, v)
            })
            .collect();
        for p in ens.distinct_points() {
            let z = param.to_coords(p);
            let v = z_obj(&z);
            grid.push((z, v));
        }

        if k > 0 {
            let mut order: Vec<usize> = (0..grid.len()).filter(|&i| grid[i].1.is_finite()).collect();
            order.sort_by(|&a, &b| {
                grid[a]
                    .1
                    .total_cmp(&grid[b].1)
                    .then_with(|| lex_cmp(&grid[a].0, &grid[b].0))
            });
            let width = z_box
                .lower
                .iter()
                .zip(&z_box.upper)
                .map(|(l, u)| u - l)
                .fold(0.0, f64::max);
            let mut starts: Vec<usize> = Vec::new();
            for &i in &order {
                if starts.len() >= opts.restarts.max(1) {
                    break;
                }
                if starts.iter().all(|&s| inf_dist(&grid[s].0, &grid[i].0) >= 0.1 * width) {
                    starts.push(i);
                }
            }
            let step: Vec<f64> = z_box
                .lower
                .iter()
                .zip(&z_box.upper)
                .map(|(l, u)| {
                    let s = (u - l) / (n.max(2) - 1) as f64;
                    if s > 0.0 {
                        s
                    } else {
                        1e-3
                    }
                })
                .collect();
            let nm = NelderMeadOptions {
                xtol: 1e-12 * (1.0 + width),
                ..NelderMeadOptions::default()
            };
            let refined: Vec<(Vec<f64>, f64)> = starts
                .par_iter()
                .map(|&s| {
                    let m = nelder_mead(z_obj, &grid[s].0, &step, &nm);
                    (m.x, m.value)
                })
                .collect();
            grid.extend(refined);
        }
        grid.into_iter()
            .map(|(z, value)| Candidate {
                y: param.to_point(&z),
                value,
            })
            .collect()
    };

    let best = candidates
        .iter()
        .filter(|c| c.value.is_finite())
        .min_by(|a, b| by_value_then_lex(a, b))
        .ok_or_else(|| Error::NoConvergence {
            method: "brute force centroid".into(),
            iterations: candidates.len(),
            residual: f64::INFINITY,
        })?;
    let tied: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| c.value <= best.value + opts.tie_tol)
        .collect();
    let non_unique = tied.iter().any(|c| inf_dist(&c.y, &best.y) > opts.distinct_tol);
    let chosen = if non_unique {
        tied.into_iter()
            .min_by(|a, b| lex_cmp(&a.y, &b.y))
            .expect("best is tied with itself")
    } else {
        best
    };
    let (multipliers, point) = (Vec::new(), chosen.y.clone());
    Ok(CentroidResult {
        point: Point::new(point)?,
        multipliers,
        objective: chosen.value,
        method: CentroidMethod::BruteForce,
        non_unique,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centroids::power_mean_centroids;
    use crate::divergences::catalog;
    use crate::loss::{Minkowski, ZeroOneGrid};
    use approx::assert_abs_diff_eq;

    fn ens(rows: &[&[f64]], w: &[f64]) -> WeightedEnsemble {
        WeightedEnsemble::from_rows(rows, w).unwrap()
    }

    #[test]
    fn l1_weighted_median() {
        let l1 = Minkowski::new(1.0, Domain::unbounded(1)).unwrap();
        let preds = ens(&[&[0.0], &[1.0]], &[1.0 / 3.0, 2.0 / 3.0]);
        let opts = BruteForceOptions::default().with_search_box(SearchBox::cube(1, -0.5, 1.5));
        let r = brute_force_centroid_with(&l1, &preds, Side::FirstArg, &Domain::unbounded(1), &opts).unwrap();
        assert_eq!(r.point[0], 1.0);
        assert_abs_diff_eq!(r.objective, 1.0 / 3.0, epsilon = 1e-15);
        assert!(!r.non_unique);
        assert!(matches!(
            brute_force_centroid(&l1, &preds, Side::FirstArg, &Domain::unbounded(1)),
            Err(Error::UnboundedDomain(0))
        ));
    }

    #[test]
    fn l1_flat_median_is_non_unique() {
        let l1 = Minkowski::new(1.0, Domain::unbounded(1)).unwrap();
        let preds = ens(&[&[0.0], &[1.0]], &[1.0, 1.0]);
        let opts = BruteForceOptions::default().with_search_box(SearchBox::cube(1, -0.5, 1.5));
        let r = brute_force_centroid_with(&l1, &preds, Side::FirstArg, &Domain::unbounded(1), &opts).unwrap();
        assert!(r.non_unique);
        assert_abs_diff_eq!(r.objective, 0.5, epsilon = 1e-9);
        assert!(r.point[0] <= 1e-6);
    }

    #[test]
    fn squared_error_mean() {
        let e = catalog::sq_euclidean(1);
        let preds = ens(&[&[0.0], &[2.0]], &[1.0, 1.0]);
        let opts = BruteForceOptions::default().with_search_box(SearchBox::cube(1, -1.0, 3.0));
        let r = brute_force_centroid_with(&e, &preds, Side::FirstArg, &Domain::unbounded(1), &opts).unwrap();
        assert_abs_diff_eq!(r.point[0], 1.0, epsilon = 1e-8);
        assert!(!r.non_unique);
    }

    #[test]
    fn alpha_simplex_power_mean() {
        let a = catalog::alpha(2, 0.5).unwrap();
        let simplex = Domain::simplex(2);
        for rows in [[[0.2, 0.8], [0.8, 0.2]], [[0.2, 0.8], [0.5, 0.5]]] {
            let preds = ens(&[&rows[0], &rows[1]], &[1.0, 1.0]);
            let bf = brute_force_centroid(&a, &preds, Side::FirstArg, &simplex).unwrap();
            let pm = power_mean_centroids(&a, &preds, Side::FirstArg).unwrap();
            assert_abs_diff_eq!(bf.point[0], pm.point[0], epsilon = 1e-6);
            assert_abs_diff_eq!(bf.point[1], pm.point[1], epsilon = 1e-6);
            assert!((bf.point[0] + bf.point[1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_one_grid_enumerates() {
        let z = ZeroOneGrid::new(1, 3).unwrap();
        let preds = ens(&[&[0.0], &[2.0], &[2.0]], &[1.0, 1.0, 1.0]);
        let r = brute_force_centroid(&z, &preds, Side::FirstArg, z.domain()).unwrap();
        assert_eq!(r.point[0], 2.0);
        assert_abs_diff_eq!(r.objective, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn default_box_pads_unbounded_coordinates() {
        let e = ens(&[&[1.0, 0.5], &[3.0, 0.7]], &[1.0, 1.0]);
        let dom = Domain::with_bounds(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY; 2]).unwrap();
        let b = default_search_box(&dom, &[&e]);
        assert_eq!(b.lower, vec![-1.0, 0.0]);
        assert_eq!(b.upper, vec![5.0, 1.7]);
    }
}
