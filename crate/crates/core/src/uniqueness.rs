//! Finite-difference mixed Hessians, the rank-≤-d separability test and an
//! empirical loss classifier.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose_generic, search_gap_witness, GapWitness};
use crate::domain::{Domain, SearchBox};
use crate::ensemble::{Point, WeightedEnsemble};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::loss::LossFunction;

/// Halving the step may change entries by at most this much, relative to the
/// largest entry, before a sample is flagged unreliable.
pub const STEP_CONVERGENCE_TOL: f64 = 1e-4;
/// Default relative singular-value threshold for the numerical rank.
pub const RANK_THRESHOLD: f64 = 1e-6;
/// More unreliable samples than this fraction withholds the verdict.
pub const MAX_UNRELIABLE_FRACTION: f64 = 0.1;

/// `∂²L/∂yᵢ∂tⱼ` at one `(t, y)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedHessianSample {
    pub label: Point,
    pub prediction: Point,
    /// Row `i` (prediction coordinate), column `j` (label coordinate).
    pub matrix: Vec<Vec<f64>>,
    pub step: f64,
    /// Largest entry change on halving the step, relative to the largest entry.
    pub step_change: f64,
    pub reliable: bool,
}

/// Default step `1e-4·(1 + ‖(t, y)‖∞)`.
pub fn default_step(t: &[f64], y: &[f64]) -> f64 {
    let m = t.iter().chain(y).fold(0.0f64, |m, v| m.max(v.abs()));
    1e-4 * (1.0 + m)
}

fn central_mixed(loss: &dyn LossFunction, t: &[f64], y: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let d = t.len();
    let ambient = loss.domain().relaxed();
    let eval = |tt: &[f64], yy: &[f64]| -> Result<f64> {
        for p in [tt, yy] {
            if let Err(e) = ambient.check_feasible(p) {
                return Err(Error::Infeasible {
                    point: p.to_vec(),
                    reason: format!("finite-difference stencil leaves the domain: {e}"),
                });
            }
        }
        let v = loss.eval_unchecked(tt, yy)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite {
                context: "loss on stencil".into(),
                index: 0,
                value: v,
            })
        }
    };
    let shift = |p: &[f64], k: usize, s: f64| -> Vec<f64> {
        let mut q = p.to_vec();
        q[k] += s;
        q
    };
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        let yp = shift(y, i, h);
        let ym = shift(y, i, -h);
        for j in 0..d {
            let tp = shift(t, j, h);
            let tm = shift(t, j, -h);
            m[(i, j)] = (eval(&tp, &yp)? - eval(&tp, &ym)? - eval(&tm, &yp)? + eval(&tm, &ym)?) / (4.0 * h * h);
        }
    }
    Ok(m)
}

/// Central-difference mixed Hessian with a step-halving reliability check.
///
/// The stencil is checked against the box bounds of the loss's domain only, so
/// losses restricted to an affine set can still be probed in ambient space.
pub fn mixed_hessian_fd(
    loss: &dyn LossFunction,
    t: &[f64],
    y: &[f64],
    step: Option<f64>,
) -> Result<MixedHessianSample> {
    check_dim(loss.dim(), t.len())?;
    check_dim(loss.dim(), y.len())?;
    let h = step.unwrap_or_else(|| default_step(t, y));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let coarse = central_mixed(loss, t, y, h)?;
    let fine = central_mixed(loss, t, y, 0.5 * h)?;
    let scale = fine.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = (&coarse - &fine).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let step_change = if scale > 0.0 {
        diff / scale
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(MixedHessianSample {
        label: Point::new(t.to_vec())?,
        prediction: Point::new(y.to_vec())?,
        matrix: linalg::matrix_to_rows(&coarse),
        step: h,
        step_change,
        reliable: step_change < STEP_CONVERGENCE_TOL,
    })
}

/// A 2×2 minor `H(t₁,y₁)H(t₂,y₂) − H(t₁,y₂)H(t₂,y₁)` of the flattened matrix (d = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantWitness {
    pub labels: [Point; 2],
    pub predictions: [Point; 2],
    pub determinant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityVerdict {
    pub dim: usize,
    pub label_points: usize,
    pub pred_points: usize,
    pub numerical_rank: usize,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    pub separable: bool,
    pub unreliable_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<DeterminantWitness>,
}

impl SeparabilityVerdict {
    /// `σ_{d+1}/σ₁`, zero when there are at most `d` singular values.
    pub fn excess_ratio(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.get(self.dim)) {
            (Some(s1), Some(sd)) if *s1 > 0.0 => sd / s1,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityOptions {
    /// Finite-difference step; `None` uses [`default_step`] per sample.
    pub step: Option<f64>,
    /// Relative singular-value threshold.
    pub threshold: f64,
}

impl Default for SeparabilityOptions {
    fn default() -> Self {
        SeparabilityOptions {
            step: None,
            threshold: RANK_THRESHOLD,
        }
    }
}

/// Checks whether the mixed Hessian factorizes as `H₂(y)H₁(t)ᵀ` by testing
/// that `M[(l,i),(k,j)] = H(t_k, y_l)[i,j]` has numerical rank at most `d`.
pub fn separability_rank_test(
    loss: &dyn LossFunction,
    label_grid: &[Vec<f64>],
    pred_grid: &[Vec<f64>],
    opts: &SeparabilityOptions,
) -> Result<SeparabilityVerdict> {
    let d = loss.dim();
    if label_grid.len() < 2 * d || pred_grid.len() < 2 * d {
        return Err(Error::InvalidInput(format!(
            "separability test needs at least {} points per grid",
            2 * d
        )));
    }
    let (nk, nl) = (label_grid.len(), pred_grid.len());
    let samples: Vec<MixedHessianSample> = (0..nl * nk)
        .into_par_iter()
        .map(|idx| {
            let (l, k) = (idx / nk, idx % nk);
            mixed_hessian_fd(loss, &label_grid[k], &pred_grid[l], opts.step)
        })
        .collect::<Result<Vec<_>>>()?;
    let unreliable = samples.iter().filter(|s| !s.reliable).count();
    if unreliable as f64 > MAX_UNRELIABLE_FRACTION * samples.len() as f64 {
        return Err(Error::VerdictWithheld {
            unreliable,
            total: samples.len(),
        });
    }
    let mut m = DMatrix::zeros(nl * d, nk * d);
    for (idx, s) in samples.iter().enumerate() {
        let (l, k) = (idx / nk, idx % nk);
        for i in 0..d {
            for j in 0..d {
                m[(l * d + i, k * d + j)] = s.matrix[i][j];
            }
        }
    }
    let singular_values = linalg::singular_values(&m);
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let numerical_rank = singular_values.iter().filter(|s| **s > opts.threshold * smax).count();
    let separable = numerical_rank <= d;
    let witness = if d == 1 && !separable {
        let h = |k: usize, l: usize| m[(l, k)];
        let mut best: Option<(f64, [usize; 4])> = None;
        for k1 in 0..nk {
            for k2 in k1 + 1..nk {
                for l1 in 0..nl {
                    for l2 in l1 + 1..nl {
                        let det = h(k1, l1) * h(k2, l2) - h(k1, l2) * h(k2, l1);
                        if best.is_none_or(|(b, _)| det.abs() > b.abs()) {
                            best = Some((det, [k1, k2, l1, l2]));
                        }
                    }
                }
            }
        }
        match best {
            Some((det, [k1, k2, l1, l2])) => Some(DeterminantWitness {
                labels: [Point::new(label_grid[k1].clone())?, Point::new(label_grid[k2].clone())?],
                predictions: [Point::new(pred_grid[l1].clone())?, Point::new(pred_grid[l2].clone())?],
                determinant: det,
            }),
            None => None,
        }
    } else {
        None
    };
    Ok(SeparabilityVerdict {
        dim: d,
        label_points: nk,
        pred_points: nl,
        numerical_rank,
        singular_values,
        threshold: opts.threshold,
        separable,
        unreliable_samples: unreliable,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentWithGbregman,
    NotGbregman,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub seed: u64,
    /// Points per label grid and per prediction grid.
    pub grid_points: usize,
    /// Independent random grid pairs for the separability test.
    pub separability_trials: usize,
    /// Random ensemble pairs for the gap search.
    pub gap_trials: usize,
    pub max_support: usize,
    pub gap_threshold: f64,
    pub separability: SeparabilityOptions,
    /// Sampling region; `None` derives one from the loss's domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<SearchBox>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            seed: 20_240_917,
            grid_points: 8,
            separability_trials: 3,
            gap_trials: 24,
            max_support: 3,
            gap_threshold: 1e-3,
            separability: SeparabilityOptions::default(),
            region: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub loss: String,
    pub dim: usize,
    pub seed: u64,
    pub region: SearchBox,
    pub grid_points: usize,
    pub separability: Vec<SeparabilityVerdict>,
    pub gap_trials: usize,
    pub max_abs_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_witness: Option<GapWitness>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: Evidence,
}

/// Sampling region for a domain: finite boxes shrunk 5% inward, half-lines
/// `[l + 0.1, l + 2]`, and `[−0.5, 1.5]` for unbounded coordinates.
pub fn default_region(domain: &Domain) -> SearchBox {
    let (lower, upper) = domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(l, u)| match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                let pad = 0.05 * (u - l);
                (l + pad, u - pad)
            }
            (true, false) => (l + 0.1, l + 2.0),
            (false, true) => (u - 2.0, u - 0.1),
            (false, false) => (-0.5, 1.5),
        })
        .unzip();
    SearchBox { lower, upper }
}

/// Uniform sample from `region` that also satisfies the domain's equality
/// constraints (drawn on the affine set), if any.
fn sample_feasible(domain: &Domain, region: &SearchBox, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    if !domain.has_equality() {
        return Some(region.sample(rng));
    }
    let param = domain.affine_parameterization().ok()?;
    for _ in 0..1000 {
        let y = region.sample(rng);
        let z = param.to_coords(&y);
        let p = param.to_point(&z);
        if domain.is_feasible(&p) && region.contains(&p) {
            return Some(p);
        }
    }
    None
}

fn round_to(v: Vec<f64>, digits: i32) -> Vec<f64> {
    let s = 10f64.powi(digits);
    v.into_iter().map(|x| (x * s).round() / s).collect()
}

/// Random label and prediction grids; predictions closer than `10·h` to a
/// label in any coordinate are redrawn to stay clear of kinks.
fn random_grids(
    loss: &dyn LossFunction,
    region: &SearchBox,
    n: usize,
    step: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let domain = loss.domain().relaxed();
    let labels: Vec<Vec<f64>> = (0..n)
        .map(|_| sample_feasible(&domain, region, rng))
        .collect::<Option<_>>()?;
    let mut preds = Vec::with_capacity(n);
    for _ in 0..n {
        let mut accepted = None;
        for _ in 0..1000 {
            let y = sample_feasible(&domain, region, rng)?;
            let clear = labels.iter().all(|t| {
                let h = step.unwrap_or_else(|| default_step(t, &y));
                t.iter().zip(&y).all(|(a, b)| (a - b).abs() >= 10.0 * h)
            });
            if clear {
                accepted = Some(y);
                break;
            }
        }
        preds.push(accepted?);
    }
    Some((labels, preds))
}

/// Empirical check of whether `loss` can be a g-Bregman divergence.
///
/// Runs a fixed gap probe, separability tests on random grids and a random
/// gap search. `NotGbregman` needs a reliable non-separability witness or a
/// gap above the threshold; `ConsistentWithGbregman` means every test ran and
/// passed at the configured sizes. Evaluation failures give `Inconclusive`.
pub fn classify_loss(loss: &dyn LossFunction, config: &ClassifyConfig) -> Classification {
    let d = loss.dim();
    let domain = loss.domain().clone();
    let region = config.region.clone().unwrap_or_else(|| default_region(&domain));
    let mut evidence = Evidence {
        loss: loss.name(),
        dim: d,
        seed: config.seed,
        region: region.clone(),
        grid_points: config.grid_points,
        separability: Vec::new(),
        gap_trials: 0,
        max_abs_gap: 0.0,
        gap_witness: None,
        notes: Vec::new(),
    };
    let mut failures = 0usize;
    let mut not_separable = false;
    let grid = loss.support_grid();

    // Fixed probe: label at the 25% point, predictions at the 25% and 75% points.
    let probe = (|| -> Option<(WeightedEnsemble, WeightedEnsemble)> {
        let (a, b) = match &grid {
            Some(g) if g.len() >= 2 => (g[0].clone(), g[g.len() - 1].clone()),
            Some(_) => return None,
            None => {
                let at = |f: f64| -> Vec<f64> {
                    region
                        .lower
                        .iter()
                        .zip(&region.upper)
                        .map(|(l, u)| l + f * (u - l))
                        .collect()
                };
                (at(0.25), at(0.75))
            }
        };
        let labels = WeightedEnsemble::from_rows(&[&a], &[1.0]).ok()?;
        let preds = WeightedEnsemble::from_rows(&[&a, &b], &[1.0 / 3.0, 2.0 / 3.0]).ok()?;
        Some((labels, preds))
    })();
    let decompose = |l: &WeightedEnsemble, p: &WeightedEnsemble| decompose_generic(loss, l, p, &domain);
    if let Some((labels, preds)) = probe {
        evidence.gap_trials += 1;
        match decompose(&labels, &preds) {
            Ok(report) => {
                evidence.max_abs_gap = evidence.max_abs_gap.max(report.gap.abs());
                if report.gap.abs() > config.gap_threshold {
                    evidence.gap_witness = Some(GapWitness {
                        labels,
                        preds,
                        report,
                        seed: config.seed,
                        trial: 0,
                    });
                }
            }
            Err(e) => {
                failures += 1;
                evidence.notes.push(format!("fixed gap probe failed: {e}"));
            }
        }
    }

    if grid.is_none() && loss.is_smooth() {
        for trial in 0..config.separability_trials {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(trial as u64));
            let Some((labels, preds)) = random_grids(
                loss,
                &region,
                config.grid_points.max(2 * d),
                config.separability.step,
                &mut rng,
            ) else {
                failures += 1;
                evidence
                    .notes
                    .push(format!("separability trial {trial}: could not sample grids"));
                continue;
            };
            match separability_rank_test(loss, &labels, &preds, &config.separability) {
                Ok(v) => {
                    not_separable |= !v.separable;
                    evidence.separability.push(v);
                }
                Err(e) => {
                    failures += 1;
                    evidence.notes.push(format!("separability trial {trial}: {e}"));
                }
            }
        }
    } else {
        evidence
            .notes
            .push("loss is not smooth; separability test skipped".into());
    }

    if evidence.gap_witness.is_none() && config.gap_trials > 0 {
        let sampler = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            match &grid {
                Some(g) => g[rng.gen_range(0..g.len())].clone(),
                None => sample_feasible(&domain, &region, rng)
                    .map(|p| round_to(p, 3))
                    .unwrap_or_default(),
            }
        };
        let seed = config.seed.wrapping_add(1_000);
        let mut max_gap = evidence.max_abs_gap;
        let mut errors = 0usize;
        let witness = search_gap_witness(
            seed,
            config.gap_trials,
            config.max_support,
            config.gap_threshold,
            sampler,
            |l, p| {
                let r = decompose(l, p);
                match &r {
                    Ok(rep) => max_gap = max_gap.max(rep.gap.abs()),
                    Err(_) => errors += 1,
                }
                r
            },
        );
        evidence.gap_trials += witness.as_ref().map_or(config.gap_trials, |w| w.trial + 1);
        evidence.max_abs_gap = max_gap;
        if errors > 0 {
            evidence.notes.push(format!("{errors} gap trials failed to evaluate"));
            if errors == config.gap_trials {
                failures += 1;
            }
        }
        evidence.gap_witness = witness;
    }

    let verdict = if not_separable || evidence.gap_witness.is_some() {
        Verdict::NotGbregman
    } else if failures == 0 && (grid.is_some() || !evidence.separability.is_empty()) {
        Verdict::ConsistentWithGbregman
    } else {
        Verdict::Inconclusive
    };
    Classification { verdict, evidence }
}
