#![allow(dead_code)]

use bvd::domain::SearchBox;
use bvd::{Point, WeightedEnsemble};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn ens(rows: &[&[f64]], weights: &[f64]) -> WeightedEnsemble {
    WeightedEnsemble::from_rows(rows, weights).unwrap()
}

pub fn random_ensemble(rng: &mut ChaCha8Rng, region: &SearchBox, max_support: usize) -> WeightedEnsemble {
    let n = rng.gen_range(1..=max_support);
    let points = (0..n).map(|_| Point::new(region.sample(rng)).unwrap()).collect();
    let weights = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    WeightedEnsemble::new(points, weights).unwrap()
}

/// A point of the probability simplex with two-decimal coordinates.
pub fn simplex_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut p: Vec<f64> = (0..dim - 1)
            .map(|_| (rng.gen_range(0.02..0.98f64) * 100.0).round() / 100.0)
            .collect();
        let rest = 1.0 - p.iter().sum::<f64>();
        if rest >= 0.02 {
            p.push(rest);
            return p;
        }
    }
}
