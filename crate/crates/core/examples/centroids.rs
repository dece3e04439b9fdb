//! Central labels and predictions: closed forms, Lagrange and brute force.

use bvd::centroids::{
    brute_force_centroid, brute_force_centroid_with, constrained_central_prediction, default_search_box,
    f_mean_prediction, g_mean_label, BruteForceOptions, Side,
};
use bvd::divergences::catalog::{kl, minkowski};
use bvd::{Domain, WeightedEnsemble};

fn main() -> bvd::Result<()> {
    let div = kl(3);
    let labels = WeightedEnsemble::from_rows(&[&[0.2, 0.3, 0.5], &[0.6, 0.2, 0.2]], &[0.5, 0.5])?;
    let preds = WeightedEnsemble::from_rows(
        &[&[0.1, 0.6, 0.3], &[0.5, 0.3, 0.2], &[0.3, 0.3, 0.4]],
        &[0.2, 0.3, 0.5],
    )?;

    let t = g_mean_label(&div, &labels)?;
    let y = f_mean_prediction(&div, &preds)?;
    println!("g-mean label      {:?}", t.point.coords());
    println!(
        "f-mean prediction {:?} (geometric mean, off the simplex)",
        y.point.coords()
    );

    let simplex = Domain::simplex(3);
    let y_star = constrained_central_prediction(&div, &preds, &simplex)?;
    println!(
        "on the simplex    {:?}  lambda = {:?}",
        y_star.point.coords(),
        y_star.multipliers
    );

    let check = brute_force_centroid(&div, &preds, Side::FirstArg, &simplex)?;
    println!("brute force       {:?}", check.point.coords());

    // A median-like loss on an unbounded domain: search around the ensemble.
    let l15 = minkowski(3, 1.5)?;
    let domain = l15.as_loss().domain();
    let opts = BruteForceOptions::default().with_search_box(default_search_box(domain, &[&preds]));
    let m = brute_force_centroid_with(l15.as_loss(), &preds, Side::FirstArg, domain, &opts)?;
    println!("minkowski(1.5)    {:?}  objective {:.6}", m.point.coords(), m.objective);
    Ok(())
}
