//! Clean decompositions, and what happens when they are not clean.

use bvd::decomposition::{
    decompose_constrained_bregman, decompose_gbregman, decompose_generic, decompose_power_mean, ordering_violation_gap,
    Swaps,
};
use bvd::divergences::catalog::{alpha, kl, minkowski};
use bvd::{Domain, WeightedEnsemble};

fn main() -> bvd::Result<()> {
    let labels = WeightedEnsemble::from_rows(&[&[0.7, 0.2, 0.1], &[0.1, 0.3, 0.6]], &[0.5, 0.5])?;
    let preds = WeightedEnsemble::from_rows(&[&[0.05, 0.05, 0.9], &[0.6, 0.3, 0.1]], &[0.4, 0.6])?;
    let simplex = Domain::simplex(3);

    let r = decompose_gbregman(&kl(3), &labels, &preds)?;
    println!(
        "kl, box:           {:.6} = {:.6} + {:.6} + {:.6}  gap {:.1e}",
        r.expected_loss, r.intrinsic_noise, r.bias, r.variance, r.gap
    );

    let r = decompose_constrained_bregman(&kl(3), &labels, &preds, &simplex)?;
    println!(
        "kl, simplex:       {:.6} = {:.6} + {:.6} + {:.6}  gap {:.1e}",
        r.expected_loss, r.intrinsic_noise, r.bias, r.variance, r.gap
    );

    let r = decompose_power_mean(&alpha(3, 0.5)?, &labels, &preds, &simplex)?;
    println!("alpha(.5) simplex: gap {:.6} with power-mean centroids", r.gap);

    for s in Swaps::all().into_iter().skip(1) {
        println!(
            "swapped {s:?}: gap {:.6}",
            ordering_violation_gap(&kl(3), &labels, &preds, s)?
        );
    }

    let l15 = minkowski(3, 1.5)?;
    let r = decompose_generic(l15.as_loss(), &labels, &preds, l15.as_loss().domain())?;
    println!("minkowski(1.5):    gap {:.6}", r.gap);
    Ok(())
}
