//! Decide whether a loss could be a g-Bregman divergence.

use bvd::divergences::CatalogParams;
use bvd::loss::FnLoss;
use bvd::uniqueness::{classify_loss, ClassifyConfig};
use bvd::{catalog, Domain};

fn main() -> bvd::Result<()> {
    let config = ClassifyConfig::default();
    for (name, params) in [
        (
            "kl",
            CatalogParams {
                dim: Some(2),
                ..Default::default()
            },
        ),
        (
            "minkowski",
            CatalogParams {
                dim: Some(2),
                epsilon: Some(1.5),
                ..Default::default()
            },
        ),
        (
            "l1",
            CatalogParams {
                dim: Some(1),
                ..Default::default()
            },
        ),
        (
            "zero_one_grid",
            CatalogParams {
                dim: Some(1),
                levels: Some(3),
                ..Default::default()
            },
        ),
    ] {
        let entry = catalog(name, &params)?;
        let c = classify_loss(entry.as_loss(), &config);
        println!(
            "{:<16} {:?}  max |gap| {:.3e}",
            c.evidence.loss, c.verdict, c.evidence.max_abs_gap
        );
    }

    // Any closure works too; this one is a Bregman divergence in disguise.
    let exp_loss = FnLoss::new("exp-bregman", Domain::unbounded(1), |t, y| {
        (t[0]).exp() - (y[0]).exp() - (y[0]).exp() * (t[0] - y[0])
    });
    let c = classify_loss(&exp_loss, &config);
    println!("{:<16} {:?}", "exp-bregman", c.verdict);
    Ok(())
}
