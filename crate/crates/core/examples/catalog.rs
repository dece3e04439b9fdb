//! Build divergences from the catalog and evaluate them both ways.

use bvd::catalog;
use bvd::divergences::{catalog::kl_direct, CatalogParams};

fn main() -> bvd::Result<()> {
    let params = CatalogParams {
        dim: Some(3),
        alpha: Some(0.3),
        ..Default::default()
    };
    let t = [0.2, 0.5, 0.3];
    let y = [0.4, 0.4, 0.2];

    for name in ["sq_euclidean", "kl", "reverse_kl", "alpha", "bernoulli_kl"] {
        let div = catalog(name, &params)?.into_divergence()?;
        let defining = div.gbregman_eval(&t, &y)?;
        let concise = div.eval_concise(&t, &y)?;
        let reversed = div.reverse().gbregman_eval(&y, &t)?;
        println!("{name:>14}: D(t,y) = {defining:.6}  concise = {concise:.6}  reversed D(y,t) = {reversed:.6}");
    }
    println!("direct KL: {:.6}", kl_direct(&t, &y));

    // Plain losses share the same interface but have no closed forms.
    let l1 = catalog(
        "l1",
        &CatalogParams {
            dim: Some(3),
            ..Default::default()
        },
    )?;
    println!("{} = {:.6}", l1.as_loss().name(), l1.as_loss().eval(&t, &y)?);
    Ok(())
}
