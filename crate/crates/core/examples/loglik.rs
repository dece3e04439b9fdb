//! Negative log-likelihood of a Gaussian ensemble, split into bias and variance.

use bvd::decomposition::gaussian_loglik_decompose;
use bvd::WeightedEnsemble;

fn main() -> bvd::Result<()> {
    // (mean, variance) pairs
    let preds = WeightedEnsemble::from_rows(&[&[0.0, 1.0], &[1.0, 3.0]], &[0.5, 0.5])?;
    for z in [0.0, 1.3, -2.0] {
        let r = gaussian_loglik_decompose(z, &preds)?;
        println!(
            "z = {z:>4}: E NLL {:.6} = bias {:.6} + variance {:.6}  (gap {:.1e})",
            r.expected_loss, r.bias, r.variance, r.gap
        );
    }
    Ok(())
}
