//! Search random ensembles for a decomposition that does not add up.

use bvd::decomposition::{box_sampler, decompose_generic, search_gap_witness};
use bvd::divergences::catalog::minkowski;
use bvd::domain::SearchBox;

fn main() -> bvd::Result<()> {
    let loss = minkowski(1, 1.5)?;
    let loss = loss.as_loss();
    let sampler = box_sampler(SearchBox::cube(1, -1.0, 1.0), 2);
    let w = search_gap_witness(11, 50, 3, 1e-3, sampler, |l, p| {
        decompose_generic(loss, l, p, loss.domain())
    });
    match w {
        Some(w) => println!(
            "trial {}: gap {:.6}\n{}",
            w.trial,
            w.report.gap,
            serde_json::to_string_pretty(&w).unwrap()
        ),
        None => println!("no witness in 50 trials"),
    }
    Ok(())
}
