//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;

use bvd::centroids::{
    brute_force_centroid_with, default_search_box, f_mean_prediction, g_mean_label, power_mean_centroids,
    BruteForceOptions, Side,
};
use bvd::decomposition::{
    decompose_constrained_bregman, decompose_gbregman, decompose_generic, decompose_power_mean,
    gaussian_loglik_decompose, ordering_violation_gap, Swaps,
};
use bvd::divergences::catalog::{
    alpha, alpha_direct, bernoulli_kl, gaussian_canonical, gbregman_entries, kl, kl_direct, mahalanobis, minkowski,
    reverse_kl, reverse_kl_direct, spd_test_matrix, sq_euclidean,
};
use bvd::loss::{Minkowski, ZeroOneGrid};
use bvd::uniqueness::{default_region, mixed_hessian_fd, separability_rank_test, SeparabilityOptions};
use bvd::{Domain, GBregmanDivergence, LossFunction, WeightedEnsemble};
use common::{ens, random_ensemble};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() <= tol, || format!("{what}: {a} vs {b} (tol {tol})"))
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn clean_additivity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut count = 0;
    for d in 1..=4 {
        let mut divs = vec![
            sq_euclidean(d),
            ok(mahalanobis(spd_test_matrix(d)))?,
            kl(d),
            reverse_kl(d),
        ];
        for a in [0.3, 0.5, 0.7] {
            divs.push(ok(alpha(d, a))?);
        }
        if d == 2 {
            divs.push(gaussian_canonical());
        }
        for div in divs {
            let region = default_region(div.domain());
            // 500 ensembles per divergence, spread over the dimensions it supports
            let n = if div.name().starts_with("gaussian") { 500 } else { 125 };
            for _ in 0..n {
                let labels = random_ensemble(&mut rng, &region, 8);
                let preds = random_ensemble(&mut rng, &region, 8);
                let r = ok(decompose_gbregman(&div, &labels, &preds))?;
                let rel = r.gap.abs() / (1.0 + r.expected_loss);
                ensure(rel <= 1e-9, || format!("{} d={d}: gap {}", div.name(), r.gap))?;
                worst = worst.max(rel);
                count += 1;
            }
        }
    }
    Ok(format!("{count} decompositions, worst |gap|/(1+E) = {worst:.1e}"))
}

fn constrained_kl() -> Check {
    let simplex = Domain::simplex(2);
    let labels = ens(&[&[0.5, 0.5]], &[1.0]);
    let preds = ens(&[&[0.2, 0.8], &[0.8, 0.2]], &[1.0, 1.0]);
    let r = ok(decompose_constrained_bregman(&kl(2), &labels, &preds, &simplex))?;
    for (a, b) in r.central_prediction.coords().iter().zip([0.5, 0.5]) {
        close(*a, b, 1e-10, "y*")?;
    }
    close(r.variance, -0.8f64.ln(), 1e-9, "variance")?;
    ensure(r.gap.abs() < 1e-12, || format!("gap {}", r.gap))?;

    let mirrored = ok(decompose_constrained_bregman(&reverse_kl(2), &preds, &labels, &simplex))?;
    for (a, b) in mirrored.central_label.coords().iter().zip([0.5, 0.5]) {
        close(*a, b, 1e-10, "mirrored t*")?;
    }
    close(mirrored.intrinsic_noise, -0.8f64.ln(), 1e-9, "mirrored noise")?;
    ensure(mirrored.gap.abs() < 1e-12, || format!("mirrored gap {}", mirrored.gap))?;
    Ok(format!("variance {:.12}, gap {:.1e}", r.variance, r.gap))
}

fn centroid_oracles() -> Check {
    // exact fixtures
    let preds = ens(&[&[0.2, 0.8], &[0.8, 0.2]], &[1.0, 1.0]);
    let geo = ok(f_mean_prediction(&kl(2), &preds))?;
    close(geo.point.coords()[0], 0.4, 1e-12, "geometric mean")?;
    let arith = ok(g_mean_label(&kl(2), &preds))?;
    close(arith.point.coords()[0], 0.5, 1e-12, "arithmetic mean")?;
    let mut sim_alpha = ok(alpha(2, 0.5))?;
    sim_alpha = ok(sim_alpha.with_domain(Domain::simplex(2)))?;
    let pm = ok(power_mean_centroids(&sim_alpha, &preds, Side::FirstArg))?;
    close(pm.point.coords()[0], 0.5, 1e-12, "power mean")?;
    let g = gaussian_canonical();
    let t = ok(g_mean_label(&g, &ens(&[&[0.0, 1.0], &[2.0, 3.0]], &[1.0, 1.0])))?;
    close(t.point.coords()[0], 0.5, 1e-12, "gaussian canonical m")?;
    close(t.point.coords()[1], 1.5, 1e-12, "gaussian canonical sigma")?;
    let y = ok(f_mean_prediction(&g, &ens(&[&[0.0, 1.0], &[2.0, 1.0]], &[1.0, 1.0])))?;
    close(y.point.coords()[0], 1.0, 1e-12, "gaussian moment m")?;
    close(y.point.coords()[1], 2.0, 1e-12, "gaussian moment sigma")?;

    // random instances against the brute-force minimizer
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut divs: Vec<GBregmanDivergence> = Vec::new();
    for d in 1..=3 {
        divs.extend([
            sq_euclidean(d),
            ok(mahalanobis(spd_test_matrix(d)))?,
            kl(d),
            reverse_kl(d),
            bernoulli_kl(d),
        ]);
        for a in [0.3, 0.5, 0.7] {
            divs.push(ok(alpha(d, a))?);
        }
    }
    divs.push(gaussian_canonical());
    let mut names: Vec<String> = divs.iter().map(|d| d.name()).collect();
    names.sort();
    names.dedup();
    let mut instances = 0;
    for name in &names {
        let family: Vec<&GBregmanDivergence> = divs.iter().filter(|d| &d.name() == name).collect();
        for i in 0..100 {
            let div = family[i % family.len()];
            let region = default_region(div.domain());
            let n = rng.gen_range(1..=6);
            let ensemble = random_ensemble(&mut rng, &region, n);
            for side in [Side::SecondArg, Side::FirstArg] {
                let closed = match side {
                    Side::SecondArg => ok(g_mean_label(div, &ensemble))?,
                    Side::FirstArg => ok(f_mean_prediction(div, &ensemble))?,
                };
                let opts = BruteForceOptions {
                    grid: 15,
                    ..Default::default()
                }
                .with_search_box(default_search_box(div.domain(), &[&ensemble]));
                let brute = ok(brute_force_centroid_with(div, &ensemble, side, div.domain(), &opts))?;
                for (a, b) in closed.point.coords().iter().zip(brute.point.coords()) {
                    worst = worst.max((a - b).abs());
                    close(*a, *b, 1e-5, &format!("{} {side:?} centroid", div.name()))?;
                }
            }
            instances += 1;
        }
    }
    Ok(format!(
        "{instances} instances over {} divergences, worst coordinate error {worst:.1e}",
        names.len()
    ))
}

#[derive(Deserialize)]
struct Frozen {
    labels: WeightedEnsemble,
    preds: WeightedEnsemble,
}

fn frozen(name: &str) -> Result<Frozen, String> {
    let path = format!("{}/tests/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
    ok(serde_json::from_str(&ok(fs::read_to_string(path))?))
}

fn witnesses() -> Check {
    let l1 = ok(Minkowski::new(1.0, Domain::unbounded(1)))?;
    let r = ok(decompose_generic(
        &l1,
        &ens(&[&[0.0]], &[1.0]),
        &ens(&[&[0.0], &[1.0]], &[1.0 / 3.0, 2.0 / 3.0]),
        &Domain::unbounded(1),
    ))?;
    close(r.gap, -2.0 / 3.0, 1e-12, "L1 gap")?;

    let m = ok(minkowski(1, 1.5))?;
    let v = ok(separability_rank_test(
        m.as_loss(),
        &[vec![0.0], vec![1.0]],
        &[vec![2.0], vec![4.0]],
        &SeparabilityOptions::default(),
    ))?;
    let w = v.witness.ok_or("no determinant witness")?;
    let h = |t: f64, y: f64| -0.75 * (t - y).abs().powf(-0.5);
    let (t1, t2) = (w.labels[0].coords()[0], w.labels[1].coords()[0]);
    let (y1, y2) = (w.predictions[0].coords()[0], w.predictions[1].coords()[0]);
    let analytic = h(t1, y1) * h(t2, y2) - h(t1, y2) * h(t2, y1);
    close(w.determinant, analytic, 1e-3, "minkowski determinant")?;
    close(analytic.abs(), 0.0516, 1e-4, "analytic determinant")?;
    ensure(!v.separable, || "minkowski(1.5) reported separable".into())?;

    let a = frozen("alpha_simplex_witness")?;
    let simplex = Domain::simplex(3);
    let ra = ok(decompose_power_mean(&ok(alpha(3, 0.5))?, &a.labels, &a.preds, &simplex))?;
    ensure(ra.gap.abs() > 1e-3, || format!("alpha witness gap {}", ra.gap))?;

    let z = frozen("zero_one_witness")?;
    let grid = ok(ZeroOneGrid::new(1, 3))?;
    let rz = ok(decompose_generic(&grid, &z.labels, &z.preds, grid.domain()))?;
    ensure(rz.gap.abs() > 1e-3, || format!("zero-one witness gap {}", rz.gap))?;
    Ok(format!(
        "L1 {:.12}, det {:.6} (analytic {analytic:.6}), alpha {:.4}, zero-one {:.4}",
        r.gap, w.determinant, ra.gap, rz.gap
    ))
}

fn analytic_mixed_hessian(div: &GBregmanDivergence, t: &[f64], y: &[f64]) -> Option<Vec<Vec<f64>>> {
    let d = t.len();
    let diag = |f: &dyn Fn(usize) -> f64| {
        (0..d)
            .map(|i| (0..d).map(|j| if i == j { f(i) } else { 0.0 }).collect())
            .collect()
    };
    match div.name().as_str() {
        "sq_euclidean" => Some(diag(&|_| -2.0)),
        "kl" => Some(diag(&|i| -1.0 / y[i])),
        "reverse_kl" => Some(diag(&|i| -1.0 / t[i])),
        "mahalanobis" => {
            let k = spd_test_matrix(d);
            Some((0..d).map(|i| (0..d).map(|j| -2.0 * k[(i, j)]).collect()).collect())
        }
        _ => None,
    }
}

fn separability() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut entries = 0;
    let mut hessian_checks = 0;
    for d in 1..=3 {
        for div in gbregman_entries(d) {
            let region = default_region(div.domain());
            let labels: Vec<Vec<f64>> = (0..20).map(|_| region.sample(&mut rng)).collect();
            let preds: Vec<Vec<f64>> = (0..20).map(|_| region.sample(&mut rng)).collect();
            let v = ok(separability_rank_test(
                &div,
                &labels,
                &preds,
                &SeparabilityOptions::default(),
            ))?;
            ensure(v.separable && v.numerical_rank <= d, || {
                format!("{} d={d}: rank {}", div.name(), v.numerical_rank)
            })?;
            ensure(v.excess_ratio() < 1e-6, || {
                format!("{} d={d}: ratio {:.2e}", div.name(), v.excess_ratio())
            })?;
            worst = worst.max(v.excess_ratio());
            entries += 1;
            for (t, y) in labels.iter().zip(&preds) {
                if let Some(exact) = analytic_mixed_hessian(&div, t, y) {
                    let fd = ok(mixed_hessian_fd(&div, t, y, None))?;
                    for (row_fd, row_ex) in fd.matrix.iter().zip(&exact) {
                        for (a, b) in row_fd.iter().zip(row_ex) {
                            // entries grow like 1/y near the boundary; compare relative to scale
                            close(
                                *a,
                                *b,
                                1e-5 * b.abs().max(1.0),
                                &format!("{} mixed Hessian", div.name()),
                            )?;
                        }
                    }
                    hessian_checks += 1;
                }
            }
        }
    }
    Ok(format!(
        "{entries} entry grids, worst ratio {worst:.1e}; {hessian_checks} analytic Hessian checks"
    ))
}

fn duality_and_reversal() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_rev = 0.0f64;
    let mut worst_concise = 0.0f64;
    let mut pairs = 0;
    for d in 1..=3 {
        for div in gbregman_entries(d) {
            let rev = div.reverse();
            let region = default_region(div.domain());
            for _ in 0..1000 {
                let (t, y) = (region.sample(&mut rng), region.sample(&mut rng));
                let a = ok(div.gbregman_eval(&t, &y))?;
                let b = ok(rev.gbregman_eval(&y, &t))?;
                let c = ok(div.eval_concise(&t, &y))?;
                close(a, b, 1e-9, &format!("{} reversal", div.name()))?;
                close(a, c, 1e-9, &format!("{} concise form", div.name()))?;
                worst_rev = worst_rev.max((a - b).abs());
                worst_concise = worst_concise.max((a - c).abs());
                pairs += 1;
            }
        }
    }
    Ok(format!(
        "{pairs} pairs, worst reversal {worst_rev:.1e}, worst concise {worst_concise:.1e}"
    ))
}

fn ordering() -> Check {
    let labels = ens(&[&[0.3, 0.7]], &[1.0]);
    let preds = ens(&[&[0.2, 0.8], &[0.6, 0.4]], &[1.0, 1.0]);
    let k = kl(2);
    let bias = ok(ordering_violation_gap(
        &k,
        &labels,
        &preds,
        Swaps {
            bias: true,
            ..Swaps::NONE
        },
    ))?;
    let var = ok(ordering_violation_gap(
        &k,
        &labels,
        &preds,
        Swaps {
            variance: true,
            ..Swaps::NONE
        },
    ))?;
    ensure(bias.abs() > 1e-6 && var.abs() > 1e-6, || {
        format!("kl swaps {bias} {var}")
    })?;

    let m = ok(mahalanobis(spd_test_matrix(2)))?;
    for s in Swaps::all() {
        let g = ok(ordering_violation_gap(&m, &labels, &preds, s))?;
        ensure(g.abs() < 1e-12, || format!("mahalanobis {s:?}: {g}"))?;
    }

    let l1 = ok(Minkowski::new(1.0, Domain::unbounded(1)))?;
    let flat = ens(&[&[0.0], &[1.0]], &[1.0, 1.0]);
    let opts = BruteForceOptions::default().with_search_box(default_search_box(l1.domain(), &[&flat]));
    let c = ok(brute_force_centroid_with(
        &l1,
        &flat,
        Side::FirstArg,
        l1.domain(),
        &opts,
    ))?;
    ensure(c.non_unique, || "L1 flat median not flagged".into())?;
    Ok(format!("kl swap gaps {bias:.4e} (bias), {var:.4e} (variance)"))
}

fn alpha_limits() -> Check {
    let probes: [([f64; 3], [f64; 3]); 3] = [
        ([0.2, 0.5, 0.3], [0.4, 0.4, 0.2]),
        ([0.9, 0.05, 0.6], [0.3, 0.2, 0.7]),
        ([0.1, 0.1, 0.1], [0.8, 0.6, 0.4]),
    ];
    let near_one = ok(alpha(3, 1.0 - 1e-4))?;
    let near_zero = ok(alpha(3, 1e-4))?;
    let mut worst = 0.0f64;
    for (t, y) in probes {
        let a1 = ok(near_one.gbregman_eval(&t, &y))?;
        let a0 = ok(near_zero.gbregman_eval(&t, &y))?;
        close(a1, kl_direct(&t, &y), 1e-3, "alpha -> 1")?;
        close(a0, reverse_kl_direct(&t, &y), 1e-3, "alpha -> 0")?;
        close(a1, alpha_direct(1.0 - 1e-4, &t, &y), 1e-9, "direct alpha formula")?;
        worst = worst
            .max((a1 - kl_direct(&t, &y)).abs())
            .max((a0 - reverse_kl_direct(&t, &y)).abs());
    }
    Ok(format!("worst deviation {worst:.1e}"))
}

fn gaussian_loglik() -> Check {
    let z = 0.0;
    let preds = ens(&[&[-1.0, 1.0], &[1.0, 1.0]], &[1.0, 1.0]);
    let r = ok(gaussian_loglik_decompose(z, &preds))?;
    // direct expectation of -log N(z; m, s), with s the variance
    let nll = |m: f64, s: f64| 0.5 * (2.0 * std::f64::consts::PI * s).ln() + (z - m).powi(2) / (2.0 * s);
    let direct = 0.5 * nll(-1.0, 1.0) + 0.5 * nll(1.0, 1.0);
    close(r.expected_loss, direct, 1e-12, "expected NLL")?;
    close(r.bias + r.variance, direct, 1e-9, "bias + variance")?;
    ensure(r.variance >= 0.0, || format!("variance {}", r.variance))?;
    Ok(format!("E NLL {:.12} = {:.12} + {:.12}", direct, r.bias, r.variance))
}

fn cli_determinism() -> Check {
    let specs = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/specs");
    let mut entries: Vec<_> = ok(fs::read_dir(&specs))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .collect();
    entries.sort();
    let mut runs = 0;
    for path in entries {
        let value: serde_json::Value = ok(serde_json::from_str(&ok(fs::read_to_string(&path))?))?;
        let Some(command) = value.get("command").and_then(|c| c.as_str()) else {
            continue; // ensemble data referenced by a spec
        };
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let dir = ok(tempfile::tempdir())?;
            let o = ok(Command::new(env!("CARGO_BIN_EXE_bvd"))
                .args([command, "--spec"])
                .arg(&path)
                .arg("--out")
                .arg(dir.path())
                .output())?;
            ensure(o.status.success(), || {
                format!("{}: {}", path.display(), String::from_utf8_lossy(&o.stderr))
            })?;
            let mut files: Vec<_> = ok(fs::read_dir(dir.path()))?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .collect();
            files.sort();
            let contents: Vec<(String, Vec<u8>)> = files
                .iter()
                .map(|f| {
                    (
                        f.file_name().unwrap().to_string_lossy().into_owned(),
                        fs::read(f).unwrap(),
                    )
                })
                .collect();
            outputs.push(contents);
        }
        ensure(!outputs[0].is_empty() && outputs[0] == outputs[1], || {
            format!("{} differs between runs", path.display())
        })?;
        runs += 1;
    }
    Ok(format!("{runs} shipped specs byte-identical across runs"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("clean additivity", clean_additivity),
        ("constrained KL decomposition", constrained_kl),
        ("centroid oracle equivalence", centroid_oracles),
        ("non-decomposability witnesses", witnesses),
        ("separability", separability),
        ("duality and reversal", duality_and_reversal),
        ("ordering", ordering),
        ("alpha-divergence limits", alpha_limits),
        ("Gaussian log-likelihood", gaussian_loglik),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = std::time::Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}; {secs:.1}s)", i + 1),
            Err(why) => {
                println!("criterion {:>2} {name}: FAIL ({why}; {secs:.1}s)", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
