//! Derivative-free minimization.

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop once every vertex lies within `xtol` (∞-norm) of the best one.
    pub xtol: f64,
    /// Extra runs restarted from the best vertex with the initial step.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iter: 4000,
            xtol: 1e-11,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimizes `f` from `x0` with an axis-aligned initial simplex of size `step`.
///
/// `NaN` values are treated as `+∞`, so infeasible regions can be encoded as
/// `f64::INFINITY`.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best = (x0.to_vec(), eval(x0, &mut evals));
    for _ in 0..=opts.restarts {
        let (x, v) = run(&eval, &best.0, step, opts, &mut evals);
        let improved = v < best.1;
        if v <= best.1 {
            best = (x, v);
        }
        if !improved {
            break;
        }
    }
    Minimum {
        x: best.0,
        value: best.1,
        evaluations: evals,
    }
}

fn run<E>(eval: &E, x0: &[f64], step: &[f64], opts: &NelderMeadOptions, evals: &mut usize) -> (Vec<f64>, f64)
where
    E: Fn(&[f64], &mut usize) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, evals)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let mut v = eval(&x, evals);
        if !v.is_finite() {
            // Try the opposite direction when the first vertex is infeasible.
            let mut alt = x0.to_vec();
            alt[i] -= step[i];
            let va = eval(&alt, evals);
            if va < v {
                x = alt;
                v = va;
            }
        }
        simplex.push((x, v));
    }

    let combine =
        |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect() };

    for _ in 0..opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread <= opts.xtol {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = combine(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected, evals);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded, evals);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let c = combine(&centroid, &worst.0, -0.5);
            let v = eval(&c, evals);
            (c, v)
        } else {
            let c = combine(&centroid, &worst.0, 0.5);
            let v = eval(&c, evals);
            (c, v)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = combine(&best, &vertex.0, 0.5);
            let v = eval(&x, evals);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &[0.1, 0.1], &NelderMeadOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn respects_infinite_barrier() {
        let f = |x: &[f64]| {
            if x[0] < 0.5 {
                f64::INFINITY
            } else {
                (x[0] - 0.2).powi(2)
            }
        };
        let m = nelder_mead(f, &[0.9], &[0.1], &NelderMeadOptions::default());
        assert!((m.x[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_kink() {
        let f = |x: &[f64]| (x[0] - 0.3).abs();
        let m = nelder_mead(f, &[2.0], &[0.05], &NelderMeadOptions::default());
        assert!((m.x[0] - 0.3).abs() < 1e-10);
    }
}
