//! Nelder–Mead simplex search (maximization), tolerant of flat regions.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop when the largest vertex distance from the best vertex drops below this.
    pub diameter_tol: f64,
    pub max_iter: usize,
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            diameter_tol: 1e-3,
            max_iter: 200,
            max_evals: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Stopped on the evaluation cap rather than on tolerance or iteration count.
    pub budget_exhausted: bool,
}

/// Maximizes `f` starting from the simplex `initial` (`dim + 1` vertices).
pub fn maximize(
    mut f: impl FnMut(&[f64]) -> f64,
    initial: Vec<Vec<f64>>,
    opts: &NelderMeadOptions,
) -> NelderMeadResult {
    let n = initial.len().saturating_sub(1);
    assert!(n >= 1 && initial.iter().all(|v| v.len() == n), "simplex needs dim + 1 vertices");
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for v in initial {
        if evals >= opts.max_evals {
            break;
        }
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        // Descending value; lexicographic order on the point breaks ties.
        s.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| lex_cmp(&a.0, &b.0)));
    };
    if simplex.len() < n + 1 {
        order(&mut simplex);
        let (best, value) = simplex[0].clone();
        return NelderMeadResult {
            best,
            value,
            iterations: 0,
            evaluations: evals,
            budget_exhausted: true,
        };
    }

    let mut iterations = 0;
    let mut budget_exhausted = false;
    loop {
        order(&mut simplex);
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| dist(v, &simplex[0].0))
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol || iterations >= opts.max_iter {
            break;
        }
        if evals >= opts.max_evals {
            budget_exhausted = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr > simplex[0].1 {
            if evals >= opts.max_evals {
                simplex[n] = (xr, fr);
                continue;
            }
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr > simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        if evals >= opts.max_evals {
            budget_exhausted = true;
            break;
        }
        // Contraction: outside if the reflection beat the worst vertex, inside otherwise.
        let outside = fr > worst.1;
        let xc = along(if outside { 0.5 } else { -0.5 });
        let fc = eval(&xc, &mut evals);
        let accept = if outside { fc >= fr } else { fc > worst.1 };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if evals >= opts.max_evals {
                budget_exhausted = true;
                break;
            }
            let x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            let fx = eval(&x, &mut evals);
            *vertex = (x, fx);
        }
        if budget_exhausted {
            break;
        }
    }
    order(&mut simplex);
    let (best, value) = simplex.swap_remove(0);
    NelderMeadResult {
        best,
        value,
        iterations,
        evaluations: evals,
        budget_exhausted,
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Axis-aligned simplex `x0, x0 + step * e_i`.
pub fn axis_simplex(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut out = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_peak() {
        let r = maximize(
            |x| -(x[0] - 1.0).powi(2) - 2.0 * (x[1] + 0.5).powi(2),
            axis_simplex(&[0.0, 0.0], 1.0),
            &NelderMeadOptions {
                diameter_tol: 1e-8,
                max_iter: 1000,
                ..Default::default()
            },
        );
        assert!((r.best[0] - 1.0).abs() < 1e-4 && (r.best[1] + 0.5).abs() < 1e-4);
        assert!(!r.budget_exhausted);
    }

    #[test]
    fn flat_regions_do_not_panic() {
        let r = maximize(
            |x| if x[0] > 2.0 { 1.0 } else { 0.0 },
            axis_simplex(&[0.0], 1.0),
            &NelderMeadOptions::default(),
        );
        assert!(r.value >= 0.0);
    }

    #[test]
    fn respects_budget() {
        let mut calls = 0;
        let r = maximize(
            |x| {
                calls += 1;
                -(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
            },
            axis_simplex(&[5.0, 5.0, 5.0], 1.0),
            &NelderMeadOptions {
                diameter_tol: 0.0,
                max_iter: 10_000,
                max_evals: 25,
            },
        );
        assert!(r.budget_exhausted);
        assert!(r.evaluations <= 25);
        assert_eq!(calls, r.evaluations);
    }
}
