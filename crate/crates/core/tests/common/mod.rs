//! Helpers shared by the integration tests.
#![allow(dead_code)]

use spb::ftrl::ProbVector;

/// `<L, p> - beta H_alpha(p) - beta_bar H_{1-alpha}(p)` computed directly.
pub fn ftrl_objective(l: &[f64], p: &[f64], alpha: f64, beta: f64, beta_bar: f64) -> f64 {
    let h = |a: f64| p.iter().map(|&x| x.powf(a) - x).sum::<f64>() / a;
    let lin: f64 = l.iter().zip(p).map(|(a, b)| a * b).sum();
    lin - beta * h(alpha) - beta_bar * h(1.0 - alpha)
}

/// Brute-force minimizer of the FTRL objective for `k` in `{2, 3}`:
/// ternary search on the segment for `k = 2`; for `k = 3` a 1/200 grid over
/// the triangle followed by shrinking local grids.
pub fn grid_argmin(l: &[f64], alpha: f64, beta: f64, beta_bar: f64) -> Vec<f64> {
    let f = |p: &[f64]| ftrl_objective(l, p, alpha, beta, beta_bar);
    match l.len() {
        2 => {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if f(&[m1, 1.0 - m1]) <= f(&[m2, 1.0 - m2]) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let x = 0.5 * (lo + hi);
            vec![x, 1.0 - x]
        }
        3 => {
            let eval = |a: f64, b: f64| {
                if a < 0.0 || b < 0.0 || a + b > 1.0 {
                    f64::INFINITY
                } else {
                    f(&[a, b, (1.0 - a - b).max(0.0)])
                }
            };
            let n = 200;
            let mut best = (1.0 / 3.0, 1.0 / 3.0);
            let mut best_v = eval(best.0, best.1);
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
                    let v = eval(a, b);
                    if v < best_v {
                        best_v = v;
                        best = (a, b);
                    }
                }
            }
            let mut step = 1.0 / n as f64;
            while step > 1e-13 {
                let center = best;
                for i in -10..=10 {
                    for j in -10..=10 {
                        let a = center.0 + i as f64 * step / 5.0;
                        let b = center.1 + j as f64 * step / 5.0;
                        let v = eval(a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
                        if v < best_v {
                            best_v = v;
                            best = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
                        }
                    }
                }
                step /= 5.0;
            }
            vec![best.0, best.1, (1.0 - best.0 - best.1).max(0.0)]
        }
        k => panic!("grid oracle supports k in {{2, 3}}, got {k}"),
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Strictly positive probability vector from raw weights in `(0, 1]`.
pub fn prob(weights: &[f64]) -> ProbVector {
    ProbVector::normalized(weights.to_vec()).unwrap()
}
