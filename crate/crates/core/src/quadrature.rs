//! Composite Gauss-Legendre integration.

use std::sync::OnceLock;

const ORDER: usize = 20;
const MAX_PANEL: f64 = 0.5;

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrates `f` over the finite interval `[a, b]`, splitting at every
/// breakpoint inside it and into panels no wider than 0.5.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breakpoints: &[f64]) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&c| c > a && c < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    let (nodes, weights) = rule();
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let panels = ((hi - lo) / MAX_PANEL).ceil().max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let pa = lo + p as f64 * h;
            let half = 0.5 * h;
            let mid = pa + half;
            let mut s = 0.0;
            for (x, w) in nodes.iter().zip(weights) {
                s += w * f(mid + half * x);
            }
            total += half * s;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_and_gaussians() {
        assert_relative_eq!(integrate(|x| x * x, 0.0, 3.0, &[]), 9.0, max_relative = 1e-13);
        let g = integrate(crate::stats::normal_pdf, -10.0, 10.0, &[]);
        assert_relative_eq!(g, 1.0, max_relative = 1e-13);
        let step = integrate(|x| if x <= 1.0 { 1.0 } else { 2.0 }, 0.0, 2.0, &[1.0]);
        assert_relative_eq!(step, 3.0, max_relative = 1e-13);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 20] {
            let (_, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-13);
        }
    }
}
