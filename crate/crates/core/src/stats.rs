//! Standard normal helpers and the truncated-normal sampler used by every
//! data-augmentation step.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.918_938_533_204_672_8
}

pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }
}

/// Upper tail `1 - Phi(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
    }
}

/// `P(a < Z < b)` for a standard normal, accurate in both tails.
pub fn normal_interval_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a > 0.0 {
        (normal_sf(a) - normal_sf(b)).max(0.0)
    } else {
        (normal_cdf(b) - normal_cdf(a)).max(0.0)
    }
}

/// Draws from `N(mu, 1)` restricted to the open interval `(lower, upper)`.
///
/// Either bound may be infinite. Far-tail intervals use exponential or
/// uniform rejection, so the sampler stays exact at any distance from `mu`.
pub fn truncated_normal_draw<R: Rng + ?Sized>(
    mu: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64> {
    if mu.is_nan() || lower.is_nan() || upper.is_nan() || !mu.is_finite() {
        return Err(Error::InvalidInput(format!(
            "truncated normal with mu={mu}, bounds=({lower}, {upper})"
        )));
    }
    if lower >= upper {
        return Err(Error::InvalidInput(format!(
            "truncation bounds must satisfy lower < upper, got ({lower}, {upper})"
        )));
    }
    let a = lower - mu;
    let b = upper - mu;
    for _ in 0..1_000_000 {
        let z = standard_truncated(a, b, rng);
        let x = mu + z;
        if x > lower && x < upper {
            return Ok(x);
        }
    }
    let mid = 0.5 * (lower + upper);
    if mid > lower && mid < upper {
        Ok(mid)
    } else {
        Err(Error::Invariant(format!(
            "no representable value strictly inside ({lower}, {upper})"
        )))
    }
}

fn standard_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return rng.sample(StandardNormal);
    }
    if a > 0.0 {
        return right_tail(a, b, rng);
    }
    if b < 0.0 {
        return -right_tail(-b, -a, rng);
    }
    // Interval straddles zero.
    if normal_interval_mass(a, b) >= 0.3 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z > a && z < b {
                return z;
            }
        }
    }
    loop {
        let z = a + (b - a) * rng.random::<f64>();
        if rng.random::<f64>() < (-0.5 * z * z).exp() {
            return z;
        }
    }
}

/// `a > 0`: draw from the standard normal restricted to `(a, b)`.
fn right_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b.is_finite() && a * (b - a) < 1.0 {
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() < (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = rng.sample(Exp1);
        let z = a + e / lambda;
        if z >= b {
            continue;
        }
        let d = z - lambda;
        if rng.random::<f64>() < (-0.5 * d * d).exp() {
            return z;
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}
