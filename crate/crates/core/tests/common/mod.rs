#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use lagphase::phasepoly::PhaseSpec;
use lagphase::xiquant::{admissibility, level_set_from_weights, AdmissibilityClass, EigenVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An admissible `(Θ, a, β)` with `n ≤ 6`, supercritical `Θ` and `m > 2`.
#[derive(Debug, Clone)]
pub struct Case {
    pub spec: PhaseSpec,
    pub a: EigenVector,
    pub beta: f64,
    pub m: f64,
}

pub fn admissible_cases(seed: u64, count: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.gen_range(3..=6);
        let lo = (n as f64 - 2.0) * FRAC_PI_2;
        let theta = lo + rng.gen_range(0.02..0.95) * 2.0 * FRAC_PI_2;
        let Ok(spec) = PhaseSpec::new(n, theta) else { continue };
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.6..1.0)).collect();
        let Ok(a) = level_set_from_weights(&weights, &spec) else { continue };
        if a.as_slice().iter().any(|v| *v > 1e3) {
            continue;
        }
        let adm = admissibility(a.as_slice(), &spec);
        if adm.class != AdmissibilityClass::InA || adm.m.unwrap() < 2.05 {
            continue;
        }
        let beta = rng.gen_range(1.1..10.0);
        out.push(Case { spec, a, beta, m: adm.m.unwrap() });
    }
    out
}

/// `count` log-spaced radii in `[lo, hi]`, both ends included.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == count => hi,
            _ => (l + (h - l) * i as f64 / (count - 1) as f64).exp(),
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
