#![allow(dead_code)]

use mjp_core::simulate::{evidence_from_symbols, EmissionModel};
use mjp_core::{Evidence, RateMatrix, UniformizedKernel};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn sym2() -> RateMatrix {
    RateMatrix::new(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap()
}

pub fn asym2() -> RateMatrix {
    RateMatrix::new(&[vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap()
}

pub fn q3() -> RateMatrix {
    RateMatrix::new(&[
        vec![-1.0, 0.6, 0.4],
        vec![0.5, -1.2, 0.7],
        vec![0.3, 0.9, -1.2],
    ])
    .unwrap()
}

pub const NU3: [f64; 3] = [0.6, 0.3, 0.1];
pub const WINDOW3: (f64, f64) = (0.0, 4.0);
pub const PROBES3: [f64; 3] = [1.0, 2.0, 3.0];

/// Four noisy observations of the three-state process on [0, 4].
pub fn evidence3() -> Evidence {
    let em = EmissionModel::new(&[
        vec![0.8, 0.1, 0.1],
        vec![0.1, 0.8, 0.1],
        vec![0.1, 0.1, 0.8],
    ])
    .unwrap();
    evidence_from_symbols(&[0.5, 1.5, 2.5, 3.5], &[0, 2, 2, 1], &em).unwrap()
}

/// Brute-force `E(|J| | conditions)` over all `size^(n+1)` paths.
pub fn enumerate_expected_jumps(
    kernel: &UniformizedKernel,
    nu: &[f64],
    n: usize,
    conditioning: &[(usize, usize)],
) -> Option<f64> {
    let size = kernel.size();
    let mut path = vec![0usize; n + 1];
    let (mut mass, mut weighted) = (0.0, 0.0);
    let total = size.pow((n + 1) as u32);
    for code in 0..total {
        let mut c = code;
        for s in path.iter_mut() {
            *s = c % size;
            c /= size;
        }
        if conditioning.iter().any(|&(i, s)| path[i] != s) {
            continue;
        }
        let mut w = nu[path[0]];
        let mut jumps = 0;
        for i in 1..=n {
            w *= kernel.prob(path[i - 1], path[i]);
            jumps += usize::from(path[i - 1] != path[i]);
        }
        mass += w;
        weighted += w * jumps as f64;
    }
    (mass > 0.0).then(|| weighted / mass)
}

/// Chi-square test of homogeneity for two count vectors; returns the p-value.
pub fn chi_square_two_sample(a: &[usize], b: &[usize]) -> f64 {
    let na: usize = a.iter().sum();
    let nb: usize = b.iter().sum();
    let n = (na + nb) as f64;
    let mut stat = 0.0;
    let mut cells = 0;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cells += 1;
        let ea = col * na as f64 / n;
        let eb = col * nb as f64 / n;
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let df = (cells - 1).max(1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Asymptotic Kolmogorov-Smirnov p-value of a sample against a continuous CDF.
pub fn ks_p_value(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}
