//! Distributional checks of the path generator and the Itô sums, with
//! tolerances of about four standard errors.

use brownderiv::{
    build_semimartingale, derive_stream, exponential_martingale, ito_integral, make_grid,
    sample_brownian, stats::mean, PathSeed, ProcessSpec, RealPath,
};
use rayon::prelude::*;

/// Complementary error function, fractional error below 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398
                                + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[test]
fn erfc_reference_values() {
    assert!((erfc(0.0) - 1.0).abs() < 1e-7);
    assert!((erfc(1.0) - 0.157_299_207_050_285_1).abs() < 1e-7);
    assert!((normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-7);
}

#[test]
fn increments_pass_kolmogorov_smirnov() {
    let g = make_grid(1.0, 10_000).unwrap();
    let b = sample_brownian(&g, PathSeed::new(77));
    let sd = g.dt().sqrt();
    let mut z: Vec<f64> = b.values().windows(2).map(|w| (w[1] - w[0]) / sd).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value.
    assert!(d < 1.63 / n.sqrt(), "KS statistic {d}");
}

fn terminal_values(root: u64, paths: usize, n: usize) -> Vec<f64> {
    let g = make_grid(1.0, n).unwrap();
    (0..paths as u64)
        .into_par_iter()
        .map(|k| sample_brownian(&g, derive_stream(PathSeed::new(root), k).unwrap()).last())
        .collect()
}

#[test]
fn terminal_value_is_standard_normal_in_moments() {
    let xs = terminal_values(5, 10_000, 100);
    let m = mean(&xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    assert!(m.abs() < 0.04, "mean {m}");
    assert!((var - 1.0).abs() < 0.06, "variance {var}");
}

#[test]
fn neighbouring_streams_are_uncorrelated() {
    let g = make_grid(1.0, 100).unwrap();
    let pairs: Vec<(f64, f64)> = (0..10_000u64)
        .into_par_iter()
        .map(|k| {
            let a = sample_brownian(&g, derive_stream(PathSeed::new(6), 2 * k).unwrap());
            let b = sample_brownian(&g, derive_stream(PathSeed::new(6), 2 * k + 1).unwrap());
            (a.last(), b.last())
        })
        .collect();
    let n = pairs.len() as f64;
    let (ma, mb) = (
        pairs.iter().map(|p| p.0).sum::<f64>() / n,
        pairs.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let cov = pairs.iter().map(|(a, b)| (a - ma) * (b - mb)).sum::<f64>() / n;
    let va = pairs.iter().map(|(a, _)| (a - ma).powi(2)).sum::<f64>() / n;
    let vb = pairs.iter().map(|(_, b)| (b - mb).powi(2)).sum::<f64>() / n;
    let rho = cov / (va * vb).sqrt();
    assert!(rho.abs() < 0.04, "correlation {rho}");
}

#[test]
fn ito_isometry() {
    let g = make_grid(1.0, 500).unwrap();
    let sq: Vec<f64> = (0..4_000u64)
        .into_par_iter()
        .map(|k| {
            let b = sample_brownian(&g, derive_stream(PathSeed::new(8), k).unwrap());
            ito_integral(&b, &b).unwrap().last().powi(2)
        })
        .collect();
    // E (∫B dB)^2 = ∫ E B^2 dt = 1/2.
    let m = mean(&sq);
    assert!((m - 0.5).abs() < 0.12, "{m}");
}

#[test]
fn exponential_martingale_has_unit_mean() {
    let g = make_grid(1.0, 500).unwrap();
    let x = RealPath::constant(g, 1.0).unwrap();
    let ends: Vec<f64> = (0..4_000u64)
        .into_par_iter()
        .map(|k| {
            let b = sample_brownian(&g, derive_stream(PathSeed::new(9), k).unwrap());
            exponential_martingale(&x, &b).unwrap().last()
        })
        .collect();
    let m = mean(&ends);
    assert!((m - 1.0).abs() < 0.08, "{m}");
}

#[test]
fn martingale_part_has_zero_mean() {
    let g = make_grid(1.0, 500).unwrap();
    let x = ProcessSpec::of_brownian("cosB", true, |t, b| t.cos() * b);
    let ends: Vec<f64> = (0..4_000u64)
        .into_par_iter()
        .map(|k| {
            let b = sample_brownian(&g, derive_stream(PathSeed::new(10), k).unwrap());
            build_semimartingale(0.0, &ProcessSpec::zero(), &x, &b)
                .unwrap()
                .m
                .last()
        })
        .collect();
    assert!(mean(&ends).abs() < 0.05, "{}", mean(&ends));
}
