//! Transforms checked against a direct O(N^2) evaluation.

use heaping::model::Metric;
use heaping::shape::{BinGrid, WeightedHistogram};
use heaping::spectral::{amplitude_spectrum, dft, hamming};
use proptest::prelude::*;
use rustfft::num_complex::Complex;

fn naive_dft(x: &[f64]) -> Vec<Complex<f64>> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let angle = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
                    Complex::new(v * angle.cos(), v * angle.sin())
                })
                .sum()
        })
        .collect()
}

fn signal() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1e3f64..1e3, 1..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_transform_matches_direct_sum(x in signal()) {
        let scale = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        for (a, b) in dft(&x).iter().zip(naive_dft(&x)) {
            prop_assert!((a - b).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn parseval_holds(x in signal()) {
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = dft(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-9 * time.max(1.0));
    }

    #[test]
    fn transform_is_linear(pair in (1usize..200).prop_flat_map(|n| (proptest::collection::vec(-1e3f64..1e3, n), proptest::collection::vec(-1e3f64..1e3, n))), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let (x, y) = pair;
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let scale = mixed.iter().chain(&x).chain(&y).map(|v| v.abs()).sum::<f64>().max(1.0) * 10.0;
        let (fx, fy) = (dft(&x), dft(&y));
        for (k, z) in dft(&mixed).iter().enumerate() {
            prop_assert!((z - (fx[k] * a + fy[k] * b)).norm() <= 1e-9 * scale);
        }
    }
}

#[test]
fn comb_at_every_integer_shows_at_one_cycle_per_point() {
    let grid = BinGrid::from_width(0.1).unwrap();
    let mut hist = WeightedHistogram::zeros(Metric::Turnout, grid);
    for k in 0..100 {
        hist.weights[k * 10] = 1.0;
    }
    let spec = amplitude_spectrum(&hist);
    assert_eq!(spec.normalization, 1000);
    let at_one = spec.amplitude_at(1.0).unwrap();
    assert!((at_one - 0.1).abs() < 1e-12);
    for (f, a) in spec.frequencies.iter().zip(&spec.amplitudes) {
        let harmonic = (f - f.round()).abs() < 1e-9;
        assert!(harmonic || *a < 1e-12, "leak at {f}: {a}");
    }
}

#[test]
fn hamming_window_matches_closed_form() {
    let w = hamming(150);
    assert_eq!(w.len(), 150);
    assert!((w[0] - 0.08).abs() < 1e-12 && (w[149] - 0.08).abs() < 1e-12);
    for (i, v) in w.iter().enumerate() {
        assert!((v - w[149 - i]).abs() < 1e-12);
    }
}
