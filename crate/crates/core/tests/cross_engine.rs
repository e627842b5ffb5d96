use mipt_core::freefermion::{build_modes, survival_large_l, FreeFermionOptions, OverlapSeries};
use mipt_core::model::{apply_dense, dense_evolution_operator, initial_state};
use mipt_core::protocol::run_protocol;
use mipt_core::summation::PrecisionMode;
use mipt_core::{Complex64, ModelParams};
use proptest::prelude::*;

/// Survival from explicit dense matrices: evolve, drop the |I> component.
fn dense_survival(p: &ModelParams, steps: usize) -> Vec<f64> {
    let u = dense_evolution_operator(p, p.tau()).unwrap();
    let mut psi = initial_state(p).unwrap();
    (0..steps)
        .map(|_| {
            psi = apply_dense(&u, &psi).unwrap();
            psi.amplitudes_mut()[0] = Complex64::new(0.0, 0.0);
            psi.norm_sqr()
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Return amplitude at h = 0 by counting domain walls in the x basis.
fn ising_return_amplitude(l: usize, t: f64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for d in (0..=l).step_by(2) {
        let energy = -(l as f64 - 2.0 * d as f64);
        sum += 2.0 * binomial(l, d) * Complex64::new(0.0, -energy * t).exp();
    }
    sum / 2f64.powi(l as i32)
}

#[test]
fn dense_reference_matches_both_engines() {
    for &h in &[0.0, 0.5, 1.0, 2.0] {
        for &tau in &[0.1, 0.7] {
            let p = ModelParams::new(6, h, tau).unwrap();
            let reference = dense_survival(&p, 30);
            let sv = run_protocol(&p, 30, 1e-12).unwrap().survival;
            let ff = survival_large_l(&p, 30, &FreeFermionOptions::default()).unwrap().survival;
            for n in 0..30 {
                assert!((sv[n] - reference[n]).abs() < 1e-10, "sv h={h} tau={tau} n={n}");
                assert!((ff[n] - reference[n]).abs() < 1e-10, "ff h={h} tau={tau} n={n}");
            }
        }
    }
}

#[test]
fn zero_field_overlaps_count_domain_walls() {
    for &l in &[4, 10, 50] {
        let tau = 0.37;
        let p = ModelParams::new(l, 0.0, tau).unwrap();
        let f = OverlapSeries::compute(&build_modes(&p), tau, 12);
        for n in 0..=12 {
            let exact = ising_return_amplitude(l, n as f64 * tau);
            assert!((f.get(n as i64) - exact).norm() < 1e-12, "L={l} n={n}");
        }
    }
}

#[test]
fn four_sites_at_zero_field() {
    // f(t) = 3/4 + cos(4t)/4 for L = 4.
    for &tau in &[0.2, 0.9] {
        let p = ModelParams::new(4, 0.0, tau).unwrap();
        let f1 = 0.75 + 0.25 * (4.0 * tau).cos();
        let sv = run_protocol(&p, 1, 1e-12).unwrap().survival[0];
        assert!((sv - (1.0 - f1 * f1)).abs() < 1e-12);
    }
    // At tau = pi/2 the state returns exactly and is detected at once.
    let p = ModelParams::new(4, 0.0, std::f64::consts::FRAC_PI_2).unwrap();
    let run = survival_large_l(&p, 5, &FreeFermionOptions::default()).unwrap();
    assert!(run.survival.iter().all(|r| r.abs() < 1e-12));
}

#[test]
fn precision_modes_agree_on_a_long_run() {
    let p = ModelParams::new(100, 1.5, 0.3).unwrap();
    let runs: Vec<Vec<f64>> = [PrecisionMode::Standard, PrecisionMode::Compensated, PrecisionMode::Extended]
        .iter()
        .map(|&precision| {
            let opts = FreeFermionOptions {
                precision,
                ..Default::default()
            };
            survival_large_l(&p, 1000, &opts).unwrap().survival
        })
        .collect();
    for ((standard, compensated), extended) in runs[0].iter().zip(&runs[1]).zip(&runs[2]) {
        assert!((standard - extended).abs() < 1e-9);
        assert!((compensated - extended).abs() < 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engines_agree(half in 2usize..=5, h in 0.0f64..2.5, tau in 0.01f64..1.5) {
        let p = ModelParams::new(2 * half, h, tau).unwrap();
        let sv = run_protocol(&p, 25, 1e-12).unwrap();
        let ff = survival_large_l(&p, 25, &FreeFermionOptions::default()).unwrap();
        for (a, b) in sv.survival.iter().zip(&ff.survival) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
        for (a, b) in sv.first_detection.iter().zip(&ff.first_detection) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }
}
