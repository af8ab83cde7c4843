//! Monte-Carlo checks of the samplers against their covariance kernels and
//! closed-form second-order theory. Seeds are fixed; the generators are
//! platform-stable, so these are deterministic tests.

mod common;

use common::*;
use mrw::model::{cascade_covariance, fgn_covariance, ModelParams};
use mrw::simulate::{
    sample_log_volatility, sample_log_volatility_trunc, simulate_damped_mrw, simulate_fgn,
    simulate_fractional_mrw, simulate_mrw, stationary_burn_in, FgnMethod,
};

#[test]
fn latent_moments_match_the_kernel() {
    let p = ModelParams::standard(0.7, 0.18, 26.0, 1.0).unwrap();
    let g0 = cascade_covariance(0, &p).unwrap();
    let g1 = cascade_covariance(1, &p).unwrap();
    let n = 5000;
    let reps = 50;
    let mut lag1 = Vec::with_capacity(reps);
    let mut var = Vec::with_capacity(reps);
    for seed in 0..reps as u64 {
        let lp = sample_log_volatility(n, &p, seed).unwrap();
        let h = &lp.h;
        lag1.push((0..n - 1).map(|t| h[t] * h[t + 1]).sum::<f64>() / (n - 1) as f64);
        var.push(h.iter().map(|v| v * v).sum::<f64>() / n as f64);
        // M = c e^h by construction
        for (hk, mk) in h.iter().zip(&lp.m) {
            assert!((mk - (-g0 / 2.0).exp() * hk.exp()).abs() < 1e-12);
        }
    }
    let se1 = (sample_var(&lag1) / reps as f64).sqrt();
    assert!(
        (mean(&lag1) - g1).abs() < 3.0 * se1,
        "lag-1 {} vs gamma(1) {g1} (se {se1})",
        mean(&lag1)
    );
    let pooled_var = mean(&var);
    assert!((pooled_var - g0).abs() / g0 < 0.05, "var {pooled_var} vs gamma(0) {g0}");
}

#[test]
fn long_path_ar_recursion_matches_kernel_moments() {
    // n > 4096 takes the truncated-AR route
    let p = ModelParams::standard(0.7, 0.18, 26.0, 1.0).unwrap();
    let g0 = cascade_covariance(0, &p).unwrap();
    let n = 8192;
    let mut vars = Vec::new();
    for seed in 0..12u64 {
        let lp = sample_log_volatility_trunc(n, &p, seed, 64).unwrap();
        vars.push(lp.h.iter().map(|v| v * v).sum::<f64>() / n as f64);
    }
    assert!((mean(&vars) - g0).abs() / g0 < 0.05, "{} vs {g0}", mean(&vars));
}

#[test]
fn fgn_lag_one_autocorrelation() {
    let n = 1 << 14;
    let mut acfs = Vec::new();
    for seed in 0..10u64 {
        let s = simulate_fgn(n, 0.4, seed).unwrap();
        assert_eq!(s.method, FgnMethod::CirculantEmbedding);
        acfs.push(sample_acf(&s.values, 1)[1]);
    }
    let target = fgn_covariance(1, 0.4).unwrap();
    assert!((mean(&acfs) - target).abs() < 0.02, "{} vs {target}", mean(&acfs));
}

#[test]
fn fgn_partial_sum_variance_scales_as_2h() {
    // Var(B_H(m)) = m^{2H}: block sums over an ensemble, log-log regression
    let hurst = 0.4;
    let n = 4096;
    let blocks: Vec<usize> = vec![8, 16, 32, 64, 128, 256, 512];
    let mut log_m = Vec::new();
    let mut log_v = Vec::new();
    for &m in &blocks {
        let mut sums = Vec::new();
        for seed in 0..12u64 {
            let s = simulate_fgn(n, hurst, 1000 + seed).unwrap();
            for chunk in s.values.chunks_exact(m) {
                sums.push(chunk.iter().sum::<f64>());
            }
        }
        log_m.push((m as f64).ln());
        log_v.push(sample_var(&sums).ln());
    }
    let slope = ols_slope(&log_m, &log_v);
    assert!((slope - 2.0 * hurst).abs() < 0.05, "slope {slope} vs {}", 2.0 * hurst);
}

#[test]
fn mrw_return_moments_and_clustering() {
    let p = ModelParams::standard(0.7, 0.18, 26.0, 1.0).unwrap();
    let n = 4096;
    let reps = 20;
    let mut vars = Vec::new();
    let mut worst_acf = Vec::new();
    let mut abs_acf1 = Vec::new();
    for seed in 0..reps as u64 {
        let sim = simulate_mrw(n, &p, seed).unwrap();
        vars.push(sample_var(&sim.returns));
        let r = sample_acf(&sim.returns, 10);
        worst_acf.push(r[1..].iter().fold(0.0f64, |a, v| a.max(v.abs())));
        let a: Vec<f64> = sim.returns.iter().map(|v| v.abs()).collect();
        abs_acf1.push(sample_acf(&a, 1)[1]);
    }
    // E[M] = 1 so Var(x) = sigma^2; use the empirical SE across replicates
    let se = (sample_var(&vars) / reps as f64).sqrt();
    let target = 0.18 * 0.18;
    assert!((mean(&vars) - target).abs() < 3.0 * se, "{} vs {target} (se {se})", mean(&vars));
    // returns uncorrelated: median worst lag within 3/sqrt(n)
    let mut w = worst_acf.clone();
    assert!(median(&mut w) < 3.0 / (n as f64).sqrt() * 1.5);
    // |x| clustering at lag 1 is clearly positive for lambda = 0.7
    let mut a1 = abs_acf1.clone();
    assert!(median(&mut a1) > 0.1, "abs acf1 median {}", median(&mut a1));
    // and absent for lambda = 0
    let p0 = ModelParams::standard(0.0, 0.18, 26.0, 1.0).unwrap();
    let sim = simulate_mrw(n, &p0, 7).unwrap();
    let a: Vec<f64> = sim.returns.iter().map(|v| v.abs()).collect();
    assert!(sample_acf(&a, 1)[1].abs() < 3.0 / (n as f64).sqrt());
}

#[test]
fn damped_lambda_zero_is_classical_ar1() {
    let nu_inv = 22.0;
    let p = ModelParams::damped_from_nu_inv(0.0, 0.18, 26.0, nu_inv, 1.0).unwrap();
    let phi = p.phi().unwrap();
    let n = 8192;
    let burn = stationary_burn_in(&p);
    assert!((burn as f64 - 10.0 * nu_inv).abs() <= 1.0, "burn-in {burn}");
    let reps = 16;
    let mut acfs: Vec<Vec<f64>> = Vec::new();
    let mut vars = Vec::new();
    for seed in 0..reps as u64 {
        let sim = simulate_damped_mrw(n + burn, &p, seed).unwrap();
        let y = &sim.levels[burn..];
        acfs.push(sample_acf(y, 5));
        vars.push(sample_var(y));
    }
    // stationary variance sigma^2/(1-phi^2) within 10%
    let target_var = 0.18 * 0.18 / (1.0 - phi * phi);
    assert!(
        (mean(&vars) - target_var).abs() / target_var < 0.10,
        "{} vs {target_var}",
        mean(&vars)
    );
    // ACF at lags 1..5 matches phi^k within 3 ensemble standard errors
    for k in 1..=5 {
        let vals: Vec<f64> = acfs.iter().map(|r| r[k]).collect();
        let se = (sample_var(&vals) / reps as f64).sqrt();
        let target = phi.powi(k as i32);
        assert!(
            (mean(&vals) - target).abs() < 3.0 * se.max(2e-3),
            "lag {k}: {} vs {target} (se {se})",
            mean(&vals)
        );
    }
}

#[test]
fn damped_return_acf_decays_at_rate_phi() {
    // sample ACF of the increments of an AR(1): negative, with consecutive
    // lags in ratio phi, matching the theoretical return ACF shape
    let p = ModelParams::damped_from_nu_inv(0.0, 0.18, 26.0, 20.0, 1.0).unwrap();
    let phi = p.phi().unwrap();
    let reps = 24;
    let n = 1 << 13;
    let mut acf1 = Vec::new();
    let mut ratios = Vec::new();
    for seed in 0..reps as u64 {
        let sim = simulate_damped_mrw(n, &p, 300 + seed).unwrap();
        let r = sample_acf(&sim.returns, 3);
        acf1.push(r[1]);
        ratios.push(r[2] / r[1]);
    }
    // sign matches theoretical_return_acf
    let theory = mrw::model::theoretical_return_acf(1, &p).unwrap();
    assert!(theory < 0.0);
    assert!(mean(&acf1) < 0.0, "acf(1) {}", mean(&acf1));
    let se = (sample_var(&ratios) / reps as f64).sqrt();
    assert!(
        (mean(&ratios) - phi).abs() < 3.0 * se.max(5e-3),
        "ratio {} vs phi {phi}",
        mean(&ratios)
    );
    // and the theoretical curve itself decays at exactly exp(-nu dt)
    let t2 = mrw::model::theoretical_return_acf(2, &p).unwrap();
    assert!((t2 / theory - (-(1.0 - phi)).exp()).abs() < 1e-12);
}

#[test]
fn iid_gaussian_acf_is_flat() {
    let p = ModelParams::standard(0.0, 1.0, 26.0, 1.0).unwrap();
    let n = 4096;
    let sim = simulate_mrw(n, &p, 5).unwrap();
    let r = sample_acf(&sim.returns, 20);
    for k in 1..=20 {
        assert!(r[k].abs() < 3.0 / (n as f64).sqrt() * 1.5, "lag {k}: {}", r[k]);
    }
}

#[test]
fn damped_spectrum_flattens_like_a_lorentzian() {
    // S(f) ratio between a low and a high frequency matches the AR(1)
    // (Lorentzian) prediction within a factor of 2
    let nu_inv = 20.0;
    let p = ModelParams::damped_from_nu_inv(0.7, 0.18, 26.0, nu_inv, 1.0).unwrap();
    let phi = p.phi().unwrap();
    let n = 4096;
    let f_low = 1.0 / (2.0 * std::f64::consts::PI * nu_inv) / 4.0;
    let f_high = 8.0 / (2.0 * std::f64::consts::PI * nu_inv);
    let mut ratios = Vec::new();
    for seed in 0..20u64 {
        let sim = simulate_damped_mrw(n, &p, seed).unwrap();
        let (freqs, power) = mrw::analysis::periodogram(&sim.levels).unwrap();
        let pick = |f0: f64| -> f64 {
            // average a small neighborhood to tame periodogram noise
            let lo = f0 * 0.75;
            let hi = f0 * 1.33;
            let mut acc = 0.0;
            let mut cnt = 0;
            for (f, s) in freqs.iter().zip(&power) {
                if *f >= lo && *f <= hi {
                    acc += s;
                    cnt += 1;
                }
            }
            acc / cnt as f64
        };
        ratios.push(pick(f_low) / pick(f_high));
    }
    let predicted = ar1_spectrum(f_low, phi, 0.18) / ar1_spectrum(f_high, phi, 0.18);
    let mut r = ratios.clone();
    let got = median(&mut r);
    assert!(
        got / predicted < 2.0 && predicted / got < 2.0,
        "ratio {got} vs lorentzian {predicted}"
    );
}

#[test]
fn fractional_increments_reproduce_the_fgn_kernel() {
    // lambda = 0, H = 0.4: increments are sigma * fGn exactly
    let p = ModelParams::fractional(0.0, 0.2, 101.0, 0.4, 1.0).unwrap();
    let n = 8192;
    let reps = 48;
    let s2 = 0.2 * 0.2;
    // 4 ensemble standard errors: six lags are tested simultaneously
    for lag in 0..=5usize {
        let mut covs = Vec::new();
        for seed in 0..reps as u64 {
            let sim = simulate_fractional_mrw(n, &p, seed).unwrap();
            let x = &sim.returns;
            let m = mean(x);
            covs.push(
                (0..n - lag).map(|t| (x[t] - m) * (x[t + lag] - m)).sum::<f64>()
                    / (n - lag) as f64,
            );
        }
        let target = s2 * fgn_covariance(lag, 0.4).unwrap();
        let se = (sample_var(&covs) / reps as f64).sqrt();
        assert!(
            (mean(&covs) - target).abs() < 4.0 * se.max(1e-5),
            "lag {lag}: {} vs {target}",
            mean(&covs)
        );
    }
}

#[test]
fn fractional_at_half_behaves_like_a_random_walk() {
    let p = ModelParams::fractional(0.0, 0.3, 26.0, 0.5, 1.0).unwrap();
    let sim = simulate_fractional_mrw(1 << 13, &p, 4).unwrap();
    let x = &sim.returns;
    assert!((sample_var(x) - 0.09).abs() / 0.09 < 0.08);
    let r = sample_acf(x, 5);
    for k in 1..=5 {
        assert!(r[k].abs() < 3.0 / ((1 << 13) as f64).sqrt() * 1.5, "lag {k}: {}", r[k]);
    }
}
