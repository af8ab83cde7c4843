//! Samplers for the latent cascade, fractional Gaussian noise and the three
//! observable processes, with reproducible seed splitting.
//!
//! A root seed is split into independent substreams for the latent
//! log-volatility and the innovations (see [`crate::seed`]), so identical
//! `(n, params, seed)` always reproduce bit-identical output and each stream
//! can be replayed on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{MrwError, Result};
use crate::likelihood::durbin_levinson;
use crate::linalg::SymBanded;
use crate::model::{CascadeKernel, FgnKernel, ModelParams, Variant};
use crate::seed;

/// Largest `n` for which the latent sampler uses the exact Cholesky factor of
/// the covariance; larger paths fall back to the truncated AR recursion.
pub const DENSE_LATENT_MAX: usize = 4096;

/// Truncation order of the AR recursion used for long latent paths.
pub const DEFAULT_LATENT_TRUNCATION: usize = 256;

/// One realization of the latent log-volatility and its multipliers
/// `M_k = c exp(h_k)`.
#[derive(Debug, Clone)]
pub struct LatentPath {
    pub h: Vec<f64>,
    pub m: Vec<f64>,
}

/// A simulated path: levels `y_k`, returns `x_k = y_k - y_{k-1}` (with
/// `y_0 = 0`), and the inputs that reproduce it.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub levels: Vec<f64>,
    pub returns: Vec<f64>,
    pub seed: u64,
    pub params: ModelParams,
}

/// Which sampler produced a fractional Gaussian noise draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgnMethod {
    /// Exact circulant embedding (Davies-Harte), `O(n log n)`.
    CirculantEmbedding,
    /// Sequential conditional sampling (Hosking), `O(n^2)`; fallback when the
    /// embedding produces a materially negative eigenvalue.
    SequentialConditional,
}

/// A fractional Gaussian noise draw plus the path that generated it.
#[derive(Debug, Clone)]
pub struct FgnSample {
    pub values: Vec<f64>,
    pub method: FgnMethod,
}

fn standard_normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Draw the latent log-volatility vector `h` (centered Gaussian, cascade
/// covariance) and its multipliers. `seed` addresses this stream directly;
/// the model simulators pass `seed::latent_stream(root)`.
pub fn sample_log_volatility(n: usize, p: &ModelParams, seed: u64) -> Result<LatentPath> {
    sample_log_volatility_trunc(n, p, seed, DEFAULT_LATENT_TRUNCATION)
}

/// As [`sample_log_volatility`] with an explicit truncation order for the
/// long-path AR recursion.
pub fn sample_log_volatility_trunc(
    n: usize,
    p: &ModelParams,
    seed: u64,
    k_trunc: usize,
) -> Result<LatentPath> {
    if n == 0 {
        return Err(MrwError::InvalidInput("n must be >= 1".into()));
    }
    let kernel = CascadeKernel::new(p)?;
    if kernel.gamma(0) == 0.0 {
        // degenerate cascade: h identically zero, M identically one
        return Ok(LatentPath { h: vec![0.0; n], m: vec![1.0; n] });
    }
    let c = kernel.normalizer();
    let z = standard_normals(n, seed);
    let h = if n <= DENSE_LATENT_MAX {
        // The covariance is banded (compact support), so its Cholesky factor
        // is the exact dense factor with zero fill outside the band.
        let bw = kernel.support().saturating_sub(1).min(n - 1);
        let mut cov = SymBanded::zeros(n, bw);
        for d in 0..=bw {
            let g = kernel.gamma(d);
            for i in d..n {
                cov.set(i, i - d, g);
            }
        }
        let chol = cov.cholesky()?;
        chol.mul_lower(&z)
    } else {
        let k_eff = k_trunc.min(n - 1);
        let ar = durbin_levinson(&kernel.acov(k_eff + 1))?;
        let mut h = vec![0.0; n];
        for k in 0..n {
            let m = k.min(k_eff);
            let mut pred = 0.0;
            if m > 0 {
                let coeffs = ar.coeffs(m);
                for j in 1..=m {
                    pred += coeffs[j - 1] * h[k - j];
                }
            }
            h[k] = pred + ar.innovation_sd(m) * z[k];
        }
        h
    };
    let m = h.iter().map(|&hk| c * hk.exp()).collect();
    Ok(LatentPath { h, m })
}

/// Exact-in-distribution fractional Gaussian noise of length `n`.
///
/// Prefers circulant embedding; if the embedding spectrum has a materially
/// negative eigenvalue the draw falls back to the sequential conditional
/// sampler, and the returned sample reports which path was taken.
pub fn simulate_fgn(n: usize, hurst: f64, seed: u64) -> Result<FgnSample> {
    if n == 0 {
        return Err(MrwError::InvalidInput("n must be >= 1".into()));
    }
    let kernel = FgnKernel::new(hurst)?;
    let m = n.next_power_of_two().max(2);
    let len = 2 * m;
    let mut row: Vec<f64> = Vec::with_capacity(len);
    for j in 0..=m {
        row.push(kernel.beta(j));
    }
    for j in (1..m).rev() {
        row.push(kernel.beta(j));
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(len);
    let mut buf: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    let eig: Vec<f64> = buf.iter().map(|z| z.re).collect();
    let max_eig = eig.iter().fold(0.0f64, |a, &b| a.max(b));
    let min_eig = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig < -1e-8 * max_eig {
        return Ok(FgnSample { values: hosking_fgn(n, &kernel, seed), method: FgnMethod::SequentialConditional });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let scale = 1.0 / len as f64;
    let mut spec = vec![Complex::new(0.0, 0.0); len];
    spec[0] = Complex::new((eig[0].max(0.0) * scale).sqrt() * draw(), 0.0);
    spec[m] = Complex::new((eig[m].max(0.0) * scale).sqrt() * draw(), 0.0);
    for k in 1..m {
        let r = (eig[k].max(0.0) * scale / 2.0).sqrt();
        let re = r * draw();
        let im = r * draw();
        spec[k] = Complex::new(re, im);
        spec[len - k] = Complex::new(re, -im);
    }
    fft.process(&mut spec);
    let values = spec[..n].iter().map(|z| z.re).collect();
    Ok(FgnSample { values, method: FgnMethod::CirculantEmbedding })
}

/// Hosking's sequential conditional sampler (exact, `O(n^2)`).
fn hosking_fgn(n: usize, kernel: &FgnKernel, seed: u64) -> Vec<f64> {
    let z = standard_normals(n, seed);
    let mut x = vec![0.0; n];
    let mut e = kernel.beta(0);
    x[0] = e.sqrt() * z[0];
    let mut phi: Vec<f64> = Vec::new();
    for k in 1..n {
        let mut num = kernel.beta(k);
        for (j, &c) in phi.iter().enumerate() {
            num -= c * kernel.beta(k - 1 - j);
        }
        let a = num / e;
        let prev = phi.clone();
        for j in 0..phi.len() {
            phi[j] = prev[j] - a * prev[phi.len() - 1 - j];
        }
        phi.push(a);
        e *= 1.0 - a * a;
        let mut pred = 0.0;
        for (j, &c) in phi.iter().enumerate() {
            pred += c * x[k - 1 - j];
        }
        x[k] = pred + e.sqrt() * z[k];
    }
    x
}

fn levels_from_returns(returns: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    returns
        .iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect()
}

/// Standard MRW: `x_k = sigma sqrt(M_k) eps_k`, levels are the cumulative sum.
pub fn simulate_mrw(n: usize, p: &ModelParams, seed: u64) -> Result<SimOutput> {
    if p.variant != Variant::Standard {
        return Err(MrwError::InvalidParameter("simulate_mrw needs the standard variant".into()));
    }
    let latent = sample_log_volatility(n, p, seed::latent_stream(seed))?;
    let eps = standard_normals(n, seed::innovation_stream(seed));
    let returns: Vec<f64> =
        latent.m.iter().zip(&eps).map(|(&mk, &e)| p.sigma * mk.sqrt() * e).collect();
    Ok(SimOutput { levels: levels_from_returns(&returns), returns, seed, params: *p })
}

/// Damped MRW: `y_k = phi y_{k-1} + sigma sqrt(M_k) eps_k`, `y_0 = 0`.
pub fn simulate_damped_mrw(n: usize, p: &ModelParams, seed: u64) -> Result<SimOutput> {
    let phi = match p.variant {
        Variant::Damped { phi } => phi,
        _ => {
            return Err(MrwError::InvalidParameter(
                "simulate_damped_mrw needs the damped variant".into(),
            ))
        }
    };
    p.validate()?;
    let latent = sample_log_volatility(n, p, seed::latent_stream(seed))?;
    let eps = standard_normals(n, seed::innovation_stream(seed));
    let mut levels = Vec::with_capacity(n);
    let mut returns = Vec::with_capacity(n);
    let mut prev = 0.0;
    for k in 0..n {
        let y = phi * prev + p.sigma * latent.m[k].sqrt() * eps[k];
        returns.push(y - prev);
        levels.push(y);
        prev = y;
    }
    Ok(SimOutput { levels, returns, seed, params: *p })
}

/// Fractional MRW: `y_k = y_{k-1} + sigma sqrt(M_k) eps^(H)_k` with the
/// latent path and the fractional noise drawn from independent substreams.
pub fn simulate_fractional_mrw(n: usize, p: &ModelParams, seed: u64) -> Result<SimOutput> {
    let hurst = match p.variant {
        Variant::Fractional { hurst } => hurst,
        _ => {
            return Err(MrwError::InvalidParameter(
                "simulate_fractional_mrw needs the fractional variant".into(),
            ))
        }
    };
    p.validate()?;
    let latent = sample_log_volatility(n, p, seed::latent_stream(seed))?;
    let fgn = simulate_fgn(n, hurst, seed::innovation_stream(seed))?;
    let returns: Vec<f64> =
        latent.m.iter().zip(&fgn.values).map(|(&mk, &e)| p.sigma * mk.sqrt() * e).collect();
    Ok(SimOutput { levels: levels_from_returns(&returns), returns, seed, params: *p })
}

/// Dispatch on the parameter variant.
pub fn simulate(n: usize, p: &ModelParams, seed: u64) -> Result<SimOutput> {
    match p.variant {
        Variant::Standard => simulate_mrw(n, p, seed),
        Variant::Damped { .. } => simulate_damped_mrw(n, p, seed),
        Variant::Fractional { .. } => simulate_fractional_mrw(n, p, seed),
    }
}

/// `y'_k = y_k + amplitude sin(2 pi k / period + phase)`, `period` in samples.
pub fn add_seasonal(y: &[f64], amplitude: f64, period: f64, phase: f64) -> Vec<f64> {
    assert!(period > 0.0, "period must be positive");
    y.iter()
        .enumerate()
        .map(|(k, &v)| {
            v + amplitude * (2.0 * std::f64::consts::PI * k as f64 / period + phase).sin()
        })
        .collect()
}

/// Samples to drop before stationary statistics of a damped path:
/// `ceil(10 / (nu dt))`. Zero for the other variants (their levels are
/// nonstationary by construction; raw simulation always starts at `y_0 = 0`).
pub fn stationary_burn_in(p: &ModelParams) -> usize {
    match p.variant {
        Variant::Damped { phi } => (10.0 / (1.0 - phi)).ceil() as usize,
        _ => 0,
    }
}
