//! Second-order diagnostics: wavelet-based variograms, periodograms,
//! autocorrelations, Hurst-slope estimation and ensemble quantile bands.
//!
//! The variogram `V(a) = E|W(t,a)|^2` uses the continuous wavelet transform
//! with a first-derivative-of-Gaussian mother wavelet; for a process with
//! Hurst exponent `H` it scales as `a^(2H+1)`, and a mean-reverting process
//! breaks to a flat variogram beyond its correlation time.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{MrwError, Result};
use crate::model::ModelParams;
use crate::seed;
use crate::simulate::{add_seasonal, simulate};

/// Half-width of the truncated mother wavelet, in units of the scale `a`.
/// Coefficients within one support width of either end are dropped (cone of
/// influence).
pub const WAVELET_HALF_WIDTH: f64 = 4.0;

/// First derivative of a Gaussian, unit L2 norm: `psi(u) = -u e^{-u^2/2} / (pi/4)^{1/4}`.
fn dog1(u: f64) -> f64 {
    let norm = (std::f64::consts::PI.sqrt() / 2.0).sqrt();
    -u * (-u * u / 2.0).exp() / norm
}

/// Estimated variogram: scales (in sampling units), `V(a)` values, and the
/// number of valid coefficients behind each estimate.
#[derive(Debug, Clone)]
pub struct VariogramCurve {
    pub scales: Vec<f64>,
    pub v: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Pointwise mean and quantile curves of an ensemble of variograms.
#[derive(Debug, Clone)]
pub struct EnsembleBand {
    pub scales: Vec<f64>,
    pub mean: Vec<f64>,
    /// Quantile curves keyed by probability, ordered by probability.
    pub quantiles: Vec<(f64, Vec<f64>)>,
    pub n_reps: usize,
}

/// Sinusoid injected into ensemble realizations before analysis; `period` in
/// sampling units.
#[derive(Debug, Clone, Copy)]
pub struct SeasonalSpec {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

/// Wavelet coefficients `W(t, a)` of `x` at one scale, valid region only.
///
/// Discretizes `W(t,a) = a^{-1/2} Integral x(t') psi((t'-t)/a) dt'` with the
/// wavelet truncated at `±4a`; coefficients whose support touches the ends of
/// the series are excluded. Returns an empty vector when the series is too
/// short for the scale (`n < 8a` or no interior point survives).
pub fn wavelet_transform(x: &[f64], a: f64) -> Result<Vec<f64>> {
    if !(a >= 2.0) {
        return Err(MrwError::InvalidInput(format!("scale must be >= 2 samples, got {a}")));
    }
    let n = x.len();
    if (n as f64) < 8.0 * a {
        return Ok(Vec::new());
    }
    let half = (WAVELET_HALF_WIDTH * a).ceil() as usize;
    if 2 * half >= n {
        return Ok(Vec::new());
    }
    let taps: Vec<f64> = (-(half as isize)..=half as isize)
        .map(|j| dog1(j as f64 / a))
        .collect();
    let inv_sqrt_a = 1.0 / a.sqrt();
    let mut out = Vec::with_capacity(n - 2 * half);
    for t in half..n - half {
        let window = &x[t - half..=t + half];
        let mut acc = 0.0;
        for (w, &g) in window.iter().zip(&taps) {
            acc += w * g;
        }
        out.push(acc * inv_sqrt_a);
    }
    Ok(out)
}

/// Mean squared wavelet coefficient per scale. Scales the series cannot
/// support are omitted (their count would be zero).
pub fn wavelet_variogram(x: &[f64], scales: &[f64]) -> Result<VariogramCurve> {
    let mut sorted = scales.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let mut out = VariogramCurve { scales: Vec::new(), v: Vec::new(), counts: Vec::new() };
    for &a in &sorted {
        let w = wavelet_transform(x, a)?;
        if w.is_empty() {
            continue;
        }
        let v = w.iter().map(|c| c * c).sum::<f64>() / w.len() as f64;
        out.scales.push(a);
        out.v.push(v);
        out.counts.push(w.len());
    }
    Ok(out)
}

/// Default dyadic scale grid `2, 4, ..., n/8`.
pub fn dyadic_scales(n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut a = 2.0;
    while a <= n as f64 / 8.0 {
        out.push(a);
        a *= 2.0;
    }
    out
}

/// Dense logarithmic scale grid with `per_octave` points per factor of two.
pub fn log_scales(lo: f64, hi: f64, per_octave: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let step = 2f64.powf(1.0 / per_octave.max(1) as f64);
    let mut a = lo;
    while a <= hi * (1.0 + 1e-12) {
        out.push(a);
        a *= step;
    }
    out
}

/// One-sided discrete periodogram of the (mean-removed) series: frequencies
/// `j/n` for `j = 1..=n/2` in cycles per sample, density `|X_j|^2 / n`.
pub fn periodogram(x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    if n < 16 {
        return Err(MrwError::InvalidInput(format!("periodogram needs n >= 16, got {n}")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let m = n / 2;
    let freqs = (1..=m).map(|j| j as f64 / n as f64).collect();
    let power = (1..=m).map(|j| buf[j].norm_sqr() / n as f64).collect();
    Ok((freqs, power))
}

/// Geometric binning of a spectrum for log-log comparisons: bin means of
/// frequency and power over `per_decade` bins per decade.
pub fn log_binned(freqs: &[f64], power: &[f64], per_decade: usize) -> (Vec<f64>, Vec<f64>) {
    let mut fo = Vec::new();
    let mut po = Vec::new();
    if freqs.is_empty() {
        return (fo, po);
    }
    let step = 10f64.powf(1.0 / per_decade.max(1) as f64);
    let mut lo = freqs[0];
    let mut i = 0;
    while i < freqs.len() {
        let hi = lo * step;
        let mut fs = 0.0;
        let mut ps = 0.0;
        let mut cnt = 0;
        while i < freqs.len() && freqs[i] < hi {
            fs += freqs[i];
            ps += power[i];
            cnt += 1;
            i += 1;
        }
        if cnt > 0 {
            fo.push(fs / cnt as f64);
            po.push(ps / cnt as f64);
        }
        lo = hi;
    }
    (fo, po)
}

/// Sample autocorrelations of `x` at lags `0..=max_lag` (mean-removed,
/// biased normalization).
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 4 || max_lag > n / 4 {
        return Err(MrwError::InvalidInput(format!(
            "acf needs max_lag <= n/4 (n={n}, max_lag={max_lag})"
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom == 0.0 {
        return Err(MrwError::InvalidInput("constant series has no autocorrelation".into()));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let s: f64 = (0..n - k).map(|t| (x[t] - mean) * (x[t + k] - mean)).sum();
        out.push(s / denom);
    }
    Ok(out)
}

/// Sample autocorrelations of the absolute values `|x|`.
pub fn abs_acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    acf(&a, max_lag)
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

/// Hurst exponent from the variogram: `H = (slope - 1)/2` with the slope from
/// least squares on `(log a, log V)` over scales inside `scale_range`.
pub fn hurst_slope(v: &VariogramCurve, scale_range: (f64, f64)) -> Result<f64> {
    let mut la = Vec::new();
    let mut lv = Vec::new();
    for i in 0..v.scales.len() {
        let a = v.scales[i];
        if a >= scale_range.0 && a <= scale_range.1 {
            if !(v.v[i] > 0.0) {
                return Err(MrwError::InvalidInput(format!(
                    "variogram value at scale {a} is not positive"
                )));
            }
            la.push(a.ln());
            lv.push(v.v[i].ln());
        }
    }
    if la.len() < 3 {
        return Err(MrwError::InvalidInput(format!(
            "need at least 3 scales in [{}, {}], found {}",
            scale_range.0,
            scale_range.1,
            la.len()
        )));
    }
    Ok((ols_slope(&la, &lv) - 1.0) / 2.0)
}

/// Linear-interpolation quantile of pre-sorted values.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let pos = q * (m - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Quantile probabilities reported by [`ensemble_band`].
pub const BAND_QUANTILES: [f64; 4] = [1.0 / 40.0, 1.0 / 8.0, 7.0 / 8.0, 39.0 / 40.0];

/// Simulate `n_reps` paths of the model, optionally inject a sinusoid, and
/// reduce the per-path wavelet variograms to a pointwise mean and the
/// 1/40, 1/8, 7/8, 39/40 quantile curves. Deterministic given the root seed;
/// realizations run in parallel on per-replicate derived seeds.
pub fn ensemble_band(
    p: &ModelParams,
    n: usize,
    n_reps: usize,
    scales: &[f64],
    seasonal: Option<SeasonalSpec>,
    root_seed: u64,
) -> Result<EnsembleBand> {
    if n_reps < 40 {
        return Err(MrwError::InvalidInput(format!(
            "ensemble needs n_reps >= 40 for 1/40 quantiles, got {n_reps}"
        )));
    }
    let curves: Vec<VariogramCurve> = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let out = simulate(n, p, seed::replicate_stream(root_seed, i as u64))?;
            let levels = match &seasonal {
                Some(s) => add_seasonal(&out.levels, s.amplitude, s.period, s.phase),
                None => out.levels,
            };
            wavelet_variogram(&levels, scales)
        })
        .collect::<Result<Vec<_>>>()?;
    let scales_out = curves[0].scales.clone();
    let m = scales_out.len();
    let mut mean = vec![0.0; m];
    let mut quantiles: Vec<(f64, Vec<f64>)> =
        BAND_QUANTILES.iter().map(|&q| (q, vec![0.0; m])).collect();
    let mut column = vec![0.0; n_reps];
    for j in 0..m {
        for (i, c) in curves.iter().enumerate() {
            column[i] = c.v[j];
        }
        mean[j] = column.iter().sum::<f64>() / n_reps as f64;
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (q, curve) in quantiles.iter_mut() {
            curve[j] = quantile_sorted(&column, *q);
        }
    }
    Ok(EnsembleBand { scales: scales_out, mean, quantiles, n_reps })
}
