//! Shared oracles for the integration suites: dense reference linear algebra,
//! quadrature of the exact latent integral, and closed-form AR(1) results.
//! Everything here is independent of the banded/truncated code paths it
//! checks.
#![allow(dead_code)]

use mrw::model::{cascade_covariance, cascade_normalizer, fgn_covariance, ModelParams};

// ---------------------------------------------------------------- dense LA

pub fn dense_cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(s > 0.0, "dense cholesky pivot {s} at {i}");
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    l
}

pub fn dense_solve_via_cholesky(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let l = dense_cholesky(a);
    let n = b.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[i][k] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            let t = l[k][i] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i][i];
    }
    y
}

/// Centered multivariate Gaussian log-density with dense covariance.
pub fn dense_gaussian_logpdf(x: &[f64], cov: &[Vec<f64>]) -> f64 {
    let n = x.len();
    let l = dense_cholesky(cov);
    let mut y = x.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[i][k] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i][i];
    }
    let log_det: f64 = (0..n).map(|i| 2.0 * l[i][i].ln()).sum();
    -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
        - 0.5 * log_det
        - 0.5 * y.iter().map(|v| v * v).sum::<f64>()
}

/// Dense Toeplitz matrix from an autocovariance sequence.
pub fn toeplitz(n: usize, acov: &[f64]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = i.abs_diff(j);
                    if d < acov.len() {
                        acov[d]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Direct dense solve of the order-k Yule-Walker system
/// `sum_j phi_j acov(|i-j|) = acov(i)`.
pub fn yule_walker_dense(acov: &[f64], k: usize) -> Vec<f64> {
    let a = toeplitz(k, acov);
    let b: Vec<f64> = (1..=k).map(|i| acov[i]).collect();
    dense_solve_via_cholesky(&a, &b)
}

/// Dense Yule-Walker solutions for every order `1..=k_max` from a single
/// dense Cholesky factorization: the factor of each leading principal
/// submatrix of the Toeplitz matrix is the leading block of the full factor.
pub fn yule_walker_dense_all(acov: &[f64], k_max: usize) -> Vec<Vec<f64>> {
    // flat row-major lower factor of the k_max x k_max Toeplitz matrix
    let mut l = vec![0.0; k_max * k_max];
    for i in 0..k_max {
        for j in 0..=i {
            let mut s = if i - j < acov.len() { acov[i - j] } else { 0.0 };
            let (ri, rj) = (&l[i * k_max..i * k_max + j], &l[j * k_max..j * k_max + j]);
            for (a, b) in ri.iter().zip(rj) {
                s -= a * b;
            }
            l[i * k_max + j] = if i == j {
                assert!(s > 0.0, "toeplitz pivot {s} at {i}");
                s.sqrt()
            } else {
                s / l[j * k_max + j]
            };
        }
    }
    (1..=k_max)
        .map(|k| {
            let mut y: Vec<f64> = (1..=k).map(|i| acov[i]).collect();
            for i in 0..k {
                for t in 0..i {
                    y[i] -= l[i * k_max + t] * y[t];
                }
                y[i] /= l[i * k_max + i];
            }
            for i in (0..k).rev() {
                for t in i + 1..k {
                    y[i] -= l[t * k_max + i] * y[t];
                }
                y[i] /= l[i * k_max + i];
            }
            y
        })
        .collect()
}

// ------------------------------------------------------------- quadrature

/// Nodes and weights for probabilists' Gauss-Hermite quadrature:
/// `E[f(Z)] ~= sum_i w_i f(z_i)` for `Z ~ N(0,1)`. Newton iteration on the
/// Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // physicists' polynomials, weight e^{-x^2}; convert at the end
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2
                    - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    // physicists' -> probabilists': x = z*sqrt(2), w normalized by 1/sqrt(pi)
    let xs: Vec<f64> = nodes.iter().map(|z| z * std::f64::consts::SQRT_2).collect();
    let ws: Vec<f64> =
        weights.iter().map(|w| w / std::f64::consts::PI.sqrt()).collect();
    (xs, ws)
}

/// Dense latent covariance of the cascade at the given parameters.
pub fn latent_cov_dense(n: usize, p: &ModelParams) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| cascade_covariance(i.abs_diff(j), p).unwrap()).collect())
        .collect()
}

/// Exact marginal log-likelihood of a standard-MRW observation vector
/// (n <= 3) by tensor-product Gauss-Hermite over the latent variables.
pub fn exact_standard_logp_gh(x: &[f64], p: &ModelParams, nodes: usize) -> f64 {
    let n = x.len();
    assert!(n >= 1 && n <= 3);
    let c = cascade_normalizer(p).unwrap();
    let s2c = p.sigma * p.sigma * c;
    let l = dense_cholesky(&latent_cov_dense(n, p));
    let (zs, ws) = gauss_hermite(nodes);
    let obs_log = |h: &[f64]| -> f64 {
        x.iter()
            .zip(h)
            .map(|(&xk, &hk)| {
                let var = s2c * hk.exp();
                -0.5 * (2.0 * std::f64::consts::PI * var).ln() - xk * xk / (2.0 * var)
            })
            .sum()
    };
    let mut max_log = f64::NEG_INFINITY;
    let mut terms: Vec<(f64, f64)> = Vec::new(); // (log integrand, weight)
    let mut idx = vec![0usize; n];
    loop {
        let zeta: Vec<f64> = idx.iter().map(|&i| zs[i]).collect();
        let mut h = vec![0.0; n];
        for i in 0..n {
            for j in 0..=i {
                h[i] += l[i][j] * zeta[j];
            }
        }
        let lg = obs_log(&h);
        let w: f64 = idx.iter().map(|&i| ws[i]).product();
        max_log = max_log.max(lg);
        terms.push((lg, w));
        // advance the mixed-radix counter
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < nodes {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == n {
                let sum: f64 =
                    terms.iter().map(|&(lg, w)| w * (lg - max_log).exp()).sum();
                return max_log + sum.ln();
            }
        }
    }
}

/// Exact marginal log-likelihood of a fractional-MRW observation vector
/// (n <= 3): conditional on the latent vector the observations are a dense
/// Gaussian with covariance `sigma^2 c e^{(h_k+h_l)/2} beta(|k-l|)`.
pub fn exact_fractional_logp_gh(x: &[f64], p: &ModelParams, hurst: f64, nodes: usize) -> f64 {
    let n = x.len();
    assert!(n >= 1 && n <= 3);
    let c = cascade_normalizer(p).unwrap();
    let s2c = p.sigma * p.sigma * c;
    let l = dense_cholesky(&latent_cov_dense(n, p));
    let (zs, ws) = gauss_hermite(nodes);
    let cond_log = |h: &[f64]| -> f64 {
        let cov: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| {
                        s2c * ((h[k] + h[j]) / 2.0).exp()
                            * fgn_covariance(k.abs_diff(j), hurst).unwrap()
                    })
                    .collect()
            })
            .collect();
        dense_gaussian_logpdf(x, &cov)
    };
    let mut max_log = f64::NEG_INFINITY;
    let mut terms: Vec<(f64, f64)> = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let zeta: Vec<f64> = idx.iter().map(|&i| zs[i]).collect();
        let mut h = vec![0.0; n];
        for i in 0..n {
            for j in 0..=i {
                h[i] += l[i][j] * zeta[j];
            }
        }
        let lg = cond_log(&h);
        let w: f64 = idx.iter().map(|&i| ws[i]).product();
        max_log = max_log.max(lg);
        terms.push((lg, w));
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < nodes {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == n {
                let sum: f64 =
                    terms.iter().map(|&(lg, w)| w * (lg - max_log).exp()).sum();
                return max_log + sum.ln();
            }
        }
    }
}

/// Adaptive Simpson integration (for the n = 1 latent integral cross-check).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        m: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let lm = (a + m) / 2.0;
        let rm = (m + b) / 2.0;
        let left = simpson(f, a, lm, m);
        let right = simpson(f, m, rm, b);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, lm, m, left, tol / 2.0, depth - 1)
                + recurse(f, m, rm, b, right, tol / 2.0, depth - 1)
        }
    }
    let m = (a + b) / 2.0;
    recurse(f, a, m, b, simpson(f, a, m, b), tol, 48)
}

/// Exact n = 1 marginal log-likelihood by adaptive quadrature.
pub fn exact_n1_logp_quad(x: f64, p: &ModelParams) -> f64 {
    let g0 = cascade_covariance(0, p).unwrap();
    let c = cascade_normalizer(p).unwrap();
    let s2c = p.sigma * p.sigma * c;
    let f = |h: f64| -> f64 {
        let var = s2c * h.exp();
        (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
            * (-h * h / (2.0 * g0)).exp()
            / (2.0 * std::f64::consts::PI * g0).sqrt()
    };
    let half_width = 14.0 * g0.sqrt().max(1.0);
    adaptive_simpson(&f, -half_width, half_width, 1e-14).ln()
}

// ------------------------------------------------------------- AR(1) forms

/// Closed-form log-likelihood of an AR(1) path conditioned on `y_0 = 0`.
pub fn ar1_loglik(levels: &[f64], phi: f64, sigma: f64) -> f64 {
    let mut prev = 0.0;
    let mut ll = 0.0;
    for &y in levels {
        let r = y - phi * prev;
        ll += -0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
            - r * r / (2.0 * sigma * sigma);
        prev = y;
    }
    ll
}

/// Exact conditional ML of the AR(1) model (`y_0 = 0`): `(phi_hat, sigma_hat)`.
pub fn ar1_ml(levels: &[f64]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut prev = 0.0;
    for &y in levels {
        num += y * prev;
        den += prev * prev;
        prev = y;
    }
    let phi = num / den;
    let mut rss = 0.0;
    prev = 0.0;
    for &y in levels {
        let r = y - phi * prev;
        rss += r * r;
        prev = y;
    }
    (phi, (rss / levels.len() as f64).sqrt())
}

/// Spectral density of an AR(1) in the periodogram's convention:
/// `S(f) = sigma^2 / |1 - phi e^{-2 pi i f}|^2`.
pub fn ar1_spectrum(f: f64, phi: f64, sigma: f64) -> f64 {
    let denom = 1.0 - 2.0 * phi * (2.0 * std::f64::consts::PI * f).cos() + phi * phi;
    sigma * sigma / denom
}

// ----------------------------------------------------------------- helpers

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
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

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sample_var(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Biased sample ACF (matches the library's normalization) computed
/// independently for cross-checks.
pub fn sample_acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (0..=max_lag)
        .map(|k| (0..n - k).map(|t| (x[t] - m) * (x[t + k] - m)).sum::<f64>() / denom)
        .collect()
}
