//! Approximate log-likelihoods for the three model variants.
//!
//! The latent log-volatility `h` is handled through its truncated
//! autoregressive representation: Durbin-Levinson yields, for every order
//! `m`, regression coefficients and innovation variances of the conditional
//! `h_k | h_{k-1}, ..., h_{k-m}`. Conditionals are exact up to order `K` and
//! frozen at order `K` beyond, which makes the implied precision matrix
//! banded with bandwidth `K`. The marginal likelihood
//!
//! `p(x) = Integral p(x|h) p_h(h) dh`
//!
//! is approximated by Laplace's method: an inner damped-Newton iteration with
//! the exact banded Hessian finds the joint mode `h*`, and the Gaussian
//! integral of the second-order expansion gives
//!
//! `log p(x) ~= log p(x, h*) + (n/2) log(2pi) - log det(-Hess)/2`.
//!
//! The damped variant reduces to the standard one through a residual
//! transform; the fractional variant whitens the observations by
//! `u_k = x_k exp(-h_k/2) / (sigma sqrt(c))`, which conditionally on `h` is
//! exactly fractional Gaussian noise, handled by its own truncated-AR
//! precision.

use crate::error::{MrwError, Result};
use crate::linalg::SymBanded;
use crate::model::{CascadeKernel, FgnKernel, ModelParams, Variant};

/// Default truncation order of the AR representation.
pub const DEFAULT_TRUNCATION: usize = 256;

const MAX_NEWTON_ITERS: usize = 100;
const GRAD_TOL: f64 = 1e-6;

/// Per-order regression coefficients and innovation standard deviations of a
/// stationary covariance sequence (Durbin-Levinson output).
#[derive(Debug, Clone)]
pub struct ArRepresentation {
    /// `coeffs[m-1]` holds the order-`m` coefficients `phi_1 .. phi_m`.
    coeffs: Vec<Vec<f64>>,
    /// `innovation_var[m]` is the residual variance after conditioning on `m`
    /// lags; `innovation_var[0] = acov[0]`.
    innovation_var: Vec<f64>,
}

impl ArRepresentation {
    /// Highest available order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Order-`m` regression coefficients, `1 <= m <= K`.
    pub fn coeffs(&self, m: usize) -> &[f64] {
        &self.coeffs[m - 1]
    }

    /// Innovation standard deviation after conditioning on `m` lags, `0 <= m <= K`.
    pub fn innovation_sd(&self, m: usize) -> f64 {
        self.innovation_var[m].sqrt()
    }

    pub fn innovation_var(&self, m: usize) -> f64 {
        self.innovation_var[m]
    }
}

/// Durbin-Levinson recursion for the Yule-Walker systems of `acov`.
///
/// `acov` holds the autocovariances at lags `0..=K`; the result carries
/// coefficients and innovation variances for every order up to `K`. A
/// nonpositive innovation variance at some order rejects the sequence as not
/// positive definite at that order.
pub fn durbin_levinson(acov: &[f64]) -> Result<ArRepresentation> {
    if acov.is_empty() {
        return Err(MrwError::InvalidInput("empty covariance sequence".into()));
    }
    let g0 = acov[0];
    if !(g0 > 0.0) {
        return Err(MrwError::NotPositiveDefinite { order: 0, pivot: g0 });
    }
    let k_max = acov.len() - 1;
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(k_max);
    let mut vars = Vec::with_capacity(k_max + 1);
    vars.push(g0);
    let mut e = g0;
    let mut prev: Vec<f64> = Vec::new();
    for m in 1..=k_max {
        let mut num = acov[m];
        for (j, &c) in prev.iter().enumerate() {
            num -= c * acov[m - 1 - j];
        }
        let a = num / e;
        let mut cur = Vec::with_capacity(m);
        for j in 0..m - 1 {
            cur.push(prev[j] - a * prev[m - 2 - j]);
        }
        cur.push(a);
        e *= 1.0 - a * a;
        if !(e > 0.0) || !e.is_finite() {
            return Err(MrwError::NotPositiveDefinite { order: m, pivot: e });
        }
        vars.push(e);
        prev = cur.clone();
        coeffs.push(cur);
    }
    Ok(ArRepresentation { coeffs, innovation_var: vars })
}

/// Precision matrix `A^T D^{-1} A` of the length-`n` Gaussian vector whose
/// conditionals follow `ar` exactly up to order `K` and stay at order `K`
/// beyond. `A` is unit lower triangular with the regression coefficients,
/// `D` the innovation variances; the result is banded with bandwidth `K`.
fn ar_precision_matrix(n: usize, ar: &ArRepresentation) -> SymBanded {
    let k_eff = ar.order().min(n - 1);
    let mut q = SymBanded::zeros(n, k_eff);
    let mut row = vec![0.0; k_eff + 1]; // row[a] multiplies h_{k-a}
    // exact rows k = 0..=k_eff (order k each)
    for k in 0..=k_eff.min(n - 1) {
        let m = k;
        row[0] = 1.0;
        if m > 0 {
            let c = ar.coeffs(m);
            for a in 1..=m {
                row[a] = -c[a - 1];
            }
        }
        let w = 1.0 / ar.innovation_var(m);
        for b in 0..=m {
            let rb = row[b] * w;
            for a in 0..=b {
                q.add(k - a, k - b, row[a] * rb);
            }
        }
    }
    // truncated rows k = k_eff+1..n share one coefficient vector: their
    // contributions are constants along each diagonal, accumulated with
    // difference arrays.
    if n > k_eff + 1 {
        row[0] = 1.0;
        if k_eff > 0 {
            let c = ar.coeffs(k_eff);
            for a in 1..=k_eff {
                row[a] = -c[a - 1];
            }
        }
        let w = 1.0 / ar.innovation_var(k_eff);
        let mut diff = vec![0.0; (k_eff + 1) * (n + 1)];
        for b in 0..=k_eff {
            for a in 0..=b {
                let d = b - a;
                let val = row[a] * row[b] * w;
                // rows k in [k_eff+1, n-1] touch (i, j) = (k-a, k-b); j spans:
                let j_lo = k_eff + 1 - b;
                let j_hi = n - 1 - b;
                diff[d * (n + 1) + j_lo] += val;
                diff[d * (n + 1) + j_hi + 1] -= val;
            }
        }
        for d in 0..=k_eff {
            let mut acc = 0.0;
            for j in 0..n - d {
                acc += diff[d * (n + 1) + j];
                if acc != 0.0 {
                    q.add(j + d, j, acc);
                }
            }
        }
    }
    q
}

/// `sum_k -ln(sqrt(2 pi) s~_k)` for the truncated-AR normalization.
fn ar_log_norm(n: usize, ar: &ArRepresentation) -> f64 {
    let k_eff = ar.order().min(n - 1);
    let mut acc = -(n as f64) * 0.5 * (2.0 * std::f64::consts::PI).ln();
    for k in 0..n.min(k_eff + 1) {
        acc -= 0.5 * ar.innovation_var(k).ln();
    }
    if n > k_eff + 1 {
        acc -= (n - k_eff - 1) as f64 * 0.5 * ar.innovation_var(k_eff).ln();
    }
    acc
}

struct LatentField {
    prec: SymBanded,
    log_norm: f64,
}

fn build_latent_field(n: usize, p: &ModelParams, k_trunc: usize) -> Result<LatentField> {
    let kernel = CascadeKernel::new(p)?;
    if kernel.gamma(0) == 0.0 {
        return Err(MrwError::InvalidParameter(
            "latent field is degenerate (lambda = 0 or t_corr = dt); use the Gaussian limit".into(),
        ));
    }
    let k_eff = k_trunc.min(n - 1);
    let ar = durbin_levinson(&kernel.acov(k_eff + 1))?;
    Ok(LatentField { prec: ar_precision_matrix(n, &ar), log_norm: ar_log_norm(n, &ar) })
}

impl LatentField {
    fn log_density(&self, h: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.prec.quad_form(h)
    }
}

/// Observation factor `p(x | h)` in whitened form. With
/// `u_k = x_k exp(-h_k/2) / (sigma sqrt(c))` the conditional law of `u` given
/// `h` is standard white noise (standard/damped) or fractional Gaussian noise
/// (fractional); `prec` is the corresponding truncated-AR precision of `u`
/// (`None` means identity).
struct ObsFactor<'a> {
    x: &'a [f64],
    sigma_sqrt_c: f64,
    /// Jacobian and normalization terms independent of `h`.
    log_norm: f64,
    prec: Option<SymBanded>,
}

impl<'a> ObsFactor<'a> {
    fn new(x: &'a [f64], p: &ModelParams, k_trunc: usize) -> Result<Self> {
        let n = x.len();
        let kernel = CascadeKernel::new(p)?;
        let c = kernel.normalizer();
        let sigma_sqrt_c = p.sigma * c.sqrt();
        match p.variant {
            Variant::Fractional { hurst } => {
                let k_eff = k_trunc.min(n - 1);
                let fgn = FgnKernel::new(hurst)?;
                let ar = durbin_levinson(&fgn.acov(k_eff + 1))?;
                let log_norm = ar_log_norm(n, &ar) - n as f64 * sigma_sqrt_c.ln();
                Ok(ObsFactor { x, sigma_sqrt_c, log_norm, prec: Some(ar_precision_matrix(n, &ar)) })
            }
            _ => {
                let log_norm = -(n as f64)
                    * (0.5 * (2.0 * std::f64::consts::PI).ln() + sigma_sqrt_c.ln());
                Ok(ObsFactor { x, sigma_sqrt_c, log_norm, prec: None })
            }
        }
    }

    fn whitened(&self, h: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .zip(h)
            .map(|(&x, &hk)| x * (-hk / 2.0).exp() / self.sigma_sqrt_c)
            .collect()
    }

    /// `v = P u` (identity precision for the white case).
    fn prec_mul(&self, u: &[f64]) -> Vec<f64> {
        match &self.prec {
            Some(p) => {
                let mut v = vec![0.0; u.len()];
                p.mul_vec(u, &mut v);
                v
            }
            None => u.to_vec(),
        }
    }

    fn log_density(&self, h: &[f64]) -> f64 {
        let u = self.whitened(h);
        let quad = match &self.prec {
            Some(p) => p.quad_form(&u),
            None => u.iter().map(|v| v * v).sum(),
        };
        self.log_norm - 0.5 * h.iter().sum::<f64>() - 0.5 * quad
    }

    /// Gradient and value in one pass; `grad[i] = -1/2 + u_i (P u)_i / 2`.
    fn value_grad(&self, h: &[f64], grad: &mut [f64]) -> f64 {
        let u = self.whitened(h);
        let v = self.prec_mul(&u);
        let mut quad = 0.0;
        for i in 0..u.len() {
            quad += u[i] * v[i];
            grad[i] = -0.5 + 0.5 * u[i] * v[i];
        }
        self.log_norm - 0.5 * h.iter().sum::<f64>() - 0.5 * quad
    }

    /// Adds `-Hessian` of the observation log-density to `m`:
    /// `(1/4) u_i u_j P_ij + delta_ij (1/4) u_i (P u)_i`.
    fn add_neg_hessian(&self, h: &[f64], m: &mut SymBanded) {
        let u = self.whitened(h);
        let v = self.prec_mul(&u);
        match &self.prec {
            Some(p) => {
                m.add_scaled_hadamard_outer(p, &u, 0.25);
                for i in 0..u.len() {
                    m.add(i, i, 0.25 * u[i] * v[i]);
                }
            }
            None => {
                for i in 0..u.len() {
                    m.add(i, i, 0.5 * u[i] * u[i]);
                }
            }
        }
    }

    fn bandwidth(&self) -> usize {
        self.prec.as_ref().map_or(0, |p| p.bandwidth())
    }
}

/// Log-likelihood of one model evaluation, with Laplace diagnostics.
#[derive(Debug, Clone)]
pub struct LikelihoodResult {
    pub loglik: f64,
    /// Maximizer of the joint log-density over the latent vector.
    pub h_star: Vec<f64>,
    /// `log det(-Hessian)` of the joint log-density at `h_star`.
    pub log_det_hessian: f64,
    /// False when Newton hit the iteration cap or the Hessian at `h_star`
    /// needed a diagonal repair to factor.
    pub converged: bool,
    pub newton_iters: usize,
}

struct NewtonOutcome {
    h: Vec<f64>,
    value: f64,
    iters: usize,
    converged: bool,
}

fn joint_value(obs: &ObsFactor, latent: &LatentField, h: &[f64]) -> f64 {
    obs.log_density(h) + latent.log_density(h)
}

/// Damped Newton ascent of the joint log-density over `h`; the Hessian is
/// banded (bandwidth `K`) so each step is a banded Cholesky solve.
fn maximize_joint(obs: &ObsFactor, latent: &LatentField, mut h: Vec<f64>) -> NewtonOutcome {
    let n = h.len();
    let bw = latent.prec.bandwidth().max(obs.bandwidth());
    let mut grad = vec![0.0; n];
    let mut qh = vec![0.0; n];
    let mut neg_hess = SymBanded::zeros(n, bw);
    let mut value = joint_value(obs, latent, &h);
    let mut converged = false;
    let mut iters = 0;
    for _ in 0..MAX_NEWTON_ITERS {
        let obs_val = obs.value_grad(&h, &mut grad);
        latent.prec.mul_vec(&h, &mut qh);
        for i in 0..n {
            grad[i] -= qh[i];
        }
        value = obs_val + latent.log_norm - 0.5 * h.iter().zip(&qh).map(|(a, b)| a * b).sum::<f64>();
        let grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_inf <= GRAD_TOL {
            converged = true;
            break;
        }
        iters += 1;
        neg_hess.copy_from_banded(&latent.prec);
        obs.add_neg_hessian(&h, &mut neg_hess);
        let chol = match neg_hess.cholesky() {
            Ok(c) => c,
            Err(_) => {
                // Levenberg-style diagonal repair; escalate until it factors.
                let mut jitter = 1e-10 * neg_hess.max_abs_diagonal().max(1.0);
                let mut repaired = None;
                for _ in 0..14 {
                    let mut try_m = neg_hess.clone();
                    try_m.add_to_diagonal(jitter);
                    if let Ok(c) = try_m.cholesky() {
                        repaired = Some(c);
                        break;
                    }
                    jitter *= 10.0;
                }
                match repaired {
                    Some(c) => c,
                    None => break, // hopeless curvature; report best so far
                }
            }
        };
        let dir = chol.solve(&grad);
        let decrement: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if decrement <= 1e-13 * (1.0 + value.abs()) {
            converged = true;
            break;
        }
        // Armijo backtracking on the ascent direction.
        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1e-10 {
            let trial: Vec<f64> = h.iter().zip(&dir).map(|(hi, di)| hi + step * di).collect();
            let trial_val = joint_value(obs, latent, &trial);
            if trial_val > value + 1e-4 * step * decrement {
                h = trial;
                value = trial_val;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no ascent possible beyond numerical noise
            converged = grad_inf <= 1e-3;
            break;
        }
    }
    NewtonOutcome { h, value, iters, converged }
}

fn laplace_from_mode(
    obs: &ObsFactor,
    latent: &LatentField,
    outcome: NewtonOutcome,
) -> LikelihoodResult {
    let n = outcome.h.len();
    let bw = latent.prec.bandwidth().max(obs.bandwidth());
    let mut neg_hess = SymBanded::zeros(n, bw);
    neg_hess.copy_from_banded(&latent.prec);
    obs.add_neg_hessian(&outcome.h, &mut neg_hess);
    let (log_det, pd) = match neg_hess.cholesky() {
        Ok(c) => (c.log_det(), true),
        Err(_) => {
            let mut jitter = 1e-10 * neg_hess.max_abs_diagonal().max(1.0);
            let mut out = (f64::NAN, false);
            for _ in 0..14 {
                let mut try_m = neg_hess.clone();
                try_m.add_to_diagonal(jitter);
                if let Ok(c) = try_m.cholesky() {
                    out = (c.log_det(), false);
                    break;
                }
                jitter *= 10.0;
            }
            out
        }
    };
    let loglik =
        outcome.value + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
    LikelihoodResult {
        loglik,
        h_star: outcome.h,
        log_det_hessian: log_det,
        converged: outcome.converged && pd,
        newton_iters: outcome.iters,
    }
}

/// Newton start: conditional-mode structure of `log(x_k^2 / (sigma^2 c))`,
/// floored to stay finite at zero returns and shrunk toward zero.
fn initial_latent(x: &[f64], sigma: f64, c: f64) -> Vec<f64> {
    let floor = 1e-8 * sigma * sigma;
    let s2c = sigma * sigma * c;
    x.iter().map(|&xk| 0.5 * ((xk * xk + floor) / s2c).ln()).collect()
}

/// Truncated-AR Gaussian log-density of a latent vector `h`.
///
/// Exact conditional factors up to order `K`, order-`K` conditionals with the
/// frozen innovation variance beyond. Requires `lambda > 0`; the degenerate
/// cascade is the caller's Gaussian limit.
pub fn log_density_latent(h: &[f64], p: &ModelParams, k_trunc: usize) -> Result<f64> {
    if h.is_empty() {
        return Err(MrwError::InvalidInput("empty latent vector".into()));
    }
    let kernel = CascadeKernel::new(p)?;
    if kernel.gamma(0) == 0.0 {
        return Err(MrwError::InvalidParameter(
            "log_density_latent requires lambda > 0 and t_corr > dt".into(),
        ));
    }
    let n = h.len();
    let k_eff = k_trunc.min(n - 1);
    let ar = durbin_levinson(&kernel.acov(k_eff + 1))?;
    let mut ll = ar_log_norm(n, &ar);
    for k in 0..n {
        let m = k.min(k_eff);
        let mut resid = h[k];
        if m > 0 {
            let c = ar.coeffs(m);
            for j in 1..=m {
                resid -= c[j - 1] * h[k - j];
            }
        }
        ll -= 0.5 * resid * resid / ar.innovation_var(m);
    }
    Ok(ll)
}

/// Conditional log-density `log p(x | h)`.
///
/// Standard/damped: independent Gaussians with variances `sigma^2 c e^{h_k}`.
/// Fractional: the whitened series `x_k exp(-h_k/2)/(sigma sqrt(c))` is
/// fractional Gaussian noise, evaluated through its truncated-AR
/// representation at order `k_trunc`.
pub fn log_density_obs_given_latent(
    x: &[f64],
    h: &[f64],
    p: &ModelParams,
    k_trunc: usize,
) -> Result<f64> {
    if x.len() != h.len() {
        return Err(MrwError::InvalidInput(format!(
            "length mismatch: x has {}, h has {}",
            x.len(),
            h.len()
        )));
    }
    if x.is_empty() {
        return Err(MrwError::InvalidInput("empty observation vector".into()));
    }
    let obs = ObsFactor::new(x, p, k_trunc)?;
    Ok(obs.log_density(h))
}

/// Laplace-approximated marginal log-likelihood of observations `x` under the
/// variant's observation model (standard white noise unless fractional).
///
/// For the damped model apply [`damped_residual_transform`] first, or use
/// [`model_loglik`].
pub fn laplace_loglik(x: &[f64], p: &ModelParams, k_trunc: usize) -> Result<LikelihoodResult> {
    if x.is_empty() {
        return Err(MrwError::InvalidInput("empty observation vector".into()));
    }
    p.validate()?;
    if p.lambda == 0.0 {
        return Err(MrwError::InvalidParameter(
            "laplace_loglik requires lambda > 0; model_loglik handles the Gaussian limit".into(),
        ));
    }
    let n = x.len();
    let latent = build_latent_field(n, p, k_trunc)?;
    let obs = ObsFactor::new(x, p, k_trunc)?;
    let c = CascadeKernel::new(p)?.normalizer();
    let h0 = initial_latent(x, p.sigma, c);
    let outcome = maximize_joint(&obs, &latent, h0);
    Ok(laplace_from_mode(&obs, &latent, outcome))
}

/// `(z_1, z_2 - phi z_1, ..., z_n - phi z_{n-1})`: the damped-model
/// likelihood of `z` is the standard-MRW likelihood of this vector (with the
/// `y_0 = 0` convention).
pub fn damped_residual_transform(z: &[f64], phi: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    let mut prev = 0.0;
    for &zk in z {
        out.push(zk - phi * prev);
        prev = zk;
    }
    out
}

/// Exact Gaussian log-likelihood in the degenerate `lambda = 0` limit, where
/// `h = 0` identically and the marginal equals the conditional at `h = 0`.
fn gaussian_limit_loglik(x: &[f64], p: &ModelParams, k_trunc: usize) -> Result<LikelihoodResult> {
    let obs = ObsFactor::new(x, p, k_trunc)?;
    let h = vec![0.0; x.len()];
    Ok(LikelihoodResult {
        loglik: obs.log_density(&h),
        h_star: h,
        log_det_hessian: 0.0,
        converged: true,
        newton_iters: 0,
    })
}

/// Model log-likelihood of a level series (drift already removed).
///
/// Standard and fractional variants apply to the increments of `levels`; the
/// damped variant applies the standard machinery to the residual transform of
/// the levels themselves (conditioning on `y_0 = 0`).
pub fn model_loglik(levels: &[f64], p: &ModelParams, k_trunc: usize) -> Result<LikelihoodResult> {
    p.validate()?;
    let x: Vec<f64> = match p.variant {
        Variant::Damped { phi } => damped_residual_transform(levels, phi),
        _ => {
            if levels.len() < 2 {
                return Err(MrwError::InvalidInput(
                    "need at least 2 levels to form returns".into(),
                ));
            }
            levels.windows(2).map(|w| w[1] - w[0]).collect()
        }
    };
    if p.lambda == 0.0 {
        gaussian_limit_loglik(&x, p, k_trunc)
    } else {
        laplace_loglik(&x, p, k_trunc)
    }
}
