//! Model variants, parameterizations and the covariance kernels shared by
//! simulation and likelihood code.
//!
//! All three variants share a log-normal stochastic volatility
//! `M_k = c exp(h_k)`, where `h_k` is a centered Gaussian process with
//! covariance
//!
//! `gamma(k) = lambda^2 log+( T / ((k+1) dt) )`
//!
//! and `c = exp(-gamma(0)/2)` normalizes `E[M_k] = 1`. The variants differ in
//! how returns revert to the mean:
//!
//! - `Standard`:   `y_k = y_{k-1} + sigma sqrt(M_k) eps_k`
//! - `Damped`:     `y_k = phi y_{k-1} + sigma sqrt(M_k) eps_k`, `phi = 1 - nu dt`
//! - `Fractional`: `y_k = y_{k-1} + sigma sqrt(M_k) eps_k^(H)` with fractional
//!   Gaussian noise innovations, anti-correlated for `H < 1/2`.

use serde::{Deserialize, Serialize};

use crate::error::{MrwError, Result};

/// Mean-reversion mechanism of a model, with its extra parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    Standard,
    /// AR(1)-type damping with coefficient `phi = 1 - nu dt`, `0 < phi < 1`.
    Damped { phi: f64 },
    /// Fractional Gaussian noise innovations with Hurst exponent `0 < hurst < 1`.
    Fractional { hurst: f64 },
}

/// Variant selector without parameter payload (used when fitting).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariantKind {
    Standard,
    Damped,
    Fractional,
}

impl Variant {
    pub fn kind(&self) -> VariantKind {
        match self {
            Variant::Standard => VariantKind::Standard,
            Variant::Damped { .. } => VariantKind::Damped,
            Variant::Fractional { .. } => VariantKind::Fractional,
        }
    }
}

impl VariantKind {
    pub fn name(&self) -> &'static str {
        match self {
            VariantKind::Standard => "standard",
            VariantKind::Damped => "damped",
            VariantKind::Fractional => "fractional",
        }
    }
}

/// Full parameter vector of one model.
///
/// `t_corr` (the decorrelation scale `T`) and `dt` are in the same time unit;
/// the default unit is weeks. `mu` is a drift per `dt` that preprocessing
/// removes before any likelihood evaluation; likelihood code assumes `mu = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub variant: Variant,
    /// Intermittency parameter `lambda >= 0` (dimensionless).
    pub lambda: f64,
    /// Scale of the innovations, per sqrt(dt); `sigma > 0`.
    pub sigma: f64,
    /// Decorrelation scale of the log-volatility, `t_corr >= dt`.
    pub t_corr: f64,
    /// Drift per `dt`. Kept for bookkeeping only; simulators and likelihoods
    /// treat the input as drift-free.
    pub mu: f64,
    /// Sampling interval, in the chosen time unit.
    pub dt: f64,
}

impl ModelParams {
    pub fn standard(lambda: f64, sigma: f64, t_corr: f64, dt: f64) -> Result<Self> {
        let p = ModelParams { variant: Variant::Standard, lambda, sigma, t_corr, mu: 0.0, dt };
        p.validate()?;
        Ok(p)
    }

    pub fn damped(lambda: f64, sigma: f64, t_corr: f64, phi: f64, dt: f64) -> Result<Self> {
        let p = ModelParams { variant: Variant::Damped { phi }, lambda, sigma, t_corr, mu: 0.0, dt };
        p.validate()?;
        Ok(p)
    }

    /// Damped model parameterized by the correlation time `1/nu` (same unit
    /// as `dt`); `phi = 1 - dt/nu_inv`.
    pub fn damped_from_nu_inv(
        lambda: f64,
        sigma: f64,
        t_corr: f64,
        nu_inv: f64,
        dt: f64,
    ) -> Result<Self> {
        if !(nu_inv > 0.0) {
            return Err(MrwError::InvalidParameter(format!("1/nu must be positive, got {nu_inv}")));
        }
        Self::damped(lambda, sigma, t_corr, 1.0 - dt / nu_inv, dt)
    }

    pub fn fractional(lambda: f64, sigma: f64, t_corr: f64, hurst: f64, dt: f64) -> Result<Self> {
        let p =
            ModelParams { variant: Variant::Fractional { hurst }, lambda, sigma, t_corr, mu: 0.0, dt };
        p.validate()?;
        Ok(p)
    }

    pub fn with_drift(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(MrwError::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(MrwError::InvalidParameter(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.dt > 0.0) {
            return Err(MrwError::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_corr >= self.dt) {
            return Err(MrwError::InvalidParameter(format!(
                "t_corr must be >= dt, got t_corr={} dt={}",
                self.t_corr, self.dt
            )));
        }
        match self.variant {
            Variant::Standard => {}
            Variant::Damped { phi } => {
                if !(phi > 0.0 && phi < 1.0) {
                    return Err(MrwError::InvalidParameter(format!(
                        "phi must lie in (0, 1), got {phi}"
                    )));
                }
            }
            Variant::Fractional { hurst } => {
                if !(hurst > 0.0 && hurst < 1.0) {
                    return Err(MrwError::InvalidParameter(format!(
                        "hurst must lie in (0, 1), got {hurst}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Damping rate `nu = (1 - phi)/dt` (damped variant only).
    pub fn nu(&self) -> Option<f64> {
        match self.variant {
            Variant::Damped { phi } => Some((1.0 - phi) / self.dt),
            _ => None,
        }
    }

    /// Correlation time `1/nu` in the time unit of `dt` (damped variant only).
    pub fn nu_inv(&self) -> Option<f64> {
        self.nu().map(|nu| 1.0 / nu)
    }

    pub fn phi(&self) -> Option<f64> {
        match self.variant {
            Variant::Damped { phi } => Some(phi),
            _ => None,
        }
    }

    pub fn hurst(&self) -> Option<f64> {
        match self.variant {
            Variant::Fractional { hurst } => Some(hurst),
            _ => None,
        }
    }
}

/// Covariance kernel of the latent log-volatility (validated snapshot of the
/// cascade parameters).
#[derive(Debug, Clone, Copy)]
pub struct CascadeKernel {
    lambda_sq: f64,
    t_over_dt: f64,
}

impl CascadeKernel {
    pub fn new(p: &ModelParams) -> Result<Self> {
        p.validate()?;
        Ok(CascadeKernel { lambda_sq: p.lambda * p.lambda, t_over_dt: p.t_corr / p.dt })
    }

    /// `gamma(k) = lambda^2 log+( T / ((k+1) dt) )`; exactly zero at and
    /// beyond the cutoff lag.
    pub fn gamma(&self, lag: usize) -> f64 {
        let ratio = self.t_over_dt / (lag as f64 + 1.0);
        if ratio > 1.0 {
            self.lambda_sq * ratio.ln()
        } else {
            0.0
        }
    }

    /// Normalizer `c = exp(-gamma(0)/2)`, so that `E[c exp(h_k)] = 1`.
    pub fn normalizer(&self) -> f64 {
        (-self.gamma(0) / 2.0).exp()
    }

    /// Number of lags with nonzero covariance (0 when the cascade is
    /// degenerate). `gamma(k) = 0` for every `k >= support`.
    pub fn support(&self) -> usize {
        if self.lambda_sq == 0.0 {
            return 0;
        }
        // gamma(k) > 0  <=>  k + 1 < T/dt
        let cutoff = (self.t_over_dt - 1.0).ceil() as usize;
        let mut s = cutoff;
        while s > 0 && self.gamma(s - 1) == 0.0 {
            s -= 1;
        }
        s
    }

    /// Autocovariance sequence `gamma(0..len)`.
    pub fn acov(&self, len: usize) -> Vec<f64> {
        (0..len).map(|k| self.gamma(k)).collect()
    }
}

/// Covariance kernel of unit-variance fractional Gaussian noise.
#[derive(Debug, Clone, Copy)]
pub struct FgnKernel {
    two_h: f64,
}

impl FgnKernel {
    pub fn new(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(MrwError::InvalidParameter(format!("hurst must lie in (0, 1), got {hurst}")));
        }
        Ok(FgnKernel { two_h: 2.0 * hurst })
    }

    /// `beta(k) = ((k+1)^2H - 2 k^2H + (k-1)^2H) / 2` for `k >= 1`, `beta(0) = 1`.
    pub fn beta(&self, lag: usize) -> f64 {
        if lag == 0 {
            return 1.0;
        }
        if self.two_h == 1.0 {
            return 0.0; // H = 1/2: white noise
        }
        let k = lag as f64;
        0.5 * ((k + 1.0).powf(self.two_h) - 2.0 * k.powf(self.two_h) + (k - 1.0).powf(self.two_h))
    }

    pub fn acov(&self, len: usize) -> Vec<f64> {
        (0..len).map(|k| self.beta(k)).collect()
    }
}

/// Latent log-volatility covariance at a given lag.
pub fn cascade_covariance(lag: usize, p: &ModelParams) -> Result<f64> {
    Ok(CascadeKernel::new(p)?.gamma(lag))
}

/// Volatility normalizer `c = exp(-gamma(0)/2)`.
pub fn cascade_normalizer(p: &ModelParams) -> Result<f64> {
    Ok(CascadeKernel::new(p)?.normalizer())
}

/// Covariance of unit-variance fractional Gaussian noise at a given lag.
pub fn fgn_covariance(lag: usize, hurst: f64) -> Result<f64> {
    Ok(FgnKernel::new(hurst)?.beta(lag))
}

/// Asymptotic shape of the return autocorrelation at `lag >= 1`.
///
/// Damped: `-(dt^2 sigma^2 nu^2 / (1 - phi^2)) exp(-nu k dt)`, an exponential
/// decay with rate `nu`. Fractional: `2H(2H-1) k^(2H - 2 - lambda^2/4)`, an
/// algebraic decay, negative for `H < 1/2`. Standard returns are uncorrelated.
pub fn theoretical_return_acf(lag: usize, p: &ModelParams) -> Result<f64> {
    if lag == 0 {
        return Err(MrwError::InvalidInput("theoretical_return_acf needs lag >= 1".into()));
    }
    p.validate()?;
    let k = lag as f64;
    Ok(match p.variant {
        Variant::Standard => 0.0,
        Variant::Damped { phi } => {
            let nu = (1.0 - phi) / p.dt;
            let dt2 = p.dt * p.dt;
            -(dt2 * p.sigma * p.sigma * nu * nu / (1.0 - phi * phi)) * (-nu * k * p.dt).exp()
        }
        Variant::Fractional { hurst } => {
            let expo = 2.0 * hurst - 2.0 - p.lambda * p.lambda / 4.0;
            2.0 * hurst * (2.0 * hurst - 1.0) * k.powf(expo)
        }
    })
}
