//! Max-stable model families: exponent measures, their partial derivatives,
//! and partition likelihoods.
//!
//! A max-stable vector Z with unit Frechet margins has joint distribution
//! P(Z <= z) = exp(-V(z)). The full density expands over set partitions,
//!
//! ```text
//! f(z) = exp(-V(z)) * sum over partitions pi of prod over blocks tau of (-V_tau(z))
//! ```
//!
//! where V_tau is the mixed partial derivative of V in the coordinates of
//! tau. Every such derivative of a valid exponent measure is non-positive, so
//! each block contributes the log of a non-negative factor; [`log_neg_vtau`]
//! returns that log. [`st_loglik`] is the log of the single-partition term
//! (the Stephenson-Tawn likelihood with known partition), and
//! [`full_loglik_enum`] sums the terms over all partitions, which is feasible
//! for D <= 10.
//!
//! Two families are implemented:
//! - logistic: V(z) = (sum_i z_i^(-1/theta))^theta, 0 < theta <= 1, where
//!   theta = 1 is independence;
//! - Brown-Resnick: the process exp(eps(s) - var(s)/2) with eps an
//!   intrinsically stationary Gaussian field, eps(0) = 0, and semivariogram
//!   gamma(h) = (|h|/lambda)^nu. Its V reduces to multivariate normal
//!   probabilities evaluated by quasi-Monte Carlo, so those operations carry
//!   an [`EvalCtx`] with an accuracy budget and a random stream.

mod brown_resnick;
mod logistic;
mod mc;

use crate::data::SpatialDataset;
use crate::dual::{logsumexp, Dual};
use crate::error::{Error, Result};
use crate::mvn::MvnConfig;
use crate::partition::{enumerate_partitions, SetPartition};
use crate::stream::RandomStream;

pub use mc::mc_exponent_measure;

/// Enumeration guard for [`full_loglik_enum`]; B(10) = 115975 terms.
pub const MAX_FULL_ENUM_DIM: usize = 10;

/// Logistic dependence parameter, 0 < theta <= 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    theta: f64,
}

impl LogisticParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 || theta > 1.0 {
            return Err(Error::Domain(format!(
                "logistic theta = {} outside (0, 1]",
                theta
            )));
        }
        Ok(LogisticParams { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Brown-Resnick parameters: semivariogram gamma(h) = (|h|/lambda)^nu over
/// fixed, pairwise-distinct sites.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownResnickParams {
    lambda: f64,
    nu: f64,
    sites: Vec<[f64; 2]>,
}

impl BrownResnickParams {
    pub fn new(lambda: f64, nu: f64, sites: Vec<[f64; 2]>) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Domain(format!("range lambda = {} must be > 0", lambda)));
        }
        if !nu.is_finite() || nu <= 0.0 || nu > 2.0 {
            return Err(Error::Domain(format!(
                "smoothness nu = {} outside (0, 2]",
                nu
            )));
        }
        if sites.is_empty() {
            return Err(Error::InvalidData("no sites".into()));
        }
        for (i, s) in sites.iter().enumerate() {
            if !(s[0].is_finite() && s[1].is_finite()) {
                return Err(Error::InvalidData(format!(
                    "site {} has non-finite coordinates",
                    i + 1
                )));
            }
            for (j, t) in sites.iter().enumerate().take(i) {
                if s == t {
                    return Err(Error::InvalidData(format!(
                        "sites {} and {} coincide; the variogram degenerates",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(BrownResnickParams { lambda, nu, sites })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn sites(&self) -> &[[f64; 2]] {
        &self.sites
    }
}

/// A model family with concrete parameter values.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Logistic(LogisticParams),
    BrownResnick(BrownResnickParams),
}

impl ModelParams {
    pub fn logistic(theta: f64) -> Result<Self> {
        Ok(ModelParams::Logistic(LogisticParams::new(theta)?))
    }

    pub fn brown_resnick(lambda: f64, nu: f64, sites: Vec<[f64; 2]>) -> Result<Self> {
        Ok(ModelParams::BrownResnick(BrownResnickParams::new(
            lambda, nu, sites,
        )?))
    }

    /// Free parameter values in declaration order.
    pub fn values(&self) -> Vec<f64> {
        match self {
            ModelParams::Logistic(p) => vec![p.theta],
            ModelParams::BrownResnick(p) => vec![p.lambda, p.nu],
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ModelParams::Logistic(_) => &["theta"],
            ModelParams::BrownResnick(_) => &["lambda", "nu"],
        }
    }

    /// Same family and sites, new free parameter values.
    pub fn with_values(&self, vals: &[f64]) -> Result<Self> {
        match self {
            ModelParams::Logistic(_) => {
                if vals.len() != 1 {
                    return Err(Error::Domain("logistic takes one parameter".into()));
                }
                ModelParams::logistic(vals[0])
            }
            ModelParams::BrownResnick(p) => {
                if vals.len() != 2 {
                    return Err(Error::Domain("Brown-Resnick takes two parameters".into()));
                }
                ModelParams::brown_resnick(vals[0], vals[1], p.sites.clone())
            }
        }
    }

    /// Site count pinned by the parameters (Brown-Resnick only).
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            ModelParams::Logistic(_) => None,
            ModelParams::BrownResnick(p) => Some(p.sites.len()),
        }
    }

    /// Validates that a dataset is compatible with this model.
    pub fn check_dataset(&self, data: &SpatialDataset) -> Result<()> {
        if let Some(d) = self.fixed_dim() {
            if data.dim() != d {
                return Err(Error::InvalidData(format!(
                    "model has {} sites but data has {}",
                    d,
                    data.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Evaluation context: quasi-Monte Carlo budget and randomness for the
/// Brown-Resnick normal probabilities. Logistic evaluations ignore it.
#[derive(Debug, Clone, Copy)]
pub struct EvalCtx {
    pub mvn: MvnConfig,
    pub stream: RandomStream,
}

impl EvalCtx {
    pub fn new(stream: RandomStream) -> Self {
        EvalCtx {
            mvn: MvnConfig::default(),
            stream,
        }
    }

    pub fn with_mvn(mvn: MvnConfig, stream: RandomStream) -> Self {
        EvalCtx { mvn, stream }
    }
}

fn check_z(z: &[f64], params: &ModelParams, allow_inf: bool) -> Result<()> {
    if z.is_empty() {
        return Err(Error::InvalidData("empty observation".into()));
    }
    if let Some(d) = params.fixed_dim() {
        if z.len() != d {
            return Err(Error::InvalidData(format!(
                "observation has {} components but the model has {} sites",
                z.len(),
                d
            )));
        }
    }
    for (i, &v) in z.iter().enumerate() {
        let ok = v > 0.0 && (v.is_finite() || (allow_inf && v == f64::INFINITY));
        if !ok {
            return Err(Error::InvalidData(format!(
                "component {}: value {} outside the positive support",
                i + 1,
                v
            )));
        }
    }
    Ok(())
}

fn check_tau(tau: &[usize], d: usize) -> Result<Vec<usize>> {
    if tau.is_empty() {
        return Err(Error::InvalidData("empty index set".into()));
    }
    let mut sorted = tau.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(Error::InvalidData(format!(
                "index {} repeated in the block",
                w[0] + 1
            )));
        }
    }
    if *sorted.last().unwrap() >= d {
        return Err(Error::InvalidData(format!(
            "index {} out of range for {} components",
            sorted.last().unwrap() + 1,
            d
        )));
    }
    Ok(sorted)
}

/// The exponent measure V(z); components may be +inf (they marginalize out).
pub fn exponent_measure(params: &ModelParams, z: &[f64], ctx: &EvalCtx) -> Result<f64> {
    Ok(exponent_measure_with_error(params, z, ctx)?.0)
}

/// V(z) plus the accumulated quasi-Monte Carlo error estimate (zero for the
/// logistic family, whose V is closed form).
pub fn exponent_measure_with_error(
    params: &ModelParams,
    z: &[f64],
    ctx: &EvalCtx,
) -> Result<(f64, f64)> {
    check_z(z, params, true)?;
    match params {
        ModelParams::Logistic(p) => Ok((logistic::exponent_measure_g(p.theta, z), 0.0)),
        ModelParams::BrownResnick(p) => {
            brown_resnick::exponent_measure_g::<f64>(p.lambda, p.nu, &p.sites, z, ctx)
        }
    }
}

/// log of -dV/dz_tau, the non-negative factor contributed by block tau.
/// Returns -inf when the factor vanishes (e.g. logistic theta = 1 with
/// |tau| >= 2).
pub fn log_neg_vtau(params: &ModelParams, z: &[f64], tau: &[usize], ctx: &EvalCtx) -> Result<f64> {
    check_z(z, params, false)?;
    let tau = check_tau(tau, z.len())?;
    match params {
        ModelParams::Logistic(p) => {
            let logs = logistic::log_s(p.theta, z);
            Ok(logistic::log_neg_vtau_g(p.theta, logs, z, &tau))
        }
        ModelParams::BrownResnick(p) => {
            brown_resnick::log_neg_vtau_g::<f64>(p.lambda, p.nu, &p.sites, z, &tau, ctx)
        }
    }
}

/// Stephenson-Tawn log likelihood of (z, partition):
/// -V(z) + sum over blocks of log(-V_tau).
pub fn st_loglik(
    params: &ModelParams,
    z: &[f64],
    part: &SetPartition,
    ctx: &EvalCtx,
) -> Result<f64> {
    check_z(z, params, false)?;
    if part.n_items() != z.len() {
        return Err(Error::InvalidData(format!(
            "partition of {} items does not match {} components",
            part.n_items(),
            z.len()
        )));
    }
    match params {
        ModelParams::Logistic(p) => Ok(logistic::st_loglik_g(p.theta, z, part)),
        ModelParams::BrownResnick(p) => {
            brown_resnick::st_loglik_g::<f64>(p.lambda, p.nu, &p.sites, z, part, ctx)
        }
    }
}

/// [`st_loglik`] together with its gradient in the free model parameters
/// (d/dtheta, or [d/dlambda, d/dnu]), by forward-mode differentiation.
/// The logistic boundary theta = 1 is rejected: the factor derivatives blow
/// up there.
pub fn st_loglik_with_grad(
    params: &ModelParams,
    z: &[f64],
    part: &SetPartition,
    ctx: &EvalCtx,
) -> Result<(f64, Vec<f64>)> {
    check_z(z, params, false)?;
    if part.n_items() != z.len() {
        return Err(Error::InvalidData(format!(
            "partition of {} items does not match {} components",
            part.n_items(),
            z.len()
        )));
    }
    match params {
        ModelParams::Logistic(p) => {
            if p.theta >= 1.0 {
                return Err(Error::Domain(
                    "gradient undefined at the independence boundary theta = 1".into(),
                ));
            }
            let theta = Dual::<1>::var(p.theta, 0);
            let val = logistic::st_loglik_g(theta, z, part);
            Ok((val.val, vec![val.eps[0]]))
        }
        ModelParams::BrownResnick(p) => {
            let lambda = Dual::<2>::var(p.lambda, 0);
            let nu = Dual::<2>::var(p.nu, 1);
            let val = brown_resnick::st_loglik_g(lambda, nu, &p.sites, z, part, ctx)?;
            Ok((val.val, vec![val.eps[0], val.eps[1]]))
        }
    }
}

/// V(z) with its gradient in the free model parameters. Well defined on the
/// whole parameter domain, including the logistic boundary theta = 1.
pub fn exponent_measure_with_grad(
    params: &ModelParams,
    z: &[f64],
    ctx: &EvalCtx,
) -> Result<(f64, Vec<f64>)> {
    check_z(z, params, true)?;
    match params {
        ModelParams::Logistic(p) => {
            let theta = Dual::<1>::var(p.theta, 0);
            let v = logistic::exponent_measure_g(theta, z);
            Ok((v.val, vec![v.eps[0]]))
        }
        ModelParams::BrownResnick(p) => {
            let lambda = Dual::<2>::var(p.lambda, 0);
            let nu = Dual::<2>::var(p.nu, 1);
            let (v, _) = brown_resnick::exponent_measure_g(lambda, nu, &p.sites, z, ctx)?;
            Ok((v.val, vec![v.eps[0], v.eps[1]]))
        }
    }
}

/// Sum over the partition's blocks of log(-V_tau). Block b draws from
/// `stream.child(b + 1)`, leaving `child(0)` for the V term, so
/// [`st_loglik`] is exactly -V at `child(0)` plus this factor.
pub fn log_partition_factor(
    params: &ModelParams,
    z: &[f64],
    part: &SetPartition,
    ctx: &EvalCtx,
) -> Result<f64> {
    check_z(z, params, false)?;
    if part.n_items() != z.len() {
        return Err(Error::InvalidData(format!(
            "partition of {} items does not match {} components",
            part.n_items(),
            z.len()
        )));
    }
    match params {
        ModelParams::Logistic(p) => Ok(logistic::log_partition_factor_g(p.theta, z, part)),
        ModelParams::BrownResnick(p) => {
            brown_resnick::log_partition_factor_g::<f64>(p.lambda, p.nu, &p.sites, z, part, ctx)
        }
    }
}

/// [`log_partition_factor`] with its gradient in the free model parameters.
/// The logistic boundary theta = 1 is rejected as in [`st_loglik_with_grad`].
/// A factor of -inf comes back with zero gradient.
pub fn log_partition_factor_with_grad(
    params: &ModelParams,
    z: &[f64],
    part: &SetPartition,
    ctx: &EvalCtx,
) -> Result<(f64, Vec<f64>)> {
    check_z(z, params, false)?;
    if part.n_items() != z.len() {
        return Err(Error::InvalidData(format!(
            "partition of {} items does not match {} components",
            part.n_items(),
            z.len()
        )));
    }
    match params {
        ModelParams::Logistic(p) => {
            if p.theta >= 1.0 {
                return Err(Error::Domain(
                    "gradient undefined at the independence boundary theta = 1".into(),
                ));
            }
            let theta = Dual::<1>::var(p.theta, 0);
            let f = logistic::log_partition_factor_g(theta, z, part);
            if f.val == f64::NEG_INFINITY {
                return Ok((f64::NEG_INFINITY, vec![0.0]));
            }
            Ok((f.val, vec![f.eps[0]]))
        }
        ModelParams::BrownResnick(p) => {
            let lambda = Dual::<2>::var(p.lambda, 0);
            let nu = Dual::<2>::var(p.nu, 1);
            let f = brown_resnick::log_partition_factor_g(lambda, nu, &p.sites, z, part, ctx)?;
            if f.val == f64::NEG_INFINITY {
                return Ok((f64::NEG_INFINITY, vec![0.0, 0.0]));
            }
            Ok((f.val, vec![f.eps[0], f.eps[1]]))
        }
    }
}

/// Exact full log likelihood by summing the partition expansion over all
/// partitions. V is shared across the terms, so it is evaluated once;
/// partition `i` draws from `stream.child(i + 1)` with one grandchild per
/// block. Refuses D > 10.
pub fn full_loglik_enum(params: &ModelParams, z: &[f64], ctx: &EvalCtx) -> Result<f64> {
    check_z(z, params, false)?;
    let d = z.len();
    if d > MAX_FULL_ENUM_DIM {
        return Err(Error::Refused(format!(
            "full enumeration supported for D <= {}, got {}",
            MAX_FULL_ENUM_DIM, d
        )));
    }
    let vctx = EvalCtx {
        mvn: ctx.mvn,
        stream: ctx.stream.child(0),
    };
    let (v, _) = exponent_measure_with_error(params, z, &vctx)?;
    let mut terms = Vec::new();
    for (idx, part) in enumerate_partitions(d)?.enumerate() {
        let pctx = EvalCtx {
            mvn: ctx.mvn,
            stream: ctx.stream.child(idx as u64 + 1),
        };
        terms.push(log_partition_factor(params, z, &part, &pctx)?);
    }
    Ok(-v + logsumexp(&terms))
}

#[cfg(test)]
mod tests;
