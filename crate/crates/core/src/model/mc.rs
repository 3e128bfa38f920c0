//! Plain Monte Carlo estimate of the exponent measure from the spectral
//! representation V(z) = E[max_k W_k / z_k], E W_k = 1. Slow but independent
//! of the closed forms, so it serves as an oracle for them.

use super::{check_z, ModelParams};
use crate::error::{Error, Result};
use crate::mvn::cholesky_psd;
use crate::stream::RandomStream;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Estimate (V(z), standard error) from `n` spectral draws.
///
/// Logistic: W_k = E_k^(-theta) / Gamma(1 - theta) with E_k iid unit
/// exponential; theta = 1 is independence and returns sum 1/z_k exactly.
/// Brown-Resnick: W_k = exp(eps_k - var_k / 2) with eps the increment field
/// pinned at the origin, Cov(eps_i, eps_j) = gamma_i0 + gamma_j0 - gamma_ij.
pub fn mc_exponent_measure(
    params: &ModelParams,
    z: &[f64],
    n: usize,
    stream: RandomStream,
) -> Result<(f64, f64)> {
    check_z(z, params, true)?;
    if n < 2 {
        return Err(Error::InvalidData("need at least 2 draws".into()));
    }
    let d = z.len();
    let mut rng = stream.rng();

    enum Spectral {
        Logistic { theta: f64, log_gamma1m: f64 },
        BrownResnick { chol: Vec<f64>, half_var: Vec<f64> },
    }

    let spec = match params {
        ModelParams::Logistic(p) => {
            if p.theta() == 1.0 {
                let v = z.iter().filter(|v| v.is_finite()).map(|v| 1.0 / v).sum();
                return Ok((v, 0.0));
            }
            Spectral::Logistic {
                theta: p.theta(),
                log_gamma1m: libm::lgamma(1.0 - p.theta()),
            }
        }
        ModelParams::BrownResnick(p) => {
            let gamma = |h: f64| (h / p.lambda()).powf(p.nu());
            let sites = p.sites();
            let mut cov = vec![0.0; d * d];
            for i in 0..d {
                let gi = gamma(sites[i][0].hypot(sites[i][1]));
                for j in 0..=i {
                    let gj = gamma(sites[j][0].hypot(sites[j][1]));
                    let gij = gamma(
                        (sites[i][0] - sites[j][0]).hypot(sites[i][1] - sites[j][1]),
                    );
                    cov[i * d + j] = gi + gj - gij;
                    cov[j * d + i] = cov[i * d + j];
                }
            }
            let half_var = (0..d).map(|i| 0.5 * cov[i * d + i]).collect();
            Spectral::BrownResnick {
                chol: cholesky_psd(&cov, d)?,
                half_var,
            }
        }
    };

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut scratch = vec![0.0; d];
    for _ in 0..n {
        match &spec {
            Spectral::Logistic { theta, log_gamma1m } => {
                for w in scratch.iter_mut() {
                    let e: f64 = Exp1.sample(&mut rng);
                    *w = -theta * e.ln() - log_gamma1m;
                }
            }
            Spectral::BrownResnick { chol, half_var } => {
                let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..d {
                    let mut eps = 0.0;
                    for t in 0..=i {
                        eps += chol[i * d + t] * u[t];
                    }
                    scratch[i] = eps - half_var[i];
                }
            }
        }
        // scratch holds log W_k
        let mut best = f64::NEG_INFINITY;
        for k in 0..d {
            if z[k].is_finite() {
                best = best.max(scratch[k] - z[k].ln());
            }
        }
        let v = best.exp();
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum_sq - sum * sum / n as f64) / (n as f64 - 1.0);
    Ok((mean, (var.max(0.0) / n as f64).sqrt()))
}
