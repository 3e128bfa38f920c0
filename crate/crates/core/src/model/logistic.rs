//! Logistic exponent measure and its block derivatives, generic over the
//! scalar type so the same code produces values and forward-mode gradients.
//!
//! With x_i = z_i^(-1/theta) and s = sum_i x_i,
//!
//! ```text
//! V(z)          = s^theta
//! -V_tau(z)     = theta^(1-k) * prod_{m=1}^{k-1} (m - theta)
//!                 * s^(theta-k) * prod_{j in tau} z_j^(-1/theta - 1),  k = |tau|
//! ```
//!
//! obtained by differentiating s^theta once per index in tau; each
//! derivative pulls down a factor (theta - m)/theta times x_j / z_j. All work
//! happens on the log scale: s can overflow long before the likelihood does.

use crate::dual::{logsumexp_g, Real};
use crate::partition::SetPartition;

/// log s = log sum_i z_i^(-1/theta), stable via the log-sum-exp shift.
pub(super) fn log_s<S: Real>(theta: S, z: &[f64]) -> S {
    let terms: Vec<S> = z
        .iter()
        .map(|&zi| {
            if zi == f64::INFINITY {
                S::from_f64(f64::NEG_INFINITY)
            } else {
                S::from_f64(-zi.ln()) / theta
            }
        })
        .collect();
    logsumexp_g(&terms)
}

/// V(z) = exp(theta * log s). Infinite components drop out of the sum;
/// a single finite component z_j gives exactly 1/z_j.
pub(super) fn exponent_measure_g<S: Real>(theta: S, z: &[f64]) -> S {
    let finite = z.iter().filter(|&&v| v.is_finite()).count();
    if finite == 1 {
        // exact marginal, no powf round trip
        let zj = z.iter().find(|&&v| v.is_finite()).unwrap();
        return S::from_f64(1.0 / zj);
    }
    (theta * log_s(theta, z)).exp()
}

/// log(-V_tau) for the sorted index block tau, given log s precomputed.
///
/// At theta = 1 the factor prod (m - theta) vanishes for k >= 2: blocks of
/// independent components cannot co-occur, and the log is -inf.
pub(super) fn log_neg_vtau_g<S: Real>(theta: S, log_s: S, z: &[f64], tau: &[usize]) -> S {
    let k = tau.len();
    let one = S::from_f64(1.0);
    let mut acc = (one - S::from_f64(k as f64)) * theta.ln();
    for m in 1..k {
        let fac = S::from_f64(m as f64) - theta;
        if fac.value() <= 0.0 {
            return S::from_f64(f64::NEG_INFINITY);
        }
        acc = acc + fac.ln();
    }
    acc = acc + (theta - S::from_f64(k as f64)) * log_s;
    let mut sum_ln_z = 0.0;
    for &j in tau {
        sum_ln_z += z[j].ln();
    }
    let exponent = (S::from_f64(-1.0) / theta) - one;
    acc + exponent * S::from_f64(sum_ln_z)
}

/// Sum over blocks of log(-V_tau); -inf where a block factor vanishes
/// (theta = 1 with a non-singleton block).
pub(super) fn log_partition_factor_g<S: Real>(theta: S, z: &[f64], part: &SetPartition) -> S {
    let ls = log_s(theta, z);
    let mut acc = S::from_f64(0.0);
    for tau in part.blocks() {
        let term = log_neg_vtau_g(theta, ls, z, &tau);
        if term.value() == f64::NEG_INFINITY {
            return S::from_f64(f64::NEG_INFINITY);
        }
        acc = acc + term;
    }
    acc
}

/// Stephenson-Tawn log likelihood: -V + sum over blocks of log(-V_tau).
pub(super) fn st_loglik_g<S: Real>(theta: S, z: &[f64], part: &SetPartition) -> S {
    let factor = log_partition_factor_g(theta, z, part);
    if factor.value() == f64::NEG_INFINITY {
        return S::from_f64(f64::NEG_INFINITY);
    }
    S::from_f64(0.0) - (theta * log_s(theta, z)).exp() + factor
}
