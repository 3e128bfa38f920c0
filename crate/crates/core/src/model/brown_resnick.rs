//! Brown-Resnick exponent measure over fixed planar sites, generic over the
//! scalar type so forward-mode gradients flow through the quasi-Monte Carlo
//! normal probabilities.
//!
//! Write Gamma_ij = 2 gamma(s_i - s_j) for the doubled semivariogram. For an
//! anchor index a, the Gaussian increments behind the process have
//!
//! ```text
//! x_j      = ln z_j - ln z_a + Gamma_ja / 2            (j != a)
//! R_ij     = (Gamma_ia + Gamma_ja - Gamma_ij) / 2,     R_jj = Gamma_ja
//! ```
//!
//! and the exponent measure is V(z) = sum_a z_a^(-1) Phi(x; R), one
//! (D-1)-dimensional normal probability per anchor. The block derivative
//! factors through the same objects: with a the smallest index of tau,
//! A = tau minus a and B the complement of tau,
//!
//! ```text
//! -V_tau(z) = z_a^(-2) prod_{j in A} z_j^(-1)
//!             * phi(x_A; R_AA) * Phi(x_B - mu; C)
//! mu = R_BA R_AA^(-1) x_A,   C = R_BB - R_BA R_AA^(-1) R_AB
//! ```
//!
//! the normal density at the A coordinates times the conditional normal
//! probability of the B coordinates. Everything reduces to Cholesky solves on
//! matrices of side < D.

use super::EvalCtx;
use crate::dual::Real;
use crate::error::{Error, Result};
use crate::mvn::{cholesky_psd, mvn_cdf_g};
use crate::partition::SetPartition;

const LN_2PI: f64 = 1.8378770664093453;

// conditional variances at or below this are treated as point masses
const VAR_FLOOR: f64 = 1e-12;

/// Doubled semivariogram matrix Gamma_ij = 2 (|s_i - s_j| / lambda)^nu,
/// row-major D x D. The diagonal is exactly zero; off the diagonal the
/// distance is positive, so powf never sees a zero base.
pub(super) fn gamma2_matrix<S: Real>(lambda: S, nu: S, sites: &[[f64; 2]]) -> Vec<S> {
    let d = sites.len();
    let mut g = vec![S::from_f64(0.0); d * d];
    for i in 0..d {
        for j in 0..i {
            let dist = (sites[i][0] - sites[j][0]).hypot(sites[i][1] - sites[j][1]);
            let v = (S::from_f64(dist) / lambda).powf(nu).scale(2.0);
            g[i * d + j] = v;
            g[j * d + i] = v;
        }
    }
    g
}

fn increment_cov<S: Real>(g2: &[S], d: usize, a: usize, i: usize, j: usize) -> S {
    if i == j {
        g2[i * d + a]
    } else {
        (g2[i * d + a] + g2[j * d + a] - g2[i * d + j]).scale(0.5)
    }
}

/// V(z) with the summed quasi-Monte Carlo error estimate. Infinite
/// components marginalize out; anchor k draws from `ctx.stream.child(k)`.
pub(super) fn exponent_measure_g<S: Real>(
    lambda: S,
    nu: S,
    sites: &[[f64; 2]],
    z: &[f64],
    ctx: &EvalCtx,
) -> Result<(S, f64)> {
    let d = z.len();
    let finite: Vec<usize> = (0..d).filter(|&i| z[i].is_finite()).collect();
    if finite.len() == 1 {
        return Ok((S::from_f64(1.0 / z[finite[0]]), 0.0));
    }
    let g2 = gamma2_matrix(lambda, nu, sites);
    let mut total = S::from_f64(0.0);
    let mut err = 0.0;
    for &a in &finite {
        let others: Vec<usize> = finite.iter().copied().filter(|&j| j != a).collect();
        let k = others.len();
        let mut cov = vec![S::from_f64(0.0); k * k];
        for i in 0..k {
            for j in 0..=i {
                let v = increment_cov(&g2, d, a, others[i], others[j]);
                cov[i * k + j] = v;
                cov[j * k + i] = v;
            }
        }
        let sd: Vec<S> = (0..k).map(|i| cov[i * k + i].sqrt()).collect();
        let mut corr = vec![S::from_f64(1.0); k * k];
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    corr[i * k + j] = cov[i * k + j] / (sd[i] * sd[j]);
                }
            }
        }
        let limits: Vec<S> = (0..k)
            .map(|i| {
                let x = S::from_f64(z[others[i]].ln() - z[a].ln()) + g2[others[i] * d + a].scale(0.5);
                x / sd[i]
            })
            .collect();
        let (p, e) = mvn_cdf_g(&limits, &corr, &ctx.mvn, ctx.stream.child(a as u64))?;
        total = total + p.scale(1.0 / z[a]);
        err += e / z[a];
    }
    Ok((total, err))
}

fn forward_solve<S: Real>(l: &[S], k: usize, rhs: &mut [S]) {
    for i in 0..k {
        let mut s = rhs[i];
        for t in 0..i {
            s = s - l[i * k + t] * rhs[t];
        }
        rhs[i] = s / l[i * k + i];
    }
}

fn transpose_back_solve<S: Real>(l: &[S], k: usize, rhs: &mut [S]) {
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for t in (i + 1)..k {
            s = s - l[t * k + i] * rhs[t];
        }
        rhs[i] = s / l[i * k + i];
    }
}

/// log of -V_tau for sorted tau over all-finite z. Returns -inf when the
/// conditional probability factor vanishes; errors when the density factor
/// degenerates (singular increment covariance, reachable only at nu = 2).
pub(super) fn log_neg_vtau_g<S: Real>(
    lambda: S,
    nu: S,
    sites: &[[f64; 2]],
    z: &[f64],
    tau: &[usize],
    ctx: &EvalCtx,
) -> Result<S> {
    let d = z.len();
    let a = tau[0];
    let a_set = &tau[1..];
    let mut in_tau = vec![false; d];
    for &j in tau {
        in_tau[j] = true;
    }
    let b_set: Vec<usize> = (0..d).filter(|&j| !in_tau[j]).collect();
    let ka = a_set.len();
    let kb = b_set.len();

    let mut const_log = -2.0 * z[a].ln();
    for &j in a_set {
        const_log -= z[j].ln();
    }
    let mut acc = S::from_f64(const_log);
    if ka == 0 && kb == 0 {
        return Ok(acc);
    }

    let g2 = gamma2_matrix(lambda, nu, sites);
    let x_of = |j: usize| S::from_f64(z[j].ln() - z[a].ln()) + g2[j * d + a].scale(0.5);

    // density factor over A, via the Cholesky of R_AA
    let mut w: Vec<S> = Vec::new();
    let mut l: Vec<S> = Vec::new();
    if ka > 0 {
        let mut raa = vec![S::from_f64(0.0); ka * ka];
        for i in 0..ka {
            for j in 0..=i {
                let v = increment_cov(&g2, d, a, a_set[i], a_set[j]);
                raa[i * ka + j] = v;
                raa[j * ka + i] = v;
            }
        }
        l = cholesky_psd(&raa, ka)?;
        for i in 0..ka {
            if l[i * ka + i].value() <= 0.0 {
                return Err(Error::Numeric(
                    "singular increment covariance: the density factor degenerates".into(),
                ));
            }
        }
        let mut y: Vec<S> = a_set.iter().map(|&j| x_of(j)).collect();
        forward_solve(&l, ka, &mut y);
        let mut quad = S::from_f64(0.0);
        let mut log_det_half = S::from_f64(0.0);
        for i in 0..ka {
            quad = quad + y[i] * y[i];
            log_det_half = log_det_half + l[i * ka + i].ln();
        }
        acc = acc - S::from_f64(0.5 * ka as f64 * LN_2PI) - log_det_half - quad.scale(0.5);
        transpose_back_solve(&l, ka, &mut y);
        w = y; // now R_AA^(-1) x_A
    }

    // conditional probability factor over B
    if kb > 0 {
        let mut cond = vec![S::from_f64(0.0); kb * kb];
        for i in 0..kb {
            for j in 0..=i {
                let v = increment_cov(&g2, d, a, b_set[i], b_set[j]);
                cond[i * kb + j] = v;
                cond[j * kb + i] = v;
            }
        }
        let mut centered: Vec<S> = b_set.iter().map(|&j| x_of(j)).collect();
        if ka > 0 {
            // M = L^(-1) R_AB column by column; C -= M^T M; mu = R_BA w
            let mut m = vec![S::from_f64(0.0); ka * kb];
            for (jj, &bj) in b_set.iter().enumerate() {
                let mut col: Vec<S> = a_set
                    .iter()
                    .map(|&ai| increment_cov(&g2, d, a, ai, bj))
                    .collect();
                forward_solve(&l, ka, &mut col);
                for i in 0..ka {
                    m[i * kb + jj] = col[i];
                }
            }
            for i in 0..kb {
                for j in 0..=i {
                    let mut s = S::from_f64(0.0);
                    for t in 0..ka {
                        s = s + m[t * kb + i] * m[t * kb + j];
                    }
                    cond[i * kb + j] = cond[i * kb + j] - s;
                    if i != j {
                        cond[j * kb + i] = cond[i * kb + j];
                    }
                }
            }
            for (jj, &bj) in b_set.iter().enumerate() {
                let mut mu = S::from_f64(0.0);
                for (i, &ai) in a_set.iter().enumerate() {
                    mu = mu + increment_cov(&g2, d, a, bj, ai) * w[i];
                }
                centered[jj] = centered[jj] - mu;
            }
        }

        // point-mass coordinates: keep if the mass sits below the limit
        let keep: Vec<usize> = (0..kb)
            .filter(|&i| cond[i * kb + i].value() > VAR_FLOOR)
            .collect();
        for i in 0..kb {
            if cond[i * kb + i].value() <= VAR_FLOOR && centered[i].value() < 0.0 {
                return Ok(S::from_f64(f64::NEG_INFINITY));
            }
        }
        if !keep.is_empty() {
            let kk = keep.len();
            let sd: Vec<S> = keep.iter().map(|&i| cond[i * kb + i].sqrt()).collect();
            let mut corr = vec![S::from_f64(1.0); kk * kk];
            for i in 0..kk {
                for j in 0..kk {
                    if i != j {
                        corr[i * kk + j] = cond[keep[i] * kb + keep[j]] / (sd[i] * sd[j]);
                    }
                }
            }
            let limits: Vec<S> = (0..kk).map(|i| centered[keep[i]] / sd[i]).collect();
            let (p, _e) = mvn_cdf_g(&limits, &corr, &ctx.mvn, ctx.stream)?;
            acc = acc + p.ln();
        }
    }

    Ok(acc)
}

/// Sum over blocks of log(-V_tau). Block b draws from `stream.child(b + 1)`;
/// `child(0)` is reserved for the V term, so adding -V evaluated there
/// reproduces [`st_loglik_g`] exactly.
pub(super) fn log_partition_factor_g<S: Real>(
    lambda: S,
    nu: S,
    sites: &[[f64; 2]],
    z: &[f64],
    part: &SetPartition,
    ctx: &EvalCtx,
) -> Result<S> {
    let mut acc = S::from_f64(0.0);
    for (b, tau) in part.blocks().iter().enumerate() {
        let bctx = EvalCtx {
            mvn: ctx.mvn,
            stream: ctx.stream.child(b as u64 + 1),
        };
        let term = log_neg_vtau_g(lambda, nu, sites, z, tau, &bctx)?;
        if term.value() == f64::NEG_INFINITY {
            return Ok(S::from_f64(f64::NEG_INFINITY));
        }
        acc = acc + term;
    }
    Ok(acc)
}

/// -V(z) + sum over blocks of log(-V_tau); the V term and each block get
/// their own stream child so the result does not depend on block count.
pub(super) fn st_loglik_g<S: Real>(
    lambda: S,
    nu: S,
    sites: &[[f64; 2]],
    z: &[f64],
    part: &SetPartition,
    ctx: &EvalCtx,
) -> Result<S> {
    let vctx = EvalCtx {
        mvn: ctx.mvn,
        stream: ctx.stream.child(0),
    };
    let (v, _) = exponent_measure_g(lambda, nu, sites, z, &vctx)?;
    let factor = log_partition_factor_g(lambda, nu, sites, z, part, ctx)?;
    if factor.value() == f64::NEG_INFINITY {
        return Ok(S::from_f64(f64::NEG_INFINITY));
    }
    Ok(-v + factor)
}
