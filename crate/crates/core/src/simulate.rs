//! Exact simulators for the two max-stable families.
//!
//! The logistic sampler uses the positive-stable mixture: with S positive
//! stable of index theta (Laplace transform exp(-t^theta)) and E_i iid unit
//! exponentials, Z_i = (S / E_i)^theta has the logistic law with unit Frechet
//! margins. S comes from Kanter's rejection-free representation.
//!
//! The Brown-Resnick sampler builds the process site by site from its
//! extremal functions: at each site it walks a Poisson point process
//! downwards, draws the spectral function normalized at that site (a
//! log-normal field of pinned Gaussian increments), and accepts it only if it
//! does not disturb the records already fixed at earlier sites. The result is
//! an exact draw in finitely many steps, and the identity of the function
//! that set each site's record is the hitting partition, which
//! [`sample_brown_resnick_recorded`] returns alongside the values.

use crate::error::{Error, Result};
use crate::model::{BrownResnickParams, LogisticParams};
use crate::mvn::cholesky_psd;
use crate::partition::SetPartition;
use crate::stream::RandomStream;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};

/// Positive stable draw on the log scale, Kanter's representation:
/// ln S = ((1-theta)/theta) (ln a(U) - ln W) with U uniform on (0, pi),
/// W unit exponential, and
/// a(u) = sin((1-theta)u) sin(theta u)^(theta/(1-theta)) / sin(u)^(1/(1-theta)).
fn log_positive_stable<R: Rng>(theta: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) * std::f64::consts::PI;
    let w: f64 = Exp1.sample(rng);
    let r = 1.0 - theta;
    let log_a = ((r * u).sin()).ln() + (theta / r) * ((theta * u).sin()).ln()
        - (1.0 / r) * (u.sin()).ln();
    (r / theta) * (log_a - w.ln())
}

/// Draw `n` replicates of a `dim`-variate logistic max-stable vector.
/// Replicate r uses `stream.child(r)`, so subsets reproduce bit for bit.
pub fn sample_logistic(
    params: &LogisticParams,
    dim: usize,
    n: usize,
    stream: RandomStream,
) -> Result<Vec<Vec<f64>>> {
    if dim == 0 {
        return Err(Error::InvalidData("dimension must be positive".into()));
    }
    let theta = params.theta();
    let mut out = Vec::with_capacity(n);
    for r in 0..n {
        let mut rng = stream.child(r as u64).rng();
        // theta = 1: S is the point mass at 1 and the margins are independent
        let log_s = if theta == 1.0 {
            0.0
        } else {
            log_positive_stable(theta, &mut rng)
        };
        let z: Vec<f64> = (0..dim)
            .map(|_| {
                let e: f64 = Exp1.sample(&mut rng);
                (theta * (log_s - e.ln())).exp()
            })
            .collect();
        out.push(z);
    }
    Ok(out)
}

// acceptance loops terminate a.s.; this caps a broken configuration
const MAX_SPECTRAL_TRIES: usize = 1_000_000;

/// Draw `n` replicates of the Brown-Resnick process at the parameter's
/// sites, together with the partition of sites by which extremal function
/// set their record.
pub fn sample_brown_resnick_recorded(
    params: &BrownResnickParams,
    n: usize,
    stream: RandomStream,
) -> Result<Vec<(Vec<f64>, SetPartition)>> {
    let sites = params.sites();
    let d = sites.len();
    let gamma = |i: usize, j: usize| {
        let h = (sites[i][0] - sites[j][0]).hypot(sites[i][1] - sites[j][1]);
        (h / params.lambda()).powf(params.nu())
    };

    // pinned increment covariance and its Cholesky factor, one per anchor;
    // row/column a is skipped so the factor has side d - 1
    let mut chols = Vec::with_capacity(d);
    for a in 0..d {
        let others: Vec<usize> = (0..d).filter(|&j| j != a).collect();
        let k = others.len();
        let mut cov = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let v = gamma(others[i], a) + gamma(others[j], a) - gamma(others[i], others[j]);
                cov[i * k + j] = v;
                cov[j * k + i] = v;
            }
        }
        chols.push(cholesky_psd(&cov, k)?);
    }

    let mut out = Vec::with_capacity(n);
    let mut spectral = vec![0.0; d];
    for r in 0..n {
        let mut rng = stream.child(r as u64).rng();
        let mut z = vec![0.0; d];
        let mut winner = vec![0usize; d];
        let mut next_id = 0usize;
        for a in 0..d {
            let mut gam: f64 = Exp1.sample(&mut rng);
            let mut tries = 0usize;
            while 1.0 / gam > z[a] {
                tries += 1;
                if tries > MAX_SPECTRAL_TRIES {
                    return Err(Error::Numeric(
                        "spectral acceptance loop failed to terminate".into(),
                    ));
                }
                let zeta = 1.0 / gam;
                // spectral function normalized at site a
                let others: Vec<usize> = (0..d).filter(|&j| j != a).collect();
                let k = others.len();
                let u: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
                let l = &chols[a];
                spectral[a] = 1.0;
                for i in 0..k {
                    let mut chi = 0.0;
                    for t in 0..=i {
                        chi += l[i * k + t] * u[t];
                    }
                    spectral[others[i]] = (chi - gamma(others[i], a)).exp();
                }
                let id = next_id;
                next_id += 1;
                if (0..a).all(|j| zeta * spectral[j] < z[j]) {
                    for j in 0..d {
                        let v = zeta * spectral[j];
                        if v > z[j] {
                            z[j] = v;
                            winner[j] = id;
                        }
                    }
                }
                let step: f64 = Exp1.sample(&mut rng);
                gam += step;
            }
        }
        out.push((z, SetPartition::from_assignment(&winner)?));
    }
    Ok(out)
}

/// [`sample_brown_resnick_recorded`] without the partitions; the same stream
/// yields the same observations.
pub fn sample_brown_resnick(
    params: &BrownResnickParams,
    n: usize,
    stream: RandomStream,
) -> Result<Vec<Vec<f64>>> {
    Ok(sample_brown_resnick_recorded(params, n, stream)?
        .into_iter()
        .map(|(z, _)| z)
        .collect())
}
