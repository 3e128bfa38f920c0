//! Exact maximum likelihood baselines.
//!
//! The logistic density admits a collapsed form: grouping the sum over set
//! partitions by block count turns it into a short polynomial in the stable
//! exponent, with coefficients given by a partial Bell recurrence. That makes
//! full maximum likelihood cheap in any dimension. Brown-Resnick has no such
//! collapse, so its baseline maximises the enumerated partition sum instead,
//! holding the quadrature stream fixed across objective evaluations so the
//! simplex search sees a coherent surface.

use rayon::prelude::*;

use crate::data::SpatialDataset;
use crate::dual::logsumexp;
use crate::error::{Error, Result};
use crate::model::{full_loglik_enum, EvalCtx, LogisticParams, ModelParams};
use crate::mvn::MvnConfig;
use crate::stream::RandomStream;
use crate::vi::{constrain_model, unconstrain_model};

/// Largest dimension accepted by the collapsed logistic likelihood. The
/// recurrence itself is stable well past this; the cap keeps the cubic table
/// build from dominating a fit.
pub const MAX_COLLAPSED_DIM: usize = 60;

/// Largest dimension for the enumerated Brown-Resnick baseline. Enumeration
/// is capped at 10 in general, but every objective evaluation visits all
/// Bell(D) partitions, so the practical budget for an optimiser is smaller.
pub const MAX_MLE_ENUM_DIM: usize = 7;

// Search window on the unconstrained logistic parameter. Maps to roughly
// theta in [0.0025, 0.9997]; the boundary theta = 1 has no finite preimage.
const LOGIT_LO: f64 = -6.0;
const LOGIT_HI: f64 = 8.0;

fn ln_binomial(n: usize, k: usize) -> f64 {
    libm::lgamma((n + 1) as f64)
        - libm::lgamma((k + 1) as f64)
        - libm::lgamma((n - k + 1) as f64)
}

/// Block-count weights of the collapsed logistic density for a fixed theta.
///
/// `log_t[d][b]` is the log of `T(d, b)`, the sum over partitions of `d`
/// items into `b` blocks of the product of per-block coefficients
/// `a_k = theta^(1-k) * prod_{m=1}^{k-1} (m - theta)`. These satisfy
/// `T(d, b) = sum_j C(d-1, j-1) a_j T(d-j, b-1)`, and every `a_k` is
/// positive for theta in (0, 1), so the whole table lives in log space.
struct CollapsedTable {
    theta: f64,
    log_t: Vec<Vec<f64>>,
}

impl CollapsedTable {
    fn new(theta: f64, d: usize) -> Self {
        let mut log_a = vec![f64::NEG_INFINITY; d + 1];
        for (j, slot) in log_a.iter_mut().enumerate().skip(1) {
            let mut acc = (1.0 - j as f64) * theta.ln();
            for m in 1..j {
                acc += (m as f64 - theta).ln();
            }
            *slot = acc;
        }
        let mut log_t = vec![vec![f64::NEG_INFINITY; d + 1]; d + 1];
        log_t[0][0] = 0.0;
        for n in 1..=d {
            for k in 1..=n {
                let terms: Vec<f64> = (1..=n - k + 1)
                    .map(|j| ln_binomial(n - 1, j - 1) + log_a[j] + log_t[n - j][k - 1])
                    .collect();
                log_t[n][k] = logsumexp(&terms);
            }
        }
        CollapsedTable { theta, log_t }
    }

    fn loglik(&self, z: &[f64]) -> f64 {
        let d = z.len();
        let theta = self.theta;
        let log_s = logsumexp(&z.iter().map(|&x| -x.ln() / theta).collect::<Vec<_>>());
        let v = (theta * log_s).exp();
        let sum_ln: f64 = z.iter().map(|&x| x.ln()).sum();
        let terms: Vec<f64> = (1..=d)
            .map(|b| self.log_t[d][b] + (theta * b as f64 - d as f64) * log_s)
            .collect();
        -v - (1.0 / theta + 1.0) * sum_ln + logsumexp(&terms)
    }
}

fn check_density_point(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::InvalidData("empty observation".into()));
    }
    if z.len() > MAX_COLLAPSED_DIM {
        return Err(Error::Refused(format!(
            "collapsed likelihood supported for D <= {}, got {}",
            MAX_COLLAPSED_DIM,
            z.len()
        )));
    }
    if z.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::InvalidData(
            "observations must be finite and positive".into(),
        ));
    }
    Ok(())
}

/// Log density of one observation under the logistic model, via the
/// collapsed partition sum. Agrees with the enumerated likelihood to
/// rounding error but costs O(D^3) once per theta instead of Bell(D).
pub fn logistic_loglik(params: &LogisticParams, z: &[f64]) -> Result<f64> {
    check_density_point(z)?;
    let theta = params.theta();
    if theta == 1.0 {
        // independence: only the all-singletons partition survives
        return Ok(z.iter().map(|&x| -1.0 / x - 2.0 * x.ln()).sum());
    }
    Ok(CollapsedTable::new(theta, z.len()).loglik(z))
}

fn logistic_data_loglik(theta: f64, data: &SpatialDataset) -> Result<f64> {
    for r in 0..data.len() {
        check_density_point(data.observation(r))?;
    }
    if theta == 1.0 {
        return Ok(data
            .observations()
            .iter()
            .flatten()
            .map(|&x| -1.0 / x - 2.0 * x.ln())
            .sum());
    }
    let table = CollapsedTable::new(theta, data.dim());
    Ok(data.observations().iter().map(|z| table.loglik(z)).sum())
}

/// Outcome of a derivative-free search: best point found, its objective
/// value, how many evaluations were spent, and whether the diameter
/// criterion was met before the iteration cap.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Golden-section search for the maximum of a unimodal function on
/// `[lo, hi]`. Converged once the bracket is narrower than `tol`; returns
/// the bracket midpoint either way.
pub fn golden_section_max<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SearchResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::Domain(format!("bad bracket [{}, {}]", lo, hi)));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Domain(format!("tol = {} must be > 0", tol)));
    }
    let invphi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut evals = 2;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..max_iter {
        if b - a < tol {
            break;
        }
        evals += 1;
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d)?;
        }
    }
    let converged = b - a < tol;
    let x = 0.5 * (a + b);
    evals += 1;
    let fx = f(x)?;
    Ok(SearchResult {
        x: vec![x],
        value: fx,
        evals,
        converged,
    })
}

fn simplex_diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Nelder-Mead simplex search for the maximum of `f` over R^n.
///
/// The objective should return a finite value or negative infinity for
/// infeasible points; errors abort the search. Converged once the simplex
/// diameter falls below `tol`; after `max_iter` iterations the best vertex
/// is returned regardless.
pub fn nelder_mead_max<F>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SearchResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    if n == 0 || step.len() != n {
        return Err(Error::Domain("empty start or mismatched step".into()));
    }
    if x0.iter().chain(step).any(|v| !v.is_finite()) || step.contains(&0.0) {
        return Err(Error::Domain("start and steps must be finite, steps nonzero".into()));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Domain(format!("tol = {} must be > 0", tol)));
    }
    // minimise g = -f with the textbook coefficients; NaN counts as infeasible
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| -> Result<f64> {
        evals += 1;
        f(x).map(|v| if v.is_nan() { f64::INFINITY } else { -v })
    };
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let g0 = eval(x0)?;
    simplex.push((x0.to_vec(), g0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step[i];
        let g = eval(&x)?;
        simplex.push((x, g));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex_diameter(&simplex) < tol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let xr: Vec<f64> = (0..n)
            .map(|j| centroid[j] + alpha * (centroid[j] - worst.0[j]))
            .collect();
        let gr = eval(&xr)?;
        if gr < simplex[0].1 {
            let xe: Vec<f64> = (0..n)
                .map(|j| centroid[j] + gamma * (xr[j] - centroid[j]))
                .collect();
            let ge = eval(&xe)?;
            simplex[n] = if ge < gr { (xe, ge) } else { (xr, gr) };
        } else if gr < simplex[n - 1].1 {
            simplex[n] = (xr, gr);
        } else {
            let (xc, gc) = if gr < worst.1 {
                let xc: Vec<f64> = (0..n)
                    .map(|j| centroid[j] + rho * (xr[j] - centroid[j]))
                    .collect();
                let gc = eval(&xc)?;
                (xc, gc)
            } else {
                let xc: Vec<f64> = (0..n)
                    .map(|j| centroid[j] + rho * (worst.0[j] - centroid[j]))
                    .collect();
                let gc = eval(&xc)?;
                (xc, gc)
            };
            if gc < gr.min(worst.1) {
                simplex[n] = (xc, gc);
            } else {
                for i in 1..=n {
                    let x: Vec<f64> = (0..n)
                        .map(|j| simplex[0].0[j] + sigma * (simplex[i].0[j] - simplex[0].0[j]))
                        .collect();
                    let g = eval(&x)?;
                    simplex[i] = (x, g);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let converged = simplex_diameter(&simplex) < tol;
    let (x, g) = simplex.swap_remove(0);
    Ok(SearchResult {
        x,
        value: -g,
        evals,
        converged,
    })
}

/// A maximum likelihood fit: the estimate, the log-likelihood there, the
/// number of objective evaluations spent, and whether the search met its
/// diameter criterion with a finite objective.
#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub params: ModelParams,
    pub loglik: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Maximum likelihood estimate for the family of `model0` on `data`.
///
/// Logistic fits maximise the collapsed likelihood by golden section on the
/// unconstrained parameter; `mvn` and `stream` are unused and the start
/// value only selects the family. Brown-Resnick fits run Nelder-Mead from
/// `model0` on (log range, squashed smoothness) over the enumerated full
/// likelihood. Observation `r` always draws quadrature from
/// `stream.child(r)`, so noise is common across parameter values; points
/// where the likelihood fails to evaluate are treated as infeasible rather
/// than fatal, and a search that only ever saw infeasible points comes back
/// with `converged = false` and a `loglik` of negative infinity.
pub fn fit_mle(
    model0: &ModelParams,
    data: &SpatialDataset,
    mvn: &MvnConfig,
    stream: RandomStream,
) -> Result<MleResult> {
    model0.check_dataset(data)?;
    let search = match model0 {
        ModelParams::Logistic(_) => {
            let obj = |u: f64| -> Result<f64> {
                let m = constrain_model(model0, &[u])?;
                logistic_data_loglik(m.values()[0], data)
            };
            golden_section_max(obj, LOGIT_LO, LOGIT_HI, 1e-6, 200)?
        }
        ModelParams::BrownResnick(_) => {
            if data.dim() > MAX_MLE_ENUM_DIM {
                return Err(Error::Refused(format!(
                    "enumerated likelihood search supported for D <= {}, got {}",
                    MAX_MLE_ENUM_DIM,
                    data.dim()
                )));
            }
            let obj = |u: &[f64]| -> Result<f64> {
                let m = constrain_model(model0, u)?;
                // collect in observation order so the sum is identical
                // whatever the pool size
                let per: Result<Vec<f64>> = (0..data.len())
                    .into_par_iter()
                    .map(|r| {
                        let ctx = EvalCtx::with_mvn(*mvn, stream.child(r as u64));
                        full_loglik_enum(&m, data.observation(r), &ctx)
                    })
                    .collect();
                match per {
                    Ok(v) => {
                        let total: f64 = v.iter().sum();
                        if total.is_finite() {
                            Ok(total)
                        } else {
                            Ok(f64::NEG_INFINITY)
                        }
                    }
                    Err(Error::Numeric(_)) | Err(Error::Domain(_)) => Ok(f64::NEG_INFINITY),
                    Err(e) => Err(e),
                }
            };
            let u0 = unconstrain_model(model0)?;
            nelder_mead_max(obj, &u0, &[0.3, 0.3], 1e-6, 400)?
        }
    };
    Ok(MleResult {
        params: constrain_model(model0, &search.x)?,
        loglik: search.value,
        evals: search.evals,
        converged: search.converged && search.value.is_finite(),
    })
}
