//! Multivariate normal probabilities by randomized quasi-Monte Carlo.
//!
//! `mvn_cdf` evaluates P(X <= b) for a centred Gaussian vector with unit
//! variances, using the separation-of-variables transformation of Genz (1992):
//! variables are reordered by their limits, the correlation matrix is
//! Cholesky-factored, and the resulting integral over the unit cube is
//! estimated with a Richtmyer lattice rule under independent random shifts.
//! The returned error estimate is three standard errors across shifts.
//!
//! The integrand is generic over [`Real`], so derivatives with respect to
//! limits and correlations flow through the estimate when it is instantiated
//! with dual numbers. For a fixed stream and configuration the point set is
//! frozen, which makes the estimate a deterministic, smooth function of its
//! inputs; finite differences and dual derivatives then agree to high order.

use crate::dual::Real;
use crate::error::{Error, Result};
use crate::stream::RandomStream;
use rand::Rng;

/// Hard cap on dimension; the transformation degrades beyond this.
pub const MAX_DIM: usize = 40;

/// Accuracy/effort knobs for [`mvn_cdf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnConfig {
    /// Target absolute accuracy of the probability.
    pub accuracy: f64,
    /// Budget of lattice points per shift.
    pub max_points: usize,
    /// Number of independent random shifts.
    pub shifts: usize,
}

impl Default for MvnConfig {
    fn default() -> Self {
        MvnConfig {
            accuracy: 1e-4,
            max_points: 10_000,
            shifts: 12,
        }
    }
}

/// Upper limits plus correlation matrix (unit diagonal), row-major.
#[derive(Debug, Clone)]
pub struct MvnProblem {
    limits: Vec<f64>,
    corr: Vec<f64>,
}

impl MvnProblem {
    pub fn new(limits: Vec<f64>, corr: Vec<f64>) -> Result<Self> {
        let k = limits.len();
        if corr.len() != k * k {
            return Err(Error::InvalidData(format!(
                "correlation matrix has {} entries, expected {}",
                corr.len(),
                k * k
            )));
        }
        if k > MAX_DIM {
            return Err(Error::Refused(format!(
                "dimension {} exceeds the supported maximum {}",
                k, MAX_DIM
            )));
        }
        for (i, &b) in limits.iter().enumerate() {
            if b.is_nan() {
                return Err(Error::InvalidData(format!("limit {} is NaN", i + 1)));
            }
        }
        for i in 0..k {
            if (corr[i * k + i] - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidData(format!(
                    "diagonal entry {} is {}, expected 1",
                    i + 1,
                    corr[i * k + i]
                )));
            }
            for j in 0..k {
                let c = corr[i * k + j];
                if !c.is_finite() || c.abs() > 1.0 + 1e-10 {
                    return Err(Error::InvalidData(format!(
                        "correlation ({}, {}) = {} out of range",
                        i + 1,
                        j + 1,
                        c
                    )));
                }
                if (c - corr[j * k + i]).abs() > 1e-10 {
                    return Err(Error::InvalidData(format!(
                        "correlation matrix not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(MvnProblem { limits, corr })
    }

    pub fn dim(&self) -> usize {
        self.limits.len()
    }
}

/// P(X <= b) with an error estimate; deterministic given the stream.
pub fn mvn_cdf(problem: &MvnProblem, cfg: &MvnConfig, stream: RandomStream) -> Result<(f64, f64)> {
    mvn_cdf_g::<f64>(&problem.limits, &problem.corr, cfg, stream)
}

/// Generic-scalar version of [`mvn_cdf`]. `limits` and `corr` may carry dual
/// parts; the error estimate refers to the value lane.
pub fn mvn_cdf_g<S: Real>(
    limits: &[S],
    corr: &[S],
    cfg: &MvnConfig,
    stream: RandomStream,
) -> Result<(S, f64)> {
    let k_in = limits.len();
    if corr.len() != k_in * k_in {
        return Err(Error::InvalidData(
            "correlation matrix shape does not match limits".into(),
        ));
    }
    if k_in > MAX_DIM {
        return Err(Error::Refused(format!(
            "dimension {} exceeds the supported maximum {}",
            k_in, MAX_DIM
        )));
    }
    for b in limits {
        if b.value().is_nan() {
            return Err(Error::InvalidData("NaN limit".into()));
        }
        if b.value() == f64::NEG_INFINITY {
            return Ok((S::from_f64(0.0), 0.0));
        }
    }

    // +inf limits marginalize out exactly
    let keep: Vec<usize> = (0..k_in)
        .filter(|&i| limits[i].value() < f64::INFINITY)
        .collect();
    let k = keep.len();
    if k == 0 {
        return Ok((S::from_f64(1.0), 0.0));
    }
    if k == 1 {
        return Ok((limits[keep[0]].norm_cdf(), 0.0));
    }

    // reorder by limit, smallest first
    let mut order = keep;
    order.sort_by(|&a, &b| {
        limits[a]
            .value()
            .partial_cmp(&limits[b].value())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let b: Vec<S> = order.iter().map(|&i| limits[i]).collect();
    let mut sigma = vec![S::from_f64(0.0); k * k];
    for i in 0..k {
        for j in 0..k {
            sigma[i * k + j] = corr[order[i] * k_in + order[j]];
        }
    }

    let chol = cholesky_psd(&sigma, k)?;
    Ok(integrate(&b, &chol, k, cfg, stream))
}

/// Lower Cholesky factor, tolerating a semidefinite matrix: tiny negative
/// pivots are clamped to zero and their columns zeroed.
pub(crate) fn cholesky_psd<S: Real>(a: &[S], k: usize) -> Result<Vec<S>> {
    let mut l = vec![S::from_f64(0.0); k * k];
    for j in 0..k {
        let mut d = a[j * k + j];
        for t in 0..j {
            d = d - l[j * k + t] * l[j * k + t];
        }
        let scale = a[j * k + j].value().abs().max(1.0);
        if d.value() < -1e-8 * scale {
            return Err(Error::Numeric(format!(
                "matrix not positive semidefinite: pivot {} at column {}",
                d.value(),
                j + 1
            )));
        }
        if d.value() <= 0.0 {
            // degenerate direction; leave the column zero
            continue;
        }
        let root = d.sqrt();
        l[j * k + j] = root;
        for i in (j + 1)..k {
            let mut s = a[i * k + j];
            for t in 0..j {
                s = s - l[i * k + t] * l[j * k + t];
            }
            l[i * k + j] = s / root;
        }
    }
    Ok(l)
}

// square roots of the first primes, fractional parts: Richtmyer generators
fn richtmyer_generators(n: usize) -> Vec<f64> {
    const PRIMES: [u32; 48] = [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83,
        89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179,
        181, 191, 193, 197, 199, 211, 223,
    ];
    (0..n)
        .map(|i| (PRIMES[i] as f64).sqrt().fract())
        .collect()
}

fn integrate<S: Real>(
    b: &[S],
    l: &[S],
    k: usize,
    cfg: &MvnConfig,
    stream: RandomStream,
) -> (S, f64) {
    let nshift = cfg.shifts.max(2);
    let gen = richtmyer_generators(k - 1);
    let mut rng = stream.rng();
    let shifts: Vec<Vec<f64>> = (0..nshift)
        .map(|_| (0..k - 1).map(|_| rng.random::<f64>()).collect())
        .collect();

    let mut sums = vec![S::from_f64(0.0); nshift];
    let mut done = 0usize; // points per shift so far
    let mut batch = 32usize;
    let mut est = S::from_f64(0.0);
    let mut err = f64::INFINITY;

    let mut y = vec![S::from_f64(0.0); k];
    let mut u = vec![0.0f64; k - 1];

    while done < cfg.max_points {
        let upto = (done + batch).min(cfg.max_points);
        for (s, shift) in shifts.iter().enumerate() {
            let mut acc = S::from_f64(0.0);
            for j in (done + 1)..=upto {
                for (i, g) in gen.iter().enumerate() {
                    let t = (j as f64) * g + shift[i];
                    u[i] = (2.0 * t.fract() - 1.0).abs();
                }
                acc = acc + sov_integrand(b, l, k, &u, &mut y);
            }
            sums[s] = sums[s] + acc;
        }
        done = upto;
        batch = batch.saturating_mul(2);

        let inv = 1.0 / done as f64;
        let mut mean = S::from_f64(0.0);
        for s in &sums {
            mean = mean + *s;
        }
        mean = mean.scale(inv / nshift as f64);
        let mut var = 0.0;
        for s in &sums {
            let d = s.value() * inv - mean.value();
            var += d * d;
        }
        var /= (nshift - 1) as f64 * nshift as f64;
        est = mean;
        err = 3.0 * var.sqrt();
        if err <= cfg.accuracy {
            break;
        }
    }
    (est.clamp_const(0.0, 1.0), err)
}

// Genz separation of variables: sequential conditioning along the Cholesky
// factor. `u` are the quasi-random coordinates for the inner k-1 variables.
fn sov_integrand<S: Real>(b: &[S], l: &[S], k: usize, u: &[f64], y: &mut [S]) -> S {
    const EPS_LO: f64 = 1e-300;
    const EPS_HI: f64 = 1.0 - 1e-15;
    let mut e = safe_phi(b[0], l[0]);
    let mut f = e;
    for i in 1..k {
        let p = (e * S::from_f64(u[i - 1])).clamp_const(EPS_LO, EPS_HI);
        y[i - 1] = p.norm_ppf();
        let mut t = b[i];
        for j in 0..i {
            t = t - l[i * k + j] * y[j];
        }
        e = safe_phi(t, l[i * k + i]);
        f = f * e;
    }
    f
}

// Phi(num / den) guarding the degenerate den = 0 case from a semidefinite
// factor: the coordinate is deterministic, so the factor is 0 or 1.
fn safe_phi<S: Real>(num: S, den: S) -> S {
    if den.value() <= 0.0 {
        if num.value() >= 0.0 {
            S::from_f64(1.0)
        } else {
            S::from_f64(0.0)
        }
    } else {
        (num / den).norm_cdf()
    }
}

/// Standard normal CDF, accurate to about 1e-16 absolute.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    const INV_SQRT_TAU: f64 = 0.3989422804014327;
    INV_SQRT_TAU * (-0.5 * x * x).exp()
}

/// Standard normal quantile (Wichura's AS 241, double precision).
// coefficients kept exactly as published, beyond f64 precision
#[allow(clippy::excessive_precision)]
pub fn std_normal_ppf(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
            + 6.7265770927008700853e4)
            * r
            + 4.5921953931549871457e4)
            * r
            + 1.3731693765509461125e4)
            * r
            + 1.9715909503065514427e3)
            * r
            + 1.3314166789178437745e2)
            * r
            + 3.3871328727963666080e0)
            * q;
        let den = ((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
            + 3.9307895800092710610e4)
            * r
            + 2.1213794301586595867e4)
            * r
            + 5.3941960214247511077e3)
            * r
            + 6.8718700749205790830e2)
            * r
            + 4.2313330701600911252e1)
            * r
            + 1.0;
        return num / den;
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
            + 2.41780725177450611770e-1)
            * r
            + 1.27045825245236838258e0)
            * r
            + 3.64784832476320460504e0)
            * r
            + 5.76949722146069140550e0)
            * r
            + 4.63033784615654529590e0)
            * r
            + 1.42343711074968357734e0;
        let den = ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
            + 1.51986665636164571966e-2)
            * r
            + 1.48103976427480074590e-1)
            * r
            + 6.89767334985100004550e-1)
            * r
            + 1.67638483018380384940e0)
            * r
            + 2.05319162663775882187e0)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 1.24266094738807843860e-3)
            * r
            + 2.65321895265761230930e-2)
            * r
            + 2.96560571828504891230e-1)
            * r
            + 1.78482653991729133580e0)
            * r
            + 5.46378491116411436990e0)
            * r
            + 6.65790464350110377720e0;
        let den = ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
            + 1.84631831751005468180e-5)
            * r
            + 7.86869131145613259100e-4)
            * r
            + 1.48753612908506148525e-2)
            * r
            + 1.36929880922735805310e-1)
            * r
            + 5.99832206555887937690e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}
