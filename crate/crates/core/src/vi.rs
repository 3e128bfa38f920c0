//! Variational fitting of max-stable models with a partition guide.
//!
//! The full likelihood of an observation z sums the Stephenson-Tawn terms
//! over every set partition of the D components. Instead of enumerating,
//! draw M partitions from a guide q (the partition-attraction family in
//! [`crate::epa`]) and use the importance-weighted bound
//!
//! ```text
//! L_M(z) = E[ log (1/M) sum_m exp(st_loglik(z, pi_m) - log q(pi_m)) ]
//! ```
//!
//! which is a lower bound on log L(z), tight as M grows. [`iwae_with_grads`]
//! returns the single-observation estimate together with unbiased gradient
//! estimates: the model gradient flows through the likelihood by forward-mode
//! duals, the guide gradient is the score-function form
//!
//! ```text
//! grad_phi = L_hat * sum_m score_m - sum_m w_m score_m
//! ```
//!
//! with w the softmax of the importance weights and L_hat the bound estimate.
//! [`fit`] runs plain stochastic gradient ascent over both parameter sets on
//! unconstrained scales, with optional minibatching and momentum on the model
//! side. Every random quantity descends from one [`RandomStream`], so a fit
//! is reproducible bit for bit at any thread count (the wall-clock column of
//! the trace is the one exception).

use crate::data::{DistanceKind, DistanceMatrix, SpatialDataset};
use crate::dual::logsumexp;
use crate::epa::EpaParams;
use crate::error::{Error, Result};
use crate::model::{
    exponent_measure_with_grad, log_partition_factor_with_grad, EvalCtx, ModelParams,
};
use crate::mvn::MvnConfig;
use crate::stream::RandomStream;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use std::time::Instant;

// sigmoid outputs are kept off the boundaries so constrained values stay
// strictly inside their open domains
const SIGMOID_EPS: f64 = 1e-12;

fn sigmoid(u: f64) -> f64 {
    let s = if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    };
    s.clamp(SIGMOID_EPS, 1.0 - SIGMOID_EPS)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

// exp with the argument clamped so scale parameters stay finite
fn bounded_exp(u: f64) -> f64 {
    u.clamp(-700.0, 700.0).exp()
}

/// Map unconstrained coordinates to model parameters: theta = sigmoid(u) for
/// the logistic family, (lambda, nu) = (exp(u0), 2 sigmoid(u1)) for
/// Brown-Resnick. Zero maps to theta = 1/2 and (lambda, nu) = (1, 1).
pub fn constrain_model(family: &ModelParams, u: &[f64]) -> Result<ModelParams> {
    match family {
        ModelParams::Logistic(_) => {
            if u.len() != 1 {
                return Err(Error::Domain("logistic takes one coordinate".into()));
            }
            family.with_values(&[sigmoid(u[0])])
        }
        ModelParams::BrownResnick(_) => {
            if u.len() != 2 {
                return Err(Error::Domain("Brown-Resnick takes two coordinates".into()));
            }
            family.with_values(&[bounded_exp(u[0]), 2.0 * sigmoid(u[1])])
        }
    }
}

/// Inverse of [`constrain_model`]. Boundary values (theta = 1, nu = 2) have
/// no finite preimage and are rejected.
pub fn unconstrain_model(params: &ModelParams) -> Result<Vec<f64>> {
    match params {
        ModelParams::Logistic(p) => {
            let theta = p.theta();
            if theta >= 1.0 {
                return Err(Error::Domain(
                    "theta = 1 is not reachable on the unconstrained scale".into(),
                ));
            }
            Ok(vec![logit(theta)])
        }
        ModelParams::BrownResnick(p) => {
            if p.nu() >= 2.0 {
                return Err(Error::Domain(
                    "nu = 2 is not reachable on the unconstrained scale".into(),
                ));
            }
            Ok(vec![p.lambda().ln(), logit(p.nu() / 2.0)])
        }
    }
}

/// Pull a gradient in the constrained model parameters back to the
/// unconstrained coordinates.
pub fn pullback_model(params: &ModelParams, grad: &[f64]) -> Vec<f64> {
    match params {
        ModelParams::Logistic(p) => {
            let t = p.theta();
            vec![grad[0] * t * (1.0 - t)]
        }
        ModelParams::BrownResnick(p) => {
            let nu = p.nu();
            vec![grad[0] * p.lambda(), grad[1] * nu * (1.0 - nu / 2.0)]
        }
    }
}

/// Map unconstrained coordinates to guide parameters:
/// delta = sigmoid(u1), alpha = exp(u0) - delta, rho = exp(u2).
/// Zero maps to (alpha, delta, rho) = (1/2, 1/2, 1).
pub fn constrain_guide(u: &[f64; 3]) -> Result<EpaParams> {
    let delta = sigmoid(u[1]);
    EpaParams::new(bounded_exp(u[0]) - delta, delta, bounded_exp(u[2]))
}

/// Inverse of [`constrain_guide`]; delta = 0 has no finite preimage.
pub fn unconstrain_guide(guide: &EpaParams) -> Result<[f64; 3]> {
    if guide.delta() <= 0.0 {
        return Err(Error::Domain(
            "delta = 0 is not reachable on the unconstrained scale".into(),
        ));
    }
    Ok([
        (guide.alpha() + guide.delta()).ln(),
        logit(guide.delta()),
        guide.rho().ln(),
    ])
}

/// Pull a gradient in (alpha, delta, rho) back to the unconstrained
/// coordinates. The delta coordinate moves alpha as well, since
/// alpha = exp(u0) - delta holds u0 fixed.
pub fn pullback_guide(guide: &EpaParams, grad: &[f64; 3]) -> [f64; 3] {
    let d = guide.delta();
    [
        grad[0] * (guide.alpha() + d),
        (grad[1] - grad[0]) * d * (1.0 - d),
        grad[2] * guide.rho(),
    ]
}

/// Importance-weighted estimate for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsEstimate {
    /// Bound estimate from the M draws.
    pub iwae: f64,
    /// Gradient in the constrained model parameters.
    pub grad_model: Vec<f64>,
    /// Gradient in (alpha, delta, rho).
    pub grad_guide: [f64; 3],
}

fn draw_ctx(ctx: &EvalCtx, index: u64) -> EvalCtx {
    EvalCtx {
        mvn: ctx.mvn,
        stream: ctx.stream.child(index),
    }
}

/// The bound estimate together with both gradients from M guide draws.
///
/// Draw m samples its partition from `stream.child(m + 1).child(0)` and
/// evaluates its likelihood factor from `stream.child(m + 1).child(1)`;
/// the shared V term owns `stream.child(0)`. When every draw has zero
/// likelihood the bound is -inf and both gradients are zero.
pub fn iwae_with_grads(
    model: &ModelParams,
    guide: &EpaParams,
    z: &[f64],
    dist: &DistanceMatrix,
    m_draws: usize,
    ctx: &EvalCtx,
) -> Result<ObsEstimate> {
    if m_draws == 0 {
        return Err(Error::InvalidData("need at least one draw".into()));
    }
    let n_par = model.values().len();
    let (_, grad_v) = exponent_measure_with_grad(model, z, &draw_ctx(ctx, 0))?;
    let (v, _) = crate::model::exponent_measure_with_error(model, z, &draw_ctx(ctx, 0))?;

    let mut weights = Vec::with_capacity(m_draws);
    let mut grad_factors: Vec<Vec<f64>> = Vec::with_capacity(m_draws);
    let mut scores = Vec::with_capacity(m_draws);
    for m in 0..m_draws {
        let sub = ctx.stream.child(m as u64 + 1);
        let mut rng = sub.child(0).rng();
        let (part, logq) = guide.sample(dist, &mut rng)?;
        let (_, score) = guide.log_pmf_with_score(dist, &part)?;
        let fctx = draw_ctx(&EvalCtx { mvn: ctx.mvn, stream: sub }, 1);
        let (f, gf) = log_partition_factor_with_grad(model, z, &part, &fctx)?;
        weights.push(-v + f - logq);
        grad_factors.push(gf);
        scores.push(score);
    }

    let lse = logsumexp(&weights);
    let iwae = lse - (m_draws as f64).ln();
    if iwae == f64::NEG_INFINITY {
        return Ok(ObsEstimate {
            iwae,
            grad_model: vec![0.0; n_par],
            grad_guide: [0.0; 3],
        });
    }

    let mut grad_model = vec![0.0; n_par];
    let mut grad_guide = [0.0; 3];
    let mut score_sum = [0.0; 3];
    for m in 0..m_draws {
        for k in 0..3 {
            score_sum[k] += scores[m][k];
        }
        let w = (weights[m] - lse).exp();
        if w == 0.0 {
            // a zero-weight draw may carry an infinite factor gradient
            continue;
        }
        for k in 0..n_par {
            grad_model[k] += w * (grad_factors[m][k] - grad_v[k]);
        }
        for k in 0..3 {
            grad_guide[k] -= w * scores[m][k];
        }
    }
    for k in 0..3 {
        grad_guide[k] += iwae * score_sum[k];
    }
    Ok(ObsEstimate {
        iwae,
        grad_model,
        grad_guide,
    })
}

/// The bound estimate alone; the same stream reproduces the `iwae` field of
/// [`iwae_with_grads`] exactly.
pub fn iwae_estimate(
    model: &ModelParams,
    guide: &EpaParams,
    z: &[f64],
    dist: &DistanceMatrix,
    m_draws: usize,
    ctx: &EvalCtx,
) -> Result<f64> {
    if m_draws == 0 {
        return Err(Error::InvalidData("need at least one draw".into()));
    }
    let (v, _) = crate::model::exponent_measure_with_error(model, z, &draw_ctx(ctx, 0))?;
    let mut weights = Vec::with_capacity(m_draws);
    for m in 0..m_draws {
        let sub = ctx.stream.child(m as u64 + 1);
        let mut rng = sub.child(0).rng();
        let (part, logq) = guide.sample(dist, &mut rng)?;
        let fctx = draw_ctx(&EvalCtx { mvn: ctx.mvn, stream: sub }, 1);
        let f = crate::model::log_partition_factor(model, z, &part, &fctx)?;
        weights.push(-v + f - logq);
    }
    Ok(logsumexp(&weights) - (m_draws as f64).ln())
}

/// Settings for [`fit`].
#[derive(Debug, Clone)]
pub struct VIConfig {
    /// Importance draws per observation and iteration.
    pub m_draws: usize,
    /// Gradient-ascent iterations.
    pub iters: usize,
    /// Observations per iteration; `None` uses the full data set. Batches
    /// come from epoch shuffles without replacement.
    pub batch: Option<usize>,
    pub lr_model: f64,
    pub lr_guide: f64,
    /// Momentum on the model coordinates; the guide side is plain ascent.
    pub momentum: f64,
    /// How the guide's pairwise distances are built.
    pub distance: DistanceKind,
    /// Accuracy budget for the Brown-Resnick normal probabilities.
    pub mvn: MvnConfig,
}

impl Default for VIConfig {
    fn default() -> Self {
        VIConfig {
            m_draws: 10,
            iters: 200,
            batch: None,
            lr_model: 0.05,
            lr_guide: 0.05,
            momentum: 0.9,
            distance: DistanceKind::default(),
            mvn: MvnConfig::default(),
        }
    }
}

/// One row per iteration of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Constrained model parameter values after the update.
    pub model: Vec<f64>,
    pub alpha: f64,
    pub delta: f64,
    pub rho: f64,
    /// Bound estimate scaled to the full data set.
    pub iwae: f64,
    pub grad_norm_model: f64,
    pub grad_norm_guide: f64,
    /// Skipped iterations so far, this one included if it was.
    pub skipped: usize,
    /// Wall clock since the fit started. Not reproducible; everything else
    /// in the trace is.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: ModelParams,
    pub guide: EpaParams,
    pub trace: FitTrace,
    /// Iterations whose estimate was unusable and applied no update.
    pub skipped: usize,
}

// a fit aborts when more than this fraction of iterations have been skipped
const MAX_SKIP_FRACTION: f64 = 0.1;
const SKIP_GRACE_ITERS: usize = 20;

/// Stochastic gradient ascent on the importance-weighted bound.
///
/// Iteration t estimates the full-data bound and gradients from the batch,
/// scaled by n over batch size, with per-observation randomness from
/// `stream.child(1).child(t).child(i)`; epoch shuffles draw from
/// `stream.child(0)`. Iterations with a non-finite estimate, or where the
/// likelihood machinery reports a numeric failure, are skipped without an
/// update; the fit aborts once more than a tenth of iterations have been
/// skipped (after a grace period of 20).
pub fn fit(
    model0: &ModelParams,
    guide0: &EpaParams,
    data: &SpatialDataset,
    cfg: &VIConfig,
    stream: RandomStream,
) -> Result<FitResult> {
    model0.check_dataset(data)?;
    if cfg.iters == 0 {
        return Err(Error::InvalidData("need at least one iteration".into()));
    }
    if !(cfg.lr_model > 0.0 && cfg.lr_guide > 0.0) {
        return Err(Error::InvalidData("learning rates must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.momentum) {
        return Err(Error::InvalidData(format!(
            "momentum {} outside [0, 1)",
            cfg.momentum
        )));
    }
    let n = data.len();
    if n == 0 {
        return Err(Error::InvalidData("no observations".into()));
    }
    let batch = match cfg.batch {
        Some(0) => return Err(Error::InvalidData("batch size must be positive".into())),
        Some(b) => b.min(n),
        None => n,
    };

    // pairwise distances for the guide, one matrix per observation
    let dists: Vec<DistanceMatrix> = match cfg.distance {
        DistanceKind::Observation => data
            .observations()
            .iter()
            .map(|z| DistanceMatrix::from_observation(z))
            .collect::<Result<_>>()?,
        DistanceKind::Euclidean => {
            let shared = DistanceMatrix::from_sites(data.sites())?;
            vec![shared; n]
        }
    };

    let mut u_model = unconstrain_model(model0)?;
    let mut u_guide = unconstrain_guide(guide0)?;
    let mut velocity = vec![0.0; u_model.len()];
    let mut model = constrain_model(model0, &u_model)?;
    let mut guide = constrain_guide(&u_guide)?;

    let shuffle_stream = stream.child(0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut pos = n; // forces a shuffle on the first batched iteration
    let mut epoch = 0u64;

    let mut trace = FitTrace::default();
    let mut skipped = 0usize;
    let started = Instant::now();

    for t in 0..cfg.iters {
        let idx: Vec<usize> = if batch == n {
            (0..n).collect()
        } else {
            if pos + batch > n {
                let mut rng = shuffle_stream.child(epoch).rng();
                order.shuffle(&mut rng);
                epoch += 1;
                pos = 0;
            }
            let chunk = order[pos..pos + batch].to_vec();
            pos += batch;
            chunk
        };
        let scale = n as f64 / batch as f64;

        let iter_stream = stream.child(1).child(t as u64);
        let estimates: Vec<Result<ObsEstimate>> = idx
            .par_iter()
            .map(|&i| {
                let ctx = EvalCtx {
                    mvn: cfg.mvn,
                    stream: iter_stream.child(i as u64),
                };
                iwae_with_grads(&model, &guide, data.observation(i), &dists[i], cfg.m_draws, &ctx)
            })
            .collect();

        let mut iwae_sum = 0.0;
        let mut grad_model = vec![0.0; u_model.len()];
        let mut grad_guide = [0.0; 3];
        let mut usable = true;
        for est in &estimates {
            match est {
                Ok(e) => {
                    iwae_sum += e.iwae;
                    for (g, d) in grad_model.iter_mut().zip(&e.grad_model) {
                        *g += d;
                    }
                    for (g, d) in grad_guide.iter_mut().zip(&e.grad_guide) {
                        *g += d;
                    }
                }
                // transient failures near the domain boundary skip the step
                Err(Error::Numeric(_)) | Err(Error::Domain(_)) => {
                    usable = false;
                    iwae_sum = f64::NAN;
                    break;
                }
                Err(e) => return Err(clone_hard_error(e)),
            }
        }
        for g in grad_model.iter().chain(grad_guide.iter()) {
            if !g.is_finite() {
                usable = false;
            }
        }
        if !iwae_sum.is_finite() {
            usable = false;
        }

        let gm_u = pullback_model(&model, &grad_model);
        let gg_u = pullback_guide(&guide, &grad_guide);
        let grad_norm_model = gm_u.iter().map(|g| g * g).sum::<f64>().sqrt() * scale;
        let grad_norm_guide = gg_u.iter().map(|g| g * g).sum::<f64>().sqrt() * scale;

        if usable {
            for k in 0..u_model.len() {
                velocity[k] = cfg.momentum * velocity[k] + gm_u[k] * scale;
                u_model[k] += cfg.lr_model * velocity[k];
            }
            for k in 0..3 {
                u_guide[k] += cfg.lr_guide * gg_u[k] * scale;
            }
            model = constrain_model(&model, &u_model)?;
            guide = constrain_guide(&u_guide)?;
        } else {
            skipped += 1;
            if t + 1 >= SKIP_GRACE_ITERS
                && skipped as f64 > MAX_SKIP_FRACTION * (t + 1) as f64
            {
                return Err(Error::FitAborted(format!(
                    "{} of {} iterations produced unusable estimates",
                    skipped,
                    t + 1
                )));
            }
        }

        let mv = model.values();
        trace.rows.push(TraceRow {
            iter: t,
            model: mv,
            alpha: guide.alpha(),
            delta: guide.delta(),
            rho: guide.rho(),
            iwae: iwae_sum * scale,
            grad_norm_model,
            grad_norm_guide,
            skipped,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(FitResult {
        model,
        guide,
        trace,
        skipped,
    })
}

fn clone_hard_error(e: &Error) -> Error {
    match e {
        Error::InvalidData(s) => Error::InvalidData(s.clone()),
        Error::Refused(s) => Error::Refused(s.clone()),
        Error::FitAborted(s) => Error::FitAborted(s.clone()),
        other => Error::InvalidData(other.to_string()),
    }
}
