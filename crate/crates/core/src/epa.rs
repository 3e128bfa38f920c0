//! The Ewens-Pitman attraction (EPA) distribution over set partitions.
//!
//! Items 1..D are allocated sequentially in natural order. With k blocks
//! among the first t-1 items, item t joins an existing block tau with
//! probability
//!
//! ```text
//! (t-1 - delta*k) / (alpha + t-1) * sum_{s in tau} lambda(t,s) / sum_{s<t} lambda(t,s)
//! ```
//!
//! and opens a new block with probability (alpha + delta*k) / (alpha + t-1).
//! The similarity is exponential in distance, lambda(i,j) = exp(-d_ij / rho),
//! evaluated in log space so extreme distance/rho ratios stay finite. With
//! delta = 0 and constant similarity this is the Chinese restaurant process.
//!
//! Discount delta in [0,1), mass alpha > -delta, bandwidth rho > 0. Every
//! partition of D items has positive probability.

use rand::Rng;

use crate::data::DistanceMatrix;
use crate::error::{Error, Result};
use crate::partition::SetPartition;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpaParams {
    alpha: f64,
    delta: f64,
    rho: f64,
}

impl EpaParams {
    pub fn new(alpha: f64, delta: f64, rho: f64) -> Result<Self> {
        if !delta.is_finite() || !(0.0..1.0).contains(&delta) {
            return Err(Error::Domain(format!(
                "discount delta = {} outside [0, 1)",
                delta
            )));
        }
        if !alpha.is_finite() || alpha <= -delta {
            return Err(Error::Domain(format!(
                "mass alpha = {} must exceed -delta = {}",
                alpha, -delta
            )));
        }
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::Domain(format!("bandwidth rho = {} must be > 0", rho)));
        }
        Ok(EpaParams { alpha, delta, rho })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Log probability of a partition under sequential allocation.
    pub fn log_pmf(&self, dist: &DistanceMatrix, part: &SetPartition) -> Result<f64> {
        Ok(self.log_pmf_with_score(dist, part)?.0)
    }

    /// Log probability together with its gradient in (alpha, delta, rho).
    pub fn log_pmf_with_score(
        &self,
        dist: &DistanceMatrix,
        part: &SetPartition,
    ) -> Result<(f64, [f64; 3])> {
        let d = part.n_items();
        if dist.dim() != d {
            return Err(Error::InvalidData(format!(
                "distance matrix is {}x{} but partition has {} items",
                dist.dim(),
                dist.dim(),
                d
            )));
        }
        let assign = part.assignment();
        let (alpha, delta, rho) = (self.alpha, self.delta, self.rho);

        let mut logp = 0.0;
        let mut s_alpha = 0.0;
        let mut s_delta = 0.0;
        let mut s_rho = 0.0;
        let mut n_blocks = 1usize; // after item 0
        let mut loglam = vec![0.0; d];

        for i in 1..d {
            let k = n_blocks as f64;
            let t = i as f64; // items already placed
            let b = assign[i];
            if b < n_blocks {
                // joins an existing block
                let mut lse_all = f64::NEG_INFINITY;
                let mut lse_blk = f64::NEG_INFINITY;
                for s in 0..i {
                    let ll = -dist.get(i, s) / rho;
                    loglam[s] = ll;
                    lse_all = log_add(lse_all, ll);
                    if assign[s] == b {
                        lse_blk = log_add(lse_blk, ll);
                    }
                }
                logp += (t - delta * k).ln() - (alpha + t).ln() + lse_blk - lse_all;
                s_alpha += -1.0 / (alpha + t);
                s_delta += -k / (t - delta * k);
                // d/drho of (lse_blk - lse_all): softmax-weighted mean of d/rho^2
                let mut blk_term = 0.0;
                let mut all_term = 0.0;
                for s in 0..i {
                    let dd = dist.get(i, s) / (rho * rho);
                    let w_all = (loglam[s] - lse_all).exp();
                    all_term += w_all * dd;
                    if assign[s] == b {
                        let w_blk = (loglam[s] - lse_blk).exp();
                        blk_term += w_blk * dd;
                    }
                }
                s_rho += blk_term - all_term;
            } else {
                // opens a new block
                logp += (alpha + delta * k).ln() - (alpha + t).ln();
                s_alpha += 1.0 / (alpha + delta * k) - 1.0 / (alpha + t);
                s_delta += k / (alpha + delta * k);
                n_blocks += 1;
            }
        }
        Ok((logp, [s_alpha, s_delta, s_rho]))
    }

    /// Draws a partition; the returned log probability is bit-for-bit the
    /// value `log_pmf` reports for the drawn partition.
    pub fn sample<R: Rng>(&self, dist: &DistanceMatrix, rng: &mut R) -> Result<(SetPartition, f64)> {
        let d = dist.dim();
        if d == 0 {
            return Err(Error::InvalidData("empty distance matrix".into()));
        }
        let (alpha, delta, rho) = (self.alpha, self.delta, self.rho);
        let mut assign = vec![0usize; d];
        let mut n_blocks = 1usize;
        let mut weights = Vec::with_capacity(d + 1);
        let mut lse_blocks = Vec::with_capacity(d + 1);

        for i in 1..d {
            let k = n_blocks as f64;
            let t = i as f64;
            lse_blocks.clear();
            lse_blocks.resize(n_blocks, f64::NEG_INFINITY);
            let mut lse_all = f64::NEG_INFINITY;
            for s in 0..i {
                let ll = -dist.get(i, s) / rho;
                lse_all = log_add(lse_all, ll);
                lse_blocks[assign[s]] = log_add(lse_blocks[assign[s]], ll);
            }
            weights.clear();
            let join_mass = (t - delta * k) / (alpha + t);
            for &lb in &lse_blocks {
                weights.push(join_mass * (lb - lse_all).exp());
            }
            weights.push((alpha + delta * k) / (alpha + t));
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut choice = n_blocks; // default to the last entry (new block)
            for (b, &w) in weights.iter().enumerate() {
                u -= w;
                if u <= 0.0 {
                    choice = b;
                    break;
                }
            }
            if choice >= n_blocks {
                assign[i] = n_blocks;
                n_blocks += 1;
            } else {
                assign[i] = choice;
            }
        }
        let part = SetPartition::from_assignment(&assign)?;
        let logq = self.log_pmf(dist, &part)?;
        Ok((part, logq))
    }
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
