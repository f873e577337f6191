//! Conditional kernel density estimation with coupled Gaussian product kernels.
//!
//! The marginal density of a length-`p` past and the joint density of
//! (past, future) share the past bandwidths, so the predictive density
//! `f(y | past) = joint / marginal` is a mixture of Gaussians centred on the
//! training futures, weighted by how close each training past is to the
//! query. A lag whose bandwidth is very large contributes the same factor to
//! every weight and drops out after normalisation.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::series::{HistoryBlock, Series};

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-weights further than this below the maximum are discarded.
pub(crate) const LOG_WEIGHT_FLOOR: f64 = 700.0;

/// Standard normal density.
pub fn kernel_value(u: f64) -> f64 {
    (-0.5 * u * u - LN_SQRT_2PI).exp()
}

#[inline]
pub(crate) fn log_kernel(u: f64) -> f64 {
    -0.5 * u * u - LN_SQRT_2PI
}

/// Bandwidths of a product kernel at order `p`: one per past lag (oldest to
/// newest) plus one for the future.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bandwidths {
    past: Vec<f64>,
    future: f64,
}

impl Bandwidths {
    pub fn new(past: Vec<f64>, future: f64) -> Result<Self> {
        if past.is_empty() {
            return Err(Error::InvalidInput("at least one past bandwidth is required".into()));
        }
        if let Some(k) = past.iter().chain(std::iter::once(&future)).find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::InvalidInput(format!("bandwidth {k} is not positive and finite")));
        }
        Ok(Self { past, future })
    }

    /// Builds from `k_1 .. k_{p+1}`: past lags oldest to newest, then the future.
    pub fn from_slice(k: &[f64]) -> Result<Self> {
        match k.split_last() {
            Some((&future, past)) => Self::new(past.to_vec(), future),
            None => Err(Error::InvalidInput("empty bandwidth vector".into())),
        }
    }

    /// Builds from table order `k0, k-1, .., k-p`: future first, then lags from
    /// most recent to oldest.
    pub fn from_table_order(k: &[f64]) -> Result<Self> {
        match k.split_first() {
            Some((&future, lags)) => Self::new(lags.iter().rev().copied().collect(), future),
            None => Err(Error::InvalidInput("empty bandwidth vector".into())),
        }
    }

    /// Same bandwidth on every coordinate.
    pub fn uniform(p: usize, k: f64) -> Result<Self> {
        Self::new(vec![k; p], k)
    }

    pub fn order(&self) -> usize {
        self.past.len()
    }

    /// Past bandwidths, oldest lag first.
    pub fn past(&self) -> &[f64] {
        &self.past
    }

    pub fn future(&self) -> f64 {
        self.future
    }

    /// Bandwidth for lag `m` (1 = most recent value).
    pub fn lag(&self, m: usize) -> f64 {
        self.past[self.past.len() - m]
    }

    /// `k_1 .. k_{p+1}`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.past.clone();
        v.push(self.future);
        v
    }

    /// `k0, k-1, .., k-p`.
    pub fn table_order(&self) -> Vec<f64> {
        std::iter::once(self.future).chain(self.past.iter().rev().copied()).collect()
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::new(self.past.iter().map(|k| k * a).collect(), self.future * a)
    }
}

/// Training blocks to exclude, expressed as 1-based future indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LeaveOut {
    #[default]
    Nothing,
    /// `{center - half_width ..= center + half_width}`, clipped to the valid range.
    Block {
        center: usize,
        half_width: usize,
    },
    Indices(BTreeSet<usize>),
}

impl LeaveOut {
    pub fn one(t: usize) -> Self {
        LeaveOut::Block { center: t, half_width: 0 }
    }

    pub fn contains(&self, t: usize) -> bool {
        match self {
            LeaveOut::Nothing => false,
            LeaveOut::Block { center, half_width } => t.abs_diff(*center) <= *half_width,
            LeaveOut::Indices(set) => set.contains(&t),
        }
    }
}

/// A fitted conditional density estimator.
#[derive(Debug, Clone)]
pub struct ConditionalDensityModel {
    training: Series,
    bandwidths: Bandwidths,
}

impl ConditionalDensityModel {
    pub fn new(training: Series, bandwidths: Bandwidths) -> Result<Self> {
        let p = bandwidths.order();
        if p + 1 > training.len() {
            return Err(Error::OrderTooLarge { order: p, len: training.len() });
        }
        Ok(Self { training, bandwidths })
    }

    pub fn order(&self) -> usize {
        self.bandwidths.order()
    }

    pub fn bandwidths(&self) -> &Bandwidths {
        &self.bandwidths
    }

    pub fn training(&self) -> &Series {
        &self.training
    }

    /// Number of training blocks, `T - p`.
    pub fn block_count(&self) -> usize {
        self.training.len() - self.order()
    }

    /// The past of the training block whose future has 1-based index `t`.
    pub fn history_at(&self, t: usize) -> Result<HistoryBlock> {
        let p = self.order();
        if t <= p || t > self.training.len() {
            return Err(Error::InvalidInput(format!("index {t} outside {}..={}", p + 1, self.training.len())));
        }
        HistoryBlock::at(self.training.values()[t - 1 - p..t - 1].to_vec(), t)
    }

    fn check_query(&self, past: &HistoryBlock, leave_out: &LeaveOut) -> Result<()> {
        if past.order() != self.order() {
            return Err(Error::InvalidInput(format!(
                "history of length {} for a model of order {}",
                past.order(),
                self.order()
            )));
        }
        if let LeaveOut::Indices(set) = leave_out {
            let (lo, hi) = (self.order() + 1, self.training.len());
            if let Some(t) = set.iter().find(|t| **t < lo || **t > hi) {
                return Err(Error::InvalidInput(format!("leave-out index {t} outside {lo}..={hi}")));
            }
        }
        Ok(())
    }

    /// Normalised log product-kernel of the past against each retained
    /// training block, as (1-based future index, log kernel) pairs.
    fn past_log_kernels(&self, past: &HistoryBlock, leave_out: &LeaveOut) -> Vec<(usize, f64)> {
        let p = self.order();
        let x = self.training.values();
        let ks = self.bandwidths.past();
        let log_norm: f64 = ks.iter().map(|k| k.ln() + LN_SQRT_2PI).sum();
        (p + 1..=x.len())
            .filter(|t| !leave_out.contains(*t))
            .map(|t| {
                let block = &x[t - 1 - p..t - 1];
                let mut q = 0.0;
                for ((xj, bj), kj) in past.past().iter().zip(block).zip(ks) {
                    let u = (xj - bj) / kj;
                    q += u * u;
                }
                (t, -0.5 * q - log_norm)
            })
            .collect()
    }

    /// Marginal density estimate of the past, averaged over retained blocks.
    pub fn marginal_past_density(&self, past: &HistoryBlock, leave_out: &LeaveOut) -> Result<f64> {
        self.check_query(past, leave_out)?;
        let lk = self.past_log_kernels(past, leave_out);
        if lk.is_empty() {
            return Err(Error::EmptyAfterLeaveOut);
        }
        let n = lk.len() as f64;
        let lse = log_sum_exp(lk.iter().map(|(_, l)| *l));
        Ok((lse - n.ln()).exp())
    }

    /// Joint density estimate of (past, future) over retained blocks.
    pub fn joint_density(&self, past: &HistoryBlock, future: f64, leave_out: &LeaveOut) -> Result<f64> {
        self.check_query(past, leave_out)?;
        let lk = self.past_log_kernels(past, leave_out);
        if lk.is_empty() {
            return Err(Error::EmptyAfterLeaveOut);
        }
        let x = self.training.values();
        let kf = self.bandwidths.future();
        let n = lk.len() as f64;
        let lse = log_sum_exp(lk.iter().map(|(t, l)| l + log_kernel((future - x[t - 1]) / kf) - kf.ln()));
        Ok((lse - n.ln()).exp())
    }

    /// The predictive density at this past, as a normalised Gaussian mixture
    /// over the retained training futures.
    pub fn predictive_slice(&self, past: &HistoryBlock, leave_out: &LeaveOut) -> Result<PredictiveSlice> {
        self.check_query(past, leave_out)?;
        let lk = self.past_log_kernels(past, leave_out);
        if lk.is_empty() {
            return Err(Error::EmptyAfterLeaveOut);
        }
        let max = lk.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        let x = self.training.values();
        let mut weights = Vec::with_capacity(lk.len());
        let mut centers = Vec::with_capacity(lk.len());
        for (t, l) in &lk {
            if l - max >= -LOG_WEIGHT_FLOOR {
                weights.push((l - max).exp());
                centers.push(x[t - 1]);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(PredictiveSlice { weights, centers, future_bandwidth: self.bandwidths.future() })
    }

    /// `log f(future | past)`, computed without leaving log space.
    pub fn conditional_log_density(&self, past: &HistoryBlock, future: f64, leave_out: &LeaveOut) -> Result<f64> {
        self.check_query(past, leave_out)?;
        let lk = self.past_log_kernels(past, leave_out);
        if lk.is_empty() {
            return Err(Error::EmptyAfterLeaveOut);
        }
        let max = lk.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        let x = self.training.values();
        let kf = self.bandwidths.future();
        let kept = || lk.iter().filter(|(_, l)| l - max >= -LOG_WEIGHT_FLOOR);
        let denom = log_sum_exp(kept().map(|(_, l)| *l));
        let numer = log_sum_exp(kept().map(|(t, l)| l + log_kernel((future - x[t - 1]) / kf)));
        Ok(numer - denom - kf.ln())
    }
}

/// `log(sum(exp(v)))`, shifted by the maximum.
pub fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// A one-dimensional Gaussian mixture: the predictive density at one past.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSlice {
    weights: Vec<f64>,
    centers: Vec<f64>,
    future_bandwidth: f64,
}

impl PredictiveSlice {
    pub fn new(weights: Vec<f64>, centers: Vec<f64>, future_bandwidth: f64) -> Result<Self> {
        if weights.is_empty() || weights.len() != centers.len() {
            return Err(Error::InvalidInput("weights and centers must be non-empty and of equal length".into()));
        }
        if !(future_bandwidth > 0.0 && future_bandwidth.is_finite()) {
            return Err(Error::InvalidInput("future bandwidth must be positive".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("weights must be nonnegative and centers finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights, centers, future_bandwidth })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn future_bandwidth(&self) -> f64 {
        self.future_bandwidth
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn density(&self, y: f64) -> f64 {
        let k = self.future_bandwidth;
        self.weights.iter().zip(&self.centers).map(|(w, c)| w * kernel_value((y - c) / k)).sum::<f64>() / k
    }

    pub fn log_density(&self, y: f64) -> f64 {
        let k = self.future_bandwidth;
        let terms = self
            .weights
            .iter()
            .zip(&self.centers)
            .filter(|(w, _)| **w > 0.0)
            .map(move |(w, c)| w.ln() + log_kernel((y - c) / k));
        log_sum_exp(terms) - k.ln()
    }
}
