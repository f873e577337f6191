//! Specific entropy rate: the differential entropy of the estimated predictive
//! density at each observed past, plus time-averaged and windowed summaries.

use rayon::prelude::*;

use crate::ckde::{Bandwidths, ConditionalDensityModel, LeaveOut, PredictiveSlice, LN_SQRT_2PI};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::series::{HistoryBlock, Series};

/// Panel budget for one entropy integral.
pub const MAX_PANELS: usize = 10_000;

/// Half-width of the integration range, in future bandwidths, beyond the
/// extreme centres.
const RANGE_BANDWIDTHS: f64 = 8.0;

// exp(-u^2/2) is exactly zero in f64 beyond this many bandwidths.
const KERNEL_SUPPORT: f64 = 38.7;

/// Entropy of a normal density with standard deviation `sigma`, in nats.
pub fn gaussian_entropy(sigma: f64) -> f64 {
    0.5 + LN_SQRT_2PI + sigma.ln()
}

/// `-∫ g log g` for the Gaussian mixture `g` described by `slice`.
pub fn mixture_entropy(slice: &PredictiveSlice, abs_tol: f64) -> Result<f64> {
    if !(abs_tol > 0.0) {
        return Err(Error::InvalidInput("abs_tol must be positive".into()));
    }
    let k = slice.future_bandwidth();
    let mut comps: Vec<(f64, f64)> =
        slice.centers().iter().zip(slice.weights()).filter(|(_, w)| **w > 0.0).map(|(c, w)| (*c, *w)).collect();
    comps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let centers: Vec<f64> = comps.iter().map(|c| c.0).collect();
    let weights: Vec<f64> = comps.iter().map(|c| c.1).collect();
    let (lo, hi) = (centers[0] - RANGE_BANDWIDTHS * k, centers[centers.len() - 1] + RANGE_BANDWIDTHS * k);

    let norm = 1.0 / (k * (2.0 * std::f64::consts::PI).sqrt());
    let reach = KERNEL_SUPPORT * k;
    let density = |y: f64| -> f64 {
        let a = centers.partition_point(|c| *c < y - reach);
        let b = centers.partition_point(|c| *c <= y + reach);
        let mut g = 0.0;
        for i in a..b {
            let u = (y - centers[i]) / k;
            g += weights[i] * (-0.5 * u * u).exp();
        }
        g * norm
    };
    let integrand = |y: f64| {
        let g = density(y);
        if g > 0.0 {
            -g * g.ln()
        } else {
            0.0
        }
    };

    // Seed panel edges at the centres, merging those closer than one bandwidth.
    let mut breaks = vec![lo];
    for &c in &centers {
        if c - breaks[breaks.len() - 1] >= k {
            breaks.push(c);
        }
    }
    if hi - breaks[breaks.len() - 1] > 0.0 {
        breaks.push(hi);
    }
    let r = quadrature::integrate(integrand, &breaks, abs_tol, MAX_PANELS)?;
    Ok(r.value)
}

/// Per-index specific entropy rates of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRateSeries {
    /// 1-based future indices `p + 1 ..= T`.
    pub indices: Vec<usize>,
    /// Specific entropy rates in nats.
    pub values: Vec<f64>,
    /// Event times aligned with `indices`, when the series has timestamps.
    pub times: Option<Vec<f64>>,
    pub order: usize,
    pub bandwidths: Bandwidths,
}

impl EntropyRateSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Plug-in specific entropy rate at every observed past, using the full
/// sample (no leave-out) for the predictive density.
pub fn specific_entropy_series(s: &Series, bandwidths: &Bandwidths, abs_tol: f64) -> Result<EntropyRateSeries> {
    let model = ConditionalDensityModel::new(s.clone(), bandwidths.clone())?;
    let p = model.order();
    let indices: Vec<usize> = (p + 1..=s.len()).collect();
    let values = indices
        .par_iter()
        .map(|&t| {
            let past = model.history_at(t)?;
            let slice = model.predictive_slice(&past, &LeaveOut::Nothing)?;
            mixture_entropy(&slice, abs_tol)
        })
        .collect::<Result<Vec<f64>>>()?;
    let times = s.timestamps().map(|ts| indices.iter().map(|t| ts[t - 1]).collect());
    Ok(EntropyRateSeries { indices, values, times, order: p, bandwidths: bandwidths.clone() })
}

/// Mean of the specific entropy rates.
pub fn time_averaged_rate(e: &EntropyRateSeries) -> Result<f64> {
    if e.values.is_empty() {
        return Err(Error::InvalidInput("empty entropy-rate series".into()));
    }
    Ok(e.values.iter().sum::<f64>() / e.values.len() as f64)
}

/// Uniform-kernel moving average: at each event time, the mean of all values
/// whose time lies within `window / 2`.
pub fn windowed_average(e: &EntropyRateSeries, window: f64) -> Result<Vec<(f64, f64)>> {
    let times = e.times.as_ref().ok_or(Error::MissingTimestamps)?;
    if !(window >= 0.0) {
        return Err(Error::InvalidInput("window must be nonnegative".into()));
    }
    let half = window / 2.0;
    let mut out = Vec::with_capacity(times.len());
    let (mut lo, mut hi) = (0usize, 0usize);
    for &tau in times {
        while times[lo] < tau - half {
            lo += 1;
        }
        while hi < times.len() && times[hi] <= tau + half {
            hi += 1;
        }
        let sum: f64 = e.values[lo..hi].iter().sum();
        out.push((tau, sum / (hi - lo) as f64));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRecord {
    pub history: HistoryBlock,
    pub estimate: f64,
    pub bias: f64,
}

/// Estimated specific entropy rate at each observed past alongside its
/// deviation from a known truth.
pub fn bias_map<F>(s: &Series, truth: F, bandwidths: &Bandwidths, abs_tol: f64) -> Result<Vec<BiasRecord>>
where
    F: Fn(&HistoryBlock) -> Result<f64>,
{
    let e = specific_entropy_series(s, bandwidths, abs_tol)?;
    let p = e.order;
    e.indices
        .iter()
        .zip(&e.values)
        .map(|(&t, &h)| {
            let history = HistoryBlock::at(s.values()[t - 1 - p..t - 1].to_vec(), t)?;
            let exact = truth(&history)?;
            Ok(BiasRecord { history, estimate: h, bias: h - exact })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn slice(w: &[f64], c: &[f64], k: f64) -> PredictiveSlice {
        PredictiveSlice::new(w.to_vec(), c.to_vec(), k).unwrap()
    }

    #[test]
    fn single_gaussian() {
        for k in [0.01, 0.3, 1.0, 7.0] {
            let h = mixture_entropy(&slice(&[1.0], &[2.0], k), 1e-6).unwrap();
            assert_abs_diff_eq!(h, gaussian_entropy(k), epsilon = 1e-6);
        }
    }

    #[test]
    fn wide_normal() {
        let h = mixture_entropy(&slice(&[1.0], &[0.0], 3.0), 1e-6).unwrap();
        assert_abs_diff_eq!(h, 2.518, epsilon = 1e-3);
    }

    #[test]
    fn bimodal_mixture() {
        let h = mixture_entropy(&slice(&[0.1, 0.9], &[5.0, -5.0], 1.0), 1e-6).unwrap();
        assert_abs_diff_eq!(h, 1.744, epsilon = 1e-3);
    }

    #[test]
    fn coincident_centres() {
        let h = mixture_entropy(&slice(&[0.25, 0.25, 0.5], &[1.0, 1.0, 1.0], 0.2), 1e-6).unwrap();
        assert_abs_diff_eq!(h, gaussian_entropy(0.2), epsilon = 1e-6);
    }

    fn ers(values: Vec<f64>, times: Option<Vec<f64>>) -> EntropyRateSeries {
        EntropyRateSeries {
            indices: (2..values.len() + 2).collect(),
            values,
            times,
            order: 1,
            bandwidths: Bandwidths::uniform(1, 1.0).unwrap(),
        }
    }

    #[test]
    fn averages() {
        let e = ers(vec![1.0, 2.0, 3.0, 6.0], Some(vec![0.0, 1.0, 2.0, 3.0]));
        assert_eq!(time_averaged_rate(&e).unwrap(), 3.0);
        let wide = windowed_average(&e, 1e9).unwrap();
        assert!(wide.iter().all(|(_, m)| *m == 3.0));
        let narrow = windowed_average(&e, 0.5).unwrap();
        assert_eq!(narrow.iter().map(|x| x.1).collect::<Vec<_>>(), e.values);
        let two = windowed_average(&e, 2.0).unwrap();
        assert_eq!(two[0], (0.0, 1.5));
        assert_eq!(two[1], (1.0, 2.0));
        assert_eq!(two[3], (3.0, 4.5));
        assert_eq!(windowed_average(&ers(vec![1.0], None), 1.0), Err(Error::MissingTimestamps));
    }

    #[test]
    fn step_change_crosses_midpoint() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.7).collect();
        let step = 70.0;
        let values: Vec<f64> = times.iter().map(|t| if *t < step { -1.0 } else { 1.0 }).collect();
        let e = ers(values, Some(times));
        let window = 10.0;
        let w = windowed_average(&e, window).unwrap();
        let cross = w.iter().find(|(_, m)| *m >= 0.0).unwrap().0;
        assert!((cross - step).abs() <= window / 2.0);
    }

    #[test]
    fn constant_series_entropy() {
        let s = Series::new(vec![2.5; 30]).unwrap();
        let k = 0.4;
        let e = specific_entropy_series(&s, &Bandwidths::uniform(2, k).unwrap(), 1e-6).unwrap();
        assert_eq!(e.indices.first(), Some(&3));
        assert_eq!(e.len(), 28);
        for h in &e.values {
            assert_abs_diff_eq!(*h, gaussian_entropy(k), epsilon = 1e-6);
        }
    }

    #[test]
    fn bias_self_test() {
        let s = Series::new((0..40).map(|i| (i as f64 * 0.9).sin()).collect()).unwrap();
        let k = Bandwidths::new(vec![0.3], 0.2).unwrap();
        let model = ConditionalDensityModel::new(s.clone(), k.clone()).unwrap();
        let truth = |h: &HistoryBlock| {
            let slice = model.predictive_slice(h, &LeaveOut::Nothing)?;
            mixture_entropy(&slice, 1e-6)
        };
        let map = bias_map(&s, truth, &k, 1e-6).unwrap();
        assert_eq!(map.len(), 39);
        assert!(map.iter().all(|r| r.bias == 0.0));
    }
}
