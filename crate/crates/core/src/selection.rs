//! Cross-validated bandwidth optimisation and block cross-validated order
//! selection.
//!
//! `cv_score` is the mean negative log predictive density of each observation
//! when the `2l + 1` blocks centred on it are withheld from the estimator.
//! Bandwidths are fitted at each order with `l = 0` (leave-one-out); the order
//! is then picked by the score at the configured half-width.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ckde::{Bandwidths, LN_SQRT_2PI, LOG_WEIGHT_FLOOR};
use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::series::{sample_std, EstimationConfig, Series};

/// Minimum number of retained training blocks at every evaluation point.
pub const MIN_RETAINED: usize = 8;

/// Bandwidth search box, as log10 multiples of the sample standard deviation.
const LOG10_MIN_REL: f64 = -4.0;
const LOG10_MAX_REL: f64 = 3.0;

/// Terms more than this many nats below the largest contribute less than
/// `T * e^-50` relative to a sum that includes 1, which is below f64 rounding
/// for any desk-scale `T`.
const NEGLIGIBLE: f64 = 50.0;

/// `exp(x)` for `x <= 0`, with `x <= -NEGLIGIBLE` mapped to exactly zero.
///
/// Branch-free so the summation loops vectorise: range reduction by powers of
/// two and a degree-13 Taylor polynomial on `|r| <= ln 2 / 2`, accurate to a
/// few ulp.
#[inline(always)]
fn exp_negligible(x: f64) -> f64 {
    const LN2_HI: f64 = 0.693_147_180_369_123_8;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let keep = x > -NEGLIGIBLE;
    let x = if keep { x } else { -NEGLIGIBLE };
    // round to nearest through the 2^52 + 2^51 shifter; `f64::round` is a
    // libm call on baseline x86-64
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    let t = x * std::f64::consts::LOG2_E + SHIFTER;
    let k = t - SHIFTER;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut poly = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        poly = poly * r + c;
    }
    // the low mantissa bits of `t` hold `k`; shift `k + 1023` into the exponent
    let scale = f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
    if keep {
        poly * scale
    } else {
        0.0
    }
}

/// `Σ exp(x - shift)` over `xs`, dropping negligible terms. Eight independent
/// accumulators so the loop body vectorises.
#[inline(always)]
fn sum_exp_shifted(xs: &[f64], shift: f64) -> f64 {
    let mut lanes = [0.0f64; 8];
    let chunks = xs.chunks_exact(8);
    let tail = chunks.remainder();
    for ch in chunks {
        for (acc, x) in lanes.iter_mut().zip(ch) {
            *acc += exp_negligible(x - shift);
        }
    }
    let mut total = 0.0;
    for x in tail {
        total += exp_negligible(x - shift);
    }
    lanes.iter().sum::<f64>() + total
}

/// One evaluation point of the fast cross-validation engine.
struct Row<'a> {
    sq: &'a [f64],
    n: usize,
    p: usize,
    i: usize,
    coef: &'a [f64],
    cf: f64,
    kept: [std::ops::Range<usize>; 2],
}

impl Row<'_> {
    /// Log predictive density at index `i + 1` without the Gaussian
    /// normalisation of the future kernel.
    fn log_density(&self, acc: &mut [f64], joint: &mut [f64]) -> f64 {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the required CPU features were detected at runtime.
            return unsafe { self.log_density_avx2(acc, joint) };
        }
        self.log_density_generic(acc, joint)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn log_density_avx2(&self, acc: &mut [f64], joint: &mut [f64]) -> f64 {
        self.log_density_generic(acc, joint)
    }

    #[inline(always)]
    fn log_density_generic(&self, acc: &mut [f64], joint: &mut [f64]) -> f64 {
        let (n, p, i) = (self.n, self.p, self.i);
        let m = acc.len();
        acc.fill(0.0);
        for (j, c) in self.coef.iter().enumerate() {
            let start = (i - p + j) * n + j;
            for (a, d) in acc.iter_mut().zip(&self.sq[start..start + m]) {
                *a -= c * d;
            }
        }
        let mut max = f64::NEG_INFINITY;
        for r in self.kept.iter().cloned() {
            max = acc[r].iter().fold(max, |a, b| if *b > a { *b } else { a });
        }
        if !max.is_finite() {
            return f64::NAN;
        }
        let row = &self.sq[i * n + p..i * n + n];
        let mut max_joint = f64::NEG_INFINITY;
        let mut denom = 0.0;
        for r in self.kept.iter().cloned() {
            for ((a, d), jv) in acc[r.clone()].iter().zip(&row[r.clone()]).zip(&mut joint[r.clone()]) {
                let v = if a - max >= -LOG_WEIGHT_FLOOR { a - self.cf * d } else { f64::NEG_INFINITY };
                *jv = v;
                max_joint = if v > max_joint { v } else { max_joint };
            }
            denom += sum_exp_shifted(&acc[r], max);
        }
        let mut numer = 0.0;
        for r in self.kept.iter().cloned() {
            numer += sum_exp_shifted(&joint[r], max_joint);
        }
        max_joint + numer.ln() - max - denom.ln()
    }
}

/// Absolute floor of the smoothed-out threshold, in data units.
pub const SMOOTHED_OUT_FLOOR: f64 = 5.0;

/// Evaluates cross-validation scores on one series, reusing the matrix of
/// pairwise squared differences across calls.
pub struct CvEngine<'a> {
    x: &'a [f64],
    sq: Vec<f64>,
}

impl<'a> CvEngine<'a> {
    pub fn new(s: &'a Series) -> Self {
        let x = s.values();
        let n = x.len();
        let mut sq = vec![0.0; n * n];
        for (i, row) in sq.chunks_exact_mut(n).enumerate() {
            for (j, d) in row.iter_mut().enumerate() {
                let v = x[i] - x[j];
                *d = v * v;
            }
        }
        Self { x, sq }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn check(&self, p: usize, l: usize) -> Result<()> {
        let n = self.x.len();
        if p == 0 {
            return Err(Error::InvalidInput("order must be at least 1".into()));
        }
        if n < p + 2 * l + 1 + MIN_RETAINED {
            return Err(Error::InsufficientData(format!(
                "order {p} with block half-width {l} needs at least {} values, got {n}",
                p + 2 * l + 1 + MIN_RETAINED
            )));
        }
        Ok(())
    }

    /// Per-index log predictive densities with `2l + 1` blocks withheld,
    /// for 1-based indices `p + 1 ..= T`.
    pub fn log_densities(&self, k: &Bandwidths, l: usize) -> Result<Vec<f64>> {
        let p = k.order();
        self.check(p, l)?;
        let n = self.x.len();
        let m = n - p;
        let coef: Vec<f64> = k.past().iter().map(|kj| 0.5 / (kj * kj)).collect();
        let kf = k.future();
        let cf = 0.5 / (kf * kf);
        let offset = kf.ln() + LN_SQRT_2PI;

        (p..n)
            .into_par_iter()
            .map_init(
                || (vec![0.0; m], vec![0.0; m]),
                |(acc, joint), i| {
                    // withheld window in block coordinates q = s - p
                    let lo = i.saturating_sub(l).max(p) - p;
                    let hi = (i + l).min(n - 1) - p;
                    let row = Row { sq: &self.sq, n, p, i, coef: &coef, cf, kept: [0..lo, hi + 1..m] };
                    let v = row.log_density(acc, joint);
                    if v.is_finite() {
                        Ok(v - offset)
                    } else {
                        Err(Error::DegenerateWeights)
                    }
                },
            )
            .collect()
    }

    /// Mean negative log predictive density with `2l + 1` blocks withheld.
    pub fn score(&self, k: &Bandwidths, l: usize) -> Result<f64> {
        let v = self.log_densities(k, l)?;
        Ok(-v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Number of training blocks retained when predicting index `t`.
    pub fn retained_count(&self, p: usize, l: usize, t: usize) -> usize {
        let n = self.x.len();
        let lo = t.saturating_sub(l).max(p + 1);
        let hi = (t + l).min(n);
        (n - p) - (hi + 1).saturating_sub(lo)
    }
}

/// Block cross-validation score `CV_l(p, k)`; `l = 0` is leave-one-out.
pub fn cv_score(s: &Series, k: &Bandwidths, l: usize) -> Result<f64> {
    CvEngine::new(s).score(k, l)
}

/// Maps unconstrained coordinates to bandwidths inside the search box.
#[derive(Debug, Clone, Copy)]
struct BoxTransform {
    log10_sigma: f64,
}

impl BoxTransform {
    fn to_bandwidth(self, z: f64) -> f64 {
        let s = 1.0 / (1.0 + (-z).exp());
        10f64.powf(self.log10_sigma + LOG10_MIN_REL + (LOG10_MAX_REL - LOG10_MIN_REL) * s)
    }

    fn to_coord(self, k: f64) -> f64 {
        let frac = (k.log10() - self.log10_sigma - LOG10_MIN_REL) / (LOG10_MAX_REL - LOG10_MIN_REL);
        let frac = frac.clamp(1e-9, 1.0 - 1e-9);
        (frac / (1.0 - frac)).ln()
    }

    fn bandwidths(&self, z: &[f64]) -> Bandwidths {
        let k: Vec<f64> = z.iter().map(|zi| self.to_bandwidth(*zi)).collect();
        Bandwidths::from_slice(&k).expect("transform yields positive bandwidths")
    }
}

/// Result of bandwidth optimisation at one order.
#[derive(Debug, Clone)]
pub struct FittedBandwidths {
    pub bandwidths: Bandwidths,
    pub cv0: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct OptimizerSettings {
    pub nelder_mead: NelderMeadOptions,
    /// Multipliers on the rule-of-thumb bandwidth used as deterministic starts.
    pub reference_multipliers: Vec<f64>,
    pub random_starts: usize,
    /// Maximum number of polishing rounds from the best start. Each round
    /// tries moving every bandwidth to the top of the search box, then
    /// restarts Nelder–Mead with a fresh simplex; polishing stops at the
    /// first round that improves the score by less than `f_tol`.
    pub polish_rounds: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            nelder_mead: NelderMeadOptions { max_iter: 500, f_tol: 1e-6, initial_step: 0.5 },
            reference_multipliers: vec![0.25, 1.0, 4.0],
            random_starts: 2,
            polish_rounds: 8,
        }
    }
}

/// Rule-of-thumb bandwidth for a (p+1)-dimensional Gaussian product kernel.
pub fn reference_bandwidth(sigma: f64, blocks: usize, p: usize) -> f64 {
    1.06 * sigma * (blocks as f64).powf(-1.0 / (p as f64 + 5.0))
}

/// Leave-one-out bandwidth optimisation at fixed order.
pub fn optimize_bandwidths(s: &Series, p: usize, seed: u64) -> Result<Bandwidths> {
    let engine = CvEngine::new(s);
    Ok(fit_order(&engine, p, seed, None, &OptimizerSettings::default())?.bandwidths)
}

/// Multistart Nelder–Mead on box-transformed log bandwidths. `warm` is the
/// optimum at order `p - 1`; when given it replaces the last random start,
/// padded with a large bandwidth on the new oldest lag.
pub fn fit_order(
    engine: &CvEngine<'_>,
    p: usize,
    seed: u64,
    warm: Option<&Bandwidths>,
    settings: &OptimizerSettings,
) -> Result<FittedBandwidths> {
    let n = engine.len();
    if p == 0 || n < p + 10 {
        return Err(Error::InsufficientData(format!("order {p} needs at least {} values, got {n}", p + 10)));
    }
    let sigma = sample_std(engine.x);
    if !(sigma > 0.0) {
        return Err(Error::InsufficientData("series has zero variance".into()));
    }
    let tf = BoxTransform { log10_sigma: sigma.log10() };
    let reference = reference_bandwidth(sigma, n - p, p);

    let mut starts: Vec<Vec<f64>> =
        settings.reference_multipliers.iter().map(|m| vec![tf.to_coord(reference * m); p + 1]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for _ in 0..settings.random_starts {
        let z = (0..=p).map(|_| tf.to_coord(reference * 10f64.powf(rng.random_range(-1.0..1.5)))).collect();
        starts.push(z);
    }
    if let Some(w) = warm {
        if w.order() + 1 == p {
            let mut k = vec![100.0 * sigma];
            k.extend(w.to_vec());
            let z: Vec<f64> = k.iter().map(|kj| tf.to_coord(*kj)).collect();
            if settings.random_starts > 0 {
                *starts.last_mut().expect("non-empty") = z;
            } else {
                starts.push(z);
            }
        }
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    for z0 in &starts {
        let objective = |z: &[f64]| engine.score(&tf.bandwidths(z), 0).unwrap_or(f64::INFINITY);
        let m = nelder_mead(objective, z0, &settings.nelder_mead);
        evaluations += m.evaluations;
        if m.value.is_finite() && best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }
    let (mut z, mut cv0) = best.ok_or(Error::OptimizerFailure)?;
    let objective = |z: &[f64]| engine.score(&tf.bandwidths(z), 0).unwrap_or(f64::INFINITY);
    let top = tf.to_coord(f64::INFINITY);
    for _ in 0..settings.polish_rounds {
        let before = cv0;
        for j in 0..z.len() {
            if z[j] >= top {
                continue;
            }
            let mut trial = z.clone();
            trial[j] = top;
            let v = objective(&trial);
            evaluations += 1;
            if v < cv0 {
                z = trial;
                cv0 = v;
            }
        }
        let m = nelder_mead(objective, &z, &settings.nelder_mead);
        evaluations += m.evaluations;
        if m.value < cv0 {
            z = m.x;
            cv0 = m.value;
        }
        if before - cv0 < settings.nelder_mead.f_tol {
            break;
        }
    }
    Ok(FittedBandwidths { bandwidths: tf.bandwidths(&z), cv0, evaluations })
}

/// One row of a selection report.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderRecord {
    pub order: usize,
    pub bandwidths: Bandwidths,
    pub cv0: f64,
    pub cvl: f64,
    /// Per past lag, most recent first: whether the lag is smoothed out.
    pub smoothed_out: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub records: Vec<OrderRecord>,
    pub chosen_order: usize,
    pub block_half_width: usize,
}

impl SelectionReport {
    pub fn chosen(&self) -> &OrderRecord {
        self.records.iter().find(|r| r.order == self.chosen_order).expect("chosen order is among the records")
    }

    pub fn record(&self, p: usize) -> Option<&OrderRecord> {
        self.records.iter().find(|r| r.order == p)
    }

    /// Table-style CSV: `p,k0,k-1,..,k-P,cv0,cvl`, with absent and
    /// smoothed-out lags as empty cells, then a `# chosen_order=` line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let max_p = self.records.iter().map(|r| r.order).max().unwrap_or(0);
        let mut header = vec!["p".to_string(), "k0".to_string()];
        header.extend((1..=max_p).map(|m| format!("k-{m}")));
        header.push("cv0".into());
        header.push("cvl".into());
        writeln!(w, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![r.order.to_string(), r.bandwidths.future().to_string()];
            for m in 1..=max_p {
                if m <= r.order && !r.smoothed_out[m - 1] {
                    row.push(r.bandwidths.lag(m).to_string());
                } else {
                    row.push(String::new());
                }
            }
            row.push(r.cv0.to_string());
            row.push(r.cvl.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        writeln!(w, "# chosen_order={}", self.chosen_order)
    }
}

/// Smoothed-out cutoff for a series with sample standard deviation `sigma`.
pub fn smoothed_out_cutoff(sigma: f64, multiplier: f64) -> f64 {
    SMOOTHED_OUT_FLOOR.max(multiplier * sigma)
}

/// Fits bandwidths at every order `1..=max_order` and picks the order with the
/// lowest block cross-validation score (ties go to the smaller order).
pub fn select_order(s: &Series, config: &EstimationConfig) -> Result<SelectionReport> {
    select_order_with(s, config, &OptimizerSettings::default())
}

pub fn select_order_with(
    s: &Series,
    config: &EstimationConfig,
    settings: &OptimizerSettings,
) -> Result<SelectionReport> {
    config.validate(s.len())?;
    let engine = CvEngine::new(s);
    engine.check(config.max_order, config.block_half_width)?;
    let cutoff = smoothed_out_cutoff(sample_std(s.values()), config.smoothed_out_threshold);

    let mut records: Vec<OrderRecord> = Vec::with_capacity(config.max_order);
    let mut warm: Option<Bandwidths> = None;
    for p in 1..=config.max_order {
        let fit = fit_order(&engine, p, config.rng_seed, warm.as_ref(), settings)?;
        let cvl = engine.score(&fit.bandwidths, config.block_half_width)?;
        let smoothed_out = (1..=p).map(|m| fit.bandwidths.lag(m) >= cutoff).collect();
        warm = Some(fit.bandwidths.clone());
        records.push(OrderRecord { order: p, bandwidths: fit.bandwidths, cv0: fit.cv0, cvl, smoothed_out });
    }
    let chosen_order = choose(&records);
    Ok(SelectionReport { records, chosen_order, block_half_width: config.block_half_width })
}

/// Order with the smallest block score; the first one wins ties.
pub(crate) fn choose(records: &[OrderRecord]) -> usize {
    let mut best = &records[0];
    for r in &records[1..] {
        if r.cvl < best.cvl {
            best = r;
        }
    }
    best.order
}
