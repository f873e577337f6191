//! Scalar time series, history blocks and the delay-embedding view used by
//! every estimator.
//!
//! Time indices reported to callers are 1-based and name the *future* value of
//! a (past, future) pair: the pair whose future is `values[t - 1]` has index
//! `t`, so a series of length `T` at order `p` yields indices `p + 1 ..= T`.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// A finite scalar time series, optionally carrying event times.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    values: Vec<f64>,
    timestamps: Option<Vec<f64>>,
    label: String,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::build(values, None, String::new())
    }

    pub fn with_timestamps(values: Vec<f64>, timestamps: Vec<f64>) -> Result<Self> {
        Self::build(values, Some(timestamps), String::new())
    }

    pub fn build(values: Vec<f64>, timestamps: Option<Vec<f64>>, label: String) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("value at position {} is not finite", i + 1)));
        }
        if let Some(ts) = &timestamps {
            if ts.len() != values.len() {
                return Err(Error::InvalidInput(format!("{} timestamps for {} values", ts.len(), values.len())));
            }
            if ts.iter().any(|t| !t.is_finite()) {
                return Err(Error::InvalidInput("non-finite timestamp".into()));
            }
            if let Some(i) = ts.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput(format!("timestamps not strictly increasing at position {}", i + 2)));
            }
        }
        Ok(Self { values, timestamps, label })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Applies `x -> scale * x + shift` to every value. Timestamps are kept.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| scale * v + shift).collect();
        Self::build(values, self.timestamps.clone(), self.label.clone())
    }

    /// Reads a series from CSV text: either one column of values (optional
    /// `value` header) or two columns `time,value`. Lines starting with `#`
    /// are ignored.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);

        let mut values = Vec::new();
        let mut times = Vec::new();
        let mut columns: Option<usize> = None;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            let n = rec.len();
            if n == 0 || n > 2 {
                return Err(Error::Parse { line, msg: format!("expected 1 or 2 columns, got {n}") });
            }
            if columns.is_none() && values.is_empty() && is_header(&rec) {
                columns = Some(n);
                continue;
            }
            match columns {
                Some(c) if c != n => return Err(Error::Parse { line, msg: format!("expected {c} columns, got {n}") }),
                None => columns = Some(n),
                _ => {}
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("not a number: {s:?}") })
            };
            if n == 1 {
                values.push(parse(&rec[0])?);
            } else {
                times.push(parse(&rec[0])?);
                values.push(parse(&rec[1])?);
            }
        }
        let timestamps = (columns == Some(2)).then_some(times);
        Self::build(values, timestamps, String::new())
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::from_csv_reader(file)?.with_label(path.display().to_string()))
    }
}

fn is_header(rec: &csv::StringRecord) -> bool {
    match rec.len() {
        1 => rec[0].eq_ignore_ascii_case("value"),
        2 => rec[0].eq_ignore_ascii_case("time") && rec[1].eq_ignore_ascii_case("value"),
        _ => false,
    }
}

/// A length-`p` past, ordered oldest to newest.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBlock {
    past: Vec<f64>,
    origin_index: Option<usize>,
}

impl HistoryBlock {
    pub fn new(past: Vec<f64>) -> Result<Self> {
        if past.is_empty() {
            return Err(Error::InvalidInput("history block must hold at least one value".into()));
        }
        if past.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("history block holds a non-finite value".into()));
        }
        Ok(Self { past, origin_index: None })
    }

    pub fn at(past: Vec<f64>, origin_index: usize) -> Result<Self> {
        let mut b = Self::new(past)?;
        b.origin_index = Some(origin_index);
        Ok(b)
    }

    pub fn past(&self) -> &[f64] {
        &self.past
    }

    pub fn order(&self) -> usize {
        self.past.len()
    }

    /// 1-based index `t` of the future value that follows this past, when the
    /// block was cut from a series.
    pub fn origin_index(&self) -> Option<usize> {
        self.origin_index
    }
}

/// Settings for order selection and estimation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EstimationConfig {
    pub max_order: usize,
    pub block_half_width: usize,
    /// Multiplier on the sample standard deviation used for smoothed-out
    /// flags; the absolute floor of 5 data units always applies.
    pub smoothed_out_threshold: f64,
    pub rng_seed: u64,
    pub quadrature_abs_tol: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self { max_order: 12, block_half_width: 50, smoothed_out_threshold: 5.0, rng_seed: 0, quadrature_abs_tol: 1e-6 }
    }
}

impl EstimationConfig {
    pub fn validate(&self, len: usize) -> Result<()> {
        if self.max_order == 0 {
            return Err(Error::InvalidInput("max_order must be positive".into()));
        }
        if !(self.smoothed_out_threshold > 0.0 && self.smoothed_out_threshold.is_finite()) {
            return Err(Error::InvalidInput("smoothed_out_threshold must be positive".into()));
        }
        if !(self.quadrature_abs_tol > 0.0 && self.quadrature_abs_tol.is_finite()) {
            return Err(Error::InvalidInput("quadrature_abs_tol must be positive".into()));
        }
        let reserved = 2 * self.block_half_width + 1;
        if len <= reserved || self.max_order >= len - reserved {
            return Err(Error::InsufficientData(format!(
                "max_order {} with block half-width {} needs more than {} values, got {}",
                self.max_order,
                self.block_half_width,
                self.max_order + reserved,
                len
            )));
        }
        Ok(())
    }
}

/// All `T - p` (past, future) pairs of the series at order `p`.
pub fn delay_blocks(s: &Series, p: usize) -> Result<Vec<(HistoryBlock, f64)>> {
    if p == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    let v = s.values();
    if p + 1 > v.len() {
        return Err(Error::OrderTooLarge { order: p, len: v.len() });
    }
    Ok(v.windows(p + 1)
        .enumerate()
        .map(|(j, w)| {
            let block = HistoryBlock { past: w[..p].to_vec(), origin_index: Some(j + p + 1) };
            (block, w[p])
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, unbiased standard deviation, min and max.
pub fn summary_stats(s: &Series) -> Result<SummaryStats> {
    let v = s.values();
    if v.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: v.len() });
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    let (min, max) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok(SummaryStats { mean, std: (ss / (n - 1.0)).sqrt(), min, max })
}

pub(crate) fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_blocks_small() {
        let s = Series::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let pairs = delay_blocks(&s, 2).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].0.past(), &[1.0, 2.0]);
        assert_eq!(pairs[0].1, 3.0);
        assert_eq!(pairs[0].0.origin_index(), Some(3));
        assert_eq!(pairs[1].0.past(), &[2.0, 3.0]);
        assert_eq!(pairs[1].1, 4.0);
        assert_eq!(pairs[1].0.origin_index(), Some(4));
    }

    #[test]
    fn delay_blocks_order_too_large() {
        let s = Series::new(vec![5.0]).unwrap();
        assert_eq!(delay_blocks(&s, 1), Err(Error::OrderTooLarge { order: 1, len: 1 }));
    }

    #[test]
    fn delay_blocks_order_one() {
        let s = Series::new(vec![0.3, -1.2, 7.0]).unwrap();
        let pairs = delay_blocks(&s, 1).unwrap();
        let futures: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        assert_eq!(futures, vec![-1.2, 7.0]);
    }

    #[test]
    fn stats() {
        let z = summary_stats(&Series::new(vec![0.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!((z.mean, z.std), (0.0, 0.0));
        let s = summary_stats(&Series::new(vec![1.0, 3.0]).unwrap()).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!((s.min, s.max), (1.0, 3.0));
        assert!(matches!(summary_stats(&Series::new(vec![1.0]).unwrap()), Err(Error::TooShort { .. })));
    }

    #[test]
    fn rejects_bad_series() {
        assert!(Series::new(vec![]).is_err());
        assert!(Series::new(vec![1.0, f64::NAN]).is_err());
        assert!(Series::with_timestamps(vec![1.0, 2.0], vec![0.0, 0.0]).is_err());
        assert!(Series::with_timestamps(vec![1.0, 2.0], vec![0.0]).is_err());
        assert!(HistoryBlock::new(vec![]).is_err());
    }

    #[test]
    fn csv_single_and_two_column() {
        let s = Series::from_csv_reader("value\n1.5\n2.5\n\n3\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[1.5, 2.5, 3.0]);
        assert!(s.timestamps().is_none());

        let s = Series::from_csv_reader("# comment\ntime,value\n0.5,1\n1.0,2\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0]);
        assert_eq!(s.timestamps().unwrap(), &[0.5, 1.0]);

        let s = Series::from_csv_reader("1\n2\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0]);

        assert!(matches!(Series::from_csv_reader("1\nabc\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(Series::from_csv_reader("1,2\n3\n".as_bytes()).is_err());
    }

    #[test]
    fn config_validation() {
        let c = EstimationConfig::default();
        assert!(c.validate(1000).is_ok());
        assert!(c.validate(100).is_err());
        let c = EstimationConfig { max_order: 1, block_half_width: 50, ..Default::default() };
        assert!(c.validate(10).is_err());
    }

    proptest::proptest! {
        #[test]
        fn delay_blocks_reconstruct(values in proptest::collection::vec(-1e3f64..1e3, 2..60), p in 1usize..8) {
            proptest::prop_assume!(p < values.len());
            let s = Series::new(values.clone()).unwrap();
            let pairs = delay_blocks(&s, p).unwrap();
            proptest::prop_assert_eq!(pairs.len(), values.len() - p);
            let mut rebuilt = pairs[0].0.past().to_vec();
            rebuilt.extend(pairs.iter().map(|(_, f)| *f));
            proptest::prop_assert_eq!(rebuilt, values);
        }
    }
}
