//! Approximate Entropy, Sample Entropy and their uniform-kernel density
//! counterparts.
//!
//! ApEn's correlation count `C_t^(p)(r)` is an unnormalised boxcar-product
//! kernel density estimate evaluated at the embedding vector itself (self
//! match included). Restoring the `(2r)^-p` normalisation gives
//! `Φ_norm^(p) = Φ^(p) - p log(2r)`; removing the self match gives a
//! leave-one-out estimator of the joint differential entropy, and the
//! difference of joint entropies at orders `p + 1` and `p` estimates the
//! finite-order entropy rate.
//!
//! Defaults used by the CLI (`p = 2`, `r = 0.2 σ̂`) are the conventional
//! choices from the ApEn/SampEn literature, not tuned values.

use crate::error::{Error, Result};
use crate::series::Series;

pub const DEFAULT_EMBEDDING: usize = 2;
pub const DEFAULT_TOLERANCE_FACTOR: f64 = 0.2;

fn check(s: &Series, needed: usize, r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!("tolerance r={r} must be positive and finite")));
    }
    if s.len() < needed {
        return Err(Error::TooShort { needed, got: s.len() });
    }
    Ok(())
}

#[inline]
fn within(x: &[f64], a: usize, b: usize, m: usize, r: f64) -> bool {
    (0..m).all(|i| (x[a + i] - x[b + i]).abs() <= r)
}

/// Number of length-`m` embedding vectors within sup-norm `r` of each vector,
/// self included.
fn match_counts(x: &[f64], m: usize, r: f64) -> Vec<usize> {
    let n = x.len() + 1 - m;
    let mut counts = vec![1usize; n];
    for a in 0..n {
        for b in a + 1..n {
            if within(x, a, b, m, r) {
                counts[a] += 1;
                counts[b] += 1;
            }
        }
    }
    counts
}

/// `C_t^(p)(r)` for each of the `T - p + 1` embedding vectors.
pub fn correlation_counts(s: &Series, p: usize, r: f64) -> Result<Vec<f64>> {
    check(s, p.max(1), r)?;
    if p == 0 {
        return Err(Error::InvalidInput("embedding dimension must be at least 1".into()));
    }
    let counts = match_counts(s.values(), p, r);
    let n = counts.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// `Φ^(p)(r)`: mean log correlation count.
pub fn phi(s: &Series, p: usize, r: f64) -> Result<f64> {
    let c = correlation_counts(s, p, r)?;
    Ok(c.iter().map(|v| v.ln()).sum::<f64>() / c.len() as f64)
}

/// Approximate Entropy `Φ^(p)(r) - Φ^(p+1)(r)`.
pub fn apen(s: &Series, p: usize, r: f64) -> Result<f64> {
    check(s, p + 2, r)?;
    Ok(phi(s, p, r)? - phi(s, p + 1, r)?)
}

/// Sample Entropy `-log(A / B)`: `B` counts pairs of distinct length-`p`
/// templates within `r`, `A` the pairs that still match at length `p + 1`.
/// Both use the first `T - p` templates.
pub fn sampen(s: &Series, p: usize, r: f64) -> Result<f64> {
    check(s, p + 2, r)?;
    if p == 0 {
        return Err(Error::InvalidInput("embedding dimension must be at least 1".into()));
    }
    let x = s.values();
    let n = x.len() - p;
    let (mut a, mut b) = (0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            if within(x, i, j, p, r) {
                b += 1;
                if (x[i + p] - x[j + p]).abs() <= r {
                    a += 1;
                }
            }
        }
    }
    if a == 0 || b == 0 {
        return Err(Error::NoMatches { r });
    }
    Ok(-(a as f64 / b as f64).ln())
}

/// Boxcar product kernel with the `(2r)^-p` normalisation.
fn uniform_product_kernel(x: &[f64], a: usize, b: usize, p: usize, r: f64) -> f64 {
    (0..p).map(|i| if (x[a + i] - x[b + i]).abs() <= r { 0.5 / r } else { 0.0 }).product()
}

/// `Φ_norm^(p)(r)`: mean log of the normalised uniform-kernel density
/// estimate at each embedding vector (self included).
pub fn phi_normalized(s: &Series, p: usize, r: f64) -> Result<f64> {
    check(s, p.max(1), r)?;
    if p == 0 {
        return Err(Error::InvalidInput("embedding dimension must be at least 1".into()));
    }
    let x = s.values();
    let n = x.len() + 1 - p;
    let total: f64 = (0..n)
        .map(|a| {
            let f: f64 = (0..n).map(|b| uniform_product_kernel(x, a, b, p, r)).sum::<f64>() / n as f64;
            f.ln()
        })
        .sum();
    Ok(total / n as f64)
}

/// Self-inclusive plug-in rate `Φ_norm^(p) - Φ_norm^(p+1)`, equal to
/// `apen + log(2r)`.
pub fn plugin_entropy_rate_uniform(s: &Series, p: usize, r: f64) -> Result<f64> {
    check(s, p + 2, r)?;
    Ok(phi_normalized(s, p, r)? - phi_normalized(s, p + 1, r)?)
}

/// Leave-one-out joint entropy of the length-`m` embedding vectors.
fn loo_joint_entropy(x: &[f64], m: usize, r: f64, skip_isolated: bool) -> Result<f64> {
    let counts = match_counts(x, m, r);
    let n = counts.len();
    let log_norm = ((n - 1) as f64).ln() + m as f64 * (2.0 * r).ln();
    let mut total = 0.0;
    let mut used = 0usize;
    for (i, c) in counts.iter().enumerate() {
        if *c <= 1 {
            if skip_isolated {
                continue;
            }
            return Err(Error::IsolatedVector { index: i + 1, r });
        }
        total += ((c - 1) as f64).ln() - log_norm;
        used += 1;
    }
    if used == 0 {
        return Err(Error::IsolatedVector { index: 1, r });
    }
    Ok(-total / used as f64)
}

/// Finite-order entropy rate `h[X_1..X_{p+1}] - h[X_1..X_p]` from
/// leave-one-out uniform-kernel joint entropies. Vectors with no neighbour
/// other than themselves are an error unless `skip_isolated` is set, in which
/// case they are dropped from the averages.
pub fn loo_entropy_rate_uniform(s: &Series, p: usize, r: f64, skip_isolated: bool) -> Result<f64> {
    check(s, p + 2, r)?;
    if p == 0 {
        return Err(Error::InvalidInput("embedding dimension must be at least 1".into()));
    }
    let x = s.values();
    Ok(loo_joint_entropy(x, p + 1, r, skip_isolated)? - loo_joint_entropy(x, p, r, skip_isolated)?)
}
