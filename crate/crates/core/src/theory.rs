//! Closed-form phylogenetic accuracy and its Monte Carlo cross-check.
//!
//! With an n-bit trait, a stegosystem whose per-bit accuracy is `q`, and
//! unrelated candidates agreeing per bit with probability `p`, the true
//! parent of a query ranks strictly highest in a pool of `N` candidates
//! with probability
//!
//! ```text
//! sum_k  P(H* = k) * P(H < k)^(N-1),   H* ~ Bin(n, q),  H ~ Bin(n, p)
//! ```
//!
//! Ties lose. The (N-1)-th power is taken in log space with the CDF
//! accumulated from whichever tail is smaller, so pools of a million
//! candidates evaluate without catastrophic rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::prng::derive_stream;

/// Model parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// Trait length in bits.
    pub n: u32,
    /// Unrelated-candidate bit agreement probability.
    pub p: f64,
    /// Stegosystem bit accuracy.
    pub q: f64,
    /// Pool size (the true parent plus N-1 unrelated candidates).
    #[serde(rename = "N")]
    pub pool: u64,
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParam("n must be >= 1".into()));
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam(format!("{name} = {v} not in [0, 1]")));
            }
        }
        if self.pool == 0 {
            return Err(Error::InvalidParam("pool size must be >= 1".into()));
        }
        Ok(())
    }
}

fn ln_choose(n: u32, k: u32) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Log of the binomial pmf `C(n,k) p^k (1-p)^(n-k)` via log-gamma.
///
/// Degenerate conventions: `p = 0` puts all mass at `k = 0`, `p = 1` at
/// `k = n` (log 0 is `-inf`).
pub fn log_binom_pmf(n: u32, k: u32, p: f64) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidParam(format!("k = {k} out of 0..={n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParam(format!("p = {p} not in [0, 1]")));
    }
    if p == 0.0 {
        return Ok(if k == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if p == 1.0 {
        return Ok(if k == n { 0.0 } else { f64::NEG_INFINITY });
    }
    // ln(1-p) via ln_1p for accuracy near p = 0.
    Ok(ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p())
}

/// Binomial pmf vector for `k = 0..=n`, in linear space.
pub fn binom_pmf(n: u32, p: f64) -> Result<Vec<f64>> {
    (0..=n)
        .map(|k| log_binom_pmf(n, k, p).map(f64::exp))
        .collect()
}

/// Probability that the true parent ranks strictly highest in the pool.
pub fn phylo_accuracy(tp: &TheoryParams) -> Result<f64> {
    tp.validate()?;
    if tp.pool == 1 {
        return Ok(1.0);
    }
    let n = tp.n;
    let pmf_q = binom_pmf(n, tp.q)?;
    let pmf_p = binom_pmf(n, tp.p)?;

    // ln P(H < k) for k = 0..=n, choosing the representation whose
    // rounding error is smaller: the lower sum when the CDF is small, the
    // complementary tail when it is close to 1.
    let mut lower = vec![0.0f64; n as usize + 2];
    for k in 0..=n as usize {
        lower[k + 1] = lower[k] + pmf_p[k];
    }
    let mut upper = vec![0.0f64; n as usize + 2];
    for k in (0..=n as usize).rev() {
        upper[k] = upper[k + 1] + pmf_p[k];
    }
    let ln_cdf_below = |k: usize| -> f64 {
        // P(H < k) = lower[k]; complementary tail = upper[k].
        let tail = upper[k];
        if tail < 0.5 {
            (-tail).ln_1p()
        } else {
            lower[k].ln()
        }
    };

    let exponent = (tp.pool - 1) as f64;
    let mut acc = 0.0;
    for (k, &mass) in pmf_q.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let ln_cdf = ln_cdf_below(k);
        if ln_cdf == f64::NEG_INFINITY {
            continue;
        }
        acc += mass * (exponent * ln_cdf).exp();
    }
    Ok(acc.clamp(0.0, 1.0))
}

/// Monte Carlo estimate of [`phylo_accuracy`] with its binomial standard
/// error. Per trial one parent count and `N-1` unrelated counts are drawn
/// by CDF inversion; the trial succeeds iff the parent strictly exceeds
/// all others. Trials use index-derived streams, so the estimate is
/// deterministic for a given seed and independent of thread count.
pub fn mc_accuracy(tp: &TheoryParams, trials: u64, seed: u64) -> Result<(f64, f64)> {
    tp.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be >= 1".into()));
    }
    let cdf_q = inversion_table(tp.n, tp.q)?;
    let cdf_p = inversion_table(tp.n, tp.p)?;
    let rivals = tp.pool - 1;
    let successes = exec::sum_range(trials as usize, |trial| {
        let mut rng = derive_stream(seed, trial as u64);
        let h_star = sample_from_cdf(&cdf_q, rng.next_f64());
        for _ in 0..rivals {
            if sample_from_cdf(&cdf_p, rng.next_f64()) >= h_star {
                return 0;
            }
        }
        1
    });
    let estimate = successes as f64 / trials as f64;
    let std_error = (estimate * (1.0 - estimate) / trials as f64).sqrt();
    Ok((estimate, std_error))
}

fn inversion_table(n: u32, p: f64) -> Result<Vec<f64>> {
    let pmf = binom_pmf(n, p)?;
    let mut cdf = Vec::with_capacity(pmf.len());
    let mut acc = 0.0;
    for v in pmf {
        acc += v;
        cdf.push(acc);
    }
    Ok(cdf)
}

#[inline]
fn sample_from_cdf(cdf: &[f64], u: f64) -> u32 {
    // The final CDF entry may round to slightly below 1; clamp the index.
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32
}

/// One evaluated grid point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurveRow {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "N")]
    pub pool: u64,
    pub accuracy: f64,
}

/// Evaluate the accuracy surface over the Cartesian product of the grids,
/// sorted by (p, q, N).
pub fn accuracy_curve(n: u32, ps: &[f64], qs: &[f64], pools: &[u64]) -> Result<Vec<CurveRow>> {
    if ps.is_empty() || qs.is_empty() || pools.is_empty() {
        return Err(Error::InvalidParam("empty grid".into()));
    }
    let mut points = Vec::new();
    for &p in ps {
        for &q in qs {
            for &pool in pools {
                points.push(TheoryParams { n, p, q, pool });
            }
        }
    }
    let rows = exec::map_slice(&points, |tp| {
        phylo_accuracy(tp).map(|accuracy| CurveRow {
            p: tp.p,
            q: tp.q,
            pool: tp.pool,
            accuracy,
        })
    });
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.p.partial_cmp(&b.p)
            .unwrap()
            .then(a.q.partial_cmp(&b.q).unwrap())
            .then(a.pool.cmp(&b.pool))
    });
    Ok(rows)
}

/// CSV for a curve: header `p,q,N,accuracy`, 12 significant digits, LF
/// line endings.
pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("p,q,N,accuracy\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.p,
            row.q,
            row.pool,
            format_sig(row.accuracy, 12)
        ));
    }
    out
}

/// Fixed significant-digit scientific formatting (deterministic output for
/// CSV reports).
pub(crate) fn format_sig(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), x)
}

/// PMFs of the parent agreement count (Bin(n, q)) and the unrelated
/// agreement count (Bin(n, p)).
pub fn agreement_distributions(n: u32, p: f64, q: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((binom_pmf(n, q)?, binom_pmf(n, p)?))
}
