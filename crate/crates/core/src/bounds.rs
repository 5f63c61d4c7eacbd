//! Closed-form probability lower bounds and measurement thresholds.
//!
//! All bounds are built on the concentration exponent
//! `f(n, m, delta) = c0*n - m*ln(12/delta) - ln 2` for an IID matrix with `n`
//! rows. `c0` is a concentration constant of the entry distribution and has
//! no canonical value; [`default_c0`] supplies a standard one.
//!
//! Probabilities are clamped to `[0, 1]`; a clamped-to-zero bound is
//! reported as vacuous rather than as an error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `delta^2/16 - delta^3/48`, the concentration constant for the three
/// standard entry distributions.
pub fn default_c0(delta: f64) -> f64 {
    delta * delta / 16.0 - delta.powi(3) / 48.0
}

/// `c0 / 10`.
pub fn default_c2(c0: f64) -> f64 {
    c0 / 10.0
}

pub fn concentration_exponent(n: f64, m: f64, delta: f64, c0: f64) -> f64 {
    c0 * n - m * (12.0 / delta).ln() - std::f64::consts::LN_2
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Probability that a block Toeplitz submatrix with `l` block rows of `d`
/// rows each satisfies the isometry bound on one support of size `m`.
pub fn lemma2_probability(d: usize, m: usize, delta: f64, l: usize, c0: f64) -> f64 {
    let f = concentration_exponent(d as f64, m as f64, delta, c0);
    clamp_probability(1.0 - (-f + (l as f64).ln()).exp())
}

/// The sharper bound obtained from an equitable coloring of the row
/// dependency graph with `q = m(m-1)+1` classes.
pub fn lemma3_probability(n: usize, m: usize, delta: f64, c0: f64) -> f64 {
    let q = m * m.saturating_sub(1) + 1;
    let f = concentration_exponent((n / q) as f64, m as f64, delta, c0);
    clamp_probability(1.0 - (-f + (q as f64).ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub c0: f64,
    pub c2: f64,
    /// `delta_{3m}` in `(0, 1)`.
    pub delta: f64,
    /// Sparsity; the isometry order is `3m`.
    pub m: usize,
    /// Signal length.
    #[serde(rename = "N")]
    pub big_n: usize,
    /// Measurement count.
    pub n: usize,
    /// Block rows (`l1*l2` for nested circulants).
    pub l: usize,
    /// Rows per block.
    pub d: usize,
}

impl BoundParams {
    /// Parameters with the default `c0(delta)` and `c2 = c0/10`.
    pub fn with_defaults(delta: f64, m: usize, big_n: usize, n: usize, l: usize) -> Self {
        let c0 = default_c0(delta);
        let d = n.checked_div(l).unwrap_or(0);
        Self {
            c0,
            c2: default_c2(c0),
            delta,
            m,
            big_n,
            n,
            l,
            d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = {} not in (0, 1)",
                self.delta
            )));
        }
        if !(self.c0 > 0.0 && self.c2 > 0.0) || !self.c0.is_finite() || !self.c2.is_finite() {
            return Err(Error::InvalidParameter("c0 and c2 must be positive".into()));
        }
        if self.m == 0 || self.big_n == 0 || self.n == 0 || self.l == 0 {
            return Err(Error::InvalidParameter(
                "m, N, n and l must be at least 1".into(),
            ));
        }
        if self.c2 >= self.c0 {
            return Err(Error::InvalidParameter(format!(
                "need c2 < c0, got c2 = {}, c0 = {}",
                self.c2, self.c0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `l <= 3m(3m-1)`.
    SmallL,
    /// `l > 3m(3m-1)`.
    LargeL,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundResult {
    pub regime: Regime,
    /// Exponent `-c2*n/l` or `-c2*n/m^2`.
    pub exponent: f64,
    pub prob_lower: f64,
    pub c1: f64,
    pub n_required: u64,
    pub vacuous: bool,
}

pub fn regime_for(l: usize, m: usize) -> Regime {
    if l <= 3 * m * (3 * m - 1) {
        Regime::SmallL
    } else {
        Regime::LargeL
    }
}

/// `c3 = ln(12/delta) + ln 2 + c0 + 4`.
pub fn c3(delta: f64, c0: f64) -> f64 {
    (12.0 / delta).ln() + std::f64::consts::LN_2 + c0 + 4.0
}

/// Probability and sample-size threshold for RIP of order `3m` of a block
/// Toeplitz (or block circulant) matrix.
///
/// Small `l`: `1 - exp(-c2 n / l)` once `n >= c1 l m ln(N/m)` with
/// `c1 = (3 ln(12/delta) + 15)/(c0 - c2)`. Large `l`: `1 - exp(-c2 n / m^2)`
/// once `n >= c1 m^3 ln(N/m)`, where `c1` must exceed `27 c3/(c0 - 9 c2)`;
/// that infimum is reported.
pub fn theorem1_bound(params: &BoundParams) -> Result<BoundResult> {
    params.validate()?;
    let BoundParams {
        c0,
        c2,
        delta,
        m,
        big_n,
        n,
        l,
        ..
    } = *params;
    let (mf, nf) = (m as f64, n as f64);
    let log_ratio = (big_n as f64 / mf).ln();
    let regime = regime_for(l, m);
    let (exponent, c1, threshold) = match regime {
        Regime::SmallL => {
            let c1 = (3.0 * (12.0 / delta).ln() + 15.0) / (c0 - c2);
            (-c2 * nf / l as f64, c1, c1 * l as f64 * mf * log_ratio)
        }
        Regime::LargeL => {
            if c0 <= 9.0 * c2 {
                return Err(Error::InvalidParameter(format!(
                    "large-l regime needs c0 > 9 c2, got c0 = {c0}, c2 = {c2}"
                )));
            }
            let c1 = 27.0 * c3(delta, c0) / (c0 - 9.0 * c2);
            (-c2 * nf / (mf * mf), c1, c1 * mf.powi(3) * log_ratio)
        }
    };
    let prob_lower = clamp_probability(1.0 - exponent.exp());
    Ok(BoundResult {
        regime,
        exponent,
        prob_lower,
        c1,
        n_required: threshold.max(0.0).ceil() as u64,
        vacuous: prob_lower == 0.0,
    })
}

/// The nested circulant block version: `theorem1_bound` with `l = l1*l2`.
pub fn corollary_bound(params: &BoundParams, l1: usize, l2: usize) -> Result<BoundResult> {
    theorem1_bound(&BoundParams {
        l: l1 * l2,
        ..*params
    })
}
