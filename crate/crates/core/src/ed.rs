//! Early-decoding feasibility for the strong user's first SIC step.
//!
//! The strong user (user 2, gain h2) must cancel the weak user's codeword
//! before decoding its own message, and it only has `n2` symbols. Treating
//! the superposed user-2 signal as noise turns the first SIC step into a
//! point-to-point link with equivalent SNR `gamma = g2 * P1_bar` where
//! `g2 = h2 / (1 + h2 * P2_bar)`. The minimum number of symbols after which
//! that step succeeds with probability at least `1 - eps_sic1` is
//!
//! ```text
//! n_tilde = log_m1 / D1(gamma)
//!         + log2(e) * sqrt(4*gamma + 2*gamma^2) * Qinv(eps_sic1) / D2(gamma) * sqrt(n1)
//! D1(g) = C(g) - log2(e) * g / (2*(1+g))
//! D2(g) = 2*(1+g)*C(g) - log2(e) * g = 2*(1+g)*D1(g)
//! ```
//!
//! Both denominators are positive for every `gamma > 0` because
//! `ln(1+g) > g/(1+g)`. The bound is certified by a fully explicit
//! dependence-testing error bound ([`dt_error_upper_bound`]): a threshold
//! decoder run on the first `n2` symbols errs with probability at most
//! `Q(r_tilde) + c2(n1, n2)`, where `c2` collects the Berry-Esseen and
//! input-constraint correction terms with all constants spelled out.

use crate::math::{capacity_raw, q_function, q_inverse_raw, LOG2_E};
use crate::{Error, Result};

/// Scenario parameters shared by every analysis in this crate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelConfig {
    /// Weak-user channel gain (linear). Must satisfy 0 < h1 <= h2.
    pub h1: f64,
    /// Strong-user channel gain (linear).
    pub h2: f64,
    /// Power budget: per-user or total.
    pub power: PowerConstraint,
    /// Weak-user blocklength.
    pub n1: u64,
    /// Strong-user blocklength, n2 <= n1.
    pub n2: u64,
    /// System error target, in (0, 1).
    pub eps: f64,
}

/// Individual per-user power budgets, or one shared sum budget to be split.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerConstraint {
    Individual { p1: f64, p2: f64 },
    Sum { p_total: f64 },
}

impl ChannelConfig {
    pub fn new(h1: f64, h2: f64, power: PowerConstraint, n1: u64, n2: u64, eps: f64) -> Result<Self> {
        let cfg = Self { h1, h2, power, n1, n2, eps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h1 > 0.0 && self.h2 >= self.h1 && self.h2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gains must satisfy h2 >= h1 > 0, got h1={}, h2={}",
                self.h1, self.h2
            )));
        }
        if !(self.n1 >= self.n2 && self.n2 >= 1) {
            return Err(Error::InvalidConfig(format!(
                "blocklengths must satisfy n1 >= n2 >= 1, got n1={}, n2={}",
                self.n1, self.n2
            )));
        }
        match self.power {
            PowerConstraint::Individual { p1, p2 } => {
                // p2 = 0 is a meaningful degenerate case (silent strong user).
                if !(p1 > 0.0 && p1.is_finite() && p2 >= 0.0 && p2.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "individual powers must satisfy p1 > 0, p2 >= 0, got p1={p1}, p2={p2}"
                    )));
                }
            }
            PowerConstraint::Sum { p_total } => {
                if !(p_total > 0.0 && p_total.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "total power must be positive, got {p_total}"
                    )));
                }
            }
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "error target must lie in (0,1), got {}",
                self.eps
            )));
        }
        Ok(())
    }

    /// Blocklength ratio p = n2/n1 in (0, 1].
    pub fn blocklength_ratio(&self) -> f64 {
        self.n2 as f64 / self.n1 as f64
    }
}

/// Result of the early-decoding minimum-symbol computation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EdBound {
    /// Fractional lower bound before the integer ceiling.
    pub n_tilde_min: f64,
    /// ceil(n_tilde_min), clamped below at 0.
    pub n_required: u64,
    /// Whether n_required fits inside the strong user's n2.
    pub feasible: bool,
    /// The equivalent first-SIC-step SNR used (gamma = g2 * p1_bar).
    pub gamma: f64,
}

/// Effective gain of the first SIC step when the strong user's own signal is
/// treated as noise: g2 = h2 / (1 + h2 * p2_bar).
pub fn equivalent_sic_gain(h2: f64, p2_bar: f64) -> Result<f64> {
    if !(h2 > 0.0 && h2.is_finite()) {
        return Err(Error::InvalidSnr { value: h2 });
    }
    if !(p2_bar >= 0.0 && p2_bar.is_finite()) {
        return Err(Error::InvalidSnr { value: p2_bar });
    }
    Ok(h2 / (1.0 + h2 * p2_bar))
}

/// D1(gamma) = C(gamma) - log2(e) * gamma / (2*(1+gamma)). Positive for gamma > 0.
#[inline]
pub(crate) fn ed_d1(gamma: f64) -> f64 {
    capacity_raw(gamma) - LOG2_E * gamma / (2.0 * (1.0 + gamma))
}

/// D2(gamma) = 2*(1+gamma)*C(gamma) - log2(e)*gamma = 2*(1+gamma)*D1(gamma).
///
/// Computed through D1 so the scaling identity holds to rounding error; the
/// direct two-term assembly loses ~gamma/2 of its precision to cancellation
/// for small gamma, which would leak into the threshold comparison between
/// [`ed_min_symbols`] and [`dt_error_upper_bound`].
#[inline]
pub(crate) fn ed_d2(gamma: f64) -> f64 {
    2.0 * (1.0 + gamma) * ed_d1(gamma)
}

/// Fractional minimum symbol count, shared with the grid solvers which feed a
/// precomputed Qinv(eps_sic1).
#[inline]
pub(crate) fn ed_n_tilde_raw(log_m1: f64, n1: f64, gamma: f64, qinv_sic1: f64) -> f64 {
    log_m1 / ed_d1(gamma)
        + LOG2_E * (4.0 * gamma + 2.0 * gamma * gamma).sqrt() * qinv_sic1 / ed_d2(gamma)
            * n1.sqrt()
}

/// Minimum number of symbols after which the strong user can decode the
/// weak-user codeword of size `log_m1` bits, out of a frame of `n1` symbols,
/// with first-step error at most `eps_sic1`.
///
/// Feasibility is judged against the caller's `n2` deadline.
pub fn ed_min_symbols(
    log_m1: f64,
    n1: u64,
    n2: u64,
    gamma: f64,
    eps_sic1: f64,
) -> Result<EdBound> {
    if !(log_m1 >= 0.0 && log_m1.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "message size must be >= 0 bits, got {log_m1}"
        )));
    }
    if n1 < 1 || n2 < 1 || n2 > n1 {
        return Err(Error::InvalidConfig(format!(
            "blocklengths must satisfy n1 >= n2 >= 1, got n1={n1}, n2={n2}"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidSnr { value: gamma });
    }
    if !(eps_sic1 > 0.0 && eps_sic1 < 1.0) {
        return Err(Error::InvalidProbability { value: eps_sic1 });
    }
    let n_tilde_min = ed_n_tilde_raw(log_m1, n1 as f64, gamma, q_inverse_raw(eps_sic1));
    // eps_sic1 > 1/2 makes the dispersion term negative; the symbol count
    // cannot be negative, so the ceiling is clamped at zero.
    let n_required = n_tilde_min.ceil().max(0.0) as u64;
    Ok(EdBound {
        n_tilde_min,
        n_required,
        feasible: n_required <= n2,
        gamma,
    })
}

/// Large-n1 limits of n_tilde/n1 when the weak user's message scales as
/// n1 * C(h1 * p_bar): the finite-blocklength limit C(h1 p)/D1(h2 p) and
/// the classical asymptotic C(h1 p)/C(h2 p). The first strictly exceeds the
/// second.
pub fn asymptotic_ed_fraction(h1: f64, h2: f64, p_bar: f64) -> Result<(f64, f64)> {
    if !(h1 > 0.0 && h2 >= h1 && h2.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "gains must satisfy h2 >= h1 > 0, got h1={h1}, h2={h2}"
        )));
    }
    if !(p_bar > 0.0 && p_bar.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "power must be positive, got {p_bar}"
        )));
    }
    let num = capacity_raw(h1 * p_bar);
    let d1 = ed_d1(h2 * p_bar);
    // ln(1+g) > g/(1+g) for g > 0, so d1 > 0 always; a violation means the
    // numerics are broken, not the input.
    assert!(d1 > 0.0, "D1({}) must be positive", h2 * p_bar);
    Ok((num / d1, num / capacity_raw(h2 * p_bar)))
}

/// Which exponential input-violation term enters c2.
///
/// The backoff-sized form exp(-n2 * delta^2 / 4) is the default; the fixed
/// form exp(-n2 / 2) is the published alternative assembly of the same
/// bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputViolationTerm {
    DeltaQuartic,
    HalfBlock,
}

/// Explicit constants of the dependence-testing error bound.
///
/// `p1` is the codebook symbol variance of the step being certified (the
/// backed-off power) and `ratio` is the fixed blocklength ratio n2/n1 the
/// constant c1 was derived under.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DtConstants {
    /// Peak-constraint exponent, 0 < a < 1/2.
    pub a: f64,
    /// Power backoff delta > 0.
    pub delta: f64,
    /// First-step effective gain g2.
    pub g2: f64,
    /// Codebook symbol variance of the decoded codeword.
    pub p1: f64,
    /// Blocklength ratio p = n2/n1 in (0, 1].
    pub ratio: f64,
    /// Input-violation term variant.
    pub violation: InputViolationTerm,
    /// d1 = (sqrt(g2) / (1 + g2*p1))^3.
    pub d1: f64,
    /// c0 = 62*sqrt(2) * (sqrt(g2)*p1)^3 / sqrt(d1).
    pub c0: f64,
    /// c1 = 128*sqrt(2) * p1 / (sqrt(d1) * ratio^(1+a)).
    pub c1: f64,
}

impl DtConstants {
    pub fn new(
        g2: f64,
        p1: f64,
        ratio: f64,
        a: f64,
        delta: f64,
        violation: InputViolationTerm,
    ) -> Result<Self> {
        if !(g2 > 0.0 && g2.is_finite()) {
            return Err(Error::InvalidSnr { value: g2 });
        }
        if !(p1 > 0.0 && p1.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "codebook power must be positive, got {p1}"
            )));
        }
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "blocklength ratio must lie in (0,1], got {ratio}"
            )));
        }
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "peak exponent must lie in (0, 1/2), got {a}"
            )));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "power backoff must be positive, got {delta}"
            )));
        }
        let d1 = (g2.sqrt() / (1.0 + g2 * p1)).powi(3);
        let sqrt2 = std::f64::consts::SQRT_2;
        let c0 = 62.0 * sqrt2 * (g2.sqrt() * p1).powi(3) / d1.sqrt();
        let c1 = 128.0 * sqrt2 * p1 / (d1.sqrt() * ratio.powf(1.0 + a));
        Ok(Self { a, delta, g2, p1, ratio, violation, d1, c0, c1 })
    }

    /// B0(n2) = c0 * n2^(-1/2) + c1 * n2^(a - 1/2). Vanishes as n2 grows.
    pub fn b0(&self, n2: u64) -> f64 {
        let n2 = n2 as f64;
        self.c0 / n2.sqrt() + self.c1 * n2.powf(self.a - 0.5)
    }

    /// B1(n2) = 2 * (ln 2 / sqrt(pi * d1 * n2) + B0(n2)).
    pub fn b1(&self, n2: u64) -> f64 {
        2.0 * (std::f64::consts::LN_2 / (std::f64::consts::PI * self.d1 * n2 as f64).sqrt()
            + self.b0(n2))
    }

    /// Full finite-blocklength correction
    /// c2 = B0 + B1 + input-violation term + peak-power term.
    pub fn c2(&self, n1: u64, n2: u64) -> f64 {
        let violation = match self.violation {
            InputViolationTerm::DeltaQuartic => (-(n2 as f64) * self.delta * self.delta / 4.0).exp(),
            InputViolationTerm::HalfBlock => (-(n2 as f64) / 2.0).exp(),
        };
        // Peak term exp(-n1^{2a}/(2 p1) + ln(2 n1)); the exponent is formed
        // first so a huge negative argument underflows cleanly.
        let n1f = n1 as f64;
        let peak_exponent = -n1f.powf(2.0 * self.a) / (2.0 * self.p1) + (2.0 * n1f).ln();
        self.b0(n2) + self.b1(n2) + violation + peak_exponent.exp()
    }
}

/// Dependence-testing error bound for the first SIC step.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DtErrorBound {
    /// Argument of the Gaussian tail term.
    pub q_arg: f64,
    /// Q(q_arg), the leading term.
    pub q_term: f64,
    /// Finite-blocklength correction c2(n1, n2).
    pub c2: f64,
    /// q_term + c2. May exceed 1.
    pub total: f64,
    /// True when the bound is vacuous (total > 1).
    pub vacuous: bool,
}

/// Upper bound on the probability that a threshold decoder fails to early
/// decode a `log_m1`-bit codeword from the first `n2` of `n1` symbols:
///
/// ```text
/// Q( ([2(1+g)C(g) - log2(e) g] n2 - 2(1+g) log_m1) / (log2(e) sqrt(4g+2g^2) sqrt(n1)) ) + c2
/// ```
///
/// A vacuous bound (> 1) is returned as-is with the flag set.
pub fn dt_error_upper_bound(
    log_m1: f64,
    n1: u64,
    n2: u64,
    gamma: f64,
    consts: &DtConstants,
) -> Result<DtErrorBound> {
    if !(log_m1 >= 0.0 && log_m1.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "message size must be >= 0 bits, got {log_m1}"
        )));
    }
    if n1 < 1 || n2 < 1 || n2 > n1 {
        return Err(Error::InvalidConfig(format!(
            "blocklengths must satisfy n1 >= n2 >= 1, got n1={n1}, n2={n2}"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidSnr { value: gamma });
    }
    // The constants were derived for the SNR g2 * p1; a mismatched gamma
    // would silently certify the wrong channel.
    let implied = consts.g2 * consts.p1;
    if (gamma - implied).abs() > 1e-9 * implied.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "gamma={gamma} is inconsistent with g2*p1={implied}"
        )));
    }
    let q_arg = (ed_d2(gamma) * n2 as f64 - 2.0 * (1.0 + gamma) * log_m1)
        / (LOG2_E * (4.0 * gamma + 2.0 * gamma * gamma).sqrt() * (n1 as f64).sqrt());
    let q_term = q_function(q_arg);
    let c2 = consts.c2(n1, n2);
    let total = q_term + c2;
    Ok(DtErrorBound {
        q_arg,
        q_term,
        c2,
        total,
        vacuous: total > 1.0,
    })
}

/// Conditional per-symbol statistics of the information density at the first
/// SIC step, given the transmitted symbol `x` (codeword scale, variance p1):
///
/// ```text
/// mean = C(g2 p1) + log2(e) * g2 (x^2 - p1) / (2 (1 + g2 p1))
/// var  = (log2(e) / (1 + g2 p1))^2 * g2 * (x^2 + g2 p1^2 / 2)
/// ```
///
/// Averaged over x ~ N(0, p1) the mean is C(g2 p1) and the variance equals
/// `dispersion(g2 p1)`.
pub fn info_density_symbol_stats(g2: f64, p1: f64, x: f64) -> (f64, f64) {
    let gamma = g2 * p1;
    let mean = capacity_raw(gamma) + LOG2_E * g2 * (x * x - p1) / (2.0 * (1.0 + gamma));
    let scale = LOG2_E / (1.0 + gamma);
    let var = scale * scale * g2 * (x * x + g2 * p1 * p1 / 2.0);
    (mean, var)
}
