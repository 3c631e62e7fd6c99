//! Achievable-rate expressions for the two-user downlink schemes.
//!
//! Three transmission schemes are covered, all built on the normal
//! approximation of [`crate::math`]:
//!
//! * **ED** (early decoding): the strong user decodes the weak user's
//!   codeword from its own `n2` received symbols, subtracts it, then decodes
//!   its own message. The weak user sees the strong user's signal as noise
//!   over the first `n2` symbols and a clean channel afterwards, so its rate
//!   is governed by a two-segment mixture of capacities and dispersions.
//! * **HNOMA** (hybrid NOMA): the weak user splits its message into an
//!   overlap part, decoded by both receivers within `n2` symbols, and a tail
//!   part sent interference-free over the remaining `n1 - n2` symbols.
//! * **TIN** (treat interference as noise): the strong user decodes its own
//!   message directly with the weak user's full-power signal as noise.
//!
//! Power budgets come in two flavours. Under individual constraints (IPC)
//! each user owns a power `P_k` and transmits at the backed-off `P_k - delta`.
//! Under a sum constraint (SPC) a [`PowerAllocation`] splits the total across
//! the overlap segment, the tail segment, and the strong user, subject to
//! `p*P11 + (1-p)*P12 + p*P2 <= P_T` with `p = n2/n1`; the random-coding
//! power-violation events this splitting introduces are bounded by
//! [`spc_violation_bound`].

use crate::ed::{ed_min_symbols, ChannelConfig, EdBound, PowerConstraint};
use crate::math::{capacity_raw, dispersion_raw, q_inverse_raw, second_order_rate_raw, Probability};
use crate::{Error, Result};

/// Split of the system error target across decoding steps.
///
/// Only the fields of the scheme being analysed are populated:
/// `eps1`/`eps_sic1`/`eps_sic2` for ED, `eps_h11`/`eps_h12`/`eps_sic1`/
/// `eps_sic2` for HNOMA, `eps2` for TIN. The two budget identities are
///
/// ```text
/// ED:    eps1 + eps_sic1 + eps_sic2 - eps_sic1*eps_sic2        <= eps
/// HNOMA: 2 - (1-eps_h11)(1-eps_h12) - (1-eps_sic1)(1-eps_sic2) <= eps
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct ErrorBudget {
    /// Weak user, full-frame decode (ED scheme).
    pub eps1: Option<Probability>,
    /// Strong user, first SIC step (shared by ED and HNOMA).
    pub eps_sic1: Option<Probability>,
    /// Strong user, own-message decode after cancellation.
    pub eps_sic2: Option<Probability>,
    /// Weak user, overlap sub-block (HNOMA).
    pub eps_h11: Option<Probability>,
    /// Weak user, tail sub-block (HNOMA).
    pub eps_h12: Option<Probability>,
    /// Strong user, direct decode (TIN).
    pub eps2: Option<Probability>,
}

impl ErrorBudget {
    /// ED budget from the three step targets.
    pub fn ed(eps1: f64, eps_sic1: f64, eps_sic2: f64) -> Result<Self> {
        Ok(Self {
            eps1: Some(Probability::new(eps1)?),
            eps_sic1: Some(Probability::new(eps_sic1)?),
            eps_sic2: Some(Probability::new(eps_sic2)?),
            ..Self::default()
        })
    }

    /// HNOMA budget from the four step targets.
    pub fn hnoma(eps_h11: f64, eps_h12: f64, eps_sic1: f64, eps_sic2: f64) -> Result<Self> {
        Ok(Self {
            eps_h11: Some(Probability::new(eps_h11)?),
            eps_h12: Some(Probability::new(eps_h12)?),
            eps_sic1: Some(Probability::new(eps_sic1)?),
            eps_sic2: Some(Probability::new(eps_sic2)?),
            ..Self::default()
        })
    }

    /// TIN budget: a single direct-decode target for the strong user.
    pub fn tin(eps2: f64) -> Result<Self> {
        Ok(Self {
            eps2: Some(Probability::new(eps2)?),
            ..Self::default()
        })
    }

    /// Equal three-way ED split of a system target. Always satisfies the
    /// budget: the union-bound total is eps - (eps/3)^2.
    pub fn ed_even(eps: f64) -> Result<Self> {
        Self::ed(eps / 3.0, eps / 3.0, eps / 3.0)
    }

    /// Equal four-way HNOMA split; total is eps - eps^2/8.
    pub fn hnoma_even(eps: f64) -> Result<Self> {
        Self::hnoma(eps / 4.0, eps / 4.0, eps / 4.0, eps / 4.0)
    }

    pub fn ed_parts(&self) -> Option<(Probability, Probability, Probability)> {
        Some((self.eps1?, self.eps_sic1?, self.eps_sic2?))
    }

    pub fn hnoma_parts(&self) -> Option<(Probability, Probability, Probability, Probability)> {
        Some((self.eps_h11?, self.eps_h12?, self.eps_sic1?, self.eps_sic2?))
    }

    /// Union-bound system error of an ED budget.
    pub fn ed_total(&self) -> Option<f64> {
        let (e1, es1, es2) = self.ed_parts()?;
        let (e1, es1, es2) = (e1.get(), es1.get(), es2.get());
        Some(e1 + es1 + es2 - es1 * es2)
    }

    /// Union-bound system error of an HNOMA budget.
    pub fn hnoma_total(&self) -> Option<f64> {
        let (eh11, eh12, es1, es2) = self.hnoma_parts()?;
        Some(
            2.0 - (1.0 - eh11.get()) * (1.0 - eh12.get())
                - (1.0 - es1.get()) * (1.0 - es2.get()),
        )
    }

    /// System-target slack of whichever budget family is populated
    /// (HNOMA checked first, then ED, then TIN).
    pub fn slack(&self, eps: f64) -> Option<f64> {
        let total = self
            .hnoma_total()
            .or_else(|| self.ed_total())
            .or_else(|| Some(self.eps2?.get()))?;
        Some(eps - total)
    }

    /// Whether the populated budget fits within the system target. The
    /// boundary counts as satisfied up to rounding (the optimizers solve the
    /// constraint as an equality there). The absolute term covers the HNOMA
    /// identity, whose products run through order-one intermediates, so its
    /// rounding noise does not scale with eps.
    pub fn satisfies(&self, eps: f64) -> bool {
        match self.slack(eps) {
            Some(s) => s >= -(1e-12 * eps + 1e-14),
            None => false,
        }
    }
}

/// Sum-power split across the overlap segment, the tail segment, and the
/// strong user. All powers are the backed-off codebook variances; `delta` is
/// the backoff that was already subtracted, kept for the violation bounds.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerAllocation {
    /// Weak user power over the first n2 symbols.
    pub p11_bar: f64,
    /// Weak user power over the remaining n1 - n2 symbols.
    pub p12_bar: f64,
    /// Strong user power (first n2 symbols only).
    pub p2_bar: f64,
    /// Power backoff, >= 0.
    pub delta: f64,
}

impl PowerAllocation {
    pub fn new(p11_bar: f64, p12_bar: f64, p2_bar: f64, delta: f64) -> Result<Self> {
        let alloc = Self { p11_bar, p12_bar, p2_bar, delta };
        alloc.validate()?;
        Ok(alloc)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.p11_bar) && ok(self.p12_bar) && ok(self.p2_bar) && ok(self.delta)) {
            return Err(Error::InvalidConfig(format!(
                "allocation entries must be finite and >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Time-averaged sum power p*p11 + (1-p)*p12 + p*p2 with p = n2/n1.
    pub fn average_power(&self, p: f64) -> f64 {
        p * self.p11_bar + (1.0 - p) * self.p12_bar + p * self.p2_bar
    }

    /// Sum-power feasibility at blocklength ratio `p`. The boundary is
    /// admitted with a relative rounding tolerance because optimal
    /// allocations sit exactly on it.
    pub fn spc_feasible(&self, p: f64, p_total: f64) -> bool {
        self.average_power(p) <= p_total * (1.0 + 1e-12)
    }
}

/// Transmission scheme tag carried by every rate point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Ed,
    Hnoma,
    Tin,
}

/// A pair of per-user rates in bits per channel use.
///
/// Reported rates are clamped at zero; the raw pre-clamp values are retained
/// because feasibility thresholds and diagnostics need the signed margin.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
    pub scheme: Scheme,
    pub r1_raw: f64,
    pub r2_raw: f64,
}

impl RatePoint {
    pub fn new(r1_raw: f64, r2_raw: f64, scheme: Scheme) -> Self {
        Self {
            r1: r1_raw.max(0.0),
            r2: r2_raw.max(0.0),
            scheme,
            r1_raw,
            r2_raw,
        }
    }

    /// Weighted objective omega*r1 + (1-omega)*r2 on the clamped rates.
    pub fn objective(&self, omega: f64) -> f64 {
        omega * self.r1 + (1.0 - omega) * self.r2
    }
}

/// The four effective SNRs of the individual-power-constraint setting:
/// `snr11` weak user with interference, `snr21` strong user decoding the
/// weak codeword, `snr12` weak user clean, `snr22` strong user clean.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SnrSet {
    pub snr11: f64,
    pub snr21: f64,
    pub snr12: f64,
    pub snr22: f64,
}

/// Effective SNRs under individual power constraints with backoff `delta`
/// applied to both users:
///
/// ```text
/// snr11 = h1*P1_bar / (1 + h1*P2_bar)    snr12 = h1*P1_bar
/// snr21 = h2*P1_bar / (1 + h2*P2_bar)    snr22 = h2*P2_bar
/// ```
pub fn snr_set_ipc(cfg: &ChannelConfig, delta: f64) -> Result<SnrSet> {
    cfg.validate()?;
    let PowerConstraint::Individual { p1, p2 } = cfg.power else {
        return Err(Error::InvalidConfig(
            "individual power constraints required".into(),
        ));
    };
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "backoff must be finite and >= 0, got {delta}"
        )));
    }
    let p1_bar = p1 - delta;
    let p2_bar = p2 - delta;
    // The backoff may consume p1 entirely (zero-rate degenerate) but never
    // push a power negative.
    if p1_bar < 0.0 || p2_bar < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "backoff {delta} exceeds a power budget (P1={p1}, P2={p2})"
        )));
    }
    Ok(SnrSet {
        snr11: cfg.h1 * p1_bar / (1.0 + cfg.h1 * p2_bar),
        snr21: cfg.h2 * p1_bar / (1.0 + cfg.h2 * p2_bar),
        snr12: cfg.h1 * p1_bar,
        snr22: cfg.h2 * p2_bar,
    })
}

/// Effective SNRs under a sum power constraint with an explicit split. The
/// overlap segment carries `p11_bar` against the strong user's interference;
/// the tail segment carries `p12_bar` clean. Same expression shapes as
/// [`snr_set_ipc`], so a collapsed allocation reproduces the IPC values bit
/// for bit.
pub fn snr_set_spc(cfg: &ChannelConfig, alloc: &PowerAllocation) -> Result<SnrSet> {
    cfg.validate()?;
    alloc.validate()?;
    Ok(SnrSet {
        snr11: cfg.h1 * alloc.p11_bar / (1.0 + cfg.h1 * alloc.p2_bar),
        snr21: cfg.h2 * alloc.p11_bar / (1.0 + cfg.h2 * alloc.p2_bar),
        snr12: cfg.h1 * alloc.p12_bar,
        snr22: cfg.h2 * alloc.p2_bar,
    })
}

/// Rate coefficients of the normal approximation at fixed (n, snr):
/// rate(eps) = c - k * Qinv(eps). The grid solvers precompute these once per
/// SNR and sweep Qinv; evaluating through the same pair keeps solver results
/// bit-identical to the public rate functions.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RateCoef {
    pub c: f64,
    pub k: f64,
}

impl RateCoef {
    #[inline]
    pub fn of(n: f64, snr: f64) -> Self {
        Self {
            c: capacity_raw(snr),
            k: (dispersion_raw(snr) / n).sqrt(),
        }
    }

    /// Two-segment mixture for the ED weak user: segment `a` (weight p) with
    /// interference, segment `b` (weight 1-p) clean, over n1 symbols total.
    #[inline]
    pub fn of_mixture(p: f64, snr_a: f64, snr_b: f64, n1: f64) -> Self {
        let c = p * capacity_raw(snr_a) + (1.0 - p) * capacity_raw(snr_b);
        let v = p * dispersion_raw(snr_a) + (1.0 - p) * dispersion_raw(snr_b);
        Self { c, k: (v / n1).sqrt() }
    }

    #[inline]
    pub fn eval(&self, qinv: f64) -> f64 {
        self.c - self.k * qinv
    }
}

/// HNOMA composite from the three segment rates: the overlap part must be
/// decodable by both receivers, the tail part only by the weak user.
#[inline]
pub(crate) fn hnoma_composite(p: f64, r11: f64, r21: f64, tail: f64) -> f64 {
    p * r11.min(r21) + tail
}

/// Weak-user ED rate over the two-segment channel (unclamped).
pub(crate) fn weak_mixture_rate(p: f64, snr_a: f64, snr_b: f64, n1: f64, qinv: f64) -> f64 {
    RateCoef::of_mixture(p, snr_a, snr_b, n1).eval(qinv)
}

/// An ED corner point together with the early-decoding feasibility evidence.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EdRegionPoint {
    pub point: RatePoint,
    /// Minimum-symbol bound at log_m1 = n1 * max(r1_raw, 0); absent when the
    /// first SIC step has zero SNR.
    pub bound: Option<EdBound>,
    /// True when the bound fits within n2 (and, under SPC, the power split
    /// is admissible). An infeasible point still reports its formula rates.
    pub feasible: bool,
}

/// ED corner point under individual power constraints.
///
/// The weak-user rate is the two-segment mixture value at `eps1`; the strong
/// user decodes its own message at `eps_sic2` after cancelling the weak
/// codeword. Feasibility then requires the weak codeword (at the rate just
/// computed) to be early-decodable from `n2` symbols at `eps_sic1`; the rate
/// is not iterated against that constraint.
pub fn ed_region_ipc(cfg: &ChannelConfig, budget: &ErrorBudget, backoff: f64) -> Result<EdRegionPoint> {
    let (eps1, eps_sic1, eps_sic2) = budget.ed_parts().ok_or_else(|| {
        Error::InvalidConfig("ED analysis needs eps1, eps_sic1, eps_sic2".into())
    })?;
    let snrs = snr_set_ipc(cfg, backoff)?;
    let p = cfg.blocklength_ratio();
    let r1_raw = weak_mixture_rate(
        p,
        snrs.snr11,
        snrs.snr12,
        cfg.n1 as f64,
        q_inverse_raw(eps1.get()),
    );
    let r2_raw = second_order_rate_raw(cfg.n2 as f64, snrs.snr22, q_inverse_raw(eps_sic2.get()));
    // The first SIC step sees the weak codeword at gamma = snr21.
    finish_ed_point(cfg, r1_raw, r2_raw, snrs.snr21, eps_sic1, true)
}

/// ED corner point under a sum power constraint with an explicit power split.
///
/// `alloc` carries backed-off powers directly. An allocation that violates
/// the average-power budget is reported as infeasible, not as an error.
pub fn ed_region_spc(
    cfg: &ChannelConfig,
    budget: &ErrorBudget,
    alloc: &PowerAllocation,
) -> Result<EdRegionPoint> {
    cfg.validate()?;
    alloc.validate()?;
    let (eps1, eps_sic1, eps_sic2) = budget.ed_parts().ok_or_else(|| {
        Error::InvalidConfig("ED analysis needs eps1, eps_sic1, eps_sic2".into())
    })?;
    let PowerConstraint::Sum { p_total } = cfg.power else {
        return Err(Error::InvalidConfig("sum power constraint required".into()));
    };
    let p = cfg.blocklength_ratio();
    let power_ok = alloc.spc_feasible(p, p_total);
    let snrs = snr_set_spc(cfg, alloc)?;
    let r1_raw = weak_mixture_rate(
        p,
        snrs.snr11,
        snrs.snr12,
        cfg.n1 as f64,
        q_inverse_raw(eps1.get()),
    );
    let r2_raw = second_order_rate_raw(cfg.n2 as f64, snrs.snr22, q_inverse_raw(eps_sic2.get()));
    finish_ed_point(cfg, r1_raw, r2_raw, snrs.snr21, eps_sic1, power_ok)
}

/// Shared ED assembly: clamp the point, attach the early-decoding bound for
/// the realized weak-user message size, and combine the feasibility flags.
fn finish_ed_point(
    cfg: &ChannelConfig,
    r1_raw: f64,
    r2_raw: f64,
    gamma: f64,
    eps_sic1: Probability,
    power_ok: bool,
) -> Result<EdRegionPoint> {
    let point = RatePoint::new(r1_raw, r2_raw, Scheme::Ed);
    // The early-decoding requirement binds even at r1 = 0: the dispersion
    // term of the minimum-symbol bound must fit in n2 on its own.
    let (bound, ed_ok) = if gamma > 0.0 {
        let log_m1 = cfg.n1 as f64 * point.r1;
        let b = ed_min_symbols(log_m1, cfg.n1, cfg.n2, gamma, eps_sic1.get())?;
        (Some(b), b.feasible)
    } else {
        (None, false)
    };
    Ok(EdRegionPoint {
        point,
        bound,
        feasible: power_ok && ed_ok,
    })
}

/// HNOMA weak-user composite rate (unclamped):
///
/// ```text
/// p * min{ R(n2, snr11, eps_h11), R(n2, snr21, eps_sic1) }
///   + (1-p) * R(n1-n2, snr12, eps_h12)
/// ```
///
/// The min keeps the overlap sub-block decodable at the strong user, which
/// must cancel it. With n1 = n2 the tail term is dropped.
#[allow(clippy::too_many_arguments)]
pub fn hnoma_r1(
    n1: u64,
    n2: u64,
    snr11: f64,
    snr21: f64,
    snr12: f64,
    eps_h11: f64,
    eps_h12: f64,
    eps_sic1: f64,
) -> Result<f64> {
    if n1 < 1 || n2 < 1 || n2 > n1 {
        return Err(Error::InvalidConfig(format!(
            "blocklengths must satisfy n1 >= n2 >= 1, got n1={n1}, n2={n2}"
        )));
    }
    for snr in [snr11, snr21, snr12] {
        if !(snr >= 0.0 && snr.is_finite()) {
            return Err(Error::InvalidSnr { value: snr });
        }
    }
    let eps_h11 = Probability::new(eps_h11)?;
    let eps_h12 = Probability::new(eps_h12)?;
    let eps_sic1 = Probability::new(eps_sic1)?;
    let p = n2 as f64 / n1 as f64;
    let r11 = second_order_rate_raw(n2 as f64, snr11, q_inverse_raw(eps_h11.get()));
    let r21 = second_order_rate_raw(n2 as f64, snr21, q_inverse_raw(eps_sic1.get()));
    let tail = if n1 > n2 {
        (1.0 - p)
            * second_order_rate_raw((n1 - n2) as f64, snr12, q_inverse_raw(eps_h12.get()))
    } else {
        0.0
    };
    Ok(hnoma_composite(p, r11, r21, tail))
}

/// Strong-user rate when the weak user's signal is treated as noise:
/// `R(n2, g2' * p2_bar, eps2)` with `g2' = h2 / (1 + h2 * p1)`, where `p1`
/// is the interfering weak-user power. Unclamped.
pub fn tin_rate_user2(n2: u64, h2: f64, p1: f64, p2_bar: f64, eps2: f64) -> Result<f64> {
    if n2 < 1 {
        return Err(Error::InvalidConfig("n2 must be >= 1".into()));
    }
    if !(h2 > 0.0 && h2.is_finite()) {
        return Err(Error::InvalidSnr { value: h2 });
    }
    if !(p1 >= 0.0 && p1.is_finite() && p2_bar >= 0.0 && p2_bar.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "powers must be finite and >= 0, got p1={p1}, p2_bar={p2_bar}"
        )));
    }
    let eps2 = Probability::new(eps2)?;
    let g2p = h2 / (1.0 + h2 * p1);
    Ok(second_order_rate_raw(
        n2 as f64,
        g2p * p2_bar,
        q_inverse_raw(eps2.get()),
    ))
}

/// Tail bound on the cross-correlation between the two codebooks breaking
/// the sum-power margin: `exp(-n2 * delta^2 / (8 * p11_bar * p2_bar))`.
pub fn cross_term_tail(n2: u64, delta: f64, p11_bar: f64, p2_bar: f64) -> Result<f64> {
    if n2 < 1 {
        return Err(Error::InvalidConfig("n2 must be >= 1".into()));
    }
    if !(p11_bar > 0.0 && p11_bar.is_finite() && p2_bar > 0.0 && p2_bar.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "powers must be positive, got p11_bar={p11_bar}, p2_bar={p2_bar}"
        )));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "margin must be >= 0, got {delta}"
        )));
    }
    Ok((-(n2 as f64) * delta * delta / (8.0 * p11_bar * p2_bar)).exp())
}

/// Union bound on the probability that a random SPC codebook pair exceeds
/// the total-power constraint.
///
/// The margin `delta` is split three ways: the cross term keeps the full
/// margin (its closed form is the tightest), and each per-block energy
/// overshoot gets a third, bounded by the same sub-exponential form
/// `exp(-n * t^2 / 8)` with `t` the relative margin. The tail-segment term
/// appears only when n1 > n2; its margin, reduced by the overlap's share of
/// the averaging window, can be non-positive for n2 close to n1, in which
/// case that term is a vacuous 1.
pub fn spc_violation_bound(n1: u64, n2: u64, alloc: &PowerAllocation) -> Result<f64> {
    if n1 < 1 || n2 < 1 || n2 > n1 {
        return Err(Error::InvalidConfig(format!(
            "blocklengths must satisfy n1 >= n2 >= 1, got n1={n1}, n2={n2}"
        )));
    }
    alloc.validate()?;
    if !(alloc.p11_bar > 0.0 && alloc.p2_bar > 0.0) {
        return Err(Error::InvalidConfig(
            "overlap powers must be positive for the violation bound".into(),
        ));
    }
    let delta = alloc.delta;
    let cross = cross_term_tail(n2, delta, alloc.p11_bar, alloc.p2_bar)?;
    let n2f = n2 as f64;
    let t11 = delta / (3.0 * alloc.p11_bar);
    let t2 = delta / (3.0 * alloc.p2_bar);
    let mut total = cross + (-n2f * t11 * t11 / 8.0).exp() + (-n2f * t2 * t2 / 8.0).exp();
    if n1 > n2 {
        if !(alloc.p12_bar > 0.0) {
            return Err(Error::InvalidConfig(
                "tail power must be positive when n1 > n2".into(),
            ));
        }
        let tail_len = (n1 - n2) as f64;
        let t12 = delta * (1.0 - 2.0 * n2f / (3.0 * tail_len)) / alloc.p12_bar;
        total += if t12 > 0.0 {
            (-tail_len * t12 * t12 / 8.0).exp()
        } else {
            1.0
        };
    }
    Ok(total)
}
