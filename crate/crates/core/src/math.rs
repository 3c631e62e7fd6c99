//! Gaussian tail utilities and the second-order (normal approximation) rate.
//!
//! Everything downstream reduces to four primitives over an AWGN link with
//! signal-to-noise ratio `snr`:
//!
//! - `capacity(snr) = (1/2) log2(1 + snr)` in bits per channel use,
//! - `dispersion(snr) = (log2 e)^2 * snr / (1 + snr)`, the second-order
//!   coefficient for i.i.d. Gaussian codebooks,
//! - the Gaussian tail `Q(x)` and its inverse,
//! - `second_order_rate(n, snr, eps) = capacity - sqrt(dispersion/n) * Qinv(eps)`.
//!
//! All logarithms are base 2. The rate may be negative for small `n` or tiny
//! `eps`; callers that need a physical rate clamp at zero themselves, never
//! this module.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// log2(e), the unit conversion between nats and bits.
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// (log2 e)^2, the prefactor of the Gaussian-input dispersion.
pub const LOG2_E_SQ: f64 = LOG2_E * LOG2_E;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_677_94;

/// An error-probability target, constrained to the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidProbability { value })
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// A signal-to-noise ratio or effective SNR, finite and non-negative (linear scale).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Snr(f64);

impl Snr {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidSnr { value })
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Snr {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Snr> for f64 {
    fn from(s: Snr) -> f64 {
        s.0
    }
}

// Rational approximations for erf/erfc after W. J. Cody, "Rational Chebyshev
// approximation for the error function" (SPECFUN calerf). Three ranges in
// y = x/sqrt(2): central |y| <= 0.46875, mid 0.46875 < y <= 4, and the
// asymptotic expansion beyond. Relative error is a few ulp on each range,
// which keeps Q itself within 1e-12 relative over |x| <= 38.
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERFC_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERFC_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERFC_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERFC_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];
const SQRPI: f64 = 5.6418958354775628695e-1;
const ERF_THRESH: f64 = 0.46875;

/// erf(y) for |y| <= 0.46875, odd in y.
fn erf_central(y: f64) -> f64 {
    let z = y * y;
    let mut xnum = ERF_A[4] * z;
    let mut xden = z;
    for i in 0..3 {
        xnum = (xnum + ERF_A[i]) * z;
        xden = (xden + ERF_B[i]) * z;
    }
    y * (xnum + ERF_A[3]) / (xden + ERF_B[3])
}

/// erfc(y) for y > 0.46875.
///
/// The factor exp(-y^2) is evaluated as exp(-ysq^2) * exp(-del) with
/// ysq = trunc(16y)/16, so the large part of the exponent is applied to an
/// exactly representable argument and only |del| <= ~4.8 carries rounding.
fn erfc_tail(y: f64) -> f64 {
    let result = if y <= 4.0 {
        let mut xnum = ERFC_C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + ERFC_C[i]) * y;
            xden = (xden + ERFC_D[i]) * y;
        }
        (xnum + ERFC_C[7]) / (xden + ERFC_D[7])
    } else {
        let z = 1.0 / (y * y);
        let mut xnum = ERFC_P[5] * z;
        let mut xden = z;
        for i in 0..4 {
            xnum = (xnum + ERFC_P[i]) * z;
            xden = (xden + ERFC_Q[i]) * z;
        }
        let r = z * (xnum + ERFC_P[4]) / (xden + ERFC_Q[4]);
        (SQRPI - r) / y
    };
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * result
}

/// Gaussian tail probability Q(x) = Pr[N(0,1) > x].
///
/// Accepts any finite argument. Underflows to a subnormal near x = 38 and to
/// zero slightly past it; the inverse only relies on the region where Q is
/// a normal float.
pub fn q_function(x: f64) -> f64 {
    let y = x * std::f64::consts::FRAC_1_SQRT_2;
    if y.abs() <= ERF_THRESH {
        0.5 - 0.5 * erf_central(y)
    } else {
        let r = erfc_tail(y.abs());
        if x > 0.0 {
            0.5 * r
        } else {
            1.0 - 0.5 * r
        }
    }
}

// Acklam's rational initial estimate for the standard normal quantile,
// refined below by Newton steps against q_function. Initial relative error
// is about 1.15e-9; two Newton steps push the residual to rounding level.
const ACK_A: [f64; 6] = [
    -3.969683028665376e1,
    2.209460984245205e2,
    -2.759285104469687e2,
    1.383577518672690e2,
    -3.066479806614716e1,
    2.506628277459239e0,
];
const ACK_B: [f64; 5] = [
    -5.447609879822406e1,
    1.615858368580409e2,
    -1.556989798598866e2,
    6.680131188771972e1,
    -1.328068155288572e1,
];
const ACK_C: [f64; 6] = [
    -7.784894002430293e-3,
    -3.223964580411365e-1,
    -2.400758277161838e0,
    -2.549732539343734e0,
    4.374664141464968e0,
    2.938163982698783e0,
];
const ACK_D: [f64; 4] = [
    7.784695709041462e-3,
    3.224671290700398e-1,
    2.445134137142996e0,
    3.754408661907416e0,
];
const ACK_P_LOW: f64 = 0.02425;

/// Qinv(p) for p in (0, 0.5): always the lower-tail rational form, so no
/// cancellation against 1 occurs anywhere on the small branch.
fn q_inverse_small(p: f64) -> f64 {
    let mut x = if p < ACK_P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((ACK_C[0] * q + ACK_C[1]) * q + ACK_C[2]) * q + ACK_C[3]) * q + ACK_C[4]) * q
            + ACK_C[5])
            / ((((ACK_D[0] * q + ACK_D[1]) * q + ACK_D[2]) * q + ACK_D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((ACK_A[0] * r + ACK_A[1]) * r + ACK_A[2]) * r + ACK_A[3]) * r + ACK_A[4]) * r
            + ACK_A[5])
            * q
            / (((((ACK_B[0] * r + ACK_B[1]) * r + ACK_B[2]) * r + ACK_B[3]) * r + ACK_B[4]) * r
                + 1.0)
    };
    // Acklam's form is the normal CDF quantile; the tail probability quantile
    // is its negation.
    x = -x;
    for _ in 0..2 {
        let pdf = (-0.5 * x * x).exp() * FRAC_1_SQRT_2PI;
        if pdf < 1e-300 {
            break;
        }
        x += (q_function(x) - p) / pdf;
    }
    x
}

pub(crate) fn q_inverse_raw(p: f64) -> f64 {
    if p == 0.5 {
        0.0
    } else if p > 0.5 {
        // 1 - p is exact for p in [0.5, 1) (Sterbenz), so the reflection
        // loses nothing.
        -q_inverse_small(1.0 - p)
    } else {
        q_inverse_small(p)
    }
}

/// Inverse Gaussian tail: the x with Q(x) = p. Exactly 0 at p = 0.5,
/// negative for p > 0.5. Absolute error is below 1e-10 wherever Q is a
/// normal float.
pub fn q_inverse(p: Probability) -> f64 {
    q_inverse_raw(p.get())
}

#[inline]
pub(crate) fn capacity_raw(snr: f64) -> f64 {
    0.5 * snr.ln_1p() * LOG2_E
}

/// AWGN capacity (1/2) log2(1 + snr) in bits per channel use.
pub fn capacity(snr: Snr) -> f64 {
    capacity_raw(snr.get())
}

#[inline]
pub(crate) fn dispersion_raw(snr: f64) -> f64 {
    LOG2_E_SQ * snr / (1.0 + snr)
}

/// Dispersion of the AWGN channel under an i.i.d. Gaussian codebook,
/// (log2 e)^2 * snr/(1+snr). Strictly increasing, bounded by (log2 e)^2.
pub fn dispersion(snr: Snr) -> f64 {
    dispersion_raw(snr.get())
}

#[inline]
pub(crate) fn second_order_rate_raw(n: f64, snr: f64, qinv: f64) -> f64 {
    capacity_raw(snr) - (dispersion_raw(snr) / n).sqrt() * qinv
}

/// Normal-approximation achievable rate at blocklength `n` and error target
/// `eps`. May be negative; no clamping is performed here.
pub fn second_order_rate(n: u64, snr: Snr, eps: Probability) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig("blocklength must be >= 1".into()));
    }
    Ok(second_order_rate_raw(
        n as f64,
        snr.get(),
        q_inverse_raw(eps.get()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    const Q_TABLE: [(f64, f64); 10] = [
        (0.1, 0.4601721627229710185346),
        (0.5, 0.3085375387259868963623),
        (1.0, 0.1586552539314570514148),
        (2.0, 0.02275013194817920720028),
        (5.0, 2.866515718791939116738e-7),
        (6.0, 9.865876450376981407009e-10),
        (10.0, 7.619853024160526065973e-24),
        (20.0, 2.753624118606233695076e-89),
        (26.0, 2.476063315503389285787e-149),
        (-1.0, 0.8413447460685429485852),
    ];

    #[test]
    fn q_function_reference_values() {
        for (x, expect) in Q_TABLE {
            assert!(
                rel(q_function(x), expect) < 1e-12,
                "Q({x}) = {} vs {expect}",
                q_function(x)
            );
        }
        assert_eq!(q_function(0.0), 0.5);
    }

    #[test]
    fn q_function_deep_tail_subnormal() {
        let q38 = q_function(38.0);
        assert!(q38 > 0.0 && q38 < 1e-300);
        // Subnormal quantization caps the achievable precision here.
        assert!(rel(q38, 2.885428360068784308351e-316) < 1e-6);
    }

    const QINV_TABLE: [(f64, f64); 10] = [
        (2e-6, 4.611382362302668348711),
        (1e-3, 3.09023230616781354154),
        (0.25, 0.6744897501960817432022),
        (1e-12, 7.03448382530113192981),
        (2e-5, 4.107479654586249332026),
        (1e-2, 2.326347874040841100886),
        (0.3, 0.5244005127080407840383),
        (0.9, -1.281551565544600466965),
        (1e-9, 5.997807015007686871562),
        (6.666666666666666666e-7, 4.834719762959697372809),
    ];

    #[test]
    fn q_inverse_reference_values() {
        for (p, expect) in QINV_TABLE {
            let got = q_inverse(Probability::new(p).unwrap());
            assert!(
                (got - expect).abs() < 1e-12 * expect.abs().max(1.0),
                "Qinv({p}) = {got} vs {expect}"
            );
        }
        assert_eq!(q_inverse(Probability::new(0.5).unwrap()), 0.0);
    }

    #[test]
    fn q_round_trip_spot() {
        for &p in &[1e-12, 1e-9, 1e-6, 1e-3, 0.1, 0.4, 0.6, 0.9, 1.0 - 1e-9] {
            let x = q_inverse_raw(p);
            let back = q_function(x);
            if p <= 0.5 {
                assert!(rel(back, p) < 1e-12, "round trip at {p}: {back}");
            } else {
                assert!((back - p).abs() < 1e-14, "round trip at {p}: {back}");
            }
        }
    }

    #[test]
    fn q_function_monotone_decreasing() {
        let mut prev = f64::INFINITY;
        let mut x = -8.0;
        while x <= 8.0 {
            let q = q_function(x);
            assert!(q < prev);
            prev = q;
            x += 0.037;
        }
    }

    #[test]
    fn capacity_reference_values() {
        let c8 = capacity(Snr::new(8.0).unwrap());
        assert!(rel(c8, 1.584962500721156181454) < 1e-14);
        let c2 = capacity(Snr::new(2.0).unwrap());
        assert!(rel(c2, 0.7924812503605780907269) < 1e-14);
        assert_eq!(capacity(Snr::new(0.0).unwrap()), 0.0);
    }

    #[test]
    fn dispersion_reference_values() {
        assert!(rel(dispersion(Snr::new(1.0).unwrap()), 1.040684490502803898935) < 1e-14);
        assert!(rel(dispersion(Snr::new(8.0).unwrap()), 1.850105760893873598106) < 1e-14);
        // Bounded above by (log2 e)^2, increasing.
        let mut prev = -1.0;
        for i in 0..60 {
            let s = 10f64.powf(-3.0 + 0.2 * i as f64);
            let v = dispersion(Snr::new(s).unwrap());
            assert!(v > prev && v < LOG2_E_SQ);
            prev = v;
        }
    }

    #[test]
    fn second_order_rate_reference_value() {
        let r = second_order_rate(
            1024,
            Snr::new(8.0).unwrap(),
            Probability::new(2e-6).unwrap(),
        )
        .unwrap();
        assert!(rel(r, 1.388951956924254520465) < 1e-13, "rate = {r}");
    }

    #[test]
    fn rate_at_half_eps_is_capacity_exactly() {
        let half = Probability::new(0.5).unwrap();
        for &(n, s) in &[(1u64, 0.3), (7, 8.0), (1024, 160.0), (3, 0.0)] {
            let snr = Snr::new(s).unwrap();
            assert_eq!(second_order_rate(n, snr, half).unwrap(), capacity(snr));
        }
    }

    #[test]
    fn rate_can_be_negative_and_is_not_clamped() {
        let r = second_order_rate(
            4,
            Snr::new(0.05).unwrap(),
            Probability::new(1e-9).unwrap(),
        )
        .unwrap();
        assert!(r < 0.0);
    }

    #[test]
    fn domain_validation() {
        assert!(Probability::new(0.0).is_err());
        assert!(Probability::new(1.0).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert!(Snr::new(-1e-9).is_err());
        assert!(Snr::new(f64::INFINITY).is_err());
        assert!(second_order_rate(0, Snr::new(1.0).unwrap(), Probability::new(0.1).unwrap())
            .is_err());
    }
}
