//! Desk-scale Monte-Carlo validation of the analytic error bounds.
//!
//! Codebooks are i.i.d. Gaussian with a power backoff: each codeword is
//! drawn N(0, power - delta) per symbol, and any codeword whose energy
//! still exceeds the hard limit n * power is remapped to the all-zero word
//! at the transmitter. The decoder keeps the original draw, so remapped
//! messages are decoded (and counted) like any other error event.
//!
//! Decoding follows the information-density threshold rule: candidate m is
//! accepted when i(x(m); y) > log2 M, and the decoder errs when zero or
//! several candidates pass, or the unique survivor is wrong. There is no
//! max-density fallback; the analytic bounds hold for exactly this rule.
//!
//! Determinism: every public operation is a pure function of its arguments
//! including the seed. Sub-generators are derived by splitmix64 from the
//! master seed, and each trial runs on its own counter-mode RNG stream, so
//! reports do not depend on thread scheduling.

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ed::{ChannelConfig, PowerConstraint};
use crate::math::{capacity, Snr, LOG2_E};
use crate::{Error, Result};

/// Per-solve operation ceiling shared with the grid optimizers.
const OP_GUARD: u128 = 10_000_000_000;

/// 95% two-sided normal quantile for Wilson intervals.
const WILSON_Z: f64 = 1.959963984540054;

/// splitmix64 of `seed + index * golden`, used to derive independent
/// sub-seeds (codebooks, trial streams) from one master seed.
fn splitmix64(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A fixed random code: `m` codewords of `n` real symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub m: usize,
    pub n: usize,
    /// Hard per-symbol power limit P; draws use variance P - delta.
    pub power: f64,
    pub delta: f64,
    pub seed: u64,
    /// Row-major m x n original draws; this is what the decoder tests
    /// against, remapped or not.
    symbols: Vec<f64>,
    remapped: Vec<bool>,
    pub remap_count: usize,
}

impl Codebook {
    /// Original draw for message `w`, as the decoder sees it.
    pub fn decoder_view(&self, w: usize) -> &[f64] {
        &self.symbols[w * self.n..(w + 1) * self.n]
    }

    pub fn is_remapped(&self, w: usize) -> bool {
        self.remapped[w]
    }

    /// Transmitted symbol j of message w: zero when the draw was remapped.
    #[inline]
    pub fn tx_symbol(&self, w: usize, j: usize) -> f64 {
        if self.remapped[w] {
            0.0
        } else {
            self.symbols[w * self.n + j]
        }
    }
}

/// Draws a reproducible i.i.d. N(0, power - delta) codebook and remaps the
/// codewords whose energy exceeds n * power to the all-zero word.
pub fn gen_codebook(m: usize, n: usize, power: f64, delta: f64, seed: u64) -> Result<Codebook> {
    if m < 2 {
        return Err(Error::InvalidConfig(format!(
            "a codebook needs at least 2 messages, got {m}"
        )));
    }
    if n < 1 {
        return Err(Error::InvalidConfig("blocklength must be >= 1".into()));
    }
    // delta = power is allowed and yields the all-zero codebook.
    if !(delta >= 0.0 && power >= delta && power > 0.0 && power.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "power backoff needs power >= delta >= 0, got power={power}, delta={delta}"
        )));
    }
    let sd = (power - delta).sqrt();
    let limit = n as f64 * power;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut symbols = Vec::with_capacity(m * n);
    let mut remapped = Vec::with_capacity(m);
    let mut remap_count = 0;
    for _ in 0..m {
        let mut energy = 0.0;
        for _ in 0..n {
            let x: f64 = StandardNormal.sample(&mut rng);
            let x = sd * x;
            energy += x * x;
            symbols.push(x);
        }
        let over = energy > limit;
        remapped.push(over);
        remap_count += usize::from(over);
    }
    Ok(Codebook {
        m,
        n,
        power,
        delta,
        seed,
        symbols,
        remapped,
        remap_count,
    })
}

/// Information density i(x; y) in bits for the scalar Gaussian channel
/// y = x + z, z ~ N(0, 1), with input variance `snr`:
///
/// ```text
/// sum_j [ C(snr) + (log2 e / 2) * ( y_j^2 / (1 + snr) - (y_j - x_j)^2 ) ]
/// ```
///
/// Inputs are normalized: `x` is the scaled codeword prefix with per-symbol
/// variance `snr`, `y` the received vector under unit noise.
pub fn info_density(x: &[f64], y: &[f64], snr: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidConfig(format!(
            "length mismatch: {} codeword vs {} received symbols",
            x.len(),
            y.len()
        )));
    }
    if !(snr >= 0.0 && snr.is_finite()) {
        return Err(Error::InvalidSnr { value: snr });
    }
    Ok(density_scaled(x, 1.0, y, snr))
}

/// Shared density kernel: candidate symbols `xs` are scaled by `sx` on the
/// fly so decode loops avoid per-candidate allocation.
#[inline]
fn density_scaled(xs: &[f64], sx: f64, ys: &[f64], snr: f64) -> f64 {
    let c = 0.5 * snr.ln_1p() * LOG2_E;
    let half_l = 0.5 * LOG2_E;
    let inv = 1.0 / (1.0 + snr);
    let mut total = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let d = y - sx * x;
        total += c + half_l * (y * y * inv - d * d);
    }
    total
}

/// Two-sided 95% Wilson score interval around an error count.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorEstimate {
    pub errors: u64,
    pub trials: u64,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ErrorEstimate {
    pub fn wilson(errors: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = errors as f64 / n;
        let zz = WILSON_Z * WILSON_Z;
        let denom = 1.0 + zz / n;
        let center = (p + zz / (2.0 * n)) / denom;
        let half = WILSON_Z * (p * (1.0 - p) / n + zz / (4.0 * n * n)).sqrt() / denom;
        Self {
            errors,
            trials,
            rate: p,
            lo: (center - half).max(0.0),
            hi: (center + half).min(1.0),
        }
    }

    /// Interval half-width; the bound comparisons allow a few of these.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// Moments of the per-symbol information density, sampled from fresh inputs
/// x ~ N(0, p1_bar) rather than the fixed codebook, so the estimate targets
/// the code-ensemble statistics the analytic formulas describe.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DensityStats {
    pub samples: u64,
    pub mean: f64,
    pub var: f64,
    /// Standard error of the mean estimate.
    pub se_mean: f64,
    /// Standard error of the variance estimate (via the fourth moment).
    pub se_var: f64,
}

impl DensityStats {
    fn from_sums(n: u64, s1: f64, s2: f64, s3: f64, s4: f64) -> Self {
        let nf = n as f64;
        let mean = s1 / nf;
        let m2 = s2 / nf - mean * mean;
        let m4 = s4 / nf - 4.0 * mean * s3 / nf + 6.0 * mean * mean * s2 / nf
            - 3.0 * mean * mean * mean * mean;
        Self {
            samples: n,
            mean,
            var: m2,
            se_mean: (m2 / nf).sqrt(),
            se_var: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
        }
    }
}

/// Outcome of a batch of early-decoding SIC trials.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrialReport {
    pub trials: u64,
    /// Early decoding of the weak codeword at the strong user (SIC step 1).
    pub step1: ErrorEstimate,
    /// Strong user's own message after cancellation (SIC step 2). Counted
    /// as an error whenever step 1 produced no unique candidate, since the
    /// chain then has nothing to cancel.
    pub step2: ErrorEstimate,
    /// Weak user decoding its own message over the two-segment channel.
    pub weak: ErrorEstimate,
    /// Per-symbol density moments from fresh step-1-channel samples.
    pub density: DensityStats,
    pub remapped1: usize,
    pub remapped2: usize,
}

struct TrialPartial {
    e1: u64,
    e2: u64,
    ew: u64,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
}

/// Simulates the full ED/SIC chain of one configuration.
///
/// Per trial: draw both messages uniformly, superpose the transmitted
/// codewords (the strong user's codeword occupies the first n2 symbols),
/// add unit noise per receiver, then
///
/// 1. the strong user threshold-decodes the weak codeword from the first
///    `n2_used` symbols at the step-1 SNR gamma = g2 * p1_bar,
/// 2. subtracts its decoded codeword (decoder view) and threshold-decodes
///    its own message over n2 symbols at SNR h2 * p2_bar,
/// 3. the weak user threshold-decodes its message over all n1 symbols with
///    the two-segment density (interference present only in the overlap).
///
/// `delta1`/`delta2` are the codebook power backoffs; the channel config
/// must carry individual powers. The report also accumulates per-symbol
/// density moments (`n2_used` fresh samples per trial).
#[allow(clippy::too_many_arguments)]
pub fn simulate_ed(
    cfg: &ChannelConfig,
    delta1: f64,
    delta2: f64,
    m1: usize,
    m2: usize,
    n2_used: u64,
    trials: u64,
    seed: u64,
) -> Result<TrialReport> {
    cfg.validate()?;
    let PowerConstraint::Individual { p1, p2 } = cfg.power else {
        return Err(Error::InvalidConfig(
            "simulation needs individual per-user powers".into(),
        ));
    };
    if n2_used < 1 || n2_used > cfg.n2 {
        return Err(Error::InvalidConfig(format!(
            "n2_used must lie in [1, n2={}], got {n2_used}",
            cfg.n2
        )));
    }
    if trials < 1 {
        return Err(Error::InvalidConfig("trials must be >= 1".into()));
    }
    // Every decode loop stays below the desk-scale guard individually:
    // step 1, step 2, and the weak user's full-frame decode.
    let t = trials as u128;
    for ops in [
        m1 as u128 * n2_used as u128 * t,
        m2 as u128 * cfg.n2 as u128 * t,
        m1 as u128 * cfg.n1 as u128 * t,
    ] {
        if ops > OP_GUARD {
            return Err(Error::GuardExceeded { ops, limit: OP_GUARD });
        }
    }

    let cb1 = gen_codebook(m1, cfg.n1 as usize, p1, delta1, splitmix64(seed, 1))?;
    let cb2 = gen_codebook(m2, cfg.n2 as usize, p2, delta2, splitmix64(seed, 2))?;
    let trial_seed = splitmix64(seed, 3);

    let n1 = cfg.n1 as usize;
    let n2 = cfg.n2 as usize;
    let nu = n2_used as usize;
    let p1_bar = p1 - delta1;
    let p2_bar = p2 - delta2;
    let (h1, h2) = (cfg.h1, cfg.h2);
    // Step-1 normalization: y / sqrt(1 + h2 p2_bar) has unit noise and sees
    // the weak codeword through sqrt(g2).
    let g2 = h2 / (1.0 + h2 * p2_bar);
    let gamma = g2 * p1_bar;
    let snr2 = h2 * p2_bar;
    let g1 = h1 / (1.0 + h1 * p2_bar);
    let snr_overlap = g1 * p1_bar;
    let snr_tail = h1 * p1_bar;
    let t1 = (m1 as f64).log2();
    let t2 = (m2 as f64).log2();
    let scale2 = 1.0 / (1.0 + h2 * p2_bar).sqrt();
    let scale1 = 1.0 / (1.0 + h1 * p2_bar).sqrt();
    let (sqrt_h1, sqrt_h2) = (h1.sqrt(), h2.sqrt());
    let (sqrt_g1, sqrt_g2) = (g1.sqrt(), g2.sqrt());
    let sd1 = p1_bar.sqrt();
    let c_gamma = capacity(Snr::new(gamma)?);
    let half_l = 0.5 * LOG2_E;
    let inv_gamma = 1.0 / (1.0 + gamma);

    let partials: Vec<TrialPartial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            rng.set_stream(t);
            let w1 = rng.gen_range(0..m1);
            let w2 = rng.gen_range(0..m2);

            // Strong user's observation over its n2 symbols.
            let mut y2 = vec![0.0f64; n2];
            for (j, y) in y2.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *y = sqrt_h2 * (cb1.tx_symbol(w1, j) + cb2.tx_symbol(w2, j)) + z;
            }
            // Weak user's observation over the full frame.
            let mut y1 = vec![0.0f64; n1];
            for (j, y) in y1.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                let x2 = if j < n2 { cb2.tx_symbol(w2, j) } else { 0.0 };
                *y = sqrt_h1 * (cb1.tx_symbol(w1, j) + x2) + z;
            }

            // Step 1: early decode of the weak codeword from n2_used symbols.
            let yt: Vec<f64> = y2[..nu].iter().map(|&y| scale2 * y).collect();
            let mut hit = None;
            let mut hits = 0;
            for w in 0..m1 {
                let d = density_scaled(&cb1.decoder_view(w)[..nu], sqrt_g2, &yt, gamma);
                if d > t1 {
                    hits += 1;
                    hit = Some(w);
                }
            }
            let e1 = u64::from(!(hits == 1 && hit == Some(w1)));

            // Step 2: cancel the decoded codeword, decode the own message.
            let e2 = if hits == 1 {
                let wd = hit.unwrap();
                let xd = cb1.decoder_view(wd);
                let resid: Vec<f64> = (0..n2).map(|j| y2[j] - sqrt_h2 * xd[j]).collect();
                let mut hit2 = None;
                let mut hits2 = 0;
                for w in 0..m2 {
                    let d = density_scaled(cb2.decoder_view(w), sqrt_h2, &resid, snr2);
                    if d > t2 {
                        hits2 += 1;
                        hit2 = Some(w);
                    }
                }
                u64::from(!(hits2 == 1 && hit2 == Some(w2)))
            } else {
                1
            };

            // Weak user: two-segment density over n1 symbols.
            let yt1: Vec<f64> = y1[..n2].iter().map(|&y| scale1 * y).collect();
            let mut hitw = None;
            let mut hitsw = 0;
            for w in 0..m1 {
                let xw = cb1.decoder_view(w);
                let d = density_scaled(&xw[..n2], sqrt_g1, &yt1, snr_overlap)
                    + density_scaled(&xw[n2..], sqrt_h1, &y1[n2..], snr_tail);
                if d > t1 {
                    hitsw += 1;
                    hitw = Some(w);
                }
            }
            let ew = u64::from(!(hitsw == 1 && hitw == Some(w1)));

            // Fresh-input density samples on the step-1 channel.
            let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..nu {
                let x: f64 = StandardNormal.sample(&mut rng);
                let z: f64 = StandardNormal.sample(&mut rng);
                let xt = sqrt_g2 * sd1 * x;
                let yt = xt + z;
                let w = c_gamma + half_l * (yt * yt * inv_gamma - z * z);
                s1 += w;
                s2 += w * w;
                s3 += w * w * w;
                s4 += w * w * w * w;
            }
            TrialPartial { e1, e2, ew, s1, s2, s3, s4 }
        })
        .collect();

    // Sequential fold over the trial-ordered partials keeps float sums
    // independent of the parallel schedule.
    let mut acc = TrialPartial { e1: 0, e2: 0, ew: 0, s1: 0.0, s2: 0.0, s3: 0.0, s4: 0.0 };
    for p in &partials {
        acc.e1 += p.e1;
        acc.e2 += p.e2;
        acc.ew += p.ew;
        acc.s1 += p.s1;
        acc.s2 += p.s2;
        acc.s3 += p.s3;
        acc.s4 += p.s4;
    }
    let samples = trials * n2_used;
    Ok(TrialReport {
        trials,
        step1: ErrorEstimate::wilson(acc.e1, trials),
        step2: ErrorEstimate::wilson(acc.e2, trials),
        weak: ErrorEstimate::wilson(acc.ew, trials),
        density: DensityStats::from_sums(samples, acc.s1, acc.s2, acc.s3, acc.s4),
        remapped1: cb1.remap_count,
        remapped2: cb2.remap_count,
    })
}

/// Empirical probability of the sum-power cross-term event
/// `sum_j X1_j X2_j >= n2 * delta` with X1 ~ N(0, p11_bar), X2 ~ N(0, p2_bar)
/// independent per symbol. Compare against [`crate::region::cross_term_tail`].
pub fn simulate_cross_term(
    n2: u64,
    p11_bar: f64,
    p2_bar: f64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<ErrorEstimate> {
    if n2 < 1 {
        return Err(Error::InvalidConfig("blocklength must be >= 1".into()));
    }
    for (label, v) in [("p11_bar", p11_bar), ("p2_bar", p2_bar)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "{label} must be positive, got {v}"
            )));
        }
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "threshold must be >= 0, got {delta}"
        )));
    }
    if trials < 10_000 {
        return Err(Error::InvalidConfig(format!(
            "need >= 10000 trials for a usable tail estimate, got {trials}"
        )));
    }
    let ops = n2 as u128 * trials as u128;
    if ops > OP_GUARD {
        return Err(Error::GuardExceeded { ops, limit: OP_GUARD });
    }
    let trial_seed = splitmix64(seed, 1);
    let (sd1, sd2) = (p11_bar.sqrt(), p2_bar.sqrt());
    let threshold = n2 as f64 * delta;
    let violations: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            rng.set_stream(t);
            let mut sum = 0.0;
            for _ in 0..n2 {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                sum += (sd1 * a) * (sd2 * b);
            }
            u64::from(sum >= threshold)
        })
        .sum();
    Ok(ErrorEstimate::wilson(violations, trials))
}
