//! Deterministic grid-search solvers for the weighted sum-rate problems.
//!
//! Four problems are covered, named by scheme and power constraint: the
//! HNOMA problems P1^IPC / P1^SPC and the early-decoding problems
//! P2^IPC / P2^SPC. All maximize `omega * r1 + (1-omega) * r2` over a grid
//! of error splits (and, under SPC, power allocations):
//!
//! * Error splits: every free epsilon ranges over `{step, 2*step, ...}` up
//!   to the system target, with the last variable solved from the equality
//!   form of the budget identity. Combinations whose dependent variable
//!   leaves (0, 1) are skipped. For ED the free pair is
//!   (eps_sic1, eps_sic2) and eps1 is dependent; for HNOMA the free triple
//!   is (eps_h11, eps_h12, eps_sic1) and eps_sic2 is dependent.
//! * Power allocations: the fractions of the usable budget put on
//!   (P2, P11, P12) range over a uniform simplex grid with `power_grid`
//!   levels per axis; the backoff is taken off the budget before
//!   discretization so every nominal power stays inside the sum constraint.
//! * ED feasibility: a candidate is admitted only if the weak codeword, at
//!   the candidate's own weak-user rate, is early-decodable within n2 per
//!   [`crate::ed::ed_min_symbols`]. This binds even when the rate clamps to
//!   zero: the dispersion part of the symbol bound must fit on its own.
//!
//! Results are deterministic regardless of parallel scheduling: candidates
//! are reduced by largest objective with ties broken by the smallest grid
//! key, where the key orders error splits lexicographically in the free
//! variables and then allocation indices lexicographically in the
//! (P2, P11, P12) fractions.

use std::time::Instant;

use rayon::prelude::*;

use crate::ed::{ed_n_tilde_raw, ChannelConfig, PowerConstraint};
use crate::math::q_inverse_raw;
use crate::region::{
    ed_region_ipc, ed_region_spc, hnoma_composite, hnoma_r1, snr_set_ipc, snr_set_spc,
    ErrorBudget, PowerAllocation, RateCoef, RatePoint, Scheme, SnrSet,
};
use crate::{Error, Result};

/// Worst-case number of grid evaluations a single solve may perform.
const EVAL_GUARD: u128 = 10_000_000_000;

/// Which power constraint a solve runs under. Must agree with the
/// [`PowerConstraint`] variant carried by the channel config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    Ipc,
    Spc,
}

/// Full description of one weighted-sum-rate solve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveSpec {
    pub cfg: ChannelConfig,
    /// Weight on the weak user's rate, in [0, 1].
    pub omega: f64,
    /// Ed solves the early-decoding problem, Hnoma the hybrid split. Tin has
    /// no weighted-sum problem and is rejected.
    pub scheme: Scheme,
    pub power_mode: PowerMode,
    /// Error-split grid step; defaults to eps/100.
    pub eps_step: Option<f64>,
    /// Simplex levels per power axis (SPC only); defaults to 32, minimum 2.
    pub power_grid: Option<u32>,
    /// Power backoff; defaults to 0.
    pub backoff_delta: Option<f64>,
}

impl SolveSpec {
    pub fn new(cfg: ChannelConfig, omega: f64, scheme: Scheme, power_mode: PowerMode) -> Result<Self> {
        let spec = Self {
            cfg,
            omega,
            scheme,
            power_mode,
            eps_step: None,
            power_grid: None,
            backoff_delta: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if !(self.omega >= 0.0 && self.omega <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "weight must lie in [0,1], got {}",
                self.omega
            )));
        }
        if self.scheme == Scheme::Tin {
            return Err(Error::InvalidConfig(
                "no weighted-sum problem is defined for the TIN baseline".into(),
            ));
        }
        let mode_matches = matches!(
            (self.power_mode, self.cfg.power),
            (PowerMode::Ipc, PowerConstraint::Individual { .. })
                | (PowerMode::Spc, PowerConstraint::Sum { .. })
        );
        if !mode_matches {
            return Err(Error::InvalidConfig(
                "power mode disagrees with the channel config's power constraint".into(),
            ));
        }
        if let Some(step) = self.eps_step {
            if !(step > 0.0 && step < self.cfg.eps) {
                return Err(Error::InvalidConfig(format!(
                    "eps_step must lie in (0, eps), got {step}"
                )));
            }
        }
        if let Some(g) = self.power_grid {
            if g < 2 {
                return Err(Error::InvalidConfig(
                    "power_grid needs at least 2 levels; pass explicit allocations for \
                     degenerate grids"
                        .into(),
                ));
            }
        }
        if let Some(d) = self.backoff_delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "backoff must be finite and >= 0, got {d}"
                )));
            }
        }
        Ok(())
    }

    pub fn eps_step(&self) -> f64 {
        self.eps_step.unwrap_or(self.cfg.eps / 100.0)
    }

    pub fn power_grid(&self) -> u32 {
        self.power_grid.unwrap_or(32)
    }

    pub fn backoff(&self) -> f64 {
        self.backoff_delta.unwrap_or(0.0)
    }

    fn with_n2(&self, n2: u64) -> Result<Self> {
        let mut spec = *self;
        spec.cfg.n2 = n2;
        spec.validate()?;
        Ok(spec)
    }

    fn with_omega(&self, omega: f64) -> Self {
        let mut spec = *self;
        spec.omega = omega;
        spec
    }
}

/// Outcome class of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// A feasible grid point with a positive objective was found.
    Feasible,
    /// Feasible grid points exist but the best objective is exactly zero
    /// (every admissible rate clamps to zero under this weight).
    ZeroRate,
    /// No grid point satisfies the constraints; the objective reports 0.
    Infeasible,
}

/// Result of one weighted-sum-rate solve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: f64,
    pub point: Option<RatePoint>,
    pub budget: Option<ErrorBudget>,
    /// Chosen power split; None for IPC solves.
    pub alloc: Option<PowerAllocation>,
}

impl Solution {
    fn infeasible() -> Self {
        Self {
            status: SolveStatus::Infeasible,
            objective: 0.0,
            point: None,
            budget: None,
            alloc: None,
        }
    }
}

/// One row of a parameter sweep: the swept values plus the solve outcome.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub n2: u64,
    pub omega: f64,
    pub solution: Solution,
}

/// Reproducibility metadata attached to every sweep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepMeta {
    pub scheme: Scheme,
    pub power_mode: PowerMode,
    pub eps_step: f64,
    pub power_grid: Option<u32>,
    pub backoff_delta: f64,
    /// Error-split combinations per solve (budget-feasible count).
    pub grid_combos: usize,
    /// Power allocations per solve; 1 under IPC.
    pub grid_allocs: usize,
    /// Rows removed because no grid point was feasible.
    pub dropped_infeasible: usize,
    /// Rows removed by the Pareto filter (region traces only).
    pub dropped_dominated: usize,
    pub wall_clock_ms: u64,
}

/// A swept set of solves plus metadata.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub meta: SweepMeta,
}

// ---------------------------------------------------------------------------
// Grid construction
// ---------------------------------------------------------------------------

/// Interior grid points per free epsilon axis. Checked before any grid is
/// materialized so the evaluation guard can run on worst-case counts first.
fn axis_len(eps: f64, step: f64) -> Result<u128> {
    let intervals = (eps / step).round();
    if !(intervals >= 2.0) {
        return Err(Error::InvalidConfig(format!(
            "eps_step {step} leaves no interior grid point below eps {eps}"
        )));
    }
    Ok(intervals as u128 - 1)
}

/// Free-variable grid {step, 2*step, ...} strictly inside (0, eps), with the
/// matching Q-inverse values.
fn eps_grid(eps: f64, step: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = axis_len(eps, step)? as usize;
    let vals: Vec<f64> = (1..=m).map(|i| i as f64 * step).collect();
    let qinv: Vec<f64> = vals.iter().map(|&e| q_inverse_raw(e)).collect();
    Ok((vals, qinv))
}

/// ED error grid: free (eps_sic1, eps_sic2), dependent
/// eps1 = eps - eps_sic1 - eps_sic2 + eps_sic1*eps_sic2 (equality form of
/// the union-bound budget), kept when eps1 > 0.
struct EdGrid {
    vals: Vec<f64>,
    qinv: Vec<f64>,
    combos: Vec<EdCombo>,
}

#[derive(Clone, Copy)]
struct EdCombo {
    i_sic1: u32,
    i_sic2: u32,
    q_eps1: f64,
}

impl EdGrid {
    fn build(eps: f64, step: f64) -> Result<Self> {
        let (vals, qinv) = eps_grid(eps, step)?;
        let mut combos = Vec::new();
        for (i, &es1) in vals.iter().enumerate() {
            for (j, &es2) in vals.iter().enumerate() {
                let eps1 = eps - es1 - es2 + es1 * es2;
                if eps1 > 0.0 {
                    combos.push(EdCombo {
                        i_sic1: i as u32,
                        i_sic2: j as u32,
                        q_eps1: q_inverse_raw(eps1),
                    });
                }
            }
        }
        Ok(Self { vals, qinv, combos })
    }

    fn eps1_of(&self, c: &EdCombo, eps: f64) -> f64 {
        let es1 = self.vals[c.i_sic1 as usize];
        let es2 = self.vals[c.i_sic2 as usize];
        eps - es1 - es2 + es1 * es2
    }
}

/// HNOMA error grid: free (eps_h11, eps_h12, eps_sic1), dependent
/// eps_sic2 = 1 - (2 - eps - (1-eps_h11)(1-eps_h12)) / (1-eps_sic1), kept
/// when eps_sic2 > 0 (it is < 1 automatically).
struct HnomaGrid {
    vals: Vec<f64>,
    qinv: Vec<f64>,
    combos: Vec<HnomaCombo>,
}

#[derive(Clone, Copy)]
struct HnomaCombo {
    i_h11: u32,
    i_h12: u32,
    i_sic1: u32,
    q_sic2: f64,
}

impl HnomaGrid {
    fn build(eps: f64, step: f64) -> Result<Self> {
        let (vals, qinv) = eps_grid(eps, step)?;
        let mut combos = Vec::new();
        for (i, &eh11) in vals.iter().enumerate() {
            let weak_a = 1.0 - eh11;
            for (j, &eh12) in vals.iter().enumerate() {
                let base = weak_a * (1.0 - eh12);
                for (k, &es1) in vals.iter().enumerate() {
                    let es2 = 1.0 - (2.0 - eps - base) / (1.0 - es1);
                    if es2 > 0.0 {
                        combos.push(HnomaCombo {
                            i_h11: i as u32,
                            i_h12: j as u32,
                            i_sic1: k as u32,
                            q_sic2: q_inverse_raw(es2),
                        });
                    } else {
                        // es2 shrinks as eps_sic1 grows; no later k can pass.
                        break;
                    }
                }
            }
        }
        Ok(Self { vals, qinv, combos })
    }

    fn eps_sic2_of(&self, c: &HnomaCombo, eps: f64) -> f64 {
        let base = (1.0 - self.vals[c.i_h11 as usize]) * (1.0 - self.vals[c.i_h12 as usize]);
        1.0 - (2.0 - eps - base) / (1.0 - self.vals[c.i_sic1 as usize])
    }
}

/// Uniform simplex of backed-off power splits. Fraction tuples
/// (f2, f11, f12) = (i, j, k)/(grid-1) with i+j+k <= grid-1 are scaled onto
/// the usable budget B = P_T - (1+p)*delta, so that restoring the backoff on
/// each segment keeps the nominal sum power within P_T. When n1 = n2 the
/// tail segment does not exist and its axis is pinned to zero.
fn build_allocs(
    p_total: f64,
    p: f64,
    has_tail: bool,
    grid: u32,
    delta: f64,
) -> Result<Vec<PowerAllocation>> {
    let budget = p_total - (1.0 + p) * delta;
    if !(budget > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "backoff {delta} consumes the whole power budget {p_total}"
        )));
    }
    let g = grid as usize;
    let denom = (g - 1) as f64;
    let mut out = Vec::new();
    for i in 0..g {
        let p2_bar = i as f64 / denom * budget / p;
        for j in 0..g - i {
            let p11_bar = j as f64 / denom * budget / p;
            for k in 0..g - i - j {
                let p12_bar = if has_tail {
                    k as f64 / denom * budget / (1.0 - p)
                } else if k > 0 {
                    continue;
                } else {
                    0.0
                };
                out.push(PowerAllocation { p11_bar, p12_bar, p2_bar, delta });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Deterministic reduction
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
struct Candidate {
    obj: f64,
    key: u64,
}

const NO_CANDIDATE: Candidate = Candidate { obj: f64::NEG_INFINITY, key: u64::MAX };

/// Total order: larger objective wins, ties go to the smaller key. The
/// operation is associative and commutative, so any parallel reduction tree
/// yields the same winner.
#[inline]
fn better(a: Candidate, b: Candidate) -> Candidate {
    match a.obj.total_cmp(&b.obj) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.key <= b.key {
                a
            } else {
                b
            }
        }
    }
}

fn guard_evals(combos: u128, allocs: u128) -> Result<()> {
    let ops = combos.saturating_mul(allocs);
    if ops > EVAL_GUARD {
        Err(Error::GuardExceeded { ops, limit: EVAL_GUARD })
    } else {
        Ok(())
    }
}

/// Simplex size for `grid` levels per axis: triples (tail available) or
/// pairs (n1 = n2) of fraction indices summing to at most grid - 1.
fn simplex_count(grid: u32, has_tail: bool) -> u128 {
    let g = grid as u128;
    if has_tail {
        g * (g + 1) * (g + 2) / 6
    } else {
        g * (g + 1) / 2
    }
}

// ---------------------------------------------------------------------------
// ED solves (P2)
// ---------------------------------------------------------------------------

/// ED evaluation context for one SNR environment (IPC, or one SPC split).
struct EdCtx {
    weak: RateCoef,
    strong: RateCoef,
    gamma: f64,
}

impl EdCtx {
    fn new(cfg: &ChannelConfig, snrs: &SnrSet) -> Self {
        Self {
            weak: RateCoef::of_mixture(
                cfg.blocklength_ratio(),
                snrs.snr11,
                snrs.snr12,
                cfg.n1 as f64,
            ),
            strong: RateCoef::of(cfg.n2 as f64, snrs.snr22),
            gamma: snrs.snr21,
        }
    }

    /// Objective of one budget combo, or None if early decoding fails. The
    /// arithmetic mirrors [`ed_region_ipc`] exactly so rebuilt solutions
    /// reproduce the winning objective bit for bit.
    #[inline]
    fn eval(&self, grid: &EdGrid, c: &EdCombo, cfg: &ChannelConfig, omega: f64, om1: f64) -> Option<f64> {
        let n1f = cfg.n1 as f64;
        let r1 = self.weak.eval(c.q_eps1).max(0.0);
        let n_tilde = ed_n_tilde_raw(n1f * r1, n1f, self.gamma, grid.qinv[c.i_sic1 as usize]);
        if n_tilde.ceil().max(0.0) as u64 > cfg.n2 {
            return None;
        }
        let r2 = self.strong.eval(grid.qinv[c.i_sic2 as usize]).max(0.0);
        Some(omega * r1 + om1 * r2)
    }
}

/// Weighted sum-rate of the early-decoding scheme under individual power
/// constraints (problem P2^IPC).
pub fn solve_p2_ipc(spec: &SolveSpec) -> Result<Solution> {
    spec.validate()?;
    require(spec, Scheme::Ed, PowerMode::Ipc)?;
    let m = axis_len(spec.cfg.eps, spec.eps_step())?;
    guard_evals(m * m, 1)?;
    let grid = EdGrid::build(spec.cfg.eps, spec.eps_step())?;
    let snrs = snr_set_ipc(&spec.cfg, spec.backoff())?;
    let ctx = EdCtx::new(&spec.cfg, &snrs);
    if !(ctx.gamma > 0.0) {
        return Ok(Solution::infeasible());
    }
    let (omega, om1) = (spec.omega, 1.0 - spec.omega);
    let cfg = spec.cfg;
    let best = grid
        .combos
        .par_iter()
        .enumerate()
        .map(|(idx, c)| match ctx.eval(&grid, c, &cfg, omega, om1) {
            Some(obj) => Candidate { obj, key: idx as u64 },
            None => NO_CANDIDATE,
        })
        .reduce(|| NO_CANDIDATE, better);
    rebuild_ed(spec, &grid, best, 1, None)
}

/// Weighted sum-rate of the early-decoding scheme under a sum power
/// constraint (problem P2^SPC) on the default simplex allocation grid.
pub fn solve_p2_spc(spec: &SolveSpec) -> Result<Solution> {
    spec.validate()?;
    require(spec, Scheme::Ed, PowerMode::Spc)?;
    let m = axis_len(spec.cfg.eps, spec.eps_step())?;
    let n_allocs = simplex_count(spec.power_grid(), spec.cfg.n1 > spec.cfg.n2);
    guard_evals(m * m, n_allocs)?;
    let allocs = spc_allocs(spec)?;
    solve_p2_spc_with_allocs(spec, &allocs)
}

/// P2^SPC over an explicit allocation list (entries are backed-off powers).
/// Power-infeasible entries are skipped as infeasible candidates.
pub fn solve_p2_spc_with_allocs(spec: &SolveSpec, allocs: &[PowerAllocation]) -> Result<Solution> {
    spec.validate()?;
    require(spec, Scheme::Ed, PowerMode::Spc)?;
    let PowerConstraint::Sum { p_total } = spec.cfg.power else {
        return Err(Error::InvalidConfig("sum power constraint required".into()));
    };
    for a in allocs {
        a.validate()?;
    }
    let m = axis_len(spec.cfg.eps, spec.eps_step())?;
    guard_evals(m * m, allocs.len() as u128)?;
    let grid = EdGrid::build(spec.cfg.eps, spec.eps_step())?;
    let p = spec.cfg.blocklength_ratio();
    let cfg = spec.cfg;
    let ctxs: Vec<Option<EdCtx>> = allocs
        .iter()
        .map(|a| {
            if !a.spc_feasible(p, p_total) {
                return Ok(None);
            }
            let snrs = snr_set_spc(&cfg, a)?;
            Ok(Some(EdCtx::new(&cfg, &snrs)))
        })
        .collect::<Result<_>>()?;
    let (omega, om1) = (spec.omega, 1.0 - spec.omega);
    let n_allocs = allocs.len() as u64;
    let best = ctxs
        .par_iter()
        .enumerate()
        .map(|(ai, ctx)| {
            let Some(ctx) = ctx else { return NO_CANDIDATE };
            if !(ctx.gamma > 0.0) {
                return NO_CANDIDATE;
            }
            let mut local = NO_CANDIDATE;
            for (ci, c) in grid.combos.iter().enumerate() {
                if let Some(obj) = ctx.eval(&grid, c, &cfg, omega, om1) {
                    let cand = Candidate { obj, key: ci as u64 * n_allocs + ai as u64 };
                    local = better(local, cand);
                }
            }
            local
        })
        .reduce(|| NO_CANDIDATE, better);
    rebuild_ed(spec, &grid, best, n_allocs, Some(allocs))
}

/// Decode the winning key back into budget/allocation and recompute the rate
/// point through the public region functions.
fn rebuild_ed(
    spec: &SolveSpec,
    grid: &EdGrid,
    best: Candidate,
    n_allocs: u64,
    allocs: Option<&[PowerAllocation]>,
) -> Result<Solution> {
    if best.obj < 0.0 {
        return Ok(Solution::infeasible());
    }
    let combo = &grid.combos[(best.key / n_allocs) as usize];
    let budget = ErrorBudget::ed(
        grid.eps1_of(combo, spec.cfg.eps),
        grid.vals[combo.i_sic1 as usize],
        grid.vals[combo.i_sic2 as usize],
    )?;
    let (out, alloc) = match allocs {
        None => (ed_region_ipc(&spec.cfg, &budget, spec.backoff())?, None),
        Some(allocs) => {
            let alloc = allocs[(best.key % n_allocs) as usize];
            (ed_region_spc(&spec.cfg, &budget, &alloc)?, Some(alloc))
        }
    };
    debug_assert!(out.feasible);
    let objective = out.point.objective(spec.omega);
    debug_assert_eq!(objective, best.obj);
    Ok(Solution {
        status: if objective > 0.0 { SolveStatus::Feasible } else { SolveStatus::ZeroRate },
        objective,
        point: Some(out.point),
        budget: Some(budget),
        alloc,
    })
}

// ---------------------------------------------------------------------------
// HNOMA solves (P1)
// ---------------------------------------------------------------------------

struct HnomaCtx {
    overlap_weak: RateCoef,
    overlap_strong: RateCoef,
    tail: RateCoef,
    strong: RateCoef,
}

impl HnomaCtx {
    fn new(cfg: &ChannelConfig, snrs: &SnrSet) -> Self {
        let n2f = cfg.n2 as f64;
        // With n1 = n2 the tail coefficient is never evaluated; a dummy
        // blocklength of 1 keeps the constructor total.
        let tail_n = if cfg.n1 > cfg.n2 { (cfg.n1 - cfg.n2) as f64 } else { 1.0 };
        Self {
            overlap_weak: RateCoef::of(n2f, snrs.snr11),
            overlap_strong: RateCoef::of(n2f, snrs.snr21),
            tail: RateCoef::of(tail_n, snrs.snr12),
            strong: RateCoef::of(n2f, snrs.snr22),
        }
    }

    /// Mirrors [`hnoma_r1`] plus the strong user's rate; every HNOMA combo
    /// is feasible by construction so this always yields an objective.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn eval(
        &self,
        grid: &HnomaGrid,
        c: &HnomaCombo,
        p: f64,
        pm1: f64,
        has_tail: bool,
        omega: f64,
        om1: f64,
    ) -> f64 {
        let r11 = self.overlap_weak.eval(grid.qinv[c.i_h11 as usize]);
        let r21 = self.overlap_strong.eval(grid.qinv[c.i_sic1 as usize]);
        let tail = if has_tail {
            pm1 * self.tail.eval(grid.qinv[c.i_h12 as usize])
        } else {
            0.0
        };
        let r1 = hnoma_composite(p, r11, r21, tail).max(0.0);
        let r2 = self.strong.eval(c.q_sic2).max(0.0);
        omega * r1 + om1 * r2
    }
}

/// Weighted sum-rate of the hybrid-split scheme under individual power
/// constraints (problem P1^IPC).
pub fn solve_p1_ipc(spec: &SolveSpec) -> Result<Solution> {
    spec.validate()?;
    require(spec, Scheme::Hnoma, PowerMode::Ipc)?;
    let m = axis_len(spec.cfg.eps, spec.eps_step())?;
    guard_evals(m * m * m, 1)?;
    let grid = HnomaGrid::build(spec.cfg.eps, spec.eps_step())?;
    let snrs = snr_set_ipc(&spec.cfg, spec.backoff())?;
    let ctx = HnomaCtx::new(&spec.cfg, &snrs);
    let p = spec.cfg.blocklength_ratio();
    let pm1 = 1.0 - p;
    let has_tail = spec.cfg.n1 > spec.cfg.n2;
    let (omega, om1) = (spec.omega, 1.0 - spec.omega);
    let best = grid
        .combos
        .par_iter()
        .enumerate()
        .map(|(idx, c)| Candidate {
            obj: ctx.eval(&grid, c, p, pm1, has_tail, omega, om1),
            key: idx as u64,
        })
        .reduce(|| NO_CANDIDATE, better);
    rebuild_hnoma(spec, &grid, best, 1, None)
}

/// Weighted sum-rate of the hybrid-split scheme under a sum power constraint
/// (problem P1^SPC) on the default simplex allocation grid.
pub fn solve_p1_spc(spec: &SolveSpec) -> Result<Solution> {
    spec.validate()?;
    require(spec, Scheme::Hnoma, PowerMode::Spc)?;
    let m = axis_len(spec.cfg.eps, spec.eps_step())?;
    let n_allocs = simplex_count(spec.power_grid(), spec.cfg.n1 > spec.cfg.n2);
    guard_evals(m * m * m, n_allocs)?;
    let allocs = spc_allocs(spec)?;
    solve_p1_spc_with_allocs(spec, &allocs)
}

/// P1^SPC over an explicit allocation list; power-infeasible entries are
/// skipped as infeasible candidates.
pub fn solve_p1_spc_with_allocs(spec: &SolveSpec, allocs: &[PowerAllocation]) -> Result<Solution> {
    spec.validate()?;
    require(spec, Scheme::Hnoma, PowerMode::Spc)?;
    let PowerConstraint::Sum { p_total } = spec.cfg.power else {
        return Err(Error::InvalidConfig("sum power constraint required".into()));
    };
    for a in allocs {
        a.validate()?;
    }
    let m = axis_len(spec.cfg.eps, spec.eps_step())?;
    guard_evals(m * m * m, allocs.len() as u128)?;
    let grid = HnomaGrid::build(spec.cfg.eps, spec.eps_step())?;
    let cfg = spec.cfg;
    let p = cfg.blocklength_ratio();
    let ctxs: Vec<Option<HnomaCtx>> = allocs
        .iter()
        .map(|a| {
            if !a.spc_feasible(p, p_total) {
                return Ok(None);
            }
            let snrs = snr_set_spc(&cfg, a)?;
            Ok(Some(HnomaCtx::new(&cfg, &snrs)))
        })
        .collect::<Result<_>>()?;
    let pm1 = 1.0 - p;
    let has_tail = cfg.n1 > cfg.n2;
    let (omega, om1) = (spec.omega, 1.0 - spec.omega);
    let n_allocs = allocs.len() as u64;
    let best = ctxs
        .par_iter()
        .enumerate()
        .map(|(ai, ctx)| {
            let Some(ctx) = ctx else { return NO_CANDIDATE };
            let mut local = NO_CANDIDATE;
            for (ci, c) in grid.combos.iter().enumerate() {
                let obj = ctx.eval(&grid, c, p, pm1, has_tail, omega, om1);
                let cand = Candidate { obj, key: ci as u64 * n_allocs + ai as u64 };
                local = better(local, cand);
            }
            local
        })
        .reduce(|| NO_CANDIDATE, better);
    rebuild_hnoma(spec, &grid, best, n_allocs, Some(allocs))
}

fn rebuild_hnoma(
    spec: &SolveSpec,
    grid: &HnomaGrid,
    best: Candidate,
    n_allocs: u64,
    allocs: Option<&[PowerAllocation]>,
) -> Result<Solution> {
    if best.obj < 0.0 {
        return Ok(Solution::infeasible());
    }
    let combo = &grid.combos[(best.key / n_allocs) as usize];
    let eps_h11 = grid.vals[combo.i_h11 as usize];
    let eps_h12 = grid.vals[combo.i_h12 as usize];
    let eps_sic1 = grid.vals[combo.i_sic1 as usize];
    let eps_sic2 = grid.eps_sic2_of(combo, spec.cfg.eps);
    let budget = ErrorBudget::hnoma(eps_h11, eps_h12, eps_sic1, eps_sic2)?;
    let (snrs, alloc) = match allocs {
        None => (snr_set_ipc(&spec.cfg, spec.backoff())?, None),
        Some(allocs) => {
            let alloc = allocs[(best.key % n_allocs) as usize];
            (snr_set_spc(&spec.cfg, &alloc)?, Some(alloc))
        }
    };
    let r1_raw = hnoma_r1(
        spec.cfg.n1,
        spec.cfg.n2,
        snrs.snr11,
        snrs.snr21,
        snrs.snr12,
        eps_h11,
        eps_h12,
        eps_sic1,
    )?;
    let r2_raw = crate::math::second_order_rate_raw(
        spec.cfg.n2 as f64,
        snrs.snr22,
        q_inverse_raw(eps_sic2),
    );
    let point = RatePoint::new(r1_raw, r2_raw, Scheme::Hnoma);
    let objective = point.objective(spec.omega);
    debug_assert_eq!(objective, best.obj);
    Ok(Solution {
        status: if objective > 0.0 { SolveStatus::Feasible } else { SolveStatus::ZeroRate },
        objective,
        point: Some(point),
        budget: Some(budget),
        alloc,
    })
}

fn spc_allocs(spec: &SolveSpec) -> Result<Vec<PowerAllocation>> {
    let PowerConstraint::Sum { p_total } = spec.cfg.power else {
        return Err(Error::InvalidConfig("sum power constraint required".into()));
    };
    build_allocs(
        p_total,
        spec.cfg.blocklength_ratio(),
        spec.cfg.n1 > spec.cfg.n2,
        spec.power_grid(),
        spec.backoff(),
    )
}

fn require(spec: &SolveSpec, scheme: Scheme, mode: PowerMode) -> Result<()> {
    if spec.scheme != scheme || spec.power_mode != mode {
        return Err(Error::InvalidConfig(format!(
            "solver expects scheme {scheme:?} under {mode:?}, got {:?} under {:?}",
            spec.scheme, spec.power_mode
        )));
    }
    Ok(())
}

/// Dispatch to the solver matching the requested scheme and power mode.
pub fn solve(spec: &SolveSpec) -> Result<Solution> {
    match (spec.scheme, spec.power_mode) {
        (Scheme::Ed, PowerMode::Ipc) => solve_p2_ipc(spec),
        (Scheme::Ed, PowerMode::Spc) => solve_p2_spc(spec),
        (Scheme::Hnoma, PowerMode::Ipc) => solve_p1_ipc(spec),
        (Scheme::Hnoma, PowerMode::Spc) => solve_p1_spc(spec),
        (Scheme::Tin, _) => Err(Error::InvalidConfig(
            "no weighted-sum problem is defined for the TIN baseline".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

fn grid_sizes(spec: &SolveSpec) -> Result<(usize, usize)> {
    let combos = match spec.scheme {
        Scheme::Ed => EdGrid::build(spec.cfg.eps, spec.eps_step())?.combos.len(),
        Scheme::Hnoma => HnomaGrid::build(spec.cfg.eps, spec.eps_step())?.combos.len(),
        Scheme::Tin => 0,
    };
    let allocs = match spec.power_mode {
        PowerMode::Ipc => 1,
        PowerMode::Spc => spc_allocs(spec)?.len(),
    };
    Ok((combos, allocs))
}

fn meta_for(spec: &SolveSpec, started: Instant) -> Result<SweepMeta> {
    let (grid_combos, grid_allocs) = grid_sizes(spec)?;
    Ok(SweepMeta {
        scheme: spec.scheme,
        power_mode: spec.power_mode,
        eps_step: spec.eps_step(),
        power_grid: match spec.power_mode {
            PowerMode::Ipc => None,
            PowerMode::Spc => Some(spec.power_grid()),
        },
        backoff_delta: spec.backoff(),
        grid_combos,
        grid_allocs,
        dropped_infeasible: 0,
        dropped_dominated: 0,
        wall_clock_ms: started.elapsed().as_millis() as u64,
    })
}

/// Solve the same problem at each strong-user blocklength in `n2_values`
/// (sorted, deduplicated). Infeasible blocklengths keep their rows, flagged.
pub fn sweep_n2(spec: &SolveSpec, n2_values: &[u64]) -> Result<SweepResult> {
    spec.validate()?;
    if n2_values.is_empty() {
        return Err(Error::InvalidConfig("empty n2 sweep".into()));
    }
    let started = Instant::now();
    let mut n2s = n2_values.to_vec();
    n2s.sort_unstable();
    n2s.dedup();
    let mut rows = Vec::with_capacity(n2s.len());
    for n2 in n2s {
        let spec_i = spec.with_n2(n2)?;
        let solution = solve(&spec_i)?;
        rows.push(SweepRow { n2, omega: spec.omega, solution });
    }
    let mut meta = meta_for(spec, started)?;
    meta.wall_clock_ms = started.elapsed().as_millis() as u64;
    Ok(SweepResult { rows, meta })
}

/// Trace the achievable (r1, r2) locus by sweeping the weight over
/// `omega_count` evenly spaced values in [0, 1], then keep the upper-right
/// staircase: infeasible weights are dropped (counted in the metadata), as
/// are points dominated by another returned point.
pub fn trace_rate_region(spec: &SolveSpec, omega_count: u32) -> Result<SweepResult> {
    spec.validate()?;
    if omega_count < 2 {
        return Err(Error::InvalidConfig(format!(
            "omega_count must be >= 2, got {omega_count}"
        )));
    }
    let started = Instant::now();
    let mut rows = Vec::new();
    let mut dropped_infeasible = 0usize;
    for i in 0..omega_count {
        let omega = i as f64 / (omega_count - 1) as f64;
        let solution = solve(&spec.with_omega(omega))?;
        if solution.status == SolveStatus::Infeasible {
            dropped_infeasible += 1;
        } else {
            rows.push(SweepRow { n2: spec.cfg.n2, omega, solution });
        }
    }
    let (rows, dropped_dominated) = pareto_filter(rows);
    let mut meta = meta_for(spec, started)?;
    meta.dropped_infeasible = dropped_infeasible;
    meta.dropped_dominated = dropped_dominated;
    meta.wall_clock_ms = started.elapsed().as_millis() as u64;
    Ok(SweepResult { rows, meta })
}

/// Keep only non-dominated rate points; exact duplicates keep their first
/// (smallest-omega) occurrence.
fn pareto_filter(rows: Vec<SweepRow>) -> (Vec<SweepRow>, usize) {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|row| {
            let p = row.solution.point.expect("feasible rows carry a point");
            (p.r1, p.r2)
        })
        .collect();
    let keep = |i: usize| {
        let (r1, r2) = pts[i];
        !pts.iter().enumerate().any(|(j, &(o1, o2))| {
            let strictly = o1 >= r1 && o2 >= r2 && (o1 > r1 || o2 > r2);
            let duplicate_earlier = j < i && o1 == r1 && o2 == r2;
            strictly || duplicate_earlier
        })
    };
    let total = rows.len();
    let kept: Vec<SweepRow> = rows
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, row)| row)
        .collect();
    let dropped = total - kept.len();
    (kept, dropped)
}
