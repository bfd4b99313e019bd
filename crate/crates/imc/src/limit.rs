//! Long-run behaviour of stationary chains.
//!
//! Iterating the upper transition operator squeezes every gamble between a
//! non-decreasing minimum and a non-increasing maximum envelope. When the
//! chain is regularly absorbing the two envelopes meet at the invariant
//! upper expectation, the same limit for every initial model. The iteration
//! here tracks both envelopes, reports the bracket, and flags stalls that
//! indicate a periodic orbit instead of convergence.

use serde::Serialize;

use crate::error::{ImcError, Result};
use crate::models::UncertaintyModel;
use crate::operators::UpperTransitionOperator;
use crate::space::Gamble;
use crate::tree::ImpreciseMarkovChainModel;

/// Iteration controls for the invariant-expectation search.
#[derive(Debug, Clone)]
pub struct LimitOptions {
    /// Stop once the envelope gap `max - min` falls below this.
    pub tol: f64,
    /// Give up after this many operator applications.
    pub max_iter: usize,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions { tol: 1e-9, max_iter: 100_000 }
    }
}

/// Relative envelope-gap decrease below which the iteration is considered
/// stalled over the detection window.
const STALL_RELATIVE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceStatus {
    Converged,
    MaxIterExceeded,
    OscillationDetected,
}

/// Outcome of iterating the operator on one gamble.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceResult {
    /// Midpoint of the final envelope; the invariant value when converged.
    pub limit_value: f64,
    /// Number of operator applications performed.
    pub iterations: usize,
    /// Per-step `(min, max)` of the iterates, starting from the input gamble.
    pub envelope_trace: Vec<(f64, f64)>,
    pub status: ConvergenceStatus,
}

impl ConvergenceResult {
    /// The rigorous bracket around the limit at exit.
    pub fn bracket(&self) -> (f64, f64) {
        *self.envelope_trace.last().expect("trace is never empty")
    }
}

/// Iterates `h -> apply(T, h)` until the envelope closes.
///
/// The minimum trace must never decrease and the maximum trace must never
/// increase; a violation beyond rounding slack aborts with an internal
/// error. A stall of the gap over a window of `4 |X|` steps while the gap
/// still exceeds `tol` is reported as a detected oscillation: a heuristic
/// signal that the chain may not be regularly absorbing, never a proof of
/// periodicity.
pub fn invariant_upper_expectation(
    op: &UpperTransitionOperator,
    h: &Gamble,
    options: &LimitOptions,
) -> Result<ConvergenceResult> {
    if options.tol <= 0.0 {
        return Err(ImcError::Argument("tolerance must be positive".into()));
    }
    let window = 4 * op.space().size();
    let mut g = h.clone();
    let mut trace = vec![(g.min(), g.max())];
    for iteration in 1..=options.max_iter {
        g = op.apply(&g)?;
        let (lo, hi) = (g.min(), g.max());
        let (prev_lo, prev_hi) = *trace.last().expect("non-empty");
        if lo < prev_lo - 1e-12 || hi > prev_hi + 1e-12 {
            return Err(ImcError::Internal(format!(
                "envelope moved outward at step {iteration}: [{prev_lo}, {prev_hi}] -> [{lo}, {hi}]"
            )));
        }
        trace.push((lo, hi));
        let gap = hi - lo;
        if gap < options.tol {
            return Ok(ConvergenceResult {
                limit_value: (hi + lo) / 2.0,
                iterations: iteration,
                envelope_trace: trace,
                status: ConvergenceStatus::Converged,
            });
        }
        if iteration >= window {
            let (old_lo, old_hi) = trace[iteration - window];
            let old_gap = old_hi - old_lo;
            if old_gap - gap < STALL_RELATIVE * old_gap {
                return Ok(ConvergenceResult {
                    limit_value: (hi + lo) / 2.0,
                    iterations: iteration,
                    envelope_trace: trace,
                    status: ConvergenceStatus::OscillationDetected,
                });
            }
        }
    }
    let (lo, hi) = *trace.last().expect("non-empty");
    Ok(ConvergenceResult {
        limit_value: (hi + lo) / 2.0,
        iterations: options.max_iter,
        envelope_trace: trace,
        status: ConvergenceStatus::MaxIterExceeded,
    })
}

/// Lower and upper marginal expectations of `h` at times `1..=n_max`.
///
/// Entry `n` is `(E_n(h) lower, E_n(h) upper)` by backwards recursion from
/// the initial model; `n = 1` returns the initial bounds.
pub fn marginal_sequence(
    model: &ImpreciseMarkovChainModel,
    h: &Gamble,
    n_max: usize,
) -> Result<Vec<(f64, f64)>> {
    if n_max == 0 {
        return Err(ImcError::Argument("n_max must be at least 1".into()));
    }
    let transitions = model.transitions();
    let mut out = Vec::with_capacity(n_max);
    out.push((model.initial().lower(h)?, model.initial().upper(h)?));
    if transitions.is_stationary() {
        let op = transitions.step(0)?;
        let mut upper_g = h.clone();
        let mut lower_g = h.clone();
        for _ in 2..=n_max {
            upper_g = op.apply(&upper_g)?;
            lower_g = op.lower_apply(&lower_g)?;
            out.push((model.initial().lower(&lower_g)?, model.initial().upper(&upper_g)?));
        }
    } else {
        // Non-stationary: the new factor enters innermost, so each marginal
        // refolds from scratch.
        for n in 2..=n_max {
            let mut upper_g = h.clone();
            let mut lower_g = h.clone();
            for step in (1..n).rev() {
                let op = transitions.step(step - 1)?;
                upper_g = op.apply(&upper_g)?;
                lower_g = op.lower_apply(&lower_g)?;
            }
            out.push((model.initial().lower(&lower_g)?, model.initial().upper(&upper_g)?));
        }
    }
    Ok(out)
}

fn require_unit_interval(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ImcError::Argument(format!(
            "contamination weight must lie strictly inside (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// Closed-form marginal of a contamination chain after `n` steps:
/// `(1 - eps)^n U_1(T^n h) + eps sum_{k=0}^{n-1} (1 - eps)^k max T^k h`.
///
/// `base` must be an all-precise operator; `initial` is the credal set at
/// the root. The returned value equals the marginal upper expectation of
/// the equivalent contamination-row chain at time `n + 1`.
pub fn contamination_marginal(
    base: &UpperTransitionOperator,
    epsilon: f64,
    initial: &UncertaintyModel,
    h: &Gamble,
    n: usize,
) -> Result<f64> {
    require_unit_interval(epsilon)?;
    if n == 0 {
        return Err(ImcError::Argument("at least one step is required".into()));
    }
    let matrix = base.matrix()?;
    let shrink = 1.0 - epsilon;
    let mut g = h.clone();
    let mut tail = 0.0;
    let mut weight = 1.0;
    for _ in 0..n {
        tail += weight * g.max();
        weight *= shrink;
        g = matrix.apply(&g)?;
    }
    Ok(weight * initial.upper(&g)? + epsilon * tail)
}

/// Closed-form invariant value of a contamination chain:
/// `eps sum_{k=0}^inf (1 - eps)^k max T^k h`, truncated once the geometric
/// weight times the range of `h` drops below `tail_tol`, with the remaining
/// tail closed off at the last computed maximum.
pub fn contamination_limit(
    base: &UpperTransitionOperator,
    epsilon: f64,
    h: &Gamble,
    tail_tol: f64,
) -> Result<f64> {
    require_unit_interval(epsilon)?;
    if tail_tol <= 0.0 {
        return Err(ImcError::Argument("tail tolerance must be positive".into()));
    }
    let matrix = base.matrix()?;
    let shrink = 1.0 - epsilon;
    let range = h.max() - h.min();
    let mut g = h.clone();
    let mut total = 0.0;
    let mut weight = 1.0;
    let mut last_max = g.max();
    while weight * range >= tail_tol {
        last_max = g.max();
        total += weight * last_max;
        weight *= shrink;
        g = matrix.apply(&g)?;
    }
    // Remaining tail: eps sum_{k>=K} (1-eps)^k * (monotone maxima <= last_max).
    Ok(epsilon * total + weight * last_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::UncertaintyModel;
    use crate::operators::{StochasticMatrix, TimeIndexedOperators};
    use crate::space::{MassFunction, StateSpace};
    use std::sync::Arc;

    fn space(labels: &[&str]) -> Arc<StateSpace> {
        StateSpace::new(labels.iter().copied()).unwrap()
    }

    fn two_cycle(s: &Arc<StateSpace>) -> StochasticMatrix {
        StochasticMatrix::new(Arc::clone(s), vec![0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn vacuous_chain_converges_to_max_immediately() {
        let s = space(&["a", "b", "c"]);
        let rows = (0..3).map(|_| UncertaintyModel::Vacuous(Arc::clone(&s))).collect();
        let op = UpperTransitionOperator::new(Arc::clone(&s), rows).unwrap();
        let h = Gamble::new(Arc::clone(&s), vec![0.3, -1.0, 0.9]).unwrap();
        let result = invariant_upper_expectation(&op, &h, &LimitOptions::default()).unwrap();
        assert_eq!(result.status, ConvergenceStatus::Converged);
        assert_eq!(result.iterations, 1);
        assert!((result.limit_value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn contaminated_cycle_limit_is_vacuous() {
        let s = space(&["a", "b"]);
        let op = UpperTransitionOperator::contamination_of(&two_cycle(&s), 0.25).unwrap();
        let h = Gamble::new(Arc::clone(&s), vec![1.0, 0.0]).unwrap();
        let result = invariant_upper_expectation(&op, &h, &LimitOptions::default()).unwrap();
        assert_eq!(result.status, ConvergenceStatus::Converged);
        assert!((result.limit_value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn contaminated_random_walk_limit() {
        let s = space(&["a", "b"]);
        let walk = StochasticMatrix::new(Arc::clone(&s), vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let op = UpperTransitionOperator::contamination_of(&walk, 0.1).unwrap();
        let h = Gamble::new(Arc::clone(&s), vec![1.0, 0.0]).unwrap();
        let result = invariant_upper_expectation(&op, &h, &LimitOptions::default()).unwrap();
        assert!((result.limit_value - 0.55).abs() < 1e-8);
    }

    #[test]
    fn precise_cycle_reports_oscillation() {
        let s = space(&["a", "b"]);
        let op = UpperTransitionOperator::from_matrix(&two_cycle(&s));
        let h = Gamble::new(Arc::clone(&s), vec![1.0, 0.0]).unwrap();
        let result = invariant_upper_expectation(&op, &h, &LimitOptions::default()).unwrap();
        assert_eq!(result.status, ConvergenceStatus::OscillationDetected);
        let (lo, hi) = result.bracket();
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn envelopes_are_monotone_along_the_trace() {
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.15, 0.85, 0.85, 0.15]).unwrap();
        let op = UpperTransitionOperator::contamination_of(&t, 0.1).unwrap();
        let h = Gamble::new(Arc::clone(&s), vec![1.0, 0.0]).unwrap();
        let result = invariant_upper_expectation(&op, &h, &LimitOptions::default()).unwrap();
        for pair in result.envelope_trace.windows(2) {
            assert!(pair[1].0 >= pair[0].0 - 1e-12);
            assert!(pair[1].1 <= pair[0].1 + 1e-12);
        }
    }

    #[test]
    fn marginal_sequence_initial_bounds_first() {
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.15, 0.85, 0.85, 0.15]).unwrap();
        let op = UpperTransitionOperator::contamination_of(&t, 0.1).unwrap();
        let initial = UncertaintyModel::Interval(
            crate::models::IntervalModel::new(Arc::clone(&s), vec![0.6, 0.1], vec![0.9, 0.4])
                .unwrap(),
        );
        let chain = ImpreciseMarkovChainModel::new(
            initial,
            TimeIndexedOperators::stationary(op),
            2,
        )
        .unwrap();
        let ind_a = Gamble::indicator(Arc::clone(&s), &[0]);
        let seq = marginal_sequence(&chain, &ind_a, 3).unwrap();
        assert!((seq[0].0 - 0.6).abs() < 1e-12);
        assert!((seq[0].1 - 0.9).abs() < 1e-12);
        assert!(seq.iter().all(|(lo, up)| lo <= up));
    }

    #[test]
    fn contamination_marginal_single_step_form() {
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.15, 0.85, 0.85, 0.15]).unwrap();
        let base = UpperTransitionOperator::from_matrix(&t);
        let m1 = MassFunction::new(Arc::clone(&s), vec![0.9, 0.1]).unwrap();
        let initial = UncertaintyModel::Precise(m1.clone());
        let h = Gamble::new(Arc::clone(&s), vec![1.0, 0.0]).unwrap();
        let eps = 0.1;
        let got = contamination_marginal(&base, eps, &initial, &h, 1).unwrap();
        let th = t.apply(&h).unwrap();
        let expect = (1.0 - eps) * m1.expectation(&th).unwrap() + eps * h.max();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn contamination_near_one_is_vacuous() {
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.15, 0.85, 0.85, 0.15]).unwrap();
        let base = UpperTransitionOperator::from_matrix(&t);
        let initial = UncertaintyModel::Vacuous(Arc::clone(&s));
        let h = Gamble::new(Arc::clone(&s), vec![2.0, -1.0]).unwrap();
        let got = contamination_marginal(&base, 1.0 - 1e-12, &initial, &h, 7).unwrap();
        assert!((got - 2.0).abs() < 1e-9);
        assert!(contamination_marginal(&base, 1.0, &initial, &h, 7).is_err());
        assert!(contamination_marginal(&base, 0.0, &initial, &h, 7).is_err());
    }

    #[test]
    fn contamination_limit_identity_base() {
        let s = space(&["a", "b"]);
        let id = StochasticMatrix::identity(Arc::clone(&s));
        let base = UpperTransitionOperator::from_matrix(&id);
        let h = Gamble::new(Arc::clone(&s), vec![1.0, 0.0]).unwrap();
        let got = contamination_limit(&base, 0.5, &h, 1e-12).unwrap();
        assert!((got - 1.0).abs() < 1e-10);
    }
}
