//! k-out-of-n:F systems with interval component reliabilities.
//!
//! The failure count of the system walks an embedded chain on `{0, ..., k}`:
//! from `l < k` the next component either works (stay at `l`) or fails
//! (move to `l + 1`), with the survival probability known only to lie in
//! `[r_lower, r_upper]`; state `k` is absorbing. The rows are ordinary
//! interval models, so classification, limits and the set-chain oracle all
//! apply unchanged. Failure probability bounds after `n` components follow
//! from operator powers of the indicator of `{k}`, and are checked against
//! the binomial closed form
//! `upper F_n = 1 - sum_{l < k} C(n, l) r_lower^(n-l) (1 - r_lower)^l`
//! (the lower bound substitutes `r_upper`).

use std::sync::Arc;

use serde::Serialize;

use crate::error::{ImcError, Result};
use crate::models::{IntervalModel, UncertaintyModel};
use crate::operators::{TimeIndexedOperators, UpperTransitionOperator};
use crate::space::{Gamble, MassFunction, StateSpace};
use crate::tree::ImpreciseMarkovChainModel;

/// Parameters of a k-out-of-n:F system with a common reliability interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReliabilitySpec {
    /// Component failures that fail the system.
    pub k: usize,
    /// Number of components.
    pub n: usize,
    pub r_lower: f64,
    pub r_upper: f64,
}

impl ReliabilitySpec {
    pub fn new(k: usize, n: usize, r_lower: f64, r_upper: f64) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(ImcError::Argument("k and n must be positive".into()));
        }
        if k > n + 1 {
            return Err(ImcError::Argument(format!(
                "k = {k} exceeds the practical bound n + 1 = {}",
                n + 1
            )));
        }
        if !(0.0 <= r_lower && r_lower <= r_upper && r_upper <= 1.0) {
            return Err(ImcError::Argument(format!(
                "reliability bounds must satisfy 0 <= {r_lower} <= {r_upper} <= 1"
            )));
        }
        Ok(ReliabilitySpec { k, n, r_lower, r_upper })
    }
}

/// The stationary transition operator of the embedded failure-count chain.
pub fn embedded_operator(spec: &ReliabilitySpec) -> Result<UpperTransitionOperator> {
    let space = StateSpace::new((0..=spec.k).map(|l| l.to_string()))?;
    let d = spec.k + 1;
    let mut rows = Vec::with_capacity(d);
    for l in 0..spec.k {
        let mut lower = vec![0.0; d];
        let mut upper = vec![0.0; d];
        lower[l] = spec.r_lower;
        upper[l] = spec.r_upper;
        lower[l + 1] = 1.0 - spec.r_upper;
        upper[l + 1] = 1.0 - spec.r_lower;
        rows.push(UncertaintyModel::Interval(IntervalModel::new(
            Arc::clone(&space),
            lower,
            upper,
        )?));
    }
    rows.push(UncertaintyModel::Precise(MassFunction::point_mass(
        Arc::clone(&space),
        spec.k,
    )));
    UpperTransitionOperator::new(space, rows)
}

/// The embedded chain: point mass at zero failures, stationary interval
/// rows, horizon `n + 1`.
pub fn build_embedded_chain(spec: &ReliabilitySpec) -> Result<ImpreciseMarkovChainModel> {
    let op = embedded_operator(spec)?;
    let space = Arc::clone(op.space());
    ImpreciseMarkovChainModel::new(
        UncertaintyModel::Precise(MassFunction::point_mass(space, 0)),
        TimeIndexedOperators::stationary(op),
        spec.n + 1,
    )
}

/// `(lower, upper)` failure probability after all `n` components, by
/// operator powers of the failure indicator evaluated at the intact state.
pub fn failure_bounds(spec: &ReliabilitySpec) -> Result<(f64, f64)> {
    let op = embedded_operator(spec)?;
    let failed = Gamble::indicator(Arc::clone(op.space()), &[spec.k]);
    let upper = op.power_apply(&failed, spec.n)?.value(0);
    let lower = op.lower_power_apply(&failed, spec.n)?.value(0);
    Ok((lower, upper))
}

/// Binomial closed form for the same bounds.
///
/// Accumulates the survival sum `sum_{l < k} C(n, l) r^(n-l) (1 - r)^l` in
/// the log domain for `n > 50` to dodge underflow; plain products below.
pub fn binomial_failure_bounds(spec: &ReliabilitySpec) -> (f64, f64) {
    let upper = 1.0 - survival_sum(spec.n, spec.k, spec.r_lower);
    let lower = 1.0 - survival_sum(spec.n, spec.k, spec.r_upper);
    (lower, upper)
}

fn survival_sum(n: usize, k: usize, r: f64) -> f64 {
    if r == 0.0 {
        // Only the l = n term survives; it is counted iff n < k.
        return if n < k { 1.0 } else { 0.0 };
    }
    if n > 50 {
        (0..k.min(n + 1))
            .map(|l| (log_binomial(n, l) + log_pow(r, n - l) + log_pow(1.0 - r, l)).exp())
            .sum()
    } else {
        (0..k.min(n + 1))
            .map(|l| binomial(n, l) * r.powi((n - l) as i32) * (1.0 - r).powi(l as i32))
            .sum()
    }
}

/// `exponent * ln(base)` with the zero-exponent case pinned to zero, so a
/// vanishing base cannot poison a term it does not occur in.
fn log_pow(base: f64, exponent: usize) -> f64 {
    if exponent == 0 {
        0.0
    } else {
        exponent as f64 * base.ln()
    }
}

fn binomial(n: usize, l: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..l {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn log_binomial(n: usize, l: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..l {
        acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    acc
}

/// One row of a reliability sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    /// Midpoint reliability `(r_upper + r_lower) / 2`.
    pub r: f64,
    /// Imprecision half-width `(r_upper - r_lower) / 2`.
    pub epsilon: f64,
    pub n: usize,
    pub f_lower: f64,
    pub f_upper: f64,
}

/// Failure bounds over a grid of midpoints, half-widths and component
/// counts, for a fixed `k`. Rows are ordered by the input grids.
pub fn reliability_sweep(
    k: usize,
    midpoints: &[f64],
    half_widths: &[f64],
    component_counts: &[usize],
) -> Result<Vec<SweepRow>> {
    if midpoints.is_empty() || half_widths.is_empty() || component_counts.is_empty() {
        return Err(ImcError::Argument("sweep grids must be non-empty".into()));
    }
    let mut rows = Vec::new();
    for &r in midpoints {
        for &epsilon in half_widths {
            let (lo, hi) = (r - epsilon, r + epsilon);
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
                return Err(ImcError::Argument(format!(
                    "grid point r = {r}, epsilon = {epsilon} leaves the unit interval"
                )));
            }
            for &n in component_counts {
                let spec = ReliabilitySpec::new(k, n, lo, hi)?;
                let (f_lower, f_upper) = failure_bounds(&spec)?;
                rows.push(SweepRow { r, epsilon, n, f_lower, f_upper });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precise_bounds_match_binomial_exactly() {
        let spec = ReliabilitySpec::new(2, 6, 0.9, 0.9).unwrap();
        let (lo, hi) = failure_bounds(&spec).unwrap();
        let (blo, bhi) = binomial_failure_bounds(&spec);
        assert!((lo - hi).abs() < 1e-12);
        assert!((lo - blo).abs() < 1e-10);
        assert!((hi - bhi).abs() < 1e-10);
    }

    #[test]
    fn k_one_is_a_power_law() {
        let spec = ReliabilitySpec::new(1, 8, 0.9, 0.95).unwrap();
        let (lo, hi) = failure_bounds(&spec).unwrap();
        assert!((hi - (1.0 - 0.9f64.powi(8))).abs() < 1e-10);
        assert!((lo - (1.0 - 0.95f64.powi(8))).abs() < 1e-10);
    }

    #[test]
    fn three_out_of_ten_known_value() {
        let spec = ReliabilitySpec::new(3, 10, 0.9, 0.95).unwrap();
        let (lo, hi) = failure_bounds(&spec).unwrap();
        let survive: f64 = (0..3)
            .map(|l| binomial(10, l) * 0.9f64.powi(10 - l as i32) * 0.1f64.powi(l as i32))
            .sum();
        assert!((hi - (1.0 - survive)).abs() < 1e-10);
        assert!((hi - 0.0702).abs() < 5e-5);
        assert!(lo < hi);
    }

    #[test]
    fn certain_failure_when_components_can_always_fail() {
        let spec = ReliabilitySpec::new(2, 5, 0.0, 0.6).unwrap();
        let (_, hi) = failure_bounds(&spec).unwrap();
        assert!((hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn row_action_matches_case_formula() {
        let spec = ReliabilitySpec::new(3, 4, 0.7, 0.9).unwrap();
        let op = embedded_operator(&spec).unwrap();
        let s = Arc::clone(op.space());
        let h = Gamble::new(Arc::clone(&s), vec![0.4, -1.0, 2.5, 0.0]).unwrap();
        let out = op.apply(&h).unwrap();
        for l in 0..3 {
            let expect = 0.7 * h.value(l)
                + (1.0 - 0.9) * h.value(l + 1)
                + (0.9 - 0.7) * h.value(l).max(h.value(l + 1));
            assert!((out.value(l) - expect).abs() < 1e-12, "row {l}");
        }
        assert_eq!(out.value(3), h.value(3));
    }

    #[test]
    fn fully_imprecise_rows_are_vacuous_on_adjacent_states() {
        let spec = ReliabilitySpec::new(2, 3, 0.0, 1.0).unwrap();
        let op = embedded_operator(&spec).unwrap();
        let s = Arc::clone(op.space());
        let h = Gamble::new(Arc::clone(&s), vec![3.0, -2.0, 1.0]).unwrap();
        let out = op.apply(&h).unwrap();
        assert!((out.value(0) - 3.0).abs() < 1e-12);
        assert!((out.value(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_gambles_stay_monotone() {
        let spec = ReliabilitySpec::new(4, 6, 0.6, 0.8).unwrap();
        let op = embedded_operator(&spec).unwrap();
        let s = Arc::clone(op.space());
        let h = Gamble::new(Arc::clone(&s), vec![-1.0, 0.0, 0.0, 2.0, 5.0]).unwrap();
        let out = op.apply(&h).unwrap();
        for w in out.values().windows(2) {
            assert!(w[0] <= w[1] + 1e-12);
        }
    }

    #[test]
    fn sweep_is_monotone_in_imprecision_and_components() {
        let rows = reliability_sweep(3, &[0.95], &[0.0, 0.01, 0.02], &[10, 20]).unwrap();
        assert_eq!(rows.len(), 6);
        // Zero imprecision collapses the band.
        assert!((rows[0].f_lower - rows[0].f_upper).abs() < 1e-12);
        // Wider imprecision nests the bands.
        let band = |row: &SweepRow| (row.f_lower, row.f_upper);
        let (l0, u0) = band(&rows[0]);
        let (l1, u1) = band(&rows[2]);
        let (l2, u2) = band(&rows[4]);
        assert!(l2 <= l1 && l1 <= l0 && u0 <= u1 && u1 <= u2);
        // More components raise both bounds at fixed imprecision.
        assert!(rows[0].f_upper <= rows[1].f_upper + 1e-12);
        assert!(rows[0].f_lower <= rows[1].f_lower + 1e-12);
    }

    #[test]
    fn spec_validation() {
        assert!(ReliabilitySpec::new(0, 3, 0.5, 0.6).is_err());
        assert!(ReliabilitySpec::new(5, 3, 0.5, 0.6).is_err());
        assert!(ReliabilitySpec::new(2, 3, 0.7, 0.6).is_err());
        assert!(ReliabilitySpec::new(2, 3, -0.1, 0.6).is_err());
        assert!(reliability_sweep(2, &[0.99], &[0.05], &[5]).is_err());
    }

    #[test]
    fn log_domain_matches_direct_products() {
        for &(n, k, r) in &[(60usize, 3usize, 0.95f64), (80, 5, 0.99), (55, 2, 0.5)] {
            let direct: f64 = (0..k)
                .map(|l| binomial(n, l) * r.powi((n - l) as i32) * (1.0 - r).powi(l as i32))
                .sum();
            assert!((survival_sum(n, k, r) - direct).abs() < 1e-12, "n={n} k={k} r={r}");
        }
    }
}
