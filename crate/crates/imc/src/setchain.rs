//! The Markov set-chain comparison model.
//!
//! Where the operator approach iterates a nonlinear map on gambles, the
//! set-chain model tracks sets of transition matrices (every matrix whose
//! rows are chosen from the per-state credal sets) and their products.
//! Both compute the same marginal expectation bounds, which makes the
//! matrix side a brute-force oracle for the operator side. This module
//! also hosts the coefficient of ergodicity, the product-scrambling test,
//! and the demonstration that one-step matrix products can miss two-step
//! operator information.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{ImcError, Result};
use crate::operators::{StochasticMatrix, UpperTransitionOperator};
use crate::settings::Tolerances;
use crate::space::Gamble;

/// The finite set of extreme transition matrices of an operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSet {
    matrices: Vec<StochasticMatrix>,
    source: UpperTransitionOperator,
}

impl MatrixSet {
    pub fn matrices(&self) -> &[StochasticMatrix] {
        &self.matrices
    }

    /// The operator these matrices were assembled from.
    pub fn source(&self) -> &UpperTransitionOperator {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

/// Assembles every matrix whose row `x` is a vertex of row `x`'s credal set.
///
/// The number of matrices is the product of per-row vertex counts; the
/// `matrix_cap` tolerance bounds it.
pub fn extreme_matrices(op: &UpperTransitionOperator, tol: &Tolerances) -> Result<MatrixSet> {
    let space = op.space();
    let d = space.size();
    let mut row_vertices = Vec::with_capacity(d);
    let mut count: usize = 1;
    for row in op.rows() {
        let vertices = row.as_polytope_with(tol)?.vertices().to_vec();
        count = count
            .checked_mul(vertices.len())
            .filter(|&c| c <= tol.matrix_cap)
            .ok_or_else(|| {
                ImcError::SizeCap(format!(
                    "extreme matrix count exceeds the cap of {}",
                    tol.matrix_cap
                ))
            })?;
        row_vertices.push(vertices);
    }

    let mut matrices = Vec::with_capacity(count);
    let mut choice = vec![0usize; d];
    for _ in 0..count {
        let rows: Vec<_> = (0..d).map(|x| row_vertices[x][choice[x]].clone()).collect();
        matrices.push(StochasticMatrix::from_rows(std::sync::Arc::clone(space), &rows)?);
        // Mixed-radix increment over row choices, last row fastest.
        for slot in (0..d).rev() {
            choice[slot] += 1;
            if choice[slot] < row_vertices[slot].len() {
                break;
            }
            choice[slot] = 0;
        }
    }
    // Deduplicate by entry order; duplicates arise when distinct rows share
    // vertex sets.
    matrices.sort_by(|a, b| {
        a.row_major()
            .partial_cmp(b.row_major())
            .expect("finite matrix entries")
    });
    matrices.dedup();
    Ok(MatrixSet { matrices, source: op.clone() })
}

fn check_fold_budget(set: &MatrixSet, n: usize, tol: &Tolerances) -> Result<()> {
    if n == 0 {
        return Err(ImcError::Argument("at least one product step required".into()));
    }
    if set.is_empty() {
        return Err(ImcError::Argument("empty matrix set".into()));
    }
    if set.len().saturating_mul(n) > tol.product_cap {
        return Err(ImcError::SizeCap(format!(
            "matrix fold of {} matrices over {n} steps exceeds the cap of {}",
            set.len(),
            tol.product_cap
        )));
    }
    Ok(())
}

/// `max { (T_1 ... T_n h)_x : T_i in set }` by a backward fold.
///
/// Because row choices are independent across states, the pointwise
/// maximum over one factor at a time attains the maximum over all
/// length-n products; the work is `|set| * n` matrix applications per
/// gamble, not `|set|^n` products.
pub fn max_product_expectation(
    set: &MatrixSet,
    h: &Gamble,
    n: usize,
    x: usize,
    tol: &Tolerances,
) -> Result<f64> {
    check_fold_budget(set, n, tol)?;
    let mut g = h.clone();
    for _ in 0..n {
        g = fold_once(set, &g, f64::max)?;
    }
    Ok(g.value(x))
}

/// Minimum counterpart of [`max_product_expectation`].
pub fn min_product_expectation(
    set: &MatrixSet,
    h: &Gamble,
    n: usize,
    x: usize,
    tol: &Tolerances,
) -> Result<f64> {
    check_fold_budget(set, n, tol)?;
    let mut g = h.clone();
    for _ in 0..n {
        g = fold_once(set, &g, f64::min)?;
    }
    Ok(g.value(x))
}

fn fold_once(
    set: &MatrixSet,
    g: &Gamble,
    pick: impl Fn(f64, f64) -> f64 + Copy,
) -> Result<Gamble> {
    let mut acc: Option<Vec<f64>> = None;
    for t in &set.matrices {
        let applied = t.apply(g)?;
        acc = Some(match acc {
            None => applied.values().to_vec(),
            Some(best) => best
                .iter()
                .zip(applied.values())
                .map(|(&a, &b)| pick(a, b))
                .collect(),
        });
    }
    Gamble::new(
        std::sync::Arc::clone(g.space()),
        acc.expect("non-empty matrix set"),
    )
}

/// Coefficient of ergodicity
/// `tau(T) = (1/2) max_{x,y} sum_z |T_xz - T_yz|`, in `[0, 1]`.
///
/// `tau(T) < 1` exactly when every pair of rows shares a column of positive
/// entries (a scrambling matrix).
pub fn ergodicity_coefficient(t: &StochasticMatrix) -> f64 {
    let d = t.size();
    let mut worst: f64 = 0.0;
    for x in 0..d {
        for y in x + 1..d {
            let diff: f64 = (0..d).map(|z| (t.entry(x, z) - t.entry(y, z)).abs()).sum();
            worst = worst.max(diff / 2.0);
        }
    }
    worst
}

/// Boolean support pattern of a transition matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SupportPattern {
    pub size: usize,
    /// Row-major positivity flags.
    pub positive: Vec<bool>,
}

impl SupportPattern {
    fn of(t: &StochasticMatrix) -> Self {
        let d = t.size();
        let positive = (0..d * d).map(|i| t.entry(i / d, i % d) > 0.0).collect();
        SupportPattern { size: d, positive }
    }

    /// Support of a product: boolean matrix product (no cancellation can
    /// occur among non-negative entries).
    fn compose(&self, rhs: &SupportPattern) -> SupportPattern {
        let d = self.size;
        let mut positive = vec![false; d * d];
        for x in 0..d {
            for z in 0..d {
                if self.positive[x * d + z] {
                    for y in 0..d {
                        if rhs.positive[z * d + y] {
                            positive[x * d + y] = true;
                        }
                    }
                }
            }
        }
        SupportPattern { size: d, positive }
    }

    fn identity(d: usize) -> SupportPattern {
        SupportPattern {
            size: d,
            positive: (0..d * d).map(|i| i / d == i % d).collect(),
        }
    }

    /// Whether the pattern reproduces itself under composition. An
    /// idempotent non-scrambling pattern recurs at every product length on
    /// its own, which makes it the preferred witness.
    fn is_idempotent(&self) -> bool {
        self.compose(self) == *self
    }

    /// Whether every pair of rows shares a positive column.
    fn is_scrambling(&self) -> bool {
        let d = self.size;
        for x in 0..d {
            for y in x + 1..d {
                if !(0..d).any(|z| self.positive[x * d + z] && self.positive[y * d + z]) {
                    return false;
                }
            }
        }
        true
    }
}

/// Outcome of the product-scrambling search.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ScramblingVerdict {
    /// Every product of this many factors is scrambling (and hence every
    /// longer product too).
    ScramblingAt { m: usize },
    /// Definitively not product scrambling: the support-pattern sets cycle
    /// while still containing a non-scrambling pattern, so witnesses recur
    /// at every length. The witness is one such pattern at length `m`.
    NotScrambling { m: usize, witness: SupportPattern },
    /// The budget ran out before either a scrambling length or a pattern
    /// cycle appeared.
    Inconclusive,
}

/// Tests product scrambling on the support level.
///
/// For each length `m`, the distinct support patterns of all m-fold
/// products are computed (dedup keeps the sets small). Scrambling of a
/// matrix depends only on its support, so the first `m` with all patterns
/// scrambling settles the question positively; submultiplicativity of the
/// coefficient of ergodicity then covers every longer product. If the
/// sequence of pattern sets revisits an earlier set while witnesses are
/// still present, witnesses recur indefinitely and the answer is a
/// definitive no.
pub fn product_scrambling_check(set: &MatrixSet, m_max: usize) -> Result<ScramblingVerdict> {
    if m_max == 0 {
        return Err(ImcError::Argument("m_max must be at least 1".into()));
    }
    if set.is_empty() {
        return Err(ImcError::Argument("empty matrix set".into()));
    }
    let one_step: Vec<SupportPattern> = {
        let mut patterns: Vec<SupportPattern> = Vec::new();
        for t in &set.matrices {
            let p = SupportPattern::of(t);
            if !patterns.contains(&p) {
                patterns.push(p);
            }
        }
        patterns
    };

    let mut current = one_step.clone();
    let mut seen_sets: HashSet<Vec<SupportPattern>> = HashSet::new();
    for m in 1..=m_max {
        let witnesses: Vec<&SupportPattern> =
            current.iter().filter(|p| !p.is_scrambling()).collect();
        match witnesses.first() {
            None => return Ok(ScramblingVerdict::ScramblingAt { m }),
            Some(&first) => {
                let mut key = current.clone();
                key.sort_by(|a, b| a.positive.cmp(&b.positive));
                if !seen_sets.insert(key) {
                    // Witness preference: the identity (the canonical
                    // coefficient-of-ergodicity-one certificate), then any
                    // idempotent pattern, then the first found.
                    let identity = SupportPattern::identity(first.size);
                    let witness = witnesses
                        .iter()
                        .find(|p| ***p == identity)
                        .or_else(|| witnesses.iter().find(|p| p.is_idempotent()))
                        .copied()
                        .unwrap_or(first)
                        .clone();
                    return Ok(ScramblingVerdict::NotScrambling { m, witness });
                }
            }
        }
        if m == m_max {
            break;
        }
        let mut next: Vec<SupportPattern> = Vec::new();
        for a in &current {
            for b in &one_step {
                let p = a.compose(b);
                if !next.contains(&p) {
                    next.push(p);
                }
            }
        }
        current = next;
    }
    Ok(ScramblingVerdict::Inconclusive)
}

/// Demonstrates that two-step operator information exceeds products of
/// one-step extreme matrices, for the contamination-of-identity operator on
/// two states with weight `epsilon`.
///
/// The two-step operator contracts by `delta = epsilon (2 - epsilon)`, and
/// its matrix set contains the matrix with both off-diagonal entries equal
/// to `delta`. A product of two one-step matrices has off-diagonal entries
/// `e1 + e3 - e1 e3 - e1 e4` and `e2 + e4 - e2 e4 - e2 e3` with all
/// parameters in `[0, epsilon]`. The first entry satisfies the exact
/// identity
///
/// ```text
/// delta - (e1 + e3 - e1 e3 - e1 e4)
///     = (eps - e1)(1 - eps) + (eps - e3)(1 - e1) + e1 e4,
/// ```
///
/// a sum of non-negative terms, so reaching `delta` forces `e1 = e3 = eps`
/// and `e4 = 0`; the second entry is then `e2 (1 - eps) <= eps (1 - eps)`,
/// strictly below `delta` whenever `0 < eps < 1`. A coarse grid scan
/// confirms the boundary analysis numerically. Returns `true` when the
/// strict inclusion holds; the degenerate `epsilon = 0` case has both sets
/// equal to the identity and returns `false` by convention.
pub fn strict_inclusion_demo(epsilon: f64) -> Result<bool> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(ImcError::Argument(format!(
            "epsilon must lie in [0, 1), got {epsilon}"
        )));
    }
    if epsilon == 0.0 {
        return Ok(false);
    }
    let delta = epsilon * (2.0 - epsilon);

    // Boundary analysis: unique parameters reach delta in the first row,
    // and they cap the second row strictly below delta.
    let best_second = epsilon * (1.0 - epsilon);
    let analytic = best_second < delta;

    // Grid confirmation that no parameter choice attains both entries.
    let steps = 24;
    let grid = |i: usize| epsilon * i as f64 / steps as f64;
    let mut joint_reachable = false;
    'outer: for i1 in 0..=steps {
        let e1 = grid(i1);
        for i2 in 0..=steps {
            let e2 = grid(i2);
            for i3 in 0..=steps {
                let e3 = grid(i3);
                for i4 in 0..=steps {
                    let e4 = grid(i4);
                    let first = e1 + e3 - e1 * e3 - e1 * e4;
                    let second = e2 + e4 - e2 * e4 - e2 * e3;
                    if (first - delta).abs() < 1e-9 && (second - delta).abs() < 1e-9 {
                        joint_reachable = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(analytic && !joint_reachable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::UncertaintyModel;
    use crate::space::StateSpace;
    use std::sync::Arc;

    fn space(labels: &[&str]) -> Arc<StateSpace> {
        StateSpace::new(labels.iter().copied()).unwrap()
    }

    fn vacuous_op(s: &Arc<StateSpace>) -> UpperTransitionOperator {
        let rows = (0..s.size()).map(|_| UncertaintyModel::Vacuous(Arc::clone(s))).collect();
        UpperTransitionOperator::new(Arc::clone(s), rows).unwrap()
    }

    #[test]
    fn vacuous_two_states_has_four_extreme_matrices() {
        let s = space(&["a", "b"]);
        let set = extreme_matrices(&vacuous_op(&s), &Tolerances::default()).unwrap();
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn precise_chain_has_one_matrix() {
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.15, 0.85, 0.85, 0.15]).unwrap();
        let op = UpperTransitionOperator::from_matrix(&t);
        let set = extreme_matrices(&op, &Tolerances::default()).unwrap();
        assert_eq!(set.len(), 1);
        let h = Gamble::new(Arc::clone(&s), vec![2.0, -1.0]).unwrap();
        let direct = t.apply(&t.apply(&h).unwrap()).unwrap();
        let via_fold =
            max_product_expectation(&set, &h, 2, 0, &Tolerances::default()).unwrap();
        assert!((via_fold - direct.value(0)).abs() < 1e-12);
    }

    #[test]
    fn contaminated_identity_matrix_set_and_two_step_value() {
        let s = space(&["a", "b"]);
        let id = StochasticMatrix::identity(Arc::clone(&s));
        let op = UpperTransitionOperator::contamination_of(&id, 0.3).unwrap();
        let set = extreme_matrices(&op, &Tolerances::default()).unwrap();
        assert_eq!(set.len(), 4);
        let h = Gamble::new(Arc::clone(&s), vec![1.0, 0.0]).unwrap();
        let got = max_product_expectation(&set, &h, 2, 1, &Tolerances::default()).unwrap();
        assert!((got - 0.51).abs() < 1e-12);
    }

    #[test]
    fn ergodicity_coefficient_known_values() {
        let s = space(&["a", "b"]);
        let id = StochasticMatrix::identity(Arc::clone(&s));
        assert!((ergodicity_coefficient(&id) - 1.0).abs() < 1e-15);

        let equal_rows =
            StochasticMatrix::new(Arc::clone(&s), vec![0.3, 0.7, 0.3, 0.7]).unwrap();
        assert_eq!(ergodicity_coefficient(&equal_rows), 0.0);

        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.15, 0.85, 0.85, 0.15]).unwrap();
        assert!((ergodicity_coefficient(&t) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn vacuous_chain_is_not_product_scrambling() {
        let s = space(&["a", "b"]);
        let set = extreme_matrices(&vacuous_op(&s), &Tolerances::default()).unwrap();
        match product_scrambling_check(&set, 6).unwrap() {
            ScramblingVerdict::NotScrambling { witness, .. } => {
                // The identity pattern persists at every length.
                assert!(!witness.is_scrambling());
            }
            other => panic!("expected a definitive no, got {other:?}"),
        }
    }

    #[test]
    fn positive_precise_matrix_scrambles_at_one() {
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.15, 0.85, 0.85, 0.15]).unwrap();
        let op = UpperTransitionOperator::from_matrix(&t);
        let set = extreme_matrices(&op, &Tolerances::default()).unwrap();
        assert_eq!(
            product_scrambling_check(&set, 3).unwrap(),
            ScramblingVerdict::ScramblingAt { m: 1 }
        );
    }

    #[test]
    fn two_cycle_becomes_inconclusive_then_witnessed() {
        // The precise 2-cycle alternates between two patterns; the set
        // sequence cycles with period 2, giving a definitive no at m = 3.
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let op = UpperTransitionOperator::from_matrix(&t);
        let set = extreme_matrices(&op, &Tolerances::default()).unwrap();
        assert_eq!(
            product_scrambling_check(&set, 1).unwrap(),
            ScramblingVerdict::Inconclusive
        );
        match product_scrambling_check(&set, 8).unwrap() {
            ScramblingVerdict::NotScrambling { m, .. } => assert_eq!(m, 3),
            other => panic!("expected a definitive no, got {other:?}"),
        }
    }

    #[test]
    fn strict_inclusion_holds_for_positive_epsilon() {
        for eps in [0.1, 0.3, 0.5] {
            assert!(strict_inclusion_demo(eps).unwrap(), "eps = {eps}");
        }
        assert!(!strict_inclusion_demo(0.0).unwrap());
        assert!(strict_inclusion_demo(1.0).is_err());
    }

    #[test]
    fn fold_budget_is_enforced() {
        let s = space(&["a", "b"]);
        let set = extreme_matrices(&vacuous_op(&s), &Tolerances::default()).unwrap();
        let h = Gamble::new(Arc::clone(&s), vec![1.0, 0.0]).unwrap();
        let tiny = Tolerances { product_cap: 4, ..Tolerances::default() };
        assert!(matches!(
            max_product_expectation(&set, &h, 2, 0, &tiny),
            Err(ImcError::SizeCap(_))
        ));
    }

    #[test]
    fn matrix_cap_is_enforced() {
        let s = space(&["a", "b", "c"]);
        let tiny = Tolerances { matrix_cap: 8, ..Tolerances::default() };
        assert!(matches!(
            extreme_matrices(&vacuous_op(&s), &tiny),
            Err(ImcError::SizeCap(_))
        ));
    }
}
