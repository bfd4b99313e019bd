//! Upper transition operators and their action on gambles.
//!
//! An upper transition operator assigns one credal set to every state; its
//! action on a gamble `h` produces the gamble of per-state conditional
//! upper expectations. Composition is kept lazy (powers apply the operator
//! repeatedly) because an n-step operator is generally not representable
//! by any single row family.

use std::sync::Arc;

use crate::error::{ImcError, Result};
use crate::models::UncertaintyModel;
use crate::space::{same_space, Gamble, MassFunction, StateSpace};

/// A row-stochastic transition matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    space: Arc<StateSpace>,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    /// Validates non-negative entries and unit row sums (within 1e-12).
    pub fn new(space: Arc<StateSpace>, entries: Vec<f64>) -> Result<Self> {
        let d = space.size();
        if entries.len() != d * d {
            return Err(ImcError::Argument(format!(
                "matrix needs {} entries, got {}",
                d * d,
                entries.len()
            )));
        }
        if entries.iter().any(|e| !e.is_finite() || *e < -1e-12) {
            return Err(ImcError::InvalidModel("matrix entries must be non-negative".into()));
        }
        for x in 0..d {
            let sum: f64 = entries[x * d..(x + 1) * d].iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(ImcError::InvalidModel(format!(
                    "row {:?} sums to {sum}, expected 1",
                    space.label(x)
                )));
            }
        }
        Ok(StochasticMatrix {
            space,
            entries: entries.into_iter().map(|e| e.max(0.0)).collect(),
        })
    }

    pub fn from_rows(space: Arc<StateSpace>, rows: &[MassFunction]) -> Result<Self> {
        let d = space.size();
        if rows.len() != d {
            return Err(ImcError::Argument("one row per state required".into()));
        }
        let mut entries = Vec::with_capacity(d * d);
        for row in rows {
            same_space(&space, row.space(), "matrix row")?;
            entries.extend_from_slice(row.probs());
        }
        Ok(StochasticMatrix { space, entries })
    }

    pub fn identity(space: Arc<StateSpace>) -> Self {
        let d = space.size();
        let mut entries = vec![0.0; d * d];
        for x in 0..d {
            entries[x * d + x] = 1.0;
        }
        StochasticMatrix { space, entries }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.space.size()
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.entries[x * self.space.size() + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let d = self.space.size();
        &self.entries[x * d..(x + 1) * d]
    }

    pub fn row_major(&self) -> &[f64] {
        &self.entries
    }

    /// Matrix-vector action on a gamble.
    pub fn apply(&self, h: &Gamble) -> Result<Gamble> {
        same_space(&self.space, h.space(), "matrix application")?;
        let d = self.space.size();
        let values = (0..d)
            .map(|x| self.row(x).iter().zip(h.values()).map(|(t, v)| t * v).sum())
            .collect();
        Gamble::new(Arc::clone(&self.space), values)
    }

    /// Matrix product `self * other`.
    pub fn multiply(&self, other: &StochasticMatrix) -> Result<StochasticMatrix> {
        same_space(&self.space, &other.space, "matrix product")?;
        let d = self.space.size();
        let mut entries = vec![0.0; d * d];
        for x in 0..d {
            for y in 0..d {
                let mut acc = 0.0;
                for z in 0..d {
                    acc += self.entry(x, z) * other.entry(z, y);
                }
                entries[x * d + y] = acc;
            }
        }
        Ok(StochasticMatrix { space: Arc::clone(&self.space), entries })
    }
}

/// Per-state assignment of credal sets; the nonlinear generalisation of a
/// transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperTransitionOperator {
    space: Arc<StateSpace>,
    rows: Vec<UncertaintyModel>,
}

impl UpperTransitionOperator {
    pub fn new(space: Arc<StateSpace>, rows: Vec<UncertaintyModel>) -> Result<Self> {
        if rows.len() != space.size() {
            return Err(ImcError::Argument(format!(
                "{} rows for a space of size {}",
                rows.len(),
                space.size()
            )));
        }
        for row in &rows {
            same_space(&space, row.space(), "operator row")?;
        }
        Ok(UpperTransitionOperator { space, rows })
    }

    /// All rows precise, taken from a transition matrix.
    pub fn from_matrix(matrix: &StochasticMatrix) -> Self {
        let space = Arc::clone(matrix.space());
        let rows = (0..space.size())
            .map(|x| {
                UncertaintyModel::Precise(MassFunction::new(
                    Arc::clone(&space),
                    matrix.row(x).to_vec(),
                ).expect("rows of a validated matrix are mass functions"))
            })
            .collect();
        UpperTransitionOperator { space, rows }
    }

    /// Contamination of a precise chain: every row mixes the matrix row with
    /// the vacuous model at weight `epsilon`.
    pub fn contamination_of(matrix: &StochasticMatrix, epsilon: f64) -> Result<Self> {
        let space = Arc::clone(matrix.space());
        let rows = (0..space.size())
            .map(|x| {
                let base = MassFunction::new(Arc::clone(&space), matrix.row(x).to_vec())?;
                UncertaintyModel::contamination(epsilon, base)
            })
            .collect::<Result<_>>()?;
        Ok(UpperTransitionOperator { space, rows })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn rows(&self) -> &[UncertaintyModel] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> &UncertaintyModel {
        &self.rows[x]
    }

    /// `apply(h)(x)` is the conditional upper expectation of `h` from `x`.
    pub fn apply(&self, h: &Gamble) -> Result<Gamble> {
        same_space(&self.space, h.space(), "operator application")?;
        let values = self.rows.iter().map(|row| row.upper(h)).collect::<Result<_>>()?;
        Gamble::new(Arc::clone(&self.space), values)
    }

    /// Conjugate lower action, `-apply(-h)` pointwise.
    pub fn lower_apply(&self, h: &Gamble) -> Result<Gamble> {
        Ok(self.apply(&h.negated())?.negated())
    }

    /// n-fold application; `n = 0` is the identity.
    pub fn power_apply(&self, h: &Gamble, n: usize) -> Result<Gamble> {
        let mut g = h.clone();
        for _ in 0..n {
            g = self.apply(&g)?;
        }
        Ok(g)
    }

    pub fn lower_power_apply(&self, h: &Gamble, n: usize) -> Result<Gamble> {
        Ok(self.power_apply(&h.negated(), n)?.negated())
    }

    /// Applies the row of the prefix's last state to each last-coordinate
    /// slice of `f`, shrinking a map on (n+1)-tuples to one on n-tuples.
    pub fn tree_step(&self, f: &PathGamble) -> Result<PathGamble> {
        same_space(&self.space, f.space(), "tree step")?;
        if f.arity() < 2 {
            return Err(ImcError::Argument(
                "tree step needs a map on tuples of length at least 2".into(),
            ));
        }
        let d = self.space.size();
        let prefix_count = f.values().len() / d;
        let mut out = Vec::with_capacity(prefix_count);
        for p in 0..prefix_count {
            let slice = Gamble::new(
                Arc::clone(&self.space),
                f.values()[p * d..(p + 1) * d].to_vec(),
            )?;
            let last_state = p % d;
            out.push(self.rows[last_state].upper(&slice)?);
        }
        PathGamble::new(Arc::clone(&self.space), f.arity() - 1, out)
    }

    pub fn lower_tree_step(&self, f: &PathGamble) -> Result<PathGamble> {
        Ok(self.tree_step(&f.negated())?.negated())
    }

    /// The transition matrix of an all-precise operator.
    ///
    /// `T[x][y] = apply(1_y)(x)`. Rows may be any representation of a
    /// singleton credal set (a zero-weight contamination stacks the base
    /// of each state); a row carrying genuine imprecision is a type error.
    pub fn matrix(&self) -> Result<StochasticMatrix> {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(x, row)| {
                row.as_precise().ok_or_else(|| {
                    ImcError::Argument(format!("row {:?} is not precise", self.space.label(x)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        StochasticMatrix::from_rows(Arc::clone(&self.space), &rows)
    }
}

/// The transition operators of a chain, one per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeIndexedOperators {
    steps: Vec<UpperTransitionOperator>,
    stationary: bool,
}

impl TimeIndexedOperators {
    /// One operator reused at every step.
    pub fn stationary(op: UpperTransitionOperator) -> Self {
        TimeIndexedOperators { steps: vec![op], stationary: true }
    }

    /// Explicit per-step operators; the stationary flag is set when all
    /// steps are equal.
    pub fn per_step(steps: Vec<UpperTransitionOperator>) -> Result<Self> {
        if steps.is_empty() {
            return Err(ImcError::Argument("at least one step operator required".into()));
        }
        for op in &steps[1..] {
            same_space(steps[0].space(), op.space(), "step operators")?;
        }
        let stationary = steps.windows(2).all(|w| w[0] == w[1]);
        Ok(TimeIndexedOperators { steps, stationary })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        self.steps[0].space()
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    /// The operator for step `k` (0-based: step k maps time k+1 to k+2).
    pub fn step(&self, k: usize) -> Result<&UpperTransitionOperator> {
        if self.stationary {
            Ok(&self.steps[0])
        } else {
            self.steps.get(k).ok_or_else(|| {
                ImcError::Argument(format!(
                    "step {k} requested from a chain with {} steps",
                    self.steps.len()
                ))
            })
        }
    }

    /// Whether steps 1..horizon-1 are all available.
    pub fn covers(&self, horizon: usize) -> bool {
        self.stationary || self.steps.len() + 1 >= horizon
    }

    pub fn steps(&self) -> &[UpperTransitionOperator] {
        &self.steps
    }
}

/// A real-valued map on fixed-length tuples of states, stored densely in
/// row-major order with the last coordinate fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGamble {
    space: Arc<StateSpace>,
    arity: usize,
    values: Vec<f64>,
}

/// Dense tuple maps are intended for short horizons; this caps the table.
const PATH_TABLE_CAP: usize = 10_000_000;

impl PathGamble {
    pub fn new(space: Arc<StateSpace>, arity: usize, values: Vec<f64>) -> Result<Self> {
        if arity == 0 {
            return Err(ImcError::Argument("tuple maps need arity at least 1".into()));
        }
        let expected = space.size().checked_pow(arity as u32).filter(|&n| n <= PATH_TABLE_CAP);
        match expected {
            Some(n) if n == values.len() => {}
            Some(n) => {
                return Err(ImcError::Argument(format!(
                    "map on {arity}-tuples needs {n} values, got {}",
                    values.len()
                )))
            }
            None => {
                return Err(ImcError::SizeCap(format!(
                    "dense table for arity {arity} over {} states exceeds {PATH_TABLE_CAP} entries",
                    space.size()
                )))
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ImcError::Argument("tuple map values must be finite".into()));
        }
        Ok(PathGamble { space, arity, values })
    }

    /// Builds the table by evaluating `f` on every tuple.
    pub fn from_fn(
        space: Arc<StateSpace>,
        arity: usize,
        f: impl Fn(&[usize]) -> f64,
    ) -> Result<Self> {
        let d = space.size();
        let count = d
            .checked_pow(arity as u32)
            .filter(|&n| n <= PATH_TABLE_CAP)
            .ok_or_else(|| ImcError::SizeCap("tuple table too large".into()))?;
        let mut tuple = vec![0usize; arity];
        let mut values = Vec::with_capacity(count);
        for idx in 0..count {
            let mut rem = idx;
            for slot in (0..arity).rev() {
                tuple[slot] = rem % d;
                rem /= d;
            }
            values.push(f(&tuple));
        }
        PathGamble::new(space, arity, values)
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index(&self, tuple: &[usize]) -> Result<usize> {
        if tuple.len() != self.arity {
            return Err(ImcError::Argument(format!(
                "tuple of length {} indexing a map on {}-tuples",
                tuple.len(),
                self.arity
            )));
        }
        let d = self.space.size();
        let mut idx = 0;
        for &x in tuple {
            if x >= d {
                return Err(ImcError::Argument(format!("state index {x} outside the space")));
            }
            idx = idx * d + x;
        }
        Ok(idx)
    }

    pub fn value(&self, tuple: &[usize]) -> Result<f64> {
        Ok(self.values[self.index(tuple)?])
    }

    pub fn negated(&self) -> Self {
        PathGamble {
            space: Arc::clone(&self.space),
            arity: self.arity,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Reinterprets an arity-1 map as an ordinary gamble.
    pub fn into_gamble(self) -> Result<Gamble> {
        if self.arity != 1 {
            return Err(ImcError::Argument(format!(
                "only arity-1 maps convert to gambles, got arity {}",
                self.arity
            )));
        }
        Gamble::new(self.space, self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::UncertaintyModel;

    fn space(labels: &[&str]) -> Arc<StateSpace> {
        StateSpace::new(labels.iter().copied()).unwrap()
    }

    fn vacuous_op(s: &Arc<StateSpace>) -> UpperTransitionOperator {
        let rows = (0..s.size()).map(|_| UncertaintyModel::Vacuous(Arc::clone(s))).collect();
        UpperTransitionOperator::new(Arc::clone(s), rows).unwrap()
    }

    #[test]
    fn vacuous_rows_apply_to_constant_max() {
        let s = space(&["a", "b", "c"]);
        let op = vacuous_op(&s);
        let h = Gamble::new(Arc::clone(&s), vec![1.0, -2.0, 0.5]).unwrap();
        let out = op.apply(&h).unwrap();
        assert_eq!(out.values(), &[1.0, 1.0, 1.0]);
        assert_eq!(op.lower_apply(&h).unwrap().values(), &[-2.0, -2.0, -2.0]);
    }

    #[test]
    fn precise_rows_match_matrix_vector_product() {
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.15, 0.85, 0.85, 0.15]).unwrap();
        let op = UpperTransitionOperator::from_matrix(&t);
        let h = Gamble::new(Arc::clone(&s), vec![2.0, -1.0]).unwrap();
        let via_op = op.apply(&h).unwrap();
        let via_mat = t.apply(&h).unwrap();
        for (a, b) in via_op.values().iter().zip(via_mat.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(op.matrix().unwrap(), t);
        assert_eq!(op.lower_apply(&h).unwrap().values(), via_mat.values());
    }

    #[test]
    fn contaminated_identity_known_values() {
        let s = space(&["a", "b"]);
        let id = StochasticMatrix::identity(Arc::clone(&s));
        let op = UpperTransitionOperator::contamination_of(&id, 0.3).unwrap();
        let h = Gamble::new(Arc::clone(&s), vec![1.0, 0.0]).unwrap();
        let once = op.apply(&h).unwrap();
        assert!((once.value(1) - 0.3).abs() < 1e-15);
        // Two steps contract by delta = eps (2 - eps) = 0.51.
        let twice = op.power_apply(&h, 2).unwrap();
        assert!((twice.value(1) - 0.51).abs() < 1e-15);
        assert_eq!(op.power_apply(&h, 0).unwrap(), h);
    }

    #[test]
    fn matrix_of_rejects_imprecise_rows() {
        let s = space(&["a", "b"]);
        let op = vacuous_op(&s);
        assert!(op.matrix().is_err());
    }

    #[test]
    fn matrix_of_zero_weight_contamination_stacks_the_bases() {
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.3, 0.7, 0.6, 0.4]).unwrap();
        let op = UpperTransitionOperator::contamination_of(&t, 0.0).unwrap();
        assert_eq!(op.matrix().unwrap(), t);
    }

    #[test]
    fn tree_step_reduces_to_apply_when_independent_of_prefix() {
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let op = UpperTransitionOperator::from_matrix(&t);
        let h = Gamble::new(Arc::clone(&s), vec![3.0, -1.0]).unwrap();
        let f = PathGamble::from_fn(Arc::clone(&s), 2, |t| h.value(t[1])).unwrap();
        let reduced = op.tree_step(&f).unwrap();
        let applied = op.apply(&h).unwrap();
        assert_eq!(reduced.values(), applied.values());
    }

    #[test]
    fn tree_step_constant_in_last_coordinate_collapses() {
        let s = space(&["a", "b"]);
        let op = vacuous_op(&s);
        let g = [2.0, -1.0];
        let f = PathGamble::from_fn(Arc::clone(&s), 2, |t| g[t[0]]).unwrap();
        let reduced = op.tree_step(&f).unwrap();
        assert_eq!(reduced.values(), &g);
    }

    #[test]
    fn tree_step_averages_leaves_under_uniform_rows() {
        let s = space(&["a", "b"]);
        let t = StochasticMatrix::new(Arc::clone(&s), vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let op = UpperTransitionOperator::from_matrix(&t);
        let leaves = [4.0, 1.0, -2.0, 3.0, 0.0, 6.0, 1.0, 1.0];
        let f = PathGamble::new(Arc::clone(&s), 3, leaves.to_vec()).unwrap();
        let reduced = op.tree_step(&f).unwrap();
        for (i, pair) in leaves.chunks(2).enumerate() {
            assert!((reduced.values()[i] - (pair[0] + pair[1]) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn path_gamble_indexing_is_row_major() {
        let s = space(&["a", "b", "c"]);
        let f = PathGamble::from_fn(Arc::clone(&s), 2, |t| (t[0] * 3 + t[1]) as f64).unwrap();
        assert_eq!(f.value(&[1, 2]).unwrap(), 5.0);
        assert!(f.value(&[1]).is_err());
        assert!(f.value(&[1, 3]).is_err());
    }

    #[test]
    fn per_step_detects_stationarity() {
        let s = space(&["a", "b"]);
        let op = vacuous_op(&s);
        let both = TimeIndexedOperators::per_step(vec![op.clone(), op.clone()]).unwrap();
        assert!(both.is_stationary());

        let t = StochasticMatrix::identity(Arc::clone(&s));
        let other = UpperTransitionOperator::from_matrix(&t);
        let mixed = TimeIndexedOperators::per_step(vec![op, other]).unwrap();
        assert!(!mixed.is_stationary());
        assert!(mixed.covers(3));
        assert!(!mixed.covers(4));
        assert!(mixed.step(2).is_err());
    }
}
