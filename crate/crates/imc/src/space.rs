//! Finite state spaces, gambles and probability mass functions.
//!
//! A gamble is a real-valued map on the state space; it is the object upper
//! and lower expectations act on. All vectors index states by the fixed
//! ordering of the space they were built on.

use std::sync::Arc;

use crate::error::{ImcError, Result};
use crate::settings::Tolerances;

/// An ordered finite set of distinct state labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    /// Builds a space from an ordered list of labels.
    ///
    /// Fails on an empty list or duplicate labels. The ordering is fixed for
    /// the lifetime of every model built on the space.
    pub fn new<I, S>(labels: I) -> Result<Arc<Self>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(ImcError::InvalidModel("state space must be non-empty".into()));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(ImcError::InvalidModel(format!("duplicate state label {a:?}")));
            }
        }
        Ok(Arc::new(StateSpace { labels }))
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Resolves a label, reporting an argument error when it is unknown.
    pub fn require(&self, label: &str) -> Result<usize> {
        self.index_of(label)
            .ok_or_else(|| ImcError::Argument(format!("unknown state label {label:?}")))
    }
}

/// Checks that two objects were built on the same space.
pub(crate) fn same_space(a: &Arc<StateSpace>, b: &Arc<StateSpace>, what: &str) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(ImcError::SpaceMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.labels(),
            b.labels()
        )))
    }
}

/// A real-valued map on a state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamble {
    space: Arc<StateSpace>,
    values: Vec<f64>,
}

impl Gamble {
    /// Builds a gamble from per-state values in space order.
    pub fn new(space: Arc<StateSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.size() {
            return Err(ImcError::Argument(format!(
                "gamble has {} values for a space of size {}",
                values.len(),
                space.size()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ImcError::Argument("gamble values must be finite".into()));
        }
        Ok(Gamble { space, values })
    }

    /// The constant gamble with value `c` in every state.
    pub fn constant(space: Arc<StateSpace>, c: f64) -> Self {
        let n = space.size();
        Gamble { space, values: vec![c; n] }
    }

    /// The indicator gamble of a set of state indices.
    pub fn indicator(space: Arc<StateSpace>, states: &[usize]) -> Self {
        let mut values = vec![0.0; space.size()];
        for &x in states {
            values[x] = 1.0;
        }
        Gamble { space, values }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, state: usize) -> f64 {
        self.values[state]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise negation; the workhorse of upper/lower conjugacy.
    pub fn negated(&self) -> Self {
        Gamble {
            space: Arc::clone(&self.space),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Gamble {
            space: Arc::clone(&self.space),
            values: self.values.iter().map(|v| lambda * v).collect(),
        }
    }

    pub fn plus_constant(&self, mu: f64) -> Self {
        Gamble {
            space: Arc::clone(&self.space),
            values: self.values.iter().map(|v| v + mu).collect(),
        }
    }

    pub fn add(&self, other: &Gamble) -> Result<Self> {
        same_space(&self.space, &other.space, "gamble addition")?;
        Ok(Gamble {
            space: Arc::clone(&self.space),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

/// A probability mass function on a state space.
///
/// Entries are validated to be non-negative up to the feasibility tolerance
/// and to sum to one within it; construction then clamps stray negatives to
/// zero and rescales, so stored entries are exactly non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    space: Arc<StateSpace>,
    probs: Vec<f64>,
}

impl MassFunction {
    pub fn new(space: Arc<StateSpace>, probs: Vec<f64>) -> Result<Self> {
        Self::new_with(space, probs, &Tolerances::default())
    }

    pub fn new_with(space: Arc<StateSpace>, probs: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        if probs.len() != space.size() {
            return Err(ImcError::Argument(format!(
                "mass function has {} entries for a space of size {}",
                probs.len(),
                space.size()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < -tol.feasibility) {
            return Err(ImcError::InvalidModel(format!("mass {p} is negative beyond tolerance")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol.feasibility {
            return Err(ImcError::InvalidModel(format!("masses sum to {sum}, expected 1")));
        }
        let clamped: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        Ok(MassFunction {
            space,
            probs: clamped.into_iter().map(|p| p / total).collect(),
        })
    }

    /// All mass on a single state.
    pub fn point_mass(space: Arc<StateSpace>, state: usize) -> Self {
        let mut probs = vec![0.0; space.size()];
        probs[state] = 1.0;
        MassFunction { space, probs }
    }

    pub fn uniform(space: Arc<StateSpace>) -> Self {
        let n = space.size();
        MassFunction { space, probs: vec![1.0 / n as f64; n] }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }

    /// Probability of a set of state indices.
    pub fn event_prob(&self, states: &[usize]) -> f64 {
        states.iter().map(|&x| self.probs[x]).sum()
    }

    /// States carrying strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&x| self.probs[x] > 0.0).collect()
    }

    /// The expectation of `h` under this mass function.
    pub fn expectation(&self, h: &Gamble) -> Result<f64> {
        same_space(&self.space, &h.space, "expectation")?;
        Ok(self.probs.iter().zip(h.values()).map(|(p, v)| p * v).sum())
    }
}
