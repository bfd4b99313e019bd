//! Backwards recursion over imprecise probability trees.
//!
//! Joint and conditional upper expectations of maps on N-tuples of states
//! are computed by folding tree-step operators from the horizon back to the
//! root and finishing with the initial model. Path probabilities factor
//! into products of one-step transition bounds.

use std::sync::Arc;

use crate::error::{ImcError, Result};
use crate::models::UncertaintyModel;
use crate::operators::{PathGamble, TimeIndexedOperators};
use crate::space::{same_space, Gamble, StateSpace};

/// A node of the event tree: the tuple of states observed so far.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Situation(pub Vec<usize>);

impl Situation {
    pub fn root() -> Self {
        Situation(Vec::new())
    }

    pub fn from_labels(space: &StateSpace, labels: &[&str]) -> Result<Self> {
        labels.iter().map(|l| space.require(l)).collect::<Result<Vec<_>>>().map(Situation)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// An initial credal set plus per-step transition operators up to a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpreciseMarkovChainModel {
    initial: UncertaintyModel,
    transitions: TimeIndexedOperators,
    horizon: usize,
}

impl ImpreciseMarkovChainModel {
    pub fn new(
        initial: UncertaintyModel,
        transitions: TimeIndexedOperators,
        horizon: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(ImcError::Argument("horizon must be at least 1".into()));
        }
        same_space(initial.space(), transitions.space(), "chain model")?;
        if !transitions.covers(horizon) {
            return Err(ImcError::Argument(format!(
                "chain with {} step operators cannot cover horizon {horizon}",
                transitions.steps().len()
            )));
        }
        Ok(ImpreciseMarkovChainModel { initial, transitions, horizon })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        self.initial.space()
    }

    pub fn initial(&self) -> &UncertaintyModel {
        &self.initial
    }

    pub fn transitions(&self) -> &TimeIndexedOperators {
        &self.transitions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Folds `f` down to a single-step map through upper tree steps
    /// `N-1, ..., stop+1, stop` (1-based step numbers), leaving a map on
    /// `stop`-tuples.
    fn fold_upper(&self, f: &PathGamble, stop: usize) -> Result<PathGamble> {
        let mut g = f.clone();
        for step in (stop..self.horizon).rev() {
            g = self.transitions.step(step - 1)?.tree_step(&g)?;
        }
        Ok(g)
    }

    fn fold_lower(&self, f: &PathGamble, stop: usize) -> Result<PathGamble> {
        let mut g = f.clone();
        for step in (stop..self.horizon).rev() {
            g = self.transitions.step(step - 1)?.lower_tree_step(&g)?;
        }
        Ok(g)
    }

    fn check_joint_arity(&self, f: &PathGamble) -> Result<()> {
        same_space(self.space(), f.space(), "joint expectation")?;
        if f.arity() != self.horizon {
            return Err(ImcError::Argument(format!(
                "map on {}-tuples against horizon {}",
                f.arity(),
                self.horizon
            )));
        }
        Ok(())
    }

    /// Joint upper expectation of a map on full paths.
    pub fn joint_upper(&self, f: &PathGamble) -> Result<f64> {
        self.check_joint_arity(f)?;
        let folded = self.fold_upper(f, 1)?;
        self.initial.upper(&folded.into_gamble()?)
    }

    /// Conjugate joint lower: lower tree steps finished with the lower
    /// initial expectation.
    pub fn joint_lower(&self, f: &PathGamble) -> Result<f64> {
        self.check_joint_arity(f)?;
        let folded = self.fold_lower(f, 1)?;
        self.initial.lower(&folded.into_gamble()?)
    }

    /// Upper expectation of `f` conditional on having observed `s`.
    ///
    /// The partial fold runs from the horizon down to `|s|` and is read off
    /// at `s`. The root is served by `joint_upper`; a full-length situation
    /// returns `f(s)` directly.
    pub fn conditional_upper(&self, f: &PathGamble, s: &Situation) -> Result<f64> {
        self.check_joint_arity(f)?;
        if s.is_empty() {
            return Err(ImcError::Argument(
                "conditioning on the root is the joint expectation; use joint_upper".into(),
            ));
        }
        if s.len() > self.horizon {
            return Err(ImcError::Argument(format!(
                "situation of length {} beyond horizon {}",
                s.len(),
                self.horizon
            )));
        }
        if s.len() == self.horizon {
            return f.value(&s.0);
        }
        self.fold_upper(f, s.len())?.value(&s.0)
    }

    pub fn conditional_lower(&self, f: &PathGamble, s: &Situation) -> Result<f64> {
        self.check_joint_arity(f)?;
        if s.is_empty() {
            return Err(ImcError::Argument(
                "conditioning on the root is the joint expectation; use joint_lower".into(),
            ));
        }
        if s.len() > self.horizon {
            return Err(ImcError::Argument(format!(
                "situation of length {} beyond horizon {}",
                s.len(),
                self.horizon
            )));
        }
        if s.len() == self.horizon {
            return f.value(&s.0);
        }
        self.fold_lower(f, s.len())?.value(&s.0)
    }

    /// Lower and upper probability of observing exactly the given path
    /// prefix, as products of one-step bounds:
    /// `upper = U_1({x_1}) prod_k T_k 1_{x_{k+1}}(x_k)`, and the analogous
    /// all-lower product for the lower bound.
    pub fn path_bounds(&self, path: &[usize]) -> Result<(f64, f64)> {
        if path.is_empty() {
            return Err(ImcError::Argument("path must contain at least one state".into()));
        }
        if path.len() > self.horizon {
            return Err(ImcError::Argument(format!(
                "path of length {} beyond horizon {}",
                path.len(),
                self.horizon
            )));
        }
        let d = self.space().size();
        if let Some(&x) = path.iter().find(|&&x| x >= d) {
            return Err(ImcError::Argument(format!("state index {x} outside the space")));
        }
        let first = Gamble::indicator(Arc::clone(self.space()), &[path[0]]);
        let mut upper = self.initial.upper(&first)?;
        let mut lower = self.initial.lower(&first)?;
        for (k, pair) in path.windows(2).enumerate() {
            let ind = Gamble::indicator(Arc::clone(self.space()), &[pair[1]]);
            let step = self.transitions.step(k)?;
            upper *= step.apply(&ind)?.value(pair[0]);
            lower *= step.lower_apply(&ind)?.value(pair[0]);
        }
        Ok((lower, upper))
    }
}
