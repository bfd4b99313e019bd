//! Imprecise Markov chains over finite state spaces.
//!
//! When the initial and transition probabilities of a Markov chain are only
//! known to lie in credal sets, the chain's behaviour is bracketed by lower
//! and upper expectations. This crate provides:
//!
//! * the credal-set model families (precise, vacuous, contamination,
//!   belief, interval, polytope) with exact upper/lower expectations;
//! * upper transition operators and backwards recursion for joint,
//!   conditional and marginal expectation bounds over event trees;
//! * state classification under the upper accessibility relation, including
//!   the regularly-absorbing test that guarantees convergence;
//! * the fixed-point iteration computing the invariant upper expectation,
//!   with contamination-model closed forms;
//! * a Markov set-chain oracle (extreme transition matrices, coefficient of
//!   ergodicity, product scrambling) for cross-checking the operator route;
//! * the embedded chain of k-out-of-n:F reliability systems.
//!
//! ```
//! use imc::{Gamble, StateSpace, StochasticMatrix, UpperTransitionOperator};
//! use imc::limit::{invariant_upper_expectation, LimitOptions};
//!
//! let space = StateSpace::new(["a", "b"]).unwrap();
//! let walk = StochasticMatrix::new(space.clone(), vec![0.5, 0.5, 0.5, 0.5]).unwrap();
//! let op = UpperTransitionOperator::contamination_of(&walk, 0.1).unwrap();
//! let h = Gamble::new(space, vec![1.0, 0.0]).unwrap();
//! let result = invariant_upper_expectation(&op, &h, &LimitOptions::default()).unwrap();
//! assert!((result.limit_value - 0.55).abs() < 1e-8);
//! ```

pub mod classify;
pub mod error;
pub mod limit;
pub mod models;
pub mod operators;
pub mod polytope;
pub mod reliability;
pub mod setchain;
pub mod settings;
pub mod space;
pub mod tree;

pub use error::{ImcError, Result};
pub use models::{BeliefModel, IntervalModel, UncertaintyModel};
pub use operators::{
    PathGamble, StochasticMatrix, TimeIndexedOperators, UpperTransitionOperator,
};
pub use polytope::{CredalPolytope, Halfspace};
pub use settings::Tolerances;
pub use space::{Gamble, MassFunction, StateSpace};
pub use tree::{ImpreciseMarkovChainModel, Situation};
