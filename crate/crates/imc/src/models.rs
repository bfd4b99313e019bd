//! The credal-set model families and their exact upper expectations.
//!
//! Each family evaluates `upper(h) = max { E_m(h) : m in credal set }` by a
//! closed form of its own:
//!
//! * precise: `E_m(h)`;
//! * vacuous: `max h`;
//! * contamination: `(1 - eps) E_m(h) + eps max h`;
//! * belief: `sum_j m(F_j) max_{x in F_j} h(x)` over the focal elements;
//! * interval: Choquet integration against the 2-alternating set function
//!   `P(A) = min(sum_{z in A} up(z), 1 - sum_{z not in A} low(z))`;
//! * polytope: maximum over enumerated vertices.
//!
//! Lower expectations follow by conjugacy, `lower(h) = -upper(-h)`. Support
//! queries (`upper_support`, `lower_hits`) are answered structurally, with
//! no numeric thresholds, so the accessibility analysis downstream never
//! depends on float comparisons against cutoffs.

use std::sync::Arc;

use crate::error::{ImcError, Result};
use crate::polytope::{CredalPolytope, Halfspace};
use crate::settings::Tolerances;
use crate::space::{same_space, Gamble, MassFunction, StateSpace};

/// A belief-function model: focal sets with a basic probability assignment.
///
/// Zero-mass focal elements are dropped at construction, so every stored
/// focal set carries strictly positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefModel {
    space: Arc<StateSpace>,
    focal: Vec<(Vec<usize>, f64)>,
}

impl BeliefModel {
    pub fn new(space: Arc<StateSpace>, focal: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        Self::new_with(space, focal, &Tolerances::default())
    }

    pub fn new_with(
        space: Arc<StateSpace>,
        focal: Vec<(Vec<usize>, f64)>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let mut kept = Vec::with_capacity(focal.len());
        let mut total = 0.0;
        for (set, mass) in focal {
            if set.is_empty() {
                return Err(ImcError::InvalidModel("empty focal element".into()));
            }
            if set.iter().any(|&x| x >= space.size()) {
                return Err(ImcError::InvalidModel("focal element indexes outside the space".into()));
            }
            if mass < 0.0 || !mass.is_finite() {
                return Err(ImcError::InvalidModel(format!("focal mass {mass} is negative")));
            }
            total += mass;
            if mass > 0.0 {
                let mut set = set;
                set.sort_unstable();
                set.dedup();
                kept.push((set, mass));
            }
        }
        if (total - 1.0).abs() > tol.belief_mass_sum {
            return Err(ImcError::InvalidModel(format!(
                "focal masses sum to {total}, expected 1"
            )));
        }
        Ok(BeliefModel { space, focal: kept })
    }

    pub fn focal(&self) -> &[(Vec<usize>, f64)] {
        &self.focal
    }

    /// Upper probability of an event: total mass of focal sets meeting it.
    fn plausibility(&self, event: &[bool]) -> f64 {
        self.focal
            .iter()
            .filter(|(set, _)| set.iter().any(|&x| event[x]))
            .map(|(_, mass)| mass)
            .sum()
    }
}

/// A probability-interval model with reachable bounds.
///
/// Construction tightens the given bounds to reachability
/// (`low(x) >= 1 - sum_{z != x} up(z)` and `up(x) <= 1 - sum_{z != x} low(z)`)
/// and fails when the bounds admit no mass function at all. The Choquet
/// formulas below assume reachable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalModel {
    space: Arc<StateSpace>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl IntervalModel {
    pub fn new(space: Arc<StateSpace>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = space.size();
        if lower.len() != d || upper.len() != d {
            return Err(ImcError::Argument("interval bounds must cover every state".into()));
        }
        for x in 0..d {
            if !(0.0 <= lower[x] && lower[x] <= upper[x] && upper[x] <= 1.0) {
                return Err(ImcError::InvalidModel(format!(
                    "bounds for state {:?} must satisfy 0 <= {} <= {} <= 1",
                    space.label(x),
                    lower[x],
                    upper[x]
                )));
            }
        }
        let sum_lower: f64 = lower.iter().sum();
        let sum_upper: f64 = upper.iter().sum();
        if sum_lower > 1.0 + 1e-12 {
            return Err(ImcError::Infeasible(format!("lower bounds sum to {sum_lower} > 1")));
        }
        if sum_upper < 1.0 - 1e-12 {
            return Err(ImcError::Infeasible(format!("upper bounds sum to {sum_upper} < 1")));
        }
        // Leave-one-out sums are taken directly: subtracting from the total
        // cancels catastrophically and leaves dirt in bounds that are
        // exactly zero, which would corrupt the structural support queries.
        let others = |bounds: &[f64], x: usize| -> f64 {
            (0..d).filter(|&z| z != x).map(|z| bounds[z]).sum()
        };
        let mut tight_lower: Vec<f64> =
            (0..d).map(|x| lower[x].max(1.0 - others(&upper, x))).collect();
        let tight_upper: Vec<f64> =
            (0..d).map(|x| upper[x].min(1.0 - others(&lower, x))).collect();
        for x in 0..d {
            // Proper bounds tighten to l <= u; a crossing is one ulp of
            // rounding in the complement sums.
            if tight_lower[x] > tight_upper[x] {
                tight_lower[x] = tight_upper[x];
            }
        }
        Ok(IntervalModel { space, lower: tight_lower, upper: tight_upper })
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    /// The 2-alternating upper probability of an event.
    pub fn upper_event(&self, event: &[bool]) -> f64 {
        let inside: f64 = (0..self.upper.len()).filter(|&x| event[x]).map(|x| self.upper[x]).sum();
        let outside: f64 =
            (0..self.lower.len()).filter(|&x| !event[x]).map(|x| self.lower[x]).sum();
        inside.min(1.0 - outside)
    }

    /// Conjugate lower probability of an event.
    pub fn lower_event(&self, event: &[bool]) -> f64 {
        let inside: f64 = (0..self.lower.len()).filter(|&x| event[x]).map(|x| self.lower[x]).sum();
        let outside: f64 =
            (0..self.upper.len()).filter(|&x| !event[x]).map(|x| self.upper[x]).sum();
        inside.max(1.0 - outside)
    }

    /// Exact Choquet integral of `h` against `upper_event`.
    ///
    /// The Riemann integral over the range of `h` collapses to a finite sum
    /// of rectangles between consecutive distinct values, evaluated on the
    /// nested upper level sets.
    fn choquet_upper(&self, h: &Gamble) -> f64 {
        let mut values: Vec<f64> = h.values().to_vec();
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite gamble"));
        values.dedup();
        let mut total = values[0];
        for pair in values.windows(2) {
            let level: Vec<bool> = h.values().iter().map(|&v| v >= pair[1]).collect();
            total += (pair[1] - pair[0]) * self.upper_event(&level);
        }
        total
    }
}

/// One credal set over the state space, in one of six representations.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintyModel {
    /// A singleton credal set.
    Precise(MassFunction),
    /// The set of all mass functions.
    Vacuous(Arc<StateSpace>),
    /// Convex mixture of a precise model with the vacuous one.
    Contamination { epsilon: f64, base: MassFunction },
    /// A belief-function model.
    Belief(BeliefModel),
    /// A probability-interval model.
    Interval(IntervalModel),
    /// A general polytope given by expectation bounds.
    Polytope(CredalPolytope),
}

impl UncertaintyModel {
    pub fn contamination(epsilon: f64, base: MassFunction) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(ImcError::InvalidModel(format!("epsilon {epsilon} outside [0, 1]")));
        }
        Ok(UncertaintyModel::Contamination { epsilon, base })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        match self {
            UncertaintyModel::Precise(m) => m.space(),
            UncertaintyModel::Vacuous(s) => s,
            UncertaintyModel::Contamination { base, .. } => base.space(),
            UncertaintyModel::Belief(b) => &b.space,
            UncertaintyModel::Interval(i) => &i.space,
            UncertaintyModel::Polytope(p) => p.space(),
        }
    }

    /// The exact upper expectation of `h` for this family.
    pub fn upper(&self, h: &Gamble) -> Result<f64> {
        same_space(self.space(), h.space(), "upper expectation")?;
        Ok(match self {
            UncertaintyModel::Precise(m) => m.expectation(h)?,
            UncertaintyModel::Vacuous(_) => h.max(),
            UncertaintyModel::Contamination { epsilon, base } => {
                (1.0 - epsilon) * base.expectation(h)? + epsilon * h.max()
            }
            UncertaintyModel::Belief(b) => b
                .focal
                .iter()
                .map(|(set, mass)| {
                    mass * set.iter().map(|&x| h.value(x)).fold(f64::NEG_INFINITY, f64::max)
                })
                .sum(),
            UncertaintyModel::Interval(i) => i.choquet_upper(h),
            UncertaintyModel::Polytope(p) => p.upper_expectation(h)?,
        })
    }

    /// Conjugate lower expectation, `-upper(-h)`.
    pub fn lower(&self, h: &Gamble) -> Result<f64> {
        Ok(-self.upper(&h.negated())?)
    }

    /// The single element of a degenerate (singleton) credal set, when the
    /// representation makes that structurally evident: a precise model, a
    /// contamination with zero weight, interval bounds that coincide, a
    /// belief model whose focal elements are all singletons, or a polytope
    /// with one vertex.
    pub fn as_precise(&self) -> Option<MassFunction> {
        match self {
            UncertaintyModel::Precise(m) => Some(m.clone()),
            UncertaintyModel::Vacuous(s) => (s.size() == 1).then(|| {
                MassFunction::point_mass(Arc::clone(s), 0)
            }),
            UncertaintyModel::Contamination { epsilon, base } => {
                (*epsilon == 0.0).then(|| base.clone())
            }
            UncertaintyModel::Belief(b) => {
                if b.focal.iter().all(|(set, _)| set.len() == 1) {
                    let mut probs = vec![0.0; b.space.size()];
                    for (set, mass) in &b.focal {
                        probs[set[0]] += mass;
                    }
                    MassFunction::new(Arc::clone(&b.space), probs).ok()
                } else {
                    None
                }
            }
            UncertaintyModel::Interval(i) => {
                if i.lower == i.upper {
                    MassFunction::new(Arc::clone(&i.space), i.lower.clone()).ok()
                } else {
                    None
                }
            }
            UncertaintyModel::Polytope(p) => {
                (p.vertices().len() == 1).then(|| p.vertices()[0].clone())
            }
        }
    }

    /// The credal set of this family as an explicit polytope.
    pub fn as_polytope(&self) -> Result<CredalPolytope> {
        self.as_polytope_with(&Tolerances::default())
    }

    pub fn as_polytope_with(&self, tol: &Tolerances) -> Result<CredalPolytope> {
        let space = Arc::clone(self.space());
        let d = space.size();
        match self {
            UncertaintyModel::Precise(m) => Ok(CredalPolytope::singleton(m.clone())),
            UncertaintyModel::Vacuous(_) => Ok(CredalPolytope::vacuous(space)),
            UncertaintyModel::Contamination { epsilon, base } => {
                // { (1 - eps) base + eps q : q in simplex }
                //   = { p : p(x) >= (1 - eps) base(x) for all x }.
                let halfspaces = (0..d)
                    .map(|x| {
                        let ind = Gamble::indicator(Arc::clone(&space), &[x]);
                        Halfspace::new(ind.negated(), -(1.0 - epsilon) * base.prob(x))
                    })
                    .collect();
                CredalPolytope::from_halfspaces_with(space, halfspaces, tol)
            }
            UncertaintyModel::Belief(b) => {
                // p(A) <= Pl(A) for every non-trivial event A.
                let mut halfspaces = Vec::with_capacity((1usize << d) - 2);
                for mask in 1..(1usize << d) - 1 {
                    let event: Vec<bool> = (0..d).map(|x| mask & (1 << x) != 0).collect();
                    let members: Vec<usize> = (0..d).filter(|&x| event[x]).collect();
                    let ind = Gamble::indicator(Arc::clone(&space), &members);
                    halfspaces.push(Halfspace::new(ind, b.plausibility(&event)));
                }
                CredalPolytope::from_halfspaces_with(space, halfspaces, tol)
            }
            UncertaintyModel::Interval(i) => {
                let halfspaces = (0..d)
                    .flat_map(|x| {
                        let ind = Gamble::indicator(Arc::clone(&space), &[x]);
                        [
                            Halfspace::new(ind.clone(), i.upper[x]),
                            Halfspace::new(ind.negated(), -i.lower[x]),
                        ]
                    })
                    .collect();
                CredalPolytope::from_halfspaces_with(space, halfspaces, tol)
            }
            UncertaintyModel::Polytope(p) => Ok(p.clone()),
        }
    }

    /// States `x` with `upper(1_x) > 0`, decided structurally.
    pub fn upper_support(&self) -> Vec<usize> {
        let d = self.space().size();
        match self {
            UncertaintyModel::Precise(m) => m.support(),
            UncertaintyModel::Vacuous(_) => (0..d).collect(),
            UncertaintyModel::Contamination { epsilon, base } => {
                if *epsilon > 0.0 {
                    (0..d).collect()
                } else {
                    base.support()
                }
            }
            UncertaintyModel::Belief(b) => {
                let mut hit = vec![false; d];
                for (set, _) in &b.focal {
                    for &x in set {
                        hit[x] = true;
                    }
                }
                (0..d).filter(|&x| hit[x]).collect()
            }
            UncertaintyModel::Interval(i) => (0..d)
                .filter(|&x| {
                    let others: f64 =
                        (0..d).filter(|&z| z != x).map(|z| i.lower[z]).sum();
                    i.upper[x].min(1.0 - others) > 0.0
                })
                .collect(),
            UncertaintyModel::Polytope(p) => {
                let mut hit = vec![false; d];
                for v in p.vertices() {
                    for x in v.support() {
                        hit[x] = true;
                    }
                }
                (0..d).filter(|&x| hit[x]).collect()
            }
        }
    }

    /// Whether every element of the credal set puts positive mass on `set`,
    /// i.e. whether `lower(1_set) > 0`, decided structurally.
    pub fn lower_hits(&self, set: &[usize]) -> Result<bool> {
        if set.is_empty() {
            return Err(ImcError::Argument("lower_hits needs a non-empty state set".into()));
        }
        let d = self.space().size();
        let mut member = vec![false; d];
        for &x in set {
            if x >= d {
                return Err(ImcError::Argument(format!("state index {x} outside the space")));
            }
            member[x] = true;
        }
        let whole = member.iter().all(|&m| m);
        Ok(match self {
            UncertaintyModel::Precise(m) => m.event_prob(set) > 0.0,
            UncertaintyModel::Vacuous(_) => whole,
            UncertaintyModel::Contamination { epsilon, base } => {
                whole || (base.event_prob(set) > 0.0 && *epsilon < 1.0)
            }
            UncertaintyModel::Belief(b) => b
                .focal
                .iter()
                .any(|(focal, _)| focal.iter().all(|&x| member[x])),
            UncertaintyModel::Interval(i) => i.lower_event(&member) > 0.0,
            UncertaintyModel::Polytope(p) => {
                p.vertices().iter().all(|v| v.event_prob(set) > 0.0)
            }
        })
    }
}
