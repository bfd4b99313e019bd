//! Shared generators and brute-force oracles for the integration suites.
//!
//! The oracles here deliberately avoid the library's recursion and fold
//! paths: expectations of compatible trees are enumerated from the plain
//! product formula over extreme local choices, and set-chain products are
//! multiplied out matrix by matrix. They exist to check the fast paths,
//! not to share code with them.

#![allow(dead_code)]

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use imc::models::{BeliefModel, IntervalModel, UncertaintyModel};
use imc::operators::{PathGamble, StochasticMatrix, UpperTransitionOperator};
use imc::polytope::{CredalPolytope, Halfspace};
use imc::setchain::MatrixSet;
use imc::space::{Gamble, MassFunction, StateSpace};
use imc::tree::ImpreciseMarkovChainModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn space_of_size(d: usize) -> Arc<StateSpace> {
    StateSpace::new((0..d).map(|i| format!("s{i}"))).unwrap()
}

pub fn random_gamble(rng: &mut ChaCha8Rng, space: &Arc<StateSpace>) -> Gamble {
    let values = (0..space.size()).map(|_| rng.gen_range(-5.0..5.0)).collect();
    Gamble::new(Arc::clone(space), values).unwrap()
}

/// A mass function with occasional structural zeros.
pub fn random_mass(rng: &mut ChaCha8Rng, space: &Arc<StateSpace>) -> MassFunction {
    let d = space.size();
    loop {
        let mut raw: Vec<f64> = (0..d)
            .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.05..1.0) })
            .collect();
        let sum: f64 = raw.iter().sum();
        if sum < 1e-9 {
            continue;
        }
        raw.iter_mut().for_each(|v| *v /= sum);
        return MassFunction::new(Arc::clone(space), raw).unwrap();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Precise,
    Vacuous,
    Contamination,
    Belief,
    Interval,
    Polytope,
}

pub const ALL_FAMILIES: [Family; 6] = [
    Family::Precise,
    Family::Vacuous,
    Family::Contamination,
    Family::Belief,
    Family::Interval,
    Family::Polytope,
];

pub fn random_model(
    rng: &mut ChaCha8Rng,
    space: &Arc<StateSpace>,
    family: Family,
) -> UncertaintyModel {
    let d = space.size();
    match family {
        Family::Precise => UncertaintyModel::Precise(random_mass(rng, space)),
        Family::Vacuous => UncertaintyModel::Vacuous(Arc::clone(space)),
        Family::Contamination => {
            let epsilon = rng.gen_range(0.0..=1.0);
            UncertaintyModel::contamination(epsilon, random_mass(rng, space)).unwrap()
        }
        Family::Belief => {
            let count = rng.gen_range(1..=3usize);
            let mut weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let focal = weights
                .into_iter()
                .map(|w| {
                    let mut set: Vec<usize> =
                        (0..d).filter(|_| rng.gen_bool(0.5)).collect();
                    if set.is_empty() {
                        set.push(rng.gen_range(0..d));
                    }
                    (set, w)
                })
                .collect();
            UncertaintyModel::Belief(BeliefModel::new(Arc::clone(space), focal).unwrap())
        }
        Family::Interval => {
            let anchor = random_mass(rng, space);
            let width = rng.gen_range(0.0..0.4);
            let lower: Vec<f64> = (0..d)
                .map(|x| (anchor.prob(x) - rng.gen_range(0.0..=width)).max(0.0))
                .collect();
            let upper: Vec<f64> = (0..d)
                .map(|x| (anchor.prob(x) + rng.gen_range(0.0..=width)).min(1.0))
                .collect();
            UncertaintyModel::Interval(
                IntervalModel::new(Arc::clone(space), lower, upper).unwrap(),
            )
        }
        Family::Polytope => {
            // Halfspaces anchored at a feasible mass function.
            let anchor = random_mass(rng, space);
            let count = rng.gen_range(1..=3usize);
            let halfspaces = (0..count)
                .map(|_| {
                    let g = random_gamble(rng, space);
                    let bound = anchor.expectation(&g).unwrap() + rng.gen_range(0.0..0.5);
                    Halfspace::new(g, bound)
                })
                .collect();
            UncertaintyModel::Polytope(
                CredalPolytope::from_halfspaces(Arc::clone(space), halfspaces).unwrap(),
            )
        }
    }
}

pub fn random_family(rng: &mut ChaCha8Rng) -> Family {
    ALL_FAMILIES[rng.gen_range(0..ALL_FAMILIES.len())]
}

/// An operator whose rows are drawn from the given family (mixed rows when
/// `family` is `None`).
pub fn random_operator(
    rng: &mut ChaCha8Rng,
    space: &Arc<StateSpace>,
    family: Option<Family>,
) -> UpperTransitionOperator {
    let rows = (0..space.size())
        .map(|_| {
            let fam = family.unwrap_or_else(|| random_family(rng));
            random_model(rng, space, fam)
        })
        .collect();
    UpperTransitionOperator::new(Arc::clone(space), rows).unwrap()
}

pub fn random_stochastic_matrix(
    rng: &mut ChaCha8Rng,
    space: &Arc<StateSpace>,
) -> StochasticMatrix {
    let rows: Vec<MassFunction> =
        (0..space.size()).map(|_| random_mass(rng, space)).collect();
    StochasticMatrix::from_rows(Arc::clone(space), &rows).unwrap()
}

/// Envelope of `E(f)` over all extreme compatible trees, by explicit
/// enumeration of one credal-set vertex per non-terminal situation and the
/// plain path-product expectation formula. Exponential; keep `|X| <= 3` and
/// horizons `<= 3`.
pub fn tree_envelope_oracle(model: &ImpreciseMarkovChainModel, f: &PathGamble) -> (f64, f64) {
    let d = model.space().size();
    let n = model.horizon();
    assert!(f.arity() == n);

    let initial_vertices = model.initial().as_polytope().unwrap().vertices().to_vec();
    // Choice slots: one per situation at depths 1..n-1, indexed row-major.
    // The credal set of a situation depends only on its last state.
    let mut slot_vertices: Vec<Vec<MassFunction>> = Vec::new();
    let mut slot_offsets: Vec<usize> = Vec::new();
    for depth in 1..n {
        let op = model.transitions().step(depth - 1).unwrap();
        slot_offsets.push(slot_vertices.len());
        for tuple_index in 0..d.pow(depth as u32) {
            let last_state = tuple_index % d;
            slot_vertices
                .push(op.row(last_state).as_polytope().unwrap().vertices().to_vec());
        }
    }

    let mut best_max = f64::NEG_INFINITY;
    let mut best_min = f64::INFINITY;
    let mut choice = vec![0usize; slot_vertices.len()];
    for init_vertex in &initial_vertices {
        loop {
            // Expectation of f in this fully precise tree.
            let mut expectation = 0.0;
            for (path_index, &fv) in f.values().iter().enumerate() {
                // Decode the path and accumulate its probability.
                let mut states = vec![0usize; n];
                let mut rem = path_index;
                for slot in (0..n).rev() {
                    states[slot] = rem % d;
                    rem /= d;
                }
                let mut prob = init_vertex.prob(states[0]);
                let mut situation_index = states[0];
                for depth in 1..n {
                    if prob == 0.0 {
                        break;
                    }
                    let slot = slot_offsets[depth - 1] + situation_index;
                    prob *= slot_vertices[slot][choice[slot]].prob(states[depth]);
                    situation_index = situation_index * d + states[depth];
                }
                expectation += prob * fv;
            }
            best_max = best_max.max(expectation);
            best_min = best_min.min(expectation);

            // Advance the per-situation vertex choices.
            let mut slot = choice.len();
            loop {
                if slot == 0 {
                    break;
                }
                slot -= 1;
                choice[slot] += 1;
                if choice[slot] < slot_vertices[slot].len() {
                    break;
                }
                choice[slot] = 0;
            }
            if choice.iter().all(|&c| c == 0) {
                break;
            }
        }
    }
    (best_min, best_max)
}

/// Supporting halfspaces of a polygon of mass functions in the 3-simplex.
///
/// Vertices are ordered cyclically around their centroid in ternary-plot
/// coordinates; each consecutive pair spans an edge whose in-plane normal
/// is the cross product of the edge direction with the all-ones vector,
/// oriented to keep the centroid feasible.
pub fn hull_halfspaces_3(vertices: &[MassFunction]) -> Vec<Halfspace> {
    let s = Arc::clone(vertices[0].space());
    let centroid: Vec<f64> = (0..3)
        .map(|x| vertices.iter().map(|v| v.prob(x)).sum::<f64>() / vertices.len() as f64)
        .collect();
    let planar = |m: &[f64]| (m[1] + m[2] / 2.0, m[2] * 3f64.sqrt() / 2.0);
    let (cx, cy) = planar(&centroid);
    let mut ordered: Vec<&MassFunction> = vertices.iter().collect();
    ordered.sort_by(|a, b| {
        let (ax, ay) = planar(a.probs());
        let (bx, by) = planar(b.probs());
        let angle_a = (ay - cy).atan2(ax - cx);
        let angle_b = (by - cy).atan2(bx - cx);
        angle_a.partial_cmp(&angle_b).unwrap()
    });
    let mut out = Vec::new();
    for i in 0..ordered.len() {
        let a = ordered[i].probs();
        let b = ordered[(i + 1) % ordered.len()].probs();
        let dir = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        if dir.iter().map(|v| v.abs()).sum::<f64>() < 1e-12 {
            continue;
        }
        let normal = [dir[1] - dir[2], dir[2] - dir[0], dir[0] - dir[1]];
        let bound: f64 = normal.iter().zip(a).map(|(n, v)| n * v).sum();
        let at_centroid: f64 = normal.iter().zip(&centroid).map(|(n, v)| n * v).sum();
        let flip = if at_centroid > bound { -1.0 } else { 1.0 };
        let coeffs =
            Gamble::new(Arc::clone(&s), normal.iter().map(|n| flip * n).collect()).unwrap();
        out.push(Halfspace::new(coeffs, flip * bound));
    }
    out
}

/// Envelope of `(T_1 ... T_n h)_x` over explicit products of matrices from
/// the set. Exponential in `n`; keep `n <= 3`.
pub fn product_envelope_oracle(set: &MatrixSet, h: &Gamble, n: usize, x: usize) -> (f64, f64) {
    let mut best_max = f64::NEG_INFINITY;
    let mut best_min = f64::INFINITY;
    let count = set.len();
    let mut choice = vec![0usize; n];
    loop {
        let mut g = h.clone();
        for &c in choice.iter().rev() {
            g = set.matrices()[c].apply(&g).unwrap();
        }
        best_max = best_max.max(g.value(x));
        best_min = best_min.min(g.value(x));

        let mut slot = n;
        loop {
            if slot == 0 {
                break;
            }
            slot -= 1;
            choice[slot] += 1;
            if choice[slot] < count {
                break;
            }
            choice[slot] = 0;
        }
        if choice.iter().all(|&c| c == 0) {
            break;
        }
    }
    (best_min, best_max)
}
