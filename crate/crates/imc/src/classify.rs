//! State classification under the upper accessibility relation.
//!
//! Accessibility is decided on the structural support digraph (edge
//! `x -> y` iff `y` lies in the upper support of row `x`), never by
//! thresholding floating-point operator values. A directed path of length
//! `n` then corresponds exactly to positivity of the n-step upper
//! transition probability, which the numeric-agreement property tests
//! validate rather than assume.
//!
//! On top of the digraph sit strongly connected components (communication
//! classes), the partial order of classes, periods from BFS levels, cyclic
//! residues on maximal classes, and the regularly-absorbing decision that
//! additionally consults lower transition supports.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{ImcError, Result};
use crate::operators::UpperTransitionOperator;
use crate::space::StateSpace;

/// Successor structure of one-step upper accessibility.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportDigraph {
    space: Arc<StateSpace>,
    succ: Vec<Vec<usize>>,
}

/// Builds the digraph of structurally possible one-step transitions.
pub fn support_digraph(op: &UpperTransitionOperator) -> SupportDigraph {
    let space = Arc::clone(op.space());
    let succ = op.rows().iter().map(|row| row.upper_support()).collect();
    // Every valid row has a non-empty upper support, so this cannot fail.
    SupportDigraph::new(space, succ).expect("operator rows always have successors")
}

impl SupportDigraph {
    pub fn new(space: Arc<StateSpace>, succ: Vec<Vec<usize>>) -> Result<Self> {
        if succ.len() != space.size() {
            return Err(ImcError::Argument("one successor set per state required".into()));
        }
        for (x, sucs) in succ.iter().enumerate() {
            if sucs.is_empty() {
                return Err(ImcError::InvalidModel(format!(
                    "state {:?} has no successor",
                    space.label(x)
                )));
            }
            if sucs.iter().any(|&y| y >= space.size()) {
                return Err(ImcError::Argument("successor index outside the space".into()));
            }
        }
        let succ = succ
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        Ok(SupportDigraph { space, succ })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.space.size()
    }

    pub fn successors(&self, x: usize) -> &[usize] {
        &self.succ[x]
    }

    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        self.succ[x].binary_search(&y).is_ok()
    }

    /// Whether a directed path of length exactly `n` runs from `x` to `y`;
    /// zero steps reach only the state itself.
    pub fn n_step_accessible(&self, x: usize, y: usize, n: usize) -> bool {
        let d = self.size();
        let mut reach = vec![false; d];
        reach[x] = true;
        for _ in 0..n {
            let mut next = vec![false; d];
            for u in 0..d {
                if reach[u] {
                    for &w in &self.succ[u] {
                        next[w] = true;
                    }
                }
            }
            reach = next;
        }
        reach[y]
    }

}

/// One communication class of the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunicationClass {
    pub states: Vec<String>,
    /// Greatest common divisor of internal cycle lengths; `None` for a
    /// lone state with no self-loop, where no return is possible.
    pub period: Option<u64>,
    pub maximal: bool,
    /// Residue of each state relative to the class root, modulo the
    /// period; provided on maximal classes only.
    pub cyclic_residues: Option<BTreeMap<String, u64>>,
}

/// Full structural classification of a stationary chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub classes: Vec<CommunicationClass>,
    /// Cover edges of the class order, pointing towards accessible classes.
    pub hasse_edges: Vec<[usize; 2]>,
    pub maximal_classes: Vec<usize>,
    pub transient_classes: Vec<usize>,
    /// Index of the unique maximal class, when there is exactly one.
    pub top_class: Option<usize>,
    pub regular: bool,
    pub maximal_class_regular: bool,
    pub top_class_regular: bool,
    pub regularly_absorbing: bool,
}

/// Outcome and witness of the regularly-absorbing decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionCheck {
    pub regularly_absorbing: bool,
    pub top_class_regular: bool,
    /// States of the regular top class, empty when none exists.
    pub top_class: Vec<String>,
    /// Smallest step count at which each state reaches the top class with
    /// positive lower probability.
    pub reach_step: BTreeMap<String, u64>,
    /// States that never reach the top class with positive lower probability.
    pub unreached: Vec<String>,
}

struct ClassStructure {
    classes: Vec<Vec<usize>>,
    /// Reachability closure between distinct classes.
    reaches: Vec<Vec<bool>>,
    maximal: Vec<bool>,
    periods: Vec<Option<u64>>,
    levels: Vec<u64>,
}

fn class_structure(g: &SupportDigraph) -> ClassStructure {
    let classes = strongly_connected_components(&g.succ);
    let d = g.size();
    let k = classes.len();
    let mut class_of = vec![0usize; d];
    for (c, members) in classes.iter().enumerate() {
        for &x in members {
            class_of[x] = c;
        }
    }

    // Direct class-level edges, then transitive closure by DFS.
    let mut direct = vec![vec![false; k]; k];
    for x in 0..d {
        for &y in g.successors(x) {
            if class_of[x] != class_of[y] {
                direct[class_of[x]][class_of[y]] = true;
            }
        }
    }
    let mut reaches = vec![vec![false; k]; k];
    for c in 0..k {
        let mut todo: Vec<usize> = (0..k).filter(|&j| direct[c][j]).collect();
        while let Some(j) = todo.pop() {
            if !reaches[c][j] {
                reaches[c][j] = true;
                todo.extend((0..k).filter(|&l| direct[j][l]));
            }
        }
    }
    let maximal: Vec<bool> = (0..k).map(|c| (0..k).all(|j| !reaches[c][j])).collect();

    // Periods via BFS levels per class: gcd of level(u) + 1 - level(v)
    // over intra-class edges u -> v.
    let mut periods = vec![None; k];
    let mut levels = vec![0u64; d];
    for (c, members) in classes.iter().enumerate() {
        let root = members[0];
        let mut level: BTreeMap<usize, u64> = BTreeMap::new();
        level.insert(root, 0);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &w in g.successors(u) {
                if class_of[w] == c && !level.contains_key(&w) {
                    level.insert(w, level[&u] + 1);
                    queue.push_back(w);
                }
            }
        }
        let mut gcd_acc: u64 = 0;
        for &u in members {
            for &w in g.successors(u) {
                if class_of[w] == c {
                    gcd_acc = gcd(gcd_acc, level[&u] + 1 - level[&w]);
                }
            }
        }
        periods[c] = (gcd_acc > 0).then_some(gcd_acc);
        for (&x, &l) in &level {
            levels[x] = l;
        }
    }

    ClassStructure { classes, reaches, maximal, periods, levels }
}

/// Classifies the states of a stationary chain.
pub fn classify(op: &UpperTransitionOperator) -> Result<ClassificationReport> {
    let g = support_digraph(op);
    let s = class_structure(&g);
    let k = s.classes.len();

    let mut hasse_edges = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if s.reaches[i][j]
                && !(0..k).any(|l| l != i && l != j && s.reaches[i][l] && s.reaches[l][j])
            {
                hasse_edges.push([i, j]);
            }
        }
    }

    let maximal_classes: Vec<usize> = (0..k).filter(|&c| s.maximal[c]).collect();
    let transient_classes: Vec<usize> = (0..k).filter(|&c| !s.maximal[c]).collect();
    let top_class = (maximal_classes.len() == 1).then(|| maximal_classes[0]);

    let classes: Vec<CommunicationClass> = s
        .classes
        .iter()
        .enumerate()
        .map(|(c, members)| {
            let residues = (s.maximal[c] && s.periods[c].is_some()).then(|| {
                let d = s.periods[c].expect("checked");
                members
                    .iter()
                    .map(|&x| (op.space().label(x).to_string(), s.levels[x] % d))
                    .collect()
            });
            CommunicationClass {
                states: members.iter().map(|&x| op.space().label(x).to_string()).collect(),
                period: s.periods[c],
                maximal: s.maximal[c],
                cyclic_residues: residues,
            }
        })
        .collect();

    let regular = k == 1 && s.periods[0] == Some(1);
    let maximal_class_regular = maximal_classes.iter().all(|&c| s.periods[c] == Some(1));
    let top_class_regular = top_class.is_some_and(|c| s.periods[c] == Some(1));
    let absorption = absorption_check(op, &s)?;

    Ok(ClassificationReport {
        classes,
        hasse_edges,
        maximal_classes,
        transient_classes,
        top_class,
        regular,
        maximal_class_regular,
        top_class_regular,
        regularly_absorbing: absorption.regularly_absorbing,
    })
}

/// Decides whether the chain is regularly absorbing and produces a witness.
///
/// On top class regularity, the lower support set-map
/// `L(S) = { y : every element of row y's credal set hits S }` is iterated
/// from the top class; each new set of states is recorded with the step at
/// which it is first reached with positive lower probability. The iteration
/// stops as soon as a set repeats (the subsequent sets cycle), with a hard
/// cap of `2^|X|` rounds.
pub fn regularly_absorbing(op: &UpperTransitionOperator) -> Result<AbsorptionCheck> {
    let g = support_digraph(op);
    let s = class_structure(&g);
    absorption_check(op, &s)
}

fn absorption_check(op: &UpperTransitionOperator, s: &ClassStructure) -> Result<AbsorptionCheck> {
    let space = op.space();
    let d = space.size();
    let maximal: Vec<usize> = (0..s.classes.len()).filter(|&c| s.maximal[c]).collect();
    let top_class_regular =
        maximal.len() == 1 && s.periods[maximal[0]] == Some(1);
    if !top_class_regular {
        return Ok(AbsorptionCheck {
            regularly_absorbing: false,
            top_class_regular: false,
            top_class: Vec::new(),
            reach_step: BTreeMap::new(),
            unreached: space.labels().to_vec(),
        });
    }
    let top: Vec<usize> = s.classes[maximal[0]].clone();
    let mut in_union = vec![false; d];
    let mut reach_step: BTreeMap<String, u64> = BTreeMap::new();

    let mut current: Vec<usize> = top.clone();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(current.clone());
    let cap = 1usize << d.min(30);
    for k in 1..=cap as u64 {
        if current.is_empty() {
            break;
        }
        let mut next = Vec::new();
        for y in 0..d {
            if op.row(y).lower_hits(&current)? {
                next.push(y);
            }
        }
        for &y in &next {
            if !in_union[y] {
                in_union[y] = true;
                reach_step.insert(space.label(y).to_string(), k);
            }
        }
        if !seen.insert(next.clone()) {
            break;
        }
        current = next;
    }

    let unreached: Vec<String> = (0..d)
        .filter(|&x| !in_union[x] && !top.contains(&x))
        .map(|x| space.label(x).to_string())
        .collect();
    Ok(AbsorptionCheck {
        regularly_absorbing: unreached.is_empty(),
        top_class_regular: true,
        top_class: top.iter().map(|&x| space.label(x).to_string()).collect(),
        reach_step,
        unreached,
    })
}

/// The set of states reachable from *every* state in some common number of
/// steps: the existential characterisation of the states of a regular top
/// class. Computed exactly by iterating boolean matrix powers until the
/// power pattern repeats.
pub fn maximal_regular_states(g: &SupportDigraph) -> Vec<usize> {
    let d = g.size();
    let mut adj = vec![false; d * d];
    for x in 0..d {
        for &y in g.successors(x) {
            adj[x * d + y] = true;
        }
    }
    let mut power = adj.clone();
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut found = vec![false; d];
    while seen.insert(power.clone()) {
        for x in 0..d {
            if (0..d).all(|y| power[y * d + x]) {
                found[x] = true;
            }
        }
        let mut next = vec![false; d * d];
        for x in 0..d {
            for z in 0..d {
                if power[x * d + z] {
                    for y in 0..d {
                        if adj[z * d + y] {
                            next[x * d + y] = true;
                        }
                    }
                }
            }
        }
        power = next;
    }
    (0..d).filter(|&x| found[x]).collect()
}

/// Iterates the lower support set-map `k` times from `set`.
///
/// Exposed for the soundness property that the structural map agrees with
/// the support of the iterated lower operator on non-negative gambles.
pub fn lower_reach_sets(
    op: &UpperTransitionOperator,
    set: &[usize],
    k: usize,
) -> Result<Vec<Vec<usize>>> {
    let d = op.space().size();
    let mut current = set.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        if current.is_empty() {
            out.push(Vec::new());
            continue;
        }
        let mut next = Vec::new();
        for y in 0..d {
            if op.row(y).lower_hits(&current)? {
                next.push(y);
            }
        }
        out.push(next.clone());
        current = next;
    }
    Ok(out)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Iterative Tarjan; components are returned with states sorted and the
/// component list ordered by smallest member.
fn strongly_connected_components(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut comps: Vec<Vec<usize>> = Vec::new();

    for start in 0..n {
        if index[start] != UNSET {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some((v, child_pos)) = work.pop() {
            if child_pos == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let mut descended = false;
            for (i, &w) in succ[v].iter().enumerate().skip(child_pos) {
                if index[w] == UNSET {
                    work.push((v, i + 1));
                    work.push((w, 0));
                    descended = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if descended {
                continue;
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
            if let Some(&(u, _)) = work.last() {
                low[u] = low[u].min(low[v]);
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}
