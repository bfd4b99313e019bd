//! Convex polytopes of mass functions and their exact evaluation.
//!
//! A credal set given by finitely many expectation bounds `E_m(g) <= U(g)`
//! is a polytope inside the probability simplex. Two evaluation routes are
//! provided and kept in agreement:
//!
//! * vertex enumeration: every extreme point arises as the solution of the
//!   normalisation equality plus `|X| - 1` active constraints chosen among
//!   the simplex facets `m(x) >= 0` and the given halfspaces, so exhaustive
//!   search over those subsets is exact at small scale;
//! * upper expectations: the linear program
//!   `min { mu + sum_g lambda_g U(g) : lambda_g >= 0, h <= mu + sum_g lambda_g g }`
//!   is evaluated through its dual, a maximum of `E_v(h)` over the
//!   enumerated vertices `v`.

use std::sync::Arc;

use crate::error::{ImcError, Result};
use crate::settings::Tolerances;
use crate::space::{same_space, Gamble, MassFunction, StateSpace};

/// A linear expectation bound: `E_m(coeffs) <= bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub coeffs: Gamble,
    pub bound: f64,
}

impl Halfspace {
    pub fn new(coeffs: Gamble, bound: f64) -> Self {
        Halfspace { coeffs, bound }
    }
}

/// A non-empty polytope of mass functions, with its extreme points cached.
#[derive(Debug, Clone, PartialEq)]
pub struct CredalPolytope {
    space: Arc<StateSpace>,
    halfspaces: Vec<Halfspace>,
    vertices: Vec<MassFunction>,
}

impl CredalPolytope {
    /// Intersects the simplex with the given halfspaces and enumerates the
    /// extreme points. Fails when the feasible region is empty.
    pub fn from_halfspaces(space: Arc<StateSpace>, halfspaces: Vec<Halfspace>) -> Result<Self> {
        Self::from_halfspaces_with(space, halfspaces, &Tolerances::default())
    }

    pub fn from_halfspaces_with(
        space: Arc<StateSpace>,
        halfspaces: Vec<Halfspace>,
        tol: &Tolerances,
    ) -> Result<Self> {
        for hs in &halfspaces {
            same_space(&space, hs.coeffs.space(), "polytope constraint")?;
        }
        let vertices = enumerate(&space, &halfspaces, tol)?;
        Ok(CredalPolytope { space, halfspaces, vertices })
    }

    /// The whole simplex: no constraints beyond normalisation.
    pub fn vacuous(space: Arc<StateSpace>) -> Self {
        let vertices = (0..space.size())
            .map(|x| MassFunction::point_mass(Arc::clone(&space), x))
            .collect();
        CredalPolytope { space, halfspaces: Vec::new(), vertices }
    }

    /// The one-point polytope containing exactly `m`.
    pub fn singleton(m: MassFunction) -> Self {
        let space = Arc::clone(m.space());
        let halfspaces = (0..space.size())
            .flat_map(|x| {
                let ind = Gamble::indicator(Arc::clone(&space), &[x]);
                [
                    Halfspace::new(ind.clone(), m.prob(x)),
                    Halfspace::new(ind.negated(), -m.prob(x)),
                ]
            })
            .collect();
        CredalPolytope { space, halfspaces, vertices: vec![m] }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    /// All extreme points, deduplicated and in lexicographic coordinate order.
    pub fn vertices(&self) -> &[MassFunction] {
        &self.vertices
    }

    /// Tight upper expectation bound `max { E_m(h) : m in P }`.
    pub fn upper_expectation(&self, h: &Gamble) -> Result<f64> {
        same_space(&self.space, h.space(), "polytope upper expectation")?;
        let mut best = f64::NEG_INFINITY;
        for v in &self.vertices {
            best = best.max(v.expectation(h)?);
        }
        Ok(best)
    }

    /// Conjugate lower bound `min { E_m(h) : m in P } = -upper(-h)`.
    pub fn lower_expectation(&self, h: &Gamble) -> Result<f64> {
        Ok(-self.upper_expectation(&h.negated())?)
    }

    /// Whether `m` satisfies every constraint within the feasibility slack.
    pub fn contains(&self, m: &MassFunction, tol: &Tolerances) -> bool {
        self.halfspaces.iter().all(|hs| {
            m.expectation(&hs.coeffs)
                .map(|e| e <= hs.bound + tol.feasibility)
                .unwrap_or(false)
        })
    }
}

/// Exhaustive active-set vertex enumeration.
///
/// Constraint list: `d` simplex facets `-m(x) <= 0` followed by the client
/// halfspaces. Every subset of `d - 1` of them, together with the
/// normalisation row, gives a square linear system; non-singular systems
/// yield candidate points which are kept when feasible.
fn enumerate(
    space: &Arc<StateSpace>,
    halfspaces: &[Halfspace],
    tol: &Tolerances,
) -> Result<Vec<MassFunction>> {
    let d = space.size();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + halfspaces.len());
    for x in 0..d {
        let mut coeffs = vec![0.0; d];
        coeffs[x] = -1.0;
        rows.push((coeffs, 0.0));
    }
    for hs in halfspaces {
        rows.push((hs.coeffs.values().to_vec(), hs.bound));
    }

    let feasible = |m: &[f64]| -> Option<usize> {
        // Returns the index of a violated constraint, if any.
        rows.iter().position(|(coeffs, bound)| {
            let lhs: f64 = coeffs.iter().zip(m).map(|(c, v)| c * v).sum();
            lhs > bound + tol.feasibility
        })
    };

    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let mut closest: Option<(f64, usize)> = None;
    for subset in Combinations::new(rows.len(), d.saturating_sub(1)) {
        let mut a = Vec::with_capacity(d);
        let mut b = Vec::with_capacity(d);
        a.push(vec![1.0; d]);
        b.push(1.0);
        for &i in &subset {
            a.push(rows[i].0.clone());
            b.push(rows[i].1);
        }
        let Some(mut m) = solve(a, b) else { continue };
        // Snap sub-tolerance coordinates to exact zero so vertex supports
        // are structurally meaningful downstream.
        for v in &mut m {
            if v.abs() <= tol.feasibility {
                *v = 0.0;
            }
        }
        match feasible(&m) {
            None => candidates.push(m),
            Some(violated) => {
                let (coeffs, bound) = &rows[violated];
                let excess: f64 =
                    coeffs.iter().zip(&m).map(|(c, v)| c * v).sum::<f64>() - bound;
                if closest.is_none_or(|(e, _)| excess < e) {
                    closest = Some((excess, violated));
                }
            }
        }
    }

    if candidates.is_empty() {
        let detail = match closest {
            Some((excess, i)) if i < d => format!(
                "every candidate violates a constraint; nearest miss breaks the facet m({}) >= 0 by {excess:.3e}",
                space.label(i)
            ),
            Some((excess, i)) => format!(
                "every candidate violates a constraint; nearest miss breaks halfspace #{} by {excess:.3e}",
                i - d
            ),
            None => "no candidate basis yields a solvable system".into(),
        };
        return Err(ImcError::Infeasible(detail));
    }

    // Dedup at the configured L-infinity tolerance, keeping first hits, then
    // sort lexicographically for a deterministic order.
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for c in candidates {
        let dup = unique.iter().any(|u| {
            u.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) <= tol.vertex_dedup
        });
        if !dup {
            unique.push(c);
        }
    }
    unique.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));

    unique
        .into_iter()
        .map(|v| MassFunction::new_with(Arc::clone(space), v, tol))
        .collect()
}

/// Gaussian elimination with partial pivoting; `None` on a singular system.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite matrix")
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in row + 1..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Iterator over all k-element subsets of `0..n` in lexicographic order.
struct Combinations {
    n: usize,
    k: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        let current = (k <= n).then(|| (0..k).collect());
        Combinations { n, k, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.current.as_mut()?;
        let out = current.clone();
        // Advance to the next subset, or exhaust.
        let mut i = self.k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if current[i] < self.n - (self.k - i) {
                current[i] += 1;
                for j in i + 1..self.k {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
