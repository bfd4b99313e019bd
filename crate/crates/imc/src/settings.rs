use serde::{Deserialize, Serialize};

/// All numerical tolerances and size caps in one record.
///
/// Every place a constraint is checked uses `feasibility`; the remaining
/// fields tune individual subsystems. The defaults are the documented
/// contract; override them only when you know the scale of your problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Slack allowed when checking linear constraints and mass-function sums.
    pub feasibility: f64,
    /// Two vertices closer than this in L-infinity norm are considered equal.
    pub vertex_dedup: f64,
    /// Belief-model focal masses must sum to one within this tolerance.
    pub belief_mass_sum: f64,
    /// Rows of a transition matrix must sum to one within this tolerance.
    pub row_sum: f64,
    /// Threshold for numeric positivity checks in diagnostics and tests.
    pub support_threshold: f64,
    /// Cap on the number of extreme transition matrices assembled per operator.
    pub matrix_cap: usize,
    /// Cap on the matrix-fold work (set size times step count) in product sweeps.
    pub product_cap: usize,
    /// Truncation threshold for geometric series tails.
    pub series_tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-9,
            vertex_dedup: 1e-9,
            belief_mass_sum: 1e-12,
            row_sum: 1e-12,
            support_threshold: 1e-12,
            matrix_cap: 1_000_000,
            product_cap: 10_000_000,
            series_tail: 1e-12,
        }
    }
}
