use serde::{Deserialize, Serialize};

/// Every tolerance used by the library, in one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Allowed deviation of column sums from one.
    pub stochastic_tol: f64,
    /// Entries at or below this are treated as structural zeros.
    pub support_tol: f64,
    /// Relative singular-value cutoff for rank and kernel decisions.
    pub rank_tol: f64,
    /// Residual bound for linear solves and eigen-equations.
    pub residual_tol: f64,
    pub perron_tol: f64,
    pub perron_max_iter: usize,
    /// Total-variation tolerance for the equivalence verdict.
    pub equivalence_tol: f64,
    /// Maximum number of rows materialized when enumerating Y^k.
    pub enumeration_cap: usize,
    /// Largest allowed |sum_j theta_j g_j| before exponentiation.
    pub overflow_limit: f64,
    /// Normalized derivative norms at or below this count as vanishing.
    pub vanish_tol: f64,
    /// Normalized derivative norms above this count as nonvanishing.
    pub nonvanish_tol: f64,
    /// Relative eigenvalue gap above which eigenvalues count as distinct.
    pub eigen_gap_tol: f64,
    /// Relative eigenvalue gap at or below which eigenvalues count as repeated.
    pub eigen_gap_floor: f64,
    /// Imaginary parts and negative real parts tolerated as rounding.
    pub eigen_real_tol: f64,
    /// Off-diagonal leakage allowed in the simultaneous diagonalization test.
    pub leakage_tol: f64,
    /// Threshold for the nonzero-mean side condition on generators.
    pub mean_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            stochastic_tol: 1e-12,
            support_tol: 1e-12,
            rank_tol: 1e-9,
            residual_tol: 1e-10,
            perron_tol: 1e-12,
            perron_max_iter: 100_000,
            equivalence_tol: 1e-9,
            enumeration_cap: 1_000_000,
            overflow_limit: 700.0,
            vanish_tol: 1e-8,
            nonvanish_tol: 1e-6,
            eigen_gap_tol: 1e-7,
            eigen_gap_floor: 1e-9,
            eigen_real_tol: 1e-9,
            leakage_tol: 1e-8,
            mean_tol: 1e-8,
        }
    }
}
