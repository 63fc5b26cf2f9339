use serde::{Deserialize, Serialize};

/// Size limits for every enumeration in the crate. Exceeding one is an
/// explicit error, never a silent truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest group that may be enumerated element by element.
    pub enumeration: u64,
    /// Largest group for which a dense matrix may be materialised.
    pub dense: u64,
    /// Largest `m^d` for atom enumeration of root-of-unity sums.
    pub atoms: u64,
    /// Largest `|G|^d` (or `|G|^s`) for brute-force oracles.
    pub brute_force: u64,
    /// Largest absolute value of an integer matrix entry.
    pub matrix_entry: i64,
    /// Largest `k` for exact expectations.
    pub expectation_k: u32,
    /// Largest `d` for exact expectations.
    pub expectation_d: u32,
    /// Largest `k` for exact variances.
    pub variance_k: u32,
    /// Largest `d` for exact variances.
    pub variance_d: u32,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            enumeration: 1_000_000,
            dense: 256,
            atoms: 10_000_000,
            brute_force: 1_000_000,
            matrix_entry: 1_000_000,
            expectation_k: 4,
            expectation_d: 4,
            variance_k: 2,
            variance_d: 3,
        }
    }
}
