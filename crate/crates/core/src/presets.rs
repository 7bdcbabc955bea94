//! Named states used by the reference experiments.

use crate::error::Result;
use crate::fock::{FockState, Geometry};
use crate::state::StateVector;

/// Four-particle bound zero mode of the East r=2 chain on 8 sites.
pub fn east_bound_state() -> Result<StateVector> {
    let g = Geometry::chain(8)?;
    StateVector::from_strings(
        g,
        &[
            ("11001001", 0.5),
            ("11100001", -0.5),
            ("10011100", 0.25),
            ("10110100", 0.25),
            ("10010110", 0.25),
            ("11100100", 0.25),
            ("11011000", -0.25),
            ("11001100", -0.25),
            ("10011001", -0.25),
            ("10101010", -0.25),
        ],
    )
}

/// Bound state, three empty sites, then the mobile block `10100`.
pub fn padded_quench_state() -> Result<StateVector> {
    let right = StateVector::from_strings(Geometry::chain(5)?, &[("10100", 1.0)])?;
    east_bound_state()?.tensor(&FockState::empty(3)?, &right)
}

/// Rows from `y = 1` upwards.
pub const NORTH_EAST_F1: &str = "11110/10111/10010/10010/00100";
pub const NORTH_EAST_F2: &str = "11110/10011/11010/10010/00100";

pub fn north_east_state(rows: &str) -> Result<u64> {
    Geometry::rectangle(5, 5)?.parse_state(rows)
}
