//! Bond-dimension-3 matrix product operator generating East-West zero
//! modes from the most diluted configuration.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::fock::Geometry;
use crate::models::ModelSpec;
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpoSpec {
    pub range: usize,
    pub particles: usize,
}

impl MpoSpec {
    pub const BOND_DIM: usize = 3;

    pub fn new(range: usize, particles: usize) -> Result<Self> {
        if range == 0 || range % 2 == 1 {
            return Err(KcmError::Domain(format!(
                "the construction needs an even range, got r={range}"
            )));
        }
        if particles < 2 {
            return Err(KcmError::Domain(format!("need N >= 2, got {particles}")));
        }
        let spec = MpoSpec { range, particles };
        Geometry::chain(spec.sites())?;
        Ok(spec)
    }

    pub fn sites(&self) -> usize {
        (self.range + 1) * (self.particles - 1) + 1
    }

    /// `(•∘^r)^{N-1}•`.
    pub fn seed(&self) -> u64 {
        (0..self.particles).fold(0u64, |m, k| m | 1 << (k * (self.range + 1)))
    }
}

/// Hard-core boson string `c†/c` product acting on a configuration.
/// `create` sites must be empty, `annihilate` sites occupied.
fn act(bits: u64, annihilate: &[usize], create: &[usize]) -> Option<u64> {
    let mut b = bits;
    for &i in annihilate {
        if b >> i & 1 == 0 {
            return None;
        }
        b &= !(1 << i);
    }
    for &i in create {
        if b >> i & 1 == 1 {
            return None;
        }
        b |= 1 << i;
    }
    Some(b)
}

/// Contracts `<L| M_1 M_{r+2} ... |R>` against the seed. Bond index 0 is
/// the identity channel, 1 carries an open compressing pair and 2 an open
/// expanding pair.
pub fn east_west_mpo_state(spec: MpoSpec) -> Result<StateVector> {
    let r = spec.range;
    let sites = spec.sites();
    // (bond, configuration) -> amplitude
    let mut layer: HashMap<(usize, u64), f64> = HashMap::from([((0, spec.seed()), 1.0)]);
    for k in 0..spec.particles {
        let i = k * (r + 1);
        let mut next: HashMap<(usize, u64), f64> = HashMap::new();
        let mut push = |key: (usize, u64), a: f64| *next.entry(key).or_insert(0.0) += a;
        for (&(bond, s), &a) in &layer {
            match bond {
                0 => {
                    push((0, s), a);
                    if i + r + 1 < sites {
                        for n in 1..=r / 2 {
                            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                            let inner = [i + n, i + r + 1 - n];
                            // A+ empties site i and fills the inner pair
                            if let Some(t) = act(s, &[i], &inner) {
                                push((1, t), sign * a);
                            }
                            // A- is its adjoint
                            if let Some(t) = act(s, &inner, &[i]) {
                                push((2, t), sign * a);
                            }
                        }
                    }
                }
                1 => {
                    if let Some(t) = act(s, &[i], &[]) {
                        push((0, t), a);
                    }
                }
                _ => {
                    if let Some(t) = act(s, &[], &[i]) {
                        push((0, t), a);
                    }
                }
            }
        }
        layer = next;
    }
    let amps = layer.into_iter().filter(|e| e.0 .0 == 0).map(|((_, s), a)| (s, a));
    let v = StateVector::new(Geometry::chain(sites)?, amps)?;
    v.normalized()
}

/// Verifies `H_{r,EW} |v> = 0` and returns the residual.
pub fn mpo_residual(spec: MpoSpec, v: &StateVector) -> Result<f64> {
    let model = ModelSpec::east_west(spec.range, spec.sites())?;
    v.residual(&model, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_particles() {
        let v = east_west_mpo_state(MpoSpec::new(2, 2).unwrap()).unwrap();
        let g = v.geometry();
        let h = 0.5f64.sqrt();
        assert!((v.amplitude(g.parse_state("1001").unwrap()) - h).abs() < 1e-15);
        assert!((v.amplitude(g.parse_state("0110").unwrap()) + h).abs() < 1e-15);
        assert_eq!(v.support_len(), 2);
    }

    #[test]
    fn odd_range_rejected() {
        assert!(MpoSpec::new(3, 2).is_err());
        assert!(MpoSpec::new(2, 1).is_err());
    }
}
