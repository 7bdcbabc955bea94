//! Fixtures shared by the benchmarks.

use kcmlab_core::fragmentation::domain_wall;
use kcmlab_core::{build_hamiltonian, sector_from_seed, ModelSpec, Result, SectorBasis, SparseOperator};

/// Largest East sector at `L = (r+1)N - r`.
pub fn east_sector(range: usize, particles: usize) -> Result<(ModelSpec, SectorBasis, SparseOperator)> {
    let spec = ModelSpec::east(range, (range + 1) * particles - range)?;
    let basis = sector_from_seed(&spec, domain_wall(particles))?;
    let h = build_hamiltonian(&spec, &basis)?;
    Ok((spec, basis, h))
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_dims() {
        let (_, b, h) = super::east_sector(2, 5).unwrap();
        assert_eq!(b.dim(), 273);
        assert!(h.is_symmetric());
    }
}
