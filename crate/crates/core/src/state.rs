//! Real state vectors stored as sparse product-state expansions, so they
//! can be padded and tensored without building a basis.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{KcmError, Result};
use crate::fock::{FockState, Geometry, SectorBasis};
use crate::models::{apply_sparse, ModelSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    geometry: Geometry,
    amps: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Amplitude {
    pub state: String,
    pub re: f64,
    pub im: f64,
}

impl StateVector {
    /// Merges repeated configurations and drops exact zeros.
    pub fn new(geometry: Geometry, amps: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        geometry.validate()?;
        let mut map: HashMap<u64, f64> = HashMap::new();
        for (s, a) in amps {
            if !geometry.contains(s) {
                return Err(KcmError::GeometryMismatch(format!(
                    "configuration {s:#x} does not fit {geometry}"
                )));
            }
            *map.entry(s).or_insert(0.0) += a;
        }
        let mut amps: Vec<(u64, f64)> = map.into_iter().filter(|&(_, a)| a != 0.0).collect();
        amps.sort_unstable_by_key(|e| e.0);
        Ok(StateVector { geometry, amps })
    }

    /// Parses `(string, amplitude)` pairs.
    pub fn from_strings(geometry: Geometry, amps: &[(&str, f64)]) -> Result<Self> {
        let parsed: Result<Vec<(u64, f64)>> = amps
            .iter()
            .map(|&(s, a)| geometry.parse_state(s).map(|b| (b, a)))
            .collect();
        StateVector::new(geometry, parsed?)
    }

    pub fn product(geometry: Geometry, bits: u64) -> Result<Self> {
        StateVector::new(geometry, [(bits, 1.0)])
    }

    pub fn from_dense(basis: &SectorBasis, v: &[f64]) -> Result<Self> {
        if v.len() != basis.dim() {
            return Err(KcmError::DimensionMismatch { expected: basis.dim(), got: v.len() });
        }
        StateVector::new(basis.geometry(), basis.states().iter().copied().zip(v.iter().copied()))
    }

    pub fn to_dense(&self, basis: &SectorBasis) -> Result<Vec<f64>> {
        let mut v = vec![0.0; basis.dim()];
        for &(s, a) in &self.amps {
            let i = basis
                .index_of(s)
                .ok_or_else(|| KcmError::StateNotInBasis(self.geometry.format_state(s)))?;
            v[i] = a;
        }
        Ok(v)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn sites(&self) -> usize {
        self.geometry.site_count()
    }

    pub fn amplitudes(&self) -> &[(u64, f64)] {
        &self.amps
    }

    pub fn amplitude(&self, bits: u64) -> f64 {
        match self.amps.binary_search_by_key(&bits, |e| e.0) {
            Ok(k) => self.amps[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn support_len(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().fold(0.0, |m, e| m + e.1 * e.1).sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(KcmError::Domain("cannot normalise the zero vector".into()));
        }
        Ok(self.scaled(1.0 / n))
    }

    pub fn scaled(&self, c: f64) -> Self {
        StateVector {
            geometry: self.geometry,
            amps: self.amps.iter().map(|&(s, a)| (s, a * c)).collect(),
        }
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        let (small, big) =
            if self.amps.len() <= other.amps.len() { (self, other) } else { (other, self) };
        small.amps.iter().map(|&(s, a)| a * big.amplitude(s)).sum()
    }

    /// Particle numbers present in the expansion.
    pub fn particle_numbers(&self) -> Vec<usize> {
        let mut n: Vec<usize> = self.amps.iter().map(|e| e.0.count_ones() as usize).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// `H |v>` for the model on this vector's lattice.
    pub fn apply(&self, model: &ModelSpec) -> Result<StateVector> {
        if model.geometry != self.geometry {
            return Err(KcmError::GeometryMismatch(format!(
                "model on {} but state on {}",
                model.geometry, self.geometry
            )));
        }
        let out = apply_sparse(&model.rules(), &self.amps);
        StateVector::new(self.geometry, out)
    }

    /// Rayleigh quotient.
    pub fn energy(&self, model: &ModelSpec) -> Result<f64> {
        let n2 = self.dot(self);
        if n2 == 0.0 {
            return Err(KcmError::Domain("energy of the zero vector".into()));
        }
        Ok(self.apply(model)?.dot(self) / n2)
    }

    /// `|| H v - E v || / || v ||`.
    pub fn residual(&self, model: &ModelSpec, energy: f64) -> Result<f64> {
        let hv = self.apply(model)?;
        let diff = StateVector::new(
            self.geometry,
            hv.amps.iter().copied().chain(self.amps.iter().map(|&(s, a)| (s, -energy * a))),
        )?;
        Ok(diff.norm() / self.norm())
    }

    /// `self ⊗ pad ⊗ other` on chains.
    pub fn tensor(&self, pad: &FockState, other: &StateVector) -> Result<StateVector> {
        if !self.geometry.is_chain() || !other.geometry.is_chain() {
            return Err(KcmError::GeometryMismatch("tensor products need chains".into()));
        }
        let l1 = self.sites();
        let sites = l1 + pad.len() + other.sites();
        let geometry = Geometry::chain(sites)?;
        let shift = l1 + pad.len();
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for &(a, x) in &self.amps {
            let left = a | pad.bits() << l1;
            for &(b, y) in &other.amps {
                amps.push((left | b << shift, x * y));
            }
        }
        StateVector::new(geometry, amps)
    }

    /// `k_L^{⊗n} ⊗ self ⊗ k_R^{⊗m}` on chains.
    pub fn padded(&self, left: &FockState, n: usize, right: &FockState, m: usize) -> Result<Self> {
        let lpad = left.repeat(n)?;
        let rpad = right.repeat(m)?;
        let empty = FockState::empty(0)?;
        let lvec = StateVector::product(Geometry::chain(lpad.len().max(1))?, lpad.bits())?;
        let rvec = StateVector::product(Geometry::chain(rpad.len().max(1))?, rpad.bits())?;
        let mut out = self.clone();
        if n > 0 {
            out = lvec.tensor(&empty, &out)?;
        }
        if m > 0 {
            out = out.tensor(&empty, &rvec)?;
        }
        Ok(out)
    }

    pub fn json_amplitudes(&self) -> Vec<Amplitude> {
        self.amps
            .iter()
            .map(|&(s, a)| Amplitude { state: self.geometry.format_state(s), re: a, im: 0.0 })
            .collect()
    }

    /// Largest-magnitude amplitude made positive.
    pub fn with_fixed_phase(&self) -> Self {
        let mut best = 0.0f64;
        for &(_, a) in &self.amps {
            if a.abs() > best.abs() + 1e-12 {
                best = a;
            }
        }
        if best < 0.0 {
            self.scaled(-1.0)
        } else {
            self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_and_padding() {
        let g = Geometry::chain(2).unwrap();
        let v = StateVector::from_strings(g, &[("10", 1.0), ("01", -1.0)]).unwrap();
        let pad: FockState = "00".parse().unwrap();
        let w = v.tensor(&pad, &v).unwrap();
        assert_eq!(w.sites(), 6);
        assert_eq!(w.support_len(), 4);
        let gw = w.geometry();
        assert_eq!(w.amplitude(gw.parse_state("100001").unwrap()), -1.0);
        let e: FockState = "0".parse().unwrap();
        let p = v.padded(&e, 2, &e, 1).unwrap();
        assert_eq!(p.sites(), 5);
        assert_eq!(p.amplitude(p.geometry().parse_state("00100").unwrap()), 1.0);
    }

    #[test]
    fn diamond_zero_mode() {
        let model = ModelSpec::east_west(2, 6).unwrap();
        let v = StateVector::from_strings(
            model.geometry,
            &[("010010", 1.0), ("001100", -1.0)],
        )
        .unwrap();
        let hv = v.apply(&model).unwrap();
        assert_eq!(hv.norm(), 0.0);
    }
}
