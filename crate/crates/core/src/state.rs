//! Pure states on the truncated space.

use crate::error::{CqedError, Result};
use crate::linalg::{inner, vec_norm, CMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
    normalized: bool,
}

impl PureState {
    /// Normalizes `amps`; a zero vector is an error.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let mut s = Self { amps, normalized: false };
        s.normalize()?;
        Ok(s)
    }

    pub fn from_unnormalized(amps: Vec<C64>) -> Self {
        Self { amps, normalized: false }
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n = vec_norm(&self.amps);
        if !(n > 0.0 && n.is_finite()) {
            return Err(CqedError::NormCollapse(n));
        }
        let k = 1.0 / n;
        for z in &mut self.amps {
            *z *= k;
        }
        self.normalized = true;
        Ok(n)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        self.normalized = false;
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        vec_norm(&self.amps)
    }

    /// `⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩`.
    pub fn expectation(&self, op: &CMatrix) -> C64 {
        op.expectation(&self.amps) / inner(&self.amps, &self.amps).re
    }

    pub fn overlap(&self, other: &PureState) -> C64 {
        inner(&self.amps, &other.amps)
    }

    /// `O|ψ⟩`, left unnormalized.
    pub fn apply(&self, op: &CMatrix) -> PureState {
        PureState::from_unnormalized(op.matvec(&self.amps))
    }
}
