//! Truncated field ⊗ atoms Hilbert space and the system operators on it.
//!
//! Basis ordering is photon-number major: the state `|n; s_1 … s_N⟩` has index
//! `n · 2^N + Σ_j s_j 2^(j-1)`, with `s_j = 1` for atom `j` excited. Atom 1 is
//! the fastest-varying index.

use crate::error::{CqedError, Result};
use crate::linalg::{CMatrix, C64, ONE, ZERO};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    n_max: usize,
    n_atoms: usize,
}

impl HilbertSpace {
    pub fn new(n_max: usize, n_atoms: usize) -> Result<Self> {
        if !(1..=2).contains(&n_atoms) {
            return Err(CqedError::InvalidParams(format!("N must be 1 or 2, got {n_atoms}")));
        }
        if n_max < 1 {
            return Err(CqedError::InvalidParams("n_max must be >= 1".into()));
        }
        Ok(Self { n_max, n_atoms })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn atom_dim(&self) -> usize {
        1 << self.n_atoms
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1) * self.atom_dim()
    }

    #[inline]
    pub fn index(&self, photons: usize, atoms: usize) -> usize {
        debug_assert!(photons <= self.n_max && atoms < self.atom_dim());
        photons * self.atom_dim() + atoms
    }

    /// Inverse of [`HilbertSpace::index`]: `(photons, atom bit pattern)`.
    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.atom_dim(), idx % self.atom_dim())
    }

    /// Ground state `|0; g…g⟩` as a state vector.
    pub fn vacuum(&self) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim()];
        v[0] = ONE;
        v
    }

    pub fn basis_vector(&self, photons: usize, atoms: usize) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim()];
        v[self.index(photons, atoms)] = ONE;
        v
    }
}

pub fn build_space(params: &SystemParams) -> Result<HilbertSpace> {
    params.validate_structure()?;
    HilbertSpace::new(params.n_max, params.n_atoms)
}

/// Dense operator tied to the space it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    space: HilbertSpace,
    matrix: CMatrix,
}

impl OperatorMatrix {
    pub fn new(space: HilbertSpace, matrix: CMatrix) -> Self {
        assert!(matrix.is_square() && matrix.rows() == space.dim(), "operator/space dimension mismatch");
        Self { space, matrix }
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self::new(self.space, self.matrix.adjoint())
    }

    pub fn product(&self, rhs: &Self) -> Self {
        assert_eq!(self.space, rhs.space);
        Self::new(self.space, &self.matrix * &rhs.matrix)
    }

    pub fn sum(&self, rhs: &Self) -> Self {
        assert_eq!(self.space, rhs.space);
        Self::new(self.space, &self.matrix + &rhs.matrix)
    }

    pub fn scaled(&self, k: C64) -> Self {
        Self::new(self.space, self.matrix.scale(k))
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        self.matrix.matvec(psi)
    }

    pub fn expectation(&self, psi: &[C64]) -> C64 {
        self.matrix.expectation(psi)
    }
}

/// Field annihilation operator `a ⊗ 1_atoms`.
pub fn annihilation(space: HilbertSpace) -> OperatorMatrix {
    let d = space.dim();
    let mut m = CMatrix::zeros(d, d);
    for n in 1..=space.n_max() {
        for s in 0..space.atom_dim() {
            m[(space.index(n - 1, s), space.index(n, s))] = C64::new((n as f64).sqrt(), 0.0);
        }
    }
    OperatorMatrix::new(space, m)
}

/// Single-atom lowering, raising and inversion operators for atom `j` (1-based).
#[derive(Debug, Clone)]
pub struct AtomOperators {
    pub lower: OperatorMatrix,
    pub raise: OperatorMatrix,
    pub inversion: OperatorMatrix,
}

pub fn atomic_ops(space: HilbertSpace, j: usize) -> Result<AtomOperators> {
    if j == 0 || j > space.n_atoms() {
        return Err(CqedError::AtomIndex { index: j, n_atoms: space.n_atoms() });
    }
    let bit = 1usize << (j - 1);
    let d = space.dim();
    let mut lower = CMatrix::zeros(d, d);
    let mut z = CMatrix::zeros(d, d);
    for idx in 0..d {
        let (n, s) = space.split(idx);
        if s & bit != 0 {
            lower[(space.index(n, s & !bit), idx)] = ONE;
            z[(idx, idx)] = ONE;
        } else {
            z[(idx, idx)] = -ONE;
        }
    }
    let lower = OperatorMatrix::new(space, lower);
    Ok(AtomOperators { raise: lower.dagger(), lower, inversion: OperatorMatrix::new(space, z) })
}

/// Collective lowering operator `S₋ = Σ_j σ₋^j`.
pub fn collective_lowering(space: HilbertSpace) -> OperatorMatrix {
    let mut acc = OperatorMatrix::new(space, CMatrix::zeros(space.dim(), space.dim()));
    for j in 1..=space.n_atoms() {
        acc = acc.sum(&atomic_ops(space, j).expect("index in range").lower);
    }
    acc
}

/// Interaction-picture Hamiltonian on resonance, in angular units (ħ = 1):
/// `H = −i g (S₊ a − a† S₋) + i ε (a† − a)`.
pub fn hamiltonian(params: &SystemParams, space: HilbertSpace) -> OperatorMatrix {
    let rates = params.rates();
    let a = annihilation(space);
    let ad = a.dagger();
    let sm = collective_lowering(space);
    let sp = sm.dagger();
    let coupling = sp.product(&a).matrix() - ad.product(&sm).matrix();
    let drive = ad.matrix() - a.matrix();
    let h = &coupling.scale(C64::new(0.0, -rates.g)) + &drive.scale(C64::new(0.0, rates.epsilon));
    OperatorMatrix::new(space, h)
}

/// Every operator the dynamics and observables need, built once per configuration.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub space: HilbertSpace,
    pub a: OperatorMatrix,
    pub number: OperatorMatrix,
    /// `σ₋^j` for j = 1..=N.
    pub sigma_minus: Vec<OperatorMatrix>,
    pub hamiltonian: OperatorMatrix,
}

impl SystemOperators {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let space = build_space(params)?;
        let a = annihilation(space);
        let number = a.dagger().product(&a);
        let sigma_minus = (1..=space.n_atoms())
            .map(|j| atomic_ops(space, j).map(|ops| ops.lower))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { space, a, number, sigma_minus, hamiltonian: hamiltonian(params, space) })
    }
}
