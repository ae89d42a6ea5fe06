//! Lindblad generator in Liouville space.
//!
//! Density matrices are column-stacked, `vec(ρ)[i + d·j] = ρ[i, j]`. The
//! generator is stored sparse; a dense copy is produced only for the null-space
//! solve.

use crate::error::{CqedError, Result};
use crate::hilbert::SystemOperators;
use crate::linalg::{CMatrix, CsrMatrix, C64, I, ZERO};
use crate::params::SystemParams;

/// `L` acting on vectorized `d × d` matrices.
#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    matrix: CsrMatrix,
    norm_one: f64,
}

/// Sparse Hilbert-space operator, `(row, col, value)`.
type Sparse = Vec<(usize, usize, C64)>;

impl Superoperator {
    pub(crate) fn from_csr(dim: usize, matrix: CsrMatrix) -> Self {
        assert_eq!(matrix.n_rows(), dim * dim);
        let norm_one = matrix.norm_one();
        Self { dim, matrix, norm_one }
    }

    /// Hilbert-space dimension `d`; the superoperator is `d² × d²`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn to_dense(&self) -> CMatrix {
        self.matrix.to_dense()
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.matvec(v)
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        CMatrix::unvectorize(&self.apply_vec(&rho.vectorize()), self.dim)
    }

    /// `e^{L t} v` by Taylor series on sub-steps small enough that each
    /// series converges to machine precision.
    pub fn propagate(&self, v: &[C64], t: f64) -> Result<Vec<C64>> {
        let norm = self.norm_one * t.abs();
        let substeps = (norm / 0.5).ceil().max(1.0) as usize;
        let h = t / substeps as f64;
        let mut x = v.to_vec();
        let mut term = vec![ZERO; x.len()];
        let mut next = vec![ZERO; x.len()];
        for _ in 0..substeps {
            term.copy_from_slice(&x);
            let mut converged = false;
            for k in 1..=60 {
                self.matrix.matvec_into(&term, &mut next);
                let scale = h / k as f64;
                let mut term_norm = 0.0f64;
                let mut x_norm = 0.0f64;
                for ((t, n), xi) in term.iter_mut().zip(&next).zip(x.iter_mut()) {
                    *t = n * scale;
                    *xi += *t;
                    term_norm = term_norm.max(t.norm());
                    x_norm = x_norm.max(xi.norm());
                }
                if term_norm <= 1e-17 * x_norm || term_norm == 0.0 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(CqedError::ExpmNotConverged);
            }
        }
        Ok(x)
    }
}

fn sparse(m: &CMatrix) -> Sparse {
    m.triplets()
}

/// Adds `A ρ B` to the generator.
fn push_sandwich(out: &mut Sparse, d: usize, a: &Sparse, b: &Sparse, k: C64) {
    // (AρB)_{ij} = Σ_{kl} A_{ik} ρ_{kl} B_{lj}
    for &(i, kk, av) in a {
        for &(l, j, bv) in b {
            out.push((i + d * j, kk + d * l, k * av * bv));
        }
    }
}

/// Adds `A ρ` to the generator.
fn push_left(out: &mut Sparse, d: usize, a: &Sparse, k: C64) {
    for &(i, kk, av) in a {
        for j in 0..d {
            out.push((i + d * j, kk + d * j, k * av));
        }
    }
}

/// Adds `ρ B` to the generator.
fn push_right(out: &mut Sparse, d: usize, b: &Sparse, k: C64) {
    for &(l, j, bv) in b {
        for i in 0..d {
            out.push((i + d * j, i + d * l, k * bv));
        }
    }
}

/// Adds the dissipator `c ρ c† − ½{c†c, ρ}`.
fn push_dissipator(out: &mut Sparse, d: usize, c: &CMatrix) {
    let cs = sparse(c);
    let cd = sparse(&c.adjoint());
    let cdc = sparse(&(&c.adjoint() * c));
    push_sandwich(out, d, &cs, &cd, C64::new(1.0, 0.0));
    push_left(out, d, &cdc, C64::new(-0.5, 0.0));
    push_right(out, d, &cdc, C64::new(-0.5, 0.0));
}

/// `L ρ = −i[H, ρ] + κ(2aρa† − a†aρ − ρa†a) + (γ/2) Σ_j (2σ₋ρσ₊ − σ₊σ₋ρ − ρσ₊σ₋)`.
pub fn liouvillian(params: &SystemParams, ops: &SystemOperators) -> Superoperator {
    let rates = params.rates();
    let d = ops.space.dim();
    let mut trip = Sparse::new();
    let h = sparse(ops.hamiltonian.matrix());
    push_left(&mut trip, d, &h, -I);
    push_right(&mut trip, d, &h, I);
    push_dissipator(&mut trip, d, &ops.a.matrix().scale_re((2.0 * rates.kappa).sqrt()));
    for sm in &ops.sigma_minus {
        push_dissipator(&mut trip, d, &sm.matrix().scale_re(rates.gamma.sqrt()));
    }
    Superoperator::from_csr(d, CsrMatrix::from_triplets(d * d, d * d, trip))
}
