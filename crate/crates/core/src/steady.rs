//! Steady state of the master equation, its field moments, truncation
//! convergence and drive calibration.

use faer::complex_native::c64;
use faer::prelude::SpSolver;
use faer::sparse::SparseColMat;
use faer::{Mat, Side};

use crate::error::{CqedError, Result};
use crate::hilbert::SystemOperators;
use crate::liouvillian::{liouvillian, Superoperator};
use crate::linalg::{CMatrix, C64};
use crate::params::SystemParams;

const TRACE_TOL: f64 = 1e-10;
const HERMITICITY_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;
/// Singular values below this fraction of the largest count toward the null space.
const NULL_SPACE_REL_TOL: f64 = 1e-9;
/// Largest Liouville-space dimension `d²` solved by dense SVD; larger
/// systems take the LU route.
pub const SVD_MAX_LIOUVILLE_DIM: usize = 400;

/// A validated density matrix.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: CMatrix,
    trace: f64,
    hermiticity_defect: f64,
    min_eigenvalue: f64,
}

impl DensityOperator {
    /// Checks trace, Hermiticity and positivity, then stores the Hermitian part.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(CqedError::SteadyState(format!("trace {trace} differs from 1")));
        }
        let hermiticity_defect = matrix.hermiticity_defect();
        if hermiticity_defect > HERMITICITY_TOL {
            return Err(CqedError::SteadyState(format!(
                "hermiticity defect {hermiticity_defect:.3e}"
            )));
        }
        let hermitian = (&matrix + &matrix.adjoint()).scale_re(0.5);
        let evals = hermitian.to_faer().selfadjoint_eigenvalues(Side::Lower);
        let min_eigenvalue = evals.iter().copied().fold(f64::INFINITY, f64::min);
        if min_eigenvalue < -POSITIVITY_TOL {
            return Err(CqedError::SteadyState(format!(
                "negative eigenvalue {min_eigenvalue:.3e} beyond truncation tolerance"
            )));
        }
        Ok(Self { matrix: hermitian, trace: trace.re, hermiticity_defect, min_eigenvalue })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.hermiticity_defect
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn expectation(&self, op: &CMatrix) -> C64 {
        (op * &self.matrix).trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Eigenvector of the largest eigenvalue, phased so its largest component is real positive.
    pub fn dominant_state(&self) -> (Vec<C64>, f64) {
        let eig = self.matrix.to_faer().selfadjoint_eigendecomposition(Side::Lower);
        let n = self.dim();
        let s = eig.s().column_vector();
        let u = eig.u();
        let mut best = 0;
        for k in 1..n {
            if s.read(k).re > s.read(best).re {
                best = k;
            }
        }
        let mut v: Vec<C64> = (0..n)
            .map(|i| {
                let z = u.read(i, best);
                C64::new(z.re, z.im)
            })
            .collect();
        let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(C64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        for z in &mut v {
            *z *= phase;
        }
        (v, s.read(best).re)
    }
}

fn finish(l: &Superoperator, vec: &[C64]) -> Result<DensityOperator> {
    let d = l.dim();
    let mut rho = CMatrix::unvectorize(vec, d);
    let tr = rho.trace();
    if tr.norm() == 0.0 {
        return Err(CqedError::SteadyState("null vector has zero trace".into()));
    }
    rho = rho.scale(C64::new(1.0, 0.0) / tr);
    let residual = l.apply(&rho).max_abs();
    if residual > RESIDUAL_TOL {
        return Err(CqedError::SteadyState(format!("residual |Lρ| = {residual:.3e}")));
    }
    DensityOperator::new(rho)
}

/// Solves `L ρ = 0` via the right singular vector of the smallest singular
/// value, then normalizes the trace.
pub fn steady_state(l: &Superoperator) -> Result<DensityOperator> {
    let dense = l.csr().to_faer();
    let svd = dense.svd();
    let s = svd.s_diagonal();
    let n = s.nrows();
    let s_max = s.read(0).re;
    let null_dim = (0..n).filter(|&k| s.read(k).re <= NULL_SPACE_REL_TOL * s_max).count();
    if null_dim != 1 {
        return Err(CqedError::NullSpace { found: null_dim });
    }
    let v = svd.v();
    let vec: Vec<C64> = (0..n)
        .map(|i| {
            let z = v.read(i, n - 1);
            C64::new(z.re, z.im)
        })
        .collect();
    finish(l, &vec)
}

/// Same fixed point by LU on the system with one equation replaced by
/// `Tr ρ = 1`. Much cheaper than the SVD but cannot detect a degenerate null
/// space; used inside sweeps and calibration loops.
pub fn steady_state_lu(l: &Superoperator) -> Result<DensityOperator> {
    let d = l.dim();
    let n = d * d;
    let mut trip: Vec<(usize, usize, c64)> =
        l.csr().triplets().into_iter().filter(|t| t.0 != 0).map(|(i, j, v)| (i, j, c64::new(v.re, v.im))).collect();
    trip.extend((0..d).map(|i| (0, i + d * i, c64::new(1.0, 0.0))));
    let a = SparseColMat::<usize, c64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| CqedError::SteadyState(format!("sparse assembly: {e:?}")))?;
    let lu = a.sp_lu().map_err(|e| CqedError::SteadyState(format!("sparse LU: {e:?}")))?;
    let mut b = Mat::<c64>::zeros(n, 1);
    b.write(0, 0, c64::new(1.0, 0.0));
    let x = lu.solve(&b);
    let vec: Vec<C64> = (0..n)
        .map(|i| {
            let z = x.read(i, 0);
            C64::new(z.re, z.im)
        })
        .collect();
    if vec.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CqedError::SteadyState("singular bordered system".into()));
    }
    finish(l, &vec)
}

/// Field moments of a steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyMoments {
    /// `⟨a⟩`.
    pub lambda: C64,
    /// `⟨a†a⟩`.
    pub n_bar: f64,
    /// Incoherent part `⟨Δa†Δa⟩ = n̄ − |λ|²`.
    pub n_inc: f64,
    /// `⟨a†a⟩ / n₀`.
    pub x_intensity: f64,
    /// Output photon flux `2κ⟨a†a⟩`, photons per µs.
    pub flux: f64,
    /// `⟨Δa Δa⟩`, needed for the equal-time quadrature variance.
    pub delta_a_squared: C64,
}

pub fn moments(rho: &DensityOperator, params: &SystemParams) -> SteadyMoments {
    let ops = SystemOperators::new(params).expect("density operator built from valid params");
    moments_with(rho, params, &ops)
}

pub fn moments_with(rho: &DensityOperator, params: &SystemParams, ops: &SystemOperators) -> SteadyMoments {
    let a = ops.a.matrix();
    let lambda = rho.expectation(a);
    let n_bar = rho.expectation(ops.number.matrix()).re;
    let aa = rho.expectation(&(a * a));
    let n0 = params.derived::<f64>().n0;
    SteadyMoments {
        lambda,
        n_bar,
        n_inc: n_bar - lambda.norm_sqr(),
        x_intensity: n_bar / n0,
        flux: 2.0 * params.rates().kappa * n_bar,
        delta_a_squared: aa - lambda * lambda,
    }
}

/// Operators, generator and steady state for one parameter set.
#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub params: SystemParams,
    pub ops: SystemOperators,
    pub liouvillian: Superoperator,
    pub rho: DensityOperator,
    pub moments: SteadyMoments,
}

impl SteadySolution {
    /// SVD solve with the null-space dimension check for small systems, LU
    /// for larger ones. Both verify the residual, trace, Hermiticity and
    /// positivity.
    pub fn solve(params: &SystemParams) -> Result<Self> {
        Self::solve_with(params, |l| {
            if l.dim() * l.dim() <= SVD_MAX_LIOUVILLE_DIM {
                steady_state(l)
            } else {
                steady_state_lu(l)
            }
        })
    }

    /// Always the SVD route.
    pub fn solve_svd(params: &SystemParams) -> Result<Self> {
        Self::solve_with(params, steady_state)
    }

    /// LU route, for sweeps.
    pub fn solve_fast(params: &SystemParams) -> Result<Self> {
        Self::solve_with(params, steady_state_lu)
    }

    fn solve_with(params: &SystemParams, solver: impl Fn(&Superoperator) -> Result<DensityOperator>) -> Result<Self> {
        params.validate()?;
        let ops = SystemOperators::new(params)?;
        let l = liouvillian(params, &ops);
        let rho = solver(&l)?;
        let moments = moments_with(&rho, params, &ops);
        Ok(Self { params: params.clone(), ops, liouvillian: l, rho, moments })
    }
}

pub const N_MAX_FLOOR: usize = 2;
pub const N_MAX_CAP: usize = 40;

/// Smallest `n_max` such that raising the truncation by two changes
/// `observable` by less than `rel_tol` (relative).
pub fn converge_nmax<F>(params: &SystemParams, mut observable: F, rel_tol: f64) -> Result<usize>
where
    F: FnMut(&SystemParams) -> Result<f64>,
{
    let mut cache: Vec<Option<f64>> = vec![None; N_MAX_CAP + 1];
    let mut eval = |n: usize, cache: &mut Vec<Option<f64>>| -> Result<f64> {
        if let Some(v) = cache[n] {
            return Ok(v);
        }
        let v = observable(&params.with_n_max(n))?;
        cache[n] = Some(v);
        Ok(v)
    };
    for n in N_MAX_FLOOR..=N_MAX_CAP - 2 {
        let lo = eval(n, &mut cache)?;
        let hi = eval(n + 2, &mut cache)?;
        let scale = hi.abs().max(lo.abs());
        if scale == 0.0 || (hi - lo).abs() <= rel_tol * scale {
            return Ok(n);
        }
    }
    Err(CqedError::NmaxNotConverged { cap: N_MAX_CAP })
}

/// Mean photon number observable for [`converge_nmax`].
pub fn photon_number_observable(p: &SystemParams) -> Result<f64> {
    Ok(SteadySolution::solve_fast(p)?.moments.n_bar)
}

/// Finds the drive `ε` giving steady-state intensity `X = target_x`,
/// searching `ε ∈ [0, 20κ]`.
///
/// Bracketing Illinois iteration on `√X(ε) − √X_target`, which is close to
/// linear in the weak-drive regime.
pub fn calibrate_drive(params: &SystemParams, target_x: f64) -> Result<(SystemParams, SteadyMoments)> {
    if !(target_x > 0.0 && target_x.is_finite()) {
        return Err(CqedError::Calibration(format!("target X must be > 0, got {target_x}")));
    }
    let goal = target_x.sqrt();
    let f = |eps: f64| -> Result<(f64, SteadyMoments)> {
        let m = SteadySolution::solve_fast(&SystemParams { epsilon: eps, ..params.clone() })?.moments;
        Ok((m.x_intensity.max(0.0).sqrt() - goal, m))
    };
    let (mut lo, mut hi) = (0.0, 20.0 * params.kappa);
    let mut f_lo = -goal;
    let (mut f_hi, mut m_hi) = f(hi)?;
    if f_hi < 0.0 {
        return Err(CqedError::Calibration(format!(
            "target X = {target_x} not reached at epsilon = 20 kappa (X = {:.4e})",
            m_hi.x_intensity
        )));
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let mut eps = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(eps > lo && eps < hi) {
            eps = 0.5 * (lo + hi);
        }
        let (fe, m) = f(eps)?;
        if (m.x_intensity - target_x).abs() <= 1e-9 * target_x || (hi - lo) <= 1e-14 * hi {
            return Ok((SystemParams { epsilon: eps, ..params.clone() }, m));
        }
        if fe < 0.0 {
            lo = eps;
            f_lo = fe;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = eps;
            f_hi = fe;
            m_hi = m;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Err(CqedError::Calibration(format!("no convergence; last X = {:.6e}", m_hi.x_intensity)))
}

/// [`calibrate_drive`] with `n_max` chosen by [`converge_nmax`] on the photon
/// number at the calibrated drive, repeated until the truncation settles.
pub fn calibrate_converged(params: &SystemParams, target_x: f64, nmax_tol: f64) -> Result<(SystemParams, SteadyMoments)> {
    let mut p = params.clone();
    for _ in 0..6 {
        let n = converge_nmax(&p, photon_number_observable, nmax_tol)?;
        let (q, m) = calibrate_drive(&p.with_n_max(n), target_x)?;
        if converge_nmax(&q, photon_number_observable, nmax_tol)? == n {
            return Ok((q, m));
        }
        p = q;
    }
    Err(CqedError::NmaxNotConverged { cap: N_MAX_CAP })
}
