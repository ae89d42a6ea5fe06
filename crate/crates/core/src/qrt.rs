//! Two-time quadrature correlations by the quantum regression theorem, the
//! wave-particle correlation `h_θ(τ)` built from them, and its spectrum.

use crate::error::{CqedError, Result};
use crate::linalg::{CMatrix, C64};
use crate::params::SystemParams;
use crate::spectrum::{self, SpectrumSeries64, TAIL_TOL};
use crate::steady::{converge_nmax, photon_number_observable, SteadyMoments, SteadySolution};

/// Where a correlation series came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Qrt,
    Trajectory,
}

/// `h_θ(τ)` on a grid symmetric about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    /// `−τ_max ..= τ_max`, µs.
    pub tau: Vec<f64>,
    pub h: Vec<f64>,
    pub lambda: f64,
    pub n_inc: f64,
    pub source: Source,
}

impl CorrelationSeries {
    /// Index of `τ = 0`.
    pub fn center(&self) -> usize {
        self.tau.len() / 2
    }

    pub fn dtau(&self) -> f64 {
        self.tau[1] - self.tau[0]
    }

    /// Samples with `τ ≥ 0`.
    pub fn positive(&self) -> (&[f64], &[f64]) {
        let c = self.center();
        (&self.tau[c..], &self.h[c..])
    }

    /// The part with `|τ| ≤ tau_max`.
    pub fn truncated(&self, tau_max: f64) -> Self {
        let keep = |t: &f64| t.abs() <= tau_max * (1.0 + 1e-12);
        let (lo, hi) = (self.tau.iter().position(keep).unwrap_or(0), self.tau.iter().rposition(keep).unwrap_or(0));
        Self { tau: self.tau[lo..=hi].to_vec(), h: self.h[lo..=hi].to_vec(), ..self.clone() }
    }

    /// Samples with `τ ≤ 0`, reordered so the first entry is `τ = 0`.
    pub fn negative_mirrored(&self) -> Vec<f64> {
        self.h[..=self.center()].iter().rev().copied().collect()
    }
}

/// Uniform `τ ≥ 0` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauGrid {
    pub dtau: f64,
    pub steps: usize,
}

impl TauGrid {
    /// `dτ = 1/(20 max(g, κ, γ))` and `τ_max` twelve envelope time constants,
    /// `12 / ((κ + γ/2)/2)` in angular units.
    pub fn default_for(params: &SystemParams) -> Self {
        let dtau = 1.0 / (20.0 * params.g.max(params.kappa).max(params.gamma));
        let r = params.rates();
        let tau_max = 12.0 / ((r.kappa + r.gamma / 2.0) / 2.0);
        Self { dtau, steps: (tau_max / dtau).ceil() as usize }
    }

    pub fn tau_max(&self) -> f64 {
        self.dtau * self.steps as f64
    }

    pub fn doubled(&self) -> Self {
        Self { dtau: self.dtau, steps: 2 * self.steps }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| k as f64 * self.dtau).collect()
    }
}

/// `Tr[A X]` for column-stacked `X`.
fn trace_with(a: &CMatrix, x: &[C64]) -> C64 {
    let d = a.rows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += a[(j, i)] * x[i + d * j];
        }
    }
    acc
}

/// Seeded vectors of the regression, advanced step by step.
struct Regression<'a> {
    sol: &'a SteadySolution,
    delta: CMatrix,
    phase: C64,
    x1: Vec<C64>,
    x2: Vec<C64>,
    out: Vec<f64>,
}

impl<'a> Regression<'a> {
    fn new(sol: &'a SteadySolution, theta: f64) -> Self {
        let a = sol.ops.a.matrix();
        let d = a.rows();
        let rho = sol.rho.matrix();
        let delta = a - &CMatrix::identity(d).scale(sol.moments.lambda);
        let x1 = (&delta * rho).vectorize();
        let x2 = (rho * &delta.adjoint()).vectorize();
        let mut r = Self { sol, delta, phase: C64::from_polar(1.0, -2.0 * theta), x1, x2, out: Vec::new() };
        r.record();
        r
    }

    fn record(&mut self) {
        let g1 = trace_with(&self.delta, &self.x1);
        let g2 = trace_with(&self.delta, &self.x2);
        self.out.push(0.25 * (2.0 * (self.phase * g1).re + 2.0 * g2.re));
    }

    fn extend_to(&mut self, grid: TauGrid) -> Result<&[f64]> {
        while self.out.len() <= grid.steps {
            self.x1 = self.sol.liouvillian.propagate(&self.x1, grid.dtau)?;
            self.x2 = self.sol.liouvillian.propagate(&self.x2, grid.dtau)?;
            self.record();
        }
        Ok(&self.out[..=grid.steps])
    }
}

/// `C_N(τ) = ⟨:ΔQ_θ(0) ΔQ_θ(τ):⟩` on `τ = k dτ`, k = 0..=steps.
pub fn two_time_corr(sol: &SteadySolution, theta: f64, grid: TauGrid) -> Result<Vec<f64>> {
    Ok(Regression::new(sol, theta).extend_to(grid)?.to_vec())
}

/// `h(τ) = 1 + 2 C_N(|τ|) / (λ² + n_inc)`, mirrored onto negative τ.
pub fn h_from_qrt(c_n: &[f64], dtau: f64, moments: &SteadyMoments) -> Result<CorrelationSeries> {
    let lambda = moments.lambda.norm();
    if !(lambda > 0.0) {
        return Err(CqedError::DarkField(lambda));
    }
    let denom = lambda * lambda + moments.n_inc;
    let n = c_n.len() - 1;
    let mut tau = Vec::with_capacity(2 * n + 1);
    let mut h = Vec::with_capacity(2 * n + 1);
    for k in (1..=n).rev() {
        tau.push(-(k as f64) * dtau);
        h.push(1.0 + 2.0 * c_n[k] / denom);
    }
    for (k, c) in c_n.iter().enumerate() {
        tau.push(k as f64 * dtau);
        h.push(1.0 + 2.0 * c / denom);
    }
    Ok(CorrelationSeries { tau, h, lambda, n_inc: moments.n_inc, source: Source::Qrt })
}

/// `h` on the default grid, lengthened by doubling until the tail has decayed
/// below [`TAIL_TOL`] (at most eight doublings).
pub fn qrt_h(sol: &SteadySolution, theta: f64) -> Result<CorrelationSeries> {
    qrt_h_from(sol, theta, TauGrid::default_for(&sol.params))
}

pub fn qrt_h_from(sol: &SteadySolution, theta: f64, mut grid: TauGrid) -> Result<CorrelationSeries> {
    let mut reg = Regression::new(sol, theta);
    for _ in 0..=8 {
        let series = h_from_qrt(reg.extend_to(grid)?, grid.dtau, &sol.moments)?;
        let residual = spectrum::tail_residual(series.positive().1);
        if residual < TAIL_TOL {
            return Ok(series);
        }
        grid = grid.doubled();
    }
    let series = h_from_qrt(reg.extend_to(grid)?, grid.dtau, &sol.moments)?;
    Err(CqedError::TailNotDecayed { residual: spectrum::tail_residual(series.positive().1), tolerance: TAIL_TOL })
}

/// Spectrum of squeezing from the `τ ≥ 0` half of a noiseless series.
pub fn spectrum_of(series: &CorrelationSeries, flux: f64, nu: &[f64]) -> Result<SpectrumSeries64> {
    let (tau, h) = series.positive();
    spectrum::spectrum(tau, h, flux, nu, TAIL_TOL)
}

/// Steady state, `h_θ` and `S(θ, ν)` in one call.
#[derive(Debug, Clone)]
pub struct QrtResult {
    pub solution: SteadySolution,
    pub h: CorrelationSeries,
    pub spectrum: SpectrumSeries64,
}

pub fn qrt_spectrum(params: &SystemParams, nu: &[f64]) -> Result<QrtResult> {
    let solution = SteadySolution::solve(params)?;
    let h = qrt_h(&solution, params.theta)?;
    let spectrum = spectrum_of(&h, solution.moments.flux, nu)?;
    Ok(QrtResult { solution, h, spectrum })
}

/// Zero-frequency peak width at one drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwhmPoint {
    pub n_max: usize,
    pub x_intensity: f64,
    /// MHz; `None` without a zero-frequency peak.
    pub fwhm: Option<f64>,
}

/// Picks `n_max` by photon-number convergence to `nmax_tol`, then measures
/// the FWHM of the QRT spectrum on `nu`.
pub fn fwhm_point(params: &SystemParams, nu: &[f64], nmax_tol: f64) -> Result<FwhmPoint> {
    let n_max = converge_nmax(params, photon_number_observable, nmax_tol)?;
    let r = qrt_spectrum(&params.with_n_max(n_max), nu)?;
    let fwhm = match spectrum::fwhm_zero_peak(nu, &r.spectrum.s) {
        Ok(w) => Some(w),
        Err(CqedError::NoZeroFrequencyPeak) => None,
        Err(e) => return Err(e),
    };
    Ok(FwhmPoint { n_max, x_intensity: r.solution.moments.x_intensity, fwhm })
}

/// Time-ordered wave-particle correlation on `τ = k dτ`, `|k| ≤ steps`:
/// `⟨Â_θ(τ)⟩` after a photon count for `τ ≥ 0`, and `⟨â†â(|τ|)⟩` after a
/// field measurement for `τ < 0`, both over `n̄ λ`. Unlike [`h_from_qrt`]
/// this is not symmetric by construction; the two orders agree in the weak
/// field limit.
pub fn wave_particle_h(sol: &SteadySolution, theta: f64, dtau: f64, steps: usize) -> Result<CorrelationSeries> {
    let lambda = sol.moments.lambda.norm();
    if !(lambda > 0.0) {
        return Err(CqedError::DarkField(lambda));
    }
    let a = sol.ops.a.matrix();
    let ad = a.adjoint();
    let rho = sol.rho.matrix();
    let phase = C64::from_polar(1.0, -theta);
    let quad = (&a.scale(phase) + &ad.scale(phase.conj())).scale_re(0.5);
    let number = &ad * a;
    let scale = sol.moments.n_bar * lambda;
    let mut after_count = (&(a * rho) * &ad).vectorize();
    let mut after_field = (&(a * rho).scale(phase) + &(rho * &ad).scale(phase.conj())).scale_re(0.5).vectorize();
    let (mut pos, mut neg) = (Vec::with_capacity(steps + 1), Vec::with_capacity(steps + 1));
    for k in 0..=steps {
        if k > 0 {
            after_count = sol.liouvillian.propagate(&after_count, dtau)?;
            after_field = sol.liouvillian.propagate(&after_field, dtau)?;
        }
        pos.push(trace_with(&quad, &after_count).re / scale);
        neg.push(trace_with(&number, &after_field).re / scale);
    }
    let tau = (-(steps as i64)..=steps as i64).map(|k| k as f64 * dtau).collect();
    let h = neg[1..].iter().rev().chain(&pos).copied().collect();
    Ok(CorrelationSeries { tau, h, lambda, n_inc: sol.moments.n_inc, source: Source::Qrt })
}
