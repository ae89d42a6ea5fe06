//! Closed-form weak-field results: the equilibrium pure state to second order
//! in the field, and the regression of the conditioned field back to steady
//! state after a cavity emission or a spontaneous emission.
//!
//! Nothing here feeds the numerical pipeline; it serves as an independent
//! oracle for it.

use crate::error::{CqedError, Result};
use crate::hilbert::HilbertSpace;
use crate::linalg::C64;
use crate::params::SystemParams;
use crate::scalar::Real;
use crate::state::PureState;

/// Which collapse started the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionKind {
    Cavity,
    Spontaneous,
}

/// Weak-field constants. Frequencies are ordinary (MHz); everything else is
/// dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakFieldConstants<T: Real> {
    pub n_atoms: usize,
    /// `φ / λ = −2√N g / γ`.
    pub phi_per_lambda: T,
    pub alpha: T,
    pub beta: T,
    pub zeta_cav: T,
    pub zeta_spont: T,
    /// Vacuum Rabi frequency `Ω`, MHz.
    pub omega: T,
    /// Envelope decay rate `(κ + γ/2)/2`, MHz.
    pub envelope_rate: T,
    pub phi_cav: T,
    pub phi_spont: T,
    pub q: T,
    pub c1: T,
    pub c: T,
    pub c1_prime: T,
}

impl<T: Real> WeakFieldConstants<T> {
    pub fn new(g: T, kappa: T, gamma: T, n_atoms: usize) -> Result<Self> {
        let (one, two, four) = (T::one(), T::lit(2.0), T::lit(4.0));
        let n = T::lit(n_atoms as f64);
        let c1 = g * g / (kappa * gamma);
        let c = n * c1;
        let c1_prime = c1 / (one + gamma / (two * kappa));
        let denom = one + two * c - two * c1_prime;
        let alpha = one - two * c1_prime;
        let beta = (one + two * c) / denom;
        let zeta_cav = -four * c1_prime * c / denom;
        let zeta_spont = two * c1_prime / denom;
        let detune = kappa - gamma / two;
        let omega_sq = n * g * g - detune * detune / four;
        if !(omega_sq > T::zero()) {
            return Err(CqedError::ImaginaryRabi);
        }
        let omega = omega_sq.sqrt();
        let q = (one - one / n).sqrt();
        let phi_cav = -(two * kappa + gamma) / (four * omega);
        let phi_spont = (two * kappa - gamma) / (four * omega)
            + two * n * g * g * (q * beta / two.sqrt() - one) / (gamma * omega * (beta - one));
        Ok(Self {
            n_atoms,
            phi_per_lambda: -two * n.sqrt() * g / gamma,
            alpha,
            beta,
            zeta_cav,
            zeta_spont,
            omega,
            envelope_rate: (kappa + gamma / two) / two,
            phi_cav,
            phi_spont,
            q,
            c1,
            c,
            c1_prime,
        })
    }

    pub fn from_params(params: &SystemParams) -> Result<Self> {
        Self::new(T::lit(params.g), T::lit(params.kappa), T::lit(params.gamma), params.n_atoms)
    }

    pub fn alpha_beta(&self) -> T {
        self.alpha * self.beta
    }

    /// Ratio of spontaneous to cavity emission probabilities, `2NC₁`.
    pub fn emission_ratio(&self) -> T {
        T::lit(2.0) * self.c
    }

    pub fn zeta(&self, kind: EmissionKind) -> T {
        match kind {
            EmissionKind::Cavity => self.zeta_cav,
            EmissionKind::Spontaneous => self.zeta_spont,
        }
    }

    pub fn big_phi(&self, kind: EmissionKind) -> T {
        match kind {
            EmissionKind::Cavity => self.phi_cav,
            EmissionKind::Spontaneous => self.phi_spont,
        }
    }

    /// `f(τ) = e^{−(κ+γ/2)τ/2} (cos Ωτ − Φ sin Ωτ)`, τ in µs.
    pub fn f(&self, kind: EmissionKind, tau: T) -> T {
        let tau_rad = T::lit(std::f64::consts::TAU) * tau;
        let wt = self.omega * tau_rad;
        (-self.envelope_rate * tau_rad).exp() * (wt.cos() - self.big_phi(kind) * wt.sin())
    }

    /// Conditioned field over its steady value, `1 + ζ f(τ)`.
    pub fn regression(&self, kind: EmissionKind, tau: T) -> T {
        T::one() + self.zeta(kind) * self.f(kind, tau)
    }
}

pub type WeakFieldConstants64 = WeakFieldConstants<f64>;
pub type WeakFieldConstants32 = WeakFieldConstants<f32>;

pub fn constants(params: &SystemParams) -> Result<WeakFieldConstants64> {
    WeakFieldConstants::from_params(params)
}

/// `⟨Â₀⟩_c / λ` sampled on a τ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionWaveform<T: Real> {
    pub kind: EmissionKind,
    pub tau: Vec<T>,
    pub values: Vec<T>,
}

pub fn waveform<T: Real>(c: &WeakFieldConstants<T>, kind: EmissionKind, tau_grid: &[T]) -> RegressionWaveform<T> {
    RegressionWaveform {
        kind,
        tau: tau_grid.to_vec(),
        values: tau_grid.iter().map(|&t| c.regression(kind, t)).collect(),
    }
}

/// `2NC₁`.
pub fn emission_ratio(params: &SystemParams) -> f64 {
    2.0 * params.derived::<f64>().c
}

/// Equilibrium state to second order in `λ`:
/// `|0G⟩ + λ|1G⟩ + (λ²αβ/√2)|2G⟩ + φ|0E⟩ + λφβ|1E⟩`, normalized. For two
/// atoms `|E⟩` is the symmetric one-excitation state.
pub fn equilibrium_state(params: &SystemParams, lambda: f64) -> Result<PureState> {
    params.validate()?;
    if params.n_max < 2 {
        return Err(CqedError::InvalidParams("equilibrium state needs n_max >= 2".into()));
    }
    let c: WeakFieldConstants64 = constants(params)?;
    let space = HilbertSpace::new(params.n_max, params.n_atoms)?;
    let phi = c.phi_per_lambda * lambda;
    let mut amps = vec![C64::new(0.0, 0.0); space.dim()];
    amps[space.index(0, 0)] = C64::new(1.0, 0.0);
    amps[space.index(1, 0)] = C64::new(lambda, 0.0);
    amps[space.index(2, 0)] = C64::new(lambda * lambda * c.alpha_beta() / 2f64.sqrt(), 0.0);
    let excited: Vec<usize> = (0..params.n_atoms).map(|j| 1usize << j).collect();
    let share = 1.0 / (excited.len() as f64).sqrt();
    for &bits in &excited {
        amps[space.index(0, bits)] = C64::new(phi * share, 0.0);
        amps[space.index(1, bits)] = C64::new(lambda * phi * c.beta * share, 0.0);
    }
    PureState::new(amps)
}
