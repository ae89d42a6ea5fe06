//! System parameters and the dimensionless scales built from them.
//!
//! Rates are entered the way experimental papers quote them: as ordinary
//! frequencies in MHz (the value of `g / 2π`, `κ / 2π`, ...). They are
//! converted to angular units (rad/µs) exactly once, by [`SystemParams::rates`].

use std::f64::consts::TAU;

use crate::error::{CqedError, Result};
use crate::scalar::Real;

/// Physical inputs for one cavity QED configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Atom-field coupling, MHz (`g / 2π`).
    pub g: f64,
    /// Cavity field decay, MHz.
    pub kappa: f64,
    /// Atomic inversion decay, MHz.
    pub gamma: f64,
    /// Drive amplitude, MHz.
    pub epsilon: f64,
    /// Number of atoms, 1 or 2.
    pub n_atoms: usize,
    /// Photon-number truncation.
    pub n_max: usize,
    /// Fraction of the output tapped to the photon counter.
    pub r: f64,
    /// Local oscillator phase, radians.
    pub theta: f64,
    /// Homodyne detector bandwidth, MHz.
    pub gamma_bw: f64,
    /// Homodyne coupling efficiency.
    pub eta: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            g: 38.0,
            kappa: 8.7,
            gamma: 3.0,
            epsilon: 0.0,
            n_atoms: 1,
            n_max: 3,
            r: 0.5,
            theta: 0.0,
            gamma_bw: 100.0,
            eta: 1.0,
        }
    }
}

/// Rates in angular units (rad/µs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub gamma_bw: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(CqedError::InvalidParams(format!("g must be >= 0, got {}", self.g)));
        }
        let positive = [
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("Gamma_bw", self.gamma_bw),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CqedError::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(CqedError::InvalidParams(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        self.validate_structure()?;
        if !(0.0..=1.0).contains(&self.r) {
            return Err(CqedError::InvalidParams(format!("r must lie in [0, 1], got {}", self.r)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(CqedError::InvalidParams(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !self.theta.is_finite() {
            return Err(CqedError::InvalidParams("theta must be finite".into()));
        }
        Ok(())
    }

    /// Checks only the fields that determine the Hilbert space.
    pub fn validate_structure(&self) -> Result<()> {
        if !(1..=2).contains(&self.n_atoms) {
            return Err(CqedError::InvalidParams(format!("N must be 1 or 2, got {}", self.n_atoms)));
        }
        if self.n_max < 1 {
            return Err(CqedError::InvalidParams("n_max must be >= 1".into()));
        }
        Ok(())
    }

    pub fn rates(&self) -> Rates {
        Rates {
            g: TAU * self.g,
            kappa: TAU * self.kappa,
            gamma: TAU * self.gamma,
            epsilon: TAU * self.epsilon,
            gamma_bw: TAU * self.gamma_bw,
        }
    }

    /// Copy with a different drive, expressed as `ε / κ`.
    pub fn with_drive_ratio(&self, eps_over_kappa: f64) -> Self {
        Self { epsilon: eps_over_kappa * self.kappa, ..self.clone() }
    }

    pub fn with_n_max(&self, n_max: usize) -> Self {
        Self { n_max, ..self.clone() }
    }

    pub fn derived<T: Real>(&self) -> DerivedParams<T> {
        DerivedParams::new(
            T::lit(self.g),
            T::lit(self.kappa),
            T::lit(self.gamma),
            T::lit(self.epsilon),
            self.n_atoms,
        )
    }
}

/// Cooperativities, saturation photon number and the dimensionless field scales.
///
/// All of these are ratios of rates, so they are the same whether computed
/// from ordinary or angular frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams<T: Real> {
    pub c1: T,
    pub n0: T,
    pub c: T,
    pub c1_prime: T,
    /// Empty-cavity field `ε / (κ √n₀)`.
    pub y: T,
    pub y_intensity: T,
    /// Intracavity field `⟨a⟩ / √n₀`, once a steady state is known.
    pub x: Option<T>,
    /// Intracavity intensity `⟨a†a⟩ / n₀`, once a steady state is known.
    pub x_intensity: Option<T>,
}

impl<T: Real> DerivedParams<T> {
    pub fn new(g: T, kappa: T, gamma: T, epsilon: T, n_atoms: usize) -> Self {
        let two = T::lit(2.0);
        let c1 = g * g / (kappa * gamma);
        let n0 = gamma * gamma / (T::lit(8.0) * g * g);
        let c = T::lit(n_atoms as f64) * c1;
        let c1_prime = c1 / (T::one() + gamma / (two * kappa));
        let y = epsilon / (kappa * n0.sqrt());
        Self { c1, n0, c, c1_prime, y, y_intensity: y * y, x: None, x_intensity: None }
    }

    /// Fills `x` and `X` from steady-state `⟨a⟩` (real part) and `⟨a†a⟩`.
    pub fn with_moments(mut self, lambda: T, n_bar: T) -> Self {
        self.x = Some(lambda / self.n0.sqrt());
        self.x_intensity = Some(n_bar / self.n0);
        self
    }
}
