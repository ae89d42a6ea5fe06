//! Cosine transform of `h − 1` into the spectrum of squeezing, and small
//! analysis helpers on sampled series: zero-peak width, oscillation
//! frequency, envelope decay.

use crate::error::{CqedError, Result};
use crate::scalar::Real;

/// `|h − 1|` must stay below this over the last tenth of the grid.
pub const TAIL_TOL: f64 = 1e-4;

/// `S(ν)` with vacuum level 0. `nu` in MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSeries<T: Real> {
    pub nu: Vec<T>,
    pub s: Vec<T>,
    /// Photon flux `F = 2κ⟨a†a⟩`, per µs.
    pub flux: T,
}

pub type SpectrumSeries64 = SpectrumSeries<f64>;

pub fn uniform_grid<T: Real>(start: T, step: T, n: usize) -> Vec<T> {
    (0..n).map(|k| start + step * T::lit(k as f64)).collect()
}

/// `∫ cos(2πντ) y(τ) dτ` by the trapezoidal rule on the (possibly
/// non-uniform) grid `tau`, for each `ν` in `nu`.
pub fn cosine_transform<T: Real>(tau: &[T], y: &[T], nu: &[T]) -> Vec<T> {
    assert_eq!(tau.len(), y.len());
    let two_pi = T::lit(std::f64::consts::TAU);
    let half = T::lit(0.5);
    nu.iter()
        .map(|&v| {
            let w = two_pi * v;
            let mut acc = T::zero();
            for k in 1..tau.len() {
                let a = (w * tau[k - 1]).cos() * y[k - 1];
                let b = (w * tau[k]).cos() * y[k];
                acc = acc + half * (tau[k] - tau[k - 1]) * (a + b);
            }
            acc
        })
        .collect()
}

/// Largest `|h − 1|` over the last tenth of the samples.
pub fn tail_residual<T: Real>(h: &[T]) -> T {
    let n = h.len();
    let start = n - (n / 10).max(1);
    h[start..].iter().fold(T::zero(), |m, &v| m.max((v - T::one()).abs()))
}

/// `S(ν) = 4F ∫₀^∞ cos(2πντ) [h(τ) − 1] dτ` from samples on `τ ≥ 0`.
///
/// `tail_tol` bounds `|h − 1|` over the last tenth of the grid; pass
/// [`TAIL_TOL`] for noiseless series.
pub fn spectrum<T: Real>(tau: &[T], h: &[T], flux: T, nu: &[T], tail_tol: T) -> Result<SpectrumSeries<T>> {
    if tau.len() < 2 || tau.len() != h.len() {
        return Err(CqedError::Grid("need at least two matching τ and h samples".into()));
    }
    if tau[0] != T::zero() || tau.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CqedError::Grid("τ grid must start at 0 and increase".into()));
    }
    let residual = tail_residual(h);
    if residual > tail_tol {
        return Err(CqedError::TailNotDecayed { residual: residual.as_f64(), tolerance: tail_tol.as_f64() });
    }
    let dev: Vec<T> = h.iter().map(|&v| v - T::one()).collect();
    let four_f = T::lit(4.0) * flux;
    let s = cosine_transform(tau, &dev, nu).into_iter().map(|v| four_f * v).collect();
    Ok(SpectrumSeries { nu: nu.to_vec(), s, flux })
}

/// Full width at half height of the peak at `ν = 0`, measured from the
/// grid minimum, with linear interpolation. A peak needs `S(0) > 0` and a
/// local maximum at the origin.
pub fn fwhm_zero_peak<T: Real>(nu: &[T], s: &[T]) -> Result<T> {
    if nu.len() < 3 || nu[0] != T::zero() {
        return Err(CqedError::Grid("ν grid must start at 0 with at least 3 points".into()));
    }
    if !(s[1] < s[0] && s[0] > T::zero()) {
        return Err(CqedError::NoZeroFrequencyPeak);
    }
    let base = s.iter().copied().fold(T::infinity(), T::min);
    let half = (s[0] + base) * T::lit(0.5);
    for k in 1..s.len() {
        if s[k] <= half {
            let t = (s[k - 1] - half) / (s[k - 1] - s[k]);
            let nu_half = nu[k - 1] + t * (nu[k] - nu[k - 1]);
            return Ok(T::lit(2.0) * nu_half);
        }
    }
    Err(CqedError::NoZeroFrequencyPeak)
}

/// Oscillation frequency (MHz) from the spacing of zero crossings of `y`,
/// ignoring the part of the series where `|y|` has fallen below
/// `floor · max|y|`. Exact for `e^{−rt}(A cos ωt + B sin ωt)`.
pub fn zero_crossing_frequency<T: Real>(tau: &[T], y: &[T], floor: T) -> Result<T> {
    let peak = y.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let limit = floor * peak;
    let last_strong = y.iter().rposition(|v| v.abs() >= limit).unwrap_or(0);
    let mut crossings = Vec::new();
    for k in 1..=last_strong.min(y.len() - 1) {
        if (y[k - 1] < T::zero()) != (y[k] < T::zero()) && y[k - 1] != y[k] {
            let t = y[k - 1] / (y[k - 1] - y[k]);
            crossings.push(tau[k - 1] + t * (tau[k] - tau[k - 1]));
        }
    }
    if crossings.len() < 3 {
        return Err(CqedError::Grid(format!("only {} zero crossings", crossings.len())));
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Ok(T::lit((crossings.len() - 1) as f64) / (T::lit(2.0) * span))
}

/// Local extrema of `y` as `(τ, y)`, refined by a parabola through the three
/// samples around each one.
pub fn extrema<T: Real>(tau: &[T], y: &[T]) -> Vec<(T, T)> {
    let mut out = Vec::new();
    let half = T::lit(0.5);
    for k in 1..y.len().saturating_sub(1) {
        let (a, b, c) = (y[k - 1], y[k], y[k + 1]);
        let is_max = b > a && b >= c;
        let is_min = b < a && b <= c;
        if !(is_max || is_min) {
            continue;
        }
        let denom = a - T::lit(2.0) * b + c;
        let shift = if denom != T::zero() { half * (a - c) / denom } else { T::zero() };
        let h = tau[k + 1] - tau[k];
        out.push((tau[k] + shift * h, b - T::lit(0.25) * (a - c) * shift));
    }
    out
}

/// Decay rate (MHz, ordinary frequency) of the envelope of an oscillation
/// about zero, from a straight-line fit of `ln|extremum|` against time.
pub fn fit_envelope_rate<T: Real>(tau: &[T], y: &[T]) -> Result<T> {
    let pts: Vec<(T, T)> = extrema(tau, y).into_iter().filter(|p| p.1 != T::zero()).map(|(t, v)| (t, v.abs().ln())).collect();
    if pts.len() < 3 {
        return Err(CqedError::Grid(format!("only {} extrema", pts.len())));
    }
    let slope = line_slope(&pts);
    Ok(-slope / T::lit(std::f64::consts::TAU))
}

pub fn line_slope<T: Real>(pts: &[(T, T)]) -> T {
    let n = T::lit(pts.len() as f64);
    let (sx, sy) = pts.iter().fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (mut num, mut den) = (T::zero(), T::zero());
    for &(x, y) in pts {
        num = num + (x - mx) * (y - my);
        den = den + (x - mx) * (x - mx);
    }
    num / den
}

/// `sqrt(mean((a − b)²) / mean(b²))`.
pub fn relative_rms<T: Real>(a: &[T], b: &[T]) -> T {
    let (mut num, mut den) = (T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        num = num + (x - y) * (x - y);
        den = den + y * y;
    }
    (num / den).sqrt()
}
