//! Wave-particle correlation from trajectory records: average the homodyne
//! photocurrent around cavity clicks, normalize to `h_θ(τ)`, check the
//! residual shot noise and transform to a spectrum.
//!
//! Two start sources are supported. Natural starts are the cavity counts of
//! long records. Triggered windows force a cavity collapse at a chosen time
//! and carry the pre-collapse count rate as a weight; the weighted mean over
//! windows estimates the same average as natural clicks and makes weak-drive
//! scenarios with very rare clicks tractable.

use rayon::prelude::*;

use crate::error::{CqedError, Result};
use crate::params::SystemParams;
use crate::qrt::{CorrelationSeries, Source};
use crate::spectrum::{self, SpectrumSeries64};
use crate::trajectory::{EventKind, TrajectoryRecord, TrajectorySystem, Window, WindowSpec};

/// Windows per reduction block. Fixed so that results do not depend on the
/// number of workers.
const BLOCK: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Start {
    pub record: usize,
    /// µs.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartClickSet {
    pub starts: Vec<Start>,
}

impl StartClickSet {
    pub fn n_s(&self) -> usize {
        self.starts.len()
    }
}

/// Mean current on a `τ` grid symmetric about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedCurrent {
    pub tau: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_s: usize,
    /// `(Σw)²/Σw²`; equals `n_s` for unweighted starts.
    pub n_eff: f64,
}

/// `k dt_s` for `k = −n..=n`, `n = round(τ_max/dt_s)`.
pub fn tau_grid(dt_s: f64, tau_max: f64) -> Vec<f64> {
    let n = (tau_max / dt_s).round() as i64;
    (-n..=n).map(|k| k as f64 * dt_s).collect()
}

/// Every cavity count with at least `τ_max` of record on both sides.
pub fn collect_starts(records: &[TrajectoryRecord], tau_max: f64) -> Result<StartClickSet> {
    let mut starts = Vec::new();
    for (k, rec) in records.iter().enumerate() {
        let end = rec.duration();
        for e in &rec.events {
            if e.kind == EventKind::CavityCount && e.time >= tau_max && e.time <= end - tau_max {
                starts.push(Start { record: k, time: e.time });
            }
        }
    }
    if starts.is_empty() {
        return Err(CqedError::NoStarts);
    }
    Ok(StartClickSet { starts })
}

/// `ℋ(τ) = (1/N_s) Σ_j i(t_j + τ)`, nearest sample.
pub fn average_current(records: &[TrajectoryRecord], starts: &StartClickSet, tau: &[f64]) -> Result<AveragedCurrent> {
    if starts.starts.is_empty() {
        return Err(CqedError::NoStarts);
    }
    let n = starts.n_s() as f64;
    let mut sum = vec![0.0; tau.len()];
    let mut sum_sq = vec![0.0; tau.len()];
    for s in &starts.starts {
        let rec = records.get(s.record).ok_or_else(|| CqedError::GridOutOfRange(format!("record {}", s.record)))?;
        let dt_s = rec.dt_s();
        for (k, &t) in tau.iter().enumerate() {
            let idx = ((s.time + t) / dt_s).round();
            if idx < 0.0 || idx as usize >= rec.current.len() {
                return Err(CqedError::GridOutOfRange(format!("τ = {t} µs around start at {} µs", s.time)));
            }
            let v = rec.current[idx as usize];
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr = sum_sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| if n > 1.0 { ((q / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt() } else { 0.0 })
        .collect();
    Ok(AveragedCurrent { tau: tau.to_vec(), mean, stderr, n_s: starts.n_s(), n_eff: n })
}

/// Weighted sums over windows, kept separately for the photocurrent and the
/// conditioned quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSums {
    pub pre: usize,
    pub dt_s: f64,
    pub count: usize,
    sw: f64,
    sw2: f64,
    current: Moments,
    field: Moments,
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    swx: Vec<f64>,
    sw2x: Vec<f64>,
    sw2x2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self { swx: vec![0.0; len], sw2x: vec![0.0; len], sw2x2: vec![0.0; len] }
    }

    fn push(&mut self, w: f64, x: &[f64]) {
        for (k, &v) in x.iter().enumerate() {
            self.swx[k] += w * v;
            self.sw2x[k] += w * w * v;
            self.sw2x2[k] += w * w * v * v;
        }
    }

    fn merge(&mut self, o: &Moments) {
        for k in 0..self.swx.len() {
            self.swx[k] += o.swx[k];
            self.sw2x[k] += o.sw2x[k];
            self.sw2x2[k] += o.sw2x2[k];
        }
    }

    /// Weighted mean and the delta-method standard error of the ratio estimator.
    fn finish(&self, sw: f64, sw2: f64) -> (Vec<f64>, Vec<f64>) {
        let mean: Vec<f64> = self.swx.iter().map(|v| v / sw).collect();
        let err = (0..mean.len())
            .map(|k| {
                let m = mean[k];
                let var = self.sw2x2[k] - 2.0 * m * self.sw2x[k] + m * m * sw2;
                var.max(0.0).sqrt() / sw
            })
            .collect();
        (mean, err)
    }
}

impl WindowSums {
    pub fn new(pre: usize, post: usize, dt_s: f64) -> Self {
        let len = pre + post + 1;
        Self { pre, dt_s, count: 0, sw: 0.0, sw2: 0.0, current: Moments::new(len), field: Moments::new(len) }
    }

    pub fn len(&self) -> usize {
        self.field.swx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn push(&mut self, w: &Window) -> Result<()> {
        if w.pre != self.pre || w.cond_field.len() != self.len() {
            return Err(CqedError::Grid("window shape differs from accumulator".into()));
        }
        self.count += 1;
        self.sw += w.weight;
        self.sw2 += w.weight * w.weight;
        if !w.current.is_empty() {
            self.current.push(w.weight, &w.current);
        }
        self.field.push(w.weight, &w.cond_field);
        Ok(())
    }

    pub fn merge(&mut self, o: &WindowSums) -> Result<()> {
        if o.pre != self.pre || o.len() != self.len() {
            return Err(CqedError::Grid("window shape differs from accumulator".into()));
        }
        self.count += o.count;
        self.sw += o.sw;
        self.sw2 += o.sw2;
        self.current.merge(&o.current);
        self.field.merge(&o.field);
        Ok(())
    }

    pub fn n_eff(&self) -> f64 {
        self.sw * self.sw / self.sw2
    }

    pub fn tau(&self) -> Vec<f64> {
        (0..self.len()).map(|k| (k as f64 - self.pre as f64) * self.dt_s).collect()
    }

    fn averaged(&self, m: &Moments) -> Result<AveragedCurrent> {
        if self.count == 0 || !(self.sw > 0.0) {
            return Err(CqedError::NoStarts);
        }
        let (mean, stderr) = m.finish(self.sw, self.sw2);
        Ok(AveragedCurrent { tau: self.tau(), mean, stderr, n_s: self.count, n_eff: self.n_eff() })
    }

    /// Weighted photocurrent average `ℋ(τ)`.
    pub fn current_average(&self) -> Result<AveragedCurrent> {
        self.averaged(&self.current)
    }

    /// Weighted average of the conditioned quadrature `⟨Â_θ⟩_c(τ)`.
    pub fn field_average(&self) -> Result<AveragedCurrent> {
        self.averaged(&self.field)
    }
}

/// Runs windows `first..first + count` and reduces them in blocks of fixed
/// size, blocks combined in ascending order.
pub fn collect_windows(
    sys: &TrajectorySystem,
    base_seed: u64,
    first: u64,
    count: u64,
    spec: &WindowSpec,
) -> Result<WindowSums> {
    let (pre, post) = (spec.pre, spec.post);
    let dt_s = sys.timing().dt_s();
    let n_blocks = count.div_ceil(BLOCK);
    let blocks: Vec<Result<WindowSums>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = WindowSums::new(pre, post, dt_s);
            let lo = first + b * BLOCK;
            let hi = (lo + BLOCK).min(first + count);
            for k in lo..hi {
                acc.push(&sys.run_window(base_seed, k, spec)?)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = WindowSums::new(pre, post, dt_s);
    for b in blocks {
        total.merge(&b?)?;
    }
    Ok(total)
}

/// `h_θ(τ) = ℋ(τ) / (λ √(8κ(1−r)))`.
pub fn h_from_current(avg: &AveragedCurrent, lambda: f64, params: &SystemParams) -> Result<CorrelationSeries> {
    let scale = current_scale(lambda, params)?;
    let r = params.rates();
    let fastest = (r.g * (params.n_atoms as f64).sqrt()).max(r.kappa);
    if r.gamma_bw < 10.0 * fastest {
        log::warn!(
            "detector bandwidth {} MHz is not much larger than max(g√N, κ) = {} MHz; h is filtered",
            params.gamma_bw,
            fastest / std::f64::consts::TAU
        );
    }
    Ok(CorrelationSeries {
        tau: avg.tau.clone(),
        h: avg.mean.iter().map(|v| v / scale).collect(),
        lambda,
        n_inc: f64::NAN,
        source: Source::Trajectory,
    })
}

/// Standard error of `h` at each `τ`.
pub fn h_stderr(avg: &AveragedCurrent, lambda: f64, params: &SystemParams) -> Result<Vec<f64>> {
    let scale = current_scale(lambda, params)?;
    Ok(avg.stderr.iter().map(|v| v / scale).collect())
}

fn current_scale(lambda: f64, params: &SystemParams) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(CqedError::DarkField(lambda));
    }
    let tap = 1.0 - params.r;
    if !(tap > 0.0) {
        return Err(CqedError::InvalidParams("homodyne tap 1 − r must be positive".into()));
    }
    Ok(lambda * (8.0 * params.rates().kappa * tap).sqrt())
}

/// `h(τ) = ⟨Â_θ⟩_c(τ)/λ` from the averaged conditioned quadrature.
pub fn h_from_field(avg: &AveragedCurrent, lambda: f64) -> Result<CorrelationSeries> {
    if !(lambda > 0.0) {
        return Err(CqedError::DarkField(lambda));
    }
    Ok(CorrelationSeries {
        tau: avg.tau.clone(),
        h: avg.mean.iter().map(|v| v / lambda).collect(),
        lambda,
        n_inc: f64::NAN,
        source: Source::Trajectory,
    })
}

/// Fitted `A e^{−rate·τ}` autocorrelation of `h − 1` in the signal-free band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotNoiseFit {
    /// τ = 0 variance.
    pub amplitude: f64,
    /// Per µs (angular).
    pub rate: f64,
    /// `Γ/(16 η N_s κ(1−r) λ²)`.
    pub expected_amplitude: f64,
    /// Samples used, both sides together.
    pub band_samples: usize,
}

impl ShotNoiseFit {
    pub fn sigma(&self) -> f64 {
        self.amplitude.max(0.0).sqrt()
    }
}

/// `|τ|` where the band starts: ten envelope times `2/(κ + γ/2)` (angular).
pub fn signal_free_start(params: &SystemParams) -> f64 {
    let r = params.rates();
    10.0 * 2.0 / (r.kappa + r.gamma / 2.0)
}

/// Fits the autocorrelation of `h − 1` over `|τ| ≥` [`signal_free_start`]
/// with `A e^{−rate τ}` by a log-linear fit over lags up to half the expected
/// decay time. `n_s` enters only the expected amplitude.
pub fn shot_noise_check(h: &CorrelationSeries, params: &SystemParams, n_s: f64) -> Result<ShotNoiseFit> {
    let start = signal_free_start(params);
    let dtau = h.dtau();
    let gamma = params.rates().gamma_bw;
    let max_lag = ((0.5 / (gamma * dtau)).ceil() as usize).max(2);
    let pos: Vec<f64> = h.tau.iter().zip(&h.h).filter(|(t, _)| **t >= start).map(|(_, v)| v - 1.0).collect();
    let neg: Vec<f64> = h.tau.iter().zip(&h.h).filter(|(t, _)| **t <= -start).map(|(_, v)| v - 1.0).collect();
    let bands: Vec<&[f64]> = [&pos[..], &neg[..]].into_iter().filter(|b| b.len() > max_lag).collect();
    let total: usize = bands.iter().map(|b| b.len()).sum();
    if total < 100 * max_lag {
        return Err(CqedError::BandTooShort(format!(
            "{total} samples beyond |τ| = {start:.4} µs, need {}",
            100 * max_lag
        )));
    }
    let mut c = vec![0.0; max_lag + 1];
    for (lag, ck) in c.iter_mut().enumerate() {
        let (mut s, mut n) = (0.0, 0usize);
        for b in &bands {
            for k in 0..b.len() - lag {
                s += b[k] * b[k + lag];
                n += 1;
            }
        }
        *ck = s / n as f64;
    }
    let pts: Vec<(f64, f64)> =
        c.iter().enumerate().take_while(|(_, v)| **v > 0.0).map(|(k, v)| (k as f64 * dtau, v.ln())).collect();
    let (amplitude, rate) = if pts.len() >= 3 {
        let slope = spectrum::line_slope(&pts);
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        ((my - slope * mx).exp(), -slope)
    } else {
        (c[0].max(0.0), 0.0)
    };
    let lambda = h.lambda;
    let expected_amplitude =
        gamma / (16.0 * params.eta * n_s * params.rates().kappa * (1.0 - params.r) * lambda * lambda);
    Ok(ShotNoiseFit { amplitude, rate, expected_amplitude, band_samples: total })
}

/// `h` as the photocurrent route sees it: passed through the causal
/// first-order detector response `Γ e^{−Γs}`, with `h = 1` before the grid.
/// Exact for `h` linear between samples.
pub fn detector_filtered(h: &CorrelationSeries, params: &SystemParams) -> CorrelationSeries {
    let x = params.rates().gamma_bw * h.dtau();
    let e = (-x).exp();
    // weights of the two endpoint samples for a linear segment
    let w_new = 1.0 - (1.0 - e) / x;
    let w_old = (1.0 - e) / x - e;
    let mut out = h.clone();
    let mut acc = 1.0;
    let mut prev = 1.0;
    for (o, &v) in out.h.iter_mut().zip(&h.h) {
        acc = acc * e + w_old * prev + w_new * v;
        prev = v;
        *o = acc;
    }
    out
}

/// `max_τ |h(τ) − h(−τ)|`.
pub fn max_asymmetry(h: &CorrelationSeries) -> f64 {
    let (_, pos) = h.positive();
    let neg = h.negative_mirrored();
    pos.iter().zip(&neg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `h̄(τ) = (h(τ) + h(−τ))/2` on `τ ≥ 0`.
pub fn symmetrize(h: &CorrelationSeries) -> (Vec<f64>, Vec<f64>) {
    let (tau, pos) = h.positive();
    let neg = h.negative_mirrored();
    (tau.to_vec(), pos.iter().zip(&neg).map(|(a, b)| 0.5 * (a + b)).collect())
}

/// Symmetrizes and transforms with flux `F`. `tail_tol` bounds `|h̄ − 1|`
/// over the last tenth of the grid; for noisy series pass a multiple of the
/// shot-noise σ.
pub fn symmetrize_and_transform(h: &CorrelationSeries, flux: f64, nu: &[f64], tail_tol: f64) -> Result<SpectrumSeries64> {
    let (tau, hbar) = symmetrize(h);
    spectrum::spectrum(&tau, &hbar, flux, nu, tail_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::state::PureState;
    use crate::trajectory::{Mode, Timing, TrajectoryEvent};

    fn record(current: Vec<f64>, events: Vec<TrajectoryEvent>) -> TrajectoryRecord {
        let s = PureState::new(vec![C64::new(1.0, 0.0)]).unwrap();
        TrajectoryRecord {
            mode: Mode::Homodyne,
            seed: 0,
            index: 0,
            timing: Timing { dt: 0.01, steps_per_sample: 1 },
            events,
            cond_field: vec![0.0; current.len()],
            current,
            initial_state: s.clone(),
            final_state: s,
        }
    }

    fn click(t: f64) -> TrajectoryEvent {
        TrajectoryEvent { kind: EventKind::CavityCount, time: t }
    }

    #[test]
    fn no_cavity_events_is_an_error() {
        let rec = record(vec![0.0; 101], vec![TrajectoryEvent { kind: EventKind::Spont(1), time: 0.5 }]);
        assert_eq!(collect_starts(&[rec], 0.1), Err(CqedError::NoStarts));
    }

    #[test]
    fn single_midpoint_event() {
        let rec = record(vec![2.5; 101], vec![click(0.5), click(0.02)]);
        let starts = collect_starts(std::slice::from_ref(&rec), 0.1).unwrap();
        assert_eq!(starts.n_s(), 1);
        let tau = tau_grid(0.01, 0.1);
        let avg = average_current(&[rec], &starts, &tau).unwrap();
        assert!(avg.mean.iter().all(|&v| v == 2.5));
        assert_eq!(avg.tau.len(), 21);
    }

    #[test]
    fn pointwise_mean_of_two_starts() {
        let cur: Vec<f64> = (0..201).map(|k| k as f64).collect();
        let rec = record(cur, vec![click(0.5), click(1.5)]);
        let starts = collect_starts(std::slice::from_ref(&rec), 0.2).unwrap();
        let tau = tau_grid(0.01, 0.2);
        let avg = average_current(&[rec], &starts, &tau).unwrap();
        for (t, m) in tau.iter().zip(&avg.mean) {
            assert!((m - (100.0 + t / 0.01)).abs() < 1e-9);
        }
        let far = tau_grid(0.01, 0.6);
        assert!(matches!(
            average_current(&[record(vec![0.0; 201], vec![])], &starts, &far),
            Err(CqedError::GridOutOfRange(_))
        ));
    }

    #[test]
    fn detector_filter_lags_a_ramp_by_one_over_bandwidth() {
        let p = SystemParams::default();
        let bw = p.rates().gamma_bw;
        let tau = tau_grid(1e-4, 0.05);
        let flat = CorrelationSeries { tau: tau.clone(), h: vec![1.0; tau.len()], lambda: 1.0, n_inc: 0.0, source: Source::Qrt };
        assert!(detector_filtered(&flat, &p).h.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let ramp = CorrelationSeries { h: tau.iter().map(|t| 1.0 + 50.0 * (t + 0.05)).collect(), ..flat };
        let out = detector_filtered(&ramp, &p);
        let last = tau.len() - 1;
        let want = 1.0 + 50.0 * (0.1 - 1.0 / bw);
        assert!((out.h[last] - want).abs() < 1e-10, "{} vs {want}", out.h[last]);
    }

    #[test]
    fn steady_level_gives_unit_h() {
        let p = SystemParams::default();
        let lambda = 3e-4;
        let level = lambda * (8.0 * p.rates().kappa * (1.0 - p.r)).sqrt();
        let avg = AveragedCurrent { tau: tau_grid(0.01, 0.1), mean: vec![level; 21], stderr: vec![0.0; 21], n_s: 1, n_eff: 1.0 };
        let h = h_from_current(&avg, lambda, &p).unwrap();
        assert!(h.h.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let s = symmetrize_and_transform(&h, 1.0, &[0.0, 10.0, 40.0], 1e-4).unwrap();
        assert!(s.s.iter().all(|&v| v.abs() < 1e-12));
        assert!(matches!(h_from_current(&avg, 0.0, &p), Err(CqedError::DarkField(_))));
    }

    #[test]
    fn symmetric_input_is_unchanged() {
        let tau = tau_grid(0.01, 0.5);
        let h: Vec<f64> = tau.iter().map(|t| 1.0 + (-(t * t) * 10.0).exp()).collect();
        let s = CorrelationSeries { tau: tau.clone(), h: h.clone(), lambda: 1.0, n_inc: 0.0, source: Source::Qrt };
        let (t, hb) = symmetrize(&s);
        assert_eq!(hb, h[50..].to_vec());
        assert_eq!(t, tau[50..].to_vec());
        assert_eq!(max_asymmetry(&s), 0.0);
    }

    #[test]
    fn weighted_sums_merge_in_any_grouping() {
        let w = |k: usize| Window {
            weight: 1.0 + k as f64,
            current: vec![k as f64, 2.0 * k as f64, 1.0],
            cond_field: vec![0.5 * k as f64; 3],
            pre: 1,
            events: vec![],
        };
        let mut all = WindowSums::new(1, 1, 0.1);
        let mut a = WindowSums::new(1, 1, 0.1);
        let mut b = WindowSums::new(1, 1, 0.1);
        for k in 0..6 {
            all.push(&w(k)).unwrap();
            if k < 2 { a.push(&w(k)) } else { b.push(&w(k)) }.unwrap();
        }
        a.merge(&b).unwrap();
        let (x, y) = (all.current_average().unwrap(), a.current_average().unwrap());
        for k in 0..3 {
            assert!((x.mean[k] - y.mean[k]).abs() < 1e-12);
        }
        let sw: f64 = (0..6).map(|k| 1.0 + k as f64).sum();
        let want: f64 = (0..6).map(|k| (1.0 + k as f64) * k as f64).sum::<f64>() / sw;
        assert!((x.mean[0] - want).abs() < 1e-12);
        assert_eq!(x.tau, vec![-0.1, 0.0, 0.1]);
        assert!(WindowSums::new(2, 1, 0.1).push(&w(0)).is_err());
    }

    #[test]
    fn noiseless_series_has_no_shot_noise() {
        let p = SystemParams::default();
        let tau = tau_grid(1e-3, 1.0);
        let h: Vec<f64> = tau.iter().map(|t| 1.0 + 100.0 * (-60.0 * t.abs()).exp()).collect();
        let s = CorrelationSeries { tau, h, lambda: 1e-3, n_inc: 0.0, source: Source::Qrt };
        let fit = shot_noise_check(&s, &p, 1000.0).unwrap();
        assert!(fit.amplitude < 1e-9 * fit.expected_amplitude, "{}", fit.amplitude);
        let short = CorrelationSeries { tau: tau_grid(1e-3, 0.3), h: vec![1.0; 601], ..s };
        assert!(matches!(shot_noise_check(&short, &p, 1000.0), Err(CqedError::BandTooShort(_))));
    }

    #[test]
    fn shot_noise_fit_recovers_ou_noise() {
        use rand::{Rng, SeedableRng};
        use rand_distr::StandardNormal;
        let p = SystemParams::default();
        let gamma = p.rates().gamma_bw;
        let dt = 1.0 / (10.0 * gamma);
        let tau = tau_grid(dt, 2.0);
        let a: f64 = 4.0;
        let e = (-gamma * dt).exp();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut x = a.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let h: Vec<f64> = tau
            .iter()
            .map(|_| {
                x = x * e + (a * (1.0 - e * e)).sqrt() * rng.sample::<f64, _>(StandardNormal);
                1.0 + x
            })
            .collect();
        let s = CorrelationSeries { tau, h, lambda: 1.0, n_inc: 0.0, source: Source::Trajectory };
        let fit = shot_noise_check(&s, &p, 1.0).unwrap();
        assert!((fit.rate - gamma).abs() / gamma < 0.1, "{}", fit.rate);
        assert!((fit.amplitude - a).abs() / a < 0.15, "{}", fit.amplitude);
    }
}
