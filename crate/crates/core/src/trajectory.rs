//! Quantum trajectories: photon-counting jumps (cavity output tap and
//! spontaneous emission), the diffusive homodyne channel with its filtered
//! photocurrent, and a photocounting mode for single-event studies.
//!
//! Homodyne mode integrates the stochastic Schrödinger equation on a fixed
//! step `dt`. The deterministic part `K = −iH − κa†a − (γ/2)Σσ₊σ₋` is
//! propagated exactly with `e^{K dt}`; the measurement term enters at first
//! order with the Milstein correction. The photocurrent low-pass filter is
//! integrated exactly over each step, driven by the same Wiener increment.
//!
//! Photocount mode has no diffusive term. Jump times are drawn by the
//! waiting-time method: the unnormalized no-jump state decays until its norm
//! reaches a uniform variate.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{CqedError, Result};
use crate::hilbert::SystemOperators;
use crate::linalg::{CMatrix, CsrMatrix, C64};
use crate::params::{Rates, SystemParams};
use crate::rng::{self, TrajRng};
use crate::state::PureState;
use crate::steady::{SteadyMoments, SteadySolution};

pub const MAX_JUMP_PROBABILITY: f64 = 0.01;
/// Output fraction sent to the photon counter in photocount mode.
pub const PHOTOCOUNT_TAP: f64 = 1.0 - 1e-6;
/// `dt · max(g√N, κ, γ, ε) ≤ DT_RULE` (angular rates).
pub const DT_RULE: f64 = 0.02;
/// Photocount fast-forward starts once every channel rate changes by less
/// than this (relative) from one sample to the next.
const RATE_SETTLE: f64 = 1e-9;
const NORM_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Homodyne,
    Photocount,
}

/// A collapse operator: the cavity output or atom `j` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Cavity,
    Spont(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    CavityCount,
    Spont(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryEvent {
    pub kind: EventKind,
    /// µs.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpProbabilities {
    pub count: f64,
    pub spont: Vec<f64>,
}

/// Integration step and sampling grid, `dt_s = steps_per_sample · dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub dt: f64,
    pub steps_per_sample: usize,
}

impl Timing {
    /// `dt_s = 1/(10Γ)` and the largest `dt` dividing it that satisfies
    /// [`DT_RULE`].
    pub fn default_for(params: &SystemParams) -> Self {
        let r = params.rates();
        let dt_s = 1.0 / (10.0 * r.gamma_bw);
        let fastest = (r.g * (params.n_atoms as f64).sqrt()).max(r.kappa).max(r.gamma).max(r.epsilon);
        let m = (dt_s * fastest / DT_RULE).ceil().max(1.0) as usize;
        Self { dt: dt_s / m as f64, steps_per_sample: m }
    }

    /// Refines `dt` so that no jump probability exceeds
    /// [`MAX_JUMP_PROBABILITY`] while the photon number stays at or below
    /// `n_hi` and the atoms are at most fully excited.
    pub fn bounded_jumps(self, params: &SystemParams, n_hi: f64) -> Self {
        let r = params.rates();
        let rate = (2.0 * r.kappa * params.r * n_hi).max(r.gamma);
        let dt_s = self.dt_s();
        let m = self.steps_per_sample.max((dt_s * rate / MAX_JUMP_PROBABILITY).ceil() as usize);
        Self { dt: dt_s / m as f64, steps_per_sample: m }
    }

    pub fn dt_s(&self) -> f64 {
        self.dt * self.steps_per_sample as f64
    }

    pub fn samples_in(&self, duration: f64) -> usize {
        (duration / self.dt_s()).round() as usize
    }
}

/// One trajectory's output.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub mode: Mode,
    pub seed: u64,
    pub index: u64,
    pub timing: Timing,
    pub events: Vec<TrajectoryEvent>,
    /// `i(k dt_s)`, k = 0..=n. Empty in photocount mode.
    pub current: Vec<f64>,
    /// `⟨Â_θ⟩_c(k dt_s)`.
    pub cond_field: Vec<f64>,
    pub initial_state: PureState,
    pub final_state: PureState,
}

impl TrajectoryRecord {
    pub fn dt_s(&self) -> f64 {
        self.timing.dt_s()
    }

    pub fn duration(&self) -> f64 {
        self.dt_s() * self.cond_field.len().saturating_sub(1) as f64
    }

    pub fn count(&self, pred: impl Fn(EventKind) -> bool) -> usize {
        self.events.iter().filter(|e| pred(e.kind)).count()
    }
}

/// Extra collapse forced shortly before the trigger in a share of windows.
///
/// Histories with a count or spontaneous emission just before the trigger
/// are rare but carry a strongly enhanced trigger rate; forcing them keeps
/// their contribution from being left to chance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorForcing {
    /// Samples before the trigger in which the extra collapse may fall.
    pub span: usize,
    /// Share of windows run without it.
    pub plain_share: f64,
}

impl PriorForcing {
    /// Span of five envelope times `2/(κ + γ/2)` (angular), four windows in five plain.
    pub fn default_for(params: &SystemParams, timing: Timing) -> Self {
        let r = params.rates();
        let span = timing.samples_in(5.0 * 2.0 / (r.kappa + r.gamma / 2.0)).max(1);
        Self { span, plain_share: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub pre: usize,
    pub post: usize,
    pub trigger: Channel,
    pub prior: Option<PriorForcing>,
}

/// Current window around a forced collapse.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Rate of the trigger channel just before the collapse, per µs.
    pub weight: f64,
    /// Samples `−pre ..= post` around the trigger (empty in photocount mode).
    pub current: Vec<f64>,
    /// Conditioned quadrature; the sample at the trigger is taken after the collapse.
    pub cond_field: Vec<f64>,
    pub pre: usize,
    /// Natural events inside the window, times relative to the trigger.
    pub events: Vec<TrajectoryEvent>,
}

/// Mutable walker state.
struct Walker {
    psi: Vec<C64>,
    current: f64,
    t: f64,
    rng: TrajRng,
    /// Photocount mode: accumulated no-jump norm² and its jump threshold.
    norm_sq: f64,
    threshold: f64,
    /// Photocount mode: consecutive intervals with a converged no-jump state.
    settled: usize,
    last_decay: f64,
    /// Photocount mode: cavity and atom rates after the last sample.
    last_rates: [f64; 3],
    /// `(time, rate)` of natural count and spontaneous jumps, when tracked.
    jump_log: Option<Vec<(f64, f64)>>,
}

struct Sink<'a> {
    events: Option<&'a mut Vec<TrajectoryEvent>>,
    current: Option<&'a mut Vec<f64>>,
    cond_field: Option<&'a mut Vec<f64>>,
}

impl Sink<'_> {
    fn none() -> Self {
        Sink { events: None, current: None, cond_field: None }
    }
}

/// Operators and propagators for one parameter set, shared read-only by all
/// trajectories.
#[derive(Debug, Clone)]
pub struct TrajectorySystem {
    params: SystemParams,
    mode: Mode,
    timing: Timing,
    rates: Rates,
    dim: usize,
    a: CsrMatrix,
    sigma: Vec<CsrMatrix>,
    number_diag: Vec<f64>,
    excited_diag: Vec<Vec<f64>>,
    u_step: CMatrix,
    u_sample: CMatrix,
    /// `√(2κ(1−r)) e^{−iθ}`.
    c_coef: C64,
    /// `√(8κ(1−r))`.
    gain: f64,
    initial: PureState,
    steady: SteadyMoments,
    burn_in_samples: usize,
}

/// Smallest `n` with `P(photons > n) < tail` in the steady state.
fn photon_quantile(sol: &SteadySolution, tail: f64) -> usize {
    let space = sol.ops.space;
    let mut p = vec![0.0; space.n_max() + 1];
    for i in 0..space.dim() {
        p[space.split(i).0] += sol.rho.matrix()[(i, i)].re;
    }
    let mut above = 1.0 - p[0];
    let mut n = 0;
    while above >= tail && n < space.n_max() {
        n += 1;
        above -= p[n];
    }
    n
}

fn diag_of(m: &CMatrix) -> Vec<f64> {
    (0..m.rows()).map(|i| m[(i, i)].re).collect()
}

fn weighted_norm(diag: &[f64], psi: &[C64]) -> f64 {
    diag.iter().zip(psi).map(|(d, z)| d * z.norm_sqr()).sum()
}

fn norm_sq(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

fn scale(psi: &mut [C64], k: f64) {
    for z in psi {
        *z *= k;
    }
}

impl TrajectorySystem {
    /// Builds operators, propagators and the starting state (dominant
    /// eigenvector of the steady state). Photocount mode forces
    /// `r = 1 − 10⁻⁶`.
    ///
    /// The default [`Timing`] is refined with [`Timing::bounded_jumps`] up to
    /// one photon above the steady-state photon number reached with
    /// probability `10⁻⁶`.
    pub fn new(params: &SystemParams, mode: Mode) -> Result<Self> {
        Self::build(params, mode, None)
    }

    pub fn with_timing(params: &SystemParams, mode: Mode, timing: Timing) -> Result<Self> {
        Self::build(params, mode, Some(timing))
    }

    fn build(params: &SystemParams, mode: Mode, timing: Option<Timing>) -> Result<Self> {
        let mut params = params.clone();
        if mode == Mode::Photocount {
            params.r = PHOTOCOUNT_TAP;
        }
        params.validate()?;
        let sol = SteadySolution::solve(&params)?;
        let timing = match timing {
            Some(t) => t,
            None => Timing::default_for(&params).bounded_jumps(&params, photon_quantile(&sol, 1e-6) as f64 + 1.0),
        };
        if !(timing.dt > 0.0 && timing.steps_per_sample >= 1) {
            return Err(CqedError::InvalidParams("dt must be > 0".into()));
        }
        let ops: &SystemOperators = &sol.ops;
        let rates = params.rates();
        let dim = ops.space.dim();
        let a_dense = ops.a.matrix();
        let number_diag = diag_of(ops.number.matrix());
        let excited_diag: Vec<Vec<f64>> =
            ops.sigma_minus.iter().map(|s| diag_of(&(&s.matrix().adjoint() * s.matrix()))).collect();
        let mut k = ops.hamiltonian.matrix().scale(C64::new(0.0, -1.0));
        k = &k - &ops.number.matrix().scale_re(rates.kappa);
        for d in &excited_diag {
            let ee = CMatrix::from_diagonal(&d.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
            k = &k - &ee.scale_re(rates.gamma / 2.0);
        }
        let u_step = k.scale_re(timing.dt).expm()?;
        let u_sample = k.scale_re(timing.dt_s()).expm()?;
        let tap = 1.0 - params.r;
        let (c_coef, gain) = match mode {
            Mode::Homodyne => (
                C64::from_polar((2.0 * rates.kappa * tap).sqrt(), -params.theta),
                (8.0 * rates.kappa * tap).sqrt(),
            ),
            Mode::Photocount => (C64::new(0.0, 0.0), 0.0),
        };
        let (v, _) = sol.rho.dominant_state();
        let initial = PureState::new(v)?;
        let burn_in_samples = timing.samples_in(10.0 / rates.kappa);
        Ok(Self {
            a: CsrMatrix::from_triplets(dim, dim, a_dense.triplets()),
            sigma: ops.sigma_minus.iter().map(|s| CsrMatrix::from_triplets(dim, dim, s.matrix().triplets())).collect(),
            params,
            mode,
            timing,
            rates,
            dim,
            number_diag,
            excited_diag,
            u_step,
            u_sample,
            c_coef,
            gain,
            initial,
            steady: sol.moments,
            burn_in_samples,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn timing(&self) -> Timing {
        self.timing
    }

    pub fn steady(&self) -> &SteadyMoments {
        &self.steady
    }

    pub fn initial_state(&self) -> &PureState {
        &self.initial
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Photocurrent level of the steady field, `√(8κ(1−r)) λ`.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn burn_in_samples(&self) -> usize {
        self.burn_in_samples
    }

    pub fn set_burn_in(&mut self, duration: f64) {
        self.burn_in_samples = self.timing.samples_in(duration);
    }

    /// `⟨Â_θ⟩ = Re(e^{−iθ}⟨a⟩)` for a normalized state.
    pub fn quadrature(&self, psi: &[C64]) -> f64 {
        (C64::from_polar(1.0, -self.params.theta) * self.a.sandwich(psi)).re / norm_sq(psi)
    }

    pub fn photon_number(&self, psi: &[C64]) -> f64 {
        weighted_norm(&self.number_diag, psi) / norm_sq(psi)
    }

    /// `⟨σ₊σ₋⟩` of atom `j` (1-based).
    pub fn excitation(&self, psi: &[C64], j: usize) -> f64 {
        weighted_norm(&self.excited_diag[j - 1], psi) / norm_sq(psi)
    }

    /// Rates per µs of the cavity and spontaneous channels.
    fn channel_rates(&self, psi: &[C64]) -> (f64, Vec<f64>) {
        let mut sp = vec![0.0; self.excited_diag.len()];
        let cav = self.rates_into(psi, &mut sp);
        (cav, sp)
    }

    /// Single pass over `psi`: returns the cavity rate, writes atom rates.
    fn rates_into(&self, psi: &[C64], sp: &mut [f64]) -> f64 {
        let (mut n, mut num) = (0.0, 0.0);
        sp.iter_mut().for_each(|x| *x = 0.0);
        for (k, z) in psi.iter().enumerate() {
            let p = z.norm_sqr();
            n += p;
            num += self.number_diag[k] * p;
            for (x, d) in sp.iter_mut().zip(&self.excited_diag) {
                *x += d[k] * p;
            }
        }
        sp.iter_mut().for_each(|x| *x *= self.rates.gamma / n);
        2.0 * self.rates.kappa * num / n
    }

    /// `P_count = 2κr⟨a†a⟩dt`, `P_spont(j) = γ⟨σ₊σ₋⟩_j dt`.
    pub fn jump_probabilities(&self, psi: &PureState) -> Result<JumpProbabilities> {
        let (cav, sp) = self.channel_rates(psi.amps());
        let dt = self.timing.dt;
        let out = JumpProbabilities { count: cav * self.params.r * dt, spont: sp.iter().map(|r| r * dt).collect() };
        if out.count > MAX_JUMP_PROBABILITY {
            return Err(CqedError::StepTooLarge { channel: "cavity".into(), probability: out.count });
        }
        for (j, &p) in out.spont.iter().enumerate() {
            if p > MAX_JUMP_PROBABILITY {
                return Err(CqedError::StepTooLarge { channel: format!("spont{}", j + 1), probability: p });
            }
        }
        Ok(out)
    }

    fn collapse_into(&self, psi: &[C64], channel: Channel, out: &mut [C64]) -> Result<()> {
        match channel {
            Channel::Cavity => self.a.matvec_into(psi, out),
            Channel::Spont(j) => {
                let op = self.sigma.get(j.wrapping_sub(1)).ok_or(CqedError::AtomIndex {
                    index: j,
                    n_atoms: self.params.n_atoms,
                })?;
                op.matvec_into(psi, out)
            }
        }
        let n = norm_sq(out);
        if !(n > 0.0) {
            return Err(CqedError::ZeroNormCollapse(format!("{channel:?}")));
        }
        scale(out, 1.0 / n.sqrt());
        Ok(())
    }

    /// `ψ ← aψ` or `σ₋^j ψ`, renormalized.
    pub fn apply_collapse(&self, psi: &PureState, channel: Channel) -> Result<PureState> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.collapse_into(psi.amps(), channel, &mut out)?;
        PureState::new(out)
    }

    /// One homodyne step without jumps:
    /// `ψ̄ = e^{K dt}[1 + c dY + ½c²(dW² − dt)]ψ`, `dY = √(8κ(1−r))⟨Â_θ⟩dt + dW`,
    /// `c = √(2κ(1−r)) e^{−iθ} a`; then normalized.
    pub fn drift_step(&self, psi: &PureState, dw: f64) -> Result<PureState> {
        let mut v = psi.amps().to_vec();
        let mut s1 = vec![C64::new(0.0, 0.0); self.dim];
        let mut s2 = s1.clone();
        let signal = self.quadrature(&v);
        self.drift_into(&mut v, signal, dw, &mut s1, &mut s2)?;
        PureState::new(v)
    }

    fn drift_into(&self, psi: &mut [C64], signal: f64, dw: f64, s1: &mut [C64], s2: &mut [C64]) -> Result<()> {
        let dt = self.timing.dt;
        if self.gain > 0.0 {
            let dy = self.gain * signal * dt + dw;
            self.a.matvec_into(psi, s1);
            self.a.matvec_into(s1, s2);
            let c1 = self.c_coef * dy;
            let c2 = self.c_coef * self.c_coef * (0.5 * (dw * dw - dt));
            for k in 0..psi.len() {
                s1[k] = psi[k] + c1 * s1[k] + c2 * s2[k];
            }
        } else {
            s1.copy_from_slice(psi);
        }
        self.u_step.matvec_into(s1, psi);
        let n = norm_sq(psi);
        if !(n > NORM_FLOOR) {
            return Err(CqedError::NormCollapse(n.sqrt()));
        }
        scale(psi, 1.0 / n.sqrt());
        Ok(())
    }

    /// Exact update of `di = −Γ(i dt − √(8κ(1−r))⟨Â_θ⟩ dt − dW)` over one step
    /// with the signal held fixed. `dw` is the increment shared with the state
    /// update; `z` is an independent standard normal for the part of the
    /// filtered noise not explained by `dw`.
    pub fn photocurrent_step(&self, i: f64, signal: f64, dw: f64, z: f64) -> f64 {
        let gamma = self.rates.gamma_bw;
        let dt = self.timing.dt;
        let e = (-gamma * dt).exp();
        let cov = 1.0 - e;
        let var = gamma * (1.0 - e * e) / 2.0;
        let resid = (var - cov * cov / dt).max(0.0).sqrt();
        i * e + self.gain * signal * cov + cov / dt * dw + resid * z
    }

    fn fresh_walker(&self, mut rng: TrajRng, start: &PureState) -> Walker {
        let psi = start.amps().to_vec();
        let current = if self.mode == Mode::Homodyne {
            let z: f64 = rng.sample(StandardNormal);
            self.gain * self.quadrature(&psi) + (self.rates.gamma_bw / 2.0).sqrt() * z
        } else {
            0.0
        };
        let threshold = rng.gen::<f64>();
        Walker { psi, current, t: 0.0, rng, norm_sq: 1.0, threshold, settled: 0, last_decay: 0.0, last_rates: [0.0; 3], jump_log: None }
    }

    fn push_sample(&self, w: &Walker, sink: &mut Sink) {
        if let Some(c) = sink.current.as_deref_mut() {
            c.push(w.current);
        }
        if let Some(f) = sink.cond_field.as_deref_mut() {
            f.push(self.quadrature(&w.psi));
        }
    }

    fn push_repeated(&self, w: &Walker, sink: &mut Sink, n: usize) {
        if let Some(c) = sink.current.as_deref_mut() {
            c.extend(std::iter::repeat(w.current).take(n));
        }
        if let Some(f) = sink.cond_field.as_deref_mut() {
            let q = self.quadrature(&w.psi);
            f.extend(std::iter::repeat(q).take(n));
        }
    }

    /// Advances by `samples` sample intervals, pushing one sample at the end
    /// of each.
    fn advance(&self, w: &mut Walker, samples: usize, sink: &mut Sink) -> Result<()> {
        match self.mode {
            Mode::Homodyne => self.advance_homodyne(w, samples, sink),
            Mode::Photocount => self.advance_photocount(w, samples, sink),
        }
    }

    fn advance_homodyne(&self, w: &mut Walker, samples: usize, sink: &mut Sink) -> Result<()> {
        let dt = self.timing.dt;
        let sqdt = dt.sqrt();
        let n_atoms = self.excited_diag.len();
        let mut s1 = vec![C64::new(0.0, 0.0); self.dim];
        let mut s2 = s1.clone();
        let mut probs = vec![0.0; n_atoms + 1];
        let mut sp = vec![0.0; n_atoms];
        let mut fired: Vec<usize> = Vec::with_capacity(n_atoms + 1);
        for _ in 0..samples {
            for _ in 0..self.timing.steps_per_sample {
                let cav = self.rates_into(&w.psi, &mut sp);
                probs[0] = cav * self.params.r * dt;
                for j in 0..n_atoms {
                    probs[j + 1] = sp[j] * dt;
                }
                for (k, &p) in probs.iter().enumerate() {
                    if p > MAX_JUMP_PROBABILITY {
                        let channel = if k == 0 { "cavity".to_string() } else { format!("spont{k}") };
                        return Err(CqedError::StepTooLarge { channel, probability: p });
                    }
                }
                fired.clear();
                for (k, &p) in probs.iter().enumerate() {
                    if w.rng.gen::<f64>() < p {
                        fired.push(k);
                    }
                }
                let signal = self.quadrature(&w.psi);
                let dw = sqdt * w.rng.sample::<f64, _>(StandardNormal);
                let z: f64 = w.rng.sample(StandardNormal);
                w.t += dt;
                if fired.is_empty() {
                    self.drift_into(&mut w.psi, signal, dw, &mut s1, &mut s2)?;
                } else {
                    let k = if fired.len() == 1 {
                        fired[0]
                    } else {
                        let total: f64 = fired.iter().map(|&k| probs[k]).sum();
                        let mut u = w.rng.gen::<f64>() * total;
                        let mut pick = fired[fired.len() - 1];
                        for &k in &fired {
                            if u < probs[k] {
                                pick = k;
                                break;
                            }
                            u -= probs[k];
                        }
                        pick
                    };
                    let (channel, kind) =
                        if k == 0 { (Channel::Cavity, EventKind::CavityCount) } else { (Channel::Spont(k), EventKind::Spont(k)) };
                    self.collapse_into(&w.psi, channel, &mut s1)?;
                    w.psi.copy_from_slice(&s1);
                    if let Some(log) = w.jump_log.as_mut() {
                        log.push((w.t, probs[k] / dt));
                    }
                    if let Some(ev) = sink.events.as_deref_mut() {
                        ev.push(TrajectoryEvent { kind, time: w.t });
                    }
                }
                w.current = self.photocurrent_step(w.current, signal, dw, z);
            }
            self.push_sample(w, sink);
        }
        Ok(())
    }

    /// Collapse at the end of a no-jump interval in photocount mode: pick the
    /// channel by its rate, log cavity jumps that reach the counter.
    fn photocount_jump(&self, w: &mut Walker, sink: &mut Sink, scratch: &mut [C64]) -> Result<()> {
        let (cav, sp) = self.channel_rates(&w.psi);
        let total = cav + sp.iter().sum::<f64>();
        let mut u = w.rng.gen::<f64>() * total;
        let mut channel = Channel::Cavity;
        if u >= cav {
            u -= cav;
            channel = Channel::Spont(sp.len());
            for (j, &r) in sp.iter().enumerate() {
                if u < r {
                    channel = Channel::Spont(j + 1);
                    break;
                }
                u -= r;
            }
        }
        self.collapse_into(&w.psi, channel, scratch)?;
        w.psi.copy_from_slice(scratch);
        let (kind, rate) = match channel {
            Channel::Cavity => {
                ((w.rng.gen::<f64>() < self.params.r).then_some(EventKind::CavityCount), cav * self.params.r)
            }
            Channel::Spont(j) => (Some(EventKind::Spont(j)), sp[j - 1]),
        };
        if let (Some(_), Some(log)) = (kind, w.jump_log.as_mut()) {
            log.push((w.t, rate));
        }
        if let (Some(kind), Some(ev)) = (kind, sink.events.as_deref_mut()) {
            ev.push(TrajectoryEvent { kind, time: w.t });
        }
        w.norm_sq = 1.0;
        w.threshold = w.rng.gen::<f64>();
        w.settled = 0;
        Ok(())
    }

    fn advance_photocount(&self, w: &mut Walker, samples: usize, sink: &mut Sink) -> Result<()> {
        let dt = self.timing.dt;
        let dt_s = self.timing.dt_s();
        let mut next = vec![C64::new(0.0, 0.0); self.dim];
        let mut scratch = next.clone();
        let n_atoms = self.excited_diag.len();
        let mut done = 0;
        while done < samples {
            // fast-forward through a converged no-jump stretch
            if w.settled >= 3 && w.last_decay < 1.0 {
                let room = (w.threshold / w.norm_sq).ln() / w.last_decay.ln();
                let skip = (room.floor().max(0.0) as usize).saturating_sub(1).min(samples - done);
                if skip > 0 {
                    w.norm_sq *= w.last_decay.powf(skip as f64);
                    w.t += skip as f64 * dt_s;
                    self.push_repeated(w, sink, skip);
                    done += skip;
                    if done == samples {
                        break;
                    }
                }
            } else if w.settled >= 3 {
                // no decay at all: nothing can happen
                w.t += (samples - done) as f64 * dt_s;
                self.push_repeated(w, sink, samples - done);
                break;
            }
            self.u_sample.matvec_into(&w.psi, &mut next);
            let decay = norm_sq(&next);
            if w.norm_sq * decay > w.threshold {
                scale(&mut next, 1.0 / decay.sqrt());
                let overlap: C64 = w.psi.iter().zip(&next).map(|(a, b)| a.conj() * b).sum();
                // fidelity alone is blind to the small field-carrying amplitudes at weak drive
                let mut now = [0.0; 3];
                now[0] = self.rates_into(&next, &mut now[1..=n_atoms]);
                let rates_stable = now.iter().zip(&w.last_rates).all(|(a, b)| (a - b).abs() <= RATE_SETTLE * a);
                w.last_rates = now;
                let converged = rates_stable
                    && 1.0 - overlap.norm_sqr() < 1e-14
                    && (decay - w.last_decay).abs() <= 1e-12 * decay;
                w.settled = if converged { w.settled + 1 } else { 0 };
                w.last_decay = decay;
                w.norm_sq *= decay;
                w.psi.copy_from_slice(&next);
                w.t += dt_s;
            } else {
                // the jump falls inside this interval: redo it on the fine step
                for _ in 0..self.timing.steps_per_sample {
                    self.u_step.matvec_into(&w.psi, &mut next);
                    let d = norm_sq(&next);
                    scale(&mut next, 1.0 / d.sqrt());
                    w.psi.copy_from_slice(&next);
                    w.t += dt;
                    if w.norm_sq * d <= w.threshold {
                        self.photocount_jump(w, sink, &mut scratch)?;
                    } else {
                        w.norm_sq *= d;
                    }
                }
                w.settled = 0;
                w.last_decay = 0.0;
            }
            self.push_sample(w, sink);
            done += 1;
        }
        Ok(())
    }

    /// Runs one trajectory for `duration` µs after the burn-in.
    pub fn run(&self, base_seed: u64, index: u64, duration: f64) -> Result<TrajectoryRecord> {
        let mut w = self.fresh_walker(rng::stream(base_seed, index), &self.initial);
        self.advance(&mut w, self.burn_in_samples, &mut Sink::none())?;
        w.t = 0.0;
        let initial_state = PureState::new(w.psi.clone())?;
        let n = self.timing.samples_in(duration);
        let mut events = Vec::new();
        let mut current = Vec::new();
        let mut cond_field = Vec::with_capacity(n + 1);
        let homodyne = self.mode == Mode::Homodyne;
        if homodyne {
            current.reserve(n + 1);
        }
        {
            let mut sink = Sink {
                events: Some(&mut events),
                current: if homodyne { Some(&mut current) } else { None },
                cond_field: Some(&mut cond_field),
            };
            self.push_sample(&w, &mut sink);
            self.advance(&mut w, n, &mut sink)?;
        }
        Ok(TrajectoryRecord {
            mode: self.mode,
            seed: base_seed,
            index,
            timing: self.timing,
            events,
            current,
            cond_field,
            initial_state,
            final_state: PureState::new(w.psi)?,
        })
    }

    /// Events only, no samples; for long counting runs.
    pub fn count_events(&self, base_seed: u64, index: u64, duration: f64) -> Result<Vec<TrajectoryEvent>> {
        let mut w = self.fresh_walker(rng::stream(base_seed, index), &self.initial);
        self.advance(&mut w, self.burn_in_samples, &mut Sink::none())?;
        w.t = 0.0;
        let mut events = Vec::new();
        let mut sink = Sink { events: Some(&mut events), current: None, cond_field: None };
        self.advance(&mut w, self.timing.samples_in(duration), &mut sink)?;
        Ok(events)
    }

    /// Trajectories `0..count` in parallel, returned in index order.
    pub fn run_batch(&self, base_seed: u64, count: u64, duration: f64) -> Result<Vec<TrajectoryRecord>> {
        (0..count).into_par_iter().map(|k| self.run(base_seed, k, duration)).collect()
    }

    /// Rate per µs of `channel` in the current state (counted cavity output
    /// or one atom).
    fn rate_of(&self, psi: &[C64], channel: Channel) -> Result<f64> {
        let (cav, sp) = self.channel_rates(psi);
        match channel {
            Channel::Cavity => Ok(cav * self.params.r),
            Channel::Spont(j) => {
                sp.get(j.wrapping_sub(1)).copied().ok_or(CqedError::AtomIndex { index: j, n_atoms: sp.len() })
            }
        }
    }

    /// Collapses through `channel` at a sample boundary; the last stored
    /// sample of the conditioned quadrature is replaced by its post-collapse
    /// value. Returns the pre-collapse rate.
    fn force(&self, w: &mut Walker, channel: Channel, sink: &mut Sink) -> Result<f64> {
        let rate = self.rate_of(&w.psi, channel)?;
        let mut scratch = vec![C64::new(0.0, 0.0); self.dim];
        self.collapse_into(&w.psi, channel, &mut scratch)?;
        w.psi.copy_from_slice(&scratch);
        w.norm_sq = 1.0;
        w.threshold = w.rng.gen::<f64>();
        w.settled = 0;
        if let Some(f) = sink.cond_field.as_deref_mut() {
            if let Some(last) = f.last_mut() {
                *last = self.quadrature(&w.psi);
            }
        }
        Ok(rate)
    }

    /// Burn-in, `pre` samples, a forced collapse through the trigger channel,
    /// then `post` samples.
    ///
    /// The weight is the trigger channel's rate just before the collapse, so
    /// that weighting windows by it reproduces averaging over naturally
    /// occurring triggers. With [`PriorForcing`], a share of windows also gets
    /// one collapse at a uniformly chosen sample and channel within `span`
    /// samples before the trigger; both kinds of window are combined with
    /// balance-heuristic weights, which keeps the weighted mean unbiased.
    pub fn run_window(&self, base_seed: u64, index: u64, spec: &WindowSpec) -> Result<Window> {
        let (pre, post) = (spec.pre, spec.post);
        let n_atoms = self.excited_diag.len();
        let mut w = self.fresh_walker(rng::stream(base_seed, index), &self.initial);
        self.advance(&mut w, self.burn_in_samples, &mut Sink::none())?;
        w.t = 0.0;
        let forced = match spec.prior {
            None => None,
            Some(pf) => {
                if pf.span == 0 || pf.span > pre || !(pf.plain_share > 0.0 && pf.plain_share < 1.0) {
                    return Err(CqedError::InvalidParams("prior forcing needs 0 < span <= pre, 0 < share < 1".into()));
                }
                w.jump_log = Some(Vec::new());
                if w.rng.gen::<f64>() < pf.plain_share {
                    None
                } else {
                    let k = pre - pf.span + w.rng.gen_range(0..pf.span);
                    let c = w.rng.gen_range(0..=n_atoms);
                    Some((k, if c == 0 { Channel::Cavity } else { Channel::Spont(c) }))
                }
            }
        };
        let homodyne = self.mode == Mode::Homodyne;
        let mut events = Vec::new();
        let mut current = Vec::with_capacity(if homodyne { pre + post + 1 } else { 0 });
        let mut cond_field = Vec::with_capacity(pre + post + 1);
        let mut sink = Sink {
            events: Some(&mut events),
            current: if homodyne { Some(&mut current) } else { None },
            cond_field: Some(&mut cond_field),
        };
        self.push_sample(&w, &mut sink);
        match forced {
            Some((k, channel)) => {
                self.advance(&mut w, k, &mut sink)?;
                let rate = self.force(&mut w, channel, &mut sink)?;
                if let Some(log) = w.jump_log.as_mut() {
                    log.push((w.t, rate));
                }
                if let Some(ev) = sink.events.as_deref_mut() {
                    let kind = match channel {
                        Channel::Cavity => EventKind::CavityCount,
                        Channel::Spont(j) => EventKind::Spont(j),
                    };
                    ev.push(TrajectoryEvent { kind, time: w.t });
                }
                self.advance(&mut w, pre - k, &mut sink)?;
            }
            None => self.advance(&mut w, pre, &mut sink)?,
        }
        let trigger_rate = self.force(&mut w, spec.trigger, &mut sink)?;
        let weight = match (spec.prior, w.jump_log.take()) {
            (Some(pf), Some(log)) => {
                let dt_s = self.timing.dt_s();
                let span = pf.span as f64 * dt_s;
                let t_lo = (pre - pf.span) as f64 * dt_s - 0.5 * self.timing.dt;
                let n_ch = (n_atoms + 1) as f64;
                let q: f64 = log.iter().filter(|(t, _)| *t >= t_lo).map(|(_, r)| 1.0 / (r * span * n_ch)).sum();
                trigger_rate / (pf.plain_share + (1.0 - pf.plain_share) * q)
            }
            _ => trigger_rate,
        };
        self.advance(&mut w, post, &mut sink)?;
        let t0 = pre as f64 * self.timing.dt_s();
        for e in &mut events {
            e.time -= t0;
        }
        Ok(Window { weight, current, cond_field, pre, events })
    }
}

/// Builds the system and runs one trajectory.
pub fn run_trajectory(params: &SystemParams, seed: u64, duration: f64, mode: Mode) -> Result<TrajectoryRecord> {
    TrajectorySystem::new(params, mode)?.run(seed, 0, duration)
}
