use cqed::correlator::{self, collect_windows, WindowSums};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use cqed::trajectory::{Channel, EventKind, Mode, PriorForcing, TrajectorySystem, WindowSpec};
use cqed::weakfield::{self, EmissionKind};
use cqed::{calibrate_drive, SteadySolution, SystemParams};

const SEED: u64 = 4242;

fn two_atoms() -> SystemParams {
    SystemParams { n_atoms: 2, g: 38.0 / 2f64.sqrt(), ..SystemParams::default() }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn photocount_rates_match_steady_state() {
    let (p, m) = calibrate_drive(&SystemParams::default(), 1.0).unwrap();
    let sol = SteadySolution::solve(&p).unwrap();
    let r = p.rates();
    let cavity_want = 2.0 * r.kappa * m.n_bar;
    let excited: f64 = sol
        .ops
        .sigma_minus
        .iter()
        .map(|s| {
            let s = s.matrix();
            sol.rho.expectation(&(&s.adjoint() * s)).re
        })
        .sum();
    let spont_want = r.gamma * excited;
    let sys = TrajectorySystem::new(&p, Mode::Photocount).unwrap();
    let (runs, duration) = (24u64, 400.0 / cavity_want / 24.0);
    let (mut cav, mut spont) = (Vec::new(), Vec::new());
    for k in 0..runs {
        let ev = sys.count_events(SEED, k, duration).unwrap();
        let c = ev.iter().filter(|e| e.kind == EventKind::CavityCount).count();
        cav.push(c as f64 / duration);
        spont.push((ev.len() - c) as f64 / duration);
    }
    for (name, xs, want) in [("cavity", &cav, cavity_want), ("spontaneous", &spont, spont_want)] {
        let (mean, se) = mean_and_stderr(xs);
        assert!((mean - want).abs() <= 3.0 * se, "{name}: {mean} ± {se} vs {want}");
    }
}

#[test]
fn conditioned_field_after_click_follows_weak_field_regression() {
    for p in [SystemParams::default(), two_atoms()] {
        let (q, m) = calibrate_drive(&p, 1e-6).unwrap();
        let c = weakfield::constants(&q).unwrap();
        let sys = TrajectorySystem::new(&q, Mode::Photocount).unwrap();
        let t = sys.timing();
        let post = t.samples_in(3.0 / (std::f64::consts::TAU * c.envelope_rate));
        for (trigger, kind) in [(Channel::Cavity, EmissionKind::Cavity), (Channel::Spont(1), EmissionKind::Spontaneous)] {
            let spec = WindowSpec { pre: 0, post, trigger, prior: None };
            let avg = collect_windows(&sys, SEED, 0, 4, &spec).unwrap().field_average().unwrap();
            let got: Vec<f64> = avg.mean.iter().map(|v| v / m.lambda.re).collect();
            let want = weakfield::waveform(&c, kind, &avg.tau).values;
            let peak = want.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let worst = got.iter().zip(&want).fold(0.0f64, |a, (g, w)| a.max((g - w).abs()));
            let rel = worst / peak;
            assert!(rel <= 0.02, "N = {}, {kind:?}: worst pointwise deviation {rel} of the peak", q.n_atoms);
        }
    }
}

#[test]
fn strong_drive_two_atom_event_sequence() {
    let (p, _) = calibrate_drive(&two_atoms().with_n_max(6), 18.1).unwrap();
    let sys = TrajectorySystem::new(&p, Mode::Photocount).unwrap();
    let a = sys.run(SEED, 0, 4.0).unwrap();
    assert_eq!(a, sys.run(SEED, 0, 4.0).unwrap());
    assert_ne!(a.events, sys.run(SEED, 1, 4.0).unwrap().events);
    assert!(a.events.windows(2).all(|w| w[0].time <= w[1].time));
    assert!(a.events.iter().all(|e| (0.0..=4.0).contains(&e.time)));
    for kind in [EventKind::CavityCount, EventKind::Spont(1), EventKind::Spont(2)] {
        assert!(a.events.iter().any(|e| e.kind == kind), "no {kind:?} in 4 µs");
    }
    assert!(a.events.iter().all(|e| !matches!(e.kind, EventKind::Spont(j) if j == 0 || j > 2)));
    assert!((a.final_state.norm() - 1.0).abs() < 1e-10);
}

fn fig5_windows() -> (TrajectorySystem, WindowSpec) {
    let (p, _) = calibrate_drive(&SystemParams::default(), 2.99e-4).unwrap();
    let sys = TrajectorySystem::new(&p, Mode::Homodyne).unwrap();
    let t = sys.timing();
    let n = t.samples_in(0.3);
    let spec = WindowSpec { pre: n, post: n, trigger: Channel::Cavity, prior: Some(PriorForcing::default_for(&p, t)) };
    (sys, spec)
}

#[test]
fn stderr_scales_as_inverse_root_count() {
    let (sys, spec) = fig5_windows();
    let small = collect_windows(&sys, SEED, 0, 64, &spec).unwrap().current_average().unwrap();
    let large = collect_windows(&sys, SEED, 64, 256, &spec).unwrap().current_average().unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ratio = mean(&small.stderr) / mean(&large.stderr);
    let want = (large.n_eff / small.n_eff).sqrt();
    assert!((ratio / want - 1.0).abs() < 0.15, "stderr ratio {ratio} vs {want}");
}

#[test]
fn random_half_of_triggers_is_unbiased() {
    let (sys, spec) = fig5_windows();
    let p = sys.params().clone();
    let lambda = sys.steady().lambda.re;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut all, mut half) = (WindowSums::new(spec.pre, spec.post, sys.timing().dt_s()), WindowSums::new(spec.pre, spec.post, sys.timing().dt_s()));
    for k in 0..400 {
        let w = sys.run_window(SEED, k, &spec).unwrap();
        all.push(&w).unwrap();
        if rng.gen_bool(0.5) {
            half.push(&w).unwrap();
        }
    }
    let h = |s: &WindowSums| {
        let avg = s.current_average().unwrap();
        (correlator::h_from_current(&avg, lambda, &p).unwrap().h, correlator::h_stderr(&avg, lambda, &p).unwrap())
    };
    let (ha, _) = h(&all);
    let (hh, se) = h(&half);
    // the difference has about 1/√2 of the half-sample error, so 2 standard
    // errors is a 2.8σ band: a few points may still cross it
    let inside = ha.iter().zip(&hh).zip(&se).filter(|((a, b), e)| (*a - *b).abs() < 2.0 * **e).count();
    let share = inside as f64 / ha.len() as f64;
    assert!(share > 0.98, "{:.4} of points within 2 standard errors", share);
}

#[test]
fn worker_count_does_not_change_sums() {
    let (sys, spec) = fig5_windows();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| collect_windows(&sys, SEED, 3, 150, &spec).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one.count, 150);
}

#[test]
fn cavity_click_after_spontaneous_emission_lifts_the_field() {
    let (p, m) = calibrate_drive(&two_atoms().with_n_max(6), 18.1).unwrap();
    let lambda = m.lambda.re;
    let sys = TrajectorySystem::new(&p, Mode::Photocount).unwrap();
    let dt_s = sys.timing().dt_s();
    let (mut flips, mut soon, mut soon_up, mut late, mut late_up) = (0, 0, 0, 0, 0);
    for k in 0..6 {
        let r = sys.run(SEED, k, 4.0).unwrap();
        for pair in r.events.windows(2) {
            if !matches!(pair[0].kind, EventKind::Spont(_)) || pair[1].kind != EventKind::CavityCount {
                continue;
            }
            let at = (pair[1].time / dt_s).floor() as usize;
            if at + 1 >= r.cond_field.len() {
                continue;
            }
            let (before, after) = (r.cond_field[at] - lambda, r.cond_field[at + 1] - lambda);
            if before < 0.0 && after > 0.0 {
                flips += 1;
            }
            let gap = pair[1].time - pair[0].time;
            if gap < 0.03 {
                soon += 1;
                soon_up += usize::from(after > before);
            } else if gap > 0.1 {
                late += 1;
                late_up += usize::from(after > before);
            }
        }
    }
    assert!(flips >= 1);
    assert!(3 * soon_up >= 2 * soon && soon >= 5, "{soon_up}/{soon} raised soon after");
    assert!(late >= 1 && late_up == 0, "{late_up}/{late} raised long after");
}
