//! Mode runners. Every mode writes `manifest.json` plus its data files into
//! the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use cqed::correlator::{self, signal_free_start};
use cqed::qrt::{self, fwhm_point};
use cqed::spectrum::{self, uniform_grid, SpectrumSeries64, TAIL_TOL};
use cqed::steady::{calibrate_converged, calibrate_drive, converge_nmax, photon_number_observable};
use cqed::trajectory::{EventKind, Mode, PriorForcing, Timing, TrajectorySystem, WindowSpec};
use cqed::{weakfield, CqedError, SteadyMoments, SteadySolution, SystemParams};
use serde_json::{json, Value};

use crate::scenario::{Drive, Normalize, RunMode, Scenario};

const NMAX_TOL: f64 = 1e-3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(CqedError),
    Io(String),
}

impl From<CqedError> for CliError {
    fn from(e: CqedError) -> Self {
        match e {
            CqedError::InvalidParams(m) => CliError::Config(m),
            e => CliError::Run(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// What to try when a run fails to converge.
pub fn hint(e: &CqedError) -> &'static str {
    match e {
        CqedError::NmaxNotConverged { .. } | CqedError::SteadyState(_) | CqedError::NullSpace { .. } => {
            "raise n_max (--nmax) or lower the drive"
        }
        CqedError::Calibration(_) => "lower target_x or raise n_max (--nmax)",
        CqedError::StepTooLarge { .. } | CqedError::NormCollapse(_) | CqedError::ExpmNotConverged => {
            "shrink dt: set dt_refine = 2 (or more) in the scenario file"
        }
        CqedError::TailNotDecayed { .. } | CqedError::BandTooShort(_) | CqedError::GridOutOfRange(_) => {
            "lengthen the window with --duration"
        }
        CqedError::NoStarts => "raise --starts",
        _ => "check the scenario parameters",
    }
}

/// Collects the files of one run and refuses to clobber existing ones.
struct Output {
    dir: PathBuf,
    force: bool,
}

impl Output {
    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        let p = self.dir.join(name);
        if p.exists() && !self.force {
            return Err(CliError::Config(format!("{} exists; pass --force to overwrite", p.display())));
        }
        Ok(p)
    }

    fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.path(name)?)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn json(&self, name: &str, v: &Value) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(self.path(name)?, text + "\n")?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> Value {
    v.filter(|x| x.is_finite()).map_or(Value::Null, |x| json!(x))
}

/// Fixes the drive and the truncation; returns the full parameter set and
/// its steady moments.
pub fn resolve(s: &Scenario) -> Result<(SystemParams, SteadyMoments), CliError> {
    let mut p = s.params.clone();
    if let Some(n) = s.n_max {
        p.n_max = n;
    }
    match (s.drive, s.n_max) {
        (Some(Drive::Epsilon(e)), fixed) => {
            p.epsilon = e;
            if fixed.is_none() {
                p.n_max = converge_nmax(&p, photon_number_observable, NMAX_TOL)?;
            }
            let m = SteadySolution::solve(&p)?.moments;
            Ok((p, m))
        }
        (Some(Drive::TargetX(x)), Some(_)) => Ok(calibrate_drive(&p, x)?),
        (Some(Drive::TargetX(x)), None) => Ok(calibrate_converged(&p, x, NMAX_TOL)?),
        (None, _) => Err(CliError::Config("scenario has no drive".into())),
    }
}

fn params_json(p: &SystemParams) -> Value {
    json!({
        "g": p.g, "kappa": p.kappa, "gamma": p.gamma, "epsilon": p.epsilon,
        "n_atoms": p.n_atoms, "n_max": p.n_max, "r": p.r, "theta": p.theta,
        "gamma_bw": p.gamma_bw, "eta": p.eta,
    })
}

fn derived_json(p: &SystemParams) -> Value {
    let d = p.derived::<f64>();
    let mut v = json!({ "C1": d.c1, "n0": d.n0 });
    // weak-field constants need an underdamped vacuum Rabi oscillation
    match weakfield::constants(p) {
        Ok(c) => {
            v["alpha"] = json!(c.alpha);
            v["beta"] = json!(c.beta);
            v["alpha_beta"] = json!(c.alpha_beta());
            v["zeta_cav"] = json!(c.zeta_cav);
            v["zeta_spont"] = json!(c.zeta_spont);
            v["Omega_MHz"] = json!(c.omega);
            v["two_N_C1"] = json!(c.emission_ratio());
        }
        Err(e) => v["weak_field"] = json!(e.to_string()),
    }
    v
}

fn steady_json(m: &SteadyMoments) -> Value {
    json!({
        "X": m.x_intensity, "lambda_re": m.lambda.re, "lambda_im": m.lambda.im,
        "n_bar": m.n_bar, "n_inc": m.n_inc, "flux_per_us": m.flux,
    })
}

fn manifest(s: &Scenario, p: &SystemParams, m: Option<&SteadyMoments>) -> Value {
    json!({
        "scenario": s.name,
        "mode": s.mode.to_string(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": s.seed,
        "params": params_json(p),
        "n_max": p.n_max,
        "derived": derived_json(p),
        "steady": m.map_or(Value::Null, steady_json),
    })
}

fn nu_grid(s: &Scenario) -> Vec<f64> {
    let n = (s.nu_max / s.nu_step).round() as usize + 1;
    uniform_grid(0.0, s.nu_step, n)
}

fn spectrum_rows(sp: &SpectrumSeries64) -> impl Iterator<Item = Vec<String>> + '_ {
    sp.nu.iter().zip(&sp.s).map(|(v, s)| vec![num(*v), num(*s)])
}

fn zero_peak(sp: &SpectrumSeries64) -> Result<Option<f64>, CliError> {
    match spectrum::fwhm_zero_peak(&sp.nu, &sp.s) {
        Ok(w) => Ok(Some(w)),
        Err(CqedError::NoZeroFrequencyPeak) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn run(s: &Scenario, out_dir: &Path, force: bool) -> Result<(), CliError> {
    s.validate().map_err(CliError::Config)?;
    fs::create_dir_all(out_dir)?;
    let out = Output { dir: out_dir.to_path_buf(), force };
    match s.mode {
        RunMode::Params => {
            let (p, m) = resolve(s)?;
            out.json("manifest.json", &manifest(s, &p, Some(&m)))
        }
        RunMode::Qrt => run_qrt(s, &out),
        RunMode::Correlate => run_correlate(s, &out),
        RunMode::TrajectoryDump => run_dump(s, &out),
        RunMode::FwhmScan => run_fwhm_scan(s, &out),
    }
}

fn run_qrt(s: &Scenario, out: &Output) -> Result<(), CliError> {
    let (p, _) = resolve(s)?;
    let nu = nu_grid(s);
    let r = qrt::qrt_spectrum(&p, &nu)?;
    let (tau, h) = r.h.positive();
    out.csv("h.csv", &["tau_us", "h"], tau.iter().zip(h).map(|(t, v)| vec![num(*t), num(*v)]))?;
    out.csv("spectrum.csv", &["nu_MHz", "S"], spectrum_rows(&r.spectrum))?;
    let mut man = manifest(s, &p, Some(&r.solution.moments));
    man["fwhm_MHz"] = opt(zero_peak(&r.spectrum)?);
    out.json("manifest.json", &man)
}

fn system(s: &Scenario, p: &SystemParams) -> Result<TrajectorySystem, CliError> {
    let sys = TrajectorySystem::new(p, s.detection)?;
    if s.dt_refine == 1 {
        return Ok(sys);
    }
    let t = sys.timing();
    let m = t.steps_per_sample * s.dt_refine;
    let timing = Timing { dt: t.dt_s() / m as f64, steps_per_sample: m };
    Ok(TrajectorySystem::with_timing(p, s.detection, timing)?)
}

fn run_correlate(s: &Scenario, out: &Output) -> Result<(), CliError> {
    let (p, m) = resolve(s)?;
    let sys = system(s, &p)?;
    let t = sys.timing();
    let n = t.samples_in(s.duration);
    let homodyne = s.detection == Mode::Homodyne;
    let prior = if homodyne { Some(PriorForcing::default_for(&p, t)) } else { None };
    let spec = WindowSpec { pre: n, post: n, trigger: cqed::trajectory::Channel::Cavity, prior };
    let sums = correlator::collect_windows(&sys, s.seed, 0, s.starts, &spec)?;
    let lambda = m.lambda.re;
    let nu = nu_grid(s);
    let mut summary = manifest(s, &p, Some(&m));
    summary["N_s"] = json!(sums.count);
    summary["n_eff"] = json!(sums.n_eff());
    summary["dt_us"] = json!(t.dt);
    summary["dt_s_us"] = json!(t.dt_s());
    let (h, stderr, sp) = if homodyne {
        let avg = sums.current_average()?;
        let h = correlator::h_from_current(&avg, lambda, &p)?;
        let stderr = correlator::h_stderr(&avg, lambda, &p)?;
        let fit = correlator::shot_noise_check(&h, &p, sums.n_eff())?;
        summary["shot_noise"] = json!({
            "amplitude": fit.amplitude,
            "rate_per_us": fit.rate,
            "expected_amplitude": fit.expected_amplitude,
            "sigma": fit.sigma(),
            "band_samples": fit.band_samples,
            "max_asymmetry": correlator::max_asymmetry(&h),
        });
        let cut = signal_free_start(&p);
        let sp = correlator::symmetrize_and_transform(&h.truncated(cut), m.flux, &nu, 6.0 * fit.sigma())?;
        (h, stderr, sp)
    } else {
        let avg = sums.field_average()?;
        let h = correlator::h_from_field(&avg, lambda)?;
        let stderr: Vec<f64> = avg.stderr.iter().map(|v| v / lambda).collect();
        let tail = stderr.len() / 10;
        let noise = stderr[stderr.len() - tail.max(1)..].iter().copied().fold(0.0, f64::max);
        let sp = correlator::symmetrize_and_transform(&h, m.flux, &nu, (6.0 * noise).max(TAIL_TOL))?;
        (h, stderr, sp)
    };
    out.csv(
        "h.csv",
        &["tau_us", "h", "stderr"],
        h.tau.iter().zip(&h.h).zip(&stderr).map(|((t, v), e)| vec![num(*t), num(*v), num(*e)]),
    )?;
    out.csv("spectrum.csv", &["nu_MHz", "S"], spectrum_rows(&sp))?;
    summary["fwhm_MHz"] = opt(zero_peak(&sp)?);
    out.json("manifest.json", &summary)
}

fn run_dump(s: &Scenario, out: &Output) -> Result<(), CliError> {
    let (p, m) = resolve(s)?;
    let sys = system(s, &p)?;
    let records = sys.run_batch(s.seed, s.starts, s.duration)?;
    let dt_s = sys.timing().dt_s();
    let mut events = Vec::new();
    for r in &records {
        let kind = |e: &cqed::trajectory::TrajectoryEvent| match e.kind {
            EventKind::CavityCount => "cavity".to_string(),
            EventKind::Spont(j) => format!("spont{j}"),
        };
        // samples and events merged in time order; event rows carry only t_us and the flag
        let mut rows = Vec::with_capacity(r.cond_field.len() + r.events.len());
        let mut next = r.events.iter().peekable();
        for (k, f) in r.cond_field.iter().enumerate() {
            let t = k as f64 * dt_s;
            while let Some(e) = next.next_if(|e| e.time < t) {
                rows.push(vec![num(e.time), String::new(), String::new(), kind(e)]);
            }
            let i = r.current.get(k).map(|c| num(*c)).unwrap_or_default();
            rows.push(vec![num(t), i, num(*f), String::new()]);
        }
        rows.extend(next.map(|e| vec![num(e.time), String::new(), String::new(), kind(e)]));
        out.csv(&format!("trajectory_{}.csv", r.index), &["t_us", "i", "re_a_exp", "event"], rows)?;
        events.extend(r.events.iter().map(|e| vec![r.index.to_string(), num(e.time), kind(e)]));
    }
    out.csv("events.csv", &["trajectory", "t_us", "kind"], events)?;
    let mut man = manifest(s, &p, Some(&m));
    man["trajectories"] = json!(records.len());
    man["dt_us"] = json!(sys.timing().dt);
    man["dt_s_us"] = json!(dt_s);
    out.json("manifest.json", &man)
}

fn run_fwhm_scan(s: &Scenario, out: &Output) -> Result<(), CliError> {
    let nu = nu_grid(s);
    let mut rows = Vec::new();
    for &gamma in &s.gamma_grid {
        for &ratio in &s.drive_grid {
            let p = SystemParams { gamma, ..s.params.clone() }.with_drive_ratio(ratio);
            let pt = match s.n_max {
                Some(n) => {
                    let r = qrt::qrt_spectrum(&p.with_n_max(n), &nu)?;
                    qrt::FwhmPoint { n_max: n, x_intensity: r.solution.moments.x_intensity, fwhm: zero_peak(&r.spectrum)? }
                }
                None => fwhm_point(&p, &nu, NMAX_TOL)?,
            };
            let scale = match s.normalize {
                Normalize::Kappa => p.kappa,
                Normalize::Gamma => gamma,
            };
            let show = |v: Option<f64>| v.map(num).unwrap_or_default();
            rows.push(vec![
                num(gamma),
                num(ratio),
                num(pt.x_intensity),
                pt.n_max.to_string(),
                show(pt.fwhm),
                show(pt.fwhm.map(|w| w / scale)),
            ]);
        }
    }
    out.csv("fwhm.csv", &["gamma_MHz", "eps_over_kappa", "X", "n_max", "fwhm_MHz", "fwhm_normalized"], rows)?;
    let mut man = manifest(s, &s.params, None);
    man["normalized_by"] = json!(match s.normalize {
        Normalize::Kappa => "kappa",
        Normalize::Gamma => "gamma",
    });
    man["drive_grid"] = json!(s.drive_grid);
    man["gamma_grid"] = json!(s.gamma_grid);
    out.json("manifest.json", &man)
}
