//! Scenario description: built-in presets and the flat `key = value` file
//! format.

use std::fmt;
use std::str::FromStr;

use cqed::trajectory::Mode;
use cqed::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Qrt,
    Correlate,
    TrajectoryDump,
    FwhmScan,
    Params,
}

impl FromStr for RunMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "qrt" => Ok(Self::Qrt),
            "correlate" => Ok(Self::Correlate),
            "trajectory-dump" => Ok(Self::TrajectoryDump),
            "fwhm-scan" => Ok(Self::FwhmScan),
            "params" => Ok(Self::Params),
            _ => Err(format!("unknown mode '{s}' (qrt, correlate, trajectory-dump, fwhm-scan, params)")),
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Qrt => "qrt",
            Self::Correlate => "correlate",
            Self::TrajectoryDump => "trajectory-dump",
            Self::FwhmScan => "fwhm-scan",
            Self::Params => "params",
        })
    }
}

/// How the drive is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    TargetX(f64),
    Epsilon(f64),
}

/// Which rate divides the widths in a FWHM scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalize {
    Kappa,
    Gamma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub mode: RunMode,
    /// `epsilon` is overwritten once the drive is resolved.
    pub params: SystemParams,
    /// `None` only for FWHM scans, which take drives from `drive_grid`.
    pub drive: Option<Drive>,
    /// Fixed truncation; chosen by photon-number convergence when unset.
    pub n_max: Option<usize>,
    pub detection: Mode,
    pub starts: u64,
    /// µs. Window half-width for `correlate`, record length for
    /// `trajectory-dump`.
    pub duration: f64,
    pub seed: u64,
    pub nu_max: f64,
    pub nu_step: f64,
    /// `ε/κ` values for FWHM scans.
    pub drive_grid: Vec<f64>,
    /// `γ` values (MHz) for FWHM scans.
    pub gamma_grid: Vec<f64>,
    pub normalize: Normalize,
    /// Integration steps per sample are multiplied by this.
    pub dt_refine: usize,
}

pub const PRESETS: [&str; 7] = ["fig5", "fig7", "fig8", "fig9", "fig10", "fig12", "fig13"];

fn base(name: &str, mode: RunMode) -> Scenario {
    Scenario {
        name: name.to_string(),
        mode,
        params: SystemParams::default(),
        drive: None,
        n_max: None,
        detection: Mode::Homodyne,
        starts: 1000,
        duration: 1.5,
        seed: 1,
        nu_max: 80.0,
        nu_step: 0.5,
        drive_grid: Vec::new(),
        gamma_grid: Vec::new(),
        normalize: Normalize::Kappa,
        dt_refine: 1,
    }
}

fn two_atoms(mut s: Scenario) -> Scenario {
    s.params.n_atoms = 2;
    s.params.g = 38.0 / 2f64.sqrt();
    s
}

pub fn preset(name: &str) -> Option<Scenario> {
    let s = match name {
        "fig5" => Scenario { drive: Some(Drive::TargetX(2.99e-4)), starts: 55_000, ..base(name, RunMode::Correlate) },
        "fig7" => two_atoms(Scenario { drive: Some(Drive::TargetX(1.36)), ..base(name, RunMode::Qrt) }),
        "fig8" => Scenario { drive: Some(Drive::TargetX(104.0)), ..base(name, RunMode::Qrt) },
        "fig9" => two_atoms(Scenario { drive: Some(Drive::TargetX(18.1)), ..base(name, RunMode::Qrt) }),
        "fig10" => two_atoms(Scenario {
            drive: Some(Drive::TargetX(18.1)),
            detection: Mode::Photocount,
            starts: 5000,
            duration: 1.0,
            ..base(name, RunMode::Correlate)
        }),
        "fig12" => Scenario {
            drive_grid: vec![1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0],
            gamma_grid: vec![3.0],
            nu_max: 100.0,
            nu_step: 0.05,
            ..base(name, RunMode::FwhmScan)
        },
        "fig13" => two_atoms(Scenario {
            drive_grid: vec![0.6, 0.8, 1.0, 1.2],
            gamma_grid: vec![3.0, 1.0, 0.5],
            normalize: Normalize::Gamma,
            nu_max: 100.0,
            nu_step: 0.05,
            ..base(name, RunMode::FwhmScan)
        }),
        _ => return None,
    };
    Some(s)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("bad value for {key}: '{value}'"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

/// Parses the flat config format: one `key = value` per line, `#` starts a
/// comment. `preset = <name>` (first) starts from a preset; other keys
/// override it. Keys follow the `SystemParams` field names plus the
/// scenario fields.
pub fn parse_config(text: &str, default_name: &str) -> Result<Scenario, String> {
    let mut s: Option<Scenario> = None;
    let mut epsilon = None;
    let mut target_x = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "preset" {
            if s.is_some() {
                return Err(format!("line {}: preset must come first", lineno + 1));
            }
            s = Some(preset(value).ok_or_else(|| format!("unknown preset '{value}'"))?);
            continue;
        }
        let sc = s.get_or_insert_with(|| base(default_name, RunMode::Qrt));
        let p = &mut sc.params;
        match key {
            "name" => sc.name = value.to_string(),
            "mode" => sc.mode = value.parse()?,
            "g" => p.g = parse(key, value)?,
            "kappa" => p.kappa = parse(key, value)?,
            "gamma" => p.gamma = parse(key, value)?,
            "gamma_bw" => p.gamma_bw = parse(key, value)?,
            "n_atoms" => p.n_atoms = parse(key, value)?,
            "n_max" => sc.n_max = Some(parse(key, value)?),
            "r" => p.r = parse(key, value)?,
            "theta" => p.theta = parse(key, value)?,
            "eta" => p.eta = parse(key, value)?,
            "epsilon" => epsilon = Some(parse(key, value)?),
            "target_x" => target_x = Some(parse(key, value)?),
            "detection" => {
                sc.detection = match value {
                    "homodyne" => Mode::Homodyne,
                    "photocount" => Mode::Photocount,
                    _ => return Err(format!("detection must be homodyne or photocount, got '{value}'")),
                }
            }
            "starts" => sc.starts = parse(key, value)?,
            "duration" => sc.duration = parse(key, value)?,
            "seed" => sc.seed = parse(key, value)?,
            "nu_max" => sc.nu_max = parse(key, value)?,
            "nu_step" => sc.nu_step = parse(key, value)?,
            "drive_grid" => sc.drive_grid = parse_list(key, value)?,
            "gamma_grid" => sc.gamma_grid = parse_list(key, value)?,
            "normalize" => {
                sc.normalize = match value {
                    "kappa" => Normalize::Kappa,
                    "gamma" => Normalize::Gamma,
                    _ => return Err(format!("normalize must be kappa or gamma, got '{value}'")),
                }
            }
            "dt_refine" => sc.dt_refine = parse(key, value)?,
            _ => return Err(format!("line {}: unknown key '{key}'", lineno + 1)),
        }
    }
    let mut s = s.ok_or("empty scenario file")?;
    match (epsilon, target_x) {
        (Some(_), Some(_)) => return Err("give exactly one of epsilon and target_x".into()),
        (Some(e), None) => s.drive = Some(Drive::Epsilon(e)),
        (None, Some(x)) => s.drive = Some(Drive::TargetX(x)),
        (None, None) => {}
    }
    Ok(s)
}

impl Scenario {
    pub fn validate(&self) -> Result<(), String> {
        let mut p = self.params.clone();
        p.epsilon = match self.drive {
            Some(Drive::Epsilon(e)) => e,
            _ => 0.0,
        };
        if let Some(n) = self.n_max {
            p.n_max = n;
        }
        p.validate().map_err(|e| e.to_string())?;
        match (self.mode, self.drive) {
            (RunMode::FwhmScan, _) => {
                if self.drive_grid.is_empty() || self.gamma_grid.is_empty() {
                    return Err("fwhm-scan needs drive_grid and gamma_grid".into());
                }
                if self.drive_grid.iter().chain(&self.gamma_grid).any(|v| !(*v > 0.0)) {
                    return Err("drive_grid and gamma_grid values must be > 0".into());
                }
            }
            (_, None) => return Err("give exactly one of epsilon and target_x".into()),
            (_, Some(Drive::TargetX(x))) if !(x > 0.0) => return Err(format!("target_x must be > 0, got {x}")),
            _ => {}
        }
        if !(self.duration > 0.0) {
            return Err(format!("duration must be > 0, got {}", self.duration));
        }
        if self.starts == 0 && matches!(self.mode, RunMode::Correlate | RunMode::TrajectoryDump) {
            return Err("starts must be > 0".into());
        }
        if !(self.nu_step > 0.0 && self.nu_max >= self.nu_step) {
            return Err("need 0 < nu_step <= nu_max".into());
        }
        if self.dt_refine == 0 {
            return Err("dt_refine must be >= 1".into());
        }
        Ok(())
    }
}
