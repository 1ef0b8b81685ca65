//! TOML experiment files. Every section and key is optional; missing values
//! take the defaults below. Units are converted to SI once, in [`ConfigFile::resolve`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::SchemeId;
use crate::channel::{NlosNormalization, PathLossConvention};
use crate::error::{Error, Result};
use crate::geometry::{ArrayFrame, Point3, SceneConfig};
use crate::solver::{PhaseObjectiveKind, SolverConfig, StepRule};
use crate::units::{db_to_linear, dbm_to_watts, kmh_to_mps, linear_to_db, watts_to_dbm};

use super::SystemConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub carrier_ghz: f64,
    pub p_max_dbm: f64,
    pub n_b: usize,
    pub f: usize,
    pub m: usize,
    pub blocklength: f64,
    pub eps_max: f64,
    pub kappa_db: f64,
    pub bits: u32,
    pub speed_kmh: f64,
    pub bandwidth_mhz: f64,
    pub noise_figure_db: f64,
    pub alpha_direct: f64,
    pub alpha_ris_user: f64,
    pub alpha_bs_ris: f64,
    pub rx_gain_db: f64,
    pub nlos: NlosNormalization,
    pub path_loss: PathLossConvention,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            carrier_ghz: 28.0,
            p_max_dbm: 30.0,
            n_b: 4,
            f: 36,
            m: 4,
            blocklength: 100.0,
            eps_max: 1e-4,
            kappa_db: 10.0,
            bits: 2,
            speed_kmh: 360.0,
            bandwidth_mhz: 200.0,
            noise_figure_db: 10.0,
            alpha_direct: 4.0,
            alpha_ris_user: 3.0,
            alpha_bs_ris: 2.0,
            rx_gain_db: super::DEFAULT_RX_GAIN_DB,
            nlos: NlosNormalization::default(),
            path_loss: PathLossConvention::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub t1_max: usize,
    pub eps_p: f64,
    pub xi: f64,
    pub step: StepRule,
    pub mu0: Option<f64>,
    pub outer_max: usize,
    pub phase_objective: PhaseObjectiveKind,
    pub bisection_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            t1_max: s.t1_max,
            eps_p: s.eps_p,
            xi: s.xi,
            step: s.step,
            mu0: s.mu0,
            outer_max: s.outer_max,
            phase_objective: s.phase_objective,
            bisection_tol: s.bisection_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub bs_position: Point3,
    pub rail_height: f64,
    pub ris_offset: Point3,
    pub user_offsets: Vec<Point3>,
    pub slot_ms: f64,
    /// Train position at slot 0.
    pub train_x0: f64,
    /// Slot at which channels are drawn.
    pub eval_slot: u64,
    pub bs_boresight: Point3,
    pub bs_up: Point3,
    pub ris_normal: Point3,
    pub ris_up: Point3,
}

impl Default for SceneSection {
    fn default() -> Self {
        let s = SceneConfig::default();
        Self {
            bs_position: s.bs_position,
            rail_height: s.rail_height,
            ris_offset: s.ris_offset,
            user_offsets: s.user_offsets,
            slot_ms: s.slot_duration * 1e3,
            train_x0: s.train_x,
            eval_slot: super::DEFAULT_EVAL_SLOT,
            bs_boresight: s.bs_frame.boresight,
            bs_up: s.bs_frame.up,
            ris_normal: s.ris_frame.boresight,
            ris_up: s.ris_frame.up,
        }
    }
}

/// Parameter varied by a sweep; values use the config units of that parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// dBm
    PMax,
    NB,
    M,
    F,
    B,
    L,
    EpsMax,
    /// km/h
    V,
    KappaDb,
    /// Convergence traces at the base point.
    Iterations,
}

impl SweepParam {
    pub const ALL: [SweepParam; 10] = [
        SweepParam::PMax,
        SweepParam::NB,
        SweepParam::M,
        SweepParam::F,
        SweepParam::B,
        SweepParam::L,
        SweepParam::EpsMax,
        SweepParam::V,
        SweepParam::KappaDb,
        SweepParam::Iterations,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SweepParam::PMax => "p_max",
            SweepParam::NB => "n_b",
            SweepParam::M => "m",
            SweepParam::F => "f",
            SweepParam::B => "b",
            SweepParam::L => "l",
            SweepParam::EpsMax => "eps_max",
            SweepParam::V => "v",
            SweepParam::KappaDb => "kappa_db",
            SweepParam::Iterations => "iterations",
        }
    }

    fn is_count(self) -> bool {
        matches!(self, SweepParam::NB | SweepParam::M | SweepParam::F | SweepParam::B)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep parameter '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown output format '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub trials: i64,
    pub seed: u64,
    pub schemes: Vec<SchemeId>,
    pub threads: Option<usize>,
    pub format: OutputFormat,
    pub out: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 1,
            schemes: SchemeId::ALL.to_vec(),
            threads: None,
            format: OutputFormat::Csv,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub system: SystemSection,
    pub solver: SolverSection,
    pub scene: SceneSection,
    pub sweep: Option<SweepSection>,
    pub run: RunSection,
}

/// A validated experiment in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub base: SystemConfig,
    pub sweep_param: SweepParam,
    /// In config units of `sweep_param`.
    pub sweep_values: Vec<f64>,
    pub schemes: Vec<SchemeId>,
    pub trials: usize,
    pub root_seed: u64,
    pub threads: Option<usize>,
    pub format: OutputFormat,
    pub out: Option<String>,
    /// The parsed file, after command-line overrides.
    pub source: ConfigFile,
}

impl ExperimentConfig {
    pub fn is_trace(&self) -> bool {
        self.sweep_param == SweepParam::Iterations
    }

    /// System configuration at one sweep point.
    pub fn at(&self, value: f64) -> Result<SystemConfig> {
        apply_sweep(&self.base, self.sweep_param, value)
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config sections serialize")
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let s = &self.system;
        let scene = &self.scene;
        let sv = &self.solver;
        if self.run.trials < 1 {
            return Err(Error::Config(format!(
                "run.trials must be at least 1, got {}",
                self.run.trials
            )));
        }
        if self.run.schemes.is_empty() {
            return Err(Error::Config("run.schemes is empty".into()));
        }
        if self.run.threads == Some(0) {
            return Err(Error::Config("run.threads must be at least 1".into()));
        }
        let base = SystemConfig {
            carrier_hz: s.carrier_ghz * 1e9,
            p_max: dbm_to_watts(s.p_max_dbm),
            n_b: s.n_b,
            f: s.f,
            m: s.m,
            blocklength: s.blocklength,
            eps_max: s.eps_max,
            kappa: db_to_linear(s.kappa_db),
            bits: s.bits,
            speed: kmh_to_mps(s.speed_kmh),
            bandwidth_hz: s.bandwidth_mhz * 1e6,
            noise_figure_db: s.noise_figure_db,
            alpha_direct: s.alpha_direct,
            alpha_ris_user: s.alpha_ris_user,
            alpha_bs_ris: s.alpha_bs_ris,
            rx_gain_db: s.rx_gain_db,
            nlos: s.nlos,
            path_loss: s.path_loss,
            scene: SceneConfig {
                bs_position: scene.bs_position,
                rail_height: scene.rail_height,
                ris_offset: scene.ris_offset,
                user_offsets: scene.user_offsets.clone(),
                train_speed: kmh_to_mps(s.speed_kmh),
                slot_duration: scene.slot_ms * 1e-3,
                train_x: scene.train_x0,
                bs_frame: ArrayFrame::new(scene.bs_boresight, scene.bs_up),
                ris_frame: ArrayFrame::new(scene.ris_normal, scene.ris_up),
            },
            eval_slot: scene.eval_slot,
            solver: SolverConfig {
                t1_max: sv.t1_max,
                eps_p: sv.eps_p,
                xi: sv.xi,
                step: sv.step,
                mu0: sv.mu0,
                p_max: dbm_to_watts(s.p_max_dbm),
                outer_max: sv.outer_max,
                phase_objective: sv.phase_objective,
                bisection_tol: sv.bisection_tol,
            },
        };
        base.validate()?;

        let (sweep_param, sweep_values) = match &self.sweep {
            None => (SweepParam::PMax, vec![s.p_max_dbm]),
            Some(sw) if sw.param == SweepParam::Iterations => (SweepParam::Iterations, vec![0.0]),
            Some(sw) => {
                if sw.values.is_empty() {
                    return Err(Error::Config(format!(
                        "sweep over {} lists no values",
                        sw.param
                    )));
                }
                (sw.param, sw.values.clone())
            }
        };
        for &v in &sweep_values {
            apply_sweep(&base, sweep_param, v)?;
        }

        let mut schemes = self.run.schemes.clone();
        schemes.dedup();
        Ok(ExperimentConfig {
            base,
            sweep_param,
            sweep_values,
            schemes,
            trials: self.run.trials as usize,
            root_seed: self.run.seed,
            threads: self.run.threads,
            format: self.run.format,
            out: self.run.out.clone(),
            source: self.clone(),
        })
    }
}

fn as_count(param: SweepParam, value: f64) -> Result<usize> {
    if value.fract() != 0.0 || value < 0.0 || !value.is_finite() {
        return Err(Error::Config(format!(
            "sweep over {param} needs whole non-negative values, got {value}"
        )));
    }
    Ok(value as usize)
}

/// `base` with `param` set to `value` (config units), validated.
pub fn apply_sweep(base: &SystemConfig, param: SweepParam, value: f64) -> Result<SystemConfig> {
    let mut s = base.clone();
    if param.is_count() {
        let n = as_count(param, value)?;
        match param {
            SweepParam::NB => s.n_b = n,
            SweepParam::M => s.m = n,
            SweepParam::F => s.f = n,
            SweepParam::B => s.bits = n as u32,
            _ => unreachable!(),
        }
    } else {
        match param {
            SweepParam::PMax => {
                s.p_max = dbm_to_watts(value);
                s.solver.p_max = s.p_max;
            }
            SweepParam::L => s.blocklength = value,
            SweepParam::EpsMax => s.eps_max = value,
            SweepParam::V => {
                s.speed = kmh_to_mps(value);
                s.scene.train_speed = s.speed;
            }
            SweepParam::KappaDb => s.kappa = db_to_linear(value),
            SweepParam::Iterations => {}
            _ => unreachable!(),
        }
    }
    s.validate()?;
    Ok(s)
}

/// Base value of `param` in config units, for labelling.
pub fn base_value(base: &SystemConfig, param: SweepParam) -> f64 {
    match param {
        SweepParam::PMax => watts_to_dbm(base.p_max),
        SweepParam::NB => base.n_b as f64,
        SweepParam::M => base.m as f64,
        SweepParam::F => base.f as f64,
        SweepParam::B => base.bits as f64,
        SweepParam::L => base.blocklength,
        SweepParam::EpsMax => base.eps_max,
        SweepParam::V => base.speed * 3.6,
        SweepParam::KappaDb => linear_to_db(base.kappa),
        SweepParam::Iterations => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ConfigFile::parse("").unwrap().resolve().unwrap();
        let b = &cfg.base;
        assert_eq!(b.carrier_hz, 28e9);
        assert!((b.p_max - 1.0).abs() < 1e-12);
        assert_eq!((b.n_b, b.f, b.m, b.bits), (4, 36, 4, 2));
        assert_eq!(b.blocklength, 100.0);
        assert_eq!(b.eps_max, 1e-4);
        assert!((b.kappa - 10.0).abs() < 1e-12);
        assert!((b.speed - 100.0).abs() < 1e-12);
        assert_eq!(b.bandwidth_hz, 200e6);
        assert_eq!((b.alpha_direct, b.alpha_ris_user, b.alpha_bs_ris), (4.0, 3.0, 2.0));
        assert_eq!(cfg.trials, 200);
        assert_eq!(cfg.schemes.len(), 7);
    }

    #[test]
    fn p_max_sweep_enumerates_values() {
        let text = "[sweep]\nparam = \"p_max\"\nvalues = [20, 22, 24, 26, 28, 30, 32, 34, 36, 38, 40]\n";
        let cfg = ConfigFile::parse(text).unwrap().resolve().unwrap();
        assert_eq!(cfg.sweep_values.len(), 11);
        let s = cfg.at(40.0).unwrap();
        assert!((s.p_max - 10.0).abs() < 1e-12 && s.solver.p_max == s.p_max);
    }

    #[test]
    fn negative_trials_rejected() {
        let err = ConfigFile::parse("[run]\ntrials = -3\n").unwrap().resolve().unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let err = ConfigFile::parse("[system]\nbogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("line 2"), "{err}");
        assert!(ConfigFile::parse("[nope]\n").is_err());
    }

    #[test]
    fn count_sweeps_need_whole_numbers() {
        let text = "[sweep]\nparam = \"n_b\"\nvalues = [4, 6.5]\n";
        assert!(ConfigFile::parse(text).unwrap().resolve().is_err());
        let text = "[sweep]\nparam = \"m\"\nvalues = [5]\n";
        assert!(ConfigFile::parse(text).unwrap().resolve().is_err());
    }

    #[test]
    fn sweep_units_convert() {
        let base = ConfigFile::default().resolve().unwrap().base;
        let s = apply_sweep(&base, SweepParam::V, 720.0).unwrap();
        assert!((s.scene.train_speed - 200.0).abs() < 1e-12);
        let s = apply_sweep(&base, SweepParam::KappaDb, 0.0).unwrap();
        assert_eq!(s.kappa, 1.0);
        for p in SweepParam::ALL {
            assert_eq!(p.label().parse::<SweepParam>().unwrap(), p);
        }
        assert!((base_value(&base, SweepParam::PMax) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip() {
        let f = ConfigFile {
            sweep: Some(SweepSection {
                param: SweepParam::F,
                values: vec![36.0, 64.0],
            }),
            ..Default::default()
        };
        let back = ConfigFile::parse(&f.to_toml()).unwrap();
        assert_eq!(back, f);
    }
}
