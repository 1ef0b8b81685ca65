//! Seeded Monte-Carlo sweeps over the system parameters, with every scheme run
//! on the same channel realization within a trial.

pub mod config;
pub mod emit;
pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{run_scheme, SchemeId};
use crate::channel::{synthesize, ArraySpec, Arrays, ChannelSet, FadingParams, NlosNormalization, PathLossConvention};
use crate::error::{Error, Result};
use crate::geometry::{advance, derive_geometry, SceneConfig};
use crate::rate::{PhaseConfig, PhaseGrid, RateParams};
use crate::solver::{complexity_counters, fix_pep, initial_phases, SolverConfig, SolverState};
use crate::units::noise_power_watts;

pub use config::{ConfigFile, ExperimentConfig, OutputFormat, SweepParam};

/// Receive-side gain that brings the default scene to a per-user SNR of a few
/// tens of dB; the path-loss exponents alone leave the links near -210 dB.
pub const DEFAULT_RX_GAIN_DB: f64 = 120.0;
/// Channels are drawn 0.5 s into the run, while the train is still approaching.
pub const DEFAULT_EVAL_SLOT: u64 = 500;
pub const FORMAT_VERSION: u32 = 1;

/// All system parameters of one sweep point, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub carrier_hz: f64,
    /// W
    pub p_max: f64,
    pub n_b: usize,
    pub f: usize,
    pub m: usize,
    pub blocklength: f64,
    pub eps_max: f64,
    /// Rician K-factor, linear.
    pub kappa: f64,
    pub bits: u32,
    /// m/s
    pub speed: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub alpha_direct: f64,
    pub alpha_ris_user: f64,
    pub alpha_bs_ris: f64,
    pub rx_gain_db: f64,
    pub nlos: NlosNormalization,
    pub path_loss: PathLossConvention,
    /// Scene at slot 0; users beyond `m` are dropped.
    pub scene: SceneConfig,
    pub eval_slot: u64,
    pub solver: SolverConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        ConfigFile::default()
            .resolve()
            .expect("defaults are valid")
            .base
    }
}

/// Inputs shared by every scheme in one trial.
#[derive(Debug, Clone)]
pub struct Trial {
    pub seed: u64,
    pub channels: ChannelSet,
    pub theta0: PhaseConfig,
    pub params: RateParams,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_b == 0 {
            return Err(Error::Config("n_b must be at least 1".into()));
        }
        if self.m == 0 || self.m > self.n_b {
            return Err(Error::Config(format!(
                "need 1 <= m <= n_b, got m={} n_b={}",
                self.m, self.n_b
            )));
        }
        PhaseGrid::new(self.bits)?;
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::Config(format!("speed must be >= 0, got {}", self.speed)));
        }
        self.scene()?.validate()?;
        self.fading().validate()?;
        self.rate_params()?;
        self.solver.validate()?;
        Ok(())
    }

    pub fn grid(&self) -> PhaseGrid {
        PhaseGrid { bits: self.bits }
    }

    pub fn scene(&self) -> Result<SceneConfig> {
        let mut scene = self.scene.clone().with_users(self.m)?;
        scene.train_speed = self.speed;
        Ok(scene)
    }

    pub fn arrays(&self) -> Arrays {
        let lambda = crate::units::wavelength(self.carrier_hz);
        Arrays {
            bs: ArraySpec::near_square(self.n_b, lambda),
            ris: ArraySpec::near_square(self.f, lambda),
        }
    }

    pub fn fading(&self) -> FadingParams {
        FadingParams {
            kappa: self.kappa,
            alpha_direct: self.alpha_direct,
            alpha_bs_ris: self.alpha_bs_ris,
            alpha_ris_user: self.alpha_ris_user,
            carrier_hz: self.carrier_hz,
            rx_gain_db: self.rx_gain_db,
            nlos: self.nlos,
            path_loss: self.path_loss,
        }
    }

    pub fn noise_power(&self) -> f64 {
        noise_power_watts(self.bandwidth_hz, self.noise_figure_db)
    }

    pub fn rate_params(&self) -> Result<RateParams> {
        RateParams::new(
            self.blocklength,
            fix_pep(self.eps_max, self.m)?,
            self.eps_max,
            self.noise_power(),
        )
    }

    /// Channels at `eval_slot` for trial seed `seed`.
    pub fn channels(&self, seed: u64) -> Result<ChannelSet> {
        let scene = advance(&self.scene()?, self.eval_slot);
        let geom = derive_geometry(&scene)?;
        synthesize(
            &geom,
            &self.arrays(),
            &self.fading(),
            self.speed,
            scene.slot_duration,
            seed,
        )
    }

    pub fn trial(&self, seed: u64) -> Result<Trial> {
        Ok(Trial {
            seed,
            channels: self.channels(seed)?,
            theta0: initial_phases(self.f, self.grid(), seed),
            params: self.rate_params()?,
        })
    }
}

/// Seed of trial `trial`; independent of the sweep value so every point of a
/// sweep sees the same draws.
pub fn trial_seed(root: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(trial);
    rng.next_u64()
}

/// Result of one scheme on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRun {
    pub sum_rate: f64,
    pub user_rates: Vec<f64>,
    pub trace: Vec<f64>,
    pub outer_iterations: u64,
    pub inner_iterations: u64,
    pub max_inner_per_call: u64,
    pub phase_evaluations: u64,
    /// Phase evaluations equal `outer * F * E` for this run.
    pub phase_count_exact: bool,
    pub converged: bool,
}

impl SchemeRun {
    pub fn from_state(scheme: SchemeId, state: &SolverState) -> Self {
        let report = complexity_counters(state);
        let exact = match scheme {
            SchemeId::Proposed | SchemeId::ShannonRate | SchemeId::BinarySearch | SchemeId::WithoutRis => {
                report.phase_evaluations == report.expected_phase_evaluations
            }
            _ => true,
        };
        Self {
            sum_rate: state.rate.total,
            user_rates: state.rate.users.iter().map(|u| u.rate.max(0.0)).collect(),
            trace: state.trace.clone(),
            outer_iterations: report.outer_iterations,
            inner_iterations: report.inner_iterations,
            max_inner_per_call: report.max_inner_per_call,
            phase_evaluations: report.phase_evaluations,
            phase_count_exact: exact,
            converged: state.converged,
        }
    }
}

pub type TrialResults = Vec<std::result::Result<SchemeRun, String>>;

/// Runs every scheme in `schemes` on one trial.
pub fn run_trial(sys: &SystemConfig, schemes: &[SchemeId], seed: u64) -> TrialResults {
    let trial = match sys.trial(seed) {
        Ok(t) => t,
        Err(e) => return schemes.iter().map(|_| Err(e.to_string())).collect(),
    };
    schemes
        .iter()
        .map(|&s| {
            run_scheme(s, &trial.channels, &trial.theta0, &sys.solver, &trial.params, seed)
                .map(|st| SchemeRun::from_state(s, &st))
                .map_err(|e| e.to_string())
        })
        .collect()
}

pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// `[trial][scheme]` results, in trial order whatever the thread count.
pub fn run_point(
    sys: &SystemConfig,
    schemes: &[SchemeId],
    trials: usize,
    root_seed: u64,
    pool: &rayon::ThreadPool,
) -> Vec<TrialResults> {
    pool.install(|| {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| run_trial(sys, schemes, trial_seed(root_seed, t)))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanComplexity {
    pub outer_iterations: f64,
    pub inner_iterations: f64,
    pub phase_evaluations: f64,
    pub max_inner_per_call: u64,
    /// Every successful trial had phase evaluations equal to `outer * F * E`.
    pub phase_count_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub sweep_param: SweepParam,
    pub sweep_value: f64,
    pub scheme: SchemeId,
    pub mean_sum_rate: Option<f64>,
    pub stderr: Option<f64>,
    /// Successful trials.
    pub trials: usize,
    pub failures: usize,
    pub mean_outer_iters: Option<f64>,
    pub mean_user_rates: Vec<f64>,
    pub complexity: MeanComplexity,
    /// Mean sum rate per outer iteration; shorter traces are held at their
    /// final value.
    pub mean_trace: Vec<f64>,
    /// First failure message, if any.
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub format_version: u32,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub trials_requested: usize,
    pub sweep_param: SweepParam,
    pub rows: Vec<Row>,
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate(
    param: SweepParam,
    value: f64,
    scheme: SchemeId,
    runs: &[&std::result::Result<SchemeRun, String>],
) -> Row {
    let ok: Vec<&SchemeRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let first_error = runs.iter().find_map(|r| r.as_ref().err().cloned());
    let n = ok.len();
    let mean = |f: &dyn Fn(&SchemeRun) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n as f64;
    let (mean_sum_rate, stderr) = if n == 0 {
        (None, None)
    } else {
        let (m, s) = mean_and_stderr(&ok.iter().map(|r| r.sum_rate).collect::<Vec<_>>());
        (Some(m), Some(s))
    };
    let users = ok.first().map_or(0, |r| r.user_rates.len());
    let mean_user_rates = (0..users)
        .map(|u| mean(&|r: &SchemeRun| r.user_rates[u]))
        .collect();
    let len = ok.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    let mean_trace = (0..len)
        .map(|i| mean(&|r: &SchemeRun| *r.trace.get(i).or(r.trace.last()).unwrap_or(&0.0)))
        .collect();
    Row {
        sweep_param: param,
        sweep_value: value,
        scheme,
        mean_sum_rate,
        stderr,
        trials: n,
        failures: runs.len() - n,
        mean_outer_iters: (n > 0).then(|| mean(&|r: &SchemeRun| r.outer_iterations as f64)),
        mean_user_rates,
        complexity: MeanComplexity {
            outer_iterations: if n > 0 { mean(&|r: &SchemeRun| r.outer_iterations as f64) } else { 0.0 },
            inner_iterations: if n > 0 { mean(&|r: &SchemeRun| r.inner_iterations as f64) } else { 0.0 },
            phase_evaluations: if n > 0 { mean(&|r: &SchemeRun| r.phase_evaluations as f64) } else { 0.0 },
            max_inner_per_call: ok.iter().map(|r| r.max_inner_per_call).max().unwrap_or(0),
            phase_count_exact: ok.iter().all(|r| r.phase_count_exact),
        },
        mean_trace,
        first_error,
    }
}

/// sha256 of the resolved configuration, ignoring settings that cannot change
/// the numbers (threads, output path and format).
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut src = cfg.source.clone();
    src.run.threads = None;
    src.run.out = None;
    src.run.format = OutputFormat::Csv;
    hex::encode(Sha256::digest(src.to_toml().as_bytes()))
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let pool = thread_pool(cfg.threads)?;
    let mut rows = Vec::with_capacity(cfg.sweep_values.len() * cfg.schemes.len());
    for &value in &cfg.sweep_values {
        let sys = cfg.at(value)?;
        let results = run_point(&sys, &cfg.schemes, cfg.trials, cfg.root_seed, &pool);
        for (k, &scheme) in cfg.schemes.iter().enumerate() {
            let runs: Vec<_> = results.iter().map(|t| &t[k]).collect();
            rows.push(aggregate(cfg.sweep_param, value, scheme, &runs));
        }
    }
    Ok(SweepResult {
        format_version: FORMAT_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(cfg),
        seed: cfg.root_seed,
        trials_requested: cfg.trials,
        sweep_param: cfg.sweep_param,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: i64, seed: u64) -> ExperimentConfig {
        let text = format!(
            "[system]\nf = 9\n[run]\ntrials = {trials}\nseed = {seed}\nschemes = [\"proposed\", \"without_ris\"]\n"
        );
        ConfigFile::parse(&text).unwrap().resolve().unwrap()
    }

    #[test]
    fn defaults_build_a_trial() {
        let sys = SystemConfig::default();
        let t = sys.trial(7).unwrap();
        assert_eq!(t.channels.num_users(), 4);
        assert_eq!(t.channels.num_antennas(), 4);
        assert_eq!(t.channels.num_elements(), 36);
        assert_eq!(t.theta0.len(), 36);
        assert!((sys.noise_power() - 7.962e-12).abs() < 1e-14);
    }

    #[test]
    fn trial_seeds_differ_and_repeat() {
        assert_eq!(trial_seed(1, 5), trial_seed(1, 5));
        assert_ne!(trial_seed(1, 5), trial_seed(1, 6));
        assert_ne!(trial_seed(1, 5), trial_seed(2, 5));
    }

    #[test]
    fn one_trial_one_row_and_rerun_identical() {
        let mut cfg = small(1, 3);
        cfg.schemes = vec![SchemeId::Proposed];
        let a = run_sweep(&cfg).unwrap();
        assert_eq!(a.rows.len(), 1);
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut cfg = small(6, 11);
        cfg.threads = Some(1);
        let a = run_sweep(&cfg).unwrap();
        cfg.threads = Some(3);
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn paired_trials_share_direct_channels() {
        let sys = SystemConfig::default();
        let seed = trial_seed(4, 0);
        let a = sys.channels(seed).unwrap();
        let mut bigger = sys.clone();
        bigger.f = 64;
        let b = bigger.channels(seed).unwrap();
        assert_eq!(a.h_d, b.h_d);
    }

    #[test]
    fn stderr_of_known_sample() {
        let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_stderr(&[3.0]).1, 0.0);
    }
}
