use ris_urllc::baselines::{run_scheme, SchemeId};
use ris_urllc::experiments::emit::{from_json, to_json};
use ris_urllc::experiments::{run_sweep, trial_seed, ConfigFile, SweepParam, SystemConfig};
use ris_urllc::rate::{sum_rate, RateMode};
use ris_urllc::solver::{complexity_counters, run_loop, LoopSpec};

fn small() -> SystemConfig {
    SystemConfig {
        f: 9,
        ..Default::default()
    }
}

#[test]
fn final_state_reproduces_reported_rate() {
    let sys = small();
    let trial = sys.trial(trial_seed(3, 0)).unwrap();
    let state = run_loop(&trial.channels, &trial.theta0, &sys.solver, &trial.params, LoopSpec::PROPOSED).unwrap();
    let direct = sum_rate(&trial.channels, &state.theta.theta, &state.w, &trial.params, RateMode::Fbl).unwrap();
    assert!((direct.total - state.rate.total).abs() < 1e-9 * direct.total.abs().max(1.0));
    assert_eq!(*state.trace.last().unwrap(), state.rate.total);
    let power: f64 = (state.w.adjoint() * &state.w).trace().re;
    assert!(power <= sys.p_max * (1.0 + 1e-6));
}

#[test]
fn counters_match_grid_size() {
    let sys = small();
    let trial = sys.trial(trial_seed(4, 0)).unwrap();
    let state = run_scheme(SchemeId::Proposed, &trial.channels, &trial.theta0, &sys.solver, &trial.params, trial.seed).unwrap();
    let report = complexity_counters(&state);
    assert_eq!(report.phase_evaluations, report.outer_iterations * 9 * 4);
    assert!(report.max_inner_per_call <= sys.solver.t1_max as u64);
}

#[test]
fn no_ris_converges_immediately() {
    let sys = SystemConfig {
        f: 0,
        ..Default::default()
    };
    let trial = sys.trial(trial_seed(5, 0)).unwrap();
    let state = run_loop(&trial.channels, &trial.theta0, &sys.solver, &trial.params, LoopSpec::PROPOSED).unwrap();
    assert_eq!(complexity_counters(&state).outer_iterations, 1);
    assert!(state.converged);
}

#[test]
fn sweep_json_round_trip() {
    let text = "[system]\nf = 4\n[sweep]\nparam = \"b\"\nvalues = [1, 3]\n[run]\ntrials = 4\nschemes = [\"proposed\", \"random_phase\"]\n";
    let cfg = ConfigFile::parse(text).unwrap().resolve().unwrap();
    let result = run_sweep(&cfg).unwrap();
    assert_eq!(result.sweep_param, SweepParam::B);
    assert_eq!(result.rows.len(), 4);
    let back = from_json(&to_json(&result).unwrap()).unwrap();
    assert_eq!(back.rows.len(), result.rows.len());
    for (a, b) in back.rows.iter().zip(&result.rows) {
        assert_eq!(a.scheme, b.scheme);
        let (x, y) = (a.mean_sum_rate.unwrap(), b.mean_sum_rate.unwrap());
        assert!((x - y).abs() <= 1e-8 * y.abs());
    }
}

#[test]
fn config_hash_ignores_runtime_knobs() {
    let base = "[run]\ntrials = 4\n";
    let a = ConfigFile::parse(base).unwrap().resolve().unwrap();
    let b = ConfigFile::parse(&format!("{base}threads = 3\nformat = \"json\"\n")).unwrap().resolve().unwrap();
    let c = ConfigFile::parse("[run]\ntrials = 5\n").unwrap().resolve().unwrap();
    let hash = ris_urllc::experiments::config_hash;
    assert_eq!(hash(&a), hash(&b));
    assert_ne!(hash(&a), hash(&c));
}
