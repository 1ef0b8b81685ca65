//! Closed-form and brute-force checks behind the `oracle` subcommand.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_gaussian, ChannelSet, C64};
use crate::rate::{q_function, q_inv, PhaseGrid, RateMode};
use crate::solver::{
    allocate, allocate_bisection, default_mu0, exhaustive_search, initial_phases, phase_local_search,
    zf_directions, RateContext, StepRule, ZfAdaptive,
};

#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn random_h(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(m, n, |_, _| complex_gaussian(rng, 1.0))
}

fn random_instance(rng: &mut ChaCha8Rng) -> (DMatrix<C64>, f64) {
    let n = rng.random_range(1..=8);
    let m = rng.random_range(1..=n);
    let p_max = 10f64.powf(rng.random_range(-2.0..2.0));
    (random_h(rng, m, n), p_max)
}

/// Dual iteration and bisection against `p_m = P / (M c_m)`, `mu = M / (P ln 2)`.
pub fn kkt_check(instances: usize, seed: u64) -> (OracleCheck, OracleCheck) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_dual, mut worst_bisect) = (0.0f64, 0.0f64);
    for _ in 0..instances {
        let (h, p_max) = random_instance(&mut rng);
        let Ok(dirs) = zf_directions(&h) else { continue };
        let m = dirs.c.len() as f64;
        let mu_star = m / (p_max * LN_2);
        let dual = allocate(&dirs.c, p_max, default_mu0(p_max), 1e-5, 500, StepRule::Curvature);
        let bis = allocate_bisection(&dirs.c, p_max, default_mu0(p_max), 1e-9);
        let (Ok(dual), Ok(bis)) = (dual, bis) else {
            worst_dual = f64::INFINITY;
            continue;
        };
        worst_dual = worst_dual.max(rel(dual.mu, mu_star));
        for (k, c) in dirs.c.iter().enumerate() {
            worst_dual = worst_dual.max(rel(dual.p[k], p_max / (m * c)));
            worst_bisect = worst_bisect.max(rel(bis.p[k], dual.p[k]));
        }
    }
    (
        OracleCheck {
            name: "dual power allocation matches KKT optimum",
            passed: worst_dual < 1e-6,
            detail: format!("worst relative error {worst_dual:.3e} over {instances} instances"),
        },
        OracleCheck {
            name: "bisection matches dual power allocation",
            passed: worst_bisect < 1e-6,
            detail: format!("worst relative error {worst_bisect:.3e}"),
        },
    )
}

pub fn zf_check(instances: usize, seed: u64) -> OracleCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut worst_power: f64 = 0.0;
    for _ in 0..instances {
        let (h, p_max) = random_instance(&mut rng);
        let Ok(dirs) = zf_directions(&h) else { continue };
        let m = dirs.c.len();
        let p: Vec<f64> = dirs.c.iter().map(|c| p_max / (m as f64 * c)).collect();
        let w = dirs.assemble(&p);
        let hw = &h * &w;
        let diag = (0..m).map(|i| hw[(i, i)].norm()).fold(0.0, f64::max);
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    worst = worst.max(hw[(i, j)].norm() / diag);
                }
            }
        }
        let power = (w.adjoint() * &w).trace().re;
        worst_power = worst_power.max((power - p_max) / p_max);
    }
    OracleCheck {
        name: "zero forcing nulls interference within budget",
        passed: worst < 1e-9 && worst_power <= 1e-6,
        detail: format!("worst leakage ratio {worst:.3e}, worst power excess {worst_power:.3e}"),
    }
}

pub fn q_inv_check() -> OracleCheck {
    let mut worst: f64 = 0.0;
    for k in 0..=2000 {
        let log_eps = -10.0 + 10.0 * k as f64 / 2000.0;
        let eps = 10f64.powf(log_eps).min(1.0 - 1e-10);
        for e in [eps, 1.0 - eps] {
            if e <= 0.0 || e >= 1.0 {
                continue;
            }
            let x = q_inv(e).expect("in domain");
            worst = worst.max(rel(q_function(x), e));
        }
    }
    OracleCheck {
        name: "Q^-1 round trip",
        passed: worst < 1e-9,
        detail: format!("worst relative error {worst:.3e}"),
    }
}

fn random_channels(rng: &mut ChaCha8Rng, m: usize, n: usize, f: usize) -> ChannelSet {
    let mut g = |r, c, s| DMatrix::from_fn(r, c, |_, _| complex_gaussian(rng, s));
    let h_d = (0..m).map(|_| DVector::from_column_slice(g(n, 1, 1.0).as_slice())).collect();
    let h_br = g(f, n, 0.3);
    let h_r = (0..m).map(|_| DVector::from_column_slice(g(f, 1, 1.0).as_slice())).collect();
    ChannelSet { h_d, h_br, h_r }
}

/// Local search against exhaustive enumeration on small RIS sizes.
pub fn local_search_check(seeds: u64, max_f: usize) -> OracleCheck {
    let mut matches = 0;
    let mut total = 0;
    for bits in [1, 2] {
        let grid = PhaseGrid::new(bits).expect("valid bits");
        for f in 1..=max_f {
            for seed in 0..seeds {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + f as u64 * 10 + bits as u64);
                let ch = random_channels(&mut rng, 2, 3, f);
                let obj = ZfAdaptive {
                    mu: 2.0 / LN_2,
                    rates: RateContext {
                        sigma2: 0.05,
                        blocklength: 100.0,
                        q_inv: vec![q_inv(1e-4).expect("in domain"); 2],
                        mode: RateMode::Fbl,
                    },
                };
                let out = phase_local_search(&ch, &initial_phases(f, grid, seed), &obj)
                    .expect("valid search input");
                let (_, best) = exhaustive_search(&ch, grid, &obj);
                total += 1;
                if out.value >= best - 1e-9 * best.abs().max(1.0) {
                    matches += 1;
                }
            }
        }
    }
    OracleCheck {
        name: "single-pass local search equals exhaustive search",
        passed: matches == total,
        detail: format!("{matches}/{total} instances matched"),
    }
}

pub fn run_all() -> Vec<OracleCheck> {
    let (dual, bis) = kkt_check(1000, 1);
    vec![
        dual,
        bis,
        zf_check(1000, 2),
        q_inv_check(),
        local_search_check(20, 4),
    ]
}
