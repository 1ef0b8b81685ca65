//! Rate kernels: equivalent channel, SINR, channel dispersion, inverse Q-function
//! and the finite-blocklength normal approximation.

use std::f64::consts::{LOG2_E, PI, TAU};

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, C64};
use crate::error::{Error, Result};

/// Quantized phase set `{0, d, ..., d (E - 1)}` with `E = 2^bits`, `d = 2 pi / E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub bits: u32,
}

impl PhaseGrid {
    pub fn new(bits: u32) -> Result<Self> {
        if !(1..=16).contains(&bits) {
            return Err(Error::InvalidArgument(format!(
                "quantization bits must be in 1..=16, got {bits}"
            )));
        }
        Ok(Self { bits })
    }

    pub fn levels(&self) -> usize {
        1 << self.bits
    }

    pub fn step(&self) -> f64 {
        TAU / self.levels() as f64
    }

    pub fn value(&self, k: usize) -> f64 {
        self.step() * k as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.levels()).map(|k| self.value(k))
    }

    /// Index of the level `theta` sits on, if any.
    pub fn index_of(&self, theta: f64) -> Option<usize> {
        let k = (theta / self.step()).round();
        let k_int = k as usize;
        (k >= 0.0 && k_int < self.levels() && (self.value(k_int) - theta).abs() < 1e-12)
            .then_some(k_int)
    }

    /// Level for a uniform draw `u` in [0, 1).
    pub fn from_unit(&self, u: f64) -> f64 {
        let k = ((u * self.levels() as f64) as usize).min(self.levels() - 1);
        self.value(k)
    }
}

/// RIS phase vector; `grid` is `None` for continuous phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub theta: Vec<f64>,
    pub grid: Option<PhaseGrid>,
}

impl PhaseConfig {
    pub fn zeros(f: usize, grid: Option<PhaseGrid>) -> Self {
        Self {
            theta: vec![0.0; f],
            grid,
        }
    }

    pub fn continuous(theta: Vec<f64>) -> Self {
        Self { theta, grid: None }
    }

    pub fn quantized(theta: Vec<f64>, grid: PhaseGrid) -> Result<Self> {
        let cfg = Self {
            theta,
            grid: Some(grid),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(grid) = self.grid {
            if let Some(bad) = self.theta.iter().find(|t| grid.index_of(**t).is_none()) {
                return Err(Error::InvalidArgument(format!(
                    "phase {bad} is not on the {}-level grid",
                    grid.levels()
                )));
            }
        } else if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("non-finite phase".into()));
        }
        Ok(())
    }
}

/// Which rate expression is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// Finite-blocklength normal approximation.
    Fbl,
    /// Dispersion forced to zero.
    Shannon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub blocklength: f64,
    pub eps: Vec<f64>,
    pub eps_max: f64,
    pub sigma2: f64,
}

impl RateParams {
    pub fn new(blocklength: f64, eps: Vec<f64>, eps_max: f64, sigma2: f64) -> Result<Self> {
        let p = Self {
            blocklength,
            eps,
            eps_max,
            sigma2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.blocklength >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "blocklength must be >= 1, got {}",
                self.blocklength
            )));
        }
        if !(self.eps_max > 0.0 && self.eps_max < 1.0) {
            return Err(Error::Domain {
                what: "maximum packet error probability",
                value: self.eps_max,
            });
        }
        if let Some(&e) = self.eps.iter().find(|&&e| !(e > 0.0 && e <= self.eps_max)) {
            return Err(Error::Domain {
                what: "packet error probability",
                value: e,
            });
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise power must be positive, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    /// `Q^-1(eps_m)` per user.
    pub fn q_inv_per_user(&self) -> Result<Vec<f64>> {
        self.eps.iter().map(|&e| q_inv(e)).collect()
    }
}

/// Equivalent channel row `h_{d,m}^H + h_{R,m}^H diag(e^{j theta}) H_BR`.
pub fn equivalent_channel(ch: &ChannelSet, theta: &[f64], m: usize) -> RowDVector<C64> {
    let mut h = ch.h_d[m].adjoint();
    for (f, &t) in theta.iter().enumerate() {
        let coef = ch.h_r[m][f].conj() * C64::from_polar(1.0, t);
        h += ch.h_br.row(f) * coef;
    }
    h
}

/// All equivalent channels stacked as an `M x N_B` matrix.
pub fn equivalent_channels(ch: &ChannelSet, theta: &[f64]) -> DMatrix<C64> {
    let m = ch.num_users();
    let n = ch.num_antennas();
    let mut h = DMatrix::zeros(m, n);
    for u in 0..m {
        h.set_row(u, &equivalent_channel(ch, theta, u));
    }
    h
}

/// `|h_m w_m|^2 / (sum_{j != m} |h_m w_j|^2 + sigma2)` on stacked channels `h`.
pub fn sinr_from_channels(h: &DMatrix<C64>, w: &DMatrix<C64>, m: usize, sigma2: f64) -> f64 {
    let hw = h.row(m) * w;
    let signal = hw[m].norm_sqr();
    let interference: f64 = hw
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != m)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    signal / (interference + sigma2)
}

pub fn sinr(ch: &ChannelSet, theta: &[f64], w: &DMatrix<C64>, m: usize, sigma2: f64) -> f64 {
    let h = equivalent_channel(ch, theta, m);
    let hw = &h * w;
    let signal = hw[m].norm_sqr();
    let interference: f64 = hw
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != m)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    signal / (interference + sigma2)
}

/// Upper-tail standard normal probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on (0, 1).
pub fn q_inv(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain {
            what: "Q^-1 argument",
            value: eps,
        });
    }
    if eps > 0.5 {
        // 1 - eps is exact for eps in [0.5, 1].
        return Ok(-q_inv_lower(1.0 - eps));
    }
    Ok(q_inv_lower(eps))
}

/// Q^-1 for eps in (0, 0.5]: Wichura's AS241 quantile, then one Halley step.
fn q_inv_lower(eps: f64) -> f64 {
    let mut y = normal_quantile(eps);
    // Halley refinement of Phi(y) = eps, where Phi(y) = Q(-y).
    let e = q_function(-y) - eps;
    let u = e * (2.0 * PI).sqrt() * (0.5 * y * y).exp();
    y -= u / (1.0 + 0.5 * y * u);
    -y
}

/// Lower-tail normal quantile (AS241, PPND16).
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
        4.592_195_393_154_987e4,
        6.726_577_092_700_87e4,
        3.343_057_558_358_813e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.872_871_378_068_431e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_7e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_545e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.043_131_055_024_158_6e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

/// Channel dispersion `(log2 e)^2 (1 - (1 + gamma)^-2)`.
pub fn dispersion(gamma: f64) -> f64 {
    LOG2_E * LOG2_E * (1.0 - (1.0 + gamma).powi(-2))
}

/// Rate with a precomputed `Q^-1(eps)`.
pub fn fbl_rate_q(gamma: f64, blocklength: f64, q_inv_eps: f64, mode: RateMode) -> f64 {
    let shannon = gamma.ln_1p() * LOG2_E;
    match mode {
        RateMode::Shannon => shannon,
        RateMode::Fbl => shannon - (dispersion(gamma) / blocklength).sqrt() * q_inv_eps,
    }
}

/// `log2(1 + gamma) - sqrt(V(gamma) / L) Q^-1(eps)`; may be negative.
pub fn fbl_rate(gamma: f64, blocklength: f64, eps: f64) -> Result<f64> {
    Ok(fbl_rate_q(gamma, blocklength, q_inv(eps)?, RateMode::Fbl))
}

/// High-SINR form `log2(gamma) - sqrt(1/L) Q^-1(eps) log2(e)`.
pub fn fbl_rate_high_snr(gamma: f64, blocklength: f64, eps: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain {
            what: "SINR for the high-SINR rate",
            value: gamma,
        });
    }
    Ok(gamma.log2() - blocklength.recip().sqrt() * q_inv(eps)? * LOG2_E)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRate {
    pub sinr: f64,
    /// Unclamped rate (bits/channel use).
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRate {
    /// Sum of per-user rates clamped at zero.
    pub total: f64,
    /// Unclamped sum, the quantity the optimizer works with.
    pub objective: f64,
    pub users: Vec<UserRate>,
}

impl SumRate {
    pub fn from_sinrs(sinrs: &[f64], blocklength: f64, q_inv: &[f64], mode: RateMode) -> Self {
        let users: Vec<UserRate> = sinrs
            .iter()
            .zip(q_inv)
            .map(|(&g, &q)| UserRate {
                sinr: g,
                rate: fbl_rate_q(g, blocklength, q, mode),
            })
            .collect();
        let total = users.iter().map(|u| u.rate.max(0.0)).sum();
        let objective = users.iter().map(|u| u.rate).sum();
        Self {
            total,
            objective,
            users,
        }
    }
}

/// Sum rate of beamformer `w` (`N_B x M`) under phases `theta`.
pub fn sum_rate(
    ch: &ChannelSet,
    theta: &[f64],
    w: &DMatrix<C64>,
    params: &RateParams,
    mode: RateMode,
) -> Result<SumRate> {
    let h = equivalent_channels(ch, theta);
    let sinrs: Vec<f64> = (0..ch.num_users())
        .map(|m| sinr_from_channels(&h, w, m, params.sigma2))
        .collect();
    Ok(SumRate::from_sinrs(
        &sinrs,
        params.blocklength,
        &params.q_inv_per_user()?,
        mode,
    ))
}
