//! Rician channel synthesis: direct BS-user links, the BS-RIS block and the
//! RIS-user links, built from UPA steering vectors, a per-block Doppler phase,
//! distance-dependent path loss and seeded small-scale fading.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LinkGeometry;
use crate::units;

pub type C64 = Complex64;

/// Uniform planar array with `nx * ny` elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl ArraySpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        let a = Self { nx, ny, dx, dy };
        a.validate()?;
        Ok(a)
    }

    pub fn half_wavelength(nx: usize, ny: usize, lambda: f64) -> Self {
        Self {
            nx,
            ny,
            dx: lambda / 2.0,
            dy: lambda / 2.0,
        }
    }

    /// Closest-to-square `nx * ny = n` layout with `nx <= ny`.
    pub fn near_square(n: usize, lambda: f64) -> Self {
        let mut nx = (n as f64).sqrt().floor() as usize;
        while nx > 1 && !n.is_multiple_of(nx) {
            nx -= 1;
        }
        let nx = nx.max(1);
        Self::half_wavelength(nx, n / nx, lambda)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "array must have at least one element, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.dx > 0.0 && self.dy > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "element spacing must be positive, got ({}, {})",
                self.dx, self.dy
            )));
        }
        Ok(())
    }
}

/// How the scattered part of each block is scaled relative to its LoS part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NlosNormalization {
    /// Every scattered entry is CN(0, 1).
    #[default]
    PerEntry,
    /// Scattered entries are CN(0, 1/n) so the block carries unit average power.
    PerBlock,
}

impl NlosNormalization {
    pub fn variance(self, entries: usize) -> f64 {
        match self {
            NlosNormalization::PerEntry => 1.0,
            NlosNormalization::PerBlock => 1.0 / entries.max(1) as f64,
        }
    }
}

/// Sign convention for `(lambda / (4 pi D))^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PathLossConvention {
    /// Power gain `(lambda / (4 pi D))^alpha`, below one past `lambda / 4 pi`.
    #[default]
    Attenuation,
    /// Power factor `(lambda / (4 pi D))^(-alpha)`, growing with distance.
    NegativeExponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    /// Rician K-factor, linear.
    pub kappa: f64,
    pub alpha_direct: f64,
    pub alpha_bs_ris: f64,
    pub alpha_ris_user: f64,
    pub carrier_hz: f64,
    /// Common receive-side gain applied to every user's links (dB).
    pub rx_gain_db: f64,
    pub nlos: NlosNormalization,
    pub path_loss: PathLossConvention,
}

impl FadingParams {
    pub fn wavelength(&self) -> f64 {
        units::wavelength(self.carrier_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Rician K-factor must be >= 0, got {}",
                self.kappa
            )));
        }
        for (name, a) in [
            ("alpha_direct", self.alpha_direct),
            ("alpha_bs_ris", self.alpha_bs_ris),
            ("alpha_ris_user", self.alpha_ris_user),
        ] {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {a}"
                )));
            }
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_hz
            )));
        }
        if !self.rx_gain_db.is_finite() {
            return Err(Error::InvalidArgument("rx_gain_db must be finite".into()));
        }
        Ok(())
    }
}

/// One channel realization for all users.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Direct BS-user channels, length `N_B` each.
    pub h_d: Vec<DVector<C64>>,
    /// BS-RIS channel, `F x N_B`.
    pub h_br: DMatrix<C64>,
    /// RIS-user channels, length `F` each.
    pub h_r: Vec<DVector<C64>>,
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.h_d.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.h_br.ncols()
    }

    pub fn num_elements(&self) -> usize {
        self.h_br.nrows()
    }

    /// The same direct links with the RIS removed (`F = 0`).
    pub fn without_ris(&self) -> Self {
        let n = self.num_antennas();
        Self {
            h_d: self.h_d.clone(),
            h_br: DMatrix::zeros(0, n),
            h_r: vec![DVector::zeros(0); self.num_users()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (f, n) = self.h_br.shape();
        if self.h_d.is_empty() {
            return Err(Error::InvalidArgument("channel set has no users".into()));
        }
        if self.h_r.len() != self.h_d.len() {
            return Err(Error::InvalidArgument(format!(
                "{} direct links but {} RIS links",
                self.h_d.len(),
                self.h_r.len()
            )));
        }
        if self.h_d.iter().any(|h| h.len() != n) || self.h_r.iter().any(|h| h.len() != f) {
            return Err(Error::InvalidArgument(format!(
                "channel dimensions inconsistent with an {f}x{n} BS-RIS block"
            )));
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        let ok = self.h_d.iter().all(|h| h.iter().all(finite))
            && self.h_r.iter().all(|h| h.iter().all(finite))
            && self.h_br.iter().all(finite);
        if !ok {
            return Err(Error::InvalidArgument("non-finite channel entry".into()));
        }
        Ok(())
    }
}

/// UPA steering vector, `a_x(phi, delta) (x) a_y(phi, delta)`, unit norm.
pub fn upa_response(phi: f64, delta: f64, array: &ArraySpec, lambda: f64) -> DVector<C64> {
    let kx = 2.0 * PI * array.dx / lambda * phi.sin() * delta.cos();
    let ky = 2.0 * PI * array.dy / lambda * phi.sin() * delta.sin();
    let ax = (array.nx as f64).sqrt().recip();
    let ay = (array.ny as f64).sqrt().recip();
    DVector::from_fn(array.len(), |i, _| {
        let (ix, iy) = (i / array.ny, i % array.ny);
        C64::from_polar(ax, kx * ix as f64) * C64::from_polar(ay, ky * iy as f64)
    })
}

/// Path-loss power factor for distance `d`.
pub fn path_loss(d: f64, alpha: f64, lambda: f64) -> Result<f64> {
    path_loss_with(d, alpha, lambda, PathLossConvention::Attenuation)
}

pub fn path_loss_with(
    d: f64,
    alpha: f64,
    lambda: f64,
    convention: PathLossConvention,
) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "path-loss distance must be positive, got {d}"
        )));
    }
    let ratio = lambda / (4.0 * PI * d);
    Ok(match convention {
        PathLossConvention::Attenuation => ratio.powf(alpha),
        PathLossConvention::NegativeExponent => ratio.powf(-alpha),
    })
}

/// `exp(j 2 pi f_d tau)` with `f_d = v cos(phi) cos(delta) / lambda`.
pub fn doppler_factor(v: f64, phi: f64, delta: f64, lambda: f64, tau: f64) -> C64 {
    let fd = v * phi.cos() * delta.cos() / lambda;
    C64::from_polar(1.0, 2.0 * PI * fd * tau)
}

/// Draws a CN(0, variance) sample.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// `sqrt(PL) (sqrt(k/(k+1)) los + sqrt(1/(k+1)) nlos)`, nlos i.i.d. CN(0, nlos_var),
/// drawn in column-major order.
pub fn rician_block<R: rand::Rng + ?Sized>(
    los: &DMatrix<C64>,
    pl_pow: f64,
    kappa: f64,
    nlos_var: f64,
    rng: &mut R,
) -> DMatrix<C64> {
    let (w_los, w_nlos) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (kappa + 1.0).recip().sqrt())
    };
    let amp = pl_pow.sqrt();
    los.map(|l| {
        let n = complex_gaussian(rng, nlos_var);
        (l * w_los + n * w_nlos) * amp
    })
}

/// Sub-stream identifiers, one per kind of random draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Direct = 1,
    BsRis = 2,
    RisUser = 3,
    InitialPhase = 4,
    RandomPhase = 5,
}

/// Deterministic generator for `(root, block, index)`.
pub fn substream(root: u64, block: Block, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(((block as u64) << 48) | (index & 0xffff_ffff_ffff));
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrays {
    pub bs: ArraySpec,
    pub ris: ArraySpec,
}

/// Builds one channel realization. Every user and every RIS row draws from its
/// own sub-stream, so draws are nested when `M`, `F` or `N_B` grow. An empty
/// RIS array gives zero-size RIS blocks.
pub fn synthesize(
    geom: &LinkGeometry,
    arrays: &Arrays,
    fading: &FadingParams,
    v: f64,
    tau: f64,
    seed: u64,
) -> Result<ChannelSet> {
    arrays.bs.validate()?;
    if !arrays.ris.is_empty() {
        arrays.ris.validate()?;
    }
    fading.validate()?;
    let lambda = fading.wavelength();
    let m_users = geom.num_users();
    let n_b = arrays.bs.len();
    let f = arrays.ris.len();
    let rx_amp = units::db_to_linear(fading.rx_gain_db).sqrt();
    let pl = |d, a| path_loss_with(d, a, lambda, fading.path_loss);

    let mut h_d = Vec::with_capacity(m_users);
    let mut h_r = Vec::with_capacity(m_users);
    for m in 0..m_users {
        let ang = geom.bs_to_user[m];
        let los = upa_response(ang.azimuth, ang.elevation, &arrays.bs, lambda)
            * doppler_factor(v, ang.azimuth, ang.elevation, lambda, tau);
        let mut rng = substream(seed, Block::Direct, m as u64);
        let block = rician_block(
            &DMatrix::from_column_slice(n_b, 1, los.as_slice()),
            pl(geom.d_direct[m], fading.alpha_direct)?,
            fading.kappa,
            fading.nlos.variance(n_b),
            &mut rng,
        );
        h_d.push(DVector::from_column_slice(block.as_slice()) * C64::from(rx_amp));

        let ang = geom.ris_to_user[m];
        let los = upa_response(ang.azimuth, ang.elevation, &arrays.ris, lambda);
        let mut rng = substream(seed, Block::RisUser, m as u64);
        let block = rician_block(
            &DMatrix::from_column_slice(f, 1, los.as_slice()),
            pl(geom.d_ris_user[m], fading.alpha_ris_user)?,
            fading.kappa,
            fading.nlos.variance(f),
            &mut rng,
        );
        h_r.push(DVector::from_column_slice(block.as_slice()) * C64::from(rx_amp));
    }

    let a_r = upa_response(
        geom.ris_from_bs.azimuth,
        geom.ris_from_bs.elevation,
        &arrays.ris,
        lambda,
    );
    let a_b = upa_response(
        geom.bs_to_ris.azimuth,
        geom.bs_to_ris.elevation,
        &arrays.bs,
        lambda,
    );
    let doppler = doppler_factor(
        v,
        geom.ris_from_bs.azimuth,
        geom.ris_from_bs.elevation,
        lambda,
        tau,
    );
    let pl_br = pl(geom.d_bs_ris, fading.alpha_bs_ris)?;
    let var_br = fading.nlos.variance(f * n_b);
    let a_b_h = a_b.adjoint();
    let mut h_br = DMatrix::zeros(f, n_b);
    for row in 0..f {
        let s = a_r[row] * doppler;
        let los_row = DMatrix::from_fn(1, n_b, |_, j| a_b_h[j] * s);
        let mut rng = substream(seed, Block::BsRis, row as u64);
        let drawn = rician_block(&los_row, pl_br, fading.kappa, var_br, &mut rng);
        h_br.set_row(row, &drawn.row(0));
    }

    let set = ChannelSet { h_d, h_br, h_r };
    set.validate()?;
    Ok(set)
}
