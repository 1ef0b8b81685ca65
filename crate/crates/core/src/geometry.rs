//! Scene layout for the train, the window-mounted RIS and the in-carriage users.
//!
//! World frame: `x` runs along the track (the train approaches the base station
//! from negative `x`), `y` points from the track toward the base station side and
//! `z` is up. The train frame has its origin on the track centerline at rail
//! height and translates along `x`; RIS and user offsets are given in it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

const MIN_DISTANCE: f64 = 1e-9;

/// Orientation of a planar array: `boresight` is the surface normal the angles
/// are measured from, `up` fixes the elevation axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayFrame {
    pub boresight: Point3,
    pub up: Point3,
}

impl ArrayFrame {
    pub fn new(boresight: Point3, up: Point3) -> Self {
        Self { boresight, up }
    }

    /// Same surface seen from the opposite face (the refraction side of the RIS).
    pub fn reversed(&self) -> Self {
        Self {
            boresight: scale(self.boresight, -1.0),
            up: self.up,
        }
    }

    fn basis(&self) -> Result<(Point3, Point3, Point3)> {
        let n = normalize(self.boresight)
            .ok_or_else(|| Error::InvalidGeometry("array boresight is the zero vector".into()))?;
        let up_raw = sub(self.up, scale(n, dot(self.up, n)));
        let u = normalize(up_raw).ok_or_else(|| {
            Error::InvalidGeometry("array up vector is parallel to its boresight".into())
        })?;
        let r = cross(u, n);
        Ok((n, r, u))
    }

    /// Azimuth/elevation of the direction `d` in this frame.
    pub fn angles_of(&self, d: Point3) -> Result<Angles> {
        let (n, r, u) = self.basis()?;
        let d = normalize(d)
            .ok_or_else(|| Error::InvalidGeometry("coincident points".into()))?;
        let mut azimuth = dot(d, r).atan2(dot(d, n));
        if azimuth >= std::f64::consts::PI {
            azimuth -= 2.0 * std::f64::consts::PI;
        }
        let elevation = dot(d, u).clamp(-1.0, 1.0).asin();
        Ok(Angles { azimuth, elevation })
    }
}

/// Azimuth in [-pi, pi), elevation in [-pi/2, pi/2], both in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub bs_position: Point3,
    /// Height of the train-frame origin above the world `z = 0` plane.
    pub rail_height: f64,
    pub ris_offset: Point3,
    pub user_offsets: Vec<Point3>,
    /// Signed speed along `+x` (m/s).
    pub train_speed: f64,
    /// Slot duration (s).
    pub slot_duration: f64,
    /// Current `x` of the train-frame origin.
    pub train_x: f64,
    pub bs_frame: ArrayFrame,
    /// RIS frame on the incident (outside) face; the user side uses the reverse.
    pub ris_frame: ArrayFrame,
}

impl Default for SceneConfig {
    /// Base station 10 m above the rail plane and 50 m from the track, RIS on
    /// a window facing it, eight seats 1-5 m behind the RIS.
    fn default() -> Self {
        let bs_position = [0.0, 50.0, 10.0];
        Self {
            bs_position,
            rail_height: 0.0,
            ris_offset: [0.0, 1.7, 2.0],
            user_offsets: vec![
                [-1.5, 0.6, 1.6],
                [1.2, 0.4, 1.6],
                [-2.6, -0.5, 1.6],
                [2.4, -0.7, 1.6],
                [-3.8, 0.5, 1.6],
                [3.6, -0.2, 1.6],
                [-4.3, -0.4, 1.6],
                [4.4, 0.6, 1.6],
            ],
            train_speed: 100.0,
            slot_duration: 1e-3,
            train_x: -200.0,
            // Aimed at the stretch of track the train approaches on.
            bs_frame: ArrayFrame::new([-100.0, -50.0, -8.0], [0.0, 0.0, 1.0]),
            ris_frame: ArrayFrame::new([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
        }
    }
}

impl SceneConfig {
    pub fn num_users(&self) -> usize {
        self.user_offsets.len()
    }

    /// Perpendicular distance from the base station to the track centerline.
    pub fn bs_to_rail_offset(&self) -> f64 {
        self.bs_position[1].hypot(self.bs_position[2] - self.rail_height)
    }

    fn train_origin(&self) -> Point3 {
        [self.train_x, 0.0, self.rail_height]
    }

    pub fn ris_position(&self) -> Point3 {
        add(self.train_origin(), self.ris_offset)
    }

    pub fn user_positions(&self) -> Vec<Point3> {
        let o = self.train_origin();
        self.user_offsets.iter().map(|u| add(o, *u)).collect()
    }

    /// Keeps only the first `m` seats.
    pub fn with_users(mut self, m: usize) -> Result<Self> {
        if m == 0 || m > self.user_offsets.len() {
            return Err(Error::InvalidArgument(format!(
                "scene has {} seats, {m} users requested",
                self.user_offsets.len()
            )));
        }
        self.user_offsets.truncate(m);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_offsets.is_empty() {
            return Err(Error::InvalidGeometry("scene has no users".into()));
        }
        let finite = |p: &Point3| p.iter().all(|c| c.is_finite());
        if !finite(&self.bs_position)
            || !finite(&self.ris_offset)
            || !self.user_offsets.iter().all(finite)
            || !self.train_x.is_finite()
            || !self.train_speed.is_finite()
            || !self.rail_height.is_finite()
        {
            return Err(Error::InvalidGeometry("non-finite coordinate".into()));
        }
        if !(self.slot_duration > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "slot duration must be positive, got {}",
                self.slot_duration
            )));
        }
        self.bs_frame.basis()?;
        self.ris_frame.basis()?;
        Ok(())
    }
}

/// Moves the train `slot_index` slots along the track.
pub fn advance(scene: &SceneConfig, slot_index: u64) -> SceneConfig {
    let mut next = scene.clone();
    next.train_x += scene.train_speed * scene.slot_duration * slot_index as f64;
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// BS to user m.
    pub d_direct: Vec<f64>,
    /// BS to RIS.
    pub d_bs_ris: f64,
    /// RIS to user m.
    pub d_ris_user: Vec<f64>,
    /// Direction of user m seen from the BS array.
    pub bs_to_user: Vec<Angles>,
    /// Direction of the RIS seen from the BS array.
    pub bs_to_ris: Angles,
    /// Direction of the BS seen from the RIS (incident face).
    pub ris_from_bs: Angles,
    /// Direction of user m seen from the RIS (refraction face).
    pub ris_to_user: Vec<Angles>,
}

impl LinkGeometry {
    pub fn num_users(&self) -> usize {
        self.d_direct.len()
    }
}

fn distance(a: Point3, b: Point3) -> Result<f64> {
    let d = norm(sub(b, a));
    if d <= MIN_DISTANCE {
        return Err(Error::InvalidGeometry(format!(
            "coincident points {a:?} and {b:?}"
        )));
    }
    Ok(d)
}

pub fn derive_geometry(scene: &SceneConfig) -> Result<LinkGeometry> {
    scene.validate()?;
    let bs = scene.bs_position;
    let ris = scene.ris_position();
    let users = scene.user_positions();
    let ris_out = scene.ris_frame.reversed();

    let d_bs_ris = distance(bs, ris)?;
    let bs_to_ris = scene.bs_frame.angles_of(sub(ris, bs))?;
    let ris_from_bs = scene.ris_frame.angles_of(sub(bs, ris))?;

    let mut d_direct = Vec::with_capacity(users.len());
    let mut d_ris_user = Vec::with_capacity(users.len());
    let mut bs_to_user = Vec::with_capacity(users.len());
    let mut ris_to_user = Vec::with_capacity(users.len());
    for &u in &users {
        d_direct.push(distance(bs, u)?);
        d_ris_user.push(distance(ris, u)?);
        bs_to_user.push(scene.bs_frame.angles_of(sub(u, bs))?);
        ris_to_user.push(ris_out.angles_of(sub(u, ris))?);
    }
    Ok(LinkGeometry {
        d_direct,
        d_bs_ris,
        d_ris_user,
        bs_to_user,
        bs_to_ris,
        ris_from_bs,
        ris_to_user,
    })
}

fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: Point3) -> Option<Point3> {
    let n = norm(a);
    (n > MIN_DISTANCE && n.is_finite()).then(|| scale(a, 1.0 / n))
}
