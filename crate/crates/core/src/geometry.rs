//! Cluster layout, antenna and user positions.
//!
//! All lengths are in cell radii. Cell 0 is the target cell and sits at the
//! origin; antennas are described in polar coordinates about its center.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::error::{check, Error, Result};

/// Default distance between neighboring cell centers (tangent unit disks).
pub const DEFAULT_SPACING: f64 = 2.0;
pub const DEFAULT_HEIGHT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLayout {
    centers: Vec<(f64, f64)>,
    spacing: f64,
}

impl ClusterLayout {
    /// Cluster from explicit centers. The first center must be the origin.
    pub fn with_centers(centers: Vec<(f64, f64)>, spacing: f64) -> Result<Self> {
        check(!centers.is_empty(), || "cluster needs at least one cell".to_string())?;
        check(centers[0] == (0.0, 0.0), || format!("cell 0 must be at the origin, got {:?}", centers[0]))?;
        check(centers.iter().all(|c| c.0.is_finite() && c.1.is_finite()), || "cell centers must be finite".to_string())?;
        Ok(Self { centers, spacing })
    }

    pub fn size(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[(f64, f64)] {
        &self.centers
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }
}

/// Target cell plus its first ring of six neighbors at distance `spacing`,
/// at angles `k pi/3`. `size` must be 1 or 7.
pub fn hex_cluster(size: usize, spacing: f64) -> Result<ClusterLayout> {
    check(spacing > 0.0 && spacing.is_finite(), || format!("center spacing must be > 0, got {spacing}"))?;
    let centers = match size {
        1 => vec![(0.0, 0.0)],
        7 => std::iter::once((0.0, 0.0))
            .chain((0..6).map(|k| {
                let a = k as f64 * PI / 3.0;
                (spacing * a.cos(), spacing * a.sin())
            }))
            .collect(),
        other => return Err(Error::UnsupportedCluster(other)),
    };
    ClusterLayout::with_centers(centers, spacing)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Antenna {
    pub radius: f64,
    pub angle: f64,
}

impl Antenna {
    pub fn position(&self) -> (f64, f64) {
        (self.radius * self.angle.cos(), self.radius * self.angle.sin())
    }
}

/// Antennas of the target cell, ordered by strictly increasing angle in
/// `[0, 2 pi)`, all mounted at the same height.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaVector {
    antennas: Vec<Antenna>,
    height: f64,
}

impl AntennaVector {
    /// Normalizes angles into `[0, 2 pi)` and sorts by angle.
    pub fn new(antennas: Vec<Antenna>, height: f64) -> Result<Self> {
        check(!antennas.is_empty(), || "at least one antenna is required".to_string())?;
        check(height > 0.0 && height.is_finite(), || format!("antenna height must be > 0, got {height}"))?;
        let mut antennas: Vec<Antenna> = antennas
            .into_iter()
            .map(|a| Antenna { radius: a.radius, angle: wrap_angle(a.angle) })
            .collect();
        for a in &antennas {
            check((0.0..=1.0).contains(&a.radius), || format!("antenna radius must lie in [0,1], got {}", a.radius))?;
            check(a.angle.is_finite(), || "antenna angle must be finite".to_string())?;
        }
        antennas.sort_by(|a, b| a.angle.total_cmp(&b.angle));
        check(antennas.windows(2).all(|w| w[1].angle > w[0].angle), || "antenna angles must be distinct".to_string())?;
        Ok(Self { antennas, height })
    }

    pub fn antennas(&self) -> &[Antenna] {
        &self.antennas
    }

    pub fn len(&self) -> usize {
        self.antennas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.antennas.is_empty()
    }

    pub fn height(&self) -> f64 {
        self.height
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// `count` antennas evenly spaced on a circle of `radius`, the first at
/// angle `rotation`.
pub fn symmetric_circle(count: usize, radius: f64, rotation: f64, height: f64) -> Result<AntennaVector> {
    let antennas = (0..count)
        .map(|m| Antenna { radius, angle: rotation + TAU * m as f64 / count as f64 })
        .collect();
    AntennaVector::new(antennas, height)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserPosition {
    /// Distance from the home cell center, in `[0, 1]`.
    pub radius: f64,
    pub angle: f64,
}

/// One co-channel user per cell; entry `i` lives in cell `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserVector {
    users: Vec<UserPosition>,
}

impl UserVector {
    pub fn new(layout: &ClusterLayout, users: Vec<UserPosition>) -> Result<Self> {
        check(users.len() == layout.size(), || format!("expected {} users, got {}", layout.size(), users.len()))?;
        for u in &users {
            check((0.0..=1.0).contains(&u.radius), || format!("user radius must lie in [0,1], got {}", u.radius))?;
        }
        Ok(Self { users })
    }

    pub fn users(&self) -> &[UserPosition] {
        &self.users
    }

    /// Cartesian positions relative to the target cell center.
    pub fn positions(&self, layout: &ClusterLayout) -> Vec<(f64, f64)> {
        user_positions(layout, &self.users)
    }
}

fn user_positions(layout: &ClusterLayout, users: &[UserPosition]) -> Vec<(f64, f64)> {
    layout
        .centers()
        .iter()
        .zip(users)
        .map(|(c, u)| (c.0 + u.radius * u.angle.cos(), c.1 + u.radius * u.angle.sin()))
        .collect()
}

/// Distance from a ground point to an antenna.
pub fn distance_to(antenna: &Antenna, height: f64, point: (f64, f64)) -> f64 {
    let (ax, ay) = antenna.position();
    ((point.0 - ax).powi(2) + (point.1 - ay).powi(2) + height * height).sqrt()
}

/// `rho_{m,i}`: distance between user `i` and antenna `m` (both 0-based).
pub fn antenna_user_distance(layout: &ClusterLayout, antennas: &AntennaVector, users: &UserVector, m: usize, i: usize) -> f64 {
    let u = users.users()[i];
    let c = layout.centers()[i];
    let p = (c.0 + u.radius * u.angle.cos(), c.1 + u.radius * u.angle.sin());
    distance_to(&antennas.antennas()[m], antennas.height(), p)
}

/// Uniform user per cell: radius `sqrt(U)` (density `2 l`), angle uniform.
pub fn sample_user_vector<R: Rng + ?Sized>(layout: &ClusterLayout, rng: &mut R) -> UserVector {
    let users = (0..layout.size())
        .map(|_| UserPosition {
            radius: rng.random::<f64>().sqrt(),
            angle: TAU * rng.random::<f64>(),
        })
        .collect();
    UserVector { users }
}
