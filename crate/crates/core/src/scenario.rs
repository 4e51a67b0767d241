//! Cell geometry and UE population.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::config::SystemConfig;
use crate::Result;

/// Wrap an angle to [0, 2π).
pub fn wrap_positive(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wrap an angle to (−π, π].
pub fn wrap_signed(theta: f64) -> f64 {
    let w = wrap_positive(theta);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoaInterval {
    pub min: f64,
    pub max: f64,
}

impl AoaInterval {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub index: usize,
    /// Cartesian position in meters, BS at the origin.
    pub position: [f64; 2],
    pub distance: f64,
    /// Per-sector incident angle relative to the sector boresight, in [0, 2π).
    pub boresight_angles: Vec<f64>,
    pub aoa_intervals: Vec<AoaInterval>,
}

impl UserRecord {
    /// Global azimuth of the UE in [0, 2π).
    pub fn azimuth(&self) -> f64 {
        wrap_positive(self.position[1].atan2(self.position[0]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SystemConfig,
    pub users: Vec<UserRecord>,
    /// Boresight direction of each sector in the global frame.
    pub sector_orientations: Vec<f64>,
}

pub fn sector_orientations(num_sectors: usize) -> Vec<f64> {
    (0..num_sectors)
        .map(|s| TAU * s as f64 / num_sectors as f64)
        .collect()
}

/// Build the UE record for a UE at `position`.
pub fn user_at(index: usize, position: [f64; 2], orientations: &[f64], angular_std: f64) -> UserRecord {
    let distance = position[0].hypot(position[1]);
    let azimuth = position[1].atan2(position[0]);
    let half_width = 3f64.sqrt() * angular_std;
    let boresight_angles: Vec<f64> = orientations
        .iter()
        .map(|&o| wrap_positive(azimuth - o))
        .collect();
    let aoa_intervals = boresight_angles
        .iter()
        .map(|&t| AoaInterval {
            min: t - half_width,
            max: t + half_width,
        })
        .collect();
    UserRecord {
        index,
        position,
        distance,
        boresight_angles,
        aoa_intervals,
    }
}

/// Place `num_users` UEs uniformly over the annulus between `min_radius` and
/// `cell_radius`.
pub fn build_scenario<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<Scenario> {
    config.validate()?;
    let orientations = sector_orientations(config.num_sectors);
    let (r0, r1) = (config.min_radius, config.cell_radius);
    let users = (0..config.num_users)
        .map(|index| {
            let u: f64 = rng.random();
            let r = (r0 * r0 + u * (r1 * r1 - r0 * r0)).sqrt();
            let phi = TAU * rng.random::<f64>();
            user_at(
                index,
                [r * phi.cos(), r * phi.sin()],
                &orientations,
                config.angular_std(),
            )
        })
        .collect();
    Ok(Scenario {
        config: config.clone(),
        users,
        sector_orientations: orientations,
    })
}

/// Indices of the UEs active in one transmission interval, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, ue: usize) -> bool {
        self.indices.binary_search(&ue).is_ok()
    }
}

/// Uniform random K-subset of the N UEs.
pub fn sample_active_set<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<ActiveSet> {
    let (n, k) = (scenario.users.len(), scenario.config.num_active);
    if k > n || k == 0 {
        return Err(crate::Error::config(
            "num_active",
            format!("cannot draw {k} active UEs out of {n}"),
        ));
    }
    let mut indices = rand::seq::index::sample(rng, n, k).into_vec();
    indices.sort_unstable();
    Ok(ActiveSet { indices })
}
