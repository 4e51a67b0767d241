//! One-ring channel synthesis and per-UE covariance matrices.
//!
//! Angles handed to this module are relative to the sector boresight. Each
//! sector ULA lies perpendicular to its boresight, so the array response is
//! evaluated at `offset + π/2` (broadside at boresight).

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::linalg::{block_diagonal, complex_gaussian, hermitize, CMatrix, CVector, C64};
use crate::quadrature::GaussLegendre;
use crate::scenario::{wrap_signed, Scenario, UserRecord};
use crate::{Error, Result};

/// ULA steering vector: entry m is exp(−j2π·m·Δr·cos θ).
pub fn array_response(theta: f64, num_antennas: usize, spacing: f64) -> CVector {
    let step = -TAU * spacing * theta.cos();
    CVector::from_fn(num_antennas, |m, _| C64::from_polar(1.0, step * m as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern {
    pub max_gain_db: f64,
    pub max_attenuation_db: f64,
    /// Half-power beamwidth in radians.
    pub beamwidth_3db: f64,
}

impl AntennaPattern {
    pub fn from_config(c: &SystemConfig) -> Self {
        Self {
            max_gain_db: c.max_gain_db,
            max_attenuation_db: c.max_attenuation_db,
            beamwidth_3db: c.beamwidth_3db(),
        }
    }

    /// Offset from boresight at which the attenuation saturates.
    pub fn clip_offset(&self) -> f64 {
        self.beamwidth_3db * (self.max_attenuation_db / 12.0).sqrt()
    }
}

pub fn antenna_gain_db(theta: f64, boresight: f64, pattern: &AntennaPattern) -> f64 {
    let offset = wrap_signed(theta - boresight);
    let quad = 12.0 * (offset / pattern.beamwidth_3db).powi(2);
    pattern.max_gain_db - quad.min(pattern.max_attenuation_db)
}

/// Free-space gain 10^(G/10)·(λ/(4πd))².
pub fn path_gain(distance: f64, wavelength: f64, gain_db: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::domain(format!("path gain needs distance > 0, got {distance}")));
    }
    Ok(10f64.powf(gain_db / 10.0) * (wavelength / (4.0 * PI * distance)).powi(2))
}

/// Large-scale gain β of a path arriving at boresight offset `theta`.
fn beta(user: &UserRecord, theta: f64, config: &SystemConfig, pattern: &AntennaPattern) -> f64 {
    let g = antenna_gain_db(theta, 0.0, pattern);
    10f64.powf(g / 10.0) * (config.wavelength / (4.0 * PI * user.distance)).powi(2)
}

/// One draw of the sector channel h_{n,s}.
pub fn sample_channel<R: Rng + ?Sized>(
    user: &UserRecord,
    sector: usize,
    config: &SystemConfig,
    rng: &mut R,
) -> CVector {
    let m = config.antennas_per_sector;
    let pattern = AntennaPattern::from_config(config);
    let iv = user.aoa_intervals[sector];
    let scale = 1.0 / (config.num_paths as f64).sqrt();
    let mut h = CVector::zeros(m);
    for _ in 0..config.num_paths {
        let theta = if iv.width() > 0.0 {
            rng.random_range(iv.min..iv.max)
        } else {
            iv.min
        };
        let alpha = complex_gaussian(rng, 1.0);
        let amp = alpha * (beta(user, theta, config, &pattern).sqrt() * scale);
        let step = -TAU * config.antenna_spacing * (theta + FRAC_PI_2).cos();
        for (k, hk) in h.iter_mut().enumerate() {
            *hk += amp * C64::from_polar(1.0, step * k as f64);
        }
    }
    h
}

/// Compound channel h_n: sector vectors stacked in sector order.
pub fn sample_compound_channel<R: Rng + ?Sized>(
    user: &UserRecord,
    config: &SystemConfig,
    rng: &mut R,
) -> CVector {
    let m = config.antennas_per_sector;
    let mut h = CVector::zeros(config.receive_dim());
    for s in 0..config.num_sectors {
        let hs = sample_channel(user, s, config, rng);
        h.rows_mut(s * m, m).copy_from(&hs);
    }
    h
}

/// Breakpoints inside (a, b) where the integrand loses smoothness: the gain
/// clipping offsets and the ±π wrap.
fn smooth_pieces(a: f64, b: f64, pattern: &AntennaPattern) -> Vec<f64> {
    let clip = pattern.clip_offset();
    let mut cuts = vec![a, b];
    for base in [clip, -clip, PI] {
        let k_lo = ((a - base) / TAU).ceil() as i64;
        let k_hi = ((b - base) / TAU).floor() as i64;
        for k in k_lo..=k_hi {
            let c = base + TAU * k as f64;
            if c > a && c < b {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// Sector covariance E[h hᴴ] averaged over a uniform AoA on the user's
/// interval. `quadrature_points` is the Gauss–Legendre order used on every
/// smooth sub-interval.
pub fn analytic_covariance(
    user: &UserRecord,
    sector: usize,
    config: &SystemConfig,
    quadrature_points: usize,
) -> CMatrix {
    let m = config.antennas_per_sector;
    let pattern = AntennaPattern::from_config(config);
    let iv = user.aoa_intervals[sector];

    if !(iv.width() > 0.0) {
        let theta = iv.min;
        let a = array_response(theta + FRAC_PI_2, m, config.antenna_spacing);
        return (&a * a.adjoint()) * C64::new(beta(user, theta, config, &pattern), 0.0);
    }

    // a(θ)a(θ)ᴴ is Toeplitz: entry (i, j) = exp(−j2πΔr(i−j)cos θ).
    let rule = GaussLegendre::get(quadrature_points.max(2));
    let cuts = smooth_pieces(iv.min, iv.max, &pattern);
    let mut col = vec![C64::new(0.0, 0.0); m];
    for w in cuts.windows(2) {
        for (theta, weight) in rule.mapped(w[0], w[1]) {
            let b = beta(user, theta, config, &pattern) * weight;
            let step = -TAU * config.antenna_spacing * (theta + FRAC_PI_2).cos();
            for (d, c) in col.iter_mut().enumerate() {
                *c += C64::from_polar(b, step * d as f64);
            }
        }
    }
    let inv_width = 1.0 / iv.width();
    let mut r = CMatrix::from_fn(m, m, |i, j| {
        if i >= j {
            col[i - j] * inv_width
        } else {
            col[j - i].conj() * inv_width
        }
    });
    hermitize(&mut r);
    r
}

/// Block-diagonal compound covariance across sectors.
pub fn compound_covariance(user: &UserRecord, config: &SystemConfig) -> CMatrix {
    let blocks: Vec<CMatrix> = (0..config.num_sectors)
        .map(|s| analytic_covariance(user, s, config, config.quadrature_points))
        .collect();
    block_diagonal(&blocks)
}

/// (1/T)·Σ h hᴴ over the samples.
pub fn sample_covariance(samples: &[CVector]) -> Result<CMatrix> {
    let first = samples
        .first()
        .ok_or_else(|| Error::domain("sample covariance of an empty sample list"))?;
    let n = first.len();
    let mut acc = CMatrix::zeros(n, n);
    for h in samples {
        if h.len() != n {
            return Err(Error::domain("sample vectors differ in length"));
        }
        acc.ger(C64::new(1.0, 0.0), h, &h.conjugate(), C64::new(1.0, 0.0));
    }
    acc /= C64::new(samples.len() as f64, 0.0);
    hermitize(&mut acc);
    Ok(acc)
}

/// Compound covariance matrices of every UE in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub antennas_per_sector: usize,
    pub num_sectors: usize,
    /// One MS×MS matrix per UE. Cross-sector blocks are exactly zero.
    pub matrices: Vec<CMatrix>,
}

impl CovarianceSet {
    pub fn compute(scenario: &Scenario) -> Self {
        let cfg = &scenario.config;
        let matrices = scenario
            .users
            .par_iter()
            .map(|u| compound_covariance(u, cfg))
            .collect();
        Self {
            antennas_per_sector: cfg.antennas_per_sector,
            num_sectors: cfg.num_sectors,
            matrices,
        }
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.antennas_per_sector * self.num_sectors
    }

    /// Text export. Line 1: `covariance N M S`; then, per UE, MS lines each
    /// holding MS `re im` pairs of one matrix row.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "covariance {} {} {}",
            self.len(),
            self.antennas_per_sector,
            self.num_sectors
        )?;
        for m in &self.matrices {
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols())
                    .map(|j| format!("{:?} {:?}", m[(i, j)].re, m[(i, j)].im))
                    .collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty covariance file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "covariance" {
            return Err(Error::Parse(format!("bad covariance header `{header}`")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("header field `{s}`: {e}")))
        };
        let (n, m, s) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        let dim = m * s;
        let mut matrices = Vec::with_capacity(n);
        for u in 0..n {
            let mut mat = CMatrix::zeros(dim, dim);
            for i in 0..dim {
                let line = lines.next().ok_or_else(|| {
                    Error::Parse(format!("truncated covariance file at UE {u}, row {i}"))
                })??;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("`{t}`: {e}"))))
                    .collect::<Result<_>>()?;
                if vals.len() != 2 * dim {
                    return Err(Error::Parse(format!(
                        "UE {u} row {i}: expected {} values, found {}",
                        2 * dim,
                        vals.len()
                    )));
                }
                for j in 0..dim {
                    mat[(i, j)] = C64::new(vals[2 * j], vals[2 * j + 1]);
                }
            }
            matrices.push(mat);
        }
        Ok(Self {
            antennas_per_sector: m,
            num_sectors: s,
            matrices,
        })
    }
}
