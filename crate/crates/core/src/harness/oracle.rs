//! Reference checks that pit library routines against independent oracles:
//! brute-force pilot assignment, Monte Carlo estimation error, sampled
//! covariances, and CMD identities.

use rand::Rng;
use rayon::prelude::*;

use crate::assignment::{
    brute_force_assignment, min_intragroup_dissimilarity, nearest_neighbor_assignment,
    nearest_neighbor_from, random_assignment,
};
use crate::channel::{
    analytic_covariance, compound_covariance, sample_channel, sample_compound_channel,
    sample_covariance, CovarianceSet,
};
use crate::config::{RandomMode, SystemConfig};
use crate::features::{cmd, cmd_feature, dissimilarity_matrix, FeatureKind, FeatureSet};
use crate::linalg::{complex_gaussian, trace_re, CMatrix, CVector, C64};
use crate::phy::{build_pilot_book, correlate, pilot_rx, LmmseEstimator};
use crate::rng::substream;
use crate::scenario::{build_scenario, ActiveSet};
use crate::Result;

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Objectives on one small instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapInstance {
    /// One run of the chain from a random start UE.
    pub nearest_neighbor: f64,
    /// The chain objective averaged over every start UE, i.e. the
    /// expectation over the chain's random start.
    pub nearest_neighbor_mean: f64,
    /// Best chain objective over all start UEs.
    pub nearest_neighbor_best: f64,
    pub random_mean: f64,
    pub brute_force: f64,
}

impl GapInstance {
    /// The exhaustive optimum bounds every chain start and the random mean.
    pub fn bounded(&self) -> bool {
        self.brute_force >= self.nearest_neighbor_best && self.brute_force >= self.random_mean
    }
}

/// Small one-ring configuration used by the oracle instances.
pub fn small_config(num_users: usize, num_pilots: usize, antennas: usize) -> SystemConfig {
    SystemConfig {
        num_users,
        num_active: num_users,
        antennas_per_sector: antennas,
        pilot_len: num_pilots,
        num_paths: 50,
        chart_neighbors: (num_users - 1).min(3),
        quadrature_points: 64,
        ..SystemConfig::default()
    }
}

/// Min intra-group CMD of the nearest-neighbour chain (CMD-row features),
/// the mean over `random_draws` balanced random assignments, and the
/// brute-force optimum, on `instances` random one-ring scenarios.
pub fn oracle_gap(
    instances: usize,
    num_users: usize,
    num_pilots: usize,
    random_draws: usize,
    seed: u64,
) -> Result<Vec<GapInstance>> {
    let cfg = small_config(num_users, num_pilots, 8);
    cfg.validate()?;
    (0..instances)
        .into_par_iter()
        .map(|i| {
            let i = i as u64;
            let scenario = build_scenario(&cfg, &mut substream(seed, &[i, 0]))?;
            let d = dissimilarity_matrix(&CovarianceSet::compute(&scenario))?;
            let f = cmd_feature(&d);
            let nn = nearest_neighbor_assignment(&f, num_pilots, &mut substream(seed, &[i, 1]))?;
            let mut starts = Vec::with_capacity(num_users);
            for start in 0..num_users {
                starts.push(min_intragroup_dissimilarity(&nearest_neighbor_from(&f, num_pilots, start)?, &d, None));
            }
            let mut rng = substream(seed, &[i, 2]);
            let mut total = 0.0;
            for _ in 0..random_draws {
                let a = random_assignment(num_users, num_pilots, RandomMode::Balanced, &mut rng)?;
                total += min_intragroup_dissimilarity(&a, &d, None);
            }
            let all = ActiveSet {
                indices: (0..num_users).collect(),
            };
            let bf = brute_force_assignment(&d, num_pilots, &all)?;
            Ok(GapInstance {
                nearest_neighbor: min_intragroup_dissimilarity(&nn, &d, None),
                nearest_neighbor_mean: starts.iter().sum::<f64>() / num_users as f64,
                nearest_neighbor_best: starts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                random_mean: total / random_draws as f64,
                brute_force: min_intragroup_dissimilarity(&bf, &d, None),
            })
        })
        .collect()
}

/// Empirical E‖ĥ − h‖² over `trials` pilot observations next to trace(R̃),
/// for a desk-geometry UE with `antennas`×3 receive dimensions, optionally
/// with one co-pilot interferer. Channels come from the multipath sampler.
pub fn lmmse_consistency(antennas: usize, with_interferer: bool, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let cfg = SystemConfig {
        num_users: 16,
        num_active: 2,
        antennas_per_sector: antennas,
        pilot_len: 4,
        num_paths: 50,
        chart_neighbors: 3,
        ..SystemConfig::default()
    };
    cfg.validate()?;
    let scenario = build_scenario(&cfg, &mut substream(seed, &[0]))?;
    let (ue, other) = (&scenario.users[0], &scenario.users[1]);
    let r = compound_covariance(ue, &cfg);
    let rj = compound_covariance(other, &cfg);
    let (pu, s2, tau) = (cfg.tx_power, cfg.noise_power(), cfg.pilot_len);
    let interferers: Vec<&CMatrix> = if with_interferer { vec![&rj] } else { vec![] };
    let est = LmmseEstimator::new(&r, &interferers, s2 / (pu * tau as f64), cfg.antennas_per_sector)?;
    let book = build_pilot_book(tau)?;
    let psi = book.pilot(0) * C64::new(pu.sqrt(), 0.0);
    let chunks = 100;
    let per = trials.div_ceil(chunks);
    let sum: f64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, &[1, c as u64]);
            let n = per.min(trials.saturating_sub(c * per));
            let mut acc = 0.0;
            for _ in 0..n {
                let users = if with_interferer { 2 } else { 1 };
                let mut h = CMatrix::zeros(cfg.receive_dim(), users);
                h.set_column(0, &sample_compound_channel(ue, &cfg, &mut rng));
                if with_interferer {
                    h.set_column(1, &sample_compound_channel(other, &cfg, &mut rng));
                }
                let y = pilot_rx(&h, &vec![0; users], &book, pu, s2, &mut rng);
                let hh = est.estimate(&correlate(&y, &psi, pu));
                acc += (hh - h.column(0)).norm_squared();
            }
            acc
        })
        .sum();
    Ok((sum / trials as f64, trace_re(&est.error_cov)))
}

/// Relative Frobenius distance between the quadrature covariance of one
/// sector and the sample covariance of `samples` multipath draws.
pub fn covariance_oracle(antennas: usize, samples: usize, seed: u64) -> Result<f64> {
    let cfg = SystemConfig {
        num_users: 4,
        num_active: 1,
        antennas_per_sector: antennas,
        num_sectors: 1,
        num_paths: 20,
        chart_neighbors: 1,
        chart_dim: 1,
        ..SystemConfig::default()
    };
    cfg.validate()?;
    let scenario = build_scenario(&cfg, &mut substream(seed, &[0]))?;
    let ue = &scenario.users[0];
    let analytic = analytic_covariance(ue, 0, &cfg, cfg.quadrature_points);
    let chunk = 10_000;
    let chunks = samples.div_ceil(chunk);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, &[1, c as u64]);
            let n = chunk.min(samples - c * chunk);
            let draws: Vec<CVector> = (0..n).map(|_| sample_channel(ue, 0, &cfg, &mut rng)).collect();
            Ok((sample_covariance(&draws)?, n))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sampled = CMatrix::zeros(antennas, antennas);
    for (m, n) in parts {
        sampled += m * C64::new(n as f64 / samples as f64, 0.0);
    }
    Ok((sampled - &analytic).norm() / analytic.norm())
}

/// Random Hermitian PSD matrix of size n with the given rank.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, rank, |_, _| complex_gaussian(rng, 1.0));
    let mut m = &a * a.adjoint();
    crate::linalg::hermitize(&mut m);
    m
}

/// Symmetry and scale invariance within `tol`, range [0, 1] and cmd(R, R) = 0
/// on `pairs` random PSD pairs. Returns the first violation.
pub fn cmd_properties(pairs: usize, tol: f64, seed: u64) -> std::result::Result<(), String> {
    let mut rng = substream(seed, &[]);
    for i in 0..pairs {
        let n = rng.random_range(1..=8);
        let (ra, rb) = (rng.random_range(1..=n), rng.random_range(1..=n));
        let a = random_psd(&mut rng, n, ra);
        let b = random_psd(&mut rng, n, rb);
        let c = C64::new(10f64.powf(rng.random_range(-6.0..6.0)), 0.0);
        let ab = cmd(&a, &b).map_err(|e| e.to_string())?;
        let ba = cmd(&b, &a).map_err(|e| e.to_string())?;
        let scaled = cmd(&(&a * c), &b).map_err(|e| e.to_string())?;
        let aa = cmd(&a, &a).map_err(|e| e.to_string())?;
        if (ab - ba).abs() > tol {
            return Err(format!("pair {i}: asymmetric {ab} vs {ba}"));
        }
        if (ab - scaled).abs() > tol {
            return Err(format!("pair {i}: scale changed {ab} to {scaled}"));
        }
        if !(0.0..=1.0).contains(&ab) {
            return Err(format!("pair {i}: out of range {ab}"));
        }
        if aa != 0.0 {
            return Err(format!("pair {i}: cmd(R, R) = {aa}"));
        }
    }
    Ok(())
}

/// The chain on 1-D features 0..5 with τ = 3, started at UE 0.
pub fn golden_trace() -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
    let f = FeatureSet::from_rows(FeatureKind::Position, &rows)?;
    let a = nearest_neighbor_from(&f, 3, 0)?;
    Ok((a.pilot_numbers(), (0..3).map(|p| a.group(p)).collect()))
}

/// Pilot multiplicities of the nearest-neighbour chain on random features
/// differ by at most one; returns the number of unbalanced instances.
pub fn balance_violations(instances: usize, seed: u64) -> Result<usize> {
    let mut rng = substream(seed, &[]);
    let mut bad = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=60);
        let tau = rng.random_range(1..=n.min(12));
        let dim = rng.random_range(1..=3);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let f = FeatureSet::from_rows(FeatureKind::Position, &rows)?;
        let a = nearest_neighbor_assignment(&f, tau, &mut rng)?;
        if !a.is_balanced() {
            bad += 1;
        }
    }
    Ok(bad)
}

/// The full suite behind the `oracle` subcommand. `quick` shrinks the trial
/// counts for smoke runs.
pub fn run_suite(seed: u64, quick: bool) -> Result<Vec<OracleCheck>> {
    let scale = if quick { 10 } else { 1 };
    let mut out = Vec::new();

    let (pilots, groups) = golden_trace()?;
    out.push(OracleCheck {
        name: "golden-trace",
        passed: pilots == [1, 2, 3, 1, 2, 3] && groups == [vec![0, 3], vec![1, 4], vec![2, 5]],
        detail: format!("pilots {pilots:?}, groups {groups:?}"),
    });

    let bad = balance_violations(100, seed)?;
    out.push(OracleCheck {
        name: "chain-balance",
        passed: bad == 0,
        detail: format!("{bad} of 100 instances unbalanced"),
    });

    let r = cmd_properties(1000, 1e-12, seed);
    out.push(OracleCheck {
        name: "cmd-properties",
        passed: r.is_ok(),
        detail: r.err().unwrap_or_else(|| "1000 pairs".into()),
    });

    let gap = oracle_gap(50 / scale.min(5), 8, 2, 1000 / scale, seed)?;
    let single = gap.iter().filter(|g| g.nearest_neighbor >= g.random_mean).count();
    let beats = gap.iter().filter(|g| g.nearest_neighbor_mean >= g.random_mean).count();
    let bounded = gap.iter().filter(|g| g.bounded()).count();
    out.push(OracleCheck {
        name: "brute-force-bound",
        passed: bounded == gap.len(),
        detail: format!("optimum >= every chain start and the random mean on {bounded} of {}", gap.len()),
    });
    out.push(OracleCheck {
        name: "chain-vs-random",
        passed: beats == gap.len(),
        detail: format!(
            "start-averaged chain >= random mean on {beats} of {n}; single random start on {single} of {n}",
            n = gap.len()
        ),
    });

    for interferer in [false, true] {
        let (mse, tr) = lmmse_consistency(8, interferer, 10_000 / scale, seed)?;
        let rel = (mse / tr - 1.0).abs();
        out.push(OracleCheck {
            name: if interferer { "lmmse-mse-interferer" } else { "lmmse-mse" },
            passed: rel <= if quick { 0.06 } else { 0.02 },
            detail: format!("empirical {mse:.6e}, trace {tr:.6e}, relative {rel:.4}"),
        });
    }

    let rel = covariance_oracle(8, 1_000_000 / (scale * scale), seed)?;
    out.push(OracleCheck {
        name: "covariance-sampling",
        passed: rel <= if quick { 0.2 } else { 0.02 },
        detail: format!("relative Frobenius error {rel:.4}"),
    });
    Ok(out)
}
