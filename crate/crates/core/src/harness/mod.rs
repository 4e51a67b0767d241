//! Monte Carlo experiment engine: scenario → covariances → features →
//! assignment → estimation → detection, swept over one system parameter.

mod metrics;
pub mod oracle;
mod report;

use std::path::Path;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{ChannelKnowledge, PilotStrategy, StrategyRegistry};
use crate::assignment::{copilot_sets, PilotAssignment};
use crate::channel::sample_compound_channel;
use crate::config::SystemConfig;
use crate::features::FeatureContext;
use crate::linalg::{complex_gaussian, CMatrix, C64};
use crate::phy::{
    build_pilot_book, correlate, detect, lmmse_combiner, pilot_rx, sinr_all, Constellation,
    LmmseEstimator, PilotBook,
};
use crate::rng::{
    derive_seed, name_tag, substream, TAG_ACTIVITY, TAG_ASSIGNMENT, TAG_CHANNEL, TAG_SCENARIO,
};
use crate::scenario::{build_scenario, sample_active_set};
use crate::{Error, Result};

pub use metrics::{achievable_rate, empirical_cdf, wilson_interval};
pub use report::{emit_report, CDF_HEADER, RATES_HEADER, SUMMARY_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    AntennasM,
    PilotLenTau,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::AntennasM => "antennas_m",
            SweepAxis::PilotLenTau => "pilot_len_tau",
        }
    }

    /// Whether scenario geometry, covariances and assignments change along
    /// this axis.
    fn changes_preparation(self) -> bool {
        !matches!(self, SweepAxis::SnrDb)
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        let count = || {
            if value.fract() == 0.0 && value >= 1.0 && value < 1e9 {
                Ok(value as usize)
            } else {
                Err(Error::config("values", format!("{value} is not a positive integer for axis {}", self.as_str())))
            }
        };
        match self {
            SweepAxis::SnrDb => cfg.snr_db = value,
            SweepAxis::AntennasM => cfg.antennas_per_sector = count()?,
            SweepAxis::PilotLenTau => cfg.pilot_len = count()?,
        }
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "snr_db" | "snr" => Ok(SweepAxis::SnrDb),
            "antennas_m" | "antennas" | "m" => Ok(SweepAxis::AntennasM),
            "pilot_len_tau" | "pilot_len" | "tau" => Ok(SweepAxis::PilotLenTau),
            _ => Err(Error::config("axis", format!("unknown sweep axis `{s}`"))),
        }
    }
}

/// Sweep and trial-count settings; the `[experiment]` table of a plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub methods: Vec<String>,
    pub scenarios: usize,
    pub activity_draws: usize,
    pub channel_draws: usize,
    /// Data symbols per UE and channel draw.
    pub data_symbols: usize,
    pub constellation: Constellation,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            axis: SweepAxis::SnrDb,
            values: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            methods: StrategyRegistry::with_builtins()
                .names()
                .into_iter()
                .map(String::from)
                .collect(),
            scenarios: 1,
            activity_draws: 50,
            channel_draws: 200,
            data_symbols: 10,
            constellation: Constellation::Qpsk,
            workers: 0,
        }
    }
}

/// Full experiment description. The master seed is `system.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub system: SystemConfig,
}

impl ExperimentPlan {
    pub fn desk() -> Self {
        Self {
            experiment: Experiment {
                values: vec![0.0],
                ..Experiment::default()
            },
            system: SystemConfig::desk(),
        }
    }

    /// Full-size experiment: N = 512, K = 64, M = 64, τ = 64, SNR −10..10 dB.
    pub fn paper() -> Self {
        Self {
            experiment: Experiment::default(),
            system: SystemConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    pub fn seed(&self) -> u64 {
        self.system.seed
    }

    /// Per-axis-value configurations, each validated.
    pub fn configs(&self) -> Result<Vec<SystemConfig>> {
        self.experiment
            .values
            .iter()
            .map(|&v| {
                let cfg = self.experiment.axis.apply(&self.system, v)?;
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }

    /// Check everything that can fail before any simulation work starts.
    pub fn validate(&self, registry: &StrategyRegistry) -> Result<()> {
        let e = &self.experiment;
        for (field, n) in [
            ("scenarios", e.scenarios),
            ("activity_draws", e.activity_draws),
            ("channel_draws", e.channel_draws),
            ("data_symbols", e.data_symbols),
        ] {
            if n < 1 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if e.values.is_empty() {
            return Err(Error::config("values", "at least one axis value is required"));
        }
        if e.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("values", "must be finite"));
        }
        if e.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("values", "must be strictly increasing"));
        }
        if e.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        let resolved = registry.resolve(&e.methods)?;
        for (i, s) in resolved.iter().enumerate() {
            if resolved[..i].iter().any(|o| o.name() == s.name()) {
                return Err(Error::config("methods", format!("`{}` is listed twice", s.name())));
            }
        }
        self.configs()?;
        Ok(())
    }

    /// SHA-256 of the canonical TOML form with the worker count cleared.
    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut canonical = self.clone();
        canonical.experiment.workers = 0;
        Sha256::digest(canonical.to_toml_string().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSample {
    pub scenario: usize,
    pub activity_draw: usize,
    pub ue_index: usize,
    /// Mean of log2(1 + γ) over channel draws.
    pub rate_ach: f64,
    pub rate_up: f64,
}

/// Aggregate for one (method, axis value).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointMetrics {
    pub method: String,
    pub axis_value: f64,
    pub symbol_errors: u64,
    pub trials: u64,
    pub ser: f64,
    pub ser_ci: (f64, f64),
    /// Sum of the active UEs' rates, averaged over activity draws.
    pub sum_rate: f64,
    pub net_sum_rate: f64,
    pub rate_samples: Vec<RateSample>,
    pub cdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub master_seed: u64,
    pub scenario_seeds: Vec<u64>,
    pub config_sha256: String,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    pub workers: usize,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub plan: ExperimentPlan,
    /// Method-major, axis values ascending.
    pub points: Vec<PointMetrics>,
    pub metadata: RunMetadata,
}

impl MetricsReport {
    pub fn point(&self, method: &str, axis_value: f64) -> Option<&PointMetrics> {
        self.points
            .iter()
            .find(|p| p.method == method && p.axis_value == axis_value)
    }
}

/// Per-scenario state computed once and shared by every activity draw.
struct Prepared {
    config: SystemConfig,
    shared: Arc<Shared>,
}

/// The part of [`Prepared`] that does not depend on the noise level.
struct Shared {
    ctx: FeatureContext,
    assignments: Vec<PilotAssignment>,
    book: PilotBook,
}

fn prepare(
    config: &SystemConfig,
    scenario_index: usize,
    strategies: &[Arc<dyn PilotStrategy>],
) -> Result<Prepared> {
    let seed = config.seed;
    let scenario = build_scenario(config, &mut substream(seed, &[TAG_SCENARIO, scenario_index as u64]))?;
    let ctx = FeatureContext::build(scenario);
    let assignments = strategies
        .iter()
        .map(|s| {
            let stream = derive_seed(seed, &[TAG_ASSIGNMENT, scenario_index as u64, name_tag(s.name())]);
            let mut a = s.assign(&ctx, &mut crate::rng::SimRng::seed_from_u64(stream))?;
            a.method = s.name().to_string();
            a.seed = Some(stream);
            Ok(a)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        config: config.clone(),
        shared: Arc::new(Shared {
            book: build_pilot_book(config.pilot_len)?,
            ctx,
            assignments,
        }),
    })
}

/// Write the per-scenario artifacts of scenario `scenario_index` at the first
/// axis value: `covariances.txt`, the three feature sets (`features_*.txt`
/// and `.csv`) and one `assignment_<METHOD>.csv` per planned method.
pub fn export_scenario(plan: &ExperimentPlan, scenario_index: usize, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    use std::io::BufWriter;
    let registry = StrategyRegistry::with_builtins();
    plan.validate(&registry)?;
    let strategies = registry.resolve(&plan.experiment.methods)?;
    let cfg = &plan.configs()?[0];
    let prep = prepare(cfg, scenario_index, &strategies)?;
    std::fs::create_dir_all(dir)?;
    let create = |name: &str| -> Result<BufWriter<std::fs::File>> {
        Ok(BufWriter::new(std::fs::File::create(dir.join(name))?))
    };
    let mut written = Vec::new();
    prep.shared.ctx.covariances.write_to(create("covariances.txt")?)?;
    written.push(dir.join("covariances.txt"));
    let features = [
        crate::features::cmd_feature(prep.shared.ctx.dissimilarity()?),
        prep.shared.ctx.chart()?.clone(),
        prep.shared.ctx.position(),
    ];
    for f in &features {
        let stem = format!("features_{}", f.kind.as_str());
        f.write_to(create(&format!("{stem}.txt"))?)?;
        f.write_csv(create(&format!("{stem}.csv"))?)?;
        written.push(dir.join(format!("{stem}.txt")));
        written.push(dir.join(format!("{stem}.csv")));
    }
    for a in &prep.shared.assignments {
        let name = format!("assignment_{}.csv", a.method);
        a.write_csv(create(&name)?, true)?;
        written.push(dir.join(name));
    }
    Ok(written)
}

#[derive(Debug, Clone)]
struct Tally {
    errors: u64,
    symbols: u64,
    /// Per active UE, mean log2(1 + γ) over channel draws.
    rates: Vec<f64>,
}

struct TaskOutput {
    active: Vec<usize>,
    tallies: Vec<Tally>,
}

/// Receiver-side quantities fixed for one activity draw and method.
struct Receiver {
    knowledge: ChannelKnowledge,
    pilots: Vec<usize>,
    estimators: Vec<LmmseEstimator>,
    error_sum: CMatrix,
}

fn build_receiver(
    prep: &Prepared,
    strategy: &dyn PilotStrategy,
    assignment: &PilotAssignment,
    active: &crate::scenario::ActiveSet,
) -> Result<Receiver> {
    let cfg = &prep.config;
    let dim = cfg.receive_dim();
    let knowledge = strategy.channel_knowledge();
    let pilots: Vec<usize> = active.indices.iter().map(|&k| assignment.pilots[k]).collect();
    let mut error_sum = CMatrix::zeros(dim, dim);
    let mut estimators = Vec::new();
    if knowledge == ChannelKnowledge::Estimated {
        let covs = &prep.shared.ctx.covariances.matrices;
        let sets = copilot_sets(assignment, active);
        let noise_term = cfg.noise_power() / (cfg.tx_power * cfg.pilot_len as f64);
        for (i, &k) in active.indices.iter().enumerate() {
            let interferers: Vec<&CMatrix> = sets.interferers[i].iter().map(|&j| &covs[j]).collect();
            let est = LmmseEstimator::new(&covs[k], &interferers, noise_term, cfg.antennas_per_sector)?;
            error_sum += &est.error_cov;
            estimators.push(est);
        }
    }
    Ok(Receiver {
        knowledge,
        pilots,
        estimators,
        error_sum,
    })
}

fn simulate_activity(
    prep: &Prepared,
    strategies: &[Arc<dyn PilotStrategy>],
    experiment: &Experiment,
    scenario_index: usize,
    activity_draw: usize,
) -> Result<TaskOutput> {
    let cfg = &prep.config;
    let seed = cfg.seed;
    let (s, a) = (scenario_index as u64, activity_draw as u64);
    let scenario = &prep.shared.ctx.scenario;
    let active = sample_active_set(scenario, &mut substream(seed, &[TAG_ACTIVITY, s, a]))?;
    let k = active.len();
    let dim = cfg.receive_dim();
    let tau = cfg.pilot_len;
    let t_sym = experiment.data_symbols;
    let (pu, s2) = (cfg.tx_power, cfg.noise_power());
    let amp = C64::new(pu.sqrt(), 0.0);
    let constellation = experiment.constellation;
    let points = constellation.points();

    let receivers = strategies
        .iter()
        .zip(&prep.shared.assignments)
        .map(|(st, asg)| build_receiver(prep, st.as_ref(), asg, &active))
        .collect::<Result<Vec<_>>>()?;
    let mut tallies = vec![
        Tally {
            errors: 0,
            symbols: 0,
            rates: vec![0.0; k],
        };
        strategies.len()
    ];

    for c in 0..experiment.channel_draws {
        // One stream per channel draw; every method sees the same channels,
        // pilot noise, data symbols and data noise.
        let mut rng = substream(seed, &[TAG_CHANNEL, s, a, c as u64]);
        let mut h = CMatrix::zeros(dim, k);
        for (i, &ue) in active.indices.iter().enumerate() {
            h.set_column(i, &sample_compound_channel(&scenario.users[ue], cfg, &mut rng));
        }
        let pilot_noise = CMatrix::from_fn(dim, tau, |_, _| complex_gaussian(&mut rng, s2));
        let symbols: Vec<usize> = (0..k * t_sym)
            .map(|_| rng.random_range(0..constellation.size()))
            .collect();
        let x = CMatrix::from_fn(k, t_sym, |i, t| points[symbols[t * k + i]] * amp);
        let data_noise = CMatrix::from_fn(dim, t_sym, |_, _| complex_gaussian(&mut rng, s2));
        let y_data = &h * &x + data_noise;

        for (rx, tally) in receivers.iter().zip(tallies.iter_mut()) {
            let h_hat = match rx.knowledge {
                ChannelKnowledge::Perfect => h.clone(),
                ChannelKnowledge::Estimated => {
                    let y = pilot_rx(&h, &rx.pilots, &prep.shared.book, pu, 0.0, &mut rng) + &pilot_noise;
                    let mut h_hat = CMatrix::zeros(dim, k);
                    for (i, est) in rx.estimators.iter().enumerate() {
                        let psi = prep.shared.book.pilot(rx.pilots[i]) * amp;
                        h_hat.set_column(i, &est.estimate(&correlate(&y, &psi, pu)));
                    }
                    h_hat
                }
            };
            let w = lmmse_combiner(&h_hat, &rx.error_sum, pu, s2)?;
            for (r, g) in tally.rates.iter_mut().zip(sinr_all(&w, &h_hat, &rx.error_sum, pu, s2)) {
                *r += (1.0 + g).log2();
            }
            for t in 0..t_sym {
                let det = detect(&w, &y_data.column(t).into_owned(), constellation);
                tally.errors += det
                    .decisions
                    .iter()
                    .enumerate()
                    .filter(|&(i, &d)| d != symbols[t * k + i])
                    .count() as u64;
            }
            tally.symbols += (k * t_sym) as u64;
        }
    }
    let n = experiment.channel_draws as f64;
    for tally in &mut tallies {
        for r in &mut tally.rates {
            *r /= n;
        }
    }
    Ok(TaskOutput {
        active: active.indices,
        tallies,
    })
}

/// Run every (axis value, method) point of `plan` with the built-in methods.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<MetricsReport> {
    run_experiment_with(plan, &StrategyRegistry::with_builtins())
}

/// Like [`run_experiment`] with a caller-supplied method registry.
///
/// Work is split into independent (scenario, activity draw) tasks with
/// pre-derived random streams and reduced in a fixed order, so the report is
/// identical for any worker count.
pub fn run_experiment_with(plan: &ExperimentPlan, registry: &StrategyRegistry) -> Result<MetricsReport> {
    plan.validate(registry)?;
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let e = &plan.experiment;
    let strategies = registry.resolve(&e.methods)?;
    let configs = plan.configs()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(e.workers)
        .build()
        .map_err(|err| Error::domain(format!("cannot start worker pool: {err}")))?;

    let tasks: Vec<(usize, usize)> = (0..e.scenarios)
        .flat_map(|s| (0..e.activity_draws).map(move |a| (s, a)))
        .collect();
    let mut per_value: Vec<Vec<PointMetrics>> = Vec::with_capacity(configs.len());
    let mut prepared: Vec<Arc<Prepared>> = Vec::new();

    for (vi, cfg) in configs.iter().enumerate() {
        let value = e.values[vi];
        log::info!("{} = {value}: preparing {} scenario(s)", e.axis.as_str(), e.scenarios);
        if vi == 0 || e.axis.changes_preparation() {
            prepared = pool.install(|| {
                (0..e.scenarios)
                    .into_par_iter()
                    .map(|s| prepare(cfg, s, &strategies).map(Arc::new))
                    .collect::<Result<Vec<_>>>()
            })?;
        } else {
            // Only the noise level changed; keep geometry and assignments.
            prepared = prepared
                .iter()
                .map(|p| {
                    Arc::new(Prepared {
                        config: cfg.clone(),
                        shared: Arc::clone(&p.shared),
                    })
                })
                .collect();
        }
        log::info!("{} = {value}: running {} tasks", e.axis.as_str(), tasks.len());
        let outputs = pool.install(|| {
            tasks
                .par_iter()
                .map(|&(s, a)| simulate_activity(&prepared[s], &strategies, e, s, a))
                .collect::<Result<Vec<_>>>()
        })?;
        per_value.push(reduce(cfg, value, &strategies, &tasks, &outputs)?);
    }

    let mut points = Vec::new();
    for m in 0..strategies.len() {
        for pv in &per_value {
            points.push(pv[m].clone());
        }
    }
    Ok(MetricsReport {
        plan: plan.clone(),
        points,
        metadata: RunMetadata {
            master_seed: plan.seed(),
            scenario_seeds: (0..e.scenarios)
                .map(|s| derive_seed(plan.seed(), &[TAG_SCENARIO, s as u64]))
                .collect(),
            config_sha256: plan.config_hash(),
            started_unix,
            elapsed_seconds: started.elapsed().as_secs_f64(),
            workers: pool.current_num_threads(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

fn reduce(
    cfg: &SystemConfig,
    value: f64,
    strategies: &[Arc<dyn PilotStrategy>],
    tasks: &[(usize, usize)],
    outputs: &[TaskOutput],
) -> Result<Vec<PointMetrics>> {
    let prelog = 1.0 - cfg.pilot_len as f64 / cfg.coherence_len as f64;
    strategies
        .iter()
        .enumerate()
        .map(|(m, st)| {
            let (mut errors, mut trials, mut sum_rate) = (0u64, 0u64, 0.0);
            let mut samples = Vec::new();
            for (&(s, a), out) in tasks.iter().zip(outputs) {
                let t = &out.tallies[m];
                errors += t.errors;
                trials += t.symbols;
                sum_rate += t.rates.iter().sum::<f64>();
                for (&ue, &r) in out.active.iter().zip(&t.rates) {
                    samples.push(RateSample {
                        scenario: s,
                        activity_draw: a,
                        ue_index: ue,
                        rate_ach: r,
                        rate_up: prelog * r,
                    });
                }
            }
            let sum_rate = sum_rate / tasks.len() as f64;
            let rates: Vec<f64> = samples.iter().map(|r| r.rate_ach).collect();
            let ser = errors as f64 / trials as f64;
            Ok(PointMetrics {
                method: st.name().to_string(),
                axis_value: value,
                symbol_errors: errors,
                trials,
                ser,
                ser_ci: wilson_interval(errors, trials),
                sum_rate,
                net_sum_rate: prelog * sum_rate,
                cdf: empirical_cdf(&rates)?,
                rate_samples: samples,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentPlan {
        let mut plan = ExperimentPlan::desk();
        plan.system.num_users = 24;
        plan.system.num_active = 4;
        plan.system.antennas_per_sector = 8;
        plan.system.pilot_len = 4;
        plan.system.num_paths = 20;
        plan.system.chart_neighbors = 5;
        plan.system.quadrature_points = 64;
        plan.experiment.activity_draws = 3;
        plan.experiment.channel_draws = 4;
        plan.experiment.data_symbols = 5;
        plan
    }

    #[test]
    fn plan_validation_errors() {
        let reg = StrategyRegistry::with_builtins();
        let mut p = tiny();
        p.experiment.values = vec![0.0, 0.0];
        assert!(matches!(p.validate(&reg), Err(Error::Config { field: "values", .. })));
        let mut p = tiny();
        p.experiment.channel_draws = 0;
        assert!(matches!(p.validate(&reg), Err(Error::Config { field: "channel_draws", .. })));
        let mut p = tiny();
        p.experiment.axis = SweepAxis::PilotLenTau;
        p.experiment.values = vec![8.0, 500.0];
        assert!(matches!(p.validate(&reg), Err(Error::Config { field: "pilot_len", .. })));
        assert!(matches!(run_experiment(&p), Err(Error::Config { .. })));
        let mut p = tiny();
        p.experiment.axis = SweepAxis::AntennasM;
        p.experiment.values = vec![2.5];
        assert!(matches!(p.validate(&reg), Err(Error::Config { field: "values", .. })));
        let mut p = tiny();
        p.experiment.methods = vec!["NN_CHART".into(), "nn-chart".into()];
        assert!(matches!(p.validate(&reg), Err(Error::Config { field: "methods", .. })));
        p.experiment.methods = vec!["BOGUS".into()];
        assert!(p.validate(&reg).is_err());
        assert!(tiny().validate(&reg).is_ok());
    }

    #[test]
    fn plan_toml_roundtrip_and_axis_names() {
        let p = tiny();
        let back = ExperimentPlan::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(back, p);
        let partial = ExperimentPlan::from_toml_str("[experiment]\naxis = \"antennas_m\"\nvalues = [8, 16]\n").unwrap();
        assert_eq!(partial.experiment.axis, SweepAxis::AntennasM);
        assert_eq!(partial.system, SystemConfig::default());
        assert!(ExperimentPlan::from_toml_str("[experiment]\nbogus = 1\n").is_err());
        for axis in [SweepAxis::SnrDb, SweepAxis::AntennasM, SweepAxis::PilotLenTau] {
            assert_eq!(axis.as_str().parse::<SweepAxis>().unwrap(), axis);
        }
        let mut w = p.clone();
        w.experiment.workers = 7;
        assert_eq!(w.config_hash(), p.config_hash());
        assert_eq!(p.config_hash().len(), 64);
    }

    #[test]
    fn report_shape_and_invariants() {
        let mut p = tiny();
        p.experiment.values = vec![-5.0, 5.0];
        p.experiment.methods = vec!["PERFECT_CSI".into(), "NN_CHART".into(), "RANDOM".into()];
        let r = run_experiment(&p).unwrap();
        assert_eq!(r.points.len(), 6);
        assert_eq!(r.points[0].method, "PERFECT_CSI");
        assert_eq!(r.points[1].axis_value, 5.0);
        let prelog = 1.0 - 4.0 / 200.0;
        for pt in &r.points {
            assert!((0.0..=1.0).contains(&pt.ser));
            assert!(pt.ser_ci.0 <= pt.ser && pt.ser <= pt.ser_ci.1);
            assert_eq!(pt.trials, 3 * 4 * 5 * 4);
            assert_eq!(pt.rate_samples.len(), 3 * 4);
            assert!(pt.rate_samples.iter().all(|s| s.rate_ach >= 0.0));
            assert_eq!(pt.net_sum_rate, prelog * pt.sum_rate);
            assert!(pt.cdf.windows(2).all(|w| w[0].1 <= w[1].1));
            assert_eq!(pt.cdf.last().unwrap().1, 1.0);
        }
        // Higher SNR cannot lower the perfect-CSI rate on common channels.
        assert!(r.points[1].sum_rate > r.points[0].sum_rate);
    }

    #[test]
    fn deterministic_across_workers() {
        let mut p = tiny();
        p.experiment.methods = vec!["NN_CMD".into(), "SGPS".into()];
        p.experiment.workers = 1;
        let a = run_experiment(&p).unwrap();
        p.experiment.workers = 3;
        let b = run_experiment(&p).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn perfect_csi_high_snr_is_nearly_error_free() {
        let mut p = tiny();
        p.system.antennas_per_sector = 8;
        p.experiment.values = vec![30.0];
        p.experiment.methods = vec!["PERFECT_CSI".into()];
        p.experiment.channel_draws = 20;
        p.experiment.data_symbols = 20;
        let r = run_experiment(&p).unwrap();
        assert!(r.points[0].ser < 1e-3, "{}", r.points[0].ser);
    }
}
