//! Assignment methods behind a common trait, looked up by name at run time.

use std::sync::Arc;

use super::{nearest_neighbor_assignment, random_assignment, sgps_assignment, PilotAssignment};
use crate::features::FeatureContext;
use crate::rng::SimRng;
use crate::{Error, Result};

/// What the receiver knows about the channel when a method is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKnowledge {
    /// LMMSE estimates from the contaminated pilot observation.
    Estimated,
    /// ĥ = h with zero error covariance; a lower bound for SER.
    Perfect,
}

pub trait PilotStrategy: Send + Sync {
    /// Registry key, also written to the `method` column of reports.
    fn name(&self) -> &str;

    /// Assign pilots to every UE of the scenario held by `ctx`.
    fn assign(&self, ctx: &FeatureContext, rng: &mut SimRng) -> Result<PilotAssignment>;

    fn channel_knowledge(&self) -> ChannelKnowledge {
        ChannelKnowledge::Estimated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSource {
    Chart,
    CmdRow,
    Position,
}

/// Nearest-neighbour chain over one of the feature families.
#[derive(Debug, Clone)]
pub struct NearestNeighbor {
    pub name: String,
    pub source: FeatureSource,
}

impl NearestNeighbor {
    pub fn new(name: impl Into<String>, source: FeatureSource) -> Self {
        Self {
            name: name.into(),
            source,
        }
    }
}

impl PilotStrategy for NearestNeighbor {
    fn name(&self) -> &str {
        &self.name
    }

    fn assign(&self, ctx: &FeatureContext, rng: &mut SimRng) -> Result<PilotAssignment> {
        let tau = ctx.scenario.config.pilot_len;
        let mut a = match self.source {
            FeatureSource::Chart => nearest_neighbor_assignment(ctx.chart()?, tau, rng)?,
            FeatureSource::CmdRow => {
                let f = crate::features::cmd_feature(ctx.dissimilarity()?);
                nearest_neighbor_assignment(&f, tau, rng)?
            }
            FeatureSource::Position => nearest_neighbor_assignment(&ctx.position(), tau, rng)?,
        };
        a.method = self.name.clone();
        Ok(a)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RandomPilots;

impl PilotStrategy for RandomPilots {
    fn name(&self) -> &str {
        "RANDOM"
    }

    fn assign(&self, ctx: &FeatureContext, rng: &mut SimRng) -> Result<PilotAssignment> {
        let cfg = &ctx.scenario.config;
        let mut a = random_assignment(cfg.num_users, cfg.pilot_len, cfg.random_mode, rng)?;
        a.method = self.name().into();
        Ok(a)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sgps;

impl PilotStrategy for Sgps {
    fn name(&self) -> &str {
        "SGPS"
    }

    fn assign(&self, ctx: &FeatureContext, _rng: &mut SimRng) -> Result<PilotAssignment> {
        let mut a = sgps_assignment(ctx.dissimilarity()?, ctx.scenario.config.pilot_len)?;
        a.method = self.name().into();
        Ok(a)
    }
}

/// Genie receiver. The pilot assignment is irrelevant and drawn at random.
#[derive(Debug, Clone, Default)]
pub struct PerfectCsi;

impl PilotStrategy for PerfectCsi {
    fn name(&self) -> &str {
        "PERFECT_CSI"
    }

    fn assign(&self, ctx: &FeatureContext, rng: &mut SimRng) -> Result<PilotAssignment> {
        let mut a = RandomPilots.assign(ctx, rng)?;
        a.method = self.name().into();
        Ok(a)
    }

    fn channel_knowledge(&self) -> ChannelKnowledge {
        ChannelKnowledge::Perfect
    }
}

#[derive(Clone, Default)]
pub struct StrategyRegistry {
    entries: Vec<Arc<dyn PilotStrategy>>,
}

impl std::fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// All built-in methods.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(PerfectCsi));
        r.register(Arc::new(NearestNeighbor::new("NN_POSITION", FeatureSource::Position)));
        r.register(Arc::new(NearestNeighbor::new("NN_CHART", FeatureSource::Chart)));
        r.register(Arc::new(NearestNeighbor::new("NN_CMD", FeatureSource::CmdRow)));
        r.register(Arc::new(Sgps));
        r.register(Arc::new(RandomPilots));
        r
    }

    /// Add a strategy, replacing any existing entry of the same name.
    pub fn register(&mut self, strategy: Arc<dyn PilotStrategy>) {
        match self.position(strategy.name()) {
            Some(i) => self.entries[i] = strategy,
            None => self.entries.push(strategy),
        }
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|s| s.name().eq_ignore_ascii_case(name))
    }

    /// Case-insensitive lookup; `-` and `_` are interchangeable.
    pub fn get(&self, name: &str) -> Option<Arc<dyn PilotStrategy>> {
        let normalized = name.replace('-', "_");
        self.position(&normalized).map(|i| self.entries[i].clone())
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|s| s.name()).collect()
    }

    pub fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Arc<dyn PilotStrategy>>> {
        names
            .iter()
            .map(|n| {
                self.get(n.as_ref()).ok_or_else(|| {
                    Error::config(
                        "methods",
                        format!("unknown method `{}` (known: {})", n.as_ref(), self.names().join(", ")),
                    )
                })
            })
            .collect()
    }
}
