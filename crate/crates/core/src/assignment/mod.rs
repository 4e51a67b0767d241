//! Pilot assignment: the nearest-neighbour chain over UE features, the
//! random and statistical-greedy baselines, co-pilot bookkeeping, and an
//! exhaustive max-min oracle for small instances.

mod strategy;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::RandomMode;
use crate::features::{DissimilarityMatrix, FeatureSet};
use crate::scenario::ActiveSet;
use crate::{Error, Result};

pub use strategy::{
    ChannelKnowledge, FeatureSource, NearestNeighbor, PerfectCsi, PilotStrategy, RandomPilots,
    Sgps, StrategyRegistry,
};

/// Pilot index per UE. Pilots are stored 0-based; `pilot_numbers` gives the
/// 1-based φ labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotAssignment {
    pub pilots: Vec<usize>,
    pub num_pilots: usize,
    pub method: String,
    pub seed: Option<u64>,
    /// Order in which UEs were visited, for chain-based methods.
    pub visit_order: Vec<usize>,
}

impl PilotAssignment {
    pub fn len(&self) -> usize {
        self.pilots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pilots.is_empty()
    }

    pub fn pilot_numbers(&self) -> Vec<usize> {
        self.pilots.iter().map(|p| p + 1).collect()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        let mut m = vec![0; self.num_pilots];
        for &p in &self.pilots {
            m[p] += 1;
        }
        m
    }

    pub fn is_balanced(&self) -> bool {
        let m = self.multiplicities();
        let (lo, hi) = (m.iter().min().copied(), m.iter().max().copied());
        matches!((lo, hi), (Some(lo), Some(hi)) if hi - lo <= 1)
    }

    /// UEs holding pilot `p`, ascending.
    pub fn group(&self, p: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.pilots[i] == p).collect()
    }

    /// CSV rows `ue_index,pilot_index,method,seed` (both indices 0-based).
    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> Result<()> {
        if header {
            writeln!(w, "ue_index,pilot_index,method,seed")?;
        }
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        for (ue, p) in self.pilots.iter().enumerate() {
            writeln!(w, "{ue},{p},{},{seed}", self.method)?;
        }
        Ok(())
    }
}

/// Nearest-neighbour chain assignment starting from a random UE.
pub fn nearest_neighbor_assignment<R: Rng + ?Sized>(
    features: &FeatureSet,
    num_pilots: usize,
    rng: &mut R,
) -> Result<PilotAssignment> {
    if features.is_empty() {
        return Err(Error::domain("pilot assignment needs at least one UE"));
    }
    let start = rng.random_range(0..features.len());
    nearest_neighbor_from(features, num_pilots, start)
}

/// Deterministic core of the chain: `start` takes φ1, then pilots are handed
/// out cyclically, each to the unassigned UE closest (squared Euclidean
/// feature distance, lowest index on ties) to the previously assigned UE.
pub fn nearest_neighbor_from(
    features: &FeatureSet,
    num_pilots: usize,
    start: usize,
) -> Result<PilotAssignment> {
    let n = features.len();
    if num_pilots == 0 {
        return Err(Error::domain("pilot count must be at least 1"));
    }
    if start >= n {
        return Err(Error::domain(format!("start UE {start} out of range for {n} UEs")));
    }
    let mut pilots = vec![usize::MAX; n];
    let mut unassigned = vec![true; n];
    let mut order = Vec::with_capacity(n);
    let mut prev = start;
    pilots[start] = 0;
    unassigned[start] = false;
    order.push(start);
    for step in 1..n {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in (0..n).filter(|&j| unassigned[j]) {
            let d = features.sq_distance(prev, j);
            if d < best.0 {
                best = (d, j);
            }
        }
        let next = if best.1 == usize::MAX {
            // Only NaN distances remain; fall back to index order.
            (0..n).find(|&j| unassigned[j]).expect("unassigned UE remains")
        } else {
            best.1
        };
        pilots[next] = step % num_pilots;
        unassigned[next] = false;
        order.push(next);
        prev = next;
    }
    Ok(PilotAssignment {
        pilots,
        num_pilots,
        method: String::new(),
        seed: None,
        visit_order: order,
    })
}

pub fn random_assignment<R: Rng + ?Sized>(
    num_users: usize,
    num_pilots: usize,
    mode: RandomMode,
    rng: &mut R,
) -> Result<PilotAssignment> {
    if num_pilots == 0 {
        return Err(Error::domain("pilot count must be at least 1"));
    }
    let pilots = match mode {
        RandomMode::Balanced => {
            let mut p: Vec<usize> = (0..num_users).map(|i| i % num_pilots).collect();
            p.shuffle(rng);
            p
        }
        RandomMode::Iid => (0..num_users).map(|_| rng.random_range(0..num_pilots)).collect(),
    };
    Ok(PilotAssignment {
        pilots,
        num_pilots,
        method: String::new(),
        seed: None,
        visit_order: Vec::new(),
    })
}

/// Group-size bookkeeping for balanced assignments: N = qτ + r allows r
/// groups of q + 1 and τ − r groups of q.
#[derive(Debug, Clone)]
struct Balance {
    floor: usize,
    remainder: usize,
    full: usize,
}

impl Balance {
    fn new(n: usize, tau: usize) -> Self {
        Self {
            floor: n / tau,
            remainder: n % tau,
            full: 0,
        }
    }

    fn accepts(&self, size: usize) -> bool {
        size < self.floor || (size == self.floor && self.full < self.remainder)
    }

    fn add(&mut self, size_before: usize) {
        if size_before == self.floor {
            self.full += 1;
        }
    }

    fn remove(&mut self, size_after: usize) {
        if size_after == self.floor {
            self.full -= 1;
        }
    }
}

/// Statistical greedy pilot scheduling, reconstructed: UEs are visited in
/// descending total similarity Σ_j (1 − D[n][j]); each takes the pilot whose
/// current holders are least similar to it (max of the min dissimilarity,
/// empty groups scoring 1), subject to balanced group sizes.
pub fn sgps_assignment(d: &DissimilarityMatrix, num_pilots: usize) -> Result<PilotAssignment> {
    if num_pilots == 0 {
        return Err(Error::domain("pilot count must be at least 1"));
    }
    let n = d.len();
    let similarity: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| 1.0 - d.get(i, j)).sum())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| similarity[b].total_cmp(&similarity[a]).then(a.cmp(&b)));

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); num_pilots];
    let mut balance = Balance::new(n, num_pilots);
    let mut pilots = vec![0; n];
    for &ue in &order {
        let mut best: Option<(f64, usize)> = None;
        for (p, g) in groups.iter().enumerate() {
            if !balance.accepts(g.len()) {
                continue;
            }
            let score = g.iter().map(|&j| d.get(ue, j)).fold(1.0, f64::min);
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, p));
            }
        }
        let (_, p) = best.expect("balanced capacity always leaves an open pilot");
        balance.add(groups[p].len());
        groups[p].push(ue);
        pilots[ue] = p;
    }
    Ok(PilotAssignment {
        pilots,
        num_pilots,
        method: String::new(),
        seed: None,
        visit_order: order,
    })
}

/// Per active UE k: G_k (all UEs on k's pilot, k included) and I_k (the
/// other active UEs in G_k).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopilotSets {
    pub active: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
    pub interferers: Vec<Vec<usize>>,
}

impl CopilotSets {
    /// Interferers of the k-th active UE as positions in `active`.
    pub fn interferer_positions(&self, k: usize) -> Vec<usize> {
        self.interferers[k]
            .iter()
            .map(|ue| self.active.binary_search(ue).expect("interferer is active"))
            .collect()
    }
}

pub fn copilot_sets(assignment: &PilotAssignment, active: &ActiveSet) -> CopilotSets {
    let groups: Vec<Vec<usize>> = active
        .indices
        .iter()
        .map(|&k| assignment.group(assignment.pilots[k]))
        .collect();
    let interferers = active
        .indices
        .iter()
        .zip(&groups)
        .map(|(&k, g)| g.iter().copied().filter(|&j| j != k && active.contains(j)).collect())
        .collect();
    CopilotSets {
        active: active.indices.clone(),
        groups,
        interferers,
    }
}

/// Smallest dissimilarity between two UEs sharing a pilot, restricted to
/// `active` when given. 1 when no pair shares a pilot.
pub fn min_intragroup_dissimilarity(
    assignment: &PilotAssignment,
    d: &DissimilarityMatrix,
    active: Option<&ActiveSet>,
) -> f64 {
    let members: Vec<usize> = match active {
        Some(a) => a.indices.clone(),
        None => (0..assignment.len()).collect(),
    };
    let mut best: f64 = 1.0;
    for (x, &i) in members.iter().enumerate() {
        for &j in &members[x + 1..] {
            if assignment.pilots[i] == assignment.pilots[j] {
                best = best.min(d.get(i, j));
            }
        }
    }
    best
}

pub const BRUTE_FORCE_MAX_USERS: usize = 12;

/// Exhaustive search over balanced assignments for the maximum of
/// [`min_intragroup_dissimilarity`] over the active UEs.
pub fn brute_force_assignment(
    d: &DissimilarityMatrix,
    num_pilots: usize,
    active: &ActiveSet,
) -> Result<PilotAssignment> {
    let n = d.len();
    if n > BRUTE_FORCE_MAX_USERS {
        return Err(Error::domain(format!(
            "brute-force assignment refuses N = {n} (limit {BRUTE_FORCE_MAX_USERS})"
        )));
    }
    if num_pilots == 0 {
        return Err(Error::domain("pilot count must be at least 1"));
    }
    let is_active: Vec<bool> = (0..n).map(|i| active.contains(i)).collect();

    struct Search<'a> {
        d: &'a DissimilarityMatrix,
        is_active: &'a [bool],
        tau: usize,
        groups: Vec<Vec<usize>>,
        balance: Balance,
        current: Vec<usize>,
        best_value: f64,
        best: Option<Vec<usize>>,
    }

    impl Search<'_> {
        fn go(&mut self, ue: usize, value: f64) {
            if value <= self.best_value && self.best.is_some() {
                return;
            }
            if ue == self.current.len() {
                self.best_value = value;
                self.best = Some(self.current.clone());
                return;
            }
            let opened = self.groups.iter().filter(|g| !g.is_empty()).count();
            // Groups are interchangeable: only one empty group is tried.
            let limit = (opened + 1).min(self.tau);
            for p in 0..limit {
                let size = self.groups[p].len();
                if !self.balance.accepts(size) {
                    continue;
                }
                let mut v = value;
                if self.is_active[ue] {
                    for &j in &self.groups[p] {
                        if self.is_active[j] {
                            v = v.min(self.d.get(ue, j));
                        }
                    }
                }
                self.balance.add(size);
                self.groups[p].push(ue);
                self.current[ue] = p;
                self.go(ue + 1, v);
                self.groups[p].pop();
                self.balance.remove(size);
            }
        }
    }

    let mut s = Search {
        d,
        is_active: &is_active,
        tau: num_pilots,
        groups: vec![Vec::new(); num_pilots],
        balance: Balance::new(n, num_pilots),
        current: vec![0; n],
        best_value: f64::NEG_INFINITY,
        best: None,
    };
    s.go(0, 1.0);
    Ok(PilotAssignment {
        pilots: s.best.unwrap_or_default(),
        num_pilots,
        method: "BRUTE_FORCE".into(),
        seed: None,
        visit_order: Vec::new(),
    })
}
