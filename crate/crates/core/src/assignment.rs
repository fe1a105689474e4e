//! Two-drones-per-target consensus auction.
//!
//! Each drone keeps a task table `X` (targets × drones) holding its belief of
//! which drone claims which target, plus its own additional rewards per target.
//! A round is an auction phase (every drone without a claim bids for its best
//! scoring visible target) followed by a consensus phase (tables are merged
//! with neighbours and over-subscribed claims are released).
//!
//! Column `g` of a table is owned by drone `g`: only `g` ever sets or clears
//! its entries, and every change bumps the column version. Merging keeps the
//! freshest version of each column and falls back to an entrywise max when
//! versions tie, so a release propagates through multi-hop neighbourhoods.
//!
//! The consensus phase visits drones in id order, each seeing the latest
//! tables of its neighbours. Fully synchronous releases make every
//! over-subscribed drone back off at once and the auction oscillates.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Smallest distance used in the `1/d` reward.
pub const MIN_REWARD_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssignmentConfig {
    /// Reward adjustment factor `ε̃ > 1`.
    pub epsilon_tilde: f64,
    /// Round cap; `None` means `10·N`.
    pub max_rounds: Option<usize>,
}

impl Default for AssignmentConfig {
    fn default() -> Self {
        Self {
            epsilon_tilde: 1.5,
            max_rounds: None,
        }
    }
}

impl AssignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_tilde > 1.0 && self.epsilon_tilde.is_finite()) {
            return Err(Error::Config(format!(
                "reward adjustment factor must exceed 1, got {}",
                self.epsilon_tilde
            )));
        }
        if self.max_rounds == Some(0) {
            return Err(Error::Config("assignment round cap must be positive".into()));
        }
        Ok(())
    }

    pub fn round_cap(&self, drones: usize) -> usize {
        self.max_rounds.unwrap_or(10 * drones.max(1))
    }
}

/// One drone's view of the claims, plus its additional rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTable {
    targets: usize,
    drones: usize,
    /// Row-major `targets × drones` 0/1 matrix.
    claims: Vec<u8>,
    versions: Vec<u64>,
    /// Additional reward per target, as seen by the owning drone.
    pub extra_reward: Vec<f64>,
    /// Auction iteration counter.
    pub iteration: usize,
    /// Target chosen in this drone's most recent auction.
    pub last_claim: Option<usize>,
}

impl TaskTable {
    pub fn new(targets: usize, drones: usize) -> Self {
        Self {
            targets,
            drones,
            claims: vec![0; targets * drones],
            versions: vec![0; drones],
            extra_reward: vec![0.0; targets],
            iteration: 0,
            last_claim: None,
        }
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn drones(&self) -> usize {
        self.drones
    }

    pub fn get(&self, target: usize, drone: usize) -> u8 {
        self.claims[target * self.drones + drone]
    }

    fn set(&mut self, target: usize, drone: usize, value: u8) {
        let idx = target * self.drones + drone;
        if self.claims[idx] != value {
            self.claims[idx] = value;
            self.versions[drone] += 1;
        }
    }

    /// Number of drones believed to claim `target`.
    pub fn claim_count(&self, target: usize) -> usize {
        (0..self.drones).map(|g| self.get(target, g) as usize).sum()
    }

    /// Number of targets believed claimed by `drone`.
    pub fn column_sum(&self, drone: usize) -> usize {
        (0..self.targets).map(|j| self.get(j, drone) as usize).sum()
    }

    /// The target `drone` is believed to claim, if any.
    pub fn claim_of(&self, drone: usize) -> Option<usize> {
        (0..self.targets).find(|&j| self.get(j, drone) == 1)
    }

    pub fn version(&self, drone: usize) -> u64 {
        self.versions[drone]
    }

    /// Claimant ids of `target`, ascending.
    pub fn claimants(&self, target: usize) -> Vec<usize> {
        (0..self.drones).filter(|&g| self.get(target, g) == 1).collect()
    }

    pub fn same_claims(&self, other: &TaskTable) -> bool {
        self.claims == other.claims
    }

    /// Short content hash of the claim matrix.
    pub fn claims_hash(&self) -> String {
        let digest = Sha256::digest(&self.claims);
        hex::encode(&digest[..8])
    }

    fn check_shape(&self, other: &TaskTable) -> Result<()> {
        if self.targets != other.targets || self.drones != other.drones {
            return Err(Error::Protocol(format!(
                "table shape {}x{} does not match {}x{}",
                other.targets, other.drones, self.targets, self.drones
            )));
        }
        Ok(())
    }
}

/// Reward scores `c = 1/d + c₂` of one drone over its visible targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    /// `(target id, score)` in ascending target order.
    pub scores: Vec<(usize, f64)>,
}

impl ScoreVector {
    /// Scores from measured distances of the visible targets and the drone's
    /// additional rewards.
    pub fn from_distances(distances: &[(usize, f64)], extra_reward: &[f64]) -> Self {
        let mut scores: Vec<(usize, f64)> = distances
            .iter()
            .map(|&(j, d)| (j, 1.0 / d.max(MIN_REWARD_DISTANCE) + extra_reward[j]))
            .collect();
        scores.sort_by_key(|&(j, _)| j);
        Self { scores }
    }

    pub fn get(&self, target: usize) -> Option<f64> {
        self.scores.iter().find(|(j, _)| *j == target).map(|&(_, c)| c)
    }

    pub fn visible(&self) -> impl Iterator<Item = usize> + '_ {
        self.scores.iter().map(|&(j, _)| j)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Highest scoring target; ties go to the lowest target id.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &(j, c) in &self.scores {
            match best {
                Some((_, b)) if c <= b => {}
                _ => best = Some((j, c)),
            }
        }
        best.map(|(j, _)| j)
    }
}

/// Auction phase for drone `drone`: claim the best scoring visible target.
///
/// A drone that sees no target leaves its table untouched.
pub fn auction_step(drone: usize, table: &TaskTable, scores: &ScoreVector) -> Result<TaskTable> {
    if drone >= table.drones {
        return Err(Error::Protocol(format!("drone {drone} outside a {}-drone table", table.drones)));
    }
    if table.column_sum(drone) != 0 {
        return Err(Error::Protocol(format!("drone {drone} already holds a claim")));
    }
    let mut next = table.clone();
    if let Some(j) = scores.best() {
        if j >= table.targets {
            return Err(Error::Protocol(format!("score for unknown target {j}")));
        }
        next.set(j, drone, 1);
        next.last_claim = Some(j);
        next.iteration += 1;
    }
    Ok(next)
}

/// What happened in one consensus step.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusOutcome {
    pub table: TaskTable,
    /// `(released target, boosted target)` when the release rule fired.
    pub released: Option<(usize, usize)>,
}

/// Consensus phase for drone `drone`: merge neighbour tables, then release an
/// over-subscribed claim in favour of an under-subscribed visible target.
pub fn consensus_step(
    drone: usize,
    own: &TaskTable,
    received: &[&TaskTable],
    scores: &ScoreVector,
    epsilon_tilde: f64,
) -> Result<ConsensusOutcome> {
    for other in received {
        own.check_shape(other)?;
    }
    if drone >= own.drones {
        return Err(Error::Protocol(format!("drone {drone} outside a {}-drone table", own.drones)));
    }

    let mut table = own.clone();
    for g in (0..own.drones).filter(|&g| g != drone) {
        let newest = received
            .iter()
            .map(|t| t.versions[g])
            .chain(std::iter::once(own.versions[g]))
            .max()
            .unwrap_or(0);
        for j in 0..own.targets {
            let merged = received
                .iter()
                .copied()
                .chain(std::iter::once(own))
                .filter(|t| t.versions[g] == newest)
                .map(|t| t.get(j, g))
                .max()
                .unwrap_or(0);
            table.claims[j * own.drones + g] = merged;
        }
        table.versions[g] = newest;
    }

    let mut released = None;
    if let Some(current) = table.last_claim.filter(|&j| table.get(j, drone) == 1) {
        if scores.len() > 1 && table.claim_count(current) > 2 {
            let candidate = scores
                .visible()
                .filter(|&h| h != current && table.claim_count(h) <= 2)
                .min_by(|&a, &b| {
                    let key = |h: usize| (table.claim_count(h), -scores.get(h).unwrap_or(f64::NEG_INFINITY));
                    let (ca, sa) = key(a);
                    let (cb, sb) = key(b);
                    ca.cmp(&cb).then(sa.total_cmp(&sb)).then(a.cmp(&b))
                });
            if let Some(h) = candidate {
                let c_cur = scores.get(current).unwrap_or(0.0);
                let c_h = scores.get(h).unwrap_or(0.0);
                let boost = epsilon_tilde * (c_cur - c_h).max(0.0);
                table.set(current, drone, 0);
                table.extra_reward[h] = table.extra_reward[h].max(boost);
                released = Some((current, h));
            }
        }
    }
    Ok(ConsensusOutcome { table, released })
}

/// What each drone can see when the assignment runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentInput {
    pub targets: usize,
    /// Per drone: `(target id, measured distance)` of each visible target.
    pub distances: Vec<Vec<(usize, f64)>>,
    /// Per drone: ids of communication neighbours.
    pub neighbors: Vec<Vec<usize>>,
}

/// One line of the assignment trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: usize,
    pub drone: usize,
    pub claimed_target: Option<usize>,
    pub released: Option<usize>,
    pub boosted: Option<usize>,
    pub table_hash: String,
}

/// Converged assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentOutcome {
    /// Target id → `(lower drone id, higher drone id)`.
    pub pairs: BTreeMap<usize, (usize, usize)>,
    pub rounds: usize,
    pub trace: Vec<TraceRecord>,
    pub tables: Vec<TaskTable>,
}

impl AssignmentOutcome {
    /// Target assigned to `drone`, if any.
    pub fn target_of(&self, drone: usize) -> Option<usize> {
        self.pairs
            .iter()
            .find(|(_, &(i, g))| i == drone || g == drone)
            .map(|(&j, _)| j)
    }

    /// Write the trace as JSON Lines.
    pub fn write_trace<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for record in &self.trace {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn ground_truth_claims(tables: &[TaskTable]) -> Vec<Option<usize>> {
    tables
        .iter()
        .enumerate()
        .map(|(i, t)| t.claim_of(i))
        .collect()
}

/// Run auction + consensus rounds until every target has exactly two claimants
/// and all tables agree.
#[allow(clippy::needless_range_loop)] // `i` is also the drone id
pub fn run_assignment(input: &AssignmentInput, cfg: &AssignmentConfig) -> Result<AssignmentOutcome> {
    cfg.validate()?;
    let n = input.distances.len();
    let m = input.targets;
    if input.neighbors.len() != n {
        return Err(Error::Protocol(format!(
            "{} neighbour lists for {n} drones",
            input.neighbors.len()
        )));
    }
    for (i, list) in input.distances.iter().enumerate() {
        if let Some(&(j, _)) = list.iter().find(|(j, _)| *j >= m) {
            return Err(Error::Protocol(format!("drone {i} reports unknown target {j}")));
        }
    }

    let mut tables: Vec<TaskTable> = (0..n).map(|_| TaskTable::new(m, n)).collect();
    let mut trace = Vec::new();
    let cap = cfg.round_cap(n);

    for round in 1..=cap {
        for i in 0..n {
            if tables[i].column_sum(i) == 0 {
                let scores = ScoreVector::from_distances(&input.distances[i], &tables[i].extra_reward);
                tables[i] = auction_step(i, &tables[i], &scores)?;
            }
        }
        for i in 0..n {
            let scores = ScoreVector::from_distances(&input.distances[i], &tables[i].extra_reward);
            let received: Vec<&TaskTable> = input.neighbors[i]
                .iter()
                .filter(|&&g| g != i && g < n)
                .map(|&g| &tables[g])
                .collect();
            let outcome = consensus_step(i, &tables[i], &received, &scores, cfg.epsilon_tilde)?;
            tables[i] = outcome.table;
            trace.push(TraceRecord {
                round,
                drone: i,
                claimed_target: tables[i].claim_of(i),
                released: outcome.released.map(|(j, _)| j),
                boosted: outcome.released.map(|(_, h)| h),
                table_hash: tables[i].claims_hash(),
            });
        }

        let claims = ground_truth_claims(&tables);
        let balanced = (0..m).all(|j| claims.iter().filter(|c| **c == Some(j)).count() == 2);
        let agreed = tables.windows(2).all(|w| w[0].same_claims(&w[1]));
        if balanced && agreed {
            let mut pairs = BTreeMap::new();
            for j in 0..m {
                let owners: Vec<usize> = (0..n).filter(|&i| claims[i] == Some(j)).collect();
                pairs.insert(j, (owners[0], owners[1]));
            }
            return Ok(AssignmentOutcome {
                pairs,
                rounds: round,
                trace,
                tables,
            });
        }
    }

    let claims = ground_truth_claims(&tables);
    let unassigned = (0..m)
        .filter(|&j| claims.iter().filter(|c| **c == Some(j)).count() != 2)
        .collect();
    Err(Error::AssignmentFailure {
        rounds: cap,
        unassigned,
    })
}
