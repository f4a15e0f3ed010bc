//! Mitigation policies: how aggressor rows get picked for curing.
//!
//! A cure refreshes the neighbors of an aggressor row. Policies differ in
//! how they nominate aggressors (tracking tables, coin flips, or sampling
//! the recent activate history) and in where they attach: inside the DRAM
//! device, which can act on refresh slots it owns, or in the memory
//! controller, which only gets to act when an RFM gives it a slot.

use std::collections::{BTreeMap, VecDeque};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dram::{BankId, RowId, TimeNs, TimingConfig};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MitigationError {
    #[error("probability {value} outside [0, 1]")]
    InvalidProbability { value: String },
    #[error("invalid mitigation configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("unknown mitigation policy '{0}'")]
    UnknownPolicy(String),
    #[error("unknown attach side '{0}'")]
    UnknownAttachSide(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MitigationPolicy {
    None,
    /// Sample the recent activate history at each cure slot.
    Probabilistic,
    /// Misra-Gries frequency table with a cure threshold.
    CounterBased,
    /// Coin flip per activate.
    Para,
}

impl MitigationPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            MitigationPolicy::None => "none",
            MitigationPolicy::Probabilistic => "probabilistic",
            MitigationPolicy::CounterBased => "counter",
            MitigationPolicy::Para => "para",
        }
    }
}

impl FromStr for MitigationPolicy {
    type Err = MitigationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(MitigationPolicy::None),
            "probabilistic" | "prob" => Ok(MitigationPolicy::Probabilistic),
            "counter" | "counter-based" => Ok(MitigationPolicy::CounterBased),
            "para" => Ok(MitigationPolicy::Para),
            other => Err(MitigationError::UnknownPolicy(other.to_string())),
        }
    }
}

/// Where the mitigation runs, which determines which cure slots it sees:
/// the DRAM side owns periodic refresh slots and also uses RFM slots, the
/// controller side acts only on RFM slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttachSide {
    DramSide,
    McSide,
}

impl AttachSide {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttachSide::DramSide => "dram-side",
            AttachSide::McSide => "mc-side",
        }
    }
}

impl FromStr for AttachSide {
    type Err = MitigationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dram-side" | "dram" => Ok(AttachSide::DramSide),
            "mc-side" | "mc" => Ok(AttachSide::McSide),
            other => Err(MitigationError::UnknownAttachSide(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MitigationConfig {
    pub policy: MitigationPolicy,
    pub attach: AttachSide,
    /// Per-activate nomination probability for the PARA policy.
    pub para_p: f64,
    /// Tracking-table capacity for the counter policy.
    pub table_size: usize,
    /// Activate count at which the counter policy nominates a row.
    pub logic_threshold: u64,
    /// Clear a nominated row's count so it must re-earn the threshold.
    pub subtract_on_threshold: bool,
    /// Cure rows within this distance of the aggressor.
    pub blast_radius: u64,
    /// Highest row id in the bank, if cures should clamp to it.
    pub max_row: Option<RowId>,
    /// Probabilistic policy sampling window, in refresh intervals.
    pub sample_window_refi: u64,
    /// PARA variant that cures inline with the activate instead of waiting
    /// for a cure slot.
    pub immediate_cure: bool,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        MitigationConfig {
            policy: MitigationPolicy::None,
            attach: AttachSide::DramSide,
            para_p: 0.01,
            table_size: 214,
            logic_threshold: 1024,
            subtract_on_threshold: true,
            blast_radius: 1,
            max_row: None,
            sample_window_refi: 10,
            immediate_cure: false,
        }
    }
}

impl MitigationConfig {
    pub fn validate(&self) -> Result<(), MitigationError> {
        if !(0.0..=1.0).contains(&self.para_p) || self.para_p.is_nan() {
            return Err(MitigationError::InvalidProbability { value: self.para_p.to_string() });
        }
        if self.table_size == 0 {
            return Err(MitigationError::InvalidConfig {
                reason: "table_size must be at least 1".into(),
            });
        }
        if self.logic_threshold == 0 {
            return Err(MitigationError::InvalidConfig {
                reason: "logic_threshold must be at least 1".into(),
            });
        }
        if self.sample_window_refi == 0 {
            return Err(MitigationError::InvalidConfig {
                reason: "sample_window_refi must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Rows a cure of `aggressor` refreshes: everything within the blast
/// radius, clamped to the bank edges, in ascending order.
pub fn victim_rows(aggressor: RowId, blast_radius: u64, max_row: Option<RowId>) -> Vec<RowId> {
    let mut rows = Vec::new();
    for d in 1..=blast_radius {
        if let Some(below) = aggressor.checked_sub(d) {
            rows.push(below);
        }
        let above = aggressor + d;
        if max_row.map_or(true, |m| above <= m) {
            rows.push(above);
        }
    }
    rows.sort_unstable();
    rows
}

/// FIFO of nominated aggressors awaiting a cure slot. A row already in the
/// queue is not enqueued twice.
#[derive(Debug, Clone, Default)]
pub struct CureQueue {
    queue: VecDeque<(BankId, RowId)>,
}

impl CureQueue {
    pub fn new() -> Self {
        CureQueue::default()
    }

    /// Returns false when the aggressor was already queued.
    pub fn enqueue(&mut self, bank: BankId, row: RowId) -> bool {
        if self.queue.contains(&(bank, row)) {
            return false;
        }
        self.queue.push_back((bank, row));
        true
    }

    pub fn pop(&mut self) -> Option<(BankId, RowId)> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// Misra-Gries heavy-hitter table. Present rows get incremented, new rows
/// take a free slot, and when the table is full every count is decremented
/// instead, evicting rows that reach zero. The incoming row is dropped in
/// that case; it only enters once the table has room again.
#[derive(Debug, Clone)]
pub struct MisraGries {
    table: BTreeMap<(BankId, RowId), u64>,
    table_size: usize,
    threshold: u64,
    subtract_on_threshold: bool,
}

impl MisraGries {
    pub fn new(table_size: usize, threshold: u64, subtract_on_threshold: bool) -> Self {
        assert!(table_size >= 1 && threshold >= 1);
        MisraGries { table: BTreeMap::new(), table_size, threshold, subtract_on_threshold }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn count(&self, bank: BankId, row: RowId) -> Option<u64> {
        self.table.get(&(bank, row)).copied()
    }

    /// Feeds one activate; returns the row if it just hit the threshold.
    pub fn on_act(&mut self, bank: BankId, row: RowId) -> Option<(BankId, RowId)> {
        let key = (bank, row);
        if let Some(count) = self.table.get_mut(&key) {
            *count += 1;
            if *count == self.threshold {
                if self.subtract_on_threshold {
                    *count = 0;
                }
                return Some(key);
            }
            return None;
        }
        if self.table.len() < self.table_size {
            self.table.insert(key, 1);
            if self.threshold == 1 {
                if self.subtract_on_threshold {
                    self.table.insert(key, 0);
                }
                return Some(key);
            }
            return None;
        }
        self.table.retain(|_, count| {
            // Entries parked at zero by the threshold subtraction evict too.
            *count = count.saturating_sub(1);
            *count > 0
        });
        None
    }
}

/// Per-activate coin flip (PARA). One deterministic stream per run seed.
#[derive(Debug, Clone)]
pub struct ParaSampler {
    rng: ChaCha8Rng,
    p: f64,
}

impl ParaSampler {
    pub fn new(p: f64, seed: u64) -> Self {
        ParaSampler { rng: ChaCha8Rng::seed_from_u64(seed), p }
    }

    pub fn on_act(&mut self, bank: BankId, row: RowId) -> Option<(BankId, RowId)> {
        if self.p > 0.0 && self.rng.gen_bool(self.p) {
            Some((bank, row))
        } else {
            None
        }
    }
}

fn mix_seed(seed: u64, slot_time: TimeNs) -> u64 {
    seed ^ slot_time.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Picks the entry whose time is nearest the sampled instant; the earliest
/// entry wins ties.
fn nearest(
    candidates: impl Iterator<Item = (TimeNs, BankId, RowId)>,
    t_star: TimeNs,
) -> Option<(BankId, RowId)> {
    let mut best: Option<(BankId, RowId)> = None;
    let mut best_dist = TimeNs::MAX;
    for (t, bank, row) in candidates {
        let dist = t.abs_diff(t_star);
        if dist < best_dist {
            best_dist = dist;
            best = Some((bank, row));
        }
    }
    best
}

/// Cure-slot sampler: remembers the recent activate history and, at each
/// cure slot, draws a uniform instant inside the lookback window and cures
/// the activate nearest to it. The draw is keyed on the slot time, so the
/// same slot always samples the same instant regardless of what other
/// slots exist in the run.
#[derive(Debug, Clone)]
pub struct ProbSampler {
    seed: u64,
    window_ns: TimeNs,
    history: VecDeque<(TimeNs, BankId, RowId)>,
}

impl ProbSampler {
    pub fn new(seed: u64, window_ns: TimeNs) -> Self {
        assert!(window_ns > 0);
        ProbSampler { seed, window_ns, history: VecDeque::new() }
    }

    fn prune(&mut self, now: TimeNs) {
        let lo = now.saturating_sub(self.window_ns);
        while self.history.front().map_or(false, |&(t, _, _)| t < lo) {
            self.history.pop_front();
        }
    }

    pub fn on_act(&mut self, time: TimeNs, bank: BankId, row: RowId) {
        self.history.push_back((time, bank, row));
        self.prune(time);
    }

    /// Samples at a cure slot. Only activates strictly before the slot are
    /// candidates.
    pub fn pick(&mut self, slot_time: TimeNs) -> Option<(BankId, RowId)> {
        self.prune(slot_time);
        let lo = slot_time.saturating_sub(self.window_ns);
        if lo >= slot_time {
            return None;
        }
        if !self.history.iter().any(|&(t, _, _)| t < slot_time) {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, slot_time));
        let t_star = rng.gen_range(lo..slot_time);
        nearest(self.history.iter().copied().filter(|&(t, _, _)| t < slot_time), t_star)
    }
}

/// One policy instance wired up for a run.
#[derive(Debug, Clone)]
pub enum MitigationEngine {
    None,
    Probabilistic(ProbSampler),
    CounterBased(MisraGries),
    Para(ParaSampler),
}

impl MitigationEngine {
    pub fn new(
        config: &MitigationConfig,
        timing: &TimingConfig,
        seed: u64,
    ) -> Result<Self, MitigationError> {
        config.validate()?;
        Ok(match config.policy {
            MitigationPolicy::None => MitigationEngine::None,
            MitigationPolicy::Probabilistic => MitigationEngine::Probabilistic(ProbSampler::new(
                seed,
                config.sample_window_refi * timing.t_refi,
            )),
            MitigationPolicy::CounterBased => MitigationEngine::CounterBased(MisraGries::new(
                config.table_size,
                config.logic_threshold,
                config.subtract_on_threshold,
            )),
            MitigationPolicy::Para => MitigationEngine::Para(ParaSampler::new(config.para_p, seed)),
        })
    }

    /// Observes one activate; returns a nominated aggressor, if any.
    pub fn on_act(&mut self, time: TimeNs, bank: BankId, row: RowId) -> Option<(BankId, RowId)> {
        match self {
            MitigationEngine::None => None,
            MitigationEngine::Probabilistic(sampler) => {
                sampler.on_act(time, bank, row);
                None
            }
            MitigationEngine::CounterBased(table) => table.on_act(bank, row),
            MitigationEngine::Para(sampler) => sampler.on_act(bank, row),
        }
    }

    /// Gives the policy a chance to nominate directly at a cure slot.
    pub fn pick_at_slot(&mut self, slot_time: TimeNs) -> Option<(BankId, RowId)> {
        match self {
            MitigationEngine::Probabilistic(sampler) => sampler.pick(slot_time),
            _ => None,
        }
    }
}
