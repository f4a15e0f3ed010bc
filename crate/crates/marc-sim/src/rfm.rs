//! Refresh-management (RFM) accounting: per-bank rolling activate counters,
//! threshold-triggered RFM issuance, and adaptive threshold levels.
//!
//! Every ACT charges its bank's counter; REF and RFM pay it down. When the
//! counter surpasses the active threshold the bank owes an RFM. Adaptive
//! levels halve the threshold stage by stage, so escalating the level makes
//! the controller owe RFMs proportionally more often.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dram::{BankId, Command, TimeNs, TimingConfig};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RfmError {
    #[error("bank {bank} has no pending RFM obligation")]
    NotPending { bank: BankId },
}

/// Adaptive RFM threshold stage. `Base` is plain RFM; A/B/C successively
/// halve the activate budget between RFMs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArfmLevel {
    Base,
    A,
    B,
    C,
}

impl ArfmLevel {
    pub const ALL: [ArfmLevel; 4] = [ArfmLevel::Base, ArfmLevel::A, ArfmLevel::B, ArfmLevel::C];

    pub fn as_str(&self) -> &'static str {
        match self {
            ArfmLevel::Base => "base",
            ArfmLevel::A => "a",
            ArfmLevel::B => "b",
            ArfmLevel::C => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfmConfig {
    /// Activate budget between RFMs at the base level (RAAIMT).
    pub raaimt: u32,
    /// Per-level thresholds; default derivation halves the previous stage.
    pub raaimt_a: u32,
    pub raaimt_b: u32,
    pub raaimt_c: u32,
    /// The counter saturates at raaimt * raammt_mult (RAAMMT).
    pub raammt_mult: u32,
    /// Counter decrement applied per REF (RAA decrement).
    pub raadec_ref: u32,
    /// Counter decrement applied per RFM.
    pub raadec_rfm: u32,
    pub rfm_enabled: bool,
    /// When set, an obligation requires strictly exceeding the threshold
    /// instead of reaching it.
    pub strict_threshold: bool,
    /// When set, the REF/RFM decrements scale with the active level's
    /// threshold instead of staying fixed at 4x the base threshold.
    pub scale_raadec_with_level: bool,
}

impl RfmConfig {
    /// Derives the per-level thresholds and decrements from a base budget:
    /// each level halves the previous one (clamped to at least 1), the
    /// saturation cap is 8x and both decrements 4x the base.
    pub fn with_base(raaimt: u32) -> Self {
        assert!(raaimt >= 1, "raaimt must be at least 1");
        let half = |v: u32| (v / 2).max(1);
        let a = half(raaimt);
        let b = half(a);
        let c = half(b);
        RfmConfig {
            raaimt,
            raaimt_a: a,
            raaimt_b: b,
            raaimt_c: c,
            raammt_mult: 8,
            raadec_ref: raaimt.saturating_mul(4),
            raadec_rfm: raaimt.saturating_mul(4),
            rfm_enabled: true,
            strict_threshold: false,
            scale_raadec_with_level: false,
        }
    }

    pub fn raammt(&self) -> u32 {
        self.raaimt.saturating_mul(self.raammt_mult)
    }

    /// Minimum time to legally accumulate one base budget of activates.
    pub fn rfmth_ns(&self, timing: &TimingConfig) -> TimeNs {
        self.raaimt as u64 * timing.t_rc_min
    }

    pub fn effective_raaimt(&self, level: ArfmLevel) -> u32 {
        let v = match level {
            ArfmLevel::Base => self.raaimt,
            ArfmLevel::A => self.raaimt_a,
            ArfmLevel::B => self.raaimt_b,
            ArfmLevel::C => self.raaimt_c,
        };
        v.max(1)
    }

    fn scaled(&self, dec: u32, level: ArfmLevel) -> u32 {
        if self.scale_raadec_with_level && self.raaimt > 0 {
            let num = dec as u64 * self.effective_raaimt(level) as u64;
            (num / self.raaimt as u64).max(1) as u32
        } else {
            dec
        }
    }

    pub fn effective_raadec_ref(&self, level: ArfmLevel) -> u32 {
        self.scaled(self.raadec_ref, level)
    }

    pub fn effective_raadec_rfm(&self, level: ArfmLevel) -> u32 {
        self.scaled(self.raadec_rfm, level)
    }
}

impl Default for RfmConfig {
    fn default() -> Self {
        RfmConfig::with_base(248)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct BankRfm {
    raa_cnt: u32,
    pending: bool,
}

/// Rolling accounting state across banks plus the active adaptive level.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RfmState {
    banks: BTreeMap<BankId, BankRfm>,
    active_level: ArfmLevel,
}

impl Default for ArfmLevel {
    fn default() -> Self {
        ArfmLevel::Base
    }
}

impl RfmState {
    pub fn new() -> Self {
        RfmState { banks: BTreeMap::new(), active_level: ArfmLevel::Base }
    }

    pub fn active_level(&self) -> ArfmLevel {
        self.active_level
    }

    pub fn raa_cnt(&self, bank: BankId) -> u32 {
        self.banks.get(&bank).map_or(0, |b| b.raa_cnt)
    }

    pub fn is_pending(&self, bank: BankId) -> bool {
        self.banks.get(&bank).map_or(false, |b| b.pending)
    }

    /// Banks currently owing an RFM, in ascending id order.
    pub fn pending_banks(&self) -> Vec<BankId> {
        self.banks.iter().filter(|(_, b)| b.pending).map(|(&id, _)| id).collect()
    }

    fn recompute(bank: &mut BankRfm, config: &RfmConfig, level: ArfmLevel) {
        let threshold = config.effective_raaimt(level);
        bank.pending = if config.strict_threshold {
            bank.raa_cnt > threshold
        } else {
            bank.raa_cnt >= threshold
        };
    }

    /// Charges one activate to the bank. The counter saturates at RAAMMT.
    pub fn on_act(&mut self, config: &RfmConfig, bank: BankId) {
        let level = self.active_level;
        let entry = self.banks.entry(bank).or_default();
        entry.raa_cnt = entry.raa_cnt.saturating_add(1).min(config.raammt());
        Self::recompute(entry, config, level);
    }

    /// Applies the REF decrement to one bank.
    pub fn on_ref(&mut self, config: &RfmConfig, bank: BankId) {
        let level = self.active_level;
        let dec = config.effective_raadec_ref(level);
        let entry = self.banks.entry(bank).or_default();
        entry.raa_cnt = entry.raa_cnt.saturating_sub(dec);
        Self::recompute(entry, config, level);
    }

    /// Applies the REF decrement to every tracked bank (all-bank refresh).
    pub fn on_ref_all_banks(&mut self, config: &RfmConfig) {
        let level = self.active_level;
        let dec = config.effective_raadec_ref(level);
        for entry in self.banks.values_mut() {
            entry.raa_cnt = entry.raa_cnt.saturating_sub(dec);
            Self::recompute(entry, config, level);
        }
    }

    /// Pays down the counter for an RFM that arrived from outside the
    /// accounting loop (for example pre-scheduled in a trace file).
    pub fn on_external_rfm(&mut self, config: &RfmConfig, bank: BankId) {
        let level = self.active_level;
        let dec = config.effective_raadec_rfm(level);
        let entry = self.banks.entry(bank).or_default();
        entry.raa_cnt = entry.raa_cnt.saturating_sub(dec);
        Self::recompute(entry, config, level);
    }

    /// Issues the owed RFM for a pending bank, paying down its counter.
    pub fn issue_rfm(
        &mut self,
        config: &RfmConfig,
        bank: BankId,
        now: TimeNs,
    ) -> Result<Command, RfmError> {
        if !self.is_pending(bank) {
            return Err(RfmError::NotPending { bank });
        }
        self.on_external_rfm(config, bank);
        Ok(Command::rfm(now, bank))
    }

    /// Switches the adaptive level; obligations are re-evaluated immediately
    /// against the new threshold.
    pub fn set_arfm_level(&mut self, config: &RfmConfig, level: ArfmLevel) {
        self.active_level = level;
        for entry in self.banks.values_mut() {
            Self::recompute(entry, config, level);
        }
    }
}
