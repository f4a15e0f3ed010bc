//! DRAM timing parameters, the command/trace data model, trace validation,
//! per-bank activate-gap extraction, and refresh scheduling.
//!
//! All times are nanoseconds held in `u64`. A trace is a time-ordered list of
//! ACT/REF/RFM commands; the activate-to-activate gap on a bank (the row-cycle
//! time actually used by the issuer) is the signal everything downstream keys
//! on.

use thiserror::Error;

pub type TimeNs = u64;
pub type BankId = u32;
pub type RowId = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DramError {
    #[error("trace timestamps decrease at command {index}")]
    UnorderedTrace { index: usize },
    #[error("activate gap {gap_ns} ns below t_rc_min at command {index}")]
    TimingViolation { index: usize, gap_ns: u64 },
    #[error("activate at command {index} lacks a row")]
    ActMissingRow { index: usize },
    #[error("invalid timing config: {reason}")]
    InvalidTiming { reason: String },
}

/// Device timing parameters. Defaults model an LPDDR5-class part with a
/// 15.6 us refresh interval, a 128 ms refresh window and a 60 ns minimum
/// row cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingConfig {
    /// Minimum row-cycle time (tRAS + tRP) in ns.
    pub t_rc_min: u64,
    /// Average refresh command interval in ns.
    pub t_refi: u64,
    /// Refresh window in ns; every row is refreshed once per window.
    pub t_refw: u64,
    /// Refresh execution time in ns; activates colliding with a refresh can
    /// be suppressed by the simulation harness.
    pub t_rfc: u64,
    /// Optional split of t_rc_min; when both are set they must sum to it.
    pub t_ras: Option<u64>,
    pub t_rp: Option<u64>,
    /// A same-bank refresh slot doubles as a neighbor-row-refresh opportunity
    /// once every this many REFs.
    pub nrr_per_refresh: u32,
    /// Largest activate gap still considered "short" (attack-plausible), ns.
    pub short_trc_max: u64,
    /// When set, a REF applies only to its own bank instead of all banks.
    pub per_bank_ref: bool,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            t_rc_min: 60,
            t_refi: 15_600,
            t_refw: 128_000_000,
            t_rfc: 280,
            t_ras: None,
            t_rp: None,
            nrr_per_refresh: 10,
            short_trc_max: 100,
            per_bank_ref: false,
        }
    }
}

impl TimingConfig {
    /// Preset with the long 512 ms refresh window; other fields default.
    pub fn long_refresh_window() -> Self {
        TimingConfig { t_refw: 512_000_000, ..TimingConfig::default() }
    }

    pub fn validate(&self) -> Result<(), DramError> {
        let fail = |reason: &str| {
            Err(DramError::InvalidTiming { reason: reason.to_string() })
        };
        if self.t_rc_min == 0 {
            return fail("t_rc_min must be positive");
        }
        if self.t_refi <= self.t_rc_min {
            return fail("t_refi must exceed t_rc_min");
        }
        // t_refw must sit within one interval of an integer multiple of
        // t_refi (k >= 1): rules out windows shorter than a refresh interval.
        let k = (self.t_refw + self.t_refi / 2) / self.t_refi;
        let k = k.max(1);
        let nearest = k * self.t_refi;
        if nearest.abs_diff(self.t_refw) >= self.t_refi {
            return fail("t_refw must be within one t_refi of a multiple of t_refi");
        }
        if let (Some(ras), Some(rp)) = (self.t_ras, self.t_rp) {
            if ras + rp != self.t_rc_min {
                return fail("t_ras + t_rp must equal t_rc_min");
            }
        }
        if self.short_trc_max < self.t_rc_min {
            return fail("short_trc_max must be at least t_rc_min");
        }
        if self.nrr_per_refresh == 0 {
            return fail("nrr_per_refresh must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommandKind {
    Act,
    Ref,
    Rfm,
}

impl CommandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandKind::Act => "ACT",
            CommandKind::Ref => "REF",
            CommandKind::Rfm => "RFM",
        }
    }

    /// Ordering rank for commands sharing a timestamp: refresh-class commands
    /// sort ahead of activates so a boundary REF lands before the next ACT.
    fn tie_rank(&self) -> u8 {
        match self {
            CommandKind::Ref => 0,
            CommandKind::Rfm => 1,
            CommandKind::Act => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Command {
    pub time: TimeNs,
    pub kind: CommandKind,
    pub bank: BankId,
    /// Present exactly for ACT commands.
    pub row: Option<RowId>,
}

impl Command {
    pub fn act(time: TimeNs, bank: BankId, row: RowId) -> Self {
        Command { time, kind: CommandKind::Act, bank, row: Some(row) }
    }

    pub fn refresh(time: TimeNs, bank: BankId) -> Self {
        Command { time, kind: CommandKind::Ref, bank, row: None }
    }

    pub fn rfm(time: TimeNs, bank: BankId) -> Self {
        Command { time, kind: CommandKind::Rfm, bank, row: None }
    }
}

/// A time-ordered command stream plus its nominal duration. The duration may
/// exceed the last command time (idle tail) and is what refresh scheduling
/// and window accounting are measured against.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandTrace {
    pub commands: Vec<Command>,
    pub duration: TimeNs,
}

impl CommandTrace {
    pub fn new(commands: Vec<Command>, duration: TimeNs) -> Self {
        CommandTrace { commands, duration }
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }
}

/// One observed activate-to-activate gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrcEntry {
    /// Index of the later ACT in the trace.
    pub act_index: usize,
    pub bank: BankId,
    pub trc_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrcSeries {
    pub entries: Vec<TrcEntry>,
}

/// Checks timestamp ordering and per-bank activate spacing. Returns the trace
/// unchanged on success, so validation is idempotent.
pub fn validate_trace(
    trace: CommandTrace,
    timing: &TimingConfig,
) -> Result<CommandTrace, DramError> {
    timing.validate()?;
    let mut last_time: TimeNs = 0;
    let mut last_act: std::collections::BTreeMap<BankId, TimeNs> =
        std::collections::BTreeMap::new();
    for (index, cmd) in trace.commands.iter().enumerate() {
        if cmd.time < last_time {
            return Err(DramError::UnorderedTrace { index });
        }
        last_time = cmd.time;
        if cmd.kind == CommandKind::Act {
            if cmd.row.is_none() {
                return Err(DramError::ActMissingRow { index });
            }
            if let Some(&prev) = last_act.get(&cmd.bank) {
                let gap = cmd.time - prev;
                if gap < timing.t_rc_min {
                    return Err(DramError::TimingViolation { index, gap_ns: gap });
                }
            }
            last_act.insert(cmd.bank, cmd.time);
        }
    }
    Ok(trace)
}

/// Per-bank activate gaps in trace order. The first ACT on each bank has no
/// predecessor and yields no entry.
pub fn compute_trc_series(trace: &CommandTrace) -> TrcSeries {
    let mut last_act: std::collections::BTreeMap<BankId, TimeNs> =
        std::collections::BTreeMap::new();
    let mut entries = Vec::new();
    for (act_index, cmd) in trace.commands.iter().enumerate() {
        if cmd.kind != CommandKind::Act {
            continue;
        }
        if let Some(&prev) = last_act.get(&cmd.bank) {
            entries.push(TrcEntry { act_index, bank: cmd.bank, trc_ns: cmd.time - prev });
        }
        last_act.insert(cmd.bank, cmd.time);
    }
    TrcSeries { entries }
}

/// All-bank REF commands at every multiple of t_refi up to and including the
/// duration. An all-bank REF is modeled as a single event on bank 0.
pub fn schedule_refresh(timing: &TimingConfig, duration: TimeNs) -> Vec<Command> {
    let n = duration / timing.t_refi;
    (1..=n).map(|k| Command::refresh(k * timing.t_refi, 0)).collect()
}

/// Merges an activate stream with a refresh stream into one ordered trace.
/// At equal timestamps refresh-class commands come first.
pub fn merge_streams(acts: &CommandTrace, refreshes: &[Command]) -> CommandTrace {
    let mut merged = Vec::with_capacity(acts.commands.len() + refreshes.len());
    let mut a = acts.commands.iter().peekable();
    let mut r = refreshes.iter().peekable();
    loop {
        let take_ref = match (a.peek(), r.peek()) {
            (None, None) => break,
            (None, Some(_)) => true,
            (Some(_), None) => false,
            (Some(ac), Some(rc)) => (rc.time, rc.kind.tie_rank()) <= (ac.time, ac.kind.tie_rank()),
        };
        if take_ref {
            merged.push(*r.next().unwrap());
        } else {
            merged.push(*a.next().unwrap());
        }
    }
    let last_ref = refreshes.last().map_or(0, |c| c.time);
    CommandTrace::new(merged, acts.duration.max(last_ref))
}
