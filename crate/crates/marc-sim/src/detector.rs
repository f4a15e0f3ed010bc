//! Attack detector operating on activate-to-activate cycle times.
//!
//! The detector splits time into refresh-interval windows. Within each
//! window it counts short activate cycles (a density signal) and runs a
//! three-phase pipeline over the short-cycle labels (a structure signal):
//!
//! 1. Point: latch the first label and flag immediate repeats.
//! 2. Capture: record a candidate pattern of `pattern_len` labels, flagging
//!    repeats that stall the capture.
//! 3. Monitor: replay the captured pattern cyclically against the incoming
//!    labels. Matches keep a loop indicator alive; mismatches are checked
//!    against a small eviction history so revisited labels still count as
//!    duplication, and a run of unexplained mismatches abandons the pattern.
//!
//! A window is attack-positive when the short count reaches the density
//! threshold and the pipeline saw duplication or looping. Consecutive
//! positive windows escalate the verdict through three levels, which feed
//! the adaptive-RFM machinery; two clean windows wind the escalation back.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::dram::{CommandKind, CommandTrace, TimeNs, TimingConfig};
use crate::rfm::ArfmLevel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DetectorError {
    #[error("short-cycle window buffer full (capacity {capacity})")]
    WindowFull { capacity: usize },
    #[error("short-cycle threshold {s_trc_th} exceeds window buffer capacity {capacity}")]
    ThresholdExceedsCapacity { s_trc_th: u32, capacity: usize },
    #[error("invalid detector configuration: {reason}")]
    InvalidConfig { reason: String },
}

/// Label for one activate-to-activate cycle time. The short range
/// [t_rc_min, short_trc_max] is split into four equal buckets; the top
/// bucket absorbs the boundary and any rounding slack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrcLabel {
    ShortA,
    ShortB,
    ShortC,
    ShortD,
    Long,
    BelowMin,
}

impl TrcLabel {
    pub fn is_short(&self) -> bool {
        matches!(self, TrcLabel::ShortA | TrcLabel::ShortB | TrcLabel::ShortC | TrcLabel::ShortD)
    }
}

pub fn classify_trc(trc: TimeNs, timing: &TimingConfig) -> TrcLabel {
    if trc < timing.t_rc_min {
        return TrcLabel::BelowMin;
    }
    if trc > timing.short_trc_max {
        return TrcLabel::Long;
    }
    let width = ((timing.short_trc_max - timing.t_rc_min) / 4).max(1);
    match (trc - timing.t_rc_min) / width {
        0 => TrcLabel::ShortA,
        1 => TrcLabel::ShortB,
        2 => TrcLabel::ShortC,
        _ => TrcLabel::ShortD,
    }
}

/// Fixed-capacity store for the short-cycle labels of one window. Sized so
/// that a window packed with minimum-cycle activates exactly fits.
#[derive(Debug, Clone)]
pub struct ShortTrcBuffer {
    labels: Vec<TrcLabel>,
    capacity: usize,
}

impl ShortTrcBuffer {
    pub fn new(capacity: usize) -> Self {
        ShortTrcBuffer { labels: Vec::with_capacity(capacity), capacity }
    }

    /// Buffer capacity implied by the timing: the number of minimum-length
    /// activate cycles that fit in one refresh interval.
    pub fn capacity_for(timing: &TimingConfig) -> usize {
        (timing.t_refi / timing.t_rc_min) as usize
    }

    pub fn push(&mut self, label: TrcLabel) -> Result<(), DetectorError> {
        if self.labels.len() == self.capacity {
            return Err(DetectorError::WindowFull { capacity: self.capacity });
        }
        self.labels.push(label);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn labels(&self) -> &[TrcLabel] {
        &self.labels
    }

    pub fn clear(&mut self) {
        self.labels.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorConfig {
    /// Short-cycle count a window must reach to be attack-positive.
    pub s_trc_th: u32,
    /// Length of the captured pattern replayed by the monitor phase.
    pub pattern_len: usize,
    /// Unexplained monitor mismatches tolerated before the pipeline resets.
    pub eviction_threshold: u32,
    /// Consecutive clean windows that wind the escalation counter back to 0.
    pub clean_window_reset: u32,
    /// Attack windows required for the first escalation level.
    pub verdict_base: u32,
    /// Additional attack windows per further escalation level.
    pub verdict_step: u32,
    /// Raises the first escalation by one window (slower, more certain).
    pub strict_verdict: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            s_trc_th: 130,
            pattern_len: 3,
            eviction_threshold: 2,
            clean_window_reset: 2,
            verdict_base: 2,
            verdict_step: 4,
            strict_verdict: false,
        }
    }
}

impl DetectorConfig {
    pub fn verdict_for(&self, attack_windows: u32) -> Verdict {
        let base = self.verdict_base + u32::from(self.strict_verdict);
        let step = self.verdict_step;
        if attack_windows < base {
            Verdict::Inactive
        } else if attack_windows < base + step {
            Verdict::LevelA
        } else if attack_windows < base + 2 * step {
            Verdict::LevelB
        } else {
            Verdict::LevelC
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verdict {
    Inactive,
    LevelA,
    LevelB,
    LevelC,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Inactive => "inactive",
            Verdict::LevelA => "level-a",
            Verdict::LevelB => "level-b",
            Verdict::LevelC => "level-c",
        }
    }

    pub fn to_arfm_level(self) -> ArfmLevel {
        match self {
            Verdict::Inactive => ArfmLevel::Base,
            Verdict::LevelA => ArfmLevel::A,
            Verdict::LevelB => ArfmLevel::B,
            Verdict::LevelC => ArfmLevel::C,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Point,
    Capture,
    Monitor,
}

#[derive(Debug, Clone)]
struct Pipeline {
    phase: Phase,
    point: Option<TrcLabel>,
    capture: Vec<TrcLabel>,
    monitor_idx: usize,
    evicted: VecDeque<TrcLabel>,
    evicted_cap: usize,
    eviction_count: u32,
    point_cmp: bool,
    capture_cmp: bool,
    eviction_flag: bool,
    loop_live: bool,
}

impl Pipeline {
    fn new(pattern_len: usize) -> Self {
        Pipeline {
            phase: Phase::Point,
            point: None,
            capture: Vec::with_capacity(pattern_len),
            monitor_idx: 0,
            evicted: VecDeque::new(),
            evicted_cap: pattern_len.saturating_sub(2).max(1),
            eviction_count: 0,
            point_cmp: false,
            capture_cmp: false,
            eviction_flag: false,
            loop_live: false,
        }
    }

    fn any_cmp_flag(&self) -> bool {
        self.point_cmp || self.capture_cmp || self.eviction_flag
    }

    fn reset(&mut self) {
        self.phase = Phase::Point;
        self.point = None;
        self.capture.clear();
        self.monitor_idx = 0;
        self.evicted.clear();
        self.eviction_count = 0;
        self.point_cmp = false;
        self.capture_cmp = false;
        self.eviction_flag = false;
        self.loop_live = false;
    }

    fn enter_monitor(&mut self) {
        self.phase = Phase::Monitor;
        self.monitor_idx = 0;
        self.loop_live = true;
    }

    fn step(&mut self, label: TrcLabel, pattern_len: usize, eviction_threshold: u32) {
        match self.phase {
            Phase::Point => match self.point {
                None => self.point = Some(label),
                Some(p) if p == label => self.point_cmp = true,
                Some(_) => {
                    self.capture.clear();
                    self.capture.push(label);
                    self.phase = Phase::Capture;
                    if self.capture.len() == pattern_len {
                        self.enter_monitor();
                    }
                }
            },
            Phase::Capture => {
                if self.capture.len() + 1 < pattern_len && self.capture.last() == Some(&label) {
                    self.capture_cmp = true;
                } else {
                    self.capture.push(label);
                }
                if self.capture.len() == pattern_len {
                    self.enter_monitor();
                }
            }
            Phase::Monitor => {
                if self.capture[self.monitor_idx] == label {
                    self.monitor_idx = (self.monitor_idx + 1) % pattern_len;
                    self.loop_live = true;
                } else {
                    self.loop_live = false;
                    if self.evicted.contains(&label) {
                        self.eviction_flag = true;
                    } else {
                        self.eviction_count += 1;
                        if self.evicted.len() == self.evicted_cap {
                            self.evicted.pop_front();
                        }
                        self.evicted.push_back(label);
                        if self.eviction_count > eviction_threshold && !self.any_cmp_flag() {
                            self.reset();
                        }
                    }
                }
            }
        }
    }
}

/// Outcome of one finished refresh-interval window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowRecord {
    pub index: u64,
    pub short_count: u32,
    pub below_min: u32,
    pub dup: bool,
    pub looping: bool,
    pub attack: bool,
    /// Verdict that governed the system while this window elapsed, i.e. the
    /// verdict standing at the end of the previous window.
    pub in_force: Verdict,
    /// Verdict standing after this window was inspected.
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorReport {
    pub duration: TimeNs,
    pub final_verdict: Verdict,
    pub attack_window_count: u64,
    /// Duration-weighted fraction of the trace spent under a non-inactive
    /// in-force verdict.
    pub recognition_rate: f64,
    pub windows: Vec<WindowRecord>,
}

#[derive(Debug, Clone)]
pub struct Detector {
    timing: TimingConfig,
    config: DetectorConfig,
    buffer: ShortTrcBuffer,
    pipeline: Pipeline,
    dup_seen: bool,
    loop_seen: bool,
    below_min: u32,
    next_window: u64,
    attack_windows: u32,
    clean_windows: u32,
    verdict: Verdict,
    records: Vec<WindowRecord>,
}

impl Detector {
    pub fn new(timing: TimingConfig, config: DetectorConfig) -> Result<Self, DetectorError> {
        timing
            .validate()
            .map_err(|e| DetectorError::InvalidConfig { reason: e.to_string() })?;
        if config.pattern_len == 0 {
            return Err(DetectorError::InvalidConfig {
                reason: "pattern_len must be at least 1".into(),
            });
        }
        if config.clean_window_reset == 0 {
            return Err(DetectorError::InvalidConfig {
                reason: "clean_window_reset must be at least 1".into(),
            });
        }
        let capacity = ShortTrcBuffer::capacity_for(&timing);
        if config.s_trc_th as usize > capacity {
            return Err(DetectorError::ThresholdExceedsCapacity {
                s_trc_th: config.s_trc_th,
                capacity,
            });
        }
        Ok(Detector {
            timing,
            config,
            buffer: ShortTrcBuffer::new(capacity),
            pipeline: Pipeline::new(config.pattern_len),
            dup_seen: false,
            loop_seen: false,
            below_min: 0,
            next_window: 0,
            attack_windows: 0,
            clean_windows: 0,
            verdict: Verdict::Inactive,
            records: Vec::new(),
        })
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    pub fn arfm_level(&self) -> ArfmLevel {
        self.verdict.to_arfm_level()
    }

    pub fn windows(&self) -> &[WindowRecord] {
        &self.records
    }

    /// Finalizes every window that ends at or before `time`, so the verdict
    /// reflects all fully elapsed windows. Call before handling an event.
    pub fn advance_to(&mut self, time: TimeNs) {
        let target = time / self.timing.t_refi;
        while self.next_window < target {
            self.finalize_window();
        }
    }

    /// Feeds one activate. `trc` is the gap since the previous activate on
    /// the same bank, absent for a bank's first activate.
    pub fn observe_act(&mut self, time: TimeNs, trc: Option<TimeNs>) -> Result<(), DetectorError> {
        self.advance_to(time);
        let Some(trc) = trc else { return Ok(()) };
        let label = classify_trc(trc, &self.timing);
        match label {
            TrcLabel::Long => {}
            TrcLabel::BelowMin => self.below_min += 1,
            short => {
                self.buffer.push(short)?;
                self.pipeline.step(short, self.config.pattern_len, self.config.eviction_threshold);
                self.dup_seen |= self.pipeline.any_cmp_flag();
                self.loop_seen |= self.pipeline.loop_live;
            }
        }
        Ok(())
    }

    /// Resets detector state. A partial reset clears only the pattern
    /// pipeline and is suppressed while any duplication flag stands; a full
    /// reset also clears the verdict, escalation counters and window buffer.
    pub fn reset(&mut self, full: bool) {
        if !full && self.pipeline.any_cmp_flag() {
            return;
        }
        self.pipeline.reset();
        if full {
            self.buffer.clear();
            self.dup_seen = false;
            self.loop_seen = false;
            self.below_min = 0;
            self.attack_windows = 0;
            self.clean_windows = 0;
            self.verdict = Verdict::Inactive;
        }
    }

    fn finalize_window(&mut self) {
        self.dup_seen |= self.pipeline.any_cmp_flag();
        self.loop_seen |= self.pipeline.loop_live;
        let short_count = self.buffer.len() as u32;
        let attack =
            short_count >= self.config.s_trc_th && (self.dup_seen || self.loop_seen);
        let in_force = self.verdict;
        if attack {
            self.attack_windows = self.attack_windows.saturating_add(1);
            self.clean_windows = 0;
        } else {
            self.clean_windows = self.clean_windows.saturating_add(1);
            if self.clean_windows >= self.config.clean_window_reset {
                self.attack_windows = 0;
            }
        }
        self.verdict = self.config.verdict_for(self.attack_windows);
        self.records.push(WindowRecord {
            index: self.next_window,
            short_count,
            below_min: self.below_min,
            dup: self.dup_seen,
            looping: self.loop_seen,
            attack,
            in_force,
            verdict: self.verdict,
        });
        self.buffer.clear();
        self.dup_seen = false;
        self.loop_seen = false;
        self.below_min = 0;
        self.next_window += 1;
    }

    /// Finalizes all windows overlapping [0, duration), including a trailing
    /// partial one, and summarizes the run.
    pub fn finish(&mut self, duration: TimeNs) -> DetectorReport {
        let total = duration.div_ceil(self.timing.t_refi);
        while self.next_window < total {
            self.finalize_window();
        }
        let t_refi = self.timing.t_refi;
        let mut recognized: u64 = 0;
        for w in &self.records {
            let start = w.index * t_refi;
            let end = ((w.index + 1) * t_refi).min(duration);
            if w.in_force != Verdict::Inactive && end > start {
                recognized += end - start;
            }
        }
        let recognition_rate =
            if duration == 0 { 0.0 } else { recognized as f64 / duration as f64 };
        DetectorReport {
            duration,
            final_verdict: self.verdict,
            attack_window_count: self.records.iter().filter(|w| w.attack).count() as u64,
            recognition_rate,
            windows: self.records.clone(),
        }
    }
}

/// Runs the detector alone over a trace: computes per-bank activate cycle
/// times and feeds them through, without any refresh-management model.
pub fn detect_trace(
    trace: &CommandTrace,
    timing: &TimingConfig,
    config: &DetectorConfig,
) -> Result<DetectorReport, DetectorError> {
    let mut detector = Detector::new(*timing, *config)?;
    let mut last_act: BTreeMap<u32, TimeNs> = BTreeMap::new();
    for cmd in &trace.commands {
        if cmd.kind == CommandKind::Act {
            let trc = last_act.get(&cmd.bank).map(|&t| cmd.time - t);
            detector.observe_act(cmd.time, trc)?;
            last_act.insert(cmd.bank, cmd.time);
        } else {
            detector.advance_to(cmd.time);
        }
    }
    Ok(detector.finish(trace.duration))
}
