//! The command-stream engine: replays a workload trace against the device
//! model, interleaving scheduled refreshes, refresh-management accounting,
//! the attack detector and the configured mitigation.
//!
//! Event order inside one run:
//! 1. scheduled REFs merge with the input stream, refresh-class commands
//!    first on timestamp ties;
//! 2. before each event the detector catches up on elapsed windows and any
//!    verdict change moves the adaptive-RFM level;
//! 3. the event itself updates accounting (ACTs charge RAA counters and
//!    exposure, REFs/RFMs pay RAA down);
//! 4. banks over their RFM budget get an RFM issued at the event boundary,
//!    one per bank per event.
//!
//! Cure slots: the DRAM side acts on every nth REF and on every RFM, the
//! controller side only on RFMs. Each slot cures one aggressor's neighbors.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::detector::{Detector, DetectorConfig, DetectorError, DetectorReport};
use crate::dram::{
    schedule_refresh, BankId, Command, CommandKind, CommandTrace, DramError, RowId, TimeNs,
    TimingConfig,
};
use crate::metrics::{CommandCounts, ExposureLedger};
use crate::mitigation::{
    victim_rows, AttachSide, CureQueue, MitigationConfig, MitigationEngine, MitigationError,
};
use crate::rfm::{RfmConfig, RfmState};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Dram(#[from] DramError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Mitigation(#[from] MitigationError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub timing: TimingConfig,
    pub rfm: RfmConfig,
    pub detector: DetectorConfig,
    pub mitigation: MitigationConfig,
    /// Runs the attack detector and lets its verdict drive the RFM level.
    pub marc_enabled: bool,
    /// Keep per-cure events in the report (costs memory on long runs).
    pub record_cures: bool,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            timing: TimingConfig::default(),
            rfm: RfmConfig::default(),
            detector: DetectorConfig::default(),
            mitigation: MitigationConfig::default(),
            marc_enabled: true,
            record_cures: false,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Same mitigation scheme without the detector: no verdicts and no RFM
    /// issuance, so cures come only from the scheme's own slots. This is
    /// the vanilla-defense comparison point for detector-driven gains.
    pub fn vanilla_like(&self) -> SimConfig {
        SimConfig {
            rfm: RfmConfig { rfm_enabled: false, ..self.rfm },
            marc_enabled: false,
            ..*self
        }
    }

    /// Same device model with every defense stripped: no detector, no RFM
    /// issuance, no mitigation policy. Baseline for exposure ratios.
    pub fn undefended_like(&self) -> SimConfig {
        SimConfig {
            timing: self.timing,
            rfm: RfmConfig { rfm_enabled: false, ..self.rfm },
            detector: self.detector,
            mitigation: MitigationConfig {
                policy: crate::mitigation::MitigationPolicy::None,
                ..self.mitigation
            },
            marc_enabled: false,
            record_cures: false,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CureEvent {
    pub time: TimeNs,
    pub bank: BankId,
    pub aggressor: RowId,
    pub victims: Vec<RowId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub duration: TimeNs,
    pub counts: CommandCounts,
    pub max_exposure: u64,
    pub max_row: Option<(BankId, RowId)>,
    pub final_arfm_level: crate::rfm::ArfmLevel,
    pub detector: Option<DetectorReport>,
    pub cure_events: Vec<CureEvent>,
}

impl SimReport {
    pub fn recognition_rate(&self) -> f64 {
        self.detector.as_ref().map_or(0.0, |d| d.recognition_rate)
    }
}

struct Engine<'a> {
    config: &'a SimConfig,
    detector: Option<Detector>,
    mitigation: MitigationEngine,
    rfm: RfmState,
    ledger: ExposureLedger,
    queue: CureQueue,
    counts: CommandCounts,
    cure_events: Vec<CureEvent>,
    ref_counter: u64,
}

impl<'a> Engine<'a> {
    fn new(config: &'a SimConfig) -> Result<Self, SimError> {
        config.timing.validate()?;
        let detector = if config.marc_enabled {
            Some(Detector::new(config.timing, config.detector)?)
        } else {
            None
        };
        Ok(Engine {
            config,
            detector,
            mitigation: MitigationEngine::new(&config.mitigation, &config.timing, config.seed)?,
            rfm: RfmState::new(),
            ledger: ExposureLedger::new(config.timing.t_refw),
            queue: CureQueue::new(),
            counts: CommandCounts::default(),
            cure_events: Vec::new(),
            ref_counter: 0,
        })
    }

    fn cure(&mut self, time: TimeNs, bank: BankId, aggressor: RowId) {
        let victims = victim_rows(
            aggressor,
            self.config.mitigation.blast_radius,
            self.config.mitigation.max_row,
        );
        for &victim in &victims {
            self.ledger.record_cure(time, bank, victim);
        }
        self.counts.cures += victims.len() as u64;
        if self.config.record_cures {
            self.cure_events.push(CureEvent { time, bank, aggressor, victims });
        }
    }

    /// One cure opportunity: the policy may nominate directly (sampling
    /// policies), otherwise the oldest queued aggressor is served.
    fn cure_slot(&mut self, time: TimeNs) {
        let aggressor = self.mitigation.pick_at_slot(time).or_else(|| self.queue.pop());
        if let Some((bank, row)) = aggressor {
            self.cure(time, bank, row);
        }
    }

    fn sync_arfm_level(&mut self, time: TimeNs) {
        let Some(detector) = self.detector.as_mut() else { return };
        detector.advance_to(time);
        let level = detector.arfm_level();
        if level != self.rfm.active_level() {
            self.rfm.set_arfm_level(&self.config.rfm, level);
        }
    }

    fn issue_pending_rfms(&mut self, time: TimeNs) {
        if !self.config.rfm.rfm_enabled {
            return;
        }
        for bank in self.rfm.pending_banks() {
            self.rfm
                .issue_rfm(&self.config.rfm, bank, time)
                .expect("bank reported pending");
            self.counts.rfms += 1;
            self.cure_slot(time);
        }
    }

    fn on_act(&mut self, cmd: Command, trc: Option<TimeNs>) -> Result<(), SimError> {
        let row = cmd.row.expect("validated activate carries a row");
        self.counts.acts += 1;
        if let Some(detector) = self.detector.as_mut() {
            detector.observe_act(cmd.time, trc)?;
        }
        if self.config.rfm.rfm_enabled {
            self.rfm.on_act(&self.config.rfm, cmd.bank);
        }
        self.ledger.record_act(cmd.time, cmd.bank, row);
        if let Some((bank, aggressor)) = self.mitigation.on_act(cmd.time, cmd.bank, row) {
            if self.config.mitigation.immediate_cure {
                self.cure(cmd.time, bank, aggressor);
            } else {
                self.queue.enqueue(bank, aggressor);
            }
        }
        Ok(())
    }

    fn on_ref(&mut self, cmd: Command) {
        self.counts.refs += 1;
        self.ref_counter += 1;
        if self.config.rfm.rfm_enabled {
            if self.config.timing.per_bank_ref {
                self.rfm.on_ref(&self.config.rfm, cmd.bank);
            } else {
                self.rfm.on_ref_all_banks(&self.config.rfm);
            }
        }
        let nrr_slot = self.ref_counter % u64::from(self.config.timing.nrr_per_refresh) == 0;
        if nrr_slot && self.config.mitigation.attach == AttachSide::DramSide {
            self.cure_slot(cmd.time);
        }
    }

    /// RFM supplied by the input trace rather than issued by the engine.
    fn on_external_rfm(&mut self, cmd: Command) {
        self.counts.rfms += 1;
        if self.config.rfm.rfm_enabled {
            self.rfm.on_external_rfm(&self.config.rfm, cmd.bank);
        }
        self.cure_slot(cmd.time);
    }
}

/// Replays a workload trace. The trace is validated on the fly: timestamps
/// must be non-decreasing and same-bank activates at least t_rc_min apart.
pub fn run_trace(trace: &CommandTrace, config: &SimConfig) -> Result<SimReport, SimError> {
    let mut engine = Engine::new(config)?;
    let refreshes = schedule_refresh(&config.timing, trace.duration);

    let mut input = trace.commands.iter().copied().enumerate().peekable();
    let mut sched = refreshes.into_iter().peekable();
    let mut last_input_time: TimeNs = 0;
    let mut last_act: BTreeMap<BankId, TimeNs> = BTreeMap::new();

    loop {
        // Scheduled commands are all REFs, so on a timestamp tie they go
        // first, matching refresh-before-activate ordering.
        let take_sched = match (sched.peek(), input.peek()) {
            (None, None) => break,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(s), Some((_, i))) => s.time <= i.time,
        };
        if take_sched {
            let cmd = sched.next().unwrap();
            engine.sync_arfm_level(cmd.time);
            engine.on_ref(cmd);
            engine.issue_pending_rfms(cmd.time);
            continue;
        }
        let (index, cmd) = input.next().unwrap();
        if cmd.time < last_input_time {
            return Err(DramError::UnorderedTrace { index }.into());
        }
        last_input_time = cmd.time;
        engine.sync_arfm_level(cmd.time);
        match cmd.kind {
            CommandKind::Act => {
                if cmd.row.is_none() {
                    return Err(DramError::ActMissingRow { index }.into());
                }
                let trc = match last_act.insert(cmd.bank, cmd.time) {
                    Some(prev) => {
                        let gap = cmd.time - prev;
                        if gap < config.timing.t_rc_min {
                            return Err(DramError::TimingViolation { index, gap_ns: gap }.into());
                        }
                        Some(gap)
                    }
                    None => None,
                };
                engine.on_act(cmd, trc)?;
            }
            CommandKind::Ref => engine.on_ref(cmd),
            CommandKind::Rfm => engine.on_external_rfm(cmd),
        }
        engine.issue_pending_rfms(cmd.time);
    }

    engine.sync_arfm_level(trace.duration);
    let detector = engine.detector.map(|mut d| d.finish(trace.duration));
    Ok(SimReport {
        duration: trace.duration,
        counts: engine.counts,
        max_exposure: engine.ledger.max_exposure(),
        max_row: engine.ledger.max_row(),
        final_arfm_level: engine.rfm.active_level(),
        detector,
        cure_events: engine.cure_events,
    })
}
