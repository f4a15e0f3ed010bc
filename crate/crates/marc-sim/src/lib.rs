//! Trace-driven DRAM command-stream simulator for studying row-hammer
//! attack detection and refresh-management (RFM) based defenses.
//!
//! The pieces compose in one direction: [`patterns`] builds or parses
//! command traces, [`sim::run_trace`] replays one against a device model
//! whose knobs live in [`sim::SimConfig`] (timing, RFM accounting, the
//! windowed attack detector, and a mitigation scheme on either side of the
//! memory bus), and the report carries command counts, worst-case row
//! exposure and the detector timeline. [`detector::detect_trace`] is the
//! detector alone for when nothing else matters, and [`harness`] adds the
//! experiment layer: flat-text run configuration, MER sweeps and the
//! recognition benchmark, each with a stable CSV schema.
//!
//! The examples are the guided tour:
//!
//! * `generate_patterns` - every trace kind plus the text format round trip
//! * `rfm_accounting` - RAA counters, budgets and adaptive levels by hand
//! * `detect_attack` - hammering vs. benign traffic through the detector
//! * `dram_side_defense` - in-DRAM schemes with and without the detector
//! * `mc_side_defense` - controller-side schemes starved of RFM slots
//! * `trc_sweep` - the cadence sweep and its CSV output at desk scale
//! * `run_from_config` - an experiment captured as `section.key=value` text
//!
//! The `marc-sim` binary wraps the same calls into `gen`, `run`,
//! `sweep-trc`, `sweep-aggr`, `detect` and `bench-detect` subcommands.

pub mod detector;
pub mod dram;
pub mod harness;
pub mod metrics;
pub mod mitigation;
pub mod patterns;
pub mod rfm;
pub mod sim;

pub use detector::{detect_trace, Detector, DetectorConfig, DetectorReport, Verdict};
pub use dram::{Command, CommandKind, CommandTrace, TimingConfig};
pub use harness::{apply_setting, bench_detect, parse_config, sweep_aggr, sweep_trc};
pub use mitigation::{AttachSide, MitigationConfig, MitigationPolicy};
pub use patterns::{gen_attack, gen_normal, gen_trc_combo, AttackConfig, ComboConfig, NormalConfig};
pub use rfm::{ArfmLevel, RfmConfig};
pub use sim::{run_trace, SimConfig, SimReport};
