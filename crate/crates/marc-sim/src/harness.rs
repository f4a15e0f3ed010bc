//! Experiment plumbing: textual run configuration, parameter sweeps with
//! CSV output, and the detector recognition benchmark.
//!
//! Run configuration is flat `section.key=value` text, one setting per
//! line, `#` comments allowed. Sections mirror the config structs:
//! `timing.*`, `rfm.*`, `detector.*`, `mitigation.*` and `run.*`. Setting
//! `rfm.raaimt` re-derives the per-level thresholds and decrements from the
//! new base, so it is applied before any other `rfm.*` key regardless of
//! where it appears in the file; explicit per-level overrides then win.

use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::detector::{detect_trace, DetectorError};
use crate::dram::{BankId, RowId, TimeNs};
use crate::metrics::MetricsError;
use crate::mitigation::{AttachSide, MitigationPolicy};
use crate::patterns::{gen_attack, gen_trc_combo, AttackConfig, AttackKind, ComboConfig, PatternError};
use crate::rfm::RfmConfig;
use crate::sim::{run_trace, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("unknown setting '{key}'")]
    UnknownKey { key: String },
    #[error("invalid value '{value}' for '{key}': {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { key: key.into(), value: value.into(), reason: reason.into() }
}

fn parse_as<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T, ConfigError> {
    value.trim().parse::<T>().map_err(|_| bad(key, value, format!("expected {what}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true/false")),
    }
}

fn parse_opt_u64(key: &str, value: &str) -> Result<Option<u64>, ConfigError> {
    if value.trim() == "none" {
        Ok(None)
    } else {
        parse_as::<u64>(key, value, "an integer or 'none'").map(Some)
    }
}

/// Applies one `section.key=value` setting to a run configuration.
pub fn apply_setting(config: &mut SimConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "timing.t_rc_min" => config.timing.t_rc_min = parse_as(key, value, "an integer")?,
        "timing.t_refi" => config.timing.t_refi = parse_as(key, value, "an integer")?,
        "timing.t_refw" => config.timing.t_refw = parse_as(key, value, "an integer")?,
        "timing.t_rfc" => config.timing.t_rfc = parse_as(key, value, "an integer")?,
        "timing.t_ras" => config.timing.t_ras = parse_opt_u64(key, value)?,
        "timing.t_rp" => config.timing.t_rp = parse_opt_u64(key, value)?,
        "timing.nrr_per_refresh" => {
            config.timing.nrr_per_refresh = parse_as(key, value, "an integer")?;
        }
        "timing.short_trc_max" => config.timing.short_trc_max = parse_as(key, value, "an integer")?,
        "timing.per_bank_ref" => config.timing.per_bank_ref = parse_bool(key, value)?,
        "rfm.raaimt" => {
            let base: u32 = parse_as(key, value, "an integer")?;
            if base == 0 {
                return Err(bad(key, value, "must be at least 1"));
            }
            config.rfm = RfmConfig {
                rfm_enabled: config.rfm.rfm_enabled,
                strict_threshold: config.rfm.strict_threshold,
                scale_raadec_with_level: config.rfm.scale_raadec_with_level,
                ..RfmConfig::with_base(base)
            };
        }
        "rfm.raaimt_a" => config.rfm.raaimt_a = parse_as(key, value, "an integer")?,
        "rfm.raaimt_b" => config.rfm.raaimt_b = parse_as(key, value, "an integer")?,
        "rfm.raaimt_c" => config.rfm.raaimt_c = parse_as(key, value, "an integer")?,
        "rfm.raammt_mult" => config.rfm.raammt_mult = parse_as(key, value, "an integer")?,
        "rfm.raadec_ref" => config.rfm.raadec_ref = parse_as(key, value, "an integer")?,
        "rfm.raadec_rfm" => config.rfm.raadec_rfm = parse_as(key, value, "an integer")?,
        "rfm.enabled" => config.rfm.rfm_enabled = parse_bool(key, value)?,
        "rfm.strict_threshold" => config.rfm.strict_threshold = parse_bool(key, value)?,
        "rfm.scale_raadec_with_level" => {
            config.rfm.scale_raadec_with_level = parse_bool(key, value)?;
        }
        "detector.s_trc_th" => config.detector.s_trc_th = parse_as(key, value, "an integer")?,
        "detector.pattern_len" => config.detector.pattern_len = parse_as(key, value, "an integer")?,
        "detector.eviction_threshold" => {
            config.detector.eviction_threshold = parse_as(key, value, "an integer")?;
        }
        "detector.clean_window_reset" => {
            config.detector.clean_window_reset = parse_as(key, value, "an integer")?;
        }
        "detector.verdict_base" => config.detector.verdict_base = parse_as(key, value, "an integer")?,
        "detector.verdict_step" => config.detector.verdict_step = parse_as(key, value, "an integer")?,
        "detector.strict_verdict" => config.detector.strict_verdict = parse_bool(key, value)?,
        "mitigation.policy" => {
            config.mitigation.policy = MitigationPolicy::from_str(value)
                .map_err(|e| bad(key, value, e.to_string()))?;
        }
        "mitigation.attach" => {
            config.mitigation.attach =
                AttachSide::from_str(value).map_err(|e| bad(key, value, e.to_string()))?;
        }
        "mitigation.para_p" => config.mitigation.para_p = parse_as(key, value, "a number")?,
        "mitigation.table_size" => config.mitigation.table_size = parse_as(key, value, "an integer")?,
        "mitigation.logic_threshold" => {
            config.mitigation.logic_threshold = parse_as(key, value, "an integer")?;
        }
        "mitigation.subtract_on_threshold" => {
            config.mitigation.subtract_on_threshold = parse_bool(key, value)?;
        }
        "mitigation.blast_radius" => {
            config.mitigation.blast_radius = parse_as(key, value, "an integer")?;
        }
        "mitigation.max_row" => config.mitigation.max_row = parse_opt_u64(key, value)?,
        "mitigation.sample_window_refi" => {
            config.mitigation.sample_window_refi = parse_as(key, value, "an integer")?;
        }
        "mitigation.immediate_cure" => config.mitigation.immediate_cure = parse_bool(key, value)?,
        "run.marc" => config.marc_enabled = parse_bool(key, value)?,
        "run.seed" => config.seed = parse_as(key, value, "an integer")?,
        "run.record_cures" => config.record_cures = parse_bool(key, value)?,
        _ => return Err(ConfigError::UnknownKey { key: key.into() }),
    }
    Ok(())
}

/// Applies settings with the `rfm.raaimt` re-derivation rule: the base
/// threshold is processed first so explicit overrides are never clobbered.
pub fn apply_settings<'a>(
    config: &mut SimConfig,
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<(), ConfigError> {
    let mut pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
    pairs.sort_by_key(|(key, _)| *key != "rfm.raaimt");
    for (key, value) in pairs {
        apply_setting(config, key, value)?;
    }
    Ok(())
}

/// Parses a whole configuration file on top of the defaults.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Malformed {
            line: line_no,
            message: "expected key=value".into(),
        })?;
        pairs.push((line_no, key.trim(), value.trim()));
    }
    pairs.sort_by_key(|(_, key, _)| *key != "rfm.raaimt");
    let mut config = SimConfig::default();
    for (line, key, value) in pairs {
        apply_setting(&mut config, key, value)
            .map_err(|e| ConfigError::Malformed { line, message: e.to_string() })?;
    }
    Ok(config)
}

/// Aggregated outcome of one sweep row: a parameter value crossed with a
/// seed list, for either the vanilla (`marc = false`) or detector-assisted
/// (`marc = true`) variant of the same scheme. The `mer_*` columns are
/// normalized to one shared baseline: the vanilla scheme's mean exposure
/// at the sweep's reference point, so vanilla at that point reads 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub sweep: &'static str,
    pub param: u64,
    pub seeds: usize,
    pub policy: MitigationPolicy,
    pub attach: AttachSide,
    pub marc: bool,
    pub acts: u64,
    pub refs: u64,
    pub rfms_mean: f64,
    pub cures_mean: f64,
    pub max_exposure_mean: f64,
    pub baseline_exposure: f64,
    pub mer_mean: f64,
    pub mer_min: f64,
    pub mer_max: f64,
}

pub const SWEEP_CSV_HEADER: &str = "sweep,param,seeds,policy,attach,marc,acts,refs,rfms_mean,\
cures_mean,max_exposure_mean,baseline_exposure,mer_mean,mer_min,mer_max";

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            p.sweep,
            p.param,
            p.seeds,
            p.policy.as_str(),
            p.attach.as_str(),
            p.marc,
            p.acts,
            p.refs,
            p.rfms_mean,
            p.cures_mean,
            p.max_exposure_mean,
            p.baseline_exposure,
            p.mer_mean,
            p.mer_min,
            p.mer_max,
        ));
    }
    out
}

pub const WINDOW_CSV_HEADER: &str =
    "window,short_count,below_min,dup,looping,attack,in_force,verdict";

/// Per-refresh-interval detection timeline.
pub fn windows_csv(report: &crate::detector::DetectorReport) -> String {
    let mut out = String::from(WINDOW_CSV_HEADER);
    out.push('\n');
    for w in &report.windows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            w.index,
            w.short_count,
            w.below_min,
            w.dup,
            w.looping,
            w.attack,
            w.in_force.as_str(),
            w.verdict.as_str(),
        ));
    }
    out
}

pub const CURE_CSV_HEADER: &str = "time,bank,aggressor,victims";

/// Victim-refresh log; victims of one cure are ';'-joined in the last column.
pub fn cures_csv(events: &[crate::sim::CureEvent]) -> String {
    let mut out = String::from(CURE_CSV_HEADER);
    out.push('\n');
    for e in events {
        let victims =
            e.victims.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
        out.push_str(&format!("{},{},{},{}\n", e.time, e.bank, e.aggressor, victims));
    }
    out
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Runs one configuration over every seed and folds the reports into a row.
fn run_variant(
    sweep: &'static str,
    param: u64,
    trace: &crate::dram::CommandTrace,
    config: &SimConfig,
    seeds: &[u64],
    normalizer: f64,
) -> Result<SweepPoint, HarnessError> {
    let reports: Vec<_> = seeds
        .par_iter()
        .map(|&seed| run_trace(trace, &SimConfig { seed, ..*config }))
        .collect::<Result<_, SimError>>()?;
    let exposures: Vec<f64> = reports.iter().map(|r| r.max_exposure as f64).collect();
    let me_mean = mean(&exposures);
    let me_min = exposures.iter().copied().fold(f64::INFINITY, f64::min);
    let me_max = exposures.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepPoint {
        sweep,
        param,
        seeds: seeds.len(),
        policy: config.mitigation.policy,
        attach: config.mitigation.attach,
        marc: config.marc_enabled,
        acts: reports.first().map_or(0, |r| r.counts.acts),
        refs: reports.first().map_or(0, |r| r.counts.refs),
        rfms_mean: mean(&reports.iter().map(|r| r.counts.rfms as f64).collect::<Vec<_>>()),
        cures_mean: mean(&reports.iter().map(|r| r.counts.cures as f64).collect::<Vec<_>>()),
        max_exposure_mean: me_mean,
        baseline_exposure: normalizer,
        mer_mean: me_mean / normalizer,
        mer_min: me_min / normalizer,
        mer_max: me_max / normalizer,
    })
}

/// Mean vanilla exposure at the sweep's reference attack, the common MER
/// denominator for every row.
fn baseline_normalizer(
    attack: &AttackConfig,
    vanilla: &SimConfig,
    seeds: &[u64],
) -> Result<f64, HarnessError> {
    let trace = gen_attack(attack)?;
    let exposures: Vec<f64> = seeds
        .par_iter()
        .map(|&seed| run_trace(&trace, &SimConfig { seed, ..*vanilla }).map(|r| r.max_exposure as f64))
        .collect::<Result<_, SimError>>()?;
    let normalizer = mean(&exposures);
    if normalizer == 0.0 {
        return Err(MetricsError::ZeroBaseline.into());
    }
    Ok(normalizer)
}

fn run_pair(
    sweep: &'static str,
    param: u64,
    attack: &AttackConfig,
    defended: &SimConfig,
    seeds: &[u64],
    normalizer: f64,
) -> Result<[SweepPoint; 2], HarnessError> {
    let trace = gen_attack(attack)?;
    let vanilla = run_variant(sweep, param, &trace, &defended.vanilla_like(), seeds, normalizer)?;
    let assisted = run_variant(sweep, param, &trace, defended, seeds, normalizer)?;
    Ok([vanilla, assisted])
}

/// Sweep over the attack's activate cadence at a fixed aggressor count.
/// Each cadence yields a vanilla row and a detector-assisted row.
#[derive(Debug, Clone)]
pub struct TrcSweep {
    pub trcs: Vec<TimeNs>,
    pub sides: u64,
    /// Cadence whose vanilla exposure anchors the MER normalization.
    pub baseline_trc: TimeNs,
    pub duration: TimeNs,
    pub bank: BankId,
    pub row_base: RowId,
    pub seeds: Vec<u64>,
    pub defended: SimConfig,
}

impl TrcSweep {
    fn attack(&self, trc: TimeNs) -> AttackConfig {
        AttackConfig {
            kind: AttackKind::MultiSided { sides: self.sides },
            trc,
            duration: self.duration,
            bank: self.bank,
            row_base: self.row_base,
        }
    }
}

pub fn sweep_trc(sweep: &TrcSweep) -> Result<Vec<SweepPoint>, HarnessError> {
    let vanilla = sweep.defended.vanilla_like();
    let normalizer =
        baseline_normalizer(&sweep.attack(sweep.baseline_trc), &vanilla, &sweep.seeds)?;
    let pairs: Vec<[SweepPoint; 2]> = sweep
        .trcs
        .par_iter()
        .map(|&trc| {
            run_pair("trc", trc, &sweep.attack(trc), &sweep.defended, &sweep.seeds, normalizer)
        })
        .collect::<Result<_, _>>()?;
    Ok(pairs.into_iter().flatten().collect())
}

/// Sweep over the number of aggressor rows at a fixed cadence.
#[derive(Debug, Clone)]
pub struct AggrSweep {
    pub sides_list: Vec<u64>,
    pub trc: TimeNs,
    /// Aggressor count whose vanilla exposure anchors the MER normalization.
    pub baseline_sides: u64,
    pub duration: TimeNs,
    pub bank: BankId,
    pub row_base: RowId,
    pub seeds: Vec<u64>,
    pub defended: SimConfig,
}

impl AggrSweep {
    fn attack(&self, sides: u64) -> AttackConfig {
        AttackConfig {
            kind: AttackKind::MultiSided { sides },
            trc: self.trc,
            duration: self.duration,
            bank: self.bank,
            row_base: self.row_base,
        }
    }
}

pub fn sweep_aggr(sweep: &AggrSweep) -> Result<Vec<SweepPoint>, HarnessError> {
    let vanilla = sweep.defended.vanilla_like();
    let normalizer =
        baseline_normalizer(&sweep.attack(sweep.baseline_sides), &vanilla, &sweep.seeds)?;
    let pairs: Vec<[SweepPoint; 2]> = sweep
        .sides_list
        .par_iter()
        .map(|&sides| {
            run_pair("aggr", sides, &sweep.attack(sides), &sweep.defended, &sweep.seeds, normalizer)
        })
        .collect::<Result<_, _>>()?;
    Ok(pairs.into_iter().flatten().collect())
}

/// Detector recognition benchmark over cycle-time combos: for each distinct
/// count, many random combos are generated and run through the detector
/// alone.
#[derive(Debug, Clone)]
pub struct BenchDetect {
    pub n_values: Vec<usize>,
    pub combos_per_n: usize,
    pub pool_lo: TimeNs,
    pub pool_hi: TimeNs,
    pub total_acts: usize,
    pub seed: u64,
    pub timing: crate::dram::TimingConfig,
    pub detector: crate::detector::DetectorConfig,
}

impl Default for BenchDetect {
    fn default() -> Self {
        BenchDetect {
            n_values: (1..=20).chain([50, 70, 90]).collect(),
            combos_per_n: 100,
            pool_lo: 60,
            pool_hi: 100,
            total_acts: 60_000,
            seed: 0,
            timing: crate::dram::TimingConfig::default(),
            detector: crate::detector::DetectorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchDetectRow {
    pub n_distinct: usize,
    pub combos: usize,
    pub total_acts: usize,
    pub mean_recognition: f64,
    pub min_recognition: f64,
    pub mean_attack_window_fraction: f64,
}

pub const BENCH_CSV_HEADER: &str =
    "n_distinct,combos,total_acts,mean_recognition,min_recognition,mean_attack_window_fraction";

pub fn bench_csv(rows: &[BenchDetectRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6}\n",
            r.n_distinct,
            r.combos,
            r.total_acts,
            r.mean_recognition,
            r.min_recognition,
            r.mean_attack_window_fraction,
        ));
    }
    out
}

/// Deterministic per-combo seed: stable across runs and independent of the
/// combo execution order.
fn combo_seed(base: u64, n: usize, index: usize) -> u64 {
    base.wrapping_add((n as u64).wrapping_mul(1_000_003))
        .wrapping_add(index as u64)
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn bench_detect(bench: &BenchDetect) -> Result<Vec<BenchDetectRow>, HarnessError> {
    bench
        .n_values
        .iter()
        .map(|&n| {
            let stats: Vec<(f64, f64)> = (0..bench.combos_per_n)
                .into_par_iter()
                .map(|i| {
                    let combo = ComboConfig {
                        n_distinct: n,
                        pool_lo: bench.pool_lo,
                        pool_hi: bench.pool_hi,
                        total_acts: bench.total_acts,
                        seed: combo_seed(bench.seed, n, i),
                        ..ComboConfig::default()
                    };
                    let trace = gen_trc_combo(&combo)?;
                    let report = detect_trace(&trace, &bench.timing, &bench.detector)?;
                    let attack_fraction = if report.windows.is_empty() {
                        0.0
                    } else {
                        report.attack_window_count as f64 / report.windows.len() as f64
                    };
                    Ok((report.recognition_rate, attack_fraction))
                })
                .collect::<Result<_, HarnessError>>()?;
            let recognitions: Vec<f64> = stats.iter().map(|s| s.0).collect();
            let fractions: Vec<f64> = stats.iter().map(|s| s.1).collect();
            Ok(BenchDetectRow {
                n_distinct: n,
                combos: bench.combos_per_n,
                total_acts: bench.total_acts,
                mean_recognition: mean(&recognitions),
                min_recognition: recognitions.iter().copied().fold(f64::INFINITY, f64::min),
                mean_attack_window_fraction: mean(&fractions),
            })
        })
        .collect()
}
