//! Workload generators and the on-disk trace format.
//!
//! Trace files are line-oriented text: `<time_ns> <ACT|REF|RFM> <bank>
//! [<row>]`, with `#` comment lines. The special comment `# duration <ns>`
//! pins the trace length; without it the last command time is used.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dram::{BankId, Command, CommandKind, CommandTrace, RowId, TimeNs, TimingConfig};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("invalid pattern configuration: {reason}")]
    InvalidConfig { reason: String },
}

fn invalid(reason: impl Into<String>) -> PatternError {
    PatternError::InvalidConfig { reason: reason.into() }
}

/// Row selection for a hammering workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    /// Hammer one row.
    Single,
    /// Alternate the two rows flanking the victim at `row_base`.
    Double,
    /// Rotate over `sides` consecutive rows starting at `row_base`.
    MultiSided { sides: u64 },
}

/// Fixed-cadence hammering: one activate every `trc` nanoseconds until the
/// duration runs out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub trc: TimeNs,
    pub duration: TimeNs,
    pub bank: BankId,
    pub row_base: RowId,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            kind: AttackKind::Single,
            trc: 60,
            duration: 128_000_000,
            bank: 0,
            row_base: 100,
        }
    }
}

pub fn gen_attack(config: &AttackConfig) -> Result<CommandTrace, PatternError> {
    if config.trc == 0 {
        return Err(invalid("attack trc must be positive"));
    }
    if config.duration == 0 {
        return Err(invalid("attack duration must be positive"));
    }
    match config.kind {
        AttackKind::Double if config.row_base == 0 => {
            return Err(invalid("double-sided attack needs row_base >= 1"));
        }
        AttackKind::MultiSided { sides: 0 } => {
            return Err(invalid("multi-sided attack needs at least one side"));
        }
        _ => {}
    }
    let n_acts = config.duration / config.trc;
    let mut commands = Vec::with_capacity(n_acts as usize);
    for k in 0..n_acts {
        let row = match config.kind {
            AttackKind::Single => config.row_base,
            AttackKind::Double => {
                if k % 2 == 0 {
                    config.row_base - 1
                } else {
                    config.row_base + 1
                }
            }
            AttackKind::MultiSided { sides } => config.row_base + (k % sides),
        };
        commands.push(Command::act(k * config.trc, config.bank, row));
    }
    Ok(CommandTrace::new(commands, config.duration))
}

/// Workload whose activate gaps cycle through a small set of distinct cycle
/// times drawn from an inclusive pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComboConfig {
    pub n_distinct: usize,
    pub pool_lo: TimeNs,
    pub pool_hi: TimeNs,
    pub total_acts: usize,
    /// Activates rotate over rows 0..rows.
    pub rows: u64,
    pub bank: BankId,
    pub seed: u64,
}

impl Default for ComboConfig {
    fn default() -> Self {
        ComboConfig {
            n_distinct: 4,
            pool_lo: 60,
            pool_hi: 100,
            total_acts: 60_000,
            rows: 8,
            bank: 0,
            seed: 0,
        }
    }
}

impl ComboConfig {
    fn validate(&self) -> Result<(), PatternError> {
        if self.n_distinct == 0 {
            return Err(invalid("combo needs at least one cycle time"));
        }
        if self.pool_lo == 0 || self.pool_lo > self.pool_hi {
            return Err(invalid("combo pool must satisfy 1 <= lo <= hi"));
        }
        if self.total_acts == 0 {
            return Err(invalid("combo needs at least one activate"));
        }
        if self.rows == 0 {
            return Err(invalid("combo needs at least one row"));
        }
        Ok(())
    }
}

/// The cycle times a combo config will cycle through, drawn with
/// replacement so repeats are possible.
pub fn combo_trc_values(config: &ComboConfig) -> Result<Vec<TimeNs>, PatternError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok((0..config.n_distinct).map(|_| rng.gen_range(config.pool_lo..=config.pool_hi)).collect())
}

pub fn gen_trc_combo(config: &ComboConfig) -> Result<CommandTrace, PatternError> {
    let values = combo_trc_values(config)?;
    let mut commands = Vec::with_capacity(config.total_acts);
    let mut t: TimeNs = 0;
    for i in 0..config.total_acts {
        commands.push(Command::act(t, config.bank, (i as u64) % config.rows));
        t += values[i % values.len()];
    }
    Ok(CommandTrace::new(commands, t))
}

/// Benign mixed workload: each gap is short with probability
/// `short_fraction` (uniform over the short range of the timing config),
/// otherwise uniform over a long range. Rows are drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalConfig {
    pub duration: TimeNs,
    pub short_fraction: f64,
    pub long_lo: TimeNs,
    pub long_hi: TimeNs,
    /// Rows are drawn from 0..rows.
    pub rows: u64,
    pub bank: BankId,
    pub seed: u64,
}

impl Default for NormalConfig {
    fn default() -> Self {
        NormalConfig {
            duration: 128_000_000,
            short_fraction: 0.3,
            long_lo: 200,
            long_hi: 5_000,
            rows: 1_024,
            bank: 0,
            seed: 0,
        }
    }
}

pub fn gen_normal(
    config: &NormalConfig,
    timing: &TimingConfig,
) -> Result<CommandTrace, PatternError> {
    if config.duration == 0 {
        return Err(invalid("normal workload duration must be positive"));
    }
    if !(0.0..=1.0).contains(&config.short_fraction) || config.short_fraction.is_nan() {
        return Err(invalid("short_fraction must lie in [0, 1]"));
    }
    if config.long_lo > config.long_hi {
        return Err(invalid("long range must satisfy lo <= hi"));
    }
    if config.long_lo < timing.t_rc_min {
        return Err(invalid("long range must not undercut t_rc_min"));
    }
    if config.rows == 0 {
        return Err(invalid("normal workload needs at least one row"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut commands = Vec::new();
    let mut t: TimeNs = 0;
    while t < config.duration {
        commands.push(Command::act(t, config.bank, rng.gen_range(0..config.rows)));
        let gap = if config.short_fraction > 0.0 && rng.gen_bool(config.short_fraction) {
            rng.gen_range(timing.t_rc_min..=timing.short_trc_max)
        } else {
            rng.gen_range(config.long_lo..=config.long_hi)
        };
        t += gap;
    }
    Ok(CommandTrace::new(commands, config.duration))
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {reason}: '{content}'")]
pub struct ParseError {
    pub line: usize,
    pub content: String,
    pub reason: String,
}

fn parse_err(line: usize, content: &str, reason: impl Into<String>) -> ParseError {
    ParseError { line, content: content.to_string(), reason: reason.into() }
}

/// Parses the text trace format. Command ordering is not checked here;
/// validation against a timing config is a separate step.
pub fn parse_trace(input: &str) -> Result<CommandTrace, ParseError> {
    let mut commands = Vec::new();
    let mut duration_directive: Option<TimeNs> = None;
    for (idx, raw) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(value) = comment.strip_prefix("duration") {
                let value = value.trim();
                let ns = value
                    .parse::<TimeNs>()
                    .map_err(|_| parse_err(line_no, raw, "malformed duration directive"))?;
                duration_directive = Some(ns);
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let time = fields
            .next()
            .ok_or_else(|| parse_err(line_no, raw, "missing time field"))?
            .parse::<TimeNs>()
            .map_err(|_| parse_err(line_no, raw, "malformed time"))?;
        let kind = match fields.next() {
            Some("ACT") => CommandKind::Act,
            Some("REF") => CommandKind::Ref,
            Some("RFM") => CommandKind::Rfm,
            Some(other) => return Err(parse_err(line_no, raw, format!("unknown command '{other}'"))),
            None => return Err(parse_err(line_no, raw, "missing command field")),
        };
        let bank = fields
            .next()
            .ok_or_else(|| parse_err(line_no, raw, "missing bank field"))?
            .parse::<BankId>()
            .map_err(|_| parse_err(line_no, raw, "malformed bank"))?;
        let row = match (kind, fields.next()) {
            (CommandKind::Act, Some(field)) => Some(
                field
                    .parse::<RowId>()
                    .map_err(|_| parse_err(line_no, raw, "malformed row"))?,
            ),
            (CommandKind::Act, None) => {
                return Err(parse_err(line_no, raw, "activate requires a row"));
            }
            (_, Some(_)) => {
                return Err(parse_err(line_no, raw, "refresh commands take no row"));
            }
            (_, None) => None,
        };
        if fields.next().is_some() {
            return Err(parse_err(line_no, raw, "unexpected trailing field"));
        }
        commands.push(Command { time, kind, bank, row });
    }
    let duration =
        duration_directive.unwrap_or_else(|| commands.last().map_or(0, |c| c.time));
    Ok(CommandTrace::new(commands, duration))
}

/// Renders a trace in the text format, pinning the duration up front.
pub fn format_trace(trace: &CommandTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# duration {}", trace.duration);
    for cmd in &trace.commands {
        match cmd.row {
            Some(row) => {
                let _ = writeln!(out, "{} {} {} {}", cmd.time, cmd.kind.as_str(), cmd.bank, row);
            }
            None => {
                let _ = writeln!(out, "{} {} {}", cmd.time, cmd.kind.as_str(), cmd.bank);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::compute_trc_series;
    use proptest::prelude::*;

    #[test]
    fn single_attack_hits_one_row_on_cadence() {
        let config = AttackConfig { trc: 100, duration: 1_000, ..AttackConfig::default() };
        let trace = gen_attack(&config).unwrap();
        assert_eq!(trace.len(), 10);
        assert_eq!(trace.duration, 1_000);
        for (k, cmd) in trace.commands.iter().enumerate() {
            assert_eq!(cmd.time, k as u64 * 100);
            assert_eq!(cmd.row, Some(100));
        }
    }

    #[test]
    fn double_attack_flanks_the_victim() {
        let config = AttackConfig {
            kind: AttackKind::Double,
            trc: 60,
            duration: 300,
            ..AttackConfig::default()
        };
        let trace = gen_attack(&config).unwrap();
        let rows: Vec<_> = trace.commands.iter().map(|c| c.row.unwrap()).collect();
        assert_eq!(rows, vec![99, 101, 99, 101, 99]);
    }

    #[test]
    fn multi_sided_attack_rotates_rows() {
        let config = AttackConfig {
            kind: AttackKind::MultiSided { sides: 3 },
            trc: 60,
            duration: 420,
            ..AttackConfig::default()
        };
        let trace = gen_attack(&config).unwrap();
        let rows: Vec<_> = trace.commands.iter().map(|c| c.row.unwrap()).collect();
        assert_eq!(rows, vec![100, 101, 102, 100, 101, 102, 100]);
    }

    #[test]
    fn attack_rejects_degenerate_configs() {
        let bad = AttackConfig { trc: 0, ..AttackConfig::default() };
        assert!(gen_attack(&bad).is_err());
        let bad = AttackConfig { kind: AttackKind::Double, row_base: 0, ..AttackConfig::default() };
        assert!(gen_attack(&bad).is_err());
        let bad =
            AttackConfig { kind: AttackKind::MultiSided { sides: 0 }, ..AttackConfig::default() };
        assert!(gen_attack(&bad).is_err());
    }

    #[test]
    fn combo_gaps_cycle_through_drawn_values() {
        let config = ComboConfig { n_distinct: 4, total_acts: 13, seed: 7, ..Default::default() };
        let values = combo_trc_values(&config).unwrap();
        assert_eq!(values.len(), 4);
        assert!(values.iter().all(|v| (60..=100).contains(v)));
        let trace = gen_trc_combo(&config).unwrap();
        assert_eq!(trace.len(), 13);
        let series = compute_trc_series(&trace);
        let gaps: Vec<_> = series.entries.iter().map(|e| e.trc_ns).collect();
        let expected: Vec<_> = (0..12).map(|i| values[i % 4]).collect();
        assert_eq!(gaps, expected);
        // Duration covers one gap past the final activate.
        let total: TimeNs = (0..13).map(|i| values[i % 4]).sum();
        assert_eq!(trace.duration, total);
    }

    #[test]
    fn combo_rows_rotate() {
        let config = ComboConfig { total_acts: 10, rows: 3, ..Default::default() };
        let trace = gen_trc_combo(&config).unwrap();
        let rows: Vec<_> = trace.commands.iter().map(|c| c.row.unwrap()).collect();
        assert_eq!(rows, vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn combo_is_seed_deterministic() {
        let config = ComboConfig { seed: 11, ..Default::default() };
        assert_eq!(gen_trc_combo(&config).unwrap(), gen_trc_combo(&config).unwrap());
        let other = ComboConfig { seed: 12, ..Default::default() };
        assert_ne!(gen_trc_combo(&config).unwrap(), gen_trc_combo(&other).unwrap());
    }

    #[test]
    fn normal_workload_respects_ranges() {
        let timing = TimingConfig::default();
        let config = NormalConfig { duration: 2_000_000, seed: 3, ..Default::default() };
        let trace = gen_normal(&config, &timing).unwrap();
        assert!(trace.len() > 500);
        let series = compute_trc_series(&trace);
        let mut shorts = 0usize;
        for entry in &series.entries {
            let gap = entry.trc_ns;
            let in_short = (60..=100).contains(&gap);
            let in_long = (200..=5_000).contains(&gap);
            assert!(in_short || in_long, "gap {gap} outside both ranges");
            shorts += usize::from(in_short);
        }
        let fraction = shorts as f64 / series.entries.len() as f64;
        assert!((0.2..=0.4).contains(&fraction), "short fraction {fraction}");
        for cmd in &trace.commands {
            assert!(cmd.row.unwrap() < 1_024);
        }
    }

    #[test]
    fn normal_rejects_long_range_below_min_cycle() {
        let timing = TimingConfig::default();
        let config = NormalConfig { long_lo: 50, ..Default::default() };
        assert!(gen_normal(&config, &timing).is_err());
    }

    #[test]
    fn trace_text_round_trips() {
        let trace = CommandTrace::new(
            vec![
                Command::act(0, 0, 100),
                Command::refresh(15_600, 0),
                Command::rfm(15_880, 1),
                Command::act(16_000, 1, 42),
            ],
            20_000,
        );
        let text = format_trace(&trace);
        assert!(text.starts_with("# duration 20000\n"));
        assert_eq!(parse_trace(&text).unwrap(), trace);
    }

    #[test]
    fn parse_without_directive_uses_last_command_time() {
        let trace = parse_trace("0 ACT 0 5\n120 ACT 0 6\n").unwrap();
        assert_eq!(trace.duration, 120);
        assert_eq!(trace.len(), 2);
        assert_eq!(parse_trace("").unwrap().duration, 0);
    }

    #[test]
    fn parse_skips_comments_and_blank_lines() {
        let text = "# a trace\n\n  # another comment\n0 ACT 0 1\n";
        assert_eq!(parse_trace(text).unwrap().len(), 1);
    }

    #[test]
    fn parse_reports_line_and_reason() {
        let err = parse_trace("0 ACT 0 1\nnonsense\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.content, "nonsense");
        assert_eq!(err.reason, "malformed time");

        let err = parse_trace("12 POP 0 1\n").unwrap_err();
        assert!(err.reason.contains("unknown command 'POP'"));

        let err = parse_trace("12 ACT 0\n").unwrap_err();
        assert_eq!(err.reason, "activate requires a row");

        let err = parse_trace("12 REF 0 9\n").unwrap_err();
        assert_eq!(err.reason, "refresh commands take no row");

        let err = parse_trace("12 ACT 0 9 9\n").unwrap_err();
        assert_eq!(err.reason, "unexpected trailing field");

        let err = parse_trace("# duration soon\n").unwrap_err();
        assert_eq!(err.reason, "malformed duration directive");
    }

    proptest! {
        #[test]
        fn generated_traces_round_trip(
            seed in any::<u64>(),
            n in 1usize..200,
        ) {
            let config = ComboConfig { total_acts: n, seed, ..Default::default() };
            let trace = gen_trc_combo(&config).unwrap();
            let parsed = parse_trace(&format_trace(&trace)).unwrap();
            prop_assert_eq!(parsed, trace);
        }

        #[test]
        fn attack_act_count_matches_duration(
            trc in 1u64..500,
            duration in 1u64..100_000,
        ) {
            let config = AttackConfig { trc, duration, ..AttackConfig::default() };
            let trace = gen_attack(&config).unwrap();
            prop_assert_eq!(trace.len() as u64, duration / trc);
            if let Some(last) = trace.commands.last() {
                prop_assert!(last.time < duration);
            }
        }
    }
}
