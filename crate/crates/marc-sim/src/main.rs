//! Command-line front end: trace generation, single runs, the two sweep
//! suites, detector-only replay and the recognition benchmark. Every
//! subcommand that takes a seed defaults it from `MARC_SEED`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use marc_sim::detector::detect_trace;
use marc_sim::dram::CommandTrace;
use marc_sim::harness::{
    self, AggrSweep, BenchDetect, TrcSweep,
};
use marc_sim::patterns::{
    format_trace, gen_attack, gen_normal, gen_trc_combo, parse_trace, AttackConfig, AttackKind,
    ComboConfig, NormalConfig,
};
use marc_sim::sim::{run_trace, SimConfig, SimReport};

#[derive(Parser)]
#[command(name = "marc-sim", version, about = "DRAM command-stream simulator with a row-hammer attack detector")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate a command trace
    Gen(GenArgs),
    /// Simulate a trace end to end and report exposure, RFM and verdict
    Run(RunArgs),
    /// Sweep the attack cadence (tRC) and emit a MER CSV
    SweepTrc(SweepTrcArgs),
    /// Sweep the aggressor-row count and emit a MER CSV
    SweepAggr(SweepAggrArgs),
    /// Replay a trace through the detector alone; emits the window timeline
    Detect(DetectArgs),
    /// Recognition-rate benchmark over random cycle-time combos
    BenchDetect(BenchDetectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Single,
    Double,
    Multi,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    what: GenCommands,
}

#[derive(Subcommand)]
enum GenCommands {
    /// Fixed-cadence hammering of one or more rows
    Attack {
        #[arg(long, value_enum, default_value = "multi")]
        pattern: PatternArg,
        /// Aggressor rows for the multi pattern
        #[arg(long, default_value_t = 50)]
        sides: u64,
        /// Activate-to-activate gap in ns
        #[arg(long, default_value_t = 60)]
        trc: u64,
        #[arg(long, default_value_t = 128_000_000)]
        duration: u64,
        #[arg(long, default_value_t = 0)]
        bank: u32,
        #[arg(long, default_value_t = 100)]
        row_base: u64,
        /// Output path; '-' for stdout
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Hammering whose gaps cycle through n randomly drawn tRC values
    Combo {
        #[arg(long, default_value_t = 4)]
        n_distinct: usize,
        #[arg(long, default_value_t = 60)]
        pool_lo: u64,
        #[arg(long, default_value_t = 100)]
        pool_hi: u64,
        #[arg(long, default_value_t = 60_000)]
        acts: usize,
        #[arg(long, default_value_t = 8)]
        rows: u64,
        #[arg(long, default_value_t = 0)]
        bank: u32,
        #[arg(long, env = "MARC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Benign traffic: mostly long gaps, uniformly spread rows
    Normal {
        #[arg(long, default_value_t = 128_000_000)]
        duration: u64,
        #[arg(long, default_value_t = 0.3)]
        short_fraction: f64,
        #[arg(long, default_value_t = 200)]
        long_lo: u64,
        #[arg(long, default_value_t = 5_000)]
        long_hi: u64,
        #[arg(long, default_value_t = 1_024)]
        rows: u64,
        #[arg(long, default_value_t = 0)]
        bank: u32,
        #[arg(long, env = "MARC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
}

/// Options shared by every subcommand that builds a full run configuration.
#[derive(Args)]
struct ConfigArgs {
    /// Configuration file of section.key=value lines
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. -s mitigation.policy=para (repeatable)
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// RNG seed; overrides the file's run.seed
    #[arg(long, env = "MARC_SEED")]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn build(&self) -> Result<SimConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                harness::parse_config(&text)?
            }
            None => SimConfig::default(),
        };
        let pairs = self
            .set
            .iter()
            .map(|s| {
                s.split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| anyhow!("override '{s}' is not key=value"))
            })
            .collect::<Result<Vec<_>>>()?;
        harness::apply_settings(&mut config, pairs)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Trace file; '-' for stdin
    #[arg(short, long)]
    trace: String,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the per-window detection timeline CSV here
    #[arg(long)]
    windows: Option<PathBuf>,
    /// Write the victim-refresh log CSV here
    #[arg(long)]
    cures: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Trace file; '-' for stdin
    #[arg(short, long)]
    trace: String,
    #[command(flatten)]
    config: ConfigArgs,
    /// Timeline CSV destination; '-' for stdout
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct SweepCommonArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Number of seeds averaged per point (seed, seed+1, ...)
    #[arg(long, default_value_t = 30)]
    seeds: u64,
    #[arg(long, default_value_t = 128_000_000)]
    duration: u64,
    #[arg(long, default_value_t = 0)]
    bank: u32,
    #[arg(long, default_value_t = 100)]
    row_base: u64,
    /// CSV destination; '-' for stdout
    #[arg(short, long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct SweepTrcArgs {
    /// Cadences to sweep, in ns
    #[arg(long, value_delimiter = ',', default_value = "60,70,80,90,100")]
    trcs: Vec<u64>,
    /// Fixed aggressor-row count
    #[arg(long, default_value_t = 50)]
    sides: u64,
    /// Cadence anchoring MER = 1 for the vanilla scheme
    #[arg(long, default_value_t = 60)]
    baseline_trc: u64,
    #[command(flatten)]
    common: SweepCommonArgs,
}

#[derive(Args)]
struct SweepAggrArgs {
    /// Aggressor-row counts to sweep
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60,70,80,90")]
    sides: Vec<u64>,
    /// Fixed cadence in ns
    #[arg(long, default_value_t = 60)]
    trc: u64,
    /// Aggressor count anchoring MER = 1 for the vanilla scheme
    #[arg(long, default_value_t = 50)]
    baseline_sides: u64,
    #[command(flatten)]
    common: SweepCommonArgs,
}

#[derive(Args)]
struct BenchDetectArgs {
    /// Distinct-value counts to benchmark
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20,50,70,90")]
    n_values: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    combos: usize,
    #[arg(long, default_value_t = 60)]
    pool_lo: u64,
    #[arg(long, default_value_t = 100)]
    pool_hi: u64,
    #[arg(long, default_value_t = 60_000)]
    acts: usize,
    #[command(flatten)]
    config: ConfigArgs,
    /// CSV destination; '-' for stdout
    #[arg(short, long, default_value = "-")]
    output: String,
}

fn write_output(dest: &str, content: &str) -> Result<()> {
    if dest == "-" {
        std::io::stdout().write_all(content.as_bytes())?;
        Ok(())
    } else {
        fs::write(dest, content).with_context(|| format!("writing {dest}"))
    }
}

fn read_trace(source: &str) -> Result<CommandTrace> {
    let text = if source == "-" {
        std::io::read_to_string(std::io::stdin()).context("reading trace from stdin")?
    } else {
        fs::read_to_string(source).with_context(|| format!("reading trace {source}"))?
    };
    Ok(parse_trace(&text)?)
}

fn seed_list(base: u64, count: u64) -> Vec<u64> {
    (0..count).map(|i| base.wrapping_add(i)).collect()
}

fn print_report(report: &SimReport) {
    println!("duration={}", report.duration);
    println!("acts={}", report.counts.acts);
    println!("refs={}", report.counts.refs);
    println!("rfms={}", report.counts.rfms);
    println!("cures={}", report.counts.cures);
    println!("rfm_share={:.6}", report.counts.rfm_share());
    println!("max_exposure={}", report.max_exposure);
    match report.max_row {
        Some((bank, row)) => println!("max_row={bank}:{row}"),
        None => println!("max_row=none"),
    }
    println!("arfm_level={}", report.final_arfm_level.as_str());
    if let Some(det) = &report.detector {
        println!("verdict={}", det.final_verdict.as_str());
        println!("attack_windows={}", det.attack_window_count);
        println!("recognition_rate={:.6}", det.recognition_rate);
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let (trace, output) = match args.what {
        GenCommands::Attack { pattern, sides, trc, duration, bank, row_base, output } => {
            let kind = match pattern {
                PatternArg::Single => AttackKind::Single,
                PatternArg::Double => AttackKind::Double,
                PatternArg::Multi => AttackKind::MultiSided { sides },
            };
            let config = AttackConfig { kind, trc, duration, bank, row_base };
            (gen_attack(&config)?, output)
        }
        GenCommands::Combo { n_distinct, pool_lo, pool_hi, acts, rows, bank, seed, output } => {
            let config = ComboConfig {
                n_distinct,
                pool_lo,
                pool_hi,
                total_acts: acts,
                rows,
                bank,
                seed,
            };
            (gen_trc_combo(&config)?, output)
        }
        GenCommands::Normal {
            duration,
            short_fraction,
            long_lo,
            long_hi,
            rows,
            bank,
            seed,
            output,
        } => {
            let config = NormalConfig {
                duration,
                short_fraction,
                long_lo,
                long_hi,
                rows,
                bank,
                seed,
            };
            (gen_normal(&config, &marc_sim::TimingConfig::default())?, output)
        }
    };
    write_output(&output, &format_trace(&trace))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = args.config.build()?;
    if args.cures.is_some() {
        config.record_cures = true;
    }
    let trace = read_trace(&args.trace)?;
    let report = run_trace(&trace, &config)?;
    if let Some(path) = &args.windows {
        let det = report
            .detector
            .as_ref()
            .ok_or_else(|| anyhow!("--windows needs the detector; set run.marc=true"))?;
        fs::write(path, harness::windows_csv(det))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.cures {
        fs::write(path, harness::cures_csv(&report.cure_events))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print_report(&report);
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let config = args.config.build()?;
    let trace = read_trace(&args.trace)?;
    let report = detect_trace(&trace, &config.timing, &config.detector)?;
    eprintln!(
        "windows={} attack_windows={} verdict={} recognition_rate={:.6}",
        report.windows.len(),
        report.attack_window_count,
        report.final_verdict.as_str(),
        report.recognition_rate
    );
    write_output(&args.output, &harness::windows_csv(&report))
}

fn cmd_sweep_trc(args: SweepTrcArgs) -> Result<()> {
    let defended = args.common.config.build()?;
    let sweep = TrcSweep {
        trcs: args.trcs,
        sides: args.sides,
        baseline_trc: args.baseline_trc,
        duration: args.common.duration,
        bank: args.common.bank,
        row_base: args.common.row_base,
        seeds: seed_list(defended.seed, args.common.seeds),
        defended,
    };
    let points = harness::sweep_trc(&sweep)?;
    write_output(&args.common.output, &harness::sweep_csv(&points))
}

fn cmd_sweep_aggr(args: SweepAggrArgs) -> Result<()> {
    let defended = args.common.config.build()?;
    let sweep = AggrSweep {
        sides_list: args.sides,
        trc: args.trc,
        baseline_sides: args.baseline_sides,
        duration: args.common.duration,
        bank: args.common.bank,
        row_base: args.common.row_base,
        seeds: seed_list(defended.seed, args.common.seeds),
        defended,
    };
    let points = harness::sweep_aggr(&sweep)?;
    write_output(&args.common.output, &harness::sweep_csv(&points))
}

fn cmd_bench_detect(args: BenchDetectArgs) -> Result<()> {
    let config = args.config.build()?;
    let bench = BenchDetect {
        n_values: args.n_values,
        combos_per_n: args.combos,
        pool_lo: args.pool_lo,
        pool_hi: args.pool_hi,
        total_acts: args.acts,
        seed: config.seed,
        timing: config.timing,
        detector: config.detector,
    };
    let rows = harness::bench_detect(&bench)?;
    write_output(&args.output, &harness::bench_csv(&rows))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Commands::Gen(args) => cmd_gen(args),
        Commands::Run(args) => cmd_run(args),
        Commands::SweepTrc(args) => cmd_sweep_trc(args),
        Commands::SweepAggr(args) => cmd_sweep_aggr(args),
        Commands::Detect(args) => cmd_detect(args),
        Commands::BenchDetect(args) => cmd_bench_detect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
