//! Reproduces the cadence sweep at reduced scale and prints the CSV the
//! command-line tool would emit. Every cadence yields a vanilla row and a
//! detector-assisted row; exposure ratios are normalized so the vanilla
//! scheme at 60 ns reads 1.0.

use marc_sim::harness::{sweep_csv, sweep_trc, TrcSweep};
use marc_sim::{AttachSide, MitigationConfig, MitigationPolicy, SimConfig};

fn main() {
    let sweep = TrcSweep {
        trcs: vec![60, 70, 80, 90, 100],
        sides: 50,
        baseline_trc: 60,
        duration: 16_000_000,
        bank: 0,
        row_base: 100,
        seeds: (0..8).collect(),
        defended: SimConfig {
            mitigation: MitigationConfig {
                policy: MitigationPolicy::Probabilistic,
                attach: AttachSide::DramSide,
                ..MitigationConfig::default()
            },
            ..SimConfig::default()
        },
    };
    let points = sweep_trc(&sweep).unwrap();
    print!("{}", sweep_csv(&points));

    let worst = points
        .chunks(2)
        .map(|pair| (pair[0].param, pair[0].mer_mean / pair[1].mer_mean))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    println!("\nsmallest improvement {:.1}x at {} ns", worst.1, worst.0);
}
