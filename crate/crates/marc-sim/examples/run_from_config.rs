//! An experiment captured as the flat config text the CLI consumes. The
//! same text can be stored next to results for provenance and replayed
//! byte-for-byte later.

use marc_sim::harness::parse_config;
use marc_sim::patterns::AttackKind;
use marc_sim::{gen_attack, run_trace, AttackConfig};

const EXPERIMENT: &str = "\
# counter-based in-DRAM defense under a mild hammer
rfm.raaimt = 124
mitigation.policy = counter
mitigation.logic_threshold = 512
detector.s_trc_th = 120
run.seed = 7
";

fn main() {
    let config = parse_config(EXPERIMENT).unwrap();
    println!(
        "parsed: raaimt {} (levels {}/{}/{}), policy {}, threshold {}, seed {}",
        config.rfm.raaimt,
        config.rfm.raaimt_a,
        config.rfm.raaimt_b,
        config.rfm.raaimt_c,
        config.mitigation.policy.as_str(),
        config.mitigation.logic_threshold,
        config.seed
    );

    let trace = gen_attack(&AttackConfig {
        kind: AttackKind::MultiSided { sides: 8 },
        trc: 90,
        duration: 4_000_000,
        bank: 0,
        row_base: 50,
    })
    .unwrap();
    let report = run_trace(&trace, &config).unwrap();
    println!(
        "run: {} activates, {} rfms, {} cures, exposure {}, verdict {}",
        report.counts.acts,
        report.counts.rfms,
        report.counts.cures,
        report.max_exposure,
        report.detector.as_ref().unwrap().final_verdict.as_str()
    );
}
