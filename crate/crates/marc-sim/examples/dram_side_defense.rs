//! In-DRAM mitigation with and without the detector. Vanilla schemes can
//! only cure victims in the slots a plain refresh schedule grants them;
//! once the detector escalates the adaptive level, refresh-management
//! commands multiply those slots.

use marc_sim::patterns::AttackKind;
use marc_sim::{
    gen_attack, run_trace, AttackConfig, AttachSide, MitigationConfig, MitigationPolicy, SimConfig,
};

fn show(label: &str, report: &marc_sim::SimReport) {
    println!(
        "{label:<22} exposure {:>6}  rfms {:>6}  cures {:>7}  level {}",
        report.max_exposure,
        report.counts.rfms,
        report.counts.cures,
        report.final_arfm_level.as_str()
    );
}

fn main() {
    // 50 aggressor rows hammered at the minimum cadence for one retention
    // window: the strongest pattern the sweeps use.
    let trace = gen_attack(&AttackConfig {
        kind: AttackKind::MultiSided { sides: 50 },
        trc: 60,
        duration: 128_000_000,
        bank: 0,
        row_base: 100,
    })
    .unwrap();

    for policy in [MitigationPolicy::Probabilistic, MitigationPolicy::CounterBased] {
        let assisted = SimConfig {
            mitigation: MitigationConfig {
                policy,
                attach: AttachSide::DramSide,
                ..MitigationConfig::default()
            },
            ..SimConfig::default()
        };
        let vanilla_report = run_trace(&trace, &assisted.vanilla_like()).unwrap();
        let assisted_report = run_trace(&trace, &assisted).unwrap();
        println!("policy: {}", policy.as_str());
        show("  vanilla", &vanilla_report);
        show("  detector-assisted", &assisted_report);
        println!(
            "  improvement {:.1}x\n",
            vanilla_report.max_exposure as f64 / assisted_report.max_exposure as f64
        );
    }
}
