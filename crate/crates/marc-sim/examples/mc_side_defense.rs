//! Controller-side mitigation lives or dies by refresh-management slots:
//! without the detector there are none, so the sampler and the tracking
//! table watch helplessly. With it, every issued RFM is a cure slot.

use marc_sim::patterns::AttackKind;
use marc_sim::{
    gen_attack, run_trace, AttackConfig, AttachSide, MitigationConfig, MitigationPolicy, SimConfig,
};

fn main() {
    let trace = gen_attack(&AttackConfig {
        kind: AttackKind::MultiSided { sides: 50 },
        trc: 60,
        duration: 128_000_000,
        bank: 0,
        row_base: 100,
    })
    .unwrap();

    for (label, policy) in [
        ("random sampling (PARA-style)", MitigationPolicy::Para),
        ("frequent-item table (Graphene-style)", MitigationPolicy::CounterBased),
    ] {
        let assisted = SimConfig {
            mitigation: MitigationConfig {
                policy,
                attach: AttachSide::McSide,
                ..MitigationConfig::default()
            },
            ..SimConfig::default()
        };
        let vanilla = run_trace(&trace, &assisted.vanilla_like()).unwrap();
        let with_detector = run_trace(&trace, &assisted).unwrap();
        println!("{label}");
        println!(
            "  vanilla:            exposure {:>6}  cures {:>6}",
            vanilla.max_exposure, vanilla.counts.cures
        );
        println!(
            "  detector-assisted:  exposure {:>6}  cures {:>6}  rfm share {:.3}",
            with_detector.max_exposure,
            with_detector.counts.cures,
            with_detector.counts.rfm_share()
        );
        println!(
            "  improvement {:.0}x\n",
            vanilla.max_exposure as f64 / with_detector.max_exposure as f64
        );
    }
}
