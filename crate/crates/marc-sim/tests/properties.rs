//! Cross-module properties: the full engine must agree with the standalone
//! detector path, extra detector-driven cure slots must never increase
//! exposure, and the exposure ledger must agree with a from-scratch replay.

mod common;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use marc_sim::detector::detect_trace;
use marc_sim::mitigation::{AttachSide, MitigationConfig, MitigationPolicy};
use marc_sim::patterns::{gen_attack, AttackConfig, AttackKind};
use marc_sim::rfm::RfmConfig;
use marc_sim::sim::{run_trace, SimConfig};

fn any_policy(idx: u8) -> MitigationPolicy {
    match idx % 4 {
        0 => MitigationPolicy::None,
        1 => MitigationPolicy::Probabilistic,
        2 => MitigationPolicy::CounterBased,
        _ => MitigationPolicy::Para,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Whatever the defense configuration does to the command stream, the
    /// engine feeds the detector exactly what the standalone replay sees.
    #[test]
    fn engine_detector_matches_fast_path(
        seed in any::<u64>(),
        policy_idx in 0u8..4,
        attach_mc in any::<bool>(),
        rfm_on in any::<bool>(),
    ) {
        let trace = common::random_trace(&mut StdRng::seed_from_u64(seed), 2_000);
        let config = SimConfig {
            rfm: RfmConfig { rfm_enabled: rfm_on, ..RfmConfig::default() },
            mitigation: MitigationConfig {
                policy: any_policy(policy_idx),
                attach: if attach_mc { AttachSide::McSide } else { AttachSide::DramSide },
                ..MitigationConfig::default()
            },
            seed,
            ..SimConfig::default()
        };
        let report = run_trace(&trace, &config).unwrap();
        let standalone =
            detect_trace(&trace, &config.timing, &config.detector).unwrap();
        let engine_view = report.detector.unwrap();
        prop_assert_eq!(engine_view.windows, standalone.windows);
        prop_assert_eq!(engine_view.final_verdict, standalone.final_verdict);
        prop_assert_eq!(engine_view.recognition_rate, standalone.recognition_rate);
    }

    /// Turning the detector on only adds cure slots for the probabilistic
    /// scheme, so per seed it can never leave a row more exposed.
    #[test]
    fn detector_assistance_never_worsens_probabilistic_exposure(
        seed in any::<u64>(),
        sides in 1u64..8,
        trc in 60u64..100,
        windows in 3u64..24,
    ) {
        let trace = gen_attack(&AttackConfig {
            kind: AttackKind::MultiSided { sides },
            trc,
            duration: windows * 15_600,
            bank: 0,
            row_base: 10,
        }).unwrap();
        let defended = SimConfig {
            mitigation: MitigationConfig {
                policy: MitigationPolicy::Probabilistic,
                ..MitigationConfig::default()
            },
            seed,
            ..SimConfig::default()
        };
        let with_marc = run_trace(&trace, &defended).unwrap();
        let vanilla = run_trace(&trace, &defended.vanilla_like()).unwrap();
        prop_assert!(with_marc.counts.cures >= vanilla.counts.cures);
        prop_assert!(with_marc.max_exposure <= vanilla.max_exposure);
    }

    /// The incremental ledger agrees exactly with a from-scratch recount on
    /// undefended runs, and any defense only lowers the result.
    #[test]
    fn ledger_agrees_with_brute_force_replay(
        seed in any::<u64>(),
        policy_idx in 1u8..4,
    ) {
        let trace = common::random_trace(&mut StdRng::seed_from_u64(seed), 2_000);
        let undefended = SimConfig::default().undefended_like();
        let report = run_trace(&trace, &undefended).unwrap();
        let oracle = common::brute_force_max_exposure(&trace, undefended.timing.t_refw);
        prop_assert_eq!(report.max_exposure, oracle);

        let defended = SimConfig {
            mitigation: MitigationConfig {
                policy: any_policy(policy_idx),
                ..MitigationConfig::default()
            },
            seed,
            ..SimConfig::default()
        };
        let defended_report = run_trace(&trace, &defended).unwrap();
        prop_assert!(defended_report.max_exposure <= oracle);
    }
}
