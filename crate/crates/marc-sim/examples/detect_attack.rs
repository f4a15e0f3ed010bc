//! Feeds a hammering trace and a benign trace through the detector alone
//! and prints both window timelines side by side.

use marc_sim::patterns::AttackKind;
use marc_sim::{
    detect_trace, gen_attack, gen_normal, AttackConfig, DetectorConfig, NormalConfig, TimingConfig,
};

fn main() {
    let timing = TimingConfig::default();
    let config = DetectorConfig::default();

    let attack = gen_attack(&AttackConfig {
        kind: AttackKind::MultiSided { sides: 4 },
        trc: 70,
        duration: 8 * timing.t_refi,
        bank: 0,
        row_base: 200,
    })
    .unwrap();
    let hot = detect_trace(&attack, &timing, &config).unwrap();

    let benign = gen_normal(
        &NormalConfig { duration: 8 * timing.t_refi, seed: 1, ..NormalConfig::default() },
        &timing,
    )
    .unwrap();
    let cold = detect_trace(&benign, &timing, &config).unwrap();

    println!("window  hammer(shorts dup loop verdict)   benign(shorts verdict)");
    for (h, b) in hot.windows.iter().zip(&cold.windows) {
        println!(
            "{:>6}  {:>6} {:>5} {:>5} {:>9}   {:>6} {:>9}",
            h.index,
            h.short_count,
            h.dup,
            h.looping,
            h.verdict.as_str(),
            b.short_count,
            b.verdict.as_str(),
        );
    }
    println!(
        "\nhammer: {} attack windows, recognition {:.2}, final verdict {}",
        hot.attack_window_count,
        hot.recognition_rate,
        hot.final_verdict.as_str()
    );
    println!(
        "benign: {} attack windows, recognition {:.2}, final verdict {}",
        cold.attack_window_count,
        cold.recognition_rate,
        cold.final_verdict.as_str()
    );
}
