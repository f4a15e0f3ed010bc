//! Builds one trace of each kind and shows the text format round trip.
//!
//! Run with: cargo run --example generate_patterns

use marc_sim::patterns::{format_trace, parse_trace};
use marc_sim::{
    gen_attack, gen_normal, gen_trc_combo, AttackConfig, ComboConfig, NormalConfig, TimingConfig,
};
use marc_sim::patterns::AttackKind;

fn main() {
    let hammer = gen_attack(&AttackConfig {
        kind: AttackKind::Double,
        trc: 60,
        duration: 600,
        bank: 0,
        row_base: 100,
    })
    .unwrap();
    println!("double-sided hammer, first lines:");
    print!("{}", format_trace(&hammer));

    let combo = gen_trc_combo(&ComboConfig {
        n_distinct: 3,
        total_acts: 6,
        seed: 42,
        ..ComboConfig::default()
    })
    .unwrap();
    println!("\ncombo attack cycling 3 drawn cadences:");
    print!("{}", format_trace(&combo));

    let normal = gen_normal(
        &NormalConfig { duration: 20_000, seed: 42, ..NormalConfig::default() },
        &TimingConfig::default(),
    )
    .unwrap();
    println!("\nbenign traffic, {} activates in 20us:", normal.commands.len());
    for cmd in normal.commands.iter().take(4) {
        println!("  t={:<6} bank={} row={}", cmd.time, cmd.bank, cmd.row.unwrap());
    }

    // The text form is the interchange format; parsing it back is lossless.
    let text = format_trace(&combo);
    let reparsed = parse_trace(&text).unwrap();
    assert_eq!(reparsed.commands, combo.commands);
    assert_eq!(reparsed.duration, combo.duration);
    println!("\nround trip through the text format preserved all {} commands", combo.commands.len());
}
