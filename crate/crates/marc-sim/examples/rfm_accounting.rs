//! Walks the refresh-management accounting by hand: the activate counter
//! climbs toward RAAIMT, REF pays it down, and raising the adaptive level
//! shrinks the budget so obligations arrive sooner.

use marc_sim::{ArfmLevel, RfmConfig};
use marc_sim::rfm::RfmState;

fn main() {
    let config = RfmConfig::default();
    println!(
        "thresholds: base {} / A {} / B {} / C {}, hard cap {}",
        config.raaimt,
        config.raaimt_a,
        config.raaimt_b,
        config.raaimt_c,
        config.raammt()
    );

    let mut state = RfmState::new();
    let bank = 0;

    for _ in 0..config.raaimt {
        state.on_act(&config, bank);
    }
    println!(
        "after {} activates: counter {} pending {}",
        config.raaimt,
        state.raa_cnt(bank),
        state.is_pending(bank)
    );

    let rfm = state.issue_rfm(&config, bank, 14_880).unwrap();
    println!(
        "issued {:?} at t={}; counter back to {}",
        rfm.kind,
        rfm.time,
        state.raa_cnt(bank)
    );

    // 130 activates sit below the base budget but above the level-A one.
    for _ in 0..130 {
        state.on_act(&config, bank);
    }
    println!(
        "130 more activates at base level: pending {}",
        state.is_pending(bank)
    );
    state.set_arfm_level(&config, ArfmLevel::A);
    println!(
        "same counter after escalating to level A (budget {}): pending {}",
        config.effective_raaimt(ArfmLevel::A),
        state.is_pending(bank)
    );

    state.on_ref(&config, bank);
    println!(
        "one REF decrements by {}: counter {} pending {}",
        config.raadec_ref,
        state.raa_cnt(bank),
        state.is_pending(bank)
    );
}
