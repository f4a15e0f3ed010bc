//! Helpers shared by the integration suites: an exposure oracle that
//! recomputes the ledger result from scratch, and a random-trace generator
//! that respects the activate timing floor.

use std::collections::HashMap;

use rand::Rng;

use marc_sim::dram::{Command, CommandTrace, TimeNs};

/// Independent exposure recomputation: count each row's activates per
/// retention window (window = time / t_refw) and take the overall maximum.
/// Matches the engine's roll-at-boundary semantics where an activate landing
/// exactly on a boundary opens the new window.
pub fn brute_force_max_exposure(trace: &CommandTrace, t_refw: TimeNs) -> u64 {
    let mut counts: HashMap<(u32, u64, u64), u64> = HashMap::new();
    let mut max = 0u64;
    for cmd in &trace.commands {
        if let (marc_sim::CommandKind::Act, Some(row)) = (cmd.kind, cmd.row) {
            let slot = counts.entry((cmd.bank, row, cmd.time / t_refw)).or_insert(0);
            *slot += 1;
            max = max.max(*slot);
        }
    }
    max
}

/// Random well-formed trace: monotone timestamps with gaps of at least the
/// default tRCmin, a mix of ACT/REF/RFM commands over a few banks.
pub fn random_trace(rng: &mut impl Rng, max_commands: usize) -> CommandTrace {
    let n = rng.gen_range(1..=max_commands);
    let mut commands = Vec::with_capacity(n);
    let mut t: TimeNs = rng.gen_range(0..500);
    for _ in 0..n {
        let bank = rng.gen_range(0..4);
        let cmd = match rng.gen_range(0..10) {
            0 => Command::refresh(t, bank),
            1 => Command::rfm(t, bank),
            _ => Command::act(t, bank, rng.gen_range(0..64)),
        };
        commands.push(cmd);
        t += rng.gen_range(60..3_000);
    }
    let duration = t;
    CommandTrace { commands, duration }
}
